//! Flow analysis for video streaming traffic: parses capture files,
//! recovers TCP/QUIC + TLS handshake fields per flow, encodes them into
//! fixed attribute vectors, and classifies the user platform behind each
//! flow with random-forest model banks. Includes a synthetic capture
//! generator for tests and a telemetry reporter.

pub mod attr;
pub mod bank;
pub mod bytes;
pub mod error;
pub mod fields;
pub mod flow;
pub mod forest;
pub mod hexbytes;
pub mod packet;
pub mod pcap;
pub mod pipeline;
pub mod provider;
pub mod quic;
pub mod rank;
pub mod report;
pub mod synth;
pub mod tls;

pub use error::{Error, Result};
