//! The complete set of handshake fields recovered from one flow, and the
//! dynamic value type the attribute registry reads them through.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quic::{QuicHeaderFields, QuicTransportParams};
use crate::tls::{ClientHello, TcpHandshakeFields};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "TCP")]
    Tcp,
    #[serde(rename = "QUIC")]
    Quic,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Tcp => "TCP",
            Protocol::Quic => "QUIC",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TCP" => Ok(Protocol::Tcp),
            "QUIC" => Ok(Protocol::Quic),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

/// Everything the classifier may look at for one flow: the transport
/// handshake, the ClientHello, and (for QUIC) the transport parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeFieldSet {
    pub protocol: Protocol,
    /// IP total length of the first client packet (SYN or first Initial).
    pub init_packet_size: u32,
    /// IP TTL (or IPv6 hop limit) of that packet.
    pub ttl: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tcp: Option<TcpHandshakeFields>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quic_header: Option<QuicHeaderFields>,
    pub chlo: ClientHello,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quic_params: Option<QuicTransportParams>,
}

/// One attribute's value before numeric encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldValue {
    /// Field not present (or not applicable to the protocol).
    Absent,
    Num(u64),
    /// Byte length of a field whose content is not interesting.
    Len(usize),
    Flag(bool),
    /// A single dictionary token.
    Cat(String),
    /// Ordered dictionary tokens.
    List(Vec<String>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_round_trips_through_text() {
        for p in [Protocol::Tcp, Protocol::Quic] {
            assert_eq!(p.to_string().parse::<Protocol>().unwrap(), p);
        }
        assert_eq!("tcp".parse::<Protocol>().unwrap(), Protocol::Tcp);
        assert!("SCTP".parse::<Protocol>().is_err());
    }

    #[test]
    fn protocol_serializes_uppercase() {
        assert_eq!(serde_json::to_string(&Protocol::Quic).unwrap(), "\"QUIC\"");
    }
}
