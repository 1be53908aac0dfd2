//! QUIC v1 Initial packet handling, just deep enough to recover the
//! ClientHello and transport parameters from the first client flight.

pub mod initial;
pub mod keys;
pub mod params;
pub mod varint;

pub use initial::{
    decrypt_initial, initial_dcid, is_quic_initial, parse_frames, reassemble_crypto,
    seal_initial, try_reassemble, CryptoChunk, InitialPacket, QuicHeaderFields, SealSpec,
};
pub use keys::{derive_initial_keys, InitialKeys, QUIC_V1};
pub use params::{
    build_transport_params, is_grease_param_id, parse_transport_params, ParamEntry,
    ParamRegistry, QuicTransportParams, GREASE_PARAM_CANONICAL,
};
