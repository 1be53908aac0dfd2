//! TLS ClientHello extraction and parsing, plus the TCP SYN field reader.

mod build;
mod parse;
mod record;

pub use build::{build_client_hello, wrap_handshake, wrap_records, ChloSpec, ExtSpec, SessionIdSpec};
pub use parse::{parse_client_hello, ClientHello, DecodedExtensions, Extension};
pub use record::{extract_chlo, ExtractedChlo};

use crate::packet::{tcp_flags, PacketView, Transport};

/// Canonical stand-in for any GREASE code point (RFC 8701 pattern 0x?A?A).
pub const GREASE_CANONICAL: u16 = 0x0a0a;

/// All sixteen GREASE code points.
pub const GREASE_VALUES: [u16; 16] = [
    0x0a0a, 0x1a1a, 0x2a2a, 0x3a3a, 0x4a4a, 0x5a5a, 0x6a6a, 0x7a7a, 0x8a8a, 0x9a9a, 0xaaaa,
    0xbaba, 0xcaca, 0xdada, 0xeaea, 0xfafa,
];

pub fn is_grease(v: u16) -> bool {
    (v >> 8) == (v & 0xff) && (v & 0x0f) == 0x0a
}

pub fn canonicalize_grease(v: u16) -> u16 {
    if is_grease(v) {
        GREASE_CANONICAL
    } else {
        v
    }
}

/// TLS extension type codes decoded by the parser.
pub mod ext_type {
    pub const SERVER_NAME: u16 = 0;
    pub const STATUS_REQUEST: u16 = 5;
    pub const SUPPORTED_GROUPS: u16 = 10;
    pub const EC_POINT_FORMATS: u16 = 11;
    pub const SIGNATURE_ALGORITHMS: u16 = 13;
    pub const ALPN: u16 = 16;
    pub const SIGNED_CERTIFICATE_TIMESTAMP: u16 = 18;
    pub const PADDING: u16 = 21;
    pub const ENCRYPT_THEN_MAC: u16 = 22;
    pub const EXTENDED_MASTER_SECRET: u16 = 23;
    pub const COMPRESS_CERTIFICATE: u16 = 27;
    pub const RECORD_SIZE_LIMIT: u16 = 28;
    pub const DELEGATED_CREDENTIALS: u16 = 34;
    pub const SESSION_TICKET: u16 = 35;
    pub const PRE_SHARED_KEY: u16 = 41;
    pub const EARLY_DATA: u16 = 42;
    pub const SUPPORTED_VERSIONS: u16 = 43;
    pub const PSK_KEY_EXCHANGE_MODES: u16 = 45;
    pub const POST_HANDSHAKE_AUTH: u16 = 49;
    pub const KEY_SHARE: u16 = 51;
    pub const QUIC_TRANSPORT_PARAMETERS: u16 = 57;
    pub const APPLICATION_SETTINGS: u16 = 17513;
    pub const RENEGOTIATION_INFO: u16 = 65281;
}

/// Flags and options read from the client's first SYN segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct TcpHandshakeFields {
    pub cwr: bool,
    pub ece: bool,
    pub urg: bool,
    pub ack: bool,
    pub psh: bool,
    pub rst: bool,
    pub syn: bool,
    pub fin: bool,
    pub window_size: u16,
    pub mss: Option<u16>,
    pub window_scale: Option<u8>,
    pub sack_permitted: bool,
}

/// Reads flags and options from a SYN packet. Malformed options leave the
/// option fields empty; the flags are still returned.
pub fn parse_syn(pkt: &PacketView) -> TcpHandshakeFields {
    debug_assert_eq!(pkt.transport, Transport::Tcp);
    let flags = pkt.tcp_flags.unwrap_or(0);
    let mut out = TcpHandshakeFields {
        cwr: flags & tcp_flags::CWR != 0,
        ece: flags & tcp_flags::ECE != 0,
        urg: flags & tcp_flags::URG != 0,
        ack: flags & tcp_flags::ACK != 0,
        psh: flags & tcp_flags::PSH != 0,
        rst: flags & tcp_flags::RST != 0,
        syn: flags & tcp_flags::SYN != 0,
        fin: flags & tcp_flags::FIN != 0,
        window_size: pkt.tcp_window.unwrap_or(0),
        mss: None,
        window_scale: None,
        sack_permitted: false,
    };
    let opts = pkt.tcp_options.unwrap_or(&[]);
    let mut i = 0;
    while i < opts.len() {
        match opts[i] {
            0 => break,
            1 => {
                i += 1;
                continue;
            }
            kind => {
                if i + 1 >= opts.len() {
                    return malformed_options(out);
                }
                let len = opts[i + 1] as usize;
                if len < 2 || i + len > opts.len() {
                    return malformed_options(out);
                }
                let body = &opts[i + 2..i + len];
                match (kind, body.len()) {
                    (2, 2) => out.mss = Some(u16::from_be_bytes([body[0], body[1]])),
                    (3, 1) => out.window_scale = Some(body[0]),
                    (4, 0) => out.sack_permitted = true,
                    _ => {}
                }
                i += len;
            }
        }
    }
    out
}

fn malformed_options(mut fields: TcpHandshakeFields) -> TcpHandshakeFields {
    fields.mss = None;
    fields.window_scale = None;
    fields.sack_permitted = false;
    fields
}
