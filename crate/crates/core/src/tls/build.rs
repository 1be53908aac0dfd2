//! ClientHello wire builder, the parser's inverse for synthetic corpora.

use rand::Rng;

use crate::bytes::PutBytes;
use crate::tls::{ext_type, is_grease, GREASE_VALUES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionIdSpec {
    Empty,
    Random32,
}

/// Declarative ClientHello contents. GREASE positions are written with the
/// canonical 0x0a0a placeholder; the builder substitutes a random variant.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChloSpec {
    pub legacy_version: u16,
    pub session_id: SessionIdSpec,
    pub cipher_suites: Vec<u16>,
    pub compression_methods: Vec<u8>,
    pub extensions: Vec<ExtSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "ext", content = "value", rename_all = "snake_case")]
pub enum ExtSpec {
    ServerName(String),
    StatusRequest(u8),
    SupportedGroups(Vec<u16>),
    EcPointFormats(Vec<u8>),
    SignatureAlgorithms(Vec<u16>),
    Alpn(Vec<String>),
    SignedCertificateTimestamp,
    Padding(u16),
    EncryptThenMac,
    ExtendedMasterSecret,
    CompressCertificate(Vec<u16>),
    RecordSizeLimit(u16),
    DelegatedCredentials(Vec<u16>),
    /// Opaque ticket of the given length (zero for a fresh session).
    SessionTicket(u16),
    PreSharedKey {
        identity_len: u16,
    },
    EarlyData,
    SupportedVersions(Vec<u16>),
    PskKeyExchangeModes(Vec<u8>),
    PostHandshakeAuth,
    /// Entries of (group, key length); GREASE groups get a 1-byte key.
    KeyShare(Vec<(u16, u16)>),
    ApplicationSettings(Vec<String>),
    RenegotiationInfo,
    GreaseExtension {
        body_len: u16,
    },
    QuicTransportParameters(#[serde(with = "crate::hexbytes")] Vec<u8>),
    Raw {
        type_code: u16,
        #[serde(with = "crate::hexbytes")]
        body: Vec<u8>,
    },
}

fn grease_value(rng: &mut impl Rng) -> u16 {
    GREASE_VALUES[rng.gen_range(0..GREASE_VALUES.len())]
}

fn materialize(code: u16, rng: &mut impl Rng) -> u16 {
    if is_grease(code) {
        grease_value(rng)
    } else {
        code
    }
}

/// Builds the handshake message body (no 4-byte handshake header).
pub fn build_client_hello(spec: &ChloSpec, rng: &mut impl Rng) -> Vec<u8> {
    let mut body = Vec::with_capacity(512);
    body.put_u16(spec.legacy_version);
    let mut random = [0u8; 32];
    rng.fill(&mut random[..]);
    body.extend_from_slice(&random);
    match spec.session_id {
        SessionIdSpec::Empty => body.put_u8(0),
        SessionIdSpec::Random32 => {
            body.put_u8(32);
            let mut sid = [0u8; 32];
            rng.fill(&mut sid[..]);
            body.extend_from_slice(&sid);
        }
    }
    body.put_u16((spec.cipher_suites.len() * 2) as u16);
    for &c in &spec.cipher_suites {
        body.put_u16(materialize(c, rng));
    }
    body.put_u8(spec.compression_methods.len() as u8);
    body.extend_from_slice(&spec.compression_methods);

    let mut exts = Vec::with_capacity(256);
    for e in &spec.extensions {
        let (type_code, ext_body) = build_extension(e, rng);
        exts.put_u16(type_code);
        exts.put_u16(ext_body.len() as u16);
        exts.extend_from_slice(&ext_body);
    }
    body.put_u16(exts.len() as u16);
    body.extend_from_slice(&exts);
    body
}

fn build_extension(spec: &ExtSpec, rng: &mut impl Rng) -> (u16, Vec<u8>) {
    let mut b = Vec::new();
    match spec {
        ExtSpec::ServerName(name) => {
            b.put_u16((name.len() + 3) as u16);
            b.put_u8(0);
            b.put_u16(name.len() as u16);
            b.extend_from_slice(name.as_bytes());
            (ext_type::SERVER_NAME, b)
        }
        ExtSpec::StatusRequest(status_type) => {
            b.put_u8(*status_type);
            b.put_u16(0);
            b.put_u16(0);
            (ext_type::STATUS_REQUEST, b)
        }
        ExtSpec::SupportedGroups(groups) => {
            b.put_u16((groups.len() * 2) as u16);
            for &g in groups {
                b.put_u16(materialize(g, rng));
            }
            (ext_type::SUPPORTED_GROUPS, b)
        }
        ExtSpec::EcPointFormats(formats) => {
            b.put_u8(formats.len() as u8);
            b.extend_from_slice(formats);
            (ext_type::EC_POINT_FORMATS, b)
        }
        ExtSpec::SignatureAlgorithms(schemes) => {
            b.put_u16((schemes.len() * 2) as u16);
            for &s in schemes {
                b.put_u16(materialize(s, rng));
            }
            (ext_type::SIGNATURE_ALGORITHMS, b)
        }
        ExtSpec::Alpn(protocols) => (ext_type::ALPN, string_list(protocols)),
        ExtSpec::SignedCertificateTimestamp => (ext_type::SIGNED_CERTIFICATE_TIMESTAMP, b),
        ExtSpec::Padding(n) => {
            b.resize(*n as usize, 0);
            (ext_type::PADDING, b)
        }
        ExtSpec::EncryptThenMac => (ext_type::ENCRYPT_THEN_MAC, b),
        ExtSpec::ExtendedMasterSecret => (ext_type::EXTENDED_MASTER_SECRET, b),
        ExtSpec::CompressCertificate(algs) => {
            b.put_u8((algs.len() * 2) as u8);
            for &a in algs {
                b.put_u16(a);
            }
            (ext_type::COMPRESS_CERTIFICATE, b)
        }
        ExtSpec::RecordSizeLimit(limit) => {
            b.put_u16(*limit);
            (ext_type::RECORD_SIZE_LIMIT, b)
        }
        ExtSpec::DelegatedCredentials(schemes) => {
            b.put_u16((schemes.len() * 2) as u16);
            for &s in schemes {
                b.put_u16(materialize(s, rng));
            }
            (ext_type::DELEGATED_CREDENTIALS, b)
        }
        ExtSpec::SessionTicket(len) => {
            b.resize(*len as usize, 0xab);
            (ext_type::SESSION_TICKET, b)
        }
        ExtSpec::PreSharedKey { identity_len } => {
            b.put_u16(identity_len + 6);
            b.put_u16(*identity_len);
            b.resize(b.len() + *identity_len as usize, 0xcd);
            b.put_u32(0);
            b.put_u16(33);
            b.put_u8(32);
            b.resize(b.len() + 32, 0xef);
            (ext_type::PRE_SHARED_KEY, b)
        }
        ExtSpec::EarlyData => (ext_type::EARLY_DATA, b),
        ExtSpec::SupportedVersions(versions) => {
            b.put_u8((versions.len() * 2) as u8);
            for &v in versions {
                b.put_u16(materialize(v, rng));
            }
            (ext_type::SUPPORTED_VERSIONS, b)
        }
        ExtSpec::PskKeyExchangeModes(modes) => {
            b.put_u8(modes.len() as u8);
            b.extend_from_slice(modes);
            (ext_type::PSK_KEY_EXCHANGE_MODES, b)
        }
        ExtSpec::PostHandshakeAuth => (ext_type::POST_HANDSHAKE_AUTH, b),
        ExtSpec::KeyShare(entries) => {
            let mut list = Vec::new();
            for &(group, key_len) in entries {
                list.put_u16(materialize(group, rng));
                list.put_u16(key_len);
                let start = list.len();
                list.resize(start + key_len as usize, 0);
                rng.fill(&mut list[start..]);
            }
            b.put_u16(list.len() as u16);
            b.extend_from_slice(&list);
            (ext_type::KEY_SHARE, b)
        }
        ExtSpec::ApplicationSettings(protocols) => {
            (ext_type::APPLICATION_SETTINGS, string_list(protocols))
        }
        ExtSpec::RenegotiationInfo => {
            b.put_u8(0);
            (ext_type::RENEGOTIATION_INFO, b)
        }
        ExtSpec::GreaseExtension { body_len } => {
            b.resize(*body_len as usize, 0);
            (grease_value(rng), b)
        }
        ExtSpec::QuicTransportParameters(body) => {
            (ext_type::QUIC_TRANSPORT_PARAMETERS, body.clone())
        }
        ExtSpec::Raw { type_code, body } => (*type_code, body.clone()),
    }
}

fn string_list(items: &[String]) -> Vec<u8> {
    let mut list = Vec::new();
    for s in items {
        list.put_u8(s.len() as u8);
        list.extend_from_slice(s.as_bytes());
    }
    let mut b = Vec::with_capacity(list.len() + 2);
    b.put_u16(list.len() as u16);
    b.extend_from_slice(&list);
    b
}

/// Prepends the 4-byte handshake header (type ClientHello).
pub fn wrap_handshake(body: &[u8]) -> Vec<u8> {
    let mut v = Vec::with_capacity(body.len() + 4);
    v.put_u8(1);
    v.put_u24(body.len() as u32);
    v.extend_from_slice(body);
    v
}

/// Wraps a handshake byte stream into TLS records of type 22. `split_at`
/// produces two records with the boundary at that handshake-stream offset.
pub fn wrap_records(handshake: &[u8], record_version: u16, split_at: Option<usize>) -> Vec<u8> {
    let mut out = Vec::with_capacity(handshake.len() + 10);
    let chunks: Vec<&[u8]> = match split_at {
        Some(at) if at > 0 && at < handshake.len() => {
            vec![&handshake[..at], &handshake[at..]]
        }
        _ => vec![handshake],
    };
    for chunk in chunks {
        out.put_u8(22);
        out.put_u16(record_version);
        out.put_u16(chunk.len() as u16);
        out.extend_from_slice(chunk);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tls::parse_client_hello;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn build_parse_round_trip_preserves_order() {
        let spec = ChloSpec {
            legacy_version: 0x0303,
            session_id: SessionIdSpec::Random32,
            cipher_suites: vec![0x1301, 0x1303, 0x1302],
            compression_methods: vec![0],
            extensions: vec![
                ExtSpec::ServerName("v.example.net".into()),
                ExtSpec::SupportedGroups(vec![0x001d, 0x0017, 0x0018]),
                ExtSpec::Alpn(vec!["h3".into()]),
            ],
        };
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let body = build_client_hello(&spec, &mut rng);
        let chlo = parse_client_hello(&body).unwrap();
        assert_eq!(chlo.cipher_suites, spec.cipher_suites);
        assert_eq!(chlo.ext.supported_groups, Some(vec![0x001d, 0x0017, 0x0018]));
        assert_eq!(
            chlo.extension_types(),
            vec![
                ext_type::SERVER_NAME,
                ext_type::SUPPORTED_GROUPS,
                ext_type::ALPN
            ]
        );
    }

    #[test]
    fn grease_materialization_varies_but_canonicalizes() {
        let spec = ChloSpec {
            legacy_version: 0x0303,
            session_id: SessionIdSpec::Empty,
            cipher_suites: vec![crate::tls::GREASE_CANONICAL, 0x1301],
            compression_methods: vec![0],
            extensions: vec![ExtSpec::GreaseExtension { body_len: 0 }],
        };
        let mut seen = std::collections::HashSet::new();
        for seed in 0..32 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let body = build_client_hello(&spec, &mut rng);
            let chlo = parse_client_hello(&body).unwrap();
            assert_eq!(chlo.cipher_suites[0], crate::tls::GREASE_CANONICAL);
            seen.insert(chlo.extensions[0].type_code);
        }
        assert!(seen.len() > 1, "expected several GREASE variants, saw {seen:?}");
        assert!(seen.iter().all(|&v| is_grease(v)));
    }

    #[test]
    fn wrap_records_split_boundary() {
        let handshake: Vec<u8> = (0..100u8).collect();
        let whole = wrap_records(&handshake, 0x0301, None);
        assert_eq!(whole.len(), 105);
        let split = wrap_records(&handshake, 0x0301, Some(40));
        assert_eq!(split.len(), 110);
        assert_eq!(&split[5..45], &handshake[..40]);
        assert_eq!(u16::from_be_bytes([split[48], split[49]]), 60);
    }
}
