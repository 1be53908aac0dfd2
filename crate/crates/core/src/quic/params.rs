//! QUIC transport parameter decoding (TLS extension 57).
//!
//! Parameter ids are mapped to named fields through a registry. Standard
//! ids come from RFC 9000 and its extensions; the Google-variant ids
//! (initial_rtt, google_connection_options, user_agent, google_version)
//! are Chromium's and can be overridden from a config file when captures
//! show different assignments.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytes::Reader;
use crate::error::{CodecError, QuicError};
use crate::quic::varint::read_varint;

/// Reserved ids of the form 31·N + 27 (RFC 9000 §18.1).
pub fn is_grease_param_id(id: u64) -> bool {
    id >= 27 && (id - 27) % 31 == 0
}

/// Canonical stand-in for reserved ids in ordered id lists.
pub const GREASE_PARAM_CANONICAL: u64 = 27;

/// Maps transport parameter wire ids to the field names this crate decodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRegistry {
    by_id: BTreeMap<u64, String>,
}

const KNOWN_FIELDS: &[&str] = &[
    "max_idle_timeout",
    "max_udp_payload_size",
    "initial_max_data",
    "initial_max_stream_data_bidi_local",
    "initial_max_stream_data_bidi_remote",
    "initial_max_stream_data_uni",
    "initial_max_streams_bidi",
    "initial_max_streams_uni",
    "max_ack_delay",
    "disable_active_migration",
    "active_connection_id_limit",
    "initial_source_connection_id",
    "max_datagram_frame_size",
    "grease_quic_bit",
    "initial_rtt",
    "google_connection_options",
    "user_agent",
    "google_version",
    "version_information",
];

impl Default for ParamRegistry {
    fn default() -> Self {
        let defaults: &[(u64, &str)] = &[
            (0x01, "max_idle_timeout"),
            (0x03, "max_udp_payload_size"),
            (0x04, "initial_max_data"),
            (0x05, "initial_max_stream_data_bidi_local"),
            (0x06, "initial_max_stream_data_bidi_remote"),
            (0x07, "initial_max_stream_data_uni"),
            (0x08, "initial_max_streams_bidi"),
            (0x09, "initial_max_streams_uni"),
            (0x0b, "max_ack_delay"),
            (0x0c, "disable_active_migration"),
            (0x0e, "active_connection_id_limit"),
            (0x0f, "initial_source_connection_id"),
            (0x11, "version_information"),
            (0x20, "max_datagram_frame_size"),
            (0x2ab2, "grease_quic_bit"),
            (0x3127, "initial_rtt"),
            (0x3128, "google_connection_options"),
            (0x3129, "user_agent"),
            (0x4752, "google_version"),
        ];
        ParamRegistry {
            by_id: defaults
                .iter()
                .map(|&(id, name)| (id, name.to_string()))
                .collect(),
        }
    }
}

impl ParamRegistry {
    /// Applies overrides of the form `{"0x3129": "user_agent"}` on top of
    /// the defaults. Assigning a name to a new id drops the old assignment.
    pub fn with_overrides(overrides: &BTreeMap<String, String>) -> Result<Self, CodecError> {
        let mut reg = ParamRegistry::default();
        for (key, name) in overrides {
            if !KNOWN_FIELDS.contains(&name.as_str()) {
                return Err(CodecError::InvalidRegistry(format!(
                    "unknown field name {name:?}"
                )));
            }
            let digits = key.strip_prefix("0x").unwrap_or(key);
            let id = u64::from_str_radix(digits, 16).map_err(|_| {
                CodecError::InvalidRegistry(format!("bad parameter id {key:?}"))
            })?;
            reg.by_id.retain(|_, v| v != name);
            reg.by_id.insert(id, name.clone());
        }
        Ok(reg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, CodecError> {
        let text = std::fs::read_to_string(path)?;
        let overrides: BTreeMap<String, String> = serde_json::from_str(&text)?;
        Self::with_overrides(&overrides)
    }

    pub fn name_of(&self, id: u64) -> Option<&str> {
        self.by_id.get(&id).map(String::as_str)
    }
}

/// One transport parameter as it appeared on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub id: u64,
    #[serde(with = "crate::hexbytes")]
    pub value: Vec<u8>,
}

/// Decoded transport parameters: the raw entry list plus the named fields
/// the attribute set draws from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct QuicTransportParams {
    pub entries: Vec<ParamEntry>,
    /// Wire-order parameter ids with reserved ids canonicalized.
    pub ordered_ids: Vec<u64>,
    pub max_idle_timeout: Option<u64>,
    pub max_udp_payload_size: Option<u64>,
    pub initial_max_data: Option<u64>,
    pub initial_max_stream_data_bidi_local: Option<u64>,
    pub initial_max_stream_data_bidi_remote: Option<u64>,
    pub initial_max_stream_data_uni: Option<u64>,
    pub initial_max_streams_bidi: Option<u64>,
    pub initial_max_streams_uni: Option<u64>,
    pub max_ack_delay: Option<u64>,
    pub disable_active_migration: bool,
    pub active_connection_id_limit: Option<u64>,
    #[serde(with = "crate::hexbytes::opt", default)]
    pub initial_source_connection_id: Option<Vec<u8>>,
    pub max_datagram_frame_size: Option<u64>,
    pub grease_quic_bit: bool,
    pub initial_rtt: bool,
    pub google_connection_options: Option<String>,
    pub user_agent: Option<String>,
    pub google_version: Option<String>,
    pub version_information: Option<String>,
}

fn whole_varint(value: &[u8]) -> Option<u64> {
    let mut r = Reader::new(value);
    let v = read_varint(&mut r).ok()?;
    r.is_empty().then_some(v)
}

fn printable(bytes: &[u8]) -> bool {
    !bytes.is_empty() && bytes.iter().all(|&b| (0x20..0x7f).contains(&b))
}

fn tag_list(value: &[u8]) -> String {
    if value.len() % 4 == 0 && printable(value) {
        value
            .chunks(4)
            .map(|c| String::from_utf8_lossy(c).into_owned())
            .collect::<Vec<_>>()
            .join(",")
    } else {
        hex::encode(value)
    }
}

fn version_list(value: &[u8]) -> String {
    if value.len() % 4 != 0 || value.is_empty() {
        return hex::encode(value);
    }
    value
        .chunks(4)
        .map(|c| format!("{:08x}", u32::from_be_bytes([c[0], c[1], c[2], c[3]])))
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses the extension body: a sequence of (id varint, length varint,
/// value) entries. Unknown ids are kept in `entries` untouched; known ids
/// with values that do not decode cleanly are left unset rather than
/// failing the whole parse.
pub fn parse_transport_params(
    body: &[u8],
    registry: &ParamRegistry,
) -> Result<QuicTransportParams, QuicError> {
    let mut r = Reader::new(body);
    let mut out = QuicTransportParams::default();
    while !r.is_empty() {
        let id = read_varint(&mut r).map_err(QuicError::Malformed)?;
        let len = read_varint(&mut r).map_err(QuicError::Malformed)?;
        let value = r.take(len as usize).map_err(QuicError::Malformed)?;
        out.entries.push(ParamEntry {
            id,
            value: value.to_vec(),
        });
        out.ordered_ids.push(if is_grease_param_id(id) {
            GREASE_PARAM_CANONICAL
        } else {
            id
        });
        let Some(name) = registry.name_of(id) else {
            continue;
        };
        match name {
            "max_idle_timeout" => out.max_idle_timeout = whole_varint(value),
            "max_udp_payload_size" => out.max_udp_payload_size = whole_varint(value),
            "initial_max_data" => out.initial_max_data = whole_varint(value),
            "initial_max_stream_data_bidi_local" => {
                out.initial_max_stream_data_bidi_local = whole_varint(value)
            }
            "initial_max_stream_data_bidi_remote" => {
                out.initial_max_stream_data_bidi_remote = whole_varint(value)
            }
            "initial_max_stream_data_uni" => {
                out.initial_max_stream_data_uni = whole_varint(value)
            }
            "initial_max_streams_bidi" => out.initial_max_streams_bidi = whole_varint(value),
            "initial_max_streams_uni" => out.initial_max_streams_uni = whole_varint(value),
            "max_ack_delay" => out.max_ack_delay = whole_varint(value),
            "disable_active_migration" => out.disable_active_migration = true,
            "active_connection_id_limit" => {
                out.active_connection_id_limit = whole_varint(value)
            }
            "initial_source_connection_id" => {
                out.initial_source_connection_id = Some(value.to_vec())
            }
            "max_datagram_frame_size" => out.max_datagram_frame_size = whole_varint(value),
            "grease_quic_bit" => out.grease_quic_bit = true,
            "initial_rtt" => out.initial_rtt = true,
            "google_connection_options" => {
                out.google_connection_options = Some(tag_list(value))
            }
            "user_agent" => {
                out.user_agent = Some(String::from_utf8_lossy(value).into_owned())
            }
            "google_version" => out.google_version = Some(tag_list(value)),
            "version_information" => out.version_information = Some(version_list(value)),
            _ => {}
        }
    }
    Ok(out)
}

/// Serializes entries back to the wire format; inverse of the parser for
/// capture synthesis.
pub fn build_transport_params(entries: &[ParamEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    for e in entries {
        crate::quic::varint::write_varint(&mut out, e.id);
        crate::quic::varint::write_varint(&mut out, e.value.len() as u64);
        out.extend_from_slice(&e.value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quic::varint::varint_vec;

    fn entry(id: u64, value: &[u8]) -> ParamEntry {
        ParamEntry {
            id,
            value: value.to_vec(),
        }
    }

    #[test]
    fn grease_id_arithmetic() {
        assert!(is_grease_param_id(27));
        assert!(is_grease_param_id(58));
        assert!(is_grease_param_id(31 * 1000 + 27));
        assert!(!is_grease_param_id(26));
        assert!(!is_grease_param_id(0x01));
        assert!(!is_grease_param_id(0x4752));
    }

    #[test]
    fn decodes_standard_parameters() {
        let entries = vec![
            entry(0x01, &varint_vec(30000)),
            entry(0x04, &varint_vec(10_000_000)),
            entry(0x0c, b""),
            entry(0x0f, &[0xab; 8]),
            entry(0x20, &varint_vec(65527)),
        ];
        let body = build_transport_params(&entries);
        let p = parse_transport_params(&body, &ParamRegistry::default()).unwrap();
        assert_eq!(p.max_idle_timeout, Some(30000));
        assert_eq!(p.initial_max_data, Some(10_000_000));
        assert!(p.disable_active_migration);
        assert_eq!(p.initial_source_connection_id, Some(vec![0xab; 8]));
        assert_eq!(p.max_datagram_frame_size, Some(65527));
        assert_eq!(p.ordered_ids, vec![0x01, 0x04, 0x0c, 0x0f, 0x20]);
        assert_eq!(p.entries, entries);
    }

    #[test]
    fn decodes_google_variant_parameters() {
        let entries = vec![
            entry(0x3127, &varint_vec(100_000)),
            entry(0x3128, b"AKDUBBR2"),
            entry(0x3129, b"Chrome/124.0.6367.60 Windows NT 10.0; Win64; x64"),
            entry(0x4752, b"Q046"),
            entry(0x2ab2, b""),
        ];
        let body = build_transport_params(&entries);
        let p = parse_transport_params(&body, &ParamRegistry::default()).unwrap();
        assert!(p.initial_rtt);
        assert_eq!(p.google_connection_options.as_deref(), Some("AKDU,BBR2"));
        assert_eq!(
            p.user_agent.as_deref(),
            Some("Chrome/124.0.6367.60 Windows NT 10.0; Win64; x64")
        );
        assert_eq!(p.google_version.as_deref(), Some("Q046"));
        assert!(p.grease_quic_bit);
    }

    #[test]
    fn version_information_lists_hex_versions() {
        let mut value = Vec::new();
        value.extend_from_slice(&0x00000001u32.to_be_bytes());
        value.extend_from_slice(&0x00000001u32.to_be_bytes());
        value.extend_from_slice(&0x6b3343cfu32.to_be_bytes());
        let body = build_transport_params(&[entry(0x11, &value)]);
        let p = parse_transport_params(&body, &ParamRegistry::default()).unwrap();
        assert_eq!(
            p.version_information.as_deref(),
            Some("00000001,00000001,6b3343cf")
        );
    }

    #[test]
    fn grease_ids_canonicalized_in_order_list() {
        let entries = vec![
            entry(31 * 7 + 27, &[0x5a]),
            entry(0x01, &varint_vec(5000)),
        ];
        let body = build_transport_params(&entries);
        let p = parse_transport_params(&body, &ParamRegistry::default()).unwrap();
        assert_eq!(p.ordered_ids, vec![GREASE_PARAM_CANONICAL, 0x01]);
        assert_eq!(p.entries[0].id, 31 * 7 + 27);
    }

    #[test]
    fn unknown_ids_are_preserved_raw() {
        let entries = vec![entry(0x1234, b"\x01\x02\x03")];
        let body = build_transport_params(&entries);
        let p = parse_transport_params(&body, &ParamRegistry::default()).unwrap();
        assert_eq!(p.entries, entries);
        assert_eq!(p.ordered_ids, vec![0x1234]);
        assert_eq!(p.max_idle_timeout, None);
    }

    #[test]
    fn sloppy_values_do_not_fail_the_parse() {
        let body = build_transport_params(&[entry(0x01, &[0x40])]);
        let p = parse_transport_params(&body, &ParamRegistry::default()).unwrap();
        assert_eq!(p.max_idle_timeout, None);
        assert_eq!(p.ordered_ids, vec![0x01]);
    }

    #[test]
    fn truncated_body_is_malformed() {
        let mut body = build_transport_params(&[entry(0x04, &varint_vec(1000))]);
        body.pop();
        assert!(matches!(
            parse_transport_params(&body, &ParamRegistry::default()),
            Err(QuicError::Malformed(_))
        ));
    }

    #[test]
    fn registry_overrides_remap_ids() {
        let mut overrides = BTreeMap::new();
        overrides.insert("0x9999".to_string(), "user_agent".to_string());
        let reg = ParamRegistry::with_overrides(&overrides).unwrap();
        assert_eq!(reg.name_of(0x9999), Some("user_agent"));
        assert_eq!(reg.name_of(0x3129), None);
        assert_eq!(reg.name_of(0x01), Some("max_idle_timeout"));

        let mut bad = BTreeMap::new();
        bad.insert("0x01".to_string(), "nonsense".to_string());
        assert!(ParamRegistry::with_overrides(&bad).is_err());
    }

    #[test]
    fn reference_client_hello_parameters_decode() {
        let raw = include_str!("../../tests/data/rfc9001_client_initial_payload.hex");
        let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        let payload = hex::decode(compact).unwrap();
        let chunks = crate::quic::initial::parse_frames(&payload).unwrap();
        let body = crate::quic::initial::reassemble_crypto(&chunks).unwrap();
        let chlo = crate::tls::parse_client_hello(&body).unwrap();
        let ext_body = chlo.ext.quic_transport_parameters.unwrap();
        let p = parse_transport_params(&ext_body, &ParamRegistry::default()).unwrap();

        assert_eq!(
            p.ordered_ids,
            vec![0x04, 0x05, 0x07, 0x08, 0x01, 0x09, 0x0f, 0x06]
        );
        assert_eq!(p.initial_max_data, Some(0x3fff_ffff_ffff_ffff));
        assert_eq!(p.initial_max_stream_data_bidi_local, Some(65535));
        assert_eq!(p.initial_max_stream_data_bidi_remote, Some(65535));
        assert_eq!(p.initial_max_stream_data_uni, Some(65535));
        assert_eq!(p.initial_max_streams_bidi, Some(16));
        assert_eq!(p.initial_max_streams_uni, Some(16));
        assert_eq!(p.max_idle_timeout, Some(30000));
        assert_eq!(
            p.initial_source_connection_id,
            Some(hex::decode("8394c8f03e515708").unwrap())
        );
        assert!(!p.grease_quic_bit);
    }
}
