//! The closed registry of the 62 handshake attributes: identity, value
//! type, protocol applicability, cost tier, list widths, and the mapping
//! from parsed handshake fields to attribute values.
//!
//! Dictionary token formats chosen here are part of the model contract:
//! 2-byte TLS code points render as `0x%04x`, small id lists as decimal,
//! multi-valued categorical fields as comma-joined items, and GREASE
//! values (canonicalized by the parsers) as the reserved token `GREASE`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CodecError;
use crate::fields::{FieldValue, HandshakeFieldSet, Protocol};
use crate::quic::GREASE_PARAM_CANONICAL;
use crate::tls::GREASE_CANONICAL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    Numerical,
    Categorical,
    List,
    Presence,
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostTier {
    Low,
    Medium,
    High,
}

impl CostTier {
    pub fn as_str(self) -> &'static str {
        match self {
            CostTier::Low => "low",
            CostTier::Medium => "medium",
            CostTier::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldCategory {
    Transport,
    Mandatory,
    Optional,
    Quic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Applicability {
    Both,
    TcpOnly,
    QuicOnly,
}

impl Applicability {
    pub fn includes(self, protocol: Protocol) -> bool {
        match self {
            Applicability::Both => true,
            Applicability::TcpOnly => protocol == Protocol::Tcp,
            Applicability::QuicOnly => protocol == Protocol::Quic,
        }
    }
}

macro_rules! attr_ids {
    ($($name:ident => $label:literal),+ $(,)?) => {
        /// Stable identifier for each registry row.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum AttrId { $($name),+ }

        impl AttrId {
            pub const ALL: &'static [AttrId] = &[$(AttrId::$name),+];

            /// Short row label ("t1" through "q20").
            pub fn label(self) -> &'static str {
                match self { $(AttrId::$name => $label),+ }
            }

            pub fn from_label(label: &str) -> Option<AttrId> {
                match label { $($label => Some(AttrId::$name),)+ _ => None }
            }
        }
    };
}

attr_ids! {
    T1 => "t1", T2 => "t2", T3 => "t3", T4 => "t4", T5 => "t5", T6 => "t6",
    T7 => "t7", T8 => "t8", T9 => "t9", T10 => "t10", T11 => "t11",
    T12 => "t12", T13 => "t13", T14 => "t14",
    M1 => "m1", M2 => "m2", M3 => "m3", M4 => "m4", M5 => "m5",
    O1 => "o1", O2 => "o2", O3 => "o3", O4 => "o4", O5 => "o5", O6 => "o6",
    O7 => "o7", O8 => "o8", O9 => "o9", O10 => "o10", O11 => "o11",
    O12 => "o12", O13 => "o13", O14 => "o14", O15 => "o15", O16 => "o16",
    O17 => "o17", O18 => "o18", O19 => "o19", O20 => "o20", O21 => "o21",
    O22 => "o22", O23 => "o23",
    Q1 => "q1", Q2 => "q2", Q3 => "q3", Q4 => "q4", Q5 => "q5", Q6 => "q6",
    Q7 => "q7", Q8 => "q8", Q9 => "q9", Q10 => "q10", Q11 => "q11",
    Q12 => "q12", Q13 => "q13", Q14 => "q14", Q15 => "q15", Q16 => "q16",
    Q17 => "q17", Q18 => "q18", Q19 => "q19", Q20 => "q20",
}

/// One registry row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrRow {
    pub id: AttrId,
    pub field_name: &'static str,
    pub category: FieldCategory,
    pub kind: AttrKind,
    pub cost: CostTier,
    pub applicability: Applicability,
    /// Number of vector slots for list rows; zero otherwise.
    pub list_slots: usize,
}

use Applicability::{Both, QuicOnly, TcpOnly};
use AttrKind::{Categorical, Length, List, Numerical, Presence};
use CostTier::{High, Low, Medium};
use FieldCategory::{Mandatory, Optional, Quic, Transport};

#[rustfmt::skip]
const BUILTIN: &[(AttrId, &str, FieldCategory, AttrKind, CostTier, Applicability, usize)] = &[
    (AttrId::T1,  "init_packet_size",                         Transport, Numerical,   Low,    Both,     0),
    (AttrId::T2,  "ttl",                                      Transport, Numerical,   Low,    Both,     0),
    (AttrId::T3,  "tcp_cwr",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T4,  "tcp_ece",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T5,  "tcp_urg",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T6,  "tcp_ack",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T7,  "tcp_psh",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T8,  "tcp_rst",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T9,  "tcp_syn",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T10, "tcp_fin",                                  Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::T11, "tcp_window_size",                          Transport, Numerical,   Low,    TcpOnly,  0),
    (AttrId::T12, "tcp_mss",                                  Transport, Numerical,   Low,    TcpOnly,  0),
    (AttrId::T13, "tcp_window_scale",                         Transport, Numerical,   Low,    TcpOnly,  0),
    (AttrId::T14, "tcp_sack_permitted",                       Transport, Presence,    Low,    TcpOnly,  0),
    (AttrId::M1,  "handshake_length",                         Mandatory, Numerical,   Low,    Both,     0),
    (AttrId::M2,  "tls_version",                              Mandatory, Categorical, Medium, Both,     0),
    (AttrId::M3,  "cipher_suites",                            Mandatory, List,        High,   Both,    32),
    (AttrId::M4,  "compression_methods",                      Mandatory, Length,      Low,    Both,     0),
    (AttrId::M5,  "extensions_length",                        Mandatory, Numerical,   Low,    Both,     0),
    (AttrId::O1,  "tls_extensions",                           Optional,  List,        High,   Both,    32),
    (AttrId::O2,  "server_name",                              Optional,  Length,      Low,    Both,     0),
    (AttrId::O3,  "status_request",                           Optional,  Categorical, Medium, Both,     0),
    (AttrId::O4,  "supported_groups",                         Optional,  List,        High,   Both,    16),
    (AttrId::O5,  "ec_point_formats",                         Optional,  Categorical, Medium, Both,     0),
    (AttrId::O6,  "signature_algorithms",                     Optional,  List,        High,   Both,    24),
    (AttrId::O7,  "application_layer_protocol_negotiation",   Optional,  List,        High,   Both,     8),
    (AttrId::O8,  "signed_certificate_timestamp",             Optional,  Length,      Low,    Both,     0),
    (AttrId::O9,  "padding",                                  Optional,  Length,      Low,    Both,     0),
    (AttrId::O10, "encrypt_then_mac",                         Optional,  Presence,    Low,    Both,     0),
    (AttrId::O11, "extended_master_secret",                   Optional,  Presence,    Low,    Both,     0),
    (AttrId::O12, "compress_certificate",                     Optional,  Categorical, Medium, Both,     0),
    (AttrId::O13, "record_size_limit",                        Optional,  Numerical,   Low,    Both,     0),
    (AttrId::O14, "delegated_credentials",                    Optional,  List,        High,   Both,    16),
    (AttrId::O15, "session_ticket",                           Optional,  Length,      Low,    Both,     0),
    (AttrId::O16, "pre_shared_key",                           Optional,  Presence,    Low,    Both,     0),
    (AttrId::O17, "early_data",                               Optional,  Length,      Low,    Both,     0),
    (AttrId::O18, "supported_versions",                       Optional,  List,        High,   Both,     8),
    (AttrId::O19, "psk_key_exchange_modes",                   Optional,  Categorical, Medium, Both,     0),
    (AttrId::O20, "post_handshake_auth",                      Optional,  Presence,    Low,    Both,     0),
    (AttrId::O21, "key_share",                                Optional,  List,        High,   Both,     8),
    (AttrId::O22, "application_settings",                     Optional,  List,        High,   Both,     8),
    (AttrId::O23, "renegotiation_info",                       Optional,  Presence,    Low,    Both,     0),
    (AttrId::Q1,  "quic_parameters",                          Quic,      List,        High,   QuicOnly, 32),
    (AttrId::Q2,  "max_idle_timeout",                         Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q3,  "max_udp_payload_size",                     Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q4,  "initial_max_data",                         Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q5,  "initial_max_stream_data_bidi_local",       Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q6,  "initial_max_stream_data_bidi_remote",      Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q7,  "initial_max_stream_data_uni",              Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q8,  "initial_max_streams_bidi",                 Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q9,  "initial_max_streams_uni",                  Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q10, "max_ack_delay",                            Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q11, "disable_active_migration",                 Quic,      Presence,    Low,    QuicOnly, 0),
    (AttrId::Q12, "active_connection_id_limit",               Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q13, "initial_source_connection_id",             Quic,      Length,      Low,    QuicOnly, 0),
    (AttrId::Q14, "max_datagram_frame_size",                  Quic,      Numerical,   Low,    QuicOnly, 0),
    (AttrId::Q15, "grease_quic_bit",                          Quic,      Presence,    Low,    QuicOnly, 0),
    (AttrId::Q16, "initial_rtt",                              Quic,      Presence,    Low,    QuicOnly, 0),
    (AttrId::Q17, "google_connection_options",                Quic,      Categorical, Medium, QuicOnly, 0),
    (AttrId::Q18, "user_agent",                               Quic,      Categorical, Medium, QuicOnly, 0),
    (AttrId::Q19, "google_version",                           Quic,      Categorical, Medium, QuicOnly, 0),
    (AttrId::Q20, "version_information",                      Quic,      Categorical, Medium, QuicOnly, 0),
];

/// The attribute registry. The row set is fixed; only list widths can be
/// overridden from configuration, since they are sizing knobs rather than
/// attribute semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRegistry {
    rows: Vec<AttrRow>,
}

impl Default for AttributeRegistry {
    fn default() -> Self {
        let rows = BUILTIN
            .iter()
            .map(
                |&(id, field_name, category, kind, cost, applicability, list_slots)| AttrRow {
                    id,
                    field_name,
                    category,
                    kind,
                    cost,
                    applicability,
                    list_slots,
                },
            )
            .collect();
        let reg = AttributeRegistry { rows };
        reg.validate().expect("builtin registry is valid");
        reg
    }
}

/// Override file entry: `{"m3": {"list_slots": 48}}`.
#[derive(Debug, Deserialize)]
struct RowOverride {
    list_slots: usize,
}

impl AttributeRegistry {
    pub fn rows(&self) -> &[AttrRow] {
        &self.rows
    }

    pub fn row(&self, id: AttrId) -> &AttrRow {
        // AttrId order and row order are both the registry order.
        &self.rows[AttrId::ALL.iter().position(|&a| a == id).unwrap()]
    }

    /// Rows applicable to a protocol, in registry order.
    pub fn for_protocol(&self, protocol: Protocol) -> impl Iterator<Item = &AttrRow> {
        self.rows
            .iter()
            .filter(move |r| r.applicability.includes(protocol))
    }

    /// Applies list-width overrides from a JSON file.
    pub fn with_overrides_file(path: &Path) -> Result<Self, CodecError> {
        let text = std::fs::read_to_string(path)?;
        let overrides: BTreeMap<String, RowOverride> = serde_json::from_str(&text)?;
        let mut reg = AttributeRegistry::default();
        for (label, ov) in overrides {
            let id = AttrId::from_label(&label).ok_or_else(|| {
                CodecError::InvalidRegistry(format!("unknown attribute label {label:?}"))
            })?;
            let row = reg
                .rows
                .iter_mut()
                .find(|r| r.id == id)
                .expect("label resolved to a registry row");
            if row.kind != AttrKind::List {
                return Err(CodecError::InvalidRegistry(format!(
                    "attribute {label} is not list-typed"
                )));
            }
            if ov.list_slots == 0 {
                return Err(CodecError::InvalidRegistry(format!(
                    "attribute {label} needs at least one slot"
                )));
            }
            row.list_slots = ov.list_slots;
        }
        reg.validate()?;
        Ok(reg)
    }

    /// Structural invariants: census counts per protocol, cost, and kind.
    pub fn validate(&self) -> Result<(), CodecError> {
        let fail = |msg: String| Err(CodecError::InvalidRegistry(msg));
        if self.rows.len() != 62 {
            return fail(format!("expected 62 rows, found {}", self.rows.len()));
        }
        let count = |pred: &dyn Fn(&AttrRow) -> bool| self.rows.iter().filter(|r| pred(r)).count();
        let tcp = count(&|r| r.applicability.includes(Protocol::Tcp));
        let quic = count(&|r| r.applicability.includes(Protocol::Quic));
        if (tcp, quic) != (42, 50) {
            return fail(format!("applicability census {tcp}/{quic}, expected 42/50"));
        }
        let costs = (
            count(&|r| r.cost == Low),
            count(&|r| r.cost == Medium),
            count(&|r| r.cost == High),
        );
        if costs != (43, 9, 10) {
            return fail(format!("cost census {costs:?}, expected (43, 9, 10)"));
        }
        let kinds = (
            count(&|r| r.kind == Numerical),
            count(&|r| r.kind == Presence),
            count(&|r| r.kind == Length),
            count(&|r| r.kind == Categorical),
            count(&|r| r.kind == List),
        );
        if kinds != (19, 17, 7, 9, 10) {
            return fail(format!(
                "kind census {kinds:?}, expected (19, 17, 7, 9, 10)"
            ));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.id != AttrId::ALL[i] {
                return fail(format!("row {i} out of order"));
            }
            if (row.kind == AttrKind::List) != (row.list_slots > 0) {
                return fail(format!(
                    "attribute {} slot count inconsistent with its kind",
                    row.id.label()
                ));
            }
        }
        Ok(())
    }
}

/// Reserved dictionary token for GREASE values.
pub const GREASE_TOKEN: &str = "GREASE";

fn hex16(v: u16) -> String {
    if v == GREASE_CANONICAL {
        GREASE_TOKEN.to_string()
    } else {
        format!("0x{v:04x}")
    }
}

fn dec16(v: u16) -> String {
    if v == GREASE_CANONICAL {
        GREASE_TOKEN.to_string()
    } else {
        v.to_string()
    }
}

fn hex_list(values: &Option<Vec<u16>>) -> FieldValue {
    match values {
        Some(v) => FieldValue::List(v.iter().map(|&x| hex16(x)).collect()),
        None => FieldValue::Absent,
    }
}

fn dec_list(values: &Option<Vec<u16>>) -> FieldValue {
    match values {
        Some(v) => FieldValue::List(v.iter().map(|&x| dec16(x)).collect()),
        None => FieldValue::Absent,
    }
}

fn string_list(values: &Option<Vec<String>>) -> FieldValue {
    match values {
        Some(v) => FieldValue::List(v.clone()),
        None => FieldValue::Absent,
    }
}

fn joined_u8(values: &Option<Vec<u8>>) -> FieldValue {
    match values {
        Some(v) => FieldValue::Cat(
            v.iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
        None => FieldValue::Absent,
    }
}

fn num_opt<T: Into<u64> + Copy>(v: Option<T>) -> FieldValue {
    v.map_or(FieldValue::Absent, |x| FieldValue::Num(x.into()))
}

fn len_opt(v: Option<u32>) -> FieldValue {
    v.map_or(FieldValue::Absent, |x| FieldValue::Len(x as usize))
}

fn cat_opt(v: &Option<String>) -> FieldValue {
    v.as_ref()
        .map_or(FieldValue::Absent, |s| FieldValue::Cat(s.clone()))
}

fn compress_cert_name(alg: u16) -> String {
    match alg {
        1 => "zlib".to_string(),
        2 => "brotli".to_string(),
        3 => "zstd".to_string(),
        other => dec16(other),
    }
}

/// Reads one attribute's value out of a parsed field set. Total: attributes
/// that do not apply to the protocol come back `Absent`.
pub fn extract(id: AttrId, f: &HandshakeFieldSet) -> FieldValue {
    use FieldValue::{Absent, Cat, Flag, Len, Num};

    let tcp_flag = |sel: fn(&crate::tls::TcpHandshakeFields) -> bool| {
        f.tcp.as_ref().map_or(Absent, |t| Flag(sel(t)))
    };
    let qp = f.quic_params.as_ref();
    let q_num = |sel: fn(&crate::quic::QuicTransportParams) -> Option<u64>| {
        qp.and_then(sel).map_or(Absent, Num)
    };
    let q_flag = |sel: fn(&crate::quic::QuicTransportParams) -> bool| {
        qp.map_or(Absent, |p| Flag(sel(p)))
    };
    let e = &f.chlo.ext;

    match id {
        AttrId::T1 => Num(f.init_packet_size as u64),
        AttrId::T2 => Num(f.ttl as u64),
        AttrId::T3 => tcp_flag(|t| t.cwr),
        AttrId::T4 => tcp_flag(|t| t.ece),
        AttrId::T5 => tcp_flag(|t| t.urg),
        AttrId::T6 => tcp_flag(|t| t.ack),
        AttrId::T7 => tcp_flag(|t| t.psh),
        AttrId::T8 => tcp_flag(|t| t.rst),
        AttrId::T9 => tcp_flag(|t| t.syn),
        AttrId::T10 => tcp_flag(|t| t.fin),
        AttrId::T11 => f
            .tcp
            .as_ref()
            .map_or(Absent, |t| Num(t.window_size as u64)),
        AttrId::T12 => f.tcp.as_ref().map_or(Absent, |t| num_opt(t.mss)),
        AttrId::T13 => f.tcp.as_ref().map_or(Absent, |t| num_opt(t.window_scale)),
        AttrId::T14 => tcp_flag(|t| t.sack_permitted),
        AttrId::M1 => Num(f.chlo.handshake_length as u64),
        AttrId::M2 => Cat(hex16(f.chlo.legacy_version)),
        AttrId::M3 => FieldValue::List(f.chlo.cipher_suites.iter().map(|&c| hex16(c)).collect()),
        AttrId::M4 => Len(f.chlo.compression_methods.len()),
        AttrId::M5 => Num(f.chlo.extensions_length as u64),
        AttrId::O1 => FieldValue::List(
            f.chlo
                .extension_types()
                .iter()
                .map(|&t| dec16(t))
                .collect(),
        ),
        AttrId::O2 => e
            .server_name
            .as_ref()
            .map_or(Absent, |n| Len(n.len())),
        AttrId::O3 => e
            .status_request
            .map_or(Absent, |t| Cat(t.to_string())),
        AttrId::O4 => dec_list(&e.supported_groups),
        AttrId::O5 => joined_u8(&e.ec_point_formats),
        AttrId::O6 => hex_list(&e.signature_algorithms),
        AttrId::O7 => string_list(&e.alpn),
        AttrId::O8 => len_opt(e.signed_certificate_timestamp),
        AttrId::O9 => len_opt(e.padding),
        AttrId::O10 => Flag(e.encrypt_then_mac),
        AttrId::O11 => Flag(e.extended_master_secret),
        AttrId::O12 => e.compress_certificate.as_ref().map_or(Absent, |algs| {
            Cat(algs
                .iter()
                .map(|&a| compress_cert_name(a))
                .collect::<Vec<_>>()
                .join(","))
        }),
        AttrId::O13 => num_opt(e.record_size_limit),
        AttrId::O14 => hex_list(&e.delegated_credentials),
        AttrId::O15 => len_opt(e.session_ticket),
        AttrId::O16 => Flag(e.pre_shared_key),
        AttrId::O17 => len_opt(e.early_data),
        AttrId::O18 => hex_list(&e.supported_versions),
        AttrId::O19 => joined_u8(&e.psk_key_exchange_modes),
        AttrId::O20 => Flag(e.post_handshake_auth),
        AttrId::O21 => dec_list(&e.key_share),
        AttrId::O22 => string_list(&e.application_settings),
        AttrId::O23 => Flag(e.renegotiation_info),
        AttrId::Q1 => qp.map_or(Absent, |p| {
            FieldValue::List(
                p.ordered_ids
                    .iter()
                    .map(|&id| {
                        if id == GREASE_PARAM_CANONICAL {
                            GREASE_TOKEN.to_string()
                        } else {
                            id.to_string()
                        }
                    })
                    .collect(),
            )
        }),
        AttrId::Q2 => q_num(|p| p.max_idle_timeout),
        AttrId::Q3 => q_num(|p| p.max_udp_payload_size),
        AttrId::Q4 => q_num(|p| p.initial_max_data),
        AttrId::Q5 => q_num(|p| p.initial_max_stream_data_bidi_local),
        AttrId::Q6 => q_num(|p| p.initial_max_stream_data_bidi_remote),
        AttrId::Q7 => q_num(|p| p.initial_max_stream_data_uni),
        AttrId::Q8 => q_num(|p| p.initial_max_streams_bidi),
        AttrId::Q9 => q_num(|p| p.initial_max_streams_uni),
        AttrId::Q10 => q_num(|p| p.max_ack_delay),
        AttrId::Q11 => q_flag(|p| p.disable_active_migration),
        AttrId::Q12 => q_num(|p| p.active_connection_id_limit),
        AttrId::Q13 => qp
            .and_then(|p| p.initial_source_connection_id.as_ref())
            .map_or(Absent, |cid| Len(cid.len())),
        AttrId::Q14 => q_num(|p| p.max_datagram_frame_size),
        AttrId::Q15 => q_flag(|p| p.grease_quic_bit),
        AttrId::Q16 => q_flag(|p| p.initial_rtt),
        AttrId::Q17 => qp.map_or(Absent, |p| cat_opt(&p.google_connection_options)),
        AttrId::Q18 => qp.map_or(Absent, |p| cat_opt(&p.user_agent)),
        AttrId::Q19 => qp.map_or(Absent, |p| cat_opt(&p.google_version)),
        AttrId::Q20 => qp.map_or(Absent, |p| cat_opt(&p.version_information)),
    }
}
