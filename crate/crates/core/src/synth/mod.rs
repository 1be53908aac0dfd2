//! Synthetic corpus generation: platform profiles instantiated into
//! handshake field sets and serialized as on-the-wire connection
//! establishment packets, for training data and end-to-end tests.

pub mod roster;

pub use roster::builtin_roster;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::fields::{HandshakeFieldSet, Protocol};
use crate::packet::build;
use crate::pcap::{LinkType, PcapWriter, Timestamp};
use crate::provider::Provider;
use crate::quic::{
    build_transport_params, derive_initial_keys, seal_initial, ParamEntry, QuicHeaderFields,
    SealSpec, QUIC_V1,
};
use crate::quic::varint::{varint_vec, write_varint};
use crate::tls::{
    build_client_hello, parse_client_hello, wrap_handshake, wrap_records, ChloSpec,
    TcpHandshakeFields,
};

/// Device type, OS, and software agent naming one user platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformLabel {
    pub device: String,
    pub os: String,
    pub agent: String,
}

impl PlatformLabel {
    pub fn new(device: &str, os: &str, agent: &str) -> PlatformLabel {
        PlatformLabel {
            device: device.to_string(),
            os: os.to_string(),
            agent: agent.to_string(),
        }
    }

    /// Composite class label, the platform-objective training target.
    pub fn platform(&self) -> String {
        format!("{}/{}", self.os, self.agent)
    }
}

/// OS-level TCP SYN template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcpTemplate {
    pub ttl: u8,
    pub window_size: u16,
    pub mss: u16,
    pub window_scale: Option<u8>,
    pub sack_permitted: bool,
    /// Sets CWR and ECE on the SYN, as ECN-negotiating stacks do.
    pub ecn: bool,
}

/// One QUIC transport parameter position in a profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "param", rename_all = "snake_case")]
pub enum ParamSpec {
    /// Variable-length integer value.
    VarInt { id: u64, value: u64 },
    /// Empty-value parameter (grease_quic_bit, disable_active_migration).
    Flag { id: u64 },
    /// Raw bytes.
    Bytes {
        id: u64,
        #[serde(with = "crate::hexbytes")]
        value: Vec<u8>,
    },
    /// UTF-8 text (user_agent and the Google tag-list parameters).
    Utf8 { id: u64, value: String },
    /// The packet's source connection id (initial_source_connection_id).
    SourceCid { id: u64 },
    /// Reserved id 31·seq + 27 with an empty value.
    Reserved { seq: u64 },
}

/// QUIC framing template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuicTemplate {
    pub ttl: u8,
    pub dcid_len: u8,
    pub scid_len: u8,
    /// Sealed Initial packets are padded to at least this size.
    pub pad_to: u16,
    pub pn_len: u8,
    /// CRYPTO stream split across this many Initial packets.
    pub initial_count: u8,
    /// Clear the header's fixed bit, as grease_quic_bit senders do.
    pub clear_fixed_bit: bool,
    pub params: Vec<ParamSpec>,
}

/// A field perturbation applied with some probability per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "jitter", rename_all = "snake_case")]
pub enum JitterAction {
    /// Permute ClientHello extension order (Chromium randomization).
    ShuffleExtensions,
    WindowSize { pool: Vec<u16> },
    Mss { pool: Vec<u16> },
    /// Resize the padding extension; absent when the profile has none.
    PaddingLength { pool: Vec<u16> },
    InitialMaxData { pool: Vec<u64> },
    MaxIdleTimeout { pool: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterRule {
    pub probability: f64,
    #[serde(flatten)]
    pub action: JitterAction,
}

/// A user platform's handshake template: everything needed to mint
/// labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformProfile {
    pub label: PlatformLabel,
    pub provider: Provider,
    pub protocol: Protocol,
    pub sni: String,
    pub chlo: ChloSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tcp: Option<TcpTemplate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quic: Option<QuicTemplate>,
    /// TLS record-layer version for TCP framing.
    #[serde(default = "default_record_version")]
    pub record_version: u16,
    /// Split the handshake across two TLS records at this offset.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub record_split: Option<usize>,
    /// Split the record stream across two TCP segments at this offset.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub segment_split: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub jitter: Vec<JitterRule>,
}

fn default_record_version() -> u16 {
    0x0301
}

impl PlatformProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let framing = match self.protocol {
            Protocol::Tcp => self.tcp.is_some(),
            Protocol::Quic => self.quic.is_some(),
        };
        if !framing {
            return Err(SynthError::BadProfile(
                self.label.platform(),
                format!("no framing template for {}", self.protocol),
            ));
        }
        if let Some(quic) = &self.quic {
            if quic.initial_count == 0 || quic.dcid_len < 8 || !(1..=4).contains(&quic.pn_len) {
                return Err(SynthError::BadProfile(
                    self.label.platform(),
                    "QUIC framing out of range".to_string(),
                ));
            }
        }
        for rule in &self.jitter {
            if !(0.0..=1.0).contains(&rule.probability) {
                return Err(SynthError::BadProfile(
                    self.label.platform(),
                    format!("jitter probability {} out of range", rule.probability),
                ));
            }
            let pool_empty = match &rule.action {
                JitterAction::ShuffleExtensions => false,
                JitterAction::WindowSize { pool } => pool.is_empty(),
                JitterAction::Mss { pool } => pool.is_empty(),
                JitterAction::PaddingLength { pool } => pool.is_empty(),
                JitterAction::InitialMaxData { pool } => pool.is_empty(),
                JitterAction::MaxIdleTimeout { pool } => pool.is_empty(),
            };
            if pool_empty {
                return Err(SynthError::BadProfile(
                    self.label.platform(),
                    "empty jitter pool".to_string(),
                ));
            }
        }
        Ok(())
    }
}

pub fn load_profiles(path: &Path) -> Result<Vec<PlatformProfile>, SynthError> {
    let text = std::fs::read_to_string(path)?;
    let profiles: Vec<PlatformProfile> = serde_json::from_str(&text)?;
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}

pub fn profiles_to_json(profiles: &[PlatformProfile]) -> String {
    serde_json::to_string_pretty(profiles).expect("profiles serialize")
}

/// Wire-format pieces of one generated connection, ready for packet
/// assembly.
#[derive(Debug, Clone)]
pub enum WirePlan {
    Tcp {
        ttl: u8,
        window: u16,
        /// Encoded SYN option bytes, unpadded.
        syn_options: Vec<u8>,
        syn_flags: u8,
        /// Concatenated TLS records carrying the ClientHello.
        records: Vec<u8>,
        segment_split: Option<usize>,
    },
    Quic {
        ttl: u8,
        datagrams: Vec<Vec<u8>>,
    },
}

/// One labeled synthetic connection: ground-truth fields plus the bytes
/// that reproduce them through the capture pipeline.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub label: PlatformLabel,
    pub provider: Provider,
    pub protocol: Protocol,
    pub fields: HandshakeFieldSet,
    pub wire: WirePlan,
}

fn pick<'a, T>(pool: &'a [T], rng: &mut impl Rng) -> &'a T {
    &pool[rng.gen_range(0..pool.len())]
}

fn apply_jitter(
    profile: &PlatformProfile,
    chlo: &mut ChloSpec,
    tcp: &mut Option<TcpTemplate>,
    quic: &mut Option<QuicTemplate>,
    rng: &mut impl Rng,
) {
    use crate::tls::ExtSpec;

    for rule in &profile.jitter {
        if !rng.gen_bool(rule.probability) {
            continue;
        }
        match &rule.action {
            JitterAction::ShuffleExtensions => chlo.extensions.shuffle(rng),
            JitterAction::WindowSize { pool } => {
                if let Some(t) = tcp {
                    t.window_size = *pick(pool, rng);
                }
            }
            JitterAction::Mss { pool } => {
                if let Some(t) = tcp {
                    t.mss = *pick(pool, rng);
                }
            }
            JitterAction::PaddingLength { pool } => {
                let len = *pick(pool, rng);
                for ext in &mut chlo.extensions {
                    if let ExtSpec::Padding(n) = ext {
                        *n = len;
                    }
                }
            }
            JitterAction::InitialMaxData { pool } => {
                let value = *pick(pool, rng);
                if let Some(q) = quic {
                    for p in &mut q.params {
                        if let ParamSpec::VarInt { id: 0x04, value: v } = p {
                            *v = value;
                        }
                    }
                }
            }
            JitterAction::MaxIdleTimeout { pool } => {
                let value = *pick(pool, rng);
                if let Some(q) = quic {
                    for p in &mut q.params {
                        if let ParamSpec::VarInt { id: 0x01, value: v } = p {
                            *v = value;
                        }
                    }
                }
            }
        }
    }
}

fn tcp_option_bytes(t: &TcpTemplate) -> Vec<u8> {
    let mut opts = Vec::with_capacity(12);
    opts.extend_from_slice(&[2, 4]);
    opts.extend_from_slice(&t.mss.to_be_bytes());
    if let Some(ws) = t.window_scale {
        opts.extend_from_slice(&[3, 3, ws]);
    }
    if t.sack_permitted {
        opts.extend_from_slice(&[4, 2]);
    }
    opts
}

fn materialize_params(
    specs: &[ParamSpec],
    scid: &[u8],
) -> Vec<ParamEntry> {
    specs
        .iter()
        .map(|spec| match spec {
            ParamSpec::VarInt { id, value } => ParamEntry {
                id: *id,
                value: varint_vec(*value),
            },
            ParamSpec::Flag { id } => ParamEntry {
                id: *id,
                value: Vec::new(),
            },
            ParamSpec::Bytes { id, value } => ParamEntry {
                id: *id,
                value: value.clone(),
            },
            ParamSpec::Utf8 { id, value } => ParamEntry {
                id: *id,
                value: value.as_bytes().to_vec(),
            },
            ParamSpec::SourceCid { id } => ParamEntry {
                id: *id,
                value: scid.to_vec(),
            },
            ParamSpec::Reserved { seq } => ParamEntry {
                id: 31 * seq + 27,
                value: Vec::new(),
            },
        })
        .collect()
}

/// Instantiates one sample from a profile; deterministic for a given rng
/// stream.
pub fn generate(
    profile: &PlatformProfile,
    registry: &crate::quic::ParamRegistry,
    rng: &mut impl Rng,
) -> Result<SynthSample, SynthError> {
    profile.validate()?;
    let mut chlo_spec = profile.chlo.clone();
    let mut tcp_template = profile.tcp.clone();
    let mut quic_template = profile.quic.clone();
    apply_jitter(profile, &mut chlo_spec, &mut tcp_template, &mut quic_template, rng);

    match profile.protocol {
        Protocol::Tcp => {
            let t = tcp_template.expect("validated TCP profile has a template");
            let body = build_client_hello(&chlo_spec, rng);
            let chlo = parse_client_hello(&body).map_err(|e| {
                SynthError::BadProfile(profile.label.platform(), format!("template CHLO: {e}"))
            })?;
            let records = wrap_records(&wrap_handshake(&body), profile.record_version, profile.record_split);
            let syn_options = tcp_option_bytes(&t);
            let padded = syn_options.len().div_ceil(4) * 4;
            let init_packet_size = (20 + 20 + padded) as u32;
            let mut syn_flags = crate::packet::tcp_flags::SYN;
            if t.ecn {
                syn_flags |= crate::packet::tcp_flags::CWR | crate::packet::tcp_flags::ECE;
            }
            let fields = HandshakeFieldSet {
                protocol: Protocol::Tcp,
                init_packet_size,
                ttl: t.ttl,
                tcp: Some(TcpHandshakeFields {
                    cwr: t.ecn,
                    ece: t.ecn,
                    urg: false,
                    ack: false,
                    psh: false,
                    rst: false,
                    syn: true,
                    fin: false,
                    window_size: t.window_size,
                    mss: Some(t.mss),
                    window_scale: t.window_scale,
                    sack_permitted: t.sack_permitted,
                }),
                quic_header: None,
                chlo,
                quic_params: None,
            };
            Ok(SynthSample {
                label: profile.label.clone(),
                provider: profile.provider,
                protocol: Protocol::Tcp,
                fields,
                wire: WirePlan::Tcp {
                    ttl: t.ttl,
                    window: t.window_size,
                    syn_options,
                    syn_flags,
                    records,
                    segment_split: profile.segment_split,
                },
            })
        }
        Protocol::Quic => {
            let q = quic_template.expect("validated QUIC profile has a template");
            let mut dcid = vec![0u8; q.dcid_len as usize];
            rng.fill(dcid.as_mut_slice());
            let mut scid = vec![0u8; q.scid_len as usize];
            rng.fill(scid.as_mut_slice());
            let entries = materialize_params(&q.params, &scid);
            let param_bytes = build_transport_params(&entries);

            let mut chlo_spec = chlo_spec;
            chlo_spec
                .extensions
                .push(crate::tls::ExtSpec::QuicTransportParameters(param_bytes.clone()));
            let body = build_client_hello(&chlo_spec, rng);
            let chlo = parse_client_hello(&body).map_err(|e| {
                SynthError::BadProfile(profile.label.platform(), format!("template CHLO: {e}"))
            })?;
            let quic_params = parse_transport(&param_bytes, registry)?;
            let handshake = wrap_handshake(&body);

            let keys = derive_initial_keys(&dcid, QUIC_V1)?;
            let n = q.initial_count as usize;
            let chunk = handshake.len().div_ceil(n);
            let mut datagrams = Vec::with_capacity(n);
            for (i, piece) in handshake.chunks(chunk).enumerate() {
                let mut frame = vec![0x06];
                write_varint(&mut frame, (i * chunk) as u64);
                write_varint(&mut frame, piece.len() as u64);
                frame.extend_from_slice(piece);
                let sealed = seal_initial(
                    &SealSpec {
                        version: QUIC_V1,
                        dcid: &dcid,
                        scid: &scid,
                        token: &[],
                        packet_number: i as u64,
                        pn_len: q.pn_len,
                        payload: &frame,
                        pad_packet_to: Some(q.pad_to as usize),
                        clear_fixed_bit: q.clear_fixed_bit,
                    },
                    &keys,
                )?;
                datagrams.push(sealed);
            }

            let fields = HandshakeFieldSet {
                protocol: Protocol::Quic,
                init_packet_size: (20 + 8 + datagrams[0].len()) as u32,
                ttl: q.ttl,
                tcp: None,
                quic_header: Some(QuicHeaderFields {
                    version: QUIC_V1,
                    dcid,
                    scid,
                    token_length: 0,
                    udp_payload_size: datagrams[0].len() as u32,
                }),
                chlo,
                quic_params: Some(quic_params),
            };
            Ok(SynthSample {
                label: profile.label.clone(),
                provider: profile.provider,
                protocol: Protocol::Quic,
                fields,
                wire: WirePlan::Quic { ttl: q.ttl, datagrams },
            })
        }
    }
}

fn parse_transport(
    bytes: &[u8],
    registry: &crate::quic::ParamRegistry,
) -> Result<crate::quic::QuicTransportParams, SynthError> {
    crate::quic::parse_transport_params(bytes, registry).map_err(SynthError::from)
}

/// Generates `per_profile` samples from each profile.
pub fn generate_corpus(
    profiles: &[PlatformProfile],
    per_profile: usize,
    registry: &crate::quic::ParamRegistry,
    rng: &mut impl Rng,
) -> Result<Vec<SynthSample>, SynthError> {
    let mut out = Vec::with_capacity(profiles.len() * per_profile);
    for profile in profiles {
        for _ in 0..per_profile {
            out.push(generate(profile, registry, rng)?);
        }
    }
    Ok(out)
}

/// Network identity assigned to one serialized connection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLabel {
    pub src: String,
    pub dst: String,
    pub sport: u16,
    pub dport: u16,
    pub proto: Protocol,
    pub provider: Provider,
    pub device: String,
    pub os: String,
    pub agent: String,
}

/// Hands out unique client 5-tuples and a per-provider server address.
struct NetAllocator {
    next_host: u32,
    next_port: u16,
}

impl NetAllocator {
    fn new() -> NetAllocator {
        NetAllocator {
            next_host: 0,
            next_port: 40000,
        }
    }

    fn client(&mut self) -> ([u8; 4], u16) {
        let host = self.next_host;
        let port = self.next_port;
        self.next_port += 1;
        if self.next_port == 0 {
            self.next_port = 40000;
            self.next_host += 1;
        }
        ([10, 0, (host >> 8) as u8, 2 + (host & 0xff) as u8], port)
    }

    fn server(provider: Provider) -> [u8; 4] {
        match provider {
            Provider::Yt => [142, 250, 70, 14],
            Provider::Nf => [45, 57, 72, 1],
            Provider::Dn => [13, 224, 9, 40],
            Provider::Ap => [52, 94, 228, 6],
            Provider::None => [192, 0, 2, 1],
        }
    }
}

/// Writes each sample as connection-establishment packets, with a small
/// server response for bidirectional telemetry, and returns the per-flow
/// labels in write order.
pub fn serialize_to_pcap(
    samples: &[SynthSample],
    path: &Path,
) -> Result<Vec<FlowLabel>, SynthError> {
    let mut writer = PcapWriter::create(path, LinkType::RawIp)?;
    let mut alloc = NetAllocator::new();
    let mut labels = Vec::with_capacity(samples.len());
    let mut ts = Timestamp::new(1_700_000_000, 0);

    for sample in samples {
        let (client, sport) = alloc.client();
        let server = NetAllocator::server(sample.provider);
        let dport = 443u16;
        let step = |writer: &mut PcapWriter<std::io::BufWriter<std::fs::File>>,
                        ts: &mut Timestamp,
                        raw: &[u8]| {
            writer.write_packet(*ts, raw)?;
            *ts = ts.add_secs_f64(0.01);
            Ok::<(), SynthError>(())
        };

        match &sample.wire {
            WirePlan::Tcp {
                ttl,
                window,
                syn_options,
                syn_flags,
                records,
                segment_split,
            } => {
                let syn = build::tcp_segment(sport, dport, 1000, 0, *syn_flags, *window, syn_options, &[]);
                step(&mut writer, &mut ts, &build::ipv4(client, server, 6, *ttl, &syn))?;

                let synack = build::tcp_segment(
                    dport,
                    sport,
                    9000,
                    1001,
                    crate::packet::tcp_flags::SYN | crate::packet::tcp_flags::ACK,
                    65535,
                    &[2, 4, 5, 180],
                    &[],
                );
                step(&mut writer, &mut ts, &build::ipv4(server, client, 6, 60, &synack))?;

                let pieces: Vec<&[u8]> = match segment_split {
                    Some(at) if *at > 0 && *at < records.len() => {
                        vec![&records[..*at], &records[*at..]]
                    }
                    _ => vec![records.as_slice()],
                };
                let mut seq = 1001u32;
                for piece in pieces {
                    let flags = crate::packet::tcp_flags::ACK | crate::packet::tcp_flags::PSH;
                    let seg = build::tcp_segment(sport, dport, seq, 9001, flags, *window, &[], piece);
                    step(&mut writer, &mut ts, &build::ipv4(client, server, 6, *ttl, &seg))?;
                    seq = seq.wrapping_add(piece.len() as u32);
                }

                let resp = build::tcp_segment(
                    dport,
                    sport,
                    9001,
                    seq,
                    crate::packet::tcp_flags::ACK,
                    65535,
                    &[],
                    &[0u8; 128],
                );
                step(&mut writer, &mut ts, &build::ipv4(server, client, 6, 60, &resp))?;
            }
            WirePlan::Quic { ttl, datagrams } => {
                for datagram in datagrams {
                    let seg = build::udp_segment(sport, dport, datagram);
                    step(&mut writer, &mut ts, &build::ipv4(client, server, 17, *ttl, &seg))?;
                }
                // Short-header-shaped server response, telemetry only.
                let mut resp_payload = vec![0x40];
                resp_payload.extend_from_slice(&[0u8; 199]);
                let seg = build::udp_segment(dport, sport, &resp_payload);
                step(&mut writer, &mut ts, &build::ipv4(server, client, 17, 60, &seg))?;
            }
        }

        labels.push(FlowLabel {
            src: format!("{}.{}.{}.{}", client[0], client[1], client[2], client[3]),
            dst: format!("{}.{}.{}.{}", server[0], server[1], server[2], server[3]),
            sport,
            dport,
            proto: sample.protocol,
            provider: sample.provider,
            device: sample.label.device.clone(),
            os: sample.label.os.clone(),
            agent: sample.label.agent.clone(),
        });
        ts = ts.add_secs_f64(0.05);
    }
    writer.finish()?;
    Ok(labels)
}

/// Writes the labels CSV that accompanies a synthesized pcap.
pub fn write_labels_csv(labels: &[FlowLabel], path: &Path) -> Result<(), SynthError> {
    let mut out = String::from("src,dst,sport,dport,proto,provider,device,os,agent\n");
    for l in labels {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            l.src, l.dst, l.sport, l.dport, l.proto, l.provider, l.device, l.os, l.agent
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<FlowLabel>, SynthError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "src,dst,sport,dport,proto,provider,device,os,agent" {
        return Err(SynthError::BadProfile(
            "labels".to_string(),
            format!("unexpected header {header:?}"),
        ));
    }
    let mut labels = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(SynthError::BadProfile(
                "labels".to_string(),
                format!("bad row {line:?}"),
            ));
        }
        labels.push(FlowLabel {
            src: cols[0].to_string(),
            dst: cols[1].to_string(),
            sport: cols[2].parse().map_err(|_| {
                SynthError::BadProfile("labels".to_string(), format!("bad sport in {line:?}"))
            })?,
            dport: cols[3].parse().map_err(|_| {
                SynthError::BadProfile("labels".to_string(), format!("bad dport in {line:?}"))
            })?,
            proto: cols[4].parse().map_err(|e: String| {
                SynthError::BadProfile("labels".to_string(), e)
            })?,
            provider: cols[5].parse().map_err(|_| {
                SynthError::BadProfile("labels".to_string(), format!("bad provider in {line:?}"))
            })?,
            device: cols[6].to_string(),
            os: cols[7].to_string(),
            agent: cols[8].to_string(),
        });
    }
    Ok(labels)
}
