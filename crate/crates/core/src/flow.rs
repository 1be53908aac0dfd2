//! Flow table: groups packets into bidirectional flows, captures the
//! client's handshake bytes (TCP first flight or decrypted QUIC Initials),
//! tags provider flows by SNI, and accumulates telemetry.

use std::collections::{BTreeMap, HashMap};
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::error::ChloError;
use crate::fields::{HandshakeFieldSet, Protocol};
use crate::packet::{tcp_flags, PacketView, Transport};
use crate::pcap::Timestamp;
use crate::provider::{Provider, ProviderTable, Role};
use crate::quic::{
    decrypt_initial, derive_initial_keys, initial_dcid, is_quic_initial, parse_frames,
    parse_transport_params, try_reassemble, CryptoChunk, InitialKeys, ParamRegistry,
    QuicHeaderFields, QUIC_V1,
};
use crate::tls::{extract_chlo, parse_client_hello, parse_syn, TcpHandshakeFields};

/// Client→server handshake bytes kept per flow, at most.
pub const HANDSHAKE_BUFFER_CAP: usize = 16 * 1024;
/// Initial packets examined per QUIC flow before giving up on the CHLO.
pub const MAX_INITIAL_PACKETS: u32 = 3;
/// Seconds without traffic after which a flow is finalized.
pub const IDLE_TIMEOUT_SECS: f64 = 120.0;

/// Canonical bidirectional flow identity: the endpoint with the lower
/// (address, port) pair is always `a`, so both directions map to one key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub addr_a: IpAddr,
    pub port_a: u16,
    pub addr_b: IpAddr,
    pub port_b: u16,
    pub transport: Transport,
}

impl FlowKey {
    pub fn new(
        src: IpAddr,
        src_port: u16,
        dst: IpAddr,
        dst_port: u16,
        transport: Transport,
    ) -> FlowKey {
        if (src, src_port) <= (dst, dst_port) {
            FlowKey {
                addr_a: src,
                port_a: src_port,
                addr_b: dst,
                port_b: dst_port,
                transport,
            }
        } else {
            FlowKey {
                addr_a: dst,
                port_a: dst_port,
                addr_b: src,
                port_b: src_port,
                transport,
            }
        }
    }

    /// Key of a TCP or UDP packet; `None` for other transports or
    /// packets without parsed addresses.
    pub fn of_packet(pkt: &PacketView<'_>) -> Option<FlowKey> {
        if pkt.transport == Transport::Other {
            return None;
        }
        Some(FlowKey::new(
            pkt.src?,
            pkt.src_port?,
            pkt.dst?,
            pkt.dst_port?,
            pkt.transport,
        ))
    }

    /// True when the packet travels from endpoint `a` to endpoint `b`.
    fn packet_is_a_to_b(&self, pkt: &PacketView<'_>) -> bool {
        pkt.src == Some(self.addr_a)
            && pkt.src_port == Some(self.port_a)
            && pkt.dst == Some(self.addr_b)
            && pkt.dst_port == Some(self.port_b)
    }
}

/// Per-flow counters split by direction, with 1-second downstream bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTelemetry {
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
    pub up_bytes: u64,
    pub down_bytes: u64,
    pub up_packets: u64,
    pub down_packets: u64,
    /// Downstream bytes per whole epoch second.
    pub down_bins: BTreeMap<u64, u64>,
}

impl FlowTelemetry {
    fn new(first: Timestamp) -> FlowTelemetry {
        FlowTelemetry {
            first_ts: first,
            last_ts: first,
            up_bytes: 0,
            down_bytes: 0,
            up_packets: 0,
            down_packets: 0,
            down_bins: BTreeMap::new(),
        }
    }

    fn record(&mut self, ts: Timestamp, bytes: u64, upstream: bool) {
        if ts > self.last_ts {
            self.last_ts = ts;
        }
        if upstream {
            self.up_bytes += bytes;
            self.up_packets += 1;
        } else {
            self.down_bytes += bytes;
            self.down_packets += 1;
            *self.down_bins.entry(ts.secs).or_default() += bytes;
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.last_ts.seconds_since(self.first_ts)
    }

    pub fn total_bytes(&self) -> u64 {
        self.up_bytes + self.down_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChloProgress {
    Pending,
    Parsed,
    Unavailable,
}

#[derive(Debug)]
struct TcpCapture {
    buffer: Vec<u8>,
    /// Next expected client sequence number; set once the SYN is seen.
    next_seq: Option<u32>,
    syn: Option<TcpHandshakeFields>,
}

#[derive(Debug)]
struct QuicCapture {
    keys: Option<InitialKeys>,
    header: Option<QuicHeaderFields>,
    chunks: Vec<CryptoChunk>,
    initials_seen: u32,
}

#[derive(Debug)]
struct FlowState {
    key: FlowKey,
    /// The flow's first packet came from endpoint `a`.
    client_is_a: bool,
    client: (IpAddr, u16),
    server: (IpAddr, u16),
    protocol: Option<Protocol>,
    telemetry: FlowTelemetry,
    /// IP total length and TTL of the first client packet.
    init_packet_size: u32,
    ttl: u8,
    progress: ChloProgress,
    tcp: Option<TcpCapture>,
    quic: Option<QuicCapture>,
    fields: Option<HandshakeFieldSet>,
    provider: Provider,
    role: Role,
}

/// A finalized flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub client_addr: IpAddr,
    pub client_port: u16,
    pub server_addr: IpAddr,
    pub server_port: u16,
    pub provider: Provider,
    pub role: Role,
    /// Set for TCP flows and for UDP flows recognized as QUIC.
    pub protocol: Option<Protocol>,
    pub chlo_parsed: bool,
    /// Parsed handshake fields, present iff the ClientHello was recovered.
    pub fields: Option<HandshakeFieldSet>,
    pub telemetry: FlowTelemetry,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub handshake_buffer_cap: usize,
    pub max_initial_packets: u32,
    pub idle_timeout_secs: f64,
}

impl Default for FlowConfig {
    fn default() -> FlowConfig {
        FlowConfig {
            handshake_buffer_cap: HANDSHAKE_BUFFER_CAP,
            max_initial_packets: MAX_INITIAL_PACKETS,
            idle_timeout_secs: IDLE_TIMEOUT_SECS,
        }
    }
}

/// Sweep for idle flows once per this many processed packets.
const IDLE_SWEEP_INTERVAL: u64 = 256;

pub struct FlowTable {
    flows: HashMap<FlowKey, FlowState>,
    config: FlowConfig,
    providers: ProviderTable,
    params: ParamRegistry,
    packets_since_sweep: u64,
}

impl FlowTable {
    pub fn new(providers: ProviderTable, params: ParamRegistry) -> FlowTable {
        FlowTable::with_config(providers, params, FlowConfig::default())
    }

    pub fn with_config(
        providers: ProviderTable,
        params: ParamRegistry,
        config: FlowConfig,
    ) -> FlowTable {
        FlowTable {
            flows: HashMap::new(),
            config,
            providers,
            params,
            packets_since_sweep: 0,
        }
    }

    pub fn active_flows(&self) -> usize {
        self.flows.len()
    }

    /// Feeds one packet; returns any flows finalized by the idle timeout,
    /// measured in event time.
    pub fn process(&mut self, pkt: &PacketView<'_>) -> Vec<FlowRecord> {
        if let Some(key) = FlowKey::of_packet(pkt) {
            let config = &self.config;
            let state = self.flows.entry(key.clone()).or_insert_with(|| {
                let a_to_b = key.packet_is_a_to_b(pkt);
                let client = (pkt.src.unwrap(), pkt.src_port.unwrap());
                let server = (pkt.dst.unwrap(), pkt.dst_port.unwrap());
                FlowState {
                    client_is_a: a_to_b,
                    client,
                    server,
                    protocol: match key.transport {
                        Transport::Tcp => Some(Protocol::Tcp),
                        _ => None,
                    },
                    telemetry: FlowTelemetry::new(pkt.ts),
                    init_packet_size: pkt.total_ip_length,
                    ttl: pkt.ttl.unwrap_or(0),
                    progress: ChloProgress::Pending,
                    tcp: (key.transport == Transport::Tcp).then(|| TcpCapture {
                        buffer: Vec::new(),
                        next_seq: None,
                        syn: None,
                    }),
                    quic: None,
                    fields: None,
                    provider: Provider::None,
                    role: Role::Unknown,
                    key: key.clone(),
                }
            });
            let upstream = state.key.packet_is_a_to_b(pkt) == state.client_is_a;
            state.telemetry.record(pkt.ts, pkt.total_ip_length as u64, upstream);
            if upstream && state.progress == ChloProgress::Pending {
                match state.key.transport {
                    Transport::Tcp => update_tcp(state, pkt, config),
                    Transport::Udp => update_quic(state, pkt, config, &self.params),
                    Transport::Other => {}
                }
                if state.progress == ChloProgress::Parsed {
                    if let Some(fields) = &state.fields {
                        let sni = fields.chlo.ext.server_name.as_deref().unwrap_or("");
                        let (provider, role) =
                            self.providers.detect(sni, state.server.1);
                        state.provider = provider;
                        state.role = role;
                    }
                }
            }
        }

        self.packets_since_sweep += 1;
        if self.packets_since_sweep >= IDLE_SWEEP_INTERVAL {
            self.packets_since_sweep = 0;
            self.sweep_idle(pkt.ts)
        } else {
            Vec::new()
        }
    }

    fn sweep_idle(&mut self, now: Timestamp) -> Vec<FlowRecord> {
        let timeout = self.config.idle_timeout_secs;
        let expired: Vec<FlowKey> = self
            .flows
            .iter()
            .filter(|(_, s)| now.seconds_since(s.telemetry.last_ts) > timeout)
            .map(|(k, _)| k.clone())
            .collect();
        expired
            .into_iter()
            .map(|key| finalize(self.flows.remove(&key).expect("key just listed")))
            .collect()
    }

    /// Finalizes every remaining flow, ordered by key.
    pub fn finish(&mut self) -> Vec<FlowRecord> {
        let mut states: Vec<FlowState> = self.flows.drain().map(|(_, s)| s).collect();
        states.sort_by(|x, y| x.key.cmp(&y.key));
        states.into_iter().map(finalize).collect()
    }
}

fn finalize(state: FlowState) -> FlowRecord {
    FlowRecord {
        key: state.key,
        client_addr: state.client.0,
        client_port: state.client.1,
        server_addr: state.server.0,
        server_port: state.server.1,
        provider: state.provider,
        role: state.role,
        protocol: state.protocol,
        chlo_parsed: state.progress == ChloProgress::Parsed,
        fields: state.fields,
        telemetry: state.telemetry,
    }
}

/// Parses the recovered CHLO body into the flow's field set.
fn complete_chlo(state: &mut FlowState, body: &[u8], params: Option<&ParamRegistry>) {
    let chlo = match parse_client_hello(body) {
        Ok(chlo) => chlo,
        Err(_) => {
            state.progress = ChloProgress::Unavailable;
            return;
        }
    };
    let quic_params = match (&chlo.ext.quic_transport_parameters, params) {
        (Some(body), Some(registry)) => match parse_transport_params(body, registry) {
            Ok(qp) => Some(qp),
            Err(_) => {
                state.progress = ChloProgress::Unavailable;
                return;
            }
        },
        _ => None,
    };
    let (protocol, tcp, quic_header) = match state.key.transport {
        Transport::Tcp => (
            Protocol::Tcp,
            state.tcp.as_ref().and_then(|t| t.syn.clone()),
            None,
        ),
        _ => (
            Protocol::Quic,
            None,
            state.quic.as_ref().and_then(|q| q.header.clone()),
        ),
    };
    state.fields = Some(HandshakeFieldSet {
        protocol,
        init_packet_size: state.init_packet_size,
        ttl: state.ttl,
        tcp,
        quic_header,
        chlo,
        quic_params,
    });
    state.progress = ChloProgress::Parsed;
}

fn update_tcp(state: &mut FlowState, pkt: &PacketView<'_>, config: &FlowConfig) {
    let capture = state.tcp.as_mut().expect("tcp flow has a tcp capture");
    if pkt.has_tcp_flag(tcp_flags::SYN) && !pkt.has_tcp_flag(tcp_flags::ACK) {
        if capture.syn.is_none() {
            capture.syn = Some(parse_syn(pkt));
            capture.next_seq = pkt.tcp_seq.map(|isn| isn.wrapping_add(1));
        }
        return;
    }
    if pkt.payload.is_empty() {
        return;
    }
    let (Some(seq), Some(expected)) = (pkt.tcp_seq, capture.next_seq) else {
        return;
    };

    // In-order bytes append directly; retransmissions contribute only the
    // unseen tail; anything beyond the expected sequence is a gap, after
    // which the first flight cannot be trusted.
    let payload: &[u8] = if seq == expected {
        pkt.payload
    } else {
        let offset = expected.wrapping_sub(seq);
        if offset as usize >= pkt.payload.len() || offset > 0x4000_0000 {
            if seq.wrapping_sub(expected) < 0x4000_0000 && seq != expected {
                // seq is ahead of expected: missing bytes in between.
                state.progress = ChloProgress::Unavailable;
            }
            return;
        }
        &pkt.payload[offset as usize..]
    };
    capture.next_seq = Some(expected.wrapping_add(payload.len() as u32));

    let room = config.handshake_buffer_cap - capture.buffer.len();
    let take = payload.len().min(room);
    capture.buffer.extend_from_slice(&payload[..take]);

    match extract_chlo(&capture.buffer) {
        Ok(extracted) => {
            let body = extracted.body;
            complete_chlo(state, &body, None);
        }
        Err(ChloError::Incomplete) => {
            if capture.buffer.len() >= config.handshake_buffer_cap {
                state.progress = ChloProgress::Unavailable;
            }
        }
        Err(_) => state.progress = ChloProgress::Unavailable,
    }
}

fn update_quic(
    state: &mut FlowState,
    pkt: &PacketView<'_>,
    config: &FlowConfig,
    params: &ParamRegistry,
) {
    let mut data = pkt.payload;
    if state.quic.is_none() {
        if !is_quic_initial(data) {
            return;
        }
        state.protocol = Some(Protocol::Quic);
        state.quic = Some(QuicCapture {
            keys: None,
            header: None,
            chunks: Vec::new(),
            initials_seen: 0,
        });
    }

    while !data.is_empty() && state.progress == ChloProgress::Pending {
        if !is_quic_initial(data) {
            // Coalesced non-Initial packets carry no more first-flight
            // CRYPTO data.
            return;
        }
        let capture = state.quic.as_mut().expect("quic capture initialized above");
        if capture.keys.is_none() {
            let Some(dcid) = initial_dcid(data) else { return };
            match derive_initial_keys(&dcid, QUIC_V1) {
                Ok(keys) => capture.keys = Some(keys),
                Err(_) => {
                    state.progress = ChloProgress::Unavailable;
                    return;
                }
            }
        }
        capture.initials_seen += 1;
        if capture.initials_seen > config.max_initial_packets {
            state.progress = ChloProgress::Unavailable;
            return;
        }
        let keys = capture.keys.as_ref().expect("keys derived above");
        let initial = match decrypt_initial(data, keys) {
            Ok(initial) => initial,
            Err(_) => {
                state.progress = ChloProgress::Unavailable;
                return;
            }
        };
        if capture.header.is_none() {
            capture.header = Some(initial.header.clone());
        }
        match parse_frames(&initial.payload) {
            Ok(chunks) => capture.chunks.extend(chunks),
            Err(_) => {
                state.progress = ChloProgress::Unavailable;
                return;
            }
        }
        if let Some(body) = try_reassemble(&capture.chunks) {
            complete_chlo(state, &body, Some(params));
            return;
        }
        data = &data[initial.consumed..];
    }
}
