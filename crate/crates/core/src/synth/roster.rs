//! Built-in platform profiles. Template values are declared fixtures
//! chosen to give each (device, OS, agent) combination a distinct,
//! internally consistent handshake, not measurements of real clients.

use crate::fields::Protocol;
use crate::provider::Provider;
use crate::tls::{ChloSpec, ExtSpec, SessionIdSpec, GREASE_CANONICAL};

use super::{
    JitterAction, JitterRule, ParamSpec, PlatformLabel, PlatformProfile, QuicTemplate,
    TcpTemplate,
};

const G: u16 = GREASE_CANONICAL;

fn windows() -> TcpTemplate {
    TcpTemplate {
        ttl: 128,
        window_size: 64240,
        mss: 1460,
        window_scale: Some(8),
        sack_permitted: true,
        ecn: false,
    }
}

fn macos() -> TcpTemplate {
    TcpTemplate {
        ttl: 64,
        window_size: 65535,
        mss: 1460,
        window_scale: Some(6),
        sack_permitted: true,
        ecn: true,
    }
}

fn ios() -> TcpTemplate {
    TcpTemplate {
        ttl: 64,
        window_size: 65535,
        mss: 1448,
        window_scale: Some(6),
        sack_permitted: true,
        ecn: true,
    }
}

fn android() -> TcpTemplate {
    TcpTemplate {
        ttl: 64,
        window_size: 65535,
        mss: 1400,
        window_scale: Some(7),
        sack_permitted: true,
        ecn: false,
    }
}

fn android_tv() -> TcpTemplate {
    TcpTemplate {
        ttl: 64,
        window_size: 61440,
        mss: 1380,
        window_scale: Some(7),
        sack_permitted: true,
        ecn: false,
    }
}

fn playstation() -> TcpTemplate {
    TcpTemplate {
        ttl: 64,
        window_size: 32768,
        mss: 1460,
        window_scale: None,
        sack_permitted: false,
        ecn: false,
    }
}

fn sig_algs_chromium() -> Vec<u16> {
    vec![0x0403, 0x0804, 0x0401, 0x0503, 0x0805, 0x0501, 0x0806, 0x0601]
}

fn sig_algs_gecko() -> Vec<u16> {
    vec![
        0x0403, 0x0503, 0x0603, 0x0804, 0x0805, 0x0806, 0x0401, 0x0501, 0x0601, 0x0203, 0x0201,
    ]
}

fn sig_algs_apple() -> Vec<u16> {
    vec![0x0403, 0x0804, 0x0401, 0x0503, 0x0203, 0x0805, 0x0501, 0x0806, 0x0601, 0x0201]
}

fn chrome_tcp_chlo(sni: &str) -> ChloSpec {
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Random32,
        cipher_suites: vec![
            G, 0x1301, 0x1302, 0x1303, 0xc02b, 0xc02f, 0xc02c, 0xc030, 0xcca9, 0xcca8, 0xc013,
            0xc014, 0x009c, 0x009d, 0x002f, 0x0035,
        ],
        compression_methods: vec![0],
        extensions: vec![
            ExtSpec::GreaseExtension { body_len: 0 },
            ExtSpec::ServerName(sni.into()),
            ExtSpec::ExtendedMasterSecret,
            ExtSpec::RenegotiationInfo,
            ExtSpec::SupportedGroups(vec![G, 29, 23, 24]),
            ExtSpec::EcPointFormats(vec![0]),
            ExtSpec::SessionTicket(0),
            ExtSpec::Alpn(vec!["h2".into(), "http/1.1".into()]),
            ExtSpec::StatusRequest(1),
            ExtSpec::SignatureAlgorithms(sig_algs_chromium()),
            ExtSpec::SignedCertificateTimestamp,
            ExtSpec::KeyShare(vec![(G, 1), (29, 32)]),
            ExtSpec::PskKeyExchangeModes(vec![1]),
            ExtSpec::SupportedVersions(vec![G, 0x0304, 0x0303]),
            ExtSpec::CompressCertificate(vec![2]),
            ExtSpec::ApplicationSettings(vec!["h2".into()]),
            ExtSpec::GreaseExtension { body_len: 1 },
            ExtSpec::Padding(203),
        ],
    }
}

fn edge_tcp_chlo(sni: &str) -> ChloSpec {
    let mut spec = chrome_tcp_chlo(sni);
    for ext in &mut spec.extensions {
        match ext {
            ExtSpec::SessionTicket(len) => *len = 192,
            ExtSpec::Padding(len) => *len = 171,
            ExtSpec::ApplicationSettings(list) => {
                *list = vec!["h2".into(), "http/1.1".into()];
            }
            _ => {}
        }
    }
    spec
}

fn firefox_tcp_chlo(sni: &str) -> ChloSpec {
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Random32,
        cipher_suites: vec![
            0x1301, 0x1303, 0x1302, 0xc02b, 0xc02f, 0xcca9, 0xcca8, 0xc02c, 0xc030, 0xc00a,
            0xc009, 0xc013, 0xc014, 0x009c, 0x009d, 0x002f, 0x0035,
        ],
        compression_methods: vec![0],
        extensions: vec![
            ExtSpec::ServerName(sni.into()),
            ExtSpec::ExtendedMasterSecret,
            ExtSpec::RenegotiationInfo,
            ExtSpec::SupportedGroups(vec![29, 23, 24, 25, 256, 257]),
            ExtSpec::EcPointFormats(vec![0]),
            ExtSpec::SessionTicket(0),
            ExtSpec::Alpn(vec!["h2".into(), "http/1.1".into()]),
            ExtSpec::StatusRequest(1),
            ExtSpec::DelegatedCredentials(vec![0x0403, 0x0503, 0x0603, 0x0203]),
            ExtSpec::KeyShare(vec![(29, 32), (23, 65)]),
            ExtSpec::SupportedVersions(vec![0x0304, 0x0303]),
            ExtSpec::SignatureAlgorithms(sig_algs_gecko()),
            ExtSpec::PskKeyExchangeModes(vec![1]),
            ExtSpec::RecordSizeLimit(16385),
            ExtSpec::Padding(21),
        ],
    }
}

fn safari_tcp_chlo(sni: &str) -> ChloSpec {
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Random32,
        cipher_suites: vec![
            G, 0x1301, 0x1302, 0x1303, 0xc02c, 0xc02b, 0xcca9, 0xc030, 0xc02f, 0xcca8, 0xc024,
            0xc023, 0xc00a, 0xc009, 0xc028, 0xc027, 0xc014, 0xc013, 0x009d, 0x009c, 0x003d,
            0x003c, 0x0035, 0x002f,
        ],
        compression_methods: vec![0],
        extensions: vec![
            ExtSpec::GreaseExtension { body_len: 0 },
            ExtSpec::ServerName(sni.into()),
            ExtSpec::ExtendedMasterSecret,
            ExtSpec::RenegotiationInfo,
            ExtSpec::SupportedGroups(vec![G, 29, 23, 24, 25]),
            ExtSpec::EcPointFormats(vec![0]),
            ExtSpec::Alpn(vec!["h2".into(), "http/1.1".into()]),
            ExtSpec::StatusRequest(1),
            ExtSpec::SignatureAlgorithms(sig_algs_apple()),
            ExtSpec::SignedCertificateTimestamp,
            ExtSpec::KeyShare(vec![(G, 1), (29, 32)]),
            ExtSpec::PskKeyExchangeModes(vec![1]),
            ExtSpec::SupportedVersions(vec![G, 0x0304, 0x0303, 0x0302, 0x0301]),
            ExtSpec::CompressCertificate(vec![1]),
            ExtSpec::GreaseExtension { body_len: 1 },
            ExtSpec::Padding(250),
        ],
    }
}

fn samsung_tcp_chlo(sni: &str) -> ChloSpec {
    let mut spec = chrome_tcp_chlo(sni);
    spec.cipher_suites.retain(|&c| c != 0x002f && c != 0x0035);
    for ext in &mut spec.extensions {
        if let ExtSpec::Padding(len) = ext {
            *len = 111;
        }
    }
    spec
}

/// Cronet-style CHLO used by the YouTube native apps.
fn yt_native_chlo(sni: &str) -> ChloSpec {
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Random32,
        cipher_suites: vec![
            G, 0x1301, 0x1302, 0x1303, 0xc02b, 0xc02f, 0xc02c, 0xc030, 0xcca9, 0xcca8,
        ],
        compression_methods: vec![0],
        extensions: vec![
            ExtSpec::GreaseExtension { body_len: 0 },
            ExtSpec::ServerName(sni.into()),
            ExtSpec::ExtendedMasterSecret,
            ExtSpec::RenegotiationInfo,
            ExtSpec::SupportedGroups(vec![G, 29, 23, 24]),
            ExtSpec::EcPointFormats(vec![0]),
            ExtSpec::SessionTicket(0),
            ExtSpec::Alpn(vec!["h2".into()]),
            ExtSpec::StatusRequest(1),
            ExtSpec::SignatureAlgorithms(sig_algs_chromium()),
            ExtSpec::SignedCertificateTimestamp,
            ExtSpec::KeyShare(vec![(G, 1), (29, 32)]),
            ExtSpec::PskKeyExchangeModes(vec![1]),
            ExtSpec::SupportedVersions(vec![G, 0x0304, 0x0303]),
            ExtSpec::GreaseExtension { body_len: 1 },
        ],
    }
}

fn nf_native_chlo(sni: &str) -> ChloSpec {
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Empty,
        cipher_suites: vec![
            0x1301, 0x1302, 0x1303, 0xc02b, 0xc02f, 0xc02c, 0xc030, 0x009c, 0x009d,
        ],
        compression_methods: vec![0],
        extensions: vec![
            ExtSpec::ServerName(sni.into()),
            ExtSpec::ExtendedMasterSecret,
            ExtSpec::RenegotiationInfo,
            ExtSpec::SupportedGroups(vec![29, 23]),
            ExtSpec::EcPointFormats(vec![0]),
            ExtSpec::Alpn(vec!["h2".into(), "http/1.1".into()]),
            ExtSpec::SignatureAlgorithms(sig_algs_chromium()),
            ExtSpec::KeyShare(vec![(29, 32)]),
            ExtSpec::PskKeyExchangeModes(vec![1]),
            ExtSpec::SupportedVersions(vec![0x0304, 0x0303]),
        ],
    }
}

fn dn_native_chlo(sni: &str) -> ChloSpec {
    let mut spec = nf_native_chlo(sni);
    spec.cipher_suites.push(0xcca9);
    spec.extensions.push(ExtSpec::SignedCertificateTimestamp);
    spec
}

fn ap_native_chlo(sni: &str) -> ChloSpec {
    let mut spec = nf_native_chlo(sni);
    spec.session_id = SessionIdSpec::Random32;
    spec.extensions.push(ExtSpec::SessionTicket(0));
    spec.extensions.push(ExtSpec::StatusRequest(1));
    spec
}

/// Older embedded stack on the console: TLS 1.2 only, encrypt_then_mac.
fn ps_native_chlo(sni: &str) -> ChloSpec {
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Empty,
        cipher_suites: vec![
            0xc02c, 0xc02b, 0xc030, 0xc02f, 0x009d, 0x009c, 0x003d, 0x003c, 0x0035, 0x002f,
        ],
        compression_methods: vec![0],
        extensions: vec![
            ExtSpec::ServerName(sni.into()),
            ExtSpec::SupportedGroups(vec![23, 24, 25]),
            ExtSpec::EcPointFormats(vec![0, 1, 2]),
            ExtSpec::SignatureAlgorithms(vec![0x0401, 0x0501, 0x0601, 0x0403, 0x0503, 0x0603]),
            ExtSpec::EncryptThenMac,
            ExtSpec::ExtendedMasterSecret,
            ExtSpec::RenegotiationInfo,
            ExtSpec::SessionTicket(0),
            ExtSpec::Alpn(vec!["http/1.1".into()]),
        ],
    }
}

/// HTTP/3 CHLO shared shape for QUIC profiles.
fn quic_chlo(sni: &str, chromium: bool) -> ChloSpec {
    let mut extensions = vec![
        ExtSpec::ServerName(sni.into()),
        ExtSpec::SupportedGroups(if chromium {
            vec![G, 29, 23, 24]
        } else {
            vec![29, 23, 24, 25]
        }),
        ExtSpec::Alpn(vec!["h3".into()]),
        ExtSpec::SignatureAlgorithms(if chromium {
            sig_algs_chromium()
        } else {
            sig_algs_gecko()
        }),
        ExtSpec::KeyShare(if chromium {
            vec![(G, 1), (29, 32)]
        } else {
            vec![(29, 32)]
        }),
        ExtSpec::PskKeyExchangeModes(vec![1]),
        ExtSpec::SupportedVersions(if chromium {
            vec![G, 0x0304]
        } else {
            vec![0x0304]
        }),
    ];
    if chromium {
        extensions.insert(0, ExtSpec::GreaseExtension { body_len: 0 });
        extensions.push(ExtSpec::CompressCertificate(vec![2]));
        extensions.push(ExtSpec::ApplicationSettings(vec!["h3".into()]));
        extensions.push(ExtSpec::GreaseExtension { body_len: 1 });
    }
    ChloSpec {
        legacy_version: 0x0303,
        session_id: SessionIdSpec::Empty,
        cipher_suites: vec![0x1301, 0x1302, 0x1303],
        compression_methods: vec![0],
        extensions,
    }
}

fn base_quic_params(max_data: u64, idle_ms: u64) -> Vec<ParamSpec> {
    vec![
        ParamSpec::VarInt { id: 0x01, value: idle_ms },
        ParamSpec::VarInt { id: 0x03, value: 1472 },
        ParamSpec::VarInt { id: 0x04, value: max_data },
        ParamSpec::VarInt { id: 0x05, value: 6_291_456 },
        ParamSpec::VarInt { id: 0x06, value: 6_291_456 },
        ParamSpec::VarInt { id: 0x07, value: 6_291_456 },
        ParamSpec::VarInt { id: 0x08, value: 100 },
        ParamSpec::VarInt { id: 0x09, value: 103 },
        ParamSpec::SourceCid { id: 0x0f },
    ]
}

fn set_varint(params: &mut [ParamSpec], id: u64, value: u64) {
    for p in params.iter_mut() {
        if matches!(p, ParamSpec::VarInt { id: pid, .. } if *pid == id) {
            *p = ParamSpec::VarInt { id, value };
            return;
        }
    }
    panic!("parameter {id:#x} not in template");
}

/// OS builds ship distinct datagram and flow-control defaults, so the
/// same browser differs across operating systems in several parameters,
/// not just padding and TTL.
fn chrome_quic(ttl: u8, pad_to: u16, max_udp: u64, max_data: u64, streams_uni: u64) -> QuicTemplate {
    let mut params = base_quic_params(max_data, 30_000);
    set_varint(&mut params, 0x03, max_udp);
    set_varint(&mut params, 0x09, streams_uni);
    params.push(ParamSpec::VarInt { id: 0x20, value: 65536 });
    params.push(ParamSpec::Reserved { seq: 31 });
    QuicTemplate {
        ttl,
        dcid_len: 8,
        scid_len: 0,
        pad_to,
        pn_len: 1,
        initial_count: 1,
        clear_fixed_bit: false,
        params,
    }
}

fn edge_quic(ttl: u8, pad_to: u16, max_udp: u64, max_data: u64, streams_uni: u64) -> QuicTemplate {
    let mut t = chrome_quic(ttl, pad_to, max_udp, max_data, streams_uni);
    t.params.push(ParamSpec::VarInt { id: 0x0b, value: 24 });
    t.params.push(ParamSpec::VarInt { id: 0x0e, value: 4 });
    t
}

fn samsung_quic(ttl: u8, pad_to: u16, max_udp: u64, max_data: u64) -> QuicTemplate {
    let mut t = chrome_quic(ttl, pad_to, max_udp, max_data, 120);
    set_varint(&mut t.params, 0x20, 16_384);
    t
}

fn firefox_quic(ttl: u8, pad_to: u16, max_udp: u64) -> QuicTemplate {
    let mut params = base_quic_params(25_165_824, 120_000);
    set_varint(&mut params, 0x03, max_udp);
    params.push(ParamSpec::VarInt { id: 0x0b, value: 20 });
    params.push(ParamSpec::VarInt { id: 0x0e, value: 8 });
    params.push(ParamSpec::Flag { id: 0x2ab2 });
    QuicTemplate {
        ttl,
        dcid_len: 8,
        scid_len: 8,
        pad_to,
        pn_len: 4,
        initial_count: 2,
        clear_fixed_bit: true,
        params,
    }
}

fn yt_native_quic(ttl: u8, pad_to: u16, ua: &str, idle_ms: u64, streams_uni: u64) -> QuicTemplate {
    let mut params = base_quic_params(10_485_760, idle_ms);
    set_varint(&mut params, 0x09, streams_uni);
    params.push(ParamSpec::Utf8 { id: 0x3129, value: ua.to_string() });
    params.push(ParamSpec::Utf8 { id: 0x3128, value: "RVCM".to_string() });
    params.push(ParamSpec::Flag { id: 0x3127 });
    QuicTemplate {
        ttl,
        dcid_len: 8,
        scid_len: 8,
        pad_to,
        pn_len: 1,
        initial_count: 1,
        clear_fixed_bit: false,
        params,
    }
}

fn shuffle_rule() -> JitterRule {
    JitterRule {
        probability: 1.0,
        action: JitterAction::ShuffleExtensions,
    }
}

struct Entry {
    device: &'static str,
    os: &'static str,
    agent: &'static str,
    tcp: fn() -> TcpTemplate,
    chlo: fn(&str) -> ChloSpec,
    shuffles: bool,
}

const YT_SNI: &str = "www.youtube.com";
const NF_SNI: &str = "www.netflix.com";
const DN_SNI: &str = "www.disneyplus.com";
const AP_SNI: &str = "www.primevideo.com";

fn tcp_profile(provider: Provider, sni: &str, e: &Entry) -> PlatformProfile {
    PlatformProfile {
        label: PlatformLabel::new(e.device, e.os, e.agent),
        provider,
        protocol: Protocol::Tcp,
        sni: sni.to_string(),
        chlo: (e.chlo)(sni),
        tcp: Some((e.tcp)()),
        quic: None,
        record_version: 0x0301,
        record_split: None,
        segment_split: None,
        jitter: if e.shuffles { vec![shuffle_rule()] } else { Vec::new() },
    }
}

fn browser_entries(native_chlo: fn(&str) -> ChloSpec, with_mac_native: bool) -> Vec<Entry> {
    let mut entries = vec![
        Entry { device: "PC", os: "Windows", agent: "Chrome", tcp: windows, chlo: chrome_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "Windows", agent: "Edge", tcp: windows, chlo: edge_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "Windows", agent: "Firefox", tcp: windows, chlo: firefox_tcp_chlo, shuffles: false },
        Entry { device: "PC", os: "Windows", agent: "Native app", tcp: windows, chlo: native_chlo, shuffles: false },
        Entry { device: "PC", os: "macOS", agent: "Safari", tcp: macos, chlo: safari_tcp_chlo, shuffles: false },
        Entry { device: "PC", os: "macOS", agent: "Chrome", tcp: macos, chlo: chrome_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "macOS", agent: "Edge", tcp: macos, chlo: edge_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "macOS", agent: "Firefox", tcp: macos, chlo: firefox_tcp_chlo, shuffles: false },
        Entry { device: "Mobile", os: "Android", agent: "Native app", tcp: android, chlo: native_chlo, shuffles: false },
        Entry { device: "Mobile", os: "iOS", agent: "Native app", tcp: ios, chlo: native_chlo, shuffles: false },
        Entry { device: "TV", os: "Android TV", agent: "Native app", tcp: android_tv, chlo: native_chlo, shuffles: false },
        Entry { device: "TV", os: "PlayStation", agent: "Native app", tcp: playstation, chlo: ps_native_chlo, shuffles: false },
    ];
    if with_mac_native {
        entries.insert(8, Entry {
            device: "PC",
            os: "macOS",
            agent: "Native app",
            tcp: macos,
            chlo: native_chlo,
            shuffles: false,
        });
    }
    entries
}

fn yt_tcp_profiles() -> Vec<PlatformProfile> {
    let entries = vec![
        Entry { device: "PC", os: "Windows", agent: "Chrome", tcp: windows, chlo: chrome_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "Windows", agent: "Edge", tcp: windows, chlo: edge_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "Windows", agent: "Firefox", tcp: windows, chlo: firefox_tcp_chlo, shuffles: false },
        Entry { device: "PC", os: "macOS", agent: "Safari", tcp: macos, chlo: safari_tcp_chlo, shuffles: false },
        Entry { device: "PC", os: "macOS", agent: "Chrome", tcp: macos, chlo: chrome_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "macOS", agent: "Edge", tcp: macos, chlo: edge_tcp_chlo, shuffles: true },
        Entry { device: "PC", os: "macOS", agent: "Firefox", tcp: macos, chlo: firefox_tcp_chlo, shuffles: false },
        Entry { device: "Mobile", os: "Android", agent: "Chrome", tcp: android, chlo: chrome_tcp_chlo, shuffles: true },
        Entry { device: "Mobile", os: "Android", agent: "Samsung Internet", tcp: android, chlo: samsung_tcp_chlo, shuffles: true },
        Entry { device: "Mobile", os: "Android", agent: "Native app", tcp: android, chlo: yt_native_chlo, shuffles: false },
        Entry { device: "Mobile", os: "iOS", agent: "Safari", tcp: ios, chlo: safari_tcp_chlo, shuffles: false },
        Entry { device: "Mobile", os: "iOS", agent: "Native app", tcp: ios, chlo: yt_native_chlo, shuffles: false },
        Entry { device: "TV", os: "Android TV", agent: "Native app", tcp: android_tv, chlo: yt_native_chlo, shuffles: false },
        Entry { device: "TV", os: "PlayStation", agent: "Native app", tcp: playstation, chlo: ps_native_chlo, shuffles: false },
    ];
    let mut profiles: Vec<PlatformProfile> = entries
        .iter()
        .map(|e| tcp_profile(Provider::Yt, YT_SNI, e))
        .collect();
    // Exercise the reassembly paths: Safari's large CHLO crosses a segment
    // boundary, the console stack splits the handshake across two records,
    // and Windows Chrome drifts its receive window on a tenth of flows.
    for p in &mut profiles {
        match (p.label.os.as_str(), p.label.agent.as_str()) {
            ("macOS", "Safari") => p.segment_split = Some(150),
            ("PlayStation", _) => p.record_split = Some(64),
            ("Windows", "Chrome") => p.jitter.push(JitterRule {
                probability: 0.10,
                action: JitterAction::WindowSize { pool: vec![65535, 29200] },
            }),
            _ => {}
        }
    }
    profiles
}

fn yt_quic_profiles() -> Vec<PlatformProfile> {
    struct QuicEntry {
        device: &'static str,
        os: &'static str,
        agent: &'static str,
        template: QuicTemplate,
        chromium: bool,
    }
    let entries = vec![
        QuicEntry { device: "PC", os: "Windows", agent: "Chrome", template: chrome_quic(128, 1250), chromium: true },
        QuicEntry { device: "PC", os: "Windows", agent: "Edge", template: edge_quic(128, 1252), chromium: true },
        QuicEntry { device: "PC", os: "Windows", agent: "Firefox", template: firefox_quic(128, 1357), chromium: false },
        QuicEntry { device: "PC", os: "macOS", agent: "Chrome", template: chrome_quic(64, 1250), chromium: true },
        QuicEntry { device: "PC", os: "macOS", agent: "Edge", template: edge_quic(64, 1252), chromium: true },
        QuicEntry { device: "PC", os: "macOS", agent: "Firefox", template: firefox_quic(64, 1355), chromium: false },
        QuicEntry { device: "Mobile", os: "Android", agent: "Chrome", template: chrome_quic(64, 1254), chromium: true },
        QuicEntry { device: "Mobile", os: "Android", agent: "Samsung Internet", template: chrome_quic(64, 1244), chromium: true },
        QuicEntry {
            device: "Mobile",
            os: "Android",
            agent: "Native app",
            template: yt_native_quic(64, 1350, "com.google.android.youtube/19.20"),
            chromium: true,
        },
        QuicEntry { device: "Mobile", os: "iOS", agent: "Chrome", template: chrome_quic(64, 1256), chromium: true },
        QuicEntry {
            device: "Mobile",
            os: "iOS",
            agent: "Native app",
            template: yt_native_quic(64, 1280, "com.google.ios.youtube/19.20"),
            chromium: true,
        },
        QuicEntry {
            device: "TV",
            os: "Android TV",
            agent: "Native app",
            template: yt_native_quic(64, 1352, "com.google.android.youtube.tv/4.40"),
            chromium: true,
        },
    ];
    entries
        .into_iter()
        .map(|e| {
            let shuffles = e.chromium && e.agent != "Native app";
            let mut jitter = if shuffles { vec![shuffle_rule()] } else { Vec::new() };
            if e.os == "Android" && e.agent == "Native app" {
                jitter.push(JitterRule {
                    probability: 0.10,
                    action: JitterAction::InitialMaxData {
                        pool: vec![12_582_912, 8_388_608],
                    },
                });
            }
            PlatformProfile {
                label: PlatformLabel::new(e.device, e.os, e.agent),
                provider: Provider::Yt,
                protocol: Protocol::Quic,
                sni: YT_SNI.to_string(),
                chlo: quic_chlo(YT_SNI, e.chromium),
                tcp: None,
                quic: Some(e.template),
                record_version: 0x0301,
                record_split: None,
                segment_split: None,
                jitter,
            }
        })
        .collect()
}

/// The full built-in profile set: 12 QUIC and 14 TCP YouTube platforms,
/// and TCP platforms for Netflix (12), Disney+ (12), and Prime Video (13).
pub fn builtin_roster() -> Vec<PlatformProfile> {
    let mut out = yt_quic_profiles();
    out.extend(yt_tcp_profiles());
    out.extend(
        browser_entries(nf_native_chlo, false)
            .iter()
            .map(|e| tcp_profile(Provider::Nf, NF_SNI, e)),
    );
    out.extend(
        browser_entries(dn_native_chlo, false)
            .iter()
            .map(|e| tcp_profile(Provider::Dn, DN_SNI, e)),
    );
    out.extend(
        browser_entries(ap_native_chlo, true)
            .iter()
            .map(|e| tcp_profile(Provider::Ap, AP_SNI, e)),
    );
    out
}
