//! Link/network/transport layer decoding into a borrowed packet view.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use crate::pcap::{LinkType, Timestamp};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum Transport {
    Tcp,
    Udp,
    Other,
}

pub mod tcp_flags {
    pub const FIN: u8 = 0x01;
    pub const SYN: u8 = 0x02;
    pub const RST: u8 = 0x04;
    pub const PSH: u8 = 0x08;
    pub const ACK: u8 = 0x10;
    pub const URG: u8 = 0x20;
    pub const ECE: u8 = 0x40;
    pub const CWR: u8 = 0x80;
}

/// Decoded view of one packet. Layers that failed to parse leave their
/// fields unset; `payload` is empty unless the transport layer parsed.
#[derive(Debug, Clone)]
pub struct PacketView<'a> {
    pub ts: Timestamp,
    pub link_type: LinkType,
    pub ip_version: Option<u8>,
    pub ttl: Option<u8>,
    pub src: Option<IpAddr>,
    pub dst: Option<IpAddr>,
    pub transport: Transport,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub tcp_flags: Option<u8>,
    pub tcp_seq: Option<u32>,
    pub tcp_window: Option<u16>,
    pub tcp_options: Option<&'a [u8]>,
    pub payload: &'a [u8],
    /// Total length claimed by the IP header, in bytes.
    pub total_ip_length: u32,
}

impl<'a> PacketView<'a> {
    fn bare(ts: Timestamp, link_type: LinkType) -> Self {
        PacketView {
            ts,
            link_type,
            ip_version: None,
            ttl: None,
            src: None,
            dst: None,
            transport: Transport::Other,
            src_port: None,
            dst_port: None,
            tcp_flags: None,
            tcp_seq: None,
            tcp_window: None,
            tcp_options: None,
            payload: &[],
            total_ip_length: 0,
        }
    }

    pub fn has_tcp_flag(&self, flag: u8) -> bool {
        self.tcp_flags.map_or(false, |f| f & flag != 0)
    }
}

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;

/// Decodes one frame. Never fails: layers that cannot be parsed are left
/// empty and the transport is reported as `Other`.
pub fn decode_packet<'a>(ts: Timestamp, raw: &'a [u8], link_type: LinkType) -> PacketView<'a> {
    let mut view = PacketView::bare(ts, link_type);
    let ip = match link_type {
        LinkType::Ethernet => match strip_ethernet(raw) {
            Some(ip) => ip,
            None => return view,
        },
        LinkType::RawIp => raw,
    };
    decode_ip(ip, &mut view);
    view
}

fn strip_ethernet(raw: &[u8]) -> Option<&[u8]> {
    if raw.len() < 14 {
        return None;
    }
    let mut ethertype = u16::from_be_bytes([raw[12], raw[13]]);
    let mut offset = 14;
    // Hop over up to two VLAN tags (802.1Q / 802.1ad).
    for _ in 0..2 {
        if ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
            if raw.len() < offset + 4 {
                return None;
            }
            ethertype = u16::from_be_bytes([raw[offset + 2], raw[offset + 3]]);
            offset += 4;
        }
    }
    match ethertype {
        ETHERTYPE_IPV4 | ETHERTYPE_IPV6 => Some(&raw[offset..]),
        _ => None,
    }
}

fn decode_ip<'a>(ip: &'a [u8], view: &mut PacketView<'a>) {
    if ip.is_empty() {
        return;
    }
    match ip[0] >> 4 {
        4 => decode_ipv4(ip, view),
        6 => decode_ipv6(ip, view),
        _ => {}
    }
}

fn decode_ipv4<'a>(ip: &'a [u8], view: &mut PacketView<'a>) {
    if ip.len() < 20 {
        return;
    }
    let ihl = (ip[0] & 0x0f) as usize * 4;
    if ihl < 20 || ip.len() < ihl {
        return;
    }
    let total_len = u16::from_be_bytes([ip[2], ip[3]]) as usize;
    let frag = u16::from_be_bytes([ip[6], ip[7]]);
    let frag_offset = frag & 0x1fff;
    view.ip_version = Some(4);
    view.ttl = Some(ip[8]);
    view.src = Some(IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15])));
    view.dst = Some(IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19])));
    view.total_ip_length = total_len.max(ihl) as u32;
    // Trailing Ethernet padding is not part of the datagram.
    let end = total_len.clamp(ihl, ip.len());
    if frag_offset != 0 {
        return;
    }
    decode_transport(ip[9], &ip[ihl..end], view);
}

fn decode_ipv6<'a>(ip: &'a [u8], view: &mut PacketView<'a>) {
    if ip.len() < 40 {
        return;
    }
    let payload_len = u16::from_be_bytes([ip[4], ip[5]]) as usize;
    let mut next_header = ip[6];
    view.ip_version = Some(6);
    view.ttl = Some(ip[7]);
    let addr = |o: usize| {
        let mut b = [0u8; 16];
        b.copy_from_slice(&ip[o..o + 16]);
        IpAddr::V6(Ipv6Addr::from(b))
    };
    view.src = Some(addr(8));
    view.dst = Some(addr(24));
    view.total_ip_length = (40 + payload_len) as u32;
    let end = (40 + payload_len).min(ip.len());
    let mut offset = 40;
    // Walk extension headers until a transport protocol or something opaque.
    loop {
        match next_header {
            0 | 43 | 60 => {
                if offset + 8 > end {
                    return;
                }
                let ext_len = 8 + ip[offset + 1] as usize * 8;
                next_header = ip[offset];
                offset += ext_len;
                if offset > end {
                    return;
                }
            }
            44 => {
                if offset + 8 > end {
                    return;
                }
                let frag_offset = u16::from_be_bytes([ip[offset + 2], ip[offset + 3]]) >> 3;
                next_header = ip[offset];
                offset += 8;
                if frag_offset != 0 {
                    return;
                }
            }
            _ => break,
        }
    }
    decode_transport(next_header, &ip[offset..end], view);
}

fn decode_transport<'a>(proto: u8, seg: &'a [u8], view: &mut PacketView<'a>) {
    match proto {
        6 => decode_tcp(seg, view),
        17 => decode_udp(seg, view),
        _ => {}
    }
}

fn decode_tcp<'a>(seg: &'a [u8], view: &mut PacketView<'a>) {
    if seg.len() < 20 {
        return;
    }
    let data_offset = ((seg[12] >> 4) as usize) * 4;
    if data_offset < 20 || seg.len() < data_offset {
        return;
    }
    view.transport = Transport::Tcp;
    view.src_port = Some(u16::from_be_bytes([seg[0], seg[1]]));
    view.dst_port = Some(u16::from_be_bytes([seg[2], seg[3]]));
    view.tcp_seq = Some(u32::from_be_bytes([seg[4], seg[5], seg[6], seg[7]]));
    view.tcp_flags = Some(seg[13]);
    view.tcp_window = Some(u16::from_be_bytes([seg[14], seg[15]]));
    view.tcp_options = Some(&seg[20..data_offset]);
    view.payload = &seg[data_offset..];
}

fn decode_udp<'a>(seg: &'a [u8], view: &mut PacketView<'a>) {
    if seg.len() < 8 {
        return;
    }
    view.transport = Transport::Udp;
    view.src_port = Some(u16::from_be_bytes([seg[0], seg[1]]));
    view.dst_port = Some(u16::from_be_bytes([seg[2], seg[3]]));
    let udp_len = u16::from_be_bytes([seg[4], seg[5]]) as usize;
    let end = udp_len.clamp(8, seg.len());
    view.payload = &seg[8..end];
}

/// Builders for test and synth traffic.
pub mod build {
    use std::net::IpAddr;

    /// IPv4 header + payload. `proto` is the IP protocol number.
    pub fn ipv4(src: [u8; 4], dst: [u8; 4], proto: u8, ttl: u8, payload: &[u8]) -> Vec<u8> {
        let total = 20 + payload.len();
        let mut v = Vec::with_capacity(total);
        v.push(0x45);
        v.push(0);
        v.extend_from_slice(&(total as u16).to_be_bytes());
        v.extend_from_slice(&[0, 0]);
        v.extend_from_slice(&[0x40, 0]);
        v.push(ttl);
        v.push(proto);
        v.extend_from_slice(&[0, 0]);
        v.extend_from_slice(&src);
        v.extend_from_slice(&dst);
        let checksum = ipv4_checksum(&v[..20]);
        v[10..12].copy_from_slice(&checksum.to_be_bytes());
        v.extend_from_slice(payload);
        v
    }

    fn ipv4_checksum(header: &[u8]) -> u16 {
        let mut sum = 0u32;
        for chunk in header.chunks(2) {
            let word = u16::from_be_bytes([chunk[0], *chunk.get(1).unwrap_or(&0)]);
            sum += word as u32;
        }
        while sum >> 16 != 0 {
            sum = (sum & 0xffff) + (sum >> 16);
        }
        !(sum as u16)
    }

    /// TCP segment with options padded to a 4-byte boundary.
    #[allow(clippy::too_many_arguments)]
    pub fn tcp_segment(
        src_port: u16,
        dst_port: u16,
        seq: u32,
        ack: u32,
        flags: u8,
        window: u16,
        options: &[u8],
        payload: &[u8],
    ) -> Vec<u8> {
        let mut opts = options.to_vec();
        while opts.len() % 4 != 0 {
            opts.push(0);
        }
        let data_offset = (20 + opts.len()) / 4;
        let mut v = Vec::with_capacity(20 + opts.len() + payload.len());
        v.extend_from_slice(&src_port.to_be_bytes());
        v.extend_from_slice(&dst_port.to_be_bytes());
        v.extend_from_slice(&seq.to_be_bytes());
        v.extend_from_slice(&ack.to_be_bytes());
        v.push((data_offset as u8) << 4);
        v.push(flags);
        v.extend_from_slice(&window.to_be_bytes());
        v.extend_from_slice(&[0, 0]);
        v.extend_from_slice(&[0, 0]);
        v.extend_from_slice(&opts);
        v.extend_from_slice(payload);
        v
    }

    pub fn udp_segment(src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
        let mut v = Vec::with_capacity(8 + payload.len());
        v.extend_from_slice(&src_port.to_be_bytes());
        v.extend_from_slice(&dst_port.to_be_bytes());
        v.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
        v.extend_from_slice(&[0, 0]);
        v.extend_from_slice(payload);
        v
    }

    pub fn ethernet(ethertype: u16, payload: &[u8]) -> Vec<u8> {
        let mut v = Vec::with_capacity(14 + payload.len());
        v.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]);
        v.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]);
        v.extend_from_slice(&ethertype.to_be_bytes());
        v.extend_from_slice(payload);
        v
    }

    pub fn ipv4_octets(addr: IpAddr) -> [u8; 4] {
        match addr {
            IpAddr::V4(a) => a.octets(),
            IpAddr::V6(_) => panic!("expected an IPv4 address"),
        }
    }
}
