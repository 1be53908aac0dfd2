//! QUIC v1 Initial packet processing: long-header parsing, packet
//! protection removal and application (RFC 9001 §5), frame extraction,
//! and CRYPTO stream reassembly.

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use serde::{Deserialize, Serialize};

use crate::bytes::Reader;
use crate::error::QuicError;
use crate::quic::keys::{InitialKeys, QUIC_V1};
use crate::quic::varint::read_varint;

const MAX_CID_LEN: usize = 20;
const TAG_LEN: usize = 16;
const SAMPLE_LEN: usize = 16;

/// Fields taken from an Initial packet before decryption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuicHeaderFields {
    pub version: u32,
    #[serde(with = "crate::hexbytes")]
    pub dcid: Vec<u8>,
    #[serde(with = "crate::hexbytes")]
    pub scid: Vec<u8>,
    pub token_length: u64,
    /// Size of the UDP payload that carried the packet.
    pub udp_payload_size: u32,
}

struct LongHeader<'a> {
    first_byte: u8,
    version: u32,
    dcid: &'a [u8],
    scid: &'a [u8],
    token: &'a [u8],
    /// Value of the Length field: packet number bytes plus protected payload.
    length: u64,
    /// Offset of the packet number field within the packet.
    pn_offset: usize,
}

fn malformed(pos: usize) -> QuicError {
    QuicError::Malformed(pos)
}

fn parse_long_header(packet: &[u8]) -> Result<LongHeader<'_>, QuicError> {
    let mut r = Reader::new(packet);
    let first_byte = r.u8().map_err(malformed)?;
    if first_byte & 0x80 == 0 {
        return Err(QuicError::Malformed(0));
    }
    let version = r.u32().map_err(malformed)?;
    let dcid_len = r.u8().map_err(malformed)? as usize;
    if dcid_len > MAX_CID_LEN {
        return Err(malformed(r.pos() - 1));
    }
    let dcid = r.take(dcid_len).map_err(malformed)?;
    let scid_len = r.u8().map_err(malformed)? as usize;
    if scid_len > MAX_CID_LEN {
        return Err(malformed(r.pos() - 1));
    }
    let scid = r.take(scid_len).map_err(malformed)?;
    let token_len = read_varint(&mut r).map_err(malformed)?;
    let token = r.take(token_len as usize).map_err(malformed)?;
    let length = read_varint(&mut r).map_err(malformed)?;
    Ok(LongHeader {
        first_byte,
        version,
        dcid,
        scid,
        token,
        length,
        pn_offset: r.pos(),
    })
}

/// Reports whether a UDP payload starts with a QUIC v1 Initial packet.
///
/// Checks the long-header bit, the Initial packet type, and the version.
/// The fixed bit is deliberately not required: clients negotiating the
/// grease_quic_bit transport parameter may clear it.
pub fn is_quic_initial(payload: &[u8]) -> bool {
    match parse_long_header(payload) {
        Ok(h) => h.version == QUIC_V1 && h.first_byte & 0x30 == 0,
        Err(_) => false,
    }
}

/// Destination connection id of an Initial packet, read without
/// decryption, for deriving the initial keys.
pub fn initial_dcid(payload: &[u8]) -> Option<Vec<u8>> {
    if !is_quic_initial(payload) {
        return None;
    }
    parse_long_header(payload).ok().map(|h| h.dcid.to_vec())
}

/// One decrypted Initial packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialPacket {
    pub header: QuicHeaderFields,
    pub packet_number: u64,
    /// Decrypted frame bytes.
    pub payload: Vec<u8>,
    /// Bytes of the input consumed by this packet. Coalesced packets, if
    /// any, start here.
    pub consumed: usize,
}

fn aes_ecb_mask(hp: &[u8; 16], sample: &[u8]) -> [u8; 16] {
    let cipher = Aes128::new(hp.into());
    let mut block = [0u8; 16];
    block.copy_from_slice(sample);
    let mut ga = aes::cipher::generic_array::GenericArray::from(block);
    cipher.encrypt_block(&mut ga);
    ga.into()
}

fn packet_nonce(iv: &[u8; 12], packet_number: u64) -> [u8; 12] {
    let mut nonce = *iv;
    for (i, b) in packet_number.to_be_bytes().iter().enumerate() {
        nonce[4 + i] ^= b;
    }
    nonce
}

/// Removes header protection and decrypts one Initial packet taken from the
/// start of `packet`. The caller derives `keys` from the packet's DCID.
pub fn decrypt_initial(packet: &[u8], keys: &InitialKeys) -> Result<InitialPacket, QuicError> {
    let hdr = parse_long_header(packet)?;
    if hdr.first_byte & 0x30 != 0 {
        return Err(QuicError::Malformed(0));
    }
    let pn_offset = hdr.pn_offset;
    let length = hdr.length as usize;
    if hdr.length < (1 + TAG_LEN) as u64 {
        return Err(malformed(pn_offset));
    }
    let total = pn_offset
        .checked_add(length)
        .ok_or(QuicError::Malformed(pn_offset))?;
    if total > packet.len() || pn_offset + 4 + SAMPLE_LEN > packet.len() {
        return Err(QuicError::Incomplete);
    }

    let sample = &packet[pn_offset + 4..pn_offset + 4 + SAMPLE_LEN];
    let mask = aes_ecb_mask(&keys.hp, sample);
    let first = packet[0] ^ (mask[0] & 0x0f);
    let pn_len = (first & 0x03) as usize + 1;
    if length < pn_len + TAG_LEN {
        return Err(malformed(pn_offset));
    }

    let mut packet_number = 0u64;
    let mut aad = packet[..pn_offset + pn_len].to_vec();
    aad[0] = first;
    for i in 0..pn_len {
        let b = packet[pn_offset + i] ^ mask[1 + i];
        aad[pn_offset + i] = b;
        packet_number = (packet_number << 8) | b as u64;
    }

    let nonce = packet_nonce(&keys.iv, packet_number);
    let ciphertext = &packet[pn_offset + pn_len..total];
    let cipher = Aes128Gcm::new((&keys.key).into());
    let payload = cipher
        .decrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: ciphertext,
                aad: &aad,
            },
        )
        .map_err(|_| QuicError::AuthFailure)?;

    Ok(InitialPacket {
        header: QuicHeaderFields {
            version: hdr.version,
            dcid: hdr.dcid.to_vec(),
            scid: hdr.scid.to_vec(),
            token_length: hdr.token.len() as u64,
            udp_payload_size: packet.len() as u32,
        },
        packet_number,
        payload,
        consumed: total,
    })
}

/// Inputs for building a protected Initial packet.
#[derive(Debug, Clone)]
pub struct SealSpec<'a> {
    pub version: u32,
    pub dcid: &'a [u8],
    pub scid: &'a [u8],
    pub token: &'a [u8],
    pub packet_number: u64,
    /// Encoded packet number length, 1 through 4 bytes.
    pub pn_len: u8,
    /// Frame bytes to protect.
    pub payload: &'a [u8],
    /// Pad the packet with trailing PADDING frames until the sealed packet
    /// is at least this many bytes.
    pub pad_packet_to: Option<usize>,
    /// Clear the fixed bit, as clients that negotiate grease_quic_bit do.
    pub clear_fixed_bit: bool,
}

/// Builds and protects an Initial packet; the inverse of [`decrypt_initial`].
pub fn seal_initial(spec: &SealSpec, keys: &InitialKeys) -> Result<Vec<u8>, QuicError> {
    assert!(
        (1..=4).contains(&spec.pn_len),
        "packet number length must be 1 to 4 bytes"
    );
    assert!(spec.dcid.len() <= MAX_CID_LEN && spec.scid.len() <= MAX_CID_LEN);
    let pn_len = spec.pn_len as usize;

    let mut header = Vec::with_capacity(32);
    let mut first = 0xc0 | (spec.pn_len - 1);
    if spec.clear_fixed_bit {
        first &= !0x40;
    }
    header.push(first);
    header.extend_from_slice(&spec.version.to_be_bytes());
    header.push(spec.dcid.len() as u8);
    header.extend_from_slice(spec.dcid);
    header.push(spec.scid.len() as u8);
    header.extend_from_slice(spec.scid);
    crate::quic::varint::write_varint(&mut header, spec.token.len() as u64);
    header.extend_from_slice(spec.token);

    let mut plain = spec.payload.to_vec();
    // Length is always encoded on two bytes so padding does not move the
    // packet number field.
    let header_len = header.len() + 2;
    if let Some(target) = spec.pad_packet_to {
        let unpadded = header_len + pn_len + plain.len() + TAG_LEN;
        if target > unpadded {
            plain.resize(plain.len() + (target - unpadded), 0);
        }
    }
    let length = pn_len + plain.len() + TAG_LEN;
    assert!(length < 1 << 14, "packet too large for a two-byte length");
    header.extend_from_slice(&((length as u16) | 0x4000).to_be_bytes());
    let pn_offset = header.len();
    let pn_bytes = spec.packet_number.to_be_bytes();
    header.extend_from_slice(&pn_bytes[8 - pn_len..]);

    let nonce = packet_nonce(&keys.iv, spec.packet_number);
    let cipher = Aes128Gcm::new((&keys.key).into());
    let ciphertext = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: &plain,
                aad: &header,
            },
        )
        .map_err(|_| QuicError::AuthFailure)?;

    let mut out = header;
    out.extend_from_slice(&ciphertext);
    let sample_start = pn_offset + 4;
    let mask = {
        let sample = &out[sample_start..sample_start + SAMPLE_LEN];
        aes_ecb_mask(&keys.hp, sample)
    };
    out[0] ^= mask[0] & 0x0f;
    for i in 0..pn_len {
        out[pn_offset + i] ^= mask[1 + i];
    }
    Ok(out)
}

/// A CRYPTO frame's contribution to the handshake byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CryptoChunk {
    pub offset: u64,
    pub data: Vec<u8>,
}

/// Walks the frames of a decrypted Initial payload and collects CRYPTO
/// chunks. PADDING, PING, ACK, and CONNECTION_CLOSE frames are skipped;
/// any other frame type is an error since it cannot appear in an Initial.
pub fn parse_frames(payload: &[u8]) -> Result<Vec<CryptoChunk>, QuicError> {
    let mut r = Reader::new(payload);
    let mut chunks = Vec::new();
    while !r.is_empty() {
        let frame_type = read_varint(&mut r).map_err(malformed)?;
        match frame_type {
            0x00 | 0x01 => {}
            0x02 | 0x03 => {
                read_varint(&mut r).map_err(malformed)?;
                read_varint(&mut r).map_err(malformed)?;
                let range_count = read_varint(&mut r).map_err(malformed)?;
                read_varint(&mut r).map_err(malformed)?;
                for _ in 0..range_count {
                    read_varint(&mut r).map_err(malformed)?;
                    read_varint(&mut r).map_err(malformed)?;
                }
                if frame_type == 0x03 {
                    for _ in 0..3 {
                        read_varint(&mut r).map_err(malformed)?;
                    }
                }
            }
            0x06 => {
                let offset = read_varint(&mut r).map_err(malformed)?;
                let len = read_varint(&mut r).map_err(malformed)?;
                let data = r.take(len as usize).map_err(malformed)?;
                chunks.push(CryptoChunk {
                    offset,
                    data: data.to_vec(),
                });
            }
            0x1c | 0x1d => {
                read_varint(&mut r).map_err(malformed)?;
                if frame_type == 0x1c {
                    read_varint(&mut r).map_err(malformed)?;
                }
                let reason_len = read_varint(&mut r).map_err(malformed)?;
                r.take(reason_len as usize).map_err(malformed)?;
            }
            other => return Err(QuicError::UnexpectedFrame(other)),
        }
    }
    Ok(chunks)
}

/// Merges CRYPTO chunks into a contiguous stream and strips the handshake
/// header, returning the ClientHello body.
///
/// Fails with [`QuicError::Gap`] when a byte range is missing and with
/// [`QuicError::Incomplete`] when the message extends past the collected
/// data. Chunks may arrive in any order and may overlap.
pub fn reassemble_crypto(chunks: &[CryptoChunk]) -> Result<Vec<u8>, QuicError> {
    let mut sorted: Vec<&CryptoChunk> = chunks.iter().collect();
    sorted.sort_by_key(|c| c.offset);
    let mut stream: Vec<u8> = Vec::new();
    for chunk in sorted {
        let end = stream.len() as u64;
        if chunk.offset > end {
            return Err(QuicError::Gap(end));
        }
        let skip = (end - chunk.offset) as usize;
        if skip < chunk.data.len() {
            stream.extend_from_slice(&chunk.data[skip..]);
        }
    }
    if stream.is_empty() {
        return Err(QuicError::Incomplete);
    }
    if stream[0] != 1 {
        return Err(QuicError::Malformed(0));
    }
    if stream.len() < 4 {
        return Err(QuicError::Incomplete);
    }
    let body_len = u32::from_be_bytes([0, stream[1], stream[2], stream[3]]) as usize;
    if stream.len() < 4 + body_len {
        return Err(QuicError::Incomplete);
    }
    Ok(stream[4..4 + body_len].to_vec())
}

/// Like [`reassemble_crypto`] but quiet: `None` until the message is whole.
pub fn try_reassemble(chunks: &[CryptoChunk]) -> Option<Vec<u8>> {
    reassemble_crypto(chunks).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quic::keys::derive_initial_keys;

    fn fixture(name: &str) -> Vec<u8> {
        let raw = match name {
            "packet" => include_str!("../../tests/data/rfc9001_client_initial_packet.hex"),
            "payload" => include_str!("../../tests/data/rfc9001_client_initial_payload.hex"),
            _ => unreachable!(),
        };
        let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        hex::decode(compact).unwrap()
    }

    fn rfc_keys() -> InitialKeys {
        derive_initial_keys(&hex::decode("8394c8f03e515708").unwrap(), QUIC_V1).unwrap()
    }

    #[test]
    fn detects_initial_packets() {
        let packet = fixture("packet");
        assert!(is_quic_initial(&packet));

        let mut handshake_type = packet.clone();
        handshake_type[0] = (handshake_type[0] & !0x30) | 0x20;
        assert!(!is_quic_initial(&handshake_type));

        let mut wrong_version = packet.clone();
        wrong_version[1..5].copy_from_slice(&0x6b3343cfu32.to_be_bytes());
        assert!(!is_quic_initial(&wrong_version));

        let mut short_header = packet;
        short_header[0] &= 0x7f;
        assert!(!is_quic_initial(&short_header));

        assert!(!is_quic_initial(&[]));
        assert!(!is_quic_initial(&[0xc0, 0x00]));
    }

    #[test]
    fn fixed_bit_not_required() {
        let mut packet = fixture("packet");
        packet[0] &= !0x40;
        assert!(is_quic_initial(&packet));
    }

    #[test]
    fn decrypts_reference_client_initial() {
        let packet = fixture("packet");
        let frames = fixture("payload");
        let keys = rfc_keys();
        let opened = decrypt_initial(&packet, &keys).unwrap();

        assert_eq!(opened.packet_number, 2);
        assert_eq!(opened.consumed, 1200);
        assert_eq!(opened.header.version, QUIC_V1);
        assert_eq!(opened.header.dcid, hex::decode("8394c8f03e515708").unwrap());
        assert_eq!(opened.header.scid, b"");
        assert_eq!(opened.header.token_length, 0);
        assert_eq!(opened.header.udp_payload_size, 1200);

        assert_eq!(opened.payload.len(), 1162);
        assert_eq!(&opened.payload[..frames.len()], &frames[..]);
        assert!(opened.payload[frames.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn reference_crypto_payload_is_a_client_hello() {
        let packet = fixture("packet");
        let keys = rfc_keys();
        let opened = decrypt_initial(&packet, &keys).unwrap();
        let chunks = parse_frames(&opened.payload).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].offset, 0);
        assert_eq!(chunks[0].data.len(), 241);

        let body = reassemble_crypto(&chunks).unwrap();
        assert_eq!(body.len(), 237);
        let chlo = crate::tls::parse_client_hello(&body).unwrap();
        assert_eq!(chlo.ext.server_name.as_deref(), Some("example.com"));
        assert_eq!(chlo.cipher_suites, vec![0x1301, 0x1302]);
        assert!(chlo.ext.quic_transport_parameters.is_some());
    }

    #[test]
    fn seal_reproduces_reference_packet() {
        let frames = fixture("payload");
        let keys = rfc_keys();
        let sealed = seal_initial(
            &SealSpec {
                version: QUIC_V1,
                dcid: &hex::decode("8394c8f03e515708").unwrap(),
                scid: b"",
                token: b"",
                packet_number: 2,
                pn_len: 4,
                payload: &frames,
                pad_packet_to: Some(1200),
                clear_fixed_bit: false,
            },
            &keys,
        )
        .unwrap();
        assert_eq!(sealed, fixture("packet"));
    }

    #[test]
    fn seal_decrypt_round_trip() {
        let dcid = [0x11u8; 8];
        let keys = derive_initial_keys(&dcid, QUIC_V1).unwrap();
        let payload = {
            let mut v = vec![0x06, 0x00];
            crate::quic::varint::write_varint(&mut v, 5);
            v.extend_from_slice(b"hello");
            v
        };
        for pn_len in 1..=4u8 {
            let sealed = seal_initial(
                &SealSpec {
                    version: QUIC_V1,
                    dcid: &dcid,
                    scid: &[0x22; 4],
                    token: &[0x33; 3],
                    packet_number: 7,
                    pn_len,
                    payload: &payload,
                    pad_packet_to: Some(1200),
                    clear_fixed_bit: pn_len == 2,
                },
                &keys,
            )
            .unwrap();
            assert_eq!(sealed.len(), 1200);
            let opened = decrypt_initial(&sealed, &keys).unwrap();
            assert_eq!(opened.packet_number, 7);
            assert_eq!(opened.header.dcid, dcid);
            assert_eq!(opened.header.scid, vec![0x22; 4]);
            assert_eq!(opened.header.token_length, 3);
            assert_eq!(&opened.payload[..payload.len()], &payload[..]);
        }
    }

    #[test]
    fn tampering_fails_authentication() {
        let packet = {
            let mut p = fixture("packet");
            p[600] ^= 0x01;
            p
        };
        assert_eq!(
            decrypt_initial(&packet, &rfc_keys()),
            Err(QuicError::AuthFailure)
        );
    }

    #[test]
    fn wrong_keys_fail_authentication() {
        let packet = fixture("packet");
        let keys = derive_initial_keys(&[0xaa; 8], QUIC_V1).unwrap();
        assert_eq!(decrypt_initial(&packet, &keys), Err(QuicError::AuthFailure));
    }

    #[test]
    fn truncated_packet_is_incomplete() {
        let packet = fixture("packet");
        let keys = rfc_keys();
        assert_eq!(
            decrypt_initial(&packet[..800], &keys),
            Err(QuicError::Incomplete)
        );
    }

    #[test]
    fn coalesced_packet_reports_consumed() {
        let dcid = [0x42u8; 8];
        let keys = derive_initial_keys(&dcid, QUIC_V1).unwrap();
        let payload = vec![0x01, 0x00, 0x00];
        let mut sealed = seal_initial(
            &SealSpec {
                version: QUIC_V1,
                dcid: &dcid,
                scid: b"",
                token: b"",
                packet_number: 0,
                pn_len: 1,
                payload: &payload,
                pad_packet_to: None,
                clear_fixed_bit: false,
            },
            &keys,
        )
        .unwrap();
        let first_len = sealed.len();
        sealed.extend_from_slice(&[0xe0; 40]);
        let opened = decrypt_initial(&sealed, &keys).unwrap();
        assert_eq!(opened.consumed, first_len);
    }

    #[test]
    fn parses_mixed_frames() {
        let mut payload = Vec::new();
        payload.extend_from_slice(&[0x00, 0x00, 0x01]);
        payload.push(0x02);
        for v in [9u64, 0, 1, 2, 3, 1] {
            crate::quic::varint::write_varint(&mut payload, v);
        }
        payload.push(0x06);
        crate::quic::varint::write_varint(&mut payload, 10);
        crate::quic::varint::write_varint(&mut payload, 4);
        payload.extend_from_slice(b"wxyz");
        payload.push(0x1c);
        for v in [0x0au64, 0x06] {
            crate::quic::varint::write_varint(&mut payload, v);
        }
        crate::quic::varint::write_varint(&mut payload, 3);
        payload.extend_from_slice(b"bye");

        let chunks = parse_frames(&payload).unwrap();
        assert_eq!(
            chunks,
            vec![CryptoChunk {
                offset: 10,
                data: b"wxyz".to_vec()
            }]
        );
    }

    #[test]
    fn rejects_frames_not_allowed_in_initials() {
        assert_eq!(
            parse_frames(&[0x08, 0x00, 0x00]),
            Err(QuicError::UnexpectedFrame(0x08))
        );
    }

    #[test]
    fn reassembles_out_of_order_overlapping_chunks() {
        let mut message = vec![0x01, 0x00, 0x00, 0x06];
        message.extend_from_slice(b"abcdef");
        let chunks = vec![
            CryptoChunk {
                offset: 6,
                data: message[6..].to_vec(),
            },
            CryptoChunk {
                offset: 0,
                data: message[..4].to_vec(),
            },
            CryptoChunk {
                offset: 2,
                data: message[2..8].to_vec(),
            },
        ];
        assert_eq!(reassemble_crypto(&chunks).unwrap(), b"abcdef");
    }

    #[test]
    fn reassembly_reports_gaps_and_short_messages() {
        let gap = vec![CryptoChunk {
            offset: 5,
            data: vec![1, 2, 3],
        }];
        assert_eq!(reassemble_crypto(&gap), Err(QuicError::Gap(0)));

        let short = vec![CryptoChunk {
            offset: 0,
            data: vec![0x01, 0x00, 0x00, 0x09, 0xaa],
        }];
        assert_eq!(reassemble_crypto(&short), Err(QuicError::Incomplete));
        assert_eq!(try_reassemble(&short), None);

        let not_chlo = vec![CryptoChunk {
            offset: 0,
            data: vec![0x02, 0x00, 0x00, 0x00],
        }];
        assert_eq!(reassemble_crypto(&not_chlo), Err(QuicError::Malformed(0)));
    }
}
