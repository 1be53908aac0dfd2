//! TLS record layer reassembly of the first handshake message.

use crate::error::ChloError;

const RECORD_HANDSHAKE: u8 = 22;
const HANDSHAKE_CLIENT_HELLO: u8 = 1;
/// Records larger than the TLS plaintext ceiling are not TLS.
const MAX_RECORD_LEN: usize = (1 << 14) + 256;

/// Result of a successful extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedChlo {
    /// Handshake message body, without the 4-byte handshake header.
    pub body: Vec<u8>,
    /// Bytes of the input stream consumed through the record that completed
    /// the message; everything past this point is payload.
    pub consumed: usize,
}

/// Reassembles TLS handshake records from the start of a client byte stream
/// until one complete ClientHello is available, spanning records if needed.
///
/// The caller retries with a longer stream on [`ChloError::Incomplete`].
pub fn extract_chlo(stream: &[u8]) -> Result<ExtractedChlo, ChloError> {
    let mut handshake: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    let mut first = true;
    loop {
        if let Some(done) = try_complete(&handshake, offset)? {
            return Ok(done);
        }
        if stream.len() < offset + 5 {
            if first && !stream.is_empty() && stream[0] != RECORD_HANDSHAKE {
                return Err(ChloError::NotTls);
            }
            return Err(ChloError::Incomplete);
        }
        let rec_type = stream[offset];
        let version_major = stream[offset + 1];
        let rec_len = u16::from_be_bytes([stream[offset + 3], stream[offset + 4]]) as usize;
        if rec_type != RECORD_HANDSHAKE || (first && version_major != 3) {
            return if first { Err(ChloError::NotTls) } else { Err(ChloError::Malformed(offset)) };
        }
        if rec_len > MAX_RECORD_LEN {
            return if first { Err(ChloError::NotTls) } else { Err(ChloError::Malformed(offset)) };
        }
        if stream.len() < offset + 5 + rec_len {
            return Err(ChloError::Incomplete);
        }
        handshake.extend_from_slice(&stream[offset + 5..offset + 5 + rec_len]);
        offset += 5 + rec_len;
        first = false;
    }
}

fn try_complete(handshake: &[u8], consumed: usize) -> Result<Option<ExtractedChlo>, ChloError> {
    if handshake.len() < 4 {
        return Ok(None);
    }
    if handshake[0] != HANDSHAKE_CLIENT_HELLO {
        return Err(ChloError::NotTls);
    }
    let len = u32::from_be_bytes([0, handshake[1], handshake[2], handshake[3]]) as usize;
    if handshake.len() < 4 + len {
        return Ok(None);
    }
    Ok(Some(ExtractedChlo { body: handshake[4..4 + len].to_vec(), consumed }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tls::wrap_records;

    fn fake_chlo_handshake(body_len: usize) -> Vec<u8> {
        let mut h = vec![HANDSHAKE_CLIENT_HELLO];
        h.extend_from_slice(&(body_len as u32).to_be_bytes()[1..]);
        h.extend((0..body_len).map(|i| (i % 251) as u8));
        h
    }

    #[test]
    fn single_record_extracts() {
        let handshake = fake_chlo_handshake(100);
        let stream = wrap_records(&handshake, 0x0301, None);
        let got = extract_chlo(&stream).unwrap();
        assert_eq!(got.body, handshake[4..]);
        assert_eq!(got.consumed, stream.len());
    }

    #[test]
    fn split_records_equal_unsplit() {
        let handshake = fake_chlo_handshake(300);
        let whole = extract_chlo(&wrap_records(&handshake, 0x0301, None)).unwrap();
        let split = extract_chlo(&wrap_records(&handshake, 0x0301, Some(37))).unwrap();
        assert_eq!(whole.body, split.body);
    }

    #[test]
    fn application_data_is_not_tls() {
        let stream = [0x17, 0x03, 0x03, 0x00, 0x05, 1, 2, 3, 4, 5];
        assert_eq!(extract_chlo(&stream), Err(ChloError::NotTls));
    }

    #[test]
    fn server_hello_is_not_a_chlo() {
        let mut handshake = vec![2u8];
        handshake.extend_from_slice(&[0, 0, 4]);
        handshake.extend_from_slice(&[0; 4]);
        let stream = wrap_records(&handshake, 0x0303, None);
        assert_eq!(extract_chlo(&stream), Err(ChloError::NotTls));
    }

    #[test]
    fn partial_stream_is_incomplete() {
        let handshake = fake_chlo_handshake(200);
        let stream = wrap_records(&handshake, 0x0301, None);
        for cut in [0, 3, 5, 50, stream.len() - 1] {
            assert_eq!(
                extract_chlo(&stream[..cut]),
                Err(ChloError::Incomplete),
                "cut at {cut}"
            );
        }
        assert!(extract_chlo(&stream).is_ok());
    }

    #[test]
    fn trailing_payload_is_not_consumed() {
        let handshake = fake_chlo_handshake(64);
        let mut stream = wrap_records(&handshake, 0x0301, None);
        let consumed_expected = stream.len();
        stream.extend_from_slice(&[0x17, 0x03, 0x03, 0x00, 0x01, 0xff]);
        let got = extract_chlo(&stream).unwrap();
        assert_eq!(got.consumed, consumed_expected);
    }

    #[test]
    fn oversized_record_is_rejected() {
        let mut stream = vec![RECORD_HANDSHAKE, 0x03, 0x01];
        stream.extend_from_slice(&0x7fffu16.to_be_bytes());
        stream.extend(std::iter::repeat(0u8).take(0x7fff));
        assert_eq!(extract_chlo(&stream), Err(ChloError::NotTls));
    }
}
