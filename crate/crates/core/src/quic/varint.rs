//! QUIC variable-length integers (RFC 9000 §16).

use crate::bytes::Reader;

/// Decodes one varint, returning the value.
pub fn read_varint(r: &mut Reader) -> Result<u64, usize> {
    let first = r.u8()?;
    let len = 1usize << (first >> 6);
    let mut value = (first & 0x3f) as u64;
    for _ in 1..len {
        value = (value << 8) | r.u8()? as u64;
    }
    Ok(value)
}

/// Encodes a value in the minimal number of bytes. Panics above 2^62 - 1.
pub fn write_varint(out: &mut Vec<u8>, value: u64) {
    assert!(value < (1 << 62), "varint out of range: {value}");
    if value < 1 << 6 {
        out.push(value as u8);
    } else if value < 1 << 14 {
        out.extend_from_slice(&((value as u16) | 0x4000).to_be_bytes());
    } else if value < 1 << 30 {
        out.extend_from_slice(&((value as u32) | 0x8000_0000).to_be_bytes());
    } else {
        out.extend_from_slice(&(value | 0xc000_0000_0000_0000).to_be_bytes());
    }
}

pub fn varint_vec(value: u64) -> Vec<u8> {
    let mut v = Vec::with_capacity(8);
    write_varint(&mut v, value);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_encodings_decode() {
        // The four example encodings from RFC 9000 §A.1.
        let cases: [(&[u8], u64); 4] = [
            (&[0xc2, 0x19, 0x7c, 0x5e, 0xff, 0x14, 0xe8, 0x8c], 151_288_809_941_952_652),
            (&[0x9d, 0x7f, 0x3e, 0x7d], 494_878_333),
            (&[0x7b, 0xbd], 15_293),
            (&[0x25], 37),
        ];
        for (bytes, want) in cases {
            let mut r = Reader::new(bytes);
            assert_eq!(read_varint(&mut r).unwrap(), want);
            assert!(r.is_empty());
        }
    }

    #[test]
    fn round_trip_boundaries() {
        for v in [0, 1, 63, 64, 16383, 16384, (1 << 30) - 1, 1 << 30, (1 << 62) - 1] {
            let bytes = varint_vec(v);
            let mut r = Reader::new(&bytes);
            assert_eq!(read_varint(&mut r).unwrap(), v, "value {v}");
            assert!(r.is_empty());
        }
    }

    #[test]
    fn truncated_input_errors() {
        let mut r = Reader::new(&[0x80, 0x01]);
        assert!(read_varint(&mut r).is_err());
    }
}
