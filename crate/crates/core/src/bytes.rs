//! Bounds-checked cursor over a byte slice, shared by the wire-format parsers.

/// Reader over a byte slice. All take methods fail with the current offset
/// instead of panicking, so parsers stay total on arbitrary input.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], usize> {
        if self.remaining() < n {
            return Err(self.pos);
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, usize> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, usize> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u24(&mut self) -> Result<u32, usize> {
        let b = self.take(3)?;
        Ok(u32::from_be_bytes([0, b[0], b[1], b[2]]))
    }

    pub fn u32(&mut self) -> Result<u32, usize> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Sub-reader over the next `n` bytes.
    pub fn slice(&mut self, n: usize) -> Result<Reader<'a>, usize> {
        Ok(Reader::new(self.take(n)?))
    }
}

/// Append helpers for building wire messages.
pub trait PutBytes {
    fn put_u8(&mut self, v: u8);
    fn put_u16(&mut self, v: u16);
    fn put_u24(&mut self, v: u32);
    fn put_u32(&mut self, v: u32);
}

impl PutBytes for Vec<u8> {
    fn put_u8(&mut self, v: u8) {
        self.push(v);
    }
    fn put_u16(&mut self, v: u16) {
        self.extend_from_slice(&v.to_be_bytes());
    }
    fn put_u24(&mut self, v: u32) {
        self.extend_from_slice(&v.to_be_bytes()[1..]);
    }
    fn put_u32(&mut self, v: u32) {
        self.extend_from_slice(&v.to_be_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn take_past_end_reports_offset() {
        let mut r = Reader::new(&[1, 2, 3]);
        assert_eq!(r.u16().unwrap(), 0x0102);
        assert_eq!(r.u16(), Err(2));
    }

    #[test]
    fn u24_is_big_endian() {
        let mut r = Reader::new(&[0x01, 0x02, 0x03]);
        assert_eq!(r.u24().unwrap(), 0x010203);
    }

    #[test]
    fn put_round_trip() {
        let mut v = Vec::new();
        v.put_u8(7);
        v.put_u16(0x0102);
        v.put_u24(0x030405);
        v.put_u32(0x06070809);
        let mut r = Reader::new(&v);
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u16().unwrap(), 0x0102);
        assert_eq!(r.u24().unwrap(), 0x030405);
        assert_eq!(r.u32().unwrap(), 0x06070809);
        assert!(r.is_empty());
    }
}
