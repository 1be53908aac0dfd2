//! Classic libpcap file reader and writer.
//!
//! Handles the microsecond (0xa1b2c3d4) and nanosecond (0xa1b23c4d) magics in
//! both byte orders. pcapng is out of scope.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::PcapError;

pub const MAGIC_US: u32 = 0xa1b2_c3d4;
pub const MAGIC_NS: u32 = 0xa1b2_3c4d;

/// Packet timestamp: seconds and nanoseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct Timestamp {
    pub secs: u64,
    pub nanos: u32,
}

impl Timestamp {
    pub fn new(secs: u64, nanos: u32) -> Self {
        Timestamp { secs, nanos }
    }

    pub fn from_micros(secs: u64, micros: u32) -> Self {
        Timestamp { secs, nanos: micros * 1_000 }
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.secs as f64 + self.nanos as f64 * 1e-9
    }

    /// Seconds from `earlier` to `self`; zero if `self` precedes it.
    pub fn seconds_since(&self, earlier: Timestamp) -> f64 {
        (self.as_secs_f64() - earlier.as_secs_f64()).max(0.0)
    }

    pub fn add_secs_f64(&self, secs: f64) -> Timestamp {
        let total = self.as_secs_f64() + secs;
        let s = total.floor();
        Timestamp { secs: s as u64, nanos: ((total - s) * 1e9).round() as u32 }
    }
}

/// Link-layer framing of a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LinkType {
    Ethernet,
    RawIp,
}

impl LinkType {
    pub fn from_dlt(dlt: u32) -> Option<LinkType> {
        match dlt {
            1 => Some(LinkType::Ethernet),
            101 => Some(LinkType::RawIp),
            _ => None,
        }
    }

    pub fn dlt(&self) -> u32 {
        match self {
            LinkType::Ethernet => 1,
            LinkType::RawIp => 101,
        }
    }
}

/// One captured frame, as stored in the file.
#[derive(Debug, Clone)]
pub struct RawPacket {
    pub ts: Timestamp,
    pub data: Vec<u8>,
    /// Original wire length, which exceeds `data.len()` when the capture was truncated.
    pub orig_len: u32,
}

#[derive(Debug)]
pub struct PcapReader<R: Read> {
    src: R,
    swapped: bool,
    nanos: bool,
    link_type: Option<LinkType>,
    raw_dlt: u32,
    offset: u64,
    done: bool,
}

impl PcapReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PcapError> {
        let file = File::open(path)?;
        PcapReader::new(BufReader::with_capacity(1 << 20, file))
    }
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut src: R) -> Result<Self, PcapError> {
        let mut header = [0u8; 24];
        src.read_exact(&mut header).map_err(|_| PcapError::TruncatedHeader)?;
        let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let (swapped, nanos) = match magic {
            MAGIC_US => (false, false),
            MAGIC_NS => (false, true),
            m if m.swap_bytes() == MAGIC_US => (true, false),
            m if m.swap_bytes() == MAGIC_NS => (true, true),
            m => return Err(PcapError::BadMagic(m)),
        };
        let read_u32 = |bytes: &[u8]| {
            let v = u32::from_le_bytes(bytes.try_into().unwrap());
            if swapped {
                v.swap_bytes()
            } else {
                v
            }
        };
        let raw_dlt = read_u32(&header[20..24]);
        Ok(PcapReader {
            src,
            swapped,
            nanos,
            link_type: LinkType::from_dlt(raw_dlt),
            raw_dlt,
            offset: 24,
            done: false,
        })
    }

    /// Link type of the capture, `None` when the DLT is unsupported.
    pub fn link_type(&self) -> Option<LinkType> {
        self.link_type
    }

    pub fn raw_dlt(&self) -> u32 {
        self.raw_dlt
    }

    pub fn nanosecond_precision(&self) -> bool {
        self.nanos
    }

    fn read_record(&mut self) -> Result<Option<RawPacket>, PcapError> {
        let mut rec = [0u8; 16];
        match self.src.read(&mut rec[..1])? {
            0 => return Ok(None),
            _ => {}
        }
        self.src
            .read_exact(&mut rec[1..])
            .map_err(|_| PcapError::TruncatedRecord(self.offset))?;
        let field = |i: usize| {
            let v = u32::from_le_bytes(rec[i..i + 4].try_into().unwrap());
            if self.swapped {
                v.swap_bytes()
            } else {
                v
            }
        };
        let ts_sec = field(0);
        let ts_frac = field(4);
        let incl_len = field(8);
        let orig_len = field(12);
        let nanos = if self.nanos { ts_frac } else { ts_frac.saturating_mul(1_000) };
        let mut data = vec![0u8; incl_len as usize];
        self.src
            .read_exact(&mut data)
            .map_err(|_| PcapError::TruncatedRecord(self.offset))?;
        self.offset += 16 + incl_len as u64;
        Ok(Some(RawPacket { ts: Timestamp::new(ts_sec as u64, nanos), data, orig_len }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<RawPacket, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_record() {
            Ok(Some(pkt)) => Some(Ok(pkt)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Opens a capture and yields its packets in file order.
pub fn read_pcap(
    path: impl AsRef<Path>,
) -> Result<(Option<LinkType>, impl Iterator<Item = Result<RawPacket, PcapError>>), PcapError> {
    let reader = PcapReader::open(path)?;
    let link = reader.link_type();
    Ok((link, reader))
}

pub struct PcapWriter<W: Write> {
    dst: W,
    nanos: bool,
}

impl PcapWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, link_type: LinkType) -> Result<Self, PcapError> {
        let file = File::create(path)?;
        PcapWriter::new(BufWriter::with_capacity(1 << 20, file), link_type, false)
    }
}

impl<W: Write> PcapWriter<W> {
    /// Writes the global header. `nanos` selects the nanosecond magic.
    pub fn new(mut dst: W, link_type: LinkType, nanos: bool) -> Result<Self, PcapError> {
        let magic: u32 = if nanos { MAGIC_NS } else { MAGIC_US };
        dst.write_all(&magic.to_le_bytes())?;
        dst.write_all(&2u16.to_le_bytes())?;
        dst.write_all(&4u16.to_le_bytes())?;
        dst.write_all(&0i32.to_le_bytes())?;
        dst.write_all(&0u32.to_le_bytes())?;
        dst.write_all(&65535u32.to_le_bytes())?;
        dst.write_all(&link_type.dlt().to_le_bytes())?;
        Ok(PcapWriter { dst, nanos })
    }

    pub fn write_packet(&mut self, ts: Timestamp, data: &[u8]) -> Result<(), PcapError> {
        let frac = if self.nanos { ts.nanos } else { ts.nanos / 1_000 };
        self.dst.write_all(&(ts.secs as u32).to_le_bytes())?;
        self.dst.write_all(&frac.to_le_bytes())?;
        self.dst.write_all(&(data.len() as u32).to_le_bytes())?;
        self.dst.write_all(&(data.len() as u32).to_le_bytes())?;
        self.dst.write_all(data)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), PcapError> {
        self.dst.flush()?;
        Ok(())
    }
}
