//! Compressed-image container: a fixed 31-byte little-endian header followed
//! by the range-coded latent payload.
//!
//! Layout: magic `AUXT` | version u8 | orig_h u16 | orig_w u16 | pad_h u16 |
//! pad_w u16 | lat_h u16 | lat_w u16 | lat_c u16 | model_hash u64 |
//! payload_len u32 | payload bytes. The model hash pins the decoder to the
//! exact checkpoint that produced the stream; a mismatch is refused rather
//! than producing garbage pixels.

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"AUXT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 31;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub orig_h: u16,
    pub orig_w: u16,
    pub pad_h: u16,
    pub pad_w: u16,
    pub lat_h: u16,
    pub lat_w: u16,
    pub lat_c: u16,
    pub model_hash: u64,
}

pub fn write_stream(header: &StreamHeader, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    for v in [
        header.orig_h,
        header.orig_w,
        header.pad_h,
        header.pad_w,
        header.lat_h,
        header.lat_w,
        header.lat_c,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&header.model_hash.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn read_stream(bytes: &[u8]) -> Result<(StreamHeader, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "stream truncated: {} bytes, need at least {HEADER_LEN}",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not a compressed stream".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!(
            "unsupported stream version {}",
            bytes[4]
        )));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let header = StreamHeader {
        orig_h: u16_at(5),
        orig_w: u16_at(7),
        pad_h: u16_at(9),
        pad_w: u16_at(11),
        lat_h: u16_at(13),
        lat_w: u16_at(15),
        lat_c: u16_at(17),
        model_hash: u64::from_le_bytes(bytes[19..27].try_into().expect("8 bytes")),
    };
    let payload_len =
        u32::from_le_bytes(bytes[27..31].try_into().expect("4 bytes")) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != payload_len {
        return Err(Error::Format(format!(
            "payload length mismatch: header says {payload_len}, stream has {}",
            payload.len()
        )));
    }
    Ok((header, payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_header() -> StreamHeader {
        StreamHeader {
            orig_h: 97,
            orig_w: 65,
            pad_h: 112,
            pad_w: 80,
            lat_h: 7,
            lat_w: 5,
            lat_c: 32,
            model_hash: 0xDEADBEEF_12345678,
        }
    }

    #[test]
    fn roundtrip_preserves_header_and_payload() {
        let payload = vec![9u8, 8, 7, 6, 5];
        let bytes = write_stream(&sample_header(), &payload);
        assert_eq!(bytes.len(), HEADER_LEN + payload.len());
        let (h, p) = read_stream(&bytes).unwrap();
        assert_eq!(h, sample_header());
        assert_eq!(p, &payload[..]);
    }

    #[test]
    fn empty_payload_roundtrips() {
        let bytes = write_stream(&sample_header(), &[]);
        assert_eq!(bytes.len(), HEADER_LEN);
        let (_, p) = read_stream(&bytes).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn header_bytes_are_frozen() {
        let bytes = write_stream(&sample_header(), &[0xAA]);
        let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(
            hex,
            "4155585401610041007000500007000500200078563412efbeadde01000000aa"
        );
    }

    #[test]
    fn corrupt_streams_are_refused() {
        let good = write_stream(&sample_header(), &[1, 2, 3]);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'B';
        assert!(matches!(read_stream(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(read_stream(&bad_version), Err(Error::Format(_))));

        let truncated = &good[..HEADER_LEN - 1];
        assert!(matches!(read_stream(truncated), Err(Error::Format(_))));

        let short_payload = &good[..good.len() - 1];
        assert!(matches!(read_stream(short_payload), Err(Error::Format(_))));

        let mut long_payload = good.clone();
        long_payload.push(0);
        assert!(matches!(read_stream(&long_payload), Err(Error::Format(_))));
    }
}
