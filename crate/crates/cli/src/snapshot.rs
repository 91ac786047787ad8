//! Curvature-bitset snapshots.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `APBS0001`                        |
//! | 8      | 8    | `N` as u64                              |
//! | 16     | 8    | payload length in bytes, `8·(⌊N/64⌋+1)` |
//! | 24     | …    | the set's u64 words, bit `n` = integer `n` |
//!
//! Bit 0 and bits above `N` are always clear.

use std::path::Path;

use apollonian::orbit::CurvatureSet;

use crate::config::{input_err, CliResult};

pub const MAGIC: &[u8; 8] = b"APBS0001";

pub fn encode(set: &CurvatureSet) -> Vec<u8> {
    let words = set.words();
    let mut out = Vec::with_capacity(24 + 8 * words.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&set.n_max().to_le_bytes());
    out.extend_from_slice(&(8 * words.len() as u64).to_le_bytes());
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> CliResult<CurvatureSet> {
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return input_err("not an APBS0001 bitset snapshot");
    }
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let n_max = u64_at(8);
    let len = u64_at(16);
    let payload = &bytes[24..];
    if len % 8 != 0 || payload.len() as u64 != len {
        return input_err(format!("snapshot payload is {} bytes, header says {len}", payload.len()));
    }
    let words = payload.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(CurvatureSet::from_words(n_max, words)?)
}

pub fn write(path: &Path, set: &CurvatureSet) -> CliResult<()> {
    Ok(std::fs::write(path, encode(set))?)
}

pub fn read(path: &Path) -> CliResult<CurvatureSet> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CurvatureSet {
        let mut s = CurvatureSet::new(130);
        for n in [1, 21, 63, 64, 65, 128, 130] {
            s.insert(n);
        }
        s
    }

    #[test]
    fn header_layout() {
        let b = encode(&sample());
        assert_eq!(&b[..8], b"APBS0001");
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 130);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 24);
        assert_eq!(b.len(), 48);
        assert_eq!(b[24], 0b10, "bit 1 is the integer 1");
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert_eq!(decode(&encode(&s)).unwrap(), s);
    }

    #[test]
    fn rejects_corruption() {
        let mut b = encode(&sample());
        assert!(decode(&b[..30]).is_err());
        b[0] = b'X';
        assert!(decode(&b).is_err());
        let mut b = encode(&sample());
        b[24 + 16] |= 0b1000;
        assert!(decode(&b).is_err(), "131 > N");
    }
}
