use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Timestamp;

/// Table keys are raw 32-bit integers; the low-order bits double as the
/// partition input, so there is no hashing layer in front of them.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Debug, Default,
)]
pub struct Key(pub u32);

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A key-value-timestamp triple, the durable unit held by a brick.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Record {
    pub key: Key,
    pub ts: Timestamp,
    pub value: Vec<u8>,
}

impl Record {
    pub fn new(key: Key, ts: Timestamp, value: Vec<u8>) -> Self {
        Record { key, ts, value }
    }

    /// CRC-32 over the canonical serialization.
    pub fn checksum(&self) -> u32 {
        record_checksum(self.key, self.ts, &self.value)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_bytes(self.key, self.ts, &self.value)
    }
}

/// Size in bytes of the fixed part of a canonical record
/// (key, wall_ms, coord, value length).
pub const CANONICAL_HEADER_LEN: usize = 4 + 8 + 4 + 4;

/// Canonical record serialization, shared by the checksum, the disk slot
/// format, and the wire format:
/// key (4 BE) | ts.wall_ms (8 BE) | ts.coord (4 BE) | value len (4 BE) | value.
pub fn canonical_bytes(key: Key, ts: Timestamp, value: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(CANONICAL_HEADER_LEN + value.len());
    buf.extend_from_slice(&key.0.to_be_bytes());
    buf.extend_from_slice(&ts.wall_ms.to_be_bytes());
    buf.extend_from_slice(&ts.coord.to_be_bytes());
    buf.extend_from_slice(&(value.len() as u32).to_be_bytes());
    buf.extend_from_slice(value);
    buf
}

/// CRC-32 (IEEE polynomial) of the canonical serialization. Corruption
/// detection only; this is not a tamper guard.
pub fn record_checksum(key: Key, ts: Timestamp, value: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&key.0.to_be_bytes());
    h.update(&ts.wall_ms.to_be_bytes());
    h.update(&ts.coord.to_be_bytes());
    h.update(&(value.len() as u32).to_be_bytes());
    h.update(value);
    h.finalize()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordDecodeError {
    #[error("record truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("record value length {len} exceeds limit {limit}")]
    ValueTooLong { len: u32, limit: u32 },
}

/// Decode one canonical record from the front of `buf`, returning the record
/// and the number of bytes consumed. `max_value_len` bounds the declared
/// value length before any allocation happens.
pub fn decode_canonical(
    buf: &[u8],
    max_value_len: u32,
) -> Result<(Record, usize), RecordDecodeError> {
    if buf.len() < CANONICAL_HEADER_LEN {
        return Err(RecordDecodeError::Truncated {
            need: CANONICAL_HEADER_LEN,
            have: buf.len(),
        });
    }
    let key = Key(u32::from_be_bytes(buf[0..4].try_into().unwrap()));
    let wall_ms = i64::from_be_bytes(buf[4..12].try_into().unwrap());
    let coord = u32::from_be_bytes(buf[12..16].try_into().unwrap());
    let len = u32::from_be_bytes(buf[16..20].try_into().unwrap());
    if len > max_value_len {
        return Err(RecordDecodeError::ValueTooLong {
            len,
            limit: max_value_len,
        });
    }
    let end = CANONICAL_HEADER_LEN + len as usize;
    if buf.len() < end {
        return Err(RecordDecodeError::Truncated {
            need: end,
            have: buf.len(),
        });
    }
    let value = buf[CANONICAL_HEADER_LEN..end].to_vec();
    Ok((
        Record::new(key, Timestamp::new(wall_ms, coord), value),
        end,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Bitwise CRC-32 (reflected, IEEE polynomial), kept independent of the
    // crc32fast path it checks.
    fn crc32_reference(data: &[u8]) -> u32 {
        let mut crc: u32 = 0xFFFF_FFFF;
        for &byte in data {
            crc ^= byte as u32;
            for _ in 0..8 {
                if crc & 1 != 0 {
                    crc = (crc >> 1) ^ 0xEDB8_8320;
                } else {
                    crc >>= 1;
                }
            }
        }
        !crc
    }

    #[test]
    fn checksum_of_empty_input_is_zero() {
        assert_eq!(crc32fast::hash(&[]), 0);
        assert_eq!(crc32_reference(&[]), 0);
    }

    #[test]
    fn checksum_matches_reference_crc32() {
        let key = Key(7);
        let ts = Timestamp::new(100, 1);
        let value = b"a";
        let expected = crc32_reference(&canonical_bytes(key, ts, value));
        assert_eq!(record_checksum(key, ts, value), expected);
        // Pinned from zlib.crc32 over the same canonical bytes.
        assert_eq!(expected, 0x90d4_d8cf);
    }

    #[test]
    fn bit_flip_changes_checksum() {
        let rec = Record::new(Key(7), Timestamp::new(100, 1), b"abc".to_vec());
        let mut bytes = rec.canonical_bytes();
        let base = crc32fast::hash(&bytes);
        for i in 0..bytes.len() * 8 {
            bytes[i / 8] ^= 1 << (i % 8);
            assert_ne!(crc32fast::hash(&bytes), base, "bit {i}");
            bytes[i / 8] ^= 1 << (i % 8);
        }
    }

    #[test]
    fn canonical_round_trip() {
        let rec = Record::new(Key(0xDEAD_BEEF), Timestamp::new(-5, 42), vec![1, 2, 3, 4, 5]);
        let bytes = rec.canonical_bytes();
        let (back, used) = decode_canonical(&bytes, 1024).unwrap();
        assert_eq!(back, rec);
        assert_eq!(used, bytes.len());
    }

    #[test]
    fn decode_rejects_oversized_declared_length() {
        let mut bytes = canonical_bytes(Key(1), Timestamp::new(1, 1), &[0u8; 8]);
        bytes[16..20].copy_from_slice(&u32::MAX.to_be_bytes());
        let err = decode_canonical(&bytes, 1024).unwrap_err();
        assert!(matches!(err, RecordDecodeError::ValueTooLong { .. }));
    }

    #[test]
    fn decode_rejects_truncation() {
        let bytes = canonical_bytes(Key(1), Timestamp::new(1, 1), b"hello");
        for cut in 0..bytes.len() {
            assert!(decode_canonical(&bytes[..cut], 1024).is_err(), "cut {cut}");
        }
    }
}
