use brickstore_core::{Endpoint, Rgid};

use crate::frame::WireError;

/// Periodic liveness and metadata announcement from a brick.
///
/// Datagram layout (big-endian): sender ip u32 | sender port u16 |
/// sequence u64 | rgid count u16 | (suffix u32, len u8) per rgid |
/// sender local time i64 (ms). Sequence numbers increase per sender.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Beacon {
    pub sender: Endpoint,
    pub sequence: u64,
    pub rgids: Vec<Rgid>,
    pub sender_time_ms: i64,
}

impl Beacon {
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(24 + 5 * self.rgids.len());
        buf.extend_from_slice(&self.sender.ip.to_be_bytes());
        buf.extend_from_slice(&self.sender.port.to_be_bytes());
        buf.extend_from_slice(&self.sequence.to_be_bytes());
        buf.extend_from_slice(&(self.rgids.len() as u16).to_be_bytes());
        for r in &self.rgids {
            buf.extend_from_slice(&r.suffix.to_be_bytes());
            buf.push(r.len);
        }
        buf.extend_from_slice(&self.sender_time_ms.to_be_bytes());
        buf
    }

    pub fn decode(buf: &[u8]) -> Result<Beacon, WireError> {
        let need_fixed = 4 + 2 + 8 + 2 + 8;
        if buf.len() < need_fixed {
            return Err(WireError::Truncated {
                need: need_fixed,
                have: buf.len(),
            });
        }
        let ip = u32::from_be_bytes(buf[0..4].try_into().unwrap());
        let port = u16::from_be_bytes(buf[4..6].try_into().unwrap());
        let sequence = u64::from_be_bytes(buf[6..14].try_into().unwrap());
        let count = u16::from_be_bytes(buf[14..16].try_into().unwrap()) as usize;
        let need = 16 + count * 5 + 8;
        if buf.len() != need {
            return Err(WireError::Truncated {
                need,
                have: buf.len(),
            });
        }
        let mut rgids = Vec::with_capacity(count);
        let mut pos = 16;
        for _ in 0..count {
            let suffix = u32::from_be_bytes(buf[pos..pos + 4].try_into().unwrap());
            let len = buf[pos + 4];
            rgids.push(Rgid::new(suffix, len).map_err(|_| WireError::Malformed {
                opcode: 0,
                detail: "invalid rgid in beacon",
            })?);
            pos += 5;
        }
        let sender_time_ms = i64::from_be_bytes(buf[pos..pos + 8].try_into().unwrap());
        Ok(Beacon {
            sender: Endpoint::new(ip, port),
            sequence,
            rgids,
            sender_time_ms,
        })
    }
}
