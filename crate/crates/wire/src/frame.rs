use std::io::{self, Read, Write};

use brickstore_core::{Endpoint, Key, Rgid, Timestamp};
use thiserror::Error;

/// Bytes after the length prefix that every frame carries: opcode (1) plus
/// request id (8).
pub const FRAME_HEADER_LEN: u32 = 9;

/// Cap on the declared frame length; guards against malformed prefixes.
pub const MAX_FRAME_LEN: u32 = 16 * 1024 * 1024;

mod opcode {
    pub const WRITE: u8 = 0x01;
    pub const READ_VAL: u8 = 0x02;
    pub const READ_TS: u8 = 0x03;
    pub const WRITE_REPLY: u8 = 0x81;
    pub const VAL_REPLY: u8 = 0x82;
    pub const TS_REPLY: u8 = 0x83;
    pub const RESTART_BRICK: u8 = 0x90;
    pub const CTL_ACK: u8 = 0x91;
    pub const ANNOUNCE_RGIDS: u8 = 0x92;
    pub const WITHDRAW_RGIDS: u8 = 0x93;
}

/// Outcome of a data-plane request.
///
/// `WRITE_REPLY` carries one of these for writes, and doubles as the error
/// reply when a read or ts request cannot be served (`WrongReplicaGroup`,
/// `Busy`, `IoError`); successful reads answer with `VAL_REPLY`/`TS_REPLY`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[repr(u8)]
pub enum Status {
    /// Write stored (or generic OK).
    Ok = 0,
    /// Write carried a timestamp at or below the stored one, within the
    /// clock-skew window; acknowledged without a state change.
    StaleIgnored = 1,
    /// Write older than the stored timestamp by more than the skew window.
    TimestampError = 2,
    WrongReplicaGroup = 3,
    Busy = 4,
    RecordTooLarge = 5,
    IoError = 6,
}

impl Status {
    pub fn from_byte(b: u8) -> Result<Status, WireError> {
        Ok(match b {
            0 => Status::Ok,
            1 => Status::StaleIgnored,
            2 => Status::TimestampError,
            3 => Status::WrongReplicaGroup,
            4 => Status::Busy,
            5 => Status::RecordTooLarge,
            6 => Status::IoError,
            other => return Err(WireError::UnknownStatus(other)),
        })
    }
}

/// Result of a control-channel command.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[repr(u8)]
pub enum CtlOutcome {
    Executed = 0,
    Deduped = 1,
    EscalatedToOffline = 2,
    Failed = 3,
}

impl CtlOutcome {
    pub fn from_byte(b: u8) -> Result<CtlOutcome, WireError> {
        Ok(match b {
            0 => CtlOutcome::Executed,
            1 => CtlOutcome::Deduped,
            2 => CtlOutcome::EscalatedToOffline,
            3 => CtlOutcome::Failed,
            other => return Err(WireError::UnknownStatus(other)),
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Message {
    Write {
        key: Key,
        ts: Timestamp,
        value: Vec<u8>,
    },
    ReadVal {
        key: Key,
    },
    ReadTs {
        key: Key,
    },
    WriteReply {
        status: Status,
    },
    ValReply {
        ts: Timestamp,
        value: Option<Vec<u8>>,
    },
    TsReply {
        ts: Timestamp,
    },
    RestartBrick {
        target: Endpoint,
    },
    CtlAck {
        outcome: CtlOutcome,
    },
    AnnounceRgids {
        rgids: Vec<Rgid>,
    },
    WithdrawRgids {
        rgids: Vec<Rgid>,
    },
}

impl Message {
    pub fn opcode(&self) -> u8 {
        match self {
            Message::Write { .. } => opcode::WRITE,
            Message::ReadVal { .. } => opcode::READ_VAL,
            Message::ReadTs { .. } => opcode::READ_TS,
            Message::WriteReply { .. } => opcode::WRITE_REPLY,
            Message::ValReply { .. } => opcode::VAL_REPLY,
            Message::TsReply { .. } => opcode::TS_REPLY,
            Message::RestartBrick { .. } => opcode::RESTART_BRICK,
            Message::CtlAck { .. } => opcode::CTL_ACK,
            Message::AnnounceRgids { .. } => opcode::ANNOUNCE_RGIDS,
            Message::WithdrawRgids { .. } => opcode::WITHDRAW_RGIDS,
        }
    }

    pub fn is_reply(&self) -> bool {
        self.opcode() & 0x80 != 0
    }
}

/// One framed message with its pipelining id.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frame {
    pub request_id: u64,
    pub msg: Message,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated frame: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("frame length {0} exceeds the {MAX_FRAME_LEN}-byte cap")]
    FrameTooLarge(u32),
    #[error("frame length {0} below the {FRAME_HEADER_LEN}-byte header")]
    FrameTooShort(u32),
    #[error("unknown opcode {0:#04x}")]
    UnknownOpcode(u8),
    #[error("unknown status byte {0}")]
    UnknownStatus(u8),
    #[error("payload length mismatch for opcode {opcode:#04x}: {detail}")]
    Malformed { opcode: u8, detail: &'static str },
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    opcode: u8,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::Malformed {
                opcode: self.opcode,
                detail: "payload shorter than declared fields",
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, WireError> {
        Ok(i64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn ts(&mut self) -> Result<Timestamp, WireError> {
        let wall_ms = self.i64()?;
        let coord = self.u32()?;
        Ok(Timestamp { wall_ms, coord })
    }

    fn rgid(&mut self) -> Result<Rgid, WireError> {
        let suffix = self.u32()?;
        let len = self.u8()?;
        Rgid::new(suffix, len).map_err(|_| WireError::Malformed {
            opcode: self.opcode,
            detail: "invalid rgid",
        })
    }

    /// Remaining value bytes with a declared length; the length must not
    /// exceed what the frame actually carries, so no oversized allocation
    /// can happen before the check.
    fn value(&mut self) -> Result<Vec<u8>, WireError> {
        let len = self.u32()? as usize;
        if self.buf.len() - self.pos < len {
            return Err(WireError::Malformed {
                opcode: self.opcode,
                detail: "declared value length exceeds payload",
            });
        }
        Ok(self.take(len)?.to_vec())
    }

    fn finish(self) -> Result<(), WireError> {
        if self.pos != self.buf.len() {
            return Err(WireError::Malformed {
                opcode: self.opcode,
                detail: "trailing bytes after payload",
            });
        }
        Ok(())
    }
}

fn put_ts(buf: &mut Vec<u8>, ts: Timestamp) {
    buf.extend_from_slice(&ts.wall_ms.to_be_bytes());
    buf.extend_from_slice(&ts.coord.to_be_bytes());
}

fn put_rgids(buf: &mut Vec<u8>, rgids: &[Rgid]) {
    buf.extend_from_slice(&(rgids.len() as u16).to_be_bytes());
    for r in rgids {
        buf.extend_from_slice(&r.suffix.to_be_bytes());
        buf.push(r.len);
    }
}

/// Encode one frame, length prefix included.
pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut payload = Vec::new();
    match &frame.msg {
        Message::Write { key, ts, value } => {
            payload.extend_from_slice(&key.0.to_be_bytes());
            put_ts(&mut payload, *ts);
            payload.extend_from_slice(&(value.len() as u32).to_be_bytes());
            payload.extend_from_slice(value);
        }
        Message::ReadVal { key } | Message::ReadTs { key } => {
            payload.extend_from_slice(&key.0.to_be_bytes());
        }
        Message::WriteReply { status } => payload.push(*status as u8),
        Message::ValReply { ts, value } => {
            put_ts(&mut payload, *ts);
            match value {
                Some(v) => {
                    payload.push(1);
                    payload.extend_from_slice(&(v.len() as u32).to_be_bytes());
                    payload.extend_from_slice(v);
                }
                None => payload.push(0),
            }
        }
        Message::TsReply { ts } => put_ts(&mut payload, *ts),
        Message::RestartBrick { target } => {
            payload.extend_from_slice(&target.ip.to_be_bytes());
            payload.extend_from_slice(&target.port.to_be_bytes());
        }
        Message::CtlAck { outcome } => payload.push(*outcome as u8),
        Message::AnnounceRgids { rgids } => put_rgids(&mut payload, rgids),
        Message::WithdrawRgids { rgids } => put_rgids(&mut payload, rgids),
    }

    let len = FRAME_HEADER_LEN + payload.len() as u32;
    let mut out = Vec::with_capacity(4 + len as usize);
    out.extend_from_slice(&len.to_be_bytes());
    out.push(frame.msg.opcode());
    out.extend_from_slice(&frame.request_id.to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decode one frame from the front of `buf`, returning it and the bytes
/// consumed. Never reads past the declared frame length.
pub fn decode_frame(buf: &[u8]) -> Result<(Frame, usize), WireError> {
    if buf.len() < 4 {
        return Err(WireError::Truncated {
            need: 4,
            have: buf.len(),
        });
    }
    let len = u32::from_be_bytes(buf[0..4].try_into().unwrap());
    if len > MAX_FRAME_LEN {
        return Err(WireError::FrameTooLarge(len));
    }
    if len < FRAME_HEADER_LEN {
        return Err(WireError::FrameTooShort(len));
    }
    let total = 4 + len as usize;
    if buf.len() < total {
        return Err(WireError::Truncated {
            need: total,
            have: buf.len(),
        });
    }
    let op = buf[4];
    let request_id = u64::from_be_bytes(buf[5..13].try_into().unwrap());
    let mut r = Reader {
        buf: &buf[13..total],
        pos: 0,
        opcode: op,
    };
    let msg = match op {
        opcode::WRITE => {
            let key = Key(r.u32()?);
            let ts = r.ts()?;
            let value = r.value()?;
            Message::Write { key, ts, value }
        }
        opcode::READ_VAL => Message::ReadVal { key: Key(r.u32()?) },
        opcode::READ_TS => Message::ReadTs { key: Key(r.u32()?) },
        opcode::WRITE_REPLY => Message::WriteReply {
            status: Status::from_byte(r.u8()?)?,
        },
        opcode::VAL_REPLY => {
            let ts = r.ts()?;
            let value = match r.u8()? {
                0 => None,
                1 => Some(r.value()?),
                _ => {
                    return Err(WireError::Malformed {
                        opcode: op,
                        detail: "bad present flag",
                    })
                }
            };
            Message::ValReply { ts, value }
        }
        opcode::TS_REPLY => Message::TsReply { ts: r.ts()? },
        opcode::RESTART_BRICK => {
            let ip = r.u32()?;
            let port = r.u16()?;
            Message::RestartBrick {
                target: Endpoint::new(ip, port),
            }
        }
        opcode::CTL_ACK => Message::CtlAck {
            outcome: CtlOutcome::from_byte(r.u8()?)?,
        },
        opcode::ANNOUNCE_RGIDS | opcode::WITHDRAW_RGIDS => {
            let count = r.u16()?;
            let mut rgids = Vec::with_capacity(count.min(1024) as usize);
            for _ in 0..count {
                rgids.push(r.rgid()?);
            }
            if op == opcode::ANNOUNCE_RGIDS {
                Message::AnnounceRgids { rgids }
            } else {
                Message::WithdrawRgids { rgids }
            }
        }
        other => return Err(WireError::UnknownOpcode(other)),
    };
    r.finish()?;
    Ok((Frame { request_id, msg }, total))
}

/// Blocking read of exactly one frame.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Frame> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)?;
    let len = u32::from_be_bytes(len_buf);
    if len > MAX_FRAME_LEN || len < FRAME_HEADER_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            WireError::FrameTooLarge(len).to_string(),
        ));
    }
    let mut buf = vec![0u8; 4 + len as usize];
    buf[0..4].copy_from_slice(&len_buf);
    r.read_exact(&mut buf[4..])?;
    let (frame, _) = decode_frame(&buf)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    Ok(frame)
}

/// Blocking write of one frame.
pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    w.write_all(&encode_frame(frame))
}
