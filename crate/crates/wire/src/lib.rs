//! Wire formats shared by the real TCP/UDP transports and the simulated
//! transports: length-prefixed request/response frames for the brick data
//! and control channels, and the beacon datagram layout.
//!
//! Framing is a 4-byte big-endian length (counting everything after itself)
//! followed by a 1-byte opcode, an 8-byte request id, and an opcode-specific
//! payload. One bidirectional connection carries pipelined requests matched
//! to responses by request id. Codecs are pure and reentrant.

pub mod beacon;
pub mod frame;

pub use beacon::Beacon;
pub use frame::{
    decode_frame, encode_frame, read_frame, write_frame, CtlOutcome, Frame, Message, Status,
    WireError, FRAME_HEADER_LEN, MAX_FRAME_LEN,
};
