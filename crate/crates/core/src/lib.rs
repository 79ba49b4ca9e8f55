//! Shared domain types and pure functions for the brick store: write
//! timestamps, checksummed records, replica-group identifiers and the
//! suffix-routing table, quorum threshold math, and endpoint ordering.
//!
//! Everything in this crate is an immutable value or a pure function, safe
//! to use from any thread (or from the single-threaded simulator) without
//! coordination.

pub mod endpoint;
pub mod quorum;
pub mod record;
pub mod rgid;
pub mod time;

pub use endpoint::Endpoint;
pub use quorum::{quorum_thresholds, QuorumConfig, QuorumError};
pub use record::{
    canonical_bytes, decode_canonical, record_checksum, Key, Record, RecordDecodeError,
};
pub use rgid::{rgid_of_key, NoRoute, Rgid, RgidError, RgidMap, RouteView};
pub use time::Timestamp;

/// Values are plain byte strings; length limits are a property of the table
/// (record payload size), not of the type.
pub type Value = Vec<u8>;
