use std::io;

use brickstore_core::{Key, Record};
use thiserror::Error;

mod fixed;
mod memory;

pub use fixed::FixedRecordStore;
pub use memory::MemoryStore;

#[derive(Debug, Error)]
pub enum StoreError {
    /// Stored bytes for this key fail their checksum. Callers treat the
    /// record as absent; quorum read-repair rewrites it.
    #[error("corrupt record for key {key}")]
    Corrupt { key: Key },
    #[error("value of {len} bytes exceeds record payload size {max}")]
    TooLarge { len: usize, max: u32 },
    #[error("store file is not a brick table: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Seam between the brick and its durable storage so different storage
/// schemes can be plugged in. The fixed-length record file is the default;
/// the in-memory variant backs fast simulation runs (its contents survive a
/// simulated process crash, modelling the disk).
pub trait StorageBackend: Send + Sync {
    /// Store one record. Must not return until the record is on stable
    /// storage.
    fn durable_put(&self, record: &Record) -> Result<(), StoreError>;

    /// Fetch the record for `key`, verifying its checksum.
    fn fetch(&self, key: Key) -> Result<Option<Record>, StoreError>;

    /// All readable records (corrupt slots are skipped and counted).
    fn scan(&self) -> Result<Vec<Record>, StoreError>;

    /// Fixed per-record value capacity, set at table creation.
    fn payload_size(&self) -> u32;

    /// Number of keys currently readable.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
