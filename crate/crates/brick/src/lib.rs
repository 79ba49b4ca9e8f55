//! The brick: a single-node persistent record server.
//!
//! A brick stores fixed-length checksummed records, answers
//! `write`/`read_val`/`read_ts` over the framed data channel, keeps an
//! in-memory timestamp cache that is only ever updated after the record is
//! durable, classifies requests into per-kind bounded queues, and beacons
//! its replica-group ids periodically.
//!
//! [`BrickCore`] holds all protocol semantics and runs unmodified under the
//! deterministic simulator and the threaded TCP server in [`server`].

pub mod cache;
pub mod config;
pub mod core;
pub mod queue;
pub mod server;
pub mod store;

pub use cache::TimestampCache;
pub use config::BrickConfig;
pub use core::{BrickCore, BrickError, BrickMetrics, CrashPoint, ReadVal, WriteOutcome};
pub use queue::{classify, QueueCapacities, QueueKind, WorkerCounts};
pub use store::{FixedRecordStore, MemoryStore, StorageBackend, StoreError};
