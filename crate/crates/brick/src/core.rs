use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use brickstore_core::{Key, Record, Rgid, Timestamp};
use log::warn;
use thiserror::Error;

use crate::cache::TimestampCache;
use crate::store::{StorageBackend, StoreError};

/// Steps of the write path at which a simulated crash can be injected.
/// These are exactly the points the timestamp-cache ordering argument is
/// about: the cache update strictly follows the durable write, and the reply
/// strictly follows the cache update.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CrashPoint {
    BeforeDurableWrite,
    AfterDurableWrite,
    AfterCacheUpdate,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WriteOutcome {
    /// New timestamp was more recent; record replaced durably.
    Stored,
    /// Timestamp at or below the stored one, within the skew window; the
    /// write is acknowledged but changes nothing.
    StaleIgnored,
    /// Timestamp older than the stored one by more than the skew window.
    TimestampError,
}

#[derive(Debug, Error)]
pub enum BrickError {
    #[error("value of {len} bytes exceeds record payload size {max}")]
    RecordTooLarge { len: usize, max: u32 },
    #[error("write carries the never-written sentinel timestamp")]
    BottomTimestamp,
    #[error("storage failure: {0}")]
    Io(StoreError),
    /// Only produced under injection: the brick "process" died at this
    /// point of the write path. No reply must be sent.
    #[error("simulated crash at {0:?}")]
    Crashed(CrashPoint),
}

/// Result of `read_val`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReadVal {
    pub value: Option<Vec<u8>>,
    pub ts: Timestamp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BrickMetrics {
    pub writes_stored: u64,
    pub writes_stale_ignored: u64,
    pub writes_ts_error: u64,
    pub reads_val: u64,
    pub reads_ts: u64,
    pub corrupt_detected: u64,
    pub wrong_group: u64,
}

#[derive(Default)]
struct MetricCells {
    writes_stored: AtomicU64,
    writes_stale_ignored: AtomicU64,
    writes_ts_error: AtomicU64,
    reads_val: AtomicU64,
    reads_ts: AtomicU64,
    corrupt_detected: AtomicU64,
    wrong_group: AtomicU64,
}

const STRIPES: usize = 64;

/// Protocol core of one brick: the durable store, the timestamp cache, and
/// the announced replica groups. Free of any transport or scheduling; the
/// TCP server and the simulator both drive it.
///
/// Writes to the same key are serialized by key-striped locks so the
/// compare-then-write sequence is atomic per key; reads of other keys
/// proceed concurrently and same-key reads see either the old or the new
/// record, never a torn one.
pub struct BrickCore {
    store: Arc<dyn StorageBackend>,
    cache: TimestampCache,
    announced: RwLock<BTreeSet<Rgid>>,
    delta_ts_ms: i64,
    stripes: Vec<Mutex<()>>,
    crash: Mutex<Option<CrashPoint>>,
    metrics: MetricCells,
}

impl BrickCore {
    pub fn new(store: Arc<dyn StorageBackend>, announced: &[Rgid], delta_ts_ms: i64) -> Self {
        BrickCore {
            store,
            cache: TimestampCache::new(),
            announced: RwLock::new(announced.iter().copied().collect()),
            delta_ts_ms,
            stripes: (0..STRIPES).map(|_| Mutex::new(())).collect(),
            crash: Mutex::new(None),
            metrics: MetricCells::default(),
        }
    }

    fn stripe(&self, key: Key) -> &Mutex<()> {
        &self.stripes[(key.0 as usize) % STRIPES]
    }

    /// Arm a one-shot crash injection for the next write.
    pub fn arm_crash(&self, point: CrashPoint) {
        *self.crash.lock().unwrap() = Some(point);
    }

    fn crash_check(&self, point: CrashPoint) -> Result<(), BrickError> {
        let mut armed = self.crash.lock().unwrap();
        if *armed == Some(point) {
            *armed = None;
            return Err(BrickError::Crashed(point));
        }
        Ok(())
    }

    /// Current timestamp for `key` as the write path sees it: the cache if
    /// warm, otherwise the durable record (warming the cache). A corrupt
    /// record reads as never-written so that a quorum repair can overwrite
    /// it.
    fn current_ts_locked(&self, key: Key) -> Result<Timestamp, BrickError> {
        if let Some(ts) = self.cache.get(key) {
            return Ok(ts);
        }
        let ts = match self.store.fetch(key) {
            Ok(Some(rec)) => rec.ts,
            Ok(None) => Timestamp::BOTTOM,
            Err(StoreError::Corrupt { .. }) => {
                self.metrics.corrupt_detected.fetch_add(1, Ordering::Relaxed);
                warn!("corrupt record for key {key}, treating as absent");
                Timestamp::BOTTOM
            }
            Err(e) => return Err(BrickError::Io(e)),
        };
        self.cache.insert(key, ts);
        Ok(ts)
    }

    /// The brick write: overwrite only if `ts` is more recent than the
    /// stored timestamp. The durable write strictly precedes the cache
    /// update, which strictly precedes the (caller-sent) reply.
    pub fn write(&self, key: Key, value: &[u8], ts: Timestamp) -> Result<WriteOutcome, BrickError> {
        if ts.is_bottom() {
            return Err(BrickError::BottomTimestamp);
        }
        if value.len() > self.store.payload_size() as usize {
            return Err(BrickError::RecordTooLarge {
                len: value.len(),
                max: self.store.payload_size(),
            });
        }
        let _guard = self.stripe(key).lock().unwrap();
        let cur = self.current_ts_locked(key)?;
        if ts > cur {
            self.crash_check(CrashPoint::BeforeDurableWrite)?;
            self.store
                .durable_put(&Record::new(key, ts, value.to_vec()))
                .map_err(BrickError::Io)?;
            self.crash_check(CrashPoint::AfterDurableWrite)?;
            self.cache.insert(key, ts);
            self.crash_check(CrashPoint::AfterCacheUpdate)?;
            self.metrics.writes_stored.fetch_add(1, Ordering::Relaxed);
            Ok(WriteOutcome::Stored)
        } else if cur.wall_ms - ts.wall_ms > self.delta_ts_ms {
            self.metrics.writes_ts_error.fetch_add(1, Ordering::Relaxed);
            Ok(WriteOutcome::TimestampError)
        } else {
            self.metrics
                .writes_stale_ignored
                .fetch_add(1, Ordering::Relaxed);
            Ok(WriteOutcome::StaleIgnored)
        }
    }

    /// Value-and-timestamp read. A missing key reads as
    /// `(None, BOTTOM)`; a corrupt record is logged, counted, and also reads
    /// as absent so read-repair rewrites it.
    pub fn read_val(&self, key: Key) -> Result<ReadVal, BrickError> {
        self.metrics.reads_val.fetch_add(1, Ordering::Relaxed);
        let _guard = self.stripe(key).lock().unwrap();
        match self.store.fetch(key) {
            Ok(Some(rec)) => {
                self.cache.insert(key, rec.ts);
                Ok(ReadVal {
                    value: Some(rec.value),
                    ts: rec.ts,
                })
            }
            Ok(None) => Ok(ReadVal {
                value: None,
                ts: Timestamp::BOTTOM,
            }),
            Err(StoreError::Corrupt { .. }) => {
                self.metrics.corrupt_detected.fetch_add(1, Ordering::Relaxed);
                warn!("corrupt record for key {key}, returning absent");
                self.cache.insert(key, Timestamp::BOTTOM);
                Ok(ReadVal {
                    value: None,
                    ts: Timestamp::BOTTOM,
                })
            }
            Err(e) => Err(BrickError::Io(e)),
        }
    }

    /// Timestamp-only read, served from the cache when possible. The
    /// returned timestamp is never newer than the durable one: entries are
    /// only written behind the durable write, and a restart clears the
    /// cache.
    pub fn read_ts(&self, key: Key) -> Result<Timestamp, BrickError> {
        self.metrics.reads_ts.fetch_add(1, Ordering::Relaxed);
        if let Some(ts) = self.cache.get(key) {
            return Ok(ts);
        }
        let _guard = self.stripe(key).lock().unwrap();
        self.current_ts_locked(key)
    }

    /// `Ok` iff one of the announced rgids covers the key's suffix.
    pub fn check_authority(&self, key: Key) -> bool {
        let ok = self
            .announced
            .read()
            .unwrap()
            .iter()
            .any(|r| r.matches(key));
        if !ok {
            self.metrics.wrong_group.fetch_add(1, Ordering::Relaxed);
        }
        ok
    }

    pub fn announced(&self) -> Vec<Rgid> {
        self.announced.read().unwrap().iter().copied().collect()
    }

    pub fn announce(&self, rgids: &[Rgid]) {
        let mut set = self.announced.write().unwrap();
        set.extend(rgids.iter().copied());
    }

    pub fn withdraw(&self, rgids: &[Rgid]) {
        let mut set = self.announced.write().unwrap();
        for r in rgids {
            set.remove(r);
        }
    }

    pub fn store(&self) -> &Arc<dyn StorageBackend> {
        &self.store
    }

    /// Direct cache inspection for crash-ordering tests.
    pub fn cached_ts(&self, key: Key) -> Option<Timestamp> {
        self.cache.get(key)
    }

    /// Durable timestamp as stable storage holds it right now.
    pub fn durable_ts(&self, key: Key) -> Timestamp {
        match self.store.fetch(key) {
            Ok(Some(rec)) => rec.ts,
            _ => Timestamp::BOTTOM,
        }
    }

    pub fn metrics(&self) -> BrickMetrics {
        BrickMetrics {
            writes_stored: self.metrics.writes_stored.load(Ordering::Relaxed),
            writes_stale_ignored: self.metrics.writes_stale_ignored.load(Ordering::Relaxed),
            writes_ts_error: self.metrics.writes_ts_error.load(Ordering::Relaxed),
            reads_val: self.metrics.reads_val.load(Ordering::Relaxed),
            reads_ts: self.metrics.reads_ts.load(Ordering::Relaxed),
            corrupt_detected: self.metrics.corrupt_detected.load(Ordering::Relaxed),
            wrong_group: self.metrics.wrong_group.load(Ordering::Relaxed),
        }
    }
}
