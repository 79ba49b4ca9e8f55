use std::collections::HashMap;
use std::sync::RwLock;

use brickstore_core::{Key, Timestamp};

/// In-memory key → timestamp map in front of the store.
///
/// Crash-safety invariant: an entry is only ever inserted *after* the
/// corresponding record is durable, so for every key the cached timestamp is
/// never newer than the timestamp on stable storage. The cache starts empty
/// after a restart and is warmed lazily by `read_ts` misses.
#[derive(Default)]
pub struct TimestampCache {
    map: RwLock<HashMap<Key, Timestamp>>,
}

impl TimestampCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: Key) -> Option<Timestamp> {
        self.map.read().unwrap().get(&key).copied()
    }

    pub fn insert(&self, key: Key, ts: Timestamp) {
        self.map.write().unwrap().insert(key, ts);
    }

    pub fn clear(&self) {
        self.map.write().unwrap().clear();
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.read().unwrap().is_empty()
    }
}
