use std::collections::BTreeMap;
use std::sync::RwLock;

use brickstore_core::{Key, Record};

use super::{StorageBackend, StoreError};

/// In-memory storage backend with the same checksum discipline as the file
/// store. The simulator keeps one of these alive across brick "process"
/// crashes to model a disk that survives the reboot.
pub struct MemoryStore {
    payload_size: u32,
    slots: RwLock<BTreeMap<Key, StoredSlot>>,
}

struct StoredSlot {
    bytes: Vec<u8>,
    crc: u32,
}

impl MemoryStore {
    pub fn new(payload_size: u32) -> Self {
        MemoryStore {
            payload_size,
            slots: RwLock::new(BTreeMap::new()),
        }
    }

    /// Flip one bit of the stored serialization, for corruption drills.
    pub fn corrupt(&self, key: Key, bit: usize) -> bool {
        let mut slots = self.slots.write().unwrap();
        match slots.get_mut(&key) {
            Some(slot) if !slot.bytes.is_empty() => {
                let b = bit % (slot.bytes.len() * 8);
                slot.bytes[b / 8] ^= 1 << (b % 8);
                true
            }
            _ => false,
        }
    }
}

impl StorageBackend for MemoryStore {
    fn durable_put(&self, record: &Record) -> Result<(), StoreError> {
        if record.value.len() > self.payload_size as usize {
            return Err(StoreError::TooLarge {
                len: record.value.len(),
                max: self.payload_size,
            });
        }
        let mut slots = self.slots.write().unwrap();
        slots.insert(
            record.key,
            StoredSlot {
                bytes: record.canonical_bytes(),
                crc: record.checksum(),
            },
        );
        Ok(())
    }

    fn fetch(&self, key: Key) -> Result<Option<Record>, StoreError> {
        let slots = self.slots.read().unwrap();
        match slots.get(&key) {
            None => Ok(None),
            Some(slot) => {
                let (rec, _) = brickstore_core::decode_canonical(&slot.bytes, self.payload_size)
                    .map_err(|_| StoreError::Corrupt { key })?;
                if rec.checksum() != slot.crc || rec.key != key {
                    return Err(StoreError::Corrupt { key });
                }
                Ok(Some(rec))
            }
        }
    }

    fn scan(&self) -> Result<Vec<Record>, StoreError> {
        let slots = self.slots.read().unwrap();
        let mut out = Vec::with_capacity(slots.len());
        for (key, slot) in slots.iter() {
            if let Ok((rec, _)) =
                brickstore_core::decode_canonical(&slot.bytes, self.payload_size)
            {
                if rec.checksum() == slot.crc && rec.key == *key {
                    out.push(rec);
                }
            }
        }
        Ok(out)
    }

    fn payload_size(&self) -> u32 {
        self.payload_size
    }

    fn len(&self) -> usize {
        self.slots.read().unwrap().len()
    }
}

#[cfg(test)]
mod tests {
    use brickstore_core::Timestamp;

    use super::*;

    #[test]
    fn put_fetch_and_corrupt() {
        let store = MemoryStore::new(64);
        let rec = Record::new(Key(5), Timestamp::new(9, 1), b"five".to_vec());
        store.durable_put(&rec).unwrap();
        assert_eq!(store.fetch(Key(5)).unwrap().unwrap(), rec);
        assert!(store.corrupt(Key(5), 13));
        assert!(matches!(
            store.fetch(Key(5)),
            Err(StoreError::Corrupt { key: Key(5) })
        ));
        // Rewriting heals the slot.
        store.durable_put(&rec).unwrap();
        assert_eq!(store.fetch(Key(5)).unwrap().unwrap(), rec);
    }
}
