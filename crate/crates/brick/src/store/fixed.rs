use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use brickstore_core::record::CANONICAL_HEADER_LEN;
use brickstore_core::{decode_canonical, Key, Record, Timestamp};
use log::warn;

use super::{StorageBackend, StoreError};

const MAGIC: &[u8; 4] = b"DSBR";
const VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 4;

const SLOT_FREE: u8 = 0;
const SLOT_OCCUPIED: u8 = 1;

/// Fixed-length record file.
///
/// Layout: header (magic "DSBR", version u16, record_payload_size u32, all
/// big-endian) followed by uniform slots. Each slot is a 1-byte occupancy
/// flag, the canonical record serialization, a CRC-32 (4 bytes BE) over that
/// serialization, and zero padding up to the slot size.
///
/// The key-to-slot directory lives in memory and is rebuilt by a full scan
/// when the file is opened; a record is overwritten in place on update.
/// Slots whose checksum no longer verifies are quarantined at scan time:
/// their key cannot be trusted, so they are neither indexed nor reused.
pub struct FixedRecordStore {
    file: File,
    path: PathBuf,
    payload_size: u32,
    dir: RwLock<Directory>,
}

struct Directory {
    slots: HashMap<Key, SlotInfo>,
    free: Vec<u64>,
    slot_count: u64,
    quarantined: u64,
}

#[derive(Clone, Copy)]
struct SlotInfo {
    index: u64,
    ts: Timestamp,
}

impl FixedRecordStore {
    /// Initialize a fresh table, truncating anything already at `path`.
    pub fn create(path: impl AsRef<Path>, payload_size: u32) -> Result<Self, StoreError> {
        if payload_size == 0 {
            return Err(StoreError::BadHeader("record payload size must be > 0".into()));
        }
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(path.as_ref())?;
        let mut header = Vec::with_capacity(HEADER_LEN as usize);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_be_bytes());
        header.extend_from_slice(&payload_size.to_be_bytes());
        file.write_all_at(&header, 0)?;
        file.sync_data()?;
        Ok(FixedRecordStore {
            file,
            path: path.as_ref().to_path_buf(),
            payload_size,
            dir: RwLock::new(Directory {
                slots: HashMap::new(),
                free: Vec::new(),
                slot_count: 0,
                quarantined: 0,
            }),
        })
    }

    /// Open an existing table and rebuild the directory with a full scan.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let file = OpenOptions::new().read(true).write(true).open(path.as_ref())?;
        let mut header = [0u8; HEADER_LEN as usize];
        file.read_exact_at(&mut header, 0)
            .map_err(|_| StoreError::BadHeader("file shorter than header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(StoreError::BadHeader("bad magic".into()));
        }
        let version = u16::from_be_bytes(header[4..6].try_into().unwrap());
        if version != VERSION {
            return Err(StoreError::BadHeader(format!("unsupported version {version}")));
        }
        let payload_size = u32::from_be_bytes(header[6..10].try_into().unwrap());
        if payload_size == 0 {
            return Err(StoreError::BadHeader("zero payload size".into()));
        }
        let store = FixedRecordStore {
            file,
            path: path.as_ref().to_path_buf(),
            payload_size,
            dir: RwLock::new(Directory {
                slots: HashMap::new(),
                free: Vec::new(),
                slot_count: 0,
                quarantined: 0,
            }),
        };
        store.rebuild_directory()?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn slot_size(&self) -> u64 {
        1 + CANONICAL_HEADER_LEN as u64 + self.payload_size as u64 + 4
    }

    fn slot_offset(&self, index: u64) -> u64 {
        HEADER_LEN + index * self.slot_size()
    }

    /// Byte range of the slot currently holding `key`, for corruption
    /// drills and debugging: (file offset, record-plus-crc length).
    pub fn slot_span(&self, key: Key) -> Option<(u64, u64)> {
        let dir = self.dir.read().unwrap();
        let info = dir.slots.get(&key)?;
        let rec_len = self.record_len_in_slot(info.index).ok()??;
        Some((self.slot_offset(info.index) + 1, rec_len + 4))
    }

    fn record_len_in_slot(&self, index: u64) -> Result<Option<u64>, StoreError> {
        let mut buf = vec![0u8; 1 + CANONICAL_HEADER_LEN];
        self.file.read_exact_at(&mut buf, self.slot_offset(index))?;
        if buf[0] != SLOT_OCCUPIED {
            return Ok(None);
        }
        let len = u32::from_be_bytes(buf[1 + 16..1 + 20].try_into().unwrap());
        if len > self.payload_size {
            return Ok(None);
        }
        Ok(Some(CANONICAL_HEADER_LEN as u64 + len as u64))
    }

    fn read_slot(&self, index: u64) -> Result<SlotContent, StoreError> {
        let mut buf = vec![0u8; self.slot_size() as usize];
        self.file.read_exact_at(&mut buf, self.slot_offset(index))?;
        match buf[0] {
            SLOT_FREE => Ok(SlotContent::Free),
            SLOT_OCCUPIED => {
                let body = &buf[1..];
                let (record, used) = match decode_canonical(body, self.payload_size) {
                    Ok(ok) => ok,
                    Err(_) => return Ok(SlotContent::Corrupt),
                };
                let crc = u32::from_be_bytes(body[used..used + 4].try_into().unwrap());
                if crc != record.checksum() {
                    return Ok(SlotContent::Corrupt);
                }
                Ok(SlotContent::Record(record))
            }
            _ => Ok(SlotContent::Corrupt),
        }
    }

    fn rebuild_directory(&self) -> Result<(), StoreError> {
        let file_len = self.file.metadata()?.len();
        let slot_count = if file_len <= HEADER_LEN {
            0
        } else {
            (file_len - HEADER_LEN) / self.slot_size()
        };
        let mut dir = self.dir.write().unwrap();
        dir.slots.clear();
        dir.free.clear();
        dir.slot_count = slot_count;
        dir.quarantined = 0;
        for index in 0..slot_count {
            match self.read_slot(index)? {
                SlotContent::Free => dir.free.push(index),
                SlotContent::Corrupt => {
                    dir.quarantined += 1;
                    warn!("{}: quarantining corrupt slot {index}", self.path.display());
                }
                SlotContent::Record(rec) => {
                    // Duplicate keys can only appear through outside
                    // interference; keep the newest.
                    let keep = match dir.slots.get(&rec.key) {
                        Some(existing) if existing.ts >= rec.ts => false,
                        _ => true,
                    };
                    if keep {
                        if let Some(old) = dir.slots.insert(
                            rec.key,
                            SlotInfo {
                                index,
                                ts: rec.ts,
                            },
                        ) {
                            dir.free.push(old.index);
                        }
                    } else {
                        dir.free.push(index);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn quarantined_slots(&self) -> u64 {
        self.dir.read().unwrap().quarantined
    }
}

enum SlotContent {
    Free,
    Corrupt,
    Record(Record),
}

impl StorageBackend for FixedRecordStore {
    fn durable_put(&self, record: &Record) -> Result<(), StoreError> {
        if record.value.len() > self.payload_size as usize {
            return Err(StoreError::TooLarge {
                len: record.value.len(),
                max: self.payload_size,
            });
        }
        let index = {
            let mut dir = self.dir.write().unwrap();
            match dir.slots.get(&record.key) {
                Some(info) => info.index,
                None => {
                    if let Some(free) = dir.free.pop() {
                        free
                    } else {
                        let idx = dir.slot_count;
                        dir.slot_count += 1;
                        idx
                    }
                }
            }
        };

        let mut buf = vec![0u8; self.slot_size() as usize];
        buf[0] = SLOT_OCCUPIED;
        let body = record.canonical_bytes();
        buf[1..1 + body.len()].copy_from_slice(&body);
        buf[1 + body.len()..1 + body.len() + 4].copy_from_slice(&record.checksum().to_be_bytes());
        self.file.write_all_at(&buf, self.slot_offset(index))?;
        self.file.sync_data()?;

        let mut dir = self.dir.write().unwrap();
        dir.slots.insert(
            record.key,
            SlotInfo {
                index,
                ts: record.ts,
            },
        );
        Ok(())
    }

    fn fetch(&self, key: Key) -> Result<Option<Record>, StoreError> {
        let index = {
            let dir = self.dir.read().unwrap();
            match dir.slots.get(&key) {
                Some(info) => info.index,
                None => return Ok(None),
            }
        };
        match self.read_slot(index)? {
            SlotContent::Record(rec) if rec.key == key => Ok(Some(rec)),
            SlotContent::Free => Ok(None),
            _ => Err(StoreError::Corrupt { key }),
        }
    }

    fn scan(&self) -> Result<Vec<Record>, StoreError> {
        let slot_count = self.dir.read().unwrap().slot_count;
        let mut out = Vec::new();
        for index in 0..slot_count {
            if let SlotContent::Record(rec) = self.read_slot(index)? {
                out.push(rec);
            }
        }
        Ok(out)
    }

    fn payload_size(&self) -> u32 {
        self.payload_size
    }

    fn len(&self) -> usize {
        self.dir.read().unwrap().slots.len()
    }
}

#[cfg(test)]
mod tests {
    use std::fs::OpenOptions;

    use super::*;

    fn rec(key: u32, wall: i64, value: &[u8]) -> Record {
        Record::new(Key(key), Timestamp::new(wall, 1), value.to_vec())
    }

    #[test]
    fn create_write_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.dsbr");
        let store = FixedRecordStore::create(&path, 64).unwrap();
        store.durable_put(&rec(7, 100, b"a")).unwrap();
        let got = store.fetch(Key(7)).unwrap().unwrap();
        assert_eq!(got.value, b"a");
        assert_eq!(got.ts, Timestamp::new(100, 1));
        assert_eq!(store.fetch(Key(8)).unwrap(), None);
    }

    #[test]
    fn overwrite_reuses_the_slot() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.dsbr");
        let store = FixedRecordStore::create(&path, 64).unwrap();
        store.durable_put(&rec(7, 100, b"a")).unwrap();
        let len_before = std::fs::metadata(&path).unwrap().len();
        store.durable_put(&rec(7, 101, b"bb")).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), len_before);
        assert_eq!(store.fetch(Key(7)).unwrap().unwrap().value, b"bb");
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn reopen_rebuilds_directory_by_scan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.dsbr");
        {
            let store = FixedRecordStore::create(&path, 32).unwrap();
            for k in 0..100u32 {
                store
                    .durable_put(&rec(k, 1000 + k as i64, format!("v{k}").as_bytes()))
                    .unwrap();
            }
        }
        let store = FixedRecordStore::open(&path).unwrap();
        assert_eq!(store.len(), 100);
        for k in 0..100u32 {
            let got = store.fetch(Key(k)).unwrap().unwrap();
            assert_eq!(got.value, format!("v{k}").as_bytes());
        }
        assert_eq!(store.payload_size(), 32);
    }

    #[test]
    fn flipped_bit_is_detected_as_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.dsbr");
        let store = FixedRecordStore::create(&path, 64).unwrap();
        store.durable_put(&rec(7, 100, b"payload")).unwrap();
        let (off, len) = store.slot_span(Key(7)).unwrap();

        let f = OpenOptions::new().read(true).write(true).open(&path).unwrap();
        for bit in 0..(len * 8) {
            let mut byte = [0u8; 1];
            f.read_exact_at(&mut byte, off + bit / 8).unwrap();
            byte[0] ^= 1 << (bit % 8);
            f.write_all_at(&byte, off + bit / 8).unwrap();

            match store.fetch(Key(7)) {
                Err(StoreError::Corrupt { key }) => assert_eq!(key, Key(7)),
                other => panic!("bit {bit}: expected corrupt, got {other:?}"),
            }

            byte[0] ^= 1 << (bit % 8);
            f.write_all_at(&byte, off + bit / 8).unwrap();
        }
        assert!(store.fetch(Key(7)).is_ok());
    }

    #[test]
    fn corrupt_slot_is_quarantined_on_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.dsbr");
        {
            let store = FixedRecordStore::create(&path, 64).unwrap();
            store.durable_put(&rec(1, 10, b"one")).unwrap();
            store.durable_put(&rec(2, 20, b"two")).unwrap();
            let (off, _) = store.slot_span(Key(1)).unwrap();
            let f = OpenOptions::new().write(true).read(true).open(&path).unwrap();
            let mut b = [0u8; 1];
            f.read_exact_at(&mut b, off).unwrap();
            b[0] ^= 0x40;
            f.write_all_at(&b, off).unwrap();
        }
        let store = FixedRecordStore::open(&path).unwrap();
        assert_eq!(store.quarantined_slots(), 1);
        assert_eq!(store.fetch(Key(1)).unwrap(), None, "corrupt slot key reads absent");
        assert_eq!(store.fetch(Key(2)).unwrap().unwrap().value, b"two");
        // The quarantined slot is never handed out again.
        store.durable_put(&rec(3, 30, b"three")).unwrap();
        assert_eq!(store.fetch(Key(2)).unwrap().unwrap().value, b"two");
        assert_eq!(store.fetch(Key(3)).unwrap().unwrap().value, b"three");
    }

    #[test]
    fn too_large_value_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixedRecordStore::create(dir.path().join("t.dsbr"), 8).unwrap();
        let err = store.durable_put(&rec(1, 1, &[0u8; 9])).unwrap_err();
        assert!(matches!(err, StoreError::TooLarge { len: 9, max: 8 }));
    }

    #[test]
    fn open_rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus");
        std::fs::write(&path, b"NOPE000000").unwrap();
        assert!(matches!(
            FixedRecordStore::open(&path),
            Err(StoreError::BadHeader(_))
        ));
    }
}
