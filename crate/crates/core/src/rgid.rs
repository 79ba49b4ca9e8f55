use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoint::Endpoint;
use crate::record::Key;

/// Replica group identifier: a suffix over a key's low-order bits.
///
/// `len` is the number of significant low-order bits (0..=32); `len == 0`
/// denotes the whole keyspace. A brick serving rgid `(1, 2)` holds every key
/// whose last two bits are `01`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Rgid {
    pub suffix: u32,
    pub len: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RgidError {
    #[error("rgid length {0} exceeds 32 bits")]
    LenTooLarge(u8),
    #[error("rgid suffix {suffix:#x} does not fit in {len} bits")]
    SuffixTooWide { suffix: u32, len: u8 },
    #[error("invalid rgid {0:?}: expected suffix/len")]
    Parse(String),
}

impl Rgid {
    pub fn new(suffix: u32, len: u8) -> Result<Self, RgidError> {
        if len > 32 {
            return Err(RgidError::LenTooLarge(len));
        }
        if len < 32 && suffix >= 1u32 << len {
            return Err(RgidError::SuffixTooWide { suffix, len });
        }
        Ok(Rgid { suffix, len })
    }

    /// The whole-keyspace group, `0/0`.
    pub const WHOLE: Rgid = Rgid { suffix: 0, len: 0 };

    pub fn matches(&self, key: Key) -> bool {
        rgid_of_key(key, self.len) == self.suffix
    }

    /// The two groups one bit longer that partition this one:
    /// `(suffix, len+1)` and `(suffix + 2^len, len+1)`.
    pub fn children(&self) -> Option<(Rgid, Rgid)> {
        if self.len >= 32 {
            return None;
        }
        let lo = Rgid {
            suffix: self.suffix,
            len: self.len + 1,
        };
        let hi = Rgid {
            suffix: self.suffix + (1u32 << self.len),
            len: self.len + 1,
        };
        Some((lo, hi))
    }

    pub fn parent(&self) -> Option<Rgid> {
        if self.len == 0 {
            return None;
        }
        let len = self.len - 1;
        Some(Rgid {
            suffix: self.suffix & mask(len),
            len,
        })
    }
}

impl fmt::Display for Rgid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.suffix, self.len)
    }
}

impl fmt::Debug for Rgid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rgid {
    type Err = RgidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (suffix, len) = s.split_once('/').ok_or_else(|| RgidError::Parse(s.into()))?;
        let suffix: u32 = suffix.trim().parse().map_err(|_| RgidError::Parse(s.into()))?;
        let len: u8 = len.trim().parse().map_err(|_| RgidError::Parse(s.into()))?;
        Rgid::new(suffix, len)
    }
}

impl TryFrom<String> for Rgid {
    type Error = RgidError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Rgid> for String {
    fn from(r: Rgid) -> String {
        r.to_string()
    }
}

fn mask(len: u8) -> u32 {
    if len >= 32 {
        u32::MAX
    } else {
        (1u32 << len) - 1
    }
}

/// The low-order `len` bits of `key`.
pub fn rgid_of_key(key: Key, len: u8) -> u32 {
    key.0 & mask(len)
}

/// One endpoint's standing inside a replica-group entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemberInfo {
    /// Receiver-clock time of the last beacon that announced this rgid.
    pub last_beacon_us: u64,
    pub last_seq: u64,
}

/// Soft-state routing table built from beacons.
///
/// Lookup is by longest matching suffix, so child groups shadow their parent
/// during a split. Two notions of presence are kept apart:
///
/// * membership — every endpoint that has announced the rgid and has not
///   withdrawn it (or been taken offline). Quorum sizes are computed over
///   membership, so a partition that hides a brick from this observer cannot
///   silently shrink the write quorum.
/// * freshness — a member whose last beacon is within the staleness bound.
///   Only fresh members are used for read sampling and restarter selection.
#[derive(Clone, Debug, Default)]
pub struct RgidMap {
    entries: BTreeMap<Rgid, BTreeMap<Endpoint, MemberInfo>>,
    /// Bumped on every membership change; lets callers wait for "map changed".
    version: u64,
}

/// Routing result for one key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteView {
    /// The longest-suffix entry that matched.
    pub rgid: Rgid,
    /// Union of the members of every matching entry in the suffix chain
    /// (sorted). During a split both the child's and the parent's bricks
    /// appear here, so writes keep covering the old quorum.
    pub members: Vec<Endpoint>,
    /// Members whose beacons are within the staleness bound and that are not
    /// locally marked unreachable.
    pub fresh: Vec<Endpoint>,
    /// Group size for quorum math: the largest member count along the
    /// matching chain. A half-announced child never yields a quorum smaller
    /// than the parent group it is splitting from.
    pub effective_n: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no route for key {key} (known groups: {known})")]
pub struct NoRoute {
    pub key: Key,
    pub known: usize,
}

impl RgidMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Record one beacon: `sender` announces exactly `rgids`. The sender is
    /// added/refreshed under each announced rgid and removed from any entry
    /// it no longer announces (each brick is the authority for its own
    /// rgids).
    pub fn observe_beacon(&mut self, sender: Endpoint, rgids: &[Rgid], seq: u64, now_us: u64) {
        let mut changed = false;
        for rgid in rgids {
            let entry = self.entries.entry(*rgid).or_default();
            let prev = entry.insert(
                sender,
                MemberInfo {
                    last_beacon_us: now_us,
                    last_seq: seq,
                },
            );
            if prev.is_none() {
                changed = true;
            }
        }
        let announced: Vec<Rgid> = rgids.to_vec();
        self.entries.retain(|rgid, members| {
            if !announced.contains(rgid) && members.remove(&sender).is_some() {
                changed = true;
            }
            !members.is_empty()
        });
        if changed {
            self.version += 1;
        }
    }

    /// Drop an endpoint from every entry (persistent-fault offlining).
    pub fn remove_endpoint(&mut self, endpoint: Endpoint) {
        let mut changed = false;
        self.entries.retain(|_, members| {
            if members.remove(&endpoint).is_some() {
                changed = true;
            }
            !members.is_empty()
        });
        if changed {
            self.version += 1;
        }
    }

    /// Longest-suffix route for `key`. `is_fresh` decides which members are
    /// usable for sampling (beacon staleness plus any caller-side
    /// reachability marks).
    pub fn lookup(
        &self,
        key: Key,
        mut is_fresh: impl FnMut(Endpoint, &MemberInfo) -> bool,
    ) -> Result<RouteView, NoRoute> {
        let mut best: Option<Rgid> = None;
        let mut chain_members: BTreeMap<Endpoint, MemberInfo> = BTreeMap::new();
        let mut effective_n = 0usize;
        for (rgid, members) in &self.entries {
            if !rgid.matches(key) {
                continue;
            }
            effective_n = effective_n.max(members.len());
            for (ep, info) in members {
                chain_members.insert(*ep, *info);
            }
            match best {
                Some(b) if rgid.len <= b.len => {}
                _ => best = Some(*rgid),
            }
        }
        let rgid = best.ok_or(NoRoute {
            key,
            known: self.entries.len(),
        })?;
        let members: Vec<Endpoint> = chain_members.keys().copied().collect();
        let fresh: Vec<Endpoint> = chain_members
            .iter()
            .filter(|(ep, info)| is_fresh(**ep, info))
            .map(|(ep, _)| *ep)
            .collect();
        Ok(RouteView {
            rgid,
            members,
            fresh,
            effective_n,
        })
    }

    /// All entries, for status displays and the split controller.
    pub fn entries(&self) -> impl Iterator<Item = (Rgid, &BTreeMap<Endpoint, MemberInfo>)> {
        self.entries.iter().map(|(r, m)| (*r, m))
    }

    pub fn members_of(&self, rgid: Rgid) -> Option<&BTreeMap<Endpoint, MemberInfo>> {
        self.entries.get(&rgid)
    }

    /// Every known endpoint with its most recent beacon time across entries.
    pub fn endpoints(&self) -> BTreeMap<Endpoint, MemberInfo> {
        let mut out: BTreeMap<Endpoint, MemberInfo> = BTreeMap::new();
        for members in self.entries.values() {
            for (ep, info) in members {
                out.entry(*ep)
                    .and_modify(|cur| {
                        if info.last_beacon_us > cur.last_beacon_us {
                            *cur = *info;
                        }
                    })
                    .or_insert(*info);
            }
        }
        out
    }
}
