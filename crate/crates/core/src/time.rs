use std::fmt;

use serde::{Deserialize, Serialize};

/// A write timestamp: wall-clock milliseconds since the Unix epoch plus the
/// identity of the coordinator that generated it.
///
/// The total order is lexicographic on `(wall_ms, coord)`, so two writes in
/// the same millisecond from different coordinators still resolve
/// deterministically. `Timestamp::BOTTOM` is the distinguished "never
/// written" sentinel and sorts below every timestamp a coordinator can
/// generate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub wall_ms: i64,
    pub coord: u32,
}

impl Timestamp {
    /// "Never written". Compares strictly less than every real timestamp
    /// and is never stored on disk.
    pub const BOTTOM: Timestamp = Timestamp {
        wall_ms: i64::MIN,
        coord: 0,
    };

    pub fn new(wall_ms: i64, coord: u32) -> Self {
        Timestamp { wall_ms, coord }
    }

    pub fn is_bottom(&self) -> bool {
        *self == Self::BOTTOM
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_bottom() {
            write!(f, "bottom")
        } else {
            write!(f, "{}.{}", self.wall_ms, self.coord)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_lexicographic() {
        assert_eq!(
            Timestamp::new(100, 1).cmp(&Timestamp::new(100, 1)),
            std::cmp::Ordering::Equal
        );
        assert_eq!(
            Timestamp::new(100, 1).cmp(&Timestamp::new(100, 2)),
            std::cmp::Ordering::Less
        );
        assert!(Timestamp::new(99, 9) < Timestamp::new(100, 0));
    }

    #[test]
    fn bottom_is_minimal() {
        assert!(Timestamp::BOTTOM < Timestamp::new(0, 0));
        assert!(Timestamp::BOTTOM < Timestamp::new(i64::MIN + 1, 0));
        assert!(Timestamp::BOTTOM.is_bottom());
        assert!(!Timestamp::new(0, 0).is_bottom());
    }
}
