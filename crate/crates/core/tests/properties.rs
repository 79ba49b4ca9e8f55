use std::cmp::Ordering;

use brickstore_core::{
    decode_canonical, quorum_thresholds, rgid_of_key, Endpoint, Key, Record, Rgid, RgidMap,
    Timestamp,
};
use proptest::prelude::*;

fn arb_timestamp() -> impl Strategy<Value = Timestamp> {
    prop_oneof![
        1 => Just(Timestamp::BOTTOM),
        8 => (any::<i64>(), any::<u32>()).prop_map(|(w, c)| Timestamp::new(w.max(i64::MIN + 1), c)),
    ]
}

proptest! {
    // Total order over timestamps, BOTTOM included.
    #[test]
    fn timestamp_order_is_total(a in arb_timestamp(), b in arb_timestamp(), c in arb_timestamp()) {
        // antisymmetry
        if a <= b && b <= a {
            prop_assert_eq!(a, b);
        }
        // transitivity
        if a <= b && b <= c {
            prop_assert!(a <= c);
        }
        // totality
        prop_assert!(matches!(a.cmp(&b), Ordering::Less | Ordering::Equal | Ordering::Greater));
        prop_assert!(a <= b || b <= a);
        prop_assert!(Timestamp::BOTTOM <= a);
    }

    #[test]
    fn quorum_thresholds_always_intersect(n in 1usize..=64) {
        let q = quorum_thresholds(n).unwrap();
        prop_assert!(q.wt + q.rt > n);
    }

    // Lookup returns an entry whose suffix actually matches the key, and a
    // child entry wins over its parent whenever both match.
    #[test]
    fn rgid_lookup_matches_and_prefers_children(
        key in any::<u32>(),
        parent_len in 0u8..4,
        seed in any::<u32>(),
    ) {
        let key = Key(key);
        let parent = Rgid::new(rgid_of_key(key, parent_len), parent_len).unwrap();
        let (lo, hi) = parent.children().unwrap();
        let child = if lo.matches(key) { lo } else { hi };
        let other = if lo.matches(key) { hi } else { lo };

        let mut map = RgidMap::new();
        map.observe_beacon(Endpoint::new(1, 1), &[parent], 1, 0);
        map.observe_beacon(Endpoint::new(2, 1), &[other], 1, 0);
        let route = map.lookup(key, |_, _| true).unwrap();
        prop_assert_eq!(route.rgid, parent);
        prop_assert_eq!(rgid_of_key(key, route.rgid.len), route.rgid.suffix);

        // Add the matching child; it must now shadow the parent.
        map.observe_beacon(Endpoint::new(3, seed as u16 | 1), &[child], 1, 0);
        let route = map.lookup(key, |_, _| true).unwrap();
        prop_assert_eq!(route.rgid, child);
        prop_assert_eq!(rgid_of_key(key, route.rgid.len), route.rgid.suffix);
    }

    // Checksums verify across a serialize -> deserialize round trip.
    #[test]
    fn checksum_survives_round_trip(
        key in any::<u32>(),
        wall in (i64::MIN + 1)..i64::MAX,
        coord in any::<u32>(),
        value in proptest::collection::vec(any::<u8>(), 0..256),
    ) {
        let rec = Record::new(Key(key), Timestamp::new(wall, coord), value);
        let sum = rec.checksum();
        let bytes = rec.canonical_bytes();
        let (back, _) = decode_canonical(&bytes, 256).unwrap();
        prop_assert_eq!(back.checksum(), sum);
        prop_assert_eq!(back, rec);
    }
}
