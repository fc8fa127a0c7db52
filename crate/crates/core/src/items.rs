//! Item sets.
//!
//! Items are `u16` indices into `0..m`. Sets are ordered `BTreeSet`s so that
//! the derived `Ord` is exactly the lexicographic order on sorted index
//! lists, which is the tie-break order used throughout the crate.

use std::collections::BTreeSet;

/// A set of item indices. `Ord` compares element sequences lexicographically.
pub type ItemSet = BTreeSet<u16>;

/// The full set `{0, .., m-1}`.
pub fn all_items(m: usize) -> ItemSet {
    (0..m as u16).collect()
}

/// Set from a `u32` bitmask over a small universe.
pub fn set_from_mask(mask: u32) -> ItemSet {
    (0..32).filter(|b| mask >> b & 1 == 1).map(|b| b as u16).collect()
}

/// Bitmask from a set; requires all indices < 32.
pub fn mask_from_set(set: &ItemSet) -> u32 {
    set.iter().fold(0u32, |acc, &j| {
        debug_assert!(j < 32);
        acc | 1 << j
    })
}

/// `a` and `b` compared by the demand tie-break: higher utility callers
/// already filtered; among equals prefer the larger set, then the
/// lexicographically smaller one. Returns true when `candidate` beats
/// `incumbent`.
pub fn prefer_larger_then_lex(candidate: &ItemSet, incumbent: &ItemSet) -> bool {
    candidate.len() > incumbent.len()
        || (candidate.len() == incumbent.len() && candidate < incumbent)
}

/// Same comparison with the cardinality preference flipped (used for
/// exclusive price thresholds, where an infinitesimal per-item surcharge
/// penalizes larger sets).
pub fn prefer_smaller_then_lex(candidate: &ItemSet, incumbent: &ItemSet) -> bool {
    candidate.len() < incumbent.len()
        || (candidate.len() == incumbent.len() && candidate < incumbent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        let s: ItemSet = [0u16, 2, 5].into_iter().collect();
        assert_eq!(set_from_mask(mask_from_set(&s)), s);
        assert_eq!(mask_from_set(&s), 0b100101);
    }

    #[test]
    fn btreeset_ord_is_lexicographic() {
        let a: ItemSet = [0u16, 2].into_iter().collect();
        let b: ItemSet = [1u16].into_iter().collect();
        // [0,2] < [1] lexicographically even though the bitmask order says otherwise.
        assert!(a < b);
    }
}
