//! Taxation-principle menus over the polar-additive report domain, and
//! structured-submenu discovery.
//!
//! A truthful mechanism prices bundles independently of the bidder's own
//! report, so enumerating all `2^m` polar-additive reports of one bidder
//! (opponents fixed) recovers the reachable part of that price menu.
//! Observing the same bundle at two prices is a hard error: it certifies a
//! broken mechanism.

use std::collections::BTreeMap;

use num_integer::binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instances::Instance;
use crate::items::{mask_from_set, set_from_mask, ItemSet};
use crate::mechanisms::MechanismSpec;
use crate::money::{Money, Rational};
use crate::rng::{substream, Domain};
use crate::valuations::Valuation;
use crate::Result;

/// Menu extraction enumerates `2^m` reports.
pub const MENU_MAX_ITEMS: usize = 12;

/// The reachable bundle-price menu bidder `bidder` faces, with opponents'
/// valuations fixed. Bundles are bitmasks over `0..m`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Menu {
    pub bidder: usize,
    pub m: usize,
    /// Opponents' valuations in bidder order, `bidder` excluded.
    pub opponents: Vec<Valuation>,
    pub entries: BTreeMap<u32, Money>,
}

impl Menu {
    /// Lexicographically sorted bundles (as item sets).
    pub fn bundles_lex(&self) -> Vec<ItemSet> {
        let mut bundles: Vec<ItemSet> = self.entries.keys().map(|&b| set_from_mask(b)).collect();
        bundles.sort();
        bundles
    }
}

/// Enumerates every polar-additive report of `bidder` against the base
/// instance's other valuations and collects the (bundle, payment) pairs the
/// mechanism produces.
pub fn extract_menu(mechanism: &MechanismSpec, base: &Instance, bidder: usize) -> Result<Menu> {
    if bidder >= base.n {
        return Err(Error::param(format!("bidder {bidder} out of range")));
    }
    if base.m > MENU_MAX_ITEMS {
        return Err(Error::Resource(format!(
            "menu extraction enumerates 2^m reports; m = {} exceeds {MENU_MAX_ITEMS}",
            base.m
        )));
    }
    let observations: Vec<(u32, Money)> = (0u32..1 << base.m)
        .into_par_iter()
        .map(|mask| {
            let mut reported = base.clone();
            reported.valuations[bidder] = Valuation::PolarAdditive {
                flags: (0..base.m).map(|j| mask >> j & 1 == 1).collect(),
            };
            let out = mechanism.run(&reported)?;
            Ok((mask_from_set(&out.allocation[bidder]), out.payments[bidder]))
        })
        .collect::<Result<_>>()?;

    let mut entries = BTreeMap::new();
    for (bundle, price) in observations {
        match entries.entry(bundle) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(price);
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                if *e.get() != price {
                    return Err(Error::TaxationViolation {
                        bundle: set_from_mask(bundle).into_iter().collect(),
                        first: e.get().to_string(),
                        second: price.to_string(),
                    });
                }
            }
        }
    }
    let opponents = base
        .valuations
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != bidder)
        .map(|(_, v)| v.clone())
        .collect();
    Ok(Menu { bidder, m: base.m, opponents, entries })
}

/// Checks that every polar report receives a utility-maximizing entry of the
/// extracted menu (taxation-principle consistency). Exact arithmetic.
pub fn verify_taxation_consistency(
    mechanism: &MechanismSpec,
    base: &Instance,
    menu: &Menu,
) -> Result<bool> {
    for mask in 0u32..1 << base.m {
        let report = Valuation::PolarAdditive {
            flags: (0..base.m).map(|j| mask >> j & 1 == 1).collect(),
        };
        let mut reported = base.clone();
        reported.valuations[menu.bidder] = report.clone();
        let out = mechanism.run(&reported)?;
        let received = mask_from_set(&out.allocation[menu.bidder]);
        let received_utility = report.value(&set_from_mask(received))?.as_rational()
            - out.payments[menu.bidder].as_rational();
        for (&bundle, &price) in &menu.entries {
            let alt: Rational =
                report.value(&set_from_mask(bundle))?.as_rational() - price.as_rational();
            if alt > received_utility {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// An equal-cardinality, narrow-price-window submenu with the superset price
/// gap: bundles of size `cardinality`, prices in `(anchor - 1/m^5, anchor]`,
/// and every strict menu superset at least `1/m^3` more expensive.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct StructuredSubmenu {
    pub cardinality: usize,
    /// Window anchor, a multiple of `1/m^5`.
    pub anchor: Money,
    pub bundles: Vec<u32>,
}

fn window_width(m: usize) -> Money {
    Money::new(1, (m as i128).pow(5)).expect("positive")
}

fn gap(m: usize) -> Money {
    Money::new(1, (m as i128).pow(3)).expect("positive")
}

/// Smallest multiple of `1/m^5` that is at least `price`.
fn anchor_for(price: Money, m: usize) -> Money {
    let m5 = (m as i128).pow(5);
    // ceil(price * m^5) / m^5
    let scaled = price.as_rational() * Rational::from_integer(m5);
    Money::new(scaled.ceil().to_integer(), m5).expect("non-negative")
}

/// Bins menu entries by (cardinality, price window) and keeps the bins whose
/// members all satisfy the strict-superset price gap against the full menu.
/// Returned bins are sorted by size descending (ties by cardinality, then
/// anchor).
pub fn find_structured_submenus(menu: &Menu, m: usize) -> Vec<StructuredSubmenu> {
    let mut bins: BTreeMap<(usize, Money), Vec<u32>> = BTreeMap::new();
    for (&bundle, &price) in &menu.entries {
        let k = bundle.count_ones() as usize;
        bins.entry((k, anchor_for(price, m))).or_default().push(bundle);
    }
    let gap = gap(m);
    let mut out: Vec<StructuredSubmenu> = bins
        .into_iter()
        .filter(|((_, _), bundles)| {
            bundles.iter().all(|&s| {
                let ps = menu.entries[&s];
                menu.entries.iter().all(|(&t, &pt)| {
                    let strict_superset = t != s && t & s == s;
                    !strict_superset || ps + gap <= pt
                })
            })
        })
        .map(|((cardinality, anchor), bundles)| StructuredSubmenu { cardinality, anchor, bundles })
        .collect();
    out.sort_by(|a, b| {
        b.bundles
            .len()
            .cmp(&a.bundles.len())
            .then(a.cardinality.cmp(&b.cardinality))
            .then(a.anchor.cmp(&b.anchor))
    });
    out
}

/// Independent re-validation of the four defining conditions of a
/// structured submenu, written against the definition rather than the
/// binning code path.
pub fn validate_structured_submenu(menu: &Menu, sub: &StructuredSubmenu, m: usize) -> bool {
    let m5 = (m as i128).pow(5);
    // Anchor is a multiple of 1/m^5.
    let anchored = (sub.anchor.as_rational() * Rational::from_integer(m5)).is_integer();
    if !anchored {
        return false;
    }
    let width = window_width(m);
    let gap = gap(m);
    sub.bundles.iter().all(|&s| {
        // (1) reachable, i.e. a menu entry
        let Some(&price) = menu.entries.get(&s) else {
            return false;
        };
        // (2) fixed cardinality
        if s.count_ones() as usize != sub.cardinality {
            return false;
        }
        // (3) anchor - 1/m^5 < price <= anchor
        let low = sub.anchor.as_rational() - width.as_rational();
        if !(low < price.as_rational() && price <= sub.anchor) {
            return false;
        }
        // (4) strict menu supersets cost at least 1/m^3 more
        menu.entries.iter().all(|(&t, &pt)| {
            let strict_superset = t != s && t & s == s;
            !strict_superset || price + gap <= pt
        })
    })
}

/// Monte Carlo frequencies of the three tail events in the polar-additive
/// analysis; reported, never asserted (their regimes are asymptotic).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarEventStats {
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    /// Draws with `D >= (1 - 1.1 (1 - 1/n)^n) m`, where `D` counts items
    /// some bidder values at 1.
    pub event1_count: usize,
    /// Exact probability of event 1 under the binomial law of `D`.
    pub event1_exact_probability: Money,
    /// `D <= m` held on every draw (sanity; always true).
    pub d_within_range: bool,
    pub menu_trials: usize,
    /// Draws where every (mechanism, bidder) menu's lexicographically small
    /// bundles kept the drawn bidder value below the additive tail bound.
    pub event2_count: usize,
    /// Draws where every (mechanism, bidder) menu stayed below the
    /// exponential size threshold.
    pub event3_count: usize,
    pub menu_size_max: usize,
}

/// `1 - 1.1 (1 - 1/n)^n`, exact.
fn event1_fraction(n: usize) -> Rational {
    let n = n as i128;
    let decay = Rational::new((n - 1).pow(n as u32), n.pow(n as u32));
    Rational::from_integer(1) - Rational::new(11, 10) * decay
}

/// Exact `P[D >= t]` for `D ~ Binomial(m, 1 - (1 - 1/n)^n)`.
fn event1_probability(n: usize, m: usize) -> Money {
    let ni = n as i128;
    let q = Rational::from_integer(1) - Rational::new((ni - 1).pow(n as u32), ni.pow(n as u32));
    let threshold = event1_fraction(n) * Rational::from_integer(m as i128);
    let mut p = Rational::from_integer(0);
    for d in 0..=m {
        if Rational::from_integer(d as i128) >= threshold {
            p += Rational::from_integer(binomial(m as i128, d as i128))
                * q.pow(d as i32)
                * (Rational::from_integer(1) - q).pow((m - d) as i32);
        }
    }
    Money::from_rational(p).expect("probability")
}

/// The exponential menu-size threshold `e^(m/n^2) / (10 n^2)`.
pub fn menu_size_threshold(n: usize, m: usize) -> f64 {
    (m as f64 / (n * n) as f64).exp() / (10.0 * (n * n) as f64)
}

/// Samples polar draws and reports the three event frequencies. Event 1 is
/// evaluated on all `trials` draws; the menu-dependent events 2 and 3 on the
/// first `menu_trials` draws (each costs `2^m` mechanism runs per bidder and
/// mechanism). Trial `t` draws with the seed from `substream(seed, Trial, t)`.
pub fn polar_event_check(
    n: usize,
    m: usize,
    mechanisms: &[MechanismSpec],
    trials: usize,
    menu_trials: usize,
    seed: u64,
) -> Result<PolarEventStats> {
    use rand::Rng;
    if m > MENU_MAX_ITEMS {
        return Err(Error::Resource(format!("m = {m} exceeds {MENU_MAX_ITEMS}")));
    }
    let threshold = event1_fraction(n) * Rational::from_integer(m as i128);
    let size_threshold = menu_size_threshold(n, m);
    let mut event1 = 0usize;
    let mut event2 = 0usize;
    let mut event3 = 0usize;
    let mut menu_size_max = 0usize;
    let mut d_ok = true;

    for t in 0..trials.max(menu_trials) {
        let draw_seed: u64 = substream(seed, Domain::Trial, t as u64).random();
        let inst = crate::instances::gen_polar(n, m, draw_seed)?;
        if t < trials {
            let d = (0..m)
                .filter(|&j| {
                    inst.valuations
                        .iter()
                        .any(|v| matches!(v, Valuation::PolarAdditive { flags } if flags[j]))
                })
                .count();
            d_ok &= d <= m;
            if Rational::from_integer(d as i128) >= threshold {
                event1 += 1;
            }
        }
        if t < menu_trials {
            let mut all_small = true;
            let mut all_low_value = true;
            for mech in mechanisms {
                for bidder in 0..n {
                    let menu = extract_menu(mech, &inst, bidder)?;
                    menu_size_max = menu_size_max.max(menu.entries.len());
                    if menu.entries.len() as f64 > size_threshold {
                        all_small = false;
                    }
                    let lex_count = size_threshold.floor().max(0.0) as usize;
                    for bundle in menu.bundles_lex().into_iter().take(lex_count) {
                        let v = inst.valuations[bidder].value(&bundle)?.as_rational();
                        let size = bundle.len() as i128;
                        let bound_a = Rational::new(4 * size, n as i128)
                            + Rational::new(1, (m as i128).pow(2));
                        let bound_b = Rational::new(4 * m as i128, (n as i128).pow(2))
                            + Rational::new(1, (m as i128).pow(2));
                        if v > bound_a.max(bound_b) {
                            all_low_value = false;
                        }
                    }
                }
            }
            if all_small {
                event3 += 1;
            }
            if all_low_value {
                event2 += 1;
            }
        }
    }

    Ok(PolarEventStats {
        n,
        m,
        trials,
        event1_count: event1,
        event1_exact_probability: event1_probability(n, m),
        d_within_range: d_ok,
        menu_trials,
        event2_count: event2,
        event3_count: event3,
        menu_size_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{PostedPriceSpec, SinglePriceSpec};
    use crate::money::ThresholdPrice;

    fn money(n: i128, d: i128) -> Money {
        Money::new(n, d).unwrap()
    }

    fn polar_base(n: usize, m: usize, seed: u64) -> Instance {
        crate::instances::gen_polar(n, m, seed).unwrap()
    }

    #[test]
    fn posted_price_menu_is_the_price_sum() {
        let base = polar_base(2, 3, 1);
        let prices = vec![
            vec![money(1, 2), money(1, 4), money(2, 1)],
            vec![Money::ZERO; 3],
        ];
        let spec = MechanismSpec::PostedPrice(PostedPriceSpec { order: vec![0, 1], prices: prices.clone() });
        let menu = extract_menu(&spec, &base, 0).unwrap();
        for (&bundle, &price) in &menu.entries {
            let want: Money = set_from_mask(bundle)
                .iter()
                .map(|&j| prices[0][j as usize])
                .sum();
            assert_eq!(price, want);
        }
        assert!(verify_taxation_consistency(&spec, &base, &menu).unwrap());
    }

    #[test]
    fn single_price_menu_prices_are_linear_in_size() {
        let base = polar_base(3, 4, 2);
        let p = money(1, 2);
        let spec = MechanismSpec::SinglePrice(SinglePriceSpec {
            order: vec![2, 0, 1],
            prices: vec![ThresholdPrice::inclusive(p); 3],
        });
        for bidder in 0..3 {
            let menu = extract_menu(&spec, &base, bidder).unwrap();
            for (&bundle, &price) in &menu.entries {
                assert_eq!(price, p.scale(bundle.count_ones() as usize));
            }
            assert!(verify_taxation_consistency(&spec, &base, &menu).unwrap());
        }
    }

    #[test]
    fn mir_menu_matches_hand_computed_pivots() {
        use crate::shattering::AllocationFamily;
        // Range of three allocations on m = 3, n = 2.
        let alloc = |a: &[u16], b: &[u16]| {
            vec![
                a.iter().copied().collect::<ItemSet>(),
                b.iter().copied().collect::<ItemSet>(),
            ]
        };
        let range = AllocationFamily::new(
            3,
            2,
            1,
            vec![alloc(&[0, 1, 2], &[]), alloc(&[], &[0, 1, 2]), alloc(&[0], &[1, 2])],
        )
        .unwrap();
        let base = polar_base(2, 3, 3);
        let spec = MechanismSpec::Mir { range: range.clone() };
        let menu = extract_menu(&spec, &base, 0).unwrap();
        // Cross-check each observed price against a direct Clarke pivot.
        let opponent = &base.valuations[1];
        for mask in 0u32..8 {
            let report = Valuation::PolarAdditive {
                flags: (0..3).map(|j| mask >> j & 1 == 1).collect(),
            };
            let mut reported = base.clone();
            reported.valuations[0] = report.clone();
            let out = crate::mechanisms::run_mir(&range, &reported).unwrap();
            let bundle = mask_from_set(&out.allocation[0]);
            let others_best = range
                .members()
                .iter()
                .map(|mem| opponent.value(&mem[1]).unwrap())
                .max()
                .unwrap();
            let pivot = others_best
                .checked_sub(opponent.value(&out.allocation[1]).unwrap())
                .unwrap();
            assert_eq!(menu.entries[&bundle], pivot);
        }
        assert!(verify_taxation_consistency(&spec, &base, &menu).unwrap());
    }

    #[test]
    fn anchors_are_half_open_windows() {
        let m = 3; // m^5 = 243
        assert_eq!(anchor_for(Money::ZERO, m), Money::ZERO);
        assert_eq!(anchor_for(money(1, 243), m), money(1, 243));
        assert_eq!(anchor_for(money(1, 250), m), money(1, 243));
        assert_eq!(anchor_for(money(2, 1), m), money(2, 1));
    }

    #[test]
    fn submenus_bin_by_cardinality_and_window() {
        let base = polar_base(2, 3, 4);
        // Uniform per-item price 1: bundle price = size, every cardinality
        // its own bin, gaps of 1 >= 1/27 between nested sizes.
        let spec = MechanismSpec::PostedPrice(PostedPriceSpec {
            order: vec![0, 1],
            prices: vec![vec![Money::ONE; 3], vec![Money::ZERO; 3]],
        });
        let menu = extract_menu(&spec, &base, 0).unwrap();
        let subs = find_structured_submenus(&menu, 3);
        assert!(!subs.is_empty());
        for sub in &subs {
            assert!(validate_structured_submenu(&menu, sub, 3));
            for &b in &sub.bundles {
                assert_eq!(b.count_ones() as usize, sub.cardinality);
            }
        }
        // Distinct cardinalities never share a bin.
        let mut seen = std::collections::BTreeSet::new();
        for sub in &subs {
            assert!(seen.insert((sub.cardinality, sub.anchor)));
        }
    }

    #[test]
    fn empty_menu_yields_no_submenus() {
        let menu = Menu { bidder: 0, m: 3, opponents: vec![], entries: BTreeMap::new() };
        assert!(find_structured_submenus(&menu, 3).is_empty());
    }

    #[test]
    fn close_prices_share_a_bin() {
        // Two same-size bundles priced 1/m^6 apart inside one 1/m^5 window
        // (m = 3: 1/729 apart, window 1/243) land in the same bin.
        let mut entries = BTreeMap::new();
        entries.insert(0b011u32, money(728, 729));
        entries.insert(0b101u32, money(1, 1));
        let menu = Menu { bidder: 0, m: 3, opponents: vec![], entries };
        let subs = find_structured_submenus(&menu, 3);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].bundles.len(), 2);
        assert_eq!(subs[0].anchor, Money::ONE);
        assert!(validate_structured_submenu(&menu, &subs[0], 3));
    }

    #[test]
    fn gap_violation_drops_the_bin() {
        // A superset priced within 1/m^3 of a smaller bundle invalidates the
        // smaller bundle's bin but not its own.
        let mut entries = BTreeMap::new();
        entries.insert(0b001u32, money(1, 1));
        entries.insert(0b011u32, money(1, 1)); // same price as its subset
        let menu = Menu { bidder: 0, m: 3, opponents: vec![], entries };
        let subs = find_structured_submenus(&menu, 3);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].bundles, vec![0b011]);
        // And the independent validator rejects the dropped bin.
        let bad = StructuredSubmenu {
            cardinality: 1,
            anchor: money(1, 1),
            bundles: vec![0b001],
        };
        assert!(!validate_structured_submenu(&menu, &bad, 3));
    }

    #[test]
    fn event1_frequency_matches_exact_binomial() {
        let stats = polar_event_check(3, 12, &[], 10_000, 0, 99).unwrap();
        let freq = stats.event1_count as f64 / stats.trials as f64;
        let exact = stats.event1_exact_probability.to_f64();
        assert!((freq - exact).abs() <= 0.02, "freq {freq} vs exact {exact}");
        assert!(stats.d_within_range);
    }

    #[test]
    fn event3_menu_sizes_via_extraction() {
        let spec = MechanismSpec::PostedPrice(PostedPriceSpec {
            order: vec![0, 1, 2],
            prices: vec![vec![money(1, 2); 6]; 3],
        });
        let stats = polar_event_check(3, 6, &[spec], 0, 5, 7).unwrap();
        assert_eq!(stats.menu_trials, 5);
        // At this scale the exponential threshold is below 1, so event 3
        // (all menus below threshold) can only hold if menus are empty;
        // sizes are reported rather than asserted.
        assert!(stats.menu_size_max >= 1);
        assert!(stats.event3_count <= stats.menu_trials);
    }
}
