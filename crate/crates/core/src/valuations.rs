//! Valuation classes, exact value queries, and demand responses.
//!
//! A [`Valuation`] maps item sets to exact non-negative rationals. The
//! [`demand`] oracle returns the utility-maximizing bundle at given prices,
//! with a fixed tie-break: among maximizers prefer the larger set, then the
//! lexicographically smallest. Buying at a price equal to value is therefore
//! always preferred to abstaining.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::items::{self, ItemSet};
use crate::money::{Money, Rational, ThresholdPrice};
use crate::Result;

/// A bidder's valuation over subsets of `m` items.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Valuation {
    /// Per-item values, value of a set is the sum.
    Additive { values: Vec<Money> },
    /// Worth `value` on any superset of `interest`, zero otherwise.
    SingleMinded { m: usize, interest: ItemSet, value: Money },
    /// Additive capped at `budget`.
    CappedAdditive { values: Vec<Money>, budget: Money },
    /// Explicit table indexed by bitmask; `table.len() == 2^m`, m <= 16.
    Explicit { table: Vec<Money> },
    /// Additive with per-item value 1 (flag set) or 1/m^3 (flag clear).
    #[serde(rename = "polar")]
    PolarAdditive { flags: Vec<bool> },
}

/// Valuation classes checkable by full enumeration.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ValuationClass {
    Monotone,
    Additive,
    Subadditive,
    Submodular,
}

pub const EXPLICIT_MAX_ITEMS: usize = 16;

impl Valuation {
    /// Number of items the valuation is defined over.
    pub fn num_items(&self) -> usize {
        match self {
            Valuation::Additive { values } => values.len(),
            Valuation::SingleMinded { m, .. } => *m,
            Valuation::CappedAdditive { values, .. } => values.len(),
            Valuation::Explicit { table } => table.len().trailing_zeros() as usize,
            Valuation::PolarAdditive { flags } => flags.len(),
        }
    }

    /// Builds an explicit valuation, validating shape, `v(∅) = 0`, and
    /// monotonicity.
    pub fn explicit(table: Vec<Money>) -> Result<Valuation> {
        if !table.len().is_power_of_two() {
            return Err(Error::param(format!(
                "explicit table length {} is not a power of two",
                table.len()
            )));
        }
        let m = table.len().trailing_zeros() as usize;
        if m > EXPLICIT_MAX_ITEMS {
            return Err(Error::param(format!("explicit valuation over {m} items exceeds {EXPLICIT_MAX_ITEMS}")));
        }
        if !table[0].is_zero() {
            return Err(Error::param("explicit table must have v(empty) = 0"));
        }
        for mask in 0..table.len() {
            for j in 0..m {
                if mask >> j & 1 == 0 && table[mask] > table[mask | 1 << j] {
                    return Err(Error::param(format!(
                        "explicit table not monotone at mask {mask:#b}, item {j}"
                    )));
                }
            }
        }
        Ok(Valuation::Explicit { table })
    }

    /// The per-item value a `PolarAdditive` flag encodes: 1 or 1/m^3.
    pub fn polar_item_value(m: usize, flag: bool) -> Money {
        if flag {
            Money::ONE
        } else {
            Money::new(1, (m as i128).pow(3)).expect("positive cube")
        }
    }

    fn check_items(&self, set: &ItemSet) -> Result<()> {
        let m = self.num_items();
        if let Some(&j) = set.iter().next_back() {
            if j as usize >= m {
                return Err(Error::ItemOutOfRange { index: j as usize, m });
            }
        }
        Ok(())
    }

    /// Exact value of `set`.
    pub fn value(&self, set: &ItemSet) -> Result<Money> {
        self.check_items(set)?;
        Ok(match self {
            Valuation::Additive { values } => set.iter().map(|&j| values[j as usize]).sum(),
            Valuation::SingleMinded { interest, value, .. } => {
                if interest.is_subset(set) {
                    *value
                } else {
                    Money::ZERO
                }
            }
            Valuation::CappedAdditive { values, budget } => {
                let sum: Money = set.iter().map(|&j| values[j as usize]).sum();
                sum.min(*budget)
            }
            Valuation::Explicit { table } => table[items::mask_from_set(set) as usize],
            Valuation::PolarAdditive { flags } => {
                let m = flags.len();
                set.iter()
                    .map(|&j| Self::polar_item_value(m, flags[j as usize]))
                    .sum()
            }
        })
    }

    /// Per-item value `v({j})`.
    pub fn item_value(&self, j: usize) -> Result<Money> {
        self.value(&ItemSet::from([j as u16]))
    }

    /// Whether set values decompose as sums of per-item values.
    pub fn is_additive_form(&self) -> bool {
        matches!(self, Valuation::Additive { .. } | Valuation::PolarAdditive { .. })
    }
}

/// Quasi-linear utility `v(set) - sum of prices`, as a signed rational.
pub fn utility(v: &Valuation, prices: &[Money], set: &ItemSet) -> Result<Rational> {
    let val = v.value(set)?;
    let paid: Money = set.iter().map(|&j| prices[j as usize]).sum();
    Ok(val.as_rational() - paid.as_rational())
}

/// Utility-maximizing bundle within `available` at per-item `prices`.
///
/// Tie-break: among maximizers, the larger set, then the lexicographically
/// smallest. Additive forms use the per-item closed form; everything else
/// enumerates subsets of `available` (kept feasible by the 16-item bound on
/// explicit tables and small instances elsewhere).
pub fn demand(v: &Valuation, prices: &[Money], available: &ItemSet) -> Result<ItemSet> {
    if prices.len() != v.num_items() {
        return Err(Error::param(format!(
            "price vector length {} does not match m = {}",
            prices.len(),
            v.num_items()
        )));
    }
    v.check_items(available)?;
    if v.is_additive_form() {
        // Buy every item worth at least its price: each such item weakly
        // raises utility and strictly grows the set.
        return Ok(available
            .iter()
            .copied()
            .filter(|&j| v.item_value(j as usize).unwrap() >= prices[j as usize])
            .collect());
    }
    demand_brute_force(v, prices, available)
}

/// Exhaustive demand over all subsets of `available`; the independent oracle
/// the closed forms are checked against.
pub fn demand_brute_force(v: &Valuation, prices: &[Money], available: &ItemSet) -> Result<ItemSet> {
    let avail: Vec<u16> = available.iter().copied().collect();
    if avail.len() > 20 {
        return Err(Error::Resource(format!(
            "brute-force demand over {} items (limit 20)",
            avail.len()
        )));
    }
    let mut best: ItemSet = ItemSet::new();
    let mut best_u = utility(v, prices, &best)?;
    for mask in 1u32..1 << avail.len() {
        let cand: ItemSet = avail
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &j)| j)
            .collect();
        let u = utility(v, prices, &cand)?;
        if u > best_u || (u == best_u && items::prefer_larger_then_lex(&cand, &best)) {
            best = cand;
            best_u = u;
        }
    }
    Ok(best)
}

/// Demand at a uniform per-item [`ThresholdPrice`].
///
/// Inclusive thresholds behave as `demand` at the carried price. Exclusive
/// thresholds model a price infinitesimally above it: same maximizers at the
/// carried price, but the cardinality preference flips (every extra item
/// costs an extra epsilon), so value-equals-price items are left behind.
pub fn demand_uniform(v: &Valuation, price: ThresholdPrice, available: &ItemSet) -> Result<ItemSet> {
    v.check_items(available)?;
    if v.is_additive_form() {
        return Ok(available
            .iter()
            .copied()
            .filter(|&j| price.buys_at(v.item_value(j as usize).unwrap()))
            .collect());
    }
    let prices = vec![price.value; v.num_items()];
    if price.inclusive {
        return demand_brute_force(v, &prices, available);
    }
    // Exclusive: re-run the enumeration with the flipped preference.
    let avail: Vec<u16> = available.iter().copied().collect();
    if avail.len() > 20 {
        return Err(Error::Resource(format!(
            "brute-force demand over {} items (limit 20)",
            avail.len()
        )));
    }
    let mut best: ItemSet = ItemSet::new();
    let mut best_u = utility(v, &prices, &best)?;
    for mask in 1u32..1 << avail.len() {
        let cand: ItemSet = avail
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &j)| j)
            .collect();
        let u = utility(v, &prices, &cand)?;
        if u > best_u || (u == best_u && items::prefer_smaller_then_lex(&cand, &best)) {
            best = cand;
            best_u = u;
        }
    }
    Ok(best)
}

/// Checks a class property by full enumeration over the valuation's items.
///
/// Monotone and submodular run in `O(2^m m^2)` via marginal values;
/// subadditive enumerates disjoint pairs (`O(3^m)`), which suffices for
/// monotone valuations. All arithmetic exact.
pub fn validate_class(v: &Valuation, class: ValuationClass) -> Result<bool> {
    let m = v.num_items();
    if m > EXPLICIT_MAX_ITEMS {
        return Err(Error::Resource(format!(
            "class validation enumerates 2^m sets; m = {m} exceeds {EXPLICIT_MAX_ITEMS}"
        )));
    }
    let table: Vec<Money> = (0..1usize << m)
        .map(|mask| v.value(&items::set_from_mask(mask as u32)))
        .collect::<Result<_>>()?;
    Ok(match class {
        ValuationClass::Monotone => (0..1usize << m).all(|mask| {
            (0..m).all(|j| mask >> j & 1 == 1 || table[mask] <= table[mask | 1 << j])
        }),
        ValuationClass::Additive => (0..1usize << m).all(|mask| {
            let sum: Money = (0..m)
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| table[1 << j])
                .sum();
            table[mask] == sum
        }),
        ValuationClass::Submodular => {
            // Decreasing marginals: v(S+i) - v(S) >= v(S+j+i) - v(S+j).
            (0..1usize << m).all(|s| {
                (0..m).filter(|i| s >> i & 1 == 0).all(|i| {
                    (0..m)
                        .filter(|&j| j != i && s >> j & 1 == 0)
                        .all(|j| {
                            let lhs = table[s | 1 << i].as_rational() - table[s].as_rational();
                            let rhs = table[s | 1 << j | 1 << i].as_rational()
                                - table[s | 1 << j].as_rational();
                            lhs >= rhs
                        })
                })
            })
        }
        ValuationClass::Subadditive => {
            // For monotone valuations disjoint pairs imply the general case;
            // non-monotone explicit tables are rejected at construction.
            let full = (1usize << m) - 1;
            (0..1usize << m).all(|x| {
                let mut ok = true;
                let rest = full & !x;
                // iterate submasks of the complement
                let mut y = rest;
                loop {
                    if table[x | y] > table[x] + table[y] {
                        ok = false;
                        break;
                    }
                    if y == 0 {
                        break;
                    }
                    y = (y - 1) & rest;
                }
                ok
            })
        }
    })
}

/// Literal pairwise subset check of the class inequalities, the test oracle
/// for [`validate_class`]. Quadratic in the number of subsets.
pub fn validate_class_pairwise(v: &Valuation, class: ValuationClass) -> Result<bool> {
    let m = v.num_items();
    if m > 10 {
        return Err(Error::Resource("pairwise validation limited to m <= 10".into()));
    }
    let table: Vec<Money> = (0..1usize << m)
        .map(|mask| v.value(&items::set_from_mask(mask as u32)))
        .collect::<Result<_>>()?;
    Ok(match class {
        ValuationClass::Monotone => (0..1usize << m).all(|x| {
            (0..1usize << m).all(|y| (x & y) != x || table[x] <= table[y])
        }),
        ValuationClass::Additive => validate_class(v, class)?,
        ValuationClass::Submodular => (0..1usize << m).all(|x| {
            (0..1usize << m)
                .all(|y| table[x] + table[y] >= table[x | y] + table[x & y])
        }),
        ValuationClass::Subadditive => (0..1usize << m).all(|x| {
            (0..1usize << m).all(|y| table[x] + table[y] >= table[x | y])
        }),
    })
}
