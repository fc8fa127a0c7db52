//! Duplicate allocations, shattering, generalized VC dimension, the
//! generalized Sauer-Shelah inequality, and the containment/intersection
//! properties that characterize maximal-in-range approximation ratios.
//!
//! Families are explicit member lists, never implicit predicates: every
//! universal quantifier below is a finite enumeration, so the counting
//! identities can be verified rather than reproved.

use std::collections::BTreeSet;

use itertools::Itertools;
use num_integer::binomial;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::items::ItemSet;
use crate::money::{Money, RatioBound};
use crate::Result;

/// One d-duplicate allocation: a subset of `X` per index in `Y`.
pub type Allocation = Vec<ItemSet>;

/// An explicit finite family of d-duplicate allocations of `x_size` items to
/// `y_size` indices. Members are deduplicated and held in a fixed canonical
/// (lexicographic) order.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AllocationFamily {
    pub x_size: usize,
    pub y_size: usize,
    pub d: usize,
    members: Vec<Allocation>,
}

impl AllocationFamily {
    pub fn new(x_size: usize, y_size: usize, d: usize, members: Vec<Allocation>) -> Result<Self> {
        if d < 1 {
            return Err(Error::param("duplication bound d must be at least 1"));
        }
        let mut canon: Vec<Allocation> = Vec::new();
        for member in members {
            if member.len() != y_size {
                return Err(Error::param(format!(
                    "allocation has {} parts, family has y_size {}",
                    member.len(),
                    y_size
                )));
            }
            let mut load = vec![0usize; x_size];
            for part in &member {
                for &x in part {
                    if x as usize >= x_size {
                        return Err(Error::ItemOutOfRange { index: x as usize, m: x_size });
                    }
                    load[x as usize] += 1;
                    if load[x as usize] > d {
                        return Err(Error::param(format!(
                            "element {x} appears in more than d = {d} parts"
                        )));
                    }
                }
            }
            canon.push(member);
        }
        canon.sort();
        canon.dedup();
        Ok(AllocationFamily { x_size, y_size, d, members: canon })
    }

    /// Every total assignment of `x_size` items to `y_size` indices
    /// (`y_size^x_size` members, d = 1).
    pub fn full(x_size: usize, y_size: usize) -> Result<Self> {
        if y_size == 0 {
            return Err(Error::param("y_size must be positive"));
        }
        let count = (y_size as u128).checked_pow(x_size as u32).unwrap_or(u128::MAX);
        if count > 1 << 20 {
            return Err(Error::Resource(format!("full family would have {count} members")));
        }
        let members = (0..count as usize)
            .map(|code| {
                let mut member = vec![ItemSet::new(); y_size];
                let mut c = code;
                for x in 0..x_size {
                    member[c % y_size].insert(x as u16);
                    c /= y_size;
                }
                member
            })
            .collect();
        AllocationFamily::new(x_size, y_size, 1, members)
    }

    pub fn members(&self) -> &[Allocation] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A function `S -> A` arising as a projection, encoded as the `y` assigned
/// to each element of `S` in `S`'s sorted order.
pub type Projection = Vec<u16>;

/// The projection set: total functions `S -> A` whose fibers are exactly
/// `S_y ∩ S` for some member. Members whose restriction to `S` leaves an
/// element uncovered among `A`, covers one twice, or spills outside `A`
/// contribute nothing.
pub fn project(family: &AllocationFamily, s: &ItemSet, a: &BTreeSet<u16>) -> BTreeSet<Projection> {
    let s_items: Vec<u16> = s.iter().copied().collect();
    let mut out = BTreeSet::new();
    'member: for member in &family.members {
        let mut image: Vec<Option<u16>> = vec![None; s_items.len()];
        for &y in a {
            let part = &member[y as usize];
            for (idx, &x) in s_items.iter().enumerate() {
                if part.contains(&x) {
                    if image[idx].is_some() {
                        // x lies in two parts over A (possible when d > 1):
                        // the fibers cannot partition S.
                        continue 'member;
                    }
                    image[idx] = Some(y);
                }
            }
        }
        let Some(f) = image.into_iter().collect::<Option<Projection>>() else {
            continue;
        };
        out.insert(f);
    }
    out
}

/// Whether `family` induces every function `S -> A`.
pub fn is_shattered(family: &AllocationFamily, s: &ItemSet, a: &BTreeSet<u16>) -> bool {
    let want = (a.len() as u128).checked_pow(s.len() as u32).expect("enumerable pair");
    project(family, s, a).len() as u128 == want
}

/// An explicit family of total functions `X -> Y`, the domain of the
/// generalized VC dimension.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FunctionFamily {
    pub x_size: usize,
    pub y_size: usize,
    members: BTreeSet<Vec<u16>>,
}

impl FunctionFamily {
    pub fn new(x_size: usize, y_size: usize, members: impl IntoIterator<Item = Vec<u16>>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for f in members {
            if f.len() != x_size {
                return Err(Error::param("function arity does not match x_size"));
            }
            if f.iter().any(|&y| y as usize >= y_size) {
                return Err(Error::param("function value out of range"));
            }
            set.insert(f);
        }
        Ok(FunctionFamily { x_size, y_size, members: set })
    }

    /// All `y_size^x_size` functions.
    pub fn complete(x_size: usize, y_size: usize) -> Result<Self> {
        let count = (y_size as u128).pow(x_size as u32);
        if count > 1 << 20 {
            return Err(Error::Resource(format!("complete family would have {count} members")));
        }
        let members = (0..count as usize).map(|code| {
            let mut c = code;
            (0..x_size)
                .map(|_| {
                    let y = (c % y_size) as u16;
                    c /= y_size;
                    y
                })
                .collect::<Vec<u16>>()
        });
        FunctionFamily::new(x_size, y_size, members)
    }

    /// Converts an allocation family to the function family of its total
    /// projections onto all of X and Y: only members that partition every
    /// element of X among Y induce functions.
    pub fn from_allocations(family: &AllocationFamily) -> Self {
        let x: ItemSet = (0..family.x_size as u16).collect();
        let y: BTreeSet<u16> = (0..family.y_size as u16).collect();
        FunctionFamily {
            x_size: family.x_size,
            y_size: family.y_size,
            members: project(family, &x, &y),
        }
    }

    pub fn members(&self) -> impl Iterator<Item = &Vec<u16>> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Generalized VC dimension: the largest `|A|` such that `A` is k-shattered,
/// i.e. some choice of k-element label sets `Y_a` realizes every selector.
///
/// Exhaustive over subsets `A` of `X` and label-set combinations; feasible
/// for the desk scales used here (|X| <= 5, |Y| <= 4).
pub fn dim_k(family: &FunctionFamily, k: usize) -> Result<usize> {
    if k > family.y_size {
        return Err(Error::param(format!(
            "k = {k} exceeds the label universe |Y| = {}",
            family.y_size
        )));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let label_sets: Vec<Vec<u16>> = (0..family.y_size as u16).combinations(k).collect();
    let mut best = 0usize;
    for a_mask in 0u32..1 << family.x_size {
        let a: Vec<usize> = (0..family.x_size).filter(|&x| a_mask >> x & 1 == 1).collect();
        if a.len() <= best {
            continue;
        }
        if is_k_shattered(family, &a, &label_sets, k) {
            best = a.len();
        }
    }
    Ok(best)
}

fn is_k_shattered(
    family: &FunctionFamily,
    a: &[usize],
    label_sets: &[Vec<u16>],
    k: usize,
) -> bool {
    // Projections of the family onto A.
    let projections: BTreeSet<Vec<u16>> = family
        .members
        .iter()
        .map(|f| a.iter().map(|&x| f[x]).collect())
        .collect();
    if projections.len() < k.pow(a.len() as u32) {
        return false;
    }
    // Try every assignment of a label set to each element of A; check that
    // every selector through the chosen sets is realized.
    let mut choice = vec![0usize; a.len()];
    loop {
        let mut selector = vec![0usize; a.len()];
        let complete = 'sel: loop {
            let f: Vec<u16> = (0..a.len())
                .map(|i| label_sets[choice[i]][selector[i]])
                .collect();
            if !projections.contains(&f) {
                break 'sel false;
            }
            let mut i = 0;
            loop {
                if i == a.len() {
                    break 'sel true;
                }
                selector[i] += 1;
                if selector[i] < k {
                    break;
                }
                selector[i] = 0;
                i += 1;
            }
        };
        if complete {
            return true;
        }
        let mut i = 0;
        loop {
            if i == a.len() {
                return false;
            }
            choice[i] += 1;
            if choice[i] < label_sets.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// First inequality of the generalized Sauer-Shelah theorem, evaluated
/// exactly:
/// `|H| <= sum_{i=0}^{Dim_k} C(|X|, i) (k-1)^(|X|-i) C(|Y|, k)^i`.
pub fn sauer_shelah_check(family: &FunctionFamily, k: usize) -> Result<bool> {
    if k < 2 {
        return Err(Error::param("the theorem requires k >= 2"));
    }
    let dim = dim_k(family, k)?;
    let x = family.x_size as u128;
    let y = family.y_size as u128;
    let mut bound: u128 = 0;
    for i in 0..=dim as u128 {
        bound += binomial(x, i)
            * (k as u128 - 1).pow((x - i) as u32)
            * binomial(y, k as u128).pow(i as u32);
    }
    Ok(family.len() as u128 <= bound)
}

/// All 1-duplicate allocations of `x_size` items to `y_size` indices
/// (each item goes to one index or stays unallocated): the quantifier
/// domain of the containment and intersection properties.
fn all_partial_allocations(x_size: usize, y_size: usize) -> Result<Vec<Allocation>> {
    let count = ((y_size + 1) as u128).checked_pow(x_size as u32).unwrap_or(u128::MAX);
    if count > 1_000_000 {
        return Err(Error::Resource(format!("{count} allocations exceed the 10^6 bound")));
    }
    Ok((0..count as usize)
        .map(|code| {
            let mut alloc = vec![ItemSet::new(); y_size];
            let mut c = code;
            for x in 0..x_size {
                let slot = c % (y_size + 1);
                c /= y_size + 1;
                if slot < y_size {
                    alloc[slot].insert(x as u16);
                }
            }
            alloc
        })
        .collect())
}

/// Verdict of a universally quantified family property, with a violating
/// allocation when false.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyVerdict {
    pub holds: bool,
    pub witness: Option<Allocation>,
}

/// The alpha-containment property: for every allocation `{S_y}`, some member
/// `{T_y}` has `|{y : ∅ != S_y ⊆ T_y}| >= (1/alpha) |{y : S_y != ∅}|`.
pub fn check_containment(family: &AllocationFamily, alpha: Money) -> Result<PropertyVerdict> {
    if alpha < Money::ONE {
        return Err(Error::param("alpha must be at least 1"));
    }
    for s in all_partial_allocations(family.x_size, family.y_size)? {
        let nonempty = s.iter().filter(|part| !part.is_empty()).count();
        if nonempty == 0 {
            continue;
        }
        let best = best_containment_cover(family, &s);
        // covered >= nonempty / alpha  <=>  covered * alpha >= nonempty
        let ok = Money::from_int(best as u64) * alpha >= Money::from_int(nonempty as u64);
        if !ok {
            return Ok(PropertyVerdict { holds: false, witness: Some(s) });
        }
    }
    Ok(PropertyVerdict { holds: true, witness: None })
}

fn best_containment_cover(family: &AllocationFamily, s: &Allocation) -> usize {
    family
        .members
        .iter()
        .map(|t| {
            s.iter()
                .zip(t)
                .filter(|(s_y, t_y)| !s_y.is_empty() && s_y.is_subset(t_y))
                .count()
        })
        .max()
        .unwrap_or(0)
}

/// The alpha-intersection property: for every allocation `{S_y}`, some member
/// `{T_y}` has `sum_y |S_y ∩ T_y| >= (1/alpha) sum_y |S_y|`.
pub fn check_intersection(family: &AllocationFamily, alpha: Money) -> Result<PropertyVerdict> {
    if alpha < Money::ONE {
        return Err(Error::param("alpha must be at least 1"));
    }
    for s in all_partial_allocations(family.x_size, family.y_size)? {
        let total: usize = s.iter().map(|part| part.len()).sum();
        if total == 0 {
            continue;
        }
        let best = best_intersection_overlap(family, &s);
        let ok = Money::from_int(best as u64) * alpha >= Money::from_int(total as u64);
        if !ok {
            return Ok(PropertyVerdict { holds: false, witness: Some(s) });
        }
    }
    Ok(PropertyVerdict { holds: true, witness: None })
}

fn best_intersection_overlap(family: &AllocationFamily, s: &Allocation) -> usize {
    family
        .members
        .iter()
        .map(|t| {
            s.iter()
                .zip(t)
                .map(|(s_y, t_y)| s_y.intersection(t_y).count())
                .sum::<usize>()
        })
        .max()
        .unwrap_or(0)
}

/// Minimal alpha with the containment property, as an exact ratio over the
/// finite set of realized (nonempty count, best cover) pairs.
pub fn min_containment_alpha(family: &AllocationFamily) -> Result<RatioBound> {
    let mut worst = RatioBound::Finite(Money::ONE);
    for s in all_partial_allocations(family.x_size, family.y_size)? {
        let nonempty = s.iter().filter(|part| !part.is_empty()).count();
        if nonempty == 0 {
            continue;
        }
        let best = best_containment_cover(family, &s);
        let r = if best == 0 {
            RatioBound::Infinite
        } else {
            RatioBound::Finite(Money::new(nonempty as i128, best as i128).expect("positive"))
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Minimal alpha with the intersection property.
pub fn min_intersection_alpha(family: &AllocationFamily) -> Result<RatioBound> {
    let mut worst = RatioBound::Finite(Money::ONE);
    for s in all_partial_allocations(family.x_size, family.y_size)? {
        let total: usize = s.iter().map(|part| part.len()).sum();
        if total == 0 {
            continue;
        }
        let best = best_intersection_overlap(family, &s);
        let r = if best == 0 {
            RatioBound::Infinite
        } else {
            RatioBound::Finite(Money::new(total as i128, best as i128).expect("positive"))
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Valuation classes over which [`mir_ratio`] quantifies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MirClass {
    /// All (interest set, value from the grid) pairs; the empty interest set
    /// is the zero valuation.
    SingleMinded,
    /// All {0,1}-vectors of per-item values.
    ZeroOneAdditive,
}

/// Worst-case OPT over welfare of the maximal-in-range mechanism with range
/// `family`, over every profile of the class. Exhaustive in both the profile
/// space and the range.
pub fn mir_ratio(family: &AllocationFamily, class: MirClass, value_grid: &[Money]) -> Result<RatioBound> {
    if family.is_empty() {
        return Err(Error::param("range must be nonempty"));
    }
    if family.d != 1 {
        return Err(Error::param("auction semantics require d = 1"));
    }
    let profiles = class_profiles(family.x_size, family.y_size, class, value_grid)?;
    let mut worst = RatioBound::Finite(Money::ONE);
    for profile in &profiles {
        let inst = crate::instances::Instance::new(profile.clone())?;
        let opt = crate::oracles::opt_welfare(&inst)?;
        if opt.is_zero() {
            continue;
        }
        let achieved = family
            .members
            .iter()
            .map(|member| {
                member
                    .iter()
                    .zip(profile)
                    .map(|(part, v)| v.value(part))
                    .sum::<Result<Money>>()
            })
            .collect::<Result<Vec<Money>>>()?
            .into_iter()
            .max()
            .unwrap();
        let r = if achieved.is_zero() {
            RatioBound::Infinite
        } else {
            RatioBound::Finite(
                Money::from_rational(opt.as_rational() / achieved.as_rational())
                    .expect("ratio of non-negatives"),
            )
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

fn class_profiles(
    x_size: usize,
    y_size: usize,
    class: MirClass,
    value_grid: &[Money],
) -> Result<Vec<Vec<crate::valuations::Valuation>>> {
    use crate::valuations::Valuation;
    let per_bidder: Vec<Valuation> = match class {
        MirClass::SingleMinded => {
            let mut vals = vec![Valuation::SingleMinded {
                m: x_size,
                interest: ItemSet::new(),
                value: Money::ZERO,
            }];
            for mask in 1u32..1 << x_size {
                for &v in value_grid {
                    vals.push(Valuation::SingleMinded {
                        m: x_size,
                        interest: crate::items::set_from_mask(mask),
                        value: v,
                    });
                }
            }
            vals
        }
        MirClass::ZeroOneAdditive => (0u32..1 << x_size)
            .map(|mask| Valuation::Additive {
                values: (0..x_size)
                    .map(|j| if mask >> j & 1 == 1 { Money::ONE } else { Money::ZERO })
                    .collect(),
            })
            .collect(),
    };
    let total = (per_bidder.len() as u128).checked_pow(y_size as u32).unwrap_or(u128::MAX);
    if total > 10_000_000 {
        return Err(Error::Resource(format!("{total} profiles exceed the enumeration budget")));
    }
    let mut profiles = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; y_size];
    loop {
        profiles.push(idx.iter().map(|&i| per_bidder[i].clone()).collect());
        let mut i = 0;
        loop {
            if i == y_size {
                return Ok(profiles);
            }
            idx[i] += 1;
            if idx[i] < per_bidder.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}
