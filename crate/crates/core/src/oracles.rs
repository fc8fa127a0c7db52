//! Brute-force ground truth: optimal welfare, exhaustive single-price
//! search, the bucket counting quantities, exact posted-price expectations,
//! and Monte Carlo welfare statistics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instances::{interest01_bidders, BucketParams, Instance};
use crate::items::ItemSet;
use crate::mechanisms::{run_single_price, Outcome, SinglePriceSpec};
use crate::money::{Money, RatioBound, ThresholdPrice};
use crate::rng::{substream, Domain};
use crate::valuations::Valuation;
use crate::Result;

/// Default enumeration budget for exhaustive searches.
pub const DEFAULT_SEARCH_BUDGET: u64 = 10_000_000;

/// Exact optimal welfare.
///
/// Additive forms decompose per item (sum of per-item maxima); all other
/// instances are solved by exhaustive assignment enumeration, bounded at
/// `n^m <= 10^7` (monotonicity makes full assignments sufficient).
pub fn opt_welfare(inst: &Instance) -> Result<Money> {
    if inst.is_additive_form() {
        let mut total = Money::ZERO;
        for j in 0..inst.m {
            let best = (0..inst.n)
                .map(|i| inst.valuations[i].item_value(j))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .max()
                .unwrap();
            total += best;
        }
        return Ok(total);
    }
    opt_welfare_exhaustive(inst)
}

/// Exhaustive optimum over all `n^m` full assignments; the independent
/// oracle for the additive closed form and the only route for general
/// valuations.
pub fn opt_welfare_exhaustive(inst: &Instance) -> Result<Money> {
    let space = (inst.n as u128).checked_pow(inst.m as u32).unwrap_or(u128::MAX);
    if space > DEFAULT_SEARCH_BUDGET as u128 {
        return Err(Error::Resource(format!(
            "{space} assignments exceed the enumeration bound"
        )));
    }
    let mut best = Money::ZERO;
    let mut assign = vec![0usize; inst.m];
    loop {
        let mut sets = vec![ItemSet::new(); inst.n];
        for (j, &i) in assign.iter().enumerate() {
            sets[i].insert(j as u16);
        }
        let w: Money = sets
            .iter()
            .zip(&inst.valuations)
            .map(|(s, v)| v.value(s))
            .sum::<Result<Money>>()?;
        best = best.max(w);
        let mut j = 0;
        loop {
            if j == inst.m {
                return Ok(best);
            }
            assign[j] += 1;
            if assign[j] < inst.n {
                break;
            }
            assign[j] = 0;
            j += 1;
        }
    }
}

/// Which visit orders an exhaustive single-price search ranges over.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OrderPolicy {
    /// All `n!` permutations.
    All,
    /// One fixed order.
    Fixed(Vec<usize>),
}

/// Result of an exhaustive mechanism search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub best_spec: SinglePriceSpec,
    pub best_welfare: Money,
    pub search_space_size: u64,
    pub exhaustive: bool,
}

/// The complete threshold grid for an instance: price 0 plus an inclusive
/// and an exclusive threshold at every distinct item value.
///
/// A bidder's uniform-price demand changes only when the price crosses one
/// of its item values, so inclusive/exclusive thresholds at the distinct
/// values realize every demand behavior any real price could induce.
pub fn threshold_grid(inst: &Instance) -> Result<Vec<ThresholdPrice>> {
    let mut values: Vec<Money> = Vec::new();
    for v in &inst.valuations {
        for j in 0..inst.m {
            values.push(v.item_value(j)?);
        }
    }
    values.sort();
    values.dedup();
    let mut grid = vec![ThresholdPrice::inclusive(Money::ZERO)];
    for v in values {
        let incl = ThresholdPrice::inclusive(v);
        if !grid.contains(&incl) {
            grid.push(incl);
        }
        grid.push(ThresholdPrice::exclusive(v));
    }
    Ok(grid)
}

/// Exhaustive welfare maximization over `grid^n x orders`.
///
/// The spec space is partitioned across workers; ties break toward the
/// canonical index (order-major, then the price odometer), so the result is
/// independent of scheduling.
pub fn best_single_price(
    inst: &Instance,
    orders: OrderPolicy,
    budget: Option<u64>,
) -> Result<SearchReport> {
    let grid = threshold_grid(inst)?;
    let orders: Vec<Vec<usize>> = match orders {
        OrderPolicy::All => permutations(inst.n),
        OrderPolicy::Fixed(order) => vec![order],
    };
    let combos = (grid.len() as u128).checked_pow(inst.n as u32).unwrap_or(u128::MAX);
    let total = combos.saturating_mul(orders.len() as u128);
    let budget = budget.unwrap_or(DEFAULT_SEARCH_BUDGET) as u128;
    if total > budget {
        return Err(Error::Resource(format!(
            "single-price search space {total} exceeds budget {budget}"
        )));
    }

    let spec_at = |idx: u64| -> SinglePriceSpec {
        let order = orders[(idx as u128 / combos) as usize].clone();
        let mut c = (idx as u128 % combos) as u64;
        let prices = (0..inst.n)
            .map(|_| {
                let p = grid[(c % grid.len() as u64) as usize];
                c /= grid.len() as u64;
                p
            })
            .collect();
        SinglePriceSpec { order, prices }
    };

    let best = (0..total as u64)
        .into_par_iter()
        .map(|idx| {
            let spec = spec_at(idx);
            let welfare = run_single_price(&spec, inst)
                .expect("grid specs are well-formed")
                .welfare;
            (welfare, idx)
        })
        .reduce(
            || (Money::ZERO, u64::MAX),
            |a, b| match a.0.cmp(&b.0) {
                std::cmp::Ordering::Greater => a,
                std::cmp::Ordering::Less => b,
                std::cmp::Ordering::Equal => {
                    if a.1 <= b.1 {
                        a
                    } else {
                        b
                    }
                }
            },
        );

    Ok(SearchReport {
        best_spec: spec_at(best.1),
        best_welfare: best.0,
        search_space_size: total as u64,
        exhaustive: true,
    })
}

/// Visits every spec of the declared single-price grid, calling `visit` with
/// (spec, outcome). Used by the counting-lemma sweeps.
pub fn for_each_single_price_spec<F>(
    inst: &Instance,
    orders: OrderPolicy,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&SinglePriceSpec, &Outcome) -> Result<()>,
{
    let grid = threshold_grid(inst)?;
    let orders: Vec<Vec<usize>> = match orders {
        OrderPolicy::All => permutations(inst.n),
        OrderPolicy::Fixed(order) => vec![order],
    };
    for order in &orders {
        let mut idx = vec![0usize; inst.n];
        loop {
            let spec = SinglePriceSpec {
                order: order.clone(),
                prices: idx.iter().map(|&i| grid[i]).collect(),
            };
            let out = run_single_price(&spec, inst)?;
            visit(&spec, &out)?;
            let mut i = 0;
            loop {
                if i == inst.n {
                    break;
                }
                idx[i] += 1;
                if idx[i] < grid.len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..n).permutations(n).collect()
}

/// Counts (bidder, bucket) pairs whose specials all went to their special
/// bidder in `outcome`.
pub fn special_pair_count(outcome: &Outcome, params: &BucketParams) -> Result<usize> {
    if outcome.allocation.len() != params.n {
        return Err(Error::param("outcome bidder count does not match bucket params"));
    }
    let mut count = 0;
    for bidder in 0..params.n {
        for bucket in 0..params.b as usize {
            let specials = params.specials_of(bidder, bucket);
            if specials.is_subset(&outcome.allocation[bidder]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Per-bucket level counts for a single-price spec on a bucket instance:
/// `n_j` is the number of bidders visited before the first bidder whose
/// threshold buys at value `c^j` that themselves buy at value `c^(j+1)`.
/// `None` when no bidder buys at `c^j`.
pub fn bucket_level_counts(spec: &SinglePriceSpec, params: &BucketParams) -> Vec<Option<usize>> {
    (0..params.b)
        .map(|j| {
            let low = Money::from_int(params.c.pow(j));
            let high = Money::from_int(params.c.pow(j + 1));
            let first = spec
                .order
                .iter()
                .position(|&i| spec.prices[i].buys_at(low))?;
            Some(
                spec.order[..first]
                    .iter()
                    .filter(|&&i| spec.prices[i].buys_at(high))
                    .count(),
            )
        })
        .collect()
}

/// The bucket welfare identity `x c^(b+1)/n + (bn - x) c^b/n`.
pub fn bucket_welfare_identity(params: &BucketParams, special_pairs: usize) -> Money {
    let c_b1 = Money::from_int(params.c.pow(params.b + 1));
    let c_b = Money::from_int(params.c.pow(params.b));
    let n = Money::from_int(params.n as u64);
    let x = Money::from_int(special_pairs as u64);
    let bn = Money::from_int(params.b as u64 * params.n as u64);
    let remaining = bn.checked_sub(x).expect("x <= bn");
    Money::from_rational(
        (x * c_b1).as_rational() / n.as_rational()
            + (remaining * c_b).as_rational() / n.as_rational(),
    )
    .expect("non-negative")
}

/// One level term of the per-item posted-price expectation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTerm {
    pub k: u32,
    /// Whether some bidder's price is at most `c^k` (the level's `i_k`
    /// exists, making the closed-form term applicable).
    pub defined: bool,
    /// When defined: bidders before `i_k` priced at most `c^(k+1)`.
    /// When degenerate: all bidders priced at most `c^(k+1)`.
    pub n_k: usize,
    /// When defined: `(c(1+n_k) + (n-1-n_k))/n`. When degenerate, the exact
    /// contribution `c * n_k / n` of the level, reported separately.
    pub value: Money,
}

/// Exact per-item expected welfare of a posted-price column, two ways.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostedColumnReport {
    /// Exhaustive expectation over the value-column distribution.
    pub exhaustive: Money,
    pub levels: Vec<LevelTerm>,
    /// Sum of the defined (closed-form) level terms only.
    pub formula_defined_sum: Money,
    pub all_levels_defined: bool,
    /// `cb/n + c + b`, an upper bound on the expectation.
    pub upper_bound: Money,
}

/// Computes the exact expected welfare contribution of one item under a
/// posted-price column, by exhaustive enumeration of the value distribution
/// and by the per-level closed form. `prices` are in visit order.
pub fn posted_column_expectation(prices: &[Money], b: u32, c: u64) -> Result<PostedColumnReport> {
    let n = prices.len();
    if n == 0 {
        return Err(Error::param("need at least one bidder"));
    }
    if c < 2 {
        return Err(Error::param("base c must be at least 2"));
    }

    // Exhaustive: level k occurs with probability 1/c^k; the special bidder
    // position is uniform; the zero column contributes nothing.
    let mut exhaustive = Money::ZERO;
    for k in 1..=b {
        let level_prob = Money::new(1, (c as i128).pow(k)).unwrap();
        let pos_prob = Money::new(1, n as i128).unwrap();
        for special in 0..n {
            let values: Vec<Money> = (0..n)
                .map(|i| Money::from_int(if i == special { c.pow(k + 1) } else { c.pow(k) }))
                .collect();
            let contribution = values
                .iter()
                .zip(prices)
                .find(|(v, p)| *v >= *p)
                .map(|(v, _)| *v)
                .unwrap_or(Money::ZERO);
            exhaustive += level_prob * pos_prob * contribution;
        }
    }

    // Closed form per level.
    let mut levels = Vec::with_capacity(b as usize);
    let mut formula_defined_sum = Money::ZERO;
    let mut all_defined = true;
    for k in 1..=b {
        let low = Money::from_int(c.pow(k));
        let high = Money::from_int(c.pow(k + 1));
        match prices.iter().position(|p| *p <= low) {
            Some(first) => {
                let n_k = prices[..first].iter().filter(|p| **p <= high).count();
                // c(1+n_k)/n + (n-1-n_k)/n
                let value = Money::new(
                    c as i128 * (1 + n_k as i128) + (n as i128 - 1 - n_k as i128),
                    n as i128,
                )
                .expect("n_k < n");
                formula_defined_sum += value;
                levels.push(LevelTerm { k, defined: true, n_k, value });
            }
            None => {
                all_defined = false;
                let n_k = prices.iter().filter(|p| **p <= high).count();
                let value = Money::new(c as i128 * n_k as i128, n as i128).unwrap();
                levels.push(LevelTerm { k, defined: false, n_k, value });
            }
        }
    }

    let upper_bound = Money::new(
        c as i128 * b as i128 + (c as i128 + b as i128) * n as i128,
        n as i128,
    )
    .unwrap();

    Ok(PostedColumnReport {
        exhaustive,
        levels,
        formula_defined_sum,
        all_levels_defined: all_defined,
        upper_bound,
    })
}

/// Monte Carlo statistics of fixed allocations on the 0/1 interest
/// distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AllocationStats {
    pub mean_welfare: f64,
    /// Frequency of draws with welfare at least `2m/n`.
    pub freq_double_mean: f64,
}

/// Evaluates fixed allocations (owner-per-item, `None` = unallocated)
/// against fresh interest01 draws. Trial `t` draws with the seed emitted by
/// `substream(seed, Trial, t)`.
pub fn allocation_set_welfare_bound(
    m: usize,
    eps: f64,
    allocations: &[Vec<Option<usize>>],
    trials: usize,
    seed: u64,
) -> Result<Vec<AllocationStats>> {
    if trials < 1_000 {
        return Err(Error::param("need at least 10^3 trials"));
    }
    let n = interest01_bidders(m, eps);
    for alloc in allocations {
        if alloc.len() != m || alloc.iter().flatten().any(|&i| i >= n) {
            return Err(Error::param("allocation shape does not match the distribution"));
        }
    }
    let threshold = 2.0 * m as f64 / n as f64;
    let mut sums = vec![0.0f64; allocations.len()];
    let mut hits = vec![0usize; allocations.len()];
    for t in 0..trials {
        let trial_seed: u64 = substream(seed, Domain::Trial, t as u64).random();
        let owners = crate::instances::interest01_owners(m, n, trial_seed);
        for (a, alloc) in allocations.iter().enumerate() {
            let welfare = alloc
                .iter()
                .zip(&owners)
                .filter(|(assigned, owner)| **assigned == Some(**owner))
                .count();
            sums[a] += welfare as f64;
            if welfare as f64 >= threshold {
                hits[a] += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .zip(hits)
        .map(|(s, h)| AllocationStats {
            mean_welfare: s / trials as f64,
            freq_double_mean: h as f64 / trials as f64,
        })
        .collect())
}

/// Random full allocation (every item assigned) for the interest01 bounds.
pub fn random_allocation(m: usize, n: usize, seed: u64, index: u64) -> Vec<Option<usize>> {
    let mut rng = substream(seed, Domain::Family, index);
    (0..m).map(|_| Some(rng.random_range(0..n))).collect()
}

/// Exact probability that the secretary rule (with the implemented cutoff)
/// awards a single item to the highest of `n` distinct values, by
/// enumerating all `n!` arrival orders through the mechanism's own stopping
/// rule.
pub fn secretary_win_probability_exact(n: usize) -> Result<Money> {
    use itertools::Itertools;
    if n == 0 || n > 10 {
        return Err(Error::param("enumeration supported for 1 <= n <= 10"));
    }
    let cutoff = crate::mechanisms::secretary_cutoff(n);
    let values: Vec<Money> = (1..=n as u64).map(Money::from_int).collect();
    let mut wins: u64 = 0;
    let mut total: u64 = 0;
    for order in (0..n).permutations(n) {
        total += 1;
        let arrived: Vec<Money> = order.iter().map(|&i| values[i]).collect();
        if let Some(pos) = crate::mechanisms::secretary_select(&arrived, cutoff) {
            if order[pos] == n - 1 {
                wins += 1;
            }
        }
    }
    Money::new(wins as i128, total as i128)
}

/// The classical cutoff formula `(r/n) * sum_{j=r+1}^{n} 1/(j-1)`, exact.
/// Defined for cutoffs `r >= 1`.
pub fn secretary_win_probability_formula(n: usize) -> Result<Money> {
    let r = crate::mechanisms::secretary_cutoff(n);
    if r < 1 {
        return Err(Error::param(format!(
            "the classical formula needs cutoff >= 1; n = {n} gives cutoff {r}"
        )));
    }
    let mut sum = crate::money::Rational::from_integer(0);
    for j in (r + 1)..=n {
        sum += crate::money::Rational::new(1, (j - 1) as i128);
    }
    Money::from_rational(crate::money::Rational::new(r as i128, n as i128) * sum)
}

/// Worst-case OPT over achieved welfare when bidder `i` maps its valuation
/// through `strategy(i, v)` and the mechanism adaptor `run` plays out phase
/// two truthfully. Exhaustive over `valuation_set^n`.
pub fn guarantee_ratio<A, S, R>(
    strategy: S,
    run: R,
    valuation_set: &[Valuation],
    n: usize,
) -> Result<RatioBound>
where
    A: Clone,
    S: Fn(usize, &Valuation) -> A,
    R: Fn(&[A], &Instance) -> Result<Outcome>,
{
    if valuation_set.is_empty() || n == 0 {
        return Err(Error::param("need a nonempty valuation set and bidders"));
    }
    let total = (valuation_set.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > DEFAULT_SEARCH_BUDGET as u128 {
        return Err(Error::Resource(format!("{total} profiles exceed the enumeration bound")));
    }
    let mut worst = RatioBound::Finite(Money::ONE);
    let mut idx = vec![0usize; n];
    loop {
        let profile: Vec<Valuation> = idx.iter().map(|&i| valuation_set[i].clone()).collect();
        let actions: Vec<A> = profile
            .iter()
            .enumerate()
            .map(|(i, v)| strategy(i, v))
            .collect();
        let inst = Instance::new(profile)?;
        let opt = opt_welfare(&inst)?;
        if !opt.is_zero() {
            let outcome = run(&actions, &inst)?;
            let r = if outcome.welfare.is_zero() {
                RatioBound::Infinite
            } else {
                RatioBound::Finite(
                    Money::from_rational(opt.as_rational() / outcome.welfare.as_rational())
                        .expect("ratio of non-negatives"),
                )
            };
            worst = worst.max(r);
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(worst);
            }
            idx[i] += 1;
            if idx[i] < valuation_set.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::gen_bucket;
    use crate::mechanisms::run_single_bid;

    fn money(v: i128) -> Money {
        Money::new(v, 1).unwrap()
    }

    fn additive_instance(rows: &[&[i128]]) -> Instance {
        Instance::new(
            rows.iter()
                .map(|r| Valuation::Additive { values: r.iter().map(|&v| money(v)).collect() })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn opt_welfare_per_item_max() {
        let inst = additive_instance(&[&[1, 2], &[3, 0]]);
        assert_eq!(opt_welfare(&inst).unwrap(), money(5));
    }

    #[test]
    fn opt_welfare_bucket_matches_formula() {
        let p = BucketParams::new(2, 2, 2).unwrap();
        assert_eq!(opt_welfare(&gen_bucket(&p)).unwrap(), money(16));
        let p3 = BucketParams::new(3, 3, 3).unwrap();
        assert_eq!(opt_welfare(&gen_bucket(&p3)).unwrap(), money(243));
    }

    #[test]
    fn opt_welfare_single_minded_conflict() {
        let inst = Instance::new(vec![
            Valuation::SingleMinded { m: 1, interest: [0u16].into(), value: money(3) },
            Valuation::SingleMinded { m: 1, interest: [0u16].into(), value: money(5) },
        ])
        .unwrap();
        assert_eq!(opt_welfare(&inst).unwrap(), money(5));
    }

    #[test]
    fn additive_closed_form_matches_exhaustive() {
        use rand::Rng;
        let mut rng = substream(23, Domain::Trial, 2);
        for _ in 0..50 {
            let n = rng.random_range(1..=3usize);
            let m = rng.random_range(1..=6usize);
            let inst = Instance::new(
                (0..n)
                    .map(|_| Valuation::Additive {
                        values: (0..m).map(|_| money(rng.random_range(0..7))).collect(),
                    })
                    .collect(),
            )
            .unwrap();
            assert_eq!(opt_welfare(&inst).unwrap(), opt_welfare_exhaustive(&inst).unwrap());
        }
    }

    #[test]
    fn single_price_search_bucket_222() {
        let p = BucketParams::new(2, 2, 2).unwrap();
        let inst = gen_bucket(&p);
        let report = best_single_price(&inst, OrderPolicy::All, None).unwrap();
        assert_eq!(report.best_welfare, money(14));
        assert!(report.exhaustive);
        // Reported best re-simulates to its reported welfare.
        let again = run_single_price(&report.best_spec, &inst).unwrap();
        assert_eq!(again.welfare, report.best_welfare);
        // Ratio 16/14 = 8/7.
        assert_eq!(
            opt_welfare(&inst).unwrap().as_rational() / report.best_welfare.as_rational(),
            Money::new(8, 7).unwrap().as_rational()
        );
    }

    #[test]
    fn single_price_search_bucket_333_exact_value() {
        // Frozen from the exhaustive search itself: the best spec reaches
        // x = 5 special pairs with everything sold, 5*27 + 4*9 = 171.
        let p = BucketParams::new(3, 3, 3).unwrap();
        let inst = gen_bucket(&p);
        let report = best_single_price(&inst, OrderPolicy::All, None).unwrap();
        assert_eq!(report.best_welfare, money(171));
        assert_eq!(report.search_space_size, 4374);
        assert_eq!(bucket_welfare_identity(&p, 5), money(171));
    }

    #[test]
    fn single_price_search_single_bidder_prefers_zero_price() {
        let inst = additive_instance(&[&[4, 1, 0]]);
        let report = best_single_price(&inst, OrderPolicy::All, None).unwrap();
        assert_eq!(report.best_welfare, money(5));
    }

    #[test]
    fn off_grid_prices_never_beat_the_grid_optimum() {
        use rand::Rng;
        let p = BucketParams::new(2, 2, 2).unwrap();
        let inst = gen_bucket(&p);
        let report = best_single_price(&inst, OrderPolicy::All, None).unwrap();
        let mut rng = substream(41, Domain::Trial, 3);
        for _ in 0..500 {
            let prices: Vec<ThresholdPrice> = (0..inst.n)
                .map(|_| {
                    ThresholdPrice::inclusive(
                        Money::new(rng.random_range(0..40), rng.random_range(1..8)).unwrap(),
                    )
                })
                .collect();
            let mut order: Vec<usize> = (0..inst.n).collect();
            if rng.random_range(0..2) == 1 {
                order.reverse();
            }
            let out = run_single_price(&SinglePriceSpec { order, prices }, &inst).unwrap();
            assert!(out.welfare <= report.best_welfare);
        }
    }

    #[test]
    fn special_pairs_on_the_222_trace() {
        let p = BucketParams::new(2, 2, 2).unwrap();
        let inst = gen_bucket(&p);
        let out = run_single_bid(&[money(2), money(1)], &inst).unwrap();
        assert_eq!(special_pair_count(&out, &p).unwrap(), 3);
        assert_eq!(bucket_welfare_identity(&p, 3), money(14));

        // Optimal allocation: every pair special.
        let optimal: Vec<ItemSet> = (0..p.n)
            .map(|i| {
                (0..p.b as usize)
                    .flat_map(|bkt| p.specials_of(i, bkt))
                    .collect()
            })
            .collect();
        let opt_out = Outcome::new(&inst, optimal, vec![Money::ZERO; p.n]).unwrap();
        assert_eq!(special_pair_count(&opt_out, &p).unwrap(), (p.b as usize) * p.n);
        assert_eq!(opt_out.welfare, money(16));

        // Empty allocation: zero pairs.
        let empty = Outcome::new(&inst, vec![ItemSet::new(); 2], vec![Money::ZERO; 2]).unwrap();
        assert_eq!(special_pair_count(&empty, &p).unwrap(), 0);
    }

    #[test]
    fn posted_column_example_n2_b1() {
        let report = posted_column_expectation(&[money(3), money(1)], 1, 2).unwrap();
        assert_eq!(report.exhaustive, money(2));
        assert!(report.all_levels_defined);
        assert_eq!(report.formula_defined_sum, money(2));
        assert_eq!(report.levels[0].n_k, 1);
    }

    #[test]
    fn posted_column_all_prices_prohibitive() {
        let report =
            posted_column_expectation(&[money(100), money(100)], 2, 2).unwrap();
        assert_eq!(report.exhaustive, Money::ZERO);
        assert!(!report.all_levels_defined);
        assert!(report.levels.iter().all(|l| !l.defined && l.value.is_zero()));
    }

    #[test]
    fn posted_column_degenerate_levels_still_sum_exactly() {
        use rand::Rng;
        let mut rng = substream(5, Domain::Trial, 4);
        for _ in 0..300 {
            let n = rng.random_range(2..=4usize);
            let b = rng.random_range(1..=3u32);
            let prices: Vec<Money> = (0..n)
                .map(|_| money(rng.random_range(0..40)))
                .collect();
            let report = posted_column_expectation(&prices, b, 2).unwrap();
            // Defined or not, the per-level exact contributions total the
            // exhaustive expectation.
            let total: Money = report.levels.iter().map(|l| l.value).sum();
            assert_eq!(total, report.exhaustive);
            assert!(report.exhaustive <= report.upper_bound);
        }
    }

    #[test]
    fn interest01_fixed_allocation_mean() {
        let m = 256;
        let alloc = vec![Some(0usize); m]; // everything to bidder 0
        let stats = allocation_set_welfare_bound(m, 0.25, &[alloc], 10_000, 7).unwrap();
        assert!((stats[0].mean_welfare - 32.0).abs() / 32.0 < 0.05);
    }

    #[test]
    fn interest01_empty_allocation_mean_zero() {
        let stats =
            allocation_set_welfare_bound(64, 0.25, &[vec![None; 64]], 1_000, 7).unwrap();
        assert_eq!(stats[0].mean_welfare, 0.0);
    }

    #[test]
    fn secretary_enumeration_matches_formula_n10() {
        // n = 10 uses cutoff 3; the exhaustive 10! enumeration equals
        // (3/10)(1/3 + ... + 1/9) exactly.
        let exact = secretary_win_probability_exact(10).unwrap();
        let formula = secretary_win_probability_formula(10).unwrap();
        assert_eq!(exact, formula);
    }

    #[test]
    fn secretary_degenerate_cutoff_first_buyer_wins() {
        // n <= 2 gives cutoff 0: the first arrival buys at price 0, so the
        // top bidder wins with probability exactly 1/n.
        assert_eq!(secretary_win_probability_exact(1).unwrap(), Money::ONE);
        assert_eq!(secretary_win_probability_exact(2).unwrap(), Money::new(1, 2).unwrap());
        assert!(secretary_win_probability_formula(2).is_err());
    }

    #[test]
    fn secretary_monte_carlo_welfare_floor() {
        // Single-item instances, n = 20 distinct values: average welfare of
        // the secretary mechanism stays above 0.34 * OPT.
        use crate::mechanisms::run_secretary;
        let n = 20;
        let values: Vec<Money> = (1..=n as u64).map(Money::from_int).collect();
        let inst = Instance::new(
            values
                .iter()
                .map(|&v| Valuation::Additive { values: vec![v] })
                .collect(),
        )
        .unwrap();
        let opt = opt_welfare(&inst).unwrap().to_f64();
        let trials = 100_000u64;
        let mut total = 0.0;
        for t in 0..trials {
            total += run_secretary(&inst, t).unwrap().welfare.to_f64();
        }
        let mean = total / trials as f64;
        assert!(mean >= 0.34 * opt, "mean welfare {mean} vs opt {opt}");
    }

    #[test]
    fn guarantee_ratio_truthful_single_bidder() {
        let set = vec![
            Valuation::Additive { values: vec![money(2), money(0)] },
            Valuation::Additive { values: vec![money(1), money(3)] },
        ];
        let r = guarantee_ratio(
            |_i, _v| Money::ZERO,
            |bids: &[Money], inst| run_single_bid(bids, inst),
            &set,
            1,
        )
        .unwrap();
        assert_eq!(r, RatioBound::Finite(Money::ONE));
    }

    #[test]
    fn guarantee_ratio_infinite_when_nothing_sells() {
        let set = vec![Valuation::Additive { values: vec![money(2)] }];
        let r = guarantee_ratio(
            |_i, _v| money(1000),
            |bids: &[Money], inst| run_single_bid(bids, inst),
            &set,
            1,
        )
        .unwrap();
        assert_eq!(r, RatioBound::Infinite);
    }

    #[test]
    fn guarantee_ratio_bucket_constant_bid_map() {
        // The two bucket(2,2,2) valuations with bidder-constant bids (2, 1):
        // enumeration over the four profiles gives worst ratio 16/14 = 8/7.
        let p = BucketParams::new(2, 2, 2).unwrap();
        let inst = gen_bucket(&p);
        let set = vec![inst.valuations[0].clone(), inst.valuations[1].clone()];
        let r = guarantee_ratio(
            |i, _v| if i == 0 { money(2) } else { money(1) },
            |bids: &[Money], inst| run_single_bid(bids, inst),
            &set,
            2,
        )
        .unwrap();
        assert_eq!(r, RatioBound::Finite(Money::new(8, 7).unwrap()));
    }
}
