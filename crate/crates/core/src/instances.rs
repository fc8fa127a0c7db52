//! Hard-instance constructions and random valuation profiles.
//!
//! All generators are pure functions of their parameters and a `u64` seed;
//! random columns draw from per-column substreams so parallel generation
//! matches serial generation exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::money::Money;
use crate::rng::{substream, Domain};
use crate::valuations::Valuation;
use crate::Result;

/// A market: `n` bidders, `m` items, one valuation per bidder.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub valuations: Vec<Valuation>,
}

impl Instance {
    pub fn new(valuations: Vec<Valuation>) -> Result<Instance> {
        let n = valuations.len();
        if n == 0 {
            return Err(Error::param("instance needs at least one bidder"));
        }
        let m = valuations[0].num_items();
        if m == 0 {
            return Err(Error::param("instance needs at least one item"));
        }
        let inst = Instance { n, m, valuations };
        inst.validate()?;
        Ok(inst)
    }

    /// Re-checks structural invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n != self.valuations.len() {
            return Err(Error::param(format!(
                "bidder count {} does not match {} valuations",
                self.n,
                self.valuations.len()
            )));
        }
        if self.m == 0 || self.m > u16::MAX as usize {
            return Err(Error::param(format!("item count {} out of range", self.m)));
        }
        for (i, v) in self.valuations.iter().enumerate() {
            if v.num_items() != self.m {
                return Err(Error::param(format!(
                    "bidder {i} valuation is over {} items, instance has {}",
                    v.num_items(),
                    self.m
                )));
            }
            if let Valuation::Explicit { table } = v {
                // Rebuild through the validating constructor.
                Valuation::explicit(table.clone())?;
            }
        }
        Ok(())
    }

    /// Every bidder's set value decomposes into per-item values.
    pub fn is_additive_form(&self) -> bool {
        self.valuations.iter().all(Valuation::is_additive_form)
    }

    /// Largest grand-bundle value among bidders; the utility bound used to
    /// normalize learning payoffs.
    pub fn grand_bundle_bound(&self) -> Result<Money> {
        let all = crate::items::all_items(self.m);
        let mut best = Money::ZERO;
        for v in &self.valuations {
            best = best.max(v.value(&all)?);
        }
        Ok(best)
    }
}

/// Parameters of the bucket construction.
///
/// Bucket `i` (for `i` in `0..b`) holds `c^(b-i)` items valued `c^i` by
/// everyone except each item's unique special bidder, who values it
/// `c^(i+1)`. `n` must divide `c` so every bidder owns exactly `c^(b-i)/n`
/// specials per bucket.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct BucketParams {
    pub b: u32,
    pub c: u64,
    pub n: usize,
}

impl BucketParams {
    pub fn new(b: u32, c: u64, n: usize) -> Result<BucketParams> {
        if b < 1 {
            return Err(Error::param("bucket count b must be at least 1"));
        }
        if c < 2 {
            return Err(Error::param("base c must be at least 2"));
        }
        if n < 1 || !c.is_multiple_of(n as u64) {
            return Err(Error::param(format!("bidder count {n} must divide c = {c}")));
        }
        Ok(BucketParams { b, c, n })
    }

    /// Sizes `c^(b-i)` for buckets `i = 0..b`.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        (0..self.b)
            .map(|i| self.c.pow(self.b - i) as usize)
            .collect()
    }

    pub fn num_items(&self) -> usize {
        self.bucket_sizes().iter().sum()
    }

    /// Bucket index of item `j` under the layout used by [`gen_bucket`]
    /// (bucket 0 first, then bucket 1, ...).
    pub fn bucket_of(&self, j: usize) -> usize {
        let mut j = j;
        for (i, size) in self.bucket_sizes().into_iter().enumerate() {
            if j < size {
                return i;
            }
            j -= size;
        }
        panic!("item index out of range");
    }

    /// Special bidder of item `j`: round-robin by position within the bucket.
    pub fn special_bidder_of(&self, j: usize) -> usize {
        let mut j = j;
        for size in self.bucket_sizes() {
            if j < size {
                return j % self.n;
            }
            j -= size;
        }
        panic!("item index out of range");
    }

    /// The special items of `bidder` inside `bucket`.
    pub fn specials_of(&self, bidder: usize, bucket: usize) -> crate::items::ItemSet {
        let sizes = self.bucket_sizes();
        let start: usize = sizes[..bucket].iter().sum();
        (0..sizes[bucket])
            .filter(|t| t % self.n == bidder)
            .map(|t| (start + t) as u16)
            .collect()
    }

    /// Optimal welfare of the construction: every item to its special
    /// bidder, `b * c^(b+1)` in total.
    pub fn optimal_welfare(&self) -> Money {
        Money::from_int(self.b as u64 * self.c.pow(self.b + 1))
    }
}

/// Deterministic bucket instance.
pub fn gen_bucket(p: &BucketParams) -> Instance {
    let m = p.num_items();
    let mut columns: Vec<(u64, usize)> = Vec::with_capacity(m); // (base value, special bidder)
    for (i, size) in p.bucket_sizes().into_iter().enumerate() {
        for t in 0..size {
            columns.push((p.c.pow(i as u32), t % p.n));
        }
    }
    let valuations = (0..p.n)
        .map(|bidder| Valuation::Additive {
            values: columns
                .iter()
                .map(|&(base, special)| {
                    Money::from_int(if special == bidder { base * p.c } else { base })
                })
                .collect(),
        })
        .collect();
    Instance { n: p.n, m, valuations }
}

/// Random instance for the non-adaptive posted-price analysis.
///
/// Item column `j` is, independently: a uniformly random placement of one
/// `c^(k+1)` among `n-1` copies of `c^k` with probability `1/c^k`
/// (`k = 1..=b`), and all-zero otherwise. Column `j` draws from
/// `substream(seed, PostedColumn, j)`.
pub fn gen_random_posted(b: u32, c: u64, n: usize, m: usize, seed: u64) -> Result<Instance> {
    if c < 2 {
        return Err(Error::param("base c must be at least 2"));
    }
    if n < 2 {
        return Err(Error::param("posted-price construction needs n >= 2"));
    }
    let denom = c.pow(b); // common denominator of the level probabilities
    let mut values = vec![vec![Money::ZERO; m]; n];
    for j in 0..m {
        let mut rng = substream(seed, Domain::PostedColumn, j as u64);
        let roll = rng.random_range(0..denom);
        // Levels occupy [0, sum of c^(b-k)); the remainder is the zero column.
        let mut acc = 0;
        let mut level = None;
        for k in 1..=b {
            acc += c.pow(b - k);
            if roll < acc {
                level = Some(k);
                break;
            }
        }
        if let Some(k) = level {
            let special = rng.random_range(0..n);
            for (i, row) in values.iter_mut().enumerate() {
                row[j] = Money::from_int(if i == special { c.pow(k + 1) } else { c.pow(k) });
            }
        }
    }
    Ok(Instance {
        n,
        m,
        valuations: values.into_iter().map(|v| Valuation::Additive { values: v }).collect(),
    })
}

/// Probability that a column of [`gen_random_posted`] is all-zero.
pub fn posted_zero_probability(b: u32, c: u64) -> Money {
    let denom = c.pow(b) as i128;
    let live: i128 = (1..=b).map(|k| c.pow(b - k) as i128).sum();
    Money::new(denom - live, denom).expect("probability in [0,1]")
}

/// 0/1-additive instance where each item interests a single uniformly random
/// bidder. `n` is derived as `round(2 m^(1/2 - eps))`.
pub fn gen_interest01(m: usize, eps: f64, seed: u64) -> Result<Instance> {
    let n = interest01_bidders(m, eps);
    if n < 1 {
        return Err(Error::param("derived bidder count is zero"));
    }
    let mut values = vec![vec![Money::ZERO; m]; n];
    for (j, owner) in interest01_owners(m, n, seed).into_iter().enumerate() {
        values[owner][j] = Money::ONE;
    }
    Ok(Instance {
        n,
        m,
        valuations: values.into_iter().map(|v| Valuation::Additive { values: v }).collect(),
    })
}

/// `round(2 m^(1/2 - eps))`.
pub fn interest01_bidders(m: usize, eps: f64) -> usize {
    (2.0 * (m as f64).powf(0.5 - eps)).round() as usize
}

/// The per-item interested bidder of one interest01 draw; item `j` draws
/// from `substream(seed, InterestColumn, j)`.
pub fn interest01_owners(m: usize, n: usize, seed: u64) -> Vec<usize> {
    (0..m)
        .map(|j| substream(seed, Domain::InterestColumn, j as u64).random_range(0..n))
        .collect()
}

/// Polar additive instance: each (bidder, item) flag independently set with
/// probability `1/n`, else the item is valued `1/m^3`. Column `j` draws from
/// `substream(seed, PolarColumn, j)`, bidder-major within the column.
pub fn gen_polar(n: usize, m: usize, seed: u64) -> Result<Instance> {
    if n < 1 || m < 1 {
        return Err(Error::param("need n >= 1 and m >= 1"));
    }
    let mut flags = vec![vec![false; m]; n];
    for j in 0..m {
        let mut rng = substream(seed, Domain::PolarColumn, j as u64);
        for row in flags.iter_mut() {
            row[j] = rng.random_range(0..n) == 0;
        }
    }
    Ok(Instance {
        n,
        m,
        valuations: flags.into_iter().map(|f| Valuation::PolarAdditive { flags: f }).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::items::all_items;

    #[test]
    fn bucket_sizes_and_layout() {
        let p = BucketParams::new(3, 3, 3).unwrap();
        assert_eq!(p.bucket_sizes(), vec![27, 9, 3]);
        assert_eq!(p.num_items(), 39);
        let p2 = BucketParams::new(2, 2, 2).unwrap();
        assert_eq!(p2.num_items(), 6);
    }

    #[test]
    fn bucket_divisibility_enforced() {
        assert!(BucketParams::new(2, 3, 2).is_err());
        assert!(BucketParams::new(2, 4, 2).is_ok());
    }

    #[test]
    fn bucket_specials_are_round_robin_and_unique() {
        let p = BucketParams::new(2, 2, 2).unwrap();
        let inst = gen_bucket(&p);
        assert_eq!(inst.m, 6);
        // Every item special for exactly one bidder; per-item max is the
        // special value; each bidder holds c^(b-i)/n specials per bucket.
        for bucket in 0..p.b as usize {
            for bidder in 0..p.n {
                let specials = p.specials_of(bidder, bucket);
                assert_eq!(specials.len(), p.bucket_sizes()[bucket] / p.n);
                for &j in &specials {
                    assert_eq!(p.special_bidder_of(j as usize), bidder);
                    let own = inst.valuations[bidder].item_value(j as usize).unwrap();
                    for other in 0..p.n {
                        if other != bidder {
                            let their = inst.valuations[other].item_value(j as usize).unwrap();
                            assert_eq!(
                                own.as_rational(),
                                their.as_rational() * crate::money::Rational::from_integer(p.c as i128)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bucket_optimal_welfare_formula() {
        assert_eq!(
            BucketParams::new(2, 2, 2).unwrap().optimal_welfare(),
            Money::from_int(16)
        );
        assert_eq!(
            BucketParams::new(3, 3, 3).unwrap().optimal_welfare(),
            Money::from_int(243)
        );
    }

    #[test]
    fn posted_zero_probability_value() {
        assert_eq!(posted_zero_probability(1, 2), Money::new(1, 2).unwrap());
        assert_eq!(posted_zero_probability(2, 2), Money::new(1, 4).unwrap());
    }

    #[test]
    fn posted_columns_deterministic_and_well_formed() {
        let a = gen_random_posted(2, 2, 2, 64, 9).unwrap();
        let b = gen_random_posted(2, 2, 2, 64, 9).unwrap();
        assert_eq!(a, b);
        for j in 0..a.m {
            let col: Vec<Money> = (0..a.n)
                .map(|i| a.valuations[i].item_value(j).unwrap())
                .collect();
            let zeros = col.iter().filter(|v| v.is_zero()).count();
            if zeros == a.n {
                continue;
            }
            // Exactly one special at c^(k+1), the rest at c^k.
            let max = col.iter().max().unwrap();
            let min = col.iter().min().unwrap();
            assert_eq!(max.as_rational(), min.as_rational() * 2);
            assert_eq!(col.iter().filter(|v| *v == max).count(), 1);
        }
    }

    #[test]
    fn posted_per_item_max_monte_carlo() {
        // Expected per-item maximum is b*c = 4 at b = c = n = 2.
        let inst = gen_random_posted(2, 2, 2, 100_000, 31).unwrap();
        let mut total = 0.0;
        for j in 0..inst.m {
            let max = (0..inst.n)
                .map(|i| inst.valuations[i].item_value(j).unwrap())
                .max()
                .unwrap();
            total += max.to_f64();
        }
        let mean = total / inst.m as f64;
        assert!((mean - 4.0).abs() / 4.0 < 0.02, "mean {mean}");
    }

    #[test]
    fn interest01_bidder_count_and_column_sums() {
        assert_eq!(interest01_bidders(256, 0.25), 8);
        let inst = gen_interest01(64, 0.25, 5).unwrap();
        for j in 0..inst.m {
            let sum: Money = (0..inst.n)
                .map(|i| inst.valuations[i].item_value(j).unwrap())
                .sum();
            assert_eq!(sum, Money::ONE);
        }
        // Optimal welfare is m on every draw.
        let opt = crate::oracles::opt_welfare(&inst).unwrap();
        assert_eq!(opt, Money::from_int(64));
    }

    #[test]
    fn polar_flags_frequency_and_low_value() {
        let inst = gen_polar(4, 25, 77).unwrap();
        for v in &inst.valuations {
            if let Valuation::PolarAdditive { flags } = v {
                for (j, &f) in flags.iter().enumerate() {
                    let val = v.item_value(j).unwrap();
                    if f {
                        assert_eq!(val, Money::ONE);
                    } else {
                        assert_eq!(val, Money::new(1, 25 * 25 * 25).unwrap());
                    }
                }
            } else {
                panic!("polar generator must emit polar valuations");
            }
        }
        // Frequency of set flags approaches 1/n.
        let mut ones = 0usize;
        let mut total = 0usize;
        for t in 0..4000u64 {
            let inst = gen_polar(4, 25, 1000 + t).unwrap();
            for v in &inst.valuations {
                if let Valuation::PolarAdditive { flags } = v {
                    ones += flags.iter().filter(|&&f| f).count();
                    total += flags.len();
                }
            }
        }
        let freq = ones as f64 / total as f64;
        assert!((freq - 0.25).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn polar_single_bidder_all_ones() {
        let inst = gen_polar(1, 6, 3).unwrap();
        let grand = inst.valuations[0].value(&all_items(6)).unwrap();
        assert_eq!(grand, Money::from_int(6));
    }

    #[test]
    fn grand_bundle_bound() {
        let inst = gen_bucket(&BucketParams::new(2, 2, 2).unwrap());
        // Bidder 0: specials 2,2 in bucket 0 (items 0,2), 4 at item 4, plus
        // base values 1,1 (items 1,3) and 2 (item 5): total 12.
        assert_eq!(inst.grand_bundle_bound().unwrap(), Money::from_int(12));
    }
}
