//! Truthful phase-two mechanisms.
//!
//! Each runner takes a spec and an [`Instance`], simulates truthful
//! (demand-oracle) bidder behavior, and returns an [`Outcome`]: a disjoint
//! allocation, non-negative payments, and the exact welfare.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instances::Instance;
use crate::items::{self, ItemSet};
use crate::money::{Money, Rational, ThresholdPrice};
use crate::rng::{substream, Domain};
use crate::shattering::AllocationFamily;
use crate::valuations::{self, Valuation};
use crate::Result;

/// A single-price mechanism: visit bidders in `order`, offering each all
/// remaining items at its per-bidder threshold price.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SinglePriceSpec {
    /// Bidder indices in visit sequence.
    pub order: Vec<usize>,
    /// Per-bidder uniform price, indexed by bidder (not by visit position).
    pub prices: Vec<ThresholdPrice>,
}

/// A non-adaptive posted-price mechanism: per-(bidder, item) prices.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PostedPriceSpec {
    pub order: Vec<usize>,
    /// `prices[bidder][item]`.
    pub prices: Vec<Vec<Money>>,
}

/// Result of a mechanism run.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Outcome {
    pub allocation: Vec<ItemSet>,
    pub payments: Vec<Money>,
    pub welfare: Money,
}

impl Outcome {
    /// Builds an outcome from an allocation, checking disjointness and
    /// computing the exact welfare against the instance.
    pub fn new(inst: &Instance, allocation: Vec<ItemSet>, payments: Vec<Money>) -> Result<Outcome> {
        if allocation.len() != inst.n || payments.len() != inst.n {
            return Err(Error::param("outcome dimensions do not match instance"));
        }
        check_disjoint(&allocation)?;
        let welfare = allocation
            .iter()
            .zip(&inst.valuations)
            .map(|(set, v)| v.value(set))
            .sum::<Result<Money>>()?;
        Ok(Outcome { allocation, payments, welfare })
    }

    /// Structural re-validation for deserialized outcomes (the welfare field
    /// needs the instance to re-check; disjointness and sign do not).
    pub fn validate_structure(&self) -> Result<()> {
        check_disjoint(&self.allocation)
    }

    /// Quasi-linear utility of `bidder` under its true valuation.
    pub fn utility(&self, inst: &Instance, bidder: usize) -> Result<Rational> {
        let v = inst.valuations[bidder].value(&self.allocation[bidder])?;
        Ok(v.as_rational() - self.payments[bidder].as_rational())
    }
}

fn check_disjoint(allocation: &[ItemSet]) -> Result<()> {
    let mut seen = ItemSet::new();
    for set in allocation {
        for &j in set {
            if !seen.insert(j) {
                return Err(Error::param(format!("item {j} allocated twice")));
            }
        }
    }
    Ok(())
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::param("order length does not match bidder count"));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::param("order is not a permutation of the bidders"));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Runs a single-price mechanism: each visited bidder buys its demanded
/// bundle from the remaining items at its uniform price and pays
/// `price * |bundle|`.
pub fn run_single_price(spec: &SinglePriceSpec, inst: &Instance) -> Result<Outcome> {
    check_order(&spec.order, inst.n)?;
    if spec.prices.len() != inst.n {
        return Err(Error::param("price vector length does not match bidder count"));
    }
    let mut remaining = items::all_items(inst.m);
    let mut allocation = vec![ItemSet::new(); inst.n];
    let mut payments = vec![Money::ZERO; inst.n];
    for &bidder in &spec.order {
        let price = spec.prices[bidder];
        let bundle = valuations::demand_uniform(&inst.valuations[bidder], price, &remaining)?;
        for &j in &bundle {
            remaining.remove(&j);
        }
        payments[bidder] = price.value.scale(bundle.len());
        allocation[bidder] = bundle;
    }
    Outcome::new(inst, allocation, payments)
}

/// Runs a non-adaptive posted-price mechanism.
pub fn run_posted_price(spec: &PostedPriceSpec, inst: &Instance) -> Result<Outcome> {
    check_order(&spec.order, inst.n)?;
    if spec.prices.len() != inst.n || spec.prices.iter().any(|row| row.len() != inst.m) {
        return Err(Error::param("price matrix does not match instance dimensions"));
    }
    let mut remaining = items::all_items(inst.m);
    let mut allocation = vec![ItemSet::new(); inst.n];
    let mut payments = vec![Money::ZERO; inst.n];
    for &bidder in &spec.order {
        let row = &spec.prices[bidder];
        let bundle = valuations::demand(&inst.valuations[bidder], row, &remaining)?;
        for &j in &bundle {
            remaining.remove(&j);
        }
        payments[bidder] = bundle.iter().map(|&j| row[j as usize]).sum();
        allocation[bidder] = bundle;
    }
    Outcome::new(inst, allocation, payments)
}

/// Runs the single-bid mechanism: bidders sorted by decreasing bid (ties
/// toward the lower index) and visited at their own bid per item.
pub fn run_single_bid(bids: &[Money], inst: &Instance) -> Result<Outcome> {
    if bids.len() != inst.n {
        return Err(Error::param("bid vector length does not match bidder count"));
    }
    let mut order: Vec<usize> = (0..inst.n).collect();
    order.sort_by(|&a, &b| bids[b].cmp(&bids[a]).then(a.cmp(&b)));
    let spec = SinglePriceSpec {
        order,
        prices: bids.iter().map(|&b| ThresholdPrice::inclusive(b)).collect(),
    };
    run_single_price(&spec, inst)
}

/// Numerator and denominator of the fixed rational approximation of 1/e used
/// for the secretary cutoff, so results are platform-independent.
pub const INV_E_NUMER: u64 = 367_879_441;
pub const INV_E_DENOM: u64 = 1_000_000_000;

/// `floor(n / e)` under the fixed 1/e approximation.
pub fn secretary_cutoff(n: usize) -> usize {
    (n as u128 * INV_E_NUMER as u128 / INV_E_DENOM as u128) as usize
}

/// The secretary stopping rule on one item: observe the first `cutoff`
/// arrivals, then sell to the first arrival whose value meets the maximum
/// observed (0 if nothing was observed). Returns the buying arrival
/// position, if any.
pub fn secretary_select(values_in_arrival_order: &[Money], cutoff: usize) -> Option<usize> {
    let threshold: Money = values_in_arrival_order[..cutoff]
        .iter()
        .copied()
        .max()
        .unwrap_or(Money::ZERO);
    (cutoff..values_in_arrival_order.len()).find(|&pos| values_in_arrival_order[pos] >= threshold)
}

/// Runs the secretary-style adaptive posted-price mechanism on an additive
/// instance.
///
/// Per item, independently: bidders arrive in a uniformly random order drawn
/// from `substream(arrival_seed, SecretaryItem, item)`. The first
/// `floor(n/e)` arrivals are observed (prohibitive price, values recorded);
/// afterwards the item is offered at the maximum observed value (0 if the
/// observation phase is empty) and the first bidder whose value meets the
/// price buys. A bidder's own price never depends on its own report, only on
/// earlier arrivals', which is what makes the mechanism truthful.
pub fn run_secretary(inst: &Instance, arrival_seed: u64) -> Result<Outcome> {
    if !inst.is_additive_form() {
        return Err(Error::UnsupportedValuation(
            "secretary mechanism requires additive valuations".into(),
        ));
    }
    let cutoff = secretary_cutoff(inst.n);
    let mut allocation = vec![ItemSet::new(); inst.n];
    let mut payments = vec![Money::ZERO; inst.n];
    for j in 0..inst.m {
        let mut order: Vec<usize> = (0..inst.n).collect();
        let mut rng = substream(arrival_seed, Domain::SecretaryItem, j as u64);
        order.shuffle(&mut rng);
        let values: Vec<Money> = order
            .iter()
            .map(|&i| inst.valuations[i].item_value(j))
            .collect::<Result<_>>()?;
        if let Some(pos) = secretary_select(&values, cutoff) {
            let threshold: Money =
                values[..cutoff].iter().copied().max().unwrap_or(Money::ZERO);
            allocation[order[pos]].insert(j as u16);
            payments[order[pos]] += threshold;
        }
    }
    Outcome::new(inst, allocation, payments)
}

/// Runs the maximal-in-range mechanism: exact welfare maximization over the
/// range (ties to the first member in the family's canonical order) with
/// Clarke-pivot payments computed within the range.
pub fn run_mir(range: &AllocationFamily, inst: &Instance) -> Result<Outcome> {
    if range.is_empty() {
        return Err(Error::param("maximal-in-range needs a nonempty range"));
    }
    if range.d != 1 {
        return Err(Error::param("auction semantics require duplication bound d = 1"));
    }
    if range.x_size != inst.m || range.y_size != inst.n {
        return Err(Error::param("range dimensions do not match instance"));
    }
    let member_welfare = |member: &crate::shattering::Allocation,
                          skip: Option<usize>|
     -> Result<Money> {
        member
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(i, part)| inst.valuations[i].value(part))
            .sum()
    };

    let mut best_idx = 0usize;
    let mut best = member_welfare(&range.members()[0], None)?;
    for (idx, member) in range.members().iter().enumerate().skip(1) {
        let w = member_welfare(member, None)?;
        if w > best {
            best = w;
            best_idx = idx;
        }
    }
    let chosen = &range.members()[best_idx];

    let mut payments = vec![Money::ZERO; inst.n];
    for (i, payment) in payments.iter_mut().enumerate() {
        let mut others_best = Money::ZERO;
        for member in range.members() {
            others_best = others_best.max(member_welfare(member, Some(i))?);
        }
        let others_at_chosen = member_welfare(chosen, Some(i))?;
        *payment = others_best
            .checked_sub(others_at_chosen)
            .expect("pivot welfare dominates");
    }
    Outcome::new(inst, chosen.clone(), payments)
}

/// Serializable description of any implemented mechanism, for the CLI and
/// for menu extraction.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum MechanismSpec {
    SinglePrice(SinglePriceSpec),
    PostedPrice(PostedPriceSpec),
    SingleBid { bids: Vec<Money> },
    Secretary { arrival_seed: u64 },
    Mir { range: AllocationFamily },
}

impl MechanismSpec {
    pub fn run(&self, inst: &Instance) -> Result<Outcome> {
        match self {
            MechanismSpec::SinglePrice(spec) => run_single_price(spec, inst),
            MechanismSpec::PostedPrice(spec) => run_posted_price(spec, inst),
            MechanismSpec::SingleBid { bids } => run_single_bid(bids, inst),
            MechanismSpec::Secretary { arrival_seed } => run_secretary(inst, *arrival_seed),
            MechanismSpec::Mir { range } => run_mir(range, inst),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::SinglePrice(_) => "single-price",
            MechanismSpec::PostedPrice(_) => "posted-price",
            MechanismSpec::SingleBid { .. } => "single-bid",
            MechanismSpec::Secretary { .. } => "secretary",
            MechanismSpec::Mir { .. } => "mir",
        }
    }
}

/// A profitable misreport found by [`check_truthful`].
#[derive(Clone, Debug)]
pub struct TruthfulnessViolation {
    pub bidder: usize,
    pub misreport: Valuation,
    pub truthful_utility: Rational,
    pub deviant_utility: Rational,
}

/// Recomputes the outcome under every listed misreport of every bidder and
/// flags each case where the deviant utility (measured with the true
/// valuation) strictly exceeds the truthful one. Empty for truthful
/// mechanisms.
pub fn check_truthful<F>(
    run: F,
    inst: &Instance,
    deviations: &[Vec<Valuation>],
) -> Result<Vec<TruthfulnessViolation>>
where
    F: Fn(&Instance) -> Result<Outcome>,
{
    if deviations.len() != inst.n {
        return Err(Error::param("deviation lists must cover every bidder"));
    }
    let truthful = run(inst)?;
    let mut violations = Vec::new();
    for (bidder, devs) in deviations.iter().enumerate() {
        let truthful_utility = truthful.utility(inst, bidder)?;
        for misreport in devs {
            if misreport.num_items() != inst.m {
                return Err(Error::param("misreport item count does not match instance"));
            }
            let mut reported = inst.clone();
            reported.valuations[bidder] = misreport.clone();
            let outcome = run(&reported)?;
            let value = inst.valuations[bidder].value(&outcome.allocation[bidder])?;
            let deviant_utility = value.as_rational() - outcome.payments[bidder].as_rational();
            if deviant_utility > truthful_utility {
                violations.push(TruthfulnessViolation {
                    bidder,
                    misreport: misreport.clone(),
                    truthful_utility,
                    deviant_utility,
                });
            }
        }
    }
    Ok(violations)
}
