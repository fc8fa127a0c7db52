//! No-regret bidder dynamics over phase-one strategy spaces.
//!
//! Bidders run multiplicative weights (external regret, certifying coarse
//! correlated equilibria) or a swap-regret wrapper around it (certifying
//! correlated equilibria). Payoffs flow through an [`Environment`]; for
//! mechanism play the environment is a precomputed payoff table, so that
//! recorded profiles re-simulate to exactly the recorded utilities.
//!
//! This module is the one place floating point is allowed: utilities are
//! normalized to `[0, 1]` by a per-instance bound `B` recorded in the
//! history for audit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::instances::Instance;
use crate::money::Money;
use crate::rng::{substream, Domain};
use crate::Result;

/// Per-bidder finite lists of phase-one actions.
#[derive(Clone, Debug)]
pub struct StrategySpace<A> {
    pub actions: Vec<Vec<A>>,
}

impl<A: Clone> StrategySpace<A> {
    pub fn uniform(n: usize, actions: Vec<A>) -> Self {
        StrategySpace { actions: vec![actions; n] }
    }

    pub fn max_actions(&self) -> usize {
        self.actions.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// The a-priori-learnability size check: every bidder's strategy list
    /// stays polynomial in `m` (instantiated as `K <= 4 ceil(log2(m+2))^2 + 4`,
    /// generous for the logarithmic bid grids used here).
    pub fn is_apriori_learnable(&self, m: usize) -> bool {
        let log = usize::BITS - (m + 2).leading_zeros();
        self.max_actions() <= 4 * (log as usize).pow(2) + 4
    }
}

/// Geometric bid grid `{0} ∪ {base^t}` spanning the instance's positive item
/// values; size logarithmic in the value range.
pub fn bid_grid(inst: &Instance, base: u64) -> Result<Vec<Money>> {
    if base < 2 {
        return Err(Error::param("grid base must be at least 2"));
    }
    let mut max = Money::ZERO;
    for v in &inst.valuations {
        for j in 0..inst.m {
            max = max.max(v.item_value(j)?);
        }
    }
    let mut grid = vec![Money::ZERO];
    let mut p = Money::ONE;
    while p <= max {
        grid.push(p);
        p = p * Money::from_int(base);
    }
    Ok(grid)
}

/// Full-information feedback for one round.
pub struct RoundFeedback {
    /// `utility_vectors[i][a]`: bidder i's raw utility for playing `a`
    /// against the others' realized actions.
    pub utility_vectors: Vec<Vec<f64>>,
    /// Welfare of the realized profile.
    pub welfare: f64,
}

/// A repeated simultaneous-move game presented to the learners.
pub trait Environment {
    fn num_players(&self) -> usize;
    fn num_actions(&self, player: usize) -> usize;
    fn round(&mut self, t: usize, profile: &[usize]) -> RoundFeedback;
}

/// Dense payoff tables over mixed-radix profile codes.
#[derive(Clone, Debug)]
pub struct TabularGame {
    pub num_actions: Vec<usize>,
    /// `utilities[code][player]`, raw units.
    pub utilities: Vec<Vec<f64>>,
    pub welfare: Vec<f64>,
}

impl TabularGame {
    pub fn profile_code(&self, profile: &[usize]) -> usize {
        let mut code = 0usize;
        for (i, &a) in profile.iter().enumerate().rev() {
            code = code * self.num_actions[i] + a;
        }
        code
    }

    pub fn num_profiles(&self) -> usize {
        self.num_actions.iter().product()
    }

    /// Builds the table from per-player payoff callbacks.
    pub fn build<F>(num_actions: Vec<usize>, mut payoff: F) -> Result<TabularGame>
    where
        F: FnMut(&[usize]) -> Result<(Vec<f64>, f64)>,
    {
        let total: usize = num_actions.iter().product();
        if total == 0 {
            return Err(Error::param("every player needs at least one action"));
        }
        if total > 1_000_000 {
            return Err(Error::Resource(format!("{total} profiles exceed the tabulation bound")));
        }
        let n = num_actions.len();
        let mut utilities = Vec::with_capacity(total);
        let mut welfare = Vec::with_capacity(total);
        let mut profile = vec![0usize; n];
        loop {
            let (u, w) = payoff(&profile)?;
            utilities.push(u);
            welfare.push(w);
            let mut i = 0;
            loop {
                if i == n {
                    return Ok(TabularGame { num_actions, utilities, welfare });
                }
                profile[i] += 1;
                if profile[i] < num_actions[i] {
                    break;
                }
                profile[i] = 0;
                i += 1;
            }
        }
    }

    /// All pure Nash equilibria, by exhaustive deviation checks.
    pub fn pure_nash(&self) -> Vec<Vec<usize>> {
        let n = self.num_actions.len();
        let mut out = Vec::new();
        let mut profile = vec![0usize; n];
        loop {
            let code = self.profile_code(&profile);
            let mut stable = true;
            'outer: for i in 0..n {
                let here = self.utilities[code][i];
                for a in 0..self.num_actions[i] {
                    if a == profile[i] {
                        continue;
                    }
                    let mut dev = profile.clone();
                    dev[i] = a;
                    if self.utilities[self.profile_code(&dev)][i] > here {
                        stable = false;
                        break 'outer;
                    }
                }
            }
            if stable {
                out.push(profile.clone());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return out;
                }
                profile[i] += 1;
                if profile[i] < self.num_actions[i] {
                    break;
                }
                profile[i] = 0;
                i += 1;
            }
        }
    }
}

impl Environment for TabularGame {
    fn num_players(&self) -> usize {
        self.num_actions.len()
    }

    fn num_actions(&self, player: usize) -> usize {
        self.num_actions[player]
    }

    fn round(&mut self, _t: usize, profile: &[usize]) -> RoundFeedback {
        let n = self.num_actions.len();
        let mut vectors = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = Vec::with_capacity(self.num_actions[i]);
            let mut dev = profile.to_vec();
            for a in 0..self.num_actions[i] {
                dev[i] = a;
                v.push(self.utilities[self.profile_code(&dev)][i]);
            }
            vectors.push(v);
        }
        RoundFeedback { utility_vectors: vectors, welfare: self.welfare[self.profile_code(profile)] }
    }
}

/// Payoff table for single-bid play of an instance over a bid grid:
/// utilities are quasi-linear, welfare is the run's welfare, both exact
/// rationals converted once to f64.
pub fn single_bid_game(inst: &Instance, space: &StrategySpace<Money>) -> Result<TabularGame> {
    if space.actions.len() != inst.n {
        return Err(Error::param("strategy space does not match bidder count"));
    }
    let num_actions: Vec<usize> = space.actions.iter().map(Vec::len).collect();
    TabularGame::build(num_actions, |profile| {
        let bids: Vec<Money> = profile
            .iter()
            .enumerate()
            .map(|(i, &a)| space.actions[i][a])
            .collect();
        let out = crate::mechanisms::run_single_bid(&bids, inst)?;
        let mut utils = Vec::with_capacity(inst.n);
        for i in 0..inst.n {
            utils.push(crate::money::rational_to_f64(out.utility(inst, i)?));
        }
        Ok((utils, out.welfare.to_f64()))
    })
}

/// A fixed (oblivious) sequence of utility vectors, for adversarial-regret
/// fixtures. Welfare is reported as the sum of realized utilities.
pub struct SequenceEnv {
    /// `vectors[t][player][action]`.
    pub vectors: Vec<Vec<Vec<f64>>>,
}

impl Environment for SequenceEnv {
    fn num_players(&self) -> usize {
        self.vectors[0].len()
    }

    fn num_actions(&self, player: usize) -> usize {
        self.vectors[0][player].len()
    }

    fn round(&mut self, t: usize, profile: &[usize]) -> RoundFeedback {
        let vectors = self.vectors[t].clone();
        let welfare = vectors
            .iter()
            .zip(profile)
            .map(|(v, &a)| v[a])
            .sum();
        RoundFeedback { utility_vectors: vectors, welfare }
    }
}

/// Which learner produced a history.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Algorithm {
    Hedge,
    SwapRegret,
}

impl Algorithm {
    /// The equilibrium class certified by vanishing regret of this kind.
    pub fn equilibrium_class(self) -> &'static str {
        match self {
            Algorithm::Hedge => "coarse-correlated",
            Algorithm::SwapRegret => "correlated",
        }
    }
}

/// Full record of a dynamics run.
///
/// `profiles`, `utilities` (realized, raw) and `welfare` are the compact
/// trajectory; `mixtures` and `utility_vectors` carry the audit trail needed
/// to recompute regrets. `accounting` is the running tally the loop itself
/// maintained; audits recomputed from the trail must match it exactly.
pub struct PlayHistory {
    pub algorithm: Algorithm,
    pub eta: Vec<f64>,
    pub bound: f64,
    pub profiles: Vec<Vec<usize>>,
    pub utilities: Vec<Vec<f64>>,
    pub welfare: Vec<f64>,
    pub mixtures: Vec<Vec<Vec<f64>>>,
    pub utility_vectors: Vec<Vec<Vec<f64>>>,
    pub accounting: RegretAccounting,
}

/// Running regret tallies in raw utility units.
#[derive(Clone, Debug, Default)]
pub struct RegretAccounting {
    /// `cumulative_action_gain[i][a] = sum_t u_t[i][a]`.
    pub cumulative_action_gain: Vec<Vec<f64>>,
    /// `cumulative_expected_gain[i] = sum_t <p_t[i], u_t[i]>`.
    pub cumulative_expected_gain: Vec<f64>,
    /// `cumulative_pair_gain[i][a][b] = sum_t p_t[i][a] * u_t[i][b]`.
    pub cumulative_pair_gain: Vec<Vec<Vec<f64>>>,
}

impl RegretAccounting {
    fn new(num_actions: &[usize]) -> Self {
        RegretAccounting {
            cumulative_action_gain: num_actions.iter().map(|&k| vec![0.0; k]).collect(),
            cumulative_expected_gain: vec![0.0; num_actions.len()],
            cumulative_pair_gain: num_actions.iter().map(|&k| vec![vec![0.0; k]; k]).collect(),
        }
    }

    fn absorb(&mut self, player: usize, mixture: &[f64], vector: &[f64]) {
        for (a, &u) in vector.iter().enumerate() {
            self.cumulative_action_gain[player][a] += u;
        }
        self.cumulative_expected_gain[player] += dot(mixture, vector);
        for (a, &p) in mixture.iter().enumerate() {
            for (b, &u) in vector.iter().enumerate() {
                self.cumulative_pair_gain[player][a][b] += p * u;
            }
        }
    }

    pub fn external_regret(&self, player: usize) -> f64 {
        let best = self.cumulative_action_gain[player]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &g| m.max(g));
        best - self.cumulative_expected_gain[player]
    }

    pub fn swap_regret(&self, player: usize) -> f64 {
        self.cumulative_pair_gain[player]
            .iter()
            .enumerate()
            .map(|(a, row)| {
                let best = row.iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g));
                best - row[a]
            })
            .sum()
    }
}

fn dot(p: &[f64], u: &[f64]) -> f64 {
    p.iter().zip(u).map(|(a, b)| a * b).sum()
}

/// Multiplicative-weights learner over normalized gains, in log space so
/// long horizons cannot overflow the weights.
struct HedgeCore {
    eta: f64,
    log_weights: Vec<f64>,
}

impl HedgeCore {
    fn new(k: usize, eta: f64) -> Self {
        HedgeCore { eta, log_weights: vec![0.0; k] }
    }

    fn distribution(&self) -> Vec<f64> {
        let max = self.log_weights.iter().fold(f64::NEG_INFINITY, |m, &w| m.max(w));
        let mut p: Vec<f64> = self.log_weights.iter().map(|&w| (w - max).exp()).collect();
        let sum: f64 = p.iter().sum();
        for x in &mut p {
            *x /= sum;
        }
        p
    }

    fn update(&mut self, gains: &[f64]) {
        for (w, &g) in self.log_weights.iter_mut().zip(gains) {
            *w += self.eta * g;
        }
    }
}

enum Learner {
    Hedge(HedgeCore),
    Swap {
        experts: Vec<HedgeCore>,
        current: Vec<f64>,
    },
}

impl Learner {
    fn new(algorithm: Algorithm, k: usize, eta: f64) -> Learner {
        match algorithm {
            Algorithm::Hedge => Learner::Hedge(HedgeCore::new(k, eta)),
            Algorithm::SwapRegret => Learner::Swap {
                experts: (0..k).map(|_| HedgeCore::new(k, eta)).collect(),
                current: vec![1.0 / k as f64; k],
            },
        }
    }

    fn distribution(&mut self) -> Vec<f64> {
        match self {
            Learner::Hedge(core) => core.distribution(),
            Learner::Swap { experts, current } => {
                let rows: Vec<Vec<f64>> = experts.iter().map(HedgeCore::distribution).collect();
                *current = stationary_distribution(&rows);
                current.clone()
            }
        }
    }

    /// `gains` must already be normalized to `[0, 1]`.
    fn update(&mut self, mixture: &[f64], gains: &[f64]) {
        match self {
            Learner::Hedge(core) => core.update(gains),
            Learner::Swap { experts, .. } => {
                // Blum-Mansour: expert a sees the gains scaled by the
                // probability the wrapper placed on a this round.
                for (a, expert) in experts.iter_mut().enumerate() {
                    let scaled: Vec<f64> = gains.iter().map(|&g| mixture[a] * g).collect();
                    expert.update(&scaled);
                }
            }
        }
    }
}

/// Stationary distribution of a row-stochastic matrix with strictly positive
/// rows, by power iteration. Deterministic: fixed start, fixed tolerance.
fn stationary_distribution(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..10_000 {
        let mut next = vec![0.0; k];
        for (a, row) in rows.iter().enumerate() {
            for (b, &q) in row.iter().enumerate() {
                next[b] += pi[a] * q;
            }
        }
        let sum: f64 = next.iter().sum();
        for x in &mut next {
            *x /= sum;
        }
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-13 {
            break;
        }
    }
    pi
}

fn run_dynamics(
    algorithm: Algorithm,
    env: &mut dyn Environment,
    bound: f64,
    rounds: usize,
    seed: u64,
) -> Result<PlayHistory> {
    if rounds == 0 {
        return Err(Error::param("need at least one round"));
    }
    if !bound.is_finite() || bound <= 0.0 {
        return Err(Error::param("utility bound must be positive"));
    }
    let n = env.num_players();
    let num_actions: Vec<usize> = (0..n).map(|i| env.num_actions(i)).collect();
    if num_actions.contains(&0) {
        return Err(Error::param("every player needs at least one action"));
    }
    let eta: Vec<f64> = num_actions
        .iter()
        .map(|&k| ((k as f64).ln() / rounds as f64).sqrt())
        .collect();
    let mut learners: Vec<Learner> = num_actions
        .iter()
        .zip(&eta)
        .map(|(&k, &e)| Learner::new(algorithm, k, e))
        .collect();
    let mut rng = substream(seed, Domain::Learning, 0);

    let mut history = PlayHistory {
        algorithm,
        eta,
        bound,
        profiles: Vec::with_capacity(rounds),
        utilities: Vec::with_capacity(rounds),
        welfare: Vec::with_capacity(rounds),
        mixtures: Vec::with_capacity(rounds),
        utility_vectors: Vec::with_capacity(rounds),
        accounting: RegretAccounting::new(&num_actions),
    };

    for t in 0..rounds {
        let mixtures: Vec<Vec<f64>> = learners.iter_mut().map(Learner::distribution).collect();
        let profile: Vec<usize> = mixtures.iter().map(|p| sample(p, &mut rng)).collect();
        let feedback = env.round(t, &profile);
        debug_assert_eq!(feedback.utility_vectors.len(), n);

        for i in 0..n {
            let vector = &feedback.utility_vectors[i];
            debug_assert!(
                vector.iter().all(|&u| -1e-9 <= u && u <= bound * (1.0 + 1e-9)),
                "raw utility outside [0, B]"
            );
            history.accounting.absorb(i, &mixtures[i], vector);
            let gains: Vec<f64> = vector.iter().map(|&u| (u / bound).clamp(0.0, 1.0)).collect();
            learners[i].update(&mixtures[i], &gains);
        }

        history
            .utilities
            .push((0..n).map(|i| feedback.utility_vectors[i][profile[i]]).collect());
        history.welfare.push(feedback.welfare);
        history.profiles.push(profile);
        history.utility_vectors.push(feedback.utility_vectors);
        history.mixtures.push(mixtures);
    }
    Ok(history)
}

fn sample(p: &[f64], rng: &mut impl Rng) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &q) in p.iter().enumerate() {
        acc += q;
        if r < acc {
            return a;
        }
    }
    p.len() - 1
}

/// Runs multiplicative weights for every player with rate
/// `eta = sqrt(ln K / T)` on utilities normalized by `bound`.
pub fn run_hedge(
    env: &mut dyn Environment,
    bound: f64,
    rounds: usize,
    seed: u64,
) -> Result<PlayHistory> {
    run_dynamics(Algorithm::Hedge, env, bound, rounds, seed)
}

/// Runs the swap-regret wrapper (one external-regret learner per own
/// action, combined through the stationary distribution of the induced
/// row-stochastic matrix).
pub fn run_swap_regret(
    env: &mut dyn Environment,
    bound: f64,
    rounds: usize,
    seed: u64,
) -> Result<PlayHistory> {
    run_dynamics(Algorithm::SwapRegret, env, bound, rounds, seed)
}

/// Total external regret of `player`, recomputed from the recorded trail.
pub fn external_regret(history: &PlayHistory, player: usize) -> f64 {
    let k = history.utility_vectors[0][player].len();
    let mut action_gain = vec![0.0; k];
    let mut expected = 0.0;
    for t in 0..history.profiles.len() {
        let vector = &history.utility_vectors[t][player];
        for (a, &u) in vector.iter().enumerate() {
            action_gain[a] += u;
        }
        expected += dot(&history.mixtures[t][player], vector);
    }
    let best = action_gain.iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g));
    best - expected
}

/// Total swap regret of `player`, recomputed from the recorded trail.
pub fn swap_regret(history: &PlayHistory, player: usize) -> f64 {
    let k = history.utility_vectors[0][player].len();
    let mut pair = vec![vec![0.0; k]; k];
    for t in 0..history.profiles.len() {
        let vector = &history.utility_vectors[t][player];
        let mixture = &history.mixtures[t][player];
        for (a, &p) in mixture.iter().enumerate() {
            for (b, &u) in vector.iter().enumerate() {
                pair[a][b] += p * u;
            }
        }
    }
    pair.iter()
        .enumerate()
        .map(|(a, row)| {
            let best = row.iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g));
            best - row[a]
        })
        .sum()
}

/// OPT divided by the time-averaged welfare over the last half of the
/// history; infinite when that average is zero.
pub fn empirical_poa(history: &PlayHistory, inst: &Instance) -> Result<f64> {
    if history.welfare.is_empty() {
        return Err(Error::param("history is empty"));
    }
    let opt = crate::oracles::opt_welfare(inst)?.to_f64();
    let tail = &history.welfare[history.welfare.len() / 2..];
    let avg = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(if avg == 0.0 { f64::INFINITY } else { opt / avg })
}

/// Empirical joint-action frequency over the whole history, indexed by the
/// tabular profile code.
pub fn empirical_joint(history: &PlayHistory, num_actions: &[usize]) -> Vec<f64> {
    let total: usize = num_actions.iter().product();
    let mut freq = vec![0.0; total];
    for profile in &history.profiles {
        let mut code = 0usize;
        for (i, &a) in profile.iter().enumerate().rev() {
            code = code * num_actions[i] + a;
        }
        freq[code] += 1.0;
    }
    for f in &mut freq {
        *f /= history.profiles.len() as f64;
    }
    freq
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matching_pennies() -> TabularGame {
        // Player 0 wants to match, player 1 to mismatch; payoffs in [0, 1].
        TabularGame::build(vec![2, 2], |p| {
            let matched = p[0] == p[1];
            Ok((vec![matched as u8 as f64, (!matched) as u8 as f64], 0.0))
        })
        .unwrap()
    }

    fn dominant_game() -> TabularGame {
        // Action 1 of player 0 strictly dominates; player 1 indifferent.
        TabularGame::build(vec![2, 2], |p| {
            let u0 = if p[0] == 1 { 1.0 } else { 0.2 };
            Ok((vec![u0, 0.5], u0))
        })
        .unwrap()
    }

    #[test]
    fn rejects_zero_rounds() {
        let mut g = dominant_game();
        assert!(run_hedge(&mut g, 1.0, 0, 0).is_err());
    }

    #[test]
    fn hedge_converges_to_dominant_strategy() {
        let mut g = dominant_game();
        let h = run_hedge(&mut g, 1.0, 10_000, 1).unwrap();
        let tail = &h.profiles[5_000..];
        let freq = tail.iter().filter(|p| p[0] == 1).count() as f64 / tail.len() as f64;
        assert!(freq >= 0.99, "dominant frequency {freq}");
    }

    #[test]
    fn swap_converges_to_dominant_strategy() {
        let mut g = dominant_game();
        let h = run_swap_regret(&mut g, 1.0, 10_000, 2).unwrap();
        let tail = &h.profiles[5_000..];
        let freq = tail.iter().filter(|p| p[0] == 1).count() as f64 / tail.len() as f64;
        assert!(freq >= 0.99, "dominant frequency {freq}");
    }

    #[test]
    fn hedge_matching_pennies_marginals_near_uniform() {
        let mut g = matching_pennies();
        let h = run_hedge(&mut g, 1.0, 100_000, 3).unwrap();
        for i in 0..2 {
            let freq =
                h.profiles.iter().filter(|p| p[i] == 0).count() as f64 / h.profiles.len() as f64;
            assert!((freq - 0.5).abs() <= 0.05, "player {i} marginal {freq}");
        }
    }

    #[test]
    fn audits_match_internal_accounting_exactly() {
        let mut g = matching_pennies();
        let h = run_swap_regret(&mut g, 1.0, 2_000, 4).unwrap();
        for i in 0..2 {
            assert_eq!(external_regret(&h, i), h.accounting.external_regret(i));
            assert_eq!(swap_regret(&h, i), h.accounting.swap_regret(i));
        }
        let hh = run_hedge(&mut g, 1.0, 2_000, 5).unwrap();
        for i in 0..2 {
            assert_eq!(external_regret(&hh, i), hh.accounting.external_regret(i));
        }
    }

    #[test]
    fn recorded_profiles_resimulate_exactly() {
        let mut g = dominant_game();
        let h = run_hedge(&mut g, 1.0, 500, 6).unwrap();
        for t in 0..h.profiles.len() {
            let code = g.profile_code(&h.profiles[t]);
            for i in 0..2 {
                assert_eq!(h.utilities[t][i], g.utilities[code][i]);
            }
            assert_eq!(h.welfare[t], g.welfare[code]);
        }
    }

    #[test]
    fn swap_play_converges_to_the_unique_correlated_equilibrium() {
        // Matching pennies has a unique correlated equilibrium. Oracle: an
        // exhaustive small-support grid search (denominator 20) over joint
        // distributions keeps only those satisfying every swap constraint;
        // all survivors must sit at the uniform point.
        let u0 = |a: usize, b: usize| if a == b { 1i64 } else { 0 };
        let mut ce_points: Vec<[i64; 4]> = Vec::new();
        let d = 20i64;
        for w in 0..=d {
            for x in 0..=d - w {
                for y in 0..=d - w - x {
                    let z = d - w - x - y;
                    // mu = (mu00, mu01, mu10, mu11) scaled by d.
                    let mu = [w, x, y, z];
                    let mut ok = true;
                    for a in 0..2usize {
                        for a2 in 0..2usize {
                            if a == a2 {
                                continue;
                            }
                            // player 0 switching a -> a2
                            let gain: i64 = (0..2)
                                .map(|b| mu[a * 2 + b] * (u0(a2, b) - u0(a, b)))
                                .sum();
                            ok &= gain <= 0;
                            // player 1 switching a -> a2 (payoff 1 - u0)
                            let gain: i64 = (0..2)
                                .map(|b| mu[b * 2 + a] * ((1 - u0(b, a2)) - (1 - u0(b, a))))
                                .sum();
                            ok &= gain <= 0;
                        }
                    }
                    if ok {
                        ce_points.push(mu);
                    }
                }
            }
        }
        // The grid search isolates exactly the uniform distribution.
        assert_eq!(ce_points, vec![[5, 5, 5, 5]]);

        let mut g = matching_pennies();
        let h = run_swap_regret(&mut g, 1.0, 100_000, 12).unwrap();
        let joint = empirical_joint(&h, &[2, 2]);
        let tv: f64 = joint.iter().map(|&p| (p - 0.25).abs()).sum::<f64>() / 2.0;
        assert!(tv <= 0.1, "total variation {tv} from the unique CE");
    }

    #[test]
    fn stationary_distribution_of_known_chain() {
        // Two-state chain with P = [[0.5, 0.5], [0.25, 0.75]]:
        // stationary (1/3, 2/3).
        let pi = stationary_distribution(&[vec![0.5, 0.5], vec![0.25, 0.75]]);
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn pure_nash_enumeration() {
        let g = dominant_game();
        let nash = g.pure_nash();
        // (1, *) for both of player 1's actions.
        assert_eq!(nash, vec![vec![1, 0], vec![1, 1]]);
        assert!(matching_pennies().pure_nash().is_empty());
    }

    #[test]
    fn empirical_poa_of_replayed_optimum() {
        use crate::valuations::Valuation;
        let inst = Instance::new(vec![Valuation::Additive {
            values: vec![Money::from_int(2), Money::from_int(3)],
        }])
        .unwrap();
        let space = StrategySpace::uniform(1, vec![Money::ZERO]);
        let mut game = single_bid_game(&inst, &space).unwrap();
        let h = run_hedge(&mut game, 5.0, 100, 7).unwrap();
        assert_eq!(empirical_poa(&h, &inst).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_single_strategy_game_ratio() {
        use crate::valuations::Valuation;
        // One bidder, forced bid above its values: welfare 0, infinite ratio.
        let inst = Instance::new(vec![Valuation::Additive {
            values: vec![Money::from_int(2)],
        }])
        .unwrap();
        let space = StrategySpace::uniform(1, vec![Money::from_int(100)]);
        let mut game = single_bid_game(&inst, &space).unwrap();
        let h = run_hedge(&mut game, 2.0, 100, 8).unwrap();
        assert_eq!(empirical_poa(&h, &inst).unwrap(), f64::INFINITY);
    }

    #[test]
    fn bid_grid_spans_value_range() {
        use crate::instances::{gen_bucket, BucketParams};
        let inst = gen_bucket(&BucketParams::new(3, 3, 3).unwrap());
        let grid = bid_grid(&inst, 3).unwrap();
        // Item values run up to the top special value c^b = 27.
        let expect: Vec<Money> = [0u64, 1, 3, 9, 27].into_iter().map(Money::from_int).collect();
        assert_eq!(grid, expect);
        let space = StrategySpace::uniform(inst.n, grid);
        assert!(space.is_apriori_learnable(inst.m));
    }
}
