//! Named, reproducible experiment pipelines.
//!
//! Every experiment is a pure function of (config, seed): all randomness
//! flows through documented substreams, so reruns produce byte-identical
//! outputs. Assertion-style experiments return [`CliError::Assertion`]
//! (process exit 2) on any violated identity, so CI can gate on them.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;
use serde::Serialize;

use mechlab_core::instances::{gen_bucket, gen_polar, BucketParams};
use mechlab_core::items::ItemSet;
use mechlab_core::learning::{
    bid_grid, empirical_poa, run_swap_regret, single_bid_game, swap_regret, StrategySpace,
};
use mechlab_core::mechanisms::{MechanismSpec, PostedPriceSpec, SinglePriceSpec};
use mechlab_core::menus::{
    extract_menu, find_structured_submenus, polar_event_check, validate_structured_submenu,
};
use mechlab_core::money::{Money, ThresholdPrice};
use mechlab_core::oracles::{
    best_single_price, bucket_level_counts, bucket_welfare_identity, for_each_single_price_spec,
    opt_welfare, posted_column_expectation, special_pair_count, OrderPolicy,
};
use mechlab_core::rng::{substream, Domain};
use mechlab_core::shattering::{sauer_shelah_check, Allocation, AllocationFamily, FunctionFamily};
use mechlab_core::Error;

use crate::io;
use crate::{CliError, CliResult};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Overrides the experiment's default round count (learning pipelines).
    pub rounds: Option<usize>,
    /// Overrides the experiment's default trial count (Monte Carlo pipelines).
    pub trials: Option<usize>,
    pub budget: Option<u64>,
}

pub const EXPERIMENT_NAMES: &[&str] = &[
    "bucket-sweep",
    "posted-formula",
    "single-bid-poa",
    "sauer-exhaustive",
    "menus-polar",
];

/// Runs a registered experiment; returns the one-line summary. The result
/// document goes to `config.out` (or stdout when absent).
pub fn run_experiment(config: &ExperimentConfig) -> CliResult<String> {
    match config.name.as_str() {
        "bucket-sweep" => bucket_sweep(config),
        "posted-formula" => posted_formula(config),
        "single-bid-poa" => single_bid_poa(config),
        "sauer-exhaustive" => sauer_exhaustive(config),
        "menus-polar" => menus_polar(config),
        other => Err(CliError::usage(format!(
            "unknown experiment {other:?}; registered: {}",
            EXPERIMENT_NAMES.join(", ")
        ))),
    }
}

fn emit_result(config: &ExperimentConfig, content: &str) -> CliResult<()> {
    io::emit(config.out.as_deref(), content)
}

#[derive(Serialize)]
struct BucketRow {
    b: u32,
    c: u64,
    n: usize,
    m: usize,
    opt: Money,
    best_single_price: Money,
    ratio: String,
}

/// Bucket constructions: exhaustive single-price search, the ratio table,
/// and the special-pair counting identities over the full grid.
fn bucket_sweep(config: &ExperimentConfig) -> CliResult<String> {
    let mut rows = Vec::new();
    for (b, c, n) in [(2u32, 2u64, 2usize), (3, 3, 3)] {
        let params = BucketParams::new(b, c, n).map_err(CliError::from)?;
        let inst = gen_bucket(&params);
        let opt = opt_welfare(&inst)?;
        let report = best_single_price(&inst, OrderPolicy::All, config.budget)?;
        // Counting identities over every spec of the grid.
        let bound = b as usize + n;
        for_each_single_price_spec(&inst, OrderPolicy::All, |spec, out| {
            let pairs = special_pair_count(out, &params)?;
            if pairs > bound {
                return Err(Error::Param(format!(
                    "counting lemma violated: {pairs} special pairs > {bound}"
                )));
            }
            let level_sum: usize = bucket_level_counts(spec, &params).iter().flatten().sum();
            if level_sum > n {
                return Err(Error::Param(format!("level counts sum {level_sum} > n = {n}")));
            }
            let sold_out = spec.order.iter().any(|&i| spec.prices[i].buys_at(Money::ONE));
            if sold_out && out.welfare != bucket_welfare_identity(&params, pairs) {
                return Err(Error::Param("welfare identity violated".into()));
            }
            Ok(())
        })
        .map_err(|e| CliError::Assertion(e.to_string()))?;

        let ratio = opt.as_rational() / report.best_welfare.as_rational();
        rows.push(BucketRow {
            b,
            c,
            n,
            m: inst.m,
            opt,
            best_single_price: report.best_welfare,
            ratio: format!("{}/{}", ratio.numer(), ratio.denom()),
        });
    }

    let content = match config.format {
        OutputFormat::Json => io::to_json(&rows),
        OutputFormat::Csv => {
            let mut s = String::from("mechlab.bucket_sweep.v1,b,c,n,m,opt,best,ratio\n");
            for r in &rows {
                writeln!(
                    s,
                    "row,{},{},{},{},{},{},{}",
                    r.b, r.c, r.n, r.m, r.opt, r.best_single_price, r.ratio
                )
                .unwrap();
            }
            s
        }
    };
    emit_result(config, &content)?;
    Ok(format!(
        "bucket-sweep: {} parameter sets, counting identities verified on the full grid",
        rows.len()
    ))
}

#[derive(Serialize)]
struct PostedFormulaSummary {
    columns: usize,
    mismatches: usize,
    bound_violations: usize,
    configurations: Vec<String>,
}

/// Random posted-price columns: the exhaustive expectation must equal the
/// per-level closed form whenever every level is defined, and stay within
/// the upper bound always.
fn posted_formula(config: &ExperimentConfig) -> CliResult<String> {
    let per_config = config.trials.unwrap_or(1000);
    let mut summary = PostedFormulaSummary {
        columns: 0,
        mismatches: 0,
        bound_violations: 0,
        configurations: Vec::new(),
    };
    for n in [2usize, 3] {
        for b in [1u32, 2] {
            summary.configurations.push(format!("n={n},b={b},c=2"));
            let mut rng = substream(config.seed, Domain::Trial, (n as u64) << 8 | b as u64);
            for _ in 0..per_config {
                let prices: Vec<Money> = (0..n)
                    .map(|_| Money::new(rng.random_range(0..24), rng.random_range(1..4)).unwrap())
                    .collect();
                let report = posted_column_expectation(&prices, b, 2)?;
                summary.columns += 1;
                if report.all_levels_defined && report.exhaustive != report.formula_defined_sum {
                    summary.mismatches += 1;
                }
                if report.exhaustive > report.upper_bound {
                    summary.bound_violations += 1;
                }
            }
        }
    }
    emit_result(config, &io::to_json(&summary))?;
    let line = format!(
        "posted-formula: columns: {}, mismatches: {}, bound violations: {}",
        summary.columns, summary.mismatches, summary.bound_violations
    );
    if summary.mismatches > 0 || summary.bound_violations > 0 {
        return Err(CliError::Assertion(line));
    }
    Ok(line)
}

#[derive(Serialize)]
struct PoaSummary {
    instance: String,
    rounds: usize,
    bid_grid: Vec<Money>,
    utility_bound: f64,
    equilibrium_class: String,
    time_averaged_swap_regret: Vec<f64>,
    empirical_poa: f64,
    threshold: f64,
    best_single_price_ratio: f64,
}

/// Swap-regret play of the single-bid mechanism on the bucket instance,
/// with the empirical price of anarchy against the generous 12 ln m check.
fn single_bid_poa(config: &ExperimentConfig) -> CliResult<String> {
    let rounds = config.rounds.unwrap_or(100_000);
    let params = BucketParams::new(3, 3, 3).map_err(CliError::from)?;
    let inst = gen_bucket(&params);
    let grid = bid_grid(&inst, 3)?;
    let space = StrategySpace::uniform(inst.n, grid.clone());
    let mut game = single_bid_game(&inst, &space)?;
    let bound = inst.grand_bundle_bound()?.to_f64();
    let history = run_swap_regret(&mut game, bound, rounds, config.seed)?;
    let poa = empirical_poa(&history, &inst)?;
    let threshold = 12.0 * (inst.m as f64).ln();
    let best = best_single_price(&inst, OrderPolicy::All, config.budget)?;
    let summary = PoaSummary {
        instance: "bucket(b=3,c=3,n=3)".into(),
        rounds,
        bid_grid: grid,
        utility_bound: bound,
        equilibrium_class: history.algorithm.equilibrium_class().into(),
        time_averaged_swap_regret: (0..inst.n)
            .map(|i| swap_regret(&history, i) / rounds as f64)
            .collect(),
        empirical_poa: poa,
        threshold,
        best_single_price_ratio: opt_welfare(&inst)?.to_f64() / best.best_welfare.to_f64(),
    };
    emit_result(config, &io::to_json(&summary))?;
    let line = format!("single-bid-poa: empirical PoA {poa:.4} (threshold {threshold:.2})");
    if poa > threshold {
        return Err(CliError::Assertion(line));
    }
    Ok(line)
}

#[derive(Serialize)]
struct SauerSummary {
    exhaustive_families: usize,
    random_families: usize,
    violations: usize,
}

/// The generalized Sauer-Shelah inequality over every small family and a
/// seeded random sweep.
fn sauer_exhaustive(config: &ExperimentConfig) -> CliResult<String> {
    let random_count = config.trials.unwrap_or(10_000) as u64;
    let complete32: Vec<Vec<u16>> = FunctionFamily::complete(3, 2)?.members().cloned().collect();
    let mut violations = 0usize;
    for code in 0u32..256 {
        let members: Vec<Vec<u16>> = complete32
            .iter()
            .enumerate()
            .filter(|(i, _)| code >> i & 1 == 1)
            .map(|(_, f)| f.clone())
            .collect();
        if !sauer_shelah_check(&FunctionFamily::new(3, 2, members)?, 2)? {
            violations += 1;
        }
    }
    let complete43: Vec<Vec<u16>> = FunctionFamily::complete(4, 3)?.members().cloned().collect();
    for idx in 0..random_count {
        let mut rng = substream(config.seed, Domain::Family, idx);
        let members: Vec<Vec<u16>> = complete43
            .iter()
            .filter(|_| rng.random_range(0..2) == 0)
            .cloned()
            .collect();
        let family = FunctionFamily::new(4, 3, members)?;
        for k in [2usize, 3] {
            if !sauer_shelah_check(&family, k)? {
                violations += 1;
            }
        }
    }
    let summary = SauerSummary {
        exhaustive_families: 256,
        random_families: random_count as usize,
        violations,
    };
    emit_result(config, &io::to_json(&summary))?;
    let line = format!(
        "sauer-exhaustive: {} + {} families, violations: {}",
        summary.exhaustive_families, summary.random_families, summary.violations
    );
    if violations > 0 {
        return Err(CliError::Assertion(line));
    }
    Ok(line)
}

#[derive(Serialize)]
struct MenusSummary {
    n: usize,
    m: usize,
    mechanisms: Vec<String>,
    menus_extracted: usize,
    submenus_validated: usize,
    event_stats: mechlab_core::menus::PolarEventStats,
}

/// Menu extraction for the three deterministic mechanisms on a polar base,
/// structured-submenu re-validation, and the tail-event statistics.
fn menus_polar(config: &ExperimentConfig) -> CliResult<String> {
    let n = 3usize;
    let m = 6usize;
    let base_seed: u64 = substream(config.seed, Domain::Trial, 0).random();
    let base = gen_polar(n, m, base_seed)?;
    let mut rng = substream(config.seed, Domain::Trial, 1);
    let m3 = (m as i128).pow(3);
    let posted = MechanismSpec::PostedPrice(PostedPriceSpec {
        order: (0..n).collect(),
        prices: (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| Money::new(rng.random_range(0..=2 * m3), m3).unwrap())
                    .collect()
            })
            .collect(),
    });
    let single = MechanismSpec::SinglePrice(SinglePriceSpec {
        order: (0..n).rev().collect(),
        prices: vec![ThresholdPrice::inclusive(Money::new(1, 2).unwrap()); n],
    });
    let members: Vec<Allocation> = (0..12)
        .map(|_| {
            let mut alloc = vec![ItemSet::new(); n];
            for j in 0..m {
                let slot = rng.random_range(0..=n);
                if slot < n {
                    alloc[slot].insert(j as u16);
                }
            }
            alloc
        })
        .collect();
    let mir = MechanismSpec::Mir { range: AllocationFamily::new(m, n, 1, members)? };

    let mechanisms = vec![posted, single, mir];
    let mut menus_extracted = 0usize;
    let mut submenus_validated = 0usize;
    for mech in &mechanisms {
        for bidder in 0..n {
            let menu = extract_menu(mech, &base, bidder).map_err(|e| match e {
                Error::TaxationViolation { .. } => CliError::Assertion(e.to_string()),
                other => CliError::from(other),
            })?;
            menus_extracted += 1;
            for sub in find_structured_submenus(&menu, m) {
                if !validate_structured_submenu(&menu, &sub, m) {
                    return Err(CliError::Assertion(format!(
                        "structured submenu failed re-validation under {}",
                        mech.name()
                    )));
                }
                submenus_validated += 1;
            }
        }
    }
    let event_stats = polar_event_check(
        n,
        m,
        &mechanisms,
        config.trials.unwrap_or(10_000),
        5,
        config.seed,
    )?;
    let summary = MenusSummary {
        n,
        m,
        mechanisms: mechanisms.iter().map(|m| m.name().to_string()).collect(),
        menus_extracted,
        submenus_validated,
        event_stats,
    };
    emit_result(config, &io::to_json(&summary))?;
    Ok(format!(
        "menus-polar: {menus_extracted} menus, {submenus_validated} submenus validated"
    ))
}
