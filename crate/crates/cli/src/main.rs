//! `mechlab` -- command-line harness for the mechanism laboratory.
//!
//! Exit codes: 0 success, 1 usage error, 2 assertion failure (an
//! assertion-style experiment found a violated identity).

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;

use mechlab_cli::experiments::{run_experiment, ExperimentConfig, OutputFormat};
use mechlab_cli::{io, CliError, CliResult};
use mechlab_core::instances::{gen_bucket, gen_interest01, gen_polar, gen_random_posted, BucketParams};
use mechlab_core::learning::{
    bid_grid, empirical_poa, external_regret, run_hedge, run_swap_regret, single_bid_game,
    swap_regret, Algorithm, StrategySpace,
};
use mechlab_core::mechanisms::{
    run_mir, run_posted_price, run_secretary, run_single_bid, run_single_price, MechanismSpec,
};
use mechlab_core::menus::{extract_menu, find_structured_submenus, polar_event_check};
use mechlab_core::money::Money;
use mechlab_core::oracles::{
    allocation_set_welfare_bound, best_single_price, for_each_single_price_spec, opt_welfare,
    posted_column_expectation, random_allocation, OrderPolicy,
};
use mechlab_core::rng::{substream, Domain};
use mechlab_core::shattering::{
    check_containment, check_intersection, dim_k, is_shattered, mir_ratio, project,
    sauer_shelah_check, FunctionFamily, MirClass,
};

#[derive(Parser)]
#[command(name = "mechlab", version, about = "Combinatorial-auction mechanism laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every stochastic component (substreams derive from it).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format where both are supported.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Enumeration budget for exhaustive searches.
    #[arg(long, global = true)]
    budget: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Run a mechanism on an instance.
    Run {
        #[command(subcommand)]
        what: RunCmd,
    },
    /// Brute-force oracles and sweeps.
    Bruteforce {
        #[command(subcommand)]
        what: BruteCmd,
    },
    /// No-regret dynamics over a mechanism.
    Learn {
        #[arg(long)]
        instance: PathBuf,
        /// Phase-one mechanism (currently: single-bid).
        #[arg(long, default_value = "single-bid")]
        mechanism: String,
        #[arg(long, value_enum, default_value_t = Algo::Hedge)]
        algo: Algo,
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        /// Base of the geometric bid grid.
        #[arg(long, default_value_t = 2)]
        grid_base: u64,
    },
    /// Allocation-family machinery.
    Shatter {
        #[command(subcommand)]
        what: ShatterCmd,
    },
    /// Taxation-principle menus.
    Menus {
        #[command(subcommand)]
        what: MenusCmd,
    },
    /// Registered reproducible experiments.
    Experiment {
        #[arg(long)]
        name: String,
        /// Round-count override for learning pipelines.
        #[arg(long)]
        rounds: Option<usize>,
        /// Trial-count override for Monte Carlo pipelines.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Hedge,
    Swap,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Bucketed hard instance for single-price mechanisms.
    Bucket {
        #[arg(long)]
        b: u32,
        #[arg(long)]
        c: u64,
        #[arg(long)]
        n: usize,
    },
    /// Random leveled columns for posted-price analysis.
    Posted {
        #[arg(long)]
        b: u32,
        #[arg(long)]
        c: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
    },
    /// 0/1-additive single-interest instance.
    Interest01 {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps: f64,
    },
    /// Polar additive instance.
    Polar {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
    },
}

#[derive(Subcommand)]
enum RunCmd {
    SinglePrice {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        spec: PathBuf,
    },
    Posted {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        spec: PathBuf,
    },
    SingleBid {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated bids, rationals allowed ("3,1/2,0").
        #[arg(long)]
        bids: String,
    },
    Secretary {
        #[arg(long)]
        instance: PathBuf,
    },
    Mir {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        family: PathBuf,
    },
}

#[derive(Subcommand)]
enum BruteCmd {
    /// Exact optimal welfare.
    Opt {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Exhaustive single-price search over the complete threshold grid.
    SinglePrice {
        #[arg(long)]
        instance: PathBuf,
        /// all | fixed (identity order).
        #[arg(long, default_value = "all")]
        orders: String,
    },
    /// Exact per-item expectation of random posted-price columns, two ways.
    PostedFormula {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: u32,
        #[arg(long, default_value_t = 2)]
        c: u64,
        #[arg(long, default_value_t = 1000)]
        columns: usize,
    },
    /// Monte Carlo welfare of fixed allocations on the interest01 draw.
    Interest01 {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        allocations: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

#[derive(Subcommand)]
enum ShatterCmd {
    /// Projections of a family onto (items, indices).
    Project {
        #[arg(long)]
        family: PathBuf,
        /// Comma-separated item subset, e.g. "0,2".
        #[arg(long)]
        items: String,
        /// Comma-separated index subset, e.g. "0,1".
        #[arg(long)]
        indices: String,
    },
    /// Generalized VC dimension of the family's total projections.
    Dim {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Generalized Sauer-Shelah inequality check.
    Sauer {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        k: usize,
    },
    Containment {
        #[arg(long)]
        family: PathBuf,
        /// Rational, e.g. "3/2".
        #[arg(long)]
        alpha: String,
    },
    Intersection {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        alpha: String,
    },
    MirRatio {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, value_enum)]
        class: MirClassArg,
        /// Comma-separated value grid for single-minded profiles.
        #[arg(long, default_value = "1")]
        grid: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MirClassArg {
    SingleMinded,
    ZeroOneAdditive,
}

#[derive(Subcommand)]
enum MenusCmd {
    Extract {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        bidder: usize,
        /// Mechanism spec file (JSON MechanismSpec).
        #[arg(long)]
        mech: PathBuf,
    },
    Submenus {
        #[arg(long)]
        menu: PathBuf,
    },
    Events {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        menu_trials: usize,
        /// Mechanism spec files for the menu-dependent events.
        #[arg(long)]
        mech: Vec<PathBuf>,
    },
}

fn parse_money(s: &str) -> CliResult<Money> {
    s.trim()
        .parse()
        .map_err(|e: mechlab_core::Error| CliError::usage(e.to_string()))
}

fn parse_money_list(s: &str) -> CliResult<Vec<Money>> {
    s.split(',').map(parse_money).collect()
}

fn parse_index_list(s: &str) -> CliResult<Vec<u16>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u16>()
                .map_err(|e| CliError::usage(format!("bad index {p:?}: {e}")))
        })
        .collect()
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("mechlab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Gen { what } => {
            let inst = match *what {
                GenCmd::Bucket { b, c, n } => gen_bucket(&BucketParams::new(b, c, n)?),
                GenCmd::Posted { b, c, n, m } => gen_random_posted(b, c, n, m, cli.seed)?,
                GenCmd::Interest01 { m, eps } => gen_interest01(m, eps, cli.seed)?,
                GenCmd::Polar { n, m } => gen_polar(n, m, cli.seed)?,
            };
            io::emit(out, &io::to_json(&inst))
        }

        Command::Run { what } => {
            let outcome = match what {
                RunCmd::SinglePrice { instance, spec } => {
                    let inst = io::load_instance(instance)?;
                    run_single_price(&io::load_single_price_spec(spec)?, &inst)?
                }
                RunCmd::Posted { instance, spec } => {
                    let inst = io::load_instance(instance)?;
                    run_posted_price(&io::load_posted_price_spec(spec)?, &inst)?
                }
                RunCmd::SingleBid { instance, bids } => {
                    let inst = io::load_instance(instance)?;
                    run_single_bid(&parse_money_list(bids)?, &inst)?
                }
                RunCmd::Secretary { instance } => {
                    let inst = io::load_instance(instance)?;
                    run_secretary(&inst, cli.seed)?
                }
                RunCmd::Mir { instance, family } => {
                    let inst = io::load_instance(instance)?;
                    run_mir(&io::load_family(family)?, &inst)?
                }
            };
            io::emit(out, &io::to_json(&outcome))
        }

        Command::Bruteforce { what } => match what {
            BruteCmd::Opt { instance } => {
                let inst = io::load_instance(instance)?;
                let welfare = opt_welfare(&inst)?;
                io::emit(out, &io::to_json(&serde_json::json!({ "opt_welfare": welfare })))
            }
            BruteCmd::SinglePrice { instance, orders } => {
                let inst = io::load_instance(instance)?;
                let policy = match orders.as_str() {
                    "all" => OrderPolicy::All,
                    "fixed" => OrderPolicy::Fixed((0..inst.n).collect()),
                    other => return Err(CliError::usage(format!("unknown order policy {other:?}"))),
                };
                match cli.format {
                    Format::Json => {
                        let report = best_single_price(&inst, policy, cli.budget)?;
                        io::emit(out, &io::to_json(&report))
                    }
                    Format::Csv => {
                        let opt = opt_welfare(&inst)?;
                        let mut csv =
                            String::from("mechlab.single_price_grid.v1,order,prices,welfare,ratio\n");
                        for_each_single_price_spec(&inst, policy, |spec, outcome| {
                            let order = spec
                                .order
                                .iter()
                                .map(ToString::to_string)
                                .collect::<Vec<_>>()
                                .join("-");
                            let prices = spec
                                .prices
                                .iter()
                                .map(ToString::to_string)
                                .collect::<Vec<_>>()
                                .join(";");
                            let ratio = if outcome.welfare.is_zero() {
                                "inf".to_string()
                            } else {
                                let r = opt.as_rational() / outcome.welfare.as_rational();
                                format!("{}/{}", r.numer(), r.denom())
                            };
                            writeln!(csv, "row,{order},{prices},{},{ratio}", outcome.welfare)
                                .unwrap();
                            Ok(())
                        })?;
                        io::emit(out, &csv)
                    }
                }
            }
            BruteCmd::PostedFormula { n, b, c, columns } => {
                let mut rows = Vec::new();
                let mut mismatches = 0usize;
                let mut rng = substream(cli.seed, Domain::Trial, (*n as u64) << 8 | *b as u64);
                for _ in 0..*columns {
                    let prices: Vec<Money> = (0..*n)
                        .map(|_| Money::new(rng.random_range(0..24), rng.random_range(1..4)).unwrap())
                        .collect();
                    let report = posted_column_expectation(&prices, *b, *c)?;
                    if report.all_levels_defined && report.exhaustive != report.formula_defined_sum
                    {
                        mismatches += 1;
                    }
                    rows.push(serde_json::json!({
                        "prices": prices,
                        "report": report,
                    }));
                }
                io::emit(
                    out,
                    &io::to_json(&serde_json::json!({
                        "columns": columns,
                        "mismatches": mismatches,
                        "rows": rows,
                    })),
                )
            }
            BruteCmd::Interest01 { m, eps, allocations, trials } => {
                let n = mechlab_core::instances::interest01_bidders(*m, *eps);
                let allocs: Vec<Vec<Option<usize>>> = (0..*allocations as u64)
                    .map(|a| random_allocation(*m, n, cli.seed, a))
                    .collect();
                let stats = allocation_set_welfare_bound(*m, *eps, &allocs, *trials, cli.seed)?;
                match cli.format {
                    Format::Json => io::emit(out, &io::to_json(&stats)),
                    Format::Csv => {
                        let mut csv = String::from(
                            "mechlab.interest01_stats.v1,allocation,mean_welfare,freq_double_mean\n",
                        );
                        for (i, s) in stats.iter().enumerate() {
                            writeln!(csv, "row,{i},{},{}", s.mean_welfare, s.freq_double_mean)
                                .unwrap();
                        }
                        io::emit(out, &csv)
                    }
                }
            }
        },

        Command::Learn { instance, mechanism, algo, rounds, grid_base } => {
            if mechanism != "single-bid" {
                return Err(CliError::usage(format!(
                    "unknown mechanism {mechanism:?}; supported: single-bid"
                )));
            }
            let inst = io::load_instance(instance)?;
            let grid = bid_grid(&inst, *grid_base)?;
            let space = StrategySpace::uniform(inst.n, grid.clone());
            let mut game = single_bid_game(&inst, &space)?;
            let bound = inst.grand_bundle_bound()?.to_f64();
            let history = match algo {
                Algo::Hedge => run_hedge(&mut game, bound, *rounds, cli.seed)?,
                Algo::Swap => run_swap_regret(&mut game, bound, *rounds, cli.seed)?,
            };
            // Compact trajectory CSV to --out (or stdout), summary JSON to
            // stdout (or stderr when the trajectory already owns stdout).
            let mut csv = String::from("mechlab.play_history.v1,round");
            for i in 0..inst.n {
                write!(csv, ",action_{i}").unwrap();
            }
            csv.push_str(",welfare\n");
            for (t, profile) in history.profiles.iter().enumerate() {
                write!(csv, "row,{t}").unwrap();
                for &a in profile {
                    write!(csv, ",{}", grid[a]).unwrap();
                }
                writeln!(csv, ",{}", history.welfare[t]).unwrap();
            }
            io::emit(out, &csv)?;
            let summary = serde_json::json!({
                "algorithm": match history.algorithm {
                    Algorithm::Hedge => "hedge",
                    Algorithm::SwapRegret => "swap",
                },
                "equilibrium_class": history.algorithm.equilibrium_class(),
                "rounds": rounds,
                "utility_bound": bound,
                "external_regret": (0..inst.n).map(|i| external_regret(&history, i)).collect::<Vec<_>>(),
                "swap_regret": (0..inst.n).map(|i| swap_regret(&history, i)).collect::<Vec<_>>(),
                "empirical_poa": empirical_poa(&history, &inst)?,
            });
            let text = io::to_json(&summary);
            if out.is_some() {
                print!("{text}");
            } else {
                eprint!("{text}");
            }
            Ok(())
        }

        Command::Shatter { what } => match what {
            ShatterCmd::Project { family, items, indices } => {
                let fam = io::load_family(family)?;
                let s = parse_index_list(items)?.into_iter().collect();
                let a = parse_index_list(indices)?.into_iter().collect();
                let projections: Vec<Vec<u16>> = project(&fam, &s, &a).into_iter().collect();
                io::emit(
                    out,
                    &io::to_json(&serde_json::json!({
                        "projections": projections,
                        "shattered": is_shattered(&fam, &s, &a),
                    })),
                )
            }
            ShatterCmd::Dim { family, k } => {
                let fam = io::load_family(family)?;
                let functions = FunctionFamily::from_allocations(&fam);
                let dim = dim_k(&functions, *k)?;
                io::emit(
                    out,
                    &io::to_json(&serde_json::json!({
                        "total_projections": functions.len(),
                        "k": k,
                        "dim_k": dim,
                    })),
                )
            }
            ShatterCmd::Sauer { family, k } => {
                let fam = io::load_family(family)?;
                let functions = FunctionFamily::from_allocations(&fam);
                let holds = sauer_shelah_check(&functions, *k)?;
                io::emit(out, &io::to_json(&serde_json::json!({ "k": k, "holds": holds })))
            }
            ShatterCmd::Containment { family, alpha } => {
                let fam = io::load_family(family)?;
                let verdict = check_containment(&fam, parse_money(alpha)?)?;
                io::emit(
                    out,
                    &io::to_json(&serde_json::json!({
                        "alpha": alpha,
                        "holds": verdict.holds,
                        "witness": verdict.witness,
                    })),
                )
            }
            ShatterCmd::Intersection { family, alpha } => {
                let fam = io::load_family(family)?;
                let verdict = check_intersection(&fam, parse_money(alpha)?)?;
                io::emit(
                    out,
                    &io::to_json(&serde_json::json!({
                        "alpha": alpha,
                        "holds": verdict.holds,
                        "witness": verdict.witness,
                    })),
                )
            }
            ShatterCmd::MirRatio { family, class, grid } => {
                let fam = io::load_family(family)?;
                let class = match class {
                    MirClassArg::SingleMinded => MirClass::SingleMinded,
                    MirClassArg::ZeroOneAdditive => MirClass::ZeroOneAdditive,
                };
                let grid = parse_money_list(grid)?;
                let ratio = mir_ratio(&fam, class, &grid)?;
                io::emit(out, &io::to_json(&serde_json::json!({ "ratio": ratio })))
            }
        },

        Command::Menus { what } => match what {
            MenusCmd::Extract { instance, bidder, mech } => {
                let inst = io::load_instance(instance)?;
                let mechanism = io::load_mechanism(mech)?;
                let menu = extract_menu(&mechanism, &inst, *bidder)?;
                io::emit(out, &io::to_json(&menu))
            }
            MenusCmd::Submenus { menu } => {
                let menu = io::load_menu(menu)?;
                let subs = find_structured_submenus(&menu, menu.m);
                io::emit(out, &io::to_json(&subs))
            }
            MenusCmd::Events { n, m, trials, menu_trials, mech } => {
                let mechanisms: Vec<MechanismSpec> = mech
                    .iter()
                    .map(|p| io::load_mechanism(p))
                    .collect::<CliResult<_>>()?;
                let stats =
                    polar_event_check(*n, *m, &mechanisms, *trials, *menu_trials, cli.seed)?;
                io::emit(out, &io::to_json(&stats))
            }
        },

        Command::Experiment { name, rounds, trials } => {
            let config = ExperimentConfig {
                name: name.clone(),
                seed: cli.seed,
                out: cli.out.clone(),
                format: match cli.format {
                    Format::Json => OutputFormat::Json,
                    Format::Csv => OutputFormat::Csv,
                },
                rounds: *rounds,
                trials: *trials,
                budget: cli.budget,
            };
            let summary = run_experiment(&config)?;
            if cli.out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(())
        }
    }
}
