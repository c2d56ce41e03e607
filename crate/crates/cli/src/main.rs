//! Command-line interface: count, constant, verify, obstruct, grunwald and
//! equidist subcommands over JSON run configurations.
//!
//! Exit codes: 0 all pass, 1 numeric criterion fail, 2 invariant or property
//! fail, 3 configuration error.

use clap::{Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use ramcount_core::analytic::{
    equidist_prediction, leading_constant_balanced, leading_constant_stacky,
    leading_constant_unbalanced, AnalyticSetup,
};
use ramcount_core::cache::ResultCache;
use ramcount_core::config::{parse_config, settings_hash, RunSetup};
use ramcount_core::global::{count_n, empirical_local_distribution, EnumTask};
use ramcount_core::heights::Place;
use ramcount_core::local::LocalCondition;
use ramcount_core::obstruction::{
    grunwald_witness, obstruction_search, parity_predict, ObstructionScenario,
};
use ramcount_core::report::{counts_csv, to_json, write_text};

mod verify;

#[derive(Parser)]
#[command(
    name = "ramcount",
    about = "Count abelian extensions of Q with restricted ramification type and \
             compute the predicted leading constants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Height-bounded counts N(B) with checkpoints, CSV output
    Count {
        #[arg(long)]
        config: PathBuf,
        /// override the config bound (accepts 1e7 notation)
        #[arg(long)]
        bound: Option<String>,
        /// number of geometric checkpoints
        #[arg(long)]
        checkpoints: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Leading constant by the chosen route, JSON output
    Constant {
        #[arg(long)]
        config: PathBuf,
        /// fourier | stacky | both | unbalanced
        #[arg(long, default_value = "both")]
        route: String,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the packaged regression suite
    Verify {
        #[arg(long, default_value = "example-1.8")]
        name: String,
        /// full | quick (quick shrinks enumeration bounds)
        #[arg(long, default_value = "quick")]
        budget: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a quartic obstruction-pattern witness
    Obstruct {
        /// must be 4: the pattern is specific to the cyclic quartic group
        #[arg(long)]
        group: u32,
        /// comma-separated odd primes
        #[arg(long, name = "S")]
        s: String,
        #[arg(long)]
        bound: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Witness for finitely many local targets with restricted ramification
    Grunwald {
        #[arg(long)]
        config: PathBuf,
        /// JSON file: {"targets": [{"place": ..., "split": true | "orbit_in": [...]}]}
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        budget: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical vs predicted local distribution at a tame place
    Equidist {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        place: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_bound(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("bad bound {s}"))?;
    if f < 1.0 || f > 1e18 || f.fract() != 0.0 && f < 1e15 && f != f.trunc() {
        return Err(format!("bad bound {s}"));
    }
    Ok(f as u64)
}

fn load_config(path: &PathBuf) -> Result<RunSetup, ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return Err(ExitCode::from(3));
        }
    };
    match parse_config(&text) {
        Ok(setup) => Ok(setup),
        Err(errors) => {
            eprintln!("configuration invalid ({} violations):", errors.len());
            for e in errors {
                eprintln!("  - {e}");
            }
            Err(ExitCode::from(3))
        }
    }
}

fn emit(out: Option<&PathBuf>, payload: &str) -> ExitCode {
    match out {
        None => {
            print!("{payload}");
            ExitCode::SUCCESS
        }
        Some(path) => match write_text(path, payload) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("write failed: {e}");
                ExitCode::from(3)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Count {
            config,
            bound,
            checkpoints,
            out,
            workers,
        } => {
            let mut setup = match load_config(&config) {
                Ok(s) => s,
                Err(c) => return c,
            };
            if let Some(b) = bound {
                match parse_bound(&b) {
                    Ok(v) => {
                        setup.bound = v;
                        setup.config.bound = v;
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        return ExitCode::from(3);
                    }
                }
            }
            if let Some(c) = checkpoints {
                setup.config.checkpoints = c;
            }
            if let Some(w) = workers {
                setup.workers = w;
            }
            // rebuild the checkpoint grid after overrides
            let revalidated = ramcount_core::config::validate(setup.config.clone())
                .expect("already validated");
            let hash = settings_hash(&setup.config, "count", setup.bound);
            let cache = ResultCache::from_env();
            if let Some(c) = &cache {
                if let Some(hit) = c.lookup(&hash) {
                    return emit(out.as_ref(), &hit);
                }
            }
            let mut task = EnumTask::new(setup.bound);
            task.checkpoints = revalidated.checkpoints.clone();
            task.conditions = setup.conditions.clone();
            task.workers = setup.workers;
            let report = match count_n(&setup.ld, &setup.heights, &setup.r, task, hash.clone()) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("count failed: {e}");
                    return ExitCode::from(2);
                }
            };
            let csv = counts_csv(&report);
            if let Some(c) = &cache {
                c.store(&hash, &csv);
            }
            emit(out.as_ref(), &csv)
        }

        Command::Constant {
            config,
            route,
            eps,
            out,
        } => {
            let setup = match load_config(&config) {
                Ok(s) => s,
                Err(c) => return c,
            };
            let _ = eps;
            let analytic =
                match AnalyticSetup::new(&setup.ld, &setup.heights, &setup.r, &setup.conditions) {
                    Ok(a) => a,
                    Err(e) => {
                        eprintln!("setup failed: {e}");
                        return ExitCode::from(3);
                    }
                };
            let cutoff = 100_000u64;
            let payload = match route.as_str() {
                "fourier" => leading_constant_balanced(&analytic, cutoff)
                    .map_err(|e| e.to_string())
                    .and_then(|r| to_json(&r).map_err(|e| e.to_string())),
                "stacky" => leading_constant_stacky(&analytic, cutoff)
                    .map_err(|e| e.to_string())
                    .and_then(|r| to_json(&r).map_err(|e| e.to_string())),
                "unbalanced" => leading_constant_unbalanced(&analytic, cutoff)
                    .map_err(|e| e.to_string())
                    .and_then(|r| to_json(&r).map_err(|e| e.to_string())),
                "both" => {
                    match (
                        leading_constant_balanced(&analytic, cutoff),
                        leading_constant_stacky(&analytic, cutoff),
                    ) {
                        (Ok(f), Ok(s)) => {
                            let gap = (f.c_hom - s.c_hom).abs();
                            #[derive(serde::Serialize)]
                            struct Both {
                                fourier: ramcount_core::analytic::ConstantReport,
                                stacky: ramcount_core::analytic::ConstantReport,
                                route_gap: f64,
                            }
                            to_json(&Both {
                                fourier: f,
                                stacky: s,
                                route_gap: gap,
                            })
                            .map_err(|e| e.to_string())
                        }
                        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
                    }
                }
                other => Err(format!("unknown route {other}")),
            };
            match payload {
                Ok(p) => emit(out.as_ref(), &p),
                Err(e) => {
                    eprintln!("constant failed: {e}");
                    ExitCode::from(2)
                }
            }
        }

        Command::Verify { name, budget, out } => {
            if name != "example-1.8" {
                eprintln!("unknown suite {name} (packaged: example-1.8)");
                return ExitCode::from(3);
            }
            let quick = budget != "full";
            let report = verify::run_example_suite(quick);
            let json = to_json(&report).expect("serializable");
            for line in &report.lines {
                println!("{line}");
            }
            let code = if report.config_error {
                3
            } else if report.property_failures > 0 {
                2
            } else if report.numeric_failures > 0 {
                1
            } else {
                0
            };
            if let Some(path) = out {
                if write_text(&path, &json).is_err() {
                    return ExitCode::from(3);
                }
            }
            ExitCode::from(code)
        }

        Command::Obstruct {
            group,
            s,
            bound,
            out,
        } => {
            if group != 4 {
                eprintln!("the obstruction pattern is specific to the cyclic quartic group");
                return ExitCode::from(3);
            }
            let primes: Result<Vec<u64>, _> =
                s.split(',').map(|t| t.trim().parse::<u64>()).collect();
            let Ok(primes) = primes else {
                eprintln!("bad prime list {s}");
                return ExitCode::from(3);
            };
            let bound = match parse_bound(&bound) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(3);
                }
            };
            let scenario = match ObstructionScenario::new(&primes) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(3);
                }
            };
            let predicted = parity_predict(&scenario);
            match obstruction_search(&scenario, bound) {
                Ok(outcome) => {
                    #[derive(serde::Serialize)]
                    struct Out {
                        predicted_exists: bool,
                        outcome: ramcount_core::obstruction::SearchOutcome,
                    }
                    let found = outcome.witness.is_some();
                    let payload = to_json(&Out {
                        predicted_exists: predicted,
                        outcome,
                    })
                    .expect("serializable");
                    let code = emit(out.as_ref(), &payload);
                    if code != ExitCode::SUCCESS {
                        return code;
                    }
                    if found == predicted {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("search failed: {e}");
                    ExitCode::from(2)
                }
            }
        }

        Command::Grunwald {
            config,
            targets,
            budget,
            out,
        } => {
            let setup = match load_config(&config) {
                Ok(s) => s,
                Err(c) => return c,
            };
            let text = match std::fs::read_to_string(&targets) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read targets: {e}");
                    return ExitCode::from(3);
                }
            };
            #[derive(serde::Deserialize)]
            struct TargetFile {
                targets: Vec<ramcount_core::config::ConditionSpec>,
            }
            let parsed: TargetFile = match serde_json::from_str(&text) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("bad targets: {e}");
                    return ExitCode::from(3);
                }
            };
            // reuse the config validator for the condition literals
            let mut cfg = setup.config.clone();
            cfg.conditions = parsed.targets;
            let tsetup = match ramcount_core::config::validate(cfg) {
                Ok(s) => s,
                Err(errors) => {
                    for e in errors {
                        eprintln!("  - {e}");
                    }
                    return ExitCode::from(3);
                }
            };
            let budget = match budget.map(|b| parse_bound(&b)).transpose() {
                Ok(b) => b.unwrap_or(setup.bound),
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(3);
                }
            };
            match grunwald_witness(&setup.ld, &tsetup.conditions, &setup.r, budget) {
                Ok(outcome) => {
                    let payload = to_json(&outcome).expect("serializable");
                    emit(out.as_ref(), &payload)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }

        Command::Equidist { config, place, out } => {
            let setup = match load_config(&config) {
                Ok(s) => s,
                Err(c) => return c,
            };
            let analytic =
                match AnalyticSetup::new(&setup.ld, &setup.heights, &setup.r, &setup.conditions) {
                    Ok(a) => a,
                    Err(e) => {
                        eprintln!("{e}");
                        return ExitCode::from(3);
                    }
                };
            let predicted = match equidist_prediction(&analytic, place, 100_000) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let mut task = EnumTask::new(setup.bound);
            task.conditions = setup.conditions.clone();
            task.workers = setup.workers;
            let empirical = match empirical_local_distribution(
                &setup.ld,
                &setup.heights,
                &setup.r,
                task,
                place,
            ) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            // marginalize the empirical classes over the Frobenius component
            let mut empirical_orbits: BTreeMap<u32, f64> = BTreeMap::new();
            for ((orbit, _frob), freq) in empirical {
                *empirical_orbits.entry(orbit).or_insert(0.0) += freq;
            }
            #[derive(serde::Serialize)]
            struct Row {
                orbit: u32,
                empirical: String,
                predicted: String,
                rel_gap: String,
            }
            let mut rows = Vec::new();
            for (&orbit, &pred) in &predicted {
                let emp = empirical_orbits.get(&orbit).copied().unwrap_or(0.0);
                let rel = if pred != 0.0 {
                    (emp / pred - 1.0).abs()
                } else {
                    emp
                };
                rows.push(Row {
                    orbit,
                    empirical: ramcount_core::util::format_f64(emp),
                    predicted: ramcount_core::util::format_f64(pred),
                    rel_gap: ramcount_core::util::format_f64(rel),
                });
            }
            let payload = to_json(&rows).expect("serializable");
            emit(out.as_ref(), &payload)
        }
    }
}

// placed here so the verify module can reuse the binary's helpers
pub(crate) fn example_conditions() -> BTreeMap<Place, LocalCondition> {
    let mut conds = BTreeMap::new();
    conds.insert(Place::Finite(2), LocalCondition::Split);
    conds.insert(Place::Inf, LocalCondition::Split);
    conds
}
