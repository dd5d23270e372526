//! Command-line front end. Data goes to files or standard output as CSV;
//! diagnostics go to standard error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::channel::{draw_channels, ChannelRealization};
use crate::error::{Error, Result};
use crate::gradient::{finite_diff_error_of, gradient};
use crate::harness::{run_experiment, solve_from, ExperimentKind, ExperimentSpec, Method};
use crate::oracle::{grid_search, restart_points};
use crate::phy::{eve_combiner, PowerAllocation, SecrecyProblem};
use crate::scenario::{build_topology, parse_pairs, ScenarioConfig};

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "V2V_SECRECY_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "v2v-secrecy", version, about = "Sum secrecy rate maximization for V2V pairs reusing cellular resource blocks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Shared {
    /// Config file (`key = value` lines). Defaults to $V2V_SECRECY_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draws one channel realization and writes it as CSV.
    GenerateChannels {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs one solver and writes its trace CSV.
    Solve {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        seed: Option<u64>,
        /// Channel CSV from `generate-channels`; drawn from the seed if omitted.
        #[arg(long)]
        channels: Option<PathBuf>,
        /// Trace output; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the final allocation as `k,m,power_w`.
        #[arg(long)]
        allocation_out: Option<PathBuf>,
    },
    /// Runs an experiment grid into a directory.
    Sweep {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_parser = parse_experiment)]
        experiment: ExperimentKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares best-of-restarts solver objectives with an exhaustive grid (K*M <= 5).
    Gridcheck {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        /// Required fraction of the grid optimum.
        #[arg(long, default_value_t = 0.98)]
        ratio: f64,
    },
    /// Checks the closed-form gradient against central differences.
    Gradcheck {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random interior points.
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Difference step in watts.
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_experiment(s: &str) -> std::result::Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_SOLVER
            }
        }
    }
}

fn config_text(shared: &Shared) -> Result<String> {
    let path = shared
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(p) => fs::read_to_string(&p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display()))),
        None => Ok(String::new()),
    }
}

/// Scenario config from the file and overrides; `sweep.*` keys are skipped.
pub fn load_scenario(shared: &Shared, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    for (k, v) in parse_pairs(&config_text(shared)?)? {
        if !k.starts_with("sweep.") {
            cfg.set(&k, &v)?;
        }
    }
    for o in &shared.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::GenerateChannels { shared, seed, out } => {
            let cfg = load_scenario(&shared, seed)?;
            let topo = build_topology(&cfg);
            let ch = draw_channels::<f64>(&cfg, &topo, cfg.seed);
            ch.write_csv(output(out.as_deref())?)?;
            Ok(EXIT_OK)
        }
        Command::Solve {
            shared,
            method,
            seed,
            channels,
            out,
            allocation_out,
        } => {
            let cfg = load_scenario(&shared, seed)?;
            let topo = build_topology(&cfg);
            let ch = match channels {
                Some(path) => {
                    let file = fs::File::open(&path)
                        .map_err(|e| Error::ChannelFile(format!("cannot open {}: {e}", path.display())))?;
                    ChannelRealization::read_csv(file, cfg.pairs, cfg.cues, cfg.eve_antennas)?
                }
                None => draw_channels(&cfg, &topo, cfg.seed),
            };
            let prob = SecrecyProblem::new(&cfg, &ch, &topo, &eve_combiner(&ch, &cfg))?;
            let p0 = PowerAllocation::uniform(cfg.pairs, cfg.cues, cfg.p_max / 2.0);
            let (p, trace) = solve_from(method, &prob, &cfg, &p0)?;
            trace.write_csv(output(out.as_deref())?)?;
            if let Some(path) = allocation_out {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["k", "m", "power_w"])?;
                for (k, m, v) in p.grid().indexed() {
                    w.write_record([k.to_string(), m.to_string(), v.to_string()])?;
                }
                w.flush()?;
            }
            eprintln!(
                "{method}: {} after {} iterations ({}), {:.3e} s",
                trace.final_objective(),
                trace.iters,
                trace.status.as_str(),
                trace.wall_time_s
            );
            Ok(EXIT_OK)
        }
        Command::Sweep { shared, experiment, out } => {
            let spec = ExperimentSpec::parse(experiment, &config_text(&shared)?, &shared.overrides, out)?;
            let outcome = run_experiment(experiment, &spec)?;
            for f in &outcome.failures {
                eprintln!("failed: {} {} seed {}: {}", f.scenario_id, f.method, f.seed, f.message);
            }
            eprintln!(
                "{} solves written to {} ({} failed)",
                outcome.rows.len(),
                spec.out_dir.display(),
                outcome.failures.len()
            );
            Ok(if outcome.failures.is_empty() { EXIT_OK } else { EXIT_SOLVER })
        }
        Command::Gridcheck {
            shared,
            seed,
            points,
            restarts,
            ratio,
        } => {
            let cfg = load_scenario(&shared, seed)?;
            let topo = build_topology(&cfg);
            let ch = draw_channels::<f64>(&cfg, &topo, cfg.seed);
            let prob = SecrecyProblem::new(&cfg, &ch, &topo, &eve_combiner(&ch, &cfg))?;
            let (_, grid_best) = grid_search(&prob, points)?;
            let starts = restart_points(cfg.pairs, cfg.cues, prob.floor(), prob.p_max(), restarts.max(1), cfg.seed);
            let mut out = io::stdout().lock();
            writeln!(out, "method,best_objective_bits_per_s,grid_objective_bits_per_s,ratio")?;
            let mut ok = true;
            for method in Method::ALL {
                let mut best = f64::NEG_INFINITY;
                for p0 in &starts {
                    let (p, _) = solve_from(method, &prob, &cfg, p0)?;
                    best = best.max(prob.objective(&p));
                }
                let r = if grid_best > 0.0 { best / grid_best } else { 1.0 };
                ok &= r >= ratio;
                writeln!(out, "{method},{best},{grid_best},{r}")?;
            }
            Ok(if ok { EXIT_OK } else { EXIT_SOLVER })
        }
        Command::Gradcheck {
            shared,
            seed,
            points,
            step,
            tolerance,
        } => {
            let cfg = load_scenario(&shared, seed)?;
            let topo = build_topology(&cfg);
            let ch = draw_channels::<f64>(&cfg, &topo, cfg.seed);
            let prob = SecrecyProblem::new(&cfg, &ch, &topo, &eve_combiner(&ch, &cfg))?;
            let lo = 0.05 * cfg.p_max;
            let hi = 0.95 * cfg.p_max;
            let mut worst = 0.0f64;
            for p in restart_points(cfg.pairs, cfg.cues, lo, hi, points.max(1), cfg.seed) {
                let g = gradient(&prob, &p)?;
                worst = worst.max(finite_diff_error_of(&prob, &p, &g, step));
            }
            let mut out = io::stdout().lock();
            writeln!(out, "max_relative_error")?;
            writeln!(out, "{worst:e}")?;
            Ok(if worst <= tolerance { EXIT_OK } else { EXIT_SOLVER })
        }
    }
}
