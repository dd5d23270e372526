//! Experiment sweeps: convergence traces, the runtime table and the
//! per-user secrecy rate against eavesdropper antennas.
//!
//! Every method in a cell solves the same channel draw for a given seed.
//! Output CSVs are reproducible byte-for-byte apart from timing columns.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::draw_channels;
use crate::error::{Error, Result};
use crate::fista::{solve_fista_problem, FistaSettings};
use crate::phy::{PowerAllocation, SecrecyProblem};
use crate::sca::{solve_sca_problem, ScaSettings};
use crate::scenario::{build_topology, parse_pairs, ScenarioConfig};
use crate::trace::SolveTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Fista,
    FistaL,
    Sca,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fista, Method::FistaL, Method::Sca];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fista => "fista",
            Method::FistaL => "fista-l",
            Method::Sca => "sca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fista" => Ok(Method::Fista),
            "fista-l" => Ok(Method::FistaL),
            "sca" => Ok(Method::Sca),
            other => Err(Error::Config(format!("unknown method `{other}` (expected fista, fista-l or sca)"))),
        }
    }
}

/// Runs one method from the uniform `p_max / 2` start.
pub fn solve_with(method: Method, prob: &SecrecyProblem<f64>, cfg: &ScenarioConfig) -> Result<(PowerAllocation<f64>, SolveTrace)> {
    let p0 = PowerAllocation::uniform(cfg.pairs, cfg.cues, cfg.p_max / 2.0);
    solve_from(method, prob, cfg, &p0)
}

pub fn solve_from(
    method: Method,
    prob: &SecrecyProblem<f64>,
    cfg: &ScenarioConfig,
    p0: &PowerAllocation<f64>,
) -> Result<(PowerAllocation<f64>, SolveTrace)> {
    match method {
        Method::Fista => solve_fista_problem(prob, p0, &FistaSettings::fista(cfg)),
        Method::FistaL => solve_fista_problem(prob, p0, &FistaSettings::fista_l(cfg)),
        Method::Sca => solve_sca_problem(prob, p0, &ScaSettings::default()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    Runtime,
    Ne,
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "convergence" => Ok(Self::Convergence),
            "runtime" => Ok(Self::Runtime),
            "ne" => Ok(Self::Ne),
            other => Err(Error::Config(format!(
                "unknown experiment `{other}` (expected convergence, runtime or ne)"
            ))),
        }
    }
}

/// `(M, K, Nt, Ne)` of one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioSize {
    pub cues: usize,
    pub pairs: usize,
    pub bs_antennas: usize,
    pub eve_antennas: usize,
}

impl ScenarioSize {
    pub const fn new(cues: usize, pairs: usize, bs_antennas: usize, eve_antennas: usize) -> Self {
        Self {
            cues,
            pairs,
            bs_antennas,
            eve_antennas,
        }
    }
}

impl FromStr for ScenarioSize {
    type Err = Error;

    /// `M:K:Nt:Ne`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .trim()
            .split(':')
            .map(|x| x.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("scenario size `{s}` is not M:K:Nt:Ne")))?;
        match parts[..] {
            [m, k, nt, ne] => Ok(Self::new(m, k, nt, ne)),
            _ => Err(Error::Config(format!("scenario size `{s}` is not M:K:Nt:Ne"))),
        }
    }
}

/// A grid of scenarios, the methods to run on each, and the seeds.
///
/// Cells are `sizes x pairs x eve_antennas x speeds`; an empty `pairs` or
/// `eve_antennas` list keeps the value from each size.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub sizes: Vec<ScenarioSize>,
    pub pairs: Vec<usize>,
    pub eve_antennas: Vec<usize>,
    pub speeds: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: u64,
    pub first_seed: u64,
    /// Zero every wiretap channel after drawing.
    pub blind_eavesdropper: bool,
    pub out_dir: PathBuf,
}

/// Sweep keys accepted next to the scenario keys in a config file.
pub const SWEEP_KEYS: &[&str] = &[
    "sweep.sizes",
    "sweep.pairs",
    "sweep.ne",
    "sweep.speeds",
    "sweep.methods",
    "sweep.seeds",
    "sweep.first_seed",
    "sweep.blind_eve",
];

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("cannot parse `{s}` in `{key}`")))
        })
        .collect()
}

impl ExperimentSpec {
    /// Default grid of an experiment on top of `base`.
    pub fn defaults(kind: ExperimentKind, base: ScenarioConfig, out_dir: impl Into<PathBuf>) -> Self {
        let base_size = ScenarioSize::new(base.cues, base.pairs, base.bs_antennas, base.eve_antennas);
        let speed = base.speed_kmh;
        let (sizes, pairs, eve, speeds, methods, seeds) = match kind {
            ExperimentKind::Convergence => (
                vec![ScenarioSize::new(4, 4, 4, 2), ScenarioSize::new(8, 8, 8, 4)],
                vec![],
                vec![],
                vec![speed],
                Method::ALL.to_vec(),
                3,
            ),
            ExperimentKind::Runtime => (
                vec![
                    ScenarioSize::new(4, 4, 4, 2),
                    ScenarioSize::new(6, 6, 6, 3),
                    ScenarioSize::new(8, 8, 8, 4),
                ],
                vec![],
                vec![],
                vec![speed],
                Method::ALL.to_vec(),
                5,
            ),
            ExperimentKind::Ne => (
                vec![ScenarioSize::new(4, base_size.pairs, 4, base_size.eve_antennas)],
                vec![2, 4, 8],
                vec![2, 4, 6, 8],
                vec![50.0, 100.0],
                vec![Method::FistaL],
                100,
            ),
        };
        Self {
            base,
            sizes,
            pairs,
            eve_antennas: eve,
            speeds,
            methods,
            seeds,
            first_seed: 0,
            blind_eavesdropper: false,
            out_dir: out_dir.into(),
        }
    }

    /// Reads a config file: scenario keys set the base config, `sweep.*`
    /// keys replace parts of the experiment's default grid, and `overrides`
    /// (`key=value`, either kind) are applied last.
    pub fn parse(kind: ExperimentKind, text: &str, overrides: &[String], out_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = parse_pairs(text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut base = ScenarioConfig::default();
        let mut sweep = Vec::new();
        for (k, v) in entries {
            if k.starts_with("sweep.") {
                sweep.push((k, v));
            } else {
                base.set(&k, &v)?;
            }
        }
        base.validate()?;
        let mut spec = Self::defaults(kind, base, out_dir);
        for (k, v) in sweep {
            match k.as_str() {
                "sweep.sizes" => spec.sizes = parse_list(&k, &v)?,
                "sweep.pairs" => spec.pairs = parse_list(&k, &v)?,
                "sweep.ne" => spec.eve_antennas = parse_list(&k, &v)?,
                "sweep.speeds" => spec.speeds = parse_list(&k, &v)?,
                "sweep.methods" => spec.methods = parse_list(&k, &v)?,
                "sweep.seeds" => spec.seeds = parse_list::<u64>(&k, &v)?.first().copied().unwrap_or(0),
                "sweep.first_seed" => spec.first_seed = parse_list::<u64>(&k, &v)?.first().copied().unwrap_or(0),
                "sweep.blind_eve" => {
                    spec.blind_eavesdropper = v
                        .parse()
                        .map_err(|_| Error::Config(format!("`{k}` must be true or false (got `{v}`)")))?
                }
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.speeds.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("experiment grid must have sizes, speeds and methods".into()));
        }
        if self.seeds < 1 {
            return Err(Error::Config(format!("seeds must satisfy seeds >= 1 (got {})", self.seeds)));
        }
        for cell in self.cells() {
            cell.cfg.validate()?;
        }
        Ok(())
    }

    /// Scenario cells in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let pairs: Vec<Option<usize>> = if self.pairs.is_empty() {
            vec![None]
        } else {
            self.pairs.iter().copied().map(Some).collect()
        };
        let eves: Vec<Option<usize>> = if self.eve_antennas.is_empty() {
            vec![None]
        } else {
            self.eve_antennas.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for size in &self.sizes {
            for &k in &pairs {
                for &ne in &eves {
                    for &v in &self.speeds {
                        let cfg = ScenarioConfig {
                            cues: size.cues,
                            pairs: k.unwrap_or(size.pairs),
                            bs_antennas: size.bs_antennas,
                            eve_antennas: ne.unwrap_or(size.eve_antennas),
                            speed_kmh: v,
                            ..self.base.clone()
                        };
                        out.push(Cell::new(cfg));
                    }
                }
            }
        }
        out
    }

    pub fn seed_values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds).map(|i| self.first_seed + i)
    }
}

/// One scenario of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub id: String,
    pub cfg: ScenarioConfig,
}

impl Cell {
    pub fn new(cfg: ScenarioConfig) -> Self {
        Self {
            id: scenario_id(&cfg),
            cfg,
        }
    }
}

/// e.g. `M4_K4_Nt4_Ne2_v50`
pub fn scenario_id(cfg: &ScenarioConfig) -> String {
    format!(
        "M{}_K{}_Nt{}_Ne{}_v{}",
        cfg.cues, cfg.pairs, cfg.bs_antennas, cfg.eve_antennas, cfg.speed_kmh
    )
}

/// One solve of one method on one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub method: Method,
    pub seed: u64,
    pub objective_bits_per_s: f64,
    pub per_user_secrecy_bits_per_s: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

/// A solve that returned an error; the sweep continues without it.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub scenario_id: String,
    pub method: Method,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<CellFailure>,
}

struct Solved {
    row: ResultRow,
    trace: SolveTrace,
}

/// Solves every method of `methods` on the channels of `(cell, seed)`.
fn run_unit(cell: &Cell, seed: u64, methods: &[Method], blind: bool) -> Vec<std::result::Result<Solved, CellFailure>> {
    let topo = build_topology(&cell.cfg);
    let mut ch = draw_channels::<f64>(&cell.cfg, &topo, seed);
    if blind {
        ch.blind_eavesdropper();
    }
    let fail = |method: Method, e: Error| CellFailure {
        scenario_id: cell.id.clone(),
        method,
        seed,
        message: e.to_string(),
    };
    let prob = match SecrecyProblem::with_optimal_eve(&cell.cfg, &ch, &topo) {
        Ok(p) => p,
        Err(e) => {
            let message = e.to_string();
            return methods
                .iter()
                .map(|&method| {
                    Err(CellFailure {
                        scenario_id: cell.id.clone(),
                        method,
                        seed,
                        message: message.clone(),
                    })
                })
                .collect();
        }
    };
    methods
        .iter()
        .map(|&method| {
            let clock = Instant::now();
            let (p, trace) = solve_with(method, &prob, &cell.cfg).map_err(|e| fail(method, e))?;
            let wall = clock.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
            let objective = prob.objective(&p);
            Ok(Solved {
                row: ResultRow {
                    scenario_id: cell.id.clone(),
                    method,
                    seed,
                    objective_bits_per_s: objective,
                    per_user_secrecy_bits_per_s: objective / cell.cfg.pairs as f64,
                    iterations: trace.iters,
                    wall_time_s: wall,
                },
                trace,
            })
        })
        .collect()
}

type UnitResult = (Cell, u64, Vec<std::result::Result<Solved, CellFailure>>);

fn run_units(spec: &ExperimentSpec, parallel: bool) -> Vec<UnitResult> {
    let units: Vec<(Cell, u64)> = spec
        .cells()
        .into_iter()
        .flat_map(|c| spec.seed_values().map(move |s| (c.clone(), s)))
        .collect();
    let work = |(cell, seed): (Cell, u64)| {
        let out = run_unit(&cell, seed, &spec.methods, spec.blind_eavesdropper);
        (cell, seed, out)
    };
    if parallel {
        units.into_par_iter().map(work).collect()
    } else {
        units.into_iter().map(work).collect()
    }
}

fn split(results: Vec<UnitResult>) -> (SweepOutcome, Vec<(Cell, u64, Solved)>) {
    let mut outcome = SweepOutcome::default();
    let mut solved = Vec::new();
    for (cell, seed, list) in results {
        for r in list {
            match r {
                Ok(s) => {
                    outcome.rows.push(s.row.clone());
                    solved.push((cell.clone(), seed, s));
                }
                Err(f) => outcome.failures.push(f),
            }
        }
    }
    (outcome, solved)
}

/// File name of one convergence trace.
pub fn trace_file_name(scenario_id: &str, seed: u64, method: Method) -> String {
    format!("trace_{scenario_id}_seed{seed}_{method}.csv")
}

/// Solves every (cell, seed, method), writing one trace CSV each plus
/// `results.csv` and `summary.csv` into the output directory.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let (outcome, solved) = split(run_units(spec, true));
    for (cell, seed, s) in &solved {
        let path = spec.out_dir.join(trace_file_name(&cell.id, *seed, s.row.method));
        s.trace.write_csv(fs::File::create(path)?)?;
    }
    write_outputs(spec, &outcome)?;
    Ok(outcome)
}

/// Times every method sequentially so measurements do not compete for
/// cores, then writes `results.csv`, `summary.csv` and `speedups.csv`.
pub fn run_runtime_table(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let (outcome, _) = split(run_units(spec, false));
    write_outputs(spec, &outcome)?;
    write_speedups(&spec.out_dir.join("speedups.csv"), &speedups(&outcome.rows))?;
    Ok(outcome)
}

/// Per-user secrecy rate over the grid; writes `results.csv` and `summary.csv`.
pub fn run_ne_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    if spec.eve_antennas.is_empty() {
        return Err(Error::Config("the Ne sweep needs a non-empty sweep.ne list".into()));
    }
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let (outcome, _) = split(run_units(spec, true));
    write_outputs(spec, &outcome)?;
    Ok(outcome)
}

pub fn run_experiment(kind: ExperimentKind, spec: &ExperimentSpec) -> Result<SweepOutcome> {
    match kind {
        ExperimentKind::Convergence => run_convergence(spec),
        ExperimentKind::Runtime => run_runtime_table(spec),
        ExperimentKind::Ne => run_ne_sweep(spec),
    }
}

fn write_outputs(spec: &ExperimentSpec, outcome: &SweepOutcome) -> Result<()> {
    write_results(&spec.out_dir.join("results.csv"), &outcome.rows)?;
    write_summary(&spec.out_dir.join("summary.csv"), &summarize(&outcome.rows))?;
    if !outcome.failures.is_empty() {
        let mut w = csv::Writer::from_path(spec.out_dir.join("failures.csv"))?;
        w.write_record(["scenario_id", "method", "seed", "message"])?;
        for f in &outcome.failures {
            w.write_record([f.scenario_id.as_str(), f.method.name(), &f.seed.to_string(), &f.message])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub const RESULT_COLUMNS: [&str; 7] = [
    "scenario_id",
    "method",
    "seed",
    "objective_bits_per_s",
    "per_user_secrecy_bits_per_s",
    "iterations",
    "wall_time_s",
];

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.method.to_string(),
            r.seed.to_string(),
            r.objective_bits_per_s.to_string(),
            r.per_user_secrecy_bits_per_s.to_string(),
            r.iterations.to_string(),
            r.wall_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Means and sample standard deviations over the seeds of one (cell, method).
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub method: Method,
    pub runs: usize,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub mean_per_user: f64,
    pub std_per_user: f64,
    pub mean_iterations: f64,
    pub mean_wall_time_s: f64,
    pub std_wall_time_s: f64,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups rows by (scenario, method) in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in rows {
        let key = (r.scenario_id.clone(), r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(id, method)| {
            let group: Vec<&ResultRow> = rows.iter().filter(|r| r.scenario_id == id && r.method == method).collect();
            let col = |f: fn(&ResultRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (mean_objective, std_objective) = mean_std(&col(|r| r.objective_bits_per_s));
            let (mean_per_user, std_per_user) = mean_std(&col(|r| r.per_user_secrecy_bits_per_s));
            let (mean_iterations, _) = mean_std(&col(|r| r.iterations as f64));
            let (mean_wall_time_s, std_wall_time_s) = mean_std(&col(|r| r.wall_time_s));
            SummaryRow {
                scenario_id: id,
                method,
                runs: group.len(),
                mean_objective,
                std_objective,
                mean_per_user,
                std_per_user,
                mean_iterations,
                mean_wall_time_s,
                std_wall_time_s,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario_id",
        "method",
        "runs",
        "mean_objective_bits_per_s",
        "std_objective_bits_per_s",
        "mean_per_user_secrecy_bits_per_s",
        "std_per_user_secrecy_bits_per_s",
        "mean_iterations",
        "mean_wall_time_s",
        "std_wall_time_s",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.method.to_string(),
            r.runs.to_string(),
            r.mean_objective.to_string(),
            r.std_objective.to_string(),
            r.mean_per_user.to_string(),
            r.std_per_user.to_string(),
            r.mean_iterations.to_string(),
            r.mean_wall_time_s.to_string(),
            r.std_wall_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean-time ratios of one scenario; `None` where a method is missing.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedupRow {
    pub scenario_id: String,
    pub sca_over_fista: Option<f64>,
    pub sca_over_fista_l: Option<f64>,
    pub fista_over_fista_l: Option<f64>,
}

pub fn speedups(rows: &[ResultRow]) -> Vec<SpeedupRow> {
    let summary = summarize(rows);
    let mut ids: Vec<String> = Vec::new();
    for s in &summary {
        if !ids.contains(&s.scenario_id) {
            ids.push(s.scenario_id.clone());
        }
    }
    ids.into_iter()
        .map(|id| {
            let t = |m: Method| {
                summary
                    .iter()
                    .find(|s| s.scenario_id == id && s.method == m)
                    .map(|s| s.mean_wall_time_s)
            };
            let ratio = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a / b);
            SpeedupRow {
                sca_over_fista: ratio(t(Method::Sca), t(Method::Fista)),
                sca_over_fista_l: ratio(t(Method::Sca), t(Method::FistaL)),
                fista_over_fista_l: ratio(t(Method::Fista), t(Method::FistaL)),
                scenario_id: id,
            }
        })
        .collect()
}

fn write_speedups(path: &Path, rows: &[SpeedupRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario_id", "sca_over_fista", "sca_over_fista_l", "fista_over_fista_l"])?;
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            fmt(r.sca_over_fista),
            fmt(r.sca_over_fista_l),
            fmt(r.fista_over_fista_l),
        ])?;
    }
    w.flush()?;
    Ok(())
}
