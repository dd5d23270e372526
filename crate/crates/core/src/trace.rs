//! Per-iteration solver history shared by every method.

use std::io::Write;

use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Relative objective change fell below the tolerance.
    Converged,
    MaxIters,
    /// Backtracking shrank the step below the minimum without an ascent.
    Stalled,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Stalled => "stalled",
        }
    }
}

/// Objective history of one solve. Entry 0 is the starting point.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    /// True sum secrecy rate, bits/s.
    pub objective_per_iter: Vec<f64>,
    /// Step size used to produce each iterate (0 for the starting point).
    pub step_per_iter: Vec<f64>,
    /// Seconds since the solve started, at each iterate.
    pub cum_time_s: Vec<f64>,
    pub wall_time_s: f64,
    pub iters: usize,
    pub status: SolveStatus,
    /// Powers at each recorded objective, row-major `K x M`. Only filled
    /// when the solver settings ask for it.
    pub iterates: Vec<Vec<f64>>,
}

impl SolveTrace {
    pub(crate) fn start(objective: f64) -> Self {
        Self {
            objective_per_iter: vec![objective],
            step_per_iter: vec![0.0],
            cum_time_s: vec![0.0],
            wall_time_s: 0.0,
            iters: 0,
            status: SolveStatus::MaxIters,
            iterates: Vec::new(),
        }
    }

    pub(crate) fn record<T: Scalar>(&mut self, p: &[T]) {
        self.iterates.push(p.iter().map(|v| v.to_f64_lossy()).collect());
    }

    pub(crate) fn push(&mut self, objective: f64, step: f64, elapsed_s: f64) {
        self.objective_per_iter.push(objective);
        self.step_per_iter.push(step);
        self.cum_time_s.push(elapsed_s);
        self.iters += 1;
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_per_iter.last().expect("trace has a starting point")
    }

    /// Relative change between the last two recorded objectives.
    pub fn last_relative_change(&self) -> Option<f64> {
        let n = self.objective_per_iter.len();
        (n >= 2).then(|| relative_change(self.objective_per_iter[n - 2], self.objective_per_iter[n - 1]))
    }

    /// CSV with columns `iter,objective_bits_per_s,step_size,cum_time_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "objective_bits_per_s", "step_size", "cum_time_s"])?;
        for i in 0..self.objective_per_iter.len() {
            w.write_record([
                i.to_string(),
                self.objective_per_iter[i].to_string(),
                self.step_per_iter[i].to_string(),
                self.cum_time_s[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|new - old| / |old|`, with `0/0 = 0`.
pub fn relative_change(old: f64, new: f64) -> f64 {
    let diff = (new - old).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / old.abs().max(f64::MIN_POSITIVE)
    }
}
