//! Successive convex approximation: repeatedly solve a convex inner
//! approximation built around the current powers.

pub mod barrier;
pub mod surrogate;

use std::time::Instant;

pub use barrier::{
    exp2_tangent, product_lower_bound, product_upper_bound, solve_barrier, BarrierOutcome, BarrierSettings,
    Constraint, ConvexProgram,
};
pub use surrogate::{build_surrogate, CellVars, SubproblemModel, SurrogatePoint};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::phy::{EveCombiner, PowerAllocation, SecrecyProblem};
use crate::scalar::Scalar;
use crate::scenario::{InterferenceTopology, ScenarioConfig};
use crate::trace::{relative_change, SolveStatus, SolveTrace};

#[derive(Clone, Debug, PartialEq)]
pub struct ScaSettings<T> {
    /// Stop when the relative change of the true objective falls below this.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub barrier: BarrierSettings<T>,
    /// Keep every outer iterate in [`SolveTrace::iterates`].
    pub record_iterates: bool,
}

impl<T: Scalar> Default for ScaSettings<T> {
    fn default() -> Self {
        Self {
            outer_tol: 1e-5,
            max_outer: 500,
            barrier: BarrierSettings::default(),
            record_iterates: false,
        }
    }
}

/// Rate slacks of a subproblem solution, in bits/s. Pairs without positive
/// secrecy at the expansion point carry no slacks and read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Slacks<T> {
    pub zeta: Grid<T>,
    pub gamma: Grid<T>,
    pub active: Grid<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution<T> {
    pub power: PowerAllocation<T>,
    pub slacks: Slacks<T>,
    /// Surrogate objective `W * sum(zeta - gamma)` in bits/s.
    pub surrogate_objective: T,
    pub newton_steps: usize,
    pub kkt_residual: T,
    pub duality_gap: T,
}

/// Solves one convex model from its interior start.
pub fn solve_subproblem<T: Scalar>(model: &SubproblemModel<T>, settings: &BarrierSettings<T>) -> Result<SubproblemSolution<T>> {
    let out = solve_barrier(&model.program, model.start.clone(), settings)?;
    let (pairs, blocks) = (model.pairs, model.blocks);
    let mut zeta = Grid::filled(pairs, blocks, T::zero());
    let mut gamma = Grid::filled(pairs, blocks, T::zero());
    for c in &model.cells {
        zeta[(c.k, c.m)] = out.x[c.zeta] * model.bandwidth;
        gamma[(c.k, c.m)] = out.x[c.gamma] * model.bandwidth;
    }
    Ok(SubproblemSolution {
        power: model.power_of(&out.x),
        slacks: Slacks {
            zeta,
            gamma,
            active: model.point.active.clone(),
        },
        surrogate_objective: model.objective_bits(&out.x),
        newton_steps: out.newton_steps,
        kkt_residual: out.kkt_residual,
        duality_gap: out.duality_gap,
    })
}

/// SCA on a prepared problem.
///
/// The trace records the true sum secrecy rate. An outer step that would
/// lower it (possible only through inner-solver inaccuracy) is discarded and
/// the solve ends at the previous iterate.
pub fn solve_sca_problem<T: Scalar>(
    prob: &SecrecyProblem<T>,
    p0: &PowerAllocation<T>,
    settings: &ScaSettings<T>,
) -> Result<(PowerAllocation<T>, SolveTrace)> {
    prob.check_box(p0)?;
    let clock = Instant::now();
    let mut p = p0.clone();
    let mut r = prob.objective(&p);
    if !r.is_finite() {
        return Err(Error::NonFiniteObjective { iter: 0 });
    }
    let mut trace = SolveTrace::start(r.to_f64_lossy());
    if settings.record_iterates {
        trace.record(p.as_slice());
    }
    let wrap = |outer: usize| move |e: Error| Error::Sca { outer, source: Box::new(e) };

    for outer in 1..=settings.max_outer {
        let model = build_surrogate(prob, &p).map_err(wrap(outer))?;
        if model.cells.is_empty() {
            // every pair is clipped: the model has nothing to improve
            trace.push(r.to_f64_lossy(), 0.0, clock.elapsed().as_secs_f64());
            if settings.record_iterates {
                trace.record(p.as_slice());
            }
            trace.status = SolveStatus::Converged;
            break;
        }
        let sol = solve_subproblem(&model, &settings.barrier).map_err(wrap(outer))?;
        let r_new = prob.objective(&sol.power);
        if !r_new.is_finite() {
            return Err(Error::Sca {
                outer,
                source: Box::new(Error::NonFiniteObjective { iter: outer }),
            });
        }
        if r_new < r {
            trace.push(r.to_f64_lossy(), 0.0, clock.elapsed().as_secs_f64());
            if settings.record_iterates {
                trace.record(p.as_slice());
            }
            trace.status = SolveStatus::Converged;
            break;
        }
        let change = relative_change(r.to_f64_lossy(), r_new.to_f64_lossy());
        let step = sol.power.distance(&p);
        p = sol.power;
        r = r_new;
        trace.push(r.to_f64_lossy(), step.to_f64_lossy(), clock.elapsed().as_secs_f64());
        if settings.record_iterates {
            trace.record(p.as_slice());
        }
        if change < settings.outer_tol {
            trace.status = SolveStatus::Converged;
            break;
        }
    }
    trace.wall_time_s = clock.elapsed().as_secs_f64();
    Ok((p, trace))
}

/// SCA from `p0` with the given outer tolerance and iteration cap.
pub fn solve_sca<T: Scalar>(
    p0: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    topo: &InterferenceTopology,
    w: &EveCombiner<T>,
    cfg: &ScenarioConfig,
    outer_tol: f64,
    max_outer: usize,
) -> Result<(PowerAllocation<T>, SolveTrace)> {
    let prob = SecrecyProblem::new(cfg, ch, topo, w)?;
    let settings = ScaSettings {
        outer_tol,
        max_outer,
        ..Default::default()
    };
    solve_sca_problem(&prob, p0, &settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels;
    use crate::phy::eve_combiner;
    use crate::scenario::build_topology;
    use num_complex::Complex;

    fn problem(seed: u64, cfg: &ScenarioConfig) -> SecrecyProblem<f64> {
        let topo = build_topology(cfg);
        let ch = draw_channels::<f64>(cfg, &topo, seed);
        SecrecyProblem::new(cfg, &ch, &topo, &eve_combiner(&ch, cfg)).unwrap()
    }

    fn calibrated() -> ScenarioConfig {
        ScenarioConfig {
            gain_cue_eve: 0.01,
            gain_vue_eve: 0.01,
            ..Default::default()
        }
    }

    #[test]
    fn expansion_point_satisfies_its_model() {
        let cfg = calibrated();
        let prob = problem(3, &cfg);
        let p = PowerAllocation::uniform(4, 4, 0.5);
        let model = build_surrogate(&prob, &p).unwrap();
        assert!(!model.cells.is_empty());
        assert!(model.program.max_violation(&model.start) < 0.0);
        // the surrogate is tight at the expansion point
        let r = prob.objective(&p);
        let s = model.objective_bits(&model.expansion);
        assert!((r - s).abs() <= 1e-9 * r, "{r} vs {s}");
    }

    #[test]
    fn surrogate_points_are_safe() {
        let cfg = calibrated();
        let prob = problem(5, &cfg);
        let p = PowerAllocation::uniform(4, 4, 0.5);
        let model = build_surrogate(&prob, &p).unwrap();
        let sol = solve_subproblem(&model, &BarrierSettings::default()).unwrap();
        for c in &model.cells {
            let (cv, ce) = prob.capacities(&sol.power, c.k, c.m);
            assert!(cv >= sol.slacks.zeta[(c.k, c.m)] * (1.0 - 1e-9));
            assert!(ce <= sol.slacks.gamma[(c.k, c.m)] * (1.0 + 1e-9) + 1e-6);
        }
        assert!(prob.objective(&sol.power) >= sol.surrogate_objective * (1.0 - 1e-9));
        assert!(sol.kkt_residual <= 1e-8 || sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn single_link_without_wiretap_goes_to_full_power() {
        let cfg = ScenarioConfig {
            pairs: 1,
            cues: 1,
            ..Default::default()
        };
        let topo = build_topology(&cfg);
        let mut ch = ChannelRealization::zeros(1, 1, cfg.eve_antennas);
        *ch.desired_mut(0, 0) = Complex::new(1.2, -0.4);
        *ch.cue_to_vue_mut(0, 0) = Complex::new(0.3, 0.1);
        let w = eve_combiner(&ch, &cfg);
        let p0 = PowerAllocation::uniform(1, 1, 0.5);
        let (p, trace) = solve_sca(&p0, &ch, &topo, &w, &cfg, 1e-5, 50).unwrap();
        assert!((p.get(0, 0) - 1.0_f64).abs() < 1e-6, "{}", p.get(0, 0));
        let g = 1.2f64.powi(2) + 0.16;
        let closed = cfg.per_rb_bandwidth() * (1.0 + g / (1.0 + 0.1)).log2();
        assert!((trace.final_objective() - closed).abs() <= 1e-6 * closed);
        assert_eq!(trace.status, SolveStatus::Converged);
    }

    #[test]
    fn outer_iterations_never_decrease_the_objective() {
        let cfg = calibrated();
        for seed in 0..3 {
            let prob = problem(seed, &cfg);
            let p0 = PowerAllocation::uniform(4, 4, 0.5);
            let (p, trace) = solve_sca_problem(&prob, &p0, &ScaSettings::default()).unwrap();
            prob.check_box(&p).unwrap();
            for w in trace.objective_per_iter.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
            }
            assert_eq!(trace.status, SolveStatus::Converged);
            assert!(trace.final_objective() > trace.objective_per_iter[0]);
        }
    }

    #[test]
    fn errors_carry_outer_context() {
        let cfg = calibrated();
        let prob = problem(1, &cfg);
        let settings = ScaSettings {
            barrier: BarrierSettings {
                max_newton_per_center: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let p0 = PowerAllocation::uniform(4, 4, 0.5);
        match solve_sca_problem(&prob, &p0, &settings) {
            Err(Error::Sca { outer: 1, source }) => assert!(matches!(*source, Error::BarrierDivergence { .. })),
            other => panic!("unexpected {other:?}"),
        }
    }
}
