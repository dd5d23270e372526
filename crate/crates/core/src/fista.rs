//! Projected gradient ascent on the power box, with a fixed step (FISTA) or a
//! per-iteration backtracking linesearch (FISTA-L).

use std::time::Instant;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::gradient::gradient_unchecked;
use crate::grid::Grid;
use crate::phy::{EveCombiner, PowerAllocation, SecrecyProblem};
use crate::scalar::Scalar;
use crate::scenario::{InterferenceTopology, ScenarioConfig};
use crate::trace::{relative_change, SolveStatus, SolveTrace};

#[derive(Clone, Debug, PartialEq)]
pub struct FistaSettings<T> {
    /// Fixed step for the plain method. `None` estimates one at `p0`.
    pub alpha: Option<T>,
    /// Sufficient-ascent weight of the linesearch.
    pub delta: T,
    pub max_iters: usize,
    /// Relative objective change that ends the solve.
    pub tol: T,
    pub use_linesearch: bool,
    /// Nesterov extrapolation with restart on objective decrease.
    pub use_momentum: bool,
    pub epsilon_p: T,
    /// First trial step of every backtracking pass.
    pub initial_step: T,
    pub backtrack_factor: T,
    /// Backtracking gives up below this step.
    pub min_step: T,
    /// Keep every iterate in [`SolveTrace::iterates`].
    pub record_iterates: bool,
}

impl<T: Scalar> FistaSettings<T> {
    /// Fixed-step variant.
    pub fn fista(cfg: &ScenarioConfig) -> Self {
        Self {
            alpha: None,
            delta: T::of(1e-5),
            max_iters: 20_000,
            tol: T::of(1e-5),
            use_linesearch: false,
            use_momentum: false,
            epsilon_p: T::of(cfg.epsilon_p()),
            initial_step: T::one(),
            backtrack_factor: T::of(0.5),
            min_step: T::of(1e-20),
            record_iterates: false,
        }
    }

    /// Linesearch variant.
    pub fn fista_l(cfg: &ScenarioConfig) -> Self {
        Self {
            use_linesearch: true,
            ..Self::fista(cfg)
        }
    }

    pub fn validate(&self, p_max: T) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("FISTA settings: {what}")));
        if let Some(a) = self.alpha {
            if !(a > T::zero()) {
                return bad("alpha must be > 0");
            }
        }
        if !(self.delta > T::zero()) {
            return bad("delta must be > 0");
        }
        if !(self.tol > T::zero()) {
            return bad("tol must be > 0");
        }
        if !(self.epsilon_p > T::zero() && self.epsilon_p < p_max) {
            return bad("epsilon_p must lie in (0, p_max)");
        }
        if !(self.backtrack_factor > T::zero() && self.backtrack_factor < T::one()) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Euclidean projection onto `[epsilon_p, p_max]^(K x M)`.
pub fn project_box<T: Scalar>(x: &Grid<T>, p_max: T, epsilon_p: T) -> PowerAllocation<T> {
    PowerAllocation::from_grid(x.map(|&v| v.max(epsilon_p).min(p_max)))
}

/// `project(p + step * grad)`
fn ascent_point<T: Scalar>(p: &PowerAllocation<T>, grad: &Grid<T>, step: T, p_max: T, floor: T) -> PowerAllocation<T> {
    let moved = Grid::from_fn(p.pairs(), p.blocks(), |k, m| p.get(k, m) + step * grad[(k, m)]);
    project_box(&moved, p_max, floor)
}

fn sq_dist<T: Scalar>(a: &PowerAllocation<T>, b: &PowerAllocation<T>) -> T {
    a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Backtracks from `initial_step` until the quadratic model with curvature
/// `1/step` lower-bounds `R` at the projected point, i.e. a local `1/L`.
pub fn lipschitz_step<T: Scalar>(prob: &SecrecyProblem<T>, p: &PowerAllocation<T>, settings: &FistaSettings<T>) -> T {
    let r = prob.objective(p);
    let g = gradient_unchecked(prob, p);
    let mut step = settings.initial_step;
    while step >= settings.min_step {
        let cand = ascent_point(p, g.grid(), step, prob.p_max(), settings.epsilon_p);
        let linear: T = cand
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .zip(g.grid().iter())
            .map(|((&c, &x), &gi)| gi * (c - x))
            .sum();
        let model = r + linear - sq_dist(&cand, p) / (T::of(2.0) * step);
        if prob.objective(&cand) >= model {
            return step;
        }
        step *= settings.backtrack_factor;
    }
    settings.min_step
}

/// Projected gradient ascent from `p0` on a prepared problem.
pub fn solve_fista_problem<T: Scalar>(
    prob: &SecrecyProblem<T>,
    p0: &PowerAllocation<T>,
    settings: &FistaSettings<T>,
) -> Result<(PowerAllocation<T>, SolveTrace)> {
    settings.validate(prob.p_max())?;
    prob.check_box(p0)?;
    let clock = Instant::now();
    let (p_max, floor) = (prob.p_max(), settings.epsilon_p);

    let mut p = p0.clone();
    let mut r = prob.objective(&p);
    if !r.is_finite() {
        return Err(Error::NonFiniteObjective { iter: 0 });
    }
    let mut trace = SolveTrace::start(r.to_f64_lossy());
    if settings.record_iterates {
        trace.record(p.as_slice());
    }
    let fixed_step = match (settings.use_linesearch, settings.alpha) {
        (true, _) => None,
        (false, Some(a)) => Some(a),
        (false, None) => Some(lipschitz_step(prob, &p, settings)),
    };

    // momentum state
    let mut y = p.clone();
    let mut r_y = r;
    let mut theta = T::one();

    for iter in 1..=settings.max_iters {
        let base = if settings.use_momentum { &y } else { &p };
        let r_base = if settings.use_momentum { r_y } else { r };
        let g = gradient_unchecked(prob, base);

        let (cand, r_cand, step) = match fixed_step {
            Some(step) => {
                let cand = ascent_point(base, g.grid(), step, p_max, floor);
                let rc = prob.objective(&cand);
                (cand, rc, step)
            }
            None => {
                let mut step = settings.initial_step;
                loop {
                    let cand = ascent_point(base, g.grid(), step, p_max, floor);
                    let rc = prob.objective(&cand);
                    if rc >= r_base + settings.delta * sq_dist(&cand, base) {
                        break (cand, rc, step);
                    }
                    if !rc.is_finite() && !r_base.is_finite() {
                        return Err(Error::NonFiniteObjective { iter });
                    }
                    step *= settings.backtrack_factor;
                    if step < settings.min_step {
                        trace.status = SolveStatus::Stalled;
                        trace.wall_time_s = clock.elapsed().as_secs_f64();
                        return Ok((p, trace));
                    }
                }
            }
        };
        if !r_cand.is_finite() {
            return Err(Error::NonFiniteObjective { iter });
        }

        if settings.use_momentum {
            if r_cand < r {
                // restart: drop the extrapolation and retry from the last iterate
                theta = T::one();
                y = p.clone();
                r_y = r;
                trace.push(r.to_f64_lossy(), step.to_f64_lossy(), clock.elapsed().as_secs_f64());
                if settings.record_iterates {
                    trace.record(p.as_slice());
                }
                continue;
            }
            let theta_next = (T::one() + (T::one() + T::of(4.0) * theta * theta).sqrt()) / T::of(2.0);
            let beta = (theta - T::one()) / theta_next;
            let extrap = Grid::from_fn(p.pairs(), p.blocks(), |k, m| {
                cand.get(k, m) + beta * (cand.get(k, m) - p.get(k, m))
            });
            y = project_box(&extrap, p_max, floor);
            r_y = prob.objective(&y);
            theta = theta_next;
        }

        let change = relative_change(r.to_f64_lossy(), r_cand.to_f64_lossy());
        p = cand;
        r = r_cand;
        trace.push(r.to_f64_lossy(), step.to_f64_lossy(), clock.elapsed().as_secs_f64());
        if settings.record_iterates {
            trace.record(p.as_slice());
        }
        if change < settings.tol.to_f64_lossy() {
            trace.status = SolveStatus::Converged;
            break;
        }
    }
    trace.wall_time_s = clock.elapsed().as_secs_f64();
    Ok((p, trace))
}

/// Projected gradient ascent from `p0`.
pub fn solve_fista<T: Scalar>(
    p0: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    topo: &InterferenceTopology,
    w: &EveCombiner<T>,
    cfg: &ScenarioConfig,
    settings: &FistaSettings<T>,
) -> Result<(PowerAllocation<T>, SolveTrace)> {
    let prob = SecrecyProblem::new(cfg, ch, topo, w)?;
    solve_fista_problem(&prob, p0, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels;
    use crate::phy::eve_combiner;
    use crate::scenario::build_topology;
    use num_complex::Complex;
    use proptest::prelude::*;

    fn single_link() -> (ScenarioConfig, ChannelRealization<f64>, InterferenceTopology) {
        let cfg = ScenarioConfig {
            pairs: 1,
            cues: 1,
            ..Default::default()
        };
        let mut ch = ChannelRealization::zeros(1, 1, cfg.eve_antennas);
        *ch.desired_mut(0, 0) = Complex::new(0.9, 0.3);
        let topo = build_topology(&cfg);
        (cfg, ch, topo)
    }

    #[test]
    fn projection_examples() {
        let inside = Grid::from_vec(1, 3, vec![0.2, 0.5, 1.0]).unwrap();
        assert_eq!(project_box(&inside, 1.0, 1e-12).into_grid(), inside);
        let above = Grid::filled(2, 2, 2.0);
        assert!(project_box(&above, 1.0, 1e-12).as_slice().iter().all(|&p| p == 1.0));
        let below = Grid::filled(1, 1, -3.0);
        assert_eq!(project_box(&below, 1.0, 1e-12).get(0, 0), 1e-12);
    }

    proptest! {
        #[test]
        fn projection_matches_per_coordinate_qp(xs in prop::collection::vec(-3.0f64..3.0, 9)) {
            let x = Grid::from_vec(3, 3, xs.clone()).unwrap();
            let p = project_box(&x, 1.0, 1e-3);
            for (i, &xi) in xs.iter().enumerate() {
                // minimizer of (p - x)^2 on [lo, hi]: the interior stationary
                // point if admissible, else the better endpoint
                let candidates = [1e-3, 1.0, xi];
                let best = candidates
                    .iter()
                    .copied()
                    .filter(|c| (1e-3..=1.0).contains(c))
                    .min_by(|a, b| (a - xi).abs().partial_cmp(&(b - xi).abs()).unwrap())
                    .unwrap();
                prop_assert_eq!(p.as_slice()[i], best);
            }
            let again = project_box(p.grid(), 1.0, 1e-3);
            prop_assert_eq!(again, p);
        }
    }

    #[test]
    fn single_link_reaches_full_power() {
        let (cfg, ch, topo) = single_link();
        let w = eve_combiner(&ch, &cfg);
        for settings in [FistaSettings::fista(&cfg), FistaSettings::fista_l(&cfg)] {
            let p0 = PowerAllocation::uniform(1, 1, 0.5);
            let (p, trace) = solve_fista(&p0, &ch, &topo, &w, &cfg, &settings).unwrap();
            assert_eq!(trace.status, SolveStatus::Converged);
            assert!((p.get(0, 0) - 1.0).abs() < 1e-9, "{}", p.get(0, 0));
            let closed = 20e6 * (1.0f64 + 0.9).log2();
            assert!((trace.final_objective() - closed).abs() < 1e-6 * closed);
        }
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let (cfg, ch, topo) = single_link();
        let w = eve_combiner(&ch, &cfg);
        let p0 = PowerAllocation::uniform(1, 1, 1.0);
        for settings in [FistaSettings::fista(&cfg), FistaSettings::fista_l(&cfg)] {
            let (p, trace) = solve_fista(&p0, &ch, &topo, &w, &cfg, &settings).unwrap();
            assert!(trace.iters <= 2);
            assert_eq!(p, p0);
        }
    }

    #[test]
    fn linesearch_iterates_ascend_and_stay_feasible() {
        let cfg = ScenarioConfig {
            gain_vue_eve: 0.2,
            gain_cue_eve: 0.2,
            ..Default::default()
        };
        let topo = build_topology(&cfg);
        for seed in 0..5 {
            let ch = draw_channels(&cfg, &topo, seed);
            let prob = SecrecyProblem::with_optimal_eve(&cfg, &ch, &topo).unwrap();
            let p0 = PowerAllocation::uniform(4, 4, 0.5);
            let settings = FistaSettings {
                max_iters: 1,
                ..FistaSettings::fista_l(&cfg)
            };
            let mut p = p0;
            let mut last = prob.objective(&p);
            for _ in 0..50 {
                let (next, trace) = solve_fista_problem(&prob, &p, &settings).unwrap();
                prob.check_box(&next).unwrap();
                assert!(trace.final_objective() >= last);
                last = trace.final_objective();
                p = next;
            }
        }
    }

    #[test]
    fn solves_are_deterministic() {
        let cfg = ScenarioConfig::default();
        let topo = build_topology(&cfg);
        let ch = draw_channels(&cfg, &topo, 2);
        let prob = SecrecyProblem::with_optimal_eve(&cfg, &ch, &topo).unwrap();
        let p0 = PowerAllocation::uniform(4, 4, 0.5);
        for settings in [FistaSettings::fista(&cfg), FistaSettings::fista_l(&cfg)] {
            let (pa, ta) = solve_fista_problem(&prob, &p0, &settings).unwrap();
            let (pb, tb) = solve_fista_problem(&prob, &p0, &settings).unwrap();
            assert_eq!(pa, pb);
            assert_eq!(ta.objective_per_iter, tb.objective_per_iter);
            assert_eq!(ta.step_per_iter, tb.step_per_iter);
        }
    }

    #[test]
    fn momentum_variant_stays_feasible_and_improves() {
        let cfg = ScenarioConfig::default();
        let topo = build_topology(&cfg);
        let ch = draw_channels(&cfg, &topo, 6);
        let prob = SecrecyProblem::with_optimal_eve(&cfg, &ch, &topo).unwrap();
        let p0 = PowerAllocation::uniform(4, 4, 0.5);
        let settings = FistaSettings {
            use_momentum: true,
            ..FistaSettings::fista(&cfg)
        };
        let (p, trace) = solve_fista_problem(&prob, &p0, &settings).unwrap();
        prob.check_box(&p).unwrap();
        assert!(trace.final_objective() >= trace.objective_per_iter[0]);
    }

    #[test]
    fn rejects_infeasible_start_and_bad_settings() {
        let (cfg, ch, topo) = single_link();
        let w = eve_combiner(&ch, &cfg);
        let p0 = PowerAllocation::uniform(1, 1, 2.0);
        assert!(solve_fista(&p0, &ch, &topo, &w, &cfg, &FistaSettings::fista(&cfg)).is_err());
        let settings = FistaSettings {
            tol: 0.0,
            ..FistaSettings::fista(&cfg)
        };
        let p0 = PowerAllocation::uniform(1, 1, 0.5);
        assert!(matches!(
            solve_fista(&p0, &ch, &topo, &w, &cfg, &settings),
            Err(Error::Config(_))
        ));
    }
}
