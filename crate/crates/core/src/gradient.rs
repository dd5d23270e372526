//! Closed-form gradient of the sum secrecy rate and its finite-difference check.
//!
//! For an unclipped term `(k, m)` with `A = p_k |g_k|^2`, `B` the legitimate
//! interference-plus-noise, `C = p_k |w^H h_ke|^2` and `D` the eavesdropper
//! interference-plus-noise:
//!
//! ```text
//! dC_k/dp_k   = W/ln2 * |g_k|^2 / (A + B)
//! dC_k/dp_i   = W/ln2 * (|h_ki|^2 / (A + B) - |h_ki|^2 / B)      i != k
//! dC_ke/dp_k  = W/ln2 * |w^H h_ke|^2 / (C + D)
//! dC_ke/dp_i  = 0                                                 i != k
//! ```
//!
//! A term with `C_k <= C_ke` is clipped and contributes nothing.

use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::grid::Grid;
use crate::phy::{EveCombiner, PowerAllocation, SecrecyProblem};
use crate::scalar::Scalar;
use crate::scenario::{InterferenceTopology, ScenarioConfig};

/// `dR/dp` in bits/s per watt, one entry per (k, m).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector<T>(pub Grid<T>);

impl<T: Scalar> GradientVector<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.0
    }

    pub fn get(&self, k: usize, m: usize) -> T {
        self.0[(k, m)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Whether term `(k, m)` is inside the positive part of `[C_k - C_ke]_+`.
#[inline]
fn unclipped<T: Scalar>(prob: &SecrecyProblem<T>, p: &PowerAllocation<T>, k: usize, m: usize) -> bool {
    let (cv, ce) = prob.capacities(p, k, m);
    cv - ce > T::zero()
}

/// Adds `scale * grad(C_k^m - C_ke^m)` into `out` (block `m` only).
fn accumulate_term<T: Scalar>(
    prob: &SecrecyProblem<T>,
    p: &PowerAllocation<T>,
    k: usize,
    m: usize,
    scale: T,
    out: &mut Grid<T>,
) {
    let w = prob.bandwidth() / T::LN_2() * scale;
    let pk = p.get(k, m);
    let a = pk * prob.desired_gain(k, m);
    let b = prob.vue_denominator(p, k, m);
    let c = pk * prob.eve_signal_gain(k, m);
    let d = prob.eve_floor(k, m);
    out[(k, m)] += w * (prob.desired_gain(k, m) / (a + b) - prob.eve_signal_gain(k, m) / (c + d));
    for i in 0..prob.pairs() {
        let h = prob.inter_gain(k, i, m);
        if i != k && h > T::zero() {
            out[(i, m)] += w * (h / (a + b) - h / b);
        }
    }
}

/// Gradient of the sum secrecy rate on a prepared problem.
///
/// Requires `p` inside the feasible box.
pub fn gradient<T: Scalar>(prob: &SecrecyProblem<T>, p: &PowerAllocation<T>) -> Result<GradientVector<T>> {
    prob.check_box(p)?;
    Ok(gradient_unchecked(prob, p))
}

/// Gradient without the box check; used by solvers on iterates they produced.
pub fn gradient_unchecked<T: Scalar>(prob: &SecrecyProblem<T>, p: &PowerAllocation<T>) -> GradientVector<T> {
    let mut out = Grid::filled(prob.pairs(), prob.blocks(), T::zero());
    for m in 0..prob.blocks() {
        for k in 0..prob.pairs() {
            if unclipped(prob, p, k, m) {
                accumulate_term(prob, p, k, m, T::one(), &mut out);
            }
        }
    }
    GradientVector(out)
}

/// Gradient of the single term `[C_k^m - C_ke^m]_+`.
pub fn term_gradient<T: Scalar>(
    prob: &SecrecyProblem<T>,
    p: &PowerAllocation<T>,
    k: usize,
    m: usize,
) -> GradientVector<T> {
    let mut out = Grid::filled(prob.pairs(), prob.blocks(), T::zero());
    if unclipped(prob, p, k, m) {
        accumulate_term(prob, p, k, m, T::one(), &mut out);
    }
    GradientVector(out)
}

/// Separate gradients of `C_k^m` and `C_ke^m` (unclipped), in that order.
pub fn capacity_gradients<T: Scalar>(
    prob: &SecrecyProblem<T>,
    p: &PowerAllocation<T>,
    k: usize,
    m: usize,
) -> (Grid<T>, Grid<T>) {
    let w = prob.bandwidth() / T::LN_2();
    let mut dv = Grid::filled(prob.pairs(), prob.blocks(), T::zero());
    let mut de = dv.clone();
    let pk = p.get(k, m);
    let a = pk * prob.desired_gain(k, m);
    let b = prob.vue_denominator(p, k, m);
    dv[(k, m)] = w * prob.desired_gain(k, m) / (a + b);
    for i in (0..prob.pairs()).filter(|&i| i != k) {
        let h = prob.inter_gain(k, i, m);
        dv[(i, m)] = w * (h / (a + b) - h / b);
    }
    let c = pk * prob.eve_signal_gain(k, m);
    de[(k, m)] = w * prob.eve_signal_gain(k, m) / (c + prob.eve_floor(k, m));
    (dv, de)
}

/// `dR/dp` at `p` for the given channels and combiner.
pub fn grad_sum_secrecy<T: Scalar>(
    p: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    topo: &InterferenceTopology,
    w: &EveCombiner<T>,
    cfg: &ScenarioConfig,
) -> Result<GradientVector<T>> {
    let prob = SecrecyProblem::new(cfg, ch, topo, w)?;
    gradient(&prob, p)
}

/// Central differences of `R` with step `h`. `R` separates over resource
/// blocks, so each coordinate differences only its own block's sum.
pub fn finite_difference_gradient<T: Scalar>(prob: &SecrecyProblem<T>, p: &PowerAllocation<T>, h: T) -> Grid<T> {
    let two = T::of(2.0);
    let mut probe = p.clone();
    Grid::from_fn(prob.pairs(), prob.blocks(), |k, m| {
        let base = p.get(k, m);
        probe.grid_mut()[(k, m)] = base + h;
        let up = prob.block_objective(&probe, m);
        probe.grid_mut()[(k, m)] = base - h;
        let down = prob.block_objective(&probe, m);
        probe.grid_mut()[(k, m)] = base;
        (up - down) / (two * h)
    })
}

/// `max |a - b| / max(|a|, floor)` over all entries.
pub fn max_relative_error<T: Scalar>(closed_form: &Grid<T>, reference: &Grid<T>, floor: T) -> T {
    closed_form
        .iter()
        .zip(reference.iter())
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(floor))
        .fold(T::zero(), T::max)
}

/// Relative error of a supplied gradient against central differences.
pub fn finite_diff_error_of<T: Scalar>(
    prob: &SecrecyProblem<T>,
    p: &PowerAllocation<T>,
    grad: &GradientVector<T>,
    h: T,
) -> T {
    let fd = finite_difference_gradient(prob, p, h);
    max_relative_error(grad.grid(), &fd, T::of(1e-12))
}

/// Max relative error between the closed-form gradient and central
/// differences with step `h` watts.
pub fn finite_diff_check<T: Scalar>(
    p: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    topo: &InterferenceTopology,
    w: &EveCombiner<T>,
    cfg: &ScenarioConfig,
    h: T,
) -> Result<T> {
    let prob = SecrecyProblem::new(cfg, ch, topo, w)?;
    let grad = gradient_unchecked(&prob, p);
    Ok(finite_diff_error_of(&prob, p, &grad, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels;
    use crate::error::Error;
    use crate::phy::eve_combiner;
    use crate::scenario::build_topology;
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (ScenarioConfig, SecrecyProblem<f64>) {
        let cfg = ScenarioConfig {
            gain_vue_eve: 0.3,
            gain_cue_eve: 0.3,
            ..Default::default()
        };
        let topo = build_topology(&cfg);
        let ch = draw_channels(&cfg, &topo, seed);
        let prob = SecrecyProblem::with_optimal_eve(&cfg, &ch, &topo).unwrap();
        (cfg, prob)
    }

    fn random_interior(rng: &mut ChaCha8Rng, pairs: usize, blocks: usize) -> PowerAllocation<f64> {
        PowerAllocation::from_grid(Grid::from_fn(pairs, blocks, |_, _| rng.random_range(0.05..0.95)))
    }

    #[test]
    fn single_link_derivative_is_waterfilling_slope() {
        let cfg = ScenarioConfig {
            pairs: 1,
            cues: 1,
            ..Default::default()
        };
        let mut ch = ChannelRealization::zeros(1, 1, cfg.eve_antennas);
        *ch.desired_mut(0, 0) = Complex::new(1.2, -0.4);
        let topo = build_topology(&cfg);
        let w = eve_combiner(&ch, &cfg);
        let p = PowerAllocation::uniform(1, 1, 0.3);
        let g = grad_sum_secrecy(&p, &ch, &topo, &w, &cfg).unwrap();
        let gain = 1.6;
        let expected = 20e6 / std::f64::consts::LN_2 * gain / (0.3 * gain + 1.0);
        assert!((g.get(0, 0) - expected).abs() < 1e-9 * expected);
        assert!(g.get(0, 0) > 0.0);
    }

    #[test]
    fn clipped_term_contributes_nothing() {
        let cfg = ScenarioConfig {
            pairs: 1,
            cues: 1,
            eve_antennas: 1,
            ..Default::default()
        };
        let mut ch = ChannelRealization::zeros(1, 1, 1);
        *ch.desired_mut(0, 0) = Complex::new(0.5, 0.0);
        ch.vue_to_eve_mut(0, 0)[0] = Complex::new(2.0, 0.0);
        let topo = build_topology(&cfg);
        let prob = SecrecyProblem::with_optimal_eve(&cfg, &ch, &topo).unwrap();
        let p = PowerAllocation::uniform(1, 1, 0.5);
        let (cv, ce) = prob.capacities(&p, 0, 0);
        assert!(cv < ce);
        assert_eq!(gradient(&prob, &p).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn rejects_points_outside_the_box() {
        let (_, prob) = instance(1);
        let mut p = PowerAllocation::uniform(4, 4, 0.5);
        p.grid_mut()[(1, 2)] = 1.5;
        assert!(matches!(gradient(&prob, &p), Err(Error::OutsideBox { k: 1, m: 2, .. })));
        p.grid_mut()[(1, 2)] = 0.0;
        assert!(gradient(&prob, &p).is_err());
    }

    #[test]
    fn matches_central_differences_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..50 {
            let (_, prob) = instance(seed);
            let p = random_interior(&mut rng, 4, 4);
            let g = gradient(&prob, &p).unwrap();
            let err = finite_diff_error_of(&prob, &p, &g, 1e-6);
            assert!(err <= 1e-5, "seed {seed}: {err:e}");
        }
    }

    #[test]
    fn one_percent_corruption_is_detected() {
        let (_, prob) = instance(3);
        let p = PowerAllocation::uniform(4, 4, 0.4);
        let mut g = gradient(&prob, &p).unwrap();
        let i = g.0.iter().position(|v| v.abs() > 1.0).expect("nonzero entry");
        g.0.as_mut_slice()[i] *= 1.01;
        let err = finite_diff_error_of(&prob, &p, &g, 1e-6);
        assert!(err >= 9e-3, "{err}");
    }

    #[test]
    fn large_step_inflates_the_reported_error() {
        let (_, prob) = instance(5);
        let p = PowerAllocation::uniform(4, 4, 0.6);
        let g = gradient(&prob, &p).unwrap();
        let fine = finite_diff_error_of(&prob, &p, &g, 1e-6);
        let coarse = finite_diff_error_of(&prob, &p, &g, 0.5);
        assert!(coarse > 100.0 * fine, "fine {fine:e} coarse {coarse:e}");
    }

    #[test]
    fn structural_sign_and_sparsity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let (_, prob) = instance(100 + seed);
            let p = random_interior(&mut rng, 4, 4);
            for k in 0..4 {
                for m in 0..4 {
                    let (dv, de) = capacity_gradients(&prob, &p, k, m);
                    for (i, mm, &v) in de.indexed() {
                        if (i, mm) != (k, m) {
                            assert_eq!(v, 0.0);
                        }
                    }
                    for (i, mm, &v) in dv.indexed() {
                        if (i, mm) != (k, m) {
                            assert!(v <= 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sum_gradient_is_sum_of_term_gradients() {
        let (_, prob) = instance(12);
        let p = PowerAllocation::uniform(4, 4, 0.35);
        let total = gradient(&prob, &p).unwrap();
        let mut acc = Grid::filled(4, 4, 0.0);
        for k in 0..4 {
            for m in 0..4 {
                let t = term_gradient(&prob, &p, k, m);
                for (a, b) in acc.as_mut_slice().iter_mut().zip(t.grid().iter()) {
                    *a += b;
                }
            }
        }
        for (a, b) in total.grid().iter().zip(acc.iter()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }
}
