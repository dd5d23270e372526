use proptest::prelude::*;

use v2v_secrecy::channel::ChannelRealization;
use v2v_secrecy::phy::{eve_combiner, PowerAllocation};
use v2v_secrecy::sca::{
    build_surrogate, exp2_tangent, product_lower_bound, product_upper_bound, solve_subproblem, BarrierSettings,
};
use v2v_secrecy::{build_topology, Problem, ScenarioConfig};

use num_complex::Complex64;

proptest! {
    #[test]
    fn upper_bound_majorizes_and_lower_bound_minorizes(
        x in 0.0..50.0f64, y in 0.0..50.0f64, xn in 0.0..50.0f64, yn in 0.0..50.0f64,
    ) {
        let tol = 1e-12 * (1.0 + x * y + xn * yn);
        prop_assert!(product_upper_bound(x, y, xn, yn) >= x * y - tol);
        prop_assert!(product_lower_bound(x, y, xn, yn) <= x * y + tol);
    }

    #[test]
    fn bounds_are_tight_at_the_expansion_point(xn in 0.0..50.0f64, yn in 0.0..50.0f64) {
        let xy = xn * yn;
        prop_assert!((product_upper_bound(xn, yn, xn, yn) - xy).abs() <= 1e-12 * (1.0 + xy));
        prop_assert!((product_lower_bound(xn, yn, xn, yn) - xy).abs() <= 1e-12 * (1.0 + xy));
    }

    #[test]
    fn tangent_underestimates_the_exponential(r in 0.0..8.0f64, rn in 0.0..8.0f64) {
        prop_assert!(exp2_tangent(r, rn) <= r.exp2() - 1.0 + 1e-12 * r.exp2());
    }
}

#[test]
fn equal_expansion_constants_reduce_to_a_square() {
    for (x, y, c) in [(1.0f64, 2.0, 1.5), (0.3, 0.0, 0.7), (4.0, 4.0, 2.0)] {
        let expected = 0.25 * (x + y) * (x + y);
        assert!((product_upper_bound(x, y, c, c) - expected).abs() < 1e-14);
    }
}

fn single_link(gain: f64, wiretap: f64) -> (ScenarioConfig, Problem) {
    let cfg = ScenarioConfig {
        cues: 1,
        pairs: 1,
        eve_antennas: 1,
        ..Default::default()
    };
    let topo = build_topology(&cfg);
    let mut ch = ChannelRealization::zeros(1, 1, 1);
    *ch.desired_mut(0, 0) = Complex64::new(gain.sqrt(), 0.0);
    *ch.cue_to_vue_mut(0, 0) = Complex64::new(0.4, 0.2);
    ch.vue_to_eve_mut(0, 0)[0] = Complex64::new(wiretap.sqrt(), 0.0);
    ch.cue_to_eve_mut(0)[0] = Complex64::new(0.1, -0.3);
    let w = eve_combiner(&ch, &cfg);
    let prob = Problem::new(&cfg, &ch, &topo, &w).unwrap();
    (cfg, prob)
}

#[test]
fn blind_single_link_subproblem_goes_to_full_power() {
    let (_, prob) = single_link(3.0, 0.0);
    let model = build_surrogate(&prob, &PowerAllocation::uniform(1, 1, 0.5)).unwrap();
    let sol = solve_subproblem(&model, &BarrierSettings::default()).unwrap();
    assert!(sol.power.get(0, 0) > 1.0 - 1e-6, "{}", sol.power.get(0, 0));
}

/// Boundary of `{v : ok(v)}` between a point `inside` where `ok` holds and a
/// point `outside` where it fails.
fn bisect(mut inside: f64, mut outside: f64, ok: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if ok(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

#[test]
fn single_link_surrogate_matches_a_grid_oracle() {
    let (_, prob) = single_link(2.0, 0.6);
    let p_n = PowerAllocation::uniform(1, 1, 0.3);
    let model = build_surrogate(&prob, &p_n).unwrap();
    let sol = solve_subproblem(&model, &BarrierSettings::default()).unwrap();
    let pt = &model.point;
    let (x1n, y1n, x2n, y2n, gn) = (pt.x1n[(0, 0)], pt.y1n[(0, 0)], pt.x2n[(0, 0)], pt.y2n[(0, 0)], pt.gamma_n[(0, 0)]);
    let (g, c, y1) = (prob.desired_gain(0, 0), prob.eve_signal_gain(0, 0), prob.vue_floor(0, 0));

    // For each power on a fine grid: the largest zeta and the smallest gamma
    // the surrogate constraints admit, each found by bisection from the
    // unconstrained optimum of its quadratic bound.
    let e_min = (x1n - y1n) - y1;
    let gamma_peak = gn + 2.0 * y2n / (gn.exp2() * std::f64::consts::LN_2);
    let mut best = f64::NEG_INFINITY;
    let n = 4000;
    for i in 0..=n {
        let p = prob.floor() + (prob.p_max() - prob.floor()) * i as f64 / n as f64;
        let e_ok = |e: f64| product_upper_bound(e, y1, x1n, y1n) <= p * g;
        let g_ok = |gm: f64| p * c <= product_lower_bound(exp2_tangent(gm, gn), y2n, x2n, y2n);
        if !e_ok(e_min) || !g_ok(gamma_peak) {
            continue;
        }
        let e_hi = bisect(e_min, e_min + 1e3, e_ok);
        if e_hi < 0.0 {
            continue;
        }
        let zeta = e_hi.ln_1p() / std::f64::consts::LN_2;
        let gamma = if g_ok(0.0) { 0.0 } else { bisect(gamma_peak, 0.0, g_ok) };
        best = best.max(zeta - gamma);
    }
    let got = sol.surrogate_objective / prob.bandwidth();
    assert!((got - best).abs() <= 1e-3 * best.abs(), "barrier {got} vs grid {best}");
}

#[test]
fn solver_outputs_satisfy_the_true_rate_constraints() {
    let cfg = ScenarioConfig {
        gain_cue_eve: 0.01,
        gain_vue_eve: 0.01,
        ..Default::default()
    };
    let topo = build_topology(&cfg);
    for seed in 0..5 {
        let ch = v2v_secrecy::channel::draw_channels::<f64>(&cfg, &topo, seed);
        let prob = Problem::with_optimal_eve(&cfg, &ch, &topo).unwrap();
        let model = build_surrogate(&prob, &PowerAllocation::uniform(4, 4, 0.5)).unwrap();
        let sol = solve_subproblem(&model, &BarrierSettings::default()).unwrap();
        assert!(model.program.max_violation(&model.start) < 0.0);
        for cell in &model.cells {
            let (cv, ce) = prob.capacities(&sol.power, cell.k, cell.m);
            let (z, gm) = (sol.slacks.zeta[(cell.k, cell.m)], sol.slacks.gamma[(cell.k, cell.m)]);
            assert!(cv >= z - 1e-9 * z.abs(), "seed {seed}: C {cv} < zeta {z}");
            assert!(ce <= gm + 1e-9 * gm.abs().max(1.0), "seed {seed}: Ce {ce} > gamma {gm}");
        }
    }
}
