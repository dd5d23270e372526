use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use v2v_secrecy::channel::{draw_channels, ChannelRealization};
use v2v_secrecy::phy::{eve_combiner, eve_sinr_with, norm_sqr};
use v2v_secrecy::{build_topology, ScenarioConfig};

fn max_generalized_eig(a: &[Complex64], b: &[Complex64], p: f64, pc: f64, s: f64) -> f64 {
    let n = a.len();
    let sig = DMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj() * p);
    let noise = DMatrix::from_fn(n, n, |i, j| b[i] * b[j].conj() * pc + if i == j { Complex64::new(s, 0.0) } else { Complex64::new(0.0, 0.0) });
    let linv = noise.cholesky().unwrap().l().try_inverse().unwrap();
    let white = &linv * sig * linv.adjoint();
    let herm = (&white + white.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(herm).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn combiner_attains_the_generalized_eigenvalue() {
    for ne in [1, 2, 3, 4, 8] {
        let cfg = ScenarioConfig {
            cues: 3,
            pairs: 2,
            eve_antennas: ne,
            ..Default::default()
        };
        let topo = build_topology(&cfg);
        for seed in 0..10 {
            let ch = draw_channels::<f64>(&cfg, &topo, seed);
            let w = eve_combiner(&ch, &cfg);
            for k in 0..2 {
                for m in 0..3 {
                    let wk = w.weights(k, m);
                    assert!((norm_sqr(wk) - 1.0).abs() < 1e-12);
                    let got = eve_sinr_with(0.7, wk, ch.vue_to_eve(k, m), ch.cue_to_eve(m), &cfg);
                    let want = max_generalized_eig(ch.vue_to_eve(k, m), ch.cue_to_eve(m), 0.7, 1.0, 1.0);
                    assert!((got - want).abs() <= 1e-9 * want, "Ne={ne}: {got} vs {want}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn single_antenna_combiner_is_a_phase(re in -3.0..3.0f64, im in -3.0..3.0f64, cre in -3.0..3.0f64) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let cfg = ScenarioConfig { cues: 1, pairs: 1, eve_antennas: 1, ..Default::default() };
        let mut ch = ChannelRealization::<f64>::zeros(1, 1, 1);
        ch.vue_to_eve_mut(0, 0)[0] = Complex64::new(re, im);
        ch.cue_to_eve_mut(0)[0] = Complex64::new(cre, 0.5);
        let w = eve_combiner(&ch, &cfg);
        let h = Complex64::new(re, im);
        let expected = h / h.norm();
        prop_assert!((w.weights(0, 0)[0] - expected).norm() < 1e-12);
    }
}

#[test]
fn zero_wiretap_channel_gives_a_valid_combiner() {
    let cfg = ScenarioConfig::default();
    let topo = build_topology(&cfg);
    let mut ch = draw_channels::<f64>(&cfg, &topo, 1);
    ch.blind_eavesdropper();
    let w = eve_combiner(&ch, &cfg);
    for k in 0..cfg.pairs {
        for m in 0..cfg.cues {
            assert!((norm_sqr(w.weights(k, m)) - 1.0).abs() < 1e-12);
            assert_eq!(eve_sinr_with(1.0, w.weights(k, m), ch.vue_to_eve(k, m), ch.cue_to_eve(m), &cfg), 0.0);
        }
    }
}
