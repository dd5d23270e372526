//! SINRs, capacities and secrecy rates for a given power allocation, plus the
//! eavesdropper's optimal receive combiner.
//!
//! The binary reuse variables are folded into the powers: a pair that does not
//! reuse block `m` simply transmits at the positivity floor there, and
//! [`PowerAllocation::reuse_indicator`] recovers the assignment.

use num_complex::Complex;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::scenario::{InterferenceTopology, ScenarioConfig};

/// VUE transmit powers `p_k^m` in watts.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation<T>(Grid<T>);

impl<T: Scalar> PowerAllocation<T> {
    pub fn uniform(pairs: usize, blocks: usize, watts: T) -> Self {
        Self(Grid::filled(pairs, blocks, watts))
    }

    pub fn from_grid(grid: Grid<T>) -> Self {
        Self(grid)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.0
    }

    pub fn grid_mut(&mut self) -> &mut Grid<T> {
        &mut self.0
    }

    pub fn into_grid(self) -> Grid<T> {
        self.0
    }

    pub fn pairs(&self) -> usize {
        self.0.pairs()
    }

    pub fn blocks(&self) -> usize {
        self.0.blocks()
    }

    #[inline]
    pub fn get(&self, k: usize, m: usize) -> T {
        self.0[(k, m)]
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }

    /// Fails with [`Error::OutsideBox`] unless `floor <= p <= p_max` everywhere.
    pub fn check_box(&self, floor: T, p_max: T) -> Result<()> {
        for (k, m, &p) in self.0.indexed() {
            if !(p >= floor && p <= p_max) {
                return Err(Error::OutsideBox {
                    k,
                    m,
                    value: p.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// Effective reuse assignment: pair `k` uses block `m` iff its power
    /// there exceeds `threshold`.
    pub fn reuse_indicator(&self, threshold: T) -> Grid<bool> {
        self.0.map(|&p| p > threshold)
    }

    /// Euclidean distance to another allocation.
    pub fn distance(&self, other: &Self) -> T {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }
}

/// Unit-norm eavesdropper combiners `w_{k,e}^m`, one per (pair, block).
#[derive(Clone, Debug, PartialEq)]
pub struct EveCombiner<T> {
    pairs: usize,
    blocks: usize,
    antennas: usize,
    weights: Vec<Complex<T>>,
}

impl<T: Scalar> EveCombiner<T> {
    pub fn weights(&self, k: usize, m: usize) -> &[Complex<T>] {
        let start = (k * self.blocks + m) * self.antennas;
        &self.weights[start..start + self.antennas]
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }
}

/// `a^H b`
pub fn inner<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr<T: Scalar>(a: &[Complex<T>]) -> T {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Maximizes the eavesdropper SINR for every (k, m).
///
/// The target matrix `(p_c a a^H + s I)^{-1} b b^H` is rank one, so its
/// dominant eigenvector is `(p_c a a^H + s I)^{-1} b`, evaluated here with the
/// Sherman-Morrison identity. A zero wiretap vector has no preferred
/// direction; the first antenna is returned.
pub fn eve_combiner<T: Scalar>(ch: &ChannelRealization<T>, cfg: &ScenarioConfig) -> EveCombiner<T> {
    let (pairs, blocks, n) = (ch.pairs(), ch.blocks(), ch.eve_antennas());
    let load = T::of(cfg.cue_power / cfg.noise_power);
    let mut weights = Vec::with_capacity(pairs * blocks * n);
    for k in 0..pairs {
        for m in 0..blocks {
            let a = ch.cue_to_eve(m);
            let b = ch.vue_to_eve(k, m);
            let coupling = inner(a, b) * (load / (T::one() + load * norm_sqr(a)));
            let mut w: Vec<Complex<T>> = b.iter().zip(a).map(|(&bi, &ai)| bi - ai * coupling).collect();
            let norm = norm_sqr(&w).sqrt();
            if norm > T::zero() && norm.is_finite() {
                w.iter_mut().for_each(|x| *x = *x / norm);
            } else {
                w.iter_mut().for_each(|x| *x = Complex::new(T::zero(), T::zero()));
                w[0] = Complex::new(T::one(), T::zero());
            }
            weights.extend(w);
        }
    }
    EveCombiner {
        pairs,
        blocks,
        antennas: n,
        weights,
    }
}

/// Eavesdropper SINR seen through an arbitrary receive vector `w`.
pub fn eve_sinr_with<T: Scalar>(
    power: T,
    w: &[Complex<T>],
    wiretap: &[Complex<T>],
    cue_to_eve: &[Complex<T>],
    cfg: &ScenarioConfig,
) -> T {
    let signal = power * inner(w, wiretap).norm_sqr();
    let interference = T::of(cfg.cue_power) * inner(w, cue_to_eve).norm_sqr();
    signal / (interference + T::of(cfg.noise_power) * norm_sqr(w))
}

/// Legitimate SINR `S_k^m` for every (k, m).
pub fn sinr_vue<T: Scalar>(
    p: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    topo: &InterferenceTopology,
    cfg: &ScenarioConfig,
) -> Grid<T> {
    let pc = T::of(cfg.cue_power);
    let noise = T::of(cfg.noise_power);
    Grid::from_fn(ch.pairs(), ch.blocks(), |k, m| {
        let mut denom = pc * ch.cue_to_vue(m, k).norm_sqr() + noise;
        for k2 in 0..ch.pairs() {
            if topo.is_active(k, k2) {
                if let Some(h) = ch.inter_vue(k, k2, m) {
                    denom += p.get(k2, m) * h.norm_sqr();
                }
            }
        }
        p.get(k, m) * ch.desired(k, m).norm_sqr() / denom
    })
}

/// Eavesdropper SINR `S_{k,e}^m` for every (k, m).
pub fn sinr_eve<T: Scalar>(
    p: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    w: &EveCombiner<T>,
    cfg: &ScenarioConfig,
) -> Grid<T> {
    Grid::from_fn(ch.pairs(), ch.blocks(), |k, m| {
        eve_sinr_with(p.get(k, m), w.weights(k, m), ch.vue_to_eve(k, m), ch.cue_to_eve(m), cfg)
    })
}

/// Every physical-layer quantity at one power allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct SecrecyEvaluation<T> {
    pub sinr_v: Grid<T>,
    pub sinr_e: Grid<T>,
    /// bits/s
    pub cap_v: Grid<T>,
    /// bits/s
    pub cap_e: Grid<T>,
    /// `max(cap_v - cap_e, 0)`, bits/s
    pub secrecy: Grid<T>,
    pub sum_secrecy: T,
}

impl<T: Scalar> SecrecyEvaluation<T> {
    /// Sum secrecy rate divided by the number of VUE pairs.
    pub fn per_user(&self) -> T {
        self.sum_secrecy / T::of(self.secrecy.pairs() as f64)
    }
}

fn assemble<T: Scalar>(sinr_v: Grid<T>, sinr_e: Grid<T>, bandwidth: T) -> SecrecyEvaluation<T> {
    let cap_v = sinr_v.map(|&s| bandwidth * s.log2_1p());
    let cap_e = sinr_e.map(|&s| bandwidth * s.log2_1p());
    let secrecy = Grid::from_fn(cap_v.pairs(), cap_v.blocks(), |k, m| {
        (cap_v[(k, m)] - cap_e[(k, m)]).max(T::zero())
    });
    // block-major order, matching SecrecyProblem::objective
    let mut sum_secrecy = T::zero();
    for m in 0..secrecy.blocks() {
        for k in 0..secrecy.pairs() {
            sum_secrecy += secrecy[(k, m)];
        }
    }
    SecrecyEvaluation {
        sinr_v,
        sinr_e,
        cap_v,
        cap_e,
        secrecy,
        sum_secrecy,
    }
}

/// Capacities and secrecy rates at `p`.
pub fn evaluate<T: Scalar>(
    p: &PowerAllocation<T>,
    ch: &ChannelRealization<T>,
    topo: &InterferenceTopology,
    w: &EveCombiner<T>,
    cfg: &ScenarioConfig,
) -> SecrecyEvaluation<T> {
    assemble(
        sinr_vue(p, ch, topo, cfg),
        sinr_eve(p, ch, w, cfg),
        T::of(cfg.per_rb_bandwidth()),
    )
}

/// A channel realization reduced to the power gains the objective needs,
/// with the combiner applied. Solvers work on this.
#[derive(Clone, Debug)]
pub struct SecrecyProblem<T> {
    pairs: usize,
    blocks: usize,
    /// `|g_k^m|^2`
    desired: Grid<T>,
    /// `|h_{k,k'}^m|^2` at `(k * K + k') * M + m`; zero when inactive or `k == k'`.
    inter: Vec<T>,
    /// `p_c |h_{m,k}^m|^2 + sigma^2`
    vue_floor: Grid<T>,
    /// `|w^H h_{k,e}^m|^2`
    eve_signal: Grid<T>,
    /// `p_c |w^H h_{m,e}^m|^2 + sigma^2 |w|^2`
    eve_floor: Grid<T>,
    bandwidth: T,
    noise: T,
    p_max: T,
    floor: T,
}

impl<T: Scalar> SecrecyProblem<T> {
    pub fn new(
        cfg: &ScenarioConfig,
        ch: &ChannelRealization<T>,
        topo: &InterferenceTopology,
        w: &EveCombiner<T>,
    ) -> Result<Self> {
        ch.check_dims(cfg)?;
        if topo.pairs() != cfg.pairs || (w.pairs(), w.blocks(), w.antennas()) != (cfg.pairs, cfg.cues, cfg.eve_antennas) {
            return Err(Error::Dimension("topology or combiner does not match the config".into()));
        }
        let (pairs, blocks) = (cfg.pairs, cfg.cues);
        let pc = T::of(cfg.cue_power);
        let noise = T::of(cfg.noise_power);
        let mut inter = vec![T::zero(); pairs * pairs * blocks];
        for k in 0..pairs {
            for k2 in 0..pairs {
                if !topo.is_active(k, k2) {
                    continue;
                }
                for m in 0..blocks {
                    if let Some(h) = ch.inter_vue(k, k2, m) {
                        inter[(k * pairs + k2) * blocks + m] = h.norm_sqr();
                    }
                }
            }
        }
        Ok(Self {
            pairs,
            blocks,
            desired: Grid::from_fn(pairs, blocks, |k, m| ch.desired(k, m).norm_sqr()),
            inter,
            vue_floor: Grid::from_fn(pairs, blocks, |k, m| pc * ch.cue_to_vue(m, k).norm_sqr() + noise),
            eve_signal: Grid::from_fn(pairs, blocks, |k, m| inner(w.weights(k, m), ch.vue_to_eve(k, m)).norm_sqr()),
            eve_floor: Grid::from_fn(pairs, blocks, |k, m| {
                let wk = w.weights(k, m);
                pc * inner(wk, ch.cue_to_eve(m)).norm_sqr() + noise * norm_sqr(wk)
            }),
            bandwidth: T::of(cfg.per_rb_bandwidth()),
            noise,
            p_max: T::of(cfg.p_max),
            floor: T::of(cfg.epsilon_p()),
        })
    }

    /// Builds the problem with the optimal eavesdropper combiner.
    pub fn with_optimal_eve(
        cfg: &ScenarioConfig,
        ch: &ChannelRealization<T>,
        topo: &InterferenceTopology,
    ) -> Result<Self> {
        Self::new(cfg, ch, topo, &eve_combiner(ch, cfg))
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Per-RB bandwidth `W` in Hz.
    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn noise(&self) -> T {
        self.noise
    }

    pub fn p_max(&self) -> T {
        self.p_max
    }

    /// Lower power bound `epsilon_p`.
    pub fn floor(&self) -> T {
        self.floor
    }

    #[inline]
    pub fn desired_gain(&self, k: usize, m: usize) -> T {
        self.desired[(k, m)]
    }

    /// Power gain from pair `k2` into receiver `k` on block `m` (zero if inactive).
    #[inline]
    pub fn inter_gain(&self, k: usize, k2: usize, m: usize) -> T {
        self.inter[(k * self.pairs + k2) * self.blocks + m]
    }

    /// CUE interference plus noise at receiver `k`.
    #[inline]
    pub fn vue_floor(&self, k: usize, m: usize) -> T {
        self.vue_floor[(k, m)]
    }

    #[inline]
    pub fn eve_signal_gain(&self, k: usize, m: usize) -> T {
        self.eve_signal[(k, m)]
    }

    /// Eavesdropper interference plus noise after combining.
    #[inline]
    pub fn eve_floor(&self, k: usize, m: usize) -> T {
        self.eve_floor[(k, m)]
    }

    /// Interference-plus-noise denominator `B` of the legitimate SINR.
    #[inline]
    pub fn vue_denominator(&self, p: &PowerAllocation<T>, k: usize, m: usize) -> T {
        let mut d = self.vue_floor(k, m);
        for k2 in 0..self.pairs {
            d += p.get(k2, m) * self.inter_gain(k, k2, m);
        }
        d
    }

    /// `(C_k^m, C_{k,e}^m)` in bits/s.
    #[inline]
    pub fn capacities(&self, p: &PowerAllocation<T>, k: usize, m: usize) -> (T, T) {
        let pk = p.get(k, m);
        let sv = pk * self.desired_gain(k, m) / self.vue_denominator(p, k, m);
        let se = pk * self.eve_signal_gain(k, m) / self.eve_floor(k, m);
        (self.bandwidth * sv.log2_1p(), self.bandwidth * se.log2_1p())
    }

    /// Sum secrecy over the pairs of block `m`.
    pub fn block_objective(&self, p: &PowerAllocation<T>, m: usize) -> T {
        (0..self.pairs)
            .map(|k| {
                let (cv, ce) = self.capacities(p, k, m);
                (cv - ce).max(T::zero())
            })
            .fold(T::zero(), |a, b| a + b)
    }

    /// Sum secrecy rate `R(p)` in bits/s.
    pub fn objective(&self, p: &PowerAllocation<T>) -> T {
        (0..self.blocks)
            .map(|m| self.block_objective(p, m))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn evaluate(&self, p: &PowerAllocation<T>) -> SecrecyEvaluation<T> {
        let sinr_v = Grid::from_fn(self.pairs, self.blocks, |k, m| {
            p.get(k, m) * self.desired_gain(k, m) / self.vue_denominator(p, k, m)
        });
        let sinr_e = Grid::from_fn(self.pairs, self.blocks, |k, m| {
            p.get(k, m) * self.eve_signal_gain(k, m) / self.eve_floor(k, m)
        });
        assemble(sinr_v, sinr_e, self.bandwidth)
    }

    pub fn check_box(&self, p: &PowerAllocation<T>) -> Result<()> {
        if p.pairs() != self.pairs || p.blocks() != self.blocks {
            return Err(Error::Dimension(format!(
                "allocation is {}x{}, problem is {}x{}",
                p.pairs(),
                p.blocks(),
                self.pairs,
                self.blocks
            )));
        }
        p.check_box(self.floor, self.p_max)
    }

    /// Copy of the problem with every wiretap gain removed.
    pub fn without_eavesdropper(&self) -> Self {
        let mut out = self.clone();
        out.eve_signal.as_mut_slice().iter_mut().for_each(|g| *g = T::zero());
        out
    }
}
