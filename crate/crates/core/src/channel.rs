//! Rician block-fading channel generation for one coherence interval.
//!
//! Every link draws from its own ChaCha stream keyed by `(link class, k, k', m)`
//! under the scenario seed, so realizations nest: growing `K` or `Ne` keeps
//! the coefficients already present and only appends new ones.

use std::io::{Read, Write};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::scenario::{InterferenceTopology, ScenarioConfig};

/// Link classes; the discriminant is part of the RNG stream id and the
/// `link_type` column of the channel CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkClass {
    /// `g_k^m`: VUE transmitter to its own receiver.
    Desired = 1,
    /// `h_{k,k'}^m`: VUE `k'` transmitter to VUE `k` receiver.
    InterVue = 2,
    /// `h_{m,k}^m`: CUE `m` to VUE `k` receiver.
    CueToVue = 3,
    /// `h_{m,e}^m`: CUE `m` to the eavesdropper array.
    CueToEve = 4,
    /// `h_{k,e}^m`: VUE `k` to the eavesdropper array.
    VueToEve = 5,
}

impl LinkClass {
    pub fn name(self) -> &'static str {
        match self {
            LinkClass::Desired => "g",
            LinkClass::InterVue => "h_vv",
            LinkClass::CueToVue => "h_cv",
            LinkClass::CueToEve => "h_ce",
            LinkClass::VueToEve => "h_ve",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "g" => LinkClass::Desired,
            "h_vv" => LinkClass::InterVue,
            "h_cv" => LinkClass::CueToVue,
            "h_ce" => LinkClass::CueToEve,
            "h_ve" => LinkClass::VueToEve,
            _ => return None,
        })
    }
}

/// Every complex coefficient of one coherence interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T> {
    pairs: usize,
    blocks: usize,
    eve_antennas: usize,
    desired: Grid<Complex<T>>,
    inter_vue: Vec<Complex<T>>,
    cue_to_vue: Grid<Complex<T>>,
    cue_to_eve: Vec<Complex<T>>,
    vue_to_eve: Vec<Complex<T>>,
}

impl<T: Scalar> ChannelRealization<T> {
    /// All-zero realization with the given dimensions.
    pub fn zeros(pairs: usize, blocks: usize, eve_antennas: usize) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self {
            pairs,
            blocks,
            eve_antennas,
            desired: Grid::filled(pairs, blocks, z),
            inter_vue: vec![z; pairs * pairs * blocks],
            cue_to_vue: Grid::filled(pairs, blocks, z),
            cue_to_eve: vec![z; blocks * eve_antennas],
            vue_to_eve: vec![z; pairs * blocks * eve_antennas],
        }
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn eve_antennas(&self) -> usize {
        self.eve_antennas
    }

    #[inline]
    pub fn desired(&self, k: usize, m: usize) -> Complex<T> {
        self.desired[(k, m)]
    }

    pub fn desired_mut(&mut self, k: usize, m: usize) -> &mut Complex<T> {
        &mut self.desired[(k, m)]
    }

    /// `h_{k,k2}^m`; there is no self-interference slot, so `k == k2` is `None`.
    #[inline]
    pub fn inter_vue(&self, k: usize, k2: usize, m: usize) -> Option<Complex<T>> {
        (k != k2).then(|| self.inter_vue[self.inter_offset(k, k2, m)])
    }

    pub fn inter_vue_mut(&mut self, k: usize, k2: usize, m: usize) -> Option<&mut Complex<T>> {
        if k == k2 {
            return None;
        }
        let i = self.inter_offset(k, k2, m);
        Some(&mut self.inter_vue[i])
    }

    /// `h_{m,k}^m`: CUE `m` into VUE receiver `k`.
    #[inline]
    pub fn cue_to_vue(&self, m: usize, k: usize) -> Complex<T> {
        self.cue_to_vue[(k, m)]
    }

    pub fn cue_to_vue_mut(&mut self, m: usize, k: usize) -> &mut Complex<T> {
        &mut self.cue_to_vue[(k, m)]
    }

    /// `h_{m,e}^m`, length `Ne`.
    pub fn cue_to_eve(&self, m: usize) -> &[Complex<T>] {
        let n = self.eve_antennas;
        &self.cue_to_eve[m * n..(m + 1) * n]
    }

    pub fn cue_to_eve_mut(&mut self, m: usize) -> &mut [Complex<T>] {
        let n = self.eve_antennas;
        &mut self.cue_to_eve[m * n..(m + 1) * n]
    }

    /// `h_{k,e}^m`, length `Ne`.
    pub fn vue_to_eve(&self, k: usize, m: usize) -> &[Complex<T>] {
        let n = self.eve_antennas;
        let start = (k * self.blocks + m) * n;
        &self.vue_to_eve[start..start + n]
    }

    pub fn vue_to_eve_mut(&mut self, k: usize, m: usize) -> &mut [Complex<T>] {
        let n = self.eve_antennas;
        let start = (k * self.blocks + m) * n;
        &mut self.vue_to_eve[start..start + n]
    }

    /// Removes every wiretap link.
    pub fn blind_eavesdropper(&mut self) {
        let z = Complex::new(T::zero(), T::zero());
        self.vue_to_eve.iter_mut().for_each(|h| *h = z);
    }

    pub fn is_finite(&self) -> bool {
        let ok = |h: &Complex<T>| h.re.is_finite() && h.im.is_finite();
        self.desired.iter().all(ok)
            && self.inter_vue.iter().all(ok)
            && self.cue_to_vue.iter().all(ok)
            && self.cue_to_eve.iter().all(ok)
            && self.vue_to_eve.iter().all(ok)
    }

    pub fn check_dims(&self, cfg: &ScenarioConfig) -> Result<()> {
        if (self.pairs, self.blocks, self.eve_antennas)
            != (cfg.pairs, cfg.cues, cfg.eve_antennas)
        {
            return Err(Error::Dimension(format!(
                "channels are K={} M={} Ne={}, config is K={} M={} Ne={}",
                self.pairs, self.blocks, self.eve_antennas, cfg.pairs, cfg.cues, cfg.eve_antennas
            )));
        }
        Ok(())
    }

    fn inter_offset(&self, k: usize, k2: usize, m: usize) -> usize {
        (k * self.pairs + k2) * self.blocks + m
    }

    /// Writes the CSV dump: `link_type,k,k2,m,antenna,re,im`, with unused
    /// index columns left empty and values at full `f64` precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["link_type", "k", "k2", "m", "antenna", "re", "im"])?;
        let mut row = |class: LinkClass,
                       k: Option<usize>,
                       k2: Option<usize>,
                       m: usize,
                       a: Option<usize>,
                       h: Complex<T>|
         -> Result<()> {
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                class.name().to_string(),
                opt(k),
                opt(k2),
                m.to_string(),
                opt(a),
                h.re.to_f64_lossy().to_string(),
                h.im.to_f64_lossy().to_string(),
            ])?;
            Ok(())
        };
        for k in 0..self.pairs {
            for m in 0..self.blocks {
                row(LinkClass::Desired, Some(k), None, m, None, self.desired(k, m))?;
            }
        }
        for k in 0..self.pairs {
            for k2 in 0..self.pairs {
                for m in 0..self.blocks {
                    if let Some(h) = self.inter_vue(k, k2, m) {
                        row(LinkClass::InterVue, Some(k), Some(k2), m, None, h)?;
                    }
                }
            }
        }
        for k in 0..self.pairs {
            for m in 0..self.blocks {
                row(LinkClass::CueToVue, Some(k), None, m, None, self.cue_to_vue(m, k))?;
            }
        }
        for m in 0..self.blocks {
            for (a, &h) in self.cue_to_eve(m).iter().enumerate() {
                row(LinkClass::CueToEve, None, None, m, Some(a), h)?;
            }
        }
        for k in 0..self.pairs {
            for m in 0..self.blocks {
                for (a, &h) in self.vue_to_eve(k, m).iter().enumerate() {
                    row(LinkClass::VueToEve, Some(k), None, m, Some(a), h)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump written by [`write_csv`](Self::write_csv). Every slot for
    /// the given dimensions must appear exactly once.
    pub fn read_csv<R: Read>(input: R, pairs: usize, blocks: usize, eve_antennas: usize) -> Result<Self> {
        let mut ch = Self::zeros(pairs, blocks, eve_antennas);
        let expected = 2 * pairs * blocks
            + pairs * pairs.saturating_sub(1) * blocks
            + blocks * eve_antennas
            + pairs * blocks * eve_antennas;
        let mut seen = std::collections::HashSet::new();
        let mut rdr = csv::Reader::from_reader(input);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::ChannelFile(format!("record {}: {what}", line + 1));
            if rec.len() != 7 {
                return Err(bad("expected 7 columns"));
            }
            let class = LinkClass::from_name(&rec[0]).ok_or_else(|| bad("unknown link_type"))?;
            let index = |i: usize, bound: usize| -> Result<usize> {
                let v: usize = rec[i].trim().parse().map_err(|_| bad("bad index"))?;
                if v >= bound {
                    return Err(bad("index out of range"));
                }
                Ok(v)
            };
            let value = |i: usize| -> Result<T> {
                let v: f64 = rec[i].trim().parse().map_err(|_| bad("bad value"))?;
                Ok(T::of(v))
            };
            let h = Complex::new(value(5)?, value(6)?);
            let m = index(3, blocks)?;
            let key = match class {
                LinkClass::Desired => {
                    let k = index(1, pairs)?;
                    *ch.desired_mut(k, m) = h;
                    (class as u8, k, 0, m, 0)
                }
                LinkClass::InterVue => {
                    let (k, k2) = (index(1, pairs)?, index(2, pairs)?);
                    *ch.inter_vue_mut(k, k2, m).ok_or_else(|| bad("self-interference slot"))? = h;
                    (class as u8, k, k2, m, 0)
                }
                LinkClass::CueToVue => {
                    let k = index(1, pairs)?;
                    *ch.cue_to_vue_mut(m, k) = h;
                    (class as u8, k, 0, m, 0)
                }
                LinkClass::CueToEve => {
                    let a = index(4, eve_antennas)?;
                    ch.cue_to_eve_mut(m)[a] = h;
                    (class as u8, 0, 0, m, a)
                }
                LinkClass::VueToEve => {
                    let (k, a) = (index(1, pairs)?, index(4, eve_antennas)?);
                    ch.vue_to_eve_mut(k, m)[a] = h;
                    (class as u8, k, 0, m, a)
                }
            };
            if !seen.insert(key) {
                return Err(bad("duplicate entry"));
            }
        }
        if seen.len() != expected {
            return Err(Error::ChannelFile(format!(
                "expected {expected} coefficients, found {}",
                seen.len()
            )));
        }
        Ok(ch)
    }
}

/// One Rician coefficient `sqrt(1/(1+k)) (sqrt(k) e^{j phi} + n)` with
/// `n ~ CN(0, 1)`, given the LOS phase `phi`.
pub fn rician_coefficient<R: Rng + ?Sized>(rng: &mut R, k_factor: f64, los_phase: f64) -> Complex<f64> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let nlos = Complex::new(x, y) * std::f64::consts::FRAC_1_SQRT_2;
    let los = Complex::from_polar(1.0, los_phase);
    (los * k_factor.sqrt() + nlos) * (1.0 / (1.0 + k_factor)).sqrt()
}

fn link_stream(seed: u64, class: LinkClass, k: usize, k2: usize, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = (class as u64) << 48 | (k as u64) << 32 | (k2 as u64) << 16 | m as u64;
    rng.set_stream(id);
    rng
}

/// Draws `len` coefficients sharing one LOS phase, scaled by `sqrt(gain)`.
fn draw_link<T: Scalar>(
    seed: u64,
    class: LinkClass,
    (k, k2, m): (usize, usize, usize),
    k_factor: f64,
    gain: f64,
    out: &mut [Complex<T>],
) {
    let mut rng = link_stream(seed, class, k, k2, m);
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let amp = gain.sqrt();
    for slot in out.iter_mut() {
        let h = rician_coefficient(&mut rng, k_factor, phase) * amp;
        *slot = Complex::new(T::of(h.re), T::of(h.im));
    }
}

/// Generates every channel coefficient of one coherence interval.
///
/// Inactive inter-VUE links (per `topo`) are exactly zero. Identical
/// `(cfg, topo, seed)` give bit-identical output.
pub fn draw_channels<T: Scalar>(
    cfg: &ScenarioConfig,
    topo: &InterferenceTopology,
    seed: u64,
) -> ChannelRealization<T> {
    let (pairs, blocks, ne) = (cfg.pairs, cfg.cues, cfg.eve_antennas);
    let kf = cfg.rician_k;
    let mut ch = ChannelRealization::zeros(pairs, blocks, ne);
    for k in 0..pairs {
        for m in 0..blocks {
            draw_link(
                seed,
                LinkClass::Desired,
                (k, 0, m),
                kf,
                cfg.gain_desired,
                std::slice::from_mut(ch.desired_mut(k, m)),
            );
            draw_link(
                seed,
                LinkClass::CueToVue,
                (k, 0, m),
                kf,
                cfg.gain_cue_vue,
                std::slice::from_mut(ch.cue_to_vue_mut(m, k)),
            );
            draw_link(seed, LinkClass::VueToEve, (k, 0, m), kf, cfg.gain_vue_eve, ch.vue_to_eve_mut(k, m));
            for k2 in 0..pairs {
                if k2 != k && topo.is_active(k, k2) {
                    let slot = ch.inter_vue_mut(k, k2, m).expect("k != k2");
                    draw_link(
                        seed,
                        LinkClass::InterVue,
                        (k, k2, m),
                        kf,
                        cfg.gain_inter_vue,
                        std::slice::from_mut(slot),
                    );
                }
            }
        }
    }
    for m in 0..blocks {
        draw_link(seed, LinkClass::CueToEve, (0, 0, m), kf, cfg.gain_cue_eve, ch.cue_to_eve_mut(m));
    }
    ch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_topology;

    fn sample_power(k_factor: f64, n: usize, seed: u64) -> (f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mags: Vec<f64> = (0..n)
            .map(|_| {
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                rician_coefficient(&mut rng, k_factor, phase).norm()
            })
            .collect();
        let mean_power = mags.iter().map(|a| a * a).sum::<f64>() / n as f64;
        (mean_power, mags)
    }

    #[test]
    fn rayleigh_limit_has_unit_power() {
        let (p, _) = sample_power(0.0, 100_000, 1);
        assert!((p - 1.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn strong_los_concentrates_magnitude() {
        let (_, mags) = sample_power(1e6, 1000, 2);
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        let var = mags.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / mags.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
        assert!(var.sqrt() < 0.01);
    }

    #[test]
    fn unit_power_for_any_k_factor() {
        for (i, kf) in [0.5, 1.0, 3.0, 10.0, 100.0].into_iter().enumerate() {
            let (p, _) = sample_power(kf, 100_000, 10 + i as u64);
            assert!((p - 1.0).abs() < 0.02, "k={kf}: {p}");
        }
    }

    #[test]
    fn every_link_class_has_unit_mean_power() {
        let cfg = ScenarioConfig {
            pairs: 6,
            cues: 6,
            eve_antennas: 6,
            rician_k: 2.0,
            speed_kmh: 0.0,
            ..Default::default()
        };
        let topo = build_topology(&cfg);
        let (mut sums, mut counts) = ([0.0; 5], [0usize; 5]);
        for seed in 0..300 {
            let ch: ChannelRealization<f64> = draw_channels(&cfg, &topo, seed);
            for k in 0..6 {
                for m in 0..6 {
                    sums[0] += ch.desired(k, m).norm_sqr();
                    sums[2] += ch.cue_to_vue(m, k).norm_sqr();
                    counts[0] += 1;
                    counts[2] += 1;
                    for h in ch.vue_to_eve(k, m) {
                        sums[4] += h.norm_sqr();
                        counts[4] += 1;
                    }
                    for k2 in 0..6 {
                        if let Some(h) = ch.inter_vue(k, k2, m) {
                            sums[1] += h.norm_sqr();
                            counts[1] += 1;
                        }
                    }
                }
            }
            for m in 0..6 {
                for h in ch.cue_to_eve(m) {
                    sums[3] += h.norm_sqr();
                    counts[3] += 1;
                }
            }
        }
        for c in 0..5 {
            let mean = sums[c] / counts[c] as f64;
            // smallest class has 300 * 36 = 10800 samples
            assert!((mean - 1.0).abs() < 0.05, "class {c}: {mean}");
        }
    }

    #[test]
    fn inactive_inter_vue_links_are_exactly_zero() {
        let cfg = ScenarioConfig {
            speed_kmh: 100.0,
            ..Default::default()
        };
        let ch: ChannelRealization<f64> = draw_channels(&cfg, &build_topology(&cfg), 3);
        for k in 0..cfg.pairs {
            assert!(ch.inter_vue(k, k, 0).is_none());
            for k2 in (0..cfg.pairs).filter(|&k2| k2 != k) {
                assert_eq!(ch.inter_vue(k, k2, 1), Some(Complex::new(0.0, 0.0)));
            }
        }
    }

    #[test]
    fn seeded_draws_are_bit_identical_and_nested() {
        let cfg = ScenarioConfig::default();
        let topo = build_topology(&cfg);
        let a: ChannelRealization<f64> = draw_channels(&cfg, &topo, 42);
        let b: ChannelRealization<f64> = draw_channels(&cfg, &topo, 42);
        assert_eq!(a, b);
        assert!(a.is_finite());
        let c: ChannelRealization<f64> = draw_channels(&cfg, &topo, 43);
        assert_ne!(a, c);

        let wider = ScenarioConfig {
            eve_antennas: 5,
            pairs: 6,
            ..cfg.clone()
        };
        let d: ChannelRealization<f64> = draw_channels(&wider, &build_topology(&wider), 42);
        assert_eq!(d.eve_antennas(), 5);
        assert_eq!(d.pairs(), 6);
        assert_eq!(&d.vue_to_eve(1, 2)[..2], a.vue_to_eve(1, 2));
        assert_eq!(d.desired(3, 3), a.desired(3, 3));
        assert_eq!(d.inter_vue(0, 2, 1), a.inter_vue(0, 2, 1));
    }

    #[test]
    fn csv_dump_round_trips_exactly() {
        let cfg = ScenarioConfig {
            pairs: 3,
            cues: 2,
            eve_antennas: 3,
            ..Default::default()
        };
        let ch: ChannelRealization<f64> = draw_channels(&cfg, &build_topology(&cfg), 9);
        let mut buf = Vec::new();
        ch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("link_type,k,k2,m,antenna,re,im\n"));
        let back = ChannelRealization::<f64>::read_csv(buf.as_slice(), 3, 2, 3).unwrap();
        assert_eq!(back, ch);
        assert!(ChannelRealization::<f64>::read_csv(buf.as_slice(), 3, 2, 4).is_err());
    }
}
