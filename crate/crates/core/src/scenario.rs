//! Experiment configuration, the flat `key = value` config format, and the
//! speed/headway rule deciding which inter-VUE interference links exist.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// All physical and network constants of one scenario.
///
/// Channel gains are taken as already normalized by the noise power, so the
/// default `noise_power` is 1. Large-scale attenuation is not modeled; the
/// `gain_*` fields are linear power multipliers applied per link class.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// `M`: number of CUEs, one resource block each.
    pub cues: usize,
    /// `K`: number of VUE pairs.
    pub pairs: usize,
    /// `Nt`: BS antennas. Kept for fidelity; no BS-side link enters the objective.
    pub bs_antennas: usize,
    /// `Ne`: eavesdropper antennas.
    pub eve_antennas: usize,
    /// Total system bandwidth `B` in Hz.
    pub bandwidth_total: f64,
    /// CUE transmit power in watts, equal for every CUE.
    pub cue_power: f64,
    /// Per-VUE power limit in watts.
    pub p_max: f64,
    pub noise_power: f64,
    /// Linear Rician K-factor.
    pub rician_k: f64,
    pub speed_kmh: f64,
    pub coherence_ms: f64,
    pub v2v_range_m: f64,
    pub headway_s: f64,
    /// Growth of the inter-vehicle distance per additional index gap between
    /// two pairs. 1 applies the single-headway distance to every pair.
    pub pairwise_headway_multiplier: f64,
    pub gain_desired: f64,
    pub gain_inter_vue: f64,
    pub gain_cue_vue: f64,
    pub gain_cue_eve: f64,
    pub gain_vue_eve: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cues: 4,
            pairs: 4,
            bs_antennas: 4,
            eve_antennas: 2,
            bandwidth_total: 20e6,
            cue_power: 1.0,
            p_max: 1.0,
            noise_power: 1.0,
            rician_k: 10.0,
            speed_kmh: 50.0,
            coherence_ms: 200.0,
            v2v_range_m: 100.0,
            headway_s: 5.0,
            pairwise_headway_multiplier: 1.0,
            gain_desired: 1.0,
            gain_inter_vue: 1.0,
            gain_cue_vue: 1.0,
            gain_cue_eve: 1.0,
            gain_vue_eve: 1.0,
            seed: 0,
        }
    }
}

/// Config keys in file order, as accepted by [`ScenarioConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "M",
    "K",
    "Nt",
    "Ne",
    "bandwidth_total",
    "cue_power",
    "p_max",
    "noise_power",
    "rician_k",
    "speed_kmh",
    "coherence_ms",
    "v2v_range_m",
    "headway_s",
    "pairwise_headway_multiplier",
    "gain_desired",
    "gain_inter_vue",
    "gain_cue_vue",
    "gain_cue_eve",
    "gain_vue_eve",
    "seed",
];

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

impl ScenarioConfig {
    /// Per-RB bandwidth `W = B / M` in Hz.
    pub fn per_rb_bandwidth(&self) -> f64 {
        self.bandwidth_total / self.cues as f64
    }

    /// Strict-positivity floor for VUE powers.
    pub fn epsilon_p(&self) -> f64 {
        1e-12 * self.p_max
    }

    /// Sets one field from its config key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "M" => self.cues = parse_value(key, value)?,
            "K" => self.pairs = parse_value(key, value)?,
            "Nt" => self.bs_antennas = parse_value(key, value)?,
            "Ne" => self.eve_antennas = parse_value(key, value)?,
            "bandwidth_total" => self.bandwidth_total = parse_value(key, value)?,
            "cue_power" => self.cue_power = parse_value(key, value)?,
            "p_max" => self.p_max = parse_value(key, value)?,
            "noise_power" => self.noise_power = parse_value(key, value)?,
            "rician_k" => self.rician_k = parse_value(key, value)?,
            "speed_kmh" => self.speed_kmh = parse_value(key, value)?,
            "coherence_ms" => self.coherence_ms = parse_value(key, value)?,
            "v2v_range_m" => self.v2v_range_m = parse_value(key, value)?,
            "headway_s" => self.headway_s = parse_value(key, value)?,
            "pairwise_headway_multiplier" => {
                self.pairwise_headway_multiplier = parse_value(key, value)?
            }
            "gain_desired" => self.gain_desired = parse_value(key, value)?,
            "gain_inter_vue" => self.gain_inter_vue = parse_value(key, value)?,
            "gain_cue_vue" => self.gain_cue_vue = parse_value(key, value)?,
            "gain_cue_eve" => self.gain_cue_eve = parse_value(key, value)?,
            "gain_vue_eve" => self.gain_vue_eve = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(key, value)
    }

    /// Parses config text on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (key, value) in parse_pairs(text)? {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Renders every field in the config file format; `parse` inverts it.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// Current value of a config key rendered as text.
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "M" => self.cues.to_string(),
            "K" => self.pairs.to_string(),
            "Nt" => self.bs_antennas.to_string(),
            "Ne" => self.eve_antennas.to_string(),
            "bandwidth_total" => self.bandwidth_total.to_string(),
            "cue_power" => self.cue_power.to_string(),
            "p_max" => self.p_max.to_string(),
            "noise_power" => self.noise_power.to_string(),
            "rician_k" => self.rician_k.to_string(),
            "speed_kmh" => self.speed_kmh.to_string(),
            "coherence_ms" => self.coherence_ms.to_string(),
            "v2v_range_m" => self.v2v_range_m.to_string(),
            "headway_s" => self.headway_s.to_string(),
            "pairwise_headway_multiplier" => self.pairwise_headway_multiplier.to_string(),
            "gain_desired" => self.gain_desired.to_string(),
            "gain_inter_vue" => self.gain_inter_vue.to_string(),
            "gain_cue_vue" => self.gain_cue_vue.to_string(),
            "gain_cue_eve" => self.gain_cue_eve.to_string(),
            "gain_vue_eve" => self.gain_vue_eve.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        };
        Some(v)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("M", self.cues),
            ("K", self.pairs),
            ("Nt", self.bs_antennas),
            ("Ne", self.eve_antennas),
        ];
        for (key, v) in counts {
            if v < 1 {
                return Err(Error::Config(format!("{key} must satisfy {key} >= 1 (got {v})")));
            }
        }
        let positive = [
            ("bandwidth_total", self.bandwidth_total),
            ("cue_power", self.cue_power),
            ("p_max", self.p_max),
            ("noise_power", self.noise_power),
            ("pairwise_headway_multiplier", self.pairwise_headway_multiplier),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be > 0 (got {v})")));
            }
        }
        let nonnegative = [
            ("rician_k", self.rician_k),
            ("speed_kmh", self.speed_kmh),
            ("coherence_ms", self.coherence_ms),
            ("v2v_range_m", self.v2v_range_m),
            ("headway_s", self.headway_s),
            ("gain_desired", self.gain_desired),
            ("gain_inter_vue", self.gain_inter_vue),
            ("gain_cue_vue", self.gain_cue_vue),
            ("gain_cue_eve", self.gain_cue_eve),
            ("gain_vue_eve", self.gain_vue_eve),
        ];
        for (key, v) in nonnegative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{key} must be >= 0 (got {v})")));
            }
        }
        if self.pairs > u16::MAX as usize
            || self.cues > u16::MAX as usize
            || self.eve_antennas > u16::MAX as usize
        {
            return Err(Error::Config("dimensions are limited to 65535".into()));
        }
        Ok(())
    }
}

/// Splits config text into trimmed `(key, value)` pairs, dropping blank lines
/// and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Which ordered pairs `(k, k')` carry inter-VUE interference.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceTopology {
    pairs: usize,
    active: Vec<bool>,
    /// Distance between neighbouring VUE pairs, from speed and headway.
    pub inter_vehicle_distance_m: f64,
}

impl InterferenceTopology {
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Whether pair `k2` interferes with pair `k`. Always false for `k == k2`.
    #[inline]
    pub fn is_active(&self, k: usize, k2: usize) -> bool {
        self.active[k * self.pairs + k2]
    }

    /// True when no inter-VUE link is active.
    pub fn is_isolated(&self) -> bool {
        !self.active.iter().any(|&a| a)
    }

    /// Topology with every inter-VUE link removed.
    pub fn isolated(pairs: usize, inter_vehicle_distance_m: f64) -> Self {
        Self {
            pairs,
            active: vec![false; pairs * pairs],
            inter_vehicle_distance_m,
        }
    }
}

/// Distance covered at `speed_kmh` during one headway.
pub fn inter_vehicle_distance_m(speed_kmh: f64, headway_s: f64) -> f64 {
    speed_kmh / 3.6 * headway_s
}

/// Marks `(k, k')` active when the vehicles are within V2V range.
pub fn build_topology(cfg: &ScenarioConfig) -> InterferenceTopology {
    let pairs = cfg.pairs;
    let base = inter_vehicle_distance_m(cfg.speed_kmh, cfg.headway_s);
    let mut active = vec![false; pairs * pairs];
    for k in 0..pairs {
        for k2 in 0..pairs {
            if k == k2 {
                continue;
            }
            let gap = k.abs_diff(k2) as i32 - 1;
            let distance = base * cfg.pairwise_headway_multiplier.powi(gap);
            active[k * pairs + k2] = distance <= cfg.v2v_range_m;
        }
    }
    InterferenceTopology {
        pairs,
        active,
        inter_vehicle_distance_m: base,
    }
}

/// `W = B / M`.
pub fn per_rb_bandwidth(cfg: &ScenarioConfig) -> f64 {
    cfg.per_rb_bandwidth()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg_with_speed(speed_kmh: f64) -> ScenarioConfig {
        ScenarioConfig {
            speed_kmh,
            headway_s: 5.0,
            v2v_range_m: 100.0,
            ..Default::default()
        }
    }

    #[test]
    fn urban_speed_keeps_inter_vue_interference() {
        let topo = build_topology(&cfg_with_speed(50.0));
        assert!((topo.inter_vehicle_distance_m - 69.45).abs() < 0.01);
        assert!(topo.is_active(0, 1) && topo.is_active(3, 0));
        assert!(!topo.is_active(2, 2));
    }

    #[test]
    fn highway_speed_removes_inter_vue_interference() {
        let topo = build_topology(&cfg_with_speed(100.0));
        assert!((topo.inter_vehicle_distance_m - 138.9).abs() < 0.02);
        assert!(topo.is_isolated());
    }

    #[test]
    fn standing_traffic_is_fully_coupled() {
        let topo = build_topology(&cfg_with_speed(0.0));
        assert_eq!(topo.inter_vehicle_distance_m, 0.0);
        assert!(topo.is_active(0, 3));
    }

    #[test]
    fn headway_multiplier_drops_distant_pairs() {
        let cfg = ScenarioConfig {
            pairwise_headway_multiplier: 2.0,
            ..cfg_with_speed(50.0)
        };
        let topo = build_topology(&cfg);
        assert!(topo.is_active(0, 1));
        // 69.4 m * 2 > 100 m
        assert!(!topo.is_active(0, 2));
    }

    #[test]
    fn per_rb_bandwidth_divides_evenly() {
        for (m, w) in [(4, 5e6), (1, 20e6), (8, 2.5e6)] {
            let cfg = ScenarioConfig {
                cues: m,
                ..Default::default()
            };
            assert_eq!(per_rb_bandwidth(&cfg), w);
        }
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.set("K", "7").unwrap();
        cfg.set("gain_vue_eve", "0.25").unwrap();
        let back = ScenarioConfig::parse(&cfg.to_config_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parse_handles_comments_and_rejects_unknown_keys() {
        let cfg = ScenarioConfig::parse("# header\nM = 8  # blocks\n\nK=2\n").unwrap();
        assert_eq!((cfg.cues, cfg.pairs), (8, 2));
        let err = ScenarioConfig::parse("bogus = 1").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(ScenarioConfig::parse("M 4").is_err());
    }

    #[test]
    fn validation_names_the_invariant() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_override("K=0").unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("K >= 1"), "{msg}");
        let mut cfg = ScenarioConfig::default();
        cfg.p_max = 0.0;
        assert!(cfg.validate().is_err());
        cfg.p_max = 1.0;
        cfg.rician_k = -1.0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn distance_is_linear_in_speed_and_headway(
            speed in 0.0f64..200.0,
            headway in 0.0f64..20.0,
            scale in 0.1f64..10.0,
        ) {
            let d = inter_vehicle_distance_m(speed, headway);
            let ds = inter_vehicle_distance_m(speed * scale, headway);
            let dh = inter_vehicle_distance_m(speed, headway * scale);
            prop_assert!((ds - scale * d).abs() <= 1e-9 * (1.0 + ds.abs()));
            prop_assert!((dh - scale * d).abs() <= 1e-9 * (1.0 + dh.abs()));
        }

        #[test]
        fn topology_is_symmetric_and_deterministic(
            pairs in 1usize..7,
            speed in 0.0f64..150.0,
            mult in 0.5f64..3.0,
        ) {
            let cfg = ScenarioConfig {
                pairs,
                speed_kmh: speed,
                pairwise_headway_multiplier: mult,
                ..Default::default()
            };
            let topo = build_topology(&cfg);
            prop_assert_eq!(&topo, &build_topology(&cfg));
            for k in 0..pairs {
                prop_assert!(!topo.is_active(k, k));
                for k2 in 0..pairs {
                    prop_assert_eq!(topo.is_active(k, k2), topo.is_active(k2, k));
                }
            }
        }
    }
}
