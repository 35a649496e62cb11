//! Flat `key = value` experiment configuration.

use super::synth::SyntheticKg;
use crate::compress::{CodingParams, CompressOptions, TieRule};
use crate::energy::SystemConstants;
use crate::phy::CellGeometry;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    Bandwidth,
    PMax,
}

impl SweepVar {
    /// Column label, including the unit of the swept value.
    pub fn label(self) -> &'static str {
        match self {
            SweepVar::Bandwidth => "bandwidth_hz",
            SweepVar::PMax => "p_max_dbm",
        }
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bandwidth" => Ok(SweepVar::Bandwidth),
            "p_max" => Ok(SweepVar::PMax),
            _ => Err(format!("expected `bandwidth` or `p_max`, got `{s}`")),
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::Bandwidth => "bandwidth",
            SweepVar::PMax => "p_max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// Full search over operating points.
    Proposed,
    /// No compression anywhere.
    OmegaZero,
    /// Each message at the ratio nearest the given value.
    OmegaFixed(f64),
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "proposed" => Ok(Policy::Proposed),
            "omega_zero" => Ok(Policy::OmegaZero),
            _ => {
                let v = s
                    .strip_prefix("omega_fixed:")
                    .ok_or_else(|| format!("unknown policy `{s}`"))?;
                let v: f64 = v.parse().map_err(|_| format!("bad ratio in `{s}`"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("ratio in `{s}` outside [0, 1]"));
                }
                Ok(Policy::OmegaFixed(v))
            }
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Proposed => f.write_str("proposed"),
            Policy::OmegaZero => f.write_str("omega_zero"),
            Policy::OmegaFixed(v) => write!(f, "omega_fixed:{v}"),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub users: usize,
    pub antennas: usize,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub noise_psd_dbm_hz: f64,
    /// Sample file; synthetic data when unset.
    pub dataset: Option<PathBuf>,
    pub kg: SyntheticKg,
    /// Triples each user must receive.
    pub message_size: usize,
    /// Fraction of each user's message common to all users.
    pub overlap: f64,
    pub sweep: SweepVar,
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_points: usize,
    pub bandwidth_hz: f64,
    pub p_max_dbm: f64,
    /// `p_max_dbm` in watts.
    pub p_max_w: f64,
    pub f_max: f64,
    pub t_max_s: f64,
    pub a_min: f64,
    pub xi: f64,
    pub e0_j: f64,
    pub code_bits: u32,
    pub code_words: u32,
    pub cycles_per_entry: u32,
    pub max_rounds: usize,
    pub lossy_ties: bool,
    pub policies: Vec<Policy>,
    pub trials: usize,
    pub combination_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            users: 3,
            antennas: 4,
            cell_radius_m: 500.0,
            min_distance_m: 35.0,
            noise_psd_dbm_hz: -174.0,
            dataset: None,
            kg: SyntheticKg::default(),
            message_size: 12,
            overlap: 0.33,
            sweep: SweepVar::Bandwidth,
            sweep_start: 1e6,
            sweep_stop: 20e6,
            sweep_points: 10,
            bandwidth_hz: 10e6,
            p_max_dbm: 30.0,
            p_max_w: 1.0,
            f_max: 3e9,
            t_max_s: 1e-3,
            a_min: 0.9,
            xi: 1e-28,
            e0_j: 1e-3,
            code_bits: 32,
            code_words: 1,
            cycles_per_entry: 10,
            max_rounds: 4,
            lossy_ties: false,
            policies: vec![Policy::Proposed, Policy::OmegaZero, Policy::OmegaFixed(0.3)],
            trials: 20,
            combination_cap: 4096,
        }
    }
}

fn parse<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            c.set(key, value).map_err(|e| match e {
                None => ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                },
                Some(message) => ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    message,
                },
            })?;
        }
        c.validate()?;
        Ok(c)
    }

    /// `Err(None)` for an unknown key.
    fn set(&mut self, key: &str, v: &str) -> Result<(), Option<String>> {
        match key {
            "seed" => self.seed = parse(v)?,
            "users" => self.users = parse(v)?,
            "antennas" => self.antennas = parse(v)?,
            "cell_radius_m" => self.cell_radius_m = parse(v)?,
            "min_distance_m" => self.min_distance_m = parse(v)?,
            "noise_psd_dbm_hz" => self.noise_psd_dbm_hz = parse(v)?,
            "dataset" => self.dataset = (!v.is_empty()).then(|| PathBuf::from(v)),
            "kg_pairs" => self.kg.pairs = parse(v)?,
            "kg_max_relations" => self.kg.max_relations = parse(v)?,
            "kg_samples" => self.kg.samples = parse(v)?,
            "kg_topics" => self.kg.topics = parse(v)?,
            "kg_pair_density" => self.kg.pair_density = parse(v)?,
            "kg_topic_affinity" => self.kg.topic_affinity = parse(v)?,
            "message_size" => self.message_size = parse(v)?,
            "overlap" => self.overlap = parse(v)?,
            "sweep" => self.sweep = parse(v)?,
            "sweep_start" => self.sweep_start = parse(v)?,
            "sweep_stop" => self.sweep_stop = parse(v)?,
            "sweep_points" => self.sweep_points = parse(v)?,
            "bandwidth_hz" => self.bandwidth_hz = parse(v)?,
            "p_max_dbm" => {
                self.p_max_dbm = parse(v)?;
                self.p_max_w = dbm_to_watts(self.p_max_dbm);
            }
            "f_max" => self.f_max = parse(v)?,
            "t_max_s" => self.t_max_s = parse(v)?,
            "a_min" => self.a_min = parse(v)?,
            "xi" => self.xi = parse(v)?,
            "e0_j" => self.e0_j = parse(v)?,
            "code_bits" => self.code_bits = parse(v)?,
            "code_words" => self.code_words = parse(v)?,
            "cycles_per_entry" => self.cycles_per_entry = parse(v)?,
            "max_rounds" => self.max_rounds = parse(v)?,
            "lossy_ties" => self.lossy_ties = parse(v)?,
            "policies" => {
                self.policies = v
                    .split(',')
                    .map(|p| p.trim().parse::<Policy>())
                    .collect::<Result<_, _>>()?
            }
            "trials" => self.trials = parse(v)?,
            "combination_cap" => self.combination_cap = parse(v)?,
            _ => return Err(None),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.users == 0 || self.antennas == 0 {
            return bad("users and antennas must be at least 1");
        }
        if self.users >= 255 {
            return bad("at most 254 users");
        }
        if !(self.min_distance_m > 0.0 && self.cell_radius_m >= self.min_distance_m) {
            return bad("need 0 < min_distance_m <= cell_radius_m");
        }
        if self.message_size == 0 {
            return bad("message_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1]");
        }
        if self.sweep_points == 0 || !(self.sweep_start <= self.sweep_stop) {
            return bad("sweep range is empty");
        }
        if self.sweep == SweepVar::Bandwidth && !(self.sweep_start > 0.0) {
            return bad("bandwidth sweep must start above 0 Hz");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.policies.is_empty() {
            return bad("no policies");
        }
        if self.combination_cap == 0 {
            return bad("combination_cap must be at least 1");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive");
        }
        if !(0.0..=1.0).contains(&self.kg.pair_density) || !(0.0..=1.0).contains(&self.kg.topic_affinity) {
            return bad("kg_pair_density and kg_topic_affinity must lie in [0, 1]");
        }
        if self.dataset.is_none() && (self.kg.pairs == 0 || self.kg.samples == 0 || self.kg.max_relations == 0) {
            return bad("synthetic graph needs pairs, samples and relations");
        }
        self.coding().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.constants()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn coding(&self) -> Result<CodingParams, crate::compress::CompressError> {
        CodingParams::new(self.code_words, self.code_bits, self.cycles_per_entry)
    }

    pub fn constants(&self) -> SystemConstants {
        SystemConstants {
            xi: self.xi,
            circuit_energy: self.e0_j,
            a_min: self.a_min,
            p_max: self.p_max_w,
            f_max: self.f_max,
            t_max: self.t_max_s,
        }
    }

    pub fn compression(&self) -> CompressOptions {
        CompressOptions {
            max_rounds: self.max_rounds,
            tie_rule: if self.lossy_ties {
                TieRule::LowestRelation
            } else {
                TieRule::Strict
            },
        }
    }

    pub fn geometry(&self) -> CellGeometry {
        CellGeometry {
            radius_m: self.cell_radius_m,
            min_distance_m: self.min_distance_m,
        }
    }

    /// Evenly spaced sweep values, both ends included.
    pub fn sweep_values(&self) -> Vec<f64> {
        if self.sweep_points == 1 {
            return vec![self.sweep_start];
        }
        let step = (self.sweep_stop - self.sweep_start) / (self.sweep_points - 1) as f64;
        (0..self.sweep_points)
            .map(|i| {
                if i + 1 == self.sweep_points {
                    self.sweep_stop
                } else {
                    self.sweep_start + step * i as f64
                }
            })
            .collect()
    }

    /// The configuration as a parseable file, one documented key per line.
    pub fn to_text(&self) -> String {
        let policies = self
            .policies
            .iter()
            .map(Policy::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        let dataset = self
            .dataset
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let rows: Vec<(&str, String, &str)> = vec![
            ("seed", self.seed.to_string(), "master seed"),
            ("users", self.users.to_string(), "number of users K"),
            ("antennas", self.antennas.to_string(), "base-station antennas"),
            ("cell_radius_m", self.cell_radius_m.to_string(), "cell radius"),
            ("min_distance_m", self.min_distance_m.to_string(), "closest user distance"),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz.to_string(), "noise spectral density"),
            ("dataset", dataset, "sample file; empty for synthetic data"),
            ("kg_pairs", self.kg.pairs.to_string(), "synthetic entity pairs"),
            ("kg_max_relations", self.kg.max_relations.to_string(), "relations per pair, at most"),
            ("kg_samples", self.kg.samples.to_string(), "synthetic samples"),
            ("kg_topics", self.kg.topics.to_string(), "latent topics"),
            ("kg_pair_density", self.kg.pair_density.to_string(), "chance a sample observes a pair"),
            ("kg_topic_affinity", self.kg.topic_affinity.to_string(), "chance of the topic's relation"),
            ("message_size", self.message_size.to_string(), "triples per user"),
            ("overlap", self.overlap.to_string(), "shared fraction of each message"),
            ("sweep", self.sweep.to_string(), "bandwidth | p_max"),
            ("sweep_start", self.sweep_start.to_string(), "first value (Hz or dBm)"),
            ("sweep_stop", self.sweep_stop.to_string(), "last value (Hz or dBm)"),
            ("sweep_points", self.sweep_points.to_string(), "evenly spaced points"),
            ("bandwidth_hz", self.bandwidth_hz.to_string(), "bandwidth when not swept"),
            ("p_max_dbm", self.p_max_dbm.to_string(), "power budget when not swept"),
            ("f_max", self.f_max.to_string(), "compute budget, cycles/s"),
            ("t_max_s", self.t_max_s.to_string(), "deadline"),
            ("a_min", self.a_min.to_string(), "minimum semantic accuracy"),
            ("xi", self.xi.to_string(), "switched capacitance"),
            ("e0_j", self.e0_j.to_string(), "circuit energy per task"),
            ("code_bits", self.code_bits.to_string(), "bits per code word"),
            ("code_words", self.code_words.to_string(), "code words per entity"),
            ("cycles_per_entry", self.cycles_per_entry.to_string(), "cycles per matrix entry"),
            ("max_rounds", self.max_rounds.to_string(), "compression round cap"),
            ("lossy_ties", self.lossy_ties.to_string(), "let tied maxima degenerate"),
            ("policies", policies, "proposed, omega_zero, omega_fixed:<v>"),
            ("trials", self.trials.to_string(), "trials per sweep point"),
            ("combination_cap", self.combination_cap.to_string(), "full enumeration limit"),
        ];
        let mut out = String::new();
        for (k, v, doc) in rows {
            out.push_str(&format!("# {doc}\n{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
        assert_eq!(ExperimentConfig::parse("").unwrap(), d);
    }

    #[test]
    fn parses_overrides() {
        let c = ExperimentConfig::parse(
            "# comment\nusers = 2\np_max_dbm = 20 # inline\npolicies = proposed,omega_fixed:0.5\nsweep = p_max\n",
        )
        .unwrap();
        assert_eq!(c.users, 2);
        assert!((c.p_max_w - 0.1).abs() < 1e-15);
        assert_eq!(c.policies, vec![Policy::Proposed, Policy::OmegaFixed(0.5)]);
        assert_eq!(c.sweep, SweepVar::PMax);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert_eq!(
            ExperimentConfig::parse("\nuserz = 3\n"),
            Err(ConfigError::UnknownKey {
                line: 2,
                key: "userz".into()
            })
        );
        assert!(matches!(
            ExperimentConfig::parse("users = many"),
            Err(ConfigError::BadValue { line: 1, .. })
        ));
        assert!(matches!(ExperimentConfig::parse("users"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(ExperimentConfig::parse("trials = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            ExperimentConfig::parse("sweep_start = 5\nsweep_stop = 1"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(ExperimentConfig::parse("policies = best").is_err());
        assert!(ExperimentConfig::parse("policies = omega_fixed:2").is_err());
    }

    #[test]
    fn power_conversion() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn sweep_values_cover_the_range() {
        let v = ExperimentConfig::default().sweep_values();
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 1e6);
        assert_eq!(v[9], 20e6);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        let one = ExperimentConfig {
            sweep_points: 1,
            ..ExperimentConfig::default()
        };
        assert_eq!(one.sweep_values(), vec![1e6]);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in ["proposed", "omega_zero", "omega_fixed:0.3"] {
            assert_eq!(p.parse::<Policy>().unwrap().to_string(), p);
        }
    }
}
