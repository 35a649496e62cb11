//! Joint power, compute and compression-ratio allocation.
//!
//! The outer search runs over combinations of achievable operating points
//! (one per message); for each combination an inner projected-gradient
//! ascent picks powers and CPU clocks. A brute-force grid search serves as a
//! cross-check on small instances.

mod oracle;
mod problem;
mod solver;
mod table;

pub use oracle::grid_oracle;
pub use problem::{ee_gradient, fd_gradient, project_simplex, Evaluation, Problem};
pub use solver::{optimize, OptimizerOptions, Solver};
pub use table::{OmegaTable, OperatingPoint};

use crate::compress::{accuracy, CodingParams, CompressError, CompressOptions, MessageRole, PartitionedMessage};
use crate::energy::{
    delay_shared, delay_user, energy_efficiency, EnergyBreakdown, EnergyError, StreamRates,
    SystemConstants,
};
use crate::kg::{KnowledgeGraph, Triple};
use crate::phy::{
    make_beamformers, private_rate, shared_rate, BeamPolicy, BeamformerSet, ChannelState,
    LinkGains, PhyError, PowerAlloc,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Numerical allowance on slacks when calling a point feasible.
pub const SLACK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Semantic accuracy of user `k` (0-based).
    Accuracy(usize),
    Power,
    Compute,
    /// Deadline of stream `j`.
    Delay(usize),
    /// Rate needed to deliver stream `j` within the deadline.
    Rate(usize),
    NonNegative,
    /// Compression ratio of stream `j` within `[0, 1]`.
    Omega(usize),
    BeamNorm,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::Accuracy(k) => write!(f, "accuracy of user {}", k + 1),
            ConstraintKind::Power => write!(f, "total power"),
            ConstraintKind::Compute => write!(f, "total compute"),
            ConstraintKind::Delay(j) => write!(f, "delay of stream {j}"),
            ConstraintKind::Rate(j) => write!(f, "rate of stream {j}"),
            ConstraintKind::NonNegative => write!(f, "non-negativity"),
            ConstraintKind::Omega(j) => write!(f, "compression ratio of stream {j}"),
            ConstraintKind::BeamNorm => write!(f, "beamformer norm"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("infeasible scenario: {constraint} violated (slack {slack:.3e})")]
    Infeasible { constraint: ConstraintKind, slack: f64 },
    #[error("grid oracle limited to {max_users} users and {max_combinations} combinations")]
    OracleTooLarge {
        max_users: usize,
        max_combinations: usize,
    },
    #[error("combination {0:?} does not index the operating-point tables")]
    BadCombination(Vec<usize>),
    #[error("message has {got} users but channels have {expected}")]
    UserMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Dimensionless slack per constraint; non-negative means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub slacks: Vec<(ConstraintKind, f64)>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.slacks.iter().all(|(_, s)| *s >= -SLACK_TOLERANCE)
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min)
    }

    pub fn most_violated(&self) -> Option<(ConstraintKind, f64)> {
        self.slacks
            .iter()
            .copied()
            .filter(|(_, s)| *s < -SLACK_TOLERANCE || s.is_nan())
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn slack(&self, kind: ConstraintKind) -> Option<f64> {
        self.slacks.iter().find(|(k, _)| *k == kind).map(|(_, s)| *s)
    }

    fn infeasible_error(&self) -> AllocError {
        let (constraint, slack) = self.most_violated().unwrap_or((ConstraintKind::Delay(0), 0.0));
        AllocError::Infeasible { constraint, slack }
    }
}

/// One optimisation instance: knowledge base, messages, link, constants and
/// the achievable operating points of every message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    kg: KnowledgeGraph,
    message: PartitionedMessage,
    channels: ChannelState,
    beam_policy: BeamPolicy,
    beams: BeamformerSet,
    gains: LinkGains,
    coding: CodingParams,
    constants: SystemConstants,
    compression: CompressOptions,
    tables: Vec<OmegaTable>,
}

impl Scenario {
    /// `compression.max_rounds` caps the operating-point tables.
    pub fn new(
        kg: KnowledgeGraph,
        message: PartitionedMessage,
        channels: ChannelState,
        beam_policy: BeamPolicy,
        coding: CodingParams,
        constants: SystemConstants,
        compression: CompressOptions,
    ) -> Result<Self, AllocError> {
        constants.validate()?;
        if message.users() != channels.users() {
            return Err(AllocError::UserMismatch {
                expected: channels.users(),
                got: message.users(),
            });
        }
        if message.users() >= u8::MAX as usize {
            return Err(CompressError::Malformed("too many users".into()).into());
        }
        let beams = make_beamformers(&channels, &beam_policy)?;
        let gains = LinkGains::new(&channels, &beams)?;
        let mut tables = Vec::with_capacity(message.users() + 1);
        tables.push(OmegaTable::build(
            &kg,
            MessageRole::Shared,
            &message.shared,
            &coding,
            compression.max_rounds,
            compression,
        )?);
        for (k, m) in message.private.iter().enumerate() {
            tables.push(OmegaTable::build(
                &kg,
                MessageRole::Private(k as u8 + 1),
                m,
                &coding,
                compression.max_rounds,
                compression,
            )?);
        }
        Ok(Self {
            kg,
            message,
            channels,
            beam_policy,
            beams,
            gains,
            coding,
            constants,
            compression,
            tables,
        })
    }

    /// Same scenario at another bandwidth; the noise power follows.
    pub fn with_bandwidth(&self, bandwidth: f64, noise_power: f64) -> Result<Self, AllocError> {
        let mut s = self.clone();
        s.channels = self.channels.with_bandwidth(bandwidth, noise_power)?;
        Ok(s)
    }

    /// Same scenario with another power budget. Not validated, so that
    /// feasibility of a zero budget can still be reported.
    pub fn with_p_max(&self, p_max: f64) -> Self {
        let mut s = self.clone();
        s.constants.p_max = p_max;
        s
    }

    pub fn with_constants(&self, constants: SystemConstants) -> Self {
        let mut s = self.clone();
        s.constants = constants;
        s
    }

    /// Keeps only the entries at `indices` of each table.
    pub fn restrict_tables(&self, indices: &[Vec<usize>]) -> Self {
        let mut s = self.clone();
        for (t, keep) in s.tables.iter_mut().zip(indices) {
            t.points = keep.iter().map(|&i| t.points[i].clone()).collect();
        }
        s
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn message(&self) -> &PartitionedMessage {
        &self.message
    }

    pub fn channels(&self) -> &ChannelState {
        &self.channels
    }

    pub fn beam_policy(&self) -> &BeamPolicy {
        &self.beam_policy
    }

    pub fn beams(&self) -> &BeamformerSet {
        &self.beams
    }

    pub fn gains(&self) -> &LinkGains {
        &self.gains
    }

    pub fn coding(&self) -> &CodingParams {
        &self.coding
    }

    pub fn constants(&self) -> &SystemConstants {
        &self.constants
    }

    pub fn compression(&self) -> &CompressOptions {
        &self.compression
    }

    pub fn tables(&self) -> &[OmegaTable] {
        &self.tables
    }

    pub fn users(&self) -> usize {
        self.message.users()
    }

    pub fn streams(&self) -> usize {
        self.users() + 1
    }

    pub fn combination_count(&self) -> usize {
        self.tables.iter().map(OmegaTable::len).product()
    }

    pub fn dump(&self) -> String {
        serde_json::to_string(self).expect("scenario serialises")
    }

    fn check_combo(&self, combo: &[usize]) -> Result<(), AllocError> {
        if combo.len() != self.tables.len() || combo.iter().zip(&self.tables).any(|(&i, t)| i >= t.len()) {
            return Err(AllocError::BadCombination(combo.to_vec()));
        }
        Ok(())
    }

    /// Accuracy of every user at a combination of operating points.
    pub fn accuracies(&self, combo: &[usize]) -> Result<Vec<f64>, AllocError> {
        self.check_combo(combo)?;
        let shared = &self.tables[0].points[combo[0]].recovered;
        (0..self.users())
            .map(|k| {
                let mut got: Vec<Triple> = shared.clone();
                got.extend_from_slice(&self.tables[k + 1].points[combo[k + 1]].recovered);
                let want = self.message.user_view(k);
                if want.is_empty() {
                    Ok(1.0)
                } else {
                    Ok(accuracy(&want, &got)?)
                }
            })
            .collect()
    }
}

/// A complete solution: allocation, operating points and its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub powers: Vec<f64>,
    pub computes: Vec<f64>,
    /// Chosen index into each message's operating-point table.
    pub choice: Vec<usize>,
    pub rounds: Vec<usize>,
    pub omegas: Vec<f64>,
    pub comp_cycles: Vec<f64>,
    pub delays: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub breakdown: EnergyBreakdown,
    pub ee: f64,
    pub report: FeasibilityReport,
}

impl Allocation {
    pub fn tau_max(&self) -> f64 {
        self.delays.iter().copied().fold(0.0, f64::max)
    }

    pub fn accuracy_min(&self) -> f64 {
        self.accuracy.iter().copied().fold(1.0, f64::min)
    }
}

/// `used / cap`, taking an unused zero budget as fully slack.
fn usage(used: f64, cap: f64) -> f64 {
    if used == 0.0 {
        0.0
    } else {
        used / cap
    }
}

fn rate_slack(rate: f64, bits: f64, t_max: f64) -> f64 {
    if bits == 0.0 {
        return 0.0;
    }
    let need = bits / t_max;
    if need.is_infinite() {
        return -1.0;
    }
    if need == 0.0 {
        return if rate > 0.0 { f64::INFINITY } else { -1.0 };
    }
    rate / need - 1.0
}

fn delay_slack(d: Result<f64, EnergyError>, t_max: f64) -> f64 {
    match d {
        Ok(0.0) => 1.0,
        Ok(t) => 1.0 - t / t_max,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Slacks, per-stream delays, per-user accuracies and the energy breakdown.
pub type Assessment = (FeasibilityReport, Vec<f64>, Vec<f64>, Result<EnergyBreakdown, EnergyError>);

/// Evaluates every constraint at an explicit allocation, using the public
/// rate, delay and energy formulas directly.
pub fn assess(
    scenario: &Scenario,
    combo: &[usize],
    powers: &[f64],
    computes: &[f64],
) -> Result<Assessment, AllocError> {
    scenario.check_combo(combo)?;
    let n = scenario.streams();
    let c = scenario.constants();
    let pa = PowerAlloc(powers.to_vec());
    let s0 = shared_rate(scenario.channels(), scenario.beams(), &pa)?;
    let q = (0..scenario.users())
        .map(|k| private_rate(k, scenario.channels(), scenario.beams(), &pa))
        .collect::<Result<Vec<_>, _>>()?;
    let loads: Vec<_> = (0..n).map(|j| scenario.tables[j].load(combo[j])).collect();
    let acc = scenario.accuracies(combo)?;

    let mut slacks = Vec::new();
    for (k, a) in acc.iter().enumerate() {
        slacks.push((ConstraintKind::Accuracy(k), a - c.a_min));
    }
    slacks.push((ConstraintKind::Power, 1.0 - usage(pa.total(), c.p_max)));
    slacks.push((ConstraintKind::Compute, 1.0 - usage(computes.iter().sum(), c.f_max)));
    let nonneg = powers
        .iter()
        .map(|&p| usage(p, c.p_max))
        .chain(computes.iter().map(|&f| usage(f, c.f_max)))
        .fold(f64::INFINITY, f64::min);
    slacks.push((ConstraintKind::NonNegative, nonneg));

    let mut delays = Vec::with_capacity(n);
    let d0 = delay_shared(&loads[0], computes[0], s0);
    delays.push(*d0.as_ref().unwrap_or(&f64::INFINITY));
    slacks.push((ConstraintKind::Delay(0), delay_slack(d0, c.t_max)));
    for k in 0..scenario.users() {
        let d = delay_user(&loads[k + 1], &loads[0], computes[k + 1], s0, q[k]);
        delays.push(*d.as_ref().unwrap_or(&f64::INFINITY));
        slacks.push((ConstraintKind::Delay(k + 1), delay_slack(d, c.t_max)));
    }
    slacks.push((ConstraintKind::Rate(0), rate_slack(s0, loads[0].comm_bits, c.t_max)));
    for k in 0..scenario.users() {
        slacks.push((
            ConstraintKind::Rate(k + 1),
            rate_slack(q[k], loads[k + 1].comm_bits, c.t_max),
        ));
    }
    for (j, t) in scenario.tables.iter().enumerate() {
        let w = t.points[combo[j]].omega;
        slacks.push((ConstraintKind::Omega(j), w.min(1.0 - w)));
    }
    slacks.push((ConstraintKind::BeamNorm, -scenario.beams().max_norm_deviation()));

    let rates = StreamRates {
        shared: s0,
        private: q,
    };
    let breakdown = energy_efficiency(&loads, powers, computes, &rates, c, scenario.coding());
    Ok((FeasibilityReport { slacks }, delays, acc, breakdown))
}

/// Constraint slacks at the reference point: equal power and compute split,
/// no compression.
pub fn check_feasible(scenario: &Scenario) -> FeasibilityReport {
    let n = scenario.streams();
    let c = scenario.constants();
    let powers = vec![c.p_max / n as f64; n];
    let computes = vec![c.f_max / n as f64; n];
    assess(scenario, &vec![0; n], &powers, &computes)
        .map(|r| r.0)
        .expect("reference point is well formed")
}

/// Builds the full allocation record for a point, or `None` when any
/// constraint is violated.
pub fn finalize(
    scenario: &Scenario,
    combo: &[usize],
    powers: &[f64],
    computes: &[f64],
) -> Result<Option<Allocation>, AllocError> {
    let (report, delays, accuracy, breakdown) = assess(scenario, combo, powers, computes)?;
    let breakdown = match breakdown {
        Ok(b) if report.feasible() => b,
        _ => return Ok(None),
    };
    let points: Vec<&OperatingPoint> = combo
        .iter()
        .zip(scenario.tables())
        .map(|(&i, t)| &t.points[i])
        .collect();
    Ok(Some(Allocation {
        powers: powers.to_vec(),
        computes: computes.to_vec(),
        choice: combo.to_vec(),
        rounds: points.iter().map(|p| p.rounds).collect(),
        omegas: points.iter().map(|p| p.omega).collect(),
        comp_cycles: points.iter().map(|p| p.comp_cycles).collect(),
        delays,
        accuracy,
        ee: breakdown.ee,
        breakdown,
        report,
    }))
}


#[cfg(test)]
mod tests {
    use super::testutil::scenario;
    use super::*;

    #[test]
    fn reference_point_is_feasible_with_generous_deadline() {
        let s = scenario(1, 3, 3, 6);
        let loose = s.with_constants(SystemConstants {
            t_max: 1.0,
            ..*s.constants()
        });
        let r = check_feasible(&loose);
        assert!(r.feasible(), "{r:?}");
        assert!(r.slack(ConstraintKind::Delay(0)).unwrap() > 0.9);
    }

    #[test]
    fn zero_deadline_flags_delay() {
        let s = scenario(1, 2, 2, 3);
        let r = check_feasible(&s.with_constants(SystemConstants {
            t_max: 0.0,
            ..*s.constants()
        }));
        assert!(!r.feasible());
        assert!(r.slack(ConstraintKind::Delay(1)).unwrap() < 0.0);
        assert!(matches!(r.most_violated(), Some((ConstraintKind::Delay(_), _))));
    }

    #[test]
    fn zero_power_flags_rate() {
        let s = scenario(2, 2, 2, 3);
        let r = check_feasible(&s.with_p_max(0.0));
        assert!(!r.feasible());
        assert_eq!(r.slack(ConstraintKind::Rate(0)), Some(-1.0));
        assert_eq!(r.slack(ConstraintKind::Rate(2)), Some(-1.0));
    }

    #[test]
    fn scenario_tables_and_dump() {
        let s = scenario(3, 3, 2, 4);
        assert_eq!(s.tables().len(), 4);
        assert!(s.tables().iter().all(|t| !t.is_empty() && t.points[0].omega == 0.0));
        assert_eq!(s.dump(), scenario(3, 3, 2, 4).dump());
        let wide = s.with_bandwidth(2e7, 1e-13).unwrap();
        assert_eq!(wide.channels().bandwidth(), 2e7);
        assert_eq!(wide.tables(), s.tables());
        assert!(s.accuracies(&[0, 0, 0, 0]).unwrap().iter().all(|&a| a == 1.0));
        assert!(matches!(s.accuracies(&[0, 0]), Err(AllocError::BadCombination(_))));
    }

    #[test]
    fn fast_evaluation_matches_public_formulas() {
        let s = scenario(4, 3, 3, 4);
        let n = s.streams();
        let combo: Vec<usize> = s.tables().iter().map(|t| t.len() - 1).collect();
        let p = Problem::new(&s, &combo);
        let x: Vec<f64> = (0..2 * n).map(|i| 0.05 + 0.03 * (i % n) as f64).collect();
        let eval = p.evaluate(&x);
        let c = s.constants();
        let powers: Vec<f64> = x[..n].iter().map(|v| v * c.p_max).collect();
        let computes: Vec<f64> = x[n..].iter().map(|v| v * c.f_max).collect();
        let (_, delays, _, b) = assess(&s, &combo, &powers, &computes).unwrap();
        let b = b.unwrap();
        assert!((eval.ee / b.ee - 1.0).abs() < 1e-12);
        assert!((p.ee(&x) / b.ee - 1.0).abs() < 1e-12);
        for (a, d) in eval.delays.iter().zip(&delays) {
            assert!((a / d - 1.0).abs() < 1e-12);
        }
    }
}
