//! Delay, energy and energy-efficiency accounting for one transmission task.
//!
//! Messages are indexed as streams: `0` is the shared message, `i` (1-based)
//! the private message of user `i`. A message with no bits or no cycles
//! costs nothing and needs no rate or clock.

use crate::compress::CodingParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("infeasible allocation: {0}")]
    Infeasible(String),
    #[error("invalid constant {name} = {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("expected {expected} entries for {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    /// Effective switched capacitance `ξ`.
    pub xi: f64,
    /// Circuit energy per task `E_0` in joules.
    pub circuit_energy: f64,
    pub a_min: f64,
    pub p_max: f64,
    pub f_max: f64,
    pub t_max: f64,
}

impl Default for SystemConstants {
    fn default() -> Self {
        Self {
            xi: 1e-28,
            circuit_energy: 1e-3,
            a_min: 0.9,
            p_max: 1.0,
            f_max: 3e9,
            t_max: 1e-3,
        }
    }
}

impl SystemConstants {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let positive = [
            ("xi", self.xi),
            ("e0", self.circuit_energy),
            ("p_max", self.p_max),
            ("f_max", self.f_max),
            ("t_max", self.t_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(EnergyError::InvalidConstant { name, value });
            }
        }
        if !(self.a_min > 0.0 && self.a_min <= 1.0) {
            return Err(EnergyError::InvalidConstant {
                name: "a_min",
                value: self.a_min,
            });
        }
        Ok(())
    }
}

/// Work carried by one message at its chosen operating point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageLoad {
    /// Uncompressed triple count.
    pub triples: usize,
    /// Compression cycles `l_cp`.
    pub comp_cycles: f64,
    /// Transmitted bits `l_cm`.
    pub comm_bits: f64,
}

fn infeasible(what: String) -> EnergyError {
    EnergyError::Infeasible(what)
}

/// `cycles / f`, zero when there is no work.
pub fn compute_time(cycles: f64, f: f64) -> Result<f64, EnergyError> {
    if cycles == 0.0 {
        Ok(0.0)
    } else if f > 0.0 {
        Ok(cycles / f)
    } else {
        Err(infeasible(format!("{cycles} cycles with zero compute")))
    }
}

/// `bits / rate`, zero for an empty message.
pub fn airtime(bits: f64, rate: f64) -> Result<f64, EnergyError> {
    if bits == 0.0 {
        Ok(0.0)
    } else if rate > 0.0 {
        Ok(bits / rate)
    } else {
        Err(infeasible(format!("{bits} bits at zero rate")))
    }
}

/// Delay of user `i`'s task: its own compression, then the later of the
/// shared and private deliveries.
pub fn delay_user(
    private: &MessageLoad,
    shared: &MessageLoad,
    f_i: f64,
    s_0: f64,
    q_i: f64,
) -> Result<f64, EnergyError> {
    Ok(compute_time(private.comp_cycles, f_i)?
        + airtime(shared.comm_bits, s_0)?.max(airtime(private.comm_bits, q_i)?))
}

pub fn delay_shared(shared: &MessageLoad, f_0: f64, s_0: f64) -> Result<f64, EnergyError> {
    Ok(compute_time(shared.comp_cycles, f_0)? + airtime(shared.comm_bits, s_0)?)
}

pub fn computation_energy(cycles: f64, f: f64, xi: f64) -> f64 {
    xi * cycles * f * f
}

/// Transmit power times the airtime of the message's bits.
pub fn communication_energy(bits: f64, rate: f64, power: f64) -> Result<f64, EnergyError> {
    if bits == 0.0 || power == 0.0 {
        return Ok(0.0);
    }
    Ok(airtime(bits, rate)? * power)
}

/// Rates seen by the streams: `shared` is the common-stream rate, `private[k]`
/// user `k + 1`'s private rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRates {
    pub shared: f64,
    pub private: Vec<f64>,
}

impl StreamRates {
    pub fn stream(&self, j: usize) -> f64 {
        if j == 0 {
            self.shared
        } else {
            self.private[j - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub computation: Vec<f64>,
    pub communication: Vec<f64>,
    pub circuit: f64,
    /// Uncompressed task bits.
    pub task_bits: f64,
    pub ee: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.computation.iter().sum::<f64>() + self.communication.iter().sum::<f64>() + self.circuit
    }
}

/// Uncompressed size `4RE·(M + Σk')` of all messages.
pub fn task_bits(loads: &[MessageLoad], coding: &CodingParams) -> f64 {
    coding.triple_bits() as f64 * loads.iter().map(|l| l.triples).sum::<usize>() as f64
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), EnergyError> {
    if expected == got {
        Ok(())
    } else {
        Err(EnergyError::Shape {
            what,
            expected,
            got,
        })
    }
}

/// Energy efficiency in bits per joule. `loads`, `powers` and `computes` are
/// indexed by stream.
pub fn energy_efficiency(
    loads: &[MessageLoad],
    powers: &[f64],
    computes: &[f64],
    rates: &StreamRates,
    constants: &SystemConstants,
    coding: &CodingParams,
) -> Result<EnergyBreakdown, EnergyError> {
    let n = loads.len();
    check_len("powers", n, powers.len())?;
    check_len("computes", n, computes.len())?;
    check_len("rates", n, rates.private.len() + 1)?;
    let computation = loads
        .iter()
        .zip(computes)
        .map(|(l, &f)| computation_energy(l.comp_cycles, f, constants.xi))
        .collect();
    let communication = (0..n)
        .map(|j| communication_energy(loads[j].comm_bits, rates.stream(j), powers[j]))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = EnergyBreakdown {
        computation,
        communication,
        circuit: constants.circuit_energy,
        task_bits: task_bits(loads, coding),
        ee: 0.0,
    };
    out.ee = out.task_bits / out.total();
    Ok(out)
}
