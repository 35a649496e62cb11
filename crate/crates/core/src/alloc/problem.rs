//! Continuous power/compute subproblem for one fixed choice of operating
//! points. Variables are normalised: `x[j] = p_j / P_max` and
//! `x[n + j] = f_j / F_max` for the `n = K + 1` streams, so both blocks live
//! in the simplex `{x ≥ 0, Σx ≤ 1}`.

use super::Scenario;
use crate::energy::{task_bits, MessageLoad};
use crate::phy::log2_1p;

#[derive(Debug, Clone)]
pub struct Problem<'a> {
    scenario: &'a Scenario,
    combo: Vec<usize>,
    loads: Vec<MessageLoad>,
    /// `g[k][j]·P_max/σ²`, so SINRs come straight from normalised powers.
    snr: Vec<Vec<f64>>,
    bandwidth: f64,
    task_bits: f64,
}

/// Everything a point of the subproblem implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Shared-stream rate decodable at each user.
    pub shared_at_user: Vec<f64>,
    pub shared_rate: f64,
    pub private_rates: Vec<f64>,
    /// Per stream: shared message first.
    pub delays: Vec<f64>,
    pub computation: Vec<f64>,
    pub communication: Vec<f64>,
    pub ee: f64,
}

impl Evaluation {
    /// Smallest relative gap at a `min` or `max` switch point of the rate and
    /// delay expressions. Small values mean a kink is nearby.
    pub fn tie_gap(&self, loads: &[MessageLoad]) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        let mut gap = f64::INFINITY;
        if loads[0].comm_bits > 0.0 {
            let mut s = self.shared_at_user.clone();
            s.sort_by(f64::total_cmp);
            if s.len() > 1 {
                gap = gap.min(rel(s[0], s[1]));
            }
            for (k, q) in self.private_rates.iter().enumerate() {
                let bits = loads[k + 1].comm_bits;
                if bits > 0.0 {
                    gap = gap.min(rel(loads[0].comm_bits / self.shared_rate, bits / q));
                }
            }
        }
        gap
    }
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario, combo: &[usize]) -> Self {
        let loads: Vec<MessageLoad> = scenario
            .tables()
            .iter()
            .zip(combo)
            .map(|(t, &i)| t.load(i))
            .collect();
        let c = scenario.constants();
        let noise = scenario.channels().noise_power();
        let gains = scenario.gains();
        let n = loads.len();
        let snr = (0..gains.users())
            .map(|k| (0..n).map(|j| gains.gain(k, j) * c.p_max / noise).collect())
            .collect();
        Self {
            scenario,
            combo: combo.to_vec(),
            task_bits: task_bits(&loads, scenario.coding()),
            loads,
            snr,
            bandwidth: scenario.channels().bandwidth(),
        }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn combo(&self) -> &[usize] {
        &self.combo
    }

    pub fn loads(&self) -> &[MessageLoad] {
        &self.loads
    }

    pub fn streams(&self) -> usize {
        self.loads.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.loads.len()
    }

    pub fn task_bits(&self) -> f64 {
        self.task_bits
    }

    /// Equal split of power and compute over all streams.
    pub fn start(&self) -> Vec<f64> {
        vec![1.0 / self.streams() as f64; self.dim()]
    }

    fn shared_at(&self, k: usize, xp: &[f64]) -> f64 {
        let g = &self.snr[k];
        let interference: f64 = (1..g.len()).map(|j| xp[j] * g[j]).sum();
        self.bandwidth * log2_1p(xp[0] * g[0] / (interference + 1.0))
    }

    fn private_at(&self, k: usize, xp: &[f64]) -> f64 {
        let g = &self.snr[k];
        let own = k + 1;
        let interference: f64 = (1..g.len())
            .filter(|&j| j != own)
            .map(|j| xp[j] * g[j])
            .sum();
        self.bandwidth * log2_1p(xp[own] * g[own] / (interference + 1.0))
    }

    fn shared_rate(&self, xp: &[f64]) -> f64 {
        (0..self.snr.len())
            .map(|k| self.shared_at(k, xp))
            .fold(f64::INFINITY, f64::min)
    }

    /// Airtime, infinite when bits must cross a dead link.
    fn airtime(bits: f64, rate: f64) -> f64 {
        if bits == 0.0 {
            0.0
        } else if rate > 0.0 {
            bits / rate
        } else {
            f64::INFINITY
        }
    }

    fn compute_time(cycles: f64, f: f64) -> f64 {
        if cycles == 0.0 {
            0.0
        } else if f > 0.0 {
            cycles / f
        } else {
            f64::INFINITY
        }
    }

    /// Communication side of a power vector: delay terms per stream (the
    /// shared airtime for stream 0, `max(shared, private)` airtime for users)
    /// and the summed transmit energy.
    pub(crate) fn comm_part(&self, xp: &[f64], delays: &mut [f64]) -> f64 {
        let p_max = self.scenario.constants().p_max;
        let s0 = self.shared_rate(xp);
        let shared_air = Self::airtime(self.loads[0].comm_bits, s0);
        let mut energy = if self.loads[0].comm_bits > 0.0 && xp[0] > 0.0 {
            shared_air * xp[0] * p_max
        } else {
            0.0
        };
        delays[0] = shared_air;
        for k in 0..self.snr.len() {
            let bits = self.loads[k + 1].comm_bits;
            let air = if bits > 0.0 {
                let t = Self::airtime(bits, self.private_at(k, xp));
                if xp[k + 1] > 0.0 {
                    energy += t * xp[k + 1] * p_max;
                }
                t
            } else {
                0.0
            };
            delays[k + 1] = shared_air.max(air);
        }
        energy
    }

    /// Computation side of a compute vector: adds each stream's compute time
    /// to `delays` and returns the summed computation energy.
    pub(crate) fn comp_part(&self, xf: &[f64], delays: &mut [f64]) -> f64 {
        let c = self.scenario.constants();
        let mut energy = 0.0;
        for (j, l) in self.loads.iter().enumerate() {
            let f = xf[j] * c.f_max;
            delays[j] += Self::compute_time(l.comp_cycles, f);
            energy += c.xi * l.comp_cycles * f * f;
        }
        energy
    }

    /// `(energy without E_0, Σ max(0, τ/T − 1)², max τ/T)`.
    fn core(&self, x: &[f64]) -> (f64, f64, f64) {
        let n = self.streams();
        let mut delays = [0.0f64; 16];
        let mut heap;
        let delays: &mut [f64] = if n <= 16 {
            &mut delays[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        let e = self.comm_part(&x[..n], delays) + self.comp_part(&x[n..], delays);
        let t_max = self.scenario.constants().t_max;
        let mut penalty = 0.0;
        let mut worst: f64 = 0.0;
        for &d in delays.iter() {
            let r = if d.is_infinite() { d } else { d / t_max };
            worst = worst.max(r);
            if r > 1.0 {
                penalty += (r - 1.0) * (r - 1.0);
            }
        }
        (e, penalty, worst)
    }

    pub fn ee(&self, x: &[f64]) -> f64 {
        let (e, _, _) = self.core(x);
        self.task_bits / (e + self.scenario.constants().circuit_energy)
    }

    /// Scaled objective `E_0 / (E + E_0)` minus the delay penalty.
    pub fn merit(&self, x: &[f64], mu: f64) -> f64 {
        let (e, penalty, _) = self.core(x);
        let e0 = self.scenario.constants().circuit_energy;
        let m = e0 / (e + e0) - mu * penalty;
        if m.is_nan() {
            f64::NEG_INFINITY
        } else {
            m
        }
    }

    /// Every delay within the deadline.
    pub fn delay_feasible(&self, x: &[f64]) -> bool {
        self.core(x).2 <= 1.0
    }

    pub fn evaluate(&self, x: &[f64]) -> Evaluation {
        let n = self.streams();
        let c = self.scenario.constants();
        let (xp, xf) = x.split_at(n);
        let shared_at_user: Vec<f64> = (0..self.snr.len()).map(|k| self.shared_at(k, xp)).collect();
        let shared_rate = shared_at_user.iter().copied().fold(f64::INFINITY, f64::min);
        let private_rates: Vec<f64> = (0..self.snr.len()).map(|k| self.private_at(k, xp)).collect();
        let mut delays = vec![0.0; n];
        self.comm_part(xp, &mut delays);
        self.comp_part(xf, &mut delays);
        let rate = |j: usize| if j == 0 { shared_rate } else { private_rates[j - 1] };
        let communication = (0..n)
            .map(|j| {
                let bits = self.loads[j].comm_bits;
                if bits == 0.0 || xp[j] == 0.0 {
                    0.0
                } else {
                    Self::airtime(bits, rate(j)) * xp[j] * c.p_max
                }
            })
            .collect::<Vec<_>>();
        let computation = (0..n)
            .map(|j| {
                let f = xf[j] * c.f_max;
                c.xi * self.loads[j].comp_cycles * f * f
            })
            .collect::<Vec<_>>();
        let total: f64 = communication.iter().sum::<f64>() + computation.iter().sum::<f64>();
        Evaluation {
            shared_at_user,
            shared_rate,
            private_rates,
            delays,
            computation,
            communication,
            ee: self.task_bits / (total + c.circuit_energy),
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx ≤ 1}`, in place.
pub fn project_simplex(x: &mut [f64]) {
    for v in x.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let sum: f64 = x.iter().sum();
    if sum <= 1.0 {
        return;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
    let sum: f64 = x.iter().sum();
    if sum > 1.0 {
        for v in x.iter_mut() {
            *v /= sum;
        }
    }
}

/// Finite-difference gradient of `f`: central differences, forward where a
/// central probe would leave the non-negative orthant.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64, out: &mut [f64]) {
    let mut probe = x.to_vec();
    let mut f0 = None;
    for j in 0..x.len() {
        let orig = x[j];
        if orig >= step {
            probe[j] = orig + step;
            let up = f(&probe);
            probe[j] = orig - step;
            let down = f(&probe);
            out[j] = (up - down) / (2.0 * step);
        } else {
            let base = *f0.get_or_insert_with(|| f(x));
            probe[j] = orig + step;
            out[j] = (f(&probe) - base) / step;
        }
        probe[j] = orig;
    }
}

/// Finite-difference gradient of EE (bits per joule) in normalised
/// coordinates.
pub fn ee_gradient(problem: &Problem, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    fd_gradient(|y| problem.ee(y), x, step, &mut g);
    g
}
