use super::config::{ExperimentConfig, Policy};
use super::generate::ScenarioGenerator;
use super::HarnessError;
use crate::alloc::{AllocError, Allocation, OptimizerOptions, Solver};
use std::io::Write;

pub const CSV_HEADER: [&str; 12] = [
    "sweep_var",
    "sweep_value",
    "policy",
    "trial",
    "ee_bits_per_joule",
    "sum_power_w",
    "sum_compute",
    "omega_shared",
    "omega_private_mean",
    "tau_max_s",
    "accuracy_min",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub sweep_value: f64,
    pub policy: Policy,
    pub trial: usize,
    /// `None` when no feasible allocation exists for this policy.
    pub allocation: Option<Allocation>,
}

impl SweepRow {
    /// Infeasible trials count as zero efficiency.
    pub fn ee(&self) -> f64 {
        self.allocation.as_ref().map_or(0.0, |a| a.ee)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub values: Vec<f64>,
    /// Ordered by sweep point, then policy in configuration order, then trial.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn mean_ee(&self, point: usize, policy: &Policy) -> f64 {
        let ees: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.point == point && &r.policy == policy)
            .map(SweepRow::ee)
            .collect();
        ees.iter().sum::<f64>() / ees.len() as f64
    }

    pub fn all_infeasible(&self) -> bool {
        self.rows.iter().all(|r| r.allocation.is_none())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(err)?;
        let var = self.config.sweep.label();
        for r in &self.rows {
            let mut rec = vec![
                var.to_string(),
                r.sweep_value.to_string(),
                r.policy.to_string(),
                r.trial.to_string(),
            ];
            match &r.allocation {
                Some(a) => {
                    let privates = &a.omegas[1..];
                    let private_mean = if privates.is_empty() {
                        0.0
                    } else {
                        privates.iter().sum::<f64>() / privates.len() as f64
                    };
                    rec.extend([
                        a.ee.to_string(),
                        a.powers.iter().sum::<f64>().to_string(),
                        a.computes.iter().sum::<f64>().to_string(),
                        a.omegas[0].to_string(),
                        private_mean.to_string(),
                        a.tau_max().to_string(),
                        a.accuracy_min().to_string(),
                        "ok".to_string(),
                    ]);
                }
                None => {
                    rec.push("0".to_string());
                    rec.extend(std::iter::repeat_n(String::new(), 6));
                    rec.push("infeasible".to_string());
                }
            }
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| HarnessError::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn apply(solver: &mut Solver, policy: &Policy) -> Result<Option<Allocation>, HarnessError> {
    let out = match policy {
        Policy::Proposed => solver.optimize(),
        Policy::OmegaZero => solver.optimize_uncompressed(),
        Policy::OmegaFixed(v) => solver.optimize_nearest(*v),
    };
    match out {
        Ok(a) => Ok(Some(a)),
        Err(AllocError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn options_for(config: &ExperimentConfig) -> OptimizerOptions {
    OptimizerOptions {
        combination_cap: config.combination_cap,
        ..OptimizerOptions::default()
    }
}

/// Every sweep point × policy × trial. Each trial's scenario is drawn once
/// and moved along the sweep; at every point the policies share one solver
/// so they see identical inner solutions.
pub fn run_sweep_with(generator: &ScenarioGenerator) -> Result<SweepResult, HarnessError> {
    let config = generator.config().clone();
    let values = config.sweep_values();
    let options = options_for(&config);
    let mut cells: Vec<Vec<Vec<Option<SweepRow>>>> =
        vec![vec![vec![None; config.trials]; config.policies.len()]; values.len()];
    for trial in 0..config.trials {
        let base = generator.scenario(trial)?;
        for (point, &value) in values.iter().enumerate() {
            let scenario = generator.at_sweep_value(&base, value)?;
            let mut solver = Solver::new(&scenario, options)?;
            for (pi, policy) in config.policies.iter().enumerate() {
                cells[point][pi][trial] = Some(SweepRow {
                    point,
                    sweep_value: value,
                    policy: *policy,
                    trial,
                    allocation: apply(&mut solver, policy)?,
                });
            }
        }
    }
    let rows = cells.into_iter().flatten().flatten().flatten().collect();
    Ok(SweepResult {
        config,
        values,
        rows,
    })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    run_sweep_with(&ScenarioGenerator::new(config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            users: 2,
            trials: 2,
            sweep_points: 3,
            message_size: 6,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let r = run_sweep(&tiny()).unwrap();
        assert_eq!(r.rows.len(), 3 * 3 * 2);
        let keys: Vec<(usize, usize)> = r.rows.iter().map(|x| (x.point, x.trial)).collect();
        assert_eq!(keys[0], (0, 0));
        assert_eq!(keys[1], (0, 1));
        assert_eq!(r.rows[2].policy, Policy::OmegaZero);
        let text = r.to_csv_string();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(text.lines().count(), 19);
    }

    #[test]
    fn proposed_dominates_per_trial() {
        let r = run_sweep(&tiny()).unwrap();
        for chunk in r.rows.chunks(2 * 3) {
            for t in 0..2 {
                let ee = |pi: usize| chunk[pi * 2 + t].ee();
                assert!(ee(0) >= ee(1) && ee(0) >= ee(2));
            }
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let c = ExperimentConfig { trials: 1, ..tiny() };
        assert_eq!(run_sweep(&c).unwrap().to_csv_string(), run_sweep(&c).unwrap().to_csv_string());
    }

    #[test]
    fn infeasible_rows_are_kept() {
        let c = ExperimentConfig {
            t_max_s: 1e-9,
            trials: 1,
            sweep_points: 1,
            ..tiny()
        };
        let r = run_sweep(&c).unwrap();
        assert!(r.all_infeasible());
        assert_eq!(r.rows.len(), 3);
        let text = r.to_csv_string();
        assert!(text.lines().skip(1).all(|l| l.ends_with(",infeasible") && l.contains(",0,")));
        assert_eq!(r.mean_ee(0, &Policy::Proposed), 0.0);
    }
}
