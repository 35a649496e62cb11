use super::problem::{fd_gradient, project_simplex, Problem};
use super::{check_feasible, finalize, AllocError, Allocation, Scenario};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Above this many combinations the outer search switches from full
    /// enumeration to coordinate descent.
    pub combination_cap: usize,
    /// Iteration cap per penalty round.
    pub max_iterations: usize,
    pub penalty_rounds: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub fd_step: f64,
    /// Relative merit improvement counted as a stall.
    pub tolerance: f64,
    /// Consecutive stalls that end a penalty round.
    pub patience: usize,
    pub backtrack: f64,
    pub max_halvings: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            combination_cap: 4096,
            max_iterations: 2000,
            penalty_rounds: 5,
            initial_penalty: 1.0,
            penalty_growth: 10.0,
            fd_step: 1e-6,
            tolerance: 1e-6,
            patience: 5,
            backtrack: 0.5,
            max_halvings: 30,
        }
    }
}

/// Outcome of the inner ascent for one combination.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct InnerResult {
    pub x: Vec<f64>,
    pub ee: f64,
    /// Merit after every accepted step, per penalty round.
    pub trace: Vec<Vec<f64>>,
}

/// Last accepted point at which all delays hold, and its EE.
fn keep_best(problem: &Problem, x: &[f64], best: &mut Option<(Vec<f64>, f64)>) {
    if problem.delay_feasible(x) {
        let ee = problem.ee(x);
        if best.as_ref().is_none_or(|(_, b)| ee > *b) {
            *best = Some((x.to_vec(), ee));
        }
    }
}

/// Projected-gradient ascent of the penalised merit, block-wise projection
/// onto the power and compute simplices.
pub(crate) fn ascend(problem: &Problem, opts: &OptimizerOptions) -> Option<InnerResult> {
    let n = problem.streams();
    let mut x = problem.start();
    let mut best = None;
    keep_best(problem, &x, &mut best);
    let mut grad = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    let mut alpha: f64 = 1.0;
    let mut mu = opts.initial_penalty;
    let mut trace = Vec::with_capacity(opts.penalty_rounds);

    for _ in 0..opts.penalty_rounds {
        let mut m = problem.merit(&x, mu);
        let mut accepted = vec![m];
        let mut stalls = 0;
        for _ in 0..opts.max_iterations {
            fd_gradient(|z| problem.merit(z, mu), &x, opts.fd_step, &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                break;
            }
            let mut step = 2.0 * alpha;
            let mut next = None;
            for _ in 0..=opts.max_halvings {
                for ((yi, xi), gi) in y.iter_mut().zip(&x).zip(&grad) {
                    *yi = xi + step * gi;
                }
                project_simplex(&mut y[..n]);
                project_simplex(&mut y[n..]);
                let my = problem.merit(&y, mu);
                if my > m {
                    next = Some(my);
                    break;
                }
                step *= opts.backtrack;
            }
            let Some(my) = next else { break };
            alpha = step;
            let gain = (my - m) / m.abs().max(f64::MIN_POSITIVE);
            std::mem::swap(&mut x, &mut y);
            m = my;
            accepted.push(m);
            keep_best(problem, &x, &mut best);
            if gain < opts.tolerance {
                stalls += 1;
                if stalls >= opts.patience {
                    break;
                }
            } else {
                stalls = 0;
            }
        }
        trace.push(accepted);
        mu *= opts.penalty_growth;
    }

    let (mut bx, mut bee) = best?;
    if !problem.delay_feasible(&x) {
        // walk from the best feasible point toward the final iterate
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut z = vec![0.0; x.len()];
        for _ in 0..60 {
            let t = 0.5 * (lo + hi);
            for ((zi, a), b) in z.iter_mut().zip(&bx).zip(&x) {
                *zi = a + t * (b - a);
            }
            if problem.delay_feasible(&z) {
                lo = t;
            } else {
                hi = t;
            }
        }
        for ((zi, a), b) in z.iter_mut().zip(&bx).zip(&x) {
            *zi = a + lo * (b - a);
        }
        let ee = problem.ee(&z);
        if problem.delay_feasible(&z) && ee > bee {
            bx = z;
            bee = ee;
        }
    }
    Some(InnerResult {
        x: bx,
        ee: bee,
        trace,
    })
}

/// Solves combinations on demand and remembers the results, so every policy
/// evaluated on one scenario sees identical inner solutions.
#[derive(Debug)]
pub struct Solver<'a> {
    scenario: &'a Scenario,
    options: OptimizerOptions,
    cache: HashMap<Vec<usize>, Option<Allocation>>,
}

impl<'a> Solver<'a> {
    pub fn new(scenario: &'a Scenario, options: OptimizerOptions) -> Result<Self, AllocError> {
        scenario.constants().validate()?;
        Ok(Self {
            scenario,
            options,
            cache: HashMap::new(),
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    /// Combinations solved so far.
    pub fn solved(&self) -> usize {
        self.cache.len()
    }

    fn solve_uncached(&self, combo: &[usize]) -> Result<Option<Allocation>, AllocError> {
        let s = self.scenario;
        let a_min = s.constants().a_min;
        if s.accuracies(combo)?.iter().any(|&a| a < a_min) {
            return Ok(None);
        }
        let problem = Problem::new(s, combo);
        let Some(inner) = ascend(&problem, &self.options) else {
            return Ok(None);
        };
        let n = s.streams();
        let c = s.constants();
        let powers: Vec<f64> = inner.x[..n].iter().map(|v| v * c.p_max).collect();
        let computes: Vec<f64> = inner.x[n..].iter().map(|v| v * c.f_max).collect();
        finalize(s, combo, &powers, &computes)
    }

    /// Best allocation found for one combination, `None` when the inner
    /// search finds no feasible point.
    pub fn solve(&mut self, combo: &[usize]) -> Result<Option<Allocation>, AllocError> {
        if let Some(hit) = self.cache.get(combo) {
            return Ok(hit.clone());
        }
        let out = self.solve_uncached(combo)?;
        self.cache.insert(combo.to_vec(), out.clone());
        Ok(out)
    }

    fn infeasible(&self) -> AllocError {
        check_feasible(self.scenario).infeasible_error()
    }

    /// Searches all operating-point combinations.
    pub fn optimize(&mut self) -> Result<Allocation, AllocError> {
        let sizes: Vec<usize> = self.scenario.tables().iter().map(|t| t.len()).collect();
        let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        let mut best: Option<Allocation> = None;
        let consider = |a: Option<Allocation>, best: &mut Option<Allocation>| {
            if let Some(a) = a {
                if best.as_ref().is_none_or(|b| a.ee > b.ee) {
                    *best = Some(a);
                }
            }
        };
        match total {
            Some(t) if t <= self.options.combination_cap => {
                let mut combo = vec![0; sizes.len()];
                loop {
                    let a = self.solve(&combo)?;
                    consider(a, &mut best);
                    if !advance(&mut combo, &sizes) {
                        break;
                    }
                }
            }
            _ => {
                // coordinate descent on one message's round count at a time
                let mut combo = vec![0; sizes.len()];
                let a = self.solve(&combo)?;
                consider(a, &mut best);
                loop {
                    let mut moved = false;
                    for j in 0..sizes.len() {
                        for i in 0..sizes[j] {
                            let mut c = combo.clone();
                            c[j] = i;
                            let a = self.solve(&c)?;
                            let better = match (&a, &best) {
                                (Some(a), Some(b)) => a.ee > b.ee,
                                (Some(_), None) => true,
                                _ => false,
                            };
                            if better {
                                best = a;
                                combo = c;
                                moved = true;
                            }
                        }
                    }
                    if !moved {
                        break;
                    }
                }
            }
        }
        best.ok_or_else(|| self.infeasible())
    }

    pub fn optimize_fixed(&mut self, combo: &[usize]) -> Result<Allocation, AllocError> {
        self.solve(combo)?.ok_or_else(|| self.infeasible())
    }

    /// Every message uncompressed.
    pub fn optimize_uncompressed(&mut self) -> Result<Allocation, AllocError> {
        self.optimize_fixed(&vec![0; self.scenario.streams()])
    }

    /// Every message at the operating point whose ratio is nearest `target`.
    pub fn optimize_nearest(&mut self, target: f64) -> Result<Allocation, AllocError> {
        let combo: Vec<usize> = self.scenario.tables().iter().map(|t| t.nearest(target)).collect();
        self.optimize_fixed(&combo)
    }
}

/// Mixed-radix increment; false once every combination has been visited.
pub(crate) fn advance(combo: &mut [usize], sizes: &[usize]) -> bool {
    for j in (0..combo.len()).rev() {
        combo[j] += 1;
        if combo[j] < sizes[j] {
            return true;
        }
        combo[j] = 0;
    }
    false
}

pub fn optimize(scenario: &Scenario, options: &OptimizerOptions) -> Result<Allocation, AllocError> {
    Solver::new(scenario, *options)?.optimize()
}
