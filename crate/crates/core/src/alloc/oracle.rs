use super::problem::Problem;
use super::solver::advance;
use super::{check_feasible, finalize, AllocError, Allocation, Scenario};

const MAX_USERS: usize = 2;
const MAX_COMBINATIONS: usize = 64;

/// All `dims`-vectors of multiples of `1/(levels − 1)` with sum at most 1.
fn compositions(dims: usize, levels: usize) -> Vec<Vec<f64>> {
    let top = levels - 1;
    let mut out = Vec::new();
    let mut cur = vec![0usize; dims];
    fn rec(j: usize, left: usize, top: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if j == cur.len() {
            out.push(cur.iter().map(|&a| a as f64 / top as f64).collect());
            return;
        }
        for a in 0..=left {
            cur[j] = a;
            rec(j + 1, left - a, top, cur, out);
        }
    }
    rec(0, top, top, &mut cur, &mut out);
    out
}

/// Exhaustive search over a power × compute grid with `points_per_axis`
/// levels per variable and every operating-point combination.
pub fn grid_oracle(scenario: &Scenario, points_per_axis: usize) -> Result<Allocation, AllocError> {
    scenario.constants().validate()?;
    if scenario.users() > MAX_USERS
        || scenario.combination_count() > MAX_COMBINATIONS
        || points_per_axis < 2
    {
        return Err(AllocError::OracleTooLarge {
            max_users: MAX_USERS,
            max_combinations: MAX_COMBINATIONS,
        });
    }
    let n = scenario.streams();
    let c = *scenario.constants();
    let grid = compositions(n, points_per_axis);
    let sizes: Vec<usize> = scenario.tables().iter().map(|t| t.len()).collect();

    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut combo = vec![0usize; n];
    let mut comm = vec![0.0; n];
    let mut comp = vec![0.0; n];
    loop {
        let accurate = scenario.accuracies(&combo)?.iter().all(|&a| a >= c.a_min);
        if accurate {
            let problem = Problem::new(scenario, &combo);
            // compute points by their energy, cheapest first
            let mut fs: Vec<(f64, &Vec<f64>)> = grid
                .iter()
                .map(|xf| {
                    comp.iter_mut().for_each(|d| *d = 0.0);
                    (problem.comp_part(xf, &mut comp), xf)
                })
                .collect();
            fs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let times: Vec<Vec<f64>> = fs
                .iter()
                .map(|(_, xf)| {
                    let mut t = vec![0.0; n];
                    problem.comp_part(xf, &mut t);
                    t
                })
                .collect();
            for xp in &grid {
                let e_cm = problem.comm_part(xp, &mut comm);
                if !e_cm.is_finite() || comm.iter().any(|d| *d > c.t_max) {
                    continue;
                }
                let hit = fs.iter().zip(&times).find(|(_, t)| {
                    t.iter().zip(&comm).all(|(a, b)| a + b <= c.t_max)
                });
                if let Some(((e_cp, xf), _)) = hit {
                    let ee = problem.task_bits() / (e_cm + e_cp + c.circuit_energy);
                    if best.as_ref().is_none_or(|b| ee > b.0) {
                        let mut x = xp.clone();
                        x.extend_from_slice(xf);
                        best = Some((ee, combo.clone(), x));
                    }
                }
            }
        }
        if !advance(&mut combo, &sizes) {
            break;
        }
    }

    let Some((_, combo, x)) = best else {
        return Err(check_feasible(scenario).infeasible_error());
    };
    let powers: Vec<f64> = x[..n].iter().map(|v| v * c.p_max).collect();
    let computes: Vec<f64> = x[n..].iter().map(|v| v * c.f_max).collect();
    finalize(scenario, &combo, &powers, &computes)?.ok_or_else(|| check_feasible(scenario).infeasible_error())
}
