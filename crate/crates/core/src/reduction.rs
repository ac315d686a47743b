//! Strategy extraction, the reduced LP, and the infeasibility / suboptimality /
//! reward scores.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_program, tight_set, LinearProgram, LpStatus, LpView, SimplexOptions, EPS_TIGHT};
use crate::model::{MilpInstance, RowSense, Solution, SolveStatus, Strategy};

/// Added inside the log so a perfect strategy has a finite reward.
pub const EPS_R: f64 = 1e-12;
/// Reward floor, also assigned when no reduced solution exists.
pub const R_MIN: f64 = -20.0;
/// Floor on `||b||_inf` in the infeasibility denominator.
pub const EPS_B: f64 = 1e-10;
/// Floor on `|f*|` in the suboptimality denominator.
pub const EPS_DEN: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedStatus {
    Optimal,
    Infeasible,
    Elastic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(with = "crate::model::extended_f64")]
    pub p: f64,
    #[serde(with = "crate::model::extended_f64")]
    pub d: f64,
    pub r: f64,
    pub reduced_status: ReducedStatus,
    pub solve_time_s: f64,
    pub iterations: usize,
}

impl EvalRecord {
    fn infeasible(solve_time_s: f64, iterations: usize) -> Self {
        Self { p: f64::INFINITY, d: f64::INFINITY, r: R_MIN, reduced_status: ReducedStatus::Infeasible, solve_time_s, iterations }
    }

    pub fn within(&self, eps_p: f64, eps_d: f64) -> bool {
        self.reduced_status != ReducedStatus::Infeasible && self.p <= eps_p && self.d <= eps_d
    }
}

pub fn extract_strategy(inst: &MilpInstance, sol: &Solution) -> Result<Strategy> {
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(sol.status));
    }
    if sol.x.len() != inst.n() {
        return Err(Error::InvalidArgument(format!("solution has {} entries, instance has {}", sol.x.len(), inst.n())));
    }
    let tight = tight_set(inst, &sol.x, EPS_TIGHT);
    let values = inst.integers.iter().map(|&j| sol.x[j].round() as i64).collect();
    Ok(Strategy::new(tight, values))
}

/// `||(Ax - b)_+||_inf / max(||b||_inf, EPS_B)`, with `Eq` rows contributing `|Ax - b|`.
pub fn infeasibility(inst: &MilpInstance, xhat: &[f64]) -> f64 {
    let act = inst.row_activity(xhat);
    let mut worst = 0.0f64;
    for i in 0..inst.m() {
        let g = act[i] - inst.b[i];
        let v = match inst.row_sense[i] {
            RowSense::Le => g.max(0.0),
            RowSense::Eq => g.abs(),
        };
        worst = worst.max(v);
    }
    let bnorm = inst.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    worst / bnorm.max(EPS_B)
}

pub fn suboptimality(f_hat: f64, f_star: f64) -> f64 {
    (f_hat - f_star).abs() / f_star.abs().max(EPS_DEN)
}

pub fn reward(p: f64, d: f64) -> f64 {
    (-(p + d + EPS_R).ln()).max(R_MIN)
}

fn check_strategy(inst: &MilpInstance, s: &Strategy) -> Result<()> {
    if let Some(&i) = s.tight_set.iter().find(|&&i| i >= inst.m()) {
        return Err(Error::InvalidStrategy(format!("tight row {i} out of range for {} rows", inst.m())));
    }
    if s.integer_values.len() != inst.d() {
        return Err(Error::InvalidStrategy(format!("{} integer values for {} integer variables", s.integer_values.len(), inst.d())));
    }
    Ok(())
}

/// Solves the reduced LP (tight rows only, integers fixed) and scores the
/// result against every row of `inst` and the known optimum `f_star`.
pub fn apply_strategy(inst: &MilpInstance, s: &Strategy, f_star: f64) -> Result<(Solution, EvalRecord)> {
    check_strategy(inst, s)?;
    let start = Instant::now();
    let mut fixed = vec![None; inst.n()];
    for (&j, &v) in inst.integers.iter().zip(&s.integer_values) {
        fixed[j] = Some(v as f64);
    }

    let mut iterations = 0;
    let mut status = ReducedStatus::Optimal;
    let mut xhat = None;
    if let Ok(view) = LpView::build(inst, Some(&s.tight_set), &fixed, None) {
        let sol = solve_program(&view.lp, &SimplexOptions::default());
        iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => xhat = Some(view.expand(&sol.x)),
            // No finite reduced optimum to score.
            LpStatus::Unbounded => {
                return Ok((Solution::without_point(SolveStatus::Unbounded), EvalRecord::infeasible(start.elapsed().as_secs_f64(), iterations)));
            }
            _ => {}
        }
    }
    if xhat.is_none() {
        status = ReducedStatus::Elastic;
        let (x, iters) = solve_elastic(inst, &s.tight_set, &fixed);
        iterations += iters;
        xhat = x;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let Some(x) = xhat else {
        return Ok((Solution::without_point(SolveStatus::Infeasible), EvalRecord::infeasible(elapsed, iterations)));
    };
    let objective = inst.objective(&x);
    let p = infeasibility(inst, &x);
    let d = suboptimality(objective, f_star);
    let record = EvalRecord { p, d, r: reward(p, d), reduced_status: status, solve_time_s: elapsed, iterations };
    Ok((Solution { x, objective, status: SolveStatus::Optimal }, record))
}

/// Minimizes the largest violation `t` over the given rows, then the objective
/// with `t` held at its minimum.
fn solve_elastic(inst: &MilpInstance, rows: &[usize], fixed: &[Option<f64>]) -> (Option<Vec<f64>>, usize) {
    let n = inst.n();
    let mut col_of = vec![usize::MAX; n];
    let mut lp = LinearProgram::default();
    for j in 0..n {
        if fixed[j].is_none() {
            col_of[j] = lp.cost.len();
            lp.cost.push(0.0);
            lp.lower.push(inst.bounds[j].lo);
            lp.upper.push(inst.bounds[j].hi);
        }
    }
    let t = lp.cost.len();
    lp.cost.push(1.0);
    lp.lower.push(0.0);
    lp.upper.push(f64::INFINITY);
    for &i in rows {
        let mut rhs = inst.b[i];
        let mut coeffs = Vec::new();
        for (j, &a) in inst.a.row(i).iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match fixed[j] {
                Some(v) => rhs -= a * v,
                None => coeffs.push((col_of[j], a)),
            }
        }
        let mut up = coeffs.clone();
        up.push((t, -1.0));
        lp.push_row(up, RowSense::Le, rhs);
        if inst.row_sense[i] == RowSense::Eq {
            let mut down: Vec<(usize, f64)> = coeffs.iter().map(|&(c, a)| (c, -a)).collect();
            down.push((t, -1.0));
            lp.push_row(down, RowSense::Le, -rhs);
        }
    }
    let opts = SimplexOptions::default();
    let first = solve_program(&lp, &opts);
    let mut iterations = first.iterations;
    if first.status != LpStatus::Optimal {
        return (None, iterations);
    }
    let expand = |cols: &[f64]| -> Vec<f64> {
        (0..n).map(|j| fixed[j].unwrap_or_else(|| cols[col_of[j]])).collect()
    };
    let t_star = first.x[t];
    lp.upper[t] = t_star + 1e-9 * (1.0 + t_star);
    lp.cost[t] = 0.0;
    for j in 0..n {
        if col_of[j] != usize::MAX {
            lp.cost[col_of[j]] = inst.c[j];
        }
    }
    let second = solve_program(&lp, &opts);
    iterations += second.iterations;
    let cols = if second.status == LpStatus::Optimal { &second.x } else { &first.x };
    (Some(expand(cols)), iterations)
}
