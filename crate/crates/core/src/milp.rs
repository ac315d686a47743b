//! Exact MILP solving: best-bound branch-and-bound and an exhaustive
//! enumeration oracle for small instances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_program, LpStatus, LpView, SimplexOptions};
use crate::model::{Bound, MilpInstance, RowSense, Solution, SolveStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnbConfig {
    pub integrality_tol: f64,
    pub abs_gap: f64,
    pub node_limit: usize,
    pub time_limit_s: f64,
    /// Keep `(parent bound, node relaxation)` pairs in the stats.
    pub record_bounds: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self { integrality_tol: 1e-6, abs_gap: 1e-9, node_limit: 1_000_000, time_limit_s: 300.0, record_bounds: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BnbStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub root_bound: f64,
    pub lp_failures: usize,
    pub bound_log: Vec<(f64, f64)>,
}

/// Variable bounds tightened by every single-variable row; integer bounds rounded inward.
pub fn implied_bounds(inst: &MilpInstance, integrality_tol: f64) -> Vec<Bound> {
    let mut bounds = inst.bounds.clone();
    for i in 0..inst.m() {
        let row = inst.a.row(i);
        let mut nz = row.iter().enumerate().filter(|(_, a)| **a != 0.0);
        let (Some((j, &a)), None) = (nz.next(), nz.next()) else {
            continue;
        };
        let v = inst.b[i] / a;
        if inst.row_sense[i] == RowSense::Eq || a > 0.0 {
            bounds[j].hi = bounds[j].hi.min(v);
        }
        if inst.row_sense[i] == RowSense::Eq || a < 0.0 {
            bounds[j].lo = bounds[j].lo.max(v);
        }
    }
    for &j in &inst.integers {
        let bd = &mut bounds[j];
        if bd.lo.is_finite() {
            bd.lo = (bd.lo - integrality_tol).ceil();
        }
        if bd.hi.is_finite() {
            bd.hi = (bd.hi + integrality_tol).floor();
        }
    }
    bounds
}

/// Optimal continuous completion of a fixed integer assignment, over all rows.
pub(crate) fn complete_assignment(inst: &MilpInstance, values: &[i64]) -> Option<(Vec<f64>, f64, usize)> {
    let mut fixed = vec![None; inst.n()];
    for (&j, &v) in inst.integers.iter().zip(values) {
        fixed[j] = Some(v as f64);
    }
    let view = LpView::build(inst, None, &fixed, None).ok()?;
    let sol = solve_program(&view.lp, &SimplexOptions::default());
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let x = view.expand(&sol.x);
    let obj = inst.objective(&x);
    Some((x, obj, sol.iterations))
}

struct Node {
    bound: f64,
    seq: u64,
    bounds: Vec<Bound>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound, then the oldest node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_milp(inst: &MilpInstance, cfg: &BnbConfig) -> Solution {
    solve_milp_with_stats(inst, cfg).0
}

pub fn solve_milp_with_stats(inst: &MilpInstance, cfg: &BnbConfig) -> (Solution, BnbStats) {
    let start = Instant::now();
    let mut stats = BnbStats { root_bound: f64::NAN, ..Default::default() };
    let no_fix = vec![None; inst.n()];
    let root_bounds = implied_bounds(inst, cfg.integrality_tol);
    if root_bounds.iter().any(|b| b.lo > b.hi) {
        return (Solution::without_point(SolveStatus::Infeasible), stats);
    }

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, bounds: root_bounds });
    let mut limited = false;

    while let Some(node) = heap.pop() {
        if let Some((_, best)) = &incumbent {
            if node.bound >= best - cfg.abs_gap {
                continue;
            }
        }
        if stats.nodes >= cfg.node_limit || start.elapsed().as_secs_f64() >= cfg.time_limit_s {
            limited = true;
            break;
        }
        stats.nodes += 1;
        let is_root = stats.nodes == 1;

        let Ok(view) = LpView::build(inst, None, &no_fix, Some(&node.bounds)) else {
            if is_root {
                return (Solution::without_point(SolveStatus::Infeasible), stats);
            }
            continue;
        };
        let sol = solve_program(&view.lp, &SimplexOptions::default());
        stats.lp_iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible if is_root => return (Solution::without_point(SolveStatus::Infeasible), stats),
            LpStatus::Unbounded if is_root => return (Solution::without_point(SolveStatus::Unbounded), stats),
            LpStatus::Infeasible | LpStatus::Unbounded => continue,
            LpStatus::IterationLimit | LpStatus::NumericalFailure => {
                stats.lp_failures += 1;
                if is_root {
                    return (Solution::without_point(SolveStatus::Limit), stats);
                }
                continue;
            }
        }
        let x = view.expand(&sol.x);
        let obj = sol.objective;
        if is_root {
            stats.root_bound = obj;
        }
        if cfg.record_bounds {
            stats.bound_log.push((node.bound, obj));
        }
        if let Some((_, best)) = &incumbent {
            if obj >= best - cfg.abs_gap {
                continue;
            }
        }

        // Most fractional integer variable, lowest index on ties.
        let mut branch: Option<(usize, f64)> = None;
        for &j in &inst.integers {
            let frac = (x[j] - x[j].round()).abs();
            if frac > cfg.integrality_tol && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }

        match branch {
            None => {
                let values: Vec<i64> = inst.integers.iter().map(|&j| x[j].round() as i64).collect();
                if let Some((xp, objp, iters)) = complete_assignment(inst, &values) {
                    stats.lp_iterations += iters;
                    if incumbent.as_ref().is_none_or(|(_, best)| objp < best - cfg.abs_gap) {
                        incumbent = Some((xp, objp));
                    }
                } else {
                    stats.lp_failures += 1;
                }
            }
            Some((j, _)) => {
                let v = x[j];
                let mut down = node.bounds.clone();
                down[j].hi = v.floor();
                let mut up = node.bounds;
                up[j].lo = v.ceil();
                for bounds in [down, up] {
                    seq += 1;
                    heap.push(Node { bound: obj, seq, bounds });
                }
            }
        }
    }

    let status = match (&incumbent, limited || stats.lp_failures > 0) {
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
        (_, true) => SolveStatus::Limit,
    };
    let sol = match incumbent {
        Some((x, objective)) => Solution { x, objective, status },
        None => Solution::without_point(status),
    };
    (sol, stats)
}

const MAX_ENUM_VARS: usize = 10;
const MAX_ENUM_RANGE: f64 = 4.0;

/// Enumerates every integer assignment and solves the continuous LP for each.
pub fn solve_milp_exhaustive(inst: &MilpInstance) -> Result<Solution> {
    let d = inst.d();
    if d > MAX_ENUM_VARS {
        return Err(Error::EnumerationBudget(format!("{d} integer variables (max {MAX_ENUM_VARS})")));
    }
    let bounds = implied_bounds(inst, 1e-6);
    let mut ranges = Vec::with_capacity(d);
    for &j in &inst.integers {
        let bd = bounds[j];
        if !bd.lo.is_finite() || !bd.hi.is_finite() || bd.hi - bd.lo > MAX_ENUM_RANGE {
            return Err(Error::EnumerationBudget(format!("variable {j} has range [{}, {}]", bd.lo, bd.hi)));
        }
        if bd.lo > bd.hi {
            return Ok(Solution::without_point(SolveStatus::Infeasible));
        }
        ranges.push((bd.lo as i64, bd.hi as i64));
    }

    let mut values: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut unbounded = false;
    loop {
        let mut fixed = vec![None; inst.n()];
        for (&j, &v) in inst.integers.iter().zip(&values) {
            fixed[j] = Some(v as f64);
        }
        if let Ok(view) = LpView::build(inst, None, &fixed, None) {
            let sol = solve_program(&view.lp, &SimplexOptions::default());
            match sol.status {
                LpStatus::Optimal => {
                    let x = view.expand(&sol.x);
                    let obj = inst.objective(&x);
                    if best.as_ref().is_none_or(|(_, b)| obj < *b - 1e-12) {
                        best = Some((x, obj));
                    }
                }
                LpStatus::Unbounded => unbounded = true,
                _ => {}
            }
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == d {
                let sol = match (unbounded, best) {
                    (true, _) => Solution::without_point(SolveStatus::Unbounded),
                    (false, Some((x, objective))) => Solution { x, objective, status: SolveStatus::Optimal },
                    (false, None) => Solution::without_point(SolveStatus::Infeasible),
                };
                return Ok(sol);
            }
            if values[k] < ranges[k].1 {
                values[k] += 1;
                break;
            }
            values[k] = ranges[k].0;
            k += 1;
        }
    }
}
