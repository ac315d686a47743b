//! Bounded primal revised simplex, two phases, dense LU basis with
//! product-form updates between refactorizations.

use super::lu::LuFactors;
use crate::model::RowSense;

/// `min cost·x` s.t. each row `(<=|=) rhs`, `lower <= x <= upper`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    /// Sparse rows: `(column, coefficient)` pairs.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub sense: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn push_row(&mut self, row: Vec<(usize, f64)>, sense: RowSense, rhs: f64) {
        self.rows.push(row);
        self.sense.push(sense);
        self.rhs.push(rhs);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub refactor_period: usize,
    pub max_iterations: Option<usize>,
    pub dual_tol: f64,
    pub pivot_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { refactor_period: 50, max_iterations: None, dual_tol: 1e-9, pivot_tol: 1e-9 }
    }
}

const NONBASIC: usize = usize::MAX;
const DEGENERATE_STEP: f64 = 1e-12;

enum Phase {
    Optimal,
    Unbounded,
    Stopped(LpStatus),
}

struct Simplex<'o> {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    basic_pos: Vec<usize>,
    lu: Option<LuFactors>,
    etas: Vec<(usize, Vec<f64>)>,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
    bland: bool,
    opts: &'o SimplexOptions,
}

pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> LpSolution {
    let n = lp.num_cols();
    let m = lp.num_rows();
    let fail = |status| LpSolution { status, x: Vec::new(), objective: f64::NAN, iterations: 0 };
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return fail(LpStatus::Infeasible);
    }

    // Columns: structural, one slack per Le row, one artificial per row.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, v) in row {
            if v != 0.0 {
                cols[j].push((i, v));
            }
        }
    }
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            }
        })
        .collect();
    let mut residual = lp.rhs.clone();
    for (j, col) in cols.iter().enumerate() {
        if x[j] != 0.0 {
            for &(i, v) in col {
                residual[i] -= v * x[j];
            }
        }
    }

    let mut basis = vec![NONBASIC; m];
    let mut slack_of = vec![NONBASIC; m];
    for i in 0..m {
        if lp.sense[i] == RowSense::Le {
            slack_of[i] = cols.len();
            cols.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(0.0);
        }
    }
    let art_start = cols.len();
    let mut phase_one_cost = vec![0.0; art_start];
    for i in 0..m {
        let r = residual[i];
        if slack_of[i] != NONBASIC && r >= 0.0 {
            basis[i] = slack_of[i];
            x[slack_of[i]] = r;
            cols.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(0.0);
            x.push(0.0);
            phase_one_cost.push(0.0);
        } else {
            let sign = if r >= 0.0 { 1.0 } else { -1.0 };
            basis[i] = cols.len();
            cols.push(vec![(i, sign)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(r.abs());
            phase_one_cost.push(1.0);
        }
    }
    let ncols = cols.len();
    let mut basic_pos = vec![NONBASIC; ncols];
    for (i, &b) in basis.iter().enumerate() {
        basic_pos[b] = i;
    }
    let max_iterations = opts.max_iterations.unwrap_or(20 * (m + ncols) + 1000);
    let needs_phase_one = phase_one_cost.iter().any(|&c| c > 0.0);

    let mut s = Simplex {
        m,
        n,
        cols,
        lower,
        upper,
        x,
        cost: phase_one_cost,
        rhs: lp.rhs.clone(),
        basis,
        basic_pos,
        lu: None,
        etas: Vec::new(),
        iterations: 0,
        max_iterations,
        degenerate_run: 0,
        bland: false,
        opts,
    };
    if s.refactor().is_err() {
        return s.finish(LpStatus::NumericalFailure, lp);
    }

    if needs_phase_one {
        match s.run() {
            Phase::Optimal => {}
            Phase::Unbounded => return s.finish(LpStatus::NumericalFailure, lp),
            Phase::Stopped(st) => return s.finish(st, lp),
        }
        let infeasibility: f64 = (art_start..ncols).map(|j| s.x[j].max(0.0)).sum();
        let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeasibility > 1e-9 * scale {
            return s.finish(LpStatus::Infeasible, lp);
        }
        for j in art_start..ncols {
            s.upper[j] = 0.0;
            if s.basic_pos[j] == NONBASIC {
                s.x[j] = 0.0;
            }
        }
    }

    s.cost = vec![0.0; ncols];
    s.cost[..n].copy_from_slice(&lp.cost);
    s.bland = false;
    s.degenerate_run = 0;
    for _round in 0..4 {
        match s.run() {
            Phase::Optimal => {}
            Phase::Unbounded => return s.finish(LpStatus::Unbounded, lp),
            Phase::Stopped(st) => return s.finish(st, lp),
        }
        match s.pivot_in_free_columns() {
            Ok(0) => break,
            Ok(_) => continue,
            Err(st) => return s.finish(st, lp),
        }
    }
    if s.refactor().is_err() {
        return s.finish(LpStatus::NumericalFailure, lp);
    }
    s.finish(LpStatus::Optimal, lp)
}

impl Simplex<'_> {
    fn finish(&self, status: LpStatus, lp: &LinearProgram) -> LpSolution {
        if status != LpStatus::Optimal {
            return LpSolution { status, x: Vec::new(), objective: f64::NAN, iterations: self.iterations };
        }
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution { status, x, objective, iterations: self.iterations }
    }

    fn refactor(&mut self) -> Result<(), ()> {
        let m = self.m;
        let mut dense = vec![0.0; m * m];
        for (k, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[b] {
                dense[i * m + k] = v;
            }
        }
        self.lu = Some(LuFactors::factor(dense, m).map_err(|_| ())?);
        self.etas.clear();
        let mut xb = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.basic_pos[j] == NONBASIC && self.x[j] != 0.0 {
                for &(i, v) in col {
                    xb[i] -= v * self.x[j];
                }
            }
        }
        self.ftran(&mut xb);
        for (k, &b) in self.basis.iter().enumerate() {
            self.x[b] = xb[k];
        }
        Ok(())
    }

    fn ftran(&self, v: &mut [f64]) {
        if let Some(lu) = &self.lu {
            lu.solve(v);
        }
        for (r, w) in &self.etas {
            let vr = v[*r] / w[*r];
            if vr != 0.0 {
                for (vi, wi) in v.iter_mut().zip(w) {
                    *vi -= wi * vr;
                }
            }
            v[*r] = vr;
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for (r, w) in self.etas.iter().rev() {
            let dotp: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - v[*r] * w[*r];
            v[*r] = (v[*r] - dotp) / w[*r];
        }
        if let Some(lu) = &self.lu {
            lu.solve_transpose(v);
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for &(i, v) in &self.cols[j] {
            w[i] = v;
        }
        self.ftran(&mut w);
        w
    }

    fn reduced_cost(&self, y: &[f64], j: usize) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(i, v)| y[i] * v).sum::<f64>()
    }

    /// Direction in which nonbasic `j` may improve the objective, if any.
    fn improving_direction(&self, j: usize, d: f64) -> Option<f64> {
        let tol = self.opts.dual_tol;
        let (lo, hi, xj) = (self.lower[j], self.upper[j], self.x[j]);
        if lo == hi {
            return None;
        }
        if lo.is_finite() && xj == lo && d < -tol {
            Some(1.0)
        } else if hi.is_finite() && xj == hi && d > tol {
            Some(-1.0)
        } else if (!lo.is_finite() || xj > lo) && (!hi.is_finite() || xj < hi) && d.abs() > tol {
            Some(if d < 0.0 { 1.0 } else { -1.0 })
        } else {
            None
        }
    }

    fn price(&self) -> Option<(usize, f64)> {
        let mut y: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
        self.btran(&mut y);
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols.len() {
            if self.basic_pos[j] != NONBASIC {
                continue;
            }
            let d = self.reduced_cost(&y, j);
            if let Some(dir) = self.improving_direction(j, d) {
                if self.bland {
                    return Some((j, dir));
                }
                if best.is_none_or(|(_, _, bd)| d.abs() > bd) {
                    best = Some((j, dir, d.abs()));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Ratio test along `dir * w`. Returns the step and the leaving basis
    /// position with the bound it reaches, or `None` for a bound flip.
    fn ratio_test(&self, j: usize, dir: f64, w: &[f64]) -> (f64, Option<(usize, bool)>) {
        let mut step = if self.lower[j].is_finite() && self.upper[j].is_finite() {
            self.upper[j] - self.lower[j]
        } else {
            f64::INFINITY
        };
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_alpha = 0.0f64;
        for (i, &wi) in w.iter().enumerate() {
            let alpha = dir * wi;
            if alpha.abs() <= self.opts.pivot_tol {
                continue;
            }
            let b = self.basis[i];
            let (limit, to_upper) = if alpha > 0.0 {
                if !self.lower[b].is_finite() {
                    continue;
                }
                ((self.x[b] - self.lower[b]) / alpha, false)
            } else {
                if !self.upper[b].is_finite() {
                    continue;
                }
                ((self.upper[b] - self.x[b]) / -alpha, true)
            };
            let limit = limit.max(0.0);
            let tie = 1e-12 * (1.0 + step.min(1e12));
            let better = if limit < step - tie {
                true
            } else if leave.is_some() && limit <= step + tie {
                if self.bland {
                    b < self.basis[leave.unwrap().0]
                } else {
                    alpha.abs() > leave_alpha
                }
            } else {
                false
            };
            if better {
                step = step.min(limit);
                leave = Some((i, to_upper));
                leave_alpha = alpha.abs();
            }
        }
        (step, leave)
    }

    fn apply_step(&mut self, j: usize, dir: f64, w: Vec<f64>, step: f64, leave: Option<(usize, bool)>) -> Result<(), LpStatus> {
        if step != 0.0 {
            self.x[j] += dir * step;
            for (i, wi) in w.iter().enumerate() {
                let b = self.basis[i];
                self.x[b] -= step * dir * wi;
            }
        }
        match leave {
            None => {
                self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
            }
            Some((r, to_upper)) => {
                let b = self.basis[r];
                self.x[b] = if to_upper { self.upper[b] } else { self.lower[b] };
                self.basic_pos[b] = NONBASIC;
                self.basis[r] = j;
                self.basic_pos[j] = r;
                self.etas.push((r, w));
                if self.etas.len() >= self.opts.refactor_period {
                    self.refactor().map_err(|_| LpStatus::NumericalFailure)?;
                }
            }
        }
        if step <= DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run > 3 * (self.n + self.m) {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
        Ok(())
    }

    fn run(&mut self) -> Phase {
        loop {
            if self.iterations >= self.max_iterations {
                return Phase::Stopped(LpStatus::IterationLimit);
            }
            let Some((j, dir)) = self.price() else {
                return Phase::Optimal;
            };
            let w = self.column(j);
            let (step, leave) = self.ratio_test(j, dir, &w);
            if !step.is_finite() {
                return Phase::Unbounded;
            }
            self.iterations += 1;
            if let Err(st) = self.apply_step(j, dir, w, step, leave) {
                return Phase::Stopped(st);
            }
        }
    }

    /// Moves nonbasic free structural columns into the basis so the reported
    /// point is a vertex whenever the feasible region has one.
    fn pivot_in_free_columns(&mut self) -> Result<usize, LpStatus> {
        let mut pivots = 0;
        for j in 0..self.n {
            if self.basic_pos[j] != NONBASIC || self.lower[j].is_finite() || self.upper[j].is_finite() {
                continue;
            }
            let w = self.column(j);
            for dir in [1.0, -1.0] {
                let (step, leave) = self.ratio_test(j, dir, &w);
                if step.is_finite() && leave.is_some() {
                    self.iterations += 1;
                    self.apply_step(j, dir, w, step, leave)?;
                    pivots += 1;
                    break;
                }
            }
        }
        Ok(pivots)
    }
}
