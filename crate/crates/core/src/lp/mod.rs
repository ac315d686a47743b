//! Exact LP solving and tight-set detection.

mod lu;
mod simplex;

use serde::{Deserialize, Serialize};

pub use simplex::{solve as solve_program, LinearProgram, LpSolution, LpStatus, SimplexOptions};

use crate::model::{Bound, MilpInstance, RowSense};

/// Default relative tolerance for calling a row tight.
pub const EPS_TIGHT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpResultStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit or numerical breakdown.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpResultStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_activity: Vec<f64>,
    pub iterations: usize,
}

impl From<LpStatus> for LpResultStatus {
    fn from(s: LpStatus) -> Self {
        match s {
            LpStatus::Optimal => LpResultStatus::Optimal,
            LpStatus::Infeasible => LpResultStatus::Infeasible,
            LpStatus::Unbounded => LpResultStatus::Unbounded,
            LpStatus::IterationLimit | LpStatus::NumericalFailure => LpResultStatus::Failed,
        }
    }
}

/// Solves the continuous relaxation of `inst` (integrality ignored) and
/// returns a basic (vertex) optimum when one exists.
pub fn solve_lp(inst: &MilpInstance) -> LpResult {
    let fixed = vec![None; inst.n()];
    let result = match LpView::build(inst, None, &fixed, None) {
        Ok(view) => {
            let sol = solve_program(&view.lp, &SimplexOptions::default());
            (sol.status, view.expand(&sol.x), sol.iterations)
        }
        Err(Infeasible) => (LpStatus::Infeasible, Vec::new(), 0),
    };
    let (status, x, iterations) = result;
    if status != LpStatus::Optimal {
        return LpResult { status: status.into(), x: Vec::new(), objective: f64::NAN, row_activity: Vec::new(), iterations };
    }
    let objective = inst.objective(&x);
    let row_activity = inst.row_activity(&x);
    LpResult { status: LpResultStatus::Optimal, x, objective, row_activity, iterations }
}

/// Rows active at `x` within `eps_tight * (1 + |b_i|)`, plus every `Eq` row; sorted.
pub fn tight_set(inst: &MilpInstance, x: &[f64], eps_tight: f64) -> Vec<usize> {
    (0..inst.m())
        .filter(|&i| {
            inst.row_sense[i] == RowSense::Eq || {
                let g: f64 = inst.a.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
                (g - inst.b[i]).abs() <= eps_tight * (1.0 + inst.b[i].abs())
            }
        })
        .collect()
}

/// Marker for an LP shown infeasible while it was being assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Infeasible;

/// An LP assembled from (a subset of) an instance's rows, with some variables
/// substituted by fixed values and single-variable rows folded into bounds.
#[derive(Clone, Debug)]
pub(crate) struct LpView {
    pub lp: LinearProgram,
    /// Original variable -> LP column, or its fixed value.
    slots: Vec<Slot>,
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Column(usize),
    Fixed(f64),
}

const CONST_ROW_TOL: f64 = 1e-9;

impl LpView {
    /// `rows = None` keeps all rows. `fixed[j] = Some(v)` substitutes `x_j = v`.
    /// `extra` bounds are intersected with the instance's own bounds.
    pub(crate) fn build(
        inst: &MilpInstance,
        rows: Option<&[usize]>,
        fixed: &[Option<f64>],
        extra: Option<&[Bound]>,
    ) -> Result<Self, Infeasible> {
        let n = inst.n();
        let mut slots = Vec::with_capacity(n);
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut cost = Vec::new();
        for j in 0..n {
            match fixed[j] {
                Some(v) => slots.push(Slot::Fixed(v)),
                None => {
                    let mut bd = inst.bounds[j];
                    if let Some(extra) = extra {
                        bd.lo = bd.lo.max(extra[j].lo);
                        bd.hi = bd.hi.min(extra[j].hi);
                    }
                    slots.push(Slot::Column(cost.len()));
                    lower.push(bd.lo);
                    upper.push(bd.hi);
                    cost.push(inst.c[j]);
                }
            }
        }
        let mut lp = LinearProgram { cost, lower, upper, ..Default::default() };
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..inst.m()).collect();
                &all
            }
        };
        for &i in rows {
            let mut rhs = inst.b[i];
            let mut coeffs = Vec::new();
            for (j, &a) in inst.a.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match slots[j] {
                    Slot::Fixed(v) => rhs -= a * v,
                    Slot::Column(c) => coeffs.push((c, a)),
                }
            }
            let tol = CONST_ROW_TOL * (1.0 + inst.b[i].abs());
            match (coeffs.len(), inst.row_sense[i]) {
                (0, RowSense::Le) if rhs < -tol => return Err(Infeasible),
                (0, RowSense::Eq) if rhs.abs() > tol => return Err(Infeasible),
                (0, _) => {}
                (1, sense) => {
                    let (c, a) = coeffs[0];
                    let v = rhs / a;
                    if sense == RowSense::Eq || a > 0.0 {
                        lp.upper[c] = lp.upper[c].min(v);
                    }
                    if sense == RowSense::Eq || a < 0.0 {
                        lp.lower[c] = lp.lower[c].max(v);
                    }
                }
                (_, sense) => lp.push_row(coeffs, sense, rhs),
            }
        }
        for c in 0..lp.num_cols() {
            let (lo, hi) = (lp.lower[c], lp.upper[c]);
            if lo > hi {
                if lo - hi <= CONST_ROW_TOL * (1.0 + hi.abs()) {
                    lp.upper[c] = lo;
                } else {
                    return Err(Infeasible);
                }
            }
        }
        Ok(Self { lp, slots })
    }

    /// Full-length variable vector from an LP solution.
    pub(crate) fn expand(&self, cols: &[f64]) -> Vec<f64> {
        if cols.len() != self.lp.num_cols() {
            return Vec::new();
        }
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Column(c) => cols[c],
                Slot::Fixed(v) => v,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseMatrix;

    fn inst(c: Vec<f64>, rows: Vec<Vec<f64>>, b: Vec<f64>, bounds: Vec<Bound>) -> MilpInstance {
        let m = b.len();
        MilpInstance {
            name: "t".into(),
            c,
            a: DenseMatrix::from_rows(&rows),
            b,
            row_sense: vec![RowSense::Le; m],
            integers: vec![],
            bounds,
        }
    }

    #[test]
    fn box_corner_objective() {
        let p = inst(vec![-1.0, -1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0], vec![Bound::nonneg(); 2]);
        let r = solve_lp(&p);
        assert_eq!(r.status, LpResultStatus::Optimal);
        assert_eq!(r.x, vec![1.0, 1.0]);
        assert_eq!(r.objective, -2.0);
        assert_eq!(r.row_activity, vec![1.0, 1.0]);
    }

    #[test]
    fn null_objective_is_optimal() {
        let p = inst(vec![0.0], vec![vec![1.0]], vec![1.0], vec![Bound::nonneg()]);
        let r = solve_lp(&p);
        assert_eq!(r.status, LpResultStatus::Optimal);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn tight_set_of_interior_point_is_eq_rows() {
        let mut p = inst(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0, 1.5], vec![Bound::FREE; 2]);
        assert!(tight_set(&p, &[0.2, 0.3], EPS_TIGHT).is_empty());
        p.row_sense[1] = RowSense::Eq;
        assert_eq!(tight_set(&p, &[0.2, 0.3], EPS_TIGHT), vec![1]);
    }

    #[test]
    fn tight_set_on_single_boundary() {
        let p = inst(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0, 1.5], vec![Bound::FREE; 2]);
        assert_eq!(tight_set(&p, &[0.2, 1.0], EPS_TIGHT), vec![1]);
    }

    #[test]
    fn tight_set_at_two_row_vertex_matches_residuals() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 (bounds as rows)
        let p = inst(
            vec![-1.0, -1.0],
            vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![4.0, 6.0, 0.0, 0.0],
            vec![Bound::FREE; 2],
        );
        let r = solve_lp(&p);
        assert_eq!(r.status, LpResultStatus::Optimal);
        let residuals: Vec<f64> = (0..4).map(|i| p.b[i] - r.row_activity[i]).collect();
        let expected: Vec<usize> = (0..4).filter(|&i| residuals[i].abs() <= 1e-9 * (1.0 + p.b[i].abs())).collect();
        assert_eq!(expected, vec![0, 1]);
        assert_eq!(tight_set(&p, &r.x, EPS_TIGHT), expected);
        assert!((r.x[0] - 1.6).abs() < 1e-12 && (r.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn view_substitutes_fixed_and_folds_singletons() {
        let p = inst(
            vec![1.0, 1.0, 1.0],
            vec![vec![1.0, 1.0, 0.0], vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 1.0]],
            vec![3.0, 4.0, 5.0],
            vec![Bound::nonneg(); 3],
        );
        let view = LpView::build(&p, None, &[Some(1.0), None, None], None).unwrap();
        // row 0 -> x1 <= 2 ; row 1 -> x1 <= 2 ; row 2 -> x2 <= 4
        assert_eq!(view.lp.num_rows(), 0);
        assert_eq!(view.lp.upper, vec![2.0, 4.0]);
        assert_eq!(view.expand(&[0.5, 0.25]), vec![1.0, 0.5, 0.25]);
        assert!(LpView::build(&p, None, &[Some(4.0), Some(0.0), Some(0.0)], None).is_err());
    }
}
