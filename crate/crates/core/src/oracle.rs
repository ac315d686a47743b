//! Random small MILPs and the branch-and-bound versus enumeration check.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::milp::{solve_milp, solve_milp_exhaustive, BnbConfig};
use crate::model::{Bound, DenseMatrix, MilpInstance, RowSense, SolveStatus};

/// Random feasible MILP with up to 8 binaries, 6 continuous variables in
/// `[0, 10]` and 12 rows, built around a random feasible point.
pub fn random_milp(seed: u64) -> MilpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(1..=8);
    let nc = rng.random_range(0..=6);
    let n = nb + nc;
    let m = rng.random_range(1..=12);
    let x0: Vec<f64> = (0..n)
        .map(|j| if j < nb { rng.random_range(0..=1) as f64 } else { rng.random_range(0.0..10.0) })
        .collect();
    let mut a = DenseMatrix::zeros(0, n);
    let mut b = Vec::new();
    let mut row_sense = Vec::new();
    for _ in 0..m {
        let row: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.7) { (rng.random_range(-5.0f64..5.0) * 4.0).round() / 4.0 } else { 0.0 })
            .collect();
        let act: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        if rng.random_bool(0.1) {
            b.push(act);
            row_sense.push(RowSense::Eq);
        } else {
            b.push(act + rng.random_range(0.0..3.0));
            row_sense.push(RowSense::Le);
        }
        a.push_row(&row);
    }
    let c = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let bounds = (0..n).map(|j| if j < nb { Bound::binary() } else { Bound::new(0.0, 10.0) }).collect();
    MilpInstance { name: format!("rand{seed}"), c, a, b, row_sense, integers: (0..nb).collect(), bounds }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleMismatch {
    pub seed: u64,
    pub bnb: f64,
    pub exhaustive: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checked: usize,
    pub max_abs_diff: f64,
    pub mismatches: Vec<OracleMismatch>,
    pub elapsed_s: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Solves `count` random instances both ways and records objective gaps above `tol`.
pub fn run_oracle_check(count: usize, base_seed: u64, tol: f64) -> Result<OracleReport> {
    let start = Instant::now();
    let mut max_abs_diff = 0.0f64;
    let mut mismatches = Vec::new();
    for seed in base_seed..base_seed + count as u64 {
        let inst = random_milp(seed);
        let bnb = solve_milp(&inst, &BnbConfig::default());
        let ex = solve_milp_exhaustive(&inst)?;
        let both_optimal = bnb.status == SolveStatus::Optimal && ex.status == SolveStatus::Optimal;
        let same_status = bnb.status == ex.status;
        let diff = if both_optimal { (bnb.objective - ex.objective).abs() } else { 0.0 };
        max_abs_diff = max_abs_diff.max(diff);
        if !same_status || diff > tol {
            mismatches.push(OracleMismatch { seed, bnb: bnb.objective, exhaustive: ex.objective });
        }
    }
    Ok(OracleReport { checked: count, max_abs_diff, mismatches, elapsed_s: start.elapsed().as_secs_f64() })
}
