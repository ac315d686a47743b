#![allow(dead_code)]

#[allow(unused_imports)]
pub use stratlearn::oracle::random_milp;
use stratlearn::model::{MilpInstance, RowSense};

/// Largest row violation relative to `1 + |b_i|`.
pub fn max_rel_violation(inst: &MilpInstance, x: &[f64]) -> f64 {
    let act = inst.row_activity(x);
    (0..inst.m())
        .map(|i| {
            let g = act[i] - inst.b[i];
            let v = if inst.row_sense[i] == RowSense::Eq { g.abs() } else { g.max(0.0) };
            v / (1.0 + inst.b[i].abs())
        })
        .fold(0.0, f64::max)
}
