//! Top-k strategy selection, end-to-end fast solving and evaluation metrics.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::learner::RewardModel;
use crate::milp::{solve_milp, BnbConfig};
use crate::model::{extended_f64, MilpInstance, Solution, StrategyLibrary};
use crate::reduction::{apply_strategy, reward, EvalRecord, ReducedStatus};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_EPS: f64 = 1e-4;

/// Indices of the `k` largest predictions, best first; ties go to the lower index.
pub fn top_k(pred: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > pred.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", pred.len())));
    }
    let mut idx: Vec<usize> = (0..pred.len()).collect();
    idx.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Outcome of evaluating a candidate set on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Library index of the chosen strategy.
    pub index: usize,
    pub solution: Solution,
    /// When the optimum is unknown, `d` is NaN and `r` ignores it.
    pub record: EvalRecord,
    /// No candidate's reduced LP was feasible; the record then comes from the elastic fallback.
    pub all_infeasible: bool,
}

/// Applies each candidate and keeps the one with the lowest infeasibility,
/// then lowest suboptimality (or objective when `f_star` is unknown), then lowest index.
/// Infeasibilities at or below `p_tol` count as zero.
pub fn select_strategy(
    inst: &MilpInstance,
    candidates: &[usize],
    library: &StrategyLibrary,
    f_star: Option<f64>,
    p_tol: f64,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate set".into()));
    }
    if let Some(&j) = candidates.iter().find(|&&j| j >= library.len()) {
        return Err(Error::InvalidArgument(format!("candidate {j} outside library of {}", library.len())));
    }
    let evaluated: Vec<(Solution, EvalRecord)> = candidates
        .par_iter()
        .map(|&j| {
            let (sol, mut rec) = apply_strategy(inst, library.get(j), f_star.unwrap_or(0.0))?;
            if f_star.is_none() {
                rec.d = f64::NAN;
                rec.r = reward(rec.p, 0.0);
            }
            Ok((sol, rec))
        })
        .collect::<Result<_>>()?;
    let tie_value = |k: usize| -> f64 {
        let (sol, rec) = &evaluated[k];
        if f_star.is_some() { rec.d } else { sol.objective }
    };
    let best = (0..candidates.len())
        .min_by(|&a, &b| {
            let key = |k: usize| if evaluated[k].1.p <= p_tol { 0.0 } else { evaluated[k].1.p };
            key(a)
                .total_cmp(&key(b))
                .then(nan_last(tie_value(a)).total_cmp(&nan_last(tie_value(b))))
                .then(candidates[a].cmp(&candidates[b]))
        })
        .expect("nonempty");
    let all_infeasible = evaluated.iter().all(|(_, r)| r.reduced_status != ReducedStatus::Optimal);
    let (solution, record) = evaluated.into_iter().nth(best).expect("in range");
    Ok(Selection { index: candidates[best], solution, record, all_infeasible })
}

fn nan_last(v: f64) -> f64 {
    if v.is_nan() { f64::INFINITY } else { v }
}

/// Model scores for every library strategy on the raw reward scale.
/// Checks that `theta` and `library` match the model's encoder shape.
pub fn check_inputs(model: &RewardModel, theta: &[f64], library: &StrategyLibrary) -> Result<()> {
    let enc = &model.encoder;
    if theta.len() != enc.theta_dim {
        return Err(Error::InvalidArgument(format!("theta has {} entries, model expects {}", theta.len(), enc.theta_dim)));
    }
    for s in library.strategies() {
        if s.integer_values.len() != enc.d || s.tight_set.iter().any(|&i| i >= enc.m) {
            return Err(Error::InvalidArgument(format!("strategy {} does not fit the model shape (m={}, d={})", s.key, enc.m, enc.d)));
        }
    }
    Ok(())
}

pub fn predict_rewards(model: &RewardModel, theta: &[f64], library: &StrategyLibrary) -> Vec<f64> {
    let tokens = model.encoder.encode_batch(theta, library);
    model.forward(&tokens).into_iter().map(|z| model.reward_transform.invert(z)).collect()
}

/// Model prediction, top-k and selection for one instance.
pub fn fast_solve(
    model: &RewardModel,
    inst: &MilpInstance,
    theta: &[f64],
    library: &StrategyLibrary,
    k: usize,
    f_star: Option<f64>,
    p_tol: f64,
) -> Result<Selection> {
    let pred = predict_rewards(model, theta, library);
    select_strategy(inst, &top_k(&pred, k)?, library, f_star, p_tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance_id: usize,
    pub selected: usize,
    #[serde(with = "extended_f64")]
    pub p: f64,
    #[serde(with = "extended_f64")]
    pub d: f64,
    pub accurate: bool,
    pub all_infeasible: bool,
    pub reduced_status: ReducedStatus,
}

/// Quality metrics; deterministic for a fixed model and test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub k: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub n: usize,
    pub accuracy: f64,
    #[serde(with = "extended_f64")]
    pub mean_p: f64,
    #[serde(with = "extended_f64")]
    pub max_p: f64,
    #[serde(with = "extended_f64")]
    pub mean_d: f64,
    #[serde(with = "extended_f64")]
    pub max_d: f64,
    pub all_infeasible: usize,
    pub instances: Vec<InstanceOutcome>,
}

/// Wall-clock phases of one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceTiming {
    pub instance_id: usize,
    pub inference_s: f64,
    pub reduced_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub timings: Vec<InstanceTiming>,
}

/// Evaluates an arbitrary predictor `(instance index, theta) -> scores over library`.
pub fn evaluate_with<F>(ds_test: &Dataset, library: &StrategyLibrary, k: usize, eps1: f64, eps2: f64, predict: F) -> Result<Evaluation>
where
    F: Fn(usize, &[f64]) -> Vec<f64> + Sync,
{
    if ds_test.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    if k == 0 || k > library.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", library.len())));
    }
    let per: Vec<(InstanceOutcome, InstanceTiming)> = (0..ds_test.len())
        .into_par_iter()
        .map(|i| {
            let rec = &ds_test.records[i];
            let inst = ds_test.instance(i);
            let t0 = Instant::now();
            let pred = predict(i, &rec.theta);
            if pred.len() != library.len() {
                return Err(Error::InvalidArgument(format!("predictor returned {} scores for {} strategies", pred.len(), library.len())));
            }
            let cand = top_k(&pred, k)?;
            let inference_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let sel = select_strategy(&inst, &cand, library, Some(rec.f_star), eps1)?;
            let reduced_s = t1.elapsed().as_secs_f64();
            let outcome = InstanceOutcome {
                instance_id: rec.instance_id,
                selected: sel.index,
                p: sel.record.p,
                d: sel.record.d,
                accurate: sel.record.within(eps1, eps2),
                all_infeasible: sel.all_infeasible,
                reduced_status: sel.record.reduced_status,
            };
            Ok((outcome, InstanceTiming { instance_id: rec.instance_id, inference_s, reduced_s }))
        })
        .collect::<Result<_>>()?;
    let (instances, timings): (Vec<_>, Vec<_>) = per.into_iter().unzip();
    let n = instances.len();
    let accurate = instances.iter().filter(|o| o.accurate).count();
    let mean = |f: fn(&InstanceOutcome) -> f64| instances.iter().map(f).sum::<f64>() / n as f64;
    let max = |f: fn(&InstanceOutcome) -> f64| instances.iter().map(f).fold(0.0f64, f64::max);
    let metrics = Metrics {
        k,
        eps1,
        eps2,
        n,
        accuracy: accurate as f64 / n as f64,
        mean_p: mean(|o| o.p),
        max_p: max(|o| o.p),
        mean_d: mean(|o| o.d),
        max_d: max(|o| o.d),
        all_infeasible: instances.iter().filter(|o| o.all_infeasible).count(),
        instances,
    };
    Ok(Evaluation { metrics, timings })
}

pub fn evaluate(model: &RewardModel, ds_test: &Dataset, library: &StrategyLibrary, k: usize, eps1: f64, eps2: f64) -> Result<Evaluation> {
    evaluate_with(ds_test, library, k, eps1, eps2, |_, theta| predict_rewards(model, theta, library))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance_id: usize,
    pub fast_s: f64,
    pub bnb_s: f64,
    pub accurate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub k: usize,
    pub median_fast_s: f64,
    pub median_bnb_s: f64,
    /// `median_fast_s / median_bnb_s`.
    pub ratio: f64,
    pub rows: Vec<BenchRow>,
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let h = s.len() / 2;
    if s.len() % 2 == 1 { s[h] } else { 0.5 * (s[h - 1] + s[h]) }
}

/// Times the model path (prediction, top-k, reduced solves) against
/// branch-and-bound, one instance at a time.
pub fn bench(model: &RewardModel, ds_test: &Dataset, library: &StrategyLibrary, k: usize, bnb: &BnbConfig, eps: f64) -> Result<BenchReport> {
    let mut rows = Vec::with_capacity(ds_test.len());
    for i in 0..ds_test.len() {
        let rec = &ds_test.records[i];
        let inst = ds_test.instance(i);
        let t0 = Instant::now();
        let sel = fast_solve(model, &inst, &rec.theta, library, k, Some(rec.f_star), eps)?;
        let fast_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let _ = solve_milp(&inst, bnb);
        let bnb_s = t1.elapsed().as_secs_f64();
        rows.push(BenchRow { instance_id: rec.instance_id, fast_s, bnb_s, accurate: sel.record.within(eps, eps) });
    }
    let fast: Vec<f64> = rows.iter().map(|r| r.fast_s).collect();
    let slow: Vec<f64> = rows.iter().map(|r| r.bnb_s).collect();
    let (median_fast_s, median_bnb_s) = (median(&fast), median(&slow));
    Ok(BenchReport { k, median_fast_s, median_bnb_s, ratio: median_fast_s / median_bnb_s, rows })
}
