//! Mini-batch training of the reward model.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autodiff::Tape;
use super::encoding::TokenEncoder;
use super::network::{RewardModel, RewardTransform};
use super::optim::AdamW;
use super::preference::{build_preference_set, sample_unranked_pairs, PreferenceSet, TIE_TOL};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::model::StrategyLibrary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Preference,
    RewardFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Ranked,
    /// Random unordered pairs without ranking.
    Nr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub decay_period: usize,
    pub epochs: usize,
    /// `None` picks `min(128, N / 4)`.
    pub batch_size: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub loss_mode: LossMode,
    pub sampling_mode: SamplingMode,
    /// Pairs per instance in NR mode; `None` uses `M^P - 1`.
    pub nr_pair_budget: Option<usize>,
    pub layers: usize,
    /// Skip connection around each attention layer.
    pub residual: bool,
    pub tie_tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.85,
            lambda2: 0.15,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            decay_period: 10,
            epochs: 100,
            batch_size: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 1e-2,
            loss_mode: LossMode::Preference,
            sampling_mode: SamplingMode::Ranked,
            nr_pair_budget: None,
            layers: 2,
            residual: true,
            tie_tol: TIE_TOL,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Hard errors are returned; soft problems come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Config(format!("loss weights must be nonnegative, got {} and {}", self.lambda1, self.lambda2)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be finite and nonnegative, got {}", self.learning_rate)));
        }
        if self.decay_period == 0 || self.batch_size == Some(0) {
            return Err(Error::Config("decay_period and batch_size must be positive".into()));
        }
        let mut warnings = Vec::new();
        if self.lambda1 == 0.0 && self.lambda2 == 0.0 && self.loss_mode == LossMode::Preference {
            warnings.push("lambda1 = lambda2 = 0: the preference loss is identically zero".into());
        }
        if self.learning_rate == 0.0 {
            warnings.push("learning_rate = 0: parameters will not change".into());
        }
        Ok(warnings)
    }
}

/// Tokens and raw rewards for every training instance over the pruned library.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub tokens: Vec<Array2<f64>>,
    pub rewards: Vec<Vec<f64>>,
    pub encoder: TokenEncoder,
    pub transform: RewardTransform,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds tokens from explicit parameter vectors and reward rows.
    pub fn from_parts(thetas: &[Vec<f64>], rewards: Vec<Vec<f64>>, m: usize, d: usize, library: &StrategyLibrary) -> Self {
        let encoder = TokenEncoder::fit(m, d, thetas, library);
        let tokens = thetas.iter().map(|t| encoder.encode_batch(t, library)).collect();
        let transform = RewardTransform::fit(rewards.iter().flatten().copied());
        Self { tokens, rewards, encoder, transform }
    }

    /// Reward rows for `pruned` (columns via its source indices) from the dataset's table.
    pub fn from_dataset(ds: &Dataset, pruned: &StrategyLibrary) -> Result<Self> {
        let cols: Vec<usize> = match pruned.source_indices() {
            Some(src) => src.to_vec(),
            None => (0..pruned.len()).collect(),
        };
        let table = ds.reward_table.as_ref().ok_or_else(|| Error::Precondition("reward table incomplete".into()))?;
        if cols.iter().any(|&j| j >= table.cols) || !table.is_complete_for(&cols) {
            return Err(Error::Precondition("reward table incomplete".into()));
        }
        let thetas: Vec<Vec<f64>> = ds.records.iter().map(|r| r.theta.clone()).collect();
        let rewards = (0..ds.len()).map(|i| cols.iter().map(|&j| table.reward(i, j)).collect()).collect();
        Ok(Self::from_parts(&thetas, rewards, ds.family.base.m(), ds.family.base.d(), pruned))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-instance loss of each epoch.
    pub loss_trace: Vec<f64>,
    pub steps: usize,
}

/// What one instance contributes to the loss.
#[derive(Clone, Debug)]
pub enum InstanceTarget {
    Pairs(PreferenceSet),
    Rewards(Vec<f64>),
}

/// Loss and parameter gradients of one instance.
pub fn instance_loss_grad(
    model: &RewardModel,
    tokens: &Array2<f64>,
    target: &InstanceTarget,
    lambda1: f64,
    lambda2: f64,
) -> (f64, Vec<Array2<f64>>) {
    let mut tape = Tape::new();
    let (out, params) = model.forward_tape(&mut tape, tokens);
    let loss = match target {
        InstanceTarget::Pairs(p) => {
            let z = tape.pair_diff(out, &p.pairs);
            let lp = tape.logistic_loss(z, &p.mu);
            let ld = tape.squared_error(z, &p.delta);
            let lp = tape.scale(lp, lambda1);
            let ld = tape.scale(ld, lambda2);
            tape.add(lp, ld)
        }
        InstanceTarget::Rewards(r) => {
            let e = tape.squared_error(out, r);
            tape.scale(e, 1.0 / r.len().max(1) as f64)
        }
    };
    let value = tape.value(loss)[[0, 0]];
    let grads = tape.backward(loss);
    let g = params.iter().zip(model.params()).map(|(&v, p)| grads.get(v, p)).collect();
    (value, g)
}

/// Mean loss and gradient over `batch`, reduced in index order.
pub fn batch_loss_grad(
    model: &RewardModel,
    tokens: &[Array2<f64>],
    targets: &[InstanceTarget],
    batch: &[usize],
    lambda1: f64,
    lambda2: f64,
) -> (f64, Vec<Array2<f64>>) {
    let parts: Vec<(f64, Vec<Array2<f64>>)> =
        batch.par_iter().map(|&i| instance_loss_grad(model, &tokens[i], &targets[i], lambda1, lambda2)).collect();
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut total = 0.0;
    let mut acc: Vec<Array2<f64>> = model.params().iter().map(|p| Array2::zeros(p.raw_dim())).collect();
    for (loss, grads) in parts {
        total += loss;
        for (a, g) in acc.iter_mut().zip(grads) {
            *a += &g;
        }
    }
    acc.iter_mut().for_each(|a| *a *= scale);
    (total * scale, acc)
}

fn targets_for_epoch(set: &TrainingSet, cfg: &TrainConfig, epoch: usize) -> Vec<InstanceTarget> {
    let inv_std = 1.0 / set.transform.std;
    (0..set.len())
        .map(|i| {
            let r = &set.rewards[i];
            match (cfg.loss_mode, cfg.sampling_mode) {
                (LossMode::RewardFit, _) => InstanceTarget::Rewards(r.iter().map(|&v| set.transform.apply(v)).collect()),
                (LossMode::Preference, SamplingMode::Ranked) => {
                    InstanceTarget::Pairs(build_preference_set(r, cfg.tie_tol).scale_delta(inv_std))
                }
                (LossMode::Preference, SamplingMode::Nr) => {
                    let budget = cfg.nr_pair_budget.unwrap_or(r.len().saturating_sub(1));
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream((epoch * set.len() + i) as u64 + 1);
                    InstanceTarget::Pairs(sample_unranked_pairs(r, budget, cfg.tie_tol, &mut rng).scale_delta(inv_std))
                }
            }
        })
        .collect()
}

/// Trains a fresh model on `set`.
pub fn train(set: &TrainingSet, cfg: &TrainConfig) -> Result<(RewardModel, TrainReport)> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::Precondition("empty training set".into()));
    }
    let model = RewardModel::init(set.encoder.clone(), cfg.layers, cfg.residual, set.transform, cfg.seed);
    train_from(model, set, cfg)
}

/// Continues training `model` on `set`.
pub fn train_from(mut model: RewardModel, set: &TrainingSet, cfg: &TrainConfig) -> Result<(RewardModel, TrainReport)> {
    cfg.validate()?;
    let n = set.len();
    let batch_size = cfg.batch_size.unwrap_or_else(|| (n / 4).clamp(1, 128)).min(n.max(1));
    let mut opt = AdamW::new(&model.params(), cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fixed_targets = (cfg.sampling_mode == SamplingMode::Ranked || cfg.loss_mode == LossMode::RewardFit)
        .then(|| targets_for_epoch(set, cfg, 0));
    let mut report = TrainReport { loss_trace: Vec::with_capacity(cfg.epochs), steps: 0 };
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi((epoch / cfg.decay_period) as i32);
        let epoch_targets;
        let targets = match &fixed_targets {
            Some(t) => t,
            None => {
                epoch_targets = targets_for_epoch(set, cfg, epoch);
                &epoch_targets
            }
        };
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(batch_size).enumerate() {
            let (loss, grads) = batch_loss_grad(&model, &set.tokens, targets, batch, cfg.lambda1, cfg.lambda2);
            if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            opt.step(model.params_mut(), &grads, lr);
            report.steps += 1;
            epoch_loss += loss * batch.len() as f64;
        }
        report.loss_trace.push(epoch_loss / n as f64);
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Strategy;

    fn toy_set(n: usize) -> (TrainingSet, StrategyLibrary) {
        let mut lib = StrategyLibrary::new_raw();
        lib.insert(Strategy::new(vec![0], vec![0]));
        lib.insert(Strategy::new(vec![1], vec![1]));
        let thetas: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64 - 0.5]).collect();
        // Strategy 1 wins everywhere by at least 5; both rewards move with theta.
        let rewards = thetas.iter().map(|t| vec![2.0 + 4.0 * t[0], 8.0 + 3.0 * t[0] * t[0]]).collect();
        (TrainingSet::from_parts(&thetas, rewards, 2, 1, &lib), lib)
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (set, _) = toy_set(16);
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.0, weight_decay: 0.1, ..Default::default() };
        let init = RewardModel::init(set.encoder.clone(), cfg.layers, cfg.residual, set.transform, cfg.seed);
        let (model, _) = train(&set, &cfg).unwrap();
        assert_eq!(model, init);
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let (set, _) = toy_set(40);
        let cfg = TrainConfig { epochs: 150, learning_rate: 2e-3, batch_size: Some(40), ..Default::default() };
        let (model, report) = train(&set, &cfg).unwrap();
        for w in report.loss_trace[..10].windows(2) {
            assert!(w[1] < w[0], "{:?}", &report.loss_trace[..10]);
        }
        let correct = (0..set.len())
            .filter(|&i| {
                let out = model.forward(&set.tokens[i]);
                let best = if set.rewards[i][0] > set.rewards[i][1] { 0 } else { 1 };
                (out[0] > out[1]) == (best == 0)
            })
            .count();
        assert_eq!(correct, set.len());
    }

    #[test]
    fn training_is_deterministic_in_every_mode() {
        let (set, _) = toy_set(12);
        for (loss_mode, sampling_mode) in
            [(LossMode::Preference, SamplingMode::Ranked), (LossMode::Preference, SamplingMode::Nr), (LossMode::RewardFit, SamplingMode::Ranked)]
        {
            let cfg = TrainConfig { epochs: 3, loss_mode, sampling_mode, ..Default::default() };
            let a = train(&set, &cfg).unwrap();
            let b = train(&set, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let (mut set, _) = toy_set(8);
        set.tokens[3][[0, 0]] = f64::NAN;
        let cfg = TrainConfig { epochs: 1, batch_size: Some(8), ..Default::default() };
        assert!(matches!(train(&set, &cfg), Err(Error::NonFiniteLoss { epoch: 0, batch: 0 })));
    }
}

#[cfg(test)]
mod gradient_tests {
    use super::*;
    use crate::learner::preference::build_preference_set;
    use crate::learner::TokenEncoder;
    use rand::Rng;

    fn fixture(layers: usize, residual: bool) -> (RewardModel, Array2<f64>) {
        let enc = TokenEncoder { theta_dim: 3, m: 0, d: 0, mean: vec![0.0; 3], std: vec![1.0; 3] };
        let mut model = RewardModel::init(enc, layers, residual, RewardTransform::IDENTITY, 11);
        model.b_out[[0, 0]] = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tokens = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.5..1.5));
        (model, tokens)
    }

    fn check(target: InstanceTarget, lambda1: f64, lambda2: f64) {
        for (layers, residual) in [(0, false), (1, false), (2, false), (2, true)] {
            let (model, tokens) = fixture(layers, residual);
            let (_, grads) = instance_loss_grad(&model, &tokens, &target, lambda1, lambda2);
            let h = 1e-6;
            for (k, g) in grads.iter().enumerate() {
                for idx in 0..g.len() {
                    let (r, c) = (idx / g.ncols(), idx % g.ncols());
                    let mut plus = model.clone();
                    plus.params_mut()[k][[r, c]] += h;
                    let mut minus = model.clone();
                    minus.params_mut()[k][[r, c]] -= h;
                    let fd = (instance_loss_grad(&plus, &tokens, &target, lambda1, lambda2).0
                        - instance_loss_grad(&minus, &tokens, &target, lambda1, lambda2).0)
                        / (2.0 * h);
                    assert!((fd - g[[r, c]]).abs() <= 1e-6 * (1.0 + fd.abs()), "layers {layers} param {k} ({r},{c}): fd {fd} vs {}", g[[r, c]]);
                }
            }
        }
    }

    #[test]
    fn preference_loss_gradient_matches_finite_differences() {
        let p = build_preference_set(&[1.0, -0.5, 2.0, 2.0], TIE_TOL);
        check(InstanceTarget::Pairs(p), 1.0, 0.0);
    }

    #[test]
    fn difference_loss_gradient_matches_finite_differences() {
        let p = build_preference_set(&[1.0, -0.5, 2.0, 0.7], TIE_TOL);
        check(InstanceTarget::Pairs(p), 0.0, 1.0);
    }

    #[test]
    fn total_loss_gradient_matches_finite_differences() {
        let p = build_preference_set(&[1.0, -0.5, 2.0, 0.7], TIE_TOL);
        check(InstanceTarget::Pairs(p), 0.85, 0.15);
    }

    #[test]
    fn reward_fit_gradient_matches_finite_differences() {
        check(InstanceTarget::Rewards(vec![0.2, -1.0, 0.4, 1.1]), 0.0, 0.0);
    }
}
