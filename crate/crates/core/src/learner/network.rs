//! The attention reward model: `L` single-head attention layers followed by a
//! per-token affine readout.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::autodiff::{softmax_rows, Tape, Var};
use super::encoding::TokenEncoder;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Affine map from raw rewards to the standardized training scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTransform {
    pub mean: f64,
    pub std: f64,
}

impl RewardTransform {
    pub const IDENTITY: RewardTransform = RewardTransform { mean: 0.0, std: 1.0 };

    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::IDENTITY;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        Self { mean, std: if std < 1e-8 { 1.0 } else { std } }
    }

    pub fn apply(&self, r: f64) -> f64 {
        (r - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// JSON nested-array form of a matrix.
mod nested {
    use ndarray::Array2;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = a.outer_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), cols), flat).map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionLayer {
    #[serde(with = "nested")]
    pub wq: Array2<f64>,
    #[serde(with = "nested")]
    pub wk: Array2<f64>,
    #[serde(with = "nested")]
    pub wv: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub format_version: u32,
    pub layers: Vec<AttentionLayer>,
    /// Adds each layer's input to its output.
    #[serde(default)]
    pub residual: bool,
    #[serde(with = "nested")]
    pub w_out: Array2<f64>,
    #[serde(with = "nested")]
    pub b_out: Array2<f64>,
    pub encoder: TokenEncoder,
    pub reward_transform: RewardTransform,
}

impl RewardModel {
    /// Gaussian initialization with variance `1 / F`.
    pub fn init(encoder: TokenEncoder, n_layers: usize, residual: bool, reward_transform: RewardTransform, seed: u64) -> Self {
        let f = encoder.features();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (f.max(1) as f64).sqrt()).expect("valid normal");
        let mut draw = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || normal.sample(&mut rng));
        let layers = (0..n_layers).map(|_| AttentionLayer { wq: draw(f, f), wk: draw(f, f), wv: draw(f, f) }).collect();
        let w_out = draw(f, 1);
        Self { format_version: MODEL_FORMAT_VERSION, layers, residual, w_out, b_out: Array2::zeros((1, 1)), encoder, reward_transform }
    }

    pub fn features(&self) -> usize {
        self.w_out.nrows()
    }

    /// Parameters in a fixed order: per layer `wq, wk, wv`, then `w_out`, `b_out`.
    pub fn params(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.extend([&l.wq, &l.wk, &l.wv]);
        }
        out.push(&self.w_out);
        out.push(&self.b_out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.extend([&mut l.wq, &mut l.wk, &mut l.wv]);
        }
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Records the forward pass on `tape`; returns the `M x 1` output and the
    /// parameter leaves in [`RewardModel::params`] order.
    pub fn forward_tape(&self, tape: &mut Tape, tokens: &Array2<f64>) -> (Var, Vec<Var>) {
        let scale = 1.0 / (self.features().max(1) as f64).sqrt();
        let params: Vec<Var> = self.params().into_iter().map(|p| tape.leaf(p.clone())).collect();
        let mut x = tape.leaf(tokens.clone());
        for l in 0..self.layers.len() {
            let (wq, wk, wv) = (params[3 * l], params[3 * l + 1], params[3 * l + 2]);
            let q = tape.matmul(x, wq);
            let k = tape.matmul(x, wk);
            let v = tape.matmul(x, wv);
            let s = tape.matmul_t(q, k);
            let s = tape.scale(s, scale);
            let a = tape.softmax_rows(s);
            let y = tape.matmul(a, v);
            x = if self.residual { tape.add(x, y) } else { y };
        }
        let n = params.len();
        let out = tape.matmul(x, params[n - 2]);
        let out = tape.add_scalar(out, params[n - 1]);
        (out, params)
    }

    /// Predicted rewards on the standardized scale, one per token row.
    pub fn forward(&self, tokens: &Array2<f64>) -> Vec<f64> {
        let scale = 1.0 / (self.features().max(1) as f64).sqrt();
        let mut x = tokens.clone();
        for l in &self.layers {
            let q = x.dot(&l.wq);
            let k = x.dot(&l.wk);
            let v = x.dot(&l.wv);
            let a = softmax_rows(&(q.dot(&k.t()) * scale));
            let y = a.dot(&v);
            x = if self.residual { x + y } else { y };
        }
        let b = self.b_out[[0, 0]];
        x.dot(&self.w_out).iter().map(|v| v + b).collect()
    }
}

/// Single attention layer `softmax(X Wq (X Wk)^T / sqrt(F)) X Wv`.
pub fn attention_layer(x: &Array2<f64>, layer: &AttentionLayer) -> Array2<f64> {
    let scale = 1.0 / (x.ncols().max(1) as f64).sqrt();
    let a = softmax_rows(&(x.dot(&layer.wq).dot(&x.dot(&layer.wk).t()) * scale));
    a.dot(&x.dot(&layer.wv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn encoder(f: usize) -> TokenEncoder {
        TokenEncoder { theta_dim: f, m: 0, d: 0, mean: vec![0.0; f], std: vec![1.0; f] }
    }

    fn random_tokens(rows: usize, f: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, f), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_token_attention_is_value_projection() {
        let m = RewardModel::init(encoder(4), 1, false, RewardTransform::IDENTITY, 3);
        let x = random_tokens(1, 4, 1);
        let out = attention_layer(&x, &m.layers[0]);
        let expect = x.dot(&m.layers[0].wv);
        assert!(out.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn zero_query_key_weights_mean_pool() {
        let mut m = RewardModel::init(encoder(3), 1, false, RewardTransform::IDENTITY, 4);
        m.layers[0].wq.fill(0.0);
        m.layers[0].wk.fill(0.0);
        let x = random_tokens(5, 3, 2);
        let out = attention_layer(&x, &m.layers[0]);
        let v = x.dot(&m.layers[0].wv);
        let mean = v.mean_axis(ndarray::Axis(0)).unwrap();
        for row in out.outer_iter() {
            assert!(row.iter().zip(mean.iter()).all(|(a, b)| (a - b).abs() < 1e-14));
        }
    }

    #[test]
    fn attention_matches_straight_line_recomputation() {
        let m = RewardModel::init(encoder(4), 1, false, RewardTransform::IDENTITY, 5);
        let x = random_tokens(3, 4, 6);
        let out = attention_layer(&x, &m.layers[0]);
        let l = &m.layers[0];
        let proj = |w: &Array2<f64>, r: usize, c: usize| (0..4).map(|k| x[[r, k]] * w[[k, c]]).sum::<f64>();
        for i in 0..3 {
            let logits: Vec<f64> = (0..3)
                .map(|j| (0..4).map(|c| proj(&l.wq, i, c) * proj(&l.wk, j, c)).sum::<f64>() / 2.0)
                .collect();
            let z: f64 = logits.iter().map(|v| v.exp()).sum();
            for c in 0..4 {
                let expect: f64 = (0..3).map(|j| logits[j].exp() / z * proj(&l.wv, j, c)).sum();
                assert!((out[[i, c]] - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn no_layers_is_affine_readout_and_zero_weights_give_bias() {
        let mut m = RewardModel::init(encoder(3), 0, false, RewardTransform::IDENTITY, 7);
        m.b_out[[0, 0]] = 0.5;
        let x = random_tokens(4, 3, 8);
        let out = m.forward(&x);
        for (i, v) in out.iter().enumerate() {
            let expect: f64 = (0..3).map(|k| x[[i, k]] * m.w_out[[k, 0]]).sum::<f64>() + 0.5;
            assert!((v - expect).abs() < 1e-15);
        }
        let mut z = RewardModel::init(encoder(3), 2, false, RewardTransform::IDENTITY, 9);
        z.params_mut().into_iter().for_each(|p| p.fill(0.0));
        z.b_out[[0, 0]] = -1.25;
        assert!(z.forward(&x).iter().all(|&v| v == -1.25));
    }

    #[test]
    fn permuting_tokens_permutes_outputs() {
        for residual in [false, true] {
            let m = RewardModel::init(encoder(5), 2, residual, RewardTransform::IDENTITY, 10);
            let x = random_tokens(6, 5, 11);
            let perm = [3, 0, 5, 1, 4, 2];
            let px = Array2::from_shape_fn((6, 5), |(r, c)| x[[perm[r], c]]);
            let out = m.forward(&x);
            let pout = m.forward(&px);
            for r in 0..6 {
                assert!((pout[r] - out[perm[r]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tape_forward_equals_plain_forward() {
        let m = RewardModel::init(encoder(4), 2, false, RewardTransform::IDENTITY, 12);
        let x = random_tokens(3, 4, 13);
        let mut t = Tape::new();
        let (out, _) = m.forward_tape(&mut t, &x);
        let plain = m.forward(&x);
        for (a, b) in t.value(out).iter().zip(&plain) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn checkpoint_json_roundtrip_is_exact() {
        let m = RewardModel::init(encoder(3), 2, true, RewardTransform { mean: 1.5, std: 0.3 }, 14);
        let text = serde_json::to_string(&m).unwrap();
        let back: RewardModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
