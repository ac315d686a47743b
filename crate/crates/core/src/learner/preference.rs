//! Ranked preference pairs and the preference / difference / reward-fit losses.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{sigmoid, softplus};

/// Rewards closer than this are ties (`mu = 0.5`).
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSet {
    /// Strategy indices by descending reward; ties keep index order.
    pub sigma: Vec<usize>,
    /// `(preferred, other)` strategy indices.
    pub pairs: Vec<(usize, usize)>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
}

impl PreferenceSet {
    /// Multiplies every reward difference by `s` (for standardized rewards).
    pub fn scale_delta(mut self, s: f64) -> Self {
        self.delta.iter_mut().for_each(|d| *d *= s);
        self
    }
}

/// Descending order by reward, lower index first among equal rewards.
pub fn rank_descending(rewards: &[f64]) -> Vec<usize> {
    let mut sigma: Vec<usize> = (0..rewards.len()).collect();
    sigma.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]));
    sigma
}

fn label(ra: f64, rb: f64, tie_tol: f64) -> (f64, f64) {
    let delta = ra - rb;
    if delta.abs() <= tie_tol {
        (0.5, 0.0)
    } else {
        (1.0, delta)
    }
}

/// The `M - 1` adjacent pairs of the reward ranking.
pub fn build_preference_set(rewards: &[f64], tie_tol: f64) -> PreferenceSet {
    let sigma = rank_descending(rewards);
    let mut pairs = Vec::with_capacity(sigma.len().saturating_sub(1));
    let mut mu = Vec::with_capacity(pairs.capacity());
    let mut delta = Vec::with_capacity(pairs.capacity());
    for w in sigma.windows(2) {
        let (m, d) = label(rewards[w[0]], rewards[w[1]], tie_tol);
        pairs.push((w[0], w[1]));
        mu.push(m);
        delta.push(d);
    }
    PreferenceSet { sigma, pairs, mu, delta }
}

/// Unranked pair sampling: a random chain through all strategies (so each
/// appears in some pair), then uniform random pairs up to `budget`. Each
/// pair is oriented so the first element has the higher reward.
pub fn sample_unranked_pairs<R: Rng>(rewards: &[f64], budget: usize, tie_tol: f64, rng: &mut R) -> PreferenceSet {
    let m = rewards.len();
    let mut raw: Vec<(usize, usize)> = Vec::with_capacity(budget);
    if m >= 2 {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        raw.extend(order.windows(2).map(|w| (w[0], w[1])).take(budget));
        while raw.len() < budget {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            raw.push((a, b));
        }
    }
    let mut pairs = Vec::with_capacity(raw.len());
    let mut mu = Vec::with_capacity(raw.len());
    let mut delta = Vec::with_capacity(raw.len());
    for (a, b) in raw {
        let (a, b) = if rewards[a] >= rewards[b] { (a, b) } else { (b, a) };
        let (mm, d) = label(rewards[a], rewards[b], tie_tol);
        pairs.push((a, b));
        mu.push(mm);
        delta.push(d);
    }
    PreferenceSet { sigma: rank_descending(rewards), pairs, mu, delta }
}

/// Number of unordered pairs under full pairing.
pub fn full_pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Probability that the first strategy of a pair is preferred.
pub fn preference_probability(r_first: f64, r_second: f64) -> f64 {
    sigmoid(r_first - r_second)
}

fn instance_preference_loss(rhat: &[f64], p: &PreferenceSet) -> f64 {
    p.pairs
        .iter()
        .zip(&p.mu)
        .map(|(&(a, b), &mu)| {
            let z = rhat[a] - rhat[b];
            mu * softplus(-z) + (1.0 - mu) * softplus(z)
        })
        .sum()
}

fn instance_diff_loss(rhat: &[f64], p: &PreferenceSet) -> f64 {
    p.pairs
        .iter()
        .zip(&p.delta)
        .map(|(&(a, b), &d)| {
            let e = rhat[a] - rhat[b] - d;
            e * e
        })
        .sum()
}

fn mean_over(n: usize, total: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Mean over instances of the summed pairwise cross-entropy.
pub fn loss_preference(rhat: &[Vec<f64>], prefs: &[PreferenceSet]) -> f64 {
    mean_over(rhat.len(), rhat.iter().zip(prefs).map(|(r, p)| instance_preference_loss(r, p)).sum())
}

/// Mean over instances of the summed squared difference errors.
pub fn loss_diff(rhat: &[Vec<f64>], prefs: &[PreferenceSet]) -> f64 {
    mean_over(rhat.len(), rhat.iter().zip(prefs).map(|(r, p)| instance_diff_loss(r, p)).sum())
}

pub fn loss_total(l_p: f64, l_d: f64, lambda1: f64, lambda2: f64) -> f64 {
    lambda1 * l_p + lambda2 * l_d
}

/// `(1 / N) (1 / M) sum_i sum_j (r_ij - rhat_ij)^2`.
pub fn loss_reward_fit(rhat: &[Vec<f64>], rewards: &[Vec<f64>]) -> f64 {
    let total: f64 = rhat
        .iter()
        .zip(rewards)
        .map(|(p, r)| {
            let m = r.len().max(1) as f64;
            p.iter().zip(r).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() / m
        })
        .sum();
    mean_over(rhat.len(), total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ranked_pairs_for_small_row() {
        let p = build_preference_set(&[3.0, 1.0, 2.0], TIE_TOL);
        assert_eq!(p.sigma, vec![0, 2, 1]);
        assert_eq!(p.pairs, vec![(0, 2), (2, 1)]);
        assert_eq!(p.mu, vec![1.0, 1.0]);
        assert_eq!(p.delta, vec![1.0, 1.0]);
    }

    #[test]
    fn all_ties() {
        let p = build_preference_set(&[2.0; 4], TIE_TOL);
        assert_eq!(p.sigma, vec![0, 1, 2, 3]);
        assert!(p.mu.iter().all(|&m| m == 0.5));
        assert!(p.delta.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn pair_counts() {
        let rewards: Vec<f64> = (0..100).map(|k| (k * 37 % 100) as f64).collect();
        assert_eq!(build_preference_set(&rewards, TIE_TOL).pairs.len(), 99);
        assert_eq!(full_pair_count(100), 4950);
    }

    #[test]
    fn unranked_pairs_cover_every_strategy() {
        let rewards = [0.5, 2.0, -1.0, 2.0, 7.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_unranked_pairs(&rewards, 9, TIE_TOL, &mut rng);
        assert_eq!(p.pairs.len(), 9);
        for j in 0..5 {
            assert!(p.pairs.iter().any(|&(a, b)| a == j || b == j));
        }
        for (k, &(a, b)) in p.pairs.iter().enumerate() {
            assert_ne!(a, b);
            assert!(rewards[a] >= rewards[b]);
            assert!(p.delta[k] >= 0.0);
        }
    }

    #[test]
    fn equal_predictions_give_half_and_ln2() {
        assert_eq!(preference_probability(0.3, 0.3), 0.5);
        let p = build_preference_set(&[1.0, 0.0], TIE_TOL);
        let l = loss_preference(&[vec![0.7, 0.7]], &[p]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn large_margin_contribution() {
        let p = build_preference_set(&[1.0, 0.0], TIE_TOL);
        let l = loss_preference(&[vec![10.0, 0.0]], &[p]);
        let expect = -(1.0 / (1.0 + (-10.0f64).exp())).ln();
        assert!((l - expect).abs() < 1e-15);
        assert!((l - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn diff_total_and_fit_examples() {
        let p = build_preference_set(&[1.0, 0.0], TIE_TOL);
        assert_eq!(loss_diff(&[vec![0.0, 0.0]], &[p.clone()]), 1.0);
        assert_eq!(loss_diff(&[vec![3.0, 2.0]], &[p]), 0.0);
        assert!((loss_total(2.0, 4.0, 0.85, 0.15) - 2.3).abs() < 1e-15);
        assert_eq!(loss_total(2.0, 4.0, 0.0, 0.0), 0.0);
        assert_eq!(loss_reward_fit(&[vec![0.0, 2.0]], &[vec![0.0, 2.0]]), 0.0);
        assert_eq!(loss_reward_fit(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]]), 0.5);
    }

    #[test]
    fn losses_match_straight_line_formulas() {
        let rewards: [f64; 5] = [0.4, -1.0, 2.5, 2.5, 0.1];
        let rhat: [f64; 5] = [0.3, 0.9, -0.2, 1.4, 0.05];
        let p = build_preference_set(&rewards, TIE_TOL);
        let mut lp = 0.0;
        let mut ld = 0.0;
        for j in 0..4 {
            let (a, b) = (p.sigma[j], p.sigma[j + 1]);
            let prob = rhat[a].exp() / (rhat[a].exp() + rhat[b].exp());
            let mu = if (rewards[a] - rewards[b]).abs() <= TIE_TOL { 0.5 } else { 1.0 };
            lp -= mu * prob.ln() + (1.0 - mu) * (1.0 - prob).ln();
            let delta = rewards[a] - rewards[b];
            let delta = if mu == 0.5 { 0.0 } else { delta };
            ld += (rhat[a] - rhat[b] - delta).powi(2);
        }
        assert!((loss_preference(&[rhat.to_vec()], &[p.clone()]) - lp).abs() < 1e-12);
        assert!((loss_diff(&[rhat.to_vec()], &[p]) - ld).abs() < 1e-12);
        let fit: f64 = rewards.iter().zip(&rhat).map(|(r, h)| (r - h) * (r - h)).sum::<f64>() / 5.0;
        assert!((loss_reward_fit(&[rhat.to_vec()], &[rewards.to_vec()]) - fit).abs() < 1e-12);
    }

    #[test]
    fn row_shift_leaves_losses_unchanged() {
        let rewards = [0.4, -1.0, 2.5];
        let rhat = vec![0.3, 0.9, -0.2];
        let shifted: Vec<f64> = rhat.iter().map(|v| v + 4.2).collect();
        let p = build_preference_set(&rewards, TIE_TOL);
        let a = loss_preference(&[rhat.clone()], &[p.clone()]);
        let b = loss_preference(&[shifted.clone()], &[p.clone()]);
        assert!((a - b).abs() < 1e-12);
        assert!((loss_diff(&[rhat], &[p.clone()]) - loss_diff(&[shifted], &[p])).abs() < 1e-12);
    }
}
