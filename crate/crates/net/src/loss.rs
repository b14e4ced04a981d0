//! Gaussian policy densities and the training losses with their gradients.

use crate::Tensor2;
use occsim_core::smp::{squash_log_det_jacobian, ActionBounds};
use std::f64::consts::{E, PI};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

pub fn clamp_log_std(raw: f64) -> f64 {
    raw.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Diagonal Gaussian log-density of the pre-squash action.
pub fn gaussian_log_prob(x: [f64; 2], mu: [f64; 2], log_std: [f64; 2]) -> f64 {
    (0..2)
        .map(|i| {
            let z = (x[i] - mu[i]) / log_std[i].exp();
            -0.5 * z * z - log_std[i] - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Log-density of the squashed action, from its pre-squash sample.
pub fn action_log_prob(raw: [f64; 2], mu: [f64; 2], log_std: [f64; 2], bounds: &ActionBounds) -> f64 {
    gaussian_log_prob(raw, mu, log_std) - squash_log_det_jacobian(raw, bounds)
}

/// Entropy of the pre-squash Gaussian.
pub fn gaussian_entropy(log_std: [f64; 2]) -> f64 {
    log_std.iter().map(|s| s + 0.5 * (2.0 * PI * E).ln()).sum()
}

/// Clipped surrogate term for one sample: `(value, d value / d ratio)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ActorLoss {
    pub loss: f64,
    pub surrogate: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// `B x 2`
    pub grad_mu: Tensor2,
    /// With respect to the unclamped log-std parameters.
    pub grad_log_std: [f64; 2],
}

/// `-mean(min(r A, clip(r) A)) - ent_coef * entropy` over a minibatch.
#[allow(clippy::too_many_arguments)]
pub fn ppo_actor_loss(
    mu: &Tensor2,
    log_std_param: [f64; 2],
    raw_actions: &[[f64; 2]],
    old_log_probs: &[f64],
    advantages: &[f64],
    bounds: &ActionBounds,
    clip_eps: f64,
    ent_coef: f64,
) -> ActorLoss {
    let n = raw_actions.len();
    let log_std = log_std_param.map(clamp_log_std);
    let std = log_std.map(f64::exp);
    let mut grad_mu = Tensor2::zeros(n, 2);
    let mut grad_ls = [0.0; 2];
    let (mut surrogate, mut kl, mut clipped) = (0.0, 0.0, 0);
    for b in 0..n {
        let m = [mu.get(b, 0), mu.get(b, 1)];
        let logp = action_log_prob(raw_actions[b], m, log_std, bounds);
        let log_ratio = logp - old_log_probs[b];
        let ratio = log_ratio.exp();
        let (s, ds_dr) = clipped_surrogate(ratio, advantages[b], clip_eps);
        surrogate += s;
        kl += ratio - 1.0 - log_ratio;
        clipped += ((ratio - 1.0).abs() > clip_eps) as usize;
        // d(-s/n)/d logp = -ds/dr * r / n
        let g = -ds_dr * ratio / n as f64;
        for i in 0..2 {
            let z = (raw_actions[b][i] - m[i]) / std[i];
            grad_mu.set(b, i, g * z / std[i]);
            grad_ls[i] += g * (z * z - 1.0);
        }
    }
    let entropy = gaussian_entropy(log_std);
    for (i, g) in grad_ls.iter_mut().enumerate() {
        *g -= ent_coef;
        if log_std_param[i] < LOG_STD_MIN || log_std_param[i] > LOG_STD_MAX {
            *g = 0.0;
        }
    }
    let nf = n.max(1) as f64;
    ActorLoss {
        loss: -surrogate / nf - ent_coef * entropy,
        surrogate: surrogate / nf,
        entropy,
        approx_kl: kl / nf,
        clip_fraction: clipped as f64 / nf,
        grad_mu,
        grad_log_std: grad_ls,
    }
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len().max(1) as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_prob_matches_hand_evaluated_density() {
        // N(0.5; 0, 1) * N(-1; 1, e^-0.5)
        let p = gaussian_log_prob([0.5, -1.0], [0.0, 1.0], [0.0, -0.5]);
        let s2 = (-0.5f64).exp();
        let d1 = (-0.125f64).exp() / (2.0 * PI).sqrt();
        let d2 = (-0.5 * (2.0 / s2) * (2.0 / s2)).exp() / (s2 * (2.0 * PI).sqrt());
        assert!((p - (d1 * d2).ln()).abs() < 1e-9);
    }

    #[test]
    fn clipped_branch_is_chosen_for_large_positive_ratio() {
        let (v, g) = clipped_surrogate(2.0, 1.5, 0.2);
        assert_eq!(v, 1.2 * 1.5);
        assert_eq!(g, 0.0);
        // negative advantage keeps the unclipped, more pessimistic branch
        let (v, g) = clipped_surrogate(2.0, -1.0, 0.2);
        assert_eq!((v, g), (-2.0, -1.0));
        let (v, g) = clipped_surrogate(0.5, -1.0, 0.2);
        assert_eq!((v, g), (-0.8, 0.0));
        let (v, g) = clipped_surrogate(0.5, 1.0, 0.2);
        assert_eq!((v, g), (0.5, 1.0));
    }

    #[test]
    fn unit_ratio_surrogate_is_mean_advantage() {
        let mu = Tensor2::zeros(3, 2);
        let raw = [[0.1, 0.2], [-0.3, 0.0], [1.0, -1.0]];
        let bounds = ActionBounds::default();
        let old: Vec<f64> = raw.iter().map(|&a| action_log_prob(a, [0.0; 2], [0.0; 2], &bounds)).collect();
        let adv = [1.0, -2.0, 1.0];
        let l = ppo_actor_loss(&mu, [0.0; 2], &raw, &old, &adv, &bounds, 0.2, 0.0);
        assert!(l.surrogate.abs() < 1e-15);
        assert!(l.approx_kl.abs() < 1e-15);
        assert_eq!(l.clip_fraction, 0.0);
    }

    #[test]
    fn clamped_log_std_receives_no_gradient() {
        let mu = Tensor2::zeros(1, 2);
        let bounds = ActionBounds::default();
        let l = ppo_actor_loss(&mu, [-10.0, 0.0], &[[0.3, 0.3]], &[0.0], &[1.0], &bounds, 0.2, 0.01);
        assert_eq!(l.grad_log_std[0], 0.0);
        assert!(l.grad_log_std[1] != 0.0);
        assert_eq!(clamp_log_std(-10.0).exp(), (-5.0f64).exp());
    }

    #[test]
    fn mse_gradient_is_scaled_residual() {
        let (l, g) = mse(&[1.0, 3.0], &[0.0, 1.0]);
        assert_eq!(l, 2.5);
        assert_eq!(g, vec![1.0, 2.0]);
    }
}
