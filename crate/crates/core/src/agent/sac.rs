//! Networks and losses of pixel SAC with explicit gradients.
//!
//! Every loss returns its value together with parameter gradients so the
//! same code serves training (`f32`) and finite-difference checks (`f64`).
//! Sampling noise is passed in explicitly, which makes each loss a
//! deterministic function of its parameters.

use rand::Rng;

use crate::error::Result;
use crate::nn::{Encoder, EncoderCache, EncoderConfig, Mlp, MlpCache, Params, Scalar};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
const LN_2: f64 = std::f64::consts::LN_2;

/// Online and target networks plus the log temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SacNets<T> {
    pub encoder: Encoder<T>,
    pub actor: Mlp<T>,
    pub critics: [Mlp<T>; 2],
    pub target_encoder: Encoder<T>,
    pub target_critics: [Mlp<T>; 2],
    pub log_alpha: T,
    pub action_dim: usize,
    pub log_std_range: (f64, f64),
}

impl<T: Scalar> SacNets<T> {
    pub fn new<R: Rng + ?Sized>(
        encoder: EncoderConfig,
        hidden: &[usize],
        action_dim: usize,
        log_std_range: (f64, f64),
        init_alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let latent = encoder.latent_dim;
        let encoder = Encoder::new(encoder, rng)?;
        let dims = |input: usize, out: usize| {
            let mut d = vec![input];
            d.extend_from_slice(hidden);
            d.push(out);
            d
        };
        let actor = Mlp::new(&dims(latent, 2 * action_dim), rng);
        let critics = [Mlp::new(&dims(latent + action_dim, 1), rng), Mlp::new(&dims(latent + action_dim, 1), rng)];
        Ok(SacNets {
            target_encoder: encoder.clone(),
            target_critics: critics.clone(),
            encoder,
            actor,
            critics,
            log_alpha: T::from_f64(init_alpha.ln()),
            action_dim,
            log_std_range,
        })
    }

    pub fn alpha(&self) -> T {
        self.log_alpha.exp()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.latent_dim()
    }
}

/// A batch of tanh-squashed Gaussian samples and what their gradients need.
#[derive(Debug, Clone)]
pub struct PolicySample<T> {
    pub n: usize,
    pub action_dim: usize,
    pub action: Vec<T>,
    pub log_prob: Vec<T>,
    pub mean: Vec<T>,
    std: Vec<T>,
    eps: Vec<T>,
    raw_log_std: Vec<T>,
    half_range: T,
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// `log(1 − tanh²(u))` without cancellation.
pub fn log_one_minus_tanh_sq<T: Scalar>(u: T) -> T {
    let two = T::from_f64(2.0);
    two * (T::from_f64(LN_2) - u - softplus(-two * u))
}

/// Maps raw head outputs into `(min, max)` via tanh.
pub fn squash_log_std<T: Scalar>(raw: T, range: (f64, f64)) -> T {
    let (lo, hi) = (T::from_f64(range.0), T::from_f64(range.1));
    lo + T::from_f64(0.5) * (hi - lo) * (raw.tanh() + T::one())
}

/// Samples actions from actor outputs (`[mean | raw log-std]` per row) with
/// standard-normal noise `eps`.
pub fn policy_sample<T: Scalar>(out: &[T], eps: &[T], n: usize, action_dim: usize, range: (f64, f64)) -> PolicySample<T> {
    assert_eq!(out.len(), n * 2 * action_dim, "actor output shape");
    assert_eq!(eps.len(), n * action_dim, "noise shape");
    let a = action_dim;
    let mut s = PolicySample {
        n,
        action_dim: a,
        action: vec![T::zero(); n * a],
        log_prob: vec![T::zero(); n],
        mean: vec![T::zero(); n * a],
        std: vec![T::zero(); n * a],
        eps: eps.to_vec(),
        raw_log_std: vec![T::zero(); n * a],
        half_range: T::from_f64(0.5 * (range.1 - range.0)),
    };
    let half = T::from_f64(0.5);
    for b in 0..n {
        let mut lp = T::zero();
        for i in 0..a {
            let k = b * a + i;
            let mean = out[b * 2 * a + i];
            let raw = out[b * 2 * a + a + i];
            let ls = squash_log_std(raw, range);
            let std = ls.exp();
            let u = mean + std * eps[k];
            s.mean[k] = mean;
            s.raw_log_std[k] = raw;
            s.std[k] = std;
            s.action[k] = u.tanh();
            lp += -half * eps[k] * eps[k] - ls - T::from_f64(HALF_LN_2PI) - log_one_minus_tanh_sq(u);
        }
        s.log_prob[b] = lp;
    }
    s
}

/// Gradient with respect to the actor outputs, given upstream gradients for
/// the actions and log-probabilities (noise held fixed).
pub fn policy_backward<T: Scalar>(s: &PolicySample<T>, d_action: &[T], d_log_prob: &[T]) -> Vec<T> {
    let a = s.action_dim;
    let two = T::from_f64(2.0);
    let mut d = vec![T::zero(); s.n * 2 * a];
    for b in 0..s.n {
        for i in 0..a {
            let k = b * a + i;
            let act = s.action[k];
            let du = d_action[k] * (T::one() - act * act) + d_log_prob[b] * two * act;
            let dls = du * s.std[k] * s.eps[k] - d_log_prob[b];
            let t = s.raw_log_std[k].tanh();
            d[b * 2 * a + i] = du;
            d[b * 2 * a + a + i] = dls * s.half_range * (T::one() - t * t);
        }
    }
    d
}

/// `tanh(mean)` for each row of actor outputs.
pub fn deterministic_action<T: Scalar>(out: &[T], n: usize, action_dim: usize) -> Vec<T> {
    (0..n)
        .flat_map(|b| (0..action_dim).map(move |i| (b, i)))
        .map(|(b, i)| out[b * 2 * action_dim + i].tanh())
        .collect()
}

fn concat_rows<T: Scalar>(z: &[T], a: &[T], n: usize) -> Vec<T> {
    let (l, ad) = (z.len() / n.max(1), a.len() / n.max(1));
    let mut out = Vec::with_capacity(n * (l + ad));
    for b in 0..n {
        out.extend_from_slice(&z[b * l..(b + 1) * l]);
        out.extend_from_slice(&a[b * ad..(b + 1) * ad]);
    }
    out
}

fn split_latent_grad<T: Scalar>(dinput: &[T], n: usize, l: usize, ad: usize, dz: &mut [T], da: Option<&mut [T]>) {
    let w = l + ad;
    for b in 0..n {
        for j in 0..l {
            dz[b * l + j] += dinput[b * w + j];
        }
    }
    if let Some(da) = da {
        for b in 0..n {
            for j in 0..ad {
                da[b * ad + j] += dinput[b * w + l + j];
            }
        }
    }
}

/// Bootstrapped critic targets `r + γ(min Q̄(z̄', ã') − α log π(ã'|z̄'))`,
/// where `z̄'` comes from the target encoder. No gradients flow from here.
pub fn critic_target<T: Scalar>(
    nets: &SacNets<T>,
    next_obs: &[T],
    reward: &[T],
    eps: &[T],
    gamma: f64,
    n: usize,
) -> Result<Vec<T>> {
    let z = nets.target_encoder.encode(next_obs, n)?;
    let out = nets.actor.forward(&z, n).out;
    let s = policy_sample(&out, eps, n, nets.action_dim, nets.log_std_range);
    let input = concat_rows(&z, &s.action, n);
    let q1 = nets.target_critics[0].forward(&input, n).out;
    let q2 = nets.target_critics[1].forward(&input, n).out;
    let (g, alpha) = (T::from_f64(gamma), nets.alpha());
    Ok((0..n).map(|b| reward[b] + g * (q1[b].min(q2[b]) - alpha * s.log_prob[b])).collect())
}

/// Clean-batch latents for the invariance penalty; `mask[b]` is false where
/// the mixed sample is the clean one, which contributes exactly zero.
pub struct RegTarget<'a, T> {
    pub clean_latent: &'a [T],
    pub mask: &'a [bool],
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct CriticGrads<T> {
    pub critic_loss: f64,
    pub reg_loss: f64,
    pub q_mean: f64,
    pub encoder: Encoder<T>,
    pub critics: [Mlp<T>; 2],
}

/// Penalty `mean_b ‖sg(clean_b) − aug_b‖²` and its gradient with respect to
/// the augmented latents. The clean side receives no gradient.
pub fn reg_terms<T: Scalar>(clean: &[T], aug: &[T], mask: &[bool], n: usize) -> (f64, Vec<T>) {
    let l = aug.len() / n.max(1);
    let scale = T::from_f64(2.0 / n as f64);
    let mut loss = 0.0;
    let mut d = vec![T::zero(); aug.len()];
    for b in (0..n).filter(|b| mask[*b]) {
        for j in 0..l {
            let diff = aug[b * l + j] - clean[b * l + j];
            loss += diff.as_f64() * diff.as_f64();
            d[b * l + j] = scale * diff;
        }
    }
    (loss / n as f64, d)
}

/// Critic loss `mean over batch and both critics of (Q − y)²`, plus the
/// optional λ-weighted invariance penalty on the same encoder pass.
pub fn critic_loss<T: Scalar>(
    nets: &SacNets<T>,
    obs: &[T],
    action: &[T],
    target: &[T],
    reg: Option<RegTarget<'_, T>>,
    n: usize,
) -> Result<(CriticGrads<T>, EncoderCache<T>)> {
    let cache = nets.encoder.forward(obs, n)?;
    let (l, ad) = (nets.latent_dim(), nets.action_dim);
    let input = concat_rows(&cache.out, action, n);
    let mut dz = vec![T::zero(); n * l];
    let mut grads = [nets.critics[0].zeros_like(), nets.critics[1].zeros_like()];
    let (mut loss, mut q_sum) = (0.0, 0.0);
    let inv_n = T::from_f64(1.0 / n as f64);
    for i in 0..2 {
        let c = nets.critics[i].forward(&input, n);
        let dq: Vec<T> = (0..n)
            .map(|b| {
                let e = c.out[b] - target[b];
                loss += e.as_f64() * e.as_f64();
                q_sum += c.out[b].as_f64();
                e * inv_n
            })
            .collect();
        let dinput = nets.critics[i].backward(&c, &dq, Some(&mut grads[i]), true).expect("input gradient");
        split_latent_grad(&dinput, n, l, ad, &mut dz, None);
    }
    let critic_loss = loss / (2.0 * n as f64);
    let mut reg_loss = 0.0;
    if let Some(r) = reg {
        let (rl, d) = reg_terms(r.clean_latent, &cache.out, r.mask, n);
        reg_loss = rl;
        let lam = T::from_f64(r.lambda);
        for (a, b) in dz.iter_mut().zip(d) {
            *a += lam * b;
        }
    }
    let mut enc = nets.encoder.zeros_like();
    nets.encoder.backward(&cache, &dz, &mut enc);
    Ok((
        CriticGrads { critic_loss, reg_loss, q_mean: q_sum / (2.0 * n as f64), encoder: enc, critics: grads },
        cache,
    ))
}

/// Invariance penalty between encodings of clean and augmented observations.
/// Returns the loss, the encoder gradient through the augmented branch, and
/// the encoder gradient through the clean branch, which is identically zero.
pub fn encoder_reg_loss<T: Scalar>(
    encoder: &Encoder<T>,
    clean_obs: &[T],
    aug_obs: &[T],
    n: usize,
) -> Result<(f64, Encoder<T>, Encoder<T>)> {
    let clean = encoder.forward(clean_obs, n)?;
    let aug = encoder.forward(aug_obs, n)?;
    let mask = vec![true; n];
    let (loss, d_aug) = reg_terms(&clean.out, &aug.out, &mask, n);
    let mut g_aug = encoder.zeros_like();
    encoder.backward(&aug, &d_aug, &mut g_aug);
    let d_clean = vec![T::zero(); clean.out.len()];
    let mut g_clean = encoder.zeros_like();
    encoder.backward(&clean, &d_clean, &mut g_clean);
    Ok((loss, g_aug, g_clean))
}

#[derive(Debug, Clone)]
pub struct ActorGrads<T> {
    pub loss: f64,
    pub actor: Mlp<T>,
    pub sample: PolicySample<T>,
    pub q_mean: f64,
}

/// Actor loss `mean(α log π(ã|z) − min_i Q_i(z, ã))` on detached latents.
/// Only actor gradients are produced.
pub fn actor_loss<T: Scalar>(nets: &SacNets<T>, latent: &[T], eps: &[T], n: usize) -> ActorGrads<T> {
    let (l, ad) = (nets.latent_dim(), nets.action_dim);
    let out: MlpCache<T> = nets.actor.forward(latent, n);
    let s = policy_sample(&out.out, eps, n, ad, nets.log_std_range);
    let input = concat_rows(latent, &s.action, n);
    let c = [nets.critics[0].forward(&input, n), nets.critics[1].forward(&input, n)];
    let alpha = nets.alpha();
    let inv_n = T::from_f64(1.0 / n as f64);
    let pick: Vec<usize> = (0..n).map(|b| usize::from(c[1].out[b] < c[0].out[b])).collect();
    let mut loss = 0.0;
    let mut q_sum = 0.0;
    for b in 0..n {
        let q = c[pick[b]].out[b];
        q_sum += q.as_f64();
        loss += (alpha * s.log_prob[b] - q).as_f64();
    }
    let mut d_action = vec![T::zero(); n * ad];
    let mut dz_unused = vec![T::zero(); n * l];
    for i in 0..2 {
        let dq: Vec<T> = (0..n).map(|b| if pick[b] == i { -inv_n } else { T::zero() }).collect();
        let dinput = nets.critics[i].backward(&c[i], &dq, None, true).expect("input gradient");
        split_latent_grad(&dinput, n, l, ad, &mut dz_unused, Some(&mut d_action));
    }
    let d_lp = vec![alpha * inv_n; n];
    let d_out = policy_backward(&s, &d_action, &d_lp);
    let mut g = nets.actor.zeros_like();
    nets.actor.backward(&out, &d_out, Some(&mut g), false);
    ActorGrads { loss: loss / n as f64, actor: g, sample: s, q_mean: q_sum / n as f64 }
}

/// Temperature loss `mean(−α (log π + target_entropy))` and its derivative
/// with respect to `log α`.
pub fn alpha_loss<T: Scalar>(log_alpha: T, log_probs: &[T], target_entropy: f64) -> (f64, T) {
    let alpha = log_alpha.exp().as_f64();
    let m = log_probs.iter().map(|v| v.as_f64() + target_entropy).sum::<f64>() / log_probs.len().max(1) as f64;
    (-alpha * m, T::from_f64(-alpha * m))
}

/// Moves every target network toward its online network.
pub fn polyak_targets<T: Scalar>(nets: &mut SacNets<T>, critic_tau: f64, encoder_tau: f64) {
    nets.target_critics.polyak_from(&nets.critics, critic_tau);
    nets.target_encoder.polyak_from(&nets.encoder, encoder_tau);
}
