//! Tanh-squashed diagonal Gaussian policy head.

use std::f64::consts::{LN_2, PI};

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SquashedGaussianHead {
    pub mu: Vec<f64>,
    /// Already clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
    /// Action half-range; actions lie in `(-scale, scale)`.
    pub scale: f64,
    /// Per-dimension flag: log_std was inside the clamp range (gradient flows).
    log_std_active: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    /// Pre-squash value `mu + std * noise`.
    pub pre_tanh: Vec<f64>,
}

/// Partial derivatives of a sample with respect to the head's raw inputs,
/// holding the noise fixed (reparameterization).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrads {
    pub daction_dmu: Vec<f64>,
    pub daction_dlog_std: Vec<f64>,
    pub dlogp_dmu: Vec<f64>,
    pub dlogp_dlog_std: Vec<f64>,
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
#[inline]
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let a = u.abs();
    2.0 * (LN_2 - a - (-2.0 * a).exp().ln_1p())
}

impl SquashedGaussianHead {
    pub fn new(mu: Vec<f64>, raw_log_std: Vec<f64>, scale: f64) -> Self {
        let log_std_active = raw_log_std
            .iter()
            .map(|&l| (LOG_STD_MIN..=LOG_STD_MAX).contains(&l))
            .collect();
        let log_std = raw_log_std
            .into_iter()
            .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        Self {
            mu,
            log_std,
            scale,
            log_std_active,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Deterministic action `scale * tanh(mu)`.
    pub fn mean_action(&self) -> Vec<f64> {
        self.mu.iter().map(|&m| self.squash(m)).collect()
    }

    #[inline]
    fn squash(&self, u: f64) -> f64 {
        let limit = self.scale * (1.0 - f64::EPSILON);
        (self.scale * u.tanh()).clamp(-limit, limit)
    }

    pub fn sample(&self, noise: &[f64]) -> SquashedSample {
        assert_eq!(noise.len(), self.dim(), "noise width must match head width");
        let log_norm = 0.5 * (2.0 * PI).ln() + self.scale.ln();
        let mut action = Vec::with_capacity(self.dim());
        let mut pre_tanh = Vec::with_capacity(self.dim());
        let mut log_prob = 0.0;
        for ((&mu, &ls), &z) in self.mu.iter().zip(&self.log_std).zip(noise) {
            let u = mu + ls.exp() * z;
            action.push(self.squash(u));
            pre_tanh.push(u);
            log_prob += -0.5 * z * z - ls - log_norm - log_one_minus_tanh_sq(u);
        }
        SquashedSample {
            action,
            log_prob,
            pre_tanh,
        }
    }

    pub fn sample_grads(&self, noise: &[f64], sample: &SquashedSample) -> SampleGrads {
        let d = self.dim();
        let mut g = SampleGrads {
            daction_dmu: Vec::with_capacity(d),
            daction_dlog_std: Vec::with_capacity(d),
            dlogp_dmu: Vec::with_capacity(d),
            dlogp_dlog_std: Vec::with_capacity(d),
        };
        for i in 0..d {
            let u = sample.pre_tanh[i];
            let th = u.tanh();
            let std = self.log_std[i].exp();
            let z = noise[i];
            let da_du = self.scale * (1.0 - th * th);
            let active = if self.log_std_active[i] { 1.0 } else { 0.0 };
            g.daction_dmu.push(da_du);
            g.daction_dlog_std.push(active * da_du * std * z);
            // d/du [-ln(1 - tanh^2 u)] = 2 tanh u
            g.dlogp_dmu.push(2.0 * th);
            g.dlogp_dlog_std.push(active * (-1.0 + 2.0 * th * std * z));
        }
        g
    }
}
