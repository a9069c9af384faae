//! Reward shaping: potential-based progress term and a distillation novelty
//! bonus from a frozen random network and a trained predictor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EgoState, Scenario};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, DenseNet, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    /// Upper clamp `L` of the novelty reward.
    pub novelty_cap: f64,
    pub gamma: f64,
    pub rnd_lr: f64,
    pub std_floor: f64,
    /// States observed before the novelty term starts returning non-neutral values.
    pub warmup_states: u64,
    pub rnd_hidden: Vec<usize>,
    pub rnd_output: usize,
    pub rnd_batch: usize,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            novelty_cap: 5.0,
            gamma: 0.97,
            rnd_lr: 1e-4,
            std_floor: 1e-6,
            warmup_states: 100,
            rnd_hidden: vec![64, 64],
            rnd_output: 32,
            rnd_batch: 64,
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.novelty_cap >= 1.0) {
            return Err(Error::config("shaping.novelty_cap", "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("shaping.gamma", "must lie in (0, 1)"));
        }
        if !(self.rnd_lr > 0.0) {
            return Err(Error::config("shaping.rnd_lr", "must be > 0"));
        }
        if !(self.std_floor > 0.0) {
            return Err(Error::config("shaping.std_floor", "must be > 0"));
        }
        if self.rnd_output == 0 || self.rnd_hidden.iter().any(|&w| w == 0) {
            return Err(Error::config("shaping.rnd_hidden", "widths must be > 0"));
        }
        if self.rnd_batch == 0 {
            return Err(Error::config("shaping.rnd_batch", "must be >= 1"));
        }
        Ok(())
    }
}

/// Normalized potential: minus the remaining longitudinal distance to the target.
pub fn potential(ego: &EgoState, scenario: &Scenario) -> f64 {
    -(scenario.target_lon - ego.x_lon) / scenario.road_length
}

/// `gamma * phi(s') - phi(s)`.
pub fn potential_reward(s: &EgoState, s_next: &EgoState, scenario: &Scenario, gamma: f64) -> f64 {
    gamma * potential(s_next, scenario) - potential(s, scenario)
}

pub fn ultimate_reward(base: f64, progress: f64, novelty: f64) -> f64 {
    base + progress + novelty
}

/// Welford running mean / population variance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }
}

/// Frozen random target network plus a predictor trained to imitate it.
#[derive(Debug, Clone)]
pub struct RndPair {
    fixed: DenseNet,
    adjustable: DenseNet,
    adam: AdamState,
    stats: RunningStats,
    config: ShapingConfig,
}

impl RndPair {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, config: &ShapingConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let fixed = DenseNet::mlp(input_dim, &config.rnd_hidden, config.rnd_output, rng)?;
        let adjustable = DenseNet::mlp(input_dim, &config.rnd_hidden, config.rnd_output, rng)?;
        Self::from_nets(fixed, adjustable, config)
    }

    pub fn from_nets(fixed: DenseNet, adjustable: DenseNet, config: &ShapingConfig) -> Result<Self> {
        if fixed.widths() != adjustable.widths() || fixed.activations() != adjustable.activations() {
            return Err(Error::shape(
                "RndPair",
                format!("{:?}", fixed.widths()),
                format!("{:?}", adjustable.widths()),
            ));
        }
        let adam = AdamState::new(adjustable.num_params(), config.rnd_lr);
        Ok(Self {
            fixed,
            adjustable,
            adam,
            stats: RunningStats::default(),
            config: config.clone(),
        })
    }

    pub fn fixed_net(&self) -> &DenseNet {
        &self.fixed
    }

    pub fn adjustable_net(&self) -> &DenseNet {
        &self.adjustable
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    /// `|| f(s | phi) - f(s) ||_1`.
    pub fn raw_novelty(&self, state: &[f64]) -> Result<f64> {
        let x = Tensor::vector(state.to_vec())?;
        let target = self.fixed.forward(&x)?;
        let pred = self.adjustable.forward(&x)?;
        Ok(target
            .data()
            .iter()
            .zip(pred.data())
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    fn clamp_reward(&self, raw: f64) -> f64 {
        if self.stats.count() < self.config.warmup_states {
            return 1.0;
        }
        let std = self.stats.std().max(self.config.std_floor);
        let normalized = ((raw - self.stats.mean()) / std).max(0.0);
        (normalized + 1.0).min(self.config.novelty_cap)
    }

    /// Novelty reward for `s_next`; folds the raw novelty into the running
    /// statistics after the reward has been computed.
    pub fn ngu_reward(&mut self, s_next: &[f64]) -> Result<f64> {
        let raw = self.raw_novelty(s_next)?;
        let r = self.clamp_reward(raw);
        self.stats.push(raw);
        Ok(r)
    }

    /// Same as [`Self::ngu_reward`] without touching the statistics.
    pub fn peek_reward(&self, s_next: &[f64]) -> Result<f64> {
        Ok(self.clamp_reward(self.raw_novelty(s_next)?))
    }

    /// One Adam step of the predictor on the mean squared output difference.
    /// Returns the loss before the step.
    pub fn update(&mut self, states: &[&[f64]]) -> Result<f64> {
        if states.is_empty() {
            return Err(Error::Precondition("update_rnd needs a nonempty batch".into()));
        }
        let d = self.fixed.input_width();
        let mut data = Vec::with_capacity(states.len() * d);
        for s in states {
            if s.len() != d {
                return Err(Error::shape("RndPair::update", d, s.len()));
            }
            data.extend_from_slice(s);
        }
        let x = Tensor::matrix(states.len(), d, data)?;
        let target = self.fixed.forward(&x)?;
        let (pred, cache) = self.adjustable.forward_cached(&x)?;
        let n = (states.len() * self.fixed.output_width()) as f64;
        let mut loss = 0.0;
        let upstream: Vec<f64> = pred
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| {
                let diff = p - t;
                loss += diff * diff;
                2.0 * diff / n
            })
            .collect();
        loss /= n;
        let up = Tensor::matrix(states.len(), self.fixed.output_width(), upstream)?;
        let grads = self.adjustable.backward_cached(&cache, &up)?;
        adam_step(self.adjustable.params_mut(), &grads.params, &mut self.adam)?;
        Ok(loss)
    }
}
