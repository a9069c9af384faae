//! Soft actor-critic with a fixed entropy temperature and twin critics.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_net, save_net};
use crate::nn::{adam_step, AdamState, DenseNet, SquashedGaussianHead, SquashedSample, Tensor};
use crate::replay::Transition;
use crate::rng::normal_vec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub action_scale: f64,
    /// Initial bias of the actor's log-std outputs.
    pub init_log_std: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            alpha: 0.005,
            gamma: 0.97,
            tau: 0.005,
            lr: 1e-4,
            batch_size: 64,
            actor_hidden: vec![256, 128],
            critic_hidden: vec![256, 128],
            action_scale: FRAC_PI_2,
            init_log_std: -3.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::config("sac.alpha", "must be >= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("sac.gamma", "must lie in (0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("sac.tau", "must lie in (0, 1]"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("sac.lr", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("sac.batch_size", "must be >= 1"));
        }
        if self.actor_hidden.iter().chain(&self.critic_hidden).any(|&w| w == 0) {
            return Err(Error::config("sac.actor_hidden", "widths must be > 0"));
        }
        if !(self.action_scale > 0.0) {
            return Err(Error::config("sac.action_scale", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// Policy network emitting `(mu, log_std)` per action dimension.
#[derive(Debug, Clone)]
pub struct Actor {
    pub net: DenseNet,
    pub adam: AdamState,
    pub scale: f64,
}

impl Actor {
    pub fn action_dim(&self) -> usize {
        self.net.output_width() / 2
    }

    fn split(&self, row: &[f64]) -> SquashedGaussianHead {
        let d = self.action_dim();
        SquashedGaussianHead::new(row[..d].to_vec(), row[d..].to_vec(), self.scale)
    }

    pub fn head(&self, s: &[f64]) -> Result<SquashedGaussianHead> {
        let out = self.net.forward(&Tensor::vector(s.to_vec())?)?;
        Ok(self.split(out.data()))
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], mode: ActMode, rng: &mut R) -> Result<Vec<f64>> {
        let head = self.head(s)?;
        Ok(match mode {
            ActMode::Deterministic => head.mean_action(),
            ActMode::Stochastic => head.sample(&normal_vec(rng, head.dim())).action,
        })
    }

    /// Samples one action per row of `states` with the given noise
    /// (`rows * action_dim` values).
    pub fn sample_batch(&self, states: &Tensor, noise: &[f64]) -> Result<Vec<(SquashedGaussianHead, SquashedSample)>> {
        let d = self.action_dim();
        if noise.len() != states.rows() * d {
            return Err(Error::shape("Actor::sample_batch noise", states.rows() * d, noise.len()));
        }
        let out = self.net.forward(states)?;
        Ok((0..states.rows())
            .map(|i| {
                let head = self.split(out.row(i));
                let sample = head.sample(&noise[i * d..(i + 1) * d]);
                (head, sample)
            })
            .collect())
    }
}

/// Twin soft-Q networks with their lagged targets.
#[derive(Debug, Clone)]
pub struct CriticPair {
    pub q1: DenseNet,
    pub q2: DenseNet,
    pub q1_target: DenseNet,
    pub q2_target: DenseNet,
    pub adam1: AdamState,
    pub adam2: AdamState,
}

impl CriticPair {
    /// `target <- tau * online + (1 - tau) * target`.
    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.q1_target.soft_update_from(&self.q1, tau)?;
        self.q2_target.soft_update_from(&self.q2, tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Critic {
    Q1,
    Q2,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    pub actor: Actor,
    pub critics: CriticPair,
    pub config: SacConfig,
    obs_dim: usize,
    action_dim: usize,
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        if r.len() != width {
            return Err(Error::shape("batch row", width, r.len()));
        }
        data.extend_from_slice(r);
        n += 1;
    }
    Tensor::matrix(n, width, data)
}

fn concat_rows(s: &Tensor, a: &[f64], action_dim: usize) -> Result<Tensor> {
    let n = s.rows();
    let mut data = Vec::with_capacity(n * (s.cols() + action_dim));
    for i in 0..n {
        data.extend_from_slice(s.row(i));
        data.extend_from_slice(&a[i * action_dim..(i + 1) * action_dim]);
    }
    Tensor::matrix(n, s.cols() + action_dim, data)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    obs_dim: usize,
    action_dim: usize,
    action_scale: f64,
    actor: String,
    q1: String,
    q2: String,
    q1_target: String,
    q2_target: String,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, config: &SacConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut actor_net = DenseNet::mlp(obs_dim, &config.actor_hidden, 2 * action_dim, rng)?;
        let n = actor_net.num_params();
        for b in &mut actor_net.params_mut()[n - action_dim..] {
            *b = config.init_log_std;
        }
        let q1 = DenseNet::mlp(obs_dim + action_dim, &config.critic_hidden, 1, rng)?;
        let q2 = DenseNet::mlp(obs_dim + action_dim, &config.critic_hidden, 1, rng)?;
        Self::from_nets(actor_net, q1.clone(), q2.clone(), q1, q2, config)
    }

    pub fn from_nets(
        actor: DenseNet,
        q1: DenseNet,
        q2: DenseNet,
        q1_target: DenseNet,
        q2_target: DenseNet,
        config: &SacConfig,
    ) -> Result<Self> {
        config.validate()?;
        let action_dim = actor.output_width() / 2;
        let obs_dim = actor.input_width();
        if actor.output_width() != 2 * action_dim || action_dim == 0 {
            return Err(Error::shape("actor output", "2 * action_dim", actor.output_width()));
        }
        for q in [&q1, &q2, &q1_target, &q2_target] {
            if q.input_width() != obs_dim + action_dim || q.output_width() != 1 {
                return Err(Error::shape(
                    "critic widths",
                    format!("{} -> 1", obs_dim + action_dim),
                    format!("{} -> {}", q.input_width(), q.output_width()),
                ));
            }
        }
        if q1.widths() != q1_target.widths() || q2.widths() != q2_target.widths() {
            return Err(Error::Precondition("target critics must match online shapes".into()));
        }
        Ok(Self {
            actor: Actor {
                adam: AdamState::new(actor.num_params(), config.lr),
                net: actor,
                scale: config.action_scale,
            },
            critics: CriticPair {
                adam1: AdamState::new(q1.num_params(), config.lr),
                adam2: AdamState::new(q2.num_params(), config.lr),
                q1,
                q2,
                q1_target,
                q2_target,
            },
            config: config.clone(),
            obs_dim,
            action_dim,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], mode: ActMode, rng: &mut R) -> Result<Vec<f64>> {
        self.actor.act(s, mode, rng)
    }

    fn states(&self, batch: &[&Transition]) -> Result<Tensor> {
        stack(batch.iter().map(|t| t.s.as_slice()), self.obs_dim)
    }

    /// `y = r + gamma (1 - done) (min_i Q_i'(s', a') - alpha log pi(a'|s'))`
    /// with `a'` drawn from the current policy using `noise`.
    pub fn critic_targets_with_noise(&self, batch: &[&Transition], noise: &[f64]) -> Result<Vec<f64>> {
        let next = stack(batch.iter().map(|t| t.s_next.as_slice()), self.obs_dim)?;
        let samples = self.actor.sample_batch(&next, noise)?;
        let actions: Vec<f64> = samples.iter().flat_map(|(_, s)| s.action.iter().copied()).collect();
        let x = concat_rows(&next, &actions, self.action_dim)?;
        let q1 = self.critics.q1_target.forward(&x)?;
        let q2 = self.critics.q2_target.forward(&x)?;
        let (gamma, alpha) = (self.config.gamma, self.config.alpha);
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if t.done {
                    t.r
                } else {
                    let v = q1.data()[i].min(q2.data()[i]) - alpha * samples[i].1.log_prob;
                    t.r + gamma * v
                }
            })
            .collect())
    }

    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &[&Transition], rng: &mut R) -> Result<Vec<f64>> {
        let noise = normal_vec(rng, batch.len() * self.action_dim);
        self.critic_targets_with_noise(batch, &noise)
    }

    /// `1/2 mean (Q(s, a) - y)^2` and its parameter gradient.
    pub fn critic_objective(&self, which: Critic, batch: &[&Transition], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        if targets.len() != batch.len() {
            return Err(Error::shape("critic targets", batch.len(), targets.len()));
        }
        let net = match which {
            Critic::Q1 => &self.critics.q1,
            Critic::Q2 => &self.critics.q2,
        };
        let s = self.states(batch)?;
        let a: Vec<f64> = batch.iter().flat_map(|t| t.a.iter().copied()).collect();
        if a.len() != batch.len() * self.action_dim {
            return Err(Error::shape("batch actions", batch.len() * self.action_dim, a.len()));
        }
        let x = concat_rows(&s, &a, self.action_dim)?;
        let (q, cache) = net.forward_cached(&x)?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let up: Vec<f64> = q
            .data()
            .iter()
            .zip(targets)
            .map(|(q, y)| {
                let d = q - y;
                loss += 0.5 * d * d;
                d / n
            })
            .collect();
        let grads = net.backward_cached(&cache, &Tensor::matrix(batch.len(), 1, up)?)?;
        Ok((loss / n, grads.params))
    }

    /// One Adam step per critic; returns the pre-step losses.
    pub fn update_critics(&mut self, batch: &[&Transition], targets: &[f64]) -> Result<(f64, f64)> {
        let (l1, g1) = self.critic_objective(Critic::Q1, batch, targets)?;
        let (l2, g2) = self.critic_objective(Critic::Q2, batch, targets)?;
        adam_step(self.critics.q1.params_mut(), &g1, &mut self.critics.adam1)?;
        adam_step(self.critics.q2.params_mut(), &g2, &mut self.critics.adam2)?;
        Ok((l1, l2))
    }

    /// `mean(alpha log pi(a|s) - Q1(s, a))` with reparameterized `a`, and its
    /// gradient with respect to the actor parameters.
    pub fn actor_objective(&self, states: &Tensor, noise: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = states.rows();
        let d = self.action_dim;
        if noise.len() != n * d {
            return Err(Error::shape("actor noise", n * d, noise.len()));
        }
        let (out, actor_cache) = self.actor.net.forward_cached(states)?;
        let mut heads = Vec::with_capacity(n);
        let mut samples = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n * d);
        for i in 0..n {
            let head = self.actor.split(out.row(i));
            let sample = head.sample(&noise[i * d..(i + 1) * d]);
            actions.extend_from_slice(&sample.action);
            heads.push(head);
            samples.push(sample);
        }
        let x = concat_rows(states, &actions, d)?;
        let (q, q_cache) = self.critics.q1.forward_cached(&x)?;
        let nf = n as f64;
        let alpha = self.config.alpha;
        let loss = (0..n)
            .map(|i| alpha * samples[i].log_prob - q.data()[i])
            .sum::<f64>()
            / nf;
        let dq = self
            .critics
            .q1
            .backward_cached(&q_cache, &Tensor::matrix(n, 1, vec![1.0; n])?)?;
        let mut up = Vec::with_capacity(n * 2 * d);
        for i in 0..n {
            let g = heads[i].sample_grads(&noise[i * d..(i + 1) * d], &samples[i]);
            let dq_da = &dq.input.row(i)[self.obs_dim..];
            for j in 0..d {
                up.push((alpha * g.dlogp_dmu[j] - dq_da[j] * g.daction_dmu[j]) / nf);
            }
            for j in 0..d {
                up.push((alpha * g.dlogp_dlog_std[j] - dq_da[j] * g.daction_dlog_std[j]) / nf);
            }
        }
        let grads = self
            .actor
            .net
            .backward_cached(&actor_cache, &Tensor::matrix(n, 2 * d, up)?)?;
        Ok((loss, grads.params))
    }

    /// One Adam step on the actor; critic weights are left untouched.
    pub fn update_actor<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<f64> {
        let s = self.states(batch)?;
        let noise = normal_vec(rng, batch.len() * self.action_dim);
        let (loss, grads) = self.actor_objective(&s, &noise)?;
        adam_step(self.actor.net.params_mut(), &grads, &mut self.actor.adam)?;
        Ok(loss)
    }

    pub fn soft_update(&mut self) -> Result<()> {
        self.critics.soft_update(self.config.tau)
    }

    /// Critic step, actor step, then target tracking, all on one batch.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &[&Transition], rng: &mut R) -> Result<UpdateStats> {
        let targets = self.critic_targets(batch, rng)?;
        let (l1, l2) = self.update_critics(batch, &targets)?;
        let actor_loss = self.update_actor(batch, rng)?;
        self.soft_update()?;
        Ok(UpdateStats {
            critic_loss: 0.5 * (l1 + l2),
            actor_loss,
        })
    }

    /// Writes one checkpoint per network plus `manifest.toml` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            obs_dim: self.obs_dim,
            action_dim: self.action_dim,
            action_scale: self.actor.scale,
            actor: "actor.ckpt".into(),
            q1: "q1.ckpt".into(),
            q2: "q2.ckpt".into(),
            q1_target: "q1_target.ckpt".into(),
            q2_target: "q2_target.ckpt".into(),
        };
        save_net(&self.actor.net, &dir.join(&manifest.actor))?;
        save_net(&self.critics.q1, &dir.join(&manifest.q1))?;
        save_net(&self.critics.q2, &dir.join(&manifest.q2))?;
        save_net(&self.critics.q1_target, &dir.join(&manifest.q1_target))?;
        save_net(&self.critics.q2_target, &dir.join(&manifest.q2_target))?;
        let text = toml::to_string(&manifest).expect("manifest serializes");
        std::fs::write(dir.join("manifest.toml"), text)?;
        Ok(())
    }

    /// Loads a saved agent; optimizer moments start fresh.
    pub fn load(dir: &Path, config: &SacConfig) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.toml"))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse {
            what: "agent manifest",
            message: e.to_string(),
        })?;
        let config = SacConfig {
            action_scale: m.action_scale,
            ..config.clone()
        };
        let agent = Self::from_nets(
            load_net(&dir.join(&m.actor))?,
            load_net(&dir.join(&m.q1))?,
            load_net(&dir.join(&m.q2))?,
            load_net(&dir.join(&m.q1_target))?,
            load_net(&dir.join(&m.q2_target))?,
            &config,
        )?;
        if agent.obs_dim != m.obs_dim || agent.action_dim != m.action_dim {
            return Err(Error::Parse {
                what: "agent manifest",
                message: "network widths disagree with the manifest".into(),
            });
        }
        Ok(agent)
    }
}
