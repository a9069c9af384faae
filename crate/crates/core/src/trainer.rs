//! The Dyna-style training loop with uncertainty-truncated imagined rollouts,
//! plus the model-error bound diagnostic.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::{DrivingEnv, EnvConfig, Scenario, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Source, Transition};
use crate::rng::{normal_vec, stream};
use crate::sac::{ActMode, Actor, SacAgent, SacConfig};
use crate::shaping::{potential_reward, ultimate_reward, RndPair, ShapingConfig};
use crate::world_model::{Ensemble, WorldModelConfig};

/// Which learner the loop runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Rollout length chosen per root state from ensemble disagreement.
    Adaptive,
    /// Every rollout runs exactly `k` model steps.
    FixedK(usize),
    /// Model-free SAC on real data only.
    Vanilla,
}

impl Algorithm {
    pub fn uses_model(&self) -> bool {
        !matches!(self, Algorithm::Vanilla)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Adaptive => write!(f, "adaptive"),
            Algorithm::FixedK(k) => write!(f, "fixed_k({k})"),
            Algorithm::Vanilla => write!(f, "vanilla"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// Accepts `adaptive`, `vanilla`, `fixed_k(K)` and `fixed_k:K`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "adaptive" => return Ok(Algorithm::Adaptive),
            "vanilla" => return Ok(Algorithm::Vanilla),
            _ => {}
        }
        let k = t
            .strip_prefix("fixed_k(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("fixed_k:"))
            .and_then(|k| k.trim().parse::<usize>().ok());
        k.map(Algorithm::FixedK).ok_or_else(|| {
            Error::config(
                "algorithm",
                format!("`{s}` is not one of adaptive, vanilla, fixed_k(K)"),
            )
        })
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    /// Slope `omega` of the truncation rule; `inf` is allowed.
    pub omega: f64,
    pub k_base: usize,
    pub k_min: usize,
    /// Rollouts launched per real step (`M`).
    pub rollouts_per_step: usize,
    /// Share of every SAC batch drawn from real experience.
    pub real_fraction: f64,
    /// Re-score uncertainty at every imagined step instead of only at the root.
    pub per_step_uncertainty: bool,
    /// A rollout stops before writing any state with a feature beyond this magnitude.
    pub sanity_bound: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            omega: 10.0,
            k_base: 6,
            k_min: 0,
            rollouts_per_step: 4,
            real_fraction: 0.5,
            per_step_uncertainty: false,
            sanity_bound: 10.0,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) {
            return Err(Error::config("rollout.omega", "must be >= 0"));
        }
        if self.k_min > self.k_base {
            return Err(Error::config("rollout.k_min", "must not exceed k_base"));
        }
        if !(self.real_fraction > 0.0 && self.real_fraction <= 1.0) {
            return Err(Error::config("rollout.real_fraction", "must lie in (0, 1]"));
        }
        if !(self.sanity_bound > 0.0) {
            return Err(Error::config("rollout.sanity_bound", "must be > 0"));
        }
        Ok(())
    }
}

/// `clamp(floor(k_base - omega * sigma2), k_min, k_base)`.
pub fn rollout_length(sigma2: f64, config: &RolloutConfig) -> usize {
    debug_assert!(sigma2 >= 0.0);
    let base = config.k_base as f64;
    let raw = if config.omega.is_infinite() {
        if sigma2 == 0.0 {
            base
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (base - config.omega * sigma2).floor()
    };
    raw.clamp(config.k_min as f64, base) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    /// Root-state uncertainty.
    pub sigma2: f64,
    /// Planned length before any early stop.
    pub k_star: usize,
    pub stopped_early: bool,
}

/// Imagined rollout from `s0`. The length comes from `k_override` when
/// given, otherwise from the root uncertainty under the policy's
/// deterministic action.
pub fn truncated_rollout<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    actor: &Actor,
    s0: &[f64],
    config: &RolloutConfig,
    k_override: Option<usize>,
    rng: &mut R,
) -> Result<Rollout> {
    let a0 = actor.act(s0, ActMode::Deterministic, rng)?;
    let sigma2 = ensemble.uncertainty(s0, &a0)?;
    let k_star = k_override.unwrap_or_else(|| rollout_length(sigma2, config));
    let mut transitions = Vec::with_capacity(k_star);
    let mut s = s0.to_vec();
    let mut stopped_early = false;
    let mut budget = k_star;
    let mut step = 0;
    while step < budget {
        if config.per_step_uncertainty && k_override.is_none() && step > 0 {
            let a_det = actor.act(&s, ActMode::Deterministic, rng)?;
            budget = budget.min(rollout_length(ensemble.uncertainty(&s, &a_det)?, config));
            if step >= budget {
                break;
            }
        }
        let a = actor.act(&s, ActMode::Stochastic, rng)?;
        let member = ensemble.sample_member(rng);
        let noise = normal_vec(rng, ensemble.obs_dim() + 1);
        let (s_next, r) = ensemble.predict(member, &s, &a, &noise)?;
        if s_next.iter().any(|v| v.abs() > config.sanity_bound) {
            stopped_early = true;
            break;
        }
        transitions.push(Transition::new(s.clone(), a, r, s_next.clone(), false, Source::Virtual)?);
        s = s_next;
        step += 1;
    }
    Ok(Rollout {
        transitions,
        sigma2,
        k_star,
        stopped_early,
    })
}

/// Full configuration of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub master_seed: u64,
    pub epochs: usize,
    /// No new episode starts once this many real steps have been taken; 0 disables.
    pub real_step_budget: usize,
    /// Real transitions collected before any learning update.
    pub warmup_transitions: usize,
    pub real_capacity: usize,
    pub model_capacity: usize,
    pub updates_per_step: usize,
    /// Write real elapsed time into `wall_ms`; off keeps logs reproducible.
    pub record_wall_time: bool,
    pub env: EnvConfig,
    pub sac: SacConfig,
    pub rollout: RolloutConfig,
    pub shaping: ShapingConfig,
    pub model: WorldModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adaptive,
            master_seed: 0,
            epochs: 100,
            real_step_budget: 0,
            warmup_transitions: 1000,
            real_capacity: 32768,
            model_capacity: 32768,
            updates_per_step: 1,
            record_wall_time: false,
            env: EnvConfig::default(),
            sac: SacConfig::default(),
            rollout: RolloutConfig::default(),
            shaping: ShapingConfig::default(),
            model: WorldModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.real_capacity == 0 {
            return Err(Error::config("real_capacity", "must be >= 1"));
        }
        if self.model_capacity == 0 {
            return Err(Error::config("model_capacity", "must be >= 1"));
        }
        self.env.validate()?;
        self.sac.validate()?;
        self.rollout.validate()?;
        self.shaping.validate()?;
        self.model.validate()
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub real_steps: usize,
    pub episode_reward: f64,
    pub episode_duration_steps: usize,
    pub collision: bool,
    pub mean_uncertainty: Option<f64>,
    pub mean_rollout_len: f64,
    pub dm_size: usize,
    pub de_size: usize,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub model_loss: Option<f64>,
    pub wall_ms: u64,
    #[serde(skip)]
    pub reached_goal: bool,
    #[serde(skip)]
    pub rollouts_launched: usize,
    #[serde(skip)]
    pub virtual_added: usize,
    #[serde(skip)]
    pub early_stops: usize,
}

/// Root uncertainty and planned length at the probe state after a real step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub real_step: usize,
    pub sigma2: f64,
    pub k_star: usize,
}

pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    pub probe_trace: Vec<ProbeRecord>,
    pub agent: SacAgent,
    pub ensemble: Option<Ensemble>,
    pub rnd: RndPair,
    pub real_buffer: ReplayBuffer,
    pub model_buffer: ReplayBuffer,
}

mod streams {
    pub const ENV: u64 = 1;
    pub const AGENT_INIT: u64 = 2;
    pub const AGENT: u64 = 3;
    pub const MODEL: u64 = 4;
    pub const ROLLOUT: u64 = 5;
    pub const RND: u64 = 6;
}

/// Agent-facing observation: raw features times the fixed per-feature scale.
pub fn scale_observation(raw: &[f64], scale: &[f64]) -> Vec<f64> {
    raw.iter().zip(scale).map(|(x, s)| x * s).collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

pub fn train(config: &TrainConfig, scenario: &Scenario) -> Result<TrainOutcome> {
    train_with(config, scenario, |_| {})
}

/// Runs the loop, calling `on_epoch` after each finished episode.
pub fn train_with(
    config: &TrainConfig,
    scenario: &Scenario,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    scenario.validate()?;
    let seed = config.master_seed;
    let mut env_rng = stream(seed, streams::ENV);
    let mut agent_rng = stream(seed, streams::AGENT);
    let mut model_rng = stream(seed, streams::MODEL);
    let mut rollout_rng = stream(seed, streams::ROLLOUT);
    let mut rnd_rng = stream(seed, streams::RND);

    let mut env = DrivingEnv::new(scenario.clone(), config.env.clone())?;
    let scale = config.env.observation_scale(scenario);
    let mut agent = SacAgent::new(OBS_DIM, ACTION_DIM, &config.sac, &mut stream(seed, streams::AGENT_INIT))?;
    let mut rnd = RndPair::new(OBS_DIM, &config.shaping, &mut rnd_rng)?;
    // M = 0 and fixed_k(0) run model-free.
    let model_based = config.algorithm.uses_model()
        && config.rollout.rollouts_per_step > 0
        && config.algorithm != Algorithm::FixedK(0);
    let mut ensemble = if model_based {
        Some(Ensemble::new(OBS_DIM, ACTION_DIM, &config.model, &mut model_rng)?)
    } else {
        None
    };
    let mut model_ready = false;
    let mut d_e = ReplayBuffer::new(config.real_capacity)?;
    let mut d_m = ReplayBuffer::new(config.model_capacity)?;
    let rollouts_per_step = if model_based { config.rollout.rollouts_per_step } else { 0 };
    let k_override = match config.algorithm {
        Algorithm::FixedK(k) => Some(k),
        _ => None,
    };
    let probe: Option<Vec<f64>> = if model_based {
        let mut probe_env = DrivingEnv::new(scenario.clone(), config.env.clone())?;
        Some(scale_observation(probe_env.reset(0).as_slice(), &scale))
    } else {
        None
    };

    let mut records = Vec::with_capacity(config.epochs);
    let mut probe_trace = Vec::new();
    let mut real_steps = 0usize;
    let started = Instant::now();

    for epoch in 0..config.epochs {
        if config.real_step_budget > 0 && real_steps >= config.real_step_budget {
            break;
        }
        let mut model_loss = None;
        if let Some(ens) = ensemble.as_mut() {
            if d_e.len() >= config.warmup_transitions.max(config.model.batch_size) {
                let report = ens.train(d_e.iter(), &mut model_rng)?;
                model_loss = Some(report.mean_final_loss());
                model_ready = true;
            }
        }

        let mut obs = scale_observation(env.reset(env_rng.next_u64()).as_slice(), &scale);
        let mut episode_reward = 0.0;
        let mut duration = 0;
        let collision;
        let reached_goal;
        let mut sigmas = Vec::new();
        let mut lengths = Vec::new();
        let mut virtual_added = 0;
        let mut early_stops = 0;
        let mut critic_losses = Vec::new();
        let mut actor_losses = Vec::new();

        loop {
            let action = agent.act(&obs, ActMode::Stochastic, &mut agent_rng)?;
            let ego_before = *env.ego();
            let step = env.step(action[0])?;
            let next = scale_observation(step.observation.as_slice(), &scale);
            let r_p = potential_reward(&ego_before, env.ego(), scenario, config.shaping.gamma);
            let r_ngu = rnd.ngu_reward(&next)?;
            let r = ultimate_reward(step.reward, r_p, r_ngu);
            let terminal = step.info.collision || step.info.out_of_bounds;
            d_e.push(Transition::new(obs.clone(), action, r, next.clone(), terminal, Source::Real)?);
            episode_reward += r;
            duration += 1;
            real_steps += 1;

            if d_e.len() >= config.shaping.rnd_batch {
                let batch = d_e.sample(config.shaping.rnd_batch, &mut rnd_rng)?;
                let states: Vec<&[f64]> = batch.iter().map(|t| t.s_next.as_slice()).collect();
                rnd.update(&states)?;
            }

            if let (Some(ens), true) = (ensemble.as_ref(), model_ready) {
                for _ in 0..rollouts_per_step {
                    let s0 = d_e.sample(1, &mut rollout_rng)?[0].s.clone();
                    let rollout = truncated_rollout(ens, &agent.actor, &s0, &config.rollout, k_override, &mut rollout_rng)?;
                    sigmas.push(rollout.sigma2);
                    lengths.push(rollout.transitions.len() as f64);
                    virtual_added += rollout.transitions.len();
                    if rollout.stopped_early {
                        early_stops += 1;
                    }
                    for t in rollout.transitions {
                        d_m.push(t);
                    }
                }
                if let Some(p) = probe.as_ref() {
                    let a = agent.act(p, ActMode::Deterministic, &mut agent_rng)?;
                    let sigma2 = ens.uncertainty(p, &a)?;
                    probe_trace.push(ProbeRecord {
                        real_step: real_steps,
                        sigma2,
                        k_star: k_override.unwrap_or_else(|| rollout_length(sigma2, &config.rollout)),
                    });
                }
            }

            if d_e.len() >= config.warmup_transitions {
                for _ in 0..config.updates_per_step {
                    let n = config.sac.batch_size;
                    let batch = if d_m.is_empty() || rollouts_per_step == 0 {
                        d_e.sample(n, &mut agent_rng)?
                    } else {
                        let n_real = ((n as f64) * config.rollout.real_fraction).round() as usize;
                        let mut b = d_e.sample(n_real.max(1), &mut agent_rng)?;
                        b.extend(d_m.sample(n - n_real.max(1), &mut agent_rng)?);
                        b
                    };
                    let stats = agent.update(&batch, &mut agent_rng)?;
                    critic_losses.push(stats.critic_loss);
                    actor_losses.push(stats.actor_loss);
                }
            }

            obs = next;
            if step.done {
                collision = step.info.collision;
                reached_goal = step.info.reached_goal;
                break;
            }
        }

        let record = EpochRecord {
            epoch,
            real_steps,
            episode_reward,
            episode_duration_steps: duration,
            collision,
            mean_uncertainty: mean(&sigmas),
            mean_rollout_len: mean(&lengths).unwrap_or(0.0),
            dm_size: d_m.len(),
            de_size: d_e.len(),
            critic_loss: mean(&critic_losses),
            actor_loss: mean(&actor_losses),
            model_loss,
            wall_ms: if config.record_wall_time {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            reached_goal,
            rollouts_launched: sigmas.len(),
            virtual_added,
            early_stops,
        };
        on_epoch(&record);
        records.push(record);
    }

    Ok(TrainOutcome {
        records,
        probe_trace,
        agent,
        ensemble,
        rnd,
        real_buffer: d_e,
        model_buffer: d_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub eps_m: f64,
    pub eps_pi: f64,
    pub k: u32,
    pub gamma: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub c: f64,
    /// `2 * r_max * C`, the gap between model and real returns.
    pub gap: f64,
}

/// `C = g^(k+1) e_pi / (1-g)^2 + g^k e_pi / (1-g) + k e_m / (1-g)`.
pub fn discrepancy_bound(inputs: &BoundInputs) -> Result<Bound> {
    let BoundInputs {
        eps_m,
        eps_pi,
        k,
        gamma,
        r_max,
    } = *inputs;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config("bound.gamma", "must lie in (0, 1)"));
    }
    if !(eps_m >= 0.0 && eps_pi >= 0.0) {
        return Err(Error::config("bound.eps", "errors must be >= 0"));
    }
    let one = 1.0 - gamma;
    let gk = gamma.powi(k as i32);
    let c = gamma * gk * eps_pi / (one * one) + gk * eps_pi / one + k as f64 * eps_m / one;
    Ok(Bound {
        c,
        gap: 2.0 * r_max * c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseNet;
    use crate::world_model::Normalizer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rollout_length_examples() {
        let c = RolloutConfig::default();
        assert_eq!(rollout_length(0.0, &c), 6);
        assert_eq!(rollout_length(0.25, &c), 3);
        assert_eq!(rollout_length(0.6, &c), 0);
        assert_eq!(rollout_length(100.0, &c), 0);
        let inf = RolloutConfig {
            omega: f64::INFINITY,
            ..c.clone()
        };
        assert_eq!(rollout_length(0.0, &inf), 6);
        assert_eq!(rollout_length(1e-300, &inf), 0);
    }

    #[test]
    fn rollout_length_is_monotone_and_bounded() {
        let c = RolloutConfig {
            k_min: 1,
            ..RolloutConfig::default()
        };
        let mut prev = usize::MAX;
        for i in 0..2000 {
            let k = rollout_length(i as f64 * 1e-3, &c);
            assert!(k <= prev && (1..=6).contains(&k));
            prev = k;
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [Algorithm::Adaptive, Algorithm::Vanilla, Algorithm::FixedK(3)] {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("fixed_k:10".parse::<Algorithm>().unwrap(), Algorithm::FixedK(10));
        assert!("mve".parse::<Algorithm>().is_err());
    }

    #[test]
    fn bound_examples() {
        let b = |eps_m, eps_pi, k| {
            discrepancy_bound(&BoundInputs {
                eps_m,
                eps_pi,
                k,
                gamma: 0.97,
                r_max: 1.0,
            })
            .unwrap()
        };
        assert_eq!(b(0.0, 0.0, 7).c, 0.0);
        let hand = 0.97 * 0.1 / (0.03f64 * 0.03) + 0.1 / 0.03;
        assert!((b(0.2, 0.1, 0).c - hand).abs() < 1e-9);
        assert!((b(0.2, 0.1, 0).c - 111.11).abs() < 0.01);
        assert!((b(0.2, 0.1, 0).gap - 2.0 * hand).abs() < 1e-9);
    }

    fn identical_ensemble(obs: usize) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::mlp(obs + 1, &[8], obs + 1, &mut rng).unwrap();
        let config = WorldModelConfig::default();
        Ensemble::from_parts(
            vec![net; 3],
            vec![1e-300; obs + 1],
            Normalizer::identity(obs + 1, obs + 1),
            &config,
        )
        .unwrap()
    }

    fn agent(obs: usize, seed: u64) -> SacAgent {
        let config = SacConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..SacConfig::default()
        };
        SacAgent::new(obs, 1, &config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_length_rollout_is_empty() {
        let ens = identical_ensemble(3);
        let ag = agent(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = truncated_rollout(&ens, &ag.actor, &[0.1, 0.2, 0.3], &RolloutConfig::default(), Some(0), &mut rng).unwrap();
        assert!(r.transitions.is_empty());
    }

    #[test]
    fn identical_members_give_full_deterministic_rollouts() {
        let ens = identical_ensemble(3);
        let mut ag = agent(3, 2);
        // log_std bias far below the clamp: effectively noise free
        let last = ag.actor.net.num_params() - 1;
        ag.actor.net.params_mut()[last] = -50.0;
        let cfg = RolloutConfig {
            sanity_bound: 1e9,
            ..RolloutConfig::default()
        };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            truncated_rollout(&ens, &ag.actor, &[0.1, 0.2, 0.3], &cfg, None, &mut rng).unwrap()
        };
        let a = run(1);
        let b = run(1);
        assert_eq!(a.sigma2, 0.0);
        assert_eq!(a.k_star, 6);
        assert_eq!(a.transitions.len(), 6);
        assert_eq!(a, b);
        assert!(a.transitions.iter().all(|t| !t.done && t.source == Source::Virtual));
    }

    #[test]
    fn rollouts_never_exceed_k_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ens = Ensemble::new(3, 1, &WorldModelConfig { hidden: vec![8], ..WorldModelConfig::default() }, &mut rng).unwrap();
        let ag = agent(3, 5);
        let cfg = RolloutConfig {
            omega: 0.5,
            ..RolloutConfig::default()
        };
        for _ in 0..10_000 {
            let s0: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let r = truncated_rollout(&ens, &ag.actor, &s0, &cfg, None, &mut rng).unwrap();
            assert!(r.k_star <= 6 && r.transitions.len() <= r.k_star);
        }
    }

    #[test]
    fn sanity_bound_stops_without_writing() {
        let ens = identical_ensemble(2);
        let ag = agent(2, 6);
        let cfg = RolloutConfig {
            sanity_bound: 1e-6,
            ..RolloutConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = truncated_rollout(&ens, &ag.actor, &[0.0, 0.0], &cfg, Some(4), &mut rng).unwrap();
        assert!(r.stopped_early);
        assert!(r.transitions.is_empty());
    }
}
