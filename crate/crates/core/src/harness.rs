//! Experiment configuration, multi-seed runs, evaluation and CSV/JSONL export.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{DrivingEnv, EnvConfig, Scenario, STEER_LIMIT};
use crate::error::{Error, Result};
use crate::replay::{Source, Transition};
use crate::rng::{standard_normal, stream};
use crate::sac::{ActMode, Actor, SacAgent};
use crate::trainer::{
    discrepancy_bound, scale_observation, train, Algorithm, BoundInputs, EpochRecord, ProbeRecord, TrainConfig,
    TrainOutcome,
};

/// Smoothing factor of the flattened reward curves.
pub const EMA_FACTOR: f64 = 0.9;

mod streams {
    pub const EVAL_ENV: u64 = 11;
    pub const EVAL_NOISE: u64 = 12;
    pub const COLLECT_ENV: u64 = 13;
    pub const COLLECT_POLICY: u64 = 14;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub episodes: usize,
    /// Action noise std as a fraction of the steering range width.
    pub noise_level: f64,
    pub scenarios: Vec<String>,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            episodes: 20,
            noise_level: 0.1,
            scenarios: vec!["builtin:a".into()],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSettings {
    pub k_list: Vec<usize>,
}

impl Default for AblateSettings {
    fn default() -> Self {
        Self { k_list: vec![1, 3, 5, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSettings {
    pub gamma: f64,
    pub r_max: f64,
    pub eps_m: Vec<f64>,
    pub eps_pi: Vec<f64>,
    pub k_max: u32,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            gamma: 0.97,
            r_max: 1.0,
            eps_m: vec![0.0, 0.01, 0.05, 0.1, 0.2],
            eps_pi: vec![0.0, 0.01, 0.05, 0.1],
            k_max: 200,
        }
    }
}

/// Everything one invocation of the harness needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario file path, or `builtin:<name>`.
    pub scenario: String,
    /// Seeds for repeated trials; empty means `[train.master_seed]`.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub ablate: AblateSettings,
    pub bound: BoundSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "builtin:a".into(),
            seeds: Vec::new(),
            output_dir: PathBuf::from("runs"),
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
            ablate: AblateSettings::default(),
            bound: BoundSettings::default(),
        }
    }
}

fn parse_err(e: impl ToString) -> Error {
    Error::Parse {
        what: "experiment config",
        message: e.to_string().trim().replace('\n', " "),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("train.{key}"), message),
            e => e,
        })?;
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes", "must be >= 1"));
        }
        if !(self.eval.noise_level >= 0.0) {
            return Err(Error::config("eval.noise_level", "must be >= 0"));
        }
        if self.ablate.k_list.is_empty() {
            return Err(Error::config("ablate.k_list", "must not be empty"));
        }
        if !(self.bound.gamma > 0.0 && self.bound.gamma < 1.0) {
            return Err(Error::config("bound.gamma", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Sets the dotted `key` (e.g. `train.sac.lr`) to `value`, parsed as a TOML
    /// value when possible and as a bare string otherwise.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(parse_err)?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        set_path(&mut root, &parts, parsed).map_err(|m| Error::config(key, m))?;
        let updated: Self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(key, e.to_string().trim().replace('\n', " ")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.master_seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        Scenario::load(&self.scenario)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            master_seed: seed,
            ..self.train.clone()
        }
    }
}

fn set_path(node: &mut toml::Value, parts: &[&str], value: toml::Value) -> std::result::Result<(), &'static str> {
    let table = node.as_table_mut().ok_or("is not a config table")?;
    let (head, rest) = parts.split_first().ok_or("empty key")?;
    let child = table.get_mut(*head).ok_or("unknown key")?;
    if rest.is_empty() {
        *child = value;
        Ok(())
    } else {
        set_path(child, rest, value)
    }
}

/// `y_0 = x_0`, `y_t = f y_(t-1) + (1 - f) x_t`.
pub fn ema(xs: &[f64], factor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = None;
    for &x in xs {
        let y = match acc {
            None => x,
            Some(prev) => factor * prev + (1.0 - factor) * x,
        };
        acc = Some(y);
        out.push(y);
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Average absolute deviation from the neutral value zero.
pub fn aad(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn reward_curve(records: &[EpochRecord]) -> Vec<f64> {
    records.iter().map(|r| r.episode_reward).collect()
}

/// One row of a cross-seed reward curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
    pub ema: f64,
}

/// Mean and 1-sigma band across seeds at every epoch index reached by at
/// least one seed, plus the EMA of the mean.
pub fn summarize_curves(curves: &[Vec<f64>]) -> Vec<CurveRow> {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows: Vec<CurveRow> = (0..len)
        .map(|epoch| {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c.get(epoch).copied()).collect();
            let (m, s) = (mean(&vals), sample_std(&vals));
            CurveRow {
                epoch,
                seeds: vals.len(),
                mean: m,
                std: s,
                lower: m - s,
                upper: m + s,
                ema: 0.0,
            }
        })
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    for (row, e) in rows.iter_mut().zip(ema(&means, EMA_FACTOR)) {
        row.ema = e;
    }
    rows
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            what: "csv",
            message: format!("{other:?}"),
        },
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_jsonl(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Parse {
            what: "metrics record",
            message: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_probe_csv(path: &Path, trace: &[ProbeRecord]) -> Result<()> {
    write_csv(path, trace)
}

/// Runs every seed of `config` and writes, under `out`:
/// `config.toml`, `summary.csv`, and per seed `seed_<s>/metrics.jsonl`,
/// `seed_<s>/agent/`, plus `probe_trace.csv` and `model.ckpt` for model-based runs.
pub fn run_train(config: &ExperimentConfig, out: &Path) -> Result<Vec<CurveRow>> {
    let scenario = config.load_scenario()?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), config.to_toml_string())?;
    let mut curves = Vec::new();
    for seed in config.seed_list() {
        let outcome = train(&config.train_config(seed), &scenario)?;
        save_outcome(&outcome, &out.join(format!("seed_{seed}")))?;
        curves.push(reward_curve(&outcome.records));
    }
    let rows = summarize_curves(&curves);
    write_csv(&out.join("summary.csv"), &rows)?;
    Ok(rows)
}

pub fn save_outcome(outcome: &TrainOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics_jsonl(&dir.join("metrics.jsonl"), &outcome.records)?;
    outcome.agent.save(&dir.join("agent"))?;
    if let Some(ens) = &outcome.ensemble {
        write_probe_csv(&dir.join("probe_trace.csv"), &outcome.probe_trace)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("model.ckpt"))?);
        ens.write(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Fixed-k runs for each `k`, then adaptive, then vanilla.
pub fn ablation_algorithms(k_list: &[usize]) -> Vec<Algorithm> {
    let mut algs: Vec<Algorithm> = k_list.iter().map(|&k| Algorithm::FixedK(k)).collect();
    algs.push(Algorithm::Adaptive);
    algs.push(Algorithm::Vanilla);
    algs
}

/// Reward curves of several algorithms, epoch-aligned, in wide form.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub algorithms: Vec<Algorithm>,
    pub rows: Vec<Vec<CurveRow>>,
}

impl AblationTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["epoch".to_string()];
        for a in &self.algorithms {
            for col in ["mean", "std", "ema"] {
                header.push(format!("{a}_{col}"));
            }
        }
        w.write_record(&header).map_err(csv_err)?;
        let len = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        for epoch in 0..len {
            let mut rec = vec![epoch.to_string()];
            for rows in &self.rows {
                match rows.get(epoch) {
                    Some(r) => rec.extend([r.mean, r.std, r.ema].map(|x| x.to_string())),
                    None => rec.extend(std::iter::repeat_n(String::new(), 3)),
                }
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_ablation(config: &ExperimentConfig, out: &Path) -> Result<AblationTable> {
    let scenario = config.load_scenario()?;
    fs::create_dir_all(out)?;
    let algorithms = ablation_algorithms(&config.ablate.k_list);
    let mut rows = Vec::new();
    for alg in &algorithms {
        let mut curves = Vec::new();
        for seed in config.seed_list() {
            let cfg = TrainConfig {
                algorithm: *alg,
                ..config.train_config(seed)
            };
            let outcome = train(&cfg, &scenario)?;
            write_metrics_jsonl(&out.join(format!("{alg}_seed_{seed}.jsonl")), &outcome.records)?;
            curves.push(reward_curve(&outcome.records));
        }
        rows.push(summarize_curves(&curves));
    }
    let table = AblationTable { algorithms, rows };
    table.write_csv(&out.join("ablation.csv"))?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub eps_m: f64,
    pub eps_pi: f64,
    pub k: u32,
    pub c: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundMinimum {
    pub eps_m: f64,
    pub eps_pi: f64,
    pub k_best: u32,
    pub c_min: f64,
}

pub fn bound_table(s: &BoundSettings) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for &eps_m in &s.eps_m {
        for &eps_pi in &s.eps_pi {
            for k in 0..=s.k_max {
                let b = discrepancy_bound(&BoundInputs {
                    eps_m,
                    eps_pi,
                    k,
                    gamma: s.gamma,
                    r_max: s.r_max,
                })?;
                rows.push(BoundRow {
                    eps_m,
                    eps_pi,
                    k,
                    c: b.c,
                    gap: b.gap,
                });
            }
        }
    }
    Ok(rows)
}

/// Smallest-C row per `(eps_m, eps_pi)` slice; ties go to the smaller `k`.
pub fn bound_minima(rows: &[BoundRow]) -> Vec<BoundMinimum> {
    let mut out: Vec<BoundMinimum> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|m| m.eps_m == r.eps_m && m.eps_pi == r.eps_pi) {
            Some(m) if r.c < m.c_min => {
                m.k_best = r.k;
                m.c_min = r.c;
            }
            Some(_) => {}
            None => out.push(BoundMinimum {
                eps_m: r.eps_m,
                eps_pi: r.eps_pi,
                k_best: r.k,
                c_min: r.c,
            }),
        }
    }
    out
}

pub fn run_bound(s: &BoundSettings, out: &Path) -> Result<Vec<BoundRow>> {
    fs::create_dir_all(out)?;
    let rows = bound_table(s)?;
    write_csv(&out.join("bound.csv"), &rows)?;
    write_csv(&out.join("bound_minima.csv"), &bound_minima(&rows))?;
    Ok(rows)
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub duration: usize,
    pub reached_goal: bool,
    pub collision: bool,
    pub aad_lat_vel: f64,
    pub aad_yaw_rate: f64,
}

/// Runs one episode with `policy` mapping the agent-facing observation to a
/// steering command.
pub fn run_episode(
    env: &mut DrivingEnv,
    episode_seed: u64,
    mut policy: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<EpisodeStats> {
    let scale = env.config().observation_scale(env.scenario());
    let mut obs = env.reset(episode_seed);
    let mut lat_vel = Vec::new();
    let mut yaw_rate = Vec::new();
    loop {
        let a = policy(&scale_observation(obs.as_slice(), &scale))?;
        let step = env.step(a)?;
        lat_vel.push(env.ego().v_lat);
        yaw_rate.push(env.ego().yaw_rate);
        obs = step.observation;
        if step.done {
            return Ok(EpisodeStats {
                duration: env.steps(),
                reached_goal: step.info.reached_goal,
                collision: step.info.collision,
                aad_lat_vel: aad(&lat_vel),
                aad_yaw_rate: aad(&yaw_rate),
            });
        }
    }
}

/// Aggregate over the episodes of one (scenario, condition) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalCell {
    pub scenario: String,
    pub condition: String,
    pub noise_level: f64,
    pub episodes: usize,
    pub duration_mean: f64,
    pub duration_se: f64,
    pub completion_rate: f64,
    pub collision_rate: f64,
    pub aad_lat_vel: f64,
    pub aad_yaw_rate: f64,
}

impl EvalCell {
    pub fn from_episodes(scenario: &str, noise_level: f64, eps: &[EpisodeStats]) -> Self {
        let n = eps.len() as f64;
        let durations: Vec<f64> = eps.iter().map(|e| e.duration as f64).collect();
        let lat: Vec<f64> = eps.iter().map(|e| e.aad_lat_vel).collect();
        let yaw: Vec<f64> = eps.iter().map(|e| e.aad_yaw_rate).collect();
        Self {
            scenario: scenario.to_string(),
            condition: if noise_level > 0.0 { "noisy".into() } else { "clean".into() },
            noise_level,
            episodes: eps.len(),
            duration_mean: mean(&durations),
            duration_se: standard_error(&durations),
            completion_rate: eps.iter().filter(|e| e.reached_goal).count() as f64 / n,
            collision_rate: eps.iter().filter(|e| e.collision).count() as f64 / n,
            aad_lat_vel: mean(&lat),
            aad_yaw_rate: mean(&yaw),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.cells)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<12} {:<6} {:>5} {:>16} {:>10} {:>10} {:>10} {:>10}\n",
            "scenario", "cond", "n", "duration", "complete", "collide", "aad_vlat", "aad_yaw"
        );
        for c in &self.cells {
            s.push_str(&format!(
                "{:<12} {:<6} {:>5} {:>8.1} ± {:<5.1} {:>10.2} {:>10.2} {:>10.4} {:>10.4}\n",
                c.scenario,
                c.condition,
                c.episodes,
                c.duration_mean,
                c.duration_se,
                c.completion_rate,
                c.collision_rate,
                c.aad_lat_vel,
                c.aad_yaw_rate
            ));
        }
        s
    }
}

/// Deterministic-mode evaluation with optional Gaussian action noise of std
/// `noise_level * pi`, clamped to the steering range. Episode seeds depend only
/// on `seed`, so clean and noisy cells see the same pedestrian draws.
pub fn evaluate(
    agent: &SacAgent,
    scenario: &Scenario,
    env_config: &EnvConfig,
    noise_level: f64,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeStats>> {
    let mut env = DrivingEnv::new(scenario.clone(), env_config.clone())?;
    let mut seeds = stream(seed, streams::EVAL_ENV);
    let mut noise = stream(seed, streams::EVAL_NOISE);
    let mut idle = stream(seed, 0);
    (0..episodes)
        .map(|_| {
            run_episode(&mut env, seeds.next_u64(), |obs| {
                let a = agent.act(obs, ActMode::Deterministic, &mut idle)?[0];
                let a = if noise_level > 0.0 {
                    (a + noise_level * std::f64::consts::PI * standard_normal(&mut noise))
                        .clamp(-STEER_LIMIT, STEER_LIMIT)
                } else {
                    a
                };
                Ok(a)
            })
        })
        .collect()
}

/// Clean cells for every scenario in `settings`, followed by noisy cells when
/// `noise_level > 0`.
pub fn run_eval(agent: &SacAgent, env_config: &EnvConfig, settings: &EvalSettings) -> Result<EvalReport> {
    let mut levels = vec![0.0];
    if settings.noise_level > 0.0 {
        levels.push(settings.noise_level);
    }
    let mut cells = Vec::new();
    for &level in &levels {
        for name in &settings.scenarios {
            let scenario = Scenario::load(name)?;
            let eps = evaluate(agent, &scenario, env_config, level, settings.episodes, settings.seed)?;
            cells.push(EvalCell::from_episodes(&scenario.name, level, &eps));
        }
    }
    Ok(EvalReport { cells })
}

/// Real transitions from a fixed actor acting stochastically, with the
/// unshaped environment reward and the trainer's terminal convention.
pub fn collect_transitions(
    scenario: &Scenario,
    env_config: &EnvConfig,
    actor: &Actor,
    n: usize,
    seed: u64,
) -> Result<Vec<Transition>> {
    let mut env = DrivingEnv::new(scenario.clone(), env_config.clone())?;
    let scale = env_config.observation_scale(scenario);
    let mut env_rng = stream(seed, streams::COLLECT_ENV);
    let mut policy_rng = stream(seed, streams::COLLECT_POLICY);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut obs = scale_observation(env.reset(env_rng.next_u64()).as_slice(), &scale);
        while out.len() < n {
            let a = actor.act(&obs, ActMode::Stochastic, &mut policy_rng)?;
            let step = env.step(a[0])?;
            let next = scale_observation(step.observation.as_slice(), &scale);
            let terminal = step.info.collision || step.info.out_of_bounds;
            out.push(Transition::new(obs, a, step.reward, next.clone(), terminal, Source::Real)?);
            obs = next;
            if step.done {
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.seeds = vec![3, 1, 4];
        cfg.train.algorithm = Algorithm::FixedK(3);
        cfg.train.rollout.omega = f64::INFINITY;
        cfg.eval.noise_level = 0.25;
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn overrides_parse_values_and_name_bad_keys() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_override("train.sac.lr", "1e-3").unwrap();
        cfg.apply_override("train.algorithm", "fixed_k(4)").unwrap();
        cfg.apply_override("seeds", "[1, 2]").unwrap();
        assert_eq!(cfg.train.sac.lr, 1e-3);
        assert_eq!(cfg.train.algorithm, Algorithm::FixedK(4));
        assert_eq!(cfg.seed_list(), vec![1, 2]);
        for (key, value) in [("train.sac.lr", "-1"), ("train.nope", "1"), ("train.sac.lr", "fast")] {
            match cfg.clone().apply_override(key, value) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{key}={value}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[train]\nepoch = 3\n").is_err());
    }

    #[test]
    fn ema_examples() {
        assert_eq!(ema(&[], 0.9), Vec::<f64>::new());
        let y = ema(&[10.0, 0.0, 0.0], 0.9);
        assert_eq!(y[0], 10.0);
        assert!((y[1] - 9.0).abs() < 1e-12);
        assert!((y[2] - 8.1).abs() < 1e-12);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn curve_summary_uses_the_sample_band() {
        let rows = summarize_curves(&[vec![1.0, 2.0], vec![3.0]]);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].seeds, rows[0].mean), (2, 2.0));
        assert!((rows[0].std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!((rows[1].seeds, rows[1].std), (1, 0.0));
        assert!((rows[1].ema - (0.9 * 2.0 + 0.1 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn straight_driving_has_no_yaw_deviation() {
        let env_cfg = EnvConfig::default();
        let mut env = DrivingEnv::new(Scenario::preset("straight").unwrap(), env_cfg).unwrap();
        let ep = run_episode(&mut env, 1, |_| Ok(0.0)).unwrap();
        assert_eq!(ep.aad_yaw_rate, 0.0);
        assert_eq!(ep.aad_lat_vel, 0.0);
        assert!(ep.reached_goal && !ep.collision);
    }

    #[test]
    fn bound_minima_are_interior_for_imperfect_models() {
        let rows = bound_table(&BoundSettings::default()).unwrap();
        for m in bound_minima(&rows) {
            if m.eps_m == 0.0 && m.eps_pi == 0.0 {
                assert_eq!(m.c_min, 0.0);
            } else if m.eps_m > 0.0 {
                assert!(m.k_best < BoundSettings::default().k_max);
            }
        }
    }

    #[test]
    fn evaluation_is_reproducible_and_noise_changes_actions() {
        let cfg = crate::sac::SacConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            ..Default::default()
        };
        let agent = SacAgent::new(crate::env::OBS_DIM, 1, &cfg, &mut stream(0, 0)).unwrap();
        let scenario = Scenario::preset("a").unwrap();
        let env_cfg = EnvConfig::default();
        let a = evaluate(&agent, &scenario, &env_cfg, 0.1, 5, 9).unwrap();
        let b = evaluate(&agent, &scenario, &env_cfg, 0.1, 5, 9).unwrap();
        let clean = evaluate(&agent, &scenario, &env_cfg, 0.0, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, clean);
    }

    proptest! {
        #[test]
        fn standard_error_matches_two_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..50)) {
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let ss = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>();
            let direct = (ss / (n - 1.0)).sqrt() / n.sqrt();
            prop_assert!((standard_error(&xs) - direct).abs() <= 1e-9 * direct.max(1.0));
        }

        #[test]
        fn ema_stays_within_the_running_range(xs in prop::collection::vec(-1e3f64..1e3, 1..50), f in 0.0f64..1.0) {
            let y = ema(&xs, f);
            for t in 0..xs.len() {
                let lo = xs[..=t].iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs[..=t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(y[t] >= lo - 1e-9 && y[t] <= hi + 1e-9);
            }
        }

        #[test]
        fn aad_is_nonnegative_and_scales(xs in prop::collection::vec(-10f64..10.0, 1..30), c in -5f64..5.0) {
            let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
            prop_assert!(aad(&xs) >= 0.0);
            prop_assert!((aad(&scaled) - c.abs() * aad(&xs)).abs() < 1e-9);
        }
    }
}
