//! Ensemble of probabilistic dynamics models with fixed output noise.
//!
//! Each member maps `concat(s, a)` to the mean of `concat(s' - s, r)`. Inputs
//! and targets are standardized with statistics of the training buffer,
//! refreshed at every [`Ensemble::train`] call; `sigma_fixed`, the member
//! means returned by [`Ensemble::ensemble_stats`] and the uncertainty score
//! all live in that standardized target space.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_net, write_net};
use crate::nn::{adam_step, AdamState, DenseNet, Tensor};
use crate::replay::Transition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldModelConfig {
    pub ensemble_size: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Caps the minibatches drawn per epoch; `0` means a full pass.
    pub max_batches_per_epoch: usize,
    pub sigma_obs: f64,
    pub sigma_reward: f64,
    pub std_floor: f64,
}

impl Default for WorldModelConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 5,
            hidden: vec![128, 128],
            lr: 5e-4,
            batch_size: 128,
            epochs: 20,
            max_batches_per_epoch: 0,
            sigma_obs: 0.01,
            sigma_reward: 0.05,
            std_floor: 1e-3,
        }
    }
}

impl WorldModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::config("model.ensemble_size", "must be >= 1"));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::config("model.hidden", "widths must be > 0"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("model.lr", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("model.batch_size", "must be >= 1"));
        }
        if !(self.sigma_obs > 0.0) {
            return Err(Error::config("model.sigma_obs", "must be > 0"));
        }
        if !(self.sigma_reward > 0.0) {
            return Err(Error::config("model.sigma_reward", "must be > 0"));
        }
        if !(self.std_floor > 0.0) {
            return Err(Error::config("model.std_floor", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-feature affine standardization of model inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_std: Vec<f64>,
}

fn mean_std(rows: &[Vec<f64>], dim: usize, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt().max(floor)).collect();
    (mean, std)
}

impl Normalizer {
    pub fn identity(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_mean: vec![0.0; in_dim],
            in_std: vec![1.0; in_dim],
            out_mean: vec![0.0; out_dim],
            out_std: vec![1.0; out_dim],
        }
    }

    fn fit(inputs: &[Vec<f64>], targets: &[Vec<f64>], floor: f64) -> Self {
        let (in_mean, in_std) = mean_std(inputs, inputs[0].len(), floor);
        let (out_mean, out_std) = mean_std(targets, targets[0].len(), floor);
        Self {
            in_mean,
            in_std,
            out_mean,
            out_std,
        }
    }

    fn input(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.in_mean)
            .zip(&self.in_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    fn target(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.out_mean)
            .zip(&self.out_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DynamicsModel {
    pub net: DenseNet,
    pub adam: AdamState,
}

/// Mixture moments per output dimension, in standardized target units.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// The member-disagreement part of `variance`.
    pub epistemic: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// `epoch_losses[member][epoch]`: mean minibatch loss of that epoch.
    pub epoch_losses: Vec<Vec<f64>>,
}

impl TrainReport {
    pub fn final_losses(&self) -> Vec<f64> {
        self.epoch_losses
            .iter()
            .map(|l| l.last().copied().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn mean_final_loss(&self) -> f64 {
        let f = self.final_losses();
        f.iter().sum::<f64>() / f.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<DynamicsModel>,
    sigma_fixed: Vec<f64>,
    normalizer: Normalizer,
    obs_dim: usize,
    action_dim: usize,
    config: WorldModelConfig,
}

/// Population variance of `xs` computed on values shifted by `xs[0]`, so a
/// set of identical values gives exactly zero.
fn shifted_variance(xs: impl Iterator<Item = f64> + Clone, first: f64, n: f64) -> f64 {
    let s1: f64 = xs.clone().map(|x| x - first).sum::<f64>() / n;
    let s2: f64 = xs.map(|x| (x - first) * (x - first)).sum::<f64>() / n;
    (s2 - s1 * s1).max(0.0)
}

impl Ensemble {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        config: &WorldModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let members = (0..config.ensemble_size)
            .map(|_| {
                let net = DenseNet::mlp(obs_dim + action_dim, &config.hidden, obs_dim + 1, rng)?;
                let adam = AdamState::new(net.num_params(), config.lr);
                Ok(DynamicsModel { net, adam })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sigma_fixed = vec![config.sigma_obs; obs_dim];
        sigma_fixed.push(config.sigma_reward);
        Ok(Self {
            members,
            sigma_fixed,
            normalizer: Normalizer::identity(obs_dim + action_dim, obs_dim + 1),
            obs_dim,
            action_dim,
            config: config.clone(),
        })
    }

    /// Assembles an ensemble from existing networks (all with the same shape).
    pub fn from_parts(
        nets: Vec<DenseNet>,
        sigma_fixed: Vec<f64>,
        normalizer: Normalizer,
        config: &WorldModelConfig,
    ) -> Result<Self> {
        let first = nets
            .first()
            .ok_or_else(|| Error::Precondition("ensemble needs at least one member".into()))?;
        let out = first.output_width();
        if out < 2 {
            return Err(Error::shape("Ensemble output width", ">= 2", out));
        }
        let obs_dim = out - 1;
        let in_dim = first.input_width();
        if in_dim <= obs_dim {
            return Err(Error::shape("Ensemble input width", format!("> {obs_dim}"), in_dim));
        }
        if nets.iter().any(|n| n.widths() != first.widths()) {
            return Err(Error::Precondition("ensemble members must share one architecture".into()));
        }
        if sigma_fixed.len() != out || sigma_fixed.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Precondition(format!(
                "sigma_fixed needs {out} positive entries"
            )));
        }
        if normalizer.in_mean.len() != in_dim
            || normalizer.in_std.len() != in_dim
            || normalizer.out_mean.len() != out
            || normalizer.out_std.len() != out
        {
            return Err(Error::shape("Ensemble normalizer", format!("{in_dim}/{out}"), "other"));
        }
        let members = nets
            .into_iter()
            .map(|net| DynamicsModel {
                adam: AdamState::new(net.num_params(), config.lr),
                net,
            })
            .collect();
        Ok(Self {
            members,
            sigma_fixed,
            normalizer,
            obs_dim,
            action_dim: in_dim - obs_dim,
            config: config.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[DynamicsModel] {
        &self.members
    }

    pub fn sigma_fixed(&self) -> &[f64] {
        &self.sigma_fixed
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn model_input(&self, s: &[f64], a: &[f64]) -> Result<Tensor> {
        if s.len() != self.obs_dim {
            return Err(Error::shape("Ensemble observation", self.obs_dim, s.len()));
        }
        if a.len() != self.action_dim {
            return Err(Error::shape("Ensemble action", self.action_dim, a.len()));
        }
        let raw: Vec<f64> = s.iter().chain(a).copied().collect();
        Tensor::vector(self.normalizer.input(&raw))
    }

    /// Standardized mean output of every member.
    pub fn member_means(&self, s: &[f64], a: &[f64]) -> Result<Vec<Vec<f64>>> {
        let x = self.model_input(s, a)?;
        self.members
            .iter()
            .map(|m| match m.net.forward(&x) {
                Ok(y) => Ok(y.into_data()),
                Err(Error::NonFinite(_)) => Err(Error::ModelDivergence),
                Err(e) => Err(e),
            })
            .collect()
    }

    /// Samples one member's Gaussian and maps it back to `(s', r)`.
    pub fn predict(&self, member: usize, s: &[f64], a: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64)> {
        let model = self
            .members
            .get(member)
            .ok_or_else(|| Error::Precondition(format!("no ensemble member {member}")))?;
        if noise.len() != self.obs_dim + 1 {
            return Err(Error::shape("Ensemble::predict noise", self.obs_dim + 1, noise.len()));
        }
        let x = self.model_input(s, a)?;
        let mean = match model.net.forward(&x) {
            Ok(y) => y.into_data(),
            Err(Error::NonFinite(_)) => return Err(Error::ModelDivergence),
            Err(e) => return Err(e),
        };
        let norm = &self.normalizer;
        let d: Vec<f64> = (0..=self.obs_dim)
            .map(|j| norm.out_mean[j] + norm.out_std[j] * (mean[j] + self.sigma_fixed[j] * noise[j]))
            .collect();
        let s_next: Vec<f64> = s.iter().zip(&d).map(|(x, dx)| x + dx).collect();
        let r = d[self.obs_dim];
        if !r.is_finite() || s_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelDivergence);
        }
        Ok((s_next, r))
    }

    /// Gaussian-mixture mean and variance over members, per output dimension.
    pub fn ensemble_stats(&self, s: &[f64], a: &[f64]) -> Result<EnsembleStats> {
        let means = self.member_means(s, a)?;
        Ok(self.stats_from_means(&means))
    }

    /// Mixture moments of members with the given means and this ensemble's
    /// fixed noise.
    pub fn stats_from_means(&self, means: &[Vec<f64>]) -> EnsembleStats {
        mixture_stats(means, &self.sigma_fixed)
    }

    /// Mean epistemic variance over the next-state dimensions.
    pub fn uncertainty(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        let stats = self.ensemble_stats(s, a)?;
        Ok(stats.epistemic[..self.obs_dim].iter().sum::<f64>() / self.obs_dim as f64)
    }

    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.members.len())
    }

    /// Refits the normalizer to `data`, then trains every member for
    /// `config.epochs` epochs of independently shuffled minibatches.
    pub fn train<'a, R, I>(&mut self, data: I, rng: &mut R) -> Result<TrainReport>
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'a Transition>,
    {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for t in data {
            if t.s.len() != self.obs_dim || t.a.len() != self.action_dim {
                return Err(Error::shape(
                    "Ensemble::train transition",
                    format!("{}+{}", self.obs_dim, self.action_dim),
                    format!("{}+{}", t.s.len(), t.a.len()),
                ));
            }
            inputs.push(t.s.iter().chain(&t.a).copied().collect::<Vec<_>>());
            let mut d: Vec<f64> = t.s_next.iter().zip(&t.s).map(|(n, o)| n - o).collect();
            d.push(t.r);
            targets.push(d);
        }
        let bs = self.config.batch_size;
        if inputs.is_empty() || inputs.len() < bs {
            return Err(Error::Precondition(format!(
                "model training needs at least {bs} transitions, got {}",
                inputs.len()
            )));
        }
        self.normalizer = Normalizer::fit(&inputs, &targets, self.config.std_floor);
        let in_dim = self.obs_dim + self.action_dim;
        let out_dim = self.obs_dim + 1;
        let xs: Vec<f64> = inputs.iter().flat_map(|r| self.normalizer.input(r)).collect();
        let ys: Vec<f64> = targets.iter().flat_map(|r| self.normalizer.target(r)).collect();

        let n = inputs.len();
        let mut batches_per_epoch = n.div_ceil(bs);
        if self.config.max_batches_per_epoch > 0 {
            batches_per_epoch = batches_per_epoch.min(self.config.max_batches_per_epoch);
        }
        let mut epoch_losses = Vec::with_capacity(self.members.len());
        let mut order: Vec<usize> = (0..n).collect();
        let mut bx = Vec::with_capacity(bs * in_dim);
        let mut by = Vec::with_capacity(bs * out_dim);
        for member in &mut self.members {
            let mut losses = Vec::with_capacity(self.config.epochs);
            for _ in 0..self.config.epochs {
                order.shuffle(rng);
                let mut total = 0.0;
                for chunk in order.chunks(bs).take(batches_per_epoch) {
                    bx.clear();
                    by.clear();
                    for &i in chunk {
                        bx.extend_from_slice(&xs[i * in_dim..(i + 1) * in_dim]);
                        by.extend_from_slice(&ys[i * out_dim..(i + 1) * out_dim]);
                    }
                    total += mse_step(member, chunk.len(), &bx, &by)?;
                }
                losses.push(total / batches_per_epoch as f64);
            }
            epoch_losses.push(losses);
        }
        Ok(TrainReport { epoch_losses })
    }

    /// Writes all members followed by the normalization record.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "ensemble_members={}", self.members.len())?;
        for m in &self.members {
            write_net(&m.net, &mut out)?;
        }
        let n = &self.normalizer;
        writeln!(out, "normalization")?;
        writeln!(out, "in_dim={}", n.in_mean.len())?;
        writeln!(out, "out_dim={}", n.out_mean.len())?;
        writeln!(out, "end_header")?;
        let mut bytes = Vec::new();
        for v in n
            .in_mean
            .iter()
            .chain(&n.in_std)
            .chain(&n.out_mean)
            .chain(&n.out_std)
            .chain(&self.sigma_fixed)
        {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: &mut R, config: &WorldModelConfig) -> Result<Self> {
        let count: usize = header_value(input, "ensemble_members")?;
        let nets = (0..count).map(|_| read_net(input)).collect::<Result<Vec<_>>>()?;
        expect_line(input, "normalization")?;
        let in_dim: usize = header_value(input, "in_dim")?;
        let out_dim: usize = header_value(input, "out_dim")?;
        expect_line(input, "end_header")?;
        let mut take = |k: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; k * 8];
            input.read_exact(&mut buf).map_err(|e| parse_err(format!("truncated normalization: {e}")))?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let normalizer = Normalizer {
            in_mean: take(in_dim)?,
            in_std: take(in_dim)?,
            out_mean: take(out_dim)?,
            out_std: take(out_dim)?,
        };
        let sigma_fixed = take(out_dim)?;
        Self::from_parts(nets, sigma_fixed, normalizer, config)
    }
}

/// Mixture moments of members sharing the fixed noise `sigma`.
pub fn mixture_stats(means: &[Vec<f64>], sigma: &[f64]) -> EnsembleStats {
    let n = means.len() as f64;
    let dim = sigma.len();
    let mut mean = Vec::with_capacity(dim);
    let mut variance = Vec::with_capacity(dim);
    let mut epistemic = Vec::with_capacity(dim);
    for j in 0..dim {
        let col = means.iter().map(|m| m[j]);
        mean.push(col.clone().sum::<f64>() / n);
        let ep = shifted_variance(col, means[0][j], n);
        epistemic.push(ep);
        variance.push(sigma[j] * sigma[j] + ep);
    }
    EnsembleStats {
        mean,
        variance,
        epistemic,
    }
}

fn mse_step(member: &mut DynamicsModel, rows: usize, bx: &[f64], by: &[f64]) -> Result<f64> {
    let out_dim = member.net.output_width();
    let x = Tensor::matrix(rows, member.net.input_width(), bx.to_vec())?;
    let (pred, cache) = member.net.forward_cached(&x).map_err(|e| match e {
        Error::NonFinite(_) => Error::ModelDivergence,
        e => e,
    })?;
    let count = (rows * out_dim) as f64;
    let mut loss = 0.0;
    let up: Vec<f64> = pred
        .data()
        .iter()
        .zip(by)
        .map(|(p, y)| {
            let d = p - y;
            loss += d * d;
            2.0 * d / count
        })
        .collect();
    let grads = member
        .net
        .backward_cached(&cache, &Tensor::matrix(rows, out_dim, up)?)?;
    adam_step(member.net.params_mut(), &grads.params, &mut member.adam).map_err(|e| match e {
        Error::Divergence(_) => Error::ModelDivergence,
        e => e,
    })?;
    Ok(loss / count)
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        what: "ensemble checkpoint",
        message: message.into(),
    }
}

fn read_line<R: BufRead>(input: &mut R) -> Result<String> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Err(parse_err("unexpected end of file"));
    }
    Ok(line.trim_end().to_string())
}

fn expect_line<R: BufRead>(input: &mut R, want: &str) -> Result<()> {
    let line = read_line(input)?;
    if line != want {
        return Err(parse_err(format!("expected `{want}`, found `{line}`")));
    }
    Ok(())
}

fn header_value<R: BufRead, T: std::str::FromStr>(input: &mut R, key: &str) -> Result<T> {
    let line = read_line(input)?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(format!("expected `{key}=<value>`, found `{line}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::Source;
    use crate::rng::normal_vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config(n: usize) -> WorldModelConfig {
        WorldModelConfig {
            ensemble_size: n,
            hidden: vec![32, 32],
            batch_size: 32,
            ..WorldModelConfig::default()
        }
    }

    fn identical(n: usize, obs: usize) -> Ensemble {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::mlp(obs + 1, &[8], obs + 1, &mut rng).unwrap();
        let config = small_config(n);
        let mut sigma = vec![config.sigma_obs; obs];
        sigma.push(config.sigma_reward);
        Ensemble::from_parts(
            vec![net; n],
            sigma,
            Normalizer::identity(obs + 1, obs + 1),
            &config,
        )
        .unwrap()
    }

    fn two_pass_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
    }

    #[test]
    fn members_diverge_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = Ensemble::new(23, 1, &WorldModelConfig::default(), &mut rng).unwrap();
        assert_eq!(e.len(), 5);
        let sums: Vec<u64> = e.members().iter().map(|m| m.net.checksum()).collect();
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(sums[i], sums[j]);
            }
        }
        assert_eq!(e.members()[0].net.widths(), &[24, 128, 128, 24]);
    }

    #[test]
    fn identical_members_have_only_aleatoric_variance() {
        let e = identical(5, 3);
        let stats = e.ensemble_stats(&[0.3, -1.0, 2.0], &[0.2]).unwrap();
        for (v, s) in stats.variance.iter().zip(e.sigma_fixed()) {
            assert_eq!(*v, s * s);
        }
        assert!(stats.epistemic.iter().all(|&x| x == 0.0));
        assert_eq!(e.uncertainty(&[0.3, -1.0, 2.0], &[0.2]).unwrap(), 0.0);
    }

    #[test]
    fn two_member_hand_case() {
        let stats = mixture_stats(&[vec![0.0], vec![2.0]], &[0.0]);
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.variance, vec![1.0]);
    }

    #[test]
    fn uncertainty_of_fabricated_means() {
        // means {0, 2} on every dimension -> epistemic 1 per dim
        let means = vec![vec![0.0; 4], vec![2.0; 4]];
        let st = mixture_stats(&means, &[0.01, 0.01, 0.01, 0.05]);
        let obs_part = st.epistemic[..3].iter().sum::<f64>() / 3.0;
        assert_eq!(obs_part, 1.0);
    }

    proptest! {
        #[test]
        fn mixture_variance_matches_two_pass(
            means in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..8),
            sigma in prop::collection::vec(0.001f64..1.0, 3),
        ) {
            let st = mixture_stats(&means, &sigma);
            for j in 0..3 {
                let col: Vec<f64> = means.iter().map(|m| m[j]).collect();
                let oracle = sigma[j] * sigma[j] + two_pass_variance(&col);
                prop_assert!((st.variance[j] - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_noise_is_the_mean_and_noise_is_symmetric() {
        let e = identical(2, 3);
        let s = [0.5, 0.1, -0.3];
        let a = [0.4];
        let means = e.member_means(&s, &a).unwrap();
        let (s0, r0) = e.predict(0, &s, &a, &[0.0; 4]).unwrap();
        for j in 0..3 {
            assert!((s0[j] - (s[j] + means[0][j])).abs() < 1e-15);
        }
        assert_eq!(r0, means[0][3]);
        let z = [0.7, -1.2, 0.3, 2.0];
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let (sp, rp) = e.predict(0, &s, &a, &z).unwrap();
        let (sn, rn) = e.predict(0, &s, &a, &neg).unwrap();
        for j in 0..3 {
            assert!(((sp[j] + sn[j]) / 2.0 - s0[j]).abs() < 1e-12);
        }
        assert!(((rp + rn) / 2.0 - r0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_std_matches_sigma_fixed() {
        let e = identical(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = [0.2, 0.0, 1.0];
        let n = 10_000;
        let samples: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| e.predict(0, &s, &[0.1], &normal_vec(&mut rng, 4)).unwrap())
            .collect();
        for j in 0..4 {
            let col: Vec<f64> = samples
                .iter()
                .map(|(sn, r)| if j < 3 { sn[j] } else { *r })
                .collect();
            let std = two_pass_variance(&col).sqrt();
            let want = e.sigma_fixed()[j];
            assert!((std / want - 1.0).abs() < 0.03, "dim {j}: {std} vs {want}");
        }
    }

    #[test]
    fn predict_does_not_mutate() {
        let e = identical(3, 2);
        let before: Vec<u64> = e.members().iter().map(|m| m.net.checksum()).collect();
        for _ in 0..10 {
            e.predict(1, &[0.0, 1.0], &[0.5], &[0.3, 0.2, 0.1]).unwrap();
        }
        let after: Vec<u64> = e.members().iter().map(|m| m.net.checksum()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn member_sampling_is_uniform_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = identical(5, 2);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n {
            counts[e.sample_member(&mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01, "{counts:?}");
        }
        let one = identical(1, 2);
        assert!((0..100).all(|_| one.sample_member(&mut rng) == 0));
        let seq = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| e.sample_member(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(seq(9), seq(9));
    }

    fn linear_data(n: usize, rng: &mut ChaCha8Rng) -> Vec<Transition> {
        (0..n)
            .map(|_| {
                let s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a = rng.random_range(-1.0..1.0);
                let s_next = vec![s[0] + 0.1 * a, s[1] + 0.1 * a];
                let r = 0.5 * s[0] - a;
                Transition::new(s, vec![a], r, s_next, false, Source::Real).unwrap()
            })
            .collect()
    }

    #[test]
    fn learns_a_linear_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = WorldModelConfig {
            epochs: 500,
            ..small_config(1)
        };
        let mut e = Ensemble::new(2, 1, &config, &mut rng).unwrap();
        let train = linear_data(256, &mut rng);
        let test = linear_data(200, &mut rng);
        e.train(&train, &mut rng).unwrap();
        let mut mse = 0.0;
        for t in &test {
            let (sn, _) = e.predict(0, &t.s, &t.a, &[0.0; 3]).unwrap();
            mse += sn.iter().zip(&t.s_next).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 2.0;
        }
        mse /= test.len() as f64;
        assert!(mse < 1e-3, "held-out mse {mse}");
    }

    #[test]
    fn memorizes_a_single_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let config = WorldModelConfig {
            epochs: 300,
            batch_size: 8,
            ..small_config(2)
        };
        let mut e = Ensemble::new(2, 1, &config, &mut rng).unwrap();
        let t = Transition::new(vec![0.3, -0.4], vec![0.1], 0.7, vec![0.5, -0.1], false, Source::Real).unwrap();
        let data = vec![t; 8];
        let report = e.train(&data, &mut rng).unwrap();
        for l in report.final_losses() {
            assert!(l < 1e-6, "{l}");
        }
    }

    #[test]
    fn underfull_buffer_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut e = Ensemble::new(2, 1, &small_config(2), &mut rng).unwrap();
        let data = linear_data(4, &mut rng);
        assert!(matches!(e.train(&data, &mut rng), Err(Error::Precondition(_))));
        assert!(matches!(e.train(&[], &mut rng), Err(Error::Precondition(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let config = WorldModelConfig {
            epochs: 2,
            ..small_config(3)
        };
        let mut e = Ensemble::new(2, 1, &config, &mut rng).unwrap();
        e.train(&linear_data(64, &mut rng), &mut rng).unwrap();
        let mut bytes = Vec::new();
        e.write(&mut bytes).unwrap();
        let back = Ensemble::read(&mut bytes.as_slice(), &config).unwrap();
        assert_eq!(back.normalizer(), e.normalizer());
        assert_eq!(back.sigma_fixed(), e.sigma_fixed());
        for (a, b) in back.members().iter().zip(e.members()) {
            assert_eq!(a.net, b.net);
        }
        let truncated = &bytes[..bytes.len() - 4];
        assert!(Ensemble::read(&mut &truncated[..], &config).is_err());
    }
}
