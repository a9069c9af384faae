mod common;

use common::{jsonl, tiny};
use uambrl::env::Scenario;
use uambrl::replay::Source;
use uambrl::trainer::{train, Algorithm, EpochRecord};

fn scenario() -> Scenario {
    Scenario::preset("a").unwrap()
}

/// Fields that do not depend on whether a model is trained alongside.
fn behaviour(r: &EpochRecord) -> (usize, usize, u64, usize, bool, usize, usize, Option<u64>, Option<u64>) {
    (
        r.epoch,
        r.real_steps,
        r.episode_reward.to_bits(),
        r.episode_duration_steps,
        r.collision,
        r.dm_size,
        r.de_size,
        r.critic_loss.map(f64::to_bits),
        r.actor_loss.map(f64::to_bits),
    )
}

#[test]
fn smoke_run_accounts_for_every_real_step() {
    let out = train(&tiny(Algorithm::Adaptive, 0, 3), &scenario()).unwrap();
    assert!(out.records.len() >= 3);
    let last = out.records.last().unwrap();
    let durations: usize = out.records.iter().map(|r| r.episode_duration_steps).sum();
    assert_eq!(last.real_steps, durations);
    assert_eq!(last.de_size, last.real_steps);
    assert_eq!(out.real_buffer.len(), last.real_steps);
    assert!(out.real_buffer.iter().all(|t| t.source == Source::Real));
}

#[test]
fn zero_rollouts_reproduce_vanilla_exactly() {
    let vanilla = train(&tiny(Algorithm::Vanilla, 4, 8), &scenario()).unwrap();
    let mut cfg = tiny(Algorithm::Adaptive, 4, 8);
    cfg.rollout.rollouts_per_step = 0;
    let adaptive = train(&cfg, &scenario()).unwrap();
    assert_eq!(jsonl(&vanilla.records), jsonl(&adaptive.records));
    assert!(adaptive.model_buffer.is_empty());
    assert!(adaptive.ensemble.is_none());
}

#[test]
fn fixed_zero_reproduces_vanilla_exactly() {
    let vanilla = train(&tiny(Algorithm::Vanilla, 5, 8), &scenario()).unwrap();
    let fixed = train(&tiny(Algorithm::FixedK(0), 5, 8), &scenario()).unwrap();
    assert_eq!(jsonl(&vanilla.records), jsonl(&fixed.records));
}

#[test]
fn infinite_omega_matches_vanilla_behaviour() {
    let vanilla = train(&tiny(Algorithm::Vanilla, 6, 10), &scenario()).unwrap();
    let mut cfg = tiny(Algorithm::Adaptive, 6, 10);
    cfg.rollout.omega = f64::INFINITY;
    let adaptive = train(&cfg, &scenario()).unwrap();
    let a: Vec<_> = adaptive.records.iter().map(behaviour).collect();
    let v: Vec<_> = vanilla.records.iter().map(behaviour).collect();
    assert_eq!(a, v);
    assert!(adaptive.records.iter().any(|r| r.model_loss.is_some()));
    assert!(adaptive.records.iter().all(|r| r.mean_rollout_len == 0.0));
    assert!(adaptive.model_buffer.is_empty());
}

#[test]
fn first_episode_precedes_any_model_influence() {
    let v = train(&tiny(Algorithm::Vanilla, 2, 1), &scenario()).unwrap();
    let a = train(&tiny(Algorithm::Adaptive, 2, 1), &scenario()).unwrap();
    assert_eq!(behaviour(&v.records[0]), behaviour(&a.records[0]));
}

#[test]
fn same_seed_same_log() {
    let cfg = tiny(Algorithm::Adaptive, 11, 6);
    let a = train(&cfg, &scenario()).unwrap();
    let b = train(&cfg, &scenario()).unwrap();
    assert_eq!(jsonl(&a.records), jsonl(&b.records));
    assert_eq!(a.probe_trace, b.probe_trace);
    let other = train(&tiny(Algorithm::Adaptive, 12, 6), &scenario()).unwrap();
    assert_ne!(jsonl(&a.records), jsonl(&other.records));
}

#[test]
fn model_buffer_growth_matches_rollout_accounting() {
    let k = 3;
    let mut cfg = tiny(Algorithm::FixedK(k), 3, 10);
    cfg.model_capacity = 1 << 20;
    let out = train(&cfg, &scenario()).unwrap();
    let mut prev = 0;
    let mut launched = 0;
    for r in &out.records {
        assert_eq!(r.dm_size - prev, r.virtual_added);
        assert!(r.virtual_added <= r.rollouts_launched * k);
        if r.early_stops == 0 {
            assert_eq!(r.virtual_added, r.rollouts_launched * k);
        }
        prev = r.dm_size;
        launched += r.rollouts_launched;
    }
    assert!(launched > 0);
    assert!(out.model_buffer.iter().all(|t| t.source == Source::Virtual && !t.done));
}

#[test]
fn adaptive_rollouts_stay_within_bounds() {
    let out = train(&tiny(Algorithm::Adaptive, 8, 10), &scenario()).unwrap();
    assert!(!out.probe_trace.is_empty());
    for r in &out.records {
        assert!(r.mean_rollout_len >= 0.0 && r.mean_rollout_len <= 6.0);
        if let Some(u) = r.mean_uncertainty {
            assert!(u >= 0.0 && u.is_finite());
        }
    }
    assert!(out.probe_trace.iter().all(|p| p.k_star <= 6));
    assert!(out.probe_trace.windows(2).all(|w| w[0].real_step < w[1].real_step));
}

#[test]
fn real_step_budget_stops_new_episodes() {
    let mut cfg = tiny(Algorithm::Vanilla, 1, 1000);
    cfg.real_step_budget = 150;
    let out = train(&cfg, &scenario()).unwrap();
    let n = out.records.len();
    assert!(out.records[n - 1].real_steps >= 150);
    assert!(n == 1 || out.records[n - 2].real_steps < 150);
}

#[test]
fn shaped_rewards_are_what_the_buffer_stores() {
    let out = train(&tiny(Algorithm::Vanilla, 9, 4), &scenario()).unwrap();
    let stored: f64 = out.real_buffer.iter().map(|t| t.r).sum();
    let logged: f64 = out.records.iter().map(|r| r.episode_reward).sum();
    assert!((stored - logged).abs() < 1e-9 * logged.abs().max(1.0));
}
