//! Full SAC loop on a one-step bandit with reward `-(a - a*)^2`.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uambrl::replay::{ReplayBuffer, Source, Transition};
use uambrl::sac::{ActMode, SacAgent, SacConfig};

fn run(seed: u64, target: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = SacConfig {
        lr: 1e-3,
        ..SacConfig::default()
    };
    let mut agent = SacAgent::new(1, 1, &config, &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(32768).unwrap();
    // uniform warm-up data before the first update
    for _ in 0..256 {
        let a = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let r = -(a - target).powi(2);
        buffer.push(Transition::new(vec![1.0], vec![a], r, vec![1.0], true, Source::Real).unwrap());
    }
    for _ in 0..2000 {
        let a = agent.act(&[1.0], ActMode::Stochastic, &mut rng).unwrap();
        let r = -(a[0] - target).powi(2);
        buffer.push(Transition::new(vec![1.0], a, r, vec![1.0], true, Source::Real).unwrap());
        let batch = buffer.sample(64, &mut rng).unwrap();
        agent.update(&batch, &mut rng).unwrap();
    }
    agent.act(&[1.0], ActMode::Deterministic, &mut rng).unwrap()[0]
}

#[test]
fn converges_to_the_optimum_on_five_seeds() {
    let target = 0.5;
    for seed in 0..5 {
        let a = run(seed, target);
        eprintln!("seed {seed}: {a}");
        assert!((a - target).abs() < 0.05, "seed {seed}: final action {a}");
    }
}
