#![allow(dead_code)]

use uambrl::trainer::{Algorithm, EpochRecord, TrainConfig};

/// Narrow networks and short warm-ups so a run takes well under a second.
pub fn tiny(algorithm: Algorithm, seed: u64, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig {
        algorithm,
        master_seed: seed,
        epochs,
        warmup_transitions: 64,
        ..TrainConfig::default()
    };
    c.sac.actor_hidden = vec![16, 16];
    c.sac.critic_hidden = vec![16, 16];
    c.sac.batch_size = 16;
    c.model.hidden = vec![16, 16];
    c.model.batch_size = 32;
    c.model.epochs = 2;
    c.model.max_batches_per_epoch = 4;
    c.shaping.rnd_hidden = vec![16];
    c.shaping.rnd_output = 8;
    c.shaping.rnd_batch = 16;
    c.shaping.warmup_states = 20;
    c
}

pub fn jsonl(records: &[EpochRecord]) -> Vec<String> {
    records.iter().map(|r| serde_json::to_string(r).unwrap()).collect()
}
