//! Settings shared by the integration tests.
#![allow(dead_code)]

use ttea::{SynthConfig, TrainConfig};

/// 200 entities, 20 relations, degree 5, drop 0.15, noise 0.3, width 32.
pub fn desk_synth() -> SynthConfig {
    SynthConfig {
        n_entities: 200,
        n_relations: 20,
        avg_degree: 5.0,
        drop_triple_prob: 0.15,
        emb_noise_sigma: 0.3,
        emb_dim: 32,
        ..SynthConfig::default()
    }
}

/// Defaults except the small relation/type widths; 50 epochs.
pub fn desk_config() -> TrainConfig {
    TrainConfig {
        d_e: Some(32),
        d_r: 16,
        d_t: 16,
        epochs: 50,
        ..TrainConfig::default()
    }
}

pub fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_entities: 40,
        n_relations: 5,
        emb_dim: 8,
        seed,
        ..SynthConfig::default()
    }
}

pub fn small_config() -> TrainConfig {
    TrainConfig {
        d_r: 4,
        d_t: 4,
        epochs: 6,
        ..TrainConfig::default()
    }
}
