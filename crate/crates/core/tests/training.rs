mod common;

use std::collections::HashSet;

use ttea::train::{fit_with, EpochLog};
use ttea::{fit, generate_synthetic_pair, TrainConfig, Variant};

use common::{desk_config, desk_synth, small_config, small_synth};

#[test]
fn zero_epochs_leaves_parameters_untouched() {
    let task = generate_synthetic_pair(&small_synth(4)).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..small_config()
    };
    let out = fit(&task, &cfg).unwrap();
    assert!(out.history.is_empty());
    let again = fit(&task, &cfg).unwrap();
    assert_eq!(out.model, again.model);
    assert_eq!(out.model.params.get("emb.kg1").unwrap(), &task.init_emb1);
}

#[test]
fn loss_curves_are_bitwise_reproducible() {
    let task = generate_synthetic_pair(&small_synth(5)).unwrap();
    let cfg = TrainConfig {
        semi: true,
        neg_sample_all: false,
        epochs: 12,
        ..small_config()
    };
    let a = fit(&task, &cfg).unwrap();
    let b = fit(&task, &cfg).unwrap();
    let bits = |h: &[EpochLog]| h.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.history), bits(&b.history));
    assert_eq!(a.final1, b.final1);
    let c = fit(&task, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(bits(&a.history), bits(&c.history));
}

#[test]
fn loss_does_not_grow_between_refreshes() {
    let task = generate_synthetic_pair(&desk_synth()).unwrap();
    let cfg = desk_config();
    let out = fit(&task, &cfg).unwrap();
    for w in out.history.chunks(cfg.neg_refresh_epochs) {
        assert!(w.last().unwrap().loss <= w[0].loss + 1e-9, "{w:?}");
    }
}

#[test]
fn every_variant_and_mode_trains() {
    let task = generate_synthetic_pair(&small_synth(6)).unwrap();
    for variant in Variant::ALL {
        for mode in 1..=3 {
            let mut cfg = small_config();
            cfg.variant = variant;
            cfg.cycle_mode = ttea::CycleMode::from_number(mode).unwrap();
            let out = fit(&task, &cfg).unwrap_or_else(|e| panic!("{variant} mode{mode}: {e}"));
            assert_eq!(out.final1.cols(), 2 * task.emb_dim());
            assert!(out.history.iter().all(|e| e.loss.is_finite() && e.loss >= 0.0));
        }
    }
}

#[test]
fn seed_expansion_only_grows_and_never_duplicates() {
    let task = generate_synthetic_pair(&ttea::SynthConfig {
        train_ratio: 0.1,
        ..small_synth(7)
    })
    .unwrap();
    let cfg = TrainConfig {
        semi: true,
        epochs: 16,
        ..small_config()
    };
    let mut sizes = Vec::new();
    let out = fit_with(&task, &cfg, |e| sizes.push(e.train_pairs)).unwrap();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(out.train_pairs.len(), task.seeds_train.len() + out.proposed.len());
    let left: HashSet<usize> = out.train_pairs.iter().map(|p| p.0).collect();
    let right: HashSet<usize> = out.train_pairs.iter().map(|p| p.1).collect();
    assert_eq!(left.len(), out.train_pairs.len());
    assert_eq!(right.len(), out.train_pairs.len());
    // growth only happens on refresh epochs after the first
    for (epoch, w) in sizes.windows(2).enumerate() {
        if w[1] > w[0] {
            assert_eq!((epoch + 1) % cfg.neg_refresh_epochs, 0);
        }
    }
}

#[test]
fn in_training_eval_is_logged_on_schedule() {
    let task = generate_synthetic_pair(&small_synth(8)).unwrap();
    let cfg = TrainConfig {
        eval_every: 3,
        ..small_config()
    };
    let out = fit(&task, &cfg).unwrap();
    let logged: Vec<usize> = out.history.iter().filter(|e| e.hits1.is_some()).map(|e| e.epoch).collect();
    assert_eq!(logged, vec![0, 3]);
}

#[test]
fn mismatched_entity_width_is_rejected() {
    let task = generate_synthetic_pair(&small_synth(9)).unwrap();
    let cfg = TrainConfig {
        d_e: Some(5),
        ..small_config()
    };
    assert!(matches!(fit(&task, &cfg), Err(ttea::Error::Config(_))));
}
