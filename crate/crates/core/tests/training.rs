use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use prox24::baselines::magnitude_24;
use prox24::experiment::{Task, TaskConfig};
use prox24::model::ModelKind;
use prox24::tensor::{read_mask, read_weights, sparsity_ratio_24, write_mask, write_weights};
use prox24::train::{
    ablation_arms, read_checkpoint, train, train_observed, write_checkpoint, write_metrics_csv,
    ConstraintArm, TrainConfig,
};
use prox24::{Error, WeightTensor};

fn small_task(model: ModelKind, seed: u64) -> Task {
    let cfg = TaskConfig {
        model,
        input_dim: 16,
        hidden_dim: 8,
        output_dim: 8,
        n_calib: 80,
        n_test: 100,
        ..TaskConfig::default()
    };
    Task::generate(&cfg, seed).unwrap()
}

fn short_config() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 20,
        snapshot_every: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_same_result() {
    let task = small_task(ModelKind::Mlp2, 3);
    let cfg = short_config();
    let a = train(&task.teacher, &task.calib, &cfg).unwrap();
    let b = train(&task.teacher, &task.calib, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train(&task.teacher, &task.calib, &TrainConfig { seed: 7, ..cfg }).unwrap();
    assert_ne!(a.last_iterate, c.last_iterate);
}

#[test]
fn no_movement_gives_magnitude_mask() {
    let task = small_task(ModelKind::Mlp2, 4);
    let cfg = TrainConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        peak_lr: 0.0,
        ..short_config()
    };
    let res = train(&task.teacher, &task.calib, &cfg).unwrap();
    for (m, w0) in res.masks.iter().zip(task.teacher.layers()) {
        assert_eq!(*m, magnitude_24(w0));
    }
    assert_eq!(res.last_iterate, task.teacher.layers());
}

#[test]
fn output_contract_for_every_arm() {
    let task = small_task(ModelKind::Mlp2, 5);
    for (arm, cfg) in ablation_arms(&short_config()) {
        let res = train(&task.teacher, &task.calib, &cfg).unwrap();
        assert_eq!(res.removed_fraction(), 0.5, "{}", arm.as_str());
        for ((m, w), w0) in res
            .masks
            .iter()
            .zip(&res.final_weights)
            .zip(task.teacher.layers())
        {
            m.validate_24().unwrap();
            for i in 0..w.len() {
                let expected = if m.bits()[i] { w0.data()[i] } else { 0.0 };
                assert_eq!(w.data()[i].to_bits(), expected.to_bits());
            }
        }
        assert_eq!(res.total_steps, 20);
        assert_eq!(res.history.last().unwrap().step, 20);
        assert!(res.early_masks.is_some());
    }
}

#[test]
fn hard_both_is_sparse_at_every_step() {
    let task = small_task(ModelKind::Mlp2, 6);
    let cfg = TrainConfig {
        arm: ConstraintArm::HardBoth,
        ..short_config()
    };
    let w0 = task.teacher.layers().to_vec();
    let mut steps = 0;
    train_observed(&task.teacher, &task.calib, &cfg, |_, layers| {
        steps += 1;
        for (w, w0) in layers.iter().zip(&w0) {
            assert_eq!(sparsity_ratio_24(w, 0.0), 1.0);
            for (v, v0) in w.data().iter().zip(w0.data()) {
                assert!(*v == 0.0 || v == v0);
            }
        }
    })
    .unwrap();
    assert_eq!(steps, 20);
}

#[test]
fn hard_frozen_keeps_two_initial_values_per_block() {
    let task = small_task(ModelKind::Linear, 7);
    let cfg = TrainConfig {
        arm: ConstraintArm::HardFrozen,
        ..short_config()
    };
    let w0 = task.teacher.layers()[0].clone();
    train_observed(&task.teacher, &task.calib, &cfg, |_, layers| {
        for (blk, blk0) in layers[0].data().chunks(4).zip(w0.data().chunks(4)) {
            let same = blk.iter().zip(blk0).filter(|(a, b)| a == b).count();
            assert!(same >= 2, "{blk:?} vs {blk0:?}");
        }
    })
    .unwrap();
}

#[test]
fn divergence_keeps_history() {
    let task = small_task(ModelKind::Linear, 8);
    let cfg = TrainConfig {
        peak_lr: 1e6,
        lambda1: 0.0,
        snapshot_every: 1,
        ..short_config()
    };
    let student = task
        .teacher
        .with_layers(vec![task.teacher.layers()[0]
            .map(|v| 1.5 * v + 0.1)
            .unwrap()])
        .unwrap();
    match train(&student, &task.calib, &cfg) {
        Err(e @ Error::Diverged { .. }) => {
            assert!(e.is_divergence());
            let Error::Diverged { history, step, .. } = e else {
                unreachable!()
            };
            assert_eq!(history.len(), step);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn invalid_config_is_a_validation_error() {
    let task = small_task(ModelKind::Linear, 9);
    let cfg = TrainConfig {
        batch_size: 0,
        ..short_config()
    };
    let err = train(&task.teacher, &task.calib, &cfg).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn artifacts_round_trip_through_files() {
    let task = small_task(ModelKind::Mlp2, 10);
    let res = train(&task.teacher, &task.calib, &short_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let wpath = dir.path().join("w.nmpx");
    let mpath = dir.path().join("m.nmmk");
    let cpath = dir.path().join("ckpt.nmck");
    {
        let mut out = BufWriter::new(File::create(&wpath).unwrap());
        write_weights(&mut out, &res.final_weights[1]).unwrap();
        out.flush().unwrap();
        let mut out = BufWriter::new(File::create(&mpath).unwrap());
        write_mask(&mut out, &res.masks[1]).unwrap();
        out.flush().unwrap();
        let mut out = BufWriter::new(File::create(&cpath).unwrap());
        write_checkpoint(&mut out, res.total_steps as u64, &res.last_iterate).unwrap();
        out.flush().unwrap();
    }
    let w: WeightTensor = read_weights(&mut BufReader::new(File::open(&wpath).unwrap())).unwrap();
    assert_eq!(w, res.final_weights[1]);
    let m = read_mask(&mut BufReader::new(File::open(&mpath).unwrap())).unwrap();
    assert_eq!(m, res.masks[1]);
    let (step, layers) = read_checkpoint(&mut BufReader::new(File::open(&cpath).unwrap())).unwrap();
    assert_eq!(step, 20);
    assert_eq!(layers, res.last_iterate);

    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &res.history).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), res.history.len() + 1);
}
