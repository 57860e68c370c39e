use std::sync::OnceLock;

use mogam::dataset::Dataset;
use mogam::fusion::DurationStats;
use mogam::io::{self, LoadOptions, SyntheticConfig};
use mogam::model::{Architecture, Model, PreparedSample};
use mogam::par::Execution;
use mogam::task::Task;
use mogam::train::{
    batch_gradients, evaluate, predict_all, run_experiment, split_dataset, task_samples, train, train_repetition,
    Metrics, SplitRatios, TrainConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Small separable synthetic set shared by every test in this file.
fn dataset() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            vlogs_per_class: 20,
            vocab_size: 8,
            visual_dim: 4,
            text_dim: 4,
            min_frames: 10,
            max_frames: 20,
            seed: 11,
            ..Default::default()
        };
        io::generate_synthetic(&cfg, dir.path(), Execution::Parallel).unwrap();
        io::load_dataset(&dir.path().join("manifest.json"), &LoadOptions::default()).unwrap()
    })
}

fn config(task: Task) -> TrainConfig {
    TrainConfig {
        task,
        hidden: 8,
        gnn_hidden: vec![6],
        heads: 2,
        epochs: 6,
        batch_size: 7,
        lr: 1e-2,
        dropout: 0.3,
        seed: 5,
        repetitions: 1,
        ..Default::default()
    }
}

/// (model, train set, validation set) for `config`.
fn prepared(config: &TrainConfig) -> (Model, Vec<PreparedSample>, Vec<PreparedSample>) {
    let data = dataset();
    let model = Model::new(config.model_spec(data.vocabulary.len(), data.visual_dim, data.text_dim)).unwrap();
    let (samples, classes) = task_samples(data, config.task);
    let split = split_dataset(&classes, config.split, config.seed).unwrap();
    let stats = DurationStats::fit(split.train.iter().map(|&i| samples[i].duration_seconds)).unwrap();
    let prep = |idx: &[usize]| idx.iter().map(|&i| model.prepare(samples[i], &stats).unwrap()).collect::<Vec<_>>();
    let (tr, val) = (prep(&split.train), prep(&split.val));
    (model, tr, val)
}

#[test]
fn zero_learning_rate_keeps_parameters_and_loss() {
    let cfg = TrainConfig { lr: 0.0, dropout: 0.0, ..config(Task::DailyVsDepression) };
    let (model, tr, val) = prepared(&cfg);
    let init = model.init_params(cfg.seed);
    let out = train(&model, &cfg, init.clone(), &tr, &val, cfg.seed).unwrap();
    assert_eq!(out.params, init);
    let first = out.history[0].train_loss;
    for h in &out.history {
        // only the batch order changes, which reorders the sum
        assert!((h.train_loss - first).abs() <= 1e-12 * first, "{} vs {first}", h.train_loss);
        assert_eq!(h.val_macro_f1, out.history[0].val_macro_f1);
    }
}

#[test]
fn same_seed_gives_identical_history() {
    let cfg = config(Task::Multiclass3);
    let (model, tr, val) = prepared(&cfg);
    let a = train(&model, &cfg, model.init_params(1), &tr, &val, 1).unwrap();
    let b = train(&model, &cfg, model.init_params(1), &tr, &val, 1).unwrap();
    assert_eq!(a, b);
    let c = train(&model, &cfg, model.init_params(1), &tr, &val, 2).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn parallel_and_sequential_training_agree_bitwise() {
    for task in [Task::DailyVsDepression, Task::Multiclass3] {
        let par = TrainConfig { execution: Execution::Parallel, ..config(task) };
        let seq = TrainConfig { execution: Execution::Sequential, ..config(task) };
        let (model, tr, val) = prepared(&par);
        let a = train(&model, &par, model.init_params(3), &tr, &val, 3).unwrap();
        let b = train(&model, &seq, model.init_params(3), &tr, &val, 3).unwrap();
        assert_eq!(a, b, "{task:?}");
    }
}

#[test]
fn batch_gradients_do_not_depend_on_threads() {
    let cfg = config(Task::DailyVsHighRisk);
    let (model, tr, _) = prepared(&cfg);
    let params = model.init_params(0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // 11 is not a multiple of the reduction chunk
    let batch: Vec<_> = tr.iter().take(11).map(|s| (s, model.dropout_mask(&mut rng))).collect();
    let a = batch_gradients(&model, &params, &batch, Execution::Parallel).unwrap();
    let b = batch_gradients(&model, &params, &batch, Execution::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn checkpoint_is_the_best_validation_epoch() {
    let cfg = TrainConfig { epochs: 10, ..config(Task::Multiclass3) };
    let (model, tr, val) = prepared(&cfg);
    let out = train(&model, &cfg, model.init_params(4), &tr, &val, 4).unwrap();
    let best = out.history.iter().map(|h| h.val_macro_f1).fold(f64::NEG_INFINITY, f64::max);
    let first_best = out.history.iter().find(|h| h.val_macro_f1 == best).unwrap();
    assert_eq!(out.best_epoch, first_best.epoch);
    assert_eq!(out.best_val_macro_f1, best);
    let again = evaluate(&model, &out.params, &val, Execution::Sequential).unwrap();
    assert_eq!(again.macro_f1, best);
}

#[test]
fn training_loss_decreases_on_separable_data() {
    // full-batch, no dropout
    let cfg = TrainConfig { dropout: 0.0, lr: 3e-3, epochs: 10, batch_size: 1000, ..config(Task::DailyVsDepression) };
    let (model, tr, val) = prepared(&cfg);
    let out = train(&model, &cfg, model.init_params(0), &tr, &val, 0).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|h| h.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn evaluate_matches_recomputed_metrics() {
    let cfg = config(Task::Multiclass3);
    let (model, tr, _) = prepared(&cfg);
    let params = model.init_params(9);
    let m = evaluate(&model, &params, &tr, Execution::Parallel).unwrap();
    let preds = predict_all(&model, &params, &tr, Execution::Sequential).unwrap();
    let truth: Vec<usize> = preds.iter().map(|p| p.truth.unwrap()).collect();
    let predicted: Vec<usize> = preds.iter().map(|p| p.predicted).collect();
    assert_eq!(m, Metrics::from_predictions(&truth, &predicted, 3).unwrap());
    for (c, cm) in m.per_class.iter().enumerate() {
        assert_eq!(cm.support, truth.iter().filter(|&&t| t == c).count() as u64);
        assert_eq!(m.confusion.counts[c].iter().sum::<u64>(), cm.support);
        for v in [cm.precision, cm.recall, cm.f1] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert!((0.0..=1.0).contains(&m.accuracy) && (0.0..=1.0).contains(&m.macro_f1));
}

#[test]
fn outputs_are_probabilities() {
    for (task, arch) in [
        (Task::DailyVsDepression, Architecture::Mogam),
        (Task::Multiclass3, Architecture::Mogam),
        (Task::Multiclass3, Architecture::GraphOnly),
    ] {
        let cfg = TrainConfig { architecture: arch, ..config(task) };
        let (model, tr, _) = prepared(&cfg);
        let params = model.init_params(2);
        for s in &tr {
            let p = model.predict(&params, s).unwrap();
            assert_eq!(p.len(), task.num_classes());
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            if let Some(w) = model.attention_weights(&params, s).unwrap() {
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn zero_dropout_training_equals_inference() {
    let cfg = TrainConfig { dropout: 0.0, ..config(Task::DailyVsDepression) };
    let (model, tr, _) = prepared(&cfg);
    let params = model.init_params(6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for s in &tr {
        let mask = model.dropout_mask(&mut rng);
        let (loss, _) = model.loss_and_gradients(&params, s, &mask).unwrap();
        assert_eq!(loss, model.loss(&params, s).unwrap());
    }
}

#[test]
fn repetition_checkpoint_records_a_partition() {
    let cfg = config(Task::Multiclass3);
    let ckpt = train_repetition(&cfg, dataset(), 2).unwrap();
    assert_eq!(ckpt.seed, cfg.seed + 2);
    let mut ids: Vec<&String> = ckpt.train_ids.iter().chain(&ckpt.val_ids).chain(&ckpt.test_ids).collect();
    let n = ids.len();
    ids.sort();
    ids.dedup();
    assert_eq!((ids.len(), n), (60, 60));
    assert_eq!(ckpt.history.len(), cfg.epochs);
    assert_eq!(ckpt.history[ckpt.best_epoch - 1].val_macro_f1, ckpt.best_val_macro_f1);
}

#[test]
fn single_repetition_aggregate_is_the_run() {
    let cfg = TrainConfig { epochs: 2, ..config(Task::DailyVsHighRisk) };
    let out = run_experiment(&cfg, dataset()).unwrap();
    let run = &out.report.repetitions[0].test;
    assert_eq!(out.report.aggregate.macro_f1.mean, run.macro_f1);
    assert_eq!(out.report.aggregate.macro_f1.sd, 0.0);
    assert_eq!(out.report.aggregate.accuracy.mean, run.accuracy);
}

proptest! {
    #[test]
    fn splits_partition_and_stratify(sizes in prop::collection::vec(3usize..60, 1..4), seed in any::<u64>()) {
        let classes: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
        let ratios = SplitRatios::default();
        let Ok(s) = split_dataset(&classes, ratios, seed) else {
            // only tiny classes may be rejected
            prop_assert!(sizes.iter().any(|&n| n < 4));
            return Ok(());
        };
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..classes.len()).collect::<Vec<_>>());
        for (c, &n) in sizes.iter().enumerate() {
            let count = |idx: &[usize]| idx.iter().filter(|&&i| classes[i] == c).count() as f64;
            for (part, r) in [(&s.val, ratios.val), (&s.test, ratios.test)] {
                prop_assert!((count(part) - n as f64 * r).abs() <= 1.0);
            }
            // classes under 5 have their minimum-one val/test draws taken from train
            let slack = if n >= 5 { 1.0 } else { 2.0 };
            prop_assert!((count(&s.train) - n as f64 * ratios.train).abs() <= slack);
        }
        let again = split_dataset(&classes, ratios, seed).unwrap();
        prop_assert_eq!(again, s);
    }
}
