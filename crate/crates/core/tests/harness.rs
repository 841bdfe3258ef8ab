mod common;

use std::process::Command;

use common::random_graph;
use oodgnn::decorrelation::invocation_count;
use oodgnn::encoder::Model;
use oodgnn::graphdata::{gen_triangles_dataset, save_dataset, Dataset, Graph};
use oodgnn::harness::{
    evaluate, render_report, train, train_observed, weight_histogram, write_run, Checkpoint, Mode, TrainConfig,
};
use oodgnn::numcore::{multiply_add_count, reset_multiply_add_count, Dense2D};
use oodgnn::{seed, Error};

fn random_labels(count: usize, classes: usize, width: usize, s: u64) -> Dataset {
    let graphs = (0..count as u64)
        .map(|i| random_graph(5 + (i % 6) as usize, 0.4, width, (seed::derive(s, 0, i) % classes as u64) as usize, s + i))
        .collect();
    Dataset::new(graphs, classes).unwrap()
}

fn small(mode: Mode, epochs: usize) -> TrainConfig {
    TrainConfig { mode, epochs, batch_size: 16, d: 16, num_layers: 2, ..TrainConfig::default() }
}

#[test]
fn zero_epochs_reports_initial_model() {
    let data = random_labels(40, 3, 4, 1);
    let out = train(&small(Mode::OodGnn, 0), &data, &data).unwrap();
    assert!(out.report.epochs.is_empty());
    assert!(out.report.final_weights.is_empty());
    let init = Checkpoint::init(&small(Mode::OodGnn, 0), 4, 3).unwrap();
    assert_eq!(out.checkpoint, init);
    assert_eq!(out.report.final_train_accuracy, evaluate(&init.model, &data).unwrap());
}

#[test]
fn baseline_memorizes_small_set() {
    let data = random_labels(32, 2, 4, 2);
    let cfg = TrainConfig { mode: Mode::BaselineUniform, epochs: 100, batch_size: 16, lr: 1e-2, ..TrainConfig::default() };
    let out = train(&cfg, &data, &data).unwrap();
    assert!(out.report.final_train_accuracy >= 0.95, "{}", out.report.final_train_accuracy);
}

#[test]
fn same_seed_same_run() {
    let data = random_labels(48, 3, 4, 3);
    let cfg = small(Mode::OodGnn, 3);
    let a = train(&cfg, &data, &data).unwrap();
    let b = train(&cfg, &data, &data).unwrap();
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.report.epochs, b.report.epochs);
    assert_eq!(a.report.final_weights, b.report.final_weights);
    let c = train(&TrainConfig { seed: 1, ..cfg }, &data, &data).unwrap();
    assert_ne!(a.checkpoint, c.checkpoint);
}

#[test]
fn evaluate_examples() {
    let mut rng = seed::rng(4);
    let model = Model::init(4, 8, 2, 10, &mut rng).unwrap();
    let g = random_graph(6, 0.5, 4, 0, 9);
    let predicted = oodgnn::encoder::predict(&model, &[&g]).unwrap().argmax_row(0);
    let one = Dataset::new(vec![g.with_label(predicted)], 10).unwrap();
    assert_eq!(evaluate(&model, &one).unwrap(), 1.0);

    let data = random_labels(500, 10, 4, 5);
    let before = model.clone();
    let acc = evaluate(&model, &data).unwrap();
    assert!((0.04..=0.18).contains(&acc), "{acc}");
    assert_eq!(model, before);
    assert_eq!(evaluate(&model, &data).unwrap(), acc);

    let wide = random_labels(5, 10, 5, 6);
    assert!(matches!(evaluate(&model, &wide), Err(Error::Dimension { .. })));
}

#[test]
fn baseline_has_no_histogram_and_never_reweights() {
    let data = random_labels(48, 3, 4, 7);
    let before = invocation_count();
    let out = train(&small(Mode::BaselineUniform, 2), &data, &data).unwrap();
    assert_eq!(invocation_count(), before);
    assert!(matches!(weight_histogram(&out.report), Err(Error::NotApplicable(_))));
    assert!(out.report.epochs.iter().all(|e| e.decorrelation.is_none()));

    let out = train(&small(Mode::OodGnn, 2), &data, &data).unwrap();
    // 48 graphs, batches of 16, two epochs
    assert_eq!(invocation_count(), before + 6);
    let h = weight_histogram(&out.report).unwrap();
    assert_eq!(h.total(), 48);
}

#[test]
fn linear_mode_reweights_too() {
    let data = random_labels(32, 2, 4, 8);
    let before = invocation_count();
    let mut events = 0;
    train_observed(&small(Mode::LinearDecorr, 1), &data, &data, &mut |ev| {
        assert!(ev.reweight.is_some());
        events += 1;
    })
    .unwrap();
    assert_eq!(invocation_count(), before + 2);
    assert_eq!(events, 2);
}

#[test]
fn huge_features_diverge() {
    let graphs: Vec<Graph> = (0..16u64)
        .map(|i| {
            let g = random_graph(5, 0.5, 3, (i % 2) as usize, i);
            g.with_features(Dense2D::filled(5, 3, 1e308)).unwrap()
        })
        .collect();
    let data = Dataset::new(graphs, 2).unwrap();
    let err = train(&small(Mode::BaselineUniform, 1), &data, &data).err().unwrap();
    assert!(matches!(err, Error::Divergence { epoch: 0, batch: 0, .. }), "{err}");
}

/// Multiply-adds of one training epoch; doubling `d` should roughly
/// quadruple the dense work.
fn epoch_cost(d: usize, data: &Dataset) -> u64 {
    let cfg = TrainConfig { d, ..small(Mode::OodGnn, 1) };
    reset_multiply_add_count();
    train(&cfg, data, data).unwrap();
    multiply_add_count()
}

#[test]
fn cost_scales_quadratically_in_width() {
    let data = random_labels(64, 2, 4, 10);
    let ratio = epoch_cost(64, &data) as f64 / epoch_cost(32, &data) as f64;
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}

#[test]
fn checkpoint_round_trip() {
    let data = random_labels(32, 3, 4, 11);
    let cfg = small(Mode::OodGnn, 2);
    let out = train(&cfg, &data, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&out, dir.path()).unwrap();
    let template = Checkpoint::init(&cfg, 4, 3).unwrap();
    let loaded = Checkpoint::load(&dir.path().join("checkpoint.txt"), &template).unwrap();
    assert_eq!(loaded, out.checkpoint);
    assert_eq!(evaluate(&loaded.model, &data).unwrap(), out.report.final_train_accuracy);

    let wrong = Checkpoint::init(&TrainConfig { d: 8, ..cfg }, 4, 3).unwrap();
    assert!(Checkpoint::load(&dir.path().join("checkpoint.txt"), &wrong).is_err());
    assert!(render_report(dir.path()).unwrap().contains("ood_gnn"));
}

#[test]
fn config_text_round_trip() {
    let cfg = TrainConfig { epochs: 7, lr: 0.002, seed: 9, mode: Mode::LinearDecorr, ..TrainConfig::default() };
    assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let parsed = TrainConfig::parse("# comment\nepochs = 3\nmemory_k = 2\n").unwrap();
    assert_eq!(parsed.memory.gammas, vec![0.9, 0.9]);
    assert!(matches!(TrainConfig::parse("epochs = 3\nepochs = 4"), Err(Error::Config(_))));
    assert!(matches!(TrainConfig::parse("colour = red"), Err(Error::Config(_))));
    assert!(matches!(TrainConfig::parse("memory_k = 1\ngammas = 1.0"), Err(Error::Config(_))));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_oodgnn")).args(args).output().unwrap()
}

#[test]
fn cli_end_to_end_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let out = cli(&["gen", "--count", "40", "--min-nodes", "4", "--max-nodes", "10", "--seed", "3", "--out", &p("g.jsonl")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(p("cfg.txt"), "epochs = 2\nbatch_size = 8\nd = 8\nnum_layers = 2\n").unwrap();
    let out = cli(&["train", "--config", &p("cfg.txt"), "--data", &p("g.jsonl"), "--out", &p("run")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/checkpoint.txt").exists());
    let out = cli(&["report", "--in", &p("run")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("ood_gnn"));

    assert_eq!(cli(&["train", "--bogus"]).status.code(), Some(1));
    std::fs::write(p("bad.txt"), "epochs = -1\n").unwrap();
    assert_eq!(cli(&["train", "--config", &p("bad.txt"), "--data", &p("g.jsonl"), "--out", &p("x")]).status.code(), Some(1));
    assert_eq!(cli(&["train", "--config", &p("cfg.txt"), "--data", &p("missing.jsonl"), "--out", &p("x")]).status.code(), Some(2));

    let huge: Vec<Graph> = (0..8u64)
        .map(|i| random_graph(4, 0.5, 2, (i % 2) as usize, i).with_features(Dense2D::filled(4, 2, 1e308)).unwrap())
        .collect();
    save_dataset(&Dataset::new(huge, 2).unwrap(), &dir.path().join("huge.jsonl")).unwrap();
    std::fs::write(p("base.txt"), "epochs = 1\nbatch_size = 8\nmode = baseline_uniform\n").unwrap();
    assert_eq!(cli(&["train", "--config", &p("base.txt"), "--data", &p("huge.jsonl"), "--out", &p("y")]).status.code(), Some(3));
}

#[test]
fn triangles_generator_is_seeded() {
    let a = gen_triangles_dataset(20, 4, 12, 5).unwrap();
    let b = gen_triangles_dataset(20, 4, 12, 5).unwrap();
    assert_eq!(a, b);
}
