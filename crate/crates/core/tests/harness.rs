mod common;

use std::collections::HashSet;
use std::fs;

use common::{random_graph, rng};
use lglwp_core::gcn::OptimizerKind;
use lglwp_core::graph::{DupPolicy, Edge, WeightedGraph};
use lglwp_core::harness::{
    leak_guard, prepare_link, run_ablation, run_ablation_on_graph, run_experiment,
    run_experiment_on_graph, split_manifests, EvalReport, ExperimentConfig, Labeling, Method,
    PairedReport, SplitManifest,
};
use lglwp_core::labeling::{DistanceMode, MASK};
use lglwp_core::subgraph::ExtractOptions;

fn toy_graph() -> WeightedGraph {
    let edges = [
        (0, 1, 0.9),
        (0, 2, 0.8),
        (1, 2, 0.7),
        (1, 3, 0.6),
        (2, 3, 0.5),
        (3, 4, 0.4),
        (4, 5, 0.3),
        (3, 5, 0.35),
        (0, 5, 0.2),
        (2, 4, 0.45),
    ];
    WeightedGraph::from_edges(6, edges, DupPolicy::Max).unwrap()
}

fn small_cfg(method: Method) -> ExperimentConfig {
    ExperimentConfig {
        method,
        repeats: 3,
        epochs: Some(3),
        seed: 42,
        ..ExperimentConfig::default()
    }
}

fn without_wall_time(mut r: EvalReport) -> String {
    r.wall_time_secs = 0.0;
    serde_json::to_string(&r).unwrap()
}

#[test]
fn heuristic_on_toy_graph() {
    let cfg = ExperimentConfig {
        method: Method::Wcn,
        repeats: 2,
        ..ExperimentConfig::default()
    };
    let report = run_experiment_on_graph(&toy_graph(), &cfg).unwrap();
    assert_eq!(report.per_run_rmse.len(), 2);
    assert!(report.loss_curves().is_empty());
    assert!(report.failures.is_empty() && !report.partial);
    for run in &report.runs {
        assert_eq!((run.n_train, run.n_test), (9, 1));
        assert!(run.rmse.is_finite() && run.rmse >= 0.0);
    }
}

#[test]
fn reports_are_deterministic_and_consistent() {
    let g = random_graph(&mut rng(1), 40, 0.15);
    for method in [Method::Lglwp, Method::LglwpRandomLabel, Method::Waa] {
        let cfg = small_cfg(method);
        let a = run_experiment_on_graph(&g, &cfg).unwrap();
        let b = run_experiment_on_graph(&g, &cfg).unwrap();

        let n = a.per_run_rmse.len() as f64;
        let mean = a.per_run_rmse.iter().sum::<f64>() / n;
        let var = a.per_run_rmse.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((a.mean - mean).abs() <= 1e-12);
        assert!((a.std - var.sqrt()).abs() <= 1e-12);

        assert_eq!(without_wall_time(a), without_wall_time(b));
    }
}

#[test]
fn learned_runs_carry_one_loss_value_per_epoch() {
    let g = random_graph(&mut rng(2), 30, 0.2);
    let report = run_experiment_on_graph(&g, &small_cfg(Method::Lglwp)).unwrap();
    let curves = report.loss_curves();
    assert_eq!(curves.len(), 3);
    assert!(curves.iter().all(|c| c.len() == 3 && c.iter().all(|x| x.is_finite())));
}

/// Every sample built from the training graph hides its own weight and every
/// test weight; weights are unique so a scan for the value is conclusive.
#[test]
fn no_hidden_weight_reaches_a_sample() {
    let g = random_graph(&mut rng(3), 35, 0.2);
    let weights: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    let unique: HashSet<u64> = weights.iter().map(|w| w.to_bits()).collect();
    assert_eq!(unique.len(), weights.len());

    let cfg = ExperimentConfig::default();
    let split = cfg.split_spec().split(&g, 0).unwrap();
    let observed = split.train_graph(&g);
    let hidden: HashSet<(usize, usize)> = split.test_edges.iter().map(Edge::key).collect();
    let test_weights: Vec<f64> = split.test_edges.iter().map(|e| e.weight).collect();

    for e in split.train_edges.iter().chain(&split.test_edges) {
        for labeling in [Labeling::WeightedWl(DistanceMode::Weight), Labeling::Random] {
            let s = prepare_link(&observed, e.u, e.v, &ExtractOptions::default(), labeling, 7).unwrap();
            leak_guard(&s, &hidden).unwrap();
            let m = s.features.matrix();
            assert_eq!((m[[0, 1]], m[[1, 0]]), (MASK, MASK));
            for &x in m.iter().chain(s.line_graph.features.iter()) {
                assert_ne!(x, e.weight);
                assert!(!test_weights.contains(&x));
            }
        }
    }
}

#[test]
fn leak_guard_rejects_samples_built_from_the_full_graph() {
    let g = random_graph(&mut rng(4), 25, 0.3);
    let split = ExperimentConfig::default().split_spec().split(&g, 0).unwrap();
    let hidden: HashSet<(usize, usize)> = split.test_edges.iter().map(Edge::key).collect();
    let caught = split.train_edges.iter().any(|e| {
        let s = prepare_link(&g, e.u, e.v, &ExtractOptions::default(), Labeling::Random, 1).unwrap();
        leak_guard(&s, &hidden).is_err()
    });
    assert!(caught);
}

#[test]
fn ablation_arms_share_splits() {
    let g = random_graph(&mut rng(5), 30, 0.2);
    let cfg = small_cfg(Method::Lglwp);
    let paired = run_ablation_on_graph(&g, &cfg).unwrap();
    assert_eq!(paired.weighted.method, Method::Lglwp);
    assert_eq!(paired.random.method, Method::LglwpRandomLabel);
    for (w, r) in paired.weighted.runs.iter().zip(&paired.random.runs) {
        assert_eq!((w.repeat, w.seed, w.n_train, w.n_test), (r.repeat, r.seed, r.n_train, r.n_test));
    }
    let manifests = split_manifests(&g, &cfg).unwrap();
    let for_random = split_manifests(
        &g,
        &ExperimentConfig {
            method: Method::LglwpRandomLabel,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_eq!(manifests, for_random);
    assert!((paired.mean_delta - (paired.random.mean - paired.weighted.mean)).abs() < 1e-15);
}

/// Disjoint stars, one weight per star. Every non-target node of an
/// enclosing subgraph is a leaf hanging off the hub with that weight, even
/// after test links are removed, so both orderings see the same features.
#[test]
fn orderings_agree_when_non_targets_are_automorphic() {
    let mut r = rng(6);
    let mut edges = Vec::new();
    let mut next = 0;
    for _ in 0..15 {
        let hub = next;
        let leaves = rand::Rng::gen_range(&mut r, 3..12);
        let w: f64 = rand::Rng::gen_range(&mut r, 0.05..0.95);
        for leaf in 1..=leaves {
            edges.push((hub, hub + leaf, w));
        }
        next += leaves + 1;
    }
    let g = WeightedGraph::from_edges(next, edges, DupPolicy::Max).unwrap();
    let paired = run_ablation_on_graph(&g, &small_cfg(Method::Lglwp)).unwrap();
    assert_eq!(paired.per_run_delta.len(), 3);
    assert!(paired.per_run_delta.iter().all(|d| d.abs() < 1e-12), "{:?}", paired.per_run_delta);
}

#[test]
fn failed_repeats_are_recorded() {
    let g = random_graph(&mut rng(7), 20, 0.3);
    let cfg = ExperimentConfig {
        optimizer: OptimizerKind::Sgd,
        learning_rate: f64::MAX,
        ..small_cfg(Method::Lglwp)
    };
    let report = run_experiment_on_graph(&g, &cfg).unwrap();
    assert!(report.partial);
    assert_eq!(report.failures.len(), 3);
    assert!(report.failures[0].error.contains("diverged"));
    assert!(report.runs.is_empty());
}

#[test]
fn invalid_configs_are_rejected() {
    let g = toy_graph();
    for cfg in [
        ExperimentConfig { repeats: 0, ..ExperimentConfig::default() },
        ExperimentConfig { train_ratio: 1.0, ..ExperimentConfig::default() },
        ExperimentConfig { train_ratio: f64::NAN, ..ExperimentConfig::default() },
        ExperimentConfig { max_nodes: 1, ..ExperimentConfig::default() },
        ExperimentConfig { test_fraction: 0.0, ..ExperimentConfig::default() },
        ExperimentConfig { batch_size: 0, ..ExperimentConfig::default() },
    ] {
        assert!(cfg.validate().is_err());
        assert!(run_experiment_on_graph(&g, &cfg).is_err());
    }
}

#[test]
fn test_fraction_scores_a_subset() {
    let g = random_graph(&mut rng(8), 40, 0.2);
    let cfg = ExperimentConfig {
        test_fraction: 0.2,
        ..small_cfg(Method::Wra)
    };
    let full = run_experiment_on_graph(&g, &small_cfg(Method::Wra)).unwrap();
    let part = run_experiment_on_graph(&g, &cfg).unwrap();
    for (f, p) in full.runs.iter().zip(&part.runs) {
        assert_eq!(p.n_test, ((f.n_test as f64) * 0.2).round() as usize);
    }
}

fn write_dataset(dir: &std::path::Path, g: &WeightedGraph) -> std::path::PathBuf {
    // raw weights; the loader applies exp(-1/w), so write values above 1
    let path = dir.join("toy.txt");
    let mut body = String::from("# u v w\n");
    for e in g.edges() {
        body.push_str(&format!("n{} n{} {}\n", e.u, e.v, 1.0 + 10.0 * e.weight));
    }
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn experiment_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let g = random_graph(&mut rng(9), 30, 0.2);
    let out = dir.path().join("out");
    let cfg = ExperimentConfig {
        dataset_path: write_dataset(dir.path(), &g),
        output_path: Some(out.clone()),
        ..small_cfg(Method::Lglwp)
    };
    let report = run_experiment(&cfg).unwrap();

    let json: EvalReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json, report);

    let csv = fs::read_to_string(out.join("loss_curves.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "run,epoch,train_rmse");
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(lines[1].starts_with("0,1,"));

    let ids: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("id_map.json")).unwrap()).unwrap();
    assert_eq!(ids["ids"].as_array().unwrap().len(), report.graph.nodes);

    let splits: Vec<SplitManifest> = serde_json::from_str(&fs::read_to_string(out.join("splits.json")).unwrap()).unwrap();
    assert_eq!(splits.len(), 3);
    assert_eq!(splits[0].test_links.len(), report.runs[0].n_test);
    assert!(splits[0].test_links.iter().all(|(a, b)| a.starts_with('n') && b.starts_with('n')));
}

#[test]
fn ablation_writes_both_arms() {
    let dir = tempfile::tempdir().unwrap();
    let g = random_graph(&mut rng(10), 25, 0.25);
    let out = dir.path().join("abl");
    let cfg = ExperimentConfig {
        dataset_path: write_dataset(dir.path(), &g),
        output_path: Some(out.clone()),
        repeats: 2,
        ..small_cfg(Method::Lglwp)
    };
    let paired = run_ablation(&cfg).unwrap();
    for arm in ["weighted", "random"] {
        assert!(out.join(arm).join("report.json").exists());
        assert!(out.join(arm).join("loss_curves.csv").exists());
    }
    let back: PairedReport = serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    assert_eq!(back, paired);
}

#[test]
fn missing_dataset_is_an_error() {
    let cfg = ExperimentConfig {
        dataset_path: "/nonexistent/graph.txt".into(),
        ..ExperimentConfig::default()
    };
    assert!(run_experiment(&cfg).is_err());
}
