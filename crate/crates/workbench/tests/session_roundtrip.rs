mod common;

use std::fs;

use debias_core::tuner::{Objective, ThetaGrid, Weights};
use debias_workbench::config::{HnswConfig, WorkbenchConfig};
use debias_workbench::session::Session;
use debias_workbench::workspace::Workspace;

#[test]
fn config_file_round_trips() {
    let config = WorkbenchConfig {
        grid: ThetaGrid::new(vec![0.0, 0.25, 0.5, 1.0]).unwrap(),
        hnsw: HnswConfig {
            m: 8,
            ef_construction: 64,
            ef_search: 32,
            seed: 99,
        },
        biased_words: 5,
        objective: Objective::Accuracy,
        weights: Weights {
            performance: 0.3,
            bias: 0.7,
        },
        vocabulary_pattern: None,
        renormalize_after: true,
        kmeans_seed: 11,
        ..WorkbenchConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    assert_eq!(WorkbenchConfig::load(&path).unwrap(), config);

    fs::write(&path, r#"{"grid": [0.0, 1.0], "hnsw": {"m": 4}}"#).unwrap();
    let partial = WorkbenchConfig::load(&path).unwrap();
    assert_eq!(partial.hnsw.m, 4);
    assert_eq!(partial.hnsw.ef_search, HnswConfig::default().ef_search);

    fs::write(&path, r#"{"gird": [0.0, 1.0]}"#).unwrap();
    assert!(WorkbenchConfig::load(&path).is_err());
    fs::write(&path, r#"{"grid": [0.5, 0.2]}"#).unwrap();
    assert!(WorkbenchConfig::load(&path).is_err());
}

#[test]
fn session_save_load_is_bit_exact() {
    let fx = common::fixture(40);
    let mut ws = fx.workspace("s.json");
    ws.set_theta("politics", 0.7).unwrap();
    ws.presets().unwrap();
    ws.save().unwrap();

    let path = fx.session("s.json");
    let loaded = Session::load(&path).unwrap();
    assert_eq!(loaded, ws.session);
    assert_eq!(loaded.sweeps.len(), 5);
    for (a, b) in loaded.sweeps.iter().zip(&ws.session.sweeps) {
        for (p, q) in a.points.iter().zip(&b.points) {
            for (x, y) in [
                (p.theta, q.theta),
                (p.accuracy, q.accuracy),
                (p.weighted_f1, q.weighted_f1),
                (p.bias, q.bias),
                (p.abs_bias, q.abs_bias),
            ] {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
    for (a, b) in loaded.direction.axis().iter().zip(ws.session.direction.axis()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let again = fx.session("again.json");
    loaded.save(&again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn reopened_session_serves_cached_sweeps() {
    let fx = common::fixture(40);
    let mut ws = fx.workspace("s.json");
    let first = ws.sweep("science").unwrap();
    assert!(!first.cached);
    assert_eq!(first.points.len(), 11);
    ws.save().unwrap();

    let mut reopened = Workspace::open(&fx.session("s.json")).unwrap();
    let second = reopened.sweep("science").unwrap();
    assert!(second.cached);
    assert_eq!(second.points, first.points);
}

#[test]
fn changed_artifact_invalidates_cache() {
    let fx = common::fixture(40);
    let mut ws = fx.workspace("s.json");
    ws.presets().unwrap();
    ws.save().unwrap();

    let text = fs::read_to_string(&fx.files.labels).unwrap();
    let fewer: Vec<&str> = text.lines().skip(1).collect();
    fs::write(&fx.files.labels, fewer.join("\n") + "\n").unwrap();

    let reopened = Workspace::open(&fx.session("s.json")).unwrap();
    assert!(reopened.session.sweeps.is_empty());
    assert!(reopened.session.presets.is_none());
    assert_ne!(reopened.session.artifacts, ws.session.artifacts);
}

#[test]
fn changed_grid_invalidates_cache() {
    let fx = common::fixture(40);
    let mut ws = fx.workspace("s.json");
    ws.sweep("sports").unwrap();
    ws.session.config.grid = ThetaGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    ws.save().unwrap();

    let mut reopened = Workspace::open(&fx.session("s.json")).unwrap();
    assert!(reopened.session.sweeps.is_empty());
    let r = reopened.sweep("sports").unwrap();
    assert!(!r.cached);
    assert_eq!(r.points.len(), 3);
}

#[test]
fn unsupported_schema_version_is_rejected() {
    let fx = common::fixture(20);
    let ws = fx.workspace("s.json");
    let mut value = serde_json::to_value(&ws.session).unwrap();
    value["schema_version"] = serde_json::json!(99);
    let path = fx.session("future.json");
    fs::write(&path, value.to_string()).unwrap();
    let err = Session::load(&path).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("99"));
}
