#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use debias_core::synthetic::{planted_corpus, write_fixture, FixtureFiles, PlantedConfig};
use debias_workbench::config::WorkbenchConfig;
use debias_workbench::workspace::Workspace;
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub files: FixtureFiles,
    pub config: PathBuf,
}

impl Fixture {
    pub fn session(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn workbench_config(&self) -> WorkbenchConfig {
        WorkbenchConfig::load(&self.config).unwrap()
    }

    pub fn workspace(&self, name: &str) -> Workspace {
        let mut ws = Workspace::create(
            &self.files.embeddings,
            &self.files.pairs,
            &self.files.labels,
            self.workbench_config(),
        )
        .unwrap();
        ws.set_path(self.session(name));
        ws.save().unwrap();
        ws
    }

    pub fn cli(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_debias"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs `load` into `session` and panics unless it succeeds.
    pub fn cli_load(&self, session: &str) {
        let out = self.cli(&[
            "--session",
            session,
            "load",
            "--embeddings",
            path_str(&self.files.embeddings),
            "--pairs",
            path_str(&self.files.pairs),
            "--labels",
            path_str(&self.files.labels),
            "--config",
            path_str(&self.config),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Planted corpus written to a temp dir with a config that keeps the ASCII
/// vocabulary. `extra` is merged into the config JSON.
pub fn fixture_with(words_per_category: usize, extra: serde_json::Value) -> Fixture {
    let dir = TempDir::new().unwrap();
    let corpus = planted_corpus(&PlantedConfig {
        words_per_category,
        ..PlantedConfig::default()
    });
    let files = write_fixture(&dir.path().join("data"), &corpus.set, &corpus.pairs, &corpus.label_lines).unwrap();
    let mut config = serde_json::json!({ "vocabulary_pattern": null, "hnsw": { "seed": 7 } });
    if let (Some(base), Some(more)) = (config.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            base.insert(k.clone(), v.clone());
        }
    }
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    Fixture {
        dir,
        files,
        config: config_path,
    }
}

pub fn fixture(words_per_category: usize) -> Fixture {
    fixture_with(words_per_category, serde_json::json!({}))
}
