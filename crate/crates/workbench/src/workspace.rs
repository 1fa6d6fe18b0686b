//! A loaded session: the session record plus the pipeline rebuilt from its
//! artifacts. Every CLI subcommand and HTTP endpoint goes through here.

use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

use debias_core::ann::build_index;
use debias_core::corpus::{
    filter_vocabulary, load_embeddings, load_gender_pairs, load_labels,
    DropReport, EmbeddingSet, FilterWarning,
};
use debias_core::evaluate::{kmeans_elbow, ConfusionMatrix, ElbowPoint, MetricReport};
use debias_core::geometry::{compute_gender_direction, DebiasConfig};
use debias_core::pipeline::Pipeline;
use debias_core::tuner::{
    compare_to_hard_debias, pareto_result, preset_table, sweep_category_with_progress,
    HardDebiasComparison, ParetoResult, PresetTable, SweepPoint, SweepSpec, ThetaGrid,
};
use serde::{Deserialize, Serialize};

use crate::config::WorkbenchConfig;
use crate::error::{Result, WorkbenchError};
use crate::session::{Artifacts, Session, SweepKey};

/// What loading the artifacts dropped or warned about.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub words: usize,
    pub dim: usize,
    pub filtered_out: usize,
    pub empty_vocabulary: bool,
    pub pairs: usize,
    pub dropped_pairs: DropReport,
    pub labels: usize,
    pub dropped_labels: DropReport,
    pub pair_words_unlabeled: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub name: String,
    pub words: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub explained_variance_ratio: f64,
    pub axis: Vec<f64>,
    pub degenerate_pairs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub category: String,
    pub cached: bool,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub config: DebiasConfig,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricReport,
    pub skipped: Vec<String>,
}

struct Loaded {
    set: EmbeddingSet,
    labels: debias_core::corpus::CategoryLabels,
    pairs: debias_core::corpus::GenderPairSet,
    report: LoadReport,
}

fn load_artifacts(
    embeddings: &Path,
    pairs: &Path,
    labels: &Path,
    config: &WorkbenchConfig,
) -> Result<Loaded> {
    let raw = load_embeddings(embeddings, config.normalize)?;
    let mut report = LoadReport {
        dim: raw.dim(),
        ..LoadReport::default()
    };
    let set = match &config.vocabulary_pattern {
        Some(pattern) => {
            let before = raw.len();
            let filtered = filter_vocabulary(&raw, pattern)?;
            report.filtered_out = before - filtered.set.len();
            report.empty_vocabulary = matches!(filtered.warning, Some(FilterWarning::EmptyVocabulary));
            filtered.set
        }
        None => raw,
    };
    if set.is_empty() {
        return Err(WorkbenchError::Invalid(
            "no word survived the vocabulary filter".into(),
        ));
    }
    report.words = set.len();
    let (pair_set, dropped_pairs) = load_gender_pairs(pairs, &set)?;
    let (label_set, dropped_labels) = load_labels(labels, &set)?;
    report.pairs = pair_set.len();
    report.dropped_pairs = dropped_pairs;
    report.labels = label_set.len();
    report.dropped_labels = dropped_labels;
    Ok(Loaded {
        set,
        labels: label_set,
        pairs: pair_set,
        report,
    })
}

fn base_config(config: &WorkbenchConfig) -> DebiasConfig {
    DebiasConfig {
        renormalize_after: config.renormalize_after,
        apply_equalize: config.apply_equalize,
        ..DebiasConfig::default()
    }
}

pub struct Workspace {
    pub session: Session,
    pipeline: Arc<Pipeline>,
    path: Option<PathBuf>,
    pub load_report: LoadReport,
}

impl Workspace {
    /// Loads the artifacts, computes the axis and starts a fresh session.
    pub fn create(
        embeddings: &Path,
        pairs: &Path,
        labels: &Path,
        config: WorkbenchConfig,
    ) -> Result<Self> {
        config.validate()?;
        let artifacts = Artifacts::hash(embeddings, pairs, labels)?;
        let loaded = load_artifacts(embeddings, pairs, labels, &config)?;
        let direction = compute_gender_direction(&loaded.pairs, &loaded.set)
            .map_err(debias_core::Error::from)?;
        let index = build_index(Arc::new(loaded.set), config.hnsw.params(), config.hnsw.seed)
            .map_err(debias_core::Error::from)?;
        let pipeline = Pipeline::from_parts(
            loaded.labels,
            loaded.pairs,
            direction.clone(),
            index,
            config.pipeline_options(),
        )?;
        let mut report = loaded.report;
        let (_, removed) = pipeline.labels().without_pair_words(pipeline.pairs());
        report.pair_words_unlabeled = removed;
        let mut debias = DebiasConfig::uniform(pipeline.categories(), 1.0);
        debias.renormalize_after = config.renormalize_after;
        debias.apply_equalize = config.apply_equalize;
        let session = Session::new(artifacts, config, debias, direction);
        Ok(Self {
            session,
            pipeline: Arc::new(pipeline),
            path: None,
            load_report: report,
        })
    }

    /// Reopens a saved session. Changed artifacts drop the cached results and
    /// recompute the axis.
    pub fn open(path: &Path) -> Result<Self> {
        let mut session = Session::load(path)?;
        let a = &session.artifacts;
        let current = Artifacts::hash(&a.embeddings.path, &a.pairs.path, &a.labels.path)?;
        let loaded = load_artifacts(
            &current.embeddings.path,
            &current.pairs.path,
            &current.labels.path,
            &session.config,
        )?;
        if current != session.artifacts || session.direction.dim() != loaded.set.dim() {
            session.artifacts = current;
            session.direction = compute_gender_direction(&loaded.pairs, &loaded.set)
                .map_err(debias_core::Error::from)?;
        }
        session.invalidate_stale();
        session.debias.validate(&loaded.labels).map_err(|e| {
            WorkbenchError::Invalid(format!("session debias config no longer fits the labels: {e}"))
        })?;
        let config = &session.config;
        let index = build_index(Arc::new(loaded.set), config.hnsw.params(), config.hnsw.seed)
            .map_err(debias_core::Error::from)?;
        let pipeline = Pipeline::from_parts(
            loaded.labels,
            loaded.pairs,
            session.direction.clone(),
            index,
            config.pipeline_options(),
        )?;
        Ok(Self {
            session,
            pipeline: Arc::new(pipeline),
            path: Some(path.to_path_buf()),
            load_report: loaded.report,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn set_path(&mut self, path: PathBuf) {
        self.path = Some(path);
    }

    /// Persists to the session path, if there is one.
    pub fn save(&self) -> Result<()> {
        match &self.path {
            Some(p) => self.session.save(p),
            None => Ok(()),
        }
    }

    pub fn pipeline(&self) -> &Arc<Pipeline> {
        &self.pipeline
    }

    pub fn categories(&self) -> Vec<CategoryInfo> {
        let labels = self.pipeline.neutral_labels();
        let counts = labels.counts();
        labels
            .categories()
            .iter()
            .zip(counts)
            .map(|(name, words)| CategoryInfo {
                name: name.clone(),
                words,
                theta: self.session.debias.theta_for(Some(name)),
            })
            .collect()
    }

    pub fn axis(&self) -> AxisReport {
        let d = &self.session.direction;
        AxisReport {
            explained_variance_ratio: d.explained_variance_ratio(),
            axis: d.axis().to_vec(),
            degenerate_pairs: d.degenerate_pairs().to_vec(),
        }
    }

    fn check_category(&self, category: &str) -> Result<()> {
        if self.pipeline.labels().category_index(category).is_none() {
            return Err(debias_core::Error::UnknownCategory(category.to_string()).into());
        }
        Ok(())
    }

    pub fn set_theta(&mut self, category: &str, value: f64) -> Result<()> {
        self.check_category(category)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(WorkbenchError::Invalid(format!("theta {value} is outside [0, 1]")));
        }
        self.session
            .debias
            .theta_per_category
            .insert(category.to_string(), value);
        Ok(())
    }

    /// Session config with `overrides` applied; `*` sets every category and
    /// the default.
    pub fn config_with(&self, overrides: &[(String, f64)]) -> Result<DebiasConfig> {
        let mut config = self.session.debias.clone();
        for (category, value) in overrides {
            if !(0.0..=1.0).contains(value) {
                return Err(WorkbenchError::Invalid(format!("theta {value} is outside [0, 1]")));
            }
            if category == "*" {
                for c in self.pipeline.categories() {
                    config.theta_per_category.insert(c.clone(), *value);
                }
                config.default_theta = *value;
            } else {
                self.check_category(category)?;
                config.theta_per_category.insert(category.clone(), *value);
            }
        }
        Ok(config)
    }

    pub fn classify(&self, config: &DebiasConfig) -> Result<ClassifyReport> {
        let eval = self.pipeline.evaluate(config)?;
        Ok(ClassifyReport {
            config: config.clone(),
            confusion: eval.confusion,
            metrics: eval.metrics,
            skipped: eval.predictions.skipped,
        })
    }

    pub fn export<W: Write>(&self, config: &DebiasConfig, out: W) -> Result<()> {
        let debiased = self.pipeline.debias(config)?;
        crate::export::write_embeddings(&debiased, out, "export")
    }

    pub fn export_to(&self, config: &DebiasConfig, path: &Path) -> Result<()> {
        let debiased = self.pipeline.debias(config)?;
        crate::export::export_embeddings(&debiased, path)
    }

    /// Everything needed to run a sweep without holding the workspace.
    pub fn sweep_job(&self, category: &str) -> Result<SweepJob> {
        self.check_category(category)?;
        Ok(SweepJob {
            key: self.session.sweep_key(category),
            pipeline: self.pipeline.clone(),
            grid: self.session.config.grid.clone(),
            base: base_config(&self.session.config),
        })
    }

    pub fn cached_sweep(&self, category: &str) -> Result<Option<Vec<SweepPoint>>> {
        self.check_category(category)?;
        let key = self.session.sweep_key(category);
        Ok(self.session.cached_sweep(&key).map(<[_]>::to_vec))
    }

    pub fn sweep(&mut self, category: &str) -> Result<SweepReport> {
        if let Some(points) = self.cached_sweep(category)? {
            return Ok(SweepReport {
                category: category.to_string(),
                cached: true,
                points,
            });
        }
        let job = self.sweep_job(category)?;
        let points = job.run(&AtomicUsize::new(0))?;
        self.session.store_sweep(job.key, points.clone());
        Ok(SweepReport {
            category: category.to_string(),
            cached: false,
            points,
        })
    }

    pub fn pareto_of(&self, points: &[SweepPoint]) -> Result<ParetoResult> {
        let c = &self.session.config;
        Ok(pareto_result(points, c.objective, c.weights)?)
    }

    pub fn pareto(&mut self, category: &str) -> Result<ParetoResult> {
        let sweep = self.sweep(category)?;
        self.pareto_of(&sweep.points)
    }

    pub fn presets(&mut self) -> Result<PresetTable> {
        if let Some(p) = &self.session.presets {
            return Ok(p.clone());
        }
        let mut results = Vec::new();
        for category in self.pipeline.categories().to_vec() {
            let r = self.pareto(&category)?;
            results.push((category, r));
        }
        let table = preset_table(&results);
        self.session.presets = Some(table.clone());
        Ok(table)
    }

    pub fn compare_hard(&mut self) -> Result<HardDebiasComparison> {
        let table = self.presets()?;
        let balanced = table.balanced_config(&self.session.debias);
        Ok(compare_to_hard_debias(&self.pipeline, &balanced)?)
    }

    pub fn elbow(&self, k: RangeInclusive<usize>) -> Result<Vec<ElbowPoint>> {
        Ok(kmeans_elbow(
            self.pipeline.original(),
            k,
            self.session.config.kmeans_seed,
        )
        .map_err(debias_core::Error::from)?)
    }
}

/// A sweep detached from the workspace so it can run off the request path.
pub struct SweepJob {
    pub key: SweepKey,
    pipeline: Arc<Pipeline>,
    grid: ThetaGrid,
    base: DebiasConfig,
}

impl SweepJob {
    pub fn total(&self) -> usize {
        self.grid.len()
    }

    pub fn run(&self, progress: &AtomicUsize) -> Result<Vec<SweepPoint>> {
        let spec = SweepSpec::new(&self.key.category, &self.grid, &self.base);
        Ok(sweep_category_with_progress(&self.pipeline, &spec, progress)?)
    }
}
