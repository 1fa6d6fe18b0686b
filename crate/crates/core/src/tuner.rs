//! Per-category theta sweeps and the performance / bias trade-off.
//!
//! Each sweep varies one category's theta over a grid while every other
//! category stays at full debias. The Pareto front maximizes the chosen
//! performance objective and minimizes `|bias|`; the balanced theta is where
//! min-max normalized degradation and normalized bias meet under the given
//! weights.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluate::{matrix_diff, ConfusionMatrix, DiffMatrix, MetricReport};
use crate::geometry::DebiasConfig;
use crate::pipeline::Pipeline;
use crate::Error;

/// Two balanced-theta scores closer than this count as a tie.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Accuracy,
    #[default]
    WeightedF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub bias: f64,
    pub abs_bias: f64,
}

impl SweepPoint {
    pub fn new(theta: f64, accuracy: f64, weighted_f1: f64, bias: f64) -> Self {
        Self {
            theta,
            accuracy,
            weighted_f1,
            bias,
            abs_bias: bias.abs(),
        }
    }

    pub fn performance(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Accuracy => self.accuracy,
            Objective::WeightedF1 => self.weighted_f1,
        }
    }
}

/// Sorted, duplicate-free theta values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaGrid(Vec<f64>);

impl ThetaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidGrid(format!("{v} is outside [0, 1]")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("values must be strictly increasing".into()));
        }
        Ok(Self(values))
    }

    /// `0.0, step, 2*step, ..., 1.0` for `steps` intervals.
    pub fn uniform(steps: usize) -> Result<Self, Error> {
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one step".into()));
        }
        Self::new((0..=steps).map(|i| i as f64 / steps as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self::uniform(10).expect("ten steps is a valid grid")
    }
}

impl TryFrom<Vec<f64>> for ThetaGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self, Error> {
        Self::new(v)
    }
}

impl From<ThetaGrid> for Vec<f64> {
    fn from(g: ThetaGrid) -> Self {
        g.0
    }
}

/// What to sweep and what the other categories are pinned to.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<'a> {
    pub category: &'a str,
    pub grid: &'a ThetaGrid,
    /// Theta for every other category (1.0 in the standard workflow).
    pub others_theta: f64,
    /// Supplies `default_theta`, `renormalize_after` and `apply_equalize`.
    pub base: &'a DebiasConfig,
}

impl<'a> SweepSpec<'a> {
    pub fn new(category: &'a str, grid: &'a ThetaGrid, base: &'a DebiasConfig) -> Self {
        Self {
            category,
            grid,
            others_theta: 1.0,
            base,
        }
    }

    fn config_at(&self, categories: &[String], theta: f64) -> DebiasConfig {
        let mut config = DebiasConfig::uniform(categories, self.others_theta);
        config.default_theta = self.base.default_theta;
        config.renormalize_after = self.base.renormalize_after;
        config.apply_equalize = self.base.apply_equalize;
        config.with_theta(self.category, theta)
    }
}

pub fn sweep_category(pipeline: &Pipeline, spec: &SweepSpec<'_>) -> Result<Vec<SweepPoint>, Error> {
    sweep_category_with_progress(pipeline, spec, &AtomicUsize::new(0))
}

/// Like [`sweep_category`], bumping `progress` once per finished grid point.
pub fn sweep_category_with_progress(
    pipeline: &Pipeline,
    spec: &SweepSpec<'_>,
    progress: &AtomicUsize,
) -> Result<Vec<SweepPoint>, Error> {
    if pipeline.labels().category_index(spec.category).is_none() {
        return Err(Error::UnknownCategory(spec.category.to_string()));
    }
    let words = pipeline.biased_words(spec.category)?;
    if words.is_empty() {
        return Err(Error::NoBiasedWords(spec.category.to_string()));
    }
    spec.grid
        .values()
        .par_iter()
        .map(|&theta| {
            let config = spec.config_at(pipeline.categories(), theta);
            let eval = pipeline.evaluate(&config)?;
            let bias = crate::evaluate::bias_score(&eval.debiased, &words, pipeline.pairs())?;
            progress.fetch_add(1, Ordering::Relaxed);
            Ok(SweepPoint::new(
                theta,
                eval.metrics.accuracy,
                eval.metrics.weighted_f1,
                bias.value,
            ))
        })
        .collect()
}

fn dominates(p: &SweepPoint, q: &SweepPoint, objective: Objective) -> bool {
    let (pp, qp) = (p.performance(objective), q.performance(objective));
    pp >= qp && p.abs_bias <= q.abs_bias && (pp > qp || p.abs_bias < q.abs_bias)
}

/// Thetas of the non-dominated points, ascending. Exact duplicates are all kept.
pub fn pareto_front(points: &[SweepPoint], objective: Objective) -> Result<Vec<f64>, Error> {
    if points.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut front: Vec<f64> = points
        .iter()
        .filter(|q| !points.iter().any(|p| dominates(p, q, objective)))
        .map(|p| p.theta)
        .collect();
    front.sort_by(f64::total_cmp);
    Ok(front)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub performance: f64,
    pub bias: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            performance: 0.5,
            bias: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedTheta {
    pub theta: f64,
    /// Set when performance is flat over the sweep; `theta` is then the
    /// largest Pareto-optimal value.
    pub degenerate: bool,
}

/// Grid theta minimizing `|w_perf * d(theta) - w_bias * b(theta)|`, where `d`
/// is min-max normalized performance loss and `b` min-max normalized
/// `|bias|`. Ties go to the larger theta.
pub fn balanced_theta(
    points: &[SweepPoint],
    objective: Objective,
    weights: Weights,
) -> Result<BalancedTheta, Error> {
    if points.is_empty() {
        return Err(Error::EmptySweep);
    }
    if !(weights.performance > 0.0 && weights.bias > 0.0) {
        return Err(Error::InvalidWeights);
    }
    let perf: Vec<f64> = points.iter().map(|p| p.performance(objective)).collect();
    let (perf_min, perf_max) = min_max(&perf);
    if perf_max == perf_min {
        let front = pareto_front(points, objective)?;
        let theta = *front.last().expect("front of a non-empty sweep is non-empty");
        return Ok(BalancedTheta {
            theta,
            degenerate: true,
        });
    }
    let bias: Vec<f64> = points.iter().map(|p| p.abs_bias).collect();
    let (bias_min, bias_max) = min_max(&bias);
    let bias_span = bias_max - bias_min;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].theta.total_cmp(&points[b].theta));
    let mut best: Option<(f64, f64)> = None;
    for i in order {
        let d = (perf_max - perf[i]) / (perf_max - perf_min);
        let b = if bias_span > 0.0 {
            (bias[i] - bias_min) / bias_span
        } else {
            0.0
        };
        let score = (weights.performance * d - weights.bias * b).abs();
        match best {
            Some((s, _)) if score > s + TIE_EPSILON => {}
            _ => best = Some((score.min(best.map_or(score, |b| b.0)), points[i].theta)),
        }
    }
    Ok(BalancedTheta {
        theta: best.expect("points are non-empty").1,
        degenerate: false,
    })
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoResult {
    pub front_thetas: Vec<f64>,
    pub balanced_theta: f64,
    pub balanced_degenerate: bool,
    pub performance_emphasis: Vec<f64>,
    pub debias_emphasis: Vec<f64>,
    pub objective_choice: Objective,
}

/// Front, balanced theta and the split of the front around it.
pub fn pareto_result(
    points: &[SweepPoint],
    objective: Objective,
    weights: Weights,
) -> Result<ParetoResult, Error> {
    let front_thetas = pareto_front(points, objective)?;
    let balanced = balanced_theta(points, objective, weights)?;
    let (performance_emphasis, debias_emphasis) = split_front(&front_thetas, balanced.theta);
    Ok(ParetoResult {
        front_thetas,
        balanced_theta: balanced.theta,
        balanced_degenerate: balanced.degenerate,
        performance_emphasis,
        debias_emphasis,
        objective_choice: objective,
    })
}

fn split_front(front: &[f64], balanced: f64) -> (Vec<f64>, Vec<f64>) {
    (
        front.iter().copied().filter(|&t| t < balanced).collect(),
        front.iter().copied().filter(|&t| t > balanced).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRow {
    pub category: String,
    pub performance_emphasis: Vec<f64>,
    pub both: f64,
    pub debias_emphasis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetTable {
    pub rows: Vec<PresetRow>,
}

impl PresetTable {
    /// Debias configuration that uses every category's balanced theta.
    pub fn balanced_config(&self, base: &DebiasConfig) -> DebiasConfig {
        let mut config = base.clone();
        for row in &self.rows {
            config.theta_per_category.insert(row.category.clone(), row.both);
        }
        config
    }

    /// Plain-text three-column rendering.
    pub fn to_text(&self) -> String {
        fn list(v: &[f64]) -> String {
            if v.is_empty() {
                "-".to_string()
            } else {
                v.iter().map(|t| format!("{t:.1}")).collect::<Vec<_>>().join(", ")
            }
        }
        let width = self
            .rows
            .iter()
            .map(|r| r.category.chars().count())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut out = format!(
            "{:<width$}  {:<28}  {:<5}  {}\n",
            "category", "performance emphasis", "both", "debias emphasis"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:<28}  {:<5.1}  {}\n",
                r.category,
                list(&r.performance_emphasis),
                r.both,
                list(&r.debias_emphasis)
            ));
        }
        out
    }
}

pub fn preset_table(results: &[(String, ParetoResult)]) -> PresetTable {
    PresetTable {
        rows: results
            .iter()
            .map(|(category, r)| {
                let (performance_emphasis, debias_emphasis) =
                    split_front(&r.front_thetas, r.balanced_theta);
                PresetRow {
                    category: category.clone(),
                    performance_emphasis,
                    both: r.balanced_theta,
                    debias_emphasis,
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardDebiasComparison {
    /// Row-normalized `ours - hard`.
    pub diff: DiffMatrix,
    pub ours: MetricReport,
    pub hard: MetricReport,
    pub ours_confusion: ConfusionMatrix,
    pub hard_confusion: ConfusionMatrix,
}

/// Runs `balanced` and the all-ones configuration and compares them.
pub fn compare_to_hard_debias(
    pipeline: &Pipeline,
    balanced: &DebiasConfig,
) -> Result<HardDebiasComparison, Error> {
    let mut hard = DebiasConfig::uniform(pipeline.categories(), 1.0);
    hard.default_theta = balanced.default_theta;
    hard.renormalize_after = balanced.renormalize_after;
    hard.apply_equalize = balanced.apply_equalize;
    let (ours, hard) = rayon::join(|| pipeline.evaluate(balanced), || pipeline.evaluate(&hard));
    let (ours, hard) = (ours?, hard?);
    Ok(HardDebiasComparison {
        diff: matrix_diff(&ours.confusion, &hard.confusion)?,
        ours: ours.metrics,
        hard: hard.metrics,
        ours_confusion: ours.confusion,
        hard_confusion: hard.confusion,
    })
}
