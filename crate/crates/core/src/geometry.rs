//! Gender axis extraction and theta-scaled neutralization.
//!
//! The axis is the top principal component of pair-centered word vectors.
//! Neutral words lose a `theta` fraction of their projection onto it
//! (`theta = 0` leaves them untouched, `theta = 1` is full Hard Debias), and
//! pair words are re-placed symmetrically about the hyperplane orthogonal to
//! the axis.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{norm, CategoryLabels, CorpusError, EmbeddingSet, GenderPairSet};

/// Residual norm below which renormalization is refused.
pub const RENORMALIZE_FLOOR: f64 = 1e-12;
/// Slack allowed on `1 - ||x||^2` before equalization reports non-unit input.
pub const EQUALIZE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("theta {0} is outside [0, 1]")]
    ThetaOutOfRange(f64),
    #[error("vector is parallel to the gender axis; cannot renormalize the residual")]
    ParallelToAxis,
    #[error("at least one gender pair is required")]
    NoPairs,
    #[error("embedding set must be unit-normalized")]
    NotNormalized,
    #[error("pair covariance is zero: every pair coincides with its midpoint")]
    ZeroCovariance,
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("pair ({male}, {female}) midpoint has norm > 1 (1 - |x|^2 = {slack}); input not unit-normalized")]
    EqualizeOutOfRange {
        male: String,
        female: String,
        slack: f64,
    },
    #[error("word {0:?} is not in the vocabulary")]
    UnknownWord(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Mean projection of the male-side pair words is non-negative.
    MaleNonNegative,
}

/// Unit gender axis with the share of pair variance it explains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderDirection {
    axis: Vec<f64>,
    explained_variance_ratio: f64,
    orientation: Orientation,
    /// Indices of pairs whose two vectors coincide (zero centered rows).
    degenerate_pairs: Vec<usize>,
}

impl GenderDirection {
    /// Wraps an arbitrary axis, normalizing it. Mainly for tests and fixtures.
    pub fn from_axis(axis: Vec<f64>) -> Result<Self> {
        let n = norm(&axis);
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::ZeroCovariance);
        }
        Ok(Self {
            axis: axis.into_iter().map(|x| x / n).collect(),
            explained_variance_ratio: 1.0,
            orientation: Orientation::MaleNonNegative,
            degenerate_pairs: Vec::new(),
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn dim(&self) -> usize {
        self.axis.len()
    }

    pub fn explained_variance_ratio(&self) -> f64 {
        self.explained_variance_ratio
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn degenerate_pairs(&self) -> &[usize] {
        &self.degenerate_pairs
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GeometryError::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

pub fn pair_midpoint(male: &[f64], female: &[f64]) -> Result<Vec<f64>> {
    check_dims(male.len(), female.len())?;
    Ok(male
        .iter()
        .zip(female)
        .map(|(m, f)| (m + f) / 2.0)
        .collect())
}

/// Top eigenvector of the covariance of `{vm - c, vw - c}` over all pairs.
pub fn compute_gender_direction(
    pairs: &GenderPairSet,
    set: &EmbeddingSet,
) -> Result<GenderDirection> {
    if pairs.is_empty() {
        return Err(GeometryError::NoPairs);
    }
    if !set.is_normalized() {
        return Err(GeometryError::NotNormalized);
    }
    let m = set.dim();
    let mut cov = DMatrix::<f64>::zeros(m, m);
    let mut male_sum = vec![0.0; m];
    let mut degenerate = Vec::new();
    for (i, (male, female)) in pairs.pairs().iter().enumerate() {
        let vm = set
            .vector_of(male)
            .ok_or_else(|| GeometryError::UnknownWord(male.clone()))?;
        let vw = set
            .vector_of(female)
            .ok_or_else(|| GeometryError::UnknownWord(female.clone()))?;
        let c = pair_midpoint(vm, vw)?;
        let centered_m: Vec<f64> = vm.iter().zip(&c).map(|(x, y)| x - y).collect();
        let centered_w: Vec<f64> = vw.iter().zip(&c).map(|(x, y)| x - y).collect();
        if centered_m.iter().all(|&x| x == 0.0) {
            degenerate.push(i);
        }
        // Each pair holds two words, so its outer products are weighted by 1/2.
        for row in [&centered_m, &centered_w] {
            for a in 0..m {
                if row[a] == 0.0 {
                    continue;
                }
                let ra = row[a] / 2.0;
                for b in 0..m {
                    cov[(a, b)] += ra * row[b];
                }
            }
        }
        male_sum.iter_mut().zip(vm).for_each(|(s, x)| *s += x);
    }

    let trace = cov.trace();
    if trace <= f64::MIN_POSITIVE {
        return Err(GeometryError::ZeroCovariance);
    }
    let eigen = SymmetricEigen::try_new(cov, f64::EPSILON, 100_000)
        .ok_or(GeometryError::NoConvergence)?;
    let (top, &lambda) = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(GeometryError::ZeroCovariance)?;
    let mut axis: Vec<f64> = eigen.eigenvectors.column(top).iter().copied().collect();
    let n = norm(&axis);
    axis.iter_mut().for_each(|x| *x /= n);
    if dot(&male_sum, &axis) < 0.0 {
        axis.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(GenderDirection {
        axis,
        explained_variance_ratio: (lambda / trace).clamp(0.0, 1.0),
        orientation: Orientation::MaleNonNegative,
        degenerate_pairs: degenerate,
    })
}

/// `(v . g) g` for the unit axis `g`.
pub fn project(v: &[f64], g: &GenderDirection) -> Result<Vec<f64>> {
    check_dims(v.len(), g.dim())?;
    let s = dot(v, g.axis());
    Ok(g.axis().iter().map(|x| s * x).collect())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(GeometryError::ThetaOutOfRange(theta));
    }
    Ok(())
}

/// `v - theta * proj_g(v)`, optionally rescaled to unit norm.
///
/// `theta = 0` returns `v` unchanged, bit for bit, whatever `renormalize` says.
pub fn debias_vector(
    v: &[f64],
    g: &GenderDirection,
    theta: f64,
    renormalize: bool,
) -> Result<Vec<f64>> {
    check_theta(theta)?;
    check_dims(v.len(), g.dim())?;
    if theta == 0.0 {
        return Ok(v.to_vec());
    }
    let s = theta * dot(v, g.axis());
    let mut out: Vec<f64> = v.iter().zip(g.axis()).map(|(x, a)| x - s * a).collect();
    if renormalize {
        let n = norm(&out);
        if n < RENORMALIZE_FLOOR {
            return Err(GeometryError::ParallelToAxis);
        }
        out.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// Per-category debias strengths plus the post-processing switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasConfig {
    pub theta_per_category: BTreeMap<String, f64>,
    /// Applied to neutral words without a label.
    pub default_theta: f64,
    #[serde(default)]
    pub renormalize_after: bool,
    #[serde(default = "default_true")]
    pub apply_equalize: bool,
}

fn default_true() -> bool {
    true
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            theta_per_category: BTreeMap::new(),
            default_theta: 1.0,
            renormalize_after: false,
            apply_equalize: true,
        }
    }
}

impl DebiasConfig {
    /// Same `theta` for every category and for unlabeled words.
    pub fn uniform(categories: &[String], theta: f64) -> Self {
        Self {
            theta_per_category: categories.iter().map(|c| (c.clone(), theta)).collect(),
            default_theta: theta,
            ..Self::default()
        }
    }

    pub fn with_theta(mut self, category: &str, theta: f64) -> Self {
        self.theta_per_category.insert(category.to_string(), theta);
        self
    }

    pub fn validate(&self, labels: &CategoryLabels) -> Result<()> {
        check_theta(self.default_theta)?;
        for (c, &t) in &self.theta_per_category {
            check_theta(t)?;
            if labels.category_index(c).is_none() {
                return Err(GeometryError::UnknownCategory(c.clone()));
            }
        }
        Ok(())
    }

    pub fn theta_for(&self, category: Option<&str>) -> f64 {
        category
            .and_then(|c| self.theta_per_category.get(c).copied())
            .unwrap_or(self.default_theta)
    }
}

/// Neutralizes every non-pair word with the strength configured for its
/// category. Pair words are copied through unchanged.
pub fn debias_all(
    set: &EmbeddingSet,
    labels: &CategoryLabels,
    pairs: &GenderPairSet,
    g: &GenderDirection,
    config: &DebiasConfig,
) -> Result<EmbeddingSet> {
    config.validate(labels)?;
    check_dims(set.dim(), g.dim())?;
    let pair_words = pairs.words();
    let rows: Vec<Vec<f64>> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let word = set.word(i);
            let v = set.vector(i);
            if pair_words.contains(word) {
                return Ok(v.to_vec());
            }
            let theta = config.theta_for(labels.category_of(word));
            debias_vector(v, g, theta, config.renormalize_after)
        })
        .collect::<Result<_>>()?;
    Ok(set.with_data(rows.concat())?)
}

/// Moves each pair to `x +/- y g` with `x = c - proj_g(c)` and
/// `y = sqrt(1 - |x|^2)`. Non-pair rows are unchanged.
pub fn equalize_pairs(
    pairs: &GenderPairSet,
    set: &EmbeddingSet,
    g: &GenderDirection,
) -> Result<EmbeddingSet> {
    check_dims(set.dim(), g.dim())?;
    let mut data = set.as_flat().to_vec();
    let m = set.dim();
    for (male, female) in pairs.pairs() {
        let im = set
            .id_of(male)
            .ok_or_else(|| GeometryError::UnknownWord(male.clone()))?;
        let iw = set
            .id_of(female)
            .ok_or_else(|| GeometryError::UnknownWord(female.clone()))?;
        let c = pair_midpoint(set.vector(im), set.vector(iw))?;
        let pc = project(&c, g)?;
        let x: Vec<f64> = c.iter().zip(&pc).map(|(a, b)| a - b).collect();
        let slack = 1.0 - dot(&x, &x);
        if slack < -EQUALIZE_SLACK {
            return Err(GeometryError::EqualizeOutOfRange {
                male: male.clone(),
                female: female.clone(),
                slack,
            });
        }
        let y = slack.max(0.0).sqrt();
        for k in 0..m {
            data[im * m + k] = x[k] + y * g.axis()[k];
            data[iw * m + k] = x[k] - y * g.axis()[k];
        }
    }
    Ok(set.with_data(data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axis(v: &[f64]) -> GenderDirection {
        GenderDirection::from_axis(v.to_vec()).unwrap()
    }

    fn set_of(rows: &[(&str, Vec<f64>)]) -> EmbeddingSet {
        EmbeddingSet::from_rows(
            rows.iter().map(|(w, _)| w.to_string()).collect(),
            &rows.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn midpoint_cases() {
        assert_eq!(pair_midpoint(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(pair_midpoint(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            pair_midpoint(&[1.0], &[1.0, 0.0]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_pair_axis() {
        let set = set_of(&[("man", vec![1.0, 0.0, 0.0]), ("woman", vec![-1.0, 0.0, 0.0])]);
        let pairs = GenderPairSet::new(vec![("man".into(), "woman".into())], &set).unwrap();
        let g = compute_gender_direction(&pairs, &set).unwrap();
        assert!((g.axis()[0] - 1.0).abs() < 1e-12);
        assert!(g.axis()[1].abs() < 1e-12 && g.axis()[2].abs() < 1e-12);
        assert!((g.explained_variance_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_orientation_follows_male_words() {
        let set = set_of(&[("man", vec![-1.0, 0.0]), ("woman", vec![1.0, 0.0])]);
        let pairs = GenderPairSet::new(vec![("man".into(), "woman".into())], &set).unwrap();
        let g = compute_gender_direction(&pairs, &set).unwrap();
        assert!(dot(set.vector_of("man").unwrap(), g.axis()) >= 0.0);
    }

    #[test]
    fn zero_covariance_and_non_normalized_are_errors() {
        let set = set_of(&[("a", vec![1.0, 0.0]), ("b", vec![1.0, 0.0])]);
        let pairs = GenderPairSet::new(vec![("a".into(), "b".into())], &set).unwrap();
        assert!(matches!(
            compute_gender_direction(&pairs, &set),
            Err(GeometryError::ZeroCovariance)
        ));
        let raw = set_of(&[("a", vec![2.0, 0.0]), ("b", vec![-2.0, 0.0])]);
        let pairs = GenderPairSet::new(vec![("a".into(), "b".into())], &raw).unwrap();
        assert!(matches!(
            compute_gender_direction(&pairs, &raw),
            Err(GeometryError::NotNormalized)
        ));
    }

    #[test]
    fn degenerate_pair_is_kept_and_reported() {
        let set = set_of(&[
            ("m", vec![1.0, 0.0]),
            ("f", vec![-1.0, 0.0]),
            ("a", vec![0.0, 1.0]),
            ("b", vec![0.0, 1.0]),
        ]);
        let pairs = GenderPairSet::new(
            vec![("m".into(), "f".into()), ("a".into(), "b".into())],
            &set,
        )
        .unwrap();
        let g = compute_gender_direction(&pairs, &set).unwrap();
        assert_eq!(g.degenerate_pairs(), &[1]);
        assert!((g.axis()[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_cases() {
        let g = axis(&[1.0, 0.0]);
        assert_eq!(project(&[3.0, 4.0], &g).unwrap(), vec![3.0, 0.0]);
        assert_eq!(project(&[0.0, 4.0], &g).unwrap(), vec![0.0, 0.0]);
        assert!(project(&[1.0], &g).is_err());
    }

    #[test]
    fn debias_vector_cases() {
        let g = axis(&[1.0, 0.0]);
        assert_eq!(debias_vector(&[3.0, 4.0], &g, 1.0, false).unwrap(), vec![0.0, 4.0]);
        assert_eq!(debias_vector(&[3.0, 4.0], &g, 0.5, false).unwrap(), vec![1.5, 4.0]);
        assert_eq!(debias_vector(&[3.0, 4.0], &g, 1.0, true).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            debias_vector(&[3.0, 4.0], &g, 1.5, false),
            Err(GeometryError::ThetaOutOfRange(_))
        ));
        assert!(matches!(
            debias_vector(&[3.0, 4.0], &g, -0.1, false),
            Err(GeometryError::ThetaOutOfRange(_))
        ));
        assert!(matches!(
            debias_vector(&[2.0, 0.0], &g, 1.0, true),
            Err(GeometryError::ParallelToAxis)
        ));
    }

    #[test]
    fn equalize_hand_example() {
        let set = set_of(&[
            ("man", vec![0.6, 0.8]),
            ("woman", vec![-0.6, 0.8]),
            ("desk", vec![0.0, 1.0]),
        ]);
        let pairs = GenderPairSet::new(vec![("man".into(), "woman".into())], &set).unwrap();
        let g = axis(&[1.0, 0.0]);
        let out = equalize_pairs(&pairs, &set, &g).unwrap();
        let vm = out.vector_of("man").unwrap();
        let vw = out.vector_of("woman").unwrap();
        assert!((vm[0] - 0.6).abs() < 1e-12 && (vm[1] - 0.8).abs() < 1e-12);
        assert!((vw[0] + 0.6).abs() < 1e-12 && (vw[1] - 0.8).abs() < 1e-12);
        assert!((norm(vm) - 1.0).abs() < 1e-12 && (norm(vw) - 1.0).abs() < 1e-12);
        assert_eq!(out.vector_of("desk"), set.vector_of("desk"));
    }

    #[test]
    fn equalize_rejects_non_unit_input() {
        let set = set_of(&[("m", vec![0.1, 2.0]), ("f", vec![-0.1, 2.0])]);
        let pairs = GenderPairSet::new(vec![("m".into(), "f".into())], &set).unwrap();
        assert!(matches!(
            equalize_pairs(&pairs, &set, &axis(&[1.0, 0.0])),
            Err(GeometryError::EqualizeOutOfRange { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let set = set_of(&[("a", vec![1.0, 0.0])]);
        let labels = CategoryLabels::new([("a", "politics")], &set).unwrap();
        let ok = DebiasConfig::uniform(labels.categories(), 0.3);
        assert!(ok.validate(&labels).is_ok());
        assert_eq!(ok.theta_for(Some("politics")), 0.3);
        assert_eq!(ok.theta_for(None), 0.3);
        let bad = DebiasConfig::default().with_theta("sports", 0.5);
        assert!(matches!(
            bad.validate(&labels),
            Err(GeometryError::UnknownCategory(_))
        ));
        let bad = DebiasConfig::default().with_theta("politics", 1.2);
        assert!(matches!(
            bad.validate(&labels),
            Err(GeometryError::ThetaOutOfRange(_))
        ));
    }

    fn unit_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, dim)
            .prop_filter("non-zero", |v| norm(v) > 1e-3)
            .prop_map(|v| {
                let n = norm(&v);
                v.into_iter().map(|x| x / n).collect()
            })
    }

    proptest! {
        #[test]
        fn linear_in_theta(v in unit_vec(8), a in unit_vec(8), theta in 0.0f64..=1.0) {
            let g = axis(&a);
            let partial = debias_vector(&v, &g, theta, false).unwrap();
            let full = debias_vector(&v, &g, 1.0, false).unwrap();
            for k in 0..v.len() {
                let lerp = (1.0 - theta) * v[k] + theta * full[k];
                prop_assert!((partial[k] - lerp).abs() < 1e-12);
            }
        }

        #[test]
        fn removes_exact_fraction_of_projection(v in unit_vec(8), a in unit_vec(8), theta in 0.0f64..=1.0) {
            let g = axis(&a);
            let out = debias_vector(&v, &g, theta, false).unwrap();
            let before = dot(&v, g.axis()).abs();
            prop_assert!((dot(&out, g.axis()).abs() - (1.0 - theta) * before).abs() < 1e-12);
        }

        #[test]
        fn full_debias_is_idempotent_and_keeps_complement(v in unit_vec(8), a in unit_vec(8), theta in 0.0f64..=1.0) {
            let g = axis(&a);
            let once = debias_vector(&v, &g, 1.0, false).unwrap();
            let twice = debias_vector(&once, &g, 1.0, false).unwrap();
            for k in 0..v.len() {
                prop_assert!((once[k] - twice[k]).abs() < 1e-12);
            }
            let out = debias_vector(&v, &g, theta, false).unwrap();
            let pv = project(&v, &g).unwrap();
            let po = project(&out, &g).unwrap();
            for k in 0..v.len() {
                prop_assert!(((v[k] - pv[k]) - (out[k] - po[k])).abs() < 1e-12);
            }
        }

        #[test]
        fn equalize_is_mirror_symmetric(vm in unit_vec(6), vw in unit_vec(6), a in unit_vec(6), u in unit_vec(6)) {
            let set = set_of(&[("m", vm), ("f", vw)]);
            let pairs = GenderPairSet::new(vec![("m".into(), "f".into())], &set).unwrap();
            let g = axis(&a);
            let out = equalize_pairs(&pairs, &set, &g).unwrap();
            let m2 = out.vector_of("m").unwrap();
            let f2 = out.vector_of("f").unwrap();
            prop_assert!((norm(m2) - 1.0).abs() < 1e-9);
            prop_assert!((norm(f2) - 1.0).abs() < 1e-9);
            prop_assert!((dot(m2, g.axis()) + dot(f2, g.axis())).abs() < 1e-9);
            // Any direction orthogonal to g sees both words identically.
            let u_perp = debias_vector(&u, &g, 1.0, false).unwrap();
            prop_assert!((dot(m2, &u_perp) - dot(f2, &u_perp)).abs() < 1e-9);
        }
    }
}
