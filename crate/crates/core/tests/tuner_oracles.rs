use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use debias_core::ann::HnswParams;
use debias_core::geometry::DebiasConfig;
use debias_core::pipeline::{Pipeline, PipelineOptions};
use debias_core::synthetic::{planted_corpus, PlantedConfig};
use debias_core::tuner::{
    balanced_theta, compare_to_hard_debias, pareto_front, pareto_result, preset_table,
    sweep_category, Objective, ParetoResult, SweepPoint, SweepSpec, ThetaGrid, Weights,
};
use proptest::prelude::*;

fn brute_front(points: &[SweepPoint], objective: Objective) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, q) in points.iter().enumerate() {
        let mut dominated = false;
        for (j, p) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let (pp, qp) = (p.performance(objective), q.performance(objective));
            let weakly = pp >= qp && p.abs_bias <= q.abs_bias;
            let strictly = pp > qp || p.abs_bias < q.abs_bias;
            if weakly && strictly {
                dominated = true;
            }
        }
        if !dominated {
            out.push(q.theta);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Independent scan: smallest score wins, later (larger theta) wins ties.
fn brute_balanced(points: &[SweepPoint], objective: Objective, w: Weights) -> f64 {
    let perf: Vec<f64> = points.iter().map(|p| p.performance(objective)).collect();
    let bias: Vec<f64> = points.iter().map(|p| p.abs_bias).collect();
    let pmax = perf.iter().cloned().fold(f64::MIN, f64::max);
    let pmin = perf.iter().cloned().fold(f64::MAX, f64::min);
    let bmax = bias.iter().cloned().fold(f64::MIN, f64::max);
    let bmin = bias.iter().cloned().fold(f64::MAX, f64::min);
    let mut best_theta = f64::NAN;
    let mut best_score = f64::INFINITY;
    for i in 0..points.len() {
        let d = (pmax - perf[i]) / (pmax - pmin);
        let b = if bmax > bmin { (bias[i] - bmin) / (bmax - bmin) } else { 0.0 };
        let s = (w.performance * d - w.bias * b).abs();
        if s < best_score - 1e-12 || ((s - best_score).abs() <= 1e-12 && points[i].theta > best_theta) {
            best_score = s.min(best_score);
            best_theta = points[i].theta;
        }
    }
    best_theta
}

/// Sweeps over the default grid with coarse values so exact ties occur.
fn arb_sweep() -> impl Strategy<Value = Vec<SweepPoint>> {
    prop::collection::vec((0u8..8, 0u8..8, -8i8..8), 11).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (a, f, b))| {
                SweepPoint::new(i as f64 / 10.0, a as f64 / 8.0, f as f64 / 8.0, b as f64 / 8.0)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn front_matches_pairwise_brute_force(points in arb_sweep()) {
        for objective in [Objective::Accuracy, Objective::WeightedF1] {
            let front = pareto_front(&points, objective).unwrap();
            prop_assert_eq!(&front, &brute_front(&points, objective));
            // Every point is on the front or dominated by a front member.
            for q in &points {
                let covered = front.contains(&q.theta) || points.iter().any(|p| {
                    front.contains(&p.theta)
                        && p.performance(objective) >= q.performance(objective)
                        && p.abs_bias <= q.abs_bias
                });
                prop_assert!(covered);
            }
        }
    }

    #[test]
    fn balanced_matches_scalarization_scan(points in arb_sweep(), wp in 1u8..10, wb in 1u8..10) {
        let w = Weights { performance: wp as f64 / 10.0, bias: wb as f64 / 10.0 };
        let b = balanced_theta(&points, Objective::Accuracy, w).unwrap();
        if b.degenerate {
            let front = pareto_front(&points, Objective::Accuracy).unwrap();
            prop_assert_eq!(b.theta, *front.last().unwrap());
        } else {
            prop_assert_eq!(b.theta, brute_balanced(&points, Objective::Accuracy, w));
        }
    }

    #[test]
    fn balanced_ignores_affine_rescaling(points in arb_sweep(), scale in 0.5f64..4.0, shift in -1.0f64..1.0) {
        let moved: Vec<SweepPoint> = points
            .iter()
            .map(|p| {
                let mut q = SweepPoint::new(p.theta, p.accuracy * scale + shift, p.weighted_f1 * scale + shift, 0.0);
                q.abs_bias = p.abs_bias * scale + 3.0;
                q.bias = q.abs_bias;
                q
            })
            .collect();
        let w = Weights::default();
        let a = balanced_theta(&points, Objective::Accuracy, w).unwrap();
        let b = balanced_theta(&moved, Objective::Accuracy, w).unwrap();
        prop_assert_eq!(a.degenerate, b.degenerate);
        prop_assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn presets_partition_the_front(points in arb_sweep()) {
        let r = pareto_result(&points, Objective::WeightedF1, Weights::default()).unwrap();
        let table = preset_table(&[("c".to_string(), r.clone())]);
        let row = &table.rows[0];
        let perf: BTreeSet<u64> = row.performance_emphasis.iter().map(|t| t.to_bits()).collect();
        let deb: BTreeSet<u64> = row.debias_emphasis.iter().map(|t| t.to_bits()).collect();
        prop_assert!(perf.is_disjoint(&deb));
        prop_assert!(!perf.contains(&row.both.to_bits()) && !deb.contains(&row.both.to_bits()));
        let rest: BTreeSet<u64> = r.front_thetas.iter().filter(|t| **t != row.both).map(|t| t.to_bits()).collect();
        let union: BTreeSet<u64> = perf.union(&deb).copied().collect();
        prop_assert_eq!(union, rest);
    }
}

struct Planted {
    pipeline: Pipeline,
    sweeps: Vec<(String, Vec<SweepPoint>, ParetoResult)>,
}

fn planted() -> &'static Planted {
    static CELL: OnceLock<Planted> = OnceLock::new();
    CELL.get_or_init(|| {
        let c = planted_corpus(&PlantedConfig::default());
        let pipeline = Pipeline::build(
            Arc::new(c.set),
            c.labels,
            c.pairs,
            HnswParams::default(),
            7,
            PipelineOptions::default(),
        )
        .unwrap();
        let grid = ThetaGrid::default();
        let base = DebiasConfig::default();
        let sweeps = pipeline
            .categories()
            .iter()
            .map(|cat| {
                let pts = sweep_category(&pipeline, &SweepSpec::new(cat, &grid, &base)).unwrap();
                let r = pareto_result(&pts, Objective::WeightedF1, Weights::default()).unwrap();
                (cat.clone(), pts, r)
            })
            .collect();
        Planted { pipeline, sweeps }
    })
}

#[test]
fn planted_bias_strictly_decreases() {
    for (cat, pts, _) in &planted().sweeps {
        assert_eq!(pts.len(), 11);
        for w in pts.windows(2) {
            assert!(w[1].abs_bias < w[0].abs_bias, "{cat}: {w:?}");
        }
    }
}

#[test]
fn planted_sweep_is_deterministic() {
    let p = planted();
    let grid = ThetaGrid::default();
    let base = DebiasConfig::default();
    let (cat, pts, _) = &p.sweeps[0];
    let again = sweep_category(&p.pipeline, &SweepSpec::new(cat, &grid, &base)).unwrap();
    for (a, b) in pts.iter().zip(&again) {
        assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
        assert_eq!(a.weighted_f1.to_bits(), b.weighted_f1.to_bits());
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }
}

#[test]
fn all_zero_diagnostic_point_is_perfect() {
    let p = planted();
    let grid = ThetaGrid::new(vec![0.0]).unwrap();
    let base = DebiasConfig::default();
    let mut spec = SweepSpec::new("politics", &grid, &base);
    spec.others_theta = 0.0;
    let pts = sweep_category(&p.pipeline, &spec).unwrap();
    assert_eq!(pts[0].accuracy, 1.0);
}

#[test]
fn unknown_category_is_rejected() {
    let p = planted();
    let grid = ThetaGrid::default();
    let base = DebiasConfig::default();
    let err = sweep_category(&p.pipeline, &SweepSpec::new("weather", &grid, &base)).unwrap_err();
    assert!(err.is_invalid_input());
}

#[test]
fn hard_debias_against_itself_is_zero() {
    let p = planted();
    let hard = DebiasConfig::uniform(p.pipeline.categories(), 1.0);
    let cmp = compare_to_hard_debias(&p.pipeline, &hard).unwrap();
    assert!(cmp.diff.values.iter().flatten().all(|&v| v == 0.0));
    assert_eq!(cmp.ours, cmp.hard);
}

#[test]
fn balanced_config_recovers_diagonal() {
    let p = planted();
    let results: Vec<(String, ParetoResult)> =
        p.sweeps.iter().map(|(c, _, r)| (c.clone(), r.clone())).collect();
    let table = preset_table(&results);
    let cmp = compare_to_hard_debias(&p.pipeline, &table.balanced_config(&DebiasConfig::default())).unwrap();
    let mut relaxed = 0;
    for row in &table.rows {
        if row.both < 1.0 {
            relaxed += 1;
            let i = cmp.diff.categories.iter().position(|c| *c == row.category).unwrap();
            assert!(cmp.diff.values[i][i] >= 0.0, "{}", row.category);
        }
    }
    assert!(relaxed > 0);
    assert!(cmp.ours.accuracy > cmp.hard.accuracy);
}
