use std::sync::Arc;

use debias_core::corpus::{CategoryLabels, EmbeddingSet, GenderPairSet};
use debias_core::geometry::{
    compute_gender_direction, debias_all, debias_vector, DebiasConfig, GenderDirection,
};
use debias_core::synthetic::{planted_pairs, random_unit_set};

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

#[test]
fn closed_form_two_by_two() {
    let words: Vec<String> = ["m1", "f1", "m2", "f2"].iter().map(|s| s.to_string()).collect();
    let rows = vec![
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![0.8, 0.6],
        vec![-0.8, -0.6],
    ];
    let set = EmbeddingSet::from_rows(words, &rows).unwrap();
    let pairs = GenderPairSet::new(
        vec![("m1".into(), "f1".into()), ("m2".into(), "f2".into())],
        &set,
    )
    .unwrap();
    let g = compute_gender_direction(&pairs, &set).unwrap();

    // Centered rows are the raw vectors (midpoints are zero); each pair
    // contributes its two rows with weight 1/2.
    let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
    for r in &rows {
        a += 0.5 * r[0] * r[0];
        b += 0.5 * r[0] * r[1];
        d += 0.5 * r[1] * r[1];
    }
    let tr = a + d;
    let disc = ((a - d) * (a - d) / 4.0 + b * b).sqrt();
    let l1 = tr / 2.0 + disc;
    let l2 = tr / 2.0 - disc;
    let mut v = if b.abs() > 1e-15 { vec![l1 - d, b] } else { vec![1.0, 0.0] };
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    // Male words (1,0) and (0.8,0.6) must project non-negatively on average.
    if v[0] * 1.8 + v[1] * 0.6 < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    assert!((g.axis()[0] - v[0]).abs() < 1e-12);
    assert!((g.axis()[1] - v[1]).abs() < 1e-12);
    assert!((g.explained_variance_ratio() - l1 / (l1 + l2)).abs() < 1e-12);
}

#[test]
fn planted_axis_is_recovered() {
    for seed in 0..5 {
        let p = planted_pairs(20, 30, 0.5, 0.01, seed);
        let g = compute_gender_direction(&p.pairs, &p.set).unwrap();
        let c = cos(g.axis(), &p.axis);
        assert!(c.abs() > 0.99, "seed {seed}: {c}");
        assert!(c > 0.0, "male side orientation");
    }
}

#[test]
fn mixed_config_equals_per_word_calls() {
    let set = random_unit_set(200, 40, 21);
    let cats = ["politics", "science", "business", "sports", "entertainment"];
    let labels = CategoryLabels::new(
        set.words().iter().skip(10).enumerate().map(|(i, w)| (w.clone(), cats[i % 5])),
        &set,
    )
    .unwrap();
    let pairs = GenderPairSet::new(
        (0..5).map(|i| (set.word(2 * i).to_string(), set.word(2 * i + 1).to_string())).collect(),
        &set,
    )
    .unwrap();
    let g = compute_gender_direction(&pairs, &set).unwrap();
    let config = DebiasConfig::uniform(labels.categories(), 1.0).with_theta("politics", 0.7);
    for renormalize in [false, true] {
        let config = DebiasConfig {
            renormalize_after: renormalize,
            ..config.clone()
        };
        let out = debias_all(&set, &labels, &pairs, &g, &config).unwrap();
        for (i, w) in set.words().iter().enumerate() {
            let expected = if pairs.contains(w) {
                set.vector(i).to_vec()
            } else {
                let theta = match labels.category_of(w) {
                    Some("politics") => 0.7,
                    _ => 1.0,
                };
                debias_vector(set.vector(i), &g, theta, renormalize).unwrap()
            };
            assert_eq!(out.vector(i), expected.as_slice(), "{w}");
        }
    }
}

#[test]
fn debias_is_shareable_across_threads() {
    let set = Arc::new(random_unit_set(64, 8, 2));
    let g = GenderDirection::from_axis(set.vector(0).to_vec()).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let set = set.clone();
            let g = g.clone();
            std::thread::spawn(move || debias_vector(set.vector(t), &g, 0.5, false).unwrap())
        })
        .collect();
    for (t, h) in handles.into_iter().enumerate() {
        assert_eq!(h.join().unwrap(), debias_vector(set.vector(t), &g, 0.5, false).unwrap());
    }
}
