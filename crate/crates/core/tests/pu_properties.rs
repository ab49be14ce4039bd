use std::collections::BTreeSet;

use proptest::prelude::*;

use secmine::pu::{compute_centroids, train_pu, ClassifierConfig, PuConfig, Stage1Distances};
use secmine::Centroid64;

fn vectors(n: std::ops::Range<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), n)
}

fn pu_sets() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (2usize..8).prop_flat_map(|d| (vectors(3..30, d), vectors(3..60, d)))
}

fn usable(v: &[Vec<f64>]) -> bool {
    v.iter().all(|x| x.iter().any(|c| c.abs() > 1e-3))
}

proptest! {
    #[test]
    fn reliable_negatives_grow_with_alpha((p, u) in pu_sets(), a in 0.1f64..3.0, da in 0.0f64..1.0) {
        prop_assume!(usable(&u));
        let (cp, cu) = compute_centroids(&p, &u).unwrap();
        prop_assume!(cp.vector.iter().any(|c| c.abs() > 1e-6) && cu.vector.iter().any(|c| c.abs() > 1e-6));
        let d = Stage1Distances::compute(&u, &cp, &cu).unwrap();
        let small: BTreeSet<usize> = d.select(a).into_iter().collect();
        let large: BTreeSet<usize> = d.select(a + da).into_iter().collect();
        prop_assert!(small.is_subset(&large));
        prop_assert!(large.iter().all(|&i| i < u.len()));
    }

    #[test]
    fn selection_ignores_uniform_scaling((p, u) in pu_sets(), s in 1e-2f64..1e2, alpha in 0.5f64..1.5) {
        prop_assume!(usable(&u));
        let scale = |v: &[Vec<f64>]| -> Vec<Vec<f64>> { v.iter().map(|x| x.iter().map(|c| c * s).collect()).collect() };
        let (cp, cu) = compute_centroids(&p, &u).unwrap();
        prop_assume!(cp.vector.iter().any(|c| c.abs() > 1e-6) && cu.vector.iter().any(|c| c.abs() > 1e-6));
        let d = Stage1Distances::compute(&u, &cp, &cu).unwrap();
        let (sp, su) = (scale(&p), scale(&u));
        let (scp, scu) = compute_centroids(&sp, &su).unwrap();
        let ds = Stage1Distances::compute(&su, &scp, &scu).unwrap();
        // pairs within rounding of the boundary may flip
        let margin = |i: usize| (d.to_unlabelled[i] - alpha * d.to_positive[i]).abs() > 1e-9;
        let a: BTreeSet<usize> = d.select(alpha).into_iter().filter(|&i| margin(i)).collect();
        let b: BTreeSet<usize> = ds.select(alpha).into_iter().filter(|&i| margin(i)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn incremental_centroid_matches_batch(
        first in vectors(1..10, 4),
        batches in prop::collection::vec(vectors(1..6, 4), 1..8),
    ) {
        let mut c = Centroid64::from_vectors(&first, "first").unwrap();
        let mut all = first.clone();
        for b in &batches {
            c = c.updated(b).unwrap();
            all.extend(b.iter().cloned());
        }
        let batch = Centroid64::from_vectors(&all, "all").unwrap();
        prop_assert_eq!(c.count, batch.count);
        for (x, y) in c.vector.iter().zip(&batch.vector) {
            prop_assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn decisions_are_pure((p, u) in pu_sets(), probe in prop::collection::vec(-10.0f64..10.0, 8)) {
        prop_assume!(usable(&u));
        let cfg = PuConfig { min_rn_fraction: 0.0, ..PuConfig::new(1.5, ClassifierConfig::logistic(1.0)) };
        let Ok(model) = train_pu(&p, &u, &cfg, &[]) else { return Ok(()); };
        let x = &probe[..model.dim()];
        let (d1, s1) = model.decide(x, 0.5);
        let (d2, s2) = model.decide(x, 0.5);
        prop_assert_eq!(d1, d2);
        prop_assert_eq!(s1.to_bits(), s2.to_bits());
        prop_assert!((0.0..=1.0).contains(&s1));
    }
}
