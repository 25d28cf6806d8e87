mod common;

use common::*;
use magc::graph::{build_derived, AttributedGraph};
use magc::metrics::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn nmi_examples() {
    let truth = [0, 0, 1, 1, 2, 2];
    assert_eq!(nmi(&truth, &[2, 2, 0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(nmi(&truth, &[0; 6]).unwrap(), 0.0);
}

#[test]
fn ari_examples() {
    assert_eq!(ari(&[0, 1, 1, 2], &[0, 1, 1, 2]).unwrap(), 1.0);
    assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-15);
}

#[test]
fn accuracy_examples() {
    assert_eq!(accuracy(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
    assert_eq!(accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
}

#[test]
fn accuracy_with_extra_pure_cluster() {
    // five predicted clusters against three classes; cluster 4 is pure but small
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 0, 1];
    let pred = [0, 0, 1, 1, 2, 2, 3, 3, 3, 4, 1, 2];
    let table = Contingency::new(&truth, &pred).unwrap();
    assert_eq!(table.counts.len(), 3);
    assert_eq!(table.counts[0].len(), 5);
    let got = accuracy(&truth, &pred).unwrap();
    assert!((got - accuracy_oracle(&truth, &pred)).abs() < 1e-12);
}

#[test]
fn modularity_examples() {
    let triangle = AttributedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    assert!(modularity_score(&triangle, &[0, 0, 0]).unwrap().abs() < 1e-15);
    assert!((modularity_score(&triangle, &[0, 1, 2]).unwrap() + 1.0 / 3.0).abs() < 1e-15);
    let pair = disjoint_triangles();
    assert!((modularity_score(&pair, &[0, 0, 0, 1, 1, 1]).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn conductance_examples() {
    assert_eq!(conductance(&disjoint_triangles(), &[0, 0, 0, 1, 1, 1]).unwrap(), 0.0);
    let cycle = AttributedGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
    assert_eq!(conductance(&cycle, &[0, 0, 1, 1]).unwrap(), 0.5);
    assert_eq!(
        conductance(&cycle, &[0, 0, 0, 0]).unwrap_err(),
        MetricError::ZeroVolumeCluster { cluster: 0 }
    );
}

#[test]
fn conductance_uses_smaller_volume() {
    // star: centre 0 with leaves 1..4; cluster {0} has volume 4, complement 4
    let star = AttributedGraph::from_edges(5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)]).unwrap();
    let per = conductance_per_cluster(&star, &[0, 0, 1, 1, 1]).unwrap();
    // {0,1}: cut 3, vol 5, complement vol 3
    assert_eq!(per[0], Some(1.0));
    assert_eq!(per[1], Some(1.0));
}

#[test]
fn evaluation_bundles_all_metrics() {
    let g = disjoint_triangles();
    let e = evaluate(&g, &[0, 0, 0, 1, 1, 1], &[1, 1, 1, 0, 0, 0]).unwrap();
    assert_eq!((e.nmi, e.ari, e.acc), (1.0, 1.0, 1.0));
    assert!((e.modularity - 0.5).abs() < 1e-15);
    assert_eq!(e.conductance, Some(0.0));
    assert_eq!(e.contingency.counts.iter().flatten().sum::<u64>(), 6);
    assert!(matches!(
        evaluate(&g, &[0; 5], &[0; 6]),
        Err(MetricError::LengthMismatch { .. })
    ));
}

#[test]
fn label_metrics_match_oracles_on_random_pairs() {
    let mut r = rng(42);
    for _ in 0..200 {
        let p = r.gen_range(1..=15);
        let kt = r.gen_range(1..=5);
        let kp = r.gen_range(1..=5);
        let a = random_labels(&mut r, p, kt);
        let b = random_labels(&mut r, p, kp);
        assert!((nmi(&a, &b).unwrap() - nmi_oracle(&a, &b)).abs() < 1e-10, "{a:?} {b:?}");
        assert!((ari(&a, &b).unwrap() - ari_oracle(&a, &b)).abs() < 1e-10, "{a:?} {b:?}");
        assert!((accuracy(&a, &b).unwrap() - accuracy_oracle(&a, &b)).abs() < 1e-10, "{a:?} {b:?}");
    }
}

#[test]
fn modularity_forms_agree_on_random_graphs() {
    let mut r = rng(7);
    for _ in 0..50 {
        let p = r.gen_range(2..=30);
        let density = r.gen_range(0.05..0.5);
        let g = random_graph(&mut r, p, density, true);
        let k = r.gen_range(1..=5);
        let labels = random_labels(&mut r, p, k);
        let direct = modularity_score(&g, &labels).unwrap();
        let trace = modularity_trace(&build_derived(&g).unwrap(), &labels).unwrap();
        let oracle = modularity_oracle(&g, &labels);
        assert!((direct - oracle).abs() < 1e-9);
        assert!((trace - oracle).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn metrics_ignore_cluster_ids(
        a in prop::collection::vec(0usize..4, 1..20),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let b = random_labels(&mut r, a.len(), 4);
        let mut perm: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            perm.swap(i, r.gen_range(0..=i));
        }
        let relabeled: Vec<usize> = b.iter().map(|&l| perm[l]).collect();
        prop_assert!((nmi(&a, &b).unwrap() - nmi(&a, &relabeled).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&a, &b).unwrap() - ari(&a, &relabeled).unwrap()).abs() < 1e-12);
        prop_assert!((accuracy(&a, &b).unwrap() - accuracy(&a, &relabeled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ari_is_symmetric(a in prop::collection::vec(0usize..4, 2..20), seed in any::<u64>()) {
        let b = random_labels(&mut rng(seed), a.len(), 3);
        prop_assert!((ari(&a, &b).unwrap() - ari(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn modularity_is_bounded(seed in any::<u64>(), p in 2usize..25, k in 1usize..6) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, p, 0.3, true);
        let q = modularity_score(&g, &random_labels(&mut r, p, k)).unwrap();
        prop_assert!((-1.0..=1.0).contains(&q));
    }

    #[test]
    fn label_metrics_stay_in_range(a in prop::collection::vec(0usize..5, 1..30), seed in any::<u64>()) {
        let b = random_labels(&mut rng(seed), a.len(), 5);
        let n = nmi(&a, &b).unwrap();
        let r = ari(&a, &b).unwrap();
        let acc = accuracy(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&n));
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((0.0..=1.0).contains(&acc));
    }
}
