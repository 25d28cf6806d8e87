use magc::sbm::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_cfg(seed: u64) -> SbmConfig {
    SbmConfig {
        seed,
        ..SbmConfig::default()
    }
}

#[test]
fn realized_mean_degree_hits_target() {
    for seed in 0..10 {
        let g = generate(&default_cfg(seed)).unwrap();
        assert!(
            (g.realized_mean_degree - 20.0).abs() <= 2.0,
            "seed {seed}: mean degree {}",
            g.realized_mean_degree
        );
    }
}

#[test]
fn adjacency_is_simple_and_labels_match_block_sizes() {
    let cfg = SbmConfig {
        p: 300,
        k: 3,
        block_sizes: Some(vec![50, 100, 150]),
        blocks: BlockSpec::Degrees {
            expected_degree: 10.0,
            sub_degree: 1.0,
        },
        target_degree: 10.0,
        ..default_cfg(3)
    };
    let g = generate(&cfg).unwrap();
    let a = g.graph.adjacency();
    for (i, j, w) in a.iter() {
        assert_ne!(i, j);
        assert_eq!(w, 1.0);
        assert_eq!(a.get(j, i), 1.0);
    }
    let labels = g.graph.labels().unwrap();
    for (b, &size) in [50, 100, 150].iter().enumerate() {
        assert_eq!(labels.iter().filter(|&&l| l == b).count(), size);
    }
}

#[test]
fn zero_sub_degree_gives_disconnected_blocks() {
    let cfg = SbmConfig {
        blocks: BlockSpec::Degrees {
            expected_degree: 20.0,
            sub_degree: 0.0,
        },
        ..default_cfg(1)
    };
    let g = generate(&cfg).unwrap();
    let labels = g.graph.labels().unwrap();
    assert!(g.graph.num_edges() > 0);
    for (i, j, _) in g.graph.adjacency().iter() {
        assert_eq!(labels[i], labels[j]);
    }
}

#[test]
fn same_seed_reproduces_graph_and_features() {
    let a = generate(&default_cfg(9)).unwrap();
    let b = generate(&default_cfg(9)).unwrap();
    assert_eq!(a.graph.adjacency(), b.graph.adjacency());
    let (xa, xb) = (a.graph.features().unwrap(), b.graph.features().unwrap());
    assert!(xa.iter().zip(xb.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
    let c = generate(&default_cfg(10)).unwrap();
    assert_ne!(a.graph.adjacency(), c.graph.adjacency());
}

#[test]
fn empirical_edge_frequencies_match_model() {
    let cfg = SbmConfig {
        p: 20,
        k: 2,
        blocks: BlockSpec::Degrees {
            expected_degree: 4.0,
            sub_degree: 1.0,
        },
        target_degree: 4.0,
        feature_dim: 4,
        ..default_cfg(5)
    };
    let model = DcSbmModel::from_config(&cfg).unwrap();
    let trials = 200;
    let mut counts = vec![vec![0u32; 20]; 20];
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + t);
        for (i, j, _) in model.sample_adjacency(&mut rng).iter() {
            counts[i][j] += 1;
        }
    }
    let mut outside = 0;
    for i in 0..20 {
        for j in (i + 1)..20 {
            let p = model.edge_probability(i, j);
            assert!(p <= 1.0);
            // θ_i θ_j P[y_i, y_j] after scale calibration
            let expected = model.weights[i] * model.weights[j] * model.probabilities[(model.labels[i], model.labels[j])];
            assert!((p - expected).abs() < 1e-15);
            let freq = counts[i][j] as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            if (freq - p).abs() > 3.0 * se {
                outside += 1;
            }
        }
    }
    // 190 pairs: a 3-SE band is missed by about 0.5 pairs on average
    assert!(outside <= 2, "{outside} pairs outside 3 standard errors");
}

#[test]
fn block_matrix_rule_matches_simulated_degree_split() {
    // diagonal 5, off-diagonal 1, three equal blocks: 5/7 of each degree stays inside
    let cfg = SbmConfig {
        p: 900,
        k: 3,
        blocks: BlockSpec::Degrees {
            expected_degree: 6.0,
            sub_degree: 1.0,
        },
        target_degree: 7.0,
        feature_dim: 4,
        ..default_cfg(2)
    };
    let mut inside = 0.0;
    let mut total = 0.0;
    for seed in 0..5 {
        let g = generate(&SbmConfig { seed, ..cfg.clone() }).unwrap();
        let labels = g.graph.labels().unwrap();
        for (i, j, w) in g.graph.adjacency().iter() {
            total += w;
            if labels[i] == labels[j] {
                inside += w;
            }
        }
    }
    assert!((inside / total - 5.0 / 7.0).abs() < 0.02, "{}", inside / total);
}

#[test]
fn matched_feature_means_sit_on_scaled_vertices() {
    let cfg = SbmConfig {
        class_sep: 5.0,
        feature_groups: Some(4),
        ..default_cfg(4)
    };
    let g = generate(&cfg).unwrap();
    let x = g.graph.features().unwrap();
    for group in 0..4 {
        let members: Vec<usize> = (0..1000).filter(|&i| g.feature_groups[i] == group).collect();
        let vertex = hypercube_vertex(group, 128);
        let mut sq = 0.0;
        for j in 0..128 {
            let mean = members.iter().map(|&i| x[(i, j)]).sum::<f64>() / members.len() as f64;
            sq += (mean - 5.0 * vertex[j]).powi(2);
        }
        let rms = (sq / 128.0).sqrt();
        assert!(rms < 0.1, "group {group}: rms deviation {rms}");
    }
}

#[test]
fn nested_and_grouped_feature_regimes() {
    let nested = generate(&SbmConfig {
        feature_groups: Some(8),
        ..default_cfg(6)
    })
    .unwrap();
    let labels = nested.graph.labels().unwrap();
    for b in 0..4 {
        let mut groups: Vec<usize> = (0..1000).filter(|&i| labels[i] == b).map(|i| nested.feature_groups[i]).collect();
        groups.sort_unstable();
        groups.dedup();
        assert_eq!(groups.len(), 2);
    }
    let grouped = generate(&SbmConfig {
        feature_groups: Some(2),
        ..default_cfg(6)
    })
    .unwrap();
    let distinct: std::collections::BTreeSet<usize> = grouped.feature_groups.iter().copied().collect();
    assert_eq!(distinct.len(), 2);
    assert!(matches!(
        generate(&SbmConfig {
            feature_groups: Some(3),
            ..default_cfg(6)
        }),
        Err(SbmError::GroupMismatch { groups: 3, blocks: 4 })
    ));
}

#[test]
fn invalid_degree_pair_is_rejected() {
    let cfg = SbmConfig {
        blocks: BlockSpec::Degrees {
            expected_degree: 2.0,
            sub_degree: 3.0,
        },
        ..default_cfg(0)
    };
    assert!(matches!(generate(&cfg), Err(SbmError::InvalidDegrees { .. })));
}

#[test]
fn explicit_block_matrix_is_validated() {
    let asym = SbmConfig {
        k: 2,
        p: 10,
        blocks: BlockSpec::Matrix(vec![vec![1.0, 0.5], vec![0.2, 1.0]]),
        ..default_cfg(0)
    };
    assert!(matches!(generate(&asym), Err(SbmError::InvalidConfig(_))));
    let ok = SbmConfig {
        k: 2,
        p: 40,
        blocks: BlockSpec::Matrix(vec![vec![3.0, 0.5], vec![0.5, 3.0]]),
        target_degree: 3.0,
        feature_dim: 4,
        ..default_cfg(0)
    };
    assert!(generate(&ok).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn theta_is_clamped(seed in any::<u64>(), lo in 0.5f64..3.0, width in 0.0f64..4.0, exponent in 1.5f64..4.0) {
        let cfg = SbmConfig {
            p: 200,
            theta_min: lo,
            theta_max: lo + width,
            powerlaw_exponent: exponent,
            target_degree: 8.0,
            feature_dim: 8,
            seed,
            ..SbmConfig::default()
        };
        let model = DcSbmModel::from_config(&cfg).unwrap();
        prop_assert!(model.theta.iter().all(|&t| t >= lo && t <= lo + width));
    }

    #[test]
    fn generated_graphs_have_valid_derived_matrices(seed in any::<u64>()) {
        let cfg = SbmConfig { p: 120, target_degree: 6.0, feature_dim: 8, seed, ..SbmConfig::default() };
        let g = generate(&cfg).unwrap();
        let d = magc::graph::build_derived(&g.graph).unwrap();
        let ones = nalgebra::DMatrix::from_element(120, 1, 1.0);
        prop_assert!(d.laplacian.mul_dense(&ones).amax() <= 1e-9);
        prop_assert!(d.modularity.apply(&ones).amax() <= 1e-9);
    }
}
