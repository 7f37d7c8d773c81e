//! Invariant checks: metric axioms of the torus distance, duality of the
//! tessellation against a dense-sampling oracle, replication consistency,
//! and scaling/convexity of the energy machinery.

mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use densepack::analysis;
use densepack::energy::{weighted_value, WeightedEdge};
use densepack::graph::{build_delaunay, DEFAULT_FACET_TOL};
use densepack::torus::{cell_volume, torus_distance, Basis, Configuration, TorusPoint};

fn random_admissible_basis(rng: &mut StdRng) -> Basis {
    // shear until the constructor accepts it; rejected cells are the point
    // of the guard, not a failure
    loop {
        let shear = rng.random_range(-0.6..0.6);
        let stretch = rng.random_range(0.7..1.6);
        let b = Basis::new(vec![vec![1.0, 0.0], vec![shear, stretch]]);
        if let Ok(b) = b {
            return b;
        }
    }
}

#[test]
fn torus_metric_axioms_on_random_samples() {
    let mut rng = StdRng::seed_from_u64(1001);
    for _ in 0..50 {
        let basis = random_admissible_basis(&mut rng);
        for _ in 0..20 {
            let a = TorusPoint::new(vec![rng.random::<f64>(), rng.random::<f64>()]);
            let b = TorusPoint::new(vec![rng.random::<f64>(), rng.random::<f64>()]);
            let c = TorusPoint::new(vec![rng.random::<f64>(), rng.random::<f64>()]);
            let (dab, sab) = torus_distance(&basis, &a, &b);
            let (dba, sba) = torus_distance(&basis, &b, &a);
            assert_relative_eq!(dab, dba, max_relative = 1e-12);

            // shifts negate when the minimiser is unique
            let second_best = {
                let mut best = f64::INFINITY;
                for m in [-1i32, 0, 1] {
                    for l in [-1i32, 0, 1] {
                        if [m, l] == sab.entries() {
                            continue;
                        }
                        let f = [
                            a.frac()[0] - b.frac()[0] + m as f64,
                            a.frac()[1] - b.frac()[1] + l as f64,
                        ];
                        let x = basis.cartesian(&f);
                        best = best.min((x[0] * x[0] + x[1] * x[1]).sqrt());
                    }
                }
                best
            };
            if second_best > dab + 1e-9 {
                assert_eq!(sab.negated(), sba);
            }

            // triangle inequality
            let (dac, _) = torus_distance(&basis, &a, &c);
            let (dcb, _) = torus_distance(&basis, &c, &b);
            assert!(dab <= dac + dcb + 1e-12);

            // translation invariance
            let off = [rng.random::<f64>(), rng.random::<f64>()];
            let at = TorusPoint::new(vec![a.frac()[0] + off[0], a.frac()[1] + off[1]]);
            let bt = TorusPoint::new(vec![b.frac()[0] + off[0], b.frac()[1] + off[1]]);
            let (dt, _) = torus_distance(&basis, &at, &bt);
            assert_relative_eq!(dab, dt, max_relative = 1e-9);

            // admissible cells agree with a wider exhaustive search
            let wide = common::exhaustive_distance(&basis, &a, &b, 2);
            assert_relative_eq!(dab, wide, max_relative = 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_distance_symmetry(ax in 0.0..1.0f64, ay in 0.0..1.0f64,
                               bx in 0.0..1.0f64, by in 0.0..1.0f64,
                               shear in -0.4..0.4f64) {
        let basis = Basis::new(vec![vec![1.0, 0.0], vec![shear, 1.0]]).unwrap();
        let a = TorusPoint::new(vec![ax, ay]);
        let b = TorusPoint::new(vec![bx, by]);
        let (dab, _) = torus_distance(&basis, &a, &b);
        let (dba, _) = torus_distance(&basis, &b, &a);
        prop_assert!((dab - dba).abs() <= 1e-12 * (1.0 + dab));
        // every minimal-image distance is bounded by half the cell diameter
        prop_assert!(dab <= basis.covering_bound() + 1e-12);
    }

    #[test]
    fn volume_scaling(c in 0.3..3.0f64, shear in -0.4..0.4f64) {
        let b1 = Basis::new(vec![vec![1.0, 0.0], vec![shear, 1.0]]).unwrap();
        let b2 = Basis::new(vec![vec![c, 0.0], vec![c * shear, c]]).unwrap();
        prop_assert!((cell_volume(&b2) - c * c * cell_volume(&b1)).abs() <= 1e-12 * c * c);
    }

    #[test]
    fn energy_gauge_invariance(t0 in -2.0..2.0f64, t1 in -2.0..2.0f64, t2 in -2.0..2.0f64,
                               shiftv in -5.0..5.0f64, j0 in -1.0..1.0f64, j1 in -1.0..1.0f64) {
        let edges = vec![
            WeightedEdge { k: 0, j: 1, weight: 1.2, jump: j0 },
            WeightedEdge { k: 1, j: 2, weight: 0.8, jump: j1 },
            WeightedEdge { k: 2, j: 0, weight: 1.7, jump: 0.25 },
        ];
        for p in [2u32, 3, 4] {
            let base = weighted_value(&edges, p, &[t0, t1, t2]);
            let moved = weighted_value(&edges, p, &[t0 + shiftv, t1 + shiftv, t2 + shiftv]);
            prop_assert!((base - moved).abs() <= 1e-10 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn energy_convexity(t0 in -1.0..1.0f64, t1 in -1.0..1.0f64,
                        s0 in -1.0..1.0f64, s1 in -1.0..1.0f64,
                        lambda in 0.0..1.0f64) {
        let edges = vec![
            WeightedEdge { k: 0, j: 1, weight: 1.0, jump: 0.4 },
            WeightedEdge { k: 1, j: 2, weight: 2.0, jump: -0.3 },
            WeightedEdge { k: 2, j: 0, weight: 0.5, jump: 0.1 },
        ];
        let ta = [t0, t1, -t0 - t1];
        let tb = [s0, s1, -s0 - s1];
        let mix: Vec<f64> = ta.iter().zip(&tb)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        for p in [2u32, 3, 4] {
            let lhs = weighted_value(&edges, p, &mix);
            let rhs = lambda * weighted_value(&edges, p, &ta)
                + (1.0 - lambda) * weighted_value(&edges, p, &tb);
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn energy_linear_in_weights(scale in 0.1..10.0f64, t0 in -1.0..1.0f64, t1 in -1.0..1.0f64) {
        let edges = vec![
            WeightedEdge { k: 0, j: 1, weight: 1.0, jump: 0.7 },
            WeightedEdge { k: 1, j: 0, weight: 0.6, jump: -0.2 },
        ];
        let scaled: Vec<WeightedEdge> = edges.iter()
            .map(|e| WeightedEdge { k: e.k, j: e.j, weight: scale * e.weight, jump: e.jump })
            .collect();
        let t = [t0, t1];
        for p in [2u32, 3] {
            let a = weighted_value(&edges, p, &t);
            let b = weighted_value(&scaled, p, &t);
            prop_assert!((b - scale * a).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn config_files_roundtrip_bit_exactly(ax in 0.0..1.0f64, ay in 0.0..1.0f64,
                                          shear in -0.3..0.3f64, radius in 1e-6..0.2f64) {
        use densepack::formats::ConfigFile;
        let basis = Basis::new(vec![vec![1.0, 0.0], vec![shear, 1.0]]).unwrap();
        let config = Configuration::new(
            basis,
            vec![TorusPoint::new(vec![ax, ay]), TorusPoint::new(vec![ax, (ay + 0.5) % 1.0])],
            radius,
        ).unwrap();
        let json = serde_json::to_string(&ConfigFile::from_configuration(&config)).unwrap();
        let back: ConfigFile = serde_json::from_str(&json).unwrap();
        let config2 = back.into_configuration().unwrap();
        prop_assert_eq!(config.radius.to_bits(), config2.radius.to_bits());
        for (a, b) in config.centers.iter().zip(&config2.centers) {
            for (x, y) in a.frac().iter().zip(b.frac()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        for (a, b) in config.basis.vectors().iter().zip(config2.basis.vectors()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn percolation_translation_invariance(offx in 0.0..1.0f64, offy in 0.0..1.0f64) {
        let basis = Basis::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let base = [[0.0, 0.0], [0.5, 0.0]];
        let centers: Vec<TorusPoint> = base.iter()
            .map(|c| TorusPoint::new(vec![c[0] + offx, c[1] + offy])).collect();
        let config = Configuration::new(basis, centers, 0.5).unwrap();
        let report = analysis::detect_percolation(&config, 1e-8);
        prop_assert_eq!(report.winding, vec![true, false]);
    }
}

#[test]
fn delaunay_handshake_on_random_configurations() {
    let mut rng = StdRng::seed_from_u64(2002);
    for _ in 0..15 {
        let basis = random_admissible_basis(&mut rng);
        let n = rng.random_range(2..=6);
        let centers: Vec<TorusPoint> = (0..n)
            .map(|_| TorusPoint::new(vec![rng.random::<f64>(), rng.random::<f64>()]))
            .collect();
        let Ok(config) = Configuration::new(basis, centers, 1e-3) else {
            continue; // coincident draw
        };
        let Ok(graph) = build_delaunay(&config, DEFAULT_FACET_TOL) else {
            continue;
        };
        let degree_sum: usize = (0..n).map(|k| graph.degree(k)).sum();
        assert_eq!(degree_sum, 2 * graph.edges().len());
        // every vertex of a tessellation has neighbours
        assert!((0..n).all(|k| graph.degree(k) >= 2));
    }
}

#[test]
fn delaunay_matches_sampling_oracle_2d() {
    let mut rng = StdRng::seed_from_u64(3003);
    let mut accepted = 0;
    while accepted < 8 {
        let basis = Basis::new(vec![vec![1.0, 0.0], vec![0.15, 1.1]]).unwrap();
        let n = rng.random_range(2..=5);
        let centers: Vec<TorusPoint> = (0..n)
            .map(|_| TorusPoint::new(vec![rng.random::<f64>(), rng.random::<f64>()]))
            .collect();
        let Ok(config) = Configuration::new(basis, centers, 0.01) else {
            continue;
        };
        let hits = common::sampled_voronoi_neighbors(&config, 160);
        let total: usize = hits.values().sum();
        if total == 0 {
            continue;
        }
        // reject draws with ambiguous (near-degenerate) facets
        let strong = 40usize;
        if hits.values().any(|&c| c >= 4 && c < strong) {
            continue;
        }
        accepted += 1;

        let graph = build_delaunay(&config, DEFAULT_FACET_TOL).unwrap();
        let built: std::collections::BTreeSet<(usize, usize, Vec<i32>)> = graph
            .edges()
            .iter()
            .map(|e| (e.k, e.j, e.shift.entries().to_vec()))
            .collect();
        let oracle: std::collections::BTreeSet<(usize, usize, Vec<i32>)> = hits
            .iter()
            .filter(|(_, &c)| c >= strong)
            .map(|(k, _)| k.clone())
            .collect();
        assert!(
            oracle.is_subset(&built),
            "oracle found pairs the build missed: {:?} vs {:?}",
            oracle,
            built
        );
        // the build may keep thin-but-positive facets the sampler missed;
        // require the bulk to agree
        let missing: Vec<_> = built.difference(&oracle).collect();
        assert!(
            missing.len() * 4 <= built.len(),
            "too many built edges unseen by the oracle: {missing:?}"
        );
    }
}

#[test]
fn delaunay_matches_sampling_oracle_3d() {
    let basis = Basis::cubic(3, 1.0).unwrap();
    let centers = vec![
        TorusPoint::new(vec![0.1, 0.15, 0.2]),
        TorusPoint::new(vec![0.6, 0.55, 0.3]),
        TorusPoint::new(vec![0.25, 0.7, 0.75]),
    ];
    let config = Configuration::new(basis, centers, 0.05).unwrap();
    let graph = build_delaunay(&config, DEFAULT_FACET_TOL).unwrap();
    let hits = common::sampled_voronoi_neighbors(&config, 40);
    let built: std::collections::BTreeSet<(usize, usize, Vec<i32>)> = graph
        .edges()
        .iter()
        .map(|e| (e.k, e.j, e.shift.entries().to_vec()))
        .collect();
    for (pair, count) in hits {
        if count >= 30 {
            assert!(built.contains(&pair), "missing {pair:?} ({count} hits)");
        }
    }
}

#[test]
fn replicated_cell_quotient_reproduces_edges() {
    // build a 3^d replication of a hexagonal 2x2 configuration, take the
    // edges of the central copy, and map them back to the quotient
    let lat = densepack::lattices::generate(
        densepack::lattices::LatticeSpec::new(densepack::lattices::Family::A2, 2, 2).unwrap(),
    )
    .unwrap();
    let n = lat.centers.len();
    let d = 2;

    let big_basis = Basis::new(
        lat.basis
            .vectors()
            .iter()
            .map(|v| v.iter().map(|x| 3.0 * x).collect())
            .collect(),
    )
    .unwrap();
    // replica layout: offset (ox, oy) in {-1, 0, 1}, central copy first
    let mut offsets = vec![[0i32, 0i32]];
    for ox in -1..=1 {
        for oy in -1..=1 {
            if (ox, oy) != (0, 0) {
                offsets.push([ox, oy]);
            }
        }
    }
    let mut big_centers = Vec::new();
    for off in &offsets {
        for c in &lat.centers {
            big_centers.push(TorusPoint::new(vec![
                (c.frac()[0] + off[0] as f64 + 1.0) / 3.0,
                (c.frac()[1] + off[1] as f64 + 1.0) / 3.0,
            ]));
        }
    }
    let big = Configuration::new(big_basis, big_centers, lat.touch_radius).unwrap();
    let big_graph = build_delaunay(&big, DEFAULT_FACET_TOL).unwrap();

    let mut quotient: std::collections::BTreeSet<(usize, usize, Vec<i32>)> = Default::default();
    for e in big_graph.edges() {
        let (copy_k, vertex_k) = (e.k / n, e.k % n);
        let (copy_j, vertex_j) = (e.j / n, e.j % n);
        if copy_k != 0 && copy_j != 0 {
            continue;
        }
        // orient so the central-copy endpoint comes first
        let (vk, vj, off_j, big_shift) = if copy_k == 0 {
            (
                vertex_k,
                vertex_j,
                offsets[copy_j],
                e.shift.entries().to_vec(),
            )
        } else {
            (
                vertex_j,
                vertex_k,
                offsets[copy_k],
                e.shift.negated().entries().to_vec(),
            )
        };
        let shift: Vec<i32> = (0..d).map(|q| off_j[q] + 3 * big_shift[q]).collect();
        if shift.iter().any(|s| s.abs() > 1) {
            continue; // relation between outer copies only
        }
        quotient.insert(common::canonical_pair(vk, vj, shift));
    }

    let direct: std::collections::BTreeSet<(usize, usize, Vec<i32>)> = lat
        .graph
        .edges()
        .iter()
        .map(|e| (e.k, e.j, e.shift.entries().to_vec()))
        .collect();
    assert_eq!(quotient, direct);
}

#[test]
fn touch_tol_separated_scales_stability() {
    // gaps far below and far above the tolerance: halving it changes nothing
    let basis = Basis::new(vec![vec![4.0, 0.0], vec![0.0, 4.0]]).unwrap();
    let tol = analysis::DEFAULT_TOUCH_TOL;
    let r = 0.5;
    let tiny_gap = tol * r / 8.0;
    let wide_gap = tol * r * 8.0;
    let centers = vec![
        TorusPoint::new(vec![0.0, 0.0]),
        TorusPoint::new(vec![(1.0 + tiny_gap) / 4.0, 0.0]),
        TorusPoint::new(vec![(2.0 + tiny_gap + 1.0 + wide_gap) / 4.0, 0.0]),
    ];
    let config = Configuration::new(basis, centers, r).unwrap();
    let full = analysis::detect_percolation(&config, tol);
    let halved = analysis::detect_percolation(&config, tol / 2.0);
    assert_eq!(full.winding, halved.winding);
    assert_eq!(full.touching_edges, halved.touching_edges);
    assert_eq!(full.components, halved.components);
}
