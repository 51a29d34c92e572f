use paratess::hull::{power, simplex_distance, Apex, SimplexCell};
use paratess::point_processes::{ModelParams, Region};
use paratess::stats::mean_se;
use paratess::tessellation::{empirical_face_intensities, face_counts, simulate, Tessellation, WindowSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn k_region(t: &Tessellation) -> (f64, f64) {
    match t.sample_region {
        Region::KRegion { a, t, .. } => (a, t),
        _ => panic!("unexpected sample region"),
    }
}

/// Valid cells have no sample point strictly below their paraboloid, and
/// the paraboloid's downset stays inside the sampled K-region.
fn assert_boundary_safe(t: &Tessellation) {
    let (a, big_t) = k_region(t);
    for c in t.valid_cells() {
        let w = &c.apex.w;
        assert!(norm(w) <= t.window.radius);
        for p in &t.points {
            assert!(power(w, p) >= c.apex.r - 1e-9 * (1.0 + c.apex.r.abs()), "point inside the empty region");
        }
        // h <= r - |v-w|^2 must imply h <= T - (|v| - a)_+^2 along every ray
        for k in 0..64 {
            let th = k as f64 * std::f64::consts::TAU / 64.0;
            for s in 0..40 {
                let rho = s as f64 * 0.5;
                let mut v = w.clone();
                v[0] += rho * th.cos();
                if v.len() > 1 {
                    v[1] += rho * th.sin();
                }
                let dv: f64 = v.iter().zip(w).map(|(x, y)| (x - y).powi(2)).sum();
                let e = (norm(&v) - a).max(0.0);
                assert!(c.apex.r - dv <= big_t - e * e + 1e-9);
            }
        }
    }
}

fn barycentric_min(x: &[f64; 2], t: &[Vec<f64>]) -> f64 {
    let (a, b, c) = (&t[0], &t[1], &t[2]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    l1.min(l2).min(1.0 - l1 - l2)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn valid_cells_are_boundary_safe(seed in 0u64..1_000_000, d in 2usize..=3, radius in 1.0f64..2.5) {
        let t = simulate(&WindowSpec::new(ModelParams::gaussian(d), radius, 0.1), seed).unwrap();
        prop_assert!(t.complete);
        assert_boundary_safe(&t);
    }

    #[test]
    fn valid_cells_tile_the_window(seed in 0u64..1_000_000, radius in 1.0f64..3.0) {
        let t = simulate(&WindowSpec::new(ModelParams::gaussian(3), radius, 0.1), seed).unwrap();
        prop_assert!(t.complete);
        let certified: Vec<&SimplexCell> = t.cells.iter().zip(&t.certified).filter(|(_, c)| **c).map(|(c, _)| c).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x = loop {
                let x = [rng.gen_range(-radius..radius), rng.gen_range(-radius..radius)];
                if norm(&x) <= radius {
                    break x;
                }
            };
            let touching = certified.iter().filter(|c| simplex_distance(&x, &c.vertices) <= 1e-12).count();
            let interior = certified.iter().filter(|c| barycentric_min(&x, &c.vertices) > 1e-9).count();
            prop_assert!(touching >= 1);
            prop_assert!(interior <= 1);
        }
    }
}

/// Every ridge is shared by at most two cells, adjacency is symmetric and
/// each Laguerre vertex (cell apex) has exactly d nearest sites in power.
#[test]
fn realizations_are_normal() {
    for seed in 0..20u64 {
        for d in [2usize, 3] {
            let t = simulate(&WindowSpec::new(ModelParams::gaussian(d), 2.0, 0.1), seed).unwrap();
            assert!(t.complete && !t.perturbed);
            let mut ridges = std::collections::HashMap::<Vec<usize>, usize>::new();
            for (i, c) in t.cells.iter().enumerate() {
                assert_eq!(c.vertex_indices.len(), d);
                for k in 0..d {
                    let r: Vec<usize> = c.vertex_indices.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| *v).collect();
                    *ridges.entry(r).or_default() += 1;
                    if let Some(j) = t.neighbors[i][k] {
                        assert!(t.neighbors[j].contains(&Some(i)));
                    }
                }
            }
            assert!(ridges.values().all(|&n| n <= 2));
            for c in t.valid_cells() {
                let near = t.points.iter().filter(|p| (power(&c.apex.w, p) - c.apex.r).abs() <= 1e-9 * (1.0 + c.apex.r.abs())).count();
                assert_eq!(near, d, "seed {seed}, d {d}");
            }
        }
    }
}

/// Apex counts per unit length in two disjoint translated windows agree.
#[test]
fn cell_counts_are_stationary() {
    for (d, reps) in [(2usize, 1000u64), (3, 200)] {
        let spec = WindowSpec::new(ModelParams::gaussian(d), 2.0, 0.1);
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for seed in 0..reps {
            let t = simulate(&spec, 5000 + seed).unwrap();
            assert!(t.complete);
            let count = |x0: f64| t.valid_cells().filter(|c| norm(&[c.apex.w[0] - x0, c.apex.w.get(1).copied().unwrap_or(0.0)]) <= 0.8).count() as f64;
            left.push(count(-1.0));
            right.push(count(1.0));
        }
        let (l, r) = (mean_se(&left), mean_se(&right));
        let se = (l.stderr.powi(2) + r.stderr.powi(2)).sqrt();
        assert!((l.value - r.value).abs() <= 3.0 * se, "d={d}: {l:?} vs {r:?}");
        assert!(l.value > 0.5);
    }
}

#[test]
fn single_cell_window_has_unit_cell_intensity() {
    let spec = WindowSpec::new(ModelParams::gaussian(2), 1.0, 0.1);
    let mut t = simulate(&spec, 1).unwrap();
    let cell = SimplexCell {
        vertex_indices: vec![0, 1],
        vertices: vec![vec![-1.0], vec![1.0]],
        heights: vec![0.0, 0.0],
        apex: Apex { w: vec![0.0], r: 1.0 },
        volume: 2.0,
    };
    t.cells = vec![cell];
    t.neighbors = vec![vec![None, None]];
    t.certified = vec![true];
    t.valid = vec![true];
    t.complete = true;
    t.empty = false;
    assert_eq!(face_counts(&t), vec![2, 1]);
    let f = empirical_face_intensities(&[t]).unwrap();
    assert!((f.gamma[1].value - 0.5).abs() < 1e-12);
    assert_eq!(f.realizations, 1);
}

#[test]
fn enlargement_keeps_the_valid_set() {
    let spec = WindowSpec::new(ModelParams::gaussian(3), 1.5, 0.1);
    for seed in 0..30 {
        let t = simulate(&spec, seed).unwrap();
        let (a, big_t) = k_region(&t);
        let e = t.enlarged((1.5 * a).max(a + 1.0), big_t + 2.0).unwrap();
        assert!(e.complete);
        assert_eq!(t.valid_set(), e.valid_set(), "seed {seed}");
        assert_boundary_safe(&e);
    }
}
