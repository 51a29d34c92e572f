//! End-to-end acceptance run: one line per criterion, nonzero exit if any
//! criterion fails. Seeds are fixed in advance.

use paratess::convergence::{admissible_points, bound_check, convergence_experiment, BoundKind, CompactTestSet, ConvergenceConfig};
use paratess::hull::{brute_force_cells, delaunay_cells};
use paratess::point_processes::{ModelKind, ModelParams, WeightedPoint};
use paratess::rng::child;
use paratess::stats::{ks_two_sample, mean_se, poisson_quantile};
use paratess::tessellation::{empirical_face_intensities, simulate, Tessellation, WindowSpec};
use paratess::typical::{
    angle_sums, chisq_product_sample, importance_moment, normalization_integral, regular_angle_sums, sample_typical_cell, volume_moment,
    CellLawParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn c1_moments() -> Outcome {
    let e1 = volume_moment(&CellLawParams::new(2, -1.0, 2.0)).unwrap();
    let e2 = volume_moment(&CellLawParams::new(3, 0.0, 2.0)).unwrap();
    let exact_ok = rel(e1, 2.0) <= 1e-12 && rel(e2, 4.5) <= 1e-12;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for d in [2usize, 3, 4] {
        for nu in [-1.0, 0.0, 1.0, 2.0] {
            for s in [1.0, 2.0, 3.0] {
                let p = CellLawParams::new(d, nu, s);
                let z = importance_moment(&p, 1_000_000, 2024).unwrap().z(volume_moment(&p).unwrap());
                worst = worst.max(z.abs());
                if z.abs() > 3.0 {
                    bad.push(format!("({d},{nu},{s}) z={z:.2}"));
                }
            }
        }
    }
    outcome(exact_ok && bad.is_empty(), format!("exact rel err {:.1e}/{:.1e}; 36 MC moments, max |z| = {worst:.2} {bad:?}", rel(e1, 2.0), rel(e2, 4.5)))
}

fn c2_chisq_law() -> Outcome {
    let mut worst = 0;
    let mut parts = Vec::new();
    for d in [2usize, 3] {
        for nu in [-1.0, 0.0, 1.0] {
            let p = CellLawParams::new(d, nu, 0.0);
            let f: f64 = (1..d).map(|x| x as f64).product();
            let fails = (0..100u64)
                .into_par_iter()
                .filter(|&trial| {
                    let a: Vec<f64> = sample_typical_cell(&p, 1000, child(2, trial)).unwrap().iter().map(|s| (f * s.volume).powi(2)).collect();
                    let b = chisq_product_sample(&p, 1000, child(3, trial)).unwrap();
                    ks_two_sample(&a, &b).1 < 0.01
                })
                .count();
            worst = worst.max(fails);
            parts.push(format!("({d},{nu}):{fails}"));
        }
    }
    outcome(worst <= 5, format!("KS rejections per 100 trials {}", parts.join(" ")))
}

fn c3_angle_sums() -> Outcome {
    let d = 3;
    let want = regular_angle_sums(d).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for nu in [-1.0, 0.0, 1.0] {
        let cells = sample_typical_cell(&CellLawParams::new(d, nu, 1.0), 10_000, child(30, (nu + 1.0) as u64)).unwrap();
        let sums: Vec<_> = cells.par_iter().enumerate().map(|(i, c)| angle_sums(&c.vertices, 2000, child(31, i as u64)).unwrap()).collect();
        let mut zs = Vec::new();
        for k in 0..d {
            let e = mean_se(&sums.iter().map(|a| a.sigma[k].value).collect::<Vec<_>>());
            let ok = if e.stderr == 0.0 { (e.value - want[k]).abs() < 1e-12 } else { e.z(want[k]).abs() <= 3.0 };
            pass &= ok;
            zs.push(format!("{:.4}", e.value));
        }
        // per cell: |gram| within 4 s.e.; the count of exceedances must be
        // consistent with the normal tail over 10^4 independent cells
        let exceed = sums.iter().filter(|a| a.gram.value.abs() > 4.0 * a.gram.stderr).count();
        let allowed = poisson_quantile(sums.len() as f64 * 6.334e-5, 0.999) as usize;
        let gram_mean = mean_se(&sums.iter().map(|a| a.gram.value).collect::<Vec<_>>());
        pass &= exceed <= allowed && gram_mean.z(0.0).abs() <= 4.0;
        parts.push(format!("nu={nu}: sigma=({}) gram z={:.2} cells>4se={exceed}/{allowed}", zs.join(","), gram_mean.z(0.0)));
    }
    outcome(pass, parts.join("; "))
}

fn c4_face_intensities() -> Outcome {
    let spec = WindowSpec::new(ModelParams::gaussian(3), 15.0, 0.05);
    let list: Vec<Tessellation> = (0..200u64).into_par_iter().map(|k| simulate(&spec, child(40, k)).unwrap()).collect();
    let n_valid: usize = list.iter().filter(|t| t.complete).map(|t| t.valid_cells().count()).sum();
    let f = empirical_face_intensities(&list).unwrap();
    let g2 = f.gamma[2].value;
    let ratio = f.gamma[1].value / g2;
    let want = 1.0 / 3f64.sqrt();
    let pass = n_valid >= 10_000 && rel(g2, want) <= 0.02 && f.euler.value.abs() <= 3.0 * f.euler.stderr.max(1e-300) && rel(ratio, 1.5) <= 0.01;
    outcome(
        pass,
        format!(
            "{n_valid} valid cells in {} windows; gamma2 = {g2:.5} (se {:.5}, {:+.2}%); euler = {:.2e} (se {:.1e}); gamma1/gamma2 = {ratio:.5}",
            f.realizations,
            f.gamma[2].stderr,
            100.0 * (g2 / want - 1.0),
            f.euler.value,
            f.euler.stderr
        ),
    )
}

fn c5_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for inst in 0..1000 {
        let dim = 1 + inst % 2;
        let n = rng.gen_range(dim + 1..=10);
        let pts: Vec<WeightedPoint> =
            (0..n).map(|_| WeightedPoint::new((0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(), rng.gen_range(-1.0..1.0))).collect();
        let mut got: Vec<Vec<usize>> = delaunay_cells(&pts).unwrap().into_iter().map(|c| c.vertex_indices).collect();
        let mut want = brute_force_cells(&pts);
        got.sort();
        want.sort();
        mismatches += (got != want) as usize;
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in 1000 instances (d = 2, 3)"))
}

fn c6_bounds() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for which in BoundKind::ALL {
        let rows: Vec<_> = admissible_points(which, 20, 6).iter().enumerate().map(|(i, q)| bound_check(which, q, 1000, 100 + i as u64).unwrap()).collect();
        let bad = rows.iter().filter(|r| !r.ok).count();
        let ratio = rows.iter().map(|r| r.empirical / r.bound).fold(0.0, f64::max);
        pass &= bad == 0;
        parts.push(format!("{which}[{:?}]: {bad} violations, max freq/bound {ratio:.2}", which.model()));
    }
    outcome(pass, parts.join("; "))
}

fn c7_stabilization() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (radius, eps) in [(1.0, 0.1), (2.0, 0.05)] {
        for d in [2usize, 3] {
            let spec = WindowSpec::new(ModelParams::gaussian(d), radius, eps);
            let changed = (0..1000u64)
                .into_par_iter()
                .filter(|&seed| {
                    let t = simulate(&spec, child(70, seed)).unwrap();
                    let (a, big_t) = match t.sample_region {
                        paratess::point_processes::Region::KRegion { a, t, .. } => (a, t),
                        _ => unreachable!(),
                    };
                    let e = t.enlarged((1.5 * a).max(a + 1.0), big_t + 2.0).unwrap();
                    !t.complete || t.valid_set() != e.valid_set()
                })
                .count();
            let frac = changed as f64 / 1000.0;
            pass &= frac <= eps;
            parts.push(format!("(R={radius}, eps={eps}, d={d}): {changed}/1000"));
        }
    }
    outcome(pass, format!("changed valid sets {}", parts.join(" ")))
}

fn c8_convergence() -> Outcome {
    let cfg = ConvergenceConfig {
        kinds: vec![ModelKind::Beta, ModelKind::BetaPrime],
        betas: vec![4.0, 16.0, 64.0, 256.0],
        compacts: vec![
            CompactTestSet::Ball { center: vec![0.0], radius: 0.3 },
            CompactTestSet::Segment { a: vec![0.5], b: vec![1.2] },
            CompactTestSet::Ball { center: vec![-1.0], radius: 0.4 },
        ],
        window: WindowSpec::new(ModelParams::gaussian(2), 2.0, 0.05),
        n_reps: 2000,
        seed: 8,
    };
    let t = convergence_experiment(&cfg).unwrap();
    let tv_ok = t.tv_decreasing.iter().all(|x| x.1);
    let mut parts = Vec::new();
    for kind in [ModelKind::Beta, ModelKind::BetaPrime] {
        let maxes: Vec<String> = cfg.betas.iter().map(|&b| format!("{:.4}", t.max_row(kind, b).unwrap().delta)).collect();
        parts.push(format!("{kind:?} max delta [{}]", maxes.join(", ")));
    }
    outcome(
        t.all_monotone() && tv_ok && t.incomplete == 0,
        format!("{}; monotone {:?}; tv strictly decreasing {tv_ok}; incomplete {}", parts.join("; "), t.monotone, t.incomplete),
    )
}

fn c9_normalization() -> Outcome {
    let vals: Vec<f64> = [-1.0, 0.0, 1.0].iter().map(|&nu| normalization_integral(nu).unwrap()).collect();
    outcome(vals.iter().all(|v| (v - 1.0).abs() <= 1e-3), format!("integrals {vals:?}"))
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 closed-form moments", c1_moments),
        ("2 chi-square product law", c2_chisq_law),
        ("3 angle sums", c3_angle_sums),
        ("4 face intensities", c4_face_intensities),
        ("5 duality oracle", c5_duality),
        ("6 height bounds", c6_bounds),
        ("7 stabilization", c7_stabilization),
        ("8 convergence", c8_convergence),
        ("9 normalization", c9_normalization),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let t0 = Instant::now();
        let o = run();
        failed += !o.pass as usize;
        println!("criterion {name}: {} ({:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64(), o.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
