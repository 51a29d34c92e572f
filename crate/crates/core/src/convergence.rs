//! Capacity functionals of simulated skeleta, the total-variation bound and
//! the coupled convergence experiment.

use crate::error::{Error, Result};
use crate::point_processes::{ModelKind, ModelParams};
use crate::special::{integrate, kappa, ln_c_beta, ln_c_beta_prime};
use crate::stats::{mean_se, Estimate};
use crate::tessellation::{plan_window, simulate_with, skeleton, SimOptions, SkeletonFace, WindowSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use crate::bounds::{growth_bound, BoundKind, BoundQuery};

/// Fraction of the window radius kept free of test sets.
pub const MARGIN: f64 = 0.05;

/// Compact test sets for capacity functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CompactTestSet {
    Empty,
    Ball { center: Vec<f64>, radius: f64 },
    Segment { a: Vec<f64>, b: Vec<f64> },
    FiniteUnion { parts: Vec<CompactTestSet> },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(&ab, &ab);
    let t = if l2 == 0.0 { 0.0 } else { (dot(&sub(p, a), &ab) / l2).clamp(0.0, 1.0) };
    let q: Vec<f64> = a.iter().zip(&ab).map(|(x, y)| x + t * y).collect();
    norm(&sub(p, &q))
}

fn orient2(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(p: &[f64], a: &[f64], b: &[f64]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed segments in the plane intersect.
fn segments_intersect(p: &[f64], q: &[f64], a: &[f64], b: &[f64]) -> bool {
    let d1 = orient2(a, b, p);
    let d2 = orient2(a, b, q);
    let d3 = orient2(p, q, a);
    let d4 = orient2(p, q, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p, a, b)) || (d2 == 0.0 && on_segment(q, a, b)) || (d3 == 0.0 && on_segment(a, p, q)) || (d4 == 0.0 && on_segment(b, p, q))
}

impl CompactTestSet {
    /// Largest distance of the set from the origin (0 for the empty set).
    pub fn extent(&self) -> f64 {
        match self {
            CompactTestSet::Empty => 0.0,
            CompactTestSet::Ball { center, radius } => norm(center) + radius,
            CompactTestSet::Segment { a, b } => norm(a).max(norm(b)),
            CompactTestSet::FiniteUnion { parts } => parts.iter().map(|p| p.extent()).fold(0.0, f64::max),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            CompactTestSet::Empty => true,
            CompactTestSet::FiniteUnion { parts } => parts.iter().all(|p| p.is_empty()),
            _ => false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            CompactTestSet::Empty => Ok(()),
            CompactTestSet::Ball { center, radius } if center.len() == n && *radius >= 0.0 => Ok(()),
            CompactTestSet::Segment { a, b } if a.len() == n && b.len() == n => Ok(()),
            CompactTestSet::FiniteUnion { parts } => parts.iter().try_for_each(|p| p.validate(n)),
            _ => Err(Error::Parameter(format!("test set does not live in R^{n} or has negative radius"))),
        }
    }

    /// Whether the set meets a skeleton face (a point in R^1, a segment in R^2).
    pub fn hits_face(&self, face: &SkeletonFace) -> Result<bool> {
        let pts = &face.points;
        match self {
            CompactTestSet::Empty => Ok(false),
            CompactTestSet::FiniteUnion { parts } => {
                for p in parts {
                    if p.hits_face(face)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            CompactTestSet::Ball { center, radius } => match pts.len() {
                1 => Ok(norm(&sub(&pts[0], center)) <= *radius),
                2 => Ok(point_segment_distance(center, &pts[0], &pts[1]) <= *radius),
                _ => Err(Error::Dimension(pts.len() + 1)),
            },
            CompactTestSet::Segment { a, b } => match pts.len() {
                1 => Ok(point_segment_distance(&pts[0], a, b) == 0.0),
                2 => Ok(segments_intersect(&pts[0], &pts[1], a, b)),
                _ => Err(Error::Dimension(pts.len() + 1)),
            },
        }
    }

    pub fn hits(&self, skeleton: &[SkeletonFace]) -> Result<bool> {
        for f in skeleton {
            if self.hits_face(f)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn check_margin(c: &CompactTestSet, window: &WindowSpec) -> Result<()> {
    c.validate(window.model.spatial_dim())?;
    let lim = window.radius * (1.0 - MARGIN);
    if c.extent() > lim {
        return Err(Error::UndecidableMargin(format!("test set reaches {} > {lim} = R(1 - {MARGIN})", c.extent())));
    }
    Ok(())
}

/// Per-replication hit indicators for several test sets, from one simulated
/// tessellation per replication (substream = replication index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitTable {
    /// `hits[c][k]`: test set c hit in replication k; only complete
    /// replications are kept.
    pub hits: Vec<Vec<bool>>,
    /// Replication indices kept.
    pub replications: Vec<u64>,
    pub incomplete: usize,
}

impl HitTable {
    pub fn estimate(&self, c: usize) -> Estimate {
        let xs: Vec<f64> = self.hits[c].iter().map(|&h| h as u8 as f64).collect();
        binomial_estimate(&xs)
    }
}

fn binomial_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let p = xs.iter().sum::<f64>() / n.max(1) as f64;
    Estimate { value: p, stderr: (p * (1.0 - p) / n.max(1) as f64).sqrt(), n }
}

/// Simulates `n_reps` coupled replications and tests every set against the
/// skeleton inside the window.
pub fn capacity_hits(
    model: &ModelParams,
    compacts: &[CompactTestSet],
    window: &WindowSpec,
    n_reps: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<HitTable> {
    let window = WindowSpec { model: *model, ..*window };
    window.validate()?;
    for c in compacts {
        check_margin(c, &window)?;
    }
    let rows: Vec<Option<Vec<bool>>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|k| {
            let tess = simulate_with(&window, seed, &SimOptions { substream: k, ..*opts })?;
            if !tess.complete {
                return Ok(None);
            }
            let sk = skeleton(&tess);
            compacts.iter().map(|c| c.hits(&sk)).collect::<Result<Vec<bool>>>().map(Some)
        })
        .collect::<Result<_>>()?;
    let mut table = HitTable { hits: vec![Vec::new(); compacts.len()], replications: Vec::new(), incomplete: 0 };
    for (k, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => {
                for (c, h) in r.into_iter().enumerate() {
                    table.hits[c].push(h);
                }
                table.replications.push(k as u64);
            }
            None => table.incomplete += 1,
        }
    }
    Ok(table)
}

/// Fraction of replications whose skeleton meets C, with binomial error.
pub fn capacity_estimate(model: &ModelParams, c: &CompactTestSet, window: &WindowSpec, n_reps: usize, seed: u64) -> Result<Estimate> {
    if c.is_empty() {
        check_margin(c, window)?;
        return Ok(Estimate { value: 0.0, stderr: 0.0, n: n_reps });
    }
    let t = capacity_hits(model, std::slice::from_ref(c), window, n_reps, seed, &SimOptions::default())?;
    Ok(t.estimate(0))
}

fn gaussian_density(d: usize, s: f64) -> f64 {
    (0.5 * s - 0.5 * d as f64 * (2.0 * PI).ln()).exp()
}

/// Rescaled height density with the intensity normalized as in the
/// Gaussian limit.
fn rescaled_density(kind: ModelKind, d: usize, beta: f64, s: f64) -> f64 {
    let h = 0.5 * d as f64;
    match kind {
        ModelKind::Beta if s >= -2.0 * beta => (ln_c_beta(d, beta) - h * (2.0 * beta).ln() + beta * (1.0 + s / (2.0 * beta)).ln()).exp(),
        ModelKind::BetaPrime if s < 2.0 * beta => (ln_c_beta_prime(d, beta) - h * (2.0 * beta).ln() - beta * (1.0 - s / (2.0 * beta)).ln()).exp(),
        ModelKind::Gaussian => gaussian_density(d, s),
        _ => 0.0,
    }
}

/// (3/2) kappa_{d-1} int_{-inf}^T (sqrt(T-s)+R+r)^{d-1} |g(s) - p_beta(s)| ds
/// for the rescaled beta model, by adaptive quadrature split at -2 beta.
pub fn tv_bound_integral(beta: f64, radius: f64, r: f64, big_t: f64, d: usize) -> Result<f64> {
    tv_bound_integral_for(ModelKind::Beta, beta, radius, r, big_t, d)
}

/// Same integral with the density of either rescaled family; the beta-prime
/// density is singular at 2 beta, where the integral diverges.
pub fn tv_bound_integral_for(kind: ModelKind, beta: f64, radius: f64, r: f64, big_t: f64, d: usize) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta = {beta} must be positive")));
    }
    if d < 2 {
        return Err(Error::Parameter(format!("d = {d} must be at least 2")));
    }
    if kind == ModelKind::BetaPrime && big_t >= 2.0 * beta {
        return Ok(f64::INFINITY);
    }
    let n = (d - 1) as i32;
    let f = |s: f64| {
        let w = ((big_t - s).max(0.0).sqrt() + radius + r).powi(n);
        w * (gaussian_density(d, s) - rescaled_density(kind, d, beta, s)).abs()
    };
    // e^{s/2} is below 1e-80 of its value at T beyond T - 370
    let lo = big_t - 370.0 - 4.0 * (radius + r + 1.0).ln() * n as f64;
    let mut cuts = vec![lo];
    for c in [-2.0 * beta, 2.0 * beta] {
        if c > lo && c < big_t {
            cuts.push(c);
        }
    }
    cuts.push(big_t);
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += integrate(f, w[0], w[1], 1e-9).0;
        }
    }
    Ok(1.5 * kappa(d - 1) * total)
}

/// Configuration of a convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub kinds: Vec<ModelKind>,
    pub betas: Vec<f64>,
    pub compacts: Vec<CompactTestSet>,
    pub window: WindowSpec,
    pub n_reps: usize,
    pub seed: u64,
}

/// One (model, beta, compact) comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub kind: ModelKind,
    pub beta: f64,
    pub compact: usize,
    pub t_beta: f64,
    pub t_gauss: f64,
    pub delta: f64,
    /// Paired standard error of T_beta - T over common replications.
    pub stderr: f64,
    pub n_paired: usize,
    pub tv_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Per model: max over compacts of delta is non-increasing along the
    /// beta list up to 3 combined standard errors.
    pub monotone: Vec<(ModelKind, bool)>,
    /// Per model: the total-variation bound is strictly decreasing.
    pub tv_decreasing: Vec<(ModelKind, bool)>,
    pub incomplete: usize,
}

impl ConvergenceTable {
    pub fn all_monotone(&self) -> bool {
        self.monotone.iter().all(|m| m.1)
    }

    /// Row with the largest delta for a model and beta.
    pub fn max_row(&self, kind: ModelKind, beta: f64) -> Option<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.kind == kind && r.beta == beta).max_by(|a, b| a.delta.total_cmp(&b.delta))
    }
}

/// Runs the coupled experiment. All models share the Gaussian window plan
/// and the replication substreams, so beta and Gaussian realizations are
/// driven by the same uniforms.
pub fn convergence_experiment(cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    let window = cfg.window;
    let gauss = ModelParams::gaussian(window.model.d);
    let gwin = WindowSpec { model: gauss, ..window };
    for c in &cfg.compacts {
        check_margin(c, &gwin)?;
    }
    let plan = plan_window(&gwin)?;
    let opts = SimOptions { plan: Some(plan), ..SimOptions::default() };
    let g = capacity_hits(&gauss, &cfg.compacts, &gwin, cfg.n_reps, cfg.seed, &opts)?;
    let mut rows = Vec::new();
    let mut incomplete = g.incomplete;
    let mut monotone = Vec::new();
    let mut tv_decreasing = Vec::new();
    for &kind in &cfg.kinds {
        let mut prev: Option<(f64, f64)> = None;
        let mut mono = true;
        let mut prev_tv = f64::INFINITY;
        let mut tv_dec = true;
        for &beta in &cfg.betas {
            let model = if kind == ModelKind::Gaussian { gauss } else { ModelParams::for_rescaling(kind, window.model.d, beta) };
            let b = capacity_hits(&model, &cfg.compacts, &gwin, cfg.n_reps, cfg.seed, &opts)?;
            incomplete += b.incomplete;
            let tv = if kind == ModelKind::Gaussian {
                0.0
            } else {
                tv_bound_integral_for(kind, beta, window.radius, plan.stabilization_radius, plan.big_t, window.model.d)?
            };
            if kind != ModelKind::Gaussian {
                tv_dec &= tv < prev_tv;
                prev_tv = tv;
            }
            let mut best: Option<(f64, f64)> = None;
            for c in 0..cfg.compacts.len() {
                let row = paired_row(kind, beta, c, &g, &b, tv);
                if best.map_or(true, |(d, _)| row.delta > d) {
                    best = Some((row.delta, row.stderr));
                }
                rows.push(row);
            }
            if let (Some((d0, s0)), Some((d1, s1))) = (prev, best) {
                mono &= d1 <= d0 + 3.0 * (s0 * s0 + s1 * s1).sqrt();
            }
            if best.is_some() {
                prev = best;
            }
        }
        monotone.push((kind, mono));
        tv_decreasing.push((kind, tv_dec));
    }
    Ok(ConvergenceTable { rows, monotone, tv_decreasing, incomplete })
}

fn paired_row(kind: ModelKind, beta: f64, c: usize, g: &crate::convergence::HitTable, b: &HitTable, tv: f64) -> ConvergenceRow {
    // pair replications complete under both models
    let mut diffs = Vec::new();
    let mut xb = Vec::new();
    let mut xg = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < g.replications.len() && j < b.replications.len() {
        match g.replications[i].cmp(&b.replications[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let hb = b.hits[c][j] as u8 as f64;
                let hg = g.hits[c][i] as u8 as f64;
                diffs.push(hb - hg);
                xb.push(hb);
                xg.push(hg);
                i += 1;
                j += 1;
            }
        }
    }
    let n = diffs.len();
    let e = if n > 1 { mean_se(&diffs) } else { Estimate { value: 0.0, stderr: 0.0, n } };
    let mean = |x: &[f64]| if x.is_empty() { 0.0 } else { x.iter().sum::<f64>() / x.len() as f64 };
    ConvergenceRow {
        kind,
        beta,
        compact: c,
        t_beta: mean(&xb),
        t_gauss: mean(&xg),
        delta: e.value.abs(),
        stderr: e.stderr,
        n_paired: n,
        tv_bound: tv,
    }
}

/// One parameter point of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckRow {
    pub which: BoundKind,
    pub d: usize,
    #[serde(rename = "A")]
    pub a: f64,
    pub level: f64,
    pub beta: f64,
    pub beta0: f64,
    pub bound: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub n_seeds: usize,
    /// empirical <= bound + 3 stderr
    pub ok: bool,
}

/// Random admissible parameter points for one bound: d in {2, 3}, A in
/// [0.5, 1.5], exponents inside the bound's range, and the level chosen so
/// that the bound value is spread over (0.05, 0.9).
pub fn admissible_points(which: BoundKind, count: usize, seed: u64) -> Vec<BoundQuery> {
    use rand::Rng;
    let mut rng = crate::rng::stream(seed, child_tag(which));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d = 2 + out.len() % 2;
        let half = 0.5 * (d as f64 + 1.0);
        let a = rng.gen_range(0.5..1.5);
        let (beta, beta0) = match which.model() {
            ModelKind::Gaussian => (0.0, 0.0),
            ModelKind::Beta => {
                let b = rng.gen_range(1.5..8.0);
                (b, rng.gen_range(1.0..b))
            }
            ModelKind::BetaPrime => {
                let b = rng.gen_range(half + 0.5..10.0);
                (b, rng.gen_range(half + 0.25..b))
            }
        };
        let beta0 = if matches!(which, BoundKind::B1a | BoundKind::B2b) { beta0 } else { 0.0 };
        let delta = rng.gen_range(0.05..0.9);
        let level = match crate::bounds::invert_bound(which, d, a, beta, beta0, delta, 1.0) {
            Ok(l) => l,
            Err(_) => continue,
        };
        // rescaled beta-prime heights stay below 2 beta; above, the event is empty
        if which == BoundKind::B1b && level > 2.0 * beta - 0.5 {
            continue;
        }
        out.push(BoundQuery { d, a, level, beta, beta0 });
    }
    out
}

fn child_tag(which: BoundKind) -> u64 {
    crate::rng::child(0x626e6473, which as u64)
}

/// Empirical frequency of the bounded event over `n_seeds` independent
/// samples of the rescaled (or Gaussian) process, against the bound.
pub fn bound_check(which: BoundKind, q: &BoundQuery, n_seeds: usize, seed: u64) -> Result<BoundCheckRow> {
    let bound = growth_bound(which, q)?;
    let model = match which.model() {
        ModelKind::Gaussian => ModelParams::gaussian(q.d),
        k => ModelParams::for_rescaling(k, q.d, q.beta),
    };
    let events: Vec<f64> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| crate::tessellation::growth_event(&model, q.a, q.level, which.is_upper(), seed, k).map(|e| e as u8 as f64))
        .collect::<Result<_>>()?;
    let e = binomial_estimate(&events);
    Ok(BoundCheckRow {
        which,
        d: q.d,
        a: q.a,
        level: q.level,
        beta: q.beta,
        beta0: q.beta0,
        bound,
        empirical: e.value,
        stderr: e.stderr,
        n_seeds,
        ok: e.value <= bound + 3.0 * e.stderr,
    })
}
