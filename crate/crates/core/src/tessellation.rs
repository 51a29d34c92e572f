//! Windowed simulation: height windows and stabilization radii from the
//! growth bounds, sampling on K-regions, exact certification of cells,
//! skeleta and face intensities.

use crate::bounds::{growth_bound_scaled, invert_bound, BoundKind};
use crate::error::{Error, Result};
use crate::hull::{adjacency, delaunay, paraboloid_through, power, simplex_distance, SimplexCell};
use crate::point_processes::{ModelKind, ModelParams, Process, Region, WeightedPoint};
use crate::rng::{child, RNG_NAME};
use crate::special::{kappa, ln_gamma};
use crate::stats::{mean_se, Estimate};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

/// Target window: the ball B_R, a failure budget and the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    #[serde(rename = "R")]
    pub radius: f64,
    pub epsilon: f64,
    pub model: ModelParams,
}

impl WindowSpec {
    pub fn new(model: ModelParams, radius: f64, epsilon: f64) -> Self {
        WindowSpec { radius, epsilon, model }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return Err(Error::Parameter(format!("R = {} must be at least 1", self.radius)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon = {} must lie in (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

/// Frame in which a model is simulated: Gaussian natively, beta and
/// beta-prime through the rescaling map.
pub fn frame(model: &ModelParams) -> Result<Process> {
    model.validate()?;
    match model.kind {
        ModelKind::Gaussian => Ok(Process::native(*model)),
        _ if model.beta > 0.0 => Ok(Process::rescaled(*model)),
        _ => Err(Error::Parameter(format!("rescaled simulation needs beta > 0 (beta = {})", model.beta))),
    }
}

/// Ratio of the model intensity to the reference intensity of the bounds.
pub fn intensity_multiplier(model: &ModelParams) -> f64 {
    match model.kind {
        ModelKind::Gaussian => model.gamma,
        _ => model.gamma / (2.0 * model.beta).sqrt(),
    }
}

fn beta0_for(kind: BoundKind, model: &ModelParams) -> f64 {
    match kind.model() {
        ModelKind::Gaussian => 0.0,
        _ => model.beta,
    }
}

/// Levels (t, T) such that the lower and upper bounds over B_A are each at
/// most epsilon/2, by direct inversion of the bound functions.
pub fn height_window(model: &ModelParams, a: f64, epsilon: f64) -> Result<(f64, f64)> {
    model.validate()?;
    if !(a > 0.0) {
        return Err(Error::Parameter(format!("A = {a} must be positive")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let m = intensity_multiplier(model);
    let up = BoundKind::for_model(model.kind, true);
    let lo = BoundKind::for_model(model.kind, false);
    let big_t = invert_bound(up, model.d, a, model.beta, beta0_for(up, model), epsilon / 2.0, m)?;
    let t = invert_bound(lo, model.d, a, model.beta, beta0_for(lo, model), epsilon / 2.0, m)?;
    Ok((t, big_t))
}

/// Upper level T with P(sup over B_A > T) <= epsilon/2, obtained by covering
/// B_A with cubes of side s, applying the bound to the ball around each cube
/// and a union bound; the best s is kept. Much smaller than the direct
/// inversion for large A.
pub fn covered_height_window(model: &ModelParams, a: f64, epsilon: f64) -> Result<f64> {
    let (_, direct) = height_window(model, a, epsilon)?;
    let n = model.spatial_dim() as f64;
    let m = intensity_multiplier(model);
    let up = BoundKind::for_model(model.kind, true);
    let mut best = direct;
    for k in 1..=120 {
        let s = a * 2f64.powf(-(k as f64) / 6.0);
        let rho = n.sqrt() * s / 2.0;
        let cubes = (kappa(model.spatial_dim()) * ((a + n.sqrt() * s) / s).powf(n)).ceil();
        let delta = epsilon / 2.0 / cubes;
        if !(delta > 0.0) {
            break;
        }
        if let Ok(t) = invert_bound(up, model.d, rho, model.beta, beta0_for(up, model), delta, m) {
            best = best.min(t);
        }
    }
    Ok(best)
}

fn check_stabilization(model: &ModelParams, radius: f64, epsilon: f64) -> Result<()> {
    model.validate()?;
    if !(radius >= 1.0) {
        return Err(Error::Parameter(format!("R = {radius} must be at least 1")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let d = model.d as f64;
    match model.kind {
        ModelKind::Beta if model.beta < 1.0 => Err(Error::Parameter(format!("stabilization needs beta >= 1 (beta = {})", model.beta))),
        ModelKind::BetaPrime if model.beta < 1.5 * (d + 1.0) => {
            Err(Error::Parameter(format!("stabilization needs beta' >= 3(d+1)/2 (beta' = {})", model.beta)))
        }
        _ => Ok(()),
    }
}

/// Explicit constants of the stabilization argument for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConstants {
    /// Side of the spatial boxes of the covering.
    pub box_side: f64,
    /// Radius sqrt(d-1) a of the ball around each box.
    pub box_ball: f64,
    /// Coefficient fixed by the choice of a.
    pub coefficient: f64,
}

pub fn stabilization_constants(model: &ModelParams) -> StabilizationConstants {
    let d = model.d as f64;
    let n = d - 1.0;
    let g = ln_gamma((d + 1.0) / 2.0).exp();
    let c = match model.kind {
        ModelKind::Gaussian => 2f64.powf(d / 2.0 - 1.0) * PI.sqrt() * g,
        ModelKind::Beta => 2f64.powf(d / 2.0) * PI.sqrt() * g,
        ModelKind::BetaPrime => (2.0 * (d + 1.0)).powf(d / 2.0) * PI.sqrt() * g,
    };
    let ball = c.powf(1.0 / n);
    StabilizationConstants { box_side: ball / n.sqrt(), box_ball: ball, coefficient: c }
}

/// Bound on the probability that B_R is influenced by particles outside
/// B_{R+r}, given the lower level t; also returns t.
pub fn stabilization_failure(model: &ModelParams, radius: f64, r: f64, epsilon: f64) -> Result<(f64, f64)> {
    let n = model.spatial_dim();
    let m = intensity_multiplier(model);
    let lo = BoundKind::for_model(model.kind, false);
    let up = BoundKind::for_model(model.kind, true);
    let t = invert_bound(lo, model.d, radius + r, model.beta, beta0_for(lo, model), epsilon / 2.0, m)?;
    let k = stabilization_constants(model);
    let pre = kappa(n) * k.box_side.powi(-(n as i32));
    let mut sum = 0.0;
    let mut y = 0u64;
    loop {
        let level = t + r * r / 4.0 + y as f64;
        let q = crate::bounds::BoundQuery { d: model.d, a: k.box_ball, level, beta: model.beta, beta0: beta0_for(up, model) };
        let p = growth_bound_scaled(up, &q, m)?;
        let term = (radius + (r * r / 4.0 + y as f64 + 1.0).sqrt() + k.box_ball).powi(n as i32) * p;
        sum += term;
        if (y > 16 && term <= 1e-18 * epsilon) || p == 0.0 || y > 2_000_000 {
            break;
        }
        y += 1;
    }
    Ok((pre * sum, t))
}

/// Smallest r (on a 0.01 grid) beyond which the stabilization failure
/// bound stays at most epsilon/2 and the side conditions hold.
pub fn stabilization_radius(model: &ModelParams, radius: f64, epsilon: f64) -> Result<f64> {
    check_stabilization(model, radius, epsilon)?;
    let d = model.d as f64;
    let k = stabilization_constants(model);
    let step = 0.01;
    let start = (2.0 * d).sqrt();
    let mut last_fail = start;
    let mut ok_run = 0;
    let mut i = 0u64;
    loop {
        let r = start + step * i as f64;
        if r > 1e4 {
            return Err(Error::Unattainable("no stabilization radius below 1e4".into()));
        }
        let (p1, t) = stabilization_failure(model, radius, r, epsilon)?;
        let side = r > start && r * r > -4.0 - 4.0 * t + 16.0 * (d - 1.0) * k.box_side * k.box_side;
        if side && p1 <= epsilon / 2.0 {
            ok_run += 1;
            if ok_run >= 200 && p1 <= 1e-3 * epsilon / 2.0 {
                break;
            }
        } else {
            ok_run = 0;
            last_fail = r;
        }
        i += 1;
    }
    Ok(last_fail + step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    /// Radius and levels from the model's own bounds.
    Model,
    /// The model's bounds do not apply; the Gaussian plan is used and
    /// completeness is certified after sampling.
    GaussianFallback,
}

/// Spatial margin and height levels of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub stabilization_radius: f64,
    /// Radius R + r of the sampled K-region.
    pub a: f64,
    /// Lower level from the infimum bound.
    pub t: f64,
    /// Upper level of the sampled K-region.
    #[serde(rename = "T")]
    pub big_t: f64,
    pub source: PlanSource,
}

fn cap_level(model: &ModelParams, t: f64) -> f64 {
    match model.kind {
        // rescaled beta-prime heights stay below 2 beta with infinite mass there
        ModelKind::BetaPrime => t.min(2.0 * model.beta - 2f64.min(model.beta)),
        _ => t,
    }
}

/// Window plan for a spec: stabilization radius, then levels over B_{R+r}.
pub fn plan_window(spec: &WindowSpec) -> Result<WindowPlan> {
    spec.validate()?;
    let model = spec.model;
    let own = check_stabilization(&model, spec.radius, spec.epsilon).and_then(|_| {
        let r = stabilization_radius(&model, spec.radius, spec.epsilon)?;
        let a = spec.radius + r;
        let (t, _) = height_window(&model, a, spec.epsilon)?;
        let big_t = covered_height_window(&model, a, spec.epsilon)?;
        Ok(WindowPlan { stabilization_radius: r, a, t, big_t: cap_level(&model, big_t), source: PlanSource::Model })
    });
    match own {
        Ok(p) if p.big_t > p.t => Ok(p),
        _ => {
            let g = ModelParams::gaussian(model.d).with_gamma(intensity_multiplier(&model));
            let r = stabilization_radius(&g, spec.radius, spec.epsilon)?;
            let a = spec.radius + r;
            let (t, _) = height_window(&g, a, spec.epsilon)?;
            let big_t = covered_height_window(&g, a, spec.epsilon)?;
            Ok(WindowPlan { stabilization_radius: r, a, t, big_t: cap_level(&model, big_t), source: PlanSource::GaussianFallback })
        }
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Enlarge the sampled region (coupled) until the window is certified.
    pub auto_enlarge: bool,
    pub max_enlargements: u32,
    /// Substream of the seed used for this realization.
    pub substream: u64,
    /// Overrides the computed plan.
    pub plan: Option<WindowPlan>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { auto_enlarge: true, max_enlargements: 8, substream: 0, plan: None }
    }
}

/// A simulated tessellation restricted to what the sample certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    pub window: WindowSpec,
    pub frame: String,
    pub plan: WindowPlan,
    pub sample_region: Region,
    /// Subregion whose points were triangulated; cells are certified
    /// against it.
    pub working_region: Region,
    pub cells: Vec<SimplexCell>,
    pub neighbors: Vec<Vec<Option<usize>>>,
    /// Cell is a cell of the full tessellation: its empty region lies in the sampled region.
    pub certified: Vec<bool>,
    /// Certified with apex in B_R.
    pub valid: Vec<bool>,
    /// Certified cells cover B_R.
    pub covered: bool,
    /// The boundary height over B_R stays below the upper level (`None` when
    /// not decidable in this dimension).
    pub sup_within: Option<bool>,
    pub complete: bool,
    pub enlargements: u32,
    pub n_points: usize,
    pub discarded_mass: f64,
    pub perturbed: bool,
    pub empty: bool,
    pub seed: u64,
    pub substream: u64,
    pub rng: String,
    #[serde(skip)]
    pub points: Vec<WeightedPoint>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn in_region(p: &WeightedPoint, a: f64, big_t: f64, floor: f64) -> bool {
    let e = (norm(&p.v) - a).max(0.0);
    p.h <= big_t - e * e && p.h >= floor
}

fn enlarge_levels(model: &ModelParams, a: f64, big_t: f64) -> (f64, f64) {
    let a2 = (1.5 * a).max(a + 1.0);
    let t2 = match model.kind {
        ModelKind::BetaPrime => (big_t + 2.0).min(0.5 * (big_t + 2.0 * model.beta)),
        _ => big_t + 2.0,
    };
    (a2, t2)
}

struct State {
    points: Vec<WeightedPoint>,
    a: f64,
    big_t: f64,
    floor: f64,
    discarded: f64,
}

/// Simulates the tessellation in B_R with the default options.
pub fn simulate(window: &WindowSpec, seed: u64) -> Result<Tessellation> {
    simulate_with(window, seed, &SimOptions::default())
}

pub fn simulate_with(window: &WindowSpec, seed: u64, opts: &SimOptions) -> Result<Tessellation> {
    window.validate()?;
    let process = frame(&window.model)?;
    let plan = match opts.plan {
        Some(p) => p,
        None => plan_window(window)?,
    };
    let sample = process.sample(&Region::KRegion { a: plan.a, t: plan.big_t, floor: None }, seed, opts.substream)?;
    let mut st = State {
        points: sample.points,
        a: plan.a,
        big_t: plan.big_t,
        floor: sample.floor.unwrap_or(f64::NEG_INFINITY),
        discarded: sample.discarded_mass,
    };
    let mut k = 0u32;
    loop {
        let tess = evaluate(window, &process, &plan, &st, seed, opts.substream, k)?;
        if tess.complete || !opts.auto_enlarge || k >= opts.max_enlargements {
            return Ok(tess);
        }
        let (a2, t2) = enlarge_levels(&window.model, st.a, st.big_t);
        grow(&process, &mut st, a2, t2, seed, child(opts.substream, k as u64 + 1))?;
        k += 1;
    }
}

fn grow(process: &Process, st: &mut State, a2: f64, t2: f64, seed: u64, stream_id: u64) -> Result<()> {
    let s = process.sample(&Region::KRegion { a: a2, t: t2, floor: None }, seed, stream_id)?;
    let (a, big_t, floor) = (st.a, st.big_t, st.floor);
    st.points.extend(s.points.into_iter().filter(|p| !in_region(p, a, big_t, floor)));
    st.floor = st.floor.max(s.floor.unwrap_or(f64::NEG_INFINITY));
    st.discarded = st.discarded.max(s.discarded_mass);
    st.a = a2;
    st.big_t = t2;
    Ok(())
}

impl Tessellation {
    /// One coupled enlargement of the sampled region to K(a2, t2): the old
    /// points are kept and the difference is filled from a fresh substream.
    pub fn enlarged(&self, a2: f64, t2: f64) -> Result<Tessellation> {
        let process = frame(&self.window.model)?;
        let (a, big_t, floor) = match self.sample_region {
            Region::KRegion { a, t, floor } => (a, t, floor.unwrap_or(f64::NEG_INFINITY)),
            _ => return Err(Error::Parameter("sample region is not a K-region".into())),
        };
        if a2 < a || t2 < big_t {
            return Err(Error::Parameter("enlargement must contain the current region".into()));
        }
        let mut st = State { points: self.points.clone(), a, big_t, floor, discarded: self.discarded_mass };
        grow(&process, &mut st, a2, t2, self.seed, child(self.substream, 1 << 20))?;
        evaluate(&self.window, &process, &self.plan, &st, self.seed, self.substream, self.enlargements + 1)
    }

    /// Vertex-index sets of the valid cells.
    pub fn valid_set(&self) -> HashSet<Vec<usize>> {
        self.cells.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(c, _)| c.vertex_indices.clone()).collect()
    }

    pub fn valid_cells(&self) -> impl Iterator<Item = &SimplexCell> {
        self.cells.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(c, _)| c)
    }
}

fn evaluate(
    window: &WindowSpec,
    process: &Process,
    plan: &WindowPlan,
    st: &State,
    seed: u64,
    substream: u64,
    enlargements: u32,
) -> Result<Tessellation> {
    let d = window.model.d;
    let radius = window.radius;
    let mut tess = Tessellation {
        window: *window,
        frame: if process.rescaled { "rescaled".into() } else { "native".into() },
        plan: *plan,
        sample_region: Region::KRegion { a: st.a, t: st.big_t, floor: Some(st.floor) },
        working_region: Region::KRegion { a: st.a, t: st.big_t, floor: Some(st.floor) },
        cells: Vec::new(),
        neighbors: Vec::new(),
        certified: Vec::new(),
        valid: Vec::new(),
        covered: false,
        sup_within: Some(false),
        complete: false,
        enlargements,
        n_points: st.points.len(),
        discarded_mass: st.discarded,
        perturbed: false,
        empty: true,
        seed,
        substream,
        rng: RNG_NAME.into(),
        points: st.points.clone(),
    };
    if st.points.len() < d {
        return Ok(tess);
    }
    // Triangulate growing subregions K(a_k, T_k) of the sample. Cells
    // certified inside a subregion are cells of the full sample, and once a
    // stage is complete its valid set equals that of the full sample, so the
    // result does not depend on the staging.
    let stages = if d <= 3 { working_stages(&st.points, radius, st.a, st.big_t) } else { vec![(st.a, st.big_t)] };
    for (a_k, t_k) in stages {
        let idx: Vec<usize> = (0..st.points.len()).filter(|&i| in_region(&st.points[i], a_k, t_k, f64::NEG_INFINITY)).collect();
        let sub: Vec<WeightedPoint> = idx.iter().map(|&i| st.points[i].clone()).collect();
        tess.working_region = Region::KRegion { a: a_k, t: t_k, floor: Some(st.floor) };
        if sub.len() < d {
            continue;
        }
        let mut del = match delaunay(&sub) {
            Ok(del) => del,
            Err(Error::Degenerate(_)) | Err(Error::TooFewPoints { .. }) => continue,
            Err(e) => return Err(e),
        };
        tess.empty = del.cells.is_empty();
        tess.perturbed = del.perturbed;
        tess.certified = del.cells.iter().map(|c| norm(&c.apex.w) <= a_k && c.apex.r <= t_k).collect();
        tess.valid = del.cells.iter().zip(&tess.certified).map(|(c, &ok)| ok && norm(&c.apex.w) <= radius).collect();
        tess.covered = coverage(&del.cells, &del.neighbors, &tess.certified, radius);
        tess.sup_within = if d <= 3 { Some(growth_sup_with(&sub, &del.cells, radius) <= t_k) } else { None };
        tess.complete = tess.covered && tess.sup_within.unwrap_or(true);
        for c in &mut del.cells {
            for v in &mut c.vertex_indices {
                *v = idx[*v];
            }
        }
        tess.cells = del.cells;
        tess.neighbors = del.neighbors;
        if tess.complete {
            break;
        }
    }
    Ok(tess)
}

/// Stage schedule: starts from a probe estimate of the boundary height over
/// a slightly enlarged window and grows towards the full sampled region.
fn working_stages(points: &[WeightedPoint], radius: f64, a: f64, big_t: f64) -> Vec<(f64, f64)> {
    let n = points[0].v.len();
    let reach = radius + 1.0;
    let steps = 4i64;
    let mut probe_max = f64::NEG_INFINITY;
    let mut w = vec![0.0; n];
    let total = (2 * steps + 1).pow(n as u32);
    for k in 0..total {
        let mut rem = k;
        for x in w.iter_mut() {
            *x = ((rem % (2 * steps + 1)) - steps) as f64 * reach / steps as f64;
            rem /= 2 * steps + 1;
        }
        if norm(&w) <= reach + 1e-12 {
            probe_max = probe_max.max(envelope(&w, points));
        }
    }
    let mut out = Vec::new();
    let (mut a_k, mut t_k) = ((radius + 3.0).min(a), (probe_max + 2.0).min(big_t));
    loop {
        out.push((a_k, t_k));
        if a_k >= a && t_k >= big_t {
            return out;
        }
        a_k = (a_k + 3.0).min(a);
        t_k = (t_k + 2.0).min(big_t);
    }
}

fn meets_ball(verts: &[Vec<f64>], radius: f64) -> bool {
    let origin = vec![0.0; verts[0].len()];
    let near = verts.iter().map(|v| norm(v)).fold(f64::INFINITY, f64::min);
    if near <= radius {
        return true;
    }
    let diam = verts.iter().flat_map(|a| verts.iter().map(move |b| norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()))).fold(0.0, f64::max);
    if near - diam > radius {
        return false;
    }
    simplex_distance(&origin, verts) <= radius
}

/// True iff the certified cells cover B_R: every cell meeting B_R is
/// certified and no boundary ridge of the certified set meets B_R.
fn coverage(cells: &[SimplexCell], nbrs: &[Vec<Option<usize>>], certified: &[bool], radius: f64) -> bool {
    let mut any = false;
    for (i, c) in cells.iter().enumerate() {
        let meets = meets_ball(&c.vertices, radius);
        if meets && !certified[i] {
            return false;
        }
        if !certified[i] {
            continue;
        }
        any |= meets;
        for (k, nb) in nbrs[i].iter().enumerate() {
            if nb.map_or(false, |o| certified[o]) {
                continue;
            }
            let ridge: Vec<Vec<f64>> = c.vertices.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v.clone()).collect();
            if meets_ball(&ridge, radius) {
                return false;
            }
        }
    }
    any
}

/// Supremum over B_A of the growth-boundary height min_p pow(w, p), exact
/// for one- and two-dimensional space. Returns +inf for an empty input.
pub fn growth_sup(points: &[WeightedPoint], a: f64) -> Result<f64> {
    let n = match points.first() {
        None => return Ok(f64::INFINITY),
        Some(p) => p.v.len(),
    };
    if n > 2 {
        return Err(Error::Dimension(n + 1));
    }
    if points.len() <= 12 {
        return Ok(growth_sup_brute(points, a));
    }
    match delaunay(points) {
        Ok(del) => Ok(growth_sup_with(points, &del.cells, a)),
        Err(_) => Ok(growth_sup_brute(points, a)),
    }
}

fn envelope(w: &[f64], points: &[WeightedPoint]) -> f64 {
    points.iter().map(|p| power(w, p)).fold(f64::INFINITY, f64::min)
}

fn circle_bisector(pi: &WeightedPoint, pj: &WeightedPoint, a: f64) -> Vec<Vec<f64>> {
    let u = [2.0 * (pj.v[0] - pi.v[0]), 2.0 * (pj.v[1] - pi.v[1])];
    let zi = pi.v.iter().map(|x| x * x).sum::<f64>() + pi.h;
    let zj = pj.v.iter().map(|x| x * x).sum::<f64>() + pj.h;
    let c = zj - zi;
    let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if nu == 0.0 {
        return Vec::new();
    }
    let e = [u[0] / nu, u[1] / nu];
    let delta = c / nu;
    if delta.abs() > a {
        return Vec::new();
    }
    let s = (a * a - delta * delta).sqrt();
    vec![vec![delta * e[0] - s * e[1], delta * e[1] + s * e[0]], vec![delta * e[0] + s * e[1], delta * e[1] - s * e[0]]]
}

fn antipode(p: &WeightedPoint, a: f64) -> Vec<f64> {
    let r = norm(&p.v);
    if r == 0.0 {
        let mut w = vec![0.0; p.v.len()];
        w[0] = a;
        w
    } else {
        p.v.iter().map(|x| -a * x / r).collect()
    }
}

fn growth_sup_brute(points: &[WeightedPoint], a: f64) -> f64 {
    let n = points[0].v.len();
    let mut cand: Vec<Vec<f64>> = Vec::new();
    if n == 1 {
        cand.push(vec![a]);
        cand.push(vec![-a]);
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if let Ok(x) = paraboloid_through(&[&points[i], &points[j]]) {
                    if x.w[0].abs() <= a {
                        cand.push(x.w);
                    }
                }
            }
        }
    } else {
        for p in points {
            cand.push(antipode(p, a));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                cand.extend(circle_bisector(&points[i], &points[j], a));
                for k in j + 1..points.len() {
                    if let Ok(x) = paraboloid_through(&[&points[i], &points[j], &points[k]]) {
                        if norm(&x.w) <= a {
                            cand.push(x.w);
                        }
                    }
                }
            }
        }
    }
    cand.iter().map(|w| envelope(w, points)).fold(f64::NEG_INFINITY, f64::max)
}

/// Greedy descent of pow(w, .) along Delaunay edges; exact at a local minimum
/// because the power is affine on the lifted points.
fn descend(w: &[f64], start: usize, points: &[WeightedPoint], adj: &HashMap<usize, Vec<usize>>) -> f64 {
    let mut cur = start;
    let mut val = power(w, &points[cur]);
    loop {
        let mut next = None;
        if let Some(nbs) = adj.get(&cur) {
            for &nb in nbs {
                let v = power(w, &points[nb]);
                if v < val {
                    val = v;
                    next = Some(nb);
                }
            }
        }
        match next {
            Some(nb) => cur = nb,
            None => return val,
        }
    }
}

fn growth_sup_with(points: &[WeightedPoint], cells: &[SimplexCell], a: f64) -> f64 {
    if cells.is_empty() {
        return growth_sup_brute(points, a);
    }
    let n = points[0].v.len();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for c in cells {
        let vi = &c.vertex_indices;
        for x in 0..vi.len() {
            for y in x + 1..vi.len() {
                if edges.insert((vi[x], vi[y])) {
                    adj.entry(vi[x]).or_default().push(vi[y]);
                    adj.entry(vi[y]).or_default().push(vi[x]);
                }
            }
        }
    }
    for v in adj.values_mut() {
        v.sort_unstable();
    }
    let mut best = f64::NEG_INFINITY;
    for c in cells {
        if norm(&c.apex.w) <= a {
            best = best.max(c.apex.r);
        }
    }
    let start = cells[0].vertex_indices[0];
    if n == 1 {
        for w in [vec![a], vec![-a]] {
            best = best.max(descend(&w, start, points, &adj));
        }
    } else {
        let mut sorted: Vec<&(usize, usize)> = edges.iter().collect();
        sorted.sort_unstable();
        for &&(i, j) in &sorted {
            for w in circle_bisector(&points[i], &points[j], a) {
                best = best.max(descend(&w, i, points, &adj));
            }
        }
        let mut verts: Vec<usize> = adj.keys().copied().collect();
        verts.sort_unstable();
        for i in verts {
            let w = antipode(&points[i], a);
            best = best.max(descend(&w, i, points, &adj));
        }
    }
    best
}

/// Whether some point lies in the open region {h < t - dist(v, B_a)^2},
/// i.e. the infimum of the boundary height over B_a is below t.
pub fn growth_inf_below(points: &[WeightedPoint], a: f64, t: f64) -> bool {
    points.iter().any(|p| {
        let e = (norm(&p.v) - a).max(0.0);
        p.h < t - e * e
    })
}

/// Expected number of points in the first stage of a sup decision.
const SUP_STAGE_COUNT: f64 = 1500.0;

/// Samples K(a, level) in the model's frame and decides the sup event
/// {sup over B_a > level} (upper) or the inf event {inf over B_a < level}.
///
/// The sup event is decided in stages: a lower region K(a, tau) is sampled
/// first; a subset of the points only raises the boundary, so if it already
/// stays below the level the event fails. Otherwise the sample is enlarged
/// (coupled, on a child stream) up to K(a, level), where the decision is
/// exact on the full sample.
pub fn growth_event(model: &ModelParams, a: f64, level: f64, upper: bool, seed: u64, substream: u64) -> Result<bool> {
    let process = frame(model)?;
    if !upper {
        let s = process.sample(&Region::KRegion { a, t: level, floor: None }, seed, substream)?;
        return Ok(growth_inf_below(&s.points, a, level));
    }
    let full = process.measure(&Region::KRegion { a, t: level, floor: None })?;
    let mut tau = level;
    if full > 4.0 * SUP_STAGE_COUNT {
        let (mut lo, mut hi) = (level - 64.0, level);
        while process.measure(&Region::KRegion { a, t: lo, floor: None })? > SUP_STAGE_COUNT {
            lo -= 64.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if process.measure(&Region::KRegion { a, t: mid, floor: None })? > SUP_STAGE_COUNT {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        tau = lo;
    }
    let first = process.sample(&Region::KRegion { a, t: tau, floor: None }, seed, substream)?;
    let mut points = first.points;
    let mut floor = first.floor.unwrap_or(f64::NEG_INFINITY);
    let mut stage = 0u64;
    loop {
        let sup = growth_sup(&points, a)?;
        if sup <= level || tau >= level {
            return Ok(sup > level);
        }
        // grow the expected count eightfold, or finish
        let target = 8.0 * process.measure(&Region::KRegion { a, t: tau, floor: None })?;
        let mut next = level;
        if full > 2.0 * target {
            let (mut lo, mut hi) = (tau, level);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if process.measure(&Region::KRegion { a, t: mid, floor: None })? > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            next = lo.max(tau);
        }
        stage += 1;
        let more = process.sample(&Region::KRegion { a, t: next, floor: None }, seed, child(substream, stage))?;
        points.extend(more.points.into_iter().filter(|p| !in_region(p, a, tau, floor)));
        floor = floor.max(more.floor.unwrap_or(f64::NEG_INFINITY));
        tau = next;
    }
}

/// A (d-2)-face of the skeleton: vertex indices and its clipped geometry
/// (a point for d = 2, a segment for d = 3, the full face otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFace {
    pub vertex_indices: Vec<usize>,
    pub points: Vec<Vec<f64>>,
}

fn clip_segment(p: &[f64], q: &[f64], radius: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let d: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    let aa: f64 = d.iter().map(|x| x * x).sum();
    let bb: f64 = 2.0 * d.iter().zip(p).map(|(x, y)| x * y).sum::<f64>();
    let cc: f64 = p.iter().map(|x| x * x).sum::<f64>() - radius * radius;
    if aa == 0.0 {
        return if cc <= 0.0 { Some((p.to_vec(), q.to_vec())) } else { None };
    }
    let disc = bb * bb - 4.0 * aa * cc;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = ((-bb - s) / (2.0 * aa)).max(0.0);
    let t1 = ((-bb + s) / (2.0 * aa)).min(1.0);
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| p.iter().zip(&d).map(|(x, y)| x + t * y).collect::<Vec<f64>>();
    Some((at(t0), at(t1)))
}

/// Skeleton of a list of cells, restricted to B_radius, each face once.
pub fn skeleton_of_cells(cells: &[&SimplexCell], radius: f64) -> Vec<SkeletonFace> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    for c in cells {
        let k = c.vertex_indices.len();
        for drop in 0..k {
            let mut idx: Vec<(usize, &Vec<f64>)> =
                (0..k).filter(|&j| j != drop).map(|j| (c.vertex_indices[j], &c.vertices[j])).collect();
            idx.sort_by_key(|x| x.0);
            let key: Vec<usize> = idx.iter().map(|x| x.0).collect();
            if seen.contains(&key) {
                continue;
            }
            let pts: Vec<Vec<f64>> = idx.iter().map(|x| x.1.clone()).collect();
            let clipped = match pts.len() {
                1 => (norm(&pts[0]) <= radius).then(|| pts.clone()),
                2 => clip_segment(&pts[0], &pts[1], radius).map(|(a, b)| vec![a, b]),
                _ => meets_ball(&pts, radius).then(|| pts.clone()),
            };
            if let Some(points) = clipped {
                seen.insert(key.clone());
                out.push(SkeletonFace { vertex_indices: key, points });
            }
        }
    }
    out.sort_by(|a, b| a.vertex_indices.cmp(&b.vertex_indices));
    out
}

/// Skeleton of the certified cells inside B_R.
pub fn skeleton(tess: &Tessellation) -> Vec<SkeletonFace> {
    let cells: Vec<&SimplexCell> = tess.cells.iter().zip(&tess.certified).filter(|(_, c)| **c).map(|(c, _)| c).collect();
    skeleton_of_cells(&cells, tess.window.radius)
}

/// Per-unit-volume face counts, j = 0..d-1, with the alternating sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceIntensities {
    pub gamma: Vec<Estimate>,
    /// sum_j (-1)^j gamma_j, estimated per realization.
    pub euler: Estimate,
    pub realizations: usize,
    pub skipped_incomplete: usize,
}

/// Counts of j-faces per realization whose lowest-index vertex lies in B_R.
pub fn face_counts(tess: &Tessellation) -> Vec<usize> {
    let d = tess.window.model.d;
    let radius = tess.window.radius;
    let mut faces: Vec<HashSet<Vec<usize>>> = vec![HashSet::new(); d];
    for (c, ok) in tess.cells.iter().zip(&tess.certified) {
        if !*ok || !c.vertices.iter().any(|v| norm(v) <= radius) {
            continue;
        }
        for mask in 1u32..(1 << d) {
            let sub: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
            // vertex_indices are sorted, so sub[0] is the lowest-index vertex
            if norm(&c.vertices[sub[0]]) <= radius {
                faces[sub.len() - 1].insert(sub.iter().map(|&i| c.vertex_indices[i]).collect());
            }
        }
    }
    faces.iter().map(|f| f.len()).collect()
}

/// Averages face counts over complete realizations.
pub fn empirical_face_intensities(tess_list: &[Tessellation]) -> Result<FaceIntensities> {
    let complete: Vec<&Tessellation> = tess_list.iter().filter(|t| t.complete && !t.empty).collect();
    if complete.is_empty() {
        return Err(Error::Empty("no complete tessellation with valid cells".into()));
    }
    let d = complete[0].window.model.d;
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut euler = Vec::new();
    for t in &complete {
        let vol = kappa(d - 1) * t.window.radius.powi(d as i32 - 1);
        let counts = face_counts(t);
        let mut e = 0.0;
        for j in 0..d {
            let g = counts[j] as f64 / vol;
            per[j].push(g);
            e += if j % 2 == 0 { g } else { -g };
        }
        euler.push(e);
    }
    Ok(FaceIntensities {
        gamma: per.iter().map(|x| mean_se(x)).collect(),
        euler: mean_se(&euler),
        realizations: complete.len(),
        skipped_incomplete: tess_list.len() - complete.len(),
    })
}

/// Rebuilds cell adjacency for an arbitrary list of cells.
pub fn cell_adjacency(cells: &[SimplexCell]) -> Vec<Vec<Option<usize>>> {
    let idx: Vec<Vec<usize>> = cells.iter().map(|c| c.vertex_indices.clone()).collect();
    adjacency(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::Apex;

    #[test]
    fn window_examples() {
        let g = ModelParams::gaussian(2);
        let (t, big_t) = height_window(&g, 1.0, 0.5).unwrap();
        assert!(big_t > 4.0);
        assert!(t < big_t);
        let (_, t1) = height_window(&g, 1.0, 0.999).unwrap();
        assert!(t1.is_finite() && t1 > 4.0 - 10.0);
        assert!(height_window(&g, 0.0, 0.1).is_err());
        let cov = covered_height_window(&ModelParams::gaussian(3), 20.0, 0.05).unwrap();
        let (_, direct) = height_window(&ModelParams::gaussian(3), 20.0, 0.05).unwrap();
        assert!(cov < direct && cov < 20.0, "{cov} {direct}");
    }

    #[test]
    fn stabilization_is_monotone() {
        let g = ModelParams::gaussian(2);
        let r1 = stabilization_radius(&g, 1.0, 0.1).unwrap();
        let r4 = stabilization_radius(&g, 4.0, 0.1).unwrap();
        assert!(r1 <= r4);
        let a = stabilization_radius(&g, 2.0, 0.5).unwrap();
        let b = stabilization_radius(&g, 2.0, 0.01).unwrap();
        assert!(a <= b);
        assert!(r1.is_finite() && r1 > 2.0);
        assert!(stabilization_radius(&ModelParams::for_rescaling(ModelKind::Beta, 2, 0.5), 1.0, 0.1).is_err());
        assert!(stabilization_radius(&ModelParams::for_rescaling(ModelKind::BetaPrime, 2, 4.0), 1.0, 0.1).is_err());
        assert!(stabilization_radius(&ModelParams::for_rescaling(ModelKind::Beta, 2, 2.0), 1.0, 0.1).is_ok());
        assert!(stabilization_radius(&ModelParams::for_rescaling(ModelKind::BetaPrime, 2, 5.0), 1.0, 0.1).is_ok());
    }

    #[test]
    fn growth_sup_fast_path_matches_brute_force() {
        let mut rng = crate::rng::stream(17, 0);
        use rand::Rng;
        for n in 1..=2 {
            for _ in 0..30 {
                let pts: Vec<WeightedPoint> = (0..40)
                    .map(|_| WeightedPoint::new((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(), rng.gen_range(-2.0..2.0)))
                    .collect();
                let a = rng.gen_range(0.3..2.5);
                let fast = growth_sup(&pts, a).unwrap();
                let slow = growth_sup_brute(&pts, a);
                assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
            }
        }
    }

    #[test]
    fn growth_sup_dense_grid_check() {
        let pts = vec![WeightedPoint::new(vec![0.0, 0.0], 0.0), WeightedPoint::new(vec![1.0, 0.5], -0.3)];
        let a = 1.5;
        let s = growth_sup(&pts, a).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let w = [-a + 2.0 * a * i as f64 / 400.0, -a + 2.0 * a * j as f64 / 400.0];
                if norm(&w) <= a {
                    best = best.max(envelope(&w, &pts));
                }
            }
        }
        assert!(s >= best - 1e-12 && s - best < 1e-2, "{s} {best}");
    }

    fn cell(idx: Vec<usize>, verts: Vec<Vec<f64>>) -> SimplexCell {
        SimplexCell { vertex_indices: idx, heights: vec![0.0; verts.len()], volume: 1.0, vertices: verts, apex: Apex { w: vec![0.0, 0.0], r: 0.0 } }
    }

    #[test]
    fn skeleton_examples() {
        let a = cell(vec![0, 1, 2], vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = cell(vec![1, 2, 3], vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(skeleton_of_cells(&[&a], 10.0).len(), 3);
        assert_eq!(skeleton_of_cells(&[&a, &b], 10.0).len(), 5);
        assert!(skeleton_of_cells(&[], 10.0).is_empty());
        // clipping keeps only the part inside the ball
        let s = skeleton_of_cells(&[&a], 0.5);
        assert_eq!(s.len(), 2);
        for f in &s {
            assert!(f.points.iter().all(|p| norm(p) <= 0.5 + 1e-12));
        }
    }

    #[test]
    fn simulate_is_deterministic_and_certified() {
        let spec = WindowSpec::new(ModelParams::gaussian(2), 1.0, 0.1);
        let a = simulate(&spec, 7).unwrap();
        let b = simulate(&spec, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.complete);
        for (c, v) in a.cells.iter().zip(&a.valid) {
            if *v {
                assert!(norm(&c.apex.w) <= 1.0);
                for p in &a.points {
                    assert!(power(&c.apex.w, p) >= c.apex.r - 1e-9);
                }
            }
        }
    }
}
