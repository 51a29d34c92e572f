//! The nu-weighted typical cell of the Gaussian-Delaunay tessellation:
//! closed forms, samplers, angle sums and cell-based estimators.

use crate::error::{Error, Result};
use crate::hull::SimplexCell;
use crate::rng::{child, normals, open01, stream};
use crate::special::{integrate, ln_factorial, ln_gamma};
use crate::stats::{mean_se, ratio_se, Estimate};
use crate::tessellation::Tessellation;
use rand::RngCore;
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use crate::hull::simplex_volume;

/// Block size for per-block random streams; results do not depend on the
/// thread count.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellLawParams {
    /// Number of vertices; cells live in R^{d-1}.
    pub d: usize,
    pub nu: f64,
    /// Moment order.
    pub s: f64,
}

impl CellLawParams {
    pub fn new(d: usize, nu: f64, s: f64) -> Self {
        CellLawParams { d, nu, s }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Parameter(format!("d = {} must be at least 2", self.d)));
        }
        if !(self.nu >= -1.0) {
            return Err(Error::Parameter(format!("nu = {} must be at least -1", self.nu)));
        }
        Ok(())
    }

    fn validate_moment(&self) -> Result<()> {
        self.validate()?;
        if !(self.s >= -self.nu - 1.0) {
            return Err(Error::Parameter(format!("moment order s = {} must be at least -nu-1 = {}", self.s, -self.nu - 1.0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSimplexSample {
    pub vertices: Vec<Vec<f64>>,
    pub volume: f64,
    /// Vol^{nu+1} for importance draws; 1 for draws from the target law.
    pub importance_weight: f64,
}

/// Normalizing constant of the weighted Gaussian simplex density.
pub fn alpha_hat(d: usize, nu: f64) -> Result<f64> {
    CellLawParams::new(d, nu, 0.0).validate()?;
    let df = d as f64;
    let k = nu + 1.0;
    let mut ln = -((df - 1.0) * (df + k) / 2.0 * 2f64.ln() + df * (df - 1.0) / 2.0 * PI.ln());
    ln += k * ln_factorial(d - 1) - k / 2.0 * df.ln();
    for j in 1..d {
        ln += ln_gamma(j as f64 / 2.0) - ln_gamma((j as f64 + k) / 2.0);
    }
    Ok(ln.exp())
}

/// E Vol(Z_nu)^s.
pub fn volume_moment(params: &CellLawParams) -> Result<f64> {
    params.validate_moment()?;
    let CellLawParams { d, nu, s } = *params;
    let df = d as f64;
    let mut ln = s * (df - 1.0) / 2.0 * 2f64.ln() + s / 2.0 * df.ln() - s * ln_factorial(d - 1);
    for j in 1..d {
        let j = j as f64;
        ln += ln_gamma((j + s + nu + 1.0) / 2.0) - ln_gamma((j + nu + 1.0) / 2.0);
    }
    Ok(ln.exp())
}

/// Expected volume of the typical (nu = 0) cell.
pub fn mean_typical_volume(d: usize) -> f64 {
    volume_moment(&CellLawParams::new(d, 0.0, 1.0)).expect("valid parameters")
}

/// Integral of the weighted simplex density over R^2 (d = 2), by nested
/// adaptive quadrature; equals 1 when the normalization is right.
pub fn normalization_integral(nu: f64) -> Result<f64> {
    let a = alpha_hat(2, nu)?;
    let k = nu + 1.0;
    let lim = 14.0;
    let inner = |y1: f64| {
        let f = |y2: f64| (y1 - y2).abs().powf(k) * (-(y2 * y2) / 2.0).exp();
        let (l, _) = integrate(f, -lim, y1, 1e-11);
        let (r, _) = integrate(f, y1, lim, 1e-11);
        (l + r) * (-(y1 * y1) / 2.0).exp()
    };
    let (v, _) = integrate(inner, -lim, lim, 1e-10);
    Ok(a * v)
}

fn draw_gaussian_simplex<R: RngCore>(rng: &mut R, d: usize, buf: &mut [f64]) -> Vec<Vec<f64>> {
    normals(rng, buf);
    buf.chunks(d - 1).map(|c| c.to_vec()).collect()
}

fn block_stream(seed: u64, tag: u64, block: usize) -> rand_chacha::ChaCha8Rng {
    stream(seed, child(tag, block as u64))
}

/// Draws i.i.d. standard Gaussian simplices with importance weights
/// Vol^{nu+1}; weighted averages estimate moments of Z_nu.
pub fn sample_importance(params: &CellLawParams, n: usize, seed: u64) -> Result<Vec<GaussianSimplexSample>> {
    params.validate()?;
    let d = params.d;
    let k = params.nu + 1.0;
    let blocks = n.div_ceil(BLOCK);
    let out: Vec<Vec<GaussianSimplexSample>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_stream(seed, 0x696d70, b);
            let mut buf = vec![0.0; d * (d - 1)];
            let len = BLOCK.min(n - b * BLOCK);
            (0..len)
                .map(|_| {
                    let vertices = draw_gaussian_simplex(&mut rng, d, &mut buf);
                    let volume = simplex_volume(&vertices);
                    GaussianSimplexSample { vertices, volume, importance_weight: if k == 0.0 { 1.0 } else { volume.powf(k) } }
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Self-normalized importance estimate of E Vol(Z_nu)^s from `n` base draws.
pub fn importance_moment(params: &CellLawParams, n: usize, seed: u64) -> Result<Estimate> {
    params.validate_moment()?;
    let vols: Vec<f64> = sample_importance(&CellLawParams { nu: -1.0, ..*params }, n, seed)?.into_iter().map(|s| s.volume).collect();
    Ok(weighted_moments(&vols, params.nu, &[params.s])[0])
}

/// Self-normalized estimates of E Vol(Z_nu)^s for several s from one set of
/// base volumes.
pub fn weighted_moments(vols: &[f64], nu: f64, orders: &[f64]) -> Vec<Estimate> {
    let k = nu + 1.0;
    let den: Vec<f64> = vols.iter().map(|v| v.powf(k)).collect();
    orders
        .iter()
        .map(|&s| {
            let num: Vec<f64> = vols.iter().zip(&den).map(|(v, w)| w * v.powf(s)).collect();
            ratio_se(&num, &den)
        })
        .collect()
}

/// Metropolis controls and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetropolisConfig {
    pub burn_in: usize,
    pub thin: usize,
    /// Acceptance band targeted while tuning the step during burn-in.
    pub target_acceptance: (f64, f64),
    pub initial_step: f64,
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        MetropolisConfig { burn_in: 10_000, thin: 10, target_acceptance: (0.25, 0.45), initial_step: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub step: f64,
    pub acceptance: f64,
    pub burn_in: usize,
    pub thin: usize,
}

/// Samples from the law of Z_nu: exact for nu = -1, random-walk Metropolis
/// otherwise.
pub fn sample_typical_cell(params: &CellLawParams, n: usize, seed: u64) -> Result<Vec<GaussianSimplexSample>> {
    Ok(sample_typical_cell_with(params, n, seed, &MetropolisConfig::default())?.0)
}

pub fn sample_typical_cell_with(
    params: &CellLawParams,
    n: usize,
    seed: u64,
    cfg: &MetropolisConfig,
) -> Result<(Vec<GaussianSimplexSample>, Option<ChainReport>)> {
    params.validate()?;
    if params.nu == -1.0 {
        let mut out = sample_importance(params, n, seed)?;
        for s in &mut out {
            s.importance_weight = 1.0;
        }
        return Ok((out, None));
    }
    if n == 0 {
        return Ok((Vec::new(), None));
    }
    let d = params.d;
    let k = params.nu + 1.0;
    let dim = d * (d - 1);
    let mut rng = stream(seed, 0x6d636d63);
    let log_target = |y: &[f64]| {
        let verts: Vec<Vec<f64>> = y.chunks(d - 1).map(|c| c.to_vec()).collect();
        let v = simplex_volume(&verts);
        if v <= 0.0 {
            f64::NEG_INFINITY
        } else {
            k * v.ln() - 0.5 * y.iter().map(|x| x * x).sum::<f64>()
        }
    };
    let mut y = vec![0.0; dim];
    let mut lp = f64::NEG_INFINITY;
    while !lp.is_finite() {
        normals(&mut rng, &mut y);
        lp = log_target(&y);
    }
    let mut step = cfg.initial_step / (dim as f64).sqrt();
    let mut prop = vec![0.0; dim];
    let mut noise = vec![0.0; dim];
    let mut advance = |y: &mut Vec<f64>, lp: &mut f64, step: f64, rng: &mut rand_chacha::ChaCha8Rng| -> bool {
        normals(rng, &mut noise);
        for i in 0..dim {
            prop[i] = y[i] + step * noise[i];
        }
        let lq = log_target(&prop);
        if lq.is_finite() && open01(rng).ln() < lq - *lp {
            y.copy_from_slice(&prop);
            *lp = lq;
            true
        } else {
            false
        }
    };
    let window = 500;
    let mut acc = 0;
    for i in 1..=cfg.burn_in {
        acc += advance(&mut y, &mut lp, step, &mut rng) as usize;
        if i % window == 0 {
            let rate = acc as f64 / window as f64;
            if rate < cfg.target_acceptance.0 {
                step *= 0.8;
            } else if rate > cfg.target_acceptance.1 {
                step *= 1.25;
            }
            acc = 0;
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut accepted = 0usize;
    for _ in 0..n {
        for _ in 0..cfg.thin.max(1) {
            accepted += advance(&mut y, &mut lp, step, &mut rng) as usize;
        }
        let vertices: Vec<Vec<f64>> = y.chunks(d - 1).map(|c| c.to_vec()).collect();
        let volume = simplex_volume(&vertices);
        out.push(GaussianSimplexSample { vertices, volume, importance_weight: 1.0 });
    }
    let report = ChainReport { step, acceptance: accepted as f64 / (n * cfg.thin.max(1)) as f64, burn_in: cfg.burn_in, thin: cfg.thin };
    Ok((out, Some(report)))
}

/// Samples d * prod_{j=1}^{d-1} X_{j+nu+1} with independent chi-square X.
pub fn chisq_product_sample(params: &CellLawParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let dists: Vec<ChiSquared<f64>> = (1..params.d)
        .map(|j| ChiSquared::new(j as f64 + params.nu + 1.0).map_err(|e| Error::Parameter(e.to_string())))
        .collect::<Result<_>>()?;
    let mut rng = stream(seed, 0x63686932);
    Ok((0..n).map(|_| params.d as f64 * dists.iter().map(|x| x.sample(&mut rng)).product::<f64>()).collect())
}

/// Barycentric direction coordinates: u = sum_i mu_i v_i with sum mu_i = 0.
struct DirectionFrame {
    /// Inverse of [v_1 - v_0, ..., v_n - v_0], row-major.
    inv: Vec<f64>,
    n: usize,
}

impl DirectionFrame {
    fn new(simplex: &[Vec<f64>]) -> Result<Self> {
        let n = simplex.len().checked_sub(1).ok_or_else(|| Error::Empty("simplex without vertices".into()))?;
        if n == 0 || simplex.iter().any(|v| v.len() != n) {
            return Err(Error::Parameter("simplex must have n+1 vertices in R^n".into()));
        }
        if simplex_volume(simplex) <= 0.0 {
            return Err(Error::Degenerate("simplex has zero volume".into()));
        }
        let mut inv = vec![0.0; n * n];
        // Gauss-Jordan on [E | I] with E[:, j] = v_{j+1} - v_0
        let mut a = vec![0.0; n * 2 * n];
        for r in 0..n {
            for j in 0..n {
                a[r * 2 * n + j] = simplex[j + 1][r] - simplex[0][r];
            }
            a[r * 2 * n + n + r] = 1.0;
        }
        for c in 0..n {
            let p = (c..n).max_by(|&x, &y| a[x * 2 * n + c].abs().total_cmp(&a[y * 2 * n + c].abs())).unwrap();
            for j in 0..2 * n {
                a.swap(c * 2 * n + j, p * 2 * n + j);
            }
            let piv = a[c * 2 * n + c];
            for j in 0..2 * n {
                a[c * 2 * n + j] /= piv;
            }
            for r in 0..n {
                if r != c {
                    let f = a[r * 2 * n + c];
                    if f != 0.0 {
                        for j in 0..2 * n {
                            a[r * 2 * n + j] -= f * a[c * 2 * n + j];
                        }
                    }
                }
            }
        }
        for r in 0..n {
            inv[r * n..(r + 1) * n].copy_from_slice(&a[r * 2 * n + n..(r + 1) * 2 * n]);
        }
        Ok(DirectionFrame { inv, n })
    }

    /// Bit mask of vertices with negative coefficient.
    fn negative_set(&self, u: &[f64]) -> u32 {
        let n = self.n;
        let mut mask = 0u32;
        let mut sum = 0.0;
        for r in 0..n {
            let mu: f64 = (0..n).map(|j| self.inv[r * n + j] * u[j]).sum();
            sum += mu;
            if mu < 0.0 {
                mask |= 1 << (r + 1);
            }
        }
        if -sum < 0.0 {
            mask |= 1;
        }
        mask
    }
}

fn direction_masks(frame: &DirectionFrame, n_dirs: usize, seed: u64, tag: u64) -> Vec<u32> {
    let n = frame.n;
    let mut rng = stream(seed, tag);
    let mut u = vec![0.0; n];
    (0..n_dirs)
        .map(|_| {
            normals(&mut rng, &mut u);
            frame.negative_set(&u)
        })
        .collect()
}

/// Normalized solid angle of the tangent cone of `simplex` at the face
/// spanned by the vertex subset `face`, by Monte Carlo over directions.
/// Faces of dimension at least n-1 are exact (whole space or halfspace).
pub fn internal_angle(face: &[usize], simplex: &[Vec<f64>], n_dirs: usize, seed: u64) -> Result<Estimate> {
    let frame = DirectionFrame::new(simplex)?;
    let k = simplex.len();
    if face.is_empty() || face.iter().any(|&i| i >= k) {
        return Err(Error::Parameter("face must be a nonempty subset of the vertices".into()));
    }
    let mut fmask = 0u32;
    for &i in face {
        fmask |= 1 << i;
    }
    let size = fmask.count_ones() as usize;
    if size == k {
        return Ok(Estimate { value: 1.0, stderr: 0.0, n: 0 });
    }
    if size == k - 1 {
        return Ok(Estimate { value: 0.5, stderr: 0.0, n: 0 });
    }
    // a direction points into the cone iff its negative set lies inside the face
    let hits: Vec<f64> =
        direction_masks(&frame, n_dirs, seed, child(0x616e676c, fmask as u64)).into_iter().map(|m| (m & !fmask == 0) as u32 as f64).collect();
    Ok(mean_se(&hits))
}

/// Angle sums sigma_1..sigma_d with the Gram alternating sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSums {
    pub sigma: Vec<Estimate>,
    /// sum_k (-1)^{k-1} sigma_k, zero for every simplex.
    pub gram: Estimate,
}

/// sigma_k is the sum of internal angles over k-vertex faces, each face
/// estimated from its own directions.
pub fn angle_sums(simplex: &[Vec<f64>], n_dirs: usize, seed: u64) -> Result<AngleSums> {
    let k = simplex.len();
    DirectionFrame::new(simplex)?;
    let mut val = vec![0.0; k];
    let mut var = vec![0.0; k];
    for mask in 1u32..(1 << k) {
        let face: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let e = internal_angle(&face, simplex, n_dirs, seed)?;
        val[face.len() - 1] += e.value;
        var[face.len() - 1] += e.stderr * e.stderr;
    }
    let sigma: Vec<Estimate> = (0..k).map(|j| Estimate { value: val[j], stderr: var[j].sqrt(), n: n_dirs }).collect();
    let gram = Estimate {
        value: val.iter().enumerate().map(|(j, v)| if j % 2 == 0 { *v } else { -v }).sum(),
        stderr: var.iter().sum::<f64>().sqrt(),
        n: n_dirs,
    };
    Ok(AngleSums { sigma, gram })
}

/// All angle sums from one shared set of directions: a direction with
/// negative set N lies in the cones of the C(k-|N|, j-|N|) j-faces
/// containing N.
pub fn angle_sums_shared(simplex: &[Vec<f64>], n_dirs: usize, seed: u64) -> Result<Vec<Estimate>> {
    let frame = DirectionFrame::new(simplex)?;
    let k = simplex.len();
    let masks = direction_masks(&frame, n_dirs, seed, 0x73686172);
    Ok((1..=k)
        .map(|j| {
            let xs: Vec<f64> = masks
                .iter()
                .map(|m| {
                    let neg = m.count_ones() as usize;
                    if neg <= j {
                        crate::special::binomial(k - neg, j - neg)
                    } else {
                        0.0
                    }
                })
                .collect();
            mean_se(&xs)
        })
        .collect())
}

/// Vertices of a regular simplex with d vertices in R^{d-1}, unit edges.
pub fn regular_simplex(d: usize) -> Vec<Vec<f64>> {
    let n = d - 1;
    let mut v: Vec<Vec<f64>> = vec![vec![0.0; n]; d];
    // successive vertices above the centroid of the previous ones
    for k in 1..d {
        let c: Vec<f64> = (0..n).map(|i| v[..k].iter().map(|p| p[i]).sum::<f64>() / k as f64).collect();
        let r2: f64 = v[0].iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum();
        let mut p = c.clone();
        p[k - 1] = (1.0 - r2).sqrt();
        v[k] = p;
    }
    v
}

/// Angle sums of the regular simplex with d vertices: elementary values
/// for d <= 4, Monte Carlo with 10^7 directions above.
pub fn regular_angle_sums(d: usize) -> Result<Vec<f64>> {
    match d {
        0 | 1 => Err(Error::Parameter(format!("d = {d} must be at least 2"))),
        2 => Ok(vec![1.0, 1.0]),
        3 => Ok(vec![0.5, 1.5, 1.0]),
        4 => {
            let a = (1.0f64 / 3.0).acos();
            Ok(vec![(3.0 * a - PI) / PI, 3.0 * a / PI, 2.0, 1.0])
        }
        _ => {
            let mut s: Vec<f64> = angle_sums_shared(&regular_simplex(d), 10_000_000, 0x726567)?.iter().map(|e| e.value).collect();
            s[d - 1] = 1.0;
            s[d - 2] = d as f64 / 2.0;
            Ok(s)
        }
    }
}

/// gamma_j = sigma_{j+1}(regular simplex) / E Vol(Z_0), j = 0..d-1.
pub fn face_intensities_closed_form(d: usize) -> Result<Vec<f64>> {
    let s = regular_angle_sums(d)?;
    let m = mean_typical_volume(d);
    Ok(s.iter().map(|x| x / m).collect())
}

/// A cell translated so that its apex spatial coordinate is the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredCell {
    pub vertices: Vec<Vec<f64>>,
    pub volume: f64,
}

impl CenteredCell {
    pub fn from_cell(c: &SimplexCell) -> Self {
        let vertices = c.vertices.iter().map(|v| v.iter().zip(&c.apex.w).map(|(x, z)| x - z).collect()).collect();
        CenteredCell { vertices, volume: c.volume }
    }
}

/// Ratio estimator of E f(Z_nu) from the valid cells (apex in the window)
/// of complete tessellations; the standard error treats realizations as
/// independent replicates.
pub fn empirical_weighted_cell_estimator<F>(tess_list: &[Tessellation], nu: f64, functional: F) -> Result<Estimate>
where
    F: Fn(&CenteredCell) -> f64,
{
    let mut num = Vec::new();
    let mut den = Vec::new();
    for t in tess_list.iter().filter(|t| t.complete) {
        let (mut a, mut b) = (0.0, 0.0);
        for c in t.valid_cells() {
            let w = if nu == 0.0 { 1.0 } else { c.volume.powf(nu) };
            a += w * functional(&CenteredCell::from_cell(c));
            b += w;
        }
        num.push(a);
        den.push(b);
    }
    if den.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Empty("no valid cells with positive weight".into()));
    }
    Ok(ratio_se(&num, &den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_hat_examples() {
        assert_relative_eq!(alpha_hat(2, -1.0).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-13);
        assert_relative_eq!(alpha_hat(2, 1.0).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-13);
        assert!(alpha_hat(2, -1.5).is_err());
    }

    #[test]
    fn normalization_by_quadrature() {
        for nu in [-1.0, 0.0, 1.0, 2.5] {
            let v = normalization_integral(nu).unwrap();
            assert!((v - 1.0).abs() < 1e-6, "nu={nu}: {v}");
        }
    }

    #[test]
    fn volume_examples() {
        assert_relative_eq!(simplex_volume(&[vec![0.0], vec![3.0]]), 3.0, max_relative = 1e-14);
        assert_relative_eq!(simplex_volume(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]), 0.5, max_relative = 1e-14);
        assert_relative_eq!(simplex_volume(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 5.0]]), 5.0, max_relative = 1e-14);
        assert_eq!(simplex_volume(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]), 0.0);
    }

    #[test]
    fn moment_examples() {
        for d in 2..6 {
            for nu in [-1.0, 0.0, 1.5] {
                assert_eq!(volume_moment(&CellLawParams::new(d, nu, 0.0)).unwrap(), 1.0);
            }
        }
        assert_relative_eq!(volume_moment(&CellLawParams::new(2, -1.0, 2.0)).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(volume_moment(&CellLawParams::new(3, 0.0, 2.0)).unwrap(), 4.5, max_relative = 1e-12);
        assert_relative_eq!(volume_moment(&CellLawParams::new(2, 0.0, 1.0)).unwrap(), PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(mean_typical_volume(3), 3f64.sqrt(), max_relative = 1e-12);
        assert!(volume_moment(&CellLawParams::new(2, 0.0, -1.5)).is_err());
    }

    #[test]
    fn samplers_handle_empty_requests() {
        for nu in [-1.0, 0.0] {
            assert!(sample_typical_cell(&CellLawParams::new(2, nu, 0.0), 0, 1).unwrap().is_empty());
        }
        assert!(chisq_product_sample(&CellLawParams::new(2, 0.0, 0.0), 0, 1).unwrap().is_empty());
        assert!(sample_typical_cell(&CellLawParams::new(2, -2.0, 0.0), 5, 1).is_err());
    }

    #[test]
    fn gaussian_difference_has_variance_two() {
        let xs: Vec<f64> = sample_typical_cell(&CellLawParams::new(2, -1.0, 0.0), 100_000, 3).unwrap().iter().map(|s| s.volume.powi(2)).collect();
        let e = mean_se(&xs);
        assert!(e.z(2.0).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn importance_mean_volume_nu0() {
        let e = importance_moment(&CellLawParams::new(2, 0.0, 1.0), 200_000, 5).unwrap();
        assert!(e.z(PI.sqrt()).abs() < 3.0, "{e:?}");
    }

    #[test]
    fn chisq_mean() {
        let xs = chisq_product_sample(&CellLawParams::new(2, 0.0, 0.0), 200_000, 9).unwrap();
        let e = mean_se(&xs);
        assert!(e.z(4.0).abs() < 3.0);
    }

    #[test]
    fn metropolis_tunes_acceptance() {
        let (xs, rep) = sample_typical_cell_with(&CellLawParams::new(3, 1.0, 0.0), 2000, 4, &MetropolisConfig::default()).unwrap();
        let rep = rep.unwrap();
        assert_eq!(xs.len(), 2000);
        assert!(rep.acceptance > 0.2 && rep.acceptance < 0.5, "{rep:?}");
    }

    #[test]
    fn angle_examples() {
        let tri = regular_simplex(3);
        assert_eq!(internal_angle(&[0, 1, 2], &tri, 10, 1).unwrap().value, 1.0);
        assert_eq!(internal_angle(&[0, 1], &tri, 10, 1).unwrap().value, 0.5);
        let v = internal_angle(&[0], &tri, 200_000, 1).unwrap();
        assert!(v.z(1.0 / 6.0).abs() < 3.0, "{v:?}");
        assert!(internal_angle(&[0], &[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]], 10, 1).is_err());
        let s = angle_sums(&tri, 100_000, 2).unwrap();
        assert!(s.sigma[0].z(0.5).abs() < 3.0);
        assert_eq!(s.sigma[1].value, 1.5);
        assert_eq!(s.sigma[2].value, 1.0);
        let tet = regular_simplex(4);
        let s = angle_sums_shared(&tet, 400_000, 3).unwrap();
        let want = regular_angle_sums(4).unwrap();
        assert_relative_eq!(want[1], 6.0 * (1.0f64 / 3.0).acos() / (2.0 * PI), max_relative = 1e-14);
        assert!((want[1] - 1.17546).abs() < 1e-4);
        for k in 0..4 {
            assert!(s[k].stderr == 0.0 && s[k].value == want[k] || s[k].z(want[k]).abs() < 3.0, "{k} {:?} {}", s[k], want[k]);
        }
    }

    #[test]
    fn regular_simplex_has_unit_edges() {
        for d in 2..7 {
            let v = regular_simplex(d);
            for i in 0..d {
                for j in i + 1..d {
                    let e: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    assert!((e - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_intensities() {
        let g = face_intensities_closed_form(3).unwrap();
        let r3 = 3f64.sqrt();
        assert_relative_eq!(g[2], 1.0 / r3, max_relative = 1e-12);
        assert_relative_eq!(g[1], r3 / 2.0, max_relative = 1e-12);
        assert_relative_eq!(g[0], 1.0 / (2.0 * r3), max_relative = 1e-12);
        assert!((g[0] - g[1] + g[2]).abs() < 1e-12);
        let g = face_intensities_closed_form(2).unwrap();
        assert_relative_eq!(g[0], 1.0 / PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(g[1], 1.0 / PI.sqrt(), max_relative = 1e-12);
    }
}
