//! Poisson processes of weighted points: intensities, measures, exact
//! sampling on bounded regions and the rescaling maps.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::{child, in_ball, item_stream, open01, stream};
use crate::special::{gamma_ur, integrate, kappa, ln_beta_fn, ln_c_beta, ln_c_beta_prime, ln_gamma};
use crate::stats::{mean_se, poisson_quantile, Estimate};

/// Mass below the automatic lower height cut of curved regions.
pub const TAIL_MASS: f64 = 1e-12;

/// A particle: spatial coordinate `v` in R^{d-1} and height `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub v: Vec<f64>,
    pub h: f64,
}

impl WeightedPoint {
    pub fn new(v: Vec<f64>, h: f64) -> Self {
        WeightedPoint { v, h }
    }

    pub fn norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Beta,
    BetaPrime,
    Gaussian,
}

/// Intensity model of the driving Poisson process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    /// Exponent; ignored by the Gaussian model.
    pub beta: f64,
    /// Intensity multiplier.
    pub gamma: f64,
    /// Lift dimension; the tessellation lives in R^{d-1}.
    pub d: usize,
}

impl ModelParams {
    pub fn gaussian(d: usize) -> Self {
        ModelParams { kind: ModelKind::Gaussian, beta: 0.0, gamma: 1.0, d }
    }

    pub fn beta(d: usize, beta: f64) -> Self {
        ModelParams { kind: ModelKind::Beta, beta, gamma: 1.0, d }
    }

    pub fn beta_prime(d: usize, beta: f64) -> Self {
        ModelParams { kind: ModelKind::BetaPrime, beta, gamma: 1.0, d }
    }

    /// Beta or beta-prime model with the rescaling intensity gamma = sqrt(2 beta).
    pub fn for_rescaling(kind: ModelKind, d: usize, beta: f64) -> Self {
        ModelParams { kind, beta, gamma: (2.0 * beta).sqrt(), d }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn spatial_dim(&self) -> usize {
        self.d - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Parameter(format!("d = {} must be at least 2", self.d)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma = {} must be positive", self.gamma)));
        }
        match self.kind {
            ModelKind::Beta if !(self.beta > -1.0) => {
                Err(Error::Parameter(format!("beta = {} must exceed -1", self.beta)))
            }
            ModelKind::BetaPrime if !(self.beta > (self.d as f64 + 1.0) / 2.0) => Err(
                Error::Parameter(format!("beta' = {} must exceed (d+1)/2", self.beta)),
            ),
            _ => Ok(()),
        }
    }

    /// ln of the height-density prefactor (gamma times the normalizing constant).
    fn ln_prefactor(&self) -> f64 {
        let d = self.d;
        self.gamma.ln()
            + match self.kind {
                ModelKind::Beta => ln_c_beta(d, self.beta),
                ModelKind::BetaPrime => ln_c_beta_prime(d, self.beta),
                ModelKind::Gaussian => -0.5 * d as f64 * (2.0 * PI).ln(),
            }
    }

    /// Support of the height coordinate.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::Beta => (0.0, f64::INFINITY),
            ModelKind::BetaPrime => (f64::NEG_INFINITY, 0.0),
            ModelKind::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Height density per unit spatial volume.
    pub fn height_density(&self, h: f64) -> f64 {
        match self.kind {
            ModelKind::Beta if h < 0.0 => 0.0,
            ModelKind::BetaPrime if h >= 0.0 => 0.0,
            ModelKind::Beta => (self.ln_prefactor() + self.beta * h.ln()).exp(),
            ModelKind::BetaPrime => (self.ln_prefactor() - self.beta * (-h).ln()).exp(),
            ModelKind::Gaussian => (self.ln_prefactor() + 0.5 * h).exp(),
        }
    }

    /// Integral of the height density over [lo, hi] (possibly infinite).
    pub fn height_mass(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let pre = self.ln_prefactor();
        match self.kind {
            ModelKind::Gaussian => {
                if hi == f64::INFINITY {
                    return f64::INFINITY;
                }
                // 2 e^{hi/2} (1 - e^{(lo-hi)/2})
                (pre + 2f64.ln() + 0.5 * hi).exp() * -(0.5 * (lo - hi)).exp_m1()
            }
            ModelKind::Beta => {
                let (lo, hi) = (lo.max(0.0), hi.max(0.0));
                if !(hi > lo) {
                    return 0.0;
                }
                if hi == f64::INFINITY {
                    return f64::INFINITY;
                }
                let p = self.beta + 1.0;
                let rho = if lo > 0.0 { ((lo / hi).ln() * p).exp() } else { 0.0 };
                (pre + p * hi.ln() - p.ln()).exp() * (1.0 - rho)
            }
            ModelKind::BetaPrime => {
                if hi >= 0.0 {
                    return if lo < 0.0 { f64::INFINITY } else { 0.0 };
                }
                let q = self.beta - 1.0;
                let rho = if lo.is_finite() { ((lo / hi).ln() * -q).exp() } else { 0.0 };
                (pre - q * (-hi).ln() - q.ln()).exp() * (1.0 - rho)
            }
        }
    }

    /// Inverse of the normalized height CDF restricted to [lo, hi].
    pub fn height_quantile(&self, lo: f64, hi: f64, u: f64) -> f64 {
        match self.kind {
            ModelKind::Gaussian => hi + 2.0 * (u + (1.0 - u) * (0.5 * (lo - hi)).exp()).ln(),
            ModelKind::Beta => {
                let (lo, hi) = (lo.max(0.0), hi.max(0.0));
                let p = self.beta + 1.0;
                let rho = if lo > 0.0 { ((lo / hi).ln() * p).exp() } else { 0.0 };
                hi * ((rho + u * (1.0 - rho)).ln() / p).exp()
            }
            ModelKind::BetaPrime => {
                let q = self.beta - 1.0;
                let rho = if lo.is_finite() { ((lo / hi).ln() * -q).exp() } else { 0.0 };
                hi * (-(rho + u * (1.0 - rho)).ln() / q).exp()
            }
        }
    }

    /// Intensity measure of {(v,h): |v - c| <= a + sqrt(t - h), lo <= h <= hi} for hi <= t.
    fn kregion_mass(&self, a: f64, t: f64, lo: f64, hi: f64) -> Result<f64> {
        let n = self.spatial_dim();
        let (slo, shi) = self.support();
        let lo = lo.max(slo);
        let hi = hi.min(t).min(shi);
        if !(hi > lo) {
            return Ok(0.0);
        }
        if self.kind == ModelKind::BetaPrime && hi >= 0.0 {
            return Err(Error::InfiniteMeasure("beta' region reaches height 0".into()));
        }
        let kap = kappa(n);
        match self.kind {
            ModelKind::Gaussian => {
                // sum_i C(n,i) a^{n-i} int (t-s)^{i/2} e^{s/2} ds, via incomplete gamma
                let pre = (self.ln_prefactor() + 0.5 * t).exp() * kap;
                let (ylo, yhi) = (0.5 * (t - hi), 0.5 * (t - lo));
                let mut total = 0.0;
                for i in 0..=n {
                    let alpha = 0.5 * i as f64 + 1.0;
                    let q_hi = gamma_ur(alpha, ylo);
                    let q_lo = if yhi.is_finite() { gamma_ur(alpha, yhi) } else { 0.0 };
                    let g = (ln_gamma(alpha) + alpha * 2f64.ln()).exp() * (q_hi - q_lo);
                    total += crate::special::binomial(n, i) * a.powi((n - i) as i32) * g;
                }
                Ok(pre * total)
            }
            _ => {
                let (y0, y1) = ((t - hi).sqrt(), (t - lo).sqrt());
                let f = |y: f64| kap * (a + y).powi(n as i32) * self.height_density(t - y * y) * 2.0 * y;
                let (v, _) = integrate(f, y0, y1, 1e-10);
                Ok(v)
            }
        }
    }

    /// Lower height below which the K-type region {|v| <= a + sqrt(t-h)} holds
    /// less than `mass` intensity.
    fn kregion_floor(&self, a: f64, t: f64, mass: f64) -> Result<f64> {
        let (slo, _) = self.support();
        let mut gap: f64 = 1.0;
        for _ in 0..200 {
            let f = t - gap;
            if f <= slo {
                return Ok(slo);
            }
            if self.kregion_mass(a, t, f64::NEG_INFINITY, f)? < mass {
                return Ok(f);
            }
            gap *= 2.0;
        }
        Err(Error::Unattainable("no finite lower cut with negligible tail".into()))
    }
}

/// Bounded regions of R^{d-1} x R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// B_a x [hmin, hmax].
    Box { a: f64, hmin: f64, hmax: f64 },
    /// {(v,h) : |v - w|^2 + h <= t}.
    PowBall { w: Vec<f64>, t: f64 },
    /// K(a, t) = {(v,h): h <= t - dist(v, B_a)^2}, optionally cut below at `floor`.
    KRegion { a: f64, t: f64, floor: Option<f64> },
}

impl Region {
    pub fn contains(&self, p: &WeightedPoint) -> bool {
        match self {
            Region::Box { a, hmin, hmax } => p.norm() <= *a && p.h >= *hmin && p.h <= *hmax,
            Region::PowBall { w, t } => crate::hull::power(w, p) <= *t,
            Region::KRegion { a, t, floor } => {
                let e = (p.norm() - a).max(0.0);
                p.h <= t - e * e && floor.map_or(true, |f| p.h >= f)
            }
        }
    }
}

/// The density of the process in the chosen frame: native, or pushed
/// forward by the rescaling map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Process {
    pub model: ModelParams,
    pub rescaled: bool,
}

/// Result of sampling: the points plus bookkeeping about the lower cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub points: Vec<WeightedPoint>,
    /// Lower height cut actually used (frame coordinates), if any.
    pub floor: Option<f64>,
    /// Intensity mass discarded below the cut.
    pub discarded_mass: f64,
}

impl Process {
    pub fn native(model: ModelParams) -> Self {
        Process { model, rescaled: false }
    }

    /// The rescaled process Q(eta); Gaussian models are left native.
    pub fn rescaled(model: ModelParams) -> Self {
        Process { model, rescaled: model.kind != ModelKind::Gaussian }
    }

    fn scale(&self) -> f64 {
        (2.0 * self.model.beta).sqrt()
    }

    fn shift(&self) -> f64 {
        match self.model.kind {
            ModelKind::Beta => 1.0,
            ModelKind::BetaPrime => -1.0,
            ModelKind::Gaussian => 0.0,
        }
    }

    fn h_to_native(&self, s: f64) -> f64 {
        if self.rescaled {
            self.shift() + s / (2.0 * self.model.beta)
        } else {
            s
        }
    }

    fn h_to_frame(&self, h: f64) -> f64 {
        if self.rescaled {
            2.0 * self.model.beta * (h - self.shift())
        } else {
            h
        }
    }

    /// Support of the height coordinate in this frame.
    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.model.support();
        (self.h_to_frame(a), self.h_to_frame(b))
    }

    /// Height density per unit (frame) spatial volume.
    pub fn height_density(&self, s: f64) -> f64 {
        let dens = self.model.height_density(self.h_to_native(s));
        if self.rescaled {
            dens * (2.0 * self.model.beta).powf(-0.5 * (self.model.d as f64 + 1.0))
        } else {
            dens
        }
    }

    /// Preimage of a frame region in native coordinates.
    pub fn native_region(&self, r: &Region) -> Region {
        if !self.rescaled {
            return r.clone();
        }
        let k = self.scale();
        match r {
            Region::Box { a, hmin, hmax } => Region::Box {
                a: a / k,
                hmin: self.h_to_native(*hmin),
                hmax: self.h_to_native(*hmax),
            },
            Region::PowBall { w, t } => Region::PowBall {
                w: w.iter().map(|x| x / k).collect(),
                t: self.h_to_native(*t),
            },
            Region::KRegion { a, t, floor } => Region::KRegion {
                a: a / k,
                t: self.h_to_native(*t),
                floor: floor.map(|f| self.h_to_native(f)),
            },
        }
    }

    /// Maps a native point into this frame.
    pub fn to_frame(&self, p: WeightedPoint) -> WeightedPoint {
        if !self.rescaled {
            return p;
        }
        let k = self.scale();
        WeightedPoint { v: p.v.iter().map(|x| x * k).collect(), h: self.h_to_frame(p.h) }
    }

    /// Intensity measure of a frame region.
    pub fn measure(&self, region: &Region) -> Result<f64> {
        intensity_measure(&self.model, &self.native_region(region))
    }

    /// Poisson sample on a frame region, from stream `(seed, stream_id)`.
    pub fn sample(&self, region: &Region, seed: u64, stream_id: u64) -> Result<Sample> {
        self.model.validate()?;
        let n = self.model.spatial_dim();
        match region {
            Region::Box { .. } => {
                let pts = sample_box(&self.model, &self.native_region(region), seed, stream_id)?;
                Ok(Sample {
                    points: pts.into_iter().map(|p| self.to_frame(p)).collect(),
                    floor: None,
                    discarded_mass: 0.0,
                })
            }
            Region::PowBall { w, t } => self.sample_curved(w, 0.0, *t, None, seed, stream_id),
            Region::KRegion { a, t, floor } => {
                self.sample_curved(&vec![0.0; n], *a, *t, *floor, seed, stream_id)
            }
        }
    }

    /// Samples {|v - c| <= a + sqrt(t - h), h >= floor} by slabs, each slab by
    /// rejection from its smallest enclosing box.
    fn sample_curved(
        &self,
        c: &[f64],
        a: f64,
        t: f64,
        floor: Option<f64>,
        seed: u64,
        stream_id: u64,
    ) -> Result<Sample> {
        let native = self.native_region(&Region::KRegion { a, t, floor: None });
        let (na, nt) = match native {
            Region::KRegion { a, t, .. } => (a, t),
            _ => unreachable!(),
        };
        let (slo, _) = self.support();
        let (floor, discarded) = match floor {
            Some(f) => {
                let nf = self.h_to_native(f);
                (f.max(slo), self.model.kregion_mass(na, nt, f64::NEG_INFINITY, nf)?)
            }
            None => {
                let nf = self.model.kregion_floor(na, nt, TAIL_MASS)?;
                let f = self.h_to_frame(nf).max(slo);
                (f, self.model.kregion_mass(na, nt, f64::NEG_INFINITY, nf)?)
            }
        };
        let mut points = Vec::new();
        let mut hi = t;
        let mut slab = 0u64;
        while hi > floor {
            let lo = (t - 2f64.powi(slab as i32)).max(floor);
            let radius = a + (t - lo).sqrt();
            let frame_box = Region::Box { a: radius, hmin: lo, hmax: hi };
            let nbox = self.native_region(&frame_box);
            let pts = sample_box(&self.model, &nbox, seed, child(stream_id, slab))?;
            for p in pts {
                let mut q = self.to_frame(p);
                for (x, cx) in q.v.iter_mut().zip(c) {
                    *x += cx;
                }
                let dist = q.v.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let e = (dist - a).max(0.0);
                if q.h <= t - e * e {
                    points.push(q);
                }
            }
            hi = lo;
            slab += 1;
        }
        Ok(Sample { points, floor: Some(floor), discarded_mass: discarded })
    }
}

/// Native-frame Poisson sample on a centred box.
fn sample_box(model: &ModelParams, region: &Region, seed: u64, stream_id: u64) -> Result<Vec<WeightedPoint>> {
    let (a, hmin, hmax) = match region {
        Region::Box { a, hmin, hmax } => (*a, *hmin, *hmax),
        _ => unreachable!(),
    };
    let mu = intensity_measure(model, region)?;
    if mu == 0.0 {
        return Ok(Vec::new());
    }
    let (slo, shi) = model.support();
    let (lo, hi) = (hmin.max(slo), hmax.min(shi));
    let mut counter = stream(seed, child(stream_id, 0));
    let count = poisson_quantile(mu, open01(&mut counter));
    let n = model.spatial_dim();
    let center = vec![0.0; n];
    let pos_stream = child(stream_id, 1);
    let mut out = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut rng = item_stream(seed, pos_stream, i);
        let h = model.height_quantile(lo, hi, open01(&mut rng));
        let mut v = vec![0.0; n];
        in_ball(&mut rng, &center, a, &mut v);
        out.push(WeightedPoint { v, h });
    }
    Ok(out)
}

/// Intensity density of the model at `p`; zero outside the support.
pub fn intensity_density(model: &ModelParams, p: &WeightedPoint) -> Result<f64> {
    model.validate()?;
    Ok(model.height_density(p.h))
}

/// Intensity measure of a region under the model (native frame).
pub fn intensity_measure(model: &ModelParams, region: &Region) -> Result<f64> {
    model.validate()?;
    let n = model.spatial_dim();
    match region {
        Region::Box { a, hmin, hmax } => {
            if !(hmax > hmin) || *a <= 0.0 {
                return Ok(0.0);
            }
            let m = model.height_mass(*hmin, *hmax);
            if m.is_infinite() {
                return Err(Error::InfiniteMeasure(format!("box [{hmin}, {hmax}]")));
            }
            Ok(kappa(n) * a.powi(n as i32) * m)
        }
        Region::PowBall { t, .. } => {
            let t = *t;
            let half = 0.5 * n as f64 + 1.0;
            match model.kind {
                ModelKind::Gaussian => Ok(model.gamma * (2.0 / PI).sqrt() * (0.5 * t).exp()),
                ModelKind::Beta => {
                    if t <= 0.0 {
                        return Ok(0.0);
                    }
                    let ln = model.ln_prefactor() + crate::special::ln_kappa(n)
                        + (model.beta + half) * t.ln()
                        + ln_beta_fn(model.beta + 1.0, half);
                    Ok(ln.exp())
                }
                ModelKind::BetaPrime => {
                    if t >= 0.0 {
                        return Err(Error::InfiniteMeasure("power ball reaches height 0".into()));
                    }
                    let ln = model.ln_prefactor() + crate::special::ln_kappa(n)
                        + (half - model.beta) * (-t).ln()
                        + ln_beta_fn(half, model.beta - half);
                    Ok(ln.exp())
                }
            }
        }
        Region::KRegion { a, t, floor } => {
            model.kregion_mass(*a, *t, floor.unwrap_or(f64::NEG_INFINITY), *t)
        }
    }
}

/// Poisson sample of the (native) model on a region.
pub fn sample_poisson(model: &ModelParams, region: &Region, seed: u64) -> Result<Vec<WeightedPoint>> {
    Ok(Process::native(*model).sample(region, seed, 0)?.points)
}

/// The rescaling Q_beta (beta model) or Q'_beta (beta-prime model).
pub fn rescale(model: &ModelParams, p: &WeightedPoint) -> Result<WeightedPoint> {
    if model.kind == ModelKind::Gaussian {
        return Err(Error::RescaleUndefined);
    }
    if !(model.beta > 0.0) {
        return Err(Error::Parameter("rescaling needs beta > 0".into()));
    }
    Ok(Process::rescaled(*model).to_frame(p.clone()))
}

/// Inverse of [`rescale`].
pub fn unrescale(model: &ModelParams, p: &WeightedPoint) -> Result<WeightedPoint> {
    if model.kind == ModelKind::Gaussian {
        return Err(Error::RescaleUndefined);
    }
    let pr = Process::rescaled(*model);
    let k = pr.scale();
    Ok(WeightedPoint { v: p.v.iter().map(|x| x / k).collect(), h: pr.h_to_native(p.h) })
}

/// One row of the empirical-process table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDiscrepancy {
    pub beta: f64,
    pub region: usize,
    pub mean_count: Estimate,
    pub gaussian_measure: f64,
    pub discrepancy: f64,
}

/// Mean counts of the rescaled beta process in each box against the
/// Gaussian intensity measure, for each beta; plus a monotonicity verdict
/// (non-increasing discrepancy up to 3 combined standard errors).
pub fn empirical_process_convergence(
    d: usize,
    beta_list: &[f64],
    boxes: &[Region],
    reps: usize,
    seed: u64,
) -> Result<(Vec<CountDiscrepancy>, bool)> {
    let gauss = ModelParams::gaussian(d);
    let mut rows = Vec::new();
    for &beta in beta_list {
        let proc_ = Process::rescaled(ModelParams::for_rescaling(ModelKind::Beta, d, beta));
        for (bi, b) in boxes.iter().enumerate() {
            let target = intensity_measure(&gauss, b)?;
            let counts: Vec<f64> = (0..reps)
                .map(|r| proc_.sample(b, seed, child(r as u64, bi as u64)).map(|s| s.points.len() as f64))
                .collect::<Result<_>>()?;
            let e = mean_se(&counts);
            let disc = if counts.is_empty() { 0.0 } else { (e.value - target).abs() };
            rows.push(CountDiscrepancy { beta, region: bi, mean_count: e, gaussian_measure: target, discrepancy: disc });
        }
    }
    let mut ok = true;
    for bi in 0..boxes.len() {
        let col: Vec<&CountDiscrepancy> = rows.iter().filter(|r| r.region == bi).collect();
        for w in col.windows(2) {
            let se = (w[0].mean_count.stderr.powi(2) + w[1].mean_count.stderr.powi(2)).sqrt();
            let se = if se.is_finite() { se } else { 0.0 };
            if w[1].discrepancy > w[0].discrepancy + 3.0 * se {
                ok = false;
            }
        }
    }
    Ok((rows, ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(v: &[f64], h: f64) -> WeightedPoint {
        WeightedPoint::new(v.to_vec(), h)
    }

    #[test]
    fn densities_match_examples() {
        let g = ModelParams::gaussian(2);
        assert_relative_eq!(intensity_density(&g, &pt(&[0.3], 0.0)).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        let b = ModelParams::beta(2, 1.0);
        assert_relative_eq!(intensity_density(&b, &pt(&[0.0], 1.0)).unwrap(), 2.0 / PI, epsilon = 1e-14);
        let bp = ModelParams::beta_prime(2, 2.0);
        assert_relative_eq!(intensity_density(&bp, &pt(&[0.0], -1.0)).unwrap(), 1.0 / PI, epsilon = 1e-14);
        assert_eq!(intensity_density(&b, &pt(&[0.0], -1.0)).unwrap(), 0.0);
        assert_eq!(intensity_density(&bp, &pt(&[0.0], 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(intensity_density(&ModelParams::beta(2, -1.0), &pt(&[0.0], 1.0)).is_err());
        assert!(intensity_density(&ModelParams::beta_prime(2, 1.5), &pt(&[0.0], -1.0)).is_err());
        assert!(ModelParams::beta(3, 0.5).validate().is_ok());
    }

    #[test]
    fn measures_match_examples() {
        for d in 2..6 {
            let m = intensity_measure(&ModelParams::gaussian(d), &Region::PowBall { w: vec![0.4; d - 1], t: 0.0 }).unwrap();
            assert_relative_eq!(m, (2.0 / PI).sqrt(), epsilon = 1e-14);
        }
        let m = intensity_measure(&ModelParams::gaussian(2), &Region::Box { a: 1.0, hmin: f64::NEG_INFINITY, hmax: 0.0 }).unwrap();
        assert_relative_eq!(m, 2.0 / PI, epsilon = 1e-14);
        let m = intensity_measure(&ModelParams::beta(3, 2.0), &Region::Box { a: 1.0, hmin: 0.5, hmax: 0.5 }).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn infinite_measures_are_reported() {
        let bp = ModelParams::beta_prime(2, 3.0);
        let r = intensity_measure(&bp, &Region::Box { a: 1.0, hmin: -1.0, hmax: 0.5 });
        assert!(matches!(r, Err(Error::InfiniteMeasure(_))));
        let r = intensity_measure(&bp, &Region::KRegion { a: 1.0, t: 0.1, floor: None });
        assert!(matches!(r, Err(Error::InfiniteMeasure(_))));
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        // power balls as K-regions of radius 0, and Gaussian K-regions via the generic quadrature
        let models = [ModelParams::beta(3, 1.5), ModelParams::beta_prime(3, 4.0), ModelParams::gaussian(3)];
        for m in models {
            let t = if m.kind == ModelKind::BetaPrime { -0.7 } else { 1.3 };
            let pb = intensity_measure(&m, &Region::PowBall { w: vec![0.0, 0.0], t }).unwrap();
            let kr = intensity_measure(&m, &Region::KRegion { a: 0.0, t, floor: None }).unwrap();
            assert_relative_eq!(pb, kr, max_relative = 1e-8);
        }
        let g = ModelParams::gaussian(3);
        let kr = intensity_measure(&g, &Region::KRegion { a: 1.5, t: 2.0, floor: Some(-3.0) }).unwrap();
        let (q, _) = integrate(|s| PI * (1.5 + (2.0 - s).sqrt()).powi(2) * g.height_density(s), -3.0, 2.0, 1e-12);
        assert_relative_eq!(kr, q, max_relative = 1e-9);
    }

    #[test]
    fn rescale_examples_and_inverse() {
        let b = ModelParams::beta(2, 2.0);
        assert_eq!(rescale(&b, &pt(&[0.0], 1.0)).unwrap(), pt(&[0.0], 0.0));
        assert_eq!(rescale(&b, &pt(&[1.0], 2.0)).unwrap(), pt(&[2.0], 4.0));
        let bp = ModelParams::beta_prime(2, 2.0);
        assert_eq!(rescale(&bp, &pt(&[0.0], -1.0)).unwrap(), pt(&[0.0], 0.0));
        assert_eq!(rescale(&ModelParams::gaussian(2), &pt(&[0.0], 0.0)), Err(Error::RescaleUndefined));
    }

    #[test]
    fn rescaled_density_matches_closed_form() {
        let beta = 7.0;
        let p = Process::rescaled(ModelParams::for_rescaling(ModelKind::Beta, 3, beta));
        let s = 1.2;
        let expect = (ln_c_beta(3, beta) - 1.5 * (2.0 * beta).ln()).exp() * (1.0 + s / (2.0 * beta)).powf(beta);
        assert_relative_eq!(p.height_density(s), expect, max_relative = 1e-12);
        let r = Region::Box { a: 1.0, hmin: -1.0, hmax: 0.5 };
        let (q, _) = integrate(|s| p.height_density(s), -1.0, 0.5, 1e-12);
        assert_relative_eq!(p.measure(&r).unwrap(), PI * q, max_relative = 1e-10);
    }

    #[test]
    fn sampling_is_deterministic_and_in_region() {
        let g = ModelParams::gaussian(3);
        let r = Region::KRegion { a: 2.0, t: 3.0, floor: None };
        let a = sample_poisson(&g, &r, 11).unwrap();
        let b = sample_poisson(&g, &r, 11).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        assert!(a.iter().all(|p| r.contains(p)));
        let empty = sample_poisson(&g, &Region::Box { a: 1.0, hmin: 0.0, hmax: 0.0 }, 3).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn mean_counts_match_measures() {
        let g = ModelParams::gaussian(2);
        let r = Region::Box { a: 1.0, hmin: f64::NEG_INFINITY, hmax: 0.0 };
        let counts: Vec<f64> = (0..20_000).map(|s| sample_poisson(&g, &r, s).unwrap().len() as f64).collect();
        let e = mean_se(&counts);
        assert!(e.z(2.0 / PI).abs() < 3.0, "{e:?}");

        let b = ModelParams::beta(2, 0.0);
        let r = Region::Box { a: 1.0, hmin: 0.0, hmax: 1.0 };
        let counts: Vec<f64> = (0..20_000).map(|s| sample_poisson(&b, &r, s).unwrap().len() as f64).collect();
        assert!(mean_se(&counts).z(2.0 / PI).abs() < 3.0);

        for m in [ModelParams::beta_prime(3, 3.0), ModelParams::gaussian(3), ModelParams::beta(3, 2.0)] {
            let proc_ = Process::rescaled(ModelParams::for_rescaling(m.kind, 3, if m.kind == ModelKind::Gaussian { 1.0 } else { m.beta }));
            let r = Region::KRegion { a: 1.0, t: 1.0, floor: None };
            let mu = proc_.measure(&Region::KRegion { a: 1.0, t: 1.0, floor: None }).unwrap();
            let counts: Vec<f64> = (0..4000).map(|s| proc_.sample(&r, s, 0).unwrap().points.len() as f64).collect();
            assert!(mean_se(&counts).z(mu).abs() < 3.5, "{:?} {mu} {:?}", m.kind, mean_se(&counts));
        }
    }

    #[test]
    fn slab_cut_records_tail() {
        let proc_ = Process::native(ModelParams::gaussian(3));
        let s = proc_.sample(&Region::KRegion { a: 5.0, t: 2.0, floor: None }, 1, 0).unwrap();
        assert!(s.discarded_mass < TAIL_MASS);
        assert!(s.floor.unwrap() < -40.0);
    }

    #[test]
    fn gaussian_heights_follow_truncated_density() {
        let g = ModelParams::gaussian(2);
        let (t, tt) = (-2.0, 1.5);
        let r = Region::Box { a: 50.0, hmin: t, hmax: tt };
        let mut hs = Vec::new();
        let mut s = 0;
        while hs.len() < 100_000 {
            hs.extend(sample_poisson(&g, &r, s).unwrap().into_iter().map(|p| p.h));
            s += 1;
        }
        let cdf = |h: f64| ((0.5 * h).exp() - (0.5 * t).exp()) / ((0.5 * tt).exp() - (0.5 * t).exp());
        let (_, p) = crate::stats::ks_one_sample(&hs, cdf);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn disjoint_counts_are_independent() {
        let g = ModelParams::gaussian(2);
        let proc_ = Process::native(g);
        let r1 = Region::Box { a: 1.0, hmin: -1.0, hmax: 1.0 };
        let r2 = Region::Box { a: 1.0, hmin: 1.0, hmax: 2.0 };
        let mut table = vec![vec![0.0; 4]; 4];
        for rep in 0..10_000u64 {
            let a = proc_.sample(&r1, 5, child(rep, 0)).unwrap().points.len().min(3);
            let b = proc_.sample(&r2, 5, child(rep, 1)).unwrap().points.len().min(3);
            table[a][b] += 1.0;
        }
        assert!(crate::stats::chi2_independence(&table) > 0.001);
    }

    #[test]
    fn empirical_process_table_shape() {
        let boxes = [Region::Box { a: 1.0, hmin: -1.0, hmax: 0.0 }];
        let (rows, _) = empirical_process_convergence(2, &[8.0], &boxes, 50, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let empty = [Region::Box { a: 1.0, hmin: 0.0, hmax: 0.0 }];
        let (rows, ok) = empirical_process_convergence(2, &[4.0, 16.0], &empty, 20, 1).unwrap();
        assert!(ok);
        assert!(rows.iter().all(|r| r.discrepancy == 0.0));
    }
}
