//! Geometry kernel: power distances, the paraboloid lifting, lower convex
//! hulls, weighted Delaunay cells, apexes and Laguerre cells.

use crate::error::{Error, Result};
use crate::point_processes::WeightedPoint;
use crate::predicates::{orient_exact, orient_sos, Row};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::HashMap;

/// Power of `w` with respect to the weighted point `p`: ‖w − v‖² + h.
pub fn power(w: &[f64], p: &WeightedPoint) -> f64 {
    w.iter().zip(&p.v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + p.h
}

/// Lifting map (v, h) ↦ (v, ‖v‖² + h).
pub fn lift(p: &WeightedPoint) -> Vec<f64> {
    let mut x = p.v.clone();
    x.push(p.v.iter().map(|a| a * a).sum::<f64>() + p.h);
    x
}

/// Apex (w, r) of a downward paraboloid h = r − ‖v − w‖².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Apex {
    pub w: Vec<f64>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexCell {
    pub vertex_indices: Vec<usize>,
    pub vertices: Vec<Vec<f64>>,
    pub heights: Vec<f64>,
    pub apex: Apex,
    pub volume: f64,
}

/// Dense LU with partial pivoting; returns the determinant and leaves the
/// factors in place.
fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<f64> {
    let mut det = 1.0;
    for i in 0..n {
        let mut p = i;
        for r in i + 1..n {
            if a[r * n + i].abs() > a[p * n + i].abs() {
                p = r;
            }
        }
        if a[p * n + i] == 0.0 {
            return None;
        }
        if p != i {
            for c in 0..n {
                a.swap(i * n + c, p * n + c);
            }
            b.swap(i, p);
            det = -det;
        }
        let piv = a[i * n + i];
        det *= piv;
        for r in i + 1..n {
            let f = a[r * n + i] / piv;
            if f != 0.0 {
                for c in i..n {
                    a[r * n + c] -= f * a[i * n + c];
                }
                b[r] -= f * b[i];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for c in i + 1..n {
            s -= a[i * n + c] * b[c];
        }
        b[i] = s / a[i * n + i];
    }
    Some(det)
}

/// Volume of the simplex spanned by n+1 points in R^n.
pub fn simplex_volume(vertices: &[Vec<f64>]) -> f64 {
    let n = vertices.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let mut a = Vec::with_capacity(n * n);
    for v in &vertices[1..] {
        for j in 0..n {
            a.push(v[j] - vertices[0][j]);
        }
    }
    let mut b = vec![0.0; n];
    match lu_solve(&mut a, &mut b, n) {
        Some(det) => (det.abs().ln() - crate::special::ln_factorial(n)).exp(),
        None => 0.0,
    }
}

fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let neg = num.is_negative() != den.is_negative();
    let (n, d) = (num.abs(), den.abs());
    let shift = 64i64 - (n.bits() as i64 - d.bits() as i64);
    let q = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let v = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-shift as i32);
    if neg {
        -v
    } else {
        v
    }
}

fn bareiss(mut a: Vec<BigInt>, k: usize) -> BigInt {
    let mut sign = 1;
    let mut prev = BigInt::from(1);
    for i in 0..k {
        if a[i * k + i].is_zero() {
            match (i + 1..k).find(|&r| !a[r * k + i].is_zero()) {
                Some(r) => {
                    for c in 0..k {
                        a.swap(i * k + c, r * k + c);
                    }
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for r in i + 1..k {
            for c in i + 1..k {
                a[r * k + c] = (&a[r * k + c] * &a[i * k + i] - &a[r * k + i] * &a[i * k + c]) / &prev;
            }
        }
        prev = a[i * k + i].clone();
    }
    if sign < 0 {
        -prev
    } else {
        prev
    }
}

fn to_scaled_int(x: f64, emin: i32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1i64 << 52), exp - 1075) };
    let tz = m.trailing_zeros() as i32;
    let v = BigInt::from(m >> tz) << (e + tz - emin) as usize;
    if bits >> 63 == 1 {
        -v
    } else {
        v
    }
}

fn exponent_of(x: f64) -> i32 {
    if x == 0.0 {
        return i32::MAX;
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    e + m.trailing_zeros() as i32
}

fn apex_exact(points: &[&WeightedPoint]) -> Result<Apex> {
    let n = points.len() - 1;
    let emin = points
        .iter()
        .flat_map(|p| p.v.iter().copied().chain(std::iter::once(p.h)))
        .map(exponent_of)
        .min()
        .unwrap_or(0)
        .min(0);
    let vs: Vec<Vec<BigInt>> = points.iter().map(|p| p.v.iter().map(|&x| to_scaled_int(x, emin)).collect()).collect();
    // z = ‖v‖² + h in units of 2^(2 emin)
    let zs: Vec<BigInt> = points
        .iter()
        .zip(&vs)
        .map(|(p, v)| v.iter().map(|x| x * x).sum::<BigInt>() + (to_scaled_int(p.h, emin) << (-emin) as usize))
        .collect();
    let mut a = Vec::with_capacity(n * n);
    let mut b = Vec::with_capacity(n);
    for i in 1..=n {
        for j in 0..n {
            a.push(BigInt::from(2) * (&vs[i][j] - &vs[0][j]));
        }
        b.push(&zs[i] - &zs[0]);
    }
    let det = bareiss(a.clone(), n);
    if det.is_zero() {
        return Err(Error::Degenerate("spatial coordinates are affinely dependent".into()));
    }
    let scale = 2f64.powi(emin);
    let mut w = vec![0.0; n];
    for j in 0..n {
        let mut aj = a.clone();
        for i in 0..n {
            aj[i * n + j] = b[i].clone();
        }
        w[j] = ratio_to_f64(&bareiss(aj, n), &det) * scale;
    }
    let p0 = points[0];
    let r = p0.h + p0.v.iter().zip(&w).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    Ok(Apex { w, r })
}

/// Apex of the unique downward paraboloid through d weighted points.
pub fn paraboloid_through(points: &[&WeightedPoint]) -> Result<Apex> {
    let d = points.len();
    if d < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: d });
    }
    let n = d - 1;
    if points.iter().any(|p| p.v.len() != n) {
        return Err(Error::Dimension(d));
    }
    let z: Vec<f64> = points.iter().map(|p| p.v.iter().map(|x| x * x).sum::<f64>() + p.h).collect();
    let mut a = Vec::with_capacity(n * n);
    let mut b = Vec::with_capacity(n);
    for i in 1..d {
        for j in 0..n {
            a.push(2.0 * (points[i].v[j] - points[0].v[j]));
        }
        b.push(z[i] - z[0]);
    }
    if lu_solve(&mut a, &mut b, n).is_some() && b.iter().all(|x| x.is_finite()) {
        let w = b;
        let c = z[0] - 2.0 * points[0].v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
        let r = c + w.iter().map(|x| x * x).sum::<f64>();
        let scale = points.iter().map(|p| p.h.abs() + p.v.iter().map(|x| x * x).sum::<f64>()).fold(r.abs(), f64::max);
        let ok = points.iter().all(|p| (p.h - (r - p.v.iter().zip(&w).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())).abs() <= 1e-9 * (1.0 + scale));
        if ok {
            return Ok(Apex { w, r });
        }
    }
    apex_exact(points)
}

/// Height of the boundary of the paraboloid growth process at `w`.
pub fn growth_boundary_height(w: &[f64], points: &[WeightedPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("no points".into()));
    }
    Ok(points.iter().map(|p| power(w, p)).fold(f64::INFINITY, f64::min))
}

const INF: usize = usize::MAX;

struct Facet {
    v: Vec<usize>,
    nbr: Vec<usize>,
    alive: bool,
}

struct Hull<'a> {
    pts: &'a [Vec<f64>],
    up: Vec<f64>,
    facets: Vec<Facet>,
    perturbed: Cell<bool>,
}

impl<'a> Hull<'a> {
    fn row(&self, i: usize) -> Row<'_> {
        if i == INF {
            Row { coords: &self.up, point: None }
        } else {
            Row { coords: &self.pts[i], point: Some(i) }
        }
    }

    fn orient(&self, verts: &[usize], p: usize) -> i8 {
        let mut rows: Vec<Row> = verts.iter().map(|&i| self.row(i)).collect();
        rows.push(self.row(p));
        let (s, used) = orient_sos(&rows);
        if used {
            self.perturbed.set(true);
        }
        s
    }
}

/// Output of the lower-hull construction.
#[derive(Debug, Clone)]
pub struct LowerHull {
    /// Facets as index lists; each has all points on or above its hyperplane.
    pub facets: Vec<Vec<usize>>,
    /// Neighbour across the vertex at each position (`None` at the boundary).
    pub neighbors: Vec<Vec<Option<usize>>>,
    /// Whether symbolic perturbation decided any predicate.
    pub perturbed: bool,
}

fn initial_simplex(pts: &[Vec<f64>], order: &[usize]) -> Result<Vec<usize>> {
    let dim = pts[0].len();
    let n = dim - 1;
    let mut chosen = vec![order[0]];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let o = &pts[order[0]][..n];
    while chosen.len() < n + 1 {
        let mut best = None;
        let mut best_r = 0.0;
        for &i in order {
            let mut x: Vec<f64> = (0..n).map(|j| pts[i][j] - o[j]).collect();
            for b in &basis {
                let c: f64 = x.iter().zip(b).map(|(a, b)| a * b).sum();
                for j in 0..n {
                    x[j] -= c * b[j];
                }
            }
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if r > best_r {
                best_r = r;
                best = Some((i, x));
            }
        }
        let (i, x) = best.ok_or_else(|| Error::Degenerate("spatial coordinates are affinely dependent".into()))?;
        basis.push(x.iter().map(|a| a / best_r).collect());
        chosen.push(i);
    }
    let rows: Vec<Row> = chosen.iter().map(|&i| Row { coords: &pts[i][..n], point: Some(i) }).collect();
    if orient_exact(&rows) == 0 {
        return Err(Error::Degenerate("spatial coordinates are affinely dependent".into()));
    }
    Ok(chosen)
}

/// Lower convex hull of lifted points in R^d (last coordinate vertical).
pub fn lower_hull(lifted: &[Vec<f64>]) -> Result<LowerHull> {
    let npts = lifted.len();
    let dim = lifted.first().map(|p| p.len()).unwrap_or(0);
    if dim < 2 {
        return Err(Error::Dimension(dim));
    }
    if npts < dim {
        return Err(Error::TooFewPoints { needed: dim, got: npts });
    }
    if lifted.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
        return Err(Error::Parameter("lifted points must be finite and of equal dimension".into()));
    }
    let mut order: Vec<usize> = (0..npts).collect();
    let mut rng = crate::rng::stream(0x6875_6c6c, npts as u64);
    order.shuffle(&mut rng);

    let mut up = vec![0.0; dim];
    up[dim - 1] = 1.0;
    let mut h = Hull { pts: lifted, up, facets: Vec::new(), perturbed: Cell::new(false) };

    let mut simplex = initial_simplex(lifted, &order)?;
    simplex.push(INF);
    for k in 0..=dim {
        let mut v: Vec<usize> = simplex.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, &x)| x).collect();
        if h.orient(&v, simplex[k]) > 0 {
            v.swap(0, 1);
        }
        let nbr = v.iter().map(|u| simplex.iter().position(|s| s == u).unwrap()).collect();
        h.facets.push(Facet { v, nbr, alive: true });
    }

    const NONE: usize = usize::MAX;
    let mut assigned = vec![NONE; npts];
    let mut outside: Vec<Vec<usize>> = vec![Vec::new(); dim + 1];
    let mut done = vec![false; npts];
    for &s in &simplex {
        if s != INF {
            done[s] = true;
        }
    }
    for &q in &order {
        if done[q] {
            continue;
        }
        if let Some(f) = (0..=dim).find(|&f| h.orient(&h.facets[f].v, q) > 0) {
            assigned[q] = f;
            outside[f].push(q);
        }
    }

    let mut seen: Vec<u32> = vec![0; dim + 1];
    let mut vis: Vec<bool> = vec![false; dim + 1];
    let mut stamp = 0u32;
    for &p in &order {
        if done[p] {
            continue;
        }
        done[p] = true;
        let f0 = assigned[p];
        if f0 == NONE {
            continue;
        }
        stamp += 1;
        let mut visible = vec![f0];
        seen[f0] = stamp;
        vis[f0] = true;
        let mut i = 0;
        while i < visible.len() {
            let f = visible[i];
            i += 1;
            for k in 0..dim {
                let nb = h.facets[f].nbr[k];
                if seen[nb] == stamp {
                    continue;
                }
                seen[nb] = stamp;
                let is_vis = h.orient(&h.facets[nb].v, p) > 0;
                vis[nb] = is_vis;
                if is_vis {
                    visible.push(nb);
                }
            }
        }
        let mut new_facets = Vec::new();
        let mut ridges: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for &f in &visible {
            for k in 0..dim {
                let nb = h.facets[f].nbr[k];
                if seen[nb] == stamp && vis[nb] {
                    continue;
                }
                let mut v = h.facets[f].v.clone();
                v[k] = p;
                let g = h.facets.len();
                let mut nbr = vec![NONE; dim];
                nbr[k] = nb;
                if let Some(j) = h.facets[nb].nbr.iter().position(|&x| x == f) {
                    h.facets[nb].nbr[j] = g;
                }
                for m in 0..dim {
                    if m == k {
                        continue;
                    }
                    let mut key: Vec<usize> = v.iter().enumerate().filter(|(i, _)| *i != m).map(|(_, &x)| x).collect();
                    key.sort_unstable();
                    if let Some((o, om)) = ridges.remove(&key) {
                        nbr[m] = o;
                        h.facets[o].nbr[om] = g;
                    } else {
                        ridges.insert(key, (g, m));
                    }
                }
                h.facets.push(Facet { v, nbr, alive: true });
                outside.push(Vec::new());
                seen.push(0);
                vis.push(false);
                new_facets.push(g);
            }
        }
        debug_assert!(ridges.is_empty(), "horizon ridges left unmatched");
        for &f in &visible {
            h.facets[f].alive = false;
            vis[f] = false;
            let orphans = std::mem::take(&mut outside[f]);
            for q in orphans {
                if done[q] {
                    continue;
                }
                assigned[q] = NONE;
                for &g in &new_facets {
                    if h.orient(&h.facets[g].v, q) > 0 {
                        assigned[q] = g;
                        outside[g].push(q);
                        break;
                    }
                }
            }
        }
    }

    let mut id = vec![NONE; h.facets.len()];
    let mut facets = Vec::new();
    for (i, f) in h.facets.iter().enumerate() {
        if f.alive && !f.v.contains(&INF) {
            id[i] = facets.len();
            facets.push(i);
        }
    }
    let neighbors = facets
        .iter()
        .map(|&i| h.facets[i].nbr.iter().map(|&nb| if id[nb] == NONE { None } else { Some(id[nb]) }).collect())
        .collect();
    let facets = facets.iter().map(|&i| h.facets[i].v.clone()).collect();
    Ok(LowerHull { facets, neighbors, perturbed: h.perturbed.get() })
}

/// Weighted Delaunay triangulation with cell adjacency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Delaunay {
    pub cells: Vec<SimplexCell>,
    /// `neighbors[c][k]`: cell across the facet opposite vertex k.
    pub neighbors: Vec<Vec<Option<usize>>>,
    pub perturbed: bool,
}

/// Rebuilds cell adjacency from shared ridges.
pub fn adjacency(cells: &[Vec<usize>]) -> Vec<Vec<Option<usize>>> {
    let mut map: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
    let mut out: Vec<Vec<Option<usize>>> = cells.iter().map(|c| vec![None; c.len()]).collect();
    for (ci, c) in cells.iter().enumerate() {
        for k in 0..c.len() {
            let mut key: Vec<usize> = c.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, &x)| x).collect();
            key.sort_unstable();
            if let Some((o, ok)) = map.remove(&key) {
                out[ci][k] = Some(o);
                out[o][ok] = Some(ci);
            } else {
                map.insert(key, (ci, k));
            }
        }
    }
    out
}

/// Weighted Delaunay triangulation of weighted points in R^{d-1}.
pub fn delaunay(points: &[WeightedPoint]) -> Result<Delaunay> {
    let n = points.first().map(|p| p.v.len()).unwrap_or(0);
    let d = n + 1;
    if points.len() < d || n == 0 {
        return Err(Error::TooFewPoints { needed: d.max(2), got: points.len() });
    }
    let lifted: Vec<Vec<f64>> = points.iter().map(lift).collect();
    let hull = lower_hull(&lifted)?;
    let mut idx: Vec<Vec<usize>> = hull
        .facets
        .into_iter()
        .map(|mut f| {
            f.sort_unstable();
            f
        })
        .collect();
    idx.sort();
    let mut cells = Vec::with_capacity(idx.len());
    let mut kept = Vec::with_capacity(idx.len());
    for f in idx {
        let vertices: Vec<Vec<f64>> = f.iter().map(|&i| points[i].v.clone()).collect();
        let volume = simplex_volume(&vertices);
        let refs: Vec<&WeightedPoint> = f.iter().map(|&i| &points[i]).collect();
        // zero-volume slivers only arise from exactly degenerate input
        let apex = match paraboloid_through(&refs) {
            Ok(a) if volume > 0.0 => a,
            _ => continue,
        };
        kept.push(f.clone());
        cells.push(SimplexCell { heights: f.iter().map(|&i| points[i].h).collect(), vertex_indices: f, vertices, apex, volume });
    }
    let neighbors = adjacency(&kept);
    Ok(Delaunay { cells, neighbors, perturbed: hull.perturbed })
}

/// Cells of the weighted Delaunay triangulation.
pub fn delaunay_cells(points: &[WeightedPoint]) -> Result<Vec<SimplexCell>> {
    Ok(delaunay(points)?.cells)
}

/// Reference enumeration: all d-subsets whose open downward paraboloid
/// region contains no other point. Exponential; meant for small inputs.
pub fn brute_force_cells(points: &[WeightedPoint]) -> Vec<Vec<usize>> {
    let n = points.first().map(|p| p.v.len()).unwrap_or(0);
    let d = n + 1;
    let mut out = Vec::new();
    let m = points.len();
    if m < d {
        return out;
    }
    let mut comb: Vec<usize> = (0..d).collect();
    loop {
        let refs: Vec<&WeightedPoint> = comb.iter().map(|&i| &points[i]).collect();
        let verts: Vec<Vec<f64>> = refs.iter().map(|p| p.v.clone()).collect();
        if simplex_volume(&verts) > 1e-12 {
            if let Ok(apex) = paraboloid_through(&refs) {
                let tol = 1e-10 * (1.0 + apex.r.abs());
                let empty = (0..m).filter(|i| !comb.contains(i)).all(|i| power(&apex.w, &points[i]) >= apex.r - tol);
                if empty {
                    out.push(comb.clone());
                }
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if comb[i] != i + m - d {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        comb[i] += 1;
        for j in i + 1..d {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

/// Euclidean distance from `x` to the simplex spanned by `verts`.
pub fn simplex_distance(x: &[f64], verts: &[Vec<f64>]) -> f64 {
    let k = verts.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << k) {
        let sub: Vec<&Vec<f64>> = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| &verts[i]).collect();
        let m = sub.len() - 1;
        let base = sub[0];
        let q: Vec<f64> = x.iter().zip(base).map(|(a, b)| a - b).collect();
        let e: Vec<Vec<f64>> = sub[1..].iter().map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
        let mut lam = vec![0.0; m];
        if m > 0 {
            let mut g = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    g[i * m + j] = e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum();
                }
                lam[i] = e[i].iter().zip(&q).map(|(a, b)| a * b).sum();
            }
            if lu_solve(&mut g, &mut lam, m).is_none() {
                continue;
            }
            if lam.iter().any(|&l| l < -1e-12) || lam.iter().sum::<f64>() > 1.0 + 1e-12 {
                continue;
            }
        }
        let mut y = base.clone();
        for i in 0..m {
            for j in 0..y.len() {
                y[j] += lam[i] * e[i][j];
            }
        }
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        best = best.min(dist);
    }
    best
}

/// Axis-aligned box used to clip unbounded Laguerre cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn cube(n: usize, half: f64) -> Self {
        BoundingBox { lo: vec![-half; n], hi: vec![half; n] }
    }
}

/// Constraint ⟨normal, w⟩ ≤ offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaguerreCell {
    pub index: usize,
    pub site: WeightedPoint,
    pub halfplanes: Vec<Halfplane>,
    pub vertices: Vec<Vec<f64>>,
    pub empty: bool,
}

/// Power-comparison constraints of site `index` against every other point.
pub fn laguerre_halfplanes(index: usize, points: &[WeightedPoint]) -> Vec<Halfplane> {
    let s = &points[index];
    let zs = lift(s)[s.v.len()];
    points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != index)
        .map(|(_, o)| Halfplane {
            normal: o.v.iter().zip(&s.v).map(|(a, b)| 2.0 * (a - b)).collect(),
            offset: lift(o)[o.v.len()] - zs,
        })
        .collect()
}

fn affine_rank(pts: &[Vec<f64>], tol: f64) -> usize {
    if pts.is_empty() {
        return 0;
    }
    let n = pts[0].len();
    let mut rows: Vec<Vec<f64>> = pts[1..].iter().map(|p| p.iter().zip(&pts[0]).map(|(a, b)| a - b).collect()).collect();
    let mut rank = 0;
    for c in 0..n {
        let piv = (rank..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs()));
        let Some(p) = piv else { break };
        if rows[p][c].abs() <= tol {
            continue;
        }
        rows.swap(rank, p);
        for r in rank + 1..rows.len() {
            let f = rows[r][c] / rows[rank][c];
            for j in c..n {
                rows[r][j] -= f * rows[rank][j];
            }
        }
        rank += 1;
    }
    rank
}

/// Laguerre cell of point `index`, clipped to `bbox`, with explicit vertices.
pub fn laguerre_cell(index: usize, points: &[WeightedPoint], bbox: &BoundingBox) -> Result<LaguerreCell> {
    let n = points[index].v.len();
    if n + 1 > 4 {
        return Err(Error::Dimension(n + 1));
    }
    let halfplanes = laguerre_halfplanes(index, points);
    let mut cons: Vec<Halfplane> = halfplanes.clone();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push(Halfplane { normal: e.clone(), offset: bbox.hi[j] });
        e[j] = -1.0;
        cons.push(Halfplane { normal: e, offset: -bbox.lo[j] });
    }
    let scale = bbox.lo.iter().chain(&bbox.hi).fold(1.0f64, |m, x| m.max(x.abs()));
    let feasible = |w: &[f64]| {
        cons.iter().all(|h| {
            let lhs: f64 = h.normal.iter().zip(w).map(|(a, b)| a * b).sum();
            let mag = h.normal.iter().map(|a| a.abs()).sum::<f64>() * scale + h.offset.abs();
            lhs <= h.offset + 1e-9 * (1.0 + mag)
        })
    };
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let m = cons.len();
    let mut comb: Vec<usize> = (0..n).collect();
    'outer: loop {
        let mut a = Vec::with_capacity(n * n);
        let mut b = Vec::with_capacity(n);
        for &c in &comb {
            a.extend_from_slice(&cons[c].normal);
            b.push(cons[c].offset);
        }
        if let Some(det) = lu_solve(&mut a, &mut b, n) {
            if det.abs() > 1e-300 && b.iter().all(|x| x.is_finite()) && feasible(&b) {
                let dup = vertices.iter().any(|v| v.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + scale)));
                if !dup {
                    vertices.push(b);
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            if comb[i] != i + m - n {
                break;
            }
            if i == 0 {
                break 'outer;
            }
        }
        comb[i] += 1;
        for j in i + 1..n {
            comb[j] = comb[j - 1] + 1;
        }
    }
    vertices.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let empty = vertices.len() < n + 1 || affine_rank(&vertices, 1e-9 * (1.0 + scale)) < n;
    if empty {
        vertices.clear();
    }
    Ok(LaguerreCell { index, site: points[index].clone(), halfplanes, vertices, empty })
}

/// Outcome of the Delaunay/Laguerre duality check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualReport {
    pub ok: bool,
    pub perturbed: bool,
    pub cells: usize,
    pub laguerre_vertices: usize,
    pub messages: Vec<String>,
}

/// Checks that every Delaunay cell's apex is a common point of its vertices'
/// Laguerre cells and that every Laguerre vertex off the clipping box is an
/// apex. In the generic case also checks that each apex is in exactly d
/// Laguerre cells.
pub fn dual_consistency_check(points: &[WeightedPoint]) -> DualReport {
    let mut rep = DualReport { ok: true, perturbed: false, cells: 0, laguerre_vertices: 0, messages: Vec::new() };
    let del = match delaunay(points) {
        Ok(d) => d,
        Err(e) => {
            rep.ok = false;
            rep.messages.push(format!("triangulation failed: {e}"));
            return rep;
        }
    };
    rep.perturbed = del.perturbed;
    rep.cells = del.cells.len();
    let n = points[0].v.len();
    let d = n + 1;
    let extent = del
        .cells
        .iter()
        .flat_map(|c| c.apex.w.iter())
        .chain(points.iter().flat_map(|p| p.v.iter()))
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let bbox = BoundingBox::cube(n, 2.0 * extent + 1.0);
    let scale = points.iter().map(|p| p.h.abs()).fold(extent * extent, f64::max);
    let tol = 1e-8 * (1.0 + scale);

    let mut lag = Vec::new();
    if d <= 4 {
        for i in 0..points.len() {
            match laguerre_cell(i, points, &bbox) {
                Ok(c) => lag.push(c),
                Err(e) => {
                    rep.ok = false;
                    rep.messages.push(format!("laguerre cell {i}: {e}"));
                    return rep;
                }
            }
        }
    }
    for (ci, c) in del.cells.iter().enumerate() {
        let pw: Vec<f64> = points.iter().map(|p| power(&c.apex.w, p)).collect();
        let min = pw.iter().copied().fold(f64::INFINITY, f64::min);
        for &v in &c.vertex_indices {
            if (pw[v] - c.apex.r).abs() > tol || pw[v] > min + tol {
                rep.ok = false;
                rep.messages.push(format!("cell {ci}: apex not in the Laguerre cell of vertex {v}"));
            }
            if !lag.is_empty() && lag[v].empty {
                rep.ok = false;
                rep.messages.push(format!("cell {ci}: vertex {v} has an empty Laguerre cell"));
            }
        }
        if !del.perturbed {
            let touching = pw.iter().filter(|&&x| x <= min + tol).count();
            if touching != d {
                rep.ok = false;
                rep.messages.push(format!("cell {ci}: apex lies in {touching} Laguerre cells, expected {d}"));
            }
        }
    }
    let on_box = |w: &[f64]| w.iter().zip(bbox.lo.iter().zip(&bbox.hi)).any(|(x, (l, h))| (x - l).abs() <= tol || (x - h).abs() <= tol);
    for c in &lag {
        for v in &c.vertices {
            if on_box(v) {
                continue;
            }
            rep.laguerre_vertices += 1;
            let hit = del.cells.iter().any(|cell| cell.apex.w.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-6 * (1.0 + extent)));
            if !hit {
                rep.ok = false;
                rep.messages.push(format!("Laguerre vertex {v:?} of site {} is not a cell apex", c.index));
            }
        }
    }
    rep
}

/// Combinatorial normality: every ridge is shared by at most two cells and
/// adjacency is symmetric.
pub fn check_face_to_face(del: &Delaunay) -> bool {
    let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
    for c in &del.cells {
        for k in 0..c.vertex_indices.len() {
            let key: Vec<usize> = c.vertex_indices.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, &x)| x).collect();
            *count.entry(key).or_default() += 1;
        }
    }
    if count.values().any(|&c| c > 2) {
        return false;
    }
    del.neighbors.iter().enumerate().all(|(ci, nb)| nb.iter().all(|o| o.map_or(true, |o| del.neighbors[o].contains(&Some(ci)))))
}

/// Sign of a spatial orientation, exposed for callers that need it.
pub fn spatial_orientation(pts: &[&[f64]]) -> i8 {
    let rows: Vec<Row> = pts.iter().enumerate().map(|(i, p)| Row { coords: p, point: Some(i) }).collect();
    orient_exact(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(v: &[f64], h: f64) -> WeightedPoint {
        WeightedPoint::new(v.to_vec(), h)
    }

    #[test]
    fn power_and_lift_examples() {
        assert_eq!(power(&[0.0], &wp(&[0.0], 5.0)), 5.0);
        assert_eq!(power(&[3.0], &wp(&[1.0], 0.0)), 4.0);
        assert_eq!(power(&[1.0, 1.0], &wp(&[0.0, 0.0], -1.0)), 1.0);
        assert_eq!(lift(&wp(&[0.0], 0.0)), vec![0.0, 0.0]);
        assert_eq!(lift(&wp(&[1.0], 2.0)), vec![1.0, 3.0]);
        assert_eq!(lift(&wp(&[1.0, 2.0], -5.0)), vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn apex_examples() {
        let a = wp(&[-1.0], 0.0);
        let b = wp(&[1.0], 0.0);
        let x = paraboloid_through(&[&a, &b]).unwrap();
        assert!(x.w[0].abs() < 1e-15 && (x.r - 1.0).abs() < 1e-15);
        let a = wp(&[0.0], 0.0);
        let b = wp(&[2.0], 0.0);
        let x = paraboloid_through(&[&a, &b]).unwrap();
        assert!((x.w[0] - 1.0).abs() < 1e-15 && (x.r - 1.0).abs() < 1e-15);
        let p = [wp(&[0.0, 0.0], 0.0), wp(&[2.0, 0.0], 0.0), wp(&[0.0, 2.0], 0.0)];
        let x = paraboloid_through(&[&p[0], &p[1], &p[2]]).unwrap();
        assert!((x.w[0] - 1.0).abs() < 1e-14 && (x.w[1] - 1.0).abs() < 1e-14 && (x.r - 2.0).abs() < 1e-14);
        let c = wp(&[1.0, 1.0], 0.0);
        let e = paraboloid_through(&[&p[0], &p[1], &wp(&[4.0, 1.0], 1.0)]).unwrap();
        assert!(e.r.is_finite());
        assert!(matches!(paraboloid_through(&[&p[0], &c, &wp(&[2.0, 2.0], 0.0)]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn exact_apex_matches_float() {
        let p = [wp(&[0.3, -0.7], 0.25), wp(&[1.9, 0.1], -1.5), wp(&[-0.4, 2.2], 0.75)];
        let r = [&p[0], &p[1], &p[2]];
        let a = paraboloid_through(&r).unwrap();
        let b = apex_exact(&r).unwrap();
        assert!((a.r - b.r).abs() < 1e-12);
        for j in 0..2 {
            assert!((a.w[j] - b.w[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_hull_examples() {
        let h = lower_hull(&[vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let mut f: Vec<Vec<usize>> = h.facets.iter().map(|f| { let mut f = f.clone(); f.sort(); f }).collect();
        f.sort();
        assert_eq!(f, vec![vec![0, 1], vec![1, 2]]);
        let h = lower_hull(&[vec![-1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(h.facets.len(), 1);
        let h = lower_hull(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.3, 0.3, 5.0]]).unwrap();
        assert_eq!(h.facets.len(), 1);
        assert!(matches!(lower_hull(&[vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1.0]]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn delaunay_examples() {
        let p = vec![wp(&[0.0], 0.0), wp(&[1.0], 0.0), wp(&[2.0], 0.0)];
        let c: Vec<Vec<usize>> = delaunay_cells(&p).unwrap().into_iter().map(|c| c.vertex_indices).collect();
        assert_eq!(c, vec![vec![0, 1], vec![1, 2]]);
        let p = vec![wp(&[0.0], 0.0), wp(&[2.0], 0.0), wp(&[1.0], 10.0)];
        let c: Vec<Vec<usize>> = delaunay_cells(&p).unwrap().into_iter().map(|c| c.vertex_indices).collect();
        assert_eq!(c, vec![vec![0, 1]]);
        let p = vec![wp(&[0.0, 0.0], 0.0), wp(&[1.0, 0.0], 0.3), wp(&[0.0, 1.0], -0.2)];
        assert_eq!(delaunay_cells(&p).unwrap().len(), 1);
        assert!(matches!(delaunay_cells(&p[..2]), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn degenerate_grid_is_triangulated() {
        // a 4x4 grid with equal weights: every square is co-circular
        let mut p = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                p.push(wp(&[i as f64, j as f64], 0.0));
            }
        }
        let del = delaunay(&p).unwrap();
        assert!(del.perturbed);
        assert_eq!(del.cells.len(), 18);
        let area: f64 = del.cells.iter().map(|c| c.volume).sum();
        assert!((area - 9.0).abs() < 1e-12);
        assert!(check_face_to_face(&del));
    }

    #[test]
    fn growth_height_examples() {
        let p = vec![wp(&[0.0], 0.0), wp(&[2.0], 0.0)];
        assert_eq!(growth_boundary_height(&[1.0], &p).unwrap(), 1.0);
        assert_eq!(growth_boundary_height(&[0.0], &[wp(&[0.0], 3.0), wp(&[1.0], 0.0)]).unwrap(), 1.0);
        assert!(growth_boundary_height(&[0.0], &[]).is_err());
    }

    #[test]
    fn laguerre_examples() {
        let bbox = BoundingBox::cube(1, 10.0);
        let p = vec![wp(&[0.0], 0.0), wp(&[2.0], 0.0)];
        let c = laguerre_cell(0, &p, &bbox).unwrap();
        assert_eq!(c.vertices, vec![vec![-10.0], vec![1.0]]);
        let p = vec![wp(&[0.0], 0.0), wp(&[2.0], 0.0), wp(&[1.0], 10.0)];
        assert!(laguerre_cell(2, &p, &bbox).unwrap().empty);
        let c = laguerre_cell(0, &[wp(&[0.0, 0.0], 0.0)], &BoundingBox::cube(2, 1.0)).unwrap();
        assert_eq!(c.vertices.len(), 4);
        assert!(laguerre_cell(0, &[wp(&[0.0; 4], 0.0)], &BoundingBox::cube(4, 1.0)).is_err());
    }

    #[test]
    fn dual_check_examples() {
        let p = vec![wp(&[0.0, 0.0], 0.0), wp(&[1.0, 0.0], 0.3), wp(&[0.0, 1.0], -0.2)];
        let r = dual_consistency_check(&p);
        assert!(r.ok, "{:?}", r.messages);
        let p = vec![wp(&[0.0], 0.0), wp(&[0.0], 0.0), wp(&[1.0], 0.5), wp(&[-1.5], 0.2)];
        let r = dual_consistency_check(&p);
        assert!(r.perturbed);
        assert!(r.ok, "{:?}", r.messages);
    }

    #[test]
    fn simplex_distance_cases() {
        let t = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(simplex_distance(&[0.2, 0.2], &t), 0.0);
        assert!((simplex_distance(&[-1.0, 0.5], &t) - 1.0).abs() < 1e-15);
        assert!((simplex_distance(&[1.0, 1.0], &t) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((simplex_distance(&[-3.0, -4.0], &t) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn big_ratio_conversion() {
        let v = ratio_to_f64(&BigInt::from(1), &BigInt::from(3));
        assert!((v - 1.0 / 3.0).abs() < 1e-16);
        let v = ratio_to_f64(&BigInt::from(-10), &BigInt::from(4));
        assert_eq!(v, -2.5);
    }
}
