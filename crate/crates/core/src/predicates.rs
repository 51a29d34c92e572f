//! Orientation predicates: floating-point filter, exact big-integer
//! fallback, and simulation of simplicity for exact ties.
//!
//! Rows are homogeneous: a finite point contributes `[x, 1]`, a direction
//! (point at infinity) contributes `[u, 0]`. The orientation of D+1 rows in
//! R^D is the sign of the (D+1)x(D+1) determinant.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

/// One row of an orientation determinant.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub coords: &'a [f64],
    /// Global index of a finite point (perturbed symbolically), or `None`
    /// for a direction row.
    pub point: Option<usize>,
}

fn decode(x: f64) -> (i64, i32) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1i64 << 52), exp - 1075) };
    (sign * m, e)
}

/// Exact sign of the determinant of a k x k row-major matrix of finite floats.
pub fn exact_det_sign(m: &[f64], k: usize) -> i8 {
    if k == 0 {
        return 1;
    }
    let parts: Vec<(i64, i32)> = m.iter().map(|&x| decode(x)).collect();
    let emin = parts.iter().filter(|p| p.0 != 0).map(|p| p.1).min().unwrap_or(0);
    let mut a: Vec<BigInt> = parts
        .iter()
        .map(|&(mant, e)| if mant == 0 { BigInt::zero() } else { BigInt::from(mant) << (e - emin) as usize })
        .collect();
    let mut sign = 1i8;
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
                None => return 0,
            }
        }
        if i + 1 == k {
            break;
        }
        for r in i + 1..k {
            for c in i + 1..k {
                let v = (&a[r * k + c] * &a[i * k + i] - &a[r * k + i] * &a[i * k + c]) / &prev;
                a[r * k + c] = v;
            }
        }
        prev = a[i * k + i].clone();
    }
    let last = &a[k * k - 1];
    if last.is_zero() {
        0
    } else if last.is_positive() {
        sign
    } else {
        -sign
    }
}

fn lu_det(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for i in 0..k {
        let mut p = i;
        for r in i + 1..k {
            if m[r * k + i].abs() > m[p * k + i].abs() {
                p = r;
            }
        }
        if m[p * k + i] == 0.0 {
            return 0.0;
        }
        if p != i {
            for c in 0..k {
                m.swap(i * k + c, p * k + c);
            }
            det = -det;
        }
        let piv = m[i * k + i];
        det *= piv;
        for r in i + 1..k {
            let f = m[r * k + i] / piv;
            if f != 0.0 {
                for c in i + 1..k {
                    m[r * k + c] -= f * m[i * k + c];
                }
            }
        }
    }
    det
}

fn homogeneous(rows: &[Row]) -> (Vec<f64>, usize) {
    let k = rows.len();
    let mut m = Vec::with_capacity(k * k);
    for r in rows {
        m.extend_from_slice(r.coords);
        m.push(if r.point.is_some() { 1.0 } else { 0.0 });
    }
    (m, k)
}

/// Sign of the orientation determinant without perturbation (0 on exact ties).
pub fn orient_exact(rows: &[Row]) -> i8 {
    let k = rows.len();
    let dim = k - 1;
    debug_assert!(rows.iter().all(|r| r.coords.len() == dim));
    assert!(dim <= 8, "orientation supports at most 8 dimensions");
    if let Some(base) = rows.iter().position(|r| r.point.is_some()) {
        let b = rows[base].coords;
        let mut buf = [0.0f64; 64];
        let m = &mut buf[..dim * dim];
        let mut bound = 1.0;
        let mut at = 0;
        for (i, r) in rows.iter().enumerate() {
            if i == base {
                continue;
            }
            let mut nrm = 0.0;
            for j in 0..dim {
                let x = if r.point.is_some() { r.coords[j] - b[j] } else { r.coords[j] };
                nrm += x * x;
                m[at] = x;
                at += 1;
            }
            bound *= nrm.sqrt();
        }
        let det = lu_det(m, dim);
        let thr = (8.0 * (dim * dim * dim) as f64 + 8.0) * f64::EPSILON * bound;
        if det.abs() > thr {
            let flip = (base + dim) % 2 == 1;
            let s = if det > 0.0 { 1 } else { -1 };
            return if flip { -s } else { s };
        }
    }
    let (m, k) = homogeneous(rows);
    exact_det_sign(&m, k)
}

struct Term {
    /// perturbation exponents, descending
    key: Vec<u64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn cmp_keys(a: &[u64], b: &[u64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn enumerate_terms(
    prow: &[usize],
    gidx: &[usize],
    dim: usize,
    pos: usize,
    used: &mut Vec<bool>,
    cur: &mut Vec<(usize, usize)>,
    out: &mut Vec<Term>,
) {
    if pos == prow.len() {
        if cur.is_empty() {
            return;
        }
        let mut key: Vec<u64> = cur.iter().map(|&(r, c)| (gidx[r] * dim + c) as u64).collect();
        key.sort_unstable_by(|a, b| b.cmp(a));
        out.push(Term { key, rows: cur.iter().map(|x| x.0).collect(), cols: cur.iter().map(|x| x.1).collect() });
        return;
    }
    enumerate_terms(prow, gidx, dim, pos + 1, used, cur, out);
    for c in 0..dim {
        if !used[c] {
            used[c] = true;
            cur.push((prow[pos], c));
            enumerate_terms(prow, gidx, dim, pos + 1, used, cur, out);
            cur.pop();
            used[c] = false;
        }
    }
}

/// Orientation under simulation of simplicity: coordinate j of the point
/// with global index g is perturbed by eps^(2^(g*D + j)). Never returns 0
/// when the finite points carry distinct indices. The flag reports whether
/// the perturbation decided the sign.
pub fn orient_sos(rows: &[Row]) -> (i8, bool) {
    let s = orient_exact(rows);
    if s != 0 {
        return (s, false);
    }
    let (m, k) = homogeneous(rows);
    let dim = k - 1;
    let prow: Vec<usize> = (0..k).filter(|&i| rows[i].point.is_some()).collect();
    let gidx: Vec<usize> = rows.iter().map(|r| r.point.unwrap_or(usize::MAX)).collect();
    let mut terms = Vec::new();
    enumerate_terms(&prow, &gidx, dim, 0, &mut vec![false; dim], &mut Vec::new(), &mut terms);
    // the smallest binary exponent sum dominates
    terms.sort_by(|a, b| cmp_keys(&a.key, &b.key));
    for t in &terms {
        let keep_r: Vec<usize> = (0..k).filter(|r| !t.rows.contains(r)).collect();
        let keep_c: Vec<usize> = (0..k).filter(|c| !t.cols.contains(c)).collect();
        let sub: Vec<f64> = keep_r.iter().flat_map(|&r| keep_c.iter().map(|&c| m[r * k + c]).collect::<Vec<_>>()).collect();
        let minor = exact_det_sign(&sub, keep_r.len());
        if minor == 0 {
            continue;
        }
        // sign of the row->column bijection, ordered by row
        let mut pairs: Vec<(usize, usize)> = t.rows.iter().copied().zip(t.cols.iter().copied()).collect();
        pairs.sort_unstable();
        let mut inv = 0;
        for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                if pairs[a].1 > pairs[b].1 {
                    inv += 1;
                }
            }
        }
        let parity = t.rows.iter().sum::<usize>() + t.cols.iter().sum::<usize>() + inv;
        let sign = if parity % 2 == 0 { minor } else { -minor };
        return (sign, true);
    }
    (0, true)
}

#[inline]

/// Coefficients of det(M + E) in the entries of E, for testing the expansion.
#[cfg(test)]
fn expansion_value(m: &[f64], e: &[f64], rows: &[Row]) -> f64 {
    let k = rows.len();
    let dim = k - 1;
    let prow: Vec<usize> = (0..k).filter(|&i| rows[i].point.is_some()).collect();
    let gidx: Vec<usize> = rows.iter().map(|r| r.point.unwrap_or(usize::MAX)).collect();
    let mut terms = Vec::new();
    enumerate_terms(&prow, &gidx, dim, 0, &mut vec![false; dim], &mut Vec::new(), &mut terms);
    let mut mm = m.to_vec();
    let mut total = lu_det(&mut mm, k);
    for t in &terms {
        let keep_r: Vec<usize> = (0..k).filter(|r| !t.rows.contains(r)).collect();
        let keep_c: Vec<usize> = (0..k).filter(|c| !t.cols.contains(c)).collect();
        let mut sub: Vec<f64> = keep_r.iter().flat_map(|&r| keep_c.iter().map(|&c| m[r * k + c]).collect::<Vec<_>>()).collect();
        let minor = if keep_r.is_empty() { 1.0 } else { lu_det(&mut sub, keep_r.len()) };
        let mut pairs: Vec<(usize, usize)> = t.rows.iter().copied().zip(t.cols.iter().copied()).collect();
        pairs.sort_unstable();
        let mut inv = 0;
        for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                if pairs[a].1 > pairs[b].1 {
                    inv += 1;
                }
            }
        }
        let parity = t.rows.iter().sum::<usize>() + t.cols.iter().sum::<usize>() + inv;
        let prod: f64 = pairs.iter().map(|&(r, c)| e[r * k + c]).product();
        total += if parity % 2 == 0 { prod * minor } else { -prod * minor };
    }
    total
}
