//! Special functions, model constants and adaptive quadrature.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

pub use statrs::function::gamma::ln_gamma;

/// Regularized upper incomplete gamma Q(a, x), extended by Q(a, x) = 1 for x ≤ 0.
pub fn gamma_ur(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        statrs::function::gamma::gamma_ur(a, x)
    }
}

/// Regularized lower incomplete gamma P(a, x), extended by P(a, x) = 0 for x ≤ 0.
pub fn gamma_lr(a: f64, x: f64) -> f64 {
    1.0 - gamma_ur(a, x)
}

/// ln of the volume of the unit ball in R^n.
pub fn ln_kappa(n: usize) -> f64 {
    0.5 * n as f64 * PI.ln() - ln_gamma(0.5 * n as f64 + 1.0)
}

/// Volume of the unit ball in R^n.
pub fn kappa(n: usize) -> f64 {
    ln_kappa(n).exp()
}

/// ln c_{d,beta} = ln Gamma(d/2 + beta + 1) - (d/2) ln pi - ln Gamma(beta + 1).
pub fn ln_c_beta(d: usize, beta: f64) -> f64 {
    let h = 0.5 * d as f64;
    ln_gamma(h + beta + 1.0) - h * PI.ln() - ln_gamma(beta + 1.0)
}

/// ln c'_{d,beta} = ln Gamma(beta) - (d/2) ln pi - ln Gamma(beta - d/2).
pub fn ln_c_beta_prime(d: usize, beta: f64) -> f64 {
    let h = 0.5 * d as f64;
    ln_gamma(beta) - h * PI.ln() - ln_gamma(beta - h)
}

/// ln of the Beta function.
pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// ln n!
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn adapt_finite<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, rel: f64, abs: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val: v, err: e });
    let (mut total, mut err) = (v, e);
    let mut iters = 0;
    while err > abs.max(rel * total.abs()) && iters < 5000 {
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
        iters += 1;
    }
    // re-sum to shed accumulated cancellation
    let total: f64 = heap.iter().map(|p| p.val).sum();
    let err: f64 = heap.iter().map(|p| p.err).sum();
    (total, err)
}

/// Adaptive Gauss-Kronrod (7/15) integral of `f` over [a, b]; either end
/// may be infinite. Returns (value, error estimate).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    integrate_dyn(&f, a, b, rel_tol)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    let abs_tol = 1e-300;
    if a > b {
        let (v, e) = integrate_dyn(f, b, a, rel_tol);
        return (-v, e);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt_finite(f, a, b, rel_tol, abs_tol),
        (false, true) => {
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = b - (1.0 - u) / u;
                let y = f(x) / (u * u);
                if y.is_finite() { y } else { 0.0 }
            };
            adapt_finite(&g, 0.0, 1.0, rel_tol, abs_tol)
        }
        (true, false) => {
            let g = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = a + (1.0 - u) / u;
                let y = f(x) / (u * u);
                if y.is_finite() { y } else { 0.0 }
            };
            adapt_finite(&g, 0.0, 1.0, rel_tol, abs_tol)
        }
        (false, false) => {
            let (v1, e1) = integrate_dyn(f, f64::NEG_INFINITY, 0.0, rel_tol);
            let (v2, e2) = integrate_dyn(f, 0.0, f64::INFINITY, rel_tol);
            (v1 + v2, e1 + e2)
        }
    }
}

/// Numerically stable ln(e^a + e^b).
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
