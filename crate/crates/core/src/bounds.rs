//! Tail bounds for the height of the growth-process boundary over a ball,
//! and their inversions.
//!
//! Upper bounds (`1x`) control P(sup over B_A of the boundary height > T);
//! lower bounds (`2x`) control P(inf over B_A < t). Beta and beta-prime
//! bounds refer to the rescaled processes with intensity sqrt(2 beta).

use crate::error::{Error, Result};
use crate::point_processes::ModelKind;
use crate::special::ln_gamma;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "1a")]
    B1a,
    #[serde(rename = "1b")]
    B1b,
    #[serde(rename = "1c")]
    B1c,
    #[serde(rename = "2a")]
    B2a,
    #[serde(rename = "2b")]
    B2b,
    #[serde(rename = "2c")]
    B2c,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [BoundKind::B1a, BoundKind::B1b, BoundKind::B1c, BoundKind::B2a, BoundKind::B2b, BoundKind::B2c];

    pub fn model(self) -> ModelKind {
        match self {
            BoundKind::B1a | BoundKind::B2a => ModelKind::Beta,
            BoundKind::B1b | BoundKind::B2b => ModelKind::BetaPrime,
            BoundKind::B1c | BoundKind::B2c => ModelKind::Gaussian,
        }
    }

    /// True for the bounds on the supremum.
    pub fn is_upper(self) -> bool {
        matches!(self, BoundKind::B1a | BoundKind::B1b | BoundKind::B1c)
    }

    pub fn for_model(kind: ModelKind, upper: bool) -> Self {
        match (kind, upper) {
            (ModelKind::Beta, true) => BoundKind::B1a,
            (ModelKind::BetaPrime, true) => BoundKind::B1b,
            (ModelKind::Gaussian, true) => BoundKind::B1c,
            (ModelKind::Beta, false) => BoundKind::B2a,
            (ModelKind::BetaPrime, false) => BoundKind::B2b,
            (ModelKind::Gaussian, false) => BoundKind::B2c,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::B1a => "1a",
            BoundKind::B1b => "1b",
            BoundKind::B1c => "1c",
            BoundKind::B2a => "2a",
            BoundKind::B2b => "2b",
            BoundKind::B2c => "2c",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown bound '{s}'")))
    }
}

/// Arguments of a bound evaluation. `level` is T for upper bounds and t
/// for lower bounds; `beta` is the model exponent and `beta0` the free
/// exponent of bounds 1a and 2b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub d: usize,
    pub a: f64,
    pub level: f64,
    pub beta: f64,
    pub beta0: f64,
}

fn ln_g(d: usize) -> f64 {
    ln_gamma((d as f64 + 1.0) / 2.0)
}

fn check(which: BoundKind, q: &BoundQuery) -> Result<()> {
    if q.d < 2 {
        return Err(Error::Parameter(format!("d = {} must be at least 2", q.d)));
    }
    if !(q.a > 0.0) {
        return Err(Error::Parameter(format!("A = {} must be positive", q.a)));
    }
    let half = (q.d as f64 + 1.0) / 2.0;
    match which {
        BoundKind::B1a if !(q.beta0 >= 1.0 && q.beta >= q.beta0) => {
            Err(Error::Parameter(format!("bound 1a needs beta >= beta0 >= 1 (beta = {}, beta0 = {})", q.beta, q.beta0)))
        }
        BoundKind::B1b if !(q.beta > half) => Err(Error::Parameter(format!("bound 1b needs beta > (d+1)/2 (beta = {})", q.beta))),
        BoundKind::B2a if !(q.beta > 1.0) => Err(Error::Parameter(format!("bound 2a needs beta > 1 (beta = {})", q.beta))),
        BoundKind::B2b if !(q.beta0 > half && q.beta >= q.beta0) => {
            Err(Error::Parameter(format!("bound 2b needs beta >= beta0 > (d+1)/2 (beta = {}, beta0 = {})", q.beta, q.beta0)))
        }
        _ => Ok(()),
    }
}

/// ln of the coefficient multiplying the level-dependent factor in the
/// exponent of each bound.
fn ln_coef(which: BoundKind, q: &BoundQuery) -> f64 {
    let d = q.d as f64;
    let n = d - 1.0;
    let sp = 0.5 * PI.ln();
    match which {
        BoundKind::B1a => n * q.a.ln() - (0.5 * d * 2f64.ln() + sp + ln_g(q.d)),
        BoundKind::B1b => n * q.a.ln() - (0.5 * d * (2.0 * (d + 1.0)).ln() + sp + ln_g(q.d)),
        BoundKind::B1c => n * q.a.ln() - ((0.5 * d - 1.0) * 2f64.ln() + sp + ln_g(q.d)),
        BoundKind::B2a => 2f64.ln() + 0.5 * d * (0.5 * d + 1.0).ln() - sp + n * (q.a + 1.0).ln(),
        BoundKind::B2b => {
            let b0 = q.beta0;
            2f64.ln() + b0 * (2.0 * b0).ln() + n * (q.a + 1.0).ln() - sp - 0.5 * (d + 1.0) * (2.0 * b0 - d - 1.0).ln()
        }
        BoundKind::B2c => 2f64.ln() - sp + n * (q.a + 1.0).ln(),
    }
}

/// ln of the level-dependent factor; `None` when the bound's case split
/// yields a constant (returned as the second value).
fn ln_factor(which: BoundKind, q: &BoundQuery) -> std::result::Result<f64, f64> {
    let a2 = q.a * q.a;
    let x = q.level;
    let d = q.d as f64;
    match which {
        BoundKind::B1a => {
            if x <= 4.0 * a2 {
                Err(1.0)
            } else {
                Ok(q.beta0 * (1.0 + (x - 4.0 * a2) / (2.0 * q.beta0)).ln())
            }
        }
        BoundKind::B1b => {
            if x >= 4.0 * a2 + 2.0 * q.beta {
                Err(0.0)
            } else {
                Ok(0.5 * x - 2.0 * a2)
            }
        }
        BoundKind::B1c => Ok(0.5 * x - 2.0 * a2),
        BoundKind::B2a | BoundKind::B2c => Ok(0.5 * x),
        BoundKind::B2b => {
            if x >= 0.0 {
                Err(1.0)
            } else {
                Ok((-q.beta0 + 0.5 * (d + 1.0)) * (2.0 * q.beta0 - x).ln())
            }
        }
    }
}

/// Bound value with the void-probability exponent multiplied by `mult`
/// (the ratio of the actual intensity to the reference intensity).
pub fn growth_bound_scaled(which: BoundKind, q: &BoundQuery, mult: f64) -> Result<f64> {
    check(which, q)?;
    let e = match ln_factor(which, q) {
        Err(c) => return Ok(c),
        Ok(f) => (ln_coef(which, q) + f).exp() * mult,
    };
    Ok(if which.is_upper() { (-e).exp() } else { -(-e).exp_m1() })
}

/// Evaluates one of the six bounds at the reference intensity.
pub fn growth_bound(which: BoundKind, q: &BoundQuery) -> Result<f64> {
    growth_bound_scaled(which, q, 1.0)
}

/// Smallest level making the bound at most `delta` (upper bounds: smallest
/// T; lower bounds: largest t), at intensity multiplier `mult`.
pub fn invert_bound(which: BoundKind, d: usize, a: f64, beta: f64, beta0: f64, delta: f64, mult: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("target probability {delta} must lie in (0, 1)")));
    }
    let q = BoundQuery { d, a, level: 0.0, beta, beta0 };
    check(which, &q)?;
    let lc = ln_coef(which, &q) + mult.ln();
    let a2 = a * a;
    let dd = d as f64;
    if which.is_upper() {
        // need coef * factor >= ln(1/delta)
        let need = (1.0 / delta).ln().ln() - lc;
        match which {
            BoundKind::B1c => Ok(4.0 * a2 + 2.0 * need),
            BoundKind::B1b => Ok((4.0 * a2 + 2.0 * need).min(4.0 * a2 + 2.0 * beta)),
            BoundKind::B1a => {
                let g = (need / beta0).exp();
                let x = 2.0 * beta0 * (g - 1.0);
                // just above 4A^2 the factor is already 1
                Ok(4.0 * a2 + x.max(1e-9 * (1.0 + 4.0 * a2)))
            }
            _ => unreachable!(),
        }
    } else {
        // need coef * factor <= -ln(1 - delta)
        let room = (-(-delta).ln_1p()).ln() - lc;
        match which {
            BoundKind::B2a | BoundKind::B2c => Ok(2.0 * room),
            BoundKind::B2b => {
                let k = beta0 - 0.5 * (dd + 1.0);
                let t = 2.0 * beta0 - (-room / k).exp();
                Ok(t.min(-1e-12))
            }
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(d: usize, a: f64, level: f64, beta: f64, beta0: f64) -> BoundQuery {
        BoundQuery { d, a, level, beta, beta0 }
    }

    #[test]
    fn bound_1c_at_the_reference_point() {
        let v = growth_bound(BoundKind::B1c, &q(2, 1.0, 4.0, 0.0, 0.0)).unwrap();
        assert!((v - (-2.0 / PI).exp()).abs() < 1e-14);
    }

    #[test]
    fn bound_2c_example() {
        let v = growth_bound(BoundKind::B2c, &q(2, 1.0, -10.0, 0.0, 0.0)).unwrap();
        let want = 1.0 - (-(2.0 / PI.sqrt()) * 2.0 * (-5.0f64).exp()).exp();
        assert!((v - want).abs() < 1e-15);
        // the exponent is 0.01521; the probability itself is 0.01509
        assert!((v - 0.01509).abs() < 1e-5);
        assert!(v <= 0.016);
    }

    #[test]
    fn case_splits() {
        assert_eq!(growth_bound(BoundKind::B1a, &q(3, 1.0, 4.0, 2.0, 1.0)).unwrap(), 1.0);
        assert_eq!(growth_bound(BoundKind::B1a, &q(3, 1.0, 3.0, 2.0, 1.0)).unwrap(), 1.0);
        assert_eq!(growth_bound(BoundKind::B1b, &q(3, 1.0, 4.0 + 10.0, 5.0, 0.0)).unwrap(), 0.0);
        assert_eq!(growth_bound(BoundKind::B2b, &q(3, 1.0, 0.0, 5.0, 5.0)).unwrap(), 1.0);
        assert!(growth_bound(BoundKind::B1a, &q(3, 1.0, 5.0, 2.0, 0.5)).is_err());
        assert!(growth_bound(BoundKind::B1b, &q(3, 1.0, 5.0, 2.0, 0.0)).is_err());
        assert!(growth_bound(BoundKind::B2a, &q(3, 1.0, 5.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn independent_formulas() {
        // direct transcriptions, d = 3
        let g = ln_gamma(2.0).exp();
        let (a, t) = (0.7f64, 2.5f64);
        let b = 3.0f64;
        let v1a = (-(a * a / (2f64.powf(1.5) * PI.sqrt() * g)) * (1.0 + (t - 4.0 * a * a) / (2.0 * b)).powf(b)).exp();
        assert!((growth_bound(BoundKind::B1a, &q(3, a, t, b, b)).unwrap() - v1a).abs() < 1e-14);
        let v1b = (-(a * a / (8f64.powf(1.5) * PI.sqrt() * g)) * (t / 2.0 - 2.0 * a * a).exp()).exp();
        assert!((growth_bound(BoundKind::B1b, &q(3, a, t, b, 0.0)).unwrap() - v1b).abs() < 1e-14);
        let s = -3.0f64;
        let v2a = 1.0 - (-(2.0 * 2.5f64.powf(1.5) / PI.sqrt()) * (a + 1.0).powi(2) * (s / 2.0).exp()).exp();
        assert!((growth_bound(BoundKind::B2a, &q(3, a, s, b, 0.0)).unwrap() - v2a).abs() < 1e-14);
        let v2b = 1.0 - (-(2.0 * (2.0 * b).powf(b) * (a + 1.0).powi(2) / (PI.sqrt() * (2.0 * b - 4.0).powf(2.0))) * (2.0 * b - s).powf(-b + 2.0)).exp();
        assert!((growth_bound(BoundKind::B2b, &q(3, a, s, b, b)).unwrap() - v2b).abs() < 1e-13);
    }

    #[test]
    fn inversions_hit_their_targets() {
        for which in BoundKind::ALL {
            for &a in &[0.5, 1.0, 3.0] {
                for &delta in &[0.3, 0.05, 1e-4] {
                    let (beta, beta0) = match which.model() {
                        ModelKind::Beta => (4.0, 4.0),
                        ModelKind::BetaPrime => (6.0, 6.0),
                        ModelKind::Gaussian => (0.0, 0.0),
                    };
                    let lvl = invert_bound(which, 3, a, beta, beta0, delta, 1.0).unwrap();
                    let v = growth_bound(which, &q(3, a, lvl, beta, beta0)).unwrap();
                    assert!(v <= delta * (1.0 + 1e-9), "{which} a={a} delta={delta}: level {lvl} gives {v}");
                }
            }
        }
    }

    #[test]
    fn monotone_in_level() {
        let mut prev = 1.0;
        for i in 0..50 {
            let t = 4.0 + 0.2 * i as f64;
            let v = growth_bound(BoundKind::B1c, &q(3, 1.0, t, 0.0, 0.0)).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }
}
