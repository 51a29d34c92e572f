//! Small statistical toolkit: summaries, ratio estimators, KS and chi-square tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::special::gamma_ur;

/// Point estimate with standard error and sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Signed distance to `target` in standard errors (0 when both agree exactly).
    pub fn z(&self, target: f64) -> f64 {
        let diff = self.value - target;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN, n };
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { value: m, stderr: f64::INFINITY, n };
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate { value: m, stderr: (v / n as f64).sqrt(), n }
}

/// Mean with a batch-means standard error, for autocorrelated chains.
pub fn batch_mean_se(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let b = batches.max(2).min(n.max(1));
    let len = n / b;
    if len == 0 {
        return mean_se(xs);
    }
    let means: Vec<f64> = (0..b)
        .map(|k| xs[k * len..(k + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let e = mean_se(&means);
    Estimate { value: xs.iter().sum::<f64>() / n as f64, stderr: e.stderr, n }
}

/// Ratio of sums sum(num)/sum(den) with delta-method standard error over
/// independent replicates (num_i, den_i).
pub fn ratio_se(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len();
    let sn: f64 = num.iter().sum();
    let sd: f64 = den.iter().sum();
    let r = sn / sd;
    if n < 2 {
        return Estimate { value: r, stderr: f64::INFINITY, n };
    }
    let mean_d = sd / n as f64;
    let var = num
        .iter()
        .zip(den)
        .map(|(a, b)| (a - r * b).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    Estimate { value: r, stderr: (var / n as f64).sqrt() / mean_d, n }
}

/// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test; returns (D, asymptotic p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    (d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d))
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> (f64, f64) {
    let mut x = xs.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, xi) in x.iter().enumerate() {
        let f = cdf(*xi);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sq = n.sqrt();
    (d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d))
}

/// Pearson chi-square test of independence on a contingency table; p-value.
pub fn chi2_independence(table: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let ncol = table.first().map_or(0, |r| r.len());
    let cols: Vec<f64> = (0..ncol).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    let keep_r: Vec<usize> = (0..rows.len()).filter(|&i| rows[i] > 0.0).collect();
    let keep_c: Vec<usize> = (0..ncol).filter(|&j| cols[j] > 0.0).collect();
    let mut stat = 0.0;
    for &i in &keep_r {
        for &j in &keep_c {
            let e = rows[i] * cols[j] / total;
            stat += (table[i][j] - e).powi(2) / e;
        }
    }
    let df = ((keep_r.len().max(1) - 1) * (keep_c.len().max(1) - 1)).max(1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Smallest k with P(N <= k) >= u for N ~ Poisson(mu). Monotone in both
/// arguments, so equal uniforms couple counts across intensities.
pub fn poisson_quantile(mu: f64, u: f64) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    let cdf = |k: u64| gamma_ur(k as f64 + 1.0, mu);
    if mu < 30.0 {
        let mut p = (-mu).exp();
        let mut c = p;
        let mut k = 0u64;
        while c < u && k < 10_000 {
            k += 1;
            p *= mu / k as f64;
            c += p;
        }
        return k;
    }
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(u);
    let mut k = (mu + z * mu.sqrt()).max(0.0).floor() as u64;
    while k > 0 && cdf(k - 1) >= u {
        k -= 1;
    }
    while cdf(k) < u {
        k += 1;
    }
    k
}
