//! Re-runnable oracle cases with a JUnit-style report and a result cache
//! keyed on the inputs and the kernel sources.

use crate::bounds::{growth_bound, BoundKind, BoundQuery};
use crate::error::{Error, Result};
use crate::hull::{brute_force_cells, delaunay_cells};
use crate::point_processes::WeightedPoint;
use crate::rng::stream;
use crate::typical::{alpha_hat, face_intensities_closed_form, importance_moment, normalization_integral, simplex_volume, volume_moment, CellLawParams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Sources whose change invalidates cached results.
const KERNEL_SOURCES: [&str; 8] = [
    include_str!("hull.rs"),
    include_str!("predicates.rs"),
    include_str!("special.rs"),
    include_str!("typical.rs"),
    include_str!("bounds.rs"),
    include_str!("point_processes.rs"),
    include_str!("rng.rs"),
    include_str!("oracles.rs"),
];

pub fn kernel_hash() -> String {
    let mut h = Sha256::new();
    for s in KERNEL_SOURCES {
        h.update(s.as_bytes());
        h.update([0u8]);
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Where an expected value comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum CaseSource {
    /// A published closed-form value.
    Reference,
    /// Follows from the definitions.
    Structural,
    /// Checked by an independent computation, described here.
    Oracle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum Tolerance {
    Abs(f64),
    Rel(f64),
    /// Multiple of the reported standard error.
    StdErr(f64),
}

/// The computation behind a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum Check {
    /// Number of instances where the triangulation differs from the
    /// brute-force empty-region enumeration.
    TriangulationMismatches { instances: usize, max_points: usize, d: usize, seed: u64 },
    NormalizationIntegral { nu: f64 },
    AlphaHat { d: usize, nu: f64 },
    VolumeMoment { d: usize, nu: f64, s: f64 },
    ImportanceMoment { d: usize, nu: f64, s: f64, n: usize, seed: u64 },
    SimplexVolume { vertices: Vec<Vec<f64>> },
    GrowthBound { which: BoundKind, query: BoundQuery },
    FaceIntensity { d: usize, j: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub id: String,
    pub check: Check,
    pub expected: f64,
    pub tolerance: Tolerance,
    pub source: CaseSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: String,
    pub passed: bool,
    pub value: f64,
    pub stderr: Option<f64>,
    pub expected: f64,
    pub seconds: f64,
    pub cached: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub results: Vec<CaseResult>,
    pub warnings: Vec<String>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| !r.passed).count()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let _ = writeln!(
                s,
                "{} {:<40} value={:<24} expected={:<24}{}",
                if r.passed { "PASS" } else { "FAIL" },
                r.id,
                r.value,
                r.expected,
                if r.cached { " (cached)" } else { "" }
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "WARN {w}");
        }
        let _ = writeln!(s, "{} cases, {} failed", self.results.len(), self.failures());
        s
    }

    pub fn junit_xml(&self) -> String {
        let esc = |x: &str| x.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;");
        let total: f64 = self.results.iter().map(|r| r.seconds).sum();
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(s, r#"<testsuite name="oracles" tests="{}" failures="{}" time="{total:.6}">"#, self.results.len(), self.failures());
        for w in &self.warnings {
            let _ = writeln!(s, r#"  <system-out>{}</system-out>"#, esc(w));
        }
        for r in &self.results {
            let _ = write!(s, r#"  <testcase classname="oracles" name="{}" time="{:.6}""#, esc(&r.id), r.seconds);
            if r.passed {
                let _ = writeln!(s, "/>");
            } else {
                let _ = writeln!(s, ">");
                let _ = writeln!(s, r#"    <failure message="{}"/>"#, esc(&r.message));
                let _ = writeln!(s, "  </testcase>");
            }
        }
        let _ = writeln!(s, "</testsuite>");
        s
    }
}

fn random_points(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<WeightedPoint> {
    (0..n).map(|_| WeightedPoint::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), rng.gen_range(-0.5..0.5))).collect()
}

fn evaluate(check: &Check) -> Result<(f64, Option<f64>)> {
    match check {
        Check::TriangulationMismatches { instances, max_points, d, seed } => {
            let mut rng = stream(*seed, 0x6f72);
            let mut bad = 0;
            for _ in 0..*instances {
                let n = rng.gen_range(*d..=*max_points);
                let pts = random_points(&mut rng, n, d - 1);
                let mut fast: Vec<Vec<usize>> = match delaunay_cells(&pts) {
                    Ok(c) => c.into_iter().map(|c| c.vertex_indices).collect(),
                    Err(Error::Degenerate(_)) => Vec::new(),
                    Err(e) => return Err(e),
                };
                fast.sort();
                let mut slow = brute_force_cells(&pts);
                slow.sort();
                bad += (fast != slow) as usize;
            }
            Ok((bad as f64, None))
        }
        Check::NormalizationIntegral { nu } => Ok((normalization_integral(*nu)?, None)),
        Check::AlphaHat { d, nu } => Ok((alpha_hat(*d, *nu)?, None)),
        Check::VolumeMoment { d, nu, s } => Ok((volume_moment(&CellLawParams::new(*d, *nu, *s))?, None)),
        Check::ImportanceMoment { d, nu, s, n, seed } => {
            let e = importance_moment(&CellLawParams::new(*d, *nu, *s), *n, *seed)?;
            Ok((e.value, Some(e.stderr)))
        }
        Check::SimplexVolume { vertices } => Ok((simplex_volume(vertices), None)),
        Check::GrowthBound { which, query } => Ok((growth_bound(*which, query)?, None)),
        Check::FaceIntensity { d, j } => {
            let g = face_intensities_closed_form(*d)?;
            g.get(*j).copied().map(|x| (x, None)).ok_or_else(|| Error::Parameter(format!("j = {j} out of range")))
        }
    }
}

fn within(value: f64, stderr: Option<f64>, expected: f64, tol: Tolerance) -> bool {
    let diff = (value - expected).abs();
    match tol {
        Tolerance::Abs(t) => diff <= t,
        Tolerance::Rel(t) => diff <= t * expected.abs(),
        Tolerance::StdErr(k) => diff <= k * stderr.unwrap_or(0.0),
    }
}

/// Cache key: hash of the kernel sources and the case computation.
pub fn case_key(case: &OracleCase) -> String {
    let mut h = Sha256::new();
    h.update(kernel_hash().as_bytes());
    h.update(serde_json::to_string(&case.check).unwrap_or_default().as_bytes());
    hex(&h.finalize())
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Cache {
    entries: BTreeMap<String, (f64, Option<f64>)>,
}

fn load_cache(path: &Path) -> Cache {
    std::fs::read_to_string(path).ok().and_then(|s| serde_json::from_str(&s).ok()).unwrap_or_default()
}

/// Runs `cases`; with `cache` set, values are read from and written to that
/// JSON file. Tolerances are always re-applied, so a changed expectation is
/// caught even for cached values.
pub fn run_oracles_with(cases: &[OracleCase], cache: Option<&Path>) -> OracleReport {
    let mut warnings = Vec::new();
    if cases.is_empty() {
        warnings.push("empty case list".to_string());
    }
    let mut store = cache.map(load_cache).unwrap_or_default();
    let mut results = Vec::with_capacity(cases.len());
    for case in cases {
        let key = case_key(case);
        let t0 = Instant::now();
        let (outcome, cached) = match store.entries.get(&key) {
            Some(v) => (Ok(*v), true),
            None => (evaluate(&case.check), false),
        };
        let seconds = t0.elapsed().as_secs_f64();
        let r = match outcome {
            Ok((value, stderr)) => {
                if !cached {
                    store.entries.insert(key, (value, stderr));
                }
                let passed = within(value, stderr, case.expected, case.tolerance);
                let message = if passed { String::new() } else { format!("value {value} not within {:?} of {}", case.tolerance, case.expected) };
                CaseResult { id: case.id.clone(), passed, value, stderr, expected: case.expected, seconds, cached, message }
            }
            Err(e) => CaseResult {
                id: case.id.clone(),
                passed: false,
                value: f64::NAN,
                stderr: None,
                expected: case.expected,
                seconds,
                cached,
                message: e.to_string(),
            },
        };
        results.push(r);
    }
    if let Some(path) = cache {
        if let Ok(text) = serde_json::to_string(&store) {
            if let Err(e) = std::fs::write(path, text) {
                warnings.push(format!("cache not written: {e}"));
            }
        }
    }
    OracleReport { results, warnings }
}

/// Runs the standard suite without a cache.
pub fn run_oracles() -> OracleReport {
    run_oracles_with(&standard_cases(), None)
}

/// Default cache location inside a directory.
pub fn cache_path(dir: &Path) -> PathBuf {
    dir.join("oracle-cache.json")
}

fn case(id: &str, check: Check, expected: f64, tolerance: Tolerance, source: CaseSource) -> OracleCase {
    OracleCase { id: id.into(), check, expected, tolerance, source }
}

/// The standard suite on fixed seeds.
pub fn standard_cases() -> Vec<OracleCase> {
    use std::f64::consts::PI;
    let oracle = |s: &str| CaseSource::Oracle(s.into());
    let mut v = vec![
        case(
            "delaunay_cells.brute_force.d2",
            Check::TriangulationMismatches { instances: 500, max_points: 10, d: 2, seed: 1 },
            0.0,
            Tolerance::Abs(0.0),
            oracle("all d-subsets with an empty-region test"),
        ),
        case(
            "delaunay_cells.brute_force.d3",
            Check::TriangulationMismatches { instances: 500, max_points: 10, d: 3, seed: 2 },
            0.0,
            Tolerance::Abs(0.0),
            oracle("all d-subsets with an empty-region test"),
        ),
        case("alpha_hat.d2.nu-1", Check::AlphaHat { d: 2, nu: -1.0 }, 1.0 / (2.0 * PI), Tolerance::Rel(1e-12), oracle("gamma products cancel")),
        case("alpha_hat.d2.nu1", Check::AlphaHat { d: 2, nu: 1.0 }, 1.0 / (4.0 * PI), Tolerance::Rel(1e-12), oracle("gamma ratio equals 2")),
        case("volume_moment.d2.nu-1.s2", Check::VolumeMoment { d: 2, nu: -1.0, s: 2.0 }, 2.0, Tolerance::Rel(1e-12), oracle("variance of a Gaussian difference")),
        case("volume_moment.d3.nu0.s2", Check::VolumeMoment { d: 3, nu: 0.0, s: 2.0 }, 4.5, Tolerance::Rel(1e-12), oracle("gamma ratios by hand")),
        case("volume_moment.s0", Check::VolumeMoment { d: 4, nu: 1.5, s: 0.0 }, 1.0, Tolerance::Rel(1e-14), CaseSource::Structural),
        case(
            "simplex_volume.triangle",
            Check::SimplexVolume { vertices: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 5.0]] },
            5.0,
            Tolerance::Rel(1e-14),
            oracle("determinant by hand"),
        ),
        case(
            "growth_bound.1c.reference",
            Check::GrowthBound { which: BoundKind::B1c, query: BoundQuery { d: 2, a: 1.0, level: 4.0, beta: 0.0, beta0: 0.0 } },
            (-2.0 / PI).exp(),
            Tolerance::Rel(1e-12),
            oracle("substitution into the bound with Gamma(3/2) = sqrt(pi)/2"),
        ),
        case(
            "growth_bound.1a.case_split",
            Check::GrowthBound { which: BoundKind::B1a, query: BoundQuery { d: 3, a: 1.0, level: 3.0, beta: 2.0, beta0: 1.0 } },
            1.0,
            Tolerance::Abs(0.0),
            CaseSource::Reference,
        ),
        case(
            "growth_bound.1b.case_split",
            Check::GrowthBound { which: BoundKind::B1b, query: BoundQuery { d: 3, a: 1.0, level: 20.0, beta: 5.0, beta0: 0.0 } },
            0.0,
            Tolerance::Abs(0.0),
            CaseSource::Reference,
        ),
        case("face_intensity.d3.j2", Check::FaceIntensity { d: 3, j: 2 }, 1.0 / 3f64.sqrt(), Tolerance::Rel(1e-12), oracle("mean typical area sqrt(3)")),
        case("face_intensity.d2.j0", Check::FaceIntensity { d: 2, j: 0 }, 1.0 / PI.sqrt(), Tolerance::Rel(1e-12), oracle("mean typical length sqrt(pi)")),
    ];
    for nu in [-1.0, 0.0, 1.0] {
        v.push(case(
            &format!("normalization.d2.nu{nu}"),
            Check::NormalizationIntegral { nu },
            1.0,
            Tolerance::Abs(1e-3),
            oracle("nested adaptive quadrature over the plane"),
        ));
    }
    for (d, nu, s) in [(2, -1.0, 2.0), (2, 0.0, 1.0), (3, 0.0, 2.0), (3, 1.0, 1.0)] {
        let want = volume_moment(&CellLawParams::new(d, nu, s)).expect("valid");
        v.push(case(
            &format!("importance_moment.d{d}.nu{nu}.s{s}"),
            Check::ImportanceMoment { d, nu, s, n: 200_000, seed: 17 },
            want,
            Tolerance::StdErr(4.0),
            oracle("weighted Monte Carlo over Gaussian simplices"),
        ));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_is_green_with_warning() {
        let r = run_oracles_with(&[], None);
        assert!(r.all_passed());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn corrupted_expectation_is_red() {
        let mut c = standard_cases().into_iter().find(|c| c.id == "volume_moment.d3.nu0.s2").unwrap();
        c.expected = 4.6;
        let r = run_oracles_with(&[c], None);
        assert!(!r.all_passed());
        assert!(r.junit_xml().contains("<failure"));
    }

    #[test]
    fn cache_is_reused_and_keyed_on_inputs() {
        let dir = std::env::temp_dir().join(format!("paratess-oracle-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = cache_path(&dir);
        let _ = std::fs::remove_file(&path);
        let cases: Vec<OracleCase> = standard_cases().into_iter().filter(|c| c.id.starts_with("alpha_hat")).collect();
        let a = run_oracles_with(&cases, Some(&path));
        assert!(a.results.iter().all(|r| !r.cached && r.passed));
        let b = run_oracles_with(&cases, Some(&path));
        assert!(b.results.iter().all(|r| r.cached && r.passed));
        let mut changed = cases[0].clone();
        changed.check = Check::AlphaHat { d: 3, nu: -1.0 };
        assert_ne!(case_key(&changed), case_key(&cases[0]));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
