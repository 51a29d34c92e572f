//! Experiment configurations: optional TOML file values, overridden by
//! command-line flags, resolved to concrete validated records.

use anyhow::{bail, Context, Result};
use paratess::convergence::CompactTestSet;
use paratess::point_processes::{ModelKind, ModelParams};
use paratess::tessellation::WindowSpec;
use paratess::bounds::{BoundKind, BoundQuery};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Reads a TOML file into a partial config.
pub fn read_toml<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

pub fn parse_model(s: &str) -> Result<ModelKind> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "gaussian" => Ok(ModelKind::Gaussian),
        "beta" => Ok(ModelKind::Beta),
        "beta-prime" | "betaprime" => Ok(ModelKind::BetaPrime),
        other => bail!("unknown model '{other}' (gaussian, beta, beta-prime)"),
    }
}

/// Model parameters; gamma defaults to 1 for the Gaussian model and to
/// sqrt(2 beta) (the rescaling intensity) otherwise.
pub fn build_model(kind: ModelKind, d: usize, beta: Option<f64>, gamma: Option<f64>) -> Result<ModelParams> {
    let m = match kind {
        ModelKind::Gaussian => ModelParams::gaussian(d),
        k => {
            let b = beta.context("--beta is required for beta and beta-prime models")?;
            if b > 0.0 {
                ModelParams::for_rescaling(k, d, b)
            } else {
                ModelParams { kind: k, beta: b, gamma: 1.0, d }
            }
        }
    };
    let m = match gamma {
        Some(g) => m.with_gamma(g),
        None => m,
    };
    m.validate()?;
    Ok(m)
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub model: Option<String>,
    pub d: Option<usize>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub window: WindowSpec,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl SimulateFile {
    pub fn merge(self, o: SimulateFile) -> SimulateFile {
        SimulateFile {
            model: o.model.or(self.model),
            d: o.d.or(self.d),
            beta: o.beta.or(self.beta),
            gamma: o.gamma.or(self.gamma),
            radius: o.radius.or(self.radius),
            eps: o.eps.or(self.eps),
            seed: o.seed.or(self.seed),
            out: o.out.or(self.out),
            svg: o.svg.or(self.svg),
        }
    }

    pub fn resolve(self) -> Result<SimulateConfig> {
        let kind = parse_model(self.model.as_deref().unwrap_or("gaussian"))?;
        let model = build_model(kind, self.d.unwrap_or(3), self.beta, self.gamma)?;
        let window = WindowSpec::new(model, self.radius.unwrap_or(4.0), self.eps.unwrap_or(0.05));
        window.validate()?;
        if self.svg.is_some() && model.d != 3 {
            bail!("SVG output needs d = 3 (planar tessellation), got d = {}", model.d);
        }
        Ok(SimulateConfig { window, seed: self.seed.unwrap_or(0), out: self.out, svg: self.svg })
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsFile {
    pub d: Option<Vec<usize>>,
    pub nu: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentsConfig {
    pub d: Vec<usize>,
    pub nu: Vec<f64>,
    pub s: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl MomentsFile {
    pub fn merge(self, o: MomentsFile) -> MomentsFile {
        MomentsFile {
            d: o.d.or(self.d),
            nu: o.nu.or(self.nu),
            s: o.s.or(self.s),
            n: o.n.or(self.n),
            seed: o.seed.or(self.seed),
            out: o.out.or(self.out),
        }
    }

    pub fn resolve(self) -> Result<MomentsConfig> {
        let c = MomentsConfig {
            d: self.d.unwrap_or_else(|| vec![2, 3, 4]),
            nu: self.nu.unwrap_or_else(|| vec![-1.0, 0.0, 1.0, 2.0]),
            s: self.s.unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0]),
            n: self.n.unwrap_or(1_000_000),
            seed: self.seed.unwrap_or(2024),
            out: self.out,
        };
        for &d in &c.d {
            for &nu in &c.nu {
                for &s in &c.s {
                    paratess::typical::volume_moment(&paratess::typical::CellLawParams::new(d, nu, s))?;
                }
            }
        }
        if c.n < 2 {
            bail!("n = {} base samples is too few for a standard error", c.n);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeFile {
    pub models: Option<Vec<String>>,
    pub betas: Option<Vec<f64>>,
    pub compacts: Option<Vec<CompactTestSet>>,
    pub d: Option<usize>,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub eps: Option<f64>,
    pub n_reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeConfig {
    pub experiment: paratess::convergence::ConvergenceConfig,
    pub out: Option<PathBuf>,
}

/// Default test sets: three disjoint pieces of the window.
pub fn default_compacts(d: usize, radius: f64) -> Vec<CompactTestSet> {
    let r = radius;
    match d {
        2 => vec![
            CompactTestSet::Ball { center: vec![0.0], radius: 0.15 * r },
            CompactTestSet::Segment { a: vec![0.25 * r], b: vec![0.6 * r] },
            CompactTestSet::Ball { center: vec![-0.5 * r], radius: 0.2 * r },
        ],
        _ => vec![
            CompactTestSet::Ball { center: vec![0.0; d - 1], radius: 0.15 * r },
            CompactTestSet::Segment { a: [vec![0.25 * r], vec![0.0; d - 2]].concat(), b: [vec![0.6 * r], vec![0.0; d - 2]].concat() },
            CompactTestSet::Ball { center: [vec![-0.5 * r], vec![0.0; d - 2]].concat(), radius: 0.2 * r },
        ],
    }
}

impl ConvergeFile {
    pub fn merge(self, o: ConvergeFile) -> ConvergeFile {
        ConvergeFile {
            models: o.models.or(self.models),
            betas: o.betas.or(self.betas),
            compacts: o.compacts.or(self.compacts),
            d: o.d.or(self.d),
            radius: o.radius.or(self.radius),
            eps: o.eps.or(self.eps),
            n_reps: o.n_reps.or(self.n_reps),
            seed: o.seed.or(self.seed),
            out: o.out.or(self.out),
        }
    }

    pub fn resolve(self) -> Result<ConvergeConfig> {
        let d = self.d.unwrap_or(2);
        let radius = self.radius.unwrap_or(2.0);
        let kinds = self
            .models
            .unwrap_or_else(|| vec!["beta".into(), "beta-prime".into()])
            .iter()
            .map(|m| parse_model(m))
            .collect::<Result<Vec<_>>>()?;
        let betas = self.betas.unwrap_or_else(|| vec![4.0, 16.0, 64.0, 256.0]);
        for &b in &betas {
            if !(b > 0.0) {
                bail!("beta = {b} must be positive for the rescaled models");
            }
        }
        let window = WindowSpec::new(ModelParams::gaussian(d), radius, self.eps.unwrap_or(0.05));
        window.validate()?;
        let compacts = self.compacts.unwrap_or_else(|| default_compacts(d, radius));
        let lim = radius * (1.0 - paratess::convergence::MARGIN);
        for c in &compacts {
            c.validate(d - 1)?;
            if c.extent() > lim {
                return Err(paratess::Error::UndecidableMargin(format!("test set reaches {} > {lim}", c.extent())).into());
            }
        }
        let experiment = paratess::convergence::ConvergenceConfig {
            kinds,
            betas,
            compacts,
            window,
            n_reps: self.n_reps.unwrap_or(2000),
            seed: self.seed.unwrap_or(0),
        };
        Ok(ConvergeConfig { experiment, out: self.out })
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub bounds: Option<Vec<String>>,
    pub points: Option<usize>,
    pub n_seeds: Option<usize>,
    pub seed: Option<u64>,
    /// Extra explicit parameter points: (bound, query).
    pub queries: Option<Vec<ExplicitQuery>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ExplicitQuery {
    pub bound: String,
    pub d: usize,
    #[serde(rename = "A")]
    pub a: f64,
    pub level: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub beta0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsConfig {
    pub bounds: Vec<BoundKind>,
    pub points: usize,
    pub n_seeds: usize,
    pub seed: u64,
    pub queries: Vec<(BoundKind, BoundQuery)>,
    pub out: Option<PathBuf>,
}

impl BoundsFile {
    pub fn merge(self, o: BoundsFile) -> BoundsFile {
        BoundsFile {
            bounds: o.bounds.or(self.bounds),
            points: o.points.or(self.points),
            n_seeds: o.n_seeds.or(self.n_seeds),
            seed: o.seed.or(self.seed),
            queries: o.queries.or(self.queries),
            out: o.out.or(self.out),
        }
    }

    pub fn resolve(self) -> Result<BoundsConfig> {
        let bounds = match self.bounds {
            None => BoundKind::ALL.to_vec(),
            Some(v) => v.iter().map(|b| b.parse::<BoundKind>()).collect::<paratess::Result<Vec<_>>>()?,
        };
        let mut queries = Vec::new();
        for q in self.queries.unwrap_or_default() {
            let which: BoundKind = q.bound.parse()?;
            let query = BoundQuery { d: q.d, a: q.a, level: q.level, beta: q.beta, beta0: q.beta0 };
            paratess::bounds::growth_bound(which, &query)?;
            queries.push((which, query));
        }
        let n_seeds = self.n_seeds.unwrap_or(1000);
        if n_seeds == 0 {
            bail!("n_seeds must be positive");
        }
        Ok(BoundsConfig { bounds, points: self.points.unwrap_or(20), n_seeds, seed: self.seed.unwrap_or(0), queries, out: self.out })
    }
}
