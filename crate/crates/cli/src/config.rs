//! Scenario files: one JSON document per scenario.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use finsler::catalog::{self, CatalogEntry};
use finsler::distance::EvalMode;
use finsler::grid::{GridDomain, StencilSpec};
use finsler::harness::{CoincidenceThresholds, Expectation, SampleKind, SampleSpec, TestFunction};
use finsler::{BoxDomain, NormField};
use serde::Deserialize;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Eval,
    Distance,
    Coincide,
    Converge,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Eval => "eval",
            Operation::Distance => "distance",
            Operation::Coincide => "coincide",
            Operation::Converge => "converge",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to the structure's own box.
    #[serde(rename = "box")]
    pub bounds: Option<BoxDomain>,
    /// Nodes per axis, one grid per entry.
    pub resolutions: Vec<usize>,
    /// `8`, `16`, `rN` or `scaled`.
    pub stencil: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub count: usize,
    #[serde(default)]
    pub kind: SampleKind,
    /// Extra cells kept clear of the jump set.
    #[serde(default = "two")]
    pub band_cells: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// File name prefix; defaults to `<structure>-<operation>`.
    pub stem: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub structure: String,
    pub seed: u64,
    pub operation: Operation,
    #[serde(default)]
    pub mode: EvalMode,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub functions: Vec<TestFunction>,
    pub samples: Option<SampleConfig>,
    #[serde(default)]
    pub queries: Vec<Query>,
    #[serde(default)]
    pub sources: Vec<Vec<f64>>,
    /// Approximation indices for `converge`.
    #[serde(default)]
    pub approximation: Vec<u32>,
    pub expect: Option<Expectation>,
    pub tolerances: Option<CoincidenceThresholds>,
    /// Annulus radii of the Lipschitz estimator, in cells.
    pub radii_cells: Option<Vec<f64>>,
    pub output: Option<OutputConfig>,
}

/// A parsed scenario with its catalog entry resolved.
pub struct Scenario {
    pub path: PathBuf,
    pub config: ScenarioConfig,
    pub entry: CatalogEntry,
}

impl Scenario {
    pub fn grids(&self) -> Result<Vec<GridDomain>> {
        let g = self.config.grid.as_ref().context("missing `grid`")?;
        let spec = StencilSpec::parse(&g.stencil)?;
        let bounds = g.bounds.clone().unwrap_or_else(|| self.entry.structure.domain().clone());
        let dim = bounds.dim();
        g.resolutions
            .iter()
            .map(|&n| Ok(GridDomain::new(bounds.clone(), vec![n; dim], spec)?))
            .collect()
    }

    pub fn sample_spec(&self) -> Result<SampleSpec> {
        let s = self.config.samples.as_ref().context("missing `samples`")?;
        Ok(SampleSpec { count: s.count, seed: self.config.seed, kind: s.kind, band_cells: s.band_cells })
    }

    pub fn stem(&self) -> String {
        self.config
            .output
            .as_ref()
            .and_then(|o| o.stem.clone())
            .unwrap_or_else(|| format!("{}-{}", self.config.structure, self.config.operation.as_str()))
    }

    /// `--out` wins over the scenario's own directory.
    pub fn out_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        if let Some(d) = flag {
            return Ok(d.to_path_buf());
        }
        match self.config.output.as_ref().and_then(|o| o.dir.clone()) {
            Some(d) if d.is_relative() => Ok(self.path.parent().unwrap_or(Path::new(".")).join(d)),
            Some(d) => Ok(d),
            None => bail!("no output directory: pass --out or set `output.dir`"),
        }
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: ScenarioConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let entry = validate(&config).with_context(|| format!("in {}", path.display()))?;
    Ok(Scenario { path: path.to_path_buf(), config, entry })
}

fn validate(c: &ScenarioConfig) -> Result<CatalogEntry> {
    ensure!(c.version == CONFIG_VERSION, "unsupported config version {} (expected {CONFIG_VERSION})", c.version);
    let entry = catalog::by_id(&c.structure)?;
    let dim = entry.structure.dim();
    if let Some(g) = &c.grid {
        ensure!(!g.resolutions.is_empty(), "`grid.resolutions` is empty");
        ensure!(
            g.resolutions.windows(2).all(|w| w[0] < w[1]),
            "`grid.resolutions` must be strictly increasing, got {:?}",
            g.resolutions
        );
        StencilSpec::parse(&g.stencil)?;
        if let Some(b) = &g.bounds {
            let d = entry.structure.domain();
            ensure!(b.dim() == dim, "grid box has dimension {}, structure has {dim}", b.dim());
            ensure!(d.contains(&b.lo) && d.contains(&b.hi), "grid box leaves the structure's domain");
        }
    }
    for u in &c.functions {
        u.validate(dim)?;
    }
    match c.operation {
        Operation::Eval => {
            ensure!(!c.queries.is_empty(), "`eval` needs `queries`");
            for q in &c.queries {
                ensure!(q.x.len() == dim && q.v.len() == dim, "query dimensions must be {dim}");
            }
        }
        Operation::Distance => {
            ensure!(c.grid.is_some(), "`distance` needs `grid`");
            ensure!(!c.sources.is_empty(), "`distance` needs `sources`");
        }
        Operation::Coincide => {
            let g = c.grid.as_ref().context("`coincide` needs `grid`")?;
            ensure!(g.resolutions.len() == 2, "`coincide` needs exactly two resolutions (coarse, fine)");
            ensure!(!c.functions.is_empty(), "`coincide` needs `functions`");
            ensure!(c.samples.is_some(), "`coincide` needs `samples`");
            ensure!(c.tolerances.is_some(), "`coincide` needs explicit `tolerances`");
        }
        Operation::Converge => {
            ensure!(c.grid.is_some(), "`converge` needs `grid`");
            ensure!(c.samples.is_some(), "`converge` needs `samples` (the number of point pairs)");
            ensure!(!c.approximation.is_empty(), "`converge` needs `approximation` indices");
            ensure!(c.approximation[0] >= 1, "approximation indices start at 1");
            ensure!(
                c.approximation.windows(2).all(|w| w[0] < w[1]),
                "`approximation` must be strictly increasing"
            );
        }
    }
    if let Some(r) = &c.radii_cells {
        ensure!(r.windows(2).all(|w| w[0] > w[1]), "`radii_cells` must be decreasing");
    }
    Ok(entry)
}
