//! `Lip u(x)` against `F(x, du(x))`: the upper bound that always holds, the
//! coincidence under weak usc, and its failure otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lip::{default_radii, lip_from_distances};
use super::testfn::TestFunction;
use super::{median, quantile};
use crate::axioms::usc_modulus;
use crate::catalog::CatalogEntry;
use crate::distance::{EvalMode, GridMetric, ToleranceBudget};
use crate::dual::DualNorm;
use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::structure::FinslerStructure;

pub const SCHEMA_VERSION: u32 = 1;

/// Radii of the local usc probe attached to each record.
pub const USC_PROBE_RADII: [f64; 5] = [0.1, 0.05, 0.02, 0.01, 0.005];
pub const USC_PROBE_EPS: f64 = 0.1;

/// `F(x, du(x))`, computed for the unscaled shape and multiplied by the scale.
pub fn f_of_du(f: &FinslerStructure, u: &TestFunction, x: &[f64]) -> Result<f64> {
    f.check_point(x)?;
    u.validate(x.len())?;
    Ok(u.scale * f.eval(x, &u.shape_gradient(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Coincidence,
    Failure,
}

/// Median gaps below this are rounding noise: the ratio is exact and there
/// is nothing left to shrink.
pub const GAP_ROUNDOFF: f64 = 1e-12;

/// Pass criteria. Failure thresholds describe how large a gap must be
/// observed, not a property of the structures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceThresholds {
    /// Largest median `|ratio - 1|` at the fine resolution.
    pub max_median_gap: f64,
    /// Fine median gap must be below this multiple of the coarse one.
    pub shrink_factor: f64,
    /// Smallest median ratio at both resolutions when failure is expected.
    pub min_failure_ratio: f64,
    /// Fine median gap must be at least this multiple of the coarse one.
    pub min_failure_stability: f64,
}

impl Default for CoincidenceThresholds {
    fn default() -> Self {
        CoincidenceThresholds { max_median_gap: 0.05, shrink_factor: 1.0, min_failure_ratio: 1.2, min_failure_stability: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceOptions {
    pub mode: EvalMode,
    pub thresholds: CoincidenceThresholds,
    /// Overrides the entry's own expectation.
    pub expectation: Option<Expectation>,
    /// Annulus radii in grid cells, decreasing.
    pub radii_cells: Vec<f64>,
}

impl Default for CoincidenceOptions {
    fn default() -> Self {
        CoincidenceOptions { mode: EvalMode::Plain, thresholds: CoincidenceThresholds::default(), expectation: None, radii_cells: vec![16.0, 8.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub sample: usize,
    pub x: Vec<f64>,
    pub function: String,
    pub resolution: Vec<usize>,
    pub stencil_radius: u32,
    pub lip: f64,
    /// Per-radius annulus maxima behind `lip`.
    pub raw: Vec<(f64, f64)>,
    pub f_du: f64,
    pub ratio: f64,
    /// Largest probed radius passing the uniform usc test at `x`.
    pub usc_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSummary {
    pub resolution: Vec<usize>,
    pub stencil_radius: u32,
    pub records: usize,
    pub median_ratio: f64,
    pub q10_ratio: f64,
    pub q90_ratio: f64,
    /// Median of `|ratio - 1|`.
    pub median_gap: f64,
    pub budget: ToleranceBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceSummary {
    pub coarse: ResolutionSummary,
    pub fine: ResolutionSummary,
    /// Fine median gap over coarse median gap.
    pub gap_trend: f64,
    pub expectation: Expectation,
    pub thresholds: CoincidenceThresholds,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub schema_version: u32,
    pub structure_id: String,
    pub mode: EvalMode,
    pub functions: Vec<String>,
    pub sample_count: usize,
    pub records: Vec<CoincidenceRecord>,
    pub summary: CoincidenceSummary,
}

fn run_resolution(
    entry: &CatalogEntry,
    grid: &GridDomain,
    functions: &[TestFunction],
    samples: &[Vec<f64>],
    options: &CoincidenceOptions,
) -> Result<(Vec<CoincidenceRecord>, ResolutionSummary)> {
    let fstar = DualNorm::new(entry.structure.clone());
    let metric = GridMetric::new(&fstar, grid)?.with_mode(options.mode);
    let h = grid.h();
    let radii: Vec<f64> = options.radii_cells.iter().map(|c| c * h).collect();
    let per_sample: Vec<Vec<CoincidenceRecord>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let local = metric.lattice_distances(x, radii[0])?;
            let usc_radius = usc_modulus(&entry.structure, x, USC_PROBE_EPS, &USC_PROBE_RADII, 32);
            functions
                .iter()
                .map(|u| {
                    let est = lip_from_distances(grid, &local, u, x, &radii)?;
                    let f_du = f_of_du(&entry.structure, u, x)?;
                    Ok(CoincidenceRecord {
                        sample: i,
                        x: x.clone(),
                        function: u.descriptor(),
                        resolution: grid.resolution().to_vec(),
                        stencil_radius: grid.stencil().radius(),
                        lip: est.value,
                        raw: est.raw,
                        f_du,
                        ratio: est.value / f_du,
                        usc_radius,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let records: Vec<CoincidenceRecord> = per_sample.into_iter().flatten().collect();
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let gaps: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let summary = ResolutionSummary {
        resolution: grid.resolution().to_vec(),
        stencil_radius: grid.stencil().radius(),
        records: records.len(),
        median_ratio: median(&ratios),
        q10_ratio: quantile(&ratios, 0.1),
        q90_ratio: quantile(&ratios, 0.9),
        median_gap: median(&gaps),
        budget: metric.tolerance_budget(0xB0D6E7),
    };
    Ok((records, summary))
}

/// Ratios `Lip u / F(du)` at a coarse and a fine grid over the same samples.
///
/// Under the coincidence expectation the fine median gap must be small and
/// shrinking; under the failure expectation the median ratio must stay at
/// least `min_failure_ratio` at both resolutions without collapsing.
pub fn check_coincidence(
    entry: &CatalogEntry,
    coarse: &GridDomain,
    fine: &GridDomain,
    functions: &[TestFunction],
    samples: &[Vec<f64>],
    options: &CoincidenceOptions,
) -> Result<CoincidenceReport> {
    if functions.is_empty() || samples.is_empty() {
        return Err(Error::Invalid("need at least one function and one sample".into()));
    }
    if options.radii_cells.is_empty() || options.radii_cells.iter().any(|c| *c < 4.0) {
        return Err(Error::Invalid("annulus radii must be at least 4 cells".into()));
    }
    let (mut records, cs) = run_resolution(entry, coarse, functions, samples, options)?;
    let (fine_records, fs) = run_resolution(entry, fine, functions, samples, options)?;
    records.extend(fine_records);
    let expectation = options.expectation.unwrap_or(if entry.expected_coincidence {
        Expectation::Coincidence
    } else {
        Expectation::Failure
    });
    let t = options.thresholds;
    let gap_trend = fs.median_gap / cs.median_gap;
    let mut checks = Vec::new();
    match expectation {
        Expectation::Coincidence => {
            checks.push(Check {
                name: "fine-median-gap".into(),
                passed: fs.median_gap <= t.max_median_gap,
                detail: format!("median |ratio - 1| = {:.5} (limit {})", fs.median_gap, t.max_median_gap),
            });
            checks.push(Check {
                name: "gap-shrinks".into(),
                passed: fs.median_gap <= GAP_ROUNDOFF
                    || (fs.median_gap < cs.median_gap && fs.median_gap <= t.shrink_factor * cs.median_gap),
                detail: format!("fine/coarse gap = {gap_trend:.4} (limit {}, or fine gap at roundoff)", t.shrink_factor),
            });
        }
        Expectation::Failure => {
            checks.push(Check {
                name: "coarse-ratio-away-from-one".into(),
                passed: cs.median_ratio >= t.min_failure_ratio,
                detail: format!("median ratio = {:.4} (minimum {})", cs.median_ratio, t.min_failure_ratio),
            });
            checks.push(Check {
                name: "fine-ratio-away-from-one".into(),
                passed: fs.median_ratio >= t.min_failure_ratio,
                detail: format!("median ratio = {:.4} (minimum {})", fs.median_ratio, t.min_failure_ratio),
            });
            checks.push(Check {
                name: "gap-persists".into(),
                passed: gap_trend >= t.min_failure_stability,
                detail: format!("fine/coarse gap = {gap_trend:.4} (minimum {})", t.min_failure_stability),
            });
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(CoincidenceReport {
        schema_version: SCHEMA_VERSION,
        structure_id: entry.id.clone(),
        mode: options.mode,
        functions: functions.iter().map(|f| f.descriptor()).collect(),
        sample_count: samples.len(),
        records,
        summary: CoincidenceSummary { coarse: cs, fine: fs, gap_trend, expectation, thresholds: t, checks, passed },
    })
}

impl CoincidenceReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub const RECORD_COLUMNS: &'static str = "sample,resolution,stencil_radius,mode,function,x,lip,f_du,ratio,usc_radius,raw";

    /// One row per record; vectors are `;`-separated, raw pairs `r:L`.
    pub fn records_csv(&self) -> String {
        let mut out = String::from(Self::RECORD_COLUMNS);
        out.push('\n');
        for r in &self.records {
            let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(";");
            let res: Vec<String> = r.resolution.iter().map(|n| n.to_string()).collect();
            let raw: Vec<String> = r.raw.iter().map(|(a, b)| format!("{a}:{b}")).collect();
            out.push_str(&format!(
                "{},{},{},{},\"{}\",{},{},{},{},{},{}\n",
                r.sample,
                res.join("x"),
                r.stencil_radius,
                self.mode.as_str(),
                r.function,
                join(&r.x),
                r.lip,
                r.f_du,
                r.ratio,
                r.usc_radius.map_or(String::new(), |v| format!("{v}")),
                raw.join(";")
            ));
        }
        out
    }

    pub const SUMMARY_COLUMNS: &'static str =
        "structure,mode,level,resolution,stencil_radius,records,median_ratio,q10_ratio,q90_ratio,median_gap,tol_total,passed";

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(Self::SUMMARY_COLUMNS);
        out.push('\n');
        for (level, s) in [("coarse", &self.summary.coarse), ("fine", &self.summary.fine)] {
            let res: Vec<String> = s.resolution.iter().map(|n| n.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.structure_id,
                self.mode.as_str(),
                level,
                res.join("x"),
                s.stencil_radius,
                s.records,
                s.median_ratio,
                s.q10_ratio,
                s.q90_ratio,
                s.median_gap,
                s.budget.total,
                self.summary.passed
            ));
        }
        out
    }

    /// Checks that did not pass.
    pub fn failures(&self) -> Vec<&Check> {
        self.summary.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundRecord {
    pub x: Vec<f64>,
    pub function: String,
    pub f_du: f64,
    pub lip: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub structure_id: String,
    pub tolerance: f64,
    pub records: Vec<UpperBoundRecord>,
    pub violations: usize,
    pub worst_ratio: f64,
    pub passed: bool,
}

/// `F(x, du(x)) <= Lip u(x) (1 + tol_total)` at every sample, for every function.
pub fn check_upper_bound(
    metric: &GridMetric<'_>,
    functions: &[TestFunction],
    samples: &[Vec<f64>],
    radii: Option<&[f64]>,
) -> Result<UpperBoundReport> {
    let f = metric.fstar().base();
    let grid = metric.grid();
    let radii = radii.map_or_else(|| default_radii(grid), |r| r.to_vec());
    let tolerance = metric.tolerance_budget(0xB0D6E7).total;
    let per: Vec<Vec<UpperBoundRecord>> = samples
        .par_iter()
        .map(|x| {
            let local = metric.lattice_distances(x, radii[0])?;
            functions
                .iter()
                .map(|u| {
                    let lip = lip_from_distances(grid, &local, u, x, &radii)?.value;
                    let f_du = f_of_du(f, u, x)?;
                    Ok(UpperBoundRecord { x: x.clone(), function: u.descriptor(), f_du, lip, holds: f_du <= lip * (1.0 + tolerance) })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let records: Vec<UpperBoundRecord> = per.into_iter().flatten().collect();
    let violations = records.iter().filter(|r| !r.holds).count();
    let worst_ratio = records.iter().map(|r| r.f_du / r.lip).fold(0.0, f64::max);
    Ok(UpperBoundReport { structure_id: f.id().to_string(), tolerance, passed: violations == 0, records, violations, worst_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UscReport {
    pub structure_id: String,
    pub expect_usc: bool,
    /// `(eps, fraction of points with a positive radius)`.
    pub fractions: Vec<(f64, f64)>,
    pub passed: bool,
}

/// Fraction of `points` where the uniform usc inequality holds at some
/// probed radius, per `eps`. Passes when it is at least 99% for every `eps`
/// (usc expected) or at most 10% (failure expected).
pub fn check_uniform_usc(
    f: &FinslerStructure,
    points: &[Vec<f64>],
    eps_set: &[f64],
    radii: &[f64],
    directions: usize,
    expect_usc: bool,
) -> UscReport {
    let fractions: Vec<(f64, f64)> = eps_set
        .iter()
        .map(|&eps| {
            let ok = points.par_iter().filter(|x| usc_modulus(f, x, eps, radii, directions).is_some()).count();
            (eps, ok as f64 / points.len().max(1) as f64)
        })
        .collect();
    let passed = fractions.iter().all(|(_, frac)| if expect_usc { *frac >= 0.99 } else { 1.0 - frac >= 0.9 });
    UscReport { structure_id: f.id().to_string(), expect_usc, fractions, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::by_id;
    use crate::grid::StencilSpec;
    use crate::harness::sampling::{draw_samples, SampleSpec};

    #[test]
    fn f_of_du_examples() {
        let e = by_id("euclidean").unwrap().structure;
        assert_eq!(f_of_du(&e, &TestFunction::linear(vec![3.0, 4.0]), &[0.5, 0.5]).unwrap(), 5.0);
        let l1 = crate::catalog::make_weighted_lp("l1", crate::geom::BoxDomain::unit(2), 1.0, std::sync::Arc::new(|_| 1.0), (1.0, 1.0), crate::structure::Regularity::Continuous).unwrap();
        assert_eq!(f_of_du(&l1.structure, &TestFunction::linear(vec![1.0, 1.0]), &[0.5, 0.5]).unwrap(), 2.0);
        let r = by_id("riem-diag-4-1").unwrap().structure;
        assert_eq!(f_of_du(&r, &TestFunction::linear(vec![1.0, 0.0]), &[0.5, 0.5]).unwrap(), 2.0);
    }

    #[test]
    fn small_coincidence_run_on_euclidean() {
        let e = by_id("euclidean").unwrap();
        let coarse = GridDomain::unit_square(41, StencilSpec::Scaled).unwrap();
        let fine = GridDomain::unit_square(81, StencilSpec::Scaled).unwrap();
        let xs = draw_samples(&e, &SampleSpec::uniform(8, 3), 16.0 / 40.0, 1.0 / 40.0).unwrap();
        let fs = [TestFunction::linear(vec![1.0, 0.3])];
        let rep = check_coincidence(&e, &coarse, &fine, &fs, &xs, &CoincidenceOptions::default()).unwrap();
        assert_eq!(rep.records.len(), 16);
        assert!(rep.summary.fine.median_gap < 0.05, "{:?}", rep.summary);
        let csv = rep.records_csv();
        assert!(csv.starts_with(CoincidenceReport::RECORD_COLUMNS));
        assert_eq!(csv.lines().count(), 17);
        let again = check_coincidence(&e, &coarse, &fine, &fs, &xs, &CoincidenceOptions::default()).unwrap();
        assert_eq!(rep.to_json().unwrap(), again.to_json().unwrap());
    }

    #[test]
    fn uniform_usc_on_catalog_examples() {
        let r = by_id("riem-smooth").unwrap().structure;
        let pts = vec![vec![0.3, 0.3], vec![0.7, 0.2]];
        assert!(check_uniform_usc(&r, &pts, &[0.1], &[0.1, 0.01], 16, true).passed);
        let c = by_id("nonusc-cantor").unwrap();
        let xs = draw_samples(&c, &SampleSpec::in_set(20, 5), 0.0, 0.0).unwrap();
        let rep = check_uniform_usc(&c.structure, &xs, &[0.1, 0.5], &USC_PROBE_RADII, 16, false);
        assert!(rep.passed, "{rep:?}");
    }
}
