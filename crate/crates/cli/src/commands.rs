use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use finsler::catalog::{self, ApproximationSequence};
use finsler::distance::{EvalMode, GridMetric};
use finsler::dual::{bidual_eval, DualNorm};
use finsler::harness::{check_coincidence, draw_samples, median, CoincidenceOptions, SampleSpec};
use finsler::tolerances::TOL_DUAL;
use finsler::{eval_finsler, NormField, Point, Vector};

use crate::config::Scenario;
use crate::output::{num, write_atomic};

/// Relative slack for the monotonicity flags of `converge`.
pub const MONOTONE_SLACK: f64 = 1e-12;

pub const CONVERGE_COLUMNS: &str =
    "structure,mode,resolution,stencil_radius,n,pairs,median_distance,median_delta,max_delta,median_ratio_gap,monotone,analytic_error";

/// What a scenario printed and whether its assertions held.
pub struct Outcome {
    pub passed: bool,
    pub text: String,
}

pub struct RunOptions<'a> {
    pub out: Option<&'a Path>,
    pub mode: Option<EvalMode>,
}

impl RunOptions<'_> {
    fn mode(&self, s: &Scenario) -> EvalMode {
        self.mode.unwrap_or(s.config.mode)
    }
}

pub fn catalog() -> String {
    let mut out = String::from("id\tdim\tregularity\tcoincidence\tlambda_max\tdescription\n");
    for e in catalog::all() {
        out.push_str(&format!(
            "{}\t{}\t{:?}\t{}\t{}\t{}\n",
            e.id,
            e.structure.dim(),
            e.structure.regularity(),
            if e.expected_coincidence { "expected" } else { "fails" },
            e.structure.lambda_max(),
            e.description
        ));
    }
    out
}

pub fn eval(s: &Scenario) -> Result<Outcome> {
    let f = &s.entry.structure;
    let fstar = DualNorm::new(f.clone());
    let limit = 2.0 * TOL_DUAL;
    let mut passed = true;
    let mut text = format!("# {} (bidual tolerance {limit:e})\nx\tv\tF\tF*\tF**\trel_err\n", s.entry.id);
    for q in &s.config.queries {
        let x = Point::new(q.x.clone())?;
        let v = Vector::new(q.v.clone())?;
        let fv = eval_finsler(f, &x, &v)?;
        let dv = fstar.eval_checked(&x, &v)?;
        let bv = bidual_eval(f, &x, &v)?;
        let rel = if fv > 0.0 { (bv - fv).abs() / fv } else { (bv - fv).abs() };
        let ok = rel <= limit;
        passed &= ok;
        text.push_str(&format!(
            "{:?}\t{:?}\t{}\t{}\t{}\t{:.3e}{}\n",
            q.x,
            q.v,
            num(fv),
            num(dv),
            num(bv),
            rel,
            if ok { "" } else { "\tFAIL" }
        ));
    }
    Ok(Outcome { passed, text })
}

pub fn distance(s: &Scenario, ctx: &RunOptions<'_>) -> Result<Outcome> {
    let dir = s.out_dir(ctx.out)?;
    let stem = s.stem();
    let fstar = DualNorm::new(s.entry.structure.clone());
    let mut text = format!("# {} distance maps\nresolution\tsource\tmin\tmax\tseconds\tfile\n", s.entry.id);
    for grid in s.grids()? {
        let metric = GridMetric::new(&fstar, &grid)?.with_mode(ctx.mode(s));
        let n = grid.resolution()[0];
        for (k, src) in s.config.sources.iter().enumerate() {
            let start = Instant::now();
            let map = metric.distance_map(&Point::new(src.clone())?)?;
            let secs = start.elapsed().as_secs_f64();
            let base = dir.join(format!("{stem}_n{n}_s{k}"));
            let mut bin = Vec::new();
            map.write_binary(&mut bin)?;
            write_atomic(&base.with_extension("bin"), &bin)?;
            let mut csv = Vec::new();
            map.write_csv(&mut csv)?;
            write_atomic(&base.with_extension("csv"), &csv)?;
            let (lo, hi) = map.min_max();
            text.push_str(&format!("{n}\t{src:?}\t{}\t{}\t{secs:.3}\t{}\n", num(lo), num(hi), base.display()));
        }
    }
    Ok(Outcome { passed: true, text })
}

pub fn coincide(s: &Scenario, ctx: &RunOptions<'_>) -> Result<Outcome> {
    let dir = s.out_dir(ctx.out)?;
    let stem = s.stem();
    let grids = s.grids()?;
    let (coarse, fine) = (&grids[0], &grids[1]);
    let mut options = CoincidenceOptions {
        mode: ctx.mode(s),
        thresholds: s.config.tolerances.context("missing `tolerances`")?,
        expectation: s.config.expect,
        ..CoincidenceOptions::default()
    };
    if let Some(r) = &s.config.radii_cells {
        options.radii_cells = r.clone();
    }
    let footprint = options.radii_cells[0] * coarse.h();
    let samples = draw_samples(&s.entry, &s.sample_spec()?, footprint, coarse.h())?;
    let report = check_coincidence(&s.entry, coarse, fine, &s.config.functions, &samples, &options)?;
    write_atomic(&dir.join(format!("{stem}.json")), report.to_json()?.as_bytes())?;
    write_atomic(&dir.join(format!("{stem}_records.csv")), report.records_csv().as_bytes())?;
    write_atomic(&dir.join(format!("{stem}_summary.csv")), report.summary_csv().as_bytes())?;
    let sm = &report.summary;
    let mut text = format!(
        "# {} coincidence ({:?} expected, {} mode, {} samples)\n",
        s.entry.id,
        sm.expectation,
        options.mode.as_str(),
        samples.len()
    );
    for (level, r) in [("coarse", &sm.coarse), ("fine", &sm.fine)] {
        text.push_str(&format!(
            "{level}\t{:?}\tR={}\tmedian ratio {:.5}\tmedian gap {:.5}\ttol {:.2e}\n",
            r.resolution, r.stencil_radius, r.median_ratio, r.median_gap, r.budget.total
        ));
    }
    for c in &sm.checks {
        text.push_str(&format!("{}\t{}\t{}\n", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail));
    }
    Ok(Outcome { passed: sm.passed, text })
}

pub fn converge(s: &Scenario, ctx: &RunOptions<'_>) -> Result<Outcome> {
    let dir = s.out_dir(ctx.out)?;
    let stem = s.stem();
    let mode = ctx.mode(s);
    let grids = s.grids()?;
    let ns = &s.config.approximation;
    let seq = ApproximationSequence::new(s.entry.structure.clone(), *ns.last().expect("validated"))?;
    let spec = s.sample_spec()?;
    let coarse_h = grids[0].h();
    let points = draw_samples(&s.entry, &SampleSpec { count: 2 * spec.count, ..spec }, 0.0, coarse_h)?;
    let pairs: Vec<(Point, Vec<f64>)> =
        points.chunks_exact(2).map(|p| Ok((Point::new(p[0].clone())?, p[1].clone()))).collect::<Result<_>>()?;
    ensure!(!pairs.is_empty(), "no point pairs drawn");

    let distances = |fstar: &DualNorm, grid| -> Result<Vec<f64>> {
        let metric = GridMetric::new(fstar, grid)?.with_mode(mode);
        pairs.iter().map(|(x, y)| Ok(metric.point_distance(x, y)?)).collect()
    };
    let mut csv = String::from(CONVERGE_COLUMNS);
    csv.push('\n');
    let mut passed = true;
    let mut text = format!("# {} approximation study, lattice step {:.5}\n", s.entry.id, seq.step());
    text.push_str("resolution\tn\tmedian delta\tmax delta\tmedian ratio gap\tmonotone\tanalytic error\n");
    for grid in &grids {
        let base = distances(&DualNorm::new(s.entry.structure.clone()), grid)?;
        let analytic = s.entry.analytic_distance.as_ref().map(|d| {
            let errs: Vec<f64> = pairs.iter().zip(&base).map(|((x, y), b)| (b - d(x, y)).abs() / d(x, y)).collect();
            median(&errs)
        });
        let mut prev: Option<Vec<f64>> = None;
        for &n in ns {
            let member = seq.member(n)?;
            let dn = distances(&DualNorm::new(member.clone()), grid)?;
            let deltas: Vec<f64> = base.iter().zip(&dn).map(|(b, d)| b - d).collect();
            let gaps: Vec<f64> = base.iter().zip(&dn).map(|(b, d)| (d / b - 1.0).abs()).collect();
            let monotone = prev
                .as_ref()
                .is_none_or(|p| p.iter().zip(&dn).all(|(a, b)| b - a >= -MONOTONE_SLACK * a.max(1.0)));
            passed &= monotone;
            let max_delta = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let analytic_col = analytic.map_or(String::new(), num);
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                s.entry.id,
                mode.as_str(),
                grid.resolution()[0],
                grid.stencil().radius(),
                n,
                pairs.len(),
                num(median(&dn)),
                num(median(&deltas)),
                num(max_delta),
                num(median(&gaps)),
                monotone,
                analytic_col
            ));
            text.push_str(&format!(
                "{}\t{n}\t{:.3e}\t{:.3e}\t{:.3e}\t{}\t{}\n",
                grid.resolution()[0],
                median(&deltas),
                max_delta,
                median(&gaps),
                if monotone { "pass" } else { "FAIL" },
                analytic.map_or("-".into(), |a| format!("{a:.3e}"))
            ));
            prev = Some(dn);
        }
    }
    write_atomic(&dir.join(format!("{stem}.csv")), csv.as_bytes())?;
    Ok(Outcome { passed, text })
}
