//! Lower bounds for the intrinsic distance from linear admissible functions,
//! and their comparison with the induced distance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::axioms::sample_ball;
use crate::distance::GridMetric;
use crate::dual::sphere_directions;
use crate::error::{Error, Result};
use crate::geom::{dist, dot, sub};
use crate::structure::{FinslerStructure, NormField};

/// Points of `B(x, R)` at which `F` is sampled.
pub const BALL_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBound {
    pub value: f64,
    pub directions: usize,
    /// Points of the ball where `F` was sampled.
    pub ball_points: usize,
}

/// `max_e <v_e, y - x>` over `directions` unit vectors `e`, with
/// `v_e = e / max_{z in B(x, R)} F(z, e)`. Each `z -> <v_e, z>` has
/// `F(z, dz) <= 1` on the sampled ball, so the value bounds the intrinsic
/// distance from below up to the density of the `z` samples.
pub fn delta_lower_bound(f: &FinslerStructure, x: &[f64], y: &[f64], radius: f64, directions: usize) -> Result<DeltaBound> {
    f.check_point(x)?;
    f.check_point(y)?;
    let r = dist(x, y);
    if r > radius {
        return Err(Error::Invalid(format!("radius {radius} does not reach y at distance {r}")));
    }
    if r == 0.0 {
        return Ok(DeltaBound { value: 0.0, directions, ball_points: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xDE17_A001);
    let mut zs: Vec<Vec<f64>> = vec![x.to_vec(), y.to_vec()];
    for k in 1..8 {
        let t = k as f64 / 8.0;
        zs.push(x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect());
    }
    zs.extend((0..BALL_SAMPLES).map(|_| sample_ball(&mut rng, x, radius)));
    if let Some(wit) = f.discontinuity().and_then(|d| d.witnesses.as_ref()) {
        zs.extend(wit(x, radius));
        zs.extend(wit(y, radius));
    }
    zs.retain(|z| f.domain().contains(z) && dist(x, z) <= radius);
    let d = sub(y, x);
    let mut best = 0.0f64;
    for e in sphere_directions(x.len(), directions.max(1)) {
        let s = dot(&e, &d);
        if s <= 0.0 {
            continue;
        }
        let fmax = zs.iter().map(|z| f.eval(z, &e)).fold(0.0, f64::max);
        best = best.max(s / fmax);
    }
    Ok(DeltaBound { value: best, directions, ball_points: zs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub y: Vec<f64>,
    pub euclidean: f64,
    pub delta: f64,
    pub induced: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub structure_id: String,
    pub x: Vec<f64>,
    pub tolerance: f64,
    /// Probes ordered from farthest to nearest.
    pub records: Vec<RatioRecord>,
    /// `ratio <= 1 + tolerance` at every probe.
    pub bound_holds: bool,
    pub finest_ratio: f64,
    /// Finest ratio minus coarsest ratio.
    pub trend: f64,
}

/// Points `x + s e` for each scale `s`.
pub fn probe_points(x: &[f64], e: &[f64], scales: &[f64]) -> Vec<Vec<f64>> {
    scales.iter().map(|s| x.iter().zip(e).map(|(a, b)| a + s * b).collect()).collect()
}

/// `delta_lower_bound(x, y) / point_distance(x, y)` along probes `y -> x`.
pub fn check_ratio_delta_over_dc(
    metric: &GridMetric<'_>,
    x: &[f64],
    probes: &[Vec<f64>],
    directions: usize,
    tolerance: f64,
) -> Result<RatioReport> {
    let f = metric.fstar().base();
    let mut records = Vec::with_capacity(probes.len());
    for y in probes {
        let r = dist(x, y);
        let delta = delta_lower_bound(f, x, y, r, directions)?.value;
        let induced = metric.point_distance(x, y)?;
        records.push(RatioRecord { y: y.clone(), euclidean: r, delta, induced, ratio: delta / induced });
    }
    records.sort_by(|a, b| b.euclidean.total_cmp(&a.euclidean));
    let bound_holds = records.iter().all(|r| r.ratio <= 1.0 + tolerance);
    let finest_ratio = records.last().map_or(f64::NAN, |r| r.ratio);
    let trend = finest_ratio - records.first().map_or(f64::NAN, |r| r.ratio);
    Ok(RatioReport { structure_id: f.id().to_string(), x: x.to_vec(), tolerance, records, bound_holds, finest_ratio, trend })
}
