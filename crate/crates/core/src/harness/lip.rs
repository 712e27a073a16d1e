//! Pointwise Lipschitz constant from annulus maxima.

use serde::{Deserialize, Serialize};

use super::testfn::TestFunction;
use crate::distance::GridMetric;
use crate::error::{Error, Result};
use crate::geom::dist;
use crate::grid::GridDomain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipEstimate {
    /// Extrapolated to radius zero from the two smallest radii.
    pub value: f64,
    /// `(r, max |u(y) - u(x)| / d(x, y) over r/2 < |y - x| <= r)`, largest `r` first.
    pub raw: Vec<(f64, f64)>,
}

// Node distances like `8 * 0.005` land a rounding error past `r`.
const ANNULUS_SLACK: f64 = 1e-9;

/// `{16h, 8h}`.
pub fn default_radii(grid: &GridDomain) -> Vec<f64> {
    let h = grid.h();
    vec![16.0 * h, 8.0 * h]
}

fn check_radii(grid: &GridDomain, radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("radii must be nonempty and strictly decreasing".into()));
    }
    let floor = 4.0 * grid.h() * (1.0 - 1e-12);
    if radii.iter().any(|r| *r < floor) {
        return Err(Error::Invalid(format!("radii must be at least 4 grid spacings ({})", 4.0 * grid.h())));
    }
    Ok(())
}

/// `Lip u(x)` estimated on the grid metric. Annulus maxima at each radius are
/// combined by two-point Richardson extrapolation with a first-order model
/// `L(r) = L0 + c r`, where `r` is the distance of the node attaining each
/// maximum.
pub fn lip_constant_at(metric: &GridMetric<'_>, u: &TestFunction, x: &[f64], radii: &[f64]) -> Result<LipEstimate> {
    check_radii(metric.grid(), radii)?;
    u.validate(x.len())?;
    let local = metric.lattice_distances(x, radii[0])?;
    lip_from_distances(metric.grid(), &local, u, x, radii)
}

/// As [`lip_constant_at`], reusing distances from `x` to the lattice points
/// near it.
/// The estimate is computed for the unscaled shape and multiplied by the
/// scale last, so it is exactly proportional to the scale.
pub fn lip_from_distances(
    grid: &GridDomain,
    local: &[(Vec<f64>, f64)],
    u: &TestFunction,
    x: &[f64],
    radii: &[f64],
) -> Result<LipEstimate> {
    check_radii(grid, radii)?;
    let ux = u.shape_value(x);
    let mut raw = Vec::with_capacity(radii.len());
    // Distance from x of the node attaining each maximum.
    let mut attained = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best: Option<(f64, f64)> = None;
        for (c, d) in local {
            let (c, d) = (c.as_slice(), *d);
            let e = dist(x, c);
            if e > 0.5 * r * (1.0 + ANNULUS_SLACK) && e <= r * (1.0 + ANNULUS_SLACK) && d > 0.0 && d.is_finite() {
                let q = (u.shape_value(c) - ux).abs() / d;
                if best.map_or(true, |(b, _)| q > b) {
                    best = Some((q, e));
                }
            }
        }
        let (best, e) = best.ok_or(Error::EmptyAnnulus { radius: r })?;
        raw.push((r, best));
        attained.push(e);
    }
    let k = raw.len();
    let value = if k == 1 {
        raw[0].1
    } else {
        // Overlapping annuli can attain both maxima at one node.
        let (r2, r1) = if attained[k - 2] > attained[k - 1] {
            (attained[k - 2], attained[k - 1])
        } else {
            (raw[k - 2].0, raw[k - 1].0)
        };
        let (l2, l1) = (raw[k - 2].1, raw[k - 1].1);
        ((r2 * l1 - r1 * l2) / (r2 - r1)).max(0.0)
    };
    Ok(LipEstimate {
        value: u.scale * value,
        raw: raw.into_iter().map(|(r, l)| (r, u.scale * l)).collect(),
    })
}
