//! Regular grids over a box and their neighbour stencils.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::BoxDomain;

/// Which neighbour offsets connect grid nodes.
///
/// A stencil of radius `R` holds every primitive integer offset (gcd of the
/// components is 1) with max-norm at most `R`: radius 1 is the 8-neighbour
/// (26 in 3D) stencil, radius 2 the 16-neighbour stencil in 2D, radius 3 has
/// 32 neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StencilSpec {
    Moore,
    Sixteen,
    Radius(u32),
    /// Radius `max(2, round(sqrt(N - 1) / 3))` for `N` nodes along the
    /// longest axis, so that both the radius and the reach `R h` adapt to the
    /// resolution: the anisotropy error shrinks as the grid is refined.
    Scaled,
}

impl StencilSpec {
    pub fn radius_for(&self, resolution: &[usize]) -> u32 {
        match *self {
            StencilSpec::Moore => 1,
            StencilSpec::Sixteen => 2,
            StencilSpec::Radius(r) => r,
            StencilSpec::Scaled => {
                let n = resolution.iter().copied().max().unwrap_or(3) as f64;
                ((n - 1.0).sqrt() / 3.0).round().max(2.0) as u32
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "8" | "26" | "moore" => Ok(StencilSpec::Moore),
            "16" | "sixteen" => Ok(StencilSpec::Sixteen),
            "scaled" => Ok(StencilSpec::Scaled),
            other => other
                .strip_prefix('r')
                .and_then(|r| r.parse::<u32>().ok())
                .filter(|r| *r >= 1)
                .map(StencilSpec::Radius)
                .ok_or_else(|| Error::Invalid(format!("unknown stencil '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    radius: u32,
    offsets: Vec<Vec<i64>>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Stencil {
    pub fn new(dim: usize, radius: u32) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Invalid("stencil radius must be at least 1".into()));
        }
        let r = radius as i64;
        let mut offsets = Vec::new();
        let mut o = vec![-r; dim];
        loop {
            let g = o.iter().fold(0, |acc, c| gcd(acc, *c));
            if g == 1 {
                offsets.push(o.clone());
            }
            let mut k = dim;
            loop {
                if k == 0 {
                    return Ok(Stencil { radius, offsets });
                }
                k -= 1;
                if o[k] < r {
                    o[k] += 1;
                    break;
                }
                o[k] = -r;
            }
        }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Nodes `lo + i h` along each axis, `i = 0..resolution`, corners included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    domain: BoxDomain,
    resolution: Vec<usize>,
    spec: StencilSpec,
    stencil: Stencil,
    spacing: Vec<f64>,
}

impl GridDomain {
    pub fn new(domain: BoxDomain, resolution: Vec<usize>, spec: StencilSpec) -> Result<Self> {
        if resolution.len() != domain.dim() {
            return Err(Error::Dimension { expected: domain.dim(), got: resolution.len() });
        }
        if let Some(r) = resolution.iter().find(|r| **r < 3) {
            return Err(Error::Invalid(format!("resolution must be at least 3 per axis, got {r}")));
        }
        let stencil = Stencil::new(domain.dim(), spec.radius_for(&resolution))?;
        let spacing = domain
            .lo
            .iter()
            .zip(&domain.hi)
            .zip(&resolution)
            .map(|((a, b), n)| (b - a) / (*n - 1) as f64)
            .collect();
        Ok(GridDomain { domain, resolution, spec, stencil, spacing })
    }

    /// `n x n` nodes on the unit square.
    /// The grid with the same spacing and stencil radius translated so that
    /// `x` is a node, trimmed to fit in the box.
    pub fn translated_through(&self, x: &[f64]) -> Result<GridDomain> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        let mut lo = self.domain.lo.clone();
        let mut hi = self.domain.hi.clone();
        let mut resolution = self.resolution.clone();
        for k in 0..self.dim() {
            let t = self.fractional(k, x[k]);
            let f = t - t.round();
            if f.abs() <= 1e-9 {
                continue;
            }
            let f = t - t.floor();
            lo[k] += f * self.spacing[k];
            resolution[k] -= 1;
            hi[k] = lo[k] + (resolution[k] - 1) as f64 * self.spacing[k];
        }
        let mut g = GridDomain::new(BoxDomain::new(lo, hi)?, resolution, StencilSpec::Radius(self.stencil.radius()))?;
        g.spacing = self.spacing.clone();
        Ok(g)
    }

    pub fn unit_square(n: usize, spec: StencilSpec) -> Result<Self> {
        Self::new(BoxDomain::unit(2), vec![n, n], spec)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn stencil_spec(&self) -> StencilSpec {
        self.spec
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Largest spacing over the axes.
    pub fn h(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn coords_into(&self, mut idx: usize, out: &mut [f64]) {
        for k in (0..self.dim()).rev() {
            let i = idx % self.resolution[k];
            idx /= self.resolution[k];
            out[k] = self.node_coord(k, i);
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.coords_into(idx, &mut out);
        out
    }

    #[inline]
    pub fn node_coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.resolution[axis] {
            self.domain.hi[axis]
        } else {
            self.domain.lo[axis] + i as f64 * self.spacing[axis]
        }
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            m[k] = idx % self.resolution[k];
            idx /= self.resolution[k];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.resolution).fold(0, |acc, (i, n)| acc * n + i)
    }

    /// Fractional grid coordinates of `x` along `axis`.
    #[inline]
    pub fn fractional(&self, axis: usize, x: f64) -> f64 {
        (x - self.domain.lo[axis]) / self.spacing[axis]
    }

    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let m: Vec<usize> = (0..self.dim())
            .map(|k| (self.fractional(k, x[k]).round().max(0.0) as usize).min(self.resolution[k] - 1))
            .collect();
        self.flat_index(&m)
    }

    /// The node at `x`, if `x` is one up to rounding of the node coordinates.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let on_grid = (0..self.dim()).all(|k| {
            let t = self.fractional(k, x[k]);
            (t - t.round()).abs() <= 1e-9
        });
        on_grid.then(|| self.nearest_node(x))
    }

    /// Nodes whose index lies within `reach` grid steps of `x` on every axis.
    pub fn nodes_within_steps(&self, x: &[f64], reach: f64, mut f: impl FnMut(usize)) {
        let d = self.dim();
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        for k in 0..d {
            let t = self.fractional(k, x[k]);
            let a = (t - reach - 1e-9).ceil().max(0.0);
            let b = (t + reach + 1e-9).floor().min((self.resolution[k] - 1) as f64);
            if a > b {
                return;
            }
            lo[k] = a as usize;
            hi[k] = b as usize;
        }
        let mut m = lo.clone();
        loop {
            f(self.flat_index(&m));
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if m[k] < hi[k] {
                    m[k] += 1;
                    break;
                }
                m[k] = lo[k];
            }
        }
    }
}
