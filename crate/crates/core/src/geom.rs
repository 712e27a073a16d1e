use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the domain. At least two finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

/// A tangent vector or covector. Finite components; zero allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Invalid(format!(
                "points need at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite coordinate".into()));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Vector {
    pub fn new(comps: Vec<f64>) -> Result<Self> {
        if comps.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("non-finite vector component".into()));
        }
        Ok(Vector(comps))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

/// Axis-aligned closed box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension { expected: lo.len(), got: hi.len() });
        }
        if lo.len() < 2 {
            return Err(Error::Invalid("box needs at least 2 axes".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::Invalid("box corners must be finite with lo < hi".into()));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (a, b))| *c >= *a && *c <= *b)
    }

    /// Euclidean distance from `x` to the boundary of the box (negative outside).
    pub fn inset(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(c, (a, b))| (c - a).min(b - c))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + t (b - a)`, written into `out`.
pub fn lerp_into(a: &[f64], b: &[f64], t: f64, out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x + t * (y - x);
    }
}

pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().fold(0.0, |m, c| m.max(c.abs()))
    } else if p == 1.0 {
        v.iter().map(|c| c.abs()).sum()
    } else if p == 2.0 {
        norm(v)
    } else {
        let m = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * v.iter().map(|c| (c.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}
