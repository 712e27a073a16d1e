//! Lipschitz test functions with closed-form gradients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// `u(x) = <covector, x>`.
    Linear { covector: Vec<f64> },
    /// `u(x) = sin(pi x_axis)`.
    Sin { axis: usize },
}

/// `scale * shape`, `scale > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TestFunction {
    pub fn linear(covector: Vec<f64>) -> Self {
        TestFunction { shape: Shape::Linear { covector }, scale: 1.0 }
    }

    pub fn sin(axis: usize) -> Self {
        TestFunction { shape: Shape::Sin { axis }, scale: 1.0 }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Invalid(format!("scale must be positive, got {c}")));
        }
        Ok(TestFunction { shape: self.shape.clone(), scale: self.scale * c })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Invalid(format!("scale must be positive, got {}", self.scale)));
        }
        match &self.shape {
            Shape::Linear { covector } if covector.len() != dim => {
                Err(Error::Dimension { expected: dim, got: covector.len() })
            }
            Shape::Linear { covector } if covector.iter().any(|c| !c.is_finite()) => {
                Err(Error::Invalid("covector must be finite".into()))
            }
            Shape::Sin { axis } if *axis >= dim => Err(Error::Invalid(format!("axis {axis} out of range"))),
            _ => Ok(()),
        }
    }

    /// Value of the unscaled shape.
    pub fn shape_value(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Linear { covector } => dot(covector, x),
            Shape::Sin { axis } => (PI * x[*axis]).sin(),
        }
    }

    /// Gradient of the unscaled shape.
    pub fn shape_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.shape {
            Shape::Linear { covector } => covector.clone(),
            Shape::Sin { axis } => {
                let mut g = vec![0.0; x.len()];
                g[*axis] = PI * (PI * x[*axis]).cos();
                g
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.shape_value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.shape_gradient(x).into_iter().map(|g| self.scale * g).collect()
    }

    /// Euclidean Lipschitz constant on any domain.
    pub fn lipschitz_constant(&self) -> f64 {
        self.scale
            * match &self.shape {
                Shape::Linear { covector } => norm(covector),
                Shape::Sin { .. } => PI,
            }
    }

    pub fn descriptor(&self) -> String {
        let base = match &self.shape {
            Shape::Linear { covector } => {
                let c: Vec<String> = covector.iter().map(|c| format!("{c}")).collect();
                format!("linear({})", c.join(","))
            }
            Shape::Sin { axis } => format!("sin(pi*x{axis})"),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }
}
