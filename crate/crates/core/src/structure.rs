//! Finsler structures: pointwise norm fields `F(x, v)` on a box domain.
//!
//! A structure is an immutable bundle of closures. It optionally carries a
//! closed-form dual, a factorised dual `F*(x, w) = s(x) B(w)` (used to table
//! inf-convolutions), and a declaration of where it jumps.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{norm, BoxDomain, Point, Vector};

pub type NormFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SetFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type WitnessFn = Arc<dyn Fn(&[f64], f64) -> Vec<Vec<f64>> + Send + Sync>;

/// Declared regularity of `x -> F(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    Continuous,
    WeakUsc,
    WeakLsc,
    Measurable,
}

impl Regularity {
    /// Whether the coincidence theorem's hypothesis holds.
    pub fn is_usc(self) -> bool {
        matches!(self, Regularity::Continuous | Regularity::WeakUsc)
    }
}

/// Anything that evaluates a pointwise norm on a box.
pub trait NormField: Send + Sync {
    fn domain(&self) -> &BoxDomain;
    fn value(&self, x: &[f64], v: &[f64]) -> f64;

    fn dim(&self) -> usize {
        self.domain().dim()
    }
}

/// Where a catalog structure is discontinuous, and how to probe it.
#[derive(Clone)]
pub struct Discontinuity {
    /// Closed set whose boundary carries the jumps. Used to detect edges that
    /// cross the jump set.
    pub region: SetFn,
    /// Membership in the jump set itself.
    pub on_set: SetFn,
    /// Euclidean distance to the jump set.
    pub distance: ScalarFn,
    /// Points of `B(x, r)` on the other side of a nearby jump, if any.
    pub witnesses: Option<WitnessFn>,
    /// Dual value seen from the complement of the jump set; replaces on-set
    /// samples in essential evaluation mode.
    pub essential_dual: Option<NormFn>,
}

/// `F*(x, w) = scale(x) * base(w)`.
#[derive(Clone)]
pub struct DualFactor {
    pub scale: ScalarFn,
    pub base: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

#[derive(Clone)]
pub struct FinslerStructure {
    id: String,
    domain: BoxDomain,
    eval: NormFn,
    lambda: ScalarFn,
    lambda_max: f64,
    regularity: Regularity,
    discontinuity: Option<Discontinuity>,
    dual: Option<NormFn>,
    dual_factor: Option<DualFactor>,
}

impl fmt::Debug for FinslerStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinslerStructure")
            .field("id", &self.id)
            .field("dim", &self.domain.dim())
            .field("regularity", &self.regularity)
            .field("lambda_max", &self.lambda_max)
            .field("closed_form_dual", &self.dual.is_some())
            .field("discontinuity", &self.discontinuity.is_some())
            .finish()
    }
}

impl FinslerStructure {
    /// A structure with constant ellipticity bound `lambda_max` and no
    /// closed-form dual. Use the `with_*` methods to add the rest.
    pub fn new(
        id: impl Into<String>,
        domain: BoxDomain,
        eval: NormFn,
        lambda_max: f64,
        regularity: Regularity,
    ) -> Self {
        FinslerStructure {
            id: id.into(),
            domain,
            eval,
            lambda: Arc::new(move |_| lambda_max),
            lambda_max,
            regularity,
            discontinuity: None,
            dual: None,
            dual_factor: None,
        }
    }

    /// Pointwise ellipticity function; `lambda_max` must bound it on the box.
    pub fn with_lambda(mut self, lambda: ScalarFn, lambda_max: f64) -> Self {
        self.lambda = lambda;
        self.lambda_max = lambda_max;
        self
    }

    pub fn with_dual(mut self, dual: NormFn) -> Self {
        self.dual = Some(dual);
        self
    }

    pub fn with_dual_factor(mut self, factor: DualFactor) -> Self {
        self.dual_factor = Some(factor);
        self
    }

    pub fn with_discontinuity(mut self, d: Discontinuity) -> Self {
        self.discontinuity = Some(d);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn lambda(&self, x: &[f64]) -> f64 {
        (self.lambda)(x)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn closed_form_dual(&self) -> Option<&NormFn> {
        self.dual.as_ref()
    }

    pub fn dual_factor(&self) -> Option<&DualFactor> {
        self.dual_factor.as_ref()
    }

    pub fn discontinuity(&self) -> Option<&Discontinuity> {
        self.discontinuity.as_ref()
    }

    /// Distance to the declared jump set, `+inf` when there is none.
    pub fn distance_to_jumps(&self, x: &[f64]) -> f64 {
        self.discontinuity.as_ref().map_or(f64::INFINITY, |d| (d.distance)(x))
    }

    /// Unchecked evaluation used on hot paths.
    #[inline]
    pub fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        (self.eval)(x, v)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        Ok(())
    }

    pub(crate) fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }
}

impl NormField for FinslerStructure {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        (self.eval)(x, v)
    }
}

/// `F(x, v)` with domain and dimension checks; exactly 0 for `v = 0`.
pub fn eval_finsler(f: &FinslerStructure, x: &Point, v: &Vector) -> Result<f64> {
    f.check_point(x)?;
    f.check_vector(v)?;
    if v.iter().all(|c| *c == 0.0) {
        return Ok(0.0);
    }
    Ok(f.eval(x, v))
}

/// Euclidean norm as a `NormFn`.
pub fn euclidean_norm() -> NormFn {
    Arc::new(|_, v| norm(v))
}
