//! Dual norms by maximisation over the unit sphere.
//!
//! `F*(x, w) = max_{v != 0} <w, v> / F(x, v)`. One-homogeneity reduces the
//! search to unit directions: a coarse sweep locates the maximiser, then a
//! local refinement (golden section on the angle in 2D, a shrinking pattern
//! search on the sphere otherwise) polishes it. The objective restricted to
//! the boundary of a convex unit ball is unimodal around its maximum, so the
//! bracket found by the sweep is safe to refine.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{dot, norm, BoxDomain, Point, Vector};
use crate::structure::{FinslerStructure, NormField, NormFn};
use crate::tolerances::{DUAL_DIRECTIONS_2D, DUAL_DIRECTIONS_3D};

/// Parameters of the sampled dual maximisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolver {
    /// Coarse directions; `None` picks 256 in 2D and 2048 otherwise.
    pub coarse: Option<usize>,
    /// Stop refining once the bracket (2D) or step (nD) is below this angle.
    pub angle_tol: f64,
    /// Skip the refinement stage (coarse sweep only).
    pub refine: bool,
}

impl Default for DualSolver {
    fn default() -> Self {
        DualSolver { coarse: None, angle_tol: 1e-10, refine: true }
    }
}

const DEGENERATE: f64 = 1e-12;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

impl DualSolver {
    fn directions(&self, dim: usize) -> usize {
        self.coarse.unwrap_or(if dim == 2 { DUAL_DIRECTIONS_2D } else { DUAL_DIRECTIONS_3D })
    }

    /// `max_{|v|=1} <w, v> / field(x, v)`. No argument checks.
    pub fn maximize<N: NormField + ?Sized>(&self, field: &N, x: &[f64], w: &[f64]) -> Result<f64> {
        if w.iter().all(|c| *c == 0.0) {
            return Ok(0.0);
        }
        if w.len() == 2 {
            self.maximize_2d(field, x, w)
        } else {
            self.maximize_nd(field, x, w)
        }
    }

    fn ratio<N: NormField + ?Sized>(field: &N, x: &[f64], w: &[f64], v: &[f64]) -> Result<f64> {
        // v is a unit vector; below this no admissible ellipticity bound is plausible
        let f = field.value(x, v);
        if !(f > DEGENERATE) || !f.is_finite() {
            return Err(Error::IllPosed(format!(
                "norm vanishes or is not finite at x = {x:?} in direction {v:?}"
            )));
        }
        Ok(dot(w, v) / f)
    }

    fn maximize_2d<N: NormField + ?Sized>(&self, field: &N, x: &[f64], w: &[f64]) -> Result<f64> {
        let m = self.directions(2);
        let step = 2.0 * PI / m as f64;
        let at = |theta: f64| -> Result<f64> {
            let v = [theta.cos(), theta.sin()];
            Self::ratio(field, x, w, &v)
        };
        let mut best = f64::NEG_INFINITY;
        let mut best_theta = 0.0;
        for k in 0..m {
            let theta = k as f64 * step;
            let r = at(theta)?;
            if r > best {
                best = r;
                best_theta = theta;
            }
        }
        if !self.refine {
            return Ok(best);
        }
        // golden section on [theta* - step, theta* + step]
        let (mut a, mut b) = (best_theta - step, best_theta + step);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = at(c)?;
        let mut fd = at(d)?;
        while b - a > self.angle_tol {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = at(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = at(d)?;
            }
        }
        Ok(best.max(fc).max(fd).max(at(0.5 * (a + b))?))
    }

    fn maximize_nd<N: NormField + ?Sized>(&self, field: &N, x: &[f64], w: &[f64]) -> Result<f64> {
        let n = w.len();
        let m = self.directions(n);
        let dirs = sphere_directions(n, m);
        let mut best = f64::NEG_INFINITY;
        let mut u = dirs[0].clone();
        for d in &dirs {
            let r = Self::ratio(field, x, w, d)?;
            if r > best {
                best = r;
                u = d.clone();
            }
        }
        if !self.refine {
            return Ok(best);
        }
        let mut step = (4.0 * PI / m as f64).sqrt();
        let mut trial = vec![0.0; n];
        while step > self.angle_tol {
            let basis = tangent_basis(&u);
            let mut improved = false;
            for t in &basis {
                for sign in [1.0, -1.0] {
                    for ((o, a), b) in trial.iter_mut().zip(&u).zip(t) {
                        *o = a + sign * step * b;
                    }
                    let len = norm(&trial);
                    trial.iter_mut().for_each(|c| *c /= len);
                    let r = Self::ratio(field, x, w, &trial)?;
                    if r > best {
                        best = r;
                        u.copy_from_slice(&trial);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok(best)
    }
}

/// Deterministic, roughly uniform unit directions. Fibonacci lattice in 3D,
/// seeded Gaussian samples beyond.
pub fn sphere_directions(n: usize, m: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1a1 ^ n as u64);
            (0..m)
                .map(|_| loop {
                    let v: Vec<f64> = (0..n).map(|_| unit_gaussian(&mut rng)).collect();
                    let l = norm(&v);
                    if l > 1e-9 {
                        break v.into_iter().map(|c| c / l).collect();
                    }
                })
                .collect()
        }
    }
}

/// Orthonormal basis of the tangent space at the unit vector `u`.
fn tangent_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for axis in 0..n {
        let mut e = vec![0.0; n];
        e[axis] = 1.0;
        let p = dot(&e, u);
        e.iter_mut().zip(u).for_each(|(c, ui)| *c -= p * ui);
        for b in &basis {
            let q = dot(&e, b);
            e.iter_mut().zip(b).for_each(|(c, bi)| *c -= q * bi);
        }
        let l = norm(&e);
        if l > 1e-8 {
            e.iter_mut().for_each(|c| *c /= l);
            basis.push(e);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

// Box-Muller
fn unit_gaussian<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// `F*(x, w)` by sampled maximisation with the default solver.
pub fn dual_eval(f: &FinslerStructure, x: &Point, w: &Vector) -> Result<f64> {
    f.check_point(x)?;
    f.check_vector(w)?;
    DualSolver::default().maximize(f, x, w)
}

/// `(F*)*(x, v)`: the sampled dual of `DualNorm::new(F)` (closed-form inner
/// dual when the structure has one).
pub fn bidual_eval(f: &FinslerStructure, x: &Point, v: &Vector) -> Result<f64> {
    f.check_point(x)?;
    f.check_vector(v)?;
    DualSolver::default().maximize(&DualNorm::new(f.clone()), x, v)
}

/// `(F*)*(x, v)` with both dualisations sampled.
pub fn bidual_numeric(f: &FinslerStructure, x: &Point, v: &Vector) -> Result<f64> {
    f.check_point(x)?;
    f.check_vector(v)?;
    DualSolver::default().maximize(&DualNorm::numeric(f.clone()), x, v)
}

#[derive(Clone)]
enum Route {
    ClosedForm(NormFn),
    Numeric(DualSolver),
}

/// The dual structure `F*` of a Finsler structure.
///
/// Uses the base's closed-form dual when it has one, otherwise the sampled
/// maximisation. Evaluation on the numeric route returns `NaN` where the base
/// is not elliptic.
#[derive(Clone)]
pub struct DualNorm {
    base: FinslerStructure,
    route: Route,
}

impl std::fmt::Debug for DualNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DualNorm")
            .field("base", &self.base.id())
            .field("closed_form", &matches!(self.route, Route::ClosedForm(_)))
            .finish()
    }
}

impl DualNorm {
    pub fn new(base: FinslerStructure) -> Self {
        let route = match base.closed_form_dual() {
            Some(d) => Route::ClosedForm(d.clone()),
            None => Route::Numeric(DualSolver::default()),
        };
        DualNorm { base, route }
    }

    pub fn numeric(base: FinslerStructure) -> Self {
        DualNorm { base, route: Route::Numeric(DualSolver::default()) }
    }

    pub fn with_solver(base: FinslerStructure, solver: DualSolver) -> Self {
        DualNorm { base, route: Route::Numeric(solver) }
    }

    pub fn base(&self) -> &FinslerStructure {
        &self.base
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.route, Route::ClosedForm(_))
    }

    #[inline]
    pub fn eval(&self, x: &[f64], w: &[f64]) -> f64 {
        match &self.route {
            Route::ClosedForm(d) => d(x, w),
            Route::Numeric(s) => s.maximize(&self.base, x, w).unwrap_or(f64::NAN),
        }
    }

    /// Dual value with on-set samples replaced by the complement's value,
    /// for structures that declare one.
    #[inline]
    pub fn eval_essential(&self, x: &[f64], w: &[f64]) -> f64 {
        if let Some(d) = self.base.discontinuity() {
            if let Some(ess) = &d.essential_dual {
                if (d.on_set)(x) {
                    return ess(x, w);
                }
            }
        }
        self.eval(x, w)
    }

    pub fn eval_checked(&self, x: &Point, w: &Vector) -> Result<f64> {
        self.base.check_point(x)?;
        self.base.check_vector(w)?;
        match &self.route {
            Route::ClosedForm(d) => Ok(d(x, w)),
            Route::Numeric(s) => s.maximize(&self.base, x, w),
        }
    }
}

impl NormField for DualNorm {
    fn domain(&self) -> &BoxDomain {
        self.base.domain()
    }

    fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        self.eval(x, v)
    }
}
