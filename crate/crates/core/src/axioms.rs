//! Sampled checks of the admissibility axioms and of uniform upper
//! semicontinuity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::sphere_directions;
use crate::geom::{norm, BoxDomain};
use crate::structure::{FinslerStructure, NormField};
use crate::tolerances::TOL_AXIOM;

const AXIOM_SEED: u64 = 0xA710_0001;

/// Largest observed violation of each axiom over the sampled tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub tolerance: f64,
    pub homogeneity: f64,
    pub convexity: f64,
    pub subadditivity: f64,
    pub ellipticity: f64,
    pub positivity: f64,
    pub passed: bool,
}

impl AxiomReport {
    pub fn max_violation(&self) -> f64 {
        [self.homogeneity, self.convexity, self.subadditivity, self.ellipticity, self.positivity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub(crate) fn uniform_point<R: Rng>(rng: &mut R, domain: &BoxDomain) -> Vec<f64> {
    domain.lo.iter().zip(&domain.hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect()
}

fn random_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

/// Uniform direction on the unit sphere.
pub(crate) fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Axiom check with the structure's own ellipticity function and `TOL_AXIOM`.
pub fn check_axioms(f: &FinslerStructure, samples: usize) -> AxiomReport {
    check_norm_axioms(f, |x| f.lambda(x), samples, AXIOM_SEED, TOL_AXIOM)
}

/// Homogeneity, midpoint convexity, subadditivity, ellipticity against
/// `lambda` and positivity at `samples` seeded tuples.
pub fn check_norm_axioms<N, L>(field: &N, lambda: L, samples: usize, seed: u64, tol: f64) -> AxiomReport
where
    N: NormField + ?Sized,
    L: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = field.dim();
    let (mut hom, mut conv, mut sub, mut ell, mut pos) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples.max(1) {
        let x = uniform_point(&mut rng, field.domain());
        let v = random_vector(&mut rng, dim);
        let w = random_vector(&mut rng, dim);
        let lam: f64 = rng.gen_range(-3.0..3.0);

        let fv = field.value(&x, &v);
        let fw = field.value(&x, &w);
        let nv = norm(&v);

        let lv: Vec<f64> = v.iter().map(|c| lam * c).collect();
        let scale = lam.abs().max(1.0) * fv;
        if scale > 0.0 {
            hom = hom.max((field.value(&x, &lv) - lam.abs() * fv).abs() / scale);
        } else {
            hom = hom.max(field.value(&x, &lv).abs());
        }

        let mid: Vec<f64> = v.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
        let avg = 0.5 * (fv + fw);
        if avg > 0.0 {
            conv = conv.max((field.value(&x, &mid) - avg).max(0.0) / avg);
        }
        let sum: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        if fv + fw > 0.0 {
            sub = sub.max((field.value(&x, &sum) - fv - fw).max(0.0) / (fv + fw));
        }

        if nv > 0.0 {
            let l = lambda(&x);
            let lower = nv / l - fv;
            let upper = fv - l * nv;
            ell = ell.max(lower.max(upper).max(0.0) / nv);
            if !(fv > 0.0) {
                pos = 1.0;
            }
        }
    }
    let mut report = AxiomReport {
        samples,
        tolerance: tol,
        homogeneity: hom,
        convexity: conv,
        subadditivity: sub,
        ellipticity: ell,
        positivity: pos,
        passed: false,
    };
    report.passed = report.max_violation() <= tol;
    report
}

/// Ball sampling used by [`usc_modulus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UscProbe {
    pub ball_samples: usize,
    pub seed: u64,
}

impl Default for UscProbe {
    fn default() -> Self {
        UscProbe { ball_samples: 64, seed: 0x05C0_0001 }
    }
}

/// Largest radius in `probe_radii` (given in decreasing order) at which
/// `F(y, v) <= (1 + eps) F(x, v)` holds for all sampled `y` in `B(x, r)` and
/// all sampled unit `v`; `None` if even the smallest radius fails.
///
/// Ball samples are seeded random points plus the structure's witness points
/// across nearby jumps, when it declares any.
pub fn usc_modulus(
    f: &FinslerStructure,
    x: &[f64],
    eps: f64,
    probe_radii: &[f64],
    directions: usize,
) -> Option<f64> {
    usc_modulus_with(f, x, eps, probe_radii, directions, UscProbe::default())
}

pub fn usc_modulus_with(
    f: &FinslerStructure,
    x: &[f64],
    eps: f64,
    probe_radii: &[f64],
    directions: usize,
    probe: UscProbe,
) -> Option<f64> {
    let dim = f.dim();
    let dirs = sphere_directions(dim, directions.max(1));
    let fx: Vec<f64> = dirs.iter().map(|v| f.eval(x, v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    for &r in probe_radii {
        let mut ys: Vec<Vec<f64>> = (0..probe.ball_samples).map(|_| sample_ball(&mut rng, x, r)).collect();
        if let Some(wit) = f.discontinuity().and_then(|d| d.witnesses.as_ref()) {
            ys.extend(wit(x, r));
        }
        let ok = ys
            .iter()
            .filter(|y| f.domain().contains(y) && crate::geom::dist(x, y) <= r)
            .all(|y| dirs.iter().zip(&fx).all(|(v, fxv)| f.eval(y, v) <= (1.0 + eps) * fxv));
        if ok {
            return Some(r);
        }
    }
    None
}

pub(crate) fn sample_ball<R: Rng>(rng: &mut R, x: &[f64], r: f64) -> Vec<f64> {
    loop {
        let d: Vec<f64> = x.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if norm(&d) <= 1.0 {
            return x.iter().zip(&d).map(|(c, e)| c + r * e).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::structure::Regularity;

    #[test]
    fn euclidean_has_no_violations() {
        let f = FinslerStructure::new("e", BoxDomain::unit(2), Arc::new(|_, v| norm(v)), 1.0, Regularity::Continuous);
        let r = check_axioms(&f, 1000);
        assert!(r.passed);
        assert!(r.max_violation() < 1e-15, "{r:?}");
    }

    #[test]
    fn affine_offset_breaks_homogeneity() {
        let f = FinslerStructure::new("broken", BoxDomain::unit(2), Arc::new(|_, v| norm(v) + 1.0), 5.0, Regularity::Continuous);
        let r = check_axioms(&f, 1000);
        assert!(r.homogeneity > 0.0);
        assert!(!r.passed);
    }

    #[test]
    fn nonconvex_gauge_is_flagged() {
        // l^{1/2} quasi-norm is homogeneous but not convex
        let f = FinslerStructure::new(
            "quasi",
            BoxDomain::unit(2),
            Arc::new(|_, v: &[f64]| (v[0].abs().sqrt() + v[1].abs().sqrt()).powi(2)),
            10.0,
            Regularity::Continuous,
        );
        let r = check_axioms(&f, 1000);
        assert!(r.convexity > 1e-3);
        assert!(!r.passed);
    }

    #[test]
    fn wrong_lambda_fails_ellipticity() {
        let f = FinslerStructure::new("big", BoxDomain::unit(2), Arc::new(|_, v| 3.0 * norm(v)), 2.0, Regularity::Continuous);
        let r = check_axioms(&f, 100);
        assert!(r.ellipticity > 0.4);
    }

    #[test]
    fn continuous_structure_has_usc_radius() {
        let f = FinslerStructure::new(
            "smooth",
            BoxDomain::unit(2),
            Arc::new(|x: &[f64], v: &[f64]| (1.0 + x[0]) * norm(v)),
            2.0,
            Regularity::Continuous,
        );
        let r = usc_modulus(&f, &[0.5, 0.5], 0.1, &[0.2, 0.1, 0.05, 0.01], 32);
        // 1 + x0 grows by at most r, so r <= 0.15 passes but 0.2 may not
        assert_eq!(r, Some(0.1));
    }
}
