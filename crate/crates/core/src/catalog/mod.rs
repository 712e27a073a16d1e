//! Concrete Finsler structures: the Euclidean baseline, Riemannian and
//! weighted-`L^p` families, a weak-usc disk weight and a non-usc weight on a
//! product of fat Cantor sets.

pub mod approx;
pub mod cantor;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{dist, lp_norm, norm, BoxDomain};
use crate::linalg::{inv_quad_form, quad_form, sym_eigenvalues};
use crate::structure::{
    euclidean_norm, Discontinuity, DualFactor, FinslerStructure, NormFn, Regularity, ScalarFn,
};

pub use approx::{approximate, ApproximationSequence};
pub use cantor::FatCantor;

/// Writes `A(x)` row-major into the buffer.
pub type MatrixField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type SetSampler = Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

pub const EUCLIDEAN: &str = "euclidean";
pub const RIEM_DIAG_4_1: &str = "riem-diag-4-1";
pub const RIEM_SMOOTH: &str = "riem-smooth";
pub const WLP_L1: &str = "wlp-l1";
pub const WLP_P3: &str = "wlp-p3";
pub const WLP_USC_DISK: &str = "wlp-usc-disk";
pub const NONUSC_CANTOR: &str = "nonusc-cantor";

/// Every id accepted by [`by_id`].
pub const IDS: [&str; 7] = [EUCLIDEAN, RIEM_DIAG_4_1, RIEM_SMOOTH, WLP_L1, WLP_P3, WLP_USC_DISK, NONUSC_CANTOR];

#[derive(Clone)]
pub struct CatalogEntry {
    pub id: String,
    pub structure: FinslerStructure,
    /// Whether the usc hypothesis of the coincidence theorem holds.
    pub expected_coincidence: bool,
    pub analytic_dual: Option<NormFn>,
    pub analytic_distance: Option<DistanceFn>,
    /// Draws points of the structure's exceptional set, when it has one.
    pub set_sampler: Option<SetSampler>,
    /// Distance from `x` to complement pieces at least `scale` wide; how deep
    /// inside the exceptional set a point sits at a given resolution.
    pub set_depth: Option<Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>>,
    pub description: String,
}

impl std::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("id", &self.id)
            .field("structure", &self.structure)
            .field("expected_coincidence", &self.expected_coincidence)
            .finish()
    }
}

impl CatalogEntry {
    fn from_structure(structure: FinslerStructure, description: impl Into<String>) -> Self {
        CatalogEntry {
            id: structure.id().to_string(),
            expected_coincidence: structure.regularity().is_usc(),
            analytic_dual: structure.closed_form_dual().cloned(),
            analytic_distance: None,
            set_sampler: None,
            set_depth: None,
            structure,
            description: description.into(),
        }
    }

    pub fn with_analytic_distance(mut self, d: DistanceFn) -> Self {
        self.analytic_distance = Some(d);
        self
    }
}

pub fn by_id(id: &str) -> Result<CatalogEntry> {
    match id {
        EUCLIDEAN => make_euclidean(2),
        RIEM_DIAG_4_1 => riem_diag_4_1(),
        RIEM_SMOOTH => riem_smooth(),
        WLP_L1 => make_weighted_lp(WLP_L1, BoxDomain::unit(2), 1.0, Arc::new(|x| 1.0 + 0.5 * x[0]), (1.0, 1.5), Regularity::Continuous),
        WLP_P3 => make_weighted_lp(WLP_P3, BoxDomain::unit(2), 3.0, Arc::new(|x| 1.0 + x[1] * x[1]), (1.0, 2.0), Regularity::Continuous),
        WLP_USC_DISK => Ok(make_usc_disk()),
        NONUSC_CANTOR => Ok(make_nonusc_counterexample()),
        other => Err(Error::UnknownStructure(other.to_string())),
    }
}

pub fn all() -> Vec<CatalogEntry> {
    IDS.iter().map(|id| by_id(id).expect("catalog ids are valid")).collect()
}

/// `F(x, v) = |v|` on the unit cube of dimension `n`.
pub fn make_euclidean(n: usize) -> Result<CatalogEntry> {
    if n < 2 {
        return Err(Error::Invalid(format!("dimension must be at least 2, got {n}")));
    }
    let id = if n == 2 { EUCLIDEAN.to_string() } else { format!("{EUCLIDEAN}-{n}d") };
    let s = FinslerStructure::new(id, BoxDomain::unit(n), euclidean_norm(), 1.0, Regularity::Continuous)
        .with_dual(euclidean_norm())
        .with_dual_factor(DualFactor { scale: Arc::new(|_| 1.0), base: Arc::new(norm) });
    Ok(CatalogEntry::from_structure(s, "Euclidean norm").with_analytic_distance(Arc::new(dist)))
}

fn with_matrix<R>(a: &MatrixField, x: &[f64], n: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    let mut buf = [0.0f64; 16];
    if n * n <= buf.len() {
        a(x, &mut buf[..n * n]);
        f(&mut buf[..n * n])
    } else {
        let mut v = vec![0.0; n * n];
        a(x, &mut v);
        f(&mut v)
    }
}

fn matrix_lambda(a: &MatrixField, x: &[f64], n: usize) -> Result<f64> {
    let m = with_matrix(a, x, n, |m| m.to_vec());
    for i in 0..n {
        for j in 0..i {
            let (p, q) = (m[i * n + j], m[j * n + i]);
            if (p - q).abs() > 1e-12 * (1.0 + p.abs()) {
                return Err(Error::Invalid(format!("A(x) is not symmetric at {x:?}")));
            }
        }
    }
    let ev = sym_eigenvalues(&m, n);
    if !(ev[0] > 0.0) {
        return Err(Error::Invalid(format!("A(x) is not positive definite at {x:?}")));
    }
    Ok(ev[n - 1].sqrt().max(1.0 / ev[0].sqrt()).max(1.0))
}

/// `F(x, v) = sqrt(<A(x) v, v>)` with closed-form dual `sqrt(<A(x)^{-1} w, w>)`.
///
/// `A` is checked for symmetry and positive definiteness at seeded sample
/// points; `lambda_max` must bound `max(sqrt(ev_max), 1/sqrt(ev_min))`.
pub fn make_riemannian(
    id: impl Into<String>,
    domain: BoxDomain,
    a: MatrixField,
    regularity: Regularity,
    lambda_max: f64,
) -> Result<CatalogEntry> {
    let id = id.into();
    let n = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51D0_0001);
    let mut probes: Vec<Vec<f64>> = vec![domain.lo.clone(), domain.hi.clone()];
    probes.extend((0..256).map(|_| crate::axioms::uniform_point(&mut rng, &domain)));
    for x in &probes {
        let l = matrix_lambda(&a, x, n)?;
        if l > lambda_max * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!("ellipticity {l} at {x:?} exceeds lambda_max {lambda_max}")));
        }
    }
    let a_eval = a.clone();
    let eval: NormFn = Arc::new(move |x, v| with_matrix(&a_eval, x, n, |m| quad_form(m, v).max(0.0).sqrt()));
    let a_dual = a.clone();
    let dual: NormFn =
        Arc::new(move |x, w| with_matrix(&a_dual, x, n, |m| inv_quad_form(m, w).map_or(f64::NAN, |q| q.max(0.0).sqrt())));
    let a_lam = a;
    let lambda: ScalarFn = Arc::new(move |x| matrix_lambda(&a_lam, x, n).unwrap_or(f64::NAN));
    let s = FinslerStructure::new(id, domain, eval, lambda_max, regularity)
        .with_lambda(lambda, lambda_max)
        .with_dual(dual);
    Ok(CatalogEntry::from_structure(s, "Riemannian structure sqrt(<A(x)v,v>)"))
}

fn riem_diag_4_1() -> Result<CatalogEntry> {
    let a: MatrixField = Arc::new(|_, m| m.copy_from_slice(&[4.0, 0.0, 0.0, 1.0]));
    let entry = make_riemannian(RIEM_DIAG_4_1, BoxDomain::unit(2), a, Regularity::Continuous, 2.0)?;
    Ok(CatalogEntry {
        description: "constant Riemannian structure A = diag(4, 1)".into(),
        ..entry
    }
    .with_analytic_distance(Arc::new(|x, y| {
        let d = [y[0] - x[0], y[1] - x[1]];
        (0.25 * d[0] * d[0] + d[1] * d[1]).sqrt()
    })))
}

fn riem_smooth() -> Result<CatalogEntry> {
    // A(x) = R(t) diag(a, b) R(t)^T, t = pi x0 x1 / 2, a in [2, 3], b in [1, 1.5]
    let a: MatrixField = Arc::new(|x, m| {
        let t = 0.5 * std::f64::consts::PI * x[0] * x[1];
        let (s, c) = t.sin_cos();
        let ea = 2.0 + x[0];
        let eb = 1.0 + 0.5 * (std::f64::consts::PI * x[1]).sin();
        m[0] = ea * c * c + eb * s * s;
        m[1] = (ea - eb) * c * s;
        m[2] = m[1];
        m[3] = ea * s * s + eb * c * c;
    });
    let entry = make_riemannian(RIEM_SMOOTH, BoxDomain::unit(2), a, Regularity::Continuous, 3f64.sqrt())?;
    Ok(CatalogEntry { description: "smoothly rotating anisotropic Riemannian structure".into(), ..entry })
}

fn lp_lambda(w: f64, p: f64, n: usize) -> f64 {
    let k = (n as f64).powf(1.0 / p - 0.5);
    let scale = w.powf(1.0 / p);
    let lo = scale * k.min(1.0);
    let hi = scale * k.max(1.0);
    hi.max(1.0 / lo).max(1.0)
}

/// `F(x, v) = (sum_i w(x) |v_i|^p)^{1/p} = w(x)^{1/p} |v|_p`, with dual
/// `w(x)^{-1/p} |xi|_q`, `1/p + 1/q = 1` (`q = inf` for `p = 1`).
pub fn make_weighted_lp(
    id: impl Into<String>,
    domain: BoxDomain,
    p: f64,
    weight: ScalarFn,
    bounds: (f64, f64),
    regularity: Regularity,
) -> Result<CatalogEntry> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Invalid(format!("exponent p must lie in [1, inf), got {p}")));
    }
    let (c, big_c) = bounds;
    if !(c > 0.0 && c <= big_c && big_c.is_finite()) {
        return Err(Error::Invalid(format!("weight bounds must satisfy 0 < c <= C < inf, got ({c}, {big_c})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1A00_0001);
    for _ in 0..256 {
        let x = crate::axioms::uniform_point(&mut rng, &domain);
        let w = weight(&x);
        if !(w >= c && w <= big_c) {
            return Err(Error::Invalid(format!("weight {w} at {x:?} outside [{c}, {big_c}]")));
        }
    }
    let n = domain.dim();
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let inv_p = 1.0 / p;
    let we = weight.clone();
    let eval: NormFn = Arc::new(move |x, v| we(x).powf(inv_p) * lp_norm(v, p));
    let wd = weight.clone();
    let dual: NormFn = Arc::new(move |x, xi| wd(x).powf(-inv_p) * lp_norm(xi, q));
    let ws = weight.clone();
    let factor = DualFactor { scale: Arc::new(move |x| ws(x).powf(-inv_p)), base: Arc::new(move |xi| lp_norm(xi, q)) };
    let wl = weight;
    let lambda: ScalarFn = Arc::new(move |x| lp_lambda(wl(x), p, n));
    let lambda_max = lp_lambda(c, p, n).max(lp_lambda(big_c, p, n));
    let s = FinslerStructure::new(id, domain, eval, lambda_max, regularity)
        .with_lambda(lambda, lambda_max)
        .with_dual(dual)
        .with_dual_factor(factor);
    Ok(CatalogEntry::from_structure(s, format!("weighted l^{p} norm")))
}

const DISK_CENTER: [f64; 2] = [0.5, 0.5];
const DISK_RADIUS: f64 = 0.25;

/// `p = 2`, weight 4 on the closed disk of radius 1/4 about (1/2, 1/2) and 1
/// outside. The larger value sits on the closed set, so the weight is upper
/// semicontinuous.
pub fn make_usc_disk() -> CatalogEntry {
    let in_disk = |x: &[f64]| dist(x, &DISK_CENTER) <= DISK_RADIUS;
    let weight: ScalarFn = Arc::new(move |x| if in_disk(x) { 4.0 } else { 1.0 });
    let entry = make_weighted_lp(WLP_USC_DISK, BoxDomain::unit(2), 2.0, weight, (1.0, 4.0), Regularity::WeakUsc)
        .expect("valid disk parameters");
    let witnesses = Arc::new(|x: &[f64], r: f64| {
        let d = dist(x, &DISK_CENTER);
        if (d - DISK_RADIUS).abs() >= r || d == 0.0 {
            return Vec::new();
        }
        // just across the circle along the radial line
        let target = if d > DISK_RADIUS { DISK_RADIUS * (1.0 - 1e-9) } else { DISK_RADIUS * (1.0 + 1e-9) };
        vec![vec![
            DISK_CENTER[0] + (x[0] - DISK_CENTER[0]) * target / d,
            DISK_CENTER[1] + (x[1] - DISK_CENTER[1]) * target / d,
        ]]
    });
    let disc = Discontinuity {
        region: Arc::new(in_disk),
        on_set: Arc::new(|x| dist(x, &DISK_CENTER) == DISK_RADIUS),
        distance: Arc::new(|x| (dist(x, &DISK_CENTER) - DISK_RADIUS).abs()),
        witnesses: Some(witnesses),
        essential_dual: None,
    };
    let structure = entry.structure.with_discontinuity(disc);
    CatalogEntry {
        structure,
        description: "usc weight: 4 on the closed disk |x - (1/2,1/2)| <= 1/4, 1 outside (p = 2)".into(),
        ..entry
    }
}

/// Weight on the exceptional set of the counterexample.
pub const CANTOR_SET_WEIGHT: f64 = 0.25;

/// `p = 2`, weight 1/4 on `S = S1 x S1` (S1 the fat Cantor set of measure
/// 1/2) and 1 elsewhere, so `F = |v|/2` on `S` and `|v|` off it. `S` is
/// closed, nowhere dense and of measure 1/4; the weight is lower but not
/// upper semicontinuous at every point of `S`.
pub fn make_nonusc_counterexample() -> CatalogEntry {
    let cantor = FatCantor::default();
    let in_s = move |x: &[f64]| cantor.contains(x[0]) && cantor.contains(x[1]);
    let weight: ScalarFn = Arc::new(move |x| if in_s(x) { CANTOR_SET_WEIGHT } else { 1.0 });
    let entry = make_weighted_lp(
        NONUSC_CANTOR,
        BoxDomain::unit(2),
        2.0,
        weight,
        (CANTOR_SET_WEIGHT, 1.0),
        Regularity::WeakLsc,
    )
    .expect("valid counterexample parameters");
    let witnesses = Arc::new(move |x: &[f64], r: f64| {
        let mut out = Vec::new();
        for axis in 0..2 {
            for c in cantor.gap_centers_near(x[axis], r).into_iter().take(4) {
                let mut y = x.to_vec();
                y[axis] = c;
                out.push(y);
            }
        }
        out
    });
    let disc = Discontinuity {
        region: Arc::new(in_s),
        on_set: Arc::new(in_s),
        distance: Arc::new(move |x| cantor.distance(x[0]).hypot(cantor.distance(x[1]))),
        witnesses: Some(witnesses),
        essential_dual: Some(euclidean_norm()),
    };
    let structure = entry.structure.with_discontinuity(disc);
    let sampler: SetSampler = Arc::new(move |rng: &mut ChaCha8Rng| loop {
        let x = vec![rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)];
        if in_s(&x) {
            return x;
        }
    });
    let depth = Arc::new(move |x: &[f64], scale: f64| {
        (0..2)
            .map(|axis| {
                cantor
                    .descend(x[axis])
                    .gaps
                    .iter()
                    .filter(|g| g.width() >= scale)
                    .map(|g| (x[axis] - g.lo).abs().min((x[axis] - g.hi).abs()))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    });
    CatalogEntry {
        structure,
        set_sampler: Some(sampler),
        set_depth: Some(depth),
        description: "non-usc weight: 1/4 on a product of fat Cantor sets, 1 elsewhere (p = 2)".into(),
        ..entry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::{check_axioms, usc_modulus};
    use crate::geom::{Point, Vector};
    use crate::structure::eval_finsler;

    fn p(x: f64, y: f64) -> Point {
        Point::new(vec![x, y]).unwrap()
    }
    fn v(x: f64, y: f64) -> Vector {
        Vector::new(vec![x, y]).unwrap()
    }

    #[test]
    fn unknown_id_is_rejected() {
        assert!(matches!(by_id("nope"), Err(Error::UnknownStructure(_))));
    }

    #[test]
    fn euclidean_examples() {
        assert!(make_euclidean(1).is_err());
        let e = make_euclidean(2).unwrap();
        assert_eq!(eval_finsler(&e.structure, &p(0.3, 0.9), &v(1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(eval_finsler(&e.structure, &p(0.5, 0.5), &v(3.0, 4.0)).unwrap(), 5.0);
        let d = e.analytic_distance.unwrap();
        assert!((d(&[0.0, 0.0], &[1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((e.analytic_dual.unwrap())(&[0.5, 0.5], &[0.0, 2.0]), 2.0);
    }

    #[test]
    fn riemannian_examples() {
        let r = by_id(RIEM_DIAG_4_1).unwrap();
        assert_eq!(eval_finsler(&r.structure, &p(0.2, 0.2), &v(0.0, 1.0)).unwrap(), 1.0);
        assert!((eval_finsler(&r.structure, &p(0.2, 0.2), &v(1.0, 1.0)).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(((r.analytic_dual.unwrap())(&[0.1, 0.1], &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        let id: MatrixField = Arc::new(|_, m| m.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]));
        let ident = make_riemannian("ident", BoxDomain::unit(2), id, Regularity::Continuous, 1.0).unwrap();
        assert_eq!(eval_finsler(&ident.structure, &p(0.5, 0.5), &v(3.0, 4.0)).unwrap(), 5.0);
    }

    #[test]
    fn non_spd_field_is_rejected() {
        let bad: MatrixField = Arc::new(|x, m| m.copy_from_slice(&[1.0, 0.0, 0.0, x[0] - 0.5]));
        assert!(make_riemannian("bad", BoxDomain::unit(2), bad, Regularity::Continuous, 10.0).is_err());
    }

    #[test]
    fn weighted_lp_examples() {
        assert!(make_weighted_lp("bad", BoxDomain::unit(2), 0.5, Arc::new(|_| 1.0), (1.0, 1.0), Regularity::Continuous).is_err());
        let l2 = make_weighted_lp("l2", BoxDomain::unit(2), 2.0, Arc::new(|_| 1.0), (1.0, 1.0), Regularity::Continuous).unwrap();
        assert_eq!(eval_finsler(&l2.structure, &p(0.5, 0.5), &v(3.0, 4.0)).unwrap(), 5.0);
        let l1 = make_weighted_lp("l1", BoxDomain::unit(2), 1.0, Arc::new(|_| 1.0), (1.0, 1.0), Regularity::Continuous).unwrap();
        assert_eq!(eval_finsler(&l1.structure, &p(0.5, 0.5), &v(1.0, 1.0)).unwrap(), 2.0);
        assert_eq!((l1.analytic_dual.unwrap())(&[0.5, 0.5], &[3.0, -4.0]), 4.0);
        let w4 = make_weighted_lp("w4", BoxDomain::unit(2), 2.0, Arc::new(|_| 4.0), (4.0, 4.0), Regularity::Continuous).unwrap();
        assert_eq!((w4.analytic_dual.unwrap())(&[0.5, 0.5], &[0.0, 1.0]), 0.5);
    }

    #[test]
    fn catalog_structures_satisfy_axioms() {
        for e in all() {
            let r = check_axioms(&e.structure, 1000);
            assert!(r.passed, "{}: {r:?}", e.id);
        }
    }

    #[test]
    fn expected_coincidence_follows_regularity() {
        for e in all() {
            assert_eq!(e.expected_coincidence, e.id != NONUSC_CANTOR, "{}", e.id);
        }
    }

    #[test]
    fn disk_weight_is_usc_inside() {
        let d = make_usc_disk();
        assert!(d.expected_coincidence);
        let r = usc_modulus(&d.structure, &[0.5, 0.55], 0.1, &[0.1, 0.05, 0.01], 32);
        assert!(r.is_some());
        // just outside the disk, large balls reach the heavier weight
        let r = usc_modulus(&d.structure, &[0.5, 0.78], 0.1, &[0.1, 0.05, 0.01], 32);
        assert_eq!(r, Some(0.01));
    }

    #[test]
    fn cantor_counterexample_values() {
        let c = make_nonusc_counterexample();
        assert!(!c.expected_coincidence);
        // (0.5, 0.5) lies in the first gap of both factors
        assert_eq!(eval_finsler(&c.structure, &p(0.5, 0.5), &v(1.0, 0.0)).unwrap(), 1.0);
        // gap endpoints are members
        assert_eq!(eval_finsler(&c.structure, &p(0.375, 0.625), &v(1.0, 0.0)).unwrap(), 0.5);
        assert_eq!(usc_modulus(&c.structure, &[0.375, 0.625], 0.5, &[0.1, 0.01, 1e-4, 1e-6], 16), None);
    }

    #[test]
    fn cantor_set_measure_by_monte_carlo() {
        let c = make_nonusc_counterexample();
        let region = c.structure.discontinuity().unwrap().region.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| region(&[rng.gen::<f64>(), rng.gen::<f64>()])).count();
        assert!((hits as f64 / n as f64 - 0.25).abs() < 0.01);
    }
}
