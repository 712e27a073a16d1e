//! Monotone continuous approximation from above.
//!
//! On a lattice of step `h` the dual is regularised by a discrete
//! inf-convolution,
//!
//! `T_n(y_c, v) = min_j [F*(y_j, v) + n |y_c - y_j| |v|]`,
//!
//! and `F_n*(x, v)` is the smaller of the multilinear interpolation of `T_n`
//! over the cell containing `x` and the exact terms
//!
//! `F*(x, v)` and `F*(w, v) + n |x - w| |v|` for jump witnesses `w` near `x`.
//!
//! The exact terms cap the interpolant, so `F_n* <= F*` everywhere and
//! `F_n >= F`. Near a jump the witness term ties both sides together, which
//! keeps the member continuous. Sharing one lattice across `n` makes `F_n*`
//! nondecreasing in `n`; every member satisfies the ellipticity bounds of the
//! base. `F_n` is the dual of `F_n*`, so it decreases in `n`.
//!
//! `T_n(y_c, ·)` is a minimum of norms and need not be convex when the base
//! dual is anisotropic; `F_n` is then the dual of its convex hull.

use std::sync::{Arc, OnceLock};

use crate::dual::{sphere_directions, DualNorm, DualSolver};
use crate::error::{Error, Result};
use crate::geom::{norm, BoxDomain};
use crate::structure::{DualFactor, FinslerStructure, NormField, NormFn, Regularity, ScalarFn, WitnessFn};

type BaseNorm = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Lattice covering the box, corners included.
#[derive(Debug, Clone)]
struct Lattice {
    lo: Vec<f64>,
    step: Vec<f64>,
    counts: Vec<usize>,
}

impl Lattice {
    fn new(domain: &BoxDomain, h: f64) -> Self {
        let mut step = Vec::new();
        let mut counts = Vec::new();
        for (a, b) in domain.lo.iter().zip(&domain.hi) {
            let m = ((b - a) / h).ceil().max(1.0) as usize + 1;
            counts.push(m);
            step.push((b - a) / (m - 1) as f64);
        }
        Lattice { lo: domain.lo.clone(), step, counts }
    }

    fn len(&self) -> usize {
        self.counts.iter().product()
    }

    fn coords(&self, mut idx: usize, out: &mut [f64]) {
        for k in (0..self.counts.len()).rev() {
            let i = idx % self.counts[k];
            idx /= self.counts[k];
            out[k] = self.lo[k] + i as f64 * self.step[k];
        }
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.counts.len()];
        for k in (0..self.counts.len()).rev() {
            m[k] = idx % self.counts[k];
            idx /= self.counts[k];
        }
        m
    }

    fn flat(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    /// Visits every node whose multi-index lies within `radius` (per axis) of `center`.
    fn for_each_near(&self, center: &[usize], radius: f64, mut f: impl FnMut(usize)) {
        let d = self.counts.len();
        let lo: Vec<usize> = (0..d)
            .map(|k| center[k].saturating_sub((radius / self.step[k]).floor() as usize))
            .collect();
        let hi: Vec<usize> = (0..d)
            .map(|k| (center[k] + (radius / self.step[k]).floor() as usize).min(self.counts[k] - 1))
            .collect();
        let mut m = lo.clone();
        loop {
            f(self.flat(&m));
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

/// Lower envelope of lines `slope * rho + intercept` on a range of `rho`.
#[derive(Debug, Clone, Default)]
struct Envelope {
    lines: Vec<(f64, f64)>,
}

impl Envelope {
    fn build(mut lines: Vec<(f64, f64)>, rho: (f64, f64)) -> Self {
        // descending slope: the minimising line moves this way as rho grows
        lines.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
        lines.dedup_by(|b, a| a.0 == b.0);
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for l in lines {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                // b is useless if l beats it wherever it beats a
                let xab = (b.1 - a.1) / (a.0 - b.0);
                let xal = (l.1 - a.1) / (a.0 - l.0);
                if xal <= xab {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(l);
        }
        // keep the pieces whose optimal interval meets the range
        let cross = |a: &(f64, f64), b: &(f64, f64)| (b.1 - a.1) / (a.0 - b.0);
        let k = hull.len();
        let kept = (0..k)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { cross(&hull[i - 1], &hull[i]) };
                let right = if i + 1 == k { f64::INFINITY } else { cross(&hull[i], &hull[i + 1]) };
                left <= rho.1 && right >= rho.0
            })
            .map(|i| hull[i])
            .collect();
        Envelope { lines: kept }
    }

    #[inline]
    fn eval(&self, rho: f64) -> f64 {
        self.lines.iter().map(|l| l.0 * rho + l.1).fold(f64::INFINITY, f64::min)
    }
}


/// How node values are obtained.
enum Tables {
    /// `F*(y, v) = s(y) b(v)`: per node, the envelope in `rho = b(v)/|v|`.
    Factored { scale: Vec<f64>, base: BaseNorm, rho: (f64, f64), nodes: Vec<OnceLock<Envelope>> },
    /// Direct minimisation per query.
    Direct { dual: DualNorm, lambda_max: f64 },
}

struct Inner {
    base_id: String,
    domain: BoxDomain,
    lattice: Lattice,
    n: u32,
    lambda_max: f64,
    tables: Tables,
    /// `b = |.|`: node values are `|v| t(c)` with a scalar `t`.
    euclidean_base: bool,
    base_dual: DualNorm,
    scale: Option<ScalarFn>,
    witnesses: Option<WitnessFn>,
    /// Witnesses farther than this cannot beat `F*(x, v)`.
    reach: f64,
}

impl Inner {
    fn new(base: &FinslerStructure, n: u32, h: f64) -> Self {
        let domain = base.domain().clone();
        let lattice = Lattice::new(&domain, h);
        let dim = domain.dim();
        let tables = match base.dual_factor() {
            Some(DualFactor { scale, base: b }) => {
                let mut y = vec![0.0; dim];
                let scale: Vec<f64> = (0..lattice.len())
                    .map(|i| {
                        lattice.coords(i, &mut y);
                        scale(&y)
                    })
                    .collect();
                let dirs = sphere_directions(dim, if dim == 2 { 1024 } else { 4096 });
                let ratios = dirs.iter().map(|v| b(v) / norm(v));
                let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(a, c), r| (a.min(r), c.max(r)));
                // sampled range, widened to cover unsampled directions
                let rho = (lo * 0.98, hi * 1.02);
                let nodes = (0..lattice.len()).map(|_| OnceLock::new()).collect();
                Tables::Factored { scale, base: b.clone(), rho, nodes }
            }
            None => Tables::Direct { dual: DualNorm::new(base.clone()), lambda_max: base.lambda_max() },
        };
        let euclidean_base = match &tables {
            Tables::Factored { base: b, .. } => {
                let probe = [0.6, -0.8, 0.0, 0.0];
                let dirs = sphere_directions(dim, 64);
                dirs.iter().all(|v| (b(v) - 1.0).abs() < 1e-14) && (b(&probe[..dim]) - 1.0).abs() < 1e-14
            }
            Tables::Direct { .. } => false,
        };
        let lambda_max = base.lambda_max();
        Inner {
            base_id: base.id().to_string(),
            domain,
            lattice,
            n,
            lambda_max,
            tables,
            euclidean_base,
            base_dual: DualNorm::new(base.clone()),
            scale: base.dual_factor().map(|f| f.scale.clone()),
            witnesses: base.discontinuity().and_then(|d| d.witnesses.clone()),
            reach: (lambda_max - 1.0 / lambda_max) / n as f64,
        }
    }

    fn envelope(&self, c: usize) -> &Envelope {
        let Tables::Factored { scale, rho, nodes, .. } = &self.tables else { unreachable!() };
        nodes[c].get_or_init(|| {
            let dim = self.lattice.counts.len();
            let s_min = scale.iter().cloned().fold(f64::INFINITY, f64::min);
            let n = self.n as f64;
            let radius = (scale[c] - s_min) * rho.1 / n;
            let center = self.lattice.multi(c);
            let mut yc = vec![0.0; dim];
            let mut yj = vec![0.0; dim];
            self.lattice.coords(c, &mut yc);
            let mut lines = vec![(scale[c], 0.0)];
            self.lattice.for_each_near(&center, radius, |j| {
                if j != c && scale[j] < scale[c] {
                    self.lattice.coords(j, &mut yj);
                    let d = crate::geom::dist(&yc, &yj);
                    if n * d < (scale[c] - scale[j]) * rho.1 {
                        lines.push((scale[j], n * d));
                    }
                }
            });
            Envelope::build(lines, *rho)
        })
    }

    /// `T_n(y_c, v)`.
    fn node_value(&self, c: usize, v: &[f64], vn: f64) -> f64 {
        match &self.tables {
            Tables::Factored { base, .. } => {
                if self.euclidean_base {
                    vn * self.envelope(c).eval(1.0)
                } else {
                    vn * self.envelope(c).eval(base(v) / vn)
                }
            }
            Tables::Direct { dual, lambda_max } => {
                let dim = self.lattice.counts.len();
                let n = self.n as f64;
                let mut yc = vec![0.0; dim];
                let mut yj = vec![0.0; dim];
                self.lattice.coords(c, &mut yc);
                let mut best = dual.eval(&yc, v);
                let radius = (best - vn / lambda_max) / (n * vn);
                self.lattice.for_each_near(&self.lattice.multi(c), radius, |j| {
                    if j != c {
                        self.lattice.coords(j, &mut yj);
                        let pen = n * crate::geom::dist(&yc, &yj) * vn;
                        if pen < best {
                            best = best.min(dual.eval(&yj, v) + pen);
                        }
                    }
                });
                best
            }
        }
    }

    /// Calls `f(corner_index, weight)` for the corners of the cell holding `x`.
    fn corners(&self, x: &[f64], mut f: impl FnMut(usize, f64)) {
        let d = x.len();
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        for k in 0..d {
            let t = ((x[k] - self.lattice.lo[k]) / self.lattice.step[k]).max(0.0);
            let i = (t.floor() as usize).min(self.lattice.counts[k] - 2);
            base[k] = i;
            frac[k] = (t - i as f64).clamp(0.0, 1.0);
        }
        let mut m = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let up = mask >> k & 1 == 1;
                m[k] = base[k] + up as usize;
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if w > 0.0 {
                f(self.lattice.flat(&m), w);
            }
        }
    }

    fn dual(&self, x: &[f64], v: &[f64]) -> f64 {
        let vn = norm(v);
        if vn == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        self.corners(x, |c, w| acc += w * self.node_value(c, v, vn));
        let n = self.n as f64;
        let mut best = acc.min(self.base_dual.eval(x, v));
        for w in self.near_witnesses(x) {
            best = best.min(self.base_dual.eval(&w, v) + n * crate::geom::dist(x, &w) * vn);
        }
        best
    }

    fn near_witnesses(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match &self.witnesses {
            Some(f) => f(x, self.reach),
            None => Vec::new(),
        }
    }

    /// `F_n*(x, v) / |v|` when node values are isotropic.
    fn scalar(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.corners(x, |c, w| acc += w * self.envelope(c).eval(1.0));
        let s = self.scale.as_ref().expect("factored tables");
        let n = self.n as f64;
        let mut best = acc.min(s(x));
        for w in self.near_witnesses(x) {
            best = best.min(s(&w) + n * crate::geom::dist(x, &w));
        }
        best
    }
}

/// `F_n*` as a norm field, for the numeric primal.
struct DualField(Arc<Inner>);

impl NormField for DualField {
    fn domain(&self) -> &BoxDomain {
        &self.0.domain
    }

    fn value(&self, x: &[f64], v: &[f64]) -> f64 {
        self.0.dual(x, v)
    }
}

fn member(inner: Arc<Inner>) -> FinslerStructure {
    let id = format!("{}~n{}", inner.base_id, inner.n);
    let domain = inner.domain.clone();
    let lambda_max = inner.lambda_max;
    let di = inner.clone();
    let dual: NormFn = Arc::new(move |x, v| di.dual(x, v));
    if inner.euclidean_base {
        let pi = inner.clone();
        let eval: NormFn = Arc::new(move |x, v| norm(v) / pi.scalar(x));
        let si = inner.clone();
        FinslerStructure::new(id, domain, eval, lambda_max, Regularity::Continuous)
            .with_dual(dual)
            .with_dual_factor(DualFactor { scale: Arc::new(move |x| si.scalar(x)), base: Arc::new(norm) })
    } else {
        let field = DualField(inner);
        let solver = DualSolver::default();
        let eval: NormFn = Arc::new(move |x, v| solver.maximize(&field, x, v).unwrap_or(f64::NAN));
        FinslerStructure::new(id, domain, eval, lambda_max, Regularity::Continuous).with_dual(dual)
    }
}

/// The member `F_n` for lattice step `h`. Its closed-form dual is `F_n*`.
pub fn approximate(f: &FinslerStructure, n: u32, h: f64) -> Result<FinslerStructure> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Invalid(format!("lattice step must be positive, got {h}")));
    }
    if n == 0 {
        return Err(Error::Invalid("approximation index must be at least 1".into()));
    }
    Ok(member(Arc::new(Inner::new(f, n, h))))
}

/// Members `F_1, ..., F_{n_max}` on one shared lattice, built on demand.
pub struct ApproximationSequence {
    base: FinslerStructure,
    h: f64,
    n_max: u32,
    members: Vec<OnceLock<FinslerStructure>>,
}

impl ApproximationSequence {
    /// Lattice step `1 / (4 n_max lambda_max)`.
    pub fn new(base: FinslerStructure, n_max: u32) -> Result<Self> {
        let h = 1.0 / (4.0 * n_max.max(1) as f64 * base.lambda_max());
        Self::with_step(base, n_max, h)
    }

    pub fn with_step(base: FinslerStructure, n_max: u32, h: f64) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Invalid("n_max must be at least 1".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Invalid(format!("lattice step must be positive, got {h}")));
        }
        let members = (0..n_max).map(|_| OnceLock::new()).collect();
        Ok(ApproximationSequence { base, h, n_max, members })
    }

    pub fn base(&self) -> &FinslerStructure {
        &self.base
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Lipschitz scale of member `n` in `x`, per unit `|v|`.
    pub fn lipschitz_scale(&self, n: u32) -> f64 {
        n as f64
    }

    pub fn member(&self, n: u32) -> Result<&FinslerStructure> {
        if n == 0 || n > self.n_max {
            return Err(Error::Invalid(format!("member {n} outside 1..={}", self.n_max)));
        }
        Ok(self.members[(n - 1) as usize].get_or_init(|| member(Arc::new(Inner::new(&self.base, n, self.h)))))
    }
}
