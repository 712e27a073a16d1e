//! Induced distances on a grid: the length of a curve under `F*`, shortest
//! paths on a stencil graph, and metric derivatives.
//!
//! Edge weights are midpoint-rule lengths of straight segments between nodes.
//! Endpoints that are not nodes are attached by straight segments to every
//! node within the stencil reach, and joined directly when close enough, so
//! that `point_distance` is defined for arbitrary points of the box.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{sphere_directions, DualNorm};
use crate::error::{Error, Result};
use crate::geom::{norm, BoxDomain, Point, Vector};
use crate::grid::GridDomain;
use crate::structure::NormField;
use crate::tolerances::{QUADRATURE_POINTS, TOL_DUAL};

/// Off-grid endpoints attach to nodes up to this many stencil radii away.
const ATTACH_FACTOR: f64 = 2.0;

/// How `F*` is sampled at quadrature points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// The structure's own representative everywhere.
    #[default]
    Plain,
    /// On a declared exceptional set of empty interior, the value seen from
    /// the complement.
    Essential,
}

impl EvalMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(EvalMode::Plain),
            "essential" => Ok(EvalMode::Essential),
            other => Err(Error::Invalid(format!("unknown evaluation mode '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::Plain => "plain",
            EvalMode::Essential => "essential",
        }
    }
}

/// A piecewise-linear curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
    quadrature_order: usize,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>, quadrature_order: usize) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Invalid("a polyline needs at least two vertices".into()));
        }
        if quadrature_order == 0 {
            return Err(Error::Invalid("quadrature order must be positive".into()));
        }
        let dim = vertices[0].dim();
        for w in vertices.windows(2) {
            if w[1].dim() != dim {
                return Err(Error::Dimension { expected: dim, got: w[1].dim() });
            }
            if w[0] == w[1] {
                return Err(Error::Invalid("consecutive polyline vertices coincide".into()));
            }
        }
        Ok(Polyline { vertices, quadrature_order })
    }

    pub fn segment(a: Point, b: Point) -> Result<Self> {
        Self::new(vec![a, b], QUADRATURE_POINTS)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline { vertices: v, quadrature_order: self.quadrature_order }
    }

    /// `self` followed by `other`; the end of `self` must be the start of `other`.
    pub fn concat(&self, other: &Polyline) -> Result<Self> {
        if self.vertices.last() != other.vertices.first() {
            return Err(Error::Invalid("polylines do not join".into()));
        }
        let mut v = self.vertices.clone();
        v.extend(other.vertices[1..].iter().cloned());
        Polyline::new(v, self.quadrature_order)
    }
}

/// `F*` along straight segments.
#[derive(Clone, Copy)]
struct Integrand<'a> {
    fstar: &'a DualNorm,
    mode: EvalMode,
}

impl<'a> Integrand<'a> {
    #[inline]
    fn at(&self, x: &[f64], w: &[f64]) -> f64 {
        match self.mode {
            EvalMode::Plain => self.fstar.eval(x, w),
            EvalMode::Essential => self.fstar.eval_essential(x, w),
        }
    }

    fn midpoint(&self, a: &[f64], q: usize, buf: &mut [f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..q {
            let t = (k as f64 + 0.5) / q as f64;
            for i in 0..a.len() {
                buf[i] = a[i] + t * w[i];
            }
            acc += self.at(buf, w);
        }
        acc / q as f64
    }

    fn crosses(&self, a: &[f64], b: &[f64], q: usize, buf: &mut [f64], w: &[f64]) -> bool {
        let Some(d) = self.fstar.base().discontinuity() else { return false };
        let first = (d.region)(a);
        if (d.region)(b) != first {
            return true;
        }
        (0..q).any(|k| {
            let t = (k as f64 + 0.5) / q as f64;
            for i in 0..a.len() {
                buf[i] = a[i] + t * w[i];
            }
            (d.region)(buf) != first
        })
    }

    /// Length of `[a, b]`, independent of orientation; `2q` points when the
    /// segment crosses the declared jump region.
    fn segment(&self, a: &[f64], b: &[f64], q: usize) -> f64 {
        let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
        let dim = a.len();
        let mut buf = [0.0f64; 8];
        let mut wbuf = [0.0f64; 8];
        let (buf, w) = if dim <= 8 {
            (&mut buf[..dim], &mut wbuf[..dim])
        } else {
            return self.segment_heap(a, b, q);
        };
        for i in 0..dim {
            w[i] = b[i] - a[i];
        }
        let q = if self.crosses(a, b, q, buf, w) { 2 * q } else { q };
        self.midpoint(a, q, buf, w)
    }

    fn segment_heap(&self, a: &[f64], b: &[f64], q: usize) -> f64 {
        let w: Vec<f64> = b.iter().zip(a).map(|(p, o)| p - o).collect();
        let mut buf = vec![0.0; a.len()];
        let q = if self.crosses(a, b, q, &mut buf, &w) { 2 * q } else { q };
        self.midpoint(a, q, &mut buf, &w)
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Less => return true,
            Ordering::Greater => return false,
            Ordering::Equal => {}
        }
    }
    false
}

fn check_inside(domain: &BoxDomain, x: &[f64]) -> Result<()> {
    if x.len() != domain.dim() {
        return Err(Error::Dimension { expected: domain.dim(), got: x.len() });
    }
    if !domain.contains(x) {
        return Err(Error::Domain { point: x.to_vec() });
    }
    Ok(())
}

/// Composite midpoint length of `gamma` under `F*`.
pub fn curve_length(fstar: &DualNorm, gamma: &Polyline) -> Result<f64> {
    curve_length_with(fstar, gamma, EvalMode::Plain)
}

pub fn curve_length_with(fstar: &DualNorm, gamma: &Polyline, mode: EvalMode) -> Result<f64> {
    for v in gamma.vertices() {
        check_inside(fstar.base().domain(), v)?;
    }
    let f = Integrand { fstar, mode };
    Ok(gamma.vertices().windows(2).map(|s| f.segment(&s[0], &s[1], gamma.quadrature_order())).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Flow {
    Continue,
    Stop,
}

/// Graph distances from node labels `seeds`, settled by increasing label.
pub(crate) struct Search {
    pub dist: Vec<f64>,
}

/// Distances induced by `F*` on a grid.
#[derive(Clone)]
pub struct GridMetric<'a> {
    fstar: &'a DualNorm,
    grid: &'a GridDomain,
    mode: EvalMode,
    quadrature: usize,
    deltas: Vec<(Vec<i64>, isize)>,
}

impl<'a> GridMetric<'a> {
    pub fn new(fstar: &'a DualNorm, grid: &'a GridDomain) -> Result<Self> {
        if fstar.base().dim() != grid.dim() {
            return Err(Error::Dimension { expected: fstar.base().dim(), got: grid.dim() });
        }
        let res = grid.resolution();
        let deltas = grid
            .stencil()
            .offsets()
            .iter()
            .map(|o| {
                let mut stride = 1isize;
                let mut delta = 0isize;
                for k in (0..o.len()).rev() {
                    delta += o[k] as isize * stride;
                    stride *= res[k] as isize;
                }
                (o.clone(), delta)
            })
            .collect();
        Ok(GridMetric { fstar, grid, mode: EvalMode::Plain, quadrature: QUADRATURE_POINTS, deltas })
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_quadrature(mut self, q: usize) -> Self {
        self.quadrature = q.max(1);
        self
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn grid(&self) -> &GridDomain {
        self.grid
    }

    pub fn fstar(&self) -> &DualNorm {
        self.fstar
    }

    fn integrand(&self) -> Integrand<'a> {
        Integrand { fstar: self.fstar, mode: self.mode }
    }

    /// Length of the straight segment `[a, b]`.
    pub fn segment_length(&self, a: &[f64], b: &[f64]) -> f64 {
        self.integrand().segment(a, b, self.quadrature)
    }

    /// Weight of the edge between nodes `u` and `v`.
    pub fn edge_weight(&self, u: usize, v: usize) -> f64 {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let d = self.grid.dim();
        let mut ca = [0.0f64; 8];
        let mut cb = [0.0f64; 8];
        if d <= 8 {
            self.grid.coords_into(a, &mut ca[..d]);
            self.grid.coords_into(b, &mut cb[..d]);
            self.segment_length(&ca[..d], &cb[..d])
        } else {
            self.segment_length(&self.grid.coords(a), &self.grid.coords(b))
        }
    }

    fn search(&self, seeds: &[(usize, f64)], mut visit: impl FnMut(usize, f64) -> Flow) -> Search {
        let n = self.grid.node_count();
        let res = self.grid.resolution();
        let dim = self.grid.dim();
        let mut dist = vec![f64::INFINITY; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &(node, d) in seeds {
            if d < dist[node] {
                dist[node] = d;
                heap.push(Entry { dist: d, node });
            }
        }
        let mut m = vec![0usize; dim];
        while let Some(Entry { dist: d, node: u }) = heap.pop() {
            if settled[u] || d > dist[u] {
                continue;
            }
            settled[u] = true;
            if let Flow::Stop = visit(u, d) {
                break;
            }
            let mut idx = u;
            for k in (0..dim).rev() {
                m[k] = idx % res[k];
                idx /= res[k];
            }
            'edges: for (o, delta) in &self.deltas {
                for k in 0..dim {
                    let t = m[k] as i64 + o[k];
                    if t < 0 || t >= res[k] as i64 {
                        continue 'edges;
                    }
                }
                let v = (u as isize + delta) as usize;
                if settled[v] {
                    continue;
                }
                let nd = d + self.edge_weight(u, v);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry { dist: nd, node: v });
                }
            }
        }
        Search { dist }
    }

    fn attach_reach(&self) -> f64 {
        ATTACH_FACTOR * self.grid.stencil().radius() as f64
    }

    /// Straight-segment attachments of `x` to nearby nodes; a node attaches to itself only.
    fn attachments(&self, x: &[f64]) -> Vec<(usize, f64)> {
        if let Some(idx) = self.grid.node_at(x) {
            return vec![(idx, 0.0)];
        }
        let reach = self.attach_reach();
        let mut out = Vec::new();
        let mut c = vec![0.0; x.len()];
        self.grid.nodes_within_steps(x, reach, |j| {
            self.grid.coords_into(j, &mut c);
            out.push((j, self.segment_length(x, &c)));
        });
        out
    }

    fn within_reach(&self, x: &[f64], y: &[f64]) -> bool {
        let reach = self.attach_reach() + 1e-9;
        (0..x.len()).all(|k| (self.grid.fractional(k, x[k]) - self.grid.fractional(k, y[k])).abs() <= reach)
    }

    /// Distances from the node nearest `source` to every node.
    pub fn distance_map(&self, source: &Point) -> Result<DistanceMap> {
        check_inside(self.grid.domain(), source)?;
        let node = self.grid.nearest_node(source);
        let s = self.search(&[(node, 0.0)], |_, _| Flow::Continue);
        Ok(DistanceMap {
            grid: self.grid.clone(),
            source: Point::new(self.grid.coords(node))?,
            source_node: node,
            values: s.dist,
            structure_id: self.fstar.base().id().to_string(),
            mode: self.mode,
        })
    }

    /// Induced distance between two points of the box. Computed from the
    /// lexicographically smaller endpoint, so it is exactly symmetric.
    pub fn point_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_inside(self.grid.domain(), x)?;
        check_inside(self.grid.domain(), y)?;
        let (a, b) = if lex_less(y, x) { (y, x) } else { (x, y) };
        if a == b {
            return Ok(0.0);
        }
        let mut best = if self.within_reach(a, b) { self.segment_length(a, b) } else { f64::INFINITY };
        let seeds = self.attachments(a);
        let targets: HashMap<usize, f64> = self.attachments(b).into_iter().collect();
        self.search(&seeds, |u, d| {
            if d >= best {
                return Flow::Stop;
            }
            if let Some(t) = targets.get(&u) {
                best = best.min(d + t);
            }
            Flow::Continue
        });
        Ok(best)
    }

    /// Distances from `x` to every node within Euclidean distance `radius`.
    pub fn local_distances(&self, x: &[f64], radius: f64) -> Result<Vec<(usize, f64)>> {
        check_inside(self.grid.domain(), x)?;
        let h_min = self.grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
        let mut wanted: HashMap<usize, ()> = HashMap::new();
        let mut c = vec![0.0; x.len()];
        self.grid.nodes_within_steps(x, radius / h_min, |j| {
            self.grid.coords_into(j, &mut c);
            if crate::geom::dist(x, &c) <= radius * (1.0 + 1e-9) {
                wanted.insert(j, ());
            }
        });
        let mut remaining = wanted.len();
        let seeds = self.attachments(x);
        let s = self.search(&seeds, |u, _| {
            if wanted.contains_key(&u) {
                remaining -= 1;
                if remaining == 0 {
                    return Flow::Stop;
                }
            }
            Flow::Continue
        });
        let mut out: Vec<(usize, f64)> = wanted.into_keys().map(|j| (j, s.dist[j])).collect();
        out.sort_unstable_by_key(|p| p.0);
        Ok(out)
    }

    /// Distances from `x` to the points `x + k h` of the box (`k` an integer
    /// vector, `h` the spacing) within Euclidean distance `radius`, computed
    /// on the translate of the grid that has `x` as a node. Both endpoints
    /// are then nodes, so no attachment segments bend the short paths.
    pub fn lattice_distances(&self, x: &[f64], radius: f64) -> Result<Vec<(Vec<f64>, f64)>> {
        check_inside(self.grid.domain(), x)?;
        let shifted;
        let metric = if self.grid.node_at(x).is_some() {
            self.clone()
        } else {
            shifted = self.grid.translated_through(x)?;
            GridMetric::new(self.fstar, &shifted)?.with_mode(self.mode).with_quadrature(self.quadrature)
        };
        Ok(metric
            .local_distances(x, radius)?
            .into_iter()
            .filter(|(_, d)| *d > 0.0)
            .map(|(j, d)| (metric.grid.coords(j), d))
            .collect())
    }

    /// `max` of `d(x, x + t v) / t` over the two smallest `t` in `t_list`.
    /// Distances are taken on the translate of the grid through `x`, so only
    /// the far endpoint needs attaching.
    pub fn metric_derivative(&self, x: &[f64], v: &[f64], t_list: &[f64]) -> Result<MetricDerivative> {
        check_inside(self.grid.domain(), x)?;
        if v.len() != x.len() {
            return Err(Error::Dimension { expected: x.len(), got: v.len() });
        }
        if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) || t_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Invalid("t_list must be positive and strictly decreasing".into()));
        }
        let shifted;
        let metric = if self.grid.node_at(x).is_some() {
            self.clone()
        } else {
            shifted = self.grid.translated_through(x)?;
            GridMetric::new(self.fstar, &shifted)?.with_mode(self.mode).with_quadrature(self.quadrature)
        };
        let mut ratios = Vec::with_capacity(t_list.len());
        for &t in t_list {
            let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + t * b).collect();
            if !metric.grid.domain().contains(&y) {
                return Err(Error::Domain { point: y });
            }
            ratios.push((t, metric.point_distance(x, &y)? / t));
        }
        let k = ratios.len();
        let value = ratios[k.saturating_sub(2)..].iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(MetricDerivative { value, ratios })
    }

    /// A-priori relative error budget of this discretisation.
    pub fn tolerance_budget(&self, seed: u64) -> ToleranceBudget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.grid.dim();
        let domain = self.grid.domain();
        let mut stencil = 0.0f64;
        for _ in 0..32 {
            let x = crate::axioms::uniform_point(&mut rng, domain);
            let b = stencil_anisotropy(&|w: &[f64]| self.integrand().at(&x, w), self.grid.stencil().offsets(), dim);
            if b.is_finite() {
                stencil = stencil.max(b);
            }
        }
        let mut quadrature = 0.0f64;
        let f = self.integrand();
        let res = self.grid.resolution();
        for _ in 0..64 {
            let u = rng.gen_range(0..self.grid.node_count());
            let (o, delta) = &self.deltas[rng.gen_range(0..self.deltas.len())];
            let m = self.grid.multi_index(u);
            if (0..dim).any(|k| m[k] as i64 + o[k] < 0 || m[k] as i64 + o[k] >= res[k] as i64) {
                continue;
            }
            let v = (u as isize + delta) as usize;
            let (a, b) = (self.grid.coords(u.min(v)), self.grid.coords(u.max(v)));
            let w: Vec<f64> = b.iter().zip(&a).map(|(p, q)| p - q).collect();
            let mut buf = vec![0.0; dim];
            if f.crosses(&a, &b, self.quadrature, &mut buf, &w) {
                continue;
            }
            let l1 = f.midpoint(&a, self.quadrature, &mut buf, &w);
            let l2 = f.midpoint(&a, 2 * self.quadrature, &mut buf, &w);
            if l2 > 0.0 {
                quadrature = quadrature.max((l1 - l2).abs() / l2);
            }
        }
        let dual = 2.0 * TOL_DUAL;
        ToleranceBudget { stencil, quadrature, dual, total: stencil + quadrature + dual }
    }
}

/// Worst relative overestimate of the stencil graph norm over `F*` for a
/// fixed point: the cost of splitting a displacement into stencil steps.
///
/// Exact over angularly adjacent pairs in 2D; in higher dimensions each
/// direction uses the best simplicial cone among its nearest stencil
/// vectors, which can only overstate the bound.
pub fn stencil_anisotropy(fstar: &dyn Fn(&[f64]) -> f64, offsets: &[Vec<i64>], dim: usize) -> f64 {
    let vecs: Vec<Vec<f64>> = offsets.iter().map(|o| o.iter().map(|c| *c as f64).collect()).collect();
    let costs: Vec<f64> = vecs.iter().map(|e| fstar(e)).collect();
    let mut worst = 0.0f64;
    if dim == 2 {
        let mut order: Vec<usize> = (0..vecs.len()).collect();
        order.sort_by(|&i, &j| vecs[i][1].atan2(vecs[i][0]).total_cmp(&vecs[j][1].atan2(vecs[j][0])));
        for k in 0..order.len() {
            let (i, j) = (order[k], order[(k + 1) % order.len()]);
            // Linear over convex is quasi-concave in t, so golden section finds the sup.
            let ratio = |t: f64| {
                let d = [(1.0 - t) * vecs[i][0] + t * vecs[j][0], (1.0 - t) * vecs[i][1] + t * vecs[j][1]];
                ((1.0 - t) * costs[i] + t * costs[j]) / fstar(&d)
            };
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (0.0f64, 1.0f64);
            let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
            let (mut fc, mut fd) = (ratio(c), ratio(d));
            while b - a > 1e-12 {
                if fc >= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = ratio(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = ratio(d);
                }
            }
            worst = worst.max(fc.max(fd) - 1.0);
        }
        return worst;
    }
    let unit: Vec<Vec<f64>> = vecs.iter().map(|e| e.iter().map(|c| c / norm(e)).collect()).collect();
    let near = (3 * dim).min(vecs.len());
    for d in sphere_directions(dim, 256) {
        let mut idx: Vec<usize> = (0..vecs.len()).collect();
        idx.sort_by(|&a, &b| crate::geom::dot(&unit[b], &d).total_cmp(&crate::geom::dot(&unit[a], &d)));
        idx.truncate(near);
        let mut best = f64::INFINITY;
        for_each_subset(near, dim, &mut |sub| {
            let cols: Vec<&Vec<f64>> = sub.iter().map(|&s| &vecs[idx[s]]).collect();
            if let Some(coef) = solve(&cols, &d) {
                if coef.iter().all(|c| *c >= -1e-12) {
                    let cost: f64 = sub.iter().zip(&coef).map(|(&s, c)| c * costs[idx[s]]).sum();
                    best = best.min(cost);
                }
            }
        });
        if best.is_finite() {
            worst = worst.max(best / fstar(&d) - 1.0);
        }
    }
    worst
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Solves `sum_j c_j cols[j] = d` by Gaussian elimination with pivoting.
fn solve(cols: &[&Vec<f64>], d: &[f64]) -> Option<Vec<f64>> {
    let n = d.len();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cols[j][i]).chain([d[i]]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Relative error budget: stencil anisotropy + quadrature + dual accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBudget {
    pub stencil: f64,
    pub quadrature: f64,
    pub dual: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDerivative {
    pub value: f64,
    /// `(t, d(x, x + t v) / t)` for every probed `t`.
    pub ratios: Vec<(f64, f64)>,
}

/// `{16h, 8h, 4h}`.
pub fn default_t_list(grid: &GridDomain) -> Vec<f64> {
    let h = grid.h();
    vec![16.0 * h, 8.0 * h, 4.0 * h]
}

pub fn distance_map(fstar: &DualNorm, grid: &GridDomain, source: &Point) -> Result<DistanceMap> {
    GridMetric::new(fstar, grid)?.distance_map(source)
}

/// Maps from several sources, computed in parallel; order follows `sources`.
pub fn distance_maps(fstar: &DualNorm, grid: &GridDomain, sources: &[Point], mode: EvalMode) -> Result<Vec<DistanceMap>> {
    let metric = GridMetric::new(fstar, grid)?.with_mode(mode);
    sources.par_iter().map(|s| metric.distance_map(s)).collect()
}

pub fn point_distance(fstar: &DualNorm, grid: &GridDomain, x: &Point, y: &Point) -> Result<f64> {
    GridMetric::new(fstar, grid)?.point_distance(x, y)
}

pub fn metric_derivative(
    fstar: &DualNorm,
    grid: &GridDomain,
    x: &Point,
    v: &Vector,
    t_list: &[f64],
) -> Result<MetricDerivative> {
    GridMetric::new(fstar, grid)?.metric_derivative(x, v, t_list)
}

/// One sampled `(x, v)` of the metric-density check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub derivative: f64,
    pub dual: f64,
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub structure_id: String,
    pub mode: EvalMode,
    pub resolution: Vec<usize>,
    pub budget: ToleranceBudget,
    /// Samples closer than this to the declared jump set were skipped.
    pub band: f64,
    pub samples: Vec<DensitySample>,
    pub violations: usize,
    pub max_ratio: f64,
    /// `max |ratio - 1|`, reported only when the structure is weak usc.
    pub equality_gap: Option<f64>,
    pub passed: bool,
}

/// Checks `Delta(x, v) <= F*(x, v) (1 + tol_total)` at `samples` seeded
/// points away from the jump set, with unit directions `v`.
pub fn check_metric_density_inequality(metric: &GridMetric<'_>, samples: usize, seed: u64) -> Result<DensityReport> {
    let grid = metric.grid();
    let base = metric.fstar().base();
    let t_list = default_t_list(grid);
    let reach = t_list[0];
    let band = reach + 2.0 * grid.h();
    let budget = metric.tolerance_budget(seed ^ 0x7017);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut picked = Vec::with_capacity(samples);
    let mut attempts = 0usize;
    while picked.len() < samples && attempts < 1000 * samples.max(1) {
        attempts += 1;
        let x = crate::axioms::uniform_point(&mut rng, grid.domain());
        let v = crate::axioms::random_unit(&mut rng, dim);
        if grid.domain().inset(&x) < reach + grid.h() || base.distance_to_jumps(&x) < band {
            continue;
        }
        picked.push((x, v));
    }
    let tol = budget.total;
    let out: Vec<DensitySample> = picked
        .par_iter()
        .map(|(x, v)| {
            let md = metric.metric_derivative(x, v, &t_list)?;
            let dual = match metric.mode() {
                EvalMode::Plain => metric.fstar().eval(x, v),
                EvalMode::Essential => metric.fstar().eval_essential(x, v),
            };
            let ratio = md.value / dual;
            Ok(DensitySample { x: x.clone(), v: v.clone(), derivative: md.value, dual, ratio, holds: ratio <= 1.0 + tol })
        })
        .collect::<Result<_>>()?;
    let violations = out.iter().filter(|s| !s.holds).count();
    let max_ratio = out.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let equality_gap =
        base.regularity().is_usc().then(|| out.iter().map(|s| (s.ratio - 1.0).abs()).fold(0.0, f64::max));
    Ok(DensityReport {
        structure_id: base.id().to_string(),
        mode: metric.mode(),
        resolution: grid.resolution().to_vec(),
        budget,
        band,
        passed: violations == 0 && out.len() == samples,
        samples: out,
        violations,
        max_ratio,
        equality_gap,
    })
}

/// Per-node distances from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub grid: GridDomain,
    /// The source, snapped to its nearest node.
    pub source: Point,
    pub source_node: usize,
    pub values: Vec<f64>,
    pub structure_id: String,
    pub mode: EvalMode,
}

/// Contents of the binary layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDistanceMap {
    pub resolution: Vec<usize>,
    pub domain: BoxDomain,
    pub values: Vec<f64>,
}

impl DistanceMap {
    pub fn value_at(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn value_nearest(&self, x: &[f64]) -> f64 {
        self.values[self.grid.nearest_node(x)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
    }

    /// Little-endian: `u32` dimension, `u32` nodes per axis, `(f64 lo, f64 hi)`
    /// per axis, then the values as `f64`, row-major with the last axis fastest.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.grid.dim();
        w.write_all(&(d as u32).to_le_bytes())?;
        for n in self.grid.resolution() {
            w.write_all(&(*n as u32).to_le_bytes())?;
        }
        for k in 0..d {
            w.write_all(&self.grid.domain().lo[k].to_le_bytes())?;
            w.write_all(&self.grid.domain().hi[k].to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<RawDistanceMap> {
        fn u32_of<R: Read>(r: &mut R) -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        }
        let d = u32_of(&mut r)? as usize;
        if !(2..=16).contains(&d) {
            return Err(Error::Invalid(format!("bad dimension {d} in distance map header")));
        }
        let resolution = (0..d).map(|_| u32_of(&mut r).map(|n| n as usize)).collect::<Result<Vec<_>>>()?;
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for _ in 0..d {
            lo.push(f64_of(&mut r)?);
            hi.push(f64_of(&mut r)?);
        }
        let domain = BoxDomain::new(lo, hi)?;
        let count: usize = resolution.iter().product();
        let values = (0..count).map(|_| f64_of(&mut r)).collect::<Result<Vec<_>>>()?;
        Ok(RawDistanceMap { resolution, domain, values })
    }

    /// Header `x0,..,x{n-1},value`, one row per node in index order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.grid.dim();
        let header: Vec<String> = (0..d).map(|k| format!("x{k}")).chain(["value".to_string()]).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut c = vec![0.0; d];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.coords_into(i, &mut c);
            let row: Vec<String> = c.iter().chain([v]).map(|x| format!("{x}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
