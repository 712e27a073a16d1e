//! Smith–Volterra–Cantor set of measure 1/2 in `[0, 1]`.
//!
//! Step `k` removes an open middle interval of length `4^-k` from each of
//! the `2^(k-1)` remaining closed intervals. Membership is resolved to a
//! fixed depth; points that survive every resolved level count as members.

use serde::{Deserialize, Serialize};

use crate::tolerances::CANTOR_DEPTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FatCantor {
    pub depth: u32,
}

impl Default for FatCantor {
    fn default() -> Self {
        FatCantor { depth: CANTOR_DEPTH }
    }
}

/// An open gap `(lo, hi)` removed at `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub level: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Gap {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Where the descent for `t` ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    /// Gaps met on the way down, coarsest first. The last one contains `t`
    /// when `t` is not a member.
    pub gaps: Vec<Gap>,
    pub member: bool,
    /// Final interval when `t` is a member.
    pub interval: (f64, f64),
}

impl FatCantor {
    pub fn new(depth: u32) -> Self {
        FatCantor { depth }
    }

    /// Lebesgue measure of the depth-limited set.
    pub fn measure(&self) -> f64 {
        1.0 - (1..=self.depth).map(|k| 2f64.powi(k as i32 - 1) * 4f64.powi(-(k as i32))).sum::<f64>()
    }

    pub fn contains(&self, t: f64) -> bool {
        if !(0.0..=1.0).contains(&t) {
            return false;
        }
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut g = 1.0f64;
        for _ in 0..self.depth {
            g *= 0.25;
            let c = 0.5 * (a + b);
            let half = 0.5 * g;
            if (t - c).abs() < half {
                return false;
            }
            if t < c {
                b = c - half;
            } else {
                a = c + half;
            }
        }
        true
    }

    pub fn descend(&self, t: f64) -> Descent {
        let mut gaps = Vec::new();
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut g = 1.0f64;
        if !(0.0..=1.0).contains(&t) {
            return Descent { gaps, member: false, interval: (a, b) };
        }
        for level in 1..=self.depth {
            g *= 0.25;
            let c = 0.5 * (a + b);
            let half = 0.5 * g;
            let gap = Gap { level, lo: c - half, hi: c + half };
            gaps.push(gap);
            if (t - c).abs() < half {
                return Descent { gaps, member: false, interval: (a, b) };
            }
            if t < c {
                b = gap.lo;
            } else {
                a = gap.hi;
            }
        }
        Descent { gaps, member: true, interval: (a, b) }
    }

    /// Distance from `t` to the set.
    pub fn distance(&self, t: f64) -> f64 {
        if t < 0.0 {
            return -t;
        }
        if t > 1.0 {
            return t - 1.0;
        }
        let d = self.descend(t);
        if d.member {
            return 0.0;
        }
        let gap = d.gaps.last().expect("non-member below depth has a gap");
        (t - gap.lo).min(gap.hi - t)
    }

    /// Centres of gaps within distance `r` of `t`, coarsest first. Gaps too
    /// narrow to hold a representable interior point are skipped.
    pub fn gap_centers_near(&self, t: f64, r: f64) -> Vec<f64> {
        self.descend(t)
            .gaps
            .iter()
            .filter(|g| (g.center() - t).abs() < r && g.width() > 8.0 * f64::EPSILON * g.center().abs().max(1e-300))
            .map(Gap::center)
            .collect()
    }
}
