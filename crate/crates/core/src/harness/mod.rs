//! Numerical checks of the coincidence `Lip u(x) = F(x, du(x))` and of the
//! inequalities around it.

pub mod coincidence;
pub mod delta;
pub mod lip;
pub mod sampling;
pub mod testfn;

pub use coincidence::{
    check_coincidence, check_uniform_usc, check_upper_bound, f_of_du, CoincidenceOptions, CoincidenceRecord,
    CoincidenceReport, CoincidenceThresholds, Expectation, UpperBoundReport, UscReport,
};
pub use delta::{check_ratio_delta_over_dc, delta_lower_bound, probe_points, DeltaBound, RatioReport};
pub use lip::{default_radii, lip_constant_at, lip_from_distances, LipEstimate};
pub use sampling::{draw_samples, SampleKind, SampleSpec};
pub use testfn::{Shape, TestFunction};

/// Linearly interpolated quantile of unsorted data; `NaN` when empty.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}
