//! Seeded sample sets for the a.e. checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::axioms::uniform_point;
use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};
use crate::structure::NormField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    /// Uniform in the box, away from the jump set.
    #[default]
    Uniform,
    /// Points of the entry's exceptional set, drawn by its own construction.
    InSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub kind: SampleKind,
    /// Exclusion band around the jump set, in grid cells beyond the probe footprint.
    #[serde(default = "two")]
    pub band_cells: f64,
}

fn two() -> f64 {
    2.0
}

impl SampleSpec {
    pub fn uniform(count: usize, seed: u64) -> Self {
        SampleSpec { count, seed, kind: SampleKind::Uniform, band_cells: 2.0 }
    }

    pub fn in_set(count: usize, seed: u64) -> Self {
        SampleSpec { count, seed, kind: SampleKind::InSet, band_cells: 2.0 }
    }
}

/// Draws `spec.count` points at least `footprint + h` inside the box.
/// Uniform samples also keep `footprint + band_cells * h` away from the
/// declared jump set, where `footprint` is the reach of the probes used at `x`.
pub fn draw_samples(entry: &CatalogEntry, spec: &SampleSpec, footprint: f64, h: f64) -> Result<Vec<Vec<f64>>> {
    let f = &entry.structure;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    let budget = 10_000 * spec.count.max(1);
    let band = footprint + spec.band_cells * h;
    for _ in 0..budget {
        if out.len() == spec.count {
            break;
        }
        let x = match spec.kind {
            SampleKind::Uniform => {
                let x = uniform_point(&mut rng, f.domain());
                if f.distance_to_jumps(&x) < band {
                    continue;
                }
                x
            }
            SampleKind::InSet => {
                let sampler = entry
                    .set_sampler
                    .as_ref()
                    .ok_or_else(|| Error::Invalid(format!("'{}' declares no exceptional set", entry.id)))?;
                sampler(&mut rng)
            }
        };
        if f.domain().inset(&x) >= footprint + h {
            out.push(x);
        }
    }
    if out.len() < spec.count {
        return Err(Error::Invalid(format!("could only draw {} of {} samples", out.len(), spec.count)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::by_id;

    #[test]
    fn uniform_samples_avoid_the_band() {
        let e = by_id("wlp-usc-disk").unwrap();
        let xs = draw_samples(&e, &SampleSpec::uniform(200, 1), 0.04, 0.005).unwrap();
        assert_eq!(xs.len(), 200);
        for x in &xs {
            assert!(e.structure.distance_to_jumps(x) >= 0.05);
            assert!(e.structure.domain().inset(x) >= 0.045);
        }
        assert_eq!(xs, draw_samples(&e, &SampleSpec::uniform(200, 1), 0.04, 0.005).unwrap());
    }

    #[test]
    fn in_set_samples_are_members() {
        let e = by_id("nonusc-cantor").unwrap();
        let region = e.structure.discontinuity().unwrap().region.clone();
        let xs = draw_samples(&e, &SampleSpec::in_set(100, 2), 0.04, 0.005).unwrap();
        assert!(xs.iter().all(|x| region(x)));
        assert!(draw_samples(&by_id("euclidean").unwrap(), &SampleSpec::in_set(1, 2), 0.0, 0.01).is_err());
    }
}
