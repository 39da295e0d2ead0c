//! Synthetic brain-like phantoms: nested elliptical bands
//! (background, CSF, GM, WM from the outside in) with Gaussian intensity noise.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::{save_manifest, save_tensor, Case, DatasetManifest, LabelMap, Split, Tensor, Volume, NUM_CLASSES};

/// Outer semi-axes of the CSF, GM and WM ellipses as fractions of the half-size less one pixel.
const BASE_RADII: [f64; 3] = [0.85, 0.62, 0.38];
/// Largest center offset as a fraction of the half-size, scaled by the jitter.
const CENTER_JITTER: f64 = 0.3;
const MAX_ATTEMPTS: usize = 32;
/// Minimum share of the image each class must cover.
const MIN_CLASS_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub size: (usize, usize),
    pub seed: u64,
    pub noise_sigma: f64,
    pub ring_radii_jitter: f64,
    pub class_intensity_means: [f64; NUM_CLASSES],
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            size: (32, 32),
            seed: 0,
            noise_sigma: 0.05,
            ring_radii_jitter: 0.15,
            class_intensity_means: [0.05, 0.35, 0.65, 0.9],
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size.0 < 8 || self.size.1 < 8 {
            return Err(Error::Config(format!(
                "phantom size must be at least 8x8, got {:?}",
                self.size
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.ring_radii_jitter) {
            return Err(Error::Config(format!(
                "ring_radii_jitter must be in [0, 1), got {}",
                self.ring_radii_jitter
            )));
        }
        let m = self.class_intensity_means;
        if m.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(format!(
                "class intensity means must lie in [0, 1], got {m:?}"
            )));
        }
        for i in 0..NUM_CLASSES {
            for j in i + 1..NUM_CLASSES {
                if m[i] == m[j] {
                    return Err(Error::Config(format!(
                        "class intensity means must be distinct, got {m:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

struct Geometry {
    center: (f64, f64),
    /// (row, col) semi-axes, outermost ring first.
    radii: [(f64, f64); 3],
}

impl Geometry {
    fn draw(spec: &PhantomSpec, rng: &mut SplitMix64) -> Self {
        let (hr, hc) = (spec.size.0 as f64 / 2.0, spec.size.1 as f64 / 2.0);
        let j = spec.ring_radii_jitter;
        let center = (
            hr + CENTER_JITTER * j * hr * rng.symmetric(),
            hc + CENTER_JITTER * j * hc * rng.symmetric(),
        );
        let (ar, ac) = (hr - 1.0, hc - 1.0);
        let mut radii = [(0.0, 0.0); 3];
        for (r, base) in radii.iter_mut().zip(BASE_RADII) {
            *r = (
                base * ar * (1.0 + j * rng.symmetric()),
                base * ac * (1.0 + j * rng.symmetric()),
            );
        }
        Self { center, radii }
    }

    fn label(&self, row: usize, col: usize) -> u8 {
        let (y, x) = (row as f64 + 0.5 - self.center.0, col as f64 + 0.5 - self.center.1);
        let mut class = 0;
        for (i, &(ry, rx)) in self.radii.iter().enumerate() {
            if (y / ry).powi(2) + (x / rx).powi(2) <= 1.0 {
                class = i as u8 + 1;
            }
        }
        class
    }
}

/// Nested ordering, every class covering at least 1% of the image, and only background on the border.
fn geometry_is_valid(g: &Geometry, labels: &LabelMap) -> bool {
    let ordered = g.radii.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    if !ordered {
        return false;
    }
    let (rows, cols) = (labels.dims()[0], labels.dims()[1]);
    let mut counts = [0usize; NUM_CLASSES];
    for &v in labels.data() {
        counts[v as usize] += 1;
    }
    let min = MIN_CLASS_FRACTION * (rows * cols) as f64;
    if counts.iter().any(|&c| (c as f64) < min) {
        return false;
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = labels.at(r, c);
            let border = r == 0 || c == 0 || r + 1 == rows || c + 1 == cols;
            if border && v != 0 {
                return false;
            }
        }
    }
    true
}

/// One phantom case, deterministic in `(spec, case_index)`.
pub fn generate_case(spec: &PhantomSpec, case_index: u64) -> Result<(Volume, LabelMap)> {
    spec.validate()?;
    let (rows, cols) = spec.size;
    let mut rng = SplitMix64::derive(spec.seed, case_index);
    for _ in 0..MAX_ATTEMPTS {
        let g = Geometry::draw(spec, &mut rng);
        let data = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| g.label(r, c))
            .collect();
        let labels = LabelMap::new(vec![rows, cols], data)?;
        if !geometry_is_valid(&g, &labels) {
            continue;
        }
        let intensities = labels
            .data()
            .iter()
            .map(|&c| {
                let v = spec.class_intensity_means[c as usize] + spec.noise_sigma * rng.standard_normal();
                v.clamp(0.0, 1.0) as f32
            })
            .collect();
        return Ok((Volume::from_f32(vec![rows, cols], intensities)?, labels));
    }
    Err(Error::Config(format!(
        "phantom case {case_index}: no valid geometry after {MAX_ATTEMPTS} attempts"
    )))
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn case_id(index: usize) -> String {
    format!("case_{index:03}")
}

/// Write `n_labeled + n_pool + n_test` cases and their manifest into `out_dir`.
///
/// Case indices run consecutively over the labeled, pool and test splits.
/// Every case carries ground-truth labels; pool cases are the annotation oracle's answers.
pub fn generate_benchmark(
    spec: &PhantomSpec,
    n_labeled: usize,
    n_pool: usize,
    n_test: usize,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let splits = std::iter::repeat_n(Split::Labeled, n_labeled)
        .chain(std::iter::repeat_n(Split::Unlabeled, n_pool))
        .chain(std::iter::repeat_n(Split::Test, n_test));
    let mut cases = Vec::new();
    for (index, split) in splits.enumerate() {
        let id = case_id(index);
        let (volume, labels) = generate_case(spec, index as u64)?;
        let volume_file = PathBuf::from(format!("{id}_image.vtf"));
        let labels_file = PathBuf::from(format!("{id}_labels.vtf"));
        save_tensor(&Tensor::Volume(volume), out_dir.join(&volume_file))?;
        save_tensor(&Tensor::Labels(labels), out_dir.join(&labels_file))?;
        cases.push(Case {
            id,
            volume: volume_file,
            labels: Some(labels_file),
            split,
        });
    }
    let manifest = DatasetManifest::new(out_dir, cases)?;
    save_manifest(&manifest, out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Intensities;

    #[test]
    fn noiseless_volume_uses_class_means() {
        let spec = PhantomSpec {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let (v, l) = generate_case(&spec, 3).unwrap();
        let Intensities::F32(d) = v.data() else { panic!() };
        for (x, &c) in d.iter().zip(l.data()) {
            assert_eq!(*x, spec.class_intensity_means[c as usize] as f32);
        }
    }

    #[test]
    fn cases_are_deterministic_and_distinct() {
        let spec = PhantomSpec::default();
        assert_eq!(generate_case(&spec, 5).unwrap(), generate_case(&spec, 5).unwrap());
        assert_ne!(generate_case(&spec, 5).unwrap().1, generate_case(&spec, 6).unwrap().1);
        let other = PhantomSpec {
            seed: 1,
            ..Default::default()
        };
        assert_ne!(generate_case(&spec, 5).unwrap().0, generate_case(&other, 5).unwrap().0);
    }

    #[test]
    fn every_case_has_all_classes() {
        let spec = PhantomSpec::default();
        for i in 0..100 {
            let (_, l) = generate_case(&spec, i).unwrap();
            let mut counts = [0usize; 4];
            l.data().iter().for_each(|&c| counts[c as usize] += 1);
            assert!(counts.iter().all(|&c| c * 100 >= l.len()), "case {i}: {counts:?}");
        }
    }

    #[test]
    fn small_phantoms_are_possible() {
        let spec = PhantomSpec {
            size: (8, 8),
            ..Default::default()
        };
        assert!(generate_case(&spec, 0).is_ok());
        assert!(generate_case(
            &PhantomSpec {
                size: (7, 8),
                ..Default::default()
            },
            0
        )
        .is_err());
    }

    #[test]
    fn invalid_specs() {
        let dup = PhantomSpec {
            class_intensity_means: [0.1, 0.1, 0.5, 0.9],
            ..Default::default()
        };
        assert!(dup.validate().is_err());
        assert!(PhantomSpec {
            noise_sigma: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
