//! Synthetic dataset generator: random non-overlapping ellipses per class
//! with distinct mean colors. Used for test fixtures and reproducible
//! demonstration runs; deterministic for a fixed seed, with per-sample
//! random streams so the output does not depend on generation order.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::MAX_INSTANCE_ID;
use crate::dataset::{write_manifest, write_sample, DatasetManifest, Sample};
use crate::error::{Error, Result};
use crate::raster::{LabelRaster, RgbRaster};

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub samples: usize,
    pub height: u32,
    pub width: u32,
    /// Number of major classes (ids 1..=n).
    pub major_classes: u32,
    /// Number of rare classes (ids follow the major ids).
    pub rare_classes: u32,
    pub majors_per_image: u32,
    pub rares_per_image: u32,
    /// Inclusive semi-axis range for major-class ellipses.
    pub major_radius: (u32, u32),
    /// Inclusive semi-axis range for rare-class ellipses.
    pub rare_radius: (u32, u32),
    /// Minimum Chebyshev gap between instance footprints. Zero allows
    /// touching instances.
    pub spacing: u32,
    /// Keep-out border so every instance has room for a working patch
    /// around it.
    pub margin: u32,
    /// Per-pixel uniform color jitter amplitude.
    pub noise: u8,
    /// Placement attempts per instance before giving up.
    pub max_attempts: u32,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            samples: 4,
            height: 128,
            width: 128,
            major_classes: 2,
            rare_classes: 1,
            majors_per_image: 18,
            rares_per_image: 2,
            major_radius: (6, 9),
            rare_radius: (2, 3),
            spacing: 1,
            margin: 14,
            noise: 5,
            max_attempts: 400,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if self.major_classes == 0 || self.rare_classes == 0 {
            return Err(Error::Config(
                "need at least one major and one rare class".into(),
            ));
        }
        if self.major_radius.0 == 0 || self.rare_radius.0 == 0 {
            return Err(Error::Config("radii must be positive".into()));
        }
        if self.major_radius.0 > self.major_radius.1 || self.rare_radius.0 > self.rare_radius.1 {
            return Err(Error::Config("radius ranges must be min <= max".into()));
        }
        let needed = 2 * (self.margin + self.major_radius.1 + 2);
        if self.height < needed || self.width < needed {
            return Err(Error::Config(format!(
                "frame {}x{} too small for margin {} and max radius {}",
                self.height, self.width, self.margin, self.major_radius.1
            )));
        }
        let per_image = u64::from(self.majors_per_image) + u64::from(self.rares_per_image);
        if per_image == 0 {
            return Err(Error::Config("nothing to place".into()));
        }
        if per_image > u64::from(MAX_INSTANCE_ID) {
            return Err(Error::Config("too many instances for the id encoding".into()));
        }
        Ok(())
    }

    fn taxonomy(&self) -> BTreeMap<u32, String> {
        let mut taxonomy = BTreeMap::new();
        for m in 1..=self.major_classes {
            taxonomy.insert(m, format!("major_{m}"));
        }
        for r in 1..=self.rare_classes {
            taxonomy.insert(self.major_classes + r, format!("rare_{r}"));
        }
        taxonomy
    }
}

/// Mean colors per class: majors cycle a warm palette, rares a cool one,
/// so class statistics are clearly separated.
fn class_color(params: &SynthParams, class_id: u32) -> [u8; 3] {
    const MAJOR_PALETTE: [[u8; 3]; 4] = [
        [142, 84, 158],
        [98, 104, 182],
        [168, 96, 120],
        [120, 130, 96],
    ];
    const RARE_PALETTE: [[u8; 3]; 4] = [
        [62, 150, 104],
        [182, 140, 70],
        [70, 160, 160],
        [150, 160, 60],
    ];
    if class_id <= params.major_classes {
        MAJOR_PALETTE[(class_id - 1) as usize % MAJOR_PALETTE.len()]
    } else {
        RARE_PALETTE[(class_id - params.major_classes - 1) as usize % RARE_PALETTE.len()]
    }
}

const BACKGROUND: [u8; 3] = [228, 219, 233];

fn jitter(rng: &mut ChaCha8Rng, base: [u8; 3], amplitude: i32) -> [u8; 3] {
    let mut px = base;
    for ch in &mut px {
        let delta = rng.gen_range(-amplitude..=amplitude);
        *ch = (i32::from(*ch) + delta).clamp(0, 255) as u8;
    }
    px
}

/// Pixels of an axis-aligned ellipse at integer center with given semi-axes.
fn ellipse_pixels(center: (u32, u32), semi: (u32, u32)) -> Vec<(u32, u32)> {
    let (r0, c0) = (i64::from(center.0), i64::from(center.1));
    let (a, b) = (f64::from(semi.0), f64::from(semi.1));
    let mut out = Vec::new();
    for dr in -(semi.0 as i64)..=(semi.0 as i64) {
        for dc in -(semi.1 as i64)..=(semi.1 as i64) {
            let fr = dr as f64 / a;
            let fc = dc as f64 / b;
            if fr * fr + fc * fc <= 1.0 {
                out.push(((r0 + dr) as u32, (c0 + dc) as u32));
            }
        }
    }
    out
}

/// Per-class instance counts.
pub type Census = BTreeMap<u32, u64>;

/// Generate the samples in memory along with the manifest skeleton and the
/// exact census of what was placed.
pub fn generate_samples(params: &SynthParams) -> Result<(Vec<Sample>, DatasetManifest, Census)> {
    params.validate()?;
    let mut samples = Vec::with_capacity(params.samples);
    let mut census: Census = BTreeMap::new();
    let mut requested: u64 = 0;
    let mut placed_total: u64 = 0;

    for sample_idx in 0..params.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(sample_idx as u64);

        let mut image = RgbRaster::filled(params.height, params.width, BACKGROUND);
        if params.noise > 0 {
            let amp = i32::from(params.noise);
            for r in 0..params.height {
                for c in 0..params.width {
                    image.set(r, c, jitter(&mut rng, BACKGROUND, amp));
                }
            }
        }
        let mut labels = LabelRaster::filled(params.height, params.width, 0);
        // blocked = placed footprints dilated by `spacing`
        let mut blocked = vec![false; (params.height * params.width) as usize];
        let mut class_of = BTreeMap::new();
        let mut next_id: u32 = 1;

        // class id, semi-axis range; majors round-robin first, then rares
        let mut placements: Vec<(u32, (u32, u32))> = Vec::new();
        for k in 0..params.majors_per_image {
            let class = 1 + (k % params.major_classes);
            placements.push((class, params.major_radius));
        }
        for k in 0..params.rares_per_image {
            let class = params.major_classes + 1 + (k % params.rare_classes);
            placements.push((class, params.rare_radius));
        }
        requested += placements.len() as u64;

        for (class, radius_range) in placements {
            let mut placed = false;
            for _ in 0..params.max_attempts {
                let a = rng.gen_range(radius_range.0..=radius_range.1);
                let b = rng.gen_range(radius_range.0..=radius_range.1);
                let reach = a.max(b) + params.margin;
                if params.height <= 2 * reach || params.width <= 2 * reach {
                    continue;
                }
                let r0 = rng.gen_range(reach..params.height - reach);
                let c0 = rng.gen_range(reach..params.width - reach);
                let pixels = ellipse_pixels((r0, c0), (a, b));
                if pixels
                    .iter()
                    .any(|&(r, c)| blocked[(r * params.width + c) as usize])
                {
                    continue;
                }
                let base = jitter(&mut rng, class_color(params, class), 12);
                for &(r, c) in &pixels {
                    labels.set(r, c, next_id);
                    image.set(r, c, jitter(&mut rng, base, i32::from(params.noise)));
                }
                let s = i64::from(params.spacing);
                for &(r, c) in &pixels {
                    for dr in -s..=s {
                        for dc in -s..=s {
                            let nr = i64::from(r) + dr;
                            let nc = i64::from(c) + dc;
                            if nr >= 0
                                && nc >= 0
                                && nr < i64::from(params.height)
                                && nc < i64::from(params.width)
                            {
                                blocked[(nr as u32 * params.width + nc as u32) as usize] = true;
                            }
                        }
                    }
                }
                class_of.insert(next_id, class);
                *census.entry(class).or_insert(0) += 1;
                next_id += 1;
                placed = true;
                break;
            }
            if !placed {
                return Err(Error::PackingFailed {
                    placed: placed_total + u64::from(next_id - 1),
                    requested,
                });
            }
        }
        placed_total += u64::from(next_id - 1);

        let sample = Sample {
            id: format!("s{sample_idx:04}"),
            image,
            instance_map: labels,
            class_of,
        };
        debug_assert!(sample.validate().is_ok());
        samples.push(sample);
    }

    let manifest = DatasetManifest {
        entries: samples
            .iter()
            .map(|s| crate::dataset::sample_paths(&s.id))
            .collect(),
        taxonomy: params.taxonomy(),
        major_classes: (1..=params.major_classes).collect(),
        rare_classes: (params.major_classes + 1..=params.major_classes + params.rare_classes)
            .collect(),
    };
    Ok((samples, manifest, census))
}

/// Generate and write a dataset under `out_dir`; returns the census.
pub fn synth_dataset(params: &SynthParams, out_dir: &Path) -> Result<Census> {
    let (samples, manifest, census) = generate_samples(params)?;
    for sample in &samples {
        write_sample(out_dir, sample)?;
    }
    write_manifest(&out_dir.join("manifest.json"), &manifest)?;
    Ok(census)
}
