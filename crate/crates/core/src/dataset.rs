//! Portable dataset format: manifest, samples and the instance inventory.
//!
//! A sample is an 8-bit RGB image, a 16-bit instance-label map (0 is
//! background) and a JSON object mapping decimal-string instance ids to
//! class ids. A manifest lists the samples, the class taxonomy, and which
//! classes are treated as major (replacement sites) vs. rare (the classes
//! being multiplied). The major/rare split is explicit metadata: datasets
//! fix it by convention and there is no reliable inference rule.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec;
use crate::error::{Error, Result};
use crate::imageops;
use crate::pixelset::PixelSet;
use crate::raster::{LabelRaster, Rect, RgbRaster};

/// One annotated image with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: RgbRaster,
    pub instance_map: LabelRaster,
    /// Instance id -> class id for every nonzero label in the map.
    pub class_of: BTreeMap<u32, u32>,
}

impl Sample {
    pub fn dims(&self) -> (u32, u32) {
        self.image.dims()
    }

    /// Check all structural invariants: matching dimensions and an exact
    /// correspondence between map labels and class entries.
    pub fn validate(&self) -> Result<()> {
        if self.image.dims() != self.instance_map.dims() {
            return Err(Error::sample(
                &self.id,
                format!(
                    "image is {:?} but instance map is {:?}",
                    self.image.dims(),
                    self.instance_map.dims()
                ),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &label in self.instance_map.as_slice() {
            if label != 0 {
                seen.insert(label);
            }
        }
        for &label in &seen {
            if !self.class_of.contains_key(&label) {
                return Err(Error::sample(
                    &self.id,
                    format!("unlabeled instance {label}"),
                ));
            }
        }
        for &label in self.class_of.keys() {
            if !seen.contains(&label) {
                return Err(Error::sample(
                    &self.id,
                    format!("class map lists instance {label} absent from the map"),
                ));
            }
        }
        Ok(())
    }

    /// Largest instance id present, 0 when the sample is empty.
    pub fn max_instance_id(&self) -> u32 {
        self.class_of.keys().next_back().copied().unwrap_or(0)
    }
}

/// One instance materialized from the label map.
#[derive(Debug, Clone, PartialEq)]
pub struct NucleusRecord {
    pub id: u32,
    pub class_id: u32,
    pub footprint: PixelSet,
    pub area: usize,
    pub centroid: (f64, f64),
    /// Tight inclusive bounding rectangle of the footprint.
    pub bbox: Rect,
}

/// One record per distinct nonzero label, sorted ascending by id.
pub fn build_inventory(sample: &Sample) -> Vec<NucleusRecord> {
    let (h, w) = sample.instance_map.dims();
    let mut pixels: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for ((r, c), label) in sample.instance_map.enumerate() {
        if label != 0 {
            pixels.entry(label).or_default().push((r, c));
        }
    }
    pixels
        .into_iter()
        .map(|(id, coords)| {
            // row-major scan keeps coords sorted
            let footprint = PixelSet::from_sorted_unchecked((h, w), coords);
            let area = footprint.len();
            let centroid = imageops::centroid::<f64>(&footprint).expect("non-empty footprint");
            let bbox = footprint.bbox().expect("non-empty footprint");
            let class_id = sample.class_of.get(&id).copied().unwrap_or(0);
            NucleusRecord {
                id,
                class_id,
                footprint,
                area,
                centroid,
                bbox,
            }
        })
        .collect()
}

/// Manifest entry: a sample id plus the three file paths, relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub instances: PathBuf,
    pub classes: PathBuf,
}

/// Dataset manifest: ordered entries, the class taxonomy, and the
/// major/rare designation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(
        serialize_with = "serialize_u32_keys",
        deserialize_with = "deserialize_u32_keys"
    )]
    pub taxonomy: BTreeMap<u32, String>,
    pub major_classes: Vec<u32>,
    pub rare_classes: Vec<u32>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.major_classes.is_empty() || self.rare_classes.is_empty() {
            return Err(Error::Manifest(
                "major_classes and rare_classes must both be non-empty".into(),
            ));
        }
        for class in self.major_classes.iter().chain(&self.rare_classes) {
            if !self.taxonomy.contains_key(class) {
                return Err(Error::Manifest(format!(
                    "class {class} designated major/rare but missing from the taxonomy"
                )));
            }
        }
        for major in &self.major_classes {
            if self.rare_classes.contains(major) {
                return Err(Error::Manifest(format!(
                    "class designation overlap: {major} is both major and rare"
                )));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for entry in &self.entries {
            if !ids.insert(&entry.id) {
                return Err(Error::Manifest(format!("duplicate sample id {}", entry.id)));
            }
        }
        Ok(())
    }

    pub fn is_major(&self, class: u32) -> bool {
        self.major_classes.contains(&class)
    }

    pub fn is_rare(&self, class: u32) -> bool {
        self.rare_classes.contains(&class)
    }
}

fn serialize_u32_keys<S: Serializer, V: Serialize>(
    map: &BTreeMap<u32, V>,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
}

fn deserialize_u32_keys<'de, D: Deserializer<'de>, V: Deserialize<'de>>(
    de: D,
) -> std::result::Result<BTreeMap<u32, V>, D::Error> {
    let raw: BTreeMap<String, V> = BTreeMap::deserialize(de)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|k| (k, v))
                .map_err(|_| D::Error::custom(format!("non-numeric id key {k:?}")))
        })
        .collect()
}

/// Load and validate a manifest. Entry order is preserved exactly as
/// written; it is part of the determinism contract.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = codec::read_json(path)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.validate()?;
    codec::write_json(path, manifest)
}

/// Load one sample given the manifest's directory, validating it against
/// the taxonomy.
pub fn load_sample(
    base_dir: &Path,
    entry: &ManifestEntry,
    taxonomy: &BTreeMap<u32, String>,
) -> Result<Sample> {
    let image = codec::read_rgb_png(&base_dir.join(&entry.image))?;
    let instance_map = codec::read_label_png(&base_dir.join(&entry.instances))?;
    let classes_path = base_dir.join(&entry.classes);
    let raw: BTreeMap<String, u32> = codec::read_json(&classes_path)?;
    let mut class_of = BTreeMap::new();
    for (key, class) in raw {
        let id: u32 = key.parse().map_err(|_| {
            Error::sample(&entry.id, format!("non-numeric instance id {key:?}"))
        })?;
        if !taxonomy.contains_key(&class) {
            return Err(Error::sample(
                &entry.id,
                format!("instance {id} has class {class} absent from the taxonomy"),
            ));
        }
        class_of.insert(id, class);
    }
    let sample = Sample {
        id: entry.id.clone(),
        image,
        instance_map,
        class_of,
    };
    sample.validate()?;
    Ok(sample)
}

/// Paths for the three files of one sample under a dataset root.
pub fn sample_paths(sample_id: &str) -> ManifestEntry {
    let dir = PathBuf::from("samples").join(sample_id);
    ManifestEntry {
        id: sample_id.to_string(),
        image: dir.join("image.png"),
        instances: dir.join("instances.png"),
        classes: dir.join("classes.json"),
    }
}

/// Write one sample under `base_dir` at the canonical relative paths and
/// return its manifest entry. Encoders are pinned, so two writes of the
/// same sample are byte-identical.
pub fn write_sample(base_dir: &Path, sample: &Sample) -> Result<ManifestEntry> {
    sample.validate()?;
    let entry = sample_paths(&sample.id);
    codec::write_rgb_png(&base_dir.join(&entry.image), &sample.image)?;
    codec::write_label_png(&base_dir.join(&entry.instances), &sample.instance_map)?;
    let classes: BTreeMap<String, u32> = sample
        .class_of
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    codec::write_json(&base_dir.join(&entry.classes), &classes)?;
    Ok(entry)
}
