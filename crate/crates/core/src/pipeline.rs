//! Orchestration: per-image selection policy, rare-nucleus sourcing across
//! the dataset, color matching, provenance, and dataset-level runs.
//!
//! Determinism contract: every sample's random stream is derived from the
//! run seed and the sample's index in manifest order, so outputs are
//! byte-identical regardless of execution order or worker count.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::AtomicLineWriter;
use crate::dataset::{
    build_inventory, load_manifest, load_sample, write_manifest, write_sample, DatasetManifest,
    NucleusRecord, Sample,
};
use crate::error::{Error, Result};
use crate::imageops::mean_color;
use crate::mixer::{
    apply_edit, cutmix_pair, gradmix_pair, MixOutcome, MixSettings, NormMode, SkipReason,
};
use crate::pixelset::PixelSet;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Gradmix,
    Cutmix,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Gradmix => write!(f, "gradmix"),
            Mode::Cutmix => write!(f, "cutmix"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorAdjust {
    /// Shift every selected source, intra- or inter-image.
    #[default]
    All,
    /// Shift only when the source is a different image.
    InterOnly,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorMeanScope {
    /// Target reference mean over the selected majors only.
    #[default]
    Phi,
    /// Target reference mean over every nucleus in the image.
    AllNuclei,
}

/// All tunables of a run. Serializable so a run can be driven by a JSON
/// config file; field defaults apply to missing fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub mode: Mode,
    /// Fraction of major-class nuclei selected per image.
    pub major_fraction: f64,
    /// Probability of sourcing the rare nucleus from the same image.
    pub intra_image_prob: f64,
    /// A rare is eligible when `area < size_ratio * major.area` (strict).
    pub size_ratio: f64,
    pub dilation_iterations: u32,
    pub inpaint_radius: u32,
    pub norm_mode: NormMode,
    pub protect_neighbors: bool,
    pub color_adjust: ColorAdjust,
    pub color_mean_scope: ColorMeanScope,
    /// Redraws from a pool after a geometric skip, before falling back to
    /// the other pool.
    pub max_reselect: u32,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            mode: Mode::Gradmix,
            major_fraction: 0.8,
            intra_image_prob: 0.6,
            size_ratio: 0.5,
            dilation_iterations: 1,
            inpaint_radius: 5,
            norm_mode: NormMode::Max,
            protect_neighbors: true,
            color_adjust: ColorAdjust::All,
            color_mean_scope: ColorMeanScope::Phi,
            max_reselect: 10,
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.major_fraction) {
            return Err(Error::Config("major_fraction must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.intra_image_prob) {
            return Err(Error::Config("intra_image_prob must lie in [0, 1]".into()));
        }
        if self.size_ratio < 0.0 {
            return Err(Error::Config("size_ratio must be non-negative".into()));
        }
        if self.inpaint_radius == 0 {
            return Err(Error::Config("inpaint_radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why an attempted major produced no edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipKind {
    OutOfFrame,
    Overlap,
    /// Both rare pools were empty.
    PoolEmpty,
    /// The major was already consumed by an earlier unprotected edit.
    MajorConsumed,
}

impl SkipKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipKind::OutOfFrame => "out-of-frame",
            SkipKind::Overlap => "overlap",
            SkipKind::PoolEmpty => "pool-empty",
            SkipKind::MajorConsumed => "major-consumed",
        }
    }
}

impl From<SkipReason> for SkipKind {
    fn from(reason: SkipReason) -> Self {
        match reason {
            SkipReason::OutOfFrame => SkipKind::OutOfFrame,
            SkipReason::Overlap => SkipKind::Overlap,
        }
    }
}

/// Outcome of one attempted major, serialized as `"applied"` or
/// `"skipped:<reason>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Applied,
    Skipped(SkipKind),
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Applied => write!(f, "applied"),
            Outcome::Skipped(kind) => write!(f, "skipped:{}", kind.as_str()),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(de)?;
        match raw.as_str() {
            "applied" => Ok(Outcome::Applied),
            "skipped:out-of-frame" => Ok(Outcome::Skipped(SkipKind::OutOfFrame)),
            "skipped:overlap" => Ok(Outcome::Skipped(SkipKind::Overlap)),
            "skipped:pool-empty" => Ok(Outcome::Skipped(SkipKind::PoolEmpty)),
            "skipped:major-consumed" => Ok(Outcome::Skipped(SkipKind::MajorConsumed)),
            other => Err(serde::de::Error::custom(format!("unknown outcome {other:?}"))),
        }
    }
}

/// Audit record: one per attempted major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub target: String,
    pub major_id: u32,
    pub source: Option<String>,
    pub rare_id: Option<u32>,
    pub translation: Option<(i64, i64)>,
    pub color_delta: Option<[Real; 3]>,
    pub outcome: Outcome,
    pub norm_mode: NormMode,
}

/// Loaded dataset shared read-only across workers: pristine samples plus
/// their inventories, in manifest order.
#[derive(Debug)]
pub struct DatasetContext {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
    pub inventories: Vec<Vec<NucleusRecord>>,
}

impl DatasetContext {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = load_manifest(manifest_path)?;
        let base = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf();
        let mut samples = Vec::with_capacity(manifest.entries.len());
        for entry in &manifest.entries {
            samples.push(load_sample(&base, entry, &manifest.taxonomy)?);
        }
        Ok(Self::from_samples(manifest, samples))
    }

    pub fn from_samples(manifest: DatasetManifest, samples: Vec<Sample>) -> Self {
        let inventories = samples.iter().map(build_inventory).collect();
        DatasetContext {
            manifest,
            samples,
            inventories,
        }
    }

    pub fn sample_index(&self, id: &str) -> Result<usize> {
        self.samples
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| Error::UnknownSample(id.to_string()))
    }

    fn major_indices(&self, sample_idx: usize) -> Vec<usize> {
        self.inventories[sample_idx]
            .iter()
            .enumerate()
            .filter(|(_, rec)| self.manifest.is_major(rec.class_id))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Number of majors selected from a pool of `n`: round half up.
pub fn selection_count(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

/// Choose `round-half-up(fraction * n)` indices uniformly without
/// replacement from `0..n`, returned ascending. With the pool sorted by
/// instance id, ascending indices mean ascending ids.
pub fn select_majors<R: Rng>(n: usize, fraction: f64, rng: &mut R) -> Vec<usize> {
    let k = selection_count(n, fraction).min(n);
    let mut picked = rand::seq::index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// A selected rare nucleus: source sample index, record index, and whether
/// it came from the intra-image pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RareChoice {
    pub sample_idx: usize,
    pub record_idx: usize,
    pub intra: bool,
}

/// `(sample index, record index)` of one rare-class candidate.
type PoolEntry = (usize, usize);

/// Rare-class records eligible for a given major, split into the
/// intra-image pool and the pooled records of every other image, both in
/// canonical (sample, id) order.
fn eligible_pools(
    ctx: &DatasetContext,
    target_idx: usize,
    major: &NucleusRecord,
    cfg: &AugmentationConfig,
) -> (Vec<PoolEntry>, Vec<PoolEntry>) {
    let limit = cfg.size_ratio * major.area as f64;
    let mut intra = Vec::new();
    let mut inter = Vec::new();
    for (si, inventory) in ctx.inventories.iter().enumerate() {
        for (ri, rec) in inventory.iter().enumerate() {
            if ctx.manifest.is_rare(rec.class_id) && (rec.area as f64) < limit {
                if si == target_idx {
                    intra.push((si, ri));
                } else {
                    inter.push((si, ri));
                }
            }
        }
    }
    (intra, inter)
}

/// Draw one rare nucleus for `major`: a biased coin picks the intra-image
/// pool with probability `intra_image_prob`, falling back to the other
/// pool when the chosen one is empty; `None` when both are empty.
pub fn select_rare<R: Rng>(
    ctx: &DatasetContext,
    target_idx: usize,
    major: &NucleusRecord,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> Option<RareChoice> {
    let (intra, inter) = eligible_pools(ctx, target_idx, major, cfg);
    let coin_intra = rng.gen_bool(cfg.intra_image_prob);
    let (pool, intra_used) = match (coin_intra, intra.is_empty(), inter.is_empty()) {
        (true, false, _) => (&intra, true),
        (true, true, false) => (&inter, false),
        (false, _, false) => (&inter, false),
        (false, true, true) => return None,
        (false, false, true) => (&intra, true),
        (true, true, true) => return None,
    };
    let (sample_idx, record_idx) = pool[rng.gen_range(0..pool.len())];
    Some(RareChoice {
        sample_idx,
        record_idx,
        intra: intra_used,
    })
}

/// Color shift that moves the source nucleus toward the target's nuclear
/// tone: target reference mean minus the rare's own mean. Zero when
/// adjustment is off, or for intra-image pairs in inter-only mode.
pub fn color_delta(
    target: &Sample,
    reference_region: &PixelSet,
    source: &Sample,
    rare: &NucleusRecord,
    cfg: &AugmentationConfig,
) -> Result<[Real; 3]> {
    match cfg.color_adjust {
        ColorAdjust::Off => return Ok([0.0; 3]),
        ColorAdjust::InterOnly if source.id == target.id => return Ok([0.0; 3]),
        _ => {}
    }
    let target_mean: [Real; 3] = mean_color(&target.image, reference_region)?;
    let rare_mean: [Real; 3] = mean_color(&source.image, &rare.footprint)?;
    Ok([
        target_mean[0] - rare_mean[0],
        target_mean[1] - rare_mean[1],
        target_mean[2] - rare_mean[2],
    ])
}

fn footprint_union(frame: (u32, u32), records: &[&NucleusRecord]) -> PixelSet {
    let mut coords: Vec<(u32, u32)> = Vec::new();
    for rec in records {
        coords.extend(rec.footprint.iter());
    }
    coords.sort_unstable();
    coords.dedup();
    PixelSet::from_sorted_unchecked(frame, coords)
}

/// Augment one sample. The input stays untouched; the returned sample is a
/// new one (id suffixed `_aug`) intended to be added alongside the
/// original. One provenance record is emitted per attempted major.
pub fn augment_sample<R: Rng>(
    ctx: &DatasetContext,
    target_idx: usize,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> Result<(Sample, Vec<ProvenanceRecord>)> {
    cfg.validate()?;
    let original = &ctx.samples[target_idx];
    let mut working = original.clone();
    working.id = format!("{}_aug", original.id);

    let major_indices = ctx.major_indices(target_idx);
    let picked = select_majors(major_indices.len(), cfg.major_fraction, rng);
    let phi: Vec<&NucleusRecord> = picked
        .iter()
        .map(|&i| &ctx.inventories[target_idx][major_indices[i]])
        .collect();
    let mut provenance = Vec::with_capacity(phi.len());
    if phi.is_empty() {
        return Ok((working, provenance));
    }

    let reference_region = if cfg.color_adjust == ColorAdjust::Off {
        PixelSet::empty(original.dims().0, original.dims().1)
    } else {
        match cfg.color_mean_scope {
            ColorMeanScope::Phi => footprint_union(original.dims(), &phi),
            ColorMeanScope::AllNuclei => {
                let all: Vec<&NucleusRecord> = ctx.inventories[target_idx].iter().collect();
                footprint_union(original.dims(), &all)
            }
        }
    };

    for major in phi {
        let record = attempt_major(
            ctx,
            target_idx,
            major,
            &reference_region,
            cfg,
            &mut working,
            rng,
        )?;
        provenance.push(record);
    }
    Ok((working, provenance))
}

/// Run the selection loop for one major: draw, try the mixer, redraw from
/// the same pool on geometric skips up to `max_reselect` times, then fall
/// back to the other pool once.
#[allow(clippy::too_many_arguments)]
fn attempt_major<R: Rng>(
    ctx: &DatasetContext,
    target_idx: usize,
    major: &NucleusRecord,
    reference_region: &PixelSet,
    cfg: &AugmentationConfig,
    working: &mut Sample,
    rng: &mut R,
) -> Result<ProvenanceRecord> {
    let mut record = ProvenanceRecord {
        target: ctx.samples[target_idx].id.clone(),
        major_id: major.id,
        source: None,
        rare_id: None,
        translation: None,
        color_delta: None,
        outcome: Outcome::Skipped(SkipKind::PoolEmpty),
        norm_mode: cfg.norm_mode,
    };

    if !working.class_of.contains_key(&major.id) {
        record.outcome = Outcome::Skipped(SkipKind::MajorConsumed);
        return Ok(record);
    }

    let first = match select_rare(ctx, target_idx, major, cfg, rng) {
        Some(choice) => choice,
        None => return Ok(record), // both pools empty
    };
    let (intra_pool, inter_pool) = eligible_pools(ctx, target_idx, major, cfg);

    let mut pool_is_intra = first.intra;
    let mut candidate = Some((first.sample_idx, first.record_idx));
    let mut redraws_left = cfg.max_reselect;
    let mut fell_back = false;

    while let Some((si, ri)) = candidate {
        let source = &ctx.samples[si];
        let rare = &ctx.inventories[si][ri];
        let delta = color_delta(&ctx.samples[target_idx], reference_region, source, rare, cfg)?;
        record.source = Some(source.id.clone());
        record.rare_id = Some(rare.id);
        record.color_delta = Some(delta);

        let settings = MixSettings {
            dilation_iterations: cfg.dilation_iterations,
            inpaint_radius: cfg.inpaint_radius,
            norm_mode: cfg.norm_mode,
            protect_neighbors: cfg.protect_neighbors,
            color_delta: delta,
        };
        let outcome = match cfg.mode {
            Mode::Gradmix => gradmix_pair(working, major, source, rare, &settings)?,
            Mode::Cutmix => cutmix_pair(working, major, source, rare, &settings)?,
        };
        match outcome {
            MixOutcome::Applied(edit) => {
                record.translation = Some(edit.offset);
                record.outcome = Outcome::Applied;
                *working = apply_edit(working, &edit)?;
                return Ok(record);
            }
            MixOutcome::Skipped(reason) => {
                record.outcome = Outcome::Skipped(reason.into());
                candidate = loop {
                    if redraws_left == 0 {
                        if fell_back {
                            break None;
                        }
                        fell_back = true;
                        pool_is_intra = !pool_is_intra;
                        redraws_left = cfg.max_reselect;
                    }
                    let pool = if pool_is_intra { &intra_pool } else { &inter_pool };
                    if pool.is_empty() {
                        if fell_back {
                            break None;
                        }
                        fell_back = true;
                        pool_is_intra = !pool_is_intra;
                        redraws_left = cfg.max_reselect;
                        continue;
                    }
                    if redraws_left == 0 {
                        break None;
                    }
                    redraws_left -= 1;
                    break Some(pool[rng.gen_range(0..pool.len())]);
                };
            }
        }
    }
    Ok(record)
}

/// One row of a per-class count table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StatsRow {
    pub label: String,
    /// Counts aligned with the report's class columns.
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Per-class instance counts, one column per taxonomy class in id order
/// plus a trailing total.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StatsReport {
    pub class_ids: Vec<u32>,
    pub class_names: Vec<String>,
    pub rows: Vec<StatsRow>,
}

impl StatsReport {
    fn new(taxonomy: &BTreeMap<u32, String>) -> Self {
        StatsReport {
            class_ids: taxonomy.keys().copied().collect(),
            class_names: taxonomy.values().cloned().collect(),
            rows: Vec::new(),
        }
    }

    fn push_row(&mut self, label: &str, counts_by_class: &BTreeMap<u32, u64>) {
        let counts: Vec<u64> = self
            .class_ids
            .iter()
            .map(|id| counts_by_class.get(id).copied().unwrap_or(0))
            .collect();
        let total = counts.iter().sum();
        self.rows.push(StatsRow {
            label: label.to_string(),
            counts,
            total,
        });
    }

    pub fn row(&self, label: &str) -> Option<&StatsRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Plain UTF-8 table, classes across, one row per split.
    pub fn render(&self) -> String {
        let mut headers: Vec<String> = vec![String::new()];
        headers.extend(self.class_names.iter().cloned());
        headers.push("Total".to_string());
        let mut table: Vec<Vec<String>> = vec![headers];
        for row in &self.rows {
            let mut cells = vec![row.label.clone()];
            cells.extend(row.counts.iter().map(u64::to_string));
            cells.push(row.total.to_string());
            table.push(cells);
        }
        let columns = table[0].len();
        let widths: Vec<usize> = (0..columns)
            .map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                // label column left-aligned, counts right-aligned
                if c == 0 {
                    line.push_str(&format!("{cell:<width$}", width = widths[c]));
                } else {
                    line.push_str(&format!("{cell:>width$}", width = widths[c]));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

fn class_counts(sample: &Sample) -> BTreeMap<u32, u64> {
    let mut counts = BTreeMap::new();
    for class in sample.class_of.values() {
        *counts.entry(*class).or_insert(0) += 1;
    }
    counts
}

fn merge_counts(into: &mut BTreeMap<u32, u64>, from: &BTreeMap<u32, u64>) {
    for (class, n) in from {
        *into.entry(*class).or_insert(0) += n;
    }
}

/// Counts for an already loaded dataset, as a single `all` row.
pub fn dataset_stats(ctx: &DatasetContext) -> StatsReport {
    let mut report = StatsReport::new(&ctx.manifest.taxonomy);
    let mut totals = BTreeMap::new();
    for sample in &ctx.samples {
        merge_counts(&mut totals, &class_counts(sample));
    }
    report.push_row("all", &totals);
    report
}

/// Everything a finished run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentReport {
    pub seed: u64,
    pub mode: Mode,
    pub norm_mode: NormMode,
    pub applied: u64,
    /// Skip tallies keyed by reason string.
    pub skipped: BTreeMap<String, u64>,
    pub stats: StatsReport,
}

struct SampleResult {
    provenance: Vec<ProvenanceRecord>,
    augmented_counts: BTreeMap<u32, u64>,
}

/// Augment every sample of a dataset and write a self-contained output
/// tree: re-encoded originals, augmented samples, a merged manifest,
/// provenance JSONL and the machine-readable report.
///
/// `workers` threads process samples concurrently; outputs are
/// byte-identical for any worker count.
pub fn augment_dataset(
    ctx: &DatasetContext,
    cfg: &AugmentationConfig,
    out_dir: &Path,
    workers: usize,
) -> Result<AugmentReport> {
    cfg.validate()?;
    let n = ctx.samples.len();
    let results: Mutex<Vec<Option<Result<SampleResult>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let worker_count = workers.max(1).min(n.max(1));

    let process = |i: usize| -> Result<SampleResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let (augmented, provenance) = augment_sample(ctx, i, cfg, &mut rng)?;
        let augmented_counts = class_counts(&augmented);
        write_sample(out_dir, &ctx.samples[i])?;
        write_sample(out_dir, &augmented)?;
        Ok(SampleResult {
            provenance,
            augmented_counts,
        })
    };

    if worker_count <= 1 {
        for i in 0..n {
            let result = process(i);
            results.lock().unwrap()[i] = Some(result);
        }
    } else {
        std::thread::scope(|scope| {
            for _ in 0..worker_count {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let result = process(i);
                    results.lock().unwrap()[i] = Some(result);
                });
            }
        });
    }

    let mut provenance_lines: Vec<ProvenanceRecord> = Vec::new();
    let mut original_counts = BTreeMap::new();
    let mut augmented_counts = BTreeMap::new();
    let collected = results.into_inner().unwrap();
    for (i, slot) in collected.into_iter().enumerate() {
        let result = slot.expect("every index processed")?;
        merge_counts(&mut original_counts, &class_counts(&ctx.samples[i]));
        merge_counts(&mut augmented_counts, &result.augmented_counts);
        provenance_lines.extend(result.provenance);
    }

    let mut merged_entries = Vec::with_capacity(2 * n);
    for sample in &ctx.samples {
        merged_entries.push(crate::dataset::sample_paths(&sample.id));
    }
    for sample in &ctx.samples {
        merged_entries.push(crate::dataset::sample_paths(&format!("{}_aug", sample.id)));
    }
    let merged = DatasetManifest {
        entries: merged_entries,
        taxonomy: ctx.manifest.taxonomy.clone(),
        major_classes: ctx.manifest.major_classes.clone(),
        rare_classes: ctx.manifest.rare_classes.clone(),
    };
    write_manifest(&out_dir.join("manifest.json"), &merged)?;

    let mut combined_counts = original_counts.clone();
    merge_counts(&mut combined_counts, &augmented_counts);
    let mut stats = StatsReport::new(&ctx.manifest.taxonomy);
    stats.push_row("original", &original_counts);
    stats.push_row("augmented", &augmented_counts);
    stats.push_row("combined", &combined_counts);

    let mut applied = 0u64;
    let mut skipped: BTreeMap<String, u64> = BTreeMap::new();
    for record in &provenance_lines {
        match record.outcome {
            Outcome::Applied => applied += 1,
            Outcome::Skipped(kind) => {
                *skipped.entry(kind.as_str().to_string()).or_insert(0) += 1;
            }
        }
    }

    let report = AugmentReport {
        seed: cfg.seed,
        mode: cfg.mode,
        norm_mode: cfg.norm_mode,
        applied,
        skipped,
        stats,
    };

    let mut log = AtomicLineWriter::create(&out_dir.join("provenance.jsonl"))?;
    let header = serde_json::json!({
        "seed": cfg.seed,
        "mode": cfg.mode,
        "norm_mode": cfg.norm_mode,
        "records": provenance_lines.len(),
    });
    log.write_line(&header.to_string())
        .and_then(|_| {
            for record in &provenance_lines {
                let line = serde_json::to_string(record)
                    .map_err(|e| Error::json(out_dir.join("provenance.jsonl"), e))?;
                log.write_line(&line)?;
            }
            Ok(())
        })?;
    log.finish()?;

    crate::codec::write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}
