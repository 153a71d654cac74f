//! The mixing core: region partition, distance-graded mixing mask,
//! compositing, the full gradmix pair operation, the cutmix baseline, and
//! ground-truth edits.
//!
//! A pair operation replaces one major-class nucleus in the target image
//! with one rare-class nucleus from a source image. The working patch is
//! split into three regions: `outside` keeps the target untouched,
//! `nucleus` takes the rare nucleus verbatim, and `blend` grades between
//! the inpainted target background (major nucleus erased) and the shifted
//! source neighborhood, with the rare-side weight largest near the rare
//! nucleus boundary and fading with distance from it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{NucleusRecord, Sample};
use crate::error::{Error, Result};
use crate::imageops::{dilate, min_distance_field};
use crate::inpaint::{inpaint_with_trace, InpaintProblem};
use crate::pixelset::PixelSet;
use crate::raster::{Raster, Rect, RgbRaster};
use crate::scalar::Scalar;

/// How the blend-region distances are normalized into mask weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// Divide by the largest blend distance: weights ramp over the full
    /// `(0, 1]` range. Default.
    #[default]
    Max,
    /// Divide by the sum of blend distances: weights sum to one across the
    /// blend region.
    Sum,
}

impl std::fmt::Display for NormMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormMode::Max => write!(f, "max"),
            NormMode::Sum => write!(f, "sum"),
        }
    }
}

/// The three mutually exclusive pixel regions of a working patch.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    /// Working patch: bounding box of the dilated major footprint united
    /// with the translated rare footprint.
    pub patch: Rect,
    /// Patch pixels outside the dilated major footprint (and not claimed
    /// by the rare footprint).
    pub outside: PixelSet,
    /// The translated rare footprint; always wins where sets overlap.
    pub nucleus: PixelSet,
    /// Dilated major footprint minus the rare footprint.
    pub blend: PixelSet,
}

/// Per-pixel blend weights over a patch: 1 keeps the target environment,
/// 0 keeps the rare nucleus, graded in between.
#[derive(Debug, Clone)]
pub struct MixingMask<F> {
    rect: Rect,
    values: Raster<F>,
    norm_mode: NormMode,
}

impl<F: Scalar> MixingMask<F> {
    /// Build a mask from precomputed weights; every value must lie in
    /// `[0, 1]` and the raster must match the patch dimensions.
    pub fn from_values(rect: Rect, values: Raster<F>, norm_mode: NormMode) -> Result<Self> {
        if values.dims() != (rect.height, rect.width) {
            return Err(Error::DimensionMismatch(format!(
                "mask raster {:?} vs patch {}x{}",
                values.dims(),
                rect.height,
                rect.width
            )));
        }
        if values
            .as_slice()
            .iter()
            .any(|w| *w < F::zero() || *w > F::one())
        {
            return Err(Error::Config("mask weights must lie in [0, 1]".into()));
        }
        Ok(MixingMask {
            rect,
            values,
            norm_mode,
        })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn norm_mode(&self) -> NormMode {
        self.norm_mode
    }

    /// Weight at frame coordinates; must lie inside the patch.
    pub fn get(&self, row: u32, col: u32) -> F {
        debug_assert!(self.rect.contains(row, col));
        self.values.get(row - self.rect.top, col - self.rect.left)
    }

    /// Patch-local raster of weights.
    pub fn values(&self) -> &Raster<F> {
        &self.values
    }
}

/// Why a pair was abandoned. Geometric infeasibility is a signal for the
/// caller to reselect, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Translation pushed the footprint or the needed source patch out of
    /// a frame.
    OutOfFrame,
    /// The translated rare footprint intersects another instance.
    Overlap,
}

impl SkipReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipReason::OutOfFrame => "out-of-frame",
            SkipReason::Overlap => "overlap",
        }
    }
}

/// A computed pair edit, or the reason it was skipped.
#[derive(Debug, Clone)]
pub enum MixOutcome {
    Applied(Box<PatchEdit>),
    Skipped(SkipReason),
}

/// Everything needed to rewrite a sample for one replacement.
#[derive(Debug, Clone)]
pub struct PatchEdit {
    /// Region of the target whose pixels are rewritten.
    pub patch: Rect,
    /// New pixel values for `patch` (patch-local raster).
    pub pixels: RgbRaster,
    /// Instance id removed from the ground truth (the major).
    pub removed_id: u32,
    /// Rectangle guaranteed to contain every pixel of `removed_id`.
    pub removed_scan: Rect,
    /// Newly inserted instance id.
    pub inserted_id: u32,
    /// Class of the inserted instance; one of the rare classes.
    pub inserted_class: u32,
    /// Footprint of the inserted instance (frame coordinates).
    pub inserted_footprint: PixelSet,
    /// Pixels of other instances that were forced back to their original
    /// values (empty when protection is off or for the cutmix baseline).
    pub protected: PixelSet,
    /// For the cutmix baseline: rectangle whose ground-truth labels are
    /// cleared wholesale before the insert.
    pub cleared_region: Option<Rect>,
    /// Translation applied to the rare footprint, for the audit trail.
    pub offset: (i64, i64),
}

/// Mixer knobs for a single pair; the selection policy lives elsewhere.
#[derive(Debug, Clone)]
pub struct MixSettings<F> {
    pub dilation_iterations: u32,
    pub inpaint_radius: u32,
    pub norm_mode: NormMode,
    pub protect_neighbors: bool,
    /// Per-channel color shift applied to the extracted source patch.
    pub color_delta: [F; 3],
}

/// Split the working patch around a major footprint and a translated rare
/// footprint into the three regions. The rare footprint always maps to
/// `nucleus`, even where it pokes outside the dilated major.
pub fn partition_regions(
    major_footprint: &PixelSet,
    rare_translated: &PixelSet,
    dilation_iterations: u32,
) -> Result<RegionPartition> {
    if major_footprint.is_empty() {
        return Err(Error::EmptyPixelSet("partition major footprint"));
    }
    if rare_translated.is_empty() {
        return Err(Error::EmptyPixelSet("partition rare footprint"));
    }
    let dilated = dilate(major_footprint, dilation_iterations);
    let combined = dilated.union(rare_translated);
    let patch = combined.bbox().expect("non-empty union");
    let blend = dilated.difference(rare_translated);
    let frame = major_footprint.frame();
    let mut outside_px = Vec::new();
    for (r, c) in patch.coords() {
        if !dilated.contains(r, c) && !rare_translated.contains(r, c) {
            outside_px.push((r, c));
        }
    }
    let outside = PixelSet::from_sorted_unchecked(frame, outside_px);
    Ok(RegionPartition {
        patch,
        outside,
        nucleus: rare_translated.clone(),
        blend,
    })
}

/// Build the mixing mask for a partition: 1 on `outside`, 0 on `nucleus`,
/// and on `blend` the distance to the rare footprint normalized by either
/// the largest or the summed blend distance, clamped to `[0, 1]`.
pub fn build_mixing_mask<F: Scalar>(
    partition: &RegionPartition,
    norm_mode: NormMode,
) -> Result<MixingMask<F>> {
    if partition.nucleus.is_empty() {
        return Err(Error::EmptyPixelSet("mixing mask nucleus region"));
    }
    let rect = partition.patch;
    let mut values = Raster::filled(rect.height, rect.width, F::one());
    for (r, c) in partition.nucleus.iter() {
        values.set(r - rect.top, c - rect.left, F::zero());
    }
    if !partition.blend.is_empty() {
        let field = min_distance_field::<F>(rect, &partition.nucleus)?;
        let denominator = match norm_mode {
            NormMode::Max => partition
                .blend
                .iter()
                .map(|(r, c)| field.get(r, c))
                .fold(F::zero(), F::max),
            NormMode::Sum => partition
                .blend
                .iter()
                .map(|(r, c)| field.get(r, c))
                .fold(F::zero(), |acc, d| acc + d),
        };
        for (r, c) in partition.blend.iter() {
            let weight = (field.get(r, c) / denominator).min(F::one()).max(F::zero());
            values.set(r - rect.top, c - rect.left, weight);
        }
    }
    for (r, c) in partition.outside.iter() {
        values.set(r - rect.top, c - rect.left, F::one());
    }
    Ok(MixingMask {
        rect,
        values,
        norm_mode,
    })
}

/// Blend two equally sized patches: per pixel and channel,
/// `weight * background + (1 - weight) * source`, rounded half away from
/// zero and clamped. Weight 1 reproduces the background bitwise, weight 0
/// the source.
pub fn composite<F: Scalar>(
    background: &RgbRaster,
    source: &RgbRaster,
    mask: &MixingMask<F>,
) -> Result<RgbRaster> {
    let dims = (mask.rect.height, mask.rect.width);
    if background.dims() != dims || source.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "composite patches {:?} / {:?} vs mask {:?}",
            background.dims(),
            source.dims(),
            dims
        )));
    }
    let mut out = background.clone();
    for r in 0..dims.0 {
        for c in 0..dims.1 {
            let weight = mask.values.get(r, c);
            let bg = background.get(r, c);
            let src = source.get(r, c);
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let value = weight * F::from_channel(bg[ch])
                    + (F::one() - weight) * F::from_channel(src[ch]);
                px[ch] = value.to_channel();
            }
            out.set(r, c, px);
        }
    }
    Ok(out)
}

fn translation_offset(major: &NucleusRecord, rare: &NucleusRecord) -> (i64, i64) {
    (
        (major.centroid.0 - rare.centroid.0).round() as i64,
        (major.centroid.1 - rare.centroid.1).round() as i64,
    )
}

/// Extract the source patch: target-patch pixels pulled from the source
/// image at the rare's original neighborhood, i.e. `patch` shifted back by
/// the translation offset. `None` when the needed region leaves the source
/// frame.
fn extract_source_patch(
    source: &RgbRaster,
    patch: &Rect,
    offset: (i64, i64),
) -> Option<RgbRaster> {
    let (sh, sw) = source.dims();
    let mut out = RgbRaster::filled(patch.height, patch.width, [0, 0, 0]);
    for (r, c) in patch.coords() {
        let sr = i64::from(r) - offset.0;
        let sc = i64::from(c) - offset.1;
        if sr < 0 || sc < 0 || sr >= i64::from(sh) || sc >= i64::from(sw) {
            return None;
        }
        out.set(r - patch.top, c - patch.left, source.get(sr as u32, sc as u32));
    }
    Some(out)
}

fn shift_patch_color<F: Scalar>(patch: &mut RgbRaster, delta: [F; 3]) {
    if delta.iter().all(|d| *d == F::zero()) {
        return;
    }
    for px in patch.as_mut_slice() {
        for ch in 0..3 {
            px[ch] = (F::from_channel(px[ch]) + delta[ch]).to_channel();
        }
    }
}

fn next_instance_id(target: &Sample) -> u32 {
    target.max_instance_id() + 1
}

/// Intermediate products of a gradmix pair, kept around for inspection
/// dumps.
#[derive(Debug, Clone)]
pub struct GradmixArtifacts<F> {
    pub partition: RegionPartition,
    pub mask: MixingMask<F>,
    /// Color-shifted source patch (patch-local).
    pub source_patch: RgbRaster,
    /// Inpainted target background (patch-local).
    pub background: RgbRaster,
    /// Arrival-time field of the inpainting march, over `crop_rect`.
    pub arrival: Raster<F>,
    /// Crop the inpainting ran on (patch expanded by the estimator
    /// radius).
    pub crop_rect: Rect,
}

/// [`MixOutcome`] plus the intermediate artifacts when the pair applied.
#[derive(Debug, Clone)]
pub enum TracedOutcome<F> {
    Applied(Box<PatchEdit>, Box<GradmixArtifacts<F>>),
    Skipped(SkipReason),
}

/// Full gradmix pair: translate the rare footprint onto the major
/// centroid, erase the major by inpainting, and composite the shifted
/// source neighborhood over it through the graded mask. Ground truth swaps
/// the major instance for a new rare instance with the translated
/// footprint.
pub fn gradmix_pair<F: Scalar>(
    target: &Sample,
    major: &NucleusRecord,
    source: &Sample,
    rare: &NucleusRecord,
    settings: &MixSettings<F>,
) -> Result<MixOutcome> {
    Ok(match gradmix_pair_traced(target, major, source, rare, settings)? {
        TracedOutcome::Applied(edit, _) => MixOutcome::Applied(edit),
        TracedOutcome::Skipped(reason) => MixOutcome::Skipped(reason),
    })
}

/// As [`gradmix_pair`], additionally returning the partition, mask and
/// inpainting byproducts.
pub fn gradmix_pair_traced<F: Scalar>(
    target: &Sample,
    major: &NucleusRecord,
    source: &Sample,
    rare: &NucleusRecord,
    settings: &MixSettings<F>,
) -> Result<TracedOutcome<F>> {
    let frame = target.dims();
    let offset = translation_offset(major, rare);
    let translated = match rare.footprint.translate(offset.0, offset.1, frame) {
        Some(set) => set,
        None => return Ok(TracedOutcome::Skipped(SkipReason::OutOfFrame)),
    };
    if settings.protect_neighbors {
        let overlaps_other = translated.iter().any(|(r, c)| {
            let label = target.instance_map.get(r, c);
            label != 0 && label != major.id
        });
        if overlaps_other {
            return Ok(TracedOutcome::Skipped(SkipReason::Overlap));
        }
    }

    let partition = partition_regions(&major.footprint, &translated, settings.dilation_iterations)?;
    let mask = build_mixing_mask::<F>(&partition, settings.norm_mode)?;

    let mut source_patch = match extract_source_patch(&source.image, &partition.patch, offset) {
        Some(p) => p,
        None => return Ok(TracedOutcome::Skipped(SkipReason::OutOfFrame)),
    };
    shift_patch_color(&mut source_patch, settings.color_delta);

    // Erase the major from the target side. The inpainting crop extends
    // past the patch by the estimator radius so the fill sees real
    // context; outside the hole it is an exact copy of the target.
    let crop_rect = partition
        .patch
        .expand(settings.inpaint_radius + 2, &Rect::frame(frame.0, frame.1));
    let crop = target.image.crop(&crop_rect);
    let hole = PixelSet::from_sorted_unchecked(
        (crop_rect.height, crop_rect.width),
        major
            .footprint
            .iter()
            .map(|(r, c)| (r - crop_rect.top, c - crop_rect.left))
            .collect(),
    );
    let (inpainted, trace) = inpaint_with_trace::<F>(&InpaintProblem {
        image: &crop,
        hole: &hole,
        radius: settings.inpaint_radius,
    })?;
    let background = inpainted.crop(&Rect::new(
        partition.patch.top - crop_rect.top,
        partition.patch.left - crop_rect.left,
        partition.patch.height,
        partition.patch.width,
    ));

    let mut pixels = composite(&background, &source_patch, &mask)?;

    let mut protected_px = Vec::new();
    if settings.protect_neighbors {
        for (r, c) in partition.patch.coords() {
            let label = target.instance_map.get(r, c);
            if label != 0 && label != major.id {
                pixels.set(
                    r - partition.patch.top,
                    c - partition.patch.left,
                    target.image.get(r, c),
                );
                protected_px.push((r, c));
            }
        }
    }
    let protected = PixelSet::from_sorted_unchecked(frame, protected_px);

    let edit = PatchEdit {
        patch: partition.patch,
        pixels,
        removed_id: major.id,
        removed_scan: partition.patch,
        inserted_id: next_instance_id(target),
        inserted_class: rare.class_id,
        inserted_footprint: translated,
        protected,
        cleared_region: None,
        offset,
    };
    let artifacts = GradmixArtifacts {
        partition,
        mask,
        source_patch,
        background,
        arrival: trace.arrival,
        crop_rect,
    };
    Ok(TracedOutcome::Applied(Box::new(edit), Box::new(artifacts)))
}

/// The rectangular baseline: wholesale-replace the bounding box of the
/// translated rare footprint with the (color-shifted) source pixels. No
/// mask, no inpainting, no neighbor protection; overlapping neighbors lose
/// their in-region pixels.
pub fn cutmix_pair<F: Scalar>(
    target: &Sample,
    major: &NucleusRecord,
    source: &Sample,
    rare: &NucleusRecord,
    settings: &MixSettings<F>,
) -> Result<MixOutcome> {
    let frame = target.dims();
    let offset = translation_offset(major, rare);
    let translated = match rare.footprint.translate(offset.0, offset.1, frame) {
        Some(set) => set,
        None => return Ok(MixOutcome::Skipped(SkipReason::OutOfFrame)),
    };
    let region = translated.bbox().expect("non-empty footprint");
    let mut pixels = match extract_source_patch(&source.image, &region, offset) {
        Some(p) => p,
        None => return Ok(MixOutcome::Skipped(SkipReason::OutOfFrame)),
    };
    shift_patch_color(&mut pixels, settings.color_delta);

    let edit = PatchEdit {
        patch: region,
        pixels,
        removed_id: major.id,
        removed_scan: major.bbox.union(&region),
        inserted_id: next_instance_id(target),
        inserted_class: rare.class_id,
        inserted_footprint: translated,
        protected: PixelSet::empty(frame.0, frame.1),
        cleared_region: Some(region),
        offset,
    };
    Ok(MixOutcome::Applied(Box::new(edit)))
}

/// Apply an edit produced against this sample's current state, returning
/// the rewritten sample. All sample invariants hold afterwards.
pub fn apply_edit(sample: &Sample, edit: &PatchEdit) -> Result<Sample> {
    if sample.class_of.contains_key(&edit.inserted_id) {
        return Err(Error::IdCollision(edit.inserted_id));
    }
    if !sample.class_of.contains_key(&edit.removed_id) {
        return Err(Error::UnknownInstance(edit.removed_id));
    }
    let mut out = sample.clone();
    out.image.blit(&edit.patch, &edit.pixels);

    // Instances other than the major that lose pixels here must be
    // re-checked for emptiness afterwards.
    let mut disturbed: BTreeSet<u32> = BTreeSet::new();

    if let Some(region) = &edit.cleared_region {
        for (r, c) in region.coords() {
            let label = out.instance_map.get(r, c);
            if label != 0 {
                if label != edit.removed_id {
                    disturbed.insert(label);
                }
                out.instance_map.set(r, c, 0);
            }
        }
    }
    for (r, c) in edit.removed_scan.coords() {
        if out.instance_map.get(r, c) == edit.removed_id {
            out.instance_map.set(r, c, 0);
        }
    }
    for (r, c) in edit.inserted_footprint.iter() {
        let label = out.instance_map.get(r, c);
        if label != 0 && label != edit.removed_id {
            disturbed.insert(label);
        }
        out.instance_map.set(r, c, edit.inserted_id);
    }

    out.class_of.remove(&edit.removed_id);
    out.class_of.insert(edit.inserted_id, edit.inserted_class);

    if !disturbed.is_empty() {
        let mut survivors: BTreeSet<u32> = BTreeSet::new();
        for &label in out.instance_map.as_slice() {
            if disturbed.contains(&label) {
                survivors.insert(label);
            }
        }
        for id in disturbed {
            if !survivors.contains(&id) {
                out.class_of.remove(&id);
            }
        }
    }

    debug_assert!(out.validate().is_ok(), "edit broke sample invariants");
    Ok(out)
}
