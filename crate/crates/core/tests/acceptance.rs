//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with its measured numbers (run with `--nocapture` to see them).
//!
//! The checks are property-based plus bookkeeping arithmetic on synthetic
//! fixtures; every tolerance is pinned here.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use gradmix_core::dataset::{build_inventory, Sample};
use gradmix_core::imageops::{centroid_offset, min_distance_field};
use gradmix_core::inpaint::{inpaint, inpaint_with_trace, pixel_estimate, InpaintProblem};
use gradmix_core::mixer::{
    build_mixing_mask, cutmix_pair, partition_regions, MixOutcome, NormMode,
};
use gradmix_core::pipeline::{
    augment_dataset, augment_sample, select_majors, select_rare, selection_count,
    AugmentationConfig, DatasetContext, Outcome,
};
use gradmix_core::pixelset::PixelSet;
use gradmix_core::raster::{LabelRaster, Raster, Rect, RgbRaster};
use gradmix_core::synth::{generate_samples, SynthParams};
use gradmix_core::MixSettings;

fn ellipse(frame: (u32, u32), center: (u32, u32), semi: (u32, u32)) -> PixelSet {
    let mut coords = Vec::new();
    for dr in -(semi.0 as i64)..=(semi.0 as i64) {
        for dc in -(semi.1 as i64)..=(semi.1 as i64) {
            let fr = dr as f64 / semi.0 as f64;
            let fc = dc as f64 / semi.1 as f64;
            if fr * fr + fc * fc <= 1.0 {
                coords.push((
                    (center.0 as i64 + dr) as u32,
                    (center.1 as i64 + dc) as u32,
                ));
            }
        }
    }
    PixelSet::from_pixels(frame.0, frame.1, coords).unwrap()
}

fn brute_distance(source: &PixelSet, r: u32, c: u32) -> f64 {
    source
        .iter()
        .map(|(sr, sc)| {
            let dr = f64::from(r) - f64::from(sr);
            let dc = f64::from(c) - f64::from(sc);
            (dr * dr + dc * dc).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mask properties over randomized pairs: range, exact region values,
/// strict monotonicity and normalization.
#[test]
fn mask_suite_randomized_pairs() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let frame = (48u32, 48u32);
    let pairs = 220;
    for case in 0..pairs {
        let major_semi = (rng.gen_range(4..=8), rng.gen_range(4..=8));
        let reach = major_semi.0.max(major_semi.1) + 4;
        let center = (
            rng.gen_range(reach..frame.0 - reach),
            rng.gen_range(reach..frame.1 - reach),
        );
        let major = ellipse(frame, center, major_semi);
        let rare_semi = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let rare_at_origin = ellipse(frame, (12, 12), rare_semi);
        let offset = centroid_offset(&rare_at_origin, &major).unwrap();
        let rare = rare_at_origin
            .translate(offset.0, offset.1, frame)
            .expect("centered rare stays in frame");

        let partition = partition_regions(&major, &rare, 1).unwrap();
        assert_eq!(
            partition.nucleus.len() + partition.blend.len() + partition.outside.len(),
            partition.patch.area(),
            "case {case}: partition must cover the patch exactly"
        );

        for mode in [NormMode::Max, NormMode::Sum] {
            let mask = build_mixing_mask::<f64>(&partition, mode).unwrap();
            for (r, c) in partition.patch.coords() {
                let w = mask.get(r, c);
                assert!((0.0..=1.0).contains(&w), "case {case}: weight {w} out of range");
            }
            for (r, c) in partition.outside.iter() {
                assert_eq!(mask.get(r, c), 1.0, "case {case}: outside must be exactly 1");
            }
            for (r, c) in partition.nucleus.iter() {
                assert_eq!(mask.get(r, c), 0.0, "case {case}: nucleus must be exactly 0");
            }
            match mode {
                NormMode::Max => {
                    // strictly increasing in the blend distance, attaining 1
                    let mut by_distance: Vec<(f64, f64)> = partition
                        .blend
                        .iter()
                        .map(|(r, c)| (brute_distance(&partition.nucleus, r, c), mask.get(r, c)))
                        .collect();
                    by_distance
                        .sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                    for w in by_distance.windows(2) {
                        if w[0].0 < w[1].0 {
                            assert!(
                                w[0].1 < w[1].1,
                                "case {case}: weights must grow strictly with distance"
                            );
                        } else {
                            assert_eq!(w[0].1, w[1].1);
                        }
                    }
                    if let Some(last) = by_distance.last() {
                        assert_eq!(last.1, 1.0, "case {case}: max mode must attain 1");
                    }
                }
                NormMode::Sum => {
                    if !partition.blend.is_empty() {
                        let total: f64 =
                            partition.blend.iter().map(|(r, c)| mask.get(r, c)).sum();
                        assert!(
                            (total - 1.0).abs() <= 1e-9,
                            "case {case}: blend weights must sum to 1, got {total}"
                        );
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "mask suite took {elapsed:?}");
    println!("PASS mask suite: {pairs} randomized pairs in {elapsed:?}");
}

/// Exact distance transform against the all-pairs brute-force oracle.
#[test]
fn edt_matches_brute_force_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xED7);
    let rect = Rect::frame(32, 32);
    let cases = 50;
    for case in 0..cases {
        let n = rng.gen_range(1..=200);
        let source = PixelSet::from_pixels(
            32,
            32,
            (0..n).map(|_| (rng.gen_range(0..32), rng.gen_range(0..32))),
        )
        .unwrap();
        let field = min_distance_field::<f64>(rect, &source).unwrap();
        for (r, c) in rect.coords() {
            let expect = brute_distance(&source, r, c);
            assert!(
                (field.get(r, c) - expect).abs() <= 1e-9,
                "case {case}: mismatch at ({r},{c}): {} vs {expect}",
                field.get(r, c)
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "edt oracle took {elapsed:?}");
    println!("PASS edt oracle: {cases} random 32x32 sources in {elapsed:?}");
}

/// Hole filling: constant fixpoint, outside identity, the standalone
/// estimator oracle on single-pixel holes, and monotone finalization.
#[test]
fn inpainting_fixpoint_identity_and_estimator_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1A7);
    let (h, w) = (24u32, 24u32);

    // constant-image fixpoint, bitwise, 20 random holes
    let constant = RgbRaster::filled(h, w, [131, 127, 140]);
    for _ in 0..20 {
        let n = rng.gen_range(1..(h * w / 2) as usize);
        let hole = PixelSet::from_pixels(
            h,
            w,
            (0..n).map(|_| (rng.gen_range(0..h), rng.gen_range(0..w))),
        )
        .unwrap();
        let out = inpaint::<f64>(&InpaintProblem {
            image: &constant,
            hole: &hole,
            radius: 5,
        })
        .unwrap();
        assert_eq!(out, constant, "constant image must be a bitwise fixpoint");
    }

    // single-pixel holes on 20 ramp images vs the direct estimator
    for case in 0..20 {
        let row_slope = rng.gen_range(-3i32..=3);
        let col_slope = rng.gen_range(-3i32..=3);
        let base = rng.gen_range(60..=180);
        let mut image = RgbRaster::filled(h, w, [0, 0, 0]);
        for r in 0..h {
            for c in 0..w {
                let v = (base + row_slope * r as i32 + col_slope * c as i32).clamp(0, 255) as u8;
                image.set(r, c, [v, v, v]);
            }
        }
        let target = (rng.gen_range(2..h - 2), rng.gen_range(2..w - 2));
        let hole = PixelSet::from_pixels(h, w, [target]).unwrap();
        let (out, trace) = inpaint_with_trace::<f64>(&InpaintProblem {
            image: &image,
            hole: &hole,
            radius: 3,
        })
        .unwrap();

        // outside-hole identity, bitwise
        for r in 0..h {
            for c in 0..w {
                if (r, c) != target {
                    assert_eq!(out.get(r, c), image.get(r, c), "case {case}: ({r},{c})");
                }
            }
        }
        // monotone front
        let times: Vec<f64> = trace.finalized.iter().map(|&(_, _, t)| t).collect();
        assert!(
            times.windows(2).all(|pair| pair[0] <= pair[1]),
            "case {case}: finalization order must be non-decreasing in arrival time"
        );

        // independent estimator evaluation: fully known neighborhood,
        // zero arrival gradient, one-step arrival at the hole
        let known = PixelSet::from_pixels(
            h,
            w,
            (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .filter(|&p| p != target),
        )
        .unwrap();
        let mut time = Raster::filled(h, w, 0.0f64);
        time.set(target.0, target.1, 2.0f64.sqrt() / 2.0);
        let estimate = pixel_estimate(&image, &known, target, (0.0, 0.0), &time, 3).unwrap();
        for ch in 0..3 {
            let got = f64::from(out.get(target.0, target.1)[ch]);
            assert!(
                (got - estimate[ch]).abs() <= 1.0 + 1e-9,
                "case {case}: channel {ch}: {got} vs estimator {}",
                estimate[ch]
            );
        }
    }
    println!("PASS inpainting: fixpoint x20, identity, estimator oracle x20, monotone front");
}

fn conservation_fixture(spacing: u32, margin: u32, seed: u64) -> DatasetContext {
    let params = SynthParams {
        samples: 20,
        height: 288,
        width: 288,
        major_classes: 2,
        rare_classes: 1,
        majors_per_image: 48,
        rares_per_image: 2,
        spacing,
        margin,
        seed,
        ..SynthParams::default()
    };
    let (samples, manifest, _) = generate_samples(&params).unwrap();
    DatasetContext::from_samples(manifest, samples)
}

/// Instance-count conservation and the count-table arithmetic on a
/// 20-image dataset with a ~4% rare class.
#[test]
fn conservation_and_bookkeeping() {
    let ctx = conservation_fixture(1, 14, 3);
    let cfg = AugmentationConfig {
        seed: 42,
        ..AugmentationConfig::default()
    };
    let out_dir = tempfile::tempdir().unwrap();
    let report = augment_dataset(&ctx, &cfg, out_dir.path(), 2).unwrap();

    // per-image conservation, re-read from the written tree
    let merged = DatasetContext::load(&out_dir.path().join("manifest.json")).unwrap();
    for sample in &ctx.samples {
        let orig = merged
            .samples
            .iter()
            .find(|s| s.id == sample.id)
            .expect("original present");
        let aug = merged
            .samples
            .iter()
            .find(|s| s.id == format!("{}_aug", sample.id))
            .expect("augmented present");
        assert_eq!(
            orig.class_of.len(),
            aug.class_of.len(),
            "per-image instance count must be conserved"
        );
    }

    let original = report.stats.row("original").unwrap().clone();
    let augmented = report.stats.row("augmented").unwrap().clone();
    let combined = report.stats.row("combined").unwrap().clone();
    assert_eq!(combined.total, 2 * original.total, "combined must be 2x original");
    assert_eq!(original.total, augmented.total);

    // rare-class combined = 2 * rare + applied
    let rare_idx = report
        .stats
        .class_ids
        .iter()
        .position(|id| ctx.manifest.rare_classes.contains(id))
        .unwrap();
    assert_eq!(
        combined.counts[rare_idx],
        2 * original.counts[rare_idx] + report.applied,
        "rare combined must equal 2*rare + applied"
    );

    // applied bound: sum over images of round-half-up(0.8 * majors)
    let budget: u64 = ctx
        .inventories
        .iter()
        .map(|inv| {
            let majors = inv
                .iter()
                .filter(|r| ctx.manifest.is_major(r.class_id))
                .count();
            selection_count(majors, cfg.major_fraction) as u64
        })
        .sum();
    assert!(report.applied <= budget);
    let skipped: u64 = report.skipped.values().sum();
    assert_eq!(
        report.applied + skipped,
        budget,
        "every shortfall must be matched by a logged skip"
    );
    assert_eq!(
        skipped, 0,
        "the spaced fixture guarantees feasibility, so the bound is met with equality"
    );

    // a cramped fixture produces real skips, each with a logged reason:
    // majors down to radius 2 are smaller than twice any rare, and rares
    // poking out of small majors can hit touching neighbors
    let tight_params = SynthParams {
        samples: 20,
        height: 288,
        width: 288,
        major_classes: 2,
        rare_classes: 1,
        majors_per_image: 48,
        rares_per_image: 2,
        major_radius: (2, 9),
        spacing: 0,
        margin: 6,
        seed: 11,
        ..SynthParams::default()
    };
    let (tight_samples, tight_manifest, _) = generate_samples(&tight_params).unwrap();
    let tight = DatasetContext::from_samples(tight_manifest, tight_samples);
    let tight_out = tempfile::tempdir().unwrap();
    let tight_report = augment_dataset(&tight, &cfg, tight_out.path(), 2).unwrap();
    let tight_budget: u64 = tight
        .inventories
        .iter()
        .map(|inv| {
            let majors = inv
                .iter()
                .filter(|r| tight.manifest.is_major(r.class_id))
                .count();
            selection_count(majors, cfg.major_fraction) as u64
        })
        .sum();
    let tight_skipped: u64 = tight_report.skipped.values().sum();
    assert_eq!(tight_report.applied + tight_skipped, tight_budget);
    assert!(
        tight_skipped > 0,
        "the cramped fixture is expected to force at least one skip"
    );

    println!(
        "PASS conservation: combined {} = 2x{}, rare {} = 2*{} + {} applied; cramped run applied {} + skipped {} = {}",
        combined.total,
        original.total,
        combined.counts[rare_idx],
        original.counts[rare_idx],
        report.applied,
        tight_report.applied,
        tight_skipped,
        tight_budget
    );
}

/// The selection policy's two random choices: the 60/40 intra/inter coin
/// and the 80% major selection.
#[test]
fn sampling_statistics() {
    let params = SynthParams {
        samples: 2,
        majors_per_image: 10,
        rares_per_image: 3,
        seed: 21,
        ..SynthParams::default()
    };
    let (samples, manifest, _) = generate_samples(&params).unwrap();
    let ctx = DatasetContext::from_samples(manifest, samples);
    let cfg = AugmentationConfig::default();
    let major = ctx.inventories[0]
        .iter()
        .find(|r| ctx.manifest.is_major(r.class_id))
        .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5A3);
    let draws = 10_000;
    let mut intra = 0u32;
    for _ in 0..draws {
        let choice = select_rare(&ctx, 0, major, &cfg, &mut rng).expect("both pools non-empty");
        if choice.intra {
            intra += 1;
        }
    }
    let frequency = f64::from(intra) / f64::from(draws);
    assert!(
        (0.58..=0.62).contains(&frequency),
        "intra-image frequency {frequency} outside [0.58, 0.62]"
    );

    // exact selected-major fraction per pool size
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=40usize {
        let picked = select_majors(n, cfg.major_fraction, &mut rng);
        assert_eq!(picked.len(), selection_count(n, cfg.major_fraction));
    }
    println!("PASS sampling: intra frequency {frequency:.4} in [0.58, 0.62]; |selection| exact for pools 1..=40");
}

/// Neighbor protection under the default mode, and the baseline's
/// deliberate truncation.
#[test]
fn neighbor_protection_and_cutmix_truncation() {
    // touching instances allowed: working patches regularly cover
    // neighbors, so protection is actually exercised
    let params = SynthParams {
        samples: 10,
        height: 160,
        width: 160,
        majors_per_image: 14,
        rares_per_image: 2,
        spacing: 0,
        seed: 17,
        ..SynthParams::default()
    };
    let (samples, manifest, _) = generate_samples(&params).unwrap();
    let ctx = DatasetContext::from_samples(manifest, samples);
    let cfg = AugmentationConfig::default();

    let mut protected_pixels = 0u64;
    let mut runs = 0u32;
    for seed in 0..10u64 {
        for idx in 0..ctx.samples.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let (aug, provenance) = augment_sample(&ctx, idx, &cfg, &mut rng).unwrap();
            runs += 1;
            let original = &ctx.samples[idx];
            let removed: Vec<u32> = provenance
                .iter()
                .filter(|p| p.outcome == Outcome::Applied)
                .map(|p| p.major_id)
                .collect();
            let orig_inventory = &ctx.inventories[idx];
            let aug_inventory = build_inventory(&aug);
            for record in orig_inventory {
                if removed.contains(&record.id) {
                    assert!(!aug.class_of.contains_key(&record.id));
                    continue;
                }
                let surviving = aug_inventory
                    .iter()
                    .find(|r| r.id == record.id)
                    .expect("surviving instance keeps its id");
                assert_eq!(
                    surviving.footprint, record.footprint,
                    "surviving footprints must be unchanged"
                );
                for (r, c) in record.footprint.iter() {
                    assert_eq!(
                        aug.image.get(r, c),
                        original.image.get(r, c),
                        "surviving pixels must be bitwise unchanged"
                    );
                }
                protected_pixels += record.footprint.len() as u64;
            }
        }
    }

    // constructed cutmix overlap: a long rare's bounding box reaches a
    // neighbor and cuts out part of it
    let frame = (16u32, 24u32);
    let mut target_map = LabelRaster::filled(frame.0, frame.1, 0);
    for r in 5..=9 {
        for c in 6..=10 {
            target_map.set(r, c, 1); // major, 5x5
        }
    }
    for r in 6..=8 {
        for c in 12..=14 {
            target_map.set(r, c, 2); // neighbor, clear of the major
        }
    }
    let target = Sample {
        id: "t".into(),
        image: RgbRaster::filled(frame.0, frame.1, [200, 200, 200]),
        instance_map: target_map,
        class_of: BTreeMap::from([(1, 1), (2, 1)]),
    };
    let mut source_map = LabelRaster::filled(frame.0, frame.1, 0);
    for c in 4..=14 {
        source_map.set(7, c, 1); // 1x11 line, area 11 < 25/2
    }
    let source = Sample {
        id: "s".into(),
        image: RgbRaster::filled(frame.0, frame.1, [90, 60, 120]),
        instance_map: source_map,
        class_of: BTreeMap::from([(1, 3)]),
    };
    let major = build_inventory(&target)
        .into_iter()
        .find(|r| r.id == 1)
        .unwrap();
    let rare = build_inventory(&source).into_iter().next().unwrap();
    let settings = MixSettings {
        dilation_iterations: 1,
        inpaint_radius: 3,
        norm_mode: NormMode::Max,
        protect_neighbors: false,
        color_delta: [0.0; 3],
    };
    let outcome = cutmix_pair(&target, &major, &source, &rare, &settings).unwrap();
    let edit = match outcome {
        MixOutcome::Applied(edit) => edit,
        MixOutcome::Skipped(reason) => panic!("constructed pair skipped: {reason:?}"),
    };
    let edited = gradmix_core::mixer::apply_edit(&target, &edit).unwrap();
    let neighbor_before: Vec<(u32, u32)> = build_inventory(&target)
        .into_iter()
        .find(|r| r.id == 2)
        .unwrap()
        .footprint
        .iter()
        .collect();
    let neighbor_after: Vec<(u32, u32)> = build_inventory(&edited)
        .into_iter()
        .find(|r| r.id == 2)
        .unwrap()
        .footprint
        .iter()
        .collect();
    assert!(
        neighbor_after.len() < neighbor_before.len(),
        "the rectangular baseline must truncate the overlapped neighbor"
    );
    let lost: Vec<_> = neighbor_before
        .iter()
        .filter(|p| !neighbor_after.contains(p))
        .collect();
    assert!(
        lost.iter().all(|&&(r, c)| edit.patch.contains(r, c)),
        "lost pixels must lie inside the replaced rectangle"
    );

    println!(
        "PASS neighbor protection: {runs} randomized augmentations, {protected_pixels} surviving pixels verified; cutmix truncated {} neighbor pixels",
        lost.len()
    );
}

/// Output trees and logs must not depend on the worker count.
#[test]
fn determinism_across_worker_counts() {
    let params = SynthParams {
        samples: 6,
        height: 160,
        width: 160,
        majors_per_image: 12,
        rares_per_image: 2,
        seed: 29,
        ..SynthParams::default()
    };
    let (samples, manifest, _) = generate_samples(&params).unwrap();
    let ctx = DatasetContext::from_samples(manifest, samples);
    let cfg = AugmentationConfig {
        seed: 42,
        ..AugmentationConfig::default()
    };
    let dir_one = tempfile::tempdir().unwrap();
    let dir_eight = tempfile::tempdir().unwrap();
    augment_dataset(&ctx, &cfg, dir_one.path(), 1).unwrap();
    augment_dataset(&ctx, &cfg, dir_eight.path(), 8).unwrap();

    let mut files_one = collect_files(dir_one.path());
    let files_eight = collect_files(dir_eight.path());
    assert_eq!(
        files_one.keys().collect::<Vec<_>>(),
        files_eight.keys().collect::<Vec<_>>(),
        "trees list the same files"
    );
    let mut compared = 0;
    for (path, bytes) in files_eight {
        assert_eq!(
            files_one.remove(&path).unwrap(),
            bytes,
            "file {path:?} differs between worker counts"
        );
        compared += 1;
    }
    println!("PASS determinism: {compared} files byte-identical for 1 vs 8 workers");
}

fn collect_files(root: &std::path::Path) -> BTreeMap<std::path::PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// One 1000x1000 image with ~500 nuclei must augment end to end in under
/// ten seconds single-threaded.
#[test]
fn end_to_end_performance_budget() {
    let params = SynthParams {
        samples: 1,
        height: 1000,
        width: 1000,
        majors_per_image: 475,
        rares_per_image: 25,
        margin: 14,
        seed: 1,
        ..SynthParams::default()
    };
    let (samples, manifest, census) = generate_samples(&params).unwrap();
    assert_eq!(census.values().sum::<u64>(), 500);
    let ctx = DatasetContext::from_samples(manifest, samples);
    let cfg = AugmentationConfig {
        seed: 42,
        ..AugmentationConfig::default()
    };
    let out_dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let report = augment_dataset(&ctx, &cfg, out_dir.path(), 1).unwrap();
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "augmentation took {elapsed:?}, budget is 10 s"
    );
    assert!(report.applied > 0);
    println!(
        "PASS performance: 1000x1000 with 500 nuclei, {} applied, in {elapsed:?}",
        report.applied
    );
}
