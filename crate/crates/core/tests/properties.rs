//! Property tests for the raster primitives and the dataset codec.

use std::collections::BTreeMap;

use proptest::prelude::*;

use gradmix_core::dataset::{load_sample, write_sample, Sample};
use gradmix_core::imageops::{centroid, dilate, shift_color, translate_footprint};
use gradmix_core::mixer::{build_mixing_mask, composite, partition_regions, MixingMask, NormMode};
use gradmix_core::pixelset::PixelSet;
use gradmix_core::raster::{LabelRaster, Raster, Rect, RgbRaster};

const FRAME: u32 = 12;

fn arb_pixelset(max_len: usize) -> impl Strategy<Value = PixelSet> {
    prop::collection::vec((0..FRAME, 0..FRAME), 1..=max_len)
        .prop_map(|coords| PixelSet::from_pixels(FRAME, FRAME, coords).unwrap())
}

fn arb_image(side: u32) -> impl Strategy<Value = RgbRaster> {
    prop::collection::vec(prop::array::uniform3(any::<u8>()), (side * side) as usize)
        .prop_map(move |data| Raster::from_vec(side, side, data).unwrap())
}

proptest! {
    #[test]
    fn dilate_is_monotone_and_composes(
        a in arb_pixelset(20),
        extra in arb_pixelset(10),
        j in 0u32..3,
        k in 0u32..3,
    ) {
        let b = a.union(&extra);
        prop_assert!(dilate(&a, k).is_subset_of(&dilate(&b, k)));
        prop_assert_eq!(dilate(&a, j + k), dilate(&dilate(&a, j), k));
    }

    #[test]
    fn centroid_shifts_with_translation(
        mask in arb_pixelset(20),
        dr in -3i64..=3,
        dc in -3i64..=3,
    ) {
        if let Some(moved) = translate_footprint(&mask, dr, dc, (FRAME, FRAME)) {
            let (r0, c0): (f64, f64) = centroid(&mask).unwrap();
            let (r1, c1): (f64, f64) = centroid(&moved).unwrap();
            prop_assert!((r1 - r0 - dr as f64).abs() < 1e-9);
            prop_assert!((c1 - c0 - dc as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_color_round_trips_where_unclamped(
        image in arb_image(6),
        region in prop::collection::vec((0u32..6, 0u32..6), 1..=12),
        delta in prop::array::uniform3(-80.0f64..80.0),
    ) {
        let region = PixelSet::from_pixels(6, 6, region).unwrap();
        let there = shift_color(&image, &region, delta);
        let back = shift_color(&there, &region, [-delta[0], -delta[1], -delta[2]]);
        for (r, c) in region.iter() {
            let original = image.get(r, c);
            let shifted = there.get(r, c);
            for ch in 0..3 {
                let exact = f64::from(original[ch]) + delta[ch];
                let clamped_out = !(0.0..=255.0).contains(&exact.round());
                let exact_back = f64::from(shifted[ch]) - delta[ch];
                let clamped_back = !(0.0..=255.0).contains(&exact_back.round());
                if !clamped_out && !clamped_back {
                    prop_assert_eq!(back.get(r, c)[ch], original[ch]);
                }
            }
        }
    }

    #[test]
    fn composite_stays_between_operands(
        bg in arb_image(5),
        src in arb_image(5),
        weights in prop::collection::vec(0.0f64..=1.0, 25),
    ) {
        let rect = Rect::frame(5, 5);
        let mask = MixingMask::from_values(
            rect,
            Raster::from_vec(5, 5, weights).unwrap(),
            NormMode::Max,
        )
        .unwrap();
        let out = composite(&bg, &src, &mask).unwrap();
        for r in 0..rect.height {
            for c in 0..rect.width {
                for ch in 0..3 {
                    let lo = bg.get(r, c)[ch].min(src.get(r, c)[ch]);
                    let hi = bg.get(r, c)[ch].max(src.get(r, c)[ch]);
                    let got = out.get(r, c)[ch];
                    prop_assert!(got >= lo && got <= hi);
                }
            }
        }
    }

    #[test]
    fn mask_builder_output_partitions_and_bounds(
        major in arb_pixelset(24),
        rare in arb_pixelset(6),
        iterations in 0u32..3,
    ) {
        let partition = partition_regions(&major, &rare, iterations).unwrap();
        prop_assert_eq!(
            partition.nucleus.len() + partition.blend.len() + partition.outside.len(),
            partition.patch.area()
        );
        for mode in [NormMode::Max, NormMode::Sum] {
            let mask = build_mixing_mask::<f64>(&partition, mode).unwrap();
            for (r, c) in partition.patch.coords() {
                let w = mask.get(r, c);
                prop_assert!((0.0..=1.0).contains(&w));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sample_write_load_round_trip(
        pixels in prop::collection::vec(prop::array::uniform3(any::<u8>()), 64),
        labels in prop::collection::vec(0u32..4, 64),
    ) {
        let image = Raster::from_vec(8, 8, pixels).unwrap();
        let instance_map = LabelRaster::from_vec(8, 8, labels).unwrap();
        let mut class_of = BTreeMap::new();
        for &label in instance_map.as_slice() {
            if label != 0 {
                class_of.insert(label, 1 + label % 3);
            }
        }
        let sample = Sample { id: "prop".into(), image, instance_map, class_of };
        prop_assume!(sample.validate().is_ok());
        let dir = tempfile::tempdir().unwrap();
        let entry = write_sample(dir.path(), &sample).unwrap();
        let taxonomy: BTreeMap<u32, String> =
            (1..=3).map(|c| (c, format!("class_{c}"))).collect();
        let back = load_sample(dir.path(), &entry, &taxonomy).unwrap();
        prop_assert_eq!(back, sample);
    }
}
