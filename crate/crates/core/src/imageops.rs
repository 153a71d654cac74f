//! Shared raster primitives: binary morphology, exact Euclidean distance
//! fields, centroids, rigid footprint shifts and per-channel color
//! statistics.

use crate::error::{Error, Result};
use crate::pixelset::PixelSet;
use crate::raster::{Raster, Rect, Rgb, RgbRaster};
use crate::scalar::Scalar;

/// Exact Euclidean nearest-distance field over a rectangular patch.
///
/// `values` holds, for every patch pixel, the minimum Euclidean distance to
/// `source`; it is zero exactly on source pixels. Distances are computed on
/// integer squared distances first, so the result is the correctly rounded
/// true distance, not an approximation.
#[derive(Debug, Clone)]
pub struct DistanceField<F> {
    rect: Rect,
    values: Raster<F>,
    source: PixelSet,
}

impl<F: Scalar> DistanceField<F> {
    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn source(&self) -> &PixelSet {
        &self.source
    }

    /// Distance at frame coordinates `(row, col)`; must be inside the patch.
    pub fn get(&self, row: u32, col: u32) -> F {
        debug_assert!(self.rect.contains(row, col));
        self.values.get(row - self.rect.top, col - self.rect.left)
    }
}

/// Morphological dilation with the 3x3 square structuring element applied
/// `iterations` times, i.e. the Chebyshev ball of radius `iterations`,
/// clipped to the set's frame. Zero iterations is the identity.
pub fn dilate(mask: &PixelSet, iterations: u32) -> PixelSet {
    if iterations == 0 || mask.is_empty() {
        return mask.clone();
    }
    let (fh, fw) = mask.frame();
    let k = i64::from(iterations);
    let mut out = std::collections::BTreeSet::new();
    for (r, c) in mask.iter() {
        let r0 = (i64::from(r) - k).max(0) as u32;
        let r1 = ((i64::from(r) + k) as u64).min(u64::from(fh) - 1) as u32;
        let c0 = (i64::from(c) - k).max(0) as u32;
        let c1 = ((i64::from(c) + k) as u64).min(u64::from(fw) - 1) as u32;
        for nr in r0..=r1 {
            for nc in c0..=c1 {
                out.insert((nr, nc));
            }
        }
    }
    PixelSet::from_sorted_unchecked((fh, fw), out.into_iter().collect())
}

/// Exact Euclidean distance transform over `rect` with distances measured
/// to `source`. Two-pass algorithm: per-column nearest-row scan, then a
/// lower-envelope pass over each row on squared distances.
pub fn min_distance_field<F: Scalar>(rect: Rect, source: &PixelSet) -> Result<DistanceField<F>> {
    if source.is_empty() {
        return Err(Error::DistanceToEmptySet);
    }
    let h = rect.height as usize;
    let w = rect.width as usize;
    for (r, c) in source.iter() {
        if !rect.contains(r, c) {
            return Err(Error::DimensionMismatch(format!(
                "distance source pixel ({r}, {c}) outside patch"
            )));
        }
    }

    // Pass 1: for each column, squared distance to the nearest source row.
    const FAR: f64 = f64::INFINITY;
    let mut col_dist = vec![FAR; h * w];
    let mut is_source = vec![false; h * w];
    for (r, c) in source.iter() {
        is_source[(r - rect.top) as usize * w + (c - rect.left) as usize] = true;
    }
    for c in 0..w {
        let mut run = FAR;
        for r in 0..h {
            run = if is_source[r * w + c] { 0.0 } else { run + 1.0 };
            col_dist[r * w + c] = run;
        }
        run = FAR;
        for r in (0..h).rev() {
            run = if is_source[r * w + c] { 0.0 } else { run + 1.0 };
            col_dist[r * w + c] = col_dist[r * w + c].min(run);
        }
    }

    // Pass 2: lower envelope of parabolas per row.
    let mut sq = vec![0.0f64; h * w];
    let mut f = vec![0.0f64; w];
    let mut out_row = vec![0.0f64; w];
    for r in 0..h {
        for c in 0..w {
            let d = col_dist[r * w + c];
            f[c] = if d.is_finite() { d * d } else { FAR };
        }
        envelope_1d(&f, &mut out_row);
        sq[r * w..(r + 1) * w].copy_from_slice(&out_row);
    }

    let values = Raster::from_vec(
        rect.height,
        rect.width,
        sq.iter().map(|&d| F::from_f64_lossy(d.sqrt())).collect(),
    )
    .expect("dims match by construction");
    Ok(DistanceField {
        rect,
        values,
        source: source.clone(),
    })
}

/// One-dimensional squared-distance transform by lower envelope of
/// parabolas. `f` may contain infinities for positions with no seed in
/// their column; the envelope skips them.
fn envelope_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    debug_assert_eq!(out.len(), n);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k: usize = 0;
    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            started = true;
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                if k == 0 {
                    // replace the only parabola
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !started {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, slot) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *slot = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Arithmetic mean of the mask coordinates.
pub fn centroid<F: Scalar>(mask: &PixelSet) -> Result<(F, F)> {
    if mask.is_empty() {
        return Err(Error::EmptyPixelSet("centroid"));
    }
    let mut sum_r: u64 = 0;
    let mut sum_c: u64 = 0;
    for (r, c) in mask.iter() {
        sum_r += u64::from(r);
        sum_c += u64::from(c);
    }
    let n = mask.len() as f64;
    Ok((
        F::from_f64_lossy(sum_r as f64 / n),
        F::from_f64_lossy(sum_c as f64 / n),
    ))
}

/// Per-axis translation offset that matches `from`'s centroid to `to`'s,
/// rounded half away from zero.
pub fn centroid_offset(from: &PixelSet, to: &PixelSet) -> Result<(i64, i64)> {
    let (fr, fc): (f64, f64) = centroid(from)?;
    let (tr, tc): (f64, f64) = centroid(to)?;
    Ok(((tr - fr).round() as i64, (tc - fc).round() as i64))
}

/// Rigid shift of a footprint into `frame`; `None` when any pixel would
/// leave the frame (the caller reselects rather than clipping silently).
pub fn translate_footprint(
    mask: &PixelSet,
    d_row: i64,
    d_col: i64,
    frame: (u32, u32),
) -> Option<PixelSet> {
    mask.translate(d_row, d_col, frame)
}

/// Per-channel arithmetic mean over `region`, unrounded.
pub fn mean_color<F: Scalar>(image: &RgbRaster, region: &PixelSet) -> Result<[F; 3]> {
    if region.is_empty() {
        return Err(Error::EmptyPixelSet("mean_color"));
    }
    let mut sums = [0u64; 3];
    for (r, c) in region.iter() {
        let px = image.get(r, c);
        for ch in 0..3 {
            sums[ch] += u64::from(px[ch]);
        }
    }
    let n = region.len() as f64;
    Ok([
        F::from_f64_lossy(sums[0] as f64 / n),
        F::from_f64_lossy(sums[1] as f64 / n),
        F::from_f64_lossy(sums[2] as f64 / n),
    ])
}

/// Add `delta` to every channel of the pixels in `region`, rounding half
/// away from zero then clamping to `[0, 255]`. Pixels outside `region` are
/// untouched.
pub fn shift_color<F: Scalar>(image: &RgbRaster, region: &PixelSet, delta: [F; 3]) -> RgbRaster {
    let mut out = image.clone();
    shift_color_in_place(&mut out, region, delta);
    out
}

pub(crate) fn shift_color_in_place<F: Scalar>(
    image: &mut RgbRaster,
    region: &PixelSet,
    delta: [F; 3],
) {
    if delta.iter().all(|d| *d == F::zero()) {
        return;
    }
    for (r, c) in region.iter() {
        let mut px: Rgb = image.get(r, c);
        for ch in 0..3 {
            px[ch] = (F::from_channel(px[ch]) + delta[ch]).to_channel();
        }
        image.set(r, c, px);
    }
}
