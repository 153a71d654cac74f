//! Fast-marching image inpainting.
//!
//! A hole is erased by solving an arrival-time field `T` from the hole
//! boundary inward (first-order upwind update on the 4-neighborhood) and
//! filling pixels in non-decreasing `T` order. Each pixel is estimated as a
//! normalized weighted average of already-known pixels within a disk of
//! radius `radius`; the weights combine alignment with the propagation
//! direction, inverse squared geometric distance, and level-set proximity,
//! and every contribution carries a first-order correction along the known
//! image gradient.
//!
//! Determinism: heap ties on `T` break by `(row, col)` lexicographic order,
//! so outputs are byte-reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::pixelset::PixelSet;
use crate::raster::{Raster, RgbRaster};
use crate::scalar::Scalar;

/// Arrival time assigned to unresolved hole pixels.
const FAR: f64 = 1.0e6;
/// Floor for the direction factor so weights stay strictly positive.
const DIR_FLOOR: f64 = 1.0e-6;

/// A hole to synthesize over an image.
#[derive(Debug, Clone)]
pub struct InpaintProblem<'a> {
    pub image: &'a RgbRaster,
    pub hole: &'a PixelSet,
    /// Neighborhood radius for the estimator, in pixels (>= 1).
    pub radius: u32,
}

/// Debug/inspection byproducts of a marching run.
#[derive(Debug, Clone)]
pub struct InpaintTrace<F> {
    /// Final arrival-time field (zero on the initial boundary band).
    pub arrival: Raster<F>,
    /// Pixels in finalization order with their arrival times.
    pub finalized: Vec<(u32, u32, F)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flag {
    Known,
    Band,
    Inside,
}

struct Node<F> {
    t: F,
    row: u32,
    col: u32,
}

impl<F: Scalar> PartialEq for Node<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<F: Scalar> Eq for Node<F> {}
impl<F: Scalar> PartialOrd for Node<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Scalar> Ord for Node<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest (t, row, col)
        // pops first.
        let t_order = self
            .t
            .partial_cmp(&other.t)
            .expect("arrival times are finite");
        t_order
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
            .reverse()
    }
}

/// Fill the hole and return the new raster. Pixels outside the hole are
/// bitwise unchanged; an empty hole returns the input unchanged.
pub fn inpaint<F: Scalar>(problem: &InpaintProblem<'_>) -> Result<RgbRaster> {
    inpaint_with_trace::<F>(problem).map(|(raster, _)| raster)
}

/// As [`inpaint`], additionally returning the arrival-time field and the
/// finalization order for inspection.
pub fn inpaint_with_trace<F: Scalar>(
    problem: &InpaintProblem<'_>,
) -> Result<(RgbRaster, InpaintTrace<F>)> {
    let image = problem.image;
    let hole = problem.hole;
    let (h, w) = image.dims();
    if hole.frame() != (h, w) {
        return Err(Error::DimensionMismatch(format!(
            "hole frame {:?} vs image {}x{}",
            hole.frame(),
            h,
            w
        )));
    }
    if problem.radius == 0 {
        return Err(Error::Config("inpaint radius must be >= 1".into()));
    }
    if hole.is_empty() {
        let trace = InpaintTrace {
            arrival: Raster::filled(h, w, F::zero()),
            finalized: Vec::new(),
        };
        return Ok((image.clone(), trace));
    }
    if hole.len() == image.len() {
        return Err(Error::HoleCoversFrame);
    }

    let mut out = image.clone();
    let mut flag = Raster::filled(h, w, Flag::Known);
    let mut time: Raster<F> = Raster::filled(h, w, F::zero());
    let far = F::from_f64_lossy(FAR);
    for (r, c) in hole.iter() {
        flag.set(r, c, Flag::Inside);
        time.set(r, c, far);
    }

    // Boundary band: known pixels 4-adjacent to the hole, at T = 0.
    let mut heap: BinaryHeap<Node<F>> = BinaryHeap::new();
    for (r, c) in hole.iter() {
        for (nr, nc) in neighbors4(r, c, h, w) {
            if flag.get(nr, nc) == Flag::Known {
                flag.set(nr, nc, Flag::Band);
                heap.push(Node {
                    t: F::zero(),
                    row: nr,
                    col: nc,
                });
            }
        }
    }

    let offsets = disk_offsets(problem.radius);
    let mut finalized = Vec::with_capacity(hole.len());

    while let Some(node) = heap.pop() {
        let (r, c) = (node.row, node.col);
        if flag.get(r, c) == Flag::Known {
            continue; // stale entry, already finalized at a smaller T
        }
        flag.set(r, c, Flag::Known);
        finalized.push((r, c, time.get(r, c)));

        for (nr, nc) in neighbors4(r, c, h, w) {
            let nflag = flag.get(nr, nc);
            if nflag == Flag::Known {
                continue;
            }
            let t_new = arrival_update(&time, &flag, nr, nc, h, w);
            if t_new < time.get(nr, nc) {
                time.set(nr, nc, t_new);
                if nflag == Flag::Inside {
                    let grad_t = field_gradient(&time, &flag, nr, nc, h, w);
                    let estimate = estimate_from_flags(&out, &flag, &time, (nr, nc), grad_t, &offsets)?;
                    out.set(
                        nr,
                        nc,
                        [
                            estimate[0].to_channel(),
                            estimate[1].to_channel(),
                            estimate[2].to_channel(),
                        ],
                    );
                    flag.set(nr, nc, Flag::Band);
                }
                heap.push(Node {
                    t: t_new,
                    row: nr,
                    col: nc,
                });
            }
        }
    }

    debug_assert!(hole.iter().all(|(r, c)| flag.get(r, c) == Flag::Known));
    Ok((
        out,
        InpaintTrace {
            arrival: time,
            finalized,
        },
    ))
}

/// Estimate a single pixel from `known` contributors within `radius`.
///
/// This is the same estimator the marching loop applies, exposed so its
/// output can be checked against an independently assembled neighborhood:
/// `grad_t` is the arrival-time gradient at `target` ((0, 0) makes the
/// direction weight uniform) and `time` supplies the level-set term.
pub fn pixel_estimate<F: Scalar>(
    image: &RgbRaster,
    known: &PixelSet,
    target: (u32, u32),
    grad_t: (F, F),
    time: &Raster<F>,
    radius: u32,
) -> Result<[F; 3]> {
    let (h, w) = image.dims();
    if known.frame() != (h, w) {
        return Err(Error::DimensionMismatch(format!(
            "known frame {:?} vs image {}x{}",
            known.frame(),
            h,
            w
        )));
    }
    let mut flag = Raster::filled(h, w, Flag::Inside);
    for (r, c) in known.iter() {
        flag.set(r, c, Flag::Known);
    }
    estimate_from_flags(image, &flag, time, target, grad_t, &disk_offsets(radius))
}

fn neighbors4(r: u32, c: u32, h: u32, w: u32) -> impl Iterator<Item = (u32, u32)> {
    [
        (r.wrapping_sub(1), c),
        (r + 1, c),
        (r, c.wrapping_sub(1)),
        (r, c + 1),
    ]
    .into_iter()
    .filter(move |&(nr, nc)| nr < h && nc < w)
}

/// Offsets within the closed Euclidean disk of the given radius, excluding
/// the origin.
fn disk_offsets(radius: u32) -> Vec<(i64, i64)> {
    let k = i64::from(radius);
    let r2 = k * k;
    let mut out = Vec::new();
    for dr in -k..=k {
        for dc in -k..=k {
            if dr == 0 && dc == 0 {
                continue;
            }
            if dr * dr + dc * dc <= r2 {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// First-order upwind arrival-time update at `(r, c)`: minimum over the
/// four quadrant pairs of axis neighbors.
fn arrival_update<F: Scalar>(
    time: &Raster<F>,
    flag: &Raster<Flag>,
    r: u32,
    c: u32,
    h: u32,
    w: u32,
) -> F {
    let usable = |rr: u32, cc: u32| -> Option<F> {
        if rr < h && cc < w && flag.get(rr, cc) != Flag::Inside {
            Some(time.get(rr, cc))
        } else {
            None
        }
    };
    let up = usable(r.wrapping_sub(1), c);
    let down = usable(r + 1, c);
    let left = usable(r, c.wrapping_sub(1));
    let right = usable(r, c + 1);
    let mut best = F::from_f64_lossy(FAR);
    for vertical in [up, down] {
        for horizontal in [left, right] {
            best = best.min(quadrant_solve(vertical, horizontal));
        }
    }
    best
}

/// Solve `|grad T| = 1` from one vertical and one horizontal neighbor.
fn quadrant_solve<F: Scalar>(a: Option<F>, b: Option<F>) -> F {
    let one = F::one();
    match (a, b) {
        (Some(a), Some(b)) => {
            let diff = (a - b).abs();
            if diff >= one {
                one + a.min(b)
            } else {
                let two = one + one;
                ((a + b) + (two - diff * diff).sqrt()) / two
            }
        }
        (Some(a), None) => one + a,
        (None, Some(b)) => one + b,
        (None, None) => F::from_f64_lossy(FAR),
    }
}

/// Central-difference gradient of the arrival field at `(r, c)` over
/// resolved pixels, one-sided at the band edge, zero where no stencil
/// exists (which makes the direction weight uniform).
fn field_gradient<F: Scalar>(
    time: &Raster<F>,
    flag: &Raster<Flag>,
    r: u32,
    c: u32,
    h: u32,
    w: u32,
) -> (F, F) {
    let usable = |rr: u32, cc: u32| -> Option<F> {
        if rr < h && cc < w && flag.get(rr, cc) != Flag::Inside {
            Some(time.get(rr, cc))
        } else {
            None
        }
    };
    let here = time.get(r, c);
    let half = F::from_f64_lossy(0.5);
    let axis = |lo: Option<F>, hi: Option<F>| -> F {
        match (lo, hi) {
            (Some(lo), Some(hi)) => (hi - lo) * half,
            (None, Some(hi)) => hi - here,
            (Some(lo), None) => here - lo,
            (None, None) => F::zero(),
        }
    };
    (
        axis(usable(r.wrapping_sub(1), c), usable(r + 1, c)),
        axis(usable(r, c.wrapping_sub(1)), usable(r, c + 1)),
    )
}

/// Channel gradient of the image at `(r, c)` over contributor-eligible
/// pixels, used for the first-order term of each contribution.
fn image_gradient(
    image: &RgbRaster,
    flag: &Raster<Flag>,
    r: u32,
    c: u32,
    h: u32,
    w: u32,
) -> [(f64, f64); 3] {
    let usable = |rr: u32, cc: u32| -> Option<[u8; 3]> {
        if rr < h && cc < w && flag.get(rr, cc) != Flag::Inside {
            Some(image.get(rr, cc))
        } else {
            None
        }
    };
    let here = image.get(r, c);
    let mut out = [(0.0, 0.0); 3];
    let up = usable(r.wrapping_sub(1), c);
    let down = usable(r + 1, c);
    let left = usable(r, c.wrapping_sub(1));
    let right = usable(r, c + 1);
    for ch in 0..3 {
        let axis = |lo: Option<[u8; 3]>, hi: Option<[u8; 3]>| -> f64 {
            match (lo, hi) {
                (Some(lo), Some(hi)) => (f64::from(hi[ch]) - f64::from(lo[ch])) / 2.0,
                (None, Some(hi)) => f64::from(hi[ch]) - f64::from(here[ch]),
                (Some(lo), None) => f64::from(here[ch]) - f64::from(lo[ch]),
                (None, None) => 0.0,
            }
        };
        out[ch] = (axis(up, down), axis(left, right));
    }
    out
}

fn estimate_from_flags<F: Scalar>(
    image: &RgbRaster,
    flag: &Raster<Flag>,
    time: &Raster<F>,
    target: (u32, u32),
    grad_t: (F, F),
    offsets: &[(i64, i64)],
) -> Result<[F; 3]> {
    let (h, w) = image.dims();
    let (tr, tc) = target;
    let t_here = time.get(tr, tc);
    let dir_floor = F::from_f64_lossy(DIR_FLOOR);
    let mut weight_sum = F::zero();
    let mut acc = [F::zero(); 3];

    for &(dr, dc) in offsets {
        let qr = i64::from(tr) + dr;
        let qc = i64::from(tc) + dc;
        if qr < 0 || qc < 0 || qr >= i64::from(h) || qc >= i64::from(w) {
            continue;
        }
        let (qr, qc) = (qr as u32, qc as u32);
        if flag.get(qr, qc) == Flag::Inside {
            continue;
        }
        // Vector from contributor to target.
        let vr = F::from_f64_lossy(-(dr as f64));
        let vc = F::from_f64_lossy(-(dc as f64));
        let len_sq = vr * vr + vc * vc;
        let len = len_sq.sqrt();
        let mut dir = (vr * grad_t.0 + vc * grad_t.1).abs() / len;
        if dir < dir_floor {
            dir = dir_floor;
        }
        let dst = F::one() / len_sq;
        let lev = F::one() / (F::one() + (t_here - time.get(qr, qc)).abs());
        let weight = dir * dst * lev;

        let grad_i = image_gradient(image, flag, qr, qc, h, w);
        let px = image.get(qr, qc);
        for ch in 0..3 {
            let first_order = F::from_f64_lossy(grad_i[ch].0) * (F::from_f64_lossy(f64::from(tr) - f64::from(qr)))
                + F::from_f64_lossy(grad_i[ch].1) * (F::from_f64_lossy(f64::from(tc) - f64::from(qc)));
            let contribution = F::from_channel(px[ch]) + first_order;
            acc[ch] = acc[ch] + weight * contribution;
        }
        weight_sum = weight_sum + weight;
    }

    if weight_sum <= F::zero() {
        return Err(Error::StarvedEstimator { row: tr, col: tc });
    }
    Ok([
        acc[0] / weight_sum,
        acc[1] / weight_sum,
        acc[2] / weight_sum,
    ])
}
