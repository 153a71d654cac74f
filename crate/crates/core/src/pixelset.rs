//! Sets of raster coordinates with set semantics and a canonical order.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::raster::Rect;

/// A set of `(row, col)` pixels inside a declared `height x width` frame.
///
/// Pixels are stored sorted row-major so iteration order is canonical; all
/// derived quantities (centroids, masks, digests) are therefore
/// reproducible run to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSet {
    frame: (u32, u32),
    pixels: Vec<(u32, u32)>,
}

impl PixelSet {
    pub fn empty(frame_height: u32, frame_width: u32) -> Self {
        PixelSet {
            frame: (frame_height, frame_width),
            pixels: Vec::new(),
        }
    }

    /// Build from arbitrary coordinates; duplicates collapse, out-of-frame
    /// coordinates are an error.
    pub fn from_pixels(
        frame_height: u32,
        frame_width: u32,
        coords: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (r, c) in coords {
            if r >= frame_height || c >= frame_width {
                return Err(Error::DimensionMismatch(format!(
                    "pixel ({r}, {c}) outside {frame_height}x{frame_width} frame"
                )));
            }
            set.insert((r, c));
        }
        Ok(PixelSet {
            frame: (frame_height, frame_width),
            pixels: set.into_iter().collect(),
        })
    }

    /// Internal constructor for coordinates already sorted, deduped and
    /// validated by the caller.
    pub(crate) fn from_sorted_unchecked(frame: (u32, u32), pixels: Vec<(u32, u32)>) -> Self {
        debug_assert!(pixels.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(pixels.iter().all(|&(r, c)| r < frame.0 && c < frame.1));
        PixelSet { frame, pixels }
    }

    pub fn frame(&self) -> (u32, u32) {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, row: u32, col: u32) -> bool {
        self.pixels.binary_search(&(row, col)).is_ok()
    }

    /// Row-major iteration.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pixels.iter().copied()
    }

    /// Tight inclusive bounding rectangle, `None` for the empty set.
    pub fn bbox(&self) -> Option<Rect> {
        if self.pixels.is_empty() {
            return None;
        }
        let mut top = u32::MAX;
        let mut bottom = 0;
        let mut left = u32::MAX;
        let mut right = 0;
        for &(r, c) in &self.pixels {
            top = top.min(r);
            bottom = bottom.max(r);
            left = left.min(c);
            right = right.max(c);
        }
        Some(Rect::new(top, left, bottom - top + 1, right - left + 1))
    }

    /// Rigid shift by `(d_row, d_col)` into `frame`. Returns `None` if any
    /// shifted pixel would leave the frame; the caller decides whether that
    /// means reselection or an error.
    pub fn translate(&self, d_row: i64, d_col: i64, frame: (u32, u32)) -> Option<PixelSet> {
        let mut out = Vec::with_capacity(self.pixels.len());
        for &(r, c) in &self.pixels {
            let nr = i64::from(r) + d_row;
            let nc = i64::from(c) + d_col;
            if nr < 0 || nc < 0 || nr >= i64::from(frame.0) || nc >= i64::from(frame.1) {
                return None;
            }
            out.push((nr as u32, nc as u32));
        }
        // A rigid shift of a sorted row-major list stays sorted.
        Some(PixelSet::from_sorted_unchecked(frame, out))
    }

    /// Set union; frames must agree.
    pub fn union(&self, other: &PixelSet) -> PixelSet {
        assert_eq!(self.frame, other.frame, "pixel set frames differ");
        let mut merged = Vec::with_capacity(self.pixels.len() + other.pixels.len());
        let (mut a, mut b) = (self.pixels.iter().peekable(), other.pixels.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        merged.push(x);
                        a.next();
                    } else if y < x {
                        merged.push(y);
                        b.next();
                    } else {
                        merged.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    merged.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    merged.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        PixelSet::from_sorted_unchecked(self.frame, merged)
    }

    /// Set difference `self \ other`; frames must agree.
    pub fn difference(&self, other: &PixelSet) -> PixelSet {
        assert_eq!(self.frame, other.frame, "pixel set frames differ");
        let kept = self
            .pixels
            .iter()
            .copied()
            .filter(|&p| !other.contains(p.0, p.1))
            .collect();
        PixelSet::from_sorted_unchecked(self.frame, kept)
    }

    /// True if the sets share at least one pixel.
    pub fn intersects(&self, other: &PixelSet) -> bool {
        let (small, big) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().any(|(r, c)| big.contains(r, c))
    }

    pub fn is_subset_of(&self, other: &PixelSet) -> bool {
        self.iter().all(|(r, c)| other.contains(r, c))
    }
}
