//! Row-major rasters and integer rectangles.

use crate::error::{Error, Result};

/// One RGB pixel, 8 bits per channel.
pub type Rgb = [u8; 3];

/// Rectangle in raster coordinates. `top`/`left` are the first row/column
/// covered; `height`/`width` count covered rows/columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub top: u32,
    pub left: u32,
    pub height: u32,
    pub width: u32,
}

impl Rect {
    pub fn new(top: u32, left: u32, height: u32, width: u32) -> Self {
        Rect {
            top,
            left,
            height,
            width,
        }
    }

    /// Whole-frame rectangle.
    pub fn frame(height: u32, width: u32) -> Self {
        Rect::new(0, 0, height, width)
    }

    /// One past the last covered row.
    pub fn bottom(&self) -> u32 {
        self.top + self.height
    }

    /// One past the last covered column.
    pub fn right(&self) -> u32 {
        self.left + self.width
    }

    pub fn area(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn contains(&self, row: u32, col: u32) -> bool {
        row >= self.top && row < self.bottom() && col >= self.left && col < self.right()
    }

    /// Smallest rectangle covering both operands.
    pub fn union(&self, other: &Rect) -> Rect {
        let top = self.top.min(other.top);
        let left = self.left.min(other.left);
        let bottom = self.bottom().max(other.bottom());
        let right = self.right().max(other.right());
        Rect::new(top, left, bottom - top, right - left)
    }

    /// Intersection with another rectangle; empty intersections collapse to
    /// a zero-sized rectangle at the clamped corner.
    pub fn clip(&self, bound: &Rect) -> Rect {
        let top = self.top.max(bound.top);
        let left = self.left.max(bound.left);
        let bottom = self.bottom().min(bound.bottom()).max(top);
        let right = self.right().min(bound.right()).max(left);
        Rect::new(top, left, bottom - top, right - left)
    }

    /// Grow by `margin` on every side, clipped to `bound`.
    pub fn expand(&self, margin: u32, bound: &Rect) -> Rect {
        let top = self.top.saturating_sub(margin).max(bound.top);
        let left = self.left.saturating_sub(margin).max(bound.left);
        let bottom = (self.bottom() + margin).min(bound.bottom());
        let right = (self.right() + margin).min(bound.right());
        Rect::new(top, left, bottom - top, right - left)
    }

    /// Row-major iteration over covered coordinates.
    pub fn coords(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let rect = *self;
        (rect.top..rect.bottom())
            .flat_map(move |r| (rect.left..rect.right()).map(move |c| (r, c)))
    }
}

/// Dense row-major grid of `T` with `u32` coordinates `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster<T> {
    height: u32,
    width: u32,
    data: Vec<T>,
}

impl<T: Copy> Raster<T> {
    pub fn filled(height: u32, width: u32, value: T) -> Self {
        Raster {
            height,
            width,
            data: vec![value; height as usize * width as usize],
        }
    }

    pub fn from_vec(height: u32, width: u32, data: Vec<T>) -> Result<Self> {
        if data.len() != height as usize * width as usize {
            return Err(Error::DimensionMismatch(format!(
                "raster data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Raster {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn frame(&self) -> Rect {
        Rect::frame(self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn in_bounds(&self, row: u32, col: u32) -> bool {
        row < self.height && col < self.width
    }

    #[inline]
    fn index(&self, row: u32, col: u32) -> usize {
        debug_assert!(self.in_bounds(row, col));
        row as usize * self.width as usize + col as usize
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> T {
        self.data[self.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: T) {
        let idx = self.index(row, col);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Copy of the sub-rectangle; `rect` must lie inside the raster.
    pub fn crop(&self, rect: &Rect) -> Raster<T> {
        assert!(
            rect.bottom() <= self.height && rect.right() <= self.width,
            "crop rectangle out of bounds"
        );
        let mut data = Vec::with_capacity(rect.area());
        for r in rect.top..rect.bottom() {
            let start = self.index(r, rect.left);
            data.extend_from_slice(&self.data[start..start + rect.width as usize]);
        }
        Raster {
            height: rect.height,
            width: rect.width,
            data,
        }
    }

    /// Write `patch` back at `rect` (dimensions must match).
    pub fn blit(&mut self, rect: &Rect, patch: &Raster<T>) {
        assert_eq!((rect.height, rect.width), patch.dims(), "blit size mismatch");
        assert!(
            rect.bottom() <= self.height && rect.right() <= self.width,
            "blit rectangle out of bounds"
        );
        for r in 0..rect.height {
            let dst = self.index(rect.top + r, rect.left);
            let src = r as usize * rect.width as usize;
            self.data[dst..dst + rect.width as usize]
                .copy_from_slice(&patch.data[src..src + rect.width as usize]);
        }
    }

    /// Coordinates paired with values, row-major.
    pub fn enumerate(&self) -> impl Iterator<Item = ((u32, u32), T)> + '_ {
        let width = self.width;
        self.data.iter().enumerate().map(move |(i, v)| {
            let row = (i / width as usize) as u32;
            let col = (i % width as usize) as u32;
            ((row, col), *v)
        })
    }
}

/// 8-bit RGB raster.
pub type RgbRaster = Raster<Rgb>;
/// Instance-label raster; 0 is background.
pub type LabelRaster = Raster<u32>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_and_blit_round_trip() {
        let mut r = Raster::filled(4, 5, 0u32);
        r.set(1, 2, 7);
        r.set(2, 3, 9);
        let rect = Rect::new(1, 1, 2, 3);
        let patch = r.crop(&rect);
        assert_eq!(patch.get(0, 1), 7);
        assert_eq!(patch.get(1, 2), 9);
        let mut other = Raster::filled(4, 5, 1u32);
        other.blit(&rect, &patch);
        assert_eq!(other.get(1, 2), 7);
        assert_eq!(other.get(0, 0), 1);
    }

    #[test]
    fn rect_union_and_clip() {
        let a = Rect::new(1, 1, 2, 2);
        let b = Rect::new(2, 3, 3, 1);
        let u = a.union(&b);
        assert_eq!(u, Rect::new(1, 1, 4, 3));
        let clipped = u.clip(&Rect::frame(3, 3));
        assert_eq!(clipped, Rect::new(1, 1, 2, 2));
    }

    #[test]
    fn rect_expand_clips_to_bound() {
        let r = Rect::new(0, 2, 2, 2);
        let e = r.expand(3, &Rect::frame(6, 6));
        assert_eq!(e, Rect::new(0, 0, 5, 6));
    }
}
