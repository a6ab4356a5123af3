//! Dense binary H×W masks and the pixel-set operations the rest of the
//! crate builds on (union, overlap counts, square erosion).

use std::fmt;

/// A binary foreground mask stored row-major, one byte per pixel.
///
/// Pixel `(x, y)` has column `x` and row `y`, origin top-left.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Bitmap {
    /// An all-background bitmap.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Wraps row-major data; `None` when the length does not match.
    pub fn from_row_major(width: u32, height: u32, data: Vec<bool>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// `(width, height)`.
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn same_dims(&self, other: &Bitmap) -> bool {
        self.dims() == other.dims()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.idx(x, y);
        self.data[i] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Foreground pixel coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// In-place OR. Panics on mismatched dimensions.
    pub fn union_with(&mut self, other: &Bitmap) {
        assert!(self.same_dims(other), "bitmap dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }

    /// In-place AND-NOT. Panics on mismatched dimensions.
    pub fn subtract(&mut self, other: &Bitmap) {
        assert!(self.same_dims(other), "bitmap dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a &= !b;
        }
    }

    pub fn intersection_count(&self, other: &Bitmap) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn union_count(&self, other: &Bitmap) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a || b)
            .count()
    }

    /// `true` when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Bitmap) -> bool {
        self.same_dims(other) && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Union of a non-empty collection of equally sized bitmaps.
    pub fn union_all<'a>(masks: impl IntoIterator<Item = &'a Bitmap>) -> Option<Bitmap> {
        let mut iter = masks.into_iter();
        let mut acc = iter.next()?.clone();
        for m in iter {
            acc.union_with(m);
        }
        Some(acc)
    }

    /// Erosion by a (2r+1)×(2r+1) square; pixels outside the image count as
    /// background, so foreground touching the border erodes too.
    pub fn erode_square(&self, radius: u32) -> Bitmap {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        let mut horiz = vec![false; w * h];
        for y in 0..h {
            let row = &self.data[y * w..(y + 1) * w];
            erode_line(row, &mut horiz[y * w..(y + 1) * w], r);
        }
        let mut out = vec![false; w * h];
        let mut column = vec![false; h];
        let mut column_out = vec![false; h];
        for x in 0..w {
            for y in 0..h {
                column[y] = horiz[y * w + x];
            }
            erode_line(&column, &mut column_out, r);
            for y in 0..h {
                out[y * w + x] = column_out[y];
            }
        }
        Bitmap {
            width: self.width,
            height: self.height,
            data: out,
        }
    }

    /// Pixels of the mask within Chebyshev distance `radius` of its outside:
    /// the mask minus its square erosion.
    pub fn boundary_band(&self, radius: u32) -> Bitmap {
        let mut band = self.clone();
        band.subtract(&self.erode_square(radius));
        band
    }
}

/// 1-D min filter with zero padding: `out[i]` is set iff `input[i-r..=i+r]`
/// lies inside the line and is all foreground.
fn erode_line(input: &[bool], out: &mut [bool], r: usize) {
    let n = input.len();
    // run[i] = length of the foreground run ending at i
    let mut run = 0usize;
    let mut runs = vec![0usize; n];
    for i in 0..n {
        run = if input[i] { run + 1 } else { 0 };
        runs[i] = run;
    }
    for (i, o) in out.iter_mut().enumerate() {
        let end = i + r;
        *o = i >= r && end < n && runs[end] > 2 * r;
    }
}

impl fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bitmap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}
