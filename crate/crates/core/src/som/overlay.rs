//! Numbered badges drawn over candidate regions.

use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{Candidate, SomError};
use crate::mask::representative_point;

/// 5×7 bitmap digits, one row per byte, bit 4 = leftmost column.
const DIGITS: [[u8; 7]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BadgeStyle {
    /// Pixel size of one font cell.
    pub scale: u32,
    pub padding: u32,
    pub fill: [u8; 3],
    pub text: [u8; 3],
    pub outline: [u8; 3],
}

impl Default for BadgeStyle {
    fn default() -> Self {
        Self {
            scale: 2,
            padding: 3,
            fill: [220, 20, 20],
            text: [255, 255, 255],
            outline: [0, 0, 0],
        }
    }
}

impl BadgeStyle {
    /// Outer size of a badge showing `label`, outline included.
    pub fn badge_size(&self, label: &str) -> (u32, u32) {
        let n = label.len() as u32;
        let text_w = n * 5 * self.scale + n.saturating_sub(1) * self.scale;
        (
            text_w + 2 * self.padding + 2,
            7 * self.scale + 2 * self.padding + 2,
        )
    }
}

/// Badge rectangle, `[x, y, width, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadgeBox {
    pub x: i64,
    pub y: i64,
    pub width: u32,
    pub height: u32,
}

impl BadgeBox {
    pub fn overlaps(&self, o: &BadgeBox) -> bool {
        self.x < o.x + o.width as i64
            && o.x < self.x + self.width as i64
            && self.y < o.y + o.height as i64
            && o.y < self.y + self.height as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedImage {
    pub image: RgbImage,
    /// Mark number (from 1) → candidate id.
    pub id_map: BTreeMap<u32, String>,
    /// Badge placement per mark, same order as the marks.
    pub badges: Vec<BadgeBox>,
}

const NUDGE_STEP: i64 = 4;

fn place(anchor: (i64, i64), size: (u32, u32), image: (u32, u32), taken: &[BadgeBox]) -> BadgeBox {
    let clamp = |v: i64, extent: u32, bound: u32| v.clamp(0, (bound as i64 - extent as i64).max(0));
    let at = |dx: i64, dy: i64| BadgeBox {
        x: clamp(anchor.0 - size.0 as i64 / 2 + dx, size.0, image.0),
        y: clamp(anchor.1 - size.1 as i64 / 2 + dy, size.1, image.1),
        width: size.0,
        height: size.1,
    };
    let free = |b: &BadgeBox| !taken.iter().any(|t| t.overlaps(b));
    let first = at(0, 0);
    if free(&first) {
        return first;
    }
    let max_ring = (image.0.max(image.1) as i64) / NUDGE_STEP + 1;
    for ring in 1..=max_ring {
        let r = ring * NUDGE_STEP;
        let mut offsets = Vec::new();
        for k in -ring..=ring {
            let t = k * NUDGE_STEP;
            offsets.extend([(t, -r), (t, r), (-r, t), (r, t)]);
        }
        // nearest offsets first
        offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
        offsets.dedup();
        for (dx, dy) in offsets {
            let b = at(dx, dy);
            if free(&b) {
                return b;
            }
        }
    }
    first
}

fn fill_rect(img: &mut RgbImage, x: i64, y: i64, w: u32, h: u32, color: [u8; 3]) {
    for yy in y.max(0)..(y + h as i64).min(img.height() as i64) {
        for xx in x.max(0)..(x + w as i64).min(img.width() as i64) {
            img.put_pixel(xx as u32, yy as u32, Rgb(color));
        }
    }
}

fn draw_badge(img: &mut RgbImage, b: &BadgeBox, label: &str, style: &BadgeStyle) {
    fill_rect(img, b.x, b.y, b.width, b.height, style.outline);
    fill_rect(img, b.x + 1, b.y + 1, b.width - 2, b.height - 2, style.fill);
    let s = style.scale as i64;
    let mut cx = b.x + 1 + style.padding as i64;
    let cy = b.y + 1 + style.padding as i64;
    for ch in label.bytes() {
        let glyph = DIGITS[(ch - b'0') as usize];
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    fill_rect(
                        img,
                        cx + col * s,
                        cy + row as i64 * s,
                        style.scale,
                        style.scale,
                        style.text,
                    );
                }
            }
        }
        cx += 6 * s;
    }
}

/// Draws marks `1..=n` in candidate order at each candidate's representative
/// point, nudging a badge outward when it would cover an earlier one.
pub fn overlay_marks(
    image: &RgbImage,
    candidates: &[Candidate],
    style: &BadgeStyle,
) -> Result<MarkedImage, SomError> {
    if candidates.is_empty() {
        return Err(SomError::EmptyCandidates);
    }
    let mut out = image.clone();
    let mut id_map = BTreeMap::new();
    let mut badges: Vec<BadgeBox> = Vec::with_capacity(candidates.len());
    for (k, c) in candidates.iter().enumerate() {
        if c.mask.dims() != image.dimensions() {
            return Err(SomError::DimensionMismatch {
                expected: image.dimensions(),
                actual: c.mask.dims(),
            });
        }
        let mark = k as u32 + 1;
        let label = mark.to_string();
        let p = representative_point(&c.mask).map_err(|_| SomError::EmptyMask(c.id.clone()))?;
        let b = place(
            (p.x as i64, p.y as i64),
            style.badge_size(&label),
            image.dimensions(),
            &badges,
        );
        draw_badge(&mut out, &b, &label, style);
        badges.push(b);
        id_map.insert(mark, c.id.clone());
    }
    Ok(MarkedImage {
        image: out,
        id_map,
        badges,
    })
}
