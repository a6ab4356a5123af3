//! Conservative post-processing of candidate masks.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{Candidate, SomError};
use crate::bitmap::Bitmap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_area_px: usize,
    pub dedup_iou: f64,
    pub composite_coverage: f64,
    pub white_ratio: f64,
    pub white_channel_min: u8,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_area_px: 10,
            dedup_iou: 0.9,
            composite_coverage: 0.98,
            white_ratio: 0.95,
            white_channel_min: 245,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), SomError> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if self.min_area_px < 1 {
            return Err(SomError::InvalidConfig(
                "min_area_px must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("dedup_iou", self.dedup_iou),
            ("composite_coverage", self.composite_coverage),
            ("white_ratio", self.white_ratio),
        ] {
            if !unit(v) {
                return Err(SomError::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Area,
    Duplicate,
    Composite,
    White,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub id: String,
    pub reason: RemovalReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// Survivors in input order.
    pub kept: Vec<Candidate>,
    pub removed: Vec<Removal>,
}

/// Pixel bounds `(x0, y0, x1, y1)`, inclusive.
fn bounds(m: &Bitmap) -> Option<(u32, u32, u32, u32)> {
    m.foreground().fold(None, |acc, (x, y)| {
        Some(match acc {
            None => (x, y, x, y),
            Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
        })
    })
}

fn overlaps(a: (u32, u32, u32, u32), b: (u32, u32, u32, u32)) -> bool {
    a.0 <= b.2 && b.0 <= a.2 && a.1 <= b.3 && b.1 <= a.3
}

/// Applies, in order: area, duplicate, composite and near-white removal.
/// Surviving masks are returned untouched and in input order.
pub fn filter_candidates(
    candidates: &[Candidate],
    image: &RgbImage,
    cfg: &FilterConfig,
) -> Result<FilterOutcome, SomError> {
    cfg.validate()?;
    for c in candidates {
        if c.mask.dims() != image.dimensions() {
            return Err(SomError::DimensionMismatch {
                expected: image.dimensions(),
                actual: c.mask.dims(),
            });
        }
    }
    let mut removed = Vec::new();
    let mut drop = |c: &Candidate, reason| {
        removed.push(Removal {
            id: c.id.clone(),
            reason,
        })
    };

    let areas: Vec<usize> = candidates.iter().map(|c| c.mask.area()).collect();
    let mut alive: Vec<usize> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        if areas[i] < cfg.min_area_px {
            drop(c, RemovalReason::Area);
        } else {
            alive.push(i);
        }
    }

    // earlier candidates have priority
    let boxes: Vec<_> = candidates.iter().map(|c| bounds(&c.mask)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for &i in &alive {
        let dup = kept.iter().any(|&k| {
            let (Some(a), Some(b)) = (boxes[i], boxes[k]) else {
                return false;
            };
            if !overlaps(a, b) {
                return false;
            }
            let inter = candidates[i].mask.intersection_count(&candidates[k].mask);
            let union = areas[i] + areas[k] - inter;
            inter as f64 / union as f64 > cfg.dedup_iou
        });
        if dup {
            drop(&candidates[i], RemovalReason::Duplicate);
        } else {
            kept.push(i);
        }
    }

    // largest first; a mask is judged against the masks still standing
    let (w, h) = image.dimensions();
    let mut cover = vec![0u32; w as usize * h as usize];
    let idx = |x: u32, y: u32| y as usize * w as usize + x as usize;
    for &i in &kept {
        for (x, y) in candidates[i].mask.foreground() {
            cover[idx(x, y)] += 1;
        }
    }
    let mut by_area = kept.clone();
    by_area.sort_by_key(|&i| std::cmp::Reverse(areas[i]));
    let mut composite = vec![false; candidates.len()];
    for &i in &by_area {
        let covered = candidates[i]
            .mask
            .foreground()
            .filter(|&(x, y)| cover[idx(x, y)] > 1)
            .count();
        if covered as f64 / areas[i] as f64 >= cfg.composite_coverage {
            composite[i] = true;
            for (x, y) in candidates[i].mask.foreground() {
                cover[idx(x, y)] -= 1;
            }
        }
    }
    let mut survivors = Vec::new();
    for &i in &kept {
        if composite[i] {
            drop(&candidates[i], RemovalReason::Composite);
            continue;
        }
        let min = cfg.white_channel_min;
        let white = candidates[i]
            .mask
            .foreground()
            .filter(|&(x, y)| image.get_pixel(x, y).0.iter().all(|&v| v >= min))
            .count();
        if white as f64 / areas[i] as f64 > cfg.white_ratio {
            drop(&candidates[i], RemovalReason::White);
        } else {
            survivors.push(candidates[i].clone());
        }
    }
    Ok(FilterOutcome {
        kept: survivors,
        removed,
    })
}
