//! Uncompressed COCO-convention run-length encoding: column-major pixel
//! order, alternating runs starting with background.

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;

use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    /// Foreground pixel count, without decoding.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }
}

pub fn encode_rle(mask: &Bitmap) -> RleMask {
    let (w, h) = mask.dims();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for x in 0..w {
        for y in 0..h {
            let v = mask.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        size: [h, w],
        counts,
    }
}

pub fn decode_rle(rle: &RleMask) -> Result<Bitmap, DatasetError> {
    let (h, w) = (rle.height(), rle.width());
    let total = h as u64 * w as u64;
    let sum: u64 = rle.counts.iter().sum();
    if sum != total {
        return Err(DatasetError::LengthMismatch {
            expected: total,
            actual: sum,
        });
    }
    let mut out = Bitmap::new(w, h);
    let mut pos = 0u64;
    for (k, &run) in rle.counts.iter().enumerate() {
        if k % 2 == 1 {
            for p in pos..pos + run {
                let (x, y) = ((p / h as u64) as u32, (p % h as u64) as u32);
                out.set(x, y, true);
            }
        }
        pos += run;
    }
    Ok(out)
}

/// Bitmaps travel as [`RleMask`]s in every serialized format.
impl Serialize for Bitmap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        encode_rle(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bitmap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rle = RleMask::deserialize(d)?;
        decode_rle(&rle).map_err(serde::de::Error::custom)
    }
}
