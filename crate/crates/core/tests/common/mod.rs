#![allow(dead_code)]

use std::path::PathBuf;

use chartforge::tracer::execute_script;
use chartforge::{Bitmap, RunConfig, TracedScene};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(rel)
}

pub fn trace(rel: &str) -> TracedScene {
    trace_with(rel, &RunConfig::default())
}

pub fn trace_with(rel: &str, cfg: &RunConfig) -> TracedScene {
    let text = std::fs::read_to_string(fixture(rel)).unwrap();
    execute_script(&text, cfg).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn rect(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Bitmap {
    Bitmap::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
}

/// Pixels of `m` with some pixel within Chebyshev distance `d` that is
/// background or off-image.
pub fn band_by_neighbourhood(m: &Bitmap, d: u32) -> Vec<bool> {
    let (w, h) = m.dims();
    let d = d as i64;
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let inside = m.get(x as u32, y as u32);
            let mut near_outside = false;
            'scan: for dy in -d..=d {
                for dx in -d..=d {
                    let (qx, qy) = (x + dx, y + dy);
                    if qx < 0
                        || qy < 0
                        || qx >= w as i64
                        || qy >= h as i64
                        || !m.get(qx as u32, qy as u32)
                    {
                        near_outside = true;
                        break 'scan;
                    }
                }
            }
            out.push(inside && near_outside);
        }
    }
    out
}

pub fn set_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn boundary_iou_oracle(a: &Bitmap, b: &Bitmap, radii: &[u32]) -> f64 {
    radii
        .iter()
        .map(|&d| set_iou(&band_by_neighbourhood(a, d), &band_by_neighbourhood(b, d)))
        .sum::<f64>()
        / radii.len() as f64
}

/// Largest matching size and, among those, the best total, by trying every
/// injective assignment of rows to columns (or to nothing).
pub fn brute_force_matching(scores: &[Vec<f64>], eligible: &[Vec<bool>]) -> (usize, f64) {
    fn go(
        i: usize,
        used: &mut Vec<bool>,
        scores: &[Vec<f64>],
        eligible: &[Vec<bool>],
        count: usize,
        total: f64,
        best: &mut (usize, f64),
    ) {
        if i == scores.len() {
            if count > best.0 || (count == best.0 && total > best.1) {
                *best = (count, total);
            }
            return;
        }
        go(i + 1, used, scores, eligible, count, total, best);
        for j in 0..used.len() {
            if eligible[i][j] && !used[j] {
                used[j] = true;
                go(
                    i + 1,
                    used,
                    scores,
                    eligible,
                    count + 1,
                    total + scores[i][j],
                    best,
                );
                used[j] = false;
            }
        }
    }
    let m = scores.first().map_or(0, Vec::len);
    let mut best = (0, 0.0);
    go(0, &mut vec![false; m], scores, eligible, 0, 0.0, &mut best);
    best
}
