//! Geometric preprocessing: canvas normalization, arc-length resampling,
//! Ramer-Douglas-Peucker simplification and tiny-stroke removal.

use super::{Point2, Sketch, Stroke, CANVAS_SIZE};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Resampling distance in pixels.
    pub spacing: f64,
    /// RDP tolerance in pixels.
    pub epsilon: f64,
    /// Strokes shorter than this (arc length, pixels) are removed.
    pub min_length: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            epsilon: 2.0,
            min_length: 15.0,
        }
    }
}

pub fn arc_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Uniformly scales and translates the sketch so that its bounding box starts
/// at 0 on both axes and its larger side spans `[0, 255]`.
pub fn normalize_sketch(s: &Sketch) -> Result<Sketch> {
    let bb = s.bounding_box();
    let extent = bb.extent();
    if !(extent > 0.0) {
        return Err(Error::Degenerate("all sketch points coincide".into()));
    }
    let scale = CANVAS_SIZE / extent;
    let strokes = s
        .strokes()
        .iter()
        .map(|st| {
            let pts = st
                .points()
                .iter()
                .map(|p| Point2::new((p.x - bb.min.x) * scale, (p.y - bb.min.y) * scale))
                .collect();
            Stroke::new(pts, st.label().map(str::to_string))
        })
        .collect::<Result<Vec<_>>>()?;
    Sketch::new(s.category(), strokes)
}

/// Places points every `spacing` pixels of arc length along the polyline.
/// The original first and last points are always kept, so the final interval
/// may be shorter than `spacing`.
pub fn resample_stroke(st: &Stroke, spacing: f64) -> Result<Stroke> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid(format!("spacing must be > 0, got {spacing}")));
    }
    let pts = st.points();
    let total = arc_length(pts);
    let tol = 1e-9 * total.max(1.0);
    let mut out = vec![pts[0]];
    let mut k = 1usize;
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let len = w[0].dist(w[1]);
        if len == 0.0 {
            continue;
        }
        loop {
            let target = k as f64 * spacing;
            if target > acc + len || target >= total - tol {
                break;
            }
            out.push(w[0].lerp(w[1], (target - acc) / len));
            k += 1;
        }
        acc += len;
    }
    out.push(st.last());
    Stroke::new(out, st.label().map(str::to_string))
}

/// Squared distance from `p` to the closed segment `a`-`b`. Interior
/// projections use `cross² / |ab|²` so that equal distances on integer
/// coordinates compare equal.
fn segment_distance_sq(p: Point2, a: Point2, b: Point2) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let (wx, wy) = (p.x - a.x, p.y - a.y);
    let len2 = vx * vx + vy * vy;
    let dot = wx * vx + wy * vy;
    if len2 == 0.0 || dot <= 0.0 {
        wx * wx + wy * wy
    } else if dot >= len2 {
        let (ux, uy) = (p.x - b.x, p.y - b.y);
        ux * ux + uy * uy
    } else {
        let cross = vx * wy - vy * wx;
        cross * cross / len2
    }
}

fn rdp_mark(pts: &[Point2], lo: usize, hi: usize, eps_sq: f64, keep: &mut [bool]) {
    // explicit stack; keeps recursion depth bounded on long strokes
    let mut stack = vec![(lo, hi)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let mut best = (lo, -1.0);
        for i in lo + 1..hi {
            let d = segment_distance_sq(pts[i], pts[lo], pts[hi]);
            if d > best.1 {
                best = (i, d);
            }
        }
        if best.1 > eps_sq {
            keep[best.0] = true;
            stack.push((best.0, hi));
            stack.push((lo, best.0));
        }
    }
}

/// Ramer-Douglas-Peucker simplification. Interior points farther than
/// `epsilon` from the chord of their interval split it (first maximum wins on
/// ties); the output is a subsequence of the input with both endpoints.
pub fn rdp_simplify(st: &Stroke, epsilon: f64) -> Result<Stroke> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let pts = st.points();
    let n = pts.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    rdp_mark(pts, 0, n - 1, epsilon * epsilon, &mut keep);
    let out = pts
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect();
    Stroke::new(out, st.label().map(str::to_string))
}

/// Drops strokes whose arc length is below `min_length`, preserving order.
pub fn remove_tiny_strokes(s: &Sketch, min_length: f64) -> Result<Sketch> {
    if !(min_length >= 0.0) {
        return Err(Error::invalid(format!(
            "min_length must be >= 0, got {min_length}"
        )));
    }
    let kept: Vec<Stroke> = s
        .strokes()
        .iter()
        .filter(|st| arc_length(st.points()) >= min_length)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::Degenerate(format!(
            "every stroke is shorter than {min_length} px"
        )));
    }
    Sketch::new(s.category(), kept)
}

/// normalize → resample → simplify → remove tiny strokes.
pub fn preprocess_sketch(s: &Sketch, cfg: &PreprocessConfig) -> Result<Sketch> {
    let s = normalize_sketch(s)?;
    let strokes = s
        .strokes()
        .iter()
        .map(|st| rdp_simplify(&resample_stroke(st, cfg.spacing)?, cfg.epsilon))
        .collect::<Result<Vec<_>>>()?;
    remove_tiny_strokes(&Sketch::new(s.category(), strokes)?, cfg.min_length)
}
