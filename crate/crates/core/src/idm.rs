//! Image deformation model (IDM) appearance features.
//!
//! A polyline is rasterized into five 12×12 maps: four orientation maps at
//! 0°, 45°, 90° and 135° and one endpoint map. Orientation responses fall off
//! linearly from 1 at perfect alignment to 0 at 45° of difference. Samples are
//! splatted with bilinear weights and each cell keeps the maximum.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sketch::{BoundingBox, Point2, Sketch, Stroke, CANVAS_SIZE};

pub const GRID: usize = 12;
pub const NUM_MAPS: usize = 5;
pub const IDM_LEN: usize = NUM_MAPS * GRID * GRID;
pub const SPATIAL_LEN: usize = 6;
pub const REFERENCE_ANGLES: [f64; 4] = [0.0, 45.0, 90.0, 135.0];

/// Step between interpolated samples, in grid cells.
const SAMPLE_STEP: f64 = 0.1;
/// Half the arc-length window of the tangent estimate, in grid cells.
const TANGENT_HALF_WINDOW: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdmFeature {
    values: Vec<f64>,
}

impl IdmFeature {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Cell `(row, col)` of map `k` (0..4 orientations, 4 endpoints).
    pub fn cell(&self, k: usize, row: usize, col: usize) -> f64 {
        self.values[k * GRID * GRID + row * GRID + col]
    }

    /// Elementwise maximum, used to merge per-stroke maps into a symbol map.
    fn merge(&mut self, other: &IdmFeature) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = a.max(b);
        }
    }
}

/// Angular difference between two undirected orientations, in [0, 90].
fn orientation_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Linear orientation response in [0, 1].
pub fn orientation_response(theta_deg: f64, reference_deg: f64) -> f64 {
    (1.0 - orientation_diff(theta_deg, reference_deg) / 45.0).max(0.0)
}

/// Square frame around `bbox` mapping to grid coordinates in [0, GRID-1].
struct Frame {
    center: Point2,
    side: f64,
}

impl Frame {
    fn new(bbox: &BoundingBox) -> Self {
        let side = bbox.extent();
        let side = if side > 0.0 && side.is_finite() { side } else { 1.0 };
        Frame { center: bbox.center(), side }
    }

    fn to_grid(&self, p: Point2) -> (f64, f64) {
        let span = (GRID - 1) as f64;
        let half = span / 2.0;
        let gx = (p.x - self.center.x) / self.side * span + half;
        let gy = (p.y - self.center.y) / self.side * span + half;
        (gx.clamp(0.0, span), gy.clamp(0.0, span))
    }
}

fn splat(map: &mut [f64], gx: f64, gy: f64, value: f64) {
    let (c0, r0) = (gx.floor() as usize, gy.floor() as usize);
    let (fx, fy) = (gx - c0 as f64, gy - r0 as f64);
    for (r, wy) in [(r0, 1.0 - fy), (r0 + 1, fy)] {
        for (c, wx) in [(c0, 1.0 - fx), (c0 + 1, fx)] {
            let w = wx * wy;
            if r < GRID && c < GRID && w > 0.0 {
                let cell = &mut map[r * GRID + c];
                *cell = cell.max(w * value);
            }
        }
    }
}

fn splat_orientation(values: &mut [f64], gx: f64, gy: f64, dx: f64, dy: f64) {
    if dx == 0.0 && dy == 0.0 {
        return;
    }
    let theta = dy.atan2(dx).to_degrees();
    for (k, &a) in REFERENCE_ANGLES.iter().enumerate() {
        let r = orientation_response(theta, a);
        if r > 0.0 {
            splat(&mut values[k * GRID * GRID..(k + 1) * GRID * GRID], gx, gy, r);
        }
    }
}

/// Densified copy of `g` with steps of at most `SAMPLE_STEP`, and the
/// cumulative arc length at every sample.
fn densify(g: &[(f64, f64)]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut pts = vec![g[0]];
    let mut cum = vec![0.0];
    for w in g.windows(2) {
        let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let len = dx.hypot(dy);
        let steps = ((len / SAMPLE_STEP).ceil() as usize).max(1);
        let base = *cum.last().unwrap();
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            pts.push((w[0].0 + t * dx, w[0].1 + t * dy));
            cum.push(base + t * len);
        }
    }
    (pts, cum)
}

/// Point at arc length `s` along the densified path.
fn point_at(pts: &[(f64, f64)], cum: &[f64], s: f64) -> (f64, f64) {
    let j = cum.partition_point(|&c| c < s).clamp(1, pts.len() - 1);
    let span = cum[j] - cum[j - 1];
    let t = if span > 0.0 { ((s - cum[j - 1]) / span).clamp(0.0, 1.0) } else { 1.0 };
    let (a, b) = (pts[j - 1], pts[j]);
    (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
}

fn idm_in_frame(points: &[Point2], frame: &Frame) -> Result<IdmFeature> {
    if points.len() < 2 {
        return Err(Error::invalid(format!("IDM needs at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::NonFinite("IDM input point".into()));
    }
    let g: Vec<(f64, f64)> = points.iter().map(|&p| frame.to_grid(p)).collect();
    let mut values = vec![0.0; IDM_LEN];

    // Tangents are central differences over a fixed arc-length window, which
    // become one-sided within half a window of either end. Fixing the window
    // in path length rather than in samples keeps the maps independent of
    // how densely the stroke was sampled.
    let (pts, cum) = densify(&g);
    let total = *cum.last().unwrap();
    if total > 0.0 {
        for (&p, &s) in pts.iter().zip(&cum) {
            let a = point_at(&pts, &cum, (s - TANGENT_HALF_WINDOW).max(0.0));
            let b = point_at(&pts, &cum, (s + TANGENT_HALF_WINDOW).min(total));
            splat_orientation(&mut values, p.0, p.1, b.0 - a.0, b.1 - a.1);
        }
    }
    let ends = &mut values[4 * GRID * GRID..];
    for (gx, gy) in [g[0], g[g.len() - 1]] {
        ends[gy.round() as usize * GRID + gx.round() as usize] = 1.0;
    }
    Ok(IdmFeature { values })
}

/// IDM of a polyline inside `canvas`. The canvas is expanded to a centered
/// square so both axes share one scale.
pub fn compute_idm(points: &[Point2], canvas: &BoundingBox) -> Result<IdmFeature> {
    idm_in_frame(points, &Frame::new(canvas))
}

/// IDM of a single stroke in its own bounding box.
pub fn stroke_idm(st: &Stroke) -> Result<IdmFeature> {
    compute_idm(st.points(), &st.bounding_box())
}

/// IDM of a whole symbol: every stroke drawn into the symbol's bounding box,
/// maps merged by maximum.
pub fn symbol_idm(symbol: &Sketch) -> Result<IdmFeature> {
    let frame = Frame::new(&symbol.bounding_box());
    let mut acc = IdmFeature { values: vec![0.0; IDM_LEN] };
    for st in symbol.strokes() {
        acc.merge(&idm_in_frame(st.points(), &frame)?);
    }
    Ok(acc)
}

/// First point, last point and centroid, normalized by `canvas`.
pub fn spatial_features(st: &Stroke, canvas: &BoundingBox) -> [f64; SPATIAL_LEN] {
    let (w, h) = (canvas.width().max(f64::MIN_POSITIVE), canvas.height().max(f64::MIN_POSITIVE));
    let nx = |x: f64| (x - canvas.min.x) / w;
    let ny = |y: f64| (y - canvas.min.y) / h;
    let n = st.len() as f64;
    let cx = st.points().iter().map(|p| p.x).sum::<f64>() / n;
    let cy = st.points().iter().map(|p| p.y).sum::<f64>() / n;
    let (a, b) = (st.first(), st.last());
    [nx(a.x), ny(a.y), nx(b.x), ny(b.y), nx(cx), ny(cy)]
}

/// Feature family used as segmentation input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Encoder hidden state of the stroke autoencoder.
    Nn,
    Idm,
    IdmSpt,
    IdmSptCon,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] =
        [FeatureKind::Nn, FeatureKind::Idm, FeatureKind::IdmSpt, FeatureKind::IdmSptCon];

    /// Length of the hand-crafted variants; `None` for the learned feature.
    pub fn fixed_len(self) -> Option<usize> {
        match self {
            FeatureKind::Nn => None,
            FeatureKind::Idm => Some(IDM_LEN),
            FeatureKind::IdmSpt => Some(IDM_LEN + SPATIAL_LEN),
            FeatureKind::IdmSptCon => Some(2 * IDM_LEN + SPATIAL_LEN),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Nn => "nn",
            FeatureKind::Idm => "idm",
            FeatureKind::IdmSpt => "idm-spt",
            FeatureKind::IdmSptCon => "idm-spt-con",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegFeature {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

/// IDM + spatial feature of one stroke.
pub fn idm_spt_feature(st: &Stroke, canvas: &BoundingBox) -> Result<SegFeature> {
    let mut values = stroke_idm(st)?.into_values();
    values.extend(spatial_features(st, canvas));
    Ok(SegFeature { kind: FeatureKind::IdmSpt, values })
}

/// `[stroke IDM; symbol IDM; spatial]` for one stroke of `symbol`.
pub fn context_feature(symbol: &Sketch, st: &Stroke, canvas: &BoundingBox) -> Result<SegFeature> {
    context_feature_with(&symbol_idm(symbol)?, st, canvas)
}

/// Like [`context_feature`] with a precomputed symbol IDM.
pub fn context_feature_with(
    symbol: &IdmFeature,
    st: &Stroke,
    canvas: &BoundingBox,
) -> Result<SegFeature> {
    let mut values = stroke_idm(st)?.into_values();
    values.extend_from_slice(symbol.values());
    values.extend(spatial_features(st, canvas));
    Ok(SegFeature { kind: FeatureKind::IdmSptCon, values })
}

/// Hand-crafted features for every stroke of `symbol` on the standard canvas.
pub fn sketch_features(symbol: &Sketch, kind: FeatureKind) -> Result<Vec<SegFeature>> {
    let canvas = BoundingBox::new(0.0, 0.0, CANVAS_SIZE, CANVAS_SIZE);
    match kind {
        FeatureKind::Nn => Err(Error::invalid("the nn feature needs an encoder")),
        FeatureKind::Idm => symbol
            .strokes()
            .iter()
            .map(|st| Ok(SegFeature { kind, values: stroke_idm(st)?.into_values() }))
            .collect(),
        FeatureKind::IdmSpt => symbol.strokes().iter().map(|st| idm_spt_feature(st, &canvas)).collect(),
        FeatureKind::IdmSptCon => {
            let sym = symbol_idm(symbol)?;
            symbol.strokes().iter().map(|st| context_feature_with(&sym, st, &canvas)).collect()
        }
    }
}
