//! Offset encoding and temporal-order stroke batching.

use super::{PenState, Point2, Point5, Sketch, Stroke};
use crate::{Error, Result};
use rand::Rng;

/// Encodes a stroke as offsets. The first offset is taken from `origin`, the
/// rest are within-stroke differences; the final point carries the
/// stroke-end pen state.
pub fn to_offsets(st: &Stroke, origin: Point2) -> Vec<Point5> {
    let pts = st.points();
    let mut prev = origin;
    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let pen = if i + 1 == pts.len() {
                PenState::StrokeEnd
            } else {
                PenState::Down
            };
            let o = Point5::new(p.x - prev.x, p.y - prev.y, pen);
            prev = *p;
            o
        })
        .collect()
}

/// Inverse of [`to_offsets`]: cumulative sum from `origin`. Rows in the
/// `Ended` state are padding and are skipped.
pub fn from_offsets(offsets: &[Point5], origin: Point2) -> Vec<Point2> {
    let mut cur = origin;
    offsets
        .iter()
        .filter(|o| o.pen != PenState::Ended)
        .map(|o| {
            cur = Point2::new(cur.x + o.dx, cur.y + o.dy);
            cur
        })
        .collect()
}

/// Strokes with the same temporal index across a group of sketches, padded
/// to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeBatch {
    pub sequences: Vec<Vec<Point5>>,
    /// `true` for real points, `false` for padding.
    pub mask: Vec<Vec<bool>>,
    /// Zero-based stroke ordinal held by this batch.
    pub temporal_index: usize,
}

impl StrokeBatch {
    pub fn rows(&self) -> usize {
        self.sequences.len()
    }

    /// Padded sequence length.
    pub fn seq_len(&self) -> usize {
        self.sequences.first().map_or(0, Vec::len)
    }

    /// Number of real points in row `i`.
    pub fn real_len(&self, i: usize) -> usize {
        self.mask[i].iter().filter(|&&m| m).count()
    }

    pub fn is_padding_row(&self, i: usize) -> bool {
        self.real_len(i) == 0
    }
}

/// Splits `sketches` into consecutive groups of `batch_size` and, for each
/// group, emits one batch per stroke ordinal: batch k holds every sketch's
/// k-th stroke, or a pure-padding row when the sketch has fewer strokes.
pub fn make_stroke_batches(sketches: &[Sketch], batch_size: usize) -> Result<Vec<StrokeBatch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    let mut out = Vec::new();
    for group in sketches.chunks(batch_size) {
        let depth = group.iter().map(Sketch::num_strokes).max().unwrap_or(0);
        for k in 0..depth {
            let rows: Vec<Vec<Point5>> = group
                .iter()
                .map(|s| {
                    s.strokes()
                        .get(k)
                        .map(|st| to_offsets(st, Point2::ORIGIN))
                        .unwrap_or_default()
                })
                .collect();
            let len = rows.iter().map(Vec::len).max().unwrap_or(0);
            let mask = rows
                .iter()
                .map(|r| (0..len).map(|t| t < r.len()).collect())
                .collect();
            let sequences = rows
                .into_iter()
                .map(|mut r| {
                    r.resize(len, Point5::padding());
                    r
                })
                .collect();
            out.push(StrokeBatch {
                sequences,
                mask,
                temporal_index: k,
            });
        }
    }
    Ok(out)
}

/// Scales the displacements of one sequence by random factors drawn from
/// U(0.9, 1.1), one for x and one for y. Pen states are left untouched.
pub fn augment_scale<R: Rng + ?Sized>(points: &[Point5], rng: &mut R) -> Vec<Point5> {
    let sx = rng.random_range(0.9..1.1);
    let sy = rng.random_range(0.9..1.1);
    points
        .iter()
        .map(|p| Point5::new(p.dx * sx, p.dy * sy, p.pen))
        .collect()
}
