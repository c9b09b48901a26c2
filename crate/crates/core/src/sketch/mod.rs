//! Vector sketches: strokes of absolute points, the 5-D offset encoding and
//! the preprocessing/batching utilities built on top of them.

mod batch;
mod io;
mod preprocess;

pub use batch::{augment_scale, from_offsets, make_stroke_batches, to_offsets, StrokeBatch};
pub use io::{
    parse_annotated, parse_quickdraw, parse_sketches, read_sketches, sketch_to_json_line,
    write_sketches,
};
pub use preprocess::{
    arc_length, normalize_sketch, preprocess_sketch, rdp_simplify, remove_tiny_strokes,
    resample_stroke, PreprocessConfig,
};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Side of the normalized drawing canvas in pixels.
pub const CANVAS_SIZE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Pen state attached to each encoded point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenState {
    /// Pen touches the surface; the segment to this point is drawn.
    Down,
    /// Last point of a stroke; the pen is lifted after it.
    StrokeEnd,
    /// Drawing ended; used for padding.
    Ended,
}

impl PenState {
    pub const ALL: [PenState; 3] = [PenState::Down, PenState::StrokeEnd, PenState::Ended];

    pub fn index(self) -> usize {
        match self {
            PenState::Down => 0,
            PenState::StrokeEnd => 1,
            PenState::Ended => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<PenState> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.index()] = 1.0;
        v
    }
}

/// One pen sample as `(dx, dy, p1, p2, p3)`. The pen flags are stored as an
/// enum so the one-hot invariant cannot be broken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point5 {
    pub dx: f64,
    pub dy: f64,
    pub pen: PenState,
}

impl Point5 {
    pub fn new(dx: f64, dy: f64, pen: PenState) -> Self {
        Self { dx, dy, pen }
    }

    /// The `[0 0 0 0 1]` padding row.
    pub fn padding() -> Self {
        Self::new(0.0, 0.0, PenState::Ended)
    }

    /// The decoder start token `[0 0 1 0 0]`.
    pub fn start_token() -> Self {
        Self::new(0.0, 0.0, PenState::Down)
    }

    pub fn to_array(self) -> [f64; 5] {
        let p = self.pen.one_hot();
        [self.dx, self.dy, p[0], p[1], p[2]]
    }
}

/// Axis-aligned box used as the reference frame for rasterized features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point2,
    pub max: Point2,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min: Point2::new(min_x, min_y),
            max: Point2::new(max_x, max_y),
        }
    }

    /// The normalized `[0, 255]²` canvas.
    pub fn canvas() -> Self {
        Self::new(0.0, 0.0, CANVAS_SIZE, CANVAS_SIZE)
    }

    /// Tight box around `points`; `None` when empty.
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point2>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = BoundingBox {
            min: first,
            max: first,
        };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn extent(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn center(&self) -> Point2 {
        self.min.lerp(self.max, 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    points: Vec<Point2>,
    label: Option<String>,
}

impl Stroke {
    pub fn new(points: Vec<Point2>, label: Option<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate(format!(
                "stroke needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::NonFinite("stroke coordinate".into()));
        }
        Ok(Self { points, label })
    }

    pub fn unlabeled(points: Vec<Point2>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: Option<String>) -> Self {
        self.label = label;
        self
    }

    pub fn first(&self) -> Point2 {
        self.points[0]
    }

    pub fn last(&self) -> Point2 {
        self.points[self.points.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(&self.points).expect("stroke has points")
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Stroke {
        Stroke {
            points: self
                .points
                .iter()
                .map(|p| Point2::new(p.x + dx, p.y + dy))
                .collect(),
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    category: String,
    strokes: Vec<Stroke>,
}

impl Sketch {
    pub fn new(category: impl Into<String>, strokes: Vec<Stroke>) -> Result<Self> {
        if strokes.is_empty() {
            return Err(Error::Degenerate("sketch has no strokes".into()));
        }
        Ok(Self {
            category: category.into(),
            strokes,
        })
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    pub fn num_strokes(&self) -> usize {
        self.strokes.len()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point2> {
        self.strokes.iter().flat_map(|s| s.points.iter())
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(self.points()).expect("sketch has points")
    }

    /// Per-stroke labels, `None` if any stroke is unlabeled.
    pub fn labels(&self) -> Option<Vec<&str>> {
        self.strokes.iter().map(|s| s.label()).collect()
    }

    pub fn is_labeled(&self) -> bool {
        self.strokes.iter().all(|s| s.label.is_some())
    }

    pub fn into_strokes(self) -> Vec<Stroke> {
        self.strokes
    }
}

/// Closed component label set of an annotated category.
pub fn category_classes(category: &str) -> Option<&'static [&'static str]> {
    Some(match category {
        "airplane" => &["body", "tail", "window", "wing"],
        "cat" => &[
            "body", "ear", "eye", "head", "leg", "mouth", "nose", "tail", "whisker",
        ],
        "chair" => &["back", "leg", "seat"],
        "firetruck" => &[
            "body",
            "cab",
            "ladder",
            "light",
            "water hose",
            "window",
            "wheel",
        ],
        "flower" => &["core", "leaves", "petals", "stem"],
        _ => return None,
    })
}
