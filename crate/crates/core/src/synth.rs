//! Procedural labeled sketches for smoke runs and desk-scale experiments.
//!
//! Chairs are drawn as back, seat and legs in varied styles. Backs and legs
//! are often both near-vertical strokes, so their shape alone is ambiguous
//! and only their position within the drawing tells them apart. Flowers are
//! drawn as core, petals, stem and leaves.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::sketch::{Point2, Sketch, Stroke};
use crate::{Error, Result};

pub const SYNTH_CATEGORIES: [&str; 2] = ["chair", "flower"];

/// Hand tremor, in pixels.
const JITTER: f64 = 0.8;

fn jitter<R: Rng + ?Sized>(p: Point2, rng: &mut R) -> Point2 {
    let n = Normal::new(0.0, JITTER).expect("valid sigma");
    Point2::new(p.x + n.sample(rng), p.y + n.sample(rng))
}

/// Polyline through `corners` with intermediate points every ~6 px.
fn path<R: Rng + ?Sized>(corners: &[Point2], rng: &mut R) -> Vec<Point2> {
    let mut out = vec![jitter(corners[0], rng)];
    for w in corners.windows(2) {
        let n = ((w[0].dist(w[1]) / 6.0).ceil() as usize).max(1);
        for k in 1..=n {
            out.push(jitter(w[0].lerp(w[1], k as f64 / n as f64), rng));
        }
    }
    out
}

fn ellipse<R: Rng + ?Sized>(c: Point2, rx: f64, ry: f64, start: f64, rng: &mut R) -> Vec<Point2> {
    let n = ((rx.max(ry) * 1.2).ceil() as usize).clamp(8, 48);
    let corners: Vec<Point2> = (0..=n)
        .map(|k| {
            let a = start + std::f64::consts::TAU * k as f64 / n as f64;
            Point2::new(c.x + rx * a.cos(), c.y + ry * a.sin())
        })
        .collect();
    path(&corners, rng)
}

fn labeled(points: Vec<Point2>, label: &str) -> Result<Stroke> {
    Stroke::new(points, Some(label.to_string()))
}

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn chair<R: Rng + ?Sized>(rng: &mut R) -> Result<Sketch> {
    let cx = 128.0 + rng.random_range(-20.0..20.0);
    let half = rng.random_range(35.0..65.0);
    let (x0, x1) = (cx - half, cx + half);
    let seat_y = rng.random_range(115.0..150.0);
    let depth = rng.random_range(8.0..25.0);
    let back_top = seat_y - rng.random_range(60.0..100.0);
    let leg_bottom = seat_y + rng.random_range(55.0..95.0);
    let slant = rng.random_range(-12.0..12.0);

    let mut back = Vec::new();
    match rng.random_range(0..4) {
        // two posts
        0 => {
            back.push(path(&[p(x0, seat_y), p(x0 + slant, back_top)], rng));
            back.push(path(&[p(x1, seat_y), p(x1 + slant, back_top)], rng));
        }
        // inverted U
        1 => back.push(path(
            &[p(x0, seat_y), p(x0 + slant, back_top), p(x1 + slant, back_top), p(x1, seat_y)],
            rng,
        )),
        // single post on one side, seen from the side
        2 => {
            let x = if rng.random_bool(0.5) { x0 } else { x1 };
            back.push(path(&[p(x, seat_y), p(x + slant, back_top)], rng));
        }
        // posts plus a top rail
        _ => {
            back.push(path(&[p(x0, seat_y), p(x0 + slant, back_top)], rng));
            back.push(path(&[p(x1, seat_y), p(x1 + slant, back_top)], rng));
            back.push(path(&[p(x0 + slant, back_top), p(x1 + slant, back_top)], rng));
        }
    }

    let seat = if rng.random_bool(0.5) {
        path(&[p(x0, seat_y), p(x1, seat_y)], rng)
    } else {
        path(
            &[p(x0, seat_y), p(x1, seat_y), p(x1 + depth, seat_y - depth), p(x0 + depth, seat_y - depth), p(x0, seat_y)],
            rng,
        )
    };

    let mut legs = Vec::new();
    let splay = rng.random_range(0.0..12.0);
    match rng.random_range(0..3) {
        0 => {
            for (x, s) in [(x0, -splay), (x1, splay)] {
                legs.push(path(&[p(x, seat_y), p(x + s, leg_bottom)], rng));
            }
        }
        1 => {
            for (x, s) in [(x0, -splay), (x1, splay), (x0 + depth, 0.0), (x1 + depth, 0.0)] {
                let bottom = if s == 0.0 { leg_bottom - depth } else { leg_bottom };
                legs.push(path(&[p(x, seat_y), p(x + s, bottom)], rng));
            }
        }
        _ => legs.push(path(
            &[p(x0 - splay, leg_bottom), p(x0, seat_y), p(x1, seat_y), p(x1 + splay, leg_bottom)],
            rng,
        )),
    }

    let mut strokes: Vec<Stroke> = Vec::new();
    let mut groups = vec![("back", back), ("seat", vec![seat]), ("leg", legs)];
    if rng.random_bool(0.3) {
        groups.shuffle(rng);
    }
    for (label, group) in groups {
        for pts in group {
            strokes.push(labeled(pts, label)?);
        }
    }
    Sketch::new("chair", strokes)
}

fn flower<R: Rng + ?Sized>(rng: &mut R) -> Result<Sketch> {
    let c = p(128.0 + rng.random_range(-15.0..15.0), rng.random_range(60.0..95.0));
    let r = rng.random_range(10.0..18.0);
    let mut strokes = vec![labeled(ellipse(c, r, r, rng.random_range(0.0..6.0), rng), "core")?];

    let n_petals = rng.random_range(4..8);
    let petal_len = rng.random_range(16.0..28.0);
    let phase = rng.random_range(0.0..1.0);
    for k in 0..n_petals {
        let a = std::f64::consts::TAU * (k as f64 + phase) / n_petals as f64;
        let (ca, sa) = (a.cos(), a.sin());
        let base = |d: f64, w: f64| p(c.x + ca * d - sa * w, c.y + sa * d + ca * w);
        let d0 = r + 1.0;
        let w = petal_len * 0.35;
        let petal = [base(d0, -w * 0.4), base(d0 + petal_len * 0.5, -w), base(d0 + petal_len, 0.0), base(d0 + petal_len * 0.5, w), base(d0, w * 0.4)];
        strokes.push(labeled(path(&petal, rng), "petals")?);
    }

    let bottom = rng.random_range(220.0..250.0);
    let bend = rng.random_range(-15.0..15.0);
    let top = p(c.x, c.y + r + petal_len * 0.6);
    let stem = [top, p(c.x + bend, (top.y + bottom) / 2.0), p(c.x, bottom)];
    strokes.push(labeled(path(&stem, rng), "stem")?);

    for side in [-1.0, 1.0] {
        if rng.random_bool(0.75) {
            let y = rng.random_range(top.y + 30.0..bottom - 20.0);
            let len = rng.random_range(18.0..32.0);
            let leaf = [p(c.x, y), p(c.x + side * len * 0.5, y - 12.0), p(c.x + side * len, y - 4.0), p(c.x + side * len * 0.5, y + 2.0), p(c.x, y)];
            strokes.push(labeled(path(&leaf, rng), "leaves")?);
        }
    }
    Sketch::new("flower", strokes)
}

/// One labeled sketch of `category` (see [`SYNTH_CATEGORIES`]).
pub fn synth_sketch<R: Rng + ?Sized>(category: &str, rng: &mut R) -> Result<Sketch> {
    match category {
        "chair" => chair(rng),
        "flower" => flower(rng),
        _ => Err(Error::invalid(format!(
            "no generator for category {category:?}; available: {}",
            SYNTH_CATEGORIES.join(", ")
        ))),
    }
}

/// `n` sketches from a generator seeded with `seed`.
pub fn synth_corpus(category: &str, n: usize, seed: u64) -> Result<Vec<Sketch>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| synth_sketch(category, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::category_classes;

    #[test]
    fn labels_come_from_the_closed_sets() {
        for cat in SYNTH_CATEGORIES {
            let classes = category_classes(cat).unwrap();
            for s in synth_corpus(cat, 50, 1).unwrap() {
                let labels = s.labels().unwrap();
                assert!(labels.iter().all(|l| classes.contains(l)));
                assert!(s.points().all(|q| (-5.0..=260.0).contains(&q.x) && (-5.0..=260.0).contains(&q.y)));
            }
        }
    }

    #[test]
    fn every_chair_class_appears() {
        let corpus = synth_corpus("chair", 20, 2).unwrap();
        for c in ["back", "seat", "leg"] {
            assert!(corpus.iter().any(|s| s.labels().unwrap().contains(&c)));
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(synth_corpus("flower", 3, 7).unwrap(), synth_corpus("flower", 3, 7).unwrap());
        assert_ne!(synth_corpus("flower", 3, 7).unwrap(), synth_corpus("flower", 3, 8).unwrap());
        assert!(synth_corpus("dog", 1, 0).is_err());
    }
}
