//! Line-delimited JSON readers and writers.
//!
//! Two record shapes are accepted:
//!
//! * the public simplified-drawing format, `{"word": .., "drawing": [[xs, ys], ..]}`
//!   (a third per-stroke timing array, if present, is ignored);
//! * the canonical format written by this crate,
//!   `{"category": .., "strokes": [[xs, ys], ..], "labels": [..]}` where
//!   `labels` is optional and holds one component name per stroke.

use super::{category_classes, Point2, Sketch, Stroke};
use crate::{Error, Result};
use serde_json::{json, Value};
use std::io::{BufRead, Write};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn number_array(v: &Value, line: usize, what: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(line, format!("{what} is not an array")))?;
    arr.iter()
        .map(|n| {
            n.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(line, format!("{what} holds a non-numeric value")))
        })
        .collect()
}

/// Parses `[[xs, ys(, ts)], ...]` into point lists. Coordinate arrays of
/// unequal length are rejected.
fn parse_stroke_arrays(v: &Value, line: usize) -> Result<Vec<Vec<Point2>>> {
    let strokes = v
        .as_array()
        .ok_or_else(|| parse_err(line, "strokes are not an array"))?;
    strokes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let parts = s
                .as_array()
                .filter(|p| p.len() >= 2)
                .ok_or_else(|| parse_err(line, format!("stroke {i} is not [xs, ys]")))?;
            let xs = number_array(&parts[0], line, "x array")?;
            let ys = number_array(&parts[1], line, "y array")?;
            if xs.len() != ys.len() {
                return Err(parse_err(
                    line,
                    format!(
                        "stroke {i}: x array has {} values, y array has {}",
                        xs.len(),
                        ys.len()
                    ),
                ));
            }
            Ok(xs.into_iter().zip(ys).map(|(x, y)| Point2::new(x, y)).collect())
        })
        .collect()
}

struct RawRecord {
    line: usize,
    category: String,
    strokes: Vec<Vec<Point2>>,
    labels: Option<Vec<String>>,
}

fn parse_record(text: &str, line: usize) -> Result<RawRecord> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| parse_err(line, format!("invalid JSON: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| parse_err(line, "record is not an object"))?;
    let category = obj
        .get("category")
        .or_else(|| obj.get("word"))
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err(line, "missing category/word"))?
        .to_string();
    let strokes_v = obj
        .get("strokes")
        .or_else(|| obj.get("drawing"))
        .ok_or_else(|| parse_err(line, "missing strokes/drawing"))?;
    let strokes = parse_stroke_arrays(strokes_v, line)?;
    let labels = match obj.get("labels") {
        None | Some(Value::Null) => None,
        Some(Value::Array(ls)) => Some(
            ls.iter()
                .map(|l| {
                    l.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| parse_err(line, "label is not a string"))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        Some(_) => return Err(parse_err(line, "labels is not an array")),
    };
    Ok(RawRecord {
        line,
        category,
        strokes,
        labels,
    })
}

fn records(reader: impl BufRead) -> impl Iterator<Item = Result<RawRecord>> {
    reader.lines().enumerate().filter_map(|(i, l)| {
        let line = i + 1;
        match l {
            Err(e) => Some(Err(Error::Io(e))),
            Ok(t) if t.trim().is_empty() => None,
            Ok(t) => Some(parse_record(&t, line)),
        }
    })
}

/// Reads drawings in the simplified-drawing format. Single-point strokes are
/// dropped; a record left without strokes is an error.
pub fn parse_quickdraw(reader: impl BufRead) -> Result<Vec<Sketch>> {
    records(reader)
        .map(|r| {
            let r = r?;
            let strokes = r
                .strokes
                .into_iter()
                .filter(|p| p.len() >= 2)
                .map(Stroke::unlabeled)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| parse_err(r.line, e.to_string()))?;
            Sketch::new(r.category, strokes).map_err(|e| parse_err(r.line, e.to_string()))
        })
        .collect()
}

fn build_labeled(r: RawRecord, index: usize, strict: bool) -> Result<Sketch> {
    let ann = |msg: String| Error::Annotation { index, msg };
    if r.strokes.is_empty() {
        return Err(ann("record has no strokes".into()));
    }
    let classes = category_classes(&r.category);
    if strict && classes.is_none() {
        return Err(ann(format!("unknown category {:?}", r.category)));
    }
    let labels = match r.labels {
        Some(l) => l,
        None if strict => return Err(ann("missing labels".into())),
        None => {
            let strokes = r
                .strokes
                .into_iter()
                .map(Stroke::unlabeled)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| ann(e.to_string()))?;
            return Sketch::new(r.category, strokes).map_err(|e| ann(e.to_string()));
        }
    };
    if labels.len() != r.strokes.len() {
        return Err(ann(format!(
            "{} labels for {} strokes",
            labels.len(),
            r.strokes.len()
        )));
    }
    let mut strokes = Vec::with_capacity(labels.len());
    for (i, (pts, label)) in r.strokes.into_iter().zip(labels).enumerate() {
        if label.is_empty() {
            return Err(ann(format!("stroke {i} has an empty label")));
        }
        if let Some(cls) = classes {
            if !cls.contains(&label.as_str()) {
                return Err(ann(format!(
                    "stroke {i}: label {label:?} is not a {} component",
                    r.category
                )));
            }
        }
        strokes.push(Stroke::new(pts, Some(label)).map_err(|e| ann(format!("stroke {i}: {e}")))?);
    }
    Sketch::new(r.category, strokes).map_err(|e| ann(e.to_string()))
}

/// Reads annotated sketches; every stroke must carry a label from its
/// category's closed class set.
pub fn parse_annotated(reader: impl BufRead) -> Result<Vec<Sketch>> {
    records(reader)
        .enumerate()
        .map(|(i, r)| build_labeled(r?, i, true))
        .collect()
}

/// Reads either record shape; labels are kept (and checked against the class
/// set of known categories) when present.
pub fn parse_sketches(reader: impl BufRead) -> Result<Vec<Sketch>> {
    records(reader)
        .enumerate()
        .map(|(i, r)| {
            let r = r?;
            if r.labels.is_none() {
                // drop single-point strokes like the simplified-drawing reader
                let line = r.line;
                let strokes = r
                    .strokes
                    .into_iter()
                    .filter(|p| p.len() >= 2)
                    .map(Stroke::unlabeled)
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| parse_err(line, e.to_string()))?;
                return Sketch::new(r.category, strokes).map_err(|e| parse_err(line, e.to_string()));
            }
            build_labeled(r, i, false)
        })
        .collect()
}

pub fn read_sketches(path: impl AsRef<std::path::Path>) -> Result<Vec<Sketch>> {
    let f = std::fs::File::open(path)?;
    parse_sketches(std::io::BufReader::new(f))
}

/// Canonical single-line JSON for one sketch.
pub fn sketch_to_json_line(s: &Sketch) -> String {
    let strokes: Vec<Value> = s
        .strokes()
        .iter()
        .map(|st| {
            let xs: Vec<f64> = st.points().iter().map(|p| p.x).collect();
            let ys: Vec<f64> = st.points().iter().map(|p| p.y).collect();
            json!([xs, ys])
        })
        .collect();
    let mut rec = serde_json::Map::new();
    rec.insert("category".into(), json!(s.category()));
    rec.insert("strokes".into(), Value::Array(strokes));
    if let Some(labels) = s.labels() {
        rec.insert("labels".into(), json!(labels));
    }
    Value::Object(rec).to_string()
}

pub fn write_sketches(mut w: impl Write, sketches: &[Sketch]) -> Result<()> {
    for s in sketches {
        writeln!(w, "{}", sketch_to_json_line(s))?;
    }
    Ok(())
}
