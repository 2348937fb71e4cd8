//! Plain-text building map format.
//!
//! ```text
//! # comments and blank lines are ignored
//! bounds <xmin>,<ymin> <xmax>,<ymax>
//! <x>,<y> <x>,<y> <x>,<y> ...
//! ```
//!
//! The `bounds` header must precede the buildings; every further line is one
//! polygon with at least three vertices.

use std::path::Path;

use super::{BuildingMap, GeometryError, Point2, Polygon, Rect};
use crate::{Error, Result};

fn parse_pair(tok: &str, line: usize) -> Result<Point2<f64>, GeometryError> {
    let bad = || GeometryError::Parse {
        line,
        reason: format!("expected `x,y`, found `{tok}`"),
    };
    let (x, y) = tok.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    if !x.is_finite() || !y.is_finite() {
        return Err(bad());
    }
    Ok(Point2::new(x, y))
}

pub fn parse_map(text: &str) -> Result<BuildingMap<f64>, GeometryError> {
    let mut bounds = None;
    let mut polys = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("bounds") {
            if bounds.is_some() {
                return Err(GeometryError::Parse { line, reason: "duplicate bounds header".into() });
            }
            let pts = rest.split_whitespace().map(|t| parse_pair(t, line)).collect::<Result<Vec<_>, _>>()?;
            if pts.len() != 2 {
                return Err(GeometryError::Parse { line, reason: "bounds needs two corners".into() });
            }
            bounds = Some(Rect::new(pts[0], pts[1]));
            continue;
        }
        if bounds.is_none() {
            return Err(GeometryError::Parse { line, reason: "building before bounds header".into() });
        }
        let pts = body.split_whitespace().map(|t| parse_pair(t, line)).collect::<Result<Vec<_>, _>>()?;
        if pts.len() < 3 {
            return Err(GeometryError::TooFewVertices { index: polys.len(), count: pts.len() });
        }
        polys.push(Polygon::new(pts));
    }
    let bounds = bounds.ok_or(GeometryError::Parse { line: 0, reason: "missing bounds header".into() })?;
    BuildingMap::new(bounds, polys)
}

pub fn read_map(path: &Path) -> Result<BuildingMap<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_map(&text)?)
}
