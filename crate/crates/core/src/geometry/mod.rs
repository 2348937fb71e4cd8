//! Building footprints and line-of-sight queries on a 2D map.
//!
//! Crossing tests use simulation of simplicity: every query segment is
//! treated as translated by the infinitesimal vector `(ε, ε²)`. A segment
//! that passes exactly through a polygon vertex, or runs along an edge, is
//! therefore resolved as lying to one definite side, and crossing counts are
//! well defined and symmetric in the segment endpoints.

mod campus;
mod mapfile;

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::{Error, Result, Scalar};

pub use campus::{campus_map, campus_site, CAMPUS_BASE_STATIONS};
pub use mapfile::{parse_map, read_map};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polygon {index} has {count} vertices, at least 3 required")]
    TooFewVertices { index: usize, count: usize },
    #[error("polygon {index} is not simple")]
    NotSimple { index: usize },
    #[error("polygon {index} has zero area")]
    Degenerate { index: usize },
    #[error("polygon {index} leaves the map bounds")]
    OutOfBounds { index: usize },
    #[error("polygons {a} and {b} overlap or are nested")]
    Overlap { a: usize, b: usize },
    #[error("map bounds are empty")]
    EmptyBounds,
    #[error("map file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    pub fn sub(self, o: Self) -> Self {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> T {
        self.sub(o).norm()
    }

    pub fn lerp(self, o: Self, t: T) -> Self {
        Point2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

/// A ground point with an antenna height above it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Position<T> {
    pub xy: Point2<T>,
    pub height: T,
}

impl<T: Scalar> Position<T> {
    pub fn new(x: T, y: T, height: T) -> Self {
        Position {
            xy: Point2::new(x, y),
            height,
        }
    }

    pub fn distance_2d(&self, o: &Self) -> T {
        self.xy.distance(o.xy)
    }

    pub fn distance_3d(&self, o: &Self) -> T {
        self.distance_2d(o).hypot(self.height - o.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn new(min: Point2<T>, max: Point2<T>) -> Self {
        Rect { min, max }
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn area(&self) -> T {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }
}

/// Simple polygon stored counter-clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon<T> {
    vertices: Vec<Point2<T>>,
    bbox: Rect<T>,
}

impl<T: Scalar> Polygon<T> {
    /// Builds a polygon, reordering clockwise input to counter-clockwise.
    /// Simplicity is checked by [`BuildingMap::new`].
    pub fn new(mut vertices: Vec<Point2<T>>) -> Self {
        if signed_area(&vertices) < T::zero() {
            vertices.reverse();
        }
        let first = vertices.first().copied().unwrap_or_default();
        let mut bbox = Rect::new(first, first);
        for v in &vertices {
            bbox.min.x = bbox.min.x.min(v.x);
            bbox.min.y = bbox.min.y.min(v.y);
            bbox.max.x = bbox.max.x.max(v.x);
            bbox.max.y = bbox.max.y.max(v.y);
        }
        Polygon { vertices, bbox }
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Self {
        Polygon::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn bbox(&self) -> Rect<T> {
        self.bbox
    }

    pub fn area(&self) -> T {
        signed_area(&self.vertices).abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Whether `p` (under the symbolic perturbation) lies inside.
    pub fn contains(&self, p: Point2<T>) -> bool {
        let far = Point2::new(self.bbox.max.x + self.bbox.max.x.abs() + T::one(), p.y);
        if p.x > self.bbox.max.x || p.x < self.bbox.min.x || p.y > self.bbox.max.y || p.y < self.bbox.min.y {
            return false;
        }
        self.edges().filter(|&(u, v)| segments_cross(p, far, u, v)).count() % 2 == 1
    }
}

fn signed_area<T: Scalar>(vs: &[Point2<T>]) -> T {
    let n = vs.len();
    let mut acc = T::zero();
    for i in 0..n {
        acc = acc + vs[i].cross(vs[(i + 1) % n]);
    }
    acc / T::two()
}

fn sign<T: Scalar>(v: T) -> i8 {
    if v > T::zero() {
        1
    } else if v < T::zero() {
        -1
    } else {
        0
    }
}

/// Side of `p` relative to the directed line through the perturbed segment `a→b`.
fn side_of_query_line<T: Scalar>(a: Point2<T>, b: Point2<T>, p: Point2<T>) -> i8 {
    let d = b.sub(a);
    match sign(d.cross(p.sub(a))) {
        0 => {
            // orient(a+s, b+s, p) = cross(d, p-a) - cross(d, s), s = (ε, ε²)
            let s = sign(d.y);
            if s != 0 {
                s
            } else {
                -sign(d.x)
            }
        }
        s => s,
    }
}

/// Side of the perturbed point `q + s` relative to the directed edge `u→v`.
fn side_of_edge_line<T: Scalar>(u: Point2<T>, v: Point2<T>, q: Point2<T>) -> i8 {
    let e = v.sub(u);
    match sign(e.cross(q.sub(u))) {
        0 => {
            let s = -sign(e.y);
            if s != 0 {
                s
            } else {
                sign(e.x)
            }
        }
        s => s,
    }
}

/// Whether the perturbed query segment `a→b` crosses edge `u→v`.
pub fn segments_cross<T: Scalar>(a: Point2<T>, b: Point2<T>, u: Point2<T>, v: Point2<T>) -> bool {
    if a == b || u == v {
        return false;
    }
    side_of_query_line(a, b, u) != side_of_query_line(a, b, v)
        && side_of_edge_line(u, v, a) != side_of_edge_line(u, v, b)
}

/// Wall crossings and indoor length of a straight path.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PathProfile<T> {
    pub wall_crossings: u32,
    pub indoor_distance: T,
}

/// Building footprints inside a rectangular area.
#[derive(Clone, Debug, PartialEq)]
pub struct BuildingMap<T> {
    bounds: Rect<T>,
    buildings: Vec<Polygon<T>>,
}

impl<T: Scalar> BuildingMap<T> {
    /// Validates and stores the footprints: each simple with at least three
    /// vertices, inside `bounds`, and pairwise disjoint.
    pub fn new(bounds: Rect<T>, buildings: Vec<Polygon<T>>) -> Result<Self, GeometryError> {
        if !(bounds.max.x > bounds.min.x && bounds.max.y > bounds.min.y) {
            return Err(GeometryError::EmptyBounds);
        }
        for (i, p) in buildings.iter().enumerate() {
            let n = p.vertices.len();
            if n < 3 {
                return Err(GeometryError::TooFewVertices { index: i, count: n });
            }
            if !(p.area() > T::zero()) {
                return Err(GeometryError::Degenerate { index: i });
            }
            if !p.vertices.iter().all(|&v| bounds.contains(v)) {
                return Err(GeometryError::OutOfBounds { index: i });
            }
            if !is_simple(p) {
                return Err(GeometryError::NotSimple { index: i });
            }
        }
        for i in 0..buildings.len() {
            for j in i + 1..buildings.len() {
                if polygons_touch(&buildings[i], &buildings[j]) {
                    return Err(GeometryError::Overlap { a: i, b: j });
                }
            }
        }
        Ok(BuildingMap { bounds, buildings })
    }

    pub fn bounds(&self) -> Rect<T> {
        self.bounds
    }

    pub fn buildings(&self) -> &[Polygon<T>] {
        &self.buildings
    }

    /// Index of the building containing `p`, if any.
    pub fn building_at(&self, p: Point2<T>) -> Option<usize> {
        self.buildings.iter().position(|b| b.contains(p))
    }

    pub fn is_indoor(&self, p: Point2<T>) -> bool {
        self.building_at(p).is_some()
    }

    /// Wall crossings of segment `ab` and the length of `ab` inside buildings.
    pub fn path_profile(&self, a: Point2<T>, b: Point2<T>) -> PathProfile<T> {
        let mut out = PathProfile {
            wall_crossings: 0,
            indoor_distance: T::zero(),
        };
        if a == b {
            return out;
        }
        let d = b.sub(a);
        let len = d.norm();
        let seg_box = Rect::new(
            Point2::new(a.x.min(b.x), a.y.min(b.y)),
            Point2::new(a.x.max(b.x), a.y.max(b.y)),
        );
        let mut ts: Vec<T> = Vec::new();
        for poly in &self.buildings {
            let bb = poly.bbox;
            if bb.max.x < seg_box.min.x || bb.min.x > seg_box.max.x || bb.max.y < seg_box.min.y || bb.min.y > seg_box.max.y {
                continue;
            }
            ts.clear();
            for (u, v) in poly.edges() {
                if segments_cross(a, b, u, v) {
                    let e = v.sub(u);
                    let t = u.sub(a).cross(e) / d.cross(e);
                    ts.push(t.max(T::zero()).min(T::one()));
                }
            }
            let mut inside = poly.contains(a);
            if ts.is_empty() && !inside {
                continue;
            }
            out.wall_crossings += ts.len() as u32;
            ts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
            let mut last = T::zero();
            for &t in &ts {
                if inside {
                    out.indoor_distance = out.indoor_distance + (t - last) * len;
                }
                inside = !inside;
                last = t;
            }
            if inside {
                out.indoor_distance = out.indoor_distance + (T::one() - last) * len;
            }
        }
        out
    }

    pub fn is_los(&self, a: Point2<T>, b: Point2<T>) -> bool {
        self.path_profile(a, b).wall_crossings == 0
    }

    /// Fraction of the bounds covered by buildings.
    pub fn coverage(&self) -> T {
        let total = self.buildings.iter().fold(T::zero(), |acc, p| acc + p.area());
        total / self.bounds.area()
    }
}

/// Closed-segment intersection without perturbation, for validation.
fn closed_segments_intersect<T: Scalar>(p1: Point2<T>, p2: Point2<T>, q1: Point2<T>, q2: Point2<T>) -> bool {
    let o = |a: Point2<T>, b: Point2<T>, c: Point2<T>| sign(b.sub(a).cross(c.sub(a)));
    let on = |a: Point2<T>, b: Point2<T>, c: Point2<T>| {
        c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    let (d1, d2, d3, d4) = (o(q1, q2, p1), o(q1, q2, p2), o(p1, p2, q1), o(p1, p2, q2));
    if d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0 {
        return true;
    }
    (d1 == 0 && on(q1, q2, p1))
        || (d2 == 0 && on(q1, q2, p2))
        || (d3 == 0 && on(p1, p2, q1))
        || (d4 == 0 && on(p1, p2, q2))
}

fn is_simple<T: Scalar>(p: &Polygon<T>) -> bool {
    let vs = &p.vertices;
    let n = vs.len();
    for i in 0..n {
        if vs[i] == vs[(i + 1) % n] {
            return false;
        }
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if closed_segments_intersect(vs[i], vs[(i + 1) % n], vs[j], vs[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn polygons_touch<T: Scalar>(a: &Polygon<T>, b: &Polygon<T>) -> bool {
    for (p1, p2) in a.edges() {
        for (q1, q2) in b.edges() {
            if closed_segments_intersect(p1, p2, q1, q2) {
                return true;
            }
        }
    }
    b.contains(a.vertices[0]) || a.contains(b.vertices[0])
}

/// Base-station indices ordered by ascending 3D distance to `user`, ties to
/// the lower index.
pub fn rank_bs<T: Scalar>(user: &Position<T>, bss: &[Position<T>]) -> Result<Vec<usize>> {
    if bss.is_empty() {
        return Err(Error::invalid("bss", "at least one base station required"));
    }
    let d: Vec<T> = bss.iter().map(|b| user.distance_3d(b)).collect();
    let mut idx: Vec<usize> = (0..bss.len()).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
    Ok(idx)
}

/// `n` points uniform over the map bounds. Points may fall inside buildings.
/// The placement for `n` is a prefix of the placement for any larger `n`.
pub fn place_users<T: Scalar>(map: &BuildingMap<T>, n: usize, seed: u64) -> Vec<Point2<T>> {
    let mut rng = rng::stream(seed, Stream::Placement);
    let b = map.bounds;
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            Point2::new(
                b.min.x + (b.max.x - b.min.x) * T::lit(u),
                b.min.y + (b.max.y - b.min.y) * T::lit(v),
            )
        })
        .collect()
}
