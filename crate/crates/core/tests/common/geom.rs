//! Independent line-of-sight oracles: orientation tests and Cyrus-Beck
//! clipping, valid for convex footprints in general position.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrcell::{BuildingMap, Point, Polygon, Rect};

pub fn random_convex(rng: &mut ChaCha8Rng, cx: f64, cy: f64, r: f64) -> Vec<Point> {
    let n = rng.gen_range(3..9);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    if angles.len() < 3 {
        angles = vec![0.0, 2.1, 4.2];
    }
    angles.iter().map(|t| Point::new(cx + r * t.cos(), cy + r * t.sin())).collect()
}

pub fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Proper intersection by strict orientation signs; random inputs are in
/// general position.
pub fn proper_intersection(a: Point, b: Point, u: Point, v: Point) -> bool {
    let d1 = cross(a, b, u);
    let d2 = cross(a, b, v);
    let d3 = cross(u, v, a);
    let d4 = cross(u, v, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Length of `ab` inside a convex CCW polygon, by Cyrus-Beck clipping.
pub fn cyrus_beck(a: Point, b: Point, poly: &[Point]) -> f64 {
    let d = Point::new(b.x - a.x, b.y - a.y);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for i in 0..poly.len() {
        let u = poly[i];
        let v = poly[(i + 1) % poly.len()];
        // inward normal of a CCW edge
        let n = Point::new(-(v.y - u.y), v.x - u.x);
        let num = n.x * (a.x - u.x) + n.y * (a.y - u.y);
        let den = n.x * d.x + n.y * d.y;
        if den == 0.0 {
            if num < 0.0 {
                return 0.0;
            }
            continue;
        }
        let t = -num / den;
        if den > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
    }
    if hi > lo {
        (hi - lo) * (d.x * d.x + d.y * d.y).sqrt()
    } else {
        0.0
    }
}

pub fn point(rng: &mut ChaCha8Rng) -> Point {
    Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0))
}

#[derive(Debug, Default)]
pub struct ConvexTally {
    pub cases: usize,
    pub crossed: usize,
}

/// One random convex footprint and segment per case; panics with the case
/// index on the first disagreement.
pub fn convex_pairs(seed: u64, cases: usize) -> ConvexTally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = Rect::new(Point::new(0.0, 0.0), Point::new(100.0, 100.0));
    let mut tally = ConvexTally::default();
    for case in 0..cases {
        let (cx, cy, r) = (rng.gen_range(30.0..70.0), rng.gen_range(30.0..70.0), rng.gen_range(5.0..25.0));
        let verts = random_convex(&mut rng, cx, cy, r);
        let poly = Polygon::new(verts);
        let map = BuildingMap::new(bounds, vec![poly.clone()]).unwrap();
        let (a, b) = (point(&mut rng), point(&mut rng));
        let v = poly.vertices();

        let prof = map.path_profile(a, b);
        let edges = (0..v.len()).filter(|&i| proper_intersection(a, b, v[i], v[(i + 1) % v.len()])).count() as u32;
        assert_eq!(prof.wall_crossings, edges, "case {case}");
        let clipped = cyrus_beck(a, b, v);
        assert!((prof.indoor_distance - clipped).abs() < 1e-9 * (1.0 + clipped), "case {case}: {} vs {clipped}", prof.indoor_distance);

        // odd crossings iff exactly one endpoint is indoors
        assert_eq!(prof.wall_crossings % 2 == 1, map.is_indoor(a) != map.is_indoor(b), "case {case}");

        let back = map.path_profile(b, a);
        assert_eq!(back.wall_crossings, prof.wall_crossings, "case {case}");
        assert!((back.indoor_distance - prof.indoor_distance).abs() < 1e-9, "case {case}");
        tally.cases += 1;
        tally.crossed += (prof.wall_crossings > 0) as usize;
    }
    tally
}
