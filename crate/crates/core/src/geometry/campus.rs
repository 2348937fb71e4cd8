use super::{parse_map, BuildingMap, Position};

const CAMPUS_MAP: &str = include_str!("../../maps/campus.map");

/// Outdoor base-station sites on the synthetic campus, `(x, y)` in meters.
pub const CAMPUS_BASE_STATIONS: [(f64, f64); 3] = [(160.0, 135.0), (345.0, 265.0), (480.0, 120.0)];

/// Built-in campus footprint (about 30% building coverage).
pub fn campus_map() -> BuildingMap<f64> {
    parse_map(CAMPUS_MAP).expect("bundled campus map is valid")
}

/// Campus base stations at `height` meters.
pub fn campus_site(height: f64) -> Vec<Position<f64>> {
    CAMPUS_BASE_STATIONS
        .iter()
        .map(|&(x, y)| Position::new(x, y, height))
        .collect()
}
