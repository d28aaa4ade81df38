//! Distance tables and out-of-route metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Distance, DistanceMetric, LocationIx, Point};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("unknown location index {0}")]
    UnknownLocation(usize),
    #[error("a route needs at least two stops, got {0}")]
    TooFewStops(usize),
}

/// Square table of nonnegative milli-unit distances. Symmetry is not assumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    cells: Vec<i64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Distance) -> DistanceMatrix {
        let mut cells = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                cells.push(if a == b { 0 } else { f(a, b).milli() });
            }
        }
        DistanceMatrix { n, cells }
    }

    pub fn from_points(points: &[Point], metric: DistanceMetric) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), |a, b| Distance::from_units(point_distance(points[a], points[b], metric)))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, a: LocationIx, b: LocationIx) -> Distance {
        Distance(self.cells[a.index() * self.n + b.index()])
    }

    pub fn try_get(&self, a: LocationIx, b: LocationIx) -> Result<Distance, GeometryError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.get(a, b))
    }

    fn check(&self, a: LocationIx) -> Result<(), GeometryError> {
        if a.index() < self.n {
            Ok(())
        } else {
            Err(GeometryError::UnknownLocation(a.index()))
        }
    }

    pub fn transpose(&self) -> DistanceMatrix {
        DistanceMatrix::from_fn(self.n, |a, b| Distance(self.cells[b * self.n + a]))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|a| (0..a).all(|b| self.cells[a * self.n + b] == self.cells[b * self.n + a]))
    }
}

pub fn point_distance(a: Point, b: Point, metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::Euclidean => (a.x - b.x).hypot(a.y - b.y),
        DistanceMetric::HaversineMiles => haversine(a, b, 3958.8),
        DistanceMetric::HaversineKm => haversine(a, b, 6371.0),
    }
}

fn haversine(a: Point, b: Point, radius: f64) -> f64 {
    let (lat1, lon1) = (a.x.to_radians(), a.y.to_radians());
    let (lat2, lon2) = (b.x.to_radians(), b.y.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * radius * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteDistances {
    pub total_distance: Distance,
    pub direct_distance: Distance,
    pub oor_distance: Distance,
    pub oor_percent: f64,
}

/// Total, direct (first to last stop) and out-of-route distance of a stop sequence.
pub fn route_distances(stops: &[LocationIx], matrix: &DistanceMatrix) -> Result<RouteDistances, GeometryError> {
    if stops.len() < 2 {
        return Err(GeometryError::TooFewStops(stops.len()));
    }
    for &s in stops {
        matrix.check(s)?;
    }
    let total: Distance = stops.windows(2).map(|w| matrix.get(w[0], w[1])).sum();
    let direct = matrix.get(stops[0], stops[stops.len() - 1]);
    Ok(distances_from_totals(total, direct))
}

pub(crate) fn distances_from_totals(total: Distance, direct: Distance) -> RouteDistances {
    let oor = total - direct;
    let oor_percent = if direct.milli() > 0 { 100.0 * oor.milli() as f64 / direct.milli() as f64 } else { 0.0 };
    RouteDistances { total_distance: total, direct_distance: direct, oor_distance: oor, oor_percent }
}

/// Detour of passing through `via` on the way from `origin` to `end`, clamped at zero.
pub fn pairwise_oor(
    origin: LocationIx,
    via: LocationIx,
    end: LocationIx,
    matrix: &DistanceMatrix,
) -> Result<Distance, GeometryError> {
    let raw = matrix.try_get(origin, via)? + matrix.try_get(via, end)? - matrix.try_get(origin, end)?;
    if raw.milli() < 0 {
        log::warn!(
            "negative out-of-route detour {} through {} ({} -> {}); matrix violates the triangle inequality, clamping to 0",
            raw,
            via.index(),
            origin.index(),
            end.index()
        );
        return Ok(Distance::ZERO);
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ix(i: usize) -> LocationIx {
        LocationIx::new(i)
    }

    fn abc() -> DistanceMatrix {
        // d(A,B)=100, d(B,C)=100, d(A,C)=150
        let d = [[0.0, 100.0, 150.0], [100.0, 0.0, 100.0], [150.0, 100.0, 0.0]];
        DistanceMatrix::from_fn(3, |a, b| Distance::from_units(d[a][b]))
    }

    #[test]
    fn two_stop_route_has_no_detour() {
        let r = route_distances(&[ix(0), ix(1)], &abc()).unwrap();
        assert_eq!(r.total_distance, Distance::from_units(100.0));
        assert_eq!(r.oor_distance, Distance::ZERO);
        assert_eq!(r.oor_percent, 0.0);
    }

    #[test]
    fn three_stop_detour() {
        let r = route_distances(&[ix(0), ix(1), ix(2)], &abc()).unwrap();
        assert_eq!(r.total_distance, Distance::from_units(200.0));
        assert_eq!(r.direct_distance, Distance::from_units(150.0));
        assert_eq!(r.oor_distance, Distance::from_units(50.0));
        assert!((r.oor_percent - 33.333).abs() < 1e-3);
    }

    #[test]
    fn collinear_stops_have_zero_oor() {
        let pts = [Point::new(0.0, 0.0), Point::new(3.0, 4.0), Point::new(6.0, 8.0)];
        let m = DistanceMatrix::from_points(&pts, DistanceMetric::Euclidean);
        let r = route_distances(&[ix(0), ix(1), ix(2)], &m).unwrap();
        assert_eq!(r.oor_distance, Distance::ZERO);
        assert_eq!(pairwise_oor(ix(0), ix(1), ix(2), &m).unwrap(), Distance::ZERO);
    }

    #[test]
    fn pairwise_oor_hand_values() {
        assert_eq!(pairwise_oor(ix(0), ix(1), ix(2), &abc()).unwrap(), Distance::from_units(50.0));
    }

    #[test]
    fn pairwise_oor_matches_coordinate_geometry() {
        // O=(0,0), E=(100,0), V=(50,80) far off the segment
        let pts = [Point::new(0.0, 0.0), Point::new(50.0, 80.0), Point::new(100.0, 0.0)];
        let m = DistanceMatrix::from_points(&pts, DistanceMetric::Euclidean);
        let leg = (50.0f64 * 50.0 + 80.0 * 80.0).sqrt();
        let expected = Distance::from_units(leg) + Distance::from_units(leg) - Distance::from_units(100.0);
        assert_eq!(pairwise_oor(ix(0), ix(1), ix(2), &m).unwrap(), expected);
        assert_eq!(expected.milli(), 88_680);
    }

    #[test]
    fn non_metric_matrix_is_clamped() {
        let d = [[0.0, 1.0, 50.0], [1.0, 0.0, 1.0], [50.0, 1.0, 0.0]];
        let m = DistanceMatrix::from_fn(3, |a, b| Distance::from_units(d[a][b]));
        assert_eq!(pairwise_oor(ix(0), ix(1), ix(2), &m).unwrap(), Distance::ZERO);
    }

    #[test]
    fn lookups_fail_on_unknown_index() {
        assert_eq!(route_distances(&[ix(0), ix(7)], &abc()), Err(GeometryError::UnknownLocation(7)));
        assert!(pairwise_oor(ix(9), ix(1), ix(2), &abc()).is_err());
        assert_eq!(route_distances(&[ix(0)], &abc()), Err(GeometryError::TooFewStops(1)));
    }

    #[test]
    fn transpose_of_symmetric_is_identity() {
        let m = abc();
        assert!(m.is_symmetric());
        assert_eq!(m.transpose(), m);
    }

    #[test]
    fn haversine_sanity() {
        // Minneapolis to Chicago is roughly 355 miles great-circle
        let d = point_distance(
            Point::new(44.9778, -93.2650),
            Point::new(41.8781, -87.6298),
            DistanceMetric::HaversineMiles,
        );
        assert!((d - 355.0).abs() < 5.0, "{d}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn total_is_sum_of_legs(pts in prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 2..8)) {
                let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
                let m = DistanceMatrix::from_points(&points, DistanceMetric::Euclidean);
                let stops: Vec<LocationIx> = (0..points.len()).map(ix).collect();
                let r = route_distances(&stops, &m).unwrap();
                let mut legs = 0i64;
                for i in 1..points.len() {
                    legs += Distance::from_units(point_distance(points[i - 1], points[i], DistanceMetric::Euclidean)).milli();
                }
                prop_assert_eq!(r.total_distance.milli(), legs);
                prop_assert_eq!(r.oor_distance, r.total_distance - r.direct_distance);
                if points.len() == 2 {
                    prop_assert_eq!(r.oor_distance, Distance::ZERO);
                }
            }

            #[test]
            fn pairwise_oor_nonnegative(pts in prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 3)) {
                let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
                let m = DistanceMatrix::from_points(&points, DistanceMetric::Euclidean);
                prop_assert!(pairwise_oor(ix(0), ix(1), ix(2), &m).unwrap().milli() >= 0);
            }
        }
    }
}
