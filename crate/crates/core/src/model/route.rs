use serde::{Deserialize, Serialize};

use super::network::Network;
use super::units::{Cost, Distance, Minutes, Timestamp, Weight};
use super::{LocationIx, ModeIx, OrderIx};
use crate::geometry::RouteDistances;

/// Route shape: one pickup and several drops, or several pickups and one drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "1PMD")]
    OnePickupMultiDrop,
    #[serde(rename = "MP1D")]
    MultiPickupOneDrop,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::OnePickupMultiDrop => "1PMD",
            Direction::MultiPickupOneDrop => "MP1D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StopTimes {
    pub arrival: Timestamp,
    pub service_start: Timestamp,
    pub departure: Timestamp,
}

/// A timed plan for one route: per-stop times plus off-duty rests taken at stops.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub shift_start: Timestamp,
    pub stops: Vec<StopTimes>,
    pub rest_periods: Vec<(Timestamp, Timestamp)>,
}

impl Schedule {
    /// Time-reverses a schedule produced on a mirrored network.
    ///
    /// Mirrored windows are `[-(l + s), -(e + s)]` for service time `s`, so a
    /// mirrored service start `t` maps back to a real service start `-(t + s)`.
    pub(crate) fn unmirror(&self, service: Minutes) -> Schedule {
        let neg = |t: Timestamp| Timestamp(-t.0);
        let stops: Vec<StopTimes> = self
            .stops
            .iter()
            .rev()
            .map(|st| StopTimes {
                arrival: neg(st.departure),
                service_start: neg(st.service_start.plus(service)),
                departure: neg(st.arrival),
            })
            .collect();
        let mut rest_periods: Vec<(Timestamp, Timestamp)> =
            self.rest_periods.iter().rev().map(|&(a, b)| (neg(b), neg(a))).collect();
        rest_periods.sort();
        Schedule { shift_start: stops.first().map(|s| s.arrival).unwrap_or_default(), stops, rest_periods }
    }
}

/// Deduplication key of a candidate route.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RouteKey {
    pub mode: ModeIx,
    pub stops: Vec<LocationIx>,
    pub orders: Vec<OrderIx>,
}

/// One vehicle's validated plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub mode: ModeIx,
    pub direction: Direction,
    pub stops: Vec<LocationIx>,
    /// Sorted ascending.
    pub orders: Vec<OrderIx>,
    pub weight: Weight,
    pub distances: RouteDistances,
    pub schedule: Schedule,
    pub cost: Cost,
}

impl Route {
    pub fn key(&self) -> RouteKey {
        RouteKey { mode: self.mode, stops: self.stops.clone(), orders: self.orders.clone() }
    }

    pub fn drops(&self) -> usize {
        self.stops.len() - 1
    }

    pub fn origin(&self) -> LocationIx {
        self.stops[0]
    }

    pub fn last_stop(&self) -> LocationIx {
        self.stops[self.stops.len() - 1]
    }
}

/// Route cost: total distance at the lane rate for (origin, final stop), plus the fixed dispatch cost.
pub fn route_cost(net: &Network, mode: ModeIx, stops: &[LocationIx], total: Distance) -> Cost {
    let rate = net.rate(mode, stops[0], stops[stops.len() - 1]);
    let variable = (total.milli() as f64 * rate).round() as i64;
    Cost(variable) + net.mode(mode).fixed_cost
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    FeasibleWithBound,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub selected_routes: Vec<Route>,
    pub total_cost: Cost,
    pub covered_orders: Vec<OrderIx>,
    pub status: SolutionStatus,
    pub lower_bound: Cost,
    pub wall_time: std::time::Duration,
}

impl Solution {
    pub fn infeasible(wall_time: std::time::Duration) -> Solution {
        Solution {
            selected_routes: Vec::new(),
            total_cost: Cost::ZERO,
            covered_orders: Vec::new(),
            status: SolutionStatus::Infeasible,
            lower_bound: Cost::ZERO,
            wall_time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExplicitMatrix, Instance, LaneRate, Location, TransportMode};
    use std::collections::BTreeSet;

    fn lane_instance() -> Instance {
        let loc =
            |id: &str| Location { id: id.into(), coordinates: None, region_tags: BTreeSet::from([format!("r{id}")]) };
        let d = [[0.0, 10.0, 100.0], [10.0, 0.0, 105.0], [100.0, 105.0, 0.0]];
        let ids = ["A", "B", "C"];
        let mut mode = TransportMode::basic("TL", 100.0, 2, 1.0, 50.0);
        mode.cost_rate.lanes = vec![
            LaneRate { origin_region: "rA".into(), destination_region: "rB".into(), rate: 1.1 },
            LaneRate { origin_region: "rA".into(), destination_region: "rC".into(), rate: 1.0 },
        ];
        Instance {
            weight_unit: "pound".into(),
            locations: ids.iter().map(|i| loc(i)).collect(),
            orders: vec![],
            modes: vec![mode],
            overlay: Default::default(),
            distance_metric: Default::default(),
            distance_matrix: Some(ExplicitMatrix {
                ids: ids.iter().map(|s| s.to_string()).collect(),
                rows: d.iter().map(|r| r.iter().map(|&x| Distance::from_units(x)).collect()).collect(),
            }),
        }
    }

    #[test]
    fn cost_is_distance_times_rate_plus_fixed() {
        let mut inst = lane_instance();
        inst.modes[0].cost_rate.lanes.clear();
        inst.modes[0].cost_rate.default = 2.0;
        let net = Network::new(&inst).unwrap();
        let m = ModeIx::new(0);
        let stops = [LocationIx::new(0), LocationIx::new(1)];
        assert_eq!(route_cost(&net, m, &stops, Distance::from_units(100.0)), Cost(200_000));
        inst.modes[0].fixed_cost = Cost::from_units(50.0);
        let net = Network::new(&inst).unwrap();
        assert_eq!(route_cost(&net, m, &stops, Distance::from_units(100.0)), Cost(250_000));
    }

    #[test]
    fn multi_drop_can_cost_more_than_its_parts() {
        // rate(A,C)=1.0 < rate(A,B)=1.1, d(A,B)=10, d(B,C)=105, d(A,C)=100
        // A-B-C: 115 * 1.0 = 115; A-B + A-C: 11 + 100 = 111
        let net = Network::new(&lane_instance()).unwrap();
        let m = ModeIx::new(0);
        let (a, b, c) = (LocationIx::new(0), LocationIx::new(1), LocationIx::new(2));
        let abc = route_cost(&net, m, &[a, b, c], net.distance(a, b) + net.distance(b, c));
        let ab = route_cost(&net, m, &[a, b], net.distance(a, b));
        let ac = route_cost(&net, m, &[a, c], net.distance(a, c));
        assert_eq!(abc, Cost(115_000));
        assert_eq!(ab + ac, Cost(111_000));
        assert!(abc > ab + ac);
    }
}
