use serde::{Deserialize, Serialize};

use crate::model::{Cost, Distance, Network, Route, Solution, SolutionStatus, Timestamp, Weight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    pub location: String,
    pub arrival: Timestamp,
    pub service_start: Timestamp,
    pub departure: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub mode: String,
    pub direction: String,
    pub stops: Vec<StopRecord>,
    pub orders: Vec<String>,
    pub weight: Weight,
    pub total_distance: Distance,
    pub direct_distance: Distance,
    pub oor_distance: Distance,
    pub oor_percent: f64,
    pub cost: Cost,
    pub rest_periods: Vec<(Timestamp, Timestamp)>,
}

impl RouteRecord {
    pub fn new(net: &Network, r: &Route) -> RouteRecord {
        RouteRecord {
            mode: net.mode_id(r.mode).to_string(),
            direction: r.direction.label().to_string(),
            stops: r
                .stops
                .iter()
                .zip(&r.schedule.stops)
                .map(|(&l, t)| StopRecord {
                    location: net.location_id(l).to_string(),
                    arrival: t.arrival,
                    service_start: t.service_start,
                    departure: t.departure,
                })
                .collect(),
            orders: r.orders.iter().map(|&o| net.order_id(o).to_string()).collect(),
            weight: r.weight,
            total_distance: r.distances.total_distance,
            direct_distance: r.distances.direct_distance,
            oor_distance: r.distances.oor_distance,
            oor_percent: (r.distances.oor_percent * 1000.0).round() / 1000.0,
            cost: r.cost,
            rest_periods: r.schedule.rest_periods.clone(),
        }
    }
}

/// The solution file. `wall_time_seconds` is the only run-dependent field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub status: SolutionStatus,
    pub total_cost: Cost,
    pub lower_bound: Cost,
    pub routes: Vec<RouteRecord>,
    #[serde(default)]
    pub wall_time_seconds: f64,
}

impl SolutionFile {
    pub fn new(net: &Network, solution: &Solution) -> SolutionFile {
        SolutionFile {
            status: solution.status,
            total_cost: solution.total_cost,
            lower_bound: solution.lower_bound,
            routes: solution.selected_routes.iter().map(|r| RouteRecord::new(net, r)).collect(),
            wall_time_seconds: solution.wall_time.as_secs_f64(),
        }
    }
}

pub fn solution_json(net: &Network, solution: &Solution) -> String {
    serde_json::to_string_pretty(&SolutionFile::new(net, solution)).expect("solution serializes")
}

/// One row per selected route: mode, direction, stop ids, order ids and the measured quantities.
pub fn routes_csv(net: &Network, solution: &Solution) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "route",
        "mode",
        "direction",
        "stops",
        "orders",
        "weight",
        "total_distance",
        "oor_distance",
        "oor_percent",
        "cost",
        "start",
        "end",
        "rests",
    ])
    .expect("in-memory write");
    for (i, r) in solution.selected_routes.iter().enumerate() {
        let rec = RouteRecord::new(net, r);
        let start = rec.stops.first().map(|s| s.arrival.to_iso()).unwrap_or_default();
        let end = rec.stops.last().map(|s| s.departure.to_iso()).unwrap_or_default();
        w.write_record([
            (i + 1).to_string(),
            rec.mode,
            rec.direction,
            rec.stops.iter().map(|s| s.location.as_str()).collect::<Vec<_>>().join(" > "),
            rec.orders.join(" "),
            rec.weight.to_string(),
            rec.total_distance.to_string(),
            rec.oor_distance.to_string(),
            format!("{:.3}", rec.oor_percent),
            rec.cost.to_string(),
            start,
            end,
            rec.rest_periods.len().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flushed")).expect("utf-8")
}
