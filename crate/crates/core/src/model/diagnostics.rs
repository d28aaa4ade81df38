use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::instance::{Instance, TimeWindow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Subject {
    Location(String),
    Order(String),
    Mode(String),
    Overlay,
    DistanceMatrix,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Location(id) => write!(f, "location {id:?}"),
            Subject::Order(id) => write!(f, "order {id:?}"),
            Subject::Mode(id) => write!(f, "mode {id:?}"),
            Subject::Overlay => f.write_str("overlay"),
            Subject::DistanceMatrix => f.write_str("distance_matrix"),
        }
    }
}

/// One violated instance invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn push(&mut self, subject: Subject, message: impl Into<String>) {
        self.0.push(Diagnostic { subject, message: message.into() });
    }
}

fn check_window(out: &mut Collector, order: &str, name: &str, w: TimeWindow) {
    if w.earliest > w.latest {
        out.push(
            Subject::Order(order.to_string()),
            format!("{name} earliest {} is after latest {}", w.earliest, w.latest),
        );
    }
}

/// Checks every instance invariant; an empty result means the instance can be compiled.
pub fn validate_instance(instance: &Instance) -> Vec<Diagnostic> {
    let mut out = Collector(Vec::new());

    let mut loc_ids = HashSet::new();
    for loc in &instance.locations {
        if !loc_ids.insert(loc.id.as_str()) {
            out.push(Subject::Location(loc.id.clone()), "duplicate location id");
        }
        if let Some(p) = loc.coordinates {
            if !p.x.is_finite() || !p.y.is_finite() {
                out.push(Subject::Location(loc.id.clone()), "coordinates are not finite");
            }
        }
    }

    let mut order_ids = HashSet::new();
    for o in &instance.orders {
        let subject = || Subject::Order(o.id.clone());
        if !order_ids.insert(o.id.as_str()) {
            out.push(subject(), "duplicate order id");
        }
        for (role, id) in [("origin", &o.origin), ("destination", &o.destination)] {
            if !loc_ids.contains(id.as_str()) {
                out.push(subject(), format!("{role} references unknown location {id:?}"));
            }
        }
        if o.origin == o.destination {
            out.push(subject(), "origin and destination are the same location");
        }
        if o.weight.milli() < 0 {
            out.push(subject(), format!("negative weight {}", o.weight));
        }
        check_window(&mut out, &o.id, "pickup_window", o.pickup_window);
        check_window(&mut out, &o.id, "delivery_window", o.delivery_window);
    }

    let mut mode_ids = HashSet::new();
    for m in &instance.modes {
        let subject = || Subject::Mode(m.id.clone());
        if !mode_ids.insert(m.id.as_str()) {
            out.push(subject(), "duplicate mode id");
        }
        if m.capacity.milli() <= 0 {
            out.push(subject(), "capacity must be positive");
        }
        if m.max_drops == 0 || m.max_pickups == 0 {
            out.push(subject(), "max_drops and max_pickups must be positive");
        }
        let caps = [
            ("max_total_distance", m.max_total_distance),
            ("max_oor_distance", m.max_oor_distance),
            ("max_first_last_drop_distance", m.max_first_last_drop_distance),
            ("max_first_last_pickup_distance", m.max_first_last_pickup_distance),
        ];
        for (name, cap) in caps {
            if matches!(cap, Some(d) if d.milli() <= 0) {
                out.push(subject(), format!("{name} must be positive when present"));
            }
        }
        if matches!(m.max_oor_percent, Some(p) if !(p > 0.0 && p.is_finite())) {
            out.push(subject(), "max_oor_percent must be positive when present");
        }
        if m.fleet_cap == Some(0) {
            out.push(subject(), "fleet_cap must be positive when present");
        }
        if !(m.average_speed > 0.0 && m.average_speed.is_finite()) {
            out.push(subject(), "average_speed must be positive");
        }
        let rates = std::iter::once(m.cost_rate.default).chain(m.cost_rate.lanes.iter().map(|l| l.rate));
        if rates.into_iter().any(|r| !(r >= 0.0 && r.is_finite())) {
            out.push(subject(), "cost rates must be finite and nonnegative");
        }
        if m.fixed_cost.milli() < 0 {
            out.push(subject(), "fixed_cost must be nonnegative");
        }
    }
    if instance.modes.is_empty() {
        out.push(Subject::Overlay, "instance declares no transport modes");
    }

    let hos = &instance.overlay.hos;
    if hos.max_drive_hours.0 <= 0 || hos.max_duty_hours.0 <= 0 || hos.min_rest_hours.0 <= 0 {
        out.push(Subject::Overlay, "hours-of-service limits must be strictly positive");
    }
    if instance.overlay.service_minutes_per_stop.0 < 0 {
        out.push(Subject::Overlay, "service_minutes_per_stop must be nonnegative");
    }

    match &instance.distance_matrix {
        Some(matrix) => {
            let mut index = HashMap::new();
            for (i, id) in matrix.ids.iter().enumerate() {
                if index.insert(id.as_str(), i).is_some() {
                    out.push(Subject::DistanceMatrix, format!("duplicate id {id:?}"));
                }
                if !loc_ids.contains(id.as_str()) {
                    out.push(Subject::DistanceMatrix, format!("unknown location {id:?}"));
                }
            }
            for loc in &instance.locations {
                if !index.contains_key(loc.id.as_str()) {
                    out.push(
                        Subject::Location(loc.id.clone()),
                        "missing from distance_matrix (mixed distance sources are rejected)",
                    );
                }
            }
            let n = matrix.ids.len();
            if matrix.rows.len() != n || matrix.rows.iter().any(|r| r.len() != n) {
                out.push(Subject::DistanceMatrix, format!("table must be {n}x{n}"));
            } else {
                for (a, row) in matrix.rows.iter().enumerate() {
                    for (b, d) in row.iter().enumerate() {
                        if d.milli() < 0 {
                            out.push(
                                Subject::DistanceMatrix,
                                format!("negative distance {} -> {}", matrix.ids[a], matrix.ids[b]),
                            );
                        }
                        if a == b && d.milli() != 0 {
                            out.push(Subject::DistanceMatrix, format!("nonzero self-distance at {}", matrix.ids[a]));
                        }
                    }
                }
            }
        }
        None => {
            for loc in &instance.locations {
                if loc.coordinates.is_none() {
                    out.push(Subject::Location(loc.id.clone()), "no coordinates and no distance_matrix");
                }
            }
        }
    }

    out.0
}
