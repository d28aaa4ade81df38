use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::units::{hours, Cost, Distance, Minutes, Timestamp, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub id: String,
    /// Planar `(x, y)` or, for haversine metrics, `(lat, lon)` in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Point>,
    #[serde(default)]
    pub region_tags: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub earliest: Timestamp,
    pub latest: Timestamp,
}

impl TimeWindow {
    pub fn new(earliest: Timestamp, latest: Timestamp) -> TimeWindow {
        TimeWindow { earliest, latest }
    }

    pub fn intersect(self, other: TimeWindow) -> Option<TimeWindow> {
        let earliest = self.earliest.max(other.earliest);
        let latest = self.latest.min(other.latest);
        (earliest <= latest).then_some(TimeWindow { earliest, latest })
    }

    pub fn contains(self, t: Timestamp) -> bool {
        self.earliest <= t && t <= self.latest
    }

    pub fn span(self) -> Minutes {
        self.latest.since(self.earliest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    First,
    Last,
}

impl Position {
    pub fn flipped(self) -> Position {
        match self {
            Position::First => Position::Last,
            Position::Last => Position::First,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Order {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub weight: Weight,
    /// Allowed service-start interval at the origin.
    pub pickup_window: TimeWindow,
    /// Allowed service-start interval at the destination.
    pub delivery_window: TimeWindow,
    #[serde(default)]
    pub product_tags: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_requirement: Option<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneRate {
    pub origin_region: String,
    pub destination_region: String,
    pub rate: f64,
}

/// Per-unit-distance rate keyed by the route's origin and final-destination regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRate {
    pub default: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lanes: Vec<LaneRate>,
}

impl CostRate {
    pub fn flat(rate: f64) -> CostRate {
        CostRate { default: rate, lanes: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportMode {
    pub id: String,
    pub capacity: Weight,
    pub max_drops: u32,
    #[serde(default = "one")]
    pub max_pickups: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_total_distance: Option<Distance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_oor_distance: Option<Distance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_oor_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_first_last_drop_distance: Option<Distance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_first_last_pickup_distance: Option<Distance>,
    pub cost_rate: CostRate,
    #[serde(default)]
    pub fixed_cost: Cost,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet_cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serviceable_regions: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub forbidden_product_tags: BTreeSet<String>,
    /// Distance units per hour.
    pub average_speed: f64,
}

fn one() -> u32 {
    1
}

impl TransportMode {
    /// An unconstrained mode: only capacity, drop count, speed and a flat rate.
    pub fn basic(id: &str, capacity: f64, max_drops: u32, rate: f64, speed: f64) -> TransportMode {
        TransportMode {
            id: id.to_string(),
            capacity: Weight::from_units(capacity),
            max_drops,
            max_pickups: 1,
            max_total_distance: None,
            max_oor_distance: None,
            max_oor_percent: None,
            max_first_last_drop_distance: None,
            max_first_last_pickup_distance: None,
            cost_rate: CostRate::flat(rate),
            fixed_cost: Cost::ZERO,
            fleet_cap: None,
            serviceable_regions: None,
            forbidden_product_tags: BTreeSet::new(),
            average_speed: speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairRule {
    Allow,
    Forbid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionalPairRule {
    pub region_a: String,
    pub region_b: String,
    pub rule: PairRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hos {
    #[serde(with = "hours")]
    pub max_drive_hours: Minutes,
    #[serde(with = "hours")]
    pub max_duty_hours: Minutes,
    #[serde(with = "hours")]
    pub min_rest_hours: Minutes,
}

impl Default for Hos {
    fn default() -> Hos {
        Hos { max_drive_hours: Minutes(11 * 60), max_duty_hours: Minutes(14 * 60), min_rest_hours: Minutes(10 * 60) }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintOverlay {
    /// Unordered product-tag pairs that cannot share a vehicle.
    #[serde(default)]
    pub order_incompatibilities: Vec<(String, String)>,
    #[serde(default)]
    pub regional_pair_rules: Vec<RegionalPairRule>,
    #[serde(default)]
    pub hos: Hos,
    #[serde(default)]
    pub service_minutes_per_stop: Minutes,
}

impl ConstraintOverlay {
    /// True if the two product tags are declared incompatible, in either order.
    pub fn incompatible(&self, a: &str, b: &str) -> bool {
        self.order_incompatibilities.iter().any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    HaversineMiles,
    HaversineKm,
}

/// Row-major distance table keyed by location ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitMatrix {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<Distance>>,
}

pub enum DistanceSource<'a> {
    Matrix(&'a ExplicitMatrix),
    Coordinates(DistanceMetric),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub weight_unit: String,
    pub locations: Vec<Location>,
    pub orders: Vec<Order>,
    pub modes: Vec<TransportMode>,
    #[serde(default)]
    pub overlay: ConstraintOverlay,
    #[serde(default, skip_serializing_if = "is_default_metric")]
    pub distance_metric: DistanceMetric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_matrix: Option<ExplicitMatrix>,
}

fn is_default_metric(m: &DistanceMetric) -> bool {
    *m == DistanceMetric::Euclidean
}

impl Instance {
    pub fn distance_source(&self) -> DistanceSource<'_> {
        match &self.distance_matrix {
            Some(m) => DistanceSource::Matrix(m),
            None => DistanceSource::Coordinates(self.distance_metric),
        }
    }

    pub fn from_json(text: &str) -> Result<Instance, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}
