use std::collections::{BTreeSet, HashMap};

use super::diagnostics::{validate_instance, Diagnostic};
use super::instance::{Hos, Instance, PairRule, Point, Position, TimeWindow};
use super::units::{Cost, Distance, Minutes, Weight};
use super::{LocationIx, ModeIx, OrderIx};
use crate::geometry::DistanceMatrix;

#[derive(Debug, Clone)]
pub struct OrderInfo {
    pub origin: LocationIx,
    pub destination: LocationIx,
    pub weight: Weight,
    pub pickup: TimeWindow,
    pub delivery: TimeWindow,
    /// Interned product tags, sorted.
    pub product_tags: Vec<u32>,
    pub position: Option<Position>,
}

#[derive(Debug, Clone)]
pub struct ModeInfo {
    pub capacity: Weight,
    pub max_drops: u32,
    pub max_pickups: u32,
    pub max_total_distance: Option<Distance>,
    pub max_oor_distance: Option<Distance>,
    pub max_oor_percent: Option<f64>,
    pub max_first_last_drop_distance: Option<Distance>,
    pub max_first_last_pickup_distance: Option<Distance>,
    pub default_rate: f64,
    /// (origin region tag, destination region tag, rate); first match wins.
    pub lanes: Vec<(u32, u32, f64)>,
    pub fixed_cost: Cost,
    pub fleet_cap: Option<u32>,
    /// Interned allowlist of region tags, sorted.
    pub serviceable_regions: Option<Vec<u32>>,
    pub forbidden_product_tags: Vec<u32>,
    pub average_speed: f64,
}

/// Region tags that appear in rules or lanes but on no location never match.
const NO_TAG: u32 = u32::MAX;

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(s.to_string()).or_insert(next)
    }

    fn lookup(&self, s: &str) -> u32 {
        self.ids.get(s).copied().unwrap_or(NO_TAG)
    }

    fn set(&mut self, tags: &BTreeSet<String>) -> Vec<u32> {
        let mut v: Vec<u32> = tags.iter().map(|t| self.intern(t)).collect();
        v.sort_unstable();
        v
    }
}

/// An instance compiled to dense indices with its distance table.
///
/// Immutable after construction; algorithms share it by reference.
#[derive(Debug, Clone)]
pub struct Network {
    instance: Instance,
    mirrored: bool,
    location_index: HashMap<String, LocationIx>,
    order_index: HashMap<String, OrderIx>,
    mode_index: HashMap<String, ModeIx>,
    location_regions: Vec<Vec<u32>>,
    orders: Vec<OrderInfo>,
    modes: Vec<ModeInfo>,
    matrix: DistanceMatrix,
    incompatible_tags: Vec<(u32, u32)>,
    region_rules: Vec<(u32, u32, PairRule)>,
    hos: Hos,
    service: Minutes,
}

impl Network {
    pub fn new(instance: &Instance) -> Result<Network, Vec<Diagnostic>> {
        Network::build(instance, false)
    }

    pub(crate) fn build(instance: &Instance, mirrored: bool) -> Result<Network, Vec<Diagnostic>> {
        let diagnostics = validate_instance(instance);
        if !diagnostics.is_empty() {
            return Err(diagnostics);
        }

        let location_index: HashMap<String, LocationIx> =
            instance.locations.iter().enumerate().map(|(i, l)| (l.id.clone(), LocationIx::new(i))).collect();

        let mut regions = Interner::default();
        let location_regions: Vec<Vec<u32>> = instance.locations.iter().map(|l| regions.set(&l.region_tags)).collect();

        let mut products = Interner::default();
        let orders: Vec<OrderInfo> = instance
            .orders
            .iter()
            .map(|o| OrderInfo {
                origin: location_index[&o.origin],
                destination: location_index[&o.destination],
                weight: o.weight,
                pickup: o.pickup_window,
                delivery: o.delivery_window,
                product_tags: products.set(&o.product_tags),
                position: o.position_requirement,
            })
            .collect();

        let modes = instance
            .modes
            .iter()
            .map(|m| ModeInfo {
                capacity: m.capacity,
                max_drops: m.max_drops,
                max_pickups: m.max_pickups,
                max_total_distance: m.max_total_distance,
                max_oor_distance: m.max_oor_distance,
                max_oor_percent: m.max_oor_percent,
                max_first_last_drop_distance: m.max_first_last_drop_distance,
                max_first_last_pickup_distance: m.max_first_last_pickup_distance,
                default_rate: m.cost_rate.default,
                lanes: m
                    .cost_rate
                    .lanes
                    .iter()
                    .map(|l| (regions.lookup(&l.origin_region), regions.lookup(&l.destination_region), l.rate))
                    .collect(),
                fixed_cost: m.fixed_cost,
                fleet_cap: m.fleet_cap,
                serviceable_regions: m.serviceable_regions.as_ref().map(|s| {
                    let mut v: Vec<u32> = s.iter().map(|t| regions.lookup(t)).filter(|&t| t != NO_TAG).collect();
                    v.sort_unstable();
                    v
                }),
                forbidden_product_tags: {
                    let mut v: Vec<u32> =
                        m.forbidden_product_tags.iter().map(|t| products.lookup(t)).filter(|&t| t != NO_TAG).collect();
                    v.sort_unstable();
                    v
                },
                average_speed: m.average_speed,
            })
            .collect();

        let mut incompatible_tags: Vec<(u32, u32)> = instance
            .overlay
            .order_incompatibilities
            .iter()
            .map(|(a, b)| (products.lookup(a), products.lookup(b)))
            .filter(|&(a, b)| a != NO_TAG && b != NO_TAG)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        incompatible_tags.sort_unstable();
        incompatible_tags.dedup();

        let region_rules = instance
            .overlay
            .regional_pair_rules
            .iter()
            .map(|r| (regions.lookup(&r.region_a), regions.lookup(&r.region_b), r.rule))
            .collect();

        let matrix = match &instance.distance_matrix {
            Some(explicit) => {
                let col: HashMap<&str, usize> =
                    explicit.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
                let perm: Vec<usize> = instance.locations.iter().map(|l| col[l.id.as_str()]).collect();
                DistanceMatrix::from_fn(instance.locations.len(), |a, b| explicit.rows[perm[a]][perm[b]])
            }
            None => {
                let points: Vec<Point> = instance.locations.iter().map(|l| l.coordinates.expect("validated")).collect();
                DistanceMatrix::from_points(&points, instance.distance_metric)
            }
        };

        Ok(Network {
            order_index: instance.orders.iter().enumerate().map(|(i, o)| (o.id.clone(), OrderIx::new(i))).collect(),
            mode_index: instance.modes.iter().enumerate().map(|(i, m)| (m.id.clone(), ModeIx::new(i))).collect(),
            location_index,
            location_regions,
            orders,
            modes,
            matrix,
            incompatible_tags,
            region_rules,
            hos: instance.overlay.hos,
            service: instance.overlay.service_minutes_per_stop,
            instance: instance.clone(),
            mirrored,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// True when this network was compiled from a mirrored instance (see [`crate::neighborhood::mirror`]).
    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        &self.matrix
    }

    #[inline]
    pub fn distance(&self, a: LocationIx, b: LocationIx) -> Distance {
        self.matrix.get(a, b)
    }

    pub fn num_locations(&self) -> usize {
        self.location_regions.len()
    }

    pub fn num_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn order(&self, o: OrderIx) -> &OrderInfo {
        &self.orders[o.index()]
    }

    pub fn orders(&self) -> impl Iterator<Item = (OrderIx, &OrderInfo)> {
        self.orders.iter().enumerate().map(|(i, o)| (OrderIx::new(i), o))
    }

    pub fn mode(&self, m: ModeIx) -> &ModeInfo {
        &self.modes[m.index()]
    }

    pub fn mode_ids(&self) -> impl Iterator<Item = ModeIx> {
        (0..self.modes.len()).map(ModeIx::new)
    }

    pub fn location_id(&self, l: LocationIx) -> &str {
        &self.instance.locations[l.index()].id
    }

    pub fn order_id(&self, o: OrderIx) -> &str {
        &self.instance.orders[o.index()].id
    }

    pub fn mode_id(&self, m: ModeIx) -> &str {
        &self.instance.modes[m.index()].id
    }

    pub fn location_ix(&self, id: &str) -> Option<LocationIx> {
        self.location_index.get(id).copied()
    }

    pub fn order_ix(&self, id: &str) -> Option<OrderIx> {
        self.order_index.get(id).copied()
    }

    pub fn mode_ix(&self, id: &str) -> Option<ModeIx> {
        self.mode_index.get(id).copied()
    }

    pub fn location_regions(&self, l: LocationIx) -> &[u32] {
        &self.location_regions[l.index()]
    }

    pub fn hos(&self) -> Hos {
        self.hos
    }

    pub fn service_minutes(&self) -> Minutes {
        self.service
    }

    pub fn has_incompatibilities(&self) -> bool {
        !self.incompatible_tags.is_empty()
    }

    pub fn tags_incompatible(&self, a: u32, b: u32) -> bool {
        self.incompatible_tags.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn region_rules(&self) -> &[(u32, u32, PairRule)] {
        &self.region_rules
    }

    /// Rate for a route starting at `origin` and ending at `last`.
    pub fn rate(&self, mode: ModeIx, origin: LocationIx, last: LocationIx) -> f64 {
        let m = self.mode(mode);
        let from = self.location_regions(origin);
        let to = self.location_regions(last);
        m.lanes
            .iter()
            .find(|(o, d, _)| from.binary_search(o).is_ok() && to.binary_search(d).is_ok())
            .map(|&(_, _, r)| r)
            .unwrap_or(m.default_rate)
    }

    /// Drive minutes for a distance at the mode's average speed, rounded up.
    pub fn drive_minutes(&self, mode: ModeIx, d: Distance) -> Minutes {
        let hours = d.units() / self.mode(mode).average_speed;
        Minutes(((hours * 60.0) - 1e-9).ceil().max(0.0) as i64)
    }
}
