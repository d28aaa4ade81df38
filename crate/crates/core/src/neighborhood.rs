//! Multi-drop route extension.
//!
//! Routes grow by appending one destination at a time: a feasible route with
//! `M - 1` drops is combined with every one-drop combo from the same origin
//! whose destination is not yet on the route. The exact search tries every such
//! destination; the restricted searches only try the destinations a
//! [`NeighborIndex`] lists for the route's current last stop.
//!
//! Multi-pickup routes are generated on a mirrored instance (see
//! [`mirror_instance`]) and mapped back with [`unmirror_route`].

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::feasibility::{validate_one_pickup, Violation};
use crate::geometry::pairwise_oor;
use crate::model::{
    Direction, Distance, ExplicitMatrix, Instance, LocationIx, Minutes, ModeIx, Network, Order, OrderIx, Route,
    TimeWindow, Timestamp, TransportMode, Weight,
};

// ---------------------------------------------------------------------------
// Mirroring

fn mirror_window(w: TimeWindow, service: Minutes) -> TimeWindow {
    TimeWindow::new(Timestamp(-(w.latest.0 + service.0)), Timestamp(-(w.earliest.0 + service.0)))
}

/// Reverses the direction of every order, lane and distance so that
/// multi-pickup routes become one-pickup routes.
///
/// Time is reversed too: a window `[e, l]` on service start becomes
/// `[-(l + s), -(e + s)]`, where `s` is the per-stop service time. Mirroring
/// twice returns the original instance.
pub fn mirror_instance(instance: &Instance) -> Instance {
    let service = instance.overlay.service_minutes_per_stop;
    let orders = instance
        .orders
        .iter()
        .map(|o| Order {
            id: o.id.clone(),
            origin: o.destination.clone(),
            destination: o.origin.clone(),
            weight: o.weight,
            pickup_window: mirror_window(o.delivery_window, service),
            delivery_window: mirror_window(o.pickup_window, service),
            product_tags: o.product_tags.clone(),
            position_requirement: o.position_requirement.map(|p| p.flipped()),
        })
        .collect();
    let modes = instance
        .modes
        .iter()
        .map(|m| {
            let mut lanes = m.cost_rate.lanes.clone();
            for lane in &mut lanes {
                std::mem::swap(&mut lane.origin_region, &mut lane.destination_region);
            }
            let mut cost_rate = m.cost_rate.clone();
            cost_rate.lanes = lanes;
            TransportMode {
                max_drops: m.max_pickups,
                max_pickups: m.max_drops,
                max_first_last_drop_distance: m.max_first_last_pickup_distance,
                max_first_last_pickup_distance: m.max_first_last_drop_distance,
                cost_rate,
                ..m.clone()
            }
        })
        .collect();
    let distance_matrix = instance.distance_matrix.as_ref().map(|m| ExplicitMatrix {
        ids: m.ids.clone(),
        rows: (0..m.rows.len()).map(|i| m.rows.iter().map(|r| r[i]).collect()).collect(),
    });
    Instance {
        weight_unit: instance.weight_unit.clone(),
        locations: instance.locations.clone(),
        orders,
        modes,
        overlay: instance.overlay.clone(),
        distance_metric: instance.distance_metric,
        distance_matrix,
    }
}

/// The network of the mirrored instance.
pub fn mirror_network(net: &Network) -> Network {
    Network::build(&mirror_instance(net.instance()), !net.is_mirrored()).expect("mirroring preserves validity")
}

/// Maps a one-pickup route found on `mirrored` back to a multi-pickup route on the real network.
///
/// Distances and cost carry over unchanged: the reversed stop sequence over the
/// transposed matrix has the same legs, and lanes were swapped with it.
pub fn unmirror_route(real: &Network, mut route: Route) -> Route {
    route.stops.reverse();
    route.direction = Direction::MultiPickupOneDrop;
    route.schedule = route.schedule.unmirror(real.service_minutes());
    route
}

// ---------------------------------------------------------------------------
// Combos

/// One-drop combos of a single mode, grouped by origin and destination.
#[derive(Debug, Clone, Default)]
pub struct ComboTable {
    combos: Vec<Route>,
    /// origin -> destinations ascending, each with its combo indices and lightest combo weight
    by_origin: HashMap<LocationIx, Vec<(LocationIx, Vec<usize>, Weight)>>,
}

impl ComboTable {
    /// `combos` must be feasible one-drop routes of one mode.
    pub fn new(combos: Vec<Route>) -> ComboTable {
        let mut by_origin: HashMap<LocationIx, Vec<(LocationIx, Vec<usize>, Weight)>> = HashMap::new();
        for (i, c) in combos.iter().enumerate() {
            debug_assert_eq!(c.drops(), 1);
            let dests = by_origin.entry(c.origin()).or_default();
            let dest = c.last_stop();
            match dests.binary_search_by_key(&dest, |e| e.0) {
                Ok(p) => {
                    dests[p].1.push(i);
                    dests[p].2 = dests[p].2.min(c.weight);
                }
                Err(p) => dests.insert(p, (dest, vec![i], c.weight)),
            }
        }
        ComboTable { combos, by_origin }
    }

    pub fn combos(&self) -> &[Route] {
        &self.combos
    }

    pub fn into_combos(self) -> Vec<Route> {
        self.combos
    }

    pub fn destinations(&self, origin: LocationIx) -> impl Iterator<Item = LocationIx> + '_ {
        self.lanes(origin).iter().map(|e| e.0)
    }

    fn lanes(&self, origin: LocationIx) -> &[(LocationIx, Vec<usize>, Weight)] {
        self.by_origin.get(&origin).map(Vec::as_slice).unwrap_or(&[])
    }

    fn lane(&self, origin: LocationIx, dest: LocationIx) -> Option<&(LocationIx, Vec<usize>, Weight)> {
        let lanes = self.lanes(origin);
        lanes.binary_search_by_key(&dest, |e| e.0).ok().map(|p| &lanes[p])
    }
}

// ---------------------------------------------------------------------------
// Partial routes and pruning

/// Running totals of a route under construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRoute {
    pub mode: ModeIx,
    pub origin: LocationIx,
    pub drops: Vec<LocationIx>,
    /// Orders of the combo chosen at each drop.
    pub combos: Vec<Vec<OrderIx>>,
    pub weight: Weight,
    pub distance: Distance,
    pub drive: Minutes,
}

impl PartialRoute {
    pub fn start(net: &Network, mode: ModeIx, origin: LocationIx) -> PartialRoute {
        debug_assert!(origin.index() < net.num_locations());
        PartialRoute {
            mode,
            origin,
            drops: Vec::new(),
            combos: Vec::new(),
            weight: Weight::ZERO,
            distance: Distance::ZERO,
            drive: Minutes(0),
        }
    }

    pub fn last_stop(&self) -> LocationIx {
        self.drops.last().copied().unwrap_or(self.origin)
    }

    /// Appends a drop with the orders delivered there.
    pub fn push(&self, net: &Network, dest: LocationIx, orders: &[OrderIx]) -> PartialRoute {
        let leg = net.distance(self.last_stop(), dest);
        let mut next = self.clone();
        next.drops.push(dest);
        next.combos.push(orders.to_vec());
        next.weight += orders.iter().map(|&o| net.order(o).weight).sum();
        next.distance += leg;
        next.drive = next.drive + net.drive_minutes(self.mode, leg);
        next
    }

    /// Rebuilds the partial route of a one-pickup route from scratch.
    pub fn from_route(net: &Network, route: &Route) -> PartialRoute {
        let mut p = PartialRoute::start(net, route.mode, route.origin());
        for &d in &route.stops[1..] {
            let at: Vec<OrderIx> = route.orders.iter().copied().filter(|&o| net.order(o).destination == d).collect();
            p = p.push(net, d, &at);
        }
        p
    }

    /// Monotone constraints that no appended drop from `table` can satisfy.
    pub fn frontier(&self, net: &Network, table: &ComboTable) -> Vec<Violation> {
        let m = net.mode(self.mode);
        let mut blocked = Vec::new();
        if self.weight > m.capacity {
            blocked.push(Violation::Capacity);
        }
        if self.drops.len() as u32 >= m.max_drops {
            blocked.push(Violation::MaxStops);
        }
        if m.max_total_distance.is_some_and(|cap| self.distance > cap) {
            blocked.push(Violation::TotalDistance);
        }

        let last = self.last_stop();
        let mut lightest: Option<Weight> = None;
        let mut shortest: Option<Distance> = None;
        for (dest, _, w) in table.lanes(self.origin) {
            if *dest == self.origin || self.drops.contains(dest) {
                continue;
            }
            lightest = Some(lightest.map_or(*w, |l| l.min(*w)));
            let leg = net.distance(last, *dest);
            shortest = Some(shortest.map_or(leg, |s| s.min(leg)));
        }
        match (lightest, shortest) {
            (Some(w), Some(leg)) => {
                if self.weight + w > m.capacity && !blocked.contains(&Violation::Capacity) {
                    blocked.push(Violation::Capacity);
                }
                if m.max_total_distance.is_some_and(|cap| self.distance + leg > cap)
                    && !blocked.contains(&Violation::TotalDistance)
                {
                    blocked.push(Violation::TotalDistance);
                }
            }
            // no destination left to append
            _ => {
                if !blocked.contains(&Violation::MaxStops) {
                    blocked.push(Violation::MaxStops);
                }
            }
        }
        blocked
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prune {
    Continue,
    Stop,
}

/// Whether any appended drop could still yield a feasible route.
pub fn prune_check(partial: &PartialRoute, net: &Network, table: &ComboTable) -> Prune {
    if partial.frontier(net, table).is_empty() {
        Prune::Continue
    } else {
        Prune::Stop
    }
}

// ---------------------------------------------------------------------------
// Neighbor indexes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborStrategy {
    /// K nearest destinations to the current last stop.
    Distance,
    /// K destinations with the smallest detour after the current last stop.
    Oor,
}

/// Per-key candidate lists, read-only after construction.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    pub strategy: NeighborStrategy,
    pub k: usize,
    /// Distance lists are keyed by `(last, last)`; detour lists by `(origin, last)`.
    lists: HashMap<(LocationIx, LocationIx), Vec<LocationIx>>,
}

impl NeighborIndex {
    pub fn lookup(&self, origin: LocationIx, last: LocationIx) -> &[LocationIx] {
        let key = match self.strategy {
            NeighborStrategy::Distance => (last, last),
            NeighborStrategy::Oor => (origin, last),
        };
        self.lists.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn k_smallest(net: &Network, mut ranked: Vec<(Distance, LocationIx)>, k: usize) -> Vec<LocationIx> {
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| net.location_id(a.1).cmp(net.location_id(b.1))));
    ranked.truncate(k);
    ranked.into_iter().map(|(_, l)| l).collect()
}

/// Builds neighbor lists over the destinations of `net`'s orders.
///
/// The distance strategy ranks, for every location, all other destinations by
/// distance. The detour strategy ranks, for each origin `O` and each of its
/// destinations `A`, the other destinations `B` of `O` by the detour of
/// `O -> A -> B` over `O -> B`. Ties go to the smaller location id.
pub fn build_neighbor_index(net: &Network, strategy: NeighborStrategy, k: usize) -> NeighborIndex {
    assert!(k >= 1, "neighbor count must be positive");
    let mut dests_of: HashMap<LocationIx, Vec<LocationIx>> = HashMap::new();
    let mut all_dests: Vec<LocationIx> = Vec::new();
    for (_, o) in net.orders() {
        let d = dests_of.entry(o.origin).or_default();
        if !d.contains(&o.destination) {
            d.push(o.destination);
        }
        if !all_dests.contains(&o.destination) {
            all_dests.push(o.destination);
        }
    }
    let mut lists = HashMap::new();
    match strategy {
        NeighborStrategy::Distance => {
            for a in (0..net.num_locations()).map(LocationIx::new) {
                let ranked = all_dests.iter().filter(|&&b| b != a).map(|&b| (net.distance(a, b), b)).collect();
                lists.insert((a, a), k_smallest(net, ranked, k));
            }
        }
        NeighborStrategy::Oor => {
            for (&origin, dests) in &dests_of {
                for &a in dests {
                    let ranked = dests
                        .iter()
                        .filter(|&&b| b != a)
                        .map(|&b| (pairwise_oor(origin, a, b, net.matrix()).expect("indices in range"), b))
                        .collect();
                    lists.insert((origin, a), k_smallest(net, ranked, k));
                }
            }
        }
    }
    NeighborIndex { strategy, k, lists }
}

// ---------------------------------------------------------------------------
// Extension

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionStats {
    pub attempted: u64,
    pub infeasible: u64,
    pub pruned_routes: u64,
    pub emitted: u64,
}

impl std::ops::AddAssign for ExtensionStats {
    fn add_assign(&mut self, o: ExtensionStats) {
        self.attempted += o.attempted;
        self.infeasible += o.infeasible;
        self.pruned_routes += o.pruned_routes;
        self.emitted += o.emitted;
    }
}

fn merge_sorted(a: &[OrderIx], b: &[OrderIx]) -> Vec<OrderIx> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn extend_one(
    net: &Network,
    route: &Route,
    table: &ComboTable,
    candidates: &[LocationIx],
    prune: bool,
) -> (Vec<Route>, ExtensionStats) {
    let mut stats = ExtensionStats::default();
    if prune && prune_check(&PartialRoute::from_route(net, route), net, table) == Prune::Stop {
        stats.pruned_routes += 1;
        return (Vec::new(), stats);
    }
    let capacity = net.mode(route.mode).capacity;
    let mut out = Vec::new();
    for &dest in candidates {
        if route.stops.contains(&dest) {
            continue;
        }
        let Some((_, combo_ixs, _)) = table.lane(route.origin(), dest) else { continue };
        for &ci in combo_ixs {
            let combo = &table.combos[ci];
            stats.attempted += 1;
            if route.weight + combo.weight > capacity {
                stats.infeasible += 1;
                continue;
            }
            let mut stops = route.stops.clone();
            stops.push(dest);
            let orders = merge_sorted(&route.orders, &combo.orders);
            match validate_one_pickup(net, route.mode, &stops, &orders)
                .expect("extension keeps routes well formed")
                .into_route(route.mode, Direction::OnePickupMultiDrop, stops, orders)
            {
                Some(r) => {
                    stats.emitted += 1;
                    out.push(r);
                }
                None => stats.infeasible += 1,
            }
        }
    }
    (out, stats)
}

fn extend_all(
    net: &Network,
    routes: &[Route],
    table: &ComboTable,
    prune: bool,
    candidates: impl Fn(&Route) -> Vec<LocationIx> + Sync,
) -> (Vec<Route>, ExtensionStats) {
    let parts: Vec<(Vec<Route>, ExtensionStats)> =
        routes.par_iter().map(|r| extend_one(net, r, table, &candidates(r), prune)).collect();
    let mut out = Vec::new();
    let mut stats = ExtensionStats::default();
    for (rs, s) in parts {
        out.extend(rs);
        stats += s;
    }
    (out, stats)
}

/// Appends every same-origin destination not yet on the route, with each of its combos.
///
/// Output order is deterministic: input route order, then destination index, then combo order.
pub fn exact_extend(net: &Network, routes: &[Route], table: &ComboTable, prune: bool) -> (Vec<Route>, ExtensionStats) {
    extend_all(net, routes, table, prune, |r| table.destinations(r.origin()).collect())
}

/// As [`exact_extend`], but only destinations listed by one of `indexes` for the
/// route's last stop are tried. Lists from several indexes are unioned.
pub fn restricted_extend(
    net: &Network,
    routes: &[Route],
    table: &ComboTable,
    indexes: &[NeighborIndex],
    prune: bool,
) -> (Vec<Route>, ExtensionStats) {
    extend_all(net, routes, table, prune, |r| {
        let mut c: Vec<LocationIx> =
            indexes.iter().flat_map(|ix| ix.lookup(r.origin(), r.last_stop()).iter().copied()).collect();
        c.sort_unstable();
        c.dedup();
        c
    })
}
