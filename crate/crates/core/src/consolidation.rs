//! Single-lane order consolidation.
//!
//! Orders sharing an origin and destination form an [`OdGroup`]. Consolidation
//! turns a group into one-drop candidate routes, either by enumerating every
//! feasible subset or by packing the group with bin-packing heuristics whose
//! bins are then validated as routes.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::validate_one_pickup;
use crate::model::{Direction, LocationIx, ModeIx, Network, OrderIx, Route, Weight};

/// Largest group [`enumerate_combos`] accepts without an explicit override.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdGroup {
    pub origin: LocationIx,
    pub destination: LocationIx,
    /// Sorted ascending.
    pub orders: Vec<OrderIx>,
}

/// All origin-destination groups of a network, ordered by (origin, destination).
pub fn od_groups(net: &Network) -> Vec<OdGroup> {
    let mut groups: BTreeMap<(LocationIx, LocationIx), Vec<OrderIx>> = BTreeMap::new();
    for (ix, o) in net.orders() {
        groups.entry((o.origin, o.destination)).or_default().push(ix);
    }
    groups.into_iter().map(|((origin, destination), orders)| OdGroup { origin, destination, orders }).collect()
}

/// One packed truckload from a single group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Combo {
    pub origin: LocationIx,
    pub destination: LocationIx,
    /// Sorted ascending.
    pub orders: Vec<OrderIx>,
    pub total_weight: Weight,
    /// Set when a single order exceeded the effective capacity it was packed against.
    pub oversize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Ffd,
    Bfd,
    Ffs,
    Singletons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsolidationConfig {
    pub methods: Vec<Method>,
    /// Capacity scaling factors in (0, 1].
    pub partial_container: Vec<f64>,
    /// Groups smaller than this are enumerated exactly regardless of `methods`.
    pub threshold: Option<usize>,
    pub seed: u64,
    pub enumeration_limit: usize,
    pub allow_large_enumeration: bool,
}

impl Default for ConsolidationConfig {
    fn default() -> Self {
        ConsolidationConfig {
            methods: vec![Method::Exact],
            partial_container: vec![1.0],
            threshold: None,
            seed: 0,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
            allow_large_enumeration: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsolidationError {
    #[error("no consolidation method configured")]
    NoMethods,
    #[error("Singletons cannot be the only consolidation method")]
    SingletonsAlone,
    #[error("partial container factor {0} is outside (0, 1]")]
    BadFactor(f64),
    #[error("group {origin}->{destination} has {size} orders, above the enumeration limit of {limit}")]
    GroupTooLarge { origin: String, destination: String, size: usize, limit: usize },
}

impl ConsolidationConfig {
    pub fn check(&self) -> Result<(), ConsolidationError> {
        if self.methods.is_empty() {
            return Err(ConsolidationError::NoMethods);
        }
        if self.methods.iter().all(|&m| m == Method::Singletons) {
            return Err(ConsolidationError::SingletonsAlone);
        }
        if let Some(&f) = self.partial_container.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(ConsolidationError::BadFactor(f));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidationStats {
    pub candidates: u64,
    pub infeasible: u64,
    pub emitted: u64,
}

impl std::ops::AddAssign for ConsolidationStats {
    fn add_assign(&mut self, o: ConsolidationStats) {
        self.candidates += o.candidates;
        self.infeasible += o.infeasible;
        self.emitted += o.emitted;
    }
}

fn one_drop_route(net: &Network, mode: ModeIx, group: &OdGroup, orders: Vec<OrderIx>) -> Option<Route> {
    let stops = vec![group.origin, group.destination];
    validate_one_pickup(net, mode, &stops, &orders).expect("group orders share the lane").into_route(
        mode,
        Direction::OnePickupMultiDrop,
        stops,
        orders,
    )
}

/// Every nonempty subset of the group whose one-drop route is feasible, in
/// lexicographic order of the (sorted) order tuples.
pub fn enumerate_combos(
    net: &Network,
    group: &OdGroup,
    mode: ModeIx,
    limit: Option<usize>,
) -> Result<(Vec<Route>, ConsolidationStats), ConsolidationError> {
    let size = group.orders.len();
    if let Some(limit) = limit {
        if size > limit {
            return Err(ConsolidationError::GroupTooLarge {
                origin: net.location_id(group.origin).to_string(),
                destination: net.location_id(group.destination).to_string(),
                size,
                limit,
            });
        }
    }
    let capacity = net.mode(mode).capacity;
    let weights: Vec<Weight> = group.orders.iter().map(|&o| net.order(o).weight).collect();

    struct Walk<'a> {
        net: &'a Network,
        mode: ModeIx,
        group: &'a OdGroup,
        weights: Vec<Weight>,
        capacity: Weight,
        current: Vec<OrderIx>,
        out: Vec<Route>,
        stats: ConsolidationStats,
    }

    impl Walk<'_> {
        fn descend(&mut self, start: usize, weight: Weight) {
            let size = self.weights.len();
            for i in start..size {
                let w = weight + self.weights[i];
                // every superset through `i` is over capacity too
                let subtree = 1u64 << (size - i - 1);
                if w > self.capacity {
                    self.stats.candidates += subtree;
                    self.stats.infeasible += subtree;
                    continue;
                }
                self.current.push(self.group.orders[i]);
                self.stats.candidates += 1;
                match one_drop_route(self.net, self.mode, self.group, self.current.clone()) {
                    Some(r) => {
                        self.stats.emitted += 1;
                        self.out.push(r);
                    }
                    None => self.stats.infeasible += 1,
                }
                self.descend(i + 1, w);
                self.current.pop();
            }
        }
    }

    let mut walk = Walk {
        net,
        mode,
        group,
        weights,
        capacity,
        current: Vec::with_capacity(size),
        out: Vec::new(),
        stats: ConsolidationStats::default(),
    };
    walk.descend(0, Weight::ZERO);
    Ok((walk.out, walk.stats))
}

struct Bin {
    residual: Weight,
    orders: Vec<OrderIx>,
    oversize: bool,
}

/// Packs `items` in order. `preference` lists the bins with weight room for an
/// item, most preferred first; the item goes to the first of those `admits`.
fn pack(
    net: &Network,
    group: &OdGroup,
    items: &[OrderIx],
    capacity: Weight,
    preference: fn(&[Bin], Weight) -> Vec<usize>,
    admits: &dyn Fn(&[OrderIx], OrderIx) -> bool,
) -> Vec<Combo> {
    let mut bins: Vec<Bin> = Vec::new();
    for &o in items {
        let w = net.order(o).weight;
        if w > capacity {
            bins.push(Bin { residual: Weight::ZERO, orders: vec![o], oversize: true });
            continue;
        }
        match preference(&bins, w).into_iter().find(|&i| admits(&bins[i].orders, o)) {
            Some(i) => {
                bins[i].residual -= w;
                bins[i].orders.push(o);
            }
            None => bins.push(Bin { residual: capacity - w, orders: vec![o], oversize: false }),
        }
    }
    bins.into_iter()
        .map(|mut b| {
            b.orders.sort_unstable();
            Combo {
                origin: group.origin,
                destination: group.destination,
                total_weight: b.orders.iter().map(|&o| net.order(o).weight).sum(),
                orders: b.orders,
                oversize: b.oversize,
            }
        })
        .collect()
}

fn with_room(bins: &[Bin], w: Weight) -> impl Iterator<Item = (usize, &Bin)> {
    bins.iter().enumerate().filter(move |(_, b)| !b.oversize && b.residual >= w)
}

fn first_fit(bins: &[Bin], w: Weight) -> Vec<usize> {
    with_room(bins, w).map(|(i, _)| i).collect()
}

fn best_fit(bins: &[Bin], w: Weight) -> Vec<usize> {
    let mut v: Vec<(Weight, usize)> = with_room(bins, w).map(|(i, b)| (b.residual - w, i)).collect();
    v.sort_unstable();
    v.into_iter().map(|(_, i)| i).collect()
}

fn any_bin(_: &[OrderIx], _: OrderIx) -> bool {
    true
}

fn decreasing(net: &Network, group: &OdGroup) -> Vec<OrderIx> {
    let mut items = group.orders.clone();
    items.sort_by_key(|&o| (std::cmp::Reverse(net.order(o).weight), o));
    items
}

/// First fit decreasing: heaviest first, each into the lowest-indexed bin with room.
pub fn ffd(net: &Network, group: &OdGroup, effective_capacity: Weight) -> Vec<Combo> {
    pack(net, group, &decreasing(net, group), effective_capacity, first_fit, &any_bin)
}

/// Best fit decreasing: heaviest first, each into the bin it leaves tightest.
pub fn bfd(net: &Network, group: &OdGroup, effective_capacity: Weight) -> Vec<Combo> {
    pack(net, group, &decreasing(net, group), effective_capacity, best_fit, &any_bin)
}

/// First fit over a seeded shuffle of the group.
pub fn ffs(net: &Network, group: &OdGroup, effective_capacity: Weight, seed: u64) -> Vec<Combo> {
    pack(net, group, &shuffled(group, seed), effective_capacity, first_fit, &any_bin)
}

fn shuffled(group: &OdGroup, seed: u64) -> Vec<OrderIx> {
    let mut items = group.orders.clone();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    items
}

/// The packing heuristics as the pipeline runs them: an order only joins a bin
/// whose one-drop route stays feasible, so time windows and other lane
/// constraints shape the bins as well as weight.
fn feasible_packing(
    net: &Network,
    group: &OdGroup,
    mode: ModeIx,
    method: Method,
    effective_capacity: Weight,
    seed: u64,
) -> Vec<Combo> {
    let admits = |bin: &[OrderIx], o: OrderIx| {
        let mut orders = bin.to_vec();
        orders.push(o);
        orders.sort_unstable();
        one_drop_route(net, mode, group, orders).is_some()
    };
    match method {
        Method::Ffd => pack(net, group, &decreasing(net, group), effective_capacity, first_fit, &admits),
        Method::Bfd => pack(net, group, &decreasing(net, group), effective_capacity, best_fit, &admits),
        Method::Ffs => pack(net, group, &shuffled(group, seed), effective_capacity, first_fit, &admits),
        Method::Singletons => singletons(net, group),
        Method::Exact => unreachable!("enumerated separately"),
    }
}

pub fn singletons(net: &Network, group: &OdGroup) -> Vec<Combo> {
    group
        .orders
        .iter()
        .map(|&o| Combo {
            origin: group.origin,
            destination: group.destination,
            orders: vec![o],
            total_weight: net.order(o).weight,
            oversize: false,
        })
        .collect()
}

/// Per-group shuffle seed, independent of processing order.
pub(crate) fn group_seed(seed: u64, mode: ModeIx, group: &OdGroup) -> u64 {
    let mut z = seed
        ^ (group.origin.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (group.destination.index() as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (mode.index() as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Validates a packed order set once; returns false if it was new and infeasible.
fn emit(
    net: &Network,
    group: &OdGroup,
    mode: ModeIx,
    seen: &mut HashSet<Vec<OrderIx>>,
    orders: Vec<OrderIx>,
    routes: &mut Vec<Route>,
    stats: &mut ConsolidationStats,
) -> bool {
    if !seen.insert(orders.clone()) {
        return true;
    }
    stats.candidates += 1;
    match one_drop_route(net, mode, group, orders) {
        Some(r) => {
            stats.emitted += 1;
            routes.push(r);
            true
        }
        None => {
            stats.infeasible += 1;
            false
        }
    }
}

/// Runs the configured methods on one group and returns the feasible one-drop routes.
///
/// Heuristic bins only grow while their route stays feasible. Packings are
/// deduplicated by order set and re-validated at full capacity. A bin that
/// still fails (an order infeasible even alone) is replaced by its feasible
/// singletons, so every order with a feasible singleton route stays covered.
pub fn consolidate(
    net: &Network,
    group: &OdGroup,
    mode: ModeIx,
    config: &ConsolidationConfig,
) -> Result<(Vec<Route>, ConsolidationStats), ConsolidationError> {
    config.check()?;
    let limit = (!config.allow_large_enumeration).then_some(config.enumeration_limit);
    if matches!(config.threshold, Some(t) if group.orders.len() < t) {
        return enumerate_combos(net, group, mode, limit);
    }

    let capacity = net.mode(mode).capacity;
    let mut routes = Vec::new();
    let mut stats = ConsolidationStats::default();
    let mut seen: HashSet<Vec<OrderIx>> = HashSet::new();

    for &method in &config.methods {
        if method == Method::Exact {
            let (exact, s) = enumerate_combos(net, group, mode, limit)?;
            for r in exact {
                if seen.insert(r.orders.clone()) {
                    routes.push(r);
                }
            }
            stats += s;
            continue;
        }
        for &factor in &config.partial_container {
            let effective = Weight((capacity.milli() as f64 * factor).floor() as i64);
            let combos = feasible_packing(net, group, mode, method, effective, group_seed(config.seed, mode, group));
            for c in combos {
                let single = c.orders.len() == 1;
                if !emit(net, group, mode, &mut seen, c.orders.clone(), &mut routes, &mut stats) && !single {
                    for o in c.orders {
                        emit(net, group, mode, &mut seen, vec![o], &mut routes, &mut stats);
                    }
                }
            }
            if method == Method::Singletons {
                break;
            }
        }
    }
    Ok((routes, stats))
}
