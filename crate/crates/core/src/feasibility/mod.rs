//! Route validation against the full constraint catalog.
//!
//! [`validate`] is the single gate every generated route passes through. Checks
//! run in a fixed order (structural, capacity, stop counts, distance family,
//! compatibility family, scheduling) so the reported violation is stable.

mod schedule;

pub use schedule::{check_schedule, simulate};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distances_from_totals, RouteDistances};
use crate::model::{
    route_cost, Cost, Direction, Distance, LocationIx, Minutes, ModeIx, Network, OrderIx, PairRule, Position, Route,
    Schedule, TimeWindow, Weight,
};
use crate::neighborhood::mirror_network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    Capacity,
    MaxStops,
    TotalDistance,
    OorDistance,
    OorPercent,
    FirstLastDistance,
    Incompatibility,
    Regional,
    Position,
    RegionService,
    TimeWindows,
    Hos,
}

impl Violation {
    /// Evaluation order used by [`validate`].
    pub const CHECK_ORDER: [Violation; 12] = [
        Violation::Capacity,
        Violation::MaxStops,
        Violation::TotalDistance,
        Violation::OorDistance,
        Violation::OorPercent,
        Violation::FirstLastDistance,
        Violation::Incompatibility,
        Violation::Regional,
        Violation::Position,
        Violation::RegionService,
        Violation::TimeWindows,
        Violation::Hos,
    ];

    /// Whether a route violating this class stays in violation when a stop (with its
    /// orders) is appended at the end.
    pub fn monotone_under_extension(self) -> bool {
        matches!(
            self,
            Violation::Capacity
                | Violation::MaxStops
                | Violation::TotalDistance
                | Violation::Incompatibility
                | Violation::RegionService
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Violation::Capacity => "capacity",
            Violation::MaxStops => "max_stops",
            Violation::TotalDistance => "total_distance",
            Violation::OorDistance => "oor_distance",
            Violation::OorPercent => "oor_percent",
            Violation::FirstLastDistance => "first_last_distance",
            Violation::Incompatibility => "incompatibility",
            Violation::Regional => "regional",
            Violation::Position => "position",
            Violation::RegionService => "region_service",
            Violation::TimeWindows => "time_windows",
            Violation::Hos => "hos",
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("a route needs at least two stops")]
    TooFewStops,
    #[error("a route needs at least one order")]
    NoOrders,
    #[error("index out of range")]
    UnknownIndex,
    #[error("stop {0} appears twice")]
    RepeatedStop(usize),
    #[error("order {0} appears twice")]
    RepeatedOrder(usize),
    #[error("order {0} does not touch the route's stops in its direction")]
    OrderOffRoute(usize),
    #[error("stop {0} serves no order")]
    IdleStop(usize),
}

/// Outcome of validating a route.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Feasible(Box<FeasibleRoute>),
    Infeasible(Violation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRoute {
    pub weight: Weight,
    pub distances: RouteDistances,
    pub schedule: Schedule,
    pub cost: Cost,
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible(_))
    }

    pub fn violation(&self) -> Option<Violation> {
        match self {
            Verdict::Feasible(_) => None,
            Verdict::Infeasible(v) => Some(*v),
        }
    }

    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            Verdict::Feasible(f) => Some(&f.schedule),
            Verdict::Infeasible(_) => None,
        }
    }

    pub fn into_route(
        self,
        mode: ModeIx,
        direction: Direction,
        stops: Vec<LocationIx>,
        orders: Vec<OrderIx>,
    ) -> Option<Route> {
        match self {
            Verdict::Feasible(f) => Some(Route {
                mode,
                direction,
                stops,
                orders,
                weight: f.weight,
                distances: f.distances,
                schedule: f.schedule,
                cost: f.cost,
            }),
            Verdict::Infeasible(_) => None,
        }
    }
}

/// Validates a route given in its real stop order.
///
/// Multi-pickup routes are checked by mirroring the network, so the returned
/// schedule for them is the time reversal of an earliest-start plan (pickups as
/// late as the drop allows).
pub fn validate(
    net: &Network,
    mode: ModeIx,
    direction: Direction,
    stops: &[LocationIx],
    orders: &[OrderIx],
) -> Result<Verdict, InputError> {
    match direction {
        Direction::OnePickupMultiDrop => validate_one_pickup(net, mode, stops, orders),
        Direction::MultiPickupOneDrop => {
            let mirrored = mirror_network(net);
            let reversed: Vec<LocationIx> = stops.iter().rev().copied().collect();
            let verdict = validate_one_pickup(&mirrored, mode, &reversed, orders)?;
            Ok(match verdict {
                Verdict::Feasible(mut f) => {
                    f.schedule = f.schedule.unmirror(net.service_minutes());
                    Verdict::Feasible(f)
                }
                v => v,
            })
        }
    }
}

/// Validates a one-pickup route: `stops[0]` is the shared origin, the rest are drops.
pub fn validate_one_pickup(
    net: &Network,
    mode: ModeIx,
    stops: &[LocationIx],
    orders: &[OrderIx],
) -> Result<Verdict, InputError> {
    let ctx = RouteContext::new(net, mode, stops, orders)?;
    for class in Violation::CHECK_ORDER {
        if class == Violation::TimeWindows {
            return Ok(match ctx.schedule() {
                Ok(schedule) => Verdict::Feasible(Box::new(FeasibleRoute {
                    weight: ctx.weight,
                    distances: ctx.distances,
                    cost: route_cost(net, mode, stops, ctx.distances.total_distance),
                    schedule,
                })),
                Err(v) => Verdict::Infeasible(v),
            });
        }
        if !ctx.holds(class) {
            return Ok(Verdict::Infeasible(class));
        }
    }
    unreachable!("scheduling is the last check")
}

/// Evaluates one constraint class in isolation on a one-pickup route.
pub fn constraint_holds(
    net: &Network,
    mode: ModeIx,
    stops: &[LocationIx],
    orders: &[OrderIx],
    class: Violation,
) -> Result<bool, InputError> {
    let ctx = RouteContext::new(net, mode, stops, orders)?;
    Ok(match class {
        Violation::TimeWindows => ctx.schedule() != Err(Violation::TimeWindows),
        Violation::Hos => ctx.schedule() != Err(Violation::Hos),
        c => ctx.holds(c),
    })
}

/// Earliest-start schedule for a one-pickup route, or the binding scheduling violation.
pub fn schedule_route(
    net: &Network,
    mode: ModeIx,
    stops: &[LocationIx],
    orders: &[OrderIx],
) -> Result<Result<Schedule, Violation>, InputError> {
    Ok(RouteContext::new(net, mode, stops, orders)?.schedule())
}

struct RouteContext<'a> {
    net: &'a Network,
    mode: ModeIx,
    stops: &'a [LocationIx],
    orders: &'a [OrderIx],
    weight: Weight,
    distances: RouteDistances,
}

impl<'a> RouteContext<'a> {
    fn new(
        net: &'a Network,
        mode: ModeIx,
        stops: &'a [LocationIx],
        orders: &'a [OrderIx],
    ) -> Result<RouteContext<'a>, InputError> {
        if stops.len() < 2 {
            return Err(InputError::TooFewStops);
        }
        if orders.is_empty() {
            return Err(InputError::NoOrders);
        }
        if mode.index() >= net.num_modes()
            || stops.iter().any(|s| s.index() >= net.num_locations())
            || orders.iter().any(|o| o.index() >= net.num_orders())
        {
            return Err(InputError::UnknownIndex);
        }
        for (i, s) in stops.iter().enumerate() {
            if stops[..i].contains(s) {
                return Err(InputError::RepeatedStop(s.index()));
            }
        }
        for (i, o) in orders.iter().enumerate() {
            if orders[..i].contains(o) {
                return Err(InputError::RepeatedOrder(o.index()));
            }
        }
        let origin = stops[0];
        let drops = &stops[1..];
        for &o in orders {
            let info = net.order(o);
            if info.origin != origin || !drops.contains(&info.destination) {
                return Err(InputError::OrderOffRoute(o.index()));
            }
        }
        for &d in drops {
            if !orders.iter().any(|&o| net.order(o).destination == d) {
                return Err(InputError::IdleStop(d.index()));
            }
        }

        let weight: Weight = orders.iter().map(|&o| net.order(o).weight).sum();
        let total: Distance = stops.windows(2).map(|w| net.distance(w[0], w[1])).sum();
        let direct = net.distance(stops[0], stops[stops.len() - 1]);
        Ok(RouteContext { net, mode, stops, orders, weight, distances: distances_from_totals(total, direct) })
    }

    fn holds(&self, class: Violation) -> bool {
        let m = self.net.mode(self.mode);
        let d = &self.distances;
        match class {
            Violation::Capacity => self.weight <= m.capacity,
            Violation::MaxStops => (self.stops.len() - 1) as u32 <= m.max_drops && m.max_pickups >= 1,
            Violation::TotalDistance => m.max_total_distance.is_none_or(|cap| d.total_distance <= cap),
            Violation::OorDistance => m.max_oor_distance.is_none_or(|cap| d.oor_distance <= cap),
            Violation::OorPercent => m
                .max_oor_percent
                .is_none_or(|cap| d.oor_distance.milli() as f64 * 100.0 <= cap * d.direct_distance.milli() as f64),
            Violation::FirstLastDistance => m
                .max_first_last_drop_distance
                .is_none_or(|cap| self.net.distance(self.stops[1], self.stops[self.stops.len() - 1]) <= cap),
            Violation::Incompatibility => self.compatible(),
            Violation::Regional => self.regional_ok(),
            Violation::Position => self.positions_ok(),
            Violation::RegionService => m.serviceable_regions.as_ref().is_none_or(|allowed| {
                self.stops
                    .iter()
                    .all(|&s| self.net.location_regions(s).iter().any(|t| allowed.binary_search(t).is_ok()))
            }),
            Violation::TimeWindows | Violation::Hos => self.schedule().is_ok(),
        }
    }

    fn compatible(&self) -> bool {
        let m = self.net.mode(self.mode);
        if !m.forbidden_product_tags.is_empty()
            && self.orders.iter().any(|&o| {
                self.net.order(o).product_tags.iter().any(|t| m.forbidden_product_tags.binary_search(t).is_ok())
            })
        {
            return false;
        }
        if !self.net.has_incompatibilities() {
            return true;
        }
        for (i, &a) in self.orders.iter().enumerate() {
            for &b in &self.orders[i + 1..] {
                let (ta, tb) = (&self.net.order(a).product_tags, &self.net.order(b).product_tags);
                if ta.iter().any(|&x| tb.iter().any(|&y| self.net.tags_incompatible(x, y))) {
                    return false;
                }
            }
        }
        true
    }

    fn regional_ok(&self) -> bool {
        let rules = self.net.region_rules();
        if rules.is_empty() {
            return true;
        }
        let present = |tag: u32| self.stops.iter().any(|&s| self.net.location_regions(s).contains(&tag));
        // a same-region rule concerns pairing orders of that region with each other
        let paired_within = |tag: u32| {
            self.orders
                .iter()
                .filter(|&&o| {
                    let info = self.net.order(o);
                    self.net.location_regions(info.origin).contains(&tag)
                        || self.net.location_regions(info.destination).contains(&tag)
                })
                .count()
                >= 2
        };
        let mut decision = PairRule::Allow;
        for &(a, b, rule) in rules {
            let matched = if a == b { paired_within(a) } else { present(a) && present(b) };
            if matched {
                decision = rule;
            }
        }
        decision == PairRule::Allow
    }

    fn positions_ok(&self) -> bool {
        let first = self.stops[1];
        let last = self.stops[self.stops.len() - 1];
        self.orders.iter().all(|&o| {
            let info = self.net.order(o);
            match info.position {
                None => true,
                Some(Position::First) => info.destination == first,
                Some(Position::Last) => info.destination == last,
            }
        })
    }

    fn windows(&self) -> Option<Vec<TimeWindow>> {
        let mut windows = Vec::with_capacity(self.stops.len());
        let mut pickup: Option<TimeWindow> = None;
        for &o in self.orders {
            let w = self.net.order(o).pickup;
            pickup = Some(match pickup {
                None => w,
                Some(p) => p.intersect(w)?,
            });
        }
        windows.push(pickup?);
        for &stop in &self.stops[1..] {
            let mut at: Option<TimeWindow> = None;
            for &o in self.orders {
                let info = self.net.order(o);
                if info.destination == stop {
                    at = Some(match at {
                        None => info.delivery,
                        Some(p) => p.intersect(info.delivery)?,
                    });
                }
            }
            windows.push(at?);
        }
        Some(windows)
    }

    fn drives(&self) -> Vec<Minutes> {
        self.stops.windows(2).map(|w| self.net.drive_minutes(self.mode, self.net.distance(w[0], w[1]))).collect()
    }

    fn schedule(&self) -> Result<Schedule, Violation> {
        let windows = self.windows().ok_or(Violation::TimeWindows)?;
        simulate(&windows, &self.drives(), self.net.hos(), self.net.service_minutes())
    }
}

/// Per-stop windows and per-leg drive times.
pub type Timing = (Vec<TimeWindow>, Vec<Minutes>);

/// Stop windows and drive times of a one-pickup route, for independent schedule checks.
/// `None` when some stop's windows do not intersect.
pub fn route_timing(
    net: &Network,
    mode: ModeIx,
    stops: &[LocationIx],
    orders: &[OrderIx],
) -> Result<Option<Timing>, InputError> {
    let ctx = RouteContext::new(net, mode, stops, orders)?;
    Ok(ctx.windows().map(|w| (w, ctx.drives())))
}
