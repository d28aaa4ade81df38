//! Domain types: instances, the compiled routing network, routes and solutions.

mod diagnostics;
mod instance;
mod network;
mod route;
pub mod units;

pub use diagnostics::{validate_instance, Diagnostic, Subject};
pub use instance::{
    ConstraintOverlay, CostRate, DistanceMetric, DistanceSource, ExplicitMatrix, Hos, Instance, LaneRate, Location,
    Order, PairRule, Point, Position, RegionalPairRule, TimeWindow, TransportMode,
};
pub use network::{ModeInfo, Network, OrderInfo};
pub use route::{route_cost, Direction, Route, RouteKey, Schedule, Solution, SolutionStatus, StopTimes};
pub use units::{Cost, Distance, Minutes, Timestamp, Weight};

macro_rules! index_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(u32);

        impl $name {
            pub fn new(i: usize) -> $name {
                $name(u32::try_from(i).expect("index fits in u32"))
            }

            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

index_type!(
    /// Position of a location in [`Network`] order.
    LocationIx
);
index_type!(
    /// Position of an order in [`Network`] order.
    OrderIx
);
index_type!(
    /// Position of a transport mode in [`Network`] order.
    ModeIx
);
