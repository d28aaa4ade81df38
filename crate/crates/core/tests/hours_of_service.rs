use std::collections::BTreeSet;

use rvrp_core::feasibility::{validate, Verdict, Violation};
use rvrp_core::model::{
    Direction, Instance, Location, Minutes, Network, Order, Point, TimeWindow, Timestamp, TransportMode, Weight,
};

const H: i64 = 60;

/// A(0) -> B(300) -> C(600) at 50 per hour: two six-hour legs.
fn instance(slack: i64) -> Instance {
    let loc = |id: &str, x: f64| Location {
        id: id.into(),
        coordinates: Some(Point::new(x, 0.0)),
        region_tags: BTreeSet::new(),
    };
    let at = |t: i64| TimeWindow::new(Timestamp(t), Timestamp(t + slack));
    let order = |id: &str, to: &str, due: i64| Order {
        id: id.into(),
        origin: "A".into(),
        destination: to.into(),
        weight: Weight::from_units(1.0),
        pickup_window: at(0),
        delivery_window: at(due),
        product_tags: BTreeSet::new(),
        position_requirement: None,
    };
    Instance {
        weight_unit: "pound".into(),
        locations: vec![loc("A", 0.0), loc("B", 300.0), loc("C", 600.0)],
        orders: vec![order("b", "B", 6 * H), order("c", "C", 12 * H)],
        modes: vec![TransportMode::basic("TL", 10.0, 2, 1.0, 50.0)],
        overlay: Default::default(),
        distance_metric: Default::default(),
        distance_matrix: None,
    }
}

fn check(slack: i64) -> Verdict {
    let net = Network::new(&instance(slack)).unwrap();
    let stops: Vec<_> = ["A", "B", "C"].iter().map(|s| net.location_ix(s).unwrap()).collect();
    let orders: Vec<_> = ["b", "c"].iter().map(|s| net.order_ix(s).unwrap()).collect();
    validate(&net, net.mode_ix("TL").unwrap(), Direction::OnePickupMultiDrop, &stops, &orders).unwrap()
}

#[test]
fn twelve_hours_without_slack_breaks_hos() {
    assert_eq!(check(0).violation(), Some(Violation::Hos));
}

#[test]
fn wide_windows_fit_one_rest() {
    let verdict = check(48 * H);
    let s = verdict.schedule().expect("feasible with wide windows");
    assert_eq!(s.rest_periods.len(), 1);
    let (rest_from, rest_to) = s.rest_periods[0];
    assert!(rest_to.since(rest_from) >= Minutes(10 * H));

    // six hours of driving on each side of the rest
    let before = rest_from.since(s.stops[0].departure);
    let after = s.stops[2].arrival.since(rest_to);
    assert!(before <= Minutes(11 * H) && after <= Minutes(11 * H), "{before:?} {after:?}");
    assert!(before <= Minutes(14 * H) && after <= Minutes(14 * H));
    assert_eq!(s.stops[2].arrival.since(s.stops[0].departure), Minutes(22 * H));
}
