use std::collections::BTreeSet;

use super::*;
use crate::model::{Location, Order, Point, TimeWindow, Timestamp, TransportMode, Weight};

fn loc(id: &str, x: f64, y: f64) -> Location {
    Location { id: id.into(), coordinates: Some(Point::new(x, y)), region_tags: BTreeSet::new() }
}

fn order(id: &str, from: &str, to: &str, w: f64) -> Order {
    let wide = TimeWindow::new(Timestamp(0), Timestamp(100_000));
    Order {
        id: id.into(),
        origin: from.into(),
        destination: to.into(),
        weight: Weight::from_units(w),
        pickup_window: wide,
        delivery_window: wide,
        product_tags: BTreeSet::new(),
        position_requirement: None,
    }
}

fn figure_one(max_drops: u32) -> Instance {
    let mut orders: Vec<Order> = (0..5).map(|i| order(&format!("b{i}"), "A", "B", 1.0)).collect();
    orders.extend((0..3).map(|i| order(&format!("c{i}"), "A", "C", 1.0)));
    Instance {
        weight_unit: "pound".into(),
        locations: vec![loc("A", 0.0, 0.0), loc("B", 100.0, 0.0), loc("C", 0.0, 100.0)],
        orders,
        modes: vec![TransportMode::basic("TL", 1000.0, max_drops, 1.0, 1000.0)],
        overlay: Default::default(),
        distance_metric: Default::default(),
        distance_matrix: None,
    }
}

#[test]
fn exact_pool_on_two_destinations() {
    let out = run(&figure_one(2), &RunConfig::preset(Preset::Exact)).unwrap();
    assert_eq!(out.pool.count_by_drops(), BTreeMap::from([(1, 38), (2, 434)]));
    assert_eq!(out.solution.status, SolutionStatus::Optimal);
    // two direct trucks (100 + 100) beat one truck through both drops (100 + 141.421)
    assert_eq!(out.solution.selected_routes.len(), 2);
    assert_eq!(out.solution.total_cost, Cost(200_000));
}

#[test]
fn bkk_matches_exact_on_tiny_network() {
    let exact = run(&figure_one(2), &RunConfig::preset(Preset::Exact)).unwrap();
    let bkk = run(&figure_one(2), &RunConfig::preset(Preset::Bkk)).unwrap();
    assert_eq!(bkk.solution.total_cost, exact.solution.total_cost);
    assert!(bkk.pool.len() < exact.pool.len());
}

#[test]
fn single_drop_pool_is_consolidation_output() {
    let out = run(&figure_one(1), &RunConfig::preset(Preset::Exact)).unwrap();
    assert_eq!(out.pool.count_by_drops(), BTreeMap::from([(1, 38)]));
    assert!(out.pool.stats.extension.is_empty());
    assert_eq!(out.solution.total_cost, Cost(200_000));
}

#[test]
fn compare_against_itself_is_zero_gap() {
    let inst = figure_one(2);
    let reports = compare(
        &inst,
        &[RunConfig::preset(Preset::Exact), RunConfig::preset(Preset::Bfd)],
        &RunConfig::preset(Preset::Exact),
        5.0,
    )
    .unwrap();
    assert_eq!(reports[0].relative_gap, Some(0.0));
    assert_eq!(reports[1].relative_gap, Some(0.0));
    // the optimum here uses one-drop routes only
    assert_eq!(reports[2].relative_gap, Some(0.0));
    assert_eq!(reports[2].gap_flagged, Some(false));
}

#[test]
fn bfd_only_pays_for_missing_multi_drop_routes() {
    // B and C sit close together far from A: one two-drop truck beats two trucks.
    let mut inst = figure_one(2);
    inst.locations = vec![loc("A", 0.0, 0.0), loc("B", 100.0, 0.0), loc("C", 100.0, 5.0)];
    let reports = compare(&inst, &[RunConfig::preset(Preset::Bfd)], &RunConfig::preset(Preset::Exact), 5.0).unwrap();
    let gap = reports[1].relative_gap.unwrap();
    assert!(gap > 0.0, "{gap}");
    assert_eq!(reports[1].gap_flagged, Some(gap > 5.0));
    assert_eq!(reports[1].pool_by_drops.keys().copied().collect::<Vec<_>>(), vec![1]);
}

#[test]
fn uncoverable_orders_are_listed() {
    let mut inst = figure_one(2);
    inst.orders[2].weight = Weight::from_units(5000.0);
    match run(&inst, &RunConfig::preset(Preset::Exact)) {
        Err(PipelineError::Uncoverable(ids)) => assert_eq!(ids, vec!["b2".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fleet_cap_becomes_a_side_constraint() {
    let mut inst = figure_one(1);
    inst.modes[0].fleet_cap = Some(1);
    let out = run(&inst, &RunConfig::preset(Preset::Exact)).unwrap();
    assert_eq!(out.solution.status, SolutionStatus::Infeasible);
    assert_eq!(out.report.certificate, Some(Certificate::ModeCap { mode: 0, cap: 1 }));
}

#[test]
fn mirrored_generation_yields_multi_pickup_routes() {
    // three origins feeding one destination
    let mut mode = TransportMode::basic("TL", 10.0, 1, 1.0, 1000.0);
    mode.max_pickups = 3;
    let inst = Instance {
        weight_unit: "pound".into(),
        locations: vec![loc("P", 0.0, 0.0), loc("Q", 10.0, 0.0), loc("R", 20.0, 0.0), loc("D", 100.0, 0.0)],
        orders: vec![order("1", "P", "D", 1.0), order("2", "Q", "D", 1.0), order("3", "R", "D", 1.0)],
        modes: vec![mode],
        overlay: Default::default(),
        distance_metric: Default::default(),
        distance_matrix: None,
    };
    let mut cfg = RunConfig::preset(Preset::Exact);
    cfg.generator.direction = DirectionSetting::MultiPickup;
    let out = run(&inst, &cfg).unwrap();
    assert_eq!(out.solution.selected_routes.len(), 1);
    let r = &out.solution.selected_routes[0];
    assert_eq!(r.direction, Direction::MultiPickupOneDrop);
    assert_eq!(r.stops.iter().map(|&s| out.network.location_id(s)).collect::<Vec<_>>(), ["P", "Q", "R", "D"]);
    assert_eq!(out.solution.total_cost, Cost(100_000));
    // P-Q-R-D is 1+2+3 pickup permutations: 3 + 6 + 6 route shapes
    assert_eq!(out.pool.count_by_drops(), BTreeMap::from([(1, 3), (2, 6), (3, 6)]));
}

#[test]
fn reruns_are_identical() {
    let inst = figure_one(2);
    for preset in Preset::ALL {
        let a = run(&inst, &RunConfig::preset(preset)).unwrap();
        let b = run(&inst, &RunConfig::preset(preset)).unwrap();
        let file =
            |o: &RunOutcome| SolutionFile { wall_time_seconds: 0.0, ..SolutionFile::new(&o.network, &o.solution) };
        assert_eq!(file(&a), file(&b));
        let strip = |mut r: RunReport| {
            r.timings = PhaseTimes::default();
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(strip(a.report), strip(b.report));
    }
}

#[test]
fn classification_thresholds() {
    let mut report = run(&figure_one(1), &RunConfig::preset(Preset::Exact)).unwrap().report;
    report.timings.total_secs = 1.5;
    assert_eq!(classify(Some(&report), None), Complexity::Easy);

    let mut timed_out = report.clone();
    timed_out.status = SolutionStatus::FeasibleWithBound;
    timed_out.timings.total_secs = 3600.0;
    let mut bkk = report.clone();
    bkk.timings.total_secs = 103.2;
    assert_eq!(classify(Some(&timed_out), Some(&bkk)), Complexity::Medium);
    bkk.timings.total_secs = 1686.1;
    assert_eq!(classify(Some(&timed_out), Some(&bkk)), Complexity::Hard);
    assert_eq!(classify(None, Some(&bkk)), Complexity::Hard);
}

#[test]
fn outputs_render() {
    let out = run(&figure_one(2), &RunConfig::preset(Preset::Exact)).unwrap();
    let csv = routes_csv(&out.network, &out.solution);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().contains("A > "));
    let json = solution_json(&out.network, &out.solution);
    let back: SolutionFile = serde_json::from_str(&json).unwrap();
    assert_eq!(back.total_cost, Cost(200_000));
    let mut sizes: Vec<usize> = back.routes.iter().map(|r| r.orders.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![3, 5]);
}
