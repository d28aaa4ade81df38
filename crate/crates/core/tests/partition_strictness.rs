use rvrp_core::model::{Cost, Instance, SolutionStatus};
use rvrp_core::pipeline::{run, Preset, RunConfig};
use rvrp_core::sp::{brute_force_sp, build_sp, Column, SideConstraints};

fn fixture() -> Instance {
    let text = include_str!("fixtures/partition_vs_cover.json");
    Instance::from_json(text).unwrap()
}

/// Cheapest selection covering every order at least once, by exhaustive scan.
fn cover_optimum(num_orders: usize, cols: &[Column]) -> i64 {
    let mut best = i64::MAX;
    for mask in 1u32..(1 << cols.len()) {
        let mut hit = vec![false; num_orders];
        let mut cost = 0;
        for (j, c) in cols.iter().enumerate() {
            if mask & (1 << j) != 0 {
                cost += c.cost;
                for &o in &c.orders {
                    hit[o] = true;
                }
            }
        }
        if hit.iter().all(|&h| h) {
            best = best.min(cost);
        }
    }
    best
}

#[test]
fn cover_and_partition_optima_differ() {
    let out = run(&fixture(), &RunConfig::preset(Preset::Exact)).unwrap();
    let cols: Vec<Column> = out
        .pool
        .routes()
        .iter()
        .enumerate()
        .map(|(id, r)| Column {
            id,
            cost: r.cost.milli(),
            orders: r.orders.iter().map(|o| o.index()).collect(),
            mode: 0,
        })
        .collect();
    assert!(cols.len() <= 20, "{} routes", cols.len());

    // A-C-B and A-D-B both end in the cheap lane, but share the order to B
    assert_eq!(cover_optimum(3, &cols), 40_000);
    let problem = build_sp(3, cols, SideConstraints::default()).unwrap();
    assert_eq!(brute_force_sp(&problem).unwrap().objective, 120_000);

    assert_eq!(out.solution.status, SolutionStatus::Optimal);
    assert_eq!(out.solution.total_cost, Cost(120_000));
    let mut covered: Vec<usize> =
        out.solution.selected_routes.iter().flat_map(|r| r.orders.iter().map(|o| o.index())).collect();
    covered.sort_unstable();
    assert_eq!(covered, vec![0, 1, 2]);
}
