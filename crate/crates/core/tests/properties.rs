use std::collections::BTreeSet;

use proptest::prelude::*;
use rvrp_core::consolidation::{bfd, ffd, ffs, od_groups, Combo};
use rvrp_core::feasibility::{validate, Verdict};
use rvrp_core::model::{Instance, Network, Weight};
use rvrp_core::neighborhood::mirror_instance;
use rvrp_core::pipeline::{run, DirectionSetting, Preset, RunConfig};
use rvrp_core::sp::{
    brute_force_sp, build_sp, check_selection, solve_sp, Column, Proof, SideConstraints, SolveOptions,
};
use rvrp_core::tools::{generate, ProfileSpec, WeightTargets};

fn small_instance(orders: usize, origins: usize, destinations: usize, drops: u32, seed: u64) -> Instance {
    let mut profile = ProfileSpec::pilot_one();
    profile.name = "prop".into();
    profile.n_orders = orders.max(origins).max(destinations);
    profile.n_origins = origins;
    profile.n_destinations = destinations;
    profile.weight = WeightTargets { min: 500.0, avg: 3000.0, max: 15000.0 };
    profile.capacities = vec![20000.0];
    profile.max_drops = drops;
    profile.max_oor = Some(120.0);
    profile.window_span_days = 1.0;
    profile.seed = seed;
    generate(&profile).unwrap()
}

fn columns(count: usize, orders: usize) -> impl Strategy<Value = Vec<(i64, BTreeSet<usize>)>> {
    prop::collection::vec((1i64..200, prop::collection::btree_set(0..orders, 1..=3)), 1..=count)
}

fn packed_once(group: &[rvrp_core::model::OrderIx], combos: &[Combo]) -> bool {
    let mut seen: Vec<_> = combos.iter().flat_map(|c| c.orders.iter().copied()).collect();
    seen.sort_unstable();
    seen == group
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mirroring_twice_is_identity(seed in 0u64..1000, origins in 1usize..4, destinations in 1usize..6) {
        let inst = small_instance(12, origins, destinations, 2, seed);
        prop_assert_eq!(mirror_instance(&mirror_instance(&inst)), inst);
    }

    #[test]
    fn pool_routes_validate(seed in 0u64..1000, drops in 1u32..=3, multi in any::<bool>()) {
        let mut inst = small_instance(10, 2, 4, drops, seed);
        for m in &mut inst.modes {
            m.max_pickups = drops;
        }
        let mut config = RunConfig::preset(Preset::Exact);
        if multi {
            config.generator.direction = DirectionSetting::Both;
        }
        let out = run(&inst, &config).unwrap();
        let net = &out.network;
        for r in out.pool.routes() {
            let verdict = validate(net, r.mode, r.direction, &r.stops, &r.orders).unwrap();
            match verdict {
                Verdict::Feasible(f) => prop_assert_eq!(f.cost, r.cost),
                Verdict::Infeasible(v) => prop_assert!(false, "{:?} rejected: {}", r.key(), v),
            }
            prop_assert!(r.weight <= net.mode(r.mode).capacity);
        }
    }

    #[test]
    fn selection_partitions_orders(seed in 0u64..1000, preset in prop::sample::select(Preset::ALL.to_vec())) {
        let inst = small_instance(14, 2, 5, 3, seed);
        let out = run(&inst, &RunConfig::preset(preset)).unwrap();
        let mut covered: Vec<_> = out.solution.selected_routes.iter().flat_map(|r| r.orders.iter().copied()).collect();
        covered.sort_unstable();
        let all: Vec<_> = (0..inst.orders.len()).map(rvrp_core::model::OrderIx::new).collect();
        prop_assert_eq!(covered, all);
        let total: i64 = out.solution.selected_routes.iter().map(|r| r.cost.milli()).sum();
        prop_assert_eq!(total, out.solution.total_cost.milli());
        prop_assert!(out.solution.lower_bound <= out.solution.total_cost);
    }

    #[test]
    fn search_agrees_with_exhaustive_scan(n in 1usize..=8, cols in columns(18, 8)) {
        let cols: Vec<Column> = cols
            .into_iter()
            .enumerate()
            .map(|(id, (cost, orders))| Column { id, cost, orders: orders.into_iter().map(|o| o % n).collect::<BTreeSet<_>>().into_iter().collect(), mode: 0 })
            .collect();
        let Ok(problem) = build_sp(n, cols, SideConstraints::default()) else { return Ok(()) };
        let fast = solve_sp(&problem, SolveOptions::default());
        let slow = brute_force_sp(&problem).unwrap();
        prop_assert_eq!(fast.proof == Proof::Infeasible, slow.proof == Proof::Infeasible);
        if slow.proof != Proof::Infeasible {
            prop_assert_eq!(fast.objective, slow.objective);
            prop_assert_eq!(check_selection(&problem, &fast.chosen).unwrap(), fast.objective);
        }
    }

    #[test]
    fn packers_respect_capacity(seed in 0u64..1000, factor in 0.3f64..=1.0) {
        let inst = small_instance(20, 1, 2, 1, seed);
        let net = Network::new(&inst).unwrap();
        let cap = Weight::from_units(20000.0 * factor);
        for g in od_groups(&net) {
            for combos in [ffd(&net, &g, cap), bfd(&net, &g, cap), ffs(&net, &g, cap, seed)] {
                prop_assert!(packed_once(&g.orders, &combos));
                for c in &combos {
                    prop_assert!(c.total_weight <= cap || (c.oversize && c.orders.len() == 1));
                }
            }
        }
    }
}
