//! End-to-end solves: generate candidates per mode and direction, pool them,
//! select the cheapest exact partition, and report.

mod config;
mod output;

pub use config::{
    ConfigError, ConfigFile, DirectionSetting, Extension, GeneratorConfig, Preset, RunConfig, SolverConfig,
};
pub use output::{routes_csv, solution_json, RouteRecord, SolutionFile, StopRecord};

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consolidation::{consolidate, od_groups, ConsolidationError, ConsolidationStats};
use crate::model::{
    Cost, Diagnostic, Direction, Instance, Network, OrderIx, Route, RouteKey, Solution, SolutionStatus,
};
use crate::neighborhood::{
    build_neighbor_index, exact_extend, mirror_network, restricted_extend, unmirror_route, ComboTable, ExtensionStats,
    NeighborIndex, NeighborStrategy,
};
use crate::sp::{
    build_sp, solve_external, solve_sp, Certificate, Column, Proof, SideConstraints, SolveOptions, SpError,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthStats {
    pub drops: usize,
    pub attempted: u64,
    pub infeasible: u64,
    pub pruned_routes: u64,
    pub emitted: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub consolidation: ConsolidationStats,
    /// Extension statistics by resulting drop count, starting at two drops.
    pub extension: Vec<DepthStats>,
    pub inserted: u64,
    pub duplicates: u64,
}

/// Deduplicated candidate routes keyed by (mode, stops, orders).
#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    routes: Vec<Route>,
    provenance: Vec<Vec<String>>,
    index: HashMap<RouteKey, usize>,
    pub stats: PoolStats,
}

impl CandidatePool {
    pub fn new() -> CandidatePool {
        CandidatePool::default()
    }

    /// Adds a route unless an equal key is present; either way `tag` is recorded.
    pub fn insert(&mut self, route: Route, tag: &str) -> bool {
        match self.index.get(&route.key()) {
            Some(&i) => {
                self.stats.duplicates += 1;
                if !self.provenance[i].iter().any(|t| t == tag) {
                    self.provenance[i].push(tag.to_string());
                }
                false
            }
            None => {
                self.index.insert(route.key(), self.routes.len());
                self.routes.push(route);
                self.provenance.push(vec![tag.to_string()]);
                self.stats.inserted += 1;
                true
            }
        }
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn provenance(&self, i: usize) -> &[String] {
        &self.provenance[i]
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Number of routes with each drop count.
    pub fn count_by_drops(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.routes {
            *counts.entry(r.drops()).or_insert(0) += 1;
        }
        counts
    }

    pub fn contains(&self, key: &RouteKey) -> bool {
        self.index.contains_key(key)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid instance")]
    InvalidInstance(Vec<Diagnostic>),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Consolidation(#[from] ConsolidationError),
    #[error("orders with no feasible route under any mode: {}", .0.join(", "))]
    Uncoverable(Vec<String>),
    #[error("candidate pool exceeded {0} routes")]
    PoolLimit(usize),
    #[error("external solver: {0}")]
    External(#[from] crate::sp::SelectionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub generation_secs: f64,
    pub model_build_secs: f64,
    pub solve_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Easy,
    Medium,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: String,
    pub status: SolutionStatus,
    pub total_cost: Cost,
    pub lower_bound: Cost,
    pub route_count: usize,
    pub pool_size: usize,
    pub pool_by_drops: BTreeMap<usize, usize>,
    pub pool_stats: PoolStats,
    pub sp_columns: usize,
    pub sp_fixed: usize,
    pub sp_nodes: u64,
    /// How the search ended.
    pub proof: Proof,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    pub timings: PhaseTimes,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    /// Percent above the baseline cost.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_gap: Option<f64>,
    /// False when the baseline was not proven optimal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_flagged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity: Option<Complexity>,
}

/// A finished solve: the compiled network, the candidate pool, the selection and its report.
#[derive(Debug)]
pub struct RunOutcome {
    pub network: Network,
    pub pool: CandidatePool,
    pub solution: Solution,
    pub report: RunReport,
}

fn directions(setting: DirectionSetting) -> &'static [Direction] {
    match setting {
        DirectionSetting::OnePickup => &[Direction::OnePickupMultiDrop],
        DirectionSetting::MultiPickup => &[Direction::MultiPickupOneDrop],
        DirectionSetting::Both => &[Direction::OnePickupMultiDrop, Direction::MultiPickupOneDrop],
    }
}

fn add_depth(stats: &mut PoolStats, drops: usize, s: ExtensionStats) {
    while stats.extension.len() < drops - 1 {
        let d = stats.extension.len() + 2;
        stats.extension.push(DepthStats { drops: d, ..Default::default() });
    }
    let e = &mut stats.extension[drops - 2];
    e.attempted += s.attempted;
    e.infeasible += s.infeasible;
    e.pruned_routes += s.pruned_routes;
    e.emitted += s.emitted;
}

/// Generates the candidate pool for `config` on a compiled network.
pub fn generate(net: &Network, config: &GeneratorConfig, seed: u64) -> Result<CandidatePool, PipelineError> {
    let mut consolidation = config.consolidation.clone();
    consolidation.seed = seed;
    consolidation.check()?;

    let mut pool = CandidatePool::new();
    let mirrored = directions(config.direction).contains(&Direction::MultiPickupOneDrop).then(|| mirror_network(net));
    let exact = config.extension.contains(&Extension::Exact);

    for &direction in directions(config.direction) {
        let gen_net = match direction {
            Direction::OnePickupMultiDrop => net,
            Direction::MultiPickupOneDrop => mirrored.as_ref().expect("built above"),
        };
        let indexes: Vec<NeighborIndex> = if exact {
            Vec::new()
        } else {
            config
                .extension
                .iter()
                .map(|e| match *e {
                    Extension::Knn { k } => build_neighbor_index(gen_net, NeighborStrategy::Distance, k),
                    Extension::Kcorn { k } => build_neighbor_index(gen_net, NeighborStrategy::Oor, k),
                    Extension::Exact => unreachable!(),
                })
                .collect()
        };
        let label = if exact {
            "exact".to_string()
        } else {
            config.extension.iter().map(|e| e.label()).collect::<Vec<_>>().join("+")
        };
        let groups = od_groups(gen_net);

        for mode in gen_net.mode_ids() {
            let packed: Vec<Result<(Vec<Route>, ConsolidationStats), ConsolidationError>> =
                groups.par_iter().map(|g| consolidate(gen_net, g, mode, &consolidation)).collect();
            let mut combos = Vec::new();
            for p in packed {
                let (routes, s) = p?;
                pool.stats.consolidation += s;
                combos.extend(routes);
            }
            let table = ComboTable::new(combos);

            let emit = |pool: &mut CandidatePool, routes: &[Route], tag: &str| -> Result<(), PipelineError> {
                for r in routes {
                    let r = match direction {
                        Direction::OnePickupMultiDrop => r.clone(),
                        Direction::MultiPickupOneDrop => unmirror_route(net, r.clone()),
                    };
                    pool.insert(r, &format!("{}/{}", direction.label(), tag));
                }
                match config.max_pool_size {
                    Some(limit) if pool.len() > limit => Err(PipelineError::PoolLimit(limit)),
                    _ => Ok(()),
                }
            };
            emit(&mut pool, table.combos(), "consolidation")?;

            if config.extension.is_empty() {
                continue;
            }
            let max_drops = gen_net.mode(mode).max_drops as usize;
            let mut level: Vec<Route> = table.combos().to_vec();
            for drops in 2..=max_drops {
                if level.is_empty() {
                    break;
                }
                let (next, s) = if exact {
                    exact_extend(gen_net, &level, &table, config.prune)
                } else {
                    restricted_extend(gen_net, &level, &table, &indexes, config.prune)
                };
                add_depth(&mut pool.stats, drops, s);
                emit(&mut pool, &next, &label)?;
                level = next;
            }
        }
    }
    Ok(pool)
}

fn side_constraints(net: &Network, solver: &SolverConfig) -> Result<SideConstraints, ConfigError> {
    let mut caps = BTreeMap::new();
    for m in net.mode_ids() {
        if let Some(cap) = net.mode(m).fleet_cap {
            caps.insert(m.index(), cap);
        }
    }
    for (id, &cap) in &solver.mode_caps {
        let m = net.mode_ix(id).ok_or_else(|| ConfigError::Invalid(format!("mode cap names unknown mode {id:?}")))?;
        let e = caps.entry(m.index()).or_insert(cap);
        *e = (*e).min(cap);
    }
    Ok(SideConstraints { max_total_routes: solver.max_total_routes, per_mode_caps: caps })
}

/// Solves an instance end to end.
pub fn run(instance: &Instance, config: &RunConfig) -> Result<RunOutcome, PipelineError> {
    let started = Instant::now();
    config.check()?;
    let net = Network::new(instance).map_err(PipelineError::InvalidInstance)?;

    let pool = generate(&net, &config.generator, config.seed)?;
    let generation = started.elapsed();
    log::info!("{}: {} candidate routes in {:.3}s", config.name, pool.len(), generation.as_secs_f64());

    let build_start = Instant::now();
    let mut covered = vec![false; net.num_orders()];
    let columns: Vec<Column> = pool
        .routes()
        .iter()
        .enumerate()
        .map(|(id, r)| {
            for o in &r.orders {
                covered[o.index()] = true;
            }
            Column {
                id,
                cost: r.cost.milli(),
                orders: r.orders.iter().map(|o| o.index()).collect(),
                mode: r.mode.index(),
            }
        })
        .collect();
    let missing: Vec<String> =
        (0..net.num_orders()).filter(|&o| !covered[o]).map(|o| net.order_id(OrderIx::new(o)).to_string()).collect();
    if !missing.is_empty() {
        return Err(PipelineError::Uncoverable(missing));
    }
    let side = side_constraints(&net, &config.solver)?;
    let problem = match build_sp(net.num_orders(), columns, side) {
        Ok(p) => p,
        Err(SpError::Uncovered(orders)) => {
            return Err(PipelineError::Uncoverable(
                orders.into_iter().map(|o| net.order_id(OrderIx::new(o)).to_string()).collect(),
            ))
        }
        Err(e) => unreachable!("pool columns are well formed: {e}"),
    };
    let model_build = build_start.elapsed();

    let solve_start = Instant::now();
    let sp = match &config.solver.external_command {
        Some(cmd) => {
            let dir = tempfile::tempdir()?;
            solve_external(&problem, cmd, dir.path())?
        }
        None => solve_sp(
            &problem,
            SolveOptions {
                time_limit: config.solver.time_limit_secs.map(Duration::from_secs_f64),
                gap_tolerance: config.solver.gap_tolerance,
            },
        ),
    };
    let solve = solve_start.elapsed();
    log::info!("{}: {:?} after {} nodes, objective {}", config.name, sp.proof, sp.nodes, Cost(sp.objective));

    let status = match sp.proof {
        Proof::Optimal => SolutionStatus::Optimal,
        Proof::WithinGap | Proof::TimeLimited => SolutionStatus::FeasibleWithBound,
        Proof::Infeasible => SolutionStatus::Infeasible,
    };
    let selected: Vec<Route> = sp.chosen.iter().map(|&id| pool.routes()[id].clone()).collect();
    let mut covered_orders: Vec<OrderIx> = selected.iter().flat_map(|r| r.orders.iter().copied()).collect();
    covered_orders.sort_unstable();
    let solution = Solution {
        total_cost: Cost(sp.objective),
        lower_bound: Cost(sp.bound),
        covered_orders,
        status,
        selected_routes: selected,
        wall_time: sp.wall_time,
    };
    let report = RunReport {
        config: config.name.clone(),
        status,
        total_cost: solution.total_cost,
        lower_bound: solution.lower_bound,
        route_count: solution.selected_routes.len(),
        pool_size: pool.len(),
        pool_by_drops: pool.count_by_drops(),
        pool_stats: pool.stats.clone(),
        sp_columns: problem.columns.len(),
        sp_fixed: problem.fixed.len(),
        sp_nodes: sp.nodes,
        proof: sp.proof,
        certificate: sp.certificate.clone(),
        timings: PhaseTimes {
            generation_secs: generation.as_secs_f64(),
            model_build_secs: model_build.as_secs_f64(),
            solve_secs: solve.as_secs_f64(),
            total_secs: started.elapsed().as_secs_f64(),
        },
        baseline: None,
        relative_gap: None,
        baseline_exact: None,
        gap_flagged: None,
        complexity: None,
    };
    Ok(RunOutcome { network: net, pool, solution, report })
}

/// Percent by which `cost` exceeds `baseline`.
pub fn relative_gap(cost: Cost, baseline: Cost) -> f64 {
    if baseline.milli() == 0 {
        return if cost.milli() == 0 { 0.0 } else { f64::INFINITY };
    }
    100.0 * (cost.milli() - baseline.milli()) as f64 / baseline.milli() as f64
}

/// Default acceptability bar for heuristic gaps, in percent.
pub const GAP_FLAG_PERCENT: f64 = 5.0;

/// Runs every config and the baseline, and fills in gaps against the baseline.
///
/// If the baseline is not proven optimal, gaps are measured against the best
/// cost any run found and `baseline_exact` is false.
pub fn compare(
    instance: &Instance,
    configs: &[RunConfig],
    baseline: &RunConfig,
    flag_percent: f64,
) -> Result<Vec<RunReport>, PipelineError> {
    let base = run(instance, baseline)?;
    let mut reports = vec![base.report];
    for c in configs {
        reports.push(run(instance, c)?.report);
    }
    let exact = reports[0].status == SolutionStatus::Optimal;
    let reference = if exact {
        reports[0].total_cost
    } else {
        reports
            .iter()
            .filter(|r| r.status != SolutionStatus::Infeasible)
            .map(|r| r.total_cost)
            .min()
            .unwrap_or(reports[0].total_cost)
    };
    for r in &mut reports {
        r.baseline = Some(baseline.name.clone());
        r.baseline_exact = Some(exact);
        if r.status != SolutionStatus::Infeasible {
            let gap = relative_gap(r.total_cost, reference);
            r.relative_gap = gap.is_finite().then_some(gap);
            r.gap_flagged = Some(gap > flag_percent);
        }
    }
    Ok(reports)
}

/// Seconds separating easy from medium and medium from hard.
pub const CLASS_LIMIT_SECS: f64 = 600.0;

/// Easy when the exact method proved optimality within the limit; medium when
/// it did not but the heuristic finished within the limit; hard otherwise.
pub fn classify(exact: Option<&RunReport>, heuristic: Option<&RunReport>) -> Complexity {
    let within = |r: &RunReport| r.timings.total_secs < CLASS_LIMIT_SECS;
    if exact.is_some_and(|r| r.status == SolutionStatus::Optimal && within(r)) {
        Complexity::Easy
    } else if heuristic.is_some_and(|r| r.status != SolutionStatus::Infeasible && within(r)) {
        Complexity::Medium
    } else {
        Complexity::Hard
    }
}

/// Mode used by each route in a solution, for summaries.
pub fn mode_usage(net: &Network, solution: &Solution) -> BTreeMap<String, usize> {
    let mut usage = BTreeMap::new();
    for r in &solution.selected_routes {
        *usage.entry(net.mode_id(r.mode).to_string()).or_insert(0) += 1;
    }
    usage
}

#[cfg(test)]
mod tests;
