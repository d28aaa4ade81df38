//! Exact set partitioning over a pool of candidate routes.
//!
//! Each column covers a set of orders at a cost; a solution picks columns that
//! cover every order exactly once at minimum total cost. The solver is a
//! deterministic depth-first branch and bound on orders. It branches on the
//! open order with the fewest live covering columns, tries those columns
//! cheapest first, and bounds every node by the cost so far plus, for each open
//! order, the smallest per-order share `floor(cost / |orders|)` among its live
//! columns.
//!
//! That share bound is a Lagrangian bound with one particular multiplier per
//! order. A few subgradient steps per node improve the multipliers, and the
//! resulting reduced costs remove columns that cannot beat the incumbent.
//! At the root a greedy pass over those reduced costs supplies a first
//! incumbent, and every later improvement bans, for the rest of the search, the
//! columns the root reduced costs rule out.
//!
//! Without side constraints, groups of orders that share no column are
//! independent and are searched one after another.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One candidate route as seen by the solver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    /// Caller's identifier, usually the pool index.
    pub id: usize,
    /// Milli-units, nonnegative.
    pub cost: i64,
    /// Sorted, distinct order indices.
    pub orders: Vec<usize>,
    pub mode: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SideConstraints {
    pub max_total_routes: Option<u32>,
    /// Mode index to the largest number of routes of that mode.
    pub per_mode_caps: BTreeMap<usize, u32>,
}

impl SideConstraints {
    pub fn is_empty(&self) -> bool {
        self.max_total_routes.is_none() && self.per_mode_caps.is_empty()
    }
}

/// The binding reason no partition exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Certificate {
    /// No exact cover exists even without side constraints; `order` cannot be covered.
    NoPartition {
        order: Option<usize>,
    },
    MaxTotalRoutes {
        cap: u32,
    },
    ModeCap {
        mode: usize,
        cap: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpError {
    #[error("orders without any covering route: {0:?}")]
    Uncovered(Vec<usize>),
    #[error("column {id} is malformed: {reason}")]
    BadColumn { id: usize, reason: String },
    #[error("{0} columns exceed the brute-force limit of {BRUTE_FORCE_LIMIT}")]
    TooLarge(usize),
}

pub const BRUTE_FORCE_LIMIT: usize = 25;

/// A preprocessed set-partitioning problem.
#[derive(Debug, Clone)]
pub struct SpProblem {
    pub num_orders: usize,
    /// Columns as supplied.
    pub original: Vec<Column>,
    /// Columns kept after dominance, ascending by (cost, id).
    pub columns: Vec<Column>,
    /// Indices into `columns` that every solution must use.
    pub fixed: Vec<usize>,
    /// Indices into `columns` left for the search.
    pub free: Vec<usize>,
    /// Orders not covered by a fixed column.
    pub open_orders: Vec<usize>,
    pub side: SideConstraints,
    /// An order left without any compatible column by fixing.
    pub conflict: Option<usize>,
}

impl SpProblem {
    pub fn fixed_cost(&self) -> i64 {
        self.fixed.iter().map(|&c| self.columns[c].cost).sum()
    }
}

/// Builds a problem: drops dominated columns and fixes columns that are the only
/// cover of some order.
///
/// Of two columns with the same order set the cheaper survives, ties to the
/// smaller id. With per-mode caps, only columns of the same mode compete.
pub fn build_sp(num_orders: usize, columns: Vec<Column>, side: SideConstraints) -> Result<SpProblem, SpError> {
    for c in &columns {
        if c.cost < 0 {
            return Err(SpError::BadColumn { id: c.id, reason: "negative cost".into() });
        }
        if c.orders.is_empty() {
            return Err(SpError::BadColumn { id: c.id, reason: "covers no order".into() });
        }
        if c.orders.windows(2).any(|w| w[0] >= w[1]) || c.orders.iter().any(|&o| o >= num_orders) {
            return Err(SpError::BadColumn { id: c.id, reason: "orders not sorted, distinct and in range".into() });
        }
    }
    let mut covered = vec![false; num_orders];
    for c in &columns {
        for &o in &c.orders {
            covered[o] = true;
        }
    }
    let uncovered: Vec<usize> = (0..num_orders).filter(|&o| !covered[o]).collect();
    if !uncovered.is_empty() {
        return Err(SpError::Uncovered(uncovered));
    }

    let by_mode = !side.per_mode_caps.is_empty();
    let mut best: HashMap<(&[usize], usize), &Column> = HashMap::new();
    for c in &columns {
        let key = (c.orders.as_slice(), if by_mode { c.mode } else { 0 });
        best.entry(key)
            .and_modify(|b| {
                if (c.cost, c.id) < (b.cost, b.id) {
                    *b = c;
                }
            })
            .or_insert(c);
    }
    let mut kept: Vec<Column> = best.into_values().cloned().collect();
    kept.sort_by_key(|c| (c.cost, c.id));

    let mut alive = vec![true; kept.len()];
    let mut open = vec![true; num_orders];
    let mut fixed = Vec::new();
    let mut conflict = None;
    loop {
        let mut count = vec![0usize; num_orders];
        let mut only = vec![usize::MAX; num_orders];
        for (j, c) in kept.iter().enumerate().filter(|(j, _)| alive[*j]) {
            for &o in &c.orders {
                count[o] += 1;
                only[o] = j;
            }
        }
        if let Some(o) = (0..num_orders).find(|&o| open[o] && count[o] == 0) {
            conflict = Some(o);
            break;
        }
        let Some(o) = (0..num_orders).find(|&o| open[o] && count[o] == 1) else { break };
        let j = only[o];
        fixed.push(j);
        for &x in &kept[j].orders {
            open[x] = false;
        }
        for (k, c) in kept.iter().enumerate() {
            if alive[k] && c.orders.iter().any(|&x| !open[x]) {
                alive[k] = false;
            }
        }
    }
    fixed.sort_unstable();
    Ok(SpProblem {
        num_orders,
        free: (0..kept.len()).filter(|&j| alive[j]).collect(),
        open_orders: (0..num_orders).filter(|&o| open[o]).collect(),
        original: columns,
        columns: kept,
        fixed,
        side,
        conflict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proof {
    Optimal,
    /// Stopped by the gap tolerance; `bound` is valid.
    WithinGap,
    /// Stopped by the time limit; `bound` is valid.
    TimeLimited,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpSolution {
    /// Ids of the chosen columns, ascending.
    pub chosen: Vec<usize>,
    pub objective: i64,
    pub bound: i64,
    pub proof: Proof,
    pub nodes: u64,
    pub certificate: Option<Certificate>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    /// Checked at every node; only honored once an incumbent exists.
    pub time_limit: Option<Duration>,
    /// Stop proving once `(incumbent - bound) / bound <= gap_tolerance`.
    pub gap_tolerance: f64,
}

/// Subgradient steps at the root and at every other node.
const ROOT_STEPS: usize = 300;
const NODE_STEPS: usize = 25;

struct Search<'a> {
    cols: Vec<&'a Column>,
    /// Compact order index of every column's orders.
    col_orders: Vec<Vec<usize>>,
    /// Live-column lookups per compact order: by (cost, id), and by share.
    by_cost: Vec<Vec<usize>>,
    by_share: Vec<Vec<usize>>,
    share: Vec<i64>,
    /// Lagrange multiplier per compact order, inherited from the parent node.
    duals: Vec<f64>,
    alive: Vec<bool>,
    alive_count: Vec<usize>,
    /// Columns the root reduced costs rule out for good; never revived.
    banned: Vec<bool>,
    root_rc: Vec<f64>,
    root_value: f64,
    covered: Vec<bool>,
    open: usize,
    trail: Vec<usize>,
    chosen: Vec<usize>,
    cost: i64,
    routes: u32,
    mode_count: BTreeMap<usize, u32>,
    side: &'a SideConstraints,
    incumbent: Option<(i64, Vec<usize>)>,
    /// Smallest bound among nodes cut only by the gap tolerance.
    gap_cut: Option<i64>,
    /// Smallest bound among nodes left unfinished by the time limit.
    open_bound: Option<i64>,
    tolerance: f64,
    nodes: u64,
    deadline: Option<Instant>,
    stopped: bool,
}

impl<'a> Search<'a> {
    fn new(cols: Vec<&'a Column>, orders: &[usize], num_orders: usize, side: &'a SideConstraints) -> Self {
        let mut compact = vec![usize::MAX; num_orders];
        for (i, &o) in orders.iter().enumerate() {
            compact[o] = i;
        }
        let n = orders.len();
        let col_orders: Vec<Vec<usize>> = cols.iter().map(|c| c.orders.iter().map(|&o| compact[o]).collect()).collect();
        let share: Vec<i64> = cols.iter().map(|c| c.cost / c.orders.len() as i64).collect();
        let mut by_cost = vec![Vec::new(); n];
        for (j, os) in col_orders.iter().enumerate() {
            for &o in os {
                by_cost[o].push(j);
            }
        }
        let by_share: Vec<Vec<usize>> = by_cost
            .iter()
            .map(|list| {
                let mut l = list.clone();
                l.sort_by_key(|&j| (share[j], j));
                l
            })
            .collect();
        let alive_count = by_cost.iter().map(Vec::len).collect();
        // the share bound's multipliers
        let duals = by_share.iter().map(|l| l.first().map_or(0.0, |&j| share[j] as f64)).collect();
        Search {
            alive: vec![true; cols.len()],
            banned: vec![false; cols.len()],
            root_rc: Vec::new(),
            root_value: 0.0,
            cols,
            col_orders,
            by_cost,
            by_share,
            share,
            alive_count,
            duals,
            covered: vec![false; n],
            open: n,
            trail: Vec::new(),
            chosen: Vec::new(),
            cost: 0,
            routes: 0,
            mode_count: BTreeMap::new(),
            side,
            incumbent: None,
            gap_cut: None,
            open_bound: None,
            tolerance: 0.0,
            nodes: 0,
            deadline: None,
            stopped: false,
        }
    }

    fn kill(&mut self, j: usize) {
        if self.alive[j] {
            self.alive[j] = false;
            for &o in &self.col_orders[j] {
                self.alive_count[o] -= 1;
            }
            self.trail.push(j);
        }
    }

    fn ban(&mut self, j: usize) {
        if self.banned[j] {
            return;
        }
        self.banned[j] = true;
        if self.alive[j] {
            self.alive[j] = false;
            for &o in &self.col_orders[j] {
                self.alive_count[o] -= 1;
            }
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let j = self.trail.pop().expect("trail above mark");
            if self.banned[j] {
                continue;
            }
            self.alive[j] = true;
            for &o in &self.col_orders[j] {
                self.alive_count[o] += 1;
            }
        }
    }

    /// Cost so far plus the cheapest per-order share of every open order, or
    /// `None` when some open order has no live column.
    fn bound(&self) -> Option<i64> {
        let mut b = self.cost;
        for o in 0..self.covered.len() {
            if self.covered[o] {
                continue;
            }
            let j = *self.by_share[o].iter().find(|&&j| self.alive[j])?;
            b += self.share[j];
        }
        Some(b)
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cols[j].cost as f64 - self.col_orders[j].iter().map(|&o| self.duals[o]).sum::<f64>()
    }

    /// Improves `duals` by subgradient steps and returns the best Lagrangian
    /// value seen with its bound, never below `floor`. Columns whose reduced
    /// cost pushes the bound past the incumbent are killed.
    fn lagrange(&mut self, floor: i64, steps: usize) -> (i64, f64) {
        let live: Vec<usize> = (0..self.cols.len()).filter(|&j| self.alive[j]).collect();
        let open: Vec<usize> = (0..self.covered.len()).filter(|&o| !self.covered[o]).collect();
        let upper = self.incumbent.as_ref().map(|(c, _)| *c as f64);
        let mut grad = vec![0.0; self.covered.len()];
        let mut best = f64::NEG_INFINITY;
        let mut best_duals = self.duals.clone();
        let mut scale = 2.0;
        let mut stale = 0;
        for step in 0..=steps {
            let mut value = self.cost as f64 + open.iter().map(|&o| self.duals[o]).sum::<f64>();
            for &o in &open {
                grad[o] = 1.0;
            }
            for &j in &live {
                let r = self.reduced_cost(j);
                if r < 0.0 {
                    value += r;
                    for &o in &self.col_orders[j] {
                        grad[o] -= 1.0;
                    }
                }
            }
            if value > best {
                best = value;
                best_duals.clone_from(&self.duals);
                stale = 0;
            } else {
                stale += 1;
                if stale >= 5 {
                    scale /= 2.0;
                    stale = 0;
                }
            }
            let norm: f64 = open.iter().map(|&o| grad[o] * grad[o]).sum();
            if step == steps || norm == 0.0 || upper.is_some_and(|u| best >= u) {
                break;
            }
            let target = upper.unwrap_or(best.abs() * 1.05 + 1.0).max(best * (1.0 + 1e-4) + 1.0);
            let t = scale * (target - value) / norm;
            for &o in &open {
                self.duals[o] += t * grad[o];
            }
        }
        self.duals = best_duals;
        let lb = ceil_bound(best).max(floor);
        if let Some((upper, _)) = &self.incumbent {
            let upper = *upper;
            for &j in &live {
                let r = self.reduced_cost(j);
                if r > 0.0 && ceil_bound(best + r) >= upper {
                    self.kill(j);
                }
            }
        }
        (lb, best)
    }

    /// Takes disjoint live columns by ascending reduced cost per order.
    fn greedy(&self) -> Option<(i64, Vec<usize>)> {
        let mut ranked: Vec<(f64, usize)> = (0..self.cols.len())
            .filter(|&j| self.alive[j])
            .map(|j| (self.reduced_cost(j) / self.col_orders[j].len() as f64, j))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut covered = self.covered.clone();
        let mut modes = self.mode_count.clone();
        let mut picks = self.chosen.clone();
        let mut cost = self.cost;
        let mut left = self.open;
        for (_, j) in ranked {
            if left == 0 {
                break;
            }
            if self.col_orders[j].iter().any(|&o| covered[o]) {
                continue;
            }
            let mode = self.cols[j].mode;
            if self.side.per_mode_caps.get(&mode).is_some_and(|&cap| modes.get(&mode).copied().unwrap_or(0) >= cap) {
                continue;
            }
            *modes.entry(mode).or_insert(0) += 1;
            for &o in &self.col_orders[j] {
                covered[o] = true;
            }
            left -= self.col_orders[j].len();
            cost += self.cols[j].cost;
            picks.push(j);
        }
        let routes = self.routes as usize + picks.len() - self.chosen.len();
        let fits = self.side.max_total_routes.is_none_or(|cap| routes <= cap as usize);
        (left == 0 && fits).then_some((cost, picks))
    }

    /// Records a better solution and bans every column the root reduced costs
    /// keep from beating it.
    fn improve(&mut self, cost: i64, picks: Vec<usize>) {
        if self.incumbent.as_ref().is_some_and(|(c, _)| *c <= cost) {
            return;
        }
        self.incumbent = Some((cost, picks));
        for j in 0..self.root_rc.len() {
            let r = self.root_rc[j];
            if r > 0.0 && ceil_bound(self.root_value + r) >= cost {
                self.ban(j);
            }
        }
    }

    fn cut(&self, lb: i64) -> Cut {
        match &self.incumbent {
            None => Cut::Keep,
            Some((best, _)) if lb >= *best => Cut::Dominated,
            Some((best, _)) if (*best - lb) as f64 <= self.tolerance * lb as f64 => Cut::Gap,
            _ => Cut::Keep,
        }
    }

    fn note_open(&mut self, lb: i64) {
        self.open_bound = Some(self.open_bound.map_or(lb, |b| b.min(lb)));
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        if self.incumbent.is_some() && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.stopped = true;
        }
        let Some(share_lb) = self.bound() else { return };
        if self.stopped {
            self.note_open(share_lb);
            return;
        }
        let lb = if self.open == 0 {
            share_lb
        } else if self.nodes == 1 {
            let (lb, value) = self.lagrange(share_lb, ROOT_STEPS);
            self.root_value = value;
            self.root_rc = (0..self.cols.len())
                .map(|j| if self.alive[j] { self.reduced_cost(j) } else { f64::INFINITY })
                .collect();
            if let Some((cost, picks)) = self.greedy() {
                self.improve(cost, picks);
            }
            lb
        } else {
            self.lagrange(share_lb, NODE_STEPS).0
        };
        if (0..self.covered.len()).any(|o| !self.covered[o] && self.alive_count[o] == 0) {
            return;
        }
        if self.stopped {
            self.note_open(lb);
            return;
        }
        match self.cut(lb) {
            Cut::Dominated => return,
            Cut::Gap => {
                self.gap_cut = Some(self.gap_cut.map_or(lb, |g| g.min(lb)));
                return;
            }
            Cut::Keep => {}
        }
        if self.open == 0 {
            self.improve(self.cost, self.chosen.clone());
            return;
        }
        if self.side.max_total_routes.is_some_and(|cap| self.routes >= cap) {
            return;
        }

        let branch = (0..self.covered.len())
            .filter(|&o| !self.covered[o])
            .min_by_key(|&o| (self.alive_count[o], o))
            .expect("an open order exists");
        let children: Vec<usize> = self.by_cost[branch].iter().copied().filter(|&j| self.alive[j]).collect();
        let duals = self.duals.clone();
        // every child covers `branch`, so siblings exclude each other already
        for &j in &children {
            if self.stopped {
                self.note_open(lb);
                return;
            }
            if !self.alive[j] {
                // banned by an incumbent found under an earlier sibling
                continue;
            }
            self.duals.clone_from(&duals);
            let mark = self.trail.len();
            let mode = self.cols[j].mode;
            let orders = self.col_orders[j].clone();
            for &o in &orders {
                self.covered[o] = true;
                for x in 0..self.by_cost[o].len() {
                    let k = self.by_cost[o][x];
                    self.kill(k);
                }
            }
            self.open -= orders.len();
            self.cost += self.cols[j].cost;
            self.routes += 1;
            let used = {
                let c = self.mode_count.entry(mode).or_insert(0);
                *c += 1;
                *c
            };
            if self.side.per_mode_caps.get(&mode).is_some_and(|&cap| used >= cap) {
                for k in 0..self.cols.len() {
                    if self.cols[k].mode == mode {
                        self.kill(k);
                    }
                }
            }
            self.chosen.push(j);

            self.dfs();

            self.chosen.pop();
            *self.mode_count.get_mut(&mode).expect("counted") -= 1;
            self.routes -= 1;
            self.cost -= self.cols[j].cost;
            self.open += orders.len();
            for &o in &orders {
                self.covered[o] = false;
            }
            self.undo(mark);
        }
    }
}

/// Smallest integer not below a float bound, with slack for rounding error.
fn ceil_bound(x: f64) -> i64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil() as i64
}

enum Cut {
    Keep,
    Dominated,
    Gap,
}

fn infeasible(nodes: u64, certificate: Option<Certificate>, start: Instant) -> SpSolution {
    SpSolution {
        chosen: Vec::new(),
        objective: 0,
        bound: 0,
        proof: Proof::Infeasible,
        nodes,
        certificate,
        wall_time: start.elapsed(),
    }
}

/// Solves the problem by branch and bound.
///
/// Without a time limit or gap tolerance the result is proven optimal. When
/// no partition satisfies the side constraints, the solution carries a
/// [`Certificate`] naming the constraint that binds.
pub fn solve_sp(problem: &SpProblem, options: SolveOptions) -> SpSolution {
    let start = Instant::now();
    let mut solution = search(problem, options, start);
    if solution.proof == Proof::Infeasible && solution.certificate.is_none() {
        solution.certificate = Some(certify(problem, options));
        solution.wall_time = start.elapsed();
    }
    solution
}

/// Free columns grouped by connected component of the orders they share,
/// components ordered by their smallest order.
fn components(problem: &SpProblem) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..problem.num_orders).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &j in &problem.free {
        let orders = &problem.columns[j].orders;
        for &o in &orders[1..] {
            let (a, b) = (root(&mut parent, orders[0]), root(&mut parent, o));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &j in &problem.free {
        let r = root(&mut parent, problem.columns[j].orders[0]);
        groups.entry(r).or_default().push(j);
    }
    groups.into_values().collect()
}

/// Outcome of searching one group of columns.
struct Part {
    /// Cost and chosen column ids.
    incumbent: Option<(i64, Vec<usize>)>,
    bound: i64,
    stopped: bool,
    within_gap: bool,
    nodes: u64,
}

fn search(problem: &SpProblem, options: SolveOptions, start: Instant) -> SpSolution {
    if let Some(order) = problem.conflict {
        return infeasible(0, Some(Certificate::NoPartition { order: Some(order) }), start);
    }
    let side = &problem.side;
    let mut mode_count: BTreeMap<usize, u32> = BTreeMap::new();
    for &j in &problem.fixed {
        *mode_count.entry(problem.columns[j].mode).or_insert(0) += 1;
    }
    let routes = problem.fixed.len() as u32;
    if let Some(cap) = side.max_total_routes {
        if routes > cap || (routes == cap && !problem.open_orders.is_empty()) {
            return infeasible(0, Some(Certificate::MaxTotalRoutes { cap }), start);
        }
    }
    for (&mode, &used) in &mode_count {
        if let Some(&cap) = side.per_mode_caps.get(&mode) {
            if used > cap {
                return infeasible(0, Some(Certificate::ModeCap { mode, cap }), start);
            }
        }
    }

    // side constraints couple everything; otherwise components are independent
    let parts = if side.is_empty() { components(problem) } else { vec![problem.free.clone()] };
    let deadline = options.time_limit.map(|d| start + d);
    let mut chosen: Vec<usize> = problem.fixed.iter().map(|&j| problem.columns[j].id).collect();
    let (mut cost, mut bound, mut nodes) = (problem.fixed_cost(), problem.fixed_cost(), 0);
    let (mut stopped, mut within_gap) = (false, false);
    for cols in &parts {
        let part = solve_part(problem, cols, routes, &mode_count, options.gap_tolerance, deadline);
        nodes += part.nodes;
        let Some((c, ids)) = part.incumbent else { return infeasible(nodes, None, start) };
        cost += c;
        bound += part.bound;
        chosen.extend(ids);
        stopped |= part.stopped;
        within_gap |= part.within_gap;
    }
    chosen.sort_unstable();
    let proof = if stopped {
        Proof::TimeLimited
    } else if within_gap {
        Proof::WithinGap
    } else {
        Proof::Optimal
    };
    SpSolution { chosen, objective: cost, bound, proof, nodes, certificate: None, wall_time: start.elapsed() }
}

fn solve_part(
    problem: &SpProblem,
    cols: &[usize],
    routes: u32,
    mode_count: &BTreeMap<usize, u32>,
    tolerance: f64,
    deadline: Option<Instant>,
) -> Part {
    let mut orders: Vec<usize> = cols.iter().flat_map(|&j| problem.columns[j].orders.iter().copied()).collect();
    orders.sort_unstable();
    orders.dedup();
    if !problem.side.is_empty() {
        orders = problem.open_orders.clone();
    }
    let mut s =
        Search::new(cols.iter().map(|&j| &problem.columns[j]).collect(), &orders, problem.num_orders, &problem.side);
    s.routes = routes;
    s.mode_count = mode_count.clone();
    s.tolerance = tolerance.max(0.0);
    s.deadline = deadline;
    let full: Vec<usize> = problem
        .side
        .per_mode_caps
        .iter()
        .filter(|(m, &cap)| mode_count.get(m).copied().unwrap_or(0) >= cap)
        .map(|(&m, _)| m)
        .collect();
    for k in 0..s.cols.len() {
        if full.contains(&s.cols[k].mode) {
            s.kill(k);
        }
    }
    s.dfs();
    let incumbent = s.incumbent.take().map(|(c, picks)| (c, picks.iter().map(|&j| s.cols[j].id).collect()));
    let mut bound = incumbent.as_ref().map_or(0, |(c, _)| *c);
    for b in [s.gap_cut, s.open_bound].into_iter().flatten() {
        bound = bound.min(b);
    }
    Part { incumbent, bound, stopped: s.stopped, within_gap: s.gap_cut.is_some(), nodes: s.nodes }
}

/// Finds the side constraint whose removal restores feasibility.
fn certify(problem: &SpProblem, options: SolveOptions) -> Certificate {
    let feasible = |side: SideConstraints| -> bool {
        match build_sp(problem.num_orders, problem.original.clone(), side) {
            Ok(p) => search(&p, options, Instant::now()).proof != Proof::Infeasible,
            Err(_) => false,
        }
    };
    if !feasible(SideConstraints::default()) {
        return Certificate::NoPartition { order: None };
    }
    if let Some(cap) = problem.side.max_total_routes {
        let mut relaxed = problem.side.clone();
        relaxed.max_total_routes = None;
        if feasible(relaxed) {
            return Certificate::MaxTotalRoutes { cap };
        }
    }
    for (&mode, &cap) in &problem.side.per_mode_caps {
        let mut relaxed = problem.side.clone();
        relaxed.per_mode_caps.remove(&mode);
        if feasible(relaxed) {
            return Certificate::ModeCap { mode, cap };
        }
    }
    // only a combination binds; report the first constraint present
    match (problem.side.max_total_routes, problem.side.per_mode_caps.iter().next()) {
        (Some(cap), _) => Certificate::MaxTotalRoutes { cap },
        (None, Some((&mode, &cap))) => Certificate::ModeCap { mode, cap },
        (None, None) => Certificate::NoPartition { order: None },
    }
}

/// Checks that `chosen` (column ids of `problem.original`) partitions the
/// orders within the side constraints, returning the total cost.
pub fn check_selection(problem: &SpProblem, chosen: &[usize]) -> Result<i64, SelectionError> {
    let by_id: HashMap<usize, &Column> = problem.original.iter().map(|c| (c.id, c)).collect();
    let mut times = vec![0u32; problem.num_orders];
    let mut cost = 0;
    let mut modes: BTreeMap<usize, u32> = BTreeMap::new();
    for &id in chosen {
        let c = by_id.get(&id).ok_or(SelectionError::UnknownColumn(id))?;
        cost += c.cost;
        *modes.entry(c.mode).or_insert(0) += 1;
        for &o in &c.orders {
            times[o] += 1;
        }
    }
    if let Some(o) = times.iter().position(|&t| t != 1) {
        return Err(SelectionError::NotPartition { order: o, times: times[o] });
    }
    if let Some(cap) = problem.side.max_total_routes {
        if chosen.len() as u32 > cap {
            return Err(SelectionError::Violates(Certificate::MaxTotalRoutes { cap }));
        }
    }
    for (&mode, &cap) in &problem.side.per_mode_caps {
        if modes.get(&mode).copied().unwrap_or(0) > cap {
            return Err(SelectionError::Violates(Certificate::ModeCap { mode, cap }));
        }
    }
    Ok(cost)
}

/// Exhaustive search over subsets of the supplied columns. Test oracle only.
pub fn brute_force_sp(problem: &SpProblem) -> Result<SpSolution, SpError> {
    let start = Instant::now();
    let cols = &problem.original;
    if cols.len() > BRUTE_FORCE_LIMIT {
        return Err(SpError::TooLarge(cols.len()));
    }
    struct Scan<'a> {
        cols: &'a [Column],
        covered: Vec<bool>,
        picked: Vec<usize>,
        best: Option<(i64, Vec<usize>)>,
        visited: u64,
        problem: &'a SpProblem,
    }
    impl Scan<'_> {
        fn go(&mut self, i: usize, cost: i64) {
            self.visited += 1;
            if i == self.cols.len() {
                if self.covered.iter().all(|&c| c) {
                    let ids: Vec<usize> = self.picked.iter().map(|&j| self.cols[j].id).collect();
                    if check_selection(self.problem, &ids).is_ok() && self.best.as_ref().is_none_or(|(b, _)| cost < *b)
                    {
                        self.best = Some((cost, ids));
                    }
                }
                return;
            }
            let c = &self.cols[i];
            if c.orders.iter().all(|&o| !self.covered[o]) {
                for &o in &c.orders {
                    self.covered[o] = true;
                }
                self.picked.push(i);
                self.go(i + 1, cost + c.cost);
                self.picked.pop();
                for &o in &c.orders {
                    self.covered[o] = false;
                }
            }
            self.go(i + 1, cost);
        }
    }
    let mut scan =
        Scan { cols, covered: vec![false; problem.num_orders], picked: Vec::new(), best: None, visited: 0, problem };
    scan.go(0, 0);
    Ok(match scan.best {
        Some((cost, mut chosen)) => {
            chosen.sort_unstable();
            SpSolution {
                chosen,
                objective: cost,
                bound: cost,
                proof: Proof::Optimal,
                nodes: scan.visited,
                certificate: None,
                wall_time: start.elapsed(),
            }
        }
        None => infeasible(scan.visited, Some(Certificate::NoPartition { order: None }), start),
    })
}

// ---------------------------------------------------------------------------
// External solver bridge

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("unknown column id {0}")]
    UnknownColumn(usize),
    #[error("order {order} is covered {times} times")]
    NotPartition { order: usize, times: u32 },
    #[error("selection breaks a side constraint: {0:?}")]
    Violates(Certificate),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("external solver exited with {0}")]
    SolverFailed(std::process::ExitStatus),
}

/// Problem file handed to an external solver.
///
/// `columns` lists every candidate with its id, cost in milli-units, covered
/// order indices and mode index. The solver answers with a [`SelectionFile`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format: String,
    pub num_orders: usize,
    pub columns: Vec<Column>,
    pub side_constraints: SideConstraints,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub chosen: Vec<usize>,
}

pub const PROBLEM_FORMAT: &str = "rvrp-set-partitioning/1";

pub fn write_problem(problem: &SpProblem, path: &Path) -> Result<(), SelectionError> {
    let file = ProblemFile {
        format: PROBLEM_FORMAT.into(),
        num_orders: problem.num_orders,
        columns: problem.columns.clone(),
        side_constraints: problem.side.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn read_selection(path: &Path) -> Result<Vec<usize>, SelectionError> {
    let sel: SelectionFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(sel.chosen)
}

/// Accepts an externally computed selection after re-checking it.
pub fn accept_selection(problem: &SpProblem, mut chosen: Vec<usize>) -> Result<SpSolution, SelectionError> {
    chosen.sort_unstable();
    let objective = check_selection(problem, &chosen)?;
    Ok(SpSolution {
        chosen,
        objective,
        // an outside answer proves nothing about optimality
        bound: 0,
        proof: Proof::TimeLimited,
        nodes: 0,
        certificate: None,
        wall_time: Duration::ZERO,
    })
}

/// Runs `program <problem.json> <selection.json>` in `workdir` and accepts its answer.
pub fn solve_external(problem: &SpProblem, program: &str, workdir: &Path) -> Result<SpSolution, SelectionError> {
    let start = Instant::now();
    let problem_path = workdir.join("problem.json");
    let selection_path = workdir.join("selection.json");
    write_problem(problem, &problem_path)?;
    let status = std::process::Command::new(program).arg(&problem_path).arg(&selection_path).status()?;
    if !status.success() {
        return Err(SelectionError::SolverFailed(status));
    }
    let mut solution = accept_selection(problem, read_selection(&selection_path)?)?;
    solution.wall_time = start.elapsed();
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(id: usize, cost: i64, orders: &[usize]) -> Column {
        Column { id, cost, orders: orders.to_vec(), mode: 0 }
    }

    fn example() -> Vec<Column> {
        vec![col(0, 5, &[0]), col(1, 5, &[1]), col(2, 5, &[2]), col(3, 8, &[0, 1]), col(4, 16, &[0, 1, 2])]
    }

    #[test]
    fn three_order_example() {
        let p = build_sp(3, example(), SideConstraints::default()).unwrap();
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!(s.objective, 13);
        assert_eq!(s.chosen, vec![2, 3]);
        assert_eq!(s.proof, Proof::Optimal);
        assert_eq!(brute_force_sp(&p).unwrap().objective, 13);

        let side = SideConstraints { max_total_routes: Some(1), ..Default::default() };
        let p = build_sp(3, example(), side).unwrap();
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!((s.objective, s.chosen.clone()), (16, vec![4]));
        assert_eq!(brute_force_sp(&p).unwrap().objective, 16);
    }

    #[test]
    fn single_route() {
        let p = build_sp(1, vec![col(7, 3, &[0])], SideConstraints::default()).unwrap();
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!((s.chosen, s.objective, s.proof), (vec![7], 3, Proof::Optimal));
    }

    #[test]
    fn singletons_only() {
        let cols: Vec<Column> = (0..4).map(|i| col(i, 10 + i as i64, &[i])).collect();
        let p = build_sp(4, cols, SideConstraints::default()).unwrap();
        assert_eq!(p.fixed.len(), 4);
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!(s.objective, 46);
        assert_eq!(brute_force_sp(&p).unwrap().objective, 46);
    }

    #[test]
    fn dominance_keeps_cheaper_duplicate() {
        let p = build_sp(
            2,
            vec![col(0, 12, &[0, 1]), col(1, 10, &[0, 1]), col(2, 30, &[0]), col(3, 30, &[1])],
            SideConstraints::default(),
        )
        .unwrap();
        assert_eq!(p.columns.len(), 3);
        assert!(p.columns.iter().all(|c| c.id != 0));
        assert_eq!(solve_sp(&p, SolveOptions::default()).chosen, vec![1]);
    }

    #[test]
    fn fixing_removes_orders_before_search() {
        // order 0 is only in {0,1}; that fixes it, kills {1} and {1,2}, then {2} is forced
        let cols = vec![col(0, 4, &[0, 1]), col(1, 3, &[1]), col(2, 2, &[2]), col(3, 4, &[1, 2])];
        let p = build_sp(3, cols, SideConstraints::default()).unwrap();
        let fixed_ids: Vec<usize> = p.fixed.iter().map(|&j| p.columns[j].id).collect();
        assert_eq!(fixed_ids.len(), 2);
        assert!(fixed_ids.contains(&0) && fixed_ids.contains(&2));
        assert!(p.open_orders.is_empty() && p.free.is_empty());
        assert_eq!(solve_sp(&p, SolveOptions::default()).objective, 6);
    }

    #[test]
    fn uncovered_orders_are_named() {
        assert_eq!(
            build_sp(3, vec![col(0, 1, &[1])], SideConstraints::default()).unwrap_err(),
            SpError::Uncovered(vec![0, 2])
        );
    }

    #[test]
    fn binding_side_constraint_is_certified() {
        let cols = vec![col(0, 1, &[0]), col(1, 1, &[1])];
        let side = SideConstraints { max_total_routes: Some(1), ..Default::default() };
        let p = build_sp(2, cols.clone(), side).unwrap();
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!(s.proof, Proof::Infeasible);
        assert_eq!(s.certificate, Some(Certificate::MaxTotalRoutes { cap: 1 }));

        // order 1 only rides on mode 1, which is capped at zero
        let cols = vec![col(0, 1, &[0]), Column { id: 2, cost: 5, orders: vec![0, 1], mode: 1 }];
        let side = SideConstraints { per_mode_caps: BTreeMap::from([(1, 0)]), max_total_routes: None };
        let p = build_sp(2, cols, side).unwrap();
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!(s.certificate, Some(Certificate::ModeCap { mode: 1, cap: 0 }));
    }

    #[test]
    fn covering_is_not_enough() {
        // {0,1} and {1,2} cover everything but overlap; no partition exists
        let p = build_sp(3, vec![col(0, 1, &[0, 1]), col(1, 1, &[1, 2])], SideConstraints::default()).unwrap();
        let s = solve_sp(&p, SolveOptions::default());
        assert_eq!(s.proof, Proof::Infeasible);
        assert!(matches!(s.certificate, Some(Certificate::NoPartition { .. })));
        assert_eq!(brute_force_sp(&p).unwrap().proof, Proof::Infeasible);
    }

    pub(crate) fn random_pool(rng: &mut ChaCha8Rng, max_orders: usize, max_cols: usize) -> (usize, Vec<Column>) {
        let n = rng.random_range(1..=max_orders);
        let m = rng.random_range(1..=max_cols);
        let mut cols = Vec::new();
        for id in 0..m {
            let size = rng.random_range(1..=n.min(4));
            let mut orders: Vec<usize> = (0..n).collect();
            for i in 0..size {
                let k = rng.random_range(i..n);
                orders.swap(i, k);
            }
            orders.truncate(size);
            orders.sort_unstable();
            cols.push(Column {
                id,
                cost: rng.random_range(1..=100) * size as i64,
                orders,
                mode: rng.random_range(0..2),
            });
        }
        // keep every order coverable
        for o in 0..n {
            if !cols.iter().any(|c| c.orders.contains(&o)) {
                let id = cols.len();
                cols.push(col(id, 150, &[o]));
            }
        }
        (n, cols)
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let (n, cols) = random_pool(&mut rng, 8, 18);
            let side = match rng.random_range(0..3) {
                0 => SideConstraints::default(),
                1 => SideConstraints { max_total_routes: Some(rng.random_range(1..=4)), ..Default::default() },
                _ => SideConstraints {
                    per_mode_caps: BTreeMap::from([(1, rng.random_range(0..=2))]),
                    ..Default::default()
                },
            };
            let p = build_sp(n, cols, side).unwrap();
            let fast = solve_sp(&p, SolveOptions::default());
            let slow = brute_force_sp(&p).unwrap();
            assert_eq!(fast.proof == Proof::Infeasible, slow.proof == Proof::Infeasible);
            if slow.proof != Proof::Infeasible {
                assert_eq!(fast.objective, slow.objective);
                assert_eq!(check_selection(&p, &fast.chosen).unwrap(), fast.objective);
            }
        }
    }

    #[test]
    fn bounds_stay_below_optimum_when_stopped_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (n, cols) = random_pool(&mut rng, 10, 20);
            let p = build_sp(n, cols, SideConstraints::default()).unwrap();
            let opt = brute_force_sp(&p).unwrap();
            if opt.proof == Proof::Infeasible {
                continue;
            }
            for options in [
                SolveOptions { time_limit: Some(Duration::ZERO), gap_tolerance: 0.0 },
                SolveOptions { time_limit: None, gap_tolerance: 0.5 },
            ] {
                let s = solve_sp(&p, options);
                assert!(s.bound <= opt.objective && opt.objective <= s.objective);
                assert!(
                    s.objective as f64 <= (1.0 + options.gap_tolerance) * opt.objective as f64 + 1e-9
                        || s.proof == Proof::TimeLimited
                );
            }
        }
    }

    #[test]
    fn independent_blocks_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let (n1, mut cols) = random_pool(&mut rng, 5, 10);
            let (n2, more) = random_pool(&mut rng, 5, 10);
            let first = cols.len();
            cols.extend(more.into_iter().map(|mut c| {
                c.id += first;
                c.orders.iter_mut().for_each(|o| *o += n1);
                c
            }));
            let p = build_sp(n1 + n2, cols, SideConstraints::default()).unwrap();
            let fast = solve_sp(&p, SolveOptions::default());
            let slow = brute_force_sp(&p).unwrap();
            assert_eq!(fast.proof, slow.proof);
            if slow.proof == Proof::Infeasible {
                continue;
            }
            assert_eq!(fast.objective, slow.objective);
            assert_eq!(fast.bound, fast.objective);
            assert_eq!(check_selection(&p, &fast.chosen).unwrap(), fast.objective);
        }
    }

    #[test]
    fn search_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, cols) = random_pool(&mut rng, 10, 20);
        let a = solve_sp(&build_sp(n, cols.clone(), SideConstraints::default()).unwrap(), SolveOptions::default());
        let b = solve_sp(&build_sp(n, cols, SideConstraints::default()).unwrap(), SolveOptions::default());
        assert_eq!((a.chosen, a.objective, a.nodes), (b.chosen, b.objective, b.nodes));
    }

    #[test]
    fn vacuous_route_cap_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (n, cols) = random_pool(&mut rng, 8, 15);
            let m = cols.len() as u32;
            let free =
                solve_sp(&build_sp(n, cols.clone(), SideConstraints::default()).unwrap(), SolveOptions::default());
            let capped = solve_sp(
                &build_sp(n, cols, SideConstraints { max_total_routes: Some(m), ..Default::default() }).unwrap(),
                SolveOptions::default(),
            );
            assert_eq!((free.objective, free.proof), (capped.objective, capped.proof));
        }
    }

    #[test]
    fn brute_force_guard() {
        let cols: Vec<Column> = (0..26).map(|i| col(i, 1, &[0])).collect();
        let p = build_sp(1, cols, SideConstraints::default()).unwrap();
        assert_eq!(brute_force_sp(&p).unwrap_err(), SpError::TooLarge(26));
    }

    #[test]
    fn file_bridge_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = build_sp(3, example(), SideConstraints::default()).unwrap();
        write_problem(&p, &dir.path().join("p.json")).unwrap();
        let back: ProblemFile =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
        assert_eq!(back.columns, p.columns);
        let sel = dir.path().join("s.json");
        std::fs::write(&sel, r#"{"chosen":[3,2]}"#).unwrap();
        let s = accept_selection(&p, read_selection(&sel).unwrap()).unwrap();
        assert_eq!(s.objective, 13);
        assert!(matches!(accept_selection(&p, vec![3, 4]), Err(SelectionError::NotPartition { .. })));
        assert!(matches!(accept_selection(&p, vec![99]), Err(SelectionError::UnknownColumn(99))));
    }
}
