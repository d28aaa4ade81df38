//! Synthetic instances shaped after real dataset feature profiles, and a
//! benchmark harness that runs presets over them and writes gap, time and cost
//! tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::{
    CostRate, Distance, Instance, Location, Order, Point, SolutionStatus, TimeWindow, Timestamp, TransportMode, Weight,
};
use crate::pipeline::{relative_gap, run, PipelineError, Preset, RunConfig, RunReport};

const DAY: f64 = 1440.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightTargets {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

/// Feature targets for a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    pub n_orders: usize,
    pub n_origins: usize,
    pub n_destinations: usize,
    pub weight: WeightTargets,
    /// One transport mode per entry.
    pub capacities: Vec<f64>,
    pub max_drops: u32,
    #[serde(default)]
    pub max_distance: Option<f64>,
    #[serde(default)]
    pub max_oor: Option<f64>,
    #[serde(default)]
    pub max_first_last: Option<f64>,
    /// Mean delivery-window span in days.
    pub window_span_days: f64,
    /// Pickup windows open at day 0 and stay open this long.
    #[serde(default = "default_pickup_span")]
    pub pickup_span_days: f64,
    /// Side of the square that locations are scattered in.
    #[serde(default = "default_box")]
    pub box_size: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Cost per distance unit for the smallest truck.
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_pickup_span() -> f64 {
    0.5
}

fn default_box() -> f64 {
    350.0
}

fn default_speed() -> f64 {
    50.0
}

fn default_rate() -> f64 {
    1.0
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile {name:?}: {reason}")]
    Invalid { name: String, reason: String },
}

impl ProfileSpec {
    /// Shaped after the first pilot dataset: 73 orders, 2 origins, 21 destinations.
    pub fn pilot_one() -> ProfileSpec {
        ProfileSpec {
            name: "pilot-1".into(),
            n_orders: 73,
            n_origins: 2,
            n_destinations: 21,
            weight: WeightTargets { min: 157.0, avg: 9150.0, max: 19_788.0 },
            capacities: vec![20_000.0, 20_000.0],
            max_drops: 4,
            max_distance: None,
            max_oor: Some(400.0),
            max_first_last: None,
            window_span_days: 4.67,
            pickup_span_days: default_pickup_span(),
            box_size: default_box(),
            speed: default_speed(),
            rate: default_rate(),
            seed: 1,
        }
    }

    /// Shaped after the second pilot dataset: many destinations, two drops, short first-to-last hops.
    pub fn pilot_two() -> ProfileSpec {
        ProfileSpec {
            name: "pilot-2".into(),
            n_orders: 113,
            n_origins: 2,
            n_destinations: 104,
            weight: WeightTargets { min: 153.0, avg: 2038.0, max: 28_120.0 },
            capacities: vec![20_000.0, 42_000.0],
            max_drops: 2,
            max_distance: None,
            max_oor: Some(400.0),
            max_first_last: Some(125.0),
            window_span_days: 9.89,
            pickup_span_days: default_pickup_span(),
            box_size: default_box(),
            speed: default_speed(),
            rate: default_rate(),
            seed: 2,
        }
    }

    pub fn check(&self) -> Result<(), ProfileError> {
        let fail = |reason: String| Err(ProfileError::Invalid { name: self.name.clone(), reason });
        if self.n_origins == 0 || self.n_destinations == 0 {
            return fail("needs at least one origin and one destination".into());
        }
        if self.n_orders < self.n_origins.max(self.n_destinations) {
            return fail(format!(
                "{} orders cannot touch {} origins and {} destinations",
                self.n_orders, self.n_origins, self.n_destinations
            ));
        }
        let w = self.weight;
        if !(w.min > 0.0 && w.min <= w.max && w.min.is_finite() && w.max.is_finite()) {
            return fail(format!("weight range [{}, {}] must be positive and ordered", w.min, w.max));
        }
        if !(w.min <= w.avg && w.avg <= w.max) {
            return fail(format!("average weight {} lies outside [{}, {}]", w.avg, w.min, w.max));
        }
        if w.min < w.max && (w.avg == w.min || w.avg == w.max) && self.n_orders > 1 {
            return fail(format!("average weight {} sits on a bound of a nondegenerate range", w.avg));
        }
        if self.capacities.is_empty() || self.capacities.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return fail("capacities must be a nonempty list of positive numbers".into());
        }
        let largest = self.capacities.iter().copied().fold(0.0, f64::max);
        if w.max > largest {
            return fail(format!("max weight {} exceeds the largest capacity {largest}", w.max));
        }
        if self.max_drops == 0 {
            return fail("max_drops must be at least 1".into());
        }
        for (label, v) in [
            ("window_span_days", self.window_span_days),
            ("pickup_span_days", self.pickup_span_days),
            ("box_size", self.box_size),
            ("speed", self.speed),
            ("rate", self.rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{label} must be positive"));
            }
        }
        if let Some(d) = self.max_distance {
            if d < self.box_size * std::f64::consts::SQRT_2 {
                return fail(format!(
                    "max_distance {d} is shorter than the box diagonal; direct lanes could be infeasible"
                ));
            }
        }
        Ok(())
    }
}

/// Mean of a log-normal truncated to `[lo, hi]`.
fn truncated_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let n = Normal::standard();
    let (a, b) = ((lo.ln() - mu) / sigma, (hi.ln() - mu) / sigma);
    let mass = n.cdf(b) - n.cdf(a);
    if mass <= 0.0 {
        return if b <= 0.0 { hi } else { lo };
    }
    (mu + sigma * sigma / 2.0).exp() * (n.cdf(b - sigma) - n.cdf(a - sigma)) / mass
}

/// Location parameter whose truncated mean equals `avg`, by bisection.
fn fit_mu(sigma: f64, w: WeightTargets) -> f64 {
    let (mut lo, mut hi) = (w.min.ln() - 10.0 * sigma, w.max.ln() + 10.0 * sigma);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if truncated_mean(mid, sigma, w.min, w.max) < w.avg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

/// Draws `n` weights from a log-normal truncated to `[min, max]` whose mean is
/// `avg`; one draw is pinned to each bound so the extremes are exact.
fn draw_weights(rng: &mut ChaCha8Rng, n: usize, w: WeightTargets) -> Vec<f64> {
    if w.min == w.max || n == 1 {
        return vec![if n == 1 { w.avg } else { w.min }; n];
    }
    let sigma = (w.max / w.min).ln() / 4.0;
    let mu = fit_mu(sigma, w);
    let normal = Normal::new(mu, sigma).expect("sigma is positive");
    let (ca, cb) = (normal.cdf(w.min.ln()), normal.cdf(w.max.ln()));
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n)
            .map(|i| match i {
                0 => w.min,
                1 => w.max,
                _ => {
                    let u = ca + (cb - ca) * rng.random::<f64>();
                    normal.inverse_cdf(u.clamp(ca, cb)).exp().clamp(w.min, w.max)
                }
            })
            .map(|x| (x * 1000.0).round() / 1000.0)
            .collect();
        // spread the pinned extremes instead of always leading with them
        for i in (1..n).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        v
    };
    let miss = |v: &[f64]| (v.iter().sum::<f64>() / n as f64 - w.avg).abs() / w.avg;
    let mut best = sample(rng);
    for _ in 1..50 {
        if miss(&best) <= 0.10 {
            break;
        }
        let next = sample(rng);
        if miss(&next) < miss(&best) {
            best = next;
        }
    }
    best
}

fn minutes(m: f64) -> Timestamp {
    Timestamp(m.round() as i64)
}

/// Builds an instance from a profile. A pure function of the profile.
pub fn generate(profile: &ProfileSpec) -> Result<Instance, ProfileError> {
    profile.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let side = profile.box_size;
    let place = |id: String, rng: &mut ChaCha8Rng| Location {
        id,
        coordinates: Some(Point::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side))),
        region_tags: BTreeSet::new(),
    };
    let origins: Vec<Location> = (1..=profile.n_origins).map(|i| place(format!("O{i}"), &mut rng)).collect();
    let destinations: Vec<Location> = (1..=profile.n_destinations).map(|i| place(format!("D{i}"), &mut rng)).collect();

    let weights = draw_weights(&mut rng, profile.n_orders, profile.weight);
    let pickup = TimeWindow::new(Timestamp(0), minutes(profile.pickup_span_days * DAY));
    let mut orders = Vec::with_capacity(profile.n_orders);
    for (i, &weight) in weights.iter().enumerate() {
        // the first orders touch every origin and destination once
        let (o, d) = if i < profile.n_origins.max(profile.n_destinations) {
            (i % profile.n_origins, i % profile.n_destinations)
        } else {
            (rng.random_range(0..profile.n_origins), rng.random_range(0..profile.n_destinations))
        };
        let (a, b) = (origins[o].coordinates.unwrap(), destinations[d].coordinates.unwrap());
        let drive = ((a.x - b.x).hypot(a.y - b.y) / profile.speed * 60.0).ceil();
        let span = profile.window_span_days * DAY * rng.random_range(0.5..=1.5);
        let opens = rng.random_range(0.0..=DAY);
        // a direct truck leaving when pickup opens must be able to make it
        let closes = (opens + span).max(drive);
        orders.push(Order {
            id: format!("R{}", i + 1),
            origin: origins[o].id.clone(),
            destination: destinations[d].id.clone(),
            weight: Weight::from_units(weight),
            pickup_window: pickup,
            delivery_window: TimeWindow::new(minutes(opens.min(closes)), minutes(closes)),
            product_tags: BTreeSet::new(),
            position_requirement: None,
        });
    }

    let smallest = profile.capacities.iter().copied().fold(f64::INFINITY, f64::min);
    let modes = profile
        .capacities
        .iter()
        .enumerate()
        .map(|(i, &cap)| {
            let mut m = TransportMode::basic(&format!("T{}", i + 1), cap, profile.max_drops, 1.0, profile.speed);
            // bigger trucks cost more per mile, but less per unit carried
            m.cost_rate = CostRate::flat(profile.rate * (cap / smallest).sqrt());
            m.max_total_distance = profile.max_distance.map(Distance::from_units);
            m.max_oor_distance = profile.max_oor.map(Distance::from_units);
            m.max_first_last_drop_distance = profile.max_first_last.map(Distance::from_units);
            m
        })
        .collect();

    Ok(Instance {
        weight_unit: "pound".into(),
        locations: origins.into_iter().chain(destinations).collect(),
        orders,
        modes,
        overlay: Default::default(),
        distance_metric: Default::default(),
        distance_matrix: None,
    })
}

/// The feature rows used to describe datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub orders: usize,
    pub modes: usize,
    pub min_weight: f64,
    pub avg_weight: f64,
    pub max_weight: f64,
    pub total_weight: f64,
    pub origins: usize,
    pub destinations: usize,
    pub smallest_capacity: f64,
    pub largest_capacity: f64,
    pub max_drops: u32,
    pub max_distance: Option<f64>,
    pub max_oor: Option<f64>,
    pub max_first_last: Option<f64>,
    pub avg_window_span_days: f64,
}

pub fn summarize(instance: &Instance) -> Summary {
    let weights: Vec<f64> = instance.orders.iter().map(|o| o.weight.units()).collect();
    let n = weights.len().max(1) as f64;
    let total: f64 = weights.iter().sum();
    let origins: BTreeSet<&str> = instance.orders.iter().map(|o| o.origin.as_str()).collect();
    let destinations: BTreeSet<&str> = instance.orders.iter().map(|o| o.destination.as_str()).collect();
    let caps: Vec<f64> = instance.modes.iter().map(|m| m.capacity.units()).collect();
    let widest =
        |f: fn(&TransportMode) -> Option<Distance>| instance.modes.iter().filter_map(f).max().map(|d| d.units());
    let spans: f64 = instance.orders.iter().map(|o| o.delivery_window.span().0 as f64 / DAY).sum();
    Summary {
        orders: instance.orders.len(),
        modes: instance.modes.len(),
        min_weight: weights.iter().copied().fold(f64::INFINITY, f64::min),
        avg_weight: total / n,
        max_weight: weights.iter().copied().fold(0.0, f64::max),
        total_weight: total,
        origins: origins.len(),
        destinations: destinations.len(),
        smallest_capacity: caps.iter().copied().fold(f64::INFINITY, f64::min),
        largest_capacity: caps.iter().copied().fold(0.0, f64::max),
        max_drops: instance.modes.iter().map(|m| m.max_drops).max().unwrap_or(0),
        max_distance: widest(|m| m.max_total_distance),
        max_oor: widest(|m| m.max_oor_distance),
        max_first_last: widest(|m| m.max_first_last_drop_distance),
        avg_window_span_days: spans / n,
    }
}

/// A batch of profiles solved with several presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub profiles: Vec<ProfileSpec>,
    #[serde(default = "default_configs")]
    pub configs: Vec<Preset>,
    #[serde(default = "default_baseline")]
    pub baseline: Preset,
    /// Per-run solver budget; a run that stops on it is reported as NA.
    #[serde(default)]
    pub time_limit_secs: Option<f64>,
    /// Per-run generation budget in candidate routes; exceeding it is also NA.
    #[serde(default)]
    pub max_pool_size: Option<usize>,
    /// Gaps above this percentage are flagged.
    #[serde(default = "default_flag")]
    pub flag_percent: f64,
}

fn default_configs() -> Vec<Preset> {
    vec![Preset::Bfd, Preset::Bkk10, Preset::Bkk]
}

fn default_baseline() -> Preset {
    Preset::Exact
}

fn default_flag() -> f64 {
    crate::pipeline::GAP_FLAG_PERCENT
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("{instance} / {config}: {source}")]
    Run { instance: String, config: String, source: PipelineError },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One (instance, config) cell. `report` is `None` when the run hit its budget.
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub instance: String,
    pub config: String,
    pub report: Option<RunReport>,
    pub relative_gap: Option<f64>,
    pub gap_flagged: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchManifest {
    pub version: String,
    pub baseline: String,
    pub configs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub time_limit_secs: Option<f64>,
    pub max_pool_size: Option<usize>,
    pub weight_model: String,
    /// Instances whose baseline did not finish; their gaps use the best cost found.
    pub inexact_baselines: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub cells: Vec<BenchCell>,
    pub manifest: BenchManifest,
}

fn budgeted(preset: Preset, spec: &BenchSpec) -> RunConfig {
    let mut c = RunConfig::preset(preset);
    c.solver.time_limit_secs = spec.time_limit_secs;
    c.generator.max_pool_size = spec.max_pool_size;
    c
}

fn solve_cell(instance: &Instance, name: &str, config: &RunConfig) -> Result<Option<RunReport>, BenchError> {
    match run(instance, config) {
        Ok(out) if out.report.status == SolutionStatus::FeasibleWithBound => Ok(None),
        Ok(out) => Ok(Some(out.report)),
        Err(PipelineError::PoolLimit(_)) => Ok(None),
        Err(source) => Err(BenchError::Run { instance: name.into(), config: config.name.clone(), source }),
    }
}

/// Runs the baseline and every config on every profile. Profiles run
/// concurrently; cells come back in (profile, baseline-then-configs) order.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchResult, BenchError> {
    let mut presets = vec![spec.baseline];
    presets.extend(spec.configs.iter().copied().filter(|&p| p != spec.baseline));

    let per_profile: Vec<Result<(Vec<BenchCell>, bool), BenchError>> = spec
        .profiles
        .par_iter()
        .map(|profile| {
            let instance = generate(profile)?;
            let mut reports = Vec::new();
            for &p in &presets {
                reports.push(solve_cell(&instance, &profile.name, &budgeted(p, spec))?);
            }
            let exact = reports[0].as_ref().is_some_and(|r| r.status == SolutionStatus::Optimal);
            let reference = if exact {
                reports[0].as_ref().map(|r| r.total_cost)
            } else {
                reports.iter().flatten().filter(|r| r.status != SolutionStatus::Infeasible).map(|r| r.total_cost).min()
            };
            let cells = presets
                .iter()
                .zip(reports)
                .map(|(p, report)| {
                    let gap = match (&report, reference) {
                        (Some(r), Some(base)) if r.status != SolutionStatus::Infeasible => {
                            Some(relative_gap(r.total_cost, base)).filter(|g| g.is_finite())
                        }
                        _ => None,
                    };
                    BenchCell {
                        instance: profile.name.clone(),
                        config: p.name().into(),
                        report,
                        relative_gap: gap,
                        gap_flagged: gap.map(|g| g > spec.flag_percent),
                    }
                })
                .collect();
            Ok((cells, exact))
        })
        .collect();

    let mut cells = Vec::new();
    let mut inexact = Vec::new();
    for (profile, r) in spec.profiles.iter().zip(per_profile) {
        let (c, exact) = r?;
        if !exact {
            inexact.push(profile.name.clone());
        }
        cells.extend(c);
    }
    let manifest = BenchManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        baseline: spec.baseline.name().into(),
        configs: presets.iter().map(|p| p.name().to_string()).collect(),
        seeds: spec.profiles.iter().map(|p| (p.name.clone(), p.seed)).collect(),
        time_limit_secs: spec.time_limit_secs,
        max_pool_size: spec.max_pool_size,
        weight_model: "truncated log-normal fitted to (min, avg, max); an approximation of real weight skew".into(),
        inexact_baselines: inexact,
        files: Vec::new(),
    };
    Ok(BenchResult { cells, manifest })
}

/// Config-by-instance table of one statistic; missing cells read `NA`.
pub fn table(result: &BenchResult, value: impl Fn(&BenchCell) -> Option<f64>) -> Result<String, BenchError> {
    let mut instances: Vec<&str> = Vec::new();
    let mut configs: Vec<&str> = Vec::new();
    for c in &result.cells {
        if !instances.contains(&c.instance.as_str()) {
            instances.push(&c.instance);
        }
        if !configs.contains(&c.config.as_str()) {
            configs.push(&c.config);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("config").chain(instances.iter().copied()))?;
    for cfg in &configs {
        let mut row = vec![cfg.to_string()];
        for inst in &instances {
            let cell = result.cells.iter().find(|c| c.config == *cfg && c.instance == *inst);
            row.push(match cell.and_then(&value) {
                Some(v) => format!("{v:.3}"),
                None => "NA".into(),
            });
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Runs the batch and writes `gaps.csv`, `times.csv`, `costs.csv`,
/// `reports.json` and `manifest.json` into `out_dir`.
pub fn bench(spec: &BenchSpec, out_dir: &Path) -> Result<BenchResult, BenchError> {
    let mut result = run_bench(spec)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), BenchError> {
        let path = out_dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    put("gaps.csv", table(&result, |c| c.relative_gap)?)?;
    put("times.csv", table(&result, |c| c.report.as_ref().map(|r| r.timings.total_secs))?)?;
    put("costs.csv", table(&result, |c| c.report.as_ref().map(|r| r.total_cost.units()))?)?;
    put("reports.json", serde_json::to_string_pretty(&result.cells).expect("cells serialize"))?;
    result.manifest.files = written
        .iter()
        .chain(std::iter::once(&out_dir.join("manifest.json")))
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = serde_json::to_string_pretty(&result.manifest).expect("manifest serializes");
    write_atomic(&out_dir.join("manifest.json"), manifest.as_bytes())?;
    Ok(result)
}
