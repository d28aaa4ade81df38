//! `rvrp`: solve, validate, generate and benchmark routing instances.
//!
//! Exit codes: 0 success, 1 infeasible instance, 2 invalid input,
//! 3 time limit reached with an incumbent, 4 internal error.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use rvrp_core::feasibility::{validate, InputError, Verdict};
use rvrp_core::model::{validate_instance, Direction, Instance, LocationIx, ModeIx, Network, OrderIx, SolutionStatus};
use rvrp_core::pipeline::{
    routes_csv, run, ConfigFile, DirectionSetting, PipelineError, Preset, RunConfig, SolutionFile,
};
use rvrp_core::sp::Proof;
use rvrp_core::tools::{bench, generate, summarize, table, write_atomic, BenchError, BenchSpec, ProfileSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Exit {
    Success = 0,
    Infeasible = 1,
    InvalidInput = 2,
    Timeout = 3,
    Internal = 4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Parser)]
#[command(name = "rvrp", version, about = "Multi-stop truck routing by route generation and set partitioning")]
struct Cli {
    /// Worker threads; defaults to the number of available cores. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// `text` for people, `structured` for one JSON object on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    output_format: Format,
    /// File to append the run's manifest line to. Solve, gen and bench default
    /// to `manifest.jsonl` beside their output; validation writes one only when asked.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance; writes solution.json, routes.csv and report.json.
    ///
    /// Settings are taken from flags first, then the config file, then defaults.
    Solve(SolveArgs),
    /// Check an instance file against every schema and consistency rule.
    Validate { instance: PathBuf },
    /// Check one route description against an instance.
    ValidateRoute { instance: PathBuf, route: PathBuf },
    /// Generate an instance from a profile file.
    Gen { profile: PathBuf, out: PathBuf },
    /// Run presets over generated profiles; writes gap, time and cost tables.
    Bench { spec: PathBuf, out_dir: PathBuf },
}

#[derive(clap::Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Solver configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "rvrp-out")]
    out: PathBuf,
    /// exact, bfd, bkk10 or bkk.
    #[arg(long)]
    preset: Option<Preset>,
    /// Solver time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// 1PMD, MP1D or both.
    #[arg(long)]
    direction: Option<DirectionSetting>,
}

/// What a command produced: its exit code, lines for people, and a JSON payload.
struct Outcome {
    exit: Exit,
    lines: Vec<String>,
    data: Value,
    manifest: Option<Value>,
}

impl Outcome {
    fn fail(exit: Exit, lines: Vec<String>) -> Outcome {
        Outcome { exit, lines, data: Value::Null, manifest: None }
    }
}

fn invalid(msg: impl Into<String>) -> Outcome {
    Outcome::fail(Exit::InvalidInput, vec![msg.into()])
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>), Outcome> {
    let bytes = std::fs::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    match serde_json::from_slice(&bytes) {
        Ok(v) => Ok((v, bytes)),
        Err(e) => {
            let text = e.to_string();
            let msg = text.rsplit_once(" at line ").map_or(text.as_str(), |(m, _)| m);
            Err(invalid(format!("{}:{}:{}: {msg}", path.display(), e.line(), e.column())))
        }
    }
}

fn load_instance(path: &Path) -> Result<(Instance, Vec<u8>), Outcome> {
    let (inst, bytes): (Instance, _) = read_json(path)?;
    let diags = validate_instance(&inst);
    if !diags.is_empty() {
        return Err(Outcome::fail(
            Exit::InvalidInput,
            diags.iter().map(|d| format!("{}: {d}", path.display())).collect(),
        ));
    }
    Ok((inst, bytes))
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_out(path: &Path, body: &[u8]) -> Result<(), Outcome> {
    write_atomic(path, body).map_err(|e| Outcome::fail(Exit::Internal, vec![format!("{}: {e}", path.display())]))
}

fn pipeline_failure(e: PipelineError) -> Outcome {
    match e {
        PipelineError::InvalidInstance(diags) => {
            Outcome::fail(Exit::InvalidInput, diags.iter().map(|d| d.to_string()).collect())
        }
        PipelineError::Config(_) | PipelineError::Consolidation(_) => invalid(e.to_string()),
        PipelineError::Uncoverable(ids) => Outcome {
            exit: Exit::Infeasible,
            lines: vec![format!("infeasible: no feasible route covers {}", ids.join(", "))],
            data: json!({ "uncoverable": ids }),
            manifest: None,
        },
        e => Outcome::fail(Exit::Internal, vec![e.to_string()]),
    }
}

fn resolve_config(args: &SolveArgs) -> Result<(RunConfig, Option<u64>), Outcome> {
    let file = match &args.config {
        Some(p) => read_json::<ConfigFile>(p)?.0,
        None => ConfigFile::default(),
    };
    let mut config = file.resolve();
    if let Some(p) = args.preset {
        config.name = p.name().into();
        config.generator = p.generator();
    }
    if let Some(d) = args.direction {
        config.generator.direction = d;
    }
    if let Some(t) = args.time_limit {
        config.solver.time_limit_secs = Some(t);
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    config.check().map_err(|e| invalid(e.to_string()))?;
    Ok((config, args.seed.or(file.seed)))
}

fn cmd_solve(args: &SolveArgs) -> Result<Outcome, Outcome> {
    let (instance, bytes) = load_instance(&args.instance)?;
    let (config, _) = resolve_config(args)?;
    let config_json = serde_json::to_string(&config).expect("config serializes");
    let out = run(&instance, &config).map_err(pipeline_failure)?;

    let solution = SolutionFile::new(&out.network, &out.solution);
    let solution_text = serde_json::to_string_pretty(&solution).expect("solution serializes");
    let report_text = serde_json::to_string_pretty(&out.report).expect("report serializes");
    write_out(&args.out.join("solution.json"), solution_text.as_bytes())?;
    write_out(&args.out.join("routes.csv"), routes_csv(&out.network, &out.solution).as_bytes())?;
    write_out(&args.out.join("report.json"), report_text.as_bytes())?;

    let r = &out.report;
    let exit = match (r.status, r.proof) {
        (SolutionStatus::Infeasible, _) => Exit::Infeasible,
        (_, Proof::TimeLimited) => Exit::Timeout,
        _ => Exit::Success,
    };
    let mut lines = vec![format!(
        "{}: {:?}, cost {} with {} routes (bound {}), {} candidates, {} search nodes",
        config.name, r.status, r.total_cost, r.route_count, r.lower_bound, r.pool_size, r.sp_nodes
    )];
    if let Some(c) = &r.certificate {
        lines.push(format!("infeasible: {c:?}"));
    }
    if exit == Exit::Timeout {
        lines.push(format!("time limit reached; incumbent {} and bound {}", r.total_cost, r.lower_bound));
    }
    lines.push(format!("wrote {}", args.out.display()));
    Ok(Outcome {
        exit,
        lines,
        data: json!({ "solution": solution, "report": r }),
        manifest: Some(json!({
            "seed": config.seed,
            "preset": config.name,
            "config_hash": sha256(config_json.as_bytes()),
            "instance_hash": sha256(&bytes),
        })),
    })
}

fn cmd_validate(path: &Path) -> Result<Outcome, Outcome> {
    let (instance, bytes) = load_instance(path)?;
    let s = summarize(&instance);
    Ok(Outcome {
        exit: Exit::Success,
        lines: vec![format!(
            "{}: ok ({} orders, {} locations, {} modes)",
            path.display(),
            s.orders,
            instance.locations.len(),
            s.modes
        )],
        data: json!({ "summary": s }),
        manifest: Some(json!({ "instance_hash": sha256(&bytes) })),
    })
}

/// A single route description, in real stop order.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RouteFile {
    mode: String,
    #[serde(default = "one_pickup")]
    direction: Direction,
    stops: Vec<String>,
    orders: Vec<String>,
}

fn one_pickup() -> Direction {
    Direction::OnePickupMultiDrop
}

fn cmd_validate_route(instance_path: &Path, route_path: &Path) -> Result<Outcome, Outcome> {
    let (instance, _) = load_instance(instance_path)?;
    let (route, bytes): (RouteFile, _) = read_json(route_path)?;
    let net = Network::new(&instance).map_err(|d| invalid(format!("{} diagnostics", d.len())))?;
    let unknown = |kind: &str, id: &str| invalid(format!("{}: unknown {kind} {id:?}", route_path.display()));
    let mode: ModeIx = net.mode_ix(&route.mode).ok_or_else(|| unknown("mode", &route.mode))?;
    let stops: Vec<LocationIx> = route
        .stops
        .iter()
        .map(|s| net.location_ix(s).ok_or_else(|| unknown("location", s)))
        .collect::<Result<_, _>>()?;
    let mut orders: Vec<OrderIx> =
        route.orders.iter().map(|o| net.order_ix(o).ok_or_else(|| unknown("order", o))).collect::<Result<_, _>>()?;
    orders.sort_unstable();
    let verdict = validate(&net, mode, route.direction, &stops, &orders).map_err(|e: InputError| {
        let detail = match e {
            InputError::RepeatedStop(i) | InputError::IdleStop(i) => {
                format!("{e} ({})", net.location_id(LocationIx::new(i)))
            }
            InputError::RepeatedOrder(i) | InputError::OrderOffRoute(i) => {
                format!("{e} ({})", net.order_id(OrderIx::new(i)))
            }
            e => e.to_string(),
        };
        invalid(format!("{}: {detail}", route_path.display()))
    })?;
    let manifest = Some(json!({ "route_hash": sha256(&bytes) }));
    Ok(match verdict {
        Verdict::Infeasible(v) => Outcome {
            exit: Exit::Infeasible,
            lines: vec![format!("infeasible violation={v}")],
            data: json!({ "feasible": false, "violation": v }),
            manifest,
        },
        Verdict::Feasible(f) => {
            let mut lines = vec![format!(
                "feasible: weight {} distance {} oor {} cost {}",
                f.weight, f.distances.total_distance, f.distances.oor_distance, f.cost
            )];
            for (id, t) in route.stops.iter().zip(&f.schedule.stops) {
                lines.push(format!("  {id}: arrive {} start {} leave {}", t.arrival, t.service_start, t.departure));
            }
            for (a, b) in &f.schedule.rest_periods {
                lines.push(format!("  rest {a} .. {b}"));
            }
            Outcome {
                exit: Exit::Success,
                lines,
                data: json!({
                    "feasible": true,
                    "weight": f.weight,
                    "total_distance": f.distances.total_distance,
                    "cost": f.cost,
                    "schedule": f.schedule,
                }),
                manifest,
            }
        }
    })
}

fn cmd_gen(profile_path: &Path, out: &Path) -> Result<Outcome, Outcome> {
    let (profile, bytes): (ProfileSpec, _) = read_json(profile_path)?;
    let instance = generate(&profile).map_err(|e| invalid(e.to_string()))?;
    write_out(out, instance.to_json().as_bytes())?;
    let s = summarize(&instance);
    Ok(Outcome {
        exit: Exit::Success,
        lines: vec![
            format!("wrote {}", out.display()),
            format!(
                "{} orders, {} origins, {} destinations, weight min {:.1} avg {:.1} max {:.1}",
                s.orders, s.origins, s.destinations, s.min_weight, s.avg_weight, s.max_weight
            ),
        ],
        data: json!({ "summary": s }),
        manifest: Some(json!({ "seed": profile.seed, "config_hash": sha256(&bytes) })),
    })
}

fn cmd_bench(spec_path: &Path, out_dir: &Path) -> Result<Outcome, Outcome> {
    let (spec, bytes): (BenchSpec, _) = read_json(spec_path)?;
    let result = bench(&spec, out_dir).map_err(|e| match e {
        BenchError::Profile(p) => invalid(p.to_string()),
        BenchError::Run { instance, config, source } => {
            let mut o = pipeline_failure(source);
            o.lines.insert(0, format!("{instance} / {config}"));
            o
        }
        e => Outcome::fail(Exit::Internal, vec![e.to_string()]),
    })?;
    let gaps = table(&result, |c| c.relative_gap).map_err(|e| Outcome::fail(Exit::Internal, vec![e.to_string()]))?;
    let mut lines: Vec<String> = gaps.lines().map(str::to_string).collect();
    lines.push(format!("wrote {}", out_dir.display()));
    Ok(Outcome {
        exit: Exit::Success,
        lines,
        data: json!({ "manifest": result.manifest }),
        manifest: Some(json!({
            "seeds": result.manifest.seeds,
            "config_hash": sha256(&bytes),
        })),
    })
}

fn append_manifest(path: &Path, line: &Value) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build_global() {
        eprintln!("thread pool: {e}");
        return ExitCode::from(Exit::Internal as u8);
    }

    let (name, default_manifest, result) = match &cli.command {
        Command::Solve(a) => ("solve", Some(a.out.join("manifest.jsonl")), cmd_solve(a)),
        Command::Validate { instance } => ("validate", None, cmd_validate(instance)),
        Command::ValidateRoute { instance, route } => ("validate-route", None, cmd_validate_route(instance, route)),
        Command::Gen { profile, out } => {
            let dir = out.parent().unwrap_or(Path::new("")).join("manifest.jsonl");
            ("gen", Some(dir), cmd_gen(profile, out))
        }
        Command::Bench { spec, out_dir } => ("bench", Some(out_dir.join("manifest.jsonl")), cmd_bench(spec, out_dir)),
    };
    let outcome = result.unwrap_or_else(|o| o);

    match cli.output_format {
        Format::Text => {
            for line in &outcome.lines {
                if outcome.exit == Exit::Success {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
        }
        Format::Structured => {
            let doc = json!({
                "command": name,
                "exit_code": outcome.exit as u8,
                "messages": outcome.lines,
                "data": outcome.data,
            });
            println!("{doc}");
        }
    }

    let manifest_path = cli.manifest.clone().or(default_manifest.filter(|_| outcome.manifest.is_some()));
    if let Some(path) = manifest_path {
        let line = json!({
            "command": name,
            "args": std::env::args().skip(1).collect::<Vec<_>>(),
            "exit_code": outcome.exit as u8,
            "version": env!("CARGO_PKG_VERSION"),
            "jobs": cli.jobs,
            "run": outcome.manifest,
        });
        if let Err(e) = append_manifest(&path, &line) {
            eprintln!("manifest {}: {e}", path.display());
        }
    }
    ExitCode::from(outcome.exit as u8)
}
