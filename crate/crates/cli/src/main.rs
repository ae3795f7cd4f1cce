//! `dynplan` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 solver or
//! validation failure.

use clap::{Args, Parser, Subcommand};
use dynplan::graph::{OrderingPolicy, SolveStats};
use dynplan::planner::{
    load_config, load_suite, open_session, plan_batch, plan_from, build_graph, validate_trajectory, Goal, GraphCounts,
    LoadedConfig, PlanOutcome, PlanningProblem, ReplanChange, ReplanReport, SuiteSummary, Tolerances, Trajectory,
    ValidationReport,
};
use dynplan::robot::{bundled_model, load_model_file, RobotModel};
use dynplan::sdf::load_scene_file;
use dynplan::Error;
use nalgebra::DVector;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "dynplan", version, about = "Kinodynamic motion planning on dynamic factor graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Override the number of trajectory intervals N.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Override the horizon T in seconds.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Override the benchmark seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Elimination ordering: forward or mindegree.
    #[arg(long, global = true)]
    ordering: Option<OrderingPolicy>,
    /// Write the solve statistics JSON here.
    #[arg(long, global = true, value_name = "PATH")]
    json_stats: Option<PathBuf>,
    /// Replan: also rerun batch solves and report the speedup.
    #[arg(long, global = true)]
    compare: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a planning problem in batch.
    Plan {
        config: PathBuf,
        /// Write trajectory.csv, trajectory.json, stats.json and plot.dat here
        /// instead of the paths named in the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Solve, change the goal or scene, and replan incrementally.
    Replan {
        config: PathBuf,
        /// New goal configuration, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "scene_delta")]
        new_goal: Option<Vec<f64>>,
        /// Scene document that replaces the current scene.
        #[arg(long, required_unless_present = "new_goal")]
        scene_delta: Option<PathBuf>,
        /// Directory for original.csv, replanned.csv and replan_stats.json.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run a seeded benchmark suite.
    Benchmark {
        suite: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Write the summary JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an exported trajectory against a model and scene.
    Validate {
        trajectory: PathBuf,
        /// Take model, scene, goal and tolerances from this problem config.
        #[arg(long, conflicts_with_all = ["model", "scene"])]
        config: Option<PathBuf>,
        /// Bundled model name or model file.
        #[arg(long, required_unless_present = "config")]
        model: Option<String>,
        /// Scene document.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

/// Failures mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Graph(g) => Failure::Solver(g.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Plan { config, out_dir } => cmd_plan(config, out_dir.as_deref(), &cli.global),
        Command::Replan { config, new_goal, scene_delta, out_dir } => {
            cmd_replan(config, new_goal.as_deref(), scene_delta.as_deref(), out_dir, &cli.global)
        }
        Command::Benchmark { suite, trials, out } => cmd_benchmark(suite, *trials, out.as_deref(), &cli.global),
        Command::Validate { trajectory, config, model, scene } => {
            cmd_validate(trajectory, config.as_deref(), model.as_deref(), scene.as_deref())
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_problem(path: &Path, g: &Global) -> Result<(LoadedConfig, PlanningProblem), Failure> {
    let loaded = load_config(path)?;
    let mut p = loaded.problem()?;
    if let Some(n) = g.steps {
        p.steps = n;
    }
    if let Some(t) = g.horizon {
        p.horizon = t;
    }
    if let Some(o) = g.ordering {
        p.solver.ordering = o;
    }
    p.validate()?;
    Ok((loaded, p))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

#[derive(Serialize)]
struct PlanStats<'a> {
    success: bool,
    max_equality_residual: f64,
    #[serde(flatten)]
    stats: &'a SolveStats,
    counts: &'a GraphCounts,
    validation: &'a ValidationReport,
}

impl<'a> PlanStats<'a> {
    fn of(o: &'a PlanOutcome) -> Self {
        PlanStats {
            success: o.success,
            max_equality_residual: o.max_equality_residual,
            stats: &o.stats,
            counts: &o.counts,
            validation: &o.report,
        }
    }
}

fn cmd_plan(config: &Path, out_dir: Option<&Path>, g: &Global) -> Outcome {
    let (loaded, problem) = load_problem(config, g)?;
    let out = plan_batch(&problem)?;
    let stats = to_json(&PlanStats::of(&out));
    let out_cfg = &loaded.config.output;
    let paths = match out_dir {
        Some(d) => [
            Some(d.join("trajectory.csv")),
            Some(d.join("trajectory.json")),
            Some(d.join("stats.json")),
            Some(d.join("plot.dat")),
        ],
        None => [
            loaded.resolve(&out_cfg.trajectory),
            loaded.resolve(&out_cfg.trajectory_json),
            loaded.resolve(&out_cfg.stats),
            loaded.resolve(&out_cfg.plot),
        ],
    };
    let [csv, json, stats_path, plot] = paths;
    if let Some(p) = csv {
        write(&p, &out.trajectory.to_csv())?;
    }
    if let Some(p) = json {
        write(&p, &to_json(&out.trajectory))?;
    }
    for p in stats_path.iter().chain(g.json_stats.iter()) {
        write(p, &stats)?;
    }
    if let Some(p) = plot {
        write(&p, &out.trajectory.to_plot_data())?;
    }
    println!(
        "{}: {} after {} iterations, {:.1} ms, max equality residual {:.2e}",
        problem.model.name,
        if out.success { "success" } else { "FAILED" },
        out.stats.iterations,
        out.stats.wall_time_ms,
        out.max_equality_residual
    );
    for f in &out.report.failures {
        eprintln!("  {f}");
    }
    Ok(out.success)
}

#[derive(Serialize)]
struct Comparison {
    incremental_ms: f64,
    /// Batch rerun of the updated problem from the previous solution.
    batch_warm_ms: f64,
    /// Batch rerun of the updated problem from the default initialization.
    batch_cold_ms: f64,
    batch_warm_success: bool,
    batch_cold_success: bool,
    speedup_vs_warm: f64,
    speedup_vs_cold: f64,
}

#[derive(Serialize)]
struct ReplanStats<'a> {
    original: PlanStats<'a>,
    replanned: PlanStats<'a>,
    reeliminated_keys: usize,
    replan: &'a ReplanReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<Comparison>,
}

fn cmd_replan(config: &Path, new_goal: Option<&[f64]>, scene: Option<&Path>, out_dir: &Path, g: &Global) -> Outcome {
    let (_, problem) = load_problem(config, g)?;
    let change = match (new_goal, scene) {
        (Some(q), _) => {
            if q.len() != problem.dof() {
                return Err(Failure::Usage(format!("--new-goal has {} entries, model has {} joints", q.len(), problem.dof())));
            }
            ReplanChange::Goal(Goal::Joint(DVector::from_column_slice(q)))
        }
        (None, Some(path)) => ReplanChange::Scene(Some(load_scene_file(path)?)),
        (None, None) => return Err(Failure::Usage("give --new-goal or --scene-delta".into())),
    };
    let mut session = open_session(problem)?;
    let original = session.solution().clone();
    let out = session.replan(change)?;

    let compare = if g.compare {
        let target = session.problem().clone();
        let pg = build_graph(&target)?;
        let warm = plan_from(&target, &pg, &original.values)?;
        let cold = plan_batch(&target)?;
        let inc = out.plan.stats.wall_time_ms;
        Some(Comparison {
            incremental_ms: inc,
            batch_warm_ms: warm.stats.wall_time_ms,
            batch_cold_ms: cold.stats.wall_time_ms,
            batch_warm_success: warm.success,
            batch_cold_success: cold.success,
            speedup_vs_warm: warm.stats.wall_time_ms / inc.max(1e-9),
            speedup_vs_cold: cold.stats.wall_time_ms / inc.max(1e-9),
        })
    } else {
        None
    };
    let doc = ReplanStats {
        original: PlanStats::of(&original),
        replanned: PlanStats::of(&out.plan),
        reeliminated_keys: out.replan.reeliminated_keys,
        replan: &out.replan,
        compare,
    };
    let text = to_json(&doc);
    write(&out_dir.join("original.csv"), &original.trajectory.to_csv())?;
    write(&out_dir.join("replanned.csv"), &out.plan.trajectory.to_csv())?;
    write(&out_dir.join("replan_stats.json"), &text)?;
    if let Some(p) = &g.json_stats {
        write(p, &text)?;
    }
    println!(
        "replan: {} in {:.1} ms, {} of {} keys re-eliminated",
        if out.plan.success { "success" } else { "FAILED" },
        out.plan.stats.wall_time_ms,
        out.replan.reeliminated_keys,
        out.replan.total_keys
    );
    if let Some(c) = &doc.compare {
        println!("batch rerun: warm {:.1} ms ({:.1}x), cold {:.1} ms ({:.1}x)", c.batch_warm_ms, c.speedup_vs_warm, c.batch_cold_ms, c.speedup_vs_cold);
    }
    Ok(out.plan.success)
}

fn cmd_benchmark(path: &Path, trials: Option<usize>, out: Option<&Path>, g: &Global) -> Outcome {
    let mut loaded = load_suite(path)?;
    if let Some(k) = trials {
        loaded.suite.trials = k;
    }
    if let Some(s) = g.seed {
        loaded.suite.seed = s;
    }
    if g.steps.is_some() {
        loaded.suite.overrides.steps = g.steps;
    }
    if g.horizon.is_some() {
        loaded.suite.overrides.horizon = g.horizon;
    }
    loaded.suite.validate()?;
    let mut base = loaded.base_problem()?;
    if let Some(o) = g.ordering {
        base.solver.ordering = o;
    }
    let summary = dynplan::planner::run_suite(&loaded.suite, &base)?;
    let text = to_json(&summary);
    for p in out.iter().copied().chain(g.json_stats.as_deref()) {
        write(p, &text)?;
    }
    match &summary {
        SuiteSummary::Plan { trials, row, .. } => println!(
            "{trials} trials: success {:.0}%, avg {:.3} s, max {:.3} s, avg total |tau| {}",
            100.0 * row.success_rate,
            row.avg_time,
            row.max_time,
            row.avg_total_torque.map_or("n/a".to_string(), |t| format!("{t:.2}"))
        ),
        SuiteSummary::Replan { trials, summary: s, .. } => {
            println!("{trials} trials        success   avg time   max time");
            for (name, r) in [("DFGP-L", &s.dfgp_l), ("DFGP-W", &s.dfgp_w), ("iDFGP", &s.idfgp)] {
                println!("  {name:<8} {:>10.0}% {:>9.3}s {:>9.3}s", 100.0 * r.success_rate, r.avg_time, r.max_time);
            }
            println!(
                "  median re-eliminated {:.0}%, locality {:.0}%, median speedup {:.2}x",
                100.0 * s.median_reeliminated_fraction,
                100.0 * s.locality_rate,
                s.median_speedup
            );
        }
    }
    if out.is_none() && g.json_stats.is_none() {
        print!("{text}");
    }
    Ok(true)
}

fn model_by_name_or_path(m: &str) -> Result<RobotModel, Failure> {
    let p = Path::new(m);
    if p.exists() {
        Ok(load_model_file(p)?)
    } else {
        Ok(bundled_model(m)?)
    }
}

fn cmd_validate(trajectory: &Path, config: Option<&Path>, model: Option<&str>, scene: Option<&Path>) -> Outcome {
    let traj = Trajectory::load(trajectory)?;
    let report = match config {
        Some(c) => {
            let p = load_config(c)?.problem()?;
            let sdf = if p.uses_obstacles() { p.sdf.as_deref() } else { None };
            validate_trajectory(&traj, &p.model, sdf, Some(&p.goal), &p.tolerances)?
        }
        None => {
            let model = model_by_name_or_path(model.expect("clap requires --model without --config"))?;
            let sdf = scene.map(|s| load_scene_file(s).and_then(|sc| sc.build())).transpose()?;
            validate_trajectory(&traj, &model, sdf.as_ref(), None, &Tolerances::default())?
        }
    };
    print!("{}", to_json(&report));
    Ok(report.passed)
}
