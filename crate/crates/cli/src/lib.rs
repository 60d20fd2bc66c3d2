//! Command-line front end for the energy-space localization experiments.
//!
//! Every run writes one directory holding the record JSON, flat CSV tables,
//! an SVG plot, the effective config and a manifest. Exit status: 0 when every
//! non-vacuous check holds, 2 on a violated inequality, 3 on configuration or
//! validation errors (nothing is written), 1 on anything else.

pub mod config;
pub mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use enloc_core::bounds::{leakage_bound, BoundReport, BoundSpec};
use enloc_core::clusters::{bitstring, find_clusters, parse_bitstring};
use enloc_core::experiments::{
    build_landscape, case3, commutator_sweep, dynamical_localization, eigenstate_localization, fig1, freezing,
    gibbs_bottleneck, mis_symmetry, moment_inequality, static_reduction, Fig1Config, RunRecord,
};
use enloc_core::Error as CoreError;

use config::{ClustersConfig, Experiment, Seeded, SimulateConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid run: {0}")]
    Invalid(CoreError),
    #[error(transparent)]
    Core(CoreError),
    #[error("plot error: {0}")]
    Plot(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parameter(_)
            | CoreError::Dimension(_)
            | CoreError::Range(_)
            | CoreError::Empty(_)
            | CoreError::Undefined(_)
            | CoreError::Case(_)
            | CoreError::Parse { .. } => CliError::Invalid(e),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownKeys(_) | CliError::Invalid(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "enloc", version, about = "Energy-space localization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one of the schedule experiments selected by `experiment` in the config.
    Simulate(RunArgs),
    /// Evaluate a leakage bound and print its report.
    Bounds(BoundsArgs),
    /// Partition a diagonal landscape into clusters below a barrier.
    Clusters(RunArgs),
    /// Eigenstate localization on a driven cluster landscape.
    Eigenloc(RunArgs),
    /// Metropolis bottleneck of a cluster landscape.
    Gibbs(RunArgs),
    /// Freezing during the tail of an annealing schedule.
    Anneal(RunArgs),
    /// Energy-space spreading of a mid-spectrum eigenstate under a random schedule.
    Fig1(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML config; defaults are used when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output root; each run gets its own directory below it.
    #[arg(short, long, default_value = "enloc-out")]
    pub out: PathBuf,
    /// Replace the seed given in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides ENLOC_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Variation per site.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Window per site.
    #[arg(long)]
    pub d: Option<f64>,
    /// Number of sites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Total variation, for the general form.
    #[arg(long = "total-variation")]
    pub total_variation: Option<f64>,
    /// Energy window, for the general form.
    #[arg(long)]
    pub window: Option<f64>,
    /// Energy scale `Δ`.
    #[arg(long)]
    pub delta: f64,
    /// Also write the report, a curve over the window and a manifest here.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

/// Files of one run, held in memory until everything succeeded.
pub struct RunOutput {
    pub dir: String,
    pub experiment: String,
    pub seed: Option<u64>,
    pub passed: bool,
    pub violations: usize,
    pub first_violation: Option<usize>,
    pub files: Vec<(String, String)>,
    /// Message pointing at the first violated check.
    pub violation: Option<String>,
}

impl RunOutput {
    fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_VIOLATION
        }
    }
}

fn toml_echo<T: Serialize>(cfg: &T) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Config(format!("cannot echo config: {e}")))
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Plot(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn record_output<C: Serialize>(record: RunRecord, cfg: &C, plot: Option<String>) -> Result<RunOutput, CliError> {
    let dir = format!("{}-seed{}", record.experiment, record.seed);
    let mut files = vec![
        ("config.toml".to_string(), toml_echo(cfg)?),
        ("record.json".to_string(), json(&record)?),
        ("checks.csv".to_string(), record.checks_csv()),
    ];
    for t in &record.tables {
        files.push((format!("{}.csv", t.name), t.to_csv()));
    }
    let plot = match plot {
        Some(p) => Some(p),
        None => checks_plot(&record)?,
    };
    if let Some(p) = plot {
        files.push(("plot.svg".to_string(), p));
    }
    let violation = record.first_violation.map(|i| {
        let c = &record.checks[i];
        format!(
            "{dir}/record.json checks[{i}]: {} ({}) lhs {} exceeds rhs {}",
            c.name, c.context, c.lhs, c.rhs
        )
    });
    Ok(RunOutput {
        experiment: record.experiment.clone(),
        seed: Some(record.seed),
        passed: record.passed,
        violations: record.violations,
        first_violation: record.first_violation,
        dir,
        files,
        violation,
    })
}

fn log10_or_nan(x: f64) -> f64 {
    if x > 0.0 {
        x.log10()
    } else {
        f64::NAN
    }
}

/// Both sides of every check against its index, on a log scale.
fn checks_plot(record: &RunRecord) -> Result<Option<String>, CliError> {
    if record.checks.is_empty() {
        return Ok(None);
    }
    let side = |f: fn(&enloc_core::experiments::InequalityCheck) -> f64, name: &str| svg::Series {
        name: name.to_string(),
        points: record
            .checks
            .iter()
            .enumerate()
            .map(|(i, c)| (i as f64, log10_or_nan(f(c))))
            .collect(),
        markers: true,
    };
    let series = [side(|c| c.rhs, "bound"), side(|c| c.lhs, "measured")];
    if series.iter().all(|s| s.points.iter().all(|p| !p.1.is_finite())) {
        return Ok(None);
    }
    svg::curves(&record.experiment, "check index", "log10 value", &series).map(Some)
}

fn fig1_plot(record: &RunRecord, cfg: &Fig1Config) -> Result<String, CliError> {
    let heat = record
        .table("heatmap")
        .ok_or_else(|| CliError::Plot("fig1 record has no heat map".into()))?;
    let mut cols: Vec<svg::HeatColumn> = Vec::new();
    for r in &heat.rows {
        match cols.last_mut() {
            Some(c) if c.time == r[0] => c.weights.push(r[3]),
            _ => cols.push(svg::HeatColumn {
                time: r[0],
                window: r[1],
                weights: vec![r[3]],
            }),
        }
    }
    svg::heatmap(
        "weight in the instantaneous eigenbasis",
        &cols,
        -cfg.half_range,
        cfg.heat_bin_width,
    )
}

fn load_seeded<T: serde::de::DeserializeOwned + Default + Seeded>(args: &RunArgs) -> Result<T, CliError> {
    let mut cfg: T = config::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn simulate(args: &RunArgs) -> Result<RunOutput, CliError> {
    let mut cfg: SimulateConfig = config::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.selected_mut().set_seed(s);
    }
    let record = match cfg.experiment {
        Experiment::Dynamical => dynamical_localization(&cfg.dynamical)?,
        Experiment::Moments => moment_inequality(&cfg.moments)?,
        Experiment::Case3 => case3(&cfg.case3)?,
        Experiment::Static => static_reduction(&cfg.static_reduction)?,
        Experiment::Commutators => commutator_sweep(&cfg.commutators)?,
        Experiment::Mis => mis_symmetry(&cfg.mis)?,
    };
    record_output(record, &cfg, None)
}

fn clusters(args: &RunArgs) -> Result<RunOutput, CliError> {
    let cfg: ClustersConfig = load_seeded(args)?;
    let land = build_landscape(&cfg.landscape, cfg.n, cfg.seed)?;
    let z0 = match &cfg.reference {
        Some(s) if s.len() != cfg.n => {
            return Err(CliError::Invalid(CoreError::Dimension(format!(
                "reference `{s}` is not {} sites long",
                cfg.n
            ))))
        }
        Some(s) => parse_bitstring(s)?,
        None => land.ground_states[0],
    };
    let barrier = match cfg.barrier {
        Some(b) => b,
        None => land.mountain_pass(z0)?,
    };
    let p = find_clusters(cfg.n, &land.energies, barrier, cfg.hop_radius)?;
    let summary = json!({
        "n": cfg.n,
        "ground_energy": land.e_g,
        "ground_states": land.ground_states.iter().map(|&g| bitstring(cfg.n, g)).collect::<Vec<_>>(),
        "barrier": barrier,
        "reference": bitstring(cfg.n, z0),
        "partition": p.to_json(),
    });
    let mut csv = String::from("cluster,size,min_energy,members\n");
    for (c, cl) in p.clusters.iter().enumerate() {
        let min_e = cl
            .states
            .iter()
            .map(|&z| land.energies[z as usize])
            .fold(f64::INFINITY, f64::min);
        let members: Vec<String> = cl.states.iter().map(|&z| bitstring(cfg.n, z)).collect();
        csv.push_str(&format!(
            "{c},{},{},{}\n",
            cl.states.len(),
            enloc_core::experiments::format_number(min_e),
            members.join(" ")
        ));
    }
    let mut series: Vec<svg::Series> = Vec::new();
    let mut below = svg::Series {
        name: "inside clusters".into(),
        points: Vec::new(),
        markers: true,
    };
    let mut above = svg::Series {
        name: "at or above barrier".into(),
        points: Vec::new(),
        markers: true,
    };
    for (z, &e) in land.energies.iter().enumerate() {
        let pt = ((z as u64).count_ones() as f64, e);
        if p.cluster_of(z as u64).is_some() {
            below.points.push(pt);
        } else {
            above.points.push(pt);
        }
    }
    series.push(below);
    series.push(above);
    let plot = svg::curves("landscape energies", "Hamming weight", "energy", &series)?;
    Ok(RunOutput {
        dir: format!("clusters-seed{}", cfg.seed),
        experiment: "clusters".into(),
        seed: Some(cfg.seed),
        passed: true,
        violations: 0,
        first_violation: None,
        files: vec![
            ("config.toml".into(), toml_echo(&cfg)?),
            ("clusters.json".into(), json(&summary)?),
            ("clusters.csv".into(), csv),
            ("plot.svg".into(), plot),
        ],
        violation: None,
    })
}

/// Builds the bound inputs from whichever form the flags describe.
pub fn bound_spec(a: &BoundsArgs) -> Result<BoundSpec, CliError> {
    match (a.lambda, a.d, a.n, a.total_variation, a.window) {
        (Some(l), Some(d), Some(n), None, None) => Ok(BoundSpec::density(l, a.delta, d, n)),
        (None, None, None, Some(t), Some(w)) => Ok(BoundSpec::general(t, a.delta, w)),
        _ => Err(CliError::Config(
            "give either --lambda, --d and --n, or --total-variation and --window".into(),
        )),
    }
}

fn ln10(v: &Option<enloc_core::bounds::LogValue>) -> f64 {
    v.as_ref().map_or(f64::NAN, |x| x.ln / std::f64::consts::LN_10)
}

const CURVE_POINTS: usize = 60;

fn bounds(a: &BoundsArgs) -> Result<(BoundReport, Option<RunOutput>), CliError> {
    let spec = bound_spec(a)?;
    let report = leakage_bound(spec)?;
    let Some(_) = &a.out else {
        return Ok((report, None));
    };
    let (lo, hi) = match spec {
        BoundSpec::Density { lambda, d, .. } => (lambda, d.max(lambda) * 2.0),
        BoundSpec::General { big_lambda, big_d, .. } => (big_lambda, big_d.max(big_lambda) * 2.0),
    };
    let lo = if lo > 0.0 { lo } else { hi * 1e-3 };
    let mut rows = String::from("window,log10_first_kind,log10_first_kind_asymptotic,log10_second_kind\n");
    let mut s1 = Vec::new();
    let mut s1a = Vec::new();
    let mut s2 = Vec::new();
    for i in 1..=CURVE_POINTS {
        let w = lo + (hi - lo) * i as f64 / CURVE_POINTS as f64;
        let sp = match spec {
            BoundSpec::Density { lambda, delta, n, .. } => BoundSpec::density(lambda, delta, w, n),
            BoundSpec::General { big_lambda, delta, .. } => BoundSpec::general(big_lambda, delta, w),
        };
        let r = leakage_bound(sp)?;
        let (e1, e1a, e2) = match spec {
            BoundSpec::Density { .. } => (
                ln10(&r.epsilon1_finite),
                ln10(&r.epsilon1_asymptotic),
                ln10(&r.epsilon2),
            ),
            BoundSpec::General { .. } => (ln10(&Some(r.xi1)), f64::NAN, ln10(&Some(r.xi2))),
        };
        rows.push_str(&format!(
            "{},{},{},{}\n",
            enloc_core::experiments::format_number(w),
            enloc_core::experiments::format_number(e1),
            enloc_core::experiments::format_number(e1a),
            enloc_core::experiments::format_number(e2)
        ));
        s1.push((w, e1));
        s1a.push((w, e1a));
        s2.push((w, e2));
    }
    let series = [
        svg::Series {
            name: "first kind".into(),
            points: s1,
            markers: false,
        },
        svg::Series {
            name: "first kind, asymptotic".into(),
            points: s1a,
            markers: false,
        },
        svg::Series {
            name: "second kind".into(),
            points: s2,
            markers: false,
        },
    ];
    let series: Vec<svg::Series> = series
        .into_iter()
        .filter(|s| s.points.iter().any(|p| p.1.is_finite()))
        .collect();
    let plot = svg::curves("leakage bounds", "window", "log10 bound", &series)?;
    let out = RunOutput {
        dir: "bounds".into(),
        experiment: "bounds".into(),
        seed: None,
        passed: true,
        violations: 0,
        first_violation: None,
        files: vec![
            ("report.json".into(), json(&report)?),
            ("curve.csv".into(), rows),
            ("plot.svg".into(), plot),
        ],
        violation: None,
    };
    Ok((report, Some(out)))
}

/// Writes one run directory and its manifest.
pub fn write_run(root: &Path, command: &str, run: &RunOutput) -> Result<PathBuf, CliError> {
    let dir = root.join(&run.dir);
    std::fs::create_dir_all(&dir)?;
    for (name, body) in &run.files {
        std::fs::write(dir.join(name), body)?;
    }
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut files: Vec<&str> = run.files.iter().map(|(n, _)| n.as_str()).collect();
    files.push("manifest.json");
    let manifest = json!({
        "tool": "enloc",
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": stamp,
        "command": command,
        "runs": [{
            "dir": run.dir,
            "experiment": run.experiment,
            "seed": run.seed,
            "passed": run.passed,
            "violations": run.violations,
            "first_violation": run.first_violation,
            "files": files,
        }],
    });
    std::fs::write(dir.join("manifest.json"), json(&manifest)?)?;
    Ok(dir)
}

fn threads_from_env(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var("ENLOC_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("ENLOC_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn init_pool(flag: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads_from_env(flag)? {
        if t == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        // A pool installed earlier in the process stays in place.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Bounds(_) => "bounds",
        Command::Clusters(_) => "clusters",
        Command::Eigenloc(_) => "eigenloc",
        Command::Gibbs(_) => "gibbs",
        Command::Anneal(_) => "anneal",
        Command::Fig1(_) => "fig1",
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let name = command_name(&cli.command);
    let (args, run) = match &cli.command {
        Command::Bounds(b) => {
            let (report, out) = bounds(b)?;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{}", json(&report)?.trim_end()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
            if let (Some(root), Some(out)) = (&b.out, out) {
                let dir = write_run(root, name, &out)?;
                eprintln!("wrote {}", dir.display());
            }
            return Ok(EXIT_PASS);
        }
        Command::Simulate(a) => {
            init_pool(a.threads)?;
            (a, simulate(a)?)
        }
        Command::Clusters(a) => {
            init_pool(a.threads)?;
            (a, clusters(a)?)
        }
        Command::Eigenloc(a) => {
            init_pool(a.threads)?;
            let cfg = load_seeded(a)?;
            (a, record_output(eigenstate_localization(&cfg)?, &cfg, None)?)
        }
        Command::Gibbs(a) => {
            init_pool(a.threads)?;
            let cfg = load_seeded(a)?;
            (a, record_output(gibbs_bottleneck(&cfg)?, &cfg, None)?)
        }
        Command::Anneal(a) => {
            init_pool(a.threads)?;
            let cfg = load_seeded(a)?;
            (a, record_output(freezing(&cfg)?, &cfg, None)?)
        }
        Command::Fig1(a) => {
            init_pool(a.threads)?;
            let cfg: Fig1Config = load_seeded(a)?;
            let record = fig1(&cfg)?;
            let plot = fig1_plot(&record, &cfg)?;
            (a, record_output(record, &cfg, Some(plot))?)
        }
    };
    let dir = write_run(&args.out, name, &run)?;
    eprintln!(
        "{}: {} ({} violations) -> {}",
        run.experiment,
        if run.passed { "PASS" } else { "FAIL" },
        run.violations,
        dir.display()
    );
    if let Some(v) = &run.violation {
        eprintln!("first violation: {v}");
    }
    Ok(run.exit_code())
}

/// Runs a parsed invocation and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            if let CliError::UnknownKeys(keys) = &e {
                eprintln!("error: unknown configuration keys:");
                for k in keys {
                    eprintln!("  {k}");
                }
            } else {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

/// Parses `argv` and runs it. Usage errors map to the configuration exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            }
        }
    }
}
