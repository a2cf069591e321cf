use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use drifttrack::bounds::{bound_report, RegimeParams};
use drifttrack::hardinstance::{
    build_block_family, fano_pipeline, inertia_regret_experiment, BlockFamily, FamilyOptions, FanoConfig,
    InertiaConfig, PackingOptions,
};
use drifttrack::runner::{
    aggregate, execute, expand_grid, plotdata, render_table, write_aggregate, TableFormat, TableId, TRAILING_WINDOW,
};

#[derive(Parser)]
#[command(name = "drifttrack", version, about = "Tracking drifting minimizers with SGD and momentum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config grid or render its tables.
    #[command(subcommand)]
    Bench(Bench),
    /// Closed-form bounds.
    #[command(subcommand)]
    Bounds(Bounds),
    /// Build, verify and probe the block-switching hard family.
    #[command(subcommand)]
    Hard(Hard),
    /// Alternating-block regret and response time of Heavy-Ball.
    Inertia(InertiaArgs),
    /// Per-step mean and std of the tracking error for every run config.
    Plotdata(PlotArgs),
}

#[derive(Subcommand)]
enum Bench {
    /// Execute every config of a grid, skipping configs already on disk.
    Run(RunArgs),
    /// Render a summary table from a finished output directory.
    Table(TableArgs),
}

#[derive(Subcommand)]
enum Bounds {
    /// Floors, optimal step sizes, caps, burn-ins and contraction factors.
    Eval(BoundsArgs),
}

#[derive(Subcommand)]
enum Hard {
    /// Build a block family and write it as JSON.
    Build(HardBuildArgs),
    /// Check a family's packing and variation budget.
    Verify(HardVerifyArgs),
    /// Estimate pathwise KL under Heavy-Ball and the resulting Fano bound.
    Fano(HardFanoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the number of seeds per config.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads (default: DRIFTTRACK_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    /// quad, quad_t or tasks.
    #[arg(long, default_value = "quad")]
    table: String,
    /// Output directory of a previous run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Trailing window for the trailing-mean statistics.
    #[arg(long, default_value_t = TRAILING_WINDOW)]
    window: usize,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long = "L")]
    l: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    gamma: f64,
    /// Gradient noise variance σ².
    #[arg(long)]
    sigma2: f64,
    /// Drift per step Δ.
    #[arg(long = "Delta")]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Initial squared error for the burn-in times.
    #[arg(long, default_value_t = 1.0)]
    e0: f64,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardBuildArgs {
    #[arg(long = "T", default_value_t = 640)]
    t_len: usize,
    /// Number of blocks.
    #[arg(long = "J", default_value_t = 64)]
    j: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Bump amplitude.
    #[arg(long, default_value_t = 0.01)]
    a: f64,
    /// Bump radius.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Family JSON file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HardVerifyArgs {
    /// Family JSON file.
    #[arg(long)]
    family: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardFanoArgs {
    #[arg(long)]
    family: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Codewords simulated as the true environment.
    #[arg(long, default_value_t = 4)]
    max_envs: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InertiaArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long = "T", default_value_t = 20_000)]
    t_len: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap constant c0 in γ ≤ c0(1−β)²/L.
    #[arg(long, default_value_t = 0.25)]
    c0: f64,
    /// Block length (default: the response time).
    #[arg(long)]
    block_len: Option<usize>,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Output directory of a previous run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write the series here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

type CliResult = Result<(), String>;

fn default_threads() -> usize {
    std::env::var("DRIFTTRACK_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Renders a flat serializable report as key/value rows.
fn render_report<T: serde::Serialize>(report: &T, format: Format) -> Result<String, String> {
    let value = serde_json::to_value(report).map_err(|e| e.to_string())?;
    if let Format::Json = format {
        return serde_json::to_string_pretty(&value).map(|s| s + "\n").map_err(|e| e.to_string());
    }
    let obj = value.as_object().ok_or("report is not an object")?;
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("key,value\n");
            for (k, v) in obj {
                out.push_str(&format!("{k},{}\n", scalar(v)));
            }
        }
        _ => {
            out.push_str("| key | value |\n|---|---|\n");
            for (k, v) in obj {
                out.push_str(&format!("| {k} | {} |\n", scalar(v)));
            }
        }
    }
    Ok(out)
}

fn bench_run(args: RunArgs) -> CliResult {
    let mut configs = expand_grid(&args.config).map_err(|e| e.to_string())?;
    for c in &mut configs {
        if let Some(s) = args.seeds {
            c.seeds = s;
        }
        if let Some(s) = args.seed {
            c.master_seed = s;
        }
    }
    let out = args.out.unwrap_or_else(|| configs[0].out_dir.clone());
    let threads = args.threads.unwrap_or_else(default_threads);
    eprintln!("{} configs, {threads} threads, output in {}", configs.len(), out.display());
    let report = execute(&configs, &out, threads).map_err(|e| e.to_string())?;
    eprintln!(
        "written {}, skipped {}, failed {}",
        report.written.len(),
        report.skipped.len(),
        report.failed.len()
    );
    let cells = aggregate(&out, TRAILING_WINDOW).map_err(|e| e.to_string())?;
    write_aggregate(&cells, &out).map_err(|e| e.to_string())?;
    if !report.failed.is_empty() {
        for (d, reason) in &report.failed {
            eprintln!("failed {d}: {reason}");
        }
        return Err(format!("{} configs failed", report.failed.len()));
    }
    Ok(())
}

fn bench_table(args: TableArgs) -> CliResult {
    let table: TableId = args.table.parse().map_err(|e: drifttrack::Error| e.to_string())?;
    let cells = aggregate(&args.out, args.window).map_err(|e| e.to_string())?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&cells).map_err(|e| e.to_string())? + "\n",
        f => {
            let fmt = if let Format::Csv = f { TableFormat::Csv } else { TableFormat::Markdown };
            let rendered = render_table(&cells, table, fmt);
            for w in &rendered.warnings {
                eprintln!("warning: {w}");
            }
            rendered.text
        }
    };
    emit(&text, None)
}

fn bounds_eval(args: BoundsArgs) -> CliResult {
    let mut p = RegimeParams::new(args.mu, args.l, args.beta, args.gamma, args.sigma2.sqrt(), args.delta)
        .map_err(|e| e.to_string())?;
    p.d = args.d;
    let report = bound_report(&p, args.e0).map_err(|e| e.to_string())?;
    emit(&render_report(&report, args.format)?, args.out.as_deref())
}

fn read_family(path: &Path) -> Result<BlockFamily, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn hard_build(args: HardBuildArgs) -> CliResult {
    let opts = FamilyOptions {
        seed: args.seed,
        packing: PackingOptions::default(),
        norm: None,
    };
    let fam = build_block_family(args.t_len, args.j, args.mu, args.a, args.r, args.d, args.p, args.q, &opts)
        .map_err(|e| e.to_string())?;
    let text = serde_json::to_string_pretty(&fam).map_err(|e| e.to_string())?;
    emit(&(text + "\n"), Some(&args.out))?;
    eprintln!("{} codewords, V_T = {:.6e}", fam.len(), fam.v_t);
    Ok(())
}

fn hard_verify(args: HardVerifyArgs) -> CliResult {
    let check = read_family(&args.family)?.verify().map_err(|e| e.to_string())?;
    emit(&render_report(&check, args.format)?, args.out.as_deref())?;
    if check.passed {
        Ok(())
    } else {
        Err("family failed verification".into())
    }
}

fn hard_fano(args: HardFanoArgs) -> CliResult {
    let fam = read_family(&args.family)?;
    let cfg = FanoConfig {
        beta: args.beta,
        gamma: args.gamma,
        sigma2: args.sigma2,
        seeds: args.seeds,
        seed: args.seed,
        max_envs: args.max_envs,
    };
    let report = fano_pipeline(&fam, &cfg).map_err(|e| e.to_string())?;
    emit(&render_report(&report, args.format)?, args.out.as_deref())
}

fn inertia(args: InertiaArgs) -> CliResult {
    let cfg = InertiaConfig {
        sigma2: args.sigma2,
        seeds: args.seeds,
        seed: args.seed,
        c0: args.c0,
        block_len: args.block_len,
        ..InertiaConfig::new(args.beta, args.gamma, args.mu, args.a, args.t_len)
    };
    let report = inertia_regret_experiment(&cfg).map_err(|e| e.to_string())?;
    emit(&render_report(&report, args.format)?, args.out.as_deref())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Bench(Bench::Run(a)) => bench_run(a),
        Command::Bench(Bench::Table(a)) => bench_table(a),
        Command::Bounds(Bounds::Eval(a)) => bounds_eval(a),
        Command::Hard(Hard::Build(a)) => hard_build(a),
        Command::Hard(Hard::Verify(a)) => hard_verify(a),
        Command::Hard(Hard::Fano(a)) => hard_fano(a),
        Command::Inertia(a) => inertia(a),
        Command::Plotdata(a) => {
            let text = plotdata(&a.out).map_err(|e| e.to_string())?;
            emit(&text, a.output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
