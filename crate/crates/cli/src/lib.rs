//! The `tensql` command line: `gen`, `run`, `plan`, `profile` and `bench`.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tensql::datagen::{write_dataset, GenConfig};
use tensql::exec::{plan_operators, to_dot, Executor, Tables};
use tensql::ir::{Catalog, PlanNode};
use tensql::kernels::BackendKind;
use tensql::optimizer::optimize_default;
use tensql::pipeline::{build_catalog, compile_plan, load_catalog_dir, load_data_dir, logical_plan, register_models};

#[derive(Parser, Debug)]
#[command(name = "tensql", version, about = "Run SQL queries as tensor programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic lineitem and part tables.
    Gen {
        /// Fraction of scale-factor-1 cardinalities.
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a query and print the result as CSV.
    Run(RunArgs),
    /// Print the optimized plan as JSON or the tensor program as DOT.
    Plan {
        #[command(flatten)]
        query: QueryArgs,
        /// Directory holding the `*.schema.json` sidecars.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = PlanFormat::Json)]
        format: PlanFormat,
    },
    /// Execute once and write a Chrome trace of operator and kernel timings.
    Profile {
        #[command(flatten)]
        run: RunArgs,
        /// Trace file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median timings of both backends.
    Bench {
        #[command(flatten)]
        query: QueryArgs,
        /// Directory of `<table>.csv` files with schema sidecars.
        #[arg(long)]
        data: PathBuf,
        /// Timed runs per backend.
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        /// Untimed runs before timing.
        #[arg(long, default_value_t = 5)]
        warmup: usize,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// SQL file.
    #[arg(long)]
    sql: Option<PathBuf>,
    /// Plan JSON file.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[command(flatten)]
    source: Source,
    /// Skip the rule-based optimizer.
    #[arg(long)]
    no_opt: bool,
    /// Register a model for PREDICT, as `name=path`.
    #[arg(long = "model", value_parser = parse_model)]
    models: Vec<(String, PathBuf)>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Directory of `<table>.csv` files with schema sidecars.
    #[arg(long)]
    data: PathBuf,
    /// `ref` (single-threaded) or `par` (multi-threaded).
    #[arg(long, default_value = "ref", value_parser = parse_backend)]
    backend: BackendKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlanFormat {
    Json,
    Dot,
}

fn parse_model(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected name=path, got `{s}`")),
    }
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse().map_err(|e: tensql::Error| e.to_string())
}

/// A one-line error message.
#[derive(Debug)]
pub struct CliError(pub String);

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<tensql::Error> for CliError {
    fn from(e: tensql::Error) -> Self {
        CliError(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError(e.to_string())
    }
}

fn at(path: &Path) -> impl Fn(tensql::Error) -> CliError + '_ {
    move |e| CliError(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

impl QueryArgs {
    fn plan(&self, catalog: &Catalog) -> Result<PlanNode, CliError> {
        let (path, is_json) = match (&self.source.sql, &self.source.plan) {
            (Some(p), _) => (p, false),
            (None, Some(p)) => (p, true),
            (None, None) => return Err(CliError("one of --sql or --plan is required".into())),
        };
        logical_plan(&read(path)?, is_json, catalog).map_err(at(path))
    }

    fn load(&self, data: &Path) -> Result<(Tables, Catalog, PlanNode), CliError> {
        let tables = load_data_dir(data)?;
        let catalog = build_catalog(&tables, &self.models)?;
        let plan = self.plan(&catalog)?;
        Ok((tables, catalog, plan))
    }

    fn executor(&self, plan: &PlanNode, catalog: &Catalog, backend: BackendKind) -> Result<Executor, CliError> {
        Ok(compile_plan(plan, catalog, !self.no_opt, backend)?)
    }
}

fn ms(ns: u128) -> f64 {
    ns as f64 / 1e6
}

fn median(mut v: Vec<u128>) -> u128 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Median wall and kernel nanoseconds of `repeat` runs after `warmup` runs.
pub fn bench_executor(exec: &Executor, tables: &Tables, repeat: usize, warmup: usize) -> Result<(u128, u128), CliError> {
    if repeat == 0 {
        return Err(CliError("--repeat must be at least 1".into()));
    }
    for _ in 0..warmup {
        exec.execute(tables)?;
    }
    let (mut wall, mut kernel) = (Vec::new(), Vec::new());
    for _ in 0..repeat {
        let t = Instant::now();
        let (_, trace) = exec.profile_execute(tables)?;
        wall.push(t.elapsed().as_nanos());
        kernel.push(trace.kernel_time_ns() as u128);
    }
    Ok((median(wall), median(kernel)))
}

/// Runs one command, writing results to `out` and diagnostics to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { scale, seed, out: dir } => {
            let cfg = GenConfig::new(scale, seed)?;
            for p in write_dataset(&dir, &cfg)? {
                writeln!(out, "{}", p.display())?;
            }
        }
        Command::Run(args) => {
            let (tables, catalog, plan) = args.query.load(&args.data)?;
            let exec = args.query.executor(&plan, &catalog, args.backend)?;
            let t = Instant::now();
            let (result, trace) = exec.profile_execute(&tables)?;
            let wall = t.elapsed().as_nanos();
            out.write_all(result.to_csv().as_bytes())?;
            writeln!(
                err,
                "time: {:.3} ms total, {:.3} ms in kernels ({} backend, {} rows)",
                ms(wall),
                ms(trace.kernel_time_ns() as u128),
                args.backend,
                result.row_count()
            )?;
        }
        Command::Plan { query, data, format } => {
            let mut catalog = load_catalog_dir(&data)?;
            register_models(&mut catalog, &query.models)?;
            let mut plan = query.plan(&catalog)?;
            if !query.no_opt {
                plan = optimize_default(&plan, &catalog)?;
            }
            match format {
                PlanFormat::Json => writeln!(out, "{}", plan.to_json())?,
                PlanFormat::Dot => out.write_all(to_dot(&plan_operators(&plan, &catalog)?).as_bytes())?,
            }
        }
        Command::Profile { run, out: path } => {
            let (tables, catalog, plan) = run.query.load(&run.data)?;
            let exec = run.query.executor(&plan, &catalog, run.backend)?;
            let (result, trace) = exec.profile_execute(&tables)?;
            let text = serde_json::to_string_pretty(&trace.to_chrome_json()).expect("trace JSON");
            match path {
                Some(p) => std::fs::write(&p, text + "\n").map_err(|e| CliError(format!("{}: {e}", p.display())))?,
                None => writeln!(out, "{text}")?,
            }
            for o in &trace.operators {
                writeln!(err, "{:>4} {:<16} {:>10} rows {:>10.3} ms", o.op_id, o.name, o.rows_out, ms(o.dur_ns as u128))?;
            }
            writeln!(err, "result: {} rows", result.row_count())?;
        }
        Command::Bench {
            query,
            data,
            repeat,
            warmup,
        } => {
            if repeat == 0 {
                return Err(CliError("--repeat must be at least 1".into()));
            }
            let (tables, catalog, plan) = query.load(&data)?;
            writeln!(out, "backend,median_total_ms,median_kernel_ms,repeat,warmup")?;
            let mut kernel = Vec::new();
            for backend in BackendKind::all() {
                let exec = query.executor(&plan, &catalog, backend)?;
                let (w, k) = bench_executor(&exec, &tables, repeat, warmup)?;
                kernel.push(k);
                writeln!(out, "{backend},{:.3},{:.3},{repeat},{warmup}", ms(w), ms(k))?;
            }
            writeln!(err, "kernel-time speedup par vs ref: {:.2}x", kernel[0] as f64 / kernel[1].max(1) as f64)?;
        }
    }
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let msg: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let _ = writeln!(err, "error: {}", msg.join(" ").trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.0.replace('\n', " "));
            1
        }
    }
}
