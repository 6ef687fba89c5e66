use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dslad_verification::burgers::{self, BurgersConfig};
use dslad_verification::report::{write_csv, GradCheck, Report, Times};
use dslad_verification::solve::{self, SolveConfig, SolveProblem};
use dslad_verification::spline::{self, Mode, SplineConfig, SplineData};
use serde_json::json;

/// Record, reverse and check the verification studies.
#[derive(Parser, Debug)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    case: Case,

    /// Seed of every random input.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Runs per case; times are averaged.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repetitions: u32,

    /// Floating point type; each case supports one.
    #[arg(long, global = true, value_enum, default_value_t = Precision::Auto)]
    precision: Precision,

    /// Independent tapes run on this many threads.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    threads: u32,

    /// Format written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Also write the JSON reports to this file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,

    /// Also write the CSV reports to this file.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Case {
    /// Gradient of the coupled Burgers solver.
    Burgers(BurgersArgs),
    /// Scalar vs 4-lane spline interpolation.
    Spline(SplineArgs),
    /// Element-wise vs single-statement linear solve.
    Solve(SolveArgs),
    /// Every case with its default parameters.
    All,
}

#[derive(clap::Args, Debug)]
struct BurgersArgs {
    /// Grid points per dimension.
    #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u32).range(3..))]
    grid: u32,
    #[arg(long, default_value_t = 8)]
    steps: u32,
    #[arg(long, default_value_t = 100.0)]
    reynolds: f64,
    /// Interior nodes compared with finite differences.
    #[arg(long, default_value_t = 50)]
    samples: u32,
    /// Exit with status 2 unless the gradient check passes.
    #[arg(long)]
    check_grad: bool,
}

#[derive(clap::Args, Debug)]
struct SplineArgs {
    /// Regions per dimension.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    regions: u32,
    #[arg(long, default_value_t = 100_000)]
    samples: u32,
    /// Samples per tape before it is reversed and reset.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u32).range(1..))]
    batch: u32,
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// Vector dimension.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Precision {
    Auto,
    F32,
    F64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Json,
    Csv,
}

struct Outcome {
    reports: Vec<Report>,
    required_pass: bool,
}

fn require(precision: Precision, supported: Precision, case: &str) -> Result<(), String> {
    if precision == Precision::Auto || precision == supported {
        Ok(())
    } else {
        Err(format!("{case} runs in {supported:?} only, got --precision {precision:?}").to_lowercase())
    }
}

fn repeat<T>(reps: u32, mut f: impl FnMut() -> T, times: impl Fn(&T) -> Times) -> (T, Times) {
    let mut all = Vec::new();
    let mut last = f();
    all.push(times(&last));
    for _ in 1..reps {
        last = f();
        all.push(times(&last));
    }
    (last, Times::mean(&all))
}

fn run_burgers(cli: &Cli, a: &BurgersArgs) -> Result<Outcome, String> {
    require(cli.precision, Precision::F64, "burgers")?;
    let cfg = BurgersConfig::new(a.grid as usize, a.steps as usize, a.reynolds);
    cfg.validate().map_err(|e| e.to_string())?;
    let (run, times) = repeat(cli.repetitions, || burgers::gradient(&cfg), |r| r.as_ref().map(|r| r.times).unwrap_or_default());
    let run = run.map_err(|e| e.to_string())?;
    let check = burgers::check_gradient(&cfg, &run.gradient, a.samples as usize, cli.seed, 1e-6).map_err(|e| e.to_string())?;
    let cfl = cfg.cfl();
    let config = json!({
        "grid": cfg.grid, "steps": cfg.steps, "reynolds": cfg.reynolds, "dt": cfg.dt,
        "cfl": cfl, "cflViolation": cfl > 1.0, "fdSamples": a.samples, "seed": cli.seed,
        "rng": "ChaCha8",
    });
    Ok(Outcome {
        reports: vec![Report::new("burgers", config, &run.memory, check, times)],
        required_pass: !a.check_grad || check.pass,
    })
}

fn run_spline(cli: &Cli, a: &SplineArgs) -> Result<Outcome, String> {
    require(cli.precision, Precision::F32, "spline")?;
    let cfg = SplineConfig { batch: a.batch as usize, ..SplineConfig::new(a.regions as usize, a.samples as usize, cli.seed) };
    cfg.validate()?;
    let data = SplineData::generate(&cfg);
    let mut reports = Vec::new();
    let mut runs = Vec::new();
    for mode in [Mode::Scalar, Mode::Vectorized] {
        let (run, times) = repeat(cli.repetitions, || spline::run(&cfg, &data, mode), |r| r.times);
        let check = spline::check_gradient(&data, &run, 64, cli.seed, 1e-3);
        let config = json!({
            "regions": cfg.regions, "samples": cfg.samples, "batch": cfg.batch, "lanes": 4,
            "mode": mode, "seed": cfg.seed, "rng": "ChaCha8",
        });
        let case = match mode {
            Mode::Scalar => "spline/scalar",
            Mode::Vectorized => "spline/vectorized",
        };
        reports.push(Report::new(case, config, &run.memory, check, times));
        runs.push(run);
    }
    if let Some(r) = reports.last_mut() {
        r.config["maxUlpVsScalar"] = json!(spline::max_ulp(&runs[0], &runs[1]));
    }
    Ok(Outcome { reports, required_pass: true })
}

fn run_solve(cli: &Cli, a: &SolveArgs) -> Result<Outcome, String> {
    require(cli.precision, Precision::F64, "solve")?;
    let cfg = SolveConfig { n: a.n as usize, seed: cli.seed };
    let p = SolveProblem::random(&cfg).map_err(|e| e.to_string())?;
    let fd = p.fd_gradient();
    let mut reports = Vec::new();
    for (case, path) in [("solve/scalar", solve::run_scalar as fn(&SolveProblem) -> solve::SolveRun), ("solve/dsl", solve::run_dsl)] {
        let (run, times) = repeat(cli.repetitions, || path(&p), |r| r.times);
        let config = json!({
            "n": cfg.n, "seed": cfg.seed, "rng": "ChaCha8",
            "conditionEstimate": solve::condition_estimate(&p.m),
        });
        reports.push(Report::new(case, config, &run.memory, run.check(&fd, 1e-6), times));
    }
    Ok(Outcome { reports, required_pass: true })
}

fn run_case(cli: &Cli) -> Result<Outcome, String> {
    match &cli.case {
        Case::Burgers(a) => run_burgers(cli, a),
        Case::Spline(a) => run_spline(cli, a),
        Case::Solve(a) => run_solve(cli, a),
        Case::All => {
            let parse = |args: &[&str]| Cli::try_parse_from(args).expect("defaults parse");
            let mut out = Outcome { reports: Vec::new(), required_pass: true };
            for sub in ["burgers", "spline", "solve"] {
                let mut sub_cli = parse(&["bench", sub]);
                sub_cli.seed = cli.seed;
                sub_cli.repetitions = cli.repetitions;
                let o = run_case(&sub_cli)?;
                out.reports.extend(o.reports);
                out.required_pass &= o.required_pass;
            }
            Ok(out)
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, String> {
    if cli.threads == 1 {
        return run_case(cli);
    }
    let results: Vec<Result<Outcome, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cli.threads).map(|_| s.spawn(|| run_case(cli))).collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Outcome { reports: Vec::new(), required_pass: true };
    for (t, r) in results.into_iter().enumerate() {
        let o = r?;
        out.required_pass &= o.required_pass;
        out.reports.extend(o.reports.into_iter().map(|mut rep| {
            rep.case = format!("{}#{t}", rep.case);
            rep
        }));
    }
    Ok(out)
}

fn write_outputs(cli: &Cli, reports: &[Report]) -> Result<(), String> {
    let json = serde_json::to_string_pretty(reports).map_err(|e| e.to_string())?;
    let stdout = io::stdout();
    match cli.format {
        Format::Json => writeln!(stdout.lock(), "{json}").map_err(|e| e.to_string())?,
        Format::Csv => write_csv(stdout.lock(), reports).map_err(|e| e.to_string())?,
    }
    if let Some(path) = &cli.json {
        std::fs::write(path, json + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &cli.csv {
        let f = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        write_csv(f, reports).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&cli, &outcome.reports) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    for r in &outcome.reports {
        if !r.grad_check.pass {
            let GradCheck { max_rel_err, tolerance, .. } = r.grad_check;
            eprintln!("{}: gradient check failed ({max_rel_err:e} > {tolerance:e})", r.case);
        }
    }
    if outcome.required_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
