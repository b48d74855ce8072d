//! Command-line driver: generate problem instances, solve them in weak or
//! hybrid mode, and validate configurations against the admissibility gate.
//!
//! Exit codes are a stable contract: 0 success, 1 validation failure,
//! 2 usage or parse error, 3 iteration budget exhausted.

use std::fs::File;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use split_eq::bifunction::{
    check_diagonal_zero, check_lipschitz_type, check_monotone, check_pseudomonotone,
};
use split_eq::{
    generate_instance, load_problem, save_problem, solve_with, validate_config, verify_certificate,
    Algorithm, Bifunction, Error, InstanceBundle, Point, RSchedule, SolveOptions, SolveStatus,
    SolverConfig, Trace, TraceRow,
};

const SUCCESS: i32 = 0;
const FAILURE: i32 = 1;
const USAGE: i32 = 2;
const MAX_ITER: i32 = 3;

#[derive(Parser)]
#[command(name = "split-eq", version, about = "Split equilibrium problem toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance with a certified zero solution.
    Generate(GenerateArgs),
    /// Run one of the two algorithms on a problem file.
    Solve(SolveArgs),
    /// Check a problem file and a configuration without solving.
    Validate(ValidateArgs),
    /// Print the toolkit version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Weak,
    Hybrid,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of source bifunctions.
    #[arg(long)]
    n: usize,
    /// Number of image bifunctions.
    #[arg(long)]
    m: usize,
    /// Source space dimension.
    #[arg(long)]
    d1: usize,
    /// Image space dimension.
    #[arg(long)]
    d2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shift the sources to strong monotonicity so zero is the only solution.
    #[arg(long)]
    unique: bool,
    #[arg(short, long)]
    output: PathBuf,
    /// Sample count for the certificate summary.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Weak)]
    mode: Mode,
    /// Extragradient step; defaults to 90% of the admissible bound.
    #[arg(long)]
    lambda: Option<f64>,
    /// Adjoint correction step; defaults to 90% of the admissible bound.
    #[arg(long)]
    mu: Option<f64>,
    /// Constant resolvent radius.
    #[arg(long)]
    r: Option<f64>,
    /// Residual stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Rayon pool size; falls back to SPLIT_EQ_WORKERS, then to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for sampling the start from C when --x0 is absent.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit start, comma-separated coordinates.
    #[arg(long)]
    x0: Option<String>,
    /// Write a per-iteration CSV trace here, flushed every row.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final solution as JSON here.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Run even when the admissibility gate rejects the configuration.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ValidateArgs {
    problem: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Sample count for the property checks.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Version => {
            println!("split-eq {}", env!("CARGO_PKG_VERSION"));
            SUCCESS
        }
    };
    std::process::exit(code);
}

fn cmd_generate(args: GenerateArgs) -> i32 {
    let bundle =
        match generate_instance(args.n, args.m, args.d1, args.d2, args.seed, args.unique) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: {e}");
                return USAGE;
            }
        };
    if let Err(e) = save_problem(&bundle, &args.output) {
        eprintln!("error: {e}");
        return USAGE;
    }
    println!("wrote {}", args.output.display());
    match verify_certificate(&bundle, args.samples, args.seed) {
        Ok(report) => {
            println!("{report}");
            if report.passed() {
                SUCCESS
            } else {
                FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            FAILURE
        }
    }
}

/// Applies the common config overrides on top of the recommended settings.
fn build_config(
    bundle: &InstanceBundle,
    lambda: Option<f64>,
    mu: Option<f64>,
    r: Option<f64>,
) -> Result<SolverConfig, Error> {
    let mut cfg = SolverConfig::recommended(&bundle.problem)?;
    if let Some(l) = lambda {
        cfg.lambda = l;
    }
    if let Some(m) = mu {
        cfg.mu = m;
    }
    if let Some(r) = r {
        cfg.r_schedule = RSchedule::Constant { r };
    }
    Ok(cfg)
}

fn worker_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("SPLIT_EQ_WORKERS").ok().and_then(|s| s.parse().ok()))
}

fn parse_x0(text: &str, dim: usize) -> Result<Point, String> {
    let coords: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let coords = coords.map_err(|e| format!("--x0: {e}"))?;
    if coords.len() != dim {
        return Err(format!("--x0 has {} coordinates, the problem needs {dim}", coords.len()));
    }
    Point::new(coords).map_err(|e| format!("--x0: {e}"))
}

fn cmd_solve(args: SolveArgs) -> i32 {
    let bundle = match load_problem(&args.problem) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return USAGE;
        }
    };
    let prob = &bundle.problem;
    let mut cfg = match build_config(&bundle, args.lambda, args.mu, args.r) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return FAILURE;
        }
    };
    if let Some(t) = args.tol {
        cfg.tol_residual = t;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    cfg.workers = worker_count(args.workers);

    let x0 = match &args.x0 {
        Some(text) => match parse_x0(text, prob.d1()) {
            Ok(p) => p,
            Err(msg) => {
                eprintln!("error: {msg}");
                return USAGE;
            }
        },
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            prob.c().sample(&mut rng)
        }
    };

    let report = validate_config(prob, &cfg);
    if !report.passed() {
        if !args.force {
            eprintln!("{report}");
            eprintln!("refusing to run; pass --force to run anyway");
            return FAILURE;
        }
        eprintln!(
            "warning: running outside the admissible region; convergence needs \
             0<λ<min{{1/(2c₁),1/(2c₂)}} and 0<μ<2/‖A‖²"
        );
        eprintln!("{report}");
    }

    let mut trace_file = match &args.trace {
        Some(path) => match File::create(path) {
            Ok(mut f) => {
                if let Err(e) = writeln!(f, "{}", Trace::CSV_HEADER) {
                    eprintln!("error: {e}");
                    return USAGE;
                }
                Some(f)
            }
            Err(e) => {
                eprintln!("error: cannot create {}: {e}", path.display());
                return USAGE;
            }
        },
        None => None,
    };
    // flush per row so an interrupted run still leaves a usable trace
    let mut observer = |row: &TraceRow| {
        if let Some(f) = trace_file.as_mut() {
            let _ = writeln!(f, "{}", row.csv_line());
            let _ = f.flush();
        }
    };

    let algorithm = match args.mode {
        Mode::Weak => Algorithm::Weak,
        Mode::Hybrid => Algorithm::Hybrid,
    };
    let opts = SolveOptions {
        skip_validation: true,
        known_solution: bundle.known_solution.as_ref(),
        observer: Some(&mut observer),
    };
    let (solution, trace) = match solve_with(prob, &cfg, algorithm, &x0, opts) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return FAILURE;
        }
    };

    if let Some(path) = &args.solution {
        let json = match serde_json::to_string_pretty(&solution) {
            Ok(j) => j,
            Err(e) => {
                eprintln!("error: {e}");
                return FAILURE;
            }
        };
        if let Err(e) = std::fs::write(path, json + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return USAGE;
        }
    }

    println!(
        "{} after {} iterations, residual {:.6e}",
        match solution.status {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "iteration budget exhausted",
        },
        trace.rows.len(),
        solution.residual
    );
    if let Some(known) = &bundle.known_solution {
        println!("distance to known solution: {:.6e}", solution.x.dist(known));
    }
    match solution.status {
        SolveStatus::Converged => SUCCESS,
        SolveStatus::MaxIterations => MAX_ITER,
    }
}

fn cmd_validate(args: ValidateArgs) -> i32 {
    let bundle = match load_problem(&args.problem) {
        Ok(b) => b,
        // structural problems (bad JSON, missing file) are usage errors;
        // a file that parses but fails a mathematical requirement is a
        // validation failure and names the offending entry
        Err(e @ (Error::Io(_) | Error::Json(_))) => {
            eprintln!("error: {e}");
            return USAGE;
        }
        Err(e) => {
            println!("FAILED: {e}");
            return FAILURE;
        }
    };
    let prob = &bundle.problem;
    let cfg = match build_config(&bundle, args.lambda, args.mu, args.r) {
        Ok(c) => c,
        Err(e) => {
            println!("FAILED: {e}");
            return FAILURE;
        }
    };

    let mut ok = true;
    let report = validate_config(prob, &cfg);
    println!(
        "config gate (lambda {:.6e}, mu {:.6e}): {}",
        cfg.lambda,
        cfg.mu,
        if report.passed() { "ok" } else { "FAILED" }
    );
    if !report.passed() {
        println!("{report}");
        ok = false;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let triples: Vec<(Point, Point, Point)> = (0..args.samples)
        .map(|_| {
            (prob.c().sample(&mut rng), prob.c().sample(&mut rng), prob.c().sample(&mut rng))
        })
        .collect();
    for (i, f) in bundle.sources.iter().enumerate() {
        let (c1, c2) = f.lipschitz_constants().unwrap_or((f64::NAN, f64::NAN));
        let lip = check_lipschitz_type(f.as_ref(), c1, c2, &triples);
        let diag = check_diagonal_zero(f.as_ref(), prob.c(), args.samples, &mut rng);
        let pseudo = check_pseudomonotone(f.as_ref(), prob.c(), args.samples, &mut rng);
        println!(
            "f[{i}]: lipschitz-type (c1 {:.4e}, c2 {:.4e}) {}, diagonal {}, pseudomonotone {}",
            c1,
            c2,
            if lip { "ok" } else { "FAILED" },
            if diag { "ok" } else { "FAILED" },
            if pseudo { "ok" } else { "FAILED" }
        );
        ok &= lip && diag && pseudo;
    }
    for (j, f) in bundle.images.iter().enumerate() {
        let mono = check_monotone(f.as_ref(), prob.q(), args.samples, &mut rng);
        let diag = check_diagonal_zero(f.as_ref(), prob.q(), args.samples, &mut rng);
        println!(
            "F[{j}]: monotone {}, diagonal {}",
            if mono { "ok" } else { "FAILED" },
            if diag { "ok" } else { "FAILED" }
        );
        ok &= mono && diag;
    }

    if bundle.known_solution.is_some() {
        match verify_certificate(&bundle, args.samples.min(2000), args.seed) {
            Ok(report) => {
                println!("{report}");
                ok &= report.passed();
            }
            Err(e) => {
                println!("FAILED: certificate: {e}");
                ok = false;
            }
        }
    }

    if ok {
        println!("validation passed");
        SUCCESS
    } else {
        println!("validation failed");
        FAILURE
    }
}
