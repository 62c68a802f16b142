use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use screenlab::conditions::{check_all, CheckOptions, Verdict};
use screenlab::config::{self, ProblemConfig, SolverConfig};
use screenlab::domain::assemble;
use screenlab::reduction::{reduce_goods, reduce_types, NullPolicy};
use screenlab::solver::{curve_csv, profit_curve, solve_bruteforce, solve_localsearch, Method, SolveOptions, SolveResult};
use screenlab::verify::{verify_all, TheoremCheck, TheoremId, VerifyOptions};
use screenlab::{DiscreteProblem, ScreeningProblem};

#[derive(Parser)]
#[command(name = "screenlab", version, about = "Condition checks, reductions and solvers for screening problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the regularity checks (B0) to (B3u).
    Check {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        b3_samples: usize,
        /// Count a failed (B3u) as a verdict failure.
        #[arg(long)]
        require_b3u: bool,
    },
    /// Reduce to an equal-dimensional problem.
    Reduce {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Effective problem config; the mapping goes to `<out>.mapping.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base good (types mode) or base type (goods mode) index.
        #[arg(long)]
        base: Option<usize>,
        /// Reject goods reductions where the null good is not a fiber minimizer.
        #[arg(long)]
        strict_null: bool,
    },
    /// Search for a profit-maximizing price schedule.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the profit curve of this good around the best schedule.
        #[arg(long)]
        curve: Option<usize>,
        #[arg(long, default_value = "curve.csv")]
        curve_out: PathBuf,
        #[arg(long, default_value_t = 101)]
        curve_samples: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check theorem statements numerically.
    Verify {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "all")]
        theorem: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Materialize a built-in problem and run its pipeline.
    Example {
        #[arg(long)]
        name: String,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the built-in config here.
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Types,
    Goods,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Brute,
    Local,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Brute => Method::Brute,
            MethodArg::Local => Method::Local,
        }
    }
}

/// Errors that end the run with exit code 2.
#[derive(Debug)]
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

type Outcome = Result<bool, Fatal>;

struct Loaded {
    text: String,
    config: ProblemConfig,
    problem: ScreeningProblem,
    discrete: DiscreteProblem,
}

fn load(path: &Path) -> Result<Loaded, Fatal> {
    let text = std::fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
    from_text(text)
}

fn from_text(text: String) -> Result<Loaded, Fatal> {
    let config = ProblemConfig::from_json(&text).map_err(config_error)?;
    let problem = config.to_problem().map_err(config_error)?;
    let discrete = assemble(&problem)?;
    Ok(Loaded { text, config, problem, discrete })
}

/// The message already names the JSON pointer when there is one.
fn config_error(e: config::ConfigError) -> Fatal {
    Fatal(format!("invalid config: {e}"))
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Fatal> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Fatal(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn emit(value: &Value, target: Option<&Path>) -> Result<(), Fatal> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match target {
        Some(p) => write_atomic(p, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Report skeleton: problem echo and runtime metadata.
fn report(l: &Loaded, seed: u64, started: Instant, body: Vec<(&str, Value)>) -> Value {
    let mut r = json!({
        "problem": {
            "name": l.config.name,
            "hash": sha256_hex(&l.text),
            "dims": { "m": l.problem.m, "n": l.problem.n },
        },
        "runtime": {
            "seed": seed,
            "grid": { "types": l.discrete.n_types(), "goods": l.discrete.n_goods() },
            "threads": screenlab::par::current_threads(),
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": started.elapsed().as_secs_f64(),
        },
    });
    for (k, v) in body {
        r[k] = v;
    }
    r
}

fn run_check(l: &Loaded, seed: u64, b3_samples: usize, strict: bool) -> (Value, bool) {
    let rep = check_all(&l.problem, &l.discrete, CheckOptions { seed, b3_samples });
    let failures = rep.failures(strict);
    let mut v = serde_json::to_value(&rep).expect("report serializes");
    v["failures"] = json!(failures);
    (v, failures.is_empty())
}

fn run_solve(d: &DiscreteProblem, method: Method, opts: &SolveOptions) -> Result<SolveResult, Fatal> {
    Ok(match method {
        Method::Brute => solve_bruteforce(d, opts)?,
        Method::Local => solve_localsearch(d, opts)?,
    })
}

fn solve_summary(r: &SolveResult) -> Value {
    let mut v = serde_json::to_value(r).expect("result serializes");
    // Per-type tables are large; the allocation is kept, the rest dropped.
    if let Some(u) = v.get_mut("best_utility").and_then(Value::as_object_mut) {
        u.remove("argmax_sets");
    }
    v
}

fn theorem_ok(checks: &[TheoremCheck]) -> bool {
    checks.iter().all(|c| c.verdict != Verdict::Fail)
}

fn cmd_check(problem: &Path, report_to: Option<&Path>, seed: u64, b3_samples: usize, strict: bool) -> Outcome {
    let started = Instant::now();
    let l = load(problem)?;
    let (conditions, ok) = run_check(&l, seed, b3_samples, strict);
    emit(&report(&l, seed, started, vec![("conditions", conditions)]), report_to)?;
    Ok(ok)
}

fn cmd_reduce(problem: &Path, mode: Mode, out: Option<&Path>, base: Option<usize>, strict_null: bool) -> Outcome {
    let l = load(problem)?;
    let solver: Option<SolverConfig> = l.config.solver.clone();
    let name = l.config.name.as_ref().map(|n| format!("{n}-reduced"));
    let (effective, mapping) = match mode {
        Mode::Types => {
            let tr = reduce_types(&l.problem, &l.discrete, base)?;
            (ProblemConfig::from_discrete(&tr.problem, name, solver), serde_json::to_value(tr.mapping())?)
        }
        Mode::Goods => {
            let policy = if strict_null { NullPolicy::Strict } else { NullPolicy::Override };
            let gr = reduce_goods(&l.problem, &l.discrete, base, policy)?;
            (ProblemConfig::from_discrete(&gr.problem, name, solver), serde_json::to_value(gr.mapping(&l.discrete))?)
        }
    };
    match out {
        Some(path) => {
            write_atomic(path, &(effective.to_json() + "\n"))?;
            let mut m = path.as_os_str().to_owned();
            m.push(".mapping.json");
            emit(&mapping, Some(Path::new(&m)))?;
        }
        None => emit(&json!({ "problem": serde_json::to_value(&effective)?, "mapping": mapping }), None)?,
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    problem: &Path,
    method: Option<MethodArg>,
    seed: Option<u64>,
    curve: Option<usize>,
    curve_out: &Path,
    curve_samples: usize,
    report_to: Option<&Path>,
) -> Outcome {
    let started = Instant::now();
    let l = load(problem)?;
    let mut opts = l.config.solve_options();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let method = method.map(Method::from).or(l.config.method()).unwrap_or(Method::Local);
    let r = run_solve(&l.discrete, method, &opts)?;
    if let Some(good) = curve {
        let bounds = opts.bounds(&l.discrete);
        let range = bounds.get(good).copied().ok_or_else(|| Fatal(format!("no good {good}")))?;
        let c = profit_curve(&l.discrete, &r.best_schedule, good, range, curve_samples)?;
        write_atomic(curve_out, &curve_csv(&c))?;
    }
    emit(&report(&l, opts.seed, started, vec![("solve", solve_summary(&r))]), report_to)?;
    Ok(true)
}

fn parse_theorems(spec: &str) -> Result<Vec<TheoremId>, Fatal> {
    if spec == "all" {
        return Ok(TheoremId::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| TheoremId::parse(s.trim()).ok_or_else(|| Fatal(format!("unknown theorem '{s}'"))))
        .collect()
}

fn cmd_verify(problem: &Path, theorem: &str, seed: u64, report_to: Option<&Path>) -> Outcome {
    let started = Instant::now();
    let which = parse_theorems(theorem)?;
    let l = load(problem)?;
    let opts = VerifyOptions { seed, ..VerifyOptions::default() };
    let name = l.config.name.clone().unwrap_or_else(|| problem.display().to_string());
    let checks = verify_all(&l.problem, &l.discrete, &which, &opts, &name);
    let ok = theorem_ok(&checks);
    emit(&report(&l, seed, started, vec![("theorems", serde_json::to_value(&checks)?)]), report_to)?;
    Ok(ok)
}

/// Canonical pipeline per built-in: conditions, the applicable reduction,
/// a solve, and the theorem checks that apply. Condition verdicts are
/// reported but only theorem failures set the exit code, since several
/// examples exist to show a condition failing.
fn cmd_example(name: &str, report_to: Option<&Path>, config_out: Option<&Path>) -> Outcome {
    let started = Instant::now();
    let text = config::builtin(name)
        .ok_or_else(|| Fatal(format!("unknown example '{name}'; known: {}", config::BUILTINS.join(", "))))?;
    if let Some(p) = config_out {
        write_atomic(p, text)?;
    }
    let l = from_text(text.to_string())?;
    let opts = l.config.solve_options();
    let seed = opts.seed;
    let (conditions, _) = run_check(&l, seed, 64, false);
    let method = l.config.method().unwrap_or(Method::Local);
    let solve = run_solve(&l.discrete, method, &opts)?;
    let mut body = vec![("conditions", conditions), ("solve", solve_summary(&solve))];

    let (m, n) = (l.problem.m, l.problem.n);
    if m > n {
        let tr = reduce_types(&l.problem, &l.discrete, None)?;
        let reduced = run_solve(&tr.problem, method, &opts)?;
        body.push((
            "reductions",
            json!({
                "mode": "types",
                "effective_types": tr.problem.n_types(),
                "gap": tr.gap,
                "reduced_best_profit": reduced.best_profit,
                "full_best_profit": solve.best_profit,
            }),
        ));
    } else if n > m {
        let gr = reduce_goods(&l.problem, &l.discrete, None, NullPolicy::Override)?;
        body.push((
            "reductions",
            json!({
                "mode": "goods",
                "effective_goods": gr.problem.n_goods(),
                "gap": gr.gap,
                "null_overridden": gr.null_overridden,
            }),
        ));
    }
    let which: Vec<TheoremId> = match (m.cmp(&n), name) {
        (_, "example-3-3") => vec![TheoremId::Prop31],
        (std::cmp::Ordering::Greater, _) => vec![TheoremId::Lemma43, TheoremId::Thm44, TheoremId::Transfer],
        (std::cmp::Ordering::Less, _) => vec![TheoremId::Prop51, TheoremId::Cor52, TheoremId::Prop53, TheoremId::Transfer],
        _ => Vec::new(),
    };
    let vopts = VerifyOptions { seed, ..VerifyOptions::default() };
    let checks = verify_all(&l.problem, &l.discrete, &which, &vopts, name);
    let ok = theorem_ok(&checks);
    body.push(("theorems", serde_json::to_value(&checks)?));
    emit(&report(&l, seed, started, body), report_to)?;
    Ok(ok)
}

#[cfg(feature = "parallel")]
fn cap_threads() {
    if let Some(n) = std::env::var("SCREENLAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|n| *n > 0) {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn cap_threads() {}

fn main() -> ExitCode {
    cap_threads();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check { problem, report, seed, b3_samples, require_b3u } => {
            cmd_check(problem, report.as_deref(), *seed, *b3_samples, *require_b3u)
        }
        Command::Reduce { problem, mode, out, base, strict_null } => cmd_reduce(problem, *mode, out.as_deref(), *base, *strict_null),
        Command::Solve { problem, method, seed, curve, curve_out, curve_samples, report } => {
            cmd_solve(problem, *method, *seed, *curve, curve_out, *curve_samples, report.as_deref())
        }
        Command::Verify { problem, theorem, seed, report } => cmd_verify(problem, theorem, *seed, report.as_deref()),
        Command::Example { name, report, config_out } => cmd_example(name, report.as_deref(), config_out.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
