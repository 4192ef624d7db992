//! `efxpo` command-line front end.
//!
//! Exit codes: 0 success, 2 parse error, 3 validation error, 4 invariant
//! failure or theorem violation, 5 oracle budget exceeded.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use efxpo_core::gen::{adversarial, grid_batch, UniformRational};
use efxpo_core::io::{instance_to_json, parse_instances, IoError, ResultFile, VerifyLevel};
use efxpo_core::oracle::{check_realloc_output, validate_theorems, EnumBudget, TheoremOptions, DEFAULT_BUDGET};
use efxpo_core::solver::{solve_with, CheckLevel, SolveOptions, SolveStats};
use efxpo_core::{Error, RawInstance};

#[derive(Parser)]
#[command(name = "efxpo", version, about = "EFX and Pareto-optimal allocations of two types of goods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Verify {
    None,
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    UniformRational,
    Grid,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance (or a JSON array of instances).
    Solve {
        /// Instance file; `-` reads stdin.
        file: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        verify: Verify,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allocation budget for `--verify full`.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Leave out wall-clock timings so output is byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Generate instances.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m1: u64,
        #[arg(long)]
        m2: u64,
        #[arg(long, value_enum, default_value = "uniform-rational")]
        dist: Dist,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        denom_bound: u64,
        /// Keep sampling until no split allocation is EFX.
        #[arg(long)]
        adversarial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the solver on random instances.
    Bench {
        /// Comma-separated `NxM1xM2` triples.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<String>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the brute-force checks.
    Oracle {
        /// Instance file (object or array).
        file: Option<PathBuf>,
        /// Check every structural claim on each instance; without a file,
        /// sweep the grid n ∈ {2, 3}, m1, m2 ∈ [1, 4].
        #[arg(long)]
        sweep_theorems: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Replay a result file against the instance.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse(_) => Failure::new(2, e.to_string()),
            IoError::Validation(_) => Failure::new(3, e.to_string()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation(_) | Error::Arith(_) => 3,
            Error::BudgetExceeded { .. } | Error::OracleOverflow => 5,
            _ => 4,
        };
        Failure::new(code, e.to_string())
    }
}

fn read_input(path: &PathBuf) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::new(2, e.to_string()))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Failure::new(2, format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn one_or_many<T: serde::Serialize>(items: &[T]) -> String {
    match items {
        [one] => serde_json::to_string_pretty(one),
        many => serde_json::to_string_pretty(many),
    }
    .expect("serializable")
}

fn solve_cmd(file: PathBuf, verify: Verify, out: Option<PathBuf>, budget: u64, no_timing: bool) -> Result<(), Failure> {
    let instances = parse_instances(&read_input(&file)?)?;
    let level = match verify {
        Verify::None => VerifyLevel::None,
        Verify::Fast => VerifyLevel::Fast,
        Verify::Full => VerifyLevel::Full,
    };
    let opts = SolveOptions::default();
    let mut docs = Vec::with_capacity(instances.len());
    for raw in &instances {
        let res = solve_with(raw, &opts)?;
        let doc = ResultFile::build(raw, &res, level, EnumBudget { max_allocations: budget }, !no_timing)?;
        if level != VerifyLevel::None && !(doc.verification.efx && doc.verification.proper) {
            return Err(Failure::new(4, format!("verification failed: {:?}", doc.verification)));
        }
        docs.push(doc);
    }
    emit(&one_or_many(&docs), out.as_ref())
}

#[allow(clippy::too_many_arguments)]
fn gen_cmd(
    n: usize,
    m1: u64,
    m2: u64,
    dist: Dist,
    seed: u64,
    denom_bound: u64,
    adv: bool,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    if n == 0 || denom_bound == 0 {
        return Err(Failure::new(3, "--n and --denom-bound must be positive"));
    }
    let text = match dist {
        Dist::Grid => one_or_many(&grid_batch(n, m1, m2)),
        Dist::UniformRational => {
            let mut g = UniformRational::new(seed, denom_bound)?;
            let raw = if adv { adversarial(&mut g, n, m1, m2, 100_000)? } else { g.instance(n, m1, m2) };
            instance_to_json(&raw)
        }
    };
    emit(&text, out.as_ref())
}

fn parse_size(s: &str) -> Result<(usize, u64, u64), Failure> {
    let parts: Vec<&str> = s.trim().split('x').collect();
    let bad = || Failure::new(2, format!("size {s:?} is not NxM1xM2"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn median(v: &mut [u64]) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

fn bench_cmd(sizes: Vec<String>, reps: usize, seed: u64, csv: Option<PathBuf>) -> Result<(), Failure> {
    let reps = reps.max(1);
    let opts = SolveOptions { checks: CheckLevel::Structural, dense_limit: 0 };
    let mut rows = vec!["n,m1,m2,reps,preprocess_ns_median,search_ns_median,split_builds_max,split_build_bound".to_string()];
    for spec in &sizes {
        let (n, m1, m2) = parse_size(spec)?;
        if n == 0 {
            return Err(Failure::new(3, "n must be positive"));
        }
        let mut g = UniformRational::new(seed, 1_000_000_000)?;
        let (mut pre, mut search, mut builds, mut bound) = (Vec::new(), Vec::new(), 0, 0);
        for _ in 0..reps {
            let raw = g.instance(n, m1, m2);
            let res = solve_with(&raw, &opts)?;
            pre.push(res.stats.preprocess_ns);
            search.push(res.stats.search_ns);
            builds = builds.max(res.stats.split_builds);
            bound = SolveStats::split_build_bound(n, res.prepared.map_or(m2, |p| p.m2));
        }
        rows.push(format!("{n},{m1},{m2},{reps},{},{},{builds},{bound}", median(&mut pre), median(&mut search)));
        eprintln!("{}", rows.last().unwrap());
    }
    emit(&rows.join("\n"), csv.as_ref())
}

fn oracle_cmd(file: Option<PathBuf>, sweep: bool, budget: u64, result: Option<PathBuf>) -> Result<(), Failure> {
    let budget = EnumBudget { max_allocations: budget };
    let instances: Vec<RawInstance> = match &file {
        Some(f) => parse_instances(&read_input(f)?)?,
        None if sweep => (2..=3)
            .flat_map(|n| (1..=4).flat_map(move |m1| (1..=4).flat_map(move |m2| grid_batch(n, m1, m2))))
            .collect(),
        None => return Err(Failure::new(2, "an instance file or --sweep-theorems is required")),
    };

    if let Some(path) = result {
        let [raw] = instances.as_slice() else {
            return Err(Failure::new(2, "--result replays against exactly one instance"));
        };
        let doc: ResultFile =
            serde_json::from_str(&read_input(&path)?).map_err(|e| Failure::new(2, format!("result file: {e}")))?;
        if !doc.allocation.is_complete(raw.m1, raw.m2) || doc.allocation.n() != raw.n() {
            return Err(Failure::new(4, "result allocation does not match the instance"));
        }
        let problems = check_realloc_output(raw, &doc.allocation, budget)?;
        let report = serde_json::json!({ "efx_po": problems.is_empty(), "problems": problems });
        emit(&serde_json::to_string_pretty(&report).expect("json"), None)?;
        return if problems.is_empty() { Ok(()) } else { Err(Failure::new(4, "result is not EFX and Pareto-optimal")) };
    }

    let opts = TheoremOptions { budget, ..TheoremOptions::default() };
    let mut reports = Vec::with_capacity(instances.len());
    for raw in &instances {
        reports.push(validate_theorems(raw, &opts)?);
    }
    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    let text = if sweep {
        let bad: Vec<_> = reports.iter().filter(|r| !r.is_clean()).collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "instances": reports.len(),
            "flips": reports.iter().map(|r| r.flips).sum::<usize>(),
            "proper_checked": reports.iter().map(|r| r.proper_checked).sum::<u64>(),
            "violations": violations,
            "failing": bad,
        }))
        .expect("json")
    } else {
        one_or_many(&reports)
    };
    emit(&text, None)?;
    if violations > 0 {
        return Err(Failure::new(4, format!("{violations} violations")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Solve { file, verify, out, budget, no_timing } => solve_cmd(file, verify, out, budget, no_timing),
        Command::Gen { n, m1, m2, dist, seed, denom_bound, adversarial, out } => {
            gen_cmd(n, m1, m2, dist, seed, denom_bound, adversarial, out)
        }
        Command::Bench { sizes, reps, seed, csv } => bench_cmd(sizes, reps, seed, csv),
        Command::Oracle { file, sweep_theorems, budget, result } => oracle_cmd(file, sweep_theorems, budget, result),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("efxpo: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
