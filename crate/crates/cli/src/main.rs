use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use htcp_core::classify::{
    check_det_condition, check_p_pair, check_p_pair_via_left_inverse, check_p_tensor, check_r0_pair, check_r_pair,
    check_strong_p_pair,
};
use htcp_core::generate::{generate, Family};
use htcp_core::io::{instance_to_string, parse_pair, parse_tensor, read_instance, read_vector, PairFile};
use htcp_core::oracle::oracle_check;
use htcp_core::problem::canonical_dedup;
use htcp_core::solver::{
    solve_homotopy, solve_newton_multistart, solve_pattern_enumeration, verify_solution, SolveReport, SolveStatus,
};
use htcp_core::spectra::{b_eigen, degree_estimate_pair, degree_estimate_tcp, h_eigen, z_eigen};
use htcp_core::{HtcpError, SolutionPair, SolverConfig, Tensor};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NONE_FOUND: u8 = 2;
const EXIT_PROVEN_EMPTY: u8 = 3;
const EXIT_REFUTED: u8 = 4;
const EXIT_DISAGREEMENT: u8 = 5;

/// Horizontal tensor complementarity toolkit.
#[derive(Parser)]
#[command(name = "htcp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Residual tolerance for accepting a solution.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Multistart count.
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// Search radius for starting points.
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    homotopy_steps: Option<usize>,
    /// Thread count; output does not depend on it.
    #[arg(long, global = true, env = "HTCP_WORKERS")]
    workers: Option<usize>,
    /// Largest dimension accepted by the enumeration-based routines.
    #[arg(long, global = true)]
    guard_dim: Option<usize>,
    /// Largest order accepted by the enumeration-based routines.
    #[arg(long, global = true)]
    guard_order: Option<usize>,
    /// Output file (a directory for `gen`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Opts {
    fn config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            tol_residual: self.tol.unwrap_or(d.tol_residual),
            multistart_count: self.starts.unwrap_or(d.multistart_count),
            search_radius: self.radius.unwrap_or(d.search_radius),
            max_newton_iters: self.max_iters.unwrap_or(d.max_newton_iters),
            homotopy_steps: self.homotopy_steps.unwrap_or(d.homotopy_steps),
            guard_dim: self.guard_dim.unwrap_or(d.guard_dim),
            guard_order: self.guard_order.unwrap_or(d.guard_order),
            rng_seed: self.seed,
            worker_count: self.workers,
            ..d
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve HTCP(A, B, q) from an instance file.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
    },
    /// Certify or refute a property of a tensor pair.
    Classify {
        pair: PathBuf,
        #[arg(long, value_enum)]
        property: PropertyArg,
        /// Vector file with the `q` of the R-pair test.
        #[arg(long)]
        q: Option<PathBuf>,
    },
    /// Eigenpairs of a tensor (H, Z) or a pair (B).
    Eigen {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = EigenArg::H)]
        kind: EigenArg,
    },
    /// Degree of a pair, or of a TCP tensor with `--tcp`.
    Degree {
        input: PathBuf,
        /// Vector file; enables the R-pair exact case.
        #[arg(long)]
        q: Option<PathBuf>,
        #[arg(long)]
        tcp: bool,
    },
    /// Compare Newton and homotopy against enumeration on random instances.
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Dimensions cycle through `1..=dims`.
        #[arg(long, default_value_t = 3)]
        dims: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        orders: Vec<usize>,
    },
    /// Write generated instance files.
    Gen {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Newton,
    Homotopy,
    Enumerate,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    R0,
    R,
    P,
    PDet,
    #[value(name = "p-leftinv")]
    PLeftInv,
    PTensor,
    StrongP,
}

#[derive(Clone, Copy, ValueEnum)]
enum EigenArg {
    H,
    Z,
    B,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'static str,
    seed: u64,
    config: &'a SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    result: T,
}

#[derive(Serialize)]
struct SolveSummary {
    status: SolveStatus,
    solutions: Vec<SolutionPair>,
    reports: Vec<SolveReport>,
}

struct Ctx<'a> {
    cfg: SolverConfig,
    opts: &'a Opts,
}

impl Ctx<'_> {
    fn emit<T: Serialize>(&self, command: &str, input: Option<&Path>, result: T) -> Result<(), HtcpError> {
        let env = Envelope {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.cfg.rng_seed,
            config: &self.cfg,
            input: input.map(|p| p.display().to_string()),
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        match &self.opts.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.opts.verbose > 0 {
            eprintln!("{}", msg());
        }
    }
}

fn read_pair_file(path: &Path) -> Result<PairFile, HtcpError> {
    parse_pair(&std::fs::read_to_string(path)?)
}

/// A tensor file, or the tensor at `pick` of a pair file.
fn read_tensor_or_pair(path: &Path, pick: impl Fn(PairFile) -> Tensor) -> Result<Tensor, HtcpError> {
    let text = std::fs::read_to_string(path)?;
    parse_tensor(&text).or_else(|_| parse_pair(&text).map(pick))
}

fn solve(ctx: &Ctx, path: &Path, method: MethodArg) -> Result<u8, HtcpError> {
    let inst = read_instance(path)?;
    let cfg = &ctx.cfg;
    let mut reports = Vec::new();
    if matches!(method, MethodArg::Newton | MethodArg::All) {
        reports.push(solve_newton_multistart(&inst, cfg)?);
    }
    if matches!(method, MethodArg::Homotopy | MethodArg::All) {
        reports.push(solve_homotopy(&inst, cfg)?);
    }
    if matches!(method, MethodArg::Enumerate | MethodArg::All) {
        reports.push(solve_pattern_enumeration(&inst, cfg)?);
    }
    let found: Vec<SolutionPair> = reports
        .iter()
        .flat_map(|r| r.solutions.iter().cloned())
        .filter(|s| verify_solution(&inst, s, cfg.tol_residual))
        .collect();
    let solutions = canonical_dedup(found, cfg.tol_dedup);
    let status = if !solutions.is_empty() {
        SolveStatus::Found
    } else if reports.iter().any(|r| r.status == SolveStatus::ProvenEmpty) {
        SolveStatus::ProvenEmpty
    } else {
        SolveStatus::NoneFound
    };
    ctx.log(|| format!("{} verified solution(s)", solutions.len()));
    ctx.emit("solve", Some(path), SolveSummary { status, solutions, reports })?;
    Ok(match status {
        SolveStatus::Found => EXIT_OK,
        SolveStatus::ProvenEmpty => EXIT_PROVEN_EMPTY,
        _ => EXIT_NONE_FOUND,
    })
}

fn classify(ctx: &Ctx, path: &Path, property: PropertyArg, q: Option<&Path>) -> Result<u8, HtcpError> {
    let pair = read_pair_file(path)?;
    let (a, b, cfg) = (&pair.a, &pair.b, &ctx.cfg);
    let verdict = match property {
        PropertyArg::R0 => check_r0_pair(a, b, cfg)?,
        PropertyArg::R => {
            let q = q.ok_or_else(|| HtcpError::Invalid("property r needs --q".into()))?;
            check_r_pair(a, b, &read_vector(q)?, cfg)?
        }
        PropertyArg::P => check_p_pair(a, b, cfg)?,
        PropertyArg::PDet => check_det_condition(a, b, cfg)?,
        PropertyArg::PLeftInv => check_p_pair_via_left_inverse(a, b, cfg)?,
        PropertyArg::PTensor => check_p_tensor(a, cfg)?,
        PropertyArg::StrongP => check_strong_p_pair(a, b, cfg)?,
    };
    let code = if verdict.is_refuted() { EXIT_REFUTED } else { EXIT_OK };
    ctx.emit("classify", Some(path), verdict)?;
    Ok(code)
}

fn eigen(ctx: &Ctx, path: &Path, kind: EigenArg) -> Result<u8, HtcpError> {
    let report = match kind {
        EigenArg::H => h_eigen(&read_tensor_or_pair(path, |p| p.a)?, &ctx.cfg)?,
        EigenArg::Z => z_eigen(&read_tensor_or_pair(path, |p| p.a)?, &ctx.cfg)?,
        EigenArg::B => {
            let pair = read_pair_file(path)?;
            b_eigen(&pair.a, &pair.b, &ctx.cfg)?
        }
    };
    ctx.emit("eigen", Some(path), report)?;
    Ok(EXIT_OK)
}

fn degree(ctx: &Ctx, path: &Path, q: Option<&Path>, tcp: bool) -> Result<u8, HtcpError> {
    let estimate = if tcp {
        degree_estimate_tcp(&read_tensor_or_pair(path, |p| p.b)?, &ctx.cfg)?
    } else {
        let pair = read_pair_file(path)?;
        let q = q.map(read_vector).transpose()?;
        degree_estimate_pair(&pair.a, &pair.b, q.as_ref(), &ctx.cfg)?
    };
    ctx.emit("degree", Some(path), estimate)?;
    Ok(EXIT_OK)
}

fn oracle(ctx: &Ctx, count: usize, max_dim: usize, orders: &[usize]) -> Result<u8, HtcpError> {
    let summary = oracle_check(count, max_dim, orders, &ctx.cfg)?;
    ctx.log(|| format!("{}/{} solutions contained", summary.solutions_contained, summary.solutions_checked));
    let code = if summary.passed() { EXIT_OK } else { EXIT_DISAGREEMENT };
    ctx.emit("oracle-check", None, summary)?;
    Ok(code)
}

#[derive(Serialize)]
struct Written {
    family: Family,
    files: Vec<String>,
}

fn gen(ctx: &Ctx, family: &str, order: usize, dim: usize, count: usize) -> Result<u8, HtcpError> {
    let family: Family = family.parse()?;
    let dir = ctx.opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for named in generate(family, order, dim, count, ctx.cfg.rng_seed)? {
        let path = dir.join(format!("{}.json", named.name));
        std::fs::write(&path, instance_to_string(&named.instance))?;
        files.push(path.display().to_string());
    }
    let mut text = serde_json::to_string_pretty(&Written { family, files })?;
    text.push('\n');
    print!("{text}");
    Ok(EXIT_OK)
}

fn run(cli: &Cli) -> Result<u8, HtcpError> {
    let cfg = cli.opts.config();
    cfg.validate()?;
    let ctx = Ctx { cfg, opts: &cli.opts };
    ctx.cfg.run(|| match &cli.command {
        Command::Solve { instance, method } => solve(&ctx, instance, *method),
        Command::Classify { pair, property, q } => classify(&ctx, pair, *property, q.as_deref()),
        Command::Eigen { input, kind } => eigen(&ctx, input, *kind),
        Command::Degree { input, q, tcp } => degree(&ctx, input, q.as_deref(), *tcp),
        Command::OracleCheck { count, dims, orders } => oracle(&ctx, *count, *dims, orders),
        Command::Gen { family, order, dim, count } => gen(&ctx, family, *order, *dim, *count),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
