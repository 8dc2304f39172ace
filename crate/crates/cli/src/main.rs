//! qlb: bounds, verification suites, and report collation for the query
//! lower-bound workbench.
//!
//! Four subcommands: `bound` computes a lower bound and writes a JSON
//! report, `verify` runs a named check suite, `reduce` replays the
//! compressed-versus-ladder query-count comparison, and `report` collates
//! a directory of JSON bound reports into a CSV table.
//!
//! Exit codes: 0 on success with all checks passing, 1 when a computation
//! or check fails, 2 on parameter errors (a violated precondition is
//! printed verbatim).

use clap::{Args, Parser, Subcommand};
use qlb_core::compressed::{comp_lower_bound, db_count, Property, StepMode, DB_DIM_CAP};
use qlb_core::ladder::{eta_for, mladv_lower_bound, space_chain, SPACE_DIM_CAP};
use qlb_core::oracle::{checked_pow, InputDistribution, ProblemSpec, STATE_DIM_CAP};
use qlb_core::perm::perm_success_bound;
use qlb_core::poly::{poly_reduction_bound, BooleanFunction};
use qlb_core::reductions::{
    gamma_from_property, property_problem, reduction_factor_check, sdpt_bound_report,
};
use qlb_core::report::{BoundReport, Provenance};
use qlb_core::suites::{
    collision_analytic_bound, madv_bound_report, property_by_name, run_suite, SuiteConfig,
};
use qlb_core::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qlb",
    version,
    about = "Query lower-bound workbench: compressed-oracle and ladder-adversary calculators with verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a lower bound (methods: comp, comp-analytic, mladv, madv,
    /// sdpt, poly, perm) and emit a JSON report.
    Bound(RunArgs),
    /// Run a named check suite (space, ladder, reduction, sdpt, poly,
    /// perm, all) and emit its reports as JSON.
    Verify(RunArgs),
    /// Replay the six-fold comparison between the compressed-oracle and
    /// ladder query counts for one property instance.
    Reduce(RunArgs),
    /// Collate a directory of JSON bound reports into a CSV table.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Bound calculator to run.
    #[arg(long)]
    method: Option<String>,
    /// Problem name: collision or preimage for oracle methods; parity,
    /// or, and, const0, const1, hex:<digits>, or file:<path> (a 0/1
    /// bitstring file) for poly.
    #[arg(long)]
    problem: Option<String>,
    /// Input positions N (perm: permutation domain size).
    #[arg(long)]
    n: Option<usize>,
    /// Output values M.
    #[arg(long)]
    m: Option<usize>,
    /// Property arity / direct-product count, depending on the method.
    #[arg(long)]
    k: Option<usize>,
    /// Allowed failure probability.
    #[arg(long)]
    eps: Option<f64>,
    /// Ladder ratio kappa.
    #[arg(long)]
    kappa: Option<f64>,
    /// Good/bad eigenvalue threshold lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Bad-subspace overlap eta (computed from the ladder when omitted).
    #[arg(long)]
    eta: Option<f64>,
    /// Query count T (perm) or suite depth parameter.
    #[arg(long)]
    t: Option<usize>,
    /// Suite name for verify.
    #[arg(long)]
    suite: Option<String>,
    /// Tolerance override for suite-level comparisons.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for sampled computations.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file with the same keys as these flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Omit the wall-clock stamp so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Directory holding prior JSON bound reports.
    dir: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config-file counterpart of the flags. Caps are configurable here and
/// only tighten the compiled-in limits.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    method: Option<String>,
    problem: Option<String>,
    suite: Option<String>,
    n: Option<usize>,
    m: Option<usize>,
    k: Option<usize>,
    t: Option<usize>,
    eps: Option<f64>,
    kappa: Option<f64>,
    lambda: Option<f64>,
    eta: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    no_timestamp: Option<bool>,
    state_dim_cap: Option<usize>,
    db_dim_cap: Option<usize>,
    space_dim_cap: Option<usize>,
}

/// Flags resolved over the config file.
struct RunConfig {
    method: Option<String>,
    problem: Option<String>,
    suite: Option<String>,
    n: Option<usize>,
    m: Option<usize>,
    k: Option<usize>,
    t: Option<usize>,
    eps: Option<f64>,
    kappa: Option<f64>,
    lambda: Option<f64>,
    eta: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    no_timestamp: bool,
    state_dim_cap: usize,
    db_dim_cap: usize,
    space_dim_cap: usize,
}

impl RunConfig {
    fn resolve(args: &RunArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<FileConfig>(&text)?
            }
            None => FileConfig::default(),
        };
        Ok(RunConfig {
            method: args.method.clone().or(file.method),
            problem: args.problem.clone().or(file.problem),
            suite: args.suite.clone().or(file.suite),
            n: args.n.or(file.n),
            m: args.m.or(file.m),
            k: args.k.or(file.k),
            t: args.t.or(file.t),
            eps: args.eps.or(file.eps),
            kappa: args.kappa.or(file.kappa),
            lambda: args.lambda.or(file.lambda),
            eta: args.eta.or(file.eta),
            tol: args.tol.or(file.tol),
            seed: args.seed.or(file.seed),
            out: args.out.clone().or(file.out),
            no_timestamp: args.no_timestamp || file.no_timestamp.unwrap_or(false),
            state_dim_cap: file.state_dim_cap.unwrap_or(STATE_DIM_CAP).min(STATE_DIM_CAP),
            db_dim_cap: file.db_dim_cap.unwrap_or(DB_DIM_CAP).min(DB_DIM_CAP),
            space_dim_cap: file.space_dim_cap.unwrap_or(SPACE_DIM_CAP).min(SPACE_DIM_CAP),
        })
    }

    /// The resolved settings, echoed into report provenance so a rerun
    /// can be reconstructed from the report alone.
    fn echo(&self) -> BTreeMap<String, serde_json::Value> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: Option<serde_json::Value>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        put("method", self.method.clone().map(Into::into));
        put("problem", self.problem.clone().map(Into::into));
        put("suite", self.suite.clone().map(Into::into));
        put("n", self.n.map(|v| (v as u64).into()));
        put("m", self.m.map(|v| (v as u64).into()));
        put("k", self.k.map(|v| (v as u64).into()));
        put("t", self.t.map(|v| (v as u64).into()));
        put("eps", self.eps.map(Into::into));
        put("kappa", self.kappa.map(Into::into));
        put("lambda", self.lambda.map(Into::into));
        put("eta", self.eta.map(Into::into));
        put("tol", self.tol.map(Into::into));
        put("seed", self.seed.map(Into::into));
        map
    }

    fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            n: self.n,
            m: self.m,
            k: self.k,
            t: self.t,
            eps: self.eps,
            kappa: self.kappa,
            lambda: self.lambda,
            eta: self.eta,
            tol: self.tol,
            seed: self.seed,
        }
    }

    fn provenance(&self) -> Provenance {
        let mut p = if self.no_timestamp {
            Provenance::new()
        } else {
            Provenance::stamped()
        };
        p.seed = self.seed;
        p.config = self.echo();
        p
    }

    /// Enforce the configured caps on the dense instance the oracle
    /// methods are about to build. The oracle unitary acts on X, Y, and
    /// the input register together, so its dimension gates against the
    /// state cap.
    fn gate_dims(&self, n: usize, m: usize, with_db: bool) -> Result<()> {
        let fdim = checked_pow(m, n)?;
        if fdim > self.space_dim_cap {
            return Err(Error::size(format!(
                "function-space dimension {fdim} exceeds cap {}",
                self.space_dim_cap
            )));
        }
        let op_dim = fdim
            .checked_mul(n)
            .and_then(|v| v.checked_mul(m))
            .ok_or_else(|| Error::size("oracle operator dimension overflows usize".to_string()))?;
        if op_dim > self.state_dim_cap {
            return Err(Error::size(format!(
                "oracle operator dimension {op_dim} exceeds cap {}",
                self.state_dim_cap
            )));
        }
        if with_db {
            let ddim = db_count(n, m)?;
            if ddim > self.db_dim_cap {
                return Err(Error::size(format!(
                    "database-space dimension {ddim} exceeds cap {}",
                    self.db_dim_cap
                )));
            }
        }
        Ok(())
    }
}

fn named_property(cfg: &RunConfig, n: usize, m: usize) -> Result<Property> {
    let name = cfg.problem.as_deref().unwrap_or("collision");
    property_by_name(name, n, m, cfg.k.unwrap_or(1))
}

fn boolean_function(cfg: &RunConfig) -> Result<BooleanFunction> {
    let name = cfg.problem.as_deref().unwrap_or("parity");
    let n = cfg.n.unwrap_or(2);
    if let Some(hex) = name.strip_prefix("hex:") {
        return BooleanFunction::from_hex(n, hex);
    }
    if let Some(path) = name.strip_prefix("file:") {
        let text = fs::read_to_string(path)?;
        return BooleanFunction::from_bitstring(&text);
    }
    match name {
        "parity" => BooleanFunction::parity(n),
        "or" => BooleanFunction::or(n),
        "and" => BooleanFunction::and(n),
        "const0" => BooleanFunction::constant(n, 0),
        "const1" => BooleanFunction::constant(n, 1),
        other => Err(Error::param(format!(
            "unknown boolean function '{other}'; expected parity, or, and, const0, const1, hex:<digits>, or file:<path>"
        ))),
    }
}

/// Shared ladder setup for the adversary methods: the tuple-answer problem
/// for a named property, its ladder at kappa, and the resolved
/// (lambda, eta) pair.
fn ladder_setup(
    cfg: &RunConfig,
    n: usize,
    m: usize,
) -> Result<(ProblemSpec, qlb_core::ladder::MlaMatrix, f64, f64)> {
    let p = named_property(cfg, n, m)?;
    let spec = property_problem(&p, n, m)?;
    let kappa = cfg.kappa.unwrap_or(4.0);
    let gamma = gamma_from_property(&spec, &p, kappa)?;
    let lam = cfg.lambda.unwrap_or(kappa);
    let eta = match cfg.eta {
        Some(e) => e,
        None => eta_for(&gamma, lam, &spec)?,
    };
    Ok((spec, gamma, lam, eta))
}

fn compute_bound(cfg: &RunConfig, method: &str) -> Result<BoundReport> {
    match method {
        "comp" => {
            let n = cfg.n.unwrap_or(3);
            let m = cfg.m.unwrap_or(2);
            cfg.gate_dims(n, m, true)?;
            let p = named_property(cfg, n, m)?;
            let spec = ProblemSpec::all_functions(n, m, 1)?;
            comp_lower_bound(&spec, &p, cfg.eps.unwrap_or(0.1), StepMode::Numeric)
        }
        "comp-analytic" => {
            let name = cfg.problem.as_deref().unwrap_or("collision");
            if name != "collision" {
                return Err(Error::param(format!(
                    "analytic mode covers the collision closed form only; got problem '{name}'"
                )));
            }
            collision_analytic_bound(cfg.m.unwrap_or(16), cfg.eps.unwrap_or(0.1))
        }
        "mladv" => {
            let n = cfg.n.unwrap_or(3);
            let m = cfg.m.unwrap_or(2);
            cfg.gate_dims(n, m, false)?;
            let (spec, gamma, lam, eta) = ladder_setup(cfg, n, m)?;
            let dist = InputDistribution::uniform(&spec);
            let chain = space_chain(&dist, &spec)?;
            mladv_lower_bound(&gamma, &chain, &spec, lam, eta, cfg.eps.unwrap_or(0.1))
        }
        "madv" => {
            let n = cfg.n.unwrap_or(3);
            let m = cfg.m.unwrap_or(2);
            cfg.gate_dims(n, m, false)?;
            let (spec, gamma, lam, eta) = ladder_setup(cfg, n, m)?;
            madv_bound_report(&spec, &gamma, lam, eta, cfg.eps.unwrap_or(0.1))
        }
        "sdpt" => {
            let base = compute_bound(cfg, "mladv")?;
            sdpt_bound_report(&base, cfg.k.unwrap_or(361))
        }
        "poly" => {
            let f = boolean_function(cfg)?;
            poly_reduction_bound(&f, cfg.eps.unwrap_or(1.0 / 3.0))
        }
        "perm" => perm_success_bound(cfg.n.unwrap_or(1000), cfg.t.unwrap_or(0)),
        other => Err(Error::param(format!(
            "unknown method '{other}'; expected comp, comp-analytic, mladv, madv, sdpt, poly, perm"
        ))),
    }
}

fn emit(cfg_out: &Option<PathBuf>, body: &str) -> Result<()> {
    match cfg_out {
        Some(path) => fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_bound(args: &RunArgs) -> Result<u8> {
    let cfg = RunConfig::resolve(args)?;
    let method = cfg.method.clone().unwrap_or_else(|| "comp".to_string());
    let mut report = compute_bound(&cfg, &method)?;
    report.provenance = cfg.provenance();
    let body = serde_json::to_string_pretty(&report)? + "\n";
    emit(&cfg.out, &body)?;
    let ok = report.verdicts.iter().all(|c| c.pass || c.warning);
    Ok(if ok { 0 } else { 1 })
}

fn cmd_verify(args: &RunArgs) -> Result<u8> {
    let cfg = RunConfig::resolve(args)?;
    let suite = cfg.suite.clone().unwrap_or_else(|| "all".to_string());
    let mut reports = run_suite(&suite, &cfg.suite_config())?;
    for r in &mut reports {
        r.provenance = cfg.provenance();
    }
    let body = serde_json::to_string_pretty(&reports)? + "\n";
    emit(&cfg.out, &body)?;
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 1 })
}

fn cmd_reduce(args: &RunArgs) -> Result<u8> {
    let cfg = RunConfig::resolve(args)?;
    let n = cfg.n.unwrap_or(3);
    let m = cfg.m.unwrap_or(4);
    cfg.gate_dims(n, m, true)?;
    let p = named_property(&cfg, n, m)?;
    let spec = ProblemSpec::all_functions(n, m, 1)?;
    let mut report = reduction_factor_check(&spec, &p, cfg.eps.unwrap_or(0.1))?;
    report.provenance = cfg.provenance();
    let body = serde_json::to_string_pretty(&report)? + "\n";
    emit(&cfg.out, &body)?;
    let ok = report.verdicts.iter().all(|c| c.pass || c.warning);
    Ok(if ok { 0 } else { 1 })
}

fn csv_cell(v: Option<&serde_json::Value>) -> String {
    match v {
        Some(serde_json::Value::Number(x)) => x.to_string(),
        Some(serde_json::Value::String(s)) => quote_csv(s),
        _ => String::new(),
    }
}

fn quote_csv(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_report(args: &ReportArgs) -> Result<u8> {
    let mut names: Vec<PathBuf> = fs::read_dir(&args.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();

    let mut rows = Vec::new();
    let mut skipped: Vec<(String, String)> = Vec::new();
    for path in &names {
        let display = path.file_name().unwrap_or_default().to_string_lossy().to_string();
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                skipped.push((display, e.to_string()));
                continue;
            }
        };
        let report: BoundReport = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                skipped.push((display, format!("not a bound report: {e}")));
                continue;
            }
        };
        let t_or_value = if report.unbounded {
            "unbounded".to_string()
        } else if let Some(t) = report.t {
            t.to_string()
        } else if let Some(v) = report.value {
            v.to_string()
        } else {
            skipped.push((display, "report carries neither T nor a value".to_string()));
            continue;
        };
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            quote_csv(&report.bound_name),
            quote_csv(&report.problem),
            csv_cell(report.parameters.get("n")),
            csv_cell(report.parameters.get("m")),
            csv_cell(report.parameters.get("k")),
            csv_cell(report.parameters.get("eps")),
            t_or_value
        ));
    }

    let mut csv = String::from("method,problem,n,m,k,eps,t_or_value\n");
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    emit(&args.out, &csv)?;

    for (name, reason) in &skipped {
        eprintln!("skipped {name}: {reason}");
    }
    Ok(if rows.is_empty() { 1 } else { 0 })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) | Error::SizeLimit(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Bound(args) => cmd_bound(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
