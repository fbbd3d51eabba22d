//! `ctcsat`: solve, inspect and cross-check CTC-based SAT runs from the
//! command line.
//!
//! Exit codes: `solve` uses 10 (SAT), 20 (UNSAT); `pm-check` uses 0 (pure
//! PMG), 3 (PMG only), 4 (neither); `cross-validate` and `isolation-rate`
//! use 0 (pass) and 2 (fail). Any error exits with 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;

use ctcsat::cnf::{count_models, enumerate_models, half_fixed_formula};
use ctcsat::ctc::haar_unitary;
use ctcsat::pmf::{cj, indefinite_operator, isometry_columns, pmo};
use ctcsat::solver::{build_usat_rule, m_usat, sat_decide, DEFAULT_MAX_N};
use ctcsat::tensor::partial_trace_left;
use ctcsat::vv::{vv_reduce, EncodingMode};
use ctcsat::{
    emit_dimacs, parse_circuit, parse_dimacs, AdversarialPolicy, ChannelRep, CnfFormula, PmgQuery,
    PmoPath, ProcessCheckReport, QuantumState, SatResult, SolverConfig, UnitaryCtcGenerator, C64,
    DEFAULT_TOL,
};

#[derive(Parser, Debug)]
#[command(name = "ctcsat", version, about = "SAT through simulated unitary CTC generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance for the unitarity and channel predicates.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Adversary for invalid queries: identity, perm, random or depol:<p>.
    #[arg(long, default_value = "identity")]
    policy: AdversarialPolicy,
    /// Seed for the adversary's channels (defaults to --seed).
    #[arg(long)]
    adversary_seed: Option<u64>,
    /// Rounds of the decision loop (defaults to n²).
    #[arg(long)]
    iterations: Option<usize>,
    /// Largest variable count accepted by the CTC routine.
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
    /// Isolation encoding: direct or auxiliary (defaults by formula size).
    #[arg(long)]
    mode: Option<EncodingMode>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide a DIMACS formula with the CTC-based loop.
    Solve {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also report the full witness including auxiliary variables.
        #[arg(long)]
        verbose: bool,
    },
    /// Count (and optionally list) models by exhaustive search.
    Brute {
        input: PathBuf,
        /// List every model (at most 16 variables).
        #[arg(long)]
        list: bool,
        #[arg(long)]
        json: bool,
    },
    /// Apply one isolation step and print the resulting DIMACS.
    Vv {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "direct")]
        mode: EncodingMode,
        /// Write to this file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Empirical isolation rates against the 1/(10n) bound.
    IsolationRate {
        /// Formula to measure; defaults to a benchmark formula per n.
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 10_000)]
        seeds: u64,
        #[arg(long, default_value = "direct")]
        mode: EncodingMode,
        #[arg(long)]
        json: bool,
    },
    /// Check whether a query is a (pure) process matrix generator.
    PmCheck {
        /// Circuit in the text gate format.
        #[arg(long, conflicts_with = "usat", required_unless_present = "usat")]
        circuit: Option<PathBuf>,
        /// Build the USAT circuit of this DIMACS formula instead.
        #[arg(long)]
        usat: Option<PathBuf>,
        /// Traced qubits (defaults to the formula's variable count with --usat).
        #[arg(long)]
        m: Option<usize>,
        /// Ancillas appended in |0⟩.
        #[arg(long, default_value_t = 0)]
        ancillas: usize,
        /// simplified, full or both (default: both when small enough).
        #[arg(long)]
        path: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Query a generator with the USAT circuit and show what comes back.
    CtcDemo {
        /// Formula to query with; defaults to v1 ∧ ¬v2.
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "identity")]
        policy: AdversarialPolicy,
    },
    /// Compare the full process-matrix path with the traced shortcut on
    /// random unitaries.
    CrossValidate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Add this amount to one entry of the full-path operator.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        #[arg(long)]
        json: bool,
    },
}

fn read_formula(path: &Path) -> Result<CnfFormula> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dimacs(&text).with_context(|| format!("in {}", path.display()))
}

fn default_formula() -> CnfFormula {
    CnfFormula::new(2, vec![vec![1], vec![-2]]).expect("static formula")
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

#[derive(Serialize)]
struct SolveReport {
    result: &'static str,
    witness: Option<String>,
    iterations_used: usize,
    total_query_cost: usize,
    seed: u64,
    policy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    extended_witness: Option<String>,
}

fn cmd_solve(input: &Path, common: &Common, s: &SolverArgs, verbose: bool) -> Result<u8> {
    let phi = read_formula(input)?;
    if common.tol <= 0.0 {
        bail!("--tol must be positive");
    }
    let config = SolverConfig {
        iterations: s.iterations,
        seed: common.seed,
        adversary_seed: s.adversary_seed,
        policy: s.policy,
        mode: s.mode,
        max_n: s.max_n,
        tol: common.tol,
    };
    let d = sat_decide(&phi, &config)?;
    let report = SolveReport {
        result: match d.result {
            SatResult::Sat(_) => "SAT",
            SatResult::Unsat => "UNSAT",
        },
        witness: match &d.result {
            SatResult::Sat(w) => Some(w.to_string()),
            SatResult::Unsat => None,
        },
        iterations_used: d.iterations_used,
        total_query_cost: d.total_query_cost,
        seed: d.seed,
        policy: s.policy.to_string(),
        extended_witness: if verbose {
            d.extended_witness.as_ref().map(ToString::to_string)
        } else {
            None
        },
    };
    if common.json {
        print_json(&report)?;
    } else {
        println!("{}", d.result);
        if let Some(w) = &report.extended_witness {
            println!("extended {w}");
        }
    }
    Ok(match d.result {
        SatResult::Sat(_) => 10,
        SatResult::Unsat => 20,
    })
}

fn cmd_brute(input: &Path, list: bool, json: bool) -> Result<u8> {
    let phi = read_formula(input)?;
    let count = count_models(&phi)?;
    let models = if list {
        Some(enumerate_models(&phi)?.iter().map(ToString::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    if json {
        print_json(&serde_json::json!({ "count": count, "models": models }))?;
    } else {
        println!("{count}");
        for m in models.iter().flatten() {
            println!("{m}");
        }
    }
    Ok(0)
}

fn cmd_vv(input: &Path, seed: u64, mode: EncodingMode, output: Option<&Path>) -> Result<u8> {
    let phi = read_formula(input)?;
    let (star, h) = vv_reduce(&phi, seed, mode)?;
    let text = emit_dimacs(&star, &[format!("vv seed={seed} k={} mode={mode}", h.k())]);
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct IsolationRow {
    n: usize,
    models: u64,
    seeds: u64,
    isolated: u64,
    rate: f64,
    bound: f64,
    pass: bool,
}

fn isolation_row(phi: &CnfFormula, seeds: u64, mode: EncodingMode) -> Result<IsolationRow> {
    let n = phi.original_vars();
    let models = count_models(phi)?;
    let mut isolated = 0;
    for seed in 0..seeds {
        if count_models(&vv_reduce(phi, seed, mode)?.0)? == 1 {
            isolated += 1;
        }
    }
    let rate = isolated as f64 / seeds as f64;
    let bound = 1.0 / (10.0 * n as f64);
    // An unsatisfiable formula passes when nothing was isolated.
    let pass = if models == 0 { isolated == 0 } else { rate >= bound };
    Ok(IsolationRow { n, models, seeds, isolated, rate, bound, pass })
}

fn cmd_isolation_rate(
    input: Option<&Path>,
    n_min: usize,
    n_max: usize,
    seeds: u64,
    mode: EncodingMode,
    json: bool,
) -> Result<u8> {
    let rows = match input {
        Some(p) => vec![isolation_row(&read_formula(p)?, seeds, mode)?],
        None => (n_min.max(1)..=n_max)
            .map(|n| isolation_row(&half_fixed_formula(n)?, seeds, mode))
            .collect::<Result<Vec<_>>>()?,
    };
    let pass = rows.iter().all(|r| r.pass);
    if json {
        print_json(&serde_json::json!({ "rows": rows, "pass": pass }))?;
    } else {
        for r in &rows {
            println!(
                "n={} models={} isolated={}/{} rate={:.4} bound={:.4} {}",
                r.n,
                r.models,
                r.isolated,
                r.seeds,
                r.rate,
                r.bound,
                if r.pass { "ok" } else { "BELOW" }
            );
        }
    }
    Ok(if pass { 0 } else { 2 })
}

fn parse_path(s: Option<&str>, width: usize) -> Result<PmoPath> {
    Ok(match s {
        None if width <= ctcsat::pmf::FULL_CJ_CAP => PmoPath::Both,
        None => PmoPath::Simplified,
        Some("simplified") => PmoPath::Simplified,
        Some("full") => PmoPath::FullCj,
        Some("both") => PmoPath::Both,
        Some(other) => bail!("unknown path {other:?}; expected simplified, full or both"),
    })
}

fn cmd_pm_check(
    circuit: Option<&Path>,
    usat: Option<&Path>,
    m: Option<usize>,
    ancillas: usize,
    path: Option<&str>,
    tol: f64,
) -> Result<u8> {
    let (spec, default_m) = match (circuit, usat) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            (parse_circuit(&text).with_context(|| format!("in {}", p.display()))?, None)
        }
        (None, Some(p)) => {
            let phi = read_formula(p)?;
            (build_usat_rule(&phi)?, Some(phi.num_vars()))
        }
        (None, None) => bail!("one of --circuit or --usat is required"),
    };
    let m = m.or(default_m).context("--m is required with --circuit")?;
    let path = parse_path(path, spec.width())?;
    let q = PmgQuery::with_ancillas(m, spec, ancillas)?;
    let report: ProcessCheckReport = pmo(&q, path, tol)?.report;
    print_json(&report)?;
    Ok(if report.is_pure_pmg {
        0
    } else if report.is_pmg {
        3
    } else {
        4
    })
}

fn cmd_ctc_demo(input: Option<&Path>, common: &Common, policy: AdversarialPolicy) -> Result<u8> {
    let phi = match input {
        Some(p) => read_formula(p)?,
        None => default_formula(),
    };
    let n = phi.num_vars();
    let generator = UnitaryCtcGenerator { policy, seed: common.seed, tol: common.tol };
    let q = PmgQuery::new(n, build_usat_rule(&phi)?)?;
    let handle = generator.generate(&q)?;
    let out = handle.apply(&QuantumState::basis(n, 0))?;
    let probs = out.probabilities();
    let mut rng = ctcsat::rng::stream(common.seed, ctcsat::rng::labels::MEASUREMENT, 0);
    let outcome = m_usat(&phi, &generator, &mut rng, DEFAULT_MAX_N, true)?;
    let support: Vec<(String, f64)> = probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 1e-12)
        .map(|(i, p)| (ctcsat::Assignment::from_index(i as u64, n).to_string(), *p))
        .collect();
    let witness = outcome.witness.as_ref().map(ToString::to_string);
    if common.json {
        print_json(&serde_json::json!({
            "variables": n,
            "models": count_models(&phi)?,
            "policy": policy.to_string(),
            "valid_pure_pmg": handle.was_valid_pure_pmg(),
            "query_cost": handle.query_cost(),
            "output_distribution": support,
            "measured": witness,
            "verified": outcome.verified,
        }))?;
    } else {
        println!("variables {n}, models {}", count_models(&phi)?);
        println!("query cost {}", handle.query_cost());
        println!("valid pure PMG: {}", handle.was_valid_pure_pmg());
        for (bits, p) in &support {
            println!("  |{bits}⟩  {p:.6}");
        }
        println!(
            "measured {} ({})",
            witness.unwrap_or_default(),
            if outcome.verified { "verified" } else { "rejected" }
        );
    }
    Ok(0)
}

#[derive(Serialize)]
struct CrossValidation {
    cases: usize,
    max_gap: f64,
    tol: f64,
    pass: bool,
}

/// Largest Frobenius gap over `count` random unitaries between the indefinite
/// operator of the full CJ matrix and the CJ matrix of the traced isometry.
fn cross_validate(seed: u64, count: usize, perturb: f64) -> Result<f64> {
    let mut max_gap: f64 = 0.0;
    for i in 0..count {
        let mut rng = ctcsat::rng::stream(seed, "cross-validate", i as u64);
        let (n, r, k) = sample_shape(&mut rng);
        let u = haar_unitary(&mut rng, 1 << (n + r + k));
        let l = r + k;
        let w = cj(&ChannelRep::isometry(u.clone(), k)?)?;
        let mut g = indefinite_operator(&w, n, r, l)?;
        g[(0, 0)] += C64::new(perturb, 0.0);
        let traced = partial_trace_left(&u, n)?;
        let shortcut = cj(&ChannelRep::kraus_unchecked(vec![isometry_columns(&traced, k)], r, l)?)?;
        max_gap = max_gap.max(g.frobenius_distance(&shortcut));
    }
    Ok(max_gap)
}

fn sample_shape(rng: &mut impl Rng) -> (usize, usize, usize) {
    loop {
        let (n, r, k) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(0..=2));
        if n + r + k <= 6 {
            return (n, r, k);
        }
    }
}

fn cmd_cross_validate(seed: u64, count: usize, tol: f64, perturb: f64, json: bool) -> Result<u8> {
    let max_gap = cross_validate(seed, count, perturb)?;
    let pass = max_gap <= tol;
    if json {
        print_json(&CrossValidation { cases: count, max_gap, tol, pass })?;
    } else {
        println!("cases {count}, max gap {max_gap:.3e}, tol {tol:.1e}: {}", if pass { "pass" } else { "FAIL" });
    }
    Ok(if pass { 0 } else { 2 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { input, common, solver, verbose } => cmd_solve(&input, &common, &solver, verbose),
        Command::Brute { input, list, json } => cmd_brute(&input, list, json),
        Command::Vv { input, seed, mode, output } => cmd_vv(&input, seed, mode, output.as_deref()),
        Command::IsolationRate { input, n_min, n_max, seeds, mode, json } => {
            cmd_isolation_rate(input.as_deref(), n_min, n_max, seeds, mode, json)
        }
        Command::PmCheck { circuit, usat, m, ancillas, path, tol } => {
            cmd_pm_check(circuit.as_deref(), usat.as_deref(), m, ancillas, path.as_deref(), tol)
        }
        Command::CtcDemo { input, common, policy } => cmd_ctc_demo(input.as_deref(), &common, policy),
        Command::CrossValidate { seed, count, tol, perturb, json } => {
            cmd_cross_validate(seed, count, tol, perturb, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
