//! Command-line driver: ingest a problem file, run checks, witnesses,
//! curves, or probes, and emit text or structured reports.
//!
//! Exit codes: 0 — conditions satisfied / nothing falsified; 1 — condition
//! falsified (verdict not KKT_SATISFIED, or a witness/counterexample
//! proves non-minimality); 2 — usage or input error; 3 — numerical failure
//! (Newton did not converge, dependent gradients, no descent found).

pub mod output;

use std::ffi::OsString;
use std::fs;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use kktcheck::expr::{eval_value, ProblemSpec};
use kktcheck::kkt::{active_set, kkt_report, ActiveSet, KktError, Tolerances, Verdict};
use kktcheck::oracle::{local_min_probe, OracleError};
use kktcheck::witness::{
    constraint_curve, descent_witness, directional_slope, sign_witness, NewtonConfig, WitnessError,
};
use output::{sig6, CheckDocument, CurveDocument, ProbeDocument, WitnessDocument};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSIFIED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Problem file (see README for the format)
    pub problem: String,
    /// Candidate point as comma-separated reals; overrides the file's
    /// `point` line
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_feas: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_active: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_rank: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_stat: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_sign: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

impl CommonArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            feas: self.tol_feas,
            active: self.tol_active,
            rank: self.tol_rank,
            stat: self.tol_stat,
            sign: self.tol_sign,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide feasibility, LICQ, multipliers, and the KKT verdict
    Check(CommonArgs),
    /// Construct a feasible descent point or a sign witness, auto-selected
    /// from the verdict
    Witness {
        #[command(flatten)]
        common: CommonArgs,
        /// Requested objective decrease for the descent construction
        #[arg(long, default_value_t = 1e-3)]
        nu: f64,
        /// Force the sign construction on this inequality (1-based)
        #[arg(long)]
        j0: Option<usize>,
    },
    /// Sample the curve that relaxes one active inequality
    Curve {
        #[command(flatten)]
        common: CommonArgs,
        /// Inequality to relax (1-based)
        #[arg(long)]
        j0: usize,
        /// Comma-separated ε samples; 0 is added if absent
        #[arg(long, allow_hyphen_values = true, default_value = "0.01,0.001,0.0001")]
        eps: String,
    },
    /// Probe the feasible neighborhood for a strictly better point
    Probe {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "kktcheck",
    about = "Certify or refute KKT conditions at a candidate point",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn usage_error(msg: &str) -> (String, i32) {
    (format!("error: {msg}"), EXIT_USAGE)
}

fn parse_point_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse `{}` as a real number", t.trim()))
        })
        .collect()
}

fn load_problem(common: &CommonArgs) -> Result<(ProblemSpec, Vec<f64>), (String, i32)> {
    let text = fs::read_to_string(&common.problem)
        .map_err(|e| usage_error(&format!("cannot read {}: {e}", common.problem)))?;
    let problem = kktcheck::parse_problem_file(&text)
        .map_err(|e| usage_error(&format!("{}: {e}", common.problem)))?;
    let point = match &common.point {
        Some(text) => parse_point_list(text).map_err(|e| usage_error(&e))?,
        None => problem
            .default_point()
            .map(<[f64]>::to_vec)
            .ok_or_else(|| {
                usage_error("no candidate point: pass --point or add a `point` line to the file")
            })?,
    };
    if point.len() != problem.dim() {
        return Err(usage_error(&format!(
            "point has {} coordinates, expected {}",
            point.len(),
            problem.dim()
        )));
    }
    Ok((problem, point))
}

fn kkt_error_exit(e: &KktError) -> i32 {
    match e {
        KktError::DimensionMismatch { .. }
        | KktError::OutsideDomain { .. }
        | KktError::ConstraintEval { .. }
        | KktError::ObjectiveEval { .. } => EXIT_USAGE,
        KktError::LicqFailure { .. } => EXIT_NUMERICAL,
    }
}

fn witness_error_exit(e: &WitnessError) -> i32 {
    match e {
        WitnessError::NoSuchInequality { .. }
        | WitnessError::ConstraintNotActive { .. }
        | WitnessError::MultiplierNotNegative { .. }
        | WitnessError::NonPositiveNu(_)
        | WitnessError::CurveNeedsZeroSample
        | WitnessError::CurveNeedsPositiveSample => EXIT_USAGE,
        WitnessError::Kkt(k) => kkt_error_exit(k),
        WitnessError::Eval(_) => EXIT_USAGE,
        WitnessError::DependentFamily { .. }
        | WitnessError::LicqFailure
        | WitnessError::NoConvergence { .. }
        | WitnessError::JacobianSingular { .. }
        | WitnessError::JacobianNotIdentity { .. }
        | WitnessError::NoDescentFound { .. }
        | WitnessError::Linalg(_) => EXIT_NUMERICAL,
    }
}

fn emit<T: serde::Serialize>(doc: &T, text: String, format: Format) -> String {
    match format {
        Format::Text => text,
        Format::Structured => {
            serde_json::to_string_pretty(doc).expect("report serialization cannot fail")
        }
    }
}

struct Outcome {
    stdout: String,
    code: i32,
}

fn run_check(common: &CommonArgs) -> Result<Outcome, (String, i32)> {
    let (problem, point) = load_problem(common)?;
    let tols = common.tolerances();
    let report = kkt_report(&problem, &point, &tols)
        .map_err(|e| (format!("error: {e}"), kkt_error_exit(&e)))?;
    let doc = CheckDocument::from_report(&report, &point);
    let code = if report.verdict == Verdict::KktSatisfied {
        EXIT_OK
    } else {
        EXIT_FALSIFIED
    };
    Ok(Outcome {
        stdout: emit(&doc, doc.render_text(), common.format),
        code,
    })
}

fn active_or_usage(
    problem: &ProblemSpec,
    point: &[f64],
    tols: &Tolerances,
) -> Result<ActiveSet, (String, i32)> {
    active_set(problem, point, tols.active).map_err(|e| (format!("error: {e}"), kkt_error_exit(&e)))
}

fn sign_witness_document(
    point: &[f64],
    verdict: Verdict,
    witness: &kktcheck::SignWitness,
) -> WitnessDocument {
    WitnessDocument {
        command: "witness".to_string(),
        point: point.to_vec(),
        verdict,
        construction: "sign".to_string(),
        x_nu: Some(witness.x.clone()),
        objective_drop: Some(witness.objective_drop),
        max_constraint_violation: Some(witness.max_constraint_violation),
        nu: None,
        epsilon: Some(witness.epsilon),
        j0: Some(witness.j0),
        mu_j0: Some(witness.mu_j0),
        newton_iters: None,
        note: None,
    }
}

fn run_witness(
    common: &CommonArgs,
    nu: f64,
    forced_j0: Option<usize>,
) -> Result<Outcome, (String, i32)> {
    let (problem, point) = load_problem(common)?;
    let tols = common.tolerances();
    let cfg = NewtonConfig::default();
    let report = kkt_report(&problem, &point, &tols)
        .map_err(|e| (format!("error: {e}"), kkt_error_exit(&e)))?;
    let verdict = report.verdict;

    let finish = |doc: WitnessDocument, code: i32| -> Outcome {
        Outcome {
            stdout: emit(&doc, doc.render_text(), common.format),
            code,
        }
    };

    if verdict == Verdict::Infeasible || verdict == Verdict::LicqFail {
        let note = match verdict {
            Verdict::Infeasible => "point is infeasible; no witness construction applies",
            _ => "active gradients are dependent; no witness construction applies",
        };
        return Ok(finish(
            WitnessDocument::none(&point, verdict, note),
            EXIT_FALSIFIED,
        ));
    }

    let active = active_or_usage(&problem, &point, &tols)?;

    // explicit --j0 forces the sign construction
    if let Some(j0) = forced_j0 {
        let witness = sign_witness(&problem, &point, &active, j0, &tols, &cfg)
            .map_err(|e| (format!("error: {e}"), witness_error_exit(&e)))?;
        return Ok(finish(
            sign_witness_document(&point, verdict, &witness),
            EXIT_FALSIFIED,
        ));
    }

    let mut notes: Vec<String> = Vec::new();

    if verdict == Verdict::StationarityFail {
        match descent_witness(&problem, &point, &active, nu, &tols, &cfg) {
            Ok(witness) => {
                let doc = WitnessDocument {
                    command: "witness".to_string(),
                    point: point.clone(),
                    verdict,
                    construction: "descent".to_string(),
                    x_nu: Some(witness.x_nu.clone()),
                    objective_drop: Some(witness.objective_drop),
                    max_constraint_violation: Some(witness.max_constraint_violation),
                    nu: Some(witness.nu),
                    epsilon: None,
                    j0: None,
                    mu_j0: None,
                    newton_iters: Some(witness.newton_iters),
                    note: None,
                };
                return Ok(finish(doc, EXIT_FALSIFIED));
            }
            Err(WitnessError::DependentFamily { .. }) => {
                notes.push("extended gradient family is dependent".to_string());
            }
            Err(e) => return Err((format!("error: {e}"), witness_error_exit(&e))),
        }
    }

    if let Some(&(j0, _)) = report
        .sign_violations
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite multipliers"))
    {
        let witness = sign_witness(&problem, &point, &active, j0, &tols, &cfg)
            .map_err(|e| (format!("error: {e}"), witness_error_exit(&e)))?;
        return Ok(finish(
            sign_witness_document(&point, verdict, &witness),
            EXIT_FALSIFIED,
        ));
    }

    let mut note = "no witness construction applies".to_string();
    if !notes.is_empty() {
        note = format!("{note} ({})", notes.join("; "));
    }
    let code = if verdict == Verdict::KktSatisfied {
        EXIT_OK
    } else {
        EXIT_FALSIFIED
    };
    Ok(finish(WitnessDocument::none(&point, verdict, &note), code))
}

fn run_curve(common: &CommonArgs, j0: usize, eps_text: &str) -> Result<Outcome, (String, i32)> {
    let (problem, point) = load_problem(common)?;
    let tols = common.tolerances();
    let cfg = NewtonConfig::default();
    let mut epsilons = parse_point_list(eps_text).map_err(|e| usage_error(&e))?;
    if !epsilons.contains(&0.0) {
        epsilons.insert(0, 0.0);
    }
    let active = active_or_usage(&problem, &point, &tols)?;
    let curve = constraint_curve(&problem, &point, &active, j0, &epsilons, &cfg)
        .map_err(|e| (format!("error: {e}"), witness_error_exit(&e)))?;
    let slope = directional_slope(&problem, &curve).ok();

    let index = problem.n_equalities() + j0;
    let mut constraint_values = Vec::with_capacity(curve.points.len());
    for pt in &curve.points {
        let v = eval_value(problem.constraint(index), pt)
            .map_err(|e| (format!("error: {e}"), EXIT_NUMERICAL))?;
        constraint_values.push(v);
    }

    let doc = CurveDocument {
        command: "curve".to_string(),
        point: point.clone(),
        j0,
        epsilons: curve.epsilons.clone(),
        points: curve.points.clone(),
        constraint_values,
        w_j0: curve.w_j0.clone(),
        slope_finite_difference: slope.map(|s| s.finite_difference),
        slope_analytic: slope.map(|s| s.analytic),
    };
    Ok(Outcome {
        stdout: emit(&doc, doc.render_text(), common.format),
        code: EXIT_OK,
    })
}

fn run_probe(
    common: &CommonArgs,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<Outcome, (String, i32)> {
    let (problem, point) = load_problem(common)?;
    let tols = common.tolerances();
    let cfg = NewtonConfig::default();
    let feasibility = kktcheck::kkt::feasibility_check(&problem, &point, tols.feas)
        .map_err(|e| (format!("error: {e}"), kkt_error_exit(&e)))?;
    if !feasibility.feasible {
        return Err(usage_error(&format!(
            "probe requires a feasible candidate (max violation {})",
            sig6(feasibility.max_violation)
        )));
    }
    let active = active_or_usage(&problem, &point, &tols)?;
    let result = local_min_probe(&problem, &point, &active, radius, samples, seed, &tols, &cfg)
        .map_err(|e| {
            let code = match e {
                OracleError::NoConvergence { .. } => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            };
            (format!("error: {e}"), code)
        })?;
    let code = if result.counterexample.is_some() {
        EXIT_FALSIFIED
    } else {
        EXIT_OK
    };
    let doc = ProbeDocument {
        command: "probe".to_string(),
        point: point.clone(),
        samples_tested: result.samples_tested,
        counterexample: result.counterexample.clone(),
        best_feasible_value: result.best_feasible_value,
        radius: result.radius,
        seed: result.seed,
        rng: result.rng.clone(),
    };
    Ok(Outcome {
        stdout: emit(&doc, doc.render_text(), common.format),
        code,
    })
}

/// Parse `argv` and run; returns the process exit code. All diagnostics go
/// to standard error, reports to standard output.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Check(common) => run_check(common),
        Command::Witness { common, nu, j0 } => run_witness(common, *nu, *j0),
        Command::Curve { common, j0, eps } => run_curve(common, *j0, eps),
        Command::Probe {
            common,
            radius,
            samples,
            seed,
        } => run_probe(common, *radius, *samples, *seed),
    };
    match outcome {
        Ok(outcome) => {
            println!("{}", outcome.stdout.trim_end());
            outcome.code
        }
        Err((msg, code)) => {
            eprintln!("{msg}");
            code
        }
    }
}
