//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input or any other error, 2 when
//! a verification check fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::coupling::{event_frequencies, martingale_diagnostic, verify_decomposition};
use crate::distributions::{parse_list, GapStructure, QuantileModel};
use crate::dp_oracle::regret_oracle;
use crate::error::{Error, Result};
use crate::harness::{
    emit_all, fit_exponent, parse_horizons, read_all_series, read_series, replication_rng,
    run_experiment, BudgetRule, ExperimentConfig, DEFAULT_HORIZONS, DEFAULT_REPS,
};
use crate::plot::{render_svg, Series};
use crate::policies::{PolicyKind, SamplePath};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "multisecretary", version, about = "Multisecretary hiring simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate regret curves over a horizon grid and write .dat/.csv files.
    Run(RunArgs),
    /// Check the compensated-coupling decomposition on random paths.
    Verify(VerifyArgs),
    /// Compare exact optimal regret on discrete instances with simulation.
    Oracle(OracleArgs),
    /// Tabulate how often the coupling events fail, against their bounds.
    Events(EventsArgs),
    /// Check that CE threshold increments behave like a martingale.
    Martingale(MartingaleArgs),
    /// Fit the log-log regret exponent of a .csv series.
    Fit(FitArgs),
    /// Plot one or more .csv series as SVG.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Distribution: uniform, fbeta:beta=B, discrete:support=..;mass=..,
    /// pwuniform:intervals=(l,r),..;weights=..
    #[arg(long, default_value = "uniform")]
    dist: String,
    /// Override the interior gap quantiles (comma list).
    #[arg(long)]
    gaps: Option<String>,
    /// Override the minimum cell width.
    #[arg(long)]
    epsilon0: Option<f64>,
    /// Override the declared density exponent.
    #[arg(long)]
    beta: Option<f64>,
    /// Override the declared atom spacing.
    #[arg(long)]
    delta: Option<f64>,
}

impl ModelArgs {
    fn build(&self) -> Result<QuantileModel> {
        let model: QuantileModel = self.dist.parse()?;
        let g = model.gaps();
        let beta = self.beta.unwrap_or(g.beta());
        let delta = self.delta.unwrap_or(g.delta());
        let gaps = match &self.gaps {
            Some(list) => {
                let interior = if list.trim().is_empty() { Vec::new() } else { parse_list(list)? };
                GapStructure::from_interior(&interior, beta, self.epsilon0, delta)?
            }
            None if self.beta.is_some() || self.delta.is_some() || self.epsilon0.is_some() => {
                g.with_params(beta, self.epsilon0.unwrap_or(g.epsilon0()), delta)?
            }
            None => return Ok(model),
        };
        Ok(model.with_gaps(gaps))
    }
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Budget as a fraction of the horizon, B = floor(ratio * T).
    #[arg(long, conflicts_with = "budget")]
    budget_ratio: Option<f64>,
    /// Fixed budget for every horizon.
    #[arg(long)]
    budget: Option<usize>,
}

impl BudgetArgs {
    fn rule(&self) -> BudgetRule {
        match (self.budget, self.budget_ratio) {
            (Some(b), _) => BudgetRule::Fixed(b),
            (None, Some(r)) => BudgetRule::Ratio(r),
            (None, None) => BudgetRule::Ratio(0.5),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Policies to simulate (comma list of ce, cwg, static, offline).
    #[arg(long, default_value = "ce,cwg")]
    policy: String,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Horizon grid: geom:lo:hi:k or list:a,b,c
    #[arg(long, default_value = DEFAULT_HORIZONS)]
    horizons: String,
    /// Replications per horizon.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Output prefix; writes <out>_<policy>.dat/.csv, <out>.csv, <out>.meta.txt
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Policies to check (comma list).
    #[arg(long, default_value = "ce,cwg,static")]
    policy: String,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Horizon of every path.
    #[arg(long = "T", default_value_t = 200)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Largest acceptable |offline - (online + compensations)|.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value = "list:10,50,200")]
    horizons: String,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EventsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long = "T", default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 5000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Smallest steps-to-go checked against the bounds.
    #[arg(long, default_value_t = 50)]
    tau_min: usize,
    /// Largest steps-to-go checked against the bounds.
    #[arg(long, default_value_t = 1000)]
    tau_max: usize,
    /// Allowed excess over each bound, in standard errors.
    #[arg(long, default_value_t = 3.0)]
    sigmas: f64,
}

#[derive(Debug, Args)]
struct MartingaleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long = "T", default_value_t = 1000)]
    horizon: usize,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Allowed |mean increment| in standard errors for t <= 2T/3.
    #[arg(long, default_value_t = 4.0)]
    sigmas: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// A T,regret,stderr file or a combined policy,T,regret,stderr file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Policy to select from a combined file.
    #[arg(long)]
    policy: Option<String>,
    /// Ignore horizons below this value.
    #[arg(long)]
    min_t: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Input .csv files (repeatable).
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Output .svg file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "regret")]
    title: String,
}

fn parse_policies(list: &str) -> Result<Vec<PolicyKind>> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

enum Outcome {
    Ok,
    CheckFailed(String),
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> Result<Outcome> {
    let config = ExperimentConfig {
        model: a.model.build()?,
        policies: parse_policies(&a.policy)?,
        budget: a.budget.rule(),
        horizons: parse_horizons(&a.horizons)?,
        reps: a.reps,
        seed: a.seed,
    };
    config.validate()?;
    let estimate = with_threads(a.threads, || run_experiment(&config))??;
    for path in emit_all(&config, &estimate, &a.out)? {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(Outcome::Ok)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<Outcome> {
    let model = a.model.build()?;
    let policies = parse_policies(&a.policy)?;
    let budget = a.budget.rule().budget(a.horizon)?;
    let _ = writeln!(out, "policy,paths,max_abs_residual,fired_steps,bound_violations");
    let mut worst = 0.0f64;
    let mut violations = 0;
    for policy in policies {
        let checks = with_threads(a.threads, || {
            (0..a.reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replication_rng(a.seed, a.horizon, r);
                    let path = SamplePath::draw(&model, a.horizon, &mut rng)?;
                    verify_decomposition(&model, &path, budget, policy)
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let max_res = checks.iter().map(|c| c.residual.abs()).fold(0.0, f64::max);
        let fired: usize = checks.iter().map(|c| c.fired_steps).sum();
        let bad: usize = checks.iter().map(|c| c.bound_violations).sum();
        let _ = writeln!(out, "{policy},{},{max_res:e},{fired},{bad}", a.reps);
        worst = worst.max(max_res);
        violations += bad;
    }
    let _ = writeln!(out, "max |residual| = {worst:e}");
    if worst > a.tolerance || violations > 0 {
        return Ok(Outcome::CheckFailed(format!(
            "max |residual| {worst:e} (tolerance {:e}), {violations} bound violations",
            a.tolerance
        )));
    }
    Ok(Outcome::Ok)
}

fn cmd_oracle(a: &OracleArgs, out: &mut dyn Write) -> Result<Outcome> {
    let model = a.model.build()?;
    let horizons = parse_horizons(&a.horizons)?;
    let rule = a.budget.rule();
    let _ = writeln!(
        out,
        "T,B,online_opt,offline,regret_opt,cwg_regret,cwg_stderr,static_regret,static_stderr,sandwich"
    );
    let mut failed = Vec::new();
    for horizon in horizons {
        let budget = rule.budget(horizon)?;
        let r = with_threads(a.threads, || regret_oracle(&model, budget, horizon, a.reps, a.seed))??;
        let ok = r.sandwich_holds();
        let _ = writeln!(
            out,
            "{horizon},{budget},{},{},{},{},{},{},{},{ok}",
            r.online_optimum,
            r.offline_expectation,
            r.regret_opt,
            r.cwg.mean,
            r.cwg.stderr,
            r.static_policy.mean,
            r.static_policy.stderr
        );
        if !ok {
            failed.push(horizon);
        }
    }
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::CheckFailed(format!("sandwich fails at T in {failed:?}")))
    }
}

fn cmd_events(a: &EventsArgs, out: &mut dyn Write) -> Result<Outcome> {
    let model = a.model.build()?;
    let budget = a.budget.rule().budget(a.horizon)?;
    let rows = with_threads(a.threads, || {
        event_frequencies(&model, budget, a.horizon, a.reps, a.seed)
    })??;
    let _ = writeln!(
        out,
        "tau,a1_fail,a1_stderr,a1_bound,a2_fail,a2_stderr,a2_bound,a3_fail,a3_stderr,a3_bound,within"
    );
    let mut bad = Vec::new();
    for r in &rows {
        let ok = r.within(a.sigmas);
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{},{:e},{},{},{:e},{ok}",
            r.tau,
            r.a1_complement.mean,
            r.a1_complement.stderr,
            r.a1_bound,
            r.a2_complement.mean,
            r.a2_complement.stderr,
            r.a2_bound,
            r.a3_complement.mean,
            r.a3_complement.stderr,
            r.a3_bound
        );
        if !ok && (a.tau_min..=a.tau_max).contains(&r.tau) {
            bad.push(r.tau);
        }
    }
    if rows.is_empty() {
        let _ = writeln!(out, "# no adaptive steps at this horizon");
    }
    if bad.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::CheckFailed(format!("event bounds exceeded at tau in {bad:?}")))
    }
}

fn cmd_martingale(a: &MartingaleArgs, out: &mut dyn Write) -> Result<Outcome> {
    let model = a.model.build()?;
    let budget = a.budget.rule().budget(a.horizon)?;
    let report = with_threads(a.threads, || {
        martingale_diagnostic(&model, budget, a.horizon, a.reps, a.seed)
    })??;
    let _ = writeln!(out, "t,mean_increment,stderr,max_abs,bound");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e}",
            r.t, r.increment.mean, r.increment.stderr, r.max_abs, r.bound
        );
    }
    let t_max = 2 * a.horizon / 3;
    let z = report.max_z(t_max);
    let violations = report.bound_violations();
    let _ = writeln!(out, "# max |mean|/stderr for t <= {t_max}: {z:.3}; bound violations: {violations}");
    if z > a.sigmas || violations > 0 {
        return Ok(Outcome::CheckFailed(format!(
            "max z {z:.3} (limit {}), {violations} steps exceed 1/(T-t)",
            a.sigmas
        )));
    }
    Ok(Outcome::Ok)
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<Outcome> {
    let series = read_series(&a.input, a.policy.as_deref())?;
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| a.min_t.is_none_or(|lo| p.0 >= lo))
        .map(|p| (p.0, p.1))
        .collect();
    let fit = fit_exponent(&points)?;
    let _ = writeln!(out, "slope,intercept,r_squared,points");
    let _ = writeln!(out, "{},{},{},{}", fit.slope, fit.intercept, fit.r_squared, points.len());
    Ok(Outcome::Ok)
}

fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<Outcome> {
    let mut series = Vec::new();
    for input in &a.inputs {
        for (label, points) in read_all_series(input)? {
            series.push(Series { label, points });
        }
    }
    let svg = render_svg(&a.title, &series);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&a.out, svg).map_err(|e| Error::io(&a.out, e))?;
    let _ = writeln!(out, "wrote {}", a.out.display());
    Ok(Outcome::Ok)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = e.print();
                    EXIT_INVALID
                }
            }
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Events(a) => cmd_events(a, out),
        Command::Martingale(a) => cmd_martingale(a, out),
        Command::Fit(a) => cmd_fit(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
