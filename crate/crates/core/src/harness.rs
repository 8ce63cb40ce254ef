//! Monte-Carlo regret experiments with common random numbers.
//!
//! Every replication `r` at horizon `T` owns the ChaCha8 stream
//! `(seed, (T << 32) | r)`. One path is drawn per replication and the
//! offline value and all configured policies are evaluated on it.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha1::{Digest, Sha1};

use crate::distributions::QuantileModel;
use crate::error::{Error, Result};
use crate::policies::{offline_value, run_policy, PolicyKind, SamplePath};
use crate::stats::MeanEstimate;

pub const DEFAULT_REPS: usize = 400;
pub const DEFAULT_HORIZONS: &str = "geom:100:100000:12";

/// Deterministic RNG for replication `rep` at horizon `horizon`.
pub fn replication_rng(seed: u64, horizon: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((horizon as u64) << 32) | rep as u64);
    rng
}

/// How the budget scales with the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetRule {
    Fixed(usize),
    /// `B = floor(ratio * T)`
    Ratio(f64),
}

impl BudgetRule {
    pub fn budget(&self, horizon: usize) -> Result<usize> {
        let b = match *self {
            Self::Fixed(b) => b,
            Self::Ratio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::Config(format!("budget ratio {r} is outside (0, 1]")));
                }
                (r * horizon as f64).floor() as usize
            }
        };
        if b == 0 || b > horizon {
            return Err(Error::Config(format!(
                "budget {b} at horizon {horizon} is outside [1, T]"
            )));
        }
        Ok(b)
    }
}

impl fmt::Display for BudgetRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(b) => write!(f, "fixed:{b}"),
            Self::Ratio(r) => write!(f, "floor({r}*T)"),
        }
    }
}

/// Parses `geom:lo:hi:k` (k rounded geometric points) or `list:a,b,c`.
pub fn parse_horizons(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("bad horizon grid `{spec}`; use geom:lo:hi:k or list:a,b,c"));
    let (kind, rest) = spec.trim().split_once(':').ok_or_else(bad)?;
    let horizons: Vec<usize> = match kind {
        "geom" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
            let k: usize = parts[2].trim().parse().map_err(|_| bad())?;
            if !(lo >= 1.0 && hi >= lo) || k == 0 || (k == 1 && hi != lo) {
                return Err(bad());
            }
            let mut grid: Vec<usize> = (0..k)
                .map(|i| {
                    let frac = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
                    (lo * (hi / lo).powf(frac)).round() as usize
                })
                .collect();
            grid.dedup();
            grid
        }
        "list" => rest
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?,
        _ => return Err(bad()),
    };
    check_horizons(&horizons)?;
    Ok(horizons)
}

fn check_horizons(horizons: &[usize]) -> Result<()> {
    if horizons.is_empty() || horizons[0] == 0 {
        return Err(Error::Config("horizons must be positive and nonempty".into()));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("horizons must be strictly increasing".into()));
    }
    if horizons.iter().any(|&t| t as u64 >= 1 << 32) {
        return Err(Error::Config("horizons must be below 2^32".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: QuantileModel,
    pub policies: Vec<PolicyKind>,
    pub budget: BudgetRule,
    pub horizons: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::Config(
                "no policy selected; valid options: ce, cwg, static, offline".into(),
            ));
        }
        if self.reps < 2 {
            return Err(Error::Config(format!("need at least 2 replications, got {}", self.reps)));
        }
        check_horizons(&self.horizons)?;
        for &t in &self.horizons {
            self.budget.budget(t)?;
        }
        Ok(())
    }
}

/// Pathwise regret samples, one vector per policy, in replication order.
pub fn regret_samples(
    model: &QuantileModel,
    policies: &[PolicyKind],
    budget: usize,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = replication_rng(seed, horizon, r);
            let path = SamplePath::draw(model, horizon, &mut rng)?;
            let (offline, _, _) = offline_value(&path, budget)?;
            policies
                .iter()
                .map(|&p| Ok(offline - run_policy(p, model, &path, budget)?.accumulated_value))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..policies.len())
        .map(|k| rows.iter().map(|row| row[k]).collect())
        .collect())
}

/// Results at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonEstimate {
    pub horizon: usize,
    pub budget: usize,
    /// Regret estimate per configured policy, in configuration order.
    pub regret: Vec<MeanEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretEstimate {
    pub policies: Vec<PolicyKind>,
    pub rows: Vec<HorizonEstimate>,
}

impl RegretEstimate {
    /// `(T, mean, stderr)` for one policy.
    pub fn series(&self, policy: PolicyKind) -> Option<Vec<(f64, f64, f64)>> {
        let k = self.policies.iter().position(|&p| p == policy)?;
        Some(
            self.rows
                .iter()
                .map(|r| (r.horizon as f64, r.regret[k].mean, r.regret[k].stderr))
                .collect(),
        )
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretEstimate> {
    config.validate()?;
    let rows = config
        .horizons
        .iter()
        .map(|&horizon| {
            let budget = config.budget.budget(horizon)?;
            let samples = regret_samples(
                &config.model,
                &config.policies,
                budget,
                horizon,
                config.reps,
                config.seed,
            )?;
            Ok(HorizonEstimate {
                horizon,
                budget,
                regret: samples.iter().map(|s| MeanEstimate::from_samples(s)).collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(RegretEstimate {
        policies: config.policies.clone(),
        rows,
    })
}

/// Log-log least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Regresses `ln(mean)` on `ln(T)` over `(T, mean)` points.
pub fn fit_exponent(series: &[(f64, f64)]) -> Result<ExponentFit> {
    if series.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", series.len())));
    }
    if let Some(&(t, m)) = series.iter().find(|&&(t, m)| !(m > 0.0) || !(t > 0.0)) {
        return Err(Error::Fit(format!(
            "nonpositive value at T={t} (mean {m}); regret looks bounded, inspect flatness instead"
        )));
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = series.iter().map(|&(_, m)| m.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all horizons are equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ExponentFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// `T regret` plot data for one policy.
pub fn render_dat(series: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("T regret\n");
    for &(t, mean, _) in series {
        out.push_str(&format!("{t} {mean}\n"));
    }
    out
}

/// `T,regret,stderr` for one policy.
pub fn render_csv(series: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("T,regret,stderr\n");
    for &(t, mean, se) in series {
        out.push_str(&format!("{t},{mean},{se}\n"));
    }
    out
}

/// Long format `policy,T,regret,stderr` covering every policy.
pub fn render_combined_csv(estimate: &RegretEstimate) -> String {
    let mut out = String::from("policy,T,regret,stderr\n");
    for (k, policy) in estimate.policies.iter().enumerate() {
        for row in &estimate.rows {
            let e = &row.regret[k];
            out.push_str(&format!("{policy},{},{},{}\n", row.horizon, e.mean, e.stderr));
        }
    }
    out
}

pub fn emit_dat(series: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    write_file(path, &render_dat(series))
}

pub fn emit_csv(series: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    write_file(path, &render_csv(series))
}

/// Git blob id of `content`: SHA-1 over `blob <len>\0<content>`.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<prefix>_<policy>.dat`, `<prefix>_<policy>.csv`, `<prefix>.csv`
/// and `<prefix>.meta.txt`. Returns the written paths, sidecar last.
pub fn emit_all(config: &ExperimentConfig, estimate: &RegretEstimate, prefix: &Path) -> Result<Vec<PathBuf>> {
    let sibling = |suffix: &str| {
        let mut name = prefix.file_name().unwrap_or_default().to_os_string();
        name.push(suffix);
        prefix.with_file_name(name)
    };
    let mut outputs: Vec<(PathBuf, String)> = Vec::new();
    for &policy in &estimate.policies {
        let series = estimate.series(policy).expect("policy is configured");
        outputs.push((sibling(&format!("_{policy}.dat")), render_dat(&series)));
        outputs.push((sibling(&format!("_{policy}.csv")), render_csv(&series)));
    }
    outputs.push((sibling(".csv"), render_combined_csv(estimate)));

    let policies: Vec<&str> = config.policies.iter().map(|p| p.name()).collect();
    let horizons: Vec<String> = config.horizons.iter().map(|t| t.to_string()).collect();
    let budgets: Vec<String> = estimate.rows.iter().map(|r| r.budget.to_string()).collect();
    let mut meta = format!(
        "dist {}\ngaps {:?}\nbeta {}\nepsilon0 {}\ndelta {}\npolicies {}\nbudget_rule {}\nbudgets {}\nhorizons {}\nreps {}\nseed {}\nrng chacha8 stream=(T<<32)|rep\n",
        config.model,
        config.model.gaps().quantiles(),
        config.model.gaps().beta(),
        config.model.gaps().epsilon0(),
        config.model.gaps().delta(),
        policies.join(","),
        config.budget,
        budgets.join(","),
        horizons.join(","),
        config.reps,
        config.seed,
    );
    let mut written = Vec::new();
    for (path, content) in &outputs {
        write_file(path, content)?;
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        meta.push_str(&format!("blob {} {name}\n", git_blob_hash(content.as_bytes())));
        written.push(path.clone());
    }
    let meta_path = sibling(".meta.txt");
    write_file(&meta_path, &meta)?;
    written.push(meta_path);
    Ok(written)
}

/// A labelled `(T, mean, stderr)` series read from disk.
pub type NamedSeries = (String, Vec<(f64, f64, f64)>);

/// Reads every series in a per-policy `T,regret,stderr` file (labelled by
/// the file stem) or a combined `policy,T,regret,stderr` file (one series
/// per policy, in order of first appearance). A missing stderr column
/// reads as NaN.
pub fn read_all_series(path: &Path) -> Result<Vec<NamedSeries>> {
    let parse_err = |e: &dyn fmt::Display| Error::Parse(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(&e))?;
    let headers = reader.headers().map_err(|e| parse_err(&e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(t_col), Some(r_col)) = (col("T"), col("regret")) else {
        return Err(parse_err(&"expected columns T and regret"));
    };
    let se_col = col("stderr");
    let policy_col = col("policy");
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let num = |s: Option<&str>| -> Result<f64> {
        let s = s.unwrap_or("");
        s.parse().map_err(|_| parse_err(&format!("`{s}` is not a number")))
    };
    let mut out: Vec<NamedSeries> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(&e))?;
        let label = match policy_col {
            Some(c) => record.get(c).unwrap_or("").to_string(),
            None => stem.clone(),
        };
        let point = (
            num(record.get(t_col))?,
            num(record.get(r_col))?,
            match se_col {
                Some(c) => num(record.get(c))?,
                None => f64::NAN,
            },
        );
        match out.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push(point),
            None => out.push((label, vec![point])),
        }
    }
    Ok(out)
}

/// Reads one series; `policy` selects from a combined file and is required
/// when the file holds several policies.
pub fn read_series(path: &Path, policy: Option<&str>) -> Result<Vec<(f64, f64, f64)>> {
    let mut all = read_all_series(path)?;
    let combined = all.len() > 1 || all.first().is_some_and(|(l, _)| PolicyKind::from_str(l).is_ok());
    match (policy, combined) {
        (Some(p), true) => all
            .into_iter()
            .find(|(l, _)| l == p)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Parse(format!("{}: no rows for policy `{p}`", path.display()))),
        (None, true) if all.len() > 1 => Err(Error::Parse(format!(
            "{}: combined file lists several policies; select one",
            path.display()
        ))),
        _ => Ok(all.pop().map(|(_, s)| s).unwrap_or_default()),
    }
}

impl FromStr for BudgetRule {
    type Err = Error;

    /// `0.5` reads as a ratio, `fixed:10` as a fixed budget.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().strip_prefix("fixed:") {
            Some(b) => b
                .parse()
                .map(Self::Fixed)
                .map_err(|_| Error::Config(format!("bad fixed budget `{s}`"))),
            None => s
                .trim()
                .parse()
                .map(Self::Ratio)
                .map_err(|_| Error::Config(format!("bad budget ratio `{s}`"))),
        }
    }
}
