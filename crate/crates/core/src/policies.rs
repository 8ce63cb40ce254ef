//! Online hiring policies and the hindsight oracle.
//!
//! Every policy compares the arrival's quantile `X_t = U_t` against a
//! threshold quantile with a weak inequality, which gives atomic
//! distributions unbiased randomized tie-breaking for free.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::Rng;

use crate::distributions::{GapStructure, QuantileModel};
use crate::error::{Error, Result};

/// One horizon-`T` realization: uniforms `U_t` and abilities `F^{-1}(U_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    uniforms: Vec<f64>,
    values: Vec<f64>,
}

impl SamplePath {
    /// Builds a path from caller-supplied uniforms in `(0, 1)`.
    pub fn from_uniforms(model: &QuantileModel, uniforms: Vec<f64>) -> Result<Self> {
        if uniforms.is_empty() {
            return Err(Error::Domain("a sample path needs T >= 1 arrivals".into()));
        }
        let values = uniforms
            .iter()
            .map(|&u| model.draw_step(u).map(|(theta, _)| theta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { uniforms, values })
    }

    /// Draws `horizon` arrivals from `rng`.
    pub fn draw<R: Rng + ?Sized>(model: &QuantileModel, horizon: usize, rng: &mut R) -> Result<Self> {
        let uniforms: Vec<f64> = (0..horizon).map(|_| rng.sample(Open01)).collect();
        Self::from_uniforms(model, uniforms)
    }

    pub fn horizon(&self) -> usize {
        self.uniforms.len()
    }

    pub fn uniforms(&self) -> &[f64] {
        &self.uniforms
    }

    /// Arrival quantiles `q_t = U_t`; identical to [`uniforms`](Self::uniforms).
    pub fn quantiles(&self) -> &[f64] {
        &self.uniforms
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Policy selectors understood by the CLI and the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Ce,
    Cwg,
    Static,
    Offline,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [Self::Ce, Self::Cwg, Self::Static, Self::Offline];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ce => "ce",
            Self::Cwg => "cwg",
            Self::Static => "static",
            Self::Offline => "offline",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown policy `{s}`; valid options: ce, cwg, static, offline"
                ))
            })
    }
}

/// Which regime produced a step's threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Re-solved every step (CE, CwG phase 1).
    Adaptive,
    /// Frozen threshold (static policy, CwG phase 2, the offline oracle).
    Frozen,
}

impl Phase {
    pub fn code(self) -> u8 {
        match self {
            Phase::Adaptive => 1,
            Phase::Frozen => 2,
        }
    }
}

/// CwG snapping details for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapRecord {
    /// Indices `i` (1-based) of interior gap quantiles inside the ball.
    pub candidates: Vec<usize>,
    /// Chosen index, if any.
    pub chosen: Option<usize>,
    pub radius: f64,
}

/// Complete record of one policy run.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTrace {
    pub policy: PolicyKind,
    pub initial_budget: usize,
    /// `mu_t`
    pub decisions: Vec<bool>,
    /// `B_t`, budget after step `t`
    pub budget_after: Vec<usize>,
    /// `p_{t-1}^ce`, the CE threshold in force for arrival `t`
    pub threshold_ce: Vec<f64>,
    /// Threshold actually applied to arrival `t`.
    pub threshold_used: Vec<f64>,
    pub phase: Vec<Phase>,
    /// CwG phase-1 snapping details; `None` for other steps and policies.
    pub snaps: Vec<Option<SnapRecord>>,
    /// `A_T = sum theta_t mu_t`
    pub accumulated_value: f64,
}

impl PolicyTrace {
    pub fn horizon(&self) -> usize {
        self.decisions.len()
    }

    /// `B_{t-1}` for 1-based step `t`.
    pub fn budget_before(&self, t: usize) -> usize {
        if t <= 1 {
            self.initial_budget
        } else {
            self.budget_after[t - 2]
        }
    }

    pub fn hires(&self) -> usize {
        self.decisions.iter().filter(|&&d| d).count()
    }

    /// Writes the trace as CSV: `t,U_t,theta_t,p_ce,p_used,mu_t,B_t,phase`.
    pub fn write_csv<W: Write>(&self, path: &SamplePath, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,U_t,theta_t,p_ce,p_used,mu_t,B_t,phase")?;
        for i in 0..self.horizon() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                i + 1,
                path.uniforms()[i],
                path.values()[i],
                self.threshold_ce[i],
                self.threshold_used[i],
                u8::from(self.decisions[i]),
                self.budget_after[i],
                self.phase[i].code()
            )?;
        }
        Ok(())
    }
}

/// CwG schedule derived from the gap structure and the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CwgConfig {
    pub gaps: GapStructure,
    /// `tau_0 = floor(16 ln(1/eps0) / eps0^2)`
    pub tail_length: usize,
    /// `T~ = max(0, T - tau_0)`
    pub phase1_end: usize,
}

impl CwgConfig {
    pub fn new(gaps: GapStructure, horizon: usize) -> Self {
        let tail_length = tail_length(gaps.epsilon0());
        Self {
            phase1_end: horizon.saturating_sub(tail_length),
            gaps,
            tail_length,
        }
    }
}

/// `floor(16 ln(1/eps0) / eps0^2)`, natural log.
pub fn tail_length(epsilon0: f64) -> usize {
    let raw = 16.0 * (1.0 / epsilon0).ln() / (epsilon0 * epsilon0);
    raw.floor().max(0.0) as usize
}

/// CE threshold quantile `max(0, 1 - budget / remaining)`.
pub fn ce_threshold(budget: usize, remaining: usize) -> Result<f64> {
    if remaining == 0 {
        return Err(Error::Domain("CE threshold needs remaining >= 1".into()));
    }
    Ok(ce_threshold_unchecked(budget, remaining))
}

#[inline]
fn ce_threshold_unchecked(budget: usize, remaining: usize) -> f64 {
    (1.0 - budget as f64 / remaining as f64).max(0.0)
}

/// Snap radius `sqrt(2 ln(remaining) / remaining)`.
pub fn snap_radius(remaining: usize) -> f64 {
    let r = remaining as f64;
    (2.0 * r.ln() / r).sqrt()
}

/// Result of [`cwg_snap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Snap {
    pub threshold: f64,
    pub snapped: bool,
    /// 1-based index of the chosen interior gap quantile.
    pub j_star: Option<usize>,
    pub candidates: Vec<usize>,
    pub radius: f64,
}

/// Moves the CE threshold onto the nearest interior gap quantile inside the
/// closed ball of radius `sqrt(2 ln(remaining)/remaining)`. Equidistant
/// candidates resolve to the smaller index.
pub fn cwg_snap(p_ce: f64, gaps: &GapStructure, remaining: usize) -> Result<Snap> {
    if remaining == 0 {
        return Err(Error::Domain("CwG snap needs remaining >= 1".into()));
    }
    let radius = snap_radius(remaining);
    let candidates: Vec<usize> = gaps
        .interior()
        .iter()
        .enumerate()
        .filter(|(_, &q)| (p_ce - q).abs() <= radius)
        .map(|(i, _)| i + 1)
        .collect();
    let j_star = candidates.iter().copied().reduce(|best, i| {
        let d_best = (p_ce - gaps.quantiles()[best]).abs();
        let d_i = (p_ce - gaps.quantiles()[i]).abs();
        if d_i < d_best {
            i
        } else {
            best
        }
    });
    Ok(Snap {
        threshold: j_star.map_or(p_ce, |j| gaps.quantiles()[j]),
        snapped: j_star.is_some(),
        j_star,
        candidates,
        radius,
    })
}

fn check_budget(path: &SamplePath, budget: usize) -> Result<()> {
    if budget == 0 || budget > path.horizon() {
        return Err(Error::Domain(format!(
            "budget must lie in [1, T] = [1, {}], got {budget}",
            path.horizon()
        )));
    }
    Ok(())
}

struct StepPlan {
    p_ce: f64,
    p_used: f64,
    phase: Phase,
    snap: Option<SnapRecord>,
}

/// Shared acceptance loop: hire iff `X_t >= threshold` and budget remains.
fn simulate<F>(policy: PolicyKind, path: &SamplePath, budget: usize, mut plan: F) -> PolicyTrace
where
    F: FnMut(usize, usize) -> StepPlan,
{
    let horizon = path.horizon();
    let mut trace = PolicyTrace {
        policy,
        initial_budget: budget,
        decisions: Vec::with_capacity(horizon),
        budget_after: Vec::with_capacity(horizon),
        threshold_ce: Vec::with_capacity(horizon),
        threshold_used: Vec::with_capacity(horizon),
        phase: Vec::with_capacity(horizon),
        snaps: Vec::with_capacity(horizon),
        accumulated_value: 0.0,
    };
    let mut remaining_budget = budget;
    for (i, (&x, &theta)) in path.quantiles().iter().zip(path.values()).enumerate() {
        let step = plan(i + 1, remaining_budget);
        let hire = remaining_budget > 0 && x >= step.p_used;
        if hire {
            remaining_budget -= 1;
            trace.accumulated_value += theta;
        }
        trace.decisions.push(hire);
        trace.budget_after.push(remaining_budget);
        trace.threshold_ce.push(step.p_ce);
        trace.threshold_used.push(step.p_used);
        trace.phase.push(step.phase);
        trace.snaps.push(step.snap);
    }
    trace
}

/// Certainty-equivalent policy: re-solve `p = 1 - B_{t-1}/(T-t+1)` each step.
pub fn run_ce(path: &SamplePath, budget: usize) -> Result<PolicyTrace> {
    check_budget(path, budget)?;
    let horizon = path.horizon();
    Ok(simulate(PolicyKind::Ce, path, budget, |t, b| {
        let p = ce_threshold_unchecked(b, horizon - t + 1);
        StepPlan {
            p_ce: p,
            p_used: p,
            phase: Phase::Adaptive,
            snap: None,
        }
    }))
}

/// CwG: snap the CE threshold to nearby gap quantiles for `t <= T~`, then
/// apply the CE threshold computed at `T~` statically.
pub fn run_cwg(path: &SamplePath, budget: usize, config: &CwgConfig) -> Result<PolicyTrace> {
    check_budget(path, budget)?;
    let horizon = path.horizon();
    if config.phase1_end > horizon {
        return Err(Error::Config(format!(
            "CwG phase-1 end {} exceeds the horizon {horizon}",
            config.phase1_end
        )));
    }
    let mut frozen: Option<f64> = None;
    Ok(simulate(PolicyKind::Cwg, path, budget, |t, b| {
        let remaining = horizon - t + 1;
        let p_ce = ce_threshold_unchecked(b, remaining);
        if t <= config.phase1_end {
            // remaining >= 1 here, the snap cannot fail
            let snap = cwg_snap(p_ce, &config.gaps, remaining).expect("remaining >= 1");
            StepPlan {
                p_ce,
                p_used: snap.threshold,
                phase: Phase::Adaptive,
                snap: Some(SnapRecord {
                    candidates: snap.candidates,
                    chosen: snap.j_star,
                    radius: snap.radius,
                }),
            }
        } else {
            // first phase-2 step sees B_{T~} with T - T~ arrivals left
            let p = *frozen.get_or_insert(p_ce);
            StepPlan {
                p_ce,
                p_used: p,
                phase: Phase::Frozen,
                snap: None,
            }
        }
    }))
}

/// Static allocation: fix `p = 1 - B/T` at time zero.
pub fn run_static(path: &SamplePath, budget: usize) -> Result<PolicyTrace> {
    check_budget(path, budget)?;
    let horizon = path.horizon();
    let p = ce_threshold_unchecked(budget, horizon);
    Ok(simulate(PolicyKind::Static, path, budget, |t, b| StepPlan {
        p_ce: ce_threshold_unchecked(b, horizon - t + 1),
        p_used: p,
        phase: Phase::Frozen,
        snap: None,
    }))
}

/// The hindsight oracle as a trace: hires exactly the top-`B` quantiles.
pub fn run_offline(path: &SamplePath, budget: usize) -> Result<PolicyTrace> {
    let (_, _, q_u) = offline_value(path, budget)?;
    let horizon = path.horizon();
    Ok(simulate(PolicyKind::Offline, path, budget, |t, b| StepPlan {
        p_ce: ce_threshold_unchecked(b, horizon - t + 1),
        p_used: q_u,
        phase: Phase::Frozen,
        snap: None,
    }))
}

/// Dispatches on `kind`; CwG takes its gap quantiles from `model`.
pub fn run_policy(
    kind: PolicyKind,
    model: &QuantileModel,
    path: &SamplePath,
    budget: usize,
) -> Result<PolicyTrace> {
    match kind {
        PolicyKind::Ce => run_ce(path, budget),
        PolicyKind::Cwg => {
            let config = CwgConfig::new(model.gaps().clone(), path.horizon());
            run_cwg(path, budget, &config)
        }
        PolicyKind::Static => run_static(path, budget),
        PolicyKind::Offline => run_offline(path, budget),
    }
}

/// Offline (hindsight) value: the sum of the `B` largest abilities, plus
/// the `(B+1)`-th and `B`-th largest quantiles `(q_l, q_u)`; `q_l = 0` when
/// `B = T`. Runs in expected `O(T)` by selection.
pub fn offline_value(path: &SamplePath, budget: usize) -> Result<(f64, f64, f64)> {
    check_budget(path, budget)?;
    let mut scratch = path.quantiles().to_vec();
    let horizon = scratch.len();
    // descending order: element budget-1 is the B-th largest
    let (_, &mut q_u, rest) =
        scratch.select_nth_unstable_by(budget - 1, |a, b| b.partial_cmp(a).unwrap());
    let q_l = if budget == horizon {
        0.0
    } else {
        rest.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    let value = path
        .quantiles()
        .iter()
        .zip(path.values())
        .filter(|(&q, _)| q >= q_u)
        .map(|(_, &v)| v)
        .sum();
    Ok((value, q_l, q_u))
}
