//! Compensated coupling of an online trace with the offline-to-go (OTG)
//! policy.
//!
//! At step `t` the OTG policy has the online budget `B_{t-1}` and sees the
//! whole suffix `omega_t, ..., omega_T`. It hires the arrival iff the
//! arrival is among the `B_{t-1}` largest remaining quantiles, so its
//! acceptance interval is `[q_l, q_u]`: the `(B_{t-1}+1)`-th and
//! `B_{t-1}`-th largest suffix quantiles. Whenever the online action is not
//! offline-optimal the OTG policy is paid exactly what following it costs;
//! those payments telescope to the pathwise regret.

use rayon::prelude::*;

use crate::distributions::QuantileModel;
use crate::error::{Error, Result};
use crate::harness::replication_rng;
use crate::policies::{
    ce_threshold, offline_value, run_ce, run_cwg, run_policy, CwgConfig, PolicyKind, PolicyTrace,
    SamplePath,
};
use crate::stats::MeanEstimate;

/// Replications per deterministic accumulation block.
const BLOCK: usize = 64;

/// `(q_l, q_u)` for `budget` hires among `future` by sorting.
///
/// `q_u` is the `budget`-th largest element (1 when `budget = 0`) and `q_l`
/// the `(budget+1)`-th largest. A budget covering the whole suffix hires
/// everything: `q_u` is the smallest element and `q_l = 0`.
pub fn otg_interval(future: &[f64], budget: usize) -> Result<(f64, f64)> {
    if future.is_empty() {
        return Err(Error::Domain("OTG interval needs a nonempty suffix".into()));
    }
    let mut sorted = future.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let q_u = if budget == 0 { 1.0 } else { sorted[budget.min(sorted.len()) - 1] };
    let q_l = sorted.get(budget).copied().unwrap_or(0.0);
    Ok((q_l, q_u))
}

/// OTG threshold: the endpoint of `[q_l, q_u]` farther from `p_used`
/// (ties to `q_u`), or 1 when no budget remains.
pub fn otg_threshold(p_used: f64, q_l: f64, q_u: f64, budget: usize) -> f64 {
    if budget == 0 {
        return 1.0;
    }
    if (p_used - q_l).abs() > (p_used - q_u).abs() {
        q_l
    } else {
        q_u
    }
}

/// Upper bound on one step's compensation in value space:
/// `max{F^{-1}(p) - F^{-1}(p_otg), F^{-1}(p_otg) - F^{-1}(p^+)}`.
pub fn compensation_bound(model: &QuantileModel, p_used: f64, p_otg: f64) -> f64 {
    let at = model.quantile_unchecked(p_used.clamp(0.0, 1.0));
    let right = model.quantile_right(p_used.clamp(0.0, 1.0)).unwrap_or(at);
    let otg = model.quantile_unchecked(p_otg.clamp(0.0, 1.0));
    (at - otg).max(otg - right)
}

/// Per-step indicators `A_1`, `A_2`, `A_3` with `tau` arrivals to go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventFlags {
    /// `|p_ce - p_otg| <= sqrt(2 ln tau / tau)`
    pub a1: bool,
    /// `|p_used - p_otg| <= 3 sqrt(ln tau / tau)`
    pub a2: bool,
    /// `p_used` and `p_otg` share a closed quantile cell
    pub a3: bool,
}

impl EventFlags {
    pub fn evaluate(model: &QuantileModel, tau: usize, p_ce: f64, p_used: f64, p_otg: f64) -> Self {
        let tau_f = tau as f64;
        let log_ratio = tau_f.ln() / tau_f;
        Self {
            a1: (p_ce - p_otg).abs() <= (2.0 * log_ratio).sqrt(),
            a2: (p_used - p_otg).abs() <= 3.0 * log_ratio.sqrt(),
            a3: model.gaps().share_closed_cell(p_used, p_otg),
        }
    }
}

/// Coupling data for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRecord {
    pub q_l: f64,
    pub q_u: f64,
    pub p_otg: f64,
    /// The online action is not offline-optimal.
    pub fired: bool,
    /// Exact compensation paid; zero unless `fired`.
    pub amount: f64,
    /// Value-gap bound on the compensation.
    pub bound: f64,
    pub events: EventFlags,
}

/// Sum of abilities of the `k` largest quantiles, summed in slice order.
fn top_k_value(quantiles: &[f64], values: &[f64], k: usize, scratch: &mut Vec<f64>) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k >= quantiles.len() {
        return values.iter().sum();
    }
    scratch.clear();
    scratch.extend_from_slice(quantiles);
    let (_, &mut cut, _) = scratch.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).unwrap());
    quantiles
        .iter()
        .zip(values)
        .filter(|(&q, _)| q >= cut)
        .map(|(_, &v)| v)
        .sum()
}

/// Exact compensation for one step by re-solving the offline problem.
///
/// `quantiles` / `values` are the suffix starting at the current arrival,
/// `budget` is `B_{t-1}` and `hired` the online action. The offline value
/// of the suffix is compared against the value of first taking the online
/// action and then acting optimally.
pub fn step_compensation(
    model: &QuantileModel,
    quantiles: &[f64],
    values: &[f64],
    budget: usize,
    hired: bool,
    p_used: f64,
) -> Result<CouplingRecord> {
    if quantiles.len() != values.len() {
        return Err(Error::Domain("suffix quantiles and values differ in length".into()));
    }
    if hired && budget == 0 {
        return Err(Error::Domain("cannot hire with zero budget".into()));
    }
    let (q_l, q_u) = otg_interval(quantiles, budget)?;
    let p_otg = otg_threshold(p_used, q_l, q_u, budget);
    let theta = values[0];
    let value_at = |q: f64| model.quantile_unchecked(q);
    let fired = if budget == 0 {
        false
    } else if hired {
        theta < value_at(q_u)
    } else {
        theta > value_at(q_l)
    };
    let amount = if fired {
        let mut scratch = Vec::with_capacity(quantiles.len());
        let best = top_k_value(quantiles, values, budget, &mut scratch);
        let (rest_q, rest_v) = (&quantiles[1..], &values[1..]);
        let forced = if hired {
            theta + top_k_value(rest_q, rest_v, budget - 1, &mut scratch)
        } else {
            top_k_value(rest_q, rest_v, budget, &mut scratch)
        };
        best - forced
    } else {
        0.0
    };
    let tau = quantiles.len();
    let p_ce = ce_threshold(budget, tau)?;
    Ok(CouplingRecord {
        q_l,
        q_u,
        p_otg,
        fired,
        amount,
        bound: compensation_bound(model, p_used, p_otg),
        events: EventFlags::evaluate(model, tau, p_ce, p_used, p_otg),
    })
}

/// Coupling of a whole trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub steps: Vec<CouplingRecord>,
    pub offline_value: f64,
    pub online_value: f64,
    pub total_compensation: f64,
    /// `offline - (online + total_compensation)`
    pub residual: f64,
}

impl CouplingReport {
    fn assemble(steps: Vec<CouplingRecord>, offline_value: f64, online_value: f64) -> Self {
        let total_compensation: f64 = steps.iter().map(|s| s.amount).sum();
        Self {
            residual: offline_value - (online_value + total_compensation),
            steps,
            offline_value,
            online_value,
            total_compensation,
        }
    }

    pub fn fired_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.fired).count()
    }

    /// Fired steps whose exact compensation exceeds the value-gap bound.
    pub fn bound_violations(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.fired && s.amount > s.bound + 1e-12)
            .count()
    }
}

fn check_trace(path: &SamplePath, trace: &PolicyTrace) -> Result<()> {
    if trace.horizon() != path.horizon() {
        return Err(Error::Domain(format!(
            "trace horizon {} differs from path horizon {}",
            trace.horizon(),
            path.horizon()
        )));
    }
    Ok(())
}

/// Couples `trace` with the OTG policy, re-solving the offline problem on
/// every fired step. `O(T^2)`; intended as a verification oracle.
pub fn couple_exact(
    model: &QuantileModel,
    path: &SamplePath,
    trace: &PolicyTrace,
) -> Result<CouplingReport> {
    check_trace(path, trace)?;
    let steps = (0..path.horizon())
        .map(|i| {
            step_compensation(
                model,
                &path.quantiles()[i..],
                &path.values()[i..],
                trace.budget_before(i + 1),
                trace.decisions[i],
                trace.threshold_used[i],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (offline, _, _) = offline_value(path, trace.initial_budget)?;
    Ok(CouplingReport::assemble(steps, offline, trace.accumulated_value))
}

/// Order statistics of the not-yet-arrived quantiles of a path, with
/// removal of arrivals in time order. Fenwick tree over descending rank.
#[derive(Debug, Clone)]
pub struct SuffixOrderStats {
    by_rank: Vec<usize>,
    rank_of: Vec<usize>,
    tree: Vec<u32>,
    present: usize,
}

impl SuffixOrderStats {
    pub fn new(quantiles: &[f64]) -> Self {
        let n = quantiles.len();
        let mut by_rank: Vec<usize> = (0..n).collect();
        by_rank.sort_by(|&a, &b| quantiles[b].partial_cmp(&quantiles[a]).unwrap().then(a.cmp(&b)));
        let mut rank_of = vec![0; n];
        for (r, &i) in by_rank.iter().enumerate() {
            rank_of[i] = r;
        }
        // all present: node i covers (i - lowbit(i), i]
        let tree = (0..=n).map(|i| (i & i.wrapping_neg()) as u32).collect();
        Self {
            by_rank,
            rank_of,
            tree,
            present: n,
        }
    }

    pub fn len(&self) -> usize {
        self.present
    }

    pub fn is_empty(&self) -> bool {
        self.present == 0
    }

    /// Removes arrival `index` (0-based position in the path).
    pub fn remove(&mut self, index: usize) {
        let mut i = self.rank_of[index] + 1;
        while i < self.tree.len() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
        self.present -= 1;
    }

    /// Path index of the `k`-th largest present quantile (1-based `k`).
    pub fn kth_largest(&self, k: usize) -> Option<usize> {
        if k == 0 || k > self.present {
            return None;
        }
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut remaining = k as u32;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] < remaining {
                pos = next;
                remaining -= self.tree[next];
            }
            step >>= 1;
        }
        Some(self.by_rank[pos])
    }
}

/// Couples `trace` with the OTG policy in `O(T log T)` using order
/// statistics and the closed-form compensations `u - theta` (hire when the
/// offline would reject) and `theta - l` (reject when it would hire).
pub fn couple_fast(
    model: &QuantileModel,
    path: &SamplePath,
    trace: &PolicyTrace,
) -> Result<CouplingReport> {
    check_trace(path, trace)?;
    let q = path.quantiles();
    let v = path.values();
    let horizon = path.horizon();
    let mut stats = SuffixOrderStats::new(q);
    let mut steps = Vec::with_capacity(horizon);
    for i in 0..horizon {
        let budget = trace.budget_before(i + 1);
        let upper = stats.kth_largest(budget.min(stats.len()));
        let lower = stats.kth_largest(budget + 1);
        let (q_u, u) = upper.map_or((1.0, f64::INFINITY), |j| (q[j], v[j]));
        let (q_l, l) = lower.map_or((0.0, 0.0), |j| (q[j], v[j]));
        let p_used = trace.threshold_used[i];
        let p_otg = otg_threshold(p_used, q_l, q_u, budget);
        let theta = v[i];
        let (fired, amount) = match (budget, trace.decisions[i]) {
            (0, _) => (false, 0.0),
            (_, true) if theta < u => (true, u - theta),
            (_, false) if theta > l => (true, theta - l),
            _ => (false, 0.0),
        };
        let tau = horizon - i;
        steps.push(CouplingRecord {
            q_l,
            q_u,
            p_otg,
            fired,
            amount,
            bound: compensation_bound(model, p_used, p_otg),
            events: EventFlags::evaluate(model, tau, trace.threshold_ce[i], p_used, p_otg),
        });
        stats.remove(i);
    }
    let (offline, _, _) = offline_value(path, trace.initial_budget)?;
    Ok(CouplingReport::assemble(steps, offline, trace.accumulated_value))
}

/// Result of checking the pathwise regret decomposition on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCheck {
    pub offline_value: f64,
    pub online_value: f64,
    pub total_compensation: f64,
    pub residual: f64,
    pub fired_steps: usize,
    pub bound_violations: usize,
}

/// Runs `policy` on `path` and returns
/// `offline - (online + sum of compensations)`, computed with exact suffix
/// re-solving.
pub fn verify_decomposition(
    model: &QuantileModel,
    path: &SamplePath,
    budget: usize,
    policy: PolicyKind,
) -> Result<DecompositionCheck> {
    let trace = run_policy(policy, model, path, budget)?;
    let report = couple_exact(model, path, &trace)?;
    Ok(DecompositionCheck {
        offline_value: report.offline_value,
        online_value: report.online_value,
        total_compensation: report.total_compensation,
        residual: report.residual,
        fired_steps: report.fired_steps(),
        bound_violations: report.bound_violations(),
    })
}

/// Empirical complement frequencies of the three events at one `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub tau: usize,
    pub a1_complement: MeanEstimate,
    pub a2_complement: MeanEstimate,
    pub a3_complement: MeanEstimate,
    /// `2/tau^4`
    pub a1_bound: f64,
    /// `2/tau^4`
    pub a2_bound: f64,
    /// `2n(n+1)/tau^4`
    pub a3_bound: f64,
}

impl EventRow {
    /// Every frequency is within `k` standard errors of its bound.
    pub fn within(&self, k: f64) -> bool {
        [
            (&self.a1_complement, self.a1_bound),
            (&self.a2_complement, self.a2_bound),
            (&self.a3_complement, self.a3_bound),
        ]
        .iter()
        .all(|(est, bound)| est.mean <= bound + k * est.stderr)
    }
}

/// Runs CwG `reps` times at horizon `horizon` and tabulates, for every
/// phase-1 step, how often each event fails. Rows are ordered by
/// decreasing `tau`; empty when phase 1 is empty.
pub fn event_frequencies(
    model: &QuantileModel,
    budget: usize,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<EventRow>> {
    if horizon == 0 || budget == 0 || budget > horizon {
        return Err(Error::Domain(format!(
            "need 1 <= budget <= horizon, got budget {budget} and horizon {horizon}"
        )));
    }
    let config = CwgConfig::new(model.gaps().clone(), horizon);
    let phase1 = config.phase1_end;
    if phase1 == 0 || reps == 0 {
        return Ok(Vec::new());
    }
    let n_blocks = reps.div_ceil(BLOCK);
    let blocks: Vec<Vec<[u32; 3]>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<[u32; 3]>> {
            let mut counts = vec![[0u32; 3]; phase1];
            for r in b * BLOCK..((b + 1) * BLOCK).min(reps) {
                let mut rng = replication_rng(seed, horizon, r);
                let path = SamplePath::draw(model, horizon, &mut rng)?;
                let trace = run_cwg(&path, budget, &config)?;
                let report = couple_fast(model, &path, &trace)?;
                for (c, s) in counts.iter_mut().zip(&report.steps) {
                    c[0] += u32::from(!s.events.a1);
                    c[1] += u32::from(!s.events.a2);
                    c[2] += u32::from(!s.events.a3);
                }
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut totals = vec![[0u32; 3]; phase1];
    for block in &blocks {
        for (tot, c) in totals.iter_mut().zip(block) {
            for k in 0..3 {
                tot[k] += c[k];
            }
        }
    }
    let n = model.gaps().n_gaps() as f64;
    Ok(totals
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let tau = horizon - i;
            let tau4 = (tau as f64).powi(4);
            EventRow {
                tau,
                a1_complement: MeanEstimate::from_frequency(c[0] as usize, reps),
                a2_complement: MeanEstimate::from_frequency(c[1] as usize, reps),
                a3_complement: MeanEstimate::from_frequency(c[2] as usize, reps),
                a1_bound: 2.0 / tau4,
                a2_bound: 2.0 / tau4,
                a3_bound: 2.0 * n * (n + 1.0) / tau4,
            }
        })
        .collect())
}

/// Per-step statistics of the CE threshold increments.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    /// Step `t` of `Delta_t = p_t^ce - p_{t-1}^ce`.
    pub t: usize,
    pub increment: MeanEstimate,
    /// Largest `|Delta_t|` observed over all paths.
    pub max_abs: f64,
    /// `1/(T - t)`
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub horizon: usize,
    pub budget: usize,
    pub reps: usize,
    pub rows: Vec<MartingaleRow>,
}

impl MartingaleReport {
    /// Rows whose largest increment exceeds `1/(T - t)`.
    pub fn bound_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.max_abs > r.bound).count()
    }

    /// Largest `|mean| / stderr` over steps `t <= t_max` with positive stderr.
    pub fn max_z(&self, t_max: usize) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.t <= t_max && r.increment.stderr > 0.0)
            .map(|r| r.increment.mean.abs() / r.increment.stderr)
            .fold(0.0, f64::max)
    }
}

/// Simulates CE `reps` times and reports the empirical mean and standard
/// error of every increment `Delta_t`, `t = 1..T-1`, together with the
/// largest observed `|Delta_t|`.
pub fn martingale_diagnostic(
    model: &QuantileModel,
    budget: usize,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if model.is_atomic() {
        return Err(Error::UnsupportedModel(
            "the CE martingale diagnostic needs a non-atomic distribution".into(),
        ));
    }
    if horizon < 2 || budget == 0 || budget > horizon || reps < 2 {
        return Err(Error::Domain(format!(
            "need T >= 2, 1 <= B <= T and reps >= 2; got T={horizon}, B={budget}, reps={reps}"
        )));
    }
    let steps = horizon - 1;
    #[derive(Clone)]
    struct Acc {
        sum: Vec<f64>,
        sum_sq: Vec<f64>,
        max_abs: Vec<f64>,
    }
    let n_blocks = reps.div_ceil(BLOCK);
    let blocks: Vec<Acc> = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<Acc> {
            let mut acc = Acc {
                sum: vec![0.0; steps],
                sum_sq: vec![0.0; steps],
                max_abs: vec![0.0; steps],
            };
            for r in b * BLOCK..((b + 1) * BLOCK).min(reps) {
                let mut rng = replication_rng(seed, horizon, r);
                let path = SamplePath::draw(model, horizon, &mut rng)?;
                let trace = run_ce(&path, budget)?;
                for t in 1..horizon {
                    let delta = trace.threshold_ce[t] - trace.threshold_ce[t - 1];
                    acc.sum[t - 1] += delta;
                    acc.sum_sq[t - 1] += delta * delta;
                    acc.max_abs[t - 1] = acc.max_abs[t - 1].max(delta.abs());
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Acc {
        sum: vec![0.0; steps],
        sum_sq: vec![0.0; steps],
        max_abs: vec![0.0; steps],
    };
    for block in &blocks {
        for i in 0..steps {
            total.sum[i] += block.sum[i];
            total.sum_sq[i] += block.sum_sq[i];
            total.max_abs[i] = total.max_abs[i].max(block.max_abs[i]);
        }
    }
    let n = reps as f64;
    let rows = (0..steps)
        .map(|i| {
            let mean = total.sum[i] / n;
            let var = ((total.sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
            let t = i + 1;
            MartingaleRow {
                t,
                increment: MeanEstimate {
                    mean,
                    stderr: (var / n).sqrt(),
                    count: reps,
                },
                max_abs: total.max_abs[i],
                bound: 1.0 / (horizon - t) as f64,
            }
        })
        .collect();
    Ok(MartingaleReport {
        horizon,
        budget,
        reps,
        rows,
    })
}
