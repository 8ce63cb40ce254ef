//! Exact small-instance oracles for discrete type distributions: the
//! optimal online value by backward induction and the hindsight value by
//! enumerating type-count vectors.

use crate::distributions::{ModelKind, QuantileModel};
use crate::error::{Error, Result};
use crate::harness::regret_samples;
use crate::policies::PolicyKind;
use crate::stats::{CompensatedSum, MeanEstimate};

pub const MAX_SUPPORT: usize = 16;
pub const MAX_DP_HORIZON: usize = 10_000;
/// Largest number of type-count vectors enumerated.
pub const MAX_COMPOSITIONS: f64 = 1e7;
/// Largest number of cells kept by a full [`DpTable`].
pub const MAX_TABLE_CELLS: usize = 20_000_000;

fn atoms(model: &QuantileModel) -> Result<(&[f64], &[f64])> {
    match model.kind() {
        ModelKind::Discrete { support, masses, .. } => {
            if support.len() > MAX_SUPPORT {
                return Err(Error::Size(format!(
                    "support of size {} exceeds {MAX_SUPPORT}",
                    support.len()
                )));
            }
            Ok((support, masses))
        }
        _ => Err(Error::UnsupportedModel(format!(
            "exact oracles need a discrete distribution, got `{model}`"
        ))),
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon > MAX_DP_HORIZON {
        return Err(Error::Size(format!("horizon {horizon} exceeds {MAX_DP_HORIZON}")));
    }
    Ok(())
}

/// One backward-induction step: `row` holds `V[t+1][.]` and becomes `V[t][.]`.
fn backward_step(row: &mut [f64], support: &[f64], masses: &[f64]) {
    for b in (1..row.len()).rev() {
        let (take, skip) = (row[b - 1], row[b]);
        row[b] = support
            .iter()
            .zip(masses)
            .map(|(&a, &f)| f * (a + take).max(skip))
            .sum();
    }
}

/// Expected value of the optimal online policy with `budget` hires over
/// `horizon` arrivals, using two rolling rows.
pub fn optimal_online_value(model: &QuantileModel, budget: usize, horizon: usize) -> Result<f64> {
    let (support, masses) = atoms(model)?;
    check_horizon(horizon)?;
    let mut row = vec![0.0; budget.min(horizon) + 1];
    for _ in 0..horizon {
        backward_step(&mut row, support, masses);
    }
    Ok(*row.last().unwrap())
}

/// Full value-to-go table `V[t][b]`, `t` in `0..=T`, `b` in `0..=B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTable {
    horizon: usize,
    budget: usize,
    values: Vec<f64>,
}

impl DpTable {
    pub fn build(model: &QuantileModel, budget: usize, horizon: usize) -> Result<Self> {
        let (support, masses) = atoms(model)?;
        check_horizon(horizon)?;
        let cells = (horizon + 1).saturating_mul(budget + 1);
        if cells > MAX_TABLE_CELLS {
            return Err(Error::Size(format!("a {cells}-cell table is too large")));
        }
        let width = budget + 1;
        let mut values = vec![0.0; cells];
        let mut row = vec![0.0; width];
        for t in (0..horizon).rev() {
            backward_step(&mut row, support, masses);
            values[t * width..(t + 1) * width].copy_from_slice(&row);
        }
        Ok(Self {
            horizon,
            budget,
            values,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `V[t][b]`: expected optimal value with `b` hires left after `t` arrivals.
    pub fn value(&self, t: usize, b: usize) -> f64 {
        assert!(t <= self.horizon && b <= self.budget, "({t}, {b}) is outside the table");
        self.values[t * (self.budget + 1) + b]
    }
}

/// `C(n + k - 1, k - 1)` in floating point.
fn compositions(n: usize, k: usize) -> f64 {
    (1..k).fold(1.0, |acc, i| acc * (n + i) as f64 / i as f64)
}

/// Expected hindsight value `E[sum of the B largest of T draws]`.
///
/// Enumerates count vectors `(n_1, ..., n_m)` summing to `T` with
/// multinomial weights, accumulated with compensated summation.
pub fn exact_offline_expectation(model: &QuantileModel, budget: usize, horizon: usize) -> Result<f64> {
    let (support, masses) = atoms(model)?;
    let m = support.len();
    let count = compositions(horizon, m);
    if count > MAX_COMPOSITIONS {
        return Err(Error::Size(format!(
            "{count:.3e} count vectors for T={horizon}, m={m} exceed {MAX_COMPOSITIONS:.0e}"
        )));
    }
    // types by decreasing value so the top-B sum is a greedy fill
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| support[j].partial_cmp(&support[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| support[i]).collect();
    let log_mass: Vec<f64> = order.iter().map(|&i| masses[i].ln()).collect();
    let mut ln_fact = vec![0.0; horizon + 1];
    for k in 1..=horizon {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }

    struct Walk<'a> {
        values: &'a [f64],
        log_mass: &'a [f64],
        ln_fact: &'a [f64],
        budget: usize,
        total: CompensatedSum,
    }

    impl Walk<'_> {
        // counts fixed for types before `i`; `left` arrivals to distribute
        fn visit(&mut self, i: usize, left: usize, log_w: f64, hires_left: usize, top: f64) {
            let last = i + 1 == self.values.len();
            let range = if last { left..=left } else { 0..=left };
            for n in range {
                if n > 0 && self.log_mass[i] == f64::NEG_INFINITY {
                    continue;
                }
                let mass_term = if n == 0 { 0.0 } else { n as f64 * self.log_mass[i] };
                let w = log_w - self.ln_fact[n] + mass_term;
                let take = n.min(hires_left);
                let top = top + take as f64 * self.values[i];
                if last {
                    self.total.add(w.exp() * top);
                } else {
                    self.visit(i + 1, left - n, w, hires_left - take, top);
                }
            }
        }
    }

    if m == 0 {
        return Ok(0.0);
    }
    let mut walk = Walk {
        values: &values,
        log_mass: &log_mass,
        ln_fact: &ln_fact,
        budget,
        total: CompensatedSum::new(),
    };
    let hires = walk.budget.min(horizon);
    walk.visit(0, horizon, ln_fact[horizon], hires, 0.0);
    Ok(walk.total.value())
}

/// Exact optimal regret alongside Monte-Carlo CwG and static regrets.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub horizon: usize,
    pub budget: usize,
    pub online_optimum: f64,
    pub offline_expectation: f64,
    /// `offline_expectation - online_optimum`
    pub regret_opt: f64,
    pub cwg: MeanEstimate,
    pub static_policy: MeanEstimate,
}

impl OracleReport {
    /// `regret_opt <= CwG regret + 3 stderr`.
    pub fn sandwich_holds(&self) -> bool {
        self.regret_opt <= self.cwg.mean + 3.0 * self.cwg.stderr
    }
}

pub fn regret_oracle(
    model: &QuantileModel,
    budget: usize,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<OracleReport> {
    let online_optimum = optimal_online_value(model, budget, horizon)?;
    let offline_expectation = exact_offline_expectation(model, budget, horizon)?;
    let samples = regret_samples(
        model,
        &[PolicyKind::Cwg, PolicyKind::Static],
        budget,
        horizon,
        reps,
        seed,
    )?;
    Ok(OracleReport {
        horizon,
        budget,
        online_optimum,
        offline_expectation,
        regret_opt: offline_expectation - online_optimum,
        cwg: MeanEstimate::from_samples(&samples[0]),
        static_policy: MeanEstimate::from_samples(&samples[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coin() -> QuantileModel {
        QuantileModel::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    /// Optimal online value by expectimax over the full decision tree.
    fn expectimax(support: &[f64], masses: &[f64], budget: usize, left: usize) -> f64 {
        if left == 0 || budget == 0 {
            return 0.0;
        }
        let skip = expectimax(support, masses, budget, left - 1);
        let take = expectimax(support, masses, budget - 1, left - 1);
        support
            .iter()
            .zip(masses)
            .map(|(&a, &f)| f * (a + take).max(skip))
            .sum()
    }

    /// Hindsight value by enumerating all `m^T` sequences.
    fn brute_offline(support: &[f64], masses: &[f64], budget: usize, horizon: usize) -> f64 {
        let m = support.len();
        let mut total = 0.0;
        for code in 0..m.pow(horizon as u32) {
            let mut c = code;
            let mut vals = Vec::with_capacity(horizon);
            let mut p = 1.0;
            for _ in 0..horizon {
                vals.push(support[c % m]);
                p *= masses[c % m];
                c /= m;
            }
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            total += p * vals.iter().take(budget).sum::<f64>();
        }
        total
    }

    #[test]
    fn online_examples() {
        let single = QuantileModel::discrete(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(optimal_online_value(&single, 3, 5).unwrap(), 3.0);
        assert_eq!(optimal_online_value(&coin(), 1, 1).unwrap(), 0.5);
        // hand DP: V[1][1] = 1/2, V[0][1] = 1/2 max(0, 1/2) + 1/2 max(1, 1/2)
        assert_eq!(optimal_online_value(&coin(), 1, 2).unwrap(), 0.75);
        assert!(matches!(
            optimal_online_value(&QuantileModel::uniform(), 1, 2),
            Err(Error::UnsupportedModel(_))
        ));
        assert!(matches!(
            optimal_online_value(&coin(), 1, MAX_DP_HORIZON + 1),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn offline_examples() {
        let single = QuantileModel::discrete(vec![1.0], vec![1.0]).unwrap();
        assert!((exact_offline_expectation(&single, 2, 3).unwrap() - 2.0).abs() < 1e-12);
        // four equally likely paths: (0,0) -> 0, the rest -> 1
        assert!((exact_offline_expectation(&coin(), 1, 2).unwrap() - 0.75).abs() < 1e-12);
        let three = QuantileModel::three_point(1.0 / 3.0).unwrap();
        let all = exact_offline_expectation(&three, 30, 30).unwrap();
        assert!((all - 30.0 * 0.5).abs() < 1e-12);
        let wide = QuantileModel::discrete((0..16).map(|i| i as f64 / 15.0).collect(), vec![1.0 / 16.0; 16]).unwrap();
        assert!(matches!(exact_offline_expectation(&wide, 5, 100), Err(Error::Size(_))));
    }

    #[test]
    fn oracles_match_brute_force() {
        let cases = [
            (vec![0.25, 0.5, 0.75], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
            (vec![0.1, 0.4, 0.9], vec![0.2, 0.5, 0.3]),
            (vec![0.0, 1.0], vec![0.5, 0.5]),
        ];
        for (support, masses) in cases {
            let model = QuantileModel::discrete(support.clone(), masses.clone()).unwrap();
            for horizon in 1..=6 {
                for budget in 1..=horizon {
                    let on = optimal_online_value(&model, budget, horizon).unwrap();
                    let off = exact_offline_expectation(&model, budget, horizon).unwrap();
                    assert!((on - expectimax(&support, &masses, budget, horizon)).abs() < 1e-12);
                    assert!((off - brute_offline(&support, &masses, budget, horizon)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn table_matches_rolling_rows_and_boundaries() {
        let model = QuantileModel::three_point(1.0 / 12.0).unwrap();
        let table = DpTable::build(&model, 7, 20).unwrap();
        for t in 0..=20 {
            assert_eq!(table.value(t, 0), 0.0);
            for b in 1..=7 {
                assert!(table.value(t, b) >= table.value(t, b - 1));
                let want = optimal_online_value(&model, b, 20 - t).unwrap();
                assert!((table.value(t, b) - want).abs() < 1e-12);
            }
        }
        for b in 0..=7 {
            assert_eq!(table.value(20, b), 0.0);
        }
    }

    #[test]
    fn regret_oracle_trivial_cases() {
        let single = QuantileModel::discrete(vec![1.0], vec![1.0]).unwrap();
        let r = regret_oracle(&single, 3, 8, 20, 1).unwrap();
        assert!(r.regret_opt.abs() < 1e-12);
        assert_eq!(r.cwg.mean, 0.0);
        let three = QuantileModel::three_point(1.0 / 3.0).unwrap();
        let r = regret_oracle(&three, 12, 12, 20, 1).unwrap();
        assert!(r.regret_opt.abs() < 1e-12);
        let r = regret_oracle(&coin(), 1, 2, 200, 1).unwrap();
        assert!(r.regret_opt.abs() < 1e-12);
        assert!(r.sandwich_holds());
    }

    proptest! {
        #[test]
        fn sandwich_and_monotonicity(
            raw in proptest::collection::vec((0.0f64..1.0, 0.05f64..1.0), 1..5),
            horizon in 1usize..40,
            frac in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().map(|r| r.1).sum();
            let mut support: Vec<f64> = raw.iter().map(|r| r.0).collect();
            support.sort_by(|a, b| a.partial_cmp(b).unwrap());
            support.dedup();
            prop_assume!(support.len() == raw.len());
            let masses: Vec<f64> = raw.iter().map(|r| r.1 / total).collect();
            let model = QuantileModel::discrete(support, masses);
            prop_assume!(model.is_ok());
            let model = model.unwrap();
            let budget = ((frac * horizon as f64) as usize).clamp(1, horizon);
            let on = optimal_online_value(&model, budget, horizon).unwrap();
            let off = exact_offline_expectation(&model, budget, horizon).unwrap();
            prop_assert!(on <= off + 1e-12);
            prop_assert!(optimal_online_value(&model, budget + 1, horizon).unwrap() >= on - 1e-12);
            prop_assert!(optimal_online_value(&model, budget, horizon + 1).unwrap() >= on - 1e-12);
        }
    }
}
