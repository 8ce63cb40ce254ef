//! Candidate-ability distributions on `[0, 1]`.
//!
//! A [`QuantileModel`] pairs a distribution (its CDF and generalized inverse
//! `F^{-1}(q) = inf { v : F(v) >= q }`) with the [`GapStructure`] the CwG
//! policy consumes. Everything downstream works in quantile space, so the
//! quantile function is the workhorse here and closed forms are used
//! wherever one exists.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Masses and weights must sum to one within this tolerance.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Absolute tolerance of the generic bisection inverse.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

const BISECTION_MAX_ITERS: usize = 200;

/// Offset used to realize one-sided limits `F^{-1}(q^+)`.
pub const RIGHT_LIMIT_NUDGE: f64 = 1e-12;

/// Interior points per cell of the clustered-distribution verification grid.
pub const VERIFY_GRID_POINTS: usize = 512;

/// Gap quantiles `0 = q*_0 < q*_1 < ... < q*_n < q*_{n+1} = 1` together with
/// the clustering parameters `(beta, epsilon0, delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStructure {
    quantiles: Vec<f64>,
    beta: f64,
    epsilon0: f64,
    delta: f64,
}

impl GapStructure {
    /// Validates and builds a gap structure. `quantiles` must include both
    /// endpoints.
    pub fn new(quantiles: Vec<f64>, beta: f64, epsilon0: f64, delta: f64) -> Result<Self> {
        if quantiles.len() < 2 {
            return Err(Error::Config(
                "gap quantiles need at least the endpoints 0 and 1".into(),
            ));
        }
        if quantiles[0] != 0.0 || *quantiles.last().unwrap() != 1.0 {
            return Err(Error::Config(format!(
                "gap quantiles must start at 0 and end at 1, got {quantiles:?}"
            )));
        }
        if quantiles.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "gap quantiles must be strictly increasing, got {quantiles:?}"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
        }
        if !(epsilon0 > 0.0 && epsilon0 <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon0 must lie in (0, 1], got {epsilon0}"
            )));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Config(format!("delta must lie in [0, 1], got {delta}")));
        }
        let gaps = Self {
            quantiles,
            beta,
            epsilon0,
            delta,
        };
        if let Some((i, width)) = gaps
            .cells()
            .enumerate()
            .map(|(i, (lo, hi))| (i + 1, hi - lo))
            .find(|&(_, w)| w < epsilon0 - MASS_TOLERANCE)
        {
            return Err(Error::Config(format!(
                "cell {i} has width {width} below epsilon0 = {epsilon0}"
            )));
        }
        Ok(gaps)
    }

    /// Builds a structure from interior gap quantiles only; `epsilon0`
    /// defaults to the narrowest cell.
    pub fn from_interior(
        interior: &[f64],
        beta: f64,
        epsilon0: Option<f64>,
        delta: f64,
    ) -> Result<Self> {
        let mut quantiles = Vec::with_capacity(interior.len() + 2);
        quantiles.push(0.0);
        quantiles.extend(interior.iter().copied().filter(|&q| q != 0.0 && q != 1.0));
        quantiles.push(1.0);
        let narrowest = quantiles
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let epsilon0 = epsilon0.unwrap_or(narrowest.min(1.0));
        Self::new(quantiles, beta, epsilon0, delta)
    }

    /// Single cluster `[0, 1]`, `(0, 1)`-clustered.
    pub fn gapless() -> Self {
        Self {
            quantiles: vec![0.0, 1.0],
            beta: 0.0,
            epsilon0: 1.0,
            delta: 0.0,
        }
    }

    /// All gap quantiles including the endpoints.
    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    /// Interior gap quantiles `q*_1 .. q*_n`.
    pub fn interior(&self) -> &[f64] {
        &self.quantiles[1..self.quantiles.len() - 1]
    }

    /// Number of interior gaps `n`.
    pub fn n_gaps(&self) -> usize {
        self.quantiles.len() - 2
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Closed quantile cells `[q*_{i-1}, q*_i]` for `i = 1..=n+1`.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.quantiles.windows(2).map(|w| (w[0], w[1]))
    }

    /// Whether `a` and `b` lie (weakly) in a common closed cell.
    pub fn share_closed_cell(&self, a: f64, b: f64) -> bool {
        self.cells()
            .any(|(lo, hi)| (lo..=hi).contains(&a) && (lo..=hi).contains(&b))
    }

    /// Returns a copy with different clustering parameters, revalidated.
    pub fn with_params(&self, beta: f64, epsilon0: f64, delta: f64) -> Result<Self> {
        Self::new(self.quantiles.clone(), beta, epsilon0, delta)
    }
}

/// The distribution family behind a [`QuantileModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// The bimodal family with one gap `(1/4, 3/4)` whose mass accumulates
    /// near the gap edges at rate `beta`.
    FBeta { beta: f64 },
    /// Finitely many atoms `support[i]` with probability `masses[i]`.
    Discrete {
        support: Vec<f64>,
        masses: Vec<f64>,
        cumulative: Vec<f64>,
    },
    /// Uniform on each interval, interval `i` carrying weight `weights[i]`.
    PiecewiseUniform {
        intervals: Vec<(f64, f64)>,
        weights: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

/// A type distribution plus its declared gap structure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileModel {
    kind: ModelKind,
    gaps: GapStructure,
}

impl QuantileModel {
    pub fn uniform() -> Self {
        Self {
            kind: ModelKind::Uniform,
            gaps: GapStructure::gapless(),
        }
    }

    /// The bimodal family; carries gap quantiles `{0, 1/2, 1}` with
    /// `epsilon0 = 1/2` and the given `beta`.
    pub fn f_beta(beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("fbeta needs beta >= 0, got {beta}")));
        }
        Ok(Self {
            kind: ModelKind::FBeta { beta },
            gaps: GapStructure::new(vec![0.0, 0.5, 1.0], beta, 0.5, 0.0)?,
        })
    }

    /// A discrete distribution. Gap quantiles are the cumulative masses,
    /// `beta = 0` and `epsilon0` is the smallest mass.
    pub fn discrete(support: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != masses.len() {
            return Err(Error::Config(format!(
                "discrete model needs equally many support points and masses, got {} and {}",
                support.len(),
                masses.len()
            )));
        }
        if support.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config(format!(
                "discrete support must lie in [0, 1], got {support:?}"
            )));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "discrete support must be strictly increasing, got {support:?}"
            )));
        }
        let cumulative = cumulative_weights("mass", &masses)?;
        let interior = &cumulative[..cumulative.len() - 1];
        let epsilon0 = masses.iter().copied().fold(f64::INFINITY, f64::min);
        let gaps = GapStructure::from_interior(interior, 0.0, Some(epsilon0), 0.0)?;
        Ok(Self {
            kind: ModelKind::Discrete {
                support,
                masses,
                cumulative,
            },
            gaps,
        })
    }

    /// The three-point distribution on `{1/4, 1/2, 3/4}` with masses
    /// `{1/2 - e/2, e, 1/2 - e/2}`.
    pub fn three_point(epsilon0: f64) -> Result<Self> {
        if !(epsilon0 > 0.0 && epsilon0 < 1.0) {
            return Err(Error::Config(format!(
                "three-point model needs epsilon0 in (0, 1), got {epsilon0}"
            )));
        }
        let side = 0.5 - epsilon0 / 2.0;
        Self::discrete(vec![0.25, 0.5, 0.75], vec![side, epsilon0, side])
    }

    /// Piecewise-uniform distribution over disjoint sorted intervals. Gap
    /// quantiles sit at every boundary between two intervals separated by a
    /// positive-length hole; `beta` defaults to 0.
    pub fn piecewise_uniform(intervals: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if intervals.is_empty() || intervals.len() != weights.len() {
            return Err(Error::Config(format!(
                "pwuniform needs equally many intervals and weights, got {} and {}",
                intervals.len(),
                weights.len()
            )));
        }
        for &(l, r) in &intervals {
            if !(0.0 <= l && l < r && r <= 1.0) {
                return Err(Error::Config(format!(
                    "pwuniform interval ({l}, {r}) must satisfy 0 <= l < r <= 1"
                )));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::Config(
                "pwuniform intervals must be sorted and disjoint".into(),
            ));
        }
        let cumulative = cumulative_weights("weight", &weights)?;
        let interior: Vec<f64> = intervals
            .windows(2)
            .zip(&cumulative)
            .filter(|(w, _)| w[0].1 < w[1].0)
            .map(|(_, &c)| c)
            .collect();
        let gaps = GapStructure::from_interior(&interior, 0.0, None, 0.0)?;
        Ok(Self {
            kind: ModelKind::PiecewiseUniform {
                intervals,
                weights,
                cumulative,
            },
            gaps,
        })
    }

    /// Replaces the declared gap structure.
    pub fn with_gaps(mut self, gaps: GapStructure) -> Self {
        self.gaps = gaps;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn gaps(&self) -> &GapStructure {
        &self.gaps
    }

    /// True when the distribution has atoms.
    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, ModelKind::Discrete { .. })
    }

    /// Right-continuous CDF `F(x)`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.cdf_unchecked(x))
    }

    /// Generalized inverse `F^{-1}(q) = inf { v in [0, 1] : F(v) >= q }`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        check_unit("q", q)?;
        Ok(self.quantile_unchecked(q))
    }

    /// `F^{-1}(q^+)`, the right limit, realized as a fixed nudge.
    pub fn quantile_right(&self, q: f64) -> Result<f64> {
        check_unit("q", q)?;
        Ok(self.quantile_unchecked((q + RIGHT_LIMIT_NUDGE).min(1.0)))
    }

    /// Realizes one arrival from a uniform draw `u`: returns the ability
    /// `F^{-1}(u)` and the tie-breaking quantile, which is `u` itself.
    pub fn draw_step(&self, u: f64) -> Result<(f64, f64)> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("uniform draw must lie in (0, 1), got {u}")));
        }
        Ok((self.quantile_unchecked(u), u))
    }

    /// Generalized inverse by bisection on the CDF, valid for any model.
    pub fn quantile_by_bisection(&self, q: f64) -> Result<f64> {
        check_unit("q", q)?;
        if q == 0.0 {
            return Ok(0.0);
        }
        // invariant: F(lo) < q <= F(hi), or lo == 0 with F(0) >= q
        if self.cdf_unchecked(0.0) >= q {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..BISECTION_MAX_ITERS {
            if hi - lo <= BISECTION_TOLERANCE {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cdf_unchecked(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        match &self.kind {
            ModelKind::Uniform => x,
            ModelKind::FBeta { beta } => {
                let p = beta + 1.0;
                if x <= 0.25 {
                    0.5 - 0.5 * (1.0 - 4.0 * x).powf(p)
                } else if x < 0.75 {
                    0.5
                } else {
                    0.5 + 0.5 * (4.0 * x - 3.0).powf(p)
                }
            }
            ModelKind::Discrete {
                support,
                cumulative,
                ..
            } => {
                let k = support.partition_point(|&a| a <= x);
                if k == 0 {
                    0.0
                } else {
                    cumulative[k - 1]
                }
            }
            ModelKind::PiecewiseUniform {
                intervals,
                weights,
                cumulative,
            } => {
                let k = intervals.partition_point(|&(l, _)| l <= x);
                if k == 0 {
                    return 0.0;
                }
                let (l, r) = intervals[k - 1];
                if x >= r {
                    cumulative[k - 1]
                } else {
                    let below = if k >= 2 { cumulative[k - 2] } else { 0.0 };
                    below + weights[k - 1] * (x - l) / (r - l)
                }
            }
        }
    }

    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ModelKind::Uniform => q,
            ModelKind::FBeta { beta } => {
                let s = 1.0 / (beta + 1.0);
                if q <= 0.5 {
                    0.25 - (1.0 - 2.0 * q).powf(s) / 4.0
                } else {
                    (2.0 * q - 1.0).powf(s) / 4.0 + 0.75
                }
            }
            ModelKind::Discrete {
                support,
                cumulative,
                ..
            } => {
                let i = cumulative.partition_point(|&c| c < q);
                support[i.min(support.len() - 1)]
            }
            ModelKind::PiecewiseUniform {
                intervals,
                weights,
                cumulative,
            } => {
                let i = cumulative
                    .partition_point(|&c| c < q)
                    .min(intervals.len() - 1);
                let below = if i == 0 { 0.0 } else { cumulative[i - 1] };
                let (l, r) = intervals[i];
                let frac = ((q - below) / weights[i]).clamp(0.0, 1.0);
                l + frac * (r - l)
            }
        }
    }
}

impl fmt::Display for QuantileModel {
    /// Renders the preset string that parses back to this distribution.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ModelKind::Uniform => write!(f, "uniform"),
            ModelKind::FBeta { beta } => write!(f, "fbeta:beta={beta}"),
            ModelKind::Discrete {
                support, masses, ..
            } => write!(f, "discrete:support={};mass={}", join(support), join(masses)),
            ModelKind::PiecewiseUniform {
                intervals, weights, ..
            } => {
                let iv: Vec<String> = intervals.iter().map(|(l, r)| format!("({l},{r})")).collect();
                write!(f, "pwuniform:intervals={};weights={}", iv.join(","), join(weights))
            }
        }
    }
}

impl FromStr for QuantileModel {
    type Err = Error;

    /// Parses a preset string:
    /// `uniform`, `fbeta:beta=<r>`, `discrete:support=a1,..;mass=f1,..` or
    /// `pwuniform:intervals=(l1,r1),..;weights=w1,..`.
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, r),
            None => (s.as_str(), ""),
        };
        let params = parse_params(rest)?;
        let take = |key: &str| -> Result<&str> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse(format!("preset `{name}` needs `{key}=`")))
        };
        let expect_keys = |keys: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(Error::Parse(format!("unknown key `{k}` for preset `{name}`"))),
                None => Ok(()),
            }
        };
        match name {
            "uniform" => {
                expect_keys(&[])?;
                Ok(Self::uniform())
            }
            "fbeta" => {
                expect_keys(&["beta"])?;
                Self::f_beta(parse_real(take("beta")?)?)
            }
            "discrete" => {
                expect_keys(&["support", "mass"])?;
                Self::discrete(parse_list(take("support")?)?, parse_list(take("mass")?)?)
            }
            "pwuniform" => {
                expect_keys(&["intervals", "weights"])?;
                Self::piecewise_uniform(
                    parse_intervals(take("intervals")?)?,
                    parse_list(take("weights")?)?,
                )
            }
            other => Err(Error::Parse(format!(
                "unknown distribution `{other}`; expected one of uniform, fbeta:beta=<r>, \
                 discrete:support=..;mass=.., pwuniform:intervals=(l,r),..;weights=.."
            ))),
        }
    }
}

/// A pair of grid quantiles in one cell violating the density requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityViolation {
    /// 1-based cell index.
    pub cell: usize,
    pub q: f64,
    pub q_tilde: f64,
    /// `|F^{-1}(q) - F^{-1}(q~)|`
    pub value_gap: f64,
    /// `|q - q~|^{1/(beta+1)} + delta`
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeViolation {
    pub cell: usize,
    pub width: f64,
    pub epsilon0: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterReport {
    pub density_violations: Vec<DensityViolation>,
    pub size_violations: Vec<SizeViolation>,
}

impl ClusterReport {
    pub fn is_clean(&self) -> bool {
        self.density_violations.is_empty() && self.size_violations.is_empty()
    }
}

/// Checks the declared gap structure of `model` on a deterministic grid.
///
/// Each cell `(q*_{i-1}, q*_i]` is sampled at its right-limit left end, 512
/// interior points and its right end. Every within-cell pair must satisfy
/// `|F^{-1}(q) - F^{-1}(q~)| <= |q - q~|^{1/(beta+1)} + delta + tolerance`,
/// and every cell must be at least `epsilon0` wide.
pub fn verify_clustered(model: &QuantileModel, tolerance: f64) -> Result<ClusterReport> {
    let gaps = model.gaps();
    let exponent = 1.0 / (gaps.beta() + 1.0);
    let mut report = ClusterReport::default();
    for (idx, (lo, hi)) in gaps.cells().enumerate() {
        let cell = idx + 1;
        let width = hi - lo;
        let step = width / (VERIFY_GRID_POINTS + 1) as f64;
        if step <= 2.0 * RIGHT_LIMIT_NUDGE {
            return Err(Error::Config(format!(
                "cell {cell} of width {width} is too narrow for a {VERIFY_GRID_POINTS}-point grid"
            )));
        }
        if width < gaps.epsilon0() - tolerance {
            report.size_violations.push(SizeViolation {
                cell,
                width,
                epsilon0: gaps.epsilon0(),
            });
        }
        let grid: Vec<f64> = std::iter::once(lo + RIGHT_LIMIT_NUDGE)
            .chain((1..=VERIFY_GRID_POINTS).map(|k| lo + k as f64 * step))
            .chain(std::iter::once(hi))
            .collect();
        let values: Vec<f64> = grid.iter().map(|&q| model.quantile_unchecked(q)).collect();
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                let value_gap = (values[i] - values[j]).abs();
                let allowed = (grid[j] - grid[i]).abs().powf(exponent) + gaps.delta();
                if value_gap > allowed + tolerance {
                    report.density_violations.push(DensityViolation {
                        cell,
                        q: grid[i],
                        q_tilde: grid[j],
                        value_gap,
                        allowed,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// The models shipped as named presets, each with its declared gaps.
pub fn shipped_presets() -> Vec<(&'static str, QuantileModel)> {
    vec![
        ("uniform", QuantileModel::uniform()),
        ("fbeta:beta=0", QuantileModel::f_beta(0.0).unwrap()),
        ("fbeta:beta=1", QuantileModel::f_beta(1.0).unwrap()),
        ("fbeta:beta=2", QuantileModel::f_beta(2.0).unwrap()),
        ("three-point eps=1/3", QuantileModel::three_point(1.0 / 3.0).unwrap()),
        ("three-point eps=1/12", QuantileModel::three_point(1.0 / 12.0).unwrap()),
        (
            "pwuniform:intervals=(0,0.2),(0.5,0.9);weights=0.4,0.6",
            QuantileModel::piecewise_uniform(vec![(0.0, 0.2), (0.5, 0.9)], vec![0.4, 0.6])
                .unwrap(),
        ),
    ]
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn cumulative_weights(what: &str, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::Config(format!("every {what} must be positive, got {weights:?}")));
    }
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if (acc - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Config(format!(
            "{what}es must sum to 1 within {MASS_TOLERANCE}, got {acc}"
        )));
    }
    *cumulative.last_mut().unwrap() = 1.0;
    Ok(cumulative)
}

fn parse_params(rest: &str) -> Result<Vec<(String, String)>> {
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    rest.split(';')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

pub(crate) fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("expected a decimal real, got `{s}`")))
}

pub(crate) fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}

fn parse_intervals(s: &str) -> Result<Vec<(f64, f64)>> {
    let bad = || Error::Parse(format!("expected intervals like (l1,r1),(l2,r2), got `{s}`"));
    let inner = s
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(bad)?;
    inner
        .split("),(")
        .map(|pair| {
            let (l, r) = pair.split_once(',').ok_or_else(bad)?;
            Ok((parse_real(l)?, parse_real(r)?))
        })
        .collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| i as f64 / (n - 1) as f64)
    }

    /// Brute-force `inf { v : F(v) >= q }` over a fine value grid.
    fn brute_quantile(model: &QuantileModel, q: f64, n: usize) -> f64 {
        grid(n)
            .find(|&v| model.cdf(v).unwrap() >= q)
            .unwrap_or(1.0)
    }

    #[test]
    fn fbeta_cdf_examples() {
        let f0 = QuantileModel::f_beta(0.0).unwrap();
        assert_eq!(f0.cdf(0.25).unwrap(), 0.5);
        let f2 = QuantileModel::f_beta(2.0).unwrap();
        assert!((f2.cdf(0.125).unwrap() - 0.4375).abs() < 1e-15);
        for model in shipped_presets().into_iter().map(|(_, m)| m) {
            assert_eq!(model.cdf(1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn fbeta2_cdf_matches_integrated_density() {
        // density 96 (x - 1/4)^2 on [0, 1/4], Simpson's rule on [0, 1/8]
        let n = 2000;
        let h = 0.125 / n as f64;
        let dens = |x: f64| 96.0 * (x - 0.25) * (x - 0.25);
        let mut s = dens(0.0) + dens(0.125);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * dens(k as f64 * h);
        }
        let integral = s * h / 3.0;
        assert!((integral - 0.4375).abs() < 1e-12);
    }

    #[test]
    fn quantile_examples() {
        let f1 = QuantileModel::f_beta(1.0).unwrap();
        assert_eq!(f1.quantile(0.5).unwrap(), 0.25);
        for beta in [0.0, 0.5, 1.0, 2.0, 7.0] {
            assert_eq!(QuantileModel::f_beta(beta).unwrap().quantile(1.0).unwrap(), 1.0);
        }
        let d = QuantileModel::discrete(vec![0.25, 0.5, 0.75], vec![1.0 / 3.0; 3]).unwrap();
        assert_eq!(brute_quantile(&d, 0.4, 10_001), 0.5);
        assert_eq!(d.quantile(0.4).unwrap(), 0.5);
    }

    #[test]
    fn draw_step_examples() {
        assert_eq!(QuantileModel::uniform().draw_step(0.3).unwrap(), (0.3, 0.3));
        let d = QuantileModel::discrete(vec![0.25, 0.5, 0.75], vec![1.0 / 3.0; 3]).unwrap();
        assert_eq!(d.draw_step(0.5).unwrap(), (brute_quantile(&d, 0.5, 10_001), 0.5));
        let f0 = QuantileModel::f_beta(0.0).unwrap();
        let (theta, x) = f0.draw_step(0.6).unwrap();
        assert!((theta - 0.8).abs() < 1e-15);
        assert_eq!(x, 0.6);
        assert!((f0.cdf(theta).unwrap() - 0.6).abs() < 1e-15);
        assert!(f0.draw_step(0.0).is_err());
        assert!(f0.draw_step(1.0).is_err());
    }

    #[test]
    fn domain_errors() {
        let m = QuantileModel::uniform();
        assert!(matches!(m.cdf(-0.1), Err(Error::Domain(_))));
        assert!(matches!(m.cdf(1.5), Err(Error::Domain(_))));
        assert!(matches!(m.quantile(1.0 + 1e-9), Err(Error::Domain(_))));
        assert!(matches!(m.quantile(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn monotone_on_fine_grids() {
        for (name, model) in shipped_presets() {
            let mut prev_c = -1.0;
            let mut prev_q = -1.0;
            for v in grid(10_000) {
                let c = model.cdf(v).unwrap();
                let q = model.quantile(v).unwrap();
                assert!(c >= prev_c, "{name}: cdf decreases at {v}");
                assert!(q >= prev_q, "{name}: quantile decreases at {v}");
                assert!((0.0..=1.0).contains(&q));
                prev_c = c;
                prev_q = q;
            }
        }
    }

    #[test]
    fn galois_connection_on_grid() {
        // quantile(q) <= x  <=>  q <= cdf(x), up to rounding of the closed forms
        let slack = 1e-12;
        for (name, model) in shipped_presets() {
            for q in grid(200) {
                let inv = model.quantile(q).unwrap();
                for x in grid(200) {
                    let c = model.cdf(x).unwrap();
                    if inv <= x {
                        assert!(q <= c + slack, "{name}: q={q} x={x}");
                    }
                    if q <= c {
                        assert!(inv <= x + slack, "{name}: q={q} x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_on_continuous_regions() {
        let models = [
            QuantileModel::uniform(),
            QuantileModel::f_beta(0.0).unwrap(),
            QuantileModel::f_beta(1.0).unwrap(),
            QuantileModel::f_beta(2.0).unwrap(),
        ];
        for model in &models {
            for q in grid(1001).skip(1) {
                let back = model.cdf(model.quantile(q).unwrap()).unwrap();
                assert!((back - q).abs() <= 1e-9, "{model}: q={q} back={back}");
            }
        }
    }

    #[test]
    fn fbeta_flat_middle() {
        for beta in [0.0, 1.0, 2.0, 3.5] {
            let m = QuantileModel::f_beta(beta).unwrap();
            assert_eq!(m.cdf(0.0).unwrap(), 0.0);
            assert_eq!(m.cdf(1.0).unwrap(), 1.0);
            for x in grid(101).map(|t| 0.25 + 0.5 * t) {
                assert_eq!(m.cdf(x).unwrap(), 0.5);
            }
        }
    }

    #[test]
    fn bisection_agrees_with_closed_forms() {
        for (name, model) in shipped_presets() {
            for q in grid(257) {
                let closed = model.quantile(q).unwrap();
                let bisect = model.quantile_by_bisection(q).unwrap();
                let tol = if model.is_atomic() { 2e-12 } else { 1e-9 };
                // where the CDF is flat to machine precision the two can only
                // be compared through the CDF
                let flat = (model.cdf(bisect).unwrap() - q).abs() <= 4.0 * f64::EPSILON
                    && (model.cdf(closed).unwrap() - q).abs() <= 4.0 * f64::EPSILON;
                assert!((closed - bisect).abs() <= tol || flat, "{name}: q={q}");
            }
        }
    }

    #[test]
    fn discrete_gaps_are_cumulative_masses() {
        let m = QuantileModel::discrete(vec![0.1, 0.4, 0.8, 1.0], vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let g = m.gaps();
        assert_eq!(g.n_gaps(), 3);
        let want = [0.2, 0.5, 0.6];
        for (got, want) in g.interior().iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((g.epsilon0() - 0.1).abs() < 1e-15);
        assert_eq!(g.beta(), 0.0);
    }

    #[test]
    fn discrete_rejects_bad_masses() {
        assert!(QuantileModel::discrete(vec![0.1, 0.2], vec![0.5, 0.4]).is_err());
        assert!(QuantileModel::discrete(vec![0.2, 0.1], vec![0.5, 0.5]).is_err());
        assert!(QuantileModel::discrete(vec![0.1, 1.2], vec![0.5, 0.5]).is_err());
        assert!(QuantileModel::discrete(vec![0.1, 0.2], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn gap_structure_invariants() {
        assert!(GapStructure::new(vec![0.0, 0.5, 0.5, 1.0], 0.0, 0.1, 0.0).is_err());
        assert!(GapStructure::new(vec![0.1, 1.0], 0.0, 0.1, 0.0).is_err());
        assert!(GapStructure::new(vec![0.0, 0.2, 1.0], 0.0, 0.5, 0.0).is_err());
        let g = GapStructure::new(vec![0.0, 0.5, 1.0], 1.0, 0.5, 0.0).unwrap();
        assert_eq!(g.interior(), &[0.5]);
        assert!(g.share_closed_cell(0.5, 0.9));
        assert!(g.share_closed_cell(0.1, 0.5));
        assert!(!g.share_closed_cell(0.4, 0.6));
    }

    #[test]
    fn pwuniform_structure() {
        let m = QuantileModel::piecewise_uniform(vec![(0.0, 0.2), (0.5, 0.9)], vec![0.4, 0.6])
            .unwrap();
        assert_eq!(m.gaps().interior(), &[0.4]);
        assert!((m.cdf(0.1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(m.cdf(0.3).unwrap(), 0.4);
        assert!((m.quantile(0.7).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(m.quantile(0.4).unwrap(), 0.2);
        // touching intervals produce no gap
        let t = QuantileModel::piecewise_uniform(vec![(0.0, 0.5), (0.5, 1.0)], vec![0.3, 0.7])
            .unwrap();
        assert_eq!(t.gaps().n_gaps(), 0);
        assert!(
            QuantileModel::piecewise_uniform(vec![(0.0, 0.6), (0.5, 1.0)], vec![0.5, 0.5]).is_err()
        );
    }

    #[test]
    fn verify_clustered_examples() {
        let u = QuantileModel::uniform();
        assert!(verify_clustered(&u, 1e-12).unwrap().is_clean());
        let f1 = QuantileModel::f_beta(1.0).unwrap();
        assert_eq!(f1.gaps().quantiles(), &[0.0, 0.5, 1.0]);
        assert!(verify_clustered(&f1, 1e-12).unwrap().is_clean());

        let f2 = QuantileModel::f_beta(2.0).unwrap();
        // value gap right of the gap quantile: ((2e-6)^(1/3) - (2e-12)^(1/3)) / 4
        let q = 0.5 + 1e-6;
        let jump = f2.quantile(q).unwrap() - f2.quantile_right(0.5).unwrap();
        let want = ((2e-6f64).cbrt() - (2e-12f64).cbrt()) / 4.0;
        assert!((jump - want).abs() < 1e-9, "{jump} vs {want}");
        assert!(jump > 1e-6);
        let declared_flat = f2
            .clone()
            .with_gaps(f2.gaps().with_params(0.0, 0.5, 0.0).unwrap());
        let report = verify_clustered(&declared_flat, 1e-12).unwrap();
        assert!(!report.density_violations.is_empty());
        assert!(report.size_violations.is_empty());
    }

    #[test]
    fn verify_clustered_reports_size_violations() {
        let m = QuantileModel::uniform()
            .with_gaps(GapStructure::new(vec![0.0, 0.5, 1.0], 0.0, 0.5, 0.0).unwrap());
        // widen epsilon0 past what the cells allow by bypassing validation
        let mut gaps = m.gaps().clone();
        gaps.epsilon0 = 0.75;
        let m = m.with_gaps(gaps);
        let report = verify_clustered(&m, 1e-12).unwrap();
        assert_eq!(report.size_violations.len(), 2);
    }

    #[test]
    fn verify_clustered_rejects_narrow_cells() {
        let gaps = GapStructure::new(vec![0.0, 1e-10, 1.0], 0.0, 1e-10, 0.0).unwrap();
        let m = QuantileModel::uniform().with_gaps(gaps);
        assert!(matches!(verify_clustered(&m, 1e-12), Err(Error::Config(_))));
    }

    #[test]
    fn every_preset_is_clustered_as_declared() {
        for (name, model) in shipped_presets() {
            let report = verify_clustered(&model, 1e-12).unwrap();
            assert!(report.is_clean(), "{name}: {:?}", report.density_violations.first());
        }
    }

    #[test]
    fn preset_strings_parse() {
        assert_eq!("uniform".parse::<QuantileModel>().unwrap(), QuantileModel::uniform());
        assert_eq!(
            "fbeta:beta=2".parse::<QuantileModel>().unwrap(),
            QuantileModel::f_beta(2.0).unwrap()
        );
        let d: QuantileModel = "discrete:support=0.25,0.5,0.75;mass=0.25,0.5,0.25".parse().unwrap();
        assert_eq!(d.gaps().interior(), &[0.25, 0.75]);
        let p: QuantileModel = "pwuniform:intervals=(0,0.25),(0.75,1);weights=0.5,0.5"
            .parse()
            .unwrap();
        assert_eq!(p.gaps().interior(), &[0.5]);
        for bad in ["", "gauss", "fbeta", "fbeta:beta=x", "uniform:beta=1", "discrete:support=0.5"] {
            assert!(bad.parse::<QuantileModel>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for (_, model) in shipped_presets() {
            let back: QuantileModel = model.to_string().parse().unwrap();
            assert_eq!(back.kind(), model.kind());
        }
    }
}
