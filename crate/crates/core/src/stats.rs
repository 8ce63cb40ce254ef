//! Small numerical helpers shared by the oracles and the harness.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    /// Two-pass estimate over `samples`, summed in slice order so the result
    /// depends only on the sample order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let count = samples.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                count,
            };
        }
        let mean = samples.iter().copied().collect::<CompensatedSum>().value() / count as f64;
        let stderr = if count < 2 {
            f64::NAN
        } else {
            let ss = samples
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .collect::<CompensatedSum>()
                .value();
            (ss / (count - 1) as f64 / count as f64).sqrt()
        };
        Self {
            mean,
            stderr,
            count,
        }
    }

    /// Frequency estimate for a 0/1 indicator observed `hits` times out of
    /// `count`, with the binomial standard error `sqrt(p(1-p)/n)`.
    pub fn from_frequency(hits: usize, count: usize) -> Self {
        if count == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                count,
            };
        }
        let p = hits as f64 / count as f64;
        Self {
            mean: p,
            stderr: (p * (1.0 - p) / count as f64).sqrt(),
            count,
        }
    }
}
