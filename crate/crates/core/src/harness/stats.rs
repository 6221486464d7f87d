//! Small order-fixed accumulators.

use serde::Serialize;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// First and second moments of a sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn summary(&self) -> MeanEstimate {
        MeanEstimate { mean: self.mean(), std_error: self.std_error() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Normal-approximation 95% interval for a binomial proportion, clipped to
/// [0, 1]. Returns `(p_hat, half_width, [lo, hi])`.
pub fn binomial_ci95(errors: u64, trials: u64) -> (f64, f64, [f64; 2]) {
    if trials == 0 {
        return (f64::NAN, f64::NAN, [0.0, 1.0]);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let half = 1.959_963_984_540_054 * (p * (1.0 - p) / n).sqrt();
    (p, half, [(p - half).max(0.0), (p + half).min(1.0)])
}
