//! Estimators shared by the experiments: streaming moments, regressions,
//! goodness-of-fit statistics and the index-½ stable law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;

/// Welford accumulator; `merge` combines partial results in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Named point estimate with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Slope of a least-squares line through the origin.
pub fn slope_through_origin(xs: &[f64], ys: &[f64]) -> f64 {
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    sxy / sxx
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One-sample Kolmogorov-Smirnov distance between the empirical law of
/// `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    ks_distance_censored(samples, samples.len(), f64::INFINITY, cdf)
}

/// KS distance restricted to `(-∞, limit]` when `total − observed.len()`
/// further samples are only known to exceed `limit`. All `observed` values
/// must be `≤ limit`.
pub fn ks_distance_censored<F: Fn(f64) -> f64>(
    observed: &[f64],
    total: usize,
    limit: f64,
    cdf: F,
) -> f64 {
    let mut v = observed.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = total as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    if limit.is_finite() {
        d = d.max((cdf(limit) - v.len() as f64 / n).abs());
    }
    d
}

/// Survival function of the first-passage law with density
/// `e^{−1/(2x)}/√(2πx³)`: `P(X > t) = erf(1/√(2t))`.
pub fn stable_half_survival(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        erf(1.0 / (2.0 * t).sqrt())
    }
}

/// Median of the law above, the root of `erf(1/√(2t)) = ½`.
pub fn stable_half_median() -> f64 {
    // erf⁻¹(½) = 0.476936276204469873...
    let x = 0.476_936_276_204_469_9_f64;
    1.0 / (2.0 * x * x)
}

/// Anderson-Darling statistic for normality with estimated mean and
/// variance, including the small-sample correction `1 + 0.75/n + 2.25/n²`.
pub fn anderson_darling_normal(samples: &[f64]) -> f64 {
    let n = samples.len();
    let stats: RunningStats = samples.iter().copied().collect();
    let sd = stats.variance().sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut z: Vec<f64> = samples.iter().map(|x| (x - stats.mean) / sd).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = normal.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let hi = normal.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        s += (2.0 * (i + 1) as f64 - 1.0) * (lo.ln() + (1.0 - hi).ln());
    }
    let a2 = -nf - s / nf;
    a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf))
}

/// Critical value of the corrected statistic at the 1% level.
pub const AD_CRITICAL_1PCT: f64 = 1.035;

/// Sample autocorrelations `ρ(0..=max_lag)` of a stationary series.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|k| {
            let c: f64 = xs[..n - k]
                .iter()
                .zip(&xs[k..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum();
            c / (n as f64 * var)
        })
        .collect()
}
