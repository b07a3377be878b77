//! Small statistics helpers shared by the estimators: streaming moments,
//! batch-means standard errors and least-squares slope fits.

/// Streaming mean/variance accumulator (Welford).
#[derive(Clone, Debug, Default)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count as f64 - 1.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean, assuming independent samples.
    pub fn standard_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.std_dev() / (self.count as f64).sqrt()
    }
}

/// Mean and batch-means standard error of a correlated series.
///
/// Splitting into contiguous batches makes the batch means approximately
/// independent when the batch length exceeds the correlation time.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.max(2).min(n);
    if n < 2 * b {
        let mut s = RunningStats::new();
        for &v in values {
            s.push(v);
        }
        return (mean, s.standard_error());
    }
    let len = n / b;
    let mut stats = RunningStats::new();
    for i in 0..b {
        let chunk = &values[i * len..(i + 1) * len];
        stats.push(chunk.iter().sum::<f64>() / len as f64);
    }
    (mean, stats.standard_error())
}

/// Least-squares line fit; returns (slope, intercept).
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
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

/// Residual-based standard error of the fitted slope.
pub fn slope_standard_error(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return f64::NAN;
    }
    let (slope, intercept) = linear_fit(xs, ys);
    let mx = xs.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    (ss_res / (n as f64 - 2.0) / sxx).sqrt()
}

/// Standard errors of independent estimates add in quadrature.
pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}
