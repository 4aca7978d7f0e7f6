//! Small numerical summaries of draw matrices: moments, quantiles, batch-means
//! Monte Carlo standard errors, and histograms.

use nalgebra::DMatrix;
use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with divisor n - 1.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Moment skewness m3 / m2^(3/2); zero for constant data.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Quantile with linear interpolation between order statistics (R type 7).
/// `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(xs: &[f64], ps: &[f64]) -> Vec<f64> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    ps.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

/// Column `j` of a row-major draw matrix.
pub fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

pub fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let q = rows.first().map_or(0, Vec::len);
    (0..q).map(|j| mean(&column(rows, j))).collect()
}

/// Sample covariance matrix (divisor n - 1) of row-major draws.
pub fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let q = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    let mu = column_means(rows);
    let mut c = DMatrix::zeros(q, q);
    if n < 2 {
        return c;
    }
    for r in rows {
        for a in 0..q {
            let da = r[a] - mu[a];
            for b in a..q {
                c[(a, b)] += da * (r[b] - mu[b]);
            }
        }
    }
    for a in 0..q {
        for b in a..q {
            let v = c[(a, b)] / (n - 1) as f64;
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    c
}

/// Number of batches used by the batch-means estimators: about sqrt(n),
/// at least 2 whenever there are at least 2 draws.
pub(crate) fn n_batches(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).clamp(2.min(n), n.max(1))
}

/// Batch-means estimate of the covariance of the sample mean of a
/// (possibly autocorrelated) draw sequence. Trailing draws that do not fill a
/// batch are ignored.
pub fn batch_means_cov(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let q = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    let b = n_batches(n);
    if b < 2 {
        return DMatrix::zeros(q, q);
    }
    let size = n / b;
    let means: Vec<Vec<f64>> = (0..b).map(|k| column_means(&rows[k * size..(k + 1) * size])).collect();
    // Var(batch mean) / b estimates Var(overall mean).
    covariance(&means) / b as f64
}

/// Batch-means Monte Carlo standard error of the mean of a scalar sequence.
pub fn mcse(xs: &[f64]) -> f64 {
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    batch_means_cov(&rows)[(0, 0)].max(0.0).sqrt()
}

/// log(sum(exp(xs))) without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Kish effective sample size of weights given on the log scale.
pub fn ess_from_log_weights(lw: &[f64]) -> f64 {
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = lw.iter().fold((0.0, 0.0), |(a, b), x| {
        let w = (x - m).exp();
        (a + w, b + w * w)
    });
    if s2 == 0.0 {
        0.0
    } else {
        s1 * s1 / s2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// Bin edges, one more than the number of bins.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Spacing of a lattice supporting all the sorted values, if there is one.
fn lattice_step(sorted: &[f64]) -> Option<f64> {
    let lo = sorted[0];
    let step = sorted.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 1e-9).fold(f64::INFINITY, f64::min);
    if !step.is_finite() {
        return Some(1.0);
    }
    let on = |x: f64| {
        let k = (x - lo) / step;
        (k - k.round()).abs() < 1e-6
    };
    (step >= 1e-6 && sorted.iter().all(|&x| on(x))).then_some(step)
}

impl Histogram {
    /// Freedman-Diaconis binning. When the values sit on a lattice (integers,
    /// half-integers, ...) the width is rounded up to a multiple of its
    /// spacing and bins are centred on lattice points,
    /// so no bin is empty merely because of discreteness.
    pub fn freedman_diaconis(xs: &[f64]) -> Histogram {
        assert!(!xs.is_empty(), "histogram of empty data");
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let n = xs.len() as f64;
        let mut width = 2.0 * iqr / n.cbrt();
        let step = lattice_step(&sorted);
        if let Some(step) = step {
            width = (width / step).ceil().max(1.0) * step;
        } else if width <= 0.0 {
            width = if hi > lo { (hi - lo) / n.sqrt().ceil() } else { 1.0 };
        }
        let start = match step {
            Some(step) => lo - 0.5 * step,
            None => lo,
        };
        let bins = (((hi - start) / width).floor() as usize + 1).max(1);
        let edges: Vec<f64> = (0..=bins).map(|k| start + k as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &x in xs {
            let k = (((x - start) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the bin containing `x`, if any.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.edges[0] || x > *self.edges.last().unwrap() {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k.saturating_sub(1).min(self.counts.len() - 1))
    }

    /// Local maxima holding at least `min_frac` of the tallest bin. Plateaus
    /// count once, at their first bin.
    pub fn modes(&self, min_frac: f64) -> Vec<usize> {
        let c = &self.counts;
        let top = *c.iter().max().unwrap_or(&0) as f64;
        let mut out = Vec::new();
        let mut i = 0;
        while i < c.len() {
            let mut j = i;
            while j + 1 < c.len() && c[j + 1] == c[i] {
                j += 1;
            }
            let left_ok = i == 0 || c[i - 1] < c[i];
            let right_ok = j + 1 == c.len() || c[j + 1] < c[i];
            if left_ok && right_ok && c[i] > 0 && c[i] as f64 >= min_frac * top {
                out.push(i);
            }
            i = j + 1;
        }
        out
    }

    /// Bimodality test: some pair of adjacent significant modes is separated
    /// by a valley lower than `ratio` times the smaller of the two peaks.
    pub fn is_bimodal(&self, ratio: f64) -> bool {
        let modes = self.modes(0.1);
        modes.windows(2).any(|w| {
            let valley = self.counts[w[0]..=w[1]].iter().min().copied().unwrap_or(0) as f64;
            let smaller = self.counts[w[0]].min(self.counts[w[1]]) as f64;
            valley < ratio * smaller
        })
    }
}
