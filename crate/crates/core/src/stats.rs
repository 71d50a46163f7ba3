//! Sample statistics used by the estimators.

use crate::rng::{substream, Purpose};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Mean, shifted by the first sample so that constant data give it exactly.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else { return f64::NAN };
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolated quantile.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Kolmogorov–Smirnov distance to `N(mu, var)`.
pub fn ks_normal(xs: &[f64], mu: f64, var: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let dist = Normal::new(mu, var.sqrt()).expect("positive variance");
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = dist.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Percentile bootstrap CI of a statistic.
pub fn bootstrap_ci(
    xs: &[f64],
    stat: impl Fn(&[f64]) -> f64,
    resamples: usize,
    level: f64,
    seed: u64,
) -> (f64, f64) {
    let n = xs.len();
    let mut rng = substream(seed, Purpose::Bootstrap, 0);
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    (quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha))
}

/// Percentile bootstrap CI of the covariance of paired samples.
pub fn bootstrap_cov_ci(xs: &[f64], ys: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    let n = xs.len();
    let mut rng = substream(seed, Purpose::Bootstrap, 1);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for i in 0..n {
                let j = rng.random_range(0..n);
                bx[i] = xs[j];
                by[i] = ys[j];
            }
            covariance(&bx, &by)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    (quantile_sorted(&stats, alpha), quantile_sorted(&stats, 1.0 - alpha))
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Chi-square p-value of uniformity of angles in `[0, 2π)` over `bins` bins.
pub fn chi_square_uniform_angles(angles: &[f64], bins: usize) -> (f64, f64) {
    let mut counts = vec![0usize; bins];
    for &a in angles {
        let b = ((a / std::f64::consts::TAU) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let e = angles.len() as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    (chi2, p)
}

/// Least-squares fit `y = a x + b`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// Empirical `P(a ≤ X ≤ b)`.
pub fn interval_mass(xs: &[f64], a: f64, b: f64) -> f64 {
    xs.iter().filter(|&&x| x >= a && x <= b).count() as f64 / xs.len() as f64
}

/// Largest difference of interval probabilities over all `[a, b]` with endpoints on `grid`.
pub fn interval_discrepancy(xs: &[f64], ys: &[f64], grid: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i + 1..] {
            worst = worst.max((interval_mass(xs, a, b) - interval_mass(ys, a, b)).abs());
        }
    }
    worst
}
