//! Summary statistics, percentile bootstrap and log-spaced histograms for
//! benchmark aggregation.

use rand::Rng;

use crate::error::{CoreError, Result};

/// Five-number summary plus mean and standard deviation (population).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

/// Linear-interpolation percentile of pre-sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

pub fn summarize(samples: &[f64]) -> Result<SummaryStats> {
    if samples.is_empty() {
        return Err(CoreError::InvalidInput(
            "cannot summarize an empty sample".into(),
        ));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        n,
        mean,
        std: var.sqrt(),
        min: sorted[0],
        p25: percentile(&sorted, 0.25),
        median: percentile(&sorted, 0.5),
        p75: percentile(&sorted, 0.75),
        max: sorted[n - 1],
    })
}

/// Percentile bootstrap confidence interval for the mean: resamples with
/// replacement `n_resamples` times and returns the `(1-level)/2` and
/// `(1+level)/2` quantiles of the resampled means.
pub fn bootstrap_ci<R: Rng>(
    samples: &[f64],
    n_resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(CoreError::InvalidInput(
            "bootstrap needs at least two samples".into(),
        ));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(CoreError::InvalidInput(
            "confidence level must lie in [0, 1)".into(),
        ));
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Ok((first, first));
    }
    let n = samples.len();
    let mut means = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += samples[rng.gen_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let lo = percentile(&means, (1.0 - level) / 2.0);
    let hi = percentile(&means, (1.0 + level) / 2.0);
    Ok((lo, hi))
}

/// Histogram over logarithmically spaced bins.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    /// `n_bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// 30 log-spaced bins spanning the sample range padded by one decade on each
/// side. Non-positive samples are clamped to `1e-18` before binning.
pub fn log_histogram(samples: &[f64], n_bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(CoreError::InvalidInput(
            "cannot histogram an empty sample".into(),
        ));
    }
    const FLOOR: f64 = 1e-18;
    let clamped: Vec<f64> = samples
        .iter()
        .map(|&x| if x.is_finite() { x.max(FLOOR) } else { f64::MAX })
        .collect();
    let lo = clamped.iter().cloned().fold(f64::INFINITY, f64::min) / 10.0;
    let hi = clamped
        .iter()
        .cloned()
        .filter(|x| *x != f64::MAX)
        .fold(f64::NEG_INFINITY, f64::max)
        * 10.0;
    let (lo, hi) = if hi <= lo { (lo, lo * 100.0) } else { (lo, hi) };
    let log_lo = lo.log10();
    let log_hi = hi.log10();
    let edges: Vec<f64> = (0..=n_bins)
        .map(|k| 10f64.powf(log_lo + (log_hi - log_lo) * k as f64 / n_bins as f64))
        .collect();
    let mut counts = vec![0usize; n_bins];
    for &x in &clamped {
        if x == f64::MAX {
            counts[n_bins - 1] += 1;
            continue;
        }
        let pos = ((x.log10() - log_lo) / (log_hi - log_lo) * n_bins as f64).floor();
        let idx = (pos as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn summary_orders_percentiles() {
        let mut rng = rng_from_seed(0);
        let samples: Vec<f64> = (0..500).map(|_| rng.gen_range(-3.0..7.0)).collect();
        let s = summarize(&samples).unwrap();
        assert!(s.min <= s.p25 && s.p25 <= s.median && s.median <= s.p75 && s.p75 <= s.max);
    }

    #[test]
    fn identical_samples_give_degenerate_interval() {
        let mut rng = rng_from_seed(1);
        let samples = vec![0.37; 10];
        let (lo, hi) = bootstrap_ci(&samples, 200, 0.95, &mut rng).unwrap();
        assert_eq!((lo, hi), (0.37, 0.37));
    }

    #[test]
    fn level_zero_collapses_to_the_bootstrap_median() {
        let mut rng = rng_from_seed(2);
        let samples: Vec<f64> = (0..40).map(|k| k as f64).collect();
        let (lo, hi) = bootstrap_ci(&samples, 500, 0.0, &mut rng).unwrap();
        assert_eq!(lo, hi);
    }

    #[test]
    fn normal_interval_width_matches_theory() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rng_from_seed(3);
        let samples: Vec<f64> = (0..1000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let (lo, hi) = bootstrap_ci(&samples, 2000, 0.95, &mut rng).unwrap();
        let width = hi - lo;
        let theory = 2.0 * 1.96 / (1000f64).sqrt();
        assert!(
            (width - theory).abs() / theory < 0.2,
            "width {width} vs {theory}"
        );
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let mut rng = rng_from_seed(4);
        assert!(bootstrap_ci(&[1.0], 100, 0.95, &mut rng).is_err());
    }

    #[test]
    fn histogram_covers_all_samples() {
        let samples: Vec<f64> = vec![1e-4, 3e-3, 0.5, 2.0, 750.0];
        let h = log_histogram(&samples, 30).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), samples.len());
        assert_eq!(h.edges.len(), 31);
        assert!(h.edges[0] <= 1e-5 * 1.0001);
        assert!(h.edges[30] >= 7500.0 * 0.9999);
    }
}
