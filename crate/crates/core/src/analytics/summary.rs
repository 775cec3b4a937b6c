use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n − 1) p`). NaN for an empty sample.
pub fn quantile(samples: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = samples.to_vec();
    v.sort_by(f64::total_cmp);
    sorted_quantile(&v, p)
}

fn sorted_quantile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Counts scaled so that the histogram integrates to one.
    pub fn density(&self) -> Vec<f64> {
        let n: usize = self.counts.iter().sum();
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| {
                let w = e[1] - e[0];
                if n == 0 || w <= 0.0 {
                    0.0
                } else {
                    c as f64 / (n as f64 * w)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n − 1`); 0 for one sample.
    pub sd: f64,
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Histogram,
}

impl Summary {
    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|&(_, v)| v)
    }
}

pub const DEFAULT_QUANTILES: [f64; 3] = [0.05, 0.5, 0.95];

/// Moments, quantiles and an equal-width histogram over the sample range.
pub fn posterior_summary(samples: &[f64], probs: &[f64], bins: usize) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("summary of an empty sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("summary sample contains non-finite values".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput("quantile probabilities must lie in [0, 1]".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles = probs.iter().map(|&p| (p, sorted_quantile(&sorted, p))).collect();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 / bins as f64 };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Summary { n, mean, sd, quantiles, histogram: Histogram { edges, counts } })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample() {
        let s = posterior_summary(&[3.5], &DEFAULT_QUANTILES, 4).unwrap();
        assert_eq!(s.mean, 3.5);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.quantile(0.5), Some(3.5));
        assert_eq!(s.histogram.counts.iter().sum::<usize>(), 1);
    }

    #[test]
    fn two_point_mean() {
        assert_eq!(posterior_summary(&[0.0, 1.0], &[], 2).unwrap().mean, 0.5);
    }

    #[test]
    fn uniform_grid_quantiles() {
        let v: Vec<f64> = (0..=1000).rev().map(|k| k as f64 / 1000.0).collect();
        let s = posterior_summary(&v, &[0.05, 0.95], 10).unwrap();
        assert!((s.quantile(0.05).unwrap() - 0.05).abs() <= 1e-3);
        assert!((s.quantile(0.95).unwrap() - 0.95).abs() <= 1e-3);
        assert_eq!(s.histogram.counts.iter().sum::<usize>(), 1001);
        let dens: f64 = s.histogram.density().iter().map(|d| d * 0.1).sum();
        assert!((dens - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty() {
        assert!(posterior_summary(&[], &[], 3).is_err());
        assert!(quantile(&[], 0.5).is_nan());
    }
}
