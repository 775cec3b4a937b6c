//! Convergence diagnostics: split-R̂ and effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::sampler::AcceptanceReport;
use super::store::PosteriorStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostic {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// `None` with fewer than two chains or fewer than four draws per chain.
    pub rhat: Option<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub parameters: Vec<ParameterDiagnostic>,
    pub acceptance: Vec<AcceptanceReport>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.parameters.iter().filter_map(|p| p.rhat).filter(|r| r.is_finite()).reduce(f64::max)
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.parameters.iter().map(|p| p.ess).filter(|e| e.is_finite()).reduce(f64::min)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 { x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

/// Potential scale reduction with each chain split in half.
///
/// Returns `None` when fewer than two half-chains of length two exist.
/// Constant draws give 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.iter().map(Vec::len).min()? / 2;
    if n < 2 || chains.is_empty() {
        return None;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let off = c.len() - 2 * n;
            [&c[off..off + n], &c[off + n..]]
        })
        .collect();
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let b = n as f64 * mean_var(&means).1;
    if w == 0.0 {
        return Some(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Some((var_plus / w).sqrt())
}

/// Biased (divide by n) autocovariance at every lag, via FFT.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let nfft = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(nfft, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(nfft).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (nfft as f64 * n as f64)).collect()
}

/// Multi-chain effective sample size using Geyer's initial monotone
/// sequence estimator on the combined autocorrelation.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let n = match chains.iter().map(Vec::len).min() {
        Some(n) if n >= 4 => n,
        _ => return f64::NAN,
    };
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[c.len() - n..]).collect();
    let m = chains.len();
    let acovs: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c)).collect();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let nf = n as f64;
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    if w == 0.0 {
        return f64::NAN;
    }
    let b = if m > 1 { nf * mean_var(&stats.iter().map(|s| s.0).collect::<Vec<_>>()).1 } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    let rho = |t: usize| {
        let mean_acov = acovs.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };
    let mut pairs = Vec::new();
    let mut t = 0;
    while t + 1 < n {
        let p = rho(t) + rho(t + 1);
        if p <= 0.0 {
            break;
        }
        pairs.push(p);
        t += 2;
    }
    for k in 1..pairs.len() {
        if pairs[k] > pairs[k - 1] {
            pairs[k] = pairs[k - 1];
        }
    }
    let tau = (-1.0 + 2.0 * pairs.iter().sum::<f64>()).max(1.0 / (m as f64 * nf).log10().max(1.0));
    m as f64 * nf / tau
}

/// Posterior moments, split-R̂ and ESS for every scalar in the store.
pub fn diagnostics(store: &PosteriorStore) -> Diagnostics {
    let layout = store.layout();
    let flat: Vec<Vec<f64>> = store.draws().iter().map(|d| d.to_vec()).collect();
    let per_chain = store.draws_per_chain();
    let parameters = layout
        .into_iter()
        .enumerate()
        .map(|(k, name)| {
            let chains: Vec<Vec<f64>> = (0..store.n_chains())
                .map(|c| flat[c * per_chain..(c + 1) * per_chain].iter().map(|d| d[k]).collect())
                .collect();
            let all: Vec<f64> = chains.iter().flatten().copied().collect();
            let (mean, var) = if all.is_empty() { (f64::NAN, f64::NAN) } else { mean_var(&all) };
            let rhat = if chains.len() >= 2 { split_rhat(&chains) } else { None };
            ParameterDiagnostic { name, mean, sd: var.sqrt(), rhat, ess: effective_sample_size(&chains) }
        })
        .collect();
    Diagnostics { parameters, acceptance: store.manifest().acceptance.clone() }
}
