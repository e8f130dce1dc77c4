//! Binned error analysis and the jackknife.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest bins accepted for an error bar.
pub const MIN_BINS: usize = 16;

/// Time series of one observable, kept per chain so bins never straddle
/// two chains. Merging appends chains and is associative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAccumulator {
    chains: Vec<Vec<f64>>,
}

impl EstimatorAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new chain; later pushes go to it.
    pub fn start_chain(&mut self) {
        self.chains.push(Vec::new());
    }

    pub fn push(&mut self, x: f64) {
        if self.chains.is_empty() {
            self.start_chain();
        }
        self.chains.last_mut().expect("a chain").push(x);
    }

    pub fn merge(mut self, other: EstimatorAccumulator) -> Self {
        self.chains.extend(other.chains);
        self
    }

    pub fn len(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn mean(&self) -> f64 {
        self.chains.iter().flatten().sum::<f64>() / self.len() as f64
    }

    /// Bin means at the given bin size; a chain's incomplete tail is dropped.
    pub fn bins(&self, bin_size: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.chunks_exact(bin_size).map(|b| b.iter().sum::<f64>() / bin_size as f64))
            .collect()
    }

    /// Standard error from bin means at each bin size `1, 2, 4, …` that
    /// still leaves at least [`MIN_BINS`] bins; the largest value is
    /// reported (the plateau of the binning curve, or a conservative bound
    /// when no plateau is reached).
    pub fn standard_error(&self) -> Result<f64> {
        let mut best: Option<f64> = None;
        let mut size = 1;
        loop {
            let bins = self.bins(size);
            if bins.len() < MIN_BINS {
                break;
            }
            let se = sample_sd(&bins) / (bins.len() as f64).sqrt();
            best = Some(best.map_or(se, |b: f64| b.max(se)));
            size *= 2;
        }
        best.ok_or_else(|| {
            Error::InsufficientSamples(format!("{} samples cannot form {MIN_BINS} bins", self.len()))
        })
    }

    /// Bin size at which the binning curve peaks.
    pub fn plateau_bin_size(&self) -> usize {
        let mut best = (0.0, 1);
        let mut size = 1;
        loop {
            let bins = self.bins(size);
            if bins.len() < MIN_BINS {
                break;
            }
            let se = sample_sd(&bins) / (bins.len() as f64).sqrt();
            if se > best.0 {
                best = (se, size);
            }
            size *= 2;
        }
        best.1
    }

    pub fn estimate(&self) -> Result<Estimate> {
        Ok(Estimate { mean: self.mean(), stderr: self.standard_error()?, samples: self.len() })
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Mean with standard error and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    /// `|a - b|` in units of the combined standard error.
    pub fn z_score(&self, other: f64) -> f64 {
        (self.mean - other).abs() / self.stderr
    }
}

/// Jackknife of `f(means of the series)` over bins. All series must have
/// the same chain structure; the bin size is the largest plateau size among
/// them, capped so that at least [`MIN_BINS`] bins remain.
pub fn jackknife(series: &[&EstimatorAccumulator], f: impl Fn(&[f64]) -> f64) -> Result<Estimate> {
    let first = series.first().ok_or_else(|| Error::InvalidParameter("no series".into()))?;
    if series.iter().any(|s| s.chains.iter().map(Vec::len).ne(first.chains.iter().map(Vec::len))) {
        return Err(Error::DimensionMismatch("jackknife series are not aligned".into()));
    }
    let mut size = series.iter().map(|s| s.plateau_bin_size()).max().unwrap_or(1);
    while size > 1 && first.bins(size).len() < MIN_BINS {
        size /= 2;
    }
    let binned: Vec<Vec<f64>> = series.iter().map(|s| s.bins(size)).collect();
    let nb = binned[0].len();
    if nb < MIN_BINS {
        return Err(Error::InsufficientSamples(format!("{} samples cannot form {MIN_BINS} bins", first.len())));
    }
    let totals: Vec<f64> = binned.iter().map(|b| b.iter().sum()).collect();
    let full: Vec<f64> = totals.iter().map(|t| t / nb as f64).collect();
    let value = f(&full);
    let leave_out: Vec<f64> = (0..nb)
        .map(|i| {
            let means: Vec<f64> = binned.iter().zip(&totals).map(|(b, t)| (t - b[i]) / (nb - 1) as f64).collect();
            f(&means)
        })
        .collect();
    let mean_lo = leave_out.iter().sum::<f64>() / nb as f64;
    let var = leave_out.iter().map(|x| (x - mean_lo).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    // bias-corrected estimate
    let corrected = nb as f64 * value - (nb - 1) as f64 * mean_lo;
    Ok(Estimate { mean: corrected, stderr: var.sqrt(), samples: first.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iid(n: usize, seed: u64) -> EstimatorAccumulator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = EstimatorAccumulator::new();
        for _ in 0..n {
            acc.push(rng.gen::<f64>());
        }
        acc
    }

    #[test]
    fn iid_error_matches_theory() {
        let acc = iid(65_536, 1);
        let se = acc.standard_error().unwrap();
        let theory = (1.0f64 / 12.0).sqrt() / 256.0;
        assert!((se / theory - 1.0).abs() < 0.25, "{se} vs {theory}");
        assert!((acc.mean() - 0.5).abs() < 4.0 * theory);
    }

    #[test]
    fn correlated_series_gets_larger_error() {
        // AR(1) with ρ = 0.9: integrated autocorrelation time 19
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut acc = EstimatorAccumulator::new();
        let mut x = 0.0;
        for _ in 0..1 << 16 {
            x = 0.9 * x + rng.gen::<f64>() - 0.5;
            acc.push(x);
        }
        let naive = sample_sd(&acc.bins(1)) / (acc.len() as f64).sqrt();
        let se = acc.standard_error().unwrap();
        assert!(se / naive > 3.0, "{}", se / naive);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(iid(15, 2).standard_error(), Err(Error::InsufficientSamples(_))));
        assert!(iid(16, 2).standard_error().is_ok());
    }

    #[test]
    fn jackknife_of_linear_function_is_the_mean() {
        let a = iid(1024, 3);
        let j = jackknife(&[&a], |m| m[0]).unwrap();
        assert!((j.mean - a.mean()).abs() < 1e-12);
        // variance of a uniform is 1/12
        let mut sq = EstimatorAccumulator::new();
        for x in a.bins(1) {
            sq.push(x * x);
        }
        let var = jackknife(&[&a, &sq], |m| m[1] - m[0] * m[0]).unwrap();
        assert!((var.mean - 1.0 / 12.0).abs() < 3.0 * var.stderr + 1e-3);
    }

    proptest! {
        #[test]
        fn merge_is_associative(a in proptest::collection::vec(-1.0f64..1.0, 0..40),
                                b in proptest::collection::vec(-1.0f64..1.0, 0..40),
                                c in proptest::collection::vec(-1.0f64..1.0, 0..40)) {
            let make = |xs: &Vec<f64>| {
                let mut acc = EstimatorAccumulator::new();
                acc.start_chain();
                xs.iter().for_each(|&x| acc.push(x));
                acc
            };
            let left = make(&a).merge(make(&b)).merge(make(&c));
            let right = make(&a).merge(make(&b).merge(make(&c)));
            prop_assert_eq!(left, right);
        }
    }
}
