//! Entropy, histograms and empirical CDFs, with CSV/JSON emission.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::entropy::Distribution;
use crate::{Error, Result};

/// Largest CDF emitted by [`EmpiricalCdf::downsample`] callers by default.
pub const MAX_PLOT_POINTS: usize = 10_000;

/// `H = sum p log2(1/p)`, with `0 log 0 = 0`.
pub fn shannon_entropy(dist: &Distribution) -> f64 {
    dist.probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Normalized frequencies of `values` over `0..alphabet_bound`; values at or
/// above the bound are counted in the last slot, which then acts as escape.
pub fn histogram(values: &[u64], alphabet_bound: usize) -> Result<Distribution> {
    if alphabet_bound == 0 {
        return Err(Error::InvalidDistribution("alphabet bound is zero".into()));
    }
    Distribution::from_counts(&counts(values, alphabet_bound))
}

pub fn counts(values: &[u64], alphabet_bound: usize) -> Vec<u64> {
    let mut counts = vec![0u64; alphabet_bound];
    for &v in values {
        let slot = (v as usize).min(alphabet_bound - 1);
        counts[slot] += 1;
    }
    counts
}

/// Sorted observations `v[i]` paired with `i / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub points: Vec<(u64, f64)>,
}

pub fn empirical_cdf(values: &[u64]) -> Result<EmpiricalCdf> {
    if values.is_empty() {
        return Err(Error::EmptyInput("empirical CDF of no values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    Ok(EmpiricalCdf {
        points: sorted
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, (i + 1) as f64 / n))
            .collect(),
    })
}

impl EmpiricalCdf {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fraction of observations equal to `value` (the CDF jump there).
    pub fn jump_at(&self, value: u64) -> f64 {
        let first = self.points.partition_point(|&(v, _)| v < value);
        let end = self.points.partition_point(|&(v, _)| v <= value);
        if first == end {
            return 0.0;
        }
        let before = if first == 0 { 0.0 } else { self.points[first - 1].1 };
        self.points[end - 1].1 - before
    }

    /// Keeps at most `max_points` points at evenly spaced quantiles; the
    /// last point (fraction 1.0) is always kept.
    pub fn downsample(&self, max_points: usize) -> EmpiricalCdf {
        let n = self.points.len();
        if max_points == 0 || n <= max_points {
            return self.clone();
        }
        let points = (1..=max_points)
            .map(|j| self.points[(j * n).div_ceil(max_points) - 1])
            .collect();
        EmpiricalCdf { points }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "value,fraction")?;
        for &(v, f) in &self.points {
            writeln!(w, "{v},{f}")?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }
}

/// `symbol,probability` rows.
pub fn write_distribution_csv<W: Write>(dist: &Distribution, mut w: W) -> Result<()> {
    writeln!(w, "value,probability")?;
    for (s, p) in dist.probs().iter().enumerate() {
        writeln!(w, "{s},{p}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::PULSES_FREQUENCIES;

    #[test]
    fn entropy_values() {
        let half = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(shannon_entropy(&half), 1.0);
        assert_eq!(shannon_entropy(&Distribution::new(vec![1.0]).unwrap()), 0.0);
        let pulses = Distribution::from_weights(&PULSES_FREQUENCIES).unwrap();
        assert!((shannon_entropy(&pulses) - 0.74).abs() < 0.005);
        for k in 0..10 {
            let u = Distribution::uniform(1 << k).unwrap();
            assert!((shannon_entropy(&u) - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_permutation_invariant() {
        let a = Distribution::from_weights(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = Distribution::from_weights(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert!((shannon_entropy(&a) - shannon_entropy(&b)).abs() < 1e-12);
    }

    #[test]
    fn cdf_basics() {
        assert_eq!(empirical_cdf(&[5]).unwrap().points, vec![(5, 1.0)]);
        let c = empirical_cdf(&[4, 2, 3, 1]).unwrap();
        let fr: Vec<f64> = c.points.iter().map(|p| p.1).collect();
        assert_eq!(fr, vec![0.25, 0.5, 0.75, 1.0]);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn cdf_zero_jump() {
        // 10000 zeros among 56385 values
        let mut values = vec![0u64; 10_000];
        values.extend((1..=46_385u64).map(|i| i * 37));
        let c = empirical_cdf(&values).unwrap();
        assert!((c.jump_at(0) - 10_000.0 / 56_385.0).abs() < 1e-12);
        assert_eq!(c.jump_at(1), 0.0);
        assert_eq!(c.points.last().unwrap().1, 1.0);
    }

    #[test]
    fn downsample_preserves_quantiles() {
        let values: Vec<u64> = (0..100_000).collect();
        let c = empirical_cdf(&values).unwrap();
        let d = c.downsample(MAX_PLOT_POINTS);
        assert_eq!(d.len(), MAX_PLOT_POINTS);
        assert_eq!(d.points.last().unwrap().1, 1.0);
        assert!(d.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(d.points[4999], (49_999, 0.5));
    }

    #[test]
    fn histogram_cases() {
        let h = histogram(&[0, 1, 2, 3], 4).unwrap();
        assert_eq!(h.probs(), &[0.25; 4]);
        let point = histogram(&[2, 2, 2], 4).unwrap();
        assert_eq!(point.probs(), &[0.0, 0.0, 1.0, 0.0]);
        let escaped = histogram(&[0, 9, 12], 10).unwrap();
        assert!((escaped.prob(9) - 2.0 / 3.0).abs() < 1e-12);

        // counts proportional to the reference pulses frequencies
        let mut values = Vec::new();
        for (v, p) in PULSES_FREQUENCIES.iter().enumerate() {
            let n = (p * 1e6).round() as usize;
            values.extend(std::iter::repeat_n(v as u64, n));
        }
        let h = histogram(&values, 9).unwrap();
        let reference = Distribution::from_weights(&PULSES_FREQUENCIES).unwrap();
        for (a, b) in h.probs().iter().zip(reference.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_output() {
        let mut out = Vec::new();
        empirical_cdf(&[1, 2]).unwrap().write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "value,fraction\n1,0.5\n2,1\n");
    }
}
