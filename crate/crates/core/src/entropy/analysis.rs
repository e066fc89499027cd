//! Coding loss of a tANS automaton under an i.i.d. source.

use crate::entropy::{Distribution, TansAutomaton};
use crate::stats::shannon_entropy;
use crate::{Error, Result};

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

/// Probability of visiting each state `x = L + i` when symbols are drawn
/// i.i.d. from `dist` and fed to the encoder.
///
/// Iterates the lazy chain `(P + I) / 2`, which has the same stationary
/// distribution as `P` but is aperiodic, from the uniform start until the
/// total-variation change drops below 1e-12.
pub fn stationary_distribution(automaton: &TansAutomaton, dist: &Distribution) -> Result<Vec<f64>> {
    let transitions = transitions(automaton, dist)?;
    let l = automaton.table_size() as usize;
    let mut rho = vec![1.0 / l as f64; l];
    let mut next = vec![0.0; l];
    for _ in 0..MAX_ITERATIONS {
        next.iter_mut().zip(&rho).for_each(|(n, r)| *n = 0.5 * r);
        for (x, row) in transitions.iter().enumerate() {
            let mass = 0.5 * rho[x];
            for &(p, y) in row {
                next[y] += mass * p;
            }
        }
        let change: f64 = 0.5 * next.iter().zip(&rho).map(|(a, b)| (a - b).abs()).sum::<f64>();
        std::mem::swap(&mut rho, &mut next);
        if change < TOLERANCE {
            let total: f64 = rho.iter().sum();
            rho.iter_mut().for_each(|r| *r /= total);
            return Ok(rho);
        }
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

/// Per state, the (probability, next state index) pairs of one encode step.
fn transitions(automaton: &TansAutomaton, dist: &Distribution) -> Result<Vec<Vec<(f64, usize)>>> {
    if dist.len() > automaton.alphabet_size() {
        return Err(Error::SizeMismatch {
            expected: automaton.alphabet_size(),
            actual: dist.len(),
        });
    }
    let support: Vec<(usize, f64)> = dist
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| (s, p))
        .collect();
    if let Some(&(s, _)) = support.iter().find(|(s, _)| !automaton.can_encode(*s)) {
        return Err(Error::UnknownSymbol(s));
    }
    let l = automaton.table_size();
    Ok((l..2 * l)
        .map(|x| {
            support
                .iter()
                .map(|&(s, p)| (p, (automaton.transition(x, s).1 - l) as usize))
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TansCost {
    /// Expected bits per symbol, H'.
    pub expected_bits: f64,
    /// Shannon entropy H of the source.
    pub entropy: f64,
    /// H' - H.
    pub delta: f64,
}

pub fn tans_expected_bits(automaton: &TansAutomaton, dist: &Distribution) -> Result<TansCost> {
    let rho = stationary_distribution(automaton, dist)?;
    let l = automaton.table_size();
    let mut expected_bits = 0.0;
    for (i, &r) in rho.iter().enumerate() {
        let x = l + i as u32;
        for (s, &p) in dist.probs().iter().enumerate() {
            if p > 0.0 {
                expected_bits += r * p * automaton.transition(x, s).0 as f64;
            }
        }
    }
    let entropy = shannon_entropy(dist);
    Ok(TansCost {
        expected_bits,
        entropy,
        delta: expected_bits - entropy,
    })
}
