//! Reference checks of the worked numeric examples: code costs on the pulses
//! distribution, the four-state tANS tables and trace, and automaton losses.
//! Offline, deterministic and idempotent.

use std::fmt;

use crate::bitstream::{BitCursor, BitSink};
use crate::datagen::PULSES_FREQUENCIES;
use crate::entropy::{
    exp_golomb_len, expected_code_length, huffman_build, stationary_distribution, tans_expected_bits,
    CoderState, DecodeEntry, Distribution, TansAutomaton,
};
use crate::stats::shannon_entropy;
use crate::Result;

/// Tolerance on the printed two-decimal costs.
pub const COST_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: expected {}, got {}", self.name, self.expected, self.actual)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    /// Corrupts one decoding entry of the four-state automaton first.
    pub tamper_decoding_table: bool,
}

fn near(name: &'static str, expected: f64, tol: f64, actual: f64) -> Check {
    Check {
        name,
        expected: format!("{expected} ± {tol}"),
        actual: format!("{actual:.4}"),
        pass: (actual - expected).abs() <= tol,
    }
}

fn exact<T: fmt::Debug + PartialEq>(name: &'static str, expected: T, actual: T) -> Check {
    Check {
        name,
        expected: format!("{expected:?}"),
        actual: format!("{actual:?}"),
        pass: expected == actual,
    }
}

/// Automaton with spread {a, b, a, a} on four states.
pub fn four_state_automaton() -> TansAutomaton {
    TansAutomaton::with_spread(vec![0, 1, 0, 0], 2, 2).expect("valid spread")
}

/// Encodes "baaaabb" from `x = L`; returns the emitted bits (each step's
/// low bits most significant first), the final state, and the backward decode.
pub fn trace_four_state(t: &TansAutomaton) -> Result<(String, u32, Vec<usize>)> {
    let message = [1usize, 0, 0, 0, 0, 1, 1];
    let mut state = CoderState::initial(t);
    let mut sink = BitSink::new();
    let mut bits = String::new();
    for &s in &message {
        let x = state.value();
        let n = t.encode_symbol(&mut state, s, &mut sink)?;
        bits.extend((0..n).rev().map(|i| if (x >> i) & 1 == 1 { '1' } else { '0' }));
    }
    let final_state = state.value();
    let mut cursor = BitCursor::reverse(sink.as_bytes(), sink.bit_count())?;
    let mut decoded = Vec::with_capacity(message.len());
    for _ in 0..message.len() {
        decoded.push(t.decode_symbol(&mut state, &mut cursor)?);
    }
    decoded.reverse();
    Ok((bits, final_state, decoded))
}

pub fn run_selftest(options: SelftestOptions) -> Vec<Check> {
    let mut checks = Vec::new();
    let pulses = Distribution::from_weights(&PULSES_FREQUENCIES).expect("positive weights");

    let eg: Vec<u32> = (0..pulses.len() as u64).map(exp_golomb_len).collect();
    let eg_cost = expected_code_length(&eg, &pulses).expect("matching lengths");
    checks.push(near("Exp-Golomb bits/value on pulses", 1.30, COST_TOLERANCE, eg_cost));

    let huffman = huffman_build(&pulses).expect("non-empty distribution");
    let h_cost = expected_code_length(&huffman.lengths_u32(), &pulses).expect("matching lengths");
    checks.push(near("Huffman bits/value on pulses", 1.23, COST_TOLERANCE, h_cost));
    checks.push(near("entropy of pulses", 0.74, COST_TOLERANCE, shannon_entropy(&pulses)));

    let mut t = four_state_automaton();
    if options.tamper_decoding_table {
        t.tamper_decoding_entry(
            1,
            DecodeEntry {
                symbol: 0,
                nb_bits: 1,
                new_x: 0,
            },
        );
    }
    let dec = t.decoding_table();
    checks.push(exact(
        "decoding symbols",
        vec![0u16, 1, 0, 0],
        dec.iter().map(|e| e.symbol).collect(),
    ));
    checks.push(exact("decoding nbBits", vec![1u8, 2, 0, 0], dec.iter().map(|e| e.nb_bits).collect()));
    checks.push(exact(
        "decoding newX (x-space)",
        vec![6u32, 4, 4, 5],
        dec.iter().map(|e| e.new_x + 4).collect(),
    ));
    let enc = t.encoding();
    checks.push(exact("encoding nb", vec![2i64, 12], enc.nb.clone()));
    checks.push(exact("encoding offsets", vec![-3i64, 2], enc.offset.clone()));
    checks.push(exact("encoding table", vec![4u32, 6, 7, 5], enc.table.clone()));

    checks.push(match trace_four_state(&t) {
        Ok((bits, final_state, decoded)) => exact(
            "trace of baaaabb (bits, final state, decoded)",
            ("00100001".to_string(), 5, vec![1usize, 0, 0, 0, 0, 1, 1]),
            (bits, final_state, decoded),
        ),
        Err(e) => Check {
            name: "trace of baaaabb (bits, final state, decoded)",
            expected: "clean round trip".into(),
            actual: e.to_string(),
            pass: false,
        },
    });

    let quarter = Distribution::new(vec![0.75, 0.25]).expect("valid");
    let four = four_state_automaton();
    match (tans_expected_bits(&four, &quarter), stationary_distribution(&four, &quarter)) {
        (Ok(cost), Ok(rho)) => {
            checks.push(near("ΔH of the four-state automaton", 0.01, 0.002, cost.delta));
            let has = |v: f64| rho.iter().any(|r| (r - v).abs() <= 0.01);
            checks.push(Check {
                name: "stationary probabilities include 0.241 and 0.188",
                expected: "0.241, 0.188 ± 0.01".into(),
                actual: format!("{rho:.3?}"),
                pass: has(0.241) && has(0.188),
            });
        }
        (a, b) => checks.push(Check {
            name: "four-state automaton analysis",
            expected: "converged".into(),
            actual: format!("{:?} / {:?}", a.err(), b.err()),
            pass: false,
        }),
    }
    let eight = TansAutomaton::new(&quarter, 3).and_then(|t| tans_expected_bits(&t, &quarter));
    checks.push(match eight {
        Ok(cost) => near("ΔH of the eight-state automaton", 0.0018, 0.001, cost.delta),
        Err(e) => Check {
            name: "ΔH of the eight-state automaton",
            expected: "0.0018 ± 0.001".into(),
            actual: e.to_string(),
            pass: false,
        },
    });
    checks
}
