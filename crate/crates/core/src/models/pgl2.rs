use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::is_prime;
use crate::markov::{RowMode, WeightedChain};

/// How the half-line is cut at `x_N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// `x_N` keeps only its backward transition; the chain is substochastic.
    Compression,
    /// `x_N` moves back with probability 1 and carries the lumped mass
    /// `m(x_{N-1}) / (q + 1)`.
    Lumped,
}

impl fmt::Display for TruncationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruncationMode::Compression => "compression",
            TruncationMode::Lumped => "lumped",
        })
    }
}

impl FromStr for TruncationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "compression" => Ok(TruncationMode::Compression),
            "b" | "lumped" => Ok(TruncationMode::Lumped),
            _ => Err(Error::InvalidArgument(format!(
                "unknown truncation mode {s:?} (expected compression or lumped)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfLineSpec {
    pub q: u64,
    /// Index of the last state; states are `x_0 ..= x_N`.
    pub n: usize,
    pub mode: TruncationMode,
}

impl HalfLineSpec {
    pub fn validate(&self) -> Result<()> {
        if !is_prime_power(self.q) {
            return Err(Error::InvalidArgument(format!(
                "q = {} is not a prime power",
                self.q
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "truncation length must be >= 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

pub fn is_prime_power(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let Some(p) = (2..=q).find(|d| q % d == 0) else {
        return false;
    };
    let mut r = q;
    while r % p == 0 {
        r /= p;
    }
    r == 1 && is_prime(p)
}

/// Quotient chain on `x_0, x_1, ...` with `m(x_0) = 1/(q+1)`, `m(x_n) = q^-n`,
/// `p(x_0, x_1) = 1`, forward probability `1/(q+1)` and backward `q/(q+1)`.
pub fn build_pgl2_halfline(spec: HalfLineSpec) -> Result<WeightedChain> {
    spec.validate()?;
    let HalfLineSpec { q, n, mode } = spec;
    let qf = q as f64;
    let fwd = 1.0 / (qf + 1.0);
    let back = qf / (qf + 1.0);

    let mut measure = Vec::with_capacity(n + 1);
    measure.push(1.0 / (qf + 1.0));
    for k in 1..=n {
        measure.push(qf.powi(-(k as i32)));
    }
    let mut transitions = vec![(0, 1, 1.0)];
    for k in 1..n {
        transitions.push((k, k + 1, fwd));
        transitions.push((k, k - 1, back));
    }
    let row_mode = match mode {
        TruncationMode::Compression => {
            transitions.push((n, n - 1, back));
            RowMode::Substochastic
        }
        TruncationMode::Lumped => {
            measure[n] = measure[n - 1] / (qf + 1.0);
            transitions.push((n, n - 1, 1.0));
            RowMode::Stochastic
        }
    };
    let labels = (0..=n).map(|k| format!("x{k}")).collect();
    WeightedChain::new(labels, measure, transitions, row_mode)
}

/// `min{(q-1)/(q+1), 4q^2 / ((q+1)(q^2-1))}`, the Cheeger lower bound for the
/// untruncated half-line.
pub fn pgl2_cheeger_bound(q: u64) -> Result<f64> {
    if !is_prime_power(q) {
        return Err(Error::InvalidArgument(format!("q = {q} is not a prime power")));
    }
    let q = q as f64;
    let a = (q - 1.0) / (q + 1.0);
    let b = 4.0 * q * q / ((q + 1.0) * (q * q - 1.0));
    Ok(a.min(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_powers() {
        let pp: Vec<u64> = (0..30).filter(|&q| is_prime_power(q)).collect();
        assert_eq!(pp, [2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19, 23, 25, 27, 29]);
    }

    #[test]
    fn measure_matches_closed_form() {
        let c = build_pgl2_halfline(HalfLineSpec {
            q: 2,
            n: 40,
            mode: TruncationMode::Compression,
        })
        .unwrap();
        let m = c.measure();
        assert_eq!(&m[..4], &[1.0 / 3.0, 0.5, 0.25, 0.125]);
        let total: f64 = m.iter().sum();
        assert!((total - 4.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn both_modes_reversible() {
        for q in [2, 3, 4, 5, 9] {
            for n in [2, 3, 7, 30] {
                for mode in [TruncationMode::Compression, TruncationMode::Lumped] {
                    let c = build_pgl2_halfline(HalfLineSpec { q, n, mode }).unwrap();
                    assert!(c.check_detailed_balance() < 1e-14, "q={q} n={n} {mode}");
                }
            }
        }
    }

    #[test]
    fn lumped_mode_has_eigenvalue_minus_one() {
        for q in [2, 3, 7] {
            for n in [2, 5, 12] {
                let c = build_pgl2_halfline(HalfLineSpec {
                    q,
                    n,
                    mode: TruncationMode::Lumped,
                })
                .unwrap();
                let f: Vec<f64> = (0..=n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
                let mf = c.apply_markov(&f).unwrap();
                let err = mf.iter().zip(&f).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12);
            }
        }
    }

    #[test]
    fn cheeger_bound_values() {
        assert!((pgl2_cheeger_bound(2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((pgl2_cheeger_bound(3).unwrap() - 0.5).abs() < 1e-15);
        assert!((pgl2_cheeger_bound(4).unwrap() - 0.6).abs() < 1e-15);
        assert!(pgl2_cheeger_bound(6).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad = |q, n| {
            build_pgl2_halfline(HalfLineSpec {
                q,
                n,
                mode: TruncationMode::Lumped,
            })
            .is_err()
        };
        assert!(bad(6, 5));
        assert!(bad(2, 1));
        assert!(bad(1, 5));
        assert_eq!("B".parse::<TruncationMode>().unwrap(), TruncationMode::Lumped);
    }
}
