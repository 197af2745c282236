//! Return probabilities `a_n = (reflect(mu) * mu)^n (e)` and the roots
//! `a_n^{1/2n}`, which increase to the norm of the averaging operator on the
//! regular representation.

use serde::{Deserialize, Serialize};

use super::element::{FreeWord, GroupElement};
use super::measure::{convolve, ProbMeasure};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMethod {
    /// Distance-to-identity birth-death chain for the uniform measure on all
    /// free generators.
    Radial,
    /// `reflect(mu) * mu` lives on a cyclic subgroup; walk on the integers.
    Cyclic,
    /// Repeated convolution.
    Direct,
}

#[derive(Clone, Copy, Debug)]
pub struct ReturnConfig {
    /// Upper bound on `|supp(reflect(mu) * mu)| * n_max` and on any
    /// intermediate support size for the direct method.
    pub budget: usize,
    /// `None` picks the cheapest applicable method.
    pub force: Option<ReturnMethod>,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        ReturnConfig {
            budget: 2_000_000,
            force: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReturnProbabilitySeries {
    /// `ln a_n` for `n = 1..=n_max` (the values themselves underflow quickly).
    pub log_values: Vec<f64>,
    /// `r_n = a_n^{1/2n}`.
    pub roots: Vec<f64>,
    /// Whether `mu` itself is symmetric.
    pub symmetric: bool,
    pub method: ReturnMethod,
}

impl ReturnProbabilitySeries {
    fn from_logs(log_values: Vec<f64>, symmetric: bool, method: ReturnMethod) -> Self {
        let roots = log_values
            .iter()
            .enumerate()
            .map(|(i, la)| (la / (2.0 * (i + 1) as f64)).exp())
            .collect();
        ReturnProbabilitySeries {
            log_values,
            roots,
            symmetric,
            method,
        }
    }

    /// `a_n` (1-based `n`); may underflow to zero.
    pub fn value(&self, n: usize) -> f64 {
        self.log_values[n - 1].exp()
    }

    /// `r_{n_max}`, a lower bound on the operator norm.
    pub fn last_root(&self) -> f64 {
        *self.roots.last().expect("n_max >= 1")
    }

    /// Largest drop `r_n - r_{n+1}` (zero when the roots never decrease).
    pub fn max_decrease(&self) -> f64 {
        self.roots
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

pub fn spectral_radius_return(mu: &ProbMeasure, n_max: usize) -> Result<ReturnProbabilitySeries> {
    spectral_radius_return_with(mu, n_max, &ReturnConfig::default())
}

pub fn spectral_radius_return_with(
    mu: &ProbMeasure,
    n_max: usize,
    cfg: &ReturnConfig,
) -> Result<ReturnProbabilitySeries> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let symmetric = mu.is_symmetric();
    let nu = convolve(&mu.reflect(), mu)?;

    let radial = mu.free_radial_rank();
    let cyclic = cyclic_steps(&nu);
    let method = match cfg.force {
        Some(m) => m,
        None if radial.is_some() => ReturnMethod::Radial,
        None if cyclic.is_some() => ReturnMethod::Cyclic,
        None => ReturnMethod::Direct,
    };
    let logs = match method {
        ReturnMethod::Radial => {
            let rank = radial.ok_or_else(|| {
                Error::InvalidArgument("radial reduction needs the uniform free-generator measure".into())
            })?;
            radial_log_returns(rank, n_max)
        }
        ReturnMethod::Cyclic => {
            let steps = cyclic.ok_or_else(|| {
                Error::InvalidArgument("measure is not supported on a cyclic subgroup".into())
            })?;
            integer_walk_log_returns(&steps, n_max)
        }
        ReturnMethod::Direct => direct_log_returns(&nu, n_max, cfg.budget)?,
    };
    Ok(ReturnProbabilitySeries::from_logs(logs, symmetric, method))
}

/// Return probabilities of the walk at even times `2, 4, ..., 2 n_max` for the
/// uniform measure on the `2N` free generators, via the distance process:
/// `0 -> 1` with probability 1, `k -> k+1` with `p = (2N-1)/2N`, `k -> k-1`
/// with `q = 1/2N`.
///
/// The raw distribution spans too many orders of magnitude for `f64` once
/// `n` is in the thousands, so the recursion runs on `h_k` with
/// `P(dist = k) = (p/q)^{k/2} h_k` for `k >= 1` and `h_0 = P(dist = 0)`.
/// Up to a factor `sqrt(pq)` per step this is `h_0' = h_1`,
/// `h_1' = h_0 / p + h_2`, `h_k' = h_{k-1} + h_{k+1}`.
fn radial_log_returns(rank: u32, n_max: usize) -> Vec<f64> {
    let two_n = 2.0 * rank as f64;
    let p = (two_n - 1.0) / two_n;
    let q = 1.0 / two_n;
    let log_step = 0.5 * (p * q).ln();
    let total_steps = 2 * n_max;
    let mut h = vec![0.0f64; n_max + 3];
    let mut next = vec![0.0f64; n_max + 3];
    h[0] = 1.0;
    let mut log_scale = 0.0f64;
    let mut out = Vec::with_capacity(n_max);
    for step in 1..=total_steps {
        // a walker at distance k > remaining steps can no longer return
        let remaining = total_steps - step;
        let reach = step.min(remaining).min(n_max + 1);
        for k in 0..=reach {
            next[k] = match k {
                0 => h[1],
                1 => h[0] / p + h[2],
                _ => h[k - 1] + h[k + 1],
            };
        }
        next[reach + 1..].fill(0.0);
        std::mem::swap(&mut h, &mut next);
        log_scale += log_step;
        let top = h[..=reach].iter().fold(0.0f64, |a, &b| a.max(b));
        if top > 0.0 {
            for v in h[..=reach].iter_mut() {
                *v /= top;
            }
            log_scale += top.ln();
        }
        if step % 2 == 0 {
            out.push(h[0].ln() + log_scale);
        }
    }
    out
}

/// If every atom of `nu` is a power of one free-group element `r`, returns the
/// step distribution `(k, weight)` on the integers.
fn cyclic_steps(nu: &ProbMeasure) -> Option<Vec<(i64, f64)>> {
    let words: Vec<(&FreeWord, f64)> = nu
        .iter()
        .map(|(g, w)| match g {
            GroupElement::Free(word) => Some((word, w)),
            _ => None,
        })
        .collect::<Option<_>>()?;
    let shortest = words
        .iter()
        .filter(|(w, _)| !w.is_empty())
        .min_by_key(|(w, _)| w.len())?
        .0;
    let root = primitive_root(shortest);
    let mut steps = Vec::with_capacity(words.len());
    for (word, weight) in words {
        steps.push((power_of(word, &root)?, weight));
    }
    Some(steps)
}

/// Primitive root `r` of a nontrivial word `w = u c u^-1` (`c` cyclically
/// reduced): `c = s^k` with `s` of minimal period, `r = u s u^-1`.
fn primitive_root(word: &FreeWord) -> FreeWord {
    let l = word.letters();
    let mut i = 0;
    while i < l.len() - 1 - i && l[i] == -l[l.len() - 1 - i] {
        i += 1;
    }
    let conj = &l[..i];
    let core = &l[i..l.len() - i];
    let period = (1..=core.len())
        .find(|&t| core.len() % t == 0 && core.chunks(t).all(|c| c == &core[..t]))
        .unwrap_or(core.len());
    let letters = conj
        .iter()
        .chain(&core[..period])
        .copied()
        .chain(conj.iter().rev().map(|x| -x));
    FreeWord::new(word.rank(), letters).expect("letters come from a valid word")
}

/// `Some(k)` with `word == root^k`.
fn power_of(word: &FreeWord, root: &FreeWord) -> Option<i64> {
    if word.is_empty() {
        return Some(0);
    }
    let max_k = word.len() / root.len().max(1) + 1;
    let inv = root.inverse();
    let mut pos = FreeWord::identity(root.rank());
    let mut neg = pos.clone();
    for k in 1..=max_k as i64 {
        pos = pos.mul(root).ok()?;
        neg = neg.mul(&inv).ok()?;
        if &pos == word {
            return Some(k);
        }
        if &neg == word {
            return Some(-k);
        }
    }
    None
}

/// `ln nu^{*n}(0)` for a step distribution on the integers.
fn integer_walk_log_returns(steps: &[(i64, f64)], n_max: usize) -> Vec<f64> {
    let span = steps.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
    let half = span * n_max;
    let width = 2 * half + 1;
    let mut dist = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    dist[half] = 1.0;
    let mut log_scale = 0.0f64;
    let mut out = Vec::with_capacity(n_max);
    for step in 1..=n_max {
        let reach = span * step.min(n_max - step);
        let (lo, hi) = (half - reach, half + reach);
        next.fill(0.0);
        for (i, slot) in next.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let mut v = 0.0;
            for &(k, w) in steps {
                let src = i as i64 - k;
                if src >= 0 && (src as usize) < width {
                    v += dist[src as usize] * w;
                }
            }
            *slot = v;
        }
        std::mem::swap(&mut dist, &mut next);
        let mass: f64 = dist[lo..=hi].iter().sum();
        if mass > 0.0 {
            for v in dist[lo..=hi].iter_mut() {
                *v /= mass;
            }
            log_scale += mass.ln();
        }
        out.push(dist[half].ln() + log_scale);
    }
    out
}

fn direct_log_returns(nu: &ProbMeasure, n_max: usize, budget: usize) -> Result<Vec<f64>> {
    if nu.len().saturating_mul(n_max) > budget {
        return Err(Error::BudgetExceeded(format!(
            "support {} x n_max {n_max} exceeds budget {budget} and no reduction applies",
            nu.len()
        )));
    }
    let mut out = Vec::with_capacity(n_max);
    let mut power = nu.clone();
    out.push(power.identity_mass().ln());
    for _ in 2..=n_max {
        power = convolve(&power, nu)?;
        if power.len() > budget {
            return Err(Error::BudgetExceeded(format!(
                "intermediate support {} exceeds budget {budget}",
                power.len()
            )));
        }
        out.push(power.identity_mass().ln());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::element::MatModP;

    fn free(rank: u32, letters: &[i32]) -> GroupElement {
        GroupElement::Free(FreeWord::new(rank, letters.iter().copied()).unwrap())
    }

    #[test]
    fn radial_matches_direct_for_small_n() {
        for rank in 1..=2 {
            let mu = ProbMeasure::free_symmetric(rank);
            let radial = spectral_radius_return(&mu, 6).unwrap();
            assert_eq!(radial.method, ReturnMethod::Radial);
            let cfg = ReturnConfig {
                force: Some(ReturnMethod::Direct),
                ..Default::default()
            };
            let direct = spectral_radius_return_with(&mu, 6, &cfg).unwrap();
            for n in 1..=6 {
                assert!(
                    (radial.value(n) - direct.value(n)).abs() < 1e-12,
                    "rank {rank} n {n}"
                );
            }
        }
    }

    #[test]
    fn first_values_free_two() {
        let s = spectral_radius_return(&ProbMeasure::free_symmetric(2), 2).unwrap();
        assert!((s.value(1) - 0.25).abs() < 1e-15);
        assert!((s.value(2) - 7.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn cyclic_reduction_for_non_symmetric_pair() {
        let mu = ProbMeasure::uniform([free(2, &[1]), free(2, &[2])]).unwrap();
        let s = spectral_radius_return(&mu, 40).unwrap();
        assert_eq!(s.method, ReturnMethod::Cyclic);
        assert!(!s.symmetric);
        // nu = 1/2 d_0 + 1/4 (d_1 + d_-1) on Z: a_n = C(2n, n) / 4^n
        let mut exact = 1.0f64;
        for n in 1..=40usize {
            exact *= (2 * n - 1) as f64 * (2 * n) as f64 / (n as f64 * n as f64 * 4.0);
            assert!((s.value(n) - exact).abs() < 1e-13, "n = {n}");
        }
        let cfg = ReturnConfig {
            force: Some(ReturnMethod::Direct),
            ..Default::default()
        };
        let direct = spectral_radius_return_with(&mu, 8, &cfg).unwrap();
        for n in 1..=8 {
            assert!((direct.value(n) - s.value(n)).abs() < 1e-13);
        }
    }

    #[test]
    fn primitive_roots() {
        let w = FreeWord::new(2, [2, 1, -2, 1, -2, 1, -2, -2]).unwrap();
        // b (a b^-1)^3 b^-1 after reduction
        let r = primitive_root(&w);
        assert_eq!(power_of(&w, &r), Some(3));
        let ab = FreeWord::new(2, [1, 2]).unwrap();
        assert_eq!(power_of(&ab, &primitive_root(&ab)), Some(1));
        assert_eq!(power_of(&ab.inverse(), &ab), Some(-1));
        assert_eq!(power_of(&FreeWord::new(2, [1]).unwrap(), &ab), None);
    }

    #[test]
    fn finite_group_direct() {
        let gens = [
            MatModP::elementary(3, 2, 0, 1, 1).unwrap(),
            MatModP::elementary(3, 2, 0, 1, -1).unwrap(),
            MatModP::elementary(3, 2, 1, 0, 1).unwrap(),
            MatModP::elementary(3, 2, 1, 0, -1).unwrap(),
        ];
        let mu = ProbMeasure::uniform(gens.into_iter().map(GroupElement::ModP)).unwrap();
        let s = spectral_radius_return(&mu, 60).unwrap();
        assert_eq!(s.method, ReturnMethod::Direct);
        // finite group: the return probability tends to 1/|G| and r_n -> 1
        assert!((s.value(60) - 1.0 / 24.0).abs() < 1e-6);
        assert!(s.max_decrease() <= 0.0);
    }

    #[test]
    fn budget_enforced() {
        let cfg = ReturnConfig {
            budget: 100,
            force: Some(ReturnMethod::Direct),
        };
        let r = spectral_radius_return_with(&ProbMeasure::free_symmetric(2), 50, &cfg);
        assert!(matches!(r, Err(Error::BudgetExceeded(_))));
        assert!(spectral_radius_return(&ProbMeasure::free_symmetric(2), 0).is_err());
    }

    // Oracle: the raw distance recursion kept entirely in log space.
    fn log_space_radial(rank: u32, n_max: usize) -> Vec<f64> {
        let two_n = 2.0 * rank as f64;
        let (lp, lq) = (((two_n - 1.0) / two_n).ln(), (1.0 / two_n).ln());
        let lse = |a: f64, b: f64| {
            let m = a.max(b);
            if m == f64::NEG_INFINITY {
                m
            } else {
                m + ((a - m).exp() + (b - m).exp()).ln()
            }
        };
        let width = 2 * n_max + 2;
        let mut d = vec![f64::NEG_INFINITY; width];
        d[0] = 0.0;
        let mut out = Vec::new();
        for step in 1..=2 * n_max {
            let mut nd = vec![f64::NEG_INFINITY; width];
            for k in 0..width - 1 {
                let from_below = match k {
                    0 => f64::NEG_INFINITY,
                    1 => d[0],
                    _ => d[k - 1] + lp,
                };
                nd[k] = lse(from_below, d[k + 1] + lq);
            }
            d = nd;
            if step % 2 == 0 {
                out.push(d[0]);
            }
        }
        out
    }

    #[test]
    fn radial_stays_accurate_for_large_n() {
        let n = 3000;
        let s = spectral_radius_return(&ProbMeasure::free_symmetric(2), n).unwrap();
        let oracle = log_space_radial(2, n);
        for (i, (a, b)) in s.log_values.iter().zip(&oracle).enumerate() {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "n {}: {a} vs {b}", i + 1);
        }
        assert_eq!(s.max_decrease(), 0.0);
        assert!(s.last_root() < 3f64.sqrt() / 2.0);
    }
}
