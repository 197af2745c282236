//! Top Lyapunov exponent of i.i.d. products of invertible matrices and the
//! spectral lower bound `(1/d) ln(1 / r_spec)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{convolve, GroupElement, GroupKind, ProbMeasure, WEIGHT_TOL};
use crate::linalg::dense_spectral_norm;

/// Largest support size allowed while expanding convolution powers.
pub const EXACT_SUPPORT_BUDGET: usize = 1 << 20;

/// Finitely supported probability measure on invertible real `d x d` matrices.
#[derive(Clone, Debug)]
pub struct MatrixMeasure {
    dim: usize,
    atoms: Vec<DMatrix<f64>>,
    /// Cumulative weights; the last entry is 1.
    cumulative: Vec<f64>,
}

impl MatrixMeasure {
    /// Row-major matrices with weights; rejects singular matrices.
    pub fn new(dim: usize, atoms: &[(Vec<f64>, f64)]) -> Result<Self> {
        if dim == 0 || atoms.is_empty() {
            return Err(Error::InvalidMeasure("empty matrix measure".into()));
        }
        let mut mats = Vec::with_capacity(atoms.len());
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for (entries, w) in atoms {
            if entries.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    got: entries.len(),
                });
            }
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
            }
            let m = DMatrix::from_row_slice(dim, dim, entries);
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidElement("matrix entries must be finite".into()));
            }
            let scale = m.amax().max(f64::MIN_POSITIVE).powi(dim as i32);
            if m.determinant().abs() <= 1e-12 * scale {
                return Err(Error::InvalidElement("singular matrix in the support".into()));
            }
            acc += w;
            mats.push(m);
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {acc}, not 1")));
        }
        *cumulative.last_mut().expect("nonempty") = 1.0;
        Ok(MatrixMeasure {
            dim,
            atoms: mats,
            cumulative,
        })
    }

    /// Real image of a measure on integer unimodular matrices.
    pub fn from_prob_measure(mu: &ProbMeasure) -> Result<Self> {
        let GroupKind::Int { dim } = mu.kind() else {
            return Err(Error::Unsupported(
                "Lyapunov exponents need a measure on integer matrices".into(),
            ));
        };
        let atoms: Vec<(Vec<f64>, f64)> = mu
            .iter()
            .map(|(g, w)| match g {
                GroupElement::Int(m) => (m.to_f64(), w),
                _ => unreachable!("kind checked above"),
            })
            .collect();
        Self::new(dim, &atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> &DMatrix<f64> {
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        &self.atoms[i]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean of `(1/n) ln ||X_n ... X_1||` over trials, natural log per step.
    pub point_estimate: f64,
    /// `1.96 * sd / sqrt(trials)`.
    pub ci_half_width: f64,
    pub n_steps: usize,
    pub n_trials: usize,
    pub seed: u64,
    /// `u_k / k` for `k = 1..`, when computed.
    pub exact_subadditive: Option<Vec<f64>>,
}

/// `(1/n) ln ||X_n ... X_1||` for one trial, renormalizing every step.
fn one_trial(mu: &MatrixMeasure, n_steps: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut prod = DMatrix::<f64>::identity(mu.dim, mu.dim);
    let mut log_scale = 0.0;
    for _ in 0..n_steps {
        prod = mu.sample(rng) * prod;
        let s = prod.norm();
        log_scale += s.ln();
        prod /= s;
    }
    (log_scale + dense_spectral_norm(&prod).ln()) / n_steps as f64
}

/// Monte-Carlo estimate of the top Lyapunov exponent. Trial `t` draws from
/// the ChaCha stream `t` of `seed`, so results do not depend on scheduling.
pub fn estimate_lyapunov(
    mu: &MatrixMeasure,
    n_steps: usize,
    n_trials: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n_steps == 0 || n_trials == 0 {
        return Err(Error::InvalidArgument("steps and trials must be >= 1".into()));
    }
    let samples: Vec<f64> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            one_trial(mu, n_steps, &mut rng)
        })
        .collect();
    let k = n_trials as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let sd = if n_trials > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(LyapunovEstimate {
        point_estimate: mean,
        ci_half_width: 1.96 * sd / k.sqrt(),
        n_steps,
        n_trials,
        seed,
        exact_subadditive: None,
    })
}

/// `u_n = E ln ||g||` under `mu^n` for `n = 1..=n_max`, by exact convolution.
pub fn exact_u_n(mu: &ProbMeasure, n_max: usize) -> Result<Vec<f64>> {
    if n_max == 0 || n_max > 8 {
        return Err(Error::InvalidArgument(format!("n_max must be in 1..=8, got {n_max}")));
    }
    if !matches!(mu.kind(), GroupKind::Int { .. }) {
        return Err(Error::Unsupported(
            "exact u_n needs a measure on integer matrices".into(),
        ));
    }
    let expect_log_norm = |nu: &ProbMeasure| -> f64 {
        nu.iter()
            .map(|(g, w)| match g {
                GroupElement::Int(m) => {
                    let d = m.dim();
                    w * dense_spectral_norm(&DMatrix::from_row_slice(d, d, &m.to_f64())).ln()
                }
                _ => unreachable!("kind checked above"),
            })
            .sum()
    };
    let mut power = mu.clone();
    let mut out = vec![expect_log_norm(&power)];
    for _ in 1..n_max {
        if power.len().saturating_mul(mu.len()) > EXACT_SUPPORT_BUDGET {
            return Err(Error::BudgetExceeded(format!(
                "convolution power would expand {} x {} atoms",
                power.len(),
                mu.len()
            )));
        }
        power = convolve(&power, mu)?;
        out.push(expect_log_norm(&power));
    }
    Ok(out)
}

/// `(1/d) ln(1 / r_spec)`.
pub fn furstenberg_bound(r_spec: f64, d: usize) -> Result<f64> {
    if !(r_spec > 0.0 && r_spec <= 1.0) {
        return Err(Error::InvalidArgument(format!("r_spec must lie in (0, 1], got {r_spec}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    Ok((1.0 / r_spec).ln() / d as f64)
}

/// The base-10 reading `(1/2) log10 sqrt(2/sqrt 3)` of the Sanov bound, kept
/// only as a cross-check constant.
pub const SANOV_BOUND_LOG10: f64 = 0.015617;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::MatZ;

    fn sanov() -> ProbMeasure {
        let a = MatZ::new(2, &[1, 2, 0, 1]).unwrap();
        let b = MatZ::new(2, &[1, 0, 2, 1]).unwrap();
        ProbMeasure::symmetric_matrix_pair(&a, &b).unwrap()
    }

    #[test]
    fn deterministic_products() {
        let id = MatrixMeasure::new(2, &[(vec![1.0, 0.0, 0.0, 1.0], 1.0)]).unwrap();
        assert_eq!(estimate_lyapunov(&id, 50, 3, 1).unwrap().point_estimate, 0.0);
        let g = MatrixMeasure::new(2, &[(vec![2.0, 0.0, 0.0, 0.5], 1.0)]).unwrap();
        let e = estimate_lyapunov(&g, 100, 4, 1).unwrap();
        assert!((e.point_estimate - 2f64.ln()).abs() < 1e-12);
        assert!(e.ci_half_width < 1e-12);
        // non-normal g: (1/n) ln ||g^n|| from the closed form g^n = (1 n; 0 1)
        let j = MatrixMeasure::new(2, &[(vec![1.0, 1.0, 0.0, 1.0], 1.0)]).unwrap();
        let n = 40usize;
        let gn = DMatrix::from_row_slice(2, 2, &[1.0, n as f64, 0.0, 1.0]);
        let oracle = dense_spectral_norm(&gn).ln() / n as f64;
        assert!((estimate_lyapunov(&j, n, 1, 0).unwrap().point_estimate - oracle).abs() < 1e-9);
    }

    #[test]
    fn reproducible_for_seed() {
        let mu = MatrixMeasure::from_prob_measure(&sanov()).unwrap();
        let a = estimate_lyapunov(&mu, 200, 16, 42).unwrap();
        let b = estimate_lyapunov(&mu, 200, 16, 42).unwrap();
        assert_eq!(a.point_estimate.to_bits(), b.point_estimate.to_bits());
        let c = estimate_lyapunov(&mu, 200, 16, 43).unwrap();
        assert_ne!(a.point_estimate, c.point_estimate);
    }

    #[test]
    fn singular_rejected() {
        assert!(MatrixMeasure::new(2, &[(vec![1.0, 2.0, 2.0, 4.0], 1.0)]).is_err());
        assert!(MatrixMeasure::new(2, &[(vec![1.0, 0.0, 0.0, 1.0], 0.5)]).is_err());
    }

    #[test]
    fn u1_is_log_generator_norm() {
        let u = exact_u_n(&sanov(), 2).unwrap();
        // singular values of (1 2; 0 1) are sqrt(2) +- 1
        assert!((u[0] - (1.0 + 2f64.sqrt()).ln()).abs() < 1e-12);
        assert!(u[1] / 2.0 <= u[0]);
    }

    #[test]
    fn u_n_for_dirac() {
        let g = MatZ::new(2, &[2, 1, 1, 1]).unwrap();
        let u = exact_u_n(&ProbMeasure::dirac(g.clone().into()), 5).unwrap();
        let mut p = g.clone();
        for uk in &u {
            let oracle = dense_spectral_norm(&DMatrix::from_row_slice(2, 2, &p.to_f64())).ln();
            assert!((uk - oracle).abs() < 1e-12);
            p = p.mul(&g).unwrap();
        }
        // symmetric g: ||g^n|| = ||g||^n
        for (k, uk) in u.iter().enumerate() {
            assert!((uk - (k + 1) as f64 * u[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(furstenberg_bound(1.0, 2).unwrap(), 0.0);
        assert!((furstenberg_bound((-3.0f64).exp(), 3).unwrap() - 1.0).abs() < 1e-15);
        let r = (3f64.sqrt() / 2.0).sqrt();
        let b = furstenberg_bound(r, 2).unwrap();
        assert!((b - 0.25 * (2.0 / 3f64.sqrt()).ln()).abs() < 1e-15);
        assert!((b - 0.03596).abs() < 5e-6);
        let base10 = 0.5 * (2.0 / 3f64.sqrt()).sqrt().log10();
        assert!((base10 - SANOV_BOUND_LOG10).abs() < 5e-7);
        assert!(furstenberg_bound(0.0, 2).is_err());
        assert!(furstenberg_bound(1.5, 2).is_err());
    }
}
