//! Cheeger constant `h = inf mu~(S x S^c) / (m(S) m(S^c))` with `m`
//! normalized to a probability, the two-sided Cheeger inequality, and the
//! area and co-area formulas.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{gap_summary, lambda1, SolverOptions, WeightedChain};

/// Largest state count handled by exact enumeration.
pub const MAX_EXACT_STATES: usize = 22;

/// Relative tolerance under which two cut ratios count as tied.
const TIE_TOL: f64 = 1e-12;

const PREFIX_BITS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMethod {
    ExactEnumeration,
    FiedlerSweep,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutReport {
    pub h: f64,
    /// Sorted state indices of the minimizing set.
    pub argmin_subset: Vec<usize>,
    pub method: CutMethod,
    pub subset_count_examined: u64,
}

/// Symmetric edge weights `mu~(x, y) = m(x) p(x, y)` with `m` normalized,
/// averaged with the transpose, plus the normalized measure.
struct CutData {
    m: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl CutData {
    fn new(chain: &WeightedChain) -> Result<Self> {
        if !chain.is_reversible() {
            return Err(Error::NotReversible {
                violation: chain.check_detailed_balance(),
            });
        }
        if chain.len() < 2 {
            return Err(Error::InvalidChain("a cut needs at least two states".into()));
        }
        let m = chain.normalized_measure();
        let n = m.len();
        let mut adj = vec![Vec::new(); n];
        for (x, y, p) in chain.transitions() {
            if x != y {
                let w = 0.5 * m[x] * p;
                adj[x].push((y, w));
                adj[y].push((x, w));
            }
        }
        for row in &mut adj {
            row.sort_by_key(|&(y, _)| y);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(y, w) in row.iter() {
                match merged.last_mut() {
                    Some((last, acc)) if *last == y => *acc += w,
                    _ => merged.push((y, w)),
                }
            }
            *row = merged;
        }
        Ok(CutData { m, adj })
    }

    fn ratio(&self, inside: &[bool]) -> f64 {
        let mut cut = 0.0;
        let mut ms = 0.0;
        for (x, &ix) in inside.iter().enumerate() {
            if ix {
                ms += self.m[x];
                cut += self.adj[x]
                    .iter()
                    .filter(|(y, _)| !inside[*y])
                    .map(|(_, w)| w)
                    .sum::<f64>();
            }
        }
        let total: f64 = self.m.iter().sum();
        cut / (ms * (total - ms))
    }
}

/// `mu~(S x S^c) / (m(S) m(S^c))` for an explicit nonempty proper subset.
pub fn cut_ratio(chain: &WeightedChain, subset: &[usize]) -> Result<f64> {
    let data = CutData::new(chain)?;
    let mut inside = vec![false; chain.len()];
    for &x in subset {
        if x >= chain.len() {
            return Err(Error::InvalidArgument(format!("state {x} out of range")));
        }
        inside[x] = true;
    }
    let k = inside.iter().filter(|&&b| b).count();
    if k == 0 || k == chain.len() {
        return Err(Error::InvalidArgument("subset must be nonempty and proper".into()));
    }
    Ok(data.ratio(&inside))
}

/// Lexicographic order of the sorted index lists of two bit sets.
fn lex_cmp(a: u32, b: u32) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    let k = (a ^ b).trailing_zeros();
    let above = !0u32 << k;
    let (without_k, flip) = if a >> k & 1 == 1 { (b, false) } else { (a, true) };
    // the set without k is smaller only if it stops before k
    let ord = if without_k & above == 0 {
        Ordering::Greater
    } else {
        Ordering::Less
    };
    if flip {
        ord.reverse()
    } else {
        ord
    }
}

fn better(cand: (f64, u32), best: (f64, u32)) -> bool {
    let scale = cand.0.abs().max(best.0.abs()).max(f64::MIN_POSITIVE);
    if (cand.0 - best.0).abs() <= TIE_TOL * scale {
        lex_cmp(cand.1, best.1) == Ordering::Less
    } else {
        cand.0 < best.0
    }
}

/// Exact Cheeger constant by enumerating every subset that contains state 0.
pub fn cheeger_exact(chain: &WeightedChain) -> Result<CutReport> {
    let n = chain.len();
    if n > MAX_EXACT_STATES {
        return Err(Error::BudgetExceeded(format!(
            "exact Cheeger enumeration is limited to {MAX_EXACT_STATES} states (got {n}); use cheeger_sweep"
        )));
    }
    let data = CutData::new(chain)?;
    let free = n - 1;
    let prefix_bits = free.min(PREFIX_BITS);
    let low_bits = free - prefix_bits;
    let full: u32 = (1u32 << n) - 1;

    let chunk_best = |prefix: u32| -> Option<(f64, u32)> {
        // bit 0 is state 0, bits 1..=low_bits vary by Gray code, the rest is the prefix
        let base = 1u32 | (prefix << (1 + low_bits));
        let mut mask = base;
        let mut inside: Vec<bool> = (0..n).map(|x| mask >> x & 1 == 1).collect();
        let mut ms: f64 = (0..n).filter(|&x| inside[x]).map(|x| data.m[x]).sum();
        let mut cut: f64 = (0..n)
            .filter(|&x| inside[x])
            .flat_map(|x| data.adj[x].iter())
            .filter(|(y, _)| !inside[*y])
            .map(|(_, w)| w)
            .sum();
        let mut best: Option<(f64, u32)> = None;
        let steps = 1u64 << low_bits;
        for i in 0..steps {
            if i > 0 {
                let v = 1 + i.trailing_zeros() as usize;
                let (to_s, from_s): (f64, f64) = data.adj[v].iter().fold((0.0, 0.0), |(a, b), &(y, w)| {
                    if inside[y] {
                        (a + w, b)
                    } else {
                        (a, b + w)
                    }
                });
                if inside[v] {
                    inside[v] = false;
                    ms -= data.m[v];
                    cut += to_s - from_s;
                } else {
                    inside[v] = true;
                    ms += data.m[v];
                    cut += from_s - to_s;
                }
                mask ^= 1 << v;
            }
            if mask == full {
                continue;
            }
            let h = cut / (ms * (1.0 - ms));
            if best.map_or(true, |b| better((h, mask), b)) {
                best = Some((h, mask));
            }
        }
        best
    };

    let best = (0..1u32 << prefix_bits)
        .into_par_iter()
        .map(chunk_best)
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .reduce(|b, c| if better(c, b) { c } else { b })
        .expect("n >= 2 leaves at least one proper subset");

    let subset: Vec<usize> = (0..n).filter(|&x| best.1 >> x & 1 == 1).collect();
    let inside: Vec<bool> = (0..n).map(|x| best.1 >> x & 1 == 1).collect();
    Ok(CutReport {
        h: data.ratio(&inside),
        argmin_subset: subset,
        method: CutMethod::ExactEnumeration,
        subset_count_examined: (1u64 << free) - 1,
    })
}

/// Best threshold cut along the `lambda1` eigenfunction; an upper bound on `h`.
pub fn cheeger_sweep(chain: &WeightedChain) -> Result<CutReport> {
    let data = CutData::new(chain)?;
    let f = gap_summary(chain, &SolverOptions::default())?.eigenfunction;
    let n = chain.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));

    let mut inside = vec![false; n];
    let (mut cut, mut ms) = (0.0, 0.0);
    let mut best = (f64::INFINITY, 0usize);
    for (k, &v) in order[..n - 1].iter().enumerate() {
        let (to_s, from_s) = data.adj[v].iter().fold((0.0, 0.0), |(a, b), &(y, w)| {
            if inside[y] {
                (a + w, b)
            } else {
                (a, b + w)
            }
        });
        inside[v] = true;
        ms += data.m[v];
        cut += from_s - to_s;
        let h = cut / (ms * (1.0 - ms));
        if h < best.0 {
            best = (h, k + 1);
        }
    }
    let mut subset = order[..best.1].to_vec();
    subset.sort_unstable();
    let mut inside = vec![false; n];
    subset.iter().for_each(|&x| inside[x] = true);
    Ok(CutReport {
        h: data.ratio(&inside),
        argmin_subset: subset,
        method: CutMethod::FiedlerSweep,
        subset_count_examined: (n - 1) as u64,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CheegerVerification {
    pub h: f64,
    pub lambda1: f64,
    /// `h^2 / 8`.
    pub lower: f64,
    /// `2 h`.
    pub upper: f64,
}

impl CheegerVerification {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.lambda1 + tol && self.lambda1 <= self.upper + tol
    }
}

/// Exact `h` and `lambda1` with the bounds `h^2/8 <= lambda1 <= 2h`.
pub fn verify_cheeger(chain: &WeightedChain) -> Result<CheegerVerification> {
    let h = cheeger_exact(chain)?.h;
    let l1 = lambda1(chain)?.estimate;
    Ok(CheegerVerification {
        h,
        lambda1: l1,
        lower: h * h / 8.0,
        upper: 2.0 * h,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AreaCoarea {
    /// `sum u(x) m(x)`.
    pub lhs_area: f64,
    /// `int_0^inf m(S_t) dt`.
    pub rhs_area: f64,
    /// `1/2 sum |u(y) - u(x)| mu~(x, y)`.
    pub lhs_coarea: f64,
    /// `int_0^inf mu~(S_t x S_t^c) dt`.
    pub rhs_coarea: f64,
}

/// Both sides of the area and co-area formulas with `S_t = {u > t}` and `m`
/// normalized. The integrals are exact sums over the distinct values of `u`.
pub fn area_coarea_check(chain: &WeightedChain, u: &[f64]) -> Result<AreaCoarea> {
    if u.len() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: u.len(),
        });
    }
    if let Some(x) = u.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "u must be finite and nonnegative (u[{x}] = {})",
            u[x]
        )));
    }
    let m = chain.normalized_measure();
    let mu = |x: usize, p: f64| m[x] * p;

    let lhs_area = u.iter().zip(&m).map(|(a, b)| a * b).sum();
    let lhs_coarea = 0.5
        * chain
            .transitions()
            .map(|(x, y, p)| (u[y] - u[x]).abs() * mu(x, p))
            .sum::<f64>();

    let mut levels: Vec<f64> = u.to_vec();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut rhs_area, mut rhs_coarea) = (0.0, 0.0);
    for w in levels.windows(2) {
        let (t, dt) = (w[0], w[1] - w[0]);
        let above = |x: usize| u[x] > t;
        let ms: f64 = (0..u.len()).filter(|&x| above(x)).map(|x| m[x]).sum();
        let cut: f64 = chain
            .transitions()
            .filter(|&(x, y, _)| above(x) && !above(y))
            .map(|(x, _, p)| mu(x, p))
            .sum();
        rhs_area += dt * ms;
        rhs_coarea += dt * cut;
    }
    Ok(AreaCoarea {
        lhs_area,
        rhs_area,
        lhs_coarea,
        rhs_coarea,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProofDisplay {
    /// `h |f|^2`.
    pub lhs: f64,
    /// `2 sqrt(2) |f| sqrt(<Delta f, f>)`.
    pub rhs: f64,
}

/// Evaluates `h |f|^2 <= 2 sqrt(2) |f| sqrt(<Delta f, f>)` for the `lambda1`
/// eigenfunction, norms in `l^2` of the normalized measure.
pub fn proof_display_check(chain: &WeightedChain) -> Result<ProofDisplay> {
    let total: f64 = chain.measure().iter().sum();
    let normalized = chain.with_scaled_measure(1.0 / total)?;
    let h = cheeger_exact(&normalized)?.h;
    let f = gap_summary(&normalized, &SolverOptions::default())?.eigenfunction;
    let ff = normalized.inner(&f, &f)?;
    let energy = normalized.laplacian_form(&f)?.max(0.0);
    Ok(ProofDisplay {
        lhs: h * ff,
        rhs: 2.0 * 2f64.sqrt() * ff.sqrt() * energy.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::markov::RowMode;
    use crate::models::{build_pgl2_halfline, pgl2_cheeger_bound, HalfLineSpec, TruncationMode};

    fn swap() -> WeightedChain {
        WeightedChain::from_undirected_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn k3() -> WeightedChain {
        WeightedChain::from_undirected_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> WeightedChain {
        // random spanning path keeps it connected; extra random edges and loops
        let mut edges = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        for w in perm.windows(2) {
            edges.push((w[0], w[1], rng.gen_range(0.1..2.0)));
        }
        for _ in 0..n {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            edges.push((a, b, rng.gen_range(0.1..2.0)));
        }
        WeightedChain::from_undirected_edges(n, &edges).unwrap()
    }

    // Oracle: plain loop over all bit masks with direct ratio evaluation.
    fn brute_force_h(chain: &WeightedChain) -> f64 {
        let n = chain.len();
        let m = chain.normalized_measure();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) - 1 {
            let s = |x: usize| mask >> x & 1 == 1;
            let ms: f64 = (0..n).filter(|&x| s(x)).map(|x| m[x]).sum();
            let cut: f64 = chain
                .transitions()
                .filter(|&(x, y, _)| s(x) && !s(y))
                .map(|(x, _, p)| m[x] * p)
                .sum();
            best = best.min(cut / (ms * (1.0 - ms)));
        }
        best
    }

    #[test]
    fn small_examples() {
        let r = cheeger_exact(&swap()).unwrap();
        assert!((r.h - 2.0).abs() < 1e-12);
        assert_eq!(r.argmin_subset, vec![0]);
        let r = cheeger_exact(&k3()).unwrap();
        assert!((r.h - 1.5).abs() < 1e-12);
        assert_eq!(r.argmin_subset, vec![0]);
        let s = cheeger_sweep(&swap()).unwrap();
        assert!((s.h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lex_order() {
        let set = |xs: &[u32]| xs.iter().fold(0u32, |a, &x| a | 1 << x);
        assert_eq!(lex_cmp(set(&[0, 1]), set(&[0, 1, 2])), Ordering::Less);
        assert_eq!(lex_cmp(set(&[0, 1, 5]), set(&[0, 2])), Ordering::Less);
        assert_eq!(lex_cmp(set(&[0, 3]), set(&[0, 2, 9])), Ordering::Greater);
        assert_eq!(lex_cmp(set(&[0]), set(&[0])), Ordering::Equal);
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let n = 2 + trial % 11;
            let c = random_chain(&mut rng, n);
            let r = cheeger_exact(&c).unwrap();
            let oracle = brute_force_h(&c);
            assert!((r.h - oracle).abs() < 1e-12 * oracle.max(1.0), "n={n}");
            assert!((cut_ratio(&c, &r.argmin_subset).unwrap() - r.h).abs() < 1e-12);
            assert!(cheeger_sweep(&c).unwrap().h >= r.h - 1e-12);
        }
    }

    #[test]
    fn enumeration_above_prefix_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_chain(&mut rng, 14);
        let r = cheeger_exact(&c).unwrap();
        assert!((r.h - brute_force_h(&c)).abs() < 1e-12);
        assert_eq!(r.subset_count_examined, (1 << 13) - 1);
    }

    #[test]
    fn barbell_sweep_separates_bells() {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
        edges.push((4, 5, 1.0));
        let c = WeightedChain::from_undirected_edges(10, &edges).unwrap();
        let exact = cheeger_exact(&c).unwrap();
        assert_eq!(exact.argmin_subset, vec![0, 1, 2, 3, 4]);
        let sweep = cheeger_sweep(&c).unwrap();
        let mut side = sweep.argmin_subset.clone();
        if side[0] != 0 {
            side = (0..10).filter(|x| !side.contains(x)).collect();
        }
        assert_eq!(side, vec![0, 1, 2, 3, 4]);
        assert!((sweep.h - exact.h).abs() < 1e-12);
    }

    #[test]
    fn invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_chain(&mut rng, 9);
        let h = cheeger_exact(&c).unwrap().h;
        let scaled = c.with_scaled_measure(37.5).unwrap();
        assert!((cheeger_exact(&scaled).unwrap().h - h).abs() < 1e-12);
        let perm = [3usize, 7, 0, 8, 1, 5, 2, 6, 4];
        let transitions = c.transitions().map(|(x, y, p)| (perm[x], perm[y], p)).collect();
        let mut measure = vec![0.0; 9];
        for (x, &mx) in c.measure().iter().enumerate() {
            measure[perm[x]] = mx;
        }
        let relabeled = WeightedChain::new(c.labels().to_vec(), measure, transitions, RowMode::Stochastic).unwrap();
        assert!((cheeger_exact(&relabeled).unwrap().h - h).abs() < 1e-12);
    }

    #[test]
    fn cheeger_inequality_examples() {
        let v = verify_cheeger(&swap()).unwrap();
        assert!((v.lower - 0.5).abs() < 1e-12 && (v.lambda1 - 2.0).abs() < 1e-12 && (v.upper - 4.0).abs() < 1e-12);
        let v = verify_cheeger(&k3()).unwrap();
        assert!((v.lower - 9.0 / 32.0).abs() < 1e-12 && (v.upper - 3.0).abs() < 1e-12);
        assert!(v.holds(1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12);
            assert!(verify_cheeger(&random_chain(&mut rng, n)).unwrap().holds(1e-9));
        }
    }

    #[test]
    fn pgl2_truncation_above_bound() {
        for q in [2, 3] {
            let c = build_pgl2_halfline(HalfLineSpec {
                q,
                n: 12,
                mode: TruncationMode::Lumped,
            })
            .unwrap();
            let h = cheeger_exact(&c).unwrap().h;
            assert!(pgl2_cheeger_bound(q).unwrap() <= h + 0.05, "q={q} h={h}");
        }
    }

    #[test]
    fn area_coarea() {
        let c = k3();
        let z = area_coarea_check(&c, &[0.0; 3]).unwrap();
        assert_eq!([z.lhs_area, z.rhs_area, z.lhs_coarea, z.rhs_coarea], [0.0; 4]);
        let ind = area_coarea_check(&c, &[1.0, 0.0, 0.0]).unwrap();
        assert!((ind.lhs_area - 1.0 / 3.0).abs() < 1e-15);
        assert!((ind.lhs_coarea - 1.0 / 3.0).abs() < 1e-15);
        assert!(area_coarea_check(&c, &[1.0, -1.0, 0.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let c = random_chain(&mut rng, 10);
            let u: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..5.0)).collect();
            let r = area_coarea_check(&c, &u).unwrap();
            assert!((r.lhs_area - r.rhs_area).abs() < 1e-12);
            assert!((r.lhs_coarea - r.rhs_coarea).abs() < 1e-12);
        }
    }

    #[test]
    fn proof_display_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let c = random_chain(&mut rng, 8);
            let p = proof_display_check(&c).unwrap();
            assert!(p.lhs <= p.rhs + 1e-9);
        }
    }

    #[test]
    fn size_budget() {
        let edges: Vec<_> = (0..23).map(|i| (i, (i + 1) % 23, 1.0)).collect();
        let c = WeightedChain::from_undirected_edges(23, &edges).unwrap();
        assert!(matches!(cheeger_exact(&c), Err(Error::BudgetExceeded(_))));
        assert!(cheeger_sweep(&c).is_ok());
    }
}
