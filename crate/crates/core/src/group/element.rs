use std::fmt;

use crate::error::{Error, Result};

/// Which group an element lives in. Two elements can only be multiplied when
/// their kinds are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKind {
    /// Free group on `rank` generators.
    Free { rank: u32 },
    /// `SL_dim(Z/pZ)`.
    ModP { p: u64, dim: usize },
    /// Unimodular integer matrices of size `dim`.
    Int { dim: usize },
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Free { rank } => write!(f, "F_{rank}"),
            GroupKind::ModP { p, dim } => write!(f, "SL_{dim}(Z/{p}Z)"),
            GroupKind::Int { dim } => write!(f, "GL_{dim}(Z)"),
        }
    }
}

fn mismatch(a: GroupKind, b: GroupKind) -> Error {
    Error::KindMismatch {
        left: a.to_string(),
        right: b.to_string(),
    }
}

/// Reduced word in the free group of a fixed rank.
///
/// Letters are signed generator indices: `k` is the `k`-th generator and `-k`
/// its inverse, `1 <= |k| <= rank`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FreeWord {
    rank: u32,
    letters: Vec<i32>,
}

impl FreeWord {
    /// Builds a word and freely reduces it.
    pub fn new(rank: u32, letters: impl IntoIterator<Item = i32>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidElement("free group rank must be >= 1".into()));
        }
        let mut reduced = Vec::new();
        for l in letters {
            if l == 0 || l.unsigned_abs() > rank {
                return Err(Error::InvalidElement(format!(
                    "letter {l} out of range for rank {rank}"
                )));
            }
            push_reduced(&mut reduced, l);
        }
        Ok(FreeWord {
            rank,
            letters: reduced,
        })
    }

    pub fn identity(rank: u32) -> Self {
        FreeWord {
            rank,
            letters: Vec::new(),
        }
    }

    /// The generator `a_|letter|^{sign(letter)}`.
    pub fn generator(rank: u32, letter: i32) -> Result<Self> {
        Self::new(rank, [letter])
    }

    /// All `2 * rank` generators in the order `a_1, a_1^-1, a_2, a_2^-1, ...`.
    pub fn symmetric_generators(rank: u32) -> Vec<Self> {
        (1..=rank as i32)
            .flat_map(|i| [i, -i])
            .map(|l| FreeWord {
                rank,
                letters: vec![l],
            })
            .collect()
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        FreeWord {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }

    pub fn mul(&self, other: &FreeWord) -> Result<FreeWord> {
        if self.rank != other.rank {
            return Err(mismatch(
                GroupKind::Free { rank: self.rank },
                GroupKind::Free { rank: other.rank },
            ));
        }
        let mut letters = self.letters.clone();
        for &l in &other.letters {
            push_reduced(&mut letters, l);
        }
        Ok(FreeWord {
            rank: self.rank,
            letters,
        })
    }
}

fn push_reduced(letters: &mut Vec<i32>, l: i32) {
    if letters.last() == Some(&-l) {
        letters.pop();
    } else {
        letters.push(l);
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            let idx = l.unsigned_abs();
            // a, b, c, ... for small ranks
            let name = if self.rank <= 26 {
                ((b'a' + (idx - 1) as u8) as char).to_string()
            } else {
                format!("g{idx}")
            };
            if *l < 0 {
                write!(f, "{name}^-1")?;
            } else {
                write!(f, "{name}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = (acc as u128 * base as u128 % p as u128) as u64;
        }
        base = (base as u128 * base as u128 % p as u128) as u64;
        exp >>= 1;
    }
    acc
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Square matrix over `Z/pZ` with determinant 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatModP {
    p: u64,
    dim: usize,
    entries: Vec<u64>,
}

impl MatModP {
    /// Row-major entries, reduced modulo `p`. Rejects non-prime `p` and
    /// determinants other than 1.
    pub fn new(p: u64, dim: usize, entries: &[i64]) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidElement(format!("modulus {p} is not prime")));
        }
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidElement(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let entries: Vec<u64> = entries
            .iter()
            .map(|&e| e.rem_euclid(p as i64) as u64)
            .collect();
        let m = MatModP { p, dim, entries };
        let det = m.det();
        if det != 1 {
            return Err(Error::InvalidElement(format!(
                "determinant {det} mod {p} is not 1"
            )));
        }
        Ok(m)
    }

    pub fn identity(p: u64, dim: usize) -> Result<Self> {
        let mut e = vec![0i64; dim * dim];
        for i in 0..dim {
            e[i * dim + i] = 1;
        }
        Self::new(p, dim, &e)
    }

    /// `I + sign * E_ij` (0-based indices, `i != j`).
    pub fn elementary(p: u64, dim: usize, i: usize, j: usize, sign: i64) -> Result<Self> {
        if i == j || i >= dim || j >= dim {
            return Err(Error::InvalidElement(format!(
                "elementary matrix needs distinct indices below {dim}, got ({i}, {j})"
            )));
        }
        let mut e = vec![0i64; dim * dim];
        for k in 0..dim {
            e[k * dim + k] = 1;
        }
        e[i * dim + j] = sign;
        Self::new(p, dim, &e)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.dim + j]
    }

    pub fn kind(&self) -> GroupKind {
        GroupKind::ModP {
            p: self.p,
            dim: self.dim,
        }
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == u64::from(i == j)))
    }

    fn det(&self) -> u64 {
        let (p, n) = (self.p, self.dim);
        let mut a = self.entries.clone();
        let mut det = 1u64;
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| a[r * n + col] != 0) else {
                return 0;
            };
            if piv != col {
                for k in 0..n {
                    a.swap(piv * n + k, col * n + k);
                }
                det = (p - det) % p;
            }
            let pv = a[col * n + col];
            det = det * pv % p;
            let pinv = inv_mod(pv, p);
            for r in col + 1..n {
                let f = a[r * n + col] * pinv % p;
                if f == 0 {
                    continue;
                }
                for k in col..n {
                    a[r * n + k] = (a[r * n + k] + p - f * a[col * n + k] % p) % p;
                }
            }
        }
        det
    }

    pub fn mul(&self, other: &MatModP) -> Result<MatModP> {
        if self.kind() != other.kind() {
            return Err(mismatch(self.kind(), other.kind()));
        }
        let (p, n) = (self.p, self.dim);
        let mut out = vec![0u64; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] = (out[i * n + j] + a * other.entries[k * n + j]) % p;
                }
            }
        }
        Ok(MatModP {
            p,
            dim: n,
            entries: out,
        })
    }

    pub fn inverse(&self) -> MatModP {
        let (p, n) = (self.p, self.dim);
        let mut a = self.entries.clone();
        let mut inv = vec![0u64; n * n];
        for i in 0..n {
            inv[i * n + i] = 1;
        }
        for col in 0..n {
            // det = 1, so a pivot always exists
            let piv = (col..n).find(|&r| a[r * n + col] != 0).expect("invertible");
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
            let pinv = inv_mod(a[col * n + col], p);
            for k in 0..n {
                a[col * n + k] = a[col * n + k] * pinv % p;
                inv[col * n + k] = inv[col * n + k] * pinv % p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f == 0 {
                    continue;
                }
                for k in 0..n {
                    a[r * n + k] = (a[r * n + k] + p - f * a[col * n + k] % p) % p;
                    inv[r * n + k] = (inv[r * n + k] + p - f * inv[col * n + k] % p) % p;
                }
            }
        }
        MatModP {
            p,
            dim: n,
            entries: inv,
        }
    }

    /// Base-`p` encoding of the entries, if it fits in a `u64`.
    pub fn key(&self) -> Option<u64> {
        let mut k: u64 = 0;
        for &e in &self.entries {
            k = k.checked_mul(self.p)?.checked_add(e)?;
        }
        Some(k)
    }

    /// Inverse of [`MatModP::key`]; the caller guarantees the key came from a
    /// matrix of the same `p` and `dim`.
    pub(crate) fn from_key(p: u64, dim: usize, mut key: u64) -> MatModP {
        let mut entries = vec![0u64; dim * dim];
        for slot in entries.iter_mut().rev() {
            *slot = key % p;
            key /= p;
        }
        MatModP { p, dim, entries }
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.dim).map(<[u64]>::to_vec).collect()
    }
}

/// Square integer matrix with determinant ±1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatZ {
    dim: usize,
    entries: Vec<i64>,
}

impl MatZ {
    pub fn new(dim: usize, entries: &[i64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidElement(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let det = det_i128(entries, dim);
        if det != 1 && det != -1 {
            return Err(Error::InvalidElement(format!(
                "integer matrix has determinant {det}, not +-1"
            )));
        }
        Ok(MatZ {
            dim,
            entries: entries.to_vec(),
        })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidElement("matrix rows must be square".into()));
        }
        let flat: Vec<i64> = rows.iter().flatten().copied().collect();
        Self::new(dim, &flat)
    }

    pub fn identity(dim: usize) -> Self {
        let mut e = vec![0i64; dim * dim];
        for i in 0..dim {
            e[i * dim + i] = 1;
        }
        MatZ { dim, entries: e }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim + j]
    }

    pub fn kind(&self) -> GroupKind {
        GroupKind::Int { dim: self.dim }
    }

    pub fn det(&self) -> i64 {
        det_i128(&self.entries, self.dim) as i64
    }

    pub fn is_identity(&self) -> bool {
        *self == MatZ::identity(self.dim)
    }

    pub fn mul(&self, other: &MatZ) -> Result<MatZ> {
        if self.dim != other.dim {
            return Err(mismatch(self.kind(), other.kind()));
        }
        let n = self.dim;
        let mut out = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc: i64 = 0;
                for k in 0..n {
                    acc = self.entries[i * n + k]
                        .checked_mul(other.entries[k * n + j])
                        .and_then(|t| acc.checked_add(t))
                        .ok_or_else(|| {
                            Error::InvalidElement("integer matrix product overflows i64".into())
                        })?;
                }
                out[i * n + j] = acc;
            }
        }
        Ok(MatZ {
            dim: n,
            entries: out,
        })
    }

    pub fn transpose(&self) -> MatZ {
        let n = self.dim;
        let mut out = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.entries[i * n + j];
            }
        }
        MatZ {
            dim: n,
            entries: out,
        }
    }

    /// Exact inverse via the adjugate (the determinant is ±1).
    pub fn inverse(&self) -> MatZ {
        let n = self.dim;
        let det = det_i128(&self.entries, n);
        if n == 1 {
            return MatZ {
                dim: 1,
                entries: vec![(1 / det) as i64],
            };
        }
        let mut out = vec![0i64; n * n];
        let mut minor = Vec::with_capacity((n - 1) * (n - 1));
        for i in 0..n {
            for j in 0..n {
                minor.clear();
                for r in (0..n).filter(|&r| r != j) {
                    for c in (0..n).filter(|&c| c != i) {
                        minor.push(self.entries[r * n + c]);
                    }
                }
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                out[i * n + j] = (sign * det_i128(&minor, n - 1) * det) as i64;
            }
        }
        MatZ {
            dim: n,
            entries: out,
        }
    }

    /// Applies the matrix to an integer vector.
    pub fn apply(&self, v: &[i64]) -> Result<Vec<i64>> {
        let n = self.dim;
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        (0..n)
            .map(|i| {
                (0..n).try_fold(0i64, |acc, k| {
                    self.entries[i * n + k]
                        .checked_mul(v[k])
                        .and_then(|t| acc.checked_add(t))
                        .ok_or_else(|| Error::InvalidElement("vector image overflows i64".into()))
                })
            })
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.dim).map(<[i64]>::to_vec).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| e as f64).collect()
    }
}

/// Fraction-free (Bareiss) determinant.
fn det_i128(entries: &[i64], n: usize) -> i128 {
    if n == 0 {
        return 1;
    }
    let mut a: Vec<i128> = entries.iter().map(|&e| e as i128).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k * n + k] == 0 {
            let Some(r) = (k + 1..n).find(|&r| a[r * n + k] != 0) else {
                return 0;
            };
            for c in 0..n {
                a.swap(k * n + c, r * n + c);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
        }
        prev = a[k * n + k];
    }
    sign * a[(n - 1) * n + (n - 1)]
}

/// Element of one of the supported groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Free(FreeWord),
    ModP(MatModP),
    Int(MatZ),
}

impl GroupElement {
    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::Free(w) => GroupKind::Free { rank: w.rank },
            GroupElement::ModP(m) => m.kind(),
            GroupElement::Int(m) => m.kind(),
        }
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::Free(a), GroupElement::Free(b)) => a.mul(b).map(GroupElement::Free),
            (GroupElement::ModP(a), GroupElement::ModP(b)) => a.mul(b).map(GroupElement::ModP),
            (GroupElement::Int(a), GroupElement::Int(b)) => a.mul(b).map(GroupElement::Int),
            _ => Err(mismatch(self.kind(), other.kind())),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Free(w) => GroupElement::Free(w.inverse()),
            GroupElement::ModP(m) => GroupElement::ModP(m.inverse()),
            GroupElement::Int(m) => GroupElement::Int(m.inverse()),
        }
    }

    pub fn identity(kind: GroupKind) -> Result<GroupElement> {
        Ok(match kind {
            GroupKind::Free { rank } => GroupElement::Free(FreeWord::identity(rank)),
            GroupKind::ModP { p, dim } => GroupElement::ModP(MatModP::identity(p, dim)?),
            GroupKind::Int { dim } => GroupElement::Int(MatZ::identity(dim)),
        })
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Free(w) => w.is_empty(),
            GroupElement::ModP(m) => m.is_identity(),
            GroupElement::Int(m) => m.is_identity(),
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Free(w) => write!(f, "{w}"),
            GroupElement::ModP(m) => write!(f, "{:?}", m.rows()),
            GroupElement::Int(m) => write!(f, "{:?}", m.rows()),
        }
    }
}

impl From<FreeWord> for GroupElement {
    fn from(w: FreeWord) -> Self {
        GroupElement::Free(w)
    }
}

impl From<MatModP> for GroupElement {
    fn from(m: MatModP) -> Self {
        GroupElement::ModP(m)
    }
}

impl From<MatZ> for GroupElement {
    fn from(m: MatZ) -> Self {
        GroupElement::Int(m)
    }
}

/// Order of `SL_dim(Z/pZ)`: `p^(d(d-1)/2) * prod_{i=2..d} (p^i - 1)`.
pub fn sl_order(p: u64, dim: usize) -> Option<u64> {
    let mut order = p.checked_pow((dim * (dim - 1) / 2) as u32)?;
    for i in 2..=dim as u32 {
        order = order.checked_mul(p.checked_pow(i)? - 1)?;
    }
    Some(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(letters: &[i32]) -> FreeWord {
        FreeWord::new(2, letters.iter().copied()).unwrap()
    }

    #[test]
    fn free_inverse_cancels() {
        let a = w(&[1]);
        assert!(a.mul(&a.inverse()).unwrap().is_empty());
    }

    #[test]
    fn free_one_step_reduction() {
        // (a b)(b^-1 a) = a a
        let prod = w(&[1, 2]).mul(&w(&[-2, 1])).unwrap();
        assert_eq!(prod.letters(), &[1, 1]);
        assert_eq!(prod.len(), 2);
    }

    #[test]
    fn free_construction_reduces() {
        assert_eq!(w(&[1, 2, -2, -1, 2]).letters(), &[2]);
        assert!(FreeWord::new(2, [3]).is_err());
        assert!(FreeWord::new(2, [0]).is_err());
    }

    #[test]
    fn free_rank_mismatch() {
        let a = FreeWord::generator(2, 1).unwrap();
        let b = FreeWord::generator(3, 1).unwrap();
        assert!(matches!(a.mul(&b), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn elementary_square_mod3() {
        let e12 = MatModP::elementary(3, 2, 0, 1, 1).unwrap();
        let sq = e12.mul(&e12).unwrap();
        assert_eq!(sq.rows(), vec![vec![1, 2], vec![0, 1]]);
    }

    #[test]
    fn modp_rejects_bad_input() {
        assert!(MatModP::new(4, 2, &[1, 0, 0, 1]).is_err());
        assert!(MatModP::new(5, 2, &[2, 0, 0, 1]).is_err());
        assert!(MatModP::new(5, 2, &[1, 0, 0]).is_err());
        // -1 reduces to p - 1
        let m = MatModP::new(5, 2, &[1, -1, 0, 1]).unwrap();
        assert_eq!(m.get(0, 1), 4);
    }

    #[test]
    fn modp_inverse_and_key() {
        let g = MatModP::elementary(7, 3, 0, 2, 3)
            .unwrap()
            .mul(&MatModP::elementary(7, 3, 2, 1, -2).unwrap())
            .unwrap();
        assert!(g.mul(&g.inverse()).unwrap().is_identity());
        let k = g.key().unwrap();
        assert_eq!(MatModP::from_key(7, 3, k), g);
    }

    #[test]
    fn matz_unimodular() {
        assert!(MatZ::new(2, &[2, 0, 0, 1]).is_err());
        let a = MatZ::new(2, &[1, 2, 0, 1]).unwrap();
        let b = MatZ::new(2, &[1, 0, 2, 1]).unwrap();
        let ab = a.mul(&b).unwrap();
        assert_eq!(ab.rows(), vec![vec![5, 2], vec![2, 1]]);
        assert!(ab.mul(&ab.inverse()).unwrap().is_identity());
        let c = MatZ::new(3, &[2, 1, 0, 1, 1, 0, 0, 0, -1]).unwrap();
        assert_eq!(c.det(), -1);
        assert!(c.mul(&c.inverse()).unwrap().is_identity());
    }

    #[test]
    fn sl_orders() {
        assert_eq!(sl_order(3, 2), Some(24));
        assert_eq!(sl_order(2, 3), Some(168));
        assert_eq!(sl_order(5, 3), Some(125 * 124 * 24));
    }
}
