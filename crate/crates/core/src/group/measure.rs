use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::element::{sl_order, FreeWord, GroupElement, GroupKind, MatModP, MatZ};
use crate::error::{Error, Result};

/// Tolerance for weight sums and weight comparisons.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Finitely supported probability measure on one group.
///
/// Weights are `f64`; the support is kept in a `BTreeMap` so iteration order
/// (and therefore every floating-point reduction over it) is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureWire", into = "MeasureWire")]
pub struct ProbMeasure {
    kind: GroupKind,
    support: BTreeMap<GroupElement, f64>,
}

impl ProbMeasure {
    /// Builds a measure from weighted atoms. Repeated elements are merged.
    pub fn new(atoms: impl IntoIterator<Item = (GroupElement, f64)>) -> Result<Self> {
        let mut kind = None;
        let mut support: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for (g, w) in atoms {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidMeasure(format!(
                    "weight {w} for {g} is not positive"
                )));
            }
            match kind {
                None => kind = Some(g.kind()),
                Some(k) if k != g.kind() => {
                    return Err(Error::KindMismatch {
                        left: k.to_string(),
                        right: g.kind().to_string(),
                    })
                }
                _ => {}
            }
            *support.entry(g).or_insert(0.0) += w;
        }
        let kind = kind.ok_or_else(|| Error::InvalidMeasure("empty support".into()))?;
        let total: f64 = support.values().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(ProbMeasure { kind, support })
    }

    pub fn uniform(elements: impl IntoIterator<Item = GroupElement>) -> Result<Self> {
        let elements: Vec<GroupElement> = elements.into_iter().collect();
        let w = 1.0 / elements.len() as f64;
        // duplicates would merge to 2w, which is still a valid measure
        let mut atoms: BTreeMap<GroupElement, usize> = BTreeMap::new();
        for g in elements.iter() {
            *atoms.entry(g.clone()).or_insert(0) += 1;
        }
        Self::new(atoms.into_iter().map(|(g, c)| (g, c as f64 * w)))
    }

    pub fn dirac(g: GroupElement) -> Self {
        let kind = g.kind();
        ProbMeasure {
            kind,
            support: BTreeMap::from([(g, 1.0)]),
        }
    }

    /// Uniform measure on `{a_1^{±1}, ..., a_N^{±1}}` in the free group of rank `N`.
    pub fn free_symmetric(rank: u32) -> Self {
        let gens = FreeWord::symmetric_generators(rank);
        Self::uniform(gens.into_iter().map(GroupElement::Free)).expect("nonempty")
    }

    /// Uniform measure on `{a, a^-1, b, b^-1}` for integer matrices `a`, `b`.
    pub fn symmetric_matrix_pair(a: &MatZ, b: &MatZ) -> Result<Self> {
        Self::uniform([
            GroupElement::Int(a.clone()),
            GroupElement::Int(a.inverse()),
            GroupElement::Int(b.clone()),
            GroupElement::Int(b.inverse()),
        ])
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn support(&self) -> &BTreeMap<GroupElement, f64> {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, f64)> {
        self.support.iter().map(|(g, &w)| (g, w))
    }

    pub fn weight(&self, g: &GroupElement) -> f64 {
        self.support.get(g).copied().unwrap_or(0.0)
    }

    /// Mass at the identity.
    pub fn identity_mass(&self) -> f64 {
        self.iter()
            .filter(|(g, _)| g.is_identity())
            .map(|(_, w)| w)
            .sum()
    }

    /// The reflected measure `g -> mu(g^-1)`.
    pub fn reflect(&self) -> Self {
        ProbMeasure {
            kind: self.kind,
            support: self.iter().map(|(g, w)| (g.inverse(), w)).collect(),
        }
    }

    /// True iff `mu(g) == mu(g^-1)` (within [`WEIGHT_TOL`]) on the support.
    pub fn is_symmetric(&self) -> bool {
        self.iter()
            .all(|(g, w)| (self.weight(&g.inverse()) - w).abs() <= WEIGHT_TOL)
    }

    /// `Some(N)` when this is the uniform measure on all `2N` free generators.
    pub fn free_radial_rank(&self) -> Option<u32> {
        let GroupKind::Free { rank } = self.kind else {
            return None;
        };
        let n = 2 * rank as usize;
        if self.len() != n {
            return None;
        }
        let expected = 1.0 / n as f64;
        self.iter()
            .all(|(g, w)| {
                matches!(g, GroupElement::Free(word) if word.len() == 1)
                    && (w - expected).abs() <= WEIGHT_TOL
            })
            .then_some(rank)
    }

    /// Builds without the normalization check; used for convolution results
    /// whose total mass is 1 up to rounding.
    fn from_parts(kind: GroupKind, support: BTreeMap<GroupElement, f64>) -> Self {
        ProbMeasure { kind, support }
    }
}

/// `(mu * nu)(g) = sum_h mu(h) nu(h^-1 g)`.
///
/// Contributions to each product are summed in sorted order, so two products
/// receiving the same multiset of terms get bit-identical weights (this is
/// what makes `reflect(mu) * mu` exactly symmetric).
pub fn convolve(mu: &ProbMeasure, nu: &ProbMeasure) -> Result<ProbMeasure> {
    if mu.kind != nu.kind {
        return Err(Error::KindMismatch {
            left: mu.kind.to_string(),
            right: nu.kind.to_string(),
        });
    }
    let mut acc: HashMap<GroupElement, Vec<f64>> = HashMap::new();
    for (h, wh) in mu.iter() {
        for (k, wk) in nu.iter() {
            acc.entry(h.mul(k)?).or_default().push(wh * wk);
        }
    }
    let support = acc
        .into_iter()
        .map(|(g, mut terms)| {
            terms.sort_by(f64::total_cmp);
            (g, terms.iter().sum::<f64>())
        })
        .collect();
    Ok(ProbMeasure::from_parts(mu.kind, support))
}

/// Elements of the subgroup of `SL_d(Z/pZ)` generated by `generators`, in
/// BFS order from the identity. Fails when more than `budget` elements appear.
pub fn generated_subgroup(generators: &[MatModP], budget: usize) -> Result<Vec<MatModP>> {
    let Some(first) = generators.first() else {
        return Err(Error::InvalidArgument("no generators".into()));
    };
    let (p, dim) = (first.p(), first.dim());
    let mut step: Vec<MatModP> = Vec::new();
    for g in generators {
        if g.kind() != first.kind() {
            return Err(Error::KindMismatch {
                left: first.kind().to_string(),
                right: g.kind().to_string(),
            });
        }
        step.push(g.clone());
        step.push(g.inverse());
    }
    let identity = MatModP::identity(p, dim)?;
    let mut seen: HashSet<MatModP> = HashSet::from([identity.clone()]);
    let mut order = vec![identity.clone()];
    let mut queue = VecDeque::from([identity]);
    while let Some(x) = queue.pop_front() {
        for s in &step {
            let y = x.mul(s)?;
            if seen.insert(y.clone()) {
                if seen.len() > budget {
                    return Err(Error::BudgetExceeded(format!(
                        "subgroup closure exceeds {budget} elements"
                    )));
                }
                order.push(y.clone());
                queue.push_back(y);
            }
        }
    }
    Ok(order)
}

/// Whether the support of `mu` generates the whole group.
///
/// * `SL_d(Z/pZ)`: BFS closure compared against the group order.
/// * Free groups: true when every generator appears as a one-letter atom,
///   false when the support is trivial, unsupported otherwise.
/// * Integer matrices: unsupported.
pub fn check_adapted(mu: &ProbMeasure) -> Result<bool> {
    match mu.kind() {
        GroupKind::ModP { p, dim } => {
            let order = sl_order(p, dim)
                .ok_or_else(|| Error::BudgetExceeded("group order overflows u64".into()))?;
            let gens: Vec<MatModP> = mu
                .iter()
                .filter_map(|(g, _)| match g {
                    GroupElement::ModP(m) => Some(m.clone()),
                    _ => None,
                })
                .collect();
            let closure = generated_subgroup(&gens, order as usize)?;
            Ok(closure.len() as u64 == order)
        }
        GroupKind::Free { rank } => {
            let mut seen = vec![false; rank as usize + 1];
            for (g, _) in mu.iter() {
                if let GroupElement::Free(w) = g {
                    if w.len() == 1 {
                        seen[w.letters()[0].unsigned_abs() as usize] = true;
                    }
                }
            }
            if seen[1..].iter().all(|&s| s) {
                Ok(true)
            } else if mu.iter().all(|(g, _)| g.is_identity()) {
                Ok(false)
            } else {
                Err(Error::Unsupported(
                    "adaptedness of free-group measures is only decided for supports containing every generator".into(),
                ))
            }
        }
        GroupKind::Int { .. } => Err(Error::Unsupported(
            "subgroup membership for integer matrix groups".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// JSON wire format

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct ParamsWire {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rank: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    dim: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AtomWire {
    elem: serde_json::Value,
    w: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MeasureWire {
    variant: String,
    params: ParamsWire,
    support: Vec<AtomWire>,
}

impl From<ProbMeasure> for MeasureWire {
    fn from(mu: ProbMeasure) -> Self {
        let (variant, params) = match mu.kind {
            GroupKind::Free { rank } => (
                "free",
                ParamsWire {
                    rank: Some(rank),
                    ..Default::default()
                },
            ),
            GroupKind::ModP { p, dim } => (
                "matmodp",
                ParamsWire {
                    p: Some(p),
                    dim: Some(dim),
                    ..Default::default()
                },
            ),
            GroupKind::Int { dim } => (
                "matz",
                ParamsWire {
                    dim: Some(dim),
                    ..Default::default()
                },
            ),
        };
        let support = mu
            .support
            .into_iter()
            .map(|(g, w)| AtomWire {
                elem: match g {
                    GroupElement::Free(word) => serde_json::json!(word.letters()),
                    GroupElement::ModP(m) => serde_json::json!(m.rows()),
                    GroupElement::Int(m) => serde_json::json!(m.rows()),
                },
                w,
            })
            .collect();
        MeasureWire {
            variant: variant.to_string(),
            params,
            support,
        }
    }
}

fn param<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidMeasure(format!("missing param '{name}'")))
}

impl TryFrom<MeasureWire> for ProbMeasure {
    type Error = Error;

    fn try_from(wire: MeasureWire) -> Result<Self> {
        let mut atoms = Vec::with_capacity(wire.support.len());
        for atom in wire.support {
            let g = match wire.variant.as_str() {
                "free" => {
                    let rank = param(wire.params.rank, "rank")?;
                    let letters: Vec<i32> = serde_json::from_value(atom.elem)?;
                    GroupElement::Free(FreeWord::new(rank, letters)?)
                }
                "matmodp" => {
                    let p = param(wire.params.p, "p")?;
                    let dim = param(wire.params.dim, "dim")?;
                    let rows: Vec<Vec<i64>> = serde_json::from_value(atom.elem)?;
                    if rows.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: rows.len(),
                        });
                    }
                    let flat: Vec<i64> = rows.into_iter().flatten().collect();
                    GroupElement::ModP(MatModP::new(p, dim, &flat)?)
                }
                "matz" => {
                    let dim = param(wire.params.dim, "dim")?;
                    let rows: Vec<Vec<i64>> = serde_json::from_value(atom.elem)?;
                    let m = MatZ::from_rows(&rows)?;
                    if m.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: m.dim(),
                        });
                    }
                    GroupElement::Int(m)
                }
                other => {
                    return Err(Error::InvalidMeasure(format!("unknown variant '{other}'")))
                }
            };
            atoms.push((g, atom.w));
        }
        ProbMeasure::new(atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(letters: &[i32]) -> GroupElement {
        GroupElement::Free(FreeWord::new(2, letters.iter().copied()).unwrap())
    }

    #[test]
    fn dirac_identity_is_neutral() {
        let mu = ProbMeasure::free_symmetric(2);
        let e = ProbMeasure::dirac(free(&[]));
        assert_eq!(convolve(&e, &mu).unwrap(), mu);
        assert_eq!(convolve(&mu, &e).unwrap(), mu);
    }

    #[test]
    fn free_return_probabilities() {
        let mu = ProbMeasure::free_symmetric(2);
        let nu = convolve(&mu.reflect(), &mu).unwrap();
        assert!((nu.identity_mass() - 0.25).abs() < 1e-15);
        let nu2 = convolve(&nu, &nu).unwrap();
        // Brute-force double sum over length-4 walks: 28 closed walks out of 256.
        let mut closed = 0usize;
        let gens = [1, -1, 2, -2];
        for a in gens {
            for b in gens {
                for c in gens {
                    for d in gens {
                        if FreeWord::new(2, [a, b, c, d]).unwrap().is_empty() {
                            closed += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(closed, 28);
        assert!((nu2.identity_mass() - 7.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(ProbMeasure::new([(free(&[1]), 0.5)]).is_err());
        assert!(ProbMeasure::new([(free(&[1]), -0.5), (free(&[2]), 1.5)]).is_err());
        let other = GroupElement::Free(FreeWord::generator(3, 1).unwrap());
        assert!(matches!(
            ProbMeasure::new([(free(&[1]), 0.5), (other, 0.5)]),
            Err(Error::KindMismatch { .. })
        ));
        assert!(ProbMeasure::new(Vec::new()).is_err());
    }

    #[test]
    fn convolve_kind_mismatch() {
        let a = ProbMeasure::free_symmetric(2);
        let b = ProbMeasure::free_symmetric(3);
        assert!(convolve(&a, &b).is_err());
    }

    #[test]
    fn symmetry_checks() {
        assert!(ProbMeasure::free_symmetric(2).is_symmetric());
        let ab = ProbMeasure::uniform([free(&[1]), free(&[2])]).unwrap();
        assert!(!ab.is_symmetric());
        assert!(convolve(&ab.reflect(), &ab).unwrap().is_symmetric());
        assert_eq!(ProbMeasure::free_symmetric(2).free_radial_rank(), Some(2));
        assert_eq!(ab.free_radial_rank(), None);
    }

    #[test]
    fn adaptedness() {
        let gens = [
            MatModP::elementary(3, 2, 0, 1, 1).unwrap(),
            MatModP::elementary(3, 2, 0, 1, -1).unwrap(),
            MatModP::elementary(3, 2, 1, 0, 1).unwrap(),
            MatModP::elementary(3, 2, 1, 0, -1).unwrap(),
        ];
        let closure = generated_subgroup(&gens, 1000).unwrap();
        assert_eq!(closure.len(), 24);
        let mu = ProbMeasure::uniform(gens.iter().cloned().map(GroupElement::ModP)).unwrap();
        assert!(check_adapted(&mu).unwrap());

        let id = ProbMeasure::dirac(GroupElement::ModP(MatModP::identity(3, 2).unwrap()));
        assert!(!check_adapted(&id).unwrap());

        assert!(check_adapted(&ProbMeasure::free_symmetric(2)).unwrap());
        let int = ProbMeasure::dirac(GroupElement::Int(MatZ::identity(2)));
        assert!(matches!(check_adapted(&int), Err(Error::Unsupported(_))));
    }

    #[test]
    fn json_round_trip() {
        let a = MatZ::new(2, &[1, 2, 0, 1]).unwrap();
        let b = MatZ::new(2, &[1, 0, 2, 1]).unwrap();
        for mu in [
            ProbMeasure::free_symmetric(2),
            ProbMeasure::symmetric_matrix_pair(&a, &b).unwrap(),
            ProbMeasure::dirac(GroupElement::ModP(
                MatModP::elementary(5, 3, 0, 2, 1).unwrap(),
            )),
        ] {
            let s = serde_json::to_string(&mu).unwrap();
            let back: ProbMeasure = serde_json::from_str(&s).unwrap();
            assert_eq!(back, mu);
        }
        let s = r#"{"variant":"free","params":{"rank":2},"support":[{"elem":[1,-2],"w":1.0}]}"#;
        let mu: ProbMeasure = serde_json::from_str(s).unwrap();
        assert_eq!(mu.support().keys().next().unwrap(), &free(&[1, -2]));
        let bad = r#"{"variant":"matz","params":{"dim":2},"support":[{"elem":[[2,0],[0,1]],"w":1.0}]}"#;
        assert!(serde_json::from_str::<ProbMeasure>(bad).is_err());
    }
}
