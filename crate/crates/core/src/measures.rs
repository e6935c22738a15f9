//! Entanglement quantifiers for small reconstructed states.
//!
//! Negativity is the absolute sum of the negative eigenvalues of the partial
//! transpose, `(‖ρ^{T_A}‖₁ − 1)/2`, so a Bell pair has negativity 1/2. A
//! zero value means the partial transpose is positive; it is not a proof of
//! separability.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qmath::DensityMatrix;
use crate::scalar::Scalar;

/// Split of a subsystem into two non-empty blocks. Canonical: both blocks
/// sorted and `block_a` holds the smallest party.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bipartition {
    pub block_a: Vec<usize>,
    pub block_b: Vec<usize>,
}

impl Bipartition {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::DegenerateBipartition);
        }
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        crate::qmath::check_labels(&all)?;
        all.sort_unstable();
        if b[0] < a[0] {
            std::mem::swap(&mut a, &mut b);
        }
        Ok(Self { block_a: a, block_b: b })
    }

    /// Sorted union of both blocks.
    pub fn subsystem(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.block_a.iter().chain(&self.block_b).copied().collect();
        all.sort_unstable();
        all
    }

    /// Block sizes as `(smaller, larger)`.
    pub fn shape(&self) -> (usize, usize) {
        let (a, b) = (self.block_a.len(), self.block_b.len());
        (a.min(b), a.max(b))
    }

    pub fn swapped(&self) -> (Vec<usize>, Vec<usize>) {
        (self.block_b.clone(), self.block_a.clone())
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |b: &[usize]| b.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{{{}|{}}}", show(&self.block_a), show(&self.block_b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Concurrence,
    Negativity,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Concurrence => "concurrence",
            Self::Negativity => "negativity",
        }
    }
}

/// One evaluated quantity; `bipartition` is `None` for concurrences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub subsystem: Vec<usize>,
    pub bipartition: Option<Bipartition>,
    pub kind: MeasureKind,
    pub value: f64,
}

impl MeasureValue {
    /// The bipartition the value refers to; for a concurrence, the two singletons.
    pub fn effective_bipartition(&self) -> Bipartition {
        match &self.bipartition {
            Some(b) => b.clone(),
            None => Bipartition::new(&self.subsystem[..1], &self.subsystem[1..])
                .expect("concurrence subsystems have two parties"),
        }
    }
}

/// Wootters concurrence `max(0, λ1−λ2−λ3−λ4)` of a two-qubit state.
///
/// The `λ_i` are the square roots of the eigenvalues of `ρ ρ̃`, obtained as
/// the eigenvalues of the Hermitian `√ρ ρ̃ √ρ`.
pub fn concurrence<T: Scalar>(rho: &DensityMatrix<T>) -> Result<T> {
    if rho.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let m = rho.matrix();
    // σy⊗σy has entries ±1 on the anti-diagonal: (0,3)=-1, (1,2)=1, (2,1)=1, (3,0)=-1
    let yy = CMatrix::from_fn(4, |i, j| {
        if i + j == 3 {
            let s = if i == 0 || i == 3 { -T::one() } else { T::one() };
            Complex::new(s, T::zero())
        } else {
            Complex::zero()
        }
    });
    let flipped = yy.matmul(&m.conj()).matmul(&yy);
    let root = m.sqrt_psd();
    let inner = root.matmul(&flipped).matmul(&root);
    // roundoff of order 1e-16 would otherwise surface as λ of order 1e-8
    let floor = T::zero_eig_tol();
    let mut lam: Vec<T> = inner
        .eigvalsh()
        .into_iter()
        .map(|l| if l > floor { l.sqrt() } else { T::zero() })
        .collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c = lam[0] - lam[1] - lam[2] - lam[3];
    Ok(c.max(T::zero()).min(T::one()))
}

/// Absolute sum of the negative eigenvalues of the partial transpose on
/// `bipartition.block_a`; eigenvalues within `zero_eig_tol` of zero are ignored.
pub fn negativity<T: Scalar>(rho: &DensityMatrix<T>, bipartition: &Bipartition) -> Result<T> {
    let labels = rho.labels();
    let mut sub = bipartition.subsystem();
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    sub.sort_unstable();
    if sub != sorted {
        return Err(Error::InvalidArgument(format!(
            "bipartition {bipartition} does not split register {labels:?}"
        )));
    }
    let pt = rho.partial_transpose(&bipartition.block_a)?;
    let tol = T::zero_eig_tol();
    Ok(pt
        .eigvalsh()
        .into_iter()
        .filter(|&l| l < -tol)
        .fold(T::zero(), |acc, l| acc - l))
}

/// All `2^{k−1} − 1` canonical bipartitions, ordered by `|block_a|` then lexicographically.
pub fn enumerate_bipartitions(subsystem: &[usize]) -> Result<Vec<Bipartition>> {
    if subsystem.len() < 2 {
        return Err(Error::DegenerateBipartition);
    }
    let mut parties = subsystem.to_vec();
    parties.sort_unstable();
    crate::qmath::check_labels(&parties)?;
    let k = parties.len();
    let first = parties[0];
    let rest = &parties[1..];
    let mut out = Vec::with_capacity((1 << (k - 1)) - 1);
    // block_a = {first} ∪ (subset of rest), excluding the full set
    for mask in 0..(1usize << (k - 1)) - 1 {
        let mut a = vec![first];
        let mut b = Vec::new();
        for (i, &p) in rest.iter().enumerate() {
            if mask >> i & 1 == 1 {
                a.push(p);
            } else {
                b.push(p);
            }
        }
        out.push(Bipartition { block_a: a, block_b: b });
    }
    out.sort_by(|x, y| (x.block_a.len(), &x.block_a).cmp(&(y.block_a.len(), &y.block_a)));
    Ok(out)
}

/// Concurrence of every two-party state and negativity of every bipartition
/// of each larger state. Output is ordered by subsystem size, subsystem, then
/// bipartition order.
pub fn measure_all<T: Scalar>(rdms: &BTreeMap<Vec<usize>, DensityMatrix<T>>) -> Result<Vec<MeasureValue>> {
    let mut keys: Vec<&Vec<usize>> = rdms.keys().collect();
    keys.sort_by(|a, b| (a.len(), *a).cmp(&(b.len(), *b)));
    let mut out = Vec::new();
    for key in keys {
        let rho = &rdms[key];
        if rho.n_qubits() != key.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << key.len(),
                found: rho.dim(),
            });
        }
        let subsystem = {
            let mut s = rho.labels().to_vec();
            s.sort_unstable();
            s
        };
        match key.len() {
            0 | 1 => return Err(Error::DegenerateBipartition),
            2 => out.push(MeasureValue {
                subsystem,
                bipartition: None,
                kind: MeasureKind::Concurrence,
                value: concurrence(rho)?.as_f64(),
            }),
            _ => {
                for bip in enumerate_bipartitions(&subsystem)? {
                    let value = negativity(rho, &bip)?.as_f64();
                    out.push(MeasureValue {
                        subsystem: subsystem.clone(),
                        bipartition: Some(bip),
                        kind: MeasureKind::Negativity,
                        value,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Serializes values as JSON lines.
pub fn to_json_lines(values: &[MeasureValue]) -> Result<String> {
    let mut out = String::new();
    for v in values {
        out.push_str(&serde_json::to_string(v)?);
        out.push('\n');
    }
    Ok(out)
}
