//! Single-qubit SIC-POVM, its tensor-product extension to subsystems, and
//! Born-rule evaluation.
//!
//! A joint effect for parties `U = (u_0, …, u_{k-1})` and outcome tuple
//! `m = (m_0, …, m_{k-1})` is `Π_{m_0} ⊗ … ⊗ Π_{m_{k-1}}`. Outcome tuples are
//! ordered lexicographically, i.e. the flat outcome index is `m` read as a
//! base-4 number with `m_0` most significant.
//!
//! Probabilities and effect-weighted sums are evaluated by applying a 4 × 4
//! single-qubit map along each qubit axis of the density matrix (a
//! mode-by-mode tensor contraction), which costs `O(k·4^k)` instead of the
//! `O(16^k)` of tracing every dense joint effect.

mod shots;

pub use shots::{
    format_shots, load_shots, marginalize, parse_shots, sample_shots, save_shots, OutcomeCounts,
    ShotMetadata, ShotRecord, MAX_SAMPLING_QUBITS, SHOT_CHUNK,
};

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qmath::{check_labels, DensityMatrix, MAX_DENSE_QUBITS};
use crate::scalar::Scalar;

/// Number of outcomes of the single-qubit SIC-POVM.
pub const OUTCOMES: usize = 4;

/// Largest subsystem for which every dense joint effect may be materialized.
pub const MAX_DENSE_EFFECT_QUBITS: usize = 6;

/// The four tetrahedral SIC vectors `|π̃_0⟩ = |0⟩`,
/// `|π̃_k⟩ = (|0⟩ + √2 e^{i2π(k−1)/3}|1⟩)/√3`.
pub fn sic_vectors<T: Scalar>() -> [[Complex<T>; 2]; 4] {
    let mut out = [[Complex::zero(); 2]; 4];
    out[0][0] = Complex::new(T::one(), T::zero());
    let a = 1.0 / 3f64.sqrt();
    let b = (2.0f64 / 3.0).sqrt();
    for (k, v) in out.iter_mut().enumerate().skip(1) {
        let phase = 2.0 * std::f64::consts::PI * (k as f64 - 1.0) / 3.0;
        v[0] = Complex::new(T::of(a), T::zero());
        v[1] = Complex::new(T::of(b * phase.cos()), T::of(b * phase.sin()));
    }
    out
}

/// Single-qubit effects `Π_k = |π̃_k⟩⟨π̃_k| / 2`.
pub fn sic_single_effects<T: Scalar>() -> [CMatrix<T>; 4] {
    let half = T::of(0.5);
    sic_vectors::<T>().map(|v| CMatrix::projector(&v).scale(half))
}

/// Tensor-product SIC-POVM on an ordered set of parties.
#[derive(Clone, Debug)]
pub struct EffectSet<T: Scalar = f64> {
    parties: Vec<usize>,
    single: [CMatrix<T>; 4],
}

/// The single-qubit SIC-POVM on party 0.
pub fn sic_effects<T: Scalar>() -> EffectSet<T> {
    EffectSet {
        parties: vec![0],
        single: sic_single_effects(),
    }
}

/// Joint effects `⊗_{i∈U} Π_{m_i}` for the parties in `subset`.
pub fn joint_effects<T: Scalar>(subset: &[usize]) -> Result<EffectSet<T>> {
    if subset.is_empty() {
        return Err(Error::EmptySubsystem);
    }
    if subset.len() > MAX_DENSE_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: subset.len(),
            max: MAX_DENSE_QUBITS,
        });
    }
    check_labels(subset)?;
    Ok(EffectSet {
        parties: subset.to_vec(),
        single: sic_single_effects(),
    })
}

/// Decodes a flat outcome index into its tuple (most significant party first).
pub fn outcome_tuple(index: usize, k: usize) -> Vec<u8> {
    (0..k).map(|q| ((index >> (2 * (k - 1 - q))) & 3) as u8).collect()
}

/// Encodes an outcome tuple into its flat lexicographic index.
pub fn outcome_index(tuple: &[u8]) -> usize {
    tuple.iter().fold(0usize, |acc, &m| (acc << 2) | m as usize)
}

impl<T: Scalar> EffectSet<T> {
    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    /// Number of joint effects, `4^k`.
    pub fn len(&self) -> usize {
        1 << (2 * self.parties.len())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Hilbert-space dimension `2^k`.
    pub fn dim(&self) -> usize {
        1 << self.parties.len()
    }

    pub fn single_qubit_effects(&self) -> &[CMatrix<T>; 4] {
        &self.single
    }

    /// Dense joint effect for an outcome tuple.
    pub fn effect(&self, outcome: &[u8]) -> Result<CMatrix<T>> {
        if outcome.len() != self.parties.len() {
            return Err(Error::DimensionMismatch {
                expected: self.parties.len(),
                found: outcome.len(),
            });
        }
        let mut acc = CMatrix::identity(1);
        for &m in outcome {
            let m = m as usize;
            if m >= OUTCOMES {
                return Err(Error::InvalidArgument(format!("outcome symbol {m} out of range")));
            }
            acc = acc.kron(&self.single[m]);
        }
        Ok(acc)
    }

    /// Every joint effect in lexicographic outcome order.
    pub fn dense_effects(&self) -> Result<Vec<CMatrix<T>>> {
        let k = self.parties.len();
        if k > MAX_DENSE_EFFECT_QUBITS {
            return Err(Error::TooLarge {
                what: "dense effect materialization",
                n: k,
                max: MAX_DENSE_EFFECT_QUBITS,
            });
        }
        (0..self.len()).map(|i| self.effect(&outcome_tuple(i, k))).collect()
    }

    /// Born probabilities `Tr[ρ Π_m]` without clipping, via the tensor contraction.
    pub fn raw_probabilities(&self, rho: &CMatrix<T>) -> Vec<T> {
        BornMap::new(self).probabilities(rho)
    }
}

/// Precomputed forward/adjoint maps between a `2^k × 2^k` matrix and the
/// `4^k` joint-outcome space of an [`EffectSet`].
#[derive(Clone, Debug)]
pub struct BornMap<T: Scalar> {
    k: usize,
    /// row-major matrix index → paired index `Σ_q (2 i_q + j_q) 4^{k-1-q}`
    pair_of: Vec<usize>,
    /// `forward[m][2i+j] = (Π_m)_{ji}`
    forward: [[Complex<T>; 4]; 4],
    /// `adjoint[2i+j][m] = (Π_m)_{ij}`
    adjoint: [[Complex<T>; 4]; 4],
}

impl<T: Scalar> BornMap<T> {
    pub fn new(effects: &EffectSet<T>) -> Self {
        let k = effects.n_parties();
        let d = 1usize << k;
        let mut pair_of = vec![0usize; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut p = 0usize;
                for q in 0..k {
                    let shift = k - 1 - q;
                    let a = (((i >> shift) & 1) << 1) | ((j >> shift) & 1);
                    p = (p << 2) | a;
                }
                pair_of[i * d + j] = p;
            }
        }
        let mut forward = [[Complex::zero(); 4]; 4];
        let mut adjoint = [[Complex::zero(); 4]; 4];
        for (m, e) in effects.single.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    forward[m][2 * i + j] = e[(j, i)];
                    adjoint[2 * i + j][m] = e[(i, j)];
                }
            }
        }
        Self {
            k,
            pair_of,
            forward,
            adjoint,
        }
    }

    pub fn n_outcomes(&self) -> usize {
        1 << (2 * self.k)
    }

    fn apply_all_axes(&self, buf: &mut [Complex<T>], op: &[[Complex<T>; 4]; 4]) {
        let len = buf.len();
        for q in 0..self.k {
            let stride = 1usize << (2 * (self.k - 1 - q));
            let block = stride * 4;
            let mut base = 0;
            while base < len {
                for inner in 0..stride {
                    let idx = base + inner;
                    let x = [
                        buf[idx],
                        buf[idx + stride],
                        buf[idx + 2 * stride],
                        buf[idx + 3 * stride],
                    ];
                    for (r, row) in op.iter().enumerate() {
                        buf[idx + r * stride] =
                            row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
                    }
                }
                base += block;
            }
        }
    }

    /// `p_m = Tr[ρ Π_m]` for every joint outcome (real part, unclipped).
    pub fn probabilities(&self, rho: &CMatrix<T>) -> Vec<T> {
        let mut buf = vec![Complex::zero(); self.pair_of.len()];
        for (src, &dst) in rho.as_slice().iter().zip(&self.pair_of) {
            buf[dst] = *src;
        }
        self.apply_all_axes(&mut buf, &self.forward);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `Σ_m w_m Π_m`.
    pub fn weighted_sum(&self, weights: &[T]) -> CMatrix<T> {
        assert_eq!(weights.len(), self.n_outcomes(), "one weight per outcome");
        let mut buf: Vec<Complex<T>> = weights.iter().map(|&w| Complex::new(w, T::zero())).collect();
        self.apply_all_axes(&mut buf, &self.adjoint);
        let d = 1usize << self.k;
        let data = self.pair_of.iter().map(|&p| buf[p]).collect();
        CMatrix::from_row_major(d, data)
    }
}

/// Born probabilities of `rho` under `effects`; tiny negative round-off is
/// clipped to zero.
pub fn born_probabilities<T: Scalar>(rho: &DensityMatrix<T>, effects: &EffectSet<T>) -> Result<Vec<T>> {
    if rho.n_qubits() != effects.n_parties() {
        return Err(Error::DimensionMismatch {
            expected: effects.dim(),
            found: rho.dim(),
        });
    }
    Ok(effects
        .raw_probabilities(rho.matrix())
        .into_iter()
        .map(|p| p.max(T::zero()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{ginibre_random_state, smolin_state};

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn sic_completeness_and_positivity() {
        let e = sic_effects::<f64>();
        let mut sum = CMatrix::zeros(2);
        for m in e.dense_effects().unwrap() {
            assert!(m.eigvalsh()[0] >= -1e-12);
            sum = &sum + &m;
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn sic_is_informationally_complete() {
        // Gram matrix of the effects as 4-component operator coordinates.
        let e = sic_effects::<f64>().dense_effects().unwrap();
        let gram = CMatrix::from_fn(4, |a, b| e[a].adjoint().trace_product(&e[b]));
        let eig = gram.eigvalsh();
        assert!(eig[0] > 1e-3, "gram spectrum {eig:?}");
    }

    #[test]
    fn sic_tetrahedron_overlaps() {
        let v = sic_vectors::<f64>();
        for a in 0..4 {
            for b in 0..4 {
                let ov = (v[a][0].conj() * v[b][0] + v[a][1].conj() * v[b][1]).norm_sqr();
                let expect = if a == b { 1.0 } else { 1.0 / 3.0 };
                assert!((ov - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn born_rule_examples() {
        let e = sic_effects::<f64>();
        let zero = DensityMatrix::<f64>::basis_state(vec![0], &[0]).unwrap();
        let p = born_probabilities(&zero, &e).unwrap();
        assert_close(&p, &[0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0], 1e-14);
        let mixed = DensityMatrix::<f64>::maximally_mixed(vec![0]).unwrap();
        assert_close(&born_probabilities(&mixed, &e).unwrap(), &[0.25; 4], 1e-14);
        let two = joint_effects::<f64>(&[0, 1]).unwrap();
        let mixed2 = DensityMatrix::<f64>::maximally_mixed(vec![0, 1]).unwrap();
        assert_close(&born_probabilities(&mixed2, &two).unwrap(), &[1.0 / 16.0; 16], 1e-14);
        assert!(matches!(born_probabilities(&mixed2, &e), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn joint_effects_structure() {
        let one = joint_effects::<f64>(&[3]).unwrap().dense_effects().unwrap();
        let sic = sic_effects::<f64>().dense_effects().unwrap();
        assert_eq!(one, sic);
        let three = joint_effects::<f64>(&[0, 1, 2]).unwrap();
        assert_eq!(three.len(), 64);
        let mut sum = CMatrix::zeros(8);
        for m in three.dense_effects().unwrap() {
            sum = &sum + &m;
        }
        assert!(sum.max_abs_diff(&CMatrix::identity(8)) < 1e-11);
        assert!(matches!(joint_effects::<f64>(&[]), Err(Error::EmptySubsystem)));
        assert!(joint_effects::<f64>(&[1, 1]).is_err());
    }

    #[test]
    fn smolin_probabilities_match_dense_traces() {
        let s = smolin_state::<f64>();
        let e = joint_effects::<f64>(&[0, 1, 2, 3]).unwrap();
        let fast = born_probabilities(&s, &e).unwrap();
        let dense: Vec<f64> = e
            .dense_effects()
            .unwrap()
            .iter()
            .map(|m| s.matrix().trace_product(m).re)
            .collect();
        assert_eq!(fast.len(), 256);
        assert_close(&fast, &dense, 1e-14);
        assert!((fast.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weighted_sum_matches_dense() {
        let e = joint_effects::<f64>(&[0, 1, 2]).unwrap();
        let map = BornMap::new(&e);
        let w: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let fast = map.weighted_sum(&w);
        let mut dense = CMatrix::zeros(8);
        for (m, eff) in e.dense_effects().unwrap().iter().enumerate() {
            dense = &dense + &eff.scale(w[m]);
        }
        assert!(fast.max_abs_diff(&dense) < 1e-13);
        // uniform weights give the identity
        let id = map.weighted_sum(&[1.0; 64]);
        assert!(id.max_abs_diff(&CMatrix::identity(8)) < 1e-13);
    }

    #[test]
    fn probabilities_of_random_state_sum_to_one() {
        let g = ginibre_random_state::<f64>(32, 3, 8).unwrap();
        let e = joint_effects::<f64>(&[0, 1, 2, 3, 4]).unwrap();
        let p = born_probabilities(&g, &e).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn outcome_codec() {
        assert_eq!(outcome_tuple(outcome_index(&[0, 3, 2, 1]), 4), vec![0, 3, 2, 1]);
        assert_eq!(outcome_index(&[1, 0]), 4);
    }
}
