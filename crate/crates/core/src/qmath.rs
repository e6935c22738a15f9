//! Density matrices over labeled qubit registers and the canonical states the
//! pipeline is exercised with.
//!
//! Labels are an explicit ordered list of party ids. The party at position 0
//! is the most significant bit of a basis-state index, so for labels `[a, b]`
//! the state `|01⟩` has party `a` in `|0⟩` and party `b` in `|1⟩`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Scalar;
use crate::seed;

/// Largest register held as a dense matrix (4096 × 4096).
pub const MAX_DENSE_QUBITS: usize = 12;

/// Hermitian, positive semidefinite, unit-trace matrix over labeled qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Scalar = f64> {
    labels: Vec<usize>,
    matrix: CMatrix<T>,
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T: Scalar = f64> {
    amplitudes: Vec<Complex<T>>,
}

/// Separable but classically correlated reference states used for the
/// spurious-entanglement nulls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelatedState {
    /// `(|00⟩⟨00| + |11⟩⟨11|)/2`
    Rho1,
    /// `(|000⟩⟨000| + |111⟩⟨111|)/2`
    Rho2,
    /// `¼ Σ_ij |ij⟩⟨ij| ⊗ |ij⟩⟨ij|`
    Rho3,
}

impl CorrelatedState {
    pub fn n_qubits(self) -> usize {
        match self {
            Self::Rho1 => 2,
            Self::Rho2 => 3,
            Self::Rho3 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rho1 => "rho1",
            Self::Rho2 => "rho2",
            Self::Rho3 => "rho3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rho1" => Some(Self::Rho1),
            "rho2" => Some(Self::Rho2),
            "rho3" => Some(Self::Rho3),
            _ => None,
        }
    }
}

pub(crate) fn check_labels(labels: &[usize]) -> Result<()> {
    let mut seen = labels.to_vec();
    seen.sort_unstable();
    let dups: Vec<usize> = seen.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
    if !dups.is_empty() {
        return Err(Error::LabelCollision(dups));
    }
    Ok(())
}

fn default_labels(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn n_qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl<T: Scalar> DensityMatrix<T> {
    /// Validating constructor: checks dimensions, label uniqueness and all
    /// density-matrix invariants.
    pub fn new(labels: Vec<usize>, matrix: CMatrix<T>) -> Result<Self> {
        let dm = Self::from_parts(labels, matrix)?;
        dm.validate()?;
        Ok(dm)
    }

    /// Checks shape and labels only; positivity is the caller's responsibility.
    pub(crate) fn from_parts(labels: Vec<usize>, matrix: CMatrix<T>) -> Result<Self> {
        let n = n_qubits_for_dim(matrix.dim())?;
        if n != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << labels.len(),
                found: matrix.dim(),
            });
        }
        if n > MAX_DENSE_QUBITS {
            return Err(Error::RegisterTooLarge {
                qubits: n,
                max: MAX_DENSE_QUBITS,
            });
        }
        check_labels(&labels)?;
        Ok(Self { labels, matrix })
    }

    /// Projects a numerically noisy Hermitian matrix onto a valid state:
    /// Hermitizes, clips small negative eigenvalues to zero and renormalizes.
    /// Eigenvalues below `-psd_tol` are rejected.
    pub fn from_hermitian_clipped(labels: Vec<usize>, matrix: CMatrix<T>) -> Result<Self> {
        let h = matrix.hermitized();
        let eig = h.eigh();
        let min = eig.values.first().copied().unwrap_or(T::zero());
        if min < -T::psd_tol() {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min} below tolerance")));
        }
        let clipped: Vec<T> = eig.values.iter().map(|&l| l.max(T::zero())).collect();
        let total: T = clipped.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::InvalidState("zero trace".into()));
        }
        let normalized: Vec<T> = clipped.iter().map(|&l| l / total).collect();
        let m = CMatrix::from_spectrum(&normalized, &eig.vectors).hermitized();
        Self::from_parts(labels, m)
    }

    pub fn maximally_mixed(labels: Vec<usize>) -> Result<Self> {
        let dim = 1usize << labels.len();
        let m = CMatrix::identity(dim).scale(T::one() / T::of_usize(dim));
        Self::from_parts(labels, m)
    }

    /// Computational basis state; `bits[i]` is the value of `labels[i]`.
    pub fn basis_state(labels: Vec<usize>, bits: &[u8]) -> Result<Self> {
        if bits.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: bits.len(),
            });
        }
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b != 0));
        let mut m = CMatrix::zeros(1 << labels.len());
        m[(idx, idx)] = Complex::one();
        Self::from_parts(labels, m)
    }

    pub fn from_pure(state: &PureState<T>, labels: Vec<usize>) -> Result<Self> {
        Self::from_parts(labels, CMatrix::projector(&state.amplitudes))
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::structural_tol();
        let herm = self.matrix.hermiticity_defect();
        if herm > tol {
            return Err(Error::InvalidState(format!("Hermiticity defect {herm}")));
        }
        let tr = self.matrix.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -T::psd_tol() {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> T {
        self.matrix.eigvalsh().first().copied().unwrap_or(T::zero())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn with_labels(self, labels: Vec<usize>) -> Result<Self> {
        Self::from_parts(labels, self.matrix)
    }

    /// Bit position (from the least significant end) of each requested label.
    fn bit_positions(&self, parties: &[usize]) -> Result<Vec<usize>> {
        let n = self.labels.len();
        parties
            .iter()
            .map(|p| {
                self.labels
                    .iter()
                    .position(|l| l == p)
                    .map(|pos| n - 1 - pos)
                    .ok_or(Error::UnknownParty(*p))
            })
            .collect()
    }

    /// `self ⊗ other`, labels concatenated.
    pub fn tensor_product(&self, other: &Self) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        check_labels(&labels)?;
        Self::from_parts(labels, self.matrix.kron(&other.matrix))
    }

    /// Reduced state on `keep`; the kept parties stay in their original order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptySubsystem);
        }
        check_labels(keep)?;
        self.bit_positions(keep)?;
        let kept_labels: Vec<usize> =
            self.labels.iter().copied().filter(|l| keep.contains(l)).collect();
        let n = self.labels.len();
        let kept_bits = self.bit_positions(&kept_labels)?;
        let traced_bits: Vec<usize> = (0..n).filter(|b| !kept_bits.contains(b)).collect();
        let k = kept_bits.len();
        let spread = |compact: usize, bits: &[usize]| -> usize {
            // bits[0] is the most significant compact bit.
            let len = bits.len();
            bits.iter()
                .enumerate()
                .map(|(i, &b)| ((compact >> (len - 1 - i)) & 1) << b)
                .sum()
        };
        let kept_offsets: Vec<usize> = (0..1usize << k).map(|c| spread(c, &kept_bits)).collect();
        let traced_offsets: Vec<usize> =
            (0..1usize << traced_bits.len()).map(|c| spread(c, &traced_bits)).collect();
        let mut out = CMatrix::zeros(1 << k);
        for (i, &oi) in kept_offsets.iter().enumerate() {
            for (j, &oj) in kept_offsets.iter().enumerate() {
                let mut acc = Complex::zero();
                for &t in &traced_offsets {
                    acc = acc + self.matrix[(oi | t, oj | t)];
                }
                out[(i, j)] = acc;
            }
        }
        Self::from_parts(kept_labels, out)
    }

    /// Partial transpose on the parties in `block`. The result is Hermitian
    /// with the same trace but need not be positive, so it is returned as a
    /// bare matrix.
    pub fn partial_transpose(&self, block: &[usize]) -> Result<CMatrix<T>> {
        if block.is_empty() || block.len() >= self.labels.len() {
            return Err(Error::DegenerateBipartition);
        }
        check_labels(block)?;
        let mask: usize = self.bit_positions(block)?.iter().map(|b| 1usize << b).sum();
        let dim = self.dim();
        let mut out = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let swap = (i ^ j) & mask;
                out[(i ^ swap, j ^ swap)] = self.matrix[(i, j)];
            }
        }
        Ok(out)
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.labels != other.labels {
            return Err(Error::InvalidArgument(format!(
                "label mismatch {:?} vs {:?}",
                self.labels, other.labels
            )));
        }
        let root = self.matrix.sqrt_psd();
        let inner = root.matmul(&other.matrix).matmul(&root);
        let s: T = inner.eigvalsh().into_iter().map(|l| l.max(T::zero()).sqrt()).sum();
        Ok((s * s).min(T::one()).max(T::zero()))
    }

    /// `(1-p)·ρ + p·I/dim`.
    pub fn depolarize(&self, p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidArgument(format!("depolarizing strength {p} outside [0, 1]")));
        }
        let dim = self.dim();
        let mut m = self.matrix.scale(T::one() - p);
        let add = p / T::of_usize(dim);
        for i in 0..dim {
            m[(i, i)] = m[(i, i)] + Complex::new(add, T::zero());
        }
        Self::from_parts(self.labels.clone(), m)
    }

    /// Trace distance `½‖ρ - σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let diff = &self.matrix - &other.matrix;
        let s: T = diff.eigvalsh().into_iter().map(|l| l.abs()).sum();
        Ok(s * T::of(0.5))
    }

    pub fn purity(&self) -> T {
        self.matrix.trace_product(&self.matrix).re
    }

    /// Permutes the register so that its labels appear in `order`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                found: order.len(),
            });
        }
        check_labels(order)?;
        let src_bits = self.bit_positions(order)?;
        let n = order.len();
        let map = |idx: usize| -> usize {
            // new position q (bit n-1-q) takes the value of source bit src_bits[q]
            (0..n).map(|q| ((idx >> src_bits[q]) & 1) << (n - 1 - q)).sum()
        };
        let dim = self.dim();
        let perm: Vec<usize> = (0..dim).map(map).collect();
        let mut out = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(perm[i], perm[j])] = self.matrix[(i, j)];
            }
        }
        Self::from_parts(order.to_vec(), out)
    }
}

impl<T: Scalar> PureState<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        n_qubits_for_dim(amplitudes.len())?;
        let norm: T = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - T::one()).abs() > T::unit_norm_tol() {
            return Err(Error::InvalidState(format!("squared norm {norm}")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|ψ⟩⟨ψ|` over parties `0..n`.
    pub fn density(&self) -> DensityMatrix<T> {
        DensityMatrix::from_pure(self, default_labels(self.n_qubits()))
            .expect("pure state dimension already validated")
    }
}

fn real<T: Scalar>(x: f64) -> Complex<T> {
    Complex::new(T::of(x), T::zero())
}

/// The four Bell states, `|Ψ_0⟩ = (|00⟩+|11⟩)/√2`, `|Ψ_1⟩ = (|01⟩+|10⟩)/√2`,
/// `|Ψ_2⟩ = (|00⟩−|11⟩)/√2`, `|Ψ_3⟩ = (|01⟩−|10⟩)/√2`.
pub fn bell_state<T: Scalar>(index: usize) -> PureState<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match index {
        0 => [h, 0.0, 0.0, h],
        1 => [0.0, h, h, 0.0],
        2 => [h, 0.0, 0.0, -h],
        3 => [0.0, h, -h, 0.0],
        _ => panic!("Bell state index {index} out of range"),
    };
    PureState {
        amplitudes: amps.iter().map(|&a| real(a)).collect(),
    }
}

/// Four-qubit Smolin state `¼ Σ_i |Ψ_i⟩⟨Ψ_i|_{01} ⊗ |Ψ_i⟩⟨Ψ_i|_{23}`.
pub fn smolin_state<T: Scalar>() -> DensityMatrix<T> {
    let mut m = CMatrix::<T>::zeros(16);
    for i in 0..4 {
        let b = CMatrix::projector(bell_state::<T>(i).amplitudes());
        m = &m + &b.kron(&b);
    }
    DensityMatrix::from_parts(default_labels(4), m.scale(T::of(0.25)))
        .expect("smolin state is well formed")
}

/// `|W_n⟩`: uniform superposition of the `n` single-excitation basis states.
pub fn w_state<T: Scalar>(n: usize) -> Result<PureState<T>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("W state needs n >= 2, got {n}")));
    }
    if n > MAX_DENSE_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            max: MAX_DENSE_QUBITS,
        });
    }
    let amp = real::<T>(1.0 / (n as f64).sqrt());
    let mut amplitudes = vec![Complex::zero(); 1 << n];
    for q in 0..n {
        amplitudes[1 << q] = amp;
    }
    Ok(PureState { amplitudes })
}

pub fn classically_correlated_state<T: Scalar>(kind: CorrelatedState) -> DensityMatrix<T> {
    let n = kind.n_qubits();
    let mut diag = vec![T::zero(); 1 << n];
    match kind {
        CorrelatedState::Rho1 => {
            diag[0b00] = T::of(0.5);
            diag[0b11] = T::of(0.5);
        }
        CorrelatedState::Rho2 => {
            diag[0b000] = T::of(0.5);
            diag[0b111] = T::of(0.5);
        }
        CorrelatedState::Rho3 => {
            for ij in 0..4 {
                diag[(ij << 2) | ij] = T::of(0.25);
            }
        }
    }
    DensityMatrix::from_parts(default_labels(n), CMatrix::from_diagonal(&diag))
        .expect("correlated state is well formed")
}

/// Ginibre random state `G G† / Tr(G G†)` with `G` a `dim × rank` matrix of
/// independent standard complex Gaussians drawn from the seeded generator.
pub fn ginibre_random_state<T: Scalar>(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix<T>> {
    if rank < 1 || rank > dim {
        return Err(Error::InvalidArgument(format!("rank {rank} outside [1, {dim}]")));
    }
    let n = n_qubits_for_dim(dim)?;
    let mut rng = seed::rng_from_seed(seed);
    let g: Vec<Complex<T>> = (0..dim * rank)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex::new(T::of(re), T::of(im))
        })
        .collect();
    let mut m = CMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = Complex::zero();
            for k in 0..rank {
                acc = acc + g[i * rank + k] * g[j * rank + k].conj();
            }
            m[(i, j)] = acc;
        }
    }
    let tr = m.trace().re;
    DensityMatrix::from_parts(default_labels(n), m.scale(T::one() / tr))
}

/// Haar-random single-qubit pure state from the generator.
pub fn random_qubit_state<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> PureState<T> {
    let mut v: Vec<Complex<f64>> = (0..2)
        .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= norm;
    }
    PureState {
        amplitudes: v.into_iter().map(|a| Complex::new(T::of(a.re), T::of(a.im))).collect(),
    }
}

/// Tensor product of `n` Haar-random single-qubit pure states.
pub fn random_product_state<T: Scalar>(n: usize, seed: u64) -> Result<DensityMatrix<T>> {
    if n < 1 {
        return Err(Error::InvalidArgument("product state needs n >= 1".into()));
    }
    if n > MAX_DENSE_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            max: MAX_DENSE_QUBITS,
        });
    }
    let mut rng = seed::rng_from_seed(seed);
    let mut amps = vec![Complex::<T>::one()];
    for _ in 0..n {
        let q = random_qubit_state::<T, _>(&mut rng);
        amps = amps
            .iter()
            .flat_map(|a| q.amplitudes.iter().map(move |b| *a * *b))
            .collect();
    }
    DensityMatrix::from_parts(default_labels(n), CMatrix::projector(&amps))
}

#[cfg(test)]
mod tests {
    use super::*;

    type Dm = DensityMatrix<f64>;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Direct contraction over explicit indices, independent of the bit bookkeeping above.
    fn brute_partial_trace(rho: &Dm, keep: &[usize]) -> CMatrix<f64> {
        let n = rho.n_qubits();
        let kept: Vec<usize> = (0..n).filter(|q| keep.contains(q)).collect();
        let k = kept.len();
        let mut out = CMatrix::zeros(1 << k);
        for i in 0..rho.dim() {
            for j in 0..rho.dim() {
                let bit = |x: usize, q: usize| (x >> (n - 1 - q)) & 1;
                let traced_equal = (0..n).filter(|q| !kept.contains(q)).all(|q| bit(i, q) == bit(j, q));
                if !traced_equal {
                    continue;
                }
                let ri = kept.iter().fold(0, |acc, &q| (acc << 1) | bit(i, q));
                let rj = kept.iter().fold(0, |acc, &q| (acc << 1) | bit(j, q));
                out[(ri, rj)] += rho.matrix()[(i, j)];
            }
        }
        out
    }

    #[test]
    fn tensor_product_examples() {
        let half = Dm::maximally_mixed(vec![0]).unwrap();
        let other = Dm::maximally_mixed(vec![1]).unwrap();
        let t = half.tensor_product(&other).unwrap();
        assert!(t.matrix().max_abs_diff(Dm::maximally_mixed(vec![0, 1]).unwrap().matrix()) < 1e-15);

        let zero = Dm::basis_state(vec![0], &[0]).unwrap();
        let one = Dm::basis_state(vec![1], &[1]).unwrap();
        let t = zero.tensor_product(&one).unwrap();
        assert_eq!(t, Dm::basis_state(vec![0, 1], &[0, 1]).unwrap());
        assert_eq!(t.labels(), &[0, 1]);

        let a = ginibre_random_state::<f64>(4, 2, 1).unwrap();
        let b = ginibre_random_state::<f64>(2, 2, 2).unwrap().with_labels(vec![5]).unwrap();
        let ab = a.tensor_product(&b).unwrap();
        assert!(close(ab.matrix().trace().re, 1.0, 1e-12));
        ab.validate().unwrap();
    }

    #[test]
    fn tensor_product_rejects_overlap() {
        let a = Dm::maximally_mixed(vec![0, 1]).unwrap();
        let b = Dm::maximally_mixed(vec![1]).unwrap();
        assert!(matches!(a.tensor_product(&b), Err(Error::LabelCollision(v)) if v == vec![1]));
    }

    #[test]
    fn partial_trace_examples() {
        let bell = bell_state::<f64>(0).density();
        let r = bell.partial_trace(&[0]).unwrap();
        assert!(r.matrix().max_abs_diff(Dm::maximally_mixed(vec![0]).unwrap().matrix()) < 1e-15);

        let prod = Dm::basis_state(vec![0, 1], &[0, 1]).unwrap();
        assert_eq!(prod.partial_trace(&[1]).unwrap(), Dm::basis_state(vec![1], &[1]).unwrap());

        assert!(matches!(bell.partial_trace(&[]), Err(Error::EmptySubsystem)));
        assert!(matches!(bell.partial_trace(&[7]), Err(Error::UnknownParty(7))));
    }

    #[test]
    fn partial_trace_smolin_matches_brute_force() {
        let s = smolin_state::<f64>();
        for keep in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
            let fast = s.partial_trace(&keep).unwrap();
            let slow = brute_partial_trace(&s, &keep);
            assert!(fast.matrix().max_abs_diff(&slow) < 1e-15);
            fast.validate().unwrap();
        }
        // arbitrary pair on a random state
        let g = ginibre_random_state::<f64>(16, 16, 9).unwrap();
        let fast = g.partial_trace(&[3, 1]).unwrap();
        assert_eq!(fast.labels(), &[1, 3]);
        assert!(fast.matrix().max_abs_diff(&brute_partial_trace(&g, &[1, 3])) < 1e-14);
    }

    #[test]
    fn partial_trace_composes() {
        let g = ginibre_random_state::<f64>(32, 5, 4).unwrap();
        let two_step = g.partial_trace(&[0, 1, 3]).unwrap().partial_trace(&[1, 3]).unwrap();
        let direct = g.partial_trace(&[1, 3]).unwrap();
        assert!(two_step.matrix().max_abs_diff(direct.matrix()) < 1e-10);
    }

    #[test]
    fn partial_transpose_examples() {
        let bell = bell_state::<f64>(0).density();
        let pt = bell.partial_transpose(&[0]).unwrap();
        let eig = pt.eigvalsh();
        let expect = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in eig.iter().zip(expect) {
            assert!(close(*a, b, 1e-12));
        }
        let g = ginibre_random_state::<f64>(8, 3, 11).unwrap();
        let once = g.partial_transpose(&[0, 2]).unwrap();
        let twice = DensityMatrix::from_parts(g.labels().to_vec(), once.clone())
            .unwrap()
            .partial_transpose(&[0, 2])
            .unwrap();
        assert_eq!(&twice, g.matrix());
        assert!(once.hermiticity_defect() < 1e-12);
        assert!(close(once.trace().re, 1.0, 1e-12));

        let prod = random_product_state::<f64>(3, 5).unwrap();
        for block in [&[0][..], &[1], &[2], &[0, 1]] {
            assert!(prod.partial_transpose(block).unwrap().eigvalsh()[0] >= -1e-9);
        }
        assert!(matches!(bell.partial_transpose(&[]), Err(Error::DegenerateBipartition)));
        assert!(matches!(bell.partial_transpose(&[0, 1]), Err(Error::DegenerateBipartition)));
    }

    #[test]
    fn fidelity_examples() {
        let g = ginibre_random_state::<f64>(4, 3, 2).unwrap();
        assert!(close(g.fidelity(&g).unwrap(), 1.0, 1e-10));
        let zero = Dm::basis_state(vec![0], &[0]).unwrap();
        let one = Dm::basis_state(vec![0], &[1]).unwrap();
        assert!(close(zero.fidelity(&one).unwrap(), 0.0, 1e-12));
        let mixed = Dm::maximally_mixed(vec![0]).unwrap();
        assert!(close(mixed.fidelity(&zero).unwrap(), 0.5, 1e-12));
        let h = ginibre_random_state::<f64>(4, 2, 3).unwrap();
        assert!(close(g.fidelity(&h).unwrap(), h.fidelity(&g).unwrap(), 1e-8));
        let big = Dm::maximally_mixed(vec![0, 1]).unwrap();
        assert!(matches!(big.fidelity(&zero), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn smolin_structure() {
        let s = smolin_state::<f64>();
        s.validate().unwrap();
        let rank = s.matrix().eigvalsh().iter().filter(|&&l| l > 1e-10).count();
        assert_eq!(rank, 4);
        // (1,3) cuts: four eigenvalues of -1/8
        for q in 0..4 {
            let eig = s.partial_transpose(&[q]).unwrap().eigvalsh();
            let neg: f64 = eig.iter().filter(|&&l| l < -1e-10).map(|l| -l).sum();
            assert!(close(neg, 0.5, 1e-12), "qubit {q}: {neg}");
        }
        for block in [[0, 1], [0, 2], [0, 3]] {
            let eig = s.partial_transpose(&block).unwrap().eigvalsh();
            assert!(eig[0] > -1e-10);
        }
        for keep in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
            let r = s.partial_trace(&keep).unwrap();
            for block in [[keep[0]], [keep[1]], [keep[2]]] {
                assert!(r.partial_transpose(&block).unwrap().eigvalsh()[0] > -1e-10);
            }
        }
    }

    #[test]
    fn w_state_examples() {
        let w2 = w_state::<f64>(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(w2.amplitudes()[1].re, h, 1e-15));
        assert!(close(w2.amplitudes()[2].re, h, 1e-15));
        assert_eq!(w2.amplitudes()[0], Complex::zero());
        assert_eq!(w2.amplitudes()[3], Complex::zero());
        for n in 2..=10 {
            assert!(close(w_state::<f64>(n).unwrap().norm_sqr(), 1.0, 1e-12));
        }
        assert!(w_state::<f64>(1).is_err());
    }

    #[test]
    fn correlated_states() {
        for kind in [CorrelatedState::Rho1, CorrelatedState::Rho2, CorrelatedState::Rho3] {
            let r = classically_correlated_state::<f64>(kind);
            r.validate().unwrap();
            assert_eq!(r.n_qubits(), kind.n_qubits());
        }
        let r3 = classically_correlated_state::<f64>(CorrelatedState::Rho3);
        let rank = r3.matrix().eigvalsh().iter().filter(|&&l| l > 1e-12).count();
        assert_eq!(rank, 4);
        let r2 = classically_correlated_state::<f64>(CorrelatedState::Rho2);
        for q in 0..3 {
            assert!(r2.partial_transpose(&[q]).unwrap().eigvalsh()[0] >= 0.0);
        }
    }

    #[test]
    fn ginibre_examples() {
        let one = ginibre_random_state::<f64>(1, 1, 0).unwrap();
        assert!(close(one.matrix()[(0, 0)].re, 1.0, 1e-15));
        for seed in 0..1000 {
            ginibre_random_state::<f64>(16, 1 + (seed as usize % 16), seed).unwrap().validate().unwrap();
        }
        assert_eq!(
            ginibre_random_state::<f64>(8, 3, 42).unwrap(),
            ginibre_random_state::<f64>(8, 3, 42).unwrap()
        );
        assert!(ginibre_random_state::<f64>(4, 0, 1).is_err());
        assert!(ginibre_random_state::<f64>(4, 5, 1).is_err());
    }

    #[test]
    fn depolarize_examples() {
        let s = smolin_state::<f64>();
        assert_eq!(s.depolarize(0.0).unwrap(), s);
        let full = s.depolarize(1.0).unwrap();
        assert!(full.matrix().max_abs_diff(Dm::maximally_mixed(vec![0, 1, 2, 3]).unwrap().matrix()) < 1e-15);
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let f = s.depolarize(step as f64 / 10.0).unwrap().fidelity(&s).unwrap();
            assert!(f <= last + 1e-12);
            last = f;
        }
        assert!(s.depolarize(1.5).is_err());
        assert!(s.depolarize(-0.1).is_err());
    }

    #[test]
    fn reorder_roundtrip() {
        let g = ginibre_random_state::<f64>(8, 2, 5).unwrap();
        let r = g.reordered(&[2, 0, 1]).unwrap();
        assert_eq!(r.labels(), &[2, 0, 1]);
        let back = r.reordered(&[0, 1, 2]).unwrap();
        assert!(back.matrix().max_abs_diff(g.matrix()) < 1e-15);
        // marginal of a reordered state is the same state
        let a = g.partial_trace(&[0, 2]).unwrap();
        let b = r.partial_trace(&[0, 2]).unwrap().reordered(&[0, 2]).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-15);
    }

    #[test]
    fn validating_constructor_rejects_bad_input() {
        let m = CMatrix::<f64>::from_diagonal(&[1.5, -0.5]);
        assert!(Dm::new(vec![0], m).is_err());
        let m = CMatrix::<f64>::from_diagonal(&[0.5, 0.4]);
        assert!(Dm::new(vec![0], m).is_err());
        let m = CMatrix::<f64>::from_diagonal(&[0.5, 0.5]);
        assert!(Dm::new(vec![0, 1], m.clone()).is_err());
        assert!(Dm::new(vec![0], m).is_ok());
    }

    #[test]
    fn f32_instantiation() {
        let s = smolin_state::<f32>();
        s.validate().unwrap();
        let f = s.fidelity(&s).unwrap();
        assert!((f - 1.0).abs() < 1e-4);
    }
}
