//! Diluted maximum-likelihood reconstruction of reduced density matrices.
//!
//! Starting from the maximally mixed state, each step applies
//! `ρ ← N[(I + εR) ρ (I + εR)]` with `R = (1/M) Σ_m f_m / Tr[ρΠ_m] · Π_m`.
//! A step that would lower the log-likelihood by more than
//! [`MONOTONE_SLACK`] is retried with ε halved, at most [`MAX_HALVINGS`]
//! times.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::povm::{joint_effects, marginalize, BornMap, EffectSet, OutcomeCounts, ShotRecord};
use crate::qmath::DensityMatrix;
use crate::scalar::Scalar;

/// Largest subsystem reconstructed by default.
pub const MAX_RECONSTRUCT_QUBITS: usize = 4;
/// Allowed log-likelihood decrease per accepted step.
pub const MONOTONE_SLACK: f64 = 1e-9;
pub const MAX_HALVINGS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub max_iters: usize,
    /// Dilution ε in (0, 1].
    pub dilution: f64,
    /// Stop once the per-iteration log-likelihood gain drops below this.
    pub convergence_tol: f64,
    /// Probabilities are floored here inside logarithms and ratios.
    pub prob_floor: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            dilution: 0.5,
            convergence_tol: 1e-10,
            prob_floor: 1e-12,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.dilution > 0.0 && self.dilution <= 1.0) {
            return Err(Error::Config(format!("dilution {} outside (0, 1]", self.dilution)));
        }
        if !(self.convergence_tol > 0.0 && self.prob_floor > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form, used for cache keys.
    pub fn canonical(&self) -> String {
        format!(
            "max_iters={};dilution={:e};convergence_tol={:e};prob_floor={:e}",
            self.max_iters, self.dilution, self.convergence_tol, self.prob_floor
        )
    }
}

#[derive(Clone, Debug)]
pub struct MleResult<T: Scalar = f64> {
    pub rho_hat: DensityMatrix<T>,
    /// Log-likelihood after initialization and after every accepted step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub config: MleConfig,
}

impl<T: Scalar> MleResult<T> {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace holds the initial value")
    }
}

/// Outcome frequencies as real weights; exact expected frequencies need not
/// be integers.
#[derive(Clone, Debug, PartialEq)]
pub struct Frequencies {
    parties: Vec<usize>,
    weights: Vec<f64>,
    total: f64,
}

impl Frequencies {
    pub fn new(parties: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let expected = 1usize << (2 * parties.len());
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("frequencies must be finite and non-negative".into()));
        }
        let total = weights.iter().sum();
        Ok(Self {
            parties,
            weights,
            total,
        })
    }

    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

impl From<&OutcomeCounts> for Frequencies {
    fn from(c: &OutcomeCounts) -> Self {
        Self {
            parties: c.parties().to_vec(),
            weights: c.counts().iter().map(|&x| x as f64).collect(),
            total: c.total() as f64,
        }
    }
}

fn log_likelihood_of(probs: &[impl Scalar], weights: &[f64], floor: f64) -> f64 {
    probs
        .iter()
        .zip(weights)
        .filter(|(_, &f)| f > 0.0)
        .map(|(p, &f)| f * p.as_f64().max(floor).ln())
        .sum()
}

fn check_dims(n_parties: usize, effects_parties: usize) -> Result<()> {
    if n_parties != effects_parties {
        return Err(Error::DimensionMismatch {
            expected: 1 << effects_parties,
            found: 1 << n_parties,
        });
    }
    Ok(())
}

/// Entries that decay geometrically towards zero would otherwise end up as
/// subnormal floats, which are an order of magnitude slower to multiply.
fn flush_subnormal<T: Scalar>(m: &mut CMatrix<T>) {
    let tiny = T::min_positive_value() * T::of(1e20);
    for z in m.as_mut_slice() {
        if z.re.abs() < tiny {
            z.re = T::zero();
        }
        if z.im.abs() < tiny {
            z.im = T::zero();
        }
    }
}

/// `Σ_m f_m · ln(max(Tr[ρΠ_m], prob_floor))`.
pub fn log_likelihood<T: Scalar>(
    rho: &DensityMatrix<T>,
    counts: &OutcomeCounts,
    effects: &EffectSet<T>,
    prob_floor: f64,
) -> Result<f64> {
    check_dims(rho.n_qubits(), effects.n_parties())?;
    check_dims(counts.parties().len(), effects.n_parties())?;
    let probs = effects.raw_probabilities(rho.matrix());
    let weights: Vec<f64> = counts.counts().iter().map(|&c| c as f64).collect();
    Ok(log_likelihood_of(&probs, &weights, prob_floor))
}

/// Maximum-likelihood state for observed outcome counts.
pub fn reconstruct<T: Scalar>(
    counts: &OutcomeCounts,
    effects: &EffectSet<T>,
    cfg: &MleConfig,
) -> Result<MleResult<T>> {
    reconstruct_frequencies(&Frequencies::from(counts), effects, cfg)
}

/// [`reconstruct`] on real-valued frequencies.
pub fn reconstruct_frequencies<T: Scalar>(
    freqs: &Frequencies,
    effects: &EffectSet<T>,
    cfg: &MleConfig,
) -> Result<MleResult<T>> {
    let start = DensityMatrix::maximally_mixed(freqs.parties.clone())?;
    reconstruct_from(freqs, effects, cfg, start.into_matrix())
}

/// Runs the iteration from an explicit starting matrix.
pub fn reconstruct_from<T: Scalar>(
    freqs: &Frequencies,
    effects: &EffectSet<T>,
    cfg: &MleConfig,
    start: CMatrix<T>,
) -> Result<MleResult<T>> {
    cfg.validate()?;
    check_dims(freqs.parties.len(), effects.n_parties())?;
    if start.dim() != effects.dim() {
        return Err(Error::DimensionMismatch {
            expected: effects.dim(),
            found: start.dim(),
        });
    }
    if freqs.total <= 0.0 {
        return Err(Error::EmptyCounts);
    }
    let map = BornMap::new(effects);
    let dim = effects.dim();
    let floor = cfg.prob_floor;
    let mut rho = start;
    let mut probs = map.probabilities(&rho);
    let mut ll = log_likelihood_of(&probs, &freqs.weights, floor);
    if !ll.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut weights = vec![T::zero(); freqs.weights.len()];
    let identity = CMatrix::<T>::identity(dim);

    'outer: while iterations < cfg.max_iters {
        iterations += 1;
        for ((w, &f), p) in weights.iter_mut().zip(&freqs.weights).zip(&probs) {
            *w = if f > 0.0 {
                T::of(f / (freqs.total * p.as_f64().max(floor)))
            } else {
                T::zero()
            };
        }
        let r = map.weighted_sum(&weights);
        let mut eps = cfg.dilution;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let step = &identity + &r.scale(T::of(eps));
            let cand = step.matmul(&rho).matmul(&step).hermitized();
            let tr = cand.trace().re;
            let mut cand = cand.scale(T::one() / tr);
            flush_subnormal(&mut cand);
            let cand_probs = map.probabilities(&cand);
            let cand_ll = log_likelihood_of(&cand_probs, &freqs.weights, floor);
            if !cand_ll.is_finite() {
                return Err(Error::NonFiniteLikelihood);
            }
            if cand_ll >= ll - MONOTONE_SLACK {
                accepted = Some((cand, cand_probs, cand_ll));
                break;
            }
            eps *= 0.5;
        }
        let Some((cand, cand_probs, cand_ll)) = accepted else {
            // no ascent direction left at any dilution
            converged = true;
            break 'outer;
        };
        let gain = cand_ll - ll;
        rho = cand;
        probs = cand_probs;
        ll = cand_ll;
        trace.push(ll);
        if gain < cfg.convergence_tol {
            converged = true;
            break;
        }
    }
    let rho_hat = DensityMatrix::from_hermitian_clipped(freqs.parties.clone(), rho)?;
    Ok(MleResult {
        rho_hat,
        log_likelihood_trace: trace,
        iterations_used: iterations,
        converged,
        config: *cfg,
    })
}

/// Every `k`-party subset of `0..n` for `k` in `2..=k_max`, by size then
/// lexicographically.
pub fn rdm_subsets(n: usize, k_max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 2..=k_max.min(n) {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            out.push(combo.clone());
            let mut i = k;
            while i > 0 && combo[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..k {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

/// Reconstructs every RDM of size `2..=k_max` from its own marginal counts.
/// Subsystems are independent and run on the current rayon pool.
pub fn reconstruct_all_rdms<T: Scalar>(
    shots: &ShotRecord,
    k_max: usize,
    cfg: &MleConfig,
) -> Result<BTreeMap<Vec<usize>, MleResult<T>>> {
    if !(2..=MAX_RECONSTRUCT_QUBITS).contains(&k_max) {
        return Err(Error::InvalidArgument(format!(
            "k_max must lie in 2..={MAX_RECONSTRUCT_QUBITS}, got {k_max}"
        )));
    }
    let subsets = rdm_subsets(shots.n_parties(), k_max);
    let results: Vec<Result<(Vec<usize>, MleResult<T>)>> = subsets
        .into_par_iter()
        .map(|subset| {
            let counts = marginalize(shots, &subset)?;
            let effects = joint_effects::<T>(&subset)?;
            let res = reconstruct(&counts, &effects, cfg)?;
            Ok((subset, res))
        })
        .collect();
    results.into_iter().collect()
}

/// JSON form of a reconstructed state: row-major entries with real and
/// imaginary parts interleaved, plus the iteration diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateExport {
    pub labels: Vec<usize>,
    pub dim: usize,
    pub entries: Vec<f64>,
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    pub mle: MleConfig,
}

impl StateExport {
    pub fn from_result<T: Scalar>(res: &MleResult<T>) -> Self {
        let entries = res
            .rho_hat
            .matrix()
            .as_slice()
            .iter()
            .flat_map(|z| [z.re.as_f64(), z.im.as_f64()])
            .collect();
        Self {
            labels: res.rho_hat.labels().to_vec(),
            dim: res.rho_hat.dim(),
            entries,
            iterations: res.iterations_used,
            final_log_likelihood: res.final_log_likelihood(),
            converged: res.converged,
            mle: res.config,
        }
    }

    pub fn to_state(&self) -> Result<DensityMatrix<f64>> {
        if self.entries.len() != 2 * self.dim * self.dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.dim * self.dim,
                found: self.entries.len(),
            });
        }
        let data = self.entries.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect();
        DensityMatrix::new(self.labels.clone(), CMatrix::from_row_major(self.dim, data))
    }
}
