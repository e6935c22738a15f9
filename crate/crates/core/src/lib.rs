//! Detection of the separability structure of multi-qubit states from
//! SIC-POVM shot data.
//!
//! The numeric core is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod error;
pub mod filter;
pub mod linalg;
pub mod measures;
pub mod partitions;
pub mod pipeline;
pub mod povm;
pub mod qmath;
pub mod scalar;
pub mod seed;
pub mod tomography;

pub use error::{Error, Result};
pub use filter::{EntanglementObservation, NullDistribution, NullKey, NullStore};
pub use measures::{Bipartition, MeasureKind, MeasureValue};
pub use partitions::{Constraint, MinimalSet, SetPartition};
pub use pipeline::{PipelineConfig, RunReport, StateSpec};
pub use povm::{OutcomeCounts, ShotRecord};
pub use qmath::{CorrelatedState, DensityMatrix, PureState};
pub use scalar::Scalar;
pub use tomography::{MleConfig, MleResult};

pub type DensityMatrix64 = qmath::DensityMatrix<f64>;
pub type DensityMatrix32 = qmath::DensityMatrix<f32>;
pub type PureState64 = qmath::PureState<f64>;
pub type PureState32 = qmath::PureState<f32>;
pub type CMatrix64 = linalg::CMatrix<f64>;
pub type CMatrix32 = linalg::CMatrix<f32>;
pub type EffectSet64 = povm::EffectSet<f64>;
pub type EffectSet32 = povm::EffectSet<f32>;
pub type MleResult64 = tomography::MleResult<f64>;
pub type MleResult32 = tomography::MleResult<f32>;
