//! Debiasable transport costs on finite spaces.
//!
//! Everything is generic over the scalar: `f32`/`f64` through [`Real`], and
//! exact rationals through [`ExactReal`] for the combinatorial checks on costs.
//!
//! ```
//! use debiasot::costs::CostMatrix;
//! use debiasot::divergences::sinkhorn_divergence;
//! use debiasot::measures::DiscreteMeasure;
//! use ndarray::array;
//!
//! let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]])?;
//! let mu = DiscreteMeasure::probability(array![0.3, 0.7])?;
//! let nu = DiscreteMeasure::probability(array![0.6, 0.4])?;
//! let s = sinkhorn_divergence(&c, &mu, &nu, 0.5, 1e-12)?;
//! assert!(s.debiased >= 0.0);
//! # Ok::<(), debiasot::Error>(())
//! ```

pub mod costs;
pub mod decomposition;
pub mod divergences;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod numeric;
pub mod random;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::{ExactReal, Extended, ExtendedReal, Real};

pub type MeasureF64 = measures::DiscreteMeasure<f64>;
pub type MeasureF32 = measures::DiscreteMeasure<f32>;
pub type CostF64 = costs::CostMatrix<f64>;
pub type CostF32 = costs::CostMatrix<f32>;
pub type ExactCost = costs::CostMatrix<ExactReal>;
pub type KernelF64 = kernels::KernelMatrix<f64>;
pub type CouplingF64 = measures::CouplingTensor<f64>;
