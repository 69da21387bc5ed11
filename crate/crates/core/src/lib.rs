//! Rigid point-cloud registration by kernel inner-product maximization.
//!
//! Each cloud is viewed as a function `f_X = Σ ℓ_X(x_i) k(·, x_i)` in a
//! reproducing kernel Hilbert space, where `k` is a squared-exponential
//! kernel over positions and `ℓ_X` carries per-point appearance channels
//! (color, intensity, semantic class probabilities). The relative pose is
//! the rigid transform `T` maximizing
//!
//! ```text
//! F(T) = Σ_ij c_ij · k(x_i, T·z_j),      c_ij = Π_channels k_c(u_i, v_j)
//! ```
//!
//! which is solved by annealed gradient ascent over SE(3). The normalized
//! value `F / sqrt(|X||Z|)` is exposed as an alignment indicator.
//!
//! The crate is `no_std` (with `alloc`). The default `parallel` feature pulls
//! in `std` and rayon for data-parallel pair construction and summation;
//! results are bitwise identical with and without it.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod grid;
pub(crate) mod math;
mod sum;

pub mod cloud;
pub mod eval;
pub mod innerprod;
pub mod kernels;
pub mod registration;
pub mod se3;

pub use crate::cloud::{ChannelKind, FeatureChannel, FeatureSchema, PointCloud, Violation};
pub use crate::error::{Error, Result};
pub use crate::grid::CellGrid;
pub use crate::innerprod::{AlignmentReport, Pair, PairList};
pub use crate::kernels::{ChannelKernel, KernelForm, KernelParams};
pub use crate::registration::{RegistrationConfig, RegistrationResult};
pub use crate::se3::{Isometry, Twist};

pub use nalgebra::{Matrix3, Vector3};
