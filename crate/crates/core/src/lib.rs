//! Direct (intensity-based) nonlinear observer for homography estimation on SL(3).
//!
//! The crate is organised in layers:
//!
//! - [`sl3`]: the matrix Lie group SL(3) and its algebra sl(3) — projection,
//!   exponential, the orthonormal basis B1..B8, wedge/vee, symmetric/skew split.
//! - [`sphere`]: the right action of SL(3) on the unit sphere, its differential
//!   and area-distortion Jacobian.
//! - [`image`]: raster images, pixel/ray calibration, spherical image maps with
//!   bilinear sampling, tangent-space gradients and solid-angle quadrature.
//! - [`observer`]: the photometric cost, its gradient and Hessian on sl(3), the
//!   scalar / inverse-Hessian / dual-gain correction laws, the discrete-time
//!   observer step and the observability checker.
//! - [`degeneracy`]: synthesis of reference images invariant under
//!   one-parameter subgroups of SL(3) (unobservable configurations).
//! - [`synthetic`]: analytic test images used by oracles and fixtures.

pub mod degeneracy;
pub mod image;
pub mod observer;
pub mod sl3;
pub mod sphere;
pub mod synthetic;

/// 3x3 real matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// 3-vector.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Coordinate vector in the B1..B8 basis of sl(3).
pub type Vec8 = nalgebra::SVector<f64, 8>;
/// 8x8 matrix (cost Hessian in basis coordinates).
pub type Mat8 = nalgebra::SMatrix<f64, 8, 8>;

pub use image::{Calibration, PixelGrid, Quadrature, RasterImage, SphericalImage};
pub use observer::{ErrorReport, GainConfig, ObserverState, TruthState};
pub use sl3::{AlgebraElement, Coordinates8, GroupElement};
pub use sphere::{SpherePoint, TangentVector};
