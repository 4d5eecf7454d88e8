//! Complex linear algebra, special functions and seeded random streams.
//!
//! Only what the simulator needs: dense complex matrices with products,
//! conjugate transpose and a Gram-matrix pseudo-inverse; the Bessel function
//! J0; and labelled, reproducible random substreams.

mod bessel;
mod cmatrix;
mod rng;

pub use bessel::bessel_j0;
pub use cmatrix::{hermitian, matmul, pseudo_inverse, CMatrix, SINGULAR_CONDITION};
pub use rng::{cgauss, RngStream};

/// Complex scalar used throughout (double precision).
pub type Complex = num_complex::Complex64;
