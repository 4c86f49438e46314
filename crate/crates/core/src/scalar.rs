//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (bumps, symbols, quadrature, lattice transforms,
//! functionals) is generic over a real scalar so the same code instantiates
//! at `f64` and `f32`. The experiment suite and the CLI pin `f64` through the
//! aliases exported at the crate root. Constants that are only computed in
//! `f64` (gamma-function values, quadrature nodes) enter generic code through
//! [`Scalar::lit`].

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::Debug;

/// Real scalar usable throughout the core.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Round-trips through `f64` for interop with f64-only helpers.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Debug + Send + Sync + 'static
{
}

/// Scalar that can also drive the FFT backend.
pub trait LatticeScalar: Scalar + rustfft::FftNum {}

impl<T> LatticeScalar for T where T: Scalar + rustfft::FftNum {}
