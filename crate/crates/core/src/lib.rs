//! Bounded sums over finite numeric types: emulated arithmetic, dataset
//! metrics, summation algorithms, sensitivity bounds, adversarial dataset
//! generators, and noise mechanisms.

pub mod attacks;
pub mod mechanism;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod summation;
pub mod sensitivity;

pub use error::{Error, Result};
pub use numeric::{
    Arith, DyadicRational, Element, ExactArith, FloatArith, FloatFormat, IntArith, IntFormat,
    KInt, NativeArith, Overflow, Rounding, SimFloat,
};

/// Native single precision through the generic arithmetic interface.
pub type NativeF32 = NativeArith<f32>;
/// Native double precision through the generic arithmetic interface.
pub type NativeF64 = NativeArith<f64>;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
