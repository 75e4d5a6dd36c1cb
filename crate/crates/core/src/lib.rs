//! Monte Carlo estimators for functionals of Brownian local time.
//!
//! A replica is one discretized Brownian path on `[0, t]`. From it the crate
//! estimates the local time field `x ↦ L_t(x)`, the L²-modulus
//! `G_t(h) = ∫ (L_t(x+h) − L_t(x))² dx`, three estimators of the
//! self-intersection local time `α_t = ∫ L_t(x)² dx`, the statistic
//! `Ψ_h(r)` with the bracket and covariation of the associated martingale,
//! and the Clark–Ocone integrand of `G_t(h)`. The [`harness`] module sweeps
//! replicas over a grid of `h` and standardizes `G_t(h)` so that its law can
//! be compared with a standard normal.
//!
//! Path, field and functional code is generic over the floating point type
//! through [`Scalar`]; the `*64` aliases below fix it to `f64`, which is what
//! the sweep and the command line use.

pub mod config;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod local_time;
pub mod output;
pub mod path_engine;
pub mod rank;
pub mod stats;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use config::{AlphaMode, Centering, Diagnostics, SimConfig};
pub use error::{Error, Result};
pub use functionals::ReplicaRecord;
pub use harness::{run_sweep, SweepResult};
pub use local_time::LocalTimeField;
pub use path_engine::{derive_replica_seed, simulate_path, PathGrid};

/// Floating point type the estimators are written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every `Scalar` can represent (a rounding
    /// of) any finite `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts to Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type PathGrid64 = PathGrid<f64>;
pub type PathGrid32 = PathGrid<f32>;
pub type LocalTimeField64 = LocalTimeField<f64>;
pub type LocalTimeField32 = LocalTimeField<f32>;
