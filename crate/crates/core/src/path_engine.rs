//! Discretized Brownian paths with counter-based per-replica seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::Scalar;

/// Identifier of the seed derivation recorded in run manifests.
pub const SEED_SCHEME: &str = "splitmix64(master + splitmix64(index)) -> ChaCha8";

/// A Brownian path sampled on the uniform grid `k * dt`, `k = 0..=n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid<T> {
    t: T,
    dt: T,
    values: Vec<T>,
}

impl<T: Scalar> PathGrid<T> {
    /// Wraps sampled values `B_0, ..., B_n` on `[0, t]`. `values[0]` must be 0.
    pub fn from_values(t: T, values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a path needs at least two samples, got {}",
                values.len()
            )));
        }
        if !(t.is_finite() && t >= T::zero()) {
            return Err(Error::InvalidInput(format!("terminal time {t} must be >= 0")));
        }
        if values[0] != T::zero() {
            return Err(Error::InvalidInput("paths start at 0".to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path values must be finite".to_string()));
        }
        let n = values.len() - 1;
        Ok(PathGrid {
            t,
            dt: t / T::of(n as f64),
            values,
        })
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `B` at grid index `k`.
    pub fn at(&self, k: usize) -> T {
        self.values[k]
    }

    /// The path reflected through zero, `−B`.
    pub fn negated(&self) -> Self {
        PathGrid {
            t: self.t,
            dt: self.dt,
            values: self.values.iter().map(|&v| -v).collect(),
        }
    }

    /// The path restricted to `[0, k * dt]`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_steps() {
            return Err(Error::StepIndex {
                index: k,
                n_steps: self.n_steps(),
            });
        }
        Ok(PathGrid {
            t: self.dt * T::of(k as f64),
            dt: self.dt,
            values: self.values[..=k].to_vec(),
        })
    }

    pub fn min_max(&self) -> (T, T) {
        self.values
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica_index`. A composition of bijections of the
/// index, so distinct indices never collide under one master seed.
pub fn derive_replica_seed(master_seed: u64, replica_index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(splitmix64(replica_index)))
}

/// Brownian path on `[0, t]` from i.i.d. `N(0, dt)` increments, fully
/// determined by `(seed, n_steps, t)`.
pub fn brownian_path<T: Scalar>(seed: u64, t: f64, n_steps: usize) -> Result<PathGrid<T>> {
    if n_steps < 2 {
        return Err(Error::Config(format!("n_steps = {n_steps} must be >= 2")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Config(format!("t = {t} must be finite and > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (t / n_steps as f64).sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut b = 0.0f64;
    values.push(T::zero());
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        b += sd * z;
        values.push(T::of(b));
    }
    PathGrid::from_values(T::of(t), values)
}

/// Path of replica `replica_index` under `config`.
pub fn simulate_path<T: Scalar>(config: &SimConfig, replica_index: u64) -> Result<PathGrid<T>> {
    let seed = derive_replica_seed(config.master_seed, replica_index);
    brownian_path(seed, config.t, config.n_steps)
}
