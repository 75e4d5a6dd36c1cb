//! Occupation-time estimates of Brownian local time.
//!
//! Bins are centered on integer multiples of the bin width, bin `j` covering
//! `[(j − ½) w, (j + ½) w)`, so negating a path mirrors its bins. Step `k`
//! contributes its whole `dt` to the bin holding
//! `B_{k dt}` (left-endpoint rule), so the occupation mass of a field is
//! exactly `n_steps` steps.

use crate::error::{Error, Result};
use crate::path_engine::PathGrid;
use crate::Scalar;

#[inline]
pub(crate) fn bin_of<T: Scalar>(x: T, bin_width: T) -> i64 {
    (x / bin_width + T::of(0.5))
        .floor()
        .to_i64()
        .expect("bin index fits in i64")
}

/// Binned estimate of `x ↦ L_t(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeField<T> {
    first_bin: i64,
    bin_width: T,
    padding: T,
    t: T,
    counts: Vec<u64>,
    values: Vec<T>,
}

impl<T: Scalar> LocalTimeField<T> {
    /// Left edge of the grid.
    pub fn x_min(&self) -> T {
        (T::of(self.first_bin as f64) - T::of(0.5)) * self.bin_width
    }

    pub fn first_bin(&self) -> i64 {
        self.first_bin
    }

    pub fn bin_width(&self) -> T {
        self.bin_width
    }

    pub fn padding(&self) -> T {
        self.padding
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// Per-bin local time, `dt * count / w`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Number of time steps assigned to each bin.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Center of grid bin `j`.
    pub fn bin_center(&self, j: usize) -> T {
        T::of((self.first_bin + j as i64) as f64) * self.bin_width
    }

    /// Value at grid offset `j` (may be negative); zero off the grid.
    #[inline]
    pub fn value_at_offset(&self, j: i64) -> T {
        if j < 0 {
            return T::zero();
        }
        self.values.get(j as usize).copied().unwrap_or_else(T::zero)
    }

    /// Value of the bin containing `x`, zero outside the grid.
    pub fn field_at(&self, x: T) -> T {
        self.value_at_offset(bin_of(x, self.bin_width) - self.first_bin)
    }

    /// Exact integral of the piecewise-constant field over `[a, b]`.
    pub fn integral(&self, a: T, b: T) -> T {
        if b < a {
            return -self.integral(b, a);
        }
        let w = self.bin_width;
        let lo = bin_of(a, w);
        let hi = bin_of(b, w);
        let mut total = T::zero();
        for bin in lo..=hi {
            let left = (T::of(bin as f64) - T::of(0.5)) * w;
            let right = left + w;
            let overlap = b.min(right) - a.max(left);
            if overlap > T::zero() {
                total = total + overlap * self.value_at_offset(bin - self.first_bin);
            }
        }
        total
    }
}

/// Occupation-density estimate of `L_t` on a grid covering the path range
/// widened by `padding` on both sides.
pub fn occupation_field<T: Scalar>(
    path: &PathGrid<T>,
    bin_width: T,
    padding: T,
) -> Result<LocalTimeField<T>> {
    if !(bin_width.is_finite() && bin_width > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "bin_width = {bin_width} must be > 0"
        )));
    }
    if !(padding.is_finite() && padding >= T::zero()) {
        return Err(Error::InvalidInput(format!("padding = {padding} must be >= 0")));
    }
    let n = path.n_steps();
    Ok(occupation_from_samples(
        &path.values()[..n],
        path.dt(),
        path.t(),
        bin_width,
        padding,
    ))
}

/// Bins the samples (one time step each) with the grid widened by `padding`
/// around their full range.
pub(crate) fn occupation_from_samples<T: Scalar>(
    samples: &[T],
    dt: T,
    t: T,
    bin_width: T,
    padding: T,
) -> LocalTimeField<T> {
    let (lo, hi) = samples
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if samples.is_empty() {
        (T::zero(), T::zero())
    } else {
        (lo, hi)
    };
    let first_bin = bin_of(lo - padding, bin_width);
    let last_bin = bin_of(hi + padding, bin_width);
    let len = (last_bin - first_bin + 1) as usize;

    let mut counts = vec![0u64; len];
    for &b in samples {
        counts[(bin_of(b, bin_width) - first_bin) as usize] += 1;
    }
    let scale = dt / bin_width;
    let values = counts.iter().map(|&c| T::of(c as f64) * scale).collect();
    LocalTimeField {
        first_bin,
        bin_width,
        padding,
        t,
        counts,
        values,
    }
}

/// Running diagonal local time: entry `k` is `dt / w` times the number of
/// earlier steps `j < k` whose value shares the bin of `B_k`, an estimate of
/// `L_{k dt}(B_{k dt})`. Length `n_steps + 1`.
pub fn diagonal_local_time_series<T: Scalar>(path: &PathGrid<T>, bin_width: T) -> Result<Vec<T>> {
    if !(bin_width.is_finite() && bin_width > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "bin_width = {bin_width} must be > 0"
        )));
    }
    let (lo, hi) = path.min_max();
    let first = bin_of(lo, bin_width);
    let len = (bin_of(hi, bin_width) - first + 1) as usize;
    let mut running = vec![0u64; len];
    let scale = path.dt() / bin_width;
    let series = path
        .values()
        .iter()
        .map(|&b| {
            let slot = &mut running[(bin_of(b, bin_width) - first) as usize];
            let value = T::of(*slot as f64) * scale;
            *slot += 1;
            value
        })
        .collect();
    Ok(series)
}
