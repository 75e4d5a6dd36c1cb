//! Per-path functionals of Brownian local time.
//!
//! Every time integral is a left-endpoint Riemann or Itô sum on the path
//! grid. Ψ runs in `O(n log n)` through [`crate::rank`] and the
//! triangular-kernel estimator in `O(n log n)` by sorting; each has a
//! quadratic reference implementation used to cross-check it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_time::{diagonal_local_time_series, LocalTimeField};
use crate::path_engine::PathGrid;
use crate::rank::{Fenwick, SortedValues};
use crate::stats::{normal_cdf, normal_pdf};
use crate::Scalar;

/// Everything computed for one replica at one `h`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: usize,
    pub h: f64,
    /// `G_t(h)`.
    pub g_modulus: f64,
    pub alpha_field: Option<f64>,
    pub alpha_diag: Option<f64>,
    /// Triangular-kernel estimate of `α_t` at this `h`.
    pub alpha_tri: Option<f64>,
    /// `⟨M^h⟩_t`.
    pub bracket: Option<f64>,
    /// `⟨M^h, B⟩_t`.
    pub covariation: Option<f64>,
    /// `∫₀ᵗ |û_{t,h}(r)|² dr`.
    pub u_hat_l2: Option<f64>,
    /// Discrete Itô integral of the Clark–Ocone integrand.
    pub ito_sum: Option<f64>,
    /// Centering plus `ito_sum`; set once the centering is known.
    pub reconstruction: Option<f64>,
    /// Standardized CLT statistic; `None` for excluded replicas.
    pub z_statistic: Option<f64>,
}

/// L²-modulus `G_t(h) = ∫ (L_t(x+h) − L_t(x))² dx` of a binned field, with
/// `h` snapped to the nearest multiple of the bin width.
pub fn g_modulus<T: Scalar>(field: &LocalTimeField<T>, h: T) -> Result<T> {
    if h == T::zero() {
        return Ok(T::zero());
    }
    let w = field.bin_width();
    if h.is_nan() || h < T::of(4.0) * w {
        return Err(Error::Resolution {
            h: h.as_f64(),
            limit: 4.0 * w.as_f64(),
        });
    }
    if field.padding() < h {
        return Err(Error::Padding {
            padding: field.padding().as_f64(),
            h: h.as_f64(),
        });
    }
    let shift = (h / w).round().to_i64().expect("shift fits in i64");
    let n = field.len() as i64;
    let mut total = T::zero();
    for j in -shift..n {
        let d = field.value_at_offset(j + shift) - field.value_at_offset(j);
        total = total + d * d;
    }
    Ok(total * w)
}

/// `α_t ≈ ∫ L_t(x)² dx` as a Riemann sum over the field.
pub fn alpha_from_field<T: Scalar>(field: &LocalTimeField<T>) -> T {
    let sum_sq = field.values().iter().fold(T::zero(), |acc, &v| acc + v * v);
    sum_sq * field.bin_width()
}

/// `α_t = 2 ∫₀ᵗ L_r(B_r) dr` from the running diagonal local time.
pub fn alpha_diagonal<T: Scalar>(path: &PathGrid<T>, bin_width: T) -> Result<T> {
    let series = diagonal_local_time_series(path, bin_width)?;
    let n = path.n_steps();
    let sum = series[..n].iter().fold(T::zero(), |acc, &v| acc + v);
    Ok(T::of(2.0) * path.dt() * sum)
}

/// `h^{-3} ∫ ((h − |x|)^+)² dx`.
pub const TRIANGULAR_SQUARE_MASS: f64 = 2.0 / 3.0;

fn check_h<T: Scalar>(h: T) -> Result<()> {
    if h.is_finite() && h > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("h = {h} must be finite and > 0")))
    }
}

/// Normalization turning `dt² Σ_{k<m} ((h − |B_m − B_k|)^+)²` into an
/// estimate of `α_t`: the pair sum covers half of `[0, t]²` and the kernel
/// has mass `(2/3) h³`.
fn triangular_scale<T: Scalar>(path: &PathGrid<T>, h: T) -> T {
    let dt = path.dt();
    T::of(2.0 / TRIANGULAR_SQUARE_MASS) * dt * dt / (h * h * h)
}

/// Sorted samples `B_0, ..., B_{n−1}` with prefix sums of their values and
/// squares, for triangular-kernel pair sums at any `h`.
///
/// The kernel is symmetric in the pair, so `Σ_{k<m}` is a sum over unordered
/// pairs and time order can be dropped: after sorting, the partners of a
/// value within distance `h` below it form a contiguous window, whose sum
/// `Σ (h − s_i + s_j)²` expands in the window's moments.
#[derive(Clone, Debug)]
pub struct PairKernelSums<'a, T> {
    path: &'a PathGrid<T>,
    sorted: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl<'a, T: Scalar> PairKernelSums<'a, T> {
    pub fn new(path: &'a PathGrid<T>) -> Self {
        let n = path.n_steps();
        let mut sorted: Vec<f64> = path.values()[..n].iter().map(|v| v.as_f64()).collect();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut sum = Vec::with_capacity(n + 1);
        let mut sum_sq = Vec::with_capacity(n + 1);
        let (mut s1, mut s2) = (0.0, 0.0);
        sum.push(s1);
        sum_sq.push(s2);
        for &x in &sorted {
            s1 += x;
            s2 += x * x;
            sum.push(s1);
            sum_sq.push(s2);
        }
        PairKernelSums {
            path,
            sorted,
            sum,
            sum_sq,
        }
    }

    /// `Σ_{k<m<n} ((h − |B_m − B_k|)^+)²`.
    pub fn raw(&self, h: f64) -> f64 {
        let mut lo = 0;
        let mut total = 0.0;
        for (i, &x) in self.sorted.iter().enumerate() {
            while self.sorted[lo] < x - h {
                lo += 1;
            }
            let count = (i - lo) as f64;
            let s1 = self.sum[i] - self.sum[lo];
            let s2 = self.sum_sq[i] - self.sum_sq[lo];
            let c = h - x;
            total += (count * c * c + 2.0 * c * s1 + s2).max(0.0);
        }
        total
    }

    /// Triangular-kernel estimate of `α_t` at `h`.
    pub fn alpha(&self, h: T) -> Result<T> {
        check_h(h)?;
        Ok(T::of(self.raw(h.as_f64())) * triangular_scale(self.path, h))
    }
}

/// Triangular-kernel estimator of `α_t`,
/// `3 h^{-3} dt² Σ_{k<m<n} ((h − |B_m − B_k|)^+)²`. Use [`PairKernelSums`]
/// directly to evaluate several `h` on one path.
pub fn alpha_triangular<T: Scalar>(path: &PathGrid<T>, h: T) -> Result<T> {
    PairKernelSums::new(path).alpha(h)
}

/// Quadratic reference for [`alpha_triangular`].
pub fn alpha_triangular_naive<T: Scalar>(path: &PathGrid<T>, h: T) -> Result<T> {
    check_h(h)?;
    let values = path.values();
    let n = path.n_steps();
    let mut total = T::zero();
    for m in 0..n {
        for k in 0..m {
            let d = (h - (values[m] - values[k]).abs()).max(T::zero());
            total = total + d * d;
        }
    }
    Ok(total * triangular_scale(path, h))
}

/// `Ψ_h(r_m) = ∫₀^{r_m} (I_{[0,h]}(B_r − B_u) − I_{[0,h]}(B_u − B_r)) du`
/// by direct summation over `k < m`. Ties `B_k = B_m` fall in both
/// indicators and cancel.
pub fn psi<T: Scalar>(path: &PathGrid<T>, h: T, step_index: usize) -> Result<T> {
    if step_index > path.n_steps() {
        return Err(Error::StepIndex {
            index: step_index,
            n_steps: path.n_steps(),
        });
    }
    let values = path.values();
    let x = values[step_index];
    let (lo, hi) = (x - h, x + h);
    let mut net: i64 = 0;
    for &b in &values[..step_index] {
        if b >= lo && b < x {
            net += 1;
        } else if b > x && b <= hi {
            net -= 1;
        }
    }
    Ok(T::of(net as f64) * path.dt())
}

/// `Ψ_h(r_m)` for every `m = 0..=n` in one pass: insert `B_k` as `k`
/// advances and count the two windows by rank. Window edges move little
/// between steps, so each search starts from the previous edge.
pub fn psi_series<T: Scalar>(path: &PathGrid<T>, h: T) -> Vec<T> {
    let values = path.values();
    let sorted = SortedValues::new(values);
    let mut tree: Fenwick<i32> = Fenwick::new(values.len());
    let dt = path.dt();
    let (mut lo, mut hi) = (0, 0);
    values
        .iter()
        .enumerate()
        .map(|(m, &x)| {
            lo = sorted.lower_bound_from(x - h, lo);
            hi = sorted.upper_bound_from(x + h, hi);
            let (tie_lo, tie_hi) = sorted.ties(m);
            let net = tree.range(lo, tie_lo) - tree.range(tie_hi, hi);
            tree.add(sorted.position(m), 1);
            T::of(net as f64) * dt
        })
        .collect()
}

/// Quadratic reference for [`psi_series`].
pub fn psi_series_naive<T: Scalar>(path: &PathGrid<T>, h: T) -> Vec<T> {
    (0..=path.n_steps())
        .map(|m| psi(path, h, m).expect("index in range"))
        .collect()
}

/// `⟨M^h⟩_t = h^{-3} ∫₀ᵗ Ψ_h(r)² dr` from a Ψ series.
pub fn bracket_from_psi<T: Scalar>(psi: &[T], dt: T, h: T) -> T {
    let n = psi.len() - 1;
    let sum_sq = psi[..n].iter().fold(T::zero(), |acc, &v| acc + v * v);
    sum_sq * dt / (h * h * h)
}

/// `⟨M^h, B⟩_t = h^{-3/2} ∫₀ᵗ Ψ_h(r) dr` from a Ψ series.
pub fn covariation_from_psi<T: Scalar>(psi: &[T], dt: T, h: T) -> T {
    let n = psi.len() - 1;
    let sum = psi[..n].iter().fold(T::zero(), |acc, &v| acc + v);
    sum * dt / (h * h.sqrt())
}

pub fn bracket<T: Scalar>(path: &PathGrid<T>, h: T) -> Result<T> {
    check_h(h)?;
    Ok(bracket_from_psi(&psi_series(path, h), path.dt(), h))
}

pub fn covariation<T: Scalar>(path: &PathGrid<T>, h: T) -> Result<T> {
    check_h(h)?;
    Ok(covariation_from_psi(&psi_series(path, h), path.dt(), h))
}

/// `∫₀ʰ (p_s(z+η) − p_s(z−η)) dη = Φ((z+h)/σ) + Φ((z−h)/σ) − 2Φ(z/σ)`,
/// `σ = √s`. Odd in `z`.
#[inline]
fn eta_integral(z: f64, h: f64, sigma: f64) -> f64 {
    normal_cdf((z + h) / sigma) + normal_cdf((z - h) / sigma) - 2.0 * normal_cdf(z / sigma)
}

/// Smooth part of the Clark–Ocone integrand of `G_t(h)` at `r = m dt`,
///
/// `û_{t,h}(r) = −4 ∫₀ʳ ∫₀ʰ (p_{t−r}(B_r − B_u + η) − p_{t−r}(B_r − B_u − η)) dη du`,
///
/// with the η-integral in closed form and the u-integral a left sum.
pub fn u_hat<T: Scalar>(path: &PathGrid<T>, h: T, step_index: usize) -> Result<T> {
    let n = path.n_steps();
    if step_index >= n {
        return Err(Error::TerminalTime {
            r: (path.dt() * T::of(step_index as f64)).as_f64(),
            t: path.t().as_f64(),
        });
    }
    if h == T::zero() {
        return Ok(T::zero());
    }
    let values = path.values();
    let x = values[step_index].as_f64();
    let h = h.as_f64();
    let sigma = ((n - step_index) as f64 * path.dt().as_f64()).sqrt();
    let sum: f64 = values[..step_index]
        .iter()
        .map(|&b| eta_integral(x - b.as_f64(), h, sigma))
        .sum();
    Ok(T::of(-4.0 * path.dt().as_f64() * sum))
}

/// How [`u_hat_profile`] evaluates `û`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UHatOptions {
    /// Upper bound on the number of evaluation times; they are spaced by
    /// `max(1, n / nodes)` steps starting at `r = 0`.
    pub nodes: usize,
    /// Spatial bin width for the grouped evaluation; `None` sums over every
    /// past sample exactly.
    pub resolution: Option<f64>,
}

impl UHatOptions {
    pub fn exact(nodes: usize) -> Self {
        UHatOptions {
            nodes,
            resolution: None,
        }
    }

    pub fn binned(nodes: usize, resolution: f64) -> Self {
        UHatOptions {
            nodes,
            resolution: Some(resolution),
        }
    }
}

/// `û` at a set of evaluation steps; value `j` holds on
/// `[steps[j], steps[j+1])` (the last cell ends at `n`).
#[derive(Clone, Debug, PartialEq)]
pub struct UHatProfile<T> {
    pub steps: Vec<usize>,
    pub values: Vec<T>,
    n_steps: usize,
    dt: T,
}

impl<T: Scalar> UHatProfile<T> {
    fn cell_end(&self, j: usize) -> usize {
        self.steps.get(j + 1).copied().unwrap_or(self.n_steps)
    }

    /// `∫₀ᵗ |û(r)|² dr` with `û` piecewise constant on the cells.
    pub fn l2(&self) -> T {
        let sum = self
            .values
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, &u)| {
                let len = T::of((self.cell_end(j) - self.steps[j]) as f64);
                acc + u * u * len
            });
        sum * self.dt
    }

    /// `Σ_j û_j (B_{end_j} − B_{steps_j})`.
    pub fn ito_integral(&self, path: &PathGrid<T>) -> T {
        let values = path.values();
        self.values
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, &u)| {
                acc + u * (values[self.cell_end(j)] - values[self.steps[j]])
            })
    }
}

fn evaluation_steps(n: usize, nodes: usize) -> Vec<usize> {
    let stride = (n / nodes.max(1)).max(1);
    (0..n).step_by(stride).collect()
}

/// Running histogram of past values on bins centered at multiples of `delta`.
struct PastHistogram {
    delta: f64,
    first: i64,
    counts: Vec<u32>,
    offsets: Vec<f64>,
    seen: Option<(usize, usize)>,
}

impl PastHistogram {
    fn new(delta: f64, lo: f64, hi: f64) -> Self {
        let first = (lo / delta + 0.5).floor() as i64;
        let last = (hi / delta + 0.5).floor() as i64;
        let len = (last - first + 1) as usize;
        PastHistogram {
            delta,
            first,
            counts: vec![0; len],
            offsets: vec![0.0; len],
            seen: None,
        }
    }

    fn center(&self, j: usize) -> f64 {
        (self.first + j as i64) as f64 * self.delta
    }

    fn insert(&mut self, b: f64) {
        let j = ((b / self.delta + 0.5).floor() as i64 - self.first) as usize;
        self.counts[j] += 1;
        self.offsets[j] += b - self.center(j);
        self.seen = Some(match self.seen {
            None => (j, j),
            Some((lo, hi)) => (lo.min(j), hi.max(j)),
        });
    }
}

/// Evaluates `û` on a node grid. With a resolution, past samples are grouped
/// into bins of width `δ ≈ resolution` (snapped so that `h/δ` is an integer,
/// letting the three shifted CDFs share one table) and each bin contributes
/// through a first-order expansion about its center. Nodes with
/// `√(t − r) < 4δ` fall back to the exact sum.
pub fn u_hat_profile<T: Scalar>(
    path: &PathGrid<T>,
    h: T,
    options: UHatOptions,
) -> Result<UHatProfile<T>> {
    if !(h.is_finite() && h >= T::zero()) {
        return Err(Error::InvalidInput(format!("h = {h} must be >= 0")));
    }
    let n = path.n_steps();
    let steps = evaluation_steps(n, options.nodes);
    let dt = path.dt().as_f64();
    let hf = h.as_f64();

    let values = match options.resolution {
        _ if hf == 0.0 => vec![T::zero(); steps.len()],
        None => steps
            .iter()
            .map(|&m| u_hat(path, h, m))
            .collect::<Result<Vec<_>>>()?,
        Some(resolution) => {
            if !(resolution.is_finite() && resolution > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "resolution = {resolution} must be > 0"
                )));
            }
            let shift = (hf / resolution).round().max(1.0);
            let delta = hf / shift;
            let shift = shift as usize;
            let (lo, hi) = path.min_max();
            let mut hist = PastHistogram::new(delta, lo.as_f64(), hi.as_f64());
            let path_values = path.values();
            let mut table_cdf = Vec::new();
            let mut table_pdf = Vec::new();
            let mut out = Vec::with_capacity(steps.len());
            let mut inserted = 0;
            for &m in &steps {
                while inserted < m {
                    hist.insert(path_values[inserted].as_f64());
                    inserted += 1;
                }
                let sigma = ((n - m) as f64 * dt).sqrt();
                let Some((seen_lo, seen_hi)) = hist.seen else {
                    out.push(T::zero());
                    continue;
                };
                if sigma < 4.0 * delta {
                    out.push(u_hat(path, h, m)?);
                    continue;
                }
                let x = path_values[m].as_f64();
                // Tables over bins seen_lo - shift ..= seen_hi + shift, indexed
                // from zero at seen_lo - shift.
                let width = seen_hi - seen_lo + 1 + 2 * shift;
                table_cdf.clear();
                table_pdf.clear();
                for i in 0..width {
                    let j = seen_lo as i64 - shift as i64 + i as i64;
                    let c = (hist.first + j) as f64 * delta;
                    let u = (x - c) / sigma;
                    table_cdf.push(normal_cdf(u));
                    table_pdf.push(normal_pdf(u) / sigma);
                }
                let mut sum = 0.0;
                for j in seen_lo..=seen_hi {
                    let count = hist.counts[j];
                    if count == 0 {
                        continue;
                    }
                    let i = j - seen_lo + shift;
                    let g = table_cdf[i - shift] + table_cdf[i + shift] - 2.0 * table_cdf[i];
                    let dg = table_pdf[i - shift] + table_pdf[i + shift] - 2.0 * table_pdf[i];
                    // Σ_k g(x − B_k) ≈ count·g(x − c) − g'(x − c)·Σ_k (B_k − c)
                    sum += count as f64 * g - dg * hist.offsets[j];
                }
                out.push(T::of(-4.0 * dt * sum));
            }
            out
        }
    };
    Ok(UHatProfile {
        steps,
        values,
        n_steps: n,
        dt: path.dt(),
    })
}

/// `∫₀ᵗ |û_{t,h}(r)|² dr`.
pub fn u_hat_l2<T: Scalar>(path: &PathGrid<T>, h: T, options: UHatOptions) -> Result<T> {
    Ok(u_hat_profile(path, h, options)?.l2())
}

/// Discrete Itô integral `Σ_m (û(r_m) + ũ(r_m)) (B_{m+1} − B_m)` of the
/// Clark–Ocone integrand, where `ũ_{t,h}(r) = −4 Ψ_h(r)` and `û` is piecewise
/// constant on the profile's cells.
pub fn clark_ocone_ito_sum<T: Scalar>(path: &PathGrid<T>, psi: &[T], profile: &UHatProfile<T>) -> T {
    let values = path.values();
    let n = path.n_steps();
    let local = (0..n).fold(T::zero(), |acc, m| {
        acc + psi[m] * (values[m + 1] - values[m])
    });
    profile.ito_integral(path) - T::of(4.0) * local
}

/// `E G_t(h) + ∫₀ᵗ u_{t,h}(r) dB_r` with the expectation supplied as
/// `mean_g`.
pub fn clark_ocone_reconstruct<T: Scalar>(
    path: &PathGrid<T>,
    h: T,
    mean_g: T,
    options: UHatOptions,
) -> Result<T> {
    if h == T::zero() {
        return Ok(mean_g);
    }
    check_h(h)?;
    let psi = psi_series(path, h);
    let profile = u_hat_profile(path, h, options)?;
    Ok(mean_g + clark_ocone_ito_sum(path, &psi, &profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_time::occupation_field;
    use crate::path_engine::brownian_path;
    use crate::stats::heat_kernel;
    use approx::assert_relative_eq;

    fn constant_zero(n: usize) -> PathGrid<f64> {
        PathGrid::from_values(1.0, vec![0.0; n + 1]).unwrap()
    }

    fn unit_slope(n: usize) -> PathGrid<f64> {
        let dt = 1.0 / n as f64;
        PathGrid::from_values(1.0, (0..=n).map(|k| k as f64 * dt).collect()).unwrap()
    }

    #[test]
    fn g_modulus_trivia() {
        let f = occupation_field(&constant_zero(100), 0.1, 0.5).unwrap();
        assert_eq!(g_modulus(&f, 0.0).unwrap(), 0.0);
        assert!(matches!(g_modulus(&f, 0.3), Err(Error::Resolution { .. })));
        assert!(matches!(g_modulus(&f, 0.6), Err(Error::Padding { .. })));
        // Constant path: one spike of height 10, shifted off itself.
        assert_relative_eq!(g_modulus(&f, 0.4).unwrap(), 2.0 * 0.1 * 100.0, max_relative = 1e-12);
    }

    #[test]
    fn unit_slope_closed_forms() {
        // Field of the unit-slope path is the indicator of [0, 1]: G = 2h, α = 1.
        let w = 0.005;
        let path = unit_slope(200_000);
        let f = occupation_field(&path, w, 0.2).unwrap();
        let g = g_modulus(&f, 0.1).unwrap();
        assert!((g - 0.2).abs() <= w * (1.0 + 1e-9), "G = {g}");
        assert!((alpha_from_field(&f) - 1.0).abs() <= w * (1.0 + 1e-9));
    }

    #[test]
    fn alpha_diagonal_trivia() {
        // Constant path: entries k dt / w, so 2 dt Σ_{k<n} k dt / w = (1 − 1/n)/w.
        let a = alpha_diagonal(&constant_zero(1000), 0.1).unwrap();
        assert_relative_eq!(a, (1.0 - 1e-3) / 0.1, max_relative = 1e-12);
        let f = occupation_field(&constant_zero(1000), 0.1, 0.0).unwrap();
        assert_relative_eq!(alpha_from_field(&f), 10.0, max_relative = 1e-12);

        let zero_time = PathGrid::from_values(0.0, vec![0.0; 11]).unwrap();
        assert_eq!(alpha_diagonal(&zero_time, 0.1).unwrap(), 0.0);
        let f = occupation_field(&zero_time, 0.1, 0.0).unwrap();
        assert_eq!(alpha_from_field(&f), 0.0);
    }

    #[test]
    fn alpha_triangular_vanishes_for_steep_paths() {
        let p = PathGrid::from_values(1.0, (0..=50).map(|k| k as f64).collect()).unwrap();
        assert_eq!(alpha_triangular(&p, 0.5).unwrap(), 0.0);
        assert_eq!(alpha_triangular_naive(&p, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn alpha_triangular_matches_naive() {
        for seed in 0..5 {
            let p: PathGrid<f64> = brownian_path(seed, 1.0, 3000).unwrap();
            for h in [0.02, 0.1, 0.3] {
                let fast = alpha_triangular(&p, h).unwrap();
                let slow = alpha_triangular_naive(&p, h).unwrap();
                assert_relative_eq!(fast, slow, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn psi_trivia() {
        let c = constant_zero(64);
        assert!(psi_series(&c, 0.1).iter().all(|&v| v == 0.0));
        assert_eq!(bracket(&c, 0.1).unwrap(), 0.0);
        assert_eq!(covariation(&c, 0.1).unwrap(), 0.0);
        assert!(psi(&c, 0.1, 65).is_err());

        // Monotone path: every u within h of r counts positively.
        let p = unit_slope(1000);
        let h = 0.1;
        for m in [200, 500, 999] {
            assert_relative_eq!(psi(&p, h, m).unwrap(), h, max_relative = 1e-9);
        }
    }

    #[test]
    fn psi_series_matches_naive_exactly() {
        for seed in 0..4 {
            let p: PathGrid<f64> = brownian_path(seed, 1.0, 4096).unwrap();
            for h in [0.01, 0.05, 0.2] {
                assert_eq!(psi_series(&p, h), psi_series_naive(&p, h));
                let naive = psi_series_naive(&p, h);
                assert_eq!(
                    bracket(&p, h).unwrap(),
                    bracket_from_psi(&naive, p.dt(), h)
                );
            }
        }
    }

    #[test]
    fn psi_agrees_with_occupation_form() {
        // Ψ_h(r) = ∫₀ʰ (L_r(B_r − y) − L_r(B_r + y)) dy from a truncated field.
        let n = 1 << 14;
        let w = 0.004;
        let h = 0.05;
        for seed in 0..3 {
            let p: PathGrid<f64> = brownian_path(seed, 1.0, n).unwrap();
            let tol = 2.0 * (w + p.dt().sqrt()) * h;
            for m in [n / 8, n / 2, n - 1] {
                let x = p.at(m);
                let f = occupation_field(&p.truncated(m).unwrap(), w, 0.0).unwrap();
                let occupation = f.integral(x - h, x) - f.integral(x, x + h);
                let direct = psi(&p, h, m).unwrap();
                assert!((direct - occupation).abs() <= tol, "m = {m}: {direct} vs {occupation}");
            }
        }
    }

    #[test]
    fn u_hat_trivia() {
        let p: PathGrid<f64> = brownian_path(3, 1.0, 256).unwrap();
        assert_eq!(u_hat(&p, 0.0, 100).unwrap(), 0.0);
        assert!(matches!(u_hat(&p, 0.1, 256), Err(Error::TerminalTime { .. })));
        assert_eq!(u_hat_l2(&p, 0.0, UHatOptions::exact(256)).unwrap(), 0.0);

        // Past samples at B_r ± z cancel.
        let sym = PathGrid::from_values(1.0f64, vec![0.0, 0.3, 0.15, 0.0]).unwrap();
        // at m = 2, B_r = 0.15 and the past holds 0.0 and 0.3
        assert!(u_hat(&sym, 0.2, 2).unwrap().abs() < 1e-15);
    }

    #[test]
    fn u_hat_single_sample_matches_quadrature() {
        // One past sample at distance z, s = t − r = 1, h = 1.
        let n = 2;
        let oracle = |z: f64| {
            // Simpson on ∫₀¹ (p_1(z + η) − p_1(z − η)) dη.
            let m = 2000;
            let step = 1.0 / m as f64;
            let f = |eta: f64| heat_kernel(1.0, z + eta) - heat_kernel(1.0, z - eta);
            let mut s = f(0.0) + f(1.0);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * step);
            }
            s * step / 3.0
        };
        for z in [0.0, 0.5, -1.3] {
            // t = 2 with two steps: r = 1, s = 1, dt = 1.
            let p = PathGrid::from_values(2.0, vec![0.0, z, 7.0]).unwrap();
            let _ = n;
            let u = u_hat(&p, 1.0, 1).unwrap();
            assert!((u - (-4.0 * oracle(z))).abs() < 1e-10, "z = {z}: {u}");
        }
        // z = 0 is the odd point of the η-integral.
        let p = PathGrid::from_values(2.0, vec![0.0, 0.0, 7.0]).unwrap();
        assert_eq!(u_hat(&p, 1.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn binned_profile_tracks_exact_profile() {
        let n = 4096;
        for seed in 0..3 {
            let p: PathGrid<f64> = brownian_path(seed, 1.0, n).unwrap();
            for h in [0.05, 0.2] {
                let exact = u_hat_profile(&p, h, UHatOptions::exact(128)).unwrap();
                let binned = u_hat_profile(&p, h, UHatOptions::binned(128, 0.005)).unwrap();
                assert_eq!(exact.steps, binned.steps);
                let scale = exact.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (a, b) in exact.values.iter().zip(&binned.values) {
                    assert!((a - b).abs() <= 1e-3 * scale, "{a} vs {b}");
                }
                assert_relative_eq!(exact.l2(), binned.l2(), max_relative = 2e-3);
            }
        }
    }

    #[test]
    fn full_node_profile_is_the_step_sum() {
        let p: PathGrid<f64> = brownian_path(8, 1.0, 200).unwrap();
        let h = 0.1;
        let prof = u_hat_profile(&p, h, UHatOptions::exact(200)).unwrap();
        assert_eq!(prof.steps, (0..200).collect::<Vec<_>>());
        let direct: f64 = (0..200).map(|m| u_hat(&p, h, m).unwrap().powi(2)).sum::<f64>() * p.dt();
        assert_relative_eq!(prof.l2(), direct, max_relative = 1e-12);
    }

    #[test]
    fn reconstruction_at_zero_h_is_the_centering() {
        let p: PathGrid<f64> = brownian_path(1, 1.0, 512).unwrap();
        assert_eq!(clark_ocone_reconstruct(&p, 0.0, 0.37, UHatOptions::exact(8)).unwrap(), 0.37);
    }

    #[test]
    fn sign_flip_symmetries() {
        let w = 0.01;
        for seed in 0..3 {
            let p: PathGrid<f64> = brownian_path(seed, 1.0, 4096).unwrap();
            let q = p.negated();
            for h in [0.05, 0.2] {
                let (a, b) = (psi_series(&p, h), psi_series(&q, h));
                assert!(a.iter().zip(&b).all(|(x, y)| *x == -*y));
                assert_eq!(covariation(&p, h).unwrap(), -covariation(&q, h).unwrap());
                assert_eq!(bracket(&p, h).unwrap(), bracket(&q, h).unwrap());

                let fp = occupation_field(&p, w, 0.3).unwrap();
                let fq = occupation_field(&q, w, 0.3).unwrap();
                let mut mirrored = fq.values().to_vec();
                mirrored.reverse();
                assert_eq!(fp.values(), &mirrored[..]);
                assert_relative_eq!(g_modulus(&fp, h).unwrap(), g_modulus(&fq, h).unwrap(), max_relative = 1e-12);
                assert_relative_eq!(alpha_from_field(&fp), alpha_from_field(&fq), max_relative = 1e-12);
                assert_eq!(alpha_diagonal(&p, w).unwrap(), alpha_diagonal(&q, w).unwrap());
                assert_relative_eq!(alpha_triangular(&p, h).unwrap(), alpha_triangular(&q, h).unwrap(), max_relative = 1e-9);
                let up = u_hat_profile(&p, h, UHatOptions::exact(32)).unwrap();
                let uq = u_hat_profile(&q, h, UHatOptions::exact(32)).unwrap();
                for (x, y) in up.values.iter().zip(&uq.values) {
                    assert!((x + y).abs() <= 1e-12 * x.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn f32_estimates_track_f64() {
        let p64: PathGrid<f64> = brownian_path(12, 1.0, 2048).unwrap();
        let p32: PathGrid<f32> = brownian_path(12, 1.0, 2048).unwrap();
        let h = 0.1;
        let b64 = bracket(&p64, h).unwrap();
        let b32 = bracket(&p32, h as f32).unwrap() as f64;
        assert!((b64 - b32).abs() < 1e-3 * b64.max(1.0));
        let f64_field = occupation_field(&p64, 0.02, 0.2).unwrap();
        let f32_field = occupation_field(&p32, 0.02f32, 0.2).unwrap();
        let g64 = g_modulus(&f64_field, h).unwrap();
        let g32 = g_modulus(&f32_field, h as f32).unwrap() as f64;
        assert!((g64 - g32).abs() < 1e-2 * g64);
    }
}
