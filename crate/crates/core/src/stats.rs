//! Small statistics toolbox: normal distribution, KS distance against
//! N(0, 1), polynomial least squares, sample moments and quadrature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::Scalar;

/// Standard normal CDF, `Φ(x) = erfc(−x/√2) / 2`.
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::of(0.5 * libm::erfc(-x.as_f64() * FRAC_1_SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Gaussian heat kernel `p_s(x) = (2πs)^{-1/2} exp(−x²/(2s))`.
pub fn heat_kernel(s: f64, x: f64) -> f64 {
    (-x * x / (2.0 * s)).exp() / (2.0 * PI * s).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and Φ.
pub fn ks_distance(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("KS distance of an empty sample".into()));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("KS distance of a sample containing NaN".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = normal_cdf(x);
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d.clamp(0.0, 1.0))
}

/// Sample mean and its standard error `s / √n` (unbiased variance).
pub fn mean_stderr(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "standard error needs at least two values, got {}",
            sample.len()
        )));
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    Ok((mean, (variance(sample, mean) / n).sqrt()))
}

pub fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Unbiased sample variance about `mean`; zero for fewer than two values.
pub fn variance(sample: &[f64], mean: f64) -> f64 {
    if sample.len() < 2 {
        return 0.0;
    }
    sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (sample.len() - 1) as f64
}

/// Pearson correlation; `None` when either side has zero spread.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Linear-interpolated quantile of a sample, `q ∈ [0, 1]`.
pub fn quantile(sample: &[f64], q: f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ordinary least squares polynomial fit.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    /// Lowest power in the design: 0 with an intercept, 1 without.
    pub first_power: usize,
    /// Coefficients for powers `first_power..=degree`.
    pub coefficients: Vec<f64>,
    /// Standard errors of the coefficients from the residual variance;
    /// `None` when the fit has no residual degrees of freedom.
    pub stderr: Option<Vec<f64>>,
}

impl PolyFit {
    /// Coefficient of `x^power`, zero when the power is not in the design.
    pub fn coefficient(&self, power: usize) -> f64 {
        power
            .checked_sub(self.first_power)
            .and_then(|i| self.coefficients.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * x.powi((i + self.first_power) as i32))
            .sum()
    }
}

/// Least squares fit of `ys` on the powers of `xs` up to `degree` (at most
/// 2), via the normal equations.
pub fn least_squares_fit(xs: &[f64], ys: &[f64], degree: usize, intercept: bool) -> Result<PolyFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("xs and ys differ in length".into()));
    }
    if degree > 2 {
        return Err(Error::InvalidInput(format!("degree {degree} exceeds 2")));
    }
    let first_power = usize::from(!intercept);
    if degree < first_power {
        return Err(Error::InvalidInput("empty design".into()));
    }
    let p = degree + 1 - first_power;
    let mut distinct = xs.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let distinct_nonzero = distinct.iter().filter(|&&x| x != 0.0).count();
    let usable = if intercept { distinct.len() } else { distinct_nonzero };
    if usable < p {
        return Err(Error::SingularDesign(format!(
            "{usable} distinct abscissae for {p} coefficients"
        )));
    }

    let row = |x: f64| -> Vec<f64> { (first_power..=degree).map(|k| x.powi(k as i32)).collect() };
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (&x, &y) in xs.iter().zip(ys) {
        let r = row(x);
        for i in 0..p {
            rhs[i] += r[i] * y;
            for j in 0..p {
                gram[i][j] += r[i] * r[j];
            }
        }
    }
    let inverse = invert(&gram)?;
    let coefficients: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| inverse[i][j] * rhs[j]).sum())
        .collect();

    let dof = xs.len() - p;
    let stderr = (dof > 0).then(|| {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let fit: f64 = row(x).iter().zip(&coefficients).map(|(a, c)| a * c).sum();
                (y - fit).powi(2)
            })
            .sum();
        let sigma2 = rss / dof as f64;
        (0..p).map(|i| (sigma2 * inverse[i][i]).sqrt()).collect()
    });
    Ok(PolyFit {
        first_power,
        coefficients,
        stderr,
    })
}

/// Gauss–Jordan inverse with partial pivoting.
fn invert(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = matrix.len();
    let scale = matrix
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() <= 1e-14 * scale {
            return Err(Error::SingularDesign("normal equations are singular".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Ok(inv)
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_,
    0.362_683_783_378_362_,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Composite 8-point Gauss–Legendre quadrature with `panels` equal panels
/// between each pair of consecutive `breakpoints`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], panels: usize) -> f64 {
    let mut total = 0.0;
    for pair in breakpoints.windows(2) {
        let width = (pair[1] - pair[0]) / panels as f64;
        for p in 0..panels {
            let a = pair[0] + p as f64 * width;
            let half = 0.5 * width;
            let mid = a + half;
            total += half
                * GL_NODES
                    .iter()
                    .zip(GL_WEIGHTS)
                    .map(|(x, w)| w * f(mid + half * x))
                    .sum::<f64>();
        }
    }
    total
}

/// `h^{-3} ∫ ((h − |x|)^+)² dx` by quadrature. Scale free; its exact value
/// is `2/3`.
pub fn triangular_square_constant(h: f64) -> f64 {
    let k = |x: f64| (h - x.abs()).max(0.0).powi(2);
    integrate(k, &[-h, 0.0, h], 4) / h.powi(3)
}

/// `h^{-2} ∫ (h − |x|)^+ dx` by quadrature. Scale free; its exact value is 1.
pub fn triangular_constant(h: f64) -> f64 {
    let k = |x: f64| (h - x.abs()).max(0.0);
    integrate(k, &[-h, 0.0, h], 4) / h.powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson on [a, b]; independent of the Gauss–Legendre code.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_cdf(8.0f64) > 1.0 - 1e-14);
        assert!(normal_cdf(-8.0f64) < 1e-14);
        // Φ(1) = 1/2 + ∫₀¹ φ, by Simpson on a fine grid.
        let oracle = 0.5 + simpson(normal_pdf, 0.0, 1.0, 2000);
        assert!((normal_cdf(1.0f64) - oracle).abs() < 1e-12);
        assert!((normal_cdf(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-12);
        for x in [-3.7, -1.2, 0.3, 2.4] {
            let oracle = 0.5 + simpson(normal_pdf, 0.0, x, 4000);
            assert!((normal_cdf(x) - oracle).abs() < 1e-10, "x = {x}");
        }
        assert!((normal_cdf(1.0f32) - 0.841_344_7).abs() < 1e-6);
    }

    #[test]
    fn ks_distance_edge_cases() {
        assert_eq!(ks_distance(&[0.0]).unwrap(), 0.5);
        assert!(ks_distance(&[10.0; 50]).unwrap() > 0.999_999);
        assert!(ks_distance(&[]).is_err());
    }

    #[test]
    fn ks_distance_of_exact_quantiles() {
        // Φ⁻¹ by bisection on the CDF.
        let quantile = |p: f64| {
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if normal_cdf(mid) < p { lo = mid } else { hi = mid }
            }
            0.5 * (lo + hi)
        };
        let n = 100;
        let sample: Vec<f64> = (1..=n).map(|i| quantile((i as f64 - 0.5) / n as f64)).collect();
        assert_relative_eq!(ks_distance(&sample).unwrap(), 0.5 / n as f64, max_relative = 1e-9);
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        assert_eq!(mean_stderr(&[0.0, 2.0]).unwrap(), (1.0, 1.0));
        assert_eq!(mean_stderr(&[-1.0, 1.0]).unwrap(), (0.0, 1.0));
        assert!(mean_stderr(&[3.0]).is_err());
    }

    #[test]
    fn least_squares_examples() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * x).collect();
        let fit = least_squares_fit(&xs, &ys, 1, false).unwrap();
        assert_relative_eq!(fit.coefficient(1), 4.0, max_relative = 1e-12);

        let ys: Vec<f64> = xs.iter().map(|x| 4.0 * x + 2.0 * x * x).collect();
        let fit = least_squares_fit(&xs, &ys, 2, false).unwrap();
        assert_relative_eq!(fit.coefficient(1), 4.0, max_relative = 1e-10);
        assert_relative_eq!(fit.coefficient(2), 2.0, max_relative = 1e-9);
        assert_eq!(fit.coefficient(0), 0.0);

        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 3.0 * x).collect();
        let fit = least_squares_fit(&xs, &ys, 1, true).unwrap();
        assert_relative_eq!(fit.coefficient(0), 1.5, max_relative = 1e-12);
        assert_relative_eq!(fit.coefficient(1), -3.0, max_relative = 1e-12);
        assert_relative_eq!(fit.predict(0.3), 0.6, max_relative = 1e-12);
    }

    #[test]
    fn noisy_slope_interval_contains_truth() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (1..=40).map(|i| i as f64 / 40.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                4.0 * x + 0.1 * e
            })
            .collect();
        let fit = least_squares_fit(&xs, &ys, 1, true).unwrap();
        let se = fit.stderr.as_ref().unwrap()[1];
        assert!((fit.coefficient(1) - 4.0).abs() < 3.0 * se, "{fit:?}");
    }

    #[test]
    fn singular_designs_are_rejected() {
        assert!(least_squares_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 1, true).is_err());
        assert!(least_squares_fit(&[1.0, 2.0], &[1.0, 2.0], 2, true).is_err());
        assert!(least_squares_fit(&[0.0, 0.0], &[1.0, 2.0], 1, false).is_err());
    }

    #[test]
    fn kernel_constants() {
        // Closed forms: 2∫₀ʰ(h − x)²dx = 2h³/3 and 2∫₀ʰ(h − x)dx = h².
        for h in [0.1, 1.0, 10.0] {
            assert!((triangular_square_constant(h) - 2.0 / 3.0).abs() < 1e-12);
            assert!((triangular_constant(h) - 1.0).abs() < 1e-12);
            let simpson_sq = simpson(|x| (h - x.abs()).max(0.0).powi(2), -h, h, 2000) / h.powi(3);
            assert!((simpson_sq - 2.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn correlation_and_quantile() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert_relative_eq!(correlation(&xs, &ys).unwrap(), 1.0, max_relative = 1e-12);
        assert!(correlation(&xs, &[1.0; 4]).is_none());
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 1.0), 4.0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ks_is_order_invariant_and_positive(mut xs in prop::collection::vec(-5.0f64..5.0, 1..60)) {
                let d = ks_distance(&xs).unwrap();
                prop_assert!(d > 0.0 && d <= 1.0);
                xs.reverse();
                prop_assert_eq!(ks_distance(&xs).unwrap(), d);
            }

            #[test]
            fn residuals_are_orthogonal_to_design(
                pts in prop::collection::vec((-1.0f64..1.0, -10.0f64..10.0), 5..40),
                intercept in any::<bool>(),
            ) {
                let xs: Vec<f64> = pts.iter().enumerate().map(|(i, p)| p.0 + i as f64 * 0.1).collect();
                let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let fit = least_squares_fit(&xs, &ys, 2, intercept).unwrap();
                for k in fit.first_power..=2 {
                    let dot: f64 = xs.iter().zip(&ys).map(|(&x, &y)| (y - fit.predict(x)) * x.powi(k as i32)).sum();
                    let scale: f64 = xs.iter().map(|x| x.powi(k as i32).abs()).sum::<f64>() * 10.0;
                    prop_assert!(dot.abs() <= 1e-9 * scale.max(1.0), "k = {} dot = {}", k, dot);
                }
            }
        }
    }
}
