//! Acceptance checks for sweeps, shared by `loctime verify` and the
//! acceptance test target.
//!
//! Each check reads a finished sweep (or needs none) and returns an
//! [`Outcome`]; a check whose inputs the sweep lacks is skipped rather than
//! failed.

use std::f64::consts::PI;
use std::fmt;

use loctime::config::{AlphaMode, SimConfig};
use loctime::error::Result;
use loctime::functionals::{
    alpha_diagonal, alpha_from_field, bracket, covariation, g_modulus, psi, psi_series,
    psi_series_naive,
};
use loctime::harness::{knight_condition_report, run_sweep_with_threads, Estimate, SweepResult};
use loctime::local_time::occupation_field;
use loctime::output::{replicas_csv, sweep_csv};
use loctime::path_engine::{brownian_path, PathGrid};
use loctime::stats::{triangular_constant, triangular_square_constant};

/// Stated value of `h^{-3} ∫ ((h − |x|)^+)² dx`.
pub const STATED_SQUARE_KERNEL: f64 = 4.0 / 3.0;
/// Stated value of `h^{-2} ∫ (h − |x|)^+ dx`.
pub const STATED_KERNEL: f64 = 3.0 / 2.0;
pub const KERNEL_TOLERANCE: f64 = 1e-10;
/// Allowance for the `O(h²)` and discretization bias of `mean_g`.
pub const MEAN_G_BUDGET: f64 = 0.01;
pub const SLOPE_RANGE: (f64, f64) = (3.8, 4.2);
pub const MAX_PAIRWISE_DEVIATION: f64 = 0.10;
pub const MAX_KS: f64 = 0.05;
pub const UHAT_RATE: (f64, f64) = (4.0, 0.3);
pub const MIN_RECON_CORRELATION: f64 = 0.9;

/// `E α_t = 8 t^{3/2} / (3 √(2π))`.
pub fn expected_alpha(t: f64) -> f64 {
    8.0 * t.powf(1.5) / (3.0 * (2.0 * PI).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub criterion: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl Outcome {
    fn new(criterion: u8, name: &'static str, pass: bool, detail: String) -> Self {
        Outcome {
            criterion,
            name,
            status: if pass { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn skipped(criterion: u8, name: &'static str, why: &str) -> Self {
        Outcome {
            criterion,
            name,
            status: Status::Skipped,
            detail: why.to_string(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "[{tag}] {} {}: {}", self.criterion, self.name, self.detail)
    }
}

/// Kernel constants by quadrature against their stated values.
pub fn kernel_constants() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for h in [0.1, 1.0, 10.0] {
        let sq = triangular_square_constant(h);
        let lin = triangular_constant(h);
        worst = worst
            .max((sq - STATED_SQUARE_KERNEL).abs())
            .max((lin - STATED_KERNEL).abs());
        detail.push(format!("h={h}: {sq:.12} vs 4/3, {lin:.12} vs 3/2"));
    }
    Outcome::new(
        1,
        "kernel constants",
        worst <= KERNEL_TOLERANCE,
        format!("{}; max error {worst:.3e}", detail.join("; ")),
    )
}

fn smallest_h(result: &SweepResult) -> f64 {
    result.per_h.iter().map(|a| a.h).fold(f64::INFINITY, f64::min)
}

/// Mean of `G_t(h)` at the smallest `h` against `4th`, allowing three
/// standard errors on top of the bias budget.
pub fn mean_g(result: &SweepResult) -> Outcome {
    let h = smallest_h(result);
    let a = result.at(h).expect("grid value");
    let target = 4.0 * result.config.t * h;
    let dev = (a.g.mean - target).abs();
    let allowed = MEAN_G_BUDGET + 3.0 * a.g.stderr;
    Outcome::new(
        2,
        "mean of G",
        dev <= allowed,
        format!(
            "h={h}: mean {:.6} ± {:.6}, target {target}, |dev| {dev:.6} <= {allowed:.6}",
            a.g.mean, a.g.stderr
        ),
    )
}

pub fn slope(result: &SweepResult) -> Outcome {
    let name = "slope fit";
    if result.per_h.len() < 3 {
        return Outcome::skipped(3, name, "needs at least three h values");
    }
    let Some(s) = result.fitted.slope_4t else {
        return Outcome::skipped(3, name, "fit unavailable");
    };
    let t = result.config.t;
    let (lo, hi) = (SLOPE_RANGE.0 * t, SLOPE_RANGE.1 * t);
    Outcome::new(
        3,
        name,
        (lo..=hi).contains(&s),
        format!(
            "slope_4t {s:.5} (± {:.5}) in [{lo}, {hi}]",
            result.fitted.slope_4t_stderr.unwrap_or(f64::NAN)
        ),
    )
}

/// Each α estimator within three standard errors of `E α_t`, the triangular
/// one at the smallest `h`, and mean per-path relative spread below 10%.
pub fn alpha_agreement(result: &SweepResult) -> Outcome {
    let name = "alpha cross-agreement";
    if result.config.alpha_mode != AlphaMode::All {
        return Outcome::skipped(4, name, "needs alpha_mode = all");
    }
    let h = smallest_h(result);
    let a = result.at(h).expect("grid value");
    let target = expected_alpha(result.config.t);
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, est) in [
        ("field", a.alpha_field),
        ("diag", a.alpha_diag),
        ("tri", a.alpha_tri),
    ] {
        let e: Estimate = est.expect("alpha_mode = all");
        let z = e.z_score(target);
        pass &= z <= 3.0;
        parts.push(format!("{label} {:.5} ± {:.5} ({z:.2} se)", e.mean, e.stderr));
    }
    let spreads: Vec<f64> = result
        .records_at(h)
        .filter_map(|r| {
            let v = [r.alpha_field?, r.alpha_diag?, r.alpha_tri?];
            let pairs = [(0, 1), (0, 2), (1, 2)];
            let total: f64 = pairs
                .iter()
                .map(|&(i, j)| (v[i] - v[j]).abs() / (0.5 * (v[i] + v[j])))
                .sum();
            Some(total / 3.0)
        })
        .collect();
    let spread = loctime::stats::mean(&spreads);
    pass &= spread < MAX_PAIRWISE_DEVIATION;
    Outcome::new(
        4,
        name,
        pass,
        format!(
            "target {target:.5}; {}; mean pairwise relative deviation {spread:.4}",
            parts.join(", ")
        ),
    )
}

/// KS distance of the standardized statistic at the smallest `h`.
pub fn clt(result: &SweepResult) -> Outcome {
    let h = smallest_h(result);
    let a = result.at(h).expect("grid value");
    let Some(ks) = a.ks_distance else {
        return Outcome::skipped(5, "CLT", "no standardized replicas");
    };
    Outcome::new(
        5,
        "CLT",
        ks < MAX_KS,
        format!(
            "h={h}: KS {ks:.5} < {MAX_KS} over {} replicas (var_z {:.4})",
            a.n_used,
            a.var_z.unwrap_or(f64::NAN)
        ),
    )
}

/// Mean `|bracket − (4/3) α|` and mean `covariation²` strictly decreasing as
/// `h` shrinks, the latter by at least a factor 2 across the grid.
pub fn knight(result: &SweepResult) -> Outcome {
    let name = "Knight conditions";
    let report = knight_condition_report(result, |r| r.alpha_field);
    if report.rows.len() < 2 {
        return Outcome::skipped(6, name, "needs bracket, covariation and alpha_field at two h");
    }
    let first = &report.rows[0];
    let last = &report.rows[report.rows.len() - 1];
    let drop = first.cov_sq.mean / last.cov_sq.mean;
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "h={} gap {:.4} cov² {:.5}",
                r.h, r.bracket_gap.mean, r.cov_sq.mean
            )
        })
        .collect();
    Outcome::new(
        6,
        name,
        report.pass() && drop >= 2.0,
        format!("{}; cov² drop x{drop:.2}", rows.join(", ")),
    )
}

pub fn uhat_rate(result: &SweepResult) -> Outcome {
    let name = "u_hat rate";
    let Some(s) = result.fitted.uhat_slope else {
        return Outcome::skipped(7, name, "needs u_hat at two or more h");
    };
    let (centre, tol) = UHAT_RATE;
    let mut points: Vec<(f64, f64)> = result
        .per_h
        .iter()
        .filter_map(|a| Some((a.h, a.uhat_l2?.mean)))
        .collect();
    points.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let local: Vec<String> = points
        .windows(2)
        .map(|w| {
            let s = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            format!("{}->{}: {s:.3}", w[0].0, w[1].0)
        })
        .collect();
    Outcome::new(
        7,
        name,
        (s - centre).abs() <= tol,
        format!(
            "log-log slope {s:.4} within {centre} ± {tol} (successive slopes {})",
            local.join(", ")
        ),
    )
}

/// Reconstruction at the grid value nearest 0.1.
pub fn reconstruction(result: &SweepResult) -> Outcome {
    let name = "Clark-Ocone reconstruction";
    let Some(a) = result
        .per_h
        .iter()
        .filter(|a| a.recon_residual.is_some())
        .min_by(|a, b| (a.h - 0.1).abs().partial_cmp(&(b.h - 0.1).abs()).unwrap())
    else {
        return Outcome::skipped(8, name, "reconstruction not computed");
    };
    let res = a.recon_residual.expect("filtered");
    let corr = a.recon_correlation.unwrap_or(f64::NAN);
    let z = res.z_score(0.0);
    Outcome::new(
        8,
        name,
        corr > MIN_RECON_CORRELATION && z <= 3.0,
        format!(
            "h={}: correlation {corr:.4} > {MIN_RECON_CORRELATION}, residual {:.5} ± {:.5} ({z:.2} se)",
            a.h, res.mean, res.stderr
        ),
    )
}

/// Checks 2 to 8 on a sweep.
pub fn evaluate(result: &SweepResult) -> Vec<Outcome> {
    vec![
        mean_g(result),
        slope(result),
        alpha_agreement(result),
        clt(result),
        knight(result),
        uhat_rate(result),
        reconstruction(result),
    ]
}

/// Exact properties on small paths: occupation mass, constant-path and
/// unit-slope closed forms, sign-flip symmetry, fast against naive Ψ,
/// Ψ against its occupation form, and thread-count determinism.
pub fn property_suite() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    if let Err(e) = run_properties(&mut check) {
        failures.push(format!("error: {e}"));
    }
    let pass = failures.is_empty();
    Outcome::new(
        9,
        "exact property suite",
        pass,
        if pass {
            "all properties hold".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn run_properties(check: &mut impl FnMut(bool, &str)) -> Result<()> {
    // occupation mass
    for seed in 0..8 {
        let p: PathGrid<f64> = brownian_path(seed, 1.0, 4096)?;
        let f = occupation_field(&p, 0.01, 0.1)?;
        check(
            f.counts().iter().sum::<u64>() == 4096,
            "occupation mass conservation",
        );
    }

    // constant path
    let c = PathGrid::from_values(1.0, vec![0.0; 513])?;
    check(psi_series(&c, 0.1).iter().all(|&v| v == 0.0), "constant path: Ψ ≡ 0");
    let f = occupation_field(&c, 0.05, 0.3)?;
    check(g_modulus(&f, 0.0)? == 0.0, "constant path: G(0) = 0");

    // unit slope, within one grid cell
    let n = 100_000;
    let w = 0.005;
    let slope = PathGrid::from_values(1.0, (0..=n).map(|k| k as f64 / n as f64).collect())?;
    let f = occupation_field(&slope, w, 0.2)?;
    let interior_ok = (0..f.len())
        .map(|j| f.bin_center(j))
        .filter(|&x| x > w && x < 1.0 - w)
        .all(|x| (f.field_at(x) - 1.0).abs() <= 2.0 / (n as f64 * w));
    check(interior_ok, "unit slope: field = 1");
    check((g_modulus(&f, 0.1)? - 0.2).abs() <= w * (1.0 + 1e-9), "unit slope: G = 2h");
    check((alpha_from_field(&f) - 1.0).abs() <= w * (1.0 + 1e-9), "unit slope: α = 1");

    // sign flip
    for seed in 0..3 {
        let p: PathGrid<f64> = brownian_path(100 + seed, 1.0, 4096)?;
        let q = p.negated();
        let h = 0.1;
        let (a, b) = (psi_series(&p, h), psi_series(&q, h));
        check(a.iter().zip(&b).all(|(x, y)| *x == -*y), "sign flip: Ψ odd");
        check(covariation(&p, h)? == -covariation(&q, h)?, "sign flip: covariation odd");
        check(bracket(&p, h)? == bracket(&q, h)?, "sign flip: bracket even");
        let (fp, fq) = (occupation_field(&p, 0.01, 0.2)?, occupation_field(&q, 0.01, 0.2)?);
        let (gp, gq) = (g_modulus(&fp, h)?, g_modulus(&fq, h)?);
        check((gp - gq).abs() <= 1e-12 * gp, "sign flip: G even");
        check(
            alpha_diagonal(&p, 0.01)? == alpha_diagonal(&q, 0.01)?,
            "sign flip: α_diag even",
        );
    }

    // naive against fast Ψ
    for seed in 0..3 {
        let p: PathGrid<f64> = brownian_path(200 + seed, 1.0, 4096)?;
        for h in [0.02, 0.1] {
            check(psi_series(&p, h) == psi_series_naive(&p, h), "Ψ fast = naive");
        }
    }

    // Ψ against its occupation form
    let n = 1 << 14;
    let (w, h) = (0.004, 0.05);
    for seed in 0..3 {
        let p: PathGrid<f64> = brownian_path(300 + seed, 1.0, n)?;
        let tol = 2.0 * (w + p.dt().sqrt()) * h;
        for m in [n / 4, n - 1] {
            let x = p.at(m);
            let f = occupation_field(&p.truncated(m)?, w, 0.0)?;
            let occ = f.integral(x - h, x) - f.integral(x, x + h);
            check((psi(&p, h, m)? - occ).abs() <= tol, "Ψ occupation form");
        }
    }

    // thread-count determinism
    let mut config = SimConfig::new(1.0, 2048, vec![0.4, 0.2], 8, 77)?;
    config.alpha_mode = AlphaMode::All;
    config.u_hat_nodes = 32;
    let one = run_sweep_with_threads(&config, Some(1))?;
    let many = run_sweep_with_threads(&config, Some(4))?;
    check(
        sweep_csv(&one) == sweep_csv(&many) && replicas_csv(&one) == replicas_csv(&many),
        "byte-determinism across thread counts",
    );
    Ok(())
}
