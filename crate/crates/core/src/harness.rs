//! Replica sweeps over the `h` grid and their aggregates.
//!
//! One path per replica serves every `h`. Replicas run on a rayon pool; the
//! results are collected in replica order and reduced sequentially, so the
//! worker count never changes a single bit of the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlphaMode, Centering, SimConfig};
use crate::error::{Error, Result};
use crate::functionals::{
    alpha_diagonal, alpha_from_field, bracket_from_psi, clark_ocone_ito_sum,
    covariation_from_psi, g_modulus, psi_series, u_hat_profile, PairKernelSums, ReplicaRecord,
    UHatOptions,
};
use crate::local_time::occupation_field;
use crate::path_engine::{simulate_path, SEED_SCHEME};
use crate::stats::{correlation, ks_distance, least_squares_fit, mean, quantile, variance};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "LOCTIME_THREADS";

/// Largest tolerated share of excluded (degenerate) replica records.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;

/// `h^{-3/2} (g − mean_g) / (8 √(α/3))`.
pub fn standardized_statistic(g: f64, mean_g: f64, alpha: f64, h: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::DegenerateAlpha(alpha));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("h = {h} must be > 0")));
    }
    Ok((g - mean_g) / (h * h.sqrt() * 8.0 * (alpha / 3.0).sqrt()))
}

/// Mean with its standard error; the error is 0 for a single value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(sample: &[f64]) -> Option<Self> {
        if sample.is_empty() {
            return None;
        }
        let m = mean(sample);
        let stderr = (variance(sample, m) / sample.len() as f64).sqrt();
        Some(Estimate { mean: m, stderr })
    }

    /// `|mean − target| / stderr`, infinite when the error is 0 and the mean
    /// misses.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Aggregates at one `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HAggregate {
    pub h: f64,
    /// Replicas with a finite standardized statistic.
    pub n_used: usize,
    pub excluded: usize,
    /// Value subtracted from `G` before standardizing.
    pub centering: f64,
    pub g: Estimate,
    pub z: Option<Estimate>,
    pub var_z: Option<f64>,
    pub ks_distance: Option<f64>,
    pub bracket: Option<Estimate>,
    pub cov_sq: Option<Estimate>,
    pub uhat_l2: Option<Estimate>,
    pub alpha_field: Option<Estimate>,
    pub alpha_diag: Option<Estimate>,
    pub alpha_tri: Option<Estimate>,
    pub recon_correlation: Option<f64>,
    /// `reconstruction − mean_g`, which is the Itô part alone.
    pub recon_residual: Option<Estimate>,
}

/// Trend fits across the `h` grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    /// Linear coefficient of `mean_g` on `(h, h²)`, no intercept.
    pub slope_4t: Option<f64>,
    pub slope_4t_stderr: Option<f64>,
    /// Slope of `log mean_uhat_l2` on `log h`.
    pub uhat_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedsManifest {
    pub master_seed: u64,
    pub scheme: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SimConfig,
    /// One entry per `h`, in `config.h_grid` order.
    pub per_h: Vec<HAggregate>,
    pub fitted: Fitted,
    pub seeds: SeedsManifest,
    /// Records ordered by `h` (grid order), then replica.
    pub records: Vec<ReplicaRecord>,
    pub excluded: usize,
}

impl SweepResult {
    /// Aggregate for the grid value equal to `h` (to 1e-12 relative).
    pub fn at(&self, h: f64) -> Option<&HAggregate> {
        self.per_h
            .iter()
            .find(|a| (a.h - h).abs() <= 1e-12 * h.abs().max(1e-300))
    }

    pub fn records_at(&self, h: f64) -> impl Iterator<Item = &ReplicaRecord> {
        self.records
            .iter()
            .filter(move |r| (r.h - h).abs() <= 1e-12 * h.abs().max(1e-300))
    }
}

/// Worker count from `LOCTIME_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs the sweep with the worker count from `LOCTIME_THREADS`.
pub fn run_sweep(config: &SimConfig) -> Result<SweepResult> {
    run_sweep_with_threads(config, threads_from_env())
}

/// Runs the sweep on `threads` workers (`None`: rayon's default).
pub fn run_sweep_with_threads(config: &SimConfig, threads: Option<usize>) -> Result<SweepResult> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let per_replica: Vec<Vec<ReplicaRecord>> = pool.install(|| {
        (0..config.n_replicas)
            .into_par_iter()
            .map(|i| replica_records(config, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let records = per_replica.into_iter().flatten().collect();
    aggregate(config, records)
}

/// Per-path functionals of replica `replica` at every `h`, before centering.
pub fn replica_records(config: &SimConfig, replica: usize) -> Result<Vec<ReplicaRecord>> {
    let path = simulate_path::<f64>(config, replica as u64)?;
    let w = config.bin_width;
    let field = occupation_field(&path, w, config.padding())?;
    let alpha_field = config.alpha_mode.field().then(|| alpha_from_field(&field));
    let alpha_diag = if config.alpha_mode.diagonal() {
        Some(alpha_diagonal(&path, w)?)
    } else {
        None
    };
    let pair_sums = config.alpha_mode.triangular().then(|| PairKernelSums::new(&path));
    let diag = config.diagnostics;
    let dt = path.dt();
    config
        .h_grid
        .iter()
        .map(|&h| {
            let alpha_tri = pair_sums.as_ref().map(|s| s.alpha(h)).transpose()?;
            let psi = diag.needs_psi().then(|| psi_series(&path, h));
            let profile = if diag.needs_u_hat() {
                Some(u_hat_profile(
                    &path,
                    h,
                    UHatOptions::binned(config.u_hat_nodes, w),
                )?)
            } else {
                None
            };
            let ito_sum = match (&psi, &profile) {
                (Some(psi), Some(profile)) if diag.reconstruction => {
                    Some(clark_ocone_ito_sum(&path, psi, profile))
                }
                _ => None,
            };
            Ok(ReplicaRecord {
                replica,
                h,
                g_modulus: g_modulus(&field, h)?,
                alpha_field,
                alpha_diag,
                alpha_tri,
                bracket: psi
                    .as_deref()
                    .filter(|_| diag.bracket)
                    .map(|p| bracket_from_psi(p, dt, h)),
                covariation: psi
                    .as_deref()
                    .filter(|_| diag.covariation)
                    .map(|p| covariation_from_psi(p, dt, h)),
                u_hat_l2: profile.as_ref().filter(|_| diag.u_hat).map(|p| p.l2()),
                ito_sum,
                reconstruction: None,
                z_statistic: None,
            })
        })
        .collect()
}

/// The α estimate a record is standardized with.
pub fn standardizing_alpha(mode: AlphaMode, record: &ReplicaRecord) -> Option<f64> {
    match mode {
        AlphaMode::Field | AlphaMode::All => record.alpha_field,
        AlphaMode::Diagonal => record.alpha_diag,
        AlphaMode::Triangular => record.alpha_tri,
    }
}

fn collect(records: &[&ReplicaRecord], pick: impl Fn(&ReplicaRecord) -> Option<f64>) -> Vec<f64> {
    records.iter().filter_map(|r| pick(r)).collect()
}

/// Second pass and reduction: centers and standardizes every record, then
/// aggregates per `h`. Records are sorted by `(h grid position, replica)`
/// first, so the result does not depend on their incoming order.
pub fn aggregate(config: &SimConfig, mut records: Vec<ReplicaRecord>) -> Result<SweepResult> {
    let grid_pos = |h: f64| {
        config
            .h_grid
            .iter()
            .position(|&g| g == h)
            .unwrap_or(usize::MAX)
    };
    records.sort_by_key(|r| (grid_pos(r.h), r.replica));

    let mut per_h = Vec::with_capacity(config.h_grid.len());
    let mut excluded_total = 0;
    let mut start = 0;
    for &h in &config.h_grid {
        let len = records[start..].iter().take_while(|r| r.h == h).count();
        let slice = &mut records[start..start + len];
        start += len;

        let gs: Vec<f64> = slice.iter().map(|r| r.g_modulus).collect();
        let g = Estimate::of(&gs).ok_or_else(|| {
            Error::InvalidInput(format!("no replica records at h = {h}"))
        })?;
        let centering = match config.centering {
            Centering::Empirical => g.mean,
            Centering::FourTH => 4.0 * config.t * h,
        };
        let mut excluded = 0;
        for r in slice.iter_mut() {
            r.reconstruction = r.ito_sum.map(|s| centering + s);
            r.z_statistic = standardizing_alpha(config.alpha_mode, r)
                .and_then(|a| standardized_statistic(r.g_modulus, centering, a, h).ok())
                .filter(|z| z.is_finite());
            if r.z_statistic.is_none() {
                excluded += 1;
            }
        }
        excluded_total += excluded;

        let view: Vec<&ReplicaRecord> = slice.iter().collect();
        let zs = collect(&view, |r| r.z_statistic);
        let z = Estimate::of(&zs);
        let recon = collect(&view, |r| r.reconstruction);
        let recon_correlation = if recon.len() == gs.len() {
            correlation(&recon, &gs)
        } else {
            None
        };
        let residual = collect(&view, |r| r.reconstruction.map(|x| x - g.mean));
        per_h.push(HAggregate {
            h,
            n_used: zs.len(),
            excluded,
            centering,
            g,
            z,
            var_z: z.map(|e| variance(&zs, e.mean)),
            ks_distance: if zs.is_empty() { None } else { Some(ks_distance(&zs)?) },
            bracket: Estimate::of(&collect(&view, |r| r.bracket)),
            cov_sq: Estimate::of(&collect(&view, |r| r.covariation.map(|c| c * c))),
            uhat_l2: Estimate::of(&collect(&view, |r| r.u_hat_l2)),
            alpha_field: Estimate::of(&collect(&view, |r| r.alpha_field)),
            alpha_diag: Estimate::of(&collect(&view, |r| r.alpha_diag)),
            alpha_tri: Estimate::of(&collect(&view, |r| r.alpha_tri)),
            recon_correlation,
            recon_residual: Estimate::of(&residual),
        });
    }

    let total = records.len();
    if excluded_total as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(Error::Exclusions {
            excluded: excluded_total,
            total,
        });
    }

    let fitted = fit_trends(&per_h);
    Ok(SweepResult {
        config: config.clone(),
        per_h,
        fitted,
        seeds: SeedsManifest {
            master_seed: config.master_seed,
            scheme: SEED_SCHEME.to_string(),
        },
        records,
        excluded: excluded_total,
    })
}

fn fit_trends(per_h: &[HAggregate]) -> Fitted {
    let hs: Vec<f64> = per_h.iter().map(|a| a.h).collect();
    let gs: Vec<f64> = per_h.iter().map(|a| a.g.mean).collect();
    let slope = least_squares_fit(&hs, &gs, 2, false).ok();

    let (lx, ly): (Vec<f64>, Vec<f64>) = per_h
        .iter()
        .filter_map(|a| a.uhat_l2.map(|u| (a.h, u.mean)))
        .filter(|&(h, u)| h > 0.0 && u > 0.0)
        .map(|(h, u)| (h.ln(), u.ln()))
        .unzip();
    let uhat_slope = least_squares_fit(&lx, &ly, 1, true)
        .ok()
        .map(|f| f.coefficient(1));

    Fitted {
        slope_4t: slope.as_ref().map(|f| f.coefficient(1)),
        slope_4t_stderr: slope.and_then(|f| f.stderr).map(|s| s[0]),
        uhat_slope,
    }
}

/// Per-`h` summary of `|bracket − (4/3) α|` and `covariation²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnightRow {
    pub h: f64,
    pub bracket_gap: Estimate,
    pub bracket_gap_median: f64,
    pub bracket_gap_q90: f64,
    pub cov_sq: Estimate,
    pub cov_sq_median: f64,
    pub cov_sq_q90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnightReport {
    /// Rows ordered by decreasing `h`.
    pub rows: Vec<KnightRow>,
    pub bracket_decreasing: bool,
    pub cov_sq_decreasing: bool,
}

impl KnightReport {
    pub fn pass(&self) -> bool {
        self.bracket_decreasing && self.cov_sq_decreasing
    }
}

/// Bracket and covariation trends along the `h` grid. `alpha_ref` maps a
/// record to the α it is compared with; records without a bracket,
/// covariation or α are skipped.
pub fn knight_condition_report(
    result: &SweepResult,
    alpha_ref: impl Fn(&ReplicaRecord) -> Option<f64>,
) -> KnightReport {
    let mut hs = result.config.h_grid.clone();
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let rows: Vec<KnightRow> = hs
        .iter()
        .filter_map(|&h| {
            let (gaps, covs): (Vec<f64>, Vec<f64>) = result
                .records_at(h)
                .filter_map(|r| {
                    let gap = (r.bracket? - 4.0 / 3.0 * alpha_ref(r)?).abs();
                    Some((gap, r.covariation? * r.covariation?))
                })
                .unzip();
            Some(KnightRow {
                h,
                bracket_gap: Estimate::of(&gaps)?,
                bracket_gap_median: quantile(&gaps, 0.5),
                bracket_gap_q90: quantile(&gaps, 0.9),
                cov_sq: Estimate::of(&covs)?,
                cov_sq_median: quantile(&covs, 0.5),
                cov_sq_q90: quantile(&covs, 0.9),
            })
        })
        .collect();
    let decreasing = |f: fn(&KnightRow) -> f64| {
        rows.len() >= 2 && rows.windows(2).all(|w| f(&w[1]) < f(&w[0]))
    };
    KnightReport {
        bracket_decreasing: decreasing(|r| r.bracket_gap.mean),
        cov_sq_decreasing: decreasing(|r| r.cov_sq.mean),
        rows,
    }
}
