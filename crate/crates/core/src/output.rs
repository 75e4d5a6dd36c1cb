//! Result files: `sweep.csv`, `replicas.csv` and `manifest.json`.
//!
//! Numbers are written with 17 significant digits and missing values as
//! empty fields. Only the manifest carries timestamps, so the two CSV files
//! are byte-identical across reruns of one configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::harness::{Fitted, SweepResult};
use crate::path_engine::SEED_SCHEME;

pub const SWEEP_COLUMNS: [&str; 12] = [
    "h",
    "mean_g",
    "stderr_g",
    "ks_distance",
    "var_z",
    "mean_bracket",
    "mean_cov_sq",
    "mean_uhat_l2",
    "mean_alpha_field",
    "mean_alpha_diag",
    "mean_alpha_tri",
    "recon_correlation",
];

pub const REPLICA_COLUMNS: [&str; 13] = [
    "h",
    "replica",
    "g_modulus",
    "alpha_field",
    "alpha_diag",
    "alpha_tri",
    "bracket",
    "covariation",
    "u_hat_l2",
    "ito_sum",
    "reconstruction",
    "z_statistic",
    "seed",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_echo: SimConfig,
    pub tool_version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub seed_scheme: String,
    pub exclusion_count: usize,
    pub fitted: Fitted,
}

impl RunManifest {
    pub fn new(
        result: &SweepResult,
        started_at: DateTime<Utc>,
        finished_at: DateTime<Utc>,
    ) -> Self {
        RunManifest {
            config_echo: result.config.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at,
            seed_scheme: SEED_SCHEME.to_string(),
            exclusion_count: result.excluded,
            fitted: result.fitted.clone(),
        }
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for a in &result.per_h {
        let mean = |e: Option<crate::harness::Estimate>| e.map(|e| e.mean);
        let row = [
            Some(a.h),
            Some(a.g.mean),
            Some(a.g.stderr),
            a.ks_distance,
            a.var_z,
            mean(a.bracket),
            mean(a.cov_sq),
            mean(a.uhat_l2),
            mean(a.alpha_field),
            mean(a.alpha_diag),
            mean(a.alpha_tri),
            a.recon_correlation,
        ];
        let cells: Vec<String> = row.into_iter().map(format_opt).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn replicas_csv(result: &SweepResult) -> String {
    let mut out = REPLICA_COLUMNS.join(",");
    out.push('\n');
    for r in &result.records {
        let seed = crate::derive_replica_seed(result.config.master_seed, r.replica as u64);
        let numbers = [
            r.alpha_field,
            r.alpha_diag,
            r.alpha_tri,
            r.bracket,
            r.covariation,
            r.u_hat_l2,
            r.ito_sum,
            r.reconstruction,
            r.z_statistic,
        ];
        write!(
            out,
            "{},{},{}",
            format_number(r.h),
            r.replica,
            format_number(r.g_modulus)
        )
        .unwrap();
        for x in numbers {
            out.push(',');
            out.push_str(&format_opt(x));
        }
        writeln!(out, ",{seed}").unwrap();
    }
    out
}

/// Writes the three result files into `out_dir`, creating it if needed.
pub fn write_results(result: &SweepResult, manifest: &RunManifest, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, contents: String| {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(path, e))
    };
    write("sweep.csv", sweep_csv(result))?;
    write("replicas.csv", replicas_csv(result))?;
    write("manifest.json", serde_json::to_string_pretty(manifest)? + "\n")
}
