//! Experiment configuration and its text format.
//!
//! The format is a flat TOML document:
//!
//! ```text
//! t = 1.0
//! n_steps = 65536
//! h_grid = [0.4, 0.2, 0.1, 0.05]
//! n_replicas = 10000
//! master_seed = 20240601
//! bin_width = 0.0025            # optional
//! alpha_mode = "all"            # field | diagonal | triangular | all
//! centering = "empirical"       # empirical | four_t_h
//! diagnostics = ["bracket"]     # optional, default: all four
//! u_hat_nodes = 256             # optional
//! ```

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{Error, Result};

/// Which self-intersection estimators a sweep computes. When a single one is
/// selected it also standardizes the CLT statistic; `All` standardizes with
/// the field estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Field,
    Diagonal,
    Triangular,
    All,
}

impl AlphaMode {
    pub fn field(self) -> bool {
        matches!(self, AlphaMode::Field | AlphaMode::All)
    }

    pub fn diagonal(self) -> bool {
        matches!(self, AlphaMode::Diagonal | AlphaMode::All)
    }

    pub fn triangular(self) -> bool {
        matches!(self, AlphaMode::Triangular | AlphaMode::All)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlphaMode::Field => "field",
            AlphaMode::Diagonal => "diagonal",
            AlphaMode::Triangular => "triangular",
            AlphaMode::All => "all",
        }
    }
}

/// Centering of `G_t(h)` in the standardized statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Empirical mean of `G_t(h)` over the replicas.
    Empirical,
    /// The leading term `4th`.
    FourTH,
}

impl Centering {
    pub fn as_str(self) -> &'static str {
        match self {
            Centering::Empirical => "empirical",
            Centering::FourTH => "four_t_h",
        }
    }
}

/// Optional per-path functionals beyond `G_t(h)` and the α estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bracket: bool,
    pub covariation: bool,
    pub u_hat: bool,
    pub reconstruction: bool,
}

impl Diagnostics {
    pub const ALL: Diagnostics = Diagnostics {
        bracket: true,
        covariation: true,
        u_hat: true,
        reconstruction: true,
    };

    pub const NONE: Diagnostics = Diagnostics {
        bracket: false,
        covariation: false,
        u_hat: false,
        reconstruction: false,
    };

    pub fn needs_psi(self) -> bool {
        self.bracket || self.covariation || self.reconstruction
    }

    pub fn needs_u_hat(self) -> bool {
        self.u_hat || self.reconstruction
    }

    fn names(self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.bracket {
            names.push("bracket");
        }
        if self.covariation {
            names.push("covariation");
        }
        if self.u_hat {
            names.push("u_hat");
        }
        if self.reconstruction {
            names.push("reconstruction");
        }
        names
    }
}

/// Full description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t: f64,
    pub n_steps: usize,
    pub h_grid: Vec<f64>,
    pub n_replicas: usize,
    pub bin_width: f64,
    pub master_seed: u64,
    pub alpha_mode: AlphaMode,
    pub centering: Centering,
    pub diagnostics: Diagnostics,
    pub u_hat_nodes: usize,
}

pub const DEFAULT_U_HAT_NODES: usize = 256;

/// Default spatial bin width: `max(h_min / 8, sqrt(dt))`.
pub fn default_bin_width(t: f64, n_steps: usize, h_min: f64) -> f64 {
    (h_min / 8.0).max((t / n_steps as f64).sqrt())
}

impl SimConfig {
    /// Builds a configuration with defaults for every optional key and
    /// validates it.
    pub fn new(
        t: f64,
        n_steps: usize,
        h_grid: Vec<f64>,
        n_replicas: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let h_min = h_grid.iter().copied().fold(f64::INFINITY, f64::min);
        let config = SimConfig {
            t,
            n_steps,
            bin_width: default_bin_width(t, n_steps, h_min),
            h_grid,
            n_replicas,
            master_seed,
            alpha_mode: AlphaMode::Field,
            centering: Centering::Empirical,
            diagnostics: Diagnostics::ALL,
            u_hat_nodes: DEFAULT_U_HAT_NODES,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn dt(&self) -> f64 {
        self.t / self.n_steps as f64
    }

    pub fn h_max(&self) -> f64 {
        self.h_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Field padding: `max(h_grid) + bin_width`.
    pub fn padding(&self) -> f64 {
        self.h_max() + self.bin_width
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|(key, message)| Error::Config(format!("`{key}`: {message}")))
    }

    /// Non-fatal observations about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let floor = self.dt().sqrt() / 4.0;
        if self.bin_width < floor {
            out.push(format!(
                "bin_width = {} is below sqrt(dt)/4 = {floor}; occupation noise will dominate",
                self.bin_width
            ));
        }
        out
    }

    /// Validation with the offending key attached, for line anchoring.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(("t", format!("t = {} must be finite and > 0", self.t)));
        }
        if self.n_steps < 2 {
            return Err(("n_steps", format!("n_steps = {} must be >= 2", self.n_steps)));
        }
        if self.n_replicas < 1 {
            return Err(("n_replicas", "n_replicas must be >= 1".to_string()));
        }
        if self.h_grid.is_empty() {
            return Err(("h_grid", "h_grid must not be empty".to_string()));
        }
        for &h in &self.h_grid {
            if !(h.is_finite() && h > 0.0) {
                return Err(("h_grid", format!("h = {h} must be finite and > 0")));
            }
        }
        if let Some(pair) = self.h_grid.windows(2).find(|p| p[1] >= p[0]) {
            return Err((
                "h_grid",
                format!("h_grid must be strictly decreasing ({} then {})", pair[0], pair[1]),
            ));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(("bin_width", format!("bin_width = {} must be > 0", self.bin_width)));
        }
        for &h in &self.h_grid {
            if h < 4.0 * self.bin_width {
                return Err((
                    "h_grid",
                    format!(
                        "h = {h} is below 4 * bin_width = {} (bin_width = {})",
                        4.0 * self.bin_width,
                        self.bin_width
                    ),
                ));
            }
        }
        if self.t <= self.h_max() {
            return Err((
                "t",
                format!("t = {} must exceed max(h_grid) = {}", self.t, self.h_max()),
            ));
        }
        if self.u_hat_nodes < 1 {
            return Err(("u_hat_nodes", "u_hat_nodes must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Serializes to the text format; `parse_config` reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let grid: Vec<String> = self.h_grid.iter().map(|h| format!("{h:?}")).collect();
        let diags: Vec<String> = self
            .diagnostics
            .names()
            .iter()
            .map(|n| format!("\"{n}\""))
            .collect();
        let _ = writeln!(s, "t = {:?}", self.t);
        let _ = writeln!(s, "n_steps = {}", self.n_steps);
        let _ = writeln!(s, "h_grid = [{}]", grid.join(", "));
        let _ = writeln!(s, "n_replicas = {}", self.n_replicas);
        let _ = writeln!(s, "bin_width = {:?}", self.bin_width);
        if self.master_seed <= i64::MAX as u64 {
            let _ = writeln!(s, "master_seed = {}", self.master_seed);
        } else {
            let _ = writeln!(s, "master_seed = \"{}\"", self.master_seed);
        }
        let _ = writeln!(s, "alpha_mode = \"{}\"", self.alpha_mode.as_str());
        let _ = writeln!(s, "centering = \"{}\"", self.centering.as_str());
        let _ = writeln!(s, "diagnostics = [{}]", diags.join(", "));
        let _ = writeln!(s, "u_hat_nodes = {}", self.u_hat_nodes);
        s
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedRepr {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    t: Option<Spanned<f64>>,
    n_steps: Option<Spanned<i64>>,
    h_grid: Option<Spanned<Vec<f64>>>,
    n_replicas: Option<Spanned<i64>>,
    bin_width: Option<Spanned<f64>>,
    master_seed: Option<Spanned<SeedRepr>>,
    alpha_mode: Option<Spanned<AlphaMode>>,
    centering: Option<Spanned<Centering>>,
    diagnostics: Option<Spanned<Vec<String>>>,
    u_hat_nodes: Option<Spanned<i64>>,
}

fn line_of(source: &str, span: Range<usize>) -> usize {
    source[..span.start.min(source.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

fn required<T>(source: &str, value: Option<Spanned<T>>, key: &str) -> Result<(T, usize)> {
    match value {
        Some(v) => {
            let line = line_of(source, v.span());
            Ok((v.into_inner(), line))
        }
        None => Err(Error::Config(format!("missing required key `{key}`"))),
    }
}

fn count(value: i64, key: &str, line: usize) -> Result<usize> {
    usize::try_from(value).map_err(|_| Error::ConfigAt {
        line,
        message: format!("`{key}` must be a non-negative integer, got {value}"),
    })
}

fn parse_seed(repr: SeedRepr, line: usize) -> Result<u64> {
    let bad = |text: String| Error::ConfigAt {
        line,
        message: format!("`master_seed` must be an unsigned 64-bit integer, got {text}"),
    };
    match repr {
        SeedRepr::Int(v) => u64::try_from(v).map_err(|_| bad(v.to_string())),
        SeedRepr::Text(s) => {
            let trimmed = s.trim();
            let parsed = match trimmed.strip_prefix("0x") {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => trimmed.parse::<u64>(),
            };
            parsed.map_err(|_| bad(format!("\"{s}\"")))
        }
    }
}

fn parse_diagnostics(names: Vec<String>, line: usize) -> Result<Diagnostics> {
    let mut d = Diagnostics::NONE;
    for name in names {
        match name.as_str() {
            "bracket" => d.bracket = true,
            "covariation" => d.covariation = true,
            "u_hat" => d.u_hat = true,
            "reconstruction" => d.reconstruction = true,
            "all" => d = Diagnostics::ALL,
            other => {
                return Err(Error::ConfigAt {
                    line,
                    message: format!("unknown diagnostic `{other}`"),
                })
            }
        }
    }
    Ok(d)
}

/// Parses and validates a configuration document.
pub fn parse_config(source: &str) -> Result<SimConfig> {
    let raw: RawConfig = toml::from_str(source).map_err(|e| {
        let message = e.message().trim().to_string();
        match e.span() {
            Some(span) => Error::ConfigAt {
                line: line_of(source, span),
                message,
            },
            None => Error::Config(message),
        }
    })?;

    let (t, t_line) = required(source, raw.t, "t")?;
    let (n_steps, n_line) = required(source, raw.n_steps, "n_steps")?;
    let n_steps = count(n_steps, "n_steps", n_line)?;
    let (h_grid, h_line) = required(source, raw.h_grid, "h_grid")?;
    let (n_replicas, r_line) = required(source, raw.n_replicas, "n_replicas")?;
    let n_replicas = count(n_replicas, "n_replicas", r_line)?;
    let (seed, s_line) = required(source, raw.master_seed, "master_seed")?;
    let master_seed = parse_seed(seed, s_line)?;

    let mut lines = vec![
        ("t", t_line),
        ("n_steps", n_line),
        ("h_grid", h_line),
        ("n_replicas", r_line),
        ("master_seed", s_line),
    ];

    let h_min = h_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let bin_width = match raw.bin_width {
        Some(w) => {
            lines.push(("bin_width", line_of(source, w.span())));
            w.into_inner()
        }
        None => default_bin_width(t, n_steps, h_min),
    };
    let alpha_mode = raw
        .alpha_mode
        .map(Spanned::into_inner)
        .unwrap_or(AlphaMode::Field);
    let centering = raw
        .centering
        .map(Spanned::into_inner)
        .unwrap_or(Centering::Empirical);
    let diagnostics = match raw.diagnostics {
        Some(d) => {
            let line = line_of(source, d.span());
            parse_diagnostics(d.into_inner(), line)?
        }
        None => Diagnostics::ALL,
    };
    let u_hat_nodes = match raw.u_hat_nodes {
        Some(v) => {
            let line = line_of(source, v.span());
            lines.push(("u_hat_nodes", line));
            count(v.into_inner(), "u_hat_nodes", line)?
        }
        None => DEFAULT_U_HAT_NODES,
    };

    let config = SimConfig {
        t,
        n_steps,
        h_grid,
        n_replicas,
        bin_width,
        master_seed,
        alpha_mode,
        centering,
        diagnostics,
        u_hat_nodes,
    };
    config.check().map_err(|(key, message)| {
        let message = format!("`{key}`: {message}");
        match lines.iter().find(|(k, _)| *k == key) {
            Some(&(_, line)) => Error::ConfigAt { line, message },
            None => Error::Config(message),
        }
    })?;
    Ok(config)
}
