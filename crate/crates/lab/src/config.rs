//! Command-line configuration shared by all commands.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use hml_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    /// Scaled weights against `T₀`.
    A,
    /// Row-normalized weights against the ranked tree.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair(pub f64, pub f64);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        match parts.as_slice() {
            [re] => re.trim().parse().map(|r| Pair(r, 0.0)).map_err(|e| format!("{e}")),
            [re, im] => {
                let re = re.trim().parse::<f64>().map_err(|e| format!("{e}"))?;
                let im = im.trim().parse::<f64>().map_err(|e| format!("{e}"))?;
                Ok(Pair(re, im))
            }
            _ => Err(format!("expected RE,IM, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [min, max, count] = parts.as_slice() else {
            return Err(format!("expected MIN,MAX,COUNT, got `{s}`"));
        };
        Ok(GridSpec {
            min: min.parse().map_err(|e| format!("{e}"))?,
            max: max.parse().map_err(|e| format!("{e}"))?,
            count: count.parse().map_err(|e| format!("{e}"))?,
        })
    }
}

/// Parameters of one run. Stored verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct ExperimentConfig {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Shift as `RE,IM`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<Pair>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub b: Option<usize>,
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long)]
    pub eta_eps: Option<f64>,
    /// Abscissae as `MIN,MAX,COUNT`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<GridSpec>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Weight matrix (CSV, no header) used instead of a random sample.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Starting row of the unfolding, 1-based.
    #[arg(long)]
    pub i0: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub which: Option<Which>,
    /// Histogram bins on `[0, 1]`.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Leading terms kept in the tree and RDE series.
    #[arg(long)]
    pub series_terms: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub averaging: Option<usize>,
    #[arg(long)]
    pub prune_tol: Option<f64>,
}

fn bad(name: &str, reason: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("--{name}: {reason}"))
}

impl ExperimentConfig {
    pub fn alpha_or(&self, default: f64) -> Result<f64, LabError> {
        let a = self.alpha.unwrap_or(default);
        check_alpha(a)?;
        Ok(a)
    }

    pub fn alpha_required(&self) -> Result<f64, LabError> {
        let a = self.alpha.ok_or_else(|| bad("alpha", "is required"))?;
        check_alpha(a)?;
        Ok(a)
    }

    pub fn n_or(&self, default: usize) -> Result<usize, LabError> {
        positive("n", self.n.unwrap_or(default))
    }

    pub fn trials_or(&self, default: usize) -> Result<usize, LabError> {
        positive("trials", self.trials.unwrap_or(default))
    }

    pub fn b_or(&self, default: usize) -> Result<usize, LabError> {
        positive("b", self.b.unwrap_or(default))
    }

    pub fn h_or(&self, default: usize) -> Result<usize, LabError> {
        positive("h", self.h.unwrap_or(default))
    }

    pub fn z(&self) -> Result<Complex64, LabError> {
        let Pair(re, im) = self.z.unwrap_or(Pair(0.0, 0.0));
        if !re.is_finite() || !im.is_finite() {
            return Err(bad("z", "must be finite"));
        }
        Ok(Complex64::new(re, im))
    }

    pub fn eta_eps_or(&self, default: f64) -> Result<f64, LabError> {
        let e = self.eta_eps.unwrap_or(default);
        if !(e > 0.0 && e.is_finite()) {
            return Err(bad("eta-eps", "must be positive"));
        }
        Ok(e)
    }

    pub fn grid_or(&self, default: GridSpec) -> Result<Vec<f64>, LabError> {
        let g = self.grid.unwrap_or(default);
        hml_core::measure::linear_grid(g.min, g.max, g.count).map_err(|e| bad("grid", e))
    }

    pub fn bins_or(&self, default: usize) -> Result<usize, LabError> {
        positive("bins", self.bins.unwrap_or(default))
    }
}

fn check_alpha(a: f64) -> Result<(), LabError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(bad("alpha", format!("{a} is outside (0, 1)")));
    }
    Ok(())
}

fn positive(name: &str, v: usize) -> Result<usize, LabError> {
    if v == 0 {
        return Err(bad(name, "must be at least 1"));
    }
    Ok(v)
}
