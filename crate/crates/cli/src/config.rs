//! Sweep configuration: one TOML document per experiment.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qbypass::experiments::Strategy;
use qbypass::metrics::Backend;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "fig2a")]
    Fig2a,
    #[serde(rename = "fig2b")]
    Fig2b,
    #[serde(rename = "fig3")]
    Fig3,
    #[serde(rename = "fig4")]
    Fig4,
    #[serde(rename = "fig5")]
    Fig5,
    #[serde(rename = "figA1")]
    FigA1,
    #[serde(rename = "figA2")]
    FigA2,
    #[serde(rename = "figB1")]
    FigB1,
    #[serde(rename = "figC-check")]
    FigCCheck,
    #[serde(rename = "figF1")]
    FigF1,
    #[serde(rename = "appendixD-check")]
    AppendixDCheck,
    #[serde(rename = "appendixE-check")]
    AppendixECheck,
    #[serde(rename = "appendixG-check")]
    AppendixGCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::Fig2a,
        Experiment::Fig2b,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Fig5,
        Experiment::FigA1,
        Experiment::FigA2,
        Experiment::FigB1,
        Experiment::FigCCheck,
        Experiment::FigF1,
        Experiment::AppendixDCheck,
        Experiment::AppendixECheck,
        Experiment::AppendixGCheck,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Fig2a => "fig2a",
            Experiment::Fig2b => "fig2b",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::FigA1 => "figA1",
            Experiment::FigA2 => "figA2",
            Experiment::FigB1 => "figB1",
            Experiment::FigCCheck => "figC-check",
            Experiment::FigF1 => "figF1",
            Experiment::AppendixDCheck => "appendixD-check",
            Experiment::AppendixECheck => "appendixE-check",
            Experiment::AppendixGCheck => "appendixG-check",
        }
    }

    /// Protocols the experiment has a meaning for.
    pub fn strategies(self) -> &'static [Strategy] {
        use Strategy::*;
        match self {
            Experiment::Fig4 | Experiment::Fig5 => &[None, Gaussian, Bypass],
            Experiment::FigB1 | Experiment::AppendixDCheck | Experiment::AppendixGCheck => &[None, Bypass],
            Experiment::AppendixECheck => &[Bypass],
            _ => &Strategy::ALL,
        }
    }

    /// Metrics emitted per grid point, in row order.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            Experiment::Fig2a | Experiment::Fig2b | Experiment::FigA1 | Experiment::FigCCheck | Experiment::FigF1 => {
                &["channel_fidelity"]
            }
            Experiment::Fig3 => &["wigner_origin"],
            Experiment::Fig4 => &["log_negativity"],
            Experiment::Fig5 => &["steering_depth"],
            Experiment::FigA2 => &["fidelity_even", "fidelity_imag", "fidelity_odd"],
            Experiment::FigB1 => &["fidelity", "wigner_origin"],
            Experiment::AppendixDCheck => &["fidelity", "fidelity_injected_flip"],
            Experiment::AppendixECheck => &[
                "jc_distance",
                "sandwich_distance",
                "sandwich_identity_at_zero",
                "synthetic_residual_coarse",
                "synthetic_residual_fine",
                "synthetic_ratio",
                "sine_operator_distance",
            ],
            Experiment::AppendixGCheck => &["fidelity_3scs", "fidelity_line", "fidelity_lifted"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Dyad,
    Fock,
    Both,
}

impl BackendChoice {
    pub fn backends(self) -> &'static [Backend] {
        match self {
            BackendChoice::Dyad => &[Backend::Dyad],
            BackendChoice::Fock => &[Backend::Fock],
            BackendChoice::Both => &[Backend::Dyad, Backend::Fock],
        }
    }
}

impl FromStr for BackendChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "dyad" => Ok(BackendChoice::Dyad),
            "fock" => Ok(BackendChoice::Fock),
            "both" => Ok(BackendChoice::Both),
            _ => Err(HarnessError::Config(format!("unknown backend '{s}'"))),
        }
    }
}

/// A grid written either as an explicit list or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, HarnessError> {
        match *self {
            Grid::List(ref v) => Ok(v.clone()),
            Grid::Range { start, stop, step } => {
                if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(HarnessError::Config(format!("bad range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // rounding keeps values like 0.35 from printing as 0.35000000000000003
                Ok((0..n).map(|i| ((start + step * i as f64) * 1e12).round() / 1e12).collect())
            }
        }
    }
}

fn default_p() -> Grid {
    Grid::List(vec![0.0, 0.05, 0.1])
}

fn default_backend() -> BackendChoice {
    BackendChoice::Dyad
}

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Experiment,
    pub alpha: Grid,
    pub eta: Grid,
    #[serde(default = "default_p")]
    pub p: Grid,
    pub protocols: Vec<Strategy>,
    #[serde(default = "default_backend")]
    pub backend: BackendChoice,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A validated configuration with expanded grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
    pub protocols: Vec<Strategy>,
    pub backend: BackendChoice,
    pub output: PathBuf,
}

fn check_grid(name: &str, v: &[f64], unit: bool) -> Result<(), HarnessError> {
    if v.is_empty() {
        return Err(HarnessError::Config(format!("{name} grid is empty")));
    }
    for &x in v {
        let ok = if unit { (0.0..=1.0).contains(&x) } else { x.is_finite() && x > 0.0 };
        if !ok {
            let range = if unit { "[0, 1]" } else { "(0, inf)" };
            return Err(HarnessError::Config(format!("{name} value {x} outside {range}")));
        }
    }
    Ok(())
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        SweepConfig::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        SweepConfig::parse(&text)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, HarnessError> {
        let alpha = raw.alpha.values()?;
        let eta = raw.eta.values()?;
        let p = raw.p.values()?;
        check_grid("alpha", &alpha, false)?;
        check_grid("eta", &eta, true)?;
        check_grid("p", &p, true)?;
        if raw.protocols.is_empty() {
            return Err(HarnessError::Config("protocol list is empty".into()));
        }
        let allowed = raw.experiment.strategies();
        if let Some(s) = raw.protocols.iter().find(|s| !allowed.contains(s)) {
            return Err(HarnessError::Config(format!("protocol '{s}' is not defined for {}", raw.experiment)));
        }
        let output = raw.output.unwrap_or_else(|| PathBuf::from(format!("{}.csv", raw.experiment)));
        Ok(SweepConfig { experiment: raw.experiment, alpha, eta, p, protocols: raw.protocols, backend: raw.backend, output })
    }

    /// First 16 hex digits of the SHA-256 of the expanded configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Number of rows a sweep of this configuration produces.
    pub fn row_count(&self) -> usize {
        self.protocols.len()
            * self.alpha.len()
            * self.p.len()
            * self.eta.len()
            * self.experiment.metrics().len()
            * self.backend.backends().len()
    }
}

/// The checked-in configuration for an experiment.
pub fn builtin(e: Experiment) -> &'static str {
    match e {
        Experiment::Fig2a => include_str!("../../../configs/fig2a.toml"),
        Experiment::Fig2b => include_str!("../../../configs/fig2b.toml"),
        Experiment::Fig3 => include_str!("../../../configs/fig3.toml"),
        Experiment::Fig4 => include_str!("../../../configs/fig4.toml"),
        Experiment::Fig5 => include_str!("../../../configs/fig5.toml"),
        Experiment::FigA1 => include_str!("../../../configs/figA1.toml"),
        Experiment::FigA2 => include_str!("../../../configs/figA2.toml"),
        Experiment::FigB1 => include_str!("../../../configs/figB1.toml"),
        Experiment::FigCCheck => include_str!("../../../configs/figC-check.toml"),
        Experiment::FigF1 => include_str!("../../../configs/figF1.toml"),
        Experiment::AppendixDCheck => include_str!("../../../configs/appendixD-check.toml"),
        Experiment::AppendixECheck => include_str!("../../../configs/appendixE-check.toml"),
        Experiment::AppendixGCheck => include_str!("../../../configs/appendixG-check.toml"),
    }
}
