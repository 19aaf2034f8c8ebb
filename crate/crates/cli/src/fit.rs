//! Fits over the small-loss window and their reference laws.
//!
//! | experiment | metric         | fitted quantity                  |
//! |------------|----------------|----------------------------------|
//! | fig2a      | channel_fidelity | decay rate γ of F(η)           |
//! | fig3       | wigner_origin  | slope of W(0,0) in 1 − η         |
//! | fig4       | log_negativity | deficit slope −dN/d(1 − η)       |
//! | fig5       | steering_depth | decay rate of the peak depth     |

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use qbypass::formulas as law;
use qbypass::metrics::{fit_exponential_decay, fit_linear, FIT_ETA_MIN};

use crate::sweep::Row;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub experiment: String,
    pub protocol: String,
    pub metric: String,
    pub alpha: f64,
    pub p: f64,
    pub quantity: String,
    pub fitted: Option<f64>,
    pub reference: Option<f64>,
    pub rel_dev: Option<f64>,
    pub samples: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Model {
    DecayRate,
    OriginSlope,
    DeficitSlope,
    SteeringRate,
}

impl Model {
    fn of(experiment: &str, metric: &str) -> Option<Model> {
        let base = metric.split(':').next().unwrap_or(metric);
        match (experiment, base) {
            ("fig2a", "channel_fidelity") => Some(Model::DecayRate),
            ("fig3", "wigner_origin") => Some(Model::OriginSlope),
            ("fig4", "log_negativity") => Some(Model::DeficitSlope),
            ("fig5", "steering_depth") => Some(Model::SteeringRate),
            _ => None,
        }
    }

    fn quantity(self) -> &'static str {
        match self {
            Model::DecayRate => "gamma",
            Model::OriginSlope => "origin_slope",
            Model::DeficitSlope => "deficit_slope",
            Model::SteeringRate => "steering_rate",
        }
    }

    fn fit(self, samples: &[(f64, f64)]) -> qbypass::Result<f64> {
        let loss: Vec<(f64, f64)> = samples.iter().map(|&(eta, y)| (1.0 - eta, y)).collect();
        match self {
            Model::DecayRate => fit_exponential_decay(samples).map(|f| f.param("gamma").unwrap_or(f64::NAN)),
            Model::OriginSlope => fit_linear(&loss).map(|f| f.param("slope").unwrap_or(f64::NAN)),
            Model::DeficitSlope => fit_linear(&loss).map(|f| -f.param("slope").unwrap_or(f64::NAN)),
            Model::SteeringRate => {
                let mag: Vec<(f64, f64)> = samples.iter().map(|&(eta, y)| (eta, -y)).collect();
                fit_exponential_decay(&mag).map(|f| f.param("gamma").unwrap_or(f64::NAN))
            }
        }
    }

    /// Reference value: a fitted law where one is quoted, otherwise the same
    /// fit applied to a closed form sampled on the same grid.
    fn reference(self, protocol: &str, alpha: f64, etas: &[f64]) -> Option<f64> {
        let refit = |f: &dyn Fn(f64) -> f64| {
            let s: Vec<(f64, f64)> = etas.iter().map(|&e| (e, f(e))).collect();
            self.fit(&s).ok()
        };
        match (self, protocol) {
            (Model::DecayRate, "none") => Some(law::gamma_unprotected(alpha)),
            (Model::DecayRate, "gaussian") => Some(law::gamma_gaussian(alpha)),
            (Model::DecayRate, "bypass") => Some(law::gamma_bypass(alpha)),
            (Model::OriginSlope, "none") => refit(&|e| law::unprotected_cat_origin(alpha, e)),
            (Model::OriginSlope, "gaussian") => Some(law::gaussian_peak_slope(alpha)),
            (Model::OriginSlope, "bypass") => {
                let a2 = alpha * alpha;
                Some(2.0 * (-2.0 * a2).exp() * a2 / PI)
            }
            (Model::DeficitSlope, "bypass") => Some(law::ecs_bypass_slope(alpha)),
            (Model::SteeringRate, "none") => refit(&|e| law::unprotected_witness_origin(alpha, e)),
            (Model::SteeringRate, "gaussian") => {
                refit(&|e| -(-law::unprotected_witness_origin(alpha, e)).powf((-0.18f64).exp()))
            }
            (Model::SteeringRate, "bypass") => Some(1.46 * alpha * alpha - 7.14 * alpha + 11.0),
            _ => None,
        }
    }
}

/// Fit every (experiment, protocol, metric, α, p) series that has a model,
/// using its ok rows with η in the fit window. Series keep row order.
pub fn fit_rows(rows: &[Row]) -> Vec<FitEntry> {
    let mut groups: Vec<(Model, &Row, Vec<&Row>)> = Vec::new();
    for r in rows {
        let Some(model) = Model::of(&r.experiment, &r.metric) else { continue };
        let same = |g: &&mut (Model, &Row, Vec<&Row>)| {
            let h = g.1;
            h.experiment == r.experiment && h.protocol == r.protocol && h.metric == r.metric && h.alpha == r.alpha && h.p == r.p
        };
        match groups.iter_mut().find(same) {
            Some(g) => g.2.push(r),
            None => groups.push((model, r, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(model, head, members)| {
            let window: Vec<(f64, f64)> = members
                .iter()
                .filter(|r| r.ok() && r.eta >= FIT_ETA_MIN - 1e-12)
                .filter_map(|r| r.value.map(|v| (r.eta, v)))
                .collect();
            let etas: Vec<f64> = window.iter().map(|s| s.0).collect();
            let (fitted, error) = match model.fit(&window) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let reference = if fitted.is_some() { model.reference(&head.protocol, head.alpha, &etas) } else { None };
            let rel_dev = match (fitted, reference) {
                (Some(f), Some(r)) if r != 0.0 => Some(f / r - 1.0),
                _ => None,
            };
            FitEntry {
                experiment: head.experiment.clone(),
                protocol: head.protocol.clone(),
                metric: head.metric.clone(),
                alpha: head.alpha,
                p: head.p,
                quantity: model.quantity().into(),
                fitted,
                reference,
                rel_dev,
                samples: window.len(),
                error,
            }
        })
        .collect()
}

/// Plain-text table of fits next to their references.
pub fn fit_table(entries: &[FitEntry]) -> String {
    let num = |x: Option<f64>| x.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<16} {:<14} {:>6} {:>5} {:>12} {:>12} {:>9} {:>3}",
        "experiment", "protocol", "quantity", "alpha", "p", "fitted", "reference", "rel_dev", "n"
    );
    for e in entries {
        let _ = write!(
            out,
            "{:<10} {:<16} {:<14} {:>6} {:>5} {:>12} {:>12} {:>9} {:>3}",
            e.experiment,
            e.protocol,
            e.quantity,
            e.alpha,
            e.p,
            num(e.fitted),
            num(e.reference),
            e.rel_dev.map(|v| format!("{:+.3}", v)).unwrap_or_else(|| "-".into()),
            e.samples
        );
        if let Some(err) = &e.error {
            let _ = write!(out, "  ({err})");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(protocol: &str, alpha: f64, eta: f64, value: f64) -> Row {
        Row {
            experiment: "fig2a".into(),
            protocol: protocol.into(),
            alpha,
            eta,
            p: 0.0,
            metric: "channel_fidelity".into(),
            value: Some(value),
            success_prob: Some(1.0),
            status: "ok".into(),
            runtime_ms: None,
            version: "0".into(),
            config_hash: "0".into(),
        }
    }

    #[test]
    fn recovers_a_synthetic_decay_rate() {
        let g = law::gamma_bypass(4.0);
        let rows: Vec<Row> = (0..11)
            .map(|i| 0.99 + 0.001 * i as f64)
            .map(|e| row("bypass", 4.0, e, 0.97 * (-g * (1.0 - e)).exp()))
            .collect();
        let fits = fit_rows(&rows);
        assert_eq!(fits.len(), 1);
        assert!(fits[0].rel_dev.unwrap().abs() < 1e-9);
        assert_eq!(fits[0].samples, 11);
    }

    #[test]
    fn too_few_samples_is_reported() {
        let rows = vec![row("none", 2.0, 1.0, 1.0), row("none", 2.0, 0.5, 0.3)];
        let fits = fit_rows(&rows);
        assert_eq!(fits[0].samples, 1);
        assert!(fits[0].error.as_deref().unwrap().contains("insufficient"));
    }
}
