//! Figure-level quantities. Each evaluator runs one protection strategy on one
//! input family and reduces the output to a scalar.
//!
//! The squeezing baseline has no dyad form and always runs on the Fock
//! oracle, whatever backend is requested.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use crate::dyad::HybridKet;
use crate::error::{Error, Result};
use crate::fock::{self, adequate_dim, with_growing_dim, HilbertLayout, TRUNCATION_TOL};
use crate::metrics::{
    fock_dim_for, log_negativity, log_negativity_fock, protocol_fidelity, vacuum_project_witness,
    vacuum_project_witness_fock, Backend, SearchRegion,
};
use crate::protocols::{self, conditional, gaussian, general_scs, run_protocol, run_protocol_fock, FockOutput, ProtocolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    None,
    Gaussian,
    Bypass,
    BypassSine,
    BypassFiltered,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::None, Strategy::Gaussian, Strategy::Bypass, Strategy::BypassSine, Strategy::BypassFiltered];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Gaussian => "gaussian",
            Strategy::Bypass => "bypass",
            Strategy::BypassSine => "bypass-sine",
            Strategy::BypassFiltered => "bypass-filtered",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown protocol '{s}'")))
    }
}

/// One evaluated quantity. `dim` is the per-mode cutoff when the Fock oracle
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub success_prob: f64,
    pub dim: Option<usize>,
}

/// Extra Fock levels per mode for squeezed intermediate states.
pub const SQUEEZE_MARGIN: usize = 30;

/// Peak search used on Fock densities, where every Wigner sample costs a
/// full parity evaluation. The peaks searched here sit at the origin.
pub const FOCK_PEAK_REGION: SearchRegion = SearchRegion { center: C64::new(0.0, 0.0), half_width: 0.1, spacing: 0.05 };

/// Single-mode pipeline for μ|α⟩ + ν|−α⟩ inputs; the squeezing baseline uses
/// the r_opt of that input.
pub fn single_mode_spec(s: Strategy, alpha: f64, mu: C64, nu: C64) -> Result<ProtocolSpec> {
    match s {
        Strategy::None => Ok(protocols::unprotected(1)),
        Strategy::Gaussian => gaussian::gaussian_spec(1, gaussian::r_opt_2scs(mu, nu, alpha)?.r, true),
        Strategy::Bypass => protocols::bypass_2scs(alpha),
        Strategy::BypassSine => protocols::bypass_sine_2scs(alpha),
        Strategy::BypassFiltered => conditional::bypass_filtered(alpha),
    }
}

/// Two-mode pipeline for entangled coherent states.
pub fn two_mode_spec(s: Strategy, alpha: f64) -> Result<ProtocolSpec> {
    match s {
        Strategy::None => Ok(protocols::unprotected(2)),
        Strategy::Gaussian => gaussian::gaussian_spec(2, gaussian::r_opt_ecs(alpha)?.r, true),
        Strategy::Bypass => protocols::bypass_ecs(alpha),
        other => Err(Error::Unsupported(format!("no two-mode form of '{other}'"))),
    }
}

fn effective(s: Strategy, backend: Backend) -> Backend {
    if s == Strategy::Gaussian {
        Backend::Fock
    } else {
        backend
    }
}

fn start_dim(spec: &ProtocolSpec, alpha: f64) -> usize {
    if spec.uses_squeezing() {
        adequate_dim(alpha) + SQUEEZE_MARGIN
    } else {
        fock_dim_for(spec, alpha)
    }
}

/// Fidelity of `input` with the output of `spec`.
pub fn fidelity_on(spec: &ProtocolSpec, input: &HybridKet, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    fidelity_from_dim(spec, input, eta, p, backend, start_dim(spec, alpha))
}

/// As [`fidelity_on`], with an explicit starting Fock cutoff.
pub fn fidelity_from_dim(spec: &ProtocolSpec, input: &HybridKet, eta: f64, p: f64, backend: Backend, dim: usize) -> Result<Measured> {
    match backend {
        Backend::Dyad => {
            let f = protocol_fidelity(spec, input, eta, p, Backend::Dyad, None)?;
            Ok(Measured { value: f.fidelity, success_prob: f.success_prob, dim: None })
        }
        Backend::Fock => {
            let (f, dim) = with_growing_dim(dim, |d| {
                protocol_fidelity(spec, input, eta, p, Backend::Fock, Some(d))
            })?;
            Ok(Measured { value: f.fidelity, success_prob: f.success_prob, dim: Some(dim) })
        }
    }
}

/// Channel fidelity of the 2-SCS channel at amplitude α.
pub fn channel_fidelity_for(s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    let spec = single_mode_spec(s, alpha, C64::from(1.0), C64::from(0.0))?;
    fidelity_on(&spec, &protocols::virtual_2scs(alpha)?, alpha, eta, p, effective(s, backend))
}

/// Fidelity of the individual state μ|α⟩ + ν|−α⟩.
pub fn state_fidelity_for(s: Strategy, mu: C64, nu: C64, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    let spec = single_mode_spec(s, alpha, mu, nu)?;
    fidelity_on(&spec, &protocols::make_2scs(mu, nu, alpha)?, alpha, eta, p, effective(s, backend))
}

fn run_fock(spec: &ProtocolSpec, input: &HybridKet, dim: usize, eta: f64, p: f64) -> Result<FockOutput> {
    let l = input.layout();
    let layout = HilbertLayout::new(vec![dim; l.modes], l.ancillas)?;
    let psi = input.to_fock(&layout)?;
    psi.check_truncation()?;
    run_protocol_fock(spec, &psi, eta, p)
}

/// W(0,0) of the output of `spec` on `input`.
pub fn origin_wigner_on(spec: &ProtocolSpec, input: &HybridKet, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    match backend {
        Backend::Dyad => {
            let out = run_protocol(spec, input, eta, p)?;
            Ok(Measured { value: out.state.wigner(0, C64::from(0.0))?, success_prob: out.success_prob, dim: None })
        }
        Backend::Fock => {
            let ((w, prob), dim) = with_growing_dim(start_dim(spec, alpha), |d| {
                let out = run_fock(spec, input, d, eta, p)?;
                Ok((fock::wigner_displaced_parity(&out.reduced_density()?, C64::from(0.0))?, out.success_prob))
            })?;
            Ok(Measured { value: w, success_prob: prob, dim: Some(dim) })
        }
    }
}

/// W(0,0) of the odd cat |α⟩ − |−α⟩ after the channel.
pub fn cat_origin_for(s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    let (mu, nu) = (C64::from(1.0), C64::from(-1.0));
    let spec = single_mode_spec(s, alpha, mu, nu)?;
    origin_wigner_on(&spec, &protocols::make_2scs(mu, nu, alpha)?, alpha, eta, p, effective(s, backend))
}

/// |αe^{iπ/4}⟩ − |αe^{3iπ/4}⟩ − |αe^{5iπ/4}⟩ + |αe^{7iπ/4}⟩.
pub fn square_4scs(alpha: f64) -> Result<HybridKet> {
    let one = C64::from(1.0);
    protocols::make_4scs([one, one, -one, -one], C64::from_polar(alpha, FRAC_PI_4))
}

fn square_spec(s: Strategy, alpha: f64) -> Result<ProtocolSpec> {
    let side = alpha * FRAC_1_SQRT_2;
    match s {
        Strategy::None => Ok(protocols::unprotected(1)),
        Strategy::Bypass => protocols::bypass_4scs(side, side),
        other => Err(Error::Unsupported(format!("no 4-SCS form of '{other}'"))),
    }
}

/// Fidelity of [`square_4scs`] after the channel.
pub fn square_fidelity_for(s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    fidelity_on(&square_spec(s, alpha)?, &square_4scs(alpha)?, alpha, eta, p, backend)
}

/// W(0,0) of [`square_4scs`] after the channel.
pub fn square_origin_for(s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    origin_wigner_on(&square_spec(s, alpha)?, &square_4scs(alpha)?, alpha, eta, p, backend)
}

/// Codes beyond the two- and four-component families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneralCode {
    Triangle,
    Line,
    Lifted,
}

impl GeneralCode {
    pub const ALL: [GeneralCode; 3] = [GeneralCode::Triangle, GeneralCode::Line, GeneralCode::Lifted];

    /// Input state at amplitude α; the lifted code takes a generic 2-SCS.
    pub fn input(self, alpha: f64) -> Result<HybridKet> {
        match self {
            GeneralCode::Triangle => general_scs::make_3scs(alpha),
            GeneralCode::Line => general_scs::make_line_scs(alpha),
            GeneralCode::Lifted => protocols::make_2scs(C64::new(0.6, 0.2), C64::new(0.3, -0.5), alpha),
        }
    }

    pub fn spec(self, alpha: f64) -> Result<ProtocolSpec> {
        match self {
            GeneralCode::Triangle => general_scs::three_scs_spec(alpha),
            GeneralCode::Line => general_scs::line_scs_spec(alpha),
            GeneralCode::Lifted => general_scs::lifted_4scs_spec(alpha),
        }
    }

    /// Largest coherent amplitude reached inside the protocol.
    pub fn reach(self, alpha: f64) -> f64 {
        match self {
            GeneralCode::Triangle => 4.0 * alpha,
            GeneralCode::Line => 6.0 * alpha,
            GeneralCode::Lifted => 3.0 * alpha,
        }
    }
}

/// Fidelity of a general code's input after the channel, protected or not.
pub fn general_fidelity_for(code: GeneralCode, s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    let spec = match s {
        Strategy::None => protocols::unprotected(1),
        Strategy::Bypass => code.spec(alpha)?,
        other => return Err(Error::Unsupported(format!("no {code:?} form of '{other}'"))),
    };
    fidelity_from_dim(&spec, &code.input(alpha)?, eta, p, backend, adequate_dim(code.reach(alpha)))
}

/// Crop both modes to the levels an amplitude-α output needs, rejecting the
/// crop if it discards more than the truncation tolerance.
fn cropped_density(out: &FockOutput, alpha: f64) -> Result<fock::FockOperator> {
    let dims: Vec<usize> = out.mixture.layout.mode_dims().iter().map(|&d| d.min(adequate_dim(alpha))).collect();
    let (m, lost) = out.mixture.cropped(&dims)?;
    if lost > TRUNCATION_TOL {
        return Err(Error::Truncation(format!("cropping to {dims:?} discards {lost:.2e}")));
    }
    m.reduced_density(&out.keep)
}

/// Logarithmic negativity of the odd ECS after the channel on both modes.
pub fn ecs_log_negativity_for(s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    let spec = two_mode_spec(s, alpha)?;
    let ecs = protocols::make_ecs(false, alpha)?;
    match effective(s, backend) {
        Backend::Dyad => {
            let out = run_protocol(&spec, &ecs, eta, p)?;
            Ok(Measured { value: log_negativity(&out.state, &[0])?, success_prob: out.success_prob, dim: None })
        }
        Backend::Fock => {
            let ((ln, prob), dim) = with_growing_dim(start_dim(&spec, alpha), |d| {
                let out = run_fock(&spec, &ecs, d, eta, p)?;
                Ok((log_negativity_fock(&cropped_density(&out, alpha)?, &[0])?, out.success_prob))
            })?;
            Ok(Measured { value: ln, success_prob: prob, dim: Some(dim) })
        }
    }
}

/// Depth of the negative Wigner peak steered into mode 2 of the odd ECS by a
/// vacuum projection on mode 1. The success probability includes the
/// projection.
pub fn steering_depth_for(s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Result<Measured> {
    let spec = two_mode_spec(s, alpha)?;
    let ecs = protocols::make_ecs(false, alpha)?;
    match effective(s, backend) {
        Backend::Dyad => {
            let out = run_protocol(&spec, &ecs, eta, p)?;
            let w = vacuum_project_witness(&out.state, 0, 1, SearchRegion::default())?;
            Ok(Measured { value: w.peak.depth, success_prob: out.success_prob * w.probability, dim: None })
        }
        Backend::Fock => {
            let ((w, prob), dim) = with_growing_dim(start_dim(&spec, alpha), |d| {
                let out = run_fock(&spec, &ecs, d, eta, p)?;
                let w = vacuum_project_witness_fock(&out.mixture, 0, 1, FOCK_PEAK_REGION)?;
                Ok((w.peak.depth, out.success_prob * w.probability))
            })?;
            Ok(Measured { value: w, success_prob: prob, dim: Some(dim) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_2_PI, LN_2};

    #[test]
    fn strategy_labels_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.label().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.label()));
        }
        assert!("squeeze".parse::<Strategy>().is_err());
    }

    #[test]
    fn lossless_values() {
        let ln = ecs_log_negativity_for(Strategy::Bypass, 2.0, 1.0, 0.0, Backend::Dyad).unwrap();
        assert!((ln.value - LN_2).abs() < 1e-9);
        let w = cat_origin_for(Strategy::None, 2.0, 1.0, 0.0, Backend::Dyad).unwrap();
        assert!((w.value + FRAC_2_PI).abs() < 1e-6);
        let f = channel_fidelity_for(Strategy::Bypass, 1.5, 1.0, 0.0, Backend::Fock).unwrap();
        assert!((f.value - 1.0).abs() < 1e-9);
        assert!(f.dim.is_some());
    }

    #[test]
    fn backends_agree_on_cat_origin() {
        let d = cat_origin_for(Strategy::Bypass, 1.5, 0.9, 0.1, Backend::Dyad).unwrap();
        let f = cat_origin_for(Strategy::Bypass, 1.5, 0.9, 0.1, Backend::Fock).unwrap();
        assert!((d.value - f.value).abs() < 1e-8, "{d:?} {f:?}");
    }

    #[test]
    fn square_state_round_trip() {
        let f = square_fidelity_for(Strategy::Bypass, 3.0, 1.0, 0.0, Backend::Dyad).unwrap();
        assert!((f.value - 1.0).abs() < 1e-9);
        let w = square_origin_for(Strategy::None, 3.0, 1.0, 0.0, Backend::Dyad).unwrap();
        let psi = square_4scs(3.0).unwrap();
        assert!((w.value - psi.to_density().wigner(0, C64::from(0.0)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn two_mode_rejects_single_mode_variants() {
        assert!(matches!(two_mode_spec(Strategy::BypassSine, 2.0), Err(Error::Unsupported(_))));
    }
}
