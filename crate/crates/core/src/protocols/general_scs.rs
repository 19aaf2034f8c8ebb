//! Bypass encoders for other coherent-state superpositions: a triangle
//! (3-SCS), four peaks on a line, and a 2-SCS lifted onto a rectangle.

use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

use crate::dyad::{HybridComponent, HybridKet, HybridLayout};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::qubit::Axis;

use super::bypass::{encode_2scs, encode_4scs};
use super::{Channels, ProtocolSpec, TraceOut};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("amplitude {alpha} must be positive")));
    }
    Ok(())
}

fn spec(name: &str, ancillas: usize, gates_pre: Vec<Gate>) -> ProtocolSpec {
    ProtocolSpec {
        name: name.into(),
        modes: 1,
        ancillas,
        gates_post: Gate::adjoint_sequence(&gates_pre),
        gates_pre,
        measure_pre: vec![],
        channels: Channels { loss_modes: vec![0], dephased_ancillas: (0..ancillas).collect() },
        measure_post: vec![],
        trace_out: TraceOut { modes: vec![], ancillas: (0..ancillas).collect() },
    }
}

/// Σ c_k |β_k⟩ on one mode, normalized.
pub fn coherent_superposition(terms: &[(C64, C64)]) -> Result<HybridKet> {
    let comps = terms.iter().map(|&(c, b)| HybridComponent::new(vec![], vec![b], c)).collect();
    HybridKet::new(HybridLayout::new(1, 0), comps)?.normalized()
}

/// |α⟩ + |αe^{2πi/3}⟩ + |αe^{4πi/3}⟩.
pub fn make_3scs(alpha: f64) -> Result<HybridKet> {
    let terms: Vec<(C64, C64)> = (0..3).map(|k| (C64::from(1.0), C64::from_polar(alpha, 2.0 * PI * k as f64 / 3.0))).collect();
    coherent_superposition(&terms)
}

/// |−3α⟩ + |−α⟩ + |α⟩ + |3α⟩.
pub fn make_line_scs(alpha: f64) -> Result<HybridKet> {
    let terms: Vec<(C64, C64)> = [-3.0, -1.0, 1.0, 3.0].iter().map(|&k| (C64::from(1.0), C64::from(k * alpha))).collect();
    coherent_superposition(&terms)
}

/// Triangle → rectangle with vertices (±3α/4, ±√3α/2), then the 4-SCS encoder
/// on two more ancillas.
pub fn three_scs_gates(alpha: f64) -> Result<Vec<Gate>> {
    check_alpha(alpha)?;
    let s3 = 3f64.sqrt();
    let mut g = vec![
        Gate::Displace { mode: 0, re: -alpha / 4.0, im: 0.0 },
        Gate::rabi(0, Axis::X, 0, 0.0, PI / (3.0 * SQRT_2 * alpha)),
        Gate::rabi(0, Axis::Y, 0, 0.0, 6f64.sqrt() * alpha / 4.0),
        Gate::Displace { mode: 0, re: 0.0, im: -s3 * alpha / 4.0 },
    ];
    g.extend(encode_4scs(0.75 * alpha, s3 * alpha / 2.0, 0, 1, 2)?);
    Ok(g)
}

/// Peaks at ±α, ±3α pair up onto ±2α, then the 2-SCS encoder at 2α.
pub fn line_scs_gates(alpha: f64) -> Result<Vec<Gate>> {
    check_alpha(alpha)?;
    let mut g = vec![
        Gate::rabi(0, Axis::Y, 0, 0.0, PI / (4.0 * SQRT_2 * alpha)),
        Gate::rabi(0, Axis::X, 0, FRAC_PI_2, -SQRT_2 * alpha),
    ];
    g.extend(encode_2scs(2.0 * alpha, 0, 1)?);
    Ok(g)
}

/// R[−π/4] D[iα]: μ|α⟩ + ν|−α⟩ ↦ μe^{iα²}|√2α⟩ + νe^{−iα²}|√2iα⟩.
pub fn lift_gates(alpha: f64) -> Result<Vec<Gate>> {
    check_alpha(alpha)?;
    Ok(vec![Gate::Displace { mode: 0, re: 0.0, im: alpha }, Gate::PhaseRotation { mode: 0, angle: -FRAC_PI_4 }])
}

/// Lift, rotate the pair back onto the encoder's rectangle axes
/// (peaks at α(±1 + i)), then the 4-SCS encoder with α_r = α_i = α.
pub fn lifted_4scs_gates(alpha: f64) -> Result<Vec<Gate>> {
    let mut g = lift_gates(alpha)?;
    g.push(Gate::PhaseRotation { mode: 0, angle: FRAC_PI_4 });
    g.extend(encode_4scs(alpha, alpha, 0, 0, 1)?);
    Ok(g)
}

pub fn three_scs_spec(alpha: f64) -> Result<ProtocolSpec> {
    Ok(spec("bypass-3scs", 3, three_scs_gates(alpha)?))
}

pub fn line_scs_spec(alpha: f64) -> Result<ProtocolSpec> {
    Ok(spec("bypass-line", 2, line_scs_gates(alpha)?))
}

pub fn lifted_4scs_spec(alpha: f64) -> Result<ProtocolSpec> {
    Ok(spec("bypass-lifted", 2, lifted_4scs_gates(alpha)?))
}

/// Encode a one-mode ket whose ancillas (3 of them) are already present.
pub fn three_scs_protocol(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&three_scs_gates(alpha)?)
}

pub fn line_scs_protocol(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&line_scs_gates(alpha)?)
}

pub fn lift_2scs_to_4scs(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&lift_gates(alpha)?)
}

/// Mean photon number of `mode` over the components whose amplitude on it
/// lies within `radius` of the origin, renormalized. This isolates the
/// branches that the encoder steers onto the vacuum from the O(ε²) weight it
/// sends out towards ±2α.
pub fn central_photon_number(ket: &HybridKet, mode: usize, radius: f64) -> Result<f64> {
    if mode >= ket.layout().modes {
        return Err(Error::IndexOutOfRange { index: mode, count: ket.layout().modes });
    }
    let comps: Vec<HybridComponent> = ket.components().into_iter().filter(|c| c.amplitudes[mode].norm() <= radius).collect();
    if comps.is_empty() {
        return Err(Error::ZeroProbability);
    }
    let central = HybridKet::new(ket.layout(), comps)?.normalized()?;
    Ok(super::gaussian::moments(&central, mode)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::gaussian::moments;
    use crate::protocols::states::make_2scs;
    use crate::qubit::Level;

    #[test]
    fn round_trips() {
        let alpha = 2.5;
        let cases = [
            (make_3scs(alpha).unwrap().with_leading_ancillas(&[Level::G; 3]), three_scs_spec(alpha).unwrap()),
            (make_line_scs(alpha).unwrap().with_leading_ancillas(&[Level::G; 2]), line_scs_spec(alpha).unwrap()),
            (
                make_2scs(C64::new(0.3, 0.2), C64::from(0.9), alpha).unwrap().with_leading_ancillas(&[Level::G; 2]),
                lifted_4scs_spec(alpha).unwrap(),
            ),
        ];
        for (k, s) in cases {
            let back = k.apply_gates(&s.gates_pre).unwrap().apply_gates(&s.gates_post).unwrap();
            assert!((back.fidelity(&k).unwrap() - 1.0).abs() < 1e-9, "{}", s.name);
        }
    }

    #[test]
    fn encoded_peaks_reach_vacuum() {
        let alpha = 8.0;
        let line = make_line_scs(alpha).unwrap().with_leading_ancillas(&[Level::G; 2]);
        let tri = make_3scs(alpha).unwrap().with_leading_ancillas(&[Level::G; 3]);
        let lifted = make_2scs(C64::from(1.0), C64::from(1.0), alpha).unwrap().with_leading_ancillas(&[Level::G; 2]);
        let encoded = [
            line_scs_protocol(&line, alpha).unwrap(),
            three_scs_protocol(&tri, alpha).unwrap(),
            lifted.apply_gates(&lifted_4scs_gates(alpha).unwrap()).unwrap(),
        ];
        for e in &encoded {
            let n = central_photon_number(e, 0, 1.0).unwrap();
            assert!(n < 0.1, "central residual {n}");
            // the full mean stays O(1): O(ε²) weight at distance O(α)
            let (full, _) = moments(e, 0).unwrap();
            assert!(full > n);
        }
    }

    #[test]
    fn lift_places_peaks_on_diamond() {
        let (mu, nu, alpha) = (C64::new(0.6, 0.1), C64::new(0.3, -0.7), 1.3);
        let lifted = lift_2scs_to_4scs(&make_2scs(mu, nu, alpha).unwrap(), alpha).unwrap();
        let a2 = alpha * alpha;
        let r = SQRT_2 * alpha;
        let expect = coherent_superposition(&[
            (mu * C64::from_polar(1.0, a2), C64::from(r)),
            (nu * C64::from_polar(1.0, -a2), C64::new(0.0, r)),
        ])
        .unwrap();
        assert!((lifted.fidelity(&expect).unwrap() - 1.0).abs() < 1e-10);
    }
}
