//! Qubit-bypass encoders: two Rabi gates per ancilla move the oscillator's
//! which-peak information into the qubit and the peaks onto the vacuum.
//!
//! With |±_i⟩ = (|e⟩ ± i|g⟩)/√2, U_R = exp[iεσ_xX] sends |g⟩|α⟩ to ≈|−_i⟩|α⟩
//! and |g⟩|−α⟩ to ≈|+_i⟩|−α⟩; U_D = exp[−i√2ασ_yP] then displaces the σ_y = ∓1
//! branches by ∓α.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI, SQRT_2};

use crate::dyad::HybridKet;
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::qubit::Axis;

use super::{Channels, ProtocolSpec, TraceOut};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("amplitude {alpha} must be positive")));
    }
    Ok(())
}

/// ε = π/(4√2α).
pub fn rotation_strength(alpha: f64) -> f64 {
    PI / (4.0 * SQRT_2 * alpha)
}

/// U_R then U_D for a real-axis pair ±α.
pub fn encode_2scs(alpha: f64, mode: usize, ancilla: usize) -> Result<Vec<Gate>> {
    check_alpha(alpha)?;
    Ok(vec![
        Gate::rabi(ancilla, Axis::X, mode, 0.0, rotation_strength(alpha)),
        Gate::rabi(ancilla, Axis::Y, mode, FRAC_PI_2, -SQRT_2 * alpha),
    ])
}

/// Real part through ancilla `a1`, imaginary part through `a2`.
pub fn encode_4scs(alpha_r: f64, alpha_i: f64, mode: usize, a1: usize, a2: usize) -> Result<Vec<Gate>> {
    check_alpha(alpha_r)?;
    check_alpha(alpha_i)?;
    Ok(vec![
        Gate::rabi(a1, Axis::X, mode, 0.0, rotation_strength(alpha_r)),
        Gate::rabi(a1, Axis::Y, mode, FRAC_PI_2, -SQRT_2 * alpha_r),
        Gate::rabi(a2, Axis::X, mode, FRAC_PI_2, rotation_strength(alpha_i)),
        Gate::rabi(a2, Axis::Y, mode, 0.0, SQRT_2 * alpha_i),
    ])
}

/// exp[−it₁Xσ_y]·exp[it₂σ_z]·exp[2it₁Xσ_y]·exp[−it₂σ_z]·exp[−it₁Xσ_y] with
/// t₁ = π/(4√2α), listed in application order (rightmost factor first).
pub fn sine_rabi_gates(alpha: f64, mode: usize, ancilla: usize, t2: f64) -> Result<Vec<Gate>> {
    check_alpha(alpha)?;
    let t1 = rotation_strength(alpha);
    Ok(vec![
        Gate::rabi(ancilla, Axis::Y, mode, 0.0, -t1),
        Gate::QubitRotation { ancilla, axis: Axis::Z, angle: -t2 },
        Gate::rabi(ancilla, Axis::Y, mode, 0.0, 2.0 * t1),
        Gate::QubitRotation { ancilla, axis: Axis::Z, angle: t2 },
        Gate::rabi(ancilla, Axis::Y, mode, 0.0, -t1),
    ])
}

/// Sine-Rabi entangler followed by the matching displacement. The sine gate
/// with t₂ = −π/8 rotates the opposite way to U_R, so the displacement sign
/// flips too.
pub fn encode_sine_2scs(alpha: f64, mode: usize, ancilla: usize) -> Result<Vec<Gate>> {
    let mut g = sine_rabi_gates(alpha, mode, ancilla, -FRAC_PI_8)?;
    g.push(Gate::rabi(ancilla, Axis::Y, mode, FRAC_PI_2, SQRT_2 * alpha));
    Ok(g)
}

fn bypass_spec(name: &str, modes: usize, ancillas: usize, gates_pre: Vec<Gate>) -> ProtocolSpec {
    let gates_post = Gate::adjoint_sequence(&gates_pre);
    ProtocolSpec {
        name: name.into(),
        modes,
        ancillas,
        gates_pre,
        measure_pre: vec![],
        channels: Channels { loss_modes: (0..modes).collect(), dephased_ancillas: (0..ancillas).collect() },
        gates_post,
        measure_post: vec![],
        trace_out: TraceOut { modes: vec![], ancillas: (0..ancillas).collect() },
    }
}

/// Loss on every mode, nothing else.
pub fn unprotected(modes: usize) -> ProtocolSpec {
    bypass_spec("none", modes, 0, vec![])
}

pub fn bypass_2scs(alpha: f64) -> Result<ProtocolSpec> {
    Ok(bypass_spec("bypass", 1, 1, encode_2scs(alpha, 0, 0)?))
}

pub fn bypass_sine_2scs(alpha: f64) -> Result<ProtocolSpec> {
    Ok(bypass_spec("bypass-sine", 1, 1, encode_sine_2scs(alpha, 0, 0)?))
}

pub fn bypass_4scs(alpha_r: f64, alpha_i: f64) -> Result<ProtocolSpec> {
    Ok(bypass_spec("bypass-4scs", 1, 2, encode_4scs(alpha_r, alpha_i, 0, 0, 1)?))
}

/// Independent single-mode bypasses on (mode 0, ancilla 0) and (mode 1, ancilla 1).
pub fn bypass_ecs(alpha: f64) -> Result<ProtocolSpec> {
    let mut g = encode_2scs(alpha, 0, 0)?;
    g.extend(encode_2scs(alpha, 1, 1)?);
    Ok(bypass_spec("bypass-ecs", 2, 2, g))
}

/// Apply the 2-SCS encoder to mode 0 / ancilla 0 of `state`.
pub fn bypass_encode_2scs(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&encode_2scs(alpha, 0, 0)?)
}

pub fn bypass_decode_2scs(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&Gate::adjoint_sequence(&encode_2scs(alpha, 0, 0)?))
}

/// Apply the 4-SCS encoder to mode 0 with ancillas 0 and 1.
pub fn bypass_encode_4scs(state: &HybridKet, alpha_r: f64, alpha_i: f64) -> Result<HybridKet> {
    state.apply_gates(&encode_4scs(alpha_r, alpha_i, 0, 0, 1)?)
}

pub fn bypass_decode_4scs(state: &HybridKet, alpha_r: f64, alpha_i: f64) -> Result<HybridKet> {
    state.apply_gates(&Gate::adjoint_sequence(&encode_4scs(alpha_r, alpha_i, 0, 0, 1)?))
}

pub fn bypass_encode_ecs(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&bypass_ecs(alpha)?.gates_pre)
}

pub fn bypass_decode_ecs(state: &HybridKet, alpha: f64) -> Result<HybridKet> {
    state.apply_gates(&bypass_ecs(alpha)?.gates_post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyad::{HybridComponent, HybridLayout};
    use crate::protocols::states::make_2scs;
    use crate::qubit::{y_eigenstate, Level};
    use num_complex::Complex64 as C64;

    #[test]
    fn specs_are_adjoint_paired() {
        for s in [bypass_2scs(2.0).unwrap(), bypass_4scs(2.0, 3.0).unwrap(), bypass_ecs(1.0).unwrap(), bypass_sine_2scs(4.0).unwrap()] {
            assert!(s.is_adjoint_paired(), "{}", s.name);
        }
        assert!(bypass_2scs(0.0).is_err());
        assert!(bypass_2scs(-1.0).is_err());
    }

    #[test]
    fn encoded_state_at_large_amplitude() {
        let (mu, nu) = (C64::new(0.6, 0.2), C64::new(-0.3, 0.7));
        let alpha = 6.0;
        let input = make_2scs(mu, nu, alpha).unwrap().with_leading_ancillas(&[Level::G]);
        let enc = bypass_encode_2scs(&input, alpha).unwrap();
        // target i(μ|−_i⟩ − ν|+_i⟩)|0⟩, normalization of the input cat ≈ 1/√(|μ|²+|ν|²)
        let (m, p) = (y_eigenstate(-1.0), y_eigenstate(1.0));
        let mut comps = Vec::new();
        for lvl in [Level::E, Level::G] {
            let c = (mu * m[lvl.index()] - nu * p[lvl.index()]) * C64::i();
            comps.push(HybridComponent::new(vec![lvl], vec![C64::from(0.0)], c));
        }
        let target = HybridKet::new(HybridLayout::new(1, 1), comps).unwrap();
        // the U_R momentum kick caps this near e^{−ε²/2}
        assert!(enc.fidelity(&target).unwrap() > 0.99);
        let back = bypass_decode_2scs(&enc, alpha).unwrap();
        assert!((back.fidelity(&input).unwrap() - 1.0).abs() < 1e-10);
    }
}
