//! Single-round correction of ancilla dephasing with two auxiliary
//! oscillators, a beam splitter and which-mode phonon detection.
//!
//! Layout: modes 0 and 1 are the auxiliary oscillators (both start in
//! vacuum), ancilla 0 is the protected qubit.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::dyad::{DyadDensity, HybridComponent, HybridKet, HybridLayout};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::qubit::{Axis, Level};

use super::{Arm, Channels, Measurement, Projector, ProtocolSpec, TraceOut};

/// exp[−i√2βσ_xP] on `mode`: the σ_x = ±1 branch is displaced by ±β.
fn coupling(beta: f64, mode: usize) -> Gate {
    Gate::rabi(0, Axis::X, mode, FRAC_PI_2, -SQRT_2 * beta)
}

/// Coupling to mode 0, dephasing, coupling to mode 1, beam splitter, then a
/// vacuum/non-vacuum test on mode 1. Each outcome is decoded under its own
/// error hypothesis: no flip undoes the gates directly; a σ_z flip is
/// corrected first, after which σ_z U₂ σ_z = U₂† means U₂ (not U₂†) undoes
/// the second coupling.
pub fn dephasing_qec_spec(beta: f64) -> Result<ProtocolSpec> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("coupling amplitude {beta} must be positive")));
    }
    let (u1, u2) = (coupling(beta, 0), coupling(beta, 1));
    let bs = Gate::BeamSplitter { mode_a: 0, mode_b: 1 };
    let z = Gate::QubitRotation { ancilla: 0, axis: Axis::Z, angle: FRAC_PI_2 };
    let readout = Measurement {
        arms: vec![
            Arm { projector: Projector::ModeVacuum { mode: 1 }, corrections: vec![bs.clone(), u2.adjoint(), u1.adjoint()] },
            Arm { projector: Projector::ModeOccupied { mode: 1 }, corrections: vec![bs.clone(), z, u2.clone(), u1.adjoint()] },
        ],
    };
    Ok(ProtocolSpec {
        name: "dephasing-qec".into(),
        modes: 2,
        ancillas: 0,
        gates_pre: vec![u1],
        measure_pre: vec![],
        channels: Channels { loss_modes: vec![], dephased_ancillas: vec![] },
        gates_post: vec![u2, bs],
        measure_post: vec![readout],
        trace_out: TraceOut { modes: vec![0, 1], ancillas: vec![] },
    })
}

/// Corrected qubit density and the outcome probabilities
/// [mode 1 empty, mode 1 occupied].
#[derive(Debug, Clone)]
pub struct QecOutcome {
    pub state: DyadDensity,
    pub syndrome_probs: [f64; 2],
}

fn with_vacua(qubit: &HybridKet) -> Result<HybridKet> {
    if qubit.layout() != HybridLayout::new(0, 1) {
        return Err(Error::LayoutMismatch("expected a single-qubit ket".into()));
    }
    let comps = qubit
        .components()
        .into_iter()
        .map(|c| HybridComponent::new(c.levels, vec![num_complex::Complex64::from(0.0); 2], c.coefficient))
        .collect();
    HybridKet::new(HybridLayout::new(2, 1), comps)?.normalized()
}

/// Run the scheme with dephasing p applied between the two couplings.
/// `inject_flip` replaces the channel by a definite σ_z.
pub fn dephasing_qec(qubit: &HybridKet, beta: f64, p: f64, inject_flip: bool) -> Result<QecOutcome> {
    let spec = dephasing_qec_spec(beta)?;
    let ket = with_vacua(qubit)?.apply_gates(&spec.gates_pre)?;
    let mut rho = ket.to_density();
    if inject_flip {
        rho = rho.apply_gate(&Gate::QubitRotation { ancilla: 0, axis: Axis::Z, angle: FRAC_PI_2 })?;
    } else {
        rho = crate::noise::apply_dephasing(&rho, &crate::noise::DephasingChannel::new(p, 0)?)?;
    }
    rho = rho.apply_gates(&spec.gates_post)?;
    let tr0 = rho.trace();
    let mut parts = Vec::new();
    let mut probs = [0.0; 2];
    for (i, arm) in spec.measure_post[0].arms.iter().enumerate() {
        let kept = super::project_dyad(&rho, &arm.projector)?;
        if kept.is_empty() {
            continue;
        }
        let fixed = kept.apply_gates(&arm.corrections)?.partial_trace(&[2])?;
        probs[i] = fixed.trace() / tr0;
        parts.push(fixed);
    }
    let state = DyadDensity::sum(&parts)?;
    let t = state.trace();
    Ok(QecOutcome { state: state.scaled(1.0 / t), syndrome_probs: probs })
}

/// Qubit ket from amplitudes on |e⟩ and |g⟩.
pub fn qubit_ket(e: num_complex::Complex64, g: num_complex::Complex64) -> Result<HybridKet> {
    HybridKet::new(
        HybridLayout::new(0, 1),
        vec![HybridComponent::new(vec![Level::E], vec![], e), HybridComponent::new(vec![Level::G], vec![], g)],
    )?
    .normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    #[test]
    fn no_error_round_trip() {
        let q = qubit_ket(C64::new(0.6, 0.1), C64::new(0.2, -0.7)).unwrap();
        let out = dephasing_qec(&q, 1.0, 0.0, false).unwrap();
        assert!((out.state.expectation_pure(&q).unwrap() - 1.0).abs() < 1e-9);
        assert!((out.syndrome_probs[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn definite_flip_is_flagged_and_corrected() {
        let beta = 1.5;
        let q = qubit_ket(C64::new(0.6, 0.1), C64::new(0.2, -0.7)).unwrap();
        let out = dephasing_qec(&q, beta, 0.0, true).unwrap();
        let ambiguity = (-2.0 * beta * beta).exp();
        assert!((out.syndrome_probs[1] - (1.0 - ambiguity)).abs() < 1e-9);
        let f = out.state.expectation_pure(&q).unwrap();
        assert!(f > 1.0 - ambiguity - 1e-9, "{f}");
    }

    #[test]
    fn error_floor_bound() {
        let (beta, p) = (1.0, 0.1);
        let q = qubit_ket(C64::new(0.3, 0.4), C64::new(0.5, -0.7)).unwrap();
        let out = dephasing_qec(&q, beta, p, false).unwrap();
        let f = out.state.expectation_pure(&q).unwrap();
        assert!(f > 1.0 - p * p / 2.0 - (-4.0 * beta * beta).exp(), "{f}");
    }
}
