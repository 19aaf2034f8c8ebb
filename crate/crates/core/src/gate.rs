//! Gate vocabulary shared by the dyad engine, the Fock oracle and `ProtocolSpec`.

use serde::{Deserialize, Serialize};

use crate::qubit::Axis;

/// One unitary step of a protocol pipeline.
///
/// `Rabi` is exp[i·strength·σ_axis ⊗ X_Φ] with X_Φ = (a e^{−iΦ} + a† e^{iΦ})/√2,
/// which acts as the qubit-controlled displacement D(±i·strength·e^{iΦ}/√2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    Rabi {
        ancilla: usize,
        axis: Axis,
        mode: usize,
        #[serde(default)]
        quad_angle: f64,
        strength: f64,
    },
    /// D(δ) = exp(δ a† − conj(δ) a).
    Displace { mode: usize, re: f64, im: f64 },
    /// exp(i·angle·σ_axis).
    QubitRotation { ancilla: usize, axis: Axis, angle: f64 },
    /// exp(i·angle·n̂): |β⟩ ↦ |β e^{i·angle}⟩.
    PhaseRotation { mode: usize, angle: f64 },
    /// 50:50 beam splitter, (β₁, β₂) ↦ ((β₁+β₂)/√2, (β₁−β₂)/√2). Self-inverse.
    BeamSplitter { mode_a: usize, mode_b: usize },
    /// S(r) = exp[(r/2)(a² − a†²)]. Fock backend only.
    Squeeze { mode: usize, r: f64 },
}

impl Gate {
    pub fn rabi(ancilla: usize, axis: Axis, mode: usize, quad_angle: f64, strength: f64) -> Self {
        Gate::Rabi { ancilla, axis, mode, quad_angle, strength }
    }

    pub fn adjoint(&self) -> Gate {
        match *self {
            Gate::Rabi { ancilla, axis, mode, quad_angle, strength } => {
                Gate::Rabi { ancilla, axis, mode, quad_angle, strength: -strength }
            }
            Gate::Displace { mode, re, im } => Gate::Displace { mode, re: -re, im: -im },
            Gate::QubitRotation { ancilla, axis, angle } => {
                Gate::QubitRotation { ancilla, axis, angle: -angle }
            }
            Gate::PhaseRotation { mode, angle } => Gate::PhaseRotation { mode, angle: -angle },
            Gate::BeamSplitter { mode_a, mode_b } => Gate::BeamSplitter { mode_a, mode_b },
            Gate::Squeeze { mode, r } => Gate::Squeeze { mode, r: -r },
        }
    }

    /// Adjoint of a gate sequence: reversed order, each gate inverted.
    pub fn adjoint_sequence(gates: &[Gate]) -> Vec<Gate> {
        gates.iter().rev().map(Gate::adjoint).collect()
    }

    pub fn modes(&self) -> Vec<usize> {
        match *self {
            Gate::Rabi { mode, .. }
            | Gate::Displace { mode, .. }
            | Gate::PhaseRotation { mode, .. }
            | Gate::Squeeze { mode, .. } => vec![mode],
            Gate::BeamSplitter { mode_a, mode_b } => vec![mode_a, mode_b],
            Gate::QubitRotation { .. } => vec![],
        }
    }

    pub fn ancillas(&self) -> Vec<usize> {
        match *self {
            Gate::Rabi { ancilla, .. } | Gate::QubitRotation { ancilla, .. } => vec![ancilla],
            _ => vec![],
        }
    }
}
