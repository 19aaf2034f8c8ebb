//! Measurement-assisted variants: oscillator detection after encoding and
//! ancilla post-selection after decoding.

use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_PI_2;

use crate::dyad::{DyadDensity, HybridComponent, HybridKet, HybridLayout};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::qubit::{y_eigenstate, Axis, Level};

use super::{bypass_2scs, project_dyad, Arm, Measurement, ProtocolSpec, Projector};

/// Qubit state i(μ|−_i⟩ − ν|+_i⟩) left on the ancilla by an ideal encode,
/// normalized.
pub fn encoded_qubit_target(mu: C64, nu: C64) -> Result<HybridKet> {
    let (m, p) = (y_eigenstate(-1.0), y_eigenstate(1.0));
    let comps = [Level::E, Level::G]
        .iter()
        .map(|&l| HybridComponent::new(vec![l], vec![], (mu * m[l.index()] - nu * p[l.index()]) * C64::i()))
        .collect();
    HybridKet::new(HybridLayout::new(0, 1), comps)?.normalized()
}

fn drop_mode(rho: &DyadDensity, mode: usize) -> Result<DyadDensity> {
    let l = rho.layout();
    let keep: Vec<usize> = (0..l.subsystem_count()).filter(|&s| s != mode).collect();
    rho.partial_trace(&keep)
}

/// Project `mode` onto |0⟩, discard it, renormalize. Returns the remaining
/// state and the detection probability.
pub fn conditional_vacuum_filter(rho: &DyadDensity, mode: usize) -> Result<(DyadDensity, f64)> {
    let tr0 = rho.trace();
    let kept = project_dyad(rho, &Projector::ModeVacuum { mode })?;
    let out = drop_mode(&kept, mode)?;
    let prob = out.trace() / tr0;
    if !(prob > 0.0) {
        return Err(Error::ZeroProbability);
    }
    Ok((out.scaled(1.0 / out.trace()), prob))
}

/// Outcome arms for the three-way oscillator readout on `mode`: vacuum keeps
/// the ancilla as is, even non-vacuum gets σ_z, odd gets σ_x.
pub fn parity_arms(mode: usize, ancilla: usize) -> Measurement {
    Measurement {
        arms: vec![
            Arm { projector: Projector::ModeVacuum { mode }, corrections: vec![] },
            Arm {
                projector: Projector::ModeOccupiedParity { mode, even: true },
                corrections: vec![Gate::QubitRotation { ancilla, axis: Axis::Z, angle: FRAC_PI_2 }],
            },
            Arm {
                projector: Projector::ModeOccupiedParity { mode, even: false },
                corrections: vec![Gate::QubitRotation { ancilla, axis: Axis::X, angle: FRAC_PI_2 }],
            },
        ],
    }
}

/// Per-outcome results of [`parity_corrected_filter`].
#[derive(Debug, Clone)]
pub struct ParityBranches {
    /// Corrected, normalized state for vacuum / even / odd outcomes (None
    /// when the outcome has zero probability).
    pub branches: [Option<DyadDensity>; 3],
    pub probabilities: [f64; 3],
    /// Deterministic ensemble over all outcomes, trace 1.
    pub ensemble: DyadDensity,
}

/// Read out `mode` (vacuum / even / odd), correct `ancilla`, discard the mode.
pub fn parity_corrected_filter(rho: &DyadDensity, mode: usize, ancilla: usize) -> Result<ParityBranches> {
    let tr0 = rho.trace();
    let arms = parity_arms(mode, ancilla).arms;
    let mut branches: [Option<DyadDensity>; 3] = [None, None, None];
    let mut probabilities = [0.0; 3];
    let mut parts = Vec::new();
    for (i, arm) in arms.iter().enumerate() {
        let kept = project_dyad(rho, &arm.projector)?;
        if kept.is_empty() {
            continue;
        }
        let corrected = drop_mode(&kept.apply_gates(&arm.corrections)?, mode)?;
        let w = corrected.trace();
        probabilities[i] = w / tr0;
        if w > 0.0 {
            branches[i] = Some(corrected.scaled(1.0 / w));
        }
        parts.push(corrected);
    }
    let ensemble = DyadDensity::sum(&parts)?;
    let t = ensemble.trace();
    Ok(ParityBranches { branches, probabilities, ensemble: ensemble.scaled(1.0 / t) })
}

/// 2-SCS bypass with the ancilla post-selected on |g⟩ after decoding.
pub fn bypass_filtered(alpha: f64) -> Result<ProtocolSpec> {
    Ok(bypass_2scs(alpha)?.with_ancilla_filter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::bypass::bypass_encode_2scs;
    use crate::protocols::states::make_2scs;

    fn encoded(mu: C64, nu: C64, alpha: f64) -> DyadDensity {
        let input = make_2scs(mu, nu, alpha).unwrap().with_leading_ancillas(&[Level::G]);
        bypass_encode_2scs(&input, alpha).unwrap().to_density()
    }

    #[test]
    fn vacuum_filter_success_at_large_amplitude() {
        let (mu, nu) = (C64::from(1.0), C64::new(0.3, 0.5));
        let (q, prob) = conditional_vacuum_filter(&encoded(mu, nu, 6.0), 0).unwrap();
        assert!(prob > 0.99);
        let target = encoded_qubit_target(mu, nu).unwrap();
        assert!(q.expectation_pure(&target).unwrap() > 0.99);
    }

    #[test]
    fn single_branch_input() {
        let (q, _) = conditional_vacuum_filter(&encoded(C64::from(1.0), C64::from(0.0), 3.0), 0).unwrap();
        let target = encoded_qubit_target(C64::from(1.0), C64::from(0.0)).unwrap();
        assert!(q.expectation_pure(&target).unwrap() > 0.999);
    }

    #[test]
    fn parity_branches_are_corrected() {
        let (mu, nu) = (C64::new(0.8, 0.0), C64::new(0.2, -0.55));
        let out = parity_corrected_filter(&encoded(mu, nu, 4.0), 0, 0).unwrap();
        let target = encoded_qubit_target(mu, nu).unwrap();
        for (i, b) in out.branches.iter().enumerate() {
            let f = b.as_ref().unwrap().expectation_pure(&target).unwrap();
            assert!(f > 0.98, "branch {i}: {f}");
        }
        assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
