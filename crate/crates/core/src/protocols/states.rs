//! Input states.

use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::dyad::{HybridComponent, HybridKet, HybridLayout};
use crate::error::{Error, Result};
use crate::qubit::Level;

fn coherent_sum(terms: &[(C64, C64)]) -> Result<HybridKet> {
    if terms.iter().all(|(c, _)| c.norm() == 0.0) {
        return Err(Error::ZeroVector);
    }
    let comps = terms.iter().map(|&(c, a)| HybridComponent::new(vec![], vec![a], c)).collect();
    HybridKet::new(HybridLayout::new(1, 0), comps)?.normalized()
}

/// N(μ|α⟩ + ν|−α⟩).
pub fn make_2scs(mu: C64, nu: C64, alpha: f64) -> Result<HybridKet> {
    let a = C64::from(alpha);
    coherent_sum(&[(mu, a), (nu, -a)])
}

/// N(μ₁|α⟩ + μ₂|α*⟩ + μ₃|−α⟩ + μ₄|−α*⟩).
pub fn make_4scs(mu: [C64; 4], alpha: C64) -> Result<HybridKet> {
    coherent_sum(&[(mu[0], alpha), (mu[1], alpha.conj()), (mu[2], -alpha), (mu[3], -alpha.conj())])
}

/// N±(|α⟩|α⟩ ± |−α⟩|−α⟩).
pub fn make_ecs(plus: bool, alpha: f64) -> Result<HybridKet> {
    let a = C64::from(alpha);
    let s = if plus { 1.0 } else { -1.0 };
    HybridKet::new(
        HybridLayout::new(2, 0),
        vec![
            HybridComponent::new(vec![], vec![a, a], C64::from(1.0)),
            HybridComponent::new(vec![], vec![-a, -a], C64::from(s)),
        ],
    )?
    .normalized()
}

/// 2^{−1/2}(|0_f⟩|α⟩ + |1_f⟩|−α⟩) with the reference qubit as one extra
/// ancilla; |0_f⟩ is stored as level e and |1_f⟩ as level g.
pub fn virtual_2scs(alpha: f64) -> Result<HybridKet> {
    let a = C64::from(alpha);
    HybridKet::new(
        HybridLayout::new(1, 1),
        vec![
            HybridComponent::new(vec![Level::E], vec![a], C64::from(FRAC_1_SQRT_2)),
            HybridComponent::new(vec![Level::G], vec![-a], C64::from(FRAC_1_SQRT_2)),
        ],
    )
}

/// Virtual state for a one-mode input spanned by two kets |A⟩, |B⟩ that
/// need not be orthogonal: 2^{−1/2}(|0_f⟩|A⟩ + |1_f⟩|B⟩), normalized.
pub fn virtual_pair(a: &HybridKet, b: &HybridKet) -> Result<HybridKet> {
    let mut comps = Vec::new();
    for (ket, level) in [(a, Level::E), (b, Level::G)] {
        let k = ket.normalized()?;
        for c in k.components() {
            let mut levels = c.levels.clone();
            levels.push(level);
            comps.push(HybridComponent::new(levels, c.amplitudes, c.coefficient * FRAC_1_SQRT_2));
        }
    }
    let layout = HybridLayout::new(a.layout().modes, a.layout().ancillas + 1);
    HybridKet::new(layout, comps)?.normalized()
}
