//! Operator identities behind gate synthesis, checked on the Fock oracle.
//!
//! Identities involving squeezing or products of non-commuting gates are
//! compared on a low-energy block (the first `n_sub` Fock levels) of a padded
//! space, since a truncated generator is only faithful away from the top
//! levels.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, PI, SQRT_2};

use crate::error::Result;
use crate::fock::{self, FockOperator};
use crate::qubit::{self, Axis};

/// Exact identity threshold.
pub const IDENTITY_TOL: f64 = 1e-8;

fn block_columns(m: &DMatrix<C64>, n_sub: usize, ground_only: bool) -> DMatrix<C64> {
    // mode ⊗ qubit ordering: index = 2n + q, q = 1 is |g⟩
    let cols: Vec<usize> = (0..n_sub)
        .flat_map(|n| if ground_only { vec![2 * n + 1] } else { vec![2 * n, 2 * n + 1] })
        .collect();
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// ‖(A − e^{iφ}B)P‖ with P the block projector and φ the best global phase.
fn block_distance(a: &FockOperator, b: &FockOperator, n_sub: usize, ground_only: bool, fit_phase: bool) -> f64 {
    let ap = block_columns(&a.entries, n_sub, ground_only);
    let bp = block_columns(&b.entries, n_sub, ground_only);
    let phase = if fit_phase {
        let t: C64 = (bp.adjoint() * &ap).trace();
        if t.norm() > 0.0 { t / t.norm() } else { C64::from(1.0) }
    } else {
        C64::from(1.0)
    };
    spectral_norm(&(ap - bp * phase))
}

fn rabi_local(dim: usize, axis: Axis, phi: f64, strength: f64) -> Result<FockOperator> {
    fock::unitary_from_hamiltonian(&fock::rabi_hamiltonian(dim, axis, phi)?, strength)
}

fn on_mode(op: &FockOperator) -> FockOperator {
    fock::tensor(op, &FockOperator::identity(fock::pauli(Axis::Z).layout))
}

/// S[r] exp[iTσ_xX] S[−r] against exp[iT e^{2r} σ_xX]. Here S[r] scales X by
/// e^{2r}, i.e. S[r] = exp[r(a² − a†²)], which is the crate's S(2r).
pub fn squeeze_sandwich_distance(r: f64, t: f64, n_sub: usize) -> Result<f64> {
    let dim = padded_dim(n_sub, 2.0 * r.abs());
    let s = on_mode(&fock::squeeze(dim, 2.0 * r)?);
    let sm = on_mode(&fock::squeeze(dim, -2.0 * r)?);
    let lhs = s.compose(&rabi_local(dim, Axis::X, 0.0, t)?)?.compose(&sm)?;
    let rhs = rabi_local(dim, Axis::X, 0.0, t * (2.0 * r).exp())?;
    Ok(block_distance(&lhs, &rhs, n_sub, false, false))
}

/// Max-abs difference between exp[iκ(σ₊a + σ₋a†)] and
/// exp[i2^{−1/2}κ(σ_xX − σ_yP)] on a `dim`-level mode.
pub fn jc_decomposition_distance(kappa: f64, dim: usize) -> Result<f64> {
    let jc = fock::jc_unitary_local(kappa, dim)?;
    let hx = fock::rabi_hamiltonian(dim, Axis::X, 0.0)?;
    let hy = fock::rabi_hamiltonian(dim, Axis::Y, PI / 2.0)?;
    let h = FockOperator::new(hx.layout.clone(), (&hx.entries - &hy.entries) * C64::from(FRAC_1_SQRT_2))?;
    let rabi = fock::unitary_from_hamiltonian(&h, kappa)?;
    Ok(jc.max_abs_diff(&rabi))
}

/// exp[iτσ_xX] exp[iτσ_yP] exp[−iτσ_xX] exp[−iτσ_yP] against
/// exp[−iτ²σ_z(XP + PX)] exp[iτ²σ_z], on the ancilla-|g⟩ block and up to a
/// global phase (on |g⟩ the σ_z factor is itself a global phase).
pub fn synthetic_squeezing_residual(tau: f64, n_sub: usize) -> Result<f64> {
    let dim = padded_dim(n_sub, 4.0 * tau);
    let ux = rabi_local(dim, Axis::X, 0.0, tau)?;
    let uy = rabi_local(dim, Axis::Y, PI / 2.0, tau)?;
    let prod = ux.compose(&uy)?.compose(&ux.adjoint())?.compose(&uy.adjoint())?;
    let x = fock::position(dim)?;
    let p = fock::momentum(dim)?;
    let xp = &x.entries * &p.entries;
    let sym = FockOperator::new(x.layout.clone(), &xp + xp.adjoint())?;
    let gen = fock::tensor(&sym, &fock::pauli(Axis::Z));
    let sq = fock::unitary_from_hamiltonian(&gen, -tau * tau)?;
    let zph = on_qubit(dim, fock::qubit_operator(qubit::rotation(Axis::Z, tau * tau)));
    let rhs = sq.compose(&zph)?;
    Ok(block_distance(&prod, &rhs, n_sub, true, true))
}

fn on_qubit(dim: usize, q: FockOperator) -> FockOperator {
    fock::tensor(&FockOperator::identity(fock::HilbertLayout::single_mode(dim).expect("dim ≥ 2")), &q)
}

/// Spectral-norm distance between the five-gate sine-Rabi product and
/// exp[i2t₂σ_x sin(2t₁X)] on a `dim`-level mode, t₁ = π/(4√2α), t₂ = −π/8.
pub fn sine_rabi_operator_distance(alpha: f64, dim: usize) -> Result<f64> {
    let t1 = PI / (4.0 * SQRT_2 * alpha);
    let t2 = -FRAC_PI_8;
    let ry = |s: f64| rabi_local(dim, Axis::Y, 0.0, s);
    let rz = |s: f64| on_qubit(dim, fock::qubit_operator(qubit::rotation(Axis::Z, s)));
    let prod = ry(-t1)?.compose(&rz(t2))?.compose(&ry(2.0 * t1)?)?.compose(&rz(-t2))?.compose(&ry(-t1)?)?;
    // exp[i2t₂σ_x sin(2t₁X)] through the eigenbasis of X
    let x = fock::position(dim)?;
    let eig = nalgebra::SymmetricEigen::new(x.entries.clone());
    let s = DMatrix::from_fn(dim, dim, |r, c| if r == c { C64::from((2.0 * t1 * eig.eigenvalues[r]).sin()) } else { C64::from(0.0) });
    let sin_x = FockOperator::new(x.layout.clone(), &eig.eigenvectors * s * eig.eigenvectors.adjoint())?;
    let gen = fock::tensor(&sin_x, &fock::pauli(Axis::X));
    let target = fock::unitary_from_hamiltonian(&gen, 2.0 * t2)?;
    Ok(prod.distance(&target))
}

fn padded_dim(n_sub: usize, r: f64) -> usize {
    // squeezing by r spreads level n to roughly cosh(2r)·n photons
    let spread = (2.0 * r).cosh();
    ((n_sub as f64 * spread * 4.0) as usize + 80).max(2 * n_sub)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub jc_distance: f64,
    pub sandwich_distance: f64,
    pub sandwich_identity_at_zero: f64,
    pub synthetic_residual_coarse: f64,
    pub synthetic_residual_fine: f64,
    pub sine_rabi_distance: f64,
}

impl SynthesisReport {
    pub fn synthetic_ratio(&self) -> f64 {
        self.synthetic_residual_coarse / self.synthetic_residual_fine
    }

    pub fn passed(&self) -> bool {
        self.jc_distance < IDENTITY_TOL
            && self.sandwich_distance < IDENTITY_TOL
            && self.sandwich_identity_at_zero < IDENTITY_TOL
            && self.synthetic_residual_coarse < 1e-2
            && self.synthetic_ratio() >= 8.0
    }
}

/// Fock cutoff of the sine-Rabi operator check at α = 2.
pub const SINE_CHECK_DIM: usize = 60;

/// Low-energy block used by the default checks.
pub const CHECK_BLOCK: usize = 10;

pub fn gate_synthesis_checks() -> Result<SynthesisReport> {
    gate_synthesis_checks_at(2.0)
}

/// The same checks with the sine-Rabi comparison at amplitude `alpha`.
pub fn gate_synthesis_checks_at(alpha: f64) -> Result<SynthesisReport> {
    Ok(SynthesisReport {
        jc_distance: jc_decomposition_distance(0.3, 20)?,
        sandwich_distance: squeeze_sandwich_distance(0.4, 0.2, CHECK_BLOCK)?,
        sandwich_identity_at_zero: squeeze_sandwich_distance(0.0, 0.2, CHECK_BLOCK)?,
        synthetic_residual_coarse: synthetic_squeezing_residual(0.1, CHECK_BLOCK)?,
        synthetic_residual_fine: synthetic_squeezing_residual(0.05, CHECK_BLOCK)?,
        sine_rabi_distance: sine_rabi_operator_distance(alpha, SINE_CHECK_DIM.max(fock::adequate_dim(2.0 * alpha)))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report() {
        let r = gate_synthesis_checks().unwrap();
        eprintln!("{r:?} ratio {}", r.synthetic_ratio());
        assert!(r.jc_distance < IDENTITY_TOL);
        assert!(r.sandwich_identity_at_zero < IDENTITY_TOL);
    }
}
