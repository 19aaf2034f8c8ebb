//! Bosonic loss and qubit dephasing on both backends.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dyad::{BasisState, DyadDensity, HybridLayout};
use crate::error::{Error, Result};
use crate::fock::{FockMixture, FockOperator};

/// Kraus terms are added until every Fock level has kept this much weight.
pub const KRAUS_WEIGHT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    pub eta: f64,
    pub mode: usize,
}

impl LossChannel {
    pub fn new(eta: f64, mode: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::ParameterOutOfRange(format!("transmissivity {eta} outside [0, 1]")));
        }
        Ok(LossChannel { eta, mode })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingChannel {
    pub p: f64,
    pub ancilla: usize,
}

impl DephasingChannel {
    pub fn new(p: f64, ancilla: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ParameterOutOfRange(format!("dephasing {p} outside [0, 1]")));
        }
        Ok(DephasingChannel { p, ancilla })
    }
}

fn check_mode(layout: HybridLayout, m: usize) -> Result<()> {
    if m >= layout.modes {
        return Err(Error::IndexOutOfRange { index: m, count: layout.modes });
    }
    Ok(())
}

/// |β⟩⟨γ| ↦ exp[(1−η)(γ*β − |β|²/2 − |γ|²/2)] |√η β⟩⟨√η γ|.
pub fn apply_loss(rho: &DyadDensity, ch: &LossChannel) -> Result<DyadDensity> {
    let ch = LossChannel::new(ch.eta, ch.mode)?;
    check_mode(rho.layout(), ch.mode)?;
    if ch.eta == 1.0 {
        return Ok(rho.clone());
    }
    let m = ch.mode;
    let s = ch.eta.sqrt();
    let loss = 1.0 - ch.eta;
    rho.remap_with_factor(
        |b: &BasisState| {
            let mut nb = b.clone();
            nb.amps[m] *= s;
            nb
        },
        |bj: &BasisState, bk: &BasisState| {
            let (beta, gamma) = (bj.amps[m], bk.amps[m]);
            ((gamma.conj() * beta - 0.5 * beta.norm_sqr() - 0.5 * gamma.norm_sqr()) * loss).exp()
        },
    )
}

/// Dyads whose levels differ on the ancilla are scaled by 1 − p.
pub fn apply_dephasing(rho: &DyadDensity, ch: &DephasingChannel) -> Result<DyadDensity> {
    let ch = DephasingChannel::new(ch.p, ch.ancilla)?;
    let layout = rho.layout();
    if ch.ancilla >= layout.ancillas {
        return Err(Error::IndexOutOfRange { index: ch.ancilla, count: layout.ancillas });
    }
    let a = ch.ancilla;
    let n = rho.len();
    let mut c = rho.coefficients().clone();
    for j in 0..n {
        for k in 0..n {
            if rho.basis()[j].levels[a] != rho.basis()[k].levels[a] {
                c[(j, k)] *= 1.0 - ch.p;
            }
        }
    }
    DyadDensity::new(layout, rho.basis().to_vec(), c).map(|r| r.pruned(crate::dyad::COEFF_TOL))
}

/// Loss η on every mode and dephasing p on each listed ancilla.
pub fn apply_noise(rho: &DyadDensity, eta: f64, p: f64, ancillas: &[usize]) -> Result<DyadDensity> {
    let mut out = rho.clone();
    for m in 0..rho.layout().modes {
        out = apply_loss(&out, &LossChannel::new(eta, m)?)?;
    }
    for &a in ancillas {
        let ch = DephasingChannel::new(p, a)?;
        if p > 0.0 {
            out = apply_dephasing(&out, &ch)?;
        }
    }
    Ok(out)
}

/// The lossy 2-SCS written out directly: basis {|√ηα⟩, |−√ηα⟩}, diagonal
/// N²|μ|², N²|ν|², coherence N²μν*·e^{−2α²(1−η)}.
pub fn apply_loss_2scs_analytic(mu: C64, nu: C64, alpha: f64, eta: f64) -> Result<DyadDensity> {
    LossChannel::new(eta, 0)?;
    let norm2 = mu.norm_sqr() + nu.norm_sqr() + 2.0 * (mu.conj() * nu).re * (-2.0 * alpha * alpha).exp();
    if !(norm2 > 0.0) {
        return Err(Error::ZeroVector);
    }
    let n2 = 1.0 / norm2;
    let f = (-2.0 * alpha * alpha * (1.0 - eta)).exp();
    let a = C64::from(eta.sqrt() * alpha);
    let basis = vec![BasisState::new(vec![], vec![a]), BasisState::new(vec![], vec![-a])];
    let c = DMatrix::from_row_slice(
        2,
        2,
        &[mu.norm_sqr() * n2 * C64::from(1.0), mu * nu.conj() * (n2 * f), mu.conj() * nu * (n2 * f), nu.norm_sqr() * n2 * C64::from(1.0)],
    );
    DyadDensity::new(HybridLayout::new(1, 0), basis, c)
}

fn ln_binomial_weight(n: usize, l: usize, eta: f64) -> f64 {
    // ln[C(n,l) (1−η)^l η^{n−l}]
    let lgamma = |x: usize| -> f64 { (1..=x).map(|k| (k as f64).ln()).sum() };
    let mut w = lgamma(n) - lgamma(l) - lgamma(n - l);
    if l > 0 {
        w += l as f64 * (1.0 - eta).ln();
    }
    if n > l {
        w += (n - l) as f64 * eta.ln();
    }
    w
}

/// Kraus operators K_l = √((1−η)^l/l!) η^{n/2} a^l on a `dim`-level mode,
/// truncated once every level has retained at least [`KRAUS_WEIGHT`].
pub fn loss_kraus(dim: usize, eta: f64) -> Result<Vec<DMatrix<C64>>> {
    LossChannel::new(eta, 0)?;
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if eta == 1.0 {
        return Ok(vec![DMatrix::identity(dim, dim)]);
    }
    let mut out = Vec::new();
    let mut kept = vec![0.0; dim];
    for l in 0..dim {
        let mut k = DMatrix::<C64>::zeros(dim, dim);
        for n in l..dim {
            let w = if eta == 0.0 {
                if n == l { 1.0 } else { 0.0 }
            } else {
                ln_binomial_weight(n, l, eta).exp()
            };
            k[(n - l, n)] = C64::from(w.sqrt());
            kept[n] += w;
        }
        out.push(k);
        if kept.iter().all(|&w| w >= KRAUS_WEIGHT) {
            break;
        }
    }
    Ok(out)
}

/// Kraus pair √(1−p/2)·I, √(p/2)·σ_z.
pub fn dephasing_kraus(p: f64) -> Result<[DMatrix<C64>; 2]> {
    DephasingChannel::new(p, 0)?;
    let id = DMatrix::<C64>::identity(2, 2) * C64::from((1.0 - p / 2.0).sqrt());
    let mut z = DMatrix::<C64>::zeros(2, 2);
    z[(0, 0)] = C64::from((p / 2.0).sqrt());
    z[(1, 1)] = C64::from(-(p / 2.0).sqrt());
    Ok([id, z])
}

fn kraus_on_density(rho: &FockOperator, kraus: &[DMatrix<C64>], subs: &[usize]) -> Result<FockOperator> {
    let mut out = DMatrix::<C64>::zeros(rho.dim(), rho.dim());
    for k in kraus {
        let local = FockOperator::new(rho.layout.restrict(subs)?, k.clone())?;
        let e = local.embed(&rho.layout, subs)?;
        out += &e.entries * &rho.entries * e.entries.adjoint();
    }
    FockOperator::new(rho.layout.clone(), out)
}

pub fn apply_loss_fock(rho: &FockOperator, ch: &LossChannel) -> Result<FockOperator> {
    let sub = rho.layout.mode_subsystem(ch.mode)?;
    let kraus = loss_kraus(rho.layout.mode_dims()[ch.mode], ch.eta)?;
    kraus_on_density(rho, &kraus, &[sub])
}

pub fn apply_dephasing_fock(rho: &FockOperator, ch: &DephasingChannel) -> Result<FockOperator> {
    let sub = rho.layout.ancilla_subsystem(ch.ancilla)?;
    kraus_on_density(rho, &dephasing_kraus(ch.p)?, &[sub])
}

pub fn apply_loss_mixture(mix: &mut FockMixture, ch: &LossChannel) -> Result<()> {
    let sub = mix.layout.mode_subsystem(ch.mode)?;
    let kraus = loss_kraus(mix.layout.mode_dims()[ch.mode], ch.eta)?;
    if kraus.len() == 1 {
        return Ok(());
    }
    mix.apply_kraus(&kraus, &[sub])
}

pub fn apply_dephasing_mixture(mix: &mut FockMixture, ch: &DephasingChannel) -> Result<()> {
    let sub = mix.layout.ancilla_subsystem(ch.ancilla)?;
    if ch.p == 0.0 {
        return DephasingChannel::new(ch.p, ch.ancilla).map(|_| ());
    }
    mix.apply_kraus(&dephasing_kraus(ch.p)?, &[sub])
}

/// Fock counterpart of [`apply_noise`].
pub fn apply_noise_mixture(mix: &mut FockMixture, eta: f64, p: f64, ancillas: &[usize]) -> Result<()> {
    for m in 0..mix.layout.modes() {
        apply_loss_mixture(mix, &LossChannel::new(eta, m)?)?;
    }
    for &a in ancillas {
        apply_dephasing_mixture(mix, &DephasingChannel::new(p, a)?)?;
    }
    Ok(())
}
