//! Squeezing baseline: S(r) before the lossy channel, S(−r) after.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dyad::HybridKet;
use crate::error::{Error, Result};
use crate::fock::FockStateVector;
use crate::gate::Gate;

use super::{run_protocol_fock, Channels, FockOutput, ProtocolSpec, TraceOut};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParam {
    pub r: f64,
    /// False when the closed form was outside its domain and the numeric
    /// minimizer supplied `r`.
    pub closed_form: bool,
}

/// Squeeze every mode by `r` before loss; undo with S(−r) afterwards when
/// `recover` is set.
pub fn gaussian_spec(modes: usize, r: f64, recover: bool) -> Result<ProtocolSpec> {
    if !r.is_finite() {
        return Err(Error::ParameterOutOfRange("squeezing must be finite".into()));
    }
    let gates_pre: Vec<Gate> = (0..modes).map(|mode| Gate::Squeeze { mode, r }).collect();
    let gates_post = if recover { Gate::adjoint_sequence(&gates_pre) } else { vec![] };
    Ok(ProtocolSpec {
        name: if recover { "gaussian".into() } else { "gaussian-norecovery".into() },
        modes,
        ancillas: 0,
        gates_pre,
        measure_pre: vec![],
        channels: Channels { loss_modes: (0..modes).collect(), dephased_ancillas: vec![] },
        gates_post,
        measure_post: vec![],
        trace_out: TraceOut::default(),
    })
}

/// Run the recovered squeezing baseline on the Fock oracle.
pub fn gaussian_baseline(state: &FockStateVector, r: f64, eta: f64) -> Result<FockOutput> {
    run_protocol_fock(&gaussian_spec(state.layout.modes(), r, true)?, state, eta, 0.0)
}

/// (⟨n⟩, ⟨a²⟩) of one mode of a normalized ket.
pub fn moments(ket: &HybridKet, mode: usize) -> Result<(f64, C64)> {
    if mode >= ket.layout().modes {
        return Err(Error::IndexOutOfRange { index: mode, count: ket.layout().modes });
    }
    let (b, c) = (ket.basis(), ket.coefficients());
    let mut n = C64::from(0.0);
    let mut a2 = C64::from(0.0);
    for (j, bj) in b.iter().enumerate() {
        for (k, bk) in b.iter().enumerate() {
            let o = bj.overlap(bk);
            if o == C64::from(0.0) {
                continue;
            }
            let w = c[j].conj() * c[k] * o;
            let (g, be) = (bj.amps[mode], bk.amps[mode]);
            n += w * g.conj() * be;
            a2 += w * be * be;
        }
    }
    Ok((n.re, a2))
}

/// ⟨n⟩ after S(r): cosh2r⟨n⟩ + sinh²r − sinh2r·Re⟨a²⟩.
pub fn squeezed_photon_number(n: f64, a2: C64, r: f64) -> f64 {
    (2.0 * r).cosh() * n + r.sinh().powi(2) - (2.0 * r).sinh() * a2.re
}

/// Golden-section minimizer of [`squeezed_photon_number`] over r ∈ [−5, 5].
pub fn numeric_r_opt(n: f64, a2: C64) -> f64 {
    let f = |r: f64| squeezed_photon_number(n, a2, r);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-5.0f64, 5.0f64);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

fn real_log(z: C64) -> Option<f64> {
    if z.re > 0.0 && z.im.abs() <= 1e-12 * z.re.max(1.0) && z.re.is_finite() {
        Some(z.re.ln())
    } else {
        None
    }
}

/// Closed-form r_opt for μ|α⟩ + ν|−α⟩. The expression is exact once (μ, ν)
/// are scaled to |μ|² + |ν|² = 1, so they are scaled first.
pub fn r_opt_2scs(mu: C64, nu: C64, alpha: f64) -> Result<SqueezeParam> {
    let s = (mu.norm_sqr() + nu.norm_sqr()).sqrt();
    if !(s > 0.0) {
        return Err(Error::ZeroVector);
    }
    let (mu, nu) = (mu / s, nu / s);
    let a2 = alpha * alpha;
    let e = (2.0 * a2).exp();
    let mc = mu.conj();
    let den = mc * e + nu * mc * mc + mu * mu * nu;
    let first = C64::from(4.0 * e * a2) * mc / den + 1.0;
    let second = C64::from(1.0) - C64::from(4.0 * a2) * nu * (mc * mc + mu * mu) / den;
    if let (Some(l1), Some(l2)) = (real_log(first), real_log(second)) {
        let r = 0.25 * (l1 - l2);
        if r.is_finite() {
            return Ok(SqueezeParam { r, closed_form: true });
        }
    }
    log::warn!("r_opt closed form outside its domain (mu={mu}, nu={nu}, alpha={alpha}); using numeric minimizer");
    let ket = super::states::make_2scs(mu, nu, alpha)?;
    let (n, a2m) = moments(&ket, 0)?;
    Ok(SqueezeParam { r: numeric_r_opt(n, a2m), closed_form: false })
}

/// Closed-form r_opt for either ECS, applied to each mode.
pub fn r_opt_ecs(alpha: f64) -> Result<SqueezeParam> {
    let x = 2.0 * alpha * alpha;
    let coth = 1.0 / x.tanh();
    let (a, b) = (x + x * coth + 1.0, -x + x * coth + 1.0);
    if a > 0.0 && b > 0.0 && a.is_finite() {
        return Ok(SqueezeParam { r: 0.25 * (a.ln() - b.ln()), closed_form: true });
    }
    log::warn!("ECS r_opt closed form outside its domain at alpha={alpha}; using numeric minimizer");
    let ket = super::states::make_ecs(false, alpha)?;
    let (n, a2m) = moments(&ket, 0)?;
    Ok(SqueezeParam { r: numeric_r_opt(n, a2m), closed_form: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::states::{make_2scs, make_ecs};

    #[test]
    fn closed_form_matches_numeric_minimizer() {
        for &alpha in &[1.0, 2.0, 3.0] {
            let (mu, nu) = (C64::from(1.0), C64::from(1.0));
            let r = r_opt_2scs(mu, nu, alpha).unwrap();
            assert!(r.closed_form);
            let (n, a2) = moments(&make_2scs(mu, nu, alpha).unwrap(), 0).unwrap();
            assert!((r.r - numeric_r_opt(n, a2)).abs() < 1e-6, "alpha {alpha}");
        }
        let r = r_opt_2scs(C64::from(1.0), C64::from(0.0), 1.7).unwrap();
        assert!((r.r - 0.25 * (1.0 + 4.0 * 1.7f64 * 1.7).ln()).abs() < 1e-12);
    }

    #[test]
    fn ecs_closed_form() {
        let r = r_opt_ecs(2.0).unwrap();
        let c = 1.0 / 8f64.tanh();
        let expect = 0.25 * ((8.0 + 8.0 * c + 1.0).ln() - (-8.0 + 8.0 * c + 1.0).ln());
        assert!((r.r - expect).abs() < 1e-15);
        let (n, a2) = moments(&make_ecs(false, 2.0).unwrap(), 0).unwrap();
        assert!((r.r - numeric_r_opt(n, a2)).abs() < 1e-6);
    }

    #[test]
    fn local_minimum_in_photon_number() {
        let (mu, nu) = (C64::from(1.0), C64::from(1.0));
        let r = r_opt_2scs(mu, nu, 2.0).unwrap().r;
        let (n, a2) = moments(&make_2scs(mu, nu, 2.0).unwrap(), 0).unwrap();
        let f0 = squeezed_photon_number(n, a2, r);
        assert!(squeezed_photon_number(n, a2, r + 0.01) > f0);
        assert!(squeezed_photon_number(n, a2, r - 0.01) > f0);
    }
}
