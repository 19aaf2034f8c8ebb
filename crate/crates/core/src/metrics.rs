//! Figures of merit: fidelities, Wigner cross-sections and negative peaks,
//! logarithmic negativity, the vacuum-projection witness and decay fits.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dyad::{DyadDensity, HybridKet};
use crate::error::{Error, Result};
use crate::fock::{self, HilbertLayout};
use crate::protocols::{project_dyad, run_protocol, run_protocol_fock, Projector, ProtocolSpec};

/// Simulation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dyad,
    Fock,
}

/// ⟨ψ|ρ|ψ⟩ for normalized ψ.
pub fn fidelity_pure_mixed(psi: &HybridKet, rho: &DyadDensity) -> Result<f64> {
    if psi.layout() != rho.layout() {
        return Err(Error::LayoutMismatch("reference ket and density differ in layout".into()));
    }
    rho.expectation_pure(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFidelity {
    pub fidelity: f64,
    pub success_prob: f64,
}

/// Fock dimension per mode for running `spec` on inputs of amplitude α:
/// the decoder pushes an erroneous branch at 2α out to 3α, squeezing spreads
/// further. Two-SCS family only; deeper codes need their own reach.
pub fn fock_dim_for(spec: &ProtocolSpec, alpha: f64) -> usize {
    let reach = if spec.ancillas > 0 { 3.0 * alpha } else { alpha };
    let base = fock::adequate_dim(reach);
    if spec.uses_squeezing() {
        base + 30
    } else {
        base
    }
}

/// Run `spec` on `input` and return the fidelity of the output with `input`.
/// Extra ancillas of `input` (e.g. a reference qubit) are carried through
/// noiselessly. `dim` is the per-mode Fock cutoff (Fock backend only).
pub fn protocol_fidelity(
    spec: &ProtocolSpec,
    input: &HybridKet,
    eta: f64,
    p: f64,
    backend: Backend,
    dim: Option<usize>,
) -> Result<ProtocolFidelity> {
    match backend {
        Backend::Dyad => {
            let out = run_protocol(spec, input, eta, p)?;
            Ok(ProtocolFidelity { fidelity: fidelity_pure_mixed(input, &out.state)?, success_prob: out.success_prob })
        }
        Backend::Fock => {
            let l = input.layout();
            let dim = dim.ok_or_else(|| Error::Config("Fock backend needs a dimension".into()))?;
            let layout = HilbertLayout::new(vec![dim; l.modes], l.ancillas)?;
            let psi = input.to_fock(&layout)?;
            psi.check_truncation()?;
            let out = run_protocol_fock(spec, &psi, eta, p)?;
            Ok(ProtocolFidelity { fidelity: out.fidelity_with_pure(&psi)?, success_prob: out.success_prob })
        }
    }
}

/// Channel fidelity: the protocol acts on the mode of
/// 2^{−1/2}(|0_f⟩|α⟩ + |1_f⟩|−α⟩) while the reference qubit stays untouched.
pub fn channel_fidelity(spec: &ProtocolSpec, alpha: f64, eta: f64, p: f64) -> Result<ProtocolFidelity> {
    let v = crate::protocols::virtual_2scs(alpha)?;
    protocol_fidelity(spec, &v, eta, p, Backend::Dyad, None)
}

pub fn channel_fidelity_fock(spec: &ProtocolSpec, alpha: f64, eta: f64, p: f64, dim: usize) -> Result<ProtocolFidelity> {
    let v = crate::protocols::virtual_2scs(alpha)?;
    protocol_fidelity(spec, &v, eta, p, Backend::Fock, Some(dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

/// Phase-space point for quadrature value `q` on `axis` (X = √2 Re ζ,
/// P = √2 Im ζ).
pub fn phase_point(axis: Quadrature, q: f64) -> C64 {
    match axis {
        Quadrature::X => C64::new(q / SQRT_2, 0.0),
        Quadrature::P => C64::new(0.0, q / SQRT_2),
    }
}

/// Wigner function sampled along one quadrature axis through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub axis: Quadrature,
    pub start: f64,
    pub spacing: f64,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn wigner_cross_section(rho: &DyadDensity, mode: usize, axis: Quadrature, range: (f64, f64), spacing: f64) -> Result<WignerGrid> {
    if !(spacing > 0.0) || !(range.1 >= range.0) {
        return Err(Error::ParameterOutOfRange(format!("grid {range:?} with spacing {spacing}")));
    }
    let n = ((range.1 - range.0) / spacing + 1e-9).floor() as usize + 1;
    let coords: Vec<f64> = (0..n).map(|i| range.0 + i as f64 * spacing).collect();
    let values = coords.iter().map(|&q| rho.wigner(mode, phase_point(axis, q))).collect::<Result<Vec<_>>>()?;
    Ok(WignerGrid { axis, start: range.0, spacing, coords, values })
}

/// Square search window in the complex amplitude plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRegion {
    pub center: C64,
    pub half_width: f64,
    pub spacing: f64,
}

impl Default for SearchRegion {
    fn default() -> Self {
        SearchRegion { center: C64::new(0.0, 0.0), half_width: 0.5, spacing: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativePeak {
    pub location: C64,
    pub depth: f64,
}

impl NegativePeak {
    pub fn is_negative(&self) -> bool {
        self.depth < 0.0
    }
}

/// Refinement step at which the compass search stops.
pub const PEAK_POSITION_TOL: f64 = 1e-4;

/// Global minimum of W over the region's grid, refined by compass search.
pub fn negative_peak(rho: &DyadDensity, mode: usize, region: SearchRegion) -> Result<NegativePeak> {
    negative_peak_of(|z| rho.wigner(mode, z), region)
}

/// Same search on a single-mode Fock density.
pub fn negative_peak_fock(rho: &fock::FockOperator, region: SearchRegion) -> Result<NegativePeak> {
    negative_peak_of(|z| fock::wigner_displaced_parity(rho, z), region)
}

fn negative_peak_of(w: impl Fn(C64) -> Result<f64>, region: SearchRegion) -> Result<NegativePeak> {
    if !(region.spacing > 0.0) || !(region.half_width >= 0.0) {
        return Err(Error::ParameterOutOfRange("search region".into()));
    }
    let n = (region.half_width / region.spacing).round() as i64;
    let mut best = (region.center, w(region.center)?);
    for i in -n..=n {
        for j in -n..=n {
            let z = region.center + C64::new(i as f64, j as f64) * region.spacing;
            let v = w(z)?;
            if v < best.1 {
                best = (z, v);
            }
        }
    }
    let mut step = region.spacing / 2.0;
    while step >= PEAK_POSITION_TOL {
        let mut moved = false;
        for d in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)] {
            let z = best.0 + d * step;
            let v = w(z)?;
            if v < best.1 {
                best = (z, v);
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    Ok(NegativePeak { location: best.0, depth: best.1 })
}

/// ln ‖ρ^{T_side}‖₁.
pub fn log_negativity(rho: &DyadDensity, side: &[usize]) -> Result<f64> {
    let n = rho.layout().subsystem_count();
    if side.is_empty() || side.len() >= n || side.iter().any(|&s| s >= n) {
        return Err(Error::ParameterOutOfRange(format!("bipartition {side:?} of {n} subsystems")));
    }
    let ev = rho.partial_transpose(side)?.eigenvalues()?;
    let tn: f64 = ev.iter().map(|l| l.abs()).sum();
    Ok((tn / rho.trace()).ln())
}

/// Fock-oracle counterpart of [`log_negativity`].
pub fn log_negativity_fock(rho: &fock::FockOperator, side: &[usize]) -> Result<f64> {
    let ev = fock::partial_transpose(rho, side)?.hermitian_eigenvalues();
    let tn: f64 = ev.iter().map(|l| l.abs()).sum();
    Ok((tn / rho.trace().re).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub peak: NegativePeak,
    pub probability: f64,
}

/// Project `measured` onto vacuum, discard it, and locate the negative peak
/// of the remaining mode `target` (indices refer to `rho`'s modes).
pub fn vacuum_project_witness(rho: &DyadDensity, measured: usize, target: usize, region: SearchRegion) -> Result<WitnessResult> {
    let l = rho.layout();
    if measured == target || measured >= l.modes || target >= l.modes {
        return Err(Error::ParameterOutOfRange(format!("modes {measured}, {target} of {}", l.modes)));
    }
    let tr0 = rho.trace();
    let kept = project_dyad(rho, &Projector::ModeVacuum { mode: measured })?;
    let keep: Vec<usize> = (0..l.subsystem_count()).filter(|&s| s != measured).collect();
    let reduced = kept.partial_trace(&keep)?;
    let t = reduced.trace();
    if !(t > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let target = if target > measured { target - 1 } else { target };
    let peak = negative_peak(&reduced.scaled(1.0 / t), target, region)?;
    Ok(WitnessResult { peak, probability: t / tr0 })
}

/// Fock-oracle counterpart of [`vacuum_project_witness`] on a branch ensemble.
pub fn vacuum_project_witness_fock(mix: &fock::FockMixture, measured: usize, target: usize, region: SearchRegion) -> Result<WitnessResult> {
    let modes = mix.layout.modes();
    if measured == target || measured >= modes || target >= modes {
        return Err(Error::ParameterOutOfRange(format!("modes {measured}, {target} of {modes}")));
    }
    let tr0 = mix.trace();
    let d = mix.layout.mode_dims()[measured];
    let mut vac = nalgebra::DMatrix::<C64>::zeros(d, d);
    vac[(0, 0)] = C64::from(1.0);
    let mut kept = mix.clone();
    kept.project_local(&vac, &[measured])?;
    let t = kept.trace();
    if !(t > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let reduced = kept.reduced_density(&[target])?;
    let rho = fock::FockOperator::new(reduced.layout.clone(), reduced.entries / C64::from(t))?;
    Ok(WitnessResult { peak: negative_peak_fock(&rho, region)?, probability: t / tr0 })
}

/// Fitted model with its parameters, residual and sample abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub parameters: BTreeMap<String, f64>,
    pub residual_norm: f64,
    pub grid: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientSamples("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    Ok((intercept, slope, res))
}

/// Fit F(η) = F(1)·e^{−γ(1−η)} by least squares on ln F against 1−η.
pub fn fit_exponential_decay(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 4 {
        return Err(Error::InsufficientSamples(format!("{} samples, need at least 4", samples.len())));
    }
    if let Some(&(eta, f)) = samples.iter().find(|s| !(s.1 > 0.0)) {
        return Err(Error::ParameterOutOfRange(format!("non-positive fidelity {f} at eta {eta}")));
    }
    let xs: Vec<f64> = samples.iter().map(|s| 1.0 - s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (c, slope, res) = least_squares_line(&xs, &ys)?;
    Ok(FitResult {
        model: "exp-decay".into(),
        parameters: BTreeMap::from([("gamma".into(), -slope), ("prefactor".into(), c.exp())]),
        residual_norm: res,
        grid: samples.iter().map(|s| s.0).collect(),
    })
}

/// Fit y = intercept + slope·x.
pub fn fit_linear(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} samples, need at least 2", samples.len())));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (c, slope, res) = least_squares_line(&xs, &ys)?;
    Ok(FitResult {
        model: "linear".into(),
        parameters: BTreeMap::from([("intercept".into(), c), ("slope".into(), slope)]),
        residual_norm: res,
        grid: xs,
    })
}

/// Lower edge of the decay-fit window η ∈ [FIT_ETA_MIN, 1]. The decay law is
/// a small-loss expansion; wider windows bias γ by tens of percent.
pub const FIT_ETA_MIN: f64 = 0.99;

/// Default decay-fit samples: 11 uniform points over the fit window.
pub fn default_fit_etas() -> Vec<f64> {
    (0..11).map(|i| FIT_ETA_MIN + 0.001 * i as f64).collect()
}
