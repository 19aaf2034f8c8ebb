//! Protection pipelines and the runner that executes them on either backend.
//!
//! A pipeline is: ancillas prepared in |g⟩, `gates_pre`, measurements, loss on
//! the listed modes and dephasing on the listed ancillas, `gates_post`,
//! measurements, then a partial trace.

pub mod bypass;
pub mod conditional;
pub mod dephasing_qec;
pub mod gaussian;
pub mod general_scs;
pub mod states;
pub mod synthesis;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dyad::{coherent_overlap, BasisState, DyadDensity, HybridKet};
use crate::error::{Error, Result};
use crate::fock::{self, FockMixture, FockStateVector, HilbertLayout};
use crate::gate::Gate;
use crate::noise;
use crate::qubit::Level;

pub use bypass::{bypass_2scs, bypass_4scs, bypass_ecs, bypass_sine_2scs, unprotected};
pub use gaussian::{gaussian_baseline, r_opt_2scs, r_opt_ecs, SqueezeParam};
pub use states::{make_2scs, make_4scs, make_ecs, virtual_2scs};

/// A measurement outcome as a projector on one subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projector {
    AncillaLevel { ancilla: usize, level: Level },
    ModeVacuum { mode: usize },
    /// I − |0⟩⟨0|.
    ModeOccupied { mode: usize },
    /// (I ± Π)/2.
    ModeParity { mode: usize, even: bool },
    /// (I ± Π)/2 − |0⟩⟨0| for even, (I − Π)/2 for odd.
    ModeOccupiedParity { mode: usize, even: bool },
}

/// One kept outcome and the correction applied on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub projector: Projector,
    #[serde(default)]
    pub corrections: Vec<Gate>,
}

/// Outcomes not listed among the arms are discarded; the kept weight is the
/// success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub arms: Vec<Arm>,
}

impl Measurement {
    pub fn postselect(projector: Projector) -> Self {
        Measurement { arms: vec![Arm { projector, corrections: vec![] }] }
    }
}

/// Which subsystems the noise acts on. Indices refer to the protocol's own
/// modes and physical ancillas.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Channels {
    pub loss_modes: Vec<usize>,
    pub dephased_ancillas: Vec<usize>,
}

/// Subsystems discarded at the end, by kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceOut {
    #[serde(default)]
    pub modes: Vec<usize>,
    #[serde(default)]
    pub ancillas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: String,
    pub modes: usize,
    /// Physical ancillas, prepared in |g⟩ and placed before any ancillas the
    /// input already carries.
    pub ancillas: usize,
    #[serde(default)]
    pub gates_pre: Vec<Gate>,
    /// Measurements after `gates_pre`, applied in order.
    #[serde(default)]
    pub measure_pre: Vec<Measurement>,
    pub channels: Channels,
    #[serde(default)]
    pub gates_post: Vec<Gate>,
    /// Measurements after `gates_post`, applied in order.
    #[serde(default)]
    pub measure_post: Vec<Measurement>,
    #[serde(default)]
    pub trace_out: TraceOut,
}

impl ProtocolSpec {
    /// True when `gates_post` undoes `gates_pre` gate by gate.
    pub fn is_adjoint_paired(&self) -> bool {
        self.gates_post == Gate::adjoint_sequence(&self.gates_pre)
    }

    pub fn uses_squeezing(&self) -> bool {
        self.gates_pre.iter().chain(&self.gates_post).any(|g| matches!(g, Gate::Squeeze { .. }))
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    /// Add a post-selection on every physical ancilla returning to |g⟩.
    pub fn with_ancilla_filter(mut self) -> Self {
        for a in 0..self.ancillas {
            self.measure_post.push(Measurement::postselect(Projector::AncillaLevel { ancilla: a, level: Level::G }));
        }
        self.name.push_str("-filtered");
        self
    }

    fn check(&self, input_modes: usize) -> Result<()> {
        if input_modes != self.modes {
            return Err(Error::LayoutMismatch(format!(
                "protocol '{}' expects {} modes, input has {}",
                self.name, self.modes, input_modes
            )));
        }
        Ok(())
    }
}

/// Normalized output state and the probability of the kept outcomes.
#[derive(Debug, Clone)]
pub struct DyadOutput {
    pub state: DyadDensity,
    pub success_prob: f64,
}

fn projector_images(pr: &Projector, s: &BasisState) -> Vec<(BasisState, C64)> {
    let vac = |s: &BasisState, m: usize| -> (BasisState, C64) {
        let mut ns = s.clone();
        let w = coherent_overlap(C64::from(0.0), s.amps[m]);
        ns.amps[m] = C64::from(0.0);
        (ns, w)
    };
    let flip = |s: &BasisState, m: usize| -> BasisState {
        let mut ns = s.clone();
        ns.amps[m] = -ns.amps[m];
        ns
    };
    match *pr {
        Projector::AncillaLevel { ancilla, level } => {
            if s.levels[ancilla] == level {
                vec![(s.clone(), C64::from(1.0))]
            } else {
                vec![]
            }
        }
        Projector::ModeVacuum { mode } => vec![vac(s, mode)],
        Projector::ModeOccupied { mode } => {
            let (v, w) = vac(s, mode);
            vec![(s.clone(), C64::from(1.0)), (v, -w)]
        }
        Projector::ModeParity { mode, even } => {
            let sg = if even { 0.5 } else { -0.5 };
            vec![(s.clone(), C64::from(0.5)), (flip(s, mode), C64::from(sg))]
        }
        Projector::ModeOccupiedParity { mode, even } => {
            let sg = if even { 0.5 } else { -0.5 };
            let mut out = vec![(s.clone(), C64::from(0.5)), (flip(s, mode), C64::from(sg))];
            if even {
                let (v, w) = vac(s, mode);
                out.push((v, -w));
            }
            out
        }
    }
}

fn check_projector(pr: &Projector, modes: usize, ancillas: usize) -> Result<()> {
    let (idx, count) = match *pr {
        Projector::AncillaLevel { ancilla, .. } => (ancilla, ancillas),
        Projector::ModeVacuum { mode }
        | Projector::ModeOccupied { mode }
        | Projector::ModeParity { mode, .. }
        | Projector::ModeOccupiedParity { mode, .. } => (mode, modes),
    };
    if idx >= count {
        return Err(Error::IndexOutOfRange { index: idx, count });
    }
    Ok(())
}

/// P ρ P for a projector on the dyad backend.
pub fn project_dyad(rho: &DyadDensity, pr: &Projector) -> Result<DyadDensity> {
    let l = rho.layout();
    check_projector(pr, l.modes, l.ancillas)?;
    rho.map_basis(|s| Ok(projector_images(pr, s)))
}

fn measure_dyad(rho: &DyadDensity, m: &Measurement) -> Result<DyadDensity> {
    let mut parts = Vec::with_capacity(m.arms.len());
    for arm in &m.arms {
        let kept = project_dyad(rho, &arm.projector)?;
        if kept.is_empty() {
            continue;
        }
        parts.push(kept.apply_gates(&arm.corrections)?);
    }
    if parts.is_empty() {
        return Err(Error::ZeroProbability);
    }
    DyadDensity::sum(&parts)
}

/// Run `spec` on the dyad backend. `input` holds the protocol's modes and
/// any extra (noiseless) ancillas; physical ancillas are prepended in |g⟩.
pub fn run_protocol(spec: &ProtocolSpec, input: &HybridKet, eta: f64, p: f64) -> Result<DyadOutput> {
    spec.check(input.layout().modes)?;
    let extra = input.layout().ancillas;
    let ket = input.with_leading_ancillas(&vec![Level::G; spec.ancillas]).apply_gates(&spec.gates_pre)?;
    let mut rho = ket.to_density();
    let start = rho.trace();
    for m in &spec.measure_pre {
        rho = measure_dyad(&rho, m)?;
    }
    for &m in &spec.channels.loss_modes {
        rho = noise::apply_loss(&rho, &noise::LossChannel::new(eta, m)?)?;
    }
    for &a in &spec.channels.dephased_ancillas {
        if a >= spec.ancillas {
            return Err(Error::IndexOutOfRange { index: a, count: spec.ancillas });
        }
        let ch = noise::DephasingChannel::new(p, a)?;
        if p > 0.0 {
            rho = noise::apply_dephasing(&rho, &ch)?;
        }
    }
    rho = rho.apply_gates(&spec.gates_post)?;
    for m in &spec.measure_post {
        rho = measure_dyad(&rho, m)?;
    }
    let keep = kept_subsystems(spec, extra)?;
    let rho = rho.partial_trace(&keep)?;
    let tr = rho.trace();
    if !(tr > 0.0) {
        return Err(Error::ZeroProbability);
    }
    Ok(DyadOutput { state: rho.scaled(1.0 / tr), success_prob: tr / start })
}

/// Unified subsystem indices (modes first, then all ancillas) that survive.
fn kept_subsystems(spec: &ProtocolSpec, extra: usize) -> Result<Vec<usize>> {
    for &m in &spec.trace_out.modes {
        if m >= spec.modes {
            return Err(Error::IndexOutOfRange { index: m, count: spec.modes });
        }
    }
    for &a in &spec.trace_out.ancillas {
        if a >= spec.ancillas {
            return Err(Error::IndexOutOfRange { index: a, count: spec.ancillas });
        }
    }
    let total_anc = spec.ancillas + extra;
    Ok((0..spec.modes)
        .filter(|m| !spec.trace_out.modes.contains(m))
        .chain((0..total_anc).filter(|a| !spec.trace_out.ancillas.contains(a)).map(|a| spec.modes + a))
        .collect())
}

/// Fock-backend result: an unnormalized ensemble over the full space, the
/// subsystems to keep, and the success probability.
#[derive(Debug, Clone)]
pub struct FockOutput {
    pub mixture: FockMixture,
    pub keep: Vec<usize>,
    pub success_prob: f64,
}

impl FockOutput {
    /// ⟨ψ|ρ_out|ψ⟩ with ρ_out reduced to the kept subsystems and renormalized.
    pub fn fidelity_with_pure(&self, psi: &FockStateVector) -> Result<f64> {
        let tr = self.mixture.trace();
        Ok(self.mixture.fidelity_with_pure(psi, &self.keep)? / tr)
    }

    pub fn reduced_density(&self) -> Result<fock::FockOperator> {
        let tr = self.mixture.trace();
        let r = self.mixture.reduced_density(&self.keep)?;
        fock::FockOperator::new(r.layout.clone(), r.entries / C64::from(tr))
    }
}

fn projector_local(pr: &Projector, layout: &HilbertLayout) -> Result<(DMatrix<C64>, Vec<usize>)> {
    check_projector(pr, layout.modes(), layout.ancillas())?;
    let mode_op = |mode: usize, f: &dyn Fn(usize) -> f64| -> Result<(DMatrix<C64>, Vec<usize>)> {
        let d = layout.mode_dims()[mode];
        let m = DMatrix::from_fn(d, d, |i, j| if i == j { C64::from(f(i)) } else { C64::from(0.0) });
        Ok((m, vec![layout.mode_subsystem(mode)?]))
    };
    match *pr {
        Projector::AncillaLevel { ancilla, level } => {
            let mut m = DMatrix::<C64>::zeros(2, 2);
            m[(level.index(), level.index())] = C64::from(1.0);
            Ok((m, vec![layout.ancilla_subsystem(ancilla)?]))
        }
        Projector::ModeVacuum { mode } => mode_op(mode, &|n| if n == 0 { 1.0 } else { 0.0 }),
        Projector::ModeOccupied { mode } => mode_op(mode, &|n| if n == 0 { 0.0 } else { 1.0 }),
        Projector::ModeParity { mode, even } => mode_op(mode, &|n| if (n % 2 == 0) == even { 1.0 } else { 0.0 }),
        Projector::ModeOccupiedParity { mode, even } => {
            mode_op(mode, &|n| if n > 0 && (n % 2 == 0) == even { 1.0 } else { 0.0 })
        }
    }
}

fn measure_fock(mix: &FockMixture, m: &Measurement) -> Result<FockMixture> {
    let mut branches = Vec::new();
    for arm in &m.arms {
        let mut part = mix.clone();
        let (op, subs) = projector_local(&arm.projector, &part.layout)?;
        part.project_local(&op, &subs)?;
        for g in &arm.corrections {
            part.apply_gate(g)?;
        }
        branches.extend(part.branches);
    }
    Ok(FockMixture { layout: mix.layout.clone(), branches })
}

/// Insert `count` ancillas in |g⟩ ahead of the existing ancillas.
pub fn insert_ground_ancillas(v: &FockStateVector, count: usize) -> Result<FockStateVector> {
    if count == 0 {
        return Ok(v.clone());
    }
    let layout = HilbertLayout::new(v.layout.mode_dims().to_vec(), v.layout.ancillas() + count)?;
    let extra = 1usize << v.layout.ancillas();
    let block = 1usize << count;
    let ground = block - 1; // every new bit at index 1 = |g⟩
    let mode_total: usize = v.layout.mode_dims().iter().product();
    let mut out = DVector::<C64>::zeros(layout.total_dim());
    for m in 0..mode_total {
        for a in 0..extra {
            out[(m * block + ground) * extra + a] = v.entries[m * extra + a];
        }
    }
    FockStateVector::new(layout, out)
}

/// Run `spec` on the Fock oracle. `input` is laid out like the dyad input:
/// protocol modes plus any extra ancillas.
pub fn run_protocol_fock(spec: &ProtocolSpec, input: &FockStateVector, eta: f64, p: f64) -> Result<FockOutput> {
    spec.check(input.layout.modes())?;
    let extra = input.layout.ancillas();
    let full = insert_ground_ancillas(input, spec.ancillas)?;
    let mut mix = FockMixture::pure(&full);
    let start = mix.trace();
    for g in &spec.gates_pre {
        mix.apply_gate(g)?;
    }
    for m in &spec.measure_pre {
        mix = measure_fock(&mix, m)?;
    }
    for &m in &spec.channels.loss_modes {
        noise::apply_loss_mixture(&mut mix, &noise::LossChannel::new(eta, m)?)?;
    }
    for &a in &spec.channels.dephased_ancillas {
        if a >= spec.ancillas {
            return Err(Error::IndexOutOfRange { index: a, count: spec.ancillas });
        }
        noise::apply_dephasing_mixture(&mut mix, &noise::DephasingChannel::new(p, a)?)?;
    }
    mix.compress(fock::BRANCH_TOL);
    for g in &spec.gates_post {
        mix.apply_gate(g)?;
    }
    for m in &spec.measure_post {
        mix = measure_fock(&mix, m)?;
    }
    let tr = mix.trace();
    if !(tr > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let keep = kept_subsystems(spec, extra)?;
    Ok(FockOutput { mixture: mix, keep, success_prob: tr / start })
}
