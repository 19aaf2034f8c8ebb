//! Exact qubit ⊗ coherent-state representation.
//!
//! A state is a finite superposition of product basis states
//! |levels⟩ ⊗ |β₁⟩ ⊗ … ⊗ |β_M⟩, where each β is a coherent amplitude. Gates in
//! this crate map such a basis state to a short superposition of others, so
//! kets transform as `v' = T v` and densities as `C' = T C T†` for a sparse
//! transfer matrix `T`. Basis states are not orthogonal; every norm, trace and
//! spectrum goes through the Gram matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::fock::{self, FockOperator, FockStateVector, HilbertLayout};
use crate::gate::Gate;
use crate::qubit::{self, Level};

/// Relative coefficient weight below which a basis state is dropped.
pub const COEFF_TOL: f64 = 1e-12;
/// Amplitudes closer than this are merged into one basis state.
pub const MERGE_TOL: f64 = 1e-10;
/// Gram eigenvalues below this are treated as null directions.
pub const RANK_TOL: f64 = 1e-12;

const CZERO: C64 = C64::new(0.0, 0.0);

/// Mode and ancilla counts. Subsystems are numbered modes first
/// (`0..modes`), then ancillas (`modes..modes + ancillas`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HybridLayout {
    pub modes: usize,
    pub ancillas: usize,
}

impl HybridLayout {
    pub fn new(modes: usize, ancillas: usize) -> Self {
        HybridLayout { modes, ancillas }
    }

    pub fn subsystem_count(&self) -> usize {
        self.modes + self.ancillas
    }

    pub fn ancilla_subsystem(&self, a: usize) -> usize {
        self.modes + a
    }

    fn check_mode(&self, m: usize) -> Result<()> {
        if m >= self.modes {
            return Err(Error::IndexOutOfRange { index: m, count: self.modes });
        }
        Ok(())
    }

    fn check_ancilla(&self, a: usize) -> Result<()> {
        if a >= self.ancillas {
            return Err(Error::IndexOutOfRange { index: a, count: self.ancillas });
        }
        Ok(())
    }

    fn check_subsystems(&self, subs: &[usize]) -> Result<()> {
        let n = self.subsystem_count();
        match subs.iter().find(|&&s| s >= n) {
            Some(&s) => Err(Error::IndexOutOfRange { index: s, count: n }),
            None => Ok(()),
        }
    }

    /// Layout of the kept subsystems.
    pub fn restrict(&self, keep: &[usize]) -> HybridLayout {
        let modes = keep.iter().filter(|&&s| s < self.modes).count();
        HybridLayout { modes, ancillas: keep.len() - modes }
    }
}

/// A product basis state: one level per ancilla, one coherent amplitude per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisState {
    pub levels: Vec<Level>,
    pub amps: Vec<C64>,
}

/// ⟨γ|β⟩ for coherent states.
pub fn coherent_overlap(gamma: C64, beta: C64) -> C64 {
    (C64::from(-0.5 * gamma.norm_sqr() - 0.5 * beta.norm_sqr()) + gamma.conj() * beta).exp()
}

/// Phase picked up by D(δ)|β⟩ = e^{(δβ* − δ*β)/2}|β + δ⟩.
pub fn displacement_phase(delta: C64, beta: C64) -> C64 {
    ((delta * beta.conj() - delta.conj() * beta) * 0.5).exp()
}

impl BasisState {
    pub fn new(levels: Vec<Level>, amps: Vec<C64>) -> Self {
        BasisState { levels, amps }
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &BasisState) -> C64 {
        if self.levels != other.levels {
            return CZERO;
        }
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(C64::from(1.0), |acc, (&g, &b)| acc * coherent_overlap(g, b))
    }

    fn restrict(&self, layout: HybridLayout, keep: &[usize]) -> BasisState {
        let mut levels = Vec::new();
        let mut amps = Vec::new();
        for &s in keep {
            if s < layout.modes {
                amps.push(self.amps[s]);
            } else {
                levels.push(self.levels[s - layout.modes]);
            }
        }
        BasisState { levels, amps }
    }

    fn key(&self) -> (Vec<u8>, Vec<(i64, i64)>) {
        let q = |x: f64| (x / MERGE_TOL).round() as i64;
        (
            self.levels.iter().map(|l| l.index() as u8).collect(),
            self.amps.iter().map(|a| (q(a.re), q(a.im))).collect(),
        )
    }
}

/// One term of a ket: a basis state with its complex weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridComponent {
    pub levels: Vec<Level>,
    pub amplitudes: Vec<C64>,
    pub coefficient: C64,
}

impl HybridComponent {
    pub fn new(levels: Vec<Level>, amplitudes: Vec<C64>, coefficient: C64) -> Self {
        HybridComponent { levels, amplitudes, coefficient }
    }

    pub fn overlap(&self, other: &HybridComponent) -> Result<C64> {
        if self.levels.len() != other.levels.len() || self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::LayoutMismatch("component layouts differ".into()));
        }
        let a = BasisState::new(self.levels.clone(), self.amplitudes.clone());
        let b = BasisState::new(other.levels.clone(), other.amplitudes.clone());
        Ok(a.overlap(&b))
    }
}

/// Deduplicating basis accumulator.
struct BasisBuilder {
    states: Vec<BasisState>,
    index: HashMap<(Vec<u8>, Vec<(i64, i64)>), usize>,
}

impl BasisBuilder {
    fn new() -> Self {
        BasisBuilder { states: Vec::new(), index: HashMap::new() }
    }

    fn insert(&mut self, s: BasisState) -> usize {
        let key = s.key();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.states.len();
        self.states.push(s);
        self.index.insert(key, i);
        i
    }
}

/// Sparse map from an old basis to a new one: `rows[old] = [(new, weight)]`.
struct Transfer {
    basis: Vec<BasisState>,
    rows: Vec<Vec<(usize, C64)>>,
}

impl Transfer {
    fn build<F>(old: &[BasisState], mut f: F) -> Result<Transfer>
    where
        F: FnMut(&BasisState) -> Result<Vec<(BasisState, C64)>>,
    {
        let mut builder = BasisBuilder::new();
        let mut rows = Vec::with_capacity(old.len());
        for s in old {
            let mut row: Vec<(usize, C64)> = Vec::new();
            for (ns, w) in f(s)? {
                if w == CZERO {
                    continue;
                }
                let i = builder.insert(ns);
                match row.iter_mut().find(|(j, _)| *j == i) {
                    Some(entry) => entry.1 += w,
                    None => row.push((i, w)),
                }
            }
            rows.push(row);
        }
        Ok(Transfer { basis: builder.states, rows })
    }

    fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::<C64>::zeros(self.basis.len());
        for (old, row) in self.rows.iter().enumerate() {
            for &(new, w) in row {
                out[new] += w * v[old];
            }
        }
        out
    }

    /// T C T†, exploiting that each old state has only a few images.
    fn apply_mat(&self, c: &DMatrix<C64>) -> DMatrix<C64> {
        let (n_new, n_old) = (self.basis.len(), self.rows.len());
        // row pass: M = T C (n_new × n_old), stored transposed for column access
        let mut mt = DMatrix::<C64>::zeros(n_old, n_new);
        for (j, row) in self.rows.iter().enumerate() {
            for &(i, w) in row {
                let mut col = mt.column_mut(i);
                for k in 0..n_old {
                    col[k] += w * c[(j, k)];
                }
            }
        }
        // column pass: M T†
        let mut out = DMatrix::<C64>::zeros(n_new, n_new);
        for (k, row) in self.rows.iter().enumerate() {
            for &(l, w) in row {
                let wc = w.conj();
                let mut col = out.column_mut(l);
                for i in 0..n_new {
                    col[i] += mt[(k, i)] * wc;
                }
            }
        }
        out
    }
}

/// Images of one basis state under a gate, as (state, weight) pairs.
fn gate_images(layout: HybridLayout, gate: &Gate, s: &BasisState) -> Result<Vec<(BasisState, C64)>> {
    match *gate {
        Gate::Rabi { ancilla, axis, mode, quad_angle, strength } => {
            layout.check_ancilla(ancilla)?;
            layout.check_mode(mode)?;
            // exp[i t σ X_Φ] = Σ_s P_s ⊗ D(s·i t e^{iΦ}/√2)
            let delta = C64::new(0.0, strength * FRAC_1_SQRT_2) * C64::from_polar(1.0, quad_angle);
            let b = s.levels[ancilla].index();
            let beta = s.amps[mode];
            let mut out = Vec::with_capacity(4);
            for (sign, proj) in qubit::spectral_projectors(axis) {
                let d = delta * sign;
                let phase = displacement_phase(d, beta);
                for bp in 0..2 {
                    let w = proj[bp][b];
                    if w.norm() == 0.0 {
                        continue;
                    }
                    let mut ns = s.clone();
                    ns.levels[ancilla] = Level::from_index(bp);
                    ns.amps[mode] = beta + d;
                    out.push((ns, w * phase));
                }
            }
            Ok(out)
        }
        Gate::Displace { mode, re, im } => {
            layout.check_mode(mode)?;
            let d = C64::new(re, im);
            let mut ns = s.clone();
            ns.amps[mode] += d;
            Ok(vec![(ns, displacement_phase(d, s.amps[mode]))])
        }
        Gate::QubitRotation { ancilla, axis, angle } => {
            layout.check_ancilla(ancilla)?;
            let r = qubit::rotation(axis, angle);
            let b = s.levels[ancilla].index();
            Ok((0..2)
                .filter(|&bp| r[bp][b].norm() > 0.0)
                .map(|bp| {
                    let mut ns = s.clone();
                    ns.levels[ancilla] = Level::from_index(bp);
                    (ns, r[bp][b])
                })
                .collect())
        }
        Gate::PhaseRotation { mode, angle } => {
            layout.check_mode(mode)?;
            let mut ns = s.clone();
            ns.amps[mode] *= C64::from_polar(1.0, angle);
            Ok(vec![(ns, C64::from(1.0))])
        }
        Gate::BeamSplitter { mode_a, mode_b } => {
            layout.check_mode(mode_a)?;
            layout.check_mode(mode_b)?;
            let (a, b) = (s.amps[mode_a], s.amps[mode_b]);
            let mut ns = s.clone();
            ns.amps[mode_a] = (a + b) * FRAC_1_SQRT_2;
            ns.amps[mode_b] = (a - b) * FRAC_1_SQRT_2;
            Ok(vec![(ns, C64::from(1.0))])
        }
        Gate::Squeeze { .. } => Err(Error::Unsupported(
            "squeezing leaves the coherent-state manifold; use the Fock backend".into(),
        )),
    }
}

fn gram_of(basis: &[BasisState]) -> DMatrix<C64> {
    let n = basis.len();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        g[(j, j)] = basis[j].overlap(&basis[j]);
        for k in (j + 1)..n {
            let o = basis[j].overlap(&basis[k]);
            g[(j, k)] = o;
            g[(k, j)] = o.conj();
        }
    }
    g
}

fn check_components(layout: HybridLayout, comps: &[HybridComponent]) -> Result<()> {
    for c in comps {
        if c.levels.len() != layout.ancillas || c.amplitudes.len() != layout.modes {
            return Err(Error::LayoutMismatch(format!(
                "component has {} levels / {} amplitudes, layout has {} ancillas / {} modes",
                c.levels.len(),
                c.amplitudes.len(),
                layout.ancillas,
                layout.modes
            )));
        }
        if !c.coefficient.re.is_finite() || !c.coefficient.im.is_finite() {
            return Err(Error::ParameterOutOfRange("non-finite coefficient".into()));
        }
    }
    Ok(())
}

/// Pure state as a coefficient vector over a basis.
#[derive(Debug, Clone)]
pub struct HybridKet {
    pub(crate) layout: HybridLayout,
    pub(crate) basis: Vec<BasisState>,
    pub(crate) coeffs: DVector<C64>,
}

impl HybridKet {
    pub fn new(layout: HybridLayout, components: Vec<HybridComponent>) -> Result<Self> {
        check_components(layout, &components)?;
        let basis: Vec<BasisState> =
            components.iter().map(|c| BasisState::new(c.levels.clone(), c.amplitudes.clone())).collect();
        let coeffs = DVector::from_iterator(components.len(), components.iter().map(|c| c.coefficient));
        // merge duplicates through an identity transfer
        let t = Transfer::build(&basis, |s| Ok(vec![(s.clone(), C64::from(1.0))]))?;
        let coeffs = t.apply_vec(&coeffs);
        Ok(HybridKet { layout, basis: t.basis, coeffs }.pruned(COEFF_TOL))
    }

    pub fn layout(&self) -> HybridLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<C64> {
        &self.coeffs
    }

    pub fn components(&self) -> Vec<HybridComponent> {
        self.basis
            .iter()
            .zip(self.coeffs.iter())
            .map(|(b, &c)| HybridComponent::new(b.levels.clone(), b.amps.clone(), c))
            .collect()
    }

    pub fn gram(&self) -> DMatrix<C64> {
        gram_of(&self.basis)
    }

    /// ⟨ψ|ψ⟩ through the Gram matrix.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.dotc(&(self.gram() * &self.coeffs)).re
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) {
            return Err(Error::ZeroVector);
        }
        let mut out = self.clone();
        out.coeffs /= C64::from(n.sqrt());
        Ok(out)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &HybridKet) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch("inner product".into()));
        }
        let mut acc = CZERO;
        for (a, &ca) in self.basis.iter().zip(self.coeffs.iter()) {
            for (b, &cb) in other.basis.iter().zip(other.coeffs.iter()) {
                acc += ca.conj() * cb * a.overlap(b);
            }
        }
        Ok(acc)
    }

    /// |⟨self|other⟩|² for normalized kets.
    pub fn fidelity(&self, other: &HybridKet) -> Result<f64> {
        let ip = self.inner(other)?;
        Ok(ip.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    pub fn apply_gate(&self, gate: &Gate) -> Result<HybridKet> {
        let layout = self.layout;
        let t = Transfer::build(&self.basis, |s| gate_images(layout, gate, s))?;
        let coeffs = t.apply_vec(&self.coeffs);
        Ok(HybridKet { layout, basis: t.basis, coeffs }.pruned(COEFF_TOL))
    }

    pub fn apply_gates(&self, gates: &[Gate]) -> Result<HybridKet> {
        gates.iter().try_fold(self.clone(), |k, g| k.apply_gate(g))
    }

    /// Drop basis states whose coefficient is below `tol` relative to the largest.
    pub fn pruned(self, tol: f64) -> HybridKet {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..self.basis.len()).filter(|&i| self.coeffs[i].norm() > tol * max).collect();
        if keep.len() == self.basis.len() {
            return self;
        }
        HybridKet {
            layout: self.layout,
            basis: keep.iter().map(|&i| self.basis[i].clone()).collect(),
            coeffs: DVector::from_iterator(keep.len(), keep.iter().map(|&i| self.coeffs[i])),
        }
    }

    pub fn to_density(&self) -> DyadDensity {
        DyadDensity {
            layout: self.layout,
            basis: self.basis.clone(),
            coeffs: &self.coeffs * self.coeffs.adjoint(),
        }
    }

    /// Append a basis ket for extra ancillas set to `levels`.
    pub fn with_ancillas(&self, levels: &[Level]) -> HybridKet {
        let basis = self
            .basis
            .iter()
            .map(|b| {
                let mut l = b.levels.clone();
                l.extend_from_slice(levels);
                BasisState::new(l, b.amps.clone())
            })
            .collect();
        HybridKet {
            layout: HybridLayout::new(self.layout.modes, self.layout.ancillas + levels.len()),
            basis,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Prepend ancillas set to `levels`; existing ancillas shift up.
    pub fn with_leading_ancillas(&self, levels: &[Level]) -> HybridKet {
        let basis = self
            .basis
            .iter()
            .map(|b| {
                let mut l = levels.to_vec();
                l.extend_from_slice(&b.levels);
                BasisState::new(l, b.amps.clone())
            })
            .collect();
        HybridKet {
            layout: HybridLayout::new(self.layout.modes, self.layout.ancillas + levels.len()),
            basis,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Dense Fock vector; truncation is checked per amplitude.
    pub fn to_fock(&self, layout: &HilbertLayout) -> Result<FockStateVector> {
        if layout.modes() != self.layout.modes || layout.ancillas() != self.layout.ancillas {
            return Err(Error::LayoutMismatch("dyad/Fock layouts".into()));
        }
        let cols = fock_columns(&self.basis, layout)?;
        let v = cols * &self.coeffs;
        FockStateVector::new(layout.clone(), v)
    }
}

fn fock_columns(basis: &[BasisState], layout: &HilbertLayout) -> Result<DMatrix<C64>> {
    let d = layout.total_dim();
    let mut cols = DMatrix::<C64>::zeros(d, basis.len());
    for (j, b) in basis.iter().enumerate() {
        let mut v = DVector::from_element(1, C64::from(1.0));
        for (m, &amp) in b.amps.iter().enumerate() {
            let dim = layout.mode_dims()[m];
            v = v.kronecker(&coherent_unnormalized(amp, dim)?);
        }
        for &l in &b.levels {
            let mut e = DVector::<C64>::zeros(2);
            e[l.index()] = C64::from(1.0);
            v = v.kronecker(&e);
        }
        cols.set_column(j, &v);
    }
    Ok(cols)
}

/// Truncated coherent vector with the exact (untruncated) prefactor.
fn coherent_unnormalized(amp: C64, dim: usize) -> Result<DVector<C64>> {
    let v = fock::coherent_fock(amp, dim)?;
    // coherent_fock renormalizes; the truncated weight is below the tolerance anyway
    Ok(v.entries)
}

/// Density operator ρ = Σ_{jk} C_{jk} |b_j⟩⟨b_k| over a shared basis.
#[derive(Debug, Clone)]
pub struct DyadDensity {
    pub(crate) layout: HybridLayout,
    pub(crate) basis: Vec<BasisState>,
    pub(crate) coeffs: DMatrix<C64>,
}

impl DyadDensity {
    pub fn new(layout: HybridLayout, basis: Vec<BasisState>, coeffs: DMatrix<C64>) -> Result<Self> {
        if coeffs.nrows() != basis.len() || coeffs.ncols() != basis.len() {
            return Err(Error::LayoutMismatch("coefficient table size".into()));
        }
        for b in &basis {
            if b.levels.len() != layout.ancillas || b.amps.len() != layout.modes {
                return Err(Error::LayoutMismatch("basis state layout".into()));
            }
        }
        Ok(DyadDensity { layout, basis, coeffs })
    }

    pub fn layout(&self) -> HybridLayout {
        self.layout
    }

    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    pub fn coefficients(&self) -> &DMatrix<C64> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn gram(&self) -> DMatrix<C64> {
        gram_of(&self.basis)
    }

    /// tr ρ = Σ_{jk} C_{jk} ⟨b_k|b_j⟩.
    pub fn trace(&self) -> f64 {
        let g = self.gram();
        let mut t = CZERO;
        for j in 0..self.basis.len() {
            for k in 0..self.basis.len() {
                t += self.coeffs[(j, k)] * g[(k, j)];
            }
        }
        t.re
    }

    /// Max |C − C†| over the table.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.coeffs - self.coeffs.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> DyadDensity {
        DyadDensity { layout: self.layout, basis: self.basis.clone(), coeffs: &self.coeffs * C64::from(s) }
    }

    pub fn apply_gate(&self, gate: &Gate) -> Result<DyadDensity> {
        let layout = self.layout;
        self.map_basis(|s| gate_images(layout, gate, s))
    }

    pub fn apply_gates(&self, gates: &[Gate]) -> Result<DyadDensity> {
        gates.iter().try_fold(self.clone(), |r, g| r.apply_gate(g))
    }

    /// ρ ↦ T ρ T† for a linear map T given on basis states.
    pub(crate) fn map_basis<F>(&self, f: F) -> Result<DyadDensity>
    where
        F: FnMut(&BasisState) -> Result<Vec<(BasisState, C64)>>,
    {
        let t = Transfer::build(&self.basis, f)?;
        let coeffs = t.apply_mat(&self.coeffs);
        Ok(DyadDensity { layout: self.layout, basis: t.basis, coeffs }.pruned(COEFF_TOL))
    }

    /// Replace the basis in place (one image per state) and rescale the table
    /// entrywise by `factor(j, k)`; duplicate images are merged afterwards.
    pub(crate) fn remap_with_factor<F, G>(&self, image: F, factor: G) -> Result<DyadDensity>
    where
        F: Fn(&BasisState) -> BasisState,
        G: Fn(&BasisState, &BasisState) -> C64,
    {
        let n = self.basis.len();
        let mut c = self.coeffs.clone();
        for j in 0..n {
            for k in 0..n {
                if c[(j, k)] != CZERO {
                    c[(j, k)] *= factor(&self.basis[j], &self.basis[k]);
                }
            }
        }
        let images: Vec<BasisState> = self.basis.iter().map(&image).collect();
        let tmp = DyadDensity { layout: self.layout, basis: images, coeffs: c };
        tmp.map_basis(|s| Ok(vec![(s.clone(), C64::from(1.0))]))
    }

    /// Σ of densities with the same layout over the union of their bases.
    pub fn sum(parts: &[DyadDensity]) -> Result<DyadDensity> {
        let first = parts.first().ok_or(Error::ZeroVector)?;
        let layout = first.layout;
        let mut builder = BasisBuilder::new();
        let mut maps = Vec::with_capacity(parts.len());
        for part in parts {
            if part.layout != layout {
                return Err(Error::LayoutMismatch("density sum".into()));
            }
            maps.push(part.basis.iter().map(|b| builder.insert(b.clone())).collect::<Vec<_>>());
        }
        let n = builder.states.len();
        let mut coeffs = DMatrix::<C64>::zeros(n, n);
        for (part, map) in parts.iter().zip(&maps) {
            for j in 0..part.len() {
                for k in 0..part.len() {
                    coeffs[(map[j], map[k])] += part.coeffs[(j, k)];
                }
            }
        }
        Ok(DyadDensity { layout, basis: builder.states, coeffs }.pruned(COEFF_TOL))
    }

    /// Remove basis states whose row and column weight is below `tol`
    /// relative to the largest such weight.
    pub fn pruned(self, tol: f64) -> DyadDensity {
        let n = self.basis.len();
        let weight: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|k| self.coeffs[(j, k)].norm() + self.coeffs[(k, j)].norm()).sum())
            .collect();
        let max = weight.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..n).filter(|&j| weight[j] > tol * max).collect();
        if keep.len() == n {
            return self;
        }
        let coeffs = DMatrix::from_fn(keep.len(), keep.len(), |r, c| self.coeffs[(keep[r], keep[c])]);
        DyadDensity { layout: self.layout, basis: keep.iter().map(|&i| self.basis[i].clone()).collect(), coeffs }
    }

    /// Explicit prune with caller tolerances: merges amplitudes closer than
    /// `merge_tol` then drops rows lighter than `coeff_tol`.
    pub fn prune(&self, coeff_tol: f64, merge_tol: f64) -> DyadDensity {
        let mut reps: Vec<BasisState> = Vec::new();
        let mut rows: Vec<Vec<(usize, C64)>> = Vec::new();
        for s in &self.basis {
            let found = reps.iter().position(|r| {
                r.levels == s.levels && r.amps.iter().zip(&s.amps).all(|(a, b)| (a - b).norm() <= merge_tol)
            });
            let i = match found {
                Some(i) => i,
                None => {
                    reps.push(s.clone());
                    reps.len() - 1
                }
            };
            rows.push(vec![(i, C64::from(1.0))]);
        }
        let t = Transfer { basis: reps, rows };
        let coeffs = t.apply_mat(&self.coeffs);
        DyadDensity { layout: self.layout, basis: t.basis, coeffs }.pruned(coeff_tol)
    }

    /// Reduced density on `keep` (subsystem indices, any order; result sorted).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DyadDensity> {
        self.layout.check_subsystems(keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let traced: Vec<usize> = (0..self.layout.subsystem_count()).filter(|s| !keep.contains(s)).collect();
        let layout = self.layout.restrict(&keep);
        let kept: Vec<BasisState> = self.basis.iter().map(|b| b.restrict(self.layout, &keep)).collect();
        let gone: Vec<BasisState> = self.basis.iter().map(|b| b.restrict(self.layout, &traced)).collect();
        let n = self.basis.len();
        let mut c = self.coeffs.clone();
        for j in 0..n {
            for k in 0..n {
                if c[(j, k)] != CZERO {
                    c[(j, k)] *= gone[k].overlap(&gone[j]);
                }
            }
        }
        let tmp = DyadDensity { layout, basis: kept, coeffs: c };
        tmp.map_basis(|s| Ok(vec![(s.clone(), C64::from(1.0))]))
    }

    /// Partial transpose on `side`: for modes |β⟩⟨γ| ↦ |γ*⟩⟨β*|, for ancillas
    /// the ket and bra levels swap.
    pub fn partial_transpose(&self, side: &[usize]) -> Result<DyadDensity> {
        self.layout.check_subsystems(side)?;
        let m = self.layout.modes;
        let swap = |ket: &BasisState, bra: &BasisState| -> BasisState {
            let mut out = ket.clone();
            for &s in side {
                if s < m {
                    out.amps[s] = bra.amps[s].conj();
                } else {
                    out.levels[s - m] = bra.levels[s - m];
                }
            }
            out
        };
        let n = self.basis.len();
        let mut builder = BasisBuilder::new();
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        for j in 0..n {
            for k in 0..n {
                let c = self.coeffs[(j, k)];
                if c == CZERO {
                    continue;
                }
                let ket = builder.insert(swap(&self.basis[j], &self.basis[k]));
                let bra = builder.insert(swap(&self.basis[k], &self.basis[j]));
                entries.push((ket, bra, c));
            }
        }
        let nb = builder.states.len();
        let mut coeffs = DMatrix::<C64>::zeros(nb, nb);
        for (a, b, c) in entries {
            coeffs[(a, b)] += c;
        }
        Ok(DyadDensity { layout: self.layout, basis: builder.states, coeffs })
    }

    /// Eigenvalues of ρ on the span of its basis (Löwdin orthonormalization).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        density_eigen(self)
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation_pure(&self, psi: &HybridKet) -> Result<f64> {
        if psi.layout != self.layout {
            return Err(Error::LayoutMismatch("pure state vs density".into()));
        }
        let w = DVector::from_fn(self.basis.len(), |j, _| {
            self.basis[j]
                .overlap_many(&psi.basis, &psi.coeffs)
        });
        Ok(w.dotc(&(&self.coeffs * &w)).re)
    }

    /// Wigner function of one mode at ζ, other subsystems traced out.
    pub fn wigner(&self, mode: usize, zeta: C64) -> Result<f64> {
        self.layout.check_mode(mode)?;
        let red = self.partial_trace(&[mode])?;
        Ok(red.wigner_single(zeta))
    }

    /// Wigner function of an already reduced single-mode density.
    pub(crate) fn wigner_single(&self, zeta: C64) -> f64 {
        let n = self.basis.len();
        let mut w = CZERO;
        for j in 0..n {
            for k in 0..n {
                let c = self.coeffs[(j, k)];
                if c != CZERO {
                    w += c * wigner_kernel(self.basis[j].amps[0], self.basis[k].amps[0], zeta);
                }
            }
        }
        w.re
    }

    /// ⟨(−1)^n⟩ on one mode.
    pub fn parity(&self, mode: usize) -> Result<f64> {
        self.layout.check_mode(mode)?;
        let red = self.partial_trace(&[mode])?;
        let n = red.basis.len();
        let mut p = CZERO;
        for j in 0..n {
            for k in 0..n {
                p += red.coeffs[(j, k)] * parity_kernel(red.basis[j].amps[0], red.basis[k].amps[0]);
            }
        }
        Ok(p.re)
    }

    /// Dense Fock density Σ C_{jk} |f_j⟩⟨f_k|.
    pub fn to_fock(&self, layout: &HilbertLayout) -> Result<FockOperator> {
        if layout.modes() != self.layout.modes || layout.ancillas() != self.layout.ancillas {
            return Err(Error::LayoutMismatch("dyad/Fock layouts".into()));
        }
        let f = fock_columns(&self.basis, layout)?;
        FockOperator::new(layout.clone(), &f * &self.coeffs * f.adjoint())
    }
}

impl BasisState {
    fn overlap_many(&self, basis: &[BasisState], coeffs: &DVector<C64>) -> C64 {
        basis.iter().zip(coeffs.iter()).map(|(b, &c)| self.overlap(b) * c).sum()
    }
}

/// W of the dyad |β⟩⟨γ| at ζ.
pub fn wigner_kernel(beta: C64, gamma: C64, zeta: C64) -> C64 {
    let shifted = zeta * 2.0 - beta;
    let e = (zeta.conj() * beta - zeta * beta.conj())
        + C64::from(-0.5 * gamma.norm_sqr() - 0.5 * shifted.norm_sqr())
        + gamma.conj() * shifted;
    e.exp() * (2.0 / PI)
}

/// ⟨γ|(−1)^n|β⟩ = ⟨γ|−β⟩.
pub fn parity_kernel(beta: C64, gamma: C64) -> C64 {
    coherent_overlap(gamma, -beta)
}

/// Spectrum of a dyad density restricted to its basis span:
/// eig(S^{1/2} V† C V S^{1/2}) with G = V S V†.
pub fn density_eigen(rho: &DyadDensity) -> Result<Vec<f64>> {
    if rho.basis.is_empty() {
        return Err(Error::DegenerateBasis);
    }
    let g = rho.gram();
    let eig = SymmetricEigen::new((&g + g.adjoint()) * C64::from(0.5));
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > RANK_TOL).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateBasis);
    }
    let n = rho.basis.len();
    let r = keep.len();
    // columns: V_i·√s_i for kept i
    let w = DMatrix::from_fn(n, r, |row, col| {
        let i = keep[col];
        eig.eigenvectors[(row, i)] * eig.eigenvalues[i].sqrt()
    });
    let m = w.adjoint() * &rho.coeffs * &w;
    let m = (&m + m.adjoint()) * C64::from(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::Axis;
    use std::f64::consts::FRAC_PI_4;

    fn cat(mu: C64, nu: C64, alpha: f64) -> HybridKet {
        HybridKet::new(
            HybridLayout::new(1, 0),
            vec![
                HybridComponent::new(vec![], vec![C64::from(alpha)], mu),
                HybridComponent::new(vec![], vec![C64::from(-alpha)], nu),
            ],
        )
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn overlap_rules() {
        let a = HybridComponent::new(vec![Level::G], vec![C64::from(1.3)], C64::from(1.0));
        assert!((a.overlap(&a).unwrap() - C64::from(1.0)).norm() < 1e-15);
        let alpha = 1.1;
        let p = HybridComponent::new(vec![Level::G], vec![C64::from(alpha)], C64::from(1.0));
        let m = HybridComponent::new(vec![Level::G], vec![C64::from(-alpha)], C64::from(1.0));
        assert!((p.overlap(&m).unwrap().re - (-2.0 * alpha * alpha).exp()).abs() < 1e-15);
        let e = HybridComponent::new(vec![Level::E], vec![C64::from(alpha)], C64::from(1.0));
        assert_eq!(p.overlap(&e).unwrap(), C64::from(0.0));
        let bad = HybridComponent::new(vec![], vec![C64::from(alpha)], C64::from(1.0));
        assert!(p.overlap(&bad).is_err());
    }

    #[test]
    fn zero_strength_rabi_is_identity() {
        let k = cat(C64::from(0.6), C64::new(0.2, 0.5), 1.5).with_ancillas(&[Level::G]);
        let out = k.apply_gate(&Gate::rabi(0, Axis::X, 0, 0.0, 0.0)).unwrap();
        assert!((out.fidelity(&k).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(out.len(), k.len());
    }

    #[test]
    fn displacement_shifts_amplitude_with_phase() {
        let alpha = C64::new(2.0, 0.7);
        let k = HybridKet::new(
            HybridLayout::new(1, 0),
            vec![HybridComponent::new(vec![], vec![alpha], C64::from(1.0))],
        )
        .unwrap();
        let d = -alpha / 4.0;
        let out = k.apply_gate(&Gate::Displace { mode: 0, re: d.re, im: d.im }).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.basis()[0].amps[0] - alpha * 0.75).norm() < 1e-14);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((out.coefficients()[0] - displacement_phase(d, alpha)).norm() < 1e-15);
        let id = k.apply_gate(&Gate::Displace { mode: 0, re: 0.0, im: 0.0 }).unwrap();
        assert!((id.fidelity(&k).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cancelling_components_vanish() {
        let c = C64::new(0.3, -0.2);
        let k = HybridKet::new(
            HybridLayout::new(1, 0),
            vec![
                HybridComponent::new(vec![], vec![C64::from(1.0)], c),
                HybridComponent::new(vec![], vec![C64::from(1.0)], -c),
                HybridComponent::new(vec![], vec![C64::from(-1.0)], C64::from(1.0)),
            ],
        )
        .unwrap();
        assert_eq!(k.len(), 1);
        let z = HybridKet::new(
            HybridLayout::new(1, 0),
            vec![HybridComponent::new(vec![], vec![C64::from(1.0)], C64::from(0.0))],
        )
        .unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn pure_state_spectrum() {
        let rho = cat(C64::from(1.0), C64::from(1.0), 0.7).to_density();
        let ev = rho.eigenvalues().unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-10);
        assert!(ev[1..].iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn fully_dephased_bell_like_state_has_two_halves() {
        // (|g⟩|α⟩ + |e⟩|−α⟩)/√2 with the coherence removed
        let layout = HybridLayout::new(1, 1);
        let k = HybridKet::new(
            layout,
            vec![
                HybridComponent::new(vec![Level::G], vec![C64::from(2.0)], C64::from(FRAC_1_SQRT_2)),
                HybridComponent::new(vec![Level::E], vec![C64::from(-2.0)], C64::from(FRAC_1_SQRT_2)),
            ],
        )
        .unwrap();
        let mut rho = k.to_density();
        for j in 0..2 {
            for l in 0..2 {
                if rho.basis[j].levels != rho.basis[l].levels {
                    rho.coeffs[(j, l)] = C64::from(0.0);
                }
            }
        }
        let ev = rho.eigenvalues().unwrap();
        assert!((ev[0] - 0.5).abs() < 1e-9 && (ev[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn vacuum_wigner_and_parity() {
        let vac = HybridKet::new(
            HybridLayout::new(1, 0),
            vec![HybridComponent::new(vec![], vec![C64::from(0.0)], C64::from(1.0))],
        )
        .unwrap()
        .to_density();
        assert!((vac.wigner(0, C64::from(0.0)).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert!((vac.parity(0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn odd_cat_origin_wigner() {
        let rho = cat(C64::from(1.0), C64::from(-1.0), 6.0).to_density();
        let w = rho.wigner(0, C64::from(0.0)).unwrap();
        assert!((w + 2.0 / PI).abs() < 1e-6);
        assert!((w - 2.0 / PI * rho.parity(0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn transpose_of_real_diagonal_table_is_itself() {
        let layout = HybridLayout::new(1, 0);
        let basis = vec![
            BasisState::new(vec![], vec![C64::from(1.0)]),
            BasisState::new(vec![], vec![C64::from(-0.5)]),
        ];
        let c = DMatrix::from_fn(2, 2, |r, k| if r == k { C64::from(0.5 + r as f64 * 0.1) } else { C64::from(0.0) });
        let rho = DyadDensity::new(layout, basis, c).unwrap();
        let pt = rho.partial_transpose(&[0]).unwrap();
        assert_eq!(pt.len(), 2);
        for j in 0..2 {
            let i = pt.basis.iter().position(|b| b == &rho.basis[j]).unwrap();
            assert!((pt.coeffs[(i, i)] - rho.coeffs[(j, j)]).norm() < 1e-15);
        }
    }

    #[test]
    fn lift_map_produces_rotated_pair() {
        // R[−π/4] D[iα] on μ|α⟩ + ν|−α⟩ lands on |√2α⟩ and |√2iα⟩ with Weyl phases e^{±iα²}
        let alpha = 1.7;
        let (mu, nu) = (C64::new(0.8, 0.1), C64::new(-0.3, 0.4));
        let k = cat(mu, nu, alpha);
        let out = k
            .apply_gates(&[Gate::Displace { mode: 0, re: 0.0, im: alpha }, Gate::PhaseRotation { mode: 0, angle: -FRAC_PI_4 }])
            .unwrap();
        let a2 = alpha * 2f64.sqrt();
        let ph = C64::from_polar(1.0, alpha * alpha);
        let target = HybridKet::new(
            HybridLayout::new(1, 0),
            vec![
                HybridComponent::new(vec![], vec![C64::from(a2)], mu * ph),
                HybridComponent::new(vec![], vec![C64::new(0.0, a2)], nu * ph.conj()),
            ],
        )
        .unwrap();
        assert!(out.fidelity(&target).unwrap() > 1.0 - 1e-10);
    }
}
