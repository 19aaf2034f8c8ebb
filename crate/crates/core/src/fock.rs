//! Truncated Fock-space backend.
//!
//! Dense complex matrices on oscillators ⊗ ancillas. Every generator used in
//! this crate is Hermitian, so unitaries come from a Hermitian
//! eigendecomposition rather than scaling-and-squaring. This backend is the
//! brute-force reference for the closed-form rules of [`crate::dyad`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::qubit::{self, Axis, Level};

/// Tolerance on U†U − I and H − H† (max-abs entry).
pub const UNITARY_TOL: f64 = 1e-10;
/// Maximum weight allowed on the top Fock levels of any mode.
pub const TRUNCATION_TOL: f64 = 1e-8;
/// Number of top Fock levels inspected by the truncation check.
pub const TOP_LEVELS: usize = 5;

/// Smallest oscillator dimension that represents amplitudes up to `amp_max`.
pub fn adequate_dim(amp_max: f64) -> usize {
    let a = amp_max.abs();
    (a * a + 6.0 * a + 10.0).ceil() as usize
}

/// Growth steps tried by [`with_growing_dim`].
pub const DIM_RETRIES: usize = 3;

/// Run `f` at cutoff `dim`, growing it by half on each truncation error.
/// Returns the result and the cutoff that produced it.
pub fn with_growing_dim<T>(mut dim: usize, mut f: impl FnMut(usize) -> Result<T>) -> Result<(T, usize)> {
    for _ in 0..DIM_RETRIES {
        match f(dim) {
            Err(Error::Truncation(_)) => dim += dim / 2,
            other => return other.map(|v| (v, dim)),
        }
    }
    f(dim).map(|v| (v, dim))
}

/// Subsystem layout: oscillators first, then two-level ancillas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    mode_dims: Vec<usize>,
    ancillas: usize,
}

impl HilbertLayout {
    pub fn new(mode_dims: Vec<usize>, ancillas: usize) -> Result<Self> {
        if let Some(&d) = mode_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(d));
        }
        Ok(HilbertLayout { mode_dims, ancillas })
    }

    pub fn single_mode(dim: usize) -> Result<Self> {
        Self::new(vec![dim], 0)
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn ancillas(&self) -> usize {
        self.ancillas
    }

    pub fn subsystem_count(&self) -> usize {
        self.mode_dims.len() + self.ancillas
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = self.mode_dims.clone();
        d.extend(std::iter::repeat_n(2, self.ancillas));
        d
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Subsystem index of ancilla `a`.
    pub fn ancilla_subsystem(&self, a: usize) -> Result<usize> {
        if a >= self.ancillas {
            return Err(Error::IndexOutOfRange { index: a, count: self.ancillas });
        }
        Ok(self.mode_dims.len() + a)
    }

    pub fn mode_subsystem(&self, m: usize) -> Result<usize> {
        if m >= self.mode_dims.len() {
            return Err(Error::IndexOutOfRange { index: m, count: self.mode_dims.len() });
        }
        Ok(m)
    }

    /// Layout made of the kept subsystems (in increasing order).
    pub fn restrict(&self, keep: &[usize]) -> Result<HilbertLayout> {
        let n = self.subsystem_count();
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut modes = Vec::new();
        let mut anc = 0;
        for &k in &keep {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, count: n });
            }
            if k < self.mode_dims.len() {
                modes.push(self.mode_dims[k]);
            } else {
                anc += 1;
            }
        }
        Ok(HilbertLayout { mode_dims: modes, ancillas: anc })
    }

    fn check_subsystems(&self, subs: &[usize]) -> Result<()> {
        let n = self.subsystem_count();
        for (i, &s) in subs.iter().enumerate() {
            if s >= n {
                return Err(Error::IndexOutOfRange { index: s, count: n });
            }
            if subs[..i].contains(&s) {
                return Err(Error::LayoutMismatch(format!("subsystem {s} listed twice")));
            }
        }
        Ok(())
    }

    /// Flat offsets of the `subs` multi-index (first listed is most significant)
    /// and of the complementary multi-index.
    fn split_offsets(&self, subs: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let dims = self.dims();
        let n = dims.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let rest: Vec<usize> = (0..n).filter(|i| !subs.contains(i)).collect();
        let enumerate = |list: &[usize]| -> Vec<usize> {
            let mut offs = vec![0usize];
            for &s in list {
                let mut next = Vec::with_capacity(offs.len() * dims[s]);
                for &o in &offs {
                    for d in 0..dims[s] {
                        next.push(o + d * strides[s]);
                    }
                }
                offs = next;
            }
            offs
        };
        (enumerate(subs), enumerate(&rest))
    }
}

/// Dense operator on a [`HilbertLayout`].
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub layout: HilbertLayout,
    pub entries: DMatrix<C64>,
}

/// Dense state vector on a [`HilbertLayout`].
#[derive(Debug, Clone)]
pub struct FockStateVector {
    pub layout: HilbertLayout,
    pub entries: DVector<C64>,
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl FockOperator {
    pub fn new(layout: HilbertLayout, entries: DMatrix<C64>) -> Result<Self> {
        let d = layout.total_dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::LayoutMismatch(format!(
                "matrix is {}x{}, layout needs {d}x{d}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(FockOperator { layout, entries })
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let d = layout.total_dim();
        FockOperator { layout, entries: DMatrix::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> Self {
        FockOperator { layout: self.layout.clone(), entries: self.entries.adjoint() }
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.entries.adjoint() * &self.entries - DMatrix::<C64>::identity(d, d)))
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Operator product `self · other` on the same layout.
    pub fn compose(&self, other: &FockOperator) -> Result<FockOperator> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch("operator product".into()));
        }
        Ok(FockOperator { layout: self.layout.clone(), entries: &self.entries * &other.entries })
    }

    /// Spectral norm of `self − other`.
    pub fn distance(&self, other: &FockOperator) -> f64 {
        let diff = &self.entries - &other.entries;
        diff.singular_values().iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &FockOperator) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    /// Real eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = hermitize(&self.entries);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Embed an operator acting on `subs` (in that order) into `layout`.
    pub fn embed(&self, layout: &HilbertLayout, subs: &[usize]) -> Result<FockOperator> {
        layout.check_subsystems(subs)?;
        let d = layout.total_dim();
        let mut out = DMatrix::<C64>::zeros(d, d);
        let (loc, rest) = layout.split_offsets(subs);
        if loc.len() != self.dim() {
            return Err(Error::LayoutMismatch("embedded operator dimension".into()));
        }
        for &r in &rest {
            for (i, &li) in loc.iter().enumerate() {
                for (j, &lj) in loc.iter().enumerate() {
                    out[(r + li, r + lj)] = self.entries[(i, j)];
                }
            }
        }
        Ok(FockOperator { layout: layout.clone(), entries: out })
    }
}

fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::from(0.5)
}

impl FockStateVector {
    pub fn new(layout: HilbertLayout, entries: DVector<C64>) -> Result<Self> {
        if entries.len() != layout.total_dim() {
            return Err(Error::LayoutMismatch("state vector length".into()));
        }
        Ok(FockStateVector { layout, entries })
    }

    /// Product basis vector: Fock numbers for modes, levels for ancillas.
    pub fn basis(layout: HilbertLayout, fock: &[usize], levels: &[Level]) -> Result<Self> {
        let mut v = DVector::from_element(1, C64::from(1.0));
        let mut out_layout_ok = fock.len() == layout.modes() && levels.len() == layout.ancillas();
        for (&n, &d) in fock.iter().zip(layout.mode_dims()) {
            out_layout_ok &= n < d;
            let mut e = DVector::zeros(d);
            if n < d {
                e[n] = C64::from(1.0);
            }
            v = v.kronecker(&e);
        }
        if !out_layout_ok {
            return Err(Error::LayoutMismatch("basis labels".into()));
        }
        for &l in levels {
            let mut e = DVector::zeros(2);
            e[l.index()] = C64::from(1.0);
            v = v.kronecker(&e);
        }
        Self::new(layout, v)
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(FockStateVector { layout: self.layout.clone(), entries: &self.entries / C64::from(n) })
    }

    pub fn inner(&self, other: &FockStateVector) -> C64 {
        self.entries.dotc(&other.entries)
    }

    /// |⟨self|other⟩|² / (‖self‖²‖other‖²).
    pub fn fidelity(&self, other: &FockStateVector) -> f64 {
        let ip = self.inner(other).norm_sqr();
        ip / (self.entries.norm_squared() * other.entries.norm_squared())
    }

    pub fn projector(&self) -> FockOperator {
        FockOperator {
            layout: self.layout.clone(),
            entries: &self.entries * self.entries.adjoint(),
        }
    }

    pub fn apply(&self, op: &FockOperator) -> Result<Self> {
        if op.layout != self.layout {
            return Err(Error::LayoutMismatch("operator/state".into()));
        }
        Ok(FockStateVector { layout: self.layout.clone(), entries: &op.entries * &self.entries })
    }

    /// Apply a local operator acting on `subs` (in the listed order).
    pub fn apply_local(&self, op: &DMatrix<C64>, subs: &[usize]) -> Result<Self> {
        let mut v = self.entries.clone();
        apply_local_vec(&self.layout, op, subs, &mut v)?;
        Ok(FockStateVector { layout: self.layout.clone(), entries: v })
    }

    pub fn expectation(&self, op: &FockOperator) -> C64 {
        self.entries.dotc(&(&op.entries * &self.entries))
    }

    /// Weight on the top [`TOP_LEVELS`] Fock levels of `mode`, relative to the norm.
    pub fn top_weight(&self, mode: usize) -> f64 {
        top_weight_vec(&self.layout, &self.entries, mode) / self.entries.norm_squared().max(1e-300)
    }

    pub fn check_truncation(&self) -> Result<()> {
        for m in 0..self.layout.modes() {
            let w = self.top_weight(m);
            if w >= TRUNCATION_TOL {
                return Err(Error::Truncation(format!(
                    "mode {m}: top-level weight {w:.3e} (dim {})",
                    self.layout.mode_dims()[m]
                )));
            }
        }
        Ok(())
    }
}

fn top_weight_vec(layout: &HilbertLayout, v: &DVector<C64>, mode: usize) -> f64 {
    let d = layout.mode_dims()[mode];
    let (loc, rest) = layout.split_offsets(&[mode]);
    let lo = d.saturating_sub(TOP_LEVELS);
    let mut w = 0.0;
    for &r in &rest {
        for &l in &loc[lo..] {
            w += v[r + l].norm_sqr();
        }
    }
    w
}

pub(crate) fn apply_local_vec(
    layout: &HilbertLayout,
    op: &DMatrix<C64>,
    subs: &[usize],
    v: &mut DVector<C64>,
) -> Result<()> {
    layout.check_subsystems(subs)?;
    let (loc, rest) = layout.split_offsets(subs);
    if op.nrows() != loc.len() || op.ncols() != loc.len() {
        return Err(Error::LayoutMismatch(format!(
            "local operator {}x{} for local dimension {}",
            op.nrows(),
            op.ncols(),
            loc.len()
        )));
    }
    apply_gathered(op, &loc, &rest, std::slice::from_mut(v));
    Ok(())
}

/// Apply `op` on the `loc` offsets of every block `rest` of every vector, as
/// one matrix product over the gathered columns.
fn apply_gathered(op: &DMatrix<C64>, loc: &[usize], rest: &[usize], vs: &mut [DVector<C64>]) {
    let cols = rest.len() * vs.len();
    let mut gathered = DMatrix::<C64>::zeros(loc.len(), cols);
    for (b, v) in vs.iter().enumerate() {
        for (k, &r) in rest.iter().enumerate() {
            let mut col = gathered.column_mut(b * rest.len() + k);
            for (i, &l) in loc.iter().enumerate() {
                col[i] = v[r + l];
            }
        }
    }
    let out = op * gathered;
    for (b, v) in vs.iter_mut().enumerate() {
        for (k, &r) in rest.iter().enumerate() {
            let col = out.column(b * rest.len() + k);
            for (i, &l) in loc.iter().enumerate() {
                v[r + l] = col[i];
            }
        }
    }
}

/// Single-mode annihilation operator: ⟨n−1|a|n⟩ = √n.
pub fn build_ladder(dim: usize) -> Result<FockOperator> {
    let layout = HilbertLayout::single_mode(dim)?;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    FockOperator::new(layout, m)
}

/// X_Φ = (a e^{−iΦ} + a† e^{iΦ})/√2.
pub fn quadrature(dim: usize, phi: f64) -> Result<FockOperator> {
    let a = build_ladder(dim)?;
    let ph = C64::from_polar(1.0, -phi);
    let m = (&a.entries * ph + a.entries.adjoint() * ph.conj()) * C64::from(FRAC_1_SQRT_2);
    FockOperator::new(a.layout, m)
}

pub fn position(dim: usize) -> Result<FockOperator> {
    quadrature(dim, 0.0)
}

pub fn momentum(dim: usize) -> Result<FockOperator> {
    quadrature(dim, PI / 2.0)
}

pub fn number(dim: usize) -> Result<FockOperator> {
    let layout = HilbertLayout::single_mode(dim)?;
    let m = DMatrix::from_fn(dim, dim, |r, c| if r == c { C64::from(r as f64) } else { C64::from(0.0) });
    FockOperator::new(layout, m)
}

pub fn parity(dim: usize) -> Result<FockOperator> {
    let layout = HilbertLayout::single_mode(dim)?;
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C64::from(if r % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            C64::from(0.0)
        }
    });
    FockOperator::new(layout, m)
}

/// 2×2 matrix as a single-ancilla operator.
pub fn qubit_operator(m: qubit::Mat2) -> FockOperator {
    let layout = HilbertLayout::new(vec![], 1).expect("qubit layout");
    let entries = DMatrix::from_fn(2, 2, |r, c| m[r][c]);
    FockOperator { layout, entries }
}

pub fn pauli(axis: Axis) -> FockOperator {
    qubit_operator(qubit::pauli(axis))
}

/// Kronecker product; `b`'s modes follow `a`'s, and likewise for ancillas.
///
/// The resulting layout keeps the oscillators-then-ancillas order, so when
/// `a` carries ancillas and `b` carries modes the factors are permuted.
pub fn tensor(a: &FockOperator, b: &FockOperator) -> FockOperator {
    let layout = combined_layout(&a.layout, &b.layout);
    let raw = a.entries.kronecker(&b.entries);
    let perm = tensor_permutation(&a.layout, &b.layout);
    let d = raw.nrows();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(perm[i], perm[j])] = raw[(i, j)];
        }
    }
    FockOperator { layout, entries: out }
}

pub fn tensor_states(a: &FockStateVector, b: &FockStateVector) -> FockStateVector {
    let layout = combined_layout(&a.layout, &b.layout);
    let raw = a.entries.kronecker(&b.entries);
    let perm = tensor_permutation(&a.layout, &b.layout);
    let mut out = DVector::<C64>::zeros(raw.len());
    for i in 0..raw.len() {
        out[perm[i]] = raw[i];
    }
    FockStateVector { layout, entries: out }
}

fn combined_layout(a: &HilbertLayout, b: &HilbertLayout) -> HilbertLayout {
    let mut modes = a.mode_dims.clone();
    modes.extend_from_slice(&b.mode_dims);
    HilbertLayout { mode_dims: modes, ancillas: a.ancillas + b.ancillas }
}

/// Maps raw kron index (a-subsystems then b-subsystems) to the layout index.
fn tensor_permutation(a: &HilbertLayout, b: &HilbertLayout) -> Vec<usize> {
    let out = combined_layout(a, b);
    let am = a.modes();
    let bm = b.modes();
    // position of each raw subsystem inside the output ordering
    let mut raw_to_out = Vec::new();
    for i in 0..am {
        raw_to_out.push(i);
    }
    for i in 0..a.ancillas {
        raw_to_out.push(am + bm + i);
    }
    for i in 0..bm {
        raw_to_out.push(am + i);
    }
    for i in 0..b.ancillas {
        raw_to_out.push(am + bm + a.ancillas + i);
    }
    let mut raw_dims = a.dims();
    raw_dims.extend(b.dims());
    let out_dims = out.dims();
    let n = out_dims.len();
    let mut out_strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out_strides[i] = out_strides[i + 1] * out_dims[i + 1];
    }
    let total: usize = raw_dims.iter().product();
    let mut perm = vec![0usize; total];
    for (idx, p) in perm.iter_mut().enumerate() {
        let mut rem = idx;
        let mut target = 0;
        for s in (0..n).rev() {
            let digit = rem % raw_dims[s];
            rem /= raw_dims[s];
            target += digit * out_strides[raw_to_out[s]];
        }
        *p = target;
    }
    perm
}

/// Partial trace keeping the listed subsystems (result ordered by index).
pub fn partial_trace(rho: &FockOperator, keep: &[usize]) -> Result<FockOperator> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    rho.layout.check_subsystems(&keep)?;
    let out_layout = rho.layout.restrict(&keep)?;
    let (loc, rest) = rho.layout.split_offsets(&keep);
    let k = loc.len();
    let mut out = DMatrix::<C64>::zeros(k, k);
    for &r in &rest {
        for (i, &li) in loc.iter().enumerate() {
            for (j, &lj) in loc.iter().enumerate() {
                out[(i, j)] += rho.entries[(r + li, r + lj)];
            }
        }
    }
    FockOperator::new(out_layout, out)
}

/// exp(i·strength·H) via Hermitian eigendecomposition.
pub fn unitary_from_hamiltonian(h: &FockOperator, strength: f64) -> Result<FockOperator> {
    let err = h.hermiticity_error();
    if err > UNITARY_TOL {
        return Err(Error::NotHermitian(err));
    }
    Ok(FockOperator { layout: h.layout.clone(), entries: expi_hermitian(&h.entries, strength) })
}

pub(crate) fn expi_hermitian(h: &DMatrix<C64>, strength: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(hermitize(h));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, strength * lam);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= ph;
        }
    }
    scaled * v.adjoint()
}

/// Truncated coherent state, renormalized after truncation.
pub fn coherent_fock(amplitude: C64, dim: usize) -> Result<FockStateVector> {
    let layout = HilbertLayout::single_mode(dim)?;
    let need = adequate_dim(amplitude.norm());
    if need > dim {
        return Err(Error::Truncation(format!(
            "coherent amplitude {:.3} needs dim ≥ {need}, got {dim}",
            amplitude.norm()
        )));
    }
    let mut v = DVector::<C64>::zeros(dim);
    let mut term = C64::from((-amplitude.norm_sqr() / 2.0).exp());
    for n in 0..dim {
        v[n] = term;
        term = term * amplitude / ((n + 1) as f64).sqrt();
    }
    FockStateVector::new(layout, v)?.normalized()
}

/// Local Hamiltonian σ_axis ⊗ X_Φ on the (mode, ancilla) pair, mode factor first.
pub fn rabi_hamiltonian(dim: usize, axis: Axis, phi: f64) -> Result<FockOperator> {
    Ok(tensor(&quadrature(dim, phi)?, &pauli(axis)))
}

/// exp[i·strength·σ_axis ⊗ X_Φ], mode factor first. σ commutes with X_Φ, so
/// this is P₊ ⊗ e^{isX_Φ} + P₋ ⊗ e^{−isX_Φ} with P± = (I ± σ)/2, which only
/// needs the spectrum of X_Φ.
pub fn rabi_unitary_local(dim: usize, axis: Axis, phi: f64, strength: f64) -> Result<DMatrix<C64>> {
    let x = quadrature(dim, phi)?;
    let plus = expi_hermitian(&x.entries, strength);
    let minus = plus.adjoint();
    let s = qubit::pauli(axis);
    let half = |sign: f64| {
        DMatrix::from_fn(2, 2, |r, c| (if r == c { C64::from(1.0) } else { C64::from(0.0) } + s[r][c] * sign) * 0.5)
    };
    Ok(plus.kronecker(&half(1.0)) + minus.kronecker(&half(-1.0)))
}

/// exp[iκ(σ₊a + σ₋a†)] on a single mode ⊗ single ancilla, mode factor first.
pub fn jc_unitary_local(coupling: f64, dim: usize) -> Result<FockOperator> {
    let a = build_ladder(dim)?;
    let sp = qubit_operator([[C64::from(0.0), C64::from(1.0)], [C64::from(0.0), C64::from(0.0)]]);
    let h1 = tensor(&a, &sp);
    let h = FockOperator { layout: h1.layout.clone(), entries: &h1.entries + h1.entries.adjoint() };
    unitary_from_hamiltonian(&h, coupling)
}

/// JC unitary embedded in `layout` on the given mode and ancilla.
pub fn jc_unitary(coupling: f64, layout: &HilbertLayout, mode: usize, ancilla: usize) -> Result<FockOperator> {
    let ms = layout.mode_subsystem(mode)?;
    let asub = layout.ancilla_subsystem(ancilla)?;
    let local = jc_unitary_local(coupling, layout.mode_dims()[mode])?;
    local.embed(layout, &[ms, asub])
}

/// Local unitary matrix and target subsystems for a protocol gate.
pub fn gate_local(layout: &HilbertLayout, gate: &Gate) -> Result<(DMatrix<C64>, Vec<usize>)> {
    match *gate {
        Gate::Rabi { ancilla, axis, mode, quad_angle, strength } => {
            let ms = layout.mode_subsystem(mode)?;
            let asub = layout.ancilla_subsystem(ancilla)?;
            Ok((rabi_unitary_local(layout.mode_dims()[mode], axis, quad_angle, strength)?, vec![ms, asub]))
        }
        Gate::Displace { mode, re, im } => {
            let ms = layout.mode_subsystem(mode)?;
            Ok((displacement(layout.mode_dims()[mode], C64::new(re, im))?.entries, vec![ms]))
        }
        Gate::QubitRotation { ancilla, axis, angle } => {
            let asub = layout.ancilla_subsystem(ancilla)?;
            Ok((qubit_operator(qubit::rotation(axis, angle)).entries, vec![asub]))
        }
        Gate::PhaseRotation { mode, angle } => {
            let ms = layout.mode_subsystem(mode)?;
            let d = layout.mode_dims()[mode];
            let n = number(d)?;
            Ok((expi_hermitian(&n.entries, angle), vec![ms]))
        }
        Gate::BeamSplitter { mode_a, mode_b } => {
            let sa = layout.mode_subsystem(mode_a)?;
            let sb = layout.mode_subsystem(mode_b)?;
            let (da, db) = (layout.mode_dims()[mode_a], layout.mode_dims()[mode_b]);
            Ok((beam_splitter(da, db)?.entries, vec![sa, sb]))
        }
        Gate::Squeeze { mode, r } => {
            let ms = layout.mode_subsystem(mode)?;
            Ok((squeeze(layout.mode_dims()[mode], r)?.entries, vec![ms]))
        }
    }
}

/// D(δ) = exp(δa† − conj(δ)a).
pub fn displacement(dim: usize, delta: C64) -> Result<FockOperator> {
    let a = build_ladder(dim)?;
    // δa† − δ*a = i·H with H = −i(δa† − δ*a)
    let g = a.entries.adjoint() * delta - &a.entries * delta.conj();
    let h = g * C64::new(0.0, -1.0);
    Ok(FockOperator { layout: a.layout, entries: expi_hermitian(&h, 1.0) })
}

/// S(r) = exp[(r/2)(a² − a†²)].
pub fn squeeze(dim: usize, r: f64) -> Result<FockOperator> {
    let a = build_ladder(dim)?;
    let a2 = &a.entries * &a.entries;
    let g = (&a2 - a2.adjoint()) * C64::from(0.5);
    let h = g * C64::new(0.0, -1.0);
    Ok(FockOperator { layout: a.layout, entries: expi_hermitian(&h, r) })
}

/// 50:50 beam splitter mapping |β₁,β₂⟩ ↦ |(β₁+β₂)/√2, (β₁−β₂)/√2⟩:
/// (−1)^{n_b} · exp[(π/4)(a†b − ab†)].
pub fn beam_splitter(dim_a: usize, dim_b: usize) -> Result<FockOperator> {
    let a = build_ladder(dim_a)?;
    let b = build_ladder(dim_b)?;
    let ia = FockOperator::identity(a.layout.clone());
    let ad_b = tensor(&a.adjoint(), &b);
    let g = &ad_b.entries - ad_b.entries.adjoint();
    let h = g * C64::new(0.0, -1.0);
    let u = expi_hermitian(&h, PI / 4.0);
    let par = tensor(&ia, &parity(dim_b)?);
    Ok(FockOperator { layout: ad_b.layout, entries: par.entries * u })
}

/// Mixed state stored as an unnormalized pure-state ensemble ρ = Σ_b |b⟩⟨b|.
///
/// Kraus channels branch the ensemble instead of forming a dense density
/// matrix, which keeps two-mode protocols tractable.
#[derive(Debug, Clone)]
pub struct FockMixture {
    pub layout: HilbertLayout,
    pub branches: Vec<DVector<C64>>,
}

/// Branches lighter than this fraction of the trace are dropped.
pub const BRANCH_TOL: f64 = 1e-14;

impl FockMixture {
    pub fn pure(state: &FockStateVector) -> Self {
        FockMixture { layout: state.layout.clone(), branches: vec![state.entries.clone()] }
    }

    pub fn trace(&self) -> f64 {
        self.branches.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn apply_local(&mut self, op: &DMatrix<C64>, subs: &[usize]) -> Result<()> {
        self.layout.check_subsystems(subs)?;
        let (loc, rest) = self.layout.split_offsets(subs);
        if op.nrows() != loc.len() || op.ncols() != loc.len() {
            return Err(Error::LayoutMismatch(format!("local operator {}x{} for local dimension {}", op.nrows(), op.ncols(), loc.len())));
        }
        // bounded batches keep the gathered matrix small
        let per = (1usize << 22) / (loc.len() * rest.len()).max(1);
        for chunk in self.branches.chunks_mut(per.max(1)) {
            apply_gathered(op, &loc, &rest, chunk);
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let (u, subs) = gate_local(&self.layout, gate)?;
        self.apply_local(&u, &subs)?;
        self.check_truncation()
    }

    /// Apply a local Kraus set, branching each ensemble member.
    pub fn apply_kraus(&mut self, kraus: &[DMatrix<C64>], subs: &[usize]) -> Result<()> {
        let tr = self.trace();
        let mut out = Vec::with_capacity(self.branches.len() * kraus.len());
        for k in kraus {
            let mut part = FockMixture { layout: self.layout.clone(), branches: self.branches.clone() };
            part.apply_local(k, subs)?;
            out.extend(part.branches.into_iter().filter(|nb| nb.norm_squared() > BRANCH_TOL * tr));
        }
        self.branches = out;
        Ok(())
    }

    /// Re-express the ensemble with the fewest branches: eigenvectors v of the
    /// branch Gram matrix B†B give ρ = Σ (Bv)(Bv)†. Directions below `tol`
    /// relative to the trace are dropped.
    pub fn compress(&mut self, tol: f64) {
        let n = self.branches.len();
        if n < 2 {
            return;
        }
        let d = self.layout.total_dim();
        let b = DMatrix::from_fn(d, n, |r, c| self.branches[c][r]);
        let g = b.adjoint() * &b;
        let eig = SymmetricEigen::new(hermitize(&g));
        let tr: f64 = eig.eigenvalues.iter().sum();
        let keep: Vec<usize> = (0..n).filter(|&j| eig.eigenvalues[j] > tol * tr).collect();
        if keep.len() >= n {
            return;
        }
        let v = DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
        let w = b * v;
        self.branches = (0..keep.len()).map(|c| w.column(c).into_owned()).collect();
    }

    /// Apply operator `op` (not necessarily unitary) to every branch.
    pub fn project_local(&mut self, op: &DMatrix<C64>, subs: &[usize]) -> Result<()> {
        self.apply_local(op, subs)
    }

    pub fn check_truncation(&self) -> Result<()> {
        let tr = self.trace().max(1e-300);
        for m in 0..self.layout.modes() {
            let w: f64 = self.branches.iter().map(|b| top_weight_vec(&self.layout, b, m)).sum::<f64>() / tr;
            if w >= TRUNCATION_TOL {
                return Err(Error::Truncation(format!(
                    "mode {m}: top-level weight {w:.3e} (dim {})",
                    self.layout.mode_dims()[m]
                )));
            }
        }
        Ok(())
    }

    /// Keep only the lowest `dims[m]` levels of each mode. Returns the cropped
    /// ensemble and the discarded fraction of the trace. Useful once a
    /// protocol has undone its squeezing and the state is compact again.
    pub fn cropped(&self, dims: &[usize]) -> Result<(FockMixture, f64)> {
        let old = self.layout.mode_dims();
        if dims.len() != old.len() || dims.iter().zip(old).any(|(&d, &o)| d < 2 || d > o) {
            return Err(Error::LayoutMismatch(format!("cannot crop modes {old:?} to {dims:?}")));
        }
        let layout = HilbertLayout::new(dims.to_vec(), self.layout.ancillas())?;
        let old_dims = self.layout.dims();
        let new_dims = layout.dims();
        // flat index in the old layout of every new basis state
        let mut map = vec![0usize];
        for (s, &nd) in new_dims.iter().enumerate() {
            let mut next = Vec::with_capacity(map.len() * nd);
            for &o in &map {
                for d in 0..nd {
                    next.push(o * old_dims[s] + d);
                }
            }
            map = next;
        }
        let tr = self.trace();
        let branches: Vec<DVector<C64>> = self.branches.iter().map(|b| DVector::from_fn(map.len(), |i, _| b[map[i]])).collect();
        let out = FockMixture { layout, branches };
        let kept = out.trace();
        Ok((out, if tr > 0.0 { 1.0 - kept / tr } else { 0.0 }))
    }

    pub fn to_density(&self) -> FockOperator {
        let d = self.layout.total_dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for b in &self.branches {
            m += b * b.adjoint();
        }
        FockOperator { layout: self.layout.clone(), entries: m }
    }

    /// Reduced density on `keep` without forming the full density matrix.
    pub fn reduced_density(&self, keep: &[usize]) -> Result<FockOperator> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        self.layout.check_subsystems(&keep)?;
        let out_layout = self.layout.restrict(&keep)?;
        let (loc, rest) = self.layout.split_offsets(&keep);
        let k = loc.len();
        let mut out = DMatrix::<C64>::zeros(k, k);
        for b in &self.branches {
            for &r in &rest {
                let col = DVector::from_fn(k, |i, _| b[r + loc[i]]);
                out += &col * col.adjoint();
            }
        }
        FockOperator::new(out_layout, out)
    }

    /// ⟨ψ|Tr_rest ρ|ψ⟩ for a pure ψ on the kept subsystems `keep` (sorted).
    pub fn fidelity_with_pure(&self, psi: &FockStateVector, keep: &[usize]) -> Result<f64> {
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        if keep_sorted != keep {
            return Err(Error::LayoutMismatch("keep list must be sorted".into()));
        }
        if self.layout.restrict(keep)? != psi.layout {
            return Err(Error::LayoutMismatch("pure reference layout".into()));
        }
        let (loc, rest) = self.layout.split_offsets(keep);
        let mut f = 0.0;
        for b in &self.branches {
            for &r in &rest {
                let mut acc = C64::from(0.0);
                for (i, &l) in loc.iter().enumerate() {
                    acc += psi.entries[i].conj() * b[r + l];
                }
                f += acc.norm_sqr();
            }
        }
        Ok(f)
    }
}

/// Eigenvalues below this fraction of the largest are rounding noise.
const SPECTRAL_FLOOR: f64 = 1e-13;

/// Uhlmann fidelity (tr√(√ρ σ √ρ))² for two density operators.
pub fn uhlmann_fidelity(rho: &FockOperator, sigma: &FockOperator) -> Result<f64> {
    if rho.layout != sigma.layout {
        return Err(Error::LayoutMismatch("fidelity arguments".into()));
    }
    let sqrt_rho = hermitian_sqrt(&rho.entries);
    let inner = &sqrt_rho * &sigma.entries * &sqrt_rho;
    let ev = SymmetricEigen::new(hermitize(&inner)).eigenvalues;
    let floor = SPECTRAL_FLOOR * ev.iter().cloned().fold(0.0, f64::max);
    let s: f64 = ev.iter().filter(|&&x| x > floor).map(|&x| x.sqrt()).sum();
    Ok(s * s)
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(hermitize(m));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    let floor = SPECTRAL_FLOOR * eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = if lam > floor { lam.sqrt() } else { 0.0 };
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    scaled * v.adjoint()
}

/// Partial transpose of the listed subsystems.
pub fn partial_transpose(rho: &FockOperator, side: &[usize]) -> Result<FockOperator> {
    rho.layout.check_subsystems(side)?;
    let dims = rho.layout.dims();
    let n = dims.len();
    let d = rho.dim();
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; n];
        for s in (0..n).rev() {
            out[s] = idx % dims[s];
            idx /= dims[s];
        }
        out
    };
    let flat = |dg: &[usize]| -> usize { dg.iter().zip(&dims).fold(0, |acc, (&x, &dm)| acc * dm + x) };
    let mut out = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        let di = digits(i);
        for j in 0..d {
            let dj = digits(j);
            let (mut a, mut b) = (di.clone(), dj.clone());
            for &s in side {
                a[s] = dj[s];
                b[s] = di[s];
            }
            out[(flat(&a), flat(&b))] = rho.entries[(i, j)];
        }
    }
    FockOperator::new(rho.layout.clone(), out)
}

/// Wigner function of a single-mode density at ζ = (x + ip)/√2, via
/// displaced parity (2/π)·tr[ρ D(ζ) Π D(ζ)†] in a padded space.
pub fn wigner_displaced_parity(rho: &FockOperator, zeta: C64) -> Result<f64> {
    if rho.layout.modes() != 1 || rho.layout.ancillas() != 0 {
        return Err(Error::LayoutMismatch("Wigner needs a single-mode density".into()));
    }
    let d = rho.dim();
    let pad = d + 2 * adequate_dim(zeta.norm());
    let mut big = DMatrix::<C64>::zeros(pad, pad);
    big.view_mut((0, 0), (d, d)).copy_from(&rho.entries);
    let dm = displacement(pad, -zeta)?;
    let shifted = &dm.entries * big * dm.entries.adjoint();
    let mut s = 0.0;
    for n in 0..pad {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * shifted[(n, n)].re;
    }
    Ok(2.0 / PI * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_dim2() {
        let a = build_ladder(2).unwrap();
        assert_eq!(a.entries[(0, 1)], C64::from(1.0));
        assert_eq!(a.entries[(0, 0)], C64::from(0.0));
        assert_eq!(a.entries[(1, 0)], C64::from(0.0));
        assert_eq!(a.entries[(1, 1)], C64::from(0.0));
    }

    #[test]
    fn ladder_rejects_small_dim() {
        assert!(matches!(build_ladder(1), Err(Error::InvalidDimension(1))));
        assert!(HilbertLayout::new(vec![3, 1], 0).is_err());
    }

    #[test]
    fn position_matrix_element() {
        let x = position(3).unwrap();
        assert!((x.entries[(0, 1)] - C64::from(FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn canonical_commutator_below_top_level() {
        let d = 12;
        let x = position(d).unwrap().entries;
        let p = momentum(d).unwrap().entries;
        let comm = &x * &p - &p * &x;
        let mut dev: f64 = 0.0;
        for r in 0..d - 1 {
            for c in 0..d - 1 {
                let target = if r == c { C64::new(0.0, 1.0) } else { C64::from(0.0) };
                dev = dev.max((comm[(r, c)] - target).norm());
            }
        }
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn coherent_vacuum_and_overlap() {
        let v = coherent_fock(C64::from(0.0), 10).unwrap();
        assert!((v.entries[0] - C64::from(1.0)).norm() < 1e-15);
        let a = coherent_fock(C64::from(2.0), 40).unwrap();
        let b = coherent_fock(C64::from(-2.0), 40).unwrap();
        assert!((a.inner(&b).re - (-8.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn coherent_mean_photon_number() {
        let v = coherent_fock(C64::from(1.5), 30).unwrap();
        // oracle: direct Poisson-weighted sum
        let n: f64 = (0..30).map(|k| k as f64 * v.entries[k].norm_sqr()).sum();
        assert!((n - 2.25).abs() < 1e-8);
        let n_op = v.expectation(&number(30).unwrap()).re;
        assert!((n_op - 2.25).abs() < 1e-8);
    }

    #[test]
    fn coherent_truncation_error() {
        assert!(matches!(coherent_fock(C64::from(4.0), 20), Err(Error::Truncation(_))));
    }

    #[test]
    fn pauli_exponential_period() {
        let u = unitary_from_hamiltonian(&pauli(Axis::X), PI).unwrap();
        let d = max_abs(&(&u.entries + DMatrix::<C64>::identity(2, 2)));
        assert!(d < 1e-10);
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = build_ladder(4).unwrap();
        assert!(matches!(unitary_from_hamiltonian(&a, 1.0), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn position_generator_displaces_vacuum() {
        let d = 30;
        let t = 1.3;
        let u = unitary_from_hamiltonian(&position(d).unwrap(), t).unwrap();
        let vac = coherent_fock(C64::from(0.0), d).unwrap();
        let out = vac.apply(&u).unwrap();
        let target = coherent_fock(C64::new(0.0, t / 2f64.sqrt()), d).unwrap();
        assert!(out.fidelity(&target) > 1.0 - 1e-10);
    }

    #[test]
    fn exp_roundtrip_identity() {
        let h = rabi_hamiltonian(10, Axis::Y, 0.3).unwrap();
        let u = unitary_from_hamiltonian(&h, 0.7).unwrap();
        let v = unitary_from_hamiltonian(&h, -0.7).unwrap();
        let prod = u.compose(&v).unwrap();
        assert!(prod.max_abs_diff(&FockOperator::identity(prod.layout.clone())) < 1e-10);
        assert!(u.unitarity_error() < 1e-10);
    }

    #[test]
    fn rabi_projector_split_matches_generator() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let direct = unitary_from_hamiltonian(&rabi_hamiltonian(12, axis, 0.7).unwrap(), -0.9).unwrap();
            let split = rabi_unitary_local(12, axis, 0.7, -0.9).unwrap();
            assert!((direct.entries - split).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = coherent_fock(C64::new(0.5, 0.2), 15).unwrap();
        let q = FockStateVector::basis(HilbertLayout::new(vec![], 1).unwrap(), &[], &[Level::G]).unwrap();
        let psi = tensor_states(&a, &q);
        let rho = psi.projector();
        let red = partial_trace(&rho, &[0]).unwrap();
        let f = uhlmann_fidelity(&red, &a.projector()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!((red.trace() - rho.trace()).norm() < 1e-12);
        let red_q = partial_trace(&rho, &[1]).unwrap();
        assert!((red_q.trace() - rho.trace()).norm() < 1e-12);
    }

    #[test]
    fn bell_pair_reduction_is_maximally_mixed() {
        let layout = HilbertLayout::new(vec![], 2).unwrap();
        let a = FockStateVector::basis(layout.clone(), &[], &[Level::E, Level::E]).unwrap();
        let b = FockStateVector::basis(layout.clone(), &[], &[Level::G, Level::G]).unwrap();
        let bell = FockStateVector::new(layout, (&a.entries + &b.entries) * C64::from(FRAC_1_SQRT_2)).unwrap();
        let red = partial_trace(&bell.projector(), &[1]).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let t = if r == c { 0.5 } else { 0.0 };
                assert!((red.entries[(r, c)] - C64::from(t)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn partial_trace_index_error() {
        let rho = FockOperator::identity(HilbertLayout::new(vec![3], 1).unwrap());
        assert!(matches!(partial_trace(&rho, &[2]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn tensor_orders_modes_before_ancillas() {
        // ancilla-first product must land in modes-then-ancillas order
        let q = FockStateVector::basis(HilbertLayout::new(vec![], 1).unwrap(), &[], &[Level::E]).unwrap();
        let m = FockStateVector::basis(HilbertLayout::single_mode(3).unwrap(), &[2], &[]).unwrap();
        let qm = tensor_states(&q, &m);
        let direct = FockStateVector::basis(HilbertLayout::new(vec![3], 1).unwrap(), &[2], &[Level::E]).unwrap();
        assert!((qm.inner(&direct).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jc_identity_cases() {
        let layout = HilbertLayout::new(vec![20], 1).unwrap();
        let u0 = jc_unitary(0.0, &layout, 0, 0).unwrap();
        assert!(u0.max_abs_diff(&FockOperator::identity(layout.clone())) < 1e-12);

        // exp[iκ(σ₊a + σ₋a†)] = exp[iκ/√2 (σ_x X − σ_y P)]
        let k = 0.3;
        let u = jc_unitary(k, &layout, 0, 0).unwrap();
        let hx = rabi_hamiltonian(20, Axis::X, 0.0).unwrap();
        let hy = tensor(&momentum(20).unwrap(), &pauli(Axis::Y));
        let h = FockOperator { layout: hx.layout.clone(), entries: &hx.entries - &hy.entries };
        let v = unitary_from_hamiltonian(&h, k * FRAC_1_SQRT_2).unwrap();
        assert!(u.max_abs_diff(&v) < 1e-10);
    }

    #[test]
    fn jc_swaps_single_excitation() {
        let layout = HilbertLayout::new(vec![6], 1).unwrap();
        let u = jc_unitary(PI / 2.0, &layout, 0, 0).unwrap();
        let g1 = FockStateVector::basis(layout.clone(), &[1], &[Level::G]).unwrap();
        let e0 = FockStateVector::basis(layout.clone(), &[0], &[Level::E]).unwrap();
        let out = g1.apply(&u).unwrap();
        assert!((out.inner(&e0).norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn beam_splitter_maps_coherent_pair() {
        let d = 25;
        let b1 = C64::new(1.0, 0.3);
        let b2 = C64::new(-0.4, 0.5);
        let inp = tensor_states(&coherent_fock(b1, d).unwrap(), &coherent_fock(b2, d).unwrap());
        let bs = beam_splitter(d, d).unwrap();
        let out = inp.apply(&bs).unwrap();
        let s = FRAC_1_SQRT_2;
        let target = tensor_states(
            &coherent_fock((b1 + b2) * s, d).unwrap(),
            &coherent_fock((b1 - b2) * s, d).unwrap(),
        );
        assert!(out.fidelity(&target) > 1.0 - 1e-10);
    }

    #[test]
    fn displaced_parity_wigner_of_vacuum() {
        let vac = coherent_fock(C64::from(0.0), 10).unwrap().projector();
        let w0 = wigner_displaced_parity(&vac, C64::from(0.0)).unwrap();
        assert!((w0 - 2.0 / PI).abs() < 1e-12);
        let z = C64::new(0.4, -0.3);
        let w = wigner_displaced_parity(&vac, z).unwrap();
        assert!((w - 2.0 / PI * (-2.0 * z.norm_sqr()).exp()).abs() < 1e-10);
    }
}
