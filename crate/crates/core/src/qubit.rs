//! Qubit conventions shared by both backends.
//!
//! Ancilla basis order is (|e⟩, |g⟩): index 0 is the σ_z = +1 level and
//! index 1 the σ_z = −1 ground level every ancilla starts in. With this
//! order the σ_y eigenstates are |±_i⟩ = (|e⟩ ± i|g⟩)/√2.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    E = 0,
    G = 1,
}

impl Level {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Level::E
        } else {
            Level::G
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::ParameterOutOfRange(format!("unknown Pauli axis {other:?}"))),
        }
    }
}

pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn pauli(axis: Axis) -> Mat2 {
    match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => [[ZERO, -I], [I, ZERO]],
        Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Spectral projectors of a Pauli operator, as (eigenvalue, projector) pairs.
pub fn spectral_projectors(axis: Axis) -> [(f64, Mat2); 2] {
    let vec = |s: f64| -> [C64; 2] {
        match axis {
            Axis::Z => {
                if s > 0.0 {
                    [ONE, ZERO]
                } else {
                    [ZERO, ONE]
                }
            }
            Axis::X => [C64::from(FRAC_1_SQRT_2), C64::from(s * FRAC_1_SQRT_2)],
            Axis::Y => [C64::from(FRAC_1_SQRT_2), I * (s * FRAC_1_SQRT_2)],
        }
    };
    let proj = |v: [C64; 2]| -> Mat2 {
        [[v[0] * v[0].conj(), v[0] * v[1].conj()], [v[1] * v[0].conj(), v[1] * v[1].conj()]]
    };
    [(1.0, proj(vec(1.0))), (-1.0, proj(vec(-1.0)))]
}

/// exp(i·angle·σ_axis) = cos(angle)·I + i·sin(angle)·σ_axis.
pub fn rotation(axis: Axis, angle: f64) -> Mat2 {
    let p = pauli(axis);
    let (c, s) = (angle.cos(), angle.sin());
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { c } else { 0.0 };
            out[r][k] = C64::from(id) + I * s * p[r][k];
        }
    }
    out
}

/// |±_i⟩ in the (e, g) basis.
pub fn y_eigenstate(sign: f64) -> [C64; 2] {
    [C64::from(FRAC_1_SQRT_2), I * (sign.signum() * FRAC_1_SQRT_2)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projectors_resolve_identity_and_pauli() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let p = pauli(axis);
            let pr = spectral_projectors(axis);
            for r in 0..2 {
                for c in 0..2 {
                    let sum = pr[0].1[r][c] + pr[1].1[r][c];
                    let weighted = pr[0].1[r][c] * pr[0].0 + pr[1].1[r][c] * pr[1].0;
                    let id = if r == c { 1.0 } else { 0.0 };
                    assert!((sum - id).norm() < 1e-15);
                    assert!((weighted - p[r][c]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn y_eigenstates_have_expected_eigenvalues() {
        let sy = pauli(Axis::Y);
        for s in [1.0, -1.0] {
            let v = y_eigenstate(s);
            for r in 0..2 {
                let w = sy[r][0] * v[0] + sy[r][1] * v[1];
                assert!((w - v[r] * s).norm() < 1e-15);
            }
        }
    }
}
