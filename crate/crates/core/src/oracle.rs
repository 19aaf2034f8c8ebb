//! Backend equivalence: every dyad-engine protocol rerun on the Fock oracle.
//!
//! The squeezing baseline has no dyad form and the dephasing-correction
//! scheme has its own driver; both are covered by their module tests instead.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::dyad::HybridKet;
use crate::error::Result;
use crate::fock::{adequate_dim, with_growing_dim};
use crate::metrics::{protocol_fidelity, Backend};
use crate::experiments::GeneralCode;
use crate::protocols::{self, conditional, ProtocolSpec};

pub const ORACLE_ALPHAS: [f64; 4] = [0.8, 1.5, 2.0, 2.5];
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub protocol: String,
    pub alpha: f64,
    pub eta: f64,
    pub p: f64,
    pub dim: usize,
    pub dyad: f64,
    pub fock: f64,
    pub dyad_success: f64,
    pub fock_success: f64,
}

impl OracleCase {
    /// Largest of the fidelity and success-probability discrepancies.
    pub fn discrepancy(&self) -> f64 {
        (self.dyad - self.fock).abs().max((self.dyad_success - self.fock_success).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.cases.iter().map(OracleCase::discrepancy).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_discrepancy() < self.tolerance
    }
}

pub struct Plan {
    pub spec: ProtocolSpec,
    pub input: HybridKet,
    pub eta: f64,
    pub p: f64,
    /// Largest coherent amplitude reached inside the pipeline.
    pub reach: f64,
}

pub fn plans(alpha: f64) -> Result<Vec<Plan>> {
    let c = |re: f64, im: f64| C64::new(re, im);
    let virt = protocols::virtual_2scs(alpha)?;
    let corner = C64::new(alpha, alpha) * FRAC_1_SQRT_2;
    let mu4 = [c(0.5, 0.1), c(0.3, -0.4), c(-0.2, 0.5), c(0.4, 0.2)];
    let plan = |spec, input, eta, p, reach| Plan { spec, input, eta, p, reach };
    let mut out = vec![
        plan(protocols::unprotected(1), virt.clone(), 0.9, 0.0, alpha),
        plan(protocols::bypass_2scs(alpha)?, virt.clone(), 0.9, 0.1, 3.0 * alpha),
        plan(protocols::bypass_2scs(alpha)?.named("bypass-dephasing-only"), virt.clone(), 1.0, 0.3, 3.0 * alpha),
        plan(protocols::bypass_sine_2scs(alpha)?, virt.clone(), 0.9, 0.05, 3.0 * alpha),
        plan(conditional::bypass_filtered(alpha)?, virt, 0.96, 0.0, 3.0 * alpha),
        plan(
            protocols::bypass_4scs(corner.re, corner.im)?,
            protocols::make_4scs(mu4, corner)?,
            0.9,
            0.05,
            3.0 * alpha,
        ),
        plan(protocols::bypass_ecs(alpha)?, protocols::make_ecs(false, alpha)?, 0.95, 0.0, 3.0 * alpha),
    ];
    // lossless: the decoders then land back on the encoder's amplitude
    // lattice, which keeps the dyad basis small for these deep circuits
    for code in GeneralCode::ALL {
        out.push(plan(code.spec(alpha)?, code.input(alpha)?, 1.0, 0.1, code.reach(alpha)));
    }
    Ok(out)
}

pub fn run_case(plan: &Plan, alpha: f64) -> Result<OracleCase> {
    let d = protocol_fidelity(&plan.spec, &plan.input, plan.eta, plan.p, Backend::Dyad, None)?;
    let (f, dim) = with_growing_dim(adequate_dim(plan.reach), |dim| {
        protocol_fidelity(&plan.spec, &plan.input, plan.eta, plan.p, Backend::Fock, Some(dim))
    })?;
    Ok(OracleCase {
        protocol: plan.spec.name.clone(),
        alpha,
        eta: plan.eta,
        p: plan.p,
        dim,
        dyad: d.fidelity,
        fock: f.fidelity,
        dyad_success: d.success_prob,
        fock_success: f.success_prob,
    })
}

/// Run every protocol on both backends at each amplitude.
pub fn oracle_check(alphas: &[f64]) -> Result<OracleReport> {
    let mut jobs = Vec::new();
    for &a in alphas {
        for plan in plans(a)? {
            jobs.push((a, plan));
        }
    }
    let cases = jobs.par_iter().map(|(a, plan)| run_case(plan, *a)).collect::<Result<Vec<_>>>()?;
    Ok(OracleReport { cases, tolerance: ORACLE_TOL })
}
