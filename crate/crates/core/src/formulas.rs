//! Closed forms and fitted laws the numerics are compared against.
//! `l` is the loss 1 − η throughout.

use std::f64::consts::{FRAC_2_PI, LN_2, PI};

/// Decay rate of the unprotected channel fidelity.
pub fn gamma_unprotected(alpha: f64) -> f64 {
    0.17 + alpha.powf(1.92)
}

/// Decay rate under the squeezing baseline.
pub fn gamma_gaussian(alpha: f64) -> f64 {
    0.29 + 0.96 * alpha
}

/// Decay rate under the bypass.
pub fn gamma_bypass(alpha: f64) -> f64 {
    0.65 - 0.025 * alpha.powf(1.2)
}

/// Bypass channel fidelity when the oscillator is fully blocked (η = 0, p = 0).
pub fn blocked_bypass_fidelity(alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    0.5 * ((-3.0 * PI * PI / (64.0 * a2)).exp() + (-PI * PI / (64.0 * a2)).exp())
}

/// W(0,0) of the odd cat |α⟩ − |−α⟩ after the bypass, to first order in `l`
/// and `p`.
pub fn protected_cat_origin(alpha: f64, l: f64, p: f64) -> f64 {
    let a2 = alpha * alpha;
    let e = (-2.0 * a2).exp();
    -(2.0 - 4.0 * e) / PI + l * 2.0 * e * a2 / PI + p * (1.0 - (-PI * PI / (8.0 * a2)).exp()) / (2.0 * PI)
}

/// Exact W(0,0) of the odd cat after pure loss.
pub fn unprotected_cat_origin(alpha: f64, eta: f64) -> f64 {
    let a2 = alpha * alpha;
    2.0 * ((2.0 * a2 * (1.0 - eta)).exp() - (2.0 * a2 * eta).exp()) / (PI * ((2.0 * a2).exp() - 1.0))
}

/// Slope of the bypass log-negativity deficit for the odd ECS.
pub fn ecs_bypass_slope(alpha: f64) -> f64 {
    0.44 - 0.22 * alpha.ln()
}

/// Bypass log-negativity of the odd ECS under loss `l`.
pub fn ecs_bypass_log_negativity(alpha: f64, l: f64) -> f64 {
    LN_2 - l * ecs_bypass_slope(alpha)
}

/// Depth of the steered Wigner peak after a vacuum projection, with bypass.
pub fn bypass_witness_depth(alpha: f64, eta: f64) -> f64 {
    -FRAC_2_PI * ((1.46 * alpha * alpha - 7.14 * alpha + 11.0) * (eta - 1.0)).exp()
}

/// Exact steered W(0,0) for the odd ECS after loss on both modes.
pub fn unprotected_witness_origin(alpha: f64, eta: f64) -> f64 {
    let a2 = alpha * alpha;
    2.0 * ((-4.0 * a2 * (eta - 1.0)).exp() - (2.0 * a2 * eta).exp()) / (PI * ((-2.0 * a2 * (eta - 2.0)).exp() - 1.0))
}

/// Slope of the cat W(0,0) in `l` under the squeezing baseline.
pub fn gaussian_peak_slope(alpha: f64) -> f64 {
    0.61 * alpha.powf(1.60)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_limits() {
        assert!((unprotected_cat_origin(2.0, 1.0) + FRAC_2_PI).abs() < 1e-12);
        assert!((unprotected_witness_origin(3.0, 1.0) + FRAC_2_PI).abs() < 1e-9);
        assert!((bypass_witness_depth(4.0, 1.0) + FRAC_2_PI).abs() < 1e-15);
        assert!((ecs_bypass_log_negativity(3.0, 0.0) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn blocked_fidelity_tends_to_one() {
        assert!(blocked_bypass_fidelity(8.0) > blocked_bypass_fidelity(4.0));
        assert!((blocked_bypass_fidelity(100.0) - 1.0).abs() < 1e-3);
    }
}
