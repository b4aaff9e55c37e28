//! Pointwise inequalities, each returned as `lhs - rhs` so that a valid
//! inequality shows up as a nonnegative residual.

use super::{EnergyError, EnergyParams};
use crate::geometry::Mat2;

fn positive_det(a: &Mat2) -> Result<f64, EnergyError> {
    let d = a.det();
    if d > 0.0 {
        Ok(d)
    } else {
        Err(EnergyError::NonPositiveDet(d))
    }
}

/// `|A|^p + 1/J - [(p 2^{(p-2)/2} - 1) J - (p - 2) 2^{(p-2)/2} + 2]`,
/// nonnegative for `p ≥ 2` and zero exactly on rotations.
pub fn pointwise_lower_bound(a: &Mat2, p: f64) -> Result<f64, EnergyError> {
    if !(p >= 2.0) {
        return Err(EnergyError::Regime(format!("need p ≥ 2 (got {p})")));
    }
    let j = positive_det(a)?;
    let c = 2f64.powf((p - 2.0) / 2.0);
    let lhs = a.hs_norm_pow(p) + 1.0 / j;
    let rhs = (p * c - 1.0) * j - (p - 2.0) * c + 2.0;
    Ok(lhs - rhs)
}

/// `|A|^p - |A0|^p - p |A0|^{p-2} ⟨A0, A - A0⟩`.
pub fn gradient_inequality_matrix(a: &Mat2, a0: &Mat2, p: f64) -> Result<f64, EnergyError> {
    if !(p >= 2.0) {
        return Err(EnergyError::Regime(format!("need p ≥ 2 (got {p})")));
    }
    let slope = if *a0 == Mat2::ZERO { 0.0 } else { p * a0.hs_norm_pow(p - 2.0) * a0.frobenius_dot(&(*a - *a0)) };
    Ok(a.hs_norm_pow(p) - a0.hs_norm_pow(p) - slope)
}

/// `J^{-q} - J0^{-q} - (q / J0^{q+1}) (J0 - J)`.
pub fn gradient_inequality_jacobian(j: f64, j0: f64, q: f64) -> Result<f64, EnergyError> {
    if !(j > 0.0) || !(j0 > 0.0) {
        return Err(EnergyError::NonPositiveDet(j.min(j0)));
    }
    if !(q > 0.0) {
        return Err(EnergyError::Regime(format!("need q > 0 (got {q})")));
    }
    Ok(j.powf(-q) - j0.powf(-q) - q / j0.powf(q + 1.0) * (j0 - j))
}

/// `|A|^p + det(A)^{-q} - K(A)` for `p > 2` and `2/p + 1/q ≤ 1`.
pub fn distortion_bound_check(a: &Mat2, params: &EnergyParams) -> Result<f64, EnergyError> {
    let (p, q) = (params.p, params.q);
    if !(p > 2.0) || 2.0 / p + 1.0 / q > 1.0 {
        return Err(EnergyError::Regime(format!("need p > 2 and 2/p + 1/q ≤ 1 (got 2/p + 1/q = {})", 2.0 / p + 1.0 / q)));
    }
    let j = positive_det(a)?;
    Ok(params.density(a) - a.hs_norm_sq() / (2.0 * j))
}
