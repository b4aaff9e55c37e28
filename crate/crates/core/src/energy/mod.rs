//! The energy `E[h] = ∫ |Dh|^p + (det Dh)^{-q}` for piecewise affine and
//! closed-form maps, together with the pointwise inequalities behind the
//! lower bounds and the Hopf-type residual.

mod bounds;
mod hopf;
mod quadrature;

pub use bounds::{
    distortion_bound_check, gradient_inequality_jacobian, gradient_inequality_matrix, pointwise_lower_bound,
};
pub use hopf::{complex_derivatives, hopf_residual, ComplexField, HopfFields, SampleGrid};
pub use quadrature::{energy_analytic, QuadratureSpec};

use thiserror::Error;

use crate::geometry::{GeometryError, Mat2, PLMap};
use crate::maps::MapError;
use crate::reduce::pairwise_sum;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid energy exponents: {0}")]
    InvalidParams(String),
    #[error("triangle {triangle} has nonpositive Jacobian {det:e}; the barrier term is undefined")]
    NonPositiveJacobian { triangle: usize, det: f64 },
    #[error("nonpositive Jacobian {det:e} at grid node ({i}, {j})")]
    NonPositiveJacobianAtNode { i: usize, j: usize, det: f64 },
    #[error("nonpositive Jacobian {0:e}")]
    NonPositiveDet(f64),
    #[error("parameter regime violated: {0}")]
    Regime(String),
    #[error("grid too small: need at least {need} points per axis, got {nx} x {ny}")]
    GridTooSmall { need: usize, nx: usize, ny: usize },
    #[error("invalid quadrature or grid setting: {0}")]
    BadSetting(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub p: f64,
    pub q: f64,
}

impl EnergyParams {
    pub fn new(p: f64, q: f64) -> Result<Self, EnergyError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(EnergyError::InvalidParams(format!("need p > 1 (got {p})")));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(EnergyError::InvalidParams(format!("need q > 0 (got {q})")));
        }
        Ok(EnergyParams { p, q })
    }

    /// `p > 2` and `q ≥ p/(p-2)`: the regime where finite energy forces injectivity.
    pub fn homeo_regime(&self) -> bool {
        self.p > 2.0 && self.q >= self.p / (self.p - 2.0)
    }

    /// `|A|^p + det(A)^{-q}`.
    pub fn density(&self, a: &Mat2) -> f64 {
        a.hs_norm_pow(self.p) + a.det().powf(-self.q)
    }
}

/// How far a quadrature total can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadStatus {
    /// Piecewise affine input, summed exactly per triangle.
    Exact,
    /// The last refinement moved the total by less than 0.5%.
    Converged,
    /// Neither converged nor visibly divergent.
    Unresolved,
    /// Non-finite values, or growth by 10× or more under refinement.
    Divergent,
}

impl QuadStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuadStatus::Exact => "exact",
            QuadStatus::Converged => "converged",
            QuadStatus::Unresolved => "unresolved",
            QuadStatus::Divergent => "divergent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelTotal {
    pub level: usize,
    pub cells: usize,
    pub gradient_term: f64,
    pub barrier_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `∫ |Dh|^p`.
    pub gradient_term: f64,
    /// `∫ J^{-q}`.
    pub barrier_term: f64,
    pub total: f64,
    /// `∫ K` with `K = |Dh|² / (2J)`.
    pub distortion_integral: f64,
    pub cell_count: usize,
    pub min_jacobian: f64,
    pub status: QuadStatus,
    /// Totals per refinement level; empty for piecewise affine input.
    pub levels: Vec<LevelTotal>,
}

impl EnergyReport {
    pub fn converged(&self) -> bool {
        matches!(self.status, QuadStatus::Exact | QuadStatus::Converged)
    }
}

/// `(2^{p/2} + 1) · area`, the energy of the identity (and of any rotation).
pub fn identity_energy(area: f64, params: &EnergyParams) -> f64 {
    (2f64.powf(params.p / 2.0) + 1.0) * area
}

/// Exact energy of a piecewise affine map.
pub fn energy_pl(map: &PLMap, params: &EnergyParams) -> Result<EnergyReport, EnergyError> {
    let mesh = map.mesh();
    let n = mesh.triangle_count();
    let mut grad = Vec::with_capacity(n);
    let mut barrier = Vec::with_capacity(n);
    let mut distortion = Vec::with_capacity(n);
    let mut min_j = f64::INFINITY;
    for t in 0..n {
        let a = map.gradient(t)?;
        let det = a.det();
        if !(det > 0.0) {
            return Err(EnergyError::NonPositiveJacobian { triangle: t, det });
        }
        let area = mesh.triangle_area(t);
        min_j = min_j.min(det);
        grad.push(area * a.hs_norm_pow(params.p));
        barrier.push(area * det.powf(-params.q));
        distortion.push(area * a.hs_norm_sq() / (2.0 * det));
    }
    let gradient_term = pairwise_sum(&grad);
    let barrier_term = pairwise_sum(&barrier);
    Ok(EnergyReport {
        gradient_term,
        barrier_term,
        total: gradient_term + barrier_term,
        distortion_integral: pairwise_sum(&distortion),
        cell_count: n,
        min_jacobian: min_j,
        status: QuadStatus::Exact,
        levels: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_rect_mesh, Point2, Rect};

    #[test]
    fn identity_energy_examples() {
        let p2 = EnergyParams::new(2.0, 1.0).unwrap();
        assert_eq!(identity_energy(1.0, &p2), 3.0);
        assert_eq!(identity_energy(8.0, &p2), 24.0);
        assert_eq!(identity_energy(1.0, &EnergyParams::new(6.0, 1.0).unwrap()), 9.0);
    }

    #[test]
    fn pl_examples() {
        let mesh = make_rect_mesh(Rect::unit_square(), 4, 4).unwrap();
        let id = PLMap::identity(mesh.clone());
        let r = energy_pl(&id, &EnergyParams::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.total, 3.0);
        assert_eq!(r.gradient_term, 2.0);
        assert_eq!(r.barrier_term, 1.0);
        assert_eq!(r.distortion_integral, 1.0);
        assert_eq!(r.min_jacobian, 1.0);
        assert_eq!(r.status, QuadStatus::Exact);
        let r = energy_pl(&id, &EnergyParams::new(4.0, 1.0).unwrap()).unwrap();
        assert!((r.total - 5.0).abs() < 1e-14);
        let scaled = PLMap::affine(mesh.clone(), Mat2::diag(2.0, 2.0), Point2::ORIGIN);
        // |A|² = 8 and det A = 4
        let r = energy_pl(&scaled, &EnergyParams::new(2.0, 1.0).unwrap()).unwrap();
        assert!((r.total - 8.25).abs() < 1e-14);
        let r = energy_pl(&scaled, &EnergyParams::new(2.0, 2.0).unwrap()).unwrap();
        assert!((r.total - 8.0625).abs() < 1e-14);
    }

    #[test]
    fn pl_rejects_folded_triangles() {
        let mesh = make_rect_mesh(Rect::unit_square(), 2, 2).unwrap();
        let mut map = PLMap::identity(mesh);
        map.target_mut()[4] = Point2::new(2.0, 2.0);
        let err = energy_pl(&map, &EnergyParams::new(2.0, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, EnergyError::NonPositiveJacobian { .. }), "{err}");
    }

    #[test]
    fn params_and_regime() {
        assert!(EnergyParams::new(1.0, 1.0).is_err());
        assert!(EnergyParams::new(2.0, 0.0).is_err());
        assert!(EnergyParams::new(3.0, 3.0).unwrap().homeo_regime());
        assert!(!EnergyParams::new(3.0, 2.0).unwrap().homeo_regime());
        assert!(!EnergyParams::new(2.0, 100.0).unwrap().homeo_regime());
    }
}
