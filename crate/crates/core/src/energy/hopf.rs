//! Complex derivatives of sampled maps and the residual of the Hopf-type
//! equation `∂_z Φ = ∂_z̄ Ψ` with
//! `Φ = (1 - p/2)|Dh|^p + (1 + q) J^{-q}` and `Ψ = 2p |Dh|^{p-2} conj(h_z) h_z̄`.
//!
//! The conjugated placement `∂_z̄ Φ = ∂_z Ψ` is computed alongside.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{EnergyError, EnergyParams};
use crate::geometry::{Mat2, Point2};
use crate::reduce::pairwise_sum;

/// Values of a map at the nodes `origin + (i h, j h)`, stored row by row (`i` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub values: Vec<Point2>,
}

impl SampleGrid {
    pub fn new(nx: usize, ny: usize, spacing: f64, values: Vec<Point2>) -> Result<Self, EnergyError> {
        if values.len() != nx * ny {
            return Err(EnergyError::BadSetting(format!("{} values for a {nx} x {ny} grid", values.len())));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(EnergyError::BadSetting(format!("grid spacing must be positive (got {spacing})")));
        }
        Ok(SampleGrid { nx, ny, spacing, values })
    }

    /// Samples `f` on an `nx × ny` grid starting at `origin`.
    pub fn sample<F, E>(origin: Point2, nx: usize, ny: usize, spacing: f64, f: F) -> Result<Self, E>
    where
        F: Fn(Point2) -> Result<Point2, E> + Sync,
        E: Send,
    {
        let values = (0..nx * ny)
            .into_par_iter()
            .map(|k| f(Point2::new(origin.x + (k % nx) as f64 * spacing, origin.y + (k / nx) as f64 * spacing)))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(SampleGrid { nx, ny, spacing, values })
    }

    fn at(&self, i: usize, j: usize) -> Point2 {
        self.values[j * self.nx + i]
    }
}

/// A complex field on a grid; node `(i, j)` of the field sits at node
/// `(i + offset, j + offset)` of the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub nx: usize,
    pub ny: usize,
    pub offset: usize,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.nx + i]
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Discrete `L²` norm with cell area `h²`.
    pub fn l2_norm(&self, spacing: f64) -> f64 {
        (pairwise_sum(&self.data.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()) * spacing * spacing).sqrt()
    }
}

fn check_size(nx: usize, ny: usize, need: usize) -> Result<(), EnergyError> {
    if nx < need || ny < need {
        Err(EnergyError::GridTooSmall { need, nx, ny })
    } else {
        Ok(())
    }
}

/// Centered-difference Jacobian matrices at the interior nodes.
fn interior_gradients(grid: &SampleGrid) -> Vec<Mat2> {
    let (mx, my) = (grid.nx - 2, grid.ny - 2);
    let s = 0.5 / grid.spacing;
    (0..mx * my)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % mx + 1, k / mx + 1);
            let dx = grid.at(i + 1, j) - grid.at(i - 1, j);
            let dy = grid.at(i, j + 1) - grid.at(i, j - 1);
            Mat2::from_columns(s * dx, s * dy)
        })
        .collect()
}

fn split_complex(a: &Mat2) -> (Complex64, Complex64) {
    let hz = Complex64::new(a.a11 + a.a22, a.a21 - a.a12) * 0.5;
    let hzbar = Complex64::new(a.a11 - a.a22, a.a21 + a.a12) * 0.5;
    (hz, hzbar)
}

/// `h_z` and `h_z̄` at the interior nodes of the grid.
pub fn complex_derivatives(grid: &SampleGrid) -> Result<(ComplexField, ComplexField), EnergyError> {
    check_size(grid.nx, grid.ny, 3)?;
    let (mx, my) = (grid.nx - 2, grid.ny - 2);
    let (hz, hzbar): (Vec<_>, Vec<_>) = interior_gradients(grid).iter().map(split_complex).unzip();
    Ok((
        ComplexField { nx: mx, ny: my, offset: 1, data: hz },
        ComplexField { nx: mx, ny: my, offset: 1, data: hzbar },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfFields {
    /// Real field `Φ` on the interior nodes (offset 1).
    pub phi: Vec<f64>,
    /// `Ψ` on the interior nodes (offset 1).
    pub psi: ComplexField,
    /// `∂_z Φ - ∂_z̄ Ψ` (offset 2).
    pub residual: ComplexField,
    /// `∂_z̄ Φ - ∂_z Ψ` (offset 2).
    pub residual_conj: ComplexField,
    pub residual_l2: f64,
    pub residual_conj_l2: f64,
}

/// Builds `Φ` and `Ψ` at the interior nodes and differentiates them once more.
pub fn hopf_residual(grid: &SampleGrid, params: &EnergyParams) -> Result<HopfFields, EnergyError> {
    check_size(grid.nx, grid.ny, 5)?;
    let (mx, my) = (grid.nx - 2, grid.ny - 2);
    let grads = interior_gradients(grid);
    if let Some(k) = grads.iter().position(|a| !(a.det() > 0.0)) {
        return Err(EnergyError::NonPositiveJacobianAtNode { i: k % mx + 1, j: k / mx + 1, det: grads[k].det() });
    }
    let (p, q) = (params.p, params.q);
    let (phi, psi): (Vec<f64>, Vec<Complex64>) = grads
        .iter()
        .map(|a| {
            let phi = (1.0 - p / 2.0) * a.hs_norm_pow(p) + (1.0 + q) * a.det().powf(-q);
            let (hz, hzbar) = split_complex(a);
            (phi, 2.0 * p * a.hs_norm_pow(p - 2.0) * hz.conj() * hzbar)
        })
        .unzip();
    let (rx, ry) = (mx - 2, my - 2);
    let s = 0.5 / grid.spacing;
    let (residual, residual_conj): (Vec<_>, Vec<_>) = (0..rx * ry)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % rx + 1, k / rx + 1);
            let idx = |i: usize, j: usize| j * mx + i;
            let phi_x = s * (phi[idx(i + 1, j)] - phi[idx(i - 1, j)]);
            let phi_y = s * (phi[idx(i, j + 1)] - phi[idx(i, j - 1)]);
            let psi_x = (psi[idx(i + 1, j)] - psi[idx(i - 1, j)]) * s;
            let psi_y = (psi[idx(i, j + 1)] - psi[idx(i, j - 1)]) * s;
            let i_unit = Complex64::i();
            let dz = |fx: Complex64, fy: Complex64| (fx - i_unit * fy) * 0.5;
            let dzbar = |fx: Complex64, fy: Complex64| (fx + i_unit * fy) * 0.5;
            let (px, py) = (Complex64::from(phi_x), Complex64::from(phi_y));
            (dz(px, py) - dzbar(psi_x, psi_y), dzbar(px, py) - dz(psi_x, psi_y))
        })
        .unzip();
    let residual = ComplexField { nx: rx, ny: ry, offset: 2, data: residual };
    let residual_conj = ComplexField { nx: rx, ny: ry, offset: 2, data: residual_conj };
    Ok(HopfFields {
        phi,
        psi: ComplexField { nx: mx, ny: my, offset: 1, data: psi },
        residual_l2: residual.l2_norm(grid.spacing),
        residual_conj_l2: residual_conj.l2_norm(grid.spacing),
        residual,
        residual_conj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_of(f: impl Fn(Point2) -> Point2 + Sync, n: usize, h: f64) -> SampleGrid {
        SampleGrid::sample(Point2::new(-0.5, -0.5), n, n, h, |z| Ok::<_, EnergyError>(f(z))).unwrap()
    }

    #[test]
    fn identity_and_conjugate() {
        let (hz, hzbar) = complex_derivatives(&grid_of(|z| z, 9, 0.125)).unwrap();
        assert!(hz.data.iter().all(|&w| w == Complex64::new(1.0, 0.0)));
        assert!(hzbar.data.iter().all(|&w| w == Complex64::new(0.0, 0.0)));
        let (hz, hzbar) = complex_derivatives(&grid_of(|z| Point2::new(z.x, -z.y), 9, 0.125)).unwrap();
        assert!(hz.data.iter().all(|&w| w == Complex64::new(0.0, 0.0)));
        assert!(hzbar.data.iter().all(|&w| w == Complex64::new(1.0, 0.0)));
        assert!(complex_derivatives(&grid_of(|z| z, 2, 0.125)).is_err());
    }

    #[test]
    fn square_map_is_second_order() {
        let sq = |z: Point2| Point2::new(z.x * z.x - z.y * z.y, 2.0 * z.x * z.y);
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let g = grid_of(sq, n, h);
            let (hz, _) = complex_derivatives(&g).unwrap();
            let mut worst = 0.0f64;
            for j in 0..hz.ny {
                for i in 0..hz.nx {
                    let z = Complex64::new(-0.5 + (i + 1) as f64 * h, -0.5 + (j + 1) as f64 * h);
                    worst = worst.max((hz.at(i, j) - 2.0 * z).norm());
                }
            }
            worst
        };
        // centered differences are exact on quadratics
        assert!(err(17) < 1e-13);
        // odd derivatives cancel in h_z for holomorphic cubics, so use a non-holomorphic one
        let cubic = |z: Point2| Point2::new(z.x * z.x * z.x, z.y);
        let e = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let (hz, _) = complex_derivatives(&grid_of(cubic, n, h)).unwrap();
            let mut worst = 0.0f64;
            for j in 0..hz.ny {
                for i in 0..hz.nx {
                    let z = Complex64::new(-0.5 + (i + 1) as f64 * h, -0.5 + (j + 1) as f64 * h);
                    worst = worst.max((hz.at(i, j) - (3.0 * z.re * z.re + 1.0) / 2.0).norm());
                }
            }
            worst
        };
        let ratio = e(17) / e(33);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn affine_maps_have_zero_residual() {
        let pq = EnergyParams::new(3.0, 2.0).unwrap();
        let id = hopf_residual(&grid_of(|z| z, 17, 0.0625), &pq).unwrap();
        assert!(id.residual.data.iter().all(|w| *w == Complex64::new(0.0, 0.0)));
        assert!(id.residual_conj.data.iter().all(|w| *w == Complex64::new(0.0, 0.0)));
        let a = Mat2::new(1.5, 0.25, -0.5, 0.75);
        let aff = hopf_residual(&grid_of(|z| a.apply(z) + Point2::new(0.125, 2.0), 17, 0.0625), &pq).unwrap();
        assert_eq!(aff.residual_l2, 0.0);
        assert_eq!(aff.residual_conj_l2, 0.0);
        let b = Mat2::new(1.3, 0.2, -0.7, 0.9);
        let aff = hopf_residual(&grid_of(|z| b.apply(z), 21, 0.05), &pq).unwrap();
        assert!(aff.residual_l2 < 1e-12 && aff.residual_conj_l2 < 1e-12);
    }

    #[test]
    fn folded_grid_is_rejected() {
        let pq = EnergyParams::new(2.0, 1.0).unwrap();
        let err = hopf_residual(&grid_of(|z| Point2::new(-z.x, z.y), 9, 0.125), &pq).unwrap_err();
        assert!(matches!(err, EnergyError::NonPositiveJacobianAtNode { .. }));
    }
}
