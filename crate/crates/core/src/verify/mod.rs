//! Numerical checks of injectivity and continuity: multiplicity histograms,
//! modulus-of-continuity profiles, the threshold sweep over `(p, q)` and the
//! branch-set report for the Cantor construction.

mod branch;
mod modulus;
mod multiplicity;
mod threshold;

pub use branch::{branch_area_report, BranchReport, Witness, FIXED_POINT_SAMPLES};
pub use modulus::{modulus_profile, ModulusReport, ModulusRow};
pub use multiplicity::{injectivity_count, MultiplicityHistogram, COLLAPSE_FACTOR, DEFAULT_CELLS, DEFAULT_SAMPLES};
pub use threshold::{threshold_sweep, ThresholdRow, ThresholdTable};

use thiserror::Error;

use crate::cantor::{CantorError, CantorMap};
use crate::energy::EnergyError;
use crate::geometry::{bounding_rect, PLMap, Point2, Rect};
use crate::maps::{AnalyticMap, MapError};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("source samples per axis ({samples}) must be at least twice the target cells per axis ({cells})")]
    Resolution { samples: usize, cells: usize },
    #[error("no sampled pair fell into the δ bins")]
    EmptyBins,
    #[error("invalid setting: {0}")]
    BadSetting(String),
    #[error("threshold sweep needs p > 2 (got {0})")]
    PTooSmall(f64),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// A map that can be sampled pointwise.
pub trait PlanarMap: Sync {
    /// Bounding box of the domain.
    fn domain_bounds(&self) -> Rect;
    fn in_domain(&self, p: Point2) -> bool {
        self.domain_bounds().contains(p)
    }
    /// A rectangle containing the image.
    fn image_bounds(&self) -> Rect;
    /// `None` outside the domain.
    fn apply(&self, p: Point2) -> Option<Point2>;
}

impl PlanarMap for AnalyticMap {
    fn domain_bounds(&self) -> Rect {
        self.domain().bounding_rect()
    }

    fn in_domain(&self, p: Point2) -> bool {
        self.domain().contains(p)
    }

    fn image_bounds(&self) -> Rect {
        self.codomain_bounds()
    }

    fn apply(&self, p: Point2) -> Option<Point2> {
        self.eval(p).ok()
    }
}

impl PlanarMap for CantorMap {
    fn domain_bounds(&self) -> Rect {
        self.config().base
    }

    fn image_bounds(&self) -> Rect {
        self.config().base
    }

    fn apply(&self, p: Point2) -> Option<Point2> {
        self.eval(p).ok()
    }
}

/// Point location for a piecewise affine map through a uniform bucket grid.
#[derive(Debug, Clone)]
pub struct PLLocator {
    map: PLMap,
    bounds: Rect,
    image: Rect,
    nb: usize,
    buckets: Vec<Vec<u32>>,
}

impl PLLocator {
    pub fn new(map: PLMap) -> Self {
        let mesh = map.mesh();
        let bounds = mesh.bounding_rect().unwrap_or(Rect::unit_square());
        let image = bounding_rect(map.target()).unwrap_or(bounds);
        let nb = ((mesh.triangle_count() as f64).sqrt().ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nb * nb];
        let cell = |v: f64, lo: f64, w: f64| (((v - lo) / w * nb as f64).floor().max(0.0) as usize).min(nb - 1);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let pts = tri.map(|i| mesh.vertices()[i]);
            let r = bounding_rect(&pts).expect("three points");
            let (i0, i1) = (cell(r.xmin, bounds.xmin, bounds.width()), cell(r.xmax, bounds.xmin, bounds.width()));
            let (j0, j1) = (cell(r.ymin, bounds.ymin, bounds.height()), cell(r.ymax, bounds.ymin, bounds.height()));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nb + i].push(t as u32);
                }
            }
        }
        PLLocator { map, bounds, image, nb, buckets }
    }

    pub fn map(&self) -> &PLMap {
        &self.map
    }
}

impl PlanarMap for PLLocator {
    fn domain_bounds(&self) -> Rect {
        self.bounds
    }

    fn image_bounds(&self) -> Rect {
        self.image
    }

    fn apply(&self, p: Point2) -> Option<Point2> {
        if !self.bounds.contains(p) {
            return None;
        }
        let nb = self.nb;
        let cell = |v: f64, lo: f64, w: f64| (((v - lo) / w * nb as f64).floor().max(0.0) as usize).min(nb - 1);
        let b = cell(p.y, self.bounds.ymin, self.bounds.height()) * nb + cell(p.x, self.bounds.xmin, self.bounds.width());
        let mesh = self.map.mesh();
        let target = self.map.target();
        for &t in &self.buckets[b] {
            let [i, j, k] = mesh.triangles()[t as usize];
            let inv = mesh.edge_matrix(t as usize).inverse()?;
            let l = inv.apply(p - mesh.vertices()[i]);
            let l0 = 1.0 - l.x - l.y;
            const SLACK: f64 = -1e-12;
            if l.x >= SLACK && l.y >= SLACK && l0 >= SLACK {
                let q = target[i] + l.x * (target[j] - target[i]) + l.y * (target[k] - target[i]);
                return Some(q);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_rect_mesh, Mat2};

    #[test]
    fn pl_locator_reproduces_affine_maps() {
        let mesh = make_rect_mesh(Rect::new(0.0, 2.0, 0.0, 1.0).unwrap(), 7, 5).unwrap();
        let a = Mat2::new(1.1, 0.2, -0.3, 0.8);
        let b = Point2::new(0.5, -1.0);
        let loc = PLLocator::new(PLMap::affine(mesh, a, b));
        for (x, y) in [(0.0, 0.0), (2.0, 1.0), (1.234, 0.567), (0.3, 0.99), (1.5, 0.0)] {
            let p = Point2::new(x, y);
            let q = loc.apply(p).unwrap();
            assert!((q - (a.apply(p) + b)).norm() < 1e-13);
        }
        assert!(loc.apply(Point2::new(2.1, 0.5)).is_none());
    }
}
