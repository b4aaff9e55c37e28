//! Branch-set report for the Cantor construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::VerifyError;
use crate::cantor::{area_fraction, centersquares_up_to, CantorConfig, CantorMap};
use crate::energy::{identity_energy, EnergyParams};
use crate::geometry::{Point2, Rect};
use crate::maps::{PinchParams, MODEL_SIDE};
use crate::reduce::pairwise_sum;

pub const FIXED_POINT_SAMPLES: usize = 10_000;

/// Two distinct points with the same image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub square: Rect,
    pub x1: Point2,
    pub x2: Point2,
    pub image: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchReport {
    pub depth: usize,
    /// `|ℚ| Π_{k≤depth} (1 - ε_k)²`, a lower bound for the area of the limit set.
    pub lower_bound: f64,
    pub fixed_points_checked: usize,
    /// Sampled points of `ℱ_depth` with `h(x) ≠ x` (compared exactly).
    pub fixed_point_failures: usize,
    /// One pair per generation-1 centersquare.
    pub witnesses: Vec<Witness>,
    /// Total area of the centersquares of generations `1..=depth`.
    pub centersquare_area: f64,
    /// The energy of the depth-`depth` map when the model energy is supplied.
    pub energy: Option<f64>,
}

impl BranchReport {
    pub fn passed(&self) -> bool {
        self.lower_bound > 0.0 && self.fixed_point_failures == 0 && !self.witnesses.is_empty()
    }
}

/// A uniform point of a uniformly chosen square of `ℱ_depth`, built digit by
/// digit so the `4^depth` squares are never listed.
fn sample_remainder(cfg: &CantorConfig, depth: usize, rng: &mut ChaCha8Rng) -> Point2 {
    let mut r = cfg.base;
    for k in 1..=depth {
        let s = 0.5 * (1.0 - cfg.eps.eps(k)) * r.width();
        let (xmin, ymin) = (
            if rng.gen_bool(0.5) { r.xmax - s } else { r.xmin },
            if rng.gen_bool(0.5) { r.ymax - s } else { r.ymin },
        );
        r = Rect { xmin, xmax: xmin + s, ymin, ymax: ymin + s };
    }
    Point2::new(rng.gen_range(r.xmin..r.xmax), rng.gen_range(r.ymin..r.ymax))
}

/// `model_energy` is the energy of the model map on its square of side
/// [`MODEL_SIDE`]; each centersquare contributes the same energy density.
pub fn branch_area_report(
    cfg: &CantorConfig,
    depth: usize,
    params: PinchParams,
    seed: u64,
    model_energy: Option<f64>,
) -> Result<BranchReport, VerifyError> {
    let map = CantorMap::new(cfg.clone(), params, depth)?;
    let lower_bound = area_fraction(depth, &cfg.eps) * cfg.base.area();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..FIXED_POINT_SAMPLES {
        let x = sample_remainder(cfg, depth, &mut rng);
        if map.eval(x)? != x {
            failures += 1;
        }
    }

    let mut witnesses = Vec::new();
    if depth >= 1 {
        let first = centersquares_up_to(1, &CantorConfig { max_depth: 1, ..cfg.clone() })?;
        for q in first {
            let c = q.center();
            // the collapsed segment has half-length side / MODEL_SIDE
            let h = 0.8 * q.side() / MODEL_SIDE;
            let (x1, x2) = (Point2::new(c.x, c.y - h), Point2::new(c.x, c.y + h));
            let (y1, y2) = (map.eval(x1)?, map.eval(x2)?);
            if y1 == y2 {
                witnesses.push(Witness { square: q.bounds, x1, x2, image: y1 });
            }
        }
    }

    // generation k adds 4^{k-1} centersquares of side ε_k times the parent side
    let terms: Vec<f64> = (1..=depth)
        .map(|k| cfg.eps.eps(k).powi(2) * area_fraction(k - 1, &cfg.eps) * cfg.base.area())
        .collect();
    let centersquare_area = pairwise_sum(&terms);
    let energy = match model_energy {
        Some(e) => {
            let ep = EnergyParams::new(params.p, params.q)?;
            let density = e / (MODEL_SIDE * MODEL_SIDE);
            Some(density * centersquare_area + identity_energy(cfg.base.area() - centersquare_area, &ep))
        }
        None => None,
    };
    Ok(BranchReport {
        depth,
        lower_bound,
        fixed_points_checked: FIXED_POINT_SAMPLES,
        fixed_point_failures: failures,
        witnesses,
        centersquare_area,
        energy,
    })
}
