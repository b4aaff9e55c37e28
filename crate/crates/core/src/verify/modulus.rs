//! Empirical modulus of continuity and the fitted constant in
//! `|h(x₁) - h(x₂)|² ≤ C · ∫|Dh|² / log(1 + diam / |x₁ - x₂|)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{PlanarMap, VerifyError};
use crate::geometry::Point2;

/// Pairs are drawn with `|x₁ - x₂|` log-uniform in `[MIN_SCALE·diam, diam]`.
pub const MIN_SCALE: f64 = 1e-6;
const CHUNK: usize = 4096;
const REFINE_TOP: usize = 16;
const REFINE_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusRow {
    /// Upper edge of the bin.
    pub delta: f64,
    /// `max |h(x₁) - h(x₂)|` over pairs with `|x₁ - x₂| ≤ delta`.
    pub omega: f64,
    /// Pairs whose separation falls in this bin.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport {
    pub pairs: usize,
    pub rows: Vec<ModulusRow>,
    pub fitted_c: f64,
    pub dirichlet: f64,
    pub diameter: f64,
    /// A pair attaining the fitted constant.
    pub worst_pair: (Point2, Point2),
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    x1: Point2,
    x2: Point2,
    dx: f64,
    dh: f64,
}

fn score(p: &Pair, diam: f64) -> f64 {
    p.dh * p.dh * (1.0 + diam / p.dx).ln()
}

fn evaluate(map: &dyn PlanarMap, x1: Point2, x2: Point2) -> Option<Pair> {
    if !map.in_domain(x1) || !map.in_domain(x2) {
        return None;
    }
    let dx = (x2 - x1).norm();
    if !(dx > 0.0) {
        return None;
    }
    let dh = (map.apply(x2)? - map.apply(x1)?).norm();
    dh.is_finite().then_some(Pair { x1, x2, dx, dh })
}

fn unit(rng: &mut ChaCha8Rng) -> Point2 {
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    Point2::new(t.cos(), t.sin())
}

/// Interior pairs, plus pairs on the boundary circle when the domain is a
/// disk centered at the origin (detected from the bounds).
fn draw(map: &dyn PlanarMap, rng: &mut ChaCha8Rng, diam: f64, boundary: Option<f64>) -> Option<Pair> {
    let b = map.domain_bounds();
    let delta = diam * MIN_SCALE.powf(rng.gen::<f64>());
    if let Some(r) = boundary {
        if rng.gen_bool(0.5) {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let dt = 2.0 * (0.5 * delta / r).min(1.0).asin();
            let x1 = Point2::new(r * t.cos(), r * t.sin());
            let x2 = Point2::new(r * (t + dt).cos(), r * (t + dt).sin());
            return evaluate(map, x1, x2);
        }
    }
    let x1 = Point2::new(rng.gen_range(b.xmin..=b.xmax), rng.gen_range(b.ymin..=b.ymax));
    evaluate(map, x1, x1 + delta * unit(rng))
}

fn disk_radius(map: &dyn PlanarMap) -> Option<f64> {
    let b = map.domain_bounds();
    let r = 0.5 * b.width();
    let corner = Point2::new(b.xmax, b.ymax);
    let centered = b.xmin == -r && b.ymin == -r && b.ymax == r;
    (centered && !map.in_domain(corner) && map.in_domain(Point2::new(r, 0.0))).then_some(r)
}

/// Random local search around a pair, keeping the first point and the
/// separation direction free.
fn refine(map: &dyn PlanarMap, start: Pair, diam: f64, seed: u64) -> Pair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = start;
    let mut best_s = score(&best, diam);
    for step in 0..REFINE_STEPS {
        let shrink = 0.5f64.powf(step as f64 / 50.0);
        let r = best.dx * shrink;
        let x1 = best.x1 + (r * rng.gen::<f64>()) * unit(&mut rng);
        let scale = (rng.gen_range(-1.0..1.0) * shrink).exp();
        let dir = best.x2 - best.x1;
        let rot = rng.gen_range(-0.5..0.5) * shrink;
        let (c, s) = (rot.cos(), rot.sin());
        let d = Point2::new(c * dir.x - s * dir.y, s * dir.x + c * dir.y);
        if let Some(p) = evaluate(map, x1, x1 + scale * d) {
            let sc = score(&p, diam);
            if sc > best_s && p.dx >= diam * MIN_SCALE {
                best = p;
                best_s = sc;
            }
        }
    }
    best
}

/// `dirichlet` is `∫|Dh|²` over the domain, supplied by the caller.
pub fn modulus_profile(
    map: &dyn PlanarMap,
    dirichlet: f64,
    pairs: usize,
    bins: usize,
    seed: u64,
) -> Result<ModulusReport, VerifyError> {
    if !(dirichlet > 0.0) || !dirichlet.is_finite() {
        return Err(VerifyError::BadSetting(format!("Dirichlet energy must be positive and finite (got {dirichlet})")));
    }
    if pairs == 0 || bins == 0 {
        return Err(VerifyError::BadSetting("need at least one pair and one bin".into()));
    }
    let b = map.domain_bounds();
    let diam = b.diameter();
    let boundary = disk_radius(map);
    let chunks = pairs.div_ceil(CHUNK);
    let mut sample: Vec<Pair> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let n = CHUNK.min(pairs - c * CHUNK);
            let mut out = Vec::with_capacity(n);
            let mut tries = 0;
            while out.len() < n && tries < 64 * n {
                tries += 1;
                if let Some(p) = draw(map, &mut rng, diam, boundary) {
                    out.push(p);
                }
            }
            out
        })
        .collect();
    if sample.is_empty() {
        return Err(VerifyError::EmptyBins);
    }

    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&i, &j| score(&sample[j], diam).total_cmp(&score(&sample[i], diam)).then(i.cmp(&j)));
    let refined: Vec<Pair> = order
        .iter()
        .take(REFINE_TOP)
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(r, &i)| refine(map, sample[i], diam, seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(r as u64 + 1))))
        .collect();
    sample.extend(refined);

    let lo = diam * MIN_SCALE;
    let ratio = (diam / lo).ln();
    let edge = |k: usize| lo * (ratio * k as f64 / bins as f64).exp();
    let mut count = vec![0usize; bins];
    let mut bin_max = vec![0.0f64; bins];
    for p in &sample {
        let t = ((p.dx / lo).ln() / ratio * bins as f64).floor();
        let k = if t < 0.0 { 0 } else { (t as usize).min(bins - 1) };
        count[k] += 1;
        bin_max[k] = bin_max[k].max(p.dh);
    }
    if count.iter().any(|&c| c == 0) {
        return Err(VerifyError::EmptyBins);
    }
    let mut omega = 0.0f64;
    let rows = (0..bins)
        .map(|k| {
            omega = omega.max(bin_max[k]);
            ModulusRow { delta: edge(k + 1), omega, count: count[k] }
        })
        .collect();
    let (mut best, mut best_s) = (sample[0], score(&sample[0], diam));
    for p in &sample[1..] {
        let s = score(p, diam);
        if s > best_s {
            best = *p;
            best_s = s;
        }
    }
    Ok(ModulusReport {
        pairs: sample.len(),
        rows,
        fitted_c: best_s / dirichlet,
        dirichlet,
        diameter: diam,
        worst_pair: (best.x1, best.x2),
    })
}
