//! Projected gradient descent for the discrete energy over piecewise affine
//! maps with every triangle Jacobian positive, boundary vertices sliding on
//! their side of the target rectangle and corners pinned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{identity_energy, EnergyParams};
use crate::geometry::{GeometryError, Mat2, PLMap, Point2, Rect, Sides, TriangleMesh};
use crate::reduce::{pairwise_sum, par_sum_by};

#[derive(Debug, Error)]
pub enum MinimizerError {
    #[error("triangle {triangle} of the initial map has nonpositive Jacobian {det:e}")]
    InvertedTriangle { triangle: usize, det: f64 },
    #[error("boundary vertex {vertex} at {pos} is not on the boundary of the target")]
    OffBoundary { vertex: usize, pos: Point2 },
    #[error("the identity is not boundary-conforming unless source and target rectangles coincide")]
    IdentityNeedsSameRect,
    #[error("no feasible step of length ≥ 1e-16 at iteration {iteration} (energy {energy:.12e}, projected gradient {grad_norm:.3e})")]
    Stall { iteration: usize, energy: f64, grad_norm: f64 },
    #[error("minimum Jacobian {min_det:e} fell below 1e-14 at iteration {iteration}; aborting instead of regularizing")]
    BarrierDegenerate { iteration: usize, min_det: f64 },
    #[error("could not draw a feasible perturbation for vertex {0}")]
    Perturbation(usize),
    #[error("invalid minimizer setting: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerConfig {
    pub params: EnergyParams,
    pub max_iters: usize,
    /// Stop once the projected gradient is below this in the max norm.
    pub grad_tol: f64,
    pub backtrack: f64,
    pub armijo: f64,
    /// Fraction-to-boundary parameter: a step keeps every Jacobian ≥ (1 - τ) of its current value.
    pub tau: f64,
}

impl MinimizerConfig {
    pub fn new(params: EnergyParams) -> Self {
        MinimizerConfig { params, max_iters: 5000, grad_tol: 1e-7, backtrack: 0.5, armijo: 1e-4, tau: 0.9 }
    }

    fn validate(&self) -> Result<(), MinimizerError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(MinimizerError::BadConfig(format!("τ must lie in (0, 1) (got {})", self.tau)));
        }
        if !(self.grad_tol > 0.0) || !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(MinimizerError::BadConfig("tolerances must be positive and factors in (0, 1)".into()));
        }
        Ok(())
    }
}

/// How a vertex may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Free,
    /// On a horizontal side: only `x` changes.
    SlideX,
    /// On a vertical side: only `y` changes.
    SlideY,
    Pinned,
}

impl Binding {
    fn from_sides(s: Sides) -> Binding {
        if s.is_corner() {
            Binding::Pinned
        } else if s.contains(Sides::LEFT) || s.contains(Sides::RIGHT) {
            Binding::SlideY
        } else if s.contains(Sides::BOTTOM) || s.contains(Sides::TOP) {
            Binding::SlideX
        } else {
            Binding::Free
        }
    }

    fn project(self, g: Point2) -> Point2 {
        match self {
            Binding::Free => g,
            Binding::SlideX => Point2::new(g.x, 0.0),
            Binding::SlideY => Point2::new(0.0, g.y),
            Binding::Pinned => Point2::ORIGIN,
        }
    }
}

/// Starting map for [`init_minimizer`].
#[derive(Debug, Clone)]
pub enum Initial {
    Identity,
    /// The affine map of the source rectangle onto the target.
    Bilinear,
    /// The affine map plus a seeded uniform displacement in `[-σ, σ]²` of
    /// every interior vertex, redrawn where it would invert a triangle.
    Perturb { sigma: f64, seed: u64 },
    Map(PLMap),
}

#[derive(Debug, Clone, Copy)]
struct TriangleData {
    verts: [usize; 3],
    area: f64,
    dm_inv: Mat2,
}

#[derive(Debug, Clone)]
pub struct MinimizerState {
    map: PLMap,
    target: Rect,
    tris: Vec<TriangleData>,
    bindings: Vec<Binding>,
    iteration: usize,
    energy_history: Vec<f64>,
    last_step: f64,
    previous: Option<(Vec<Point2>, Vec<Point2>)>,
}

impl MinimizerState {
    pub fn map(&self) -> &PLMap {
        &self.map
    }

    pub fn target_rect(&self) -> Rect {
        self.target
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn energy_history(&self) -> &[f64] {
        &self.energy_history
    }

    pub fn energy(&self) -> f64 {
        *self.energy_history.last().expect("energy is recorded at construction")
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    fn positions(&self) -> &[Point2] {
        self.map.target()
    }
}

fn det_of(ds: &Mat2, dm_inv: &Mat2) -> f64 {
    ds.det() * dm_inv.det()
}

fn edge(pos: &[Point2], tri: &TriangleData) -> Mat2 {
    let [i, j, k] = tri.verts;
    Mat2::from_columns(pos[j] - pos[i], pos[k] - pos[i])
}

fn triangle_data(mesh: &TriangleMesh) -> Result<Vec<TriangleData>, MinimizerError> {
    (0..mesh.triangle_count())
        .map(|t| {
            let dm_inv = mesh.edge_matrix(t).inverse().ok_or(GeometryError::DegenerateTriangle(t))?;
            Ok(TriangleData { verts: mesh.triangles()[t], area: mesh.triangle_area(t), dm_inv })
        })
        .collect()
}

/// Discrete energy at the given positions, `None` if some Jacobian is not positive.
fn energy_at(tris: &[TriangleData], pos: &[Point2], params: &EnergyParams) -> Option<f64> {
    let e = par_sum_by(tris.len(), |t| {
        let tri = &tris[t];
        let a = edge(pos, tri) * tri.dm_inv;
        let det = a.det();
        if det > 0.0 {
            tri.area * params.density(&a)
        } else {
            f64::NAN
        }
    });
    e.is_finite().then_some(e)
}

fn min_det_at(tris: &[TriangleData], pos: &[Point2]) -> f64 {
    tris.par_iter().map(|tri| det_of(&edge(pos, tri), &tri.dm_inv)).reduce(|| f64::INFINITY, f64::min)
}

fn raw_gradient(tris: &[TriangleData], pos: &[Point2], params: &EnergyParams) -> Vec<Point2> {
    let (p, q) = (params.p, params.q);
    let local: Vec<[Point2; 2]> = tris
        .par_iter()
        .map(|tri| {
            let a = edge(pos, tri) * tri.dm_inv;
            let det = a.det();
            // dW/dA = p|A|^{p-2} A - q det^{-q-1} cof(A)
            let dw = a.scale(p * a.hs_norm_pow(p - 2.0)) - a.cofactor().scale(q * det.powf(-q - 1.0));
            let g = (dw * tri.dm_inv.transpose()).scale(tri.area);
            [g.column(0), g.column(1)]
        })
        .collect();
    let mut grad = vec![Point2::ORIGIN; pos.len()];
    for (tri, [g1, g2]) in tris.iter().zip(local) {
        let [i, j, k] = tri.verts;
        grad[j] = grad[j] + g1;
        grad[k] = grad[k] + g2;
        grad[i] = grad[i] - (g1 + g2);
    }
    grad
}

fn max_norm(v: &[Point2]) -> f64 {
    v.iter().map(|g| g.x.abs().max(g.y.abs())).fold(0.0, f64::max)
}

fn bilinear(mesh: &TriangleMesh, target: Rect) -> Result<Vec<Point2>, MinimizerError> {
    let src = mesh.bounding_rect().ok_or(GeometryError::Parse("empty mesh".into()))?;
    let sx = target.width() / src.width();
    let sy = target.height() / src.height();
    Ok(mesh
        .vertices()
        .iter()
        .zip(mesh.boundary())
        .map(|(v, s)| {
            let mut x = target.xmin + (v.x - src.xmin) * sx;
            let mut y = target.ymin + (v.y - src.ymin) * sy;
            // snap so that the boundary constraint holds exactly
            if s.contains(Sides::LEFT) {
                x = target.xmin;
            }
            if s.contains(Sides::RIGHT) {
                x = target.xmax;
            }
            if s.contains(Sides::BOTTOM) {
                y = target.ymin;
            }
            if s.contains(Sides::TOP) {
                y = target.ymax;
            }
            Point2::new(x, y)
        })
        .collect())
}

fn perturb(mesh: &TriangleMesh, tris: &[TriangleData], pos: &mut [Point2], sigma: f64, seed: u64) -> Result<(), MinimizerError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(MinimizerError::BadConfig(format!("σ must be nonnegative (got {sigma})")));
    }
    let mut incident = vec![Vec::new(); pos.len()];
    for (t, tri) in tris.iter().enumerate() {
        for &v in &tri.verts {
            incident[v].push(t);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in 0..pos.len() {
        if !mesh.boundary()[v].is_empty() || sigma == 0.0 {
            continue;
        }
        let base = pos[v];
        let mut placed = false;
        for _ in 0..1000 {
            pos[v] = base + Point2::new(rng.gen_range(-sigma..=sigma), rng.gen_range(-sigma..=sigma));
            if incident[v].iter().all(|&t| det_of(&edge(pos, &tris[t]), &tris[t].dm_inv) > 0.0) {
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(MinimizerError::Perturbation(v));
        }
    }
    Ok(())
}

/// Builds a feasible starting state; bindings come from where the source
/// boundary vertices sit on `∂target`.
pub fn init_minimizer(mesh: TriangleMesh, target: Rect, initial: Initial, params: &EnergyParams) -> Result<MinimizerState, MinimizerError> {
    let tris = triangle_data(&mesh)?;
    let pos = match initial {
        Initial::Identity => {
            if mesh.bounding_rect() != Some(target) {
                return Err(MinimizerError::IdentityNeedsSameRect);
            }
            mesh.vertices().to_vec()
        }
        Initial::Bilinear => bilinear(&mesh, target)?,
        Initial::Perturb { sigma, seed } => {
            let mut pos = bilinear(&mesh, target)?;
            perturb(&mesh, &tris, &mut pos, sigma, seed)?;
            pos
        }
        Initial::Map(m) => {
            if m.mesh() != &mesh {
                return Err(MinimizerError::BadConfig("initial map lives on a different mesh".into()));
            }
            m.target().to_vec()
        }
    };
    let mut bindings = Vec::with_capacity(pos.len());
    for (v, (p, s)) in pos.iter().zip(mesh.boundary()).enumerate() {
        if s.is_empty() {
            bindings.push(Binding::Free);
            continue;
        }
        let on = target.sides_of(*p);
        if on.is_empty() {
            return Err(MinimizerError::OffBoundary { vertex: v, pos: *p });
        }
        bindings.push(Binding::from_sides(on));
    }
    for (t, tri) in tris.iter().enumerate() {
        let det = det_of(&edge(&pos, tri), &tri.dm_inv);
        if !(det > 0.0) {
            return Err(MinimizerError::InvertedTriangle { triangle: t, det });
        }
    }
    let energy = energy_at(&tris, &pos, params).expect("all Jacobians are positive");
    let map = PLMap::new(mesh, pos)?;
    Ok(MinimizerState { map, target, tris, bindings, iteration: 0, energy_history: vec![energy], last_step: 0.0, previous: None })
}

/// Gradient of the discrete energy in the vertex positions, projected onto
/// the allowed motions.
pub fn energy_gradient(state: &MinimizerState, params: &EnergyParams) -> Vec<Point2> {
    raw_gradient(&state.tris, state.positions(), params)
        .into_iter()
        .zip(&state.bindings)
        .map(|(g, b)| b.project(g))
        .collect()
}

/// Largest step along `dir` that keeps every Jacobian ≥ (1 - τ) of its current
/// value and every sliding vertex a fraction τ of the way to the end of its side.
fn max_feasible_step(state: &MinimizerState, dir: &[Point2], tau: f64) -> f64 {
    let pos = state.positions();
    let tri_cap = state
        .tris
        .par_iter()
        .map(|tri| {
            let ds = edge(pos, tri);
            let dd = edge(dir, tri);
            // det(Ds + α dDs) = det Ds + c1 α + det(dDs) α²
            let a = dd.det();
            let b = ds.cofactor().frobenius_dot(&dd);
            let c = tau * ds.det();
            smallest_positive_root(a, b, c)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let t = state.target;
    let mut side_cap = f64::INFINITY;
    for ((p, d), b) in pos.iter().zip(dir).zip(&state.bindings) {
        let (x, dx, lo, hi) = match b {
            Binding::SlideX => (p.x, d.x, t.xmin, t.xmax),
            Binding::SlideY => (p.y, d.y, t.ymin, t.ymax),
            _ => continue,
        };
        if dx > 0.0 {
            side_cap = side_cap.min(tau * (hi - x) / dx);
        } else if dx < 0.0 {
            side_cap = side_cap.min(tau * (lo - x) / dx);
        }
    }
    tri_cap.min(side_cap)
}

/// Smallest positive root of `a α² + b α + c` with `c > 0`, or ∞.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if a == 0.0 {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    // stable form of the two roots
    let s = disc.sqrt();
    let qv = -0.5 * (b + b.signum() * s);
    let roots = [qv / a, if qv != 0.0 { c / qv } else { f64::INFINITY }];
    roots.into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub step: f64,
    pub energy: f64,
}

const MIN_STEP: f64 = 1e-16;

/// Backtracking line search along `dir` starting from `initial_step`, after
/// the fraction-to-boundary cap. A zero direction leaves the state unchanged.
pub fn line_search_step(
    state: &mut MinimizerState,
    dir: &[Point2],
    grad: &[Point2],
    initial_step: f64,
    cfg: &MinimizerConfig,
) -> Result<StepOutcome, MinimizerError> {
    let e0 = state.energy();
    let slope: f64 = pairwise_sum(&grad.iter().zip(dir).map(|(g, d)| g.dot(*d)).collect::<Vec<_>>());
    if dir.iter().all(|d| *d == Point2::ORIGIN) {
        return Ok(StepOutcome { step: 0.0, energy: e0 });
    }
    let mut step = initial_step.min(max_feasible_step(state, dir, cfg.tau));
    let base = state.positions().to_vec();
    let mut trial = base.clone();
    while step >= MIN_STEP {
        for ((t, b), d) in trial.iter_mut().zip(&base).zip(dir) {
            *t = *b + step * *d;
        }
        if let Some(e) = energy_at(&state.tris, &trial, &cfg.params) {
            if e <= e0 + cfg.armijo * step * slope && e < e0 {
                state.map.set_target(trial)?;
                state.energy_history.push(e);
                return Ok(StepOutcome { step, energy: e });
            }
        }
        step *= cfg.backtrack;
    }
    Err(MinimizerError::Stall { iteration: state.iteration, energy: e0, grad_norm: max_norm(grad) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    pub min_det: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport {
    pub final_energy: f64,
    pub iterations: usize,
    pub min_det: f64,
    pub grad_norm: f64,
    pub converged: bool,
    /// `(2^{p/2} + 1)|X|`, reported when source and target rectangles coincide.
    pub lower_bound: Option<f64>,
    pub history: Vec<IterRecord>,
}

/// Runs projected gradient descent until the projected gradient drops below
/// `grad_tol` or `max_iters` steps were taken. Trial steps use the
/// Barzilai–Borwein length (doubling the last step as a fallback); acceptance
/// is always by the Armijo test.
pub fn minimize(state: &mut MinimizerState, cfg: &MinimizerConfig) -> Result<MinimizeReport, MinimizerError> {
    minimize_with(state, cfg, |_, _| {})
}

/// [`minimize`] with a callback after every accepted step.
pub fn minimize_with<F>(state: &mut MinimizerState, cfg: &MinimizerConfig, mut on_step: F) -> Result<MinimizeReport, MinimizerError>
where
    F: FnMut(&MinimizerState, &IterRecord),
{
    cfg.validate()?;
    let params = &cfg.params;
    let mut history = Vec::new();
    let mut grad = energy_gradient(state, params);
    let mut gnorm = max_norm(&grad);
    let mut min_det = min_det_at(&state.tris, state.positions());
    history.push(IterRecord { iter: state.iteration, energy: state.energy(), min_det, grad_norm: gnorm, step: 0.0 });
    let mut steps = 0;
    while gnorm > cfg.grad_tol && steps < cfg.max_iters {
        let dir: Vec<Point2> = grad.iter().map(|g| -*g).collect();
        let trial = match &state.previous {
            Some((x_prev, g_prev)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for (((x, xp), g), gp) in state.positions().iter().zip(x_prev).zip(&grad).zip(g_prev) {
                    let s = *x - *xp;
                    let y = *g - *gp;
                    ss += s.dot(s);
                    sy += s.dot(y);
                }
                if sy > 0.0 {
                    ss / sy
                } else {
                    2.0 * state.last_step
                }
            }
            None => 1.0 / gnorm.max(1e-300),
        };
        let x_before = state.positions().to_vec();
        let out = line_search_step(state, &dir, &grad, trial, cfg)?;
        state.previous = Some((x_before, grad));
        state.last_step = out.step;
        state.iteration += 1;
        steps += 1;
        min_det = min_det_at(&state.tris, state.positions());
        if min_det < 1e-14 {
            return Err(MinimizerError::BarrierDegenerate { iteration: state.iteration, min_det });
        }
        grad = energy_gradient(state, params);
        gnorm = max_norm(&grad);
        let rec = IterRecord { iter: state.iteration, energy: out.energy, min_det, grad_norm: gnorm, step: out.step };
        on_step(state, &rec);
        history.push(rec);
    }
    let src = state.map.mesh().bounding_rect();
    Ok(MinimizeReport {
        final_energy: state.energy(),
        iterations: steps,
        min_det,
        grad_norm: gnorm,
        converged: gnorm <= cfg.grad_tol,
        lower_bound: (src == Some(state.target)).then(|| identity_energy(state.target.area(), params)),
        history,
    })
}

/// Whether every triangle Jacobian is positive, and the smallest one.
pub fn check_orientation(map: &PLMap) -> (bool, f64) {
    let mesh = map.mesh();
    let min = (0..mesh.triangle_count())
        .map(|t| map.image_area(t) / mesh.triangle_area(t))
        .fold(f64::INFINITY, f64::min);
    (min > 0.0, min)
}
