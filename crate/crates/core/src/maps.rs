//! Closed-form planar maps: the segment-collapsing pinch map on
//! `[-1,1] × [-2,2]`, its extension that is the identity on the whole
//! boundary of `[-1,1] × [-3,3]`, the model map on `S = [-4,4]²`, square
//! rescalings of a model map, disk Möbius maps, and affine maps.
//!
//! For the pinch family only the quadrant `x, y ≥ 0` is written out; the
//! other quadrants follow from `h(-x, y) = (-u, v)` and `h(x, -y) = (u, -v)`.

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{Mat2, Point2, Rect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("point {pt} lies outside the domain {domain}")]
    OutsideDomain { pt: Point2, domain: String },
    #[error("gradient is undefined on the singular line x = 0 (at {0})")]
    SingularLine(Point2),
    #[error("the preimage of (0, 0) is the segment {{0}} x [-1, 1], not a point")]
    CollapsedPreimage,
    #[error("infeasible pinch parameters: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
}

/// Exponents `(a, b)` of the pinch map together with the energy exponents
/// `(p, q)` they were chosen for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl PinchParams {
    /// Validates `a > -1/p`, `b > 1 - 1/p`, `a + b < 1/q`.
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self, MapError> {
        let params = Self::probe(a, b, p, q)?;
        if !(a > -1.0 / p) {
            return Err(MapError::Infeasible(format!("a = {a} ⩽ −1/p = {}", -1.0 / p)));
        }
        if !(b > 1.0 - 1.0 / p) {
            return Err(MapError::Infeasible(format!("b = {b} ⩽ 1 − 1/p = {}", 1.0 - 1.0 / p)));
        }
        if !(a + b < 1.0 / q) {
            return Err(MapError::Infeasible(format!("a + b = {} ⩾ 1/q = {}", a + b, 1.0 / q)));
        }
        Ok(params)
    }

    /// Parameters that only need to define a valid map (`a > -1`, `b > 0`);
    /// used to probe the infeasible side of the energy threshold.
    pub fn probe(a: f64, b: f64, p: f64, q: f64) -> Result<Self, MapError> {
        if !(p > 1.0) || !(q > 0.0) || !p.is_finite() || !q.is_finite() {
            return Err(MapError::InvalidParameter(format!("need p > 1 and q > 0 (got p = {p}, q = {q})")));
        }
        if !(a > -1.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(MapError::InvalidParameter(format!("need a > -1 and b > 0 (got a = {a}, b = {b})")));
        }
        Ok(PinchParams { a, b, p, q })
    }

    pub fn is_feasible(&self) -> bool {
        self.a > -1.0 / self.p && self.b > 1.0 - 1.0 / self.p && self.a + self.b < 1.0 / self.q
    }

    /// Default parameters for `(p, q)`: the feasible-region centroid.
    pub fn default_for(p: f64, q: f64) -> Result<Self, MapError> {
        feasible_params(p, q)?
            .ok_or_else(|| MapError::Infeasible(format!("no pinch parameters exist for p = {p}, q = {q}")))
    }
}

/// The energy threshold `p / (p - 2)` separating the two regimes.
pub fn q_threshold(p: f64) -> f64 {
    p / (p - 2.0)
}

/// A witness `(a, b)` when `q < p/(p-2)`, `None` otherwise.
///
/// The feasible set is the open triangle with vertices `(a0, b0)`,
/// `(1/q - b0, b0)` and `(a0, 1/q - a0)`, where `a0 = -1/p`, `b0 = 1 - 1/p`;
/// the witness is its centroid.
pub fn feasible_params(p: f64, q: f64) -> Result<Option<PinchParams>, MapError> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(MapError::InvalidParameter(format!("need p > 2 (got {p})")));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(MapError::InvalidParameter(format!("need q > 0 (got {q})")));
    }
    if !(q < q_threshold(p)) {
        return Ok(None);
    }
    let a0 = -1.0 / p;
    let b0 = 1.0 - 1.0 / p;
    let slack = 1.0 / q - a0 - b0;
    let params = PinchParams { a: a0 + slack / 3.0, b: b0 + slack / 3.0, p, q };
    debug_assert!(params.is_feasible());
    Ok(Some(params))
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `x |x|^a`, written so that `x = 0` gives 0 for negative `a`.
fn signed_pow(x: f64, e: f64) -> f64 {
    sign(x) * x.abs().powf(e)
}

/// Conjugates a quadrant gradient by `diag(sx, sy)`.
fn reflect(m: Mat2, sx: f64, sy: f64) -> Mat2 {
    let s = sx * sy;
    Mat2::new(m.a11, s * m.a12, s * m.a21, m.a22)
}

fn check_rect(pt: Point2, xmax: f64, ymax: f64) -> Result<(), MapError> {
    if pt.x.abs() <= xmax && pt.y.abs() <= ymax {
        Ok(())
    } else {
        Err(MapError::OutsideDomain { pt, domain: format!("[-{xmax}, {xmax}] x [-{ymax}, {ymax}]") })
    }
}

/// The pinch map `(x|x|^a, v(x, y))`, with `v = y|x|^b` for `|y| ≤ 1` and
/// `v = (2 - |x|^b) y + 2(|x|^b - 1) sign(y)` for `1 ≤ |y| ≤ 2`.
pub fn pinch_eval(pt: Point2, params: &PinchParams) -> Result<Point2, MapError> {
    check_rect(pt, 1.0, 2.0)?;
    Ok(pinch_unchecked(pt, params))
}

fn pinch_unchecked(pt: Point2, params: &PinchParams) -> Point2 {
    let u = signed_pow(pt.x, 1.0 + params.a);
    let xb = pt.x.abs().powf(params.b);
    let ay = pt.y.abs();
    let v = if ay <= 1.0 { pt.y * xb } else { (2.0 - xb) * pt.y + 2.0 * (xb - 1.0) * sign(pt.y) };
    Point2::new(u, v)
}

/// Exact partial derivatives of the pinch map off the line `x = 0`. On the
/// kink line `|y| = 1` the inner case is used.
pub fn pinch_grad(pt: Point2, params: &PinchParams) -> Result<Mat2, MapError> {
    check_rect(pt, 1.0, 2.0)?;
    if pt.x == 0.0 {
        return Err(MapError::SingularLine(pt));
    }
    Ok(pinch_grad_unchecked(pt, params))
}

fn pinch_grad_unchecked(pt: Point2, params: &PinchParams) -> Mat2 {
    let (a, b) = (params.a, params.b);
    let x = pt.x.abs();
    let y = pt.y.abs();
    let ux = (a + 1.0) * x.powf(a);
    let xb = x.powf(b);
    let dxb = b * x.powf(b - 1.0);
    let quadrant = if y <= 1.0 {
        Mat2::new(ux, 0.0, dxb * y, xb)
    } else {
        Mat2::new(ux, 0.0, dxb * (2.0 - y), 2.0 - xb)
    };
    reflect(quadrant, sign(pt.x), sign(pt.y))
}

/// Inverse of the pinch map away from the collapsed point `(0, 0)`.
pub fn pinch_inverse(pt: Point2, params: &PinchParams) -> Result<Point2, MapError> {
    check_rect(pt, 1.0, 2.0)?;
    let (u, v) = (pt.x, pt.y);
    if u == 0.0 && v == 0.0 {
        return Err(MapError::CollapsedPreimage);
    }
    let a1 = 1.0 + params.a;
    let x = signed_pow(u, 1.0 / a1);
    let w = u.abs().powf(params.b / a1);
    let y = if v.abs() <= w {
        v / w
    } else {
        (v + sign(v) * 2.0 * (1.0 - w)) / (2.0 - w)
    };
    Ok(Point2::new(x, y))
}

/// The pinch map extended to `[-1,1] × [-3,3]` so that it is the identity on
/// the boundary: for `2 ≤ |y| ≤ 3` it is `(x|x|^a (3 - |y|) + x(|y| - 2), y)`.
pub fn extend_pinch(pt: Point2, params: &PinchParams) -> Result<Point2, MapError> {
    check_rect(pt, 1.0, 3.0)?;
    Ok(extend_unchecked(pt, params))
}

fn extend_unchecked(pt: Point2, params: &PinchParams) -> Point2 {
    let ay = pt.y.abs();
    if ay <= 2.0 {
        return pinch_unchecked(pt, params);
    }
    let u = signed_pow(pt.x, 1.0 + params.a) * (3.0 - ay) + pt.x * (ay - 2.0);
    Point2::new(u, pt.y)
}

pub fn extend_pinch_grad(pt: Point2, params: &PinchParams) -> Result<Mat2, MapError> {
    check_rect(pt, 1.0, 3.0)?;
    if pt.x == 0.0 {
        return Err(MapError::SingularLine(pt));
    }
    Ok(extend_grad_unchecked(pt, params))
}

fn extend_grad_unchecked(pt: Point2, params: &PinchParams) -> Mat2 {
    let y = pt.y.abs();
    if y <= 2.0 {
        return pinch_grad_unchecked(pt, params);
    }
    let a = params.a;
    let x = pt.x.abs();
    let ux = (a + 1.0) * x.powf(a) * (3.0 - y) + (y - 2.0);
    let uy = x - x.powf(1.0 + a);
    reflect(Mat2::new(ux, uy, 0.0, 1.0), sign(pt.x), sign(pt.y))
}

/// Side length of the model square `S = [-4, 4]²`.
pub const MODEL_SIDE: f64 = 8.0;

/// The non-injective model map on `S`: the extended pinch on
/// `[-1,1] × [-3,3]` and the identity elsewhere.
pub fn model_phi(pt: Point2, params: &PinchParams) -> Result<Point2, MapError> {
    check_rect(pt, 4.0, 4.0)?;
    if pt.x.abs() <= 1.0 && pt.y.abs() <= 3.0 {
        Ok(extend_unchecked(pt, params))
    } else {
        Ok(pt)
    }
}

pub fn model_phi_grad(pt: Point2, params: &PinchParams) -> Result<Mat2, MapError> {
    check_rect(pt, 4.0, 4.0)?;
    if pt.x.abs() <= 1.0 && pt.y.abs() <= 3.0 {
        if pt.x == 0.0 {
            return Err(MapError::SingularLine(pt));
        }
        Ok(extend_grad_unchecked(pt, params))
    } else {
        Ok(Mat2::IDENTITY)
    }
}

fn check_ak(ak: f64) -> Result<(), MapError> {
    if ak > 0.0 && ak < 1.0 {
        Ok(())
    } else {
        Err(MapError::InvalidParameter(format!("Möbius parameter must lie in (0, 1) (got {ak})")))
    }
}

fn check_disk(z: Point2) -> Result<Complex64, MapError> {
    if z.x * z.x + z.y * z.y <= 1.0 {
        Ok(Complex64::new(z.x, z.y))
    } else {
        Err(MapError::OutsideDomain { pt: z, domain: "closed unit disk".into() })
    }
}

/// `(z + a) / (1 + a z)` on the closed unit disk.
pub fn mobius_eval(z: Point2, ak: f64) -> Result<Point2, MapError> {
    check_ak(ak)?;
    let z = check_disk(z)?;
    let w = (z + ak) / (1.0 + ak * z);
    Ok(Point2::new(w.re, w.im))
}

/// Real Jacobian matrix of the Möbius map; conformal, so `|Dh|² = 2 det Dh`.
pub fn mobius_grad(z: Point2, ak: f64) -> Result<Mat2, MapError> {
    check_ak(ak)?;
    let z = check_disk(z)?;
    let d = 1.0 + ak * z;
    let dh = (1.0 - ak * ak) / (d * d);
    Ok(Mat2::new(dh.re, -dh.im, dh.im, dh.re))
}

/// Möbius parameters `a_k = 1 - 2^{-k}`, increasing to 1.
pub fn mobius_sequence(k: u32) -> f64 {
    1.0 - 0.5f64.powi(k as i32)
}

/// Where an analytic map lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Rect(Rect),
    /// Disk of the given radius centered at the origin.
    Disk(f64),
}

impl Domain {
    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Domain::Rect(r) => r.contains(p),
            Domain::Disk(r) => p.x * p.x + p.y * p.y <= r * r,
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match *self {
            Domain::Rect(r) => r,
            Domain::Disk(r) => Rect { xmin: -r, xmax: r, ymin: -r, ymax: r },
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Rect(r) => r.area(),
            Domain::Disk(r) => std::f64::consts::PI * r * r,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Rect(r) => r.diameter(),
            Domain::Disk(r) => 2.0 * r,
        }
    }
}

/// A model map transplanted onto the square `Q` with the given center and side:
/// `h_Q(x) = c + (side / L) Φ((L / side)(x - c))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub inner: AnalyticMap,
    pub inner_side: f64,
    pub center: Point2,
    pub side: f64,
}

impl Rescaled {
    /// Inner coordinate of a point of `Q`.
    pub fn to_inner(&self, x: Point2) -> Point2 {
        (self.inner_side / self.side) * (x - self.center)
    }

    pub fn from_inner(&self, y: Point2) -> Point2 {
        self.center + (self.side / self.inner_side) * y
    }

    pub fn square(&self) -> Rect {
        let h = self.side / 2.0;
        Rect { xmin: self.center.x - h, xmax: self.center.x + h, ymin: self.center.y - h, ymax: self.center.y + h }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticMap {
    Identity(Rect),
    Affine { matrix: Mat2, offset: Point2, domain: Rect },
    Pinch(PinchParams),
    PinchExtension(PinchParams),
    ModelPhi(PinchParams),
    Rescaled(Box<Rescaled>),
    Mobius { ak: f64 },
}

impl AnalyticMap {
    pub fn mobius(ak: f64) -> Result<Self, MapError> {
        check_ak(ak)?;
        Ok(AnalyticMap::Mobius { ak })
    }

    pub fn domain(&self) -> Domain {
        match self {
            AnalyticMap::Identity(r) => Domain::Rect(*r),
            AnalyticMap::Affine { domain, .. } => Domain::Rect(*domain),
            AnalyticMap::Pinch(_) => Domain::Rect(Rect { xmin: -1.0, xmax: 1.0, ymin: -2.0, ymax: 2.0 }),
            AnalyticMap::PinchExtension(_) => Domain::Rect(Rect { xmin: -1.0, xmax: 1.0, ymin: -3.0, ymax: 3.0 }),
            AnalyticMap::ModelPhi(_) => Domain::Rect(Rect { xmin: -4.0, xmax: 4.0, ymin: -4.0, ymax: 4.0 }),
            AnalyticMap::Rescaled(r) => Domain::Rect(r.square()),
            AnalyticMap::Mobius { .. } => Domain::Disk(1.0),
        }
    }

    /// Bounding box of the image; every map here sends its domain into it.
    pub fn codomain_bounds(&self) -> Rect {
        match self {
            AnalyticMap::Affine { matrix, offset, domain } => {
                let corners = [
                    Point2::new(domain.xmin, domain.ymin),
                    Point2::new(domain.xmax, domain.ymin),
                    Point2::new(domain.xmin, domain.ymax),
                    Point2::new(domain.xmax, domain.ymax),
                ]
                .map(|c| matrix.apply(c) + *offset);
                crate::geometry::bounding_rect(&corners).unwrap_or(*domain)
            }
            other => other.domain().bounding_rect(),
        }
    }

    pub fn eval(&self, pt: Point2) -> Result<Point2, MapError> {
        match self {
            AnalyticMap::Identity(r) => {
                check_in(r, pt)?;
                Ok(pt)
            }
            AnalyticMap::Affine { matrix, offset, domain } => {
                check_in(domain, pt)?;
                Ok(matrix.apply(pt) + *offset)
            }
            AnalyticMap::Pinch(p) => pinch_eval(pt, p),
            AnalyticMap::PinchExtension(p) => extend_pinch(pt, p),
            AnalyticMap::ModelPhi(p) => model_phi(pt, p),
            AnalyticMap::Rescaled(r) => {
                check_in(&r.square(), pt)?;
                let y = clamp_to(&r.inner.domain().bounding_rect(), r.to_inner(pt));
                Ok(r.from_inner(r.inner.eval(y)?))
            }
            AnalyticMap::Mobius { ak } => mobius_eval(pt, *ak),
        }
    }

    pub fn gradient(&self, pt: Point2) -> Result<Mat2, MapError> {
        match self {
            AnalyticMap::Identity(r) => {
                check_in(r, pt)?;
                Ok(Mat2::IDENTITY)
            }
            AnalyticMap::Affine { matrix, domain, .. } => {
                check_in(domain, pt)?;
                Ok(*matrix)
            }
            AnalyticMap::Pinch(p) => pinch_grad(pt, p),
            AnalyticMap::PinchExtension(p) => extend_pinch_grad(pt, p),
            AnalyticMap::ModelPhi(p) => model_phi_grad(pt, p),
            // chain rule: the scale factors cancel
            AnalyticMap::Rescaled(r) => {
                check_in(&r.square(), pt)?;
                let y = clamp_to(&r.inner.domain().bounding_rect(), r.to_inner(pt));
                r.inner.gradient(y)
            }
            AnalyticMap::Mobius { ak } => mobius_grad(pt, *ak),
        }
    }

    /// Parses `identity`, `identity:w=..,h=..`, `pinch:a=..,b=..`,
    /// `pinch-ext:a=..,b=..`, `phi[:a=..,b=..]` and `mobius:ak=..`.
    /// Pinch-type parameters are validated against `(p, q)` unless the
    /// `probe` flag is given; `phi` without parameters uses [`PinchParams::default_for`].
    pub fn parse(spec: &str, p: f64, q: f64) -> Result<Self, MapError> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut kv = std::collections::BTreeMap::new();
        let mut probe = false;
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => {
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| MapError::InvalidParameter(format!("`{v}` is not a number in `{spec}`")))?;
                    kv.insert(k.trim().to_string(), v);
                }
                None if item == "probe" => probe = true,
                None => return Err(MapError::InvalidParameter(format!("expected key=value, got `{item}`"))),
            }
        }
        let allowed: &[&str] = match name {
            "identity" => &["w", "h"],
            "pinch" | "pinch-ext" | "phi" => &["a", "b"],
            "mobius" => &["ak"],
            _ => return Err(MapError::UnknownMap(spec.to_string())),
        };
        if let Some(k) = kv.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(MapError::InvalidParameter(format!("unknown key `{k}` for map `{name}`")));
        }
        let pinch = |kv: &std::collections::BTreeMap<String, f64>| -> Result<PinchParams, MapError> {
            match (kv.get("a"), kv.get("b")) {
                (Some(&a), Some(&b)) if probe => PinchParams::probe(a, b, p, q),
                (Some(&a), Some(&b)) => PinchParams::new(a, b, p, q),
                (None, None) => PinchParams::default_for(p, q),
                _ => Err(MapError::InvalidParameter("give both a and b, or neither".into())),
            }
        };
        match name {
            "identity" => {
                let w = kv.get("w").copied().unwrap_or(1.0);
                let h = kv.get("h").copied().unwrap_or(1.0);
                let r = Rect::new(0.0, w, 0.0, h).map_err(|e| MapError::InvalidParameter(e.to_string()))?;
                Ok(AnalyticMap::Identity(r))
            }
            "pinch" => Ok(AnalyticMap::Pinch(pinch(&kv)?)),
            "pinch-ext" => Ok(AnalyticMap::PinchExtension(pinch(&kv)?)),
            "phi" => Ok(AnalyticMap::ModelPhi(pinch(&kv)?)),
            _ => {
                let ak = *kv.get("ak").ok_or_else(|| MapError::InvalidParameter("mobius needs ak".into()))?;
                AnalyticMap::mobius(ak)
            }
        }
    }
}

fn check_in(r: &Rect, pt: Point2) -> Result<(), MapError> {
    if r.contains(pt) {
        Ok(())
    } else {
        Err(MapError::OutsideDomain {
            pt,
            domain: format!("[{}, {}] x [{}, {}]", r.xmin, r.xmax, r.ymin, r.ymax),
        })
    }
}

// The affine change of variables can push a point of ∂Q a rounding error
// outside the inner square.
fn clamp_to(r: &Rect, p: Point2) -> Point2 {
    Point2::new(p.x.clamp(r.xmin, r.xmax), p.y.clamp(r.ymin, r.ymax))
}

/// Transplants `inner` (defined on a centered square, fixing the origin) onto
/// the square with the given center and side.
pub fn rescale_map(inner: AnalyticMap, center: Point2, side: f64) -> Result<AnalyticMap, MapError> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(MapError::InvalidParameter(format!("square side must be positive (got {side})")));
    }
    let r = match inner.domain() {
        Domain::Rect(r) if r.xmin == -r.xmax && r.ymin == -r.ymax && r.width() == r.height() => r,
        _ => return Err(MapError::InvalidParameter("inner map must live on a square centered at 0".into())),
    };
    if inner.eval(Point2::ORIGIN)? != Point2::ORIGIN {
        return Err(MapError::InvalidParameter("inner map must fix the origin".into()));
    }
    Ok(AnalyticMap::Rescaled(Box::new(Rescaled { inner, inner_side: r.width(), center, side })))
}
