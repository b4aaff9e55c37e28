//! The cornersquare construction of a fat Cantor set and the branch map that
//! glues a rescaled model map into every removed centersquare.
//!
//! Squares are stored by their bounds so that cornersquares share the parent's
//! edges bit for bit.

use thiserror::Error;

use crate::geometry::{Mat2, Point2, Rect};
use crate::maps::{model_phi, model_phi_grad, MapError, PinchParams, MODEL_SIDE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CantorError {
    #[error("ε must lie in (0, 1) (got {0})")]
    BadEpsilon(f64),
    #[error("depth {depth} exceeds the configured maximum {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("point {0} lies outside the base square")]
    OutsideBase(Point2),
    #[error("squares {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("square {0} is not inside the domain")]
    NotInDomain(usize),
    #[error("ε sequence is not summable; partial product {partial:.6e} after {terms} terms may tend to 0")]
    NonSummable { partial: f64, terms: usize },
    #[error("tolerance must be positive (got {0})")]
    BadTolerance(f64),
    #[error("invalid ε rule: {0}")]
    BadRule(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// How `ε_k` depends on the generation `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsRule {
    /// `ε_k = base^{-k}`.
    Geometric { base: f64 },
    /// `ε_k = c` for every `k`.
    Constant(f64),
    /// `ε_k = c / k`.
    Harmonic(f64),
    /// The listed values, then 0.
    Explicit(Vec<f64>),
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::Geometric { base: 4.0 }
    }
}

impl EpsRule {
    pub fn eps(&self, k: usize) -> f64 {
        assert!(k >= 1, "generations are numbered from 1");
        match self {
            EpsRule::Geometric { base } => base.powi(-(k as i32)),
            EpsRule::Constant(c) => *c,
            EpsRule::Harmonic(c) => c / k as f64,
            EpsRule::Explicit(v) => v.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn is_summable(&self) -> bool {
        match self {
            EpsRule::Geometric { .. } | EpsRule::Explicit(_) => true,
            EpsRule::Constant(c) | EpsRule::Harmonic(c) => *c == 0.0,
        }
    }

    fn validate(&self) -> Result<(), CantorError> {
        let ok = |e: f64| (0.0..1.0).contains(&e);
        match self {
            EpsRule::Geometric { base } if !(*base > 1.0) || !base.is_finite() => {
                Err(CantorError::BadRule(format!("geometric base must exceed 1 (got {base})")))
            }
            EpsRule::Constant(c) | EpsRule::Harmonic(c) if !ok(*c) => Err(CantorError::BadEpsilon(*c)),
            EpsRule::Explicit(v) => match v.iter().find(|e| !ok(**e)) {
                Some(e) => Err(CantorError::BadEpsilon(*e)),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Parses `geometric:4`, `constant:0.1`, `harmonic:0.5` or `explicit:0.25,0.1`.
    pub fn parse(s: &str) -> Result<Self, CantorError> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| CantorError::BadRule(format!("`{t}` is not a number")));
        let rule = match name {
            "geometric" => EpsRule::Geometric { base: if arg.is_empty() { 4.0 } else { num(arg)? } },
            "constant" => EpsRule::Constant(num(arg)?),
            "harmonic" => EpsRule::Harmonic(num(arg)?),
            "explicit" => EpsRule::Explicit(arg.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<_, _>>()?),
            _ => return Err(CantorError::BadRule(format!("unknown rule `{s}`"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CantorConfig {
    pub eps: EpsRule,
    pub base: Rect,
    pub max_depth: usize,
}

impl Default for CantorConfig {
    fn default() -> Self {
        CantorConfig { eps: EpsRule::default(), base: Rect::unit_square(), max_depth: 8 }
    }
}

impl CantorConfig {
    pub fn new(eps: EpsRule, base: Rect, max_depth: usize) -> Result<Self, CantorError> {
        eps.validate()?;
        if base.width() != base.height() {
            return Err(CantorError::BadRule("the base region must be a square".into()));
        }
        Ok(CantorConfig { eps, base, max_depth })
    }

    fn check_depth(&self, depth: usize) -> Result<(), CantorError> {
        if depth > self.max_depth {
            Err(CantorError::DepthExceeded { depth, max: self.max_depth })
        } else {
            Ok(())
        }
    }
}

/// Which corner of its parent a cornersquare occupies, as `(sign x, sign y)`.
pub type Corner = (i8, i8);

#[derive(Debug, Clone, PartialEq)]
pub struct Square {
    pub bounds: Rect,
    /// Corner choices from the base square down to this one.
    pub multi_index: Vec<Corner>,
}

impl Square {
    pub fn new(bounds: Rect) -> Self {
        Square { bounds, multi_index: Vec::new() }
    }

    pub fn side(&self) -> f64 {
        self.bounds.width()
    }

    pub fn center(&self) -> Point2 {
        self.bounds.center()
    }

    pub fn area(&self) -> f64 {
        self.bounds.area()
    }

    pub fn depth(&self) -> usize {
        self.multi_index.len()
    }

    /// The multi-index as a string such as `+-,++`.
    pub fn index_string(&self) -> String {
        let s = |v: i8| if v > 0 { '+' } else { '-' };
        self.multi_index.iter().map(|&(a, b)| format!("{}{}", s(a), s(b))).collect::<Vec<_>>().join(",")
    }

    /// Whether the interiors of two squares intersect.
    pub fn overlaps(&self, other: &Square) -> bool {
        let (a, b) = (&self.bounds, &other.bounds);
        a.xmin < b.xmax && b.xmin < a.xmax && a.ymin < b.ymax && b.ymin < a.ymax
    }

    pub fn contains_square(&self, other: &Square) -> bool {
        let (a, b) = (&self.bounds, &other.bounds);
        a.xmin <= b.xmin && b.xmax <= a.xmax && a.ymin <= b.ymin && b.ymax <= a.ymax
    }
}

fn split(q: &Square, eps: f64) -> ([Square; 4], Square) {
    let r = q.bounds;
    let s = 0.5 * (1.0 - eps) * q.side();
    let c = r.center();
    let h = 0.5 * eps * q.side();
    let corner = |sx: i8, sy: i8| {
        let (xmin, xmax) = if sx > 0 { (r.xmax - s, r.xmax) } else { (r.xmin, r.xmin + s) };
        let (ymin, ymax) = if sy > 0 { (r.ymax - s, r.ymax) } else { (r.ymin, r.ymin + s) };
        let mut multi_index = q.multi_index.clone();
        multi_index.push((sx, sy));
        Square { bounds: Rect { xmin, xmax, ymin, ymax }, multi_index }
    };
    let center = Square {
        bounds: Rect { xmin: c.x - h, xmax: c.x + h, ymin: c.y - h, ymax: c.y + h },
        multi_index: q.multi_index.clone(),
    };
    ([corner(1, 1), corner(-1, 1), corner(-1, -1), corner(1, -1)], center)
}

/// The four cornersquares of `q` (ordered `++, -+, --, +-`) and its centersquare.
pub fn cornersquares(q: &Square, eps: f64) -> Result<([Square; 4], Square), CantorError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CantorError::BadEpsilon(eps));
    }
    Ok(split(q, eps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareFamily {
    pub generation: usize,
    pub squares: Vec<Square>,
}

impl SquareFamily {
    pub fn total_area(&self) -> f64 {
        crate::reduce::pairwise_sum(&self.squares.iter().map(Square::area).collect::<Vec<_>>())
    }

    /// Side of the squares; all squares of one generation are congruent.
    pub fn side(&self) -> f64 {
        self.squares.first().map_or(0.0, Square::side)
    }
}

/// The generation `ℱ_n` of cornersquares.
pub fn generation(n: usize, cfg: &CantorConfig) -> Result<SquareFamily, CantorError> {
    cfg.check_depth(n)?;
    let mut squares = vec![Square::new(cfg.base)];
    for k in 1..=n {
        let eps = cfg.eps.eps(k);
        squares = squares.iter().flat_map(|q| split(q, eps).0).collect();
    }
    Ok(SquareFamily { generation: n, squares })
}

/// `Π_{k≤n} (1 - ε_k)²`.
pub fn area_fraction(n: usize, eps: &EpsRule) -> f64 {
    (1..=n).map(|k| (1.0 - eps.eps(k)).powi(2)).product()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureEstimate {
    pub value: f64,
    pub terms: usize,
}

const MAX_TERMS: usize = 1_000_000;

/// `|ℚ| Π (1 - ε_k)²`, with factors added until the product moves by less than `tol`.
pub fn cantor_measure(cfg: &CantorConfig, tol: f64) -> Result<MeasureEstimate, CantorError> {
    if !(tol > 0.0) {
        return Err(CantorError::BadTolerance(tol));
    }
    let area = cfg.base.area();
    let mut prod = 1.0;
    let mut k = 0;
    loop {
        k += 1;
        let next = prod * (1.0 - cfg.eps.eps(k)).powi(2);
        let step = (prod - next) * area;
        prod = next;
        if step < tol || k >= MAX_TERMS {
            break;
        }
    }
    if !cfg.eps.is_summable() {
        return Err(CantorError::NonSummable { partial: prod * area, terms: k });
    }
    Ok(MeasureEstimate { value: prod * area, terms: k })
}

/// All centersquares of generations `1..=n`; generation `k` holds one
/// centersquare per square of `ℱ_{k-1}`. Centersquares of zero size
/// (`ε_k = 0`) are left out.
pub fn centersquares_up_to(n: usize, cfg: &CantorConfig) -> Result<Vec<Square>, CantorError> {
    cfg.check_depth(n)?;
    let mut out = Vec::new();
    let mut parents = vec![Square::new(cfg.base)];
    for k in 1..=n {
        let eps = cfg.eps.eps(k);
        let mut next = Vec::with_capacity(4 * parents.len());
        for q in &parents {
            let (corners, center) = split(q, eps);
            if eps > 0.0 {
                out.push(center);
            }
            next.extend(corners);
        }
        parents = next;
    }
    Ok(out)
}

/// Half-open membership `[min, max)`, closed at the top where the square
/// shares that edge with the base region.
fn in_half_open(v: f64, min: f64, max: f64, outer_max: f64) -> bool {
    v >= min && (v < max || (max == outer_max && v == max))
}

/// `c + (ℓ / L) Φ((L / ℓ)(x - c))` for the square with the given bounds.
fn glued_eval(r: &Rect, pt: Point2, params: &PinchParams) -> Result<Point2, MapError> {
    let c = r.center();
    let ell = r.width();
    let y = (MODEL_SIDE / ell) * (pt - c);
    let h = MODEL_SIDE / 2.0;
    let y = Point2::new(y.x.clamp(-h, h), y.y.clamp(-h, h));
    Ok(c + (ell / MODEL_SIDE) * model_phi(y, params)?)
}

fn glued_grad(r: &Rect, pt: Point2, params: &PinchParams) -> Result<Mat2, MapError> {
    let y = (MODEL_SIDE / r.width()) * (pt - r.center());
    let h = MODEL_SIDE / 2.0;
    model_phi_grad(Point2::new(y.x.clamp(-h, h), y.y.clamp(-h, h)), params)
}

/// Where a point sits in the construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Location {
    /// Inside the centersquare of generation `generation`.
    Center { generation: usize, square: Rect },
    /// In the part of a cornersquare's parent outside all five pieces.
    Frame { generation: usize },
    /// In a square of `ℱ_depth`, so never reached by a centersquare.
    Remainder,
}

/// The branch map: a rescaled model map in every centersquare up to `depth`,
/// the identity elsewhere.
#[derive(Debug, Clone)]
pub struct CantorMap {
    cfg: CantorConfig,
    params: PinchParams,
    depth: usize,
}

impl CantorMap {
    pub fn new(cfg: CantorConfig, params: PinchParams, depth: usize) -> Result<Self, CantorError> {
        cfg.check_depth(depth)?;
        Ok(CantorMap { cfg, params, depth })
    }

    pub fn config(&self) -> &CantorConfig {
        &self.cfg
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn params(&self) -> &PinchParams {
        &self.params
    }

    pub fn locate(&self, pt: Point2) -> Result<Location, CantorError> {
        let base = self.cfg.base;
        if !base.contains(pt) {
            return Err(CantorError::OutsideBase(pt));
        }
        let mut r = base;
        for k in 1..=self.depth {
            let eps = self.cfg.eps.eps(k);
            let side = r.width();
            let c = r.center();
            let h = 0.5 * eps * side;
            let center = Rect { xmin: c.x - h, xmax: c.x + h, ymin: c.y - h, ymax: c.y + h };
            if eps > 0.0 && pt.x >= center.xmin && pt.x < center.xmax && pt.y >= center.ymin && pt.y < center.ymax {
                return Ok(Location::Center { generation: k, square: center });
            }
            let s = 0.5 * (1.0 - eps) * side;
            let pick = |v: f64, lo: f64, hi: f64, outer: f64| -> Option<(f64, f64)> {
                if in_half_open(v, lo, lo + s, outer) {
                    Some((lo, lo + s))
                } else if in_half_open(v, hi - s, hi, outer) {
                    Some((hi - s, hi))
                } else {
                    None
                }
            };
            match (pick(pt.x, r.xmin, r.xmax, base.xmax), pick(pt.y, r.ymin, r.ymax, base.ymax)) {
                (Some((xmin, xmax)), Some((ymin, ymax))) => r = Rect { xmin, xmax, ymin, ymax },
                _ => return Ok(Location::Frame { generation: k }),
            }
        }
        Ok(Location::Remainder)
    }

    pub fn eval(&self, pt: Point2) -> Result<Point2, CantorError> {
        match self.locate(pt)? {
            Location::Center { square, .. } => Ok(glued_eval(&square, pt, &self.params)?),
            _ => Ok(pt),
        }
    }

    pub fn gradient(&self, pt: Point2) -> Result<Mat2, CantorError> {
        match self.locate(pt)? {
            Location::Center { square, .. } => Ok(glued_grad(&square, pt, &self.params)?),
            _ => Ok(Mat2::IDENTITY),
        }
    }
}

/// The branch map for an arbitrary family of disjoint squares.
#[derive(Debug, Clone)]
pub struct BranchMap {
    squares: Vec<Square>,
    params: PinchParams,
}

impl BranchMap {
    /// Rejects families whose interiors overlap, or that leave `domain`.
    pub fn new(squares: Vec<Square>, domain: Option<Rect>, params: PinchParams) -> Result<Self, CantorError> {
        if let Some(d) = domain {
            let outer = Square::new(d);
            if let Some(i) = squares.iter().position(|q| !outer.contains_square(q)) {
                return Err(CantorError::NotInDomain(i));
            }
        }
        let mut order: Vec<usize> = (0..squares.len()).collect();
        order.sort_by(|&i, &j| squares[i].bounds.xmin.total_cmp(&squares[j].bounds.xmin));
        for (n, &i) in order.iter().enumerate() {
            for &j in &order[n + 1..] {
                if squares[j].bounds.xmin >= squares[i].bounds.xmax {
                    break;
                }
                if squares[i].overlaps(&squares[j]) {
                    return Err(CantorError::Overlap(i.min(j), i.max(j)));
                }
            }
        }
        Ok(BranchMap { squares, params })
    }

    pub fn squares(&self) -> &[Square] {
        &self.squares
    }

    fn find(&self, pt: Point2) -> Option<&Square> {
        // on a shared edge both candidates act as the identity, so the first match is fine
        self.squares.iter().find(|q| q.bounds.contains(pt))
    }

    pub fn eval(&self, pt: Point2) -> Result<Point2, CantorError> {
        match self.find(pt) {
            Some(q) => Ok(glued_eval(&q.bounds, pt, &self.params)?),
            None => Ok(pt),
        }
    }

    pub fn gradient(&self, pt: Point2) -> Result<Mat2, CantorError> {
        match self.find(pt) {
            Some(q) => Ok(glued_grad(&q.bounds, pt, &self.params)?),
            None => Ok(Mat2::IDENTITY),
        }
    }

    pub fn total_square_area(&self) -> f64 {
        crate::reduce::pairwise_sum(&self.squares.iter().map(Square::area).collect::<Vec<_>>())
    }
}

/// One-shot form of [`BranchMap::eval`].
pub fn general_branch_map(squares: &[Square], pt: Point2, params: &PinchParams) -> Result<Point2, CantorError> {
    BranchMap::new(squares.to_vec(), None, *params)?.eval(pt)
}
