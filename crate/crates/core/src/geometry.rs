//! Planar kinematics: points, 2×2 deformation gradients, rectangles,
//! structured triangle meshes and piecewise-affine maps on them.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rectangle must satisfy xmin < xmax and ymin < ymax (got [{xmin}, {xmax}] x [{ymin}, {ymax}])")]
    DegenerateRect { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    #[error("subdivision counts must be at least 1 (got {nx} x {ny})")]
    ZeroSubdivision { nx: usize, ny: usize },
    #[error("source triangle {0} is degenerate or clockwise")]
    DegenerateTriangle(usize),
    #[error("triangle {tri} references vertex {index} but the mesh has {count} vertices")]
    BadIndex { tri: usize, index: usize, count: usize },
    #[error("target has {got} positions for {expected} vertices")]
    TargetLength { expected: usize, got: usize },
    #[error("determinant must be positive (got {0})")]
    NonPositiveDeterminant(f64),
    #[error("mesh file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

/// A 2×2 matrix, used throughout for deformation gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Mat2::new(d1, 0.0, 0.0, d2)
    }

    /// Matrix with the given vectors as columns.
    pub const fn from_columns(c1: Point2, c2: Point2) -> Self {
        Mat2::new(c1.x, c2.x, c1.y, c2.y)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// The Jacobian determinant `a11 a22 - a12 a21`.
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Squared Hilbert–Schmidt (Frobenius) norm.
    pub fn hs_norm_sq(&self) -> f64 {
        self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    /// Frobenius inner product `tr(Aᵀ B)`.
    /// `|A|^p`, computed from `|A|²` so that even powers stay exact.
    pub fn hs_norm_pow(&self, p: f64) -> f64 {
        self.hs_norm_sq().powf(0.5 * p)
    }

    pub fn frobenius_dot(&self, o: &Mat2) -> f64 {
        self.a11 * o.a11 + self.a12 * o.a12 + self.a21 * o.a21 + self.a22 * o.a22
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// Cofactor matrix, the derivative of `det` with respect to the entries.
    pub fn cofactor(&self) -> Mat2 {
        Mat2::new(self.a22, -self.a21, -self.a12, self.a11)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d))
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        Point2::new(self.a11 * p.x + self.a12 * p.y, self.a21 * p.x + self.a22 * p.y)
    }

    pub fn column(&self, j: usize) -> Point2 {
        match j {
            0 => Point2::new(self.a11, self.a21),
            _ => Point2::new(self.a12, self.a22),
        }
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(s * self.a11, s * self.a12, s * self.a21, s * self.a22)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (self.a11 - o.a11)
            .abs()
            .max((self.a12 - o.a12).abs())
            .max((self.a21 - o.a21).abs())
            .max((self.a22 - o.a22).abs())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

pub fn jacobian(a: &Mat2) -> f64 {
    a.det()
}

pub fn hs_norm(a: &Mat2) -> f64 {
    a.hs_norm()
}

/// Distortion `|A|² / (2 det A)`; at least 1 by Hadamard's inequality.
pub fn distortion(a: &Mat2) -> Result<f64, GeometryError> {
    let d = a.det();
    if !(d > 0.0) {
        return Err(GeometryError::NonPositiveDeterminant(d));
    }
    Ok(a.hs_norm_sq() / (2.0 * d))
}

/// Signed area of the triangle `(p0, p1, p2)`, positive when counterclockwise.
pub fn signed_area(p0: Point2, p1: Point2, p2: Point2) -> f64 {
    0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y))
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self, GeometryError> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::DegenerateRect { xmin, xmax, ymin, ymax });
        }
        Ok(Rect { xmin, xmax, ymin, ymax })
    }

    pub fn unit_square() -> Self {
        Rect { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 }
    }

    /// Centered square of the given side length.
    pub fn centered_square(side: f64) -> Result<Self, GeometryError> {
        Rect::new(-side / 2.0, side / 2.0, -side / 2.0, side / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Closed containment.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// Sides of the rectangle the point lies on, compared exactly.
    pub fn sides_of(&self, p: Point2) -> Sides {
        let mut s = Sides::NONE;
        if self.contains(p) {
            if p.x == self.xmin {
                s = s | Sides::LEFT;
            }
            if p.x == self.xmax {
                s = s | Sides::RIGHT;
            }
            if p.y == self.ymin {
                s = s | Sides::BOTTOM;
            }
            if p.y == self.ymax {
                s = s | Sides::TOP;
            }
        }
        s
    }
}

/// Set of rectangle sides a boundary vertex belongs to; corners carry two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Sides(u8);

impl Sides {
    pub const NONE: Sides = Sides(0);
    pub const LEFT: Sides = Sides(1);
    pub const RIGHT: Sides = Sides(2);
    pub const BOTTOM: Sides = Sides(4);
    pub const TOP: Sides = Sides(8);

    pub fn from_bits(bits: u8) -> Option<Sides> {
        (bits < 16).then_some(Sides(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, other: Sides) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_corner(self) -> bool {
        let vertical = self.0 & (Self::LEFT.0 | Self::RIGHT.0) != 0;
        let horizontal = self.0 & (Self::BOTTOM.0 | Self::TOP.0) != 0;
        vertical && horizontal
    }
}

impl std::ops::BitOr for Sides {
    type Output = Sides;
    fn bitor(self, o: Sides) -> Sides {
        Sides(self.0 | o.0)
    }
}

/// Triangulated planar domain. Triangles are counterclockwise vertex triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<Sides>,
    /// Grid dimensions when built by [`make_rect_mesh`].
    grid: Option<(usize, usize)>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<Sides>,
    ) -> Result<Self, GeometryError> {
        if boundary.len() != vertices.len() {
            return Err(GeometryError::Parse(format!(
                "{} boundary flags for {} vertices",
                boundary.len(),
                vertices.len()
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(GeometryError::BadIndex { tri: t, index: i, count: vertices.len() });
                }
            }
            let [i, j, k] = *tri;
            if !(signed_area(vertices[i], vertices[j], vertices[k]) > 0.0) {
                return Err(GeometryError::DegenerateTriangle(t));
            }
        }
        Ok(TriangleMesh { vertices, triangles, boundary, grid: None })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[Sides] {
        &self.boundary
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// `(nx, ny)` when the mesh is the structured grid of [`make_rect_mesh`].
    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        signed_area(self.vertices[i], self.vertices[j], self.vertices[k])
    }

    pub fn total_area(&self) -> f64 {
        crate::reduce::pairwise_sum(
            &(0..self.triangles.len()).map(|t| self.triangle_area(t)).collect::<Vec<_>>(),
        )
    }

    pub fn bounding_rect(&self) -> Option<Rect> {
        bounding_rect(&self.vertices)
    }

    /// Edge matrix `[p1 - p0, p2 - p0]` of a source triangle.
    pub fn edge_matrix(&self, t: usize) -> Mat2 {
        let [i, j, k] = self.triangles[t];
        let p0 = self.vertices[i];
        Mat2::from_columns(self.vertices[j] - p0, self.vertices[k] - p0)
    }

    /// Writes `NV NT`, then `x y flag` per vertex and `i j k` per triangle,
    /// with 17 significant digits so the file reads back bit-exactly.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GeometryError> {
        self.write_positions(&mut w, &self.vertices)
    }

    pub(crate) fn write_positions<W: Write>(&self, mut w: W, positions: &[Point2]) -> Result<(), GeometryError> {
        writeln!(w, "{} {}", positions.len(), self.triangles.len())?;
        for (p, s) in positions.iter().zip(&self.boundary) {
            writeln!(w, "{:.16e} {:.16e} {}", p.x, p.y, s.bits())?;
        }
        for [i, j, k] in &self.triangles {
            writeln!(w, "{i} {j} {k}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, GeometryError> {
        let mut lines = r.lines();
        let mut next = || -> Result<String, GeometryError> {
            lines
                .next()
                .ok_or_else(|| GeometryError::Parse("unexpected end of file".into()))?
                .map_err(GeometryError::from)
        };
        let header = next()?;
        let (nv, nt) = parse_pair::<usize>(&header)?;
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(GeometryError::Parse(format!("expected `x y flag`, got `{line}`")));
            }
            let x = parse_num::<f64>(f[0])?;
            let y = parse_num::<f64>(f[1])?;
            let bits = parse_num::<u8>(f[2])?;
            vertices.push(Point2::new(x, y));
            boundary.push(
                Sides::from_bits(bits).ok_or_else(|| GeometryError::Parse(format!("bad side flag {bits}")))?,
            );
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = next()?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(GeometryError::Parse(format!("expected `i j k`, got `{line}`")));
            }
            triangles.push([parse_num(f[0])?, parse_num(f[1])?, parse_num(f[2])?]);
        }
        TriangleMesh::new(vertices, triangles, boundary)
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, GeometryError> {
    s.parse().map_err(|_| GeometryError::Parse(format!("cannot parse `{s}`")))
}

fn parse_pair<T: std::str::FromStr>(line: &str) -> Result<(T, T), GeometryError> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 2 {
        return Err(GeometryError::Parse(format!("expected `NV NT`, got `{line}`")));
    }
    Ok((parse_num(f[0])?, parse_num(f[1])?))
}

pub fn bounding_rect(points: &[Point2]) -> Option<Rect> {
    let mut it = points.iter();
    let first = it.next()?;
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    for p in it {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    Rect::new(x0, x1, y0, y1).ok()
}

/// Structured triangulation of `rect` with `nx × ny` cells, each split along
/// the lower-left to upper-right diagonal. Vertex `(i, j)` has index
/// `j * (nx + 1) + i`.
pub fn make_rect_mesh(rect: Rect, nx: usize, ny: usize) -> Result<TriangleMesh, GeometryError> {
    if nx == 0 || ny == 0 {
        return Err(GeometryError::ZeroSubdivision { nx, ny });
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // end points are assigned exactly so boundary tests are exact
            let x = if i == nx { rect.xmax } else { rect.xmin + rect.width() * (i as f64 / nx as f64) };
            let y = if j == ny { rect.ymax } else { rect.ymin + rect.height() * (j as f64 / ny as f64) };
            vertices.push(Point2::new(x, y));
            let mut s = Sides::NONE;
            if i == 0 {
                s = s | Sides::LEFT;
            }
            if i == nx {
                s = s | Sides::RIGHT;
            }
            if j == 0 {
                s = s | Sides::BOTTOM;
            }
            if j == ny {
                s = s | Sides::TOP;
            }
            boundary.push(s);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = TriangleMesh::new(vertices, triangles, boundary)?;
    mesh.grid = Some((nx, ny));
    Ok(mesh)
}

/// Piecewise-affine map: a mesh plus one target position per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PLMap {
    mesh: TriangleMesh,
    target: Vec<Point2>,
}

impl PLMap {
    pub fn new(mesh: TriangleMesh, target: Vec<Point2>) -> Result<Self, GeometryError> {
        if target.len() != mesh.vertex_count() {
            return Err(GeometryError::TargetLength { expected: mesh.vertex_count(), got: target.len() });
        }
        Ok(PLMap { mesh, target })
    }

    pub fn identity(mesh: TriangleMesh) -> Self {
        let target = mesh.vertices().to_vec();
        PLMap { mesh, target }
    }

    /// Target positions `A x + b` for every vertex.
    pub fn affine(mesh: TriangleMesh, a: Mat2, b: Point2) -> Self {
        let target = mesh.vertices().iter().map(|&p| a.apply(p) + b).collect();
        PLMap { mesh, target }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn target(&self) -> &[Point2] {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut [Point2] {
        &mut self.target
    }

    pub fn set_target(&mut self, target: Vec<Point2>) -> Result<(), GeometryError> {
        if target.len() != self.target.len() {
            return Err(GeometryError::TargetLength { expected: self.target.len(), got: target.len() });
        }
        self.target = target;
        Ok(())
    }

    /// Signed area of the image of triangle `t`.
    pub fn image_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.mesh.triangles()[t];
        signed_area(self.target[i], self.target[j], self.target[k])
    }

    /// Constant deformation gradient of the affine piece on triangle `t`.
    pub fn gradient(&self, t: usize) -> Result<Mat2, GeometryError> {
        affine_gradient(&self.mesh, &self.target, t)
    }

    /// `true` iff every triangle image has strictly positive signed area.
    pub fn is_orientation_preserving(&self) -> bool {
        (0..self.mesh.triangle_count()).all(|t| self.image_area(t) > 0.0)
    }

    /// Writes the deformed mesh in the mesh file format.
    pub fn write_deformed<W: Write>(&self, w: W) -> Result<(), GeometryError> {
        self.mesh.write_positions(w, &self.target)
    }
}

/// Gradient of the unique affine map sending source triangle `t` onto the
/// triangle spanned by the corresponding `target` positions.
pub fn affine_gradient(mesh: &TriangleMesh, target: &[Point2], t: usize) -> Result<Mat2, GeometryError> {
    let dm_inv = mesh.edge_matrix(t).inverse().ok_or(GeometryError::DegenerateTriangle(t))?;
    let [i, j, k] = mesh.triangles()[t];
    let q0 = target[i];
    let ds = Mat2::from_columns(target[j] - q0, target[k] - q0);
    Ok(ds * dm_inv)
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rect_mesh_counts_and_area() {
        let m = make_rect_mesh(Rect::unit_square(), 1, 1).unwrap();
        assert_eq!((m.triangle_count(), m.vertex_count()), (2, 4));
        assert_relative_eq!(m.total_area(), 1.0, max_relative = 1e-12);

        let m = make_rect_mesh(Rect::unit_square(), 16, 16).unwrap();
        assert_eq!((m.triangle_count(), m.vertex_count()), (512, 289));

        let big = Rect::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        let m = make_rect_mesh(big, 8, 16).unwrap();
        assert!((m.total_area() - 8.0).abs() <= 8.0 * 1e-12);
        assert!((0..m.triangle_count()).all(|t| m.triangle_area(t) > 0.0));
    }

    #[test]
    fn zero_subdivision_rejected() {
        assert!(matches!(
            make_rect_mesh(Rect::unit_square(), 0, 3),
            Err(GeometryError::ZeroSubdivision { .. })
        ));
    }

    #[test]
    fn boundary_flags_on_grid() {
        let m = make_rect_mesh(Rect::unit_square(), 3, 2).unwrap();
        let b = m.boundary();
        assert!(b[0].contains(Sides::LEFT) && b[0].contains(Sides::BOTTOM) && b[0].is_corner());
        assert_eq!(b[1], Sides::BOTTOM);
        assert_eq!(b[3], Sides::RIGHT | Sides::BOTTOM);
        assert_eq!(b[4], Sides::LEFT);
        assert!(b[5].is_empty());
        assert_eq!(b[11], Sides::TOP | Sides::RIGHT);
        let rect = Rect::unit_square();
        for (p, s) in m.vertices().iter().zip(b) {
            assert_eq!(rect.sides_of(*p), *s);
        }
    }

    #[test]
    fn affine_gradient_examples() {
        let mesh = make_rect_mesh(Rect::unit_square(), 2, 2).unwrap();
        let id = PLMap::identity(mesh.clone());
        let scaled = PLMap::affine(mesh.clone(), Mat2::diag(2.0, 2.0), Point2::ORIGIN);
        let rot = PLMap::affine(mesh.clone(), Mat2::new(0.0, -1.0, 1.0, 0.0), Point2::new(3.0, 0.0));
        for t in 0..mesh.triangle_count() {
            assert!(id.gradient(t).unwrap().max_abs_diff(&Mat2::IDENTITY) < 1e-15);
            assert!(scaled.gradient(t).unwrap().max_abs_diff(&Mat2::diag(2.0, 2.0)) < 1e-14);
            let g = rot.gradient(t).unwrap();
            assert!(g.max_abs_diff(&Mat2::new(0.0, -1.0, 1.0, 0.0)) < 1e-14);
            assert_relative_eq!(g.det(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobian_norm_distortion_examples() {
        assert_eq!(jacobian(&Mat2::IDENTITY), 1.0);
        assert_relative_eq!(hs_norm(&Mat2::IDENTITY), 2f64.sqrt());
        let d = Mat2::diag(2.0, 0.5);
        assert_eq!(jacobian(&d), 1.0);
        assert_relative_eq!(hs_norm(&d), 4.25f64.sqrt());
        assert_eq!(jacobian(&Mat2::new(1.0, 2.0, 2.0, 4.0)), 0.0);

        assert_eq!(distortion(&Mat2::IDENTITY).unwrap(), 1.0);
        assert_relative_eq!(distortion(&d).unwrap(), 2.125);
        assert_relative_eq!(distortion(&Mat2::rotation(0.7)).unwrap(), 1.0, epsilon = 1e-15);
        assert!(distortion(&Mat2::diag(1.0, -1.0)).is_err());
        assert!(distortion(&Mat2::ZERO).is_err());
    }

    #[test]
    fn mesh_file_round_trip_is_bit_exact() {
        let rect = Rect::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        let mesh = make_rect_mesh(rect, 3, 7).unwrap();
        let mut buf = Vec::new();
        mesh.write_to(&mut buf).unwrap();
        let back = TriangleMesh::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.boundary(), mesh.boundary());
        let first = String::from_utf8(buf).unwrap();
        assert!(first.starts_with("32 42\n"));
    }

    #[test]
    fn mesh_file_rejects_garbage() {
        assert!(TriangleMesh::read_from("2 0\n0 0 0\n".as_bytes()).is_err());
        assert!(TriangleMesh::read_from("3 1\n0 0 0\n1 0 0\n0 1 0\n0 2 1\n".as_bytes()).is_err());
        assert!(TriangleMesh::read_from("3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 5\n".as_bytes()).is_err());
    }
}
