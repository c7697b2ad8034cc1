//! Rectangular tensor grids and the discrete calculus used throughout the crate.
//!
//! Two discretizations live side by side:
//!
//! * nodal central differences with tensor trapezoidal quadrature
//!   ([`gradient`], [`integrate_domain`], [`integrate_boundary`]), used for
//!   pointwise fields and generic integrals;
//! * the corner-triangle form ([`CornerGradients`]), in which every cell is
//!   split into its four right-angled corner triangles. Each triangle carries
//!   the exact gradient of the piecewise-linear interpolant on it, so
//!   `sum_c w_c k_c g_c(u) . conj(g_c(w))` is a consistent quadrature of
//!   `int k grad u . conj(grad w)` whose Euler-Lagrange operator is the
//!   5-point stencil. The forward solver, the DN pairings and the functional
//!   quadratures all use this form so that discrete identities hold exactly.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Uniform tensor grid on `[x_min, x_max] x [0, height]`.
///
/// The bottom face `x2 = 0` is the flat boundary patch that hosts the
/// reconstruction point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    height: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Face {
    Bottom,
    Right,
    Top,
    Left,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_max > x_min) || !(height > 0.0) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::DegenerateGrid(format!(
                "extent [{x_min}, {x_max}] x [0, {height}] is empty"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::DegenerateGrid(format!(
                "need at least 3 nodes per axis, got {nx} x {ny}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            height,
            nx,
            ny,
            hx: (x_max - x_min) / (nx - 1) as f64,
            hy: height / (ny - 1) as f64,
        })
    }

    /// The model domain `[-1, 1] x [0, 1]`.
    pub fn unit_model(nx: usize, ny: usize) -> Result<Self> {
        Self::new(-1.0, 1.0, 1.0, nx, ny)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn max_spacing(&self) -> f64 {
        self.hx.max(self.hy)
    }
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }
    pub fn cell_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.hx
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.height
        } else {
            j as f64 * self.hy
        }
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.x(i), self.y(j)]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Node indices of a face, ordered by increasing free coordinate.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        match face {
            Face::Bottom => (0..self.nx).map(|i| self.index(i, 0)).collect(),
            Face::Top => (0..self.nx).map(|i| self.index(i, self.ny - 1)).collect(),
            Face::Left => (0..self.ny).map(|j| self.index(0, j)).collect(),
            Face::Right => (0..self.ny).map(|j| self.index(self.nx - 1, j)).collect(),
        }
    }

    /// Node closest to a physical point.
    pub fn nearest_node(&self, x: [f64; 2]) -> (usize, usize) {
        let i = ((x[0] - self.x_min) / self.hx).round().clamp(0.0, (self.nx - 1) as f64);
        let j = (x[1] / self.hy).round().clamp(0.0, (self.ny - 1) as f64);
        (i as usize, j as usize)
    }

    /// Same extent with every interval halved.
    pub fn refined(&self) -> Self {
        Self::new(
            self.x_min,
            self.x_max,
            self.height,
            2 * self.nx - 1,
            2 * self.ny - 1,
        )
        .expect("refining a valid grid")
    }

    /// Weight of one corner triangle in the corner quadrature.
    #[inline]
    pub fn corner_weight(&self) -> f64 {
        0.25 * self.hx * self.hy
    }

    /// Node of every corner triangle, in corner order (cell-major; BL, BR, TL, TR).
    pub fn corner_nodes(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(4 * self.cell_count());
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                out.push(self.index(i, j));
                out.push(self.index(i + 1, j));
                out.push(self.index(i, j + 1));
                out.push(self.index(i + 1, j + 1));
            }
        }
        out
    }

    pub fn sample<F: Fn(f64, f64) -> C64>(&self, f: F) -> ScalarField {
        let mut values = Vec::with_capacity(self.node_count());
        for j in 0..self.ny {
            let y = self.y(j);
            for i in 0..self.nx {
                values.push(f(self.x(i), y));
            }
        }
        ScalarField { grid: *self, values }
    }

    pub fn sample_real<F: Fn(f64, f64) -> f64>(&self, f: F) -> ScalarField {
        self.sample(|x, y| C64::new(f(x, y), 0.0))
    }
}

/// Complex nodal field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<C64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.node_count()],
        }
    }

    pub fn constant(grid: Grid, c: C64) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn is_real(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.values.iter().all(|v| v.im.abs() <= tol * scale)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn map<F: Fn(C64) -> C64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &Self) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + c * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn trace(&self, face: Face) -> BoundaryTrace {
        let nodes = self.grid.face_nodes(face);
        BoundaryTrace {
            grid: self.grid,
            face,
            values: nodes.iter().map(|&k| self.values[k]).collect(),
        }
    }
}

/// Nodal vector field; one complex value per component and node.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: [Vec<C64>; 2],
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn component(&self, axis: usize) -> &[C64] {
        &self.components[axis]
    }
    pub fn at(&self, k: usize) -> [C64; 2] {
        [self.components[0][k], self.components[1][k]]
    }

    /// Pointwise `|v|^2 = |v1|^2 + |v2|^2` as a real field.
    pub fn norm_sqr(&self) -> Vec<f64> {
        self.components[0]
            .iter()
            .zip(&self.components[1])
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// Pointwise `v . conj(w)`.
    pub fn dot_conj(&self, other: &Self) -> ScalarField {
        let values = (0..self.grid.node_count())
            .map(|k| {
                self.components[0][k] * other.components[0][k].conj()
                    + self.components[1][k] * other.components[1][k].conj()
            })
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }
}

/// Values of a field along one face of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    grid: Grid,
    face: Face,
    values: Vec<C64>,
}

impl BoundaryTrace {
    pub fn new(grid: Grid, face: Face, values: Vec<C64>) -> Result<Self> {
        let expected = grid.face_nodes(face).len();
        if values.len() != expected {
            return Err(Error::InvalidInput(format!(
                "trace has {} values, face {:?} has {} nodes",
                values.len(),
                face,
                expected
            )));
        }
        Ok(Self { grid, face, values })
    }

    pub fn from_fn<F: Fn(f64, f64) -> C64>(grid: Grid, face: Face, f: F) -> Self {
        let values = grid
            .face_nodes(face)
            .into_iter()
            .map(|k| {
                let [x, y] = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self { grid, face, values }
    }

    pub fn face(&self) -> Face {
        self.face
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Dirichlet data on the whole boundary, stored as a nodal field whose
/// interior values are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletData {
    field: ScalarField,
}

impl DirichletData {
    /// Keeps the boundary values of `u` and drops the rest.
    pub fn from_field(u: &ScalarField) -> Self {
        let g = *u.grid();
        let mut field = u.clone();
        for j in 1..g.ny() - 1 {
            for i in 1..g.nx() - 1 {
                field.values[g.index(i, j)] = C64::new(0.0, 0.0);
            }
        }
        Self { field }
    }

    pub fn from_fn<F: Fn(f64, f64) -> C64>(grid: Grid, f: F) -> Self {
        Self::from_field(&grid.sample(f))
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            field: ScalarField::zeros(grid),
        }
    }

    /// Data given on one face and zero on the rest of the boundary.
    pub fn from_trace(t: &BoundaryTrace) -> Self {
        let mut field = ScalarField::zeros(t.grid);
        for (k, v) in t.grid.face_nodes(t.face).into_iter().zip(&t.values) {
            field.values[k] = *v;
        }
        Self { field }
    }

    pub fn trace(&self, face: Face) -> BoundaryTrace {
        self.field.trace(face)
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    /// Boundary values on the full grid (interior entries zero).
    pub fn lift(&self) -> &ScalarField {
        &self.field
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            field: self.field.scale(c),
        }
    }

    pub fn axpy(&self, c: C64, other: &Self) -> Self {
        Self {
            field: self.field.axpy(c, &other.field),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            field: self.field.conj(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.field.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.field.max_abs()
    }

    /// Stable content hash of the boundary values (bitwise).
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let g = self.grid();
        (g.nx(), g.ny(), g.hx().to_bits(), g.hy().to_bits(), g.x_min().to_bits()).hash(&mut h);
        for v in &self.field.values {
            v.re.to_bits().hash(&mut h);
            v.im.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Nodal gradient: second-order central differences inside, second-order
/// one-sided differences on the boundary. Exact for quadratic fields.
pub fn gradient(u: &ScalarField) -> Result<VectorField> {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    if nx < 3 || ny < 3 {
        return Err(Error::DegenerateGrid(format!("{nx} x {ny}")));
    }
    let v = &u.values;
    let mut dx = vec![C64::new(0.0, 0.0); g.node_count()];
    let mut dy = vec![C64::new(0.0, 0.0); g.node_count()];
    let (ihx, ihy) = (0.5 / g.hx(), 0.5 / g.hy());
    for j in 0..ny {
        for i in 0..nx {
            let k = g.index(i, j);
            dx[k] = if i == 0 {
                (-3.0 * v[k] + 4.0 * v[k + 1] - v[k + 2]) * ihx
            } else if i == nx - 1 {
                (3.0 * v[k] - 4.0 * v[k - 1] + v[k - 2]) * ihx
            } else {
                (v[k + 1] - v[k - 1]) * ihx
            };
            dy[k] = if j == 0 {
                (-3.0 * v[k] + 4.0 * v[k + nx] - v[k + 2 * nx]) * ihy
            } else if j == ny - 1 {
                (3.0 * v[k] - 4.0 * v[k - nx] + v[k - 2 * nx]) * ihy
            } else {
                (v[k + nx] - v[k - nx]) * ihy
            };
        }
    }
    Ok(VectorField {
        grid: g,
        components: [dx, dy],
    })
}

fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i + 1 == n {
        0.5 * h
    } else {
        h
    }
}

/// Tensor-product trapezoidal rule over the rectangle.
pub fn integrate_domain(u: &ScalarField) -> C64 {
    let g = u.grid();
    let mut total = C64::new(0.0, 0.0);
    for j in 0..g.ny() {
        let wy = trapezoid_weight(j, g.ny(), g.hy());
        let mut row = C64::new(0.0, 0.0);
        for i in 0..g.nx() {
            row += u.values[g.index(i, j)] * trapezoid_weight(i, g.nx(), g.hx());
        }
        total += row * wy;
    }
    total
}

/// Trapezoidal rule along a single face.
pub fn integrate_boundary(t: &BoundaryTrace) -> C64 {
    let g = t.grid();
    let (n, h) = match t.face {
        Face::Bottom | Face::Top => (g.nx(), g.hx()),
        Face::Left | Face::Right => (g.ny(), g.hy()),
    };
    t.values
        .iter()
        .enumerate()
        .map(|(i, &v)| v * trapezoid_weight(i, n, h))
        .sum()
}

/// Gradients of the piecewise-linear interpolant on the four corner
/// triangles of every cell (BL, BR, TL, TR).
#[derive(Clone, Debug)]
pub struct CornerGradients {
    grid: Grid,
    values: Vec<[C64; 2]>,
}

impl CornerGradients {
    pub fn of(u: &ScalarField) -> Self {
        let g = *u.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let (ihx, ihy) = (1.0 / g.hx(), 1.0 / g.hy());
        let v = &u.values;
        let mut values = Vec::with_capacity(4 * g.cell_count());
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let k = g.index(i, j);
                let bottom = (v[k + 1] - v[k]) * ihx;
                let top = (v[k + nx + 1] - v[k + nx]) * ihx;
                let left = (v[k + nx] - v[k]) * ihy;
                let right = (v[k + nx + 1] - v[k + 1]) * ihy;
                values.push([bottom, left]);
                values.push([bottom, right]);
                values.push([top, left]);
                values.push([top, right]);
            }
        }
        Self { grid: g, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[[C64; 2]] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `|g_c|^2` for every corner.
    pub fn norm_sqr(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|g| g[0].norm_sqr() + g[1].norm_sqr())
            .collect()
    }

    /// Root-mean-square gradient magnitude over the domain.
    pub fn rms(&self) -> f64 {
        let g = &self.grid;
        let area = (g.x_max() - g.x_min()) * g.height();
        let e: f64 = self.norm_sqr().iter().sum::<f64>() * g.corner_weight();
        (e / area).sqrt()
    }
}

/// `sum_c w_c k_c g_c(u) . conj(g_c(w))` with per-corner weights `k_c`.
pub fn corner_form(weights: &[f64], gu: &CornerGradients, gw: &CornerGradients) -> C64 {
    let w = gu.grid.corner_weight();
    let mut total = C64::new(0.0, 0.0);
    for ((k, a), b) in weights.iter().zip(&gu.values).zip(&gw.values) {
        total += (a[0] * b[0].conj() + a[1] * b[1].conj()) * *k;
    }
    total * w
}

/// Nodal coefficient field pulled back to corners (each corner triangle uses
/// the value at its right-angle node).
pub fn nodal_to_corners(field: &[f64], grid: &Grid) -> Vec<f64> {
    grid.corner_nodes().into_iter().map(|k| field[k]).collect()
}

/// Discrete `H^1` norm `sqrt(int |u|^2 + int |grad u|^2)` using the nodal
/// gradient and trapezoidal quadrature.
pub fn h1_norm(u: &ScalarField) -> Result<f64> {
    let grad = gradient(u)?;
    let g = *u.grid();
    let density: Vec<C64> = u
        .values()
        .iter()
        .zip(grad.norm_sqr())
        .map(|(v, gn)| C64::new(v.norm_sqr() + gn, 0.0))
        .collect();
    Ok(integrate_domain(&ScalarField::new(g, density)?).re.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::unit_model(2, 5).is_err());
        assert!(Grid::unit_model(5, 2).is_err());
        assert!(Grid::new(1.0, 1.0, 1.0, 5, 5).is_err());
    }

    #[test]
    fn spacing_matches_extent() {
        let g = Grid::new(-1.0, 1.0, 1.0, 65, 33).unwrap();
        assert!((g.hx() * 64.0 - 2.0).abs() < 1e-15);
        assert!((g.hy() * 32.0 - 1.0).abs() < 1e-15);
        assert_eq!(g.x(64), 1.0);
        assert_eq!(g.y(32), 1.0);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::unit_model(9, 7).unwrap();
        let grad = gradient(&ScalarField::constant(g, c(5.0))).unwrap();
        assert!(grad.norm_sqr().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_exact_for_affine() {
        let g = Grid::unit_model(9, 7).unwrap();
        let grad = gradient(&g.sample_real(|x, _| x)).unwrap();
        for k in 0..g.node_count() {
            let [a, b] = grad.at(k);
            assert!((a - c(1.0)).norm() < 1e-13);
            assert!(b.norm() < 1e-13);
        }
    }

    #[test]
    fn gradient_converges_at_second_order() {
        // analytic derivative oracle: d/dx sin(x) = cos(x)
        let mut errs = Vec::new();
        let mut g = Grid::unit_model(9, 5).unwrap();
        for _ in 0..4 {
            let grad = gradient(&g.sample_real(|x, _| x.sin())).unwrap();
            let err = (0..g.node_count())
                .map(|k| (grad.at(k)[0].re - g.coords(k)[0].cos()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
            g = g.refined();
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
        }
    }

    #[test]
    fn domain_quadrature_basics() {
        let g = Grid::unit_model(11, 6).unwrap();
        assert!((integrate_domain(&ScalarField::constant(g, c(1.0))) - c(2.0)).norm() < 1e-14);
        assert!((integrate_domain(&g.sample_real(|_, y| y)) - c(1.0)).norm() < 1e-14);
        // multi-affine integrand x*y integrates to zero by symmetry and exactly
        assert!(integrate_domain(&g.sample_real(|x, y| x * y + 1.0 + x)).re - 2.0 < 1e-14);
    }

    #[test]
    fn domain_quadrature_exponential_layer() {
        // closed form: int_0^1 exp(-2 N y) dy * 2 = (1 - exp(-2N)) / N
        for &n in &[2.0_f64, 4.0, 8.0] {
            let g = Grid::unit_model(5, 2049).unwrap();
            let v = integrate_domain(&g.sample_real(|_, y| (-2.0 * n * y).exp())).re;
            let exact = (1.0 - (-2.0 * n).exp()) / n;
            assert!((v - exact).abs() / exact < 1e-4, "{v} vs {exact}");
        }
    }

    #[test]
    fn boundary_quadrature_basics() {
        let g = Grid::unit_model(11, 6).unwrap();
        let one = BoundaryTrace::from_fn(g, Face::Bottom, |_, _| c(1.0));
        assert!((integrate_boundary(&one) - c(2.0)).norm() < 1e-14);
        let odd = BoundaryTrace::from_fn(g, Face::Bottom, |x, _| c(x));
        assert!(integrate_boundary(&odd).norm() < 1e-14);
        let side = BoundaryTrace::from_fn(g, Face::Left, |_, y| c(y));
        assert!((integrate_boundary(&side) - c(0.5)).norm() < 1e-14);
    }

    #[test]
    fn corner_form_exact_for_affine() {
        let g = Grid::unit_model(7, 5).unwrap();
        let u = g.sample_real(|x, y| 2.0 * x - y);
        let w = g.sample_real(|x, y| x + 3.0 * y);
        let ones = vec![1.0; 4 * g.cell_count()];
        let v = corner_form(&ones, &CornerGradients::of(&u), &CornerGradients::of(&w));
        // grad u . grad w = 2 - 3 = -1 over area 2
        assert!((v - c(-2.0)).norm() < 1e-13);
    }

    #[test]
    fn nodal_product_rule_for_affine_fields() {
        let g = Grid::unit_model(9, 9).unwrap();
        let gu = gradient(&g.sample_real(|x, y| 0.5 * x + 2.0 * y)).unwrap();
        let gw = gradient(&g.sample_real(|x, y| -x + y)).unwrap();
        let v = integrate_domain(&gu.dot_conj(&gw));
        assert!((v - c((-0.5 + 2.0) * 2.0)).norm() < 1e-13);
    }

    #[test]
    fn dirichlet_data_keeps_only_the_ring() {
        let g = Grid::unit_model(5, 4).unwrap();
        let d = DirichletData::from_field(&ScalarField::constant(g, c(1.0)));
        let nonzero = d.lift().values().iter().filter(|v| v.norm() > 0.0).count();
        assert_eq!(nonzero, 2 * 5 + 2 * 2);
    }
}
