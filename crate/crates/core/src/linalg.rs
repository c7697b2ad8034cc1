//! Five-point divergence-form operators and the linear solvers behind them.
//!
//! An [`EdgeOperator`] stores one non-negative weight per grid edge and
//! represents the form `a(u, w) = sum_e W_e (u_a - u_b) conj(w_a - w_b)`.
//! It is assembled from per-corner conductivities (see
//! [`crate::grid::CornerGradients`]), so `a(u, w)` coincides with the corner
//! quadrature of `int k grad u . conj(grad w)`.
//!
//! Vectors are full-grid `C64` arrays; the Dirichlet solvers keep boundary
//! entries fixed and work on the interior block.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::Grid;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug)]
pub struct EdgeOperator {
    grid: Grid,
    /// Horizontal edges `(i, j) - (i + 1, j)`, index `j * (nx - 1) + i`.
    wx: Vec<f64>,
    /// Vertical edges `(i, j) - (i, j + 1)`, index `j * nx + i`.
    wy: Vec<f64>,
}

impl EdgeOperator {
    /// Assembles edge weights from per-corner conductivities in corner order.
    pub fn from_corner_weights(grid: &Grid, kappa: &[f64]) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        debug_assert_eq!(kappa.len(), 4 * grid.cell_count());
        let w = grid.corner_weight();
        let (cx, cy) = (w / (grid.hx() * grid.hx()), w / (grid.hy() * grid.hy()));
        let mut wx = vec![0.0; (nx - 1) * ny];
        let mut wy = vec![0.0; nx * (ny - 1)];
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let c = 4 * (j * (nx - 1) + i);
                let (bl, br, tl, tr) = (kappa[c], kappa[c + 1], kappa[c + 2], kappa[c + 3]);
                wx[j * (nx - 1) + i] += cx * (bl + br);
                wx[(j + 1) * (nx - 1) + i] += cx * (tl + tr);
                wy[j * nx + i] += cy * (bl + tl);
                wy[j * nx + i + 1] += cy * (br + tr);
            }
        }
        Self { grid: *grid, wx, wy }
    }

    /// Operator of a nodal conductivity; each corner triangle takes the value
    /// at its right-angle node, giving arithmetic-mean edge coefficients.
    pub fn from_nodal(grid: &Grid, sigma: &[f64]) -> Self {
        Self::from_corner_weights(grid, &crate::grid::nodal_to_corners(sigma, grid))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `y = A u` at every node.
    pub fn apply(&self, u: &[C64], y: &mut [C64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        y.iter_mut().for_each(|v| *v = ZERO);
        for j in 0..ny {
            let row = j * nx;
            let erow = j * (nx - 1);
            for i in 0..nx - 1 {
                let k = row + i;
                let f = (u[k] - u[k + 1]) * self.wx[erow + i];
                y[k] += f;
                y[k + 1] -= f;
            }
        }
        for j in 0..ny - 1 {
            let row = j * nx;
            for i in 0..nx {
                let k = row + i;
                let f = (u[k] - u[k + nx]) * self.wy[k];
                y[k] += f;
                y[k + nx] -= f;
            }
        }
    }

    /// `y = A u` on interior nodes for `u` that vanishes on the boundary;
    /// boundary entries of `y` are set to zero.
    pub fn apply_interior(&self, u: &[C64], y: &mut [C64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        for v in y.iter_mut().take(nx) {
            *v = ZERO;
        }
        for v in y.iter_mut().skip((ny - 1) * nx) {
            *v = ZERO;
        }
        for j in 1..ny - 1 {
            let row = j * nx;
            y[row] = ZERO;
            y[row + nx - 1] = ZERO;
            for i in 1..nx - 1 {
                let k = row + i;
                let e = j * (nx - 1) + i;
                let (wl, wr) = (self.wx[e - 1], self.wx[e]);
                let (wd, wu) = (self.wy[k - nx], self.wy[k]);
                y[k] = u[k] * (wl + wr + wd + wu)
                    - u[k - 1] * wl
                    - u[k + 1] * wr
                    - u[k - nx] * wd
                    - u[k + nx] * wu;
            }
        }
    }

    /// `sum_e W_e (u_a - u_b) conj(w_a - w_b)`.
    pub fn form(&self, u: &[C64], w: &[C64]) -> C64 {
        let nx = self.grid.nx();
        let mut s = ZERO;
        for (e, &we) in self.wx.iter().enumerate() {
            let (j, i) = (e / (nx - 1), e % (nx - 1));
            let k = j * nx + i;
            s += (u[k] - u[k + 1]) * (w[k] - w[k + 1]).conj() * we;
        }
        for (k, &we) in self.wy.iter().enumerate() {
            s += (u[k] - u[k + nx]) * (w[k] - w[k + nx]).conj() * we;
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut d = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx - 1 {
                let w = self.wx[j * (nx - 1) + i];
                d[j * nx + i] += w;
                d[j * nx + i + 1] += w;
            }
        }
        for (k, &w) in self.wy.iter().enumerate() {
            d[k] += w;
            d[k + nx] += w;
        }
        d
    }

    /// Largest ratio `W_e / W'_e` over edges; measures how far two operators
    /// on the same grid are apart spectrally.
    pub fn max_ratio(&self, other: &Self) -> f64 {
        self.wx
            .iter()
            .zip(&other.wx)
            .chain(self.wy.iter().zip(&other.wy))
            .map(|(a, b)| (a / b).max(b / a))
            .fold(1.0, f64::max)
    }
}

pub trait Preconditioner {
    /// `z ~ A_II^{-1} r` on interior nodes; boundary entries of `z` are zero.
    fn apply(&self, r: &[C64], z: &mut [C64]);
}

/// Inverse-diagonal preconditioner.
pub struct Jacobi {
    inv: Vec<f64>,
}

impl Jacobi {
    pub fn new(op: &EdgeOperator) -> Self {
        let g = op.grid();
        let inv = op
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(k, d)| {
                let (i, j) = g.ij(k);
                if g.is_boundary(i, j) || d <= 0.0 {
                    0.0
                } else {
                    1.0 / d
                }
            })
            .collect();
        Self { inv }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[C64], z: &mut [C64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv) {
            *z = r * d;
        }
    }
}

/// Banded Cholesky factor of the interior block. Interior nodes are ordered
/// with the shorter axis running fastest, so the half-bandwidth equals the
/// interior extent of that axis.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    grid: Grid,
    /// Interior index of each grid node (`usize::MAX` on the boundary).
    order: Vec<usize>,
    /// Grid node of each interior index.
    nodes: Vec<usize>,
    band: usize,
    /// Row `k` stores `L[k][k - band ..= k]`.
    rows: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(op: &EdgeOperator) -> Result<Self> {
        let g = *op.grid();
        let (mx, my) = (g.nx() - 2, g.ny() - 2);
        let x_fast = mx <= my;
        let band = if x_fast { mx } else { my };
        let n = mx * my;
        let mut order = vec![usize::MAX; g.node_count()];
        let mut nodes = Vec::with_capacity(n);
        if x_fast {
            for j in 1..=my {
                for i in 1..=mx {
                    order[g.index(i, j)] = nodes.len();
                    nodes.push(g.index(i, j));
                }
            }
        } else {
            for i in 1..=mx {
                for j in 1..=my {
                    order[g.index(i, j)] = nodes.len();
                    nodes.push(g.index(i, j));
                }
            }
        }
        let w = band + 1;
        let mut rows = vec![0.0; n * w];
        let diag = op.diagonal();
        let nx = g.nx();
        for (m, &k) in nodes.iter().enumerate() {
            rows[m * w + band] = diag[k];
            let (i, j) = g.ij(k);
            // lower-triangle neighbours: left and below
            let left = (k - 1, op.wx[j * (nx - 1) + i - 1]);
            let below = (k - nx, op.wy[k - nx]);
            // both neighbours precede m in either ordering
            for (nb, weight) in [left, below] {
                let q = order[nb];
                if q != usize::MAX {
                    rows[m * w + band - (m - q)] = -weight;
                }
            }
        }
        for k in 0..n {
            let lo = k.saturating_sub(band);
            for c in lo..k {
                let clo = c.saturating_sub(band).max(lo);
                let mut s = rows[k * w + band - (k - c)];
                let rk = &rows[k * w..(k + 1) * w];
                let rc = &rows[c * w..(c + 1) * w];
                for m in clo..c {
                    s -= rk[band - (k - m)] * rc[band - (c - m)];
                }
                let v = s / rows[c * w + band];
                rows[k * w + band - (k - c)] = v;
            }
            let mut d = rows[k * w + band];
            let rk = &rows[k * w..(k + 1) * w];
            for m in lo..k {
                let v = rk[band - (k - m)];
                d -= v * v;
            }
            if !(d > 0.0) {
                return Err(Error::InvalidInput(
                    "operator is not positive definite on the interior".into(),
                ));
            }
            rows[k * w + band] = d.sqrt();
        }
        Ok(Self {
            grid: g,
            order,
            nodes,
            band,
            rows,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn solve_in_place(&self, y: &mut [C64]) {
        let (n, b, w) = (self.nodes.len(), self.band, self.band + 1);
        for k in 0..n {
            let lo = k.saturating_sub(b);
            let row = &self.rows[k * w..(k + 1) * w];
            let mut s = y[k];
            for m in lo..k {
                s -= y[m] * row[b - (k - m)];
            }
            y[k] = s / row[b];
        }
        for k in (0..n).rev() {
            let row = &self.rows[k * w..(k + 1) * w];
            let xk = y[k] / row[b];
            y[k] = xk;
            let lo = k.saturating_sub(b);
            for m in lo..k {
                y[m] -= xk * row[b - (k - m)];
            }
        }
    }
}

impl Preconditioner for BandCholesky {
    fn apply(&self, r: &[C64], z: &mut [C64]) {
        let mut y: Vec<C64> = self.nodes.iter().map(|&k| r[k]).collect();
        self.solve_in_place(&mut y);
        z.iter_mut().for_each(|v| *v = ZERO);
        for (m, &k) in self.nodes.iter().enumerate() {
            z[k] = y[m];
        }
        debug_assert!(self.order.len() == z.len());
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Preconditioned conjugate gradients for `A_II x = b_I`; `x` holds the
/// initial guess on entry, and both `x` and `b` must vanish on the boundary. The relative
/// residual is measured against `scale` (or `|b_I|` when `scale` is zero).
pub fn pcg(
    op: &EdgeOperator,
    b: &[C64],
    x: &mut [C64],
    pre: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
    scale: f64,
) -> Result<LinearSolveStats> {
    let n = b.len();
    let mut r = vec![ZERO; n];
    op.apply_interior(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let bnorm = if scale > 0.0 { scale } else { norm(b) };
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = ZERO);
        return Ok(LinearSolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok(LinearSolveStats {
            iterations: 0,
            residual: res,
        });
    }
    let mut z = vec![ZERO; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut ap = vec![ZERO; n];
    for it in 1..=max_iter {
        op.apply_interior(&p, &mut ap);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += p[k] * alpha;
            r[k] -= ap[k] * alpha;
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(LinearSolveStats {
                iterations: it,
                residual: res,
            });
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + p[k] * beta;
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: res,
    })
}

/// Right-hand side `-(A lift)_I` of the Dirichlet problem with boundary
/// values `lift` (interior values of `lift` are ignored).
pub fn dirichlet_rhs(op: &EdgeOperator, lift: &[C64]) -> Vec<C64> {
    let g = op.grid();
    let mut boundary_only = lift.to_vec();
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            boundary_only[g.index(i, j)] = ZERO;
        }
    }
    let mut y = vec![ZERO; lift.len()];
    op.apply(&boundary_only, &mut y);
    for (k, v) in y.iter_mut().enumerate() {
        let (i, j) = g.ij(k);
        *v = if g.is_boundary(i, j) { ZERO } else { -*v };
    }
    y
}
