//! Uniform staggered (MAC) grid on (0, Lx) × (0, Ly) and its discrete operators.
//!
//! Cell fields are stored row-major with index `j * nx + i`. X-face fields
//! live at x = i·hx (i = 0..=nx) with index `j * (nx + 1) + i`; y-face fields
//! live at y = j·hy (j = 0..=ny) with index `j * nx + i`.

use crate::error::{Error, Result};
use crate::material::Mat2;
use crate::par;

pub type CellField = Vec<f64>;
pub type FaceFieldX = Vec<f64>;
pub type FaceFieldY = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Homogeneous Dirichlet; the ghost value is the negated interior value.
    Dirichlet0,
    /// Homogeneous Neumann; the ghost value mirrors the interior value.
    Neumann0,
    /// Zero normal flux. Gradients on wall faces are reported as zero.
    NoFlux,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Config(format!("grid needs at least 4×4 cells, got {nx}×{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Config(format!("domain lengths must be positive, got {lx}×{ly}")));
        }
        Ok(Self { nx, ny, lx, ly, hx: lx / nx as f64, hy: ly / ny as f64 })
    }

    pub fn unit_square(n: usize) -> Self {
        Self::new(n, n, 1.0, 1.0).expect("n ≥ 4")
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn h_min(&self) -> f64 {
        self.hx.min(self.hy)
    }
    #[inline]
    pub fn c(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn fx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    #[inline]
    pub fn fy(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    #[inline]
    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }
    #[inline]
    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }

    pub fn sample_cells(&self, f: impl Fn(f64, f64) -> f64) -> CellField {
        let mut out = vec![0.0; self.cells()];
        for j in 0..self.ny {
            for i in 0..self.nx {
                out[self.c(i, j)] = f(self.xc(i), self.yc(j));
            }
        }
        out
    }

    pub fn sample_xfaces(&self, f: impl Fn(f64, f64) -> f64) -> FaceFieldX {
        let mut out = vec![0.0; self.xfaces()];
        for j in 0..self.ny {
            for i in 0..=self.nx {
                out[self.fx(i, j)] = f(i as f64 * self.hx, self.yc(j));
            }
        }
        out
    }

    pub fn sample_yfaces(&self, f: impl Fn(f64, f64) -> f64) -> FaceFieldY {
        let mut out = vec![0.0; self.yfaces()];
        for j in 0..=self.ny {
            for i in 0..self.nx {
                out[self.fy(i, j)] = f(self.xc(i), j as f64 * self.hy);
            }
        }
        out
    }

    /// Σ f·hx·hy in index order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        par::sum_compensated(f) * self.cell_area()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integrate(f) / self.area()
    }

    /// Cell inner product ⟨f, g⟩ = Σ f g hx hy.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        par::dot(f, g) * self.cell_area()
    }

    /// Area-weighted L² norm.
    pub fn l2(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Normal derivative across a wall face for the given boundary kind;
    /// `inside` is the adjacent cell value, `sign` is +1 on low walls and −1 on high walls.
    #[inline]
    fn wall_gradient(bc: BoundaryKind, inside: f64, h: f64, sign: f64) -> f64 {
        match bc {
            BoundaryKind::Dirichlet0 => sign * 2.0 * inside / h,
            BoundaryKind::Neumann0 | BoundaryKind::NoFlux => 0.0,
        }
    }

    /// Face gradient of a cell field: two-point differences, wall faces from ghost values.
    pub fn grad_cc(&self, f: &[f64], bc: BoundaryKind) -> (FaceFieldX, FaceFieldY) {
        let (nx, ny, hx, hy) = (self.nx, self.ny, self.hx, self.hy);
        let mut gx = vec![0.0; self.xfaces()];
        par::rows_mut(&mut gx, nx + 1, |j, row| {
            let r = &f[j * nx..(j + 1) * nx];
            row[0] = Self::wall_gradient(bc, r[0], hx, 1.0);
            for i in 1..nx {
                row[i] = (r[i] - r[i - 1]) / hx;
            }
            row[nx] = Self::wall_gradient(bc, r[nx - 1], hx, -1.0);
        });
        let mut gy = vec![0.0; self.yfaces()];
        par::rows_mut(&mut gy, nx, |j, row| {
            for i in 0..nx {
                row[i] = if j == 0 {
                    Self::wall_gradient(bc, f[i], hy, 1.0)
                } else if j == ny {
                    Self::wall_gradient(bc, f[(ny - 1) * nx + i], hy, -1.0)
                } else {
                    (f[j * nx + i] - f[(j - 1) * nx + i]) / hy
                };
            }
        });
        (gx, gy)
    }

    /// Conservative divergence of a face flux.
    pub fn div_fc(&self, fx: &[f64], fy: &[f64]) -> CellField {
        let (nx, hx, hy) = (self.nx, self.hx, self.hy);
        let mut out = vec![0.0; self.cells()];
        par::rows_mut(&mut out, nx, |j, row| {
            for i in 0..nx {
                row[i] = (fx[j * (nx + 1) + i + 1] - fx[j * (nx + 1) + i]) / hx
                    + (fy[(j + 1) * nx + i] - fy[j * nx + i]) / hy;
            }
        });
        out
    }

    /// Five-point Laplacian with ghost cells per `bc`.
    pub fn laplacian_cc(&self, f: &[f64], bc: BoundaryKind) -> CellField {
        let (nx, ny) = (self.nx, self.ny);
        let (ax, ay) = (1.0 / (self.hx * self.hx), 1.0 / (self.hy * self.hy));
        let ghost = |inside: f64| match bc {
            BoundaryKind::Dirichlet0 => -inside,
            _ => inside,
        };
        let mut out = vec![0.0; self.cells()];
        par::rows_mut(&mut out, nx, |j, row| {
            for i in 0..nx {
                let c = f[j * nx + i];
                let w = if i > 0 { f[j * nx + i - 1] } else { ghost(c) };
                let e = if i + 1 < nx { f[j * nx + i + 1] } else { ghost(c) };
                let s = if j > 0 { f[(j - 1) * nx + i] } else { ghost(c) };
                let n = if j + 1 < ny { f[(j + 1) * nx + i] } else { ghost(c) };
                row[i] = ax * (w - 2.0 * c + e) + ay * (s - 2.0 * c + n);
            }
        });
        out
    }

    /// Cell-centred gradient by central differences with ghost cells per `bc`.
    pub fn cell_gradient(&self, f: &[f64], bc: BoundaryKind) -> (CellField, CellField) {
        let (nx, ny, hx, hy) = (self.nx, self.ny, self.hx, self.hy);
        let ghost = |inside: f64| match bc {
            BoundaryKind::Dirichlet0 => -inside,
            _ => inside,
        };
        let mut gx = vec![0.0; self.cells()];
        let mut gy = vec![0.0; self.cells()];
        par::rows_mut(&mut gx, nx, |j, row| {
            for i in 0..nx {
                let c = f[j * nx + i];
                let w = if i > 0 { f[j * nx + i - 1] } else { ghost(c) };
                let e = if i + 1 < nx { f[j * nx + i + 1] } else { ghost(c) };
                row[i] = (e - w) / (2.0 * hx);
            }
        });
        par::rows_mut(&mut gy, nx, |j, row| {
            for i in 0..nx {
                let c = f[j * nx + i];
                let s = if j > 0 { f[(j - 1) * nx + i] } else { ghost(c) };
                let n = if j + 1 < ny { f[(j + 1) * nx + i] } else { ghost(c) };
                row[i] = (n - s) / (2.0 * hy);
            }
        });
        (gx, gy)
    }

    /// Cell-centred gradient using only interior values: central differences
    /// inside, second-order one-sided differences in the first and last rows/columns.
    pub fn cell_gradient_interior(&self, f: &[f64]) -> (CellField, CellField) {
        let (nx, ny, hx, hy) = (self.nx, self.ny, self.hx, self.hy);
        let mut gx = vec![0.0; self.cells()];
        let mut gy = vec![0.0; self.cells()];
        par::rows_mut(&mut gx, nx, |j, row| {
            let r = &f[j * nx..(j + 1) * nx];
            for i in 0..nx {
                row[i] = d1_interior(|k| r[k], i, nx, hx);
            }
        });
        par::rows_mut(&mut gy, nx, |j, row| {
            for i in 0..nx {
                row[i] = d1_interior(|k| f[k * nx + i], j, ny, hy);
            }
        });
        (gx, gy)
    }

    /// Cellwise symmetric tensor built from the face gradients of `f`:
    /// diagonal entries average the squared gradients of the two faces, the
    /// off-diagonal entry multiplies the two face-averaged gradients. It is
    /// positive semidefinite and approximates ∇f⊗∇f to second order.
    pub fn gradient_tensor(&self, f: &[f64], bc: BoundaryKind) -> Vec<Mat2> {
        let nx = self.nx;
        let (gx, gy) = self.grad_cc(f, bc);
        (0..self.cells())
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                let (w, e) = (gx[j * (nx + 1) + i], gx[j * (nx + 1) + i + 1]);
                let (s, n) = (gy[j * nx + i], gy[(j + 1) * nx + i]);
                let off = 0.25 * (w + e) * (s + n);
                Mat2::new(0.5 * (w * w + e * e), off, off, 0.5 * (s * s + n * n))
            })
            .collect()
    }

    /// Cell-centred velocity from face values.
    pub fn velocity_at_cells(&self, u: &[f64], v: &[f64]) -> (CellField, CellField) {
        let nx = self.nx;
        let mut uc = vec![0.0; self.cells()];
        let mut vc = vec![0.0; self.cells()];
        par::rows_mut(&mut uc, nx, |j, row| {
            for i in 0..nx {
                row[i] = 0.5 * (u[j * (nx + 1) + i] + u[j * (nx + 1) + i + 1]);
            }
        });
        par::rows_mut(&mut vc, nx, |j, row| {
            for i in 0..nx {
                row[i] = 0.5 * (v[j * nx + i] + v[(j + 1) * nx + i]);
            }
        });
        (uc, vc)
    }

    /// Cellwise velocity gradient L_ij = ∂_j v_i. Normal derivatives use the
    /// two faces of the cell; tangential derivatives are central differences
    /// of the cell-centred velocity, closed at the walls per `closure`.
    pub fn velocity_gradient(&self, u: &[f64], v: &[f64], closure: WallClosure) -> VelocityGradient {
        let (nx, hx, hy) = (self.nx, self.hx, self.hy);
        let (uc, vc) = self.velocity_at_cells(u, v);
        let mut l11 = vec![0.0; self.cells()];
        let mut l22 = vec![0.0; self.cells()];
        par::rows_mut(&mut l11, nx, |j, row| {
            for i in 0..nx {
                row[i] = (u[j * (nx + 1) + i + 1] - u[j * (nx + 1) + i]) / hx;
            }
        });
        par::rows_mut(&mut l22, nx, |j, row| {
            for i in 0..nx {
                row[i] = (v[(j + 1) * nx + i] - v[j * nx + i]) / hy;
            }
        });
        let ((_, l12), (l21, _)) = match closure {
            WallClosure::NoSlip => {
                (self.cell_gradient(&uc, BoundaryKind::Dirichlet0), self.cell_gradient(&vc, BoundaryKind::Dirichlet0))
            }
            WallClosure::OneSided => (self.cell_gradient_interior(&uc), self.cell_gradient_interior(&vc)),
        };
        VelocityGradient { l11, l12, l21, l22 }
    }

    /// Strain rate D = ½(∇v + ∇vᵀ) and scalar vorticity W = ½(∂x v − ∂y u) at cell centres.
    pub fn strain_and_vorticity(&self, u: &[f64], v: &[f64]) -> (Vec<Mat2>, CellField) {
        let g = self.velocity_gradient(u, v, WallClosure::OneSided);
        let d = (0..self.cells()).map(|k| g.strain(k)).collect();
        let w = (0..self.cells()).map(|k| g.vorticity(k)).collect();
        (d, w)
    }
}

/// First derivative at index `k` of a line of `n` samples spaced `h`.
#[inline]
fn d1_interior(f: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> f64 {
    if k == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
    } else {
        (f(k + 1) - f(k - 1)) / (2.0 * h)
    }
}

/// How tangential velocity derivatives are closed in the wall rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallClosure {
    /// Ghost value −v beyond the wall. First order at the wall, and exactly
    /// minus the adjoint of the tangential part of
    /// [`crate::flow::leslie_divergence`], so stress power and dissipation agree.
    NoSlip,
    /// Second-order one-sided differences; exact on linear fields whatever
    /// the wall velocity.
    OneSided,
}

/// Cellwise velocity gradient components, L_ij = ∂_j v_i.
#[derive(Debug, Clone)]
pub struct VelocityGradient {
    pub l11: CellField,
    pub l12: CellField,
    pub l21: CellField,
    pub l22: CellField,
}

impl VelocityGradient {
    #[inline]
    pub fn full(&self, k: usize) -> Mat2 {
        Mat2::new(self.l11[k], self.l12[k], self.l21[k], self.l22[k])
    }
    #[inline]
    pub fn strain(&self, k: usize) -> Mat2 {
        let off = 0.5 * (self.l12[k] + self.l21[k]);
        Mat2::new(self.l11[k], off, off, self.l22[k])
    }
    /// W with Ω(v)d = W·(−d2, d1).
    #[inline]
    pub fn vorticity(&self, k: usize) -> f64 {
        0.5 * (self.l21[k] - self.l12[k])
    }
}
