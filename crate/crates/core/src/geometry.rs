//! Planar port grids and the spatial correlation between their ports.
//!
//! Ports are numbered 1-based. The 2D/1D mapping is row-major along the
//! first axis: `linear = (n2 - 1) * N1 + n1`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bessel_j0;

/// Eigenvalue floor applied during PSD repair.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Most negative eigenvalue accepted before repair.
pub const PRE_REPAIR_TOLERANCE: f64 = -1e-8;

/// Rectangular fluid-antenna aperture: `n1 x n2` ports spread over
/// `w1 x w2` wavelengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortGrid {
    pub n1: usize,
    pub n2: usize,
    pub w1: f64,
    pub w2: f64,
}

impl PortGrid {
    pub fn new(n1: usize, n2: usize, w1: f64, w2: f64) -> Result<Self> {
        let grid = Self { n1, n2, w1, w2 };
        grid.validate()?;
        Ok(grid)
    }

    /// Single fixed-position antenna.
    pub fn single() -> Self {
        Self { n1: 1, n2: 1, w1: 0.0, w2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::invariant(format!(
                "port grid needs at least one port per axis, got {}x{}",
                self.n1, self.n2
            )));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1.is_finite() && self.w2.is_finite()) {
            return Err(Error::invariant(format!(
                "aperture must be finite and nonnegative, got {}x{}",
                self.w1, self.w2
            )));
        }
        Ok(())
    }

    pub fn port_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn index(&self, linear: usize) -> Result<PortIndex> {
        let coords = map_to_coords(self, linear)?;
        Ok(PortIndex { linear, coords })
    }

    pub fn ports(&self) -> impl Iterator<Item = PortIndex> + '_ {
        (1..=self.port_count()).map(move |linear| PortIndex {
            linear,
            coords: ((linear - 1) % self.n1 + 1, (linear - 1) / self.n1 + 1),
        })
    }

    /// Offset between two ports in wavelengths along each axis.
    fn offset(&self, a: &PortIndex, b: &PortIndex) -> (f64, f64) {
        let axis = |da: usize, db: usize, n: usize, w: f64| {
            if n == 1 {
                0.0
            } else {
                (da as f64 - db as f64) / (n - 1) as f64 * w
            }
        };
        (
            axis(a.coords.0, b.coords.0, self.n1, self.w1),
            axis(a.coords.1, b.coords.1, self.n2, self.w2),
        )
    }
}

/// A port identified both by its linear number and its grid coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PortIndex {
    pub linear: usize,
    pub coords: (usize, usize),
}

pub fn map_to_linear(grid: &PortGrid, coords: (usize, usize)) -> Result<usize> {
    let (c1, c2) = coords;
    if c1 == 0 || c1 > grid.n1 || c2 == 0 || c2 > grid.n2 {
        return Err(Error::domain(format!(
            "port coordinates ({c1}, {c2}) outside a {}x{} grid",
            grid.n1, grid.n2
        )));
    }
    Ok((c2 - 1) * grid.n1 + c1)
}

pub fn map_to_coords(grid: &PortGrid, linear: usize) -> Result<(usize, usize)> {
    if linear == 0 || linear > grid.port_count() {
        return Err(Error::domain(format!(
            "port {linear} outside 1..={}",
            grid.port_count()
        )));
    }
    Ok(((linear - 1) % grid.n1 + 1, (linear - 1) / grid.n1 + 1))
}

/// Spatial correlation kernel as a function of port distance in wavelengths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKernel {
    /// J0(2 pi d): isotropic scattering in the plane.
    #[default]
    JakesJ0,
    /// sin(2 pi d) / (2 pi d): isotropic scattering in 3D.
    SphericalSinc,
}

impl CorrelationKernel {
    pub fn eval(self, distance: f64) -> f64 {
        let x = TAU * distance;
        match self {
            CorrelationKernel::JakesJ0 => bessel_j0(x).expect("distance is finite"),
            CorrelationKernel::SphericalSinc => {
                if x.abs() < 1e-8 {
                    1.0 - x * x / 6.0
                } else {
                    x.sin() / x
                }
            }
        }
    }
}

pub fn jakes_correlation(grid: &PortGrid, a: &PortIndex, b: &PortIndex) -> Result<f64> {
    port_correlation(grid, a, b, CorrelationKernel::JakesJ0)
}

pub fn port_correlation(
    grid: &PortGrid,
    a: &PortIndex,
    b: &PortIndex,
    kernel: CorrelationKernel,
) -> Result<f64> {
    for p in [a, b] {
        if map_to_linear(grid, p.coords)? != p.linear {
            return Err(Error::domain(format!("inconsistent port index {p:?}")));
        }
    }
    if a.coords == b.coords {
        return Ok(1.0);
    }
    let (d1, d2) = grid.offset(a, b);
    Ok(kernel.eval(d1.hypot(d2)))
}

/// Unrepaired pairwise correlations for every port pair.
pub fn raw_correlations(grid: &PortGrid, kernel: CorrelationKernel) -> DMatrix<f64> {
    let ports: Vec<_> = grid.ports().collect();
    let n = ports.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let (d1, d2) = grid.offset(&ports[i], &ports[j]);
            kernel.eval(d1.hypot(d2))
        }
    })
}

pub fn build_correlation_matrix(grid: &PortGrid) -> Result<CorrelationMatrix> {
    build_correlation_matrix_with(grid, CorrelationKernel::JakesJ0)
}

pub fn build_correlation_matrix_with(
    grid: &PortGrid,
    kernel: CorrelationKernel,
) -> Result<CorrelationMatrix> {
    grid.validate()?;
    CorrelationMatrix::new(raw_correlations(grid, kernel))
}

/// Symmetric, unit-diagonal, positive semidefinite matrix.
///
/// Every constructor runs the repair: symmetrise, floor eigenvalues at
/// [`EIGEN_FLOOR`], reconstruct and rescale back to a unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::domain(format!(
                "correlation matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                    return Err(Error::domain(format!("entry ({i}, {j}) = {v} outside [-1, 1]")));
                }
                if (v - m[(j, i)]).abs() > 1e-9 {
                    return Err(Error::domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min_eig = eig.eigenvalues.min();
        if min_eig < PRE_REPAIR_TOLERANCE {
            return Err(Error::domain(format!(
                "matrix is indefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { entries: repair(eig) })
    }

    pub fn identity(n: usize) -> Self {
        Self { entries: DMatrix::identity(n, n) }
    }

    /// 2x2 matrix with off-diagonal `rho`.
    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entry-wise square, re-repaired (gain rather than field correlation).
    pub fn squared(&self) -> Result<Self> {
        Self::new(self.entries.map(|v| v * v))
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        Self {
            entries: DMatrix::from_fn(k, k, |i, j| self.entries[(indices[i], indices[j])]),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.min()
    }
}

fn repair(eig: SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let floored = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let q = &eig.eigenvectors;
    let mut m = q * DMatrix::from_diagonal(&floored) * q.transpose();
    let n = m.nrows();
    let scale: Vec<f64> = (0..n).map(|i| m[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j {
                1.0
            } else {
                (m[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0)
            };
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
