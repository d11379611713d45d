//! Special functions and integrators behind the copula formulas.

mod bessel;
pub mod lattice;
mod linalg;
mod mvt;
pub mod quadrature;
pub mod rng;
mod student_t;

pub use bessel::bessel_j0;
pub use linalg::cholesky_psd;
pub use mvt::{bivariate_t_cdf, mvt_cdf, mvt_cdf_equal, mvt_cdf_pair, CopulaSpec, MetricValue, QmcSettings};
pub use student_t::{
    chi_scale_quantile, normal_cdf, normal_quantile, student_t_cdf, student_t_pdf, student_t_quantile,
};
