//! Covertness and reliability metrics for links whose receiver and warden
//! both use a planar fluid antenna (a grid of closely spaced, switchable
//! ports with the best port activated).
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: port grids, 2D/1D port indexing and the Jakes spatial
//!   correlation matrix between ports.
//! - [`numerics`]: Bessel J0, univariate Student-t CDF/quantile, PSD
//!   Cholesky and a randomized-lattice multivariate t CDF.
//! - [`metrics`]: missed detection, false alarm, covertness outage,
//!   optimal warden threshold, transmission outage and success probability
//!   through the t-copula closed forms.
//! - [`oracle`]: an independent Monte Carlo over correlated Rayleigh
//!   channels, including a symbol-level energy detector.
//! - [`config`] and [`sweep`]: the configuration file, parameter sweeps,
//!   CSV/JSON output and the analytic-vs-oracle validation harness that
//!   back the `covertfas` binary.

pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod sweep;

pub use error::{Error, Result};
pub use geometry::{CorrelationKernel, CorrelationMatrix, PortGrid, PortIndex};
pub use metrics::{Dependence, LinkBudget, NodeFas};
pub use numerics::{CopulaSpec, MetricValue, QmcSettings};
pub use oracle::McSettings;
