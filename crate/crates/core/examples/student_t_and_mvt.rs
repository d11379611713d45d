//! Univariate Student-t helpers and the multivariate-t CDF behind the copula.

use covertfas::geometry::{build_correlation_matrix, CorrelationMatrix};
use covertfas::numerics::{bivariate_t_cdf, mvt_cdf, mvt_cdf_equal, student_t_cdf, student_t_quantile};
use covertfas::{CopulaSpec, PortGrid, QmcSettings};

fn main() -> covertfas::Result<()> {
    let nu = 40.0;
    for p in [0.01, 0.5, 0.975] {
        let x = student_t_quantile(p, nu)?;
        println!("T_40^-1({p}) = {x:+.12}   T_40(x) = {:.15}", student_t_cdf(x, nu)?);
    }

    println!("\northant probabilities P(T1 <= 0, T2 <= 0) against 1/4 + asin(rho)/(2 pi):");
    for rho in [-0.9, 0.0, 0.5, 0.9] {
        let (p, err) = bivariate_t_cdf(0.0, 0.0, rho, 5.0)?;
        let exact = 0.25 + f64::asin(rho) / std::f64::consts::TAU;
        println!("rho {rho:+.1}: {p:.12} (+-{err:.1e}), exact {exact:.12}");
    }

    let sigma = build_correlation_matrix(&PortGrid::new(2, 2, 1.0, 1.0)?)?;
    let spec = CopulaSpec::new(nu, sigma)?;
    let qmc = QmcSettings::default();
    let p = mvt_cdf(&[0.5, 1.0, -0.2, 2.0], &spec, &qmc)?;
    println!("\n4-port Jakes field, nu = 40: P(T <= b) = {:.6} +- {:.1e} (converged: {})", p.value, p.abs_error_estimate, p.converged);
    let p = mvt_cdf_equal(1.0, &spec, &qmc)?;
    println!("equal limits at 1.0:                 {:.6} +- {:.1e}", p.value, p.abs_error_estimate);

    let independent = CopulaSpec::new(1e6, CorrelationMatrix::identity(4))?;
    let p = mvt_cdf_equal(student_t_quantile(0.9, 1e6)?, &independent, &qmc)?;
    println!("near-Gaussian independent limit:      {:.6} (0.9^4 = 0.6561)", p.value);
    Ok(())
}
