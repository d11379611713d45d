//! Spatial correlation between the ports of a planar fluid antenna.
//!
//! Run with `cargo run --example port_correlation -- 3 3 2.0`
//! (ports along each axis, then the square aperture in wavelengths).

use covertfas::geometry::{build_correlation_matrix_with, raw_correlations};
use covertfas::{CorrelationKernel, PortGrid};

fn main() -> covertfas::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n1 = args.first().map_or(2, |s| s.parse().expect("ports along axis 1"));
    let n2 = args.get(1).map_or(2, |s| s.parse().expect("ports along axis 2"));
    let w = args.get(2).map_or(1.0, |s| s.parse().expect("aperture in wavelengths"));
    let grid = PortGrid::new(n1, n2, w, w)?;

    for port in grid.ports() {
        println!("port {:>2} at grid position {:?}", port.linear, port.coords);
    }

    for kernel in [CorrelationKernel::JakesJ0, CorrelationKernel::SphericalSinc] {
        let raw = raw_correlations(&grid, kernel);
        let repaired = build_correlation_matrix_with(&grid, kernel)?;
        println!("\n{kernel:?}");
        println!("raw min eigenvalue      {:.3e}", raw.clone().symmetric_eigenvalues().min());
        println!("repaired min eigenvalue {:.3e}", repaired.min_eigenvalue());
        print!("{:.4}", repaired.as_matrix());
    }
    Ok(())
}
