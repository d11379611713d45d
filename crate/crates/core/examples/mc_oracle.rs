//! Closed-form miss-detection probability against correlated-Rayleigh sampling.

use covertfas::geometry::build_correlation_matrix;
use covertfas::metrics::miss_detection_prob;
use covertfas::oracle::estimate_max_gain_cdf_many;
use covertfas::{LinkBudget, McSettings, NodeFas, QmcSettings};

fn main() -> covertfas::Result<()> {
    let link = LinkBudget::reference();
    let willie = NodeFas::reference();
    let qmc = QmcSettings::default();
    let mc = McSettings { trials: 200_000, ..McSettings::default() };

    let zetas: Vec<f64> = (1..=10).map(|i| link.sigma2_w + 0.5 * i as f64 / 10.0).collect();
    let levels: Vec<f64> = zetas.iter().map(|z| (z - link.sigma2_w) / link.p_a).collect();
    let oracle = estimate_max_gain_cdf_many(&build_correlation_matrix(&willie.grid)?, &levels, &mc)?;

    println!("{:>6} {:>10} {:>10} {:>9} {:>9}", "zeta", "copula", "channel", "gap", "mc err");
    for (zeta, o) in zetas.iter().zip(oracle) {
        let a = miss_detection_prob(&link, &willie, *zeta, &qmc)?;
        println!("{zeta:>6.3} {:>10.6} {:>10.6} {:>9.2e} {:>9.2e}", a.value, o.value, (a.value - o.value).abs(), o.abs_error_estimate);
    }
    Ok(())
}
