//! Monte Carlo ground truth over spatially correlated Rayleigh channels.
//!
//! Port fields are drawn as `h = L z` with `L` the Cholesky factor of the
//! exact port correlation matrix and `z` i.i.d. circularly-symmetric
//! complex Gaussians, so no copula enters here. Trials run in fixed chunks;
//! chunk `c` draws from sub-stream `c` of the master seed and the chunk
//! tallies are reduced in chunk order, which keeps every output
//! independent of thread scheduling.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_correlation_matrix_with, CorrelationMatrix};
use crate::metrics::{normalized_rate_threshold, optimal_threshold, LinkBudget, NodeFas};
use crate::numerics::rng::{derive_seed, SplitMix64};
use crate::numerics::{cholesky_psd, MetricValue};

/// Trials per chunk.
pub const CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub trials: usize,
    pub seed: u64,
    /// Symbols averaged per detection slot (k).
    pub symbols_per_slot: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { trials: 1_000_000, seed: 0, symbols_per_slot: 1000 }
    }
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invariant("mc.trials must be at least 1"));
        }
        if self.symbols_per_slot == 0 {
            return Err(Error::invariant("mc.symbols_per_slot must be at least 1"));
        }
        Ok(())
    }

    fn sub(&self, stream: u64) -> Self {
        Self { seed: derive_seed(self.seed, stream), ..*self }
    }
}

/// Per-port power gains of one channel realisation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw {
    pub gains: Vec<f64>,
}

/// Complex field samples; real and imaginary parts kept separately.
struct Field {
    re: Vec<f64>,
    im: Vec<f64>,
    z_re: Vec<f64>,
    z_im: Vec<f64>,
}

impl Field {
    fn new(n: usize) -> Self {
        Self { re: vec![0.0; n], im: vec![0.0; n], z_re: vec![0.0; n], z_im: vec![0.0; n] }
    }

    fn draw<R: Rng>(&mut self, chol: &DMatrix<f64>, rng: &mut R) {
        let n = self.re.len();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..n {
            self.z_re[j] = s * rng.sample::<f64, _>(StandardNormal);
            self.z_im[j] = s * rng.sample::<f64, _>(StandardNormal);
        }
        for i in 0..n {
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..=i {
                let l = chol[(i, j)];
                a += l * self.z_re[j];
                b += l * self.z_im[j];
            }
            self.re[i] = a;
            self.im[i] = b;
        }
    }

    fn gain(&self, i: usize) -> f64 {
        self.re[i] * self.re[i] + self.im[i] * self.im[i]
    }

    fn best_port(&self) -> (usize, f64) {
        (0..self.re.len())
            .map(|i| (i, self.gain(i)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    }
}

/// One channel realisation for the ports whose correlation factor is `chol`.
pub fn sample_channel<R: Rng>(chol: &DMatrix<f64>, rng: &mut R) -> ChannelDraw {
    let mut field = Field::new(chol.nrows());
    field.draw(chol, rng);
    ChannelDraw { gains: (0..chol.nrows()).map(|i| field.gain(i)).collect() }
}

fn binomial(hits: u64, trials: usize) -> MetricValue {
    let n = trials as f64;
    let p = hits as f64 / n;
    MetricValue::new(p, 3.0 * (p * (1.0 - p) / n).sqrt())
}

fn chunk_sizes(trials: usize) -> Vec<usize> {
    let full = trials / CHUNK;
    let mut sizes = vec![CHUNK; full];
    if !trials.is_multiple_of(CHUNK) {
        sizes.push(trials % CHUNK);
    }
    sizes
}

/// Empirical P(max gain <= x) for every level in `xs`, from one set of draws.
pub fn estimate_max_gain_cdf_many(sigma: &CorrelationMatrix, xs: &[f64], settings: &McSettings) -> Result<Vec<MetricValue>> {
    settings.validate()?;
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("NaN gain level"));
    }
    let chol = cholesky_psd(sigma)?;
    let counts = chunk_sizes(settings.trials)
        .into_par_iter()
        .enumerate()
        .map(|(c, size)| {
            let mut rng = SplitMix64::stream(settings.seed, c as u64);
            let mut field = Field::new(chol.nrows());
            let mut hits = vec![0u64; xs.len()];
            for _ in 0..size {
                field.draw(&chol, &mut rng);
                let max = field.best_port().1;
                for (h, &x) in hits.iter_mut().zip(xs) {
                    if max <= x {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .collect::<Vec<_>>();
    let mut total = vec![0u64; xs.len()];
    for chunk in counts {
        for (t, h) in total.iter_mut().zip(chunk) {
            *t += h;
        }
    }
    Ok(xs
        .iter()
        .zip(total)
        .map(|(&x, hits)| if x <= 0.0 { MetricValue::exact(0.0) } else { binomial(hits, settings.trials) })
        .collect())
}

/// Empirical CDF of the best-port gain at `x`; error is 3 binomial standard errors.
pub fn estimate_max_gain_cdf(sigma: &CorrelationMatrix, x: f64, settings: &McSettings) -> Result<MetricValue> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("gain level must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(MetricValue::exact(0.0));
    }
    Ok(estimate_max_gain_cdf_many(sigma, &[x], settings)?[0])
}

/// Monte Carlo counterparts of the closed-form metrics.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EmpiricalMetrics {
    pub p_md: MetricValue,
    pub p_fa: f64,
    pub cop: MetricValue,
    pub p_out: MetricValue,
    pub p_suc: MetricValue,
}

fn field_matrix(node: &NodeFas) -> Result<CorrelationMatrix> {
    node.validate()?;
    build_correlation_matrix_with(&node.grid, node.kernel)
}

/// Empirical metric set. Willie and Bob use independent sub-streams (0 and 1).
pub fn estimate_metrics(
    link: &LinkBudget,
    bob: &NodeFas,
    willie: &NodeFas,
    zeta: f64,
    settings: &McSettings,
) -> Result<EmpiricalMetrics> {
    link.validate()?;
    if !zeta.is_finite() {
        return Err(Error::domain("threshold must be finite"));
    }
    let level = |z: f64| ((z - link.sigma2_w) / link.p_a).max(0.0);
    let at_zeta = level(zeta);
    let at_star = level(optimal_threshold(link));
    let willie_cdf = estimate_max_gain_cdf_many(&field_matrix(willie)?, &[at_zeta, at_star], &settings.sub(0))?;
    let p_out = estimate_max_gain_cdf_many(&field_matrix(bob)?, &[normalized_rate_threshold(link)], &settings.sub(1))?[0];
    let p_fa = if zeta <= link.sigma2_w { 1.0 } else { 0.0 };
    let p_md = if p_fa == 1.0 { MetricValue::exact(0.0) } else { willie_cdf[0] };
    let cop = if p_fa == 1.0 { MetricValue::exact(0.0) } else { p_md.complement() };
    Ok(EmpiricalMetrics { p_md, p_fa, cop, p_out, p_suc: willie_cdf[1].product(p_out.complement()) })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DetectionReport {
    /// Fraction of transmitting slots where the averaged power stayed at or below zeta.
    pub empirical_md_rate: MetricValue,
    /// Mean |P_avg - (P_a g + sigma_w^2)| over trials.
    pub mean_abs_power_gap: f64,
    pub gap_std_error: f64,
}

/// Symbol-level energy detector at Willie's best port.
///
/// Each trial draws a channel, sends `k` unit-power complex Gaussian symbols
/// through the strongest port, adds complex Gaussian noise of power
/// sigma_w^2, averages |y|^2 and compares it with `zeta`.
pub fn event_level_detection(link: &LinkBudget, willie: &NodeFas, zeta: f64, settings: &McSettings) -> Result<DetectionReport> {
    link.validate()?;
    settings.validate()?;
    let chol = cholesky_psd(&field_matrix(willie)?)?;
    let k = settings.symbols_per_slot;
    let amp = link.p_a.sqrt();
    let noise_amp = (0.5 * link.sigma2_w).sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let tallies = chunk_sizes(settings.trials)
        .into_par_iter()
        .enumerate()
        .map(|(c, size)| {
            let mut rng = SplitMix64::stream(settings.seed, c as u64);
            let mut field = Field::new(chol.nrows());
            let (mut misses, mut gap, mut gap_sq) = (0u64, 0.0, 0.0);
            for _ in 0..size {
                field.draw(&chol, &mut rng);
                let (port, g) = field.best_port();
                let (h_re, h_im) = (amp * field.re[port], amp * field.im[port]);
                let mut power = 0.0;
                for _ in 0..k {
                    let x_re: f64 = s * rng.sample::<f64, _>(StandardNormal);
                    let x_im: f64 = s * rng.sample::<f64, _>(StandardNormal);
                    let n_re: f64 = noise_amp * rng.sample::<f64, _>(StandardNormal);
                    let n_im: f64 = noise_amp * rng.sample::<f64, _>(StandardNormal);
                    let y_re = h_re * x_re - h_im * x_im + n_re;
                    let y_im = h_re * x_im + h_im * x_re + n_im;
                    power += y_re * y_re + y_im * y_im;
                }
                power /= k as f64;
                if power <= zeta {
                    misses += 1;
                }
                let d = (power - (link.p_a * g + link.sigma2_w)).abs();
                gap += d;
                gap_sq += d * d;
            }
            (misses, gap, gap_sq)
        })
        .collect::<Vec<_>>();
    let (mut misses, mut gap, mut gap_sq) = (0u64, 0.0, 0.0);
    for (m, g, g2) in tallies {
        misses += m;
        gap += g;
        gap_sq += g2;
    }
    let n = settings.trials as f64;
    let mean = gap / n;
    let var = (gap_sq / n - mean * mean).max(0.0);
    Ok(DetectionReport {
        empirical_md_rate: binomial(misses, settings.trials),
        mean_abs_power_gap: mean,
        gap_std_error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_correlation_matrix, PortGrid};

    fn mc(trials: usize) -> McSettings {
        McSettings { trials, seed: 7, symbols_per_slot: 1000 }
    }

    #[test]
    fn identity_gains_have_unit_mean() {
        let chol = DMatrix::identity(3, 3);
        let mut rng = SplitMix64::new(1);
        let n = 200_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            let d = sample_channel(&chol, &mut rng);
            for (s, g) in sums.iter_mut().zip(&d.gains) {
                *s += g;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn degenerate_matrix_gives_identical_ports() {
        let sigma = CorrelationMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let chol = cholesky_psd(&sigma).unwrap();
        let mut rng = SplitMix64::new(2);
        for _ in 0..1000 {
            let d = sample_channel(&chol, &mut rng);
            assert!((d.gains[0] - d.gains[2]).abs() <= 1e-4 * d.gains[0].max(1.0));
        }
    }

    #[test]
    fn adjacent_port_field_correlation() {
        let g = PortGrid::new(2, 2, 1.0, 1.0).unwrap();
        let chol = cholesky_psd(&build_correlation_matrix(&g).unwrap()).unwrap();
        let mut field = Field::new(4);
        let mut rng = SplitMix64::new(3);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            field.draw(&chol, &mut rng);
            acc += field.re[0] * field.re[1] + field.im[0] * field.im[1];
        }
        let rho = acc / n as f64;
        assert!((rho - 0.220_276_908_5).abs() < 0.01, "{rho}");
    }

    #[test]
    fn max_gain_cdf_examples() {
        let one = CorrelationMatrix::identity(1);
        assert_eq!(estimate_max_gain_cdf(&one, 0.0, &mc(10)).unwrap().value, 0.0);
        let v = estimate_max_gain_cdf(&one, 1.0, &mc(200_000)).unwrap();
        assert!((v.value - (1.0 - (-1f64).exp())).abs() <= v.abs_error_estimate);
        let four = CorrelationMatrix::identity(4);
        let v = estimate_max_gain_cdf(&four, 1.0, &mc(200_000)).unwrap();
        let want = (1.0 - (-1f64).exp()).powi(4);
        assert!((want - 0.1597).abs() < 1e-4);
        assert!((v.value - want).abs() <= v.abs_error_estimate);
        assert!(estimate_max_gain_cdf(&four, -1.0, &mc(10)).is_err());
    }

    #[test]
    fn nested_ports_lower_the_cdf() {
        let g = PortGrid::new(3, 3, 1.0, 1.0).unwrap();
        let full = build_correlation_matrix(&g).unwrap();
        let mut prev = 1.0;
        for n in 1..=9 {
            let idx: Vec<usize> = (0..n).collect();
            let v = estimate_max_gain_cdf(&full.select(&idx), 0.8, &mc(50_000)).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn below_noise_branches_are_exact() {
        let l = LinkBudget::reference();
        let node = NodeFas::reference();
        let m = estimate_metrics(&l, &node, &node, 0.7, &mc(1000)).unwrap();
        assert_eq!(m.p_md.value, 0.0);
        assert_eq!(m.p_fa, 1.0);
        assert_eq!(m.cop.value, 0.0);
    }

    #[test]
    fn deterministic_under_parallelism() {
        let sigma = build_correlation_matrix(&PortGrid::new(2, 2, 1.0, 1.0).unwrap()).unwrap();
        let a = estimate_max_gain_cdf(&sigma, 1.0, &mc(100_000)).unwrap();
        let b = estimate_max_gain_cdf(&sigma, 1.0, &mc(100_000)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn noise_only_limit() {
        // vanishing transmit power: the averaged power is ~sigma_w^2, so every
        // threshold above it is missed and every one below it is crossed
        let l = LinkBudget { p_a: 1e-12, ..LinkBudget::reference() };
        let w = NodeFas::reference();
        let s = McSettings { trials: 500, seed: 1, symbols_per_slot: 20_000 };
        let above = event_level_detection(&l, &w, 1.05, &s).unwrap();
        let below = event_level_detection(&l, &w, 0.95, &s).unwrap();
        assert_eq!(above.empirical_md_rate.value, 1.0);
        assert_eq!(below.empirical_md_rate.value, 0.0);
    }
}
