//! Multivariate Student-t CDF.
//!
//! Dimensions one and two are handled by the univariate CDF and by a
//! one-dimensional adaptive quadrature over the conditional law. From three
//! dimensions up the probability is written as
//!
//! ```text
//! P(X <= u) = E_s[ P(L Y <= s u) ],   s = sqrt(W / nu),  W ~ chi^2_nu,  Y ~ N(0, I)
//! ```
//!
//! and the inner Gaussian orthant is peeled one coordinate at a time
//! (sequential conditioning on the Cholesky factor). The resulting integral
//! over the unit cube is evaluated with randomly shifted Korobov lattices;
//! the spread across shifts gives the error estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{ShiftedLattice, KOROBOV_TABLE};
use super::linalg::cholesky_psd;
use super::quadrature::integrate;
use super::rng::SplitMix64;
use super::student_t::{chi_scale_quantile, normal_cdf, normal_quantile, student_t_cdf, student_t_quantile};
use crate::error::{Error, Result};
use crate::geometry::CorrelationMatrix;

/// Smallest lattice tried; smaller rules give unreliable spread estimates.
const FIRST_LATTICE: usize = 3;

/// t copula parameters: degrees of freedom and correlation matrix.
#[derive(Clone, Debug)]
pub struct CopulaSpec {
    pub nu: f64,
    pub sigma: CorrelationMatrix,
}

impl CopulaSpec {
    pub fn new(nu: f64, sigma: CorrelationMatrix) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("degrees of freedom must be positive, got {nu}")));
        }
        Ok(Self { nu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmcSettings {
    pub target_abs_error: f64,
    pub max_points: usize,
    pub shifts: usize,
    pub seed: u64,
    /// Sort coordinates by ascending limit before factorising.
    pub reorder: bool,
}

impl Default for QmcSettings {
    fn default() -> Self {
        Self { target_abs_error: 1e-4, max_points: 1 << 20, shifts: 12, seed: 0, reorder: true }
    }
}

impl QmcSettings {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shifts < 2 {
            return Err(Error::invariant("qmc.shifts must be at least 2"));
        }
        if !(self.target_abs_error > 0.0) {
            return Err(Error::invariant("qmc.target_abs_error must be positive"));
        }
        if self.max_points == 0 {
            return Err(Error::invariant("qmc.max_points must be positive"));
        }
        Ok(())
    }
}

/// A probability with an absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// False when the integrator stopped at its point budget above target.
    pub converged: bool,
}

impl MetricValue {
    pub fn exact(value: f64) -> Self {
        Self { value, abs_error_estimate: 0.0, converged: true }
    }

    pub fn new(value: f64, abs_error_estimate: f64) -> Self {
        Self { value: value.clamp(0.0, 1.0), abs_error_estimate, converged: true }
    }

    pub fn complement(self) -> Self {
        Self { value: (1.0 - self.value).clamp(0.0, 1.0), ..self }
    }

    /// Product with first-order error propagation.
    pub fn product(self, other: Self) -> Self {
        Self {
            value: (self.value * other.value).clamp(0.0, 1.0),
            abs_error_estimate: self.value.abs() * other.abs_error_estimate
                + other.value.abs() * self.abs_error_estimate,
            converged: self.converged && other.converged,
        }
    }
}

/// P(X_1 <= upper_1, ..., X_n <= upper_n) for X multivariate t(nu, sigma).
pub fn mvt_cdf(upper: &[f64], spec: &CopulaSpec, settings: &QmcSettings) -> Result<MetricValue> {
    Ok(mvt_cdf_pair(upper, spec, settings)?.0)
}

/// [`mvt_cdf`] with every coordinate at the same limit.
pub fn mvt_cdf_equal(level: f64, spec: &CopulaSpec, settings: &QmcSettings) -> Result<MetricValue> {
    mvt_cdf(&vec![level; spec.dim()], spec, settings)
}

/// The CDF together with its complement P(X_i > upper_i for some i).
///
/// The complement is integrated directly rather than formed as 1 - CDF, so
/// it keeps relative accuracy when the CDF is within rounding of one.
pub fn mvt_cdf_pair(upper: &[f64], spec: &CopulaSpec, settings: &QmcSettings) -> Result<(MetricValue, MetricValue)> {
    settings.validate()?;
    if upper.len() != spec.dim() {
        return Err(Error::domain(format!(
            "limit vector has {} entries for a {}-dimensional distribution",
            upper.len(),
            spec.dim()
        )));
    }
    if upper.iter().any(|u| u.is_nan()) {
        return Err(Error::domain("NaN integration limit"));
    }
    if upper.contains(&f64::NEG_INFINITY) {
        return Ok((MetricValue::exact(0.0), MetricValue::exact(1.0)));
    }
    // +inf coordinates integrate out; marginals of a t law stay t
    let mut active: Vec<usize> = (0..upper.len()).filter(|&i| upper[i] < f64::INFINITY).collect();
    if settings.reorder {
        active.sort_by(|&i, &j| upper[i].total_cmp(&upper[j]));
    }
    let limits: Vec<f64> = active.iter().map(|&i| upper[i]).collect();
    let nu = spec.nu;
    match limits.len() {
        0 => Ok((MetricValue::exact(1.0), MetricValue::exact(0.0))),
        1 => Ok((
            MetricValue::exact(student_t_cdf(limits[0], nu)?),
            MetricValue::exact(student_t_cdf(-limits[0], nu)?),
        )),
        2 => {
            let rho = spec.sigma.get(active[0], active[1]);
            let (a, b) = (limits[0], limits[1]);
            let (v, e) = bivariate_t_cdf(a, b, rho, nu)?;
            // inclusion-exclusion over the two upper tails
            let (both, e_both) = bivariate_t_cdf(-a, -b, rho, nu)?;
            let tail = student_t_cdf(-a, nu)? + student_t_cdf(-b, nu)? - both;
            Ok((MetricValue::new(v, e), MetricValue::new(tail, e_both)))
        }
        _ => {
            let sigma = spec.sigma.select(&active);
            let (cdf, tail) = lattice_mvt(&limits, &sigma, nu, settings)?;
            if tail.abs_error_estimate <= TAIL_RESOLUTION * tail.value {
                return Ok((cdf, tail));
            }
            // far tail: the lattice rarely lands in the exceedance region
            let (lo, hi, quad_err) = union_bounds(&limits, &sigma, nu)?;
            if hi - lo >= 2.0 * tail.abs_error_estimate && (lo..=hi).contains(&tail.value) {
                return Ok((cdf, tail));
            }
            let mid = 0.5 * (lo + hi);
            let err = 0.5 * (hi - lo) + quad_err;
            Ok((MetricValue::new(1.0 - mid, err), MetricValue::new(mid, err)))
        }
    }
}

/// Relative error above which the lattice exceedance is checked against
/// the pairwise union bounds.
const TAIL_RESOLUTION: f64 = 0.01;

/// Bounds on P(X_i > b_i for some i) from univariate and pairwise tails:
/// the second-order Bonferroni lower bound (floored at the largest single
/// tail) and Hunter's spanning-tree upper bound.
fn union_bounds(limits: &[f64], sigma: &CorrelationMatrix, nu: f64) -> Result<(f64, f64, f64)> {
    let d = limits.len();
    let single: Vec<f64> = limits.iter().map(|&b| student_t_cdf(-b, nu)).collect::<Result<_>>()?;
    let mut pair = vec![vec![0.0; d]; d];
    let mut quad_err = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let (v, e) = bivariate_t_cdf(-limits[i], -limits[j], sigma.get(i, j), nu)?;
            pair[i][j] = v;
            pair[j][i] = v;
            quad_err += e;
        }
    }
    let s1: f64 = single.iter().sum();
    let s2: f64 = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).map(|(i, j)| pair[i][j]).sum();
    let lower = (s1 - s2).max(single.iter().copied().fold(0.0, f64::max));

    // Prim's algorithm for the maximum-weight spanning tree
    let mut in_tree = vec![false; d];
    let mut best = vec![f64::NEG_INFINITY; d];
    in_tree[0] = true;
    best[1..].copy_from_slice(&pair[0][1..]);
    let mut tree = 0.0;
    for _ in 1..d {
        let next = (0..d)
            .filter(|&j| !in_tree[j])
            .max_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("vertices remain");
        tree += best[next];
        in_tree[next] = true;
        for j in 0..d {
            if !in_tree[j] {
                best[j] = best[j].max(pair[next][j]);
            }
        }
    }
    let upper = (s1 - tree).min(1.0);
    Ok((lower.min(upper), upper, quad_err))
}

/// Bivariate t CDF with correlation `rho`, returned with a quadrature error bound.
///
/// Integrates the conditional law X2 | X1 = x ~ t_{nu+1}(rho x, (1 - rho^2)(nu + x^2)/(nu + 1))
/// against the t_nu marginal of X1, after the substitution w = T_nu(x).
pub fn bivariate_t_cdf(a: f64, b: f64, rho: f64, nu: f64) -> Result<(f64, f64)> {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok((0.0, 0.0));
    }
    if a == f64::INFINITY {
        return Ok((student_t_cdf(b, nu)?, 0.0));
    }
    if b == f64::INFINITY {
        return Ok((student_t_cdf(a, nu)?, 0.0));
    }
    if rho >= 1.0 - 1e-12 {
        return Ok((student_t_cdf(a.min(b), nu)?, 0.0));
    }
    if rho <= -1.0 + 1e-12 {
        let v = student_t_cdf(a, nu)? - student_t_cdf(-b, nu)?;
        return Ok((v.max(0.0), 0.0));
    }
    // integrate along the coordinate with the smaller marginal mass
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let upper_w = student_t_cdf(a, nu)?;
    let cond_scale = (1.0 - rho * rho) / (nu + 1.0);
    let integrand = |w: f64| {
        let x = student_t_quantile(w, nu).unwrap_or(f64::NAN);
        if !x.is_finite() {
            // the conditional limit tends to a finite constant at the ends
            let z = -rho.signum() * x.signum() * (rho * rho / cond_scale).sqrt();
            return student_t_cdf(z, nu + 1.0).unwrap_or(0.0);
        }
        let z = (b - rho * x) / (cond_scale * (nu + x * x)).sqrt();
        student_t_cdf(z, nu + 1.0).unwrap_or(0.0)
    };
    let (v, e) = integrate(integrand, 0.0, upper_w, 1e-12, 2000);
    Ok((v.clamp(0.0, 1.0), e))
}

fn lattice_mvt(
    limits: &[f64],
    sigma: &CorrelationMatrix,
    nu: f64,
    settings: &QmcSettings,
) -> Result<(MetricValue, MetricValue)> {
    let chol = cholesky_psd(sigma)?;
    let d = limits.len();
    let lower: Vec<Vec<f64>> = (0..d).map(|i| (0..i).map(|j| chol[(i, j)]).collect()).collect();
    let diag: Vec<f64> = (0..d).map(|i| chol[(i, i)]).collect();
    let integrand = Integrand { limits, lower: &lower, diag: &diag, nu };

    let summarise = |xs: &[f64]| {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, 3.0 * (var / m).sqrt())
    };
    let mut last = None;
    for (level, &(n, multiplier)) in KOROBOV_TABLE.iter().enumerate().skip(FIRST_LATTICE) {
        if last.is_some() && n * settings.shifts > settings.max_points {
            break;
        }
        let estimates: Vec<(f64, f64)> = (0..settings.shifts)
            .into_par_iter()
            .map(|s| {
                let mut rng = SplitMix64::stream(settings.seed, s as u64);
                let lattice = ShiftedLattice::new(n, multiplier, d, &mut rng);
                let mut point = vec![0.0; d];
                let mut scratch = vec![0.0; d];
                let (mut sum, mut sum_c) = (0.0, 0.0);
                for k in 0..lattice.len() {
                    lattice.point(k, &mut point);
                    let (p, c) = integrand.eval(&point, &mut scratch);
                    sum += p;
                    sum_c += c;
                }
                (sum / n as f64, sum_c / n as f64)
            })
            .collect();
        let (p, c): (Vec<f64>, Vec<f64>) = estimates.into_iter().unzip();
        let (p, c) = (summarise(&p), summarise(&c));
        last = Some((p, c));
        if p.1.max(c.1) <= settings.target_abs_error {
            return Ok((MetricValue::new(p.0, p.1), MetricValue::new(c.0, c.1)));
        }
        if level + 1 == KOROBOV_TABLE.len() {
            break;
        }
    }
    let (p, c) = last.expect("at least one lattice evaluated");
    let flagged = |(v, e): (f64, f64)| MetricValue { value: v.clamp(0.0, 1.0), abs_error_estimate: e, converged: false };
    Ok((flagged(p), flagged(c)))
}

struct Integrand<'a> {
    limits: &'a [f64],
    lower: &'a [Vec<f64>],
    diag: &'a [f64],
    nu: f64,
}

impl Integrand<'_> {
    /// `w[0]` drives the chi scale, `w[1..]` the conditioned normals.
    /// Returns the conditional probability and its complement.
    fn eval(&self, w: &[f64], y: &mut [f64]) -> (f64, f64) {
        let d = self.limits.len();
        let s = chi_scale_quantile(w[0], self.nu);
        let mut prob = 1.0;
        // ln of the product, accumulated from the per-step upper tails
        let mut ln_prob = 0.0;
        for i in 0..d {
            let shift: f64 = self.lower[i].iter().zip(&y[..i]).map(|(l, yj)| l * yj).sum();
            let bound = s * self.limits[i] - shift;
            let (e, tail) = if self.diag[i] > 0.0 {
                (normal_cdf(bound / self.diag[i]), normal_cdf(-bound / self.diag[i]))
            } else if bound >= 0.0 {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            prob *= e;
            if prob == 0.0 || tail >= 1.0 {
                return (0.0, 1.0);
            }
            ln_prob += (-tail).ln_1p();
            if i + 1 < d {
                y[i] = if self.diag[i] > 0.0 {
                    normal_quantile((w[i + 1] * e).clamp(1e-300, 1.0 - 1e-16))
                } else {
                    0.0
                };
            }
        }
        (prob, -ln_prob.exp_m1())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn spec(nu: f64, m: DMatrix<f64>) -> CopulaSpec {
        CopulaSpec::new(nu, CorrelationMatrix::new(m).unwrap()).unwrap()
    }

    #[test]
    fn univariate_median() {
        let s = CopulaSpec::new(7.0, CorrelationMatrix::identity(1)).unwrap();
        let v = mvt_cdf(&[0.0], &s, &QmcSettings::default()).unwrap();
        assert_eq!(v.value, 0.5);
    }

    #[test]
    fn orthant_identity() {
        for rho in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            for nu in [1.0, 5.0, 40.0] {
                let s = CopulaSpec::new(nu, CorrelationMatrix::bivariate(rho).unwrap()).unwrap();
                let v = mvt_cdf(&[0.0, 0.0], &s, &QmcSettings::default()).unwrap();
                let want = 0.25 + rho.asin() / (2.0 * PI);
                assert!((v.value - want).abs() < 1e-9, "rho={rho} nu={nu}: {}", v.value);
            }
        }
    }

    #[test]
    fn bivariate_independence_factorises() {
        for (a, b) in [(-1.0, 0.5), (2.0, -0.3), (-4.0, -4.0)] {
            // independent normals only in the nu -> inf limit; use a huge nu
            let (v, _) = bivariate_t_cdf(a, b, 0.0, 1e7).unwrap();
            let want = normal_cdf(a) * normal_cdf(b);
            assert!((v - want).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn bivariate_perfect_correlation() {
        let (v, _) = bivariate_t_cdf(0.3, -0.2, 1.0, 4.0).unwrap();
        assert_eq!(v, student_t_cdf(-0.2, 4.0).unwrap());
        let (v, _) = bivariate_t_cdf(0.3, 0.5, -1.0, 4.0).unwrap();
        let want = student_t_cdf(0.3, 4.0).unwrap() - student_t_cdf(-0.5, 4.0).unwrap();
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn independence_limit_in_four_dimensions() {
        let s = spec(1e6, DMatrix::identity(4, 4));
        let u = student_t_quantile(0.9, 1e6).unwrap();
        let v = mvt_cdf_equal(u, &s, &QmcSettings::default()).unwrap();
        assert!((v.value - 0.6561).abs() < 1e-3, "{v:?}");
        assert!(v.converged);
    }

    #[test]
    fn exchangeable_orthant() {
        // equicorrelated rho = 1/2 in 3D: P(all <= 0) = 1/4 for any elliptical law
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
        for nu in [3.0, 40.0] {
            let v = mvt_cdf(&[0.0; 3], &spec(nu, m.clone()), &QmcSettings::default()).unwrap();
            assert!((v.value - 0.25).abs() < 3e-4, "{v:?}");
        }
    }

    #[test]
    fn infinite_limits() {
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.3 });
        let s = spec(5.0, m);
        let q = QmcSettings::default();
        assert_eq!(mvt_cdf(&[f64::INFINITY; 3], &s, &q).unwrap().value, 1.0);
        assert_eq!(mvt_cdf(&[0.0, f64::NEG_INFINITY, 1.0], &s, &q).unwrap().value, 0.0);
        let v = mvt_cdf(&[0.4, f64::INFINITY, f64::INFINITY], &s, &q).unwrap();
        assert!((v.value - student_t_cdf(0.4, 5.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let s = spec(5.0, DMatrix::identity(3, 3));
        let q = QmcSettings::default();
        assert!(mvt_cdf(&[0.0, 0.0], &s, &q).is_err());
        assert!(mvt_cdf(&[0.0, f64::NAN, 0.0], &s, &q).is_err());
        let bad = QmcSettings { shifts: 1, ..q };
        assert!(mvt_cdf(&[0.0; 3], &s, &bad).is_err());
        assert!(CopulaSpec::new(0.0, CorrelationMatrix::identity(2)).is_err());
    }

    #[test]
    fn point_budget_is_respected_and_flagged() {
        let m = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.4 });
        let q = QmcSettings { target_abs_error: 1e-12, max_points: 20_000, ..Default::default() };
        let v = mvt_cdf(&[0.1, 0.5, -0.2, 1.0, 0.0], &spec(4.0, m), &q).unwrap();
        assert!(!v.converged);
        assert!(v.abs_error_estimate > 1e-12);
        assert!((0.0..=1.0).contains(&v.value));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.2 });
        let s = spec(6.0, m);
        let q = QmcSettings::default().with_seed(99);
        let a = mvt_cdf(&[0.1, 0.2, 0.3, 0.4], &s, &q).unwrap();
        let b = mvt_cdf(&[0.1, 0.2, 0.3, 0.4], &s, &q).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn metric_value_algebra() {
        let a = MetricValue::new(0.5, 0.01);
        let b = MetricValue::new(0.2, 0.02);
        let p = a.product(b);
        assert!((p.value - 0.1).abs() < 1e-15);
        assert!((p.abs_error_estimate - (0.5 * 0.02 + 0.2 * 0.01)).abs() < 1e-15);
        assert_eq!(a.complement().value, 0.5);
        assert_eq!(a.complement().abs_error_estimate, 0.01);
    }

    #[test]
    fn far_tail_complement_keeps_relative_accuracy() {
        // near-Gaussian independent ports: P(some X_i > b) = 1 - (1 - q)^3
        let s = spec(1e9, DMatrix::identity(3, 3));
        let b = 7.0;
        let (cdf, tail) = mvt_cdf_pair(&[b; 3], &s, &QmcSettings::default()).unwrap();
        let q = normal_cdf(-b);
        let want = -(3.0 * (-q).ln_1p()).exp_m1();
        assert!((tail.value - want).abs() < 1e-6 * want, "{} vs {want}", tail.value);
        assert!(tail.abs_error_estimate < 1e-3 * want);
        assert!((cdf.value + tail.value - 1.0).abs() < 1e-14, "{cdf:?} {tail:?}");
    }

    #[test]
    fn complement_sums_to_one_in_the_bulk() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, 0.5, 0.1, 0.5, 1.0]);
        let (cdf, tail) = mvt_cdf_pair(&[0.2, -0.4, 1.0], &spec(6.0, m), &QmcSettings::default()).unwrap();
        assert!((cdf.value + tail.value - 1.0).abs() < 1e-12);
        assert!(tail.abs_error_estimate <= 1e-4);
    }

    #[test]
    fn union_bounds_bracket_the_single_tail() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.2, 0.6, 1.0, 0.4, 0.2, 0.4, 1.0]);
        let sigma = CorrelationMatrix::new(m).unwrap();
        let (lo, hi, _) = union_bounds(&[3.0, 3.5, 4.0], &sigma, 10.0).unwrap();
        let singles: Vec<f64> = [3.0, 3.5, 4.0].iter().map(|&b| student_t_cdf(-b, 10.0).unwrap()).collect();
        assert!(lo >= singles[0] && lo <= hi);
        assert!(hi <= singles.iter().sum::<f64>());
    }
}
