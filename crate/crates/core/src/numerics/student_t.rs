//! Univariate Student-t, standard normal and chi helpers.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

const EDGEWORTH_NU: f64 = 1e7;

fn check_nu(nu: f64) -> Result<()> {
    if nu.is_nan() || nu <= 0.0 || nu.is_infinite() {
        return Err(Error::domain(format!(
            "degrees of freedom must be positive and finite, got {nu}"
        )));
    }
    Ok(())
}

/// ln Gamma(a + 1/2) - ln Gamma(a).
///
/// Differencing two large log-gammas loses digits once `a` is big, so the
/// tail uses the Stirling-type series in 1/a directly.
fn ln_gamma_half_ratio(a: f64) -> f64 {
    if a < 15.0 {
        return ln_gamma(a + 0.5) - ln_gamma(a);
    }
    // coefficients (-1)^{k+1} (2^-k - 2) B_{k+1} / (k (k+1)) for odd k
    const COEFFS: [(i32, f64); 6] = [
        (1, -1.0 / 8.0),
        (3, 1.0 / 192.0),
        (5, -1.0 / 640.0),
        (7, 17.0 / 14336.0),
        (9, -(2.0 - 1.0 / 512.0) * (5.0 / 66.0) / 90.0),
        (11, (2.0 - 1.0 / 2048.0) * (691.0 / 2730.0) / 132.0),
    ];
    let mut s = 0.5 * a.ln();
    for (k, c) in COEFFS {
        s += c / a.powi(k);
    }
    s
}

/// ln B(nu/2, 1/2).
fn ln_beta_t(nu: f64) -> f64 {
    0.5 * PI.ln() - ln_gamma_half_ratio(0.5 * nu)
}

/// Continued fraction for the regularised incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..50_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 4.0 * f64::EPSILON {
            break;
        }
    }
    h
}

/// Two-sided tail P(|T| > |x|) = I_z(nu/2, 1/2) with z = nu / (nu + x^2).
fn two_sided_tail(x: f64, nu: f64) -> f64 {
    let t2 = x * x;
    if t2 == 0.0 {
        return 1.0;
    }
    let a = 0.5 * nu;
    let b = 0.5;
    // z and 1 - z, each computed without cancellation
    let z = 1.0 / (1.0 + t2 / nu);
    let zc = 1.0 / (1.0 + nu / t2);
    let ln_z = -(t2 / nu).ln_1p();
    let ln_zc = -(nu / t2).ln_1p();
    let ln_front = a * ln_z + b * ln_zc - ln_beta_t(nu);
    if z < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_continued_fraction(a, b, z) / a).min(1.0)
    } else {
        (1.0 - ln_front.exp() * beta_continued_fraction(b, a, zc) / b).max(0.0)
    }
}

/// CDF of the univariate Student-t distribution with `nu` degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if x.is_nan() {
        return Err(Error::domain("student_t_cdf: NaN argument"));
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if nu >= EDGEWORTH_NU {
        // the continued fraction needs O(sqrt(nu)) terms here; the O(1/nu^2)
        // remainder of the first-order expansion is below 1e-13
        let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        return Ok(normal_cdf(x) - phi * x * (x * x + 1.0) / (4.0 * nu));
    }
    let tail = 0.5 * two_sided_tail(x, nu);
    Ok(if x <= 0.0 { tail } else { 1.0 - tail })
}

/// Density of the univariate Student-t distribution.
pub fn student_t_pdf(x: f64, nu: f64) -> f64 {
    (-ln_beta_t(nu) - 0.5 * nu.ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp()
}

/// Quantile (inverse CDF) of the univariate Student-t distribution.
///
/// `p = 0` and `p = 1` map to the signed infinities.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("probability must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // solve in the lower half and reflect; 1 - p is exact for p >= 0.5
    let (q, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let x = if nu == 1.0 {
        -1.0 / (PI * q).tan()
    } else if nu == 2.0 {
        (2.0 * q - 1.0) / (2.0 * q * (1.0 - q)).sqrt()
    } else {
        lower_quantile(q, nu)
    };
    Ok(sign * x)
}

/// Safeguarded Newton on ln F(x) = ln q for q < 1/2, x < 0.
fn lower_quantile(q: f64, nu: f64) -> f64 {
    let cdf = |x: f64| student_t_cdf(x, nu).expect("finite x and checked nu");
    let z = normal_quantile(q);
    let mut x = z * (1.0 + (z * z + 1.0) / (4.0 * nu));
    let mut hi = 0.0;
    let mut lo;
    if cdf(x) >= q {
        hi = x;
        lo = 2.0 * x - 1.0;
        while cdf(lo) >= q {
            hi = lo;
            lo *= 2.0;
        }
        x = 0.5 * (lo + hi);
    } else {
        lo = x;
    }
    let ln_q = q.ln();
    for _ in 0..200 {
        let f = cdf(x);
        if f < q {
            lo = x;
        } else {
            hi = x;
        }
        let density = student_t_pdf(x, nu);
        let mut next = if f > 0.0 && density > 0.0 {
            x - (f.ln() - ln_q) * f / density
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step on ln Phi polishes the series inverse
    let f = normal_cdf(x);
    let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    if f > 0.0 && density > 0.0 {
        x - (f.ln() - p.ln()) * f / density
    } else {
        x
    }
}

/// Quantile of sqrt(W / nu) for W chi-square with `nu` degrees of freedom.
///
/// Newton iteration on the regularised lower incomplete gamma, started from
/// the Wilson-Hilferty approximation.
pub fn chi_scale_quantile(w: f64, nu: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return f64::INFINITY;
    }
    let a = 0.5 * nu;
    let z = normal_quantile(w);
    let c = 1.0 / (9.0 * a);
    let wh = 1.0 - c + z * c.sqrt();
    if nu >= EDGEWORTH_NU && wh > 0.0 {
        // Wilson-Hilferty is already exact to O(nu^-3/2) here
        return wh.powf(1.5);
    }
    let mut y = if wh > 0.0 { a * wh * wh * wh } else { 0.0 };
    if y <= 1e-3 * a {
        // small-y branch: P(a, y) ~ y^a / Gamma(a + 1)
        y = ((w.ln() + ln_gamma(a + 1.0)) / a).exp();
    }
    let ln_gamma_a = ln_gamma(a);
    for _ in 0..60 {
        if y <= 0.0 || !y.is_finite() {
            break;
        }
        let f = gamma_lr(a, y) - w;
        let density = ((a - 1.0) * y.ln() - y - ln_gamma_a).exp();
        if density <= 0.0 {
            break;
        }
        let mut next = y - f / density;
        if next <= 0.0 {
            next = 0.5 * y;
        }
        let done = (next - y).abs() <= 1e-13 * y;
        y = next;
        if done {
            break;
        }
    }
    (2.0 * y / nu).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre integral of the t density from 0 to |x|.
    fn cdf_by_quadrature(x: f64, nu: f64) -> f64 {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let panels = 4000;
        let h = x.abs() / panels as f64;
        let mut s = 0.0;
        for i in 0..panels {
            let mid = (i as f64 + 0.5) * h;
            for (t, w) in nodes {
                s += w * 0.5 * h * student_t_pdf(mid + 0.5 * h * t, nu);
            }
        }
        if x >= 0.0 {
            0.5 + s
        } else {
            0.5 - s
        }
    }

    #[test]
    fn cdf_at_zero_is_half() {
        for nu in [0.5, 1.0, 3.0, 40.0, 1e6] {
            assert_eq!(student_t_cdf(0.0, nu).unwrap(), 0.5);
        }
    }

    #[test]
    fn cauchy_cdf() {
        assert!((student_t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-14);
        for x in [-30.0, -3.0, -0.2, 0.7, 5.0] {
            let want = 0.5 + f64::atan(x) / PI;
            assert!((student_t_cdf(x, 1.0).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn cdf_matches_density_quadrature() {
        for nu in [1.5, 2.0, 5.0, 40.0, 1000.0] {
            for x in [-6.0, -2.0211, -0.3, 0.9, 2.0211, 4.5] {
                let got = student_t_cdf(x, nu).unwrap();
                let want = cdf_by_quadrature(x, nu);
                assert!((got - want).abs() < 1e-13, "nu={nu} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn large_nu_approaches_normal() {
        for x in [-3.0, -1.0, 0.5, 2.0] {
            let got = student_t_cdf(x, 1e12).unwrap();
            assert!((got - normal_cdf(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(student_t_quantile(0.5, 7.0).unwrap(), 0.0);
        assert!((student_t_quantile(0.75, 1.0).unwrap() - 1.0).abs() < 1e-14);
        // x with T_40(x) = 0.975, bracketed by bisection on the quadrature oracle
        let (mut lo, mut hi) = (1.9, 2.1);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf_by_quadrature(mid, 40.0) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = student_t_quantile(0.975, 40.0).unwrap();
        assert!((q - lo).abs() < 1e-10, "{q} vs {lo}");
        assert!((q - 2.0211).abs() < 1e-4);
        assert!((student_t_cdf(2.0211, 40.0).unwrap() - 0.975).abs() < 1e-5);
    }

    #[test]
    fn quantile_hits_target_probability() {
        for nu in [0.7, 1.0, 2.0, 3.3, 40.0, 1e6] {
            for p in [1e-200, 1e-12, 1e-4, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-12] {
                let x = student_t_quantile(p, nu).unwrap();
                let back = student_t_cdf(x, nu).unwrap();
                assert!((back - p).abs() <= 1e-12 * p.max(1e-3), "nu={nu} p={p}");
            }
        }
    }

    #[test]
    fn quantile_edges_and_errors() {
        assert_eq!(student_t_quantile(0.0, 4.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(student_t_quantile(1.0, 4.0).unwrap(), f64::INFINITY);
        assert!(student_t_quantile(-0.1, 4.0).is_err());
        assert!(student_t_quantile(1.1, 4.0).is_err());
        assert!(student_t_quantile(0.3, 0.0).is_err());
        assert!(student_t_cdf(0.3, -2.0).is_err());
    }

    #[test]
    fn chi_scale_quantile_inverts_gamma() {
        for nu in [1.0, 4.0, 40.0, 1e6] {
            for w in [1e-9, 0.01, 0.5, 0.93, 1.0 - 1e-9] {
                let r = chi_scale_quantile(w, nu);
                let back = gamma_lr(0.5 * nu, 0.5 * nu * r * r);
                assert!((back - w).abs() < 1e-9, "nu={nu} w={w}: {back}");
            }
        }
    }

    #[test]
    fn continuous_across_expansion_switch() {
        for x in [-4.0, -1.0, 0.3, 2.5] {
            let below = student_t_cdf(x, EDGEWORTH_NU * (1.0 - 1e-9)).unwrap();
            let above = student_t_cdf(x, EDGEWORTH_NU).unwrap();
            assert!((below - above).abs() < 5e-12, "x={x}: {below} vs {above}");
        }
    }

    #[test]
    fn normal_round_trip() {
        for p in [1e-12, 0.02, 0.5, 0.97] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-14 * p.max(1e-2) * 100.0);
        }
    }

    #[test]
    fn chi_scale_large_nu_is_near_gaussian() {
        // s = sqrt(chi2_nu / nu) ~ 1 + z / sqrt(2 nu) to leading order
        let nu = 1e8;
        for w in [0.01, 0.3, 0.9] {
            let z = normal_quantile(w);
            let s = chi_scale_quantile(w, nu);
            assert!((s - 1.0 - z / (2.0 * nu).sqrt()).abs() < 1e-7, "w={w}: {s}");
        }
    }
}
