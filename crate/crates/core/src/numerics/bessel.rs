//! Cylindrical Bessel function of the first kind, order zero.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// J0(x), accurate to about 1e-15 absolute for every finite `x`.
///
/// Small arguments use the ascending series, moderate ones Miller's
/// backward recurrence normalised by `J0 + 2 * sum(J_2k) = 1`, and large
/// ones the Hankel asymptotic expansion truncated at its smallest term.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("bessel_j0 needs a finite argument, got {x}")));
    }
    let x = x.abs();
    Ok(if x <= SERIES_LIMIT {
        ascending_series(x)
    } else if x <= ASYMPTOTIC_LIMIT {
        miller_recurrence(x)
    } else {
        hankel_asymptotic(x)
    })
}

fn ascending_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let k = k as f64;
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

fn miller_recurrence(x: f64) -> f64 {
    // Start order well past x so that J_start(x) is negligible.
    let mut start = (x + 12.0 * x.cbrt() + 16.0).ceil() as usize;
    if !start.is_multiple_of(2) {
        start += 1;
    }
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{n+1}
    let mut current = 1e-300; // J_n, arbitrary scale
    let mut even_sum = 0.0;
    let mut j0 = 0.0;
    for n in (1..=start).rev() {
        let prev = n as f64 * two_over_x * current - next;
        next = current;
        current = prev;
        // `current` now holds J_{n-1}
        let order = n - 1;
        if order == 0 {
            j0 = current;
        } else if order % 2 == 0 {
            even_sum += current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            next *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    j0 / (j0 + 2.0 * even_sum)
}

fn hankel_asymptotic(x: f64) -> f64 {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let eight_x = 8.0 * x;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * (-odd * odd) / (k as f64 * eight_x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        // a_k / x^k enters P (even k) or Q (odd k) with sign (-1)^floor(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt. The integrand is smooth and
    /// periodic, so the trapezoid rule converges geometrically.
    fn integral_oracle(x: f64) -> f64 {
        let n = 4000;
        let h = PI / n as f64;
        let mut s = 0.5 * (1.0 + (x * PI.sin()).cos());
        for i in 1..n {
            s += (x * (i as f64 * h).sin()).cos();
        }
        s * h / PI
    }

    #[test]
    fn value_at_zero() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn first_zero() {
        // First zero located by bisection on the integral oracle.
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if integral_oracle(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 2.404_825_557_695_773).abs() < 1e-12);
        assert!(bessel_j0(2.404826).unwrap().abs() < 1e-5);
        assert!(bessel_j0(lo).unwrap().abs() < 1e-13);
    }

    #[test]
    fn two_pi() {
        let v = bessel_j0(TAU).unwrap();
        assert!((v - 0.220_276_908_539_9).abs() < 1e-12, "{v}");
        assert!((v - integral_oracle(TAU)).abs() < 1e-13);
    }

    #[test]
    fn matches_integral_everywhere() {
        let mut x = -40.0;
        while x <= 80.0 {
            let got = bessel_j0(x).unwrap();
            let want = integral_oracle(x);
            assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
            x += 0.173;
        }
    }

    #[test]
    fn branch_boundaries_are_continuous() {
        let b = SERIES_LIMIT;
        assert!((ascending_series(b) - miller_recurrence(b)).abs() < 1e-15);
        let b = ASYMPTOTIC_LIMIT;
        assert!((miller_recurrence(b) - hankel_asymptotic(b)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(bessel_j0(f64::NAN).is_err());
        assert!(bessel_j0(f64::INFINITY).is_err());
    }
}
