//! Small self-contained special-function kernels: the d-dimensional radial
//! Fourier kernel, Bessel J0, stable `sin(t) - t`, and half-integer Gamma
//! values for Gaussian moments. Nothing here depends on the rest of the crate.

use std::f64::consts::PI;

/// Surface area of the unit sphere in `d` dimensions (|S^{d-1}|).
pub fn sphere_surface(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Angular average of `exp(i k . x)` over directions at fixed `t = |k||x|`:
/// `cos t` in 1d, `J0(t)` in 2d, `sin(t)/t` in 3d.
pub fn fourier_kernel(d: usize, t: f64) -> f64 {
    match d {
        1 => t.cos(),
        2 => bessel_j0(t),
        3 => sinc(t),
        _ => panic!("unsupported dimension {d}"),
    }
}

/// `sin(t)/t`, series-expanded near zero.
pub fn sinc(t: f64) -> f64 {
    let a = t.abs();
    if a < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 * (1.0 - t2 / 20.0)
    } else {
        t.sin() / t
    }
}

/// Bessel function of the first kind, order zero.
///
/// Ascending series for |x| <= 8, Hankel-type asymptotic form beyond
/// (coefficients from Abramowitz & Stegun 9.4.3).
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 8.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..64 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1.0) {
                break;
            }
        }
        sum
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 0.785_398_163_397_448_3;
        let p0 = 1.0
            + y * (-0.109_862_862_7e-2
                + y * (0.273_451_040_7e-4 + y * (-0.207_337_063_9e-5 + y * 0.209_388_721_1e-6)));
        let q0 = -0.156_249_999_5e-1
            + y * (0.143_048_876_5e-3
                + y * (-0.691_114_765_1e-5 + y * (0.762_109_516_1e-6 + y * (-0.934_935_152e-7))));
        (0.636_619_772 / ax).sqrt() * (xx.cos() * p0 - z * xx.sin() * q0)
    }
}

/// `sin(w) - w` with the leading cancellation handled by a series below
/// |w| = 1e-3.
pub fn sin_minus_lin(w: f64) -> f64 {
    if w.abs() < 1e-3 {
        let w2 = w * w;
        -w * w2 / 6.0 * (1.0 - w2 / 20.0 * (1.0 - w2 / 42.0))
    } else {
        w.sin() - w
    }
}

/// Gamma(n/2) for positive integer `n`.
pub fn gamma_half(n: u32) -> f64 {
    assert!(n > 0, "gamma_half needs a positive argument");
    if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).fold(1.0, |acc, j| acc * j as f64)
    } else {
        // Gamma(1/2) = sqrt(pi), then Gamma(x+1) = x Gamma(x).
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Gaussian radial moment `int_{R^d} |u|^r e^{-u^2} du`.
pub fn gaussian_moment(d: usize, r: u32) -> f64 {
    PI.powf(d as f64 / 2.0) * gamma_half(r + d as u32) / gamma_half(d as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn j0_matches_reference_values() {
        // Reference values from A&S tables.
        assert_relative_eq!(bessel_j0(0.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(bessel_j0(1.0), 0.765_197_686_557_967, max_relative = 1e-12);
        assert_relative_eq!(bessel_j0(5.0), -0.177_596_771_314_338, max_relative = 1e-12);
        assert_relative_eq!(bessel_j0(10.0), -0.245_935_764_451_348, epsilon = 2e-8);
        assert_relative_eq!(bessel_j0(20.0), 0.167_024_664_340_583, epsilon = 2e-8);
    }

    #[test]
    fn j0_series_asymptotic_splice_is_continuous() {
        let below = bessel_j0(8.0 - 1e-9);
        let above = bessel_j0(8.0 + 1e-9);
        assert!((below - above).abs() < 1e-7);
    }

    #[test]
    fn sin_minus_lin_is_stable_near_zero() {
        for &w in &[1e-8, 1e-5, 1e-3, 0.5, 2.0] {
            let exact = -w * w * w / 6.0;
            let got = sin_minus_lin(w);
            // Leading order only; loose for the larger arguments.
            if w < 1e-3 {
                assert_relative_eq!(got, exact, max_relative = 1e-5);
            }
            assert_relative_eq!(sin_minus_lin(-w), -got, max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_moments_match_closed_forms() {
        // d=3: int e^{-k^2} = pi^{3/2}, int k^2 e^{-k^2} = (3/2) pi^{3/2},
        // int k^4 e^{-k^2} = (15/4) pi^{3/2}.
        let p32 = PI.powf(1.5);
        assert_relative_eq!(gaussian_moment(3, 0), p32, max_relative = 1e-14);
        assert_relative_eq!(gaussian_moment(3, 2), 1.5 * p32, max_relative = 1e-14);
        assert_relative_eq!(gaussian_moment(3, 4), 3.75 * p32, max_relative = 1e-14);
        // d=1: int e^{-k^2} = sqrt(pi), int k^2 e^{-k^2} = sqrt(pi)/2.
        assert_relative_eq!(gaussian_moment(1, 0), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gaussian_moment(1, 2), PI.sqrt() / 2.0, max_relative = 1e-14);
    }
}
