//! Scalar abstraction and the normal special functions used throughout.
//!
//! All curve arithmetic is generic over [`Real`] so the estimators work with
//! `f32` or `f64`. The special functions are evaluated internally in `f64`
//! and converted back, which keeps the stated accuracy bounds (absolute
//! error below 1e-7 for the normal CDF, below 1e-8 for its inverse) for
//! both scalar types.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the estimation core is generic over.
pub trait Real: Float + FromPrimitive + ToPrimitive + std::fmt::Debug + Send + Sync + 'static {
    fn from_f64x(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 not representable in scalar type")
    }
    fn to_f64x(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Error function.
///
/// Uses the all-positive confluent hypergeometric series for |x| <= 4 (no
/// cancellation) and the asymptotic erfc expansion beyond. Absolute error is
/// well below 1e-12 on the whole line.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x > 4.0 {
        return 1.0 - erfc_asymptotic(x);
    }
    // erf(x) = 2x e^{-x^2}/sqrt(pi) * sum_{n>=0} (2x^2)^n / (1*3*...*(2n+1))
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0u32;
    while term > 1e-18 * sum {
        n += 1;
        term *= 2.0 * x2 / (2.0 * f64::from(n) + 1.0);
        sum += term;
        if n > 200 {
            break;
        }
    }
    2.0 * x * (-x2).exp() / SQRT_PI * sum
}

/// Complementary error function for large positive x (x > 4).
fn erfc_asymptotic(x: f64) -> f64 {
    // erfc(x) ~ e^{-x^2}/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - ...)
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= -(2.0 * f64::from(k) - 1.0) / (2.0 * x2);
        if term.abs() < 1e-18 {
            break;
        }
        sum += term;
    }
    (-x2).exp() / (x * SQRT_PI) * sum
}

pub fn erfc(x: f64) -> f64 {
    if x > 4.0 {
        erfc_asymptotic(x)
    } else {
        1.0 - erf(x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided tail probability 2*(1 - Phi(|z|)).
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF (Acklam's rational approximation with one
/// Halley refinement step).
pub fn inv_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must be in (0, 1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley step against the forward CDF.
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// SplitMix64 step, used to derive per-replication seeds from a master seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.0)).abs() < 1e-15);
        assert!((erf(1.0) - 0.8427007929497149).abs() < 1e-12);
        assert!((erf(2.0) - 0.9953222650189527).abs() < 1e-12);
        assert!((erf(-1.0) + 0.8427007929497149).abs() < 1e-12);
        assert!((erfc(5.0) - 1.5374597944280347e-12).abs() < 1e-20);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((normal_cdf(-2.0) - 0.022750131948179195).abs() < 1e-12);
        assert!((normal_cdf(3.5) - 0.9997673709209645).abs() < 1e-10);
    }

    #[test]
    fn inverse_matches_forward() {
        for &p in &[1e-6, 0.001, 0.025, 0.1, 0.5, 0.9, 0.975, 0.999, 1.0 - 1e-6] {
            let z = inv_normal_cdf(p);
            assert!(
                (normal_cdf(z) - p).abs() < 1e-12,
                "p={p}, z={z}, back={}",
                normal_cdf(z)
            );
        }
        // The 97.5% quantile used for 95% intervals.
        assert!((inv_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn splitmix_is_deterministic() {
        assert_eq!(splitmix64(7), splitmix64(7));
        assert_ne!(splitmix64(7), splitmix64(8));
    }
}
