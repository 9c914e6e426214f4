//! Exact distribution functions used as independent oracles.
//!
//! The Monte Carlo tail tests in [`crate::concentration`] compare empirical
//! event frequencies against closed-form bounds; a handful of grid points are
//! additionally cross-checked against the *exact* event probability. Those
//! exact values come from here: the regularized incomplete gamma function
//! `P(a, x)` evaluated by power series (for `x < a + 1`) or by Lentz's
//! continued fraction for its complement `Q(a, x)` (otherwise), with `ln Γ`
//! from the Lanczos approximation. Everything downstream is a one-liner:
//!
//! - `chi2_cdf(k, x) = P(k/2, x/2)` — CDF of χ² with `k` degrees of freedom,
//!   the law of `‖w‖²/σ²` for `w ~ N(0, σ²Iₖ)`;
//! - `erf(x) = sign(x)·P(1/2, x²)`;
//! - `normal_cdf(z) = erfc(−z/√2)/2`, evaluated through `Q` in the tail so
//!   probabilities like `Φ(−5.66) ≈ 7.6e−9` keep full relative accuracy.
//!
//! Accuracy is ~1e−14 relative over the ranges exercised here, a few orders
//! below the binomial noise floor of any feasible trial count, so oracle
//! error never decides a test.

/// Lanczos coefficients (g = 7, n = 9), standard double-precision set.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 1000;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x)/Γ(a)`, `a > 0, x ≥ 0`.
pub fn gammp(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_frac(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gammq(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cont_frac(a, x)
    }
}

/// Series representation of `P(a, x)`, convergent for `x < a + 1`.
fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Lentz continued fraction for `Q(a, x)`, convergent for `x ≥ a + 1`.
fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = f64::MIN_POSITIVE / f64::EPSILON;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * gammp(0.5, x * x)
    }
}

/// Complementary error function, accurate in both tails.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gammq(0.5, x * x)
    } else {
        1.0 + gammp(0.5, x * x)
    }
}

/// Standard normal CDF `Φ(z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of the χ² distribution with `k` degrees of freedom at `x`.
pub fn chi2_cdf(k: f64, x: f64) -> f64 {
    debug_assert!(k > 0.0);
    if x <= 0.0 {
        0.0
    } else {
        gammp(0.5 * k, 0.5 * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Relative-or-absolute closeness against an externally computed value.
    fn assert_close(got: f64, want: f64, rel: f64) {
        let err = (got - want).abs() / want.abs().max(1e-300);
        assert!(
            err <= rel || (got - want).abs() < 1e-15,
            "got {got:e}, want {want:e}, rel err {err:e}"
        );
    }

    // Reference values computed independently with scipy 1.15.3
    // (scipy.stats.chi2.cdf / norm.cdf / scipy.special.erf).

    #[test]
    fn chi2_cdf_matches_reference_values() {
        assert_close(chi2_cdf(16.0, 8.0), 0.0511336157928473, 1e-12);
        assert_close(chi2_cdf(16.0, 32.0), 0.9900002190468952, 1e-12);
        assert_close(chi2_cdf(64.0, 32.0), 0.00027619979919740837, 1e-12);
        assert_close(chi2_cdf(1.0, 1.0), 0.6826894921370859, 1e-12);
        assert_close(chi2_cdf(2.0, 3.0), 0.7768698398515702, 1e-12);
        assert_close(chi2_cdf(10.0, 2.5), 0.009124279218395273, 1e-12);
        assert_close(chi2_cdf(64.0, 128.0), 0.9999963829789048, 1e-12);
        // Deep lower tail keeps relative accuracy.
        assert_close(chi2_cdf(256.0, 128.0), 1.2723672854257493e-12, 1e-9);
    }

    #[test]
    fn normal_cdf_matches_reference_values() {
        assert_close(normal_cdf(-2.0), 0.022750131948179195, 1e-13);
        assert_close(normal_cdf(-1.0), 0.15865525393145707, 1e-13);
        assert_close(normal_cdf(0.5), 0.6914624612740131, 1e-13);
        assert_close(normal_cdf(2.0), 0.9772498680518208, 1e-13);
        assert_close(normal_cdf(1.2345), 0.8914916766373298, 1e-13);
        // Far tail: relative, not just absolute, accuracy.
        assert_close(normal_cdf(-5.66), 7.568649751997682e-9, 1e-10);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn erf_matches_reference_values() {
        assert_close(erf(0.5), 0.5204998778130465, 1e-13);
        assert_close(erf(1.0), 0.8427007929497148, 1e-13);
        assert_close(erf(2.0), 0.9953222650189527, 1e-13);
        assert_close(erf(-1.5), -0.9661051464753108, 1e-13);
        assert_eq!(erf(0.0), 0.0);
    }

    #[test]
    fn gamma_identities_hold() {
        // P + Q = 1 across both evaluation branches.
        for &(a, x) in &[(0.5, 0.2), (3.0, 10.0), (128.0, 64.0), (8.0, 8.5)] {
            assert!((gammp(a, x) + gammq(a, x) - 1.0).abs() < 1e-14);
        }
        // Γ(n) = (n−1)! via ln_gamma.
        assert_close(ln_gamma(6.0), 120.0f64.ln(), 1e-14);
        assert_close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-14);
    }
}
