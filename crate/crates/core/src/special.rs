//! Special-function kit: log-factorials, associated Laguerre polynomials,
//! and the modified Bessel function of order zero.

/// Natural logs of factorials: returns `v` with `v[n] = ln(n!)` for `n <= nmax`.
pub fn ln_factorials(nmax: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(nmax + 1);
    v.push(0.0);
    let mut acc = 0.0f64;
    for n in 1..=nmax {
        acc += (n as f64).ln();
        v.push(acc);
    }
    v
}

/// Associated Laguerre polynomial L_n^(k)(x) by the three-term recurrence.
///
/// Intended for moderate n where the value fits in f64; the displacement
/// builder uses an internally rescaled variant instead.
pub fn laguerre_assoc(n: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    if n == 0 {
        return 1.0;
    }
    let mut lm2 = 1.0;
    let mut lm1 = 1.0 + kf - x;
    for j in 2..=n {
        let jf = j as f64;
        let l = ((2.0 * jf - 1.0 + kf - x) * lm1 - (jf - 1.0 + kf) * lm2) / jf;
        lm2 = lm1;
        lm1 = l;
    }
    lm1
}

/// Modified Bessel function I_0(x) to ~1e-12 relative accuracy.
///
/// Power series below x = 35 (all terms positive, so no cancellation);
/// asymptotic expansion above, where the series needs too many terms.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 35.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 1.0f64;
        while term > 1e-18 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        // I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k / (8x)^k with
        // a_k = prod_{j=1..k} (2j-1)^2 / k!; terms still decreasing at k = 12
        // for x >= 35, leaving a relative tail below 1e-13.
        let inv8x = 1.0 / (8.0 * x);
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for k in 1..=12u32 {
            let m = 2.0 * f64::from(k) - 1.0;
            term *= m * m * inv8x / f64::from(k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        x.exp() / (2.0 * std::f64::consts::PI * x).sqrt() * sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_factorials_match_direct_products() {
        let v = ln_factorials(20);
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[5], 120.0f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(v[10], 3628800.0f64.ln(), max_relative = 1e-15);
        let fact20 = 2432902008176640000.0f64;
        assert_relative_eq!(v[20], fact20.ln(), max_relative = 1e-15);
    }

    #[test]
    fn laguerre_low_orders_match_closed_forms() {
        // L_1^(k)(x) = 1 + k - x, L_2^(0)(x) = 1 - 2x + x^2/2.
        for &(k, x) in &[(0usize, 0.3), (2, 1.7), (5, 4.0)] {
            assert_relative_eq!(
                laguerre_assoc(1, k, x),
                1.0 + k as f64 - x,
                max_relative = 1e-14
            );
        }
        let x = 2.3;
        assert_relative_eq!(
            laguerre_assoc(2, 0, x),
            1.0 - 2.0 * x + 0.5 * x * x,
            max_relative = 1e-13
        );
        // L_2^(1)(x) = x^2/2 - 3x + 3.
        assert_relative_eq!(
            laguerre_assoc(2, 1, x),
            0.5 * x * x - 3.0 * x + 3.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn laguerre_matches_series_definition() {
        // L_n^(k)(x) = sum_j (-1)^j C(n+k, n-j) x^j / j!
        let binom = |a: usize, b: usize| -> f64 {
            let lf = ln_factorials(a);
            (lf[a] - lf[b] - lf[a - b]).exp()
        };
        for &(n, k, x) in &[(7usize, 3usize, 1.9f64), (12, 0, 0.7), (9, 5, 3.1)] {
            let mut sum = 0.0;
            let mut xj = 1.0;
            let mut jfact = 1.0;
            for j in 0..=n {
                if j > 0 {
                    xj *= x;
                    jfact *= j as f64;
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * binom(n + k, n - j) * xj / jfact;
            }
            assert_relative_eq!(laguerre_assoc(n, k, x), sum, max_relative = 1e-11);
        }
    }

    #[test]
    fn bessel_i0_reference_values() {
        // Reference values computed with 50-digit arithmetic.
        let cases: &[(f64, f64)] = &[
            (0.0, 1.0),
            (0.5, 1.0634833707413235),
            (1.0, 1.2660658777520083),
            (2.0, 2.2795853023360673),
            (5.0, 27.239871823604447),
            (10.0, 2815.7166284662545),
            (20.0, 43558282.559553533),
            (34.9, 9.7264251402698785e13),
            (35.0, 1.0733881849451406e14),
            (35.1, 1.1845739333232663e14),
            (50.0, 2.9325537838493363e20),
            (100.0, 1.0737517071310738e42),
        ];
        for &(x, want) in cases {
            assert_relative_eq!(bessel_i0(x), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn bessel_i0_continuous_across_series_switch() {
        // I0 itself varies by ~2e-9 relative across this 2e-9 interval
        // (logarithmic derivative ~1), so the gate checks branch agreement
        // only down to that scale.
        let below = bessel_i0(35.0 - 1e-9);
        let above = bessel_i0(35.0 + 1e-9);
        assert_relative_eq!(below, above, max_relative = 1e-8);
    }
}
