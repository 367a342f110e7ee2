//! Tail probabilities for the F and chi-square distributions with possibly
//! fractional degrees of freedom, via the regularized incomplete beta and
//! gamma functions.

use crate::error::{Error, Result};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_ur;

/// Upper-tail probability of an F(d1, d2) variate at `x`.
///
/// Degrees of freedom may be fractional. Computed as
/// `I_{d2/(d2 + d1 x)}(d2/2, d1/2)`, which is more accurate than
/// `1 - cdf(x)` far in the tail.
pub fn f_upper_tail(d1: f64, d2: f64, x: f64) -> Result<f64> {
    if !(d1.is_finite() && d2.is_finite() && x.is_finite()) || d1 <= 0.0 || d2 <= 0.0 || x < 0.0 {
        return Err(Error::Numeric(format!(
            "invalid F-tail arguments: d1={d1}, d2={d2}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let z = d2 / (d2 + d1 * x);
    Ok(beta_reg(d2 / 2.0, d1 / 2.0, z).clamp(0.0, 1.0))
}

/// Upper-tail probability of a chi-square variate with `df` degrees of
/// freedom (fractional allowed) at `x`.
pub fn chi2_upper_tail(df: f64, x: f64) -> Result<f64> {
    if !(df.is_finite() && x.is_finite()) || df <= 0.0 || x < 0.0 {
        return Err(Error::Numeric(format!(
            "invalid chi-square tail arguments: df={df}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(df / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Upper-tail quantile of the chi-square distribution (bisection on the
/// survival function; plenty for test tolerances).
pub fn chi2_upper_quantile(df: f64, p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Numeric(format!("quantile level out of range: {p}")));
    }
    let mut lo = 0.0_f64;
    let mut hi = df.max(1.0);
    while chi2_upper_tail(df, hi)? > p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric("chi-square quantile out of range".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_upper_tail(df, mid)? > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn f_tail_closed_form_d1_two() {
        // For d1 = 2 the survival function is (1 + 2x/d2)^(-d2/2).
        for &(d2, x) in &[(8.0_f64, 1.5_f64), (3.0, 0.2), (25.0, 4.0)] {
            let expect = (1.0 + 2.0 * x / d2).powf(-d2 / 2.0);
            assert_relative_eq!(f_upper_tail(2.0, d2, x).unwrap(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn f_tail_fractional_df_vs_beta_identity() {
        // Survival at the median-ish point for symmetric df equals 1/2 at x = 1.
        let p = f_upper_tail(3.7, 3.7, 1.0).unwrap();
        assert_relative_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn f_tail_limits() {
        assert_eq!(f_upper_tail(2.5, 7.0, 0.0).unwrap(), 1.0);
        assert!(f_upper_tail(2.5, 7.0, 1e9).unwrap() < 1e-10);
        assert!(f_upper_tail(-1.0, 7.0, 1.0).is_err());
    }

    #[test]
    fn chi2_tail_closed_form_df_two() {
        // df = 2 is Exp(1/2): survival = exp(-x/2).
        for &x in &[0.1, 1.0, 5.0, 20.0] {
            assert_relative_eq!(
                chi2_upper_tail(2.0, x).unwrap(),
                (-x / 2.0).exp(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn chi2_tail_reference_point() {
        // Classic 5% critical value for df = 1.
        assert_relative_eq!(
            chi2_upper_tail(1.0, 3.841458820694124).unwrap(),
            0.05,
            max_relative = 1e-10
        );
    }

    #[test]
    fn chi2_quantile_round_trip() {
        for &df in &[0.7, 1.0, 3.3, 11.0] {
            for &p in &[0.9, 0.5, 0.05, 0.001] {
                let q = chi2_upper_quantile(df, p).unwrap();
                assert_relative_eq!(chi2_upper_tail(df, q).unwrap(), p, max_relative = 1e-8);
            }
        }
    }
}
