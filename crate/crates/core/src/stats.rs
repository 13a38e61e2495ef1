//! Welch's two-sample t-test.
//!
//! The two-tailed p-value of a t statistic with `ν` degrees of freedom is the
//! regularized incomplete beta `I_x(ν/2, 1/2)` at `x = ν/(ν + t²)`, evaluated
//! here with the usual continued fraction.

use crate::error::{Error, Result};

/// Welch statistic, Welch–Satterthwaite degrees of freedom and two-tailed p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Runs the test. Both samples need at least two values.
///
/// When both samples have zero variance the statistic is undefined; the
/// result is `p = 1` for equal means and `p = 0` otherwise.
pub fn welch(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Data(format!(
            "Welch test needs at least two values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("Welch test samples must be finite".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { f64::INFINITY.copysign(ma - mb) };
        return Ok(WelchTest { t, df: f64::NAN, p_value });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let p_value = student_t_two_tailed(t, df);
    Ok(WelchTest { t, df, p_value })
}

/// Two-tailed p-value of Welch's test; see [`welch`].
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    welch(a, b).map(|w| w.p_value)
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)`, the regularized incomplete beta function.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the continued fraction converges fastest on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
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
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pair() {
        // computed independently with a statistics package before writing this module
        let w = welch(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(w.t, -1.0);
        assert!((w.df - 8.0).abs() < 1e-12);
        assert!((w.p_value - 0.346_593_507_087_334_16).abs() < 1e-10, "{}", w.p_value);
    }

    #[test]
    fn unequal_sizes_and_variances() {
        let w = welch(&[98.0, 98.2, 98.4, 97.9], &[98.5, 98.1, 98.9]).unwrap();
        assert!((w.t - -1.463_850_109_422_781_8).abs() < 1e-10);
        assert!((w.df - 2.924_546_838_925_165_6).abs() < 1e-10);
        assert!((w.p_value - 0.241_685_538_562_557_1).abs() < 1e-10);
        let w = welch(&[1.5, 2.25, 3.0, 7.0, 0.1, 4.4], &[10.0, 11.5, 9.75]).unwrap();
        assert!((w.p_value - 3.389_363_719_426_338_3e-4).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_one() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(welch_t_test(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn zero_variance_conventions() {
        assert_eq!(welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn too_few_values() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn incomplete_beta_known_values() {
        // I_x(1,1) = x;  I_x(a,1) = x^a;  I_0.5(a,a) = 0.5
        for x in [0.1, 0.37, 0.5, 0.93] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(3.5, 1.0, x) - x.powf(3.5)).abs() < 1e-13);
        }
        assert!((regularized_incomplete_beta(4.2, 4.2, 0.5) - 0.5).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn t_distribution_one_degree_is_cauchy() {
        // P(|T| ≥ t) = 1 - 2·atan(t)/π for ν = 1
        for t in [0.3, 1.0, 2.5, 10.0] {
            let expected = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_tailed(t, 1.0) - expected).abs() < 1e-13);
        }
    }
}
