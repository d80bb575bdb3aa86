//! Least-squares power laws `y = a x^k`, fitted as lines in log-log space.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub prefactor: f64,
    /// Coefficient of determination of the log-log line.
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope x + intercept`. Needs two distinct `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, my - slope * mx, r2))
}

/// Fits `y = a x^k`; points with non-positive coordinates are dropped.
pub fn power_law(x: &[f64], y: &[f64]) -> Option<PowerLaw> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let (slope, intercept, r2) = linear_fit(&lx, &ly)?;
    Some(PowerLaw { exponent: slope, prefactor: intercept.exp(), r2, points: lx.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        assert!(power_law(&[1.0, -2.0], &[1.0, 1.0]).is_none());
    }

    proptest! {
        #[test]
        fn recovers_exact_power_laws(k in -3.0f64..3.0, a in 0.01f64..100.0,
                                     xs in proptest::collection::vec(1.0f64..1e3, 3..12)) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|p, q| (*p - *q).abs() < 1e-3);
            prop_assume!(xs.len() >= 2);
            let ys: Vec<f64> = xs.iter().map(|x| a * x.powf(k)).collect();
            let f = power_law(&xs, &ys).unwrap();
            prop_assert!((f.exponent - k).abs() < 1e-8);
            prop_assert!((f.prefactor / a - 1.0).abs() < 1e-6);
        }
    }
}
