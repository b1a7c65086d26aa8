//! Pearson chi-square statistics and their upper-tail p-values.

use statrs::function::gamma::gamma_ur;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// P(X >= stat) for X ~ chi-square(df).
pub fn chi_square_sf(stat: f64, df: usize) -> f64 {
    if stat == f64::INFINITY {
        return 0.0;
    }
    if df == 0 || stat <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, stat / 2.0)
}

/// Goodness of fit against the given expected counts. Cells with zero
/// expectation must be empty.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            stat = f64::INFINITY;
        }
    }
    let df = cells.max(1) - 1;
    ChiSquare {
        statistic: stat,
        df,
        p_value: chi_square_sf(stat, df),
    }
}

/// Goodness of fit against equal cell probabilities.
pub fn chi_square_uniform(observed: &[u64]) -> ChiSquare {
    let n: u64 = observed.iter().sum();
    let e = n as f64 / observed.len() as f64;
    chi_square_gof(observed, &vec![e; observed.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        // 95th percentiles of chi-square with 1 and 10 degrees of freedom.
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(18.307_038_053_275_146, 10) - 0.05).abs() < 1e-9);
        // df = 2 is exponential with mean 2.
        assert!((chi_square_sf(4.0, 2) - (-2.0f64).exp()).abs() < 1e-12);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
    }

    #[test]
    fn uniform_fit() {
        let r = chi_square_uniform(&[10, 10, 10, 10]);
        assert_eq!((r.statistic, r.df, r.p_value), (0.0, 3, 1.0));
        let skew = chi_square_uniform(&[100, 0, 0, 0]);
        assert!(skew.p_value < 1e-10);
    }

    #[test]
    fn impossible_cell_rejects() {
        let r = chi_square_gof(&[5, 1], &[6.0, 0.0]);
        assert_eq!(r.p_value, 0.0);
    }
}
