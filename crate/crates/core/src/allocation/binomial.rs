//! Binomial coefficients, exact and in the log domain.

use num_bigint::BigUint;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln C(n, k); `-inf` when k > n.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Exact C(n, k).
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 1..=k {
        acc *= n - k + i;
        acc /= i;
    }
    acc
}

/// Table of ln C(n, x) for x = 0..=limit.
pub(crate) fn ln_binomial_row(n: u64, limit: u64) -> Vec<f64> {
    (0..=limit.min(n)).map(|x| ln_binomial(n, x)).collect()
}

/// Table of C(n, x) for x = 0..=limit.
pub(crate) fn binomial_row(n: u64, limit: u64) -> Vec<BigUint> {
    let limit = limit.min(n);
    let mut row = Vec::with_capacity(limit as usize + 1);
    let mut c = BigUint::from(1u32);
    row.push(c.clone());
    for x in 1..=limit {
        c = c * (n - x + 1) / x;
        row.push(c.clone());
    }
    row
}
