//! Log-space helpers.

use statrs::function::gamma::ln_gamma;

/// Floor applied to probabilities before taking logs or dividing.
pub const CLAMP: f64 = 1e-300;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln C(n, k)`; exact zero for the trivial cases.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    if n <= 60 {
        // exact in u128 up to C(60, 30) ~ 1.2e17
        let mut c: u128 = 1;
        let k = k.min(n - k);
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return (c as f64).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    log_binomial(n, k).exp()
}

/// Normalizes log weights to probabilities.
pub fn normalize_log(xs: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(xs);
    xs.iter().map(|x| (x - z).exp()).collect()
}

pub fn clamp_ln(p: f64) -> f64 {
    p.max(CLAMP).ln()
}
