//! Scalar helpers shared by the updates and the bound.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Floor applied to the local bound parameters.
pub const XI_FLOOR: f64 = 1e-8;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln sigma(z)` without overflow.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `lambda(xi) = tanh(xi / 2) / (4 xi)`, with the limit `1/8 - xi^2/96` near 0.
pub fn jj_lambda(xi: f64) -> f64 {
    let xi = xi.abs();
    if xi < 1e-4 {
        0.125 - xi * xi / 96.0
    } else {
        (0.5 * xi).tanh() / (4.0 * xi)
    }
}

/// Differential entropy of `Beta(a, b)`.
pub fn beta_entropy(a: f64, b: f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    ln_beta - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}

/// Differential entropy of `Gamma(shape, rate)`.
pub fn gamma_entropy(shape: f64, rate: f64) -> f64 {
    shape - rate.ln() + ln_gamma(shape) + (1.0 - shape) * digamma(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_limit_and_continuity() {
        assert_eq!(jj_lambda(0.0), 0.125);
        for &x in &[1e-6_f64, 1e-5, 9.9e-5, 1.01e-4, 1e-3] {
            let exact = (0.5 * x).tanh() / (4.0 * x);
            assert!((jj_lambda(x) - exact).abs() < 1e-15, "{x}");
        }
        // Series: 1/8 - x^2/96 + x^4/960 ...
        let x = 0.01;
        assert!((jj_lambda(x) - (0.125 - x * x / 96.0 + x.powi(4) / 960.0)).abs() < 1e-14);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-12);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        for &z in &[-3.0, -0.2, 0.7, 5.0] {
            assert!((log_sigmoid(z) - sigmoid(z).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn entropies_reference_values() {
        // Beta(1, 1) is uniform on [0, 1]; Gamma(1, 1) is Exp(1) with entropy 1.
        assert!(beta_entropy(1.0, 1.0).abs() < 1e-12);
        assert!((gamma_entropy(1.0, 1.0) - 1.0).abs() < 1e-12);
        // Gamma(1, 2) is Exp(2): 1 - ln 2.
        assert!((gamma_entropy(1.0, 2.0) - (1.0 - 2f64.ln())).abs() < 1e-12);
        // Beta(2, 2): ln B(2,2) - psi(2) - psi(2) + 2 psi(4) = ln(1/6) + 2(psi(4) - psi(2)) = -1.791759 + 2*(5/6).
        assert!((beta_entropy(2.0, 2.0) - ((1.0f64 / 6.0).ln() + 5.0 / 3.0)).abs() < 1e-12);
    }
}
