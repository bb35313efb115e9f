//! Finite-difference utilities for verifying analytic gradients.
//!
//! Every backward pass in this crate is checked against central differences;
//! these helpers keep the comparison consistent across the unit tests and the
//! acceptance suite.

/// Central finite differences of a scalar function over a flat parameter
/// vector: `(f(p + eps e_i) - f(p - eps e_i)) / (2 eps)` per coordinate.
pub fn numeric_grad(params: &[f64], eps: f64, mut eval: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let plus = eval(&work);
        work[i] = orig - eps;
        let minus = eval(&work);
        work[i] = orig;
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// Worst relative disagreement between two gradient vectors. The denominator
/// is floored at 1e-4 so coordinates where both gradients are essentially
/// zero are compared absolutely rather than amplifying finite-difference
/// noise.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_recovered() {
        // f(p) = sum p_i^2 has gradient 2p.
        let p = [0.3, -1.2, 2.0];
        let numeric = numeric_grad(&p, 1e-5, |q| q.iter().map(|v| v * v).sum());
        let analytic: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        assert!(max_rel_err(&analytic, &numeric) < 1e-9);
    }

    #[test]
    fn disagreement_is_reported() {
        let err = max_rel_err(&[1.0, 2.0], &[1.0, 2.2]);
        assert!(err > 0.09 && err < 0.1);
    }
}
