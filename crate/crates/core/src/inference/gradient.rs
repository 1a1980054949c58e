//! Log-density targets and finite-difference gradients.

/// A log density on an unconstrained space.
///
/// `log_density` returns `-inf` outside the support. Everything except
/// `dim` and `log_density` has a default so that simple analytic targets
/// stay short.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Gradient of `log_density`; central differences unless overridden.
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<(), GradientError> {
        central_difference(|y| self.log_density(y), x, out)
    }

    /// Point around which chains are initialised.
    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x[{i}]")).collect()
    }

    /// Maps an unconstrained point to the natural parameter scale.
    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    /// Per-observation log likelihood, when the target has observations.
    fn pointwise_loglik(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Log prior including the change-of-variables Jacobian.
    fn log_prior(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GradientError {
    #[error("log density is {value} at the evaluation point")]
    NonFiniteCenter { value: f64 },
    #[error("non-finite log density next to coordinate {coordinate}")]
    NonFiniteNeighbour { coordinate: usize },
}

/// Central finite differences with step `cbrt(eps) · max(1, |x_i|)`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], out: &mut [f64]) -> Result<(), GradientError> {
    let base = f64::EPSILON.cbrt();
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        // round the step to a representable offset
        let h = ((xi + base * xi.abs().max(1.0)) - xi).abs();
        probe[i] = xi + h;
        let up = f(&probe);
        probe[i] = xi - h;
        let down = f(&probe);
        probe[i] = xi;
        if !(up.is_finite() && down.is_finite()) {
            return Err(GradientError::NonFiniteNeighbour { coordinate: i });
        }
        out[i] = (up - down) / (2.0 * h);
    }
    Ok(())
}

/// Convenience wrapper returning a fresh gradient vector.
pub fn grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Result<Vec<f64>, GradientError> {
    let center = f(x);
    if !center.is_finite() {
        return Err(GradientError::NonFiniteCenter { value: center });
    }
    let mut out = vec![0.0; x.len()];
    central_difference(f, x, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::negbin_logpmf;

    #[test]
    fn quadratic_gradient() {
        let x = [0.3, -1.7, 4.0, 0.0];
        let g = grad(|y| -0.5 * y.iter().map(|v| v * v).sum::<f64>(), &x).unwrap();
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi + xi).abs() < 1e-6);
        }
    }

    #[test]
    fn negbin_mean_derivative() {
        // d/dθ log NB(d; θ, ψ) = d/θ - (d + ψ)/(θ + ψ)
        let (d, theta, psi) = (3u64, 2.0, 1.0);
        let g = grad(|y| negbin_logpmf(d, y[0], psi).unwrap(), &[theta]).unwrap();
        let exact = d as f64 / theta - (d as f64 + psi) / (theta + psi);
        assert!((g[0] - exact).abs() < 1e-6, "{} vs {exact}", g[0]);
    }

    #[test]
    fn symmetric_quartic_has_zero_gradient() {
        let g = grad(|y| -y[0].powi(4), &[0.0]).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn non_finite_neighbour_names_coordinate() {
        let f = |y: &[f64]| if y[1] > 1.0 { f64::NEG_INFINITY } else { -y[0] * y[0] };
        assert_eq!(
            grad(f, &[0.0, 1.0]).unwrap_err(),
            GradientError::NonFiniteNeighbour { coordinate: 1 }
        );
        assert!(matches!(grad(|_| f64::NAN, &[0.0]), Err(GradientError::NonFiniteCenter { .. })));
    }
}
