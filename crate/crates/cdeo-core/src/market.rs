//! Black-Scholes market parameters.

use crate::error::{CdeoError, Result};
use crate::num_kernel::KernelParams;

/// Parameters of the risk-neutral Black-Scholes market in log-price
/// coordinates: `dX_t = (r - sigma^2/2) dt + sigma dW_t`, bond `dB = r B dt`.
///
/// `horizon` is the fixed time horizon `T` of the CDEO problem and `x0` the
/// anchor log-price at which the objective `v_eu(T, x0)` is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub r: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub x0: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64, horizon: f64, x0: f64) -> Result<Self> {
        if !(r.is_finite() && sigma.is_finite() && horizon.is_finite() && x0.is_finite()) {
            return Err(CdeoError::domain("market parameters must be finite"));
        }
        if r < 0.0 {
            return Err(CdeoError::domain(format!("interest rate must be >= 0, got {r}")));
        }
        if sigma <= 0.0 {
            return Err(CdeoError::domain(format!("volatility must be > 0, got {sigma}")));
        }
        if horizon <= 0.0 {
            return Err(CdeoError::domain(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(MarketParams { r, sigma, horizon, x0 })
    }

    /// Risk-neutral log-price drift `r_hat = r - sigma^2/2`.
    #[inline]
    pub fn r_hat(&self) -> f64 {
        self.r - 0.5 * self.sigma * self.sigma
    }

    /// Drift of the zero-rate transformed model, `r_tilde = -r - sigma^2/2`.
    #[inline]
    pub fn r_tilde(&self) -> f64 {
        -self.r - 0.5 * self.sigma * self.sigma
    }

    #[inline]
    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Exponent weight `2r/sigma^2` of the zero-rate transformation.
    #[inline]
    pub fn gamma(&self) -> f64 {
        2.0 * self.r / self.sigma2()
    }

    /// Kernel parameters of the transformed (driftless-bond) model.
    pub fn kernel_params(&self) -> KernelParams {
        KernelParams {
            r_tilde: self.r_tilde(),
            sigma2: self.sigma2(),
            horizon: self.horizon,
            x0: self.x0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_drifts() {
        let m = MarketParams::new(0.06, 0.4, 0.5, 4.7).unwrap();
        assert!((m.r_hat() - (0.06 - 0.08)).abs() < 1e-15);
        assert!((m.r_tilde() - (-0.06 - 0.08)).abs() < 1e-15);
        assert!((m.gamma() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MarketParams::new(-0.01, 0.4, 0.5, 0.0).is_err());
        assert!(MarketParams::new(0.0, 0.0, 0.5, 0.0).is_err());
        assert!(MarketParams::new(0.0, 0.4, 0.0, 0.0).is_err());
        assert!(MarketParams::new(f64::NAN, 0.4, 1.0, 0.0).is_err());
    }
}
