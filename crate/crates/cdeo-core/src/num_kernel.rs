//! Scalar numerical primitives: Gaussian densities, stable density ratios,
//! the pricing kernel of the transformed model, and closed-form
//! Black-Scholes put values and derivatives.
//!
//! Everything here is pure and stateless. Ratios of normal densities are
//! always evaluated through their closed forms in log space and
//! exponentiated last, so they survive arguments for which the direct
//! quotient of two densities would over- or underflow.

use crate::error::{CdeoError, Result};
use crate::market::MarketParams;

/// `1/sqrt(2*pi)`.
pub const INV_SQRT_2PI: f64 = 0.3989422804014327;
const LN_2PI: f64 = 1.8378770664093453;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Mean and variance of a univariate normal density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussParams {
    pub mean: f64,
    pub variance: f64,
}

impl GaussParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(CdeoError::domain("Gaussian parameters must be finite"));
        }
        if variance <= 0.0 {
            return Err(CdeoError::domain(format!("variance must be > 0, got {variance}")));
        }
        Ok(GaussParams { mean, variance })
    }
}

/// Parameters of the pricing kernel of the transformed (constant-bond)
/// model: drift `r_tilde = -r - sigma^2/2`, variance rate `sigma2`, horizon
/// `T` and anchor log-price `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub r_tilde: f64,
    pub sigma2: f64,
    pub horizon: f64,
    pub x0: f64,
}

/// Normal density `phi(mean, var, y)`.
pub fn norm_pdf(p: GaussParams, y: f64) -> Result<f64> {
    Ok(log_norm_pdf(p, y)?.exp())
}

/// `ln phi(mean, var, y)`; the workhorse behind every density evaluation.
pub fn log_norm_pdf(p: GaussParams, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(CdeoError::domain(format!("norm_pdf argument must be finite, got {y}")));
    }
    if !(p.variance > 0.0) || !p.mean.is_finite() || !p.variance.is_finite() {
        return Err(CdeoError::domain("invalid Gaussian parameters"));
    }
    let z = y - p.mean;
    Ok(-0.5 * (LN_2PI + p.variance.ln()) - 0.5 * z * z / p.variance)
}

/// Standard normal cumulative distribution function.
///
/// Evaluated as `erfc(-z/sqrt(2))/2`; the complementary-error-function
/// route keeps absolute error at the 1e-16 level over the whole line,
/// including the far tails where `1 - Phi(z)` would lose all digits.
pub fn norm_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(CdeoError::domain(format!("norm_cdf argument must be finite, got {z}")));
    }
    Ok(0.5 * libm::erfc(-z * FRAC_1_SQRT_2))
}

/// Standard normal density.
#[inline]
pub fn std_norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `ln( phi(p1, y) / phi(p2, y) )` through the closed forms:
///
/// * unequal variances: with `A = (m2*v1 - m1*v2)/(v1 - v2)` and
///   `B = v1*v2/(v2 - v1)`,
///   `ln ratio = ln sqrt(v2/v1) - (y-A)^2/(2B) - (m1-m2)^2/(2(v1-v2))`;
/// * equal variances: `ln ratio = y*(m1-m2)/v + (m2^2 - m1^2)/(2v)`.
pub fn log_pdf_ratio(p1: GaussParams, p2: GaussParams, y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(CdeoError::domain(format!("pdf_ratio argument must be finite, got {y}")));
    }
    if !(p1.variance > 0.0 && p2.variance > 0.0) {
        return Err(CdeoError::domain("pdf_ratio requires positive variances"));
    }
    Ok(log_pdf_ratio_raw(p1.mean, p1.variance, p2.mean, p2.variance, y))
}

/// Unchecked closed-form log density ratio for pre-validated hot loops.
#[inline]
pub(crate) fn log_pdf_ratio_raw(m1: f64, v1: f64, m2: f64, v2: f64, y: f64) -> f64 {
    if v1 == v2 {
        y * (m1 - m2) / v1 + (m2 * m2 - m1 * m1) / (2.0 * v1)
    } else {
        let dv = v1 - v2;
        let a = (m2 * v1 - m1 * v2) / dv;
        let b = v1 * v2 / (v2 - v1);
        let dm = m1 - m2;
        let za = y - a;
        0.5 * (v2 / v1).ln() - za * za / (2.0 * b) - dm * dm / (2.0 * dv)
    }
}

/// Ratio of two normal densities `phi(p1, y) / phi(p2, y)`.
///
/// Computed via [`log_pdf_ratio`], never by direct division, so deep-tail
/// arguments where either density underflows still return the correct
/// ratio. A ratio beyond f64 range comes back as `f64::INFINITY`.
pub fn pdf_ratio(p1: GaussParams, p2: GaussParams, y: f64) -> Result<f64> {
    Ok(log_pdf_ratio(p1, p2, y)?.exp())
}

/// Pricing kernel of the transformed model,
/// `kappa(t, x, y) = phi(x + r_tilde*(T-t), sigma2*(T-t), y) / phi(x0 + r_tilde*T, sigma2*T, y)`
/// for a time coordinate `0 <= t < T`.
pub fn kernel_kappa(k: &KernelParams, t: f64, x: f64, y: f64) -> Result<f64> {
    Ok(log_kernel_kappa(k, t, x, y)?.exp())
}

/// `ln kappa(t, x, y)`; see [`kernel_kappa`].
pub fn log_kernel_kappa(k: &KernelParams, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t >= 0.0 && t < k.horizon) {
        return Err(CdeoError::domain(format!(
            "kernel time must satisfy 0 <= t < T = {}, got {t}",
            k.horizon
        )));
    }
    let rem = k.horizon - t;
    let num = GaussParams::new(x + k.r_tilde * rem, k.sigma2 * rem)?;
    let den = GaussParams::new(k.x0 + k.r_tilde * k.horizon, k.sigma2 * k.horizon)?;
    log_pdf_ratio(num, den, y)
}

/// `d1` of the Black-Scholes formula in log coordinates.
#[inline]
fn put_d1(r: f64, sigma: f64, k_strike: f64, theta: f64, x: f64) -> f64 {
    (x - k_strike + (r + 0.5 * sigma * sigma) * theta) / (sigma * theta.sqrt())
}

/// Black-Scholes value of a European put with log-strike `k_strike` at time
/// to maturity `theta` and log-price `x`:
/// `e^{-r theta} K Phi(-d2) - s Phi(-d1)`, `s = e^x`, `K = e^{k_strike}`;
/// intrinsic value `(K - s)^+` at `theta = 0`.
pub fn bs_put_value(m: &MarketParams, k_strike: f64, theta: f64, x: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(CdeoError::domain(format!("put maturity must be >= 0, got {theta}")));
    }
    let k = k_strike.exp();
    let s = x.exp();
    if theta == 0.0 {
        return Ok((k - s).max(0.0));
    }
    let d1 = put_d1(m.r, m.sigma, k_strike, theta, x);
    let d2 = d1 - m.sigma * theta.sqrt();
    Ok((-m.r * theta).exp() * k * norm_cdf(-d2)? - s * norm_cdf(-d1)?)
}

/// The three partial derivatives of the Black-Scholes put in `(theta, x)`.
#[derive(Debug, Clone, Copy)]
pub struct BsPutDerivs {
    /// `D1 v`, derivative in time to maturity.
    pub d_theta: f64,
    /// `D2 v`, derivative in log-price.
    pub d_x: f64,
    /// `D12 v`, the mixed derivative.
    pub d_x_theta: f64,
}

/// Closed-form derivatives of [`bs_put_value`]:
///
/// `D1 v = s*sigma/(2 sqrt(theta)) * pdf(d1) - r K e^{-r theta} Phi(-d2)`,
/// `D2 v = -s Phi(-d1)`,
/// `D12 v = s * ((r + sigma^2/2) theta - (x - k)) / (2 theta^{3/2} sigma) * pdf(d1)`.
pub fn bs_put_derivs(m: &MarketParams, k_strike: f64, theta: f64, x: f64) -> Result<BsPutDerivs> {
    if theta <= 0.0 {
        return Err(CdeoError::domain(format!("put derivatives need theta > 0, got {theta}")));
    }
    let k = k_strike.exp();
    let s = x.exp();
    let sqrt_th = theta.sqrt();
    let d1 = put_d1(m.r, m.sigma, k_strike, theta, x);
    let d2 = d1 - m.sigma * sqrt_th;
    let pdf_d1 = std_norm_pdf(d1);
    let d_theta = s * m.sigma / (2.0 * sqrt_th) * pdf_d1 - m.r * k * (-m.r * theta).exp() * norm_cdf(-d2)?;
    let d_x = -s * norm_cdf(-d1)?;
    let d_x_theta =
        s * ((m.r + 0.5 * m.sigma2()) * theta - (x - k_strike)) / (2.0 * theta.powf(1.5) * m.sigma) * pdf_d1;
    Ok(BsPutDerivs { d_theta, d_x, d_x_theta })
}
