//! American payoffs of the one-sided class `g(x) = 1_{x <= K} * phi(x)`,
//! European payoff functions, and the structural checks the CDEO theory
//! needs from them.

use std::sync::Arc;

use crate::error::{CdeoError, Result};
use crate::market::MarketParams;
use crate::num_kernel;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Central-difference step used when a custom payoff supplies no analytic
/// derivatives.
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Put,
    Custom,
}

/// One-sided American payoff: `g(x) = smooth(x)` for `x <= k_knot`, zero
/// above. The smooth part must vanish at the knot and be positive below it;
/// [`validate_payoff`] checks both along with the tail growth and concavity
/// conditions.
#[derive(Clone)]
pub struct AmericanPayoff {
    k_knot: f64,
    kind: PayoffKind,
    smooth: ScalarFn,
    smooth_d1: Option<ScalarFn>,
    smooth_d2: Option<ScalarFn>,
}

impl std::fmt::Debug for AmericanPayoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AmericanPayoff")
            .field("k_knot", &self.k_knot)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Put payoff `g(x) = (e^K - e^x)^+` with log-strike `k_strike`.
pub fn make_put(k_strike: f64) -> Result<AmericanPayoff> {
    if !k_strike.is_finite() {
        return Err(CdeoError::domain("log-strike must be finite"));
    }
    let ek = k_strike.exp();
    Ok(AmericanPayoff {
        k_knot: k_strike,
        kind: PayoffKind::Put,
        smooth: Arc::new(move |x| ek - x.exp()),
        smooth_d1: Some(Arc::new(|x| -x.exp())),
        smooth_d2: Some(Arc::new(|x| -x.exp())),
    })
}

impl AmericanPayoff {
    /// Custom payoff from a smooth part and optional analytic derivatives;
    /// missing derivatives are replaced by central differences.
    pub fn custom(
        k_knot: f64,
        smooth: impl Fn(f64) -> f64 + Send + Sync + 'static,
        smooth_d1: Option<ScalarFn>,
        smooth_d2: Option<ScalarFn>,
    ) -> Result<Self> {
        if !k_knot.is_finite() {
            return Err(CdeoError::domain("knot must be finite"));
        }
        Ok(AmericanPayoff {
            k_knot,
            kind: PayoffKind::Custom,
            smooth: Arc::new(smooth),
            smooth_d1,
            smooth_d2,
        })
    }

    /// Identically-zero payoff with a formal knot (degenerate but legal for
    /// the LP, which then returns the zero measure).
    pub fn zero(k_knot: f64) -> Self {
        AmericanPayoff {
            k_knot,
            kind: PayoffKind::Custom,
            smooth: Arc::new(|_| 0.0),
            smooth_d1: Some(Arc::new(|_| 0.0)),
            smooth_d2: Some(Arc::new(|_| 0.0)),
        }
    }

    #[inline]
    pub fn k_knot(&self) -> f64 {
        self.k_knot
    }

    #[inline]
    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    /// `g(x)`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x <= self.k_knot {
            (self.smooth)(x)
        } else {
            0.0
        }
    }

    /// Smooth part evaluated without the indicator.
    #[inline]
    pub fn smooth_value(&self, x: f64) -> f64 {
        (self.smooth)(x)
    }

    /// First derivative of the smooth part.
    pub fn smooth_d1(&self, x: f64) -> f64 {
        match &self.smooth_d1 {
            Some(d) => d(x),
            None => ((self.smooth)(x + FD_STEP) - (self.smooth)(x - FD_STEP)) / (2.0 * FD_STEP),
        }
    }

    /// Second derivative of the smooth part.
    pub fn smooth_d2(&self, x: f64) -> f64 {
        match &self.smooth_d2 {
            Some(d) => d(x),
            None => {
                ((self.smooth)(x + FD_STEP) - 2.0 * (self.smooth)(x) + (self.smooth)(x - FD_STEP))
                    / (FD_STEP * FD_STEP)
            }
        }
    }

    /// Payoff of the transformed model, `g_tilde(x) = e^{(2r/sigma^2) x} g(x)`.
    #[inline]
    pub fn tilde_value(&self, gamma: f64, x: f64) -> f64 {
        let g = self.value(x);
        if g == 0.0 {
            0.0
        } else {
            (gamma * x).exp() * g
        }
    }
}

/// Concavity function `c(x) = g''(x) - (2r/sigma^2) (g(x) - g'(x)) - g'(x)`
/// for `x` strictly below the knot. For the put this is the constant
/// `-(2r/sigma^2) e^K`.
pub fn concavity_c(g: &AmericanPayoff, r: f64, sigma: f64, x: f64) -> Result<f64> {
    if x >= g.k_knot() {
        return Err(CdeoError::domain(format!(
            "concavity function is defined below the knot {}, got {x}",
            g.k_knot()
        )));
    }
    let w = 2.0 * r / (sigma * sigma);
    Ok(g.smooth_d2(x) - w * (g.smooth_value(x) - g.smooth_d1(x)) - g.smooth_d1(x))
}

/// Outcome of the structural payoff checks, with the numbers that produced
/// each flag.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// `smooth > 0` at every sampled point below the knot.
    pub positivity_ok: bool,
    /// `smooth(K) = 0`.
    pub knot_zero_ok: bool,
    /// `e^{(2r/sigma^2) x} g(x) -> 0` along the sampled tail.
    pub growth_ok: bool,
    /// `c(x) <= 0` at every sampled point below the knot.
    pub concavity_ok: bool,
    pub knot_residual: f64,
    pub min_smooth: f64,
    pub max_concavity: f64,
    /// `e^{(2r/sigma^2) x} g(x)` at the deepest tail sample (x = K - 40).
    pub tail_value: f64,
    /// Largest sampled value of the transformed payoff (the tail scale).
    pub tilde_scale: f64,
}

impl ValidationReport {
    /// All four structural conditions hold.
    pub fn all_ok(&self) -> bool {
        self.positivity_ok && self.knot_zero_ok && self.growth_ok && self.concavity_ok
    }

    /// The checks that make the payoff usable by the LP at all: the payoff
    /// vanishes at the knot and is nonnegative where sampled.
    pub fn structurally_ok(&self) -> bool {
        self.knot_zero_ok && self.min_smooth >= -1e-12 * (1.0 + self.tilde_scale)
    }
}

/// Samples the payoff on the geometric grid `x = K - 2^j * h` and evaluates
/// the four conditions of the admissible payoff class. Failures are
/// reported, not raised.
pub fn validate_payoff(g: &AmericanPayoff, r: f64, sigma: f64) -> ValidationReport {
    let k = g.k_knot();
    let gamma = 2.0 * r / (sigma * sigma);
    let h = 1e-3;
    let mut offsets: Vec<f64> = (0..16).map(|j| h * (1u64 << j) as f64).collect();
    offsets.push(20.0);
    offsets.push(40.0);

    let mut min_smooth = f64::INFINITY;
    let mut max_c = f64::NEG_INFINITY;
    let mut max_tilde = 0.0f64;
    for &d in &offsets {
        let x = k - d;
        min_smooth = min_smooth.min(g.smooth_value(x));
        if let Ok(c) = concavity_c(g, r, sigma, x) {
            max_c = max_c.max(c);
        }
        max_tilde = max_tilde.max(g.tilde_value(gamma, x));
    }
    let knot_residual = g.smooth_value(k).abs();
    let tail_value = g.tilde_value(gamma, k - 40.0);
    let tail_mid = g.tilde_value(gamma, k - 20.0);
    let scale = max_tilde.max(1e-300);

    ValidationReport {
        positivity_ok: min_smooth > 0.0,
        knot_zero_ok: knot_residual <= 1e-10 * (1.0 + scale),
        growth_ok: tail_value <= 1e-8 * scale && tail_value <= tail_mid,
        concavity_ok: max_c <= 1e-9 * (1.0 + scale),
        knot_residual,
        min_smooth,
        max_concavity: max_c,
        tail_value,
        tilde_scale: max_tilde,
    }
}

type ClosedFormFn = Arc<dyn Fn(&MarketParams, f64, f64) -> f64 + Send + Sync>;

/// Nonnegative European payoff function, with optional breakpoints (kinks or
/// jumps the quadrature should split at) and an optional closed-form value
/// surface `(theta, x) -> v_eu,f(theta, x)`.
#[derive(Clone)]
pub struct EuropeanPayoff {
    f: ScalarFn,
    breakpoints: Vec<f64>,
    closed_form: Option<ClosedFormFn>,
}

impl std::fmt::Debug for EuropeanPayoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EuropeanPayoff")
            .field("breakpoints", &self.breakpoints)
            .field("has_closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl EuropeanPayoff {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        EuropeanPayoff { f: Arc::new(f), breakpoints: Vec::new(), closed_form: None }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn with_closed_form(
        mut self,
        v: impl Fn(&MarketParams, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.closed_form = Some(Arc::new(v));
        self
    }

    /// European put `(e^K - e^x)^+` with its Black-Scholes closed form.
    pub fn put(k_strike: f64) -> Self {
        let ek = k_strike.exp();
        EuropeanPayoff::new(move |x| (ek - x.exp()).max(0.0))
            .with_breakpoints(vec![k_strike])
            .with_closed_form(move |m, theta, x| {
                num_kernel::bs_put_value(m, k_strike, theta, x).expect("valid put arguments")
            })
    }

    /// Indicator payoff `1_{[lo, hi]}`.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        EuropeanPayoff::new(move |x| if x >= lo && x <= hi { 1.0 } else { 0.0 })
            .with_breakpoints(vec![lo, hi])
    }

    /// Reads an American payoff as a European payoff function (used for
    /// domination experiments where `f = g`).
    pub fn from_american(g: &AmericanPayoff) -> Self {
        let g = g.clone();
        let knot = g.k_knot();
        EuropeanPayoff::new(move |x| g.value(x)).with_breakpoints(vec![knot])
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    #[inline]
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    #[inline]
    pub fn closed_form(&self, m: &MarketParams, theta: f64, x: f64) -> Option<f64> {
        self.closed_form.as_ref().map(|cf| cf(m, theta, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const K: f64 = 4.605170185988091; // log 100

    #[test]
    fn put_knot_and_midpoint() {
        let g = make_put(K).unwrap();
        assert_eq!(g.value(K), 0.0);
        assert_abs_diff_eq!(g.value(K - std::f64::consts::LN_2), 50.0, epsilon = 1e-12);
        assert_eq!(g.value(K + 0.5), 0.0);
        assert!(g.value(K - 1.0) > 0.0);
    }

    #[test]
    fn put_satisfies_growth_condition() {
        // e^{(2r/sigma^2) x} g(x) -> 0 for r = 0.06, sigma = 0.4
        let g = make_put(K).unwrap();
        let gamma = 2.0 * 0.06 / 0.16;
        let tail = g.tilde_value(gamma, K - 40.0);
        assert!(tail > 0.0 && tail < 1e-9, "tail value {tail}");
        assert!(tail < g.tilde_value(gamma, K - 20.0));
    }

    #[test]
    fn put_concavity_is_constant() {
        let g = make_put(K).unwrap();
        for &dx in &[-3.0, -1.0, -0.1, -0.001] {
            let c = concavity_c(&g, 0.06, 0.4, K + dx).unwrap();
            assert_relative_eq!(c, -75.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn put_concavity_vanishes_at_zero_rate() {
        // r = 0: c = g'' - g' = -e^x + e^x = 0
        let g = make_put(K).unwrap();
        let c = concavity_c(&g, 0.0, 0.4, K - 1.0).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn concavity_rejects_points_at_or_above_knot() {
        let g = make_put(K).unwrap();
        assert!(concavity_c(&g, 0.06, 0.4, K).is_err());
        assert!(concavity_c(&g, 0.06, 0.4, K + 1.0).is_err());
    }

    #[test]
    fn concavity_central_differences_match_symbolic() {
        // custom payoff without analytic derivatives: (e^k - e^x)^3 at a
        // small strike, so the 1e-5 difference step stays well conditioned
        let k = std::f64::consts::LN_2;
        let ek = k.exp();
        let g = AmericanPayoff::custom(k, move |x| (ek - x.exp()).powi(3), None, None).unwrap();
        let (r, sigma) = (0.06, 0.4);
        let w = 2.0 * r / (sigma * sigma);
        let mut x = k - 3.0;
        while x <= k - 0.01 {
            let c = concavity_c(&g, r, sigma, x).unwrap();
            // symbolic: g' = -3 e^x u^2, g'' = g' + 6 e^{2x} u, u = e^k - e^x
            let u = ek - x.exp();
            let d1 = -3.0 * x.exp() * u * u;
            let d2 = d1 + 6.0 * x.exp() * x.exp() * u;
            let want = d2 - w * (u.powi(3) - d1) - d1;
            assert!((c - want).abs() <= 1e-4 * (1.0 + want.abs()), "x={x}: {c} vs {want}");
            x += 0.25;
        }
    }

    #[test]
    fn put_concavity_matches_difference_oracle() {
        // analytic c of the put vs an independent five-point stencil
        // applied directly to g
        let g = make_put(K).unwrap();
        let (r, sigma) = (0.06, 0.4);
        let w = 2.0 * r / (sigma * sigma);
        let h = 1e-3;
        let mut x = K - 3.0;
        while x <= K - 0.01 {
            let f = |z: f64| g.smooth_value(z);
            let d1 = (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h);
            let d2 = (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h)
                - f(x - 2.0 * h))
                / (12.0 * h * h);
            let oracle = d2 - w * (f(x) - d1) - d1;
            let c = concavity_c(&g, r, sigma, x).unwrap();
            assert!((c - oracle).abs() <= 1e-6 * (1.0 + c.abs()), "x={x}: {c} vs {oracle}");
            x += 0.25;
        }
    }

    #[test]
    fn validate_accepts_the_put() {
        let g = make_put(K).unwrap();
        let rep = validate_payoff(&g, 0.06, 0.4);
        assert!(rep.all_ok(), "{rep:?}");
    }

    #[test]
    fn validate_flags_nonzero_knot() {
        let ek = K.exp();
        let g = AmericanPayoff::custom(K, move |x| ek - x.exp() + 1.0, None, None).unwrap();
        let rep = validate_payoff(&g, 0.06, 0.4);
        assert!(!rep.knot_zero_ok);
        assert!(rep.knot_residual > 0.9);
    }

    #[test]
    fn validate_records_cubic_put_concavity() {
        // concavity outcome recorded for (e^K - e^x)^3, not asserted a priori
        let ek = K.exp();
        let g = AmericanPayoff::custom(K, move |x| (ek - x.exp()).powi(3), None, None).unwrap();
        let rep = validate_payoff(&g, 0.06, 0.4);
        assert!(rep.knot_zero_ok);
        assert!(rep.max_concavity.is_finite());
    }

    #[test]
    fn zero_payoff_is_structurally_degenerate() {
        let g = AmericanPayoff::zero(K);
        let rep = validate_payoff(&g, 0.06, 0.4);
        assert!(!rep.positivity_ok);
        assert!(rep.structurally_ok());
    }

    #[test]
    fn european_put_closed_form_is_wired() {
        let m = MarketParams::new(0.06, 0.4, 0.5, K + 0.1).unwrap();
        let f = EuropeanPayoff::put(K);
        let v = f.closed_form(&m, 0.5, K + 0.1).unwrap();
        assert_abs_diff_eq!(v, 6.13660769803658, epsilon = 1e-12);
        assert_abs_diff_eq!(f.value(K - std::f64::consts::LN_2), 50.0, epsilon = 1e-12);
    }
}
