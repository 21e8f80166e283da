//! Embedded American options: the per-maturity infimum of a European value
//! surface, the minimising maturity curve, and the monotonicity /
//! concavity checks that go with it.

use rayon::prelude::*;

use crate::error::{CdeoError, Result};
use crate::market::MarketParams;
use crate::payoff::EuropeanPayoff;

/// Result of one scalar minimisation `inf_theta v(theta)` over `[0, T]`.
#[derive(Debug, Clone, Copy)]
pub struct ThetaMin {
    /// Largest minimiser among the near-optimal candidates.
    pub theta: f64,
    pub value: f64,
    /// Whether every near-minimal sample sits in a single bracket.
    pub unique: bool,
}

/// Tolerance deciding when two candidate minima are "equally minimal".
const VALUE_TOL: f64 = 1e-7;
/// Abscissa tolerance of the golden-section refinement.
const THETA_TOL: f64 = 1e-8;

/// Minimises `theta -> price(theta)` over `[0, t_max]` by a coarse scan of
/// `samples + 1` equidistant maturities followed by golden-section
/// refinement of every near-minimal bracket. `value_at_zero` is used for
/// the `theta = 0` sample (payoff value or a boundary proxy).
///
/// When several refined minimisers tie within the value tolerance, the
/// LARGEST maturity is returned. Boundary minima are returned exactly
/// (`theta = 0` or `theta = t_max`), never as a refinement artefact nearby.
pub fn minimize_over_theta<F>(price: F, value_at_zero: f64, t_max: f64, samples: usize) -> Result<ThetaMin>
where
    F: Fn(f64) -> f64,
{
    if samples < 50 {
        return Err(CdeoError::config(format!("need at least 50 theta samples, got {samples}")));
    }
    if !(t_max > 0.0) {
        return Err(CdeoError::domain("t_max must be positive"));
    }
    let n = samples;
    let dt = t_max / n as f64;
    let thetas: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let values: Vec<f64> = thetas
        .iter()
        .enumerate()
        .map(|(i, &th)| if i == 0 { value_at_zero } else { price(th) })
        .collect();

    let sample_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = VALUE_TOL * (1.0 + sample_min.abs());

    // local minima of the sampled sequence (boundaries included); the bool
    // marks exact grid points as opposed to golden-refined abscissae
    let mut candidates: Vec<(f64, f64, bool)> = Vec::new();
    for i in 0..=n {
        let left_ok = i == 0 || values[i] <= values[i - 1];
        let right_ok = i == n || values[i] <= values[i + 1];
        if !(left_ok && right_ok) || values[i] > sample_min + tol {
            continue;
        }
        if i == 0 || i == n {
            // refine into the adjacent bracket but keep the exact boundary
            // when it stays minimal
            let (a, b) = if i == 0 { (0.0, thetas[1]) } else { (thetas[n - 1], t_max) };
            let (tr, vr) = crate::optim::golden_min(&price, a, b, THETA_TOL);
            if vr < values[i] - 1e-12 * (1.0 + values[i].abs()) {
                candidates.push((tr, vr, false));
            } else {
                candidates.push((thetas[i], values[i], true));
            }
        } else {
            let (tr, vr) = crate::optim::golden_min(&price, thetas[i - 1], thetas[i + 1], THETA_TOL);
            if vr < values[i] {
                candidates.push((tr, vr, false));
            } else {
                candidates.push((thetas[i], values[i], true));
            }
        }
    }

    // Merge candidates that belong to the same basin (chained by extent so
    // a flat run of ties forms one cluster). Ties inside a cluster resolve
    // to: the theta = 0 boundary (a flat zero run means immediate exercise),
    // then exact grid points over refinement artefacts, then the largest
    // maturity.
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    struct Basin {
        t: f64,
        v: f64,
        exact: bool,
        extent: f64,
    }
    let radius = 2.0 * dt.max(1e-6 * t_max) + 2.0 * THETA_TOL;
    let mut basins: Vec<Basin> = Vec::new();
    for (t, v, exact) in candidates {
        match basins.last_mut() {
            Some(cl) if (t - cl.extent).abs() <= radius => {
                cl.extent = t;
                let tie = (v - cl.v).abs() <= 1e-15 * (1.0 + cl.v.abs());
                let replace = if tie {
                    if cl.t == 0.0 {
                        false
                    } else {
                        match (exact, cl.exact) {
                            (true, false) => true,
                            (false, true) => false,
                            _ => t > cl.t,
                        }
                    }
                } else {
                    v < cl.v
                };
                if replace {
                    cl.t = t;
                    cl.v = v;
                    cl.exact = exact;
                }
            }
            _ => basins.push(Basin { t, v, exact, extent: t }),
        }
    }

    let best = basins.iter().map(|b| b.v).fold(f64::INFINITY, f64::min);
    let best_tol = VALUE_TOL * (1.0 + best.abs());
    let admitted: Vec<&Basin> = basins.iter().filter(|b| b.v <= best + best_tol).collect();
    let theta = admitted.iter().map(|b| b.t).fold(f64::NEG_INFINITY, f64::max);

    // uniqueness: all near-minimal samples form one contiguous run and only
    // one merged candidate survives
    let near: Vec<usize> = (0..=n).filter(|&i| values[i] <= best + best_tol).collect();
    let contiguous = near.windows(2).all(|w| w[1] == w[0] + 1);
    let unique = admitted.len() == 1 && contiguous;

    Ok(ThetaMin { theta, value: best, unique })
}

/// Embedded American option of a European payoff on an x-grid.
#[derive(Debug, Clone)]
pub struct EaoResult {
    pub x_grid: Vec<f64>,
    pub am_values: Vec<f64>,
    pub theta_breve: Vec<f64>,
    pub unique_min_flags: Vec<bool>,
}

/// Computes `am_T(f)(x) = inf{ v_eu,f(theta, x) : theta in [0, T] }` per
/// grid point, along with the minimising maturity curve. Uses the payoff's
/// closed-form surface when present, quadrature otherwise; minimisations
/// over different grid points run in parallel.
pub fn embed_american(
    m: &MarketParams,
    f: &EuropeanPayoff,
    t_max: f64,
    x_grid: &[f64],
    theta_samples: usize,
) -> Result<EaoResult> {
    if x_grid.is_empty() {
        return Err(CdeoError::config("empty x grid"));
    }
    let minima: Result<Vec<ThetaMin>> = x_grid
        .par_iter()
        .map(|&x| {
            let price = |theta: f64| match f.closed_form(m, theta, x) {
                Some(v) => v,
                None => crate::euro_pricer::price_function_payoff(m, f, theta, x)
                    .expect("function payoff pricing failed during EAO scan"),
            };
            minimize_over_theta(price, f.value(x), t_max, theta_samples)
        })
        .collect();
    let minima = minima?;
    Ok(EaoResult {
        x_grid: x_grid.to_vec(),
        am_values: minima.iter().map(|t| t.value).collect(),
        theta_breve: minima.iter().map(|t| t.theta).collect(),
        unique_min_flags: minima.iter().map(|t| t.unique).collect(),
    })
}

/// Monotonicity evidence for the embedding operator.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// `f <= f2` held at every grid point (precondition echo).
    pub ordering_precondition_ok: bool,
    /// `am_{T2}(f) <= am_{T1}(f) + 1e-8` pointwise.
    pub decreasing_in_horizon_ok: bool,
    pub max_horizon_violation: f64,
    /// `am_{T1}(f) <= am_{T1}(f2) + 1e-8` pointwise.
    pub increasing_in_payoff_ok: bool,
    pub max_payoff_violation: f64,
}

/// Checks that the EAO is decreasing in the horizon and increasing in the
/// payoff, on the given grid.
pub fn eao_monotonicity_suite(
    m: &MarketParams,
    f: &EuropeanPayoff,
    f2: &EuropeanPayoff,
    t1: f64,
    t2: f64,
    x_grid: &[f64],
    theta_samples: usize,
) -> Result<MonotonicityReport> {
    if !(t1 <= t2) {
        return Err(CdeoError::config("need t1 <= t2"));
    }
    let ordering_precondition_ok = x_grid.iter().all(|&x| f.value(x) <= f2.value(x) + 1e-12);
    let am1 = embed_american(m, f, t1, x_grid, theta_samples)?;
    let am2 = embed_american(m, f, t2, x_grid, theta_samples)?;
    let am1_f2 = embed_american(m, f2, t1, x_grid, theta_samples)?;
    let mut max_h: f64 = f64::NEG_INFINITY;
    let mut max_p: f64 = f64::NEG_INFINITY;
    for i in 0..x_grid.len() {
        max_h = max_h.max(am2.am_values[i] - am1.am_values[i]);
        max_p = max_p.max(am1.am_values[i] - am1_f2.am_values[i]);
    }
    Ok(MonotonicityReport {
        ordering_precondition_ok,
        decreasing_in_horizon_ok: max_h <= 1e-8,
        max_horizon_violation: max_h,
        increasing_in_payoff_ok: max_p <= 1e-8,
        max_payoff_violation: max_p,
    })
}

/// Sign report for the elliptic operator
/// `(sigma^2/2) g'' + (r - sigma^2/2) g' - r g` applied by second
/// differences to the EAO where the minimising maturity is interior.
#[derive(Debug, Clone)]
pub struct ConcavityReport {
    pub checked: usize,
    pub violations: usize,
    pub max_excess: f64,
}

pub fn check_concavity_on_curve(m: &MarketParams, t_max: f64, eao: &EaoResult) -> ConcavityReport {
    let tol_theta = 1e-6 * t_max;
    let interior =
        |i: usize| eao.theta_breve[i] > tol_theta && eao.theta_breve[i] < t_max - tol_theta;
    let mut checked = 0;
    let mut violations = 0;
    let mut max_excess: f64 = f64::NEG_INFINITY;
    for i in 1..eao.x_grid.len() - 1 {
        if !(interior(i - 1) && interior(i) && interior(i + 1)) {
            continue;
        }
        let hl = eao.x_grid[i] - eao.x_grid[i - 1];
        let hr = eao.x_grid[i + 1] - eao.x_grid[i];
        let (gl, gc, gr) = (eao.am_values[i - 1], eao.am_values[i], eao.am_values[i + 1]);
        let d1 = (gr - gl) / (hl + hr);
        let d2 = 2.0 * ((gr - gc) / hr - (gc - gl) / hl) / (hl + hr);
        let operator = 0.5 * m.sigma2() * d2 + (m.r - 0.5 * m.sigma2()) * d1 - m.r * gc;
        checked += 1;
        let tol = 1e-5 * (1.0 + gc.abs());
        max_excess = max_excess.max(operator);
        if operator > tol {
            violations += 1;
        }
    }
    ConcavityReport { checked, violations, max_excess }
}
