//! Independent American-option oracle: Crank-Nicolson finite differences
//! with projected SOR for the early-exercise constraint, a Cox-Ross-
//! Rubinstein binomial cross-check, and exercise-boundary extraction.

use crate::error::{CdeoError, Result};
use crate::market::MarketParams;
use crate::optim::bisect_root;
use crate::payoff::AmericanPayoff;

/// Rectangular solver grid in `(theta, x)`.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub x_nodes: usize,
    pub theta_steps: usize,
}

impl GridSpec {
    /// Default production grid around a knot: 400 x-nodes on `[K-6, K+4]`,
    /// 200 theta-steps.
    pub fn default_for_knot(k_knot: f64) -> Self {
        GridSpec { x_min: k_knot - 6.0, x_max: k_knot + 4.0, x_nodes: 400, theta_steps: 200 }
    }

    /// Same span with every resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            x_nodes: self.x_nodes * factor,
            theta_steps: self.theta_steps * factor,
        }
    }

    fn validate(&self, k_knot: f64) -> Result<()> {
        if !(self.x_min < self.x_max) || self.x_nodes < 3 {
            return Err(CdeoError::config("grid needs x_min < x_max and at least 3 x-nodes"));
        }
        if self.theta_steps < 50 {
            return Err(CdeoError::config(format!(
                "at least 50 theta-steps required, got {}",
                self.theta_steps
            )));
        }
        if !(self.x_min < k_knot && k_knot < self.x_max) {
            return Err(CdeoError::config(format!(
                "grid [{}, {}] must straddle the payoff knot {k_knot}",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }
}

/// Values on a rectangular `(theta, x)` grid with bilinear interpolation.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub theta_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    /// Row-major, `values[j][i] = v(theta_j, x_i)`.
    pub values: Vec<Vec<f64>>,
}

impl ValueSurface {
    /// Bilinear interpolation; arguments are clamped to the grid box.
    pub fn value(&self, theta: f64, x: f64) -> f64 {
        let (jt, wt) = locate(&self.theta_grid, theta);
        let (ix, wx) = locate(&self.x_grid, x);
        let v00 = self.values[jt][ix];
        let v01 = self.values[jt][ix + 1];
        let v10 = self.values[jt + 1][ix];
        let v11 = self.values[jt + 1][ix + 1];
        (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) + wt * ((1.0 - wx) * v10 + wx * v11)
    }
}

fn locate(grid: &[f64], z: f64) -> (usize, f64) {
    let n = grid.len();
    if z <= grid[0] {
        return (0, 0.0);
    }
    if z >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let idx = match grid.binary_search_by(|g| g.partial_cmp(&z).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    };
    let w = (z - grid[idx]) / (grid[idx + 1] - grid[idx]);
    (idx, w)
}

/// Early-exercise boundary extracted from an American value surface, put
/// convention: `b(theta)` is the largest `x` of the stopping set below the
/// continuation region. `None` where the stopping set is empty.
#[derive(Debug, Clone)]
pub struct ExerciseBoundary {
    pub theta_grid: Vec<f64>,
    pub b: Vec<Option<f64>>,
}

impl ExerciseBoundary {
    /// Linear interpolation of the boundary at `theta` (both neighbouring
    /// rows must carry a defined boundary).
    pub fn value(&self, theta: f64) -> Option<f64> {
        let (j, w) = locate(&self.theta_grid, theta);
        match (self.b[j], self.b[j + 1]) {
            (Some(a), Some(c)) => Some((1.0 - w) * a + w * c),
            _ => None,
        }
    }
}

const PSOR_OMEGA: f64 = 1.5;
const PSOR_TOL: f64 = 1e-10;
const PSOR_MAX_ITER: usize = 50_000;

/// Solves `M v = rhs` with the obstacle `v >= lower` by projected SOR on
/// the constant-coefficient tridiagonal system (`sub`, `diag`, `sup`);
/// boundary entries of `v` are held fixed.
fn psor_step(
    sub: f64,
    diag: f64,
    sup: f64,
    rhs: &[f64],
    lower: &[f64],
    v: &mut [f64],
    step: usize,
) -> Result<usize> {
    let n = v.len();
    for iter in 0..PSOR_MAX_ITER {
        let mut delta: f64 = 0.0;
        for i in 1..n - 1 {
            let gs = (rhs[i] - sub * v[i - 1] - sup * v[i + 1]) / diag;
            let cand = (v[i] + PSOR_OMEGA * (gs - v[i])).max(lower[i]);
            delta = delta.max((cand - v[i]).abs());
            v[i] = cand;
        }
        if delta <= PSOR_TOL {
            return Ok(iter + 1);
        }
    }
    Err(CdeoError::Solver(format!(
        "PSOR did not reach tolerance {PSOR_TOL:e} within {PSOR_MAX_ITER} iterations at time step {step}"
    )))
}

/// American value surface by Crank-Nicolson finite differences in log-price
/// with a Rannacher start (two implicit-Euler half-steps) and projected SOR
/// enforcing `v >= g`. Boundary conditions are put-type: `v = g` at `x_min`,
/// `v = 0` at `x_max`.
pub fn fd_american_surface(
    m: &MarketParams,
    g: &AmericanPayoff,
    grid: &GridSpec,
) -> Result<ValueSurface> {
    grid.validate(g.k_knot())?;
    let n = grid.x_nodes;
    let steps = grid.theta_steps;
    let dx = (grid.x_max - grid.x_min) / (n - 1) as f64;
    let dt = m.horizon / steps as f64;

    let x_grid: Vec<f64> = (0..n).map(|i| grid.x_min + i as f64 * dx).collect();
    let theta_grid: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let payoff: Vec<f64> = x_grid.iter().map(|&x| g.value(x)).collect();

    // spatial operator L = (sigma^2/2) D_xx + r_hat D_x - r
    let alpha = 0.5 * m.sigma2() / (dx * dx);
    let beta = m.r_hat() / (2.0 * dx);
    let (lo, di, up) = (alpha - beta, -2.0 * alpha - m.r, alpha + beta);

    let mut values = Vec::with_capacity(steps + 1);
    values.push(payoff.clone());
    let mut v = payoff.clone();
    let mut rhs = vec![0.0; n];

    for step in 1..=steps {
        let h = 0.5 * dt;
        if step == 1 {
            // Rannacher start: two implicit-Euler half-steps damp the
            // oscillatory modes the payoff kink excites under Crank-Nicolson.
            for _ in 0..2 {
                rhs.copy_from_slice(&v);
                rhs[0] = payoff[0];
                rhs[n - 1] = 0.0;
                v[0] = payoff[0];
                v[n - 1] = 0.0;
                psor_step(-h * lo, 1.0 - h * di, -h * up, &rhs, &payoff, &mut v, step)?;
            }
        } else {
            for i in 1..n - 1 {
                rhs[i] = h * lo * v[i - 1] + (1.0 + h * di) * v[i] + h * up * v[i + 1];
            }
            rhs[0] = payoff[0];
            rhs[n - 1] = 0.0;
            v[0] = payoff[0];
            v[n - 1] = 0.0;
            psor_step(-h * lo, 1.0 - h * di, -h * up, &rhs, &payoff, &mut v, step)?;
        }
        values.push(v.clone());
    }
    Ok(ValueSurface { theta_grid, x_grid, values })
}

/// Cox-Ross-Rubinstein binomial value with early exercise; deterministic
/// backward induction on the recombining log-price lattice.
pub fn binomial_american(
    m: &MarketParams,
    g: &AmericanPayoff,
    theta: f64,
    x: f64,
    steps: usize,
) -> Result<f64> {
    if steps < 10 {
        return Err(CdeoError::config(format!("binomial needs at least 10 steps, got {steps}")));
    }
    if theta < 0.0 {
        return Err(CdeoError::domain("maturity must be >= 0"));
    }
    if theta == 0.0 {
        return Ok(g.value(x));
    }
    let dt = theta / steps as f64;
    let du = m.sigma * dt.sqrt();
    let up = du.exp();
    let down = (-du).exp();
    let p = ((m.r * dt).exp() - down) / (up - down);
    if !(0.0..=1.0).contains(&p) {
        return Err(CdeoError::domain(format!(
            "risk-neutral probability {p} outside [0,1]; refine the lattice"
        )));
    }
    let disc = (-m.r * dt).exp();

    let mut values: Vec<f64> =
        (0..=steps).map(|j| g.value(x + (2.0 * j as f64 - steps as f64) * du)).collect();
    for i in (0..steps).rev() {
        for j in 0..=i {
            let node_x = x + (2.0 * j as f64 - i as f64) * du;
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = cont.max(g.value(node_x));
        }
    }
    Ok(values[0])
}

/// Extracts the early-exercise boundary from an American surface: per
/// theta-row the largest `x` with `v - g <= tol (1 + |g|)` below the
/// continuation component, refined by bisection between the bracketing grid
/// nodes and capped at the payoff knot.
pub fn exercise_boundary(s: &ValueSurface, g: &AmericanPayoff, tol: f64) -> ExerciseBoundary {
    let mut b = Vec::with_capacity(s.theta_grid.len());
    for (j, theta) in s.theta_grid.iter().enumerate() {
        let row = &s.values[j];
        let slack =
            |i: usize| row[i] - g.value(s.x_grid[i]) - tol * (1.0 + g.value(s.x_grid[i]).abs());
        if slack(0) > 0.0 {
            b.push(None);
            continue;
        }
        let mut boundary = s.x_grid[s.x_grid.len() - 1];
        for i in 1..s.x_grid.len() {
            if slack(i) > 0.0 {
                let (xa, xb) = (s.x_grid[i - 1], s.x_grid[i]);
                let psi = |x: f64| s.value(*theta, x) - g.value(x) - tol * (1.0 + g.value(x).abs());
                boundary = bisect_root(psi, xa, xb, 1e-12).unwrap_or(xa);
                break;
            }
        }
        b.push(Some(boundary.min(g.k_knot())));
    }
    ExerciseBoundary { theta_grid: s.theta_grid.clone(), b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num_kernel::bs_put_value;
    use crate::payoff::make_put;
    use approx::assert_abs_diff_eq;

    const K: f64 = 4.605170185988091;

    fn section4_market() -> MarketParams {
        MarketParams::new(0.06, 0.4, 0.5, K + 0.1).unwrap()
    }

    #[test]
    fn zero_rate_american_put_equals_european() {
        // without discounting, early exercise of the put is suboptimal
        let m = MarketParams::new(0.0, 0.4, 0.5, K + 0.1).unwrap();
        let g = make_put(K).unwrap();
        let surface = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        let strike = K.exp();
        let mut worst: f64 = 0.0;
        for &theta in &[0.1, 0.25, 0.5] {
            let mut x = K - 2.0;
            while x <= K + 1.5 {
                let diff = (surface.value(theta, x) - bs_put_value(&m, K, theta, x).unwrap()).abs();
                worst = worst.max(diff / strike);
                x += 0.05;
            }
        }
        assert!(worst <= 2e-4, "max relative-to-strike gap {worst}");
    }

    #[test]
    fn surface_is_monotone_in_maturity() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let s = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        for j in 1..s.theta_grid.len() {
            for i in 0..s.x_grid.len() {
                assert!(
                    s.values[j][i] >= s.values[j - 1][i] - 1e-8,
                    "non-monotone at theta index {j}, x index {i}"
                );
            }
        }
    }

    #[test]
    fn surface_dominates_payoff() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let s = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        for row in &s.values {
            for (i, v) in row.iter().enumerate() {
                assert!(*v >= g.value(s.x_grid[i]) - 1e-10);
            }
        }
    }

    #[test]
    fn surface_starts_at_payoff() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let s = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        for (i, &x) in s.x_grid.iter().enumerate() {
            assert_eq!(s.values[0][i], g.value(x));
        }
    }

    #[test]
    fn fd_agrees_with_binomial_oracle() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let s = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        let fd = s.value(0.5, K + 0.1);
        let tree = binomial_american(&m, &g, 0.5, K + 0.1, 2000).unwrap();
        assert!(
            (fd - tree).abs() / tree <= 1e-3,
            "FD {fd} vs binomial {tree}, rel {}",
            (fd - tree).abs() / tree
        );
    }

    #[test]
    fn binomial_immediate_expiry_and_domination() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        assert_eq!(binomial_american(&m, &g, 0.0, K - 0.3, 100).unwrap(), g.value(K - 0.3));
        for &x in &[K - 1.0, K, K + 0.5] {
            let v = binomial_american(&m, &g, 0.5, x, 500).unwrap();
            assert!(v >= g.value(x));
        }
    }

    #[test]
    fn binomial_richardson_pairs_converge() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let v = |n: usize| binomial_american(&m, &g, 0.5, K + 0.1, n).unwrap();
        let mut gaps = Vec::new();
        let mut n = 125;
        while n <= 1000 {
            gaps.push((v(2 * n) - v(n)).abs());
            n *= 2;
        }
        for w in gaps.windows(2) {
            assert!(w[1] < w[0], "doubling gaps not decreasing: {gaps:?}");
        }
    }

    #[test]
    fn binomial_rejects_tiny_step_count() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        assert!(binomial_american(&m, &g, 0.5, K, 5).is_err());
    }

    #[test]
    fn boundary_at_zero_maturity_is_the_knot() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let s = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        let bdry = exercise_boundary(&s, &g, 1e-7);
        assert_abs_diff_eq!(bdry.b[0].unwrap(), K, epsilon = 1e-12);
    }

    #[test]
    fn put_boundary_shape() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let s = fd_american_surface(&m, &g, &GridSpec::default_for_knot(K)).unwrap();
        let bdry = exercise_boundary(&s, &g, 1e-7);
        // exp(b) non-increasing in theta (checked from a small offset; the
        // first rows sit inside the kink-smoothing zone)
        let start = s.theta_grid.iter().position(|&t| t >= 0.02).unwrap();
        for j in start + 1..bdry.theta_grid.len() {
            let (prev, cur) = (bdry.b[j - 1].unwrap(), bdry.b[j].unwrap());
            assert!(cur.exp() <= prev.exp() + 1e-6, "boundary rose at row {j}");
        }
        // at theta = T the boundary lies within (K + ln 0.5, K)
        let b_end = bdry.b.last().unwrap().unwrap();
        assert!(b_end > K + 0.5f64.ln() && b_end < K, "b(T) = {b_end}");
    }

    #[test]
    fn grid_validation() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let bad = GridSpec { x_min: K - 6.0, x_max: K + 4.0, x_nodes: 100, theta_steps: 10 };
        assert!(fd_american_surface(&m, &g, &bad).is_err());
        let off = GridSpec { x_min: K + 1.0, x_max: K + 4.0, x_nodes: 100, theta_steps: 100 };
        assert!(fd_american_surface(&m, &g, &off).is_err());
    }
}
