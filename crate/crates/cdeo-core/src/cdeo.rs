//! Cheapest dominating European options by semi-infinite linear
//! programming: discretisation of the domination program, the finite LP
//! behind it, a constraint-generation (exchange) loop over the continuous
//! `(theta, x)` surface, and the complementary-slackness report.
//!
//! Discretisation: the measure lives on atoms at support nodes in
//! `[K - L, K]` (geometrically clustered towards the knot); domination is
//! enforced on a seed grid of maturities and log-prices plus every
//! violation point the exchange loop finds. Maturities below a cutoff
//! `theta_min` are outside the discretized program, mirroring the
//! milder-constraint relaxation that makes the semi-infinite program
//! tractable.

use rayon::prelude::*;

use crate::error::{CdeoError, Result};
use crate::euro_pricer::{price_measure_payoff, PayoffMeasure, PiecewiseLinearDensity};
use crate::market::MarketParams;
use crate::num_kernel::log_pdf_ratio_raw;
use crate::payoff::{validate_payoff, AmericanPayoff, ValidationReport};
use crate::ipm::solve_cover_ipm;
use crate::simplex::{CoverLp, LpStatus};

/// Support nodes for the measure variables (increasing, all `<= K`).
#[derive(Debug, Clone)]
pub struct SupportGrid {
    nodes: Vec<f64>,
}

impl SupportGrid {
    /// Nodes clustered towards the knot: spacing is uniform at `delta_min`
    /// near `K` and grows geometrically further out; the knot itself is a
    /// node.
    pub fn geometric(k_knot: f64, len: f64, n_nodes: usize, delta_min: f64) -> Result<Self> {
        if n_nodes < 3 || !(len > delta_min && delta_min > 0.0) {
            return Err(CdeoError::config("support grid needs n >= 3 and len > delta_min > 0"));
        }
        let mut nodes: Vec<f64> =
            spaced_offsets(delta_min, len, n_nodes - 1).iter().map(|d| k_knot - d).collect();
        nodes.push(k_knot);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(SupportGrid { nodes })
    }

    pub fn from_nodes(mut nodes: Vec<f64>, k_knot: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(CdeoError::config("empty support grid"));
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if *nodes.last().unwrap() > k_knot + 1e-12 {
            return Err(CdeoError::config("support nodes must lie at or below the knot"));
        }
        Ok(SupportGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Finitely many domination points `(theta, x)`.
#[derive(Debug, Clone, Default)]
pub struct ConstraintGrid {
    pub points: Vec<(f64, f64)>,
}

impl ConstraintGrid {
    /// Seed grid: maturities geometric from `theta_min` to the horizon
    /// (inclusive), log-prices geometrically clustered below the knot.
    pub fn seed(
        m: &MarketParams,
        k_knot: f64,
        len: f64,
        n_theta: usize,
        n_x: usize,
        theta_min: f64,
    ) -> Result<Self> {
        if n_theta < 2 || n_x < 2 {
            return Err(CdeoError::config("seed grid needs at least 2x2 points"));
        }
        if !(theta_min > 0.0 && theta_min < m.horizon) {
            return Err(CdeoError::config("need 0 < theta_min < horizon"));
        }
        let thetas = geometric_thetas(theta_min, m.horizon, n_theta);
        // resolve x no finer than the kernel width at the smallest maturity
        let x_floor = (m.sigma * theta_min.sqrt() / 3.0).max(1e-4);
        let xs = spaced_offsets(x_floor, len, n_x).iter().map(|d| k_knot - d).collect::<Vec<_>>();
        let mut points = Vec::with_capacity(n_theta * n_x);
        for &th in &thetas {
            for &x in &xs {
                points.push((th, x));
            }
        }
        Ok(ConstraintGrid { points })
    }
}

/// `n` maturities geometric from `lo` to `hi`, endpoints included.
fn geometric_thetas(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let q = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut v: Vec<f64> = (0..n).map(|j| lo * q.powi(j as i32)).collect();
    v[n - 1] = hi;
    v
}

/// `n` offsets from `floor` to `hi` whose spacing never drops below
/// `floor`: uniform steps of `floor` near zero, switching to geometric
/// growth further out. Offsets spaced finer than the pricing kernel can
/// resolve only produce numerically collinear LP data.
fn spaced_offsets(floor: f64, hi: f64, n: usize) -> Vec<f64> {
    let build = |g: f64| -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        let mut d = floor;
        while v.len() < n && d < hi {
            v.push(d);
            d += floor.max((g - 1.0) * d);
        }
        v
    };
    // growth factor such that the sequence reaches hi in exactly n steps
    let (mut lo_g, mut hi_g) = (1.0 + 1e-9, 4.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo_g + hi_g);
        if build(mid).len() < n {
            hi_g = mid;
        } else {
            lo_g = mid;
        }
    }
    let mut v = build(lo_g);
    while v.len() < n {
        v.push(hi);
    }
    v[n - 1] = hi;
    v
}

/// The discretized domination program as a covering LP: variables are atom
/// masses at the support nodes, one covering row per domination point, and
/// the objective is the discounted price at the anchor (where the kernel
/// ratio is one, so the cost of every unit of mass is `e^{-rT}`).
#[derive(Debug, Clone)]
pub struct LpInstance {
    pub support: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub lp: CoverLp,
}

fn kernel_row(m: &MarketParams, support: &[f64], theta: f64, x: f64) -> Result<Vec<f64>> {
    let r_hat = m.r_hat();
    let sigma2 = m.sigma2();
    let (m1, v1) = (x + r_hat * theta, sigma2 * theta);
    let (m2, v2) = (m.x0 + r_hat * m.horizon, sigma2 * m.horizon);
    let disc = (-m.r * theta).exp();
    let mut row = Vec::with_capacity(support.len());
    for &y in support {
        let e = disc * log_pdf_ratio_raw(m1, v1, m2, v2, y).exp();
        if !e.is_finite() {
            return Err(CdeoError::config(format!(
                "kernel entry overflows at (theta={theta}, x={x}, y={y}); shrink the support length"
            )));
        }
        row.push(e);
    }
    Ok(row)
}

/// Builds the LP of the domination program on the given grids.
pub fn build_lp(
    m: &MarketParams,
    g: &AmericanPayoff,
    supp: &SupportGrid,
    cons: &ConstraintGrid,
) -> Result<LpInstance> {
    if supp.nodes.is_empty() || cons.points.is_empty() {
        return Err(CdeoError::config("empty support or constraint grid"));
    }
    if !cons.points.iter().all(|&(th, _)| th > 0.0 && th <= m.horizon) {
        return Err(CdeoError::config("constraint maturities must lie in (0, T]"));
    }
    let disc_t = (-m.r * m.horizon).exp();
    let mut lp = CoverLp::new(vec![disc_t; supp.nodes.len()])?;
    for &(theta, x) in &cons.points {
        let row = kernel_row(m, &supp.nodes, theta, x)?;
        let rhs = g.value(x);
        if rhs < 0.0 {
            return Err(CdeoError::config("payoff must be nonnegative on the constraint grid"));
        }
        lp.push_row(row, rhs)?;
    }
    Ok(LpInstance { support: supp.nodes.clone(), points: cons.points.clone(), lp })
}

/// Solves a built instance, returning `(primal masses, dual multipliers,
/// status)` in the instance's own coordinates.
pub fn solve_lp(inst: &LpInstance) -> Result<(Vec<f64>, Vec<f64>, LpStatus)> {
    let sol = crate::simplex::solve_cover_lp(&inst.lp)?;
    Ok((sol.primal, sol.dual, sol.status))
}

/// Tuning of the exchange solver. Tolerances are relative to `e^K`.
#[derive(Debug, Clone)]
pub struct CdeoConfig {
    pub support_len: f64,
    pub support_nodes: usize,
    pub support_delta_min: f64,
    pub seed_theta: usize,
    pub seed_x: usize,
    /// Smallest maturity carrying constraints (the relaxation cutoff).
    pub theta_min: f64,
    /// Feasibility tolerance for the exchange loop, relative to `e^K`.
    pub feas_tol_rel: f64,
    pub max_rounds: usize,
    pub max_added_per_round: usize,
    /// Resolution of the violation scan.
    pub scan_theta: usize,
    pub scan_x: usize,
}

impl Default for CdeoConfig {
    fn default() -> Self {
        CdeoConfig {
            support_len: 8.0,
            support_nodes: 600,
            support_delta_min: 2e-3,
            seed_theta: 40,
            seed_x: 120,
            theta_min: 5e-4,
            feas_tol_rel: 1e-6,
            max_rounds: 40,
            max_added_per_round: 25,
            scan_theta: 120,
            scan_x: 400,
        }
    }
}

impl CdeoConfig {
    /// A lighter configuration for tests and quick experiments.
    pub fn coarse() -> Self {
        CdeoConfig {
            support_len: 6.0,
            support_nodes: 240,
            support_delta_min: 3e-3,
            seed_theta: 24,
            seed_x: 60,
            theta_min: 1e-3,
            feas_tol_rel: 5e-6,
            max_rounds: 25,
            max_added_per_round: 25,
            scan_theta: 72,
            scan_x: 240,
        }
    }
}

/// One round of the exchange loop.
#[derive(Debug, Clone)]
pub struct RefinementRound {
    pub round: usize,
    pub n_constraints: usize,
    pub lp_iterations: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub max_violation: f64,
    pub added: usize,
}

/// Complementary slackness evidence at the LP optimum.
#[derive(Debug, Clone)]
pub struct SlacknessReport {
    /// `max |v_eu,mu(theta, x) - g(x)| / (1 + |g(x)|)` over dual atoms.
    pub max_primal_residual: f64,
    /// `max |sum_atoms kernel-weighted dual mass - 1|` over support nodes
    /// carrying mass, in the transformed scale.
    pub max_dual_residual: f64,
    /// No dual atom sits on the zero set of the payoff.
    pub zeros_avoided: bool,
    /// Largest spread of dual-atom log-prices sharing a maturity (the
    /// atoms are expected to cluster along a single curve).
    pub curve_dispersion: f64,
}

/// Output of the exchange solver.
#[derive(Debug, Clone)]
pub struct CdeoSolution {
    /// Optimal measure (atoms at support nodes).
    pub mu_star: PayoffMeasure,
    /// Dual measure: `((theta, x), mass)` for every active domination point.
    pub lambda: Vec<((f64, f64), f64)>,
    /// CDEO price at `(T, x0)` (the LP objective).
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// Total mass of the optimal measure.
    pub total_mass: f64,
    pub converged: bool,
    /// Largest remaining domination violation on the scan region.
    pub max_violation: f64,
    pub rounds: usize,
    pub slackness: SlacknessReport,
    pub refinement_log: Vec<RefinementRound>,
    pub validation: ValidationReport,
    /// Fraction of support nodes within one log-unit of the knot carrying
    /// mass (discretisation richness diagnostic).
    pub support_fill: f64,
}

/// Discounted price of an atom list at `(theta, x)`; the scan hot path.
fn price_atoms(m: &MarketParams, atoms: &[(f64, f64)], theta: f64, x: f64) -> f64 {
    let r_hat = m.r_hat();
    let sigma2 = m.sigma2();
    let (m1, v1) = (x + r_hat * theta, sigma2 * theta);
    let (m2, v2) = (m.x0 + r_hat * m.horizon, sigma2 * m.horizon);
    let disc = (-m.r * theta).exp();
    let mut acc = 0.0;
    for &(y, w) in atoms {
        acc += w * log_pdf_ratio_raw(m1, v1, m2, v2, y).exp();
    }
    disc * acc
}

/// Violations of `v_eu,mu >= g` on one maturity slice: negative local
/// minima of `psi(x) = v - g`, Brent-refined between scan neighbours.
fn slice_violations(
    m: &MarketParams,
    g: &AmericanPayoff,
    atoms: &[(f64, f64)],
    theta: f64,
    xs: &[f64],
    feas_tol: f64,
) -> Vec<(f64, f64, f64)> {
    let psi = |x: f64| price_atoms(m, atoms, theta, x) - g.value(x);
    let vals: Vec<f64> = xs.iter().map(|&x| psi(x)).collect();
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let left_ok = i == 0 || vals[i] <= vals[i - 1];
        let right_ok = i == xs.len() - 1 || vals[i] <= vals[i + 1];
        if !(left_ok && right_ok) || vals[i] > -0.2 * feas_tol {
            continue;
        }
        let lo = if i == 0 { xs[0] } else { xs[i - 1] };
        let hi = if i == xs.len() - 1 { xs[xs.len() - 1] } else { xs[i + 1] };
        let (xr, vr) = crate::optim::brent_min(psi, lo, hi, 1e-10, 120);
        let (xb, vb) = if vr < vals[i] { (xr, vr) } else { (xs[i], vals[i]) };
        if vb < -feas_tol {
            out.push((theta, xb, vb));
        }
    }
    out
}

/// Exchange loop: solve the discretized LP, scan the continuous domination
/// surface for violations, append the worst ones as new rows (a warm
/// restart for the dual-form simplex), and repeat until the largest
/// violation is within tolerance or the round budget runs out.
pub fn solve_cdeo(m: &MarketParams, g: &AmericanPayoff, cfg: &CdeoConfig) -> Result<CdeoSolution> {
    let validation = validate_payoff(g, m.r, m.sigma);
    if !validation.structurally_ok() {
        return Err(CdeoError::domain(format!(
            "payoff fails structural validation (knot residual {:.3e}, min smooth {:.3e})",
            validation.knot_residual, validation.min_smooth
        )));
    }
    let k = g.k_knot();
    let feas_tol = cfg.feas_tol_rel * k.exp();

    let supp = SupportGrid::geometric(k, cfg.support_len, cfg.support_nodes, cfg.support_delta_min)?;
    let cons = ConstraintGrid::seed(m, k, cfg.support_len, cfg.seed_theta, cfg.seed_x, cfg.theta_min)?;
    let mut inst = build_lp(m, g, &supp, &cons)?;

    let scan_thetas = geometric_thetas(cfg.theta_min, m.horizon, cfg.scan_theta);
    let scan_floor = (m.sigma * cfg.theta_min.sqrt() / 6.0).max(1e-4);
    let scan_xs: Vec<f64> = spaced_offsets(scan_floor, cfg.support_len, cfg.scan_x)
        .iter()
        .map(|d| k - d)
        .rev()
        .collect();

    let mut refinement_log = Vec::new();
    let mut converged = false;
    let mut max_violation = f64::INFINITY;
    let mut last = None;
    let mut rounds = 0;

    for round in 0..cfg.max_rounds {
        rounds = round + 1;
        let sol = solve_cover_ipm(&inst.lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(CdeoError::Solver(
                    "discretized domination program is infeasible; widen the support or raise theta_min"
                        .to_string(),
                ))
            }
            LpStatus::Unbounded => {
                return Err(CdeoError::Solver("discretized program unbounded".to_string()))
            }
        }

        let atoms: Vec<(f64, f64)> = inst
            .support
            .iter()
            .zip(&sol.primal)
            .filter(|&(_, w)| *w > 0.0)
            .map(|(&y, &w)| (y, w))
            .collect();

        let mut violations: Vec<(f64, f64, f64)> = scan_thetas
            .par_iter()
            .map(|&th| slice_violations(m, g, &atoms, th, &scan_xs, feas_tol))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        max_violation = violations.iter().map(|&(_, _, v)| -v).fold(0.0, f64::max);

        // worst first; deterministic tie-break on coordinates
        violations.sort_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap()
                .then(a.0.partial_cmp(&b.0).unwrap())
                .then(a.1.partial_cmp(&b.1).unwrap())
        });

        let mut added = 0;
        for &(th, x, _) in violations.iter() {
            if added >= cfg.max_added_per_round {
                break;
            }
            // near-duplicate rows are harmless for the interior-point
            // solve; only exact repeats are skipped
            let duplicate = inst
                .points
                .iter()
                .any(|&(pt, px)| (pt - th).abs() <= 1e-9 && (px - x).abs() <= 1e-9);
            if duplicate {
                continue;
            }
            let row = kernel_row(m, &inst.support, th, x)?;
            if row.iter().all(|&e| e <= 0.0) {
                continue;
            }
            inst.lp.push_row(row, g.value(x))?;
            inst.points.push((th, x));
            added += 1;
        }

        if std::env::var_os("CDEO_LP_DEBUG").is_some() {
            eprintln!(
                "[cdeo] round {round}: {} rows, lp iters {}, obj {:.9e}, viol {:.3e}, added {added}",
                inst.points.len(),
                sol.iterations,
                sol.primal_objective,
                max_violation
            );
        }
        refinement_log.push(RefinementRound {
            round,
            n_constraints: inst.points.len(),
            lp_iterations: sol.iterations,
            primal_obj: sol.primal_objective,
            dual_obj: sol.dual_objective,
            max_violation,
            added,
        });
        last = Some(sol);
        if max_violation <= feas_tol {
            converged = true;
            break;
        }
        if added == 0 {
            // violations exist but none could be expressed as new rows
            break;
        }
    }

    let sol = last.expect("at least one LP solve");
    let atoms: Vec<(f64, f64)> = inst
        .support
        .iter()
        .zip(&sol.primal)
        .filter(|&(_, w)| *w > 0.0)
        .map(|(&y, &w)| (y, w))
        .collect();
    let mu_star = PayoffMeasure::from_atoms(atoms)?;
    let lambda: Vec<((f64, f64), f64)> = inst
        .points
        .iter()
        .zip(&sol.dual)
        .filter(|&(_, l)| *l > 0.0)
        .map(|(&p, &l)| (p, l))
        .collect();

    let near_knot: Vec<usize> = (0..inst.support.len())
        .filter(|&i| inst.support[i] >= k - 1.0)
        .collect();
    let filled = near_knot.iter().filter(|&&i| sol.primal[i] > 0.0).count();
    let support_fill =
        if near_knot.is_empty() { 0.0 } else { filled as f64 / near_knot.len() as f64 };

    let mut out = CdeoSolution {
        mu_star,
        lambda,
        primal_obj: sol.primal_objective,
        dual_obj: sol.dual_objective,
        total_mass: sol.primal.iter().sum(),
        converged,
        max_violation,
        rounds,
        slackness: SlacknessReport {
            max_primal_residual: 0.0,
            max_dual_residual: 0.0,
            zeros_avoided: true,
            curve_dispersion: 0.0,
        },
        refinement_log,
        validation,
        support_fill,
    };
    out.slackness = slackness_report(&out, m, g)?;
    Ok(out)
}

/// Recomputes the complementary-slackness conditions from a solution:
/// (i) at every dual atom the measure price meets the payoff,
/// (ii) at every support node carrying mass the kernel-weighted dual mass
/// is one in the transformed scale,
/// (iii) dual atoms avoid the zero set of the payoff.
pub fn slackness_report(sol: &CdeoSolution, m: &MarketParams, g: &AmericanPayoff) -> Result<SlacknessReport> {
    let gamma = m.gamma();
    let r_tilde = m.r_tilde();
    let sigma2 = m.sigma2();
    let mut max_primal = 0.0f64;
    let mut zeros_avoided = true;
    for &((theta, x), mass) in &sol.lambda {
        if mass <= 0.0 {
            continue;
        }
        let v = price_measure_payoff(m, &sol.mu_star, theta, x)?;
        let gx = g.value(x);
        max_primal = max_primal.max((v - gx).abs() / (1.0 + gx.abs()));
        if gx <= 0.0 {
            zeros_avoided = false;
        }
    }

    let mut max_dual = 0.0f64;
    for &(y, w) in sol.mu_star.atoms() {
        if w <= 0.0 {
            continue;
        }
        // transformed-scale dual constraint: sum lambda~ kappa(T-theta, x, y) = 1
        let mut acc = 0.0;
        for &((theta, x), mass) in &sol.lambda {
            let lam_tilde = mass * (gamma * (m.x0 - x)).exp();
            let (m1, v1) = (x + r_tilde * theta, sigma2 * theta);
            let (m2, v2) = (m.x0 + r_tilde * m.horizon, sigma2 * m.horizon);
            acc += lam_tilde * log_pdf_ratio_raw(m1, v1, m2, v2, y).exp() * (m.r * m.horizon).exp()
                * (-m.r * theta).exp();
        }
        max_dual = max_dual.max((acc - 1.0).abs());
    }

    // dispersion of dual atoms sharing a maturity
    let mut sorted: Vec<_> = sol.lambda.iter().map(|&((t, x), _)| (t, x)).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut curve_dispersion = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && (sorted[j + 1].0 - sorted[i].0).abs() <= 1e-12 {
            j += 1;
        }
        curve_dispersion = curve_dispersion.max(sorted[j].1 - sorted[i].1);
        i = j + 1;
    }

    Ok(SlacknessReport {
        max_primal_residual: max_primal,
        max_dual_residual: max_dual,
        zeros_avoided,
        curve_dispersion,
    })
}

/// Relocates all mass above the knot to an atom at the knot. Preserves
/// total mass; prices never decrease at `x < K` by the Gaussian-tail
/// comparison that motivates the map.
pub fn relocate_mass(mu: &PayoffMeasure, k_knot: f64) -> Result<PayoffMeasure> {
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut moved = 0.0;
    for &(y, w) in mu.atoms() {
        if y > k_knot {
            moved += w;
        } else {
            atoms.push((y, w));
        }
    }
    let density = match mu.density() {
        None => None,
        Some(d) => {
            let grid = d.grid();
            let vals = d.values();
            if *grid.last().unwrap() <= k_knot {
                Some(PiecewiseLinearDensity::new(grid.to_vec(), vals.to_vec())?)
            } else if grid[0] >= k_knot {
                moved += d.mass();
                None
            } else {
                // split the density at the knot; trapezoid pieces are exact
                let mut new_grid = Vec::new();
                let mut new_vals = Vec::new();
                for i in 0..grid.len() {
                    if grid[i] < k_knot {
                        new_grid.push(grid[i]);
                        new_vals.push(vals[i]);
                    } else {
                        break;
                    }
                }
                let vk = d.value(k_knot);
                new_grid.push(k_knot);
                new_vals.push(vk);
                // mass of the upper part
                let mut upper = 0.0;
                let mut prev = (k_knot, vk);
                for i in 0..grid.len() {
                    if grid[i] > k_knot {
                        upper += 0.5 * (prev.1 + vals[i]) * (grid[i] - prev.0);
                        prev = (grid[i], vals[i]);
                    }
                }
                moved += upper;
                if new_grid.len() >= 2 {
                    Some(PiecewiseLinearDensity::new(new_grid, new_vals)?)
                } else {
                    None
                }
            }
        }
    };
    if moved > 0.0 {
        atoms.push((k_knot, moved));
    }
    PayoffMeasure::new(atoms, density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num_kernel::bs_put_value;
    use crate::payoff::make_put;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const K: f64 = 4.605170185988091;

    fn section4_market() -> MarketParams {
        MarketParams::new(0.06, 0.4, 0.5, K + 0.1).unwrap()
    }

    #[test]
    fn single_node_single_constraint() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let supp = SupportGrid::from_nodes(vec![K - 0.5], K).unwrap();
        let (theta, x) = (0.25, K - 0.4);
        let cons = ConstraintGrid { points: vec![(theta, x)] };
        let inst = build_lp(&m, &g, &supp, &cons).unwrap();
        let (primal, dual, status) = solve_lp(&inst).unwrap();
        assert_eq!(status, LpStatus::Optimal);
        // one-variable LP: the optimal mass makes the constraint tight
        let entry = inst.lp.rows[0][0];
        assert_relative_eq!(primal[0], g.value(x) / entry, max_relative = 1e-9);
        assert!(dual[0] > 0.0);
    }

    #[test]
    fn zero_payoff_gives_zero_measure() {
        let m = section4_market();
        let g = AmericanPayoff::zero(K);
        let sol = solve_cdeo(&m, &g, &CdeoConfig::coarse()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.primal_obj, 0.0);
        assert_eq!(sol.total_mass, 0.0);
        assert!(sol.mu_star.atoms().is_empty());
    }

    #[test]
    fn anchor_row_entries_are_pure_discount() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let supp = SupportGrid::geometric(K, 4.0, 24, 1e-2).unwrap();
        let cons = ConstraintGrid { points: vec![(m.horizon, m.x0)] };
        let inst = build_lp(&m, &g, &supp, &cons).unwrap();
        for &e in &inst.lp.rows[0] {
            assert_relative_eq!(e, (-m.r * m.horizon).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn build_rejects_bad_grids() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let supp = SupportGrid::geometric(K, 4.0, 24, 1e-2).unwrap();
        assert!(build_lp(&m, &g, &supp, &ConstraintGrid::default()).is_err());
        let cons = ConstraintGrid { points: vec![(0.0, K - 1.0)] };
        assert!(build_lp(&m, &g, &supp, &cons).is_err());
    }

    #[test]
    fn relocate_is_identity_below_the_knot() {
        let dens =
            PiecewiseLinearDensity::new(vec![K - 2.0, K - 1.0, K], vec![0.4, 0.9, 0.1]).unwrap();
        let mu = PayoffMeasure::new(vec![(K - 0.5, 1.0)], Some(dens)).unwrap();
        let s = relocate_mass(&mu, K).unwrap();
        assert_eq!(s, mu);
    }

    #[test]
    fn relocate_moves_atom_to_knot_preserving_mass() {
        let mu = PayoffMeasure::from_atoms(vec![(K + 1.0, 1.0), (K - 0.2, 0.3)]).unwrap();
        let s = relocate_mass(&mu, K).unwrap();
        assert_relative_eq!(s.total_mass(), mu.total_mass(), max_relative = 1e-15);
        assert!(s.atoms().iter().any(|&(y, w)| y == K && w == 1.0));
        assert!(s.support_upper_bound().unwrap() <= K);
    }

    #[test]
    fn relocate_splits_density_at_knot() {
        let dens = PiecewiseLinearDensity::new(
            vec![K - 1.0, K - 0.25, K + 0.75, K + 1.0],
            vec![0.2, 0.8, 0.4, 0.0],
        )
        .unwrap();
        let mu = PayoffMeasure::new(vec![], Some(dens)).unwrap();
        let s = relocate_mass(&mu, K).unwrap();
        assert_relative_eq!(s.total_mass(), mu.total_mass(), max_relative = 1e-14);
        assert!(s.support_upper_bound().unwrap() <= K);
        // the knot atom carries exactly the relocated upper mass
        let knot_atom = s.atoms().iter().find(|&&(y, _)| y == K).unwrap().1;
        assert!(knot_atom > 0.0);
    }

    #[test]
    fn relocation_never_cheapens_prices_below_the_knot() {
        let m = section4_market();
        let mu = PayoffMeasure::from_atoms(vec![(K + 0.6, 0.7), (K - 0.8, 0.5)]).unwrap();
        let s = relocate_mass(&mu, K).unwrap();
        let mut state = 7u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let theta = 0.01 + 0.49 * uniform();
            let x = K - 3.0 * uniform() - 1e-3;
            let before = price_measure_payoff(&m, &mu, theta, x).unwrap();
            let after = price_measure_payoff(&m, &s, theta, x).unwrap();
            assert!(after >= before - 1e-10 * (1.0 + before), "({theta}, {x})");
        }
    }

    #[test]
    fn zero_rate_put_cdeo_prices_like_european() {
        // with r = 0 the put payoff itself dominates, so the CDEO price is
        // the European put price at the anchor
        let m = MarketParams::new(0.0, 0.4, 0.5, K + 0.1).unwrap();
        let g = make_put(K).unwrap();
        let sol = solve_cdeo(&m, &g, &CdeoConfig::coarse()).unwrap();
        assert!(sol.converged, "max violation {:.3e}", sol.max_violation);
        let euro = bs_put_value(&m, K, m.horizon, m.x0).unwrap();
        assert!(
            (sol.primal_obj - euro).abs() <= 2e-3 * K.exp(),
            "cdeo {} vs european {}",
            sol.primal_obj,
            euro
        );
        // the relaxed program can only undershoot by the feasibility slack
        assert!(sol.primal_obj >= euro - 1e-2);
    }

    #[test]
    fn exchange_loop_invariants_on_the_put() {
        let m = section4_market();
        let g = make_put(K).unwrap();
        let sol = solve_cdeo(&m, &g, &CdeoConfig::coarse()).unwrap();
        assert!(sol.converged, "max violation {:.3e}", sol.max_violation);
        // weak duality at every round, monotone primal objective
        for w in sol.refinement_log.windows(2) {
            assert!(w[1].primal_obj >= w[0].primal_obj - 1e-9);
        }
        for r in &sol.refinement_log {
            assert!(r.dual_obj <= r.primal_obj + 1e-9 * (1.0 + r.primal_obj.abs()));
        }
        // strong duality at convergence
        let gap = (sol.primal_obj - sol.dual_obj).abs() / (1.0 + sol.primal_obj.abs());
        assert!(gap <= 1e-6, "gap {gap}");
        // slackness
        assert!(sol.slackness.max_primal_residual <= 1e-4, "{:?}", sol.slackness);
        assert!(sol.slackness.max_dual_residual <= 1e-4, "{:?}", sol.slackness);
        assert!(sol.slackness.zeros_avoided);
        // the price upper-bounds the American value
        let tree = crate::american_pricer::binomial_american(&m, &g, m.horizon, m.x0, 2000).unwrap();
        assert!(sol.primal_obj >= tree - 2e-4 * K.exp());
        assert!(
            (sol.primal_obj - tree) / tree <= 0.02,
            "cdeo {} vs american {}",
            sol.primal_obj,
            tree
        );
    }
}
