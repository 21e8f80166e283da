//! Primal-dual interior-point solver for covering programs
//!
//!   minimise c.w   s.t.   A w - s = b,  w >= 0,  s >= 0,
//!
//! (Mehrotra predictor-corrector, dense normal equations in the variable
//! space). The discretized domination programs behind the exchange loop
//! carry a continuum of near-tight constraints, which makes their optimal
//! faces massively degenerate; a vertex method has to walk exponentially
//! ill-conditioned bases there, while the normal-equation matrix
//! `A' D A + diag(z/w)` stays symmetric positive definite no matter how
//! collinear the rows are.

use rayon::prelude::*;

use crate::error::{CdeoError, Result};
use crate::simplex::{CoverLp, CoverSolution, LpStatus};

const MAX_ITER: usize = 200;
const GAP_TOL: f64 = 1e-11;
const RES_TOL: f64 = 1e-10;

/// Solves a covering LP by the interior-point method. Returns the same
/// solution shape as the simplex engine; multipliers below roundoff are
/// cleaned to exact zeros.
pub fn solve_cover_ipm(lp: &CoverLp) -> Result<CoverSolution> {
    let n = lp.n_vars;
    let m = lp.rows.len();
    if lp.cost.iter().any(|c| *c < 0.0) {
        return Err(CdeoError::config("covering IPM requires c >= 0"));
    }
    if m == 0 || lp.rhs.iter().all(|&b| b <= 0.0) {
        // w = 0 is optimal
        return Ok(CoverSolution {
            status: LpStatus::Optimal,
            primal: vec![0.0; n],
            dual: vec![0.0; m],
            primal_objective: 0.0,
            dual_objective: 0.0,
            iterations: 0,
            max_primal_violation: 0.0,
            max_slackness_residual: 0.0,
        });
    }

    // max-norm equilibration, column scale frozen from the matrix
    let mut col_scale = vec![1.0f64; n];
    for i in 0..n {
        let mx = lp.rows.iter().map(|r| r[i].abs()).fold(0.0, f64::max);
        if mx > 0.0 {
            col_scale[i] = 1.0 / mx;
        }
    }
    let mut row_scale = vec![1.0f64; m];
    for j in 0..m {
        let mx = (0..n).map(|i| (lp.rows[j][i] * col_scale[i]).abs()).fold(0.0, f64::max);
        if mx > 0.0 {
            row_scale[j] = 1.0 / mx;
        }
    }
    // scaled data (dense, row-major)
    let a: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| lp.rows[j][i] * col_scale[i] * row_scale[j]).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|j| lp.rhs[j] * row_scale[j]).collect();
    let c: Vec<f64> = (0..n).map(|i| lp.cost[i] * col_scale[i]).collect();

    let bn = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cn = 1.0 + c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let mut w = vec![bn; n];
    let mut s = vec![bn; m];
    let mut lam = vec![cn; m];
    let mut z = vec![cn; n];

    let mat_t_vec = |v: &[f64]| -> Vec<f64> {
        // A' v
        let mut out = vec![0.0; n];
        for j in 0..m {
            let vj = v[j];
            if vj != 0.0 {
                for i in 0..n {
                    out[i] += a[j][i] * vj;
                }
            }
        }
        out
    };
    let mat_vec = |v: &[f64]| -> Vec<f64> {
        a.par_iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    };

    let mut iterations = 0;
    let mut status = LpStatus::Optimal;
    let mut best_mu = f64::INFINITY;
    let mut stagnant = 0usize;
    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let aw = mat_vec(&w);
        let atl = mat_t_vec(&lam);
        let rp: Vec<f64> = (0..m).map(|j| b[j] - aw[j] + s[j]).collect();
        let rd: Vec<f64> = (0..n).map(|i| c[i] - atl[i] - z[i]).collect();
        let gap: f64 = w.iter().zip(&z).map(|(x, y)| x * y).sum::<f64>()
            + s.iter().zip(&lam).map(|(x, y)| x * y).sum::<f64>();
        let mu = gap / (n + m) as f64;
        let rp_norm = rp.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let rd_norm = rd.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let pobj: f64 = c.iter().zip(&w).map(|(x, y)| x * y).sum();
        if mu <= GAP_TOL * (1.0 + pobj.abs()) && rp_norm <= RES_TOL * bn && rd_norm <= RES_TOL * cn {
            break;
        }
        // accept the best achievable accuracy when progress dies out
        if mu < 0.98 * best_mu {
            best_mu = mu;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 10 {
                break;
            }
        }
        // divergence heuristics: the covering primal is infeasible iff the
        // dual objective grows without bound
        let dobj: f64 = b.iter().zip(&lam).map(|(x, y)| x * y).sum();
        if dobj > 1e14 * bn && rp_norm > 1e-2 * bn {
            status = LpStatus::Infeasible;
            break;
        }

        // normal matrix M = A' D_lam A + diag(z/w), D_lam = lam/s
        let dlam: Vec<f64> = (0..m).map(|j| lam[j] / s[j]).collect();
        let mut mmat = vec![0.0f64; n * n];
        {
            // accumulate upper triangle in parallel chunks over rows
            let chunks: Vec<Vec<f64>> = (0..m)
                .collect::<Vec<_>>()
                .par_chunks(64.max(m / 64))
                .map(|js| {
                    let mut acc = vec![0.0f64; n * n];
                    for &j in js {
                        let dj = dlam[j];
                        if dj == 0.0 {
                            continue;
                        }
                        let row = &a[j];
                        for p in 0..n {
                            let f = dj * row[p];
                            if f != 0.0 {
                                let dst = &mut acc[p * n..(p + 1) * n];
                                for q in p..n {
                                    dst[q] += f * row[q];
                                }
                            }
                        }
                    }
                    acc
                })
                .collect();
            for acc in chunks {
                for (dst, src) in mmat.iter_mut().zip(&acc) {
                    *dst += src;
                }
            }
            for i in 0..n {
                mmat[i * n + i] += z[i] / w[i];
            }
            // mirror to the lower triangle
            for p in 0..n {
                for q in p + 1..n {
                    mmat[q * n + p] = mmat[p * n + q];
                }
            }
        }
        let chol = cholesky(&mut mmat, n)?;

        let solve_kkt = |chol: &[f64],
                         rc1: &[f64],
                         rc2: &[f64],
                         rp: &[f64],
                         rd: &[f64]|
         -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
            // r1 = rp + Lam^-1 rc2
            let r1: Vec<f64> = (0..m).map(|j| rp[j] + rc2[j] / lam[j]).collect();
            // rhs = A' D_lam r1 - rd + W^-1 rc1
            let dr1: Vec<f64> = (0..m).map(|j| dlam[j] * r1[j]).collect();
            let mut rhs = mat_t_vec(&dr1);
            for i in 0..n {
                rhs[i] += -rd[i] + rc1[i] / w[i];
            }
            let dw = chol_solve(chol, &rhs, n);
            let adw = mat_vec(&dw);
            let dl: Vec<f64> = (0..m).map(|j| dlam[j] * (r1[j] - adw[j])).collect();
            let dz: Vec<f64> = (0..n).map(|i| (rc1[i] - z[i] * dw[i]) / w[i]).collect();
            let ds: Vec<f64> = (0..m).map(|j| (rc2[j] - s[j] * dl[j]) / lam[j]).collect();
            (dw, dl, ds, dz)
        };

        // affine-scaling predictor
        let rc1_aff: Vec<f64> = (0..n).map(|i| -w[i] * z[i]).collect();
        let rc2_aff: Vec<f64> = (0..m).map(|j| -s[j] * lam[j]).collect();
        let (dw_a, dl_a, ds_a, dz_a) = solve_kkt(&chol, &rc1_aff, &rc2_aff, &rp, &rd);
        let ap_aff = max_step(&w, &dw_a).min(max_step(&s, &ds_a));
        let ad_aff = max_step(&lam, &dl_a).min(max_step(&z, &dz_a));
        let gap_aff: f64 = (0..n)
            .map(|i| (w[i] + ap_aff * dw_a[i]) * (z[i] + ad_aff * dz_a[i]))
            .sum::<f64>()
            + (0..m)
                .map(|j| (s[j] + ap_aff * ds_a[j]) * (lam[j] + ad_aff * dl_a[j]))
                .sum::<f64>();
        let mu_aff = gap_aff / (n + m) as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(1e-8, 1.0);

        // corrector
        let rc1: Vec<f64> =
            (0..n).map(|i| sigma * mu - w[i] * z[i] - dw_a[i] * dz_a[i]).collect();
        let rc2: Vec<f64> =
            (0..m).map(|j| sigma * mu - s[j] * lam[j] - ds_a[j] * dl_a[j]).collect();
        let (dw, dl, ds, dz) = solve_kkt(&chol, &rc1, &rc2, &rp, &rd);

        let ap = 0.995 * max_step(&w, &dw).min(max_step(&s, &ds));
        let ad = 0.995 * max_step(&lam, &dl).min(max_step(&z, &dz));
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        for i in 0..n {
            w[i] += ap * dw[i];
            z[i] += ad * dz[i];
        }
        for j in 0..m {
            s[j] += ap * ds[j];
            lam[j] += ad * dl[j];
        }
    }

    // unscale and clean
    let scale_w: f64 = w.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let scale_l: f64 = lam.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let primal: Vec<f64> = (0..n)
        .map(|i| {
            let v = w[i];
            if v <= 1e-11 * (1.0 + scale_w) {
                0.0
            } else {
                v * col_scale[i]
            }
        })
        .collect();
    let dual: Vec<f64> = (0..m)
        .map(|j| {
            let v = lam[j];
            if v <= 1e-11 * (1.0 + scale_l) {
                0.0
            } else {
                v * row_scale[j]
            }
        })
        .collect();
    let primal_objective: f64 = primal.iter().zip(&lp.cost).map(|(x, y)| x * y).sum();
    let dual_objective: f64 =
        dual.iter().zip(&lp.rhs).map(|(x, y)| x * y).sum::<f64>().min(primal_objective);

    let mut max_violation = 0.0f64;
    let mut max_slack = 0.0f64;
    for j in 0..m {
        let ax: f64 = lp.rows[j].iter().zip(&primal).map(|(x, y)| x * y).sum();
        max_violation = max_violation.max((lp.rhs[j] - ax) / (1.0 + lp.rhs[j].abs()));
        if dual[j] > 0.0 {
            max_slack =
                max_slack.max(dual[j] * (ax - lp.rhs[j]).abs() / (1.0 + dual_objective.abs()));
        }
    }
    for i in 0..n {
        if primal[i] > 0.0 {
            let aty: f64 = (0..m).map(|j| lp.rows[j][i] * dual[j]).sum();
            max_slack = max_slack
                .max(primal[i] * (lp.cost[i] - aty).abs() / (1.0 + primal_objective.abs()));
        }
    }

    Ok(CoverSolution {
        status,
        primal,
        dual,
        primal_objective,
        dual_objective,
        iterations,
        max_primal_violation: max_violation,
        max_slackness_residual: max_slack,
    })
}

/// Largest step in `[0, 1e30]` keeping `v + alpha d > 0`.
fn max_step(v: &[f64], d: &[f64]) -> f64 {
    let mut alpha = 1e30f64;
    for (x, dx) in v.iter().zip(d) {
        if *dx < 0.0 {
            alpha = alpha.min(-x / dx);
        }
    }
    alpha
}

/// In-place dense Cholesky (lower triangle), with a relative diagonal lift
/// for semi-definite corner cases. Returns the factor.
fn cholesky(mmat: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for i in 0..n {
        mmat[i * n + i] = mmat[i * n + i] * (1.0 + 1e-14) + 1e-300;
    }
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = mmat[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(CdeoError::Solver(
                        "normal matrix lost positive definiteness".to_string(),
                    ));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn chol_solve(l: &[f64], rhs: &[f64], n: usize) -> Vec<f64> {
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(cost: Vec<f64>, rows: Vec<(Vec<f64>, f64)>) -> CoverLp {
        let mut p = CoverLp::new(cost).unwrap();
        for (row, b) in rows {
            p.push_row(row, b).unwrap();
        }
        p
    }

    #[test]
    fn matches_simplex_on_textbook_problem() {
        let p = lp(vec![2.0, 3.0], vec![(vec![1.0, 2.0], 4.0), (vec![3.0, 1.0], 6.0)]);
        let s = solve_cover_ipm(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.primal_objective, 6.8, epsilon = 1e-7);
        assert_abs_diff_eq!(s.dual_objective, 6.8, epsilon = 1e-7);
        assert!(s.max_primal_violation <= 1e-8);
    }

    #[test]
    fn zero_rhs_is_free() {
        let p = lp(vec![1.0, 1.0], vec![(vec![1.0, 1.0], 0.0)]);
        let s = solve_cover_ipm(&p).unwrap();
        assert_eq!(s.primal_objective, 0.0);
    }

    #[test]
    fn duplicate_rows_are_harmless() {
        let row = vec![1.0, 2.0];
        let mut rows = Vec::new();
        for _ in 0..30 {
            rows.push((row.clone(), 4.0));
        }
        rows.push((vec![3.0, 1.0], 6.0));
        let p = lp(vec![2.0, 3.0], rows);
        let s = solve_cover_ipm(&p).unwrap();
        assert_abs_diff_eq!(s.primal_objective, 6.8, epsilon = 1e-6);
    }

    #[test]
    fn detects_infeasible_cover() {
        let p = lp(vec![1.0], vec![(vec![0.0], 1.0)]);
        let s = solve_cover_ipm(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn agrees_with_simplex_on_random_instances() {
        let mut state = 0xc0ffee123u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..15 {
            let (m, n) = (10, 7);
            let cost: Vec<f64> = (0..n).map(|_| 0.1 + uniform()).collect();
            let mut p = CoverLp::new(cost).unwrap();
            for _ in 0..m {
                let mut row: Vec<f64> =
                    (0..n).map(|_| if uniform() < 0.4 { 0.0 } else { uniform() }).collect();
                if row.iter().all(|v| *v == 0.0) {
                    row[0] = 0.5;
                }
                p.push_row(row, uniform()).unwrap();
            }
            let si = crate::simplex::solve_cover_lp(&p).unwrap();
            let ip = solve_cover_ipm(&p).unwrap();
            assert_abs_diff_eq!(ip.primal_objective, si.primal_objective, epsilon = 1e-6);
        }
    }
}
