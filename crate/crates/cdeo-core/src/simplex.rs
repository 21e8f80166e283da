//! Dense revised simplex for nonnegative covering programs
//!
//!   minimise c.w   subject to   A w >= b,  w >= 0,
//!
//! with `c >= 0` and `A, b >= 0`. The engine works on the dual
//!
//!   maximise b.lambda   subject to   A' lambda + s = c,  lambda, s >= 0,
//!
//! whose slack basis is immediately feasible, and reads the cover primal
//! `w` off the row multipliers. This orientation keeps the basis at
//! `n = #variables` rows however many covering constraints there are, and
//! makes constraint generation a warm start: new rows of `A` only add
//! nonbasic dual columns, so the current basis stays optimal-feasible and
//! re-solving continues from it.
//!
//! Pivoting uses Dantzig pricing with an automatic switch to Bland's
//! anti-cycling rule after a stall; the basis inverse is kept explicitly
//! and refactorised periodically. Row/column equilibration is applied
//! internally and undone on output.

use crate::error::{CdeoError, Result};

/// Outcome classification of a covering LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// The covering constraints cannot be met (the internal dual is
    /// unbounded).
    Infeasible,
    /// Unbounded objective. Cannot occur for covering programs with
    /// `c >= 0`; kept for interface completeness.
    Unbounded,
}

/// Covering linear program `min c.w : A w >= b, w >= 0` in dense row form.
#[derive(Debug, Clone, Default)]
pub struct CoverLp {
    /// Number of variables `n`.
    pub n_vars: usize,
    /// Constraint rows, each of length `n_vars`.
    pub rows: Vec<Vec<f64>>,
    /// Right-hand sides, one per row.
    pub rhs: Vec<f64>,
    /// Objective coefficients, `>= 0`.
    pub cost: Vec<f64>,
}

impl CoverLp {
    pub fn new(cost: Vec<f64>) -> Result<Self> {
        if cost.is_empty() {
            return Err(CdeoError::config("LP needs at least one variable"));
        }
        if cost.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(CdeoError::config("covering LP requires finite nonnegative costs"));
        }
        Ok(CoverLp { n_vars: cost.len(), rows: Vec::new(), rhs: Vec::new(), cost })
    }

    pub fn push_row(&mut self, row: Vec<f64>, rhs: f64) -> Result<()> {
        if row.len() != self.n_vars {
            return Err(CdeoError::config("row length mismatch"));
        }
        if row.iter().any(|a| !a.is_finite()) || !rhs.is_finite() {
            return Err(CdeoError::config("LP data must be finite"));
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Solution of a covering LP.
#[derive(Debug, Clone)]
pub struct CoverSolution {
    pub status: LpStatus,
    /// Primal variables `w` (length `n_vars`).
    pub primal: Vec<f64>,
    /// Dual multipliers, one nonnegative entry per covering row.
    pub dual: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// `max_j (b_j - (A w)_j) / (1 + |b_j|)` over all rows.
    pub max_primal_violation: f64,
    /// Largest complementary-slackness residual:
    /// `max(lambda_j * |(A w)_j - b_j|, w_i * |c_i - (A' lambda)_i|)`, scaled.
    pub max_slackness_residual: f64,
}

const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const STALL_LIMIT: usize = 600;

/// Basis member of the dual standard form: a covering-row multiplier or a
/// variable slack. Indices stay stable when rows are appended, which is
/// what makes warm starts across constraint generation valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Lambda(usize),
    Slack(usize),
}

/// Reusable simplex state (basis + scaling) for a growing covering LP.
#[derive(Debug)]
pub struct SimplexEngine {
    n: usize,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    basis: Vec<BasisVar>,
    binv: Vec<f64>, // n x n row-major
    lambda_in_basis: Vec<bool>,
    slack_in_basis: Vec<bool>,
}

impl SimplexEngine {
    pub fn new(lp: &CoverLp) -> Result<Self> {
        if lp.cost.iter().any(|c| *c < 0.0) {
            return Err(CdeoError::config("covering simplex requires c >= 0"));
        }
        let n = lp.n_vars;
        // column scale from the initial matrix, frozen afterwards
        let mut col_scale = vec![1.0f64; n];
        for i in 0..n {
            let mut m: f64 = 0.0;
            for row in &lp.rows {
                m = m.max(row[i].abs());
            }
            if m > 0.0 {
                col_scale[i] = 1.0 / m;
            }
        }
        let mut eng = SimplexEngine {
            n,
            col_scale,
            row_scale: Vec::new(),
            basis: (0..n).map(BasisVar::Slack).collect(),
            binv: identity(n),
            lambda_in_basis: Vec::new(),
            slack_in_basis: vec![true; n],
        };
        eng.extend_row_scales(lp);
        Ok(eng)
    }

    /// Row scales for any rows added since the last solve.
    fn extend_row_scales(&mut self, lp: &CoverLp) {
        while self.row_scale.len() < lp.rows.len() {
            let j = self.row_scale.len();
            let mut m: f64 = 0.0;
            for i in 0..self.n {
                m = m.max((lp.rows[j][i] * self.col_scale[i]).abs());
            }
            self.row_scale.push(if m > 0.0 { 1.0 / m } else { 1.0 });
            self.lambda_in_basis.push(false);
        }
    }

    #[inline]
    fn scaled_entry(&self, lp: &CoverLp, j: usize, i: usize) -> f64 {
        lp.rows[j][i] * self.col_scale[i] * self.row_scale[j]
    }

    /// Column of the dual standard form for a basis variable, in scaled
    /// coordinates.
    fn column(&self, lp: &CoverLp, var: BasisVar, out: &mut [f64]) {
        match var {
            BasisVar::Lambda(j) => {
                for i in 0..self.n {
                    out[i] = self.scaled_entry(lp, j, i);
                }
            }
            BasisVar::Slack(i) => {
                out.fill(0.0);
                out[i] = 1.0;
            }
        }
    }

    fn scaled_cost(&self, lp: &CoverLp, i: usize) -> f64 {
        lp.cost[i] * self.col_scale[i]
    }

    fn scaled_rhs(&self, lp: &CoverLp, j: usize) -> f64 {
        lp.rhs[j] * self.row_scale[j]
    }

    /// Rebuilds the explicit inverse; `false` means the basis is
    /// numerically singular and the caller must recover.
    fn refactor(&mut self, lp: &CoverLp) -> bool {
        let n = self.n;
        let mut b = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for (k, &var) in self.basis.iter().enumerate() {
            self.column(lp, var, &mut col);
            for i in 0..n {
                b[i * n + k] = col[i];
            }
        }
        match invert(&b, n) {
            Some(inv) => {
                self.binv = inv;
                true
            }
            None => false,
        }
    }

    fn reset_to_slack_basis(&mut self) {
        self.basis = (0..self.n).map(BasisVar::Slack).collect();
        self.binv = identity(self.n);
        self.lambda_in_basis.iter_mut().for_each(|f| *f = false);
        self.slack_in_basis.iter_mut().for_each(|f| *f = true);
    }

    /// Keeps a maximal independent subset of the current basis columns and
    /// completes the rest with slacks (rank-revealing elimination with
    /// column pivoting). Used to repair a numerically singular basis while
    /// preserving as much warm-start information as possible.
    fn repair_basis(&mut self, lp: &CoverLp) {
        let n = self.n;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut buf = vec![0.0; n];
        for &var in &self.basis {
            self.column(lp, var, &mut buf);
            cols.push(buf.clone());
        }
        let mut work: Vec<Vec<f64>> = cols.clone();
        let mut kept: Vec<usize> = Vec::new();
        let mut pivot_rows: Vec<usize> = Vec::new();
        let mut row_used = vec![false; n];
        for c in 0..n {
            // largest remaining entry of candidate column c
            let mut best_row = None;
            let mut best_val = 1e-8;
            for r in 0..n {
                if !row_used[r] && work[c][r].abs() > best_val {
                    best_val = work[c][r].abs();
                    best_row = Some(r);
                }
            }
            let Some(pr) = best_row else { continue };
            row_used[pr] = true;
            kept.push(c);
            pivot_rows.push(pr);
            let piv = work[c][pr];
            for c2 in c + 1..n {
                let f = work[c2][pr] / piv;
                if f != 0.0 {
                    for r in 0..n {
                        work[c2][r] -= f * work[c][r];
                    }
                }
            }
        }
        let mut new_basis: Vec<BasisVar> = kept.iter().map(|&c| self.basis[c]).collect();
        // complete with slacks on the uncovered rows
        let kept_slacks: std::collections::HashSet<usize> = new_basis
            .iter()
            .filter_map(|v| if let BasisVar::Slack(i) = v { Some(*i) } else { None })
            .collect();
        for r in 0..n {
            if new_basis.len() == n {
                break;
            }
            if !row_used[r] && !kept_slacks.contains(&r) {
                new_basis.push(BasisVar::Slack(r));
                row_used[r] = true;
            }
        }
        // in pathological cases fall back entirely
        if new_basis.len() != n {
            self.reset_to_slack_basis();
            return;
        }
        self.lambda_in_basis.iter_mut().for_each(|f| *f = false);
        self.slack_in_basis.iter_mut().for_each(|f| *f = false);
        for &var in &new_basis {
            match var {
                BasisVar::Lambda(j) => self.lambda_in_basis[j] = true,
                BasisVar::Slack(i) => self.slack_in_basis[i] = true,
            }
        }
        self.basis = new_basis;
        if !self.refactor(lp) {
            self.reset_to_slack_basis();
        }
    }

    /// Solves the (possibly extended) LP from the current basis.
    pub fn solve(&mut self, lp: &CoverLp) -> Result<CoverSolution> {
        self.extend_row_scales(lp);
        if lp.rows.is_empty() {
            // no constraints: w = 0 is optimal
            return Ok(CoverSolution {
                status: LpStatus::Optimal,
                primal: vec![0.0; self.n],
                dual: Vec::new(),
                primal_objective: 0.0,
                dual_objective: 0.0,
                iterations: 0,
                max_primal_violation: 0.0,
                max_slackness_residual: 0.0,
            });
        }
        if !self.refactor(lp) {
            self.repair_basis(lp);
        }

        let n = self.n;
        let m = lp.rows.len();
        let var_index = |v: BasisVar| match v {
            BasisVar::Lambda(j) => j,
            BasisVar::Slack(i) => m + i,
        };

        // Wolfe-style deterministic perturbation: near-duplicate covering
        // rows make the optimal face massively degenerate, which an exact
        // simplex walks in endless zero steps. The final solution is
        // re-extracted against the unperturbed data, so the perturbation
        // only steers the path.
        let chat_exact: Vec<f64> = (0..n).map(|i| self.scaled_cost(lp, i)).collect();
        let chat: Vec<f64> = chat_exact
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let h = ((i as u64).wrapping_mul(2654435761) % 9973) as f64 / 9973.0;
                c * (1.0 + 1e-7 * (1.0 + h))
            })
            .collect();
        let bhat: Vec<f64> = (0..m).map(|j| self.scaled_rhs(lp, j)).collect();

        // basic values xB = B^-1 chat
        let mut xb = mat_vec(&self.binv, &chat, n);
        // a warm basis is feasible in exact arithmetic; fall back if drift
        // says otherwise
        if xb.iter().any(|v| *v < -1e-7) {
            self.reset_to_slack_basis();
            xb = chat.clone();
        }
        xb.iter_mut().for_each(|v| *v = v.max(0.0));

        let obj_of = |v: BasisVar| match v {
            BasisVar::Lambda(j) => bhat[j],
            BasisVar::Slack(_) => 0.0,
        };
        let basis_obj = |basis: &[BasisVar], xb: &[f64]| -> f64 {
            basis.iter().zip(xb).map(|(&v, &x)| obj_of(v) * x).sum()
        };

        let mut y = vec![0.0; n];
        let mut dir = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut iterations = 0usize;
        let mut since_refactor = 0usize;
        let mut bland_burst = 0usize;
        let mut bland_origin = 0usize;
        let mut bursts = 0usize;
        let mut stall = 0usize;
        let mut singular_recoveries = 0usize;
        let mut best_obj = basis_obj(&self.basis, &xb);
        // columns found numerically dependent on the current basis; cleared
        // after every successful pivot
        let mut banned_lambda = vec![false; m];
        let mut banned_slack = vec![false; n];
        let max_iterations = 50_000 + 60 * (m + n);
        let debug = std::env::var_os("CDEO_LP_DEBUG").is_some();

        let refresh = |eng: &mut SimplexEngine,
                       xb: &mut Vec<f64>,
                       singular_recoveries: &mut usize|
         -> Result<()> {
            if !eng.refactor(lp) {
                *singular_recoveries += 1;
                if *singular_recoveries > 40 {
                    return Err(CdeoError::Solver(
                        "basis repeatedly singular; problem too ill-conditioned".to_string(),
                    ));
                }
                eng.repair_basis(lp);
            }
            *xb = mat_vec(&eng.binv, &chat, n);
            // ratio-band slippage leaves harmless negativity at roundoff
            // scale; only gross infeasibility forces a restart
            if xb.iter().any(|v| *v < -1e-5) {
                eng.reset_to_slack_basis();
                *xb = chat.clone();
            }
            xb.iter_mut().for_each(|v| *v = v.max(0.0));
            Ok(())
        };

        let status = loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(CdeoError::Solver(format!(
                    "simplex exceeded {max_iterations} iterations ({m} rows, {n} vars)"
                )));
            }
            let bland = bland_burst > 0;
            if bland {
                bland_burst -= 1;
            }

            // y = objB' B^-1
            for i in 0..n {
                let mut acc = 0.0;
                for (k, &var) in self.basis.iter().enumerate() {
                    let o = obj_of(var);
                    if o != 0.0 {
                        acc += o * self.binv[k * n + i];
                    }
                }
                y[i] = acc;
            }

            // pricing: Dantzig takes the best reduced cost, a Bland burst
            // takes the first eligible index
            let mut entering: Option<(BasisVar, f64)> = None;
            'lam: for jj in 0..m {
                let j = if bland { (bland_origin + jj) % m } else { jj };
                if self.lambda_in_basis[j] || banned_lambda[j] {
                    continue;
                }
                let mut dot = 0.0;
                for i in 0..n {
                    dot += y[i] * self.scaled_entry(lp, j, i);
                }
                let red = bhat[j] - dot;
                if red > OPT_TOL {
                    if bland {
                        entering = Some((BasisVar::Lambda(j), red));
                        break 'lam;
                    }
                    if entering.map_or(true, |(_, best)| red > best) {
                        entering = Some((BasisVar::Lambda(j), red));
                    }
                }
            }
            if entering.is_none() {
                for i in 0..n {
                    if self.slack_in_basis[i] || banned_slack[i] {
                        continue;
                    }
                    let red = -y[i];
                    if red > OPT_TOL {
                        if bland {
                            entering = Some((BasisVar::Slack(i), red));
                            break;
                        }
                        if entering.map_or(true, |(_, best)| red > best) {
                            entering = Some((BasisVar::Slack(i), red));
                        }
                    }
                }
            }

            let Some((enter, _)) = entering else {
                break LpStatus::Optimal;
            };

            self.column(lp, enter, &mut col);
            // dir = B^-1 col
            for i in 0..n {
                let mut acc = 0.0;
                let row = &self.binv[i * n..(i + 1) * n];
                for k in 0..n {
                    acc += row[k] * col[k];
                }
                dir[i] = acc;
            }

            // Harris-style ratio test: tightest ratio first, then the
            // largest pivot among the near-ties
            let mut best_ratio = f64::INFINITY;
            let mut any_positive = false;
            for k in 0..n {
                if dir[k] > PIVOT_TOL {
                    best_ratio = best_ratio.min(xb[k] / dir[k]);
                } else if dir[k] > 0.0 {
                    any_positive = true;
                }
            }
            if best_ratio.is_infinite() {
                if any_positive {
                    // column numerically dependent on the basis: unusable
                    match enter {
                        BasisVar::Lambda(j) => banned_lambda[j] = true,
                        BasisVar::Slack(i) => banned_slack[i] = true,
                    }
                    continue;
                }
                // genuine improving ray: the covering primal is infeasible
                break LpStatus::Infeasible;
            }
            let band = best_ratio + 1e-11 * (1.0 + best_ratio.abs());
            let mut leave: Option<usize> = None;
            for k in 0..n {
                if dir[k] > PIVOT_TOL && xb[k] / dir[k] <= band {
                    let better = match leave {
                        None => true,
                        Some(kb) => {
                            if bland && dir[k] >= 1e-6 && dir[kb] >= 1e-6 {
                                var_index(self.basis[k]) < var_index(self.basis[kb])
                            } else {
                                dir[k] > dir[kb]
                            }
                        }
                    };
                    if better {
                        leave = Some(k);
                    }
                }
            }
            let Some(kout) = leave else {
                break LpStatus::Infeasible;
            };
            // a tiny pivot would poison the explicit inverse: treat the
            // column as numerically dependent and move on
            if dir[kout] < 1e-4 {
                match enter {
                    BasisVar::Lambda(j) => banned_lambda[j] = true,
                    BasisVar::Slack(i) => banned_slack[i] = true,
                }
                continue;
            }
            let step = xb[kout] / dir[kout];
            banned_lambda.iter_mut().for_each(|b| *b = false);
            banned_slack.iter_mut().for_each(|b| *b = false);

            // pivot: update basis bookkeeping
            match self.basis[kout] {
                BasisVar::Lambda(j) => self.lambda_in_basis[j] = false,
                BasisVar::Slack(i) => self.slack_in_basis[i] = false,
            }
            match enter {
                BasisVar::Lambda(j) => self.lambda_in_basis[j] = true,
                BasisVar::Slack(i) => self.slack_in_basis[i] = true,
            }
            self.basis[kout] = enter;

            // update basic values and the explicit inverse
            let piv = dir[kout];
            for k in 0..n {
                if k != kout {
                    xb[k] -= dir[k] * step;
                    if xb[k] < 0.0 {
                        xb[k] = 0.0;
                    }
                }
            }
            xb[kout] = step;
            let (head, tail) = self.binv.split_at_mut(kout * n);
            let (pivot_row, rest) = tail.split_at_mut(n);
            for v in pivot_row.iter_mut() {
                *v /= piv;
            }
            for (k, chunk) in head.chunks_mut(n).enumerate() {
                let f = dir[k];
                if f != 0.0 {
                    for (c, p) in chunk.iter_mut().zip(pivot_row.iter()) {
                        *c -= f * *p;
                    }
                }
            }
            for (kk, chunk) in rest.chunks_mut(n).enumerate() {
                let f = dir[kout + 1 + kk];
                if f != 0.0 {
                    for (c, p) in chunk.iter_mut().zip(pivot_row.iter()) {
                        *c -= f * *p;
                    }
                }
            }

            since_refactor += 1;
            // borderline pivots degrade the inverse: refresh right away
            if piv < 1e-2 {
                since_refactor = REFACTOR_EVERY;
            }
            let obj = basis_obj(&self.basis, &xb);
            // objective regression beyond noise means the inverse drifted
            let drifted = obj < best_obj - 1e-6 * (1.0 + best_obj.abs());
            if since_refactor >= REFACTOR_EVERY || drifted {
                refresh(self, &mut xb, &mut singular_recoveries)?;
                since_refactor = 0;
                best_obj = basis_obj(&self.basis, &xb);
                stall = 0;
            } else if obj > best_obj + 1e-12 * (1.0 + best_obj.abs()) {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > STALL_LIMIT && bland_burst == 0 {
                    // escape a degenerate plateau with a bounded Bland burst,
                    // rotating the scan origin so repeated bursts do not
                    // replay the same path
                    bursts += 1;
                    bland_origin = (bursts * 7919) % m.max(1);
                    bland_burst = 2 * n;
                    stall = 0;
                    if debug {
                        eprintln!("[lp] iter {iterations}: bland burst {bursts}, obj {obj:.9e}");
                    }
                }
            }
            if debug && iterations % 500 == 0 {
                eprintln!("[lp] iter {iterations}: obj {obj:.9e}, stall {stall}");
            }
        };

        // assemble the solution in original coordinates, re-extracted
        // against the unperturbed cost data
        let mut lambda_hat = vec![0.0; m];
        if status == LpStatus::Optimal && self.refactor(lp) {
            let xb2 = mat_vec(&self.binv, &chat_exact, n);
            for (k, &var) in self.basis.iter().enumerate() {
                if let BasisVar::Lambda(j) = var {
                    lambda_hat[j] = xb2[k].max(0.0);
                }
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (k, &var) in self.basis.iter().enumerate() {
                    let o = obj_of(var);
                    if o != 0.0 {
                        acc += o * self.binv[k * n + i];
                    }
                }
                y[i] = acc;
            }
        } else {
            for (k, &var) in self.basis.iter().enumerate() {
                if let BasisVar::Lambda(j) = var {
                    lambda_hat[j] = xb[k];
                }
            }
        }
        let primal: Vec<f64> = (0..n).map(|i| (y[i] * self.col_scale[i]).max(0.0)).collect();
        let dual: Vec<f64> = (0..m).map(|j| lambda_hat[j] * self.row_scale[j]).collect();

        let primal_objective: f64 = primal.iter().zip(&lp.cost).map(|(w, c)| w * c).sum();
        let dual_objective: f64 = dual.iter().zip(&lp.rhs).map(|(l, b)| l * b).sum();

        let mut max_violation: f64 = 0.0;
        let mut max_slack: f64 = 0.0;
        for j in 0..m {
            let ax: f64 = lp.rows[j].iter().zip(&primal).map(|(a, w)| a * w).sum();
            let viol = (lp.rhs[j] - ax) / (1.0 + lp.rhs[j].abs());
            max_violation = max_violation.max(viol);
            if dual[j] > 0.0 {
                max_slack = max_slack
                    .max(dual[j] * (ax - lp.rhs[j]).abs() / (1.0 + dual_objective.abs()));
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
}

/// One-shot solve without keeping engine state.
pub fn solve_cover_lp(lp: &CoverLp) -> Result<CoverSolution> {
    SimplexEngine::new(lp)?.solve(lp)
}

fn identity(n: usize) -> Vec<f64> {
    let mut id = vec![0.0; n * n];
    for i in 0..n {
        id[i * n + i] = 1.0;
    }
    id
}

fn mat_vec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let row = &a[i * n..(i + 1) * n];
            row.iter().zip(x).map(|(r, v)| r * v).sum()
        })
        .collect()
}

/// Dense inverse by Gauss-Jordan with partial pivoting; `None` if singular.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut work = a.to_vec();
    let mut inv = identity(n);
    for col in 0..n {
        let mut piv_row = col;
        let mut piv_val = work[col * n + col].abs();
        for r in col + 1..n {
            let v = work[r * n + col].abs();
            if v > piv_val {
                piv_val = v;
                piv_row = r;
            }
        }
        if piv_val < 1e-13 {
            return None;
        }
        if piv_row != col {
            for k in 0..n {
                work.swap(col * n + k, piv_row * n + k);
                inv.swap(col * n + k, piv_row * n + k);
            }
        }
        let piv = work[col * n + col];
        for k in 0..n {
            work[col * n + k] /= piv;
            inv[col * n + k] /= piv;
        }
        for r in 0..n {
            if r != col {
                let f = work[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        work[r * n + k] -= f * work[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
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
    fn textbook_two_variable_problem() {
        // min x1 + x2  st  x1 >= 1, x2 >= 0
        let p = lp(vec![1.0, 1.0], vec![(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 0.0)]);
        let s = solve_cover_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.primal_objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.primal[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.dual[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.dual[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn inconsistent_row_is_infeasible() {
        // 0 * x >= 1
        let p = lp(vec![1.0], vec![(vec![0.0], 1.0)]);
        let s = solve_cover_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn zero_rhs_solved_at_origin() {
        let p = lp(vec![2.0, 3.0], vec![(vec![1.0, 1.0], 0.0)]);
        let s = solve_cover_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.primal_objective, 0.0);
    }

    #[test]
    fn rejects_negative_cost() {
        assert!(CoverLp::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn diet_style_problem() {
        // min 2a + 3b  st  a + 2b >= 4, 3a + b >= 6
        let p = lp(vec![2.0, 3.0], vec![(vec![1.0, 2.0], 4.0), (vec![3.0, 1.0], 6.0)]);
        let s = solve_cover_lp(&p).unwrap();
        // optimum at the intersection a = 8/5, b = 6/5: obj = 34/5
        assert_abs_diff_eq!(s.primal_objective, 6.8, epsilon = 1e-9);
        assert_abs_diff_eq!(s.dual_objective, 6.8, epsilon = 1e-9);
        assert!(s.max_slackness_residual <= 1e-7);
        assert!(s.max_primal_violation <= 1e-9);
    }

    #[test]
    fn strong_duality_and_slackness_on_random_instances() {
        let mut state = 0x5deece66du64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..40 {
            let (m, n) = (8, 12);
            let cost: Vec<f64> = (0..n).map(|_| 0.1 + uniform()).collect();
            let mut p = CoverLp::new(cost).unwrap();
            for _ in 0..m {
                let mut row: Vec<f64> =
                    (0..n).map(|_| if uniform() < 0.3 { 0.0 } else { uniform() }).collect();
                if row.iter().all(|v| *v == 0.0) {
                    row[0] = 0.5 + uniform();
                }
                p.push_row(row, uniform() * 2.0).unwrap();
            }
            let s = solve_cover_lp(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            let gap =
                (s.primal_objective - s.dual_objective).abs() / (1.0 + s.primal_objective.abs());
            assert!(gap <= 1e-9, "duality gap {gap}");
            assert!(s.max_primal_violation <= 1e-9);
            assert!(s.max_slackness_residual <= 1e-7);
        }
    }

    #[test]
    fn warm_start_matches_cold_solve_and_is_monotone() {
        let mut state = 12345u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 10;
        let cost: Vec<f64> = (0..n).map(|_| 0.2 + uniform()).collect();
        let mut p = CoverLp::new(cost).unwrap();
        for _ in 0..6 {
            p.push_row((0..n).map(|_| uniform()).collect(), 1.0 + uniform()).unwrap();
        }
        let mut engine = SimplexEngine::new(&p).unwrap();
        let first = engine.solve(&p).unwrap();
        // add rows and warm-restart
        for _ in 0..5 {
            p.push_row((0..n).map(|_| uniform()).collect(), 1.0 + uniform()).unwrap();
        }
        let warm = engine.solve(&p).unwrap();
        let cold = solve_cover_lp(&p).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert_abs_diff_eq!(warm.primal_objective, cold.primal_objective, epsilon = 1e-8);
        // adding covering constraints never decreases the optimum
        assert!(warm.primal_objective >= first.primal_objective - 1e-9);
    }

    #[test]
    fn badly_scaled_rows_are_handled() {
        // same optimum as diet_style_problem under wild row/column scales
        let p = lp(
            vec![2.0e-8, 3.0e6],
            vec![(vec![1.0e-8, 2.0e6], 4.0), (vec![3.0e1, 1.0e15], 6.0e9)],
        );
        let s = solve_cover_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.primal_objective, 6.8, epsilon = 1e-6);
    }
}
