//! Convex quadratic programming: `min 1/2 u'Pu + q'u` subject to `A u >= 0`
//! and pinned (Dirichlet) degrees of freedom.
//!
//! The solver is an operator-splitting scheme with over-relaxation and an
//! adaptive penalty, the linear subproblem solved matrix-free by a Jacobi
//! preconditioned conjugate gradient. Once the residuals are small the
//! detected active set is polished by a short augmented-Lagrangian refinement
//! solving the equality-constrained KKT conditions; the polished candidate is
//! kept only when it improves the measured KKT residuals. Everything is
//! deterministic: no randomization, fixed iteration schedule.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use crate::constraints::LinearConstraintSet;
use crate::fem::{assemble_load, assemble_mass, assemble_stiffness, boundary_dofs, dof_position, l2_distance, Degree, FeFunction};
use crate::mesh::Mesh;
use crate::sparse::{cg_solve, Csr};
use crate::{Error, Result};

/// Solver tolerances and caps.
#[derive(Clone, Copy, Debug)]
pub struct QpConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Record the fixed-point displacement per iteration (diagnostics).
    pub record_displacements: bool,
}

impl Default for QpConfig {
    fn default() -> Self {
        QpConfig { eps_abs: 1e-8, eps_rel: 1e-8, max_iter: 200_000, record_displacements: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// A quadratic program over the full dof space.
#[derive(Clone, Debug)]
pub struct QpProblem {
    /// Symmetric positive semidefinite objective matrix.
    pub p: Csr,
    pub q: Vec<f64>,
    /// Inequality rows `A u >= 0`; `None` for unconstrained problems.
    pub constraints: Option<LinearConstraintSet>,
    /// Dirichlet-pinned dofs.
    pub pinned: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub u: Vec<f64>,
    /// `1/2 u'Pu + q'u` at the returned point.
    pub objective: f64,
    /// Worst violation of `A u >= 0`.
    pub primal_residual: f64,
    /// `max |P u + q - A' lambda|` over the free dofs.
    pub dual_residual: f64,
    /// `max |lambda_i (A u)_i|`.
    pub comp_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    /// Row multipliers (`>= 0`), aligned with the constraint rows.
    pub multipliers: Vec<f64>,
    /// `(iteration, rho, displacement)` triples when recording is enabled.
    pub displacements: Vec<(usize, f64, f64)>,
}

const SIGMA: f64 = 1e-6;
const ALPHA: f64 = 1.6;
const RHO_INIT: f64 = 0.1;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const CHECK_EVERY: usize = 10;
const POLISH_EVERY: usize = 250;
const RHO_ADAPT_EVERY: usize = 50;
const EPS_INFEASIBLE: f64 = 1e-7;

struct Reduced {
    p: Csr,
    q: Vec<f64>,
    a: Csr,
    l: Vec<f64>,
    free: Vec<usize>,
    obj_scale: f64,
    row_scale: Vec<f64>,
    /// Original indices of the kept constraint rows (rows fully supported on
    /// pinned dofs are dropped after checking their constant bound).
    kept_rows: Vec<usize>,
    n_rows_full: usize,
    /// A dropped row had a violated constant bound: the pins alone make the
    /// problem infeasible.
    trivially_infeasible: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn reduce(problem: &QpProblem) -> Result<Reduced> {
    let n = problem.q.len();
    if problem.p.nrows() != n || problem.p.ncols() != n {
        return Err(Error::InvalidArgument("P/q dimension mismatch".into()));
    }
    let p_norm = problem.p.inf_norm();
    if problem.p.max_symmetry_defect() > 1e-12 * p_norm.max(1.0) {
        return Err(Error::InvalidArgument("P is not symmetric".into()));
    }
    for (&d, v) in &problem.pinned {
        if d >= n {
            return Err(Error::InvalidArgument(format!("pinned dof {d} out of range")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidArgument("non-finite pinned value".into()));
        }
    }

    let mut col_map = vec![None; n];
    let mut free = Vec::with_capacity(n - problem.pinned.len());
    for d in 0..n {
        if !problem.pinned.contains_key(&d) {
            col_map[d] = Some(free.len());
            free.push(d);
        }
    }

    let mut u_pin = vec![0.0; n];
    for (&d, &v) in &problem.pinned {
        u_pin[d] = v;
    }

    let p_reduced = problem.p.select_rows(&free).select_cols(&col_map, free.len());
    let mut p_upin = vec![0.0; n];
    problem.p.matvec(&u_pin, &mut p_upin);
    let q_reduced: Vec<f64> = free.iter().map(|&d| problem.q[d] + p_upin[d]).collect();

    let (a_full, m) = match &problem.constraints {
        Some(set) => (Some(&set.matrix), set.n_rows()),
        None => (None, 0),
    };
    let (a_reduced, l) = if let Some(a) = a_full {
        if a.ncols() != n {
            return Err(Error::InvalidArgument("constraint column count mismatch".into()));
        }
        let mut a_upin = vec![0.0; m];
        a.matvec(&u_pin, &mut a_upin);
        let l: Vec<f64> = a_upin.iter().map(|&v| -v).collect();
        (a.select_cols(&col_map, free.len()), l)
    } else {
        (Csr::zeros(0, free.len()), Vec::new())
    };

    // objective scaling and constraint row equilibration; rows without free
    // support reduce to constant bounds and are validated here. The scale
    // tracks P so mass-matrix objectives (norm O(h^2)) stay balanced against
    // the unit-normalized constraint rows.
    let obj_scale = if p_norm > 0.0 { p_norm } else { inf_norm(&problem.q).max(1.0) };
    let mut p_scaled = p_reduced;
    p_scaled = scale_values(&p_scaled, 1.0 / obj_scale);
    let q_scaled: Vec<f64> = q_reduced.iter().map(|v| v / obj_scale).collect();

    let n_rows_full = a_reduced.nrows();
    let mut kept_rows = Vec::with_capacity(n_rows_full);
    let mut trivially_infeasible = false;
    for i in 0..n_rows_full {
        let norm = a_reduced.row(i).1.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        if norm == 0.0 {
            if l[i] > 1e-12 * l[i].abs().max(1.0) {
                trivially_infeasible = true;
            }
        } else {
            kept_rows.push(i);
        }
    }
    let mut row_scale = vec![1.0; kept_rows.len()];
    let mut a_coo = crate::sparse::Coo::new(kept_rows.len(), a_reduced.ncols());
    for (new_i, &i) in kept_rows.iter().enumerate() {
        let (cols, vals) = a_reduced.row(i);
        let norm = vals.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        row_scale[new_i] = norm;
        for (&j, &v) in cols.iter().zip(vals) {
            a_coo.push(new_i, j, v / norm);
        }
    }
    let a_scaled = a_coo.to_csr();
    let l_scaled: Vec<f64> =
        kept_rows.iter().enumerate().map(|(new_i, &i)| l[i] / row_scale[new_i]).collect();

    Ok(Reduced {
        p: p_scaled,
        q: q_scaled,
        a: a_scaled,
        l: l_scaled,
        free,
        obj_scale,
        row_scale,
        kept_rows,
        n_rows_full,
        trivially_infeasible,
    })
}

fn scale_values(m: &Csr, s: f64) -> Csr {
    let mut coo = crate::sparse::Coo::new(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            coo.push(i, j, v * s);
        }
    }
    coo.to_csr()
}

/// Solves the QP. Deterministic given the inputs.
pub fn solve_qp(problem: &QpProblem, cfg: &QpConfig) -> Result<QpSolution> {
    let red = reduce(problem)?;
    let n = red.free.len();
    let m = red.a.nrows();

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut iterations = 0usize;
    let mut status = QpStatus::MaxIter;
    let mut displacements = Vec::new();

    if red.trivially_infeasible {
        status = QpStatus::Infeasible;
    } else if n > 0 && m == 0 {
        // unconstrained reduced problem: one CG solve of P x = -q
        let diag: Vec<f64> =
            red.p.diagonal().iter().map(|&d| if d.abs() > 1e-300 { d } else { 1.0 }).collect();
        let b: Vec<f64> = red.q.iter().map(|v| -v).collect();
        let out = cg_solve(
            |v, out| red.p.matvec(v, out),
            &b,
            &mut x,
            &diag,
            1e-14,
            1e-14 * inf_norm(&b).max(1.0),
            20 * n.max(16),
        );
        iterations = out.iterations;
        status = if out.converged { QpStatus::Optimal } else { QpStatus::MaxIter };
    } else if n > 0 && m > 0 {
        let (ax_, ay, it, st) = admm(&red, cfg, &mut displacements);
        x = ax_;
        y = ay;
        iterations = it;
        status = st;

        if status != QpStatus::Infeasible {
            if let Some((xp, yp)) = polish(&red, &x, &y) {
                if kkt_score(&red, &xp, &yp) < kkt_score(&red, &x, &y) {
                    x = xp;
                    y = yp;
                }
            }
            let score = kkt_score(&red, &x, &y);
            let target = cfg.eps_abs + cfg.eps_rel * inf_norm(&red.q).max(1.0);
            if score <= target {
                status = QpStatus::Optimal;
            }
        }
    }

    // expand to the full dof vector and measure KKT on the original data
    let n_full = problem.q.len();
    let mut u = vec![0.0; n_full];
    for (&d, &v) in &problem.pinned {
        u[d] = v;
    }
    for (k, &d) in red.free.iter().enumerate() {
        u[d] = x[k];
    }

    let mut multipliers = vec![0.0; red.n_rows_full];
    for ((&yi, &s), &row) in y.iter().zip(&red.row_scale).zip(&red.kept_rows) {
        multipliers[row] = (-yi).max(0.0) * red.obj_scale / s;
    }

    let mut objective = 0.5 * problem.p.quadratic_form(&u);
    for i in 0..n_full {
        objective += problem.q[i] * u[i];
    }

    let (primal_residual, comp_residual, dual_residual) = match &problem.constraints {
        Some(set) => {
            let au = set.residuals(&u);
            let viol = au.iter().fold(0.0f64, |mx, &v| mx.max(-v));
            let comp = au
                .iter()
                .zip(&multipliers)
                .fold(0.0f64, |mx, (&r, &lam)| mx.max((r * lam).abs()));
            let mut grad = vec![0.0; n_full];
            problem.p.matvec(&u, &mut grad);
            for i in 0..n_full {
                grad[i] += problem.q[i];
            }
            set.matrix.matvec_transpose_add(&multipliers, -1.0, &mut grad);
            let dual = red.free.iter().fold(0.0f64, |mx, &d| mx.max(grad[d].abs()));
            (viol, comp, dual)
        }
        None => {
            let mut grad = vec![0.0; n_full];
            problem.p.matvec(&u, &mut grad);
            for i in 0..n_full {
                grad[i] += problem.q[i];
            }
            let dual = red.free.iter().fold(0.0f64, |mx, &d| mx.max(grad[d].abs()));
            (0.0, 0.0, dual)
        }
    };

    Ok(QpSolution {
        u,
        objective,
        primal_residual,
        dual_residual,
        comp_residual,
        iterations,
        status,
        multipliers,
        displacements,
    })
}

/// The splitting iteration on the reduced, scaled problem. Returns the final
/// primal/dual pair, the iteration count and the exit status.
fn admm(
    red: &Reduced,
    cfg: &QpConfig,
    displacements: &mut Vec<(usize, f64, f64)>,
) -> (Vec<f64>, Vec<f64>, usize, QpStatus) {
    let n = red.free.len();
    let m = red.a.nrows();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; m];
    red.a.matvec(&x, &mut z);
    for i in 0..m {
        z[i] = z[i].max(red.l[i]);
    }

    let mut rho = RHO_INIT;
    let diag_p = red.p.diagonal();
    let mut col_sumsq = vec![0.0; n];
    for i in 0..m {
        let (cols, vals) = red.a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            col_sumsq[j] += v * v;
        }
    }
    let make_diag = |rho: f64| -> Vec<f64> {
        (0..n).map(|j| (diag_p[j] + SIGMA + rho * col_sumsq[j]).max(1e-300)).collect()
    };
    let mut precond = make_diag(rho);

    let q_norm = inf_norm(&red.q);
    let mut rhs = vec![0.0; n];
    let mut x_tilde = vec![0.0; n];
    let mut z_hat = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut tmp_m = vec![0.0; m];
    let mut scratch_m = vec![0.0; m];
    let mut work_n = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut y_prev_check = y.clone();
    let mut cg_rel = 1e-6f64;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut infeasible_hits = 0usize;

    for k in 1..=cfg.max_iter {
        // x update: (P + sigma I + rho A'A) x~ = sigma x - q + A'(rho z - y)
        for i in 0..n {
            rhs[i] = SIGMA * x[i] - red.q[i];
        }
        for i in 0..m {
            tmp_m[i] = rho * z[i] - y[i];
        }
        red.a.matvec_transpose_add(&tmp_m, 1.0, &mut rhs);
        x_tilde.copy_from_slice(&x);
        cg_solve(
            |v, out| {
                red.p.matvec(v, out);
                for i in 0..n {
                    out[i] += SIGMA * v[i];
                }
                red.a.matvec(v, &mut scratch_m);
                red.a.matvec_transpose_add(&scratch_m, rho, out);
            },
            &rhs,
            &mut x_tilde,
            &precond,
            cg_rel,
            1e-15 * inf_norm(&rhs).max(1e-300),
            250,
        );

        red.a.matvec(&x_tilde, &mut z_hat);
        let mut disp2 = 0.0;
        if cfg.record_displacements {
            for i in 0..n {
                let dx = ALPHA * (x_tilde[i] - x[i]);
                disp2 += SIGMA * dx * dx;
            }
        }
        for i in 0..n {
            x[i] = ALPHA * x_tilde[i] + (1.0 - ALPHA) * x[i];
        }
        for i in 0..m {
            let v = ALPHA * z_hat[i] + (1.0 - ALPHA) * z[i];
            let w_old = z[i] + y[i] / rho;
            let z_new = (v + y[i] / rho).max(red.l[i]);
            let y_new = y[i] + rho * (v - z_new);
            if cfg.record_displacements {
                let dw = z_new + y_new / rho - w_old;
                disp2 += rho * dw * dw;
            }
            z[i] = z_new;
            y[i] = y_new;
        }
        if cfg.record_displacements {
            displacements.push((k, rho, disp2.sqrt()));
        }

        if k % CHECK_EVERY != 0 {
            continue;
        }

        red.a.matvec(&x, &mut ax);
        let mut r_prim = 0.0f64;
        let mut ax_norm = 0.0f64;
        let mut z_norm = 0.0f64;
        for i in 0..m {
            r_prim = r_prim.max((ax[i] - z[i]).abs());
            ax_norm = ax_norm.max(ax[i].abs());
            z_norm = z_norm.max(z[i].abs());
        }
        red.p.matvec(&x, &mut work_n);
        let px_norm = inf_norm(&work_n);
        for i in 0..n {
            work_n[i] += red.q[i];
        }
        aty.iter_mut().for_each(|v| *v = 0.0);
        red.a.matvec_transpose_add(&y, 1.0, &mut aty);
        let aty_norm = inf_norm(&aty);
        for i in 0..n {
            work_n[i] += aty[i];
        }
        let r_dual = inf_norm(&work_n);

        let eps_prim = cfg.eps_abs + cfg.eps_rel * ax_norm.max(z_norm);
        let eps_dual = cfg.eps_abs + cfg.eps_rel * px_norm.max(aty_norm).max(q_norm);

        let score = (r_prim / eps_prim).max(r_dual / eps_dual);
        if best.as_ref().map_or(true, |(s, _, _)| score < *s) {
            best = Some((score, x.clone(), y.clone()));
        }

        cg_rel = (0.05 * r_prim.min(r_dual)).clamp(1e-13, 1e-5);

        if r_prim <= eps_prim && r_dual <= eps_dual {
            return (x, y, k, QpStatus::Optimal);
        }

        // once the active set has stabilized, a polish step lands on the
        // exact solution long before the splitting residuals do
        if k % POLISH_EVERY == 0 {
            if let Some((xp, yp)) = polish(red, &x, &y) {
                let sc = kkt_score(red, &xp, &yp);
                if std::env::var_os("CONVEXLAB_QP_DEBUG").is_some() {
                    eprintln!("k={k} rho={rho:.2e} r_prim={r_prim:.2e} r_dual={r_dual:.2e} polish_score={sc:.2e}");
                }
                if sc <= 0.5 * cfg.eps_abs {
                    return (xp, yp, k, QpStatus::Optimal);
                }
            }
        }

        // primal infeasibility certificate from the dual direction
        for i in 0..m {
            tmp_m[i] = y[i] - y_prev_check[i];
        }
        y_prev_check.copy_from_slice(&y);
        let dy_norm = inf_norm(&tmp_m);
        if dy_norm > 1e-300 {
            let max_pos = tmp_m.iter().fold(f64::NEG_INFINITY, |mx, &v| mx.max(v));
            work_n.iter_mut().for_each(|v| *v = 0.0);
            red.a.matvec_transpose_add(&tmp_m, 1.0, &mut work_n);
            let l_dy: f64 = red.l.iter().zip(&tmp_m).map(|(l, v)| l * v).sum();
            if max_pos <= EPS_INFEASIBLE * dy_norm
                && inf_norm(&work_n) <= EPS_INFEASIBLE * dy_norm
                && l_dy <= -EPS_INFEASIBLE * dy_norm
            {
                infeasible_hits += 1;
                if infeasible_hits >= 2 {
                    return (x, y, k, QpStatus::Infeasible);
                }
            } else {
                infeasible_hits = 0;
            }
        }

        if k % RHO_ADAPT_EVERY == 0 {
            let prim_rel = r_prim / ax_norm.max(z_norm).max(1e-10);
            let dual_rel = r_dual / px_norm.max(aty_norm).max(q_norm).max(1e-10);
            let ratio = (prim_rel / dual_rel.max(1e-300)).sqrt();
            if ratio > 5.0 || ratio < 0.2 {
                rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
                precond = make_diag(rho);
            }
        }
    }

    if let Some((_, bx, by)) = best {
        (bx, by, cfg.max_iter, QpStatus::MaxIter)
    } else {
        (x, y, cfg.max_iter, QpStatus::MaxIter)
    }
}

/// Scaled-space KKT merit used to accept or reject the polish candidate.
fn kkt_score(red: &Reduced, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let m = y.len();
    let mut ax = vec![0.0; m];
    red.a.matvec(x, &mut ax);
    let mut prim = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..m {
        prim = prim.max(red.l[i] - ax[i]);
        comp = comp.max((y[i] * (ax[i] - red.l[i])).abs());
    }
    let mut grad = vec![0.0; n];
    red.p.matvec(x, &mut grad);
    for i in 0..n {
        grad[i] += red.q[i];
    }
    red.a.matvec_transpose_add(y, 1.0, &mut grad);
    prim.max(comp).max(inf_norm(&grad))
}

/// Polish front end: tries the multiplier-detected active set first, then a
/// residual-augmented one, and returns the best candidate by KKT score.
fn polish(red: &Reduced, x: &[f64], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = y.len();
    let mut ax = vec![0.0; m];
    red.a.matvec(x, &mut ax);
    let y_norm = y.iter().fold(0.0f64, |mx, &v| mx.max(v.abs()));
    let strict: Vec<usize> = (0..m).filter(|&i| y[i] < -1e-9 * y_norm.max(1e-30)).collect();
    let r_prim = (0..m).fold(0.0f64, |mx, i| mx.max(red.l[i] - ax[i]));
    let near = (10.0 * r_prim).max(1e-9);
    let loose: Vec<usize> =
        (0..m).filter(|&i| y[i] < -1e-9 * y_norm.max(1e-30) || ax[i] - red.l[i] <= near).collect();

    let mut best: Option<(f64, (Vec<f64>, Vec<f64>))> = None;
    for active in [&strict, &loose] {
        if let Some(cand) = polish_with(red, x, y, active) {
            let score = kkt_score(red, &cand.0, &cand.1);
            if best.as_ref().map_or(true, |(s, _)| score < *s) {
                best = Some((score, cand));
            }
        }
        if loose.len() == strict.len() {
            break; // identical sets
        }
    }
    best.map(|(_, cand)| cand)
}

/// Augmented-Lagrangian refinement on a fixed active set: a few exact
/// equality-KKT corrections, solved by CG.
fn polish_with(
    red: &Reduced,
    x: &[f64],
    y: &[f64],
    active: &[usize],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let m = y.len();
    if active.is_empty() {
        // unconstrained correction: P x = -q
        let mut xp = x.to_vec();
        let diag: Vec<f64> =
            red.p.diagonal().iter().map(|&d| if d.abs() > 1e-300 { d } else { 1.0 }).collect();
        let b: Vec<f64> = red.q.iter().map(|v| -v).collect();
        let out = cg_solve(
            |v, out| red.p.matvec(v, out),
            &b,
            &mut xp,
            &diag,
            1e-13,
            1e-15,
            4 * n.max(16),
        );
        return out.converged.then_some((xp, vec![0.0; m]));
    }

    let a_act = red.a.select_rows(active);
    let l_act: Vec<f64> = active.iter().map(|&i| red.l[i]).collect();
    let ma = active.len();
    let sigma = 1e-12;
    let scale = 1.0 + red.p.inf_norm();

    let base_diag = red.p.diagonal();
    let mut col_sumsq = vec![0.0; n];
    for i in 0..ma {
        let (cols, vals) = a_act.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            col_sumsq[j] += v * v;
        }
    }

    let mut nu: Vec<f64> = active.iter().map(|&i| (-y[i]).max(0.0)).collect();
    let mut xp = x.to_vec();
    let mut scratch = vec![0.0; ma];
    let mut av = vec![0.0; ma];
    // penalty continuation: cheap solves first, the last sweeps tighten
    for (step, rho_mul) in [1e2, 1e3, 1e4, 1e4, 1e4, 1e4, 1e4, 1e4].iter().enumerate() {
        let rho = rho_mul * scale;
        let diag: Vec<f64> = (0..n)
            .map(|j| (base_diag[j] + sigma + rho * col_sumsq[j]).max(1e-300))
            .collect();
        let mut rhs: Vec<f64> = red.q.iter().map(|v| -v).collect();
        for i in 0..ma {
            scratch[i] = nu[i] + rho * l_act[i];
        }
        a_act.matvec_transpose_add(&scratch, 1.0, &mut rhs);
        let out = cg_solve(
            |v, out| {
                red.p.matvec(v, out);
                for i in 0..n {
                    out[i] += sigma * v[i];
                }
                a_act.matvec(v, &mut av);
                a_act.matvec_transpose_add(&av, rho, out);
            },
            &rhs,
            &mut xp,
            &diag,
            1e-13,
            1e-15,
            1200,
        );
        if step == 0 && !out.converged && out.residual_norm > 1e-4 {
            return None;
        }
        a_act.matvec(&xp, &mut scratch);
        let mut worst = 0.0f64;
        for i in 0..ma {
            let r = scratch[i] - l_act[i];
            nu[i] += rho * (-r);
            worst = worst.max(r.abs());
        }
        if worst < 1e-14 && step >= 2 {
            break;
        }
    }
    let mut yp = vec![0.0; m];
    for (k, &i) in active.iter().enumerate() {
        yp[i] = -nu[k].max(0.0);
    }
    Some((xp, yp))
}

/// `H^1_0`-type constrained projection: minimizes
/// `int |grad u|^2 / 2 + f u` over the constraint cone with `u = g` on the
/// boundary dofs.
pub fn solve_projection_h10<F, G>(
    mesh: &Mesh,
    degree: Degree,
    constraints: Option<LinearConstraintSet>,
    f: F,
    g: G,
    cfg: &QpConfig,
) -> Result<QpSolution>
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64, f64) -> f64,
{
    let p = assemble_stiffness(mesh, degree);
    let q = assemble_load(mesh, degree, f);
    let mut pinned = BTreeMap::new();
    for d in boundary_dofs(mesh, degree) {
        let pos = dof_position(mesh, d);
        pinned.insert(d, g(pos.x, pos.y));
    }
    solve_qp(&QpProblem { p, q, constraints, pinned }, cfg)
}

/// Minimum `L^2` distance from `target` to the conformal-convex P1 cone.
///
/// The discrete objective is `(u - It)' M (u - It)` with `It` the P1
/// interpolant; the reported distance is the continuous `L^2` distance of
/// the minimizer to `target`, by quadrature (exact for quadratic targets).
pub fn min_l2_distance_convex<F>(
    mesh: &Mesh,
    target: F,
    cfg: &QpConfig,
) -> Result<(QpSolution, f64)>
where
    F: Fn(f64, f64) -> f64,
{
    let interp = FeFunction::interpolate(mesh, Degree::P1, &target);
    let mass = assemble_mass(mesh, Degree::P1);
    let mut q = vec![0.0; interp.dofs().len()];
    mass.matvec(interp.dofs(), &mut q);
    for v in q.iter_mut() {
        *v = -*v;
    }
    let cone = crate::constraints::conformal_convexity_constraints(mesh)?;
    let problem =
        QpProblem { p: mass, q, constraints: Some(cone), pinned: BTreeMap::new() };
    let sol = solve_qp(&problem, cfg)?;
    let u = FeFunction::new(mesh, Degree::P1, sol.u.clone())?;
    let distance = l2_distance(&u, &target);
    Ok((sol, distance))
}

/// Writes `P`, `q`, `A` and the pins as plain text (`<stem>_P.txt` in
/// coordinate form, `<stem>_q.txt` as `i value` lines, ...) for
/// cross-validation with external solvers.
pub fn export_qp<P: AsRef<Path>>(problem: &QpProblem, dir: P, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    let mut fp = std::fs::File::create(dir.join(format!("{stem}_P.txt")))?;
    problem.p.write_coordinate_text(&mut fp)?;
    let mut fq = std::fs::File::create(dir.join(format!("{stem}_q.txt")))?;
    for (i, v) in problem.q.iter().enumerate() {
        writeln!(fq, "{i} {v:.16e}")?;
    }
    if let Some(set) = &problem.constraints {
        let mut fa = std::fs::File::create(dir.join(format!("{stem}_A.txt")))?;
        set.matrix.write_coordinate_text(&mut fa)?;
    }
    let mut fpin = std::fs::File::create(dir.join(format!("{stem}_pins.txt")))?;
    for (d, v) in &problem.pinned {
        writeln!(fpin, "{d} {v:.16e}")?;
    }
    Ok(())
}
