use alloc::vec;
use alloc::vec::Vec;

use super::{validate_marginal, OtSolverConfig, TransportPlan, WdSolver};
use crate::error::{Error, Result};
use crate::matrix::{log_sum_exp, Matrix};

pub(crate) struct Scaled {
    pub log_plan: Matrix,
    pub b: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// First level of the warm-start path for the entropic solver; cosine costs
/// live in `[0, 2]`, so this is already a well-conditioned kernel.
const ANNEAL_START_EPS: f64 = 1.0;

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        libm::log(x)
    } else {
        f64::NEG_INFINITY
    }
}

/// Log-domain matrix scaling: finds potentials `a, b` with
/// `exp(a_i + K_ij + b_j)` matching `u` on rows and `v` on columns.
///
/// Each sweep updates `a` then `b`, so columns are exact after every sweep
/// and only the row residual is tested against `tol`. With `tol = None` the
/// loop always runs `sweeps` times. `warm_b` seeds the column potentials.
pub(crate) fn log_scaling(
    log_kernel: &Matrix,
    u: &[f64],
    v: &[f64],
    sweeps: usize,
    tol: Option<f64>,
    warm_b: Option<&[f64]>,
) -> Scaled {
    let (n, m) = log_kernel.shape();
    let log_u: Vec<f64> = u.iter().map(|&x| ln(x)).collect();
    let log_v: Vec<f64> = v.iter().map(|&x| ln(x)).collect();
    let mut a = vec![0.0; n];
    let mut b = match warm_b {
        Some(w) if w.iter().all(|x| x.is_finite()) => w.to_vec(),
        _ => vec![0.0; m],
    };
    let mut buf = vec![0.0; n.max(m)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..sweeps {
        iterations += 1;
        for i in 0..n {
            let row = log_kernel.row(i);
            for j in 0..m {
                buf[j] = row[j] + b[j];
            }
            let lse = log_sum_exp(&buf[..m]);
            a[i] = if lse.is_finite() {
                log_u[i] - lse
            } else {
                f64::NEG_INFINITY
            };
        }
        for j in 0..m {
            for i in 0..n {
                buf[i] = log_kernel[(i, j)] + a[i];
            }
            let lse = log_sum_exp(&buf[..n]);
            b[j] = if lse.is_finite() {
                log_v[j] - lse
            } else {
                f64::NEG_INFINITY
            };
        }
        if let Some(tol) = tol {
            let mut worst = 0.0f64;
            for i in 0..n {
                let row = log_kernel.row(i);
                let s: f64 = (0..m).map(|j| exp_or_zero(a[i] + row[j] + b[j])).sum();
                worst = worst.max((s - u[i]).abs());
            }
            if worst <= tol {
                converged = true;
                break;
            }
        }
    }

    let log_plan = Matrix::from_fn(n, m, |i, j| a[i] + log_kernel[(i, j)] + b[j]);
    Scaled {
        log_plan,
        b,
        converged,
        iterations,
    }
}

#[inline]
pub(crate) fn exp_or_zero(x: f64) -> f64 {
    if x == f64::NEG_INFINITY || x.is_nan() {
        0.0
    } else {
        libm::exp(x)
    }
}

pub(crate) fn exp_plan(log_plan: &Matrix) -> Matrix {
    log_plan.map(exp_or_zero)
}

/// Projects a nonnegative matrix onto the transport polytope of `(u, v)`:
/// rows are scaled down to at most `u`, columns to at most `v`, and the
/// remaining deficit is added back as a rank-one correction. The result has
/// exact marginals up to floating-point rounding and stays nonnegative.
pub fn round_to_marginals(plan: &Matrix, u: &[f64], v: &[f64]) -> Result<Matrix> {
    let (n, m) = plan.shape();
    if u.len() != n || v.len() != m {
        return Err(Error::Dimension {
            op: "round_to_marginals",
            left: plan.shape(),
            right: (u.len(), v.len()),
        });
    }
    let mut p = plan.map(|x| x.max(0.0));
    let rows = p.row_sums();
    for i in 0..n {
        if rows[i] > u[i] {
            let f = u[i] / rows[i];
            for x in p.row_mut(i) {
                *x *= f;
            }
        }
    }
    let cols = p.col_sums();
    for j in 0..m {
        if cols[j] > v[j] {
            let f = v[j] / cols[j];
            for i in 0..n {
                p[(i, j)] *= f;
            }
        }
    }
    let err_r: Vec<f64> = p.row_sums().iter().zip(u).map(|(s, t)| (t - s).max(0.0)).collect();
    let err_c: Vec<f64> = p.col_sums().iter().zip(v).map(|(s, t)| (t - s).max(0.0)).collect();
    let mass: f64 = err_r.iter().sum();
    if mass > 0.0 {
        for i in 0..n {
            for j in 0..m {
                p[(i, j)] += err_r[i] * err_c[j] / mass;
            }
        }
    }
    Ok(p)
}

pub(crate) fn check_problem(cost: &Matrix, u: &[f64], v: &[f64], op: &'static str) -> Result<()> {
    if cost.rows() != u.len() || cost.cols() != v.len() {
        return Err(Error::Dimension {
            op,
            left: cost.shape(),
            right: (u.len(), v.len()),
        });
    }
    if !cost.is_finite() {
        return Err(Error::precondition(op, "cost matrix must be finite"));
    }
    validate_marginal(u, op)?;
    validate_marginal(v, op)
}

/// Entropic solve `min <C,T> - ε H(T)` over the transport polytope,
/// optionally relative to a reference coupling (`log_ref`), in which case the
/// entropy term becomes a KL divergence to that reference.
pub(crate) fn entropic_plan(
    cost: &Matrix,
    log_ref: Option<&Matrix>,
    u: &[f64],
    v: &[f64],
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let inv = 1.0 / epsilon;
    let kernel = match log_ref {
        Some(r) => r.zip_map(cost, "entropic_plan", |l, c| l - c * inv)?,
        None => cost.scale(-inv),
    };
    let scaled = log_scaling(&kernel, u, v, max_iter, Some(tol), None);
    finish(exp_plan(&scaled.log_plan), u, v, scaled.converged, scaled.iterations)
}

/// Entropic solves along a decreasing regularization path `epsilons`, each
/// warm-started from the previous column potential (kept in cost units).
/// Returns the plan of the last level.
fn annealed(cost: &Matrix, u: &[f64], v: &[f64], epsilons: &[f64], max_iter: usize, tol: f64) -> Result<TransportPlan> {
    let mut dual_b: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut last = None;
    for &eps in epsilons {
        let kernel = cost.scale(-1.0 / eps);
        let warm: Option<Vec<f64>> = dual_b.as_ref().map(|g| g.iter().map(|x| x / eps).collect());
        let scaled = log_scaling(&kernel, u, v, max_iter, Some(tol), warm.as_deref());
        iterations += scaled.iterations;
        dual_b = Some(scaled.b.iter().map(|x| x * eps).collect());
        last = Some(scaled);
    }
    let scaled = last.ok_or_else(|| Error::precondition("annealed", "empty regularization path"))?;
    finish(exp_plan(&scaled.log_plan), u, v, scaled.converged, iterations)
}

/// Halving path from `start` (or `target`, whichever is larger) down to `target`.
fn halving_path(start: f64, target: f64) -> Vec<f64> {
    let mut path = Vec::new();
    let mut eps = start.max(target);
    while eps > target {
        path.push(eps);
        eps *= 0.5;
    }
    path.push(target);
    path
}

fn finish(raw: Matrix, u: &[f64], v: &[f64], converged: bool, iterations: usize) -> Result<TransportPlan> {
    let coupling = round_to_marginals(&raw, u, v)?;
    Ok(TransportPlan {
        coupling,
        row_marginal: u.to_vec(),
        col_marginal: v.to_vec(),
        converged,
        iterations_used: iterations,
    })
}

/// Proximal point iterations `T_k = argmin <C,T> + β_k KL(T | T_{k-1})`
/// starting from the product coupling, with step sizes `β_1 = ε` and
/// `β_k = ε_{k-1}` thereafter, where `1/ε_k = Σ_{i≤k} 1/β_i`. The effective
/// regularization halves every step, so the iterates approach the
/// unregularized optimum geometrically. Each step is an entropic solve at
/// `ε_k` warm-started from the previous duals.
fn ipot(cost: &Matrix, u: &[f64], v: &[f64], cfg: &OtSolverConfig) -> Result<TransportPlan> {
    let steps: Vec<f64> = (0..cfg.ipot_outer_iter)
        .map(|k| cfg.epsilon / libm::pow(2.0, k as f64))
        .collect();
    annealed(cost, u, v, &steps, cfg.max_iter, cfg.tol)
}

/// Solves the discrete Wasserstein problem for a cost matrix and marginals.
///
/// Returns the plan and `Σ T_ij C_ij` evaluated on it. The plan is rounded
/// onto the marginals after the iterations stop; `converged` records whether
/// the iterations themselves reached `cfg.tol`.
pub fn solve_wd(cost: &Matrix, u: &[f64], v: &[f64], cfg: &OtSolverConfig) -> Result<(TransportPlan, f64)> {
    cfg.validate()?;
    check_problem(cost, u, v, "solve_wd")?;
    let plan = match cfg.wd_solver {
        WdSolver::EntropicSinkhorn => annealed(
            cost,
            u,
            v,
            &halving_path(ANNEAL_START_EPS, cfg.epsilon),
            cfg.max_iter,
            cfg.tol,
        )?,
        WdSolver::Ipot => ipot(cost, u, v, cfg)?,
    };
    let wd = plan.coupling.frobenius_dot(cost)?;
    Ok((plan, wd))
}
