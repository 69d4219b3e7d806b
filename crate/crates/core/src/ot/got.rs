//! Combined node/edge matching objective and its gradient with respect to
//! the two feature sets, with both couplings held fixed.

use alloc::vec::Vec;

use super::cost::nonzero_norms;
use super::{
    cosine_cost_matrix, gw_contraction, intra_similarity, solve_gwd, solve_wd, uniform_weights, OtSolverConfig,
    StructuralCost, TransportPlan,
};
use crate::error::{Error, Result};
use crate::graph::threshold_similarity;
use crate::matrix::{dot, Matrix};

/// Which of the two distances `gamma` multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaConvention {
    /// `γ·WD + (1-γ)·GWD`
    GammaOnWd,
    /// `γ·GWD + (1-γ)·WD`
    GammaOnGwd,
}

impl GammaConvention {
    /// `(weight on WD, weight on GWD)`.
    pub fn weights(self, gamma: f64) -> (f64, f64) {
        match self {
            GammaConvention::GammaOnWd => (gamma, 1.0 - gamma),
            GammaConvention::GammaOnGwd => (1.0 - gamma, gamma),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GotConfig {
    pub gamma: f64,
    pub convention: GammaConvention,
    /// Edge threshold for the intra-modal similarity graphs; `None` feeds raw
    /// cosine similarities to the structural term.
    pub tau: Option<f64>,
}

impl Default for GotConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            convention: GammaConvention::GammaOnWd,
            tau: Some(crate::graph::DEFAULT_TAU),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::precondition(
            "got_loss",
            alloc::format!("gamma {gamma} outside [0, 1]"),
        ));
    }
    Ok(())
}

pub fn got_loss(wd: f64, gwd: f64, gamma: f64, convention: GammaConvention) -> Result<f64> {
    check_gamma(gamma)?;
    let (a, b) = convention.weights(gamma);
    Ok(a * wd + b * gwd)
}

fn structure(x: &Matrix, tau: Option<f64>) -> Result<Matrix> {
    let s = intra_similarity(x)?;
    Ok(match tau {
        Some(t) => threshold_similarity(&s, t),
        None => s,
    })
}

fn check_plans(x: &Matrix, y: &Matrix, plan_wd: &TransportPlan, plan_gw: &TransportPlan) -> Result<()> {
    if x.cols() != y.cols() {
        return Err(Error::Dimension {
            op: "got_grad_features",
            left: x.shape(),
            right: y.shape(),
        });
    }
    for p in [plan_wd, plan_gw] {
        if p.coupling.shape() != (x.rows(), y.rows()) {
            return Err(Error::Dimension {
                op: "got_grad_features",
                left: (x.rows(), y.rows()),
                right: p.coupling.shape(),
            });
        }
    }
    Ok(())
}

/// The objective evaluated on fixed couplings:
/// `w_wd Σ T_ij c(x_i,y_j) + w_gw Σ T̂_ij T̂_i'j' L(sx_ii', sy_jj')`.
pub fn got_objective(
    x: &Matrix,
    y: &Matrix,
    plan_wd: &TransportPlan,
    plan_gw: &TransportPlan,
    cfg: &GotConfig,
    kind: StructuralCost,
) -> Result<f64> {
    check_gamma(cfg.gamma)?;
    check_plans(x, y, plan_wd, plan_gw)?;
    let (w_wd, w_gw) = cfg.convention.weights(cfg.gamma);
    let wd = plan_wd.coupling.frobenius_dot(&cosine_cost_matrix(x, y)?)?;
    let gwd = gw_contraction(
        &structure(x, cfg.tau)?,
        &structure(y, cfg.tau)?,
        &plan_gw.coupling,
        kind,
    )?;
    Ok(w_wd * wd + w_gw * gwd)
}

/// `∂cos(a,b)/∂a = (b̂ - cos·â) / ‖a‖`, accumulated with weight `w` into `out`.
fn add_cos_grad(out: &mut [f64], a: &[f64], na: f64, b: &[f64], nb: f64, cos: f64, w: f64) {
    for k in 0..out.len() {
        out[k] += w * (b[k] / nb - cos * a[k] / na) / na;
    }
}

/// Chain rule from `∂L/∂S` (S the intra-similarity of `x`) back to `x`.
/// Entries removed by the threshold and the fixed diagonal carry no gradient.
fn similarity_backward(x: &Matrix, norms: &[f64], raw: &Matrix, g: &Matrix, tau: Option<f64>) -> Matrix {
    let n = x.rows();
    let mut out = Matrix::zeros(n, x.cols());
    for i in 0..n {
        for i2 in 0..n {
            if i == i2 {
                continue;
            }
            let s = raw[(i, i2)];
            if tau.is_some_and(|t| s < t) {
                continue;
            }
            let w = g[(i, i2)] + g[(i2, i)];
            if w == 0.0 {
                continue;
            }
            add_cos_grad(out.row_mut(i), x.row(i), norms[i], x.row(i2), norms[i2], s, w);
        }
    }
    out
}

/// Gradients of [`got_objective`] with respect to `x` and `y`, both
/// couplings treated as constants.
pub fn got_grad_features(
    x: &Matrix,
    y: &Matrix,
    plan_wd: &TransportPlan,
    plan_gw: &TransportPlan,
    cfg: &GotConfig,
    kind: StructuralCost,
) -> Result<(Matrix, Matrix)> {
    check_gamma(cfg.gamma)?;
    check_plans(x, y, plan_wd, plan_gw)?;
    let (w_wd, w_gw) = cfg.convention.weights(cfg.gamma);
    let (n, m) = (x.rows(), y.rows());
    let nx = nonzero_norms(x, "got_grad_features")?;
    let ny = nonzero_norms(y, "got_grad_features")?;
    let mut gx = Matrix::zeros(n, x.cols());
    let mut gy = Matrix::zeros(m, y.cols());

    // node term: d(1 - cos)/dx = -dcos/dx
    let t = &plan_wd.coupling;
    for i in 0..n {
        for j in 0..m {
            let w = -w_wd * t[(i, j)];
            if w == 0.0 {
                continue;
            }
            let cos = (dot(x.row(i), y.row(j)) / (nx[i] * ny[j])).clamp(-1.0, 1.0);
            add_cos_grad(gx.row_mut(i), x.row(i), nx[i], y.row(j), ny[j], cos, w);
            add_cos_grad(gy.row_mut(j), y.row(j), ny[j], x.row(i), nx[i], cos, w);
        }
    }

    // edge term
    if w_gw != 0.0 {
        let raw_x = intra_similarity(x)?;
        let raw_y = intra_similarity(y)?;
        let (sx, sy) = match cfg.tau {
            Some(tau) => (threshold_similarity(&raw_x, tau), threshold_similarity(&raw_y, tau)),
            None => (raw_x.clone(), raw_y.clone()),
        };
        let tg = &plan_gw.coupling;
        let support: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, tg[(i, j)]))
            .filter(|&(_, _, v)| v != 0.0)
            .collect();
        let mut dsx = Matrix::zeros(n, n);
        let mut dsy = Matrix::zeros(m, m);
        for &(i, j, a) in &support {
            for &(i2, j2, b) in &support {
                let d = w_gw * a * b * kind.deriv(sx[(i, i2)], sy[(j, j2)]);
                dsx[(i, i2)] += d;
                dsy[(j, j2)] -= d;
            }
        }
        gx.add_assign(&similarity_backward(x, &nx, &raw_x, &dsx, cfg.tau))?;
        gy.add_assign(&similarity_backward(y, &ny, &raw_y, &dsy, cfg.tau))?;
    }
    Ok((gx, gy))
}

/// Everything one alignment-loss evaluation produces.
#[derive(Clone, Debug)]
pub struct GotOutcome {
    pub wd: f64,
    pub gwd: f64,
    pub loss: f64,
    pub plan_wd: TransportPlan,
    pub plan_gw: TransportPlan,
    pub grad_x: Matrix,
    pub grad_y: Matrix,
    weights: (f64, f64),
}

impl GotOutcome {
    /// The two couplings mixed with the same weights as the distances.
    pub fn joint_plan(&self) -> TransportPlan {
        let (a, b) = self.weights;
        let mut coupling = self.plan_wd.coupling.scale(a);
        coupling.axpy(b, &self.plan_gw.coupling).expect("plans share a shape");
        TransportPlan {
            coupling,
            row_marginal: self.plan_wd.row_marginal.clone(),
            col_marginal: self.plan_wd.col_marginal.clone(),
            converged: self.plan_wd.converged && self.plan_gw.converged,
            iterations_used: self.plan_wd.iterations_used + self.plan_gw.iterations_used,
        }
    }
}

/// Solves both problems between uniformly weighted `x` and `y`, then
/// returns the distances, the combined loss and its detached-plan gradients.
pub fn got(x: &Matrix, y: &Matrix, cfg: &GotConfig, solver: &OtSolverConfig) -> Result<GotOutcome> {
    check_gamma(cfg.gamma)?;
    let u = uniform_weights(x.rows());
    let v = uniform_weights(y.rows());
    let cost = cosine_cost_matrix(x, y)?;
    let (plan_wd, wd) = solve_wd(&cost, &u, &v, solver)?;
    let sx = structure(x, cfg.tau)?;
    let sy = structure(y, cfg.tau)?;
    let (plan_gw, gwd) = solve_gwd(&sx, &sy, &u, &v, solver)?;
    let loss = got_loss(wd, gwd, cfg.gamma, cfg.convention)?;
    let (grad_x, grad_y) = got_grad_features(x, y, &plan_wd, &plan_gw, cfg, solver.gw_structural_cost)?;
    Ok(GotOutcome {
        wd,
        gwd,
        loss,
        plan_wd,
        plan_gw,
        grad_x,
        grad_y,
        weights: cfg.convention.weights(cfg.gamma),
    })
}
