use alloc::vec::Vec;

use rand::Rng as _;

use super::sinkhorn::{check_problem, entropic_plan, exp_plan, log_scaling};
use super::{GwInit, OtSolverConfig, StructuralCost, TransportPlan, WdSolver};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{rng_from, stream};

const SYMMETRY_TOL: f64 = 1e-12;

fn check_similarity(s: &Matrix, op: &'static str) -> Result<()> {
    if !s.is_square() {
        return Err(Error::precondition(
            op,
            alloc::format!("similarity must be square, got {:?}", s.shape()),
        ));
    }
    for i in 0..s.rows() {
        if (s[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
            return Err(Error::precondition(
                op,
                alloc::format!("diagonal entry {i} is {}, expected 1", s[(i, i)]),
            ));
        }
        for j in i + 1..s.rows() {
            if (s[(i, j)] - s[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::precondition(
                    op,
                    alloc::format!("similarity not symmetric at ({i}, {j})"),
                ));
            }
        }
    }
    Ok(())
}

/// Linearized structural cost `Ĉ_ij = Σ_{i',j'} L(sx_ii', sy_jj') T_i'j'`.
///
/// The absolute discrepancy is contracted explicitly in `O(n²m²)`; the
/// squared one uses `(a-b)² = a² + b² - 2ab` with the plan's own marginals.
pub fn gw_pseudo_cost(sx: &Matrix, sy: &Matrix, plan: &Matrix, kind: StructuralCost) -> Result<Matrix> {
    let (n, m) = plan.shape();
    if sx.rows() != n || sy.rows() != m {
        return Err(Error::Dimension {
            op: "gw_pseudo_cost",
            left: (sx.rows(), sy.rows()),
            right: plan.shape(),
        });
    }
    match kind {
        StructuralCost::Absolute => {
            let mut out = Matrix::zeros(n, m);
            // support of the plan, gathered once
            let support: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|i2| (0..m).map(move |j2| (i2, j2)))
                .map(|(i2, j2)| (i2, j2, plan[(i2, j2)]))
                .filter(|&(_, _, t)| t != 0.0)
                .collect();
            for i in 0..n {
                let sx_row = sx.row(i);
                for j in 0..m {
                    let sy_row = sy.row(j);
                    let mut acc = 0.0;
                    for &(i2, j2, t) in &support {
                        acc += (sx_row[i2] - sy_row[j2]).abs() * t;
                    }
                    out[(i, j)] = acc;
                }
            }
            Ok(out)
        }
        StructuralCost::Squared => {
            let r = plan.row_sums();
            let c = plan.col_sums();
            let fx: Vec<f64> = (0..n)
                .map(|i| sx.row(i).iter().zip(&r).map(|(s, w)| s * s * w).sum())
                .collect();
            let fy: Vec<f64> = (0..m)
                .map(|j| sy.row(j).iter().zip(&c).map(|(s, w)| s * s * w).sum())
                .collect();
            let cross = sx.matmul(plan)?.matmul_t(sy)?;
            Ok(Matrix::from_fn(n, m, |i, j| fx[i] + fy[j] - 2.0 * cross[(i, j)]))
        }
    }
}

/// `Σ_{i,j,i',j'} T_ij T_i'j' L(sx_ii', sy_jj')` for a fixed coupling.
pub fn gw_contraction(sx: &Matrix, sy: &Matrix, plan: &Matrix, kind: StructuralCost) -> Result<f64> {
    gw_pseudo_cost(sx, sy, plan, kind)?.frobenius_dot(plan)
}

fn initial_coupling(u: &[f64], v: &[f64], init: GwInit) -> Matrix {
    let product = Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j]);
    match init {
        GwInit::Uniform => product,
        GwInit::Jittered { seed } => {
            let mut rng = rng_from(seed, &[stream::GW_INIT]);
            let noisy = Matrix::from_fn(u.len(), v.len(), |i, j| {
                product[(i, j)] * (1.0 + 1e-3 * rng.random_range(-1.0..1.0))
            });
            let log_kernel = noisy.map(|p| if p > 0.0 { libm::log(p) } else { f64::NEG_INFINITY });
            exp_plan(&log_scaling(&log_kernel, u, v, 200, Some(1e-15), None).log_plan)
        }
    }
}

/// Gromov-Wasserstein between two similarity structures.
///
/// Alternates between forming the pseudo-cost from the current coupling and
/// solving an entropic transport step against it, `cfg.gw_outer_iter` times.
/// With [`WdSolver::Ipot`] each step is proximal (KL to the previous
/// coupling), which lets the coupling sharpen toward a vertex; with
/// Sinkhorn each step is a fresh entropic solve. The returned value is the
/// direct contraction of the final coupling.
pub fn solve_gwd(sx: &Matrix, sy: &Matrix, u: &[f64], v: &[f64], cfg: &OtSolverConfig) -> Result<(TransportPlan, f64)> {
    cfg.validate()?;
    check_similarity(sx, "solve_gwd")?;
    check_similarity(sy, "solve_gwd")?;
    let placeholder = Matrix::zeros(sx.rows(), sy.rows());
    check_problem(&placeholder, u, v, "solve_gwd")?;

    let mut coupling = initial_coupling(u, v, cfg.gw_init);
    let mut converged = true;
    let mut iterations = 0;
    for _ in 0..cfg.gw_outer_iter {
        let pseudo = gw_pseudo_cost(sx, sy, &coupling, cfg.gw_structural_cost)?;
        let plan = match cfg.wd_solver {
            WdSolver::EntropicSinkhorn => entropic_plan(&pseudo, None, u, v, cfg.epsilon, cfg.max_iter, cfg.tol)?,
            WdSolver::Ipot => {
                let log_ref = coupling.map(|p| if p > 0.0 { libm::log(p) } else { f64::NEG_INFINITY });
                entropic_plan(&pseudo, Some(&log_ref), u, v, cfg.epsilon, cfg.max_iter, cfg.tol)?
            }
        };
        converged = plan.converged;
        iterations += plan.iterations_used;
        coupling = plan.coupling;
    }
    let gwd = gw_contraction(sx, sy, &coupling, cfg.gw_structural_cost)?;
    Ok((
        TransportPlan {
            coupling,
            row_marginal: u.to_vec(),
            col_marginal: v.to_vec(),
            converged,
            iterations_used: iterations,
        },
        gwd,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{intra_similarity, uniform_weights};
    use crate::rng::standard_normal;

    fn random_similarity(n: usize, seed: u64) -> Matrix {
        let mut rng = rng_from(seed, &[]);
        let x = Matrix::from_fn(n, 3, |_, _| standard_normal(&mut rng));
        intra_similarity(&x).unwrap()
    }

    /// Brute-force four-index sum.
    fn direct(sx: &Matrix, sy: &Matrix, t: &Matrix, kind: StructuralCost) -> f64 {
        let (n, m) = t.shape();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..m {
                for i2 in 0..n {
                    for j2 in 0..m {
                        total += t[(i, j)] * t[(i2, j2)] * kind.eval(sx[(i, i2)], sy[(j, j2)]);
                    }
                }
            }
        }
        total
    }

    #[test]
    fn reported_value_matches_direct_contraction() {
        for (k, (n, m)) in [(3, 4), (5, 5), (2, 5), (4, 3)].into_iter().enumerate() {
            let sx = random_similarity(n, 10 + k as u64);
            let sy = random_similarity(m, 20 + k as u64);
            for kind in [StructuralCost::Absolute, StructuralCost::Squared] {
                let cfg = OtSolverConfig {
                    gw_structural_cost: kind,
                    ..OtSolverConfig::default()
                };
                let (plan, gwd) = solve_gwd(&sx, &sy, &uniform_weights(n), &uniform_weights(m), &cfg).unwrap();
                let oracle = direct(&sx, &sy, &plan.coupling, kind);
                assert!((gwd - oracle).abs() < 1e-10, "{gwd} vs {oracle}");
                assert!(plan.marginal_violation() < 1e-6);
            }
        }
    }

    #[test]
    fn squared_fast_path_matches_explicit_sum() {
        let sx = random_similarity(4, 1);
        let sy = random_similarity(3, 2);
        let t = Matrix::from_fn(4, 3, |i, j| 0.05 + 0.01 * (i * 3 + j) as f64);
        let fast = gw_contraction(&sx, &sy, &t, StructuralCost::Squared).unwrap();
        assert!((fast - direct(&sx, &sy, &t, StructuralCost::Squared)).abs() < 1e-12);
    }

    #[test]
    fn identical_graphs_reach_zero() {
        let cfg = OtSolverConfig {
            wd_solver: WdSolver::Ipot,
            ..OtSolverConfig::default()
        };
        for seed in 0..10 {
            let s = random_similarity(6, 100 + seed);
            let u = uniform_weights(6);
            let (_, gwd) = solve_gwd(&s, &s, &u, &u, &cfg).unwrap();
            assert!(gwd <= 1e-3, "seed {seed}: {gwd}");
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut s = Matrix::identity(3);
        s[(0, 1)] = 0.5;
        let u = uniform_weights(3);
        let err = solve_gwd(&s, &Matrix::identity(3), &u, &u, &OtSolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition { op: "solve_gwd", .. }));
        let mut d = Matrix::identity(3);
        d[(2, 2)] = 0.9;
        assert!(solve_gwd(&d, &Matrix::identity(3), &u, &u, &OtSolverConfig::default()).is_err());
    }

    #[test]
    fn jittered_init_is_feasible_and_seeded() {
        let u = uniform_weights(4);
        let v = uniform_weights(5);
        let a = initial_coupling(&u, &v, GwInit::Jittered { seed: 3 });
        let b = initial_coupling(&u, &v, GwInit::Jittered { seed: 3 });
        let c = initial_coupling(&u, &v, GwInit::Jittered { seed: 4 });
        assert_eq!(a, b);
        assert_ne!(a, c);
        let plan = TransportPlan {
            coupling: a,
            row_marginal: u,
            col_marginal: v,
            converged: true,
            iterations_used: 0,
        };
        assert!(plan.marginal_violation() < 1e-14);
    }
}
