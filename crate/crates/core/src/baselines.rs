//! Centralized reference solvers used to check the distributed method.

use crate::distributions::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::ot::{log_sum_exp, sinkhorn_transport, CostKernel, Workspace};

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub barycenter: DiscreteDistribution,
    /// Largest 1-norm gap between a plan's free marginal and the barycenter.
    pub residual: f64,
    pub iterations: usize,
}

/// Entropic barycenter with uniform weights by iterative Bregman projections,
/// in log-domain scalings.
pub fn ibp_barycenter(
    q_list: &[DiscreteDistribution],
    kernel: &CostKernel,
    tol: f64,
    max_iter: usize,
) -> Result<OracleResult> {
    ibp_with(q_list, kernel, tol, max_iter, |_, _| {})
}

/// [`ibp_barycenter`] with a callback receiving `(sweep, log barycenter)` after every sweep.
pub fn ibp_with(
    q_list: &[DiscreteDistribution],
    kernel: &CostKernel,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<OracleResult> {
    let n = kernel.len();
    let m = q_list.len();
    if m == 0 {
        return Err(Error::Empty);
    }
    if let Some(q) = q_list.iter().find(|q| q.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositiveParameter("tol"));
    }
    let log_q: Vec<Vec<f64>> = q_list
        .iter()
        .map(|q| {
            q.weights()
                .iter()
                .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
                .collect()
        })
        .collect();
    let lambda = 1.0 / m as f64;
    let mut log_u = vec![vec![0.0; n]; m];
    let mut log_v = vec![vec![0.0; n]; m];
    let mut log_kv = vec![vec![0.0; n]; m];
    let mut log_p = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut ws = Workspace::default();
    let mut residual = f64::INFINITY;

    for it in 1..=max_iter {
        // Column projections onto q_i (K symmetric, so K^T u = K u).
        for i in 0..m {
            kernel.log_apply(&log_u[i], None, &mut buf, &mut ws);
            for j in 0..n {
                log_v[i][j] = log_q[i][j] - buf[j];
            }
            let (lv, lkv) = (&log_v[i], &mut log_kv[i]);
            kernel.log_apply(lv, None, lkv, &mut ws);
        }
        // Common row marginal: weighted geometric mean.
        for c in 0..n {
            log_p[c] = (0..m).map(|i| lambda * (log_u[i][c] + log_kv[i][c])).sum();
        }
        residual = 0.0f64;
        for i in 0..m {
            let gap: f64 = (0..n)
                .map(|c| ((log_u[i][c] + log_kv[i][c]).exp() - log_p[c].exp()).abs())
                .sum();
            residual = residual.max(gap);
        }
        for i in 0..m {
            for c in 0..n {
                log_u[i][c] = log_p[c] - log_kv[i][c];
            }
        }
        observe(it, &log_p);
        if residual <= tol {
            return Ok(OracleResult {
                barycenter: normalize_log(&log_p)?,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

pub(crate) fn normalize_log(log_p: &[f64]) -> Result<DiscreteDistribution> {
    let z = log_sum_exp(log_p);
    DiscreteDistribution::new(log_p.iter().map(|v| (v - z).exp()).collect())
}

/// Points of the simplex lattice `{a / r : a in N^n, sum a = r}`.
pub fn simplex_mesh(n: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in 0..=left {
            prefix.push(a);
            rec(n, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(n, resolution, &mut Vec::with_capacity(n), &mut raw);
    raw.into_iter()
        .map(|a| a.into_iter().map(|x| x as f64 / resolution as f64).collect())
        .collect()
}

/// Brute-force `max_p <y, p> - W_gamma(p, q)` over a simplex lattice, `n <= 3`.
pub fn grid_search_dual(
    q: &DiscreteDistribution,
    kernel: &CostKernel,
    y: &[f64],
    resolution: usize,
) -> Result<f64> {
    let n = kernel.len();
    if n > 3 {
        return Err(Error::DimensionTooLarge { size: n, cap: 3 });
    }
    if resolution < 10 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} below 10"
        )));
    }
    if q.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if q.len() != n { q.len() } else { y.len() },
        });
    }
    let mut best = f64::NEG_INFINITY;
    for p in simplex_mesh(n, resolution) {
        let lin: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
        let p = DiscreteDistribution::from_masses(p)?;
        let (_, w) = sinkhorn_transport(&p, q, kernel, 1e-13, 1_000_000)?;
        best = best.max(lin - w);
    }
    Ok(best)
}
