//! Entropy-regularized optimal transport in the log domain.
//!
//! The Gibbs kernel `K = exp(-M/gamma)` is only ever stored as `-M/gamma`; every
//! product with `K` is a log-sum-exp reduction, so costs of order 100 with
//! `gamma = 0.1` stay representable.

use ndarray::Array2;

use crate::distributions::{CostMatrix, DiscreteDistribution, SupportGrid};
use crate::error::{Error, Result};

pub const DEFAULT_SINKHORN_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Storage {
    Dense(Array2<f64>),
    /// Squared Euclidean cost on a `rows x cols` lattice factors as `K = K_r (x) K_c`.
    Separable { rows: Array2<f64>, cols: Array2<f64> },
}

/// Log-domain Gibbs kernel `log K = -M / gamma`.
#[derive(Debug, Clone)]
pub struct CostKernel {
    gamma: f64,
    n: usize,
    storage: Storage,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveGamma(gamma))
    }
}

pub fn build_kernel(cost: &CostMatrix, gamma: f64) -> Result<CostKernel> {
    check_gamma(gamma)?;
    let log_kernel = cost.entries().mapv(|c| -c / gamma);
    Ok(CostKernel {
        gamma,
        n: cost.len(),
        storage: Storage::Dense(log_kernel),
    })
}

impl CostKernel {
    /// Kernel for the squared Euclidean cost on a `rows x cols` lattice with the
    /// given spacing, stored as two 1-D factors.
    pub fn separable_lattice(rows: usize, cols: usize, spacing: f64, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        let factor = |len: usize| {
            Array2::from_shape_fn((len, len), |(a, b)| {
                let d = (a as f64 - b as f64) * spacing;
                -(d * d) / gamma
            })
        };
        Ok(CostKernel {
            gamma,
            n: rows * cols,
            storage: Storage::Separable {
                rows: factor(rows),
                cols: factor(cols),
            },
        })
    }

    /// Squared Euclidean kernel for `grid`; the separable form is used only when
    /// requested and the grid is a lattice.
    pub fn for_grid(grid: &SupportGrid, gamma: f64, separable: bool) -> Result<Self> {
        match (separable, grid.lattice_shape()) {
            (true, Some((r, c))) => {
                Self::separable_lattice(r, c, grid.lattice_spacing().unwrap_or(1.0), gamma)
            }
            (true, None) => Err(Error::NonRectangularGrid),
            (false, _) => build_kernel(&crate::distributions::euclidean_cost_matrix(grid), gamma),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.storage, Storage::Separable { .. })
    }

    pub fn log_kernel(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(k) => k[[i, j]],
            Storage::Separable { rows, cols } => {
                let w = cols.nrows();
                rows[[i / w, j / w]] + cols[[i % w, j % w]]
            }
        }
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        -self.gamma * self.log_kernel(i, j)
    }

    /// `out_i = log sum_j K_ij exp(v_j)` for every `i` (or only `i in rows` for the
    /// dense storage). Entries of `v` may be `-inf`.
    pub fn log_apply(&self, v: &[f64], rows: Option<&[usize]>, out: &mut [f64], ws: &mut Workspace) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        match &self.storage {
            Storage::Dense(k) => {
                ws.support.clear();
                ws.support
                    .extend((0..self.n).filter(|&j| v[j] > f64::NEG_INFINITY));
                let sparse = ws.support.len() * 4 < self.n * 3;
                let mut apply_row = |i: usize| {
                    let row = k.row(i);
                    let row = row.as_slice().expect("kernel rows are contiguous");
                    out[i] = if sparse {
                        lse_gather(row, v, &ws.support)
                    } else {
                        lse_pair(row, v)
                    };
                };
                match rows {
                    Some(rs) => rs.iter().for_each(|&i| apply_row(i)),
                    None => (0..self.n).for_each(apply_row),
                }
            }
            Storage::Separable { rows: kr, cols: kc } => {
                let h = kr.nrows();
                let w = kc.nrows();
                ws.tmp.resize(self.n, 0.0);
                ws.col.resize(h.max(w), 0.0);
                // tmp[r2, c1] = lse_c2 (logKc[c1, c2] + v[r2, c2])
                for r2 in 0..h {
                    let vr = &v[r2 * w..(r2 + 1) * w];
                    for c1 in 0..w {
                        let krow = kc.row(c1);
                        ws.tmp[r2 * w + c1] = lse_pair(krow.as_slice().unwrap(), vr);
                    }
                }
                // out[r1, c1] = lse_r2 (logKr[r1, r2] + tmp[r2, c1])
                for c1 in 0..w {
                    for r2 in 0..h {
                        ws.col[r2] = ws.tmp[r2 * w + c1];
                    }
                    for r1 in 0..h {
                        let krow = kr.row(r1);
                        out[r1 * w + c1] = lse_pair(krow.as_slice().unwrap(), &ws.col[..h]);
                    }
                }
            }
        }
    }
}

/// Scratch buffers for [`CostKernel::log_apply`].
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    support: Vec<usize>,
    tmp: Vec<f64>,
    col: Vec<f64>,
}

/// `log sum_j exp(a_j + b_j)`, `-inf` when every term is `-inf`.
pub fn lse_pair(a: &[f64], b: &[f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for (x, y) in a.iter().zip(b) {
        let s = x + y;
        if s > mx {
            mx = s;
        }
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x + y - mx).exp()).sum();
    mx + sum.ln()
}

fn lse_gather(a: &[f64], b: &[f64], idx: &[usize]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for &j in idx {
        let s = a[j] + b[j];
        if s > mx {
            mx = s;
        }
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let sum: f64 = idx.iter().map(|&j| (a[j] + b[j] - mx).exp()).sum();
    mx + sum.ln()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Dual oracle of `W_{gamma,q}` for one fixed `q`, reusing its buffers across calls.
#[derive(Debug, Clone)]
pub struct DualOracle<'k> {
    kernel: &'k CostKernel,
    q: DiscreteDistribution,
    log_q: Vec<f64>,
    support: Vec<usize>,
    entropy: f64,
    u: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    ws: Workspace,
}

impl<'k> DualOracle<'k> {
    pub fn new(kernel: &'k CostKernel, q: &DiscreteDistribution) -> Result<Self> {
        let n = kernel.len();
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.len(),
            });
        }
        let log_q = q
            .weights()
            .iter()
            .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(DualOracle {
            kernel,
            q: q.clone(),
            log_q,
            support: (0..n).filter(|&j| q.weights()[j] > 0.0).collect(),
            entropy: q.entropy(),
            u: vec![0.0; n],
            c: vec![f64::NEG_INFINITY; n],
            h: vec![0.0; n],
            ws: Workspace::default(),
        })
    }

    pub fn q(&self) -> &DiscreteDistribution {
        &self.q
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.kernel.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.len(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// `c_j = log (K alpha)_j` for `j` in the support of `q`.
    fn log_k_alpha(&mut self, y: &[f64]) {
        let g = self.kernel.gamma();
        for (u, &yi) in self.u.iter_mut().zip(y) {
            *u = yi / g;
        }
        self.kernel
            .log_apply(&self.u, Some(&self.support), &mut self.c, &mut self.ws);
    }

    /// `gamma (E(q) + <q, log K alpha>)` with `alpha = exp(y / gamma)`.
    pub fn value(&mut self, y: &[f64]) -> Result<f64> {
        self.check(y)?;
        self.log_k_alpha(y);
        let inner: f64 = self
            .support
            .iter()
            .map(|&j| self.q.weights()[j] * self.c[j])
            .sum();
        Ok(self.kernel.gamma() * (self.entropy + inner))
    }

    /// `alpha o (K (q / K alpha))`, renormalized onto the simplex.
    pub fn gradient_into(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check(y)?;
        if out.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: out.len(),
            });
        }
        self.log_k_alpha(y);
        self.h.iter_mut().for_each(|h| *h = f64::NEG_INFINITY);
        for &j in &self.support {
            self.h[j] = self.log_q[j] - self.c[j];
        }
        self.kernel.log_apply(&self.h, None, out, &mut self.ws);
        for (o, &u) in out.iter_mut().zip(&self.u) {
            *o += u;
        }
        let mx = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for o in out.iter_mut() {
            *o = (*o - mx).exp();
        }
        let total: f64 = out.iter().sum();
        for o in out.iter_mut() {
            *o /= total;
        }
        Ok(())
    }

    pub fn gradient(&mut self, y: &[f64]) -> Result<DiscreteDistribution> {
        let mut out = vec![0.0; y.len()];
        self.gradient_into(y, &mut out)?;
        DiscreteDistribution::new(out)
    }
}

/// Fenchel-Legendre dual `W*_{gamma,q}(y)`.
pub fn dual_value(y: &[f64], q: &DiscreteDistribution, kernel: &CostKernel) -> Result<f64> {
    DualOracle::new(kernel, q)?.value(y)
}

/// Gradient of [`dual_value`]; always a point of the simplex.
pub fn dual_gradient(
    y: &[f64],
    q: &DiscreteDistribution,
    kernel: &CostKernel,
) -> Result<DiscreteDistribution> {
    DualOracle::new(kernel, q)?.gradient(y)
}

/// Lipschitz constant `1/gamma` of a single dual gradient.
pub fn lipschitz_smoothness(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 / gamma)
}

/// Coupling with its prescribed marginals.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub plan: Array2<f64>,
    pub marginal_row: DiscreteDistribution,
    pub marginal_col: DiscreteDistribution,
}

impl TransportPlan {
    /// `max(|X 1 - p|_1, |X^T 1 - q|_1)`.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self
            .plan
            .rows()
            .into_iter()
            .zip(self.marginal_row.weights())
            .map(|(r, p)| (r.sum() - p).abs())
            .sum::<f64>();
        let cols = self
            .plan
            .columns()
            .into_iter()
            .zip(self.marginal_col.weights())
            .map(|(c, q)| (c.sum() - q).abs())
            .sum::<f64>();
        rows.max(cols)
    }
}

/// Solves the entropic transport problem between `p` and `q` by alternating
/// log-domain scalings; returns the plan and `<M, X> - gamma E(X)` at that plan.
pub fn sinkhorn_transport(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    kernel: &CostKernel,
    tol: f64,
    max_iter: usize,
) -> Result<(TransportPlan, f64)> {
    let n = kernel.len();
    for d in [p, q] {
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositiveParameter("tol"));
    }
    let log = |w: &f64| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
    let log_p: Vec<f64> = p.weights().iter().map(log).collect();
    let log_q: Vec<f64> = q.weights().iter().map(log).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut ws = Workspace::default();
    for it in 0..=max_iter {
        // Symmetric kernel: column sums of diag(e^f) K are row sums.
        kernel.log_apply(&f, None, &mut c, &mut ws);
        if it > 0 {
            let violation: f64 = c
                .iter()
                .zip(&g)
                .zip(q.weights())
                .map(|((ci, gi), qi)| {
                    let s = if *gi == f64::NEG_INFINITY { 0.0 } else { (ci + gi).exp() };
                    (s - qi).abs()
                })
                .sum();
            if violation <= tol {
                break;
            }
        }
        if it == max_iter {
            break;
        }
        for j in 0..n {
            g[j] = log_q[j] - c[j];
        }
        kernel.log_apply(&g, None, &mut r, &mut ws);
        for i in 0..n {
            f[i] = log_p[i] - r[i];
        }
    }
    let mut plan = Array2::zeros((n, n));
    let mut objective = 0.0;
    for i in 0..n {
        if f[i] == f64::NEG_INFINITY {
            continue;
        }
        for j in 0..n {
            if g[j] == f64::NEG_INFINITY {
                continue;
            }
            let x = (f[i] + g[j] + kernel.log_kernel(i, j)).exp();
            if x > 0.0 {
                plan[[i, j]] = x;
                objective += x * (kernel.cost(i, j) + kernel.gamma() * x.ln());
            }
        }
    }
    let tp = TransportPlan {
        plan,
        marginal_row: p.clone(),
        marginal_col: q.clone(),
    };
    // The loop tests the column sums it computed; the assembled plan adds rounding.
    let measured = tp.marginal_violation();
    if measured > tol.max(4.0 * n as f64 * f64::EPSILON) {
        return Err(Error::NoConvergence {
            iterations: max_iter,
            residual: measured,
        });
    }
    Ok((tp, objective))
}

/// `W_gamma(p, q)` via [`sinkhorn_transport`].
pub fn regularized_distance(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    kernel: &CostKernel,
    tol: f64,
) -> Result<f64> {
    sinkhorn_transport(p, q, kernel, tol, 1_000_000).map(|(_, v)| v)
}
