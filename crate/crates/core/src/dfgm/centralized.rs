//! The accelerated method on the original dual variables, with an explicit
//! `sqrt(W)`. Not distributable (the square root is dense); it exists to check
//! that the distributed iterates are its image under `sqrt(W)`.

use nalgebra::DMatrix;

use super::{check_problem, lipschitz_for, schedule, RunResult};
use crate::distributions::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::network::{consensus_norm, laplacian, Laplacian, NetworkGraph};
use crate::ot::{CostKernel, DualOracle};
use crate::simulator::{RunTrace, TraceRecord};

/// Largest `m * n` accepted by the dense construction.
pub const DENSE_CAP: usize = 200;

/// Iterates `y^`, `w^`, `z^` of the centralized accelerated method, stacked `m * n`.
pub struct CentralizedFgm<'k> {
    sqrt_w: DMatrix<f64>,
    oracles: Vec<DualOracle<'k>>,
    lap: Laplacian,
    lipschitz: f64,
    m: usize,
    n: usize,
    k: usize,
    y_hat: Vec<f64>,
    w_hat: Vec<f64>,
    z_hat: Vec<f64>,
    primal: Vec<f64>,
    primal_sum: Vec<f64>,
}

impl<'k> CentralizedFgm<'k> {
    pub fn new(
        q_list: &[DiscreteDistribution],
        graph: &NetworkGraph,
        kernel: &'k CostKernel,
    ) -> Result<Self> {
        check_problem(q_list, graph, kernel)?;
        let m = graph.node_count();
        let n = kernel.len();
        if m * n > DENSE_CAP {
            return Err(Error::DimensionTooLarge {
                size: m * n,
                cap: DENSE_CAP,
            });
        }
        let lap = laplacian(graph);
        let dense = DMatrix::from_fn(m, m, |i, j| lap.matrix()[[i, j]]);
        let eig = dense.symmetric_eigen();
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt_w = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        let oracles = q_list
            .iter()
            .map(|q| DualOracle::new(kernel, q))
            .collect::<Result<Vec<_>>>()?;
        Ok(CentralizedFgm {
            sqrt_w,
            oracles,
            lipschitz: lipschitz_for(graph, kernel.gamma())?,
            lap,
            m,
            n,
            k: 0,
            y_hat: vec![0.0; m * n],
            w_hat: vec![0.0; m * n],
            z_hat: vec![0.0; m * n],
            primal: vec![0.0; m * n],
            primal_sum: vec![0.0; m * n],
        })
    }

    /// `(sqrt(L) (x) I_n) v`.
    pub fn lift(&self, v: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..m {
                let s = self.sqrt_w[(i, j)];
                if s == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out[i * n + c] += s * v[j * n + c];
                }
            }
        }
        out
    }

    pub fn iterations(&self) -> usize {
        self.k
    }

    pub fn y_hat(&self) -> &[f64] {
        &self.y_hat
    }

    pub fn w_hat(&self) -> &[f64] {
        &self.w_hat
    }

    pub fn z_hat(&self) -> &[f64] {
        &self.z_hat
    }

    /// Stacked primal points `p*(sqrt(W) y^_{k})` of the last step.
    pub fn primal(&self) -> &[f64] {
        &self.primal
    }

    pub fn step(&mut self) -> Result<()> {
        let (tau, alpha) = schedule(self.k, self.lipschitz);
        for c in 0..self.m * self.n {
            self.y_hat[c] = tau * self.z_hat[c] + (1.0 - tau) * self.w_hat[c];
        }
        let y_tilde = self.lift(&self.y_hat);
        let n = self.n;
        for (i, oracle) in self.oracles.iter_mut().enumerate() {
            oracle.gradient_into(&y_tilde[i * n..(i + 1) * n], &mut self.primal[i * n..(i + 1) * n])?;
        }
        let grad = self.lift(&self.primal);
        let mass = self.k as f64 + 2.0;
        for c in 0..self.m * n {
            self.w_hat[c] = self.y_hat[c] - grad[c] / self.lipschitz;
            self.z_hat[c] -= alpha * grad[c];
            self.primal_sum[c] += mass * self.primal[c];
        }
        self.k += 1;
        Ok(())
    }

    /// Dual objective at `sqrt(W) w^`.
    pub fn dual_value(&mut self) -> Result<f64> {
        let w_tilde = self.lift(&self.w_hat);
        let n = self.n;
        let mut total = 0.0;
        for (i, oracle) in self.oracles.iter_mut().enumerate() {
            total += oracle.value(&w_tilde[i * n..(i + 1) * n])?;
        }
        Ok(total)
    }

    fn ergodic(&self) -> Option<Vec<f64>> {
        (self.k > 0).then(|| {
            let k = self.k as f64;
            let denom = k * (k + 3.0) / 2.0;
            self.primal_sum.iter().map(|s| s / denom).collect()
        })
    }

    pub fn into_result(mut self, trace: RunTrace) -> Result<RunResult> {
        let n = self.n;
        let p_stacked = match self.ergodic() {
            Some(p) => p,
            None => {
                let zeros = vec![0.0; n];
                let mut out = vec![0.0; self.m * n];
                for (i, o) in self.oracles.iter_mut().enumerate() {
                    o.gradient_into(&zeros, &mut out[i * n..(i + 1) * n])?;
                }
                out
            }
        };
        let w_tilde = self.lift(&self.w_hat);
        Ok(RunResult {
            p_star: p_stacked
                .chunks(n)
                .map(|c| DiscreteDistribution::new(c.to_vec()))
                .collect::<Result<_>>()?,
            y_star: w_tilde.chunks(n).map(<[f64]>::to_vec).collect(),
            trace,
        })
    }
}

/// Runs the centralized method for `rounds` steps. `y_star` holds `sqrt(W) w^_N`, in
/// the same coordinates as the distributed run.
pub fn centralized_fgm(
    q_list: &[DiscreteDistribution],
    graph: &NetworkGraph,
    kernel: &CostKernel,
    rounds: usize,
) -> Result<RunResult> {
    let mut fgm = CentralizedFgm::new(q_list, graph, kernel)?;
    let mut records = Vec::with_capacity(rounds);
    for round in 0..rounds {
        fgm.step()?;
        let p = fgm.ergodic().expect("at least one step");
        records.push(TraceRecord {
            round,
            dual_value: fgm.dual_value()?,
            e_star: None,
            consensus_norm: consensus_norm(&p, &fgm.lap)?,
            messages: 0,
            scalars: 0,
        });
    }
    fgm.into_result(RunTrace::from_records(records))
}
