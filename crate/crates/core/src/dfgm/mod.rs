//! Distributed fast gradient method for the dual of the consensus barycenter problem.
//!
//! Every agent keeps three dual sequences `y~`, `w~`, `z~` (the images under
//! `sqrt(W)` of the centralized accelerated iterates) and a running weighted sum of
//! its local primal points. Only the Laplacian row of the agent is needed, so a
//! round costs one gradient evaluation and one message per incident edge.

mod bounds;
mod centralized;

use std::collections::BTreeMap;

pub use bounds::{gamma_for_unregularized, iteration_bound, unregularized_iteration_bound};
pub use centralized::{centralized_fgm, CentralizedFgm, DENSE_CAP};

use crate::distributions::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::network::{laplacian, smoothness_constant, LaplacianRow, NetworkGraph};
use crate::ot::{dual_gradient, CostKernel};
use crate::simulator::{run_rounds, NoHook, RoundHook, RunTrace, Thresholds, TraceSettings};

/// `(tau_k, alpha_{k+1}) = (2/(k+2), (k+2)/(2L))`.
pub fn schedule(k: usize, lipschitz: f64) -> (f64, f64) {
    let kk = k as f64 + 2.0;
    (2.0 / kk, kk / (2.0 * lipschitz))
}

/// Step sizes of iteration `k` for smoothness `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub lipschitz: f64,
    pub k: usize,
}

impl StepSchedule {
    pub fn new(lipschitz: f64, k: usize) -> Result<Self> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(Error::NonPositiveParameter("L"));
        }
        Ok(StepSchedule { lipschitz, k })
    }

    pub fn tau(&self) -> f64 {
        schedule(self.k, self.lipschitz).0
    }

    pub fn alpha_next(&self) -> f64 {
        schedule(self.k, self.lipschitz).1
    }

    /// Weight `k + 2` of this iteration's primal point in the ergodic sum.
    pub fn ergodic_mass(&self) -> f64 {
        self.k as f64 + 2.0
    }
}

/// Local state of one agent.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub agent_id: usize,
    pub local_q: DiscreteDistribution,
    /// Last query point `y~_{k}` (zero before the first round).
    pub y_tilde: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub z_tilde: Vec<f64>,
    primal_sum: Vec<f64>,
    iterations: usize,
}

impl AgentState {
    pub fn new(agent_id: usize, local_q: DiscreteDistribution) -> Self {
        let n = local_q.len();
        AgentState {
            agent_id,
            local_q,
            y_tilde: vec![0.0; n],
            w_tilde: vec![0.0; n],
            z_tilde: vec![0.0; n],
            primal_sum: vec![0.0; n],
            iterations: 0,
        }
    }

    pub fn support_size(&self) -> usize {
        self.local_q.len()
    }

    /// Completed rounds.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `tau z~_k + (1 - tau) w~_k`, the point at which the local gradient is taken.
    pub fn query_point_into(&self, tau: f64, out: &mut [f64]) {
        for ((o, z), w) in out.iter_mut().zip(&self.z_tilde).zip(&self.w_tilde) {
            *o = tau * z + (1.0 - tau) * w;
        }
    }

    pub fn query_point(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.support_size()];
        self.query_point_into(tau, &mut out);
        out
    }

    /// Ergodic primal estimate after the completed rounds; `None` before the first round.
    pub fn ergodic_primal(&self) -> Option<Vec<f64>> {
        if self.iterations == 0 {
            return None;
        }
        let n = self.iterations as f64;
        let denom = n * (n + 3.0) / 2.0;
        Some(self.primal_sum.iter().map(|s| s / denom).collect())
    }

    pub fn ergodic_primal_into(&self, out: &mut [f64]) -> bool {
        if self.iterations == 0 {
            return false;
        }
        let n = self.iterations as f64;
        let denom = n * (n + 3.0) / 2.0;
        for (o, s) in out.iter_mut().zip(&self.primal_sum) {
            *o = s / denom;
        }
        true
    }
}

/// Applies one round to `state`: query point, Laplacian combination of the primal
/// points received from the neighbors, gradient and mirror steps, ergodic accumulation.
pub fn agent_round(
    state: &mut AgentState,
    neighbor_primal: &BTreeMap<usize, &[f64]>,
    own_primal: &[f64],
    lap_row: LaplacianRow<'_>,
    sched: StepSchedule,
) -> Result<()> {
    let n = state.support_size();
    if own_primal.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: own_primal.len(),
        });
    }
    if sched.k != state.iterations {
        return Err(Error::InvalidParameter(format!(
            "agent {} is at iteration {} but the schedule is at {}",
            state.agent_id, state.iterations, sched.k
        )));
    }
    if let Some(&from) = neighbor_primal
        .keys()
        .find(|j| lap_row.neighbors.binary_search(j).is_err())
    {
        return Err(Error::TopologyViolation {
            from,
            to: state.agent_id,
        });
    }
    let mut incoming = Vec::with_capacity(lap_row.neighbors.len());
    for &j in lap_row.neighbors {
        let v = *neighbor_primal
            .get(&j)
            .ok_or(Error::MissingNeighborMessage {
                agent: state.agent_id,
                neighbor: j,
            })?;
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        incoming.push(v);
    }

    let (tau, alpha) = schedule(sched.k, sched.lipschitz);
    let inv_l = 1.0 / sched.lipschitz;
    let mass = sched.ergodic_mass();
    for c in 0..n {
        let y = tau * state.z_tilde[c] + (1.0 - tau) * state.w_tilde[c];
        let mut g = 0.0;
        for v in &incoming {
            g += own_primal[c] - v[c];
        }
        state.y_tilde[c] = y;
        state.w_tilde[c] = y - inv_l * g;
        state.z_tilde[c] -= alpha * g;
        state.primal_sum[c] += mass * own_primal[c];
    }
    state.iterations += 1;
    Ok(())
}

/// Normalized ergodic weights `2(k+2) / (N(N+3))`, `k = 0..N`.
pub fn ergodic_weights(rounds: usize) -> Vec<f64> {
    let n = rounds as f64;
    let denom = n * (n + 3.0);
    (0..rounds).map(|k| 2.0 * (k as f64 + 2.0) / denom).collect()
}

/// Ergodic average of a primal history (one entry per round).
pub fn ergodic_average<V: AsRef<[f64]>>(history: &[V]) -> Result<DiscreteDistribution> {
    let first = history.first().ok_or(Error::Empty)?.as_ref();
    let mut out = vec![0.0; first.len()];
    for (w, p) in ergodic_weights(history.len()).iter().zip(history) {
        let p = p.as_ref();
        if p.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                got: p.len(),
            });
        }
        for (o, x) in out.iter_mut().zip(p) {
            *o += w * x;
        }
    }
    DiscreteDistribution::new(out)
}

/// Output of a run: per-agent ergodic primal points and final dual points `w~_N`.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub p_star: Vec<DiscreteDistribution>,
    pub y_star: Vec<Vec<f64>>,
    pub trace: RunTrace,
}

impl RunResult {
    pub fn rounds(&self) -> usize {
        self.trace.records.len()
    }

    /// `|y*_N|_2` over all agents.
    pub fn dual_radius(&self) -> f64 {
        self.y_star
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Fixed round count, or the cap in threshold mode.
    pub rounds: usize,
    /// Dual optimum used for the relative error column.
    pub reference_opt: Option<f64>,
    /// Stop once both thresholds hold (needs `reference_opt`).
    pub thresholds: Option<Thresholds>,
}

pub(crate) fn check_problem(
    q_list: &[DiscreteDistribution],
    graph: &NetworkGraph,
    kernel: &CostKernel,
) -> Result<()> {
    if q_list.len() != graph.node_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.node_count(),
            got: q_list.len(),
        });
    }
    if let Some(q) = q_list.iter().find(|q| q.len() != kernel.len()) {
        return Err(Error::DimensionMismatch {
            expected: kernel.len(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Runs `rounds` synchronous rounds with no reference value.
pub fn run(
    q_list: &[DiscreteDistribution],
    graph: &NetworkGraph,
    kernel: &CostKernel,
    rounds: usize,
) -> Result<RunResult> {
    run_with(
        q_list,
        graph,
        kernel,
        RunOptions {
            rounds,
            ..Default::default()
        },
        &mut NoHook,
    )
}

pub fn run_with(
    q_list: &[DiscreteDistribution],
    graph: &NetworkGraph,
    kernel: &CostKernel,
    opts: RunOptions,
    hook: &mut dyn RoundHook,
) -> Result<RunResult> {
    check_problem(q_list, graph, kernel)?;
    if opts.thresholds.is_some() && opts.reference_opt.is_none() {
        return Err(Error::InvalidParameter(
            "threshold stopping needs a reference optimum".into(),
        ));
    }
    let mut agents: Vec<AgentState> = q_list
        .iter()
        .enumerate()
        .map(|(i, q)| AgentState::new(i, q.clone()))
        .collect();
    let settings = TraceSettings {
        reference_opt: opts.reference_opt,
        thresholds: opts.thresholds,
    };
    let trace = run_rounds(graph, &mut agents, kernel, opts.rounds, &settings, hook)?;
    let p_star = agents
        .iter()
        .map(|a| match a.ergodic_primal() {
            Some(p) => DiscreteDistribution::new(p),
            None => dual_gradient(&a.w_tilde, &a.local_q, kernel),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        p_star,
        y_star: agents.into_iter().map(|a| a.w_tilde).collect(),
        trace,
    })
}

/// `L = d_max / gamma` for `graph`.
pub fn lipschitz_for(graph: &NetworkGraph, gamma: f64) -> Result<f64> {
    let lap = laplacian(graph);
    let l = smoothness_constant(&lap, gamma)?;
    // An isolated node has a zero Laplacian; any positive step leaves it at rest.
    Ok(if l > 0.0 { l } else { 1.0 / gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SupportGrid;
    use crate::network::{generate_graph, laplacian, GraphKind};

    #[test]
    fn schedule_examples() {
        assert_eq!(schedule(0, 10.0), (1.0, 0.1));
        let (t, a) = schedule(2, 10.0);
        assert_eq!(t, 0.5);
        assert!((a - 0.2).abs() < 1e-15);
        let taus: Vec<f64> = (0..50).map(|k| schedule(k, 3.0).0).collect();
        assert!(taus.windows(2).all(|w| w[1] < w[0]));
        let alphas: Vec<f64> = (0..50).map(|k| schedule(k, 3.0).1).collect();
        assert!(alphas.windows(2).all(|w| w[1] > w[0]));
        assert!(StepSchedule::new(0.0, 0).is_err());
    }

    #[test]
    fn ergodic_weight_examples() {
        assert_eq!(ergodic_weights(1), vec![1.0]);
        let w = ergodic_weights(3);
        let expect = [2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        for n in [1usize, 2, 10, 1000, 1_000_000] {
            let w = ergodic_weights(n);
            assert!(w.iter().all(|&x| x >= 0.0));
            // Neumaier summation, so the check measures the weights and not the adder.
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for &x in &w {
                let t = sum + x;
                comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
                sum = t;
            }
            assert!((sum + comp - 1.0).abs() <= 1e-14, "N = {n}");
        }
        let p = vec![0.1, 0.2, 0.7];
        let avg = ergodic_average(&vec![p.clone(); 7]).unwrap();
        for (a, b) in avg.weights().iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    fn small_kernel(n: usize) -> CostKernel {
        CostKernel::for_grid(&SupportGrid::linspace(0.0, 1.0, n).unwrap(), 0.2, false).unwrap()
    }

    #[test]
    fn isolated_agent_stays_at_zero() {
        let kernel = small_kernel(4);
        let q = DiscreteDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = generate_graph(GraphKind::Complete, 1, None, 0).unwrap();
        let res = run(&[q.clone()], &g, &kernel, 25).unwrap();
        assert!(res.y_star[0].iter().all(|&v| v == 0.0));
        let expect = dual_gradient(&[0.0; 4], &q, &kernel).unwrap();
        for (a, b) in res.p_star[0].weights().iter().zip(expect.weights()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn identical_inputs_are_a_fixed_point() {
        let kernel = small_kernel(5);
        let q = DiscreteDistribution::new(vec![0.3, 0.1, 0.2, 0.15, 0.25]).unwrap();
        let g = generate_graph(GraphKind::Complete, 4, None, 0).unwrap();
        let res = run(&vec![q; 4], &g, &kernel, 30).unwrap();
        assert!(res.y_star.iter().flatten().all(|&v| v == 0.0));
        assert!(res.trace.records.iter().all(|r| r.consensus_norm == 0.0));
    }

    #[test]
    fn agent_round_guards() {
        let g = generate_graph(GraphKind::Path, 3, None, 0).unwrap();
        let lap = laplacian(&g);
        let q = DiscreteDistribution::uniform(2).unwrap();
        let mut a = AgentState::new(1, q);
        let own = [0.5, 0.5];
        let sched = StepSchedule::new(2.0, 0).unwrap();
        let partial = BTreeMap::from([(0usize, &own[..])]);
        assert!(matches!(
            agent_round(&mut a, &partial, &own, lap.row(1), sched),
            Err(Error::MissingNeighborMessage { agent: 1, neighbor: 2 })
        ));
        let mut b = AgentState::new(0, DiscreteDistribution::uniform(2).unwrap());
        let rogue = BTreeMap::from([(1usize, &own[..]), (2usize, &own[..])]);
        assert!(matches!(
            agent_round(&mut b, &rogue, &own, lap.row(0), sched),
            Err(Error::TopologyViolation { from: 2, to: 0 })
        ));
        let full = BTreeMap::from([(0usize, &own[..]), (2usize, &own[..])]);
        agent_round(&mut a, &full, &own, lap.row(1), sched).unwrap();
        assert_eq!(a.iterations(), 1);
        assert!(agent_round(&mut a, &full, &own, lap.row(1), sched).is_err());
    }
}
