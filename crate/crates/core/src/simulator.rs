//! Synchronous lockstep message passing.
//!
//! Each round has three phases separated by barriers: every agent evaluates its
//! local dual gradient, every agent posts that primal point to each neighbor, and
//! every agent combines what it received. Posting to a non-neighbor is rejected.
//! Metrics are taken afterwards by an observer that sees all states but sends
//! nothing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::dfgm::{agent_round, lipschitz_for, AgentState, StepSchedule};
use crate::distributions::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::network::{consensus_norm, laplacian, NetworkGraph};
use crate::ot::{regularized_distance, CostKernel, DualOracle};

pub const CSV_HEADER: &str = "round,dual_value,e_star,consensus_norm,messages,scalars";

/// Primal point sent along one directed edge in one round.
#[derive(Debug, Clone)]
pub struct RoundMessage {
    pub from: usize,
    pub to: usize,
    pub round: usize,
    pub payload: Arc<Vec<f64>>,
}

/// Per-agent inboxes for one round; only graph edges are accepted.
#[derive(Debug)]
pub struct Exchange<'g> {
    graph: &'g NetworkGraph,
    inboxes: Vec<Vec<RoundMessage>>,
    messages: usize,
    scalars: usize,
}

impl<'g> Exchange<'g> {
    pub fn new(graph: &'g NetworkGraph) -> Self {
        Exchange {
            graph,
            inboxes: vec![Vec::new(); graph.node_count()],
            messages: 0,
            scalars: 0,
        }
    }

    pub fn post(&mut self, msg: RoundMessage) -> Result<()> {
        if !self.graph.has_edge(msg.from, msg.to) {
            return Err(Error::TopologyViolation {
                from: msg.from,
                to: msg.to,
            });
        }
        let sum: f64 = msg.payload.iter().sum();
        if !((sum - 1.0).abs() <= 1e-9) || msg.payload.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::NotNormalized { sum });
        }
        self.messages += 1;
        self.scalars += msg.payload.len();
        self.inboxes[msg.to].push(msg);
        Ok(())
    }

    pub fn take_inbox(&mut self, agent: usize) -> Vec<RoundMessage> {
        std::mem::take(&mut self.inboxes[agent])
    }

    /// `(messages, scalars)` posted since the last call.
    pub fn drain_counts(&mut self) -> (usize, usize) {
        let c = (self.messages, self.scalars);
        self.messages = 0;
        self.scalars = 0;
        c
    }
}

/// Called after the combine phase of every round with read-only access.
pub trait RoundHook {
    fn after_round(
        &mut self,
        _round: usize,
        _agents: &[AgentState],
        _primals: &[Arc<Vec<f64>>],
    ) -> Result<()> {
        Ok(())
    }
}

pub struct NoHook;

impl RoundHook for NoHook {}

impl<F> RoundHook for F
where
    F: FnMut(usize, &[AgentState], &[Arc<Vec<f64>>]),
{
    fn after_round(&mut self, round: usize, agents: &[AgentState], primals: &[Arc<Vec<f64>>]) -> Result<()> {
        self(round, agents, primals);
        Ok(())
    }
}

/// Stopping thresholds on the relative dual error and on the consensus norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub optimality: f64,
    pub consensus: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TraceSettings {
    pub reference_opt: Option<f64>,
    pub thresholds: Option<Thresholds>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub round: usize,
    /// Sum of the local duals at `w~` after the round.
    pub dual_value: f64,
    pub e_star: Option<f64>,
    /// Consensus norm of the ergodic primal points after the round.
    pub consensus_norm: f64,
    pub messages: usize,
    pub scalars: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TraceSummary {
    /// Dual value at the zero starting point.
    pub initial_dual: f64,
    pub reference_opt: Option<f64>,
    /// Largest `|p(y~_k)|_2` over all rounds (stacked over agents).
    pub max_gradient_norm: f64,
    /// First round at which both thresholds held.
    pub converged_at: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub summary: TraceSummary,
}

impl RunTrace {
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        RunTrace {
            records,
            summary: TraceSummary::default(),
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn first_round(&self, pred: impl Fn(&TraceRecord) -> bool) -> Option<usize> {
        self.records.iter().find(|r| pred(r)).map(|r| r.round)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let e = match r.e_star {
                Some(e) => format!("{e:e}"),
                None => "nan".to_string(),
            };
            let _ = writeln!(
                s,
                "{},{:e},{},{:e},{},{}",
                r.round, r.dual_value, e, r.consensus_norm, r.messages, r.scalars
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// `(value - opt) / (initial - opt)`.
pub fn relative_error(value: f64, reference_opt: f64, initial_val: f64) -> Result<f64> {
    let denom = initial_val - reference_opt;
    if !(denom.abs() >= 1e-15) {
        return Err(Error::DegenerateReference);
    }
    Ok((value - reference_opt) / denom)
}

/// Relative dual error of the stacked dual point `y_stacked`.
pub fn relative_dual_error(
    y_stacked: &[f64],
    q_list: &[DiscreteDistribution],
    kernel: &CostKernel,
    reference_opt: f64,
    initial_val: f64,
) -> Result<f64> {
    let value = stacked_dual_value(y_stacked, q_list, kernel)?;
    relative_error(value, reference_opt, initial_val)
}

/// `sum_i W*_{gamma, q_i}(y_i)` over the blocks of `y_stacked`.
pub fn stacked_dual_value(
    y_stacked: &[f64],
    q_list: &[DiscreteDistribution],
    kernel: &CostKernel,
) -> Result<f64> {
    let n = kernel.len();
    if y_stacked.len() != n * q_list.len() {
        return Err(Error::DimensionMismatch {
            expected: n * q_list.len(),
            got: y_stacked.len(),
        });
    }
    let mut total = 0.0;
    for (q, y) in q_list.iter().zip(y_stacked.chunks(n)) {
        total += DualOracle::new(kernel, q)?.value(y)?;
    }
    Ok(total)
}

/// Duality gap `sum_i W_gamma(p_i, q_i) + sum_i W*_{gamma, q_i}(y_i)` of a primal-dual
/// output pair. Each primal term needs a Sinkhorn solve at `tol`, so this is
/// meant for checking runs, not for per-round tracing.
pub fn duality_gap(
    p_star: &[DiscreteDistribution],
    y_star: &[Vec<f64>],
    q_list: &[DiscreteDistribution],
    kernel: &CostKernel,
    tol: f64,
) -> Result<f64> {
    if p_star.len() != q_list.len() {
        return Err(Error::DimensionMismatch {
            expected: q_list.len(),
            got: p_star.len(),
        });
    }
    let stacked: Vec<f64> = y_star.iter().flatten().copied().collect();
    let mut gap = stacked_dual_value(&stacked, q_list, kernel)?;
    for (p, q) in p_star.iter().zip(q_list) {
        gap += regularized_distance(p, q, kernel, tol)?;
    }
    Ok(gap)
}

/// Drives `rounds` synchronous rounds of the distributed method over `graph`.
/// In threshold mode the loop ends at the first round meeting both thresholds.
pub fn run_rounds(
    graph: &NetworkGraph,
    agents: &mut [AgentState],
    kernel: &CostKernel,
    rounds: usize,
    settings: &TraceSettings,
    hook: &mut dyn RoundHook,
) -> Result<RunTrace> {
    let m = graph.node_count();
    let n = kernel.len();
    if agents.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: agents.len(),
        });
    }
    for (i, a) in agents.iter().enumerate() {
        if a.agent_id != i {
            return Err(Error::InvalidParameter(format!(
                "agent at position {i} has id {}",
                a.agent_id
            )));
        }
        if a.support_size() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.support_size(),
            });
        }
    }
    let lap = laplacian(graph);
    let lipschitz = lipschitz_for(graph, kernel.gamma())?;
    let mut oracles = agents
        .iter()
        .map(|a| DualOracle::new(kernel, &a.local_q))
        .collect::<Result<Vec<_>>>()?;

    let mut initial_dual = 0.0;
    for (o, a) in oracles.iter_mut().zip(agents.iter()) {
        initial_dual += o.value(&a.w_tilde)?;
    }
    let mut summary = TraceSummary {
        initial_dual,
        reference_opt: settings.reference_opt,
        ..Default::default()
    };

    let mut exchange = Exchange::new(graph);
    let mut records = Vec::with_capacity(rounds);
    let mut query = vec![0.0; n];
    let mut ergodic = vec![0.0; m * n];
    let start = agents.first().map_or(0, AgentState::iterations);

    for round in 0..rounds {
        let sched = StepSchedule::new(lipschitz, start + round)?;

        // Gradient phase.
        let mut primals = Vec::with_capacity(m);
        for (a, o) in agents.iter().zip(oracles.iter_mut()) {
            a.query_point_into(sched.tau(), &mut query);
            let mut p = vec![0.0; n];
            o.gradient_into(&query, &mut p)?;
            primals.push(Arc::new(p));
        }
        let grad_norm = primals
            .iter()
            .flat_map(|p| p.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        summary.max_gradient_norm = summary.max_gradient_norm.max(grad_norm);

        // Exchange phase.
        for (i, p) in primals.iter().enumerate() {
            for &j in graph.neighbors(i) {
                exchange.post(RoundMessage {
                    from: i,
                    to: j,
                    round,
                    payload: Arc::clone(p),
                })?;
            }
        }
        let (messages, scalars) = exchange.drain_counts();

        // Combine phase.
        for (i, a) in agents.iter_mut().enumerate() {
            let inbox = exchange.take_inbox(i);
            let mut received: BTreeMap<usize, &[f64]> = BTreeMap::new();
            for msg in &inbox {
                if msg.round != round || received.insert(msg.from, &msg.payload).is_some() {
                    return Err(Error::InvalidParameter(format!(
                        "unexpected message from {} to {i} in round {round}",
                        msg.from
                    )));
                }
            }
            agent_round(a, &received, &primals[i], lap.row(i), sched)?;
        }

        // Observation phase.
        let mut dual_value = 0.0;
        for (o, a) in oracles.iter_mut().zip(agents.iter()) {
            dual_value += o.value(&a.w_tilde)?;
        }
        for (a, chunk) in agents.iter().zip(ergodic.chunks_mut(n)) {
            a.ergodic_primal_into(chunk);
        }
        let consensus = consensus_norm(&ergodic, &lap)?;
        // A start already at the optimum leaves e* undefined; the column then holds NaN.
        let e_star = match settings.reference_opt.map(|r| relative_error(dual_value, r, initial_dual)) {
            Some(Err(Error::DegenerateReference)) | None => None,
            Some(other) => Some(other?),
        };
        records.push(TraceRecord {
            round,
            dual_value,
            e_star,
            consensus_norm: consensus,
            messages,
            scalars,
        });
        hook.after_round(round, agents, &primals)?;

        if let Some(t) = settings.thresholds {
            let optimal = e_star.map_or(settings.reference_opt.is_some(), |e| e <= t.optimality);
            if optimal && consensus <= t.consensus {
                summary.converged_at = Some(round);
                break;
            }
        }
    }
    Ok(RunTrace { records, summary })
}
