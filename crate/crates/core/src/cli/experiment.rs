use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind, ReferencePolicy, StopRule};
use super::idx::{load_idx, load_idx_labels};
use super::pgm::write_pgm;
use super::preprocess::{preprocess_image, random_placement, synthetic_seven};
use crate::baselines::ibp_barycenter;
use crate::dfgm::{run_with, RunOptions, RunResult};
use crate::distributions::{
    discretize_truncated_gaussian, image_to_distribution, DiscreteDistribution, SupportGrid,
};
use crate::error::{Error, Result};
use crate::network::{generate_graph, NetworkGraph};
use crate::ot::{regularized_distance, CostKernel};
use crate::simulator::{NoHook, Thresholds};

const REFERENCE_CACHE: &str = "reference.cache";
const IBP_TOL: f64 = 1e-12;
const DISTANCE_TOL: f64 = 1e-11;
const IBP_MAX_SWEEPS: usize = 2_000_000;

/// One barycenter problem: the agents' distributions on a shared support.
#[derive(Debug, Clone)]
pub struct Instance {
    /// Subdirectory name when a config expands into several runs.
    pub label: Option<String>,
    pub q_list: Vec<DiscreteDistribution>,
    pub grid: SupportGrid,
}

#[derive(Debug)]
pub struct RunReport {
    pub label: Option<String>,
    pub output_dir: PathBuf,
    pub result: RunResult,
    pub reference_opt: Option<f64>,
    pub wall_time: Duration,
}

/// Builds the problem instances described by `cfg`, without solving them.
pub fn build_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    match cfg.experiment {
        ExperimentKind::Gaussian => {
            let grid = SupportGrid::linspace(cfg.support_min, cfg.support_max, cfg.support_points)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let q_list = (0..cfg.agents)
                .map(|_| {
                    let mu = draw(&mut rng, cfg.mu_min, cfg.mu_max);
                    let sigma = draw(&mut rng, cfg.sigma_min, cfg.sigma_max);
                    discretize_truncated_gaussian(mu, sigma, &grid)
                })
                .collect::<Result<_>>()?;
            Ok(vec![Instance {
                label: None,
                q_list,
                grid,
            }])
        }
        ExperimentKind::Custom => {
            let path = cfg.distributions_path.as_ref().expect("validated");
            let q_list = parse_distribution_rows(&fs::read_to_string(path)?)?;
            if q_list.len() != cfg.agents {
                return Err(Error::DimensionMismatch {
                    expected: cfg.agents,
                    got: q_list.len(),
                });
            }
            let grid = SupportGrid::linspace(cfg.support_min, cfg.support_max, q_list[0].len())?;
            Ok(vec![Instance {
                label: None,
                q_list,
                grid,
            }])
        }
        ExperimentKind::Images => image_instances(cfg),
    }
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// One distribution per non-empty line, given as comma-separated masses.
pub fn parse_distribution_rows(text: &str) -> Result<Vec<DiscreteDistribution>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let masses = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(DiscreteDistribution::len) {
            if masses.len() != first {
                return Err(Error::DimensionMismatch {
                    expected: first,
                    got: masses.len(),
                });
            }
        }
        rows.push(DiscreteDistribution::from_masses(masses)?);
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    Ok(rows)
}

fn image_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let images: Vec<Array2<f64>> = match &cfg.idx_path {
        Some(p) => load_idx(p)?,
        None => (0..cfg.agents).map(|_| synthetic_seven(&mut rng)).collect(),
    };
    let groups: Vec<(Option<String>, Vec<usize>)> = if cfg.digits.is_empty() {
        vec![(None, (0..images.len()).collect())]
    } else {
        let labels = load_idx_labels(cfg.labels_path.as_ref().expect("validated"))?;
        if labels.len() != images.len() {
            return Err(Error::DimensionMismatch {
                expected: images.len(),
                got: labels.len(),
            });
        }
        cfg.digits
            .iter()
            .map(|&d| {
                let idx = (0..labels.len()).filter(|&i| labels[i] == d).collect();
                (Some(format!("digit{d}")), idx)
            })
            .collect()
    };
    groups
        .into_iter()
        .map(|(label, mut idx)| {
            if idx.len() < cfg.agents {
                return Err(Error::InvalidParameter(format!(
                    "{} images available for {}, {} agents requested",
                    idx.len(),
                    label.as_deref().unwrap_or("the run"),
                    cfg.agents
                )));
            }
            idx.shuffle(&mut rng);
            idx.truncate(cfg.agents);
            let q_list = idx
                .iter()
                .map(|&i| {
                    let img = &images[i];
                    let (scale, off) =
                        random_placement(&mut rng, img.dim(), (cfg.scale_min, cfg.scale_max), cfg.canvas)?;
                    let (dist, _) = image_to_distribution(&preprocess_image(img, scale, off, cfg.canvas)?)?;
                    Ok(dist)
                })
                .collect::<Result<_>>()?;
            Ok(Instance {
                label,
                q_list,
                grid: SupportGrid::unit_square(cfg.canvas, cfg.canvas)?,
            })
        })
        .collect()
}

pub fn build_graph(cfg: &ExperimentConfig) -> Result<NetworkGraph> {
    let graph = match &cfg.graph_file {
        Some(p) => NetworkGraph::parse_edge_list(&fs::read_to_string(p)?)?,
        None => generate_graph(cfg.graph, cfg.agents, cfg.edge_prob, cfg.seed)?,
    };
    if graph.node_count() != cfg.agents {
        return Err(Error::DimensionMismatch {
            expected: cfg.agents,
            got: graph.node_count(),
        });
    }
    Ok(graph)
}

/// Optimal dual value `-sum_i W_gamma(p, q_i)` at the Bregman-projection barycenter.
pub fn ibp_reference(q_list: &[DiscreteDistribution], kernel: &CostKernel) -> Result<f64> {
    let bary = ibp_barycenter(q_list, kernel, IBP_TOL, IBP_MAX_SWEEPS)?.barycenter;
    let mut total = 0.0;
    for q in q_list {
        total -= regularized_distance(&bary, q, kernel, DISTANCE_TOL)?;
    }
    Ok(total)
}

/// Smallest dual value seen over a run ten times longer than requested.
pub fn pilot_reference(
    q_list: &[DiscreteDistribution],
    graph: &NetworkGraph,
    kernel: &CostKernel,
    rounds: usize,
) -> Result<f64> {
    let opts = RunOptions {
        rounds: rounds.saturating_mul(10),
        ..RunOptions::default()
    };
    let res = run_with(q_list, graph, kernel, opts, &mut NoHook)?;
    Ok(res
        .trace
        .records
        .iter()
        .map(|r| r.dual_value)
        .fold(res.trace.summary.initial_dual, f64::min))
}

fn cache_key(cfg: &ExperimentConfig, label: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(cfg.problem_fingerprint());
    h.update(label.unwrap_or(""));
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn read_cache(path: &Path, key: &str) -> Option<f64> {
    fs::read_to_string(path)
        .ok()?
        .lines()
        .filter_map(|l| l.split_once(' '))
        .find(|(k, _)| *k == key)
        .and_then(|(_, v)| v.trim().parse().ok())
}

fn append_cache(path: &Path, key: &str, value: f64) -> Result<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{key} {value}")?;
    Ok(())
}

fn reference_for(
    cfg: &ExperimentConfig,
    inst: &Instance,
    graph: &NetworkGraph,
    kernel: &CostKernel,
) -> Result<Option<f64>> {
    if cfg.reference == ReferencePolicy::None {
        return Ok(None);
    }
    let cache = cfg.output_dir.join(REFERENCE_CACHE);
    let key = cache_key(cfg, inst.label.as_deref());
    if let Some(v) = read_cache(&cache, &key) {
        return Ok(Some(v));
    }
    let v = match cfg.reference {
        ReferencePolicy::Ibp => ibp_reference(&inst.q_list, kernel)?,
        ReferencePolicy::Pilot => pilot_reference(&inst.q_list, graph, kernel, cfg.rounds)?,
        ReferencePolicy::None => unreachable!(),
    };
    append_cache(&cache, &key, v)?;
    Ok(Some(v))
}

/// Solves every instance of `cfg` and writes `trace.csv`, the per-agent
/// barycenters and `summary.txt` for each one.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let graph = build_graph(cfg)?;
    let mut reports = Vec::new();
    for inst in build_instances(cfg)? {
        let kernel = CostKernel::for_grid(&inst.grid, cfg.gamma, cfg.separable_kernel)?;
        let reference_opt = reference_for(cfg, &inst, &graph, &kernel)?;
        let thresholds = (cfg.stop == StopRule::Threshold).then_some(Thresholds {
            optimality: cfg.eps_optimality,
            consensus: cfg.eps_consensus,
        });
        let opts = RunOptions {
            rounds: cfg.rounds,
            reference_opt,
            thresholds,
        };
        let started = Instant::now();
        let result = run_with(&inst.q_list, &graph, &kernel, opts, &mut NoHook)?;
        let wall_time = started.elapsed();
        let dir = match &inst.label {
            Some(l) => cfg.output_dir.join(l),
            None => cfg.output_dir.clone(),
        };
        fs::create_dir_all(&dir)?;
        let report = RunReport {
            label: inst.label.clone(),
            output_dir: dir,
            result,
            reference_opt,
            wall_time,
        };
        write_outputs(&report, &inst.grid)?;
        reports.push(report);
    }
    Ok(reports)
}

fn write_outputs(report: &RunReport, grid: &SupportGrid) -> Result<()> {
    let dir = &report.output_dir;
    let res = &report.result;
    res.trace.write_csv(&dir.join("trace.csv"))?;
    for (i, p) in res.p_star.iter().enumerate() {
        if grid.lattice_shape().is_some() {
            write_pgm(p, grid, dir.join(format!("barycenter_agent{i}.pgm")))?;
        } else {
            let mut s = String::from("x,weight\n");
            for (k, w) in p.weights().iter().enumerate() {
                let _ = writeln!(s, "{:e},{:e}", grid.point(k)[0], w);
            }
            fs::write(dir.join(format!("barycenter_agent{i}.csv")), s)?;
        }
    }
    fs::write(dir.join("summary.txt"), summary_text(report))?;
    Ok(())
}

pub fn summary_text(report: &RunReport) -> String {
    let res = &report.result;
    let last = res.trace.last();
    let opt = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:e}"));
    let mut s = String::new();
    let _ = writeln!(s, "rounds = {}", res.rounds());
    let _ = writeln!(s, "final_e_star = {}", opt(last.and_then(|r| r.e_star)));
    let _ = writeln!(s, "final_consensus_norm = {}", opt(last.map(|r| r.consensus_norm)));
    let _ = writeln!(s, "final_dual_value = {}", opt(last.map(|r| r.dual_value)));
    let _ = writeln!(s, "reference_opt = {}", opt(report.reference_opt));
    let _ = writeln!(s, "converged_at = {}", res.trace.summary.converged_at.map_or("none".into(), |r| r.to_string()));
    let _ = writeln!(s, "max_gradient_norm = {:e}", res.trace.summary.max_gradient_norm);
    let _ = writeln!(s, "dual_radius = {:e}", res.dual_radius());
    let _ = writeln!(s, "wall_time_s = {:.3}", report.wall_time.as_secs_f64());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_rows() {
        let rows = parse_distribution_rows("1,1,2\n\n# c\n0,0,5\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].weights(), &[0.25, 0.25, 0.5]);
        assert!(parse_distribution_rows("1,2\n1\n").is_err());
        assert!(parse_distribution_rows("1,x\n").is_err());
        assert!(parse_distribution_rows("\n").is_err());
    }

    #[test]
    fn gaussian_instances_are_seeded() {
        let cfg = ExperimentConfig::preset("gaussian-desk").unwrap();
        let a = build_instances(&cfg).unwrap();
        let b = build_instances(&cfg).unwrap();
        assert_eq!(a[0].q_list, b[0].q_list);
        assert_eq!(a[0].q_list.len(), 10);
        let other = build_instances(&ExperimentConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a[0].q_list, other[0].q_list);
    }

    #[test]
    fn cache_is_keyed_by_problem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(REFERENCE_CACHE);
        let cfg = ExperimentConfig::default();
        let k1 = cache_key(&cfg, None);
        let k2 = cache_key(&ExperimentConfig { seed: 9, ..cfg.clone() }, None);
        let k3 = cache_key(&ExperimentConfig { output_dir: "x".into(), ..cfg.clone() }, None);
        assert_ne!(k1, k2);
        assert_eq!(k1, k3);
        append_cache(&path, &k1, -1.25e-3).unwrap();
        append_cache(&path, &k2, 0.1 + 0.2).unwrap();
        assert_eq!(read_cache(&path, &k1), Some(-1.25e-3));
        assert_eq!(read_cache(&path, &k2), Some(0.1 + 0.2));
        assert_eq!(read_cache(&path, "missing"), None);
    }
}
