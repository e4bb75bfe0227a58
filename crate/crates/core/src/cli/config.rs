//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Every key is optional and falls
//! back to the `gaussian-paper` preset. Unknown or repeated keys are errors.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::GraphKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Truncated Gaussians on an evenly spaced line.
    Gaussian,
    /// Digit images on a square pixel lattice.
    Images,
    /// Explicit weight vectors read from a CSV file.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    Fixed,
    Threshold,
}

/// How the optimal dual value behind `e*` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferencePolicy {
    /// Sum of regularized distances from the Bregman-projection barycenter.
    Ibp,
    /// Final dual value of a run ten times longer.
    Pilot,
    None,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    _ => Err(format!("unknown {} {s:?}", stringify!($ty))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text,)+ })
            }
        }
    };
}

keyword_enum!(ExperimentKind { Gaussian => "gaussian", Images => "images", Custom => "custom" });
keyword_enum!(StopRule { Fixed => "fixed", Threshold => "threshold" });
keyword_enum!(ReferencePolicy { Ibp => "ibp", Pilot => "pilot", None => "none" });

pub const PRESETS: [&str; 4] = ["gaussian-paper", "gaussian-desk", "mnist-paper", "mnist-desk"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub agents: usize,
    pub gamma: f64,
    pub graph: GraphKind,
    pub edge_prob: Option<f64>,
    /// Edge list file; replaces the generated graph when set.
    pub graph_file: Option<PathBuf>,
    pub seed: u64,
    pub stop: StopRule,
    /// Round count in fixed mode, round cap in threshold mode.
    pub rounds: usize,
    pub eps_optimality: f64,
    pub eps_consensus: f64,
    pub reference: ReferencePolicy,
    pub support_points: usize,
    pub support_min: f64,
    pub support_max: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// IDX image file. Without one, image runs draw synthetic digits.
    pub idx_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    /// One independent run per listed digit; empty means a single unlabeled run.
    pub digits: Vec<u8>,
    pub canvas: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub distributions_path: Option<PathBuf>,
    pub separable_kernel: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Gaussian,
            agents: 50,
            gamma: 0.1,
            graph: GraphKind::Star,
            edge_prob: None,
            graph_file: None,
            seed: 0,
            stop: StopRule::Threshold,
            rounds: 100_000,
            eps_optimality: 1e-8,
            eps_consensus: 1e-6,
            reference: ReferencePolicy::Ibp,
            support_points: 100,
            support_min: -5.0,
            support_max: 5.0,
            mu_min: -5.0,
            mu_max: 5.0,
            sigma_min: 0.1,
            sigma_max: 2.0,
            idx_path: None,
            labels_path: None,
            digits: Vec::new(),
            canvas: 56,
            scale_min: 0.5,
            scale_max: 2.0,
            distributions_path: None,
            separable_kernel: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e| config_err(line, format!("{key}: {e}")))
}

fn parse_bool(line: usize, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(line, format!("expected a boolean, got {raw:?}"))),
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentConfig::default();
        Ok(match name {
            "gaussian-paper" => base,
            "gaussian-desk" => ExperimentConfig {
                agents: 10,
                support_points: 20,
                graph: GraphKind::Complete,
                stop: StopRule::Fixed,
                rounds: 2000,
                ..base
            },
            "mnist-paper" => ExperimentConfig {
                experiment: ExperimentKind::Images,
                agents: 1000,
                gamma: 0.01,
                graph: GraphKind::ErdosRenyi,
                edge_prob: Some(0.004),
                stop: StopRule::Fixed,
                rounds: 300,
                reference: ReferencePolicy::None,
                idx_path: Some(PathBuf::from("train-images-idx3-ubyte")),
                labels_path: Some(PathBuf::from("train-labels-idx1-ubyte")),
                digits: (0..10).collect(),
                canvas: 56,
                separable_kernel: true,
                ..base
            },
            "mnist-desk" => ExperimentConfig {
                experiment: ExperimentKind::Images,
                agents: 50,
                gamma: 0.01,
                graph: GraphKind::ErdosRenyi,
                edge_prob: Some(0.08),
                stop: StopRule::Fixed,
                rounds: 300,
                reference: ReferencePolicy::None,
                canvas: 28,
                scale_min: 0.5,
                scale_max: 1.0,
                separable_kernel: true,
                ..base
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    /// Parses `text` on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = ExperimentConfig::default().apply(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides the fields named in `text`, leaving the rest as they are.
    pub fn apply(mut self, text: &str) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, val) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got {content:?}")))?;
            let (key, val) = (key.trim(), val.trim());
            if !seen.insert(key.to_string()) {
                return Err(config_err(line, format!("duplicate key {key:?}")));
            }
            self.set(line, key, val)?;
        }
        Ok(self)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "experiment" => self.experiment = value(line, key, v)?,
            "agents" => self.agents = value(line, key, v)?,
            "gamma" => self.gamma = value(line, key, v)?,
            "graph" => self.graph = value(line, key, v)?,
            "edge_prob" => {
                self.edge_prob = if v.is_empty() { None } else { Some(value(line, key, v)?) }
            }
            "graph_file" => self.graph_file = path(v),
            "seed" => self.seed = value(line, key, v)?,
            "stop" => self.stop = value(line, key, v)?,
            "rounds" => self.rounds = value(line, key, v)?,
            "eps_optimality" => self.eps_optimality = value(line, key, v)?,
            "eps_consensus" => self.eps_consensus = value(line, key, v)?,
            "reference" => self.reference = value(line, key, v)?,
            "support_points" => self.support_points = value(line, key, v)?,
            "support_min" => self.support_min = value(line, key, v)?,
            "support_max" => self.support_max = value(line, key, v)?,
            "mu_min" => self.mu_min = value(line, key, v)?,
            "mu_max" => self.mu_max = value(line, key, v)?,
            "sigma_min" => self.sigma_min = value(line, key, v)?,
            "sigma_max" => self.sigma_max = value(line, key, v)?,
            "idx_path" => self.idx_path = path(v),
            "labels_path" => self.labels_path = path(v),
            "digits" => {
                self.digits = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| value(line, key, s))
                    .collect::<Result<_>>()?
            }
            "canvas" => self.canvas = value(line, key, v)?,
            "scale_min" => self.scale_min = value(line, key, v)?,
            "scale_max" => self.scale_max = value(line, key, v)?,
            "distributions_path" => self.distributions_path = path(v),
            "separable_kernel" => self.separable_kernel = parse_bool(line, v)?,
            "output_dir" => {
                self.output_dir = path(v).ok_or_else(|| config_err(line, "output_dir is empty"))?
            }
            _ => return Err(config_err(line, format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let positive = [
            ("gamma", self.gamma),
            ("eps_optimality", self.eps_optimality),
            ("eps_consensus", self.eps_consensus),
            ("sigma_min", self.sigma_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveParameter(name));
            }
        }
        if self.agents == 0 {
            return Err(Error::NonPositiveParameter("agents"));
        }
        if self.rounds == 0 {
            return Err(Error::NonPositiveParameter("rounds"));
        }
        if self.stop == StopRule::Threshold && self.reference == ReferencePolicy::None {
            return bad("threshold stopping needs reference = ibp or pilot".into());
        }
        if let Some(p) = self.edge_prob {
            if self.graph != GraphKind::ErdosRenyi {
                return bad(format!("edge_prob is only meaningful for erdos_renyi, not {}", self.graph));
            }
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("edge_prob {p} outside (0, 1]"));
            }
        }
        match self.experiment {
            ExperimentKind::Gaussian => {
                if self.support_points < 2 {
                    return bad("support_points must be at least 2".into());
                }
                if !(self.support_min < self.support_max) {
                    return bad("support_min must be below support_max".into());
                }
                if !(self.mu_min <= self.mu_max && self.sigma_min <= self.sigma_max) {
                    return bad("empty mu or sigma range".into());
                }
            }
            ExperimentKind::Images => {
                if !(0.5 <= self.scale_min && self.scale_min <= self.scale_max && self.scale_max <= 2.0) {
                    return bad("scale range must lie in [0.5, 2]".into());
                }
                if self.canvas == 0 {
                    return Err(Error::NonPositiveParameter("canvas"));
                }
                if !self.digits.is_empty() && self.labels_path.is_none() {
                    return bad("digits need labels_path".into());
                }
                if let Some(d) = self.digits.iter().find(|&&d| d > 9) {
                    return bad(format!("digit {d} out of range"));
                }
            }
            ExperimentKind::Custom => {
                if self.distributions_path.is_none() {
                    return bad("custom experiments need distributions_path".into());
                }
                if !(self.support_min < self.support_max) {
                    return bad("support_min must be below support_max".into());
                }
            }
        }
        Ok(())
    }

    /// Full text form, every key present.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.write_problem_keys(&mut s);
        let _ = writeln!(s, "stop = {}", self.stop);
        let _ = writeln!(s, "eps_optimality = {}", self.eps_optimality);
        let _ = writeln!(s, "eps_consensus = {}", self.eps_consensus);
        let _ = writeln!(s, "reference = {}", self.reference);
        let _ = writeln!(s, "separable_kernel = {}", self.separable_kernel);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        s
    }

    /// The keys that determine the optimization problem itself.
    fn write_problem_keys(&self, s: &mut String) {
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "agents = {}", self.agents);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "graph = {}", self.graph);
        let _ = writeln!(s, "edge_prob = {}", self.edge_prob.map(|p| p.to_string()).unwrap_or_default());
        let _ = writeln!(s, "graph_file = {}", opt_path(&self.graph_file));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "rounds = {}", self.rounds);
        let _ = writeln!(s, "support_points = {}", self.support_points);
        let _ = writeln!(s, "support_min = {}", self.support_min);
        let _ = writeln!(s, "support_max = {}", self.support_max);
        let _ = writeln!(s, "mu_min = {}", self.mu_min);
        let _ = writeln!(s, "mu_max = {}", self.mu_max);
        let _ = writeln!(s, "sigma_min = {}", self.sigma_min);
        let _ = writeln!(s, "sigma_max = {}", self.sigma_max);
        let _ = writeln!(s, "idx_path = {}", opt_path(&self.idx_path));
        let _ = writeln!(s, "labels_path = {}", opt_path(&self.labels_path));
        let digits: Vec<String> = self.digits.iter().map(u8::to_string).collect();
        let _ = writeln!(s, "digits = {}", digits.join(","));
        let _ = writeln!(s, "canvas = {}", self.canvas);
        let _ = writeln!(s, "scale_min = {}", self.scale_min);
        let _ = writeln!(s, "scale_max = {}", self.scale_max);
        let _ = writeln!(s, "distributions_path = {}", opt_path(&self.distributions_path));
    }

    /// Text identifying the problem instance, used to key cached reference values.
    pub fn problem_fingerprint(&self) -> String {
        let mut s = String::new();
        self.write_problem_keys(&mut s);
        let _ = writeln!(s, "reference = {}", self.reference);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            ExperimentConfig::preset(name).unwrap().validate().unwrap();
        }
        let desk = ExperimentConfig::preset("gaussian-desk").unwrap();
        assert_eq!((desk.agents, desk.support_points, desk.gamma), (10, 20, 0.1));
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# header\nagents = 7   # trailing\n\ngraph = cycle\nstop = fixed\nreference = none\n",
        )
        .unwrap();
        assert_eq!(cfg.agents, 7);
        assert_eq!(cfg.graph, GraphKind::Cycle);
        assert_eq!(cfg.support_points, 100);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = |t: &str| match ExperimentConfig::parse(t) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(err("agents = 3\nbogus = 1\n"), 2);
        assert_eq!(err("agents = 3\nagents = 4\n"), 2);
        assert_eq!(err("\n\nagents 3\n"), 3);
        assert_eq!(err("gamma = fast\n"), 1);
        assert!(matches!(
            ExperimentConfig::parse("gamma = -1\n"),
            Err(Error::NonPositiveParameter("gamma"))
        ));
        assert!(ExperimentConfig::parse("stop = threshold\nreference = none\n").is_err());
        assert!(ExperimentConfig::parse("edge_prob = 0.3\n").is_err());
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        let kinds = prop_oneof![
            Just(GraphKind::Star),
            Just(GraphKind::Cycle),
            Just(GraphKind::Complete),
            Just(GraphKind::ErdosRenyi),
            Just(GraphKind::Path)
        ];
        (
            1usize..5000,
            1e-6f64..1e3,
            kinds,
            any::<u64>(),
            1usize..1_000_000,
            prop::collection::vec(0u8..10, 0..5),
            any::<bool>(),
            -1e3f64..1e3,
            prop::option::of("[a-z]{1,8}/[a-z]{1,8}"),
        )
            .prop_map(|(agents, gamma, graph, seed, rounds, digits, sep, lo, idx)| {
                ExperimentConfig {
                    agents,
                    gamma,
                    graph,
                    edge_prob: (graph == GraphKind::ErdosRenyi).then_some(gamma / 1e3),
                    seed,
                    rounds,
                    digits,
                    separable_kernel: sep,
                    support_min: lo,
                    idx_path: idx.map(PathBuf::from),
                    ..ExperimentConfig::default()
                }
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(cfg in arb_config()) {
            let back = ExperimentConfig::default().apply(&cfg.serialize()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
