//! Experiment configuration: strict JSON parsing, dotted-path overrides and
//! whole-file validation.

use std::path::{Path, PathBuf};

use qumode::qaoa::{Graph, NdarConfig, QaoaAngles};
use qumode::reservoir::{ReservoirConfig, Task};
use qumode::sqed::LatticeSpec;
use qumode::synth::OptimizerConfig;
use qumode::{DENSE_LIMIT, STATE_LIMIT};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workload {
    Sqed,
    Qaoa,
    Reservoir,
    Synth,
}

impl Workload {
    pub fn name(self) -> &'static str {
        match self {
            Workload::Sqed => "sqed",
            Workload::Qaoa => "qaoa",
            Workload::Reservoir => "reservoir",
            Workload::Synth => "synth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub workload: Workload,
    pub seed: u64,
    /// Free-text description; not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sqed: Option<SqedSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qaoa: Option<QaoaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reservoir: Option<ReservoirSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqedSection {
    pub lattice: LatticeSpec,
    /// Per-site level indices of the initial product state; defaults to
    /// the `m = 0` level for symmetric labeling, level 0 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<usize>>,
    pub t_max: f64,
    pub samples: usize,
}

impl SqedSection {
    pub fn initial_levels(&self) -> Vec<usize> {
        self.initial.clone().unwrap_or_else(|| {
            let level = match self.lattice.labeling {
                qumode::hilbert::Labeling::Symmetric => self.lattice.d / 2,
                qumode::hilbert::Labeling::Fock => 0,
            };
            vec![level; self.lattice.num_sites()]
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Edges {
        nodes: usize,
        edges: Vec<(usize, usize)>,
    },
    /// Edge-list file, relative to the config file's directory.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
    },
    /// Random graph with a planted proper `k`-coloring.
    Planted {
        nodes: usize,
        k: usize,
        p: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaSection {
    pub graph: GraphSource,
    pub colors: usize,
    pub depth: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Fixed angles; optimized when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<QaoaAngles>,
    pub ndar: NdarConfig,
    #[serde(default = "yes")]
    pub brute_force: bool,
}

fn default_restarts() -> usize {
    4
}

fn yes() -> bool {
    true
}

fn default_train_fraction() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    pub model: ReservoirConfig,
    pub task: Task,
    /// Input series length, washout included.
    pub length: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Emulate finite sampling of the features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthTarget {
    Csum {
        d: usize,
    },
    Quditx {
        d: usize,
    },
    Snap {
        phases: Vec<f64>,
    },
    /// CSV of real/imaginary parts, relative to the config file.
    MatrixFile {
        path: PathBuf,
        dims: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub target: SynthTarget,
    /// Workspace levels per mode.
    pub workspace: Vec<usize>,
    pub layout: String,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Also write the synthesized workspace unitary as CSV.
    #[serde(default)]
    pub matrix_out: bool,
}

impl SynthTarget {
    pub fn dims(&self) -> Vec<usize> {
        match self {
            SynthTarget::Csum { d } => vec![*d, *d],
            SynthTarget::Quditx { d } => vec![*d],
            SynthTarget::Snap { phases } => vec![phases.len()],
            SynthTarget::MatrixFile { dims, .. } => dims.clone(),
        }
    }
}

/// Apply `key.path=value` overrides to a JSON document. The value is read
/// as JSON when it parses, otherwise as a string. Missing intermediate
/// objects are created (and then rejected by strict parsing if unknown).
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<(), String> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| format!("override `{item}` is not of the form key=value"))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(format!("override key `{key}` has an empty segment"));
        }
        let mut cur = &mut *doc;
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            cur = match cur {
                Value::Object(map) => {
                    if last {
                        map.insert(part.to_string(), value.clone());
                        break;
                    }
                    map.entry(part.to_string())
                        .or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(items) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| format!("override `{key}`: `{part}` indexes an array"))?;
                    let len = items.len();
                    let slot = items
                        .get_mut(idx)
                        .ok_or_else(|| format!("override `{key}`: index {idx} out of range ({len})"))?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => return Err(format!("override `{key}`: `{part}` is not inside an object")),
            };
        }
    }
    Ok(())
}

/// Parse strictly, collecting every unknown key before giving up. Each
/// unknown key is reported with its dotted path and then removed so that
/// parsing can continue; any other schema error ends the scan.
pub fn parse_collecting(doc: &Value) -> (Option<ExperimentConfig>, Vec<String>) {
    let mut doc = doc.clone();
    let mut problems = Vec::new();
    loop {
        let result: Result<ExperimentConfig, _> = serde_path_to_error::deserialize(&doc);
        match result {
            Ok(cfg) => return (Some(cfg), problems),
            Err(err) => {
                let path = err.path().to_string();
                let message = err.inner().to_string();
                if let Some(name) = unknown_field_name(&message) {
                    let parent = parent_path(&path, &name);
                    let shown = if parent.is_empty() {
                        name.clone()
                    } else {
                        format!("{parent}.{name}")
                    };
                    problems.push(format!("unknown key `{shown}`"));
                    if remove_key(&mut doc, &parent, &name) {
                        continue;
                    }
                    return (None, problems);
                }
                let at = if path == "." {
                    String::new()
                } else {
                    format!(" at `{path}`")
                };
                problems.push(format!("schema error{at}: {message}"));
                return (None, problems);
            }
        }
    }
}

fn unknown_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// The error path may or may not end with the offending key itself.
fn parent_path(path: &str, name: &str) -> String {
    if path == "." {
        return String::new();
    }
    match path.rsplit_once('.') {
        Some((head, last)) if last == name => head.to_string(),
        None if path == name => String::new(),
        _ => path.to_string(),
    }
}

fn remove_key(doc: &mut Value, parent: &str, name: &str) -> bool {
    let mut cur = doc;
    if !parent.is_empty() {
        for seg in parent.split('.') {
            cur = match cur {
                Value::Object(map) => match map.get_mut(seg) {
                    Some(v) => v,
                    None => return false,
                },
                Value::Array(items) => match seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)) {
                    Some(v) => v,
                    None => return false,
                },
                _ => return false,
            };
        }
    }
    match cur {
        Value::Object(map) => map.remove(name).is_some(),
        _ => false,
    }
}

/// Semantic checks on a schema-valid config; every violation is listed.
pub fn violations(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    let present = [
        (Workload::Sqed, cfg.sqed.is_some()),
        (Workload::Qaoa, cfg.qaoa.is_some()),
        (Workload::Reservoir, cfg.reservoir.is_some()),
        (Workload::Synth, cfg.synth.is_some()),
    ];
    for (w, has) in present {
        if w == cfg.workload && !has {
            v.push(format!("workload `{}` needs a `{}` section", w.name(), w.name()));
        }
        if w != cfg.workload && has {
            v.push(format!(
                "section `{}` does not match workload `{}`",
                w.name(),
                cfg.workload.name()
            ));
        }
    }
    if let Some(s) = &cfg.sqed {
        v.extend(s.lattice.violations().into_iter().map(|m| format!("sqed.lattice: {m}")));
        if !(s.t_max > 0.0 && s.t_max.is_finite()) {
            v.push(format!("sqed.t_max = {} must be > 0", s.t_max));
        }
        if s.samples < 4 {
            v.push(format!("sqed.samples = {} must be ≥ 4", s.samples));
        }
        let sites = s.lattice.num_sites();
        if let Some(init) = &s.initial {
            if init.len() != sites {
                v.push(format!("sqed.initial has {} entries for {sites} sites", init.len()));
            }
            if init.iter().any(|&k| k >= s.lattice.d) {
                v.push(format!("sqed.initial levels must be < d = {}", s.lattice.d));
            }
        }
        if s.lattice.d >= 2
            && s.lattice
                .d
                .checked_pow(sites as u32)
                .is_none_or(|dim| dim > STATE_LIMIT)
        {
            v.push(format!("sqed: d^sites exceeds the state-vector limit {STATE_LIMIT}"));
        }
    }
    if let Some(q) = &cfg.qaoa {
        if q.colors < 2 {
            v.push(format!("qaoa.colors = {} must be ≥ 2", q.colors));
        }
        if q.depth == 0 {
            v.push("qaoa.depth must be ≥ 1".to_string());
        }
        if q.restarts == 0 {
            v.push("qaoa.restarts must be ≥ 1".to_string());
        }
        if let Some(a) = &q.angles {
            if a.gammas.len() != q.depth || a.betas.len() != q.depth {
                v.push(format!("qaoa.angles must hold {} gammas and betas", q.depth));
            }
        }
        if !(0.0..=1.0).contains(&q.ndar.loss) {
            v.push(format!("qaoa.ndar.loss = {} must lie in [0, 1]", q.ndar.loss));
        }
        if q.ndar.shots == 0 {
            v.push("qaoa.ndar.shots must be ≥ 1".to_string());
        }
        let nodes = match &q.graph {
            GraphSource::Edges { nodes, .. } | GraphSource::Planted { nodes, .. } => Some(*nodes),
            GraphSource::File { nodes, .. } => *nodes,
        };
        if let GraphSource::Planted { k, p, .. } = &q.graph {
            if *k == 0 || !(0.0..=1.0).contains(p) {
                v.push("qaoa.graph: planted graphs need k ≥ 1 and p in [0, 1]".to_string());
            }
        }
        if let GraphSource::Edges { nodes, edges } = &q.graph {
            if let Err(e) = Graph::new(*nodes, edges.clone()) {
                v.push(format!("qaoa.graph: {e}"));
            }
        }
        if let Some(n) = nodes {
            if q.colors >= 2 && q.colors.checked_pow(n as u32).is_none_or(|dim| dim > STATE_LIMIT) {
                v.push(format!(
                    "qaoa: colors^nodes exceeds the state-vector limit {STATE_LIMIT}"
                ));
            }
        }
    }
    if let Some(r) = &cfg.reservoir {
        v.extend(
            r.model
                .violations()
                .into_iter()
                .map(|m| format!("reservoir.model: {m}")),
        );
        if r.length <= r.model.washout + 4 {
            v.push(format!("reservoir.length = {} must exceed washout + 4", r.length));
        }
        if !(r.train_fraction > 0.0 && r.train_fraction < 1.0) {
            v.push(format!(
                "reservoir.train_fraction = {} must lie in (0, 1)",
                r.train_fraction
            ));
        }
        if r.shots == Some(0) {
            v.push("reservoir.shots must be ≥ 1".to_string());
        }
        if r.shots.is_some() && r.model.feature_set == qumode::reservoir::FeatureSet::Quadrature {
            v.push("reservoir.shots needs probability features (per_mode or joint)".to_string());
        }
    }
    if let Some(s) = &cfg.synth {
        v.extend(s.optimizer.violations().into_iter().map(|m| format!("synth.{m}")));
        let dims = s.target.dims();
        if dims.iter().any(|&d| d < 2) {
            v.push("synth.target: dimensions must be ≥ 2".to_string());
        }
        if dims.len() != s.workspace.len() || dims.iter().zip(&s.workspace).any(|(t, w)| t > w) {
            v.push(format!(
                "synth.workspace {:?} cannot hold target dims {dims:?}",
                s.workspace
            ));
        }
        if s.workspace.iter().product::<usize>() > DENSE_LIMIT {
            v.push(format!("synth.workspace exceeds the dense limit {DENSE_LIMIT}"));
        }
        if let Err(e) = qumode::synth::AnsatzLayout::parse(s.workspace.clone(), &s.layout) {
            v.push(format!("synth.layout: {e}"));
        }
    }
    v
}

/// Everything wrong with a config document, schema and semantics alike.
pub fn validate_document(doc: &Value) -> (Option<ExperimentConfig>, Vec<String>) {
    let (cfg, mut problems) = parse_collecting(doc);
    if let Some(c) = &cfg {
        problems.extend(violations(c));
    }
    (cfg, problems)
}

pub fn read_document(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{} is not valid JSON: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn triangle() -> Value {
        json!({
            "workload": "qaoa",
            "seed": 3,
            "qaoa": {
                "graph": {"kind": "edges", "nodes": 3, "edges": [[0, 1], [1, 2], [0, 2]]},
                "colors": 3,
                "depth": 1,
                "ndar": {"rounds": 3, "shots": 64, "loss": 0.2, "reoptimize": false, "restarts": 1}
            }
        })
    }

    #[test]
    fn valid_config_has_empty_report() {
        let (cfg, problems) = validate_document(&triangle());
        assert!(problems.is_empty(), "{problems:?}");
        assert_eq!(cfg.unwrap().workload, Workload::Qaoa);
    }

    #[test]
    fn all_unknown_keys_are_listed() {
        let mut doc = triangle();
        doc["colour"] = json!(1);
        doc["qaoa"]["ndar"]["rouds"] = json!(2);
        doc["qaoa"]["graph"]["weights"] = json!([]);
        let (_, problems) = validate_document(&doc);
        let joined = problems.join("\n");
        assert!(joined.contains("`colour`"), "{joined}");
        assert!(joined.contains("qaoa.ndar.rouds"), "{joined}");
        assert!(joined.contains("weights"), "{joined}");
    }

    #[test]
    fn seed_is_mandatory() {
        let mut doc = triangle();
        doc.as_object_mut().unwrap().remove("seed");
        let (cfg, problems) = validate_document(&doc);
        assert!(cfg.is_none());
        assert!(problems[0].contains("seed"), "{problems:?}");
    }

    #[test]
    fn semantic_violations_accumulate() {
        let doc = json!({
            "workload": "sqed",
            "seed": 1,
            "sqed": {
                "lattice": {"shape": "chain", "n": 2, "d": 4, "labeling": "symmetric",
                            "couplings": {"mu": 1.0, "lambda": 0.0, "x": 0.5, "y": 0.0}},
                "t_max": -1.0,
                "samples": 2
            }
        });
        let (_, problems) = validate_document(&doc);
        assert_eq!(problems.len(), 3, "{problems:?}");
        assert!(problems[0].contains("odd d"));

        let mut doc = json!({"workload": "reservoir", "seed": 1, "reservoir": {
            "model": serde_json::to_value(ReservoirConfig::default()).unwrap(),
            "task": "narma2", "length": 200}});
        doc["reservoir"]["model"]["kappas"][0] = json!(-0.1);
        let (_, problems) = validate_document(&doc);
        assert_eq!(problems.len(), 1, "{problems:?}");
        assert!(problems[0].contains("kappas[0]"));
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut doc = triangle();
        apply_overrides(
            &mut doc,
            &[
                "qaoa.ndar.loss=0.5".into(),
                "seed=9".into(),
                "qaoa.graph.edges.0=[0,2]".into(),
                "output=runs/x".into(),
            ],
        )
        .unwrap();
        assert_eq!(doc["qaoa"]["ndar"]["loss"], json!(0.5));
        assert_eq!(doc["seed"], json!(9));
        assert_eq!(doc["qaoa"]["graph"]["edges"][0], json!([0, 2]));
        assert_eq!(doc["output"], json!("runs/x"));
        assert!(apply_overrides(&mut doc, &["novalue".into()]).is_err());
        assert!(apply_overrides(&mut doc, &["seed.x=1".into()]).is_err());
        apply_overrides(&mut doc, &["qaoa.extra.deep=1".into()]).unwrap();
        let (_, problems) = validate_document(&doc);
        assert!(problems.iter().any(|p| p.contains("qaoa.extra")), "{problems:?}");
    }

    #[test]
    fn mismatched_sections_are_reported() {
        let mut doc = triangle();
        doc["workload"] = json!("synth");
        let (_, problems) = validate_document(&doc);
        assert_eq!(problems.len(), 2, "{problems:?}");
    }
}
