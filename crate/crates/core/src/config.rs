//! Run configurations, one JSON document per run.
//!
//! Unknown keys are rejected. `--set a.b=v` overrides are applied to the raw
//! JSON before it is validated.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::design::{Design, DesignKind, DesignSpec};
use crate::er::{Regime, VarianceMethod};
use crate::error::{LabError, Result};
use crate::graph::{Graph, InterferenceStructure};
use crate::outcomes::Estimand;

fn default_k() -> usize {
    1
}

fn default_grid() -> Vec<f64> {
    vec![0.0, 1.0]
}

fn default_estimand() -> Estimand {
    Estimand::Ate
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureConfig {
    NoInterference,
    Arbitrary,
    KLocal {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        graph: Option<Graph>,
        #[serde(default)]
        graph_path: Option<PathBuf>,
    },
}

impl StructureConfig {
    pub fn build(&self, n: usize, base: &Path) -> Result<InterferenceStructure> {
        match self {
            StructureConfig::NoInterference => Ok(InterferenceStructure::NoInterference { n }),
            StructureConfig::Arbitrary => Ok(InterferenceStructure::Arbitrary { n }),
            StructureConfig::KLocal { k, graph, graph_path } => {
                let graph = load_graph(graph.as_ref(), graph_path.as_deref(), base)?;
                if graph.n() != n {
                    return Err(LabError::InvalidArgument(format!(
                        "graph has {} nodes, config says n={n}",
                        graph.n()
                    )));
                }
                Ok(InterferenceStructure::k_local(graph, *k))
            }
        }
    }
}

pub fn load_graph(inline: Option<&Graph>, path: Option<&Path>, base: &Path) -> Result<Graph> {
    match (inline, path) {
        (Some(g), None) => Ok(g.clone()),
        (None, Some(p)) => Graph::load(&base.join(p)),
        _ => Err(LabError::InvalidArgument("give exactly one of graph or graph_path".into())),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TableConfig {
    /// Uniform draws on `(lower, upper)`; seeded by the run's `seed`.
    Random { lower: f64, upper: f64 },
    Constant { value: f64 },
    /// CSV (arbitrary interference) or JSON (per-unit maps), by extension.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    DiffInMeans,
    HorvitzThompson,
    AdditiveUnbiased,
    PrimaryUnbiased,
    Constant(f64),
    /// Path to a witness CSV (`assignment,ykey,value`).
    Tabular(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub design: DesignKind,
    pub n: usize,
    #[serde(default)]
    pub n_a: Option<usize>,
    #[serde(default)]
    pub structure: Option<StructureConfig>,
    pub table: TableConfig,
    pub estimator: EstimatorConfig,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityConfig {
    pub design: DesignKind,
    pub n: usize,
    #[serde(default)]
    pub n_a: Option<usize>,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Extra family tables (arbitrary-interference CSVs) appended to the
    /// default family.
    #[serde(default)]
    pub family: Vec<PathBuf>,
    /// Replace the default family instead of extending it.
    #[serde(default)]
    pub family_only: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub design: DesignKind,
    pub n: usize,
    #[serde(default)]
    pub n_a: Option<usize>,
    pub estimator: EstimatorConfig,
    #[serde(default = "default_estimand")]
    pub estimand: Estimand,
    pub m: f64,
    /// Where to write the adversarial table (outcomes CSV).
    #[serde(default)]
    pub table_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepRegime {
    Sparse,
    Dense,
    Fixed { p: f64 },
}

impl SweepRegime {
    pub fn p(&self, n: u64) -> f64 {
        match self {
            SweepRegime::Sparse => Regime::Sparse.p(n),
            SweepRegime::Dense => Regime::Dense.p(n),
            SweepRegime::Fixed { p } => *p,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepRegime::Sparse => "sparse",
            SweepRegime::Dense => "dense",
            SweepRegime::Fixed { .. } => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Constant(f64),
    Uniform,
}

fn default_method() -> VarianceMethod {
    VarianceMethod::ClosedForm
}

fn default_policy() -> PolicyConfig {
    PolicyConfig::Uniform
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErAnalysisConfig {
    pub ns: Vec<u64>,
    pub regime: SweepRegime,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "default_policy")]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_method")]
    pub method: VarianceMethod,
}

fn default_sweep() -> Vec<u64> {
    (3..=10).map(|e| 1u64 << e).collect()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesConfig {
    #[serde(default)]
    pub unit: usize,
    #[serde(default = "default_table_n")]
    pub n: usize,
    #[serde(default)]
    pub graph: Option<Graph>,
    #[serde(default)]
    pub graph_path: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_sweep")]
    pub ns: Vec<u64>,
}

fn default_table_n() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimesConfig {
    #[serde(default = "default_sweep")]
    pub ns: Vec<u64>,
    #[serde(default = "one")]
    pub lower: f64,
    #[serde(default = "one")]
    pub upper: f64,
}

pub fn design_from(kind: DesignKind, n: usize, n_a: Option<usize>) -> Result<Design> {
    Design::try_from(DesignSpec { design: kind, n, n_a })
}

/// Applies `key.path=value` to a JSON object. The value is parsed as JSON
/// when possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| LabError::InvalidArgument(format!("--set expects key=value, got {assignment:?}")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cursor = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(LabError::InvalidArgument(format!("empty key segment in {path:?}")));
        }
        let obj = cursor
            .as_object_mut()
            .ok_or_else(|| LabError::InvalidArgument(format!("{path:?} does not address an object")))?;
        if depth + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cursor = obj.entry((*key).to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one segment")
}

pub fn parse_config<T: DeserializeOwned>(doc: Value) -> Result<T> {
    serde_json::from_value(doc).map_err(|e| LabError::Parse(format!("config: {e}")))
}
