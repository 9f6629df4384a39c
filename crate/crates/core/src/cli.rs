//! Command-line front end. The binary is a thin wrapper around [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{
    apply_override, design_from, load_graph, parse_config, AdversaryConfig, ErAnalysisConfig, EstimatorConfig,
    FeasibilityConfig, MomentsConfig, PolicyConfig, RegimesConfig, TableConfig, TablesConfig,
};
use crate::design::{Arm, Assignment, Design};
use crate::er::{
    expected_effective_treatments, expected_informative_fraction, h_bound, mc_expected_variance, regime_report,
    asymptotic_limits, ErSpec, Regime, TablePolicy,
};
use crate::error::{LabError, Result};
use crate::estimators::{Estimator, TabularEstimator};
use crate::exact::{exact_moments, ht_variance_for_index, mse_adversary, neyman_variance_terms};
use crate::feasibility::{default_witness_family, offset_analysis, unbiased_feasibility};
use crate::graph::InterferenceStructure;
use crate::outcomes::{Estimand, PotentialOutcomeTable};
use crate::parallel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "interference-lab", version, about = "Exact design-based analysis of estimators under interference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact moments of an estimator by enumerating the design.
    Moments(CommonArgs),
    /// Decide whether any unbiased estimator exists over a witness family.
    Feasibility(CommonArgs),
    /// Build the worst-case table for an estimator and report its MSE.
    Adversary(CommonArgs),
    /// Erdős–Rényi sweep of the expected HT variance and its bounds.
    ErAnalysis(CommonArgs),
    /// Effective-treatment counts and informative fractions.
    Tables(CommonArgs),
    /// Sparse and dense variance regimes over an N grid.
    Regimes(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (a directory for `tables`). Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides a config key, e.g. `--set n=5` or `--set table.value=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_capacity() {
                EXIT_CAPACITY
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let (args, seeded) = match &command {
        Command::Moments(a) | Command::ErAnalysis(a) => (a, true),
        Command::Feasibility(a) | Command::Adversary(a) | Command::Tables(a) | Command::Regimes(a) => (a, false),
    };
    if args.seed.is_some() && !seeded {
        return Err(LabError::InvalidArgument("--seed is only used by moments and er-analysis".into()));
    }
    let (doc, base) = load_document(args)?;
    match command {
        Command::Moments(a) => emit(&a.out, stdout, &cmd_moments(&parse_config(doc)?, &base)?),
        Command::Feasibility(a) => emit(&a.out, stdout, &cmd_feasibility(&parse_config(doc)?, &base)?),
        Command::Adversary(a) => emit(&a.out, stdout, &cmd_adversary(&parse_config(doc)?, &base)?),
        Command::ErAnalysis(a) => {
            let cfg: ErAnalysisConfig = parse_config(doc)?;
            let text = parallel::install(|| cmd_er_analysis(&cfg))?;
            emit(&a.out, stdout, &text)
        }
        Command::Tables(a) => {
            let (t1, t2) = cmd_tables(&parse_config(doc)?, &base)?;
            match &a.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join("informative_sets.csv"), t1)?;
                    fs::write(dir.join("er_limits.csv"), t2)?;
                    Ok(())
                }
                None => emit(&None, stdout, &format!("{t1}\n{t2}")),
            }
        }
        Command::Regimes(a) => {
            let (text, notes) = cmd_regimes(&parse_config(doc)?)?;
            let _ = stderr.write_all(notes.as_bytes());
            emit(&a.out, stdout, &text)
        }
    }
}

fn load_document(args: &CommonArgs) -> Result<(Value, PathBuf)> {
    let (mut doc, base) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| LabError::Parse(format!("{}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (doc, base)
        }
        None => (json!({}), PathBuf::new()),
    };
    if !doc.is_object() {
        return Err(LabError::Parse("config must be a JSON object".into()));
    }
    for assignment in &args.set {
        apply_override(&mut doc, assignment)?;
    }
    if let Some(seed) = args.seed {
        doc["seed"] = json!(seed);
    }
    Ok((doc, base))
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values serialize");
    s.push('\n');
    s
}

fn read(base: &Path, path: &Path) -> Result<String> {
    let full = base.join(path);
    fs::read_to_string(&full).map_err(|e| LabError::Io(format!("{}: {e}", full.display())))
}

fn load_table(base: &Path, path: &Path) -> Result<PotentialOutcomeTable> {
    let text = read(base, path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => PotentialOutcomeTable::from_csv(&text),
        Some("json") => PotentialOutcomeTable::from_json(&text),
        _ => Err(LabError::InvalidArgument(format!(
            "table file {} must end in .csv or .json",
            path.display()
        ))),
    }
}

fn build_estimator(
    cfg: &EstimatorConfig,
    n: usize,
    structure: Option<&InterferenceStructure>,
    estimand: &Estimand,
    base: &Path,
) -> Result<Estimator> {
    Ok(match cfg {
        EstimatorConfig::DiffInMeans => Estimator::DiffMeans,
        EstimatorConfig::HorvitzThompson => {
            let index = structure.and_then(InterferenceStructure::index).ok_or_else(|| {
                LabError::InvalidArgument("horvitz_thompson needs a k_local structure".into())
            })?;
            Estimator::HorvitzThompson { index: index.clone() }
        }
        EstimatorConfig::AdditiveUnbiased => Estimator::additive_unbiased_for(estimand, n)?,
        EstimatorConfig::PrimaryUnbiased => Estimator::PrimaryUnbiased,
        EstimatorConfig::Constant(c) => Estimator::Constant(*c),
        EstimatorConfig::Tabular(path) => Estimator::Tabular(TabularEstimator::from_csv(&read(base, path)?)?),
    })
}

pub fn cmd_moments(cfg: &MomentsConfig, base: &Path) -> Result<String> {
    let design = design_from(cfg.design, cfg.n, cfg.n_a)?;
    let table = match &cfg.table {
        TableConfig::File { path } => {
            if cfg.structure.is_some() {
                return Err(LabError::InvalidArgument(
                    "a table file carries its own structure; drop the structure key".into(),
                ));
            }
            load_table(base, path)?
        }
        other => {
            let structure = cfg
                .structure
                .as_ref()
                .ok_or_else(|| LabError::InvalidArgument("structure is required unless the table is a file".into()))?
                .build(cfg.n, base)?;
            match other {
                TableConfig::Random { lower, upper } => {
                    PotentialOutcomeTable::generate_random(structure, *lower, *upper, cfg.seed)?
                }
                TableConfig::Constant { value } => PotentialOutcomeTable::constant(structure, *value)?,
                TableConfig::File { .. } => unreachable!("handled above"),
            }
        }
    };
    let estimator = build_estimator(&cfg.estimator, cfg.n, Some(table.structure()), &cfg.estimand, base)?;
    let report = exact_moments(&estimator, &design, &table, &cfg.estimand)?;
    let mut doc = json!({
        "design": design,
        "structure": table.structure().name(),
        "estimator": estimator.name(),
        "estimand": cfg.estimand.name(),
        "moments": report,
    });
    match (&design, table.structure(), &estimator) {
        (Design::Crd { n_a, .. }, InterferenceStructure::NoInterference { .. }, Estimator::DiffMeans) => {
            doc["neyman"] = serde_json::to_value(neyman_variance_terms(&table, *n_a)?)?;
        }
        (Design::Bd { .. }, InterferenceStructure::KLocal { index, .. }, Estimator::HorvitzThompson { .. }) => {
            doc["ht_closed_form"] = serde_json::to_value(ht_variance_for_index(index, &table)?)?;
        }
        _ => {}
    }
    Ok(pretty(&doc))
}

pub fn cmd_feasibility(cfg: &FeasibilityConfig, base: &Path) -> Result<String> {
    let design = design_from(cfg.design, cfg.n, cfg.n_a)?;
    let mut family = if cfg.family_only {
        Vec::new()
    } else {
        default_witness_family(cfg.n, &cfg.estimand, &cfg.grid)?
    };
    for path in &cfg.family {
        family.push(load_table(base, path)?);
    }
    let cert = unbiased_feasibility(&design, &cfg.estimand, &family)?;
    let mut doc = cert.to_json();
    doc["design"] = serde_json::to_value(design)?;
    doc["estimand"] = json!(cfg.estimand.name());
    if let (Some(witness), true) = (cert.witness(), design.is_bernoulli()) {
        doc["offsets"] = serde_json::to_value(offset_analysis(witness, &design, &cfg.estimand, &family)?)?;
    }
    Ok(pretty(&doc))
}

pub fn cmd_adversary(cfg: &AdversaryConfig, base: &Path) -> Result<String> {
    let design = design_from(cfg.design, cfg.n, cfg.n_a)?;
    let estimator = build_estimator(&cfg.estimator, cfg.n, None, &cfg.estimand, base)?;
    let report = mse_adversary(&estimator, &design, &cfg.estimand, cfg.m)?;
    if let Some(path) = &cfg.table_out {
        fs::write(base.join(path), report.table.to_csv()?)?;
    }
    let doc = json!({
        "design": design,
        "estimator": estimator.name(),
        "estimand": cfg.estimand.name(),
        "m": cfg.m,
        "mse": report.mse,
        "estimand_value": report.estimand,
        "bound": report.bound,
        "bound_holds": report.bound_holds,
    });
    Ok(pretty(&doc))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn cmd_er_analysis(cfg: &ErAnalysisConfig) -> Result<String> {
    let policy = match cfg.policy {
        PolicyConfig::Constant(c) => TablePolicy::Constant(c),
        PolicyConfig::Uniform => TablePolicy::Uniform { lower: cfg.lower, upper: cfg.upper },
    };
    let mut out = String::from("N,p,regime,h_lower,h_upper,mc_mean,mc_stderr,expected_Ei,informative_fraction\n");
    for &n in &cfg.ns {
        let p = cfg.regime.p(n);
        let spec = ErSpec::new(n, p)?;
        let h_lower = h_bound(cfg.lower, &spec)?;
        let h_upper = h_bound(cfg.upper, &spec)?;
        let mc = if cfg.reps > 0 {
            Some(mc_expected_variance(&spec, cfg.k, policy, cfg.method, cfg.reps, cfg.seed)?)
        } else {
            None
        };
        writeln!(
            out,
            "{n},{p:?},{},{h_lower:?},{h_upper:?},{},{},{:?},{:?}",
            cfg.regime.name(),
            fmt_opt(mc.map(|m| m.mean)),
            fmt_opt(mc.map(|m| m.stderr)),
            expected_effective_treatments(&spec),
            expected_informative_fraction(&spec),
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Returns the informative-set CSV and the ER limit CSV.
pub fn cmd_tables(cfg: &TablesConfig, base: &Path) -> Result<(String, String)> {
    let mut structures = vec![InterferenceStructure::NoInterference { n: cfg.n }];
    if cfg.graph.is_some() || cfg.graph_path.is_some() {
        let graph = load_graph(cfg.graph.as_ref(), cfg.graph_path.as_deref(), base)?;
        if graph.n() != cfg.n {
            return Err(LabError::InvalidArgument(format!(
                "graph has {} nodes, config says n={}",
                graph.n(),
                cfg.n
            )));
        }
        structures.push(InterferenceStructure::k_local(graph, cfg.k));
    }
    structures.push(InterferenceStructure::Arbitrary { n: cfg.n });
    if cfg.unit >= cfg.n {
        return Err(LabError::InvalidArgument(format!("unit {} out of range for n={}", cfg.unit, cfg.n)));
    }
    let design = Design::bd(cfg.n)?;
    let z = Assignment::all(cfg.n, Arm::A)?;
    let mut t1 = String::from("structure,N,unit,E_i,S_i,F_i\n");
    for s in &structures {
        let (count, fraction) = s.informative_set(&design, cfg.unit, &z)?;
        writeln!(
            t1,
            "{},{},{},{},{count},{fraction:?}",
            s.name(),
            cfg.n,
            cfg.unit,
            s.effective_treatment_count(cfg.unit)
        )
        .expect("writing to a String");
    }
    let mut t2 = String::from("N,regime,p,expected_Ei,informative_fraction\n");
    for regime in [Regime::Sparse, Regime::Dense] {
        for &n in &cfg.ns {
            let spec = ErSpec::new(n, regime.p(n))?;
            writeln!(
                t2,
                "{n},{},{:?},{:?},{:?}",
                regime.name(),
                spec.p,
                expected_effective_treatments(&spec),
                expected_informative_fraction(&spec)
            )
            .expect("writing to a String");
        }
        let (ei, frac) = asymptotic_limits(regime);
        writeln!(t2, "inf,{},0,{ei:?},{frac:?}", regime.name()).expect("writing to a String");
    }
    Ok((t1, t2))
}

/// Returns the sweep CSV and a short trend summary.
pub fn cmd_regimes(cfg: &RegimesConfig) -> Result<(String, String)> {
    let mut csv = String::from("N,regime,p,bound,scaled\n");
    let mut notes = String::new();
    for regime in [Regime::Sparse, Regime::Dense] {
        let report = regime_report(&cfg.ns, regime, cfg.lower, cfg.upper)?;
        for row in &report.rows {
            writeln!(csv, "{},{},{:?},{:?},{:?}", row.n, regime.name(), row.p, row.bound, row.scaled)
                .expect("writing to a String");
        }
        writeln!(notes, "{}: {:?}", regime.name(), report.trend).expect("writing to a String");
    }
    Ok((csv, notes))
}
