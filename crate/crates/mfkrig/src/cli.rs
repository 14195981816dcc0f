//! Command-line front end.
//!
//! Subcommands: `fit`, `hfit`, `predict`, `sweep`, `bench`. Exit codes:
//! 0 success, 1 usage error, 2 data error, 3 fit failure, 4
//! acceptance-threshold failure. Every command is deterministic given its
//! full flag set including `--seed`, and writes only inside `--out`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{
    forrester_doe, forrester_hf, load_csv, synthetic_3d_pair, synthetic_hf_3d, synthetic_hf_sliced,
    CsvSchema, Dataset,
};
use crate::error::{Error, Result};
use crate::gp::{fit, Estimation, KrigingModel};
use crate::hierarchical::{fit_hierarchical, HierarchicalModel};
use crate::kernel::{CorrelationFamily, CorrelationSpec, CorrelationStructure};
use crate::optimize::{Method, OptimizerSpec};
use crate::selection::{
    fit_combination, run_sweep, select_best, CombinationGrid, FitStatus,
    SelectionCriterion, SweepMode, SweepResult, TrendChoice,
};
use crate::trend::TrendSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_THRESHOLD: i32 = 4;

const SCHEMA_VERSION: u32 = 1;
const WORKERS_ENV: &str = "MFKRIG_WORKERS";

#[derive(Parser)]
#[command(
    name = "mfkrig",
    about = "Multi-fidelity Kriging surrogate modelling",
    version
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Exponential,
    Matern32,
    Matern52,
    Linear,
}

impl From<FamilyArg> for CorrelationFamily {
    fn from(v: FamilyArg) -> Self {
        match v {
            FamilyArg::Gaussian => CorrelationFamily::Gaussian,
            FamilyArg::Exponential => CorrelationFamily::Exponential,
            FamilyArg::Matern32 => CorrelationFamily::Matern32,
            FamilyArg::Matern52 => CorrelationFamily::Matern52,
            FamilyArg::Linear => CorrelationFamily::Linear,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Separable,
    Ellipsoidal,
}

impl From<StructureArg> for CorrelationStructure {
    fn from(v: StructureArg) -> Self {
        match v {
            StructureArg::Separable => CorrelationStructure::Separable,
            StructureArg::Ellipsoidal => CorrelationStructure::Ellipsoidal,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrendArg {
    Ordinary,
    Poly1,
    Poly2,
    Poly3,
    Poly4,
}

impl From<TrendArg> for TrendChoice {
    fn from(v: TrendArg) -> Self {
        match v {
            TrendArg::Ordinary => TrendChoice::Ordinary,
            TrendArg::Poly1 => TrendChoice::Polynomial(1),
            TrendArg::Poly2 => TrendChoice::Polynomial(2),
            TrendArg::Poly3 => TrendChoice::Polynomial(3),
            TrendArg::Poly4 => TrendChoice::Polynomial(4),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimationArg {
    Mle,
    Cv,
}

impl From<EstimationArg> for Estimation {
    fn from(v: EstimationArg) -> Self {
        match v {
            EstimationArg::Mle => Estimation::Mle,
            EstimationArg::Cv => Estimation::Cv,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    /// Hybrid self-adaptive differential evolution, refined by BFGS.
    Hsade,
    /// Hybrid genetic algorithm, refined by BFGS.
    Hga,
    /// Projected BFGS with finite-difference gradients.
    Bfgs,
}

impl From<OptimizerArg> for Method {
    fn from(v: OptimizerArg) -> Self {
        match v {
            OptimizerArg::Hsade => Method::HybridDe,
            OptimizerArg::Hga => Method::HybridGa,
            OptimizerArg::Bfgs => Method::LocalGradient,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Hierarchical,
    Conventional,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchName {
    Forrester,
    Synthetic3d,
}

/// Kernel/trend/estimator options shared by the fitting commands.
#[derive(Args, Clone)]
struct ModelOptions {
    #[arg(long, value_enum, default_value = "gaussian")]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "separable")]
    structure: StructureArg,
    #[arg(long, default_value_t = false)]
    isotropic: bool,
    #[arg(long, value_enum, default_value = "ordinary")]
    trend: TrendArg,
    #[arg(long, value_enum, default_value = "mle")]
    estimation: EstimationArg,
    #[arg(long, value_enum, default_value = "hsade")]
    optimizer: OptimizerArg,
}

impl ModelOptions {
    fn correlation_spec(&self) -> CorrelationSpec {
        CorrelationSpec::new(self.family.into(), self.structure.into(), self.isotropic)
    }

    fn trend_spec(&self) -> TrendSpec {
        TrendChoice::from(self.trend).to_trend_spec()
    }
}

/// Column-mapping flags shared by commands that read CSV data.
#[derive(Args, Clone)]
struct ColumnOptions {
    /// Comma-separated input column names; defaults to x1..xd found in the header.
    #[arg(long)]
    inputs: Option<String>,
    #[arg(long, default_value = "y")]
    output_col: String,
    /// Optional column holding an explicit noise variance per row.
    #[arg(long)]
    noise_col: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a conventional Kriging model to one dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        columns: ColumnOptions,
        #[command(flatten)]
        options: ModelOptions,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mfkrig_out")]
        out: PathBuf,
    },
    /// Fit a two-level Hierarchical Kriging model.
    Hfit {
        #[arg(long)]
        lf_data: PathBuf,
        #[arg(long)]
        hf_data: PathBuf,
        #[command(flatten)]
        columns: ColumnOptions,
        #[command(flatten)]
        options: ModelOptions,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mfkrig_out")]
        out: PathBuf,
    },
    /// Predict from a saved model document over a query CSV or a grid.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV with the model's input columns.
        #[arg(long, conflicts_with = "grid")]
        query: Option<PathBuf>,
        /// Regular lattice, one `min:max:count` per dimension, comma-separated.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value = "mfkrig_out")]
        out: PathBuf,
    },
    /// Fit and score every combination of the Kriging-parameter grid.
    Sweep {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        lf_data: Option<PathBuf>,
        #[arg(long)]
        hf_data: PathBuf,
        #[arg(long)]
        validate: PathBuf,
        #[command(flatten)]
        columns: ColumnOptions,
        /// Restrict a grid axis, e.g. `family=Gaussian` or `optimizer=BFGS,HSADE`.
        #[arg(long = "grid")]
        grid: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker count; 0 uses MFKRIG_WORKERS or all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Fit the low-fidelity model once instead of per combination.
        #[arg(long, default_value_t = false)]
        shared_lf: bool,
        #[arg(long, default_value = "mfkrig_out")]
        out: PathBuf,
    },
    /// Run a built-in benchmark end-to-end and check its thresholds.
    Bench {
        #[arg(long, value_enum)]
        name: BenchName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mfkrig_out")]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_)
        | Error::Csv(_)
        | Error::Parse { .. }
        | Error::MissingColumn(_)
        | Error::EmptyDataset(_)
        | Error::ConstantInput(_)
        | Error::ShapeMismatch(_)
        | Error::DegenerateValidation(_)
        | Error::Serde(_) => EXIT_DATA,
        Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_FIT,
    }
}

fn emit_error(err: &Error, code: i32) {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "error",
        "error": err.to_string(),
        "exit_code": code,
    });
    eprintln!("{doc}");
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let args = match CliArgs::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // --help/--version are successes
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(args.command) {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code_for(&e);
            emit_error(&e, code);
            code
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Fit {
            data,
            columns,
            options,
            seed,
            out,
        } => cmd_fit(&data, &columns, &options, seed, &out),
        Command::Hfit {
            lf_data,
            hf_data,
            columns,
            options,
            seed,
            out,
        } => cmd_hfit(&lf_data, &hf_data, &columns, &options, seed, &out),
        Command::Predict {
            model,
            query,
            grid,
            out,
        } => cmd_predict(&model, query.as_deref(), grid.as_deref(), &out),
        Command::Sweep {
            mode,
            lf_data,
            hf_data,
            validate,
            columns,
            grid,
            seed,
            workers,
            shared_lf,
            out,
        } => cmd_sweep(
            mode,
            lf_data.as_deref(),
            &hf_data,
            &validate,
            &columns,
            &grid,
            seed,
            workers,
            shared_lf,
            &out,
        ),
        Command::Bench { name, seed, out } => cmd_bench(name, seed, &out),
    }
}

fn csv_schema(path: &Path, columns: &ColumnOptions) -> Result<CsvSchema> {
    let inputs = match &columns.inputs {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => {
            // default convention: consecutive x1..xd present in the header
            let mut reader = crate::data::open_csv(path)?;
            let headers: Vec<String> =
                reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
            let mut names = Vec::new();
            loop {
                let candidate = format!("x{}", names.len() + 1);
                if headers.contains(&candidate) {
                    names.push(candidate);
                } else {
                    break;
                }
            }
            if names.is_empty() {
                return Err(Error::MissingColumn("x1".into()));
            }
            names
        }
    };
    Ok(CsvSchema {
        inputs,
        output: columns.output_col.clone(),
        noise: columns.noise_col.clone(),
    })
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn wrap_model(kind: &str, model: &impl Serialize) -> Result<String> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "model": model,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[derive(Deserialize)]
struct ModelDocument {
    #[serde(rename = "schema_version")]
    _schema_version: u32,
    kind: String,
    model: serde_json::Value,
}

/// Load either a conventional or a hierarchical model document; returns
/// the model that answers predictions.
pub fn load_model_document(path: &Path) -> Result<KrigingModel> {
    let text = fs::read_to_string(path)?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    match doc.kind.as_str() {
        "kriging_model" => {
            let mut model: KrigingModel = serde_json::from_value(doc.model)?;
            model.rebuild()?;
            Ok(model)
        }
        "hierarchical_model" => {
            let mut model: HierarchicalModel = serde_json::from_value(doc.model)?;
            let mut top = model.top().clone();
            top.rebuild()?;
            model = HierarchicalModel::new(top);
            Ok(model.top().clone())
        }
        other => Err(Error::InvalidInput(format!(
            "unknown model document kind '{other}'"
        ))),
    }
}

fn fit_report(model: &KrigingModel) -> serde_json::Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "fit_report",
        "theta_hat": model.theta_hat.values(),
        "beta_hat": model.beta_hat.as_slice(),
        "sigma2_hat": model.sigma2_hat,
        "jitter_used": model.jitter_used,
        "estimation": model.estimation.name(),
        "objective_value": model.diagnostics.objective_value,
        "evaluations": model.diagnostics.evaluations,
        "converged": model.diagnostics.converged,
    })
}

fn cmd_fit(
    data_path: &Path,
    columns: &ColumnOptions,
    options: &ModelOptions,
    seed: u64,
    out: &Path,
) -> Result<i32> {
    let schema = csv_schema(data_path, columns)?;
    let data = load_csv(data_path, &schema)?;
    let model = fit(
        &data,
        options.correlation_spec(),
        options.trend_spec(),
        options.estimation.into(),
        &OptimizerSpec::new(options.optimizer.into(), seed),
    )?;
    ensure_out_dir(out)?;
    fs::write(out.join("model.json"), wrap_model("kriging_model", &model)?)?;
    fs::write(
        out.join("fit_report.json"),
        serde_json::to_string_pretty(&fit_report(&model))?,
    )?;
    println!(
        "fit: n={} d={} sigma2={} theta={:?}",
        model.n(),
        model.dim(),
        model.sigma2_hat,
        model.theta_hat.values()
    );
    Ok(EXIT_OK)
}

fn cmd_hfit(
    lf_path: &Path,
    hf_path: &Path,
    columns: &ColumnOptions,
    options: &ModelOptions,
    seed: u64,
    out: &Path,
) -> Result<i32> {
    let lf_schema = csv_schema(lf_path, columns)?;
    let hf_schema = csv_schema(hf_path, columns)?;
    let lf_data = load_csv(lf_path, &lf_schema)?;
    let hf_data = load_csv(hf_path, &hf_schema)?;
    if lf_data.dim() != hf_data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "low-fidelity data has dimension {}, high-fidelity data has dimension {}",
            lf_data.dim(),
            hf_data.dim()
        )));
    }
    let spec = options.correlation_spec();
    let estimation: Estimation = options.estimation.into();
    let optimizer = OptimizerSpec::new(options.optimizer.into(), seed);
    let lf_model = fit(&lf_data, spec, options.trend_spec(), estimation, &optimizer)?;
    let hk = fit_hierarchical(&lf_model, &hf_data, spec, estimation, &optimizer)?;
    let model = HierarchicalModel::new(hk);
    ensure_out_dir(out)?;
    fs::write(
        out.join("model.json"),
        wrap_model("hierarchical_model", &model)?,
    )?;
    let mut report = fit_report(model.top());
    report["beta_scale"] = json!(model.beta_scale());
    report["levels"] = json!(model.num_levels());
    fs::write(
        out.join("fit_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "hfit: levels={} beta_scale={:?}",
        model.num_levels(),
        model.beta_scale()
    );
    Ok(EXIT_OK)
}

fn parse_grid_spec(spec: &str, dim: usize) -> Result<DMatrix<f64>> {
    let axes: Vec<&str> = spec.split(',').collect();
    if axes.len() != dim {
        return Err(Error::InvalidInput(format!(
            "grid spec has {} axes, model needs {}",
            axes.len(),
            dim
        )));
    }
    let mut grids = Vec::with_capacity(dim);
    for axis in axes {
        let parts: Vec<&str> = axis.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "grid axis '{axis}' is not min:max:count"
            )));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("grid axis '{axis}': bad min"))
        })?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("grid axis '{axis}': bad max"))
        })?;
        let count: usize = parts[2].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("grid axis '{axis}': bad count"))
        })?;
        if count == 0 {
            return Err(Error::InvalidInput(format!("grid axis '{axis}': count is 0")));
        }
        let pts: Vec<f64> = if count == 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect()
        };
        grids.push(pts);
    }
    let total: usize = grids.iter().map(|g| g.len()).product();
    let mut rows = DMatrix::zeros(total, dim);
    for i in 0..total {
        let mut rem = i;
        // first axis slowest
        for q in (0..dim).rev() {
            let len = grids[q].len();
            rows[(i, q)] = grids[q][rem % len];
            rem /= len;
        }
    }
    Ok(rows)
}

fn cmd_predict(
    model_path: &Path,
    query: Option<&Path>,
    grid: Option<&str>,
    out: &Path,
) -> Result<i32> {
    let model = load_model_document(model_path)?;
    let xs: DMatrix<f64> = match (query, grid) {
        (Some(q), None) => load_query_csv(q, &model_input_names(&model))?,
        (None, Some(g)) => parse_grid_spec(g, model.dim())?,
        _ => {
            return Err(Error::InvalidInput(
                "predict needs exactly one of --query or --grid".into(),
            ))
        }
    };
    let preds = model.predict_batch(&xs)?;
    ensure_out_dir(out)?;
    let path = out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let names = model_input_names(&model);
    let mut header: Vec<String> = names.clone();
    header.push("mean".into());
    header.push("variance".into());
    w.write_record(&header)?;
    for (i, p) in preds.iter().enumerate() {
        let mut rec: Vec<String> = (0..xs.ncols()).map(|q| format!("{}", xs[(i, q)])).collect();
        rec.push(format!("{}", p.mean));
        rec.push(format!("{}", p.variance));
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("predict: {} rows -> {}", preds.len(), path.display());
    Ok(EXIT_OK)
}

fn model_input_names(model: &KrigingModel) -> Vec<String> {
    (1..=model.dim()).map(|q| format!("x{q}")).collect()
}

fn load_query_csv(path: &Path, inputs: &[String]) -> Result<DMatrix<f64>> {
    let mut reader = crate::data::open_csv(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let cols: Vec<usize> = inputs
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::MissingColumn(n.clone()))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut r = Vec::with_capacity(cols.len());
        for &c in &cols {
            let cell = record.get(c).unwrap_or("");
            r.push(cell.trim().parse::<f64>().map_err(|e| Error::Parse {
                row: i + 2,
                column: headers[c].clone(),
                message: e.to_string(),
            })?);
        }
        rows.push(r);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no data rows", path.display())));
    }
    let d = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), d, |i, q| rows[i][q]))
}

fn restrict_grid(grid: &mut CombinationGrid, restrictions: &[String]) -> Result<()> {
    for spec in restrictions {
        let (axis, values) = spec.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!("grid restriction '{spec}' is not axis=value"))
        })?;
        let values: Vec<&str> = values.split(',').map(|v| v.trim()).collect();
        match axis.trim().to_ascii_lowercase().as_str() {
            "structure" => {
                grid.structures = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "separable" => Ok(CorrelationStructure::Separable),
                        "ellipsoidal" => Ok(CorrelationStructure::Ellipsoidal),
                        _ => Err(Error::InvalidInput(format!("unknown structure '{v}'"))),
                    })
                    .collect::<Result<_>>()?;
            }
            "family" => {
                grid.families = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "gaussian" => Ok(CorrelationFamily::Gaussian),
                        "exponential" => Ok(CorrelationFamily::Exponential),
                        "matern32" => Ok(CorrelationFamily::Matern32),
                        "matern52" => Ok(CorrelationFamily::Matern52),
                        "linear" => Ok(CorrelationFamily::Linear),
                        _ => Err(Error::InvalidInput(format!("unknown family '{v}'"))),
                    })
                    .collect::<Result<_>>()?;
            }
            "isotropy" => {
                grid.isotropy = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "true" => Ok(true),
                        "false" => Ok(false),
                        _ => Err(Error::InvalidInput(format!("unknown isotropy '{v}'"))),
                    })
                    .collect::<Result<_>>()?;
            }
            "trend" => {
                grid.trends = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "ordinary" => Ok(TrendChoice::Ordinary),
                        "polynomial1" | "poly1" => Ok(TrendChoice::Polynomial(1)),
                        "polynomial2" | "poly2" => Ok(TrendChoice::Polynomial(2)),
                        "polynomial3" | "poly3" => Ok(TrendChoice::Polynomial(3)),
                        "polynomial4" | "poly4" => Ok(TrendChoice::Polynomial(4)),
                        _ => Err(Error::InvalidInput(format!("unknown trend '{v}'"))),
                    })
                    .collect::<Result<_>>()?;
            }
            "estimation" => {
                grid.estimations = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "mle" => Ok(Estimation::Mle),
                        "cv" => Ok(Estimation::Cv),
                        _ => Err(Error::InvalidInput(format!("unknown estimation '{v}'"))),
                    })
                    .collect::<Result<_>>()?;
            }
            "optimizer" => {
                grid.optimizers = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "hsade" => Ok(Method::HybridDe),
                        "hybridga" | "hga" => Ok(Method::HybridGa),
                        "bfgs" => Ok(Method::LocalGradient),
                        _ => Err(Error::InvalidInput(format!("unknown optimizer '{v}'"))),
                    })
                    .collect::<Result<_>>()?;
            }
            other => {
                return Err(Error::InvalidInput(format!("unknown grid axis '{other}'")));
            }
        }
    }
    Ok(())
}

fn status_text(status: &FitStatus) -> String {
    match status {
        FitStatus::Ok => "ok".into(),
        FitStatus::Failed(reason) => format!("failed: {reason}"),
    }
}

fn write_sweep_reports(out: &Path, mode: ModeArg, base_seed: u64, rows: &[SweepResult]) -> Result<()> {
    // deterministic flat table: no wall-clock columns here (timings go to
    // the sidecar so identical runs produce byte-identical reports)
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record([
        "index",
        "structure",
        "family",
        "isotropy",
        "trend",
        "estimation",
        "optimizer",
        "q2",
        "mae",
        "status",
    ])?;
    for r in rows {
        let c = &r.combination;
        w.write_record([
            c.index.to_string(),
            c.structure.name().to_string(),
            c.family.name().to_string(),
            c.isotropic.to_string(),
            c.trend.name(),
            c.estimation.name().to_string(),
            c.optimizer.name().to_string(),
            r.q2.map(|v| format!("{v}")).unwrap_or_default(),
            r.mae.map(|v| format!("{v}")).unwrap_or_default(),
            status_text(&r.status),
        ])?;
    }
    w.flush()?;

    let mut tw = csv::Writer::from_path(out.join("sweep_timings.csv"))?;
    tw.write_record(["index", "fit_seconds", "score_seconds"])?;
    for r in rows {
        tw.write_record([
            r.combination.index.to_string(),
            format!("{:.6}", r.fit_seconds),
            format!("{:.6}", r.score_seconds),
        ])?;
    }
    tw.flush()?;

    let json_rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            json!({
                "index": r.combination.index,
                "structure": r.combination.structure.name(),
                "family": r.combination.family.name(),
                "isotropy": r.combination.isotropic,
                "trend": r.combination.trend.name(),
                "estimation": r.combination.estimation.name(),
                "optimizer": r.combination.optimizer.name(),
                "q2": r.q2,
                "mae": r.mae,
                "status": status_text(&r.status),
                "seed": r.seed,
            })
        })
        .collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep_report",
        "mode": match mode { ModeArg::Hierarchical => "hierarchical", ModeArg::Conventional => "conventional" },
        "base_seed": base_seed,
        "rows": json_rows,
    });
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    mode: ModeArg,
    lf_path: Option<&Path>,
    hf_path: &Path,
    validate_path: &Path,
    columns: &ColumnOptions,
    restrictions: &[String],
    seed: u64,
    workers: Option<usize>,
    shared_lf: bool,
    out: &Path,
) -> Result<i32> {
    let sweep_mode = match mode {
        ModeArg::Hierarchical => SweepMode::Hierarchical,
        ModeArg::Conventional => SweepMode::Conventional,
    };
    if sweep_mode == SweepMode::Hierarchical && lf_path.is_none() {
        return Err(Error::InvalidInput(
            "hierarchical mode requires --lf-data".into(),
        ));
    }
    let mut grid = CombinationGrid::default();
    restrict_grid(&mut grid, restrictions)?;

    let hf = load_csv(hf_path, &csv_schema(hf_path, columns)?)?;
    let validate = load_csv(validate_path, &csv_schema(validate_path, columns)?)?;
    let lf = lf_path
        .map(|p| -> Result<Dataset> { load_csv(p, &csv_schema(p, columns)?) })
        .transpose()?;

    let workers = workers.unwrap_or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    });

    let rows = run_sweep(
        &grid,
        lf.as_ref(),
        &hf,
        &validate,
        sweep_mode,
        seed,
        workers,
        shared_lf,
    )?;

    ensure_out_dir(out)?;
    write_sweep_reports(out, mode, seed, &rows)?;

    let all_failed = rows.iter().all(|r| r.status != FitStatus::Ok);
    if all_failed {
        return Err(Error::NoModel);
    }

    // re-fit the winners with their per-combination seeds; deterministic,
    // so the documents match the models that were scored
    for (criterion, file) in [
        (SelectionCriterion::Q2, "best_q2_model.json"),
        (SelectionCriterion::Mae, "best_mae_model.json"),
    ] {
        let best = select_best(&rows, criterion)?;
        let model = fit_combination(
            &best.combination,
            lf.as_ref(),
            &hf,
            sweep_mode,
            best.seed,
            None,
        )?;
        let kind = match sweep_mode {
            SweepMode::Hierarchical => "hierarchical_model",
            SweepMode::Conventional => "kriging_model",
        };
        let text = match sweep_mode {
            SweepMode::Hierarchical => wrap_model(kind, &HierarchicalModel::new(model))?,
            SweepMode::Conventional => wrap_model(kind, &model)?,
        };
        fs::write(out.join(file), text)?;
    }

    let ok = rows.iter().filter(|r| r.status == FitStatus::Ok).count();
    println!("sweep: {} rows, {} ok -> {}", rows.len(), ok, out.display());
    Ok(EXIT_OK)
}

/// Thresholds of the Forrester benchmark: the hierarchical model must cut
/// the conventional RMSE at least threefold, and its scaling factor must
/// bracket 2.
pub struct ForresterBenchReport {
    pub hk_rmse: f64,
    pub conventional_rmse: f64,
    pub hk_q2: f64,
    pub conventional_q2: f64,
    pub hk_mae: f64,
    pub conventional_mae: f64,
    pub beta_scale: f64,
    pub pass: bool,
}

/// Run the Forrester benchmark end-to-end.
pub fn run_forrester_bench(seed: u64) -> Result<ForresterBenchReport> {
    let pair = forrester_doe();
    let spec = CorrelationSpec::new(
        CorrelationFamily::Gaussian,
        CorrelationStructure::Separable,
        false,
    );
    let optimizer = OptimizerSpec::new(Method::HybridDe, seed);
    let lf = fit(&pair.lf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;
    let hk = fit_hierarchical(&lf, &pair.hf, spec, Estimation::Mle, &optimizer)?;
    let conv = fit(&pair.hf, spec, TrendSpec::Ordinary, Estimation::Mle, &optimizer)?;

    let mut truth = Vec::with_capacity(101);
    let mut pred_hk = Vec::with_capacity(101);
    let mut pred_conv = Vec::with_capacity(101);
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        truth.push(forrester_hf(x));
        pred_hk.push(hk.predict(&[x])?.mean);
        pred_conv.push(conv.predict(&[x])?.mean);
    }
    let rmse = |pred: &[f64]| {
        (truth
            .iter()
            .zip(pred)
            .map(|(t, p)| (p - t) * (p - t))
            .sum::<f64>()
            / truth.len() as f64)
            .sqrt()
    };
    let hk_rmse = rmse(&pred_hk);
    let conventional_rmse = rmse(&pred_conv);
    let beta_scale = hk.beta_hat[0];
    let pass = hk_rmse <= conventional_rmse / 3.0 && (1.8..=2.2).contains(&beta_scale);
    Ok(ForresterBenchReport {
        hk_rmse,
        conventional_rmse,
        hk_q2: crate::selection::q2(&truth, &pred_hk)?,
        conventional_q2: crate::selection::q2(&truth, &pred_conv)?,
        hk_mae: crate::selection::mae(&truth, &pred_hk)?,
        conventional_mae: crate::selection::mae(&truth, &pred_conv)?,
        beta_scale,
        pass,
    })
}

/// Summary of the synthetic 3-D sub-grid comparison between hierarchical
/// and conventional sweeps.
pub struct Synthetic3dBenchReport {
    pub combos: usize,
    pub compared: usize,
    pub hier_wins: usize,
    pub win_fraction: f64,
    pub hier_q2: Vec<f64>,
    pub conv_q2: Vec<f64>,
    pub hier_spread: f64,
    pub conv_spread: f64,
    pub pass: bool,
}

/// Sub-grid of 60 combinations used by the synthetic 3-D benchmark:
/// ordinary trend, MLE, all structures/families/isotropy/optimizers.
pub fn synthetic3d_subgrid() -> CombinationGrid {
    CombinationGrid {
        trends: vec![TrendChoice::Ordinary],
        estimations: vec![Estimation::Mle],
        ..CombinationGrid::default()
    }
}

/// Run the synthetic 3-D benchmark: noisy replicated low-fidelity data over
/// the full box, high-fidelity training restricted to three slices of the
/// first input axis, and a clean dense validation lattice.
pub fn run_synthetic3d_bench(seed: u64, workers: usize) -> Result<Synthetic3dBenchReport> {
    let noise = 0.05;
    let pair = synthetic_3d_pair(100, 4, noise, seed)?;
    let hf_train = synthetic_hf_sliced(&[0.2, 0.5, 0.8], 3, noise, seed ^ 0x9e3779b97f4a7c15)?;

    // clean dense validation lattice
    let m = 6;
    let mut rows = Vec::new();
    let mut outs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let p = vec![
                    i as f64 / (m - 1) as f64,
                    j as f64 / (m - 1) as f64,
                    k as f64 / (m - 1) as f64,
                ];
                outs.push(synthetic_hf_3d(&p));
                rows.push(p);
            }
        }
    }
    let validate = Dataset::from_rows(
        rows,
        outs,
        None,
        vec!["x1".into(), "x2".into(), "x3".into()],
        "y".into(),
    )?;

    let grid = synthetic3d_subgrid();
    let hier = run_sweep(
        &grid,
        Some(&pair.lf),
        &hf_train,
        &validate,
        SweepMode::Hierarchical,
        seed,
        workers,
        false,
    )?;
    let conv = run_sweep(
        &grid,
        None,
        &hf_train,
        &validate,
        SweepMode::Conventional,
        seed,
        workers,
        false,
    )?;

    let mut compared = 0;
    let mut hier_wins = 0;
    let mut hq = Vec::new();
    let mut cq = Vec::new();
    for (h, c) in hier.iter().zip(&conv) {
        if let Some(q) = h.q2 {
            hq.push(q);
        }
        if let Some(q) = c.q2 {
            cq.push(q);
        }
        if let (Some(qh), Some(qc)) = (h.q2, c.q2) {
            compared += 1;
            if qh > qc {
                hier_wins += 1;
            }
        }
    }
    let spread = |v: &[f64]| {
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let hier_spread = spread(&hq);
    let conv_spread = spread(&cq);
    let combos = grid.cardinality();
    // wins are counted over all combinations, so failed rows count against
    let win_fraction = hier_wins as f64 / combos as f64;
    let pass = win_fraction >= 0.8 && hier_spread < conv_spread;
    Ok(Synthetic3dBenchReport {
        combos,
        compared,
        hier_wins,
        win_fraction,
        hier_q2: hq,
        conv_q2: cq,
        hier_spread,
        conv_spread,
        pass,
    })
}

fn cmd_bench(name: BenchName, seed: u64, out: &Path) -> Result<i32> {
    ensure_out_dir(out)?;
    match name {
        BenchName::Forrester => {
            let r = run_forrester_bench(seed)?;
            // spread of the hierarchical RMSE over repeated seeds
            let mut rmses = Vec::new();
            for s in 0..10u64 {
                rmses.push(run_forrester_bench(seed.wrapping_add(s))?.hk_rmse);
            }
            let lo = rmses.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = rmses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "kind": "bench_report",
                "name": "forrester",
                "hk_rmse": r.hk_rmse,
                "conventional_rmse": r.conventional_rmse,
                "rmse_ratio": r.hk_rmse / r.conventional_rmse,
                "hk_q2": r.hk_q2,
                "conventional_q2": r.conventional_q2,
                "hk_mae": r.hk_mae,
                "conventional_mae": r.conventional_mae,
                "beta_scale": r.beta_scale,
                "hk_rmse_spread_over_seeds": {"min": lo, "max": hi},
                "thresholds": {"max_rmse_ratio": 1.0/3.0, "beta_range": [1.8, 2.2]},
                "pass": r.pass,
            });
            fs::write(out.join("bench_forrester.json"), serde_json::to_string_pretty(&doc)?)?;
            println!(
                "forrester: hk_rmse={:.4} conventional_rmse={:.4} beta={:.3} pass={}",
                r.hk_rmse, r.conventional_rmse, r.beta_scale, r.pass
            );
            Ok(if r.pass { EXIT_OK } else { EXIT_THRESHOLD })
        }
        BenchName::Synthetic3d => {
            let r = run_synthetic3d_bench(seed, 0)?;
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "kind": "bench_report",
                "name": "synthetic3d",
                "combinations": r.combos,
                "compared": r.compared,
                "hierarchical_wins": r.hier_wins,
                "win_fraction": r.win_fraction,
                "hierarchical_q2": r.hier_q2,
                "conventional_q2": r.conv_q2,
                "hierarchical_q2_spread": r.hier_spread,
                "conventional_q2_spread": r.conv_spread,
                "thresholds": {"min_win_fraction": 0.8, "spread": "hierarchical < conventional"},
                "pass": r.pass,
            });
            fs::write(out.join("bench_synthetic3d.json"), serde_json::to_string_pretty(&doc)?)?;
            println!(
                "synthetic3d: wins={}/{} spread_h={:.4} spread_c={:.4} pass={}",
                r.hier_wins, r.combos, r.hier_spread, r.conv_spread, r.pass
            );
            Ok(if r.pass { EXIT_OK } else { EXIT_THRESHOLD })
        }
    }
}
