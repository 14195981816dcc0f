//! Dataset ingestion, replication aggregation, standardization, and the
//! built-in analytical multi-fidelity benchmarks.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Design matrix, responses and per-point noise variances, all in original units.
///
/// Rows of `x` are unique: exact-duplicate inputs are aggregated into
/// replication groups at construction (response = mean of replicates,
/// noise variance = sample variance of replicates divided by the
/// replicate count, i.e. the variance of the mean).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub noise_var: DVector<f64>,
    pub replication_counts: Option<Vec<usize>>,
    pub input_names: Vec<String>,
    pub output_name: String,
}

impl Dataset {
    /// Build a dataset from raw rows, aggregating exact-duplicate inputs.
    ///
    /// `noise` supplies an explicit per-row noise variance that overrides the
    /// replication-based estimate (averaged within a replication group).
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        noise: Option<Vec<f64>>,
        input_names: Vec<String>,
        output_name: String,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset("no data rows".into()));
        }
        if rows.len() != outputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} input rows vs {} outputs",
                rows.len(),
                outputs.len()
            )));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::EmptyDataset("zero input dimensions".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
        }
        if let Some(nv) = &noise {
            if nv.len() != outputs.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} noise entries vs {} outputs",
                    nv.len(),
                    outputs.len()
                )));
            }
        }

        // group exact-duplicate inputs by f64 bit pattern
        let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            groups.entry(key).or_default().push(i);
        }

        let mut points: Vec<(Vec<f64>, f64, f64, usize)> = Vec::with_capacity(groups.len());
        for idx in groups.values() {
            let point = rows[idx[0]].clone();
            let m = idx.len();
            let mean = idx.iter().map(|&i| outputs[i]).sum::<f64>() / m as f64;
            let var = match &noise {
                Some(nv) => idx.iter().map(|&i| nv[i]).sum::<f64>() / m as f64,
                None => {
                    if m > 1 {
                        let ss: f64 = idx.iter().map(|&i| (outputs[i] - mean).powi(2)).sum();
                        // unbiased sample variance of replicates, then variance of the mean
                        ss / (m as f64 - 1.0) / m as f64
                    } else {
                        0.0
                    }
                }
            };
            points.push((point, mean, var, m));
        }

        // canonical order: lexicographic by input tuple, so row order in the
        // source never affects the dataset
        points.sort_by(|a, b| {
            a.0.iter()
                .zip(b.0.iter())
                .map(|(u, v)| u.total_cmp(v))
                .find(|c| c.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let n = points.len();
        let mut x = DMatrix::zeros(n, d);
        let mut y = DVector::zeros(n);
        let mut nv = DVector::zeros(n);
        let mut counts = Vec::with_capacity(n);
        for (i, (p, mean, var, m)) in points.into_iter().enumerate() {
            for q in 0..d {
                x[(i, q)] = p[q];
            }
            y[i] = mean;
            nv[i] = var;
            counts.push(m);
        }
        let replicated = counts.iter().any(|&m| m > 1);
        Ok(Dataset {
            x,
            y,
            noise_var: nv,
            replication_counts: if replicated { Some(counts) } else { None },
            input_names,
            output_name,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub inputs: Vec<String>,
    pub output: String,
    /// Optional column holding an explicit noise variance per row.
    pub noise: Option<String>,
}

/// Open a CSV reader, naming the offending path on failure.
pub fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| {
        Error::Io(std::io::Error::other(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })
}

/// Load a CSV file with a header row, aggregating replicated inputs.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = open_csv(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let input_cols: Vec<usize> = schema
        .inputs
        .iter()
        .map(|n| col(n))
        .collect::<Result<_>>()?;
    let out_col = col(&schema.output)?;
    let noise_col = schema.noise.as_deref().map(col).transpose()?;

    let parse = |record: &csv::StringRecord, row: usize, c: usize| -> Result<f64> {
        record
            .get(c)
            .ok_or_else(|| Error::Parse {
                row,
                column: headers[c].clone(),
                message: "missing field".into(),
            })?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse {
                row,
                column: headers[c].clone(),
                message: e.to_string(),
            })
    };

    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    let mut noise = noise_col.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 2; // 1-based, after the header
        let mut r = Vec::with_capacity(input_cols.len());
        for &c in &input_cols {
            r.push(parse(&record, row_no, c)?);
        }
        rows.push(r);
        outputs.push(parse(&record, row_no, out_col)?);
        if let (Some(nv), Some(c)) = (&mut noise, noise_col) {
            nv.push(parse(&record, row_no, c)?);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no data rows", path.display())));
    }
    Dataset::from_rows(
        rows,
        outputs,
        noise,
        schema.inputs.clone(),
        schema.output.clone(),
    )
}

/// A pair of datasets for two fidelity levels of the same quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityPair {
    pub lf: Dataset,
    pub hf: Dataset,
}

impl FidelityPair {
    pub fn new(lf: Dataset, hf: Dataset) -> Result<Self> {
        if lf.dim() != hf.dim() {
            return Err(Error::ShapeMismatch(format!(
                "low-fidelity dimension {} vs high-fidelity dimension {}",
                lf.dim(),
                hf.dim()
            )));
        }
        Ok(FidelityPair { lf, hf })
    }
}

/// Affine map of each input dimension onto [0, 1] over the training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTransform {
    pub mins: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl InputTransform {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let d = x.ncols();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for i in 0..x.nrows() {
            for q in 0..d {
                mins[q] = mins[q].min(x[(i, q)]);
                maxs[q] = maxs[q].max(x[(i, q)]);
            }
        }
        let mut ranges = Vec::with_capacity(d);
        for q in 0..d {
            let r = maxs[q] - mins[q];
            if r <= 0.0 {
                if x.nrows() > 1 {
                    return Err(Error::ConstantInput(q));
                }
                ranges.push(1.0); // single point: identity scale
            } else {
                ranges.push(r);
            }
        }
        Ok(InputTransform { mins, ranges })
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(q, v)| (v - self.mins[q]) / self.ranges[q])
            .collect()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for i in 0..x.nrows() {
            for q in 0..x.ncols() {
                out[(i, q)] = (x[(i, q)] - self.mins[q]) / self.ranges[q];
            }
        }
        out
    }

    pub fn invert(&self, x_std: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x_std.clone();
        for i in 0..x_std.nrows() {
            for q in 0..x_std.ncols() {
                out[(i, q)] = x_std[(i, q)] * self.ranges[q] + self.mins[q];
            }
        }
        out
    }
}

/// Shift/scale map for outputs: y_std = (y - shift) / scale.
///
/// Convention: `scale` is the population standard deviation (divisor n),
/// so Y = (0, 2) standardizes to (-1, 1). A zero-variance output gets
/// scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputTransform {
    pub shift: f64,
    pub scale: f64,
}

impl OutputTransform {
    /// Fit from responses. With `center = false` the shift is pinned at 0
    /// (used when the trend is an external predictor, so the fitted scaling
    /// factor stays interpretable in original output units).
    pub fn fit(y: &DVector<f64>, center: bool) -> Self {
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        OutputTransform {
            shift: if center { mean } else { 0.0 },
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }

    pub fn invert_mean(&self, y_std: f64) -> f64 {
        y_std * self.scale + self.shift
    }

    pub fn invert_var(&self, var_std: f64) -> f64 {
        var_std * self.scale * self.scale
    }
}

/// Invertible record of the input/output standardization of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub input: InputTransform,
    pub output: OutputTransform,
}

/// Standardize a dataset: inputs to [0,1] per dimension, outputs to zero
/// mean and unit (population) standard deviation; noise variances are
/// scaled by the squared output factor.
pub fn standardize(data: &Dataset) -> Result<(Dataset, TransformRecord)> {
    let input = InputTransform::fit(&data.x)?;
    let output = OutputTransform::fit(&data.y, true);
    let x = input.apply(&data.x);
    let y = data.y.map(|v| output.apply(v));
    let s2 = output.scale * output.scale;
    let noise_var = data.noise_var.map(|v| v / s2);
    Ok((
        Dataset {
            x,
            y,
            noise_var,
            replication_counts: data.replication_counts.clone(),
            input_names: data.input_names.clone(),
            output_name: data.output_name.clone(),
        },
        TransformRecord { input, output },
    ))
}

/// Invert [`standardize`].
pub fn destandardize(data: &Dataset, tf: &TransformRecord) -> Dataset {
    let x = tf.input.invert(&data.x);
    let y = data.y.map(|v| tf.output.invert_mean(v));
    let s2 = tf.output.scale * tf.output.scale;
    let noise_var = data.noise_var.map(|v| v * s2);
    Dataset {
        x,
        y,
        noise_var,
        replication_counts: data.replication_counts.clone(),
        input_names: data.input_names.clone(),
        output_name: data.output_name.clone(),
    }
}

/// High-fidelity Forrester function: (6x-2)^2 sin(12x-4).
pub fn forrester_hf(x: f64) -> f64 {
    let a = 6.0 * x - 2.0;
    a * a * (12.0 * x - 4.0).sin()
}

/// Low-fidelity Forrester function: 0.5 y_hf(x) + 10(x - 0.5) + 5.
pub fn forrester_lf(x: f64) -> f64 {
    0.5 * forrester_hf(x) + 10.0 * (x - 0.5) + 5.0
}

/// Built-in Forrester designs: LF on {0, 0.1, ..., 1}, HF on {0, 0.4, 0.6, 1}.
pub fn forrester_doe() -> FidelityPair {
    let d1: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let d2 = [0.0, 0.4, 0.6, 1.0];
    let lf = Dataset::from_rows(
        d1.iter().map(|&x| vec![x]).collect(),
        d1.iter().map(|&x| forrester_lf(x)).collect(),
        None,
        vec!["x1".into()],
        "y".into(),
    )
    .expect("static design");
    let hf = Dataset::from_rows(
        d2.iter().map(|&x| vec![x]).collect(),
        d2.iter().map(|&x| forrester_hf(x)).collect(),
        None,
        vec!["x1".into()],
        "y".into(),
    )
    .expect("static design");
    FidelityPair { lf, hf }
}

/// Closed-form low-fidelity 3-D test function on [0,1]^3.
pub fn synthetic_lf_3d(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() + (2.0 * x[1]).cos() + 0.5 * x[2]
}

/// Closed-form high-fidelity 3-D test function: a scaling of the
/// low-fidelity function plus a smooth low-order offset.
pub fn synthetic_hf_3d(x: &[f64]) -> f64 {
    1.8 * synthetic_lf_3d(x) + 1.5 * (x[0] - 0.5) + 0.3 * x[1] * x[2]
}

/// Input-dependent noise standard deviation used by the synthetic generator.
pub fn synthetic_noise_sd(x: &[f64], noise_scale: f64) -> f64 {
    noise_scale * (0.5 + x[0])
}

const SYNTHETIC_REPLICATES: usize = 4;

fn replicated_rows<F: Fn(&[f64]) -> f64>(
    points: &[Vec<f64>],
    f: F,
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let reps = if noise_scale > 0.0 { SYNTHETIC_REPLICATES } else { 1 };
    let mut rows = Vec::new();
    let mut outs = Vec::new();
    for p in points {
        let clean = f(p);
        let sd = synthetic_noise_sd(p, noise_scale);
        for _ in 0..reps {
            rows.push(p.clone());
            let eps = if sd > 0.0 {
                // Box-Muller keeps the draw count per replicate fixed
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                sd * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            } else {
                0.0
            };
            outs.push(clean + eps);
        }
    }
    (rows, outs)
}

fn uniform_points_3d(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect()
}

/// Deterministic desk-scale 3-D multi-fidelity benchmark with replicated,
/// heteroscedastic outputs. Closed forms are [`synthetic_lf_3d`] and
/// [`synthetic_hf_3d`].
pub fn synthetic_3d_pair(
    n_lf: usize,
    n_hf: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<FidelityPair> {
    if n_lf < 4 || n_hf < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points per level, got n_lf={n_lf}, n_hf={n_hf}"
        )));
    }
    if noise_scale < 0.0 {
        return Err(Error::InvalidInput("noise_scale must be nonnegative".into()));
    }
    let names = vec!["x1".to_string(), "x2".to_string(), "x3".to_string()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lf_points = uniform_points_3d(n_lf, &mut rng);
    let hf_points = uniform_points_3d(n_hf, &mut rng);
    let (lf_rows, lf_out) = replicated_rows(&lf_points, synthetic_lf_3d, noise_scale, &mut rng);
    let (hf_rows, hf_out) = replicated_rows(&hf_points, synthetic_hf_3d, noise_scale, &mut rng);
    let lf = Dataset::from_rows(lf_rows, lf_out, None, names.clone(), "y".into())?;
    let hf = Dataset::from_rows(hf_rows, hf_out, None, names, "y".into())?;
    FidelityPair::new(lf, hf)
}

/// High-fidelity 3-D data restricted to fixed slices of the first input
/// axis, with a regular lattice over the remaining two axes per slice.
pub fn synthetic_hf_sliced(
    slices: &[f64],
    per_axis: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if slices.is_empty() || per_axis < 2 {
        return Err(Error::InsufficientData(
            "need at least one slice and a 2-point lattice".into(),
        ));
    }
    let mut points = Vec::new();
    for &s in slices {
        for i in 0..per_axis {
            for j in 0..per_axis {
                let x2 = i as f64 / (per_axis - 1) as f64;
                let x3 = j as f64 / (per_axis - 1) as f64;
                points.push(vec![s, x2, x3]);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, outs) = replicated_rows(&points, synthetic_hf_3d, noise_scale, &mut rng);
    Dataset::from_rows(
        rows,
        outs,
        None,
        vec!["x1".into(), "x2".into(), "x3".into()],
        "y".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn from_rows_distinct_inputs() {
        let ds = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![1.0, 2.0, 3.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.noise_var.as_slice(), &[0.0, 0.0, 0.0]);
        assert!(ds.replication_counts.is_none());
    }

    #[test]
    fn replication_aggregation_matches_variance_of_mean() {
        let ds = Dataset::from_rows(
            vec![vec![0.5]; 4],
            vec![1.0, 1.0, 3.0, 3.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        assert_eq!(ds.n(), 1);
        assert_relative_eq!(ds.y[0], 2.0);
        // unbiased replicate variance 4/3, divided by m = 4
        assert_relative_eq!(ds.noise_var[0], 1.0 / 3.0, max_relative = 1e-14);
        assert_eq!(ds.replication_counts, Some(vec![4]));
    }

    #[test]
    fn aggregation_is_order_independent() {
        let rows = vec![vec![0.9], vec![0.1], vec![0.1], vec![0.5]];
        let outs = vec![9.0, 1.0, 3.0, 5.0];
        let a = Dataset::from_rows(rows.clone(), outs.clone(), None, vec!["x1".into()], "y".into())
            .unwrap();
        let perm = [3usize, 0, 2, 1];
        let rows2: Vec<_> = perm.iter().map(|&i| rows[i].clone()).collect();
        let outs2: Vec<_> = perm.iter().map(|&i| outs[i]).collect();
        let b = Dataset::from_rows(rows2, outs2, None, vec!["x1".into()], "y".into()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.noise_var, b.noise_var);
    }

    #[test]
    fn load_csv_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x1,y").unwrap();
        writeln!(f, "0.0,1.0").unwrap();
        writeln!(f, "1.0,2.0").unwrap();
        drop(f);
        let schema = CsvSchema {
            inputs: vec!["x1".into()],
            output: "y".into(),
            noise: None,
        };
        let ds = load_csv(&path, &schema).unwrap();
        assert_eq!(ds.n(), 2);

        let bad = CsvSchema {
            inputs: vec!["x7".into()],
            output: "y".into(),
            noise: None,
        };
        match load_csv(&path, &bad) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "x7"),
            other => panic!("expected missing column, got {other:?}"),
        }

        let path2 = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path2).unwrap();
        writeln!(f, "x1,y").unwrap();
        writeln!(f, "0.0,oops").unwrap();
        drop(f);
        match load_csv(&path2, &schema) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let path3 = dir.path().join("empty.csv");
        let mut f = std::fs::File::create(&path3).unwrap();
        writeln!(f, "x1,y").unwrap();
        drop(f);
        assert!(matches!(load_csv(&path3, &schema), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn forrester_values() {
        assert_relative_eq!(forrester_hf(0.0), 4.0 * (-4.0_f64).sin(), max_relative = 1e-14);
        assert!(forrester_hf(1.0 / 3.0).abs() < 1e-12);
        assert_relative_eq!(forrester_hf(1.0), 16.0 * (8.0_f64).sin(), max_relative = 1e-14);
        assert_relative_eq!(
            forrester_lf(0.0),
            0.5 * forrester_hf(0.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            forrester_lf(0.5),
            0.5 * (2.0_f64).sin() + 5.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            forrester_lf(1.0),
            0.5 * forrester_hf(1.0) + 10.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn forrester_lf_hf_relation_is_a_line() {
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let line = forrester_lf(x) - 0.5 * forrester_hf(x);
            assert_relative_eq!(line, 10.0 * (x - 0.5) + 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn forrester_doe_sizes() {
        let pair = forrester_doe();
        assert_eq!(pair.lf.n(), 11);
        assert_eq!(pair.hf.n(), 4);
    }

    #[test]
    fn standardize_example_and_roundtrip() {
        let ds = Dataset::from_rows(
            vec![vec![0.0], vec![1.0]],
            vec![0.0, 2.0],
            None,
            vec!["x1".into()],
            "y".into(),
        )
        .unwrap();
        let (std, tf) = standardize(&ds).unwrap();
        // population-sd convention: (0, 2) -> (-1, 1)
        assert_relative_eq!(std.y[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(std.y[1], 1.0, epsilon = 1e-14);
        assert_eq!(std.x[(0, 0)], 0.0);
        assert_eq!(std.x[(1, 0)], 1.0);
        let back = destandardize(&std, &tf);
        assert_relative_eq!(back.y[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(back.y[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_rejects_constant_input() {
        let ds = Dataset::from_rows(
            vec![vec![2.0, 0.0], vec![2.0, 1.0]],
            vec![0.0, 1.0],
            None,
            vec!["x1".into(), "x2".into()],
            "y".into(),
        )
        .unwrap();
        assert!(matches!(standardize(&ds), Err(Error::ConstantInput(0))));
    }

    #[test]
    fn synthetic_pair_is_deterministic_and_correlated() {
        let a = synthetic_3d_pair(20, 10, 0.1, 42).unwrap();
        let b = synthetic_3d_pair(20, 10, 0.1, 42).unwrap();
        assert_eq!(a.lf.y, b.lf.y);
        assert_eq!(a.hf.y, b.hf.y);
        assert_eq!(a.lf.replication_counts, Some(vec![4; 20]));

        let clean = synthetic_3d_pair(20, 10, 0.0, 7).unwrap();
        assert!(clean.lf.noise_var.iter().all(|&v| v == 0.0));

        // closed forms correlate strongly over a probe grid
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = uniform_points_3d(1000, &mut rng);
        let lfv: Vec<f64> = pts.iter().map(|p| synthetic_lf_3d(p)).collect();
        let hfv: Vec<f64> = pts.iter().map(|p| synthetic_hf_3d(p)).collect();
        let ml = lfv.iter().sum::<f64>() / 1000.0;
        let mh = hfv.iter().sum::<f64>() / 1000.0;
        let cov: f64 = lfv.iter().zip(&hfv).map(|(a, b)| (a - ml) * (b - mh)).sum();
        let vl: f64 = lfv.iter().map(|a| (a - ml).powi(2)).sum();
        let vh: f64 = hfv.iter().map(|b| (b - mh).powi(2)).sum();
        let pearson = cov / (vl.sqrt() * vh.sqrt());
        assert!(pearson > 0.8, "pearson = {pearson}");
    }

    proptest! {
        #[test]
        fn standardize_roundtrips(
            ys in prop::collection::vec(-100.0..100.0f64, 2..20),
        ) {
            let n = ys.len();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
            let ds = Dataset::from_rows(rows, ys, None, vec!["x1".into()], "y".into()).unwrap();
            let (std, tf) = standardize(&ds).unwrap();
            let back = destandardize(&std, &tf);
            for i in 0..n {
                prop_assert!((back.y[i] - ds.y[i]).abs() <= 1e-12 * (1.0 + ds.y[i].abs()));
                prop_assert!((back.x[(i,0)] - ds.x[(i,0)]).abs() <= 1e-12 * (1.0 + ds.x[(i,0)].abs()));
            }
        }
    }
}
