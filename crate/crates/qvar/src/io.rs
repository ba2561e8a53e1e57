//! CSV and JSON formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! rerun with the same inputs reproduces files byte for byte.

use std::fs;
use std::io::Write;
use std::path::Path;

use qvar_core::estimators::{EstimateReport, PathSample};
use qvar_core::kernels::TabulatedGram;
use qvar_core::limits::ConditionReport;
use qvar_core::montecarlo::McResult;
use qvar_core::partitions::Partition;
use qvar_core::schemes::TabulatedPhi;
use qvar_core::spectral::{MomentReport, NormReport};
use qvar_core::CovMatrix;
use serde::{Deserialize, Serialize};

use crate::{AppError, AppResult};

fn open_csv(path: &Path, has_headers: bool) -> AppResult<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(has_headers).flexible(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> AppError {
    AppError::config(format!("{}: {e}", path.display()))
}

fn parse_number(path: &Path, line: u64, field: &str) -> AppResult<f64> {
    field
        .parse::<f64>()
        .map_err(|_| AppError::config(format!("{}: line {line}: `{field}` is not a number", path.display())))
}

/// All rows of a header-less numeric CSV file; blank rows are skipped.
fn numeric_rows(path: &Path) -> AppResult<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for record in open_csv(path, false)?.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push(record.iter().map(|f| parse_number(path, line, f)).collect::<AppResult<Vec<f64>>>()?);
    }
    Ok(rows)
}

/// A partition stored as one row of points.
pub fn read_partition(path: &Path) -> AppResult<Partition> {
    let rows = numeric_rows(path)?;
    if rows.len() != 1 {
        return Err(AppError::config(format!("{}: expected one row of points, found {}", path.display(), rows.len())));
    }
    Partition::from_points(rows.into_iter().next().unwrap_or_default())
        .map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

pub fn write_partition(path: &Path, p: &Partition) -> AppResult<()> {
    let line: Vec<String> = p.points().iter().map(|x| x.to_string()).collect();
    write_file(path, format!("{}\n", line.join(",")).as_bytes())
}

/// First row holds the grid times, the following rows the Gram matrix.
pub fn read_tabulated_gram(path: &Path) -> AppResult<TabulatedGram> {
    let mut rows = numeric_rows(path)?.into_iter();
    let times = rows.next().ok_or_else(|| AppError::config(format!("{}: empty kernel table", path.display())))?;
    let gram: Vec<Vec<f64>> = rows.collect();
    if gram.len() != times.len() || gram.iter().any(|r| r.len() != times.len()) {
        return Err(AppError::config(format!(
            "{}: {} grid times need a {0}×{0} Gram matrix",
            path.display(),
            times.len()
        )));
    }
    TabulatedGram::new(times, gram.concat()).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

/// Rows `x,phi(x)`.
pub fn read_phi_table(path: &Path) -> AppResult<TabulatedPhi> {
    let rows = numeric_rows(path)?;
    if rows.iter().any(|r| r.len() != 2) {
        return Err(AppError::config(format!("{}: φ table rows must have two columns", path.display())));
    }
    let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    TabulatedPhi::new(&x, &y).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

pub fn matrix_csv(g: &CovMatrix) -> String {
    let mut out = String::new();
    for i in 0..g.dim() {
        let row: Vec<String> = g.row(i).iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    n: usize,
    rows: Vec<&'a [f64]>,
}

pub fn matrix_json(g: &CovMatrix) -> String {
    let rows = (0..g.dim()).map(|i| g.row(i)).collect();
    pretty(&MatrixJson { n: g.dim(), rows })
}

/// Reads a `time,value` file. The header is required; times must be
/// strictly increasing and errors name the offending line.
pub fn read_path(path: &Path) -> AppResult<PathSample> {
    let mut reader = open_csv(path, true)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "value" {
        return Err(AppError::config(format!("{}: header must be `time,value`", path.display())));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(AppError::config(format!("{}: line {line}: expected two columns", path.display())));
        }
        let t = parse_number(path, line, &record[0])?;
        let v = parse_number(path, line, &record[1])?;
        if let Some(prev) = times.last() {
            if t.is_nan() || t <= *prev {
                return Err(AppError::config(format!(
                    "{}: line {line}: time {t} does not increase (previous {prev})",
                    path.display()
                )));
            }
        }
        times.push(t);
        values.push(v);
    }
    PathSample::new(times, values).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

pub fn path_csv(path: &PathSample) -> String {
    let mut out = String::from("time,value\n");
    for (t, v) in path.times().iter().zip(path.values()) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

pub fn conditions_csv(reports: &[ConditionReport]) -> String {
    let mut out = ConditionReport::FIELDS.join(",");
    out.push('\n');
    for r in reports {
        let fields = [
            r.energy,
            r.planar_nn,
            r.spectral_logn,
            r.one_norm_h,
            r.clt_ratio,
            r.lindeberg_ratio,
            r.be_quantity,
            r.be_lambda_bound,
        ];
        out.push_str(&r.n.to_string());
        for x in fields {
            out.push(',');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses [`conditions_csv`] output; used to validate emitted files.
pub fn parse_conditions_csv(text: &str) -> AppResult<Vec<ConditionReport>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| AppError::config(e.to_string()))?;
    if headers.iter().ne(ConditionReport::FIELDS) {
        return Err(AppError::config(format!("unexpected condition columns {headers:?}")));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e: csv::Error| AppError::config(e.to_string())))
        .collect()
}

/// JSON record of one level's spectrum and moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentLevel {
    pub n: usize,
    pub trace: f64,
    pub frobenius: f64,
    pub spectral: f64,
    pub one_norm: f64,
    pub var_vn: f64,
    pub fourth_central: f64,
    pub kurtosis_excess: f64,
    pub lambda_star: f64,
}

impl MomentLevel {
    pub fn new(n: usize, norms: &NormReport, m: &MomentReport) -> Self {
        Self {
            n,
            trace: norms.trace,
            frobenius: norms.frobenius,
            spectral: norms.spectral,
            one_norm: norms.one_norm,
            var_vn: m.var_vn,
            fourth_central: m.fourth_central,
            kurtosis_excess: m.kurtosis_excess,
            lambda_star: m.lambda_star,
        }
    }
}

/// Monte Carlo summary of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McLevel {
    pub n: usize,
    pub seed: u64,
    /// Theoretical mean and variance used to standardize the sample.
    pub center: f64,
    pub scale: f64,
    pub result: McResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub observations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub realized: Option<RealizedOutput>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<EstimateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedOutput {
    pub alpha: f64,
    pub steps: usize,
    pub value: f64,
}

pub fn replicates_csv(vs: &[f64]) -> String {
    let mut out = String::from("replicate,v\n");
    for (r, v) in vs.iter().enumerate() {
        out.push_str(&format!("{r},{v}\n"));
    }
    out
}

pub fn pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let mut f = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    f.write_all(bytes).map_err(|e| AppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qvar_core::partitions::make_uniform;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn partition_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = make_uniform(7, 3.0).unwrap();
        let file = dir.path().join("p.csv");
        write_partition(&file, &p).unwrap();
        assert_eq!(read_partition(&file).unwrap(), p);
        let bad = write(&dir, "bad.csv", "0,0.5,0.4,1\n");
        assert_eq!(read_partition(&bad).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn path_rows_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let ok = write(&dir, "ok.csv", "time,value\n0,0\n0.5,0.5\n1,1\n");
        let path = read_path(&ok).unwrap();
        assert_eq!(path.values(), &[0.0, 0.5, 1.0]);
        let shuffled = write(&dir, "s.csv", "time,value\n0,0\n1,1\n0.5,0.5\n");
        let err = read_path(&shuffled).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 4"), "{err}");
        let no_header = write(&dir, "h.csv", "0,0\n1,1\n");
        assert!(read_path(&no_header).is_err());
        let junk = write(&dir, "j.csv", "time,value\n0,x\n");
        assert!(read_path(&junk).unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn tabulated_kernel_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(&dir, "k.csv", "0,0.5,1\n0,0,0\n0,0.5,0.5\n0,0.5,1\n");
        let t = read_tabulated_gram(&f).unwrap();
        assert_eq!(t.times(), &[0.0, 0.5, 1.0]);
        let f = write(&dir, "k2.csv", "0,1\n0,0\n");
        assert!(read_tabulated_gram(&f).is_err());
    }

    #[test]
    fn conditions_round_trip() {
        let r = ConditionReport {
            n: 4,
            energy: 1.0,
            planar_nn: 0.25,
            spectral_logn: 0.1,
            one_norm_h: 0.25,
            clt_ratio: 0.25,
            lindeberg_ratio: 0.35,
            be_quantity: 1.7,
            be_lambda_bound: 0.5,
        };
        let text = conditions_csv(&[r]);
        assert!(text.starts_with("n,energy,planar_nn,spectral_logn,one_norm_h,clt_ratio,lindeberg_ratio,be_quantity,be_lambda_bound\n"));
        assert_eq!(parse_conditions_csv(&text).unwrap(), vec![r]);
    }
}
