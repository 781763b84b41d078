//! CSV ingestion, compositional and standardising preprocessing, and the
//! on-disk result bundle.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same `f64`, so every file round-trips bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{center, BssEstimate, FieldSample};
use crate::kernels::LocationSet;
use crate::linalg::{gram_sqrt_pair, Matrix};
use crate::metrics::gap_report;

pub const EIGENVALUES_FILE: &str = "eigenvalues.csv";
pub const OMEGA_HAT_FILE: &str = "omega_hat.csv";
pub const GAMMA_HAT_FILE: &str = "gamma_hat.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const META_FILE: &str = "meta.json";

/// Shortest representation that parses back to exactly `x`.
pub fn format_f64(x: f64) -> String {
    let s = format!("{x:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

/// Named coordinate and value columns read from a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub coord_names: Vec<String>,
    pub value_names: Vec<String>,
    /// `n × d`
    pub coords: Matrix,
    /// `n × q`
    pub values: Matrix,
}

impl RawTable {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn locations(&self) -> Result<LocationSet> {
        LocationSet::new(self.coords.cols(), self.coords.as_slice().to_vec()).map_err(|e| match e {
            Error::InvalidInput(msg) if msg.contains("coincide") => Error::InvalidInput(
                msg.replacen("sites", "data rows", 1)
                    .replace("coincide", "have identical coordinates"),
            ),
            other => other,
        })
    }

    pub fn to_sample(&self) -> Result<FieldSample> {
        FieldSample::new(self.locations()?, self.values.clone())
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Column names of a headed CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    Ok(header.iter().map(str::to_owned).collect())
}

/// Reads the named columns of a headed CSV file, keeping row order.
///
/// Rows are reported 1-based, counting data rows after the header.
pub fn read_csv(path: &Path, coord_names: &[&str], value_names: &[&str]) -> Result<RawTable> {
    if coord_names.is_empty() || value_names.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one coordinate and one value column are required".into(),
        ));
    }
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let locate = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, format!("missing column \"{name}\"")))
    };
    let coord_idx = coord_names.iter().map(|n| locate(n)).collect::<Result<Vec<_>>>()?;
    let value_idx = value_names.iter().map(|n| locate(n)).collect::<Result<Vec<_>>>()?;

    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut n = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        n += 1;
        for (idx, out) in [(&coord_idx, &mut coords), (&value_idx, &mut values)] {
            for &c in idx {
                let cell = record.get(c).unwrap_or("");
                let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    Error::parse(
                        path,
                        format!("row {n}, column \"{}\": cannot use \"{cell}\" as a finite number", &header[c]),
                    )
                })?;
                out.push(v);
            }
        }
    }
    if n < 2 {
        return Err(Error::parse(path, format!("need at least 2 data rows, found {n}")));
    }
    let table = RawTable {
        coord_names: coord_names.iter().map(|s| s.to_string()).collect(),
        value_names: value_names.iter().map(|s| s.to_string()).collect(),
        coords: Matrix::from_vec(n, coord_idx.len(), coords)?,
        values: Matrix::from_vec(n, value_idx.len(), values)?,
    };
    table.locations()?;
    Ok(table)
}

/// Orthonormal `D × (D−1)` normalised Helmert contrasts: column `j` has
/// `1/√(j(j+1))` in its first `j` rows and `−j/√(j(j+1))` in row `j+1`.
pub fn helmert_basis(parts: usize) -> Result<Matrix> {
    if parts < 2 {
        return Err(Error::InvalidInput(format!(
            "a composition needs at least 2 parts, got {parts}"
        )));
    }
    Ok(Matrix::from_fn(parts, parts - 1, |r, c| {
        let j = (c + 1) as f64;
        let norm = (j * (j + 1.0)).sqrt();
        match r.cmp(&(c + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -j / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    }))
}

/// Isometric log-ratio coordinates `y_i = Vᵀ log x_i` of each row.
pub fn ilr_transform(compositions: &Matrix) -> Result<Matrix> {
    let basis = helmert_basis(compositions.cols())?;
    let mut logs = compositions.clone();
    for i in 0..logs.rows() {
        for (j, x) in logs.row_mut(i).iter_mut().enumerate() {
            if !(*x > 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!(
                    "log-ratio needs positive parts: row {}, column {} is {x}",
                    i + 1,
                    j + 1
                )));
            }
            *x = x.ln();
        }
    }
    Ok(logs.matmul(&basis))
}

/// `x ↦ Σ̂^{−1/2}(x − x̄)` with the `n⁻¹` covariance.
pub fn standardize(data: &FieldSample) -> Result<FieldSample> {
    let c = center(data);
    let (_, inv) = gram_sqrt_pair(c.values()).map_err(|e| match e {
        Error::NotPositiveDefinite { eigenvalue, .. } => Error::Singular(format!(
            "cannot standardise: sample covariance has eigenvalue {eigenvalue:e}"
        )),
        other => other,
    })?;
    data.with_values(c.values().matmul(&inv))
}

/// Provenance written to `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    /// RFC 3339 UTC, present only when `SOURCE_DATE_EPOCH` is set so that
    /// reruns stay byte-identical.
    pub timestamp: Option<String>,
    /// SHA-256 of the compact JSON of `config`.
    pub config_hash: String,
    pub config: Value,
    #[serde(default)]
    pub extra: Value,
    #[serde(default)]
    pub files: Vec<String>,
}

impl RunMeta {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Self {
        Self {
            tool: "spatial-bss".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            timestamp: reproducible_timestamp(),
            config_hash: config_hash(&config),
            config,
            extra: Value::Null,
            files: Vec::new(),
        }
    }
}

/// Hex SHA-256 of the compact serialisation of `config`.
pub fn config_hash(config: &Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `SOURCE_DATE_EPOCH` rendered as RFC 3339, if set and valid.
pub fn reproducible_timestamp() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    Some(rfc3339(secs))
}

fn rfc3339(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    // civil-from-days, proleptic Gregorian
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        rem % 3600 / 60,
        rem % 60
    )
}

/// Everything written for one estimate.
#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub lambda_hat: Vec<f64>,
    pub omega_hat: Matrix,
    pub gamma_hat: Matrix,
    pub coord_names: Vec<String>,
    pub locs: LocationSet,
    /// `n × p` IC scores.
    pub scores: Matrix,
    pub meta: RunMeta,
}

impl ResultBundle {
    pub fn new(
        est: &BssEstimate,
        data: &FieldSample,
        scores: Matrix,
        coord_names: Vec<String>,
        meta: RunMeta,
    ) -> Result<Self> {
        let p = est.p();
        if scores.rows() != data.n() || scores.cols() != p || coord_names.len() != data.locs().dim() {
            return Err(Error::DimensionMismatch(format!(
                "bundle of {} sites, {} coordinates and {p} components given {}x{} scores and {} coordinate names",
                data.n(),
                data.locs().dim(),
                scores.rows(),
                scores.cols(),
                coord_names.len()
            )));
        }
        Ok(Self {
            lambda_hat: est.lambda_hat.clone(),
            omega_hat: est.omega_hat.clone(),
            gamma_hat: est.gamma_hat.clone(),
            coord_names,
            locs: data.locs().clone(),
            scores,
            meta,
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_line<I: IntoIterator<Item = String>>(out: &mut String, cells: I) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

/// Headerless row-major CSV of a matrix.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        csv_line(&mut s, m.row(i).iter().map(|&v| format_f64(v)));
    }
    s
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    write_file(path, matrix_to_csv(m).as_bytes())
}

/// Table with a header row.
pub fn write_table_csv(path: &Path, header: &[String], rows: &Matrix) -> Result<()> {
    let mut s = String::new();
    csv_line(&mut s, header.iter().cloned());
    s.push_str(&matrix_to_csv(rows));
    write_file(path, s.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the bundle into `out_dir`, returning the paths written.
pub fn write_results(bundle: &ResultBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let p = bundle.lambda_hat.len();
    let report = gap_report(&bundle.lambda_hat)?;

    let mut eig = String::from("index,lambda_hat,gap\n");
    for (i, &l) in bundle.lambda_hat.iter().enumerate() {
        let gap = if i == 0 { String::new() } else { format_f64(report.gaps[i - 1]) };
        csv_line(&mut eig, [(i + 1).to_string(), format_f64(l), gap]);
    }

    let mut header = bundle.coord_names.clone();
    header.extend((1..=p).map(|j| format!("ic{j}")));
    let mut scores = String::new();
    csv_line(&mut scores, header);
    for i in 0..bundle.scores.rows() {
        let site = bundle.locs.site(i);
        csv_line(
            &mut scores,
            site.iter().chain(bundle.scores.row(i)).map(|&v| format_f64(v)),
        );
    }

    let files = [EIGENVALUES_FILE, OMEGA_HAT_FILE, GAMMA_HAT_FILE, SCORES_FILE, META_FILE];
    let mut meta = bundle.meta.clone();
    meta.files = files.iter().map(|s| s.to_string()).collect();
    let paths: Vec<PathBuf> = files.iter().map(|f| out_dir.join(f)).collect();
    write_file(&paths[0], eig.as_bytes())?;
    write_matrix_csv(&paths[1], &bundle.omega_hat)?;
    write_matrix_csv(&paths[2], &bundle.gamma_hat)?;
    write_file(&paths[3], scores.as_bytes())?;
    write_json(&paths[4], &meta)?;
    Ok(paths)
}

fn parse_cell(path: &Path, row: usize, col: usize, cell: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| {
        Error::parse(path, format!("row {row}, column {col}: cannot parse \"{cell}\""))
    })
}

/// Reads a headerless numeric CSV written by [`write_matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell(path, i + 1, j + 1, c))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "file holds no rows"));
    }
    Matrix::from_rows(&rows).map_err(|_| Error::parse(path, "rows differ in length"))
}

/// Header and numeric body of a headed CSV.
pub fn read_table_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = csv_reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut data = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        n += 1;
        for (j, c) in rec.iter().enumerate() {
            data.push(parse_cell(path, n, j + 1, c)?);
        }
    }
    let m = Matrix::from_vec(n, header.len(), data)
        .map_err(|_| Error::parse(path, "rows differ in length from the header"))?;
    Ok((header, m))
}

/// Eigenvalues from `eigenvalues.csv`, in file order.
pub fn read_eigenvalues(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = header
        .iter()
        .position(|h| h == "lambda_hat")
        .ok_or_else(|| Error::parse(path, "missing column \"lambda_hat\""))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        out.push(parse_cell(path, i + 1, col + 1, rec.get(col).unwrap_or(""))?);
    }
    if out.is_empty() {
        return Err(Error::parse(path, "no eigenvalues"));
    }
    Ok(out)
}

pub fn read_meta(path: &Path) -> Result<RunMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// The parts of a bundle directory needed for diagnostics.
#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub lambda_hat: Vec<f64>,
    pub omega_hat: Matrix,
    pub gamma_hat: Matrix,
    pub meta: Option<RunMeta>,
}

/// Reads a bundle directory; `meta.json` is optional.
pub fn read_bundle(dir: &Path) -> Result<LoadedBundle> {
    let lambda_hat = read_eigenvalues(&dir.join(EIGENVALUES_FILE))?;
    let p = lambda_hat.len();
    let mut mats = Vec::new();
    for name in [OMEGA_HAT_FILE, GAMMA_HAT_FILE] {
        let path = dir.join(name);
        let m = read_matrix_csv(&path)?;
        if m.rows() != p || m.cols() != p {
            return Err(Error::parse(
                &path,
                format!("expected {p}x{p} to match {EIGENVALUES_FILE}, found {}x{}", m.rows(), m.cols()),
            ));
        }
        mats.push(m);
    }
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() { Some(read_meta(&meta_path)?) } else { None };
    let gamma_hat = mats.pop().unwrap();
    let omega_hat = mats.pop().unwrap();
    Ok(LoadedBundle {
        lambda_hat,
        omega_hat,
        gamma_hat,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{estimate, sample_cov};
    use crate::kernels::decile_boundaries;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0, -2.5e-300, 1e300, 1.0 / 3.0, f64::MIN_POSITIVE, 123456789.0] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(format_f64(3.0), "3");
        assert_eq!(format_f64(0.25), "0.25");
    }

    #[test]
    fn reads_named_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(&dir, "a.csv", "id,x,y,a,b\n1,0,0,1.5,2\n2,1,0,2.5,3\n3,0,1,-1,4\n");
        let t = read_csv(&path, &["x", "y"], &["b", "a"]).unwrap();
        assert_eq!(t.n(), 3);
        assert_eq!(t.values.row(0), &[2.0, 1.5]);
        assert_eq!(t.coords.row(2), &[0.0, 1.0]);
        assert_eq!(t.to_sample().unwrap().p(), 2);
    }

    #[test]
    fn read_errors_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(&dir, "a.csv", "x,y,a\n0,0,1\n1,0,2\n");
        let err = read_csv(&path, &["x", "y"], &["missing"]).unwrap_err().to_string();
        assert!(err.contains("missing"), "{err}");

        let path = write_tmp(&dir, "b.csv", "x,y,a\n0,0,1\n1,0,NaN\n");
        let err = read_csv(&path, &["x", "y"], &["a"]).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("\"a\""), "{err}");

        let path = write_tmp(&dir, "c.csv", "x,y,a\n0,0,1\n1,0,2\n0,0,3\n");
        let err = read_csv(&path, &["x", "y"], &["a"]).unwrap_err().to_string();
        assert!(err.contains("rows 1 and 3"), "{err}");

        let err = read_csv(&dir.path().join("none.csv"), &["x"], &["a"]).unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Io);
    }

    #[test]
    fn helmert_is_orthonormal_contrast() {
        for d in 2..8 {
            let v = helmert_basis(d).unwrap();
            assert!(v.t_matmul(&v).max_abs_diff(&Matrix::identity(d - 1)) < 1e-14);
            for j in 0..d - 1 {
                assert!(v.col(j).iter().sum::<f64>().abs() < 1e-14);
            }
        }
        assert!(helmert_basis(1).is_err());
    }

    #[test]
    fn ilr_examples() {
        let y = ilr_transform(&Matrix::from_rows(&[[3.0, 3.0], [std::f64::consts::E, 1.0]]).unwrap()).unwrap();
        assert!(y[(0, 0)].abs() < 1e-15);
        assert!((y[(1, 0)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(y.cols(), 1);
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0]]).unwrap();
        let scaled = x.scale(7.5);
        assert!(ilr_transform(&x).unwrap().max_abs_diff(&ilr_transform(&scaled).unwrap()) < 1e-14);
        let err = ilr_transform(&Matrix::from_rows(&[[1.0, 0.0]]).unwrap()).unwrap_err().to_string();
        assert!(err.contains("row 1, column 2"), "{err}");
    }

    proptest! {
        #[test]
        fn ilr_norm_is_aitchison_norm(row in prop::collection::vec(0.01..100.0f64, 2..10)) {
            let d = row.len();
            let y = ilr_transform(&Matrix::from_vec(1, d, row.clone()).unwrap()).unwrap();
            let ilr_sq: f64 = y.row(0).iter().map(|v| v * v).sum();
            // centred log-ratio
            let logs: Vec<f64> = row.iter().map(|x| x.ln()).collect();
            let mean = logs.iter().sum::<f64>() / d as f64;
            let clr_sq: f64 = logs.iter().map(|l| (l - mean).powi(2)).sum();
            prop_assert!((ilr_sq - clr_sq).abs() <= 1e-10 * clr_sq.max(1.0));
        }
    }

    fn sample(values: Matrix) -> FieldSample {
        let n = values.rows();
        let locs = LocationSet::new(1, (0..n).map(|i| i as f64).collect()).unwrap();
        FieldSample::new(locs, values).unwrap()
    }

    #[test]
    fn standardize_examples() {
        let s = standardize(&sample(Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap())).unwrap();
        let r = (1.5f64).sqrt();
        let want = [-r, 0.0, r];
        for (i, w) in want.iter().enumerate() {
            assert!((s.values()[(i, 0)] - w).abs() < 1e-15);
        }
        let d = sample(Matrix::from_fn(30, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 + (i * j) as f64 * 0.1));
        let s1 = standardize(&d).unwrap();
        let cov = sample_cov(&center(&s1));
        assert!(cov.max_abs_diff(&Matrix::identity(3)) < 1e-10);
        assert!(s1.column_means().iter().all(|m| m.abs() < 1e-12));
        let s2 = standardize(&s1).unwrap();
        assert!(s2.values().max_abs_diff(s1.values()) < 1e-10);
        let twin = sample(Matrix::from_fn(5, 2, |i, _| i as f64));
        assert!(matches!(standardize(&twin), Err(Error::Singular(_))));
    }

    #[test]
    fn timestamp_format() {
        assert_eq!(rfc3339(0), "1970-01-01T00:00:00Z");
        assert_eq!(rfc3339(951_782_400), "2000-02-29T00:00:00Z");
        assert_eq!(rfc3339(1_700_000_000), "2023-11-14T22:13:20Z");
    }

    #[test]
    fn bundle_round_trip() {
        let d = sample(Matrix::from_fn(40, 2, |i, j| ((i * (j + 3)) % 7) as f64 + (i as f64 * 0.37).sin()));
        let bank = decile_boundaries(d.locs(), 3).unwrap();
        let est = estimate(&d, &bank).unwrap();
        let scores = crate::estimator::ic_scores(&est, &d).unwrap();
        let meta = RunMeta::new("estimate", Some(3), serde_json::json!({"k": 3}));
        let bundle = ResultBundle::new(&est, &d, scores, vec!["x".into()], meta).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_results(&bundle, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        assert!(files.iter().all(|f| f.exists()));
        let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        write_results(&bundle, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        assert_eq!(first, second);

        let back = read_bundle(dir.path()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.lambda_hat), bits(&est.lambda_hat));
        assert_eq!(back.omega_hat, est.omega_hat);
        assert_eq!(back.gamma_hat, est.gamma_hat);
        let meta = back.meta.unwrap();
        assert_eq!(meta.files.len(), 5);
        assert_eq!(meta.config_hash, config_hash(&serde_json::json!({"k": 3})));

        let (header, table) = read_table_csv(&dir.path().join(SCORES_FILE)).unwrap();
        assert_eq!(header, vec!["x", "ic1", "ic2"]);
        assert_eq!(table.rows(), 40);
    }
}
