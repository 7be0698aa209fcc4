//! Paired datasets `(X, Y)`: CSV ingestion against a JSON schema sidecar,
//! one-hot expansion of categorical covariates, seeded train/test splits and
//! column standardization.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Covariate,
    Response,
}

/// One column of the schema sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    pub role: Role,
}

impl ColumnSchema {
    pub fn continuous(name: &str, role: Role) -> Self {
        ColumnSchema {
            name: name.to_string(),
            kind: ColumnKind::Continuous,
            levels: None,
            role,
        }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        ColumnSchema {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
            role: Role::Covariate,
        }
    }
}

/// Schema sidecar: `{"columns": [{name, kind, levels?, role}, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnSchema>,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.columns.iter().any(|c| c.role == Role::Response) {
            return bad("schema needs at least one response column".into());
        }
        let mut names = HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return bad(format!("duplicate column `{}`", c.name));
            }
            match (c.kind, &c.levels) {
                (ColumnKind::Categorical, Some(levels)) => {
                    if levels.is_empty() {
                        return bad(format!("categorical column `{}` has no levels", c.name));
                    }
                    let uniq: HashSet<_> = levels.iter().collect();
                    if uniq.len() != levels.len() {
                        return bad(format!("categorical column `{}` repeats a level", c.name));
                    }
                    if c.role == Role::Response {
                        return bad(format!("response `{}` must be continuous", c.name));
                    }
                }
                (ColumnKind::Categorical, None) => {
                    return bad(format!("categorical column `{}` needs levels", c.name))
                }
                (ColumnKind::Continuous, Some(_)) => {
                    return bad(format!("continuous column `{}` must not list levels", c.name))
                }
                (ColumnKind::Continuous, None) => {}
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: DatasetSchema = serde_json::from_str(&s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// How a matrix column was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "encoding")]
pub enum ColumnEncoding {
    Continuous,
    /// Level index stored as a float.
    Categorical { levels: Vec<String> },
    /// 0/1 indicator for one level of a one-hot expanded column.
    Indicator { source: String, level: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    #[serde(flatten)]
    pub encoding: ColumnEncoding,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnMeta {
            name: name.into(),
            encoding: ColumnEncoding::Continuous,
        }
    }
}

/// Covariates `x` (n x d) paired row-wise with responses `y` (n x q).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub x_columns: Vec<ColumnMeta>,
    pub y_columns: Vec<ColumnMeta>,
    /// Where the rows came from; carried through splits and subsets.
    pub provenance: String,
}

impl PairedDataset {
    pub fn new(
        x: Array2<f64>,
        y: Array2<f64>,
        x_columns: Vec<ColumnMeta>,
        y_columns: Vec<ColumnMeta>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows",
                expected: x.nrows(),
                actual: y.nrows(),
            });
        }
        if x.ncols() != x_columns.len() || y.ncols() != y_columns.len() {
            return Err(Error::Contract("column metadata does not match matrix widths".into()));
        }
        if y.ncols() == 0 {
            return Err(Error::Contract("dataset needs at least one response".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Contract("dataset entries must be finite".into()));
        }
        Ok(PairedDataset {
            x,
            y,
            x_columns,
            y_columns,
            provenance: provenance.into(),
        })
    }

    /// Dataset with anonymous continuous columns `x1..xd`, `y` / `y1..yq`.
    pub fn from_matrices(x: Array2<f64>, y: Array2<f64>, provenance: impl Into<String>) -> Result<Self> {
        let xc = (1..=x.ncols()).map(|j| ColumnMeta::continuous(format!("x{j}"))).collect();
        let yc = if y.ncols() == 1 {
            vec![ColumnMeta::continuous("y")]
        } else {
            (1..=y.ncols()).map(|j| ColumnMeta::continuous(format!("y{j}"))).collect()
        };
        Self::new(x, y, xc, yc, provenance)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn has_categorical(&self) -> bool {
        self.x_columns
            .iter()
            .any(|c| matches!(c.encoding, ColumnEncoding::Categorical { .. }))
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize], provenance: impl Into<String>) -> PairedDataset {
        PairedDataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            x_columns: self.x_columns.clone(),
            y_columns: self.y_columns.clone(),
            provenance: provenance.into(),
        }
    }

    /// Schema that [`load_csv`] accepts for a file written by [`write_csv`].
    /// Indicator columns are written as plain continuous columns.
    pub fn schema(&self) -> DatasetSchema {
        let mut columns = Vec::with_capacity(self.d() + self.q());
        for c in &self.x_columns {
            columns.push(match &c.encoding {
                ColumnEncoding::Categorical { levels } => ColumnSchema {
                    name: c.name.clone(),
                    kind: ColumnKind::Categorical,
                    levels: Some(levels.clone()),
                    role: Role::Covariate,
                },
                _ => ColumnSchema::continuous(&c.name, Role::Covariate),
            });
        }
        for c in &self.y_columns {
            columns.push(ColumnSchema::continuous(&c.name, Role::Response));
        }
        DatasetSchema { columns }
    }
}

fn parse_error(path: &Path, line: usize, column: &str, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    }
}

/// Parse a headered CSV against `schema`. Columns are matched by name; extra
/// file columns are ignored. Categorical cells become level indices.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<PairedDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Schema {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let headers = rdr.headers()?.clone();
    let mut positions = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let pos = headers.iter().position(|h| h.trim() == c.name).ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            message: format!("missing column `{}`", c.name),
        })?;
        positions.push(pos);
    }

    let covariates: Vec<usize> = (0..schema.columns.len())
        .filter(|&i| schema.columns[i].role == Role::Covariate)
        .collect();
    let responses: Vec<usize> = (0..schema.columns.len())
        .filter(|&i| schema.columns[i].role == Role::Response)
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut row = vec![0.0; schema.columns.len()];
        for (i, c) in schema.columns.iter().enumerate() {
            let cell = rec.get(positions[i]).unwrap_or("").trim();
            row[i] = match c.kind {
                ColumnKind::Continuous => {
                    let v: f64 = cell.parse().map_err(|_| {
                        parse_error(path, line, &c.name, format!("`{cell}` is not a number"))
                    })?;
                    if !v.is_finite() {
                        return Err(parse_error(path, line, &c.name, format!("non-finite value `{cell}`")));
                    }
                    v
                }
                ColumnKind::Categorical => {
                    let levels = c.levels.as_ref().expect("validated");
                    levels.iter().position(|l| l == cell).ok_or_else(|| {
                        parse_error(path, line, &c.name, format!("unknown level `{cell}`"))
                    })? as f64
                }
            };
        }
        xs.extend(covariates.iter().map(|&i| row[i]));
        ys.extend(responses.iter().map(|&i| row[i]));
        n += 1;
    }

    let x = Array2::from_shape_vec((n, covariates.len()), xs).expect("row-major fill");
    let y = Array2::from_shape_vec((n, responses.len()), ys).expect("row-major fill");
    let meta = |i: usize| {
        let c = &schema.columns[i];
        ColumnMeta {
            name: c.name.clone(),
            encoding: match c.kind {
                ColumnKind::Continuous => ColumnEncoding::Continuous,
                ColumnKind::Categorical => ColumnEncoding::Categorical {
                    levels: c.levels.clone().expect("validated"),
                },
            },
        }
    };
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    PairedDataset::new(
        x,
        y,
        covariates.iter().map(|&i| meta(i)).collect(),
        responses.iter().map(|&i| meta(i)).collect(),
        format!("csv:{file}"),
    )
}

/// Render a dataset as CSV text: covariates then responses, categorical
/// cells as level names, floats in shortest round-trip form.
pub fn to_csv_bytes(ds: &PairedDataset) -> Result<Vec<u8>> {
    let header: Vec<&str> = ds
        .x_columns
        .iter()
        .chain(&ds.y_columns)
        .map(|c| c.name.as_str())
        .collect();
    let rows = (0..ds.n()).map(|i| {
        let mut row = Vec::with_capacity(ds.d() + ds.q());
        for (j, c) in ds.x_columns.iter().enumerate() {
            let v = ds.x[[i, j]];
            row.push(match &c.encoding {
                ColumnEncoding::Categorical { levels } => levels[v as usize].clone(),
                _ => v.to_string(),
            });
        }
        row.extend(ds.y.row(i).iter().map(|v| v.to_string()));
        row
    });
    crate::io::csv_bytes(&header, rows)
}

pub fn write_csv(ds: &PairedDataset, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &to_csv_bytes(ds)?)
}

/// Expand every categorical covariate with `L` levels into `L` indicator
/// columns, in place of the original column.
pub fn one_hot(ds: &PairedDataset) -> Result<PairedDataset> {
    if !ds.has_categorical() {
        return Err(Error::Contract("one_hot needs at least one categorical covariate".into()));
    }
    let mut cols = Vec::new();
    let mut meta = Vec::new();
    for (j, c) in ds.x_columns.iter().enumerate() {
        match &c.encoding {
            ColumnEncoding::Categorical { levels } => {
                for (k, level) in levels.iter().enumerate() {
                    cols.push(ds.x.column(j).mapv(|v| if v as usize == k { 1.0 } else { 0.0 }));
                    meta.push(ColumnMeta {
                        name: format!("{}={}", c.name, level),
                        encoding: ColumnEncoding::Indicator {
                            source: c.name.clone(),
                            level: level.clone(),
                        },
                    });
                }
            }
            _ => {
                cols.push(ds.x.column(j).to_owned());
                meta.push(c.clone());
            }
        }
    }
    let views: Vec<_> = cols.iter().map(|c| c.view().insert_axis(Axis(1))).collect();
    let x = ndarray::concatenate(Axis(1), &views).expect("equal row counts");
    PairedDataset::new(x, ds.y.clone(), meta, ds.y_columns.clone(), ds.provenance.clone())
}

/// Seeded random split; the first `floor(fraction * n)` permuted rows train.
pub fn split(ds: &PairedDataset, train_fraction: f64, seed: u64) -> Result<(PairedDataset, PairedDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n = ds.n();
    if n < 2 {
        return Err(Error::Contract(format!("cannot split {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    let n_train = (train_fraction * n as f64).floor() as usize;
    let tag = format!("{}|split(seed={seed},frac={train_fraction})", ds.provenance);
    Ok((
        ds.select(&idx[..n_train], format!("{tag}:train")),
        ds.select(&idx[n_train..], format!("{tag}:test")),
    ))
}

/// Per-column affine map to zero mean and unit (population) variance.
/// Constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: ArrayView2<f64>) -> Self {
        let n = data.nrows() as f64;
        let mut mean = Vec::with_capacity(data.ncols());
        let mut scale = Vec::with_capacity(data.ncols());
        for col in data.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(m);
            scale.push(if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let mut out = data.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let mut out = data.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn abalone_schema() -> DatasetSchema {
        DatasetSchema {
            columns: vec![
                ColumnSchema::categorical("sex", &["F", "M", "I"]),
                ColumnSchema::continuous("length", Role::Covariate),
                ColumnSchema::continuous("rings", Role::Response),
            ],
        }
    }

    fn write_tmp(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("data.csv");
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_three_rows_with_level_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "sex,length,rings\nM,0.455,15\nF,0.53,9\nI,0.33,7\n");
        let ds = load_csv(&p, &abalone_schema()).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.x.column(0).to_vec(), vec![1.0, 0.0, 2.0]);
        assert_eq!(ds.y.column(0).to_vec(), vec![15.0, 9.0, 7.0]);
    }

    #[test]
    fn unknown_level_names_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "sex,length,rings\nM,0.455,15\nX,0.53,9\n");
        match load_csv(&p, &abalone_schema()).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "sex");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_non_numeric_cells() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["NaN", "inf", "-Infinity", "abc"] {
            let p = write_tmp(&dir, &format!("sex,length,rings\nM,{bad},15\n"));
            assert!(matches!(load_csv(&p, &abalone_schema()), Err(Error::Parse { line: 2, .. })), "{bad}");
        }
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "sex,rings\nM,15\n");
        assert!(matches!(load_csv(&p, &abalone_schema()), Err(Error::Schema { .. })));
    }

    #[test]
    fn schema_validation() {
        let mut s = abalone_schema();
        s.columns.retain(|c| c.role != Role::Response);
        assert!(s.validate().is_err());
        let s = DatasetSchema {
            columns: vec![
                ColumnSchema::categorical("sex", &["F", "F"]),
                ColumnSchema::continuous("rings", Role::Response),
            ],
        };
        assert!(s.validate().is_err());
        let json = r#"{"columns":[{"name":"sex","kind":"categorical","levels":["F","M","I"],"role":"covariate"},
                     {"name":"rings","kind":"continuous","role":"response"}]}"#;
        let s: DatasetSchema = serde_json::from_str(json).unwrap();
        s.validate().unwrap();
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "sex,length,rings\nM,0.455,15\nF,0.1234567890123,9\nI,0.33,7\n");
        let ds = load_csv(&p, &abalone_schema()).unwrap();
        let out = dir.path().join("out.csv");
        write_csv(&ds, &out).unwrap();
        let back = load_csv(&out, &ds.schema()).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
        assert_eq!(back.x_columns, ds.x_columns);
    }

    #[test]
    fn one_hot_expands_levels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "sex,length,rings\nM,0.455,15\nF,0.53,9\nI,0.33,7\n");
        let ds = one_hot(&load_csv(&p, &abalone_schema()).unwrap()).unwrap();
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.x.row(0).to_vec(), vec![0.0, 1.0, 0.0, 0.455]);
        for row in ds.x.rows() {
            assert_eq!(row.iter().take(3).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn one_hot_of_ten_levels_is_a_unit_vector() {
        let levels: Vec<String> = (0..10).map(|i| i.to_string()).collect();
        let ds = PairedDataset::new(
            array![[3.0]],
            array![[0.0]],
            vec![ColumnMeta {
                name: "label".into(),
                encoding: ColumnEncoding::Categorical { levels },
            }],
            vec![ColumnMeta::continuous("y")],
            "t",
        )
        .unwrap();
        let oh = one_hot(&ds).unwrap();
        let mut e3 = vec![0.0; 10];
        e3[3] = 1.0;
        assert_eq!(oh.x.row(0).to_vec(), e3);
    }

    #[test]
    fn one_hot_without_categoricals_is_rejected() {
        let ds = PairedDataset::from_matrices(array![[1.0]], array![[2.0]], "t").unwrap();
        assert!(one_hot(&ds).is_err());
    }

    #[test]
    fn split_sizes_and_partition() {
        let n = 4177;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let ds = PairedDataset::from_matrices(x, Array2::zeros((n, 1)), "t").unwrap();
        let (tr, te) = split(&ds, 0.9, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (3759, 418));
        let mut all: Vec<usize> = tr.x.iter().chain(te.x.iter()).map(|&v| v as usize).collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        let (tr2, _) = split(&ds, 0.9, 3).unwrap();
        assert_eq!(tr.x, tr2.x);
        assert!(split(&ds.select(&[0], "one"), 0.5, 0).is_err());
        assert!(split(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn standardizer_round_trip_and_constant_columns() {
        let data = array![[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]];
        let s = Standardizer::fit(data.view());
        assert_eq!(s.scale[1], 1.0);
        let z = s.apply(data.view());
        assert!((z.column(0).sum()).abs() < 1e-12);
        let back = s.invert(z.view());
        for (a, b) in back.iter().zip(data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
