//! Dataset ingestion and the reversible outcome/covariate scaling applied
//! before fitting.
//!
//! Outcomes are min-max mapped onto `[-0.5, 0.5]`; continuous and ordinal
//! covariates onto `[0, 1]`; a nominal column with `C` levels becomes `C - 1`
//! reference-coded dummies (level 1 is the reference).

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TREATMENT_COLUMN: &str = "treatment";
pub const OUTCOME_COLUMN: &str = "outcome";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Ordinal,
    Nominal,
}

/// Column declarations for a CSV file. Covariates not listed are continuous.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub nominal: Vec<String>,
    pub ordinal: Vec<String>,
}

impl Schema {
    pub fn kind_of(&self, name: &str) -> ColumnKind {
        if self.nominal.iter().any(|c| c == name) {
            ColumnKind::Nominal
        } else if self.ordinal.iter().any(|c| c == name) {
            ColumnKind::Ordinal
        } else {
            ColumnKind::Continuous
        }
    }
}

/// Raw (unscaled) covariates, outcomes and treatment labels.
///
/// Treatment labels are stored zero-based; files and the CLI use `1..=G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: DMatrix<f64>,
    outcome: DVector<f64>,
    treatment: Vec<usize>,
    n_groups: usize,
    column_names: Vec<String>,
    column_kinds: Vec<ColumnKind>,
}

impl Dataset {
    pub fn new(
        covariates: DMatrix<f64>,
        outcome: DVector<f64>,
        treatment: Vec<usize>,
        column_names: Vec<String>,
        column_kinds: Vec<ColumnKind>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        if n == 0 {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        if outcome.len() != n || treatment.len() != n {
            return Err(Error::Schema(format!(
                "length mismatch: {} covariate rows, {} outcomes, {} labels",
                n,
                outcome.len(),
                treatment.len()
            )));
        }
        if column_names.len() != covariates.ncols() || column_kinds.len() != covariates.ncols() {
            return Err(Error::Schema("column names/kinds do not match covariate width".into()));
        }
        for (row, v) in covariates.row_iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::MissingData {
                        row: row + 1,
                        column: column_names[j].clone(),
                    });
                }
            }
            if !outcome[row].is_finite() {
                return Err(Error::MissingData {
                    row: row + 1,
                    column: OUTCOME_COLUMN.into(),
                });
            }
        }
        for (j, kind) in column_kinds.iter().enumerate() {
            if *kind == ColumnKind::Nominal {
                for (row, &x) in covariates.column(j).iter().enumerate() {
                    if x < 1.0 || x.fract() != 0.0 {
                        return Err(Error::Schema(format!(
                            "nominal column `{}` row {}: level code {} is not an integer >= 1",
                            column_names[j],
                            row + 1,
                            x
                        )));
                    }
                }
            }
        }
        let n_groups = treatment.iter().max().map_or(0, |&g| g + 1);
        let mut counts = vec![0usize; n_groups];
        for &g in &treatment {
            counts[g] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Schema(format!(
                "treatment group {} has no subjects",
                empty + 1
            )));
        }
        Ok(Self {
            covariates,
            outcome,
            treatment,
            n_groups,
            column_names,
            column_kinds,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }
    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }
    pub fn n_groups(&self) -> usize {
        self.n_groups
    }
    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }
    pub fn outcome(&self) -> &DVector<f64> {
        &self.outcome
    }
    /// Zero-based treatment labels.
    pub fn treatment(&self) -> &[usize] {
        &self.treatment
    }
    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }
    pub fn column_kinds(&self) -> &[ColumnKind] {
        &self.column_kinds
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_groups];
        for &g in &self.treatment {
            counts[g] += 1;
        }
        counts
    }

    /// Subset of rows, keeping the group count of the parent dataset.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let covariates = self.covariates.select_rows(rows);
        let outcome = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.outcome[i]));
        let treatment = rows.iter().map(|&i| self.treatment[i]).collect::<Vec<_>>();
        let ds = Dataset::new(
            covariates,
            outcome,
            treatment,
            self.column_names.clone(),
            self.column_kinds.clone(),
        )?;
        if ds.n_groups != self.n_groups {
            return Err(Error::Schema(format!(
                "subset is missing treatment group {}",
                self.n_groups
            )));
        }
        Ok(ds)
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan")
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Err(Error::MissingData {
            row,
            column: column.to_string(),
        });
    }
    cell.parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })
}

fn parse_label(cell: &str, row: usize) -> Result<usize> {
    let v = parse_cell(cell, row, TREATMENT_COLUMN)?;
    if v.fract() != 0.0 || v < 1.0 {
        return Err(Error::Schema(format!(
            "row {row}: treatment label `{}` is not an integer in 1..G",
            cell.trim()
        )));
    }
    Ok(v as usize - 1)
}

/// Reads a CSV with a `treatment` column (1..G), an `outcome` column and
/// covariates in the remaining columns. Row order is preserved.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let t_col = header
        .iter()
        .position(|h| h == TREATMENT_COLUMN)
        .ok_or_else(|| Error::Schema(format!("no `{TREATMENT_COLUMN}` column")))?;
    let y_col = header
        .iter()
        .position(|h| h == OUTCOME_COLUMN)
        .ok_or_else(|| Error::Schema(format!("no `{OUTCOME_COLUMN}` column")))?;
    check_unique(&header)?;
    let cov_cols: Vec<usize> = (0..header.len()).filter(|&j| j != t_col && j != y_col).collect();
    check_schema_columns(schema, &header)?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {row} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        for &j in &cov_cols {
            x.push(parse_cell(&rec[j], row, &header[j])?);
        }
        y.push(parse_cell(&rec[y_col], row, OUTCOME_COLUMN)?);
        z.push(parse_label(&rec[t_col], row)?);
    }
    let names: Vec<String> = cov_cols.iter().map(|&j| header[j].clone()).collect();
    let kinds = names.iter().map(|n| schema.kind_of(n)).collect();
    let n = y.len();
    let covariates = DMatrix::from_row_slice(n, cov_cols.len(), &x);
    Dataset::new(covariates, DVector::from_vec(y), z, names, kinds)
}

fn check_schema_columns(schema: &Schema, header: &[String]) -> Result<()> {
    for name in schema.nominal.iter().chain(&schema.ordinal) {
        if !header.iter().any(|h| h == name) {
            return Err(Error::Schema(format!("declared column `{name}` not in header")));
        }
        if name == TREATMENT_COLUMN || name == OUTCOME_COLUMN {
            return Err(Error::Schema(format!("`{name}` cannot be declared as a covariate")));
        }
    }
    Ok(())
}

/// Reads covariate columns `names` (in that order) from a CSV; other columns
/// are ignored.
pub fn load_covariates(path: impl AsRef<Path>, names: &[String]) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let cols = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Schema(format!("covariate column `{n}` not in header")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut x = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (&j, name) in cols.iter().zip(names) {
            let cell = rec
                .get(j)
                .ok_or_else(|| Error::Schema(format!("row {} is too short", r + 1)))?;
            x.push(parse_cell(cell, r + 1, name)?);
        }
        n += 1;
    }
    Ok(DMatrix::from_row_slice(n, names.len(), &x))
}

/// Min-max map of the outcome onto `[-0.5, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTransform {
    pub y_min: f64,
    pub y_max: f64,
}

impl OutcomeTransform {
    pub fn fit(y: &[f64]) -> Result<Self> {
        let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(y_max > y_min) {
            return Err(Error::DegenerateOutcome);
        }
        Ok(Self { y_min, y_max })
    }

    /// The identity map, for data that is already on the scaled range.
    pub fn identity() -> Self {
        Self {
            y_min: -0.5,
            y_max: 0.5,
        }
    }

    pub fn range(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn apply(&self, y: f64) -> f64 {
        let r = self.range();
        (y - self.y_min - 0.5 * r) / r
    }

    pub fn apply_all(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.apply(v)).collect()
    }

    /// Linear inverse; values outside `[-0.5, 0.5]` extrapolate.
    pub fn invert(&self, f: f64) -> f64 {
        let r = self.range();
        f * r + self.y_min + 0.5 * r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnMap {
    Scaled { name: String, min: f64, max: f64 },
    Dummies { name: String, levels: usize },
}

/// Per-column scaling fitted on training covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTransform {
    pub columns: Vec<ColumnMap>,
}

impl CovariateTransform {
    pub fn fit(x: &DMatrix<f64>, names: &[String], kinds: &[ColumnKind]) -> Result<Self> {
        if names.len() != x.ncols() || kinds.len() != x.ncols() {
            return Err(Error::Argument("column names/kinds do not match covariate width".into()));
        }
        let mut columns = Vec::with_capacity(x.ncols());
        for (j, (name, kind)) in names.iter().zip(kinds).enumerate() {
            let col = x.column(j);
            match kind {
                ColumnKind::Continuous | ColumnKind::Ordinal => {
                    let min = col.min();
                    let max = col.max();
                    if !(max > min) {
                        return Err(Error::DegenerateColumn(name.clone()));
                    }
                    columns.push(ColumnMap::Scaled {
                        name: name.clone(),
                        min,
                        max,
                    });
                }
                ColumnKind::Nominal => {
                    let levels = col.max() as usize;
                    columns.push(ColumnMap::Dummies {
                        name: name.clone(),
                        levels,
                    });
                }
            }
        }
        Ok(Self { columns })
    }

    /// Expanded design width `P'`.
    pub fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnMap::Scaled { .. } => 1,
                ColumnMap::Dummies { levels, .. } => levels.saturating_sub(1),
            })
            .sum()
    }

    /// Names of the expanded design columns; dummies are `name=level`.
    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                ColumnMap::Scaled { name, .. } => out.push(name.clone()),
                ColumnMap::Dummies { name, levels } => {
                    out.extend((2..=*levels).map(|l| format!("{name}={l}")))
                }
            }
        }
        out
    }

    pub fn input_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnMap::Scaled { name, .. } | ColumnMap::Dummies { name, .. } => name.clone(),
            })
            .collect()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.columns.len() {
            return Err(Error::Schema(format!(
                "expected {} covariate columns, got {}",
                self.columns.len(),
                x.ncols()
            )));
        }
        let mut out = DMatrix::zeros(x.nrows(), self.width());
        let mut dst = 0;
        for (j, c) in self.columns.iter().enumerate() {
            match c {
                ColumnMap::Scaled { min, max, .. } => {
                    for i in 0..x.nrows() {
                        out[(i, dst)] = (x[(i, j)] - min) / (max - min);
                    }
                    dst += 1;
                }
                ColumnMap::Dummies { name, levels } => {
                    for i in 0..x.nrows() {
                        let v = x[(i, j)];
                        if v.fract() != 0.0 || v < 1.0 || v as usize > *levels {
                            return Err(Error::UnknownLevel {
                                column: name.clone(),
                                level: v as i64,
                            });
                        }
                        let level = v as usize;
                        if level >= 2 {
                            out[(i, dst + level - 2)] = 1.0;
                        }
                    }
                    dst += levels - 1;
                }
            }
        }
        Ok(out)
    }
}

/// Scaled design covariates, scaled outcome and zero-based labels: the input
/// every model and sampler routine works on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub z: Vec<usize>,
    pub n_groups: usize,
}

impl ScaledData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, z: Vec<usize>, n_groups: usize) -> Result<Self> {
        if x.nrows() != y.len() || z.len() != y.len() {
            return Err(Error::Argument("scaled data dimensions disagree".into()));
        }
        if let Some(&g) = z.iter().find(|&&g| g >= n_groups) {
            return Err(Error::Argument(format!("label {} exceeds G = {}", g + 1, n_groups)));
        }
        Ok(Self { x, y, z, n_groups })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Row indices of each treatment group.
    pub fn group_indices(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.n_groups];
        for (i, &g) in self.z.iter().enumerate() {
            idx[g].push(i);
        }
        idx
    }
}

/// A dataset together with the transforms fitted on it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: ScaledData,
    pub outcome: OutcomeTransform,
    pub covariates: CovariateTransform,
}

impl Prepared {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let outcome = OutcomeTransform::fit(ds.outcome().as_slice())?;
        let covariates = CovariateTransform::fit(ds.covariates(), ds.column_names(), ds.column_kinds())?;
        let data = Self::scale_with(ds, &outcome, &covariates)?;
        Ok(Self {
            data,
            outcome,
            covariates,
        })
    }

    /// Scales a dataset with already-fitted transforms (e.g. a test split).
    pub fn scale_with(
        ds: &Dataset,
        outcome: &OutcomeTransform,
        covariates: &CovariateTransform,
    ) -> Result<ScaledData> {
        let x = covariates.apply(ds.covariates())?;
        let y = DVector::from_vec(outcome.apply_all(ds.outcome().as_slice()));
        ScaledData::new(x, y, ds.treatment().to_vec(), ds.n_groups())
    }
}

/// Names must be unique; duplicated covariate names make the schema ambiguous.
pub(crate) fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::Schema(format!("duplicate column `{n}`")));
        }
    }
    Ok(())
}
