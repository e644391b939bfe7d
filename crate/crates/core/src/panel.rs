//! Two-group, two-period panel data: ingestion, validation and reshaping.
//!
//! The estimators only ever look at the cross-section `(ΔY, G, X)`; the
//! [`CrossSection`] type is that view and is what bootstrap resampling
//! operates on.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FdidError, Result};
use crate::numeric;

/// One unit of wide-form panel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub id: String,
    pub g: bool,
    pub y_pre: f64,
    pub y_post: f64,
    pub x: Vec<f64>,
}

impl UnitRecord {
    pub fn new(id: impl Into<String>, g: bool, y_pre: f64, y_post: f64, x: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            g,
            y_pre,
            y_post,
            x,
        }
    }

    pub fn delta(&self) -> f64 {
        self.y_post - self.y_pre
    }
}

/// Validated wide-form dataset. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    units: Vec<UnitRecord>,
    covariate_names: Vec<String>,
}

impl PanelDataset {
    pub fn new(units: Vec<UnitRecord>, covariate_names: Vec<String>) -> Result<Self> {
        if units.len() < 2 {
            return Err(FdidError::TooFewUnits(units.len()));
        }
        let p = covariate_names.len();
        let mut seen = HashSet::with_capacity(units.len());
        for (row, u) in units.iter().enumerate() {
            if !seen.insert(u.id.as_str()) {
                return Err(FdidError::DuplicateId(u.id.clone()));
            }
            if u.x.len() != p {
                return Err(FdidError::CovariateLength {
                    id: u.id.clone(),
                    got: u.x.len(),
                    expected: p,
                });
            }
            if !u.y_pre.is_finite() {
                return Err(FdidError::MissingValue {
                    column: "y_pre".into(),
                    row,
                });
            }
            if !u.y_post.is_finite() {
                return Err(FdidError::MissingValue {
                    column: "y_post".into(),
                    row,
                });
            }
            if let Some(j) = u.x.iter().position(|v| !v.is_finite()) {
                return Err(FdidError::MissingValue {
                    column: covariate_names[j].clone(),
                    row,
                });
            }
        }
        let n1 = units.iter().filter(|u| u.g).count();
        if n1 == 0 {
            return Err(FdidError::EmptyGroup(1));
        }
        if n1 == units.len() {
            return Err(FdidError::EmptyGroup(0));
        }
        Ok(Self {
            units,
            covariate_names,
        })
    }

    pub fn units(&self) -> &[UnitRecord] {
        &self.units
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn n1(&self) -> usize {
        self.units.iter().filter(|u| u.g).count()
    }

    pub fn n0(&self) -> usize {
        self.n() - self.n1()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    /// Index of a covariate column by name.
    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| FdidError::MissingColumn(name.to_string()))
    }

    /// Keep only the named covariates, in the given order.
    pub fn select_covariates(&self, names: &[String]) -> Result<PanelDataset> {
        let idx = names
            .iter()
            .map(|n| self.covariate_index(n))
            .collect::<Result<Vec<_>>>()?;
        let units = self
            .units
            .iter()
            .map(|u| UnitRecord {
                x: idx.iter().map(|&j| u.x[j]).collect(),
                ..u.clone()
            })
            .collect();
        Ok(PanelDataset {
            units,
            covariate_names: names.to_vec(),
        })
    }

    /// Copy with each outcome passed through `f(y)`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> PanelDataset {
        let units = self
            .units
            .iter()
            .map(|u| UnitRecord {
                y_pre: f(u.y_pre),
                y_post: f(u.y_post),
                ..u.clone()
            })
            .collect();
        PanelDataset {
            units,
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Copy with `g` replaced by `1 - g`.
    pub fn swap_groups(&self) -> PanelDataset {
        let units = self
            .units
            .iter()
            .map(|u| UnitRecord {
                g: !u.g,
                ..u.clone()
            })
            .collect();
        PanelDataset {
            units,
            covariate_names: self.covariate_names.clone(),
        }
    }

    pub fn cross_section(&self) -> CrossSection {
        let p = self.p();
        let mut x = vec![Vec::with_capacity(self.n()); p];
        for u in &self.units {
            for (col, v) in x.iter_mut().zip(&u.x) {
                col.push(*v);
            }
        }
        CrossSection {
            delta: self.units.iter().map(UnitRecord::delta).collect(),
            g: self.units.iter().map(|u| u.g).collect(),
            x,
            covariate_names: self.covariate_names.clone(),
        }
    }
}

/// ΔY_i = Y_post − Y_pre for every unit, in dataset order.
pub fn delta(dataset: &PanelDataset) -> Vec<f64> {
    dataset.units.iter().map(UnitRecord::delta).collect()
}

/// The cross-sectional data `(ΔY, G, X)` the estimators consume.
///
/// Covariates are stored column-major: `x[j][i]` is covariate `j` of unit `i`.
/// Unlike [`PanelDataset`] this type carries no ids, so resampled copies may
/// repeat units.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub delta: Vec<f64>,
    pub g: Vec<bool>,
    pub x: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
}

impl CrossSection {
    pub fn new(
        delta: Vec<f64>,
        g: Vec<bool>,
        x: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        if g.len() != delta.len() || x.iter().any(|c| c.len() != delta.len()) {
            return Err(FdidError::InvalidArgument(
                "cross-section columns differ in length".into(),
            ));
        }
        if x.len() != covariate_names.len() {
            return Err(FdidError::InvalidArgument(
                "covariate names do not match covariate columns".into(),
            ));
        }
        Ok(Self {
            delta,
            g,
            x,
            covariate_names,
        })
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn n1(&self) -> usize {
        self.g.iter().filter(|&&g| g).count()
    }

    pub fn n0(&self) -> usize {
        self.n() - self.n1()
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn check_groups(&self) -> Result<()> {
        let n1 = self.n1();
        if n1 == 0 {
            Err(FdidError::EmptyGroup(1))
        } else if n1 == self.n() {
            Err(FdidError::EmptyGroup(0))
        } else {
            Ok(())
        }
    }

    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.x.iter().map(|c| c[i]).collect()
    }

    pub fn covariate_means(&self) -> Vec<f64> {
        self.x.iter().map(|c| numeric::mean(c)).collect()
    }

    /// Copy with every covariate shifted by `-shift[j]`.
    pub fn shifted(&self, shift: &[f64]) -> CrossSection {
        let x = self
            .x
            .iter()
            .zip(shift)
            .map(|(c, s)| c.iter().map(|v| v - s).collect())
            .collect();
        CrossSection { x, ..self.clone() }
    }

    /// Copy with covariates demeaned at their sample means.
    pub fn centered(&self) -> CrossSection {
        self.shifted(&self.covariate_means())
    }

    /// Draw the units at `indices` (repeats allowed).
    pub fn resample(&self, indices: &[usize]) -> CrossSection {
        CrossSection {
            delta: indices.iter().map(|&i| self.delta[i]).collect(),
            g: indices.iter().map(|&i| self.g[i]).collect(),
            x: self
                .x
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Keep only the named covariates.
    pub fn select_covariates(&self, names: &[String]) -> Result<CrossSection> {
        let x = names
            .iter()
            .map(|name| {
                self.covariate_names
                    .iter()
                    .position(|c| c == name)
                    .map(|j| self.x[j].clone())
                    .ok_or_else(|| FdidError::MissingColumn(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CrossSection {
            x,
            covariate_names: names.to_vec(),
            ..self.clone()
        })
    }

    pub fn without_covariates(&self) -> CrossSection {
        CrossSection {
            x: Vec::new(),
            covariate_names: Vec::new(),
            delta: self.delta.clone(),
            g: self.g.clone(),
        }
    }
}

/// One row of long-form panel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub id: String,
    pub time_label: String,
    pub y: f64,
    pub g: bool,
    pub x: Vec<f64>,
}

/// Long-form rows plus the covariate names they share.
#[derive(Debug, Clone, PartialEq)]
pub struct LongPanel {
    pub rows: Vec<LongRow>,
    pub covariate_names: Vec<String>,
}

impl LongPanel {
    /// Distinct time labels in order of first appearance.
    pub fn time_labels(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.time_label.as_str()))
            .map(|r| r.time_label.clone())
            .collect()
    }
}

/// Reshape long rows into a wide dataset using `pre_label` and `post_label`.
/// Rows at other time labels are ignored.
pub fn long_to_wide(long: &LongPanel, pre_label: &str, post_label: &str) -> Result<PanelDataset> {
    long_to_wide_window(long, pre_label, &[post_label.to_string()])
}

/// Like [`long_to_wide`], with `y_post` the mean over several post labels.
pub fn long_to_wide_window(
    long: &LongPanel,
    pre_label: &str,
    post_labels: &[String],
) -> Result<PanelDataset> {
    if post_labels.is_empty() {
        return Err(FdidError::InvalidArgument("no post period given".into()));
    }
    if let Some(l) = post_labels.iter().find(|l| l.as_str() == pre_label) {
        return Err(FdidError::ReferencePeriodReuse(l.clone()));
    }

    struct Acc<'a> {
        first: &'a LongRow,
        pre: Option<f64>,
        post: Vec<Option<f64>>,
    }

    let p = long.covariate_names.len();
    let mut order: Vec<&str> = Vec::new();
    let mut by_id: HashMap<&str, Acc> = HashMap::new();
    for row in &long.rows {
        if row.x.len() != p {
            return Err(FdidError::CovariateLength {
                id: row.id.clone(),
                got: row.x.len(),
                expected: p,
            });
        }
        let acc = by_id.entry(row.id.as_str()).or_insert_with(|| {
            order.push(row.id.as_str());
            Acc {
                first: row,
                pre: None,
                post: vec![None; post_labels.len()],
            }
        });
        if acc.first.g != row.g {
            return Err(FdidError::InconsistentStatic {
                id: row.id.clone(),
                column: "g".into(),
            });
        }
        if let Some(j) = (0..p).find(|&j| acc.first.x[j].to_bits() != row.x[j].to_bits()) {
            return Err(FdidError::InconsistentStatic {
                id: row.id.clone(),
                column: long.covariate_names[j].clone(),
            });
        }
        let slot = if row.time_label == pre_label {
            Some(&mut acc.pre)
        } else {
            post_labels
                .iter()
                .position(|l| *l == row.time_label)
                .map(|k| &mut acc.post[k])
        };
        if let Some(slot) = slot {
            if slot.replace(row.y).is_some() {
                return Err(FdidError::DuplicatePeriod {
                    id: row.id.clone(),
                    label: row.time_label.clone(),
                });
            }
        }
    }

    let mut units = Vec::with_capacity(order.len());
    for id in order {
        let acc = &by_id[id];
        let y_pre = acc.pre.ok_or_else(|| FdidError::UnbalancedUnit {
            id: id.to_string(),
            label: pre_label.to_string(),
        })?;
        let mut post = Vec::with_capacity(post_labels.len());
        for (k, v) in acc.post.iter().enumerate() {
            post.push(v.ok_or_else(|| FdidError::UnbalancedUnit {
                id: id.to_string(),
                label: post_labels[k].clone(),
            })?);
        }
        let y_post = if post.len() == 1 {
            post[0]
        } else {
            numeric::mean(&post)
        };
        units.push(UnitRecord {
            id: id.to_string(),
            g: acc.first.g,
            y_pre,
            y_post,
            x: acc.first.x.clone(),
        });
    }
    PanelDataset::new(units, long.covariate_names.clone())
}

/// Two rows per unit: `(id, pre_label)` then `(id, post_label)`.
pub fn wide_to_long(dataset: &PanelDataset, pre_label: &str, post_label: &str) -> LongPanel {
    let mut rows = Vec::with_capacity(2 * dataset.n());
    for u in dataset.units() {
        for (label, y) in [(pre_label, u.y_pre), (post_label, u.y_post)] {
            rows.push(LongRow {
                id: u.id.clone(),
                time_label: label.to_string(),
                y,
                g: u.g,
                x: u.x.clone(),
            });
        }
    }
    LongPanel {
        rows,
        covariate_names: dataset.covariate_names().to_vec(),
    }
}

/// Column names for a wide CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WideColumns {
    pub id: String,
    pub g: String,
    pub y_pre: String,
    pub y_post: String,
    pub covariates: Vec<String>,
}

impl Default for WideColumns {
    fn default() -> Self {
        Self {
            id: "id".into(),
            g: "g".into(),
            y_pre: "y_pre".into(),
            y_post: "y_post".into(),
            covariates: Vec::new(),
        }
    }
}

/// Column names for a long CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongColumns {
    pub id: String,
    pub time: String,
    pub y: String,
    pub g: String,
    pub covariates: Vec<String>,
}

impl Default for LongColumns {
    fn default() -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            y: "y".into(),
            g: "g".into(),
            covariates: Vec::new(),
        }
    }
}

struct CsvTable {
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl CsvTable {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::Fields)
            .from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { headers, records })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FdidError::MissingColumn(name.to_string()))
    }

    fn cell<'a>(&'a self, row: usize, col: usize, name: &str) -> Result<&'a str> {
        match self.records[row].get(col) {
            Some(s) if !s.is_empty() && !s.eq_ignore_ascii_case("na") => Ok(s),
            _ => Err(FdidError::MissingValue {
                column: name.to_string(),
                row: row + 1,
            }),
        }
    }

    fn number(&self, row: usize, col: usize, name: &str) -> Result<f64> {
        let s = self.cell(row, col, name)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(FdidError::NonNumeric {
                column: name.to_string(),
                row: row + 1,
                value: s.to_string(),
            }),
        }
    }

    fn binary(&self, row: usize, col: usize, name: &str) -> Result<bool> {
        let s = self.cell(row, col, name)?;
        match s.parse::<f64>() {
            Ok(0.0) => Ok(false),
            Ok(1.0) => Ok(true),
            _ => Err(FdidError::NonBinaryG {
                row: row + 1,
                value: s.to_string(),
            }),
        }
    }
}

/// Read a wide CSV (`id,g,y_pre,y_post,x1..xp` under the given names).
pub fn read_wide<R: Read>(reader: R, cols: &WideColumns) -> Result<PanelDataset> {
    let table = CsvTable::read(reader)?;
    let id = table.column(&cols.id)?;
    let g = table.column(&cols.g)?;
    let pre = table.column(&cols.y_pre)?;
    let post = table.column(&cols.y_post)?;
    let xs = cols
        .covariates
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let mut units = Vec::with_capacity(table.records.len());
    for row in 0..table.records.len() {
        units.push(UnitRecord {
            id: table.cell(row, id, &cols.id)?.to_string(),
            g: table.binary(row, g, &cols.g)?,
            y_pre: table.number(row, pre, &cols.y_pre)?,
            y_post: table.number(row, post, &cols.y_post)?,
            x: xs
                .iter()
                .zip(&cols.covariates)
                .map(|(&j, name)| table.number(row, j, name))
                .collect::<Result<_>>()?,
        });
    }
    PanelDataset::new(units, cols.covariates.clone())
}

pub fn load_wide(path: impl AsRef<Path>, cols: &WideColumns) -> Result<PanelDataset> {
    read_wide(std::fs::File::open(path)?, cols)
}

/// Read a long CSV (`id,time,y,g,x1..xp` under the given names).
pub fn read_long<R: Read>(reader: R, cols: &LongColumns) -> Result<LongPanel> {
    let table = CsvTable::read(reader)?;
    let id = table.column(&cols.id)?;
    let time = table.column(&cols.time)?;
    let y = table.column(&cols.y)?;
    let g = table.column(&cols.g)?;
    let xs = cols
        .covariates
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(table.records.len());
    for row in 0..table.records.len() {
        rows.push(LongRow {
            id: table.cell(row, id, &cols.id)?.to_string(),
            time_label: table.cell(row, time, &cols.time)?.to_string(),
            y: table.number(row, y, &cols.y)?,
            g: table.binary(row, g, &cols.g)?,
            x: xs
                .iter()
                .zip(&cols.covariates)
                .map(|(&j, name)| table.number(row, j, name))
                .collect::<Result<_>>()?,
        });
    }
    Ok(LongPanel {
        rows,
        covariate_names: cols.covariates.clone(),
    })
}

pub fn load_long(path: impl AsRef<Path>, cols: &LongColumns) -> Result<LongPanel> {
    read_long(std::fs::File::open(path)?, cols)
}

/// Write `id,g,y_pre,y_post,<covariates>`.
pub fn write_wide<W: std::io::Write>(writer: W, dataset: &PanelDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "g".into(), "y_pre".into(), "y_post".into()];
    header.extend(dataset.covariate_names().iter().cloned());
    w.write_record(&header)?;
    for u in dataset.units() {
        let mut rec = vec![
            u.id.clone(),
            (u.g as u8).to_string(),
            u.y_pre.to_string(),
            u.y_post.to_string(),
        ];
        rec.extend(u.x.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `id,time,y,g,<covariates>`.
pub fn write_long<W: std::io::Write>(writer: W, long: &LongPanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "time".into(), "y".into(), "g".into()];
    header.extend(long.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for r in &long.rows {
        let mut rec = vec![
            r.id.clone(),
            r.time_label.clone(),
            r.y.to_string(),
            (r.g as u8).to_string(),
        ];
        rec.extend(r.x.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the descriptive-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub variable: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl VariableSummary {
    fn of(variable: &str, values: &[f64]) -> Self {
        Self {
            variable: variable.to_string(),
            n: values.len(),
            mean: numeric::mean(values),
            median: numeric::median(values),
            sd: numeric::sample_sd(values),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// N, mean, median, SD (n − 1), min and max for g, y_pre, y_post and each covariate.
pub fn describe(dataset: &PanelDataset) -> Vec<VariableSummary> {
    let units = dataset.units();
    let g: Vec<f64> = units.iter().map(|u| u.g as u8 as f64).collect();
    let pre: Vec<f64> = units.iter().map(|u| u.y_pre).collect();
    let post: Vec<f64> = units.iter().map(|u| u.y_post).collect();
    let mut out = vec![
        VariableSummary::of("g", &g),
        VariableSummary::of("y_pre", &pre),
        VariableSummary::of("y_post", &post),
    ];
    for (j, name) in dataset.covariate_names().iter().enumerate() {
        let col: Vec<f64> = units.iter().map(|u| u.x[j]).collect();
        out.push(VariableSummary::of(name, &col));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR: &str = "id,g,y_pre,y_post\nu1,1,1,4\nu2,1,1,6\nu3,0,1,2\nu4,0,1,2\n";

    fn four() -> PanelDataset {
        read_wide(FOUR.as_bytes(), &WideColumns::default()).unwrap()
    }

    #[test]
    fn loads_four_unit_fixture() {
        let d = four();
        assert_eq!((d.n(), d.n1(), d.n0()), (4, 2, 2));
        assert_eq!(d.units()[0].id, "u1");
        assert_eq!(delta(&d), vec![3.0, 5.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_non_binary_g() {
        let csv = "id,g,y_pre,y_post\na,1,1,2\nb,2,1,2\n";
        let err = read_wide(csv.as_bytes(), &WideColumns::default()).unwrap_err();
        assert!(matches!(err, FdidError::NonBinaryG { row: 2, .. }));
        assert!(err.to_string().contains("non-binary baseline factor"));
    }

    #[test]
    fn rejects_empty_control_group() {
        let csv = "id,g,y_pre,y_post\na,1,1,2\nb,1,1,2\n";
        let err = read_wide(csv.as_bytes(), &WideColumns::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty group G=0");
    }

    #[test]
    fn rejects_missing_column_and_bad_numbers() {
        let cols = WideColumns {
            covariates: vec!["x1".into()],
            ..WideColumns::default()
        };
        let err = read_wide(FOUR.as_bytes(), &cols).unwrap_err();
        assert!(matches!(err, FdidError::MissingColumn(c) if c == "x1"));

        let csv = "id,g,y_pre,y_post\na,1,1,2\nb,0,1,1.2.3\n";
        let err = read_wide(csv.as_bytes(), &WideColumns::default()).unwrap_err();
        assert!(matches!(err, FdidError::NonNumeric { .. }));

        let csv = "id,g,y_pre,y_post\na,1,1,2\nb,0,,1\n";
        let err = read_wide(csv.as_bytes(), &WideColumns::default()).unwrap_err();
        assert!(matches!(err, FdidError::MissingValue { .. }));
    }

    #[test]
    fn rejects_duplicate_ids() {
        let csv = "id,g,y_pre,y_post\na,1,1,2\na,0,1,2\n";
        let err = read_wide(csv.as_bytes(), &WideColumns::default()).unwrap_err();
        assert!(matches!(err, FdidError::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn quoted_fields_and_custom_names() {
        let csv = "county,hsc,m57,m60,\"grain, pc\"\n\"a,1\",1,1.5,2.5,3\nb,0,2,2,4\n";
        let cols = WideColumns {
            id: "county".into(),
            g: "hsc".into(),
            y_pre: "m57".into(),
            y_post: "m60".into(),
            covariates: vec!["grain, pc".into()],
        };
        let d = read_wide(csv.as_bytes(), &cols).unwrap();
        assert_eq!(d.units()[0].id, "a,1");
        assert_eq!(d.units()[1].x, vec![4.0]);
    }

    #[test]
    fn long_to_wide_maps_labels() {
        let long = LongPanel {
            rows: vec![
                LongRow {
                    id: "u1".into(),
                    time_label: "1957".into(),
                    y: 5.0,
                    g: true,
                    x: vec![],
                },
                LongRow {
                    id: "u1".into(),
                    time_label: "1959".into(),
                    y: 9.0,
                    g: true,
                    x: vec![],
                },
                LongRow {
                    id: "u2".into(),
                    time_label: "1959".into(),
                    y: 1.0,
                    g: false,
                    x: vec![],
                },
                LongRow {
                    id: "u2".into(),
                    time_label: "1957".into(),
                    y: 0.0,
                    g: false,
                    x: vec![],
                },
            ],
            covariate_names: vec![],
        };
        let d = long_to_wide(&long, "1957", "1959").unwrap();
        assert_eq!(d.units()[0].y_pre, 5.0);
        assert_eq!(d.units()[0].y_post, 9.0);
        assert_eq!(d.units()[1].delta(), 1.0);
    }

    #[test]
    fn long_to_wide_rejects_unbalanced_and_inconsistent() {
        let mk = |id: &str, t: &str, g: bool, x: f64| LongRow {
            id: id.into(),
            time_label: t.into(),
            y: 1.0,
            g,
            x: vec![x],
        };
        let names = vec!["x".to_string()];
        let long = LongPanel {
            rows: vec![mk("u1", "1957", true, 0.0), mk("u2", "1957", false, 0.0), mk("u2", "1959", false, 0.0)],
            covariate_names: names.clone(),
        };
        let err = long_to_wide(&long, "1957", "1959").unwrap_err();
        assert!(err.to_string().starts_with("unbalanced unit"));

        let long = LongPanel {
            rows: vec![mk("u1", "1957", true, 0.0), mk("u1", "1959", true, 1.0)],
            covariate_names: names.clone(),
        };
        let err = long_to_wide(&long, "1957", "1959").unwrap_err();
        assert!(matches!(err, FdidError::InconsistentStatic { .. }));

        let long = LongPanel {
            rows: vec![mk("u1", "1957", true, 0.0), mk("u1", "1957", true, 0.0)],
            covariate_names: names,
        };
        let err = long_to_wide(&long, "1957", "1959").unwrap_err();
        assert!(matches!(err, FdidError::DuplicatePeriod { .. }));
    }

    #[test]
    fn wide_long_round_trip_on_fixture() {
        let d = four();
        let back = long_to_wide(&wide_to_long(&d, "pre", "post"), "pre", "post").unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn extra_periods_are_ignored_and_windows_average() {
        let d = four();
        let mut long = wide_to_long(&d, "a", "b");
        for u in d.units() {
            long.rows.push(LongRow {
                id: u.id.clone(),
                time_label: "c".into(),
                y: u.y_post + 2.0,
                g: u.g,
                x: vec![],
            });
        }
        assert_eq!(long.time_labels(), vec!["a", "b", "c"]);
        assert_eq!(long_to_wide(&long, "a", "b").unwrap(), d);
        let w = long_to_wide_window(&long, "a", &["b".into(), "c".into()]).unwrap();
        assert_eq!(w.units()[0].y_post, 5.0);
        let err = long_to_wide_window(&long, "a", &["a".into()]).unwrap_err();
        assert!(matches!(err, FdidError::ReferencePeriodReuse(_)));
    }

    #[test]
    fn delta_of_table_means() {
        let d = PanelDataset::new(
            vec![
                UnitRecord::new("famine-mean", true, 12.68, 29.51, vec![]),
                UnitRecord::new("other", false, 0.0, 0.0, vec![]),
            ],
            vec![],
        )
        .unwrap();
        assert!((delta(&d)[0] - 16.83).abs() < 1e-12);
    }

    #[test]
    fn describe_constant_and_ramp() {
        let units = (0..4)
            .map(|i| UnitRecord::new(format!("u{i}"), i % 2 == 0, 7.0, (i + 1) as f64, vec![]))
            .collect();
        let d = PanelDataset::new(units, vec![]).unwrap();
        let t = describe(&d);
        assert_eq!(
            t.iter().map(|r| r.variable.as_str()).collect::<Vec<_>>(),
            vec!["g", "y_pre", "y_post"]
        );
        let pre = &t[1];
        assert_eq!((pre.mean, pre.median, pre.sd, pre.min, pre.max), (7.0, 7.0, 0.0, 7.0, 7.0));
        let post = &t[2];
        assert_eq!((post.mean, post.median, post.min, post.max), (2.5, 2.5, 1.0, 4.0));
        assert!((post.sd - 1.2910).abs() < 1e-4);
    }
}
