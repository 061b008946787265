//! Dataset ingestion, validation, and deterministic report emission.
//!
//! File formats:
//! - subjects CSV: header `id,time,status[,group][,covariates...]`; categorical
//!   covariate columns are expanded to reference-coded indicators (first level
//!   observed = reference).
//! - curves CSV: first row holds the grid abscissae after a leading label
//!   cell; every following row is `id,x_1,...,x_J`.
//!
//! All writers go through a temp-file-plus-rename so invalid inputs never
//! leave partial outputs behind.

use crate::error::{FlcoxError, Result};
use crate::fpca::FpcaBasis;
use crate::frailty::{BaselineHazard, FitDiagnostics, FrailtyFit};
use crate::grid::SamplingGrid;
use crate::inference::BootstrapBeta;
use crate::pipeline::FunctionalCoxDataset;
use crate::simulation::{AugmentRow, ReplicationRecord, SimConfig, StudyCell};
use crate::smoothing::RawCurves;
use crate::survival::SurvivalRecord;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// A validated pair of subjects and curves files, ready for the pipeline.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub ids: Vec<String>,
    pub dataset: FunctionalCoxDataset,
    /// Names of the scalar covariate columns after indicator expansion.
    pub covariate_names: Vec<String>,
}

fn parse_cell(value: &str, row: usize, col: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| FlcoxError::CsvParse {
        row,
        col: col.to_string(),
        msg: format!("expected a number, got {value:?}"),
    })
}

/// Read and validate the subjects/curves pair into a modeling-ready bundle.
pub fn ingest(subjects_csv: &Path, curves_csv: &Path) -> Result<DatasetBundle> {
    let (grid, curve_ids, curve_matrix) = read_curves(curves_csv)?;
    let subjects = read_subjects(subjects_csv)?;

    // ids must match one-to-one; reorder curves into subject order
    let mut curve_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, id) in curve_ids.iter().enumerate() {
        if curve_index.insert(id.as_str(), i).is_some() {
            return Err(FlcoxError::InvalidInput(format!(
                "duplicate id {id:?} in curves file"
            )));
        }
    }
    let mut rows = Vec::with_capacity(subjects.ids.len());
    for id in &subjects.ids {
        match curve_index.remove(id.as_str()) {
            Some(i) => rows.push(i),
            None => {
                return Err(FlcoxError::InvalidInput(format!(
                    "subject {id:?} has no curve row"
                )))
            }
        }
    }
    if let Some((extra, _)) = curve_index.into_iter().next() {
        return Err(FlcoxError::InvalidInput(format!(
            "curve id {extra:?} has no subjects row"
        )));
    }
    let j = grid.len();
    let mut curves = Array2::zeros((rows.len(), j));
    for (r, &src) in rows.iter().enumerate() {
        for c in 0..j {
            curves[[r, c]] = curve_matrix[[src, c]];
        }
    }

    let records: Vec<SurvivalRecord> = subjects
        .times
        .iter()
        .zip(subjects.status.iter())
        .zip(subjects.groups.iter())
        .map(|((&t, &s), &g)| SurvivalRecord::new(t, s, g))
        .collect::<Result<_>>()?;

    Ok(DatasetBundle {
        ids: subjects.ids,
        dataset: FunctionalCoxDataset {
            grid,
            curves: RawCurves::new(curves)?,
            records,
            z: subjects.z,
        },
        covariate_names: subjects.covariate_names,
    })
}

struct SubjectsTable {
    ids: Vec<String>,
    times: Vec<f64>,
    status: Vec<u8>,
    groups: Vec<usize>,
    z: Array2<f64>,
    covariate_names: Vec<String>,
}

fn read_subjects(path: &Path) -> Result<SubjectsTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FlcoxError::InvalidInput(format!("cannot read {path:?}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| FlcoxError::InvalidInput(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = find("id").ok_or_else(|| FlcoxError::InvalidInput("missing id column".into()))?;
    let time_col =
        find("time").ok_or_else(|| FlcoxError::InvalidInput("missing time column".into()))?;
    let status_col =
        find("status").ok_or_else(|| FlcoxError::InvalidInput("missing status column".into()))?;
    let group_col = find("group");
    let covariate_cols: Vec<usize> = (0..headers.len())
        .filter(|c| *c != id_col && *c != time_col && *c != status_col && Some(*c) != group_col)
        .collect();

    let mut ids = Vec::new();
    let mut times = Vec::new();
    let mut status = Vec::new();
    let mut raw_groups: Vec<Option<String>> = Vec::new();
    let mut raw_cov: Vec<Vec<String>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2; // 1-based, after header
        let record = record.map_err(|e| FlcoxError::CsvParse {
            row,
            col: "-".into(),
            msg: e.to_string(),
        })?;
        let get = |c: usize| -> Result<&str> {
            record.get(c).ok_or_else(|| FlcoxError::CsvParse {
                row,
                col: headers[c].clone(),
                msg: "missing cell".into(),
            })
        };
        ids.push(get(id_col)?.to_string());
        let t = parse_cell(get(time_col)?, row, &headers[time_col])?;
        if !(t > 0.0) {
            return Err(FlcoxError::CsvParse {
                row,
                col: headers[time_col].clone(),
                msg: format!("time must be positive, got {t}"),
            });
        }
        times.push(t);
        let s = parse_cell(get(status_col)?, row, &headers[status_col])?;
        if s != 0.0 && s != 1.0 {
            return Err(FlcoxError::CsvParse {
                row,
                col: headers[status_col].clone(),
                msg: format!("status must be 0 or 1, got {s}"),
            });
        }
        status.push(s as u8);
        raw_groups.push(match group_col {
            Some(c) => Some(get(c)?.to_string()),
            None => None,
        });
        raw_cov.push(
            covariate_cols
                .iter()
                .map(|&c| get(c).map(|v| v.to_string()))
                .collect::<Result<_>>()?,
        );
    }
    if ids.is_empty() {
        return Err(FlcoxError::InvalidInput("subjects file has no rows".into()));
    }

    // group column (shared frailty) or unshared default
    let groups: Vec<usize> = match group_col {
        None => (0..ids.len()).collect(),
        Some(_) => {
            let mut level_of: BTreeMap<String, usize> = BTreeMap::new();
            let mut out = Vec::with_capacity(ids.len());
            for g in raw_groups.iter() {
                let key = g.clone().unwrap_or_default();
                let next = level_of.len();
                out.push(*level_of.entry(key).or_insert(next));
            }
            out
        }
    };

    let (z, covariate_names) = expand_covariates(&headers, &covariate_cols, &raw_cov)?;
    Ok(SubjectsTable {
        ids,
        times,
        status,
        groups,
        z,
        covariate_names,
    })
}

/// Numeric columns pass through; non-numeric columns become reference-coded
/// indicators with the first observed level as the reference.
fn expand_covariates(
    headers: &[String],
    covariate_cols: &[usize],
    raw: &[Vec<String>],
) -> Result<(Array2<f64>, Vec<String>)> {
    let n = raw.len();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (k, &c) in covariate_cols.iter().enumerate() {
        let name = &headers[c];
        let numeric: Option<Vec<f64>> = raw
            .iter()
            .map(|row| row[k].trim().parse::<f64>().ok())
            .collect();
        match numeric {
            Some(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(FlcoxError::InvalidInput(format!(
                        "non-finite value in column {name}"
                    )));
                }
                columns.push((name.clone(), values));
            }
            None => {
                // categorical: levels in order of first appearance
                let mut levels: Vec<String> = Vec::new();
                for row in raw {
                    let v = row[k].trim().to_string();
                    if v.is_empty() {
                        return Err(FlcoxError::InvalidInput(format!(
                            "empty cell in categorical column {name}"
                        )));
                    }
                    if !levels.contains(&v) {
                        levels.push(v);
                    }
                }
                for level in levels.iter().skip(1) {
                    let values = raw
                        .iter()
                        .map(|row| f64::from(row[k].trim() == level))
                        .collect();
                    columns.push((format!("{name}={level}"), values));
                }
            }
        }
    }
    let p = columns.len();
    let mut z = Array2::zeros((n, p));
    let mut names = Vec::with_capacity(p);
    for (j, (name, values)) in columns.into_iter().enumerate() {
        for (i, v) in values.into_iter().enumerate() {
            z[[i, j]] = v;
        }
        names.push(name);
    }
    Ok((z, names))
}

fn read_curves(path: &Path) -> Result<(SamplingGrid, Vec<String>, Array2<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FlcoxError::InvalidInput(format!("cannot read {path:?}: {e}")))?;
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| FlcoxError::InvalidInput("curves file is empty".into()))?
        .map_err(|e| FlcoxError::InvalidInput(e.to_string()))?;
    if header.len() < 2 {
        return Err(FlcoxError::InvalidInput(
            "curves header must hold the grid abscissae".into(),
        ));
    }
    let grid_points: Vec<f64> = header
        .iter()
        .skip(1)
        .enumerate()
        .map(|(c, v)| parse_cell(v, 1, &format!("grid[{c}]")))
        .collect::<Result<_>>()?;
    let grid = SamplingGrid::new(grid_points)?;
    let j = grid.len();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row_idx, record) in rows.enumerate() {
        let row = row_idx + 2;
        let record = record.map_err(|e| FlcoxError::CsvParse {
            row,
            col: "-".into(),
            msg: e.to_string(),
        })?;
        if record.len() != j + 1 {
            return Err(FlcoxError::CsvParse {
                row,
                col: "-".into(),
                msg: format!("expected {} cells, got {}", j + 1, record.len()),
            });
        }
        ids.push(record.get(0).unwrap_or_default().to_string());
        for c in 1..=j {
            values.push(parse_cell(record.get(c).unwrap(), row, &format!("x_{c}"))?);
        }
    }
    let n = ids.len();
    let matrix = Array2::from_shape_vec((n, j), values)
        .map_err(|e| FlcoxError::InvalidInput(e.to_string()))?;
    Ok((grid, ids, matrix))
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// The structured fit report document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub gamma_hat: Vec<f64>,
    pub beta_coef_hat: Vec<f64>,
    pub alpha_hat: Option<f64>,
    pub w_hat: Vec<f64>,
    pub baseline: BaselineSection,
    pub diagnostics: FitDiagnostics,
    pub covariate_names: Vec<String>,
    pub k_selected: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaselineSection {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl FitReport {
    pub fn from_fit(fit: &FrailtyFit, covariate_names: &[String], k_selected: usize) -> Self {
        Self {
            gamma_hat: fit.gamma_hat.to_vec(),
            beta_coef_hat: fit.beta_coef_hat.to_vec(),
            alpha_hat: fit.alpha_hat,
            w_hat: fit.w_hat.to_vec(),
            baseline: BaselineSection {
                times: fit.baseline.times.clone(),
                values: fit.baseline.cumhaz.clone(),
            },
            diagnostics: fit.diagnostics.clone(),
            covariate_names: covariate_names.to_vec(),
            k_selected,
        }
    }

    pub fn baseline(&self) -> BaselineHazard {
        BaselineHazard {
            times: self.baseline.times.clone(),
            cumhaz: self.baseline.values.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(format!("{}\n", serde_json::to_string_pretty(self)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `s,beta` rows for the reconstructed coefficient function.
pub fn beta_csv(grid: &SamplingGrid, values: &Array1<f64>) -> String {
    let mut out = String::from("s,beta\n");
    for (s, b) in grid.points().iter().zip(values.iter()) {
        out.push_str(&format!("{s},{b}\n"));
    }
    out
}

/// `k,lambda,phi_1..phi_J` rows for the retained eigenpairs.
pub fn eigen_csv(basis: &FpcaBasis) -> String {
    let j = basis.grid().len();
    let mut out = String::from("k,lambda");
    for c in 1..=j {
        out.push_str(&format!(",phi_{c}"));
    }
    out.push('\n');
    for k in 0..basis.k {
        out.push_str(&format!("{},{}", k + 1, basis.eigenvalues[k]));
        for c in 0..j {
            out.push_str(&format!(",{}", basis.eigenfunctions[[k, c]]));
        }
        out.push('\n');
    }
    out
}

/// Table-1-style study aggregate.
pub fn table1_csv(cells: &[StudyCell]) -> String {
    let mut out = String::from(
        "tau,phi,n,method,ci_in,ci_out,mse,imse,psi,se_ci_in,se_ci_out,se_mse,se_imse,se_psi,replications\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.tau,
            c.phi,
            c.n,
            c.method,
            c.ci_in,
            c.ci_out,
            c.mse,
            c.imse,
            c.psi,
            c.se_ci_in,
            c.se_ci_out,
            c.se_mse,
            c.se_imse,
            c.se_psi,
            c.replications
        ));
    }
    out
}

/// Per-replication study log.
pub fn replications_csv(rows: &[(SimConfig, ReplicationRecord)]) -> String {
    let mut out = String::from(
        "tau,phi,n,replicate,method,ci_in,ci_out,mse,imse,psi,k,converged,alpha_hat\n",
    );
    for (cfg, rec) in rows {
        out.push_str(&format!(
            "{},{},{},{},flcrm-f,{},{},{},{},{},{},{},{}\n",
            cfg.tau,
            cfg.phi,
            cfg.n,
            rec.replicate,
            rec.metrics.ci_in,
            rec.metrics.ci_out,
            rec.metrics.mse_gamma,
            rec.metrics.imse_beta,
            rec.metrics.censor_rate,
            rec.k_selected,
            rec.converged,
            rec.alpha_hat
        ));
        if let Some(nf) = rec.no_frailty {
            out.push_str(&format!(
                "{},{},{},{},flcrm,{},{},{},{},{},{},{},\n",
                cfg.tau,
                cfg.phi,
                cfg.n,
                rec.replicate,
                nf.ci_in,
                nf.ci_out,
                nf.mse_gamma,
                nf.imse_beta,
                nf.censor_rate,
                rec.k_selected,
                rec.converged
            ));
        }
    }
    out
}

/// Long-format bootstrap curves: `replicate,s,beta_hat`.
pub fn bootstrap_long_csv(grid: &SamplingGrid, boot: &BootstrapBeta) -> String {
    let mut out = String::from("replicate,s,beta_hat\n");
    for r in 0..boot.curves.nrows() {
        for (c, s) in grid.points().iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", r + 1, s, boot.curves[[r, c]]));
        }
    }
    out
}

/// Pointwise bootstrap summary with mean and 2.5/50/97.5 percentiles.
pub fn bootstrap_summary_csv(grid: &SamplingGrid, boot: &BootstrapBeta) -> String {
    let p025 = boot.percentile(2.5);
    let p50 = boot.percentile(50.0);
    let p975 = boot.percentile(97.5);
    let mut out = String::from("s,mean,p2.5,p50,p97.5\n");
    for (c, s) in grid.points().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s, boot.mean[c], p025[c], p50[c], p975[c]
        ));
    }
    out
}

/// Read a subjects-style CSV into augmentable rows; requires age, bmi, chd,
/// race, and time columns (case-insensitive).
pub fn read_augment_rows(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>, AugmentColumns, Vec<AugmentRow>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FlcoxError::InvalidInput(format!("cannot read {path:?}: {e}")))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| FlcoxError::InvalidInput(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| FlcoxError::InvalidInput(format!("missing column {name}")))
    };
    let cols = AugmentColumns {
        age: find("age")?,
        bmi: find("bmi")?,
        chd: find("chd")?,
        race: find("race")?,
        time: find("time")?,
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2;
        let record = record.map_err(|e| FlcoxError::CsvParse {
            row,
            col: "-".into(),
            msg: e.to_string(),
        })?;
        let cell = |c: usize| record.get(c).unwrap_or_default().to_string();
        rows.push(AugmentRow {
            age: parse_cell(&cell(cols.age), row, "age")?,
            bmi: parse_cell(&cell(cols.bmi), row, "bmi")?,
            chd: parse_cell(&cell(cols.chd), row, "chd")? as u8,
            race: cell(cols.race),
            time: parse_cell(&cell(cols.time), row, "time")?,
        });
        records.push(record);
    }
    Ok((headers, records, cols, rows))
}

#[derive(Debug, Clone, Copy)]
pub struct AugmentColumns {
    pub age: usize,
    pub bmi: usize,
    pub chd: usize,
    pub race: usize,
    pub time: usize,
}

/// Rewrite the augmented table: original columns with the time replaced, plus
/// a trailing frailty_score column.
pub fn augmented_csv(
    headers: &[String],
    records: &[csv::StringRecord],
    cols: &AugmentColumns,
    augmented: &[(AugmentRow, f64)],
) -> String {
    let mut out = headers.join(",");
    out.push_str(",frailty_score\n");
    for (record, (aug, score)) in records.iter().zip(augmented.iter()) {
        let cells: Vec<String> = (0..headers.len())
            .map(|c| {
                if c == cols.time {
                    format!("{}", aug.time)
                } else {
                    record.get(c).unwrap_or_default().to_string()
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push_str(&format!(",{score}\n"));
    }
    out
}

/// Parse a `key=value` config file; `#` starts a comment line.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                out.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(FlcoxError::InvalidInput(format!(
                    "config line {} is not key=value: {line:?}",
                    idx + 1
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    fn toy_files(dir: &Path) -> (PathBuf, PathBuf) {
        let subjects = dir.join("subjects.csv");
        let curves = dir.join("curves.csv");
        write(
            &subjects,
            "id,time,status,age\nA,1.5,1,50\nB,2.5,0,61\nC,0.7,1,45\n",
        );
        write(
            &curves,
            "id,0.0,0.25,0.5,0.75,1.0\nA,1,2,3,2,1\nB,0,1,0,1,0\nC,2,2,2,2,2\n",
        );
        (subjects, curves)
    }

    #[test]
    fn ingest_toy_pair() {
        let dir = tempfile::tempdir().unwrap();
        let (subjects, curves) = toy_files(dir.path());
        let bundle = ingest(&subjects, &curves).unwrap();
        assert_eq!(bundle.dataset.n(), 3);
        assert_eq!(bundle.dataset.grid.len(), 5);
        assert_eq!(bundle.covariate_names, vec!["age"]);
        assert_abs_diff_eq!(bundle.dataset.curves.values()[[1, 3]], 1.0, epsilon = 1e-15);
        // curves reordered into subjects order
        assert_eq!(bundle.ids, vec!["A", "B", "C"]);
    }

    #[test]
    fn ingest_reports_missing_id() {
        let dir = tempfile::tempdir().unwrap();
        let (subjects, curves) = toy_files(dir.path());
        write(
            &curves,
            "id,0.0,0.25,0.5,0.75,1.0\nA,1,2,3,2,1\nB,0,1,0,1,0\n",
        );
        let err = ingest(&subjects, &curves).unwrap_err();
        assert!(err.to_string().contains("\"C\""), "{err}");
    }

    #[test]
    fn ingest_rejects_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let (subjects, curves) = toy_files(dir.path());
        write(
            &subjects,
            "id,time,status,age\nA,1.5,1,50\nB,-2.5,0,61\nC,0.7,1,45\n",
        );
        let err = ingest(&subjects, &curves).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn categorical_expansion_matches_hand_coding() {
        let dir = tempfile::tempdir().unwrap();
        let subjects = dir.path().join("subjects.csv");
        let curves = dir.path().join("curves.csv");
        // race with 6 levels -> 5 indicator columns, first level is reference
        let races = ["MA", "OH", "NHW", "NHB", "NHA", "OR"];
        let mut sub = String::from("id,time,status,race\n");
        let mut cur = String::from("id,0.0,0.33,0.66,1.0\n");
        for i in 0..12 {
            sub.push_str(&format!("s{i},{},1,{}\n", i + 1, races[i % 6]));
            cur.push_str(&format!("s{i},0,0,0,0\n"));
        }
        write(&subjects, &sub);
        write(&curves, &cur);
        let bundle = ingest(&subjects, &curves).unwrap();
        assert_eq!(
            bundle.covariate_names,
            vec!["race=OH", "race=NHW", "race=NHB", "race=NHA", "race=OR"]
        );
        // hand-coded indicator expansion
        for i in 0..12 {
            for (c, level) in races.iter().skip(1).enumerate() {
                let expected = f64::from(races[i % 6] == *level);
                assert_abs_diff_eq!(bundle.dataset.z[[i, c]], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn fit_report_round_trips() {
        let report = FitReport {
            gamma_hat: vec![0.1, -0.2],
            beta_coef_hat: vec![1.5],
            alpha_hat: Some(0.4),
            w_hat: vec![0.01, -0.02],
            baseline: BaselineSection {
                times: vec![1.0, 2.0],
                values: vec![0.3, 0.9],
            },
            diagnostics: FitDiagnostics {
                inner_iters: vec![5, 2],
                outer_iters: 2,
                converged: true,
                final_ppl: -12.5,
                final_score_norm: 1e-9,
                alpha_clamped: false,
            },
            covariate_names: vec!["age".into()],
            k_selected: 1,
        };
        let json = report.to_json().unwrap();
        let back = FitReport::from_json(&json).unwrap();
        assert_eq!(report, back);
        assert_eq!(json, back.to_json().unwrap());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n1,2\n");
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn config_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        write(&path, "# comment\nn_basis = 12\nseed=7\n\n");
        let map = parse_config_file(&path).unwrap();
        assert_eq!(map.get("n_basis").unwrap(), "12");
        assert_eq!(map.get("seed").unwrap(), "7");
        write(&path, "oops\n");
        assert!(parse_config_file(&path).is_err());
    }
}
