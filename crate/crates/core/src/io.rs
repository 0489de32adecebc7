//! File formats: sample sets as CSV plus a JSON sidecar, serialized models,
//! and the CSV reports of a MOP run.
//!
//! Sample CSVs hold one header row (input names, then response names) and
//! floats in shortest round-trip form, so a write/read cycle reproduces every
//! value bit for bit. Report CSVs round to 12 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MopError, Result};
use crate::mop::{ConvergencePoint, MopResult, SubspaceGrid};
use crate::quality::round_significant;
use crate::sampling::{CorrelationSpec, SampleSet, SamplingScheme, VariableDef};
use crate::surrogate::SurrogateModel;

pub const SIDECAR_SCHEMA_VERSION: u32 = 1;
pub const REPORT_DIGITS: usize = 12;

/// Metadata stored next to a sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub schema_version: u32,
    pub variables: Vec<VariableDef>,
    pub responses: Vec<String>,
    pub seed: u64,
    pub scheme: SamplingScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationSpec>,
}

/// `samples.csv` → `samples.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Number formatting used by every report file.
pub fn format_report_number(x: f64) -> String {
    format!("{}", round_significant(x, REPORT_DIGITS))
}

fn opt_number(x: Option<f64>) -> String {
    x.map(format_report_number).unwrap_or_default()
}

fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> MopError + '_ {
    move |e| MopError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(with_path(path))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(with_path(dir))?;
    }
    fs::write(path, contents).map_err(with_path(path))
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| MopError::Format(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| MopError::Format(e.to_string()))
}

/// Writes `samples` as CSV and its sidecar next to it.
pub fn write_samples(samples: &SampleSet, csv_path: &Path) -> Result<()> {
    let names = samples.response_names();
    let mut header = samples.variable_names();
    header.extend(names.iter().cloned());
    let responses: Vec<&[f64]> = names
        .iter()
        .map(|r| samples.response(r))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = (0..samples.len())
        .map(|i| {
            let mut row: Vec<String> = samples.row(i).iter().map(|v| v.to_string()).collect();
            row.extend(responses.iter().map(|r| r[i].to_string()));
            row
        })
        .collect();
    write_file(csv_path, &csv_text(&header, &rows)?)?;
    let sidecar = SampleSidecar {
        schema_version: SIDECAR_SCHEMA_VERSION,
        variables: samples.variables().to_vec(),
        responses: names,
        seed: samples.seed(),
        scheme: samples.scheme(),
        correlation: samples.correlation().cloned(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    write_file(&sidecar_path(csv_path), &json)
}

struct RawTable {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn read_table(csv_path: &Path) -> Result<RawTable> {
    let text = read_file(csv_path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(MopError::Format(format!(
            "{}: line 1: header has an empty column name",
            csv_path.display()
        )));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            MopError::Format(format!("{}: line {line}: {e}", csv_path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                MopError::Format(format!(
                    "{}: line {line}, column '{}': cannot parse '{field}' as a number",
                    csv_path.display(),
                    header[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(MopError::Format(format!(
                    "{}: line {line}, column '{}': non-finite value",
                    csv_path.display(),
                    header[j]
                )));
            }
            columns[j].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(MopError::Format(format!("{}: no data rows", csv_path.display())));
    }
    Ok(RawTable { header, columns })
}

fn column_index(table: &RawTable, name: &str, path: &Path) -> Result<usize> {
    table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| MopError::Format(format!("{}: no column named '{name}'", path.display())))
}

/// Reads a sample CSV. With a sidecar present the variable definitions come
/// from it; otherwise every column except the response is an input with a
/// uniform marginal over its observed range. `response` defaults to the
/// sidecar's responses or, without sidecar, to the last column.
pub fn read_samples(csv_path: &Path, response: Option<&str>) -> Result<SampleSet> {
    let table = read_table(csv_path)?;
    let n = table.columns[0].len();
    let side = sidecar_path(csv_path);
    let (variables, responses, seed, scheme, correlation) = if side.exists() {
        let sc: SampleSidecar = serde_json::from_str(&read_file(&side)?)
            .map_err(|e| MopError::Format(format!("{}: {e}", side.display())))?;
        if sc.schema_version != SIDECAR_SCHEMA_VERSION {
            return Err(MopError::Format(format!(
                "{}: unsupported sidecar schema version {}",
                side.display(),
                sc.schema_version
            )));
        }
        let mut responses = sc.responses;
        if let Some(r) = response {
            if !responses.iter().any(|x| x == r) {
                responses.push(r.to_string());
            }
        }
        (sc.variables, responses, sc.seed, sc.scheme, sc.correlation)
    } else {
        let chosen = match response {
            Some(r) => r.to_string(),
            None if table.header.len() >= 2 => table.header[table.header.len() - 1].clone(),
            None => {
                return Err(MopError::Format(format!(
                    "{}: need at least one input and one response column",
                    csv_path.display()
                )))
            }
        };
        let r = column_index(&table, &chosen, csv_path)?;
        let variables = table
            .header
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != r)
            .map(|(j, name)| {
                let col = &table.columns[j];
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let pad = if hi > lo { 0.0 } else { 0.5 * lo.abs().max(1.0) };
                VariableDef::uniform(name.clone(), lo - pad, hi + pad)
            })
            .collect::<Vec<_>>();
        if variables.is_empty() {
            return Err(MopError::Format(format!("{}: no input columns", csv_path.display())));
        }
        (variables, vec![chosen], 0, SamplingScheme::External, None)
    };

    let mut inputs = DMatrix::zeros(n, variables.len());
    for (j, v) in variables.iter().enumerate() {
        let c = column_index(&table, &v.name, csv_path)?;
        for i in 0..n {
            inputs[(i, j)] = table.columns[c][i];
        }
    }
    let mut set = SampleSet::new(variables, inputs, scheme, seed)?.with_correlation(correlation);
    for r in responses {
        let c = column_index(&table, &r, csv_path)?;
        set = set.with_response(r, table.columns[c].clone())?;
    }
    Ok(set)
}

pub fn write_model(model: &SurrogateModel, path: &Path) -> Result<()> {
    write_file(path, &model.to_json()?)
}

pub fn read_model(path: &Path) -> Result<SurrogateModel> {
    SurrogateModel::from_json(&read_file(path)?)
}

/// Reads prediction points: a CSV whose header names the model inputs (in
/// any order, extra columns ignored).
pub fn read_points(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let table = read_table(path)?;
    let n = table.columns[0].len();
    let mut points = DMatrix::zeros(n, names.len());
    for (j, name) in names.iter().enumerate() {
        let c = column_index(&table, name, path)?;
        for i in 0..n {
            points[(i, j)] = table.columns[c][i];
        }
    }
    Ok(points)
}

pub fn write_mop_result(result: &MopResult, path: &Path) -> Result<()> {
    write_file(path, &result.to_json()?)
}

/// All evaluated candidates, best CoP first.
pub fn candidates_csv(result: &MopResult) -> Result<String> {
    let mut cands: Vec<_> = result.candidates.iter().collect();
    cands.sort_by(|a, b| b.cop.total_cmp(&a.cop).then(a.id.cmp(&b.id)));
    let header: Vec<String> = [
        "rank", "id", "stage", "variables", "n_vars", "model_class", "interactions", "terms",
        "influence_radius", "cop", "selected",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = cands
        .iter()
        .enumerate()
        .map(|(rank, c)| {
            let selected = c.subspace == result.subspace && c.kind == result.model_class.kind;
            vec![
                (rank + 1).to_string(),
                c.id.to_string(),
                serde_json::to_value(c.stage)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                c.variables.join(" "),
                c.subspace.len().to_string(),
                c.kind.label().to_string(),
                c.interactions.to_string(),
                c.terms.to_string(),
                opt_number(c.influence_radius),
                format_report_number(c.cop),
                selected.to_string(),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

/// Every input with `S_T` and `CoP(X_i)`, most important first; inputs
/// outside the MOP subspace report zeros.
pub fn sensitivity_csv(result: &MopResult) -> Result<String> {
    let mut entries: Vec<(usize, String, f64, f64)> = result
        .cop_by_variable()
        .into_iter()
        .enumerate()
        .map(|(j, (name, s_total, cop_xi))| (j, name, s_total, cop_xi))
        .collect();
    entries.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)));
    let header: Vec<String> = ["variable", "s_total", "cop_xi", "in_subspace"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = entries
        .into_iter()
        .map(|(j, name, s, c)| {
            vec![
                name,
                format_report_number(s),
                format_report_number(c),
                result.subspace.contains(&j).to_string(),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

pub fn grid_csv(grid: &SubspaceGrid) -> Result<String> {
    let mut header = vec![grid.var_a.clone()];
    header.extend(grid.var_b.iter().cloned());
    header.push("prediction".into());
    let rows: Vec<Vec<String>> = grid
        .points
        .iter()
        .map(|p| {
            let mut r = vec![format_report_number(p.a)];
            r.extend(p.b.map(format_report_number));
            r.push(format_report_number(p.prediction));
            r
        })
        .collect();
    csv_text(&header, &rows)
}

pub fn convergence_csv(points: &[ConvergencePoint]) -> Result<String> {
    let header: Vec<String> = [
        "n", "cod_linear", "cod_quadratic", "cod_adj_linear", "cod_adj_quadratic", "cop_mop",
        "mop_variables", "mop_class",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.n.to_string(),
                opt_number(p.cod_linear),
                opt_number(p.cod_quadratic),
                opt_number(p.cod_adj_linear),
                opt_number(p.cod_adj_quadratic),
                format_report_number(p.cop_mop),
                p.subspace.join(" "),
                p.model_class.label().to_string(),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    write_file(path, contents)
}
