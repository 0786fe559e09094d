//! Delimited-text formats for subgroup effects, unit-level data and weights.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use hte_mediation_core::{EffectDataset, IndividualDataset, SubgroupEffect};

pub const AGGREGATE_COLUMNS: [&str; 6] = ["group_id", "gamma_hat", "se_gamma", "tau_hat", "se_tau", "n"];
pub const COVARIATE_PREFIX: &str = "x_mean_";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("parse error at row {row}, column {column}")]
    Parse { row: usize, column: String },
    #[error("no data rows")]
    NoDataRows,
    #[error("missing weight for group {0}")]
    MissingWeight(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Dataset(#[from] hte_mediation_core::Error),
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        IoError::Csv(e.to_string())
    }
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|e| IoError::File { path: path.display().to_string(), message: e.to_string() })
}

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self, IoError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize, IoError> {
        self.column(name).ok_or_else(|| IoError::MissingColumn(name.to_string()))
    }

    /// Row numbers are 1-based over data rows.
    fn number(&self, row: usize, col: usize) -> Result<f64, IoError> {
        let cell = self.rows[row].get(col).unwrap_or("");
        cell.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| IoError::Parse { row: row + 1, column: self.headers[col].clone() })
    }

    fn text(&self, row: usize, col: usize) -> String {
        self.rows[row].get(col).unwrap_or("").to_string()
    }
}

/// Reads subgroup effects. Required columns: `group_id, gamma_hat,
/// se_gamma, tau_hat, se_tau, n`; optional `cov_uv` and `x_mean_<name>`
/// covariate means. Row order is preserved.
pub fn read_aggregate<R: Read>(reader: R) -> Result<EffectDataset, IoError> {
    let table = Table::read(reader)?;
    let cols: Vec<usize> = AGGREGATE_COLUMNS.iter().map(|c| table.require(c)).collect::<Result<_, _>>()?;
    if table.rows.is_empty() {
        return Err(IoError::NoDataRows);
    }
    let cov_col = table.column("cov_uv");
    let covariates: Vec<(usize, String)> = table
        .headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(COVARIATE_PREFIX).map(|name| (i, name.to_string())))
        .collect();
    let mut raw = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let n = table.number(r, cols[5])?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(IoError::Parse { row: r + 1, column: "n".into() });
        }
        let mut effect = SubgroupEffect::new(
            table.text(r, cols[0]),
            table.number(r, cols[1])?,
            table.number(r, cols[2])?,
            table.number(r, cols[3])?,
            table.number(r, cols[4])?,
            n as u64,
        );
        if let Some(c) = cov_col {
            effect = effect.with_cov_uv(table.number(r, c)?);
        }
        if !covariates.is_empty() {
            let means = covariates.iter().map(|(c, _)| table.number(r, *c)).collect::<Result<Vec<_>, _>>()?;
            effect = effect.with_covariate_means(means);
        }
        raw.push(effect);
    }
    let dataset = EffectDataset::new(raw)?;
    if covariates.is_empty() {
        Ok(dataset)
    } else {
        Ok(dataset.with_covariate_names(covariates.into_iter().map(|(_, n)| n).collect())?)
    }
}

pub fn parse_aggregate_csv(path: &Path) -> Result<EffectDataset, IoError> {
    read_aggregate(open(path)?)
}

/// Writes effects in the format read by [`read_aggregate`], with full
/// round-trip precision.
pub fn write_aggregate<W: Write>(dataset: &EffectDataset, writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = AGGREGATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.push("cov_uv".into());
    header.extend(dataset.covariate_names().iter().map(|n| format!("{COVARIATE_PREFIX}{n}")));
    w.write_record(&header)?;
    for e in dataset.effects() {
        let mut row = vec![
            e.group_id.clone(),
            e.gamma_hat.to_string(),
            e.se_gamma.to_string(),
            e.tau_hat.to_string(),
            e.se_tau.to_string(),
            e.n.to_string(),
            e.cov_uv.to_string(),
        ];
        if let Some(m) = &e.covariate_means {
            row.extend(m.iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.to_string()))
}

pub fn write_aggregate_csv(dataset: &EffectDataset, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::File { path: path.display().to_string(), message: e.to_string() })?;
    write_aggregate(dataset, file)
}

/// Reads unit-level data: `treatment, mediator, outcome`, an optional
/// `group` label column, and every other column as a numeric covariate.
pub fn read_individual<R: Read>(reader: R) -> Result<IndividualDataset, IoError> {
    let table = Table::read(reader)?;
    let cols: Vec<usize> =
        ["treatment", "mediator", "outcome"].iter().map(|c| table.require(c)).collect::<Result<_, _>>()?;
    if table.rows.is_empty() {
        return Err(IoError::NoDataRows);
    }
    let group = table.column("group");
    let covariates: Vec<usize> =
        (0..table.headers.len()).filter(|i| !cols.contains(i) && Some(*i) != group).collect();
    let column = |c: usize| (0..table.rows.len()).map(|r| table.number(r, c)).collect::<Result<Vec<_>, _>>();
    let mut data = IndividualDataset::new(column(cols[0])?, column(cols[1])?, column(cols[2])?)?;
    if !covariates.is_empty() {
        let names = covariates.iter().map(|&c| table.headers[c].clone()).collect();
        let values = covariates.iter().map(|&c| column(c)).collect::<Result<Vec<_>, _>>()?;
        data = data.with_covariates(names, values)?;
    }
    if let Some(g) = group {
        data = data.with_group_labels((0..table.rows.len()).map(|r| table.text(r, g)).collect())?;
    }
    Ok(data)
}

pub fn parse_individual_csv(path: &Path) -> Result<IndividualDataset, IoError> {
    read_individual(open(path)?)
}

/// Reads `group_id, weight` rows and returns weights in dataset order.
pub fn read_weights<R: Read>(reader: R, dataset: &EffectDataset) -> Result<Vec<f64>, IoError> {
    let table = Table::read(reader)?;
    let id = table.require("group_id")?;
    let w = table.require("weight")?;
    let mut by_id = HashMap::new();
    for r in 0..table.rows.len() {
        by_id.insert(table.text(r, id), table.number(r, w)?);
    }
    dataset
        .effects()
        .iter()
        .map(|e| by_id.get(&e.group_id).copied().ok_or_else(|| IoError::MissingWeight(e.group_id.clone())))
        .collect()
}

pub fn apply_weights_csv(dataset: EffectDataset, path: &Path) -> Result<EffectDataset, IoError> {
    let weights = read_weights(open(path)?, &dataset)?;
    Ok(dataset.with_weights(weights)?)
}
