//! CSV ingestion: reads (x, y, weight) columns, converts ISO-8601 dates to
//! day offsets from the earliest date, and sorts rows by x.

use crate::CliError;
use chrono::NaiveDate;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

enum XValue {
    Number(f64),
    Date(NaiveDate),
}

fn parse_x(raw: &str) -> Result<XValue, CliError> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<f64>() {
        if !v.is_finite() {
            return Err(CliError::Data(format!("non-finite x value {raw:?}")));
        }
        return Ok(XValue::Number(v));
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(XValue::Date(d));
    }
    Err(CliError::Data(format!(
        "cannot parse x value {raw:?} as a number or ISO-8601 date"
    )))
}

fn parse_num(raw: &str, col: &str) -> Result<f64, CliError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Data(format!("cannot parse {raw:?} in column {col:?}")))
}

/// Reads the dataset and sorts it by x. Date-valued x columns become day
/// offsets from the earliest date in the file.
pub fn read_dataset(
    path: &Path,
    x_col: &str,
    y_col: &str,
    w_col: Option<&str>,
) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("column {name:?} not found in header")))
    };
    let xi = find(x_col)?;
    let yi = find(y_col)?;
    let wi = w_col.map(find).transpose()?;

    let mut xs_raw = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let get = |idx: usize| -> Result<&str, CliError> {
            record
                .get(idx)
                .ok_or_else(|| CliError::Data(format!("row {} is too short", line + 2)))
        };
        xs_raw.push(parse_x(get(xi)?)?);
        ys.push(parse_num(get(yi)?, y_col)?);
        if let Some(wi) = wi {
            let w = parse_num(get(wi)?, w_col.unwrap_or(""))?;
            if w < 0.0 {
                return Err(CliError::Data(format!(
                    "negative weight {w} at row {}",
                    line + 2
                )));
            }
            ws.push(w);
        }
    }
    if xs_raw.is_empty() {
        return Err(CliError::Data("input file holds no data rows".into()));
    }

    let any_date = xs_raw.iter().any(|v| matches!(v, XValue::Date(_)));
    let all_date = xs_raw.iter().all(|v| matches!(v, XValue::Date(_)));
    if any_date && !all_date {
        return Err(CliError::Data(
            "x column mixes dates and numbers".into(),
        ));
    }
    let xs: Vec<f64> = if all_date {
        let min = xs_raw
            .iter()
            .map(|v| match v {
                XValue::Date(d) => *d,
                XValue::Number(_) => unreachable!(),
            })
            .min()
            .expect("nonempty");
        xs_raw
            .iter()
            .map(|v| match v {
                XValue::Date(d) => (*d - min).num_days() as f64,
                XValue::Number(_) => unreachable!(),
            })
            .collect()
    } else {
        xs_raw
            .iter()
            .map(|v| match v {
                XValue::Number(x) => *x,
                XValue::Date(_) => unreachable!(),
            })
            .collect()
    };

    // Sort rows by x, keeping columns aligned.
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|a, b| xs[*a].partial_cmp(&xs[*b]).expect("finite x"));
    let xs: Vec<f64> = order.iter().map(|i| xs[*i]).collect();
    let ys: Vec<f64> = order.iter().map(|i| ys[*i]).collect();
    let weights = if ws.is_empty() {
        None
    } else {
        Some(order.iter().map(|i| ws[*i]).collect())
    };
    Ok(Dataset { xs, ys, weights })
}
