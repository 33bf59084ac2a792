use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{CustomerId, LoadDataset, MeterDataError, Result};

/// Column layout of a wide interval file: one row per customer-day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalLayout {
    pub customer_column: String,
    pub date_column: String,
    pub value_columns: Vec<String>,
}

impl IntervalLayout {
    /// `customer_id,date,v00,...` with `slots` value columns.
    pub fn standard(slots: usize) -> Self {
        Self {
            customer_column: "customer_id".into(),
            date_column: "date".into(),
            value_columns: (0..slots).map(value_column_name).collect(),
        }
    }

    /// Standard layout whose slot count is taken from the `vNN` columns of `header`.
    pub fn detect(header: &csv::StringRecord) -> Result<Self> {
        let slots = header
            .iter()
            .filter(|h| h.len() > 1 && h.starts_with('v') && h[1..].chars().all(|c| c.is_ascii_digit()))
            .count();
        let layout = Self::standard(slots);
        layout.check()?;
        Ok(layout)
    }

    fn check(&self) -> Result<()> {
        match self.value_columns.len() {
            24 | 48 => Ok(()),
            n => Err(MeterDataError::Header(format!(
                "expected 24 or 48 interval columns, found {n}"
            ))),
        }
    }
}

fn value_column_name(slot: usize) -> String {
    format!("v{slot:02}")
}

fn find_column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| MeterDataError::Header(format!("missing column `{name}`")))
}

/// Reads a wide interval CSV into a [`LoadDataset`].
///
/// Customers are ordered by id and days span the earliest to the latest date
/// seen, so row order never affects the result. Customer-days absent from the
/// file are left missing for [`LoadDataset::validate`] to report.
pub fn parse_interval_csv<R: Read>(source: R, layout: &IntervalLayout) -> Result<LoadDataset> {
    layout.check()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let customer_col = find_column(&header, &layout.customer_column)?;
    let date_col = find_column(&header, &layout.date_column)?;
    let value_cols = layout
        .value_columns
        .iter()
        .map(|c| find_column(&header, c))
        .collect::<Result<Vec<_>>>()?;
    let slots = value_cols.len();

    let mut rows: BTreeMap<(CustomerId, NaiveDate), Vec<f64>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record)?;
        if !more {
            break;
        }
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(MeterDataError::Parse {
                row,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
        }
        let customer = CustomerId(record[customer_col].trim().to_owned());
        if customer.0.is_empty() {
            return Err(MeterDataError::Parse {
                row,
                message: "empty customer id".into(),
            });
        }
        let raw_date = record[date_col].trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| {
            MeterDataError::Parse {
                row,
                message: format!("bad date `{raw_date}`: {e}"),
            }
        })?;
        let mut values = Vec::with_capacity(slots);
        for &col in &value_cols {
            let raw = record[col].trim();
            let v: f64 = raw.parse().map_err(|_| MeterDataError::Parse {
                row,
                message: format!("bad number `{raw}` in column `{}`", &header[col]),
            })?;
            if !v.is_finite() {
                return Err(MeterDataError::Parse {
                    row,
                    message: format!("non-finite value `{raw}` in column `{}`", &header[col]),
                });
            }
            values.push(v);
        }
        if rows.contains_key(&(customer.clone(), date)) {
            return Err(MeterDataError::Duplicate {
                row,
                customer: customer.0,
                date,
            });
        }
        rows.insert((customer, date), values);
    }

    if rows.is_empty() {
        return Err(MeterDataError::Shape("no data rows".into()));
    }
    let customers: Vec<CustomerId> = rows
        .keys()
        .map(|(c, _)| c.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let start = rows.keys().map(|(_, d)| *d).min().unwrap();
    let end = rows.keys().map(|(_, d)| *d).max().unwrap();
    let n_days = (end - start).num_days() as usize + 1;

    let mut readings = vec![f64::NAN; customers.len() * n_days * slots];
    let mut c = 0;
    for ((customer, date), values) in rows {
        while customers[c] != customer {
            c += 1;
        }
        let d = (date - start).num_days() as usize;
        let o = (c * n_days + d) * slots;
        readings[o..o + slots].copy_from_slice(&values);
    }
    LoadDataset::new(customers, start, n_days, slots, readings)
}

/// Writes `dataset` in the standard wide layout.
///
/// Customer-days that are entirely missing are omitted; a partially missing
/// day is an error.
pub fn write_interval_csv<W: Write>(dataset: &LoadDataset, sink: W) -> Result<()> {
    let slots = dataset.slots_per_day();
    let layout = IntervalLayout::standard(slots);
    let mut w = csv::WriterBuilder::new().from_writer(sink);
    let mut header = vec![layout.customer_column.clone(), layout.date_column.clone()];
    header.extend(layout.value_columns.iter().cloned());
    w.write_record(&header)?;
    let cal = dataset.calendar();
    let mut row: Vec<String> = Vec::with_capacity(slots + 2);
    for (c, id) in dataset.customers().iter().enumerate() {
        for d in 0..cal.n_days {
            let values = dataset.day_slice(c, d);
            let missing = values.iter().filter(|v| v.is_nan()).count();
            if missing == slots {
                continue;
            }
            if missing > 0 {
                return Err(MeterDataError::Invalid(format!(
                    "customer {id} on {} is partially missing",
                    cal.date(d)
                )));
            }
            row.clear();
            row.push(id.0.clone());
            row.push(cal.date(d).format("%Y-%m-%d").to_string());
            row.extend(values.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
