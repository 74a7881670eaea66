//! Monthly panels: the in-memory [`SeriesFrame`], its CSV form, and the
//! [`Panel`] read interface the design builder consumes.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Mutex;

use indexmap::IndexMap;

use super::month::Month;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Read access to a monthly panel.
///
/// `value` is the path used when assembling data a model is fitted on;
/// `realized` is reserved for scoring against observed outcomes. Keeping the
/// two apart lets an instrumented panel audit what a fit consumed.
pub trait Panel<T: Scalar>: Sync {
    fn months(&self) -> &[Month];
    fn has_column(&self, name: &str) -> bool;
    fn value(&self, column: &str, index: usize) -> Option<T>;

    fn realized(&self, column: &str, index: usize) -> Option<T> {
        self.value(column, index)
    }

    fn position(&self, month: Month) -> Option<usize> {
        let months = self.months();
        let first = *months.first()?;
        let idx = month.ordinal() - first.ordinal();
        (idx >= 0 && (idx as usize) < months.len()).then_some(idx as usize)
    }
}

/// Monthly table of named numeric columns; cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame<T> {
    months: Vec<Month>,
    columns: IndexMap<String, Vec<Option<T>>>,
}

impl<T: Scalar> SeriesFrame<T> {
    /// Empty frame covering `len` consecutive months from `start`.
    pub fn with_start(start: Month, len: usize) -> Self {
        SeriesFrame {
            months: (0..len as i64).map(|k| start.offset(k)).collect(),
            columns: IndexMap::new(),
        }
    }

    pub fn from_months(months: Vec<Month>) -> Result<Self> {
        for (i, pair) in months.windows(2).enumerate() {
            if pair[1] != pair[0].succ() {
                return Err(Error::Parse(format!("month gap at row {}", i + 2)));
            }
        }
        Ok(SeriesFrame {
            months,
            columns: IndexMap::new(),
        })
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<Option<T>>) -> Result<()> {
        let name = name.into();
        if values.len() != self.months.len() {
            return Err(Error::Dimension {
                expected: self.months.len(),
                got: values.len(),
            });
        }
        if self.columns.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate column '{name}'")));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[Option<T>]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Frame restricted to the first `len` months.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.months.len());
        SeriesFrame {
            months: self.months[..len].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), v[..len].to_vec()))
                .collect(),
        }
    }

    /// Parses the CSV layout: header `date,<col>...`, `YYYY-MM` dates,
    /// `.` decimals, empty cell = missing.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::Parse("first column header must be 'date'".into()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut seen = BTreeSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::Parse("empty column header".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Parse(format!("duplicate header '{name}'")));
            }
        }

        let mut months: Vec<Month> = Vec::new();
        let mut cols: Vec<Vec<Option<T>>> = vec![Vec::new(); names.len()];
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            let date = record.get(0).unwrap_or("");
            let month: Month = date
                .parse()
                .map_err(|_| Error::Parse(format!("malformed date '{date}' at row {row}")))?;
            if let Some(&prev) = months.last() {
                if month <= prev {
                    return Err(Error::Parse(format!("months not increasing at row {row}")));
                }
                if month != prev.succ() {
                    return Err(Error::Parse(format!("month gap at row {row}")));
                }
            }
            months.push(month);
            for (j, name) in names.iter().enumerate() {
                let cell = record.get(j + 1).unwrap_or("");
                cols[j].push(parse_cell(cell, row, name)?);
            }
        }
        let mut frame = SeriesFrame::from_months(months)?;
        for (name, values) in names.into_iter().zip(cols) {
            frame.push_column(name, values)?;
        }
        Ok(frame)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.keys().cloned());
        w.write_record(&header)?;
        for (i, month) in self.months.iter().enumerate() {
            let mut rec = vec![month.to_string()];
            for values in self.columns.values() {
                rec.push(values[i].map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Loads a monthly panel from a CSV file.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<SeriesFrame<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    SeriesFrame::read_csv(std::io::BufReader::new(file))
}

fn parse_cell<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<Option<T>> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<T>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse(format!(
            "non-numeric cell '{cell}' at row {row}, column '{column}'"
        ))),
    }
}

impl<T: Scalar> Panel<T> for SeriesFrame<T> {
    fn months(&self) -> &[Month] {
        &self.months
    }

    fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    fn value(&self, column: &str, index: usize) -> Option<T> {
        self.columns.get(column).and_then(|c| c.get(index).copied().flatten())
    }
}

/// View of a panel truncated after `end` (inclusive), optionally hiding one
/// column's value at the last month.
pub struct PanelWindow<'a, T: Scalar, P: Panel<T> + ?Sized> {
    inner: &'a P,
    len: usize,
    masked: Option<&'a str>,
    _marker: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar, P: Panel<T> + ?Sized> PanelWindow<'a, T, P> {
    pub fn new(inner: &'a P, end: usize, masked: Option<&'a str>) -> Self {
        PanelWindow {
            inner,
            len: (end + 1).min(inner.months().len()),
            masked,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<T: Scalar, P: Panel<T> + ?Sized> Panel<T> for PanelWindow<'_, T, P> {
    fn months(&self) -> &[Month] {
        &self.inner.months()[..self.len]
    }

    fn has_column(&self, name: &str) -> bool {
        self.inner.has_column(name)
    }

    fn value(&self, column: &str, index: usize) -> Option<T> {
        if index >= self.len {
            return None;
        }
        if index + 1 == self.len && self.masked == Some(column) {
            return None;
        }
        self.inner.value(column, index)
    }

    fn realized(&self, column: &str, index: usize) -> Option<T> {
        self.inner.realized(column, index)
    }
}

/// Panel wrapper recording every `(column, month)` read through the fit path.
pub struct AuditedPanel<'a, T> {
    inner: &'a SeriesFrame<T>,
    fit_reads: Mutex<BTreeSet<(String, Month)>>,
}

impl<'a, T: Scalar> AuditedPanel<'a, T> {
    pub fn new(inner: &'a SeriesFrame<T>) -> Self {
        AuditedPanel {
            inner,
            fit_reads: Mutex::new(BTreeSet::new()),
        }
    }

    /// Distinct cells read while assembling fit inputs.
    pub fn fit_reads(&self) -> Vec<(String, Month)> {
        self.fit_reads.lock().expect("audit log").iter().cloned().collect()
    }
}

impl<T: Scalar> Panel<T> for AuditedPanel<'_, T> {
    fn months(&self) -> &[Month] {
        self.inner.months()
    }

    fn has_column(&self, name: &str) -> bool {
        self.inner.has_column(name)
    }

    fn value(&self, column: &str, index: usize) -> Option<T> {
        if let Some(&m) = self.inner.months().get(index) {
            self.fit_reads
                .lock()
                .expect("audit log")
                .insert((column.to_string(), m));
        }
        self.inner.value(column, index)
    }

    fn realized(&self, column: &str, index: usize) -> Option<T> {
        self.inner.value(column, index)
    }
}
