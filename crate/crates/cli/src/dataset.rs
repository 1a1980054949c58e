//! Daily surveillance series: ingestion, alignment and export.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use seirfit_core::obs::AgeCaseMatrix;

use crate::error::CliError;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

const COLUMNS: [&str; 8] = [
    "date",
    "deaths",
    "cases",
    "cases_age1",
    "cases_age2",
    "cases_age3",
    "cases_age4",
    "vaccinations",
];

/// Gap-free daily series on a common calendar starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub start: NaiveDate,
    pub deaths: Vec<u64>,
    pub cases: Vec<u64>,
    pub cases_by_age: Vec<[u64; 4]>,
    pub vaccinations: Vec<f64>,
}

/// Treatment of dates missing inside a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    #[default]
    Strict,
    ZeroFill,
}

/// One file per series; only deaths are required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesPaths {
    pub deaths: Option<PathBuf>,
    pub cases: Option<PathBuf>,
    pub cases_by_age: Option<PathBuf>,
    pub vaccinations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Interior gaps zero-filled under [`FillPolicy::ZeroFill`].
    pub filled: usize,
    /// Days before or after a secondary series' own range, set to zero.
    pub padded: usize,
    /// Secondary rows dated outside the deaths calendar.
    pub dropped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    /// Calendar date of 1-based day `t`.
    pub fn date(&self, t: usize) -> NaiveDate {
        self.start + Days::new(t as u64 - 1)
    }

    pub fn end(&self) -> NaiveDate {
        self.date(self.len())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.deaths.len();
        if n == 0 {
            return Err(CliError::Validation("dataset has no days".into()));
        }
        if self.cases.len() != n || self.cases_by_age.len() != n || self.vaccinations.len() != n {
            return Err(CliError::Validation(format!(
                "series lengths differ: deaths {n}, cases {}, cases by age {}, vaccinations {}",
                self.cases.len(),
                self.cases_by_age.len(),
                self.vaccinations.len()
            )));
        }
        if let Some(t) = self.vaccinations.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(CliError::Validation(format!(
                "vaccinations on {} are {}",
                self.date(t + 1),
                self.vaccinations[t]
            )));
        }
        Ok(())
    }

    pub fn age_matrix(&self, reference_ifr: [f64; 4]) -> AgeCaseMatrix {
        AgeCaseMatrix {
            counts: self.cases_by_age.iter().map(|r| r.map(|c| c as f64)).collect(),
            reference_ifr,
        }
    }

    /// Canonical single-file CSV with a `#` provenance line.
    pub fn to_csv(&self, command: &str) -> Result<String, CliError> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Validation(e.to_string());
        w.write_record(COLUMNS).map_err(csv_err)?;
        for t in 0..self.len() {
            let a = self.cases_by_age[t];
            w.write_record([
                self.date(t + 1).format(DATE_FORMAT).to_string(),
                self.deaths[t].to_string(),
                self.cases[t].to_string(),
                a[0].to_string(),
                a[1].to_string(),
                a[2].to_string(),
                a[3].to_string(),
                self.vaccinations[t].to_string(),
            ])
            .map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(format!(
            "# seirfit {command}; deaths and cases in persons/day, vaccinations in doses/day\n{}",
            String::from_utf8_lossy(&body)
        ))
    }

    pub fn write_csv(&self, path: &Path, command: &str) -> Result<(), CliError> {
        fs::write(path, self.to_csv(command)?).map_err(|e| CliError::io(path, e))
    }

    /// Reads the canonical single-file layout written by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path, policy: FillPolicy) -> Result<(Self, LoadReport), CliError> {
        let (header, rows) = read_rows(path)?;
        if header != COLUMNS {
            return Err(CliError::Malformed {
                file: path.into(),
                line: 1,
                message: format!("expected columns {}", COLUMNS.join(",")),
                content: header.join(","),
            });
        }
        let mut parsed = Vec::with_capacity(rows.len());
        for row in &rows {
            let mut counts = [0u64; 6];
            for (c, slot) in counts.iter_mut().enumerate() {
                *slot = parse_count(path, row, c + 1)?;
            }
            let vacc = parse_rate(path, row, 7)?;
            parsed.push((row.line, row.date, (counts, vacc)));
        }
        let mut report = LoadReport::default();
        let (start, values) = calendar(path, parsed, policy, &mut report)?;
        let default = ([0u64; 6], 0.0);
        let values: Vec<_> = values.into_iter().map(|v| v.unwrap_or(default)).collect();
        let ds = Dataset {
            start,
            deaths: values.iter().map(|v| v.0[0]).collect(),
            cases: values.iter().map(|v| v.0[1]).collect(),
            cases_by_age: values.iter().map(|v| [v.0[2], v.0[3], v.0[4], v.0[5]]).collect(),
            vaccinations: values.iter().map(|v| v.1).collect(),
        };
        ds.validate()?;
        Ok((ds, report))
    }
}

struct Row {
    line: u64,
    date: NaiveDate,
    fields: Vec<String>,
}

impl Row {
    fn content(&self) -> String {
        self.fields.join(",")
    }
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Row>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Malformed {
            file: path.into(),
            line: 1,
            message: e.to_string(),
            content: String::new(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("date") {
        return Err(CliError::Malformed {
            file: path.into(),
            line: 1,
            message: "first column must be `date`".into(),
            content: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Malformed {
            file: path.into(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
            content: String::new(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        let malformed = |message: String| CliError::Malformed {
            file: path.into(),
            line,
            message,
            content: fields.join(","),
        };
        if fields.len() != header.len() {
            return Err(malformed(format!("expected {} fields, found {}", header.len(), fields.len())));
        }
        let date = NaiveDate::parse_from_str(&fields[0], DATE_FORMAT)
            .map_err(|e| malformed(format!("bad ISO-8601 date: {e}")))?;
        rows.push(Row { line, date, fields });
    }
    Ok((header, rows))
}

fn parse_count(path: &Path, row: &Row, col: usize) -> Result<u64, CliError> {
    let s = &row.fields[col];
    s.parse::<u64>().map_err(|_| match s.parse::<f64>() {
        Ok(v) if v < 0.0 => CliError::Validation(format!(
            "{}:{}: negative count {s} on {}",
            path.display(),
            row.line,
            row.date
        )),
        _ => CliError::Malformed {
            file: path.into(),
            line: row.line,
            message: format!("`{s}` is not a non-negative integer"),
            content: row.content(),
        },
    })
}

fn parse_rate(path: &Path, row: &Row, col: usize) -> Result<f64, CliError> {
    let s = &row.fields[col];
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) => Err(CliError::Validation(format!(
            "{}:{}: value {v} on {} must be non-negative",
            path.display(),
            row.line,
            row.date
        ))),
        Err(_) => Err(CliError::Malformed {
            file: path.into(),
            line: row.line,
            message: format!("`{s}` is not a number"),
            content: row.content(),
        }),
    }
}

/// Places rows on their own contiguous calendar; `None` marks a zero-filled gap.
fn calendar<T>(
    path: &Path,
    rows: Vec<(u64, NaiveDate, T)>,
    policy: FillPolicy,
    report: &mut LoadReport,
) -> Result<(NaiveDate, Vec<Option<T>>), CliError> {
    let map = by_date(path, rows)?;
    let (Some(&first), Some(&last)) = (map.keys().next(), map.keys().next_back()) else {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    };
    let len = (last - first).num_days() as usize + 1;
    let mut map = map;
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let date = first + Days::new(k as u64);
        match map.remove(&date) {
            Some(v) => out.push(Some(v)),
            None => {
                gap(path, date, policy, report)?;
                out.push(None);
            }
        }
    }
    Ok((first, out))
}

fn by_date<T>(path: &Path, rows: Vec<(u64, NaiveDate, T)>) -> Result<BTreeMap<NaiveDate, T>, CliError> {
    let mut map = BTreeMap::new();
    for (line, date, v) in rows {
        if map.insert(date, v).is_some() {
            return Err(CliError::Malformed {
                file: path.into(),
                line,
                message: "duplicate date".into(),
                content: date.format(DATE_FORMAT).to_string(),
            });
        }
    }
    Ok(map)
}

fn gap(path: &Path, date: NaiveDate, policy: FillPolicy, report: &mut LoadReport) -> Result<(), CliError> {
    match policy {
        FillPolicy::Strict => Err(CliError::Gap { file: path.into(), date }),
        FillPolicy::ZeroFill => {
            report.filled += 1;
            Ok(())
        }
    }
}

/// Aligns a secondary series to `len` days from `start`.
fn align<T: Copy + Default>(
    path: &Path,
    rows: Vec<(u64, NaiveDate, T)>,
    start: NaiveDate,
    len: usize,
    policy: FillPolicy,
    report: &mut LoadReport,
) -> Result<Vec<T>, CliError> {
    let map = by_date(path, rows)?;
    let (Some(&first), Some(&last)) = (map.keys().next(), map.keys().next_back()) else {
        report.padded += len;
        return Ok(vec![T::default(); len]);
    };
    let end = start + Days::new(len as u64 - 1);
    report.dropped += map.keys().filter(|d| **d < start || **d > end).count();
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let date = start + Days::new(k as u64);
        match map.get(&date) {
            Some(v) => out.push(*v),
            None if date < first || date > last => {
                report.padded += 1;
                out.push(T::default());
            }
            None => {
                gap(path, date, policy, report)?;
                out.push(T::default());
            }
        }
    }
    Ok(out)
}

fn series<T>(
    path: &Path,
    width: usize,
    parse: impl Fn(&Path, &Row, usize) -> Result<T, CliError>,
) -> Result<Vec<(u64, NaiveDate, Vec<T>)>, CliError> {
    let (header, rows) = read_rows(path)?;
    if header.len() != width + 1 {
        return Err(CliError::Malformed {
            file: path.into(),
            line: 1,
            message: format!("expected a date column and {width} value column(s)"),
            content: header.join(","),
        });
    }
    rows.iter()
        .map(|r| {
            let vals = (1..=width).map(|c| parse(path, r, c)).collect::<Result<Vec<T>, _>>()?;
            Ok((r.line, r.date, vals))
        })
        .collect()
}

/// Loads per-series files onto the calendar spanned by the deaths file.
pub fn load_dataset(paths: &SeriesPaths, policy: FillPolicy) -> Result<(Dataset, LoadReport), CliError> {
    let deaths_path = paths
        .deaths
        .as_deref()
        .ok_or_else(|| CliError::Config("a deaths file is required".into()))?;
    let mut report = LoadReport::default();
    let rows = series(deaths_path, 1, parse_count)?
        .into_iter()
        .map(|(l, d, v)| (l, d, v[0]))
        .collect();
    let (start, deaths) = calendar(deaths_path, rows, policy, &mut report)?;
    let deaths: Vec<u64> = deaths.into_iter().map(Option::unwrap_or_default).collect();
    let n = deaths.len();
    let cases = match &paths.cases {
        Some(p) => {
            let rows = series(p, 1, parse_count)?.into_iter().map(|(l, d, v)| (l, d, v[0])).collect();
            align(p, rows, start, n, policy, &mut report)?
        }
        None => vec![0; n],
    };
    let cases_by_age = match &paths.cases_by_age {
        Some(p) => {
            let rows = series(p, 4, parse_count)?
                .into_iter()
                .map(|(l, d, v)| (l, d, [v[0], v[1], v[2], v[3]]))
                .collect();
            align(p, rows, start, n, policy, &mut report)?
        }
        None => vec![[0; 4]; n],
    };
    let vaccinations = match &paths.vaccinations {
        Some(p) => {
            let rows = series(p, 1, parse_rate)?.into_iter().map(|(l, d, v)| (l, d, v[0])).collect();
            align(p, rows, start, n, policy, &mut report)?
        }
        None => vec![0.0; n],
    };
    let ds = Dataset { start, deaths, cases, cases_by_age, vaccinations };
    ds.validate()?;
    Ok((ds, report))
}
