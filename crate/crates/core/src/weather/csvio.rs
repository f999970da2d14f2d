//! Plain-text CSV formats for station data, features, and offsets.
//!
//! All readers skip blank lines and `#` comments, require the exact header
//! of their format, and report malformed records with 1-based line numbers.
//! Writers emit values with shortest round-trip formatting so that
//! print-then-parse reproduces every field exactly.

use super::{
    days_in_month, DailyRecord, FeatureVector, MonthlyRecord, OffsetTable, OffsetVariable, Season,
    StationOffsets, WeatherError,
};
use chrono::NaiveDate;
use std::fmt;

pub const DAILY_HEADER: &str = "station_id,date,tmin_c,tmax_c,tmean_c,rain_mm";
pub const MONTHLY_HEADER: &str =
    "station_id,year,month,tmin_mean_c,tmax_mean_c,tmean_c,rain_total_mm,rainy_days,days_present";
pub const FEATURE_HEADER: &str = "year,season_code,mst,msdmt,msdmt_min,myt,msr,nsrd,mstny";
pub const FEATURE_HEADER_NO_TARGET: &str = "year,season_code,mst,msdmt,msdmt_min,myt,msr,nsrd";
pub const OFFSETS_HEADER: &str = "station_id,season_code,variable,delta";

/// A record-level problem, tied to its 1-based line in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyParse {
    pub records: Vec<DailyRecord>,
    pub issues: Vec<LineIssue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyParse {
    pub records: Vec<MonthlyRecord>,
    pub issues: Vec<LineIssue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureParse {
    pub rows: Vec<FeatureVector>,
    /// Whether the file carried the target column.
    pub has_targets: bool,
    pub issues: Vec<LineIssue>,
}

fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn expect_header<'a, I>(lines: &mut I, allowed: &[&str], what: &str) -> Result<usize, WeatherError>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    match lines.next() {
        Some((_, line)) => match allowed.iter().position(|h| *h == line.trim()) {
            Some(i) => Ok(i),
            None => Err(WeatherError::Format(format!(
                "{what}: expected header `{}`, found `{}`",
                allowed[0],
                line.trim()
            ))),
        },
        None => Err(WeatherError::Format(format!("{what}: empty input"))),
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str) -> Result<T, String> {
    field
        .trim()
        .parse::<T>()
        .map_err(|_| format!("invalid {name} `{}`", field.trim()))
}

fn parse_finite(field: &str, name: &str) -> Result<f64, String> {
    let value: f64 = parse_field(field, name)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("non-finite {name} `{}`", field.trim()))
    }
}

/// Parse the daily format. Malformed or invalid records are collected as
/// issues rather than aborting the parse; a wrong header is fatal.
pub fn parse_daily_csv(text: &str) -> Result<DailyParse, WeatherError> {
    let mut lines = significant_lines(text);
    expect_header(&mut lines, &[DAILY_HEADER], "daily csv")?;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (line_no, line) in lines {
        match parse_daily_line(line) {
            Ok(record) => records.push(record),
            Err(message) => issues.push(LineIssue {
                line: line_no,
                message,
            }),
        }
    }
    Ok(DailyParse { records, issues })
}

fn parse_daily_line(line: &str) -> Result<DailyRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let date = NaiveDate::parse_from_str(fields[1].trim(), "%Y-%m-%d")
        .map_err(|_| format!("invalid date `{}`", fields[1].trim()))?;
    let record = DailyRecord {
        station_id: fields[0].trim().to_string(),
        date,
        tmin_c: parse_finite(fields[2], "tmin_c")?,
        tmax_c: parse_finite(fields[3], "tmax_c")?,
        tmean_c: parse_finite(fields[4], "tmean_c")?,
        rain_mm: parse_finite(fields[5], "rain_mm")?,
    };
    if record.station_id.is_empty() {
        return Err("empty station_id".to_string());
    }
    if !(record.tmin_c <= record.tmean_c && record.tmean_c <= record.tmax_c) {
        return Err(format!(
            "temperature ordering broken: tmin {} <= tmean {} <= tmax {} fails",
            record.tmin_c, record.tmean_c, record.tmax_c
        ));
    }
    if record.rain_mm < 0.0 {
        return Err(format!("negative rain_mm {}", record.rain_mm));
    }
    Ok(record)
}

pub fn write_daily_csv(records: &[DailyRecord]) -> String {
    let mut out = String::from(DAILY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.station_id,
            r.date.format("%Y-%m-%d"),
            r.tmin_c,
            r.tmax_c,
            r.tmean_c,
            r.rain_mm
        ));
    }
    out
}

pub fn parse_monthly_csv(text: &str) -> Result<MonthlyParse, WeatherError> {
    let mut lines = significant_lines(text);
    expect_header(&mut lines, &[MONTHLY_HEADER], "monthly csv")?;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (line_no, line) in lines {
        match parse_monthly_line(line) {
            Ok(record) => records.push(record),
            Err(message) => issues.push(LineIssue {
                line: line_no,
                message,
            }),
        }
    }
    Ok(MonthlyParse { records, issues })
}

fn parse_monthly_line(line: &str) -> Result<MonthlyRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 9 {
        return Err(format!("expected 9 fields, found {}", fields.len()));
    }
    let record = MonthlyRecord {
        station_id: fields[0].trim().to_string(),
        year: parse_field(fields[1], "year")?,
        month: parse_field(fields[2], "month")?,
        tmin_mean_c: parse_finite(fields[3], "tmin_mean_c")?,
        tmax_mean_c: parse_finite(fields[4], "tmax_mean_c")?,
        tmean_c: parse_finite(fields[5], "tmean_c")?,
        rain_total_mm: parse_finite(fields[6], "rain_total_mm")?,
        rainy_days: parse_field(fields[7], "rainy_days")?,
        days_present: parse_field(fields[8], "days_present")?,
    };
    if record.station_id.is_empty() {
        return Err("empty station_id".to_string());
    }
    if !(1..=12).contains(&record.month) {
        return Err(format!("month {} out of range", record.month));
    }
    let dim = days_in_month(record.year, record.month);
    if record.days_present > dim {
        return Err(format!(
            "days_present {} exceeds days in month {}",
            record.days_present, dim
        ));
    }
    if record.rainy_days > record.days_present {
        return Err(format!(
            "rainy_days {} exceeds days_present {}",
            record.rainy_days, record.days_present
        ));
    }
    if !(record.tmin_mean_c <= record.tmean_c && record.tmean_c <= record.tmax_mean_c) {
        return Err(format!(
            "temperature ordering broken: {} <= {} <= {} fails",
            record.tmin_mean_c, record.tmean_c, record.tmax_mean_c
        ));
    }
    if record.rain_total_mm < 0.0 {
        return Err(format!("negative rain_total_mm {}", record.rain_total_mm));
    }
    Ok(record)
}

pub fn write_monthly_csv(records: &[MonthlyRecord]) -> String {
    let mut out = String::from(MONTHLY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.station_id,
            r.year,
            r.month,
            r.tmin_mean_c,
            r.tmax_mean_c,
            r.tmean_c,
            r.rain_total_mm,
            r.rainy_days,
            r.days_present
        ));
    }
    out
}

/// Parse the feature format. A file may omit the trailing target column,
/// in which case `has_targets` is false and targets are unusable.
pub fn parse_feature_csv(text: &str) -> Result<FeatureParse, WeatherError> {
    let mut lines = significant_lines(text);
    let variant = expect_header(
        &mut lines,
        &[FEATURE_HEADER, FEATURE_HEADER_NO_TARGET],
        "feature csv",
    )?;
    let has_targets = variant == 0;
    let mut rows = Vec::new();
    let mut issues = Vec::new();
    for (line_no, line) in lines {
        match parse_feature_line(line, has_targets) {
            Ok(row) => rows.push(row),
            Err(message) => issues.push(LineIssue {
                line: line_no,
                message,
            }),
        }
    }
    Ok(FeatureParse {
        rows,
        has_targets,
        issues,
    })
}

fn parse_feature_line(line: &str, has_targets: bool) -> Result<FeatureVector, String> {
    let expected = if has_targets { 9 } else { 8 };
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != expected {
        return Err(format!(
            "expected {expected} fields, found {}",
            fields.len()
        ));
    }
    let code: u8 = parse_field(fields[1], "season_code")?;
    let season =
        Season::from_code(code).ok_or_else(|| format!("unknown season code {code}"))?;
    let row = FeatureVector {
        year: parse_field(fields[0], "year")?,
        season,
        mst: parse_finite(fields[2], "mst")?,
        msdmt: parse_finite(fields[3], "msdmt")?,
        msdmt_min: parse_finite(fields[4], "msdmt_min")?,
        myt: parse_finite(fields[5], "myt")?,
        msr: parse_finite(fields[6], "msr")?,
        nsrd: parse_finite(fields[7], "nsrd")?,
        mstny: if has_targets {
            parse_finite(fields[8], "mstny")?
        } else {
            f64::NAN
        },
    };
    if !(row.msdmt_min <= row.mst && row.mst <= row.msdmt) {
        return Err(format!(
            "temperature ordering broken: {} <= {} <= {} fails",
            row.msdmt_min, row.mst, row.msdmt
        ));
    }
    if row.msr < 0.0 {
        return Err(format!("negative msr {}", row.msr));
    }
    if row.nsrd < 0.0 {
        return Err(format!("negative nsrd {}", row.nsrd));
    }
    Ok(row)
}

/// Write feature rows; `comment` lines (without the `#`) are echoed at the
/// top for provenance.
pub fn write_feature_csv(rows: &[FeatureVector], include_targets: bool, comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(if include_targets {
        FEATURE_HEADER
    } else {
        FEATURE_HEADER_NO_TARGET
    });
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            r.year, r.season.code(), r.mst, r.msdmt, r.msdmt_min, r.myt, r.msr, r.nsrd
        ));
        if include_targets {
            out.push_str(&format!(",{}", r.mstny));
        }
        out.push('\n');
    }
    out
}

/// Parse the offsets table. This is configuration, so any malformed line is
/// fatal rather than collected.
pub fn parse_offsets_csv(text: &str) -> Result<OffsetTable, WeatherError> {
    let mut lines = significant_lines(text);
    expect_header(&mut lines, &[OFFSETS_HEADER], "offsets csv")?;
    let mut table = OffsetTable::empty();
    let mut seen: Vec<(String, Season, OffsetVariable)> = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let fail = |message: String| {
            WeatherError::Format(format!("offsets csv line {line_no}: {message}"))
        };
        if fields.len() != 4 {
            return Err(fail(format!("expected 4 fields, found {}", fields.len())));
        }
        let station = fields[0].trim().to_string();
        if station.is_empty() {
            return Err(fail("empty station_id".to_string()));
        }
        let code: u8 = parse_field(fields[1], "season_code").map_err(&fail)?;
        let season = Season::from_code(code)
            .ok_or_else(|| fail(format!("unknown season code {code}")))?;
        let variable = OffsetVariable::from_name(fields[2].trim())
            .ok_or_else(|| fail(format!("unknown variable `{}`", fields[2].trim())))?;
        let delta = parse_finite(fields[3], "delta").map_err(&fail)?;
        let key = (station.clone(), season, variable);
        if seen.contains(&key) {
            return Err(fail(format!(
                "duplicate offset for {station} {season} {}",
                variable.name()
            )));
        }
        seen.push(key);
        let mut offsets = table
            .for_station(&station)
            .cloned()
            .unwrap_or_else(StationOffsets::zero);
        offsets.set(season, variable, delta);
        table.insert(station, offsets);
    }
    Ok(table)
}

pub fn write_offsets_csv(table: &OffsetTable) -> String {
    let mut out = String::from(OFFSETS_HEADER);
    out.push('\n');
    for (station, offsets) in table.stations() {
        for (season, variable, delta) in offsets.entries() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                station,
                season.code(),
                variable.name(),
                delta
            ));
        }
    }
    out
}
