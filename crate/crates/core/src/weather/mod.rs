//! Station records, seasonal aggregation, and the forecasting dataset.
//!
//! The pipeline goes daily records -> monthly records -> seasonal and yearly
//! aggregates -> feature vectors whose target is the same season's mean
//! temperature one year ahead. Missing periods are never interpolated: an
//! aggregate below the coverage threshold is simply absent, and absent
//! aggregates produce no feature vectors.

mod csvio;

pub use csvio::{
    parse_daily_csv, parse_feature_csv, parse_monthly_csv, parse_offsets_csv, write_daily_csv,
    write_feature_csv, write_monthly_csv, write_offsets_csv, DailyParse, FeatureParse, LineIssue,
    MonthlyParse,
};

use crate::expr::{VarSource, Variable};
use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;

pub const DEFAULT_RAINY_THRESHOLD_MM: f64 = 1.0;
pub const DEFAULT_MIN_COVERAGE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeatherError {
    #[error("format error: {0}")]
    Format(String),
    #[error("records mix station ids `{expected}` and `{found}`")]
    MixedStations { expected: String, found: String },
    #[error("duplicate daily record for {station} on {date}")]
    DuplicateDate { station: String, date: NaiveDate },
    #[error("duplicate monthly record for {year}-{month:02}")]
    DuplicateMonth { year: i32, month: u32 },
    #[error("rainy-day threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("coverage threshold must be in (0, 1], got {0}")]
    InvalidCoverage(f64),
    #[error("cannot split {n} rows into {k} folds")]
    InvalidFolds { n: usize, k: usize },
    #[error("season {0} is supplied by more than one station: {1}")]
    SeasonConflict(String, String),
    #[error("offsets make {variable} invalid for year {year} season {season}: {detail}")]
    InvalidAfterOffset {
        year: i32,
        season: Season,
        variable: &'static str,
        detail: String,
    },
}

/// Season of the meteorological calendar. Codes follow the listing order:
/// Winter=1, Spring=2, Summer=3, Autumn=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Autumn];

    pub fn code(self) -> u8 {
        match self {
            Season::Winter => 1,
            Season::Spring => 2,
            Season::Summer => 3,
            Season::Autumn => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Season> {
        Season::ALL.iter().copied().find(|s| s.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "Winter",
            Season::Spring => "Spring",
            Season::Summer => "Summer",
            Season::Autumn => "Autumn",
        }
    }

    /// Constituent months as (year offset, month). Winter of year Y is
    /// December of Y-1 plus January and February of Y.
    pub fn months(self) -> [(i32, u32); 3] {
        match self {
            Season::Winter => [(-1, 12), (0, 1), (0, 2)],
            Season::Spring => [(0, 3), (0, 4), (0, 5)],
            Season::Summer => [(0, 6), (0, 7), (0, 8)],
            Season::Autumn => [(0, 9), (0, 10), (0, 11)],
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub station_id: String,
    pub date: NaiveDate,
    pub tmin_c: f64,
    pub tmax_c: f64,
    pub tmean_c: f64,
    pub rain_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyRecord {
    pub station_id: String,
    pub year: i32,
    pub month: u32,
    pub tmin_mean_c: f64,
    pub tmax_mean_c: f64,
    pub tmean_c: f64,
    pub rain_total_mm: f64,
    pub rainy_days: u32,
    pub days_present: u32,
}

/// One labeled example: the eight inputs of the feature tuple plus the
/// target, the same season's mean temperature in the following year.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub year: i32,
    pub season: Season,
    pub mst: f64,
    pub msdmt: f64,
    pub msdmt_min: f64,
    pub myt: f64,
    pub msr: f64,
    pub nsrd: f64,
    pub mstny: f64,
}

impl FeatureVector {
    /// The eight inputs in canonical order (year, season code, then the
    /// six numeric aggregates).
    pub fn inputs(&self) -> [f64; 8] {
        [
            self.year as f64,
            self.season.code() as f64,
            self.mst,
            self.msdmt,
            self.msdmt_min,
            self.myt,
            self.msr,
            self.nsrd,
        ]
    }
}

impl VarSource for FeatureVector {
    fn get(&self, var: Variable) -> Option<f64> {
        Some(self.inputs()[var.index()])
    }
}

/// Seasonal aggregate of one station: day-weighted temperature means plus
/// rainfall totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalAggregate {
    pub mst: f64,
    pub msdmt: f64,
    pub msdmt_min: f64,
    pub msr: f64,
    pub nsrd: f64,
}

/// Variables an offset table may adjust, named as in the feature CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OffsetVariable {
    Mst,
    Msdmt,
    MsdmtMin,
    Myt,
    Msr,
    Nsrd,
}

impl OffsetVariable {
    pub const ALL: [OffsetVariable; 6] = [
        OffsetVariable::Mst,
        OffsetVariable::Msdmt,
        OffsetVariable::MsdmtMin,
        OffsetVariable::Myt,
        OffsetVariable::Msr,
        OffsetVariable::Nsrd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OffsetVariable::Mst => "mst",
            OffsetVariable::Msdmt => "msdmt",
            OffsetVariable::MsdmtMin => "msdmt_min",
            OffsetVariable::Myt => "myt",
            OffsetVariable::Msr => "msr",
            OffsetVariable::Nsrd => "nsrd",
        }
    }

    pub fn from_name(name: &str) -> Option<OffsetVariable> {
        OffsetVariable::ALL.iter().copied().find(|v| v.name() == name)
    }
}

/// Additive per-season, per-variable harmonization deltas for one station.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationOffsets {
    deltas: BTreeMap<(Season, OffsetVariable), f64>,
}

impl StationOffsets {
    pub fn zero() -> StationOffsets {
        StationOffsets::default()
    }

    pub fn set(&mut self, season: Season, var: OffsetVariable, delta: f64) {
        self.deltas.insert((season, var), delta);
    }

    pub fn get(&self, season: Season, var: OffsetVariable) -> f64 {
        self.deltas.get(&(season, var)).copied().unwrap_or(0.0)
    }

    pub fn negated(&self) -> StationOffsets {
        StationOffsets {
            deltas: self.deltas.iter().map(|(k, d)| (*k, -d)).collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (Season, OffsetVariable, f64)> + '_ {
        self.deltas.iter().map(|((s, v), d)| (*s, *v, *d))
    }

    fn shift(&self, season: Season, var: OffsetVariable, value: f64) -> f64 {
        let d = self.get(season, var);
        // Skipping the zero case keeps a zero offset the exact identity.
        if d == 0.0 {
            value
        } else {
            value + d
        }
    }

    pub fn apply_seasonal(&self, season: Season, agg: &SeasonalAggregate) -> SeasonalAggregate {
        SeasonalAggregate {
            mst: self.shift(season, OffsetVariable::Mst, agg.mst),
            msdmt: self.shift(season, OffsetVariable::Msdmt, agg.msdmt),
            msdmt_min: self.shift(season, OffsetVariable::MsdmtMin, agg.msdmt_min),
            msr: self.shift(season, OffsetVariable::Msr, agg.msr),
            nsrd: self.shift(season, OffsetVariable::Nsrd, agg.nsrd),
        }
    }

    pub fn apply_myt(&self, season: Season, myt: f64) -> f64 {
        self.shift(season, OffsetVariable::Myt, myt)
    }
}

/// Offsets keyed by station id. Stations without an entry are left as-is.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OffsetTable {
    by_station: BTreeMap<String, StationOffsets>,
}

impl OffsetTable {
    pub fn empty() -> OffsetTable {
        OffsetTable::default()
    }

    pub fn insert(&mut self, station_id: impl Into<String>, offsets: StationOffsets) {
        self.by_station.insert(station_id.into(), offsets);
    }

    pub fn for_station(&self, station_id: &str) -> Option<&StationOffsets> {
        self.by_station.get(station_id)
    }

    pub fn stations(&self) -> impl Iterator<Item = (&String, &StationOffsets)> {
        self.by_station.iter()
    }
}

pub(crate) fn days_in_month(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days() as u32
}

/// Aggregate daily records of a single station into monthly records.
/// A day is rainy when its rainfall reaches `rainy_threshold_mm`.
pub fn monthly_from_daily(
    records: &[DailyRecord],
    rainy_threshold_mm: f64,
) -> Result<Vec<MonthlyRecord>, WeatherError> {
    if !(rainy_threshold_mm > 0.0) {
        return Err(WeatherError::InvalidThreshold(rainy_threshold_mm));
    }
    let station_id = match records.first() {
        Some(r) => r.station_id.clone(),
        None => return Ok(Vec::new()),
    };

    struct Acc {
        tmin_sum: f64,
        tmax_sum: f64,
        tmean_sum: f64,
        rain_total: f64,
        rainy_days: u32,
        dates: Vec<NaiveDate>,
    }

    let mut by_month: BTreeMap<(i32, u32), Acc> = BTreeMap::new();
    for r in records {
        if r.station_id != station_id {
            return Err(WeatherError::MixedStations {
                expected: station_id,
                found: r.station_id.clone(),
            });
        }
        let acc = by_month
            .entry((r.date.year(), r.date.month()))
            .or_insert_with(|| Acc {
                tmin_sum: 0.0,
                tmax_sum: 0.0,
                tmean_sum: 0.0,
                rain_total: 0.0,
                rainy_days: 0,
                dates: Vec::new(),
            });
        if acc.dates.contains(&r.date) {
            return Err(WeatherError::DuplicateDate {
                station: station_id,
                date: r.date,
            });
        }
        acc.dates.push(r.date);
        acc.tmin_sum += r.tmin_c;
        acc.tmax_sum += r.tmax_c;
        acc.tmean_sum += r.tmean_c;
        acc.rain_total += r.rain_mm;
        if r.rain_mm >= rainy_threshold_mm {
            acc.rainy_days += 1;
        }
    }

    Ok(by_month
        .into_iter()
        .map(|((year, month), acc)| {
            let n = acc.dates.len() as f64;
            MonthlyRecord {
                station_id: station_id.clone(),
                year,
                month,
                tmin_mean_c: acc.tmin_sum / n,
                tmax_mean_c: acc.tmax_sum / n,
                tmean_c: acc.tmean_sum / n,
                rain_total_mm: acc.rain_total,
                rainy_days: acc.rainy_days,
                days_present: acc.dates.len() as u32,
            }
        })
        .collect())
}

fn find_month<'a>(
    months: &'a [MonthlyRecord],
    year: i32,
    month: u32,
) -> Result<Option<&'a MonthlyRecord>, WeatherError> {
    let mut found = None;
    for m in months.iter().filter(|m| m.year == year && m.month == month) {
        if found.is_some() {
            return Err(WeatherError::DuplicateMonth { year, month });
        }
        found = Some(m);
    }
    Ok(found)
}

/// Seasonal aggregate for (year, season), or `None` when the fraction of
/// days covered falls below `min_coverage` — missing data is never filled in.
pub fn seasonal_aggregate(
    months: &[MonthlyRecord],
    year: i32,
    season: Season,
    min_coverage: f64,
) -> Result<Option<SeasonalAggregate>, WeatherError> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(WeatherError::InvalidCoverage(min_coverage));
    }
    let mut days_expected = 0u32;
    let mut days_present = 0u32;
    let mut weighted = (0.0, 0.0, 0.0); // (tmean, tmax_mean, tmin_mean) sums
    let mut msr = 0.0;
    let mut nsrd = 0u32;
    for (dy, month) in season.months() {
        let y = year + dy;
        days_expected += days_in_month(y, month);
        if let Some(m) = find_month(months, y, month)? {
            days_present += m.days_present;
            let w = m.days_present as f64;
            weighted.0 += m.tmean_c * w;
            weighted.1 += m.tmax_mean_c * w;
            weighted.2 += m.tmin_mean_c * w;
            msr += m.rain_total_mm;
            nsrd += m.rainy_days;
        }
    }
    if (days_present as f64) < min_coverage * days_expected as f64 {
        return Ok(None);
    }
    let w = days_present as f64;
    Ok(Some(SeasonalAggregate {
        mst: weighted.0 / w,
        msdmt: weighted.1 / w,
        msdmt_min: weighted.2 / w,
        msr,
        nsrd: nsrd as f64,
    }))
}

/// Day-weighted mean temperature over the calendar year, or `None` when
/// coverage is insufficient.
pub fn mean_yearly_temperature(
    months: &[MonthlyRecord],
    year: i32,
    min_coverage: f64,
) -> Result<Option<f64>, WeatherError> {
    if !(min_coverage > 0.0 && min_coverage <= 1.0) {
        return Err(WeatherError::InvalidCoverage(min_coverage));
    }
    let mut days_expected = 0u32;
    let mut days_present = 0u32;
    let mut weighted = 0.0;
    for month in 1..=12 {
        days_expected += days_in_month(year, month);
        if let Some(m) = find_month(months, year, month)? {
            days_present += m.days_present;
            weighted += m.tmean_c * m.days_present as f64;
        }
    }
    if (days_present as f64) < min_coverage * days_expected as f64 {
        return Ok(None);
    }
    Ok(Some(weighted / days_present as f64))
}

/// Every seasonal and yearly aggregate derivable from one station's
/// monthly records.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station_id: String,
    pub seasonal: BTreeMap<(i32, Season), SeasonalAggregate>,
    pub yearly: BTreeMap<i32, f64>,
}

/// Compute all aggregates for a single station.
pub fn station_series(
    months: &[MonthlyRecord],
    min_coverage: f64,
) -> Result<StationSeries, WeatherError> {
    let station_id = match months.first() {
        Some(m) => m.station_id.clone(),
        None => {
            return Ok(StationSeries {
                station_id: String::new(),
                seasonal: BTreeMap::new(),
                yearly: BTreeMap::new(),
            })
        }
    };
    for m in months {
        if m.station_id != station_id {
            return Err(WeatherError::MixedStations {
                expected: station_id,
                found: m.station_id.clone(),
            });
        }
    }
    let min_year = months.iter().map(|m| m.year).min().expect("non-empty");
    let max_year = months.iter().map(|m| m.year).max().expect("non-empty");

    let mut seasonal = BTreeMap::new();
    // December of max_year belongs to the following winter.
    for year in min_year..=max_year + 1 {
        for season in Season::ALL {
            if let Some(agg) = seasonal_aggregate(months, year, season, min_coverage)? {
                seasonal.insert((year, season), agg);
            }
        }
    }
    let mut yearly = BTreeMap::new();
    for year in min_year..=max_year {
        if let Some(myt) = mean_yearly_temperature(months, year, min_coverage)? {
            yearly.insert(year, myt);
        }
    }
    Ok(StationSeries {
        station_id,
        seasonal,
        yearly,
    })
}

fn check_feature(
    year: i32,
    season: Season,
    agg: &SeasonalAggregate,
) -> Result<(), WeatherError> {
    let fail = |variable: &'static str, detail: String| WeatherError::InvalidAfterOffset {
        year,
        season,
        variable,
        detail,
    };
    if !(agg.msdmt_min <= agg.mst && agg.mst <= agg.msdmt) {
        return Err(fail(
            "mst",
            format!(
                "temperature ordering broken: {} <= {} <= {} fails",
                agg.msdmt_min, agg.mst, agg.msdmt
            ),
        ));
    }
    if agg.msr < 0.0 {
        return Err(fail("msr", format!("negative rainfall {}", agg.msr)));
    }
    if agg.nsrd < 0.0 {
        return Err(fail("nsrd", format!("negative rainy days {}", agg.nsrd)));
    }
    Ok(())
}

/// Join the stations' aggregates into the labeled dataset.
///
/// A vector is emitted for (year, season) exactly when all eight inputs
/// exist there and the same season of the following year has a mean
/// temperature to serve as the target. Offsets are applied to each
/// station's values before joining; supplying the same (year, season) from
/// two stations is a conflict.
pub fn build_dataset(
    stations: &[StationSeries],
    offsets: &OffsetTable,
) -> Result<Vec<FeatureVector>, WeatherError> {
    struct Adjusted {
        agg: SeasonalAggregate,
        myt: Option<f64>,
    }

    let mut merged: BTreeMap<(i32, Season), Adjusted> = BTreeMap::new();
    let mut owners: BTreeMap<(i32, Season), String> = BTreeMap::new();
    let mut conflicts: Vec<String> = Vec::new();

    for station in stations {
        let adjust = offsets.for_station(&station.station_id);
        for ((year, season), agg) in &station.seasonal {
            if let Some(owner) = owners.get(&(*year, *season)) {
                conflicts.push(format!(
                    "{} {} from `{}` and `{}`",
                    year, season, owner, station.station_id
                ));
                continue;
            }
            owners.insert((*year, *season), station.station_id.clone());
            let adjusted = match adjust {
                Some(offs) => offs.apply_seasonal(*season, agg),
                None => *agg,
            };
            check_feature(*year, *season, &adjusted)?;
            let myt = station.yearly.get(year).map(|m| match adjust {
                Some(offs) => offs.apply_myt(*season, *m),
                None => *m,
            });
            merged.insert((*year, *season), Adjusted { agg: adjusted, myt });
        }
    }
    if !conflicts.is_empty() {
        return Err(WeatherError::SeasonConflict(
            format!("{} key(s)", conflicts.len()),
            conflicts.join("; "),
        ));
    }

    let mut out = Vec::new();
    for ((year, season), entry) in &merged {
        let myt = match entry.myt {
            Some(m) => m,
            None => continue,
        };
        let next = match merged.get(&(year + 1, *season)) {
            Some(next) => next,
            None => continue,
        };
        out.push(FeatureVector {
            year: *year,
            season: *season,
            mst: entry.agg.mst,
            msdmt: entry.agg.msdmt,
            msdmt_min: entry.agg.msdmt_min,
            myt,
            msr: entry.agg.msr,
            nsrd: entry.agg.nsrd,
            mstny: next.agg.mst,
        });
    }
    // BTreeMap iteration already orders by (year, season code).
    Ok(out)
}

/// Split `0..n` into `k` disjoint folds whose sizes differ by at most one.
/// Deterministic in `seed`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, WeatherError> {
    if k < 2 || k > n {
        return Err(WeatherError::InvalidFolds { n, k });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, idx) in indices.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    Ok(folds)
}

#[cfg(test)]
mod tests;
