use super::*;
use approx::assert_relative_eq;

fn day(station: &str, date: &str, tmean: f64, rain: f64) -> DailyRecord {
    DailyRecord {
        station_id: station.to_string(),
        date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
        tmin_c: tmean - 3.0,
        tmax_c: tmean + 3.0,
        tmean_c: tmean,
        rain_mm: rain,
    }
}

fn full_month(station: &str, year: i32, month: u32, tmean: f64, rain: f64, rainy: u32) -> MonthlyRecord {
    let days = days_in_month(year, month);
    MonthlyRecord {
        station_id: station.to_string(),
        year,
        month,
        tmin_mean_c: tmean - 3.0,
        tmax_mean_c: tmean + 3.0,
        tmean_c: tmean,
        rain_total_mm: rain,
        rainy_days: rainy,
        days_present: days,
    }
}

/// Months spanning Dec `start-1` through Dec `end` with a season-shaped
/// temperature cycle, so every season of `start..=end` aggregates fully.
fn synthetic_months(station: &str, start: i32, end: i32) -> Vec<MonthlyRecord> {
    let mut months = Vec::new();
    months.push(full_month(station, start - 1, 12, 5.0, 80.0, 10));
    for year in start..=end {
        for month in 1..=12 {
            let tmean = 12.0 + 8.0 * ((month as f64 - 1.0) / 12.0 * std::f64::consts::TAU).sin()
                + 0.05 * (year - start) as f64;
            months.push(full_month(station, year, month, tmean, 60.0, 8));
        }
    }
    months
}

#[test]
fn daily_csv_parses_a_plain_record() {
    let text = "station_id,date,tmin_c,tmax_c,tmean_c,rain_mm\nBN,1950-01-03,2.0,9.0,5.5,0.0\n";
    let parsed = parse_daily_csv(text).unwrap();
    assert!(parsed.issues.is_empty());
    assert_eq!(
        parsed.records,
        vec![DailyRecord {
            station_id: "BN".to_string(),
            date: NaiveDate::from_ymd_opt(1950, 1, 3).unwrap(),
            tmin_c: 2.0,
            tmax_c: 9.0,
            tmean_c: 5.5,
            rain_mm: 0.0,
        }]
    );
}

#[test]
fn daily_csv_empty_body_gives_empty_list() {
    let parsed = parse_daily_csv("station_id,date,tmin_c,tmax_c,tmean_c,rain_mm\n").unwrap();
    assert!(parsed.records.is_empty());
    assert!(parsed.issues.is_empty());
}

#[test]
fn daily_csv_missing_header_is_a_format_error() {
    let err = parse_daily_csv("BN,1950-01-03,2.0,9.0,5.5,0.0\n").unwrap_err();
    assert!(matches!(err, WeatherError::Format(_)), "{err}");
}

#[test]
fn daily_csv_inverted_extremes_name_the_line() {
    let text = "station_id,date,tmin_c,tmax_c,tmean_c,rain_mm\n\
                BN,1950-01-03,2.0,9.0,5.5,0.0\n\
                BN,1950-01-04,10.0,5.0,7.0,0.0\n";
    let parsed = parse_daily_csv(text).unwrap();
    assert_eq!(parsed.records.len(), 1);
    assert_eq!(parsed.issues.len(), 1);
    assert_eq!(parsed.issues[0].line, 3);
    assert!(parsed.issues[0].message.contains("ordering"));
}

#[test]
fn daily_csv_malformed_number_names_the_line() {
    let text = "station_id,date,tmin_c,tmax_c,tmean_c,rain_mm\nBN,1950-01-03,2.0,x,5.5,0.0\n";
    let parsed = parse_daily_csv(text).unwrap();
    assert_eq!(parsed.issues[0].line, 2);
    assert!(parsed.issues[0].message.contains("tmax_c"));
}

#[test]
fn monthly_aggregation_of_constant_month() {
    let records: Vec<DailyRecord> = (1..=31)
        .map(|d| day("BN", &format!("1950-01-{d:02}"), 10.0, 0.0))
        .collect();
    let months = monthly_from_daily(&records, 1.0).unwrap();
    assert_eq!(months.len(), 1);
    let m = &months[0];
    assert_eq!(m.tmean_c, 10.0);
    assert_eq!(m.rain_total_mm, 0.0);
    assert_eq!(m.rainy_days, 0);
    assert_eq!(m.days_present, 31);
}

#[test]
fn monthly_aggregation_counts_rainy_days_by_threshold() {
    let records = vec![
        day("BN", "1950-01-01", 5.0, 0.5),
        day("BN", "1950-01-02", 5.0, 2.0),
    ];
    let months = monthly_from_daily(&records, 1.0).unwrap();
    assert_eq!(months[0].rainy_days, 1);
    assert_relative_eq!(months[0].rain_total_mm, 2.5);
}

#[test]
fn monthly_aggregation_takes_arithmetic_means() {
    let records = vec![
        day("BN", "1950-01-01", 4.0, 0.0),
        day("BN", "1950-01-02", 6.0, 0.0),
    ];
    let months = monthly_from_daily(&records, 1.0).unwrap();
    assert_eq!(months[0].tmean_c, 5.0);
}

#[test]
fn monthly_aggregation_rejects_mixed_stations() {
    let records = vec![
        day("BN", "1950-01-01", 4.0, 0.0),
        day("CV", "1950-01-02", 6.0, 0.0),
    ];
    let err = monthly_from_daily(&records, 1.0).unwrap_err();
    assert!(matches!(err, WeatherError::MixedStations { .. }));
}

#[test]
fn monthly_aggregation_rejects_duplicate_dates() {
    let records = vec![
        day("BN", "1950-01-01", 4.0, 0.0),
        day("BN", "1950-01-01", 6.0, 0.0),
    ];
    assert!(matches!(
        monthly_from_daily(&records, 1.0),
        Err(WeatherError::DuplicateDate { .. })
    ));
}

#[test]
fn monthly_aggregation_rejects_non_positive_threshold() {
    assert!(matches!(
        monthly_from_daily(&[], 0.0),
        Err(WeatherError::InvalidThreshold(_))
    ));
}

#[test]
fn seasonal_aggregate_of_constant_winter() {
    let months = vec![
        full_month("BN", 1949, 12, 5.0, 100.0, 10),
        full_month("BN", 1950, 1, 5.0, 100.0, 10),
        full_month("BN", 1950, 2, 5.0, 100.0, 10),
    ];
    let agg = seasonal_aggregate(&months, 1950, Season::Winter, 0.8)
        .unwrap()
        .unwrap();
    assert_relative_eq!(agg.mst, 5.0);
    assert_relative_eq!(agg.msr, 300.0);
    assert_relative_eq!(agg.nsrd, 30.0);
}

#[test]
fn seasonal_aggregate_missing_month_is_missing_not_interpolated() {
    let months = vec![
        full_month("BN", 1950, 3, 10.0, 50.0, 5),
        full_month("BN", 1950, 4, 12.0, 50.0, 5),
    ];
    // Two of three spring months: coverage 61/92 < 0.8.
    assert_eq!(
        seasonal_aggregate(&months, 1950, Season::Spring, 0.8).unwrap(),
        None
    );
}

#[test]
fn seasonal_aggregate_is_day_weighted() {
    // Equal synthetic day counts make the weighted mean the plain mean.
    let mut months = vec![
        full_month("BN", 1950, 3, 4.0, 0.0, 0),
        full_month("BN", 1950, 4, 5.0, 0.0, 0),
        full_month("BN", 1950, 5, 6.0, 0.0, 0),
    ];
    for m in &mut months {
        m.days_present = 30;
    }
    let agg = seasonal_aggregate(&months, 1950, Season::Spring, 0.8)
        .unwrap()
        .unwrap();
    assert_relative_eq!(agg.mst, 5.0);
}

#[test]
fn winter_uses_december_of_previous_year() {
    let months = vec![
        full_month("BN", 1950, 12, 0.0, 0.0, 0),
        full_month("BN", 1951, 1, 6.0, 0.0, 0),
        full_month("BN", 1951, 2, 6.0, 0.0, 0),
    ];
    let agg = seasonal_aggregate(&months, 1951, Season::Winter, 0.8)
        .unwrap()
        .unwrap();
    // 31 days at 0 and 59 days at 6, day-weighted.
    assert_relative_eq!(agg.mst, 6.0 * 59.0 / 90.0, max_relative = 1e-12);
    // Winter 1950 itself lacks Dec 1949 + Jan/Feb 1950.
    assert_eq!(
        seasonal_aggregate(&months, 1950, Season::Winter, 0.8).unwrap(),
        None
    );
}

#[test]
fn yearly_mean_of_constant_year() {
    let months: Vec<MonthlyRecord> =
        (1..=12).map(|m| full_month("BN", 1950, m, 15.0, 0.0, 0)).collect();
    assert_relative_eq!(
        mean_yearly_temperature(&months, 1950, 0.8).unwrap().unwrap(),
        15.0
    );
}

#[test]
fn yearly_mean_is_day_weighted_over_present_months() {
    let mut months: Vec<MonthlyRecord> = (1..=12)
        .map(|m| full_month("BN", 1950, m, if m <= 6 { 10.0 } else { 20.0 }, 0.0, 0))
        .collect();
    for m in &mut months {
        m.days_present = 30;
    }
    assert_relative_eq!(
        mean_yearly_temperature(&months, 1950, 0.8).unwrap().unwrap(),
        15.0
    );
}

#[test]
fn yearly_mean_below_coverage_is_missing() {
    let months: Vec<MonthlyRecord> =
        (1..=5).map(|m| full_month("BN", 1950, m, 15.0, 0.0, 0)).collect();
    assert_eq!(mean_yearly_temperature(&months, 1950, 0.8).unwrap(), None);
}

#[test]
fn three_full_years_give_eight_vectors() {
    let months = synthetic_months("BN", 1950, 1952);
    let series = station_series(&months, 0.8).unwrap();
    let rows = build_dataset(&[series], &OffsetTable::empty()).unwrap();
    assert_eq!(rows.len(), 8);
    // Ordered by (year, season code).
    let keys: Vec<(i32, u8)> = rows.iter().map(|r| (r.year, r.season.code())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys[0], (1950, 1));
    assert_eq!(keys[7], (1951, 4));
}

#[test]
fn target_links_to_next_years_same_season() {
    let months = synthetic_months("BN", 1950, 1952);
    let series = station_series(&months, 0.8).unwrap();
    let rows = build_dataset(&[series.clone()], &OffsetTable::empty()).unwrap();
    for row in &rows {
        let next = series.seasonal[&(row.year + 1, row.season)];
        assert_eq!(row.mstny, next.mst);
    }
}

#[test]
fn war_gap_years_produce_no_vectors() {
    let mut months = synthetic_months("BN", 1940, 1950);
    months.retain(|m| !(1942..=1948).contains(&m.year));
    let series = station_series(&months, 0.8).unwrap();
    let rows = build_dataset(&[series], &OffsetTable::empty()).unwrap();
    assert!(!rows.is_empty());
    for row in &rows {
        assert!(
            !(1941..=1948).contains(&row.year),
            "year {} should have no vector (inputs or target missing)",
            row.year
        );
    }
    // 1940 -> 1941 pairs survive on the near side of the gap.
    assert!(rows.iter().any(|r| r.year == 1940));
    assert!(rows.iter().any(|r| r.year == 1949));
}

#[test]
fn zero_offset_is_the_identity() {
    let months = synthetic_months("BN", 1950, 1952);
    let series = station_series(&months, 0.8).unwrap();
    let plain = build_dataset(&[series.clone()], &OffsetTable::empty()).unwrap();

    let mut zero = StationOffsets::zero();
    for season in Season::ALL {
        for var in OffsetVariable::ALL {
            zero.set(season, var, 0.0);
        }
    }
    let mut table = OffsetTable::empty();
    table.insert("BN", zero);
    let shifted = build_dataset(&[series], &table).unwrap();
    assert_eq!(plain, shifted);
}

#[test]
fn offsets_shift_only_the_targeted_station_and_season() {
    let months = synthetic_months("BN", 1950, 1952);
    let series = station_series(&months, 0.8).unwrap();
    let mut offsets = StationOffsets::zero();
    offsets.set(Season::Summer, OffsetVariable::Mst, 1.5);
    let mut table = OffsetTable::empty();
    table.insert("BN", offsets);
    let plain = build_dataset(&[series.clone()], &OffsetTable::empty()).unwrap();
    let shifted = build_dataset(&[series], &table).unwrap();
    for (a, b) in plain.iter().zip(&shifted) {
        if a.season == Season::Summer {
            assert_relative_eq!(b.mst, a.mst + 1.5);
        } else {
            assert_eq!(a.mst, b.mst);
        }
        assert_eq!(a.msr, b.msr);
    }
}

#[test]
fn offset_then_negation_is_identity_on_dyadic_grid() {
    // Values on a 1/16 grid with deltas on a 1/4 grid stay exact in f64.
    let agg = SeasonalAggregate {
        mst: 12.0 + 5.0 / 16.0,
        msdmt: 18.0 + 3.0 / 16.0,
        msdmt_min: 6.0 + 1.0 / 16.0,
        msr: 240.25,
        nsrd: 22.0,
    };
    let mut offsets = StationOffsets::zero();
    offsets.set(Season::Spring, OffsetVariable::Mst, 1.25);
    offsets.set(Season::Spring, OffsetVariable::Msdmt, -0.75);
    offsets.set(Season::Spring, OffsetVariable::Msr, 10.5);
    offsets.set(Season::Spring, OffsetVariable::Nsrd, -2.0);
    let back = offsets
        .negated()
        .apply_seasonal(Season::Spring, &offsets.apply_seasonal(Season::Spring, &agg));
    assert_eq!(back, agg);
}

#[test]
fn conflicting_station_seasons_are_an_error() {
    let a = station_series(&synthetic_months("BN", 1950, 1952), 0.8).unwrap();
    let b = station_series(&synthetic_months("CV", 1951, 1953), 0.8).unwrap();
    let err = build_dataset(&[a, b], &OffsetTable::empty()).unwrap_err();
    match err {
        WeatherError::SeasonConflict(_, detail) => {
            assert!(detail.contains("1951"), "{detail}");
            assert!(detail.contains("BN") && detail.contains("CV"));
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn disjoint_station_eras_join_across_the_boundary() {
    let a = station_series(&synthetic_months("BN", 1950, 1952), 0.8).unwrap();
    let mut late = synthetic_months("CV", 1953, 1955);
    // Drop Dec 1952 from CV so the stations share no (year, season) key:
    // winter 1953 then comes only from CV's own coverage.
    late.retain(|m| !(m.year == 1952 && m.month == 12));
    let b = station_series(&late, 0.8).unwrap();
    let rows = build_dataset(&[a, b], &OffsetTable::empty()).unwrap();
    // 1952 rows need 1953 aggregates: present for spring/summer/autumn
    // (winter 1953 lacks its December) and for winter via nothing.
    assert!(rows.iter().any(|r| r.year == 1952 && r.season == Season::Spring));
    assert!(!rows.iter().any(|r| r.year == 1952 && r.season == Season::Winter));
}

#[test]
fn kfold_ten_of_ten_gives_singletons() {
    let folds = kfold_split(10, 10, 1).unwrap();
    assert_eq!(folds.len(), 10);
    assert!(folds.iter().all(|f| f.len() == 1));
}

#[test]
fn kfold_248_by_10_sizes() {
    let folds = kfold_split(248, 10, 7).unwrap();
    let mut sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![24, 24, 25, 25, 25, 25, 25, 25, 25, 25]);
}

#[test]
fn kfold_is_deterministic() {
    assert_eq!(kfold_split(100, 7, 3).unwrap(), kfold_split(100, 7, 3).unwrap());
    assert_ne!(kfold_split(100, 7, 3).unwrap(), kfold_split(100, 7, 4).unwrap());
}

#[test]
fn kfold_rejects_bad_fold_counts() {
    assert!(matches!(
        kfold_split(5, 6, 0),
        Err(WeatherError::InvalidFolds { .. })
    ));
    assert!(matches!(
        kfold_split(5, 1, 0),
        Err(WeatherError::InvalidFolds { .. })
    ));
}

#[test]
fn feature_csv_round_trips() {
    let months = synthetic_months("BN", 1950, 1952);
    let series = station_series(&months, 0.8).unwrap();
    let rows = build_dataset(&[series], &OffsetTable::empty()).unwrap();
    let text = write_feature_csv(&rows, true, Some("seed=42"));
    let parsed = parse_feature_csv(&text).unwrap();
    assert!(parsed.has_targets);
    assert!(parsed.issues.is_empty());
    assert_eq!(parsed.rows, rows);
}

#[test]
fn feature_csv_without_targets_is_recognized() {
    let text = "year,season_code,mst,msdmt,msdmt_min,myt,msr,nsrd\n1950,1,5,8,2,14,300,30\n";
    let parsed = parse_feature_csv(text).unwrap();
    assert!(!parsed.has_targets);
    assert_eq!(parsed.rows.len(), 1);
    assert!(parsed.rows[0].mstny.is_nan());
}

#[test]
fn feature_csv_rejects_unknown_season_code() {
    let text = "year,season_code,mst,msdmt,msdmt_min,myt,msr,nsrd,mstny\n1950,5,5,8,2,14,300,30,6\n";
    let parsed = parse_feature_csv(text).unwrap();
    assert_eq!(parsed.rows.len(), 0);
    assert!(parsed.issues[0].message.contains("unknown season code 5"));
}

#[test]
fn offsets_csv_round_trips() {
    let text = "station_id,season_code,variable,delta\nCV,1,mst,-0.35\nCV,3,msr,12.5\nBN,2,nsrd,1\n";
    let table = parse_offsets_csv(text).unwrap();
    assert_eq!(
        table.for_station("CV").unwrap().get(Season::Winter, OffsetVariable::Mst),
        -0.35
    );
    let rewritten = write_offsets_csv(&table);
    assert_eq!(parse_offsets_csv(&rewritten).unwrap(), table);
}

#[test]
fn offsets_csv_rejects_unknown_variable() {
    let text = "station_id,season_code,variable,delta\nCV,1,bogus,-0.35\n";
    let err = parse_offsets_csv(text).unwrap_err();
    assert!(matches!(err, WeatherError::Format(_)));
    assert!(err.to_string().contains("bogus"));
}

#[test]
fn monthly_csv_round_trips() {
    let months = synthetic_months("BN", 1950, 1951);
    let text = write_monthly_csv(&months);
    let parsed = parse_monthly_csv(&text).unwrap();
    assert!(parsed.issues.is_empty());
    assert_eq!(parsed.records, months);
}
