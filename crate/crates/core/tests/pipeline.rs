//! Generated-corpus properties of the data pipeline: exact CSV round trips,
//! no-interpolation gap propagation, offset identities, the target-linkage
//! invariant, and fold-splitting contracts.

use chrono::NaiveDate;
use proptest::prelude::*;
use seasoncast_core::weather::{
    build_dataset, kfold_split, parse_daily_csv, station_series, write_daily_csv, DailyRecord,
    MonthlyRecord, OffsetTable, OffsetVariable, Season, StationOffsets,
};

fn full_month(station: &str, year: i32, month: u32, tmean: f64) -> MonthlyRecord {
    let days = {
        let first = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
        let next = if month == 12 {
            NaiveDate::from_ymd_opt(year + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(year, month + 1, 1)
        }
        .unwrap();
        (next - first).num_days() as u32
    };
    MonthlyRecord {
        station_id: station.to_string(),
        year,
        month,
        tmin_mean_c: tmean - 4.0,
        tmax_mean_c: tmean + 4.0,
        tmean_c: tmean,
        rain_total_mm: 50.0 + (month as f64) * 3.0,
        rainy_days: 6,
        days_present: days,
    }
}

fn monthly_range(station: &str, start: i32, end: i32) -> Vec<MonthlyRecord> {
    let mut out = vec![full_month(station, start - 1, 12, 6.0)];
    for year in start..=end {
        for month in 1..=12 {
            let tmean =
                13.0 + 9.0 * ((month as f64 - 1.5) / 12.0 * std::f64::consts::TAU).sin();
            out.push(full_month(station, year, month, tmean));
        }
    }
    out
}

fn daily_strategy() -> impl Strategy<Value = DailyRecord> {
    (
        "[A-Z]{2,4}",
        1900..2100i32,
        1..=12u32,
        1..=28u32,
        -30.0..45.0f64,
        0.0..12.0f64,
        0.0..12.0f64,
        0.0..400.0f64,
    )
        .prop_map(|(station_id, y, m, d, tmean, below, above, rain_mm)| DailyRecord {
            station_id,
            date: NaiveDate::from_ymd_opt(y, m, d).unwrap(),
            tmin_c: tmean - below,
            tmax_c: tmean + above,
            tmean_c: tmean,
            rain_mm,
        })
}

proptest! {
    #[test]
    fn daily_csv_print_then_parse_is_exact(records in prop::collection::vec(daily_strategy(), 0..40)) {
        let text = write_daily_csv(&records);
        let parsed = parse_daily_csv(&text).unwrap();
        prop_assert!(parsed.issues.is_empty(), "{:?}", parsed.issues);
        prop_assert_eq!(parsed.records, records);
    }

    #[test]
    fn kfold_folds_are_disjoint_and_cover_everything(
        (n, k) in (2usize..1000).prop_flat_map(|n| (Just(n), 2usize..=n)),
        seed in any::<u64>(),
    ) {
        let folds = kfold_split(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![false; n];
        for fold in &folds {
            for &idx in fold {
                prop_assert!(!seen[idx], "index {} appears twice", idx);
                seen[idx] = true;
            }
        }
        prop_assert!(seen.iter().all(|s| *s), "union is incomplete");
        let min = folds.iter().map(|f| f.len()).min().unwrap();
        let max = folds.iter().map(|f| f.len()).max().unwrap();
        prop_assert!(max - min <= 1, "sizes differ by more than one");
    }

    #[test]
    fn offset_then_negation_is_identity_on_dyadic_values(
        mst_16 in -320i32..640,
        spread_16 in 16i32..160,
        rain_4 in 0i32..4000,
        d_mst_4 in -32i32..32,
        d_rain_4 in -32i32..32,
    ) {
        let agg = seasoncast_core::weather::SeasonalAggregate {
            mst: mst_16 as f64 / 16.0,
            msdmt: (mst_16 + spread_16) as f64 / 16.0,
            msdmt_min: (mst_16 - spread_16) as f64 / 16.0,
            msr: rain_4 as f64 / 4.0,
            nsrd: 9.0,
        };
        let mut offsets = StationOffsets::zero();
        offsets.set(Season::Autumn, OffsetVariable::Mst, d_mst_4 as f64 / 4.0);
        offsets.set(Season::Autumn, OffsetVariable::Msr, d_rain_4 as f64 / 4.0);
        let round_trip = offsets
            .negated()
            .apply_seasonal(Season::Autumn, &offsets.apply_seasonal(Season::Autumn, &agg));
        prop_assert_eq!(round_trip, agg);
    }

    #[test]
    fn gap_years_produce_no_vectors_and_links_hold(gap_start in 1942i32..=1945, gap_len in 1i32..=4) {
        let gap_end = gap_start + gap_len - 1;
        let mut months = monthly_range("BN", 1935, 1955);
        months.retain(|m| !(gap_start..=gap_end).contains(&m.year));
        let series = station_series(&months, 0.8).unwrap();
        let rows = build_dataset(&[series.clone()], &OffsetTable::empty()).unwrap();
        prop_assert!(!rows.is_empty());
        for row in &rows {
            // Inputs come from row.year, the target from row.year + 1;
            // neither side may touch the gap.
            prop_assert!(
                row.year + 1 < gap_start || row.year > gap_end,
                "row year {} overlaps gap {}..={}",
                row.year, gap_start, gap_end
            );
            // Target linkage: MSTNY is the next year's same-season MST.
            let next = series.seasonal[&(row.year + 1, row.season)];
            prop_assert_eq!(row.mstny, next.mst);
            prop_assert!(row.msdmt_min <= row.mst && row.mst <= row.msdmt);
        }
    }
}

#[test]
fn zero_offsets_and_absent_offsets_agree_byte_for_byte() {
    let months = monthly_range("BN", 1950, 1954);
    let series = station_series(&months, 0.8).unwrap();
    let plain = build_dataset(&[series.clone()], &OffsetTable::empty()).unwrap();
    let mut zeros = StationOffsets::zero();
    for season in Season::ALL {
        for var in OffsetVariable::ALL {
            zeros.set(season, var, 0.0);
        }
    }
    let mut table = OffsetTable::empty();
    table.insert("BN", zeros);
    let shifted = build_dataset(&[series], &table).unwrap();
    let a = seasoncast_core::weather::write_feature_csv(&plain, true, None);
    let b = seasoncast_core::weather::write_feature_csv(&shifted, true, None);
    assert_eq!(a, b);
}
