//! Error and determination metrics, k-fold cross-validation, and
//! finite-difference variable sensitivity, shared by both model families.

use crate::expr::Expr;
use crate::expr::Variable;
use crate::seed::derive_seed;
use crate::weather::{kfold_split, FeatureVector};
use rayon::prelude::*;
use std::fmt;

/// Elements with |actual| at or below this guard are skipped by
/// `percent_error` (relative error against a near-zero temperature is
/// meaningless).
pub const PERCENT_ERROR_GUARD_C: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("inputs must be non-empty and of equal length (pred {pred}, actual {actual})")]
    BadLengths { pred: usize, actual: usize },
    #[error("actual values have zero variance; R^2 is undefined")]
    ZeroVarianceActuals,
    #[error("every element was skipped by the |actual| > {PERCENT_ERROR_GUARD_C} guard")]
    AllSkipped,
    #[error("dataset split failed: {0}")]
    Split(String),
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
    #[error("sensitivity needs at least 2 rows, got {0}")]
    NotEnoughRows(usize),
    #[error("formula is non-finite at row {row}{context}")]
    NonFiniteFormula { row: usize, context: String },
    #[error("model output has zero variance over the rows; sensitivity is undefined")]
    ConstantModel,
}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<(), MetricsError> {
    if pred.is_empty() || pred.len() != actual.len() {
        return Err(MetricsError::BadLengths {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(pred: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(pred, actual)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / n)
}

/// Coefficient of determination: 1 - SS_res / SS_tot, with SS_tot taken
/// about the mean of the actual values.
pub fn r_squared(pred: &[f64], actual: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(pred, actual)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVarianceActuals);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean absolute percentage error with its skip count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentError {
    pub value: f64,
    /// Elements dropped by the near-zero-actual guard.
    pub skipped: usize,
}

/// Mean absolute prediction error relative to the actual value, in percent.
pub fn percent_error(pred: &[f64], actual: &[f64]) -> Result<PercentError, MetricsError> {
    check_lengths(pred, actual)?;
    let mut sum = 0.0;
    let mut kept = 0usize;
    for (p, a) in pred.iter().zip(actual) {
        if a.abs() > PERCENT_ERROR_GUARD_C {
            sum += (p - a).abs() / a.abs();
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(MetricsError::AllSkipped);
    }
    Ok(PercentError {
        value: 100.0 * sum / kept as f64,
        skipped: pred.len() - kept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub percent_error: f64,
    pub r_squared: f64,
    pub skipped: usize,
}

/// Per-fold metrics plus their arithmetic means.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldMetrics>,
    pub mean_percent_error: f64,
    pub mean_r_squared: f64,
}

/// k-fold cross-validation. For each fold, `factory` trains a fresh model
/// on the complement (receiving a seed derived from `(seed, fold)`) and the
/// fold itself is scored. Folds are independent and may run in parallel;
/// the report is assembled in fold order either way.
pub fn cross_validate<F, M, E>(
    dataset: &[FeatureVector],
    k: usize,
    seed: u64,
    factory: F,
) -> Result<CvReport, MetricsError>
where
    F: Fn(&[FeatureVector], u64) -> Result<M, E> + Sync,
    M: Fn(&FeatureVector) -> f64,
    E: fmt::Display,
{
    let folds = kfold_split(dataset.len(), k, seed).map_err(|e| MetricsError::Split(e.to_string()))?;
    let results: Vec<Result<FoldMetrics, MetricsError>> = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let in_fold: Vec<bool> = {
                let mut mask = vec![false; dataset.len()];
                for &idx in fold {
                    mask[idx] = true;
                }
                mask
            };
            let train: Vec<FeatureVector> = dataset
                .iter()
                .enumerate()
                .filter(|(idx, _)| !in_fold[*idx])
                .map(|(_, r)| r.clone())
                .collect();
            let model = factory(&train, derive_seed(seed, i as u64)).map_err(|e| {
                MetricsError::Fold {
                    fold: i + 1,
                    message: e.to_string(),
                }
            })?;
            let mut pred = Vec::with_capacity(fold.len());
            let mut actual = Vec::with_capacity(fold.len());
            for &idx in fold {
                pred.push(model(&dataset[idx]));
                actual.push(dataset[idx].mstny);
            }
            let pct = percent_error(&pred, &actual).map_err(|e| MetricsError::Fold {
                fold: i + 1,
                message: e.to_string(),
            })?;
            let r2 = r_squared(&pred, &actual).map_err(|e| MetricsError::Fold {
                fold: i + 1,
                message: e.to_string(),
            })?;
            Ok(FoldMetrics {
                percent_error: pct.value,
                r_squared: r2,
                skipped: pct.skipped,
            })
        })
        .collect();

    let mut fold_metrics = Vec::with_capacity(k);
    for r in results {
        fold_metrics.push(r?);
    }
    let kf = k as f64;
    let mean_percent_error = fold_metrics.iter().map(|f| f.percent_error).sum::<f64>() / kf;
    let mean_r_squared = fold_metrics.iter().map(|f| f.r_squared).sum::<f64>() / kf;
    Ok(CvReport {
        folds: fold_metrics,
        mean_percent_error,
        mean_r_squared,
    })
}

/// One variable's impact summary for a formula over a dataset.
///
/// Shares are percentages of the rows with a nonzero derivative, so they
/// sum to 100 whenever such rows exist; magnitudes are normalized by
/// `std(variable) / std(formula values)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub variable: Variable,
    pub sensitivity: f64,
    pub pct_positive: f64,
    pub positive_magnitude: f64,
    pub pct_negative: f64,
    pub negative_magnitude: f64,
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Finite-difference sensitivity of every variable the formula references,
/// in canonical variable order. Variables absent from the formula are
/// omitted; variables with no spread in the data report all-zero rows.
pub fn sensitivity(
    formula: &Expr,
    rows: &[FeatureVector],
) -> Result<Vec<SensitivityRow>, MetricsError> {
    if rows.len() < 2 {
        return Err(MetricsError::NotEnoughRows(rows.len()));
    }
    let inputs: Vec<[f64; 8]> = rows.iter().map(|r| r.inputs()).collect();
    let f_values: Vec<f64> = inputs
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let y = formula.evaluate(x).expect("feature rows carry all variables");
            if y.is_finite() {
                Ok(y)
            } else {
                Err(MetricsError::NonFiniteFormula {
                    row: j + 1,
                    context: String::new(),
                })
            }
        })
        .collect::<Result<_, _>>()?;
    let std_f = population_std(&f_values);
    if std_f == 0.0 {
        return Err(MetricsError::ConstantModel);
    }

    let mut out = Vec::new();
    for var in formula.variables() {
        let column: Vec<f64> = inputs.iter().map(|x| x[var.index()]).collect();
        let std_v = population_std(&column);
        if std_v == 0.0 {
            out.push(SensitivityRow {
                variable: var,
                sensitivity: 0.0,
                pct_positive: 0.0,
                positive_magnitude: 0.0,
                pct_negative: 0.0,
                negative_magnitude: 0.0,
            });
            continue;
        }
        let h = 1e-4 * std_v;
        let scale = std_v / std_f;
        let mut sum_nonzero = 0.0;
        let mut sum_pos = 0.0;
        let mut sum_neg = 0.0;
        let mut n_pos = 0usize;
        let mut n_neg = 0usize;
        for (j, x) in inputs.iter().enumerate() {
            let mut hi = *x;
            let mut lo = *x;
            hi[var.index()] += h;
            lo[var.index()] -= h;
            let f_hi = formula.evaluate(&hi).expect("all variables present");
            let f_lo = formula.evaluate(&lo).expect("all variables present");
            let d = (f_hi - f_lo) / (2.0 * h);
            if !d.is_finite() {
                return Err(MetricsError::NonFiniteFormula {
                    row: j + 1,
                    context: format!(" when perturbing {}", var),
                });
            }
            if d > 0.0 {
                sum_nonzero += d.abs();
                sum_pos += d.abs();
                n_pos += 1;
            } else if d < 0.0 {
                sum_nonzero += d.abs();
                sum_neg += d.abs();
                n_neg += 1;
            }
        }
        let nonzero = n_pos + n_neg;
        let row = if nonzero == 0 {
            SensitivityRow {
                variable: var,
                sensitivity: 0.0,
                pct_positive: 0.0,
                positive_magnitude: 0.0,
                pct_negative: 0.0,
                negative_magnitude: 0.0,
            }
        } else {
            SensitivityRow {
                variable: var,
                sensitivity: sum_nonzero / nonzero as f64 * scale,
                pct_positive: 100.0 * n_pos as f64 / nonzero as f64,
                positive_magnitude: if n_pos == 0 {
                    0.0
                } else {
                    sum_pos / n_pos as f64 * scale
                },
                pct_negative: 100.0 * n_neg as f64 / nonzero as f64,
                negative_magnitude: if n_neg == 0 {
                    0.0
                } else {
                    sum_neg / n_neg as f64 * scale
                },
            }
        };
        out.push(row);
    }
    Ok(out)
}

/// Cross-validation report in the `trial,validation_error_pct,r2` layout,
/// one row per fold plus a trailing `mean` row.
pub fn write_cv_report_csv(report: &CvReport, comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("trial,validation_error_pct,r2\n");
    for (i, fold) in report.folds.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, fold.percent_error, fold.r_squared));
    }
    out.push_str(&format!(
        "mean,{},{}\n",
        report.mean_percent_error, report.mean_r_squared
    ));
    out
}

/// Sensitivity table export:
/// `variable,sensitivity,pct_positive,positive_mag,pct_negative,negative_mag`.
pub fn write_sensitivity_csv(rows: &[SensitivityRow], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("variable,sensitivity,pct_positive,positive_mag,pct_negative,negative_mag\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.variable,
            r.sensitivity,
            r.pct_positive,
            r.positive_magnitude,
            r.pct_negative,
            r.negative_magnitude
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::weather::Season;
    use approx::assert_relative_eq;
    use std::sync::Mutex;

    fn row(year: i32, mst: f64, msr: f64, target: f64) -> FeatureVector {
        FeatureVector {
            year,
            season: Season::Winter,
            mst,
            msdmt: mst + 5.0,
            msdmt_min: mst - 5.0,
            myt: 15.0,
            msr,
            nsrd: 10.0,
            mstny: target,
        }
    }

    #[test]
    fn perfect_predictions_score_perfectly() {
        let a = [3.0, 7.0, 11.0];
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
        let pct = percent_error(&a, &a).unwrap();
        assert_eq!(pct.value, 0.0);
        assert_eq!(pct.skipped, 0);
    }

    #[test]
    fn constant_mean_prediction_has_zero_r_squared() {
        let actual = [2.0, 4.0, 6.0];
        let pred = [4.0, 4.0, 4.0];
        assert_eq!(r_squared(&pred, &actual).unwrap(), 0.0);
    }

    #[test]
    fn percent_error_is_plain_mape() {
        let pct = percent_error(&[11.0, 18.0], &[10.0, 20.0]).unwrap();
        assert_relative_eq!(pct.value, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn percent_error_skips_near_zero_actuals() {
        let pct = percent_error(&[1.0, 11.0], &[0.05, 10.0]).unwrap();
        assert_eq!(pct.skipped, 1);
        assert_relative_eq!(pct.value, 10.0, max_relative = 1e-12);
        assert!(matches!(
            percent_error(&[1.0], &[0.05]),
            Err(MetricsError::AllSkipped)
        ));
    }

    #[test]
    fn zero_variance_actuals_is_an_error() {
        assert!(matches!(
            r_squared(&[1.0, 2.0], &[5.0, 5.0]),
            Err(MetricsError::ZeroVarianceActuals)
        ));
    }

    #[test]
    fn mismatched_lengths_are_an_error() {
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::BadLengths { .. })
        ));
        assert!(matches!(mse(&[], &[]), Err(MetricsError::BadLengths { .. })));
    }

    #[test]
    fn shifting_predictions_strictly_lowers_r_squared() {
        let actual = [2.0, 4.0, 9.0];
        let shifted: Vec<f64> = actual.iter().map(|a| a + 0.5).collect();
        assert!(r_squared(&shifted, &actual).unwrap() < 1.0);
    }

    #[test]
    fn cross_validation_with_a_perfect_oracle() {
        let dataset: Vec<FeatureVector> = (0..248)
            .map(|i| row(1900 + i, 10.0 + (i % 17) as f64, 100.0, 12.0 + (i % 13) as f64))
            .collect();
        let train_sizes = Mutex::new(Vec::new());
        let report = cross_validate(&dataset, 10, 42, |train, _seed| {
            train_sizes.lock().unwrap().push(train.len());
            Ok::<_, MetricsError>(|r: &FeatureVector| r.mstny)
        })
        .unwrap();
        assert_eq!(report.folds.len(), 10);
        for fold in &report.folds {
            assert_eq!(fold.percent_error, 0.0);
            assert_eq!(fold.r_squared, 1.0);
        }
        assert_eq!(report.mean_percent_error, 0.0);
        assert_eq!(report.mean_r_squared, 1.0);
        let mut sizes = train_sizes.into_inner().unwrap();
        sizes.sort_unstable();
        // Eight folds of 25 leave 223 training rows; two folds of 24 leave 224.
        assert!(sizes[..8].iter().all(|s| *s == 223));
        assert_eq!(&sizes[8..], &[224, 224]);
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let dataset: Vec<FeatureVector> = (0..40)
            .map(|i| row(1900 + i, (i % 7) as f64 + 5.0, 10.0, (i % 5) as f64 + 10.0))
            .collect();
        let factory = |_train: &[FeatureVector], seed: u64| {
            let bias = (seed % 100) as f64 / 1000.0;
            Ok::<_, MetricsError>(move |r: &FeatureVector| r.mstny + bias)
        };
        let a = cross_validate(&dataset, 5, 9, factory).unwrap();
        let b = cross_validate(&dataset, 5, 9, factory).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_errors_name_the_fold() {
        let dataset: Vec<FeatureVector> =
            (0..20).map(|i| row(1900 + i, 5.0, 10.0, 12.0 + i as f64)).collect();
        let err = cross_validate(&dataset, 4, 1, |_train, seed| {
            if seed == crate::seed::derive_seed(1, 2) {
                Err(MetricsError::ConstantModel)
            } else {
                Ok(|r: &FeatureVector| r.mstny)
            }
        })
        .unwrap_err();
        assert!(matches!(err, MetricsError::Fold { fold: 3, .. }), "{err}");
    }

    /// Four rows with population std(MST) = std(MSR) = 1 and zero
    /// covariance, so f = 2*MST + MSR has std sqrt(5).
    fn controlled_rows() -> Vec<FeatureVector> {
        [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
            .iter()
            .map(|(m, r)| FeatureVector {
                year: 2000,
                season: Season::Winter,
                mst: *m,
                msdmt: *m + 1.0,
                msdmt_min: *m - 1.0,
                myt: 15.0,
                msr: *r + 1.0, // keep msr non-negative; shift is variance-free
                nsrd: 3.0,
                mstny: 0.0,
            })
            .collect()
    }

    #[test]
    fn sensitivity_matches_analytic_partials() {
        let rows = controlled_rows();
        let formula = parse("2*MST + MSR").unwrap();
        let table = sensitivity(&formula, &rows).unwrap();
        assert_eq!(table.len(), 2);
        let mst = &table[0];
        assert_eq!(mst.variable, Variable::Mst);
        assert_relative_eq!(mst.sensitivity, 2.0 / 5.0_f64.sqrt(), max_relative = 1e-9);
        assert_eq!(mst.pct_positive, 100.0);
        assert_eq!(mst.pct_negative, 0.0);
        assert_eq!(mst.negative_magnitude, 0.0);
        let msr = &table[1];
        assert_eq!(msr.variable, Variable::Msr);
        assert_relative_eq!(msr.sensitivity, 1.0 / 5.0_f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn all_positive_derivatives_make_sensitivity_equal_positive_magnitude() {
        let rows = controlled_rows();
        let formula = parse("2*MST + MSR").unwrap();
        for r in sensitivity(&formula, &rows).unwrap() {
            assert_eq!(r.pct_positive, 100.0);
            // Exact identity, not approximate: same sums over the same rows.
            assert_eq!(r.sensitivity, r.positive_magnitude);
        }
    }

    #[test]
    fn negated_variable_flips_the_shares() {
        let rows = controlled_rows();
        let formula = parse("-MST").unwrap();
        let table = sensitivity(&formula, &rows).unwrap();
        assert_eq!(table[0].pct_negative, 100.0);
        assert_eq!(table[0].positive_magnitude, 0.0);
        assert_eq!(table[0].sensitivity, table[0].negative_magnitude);
    }

    #[test]
    fn finite_differences_match_analytic_derivative_of_a_polynomial() {
        let rows: Vec<FeatureVector> = (1..=8)
            .map(|i| row(2000 + i, i as f64, 50.0, 0.0))
            .collect();
        let formula = parse("MST*MST").unwrap();
        let table = sensitivity(&formula, &rows).unwrap();
        // d/dMST = 2*MST; sensitivity = mean|2*mst| * std(mst)/std(f).
        let mst: Vec<f64> = rows.iter().map(|r| r.mst).collect();
        let f: Vec<f64> = mst.iter().map(|m| m * m).collect();
        let expected =
            mst.iter().map(|m| 2.0 * m).sum::<f64>() / 8.0 * population_std(&mst) / population_std(&f);
        assert_relative_eq!(table[0].sensitivity, expected, max_relative = 1e-9);
    }

    #[test]
    fn constant_formula_is_an_error() {
        let rows = controlled_rows();
        let formula = parse("3.5").unwrap();
        assert!(matches!(
            sensitivity(&formula, &rows),
            Err(MetricsError::ConstantModel)
        ));
    }

    #[test]
    fn absent_variables_are_omitted_and_order_is_canonical() {
        let mut rows = controlled_rows();
        for (i, r) in rows.iter_mut().enumerate() {
            r.myt = 10.0 + i as f64;
        }
        let formula = parse("MYT + S*MYT").unwrap();
        let table = sensitivity(&formula, &rows).unwrap();
        let vars: Vec<Variable> = table.iter().map(|r| r.variable).collect();
        assert_eq!(vars, vec![Variable::Season, Variable::Myt]);
        // Season is constant in these rows: an all-zero report row.
        assert_eq!(table[0].sensitivity, 0.0);
        assert_eq!(table[0].pct_positive, 0.0);
        assert_eq!(table[0].pct_negative, 0.0);
    }

    #[test]
    fn non_finite_formula_reports_the_row() {
        let rows = controlled_rows();
        let formula = parse("1/(MST - 1)").unwrap(); // rows 3 and 4 have MST = 1
        let err = sensitivity(&formula, &rows).unwrap_err();
        assert!(matches!(err, MetricsError::NonFiniteFormula { .. }), "{err}");
    }

    #[test]
    fn report_exports_have_the_table_layout() {
        let report = CvReport {
            folds: vec![
                FoldMetrics { percent_error: 3.5, r_squared: 0.97, skipped: 0 },
                FoldMetrics { percent_error: 4.5, r_squared: 0.95, skipped: 1 },
            ],
            mean_percent_error: 4.0,
            mean_r_squared: 0.96,
        };
        let text = write_cv_report_csv(&report, Some("seed=1"));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[1], "trial,validation_error_pct,r2");
        assert_eq!(lines[2], "1,3.5,0.97");
        assert_eq!(lines[4], "mean,4,0.96");
    }
}
