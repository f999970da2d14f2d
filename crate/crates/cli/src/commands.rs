//! Subcommand implementations. Every command resolves its effective
//! configuration, echoes it into the output headers, and writes files whose
//! bytes depend only on the inputs and the seed.

use crate::config::{self, FileConfig, GpSection, MlpSection};
use crate::{CliError, EvolveArgs, FeaturesArgs, PredictArgs, SensitivityArgs, TrainMlpArgs};
use seasoncast_core::expr::{parse, Expr};
use seasoncast_core::gp;
use seasoncast_core::metrics;
use seasoncast_core::mlp;
use seasoncast_core::seed::derive_seed;
use seasoncast_core::weather::{self, FeatureVector, MonthlyRecord, OffsetTable, WeatherError};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::format(format!("cannot read {}: {e}", path.display())))
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn weather_error(e: WeatherError) -> CliError {
    match e {
        WeatherError::Format(_) => CliError::format(e.to_string()),
        other => CliError::validation(other.to_string()),
    }
}

fn fail_on_issues(what: &str, issues: &[weather::LineIssue]) -> Result<(), CliError> {
    if issues.is_empty() {
        return Ok(());
    }
    let mut message = format!("{what}: {} invalid record(s)", issues.len());
    for issue in issues {
        let _ = write!(message, "\n  {issue}");
    }
    Err(CliError::validation(message))
}

fn read_features_with_targets(path: &Path) -> Result<Vec<FeatureVector>, CliError> {
    let parsed = weather::parse_feature_csv(&read_input(path)?).map_err(weather_error)?;
    fail_on_issues(&path.display().to_string(), &parsed.issues)?;
    if !parsed.has_targets {
        return Err(CliError::validation(format!(
            "{}: feature file has no target column",
            path.display()
        )));
    }
    Ok(parsed.rows)
}

fn read_formula_file(path: &Path) -> Result<Expr, CliError> {
    let text = read_input(path)?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| CliError::format(format!("{}: no formula found", path.display())))?;
    parse(line).map_err(|e| CliError::format(format!("{}: {e}", path.display())))
}

pub fn features(
    args: &FeaturesArgs,
    file: &FileConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if args.daily.is_empty() && args.monthly.is_empty() {
        return Err(CliError::validation(
            "no inputs: pass --daily and/or --monthly files",
        ));
    }
    let min_coverage = config::resolve(
        args.min_coverage,
        file.features.min_coverage,
        weather::DEFAULT_MIN_COVERAGE,
    );
    let rainy_threshold = config::resolve(
        args.rainy_threshold_mm,
        file.features.rainy_threshold_mm,
        weather::DEFAULT_RAINY_THRESHOLD_MM,
    );

    // Daily inputs may interleave stations; aggregate each station alone.
    let mut daily_by_station: BTreeMap<String, Vec<weather::DailyRecord>> = BTreeMap::new();
    for path in &args.daily {
        let parsed = weather::parse_daily_csv(&read_input(path)?).map_err(weather_error)?;
        fail_on_issues(&path.display().to_string(), &parsed.issues)?;
        for record in parsed.records {
            daily_by_station
                .entry(record.station_id.clone())
                .or_default()
                .push(record);
        }
    }
    let mut months_by_station: BTreeMap<String, Vec<MonthlyRecord>> = BTreeMap::new();
    for (station, records) in &daily_by_station {
        let months =
            weather::monthly_from_daily(records, rainy_threshold).map_err(weather_error)?;
        months_by_station.insert(station.clone(), months);
    }
    for path in &args.monthly {
        let parsed = weather::parse_monthly_csv(&read_input(path)?).map_err(weather_error)?;
        fail_on_issues(&path.display().to_string(), &parsed.issues)?;
        for record in parsed.records {
            months_by_station
                .entry(record.station_id.clone())
                .or_default()
                .push(record);
        }
    }

    let offsets = match &args.offsets {
        Some(path) => weather::parse_offsets_csv(&read_input(path)?).map_err(weather_error)?,
        None => OffsetTable::empty(),
    };

    let mut series = Vec::new();
    let mut summary = String::new();
    let mut slots_missing = 0usize;
    for (station, months) in &months_by_station {
        let s = weather::station_series(months, min_coverage).map_err(weather_error)?;
        let min_year = months.iter().map(|m| m.year).min().unwrap_or(0);
        let max_year = months.iter().map(|m| m.year).max().unwrap_or(0);
        let span_slots = ((max_year - min_year + 1) * 4).max(0) as usize;
        let missing = span_slots.saturating_sub(s.seasonal.len());
        slots_missing += missing;
        let _ = writeln!(
            summary,
            "station {station}: years {min_year}..{max_year}, {} seasonal aggregates, {} yearly means, {missing} season slots below coverage",
            s.seasonal.len(),
            s.yearly.len()
        );
        series.push(s);
    }

    let rows = weather::build_dataset(&series, &offsets).map_err(weather_error)?;
    let stations: Vec<&str> = months_by_station.keys().map(|s| s.as_str()).collect();
    let comment = format!(
        "seasoncast features seed={seed} min_coverage={min_coverage} rainy_threshold_mm={rainy_threshold} offsets={} stations={}",
        if args.offsets.is_some() { "yes" } else { "none" },
        stations.join("+")
    );
    let path = write_output(out, "features.csv", &weather::write_feature_csv(&rows, true, Some(&comment)))?;
    print!("{summary}");
    println!("skipped periods: {slots_missing} season slots without aggregates (no interpolation)");
    println!("wrote {} feature vectors to {}", rows.len(), path.display());
    Ok(())
}

fn mlp_error(e: mlp::MlpError) -> CliError {
    match e {
        mlp::MlpError::Format(_) => CliError::format(e.to_string()),
        mlp::MlpError::EmptyDataset | mlp::MlpError::NonFiniteData(_) => {
            CliError::validation(e.to_string())
        }
        _ => CliError::runtime(e.to_string()),
    }
}

pub fn train_mlp(
    args: &TrainMlpArgs,
    file: &FileConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let rows = read_features_with_targets(&args.features)?;
    let k = config::resolve(args.k, file.mlp.k, 10);
    if k < 2 || rows.len() < k * 2 {
        return Err(CliError::validation(format!(
            "need at least {} rows for k={k} cross-validation, found {}",
            k * 2,
            rows.len()
        )));
    }
    let flags = MlpSection {
        learning_rate: args.learning_rate,
        momentum: args.momentum,
        epochs: args.epochs,
        init_range: args.init_range,
        k: args.k,
        hidden: args.hidden,
        grow_threshold_pct: None,
        prune_margin_pct: None,
    };
    let train_cfg = config::train_config(&flags, &file.mlp, seed);
    train_cfg.validate().map_err(mlp_error)?;

    // Hidden size: explicit flag/config wins, otherwise grow/prune search
    // on an internal 90/10 split.
    let hidden = match args.hidden.or(file.mlp.hidden) {
        Some(h) => h,
        None => {
            let (search_train, search_valid) =
                gp::split_train_validation(&rows, 0.9, derive_seed(seed, 7))
                    .map_err(|e| CliError::validation(e.to_string()))?;
            let search_cfg = config::size_search_config(&flags, &file.mlp);
            let mut cfg = train_cfg.clone();
            cfg.seed = derive_seed(seed, 8);
            mlp::size_search(&search_train, &search_valid, &cfg, &search_cfg)
                .map_err(mlp_error)?
                .chosen
        }
    };

    let report = metrics::cross_validate(&rows, k, seed, |train, fold_seed| {
        let mut cfg = train_cfg.clone();
        cfg.seed = fold_seed;
        mlp::fit(train, &[hidden], &cfg).map(|(net, _)| move |r: &FeatureVector| net.predict(r))
    })
    .map_err(|e| match e {
        metrics::MetricsError::Split(_) => CliError::validation(e.to_string()),
        _ => CliError::runtime(e.to_string()),
    })?;

    let mut final_cfg = train_cfg.clone();
    final_cfg.seed = derive_seed(seed, 9);
    let (net, _) = mlp::fit(&rows, &[hidden], &final_cfg).map_err(mlp_error)?;

    let echo = format!(
        "seasoncast train-mlp seed={seed} k={k} hidden={hidden} learning_rate={} momentum={} epochs={} init_range={}",
        train_cfg.learning_rate, train_cfg.momentum, train_cfg.epochs, train_cfg.init_range
    );
    let report_path = write_output(
        out,
        "cv_report.csv",
        &metrics::write_cv_report_csv(&report, Some(&echo)),
    )?;
    let model_text = format!("# {echo}\n{}", net.save());
    let model_path = write_output(out, "model.txt", &model_text)?;

    let mut pairs = format!("# {echo}\nexpected,predicted\n");
    for row in &rows {
        let _ = writeln!(pairs, "{},{}", row.mstny, net.predict(row));
    }
    let pairs_path = write_output(out, "pairs.csv", &pairs)?;

    println!(
        "hidden size {hidden}; mean validation error {}%, mean R^2 {}",
        report.mean_percent_error, report.mean_r_squared
    );
    println!(
        "wrote {}, {}, {}",
        report_path.display(),
        model_path.display(),
        pairs_path.display()
    );
    Ok(())
}

pub fn evolve(
    args: &EvolveArgs,
    file: &FileConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let rows = read_features_with_targets(&args.features)?;
    if rows.len() < 10 {
        return Err(CliError::validation(format!(
            "need at least 10 rows to evolve, found {}",
            rows.len()
        )));
    }
    let flags = GpSection {
        population_size: args.population,
        generations: args.generations,
        split_fraction: args.split_fraction,
        target_mse: args.target_mse,
        ..Default::default()
    };
    let cfg = config::gp_config(&flags, &file.gp, seed);
    cfg.validate().map_err(|e| CliError::runtime(e.to_string()))?;
    let gaussian = args.enable_gaussian || file.gp.enable_gaussian.unwrap_or(false);
    let fs = if gaussian {
        seasoncast_core::expr::FunctionSet::baseline_with_gaussian()
    } else {
        seasoncast_core::expr::FunctionSet::baseline()
    };

    let (train, validation) =
        gp::split_train_validation(&rows, cfg.split_fraction, derive_seed(seed, 1))
            .map_err(|e| CliError::validation(e.to_string()))?;

    let mut progress_lines = String::from("generation,best_mse,archive_size\n");
    let outcome = gp::evolve(&cfg, &train, &fs, |p| {
        let _ = writeln!(progress_lines, "{},{},{}", p.generation, p.best_mse, p.archive_size);
    })
    .map_err(|e| CliError::runtime(e.to_string()))?;

    let reports = gp::evaluate_archive(&outcome.archive, &validation)
        .map_err(|e| CliError::validation(e.to_string()))?;

    let echo = format!(
        "seasoncast evolve seed={seed} population={} generations={} (ran {}) split_fraction={} function_set={}",
        cfg.population_size,
        cfg.generations,
        outcome.generations_run,
        cfg.split_fraction,
        if gaussian { "baseline+gaussian" } else { "baseline" }
    );
    let archive_path = write_output(out, "archive.tsv", &gp::write_archive_tsv(&reports, Some(&echo)))?;
    let progress_path = write_output(out, "progress.csv", &format!("# {echo}\n{progress_lines}"))?;
    println!(
        "archive holds {} members (best training MSE {})",
        reports.len(),
        outcome.best.mse
    );
    println!("wrote {}, {}", archive_path.display(), progress_path.display());

    if let Some(complexity) = args.select {
        let member = outcome
            .archive
            .members()
            .find(|m| m.complexity == complexity)
            .ok_or_else(|| {
                CliError::runtime(format!(
                    "no archive member has complexity {complexity}; available: {}",
                    outcome
                        .archive
                        .members()
                        .map(|m| m.complexity.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                ))
            })?;
        let mut pairs = format!("# {echo} select={complexity}\nexpected,predicted\n");
        for row in &rows {
            let pred = member
                .tree
                .evaluate(&row.inputs())
                .expect("feature rows carry all variables");
            let _ = writeln!(pairs, "{},{}", row.mstny, pred);
        }
        let pairs_path = write_output(out, "pairs.csv", &pairs)?;
        println!("wrote {}", pairs_path.display());
    }
    Ok(())
}

pub fn sensitivity(args: &SensitivityArgs, out: &Path) -> Result<(), CliError> {
    let formula = read_formula_file(&args.formula)?;
    let rows = read_features_with_targets(&args.features)?;
    let table = metrics::sensitivity(&formula, &rows).map_err(|e| match e {
        metrics::MetricsError::NotEnoughRows(_) => CliError::validation(e.to_string()),
        _ => CliError::runtime(e.to_string()),
    })?;
    let echo = format!("seasoncast sensitivity formula={formula}");
    let path = write_output(
        out,
        "sensitivity.csv",
        &metrics::write_sensitivity_csv(&table, Some(&echo)),
    )?;
    println!("wrote {} ({} variables)", path.display(), table.len());
    Ok(())
}

pub fn predict(args: &PredictArgs, out: &Path) -> Result<(), CliError> {
    let parsed = weather::parse_feature_csv(&read_input(&args.features)?).map_err(weather_error)?;
    fail_on_issues(&args.features.display().to_string(), &parsed.issues)?;
    let rows = parsed.rows;

    enum Model {
        Net(Box<mlp::MlpNetwork>),
        Formula(Expr),
    }
    let (model, echo) = match (&args.model, &args.formula) {
        (Some(path), None) => {
            let net = mlp::MlpNetwork::load(&read_input(path)?).map_err(mlp_error)?;
            (Model::Net(Box::new(net)), "seasoncast predict model=mlp".to_string())
        }
        (None, Some(path)) => {
            let formula = read_formula_file(path)?;
            let echo = format!("seasoncast predict formula={formula}");
            (Model::Formula(formula), echo)
        }
        _ => {
            return Err(CliError::validation(
                "pass exactly one of --model or --formula",
            ))
        }
    };

    let mut text = format!("# {echo}\n");
    text.push_str(if parsed.has_targets {
        "year,season_code,predicted_mstny,actual\n"
    } else {
        "year,season_code,predicted_mstny\n"
    });
    for row in &rows {
        let pred = match &model {
            Model::Net(net) => net.predict(row),
            Model::Formula(f) => f
                .evaluate(&row.inputs())
                .map_err(|e| CliError::validation(e.to_string()))?,
        };
        let _ = write!(text, "{},{},{}", row.year, row.season.code(), pred);
        if parsed.has_targets {
            let _ = write!(text, ",{}", row.mstny);
        }
        text.push('\n');
    }
    let path = write_output(out, "predictions.csv", &text)?;
    println!("wrote {} predictions to {}", rows.len(), path.display());
    Ok(())
}
