//! Subcommand implementations. Each returns its outputs staged in memory.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use hci_core::domain::{
    parse_snapshot_csv, validate_row, write_snapshot, IngestOptions, SnapshotRows, ValidationReport,
};
use hci_core::forecast::{fit_ar_diff, fit_holt, forecast_ar, forecast_holt, select_ar, ForecastResult};
use hci_core::index::{
    align_series_for_comparison, compute_ratios, compute_subindices, group_stats, policy_weights,
    read_index_csv, smooth_series, splice_series, write_index_csv, write_index_jsonl, GroupingScheme,
    IndexOptions, IndexPoint, IndexSeries, SeriesMeta, Smoothing, Statistic, StreamingIndex, BASE_LEVEL,
};
use hci_core::inference::{all_intervals, GroupedRatios};
use hci_core::predictor::{load_model, ForestParams};
use hci_core::scenario::{report_to_plotdata, run_experiment, write_plotdata, ExperimentConfig, PlotSelection};
use hci_core::synthgen::{date_grid, generate_series, GeneratorConfig, ScenarioSpec};
use hci_core::{BaselinePredictor, HciError, PredictorSpec};
use serde_json::json;

use crate::args::*;
use crate::output::{ManifestLocation, Staged};

/// A problem with how the tool was invoked.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn ingest(max_reject: f64) -> Result<IngestOptions> {
    if !(0.0..=1.0).contains(&max_reject) {
        return Err(usage(format!("--max-reject must lie in [0, 1], got {max_reject}")));
    }
    Ok(IngestOptions {
        max_rejection_rate: Some(max_reject),
    })
}

/// Date encoded as a trailing `YYYY-MM-DD` in the file stem.
pub fn date_from_filename(path: &Path) -> Option<NaiveDate> {
    let stem = path.file_stem()?.to_str()?;
    let tail = stem.get(stem.len().checked_sub(10)?..)?;
    NaiveDate::parse_from_str(tail, "%Y-%m-%d").ok()
}

/// Pairs each snapshot with its date, sorted by date.
fn dated_inputs(paths: &[PathBuf], date: Option<NaiveDate>) -> Result<Vec<(NaiveDate, PathBuf)>> {
    if date.is_some() && paths.len() != 1 {
        return Err(usage("--date applies to a single snapshot only"));
    }
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let d = match date {
            Some(d) => d,
            None => date_from_filename(p).ok_or_else(|| {
                usage(format!(
                    "cannot read a date from {}; name it *_YYYY-MM-DD.csv or pass --date",
                    p.display()
                ))
            })?,
        };
        out.push((d, p.clone()));
    }
    out.sort_by_key(|(d, _)| *d);
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(HciError::DuplicateDate(w[0].0).into());
    }
    Ok(out)
}

fn load_predictor(path: &Path, staged: &mut Staged) -> Result<BaselinePredictor> {
    staged.input(path)?;
    Ok(load_model(path)?)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> hci_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn generate(a: &GenerateArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Dir(a.out.clone()));
    let mut cfg = match &a.config {
        Some(p) => {
            staged.input(p)?;
            GeneratorConfig::from_json(&read_text(p)?)?
        }
        None => GeneratorConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.n {
        cfg.n_per_snapshot = n;
    }
    cfg.validate()?;
    if a.snapshots == 0 || a.interval_days <= 0 {
        return Err(usage("--snapshots and --interval-days must be positive"));
    }
    let scenario: Option<ScenarioSpec> = match &a.scenario {
        Some(p) => {
            staged.input(p)?;
            Some(serde_json::from_str(&read_text(p)?).map_err(HciError::from)?)
        }
        None => None,
    };
    let dates = date_grid(a.start, a.snapshots, a.interval_days);
    let (snapshots, truth) = generate_series(&cfg, &dates, scenario.as_ref())?;
    for s in &snapshots {
        let bytes = csv_bytes(|b| write_snapshot(s, b))?;
        staged.add(a.out.join(format!("snapshot_{}.csv", s.date())), bytes);
    }
    let mut truth_csv = String::from("date,true_level\n");
    for (d, v) in truth.dates.iter().zip(&truth.values) {
        truth_csv.push_str(&format!("{d},{v:.6}\n"));
    }
    staged.add(a.out.join("true_path.csv"), truth_csv.into_bytes());
    staged.add(a.out.join("generator.json"), serde_json::to_vec_pretty(&cfg)?);
    staged.seed(Some(a.seed));
    Ok(staged)
}

pub fn fit(a: &FitArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    let date = dated_inputs(std::slice::from_ref(&a.baseline), a.date)?[0].0;
    let spec = match a.kind {
        ModelKindArg::Linear => {
            if a.forest_config.is_some() {
                return Err(usage("--forest-config requires --kind forest"));
            }
            PredictorSpec::Linear
        }
        ModelKindArg::Forest => {
            let seed = a.seed.ok_or_else(|| usage("--kind forest requires --seed"))?;
            let mut params = match &a.forest_config {
                Some(p) => {
                    staged.input(p)?;
                    serde_json::from_str::<ForestParams>(&read_text(p)?).map_err(HciError::from)?
                }
                None => ForestParams::default(),
            };
            params.seed = seed;
            PredictorSpec::Forest(params)
        }
    };
    staged.input(&a.baseline)?;
    let parsed = parse_snapshot_csv(&a.baseline, date, ingest(a.max_reject)?)?;
    let model = BaselinePredictor::fit(&parsed.snapshot, &spec)?;
    log::info!(
        "fitted {} on {} rows, residual sd {:.4}",
        model.model_id(),
        model.model.n_train(),
        model.model.residual_sd()
    );
    let mut text = model.to_json()?;
    text.push('\n');
    staged.add(&a.out, text.into_bytes());
    staged.seed(a.seed.filter(|_| a.kind == ModelKindArg::Forest));
    staged.details(json!({
        "model_id": model.model_id(),
        "n_train": model.model.n_train(),
        "residual_sd": model.model.residual_sd(),
        "validation": parsed.report,
    }));
    Ok(staged)
}

/// Streams one snapshot file into an index point.
pub fn stream_point(
    model: &BaselinePredictor,
    path: &Path,
    date: NaiveDate,
    opts: IndexOptions,
    ingest: IngestOptions,
) -> Result<(IndexPoint, ValidationReport)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = SnapshotRows::new(BufReader::with_capacity(1 << 20, file))?;
    let mut report = ValidationReport::default();
    let mut index = StreamingIndex::new(model, opts);
    while let Some(row) = rows.next_raw()? {
        match validate_row(&row) {
            Ok(record) => {
                report.record(Ok(()));
                index.push(record);
            }
            Err(reason) => {
                log::debug!("{}: line {}: rejected ({reason})", path.display(), row.line);
                report.record(Err(reason));
            }
        }
    }
    if report.accepted == 0 {
        return Err(HciError::EmptySnapshot {
            rejected: report.rejected,
        }
        .into());
    }
    if let Some(ceiling) = ingest.max_rejection_rate {
        let rate = report.rejection_rate();
        if rate > ceiling {
            return Err(HciError::RejectionCeiling {
                rate,
                ceiling,
                rejected: report.rejected,
                total: report.total,
            }
            .into());
        }
    }
    Ok((index.finish(date)?, report))
}

pub fn index(a: &IndexArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    let model = load_predictor(&a.model, &mut staged)?;
    let opts = IndexOptions {
        statistic: a.flags.statistic,
        weighting: a.flags.weighting,
    };
    let ingest_opts = ingest(a.flags.max_reject)?;
    let inputs = dated_inputs(&a.snapshots, a.date)?;
    let mut points = Vec::with_capacity(inputs.len());
    let mut reports = serde_json::Map::new();
    for (date, path) in &inputs {
        staged.input(path)?;
        let (point, report) = stream_point(&model, path, *date, opts, ingest_opts)?;
        if report.rejected > 0 {
            log::warn!("{}: {} of {} rows rejected", path.display(), report.rejected, report.total);
        }
        reports.insert(date.to_string(), serde_json::to_value(&report)?);
        points.push(point);
    }
    let meta = SeriesMeta {
        model_id: model.model_id(),
        weighting: opts.weighting,
        statistic: opts.statistic,
        smoothing: Smoothing::None,
        base_date: Some(model.model.t0()),
        ..Default::default()
    };
    let series = smooth_series(&IndexSeries::new(points, meta)?, a.smoothing)?;
    staged.add(&a.out, csv_bytes(|b| write_index_csv(&series, b))?);
    let mut meta_text = serde_json::to_string_pretty(&series.meta)?;
    meta_text.push('\n');
    staged.add(sibling(&a.out, ".meta.json"), meta_text.into_bytes());
    if let Some(j) = &a.jsonl {
        staged.add(j, csv_bytes(|b| write_index_jsonl(&series, b))?);
    }
    staged.details(json!({ "validation": reports }));
    Ok(staged)
}

pub fn subindex(a: &SubindexArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    let model = load_predictor(&a.model, &mut staged)?;
    let opts = ingest(a.max_reject)?;
    let labels = a.scheme.labels();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "scheme", "group", "label", "value"])?;
    for (date, path) in dated_inputs(&a.snapshots, a.date)? {
        staged.input(&path)?;
        let parsed = parse_snapshot_csv(&path, date, opts)?;
        let ratios = compute_ratios(&parsed.snapshot, &model);
        let values = compute_subindices(&ratios, a.scheme, a.statistic, &model.calibration);
        for (g, v) in values.iter().enumerate() {
            w.write_record([
                date.to_string(),
                a.scheme.name().to_string(),
                (g + 1).to_string(),
                labels[g].clone(),
                v.map(|x| format!("{x:.6}")).unwrap_or_default(),
            ])?;
        }
    }
    staged.add(&a.out, w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?);
    Ok(staged)
}

pub fn ci(a: &CiArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    let model = load_predictor(&a.model, &mut staged)?;
    let date = dated_inputs(std::slice::from_ref(&a.snapshot), a.date)?[0].0;
    staged.input(&a.snapshot)?;
    let parsed = parse_snapshot_csv(&a.snapshot, date, ingest(a.max_reject)?)?;
    let ratios = compute_ratios(&parsed.snapshot, &model);
    let stats = group_stats(&ratios, GroupingScheme::CaratClass, Statistic::Mean);
    let cal = model.calibration.for_statistic(Statistic::Mean);
    let weights = policy_weights(&stats, cal, a.weighting)?;
    let data = GroupedRatios::new(&ratios, GroupingScheme::CaratClass, &weights, BASE_LEVEL / cal.c0)?;
    let intervals = all_intervals(&data, &stats, &weights, a.level, a.replicates, a.seed)?;
    let (headline, se) = data.estimate();
    let out = json!({
        "date": date,
        "headline": headline,
        "se": se,
        "weighting": a.weighting,
        "intervals": intervals,
    });
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    staged.add(&a.out, text.into_bytes());
    staged.seed(Some(a.seed));
    Ok(staged)
}

fn read_index_file(path: &Path) -> Result<IndexSeries> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_index_csv(BufReader::new(f))?)
}

pub fn forecast(a: &ForecastArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    staged.input(&a.input)?;
    let series = read_index_file(&a.input)?;
    let values = series.headline();
    let dates = series.dates();
    let step = match a.interval_days {
        Some(d) if d > 0 => d,
        Some(_) => return Err(usage("--interval-days must be positive")),
        None if dates.len() >= 2 => (dates[dates.len() - 1] - dates[dates.len() - 2]).num_days(),
        None => return Err(usage("cannot infer the date step from one point; pass --interval-days")),
    };
    let (result, fitted): (ForecastResult, serde_json::Value) = match a.method {
        ForecastMethodArg::Holt => {
            let m = fit_holt(&values, None)?;
            (forecast_holt(&m, a.horizon, a.level)?, serde_json::to_value(&m)?)
        }
        ForecastMethodArg::Ar => {
            let m = if a.ar_select {
                select_ar(&values)?
            } else {
                fit_ar_diff(&values, a.ar_order, a.ar_diff)?
            };
            (forecast_ar(&m, a.horizon, a.level)?, serde_json::to_value(&m)?)
        }
    };
    let last = *dates.last().ok_or_else(|| HciError::InsufficientData("empty index series".into()))?;
    let future = date_grid(last, a.horizon + 1, step);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "point", "lower", "upper", "method", "level"])?;
    for k in 0..result.horizon() {
        w.write_record([
            future[k + 1].to_string(),
            format!("{:.6}", result.points[k]),
            format!("{:.6}", result.lower[k]),
            format!("{:.6}", result.upper[k]),
            result.method.name().to_string(),
            format!("{}", result.level),
        ])?;
    }
    staged.add(&a.out, w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?);
    staged.details(json!({ "model": fitted, "sd": result.sd }));
    Ok(staged)
}

pub fn scenario(a: &ScenarioArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Dir(a.out.clone()));
    staged.input(&a.config)?;
    let mut cfg = ExperimentConfig::from_json(&read_text(&a.config)?)?;
    cfg.seed = Some(a.seed);
    let report = run_experiment(&cfg)?;
    let rows = report_to_plotdata(&report, PlotSelection::all(), None);
    staged.add(a.out.join("report.json"), serde_json::to_vec_pretty(&report)?);
    staged.add(a.out.join("plotdata.csv"), csv_bytes(|b| write_plotdata(&rows, b))?);
    staged.add(a.out.join("index.csv"), csv_bytes(|b| write_index_csv(&report.series, b))?);
    staged.seed(Some(a.seed));
    staged.details(serde_json::to_value(&report.summary)?);
    Ok(staged)
}

pub fn splice(a: &SpliceArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    staged.input(&a.old)?;
    staged.input(&a.new)?;
    let old = read_index_file(&a.old)?;
    let new = read_index_file(&a.new)?;
    let spliced = splice_series(&old, &new, a.link)?;
    staged.add(&a.out, csv_bytes(|b| write_index_csv(&spliced, b))?);
    Ok(staged)
}

pub fn compare(a: &CompareArgs) -> Result<Staged> {
    let mut staged = Staged::new(ManifestLocation::Beside(a.out.clone()));
    staged.input(&a.index)?;
    staged.input(&a.external)?;
    let series = read_index_file(&a.index)?;
    let external = hci_core::domain::import_external_series(&a.external)?;
    let aligned = align_series_for_comparison(&series, &external)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "headline", "aligned"])?;
    let mut dates: Vec<NaiveDate> = series.dates();
    dates.extend(aligned.series.points.iter().map(|p| p.0));
    dates.sort();
    dates.dedup();
    for d in dates {
        let h = series.point_at(d).map(|p| format!("{:.6}", p.headline)).unwrap_or_default();
        let x = aligned.series.value_at(d).map(|v| format!("{v:.6}")).unwrap_or_default();
        w.write_record([d.to_string(), h, x])?;
    }
    staged.add(&a.out, w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?);
    staged.details(json!({ "a": aligned.a, "b": aligned.b, "overlap": aligned.overlap }));
    Ok(staged)
}
