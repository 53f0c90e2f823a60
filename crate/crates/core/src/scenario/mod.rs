//! End-to-end experiments on the synthetic market: generate a baseline,
//! fit and freeze the predictor, run a scenario and compare the published
//! index with the ground-truth path.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::domain::Shape;
use crate::domain::Grade;
use crate::forecast::ForecastResult;
use crate::index::{
    compute_ratios, compute_subindices, group_stats, smooth_series, GroupingScheme, IndexOptions, IndexPoint,
    IndexSeries, SeriesMeta, Smoothing, Statistic, WeightingPolicy,
};
use crate::predictor::{BaselinePredictor, PredictorSpec};
use crate::synthgen::{date_grid, scenario_states, Generator, GeneratorConfig, ScenarioSpec, TrueIndexPath};
use crate::{HciError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub baseline_date: NaiveDate,
    /// Scored dates after the baseline. When empty, `n_snapshots` dates
    /// spaced `interval_days` apart follow the baseline.
    pub dates: Vec<NaiveDate>,
    pub n_snapshots: usize,
    pub interval_days: i64,
    pub scenario: Option<ScenarioSpec>,
    pub predictor: PredictorSpec,
    pub weighting: WeightingPolicy,
    pub statistic: Statistic,
    pub smoothing: Smoothing,
    /// Overrides the generator seed.
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::default(),
            baseline_date: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            dates: Vec::new(),
            n_snapshots: 30,
            interval_days: 7,
            scenario: None,
            predictor: PredictorSpec::Linear,
            weighting: WeightingPolicy::PerSnapshot,
            statistic: Statistic::Mean,
            smoothing: Smoothing::None,
            seed: None,
        }
    }
}

impl ExperimentConfig {
    /// Baseline date followed by every scored date.
    pub fn all_dates(&self) -> Result<Vec<NaiveDate>> {
        let mut dates = vec![self.baseline_date];
        if self.dates.is_empty() {
            if self.interval_days <= 0 {
                return Err(HciError::Config("interval_days must be positive".into()));
            }
            dates.extend(date_grid(self.baseline_date, self.n_snapshots + 1, self.interval_days).into_iter().skip(1));
        } else {
            if let Some(d) = self.dates.iter().find(|&&d| d <= self.baseline_date) {
                return Err(HciError::Config(format!(
                    "scored date {d} does not follow the baseline {}",
                    self.baseline_date
                )));
            }
            dates.extend(&self.dates);
        }
        Ok(dates)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.smoothing.validate()?;
        self.all_dates()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremePoint {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    pub trough: ExtremePoint,
    pub peak: ExtremePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub series: IndexSeries,
    /// Shape sub-indices per date, in shape order.
    pub shape_subindices: Vec<Vec<Option<f64>>>,
    pub true_path: TrueIndexPath,
    pub tracking_error: Vec<f64>,
    pub summary: ExperimentSummary,
    pub model_id: String,
}

/// Runs one experiment; deterministic in the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut gen_cfg = config.generator.clone();
    if let Some(seed) = config.seed {
        gen_cfg.seed = seed;
    }
    let generator = Generator::new(gen_cfg)?;
    let dates = config.all_dates()?;
    let states = scenario_states(&dates, config.scenario.as_ref())?;
    let baseline = generator.snapshot(&states[0])?;
    let predictor = BaselinePredictor::fit(&baseline, &config.predictor)?;
    let opts = IndexOptions {
        statistic: config.statistic,
        weighting: config.weighting,
    };

    let mut points: Vec<IndexPoint> = Vec::with_capacity(states.len());
    let mut shape_subindices = Vec::with_capacity(states.len());
    for (i, state) in states.iter().enumerate() {
        let snapshot = if i == 0 { baseline.clone() } else { generator.snapshot(state)? };
        let ratios = compute_ratios(&snapshot, &predictor);
        let stats = group_stats(&ratios, GroupingScheme::CaratClass, opts.statistic);
        let cal = predictor.calibration.for_statistic(opts.statistic);
        let weights = crate::index::policy_weights(&stats, cal, opts.weighting)?;
        let mut point = crate::index::compute_hci(snapshot.date(), &stats, &weights, cal.c0)?;
        point.subindices = crate::index::subindices_from_stats(&stats, &cal.carat);
        points.push(point);
        shape_subindices.push(compute_subindices(&ratios, GroupingScheme::Shape, opts.statistic, &predictor.calibration));
    }
    let meta = SeriesMeta {
        model_id: predictor.model_id(),
        weighting: config.weighting,
        statistic: config.statistic,
        smoothing: Smoothing::None,
        base_date: Some(config.baseline_date),
        ..Default::default()
    };
    let series = smooth_series(&IndexSeries::new(points, meta)?, config.smoothing)?;
    let true_path = TrueIndexPath::from_states(&generator, &states);
    let tracking_error: Vec<f64> = series
        .headline()
        .iter()
        .zip(&true_path.values)
        .map(|(h, t)| (h - t).abs())
        .collect();
    let summary = summarize(&series, &true_path, &tracking_error);
    Ok(ExperimentReport {
        model_id: predictor.model_id(),
        series,
        shape_subindices,
        true_path,
        tracking_error,
        summary,
    })
}

fn summarize(series: &IndexSeries, truth: &TrueIndexPath, err: &[f64]) -> ExperimentSummary {
    let head = series.headline();
    let dates = series.dates();
    let argmin = (0..head.len()).min_by(|&a, &b| head[a].total_cmp(&head[b])).unwrap_or(0);
    let argmax = (0..head.len()).max_by(|&a, &b| head[a].total_cmp(&head[b])).unwrap_or(0);
    ExperimentSummary {
        max_abs_deviation: err.iter().copied().fold(0.0, f64::max),
        max_rel_deviation: err
            .iter()
            .zip(&truth.values)
            .map(|(e, t)| e / t)
            .fold(0.0, f64::max),
        trough: ExtremePoint {
            date: dates[argmin],
            value: head[argmin],
        },
        peak: ExtremePoint {
            date: dates[argmax],
            value: head[argmax],
        },
    }
}

/// Which sub-index families to include in plot data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlotSelection {
    pub carat: bool,
    pub shape: bool,
}

impl PlotSelection {
    pub fn all() -> Self {
        PlotSelection { carat: true, shape: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub date: NaiveDate,
    pub series: String,
    pub value: Option<f64>,
}

/// Long-format rows: headline and true path, the selected sub-indices, and
/// optional forecast overlays dated by `forecast_dates`.
pub fn report_to_plotdata(
    report: &ExperimentReport,
    selection: PlotSelection,
    forecast: Option<(&ForecastResult, &[NaiveDate])>,
) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for (i, p) in report.series.points().iter().enumerate() {
        rows.push(PlotRow {
            date: p.date,
            series: "headline".into(),
            value: Some(p.headline),
        });
        rows.push(PlotRow {
            date: p.date,
            series: "true_path".into(),
            value: report.true_path.values.get(i).copied(),
        });
        if selection.carat {
            for (g, v) in p.subindices.iter().enumerate() {
                rows.push(PlotRow {
                    date: p.date,
                    series: format!("class_{}", g + 1),
                    value: *v,
                });
            }
        }
        if selection.shape {
            for (s, v) in report.shape_subindices[i].iter().enumerate() {
                rows.push(PlotRow {
                    date: p.date,
                    series: format!("shape_{}", Shape::ALL[s].code()),
                    value: *v,
                });
            }
        }
    }
    if let Some((f, dates)) = forecast {
        for (k, &d) in dates.iter().enumerate().take(f.horizon()) {
            for (name, v) in [("forecast", f.points[k]), ("forecast_lower", f.lower[k]), ("forecast_upper", f.upper[k])] {
                rows.push(PlotRow {
                    date: d,
                    series: name.into(),
                    value: Some(v),
                });
            }
        }
    }
    rows
}

pub fn write_plotdata<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "series", "value"])?;
    for r in rows {
        w.write_record([
            r.date.to_string(),
            r.series.clone(),
            r.value.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| HciError::io("<plot data>", e))?;
    Ok(())
}
