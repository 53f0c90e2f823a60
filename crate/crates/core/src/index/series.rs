//! Index series: smoothing, splicing, alignment and CSV / JSON-lines I/O.

use std::fmt;
use std::io::{BufRead, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::grouping::N_CARAT_CLASSES;
use super::hci::{IndexPoint, WeightingPolicy};
use super::stats::Statistic;
use crate::domain::ExternalSeries;
use crate::{HciError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Smoothing {
    #[default]
    None,
    Ewma {
        lambda: f64,
    },
}

impl Smoothing {
    pub fn validate(self) -> Result<()> {
        match self {
            Smoothing::Ewma { lambda } if !(lambda > 0.0 && lambda <= 1.0) => {
                Err(HciError::Config(format!("EWMA lambda must lie in (0, 1], got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothing::None => f.write_str("none"),
            Smoothing::Ewma { lambda } => write!(f, "ewma({lambda})"),
        }
    }
}

impl std::str::FromStr for Smoothing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if t == "none" {
            return Ok(Smoothing::None);
        }
        let inner = t
            .strip_prefix("ewma(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("ewma:"))
            .ok_or_else(|| format!("unknown smoothing {s:?}; use none or ewma(<lambda>)"))?;
        let lambda: f64 = inner.parse().map_err(|_| format!("bad EWMA lambda {inner:?}"))?;
        let sm = Smoothing::Ewma { lambda };
        sm.validate().map_err(|e| e.to_string())?;
        Ok(sm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub model_id: String,
    pub weighting: WeightingPolicy,
    pub statistic: Statistic,
    pub smoothing: Smoothing,
    pub base_date: Option<NaiveDate>,
    pub base_level: f64,
    /// Dates at which the series definition changed (splices).
    pub change_points: Vec<NaiveDate>,
}

impl Default for SeriesMeta {
    fn default() -> Self {
        SeriesMeta {
            model_id: String::new(),
            weighting: WeightingPolicy::default(),
            statistic: Statistic::default(),
            smoothing: Smoothing::default(),
            base_date: None,
            base_level: super::hci::BASE_LEVEL,
            change_points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    points: Vec<IndexPoint>,
    pub meta: SeriesMeta,
}

impl IndexSeries {
    pub fn new(points: Vec<IndexPoint>, meta: SeriesMeta) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[0].date >= w[1].date) {
            return Err(HciError::Invalid(format!(
                "index dates must be strictly increasing ({} then {})",
                w[0].date, w[1].date
            )));
        }
        Ok(IndexSeries { points, meta })
    }

    pub fn points(&self) -> &[IndexPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    pub fn headline(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.headline).collect()
    }

    pub fn point_at(&self, date: NaiveDate) -> Option<&IndexPoint> {
        self.points
            .binary_search_by(|p| p.date.cmp(&date))
            .ok()
            .map(|i| &self.points[i])
    }
}

fn ewma(xs: &[Option<f64>], lambda: f64) -> Vec<Option<f64>> {
    let mut state: Option<f64> = None;
    xs.iter()
        .map(|x| {
            let x = (*x)?;
            let s = match state {
                None => x,
                Some(prev) => lambda * x + (1.0 - lambda) * prev,
            };
            state = Some(s);
            Some(s)
        })
        .collect()
}

/// Applies smoothing to the headline and every sub-index column. Missing
/// sub-index values stay missing and do not reset the recursion.
pub fn smooth_series(series: &IndexSeries, method: Smoothing) -> Result<IndexSeries> {
    method.validate()?;
    let mut out = series.clone();
    out.meta.smoothing = method;
    let Smoothing::Ewma { lambda } = method else {
        return Ok(out);
    };
    let head: Vec<Option<f64>> = series.points.iter().map(|p| Some(p.headline)).collect();
    for (p, s) in out.points.iter_mut().zip(ewma(&head, lambda)) {
        p.headline = s.unwrap();
    }
    let width = series.points.iter().map(|p| p.subindices.len()).max().unwrap_or(0);
    for g in 0..width {
        let col: Vec<Option<f64>> = series
            .points
            .iter()
            .map(|p| p.subindices.get(g).copied().flatten())
            .collect();
        for (p, s) in out.points.iter_mut().zip(ewma(&col, lambda)) {
            if g < p.subindices.len() {
                p.subindices[g] = s;
            }
        }
    }
    Ok(out)
}

/// Links `new` onto `old` at `link`: old values up to and including the
/// link date, then new values scaled by `old(link) / new(link)`. Each
/// sub-index is linked with its own factor.
pub fn splice_series(old: &IndexSeries, new: &IndexSeries, link: NaiveDate) -> Result<IndexSeries> {
    let o = old
        .point_at(link)
        .ok_or_else(|| HciError::InsufficientData(format!("old series has no value at link date {link}")))?;
    let n = new
        .point_at(link)
        .ok_or_else(|| HciError::InsufficientData(format!("new series has no value at link date {link}")))?;
    let head_factor = o.headline / n.headline;
    let width = n.subindices.len();
    let sub_factor: Vec<Option<f64>> = (0..width)
        .map(|g| match (o.subindices.get(g).copied().flatten(), n.subindices[g]) {
            (Some(a), Some(b)) if b != 0.0 => Some(a / b),
            _ => None,
        })
        .collect();
    let mut points: Vec<IndexPoint> = old.points.iter().filter(|p| p.date <= link).cloned().collect();
    for p in new.points.iter().filter(|p| p.date > link) {
        let mut q = p.clone();
        q.headline *= head_factor;
        for (g, s) in q.subindices.iter_mut().enumerate() {
            *s = match (*s, sub_factor.get(g).copied().flatten()) {
                (Some(v), Some(f)) => Some(v * f),
                _ => None,
            };
        }
        points.push(q);
    }
    let mut meta = new.meta.clone();
    meta.base_date = old.meta.base_date;
    let mut cps: Vec<NaiveDate> = old
        .meta
        .change_points
        .iter()
        .chain(&new.meta.change_points)
        .copied()
        .chain(std::iter::once(link))
        .collect();
    cps.sort();
    cps.dedup();
    meta.change_points = cps;
    IndexSeries::new(points, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSeries {
    pub series: ExternalSeries,
    /// Intercept of the affine map.
    pub a: f64,
    /// Slope of the affine map; always positive.
    pub b: f64,
    pub overlap: usize,
}

/// Rescales `other` by `a + b x` so its mean and standard deviation over
/// the shared dates match the target headline.
pub fn align_series_for_comparison(target: &IndexSeries, other: &ExternalSeries) -> Result<AlignedSeries> {
    let pairs: Vec<(f64, f64)> = target
        .points
        .iter()
        .filter_map(|p| other.value_at(p.date).map(|v| (p.headline, v)))
        .collect();
    if pairs.len() < 2 {
        return Err(HciError::InsufficientData(format!(
            "need at least two overlapping dates, found {}",
            pairs.len()
        )));
    }
    let k = pairs.len() as f64;
    let mt = pairs.iter().map(|p| p.0).sum::<f64>() / k;
    let mo = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let st = (pairs.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>() / k).sqrt();
    let so = (pairs.iter().map(|p| (p.1 - mo).powi(2)).sum::<f64>() / k).sqrt();
    if so <= f64::EPSILON * mo.abs().max(1.0) {
        return Err(HciError::InsufficientData(format!(
            "series {} has zero variance over the overlap",
            other.name
        )));
    }
    let b = st / so;
    let a = mt - b * mo;
    let points = other.points.iter().map(|&(d, v)| (d, a + b * v)).collect();
    Ok(AlignedSeries {
        series: ExternalSeries::new(format!("{} (aligned)", other.name), points)?,
        a,
        b,
        overlap: pairs.len(),
    })
}

fn index_header() -> Vec<String> {
    let mut h = vec!["date".to_string(), "headline".to_string()];
    h.extend((1..=N_CARAT_CLASSES).map(|g| format!("group_{g}_subindex")));
    h.extend(["statistic", "smoothing", "model_id"].map(String::from));
    h
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

/// CSV with one row per date; missing sub-indices are empty fields.
pub fn write_index_csv<W: Write>(series: &IndexSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(index_header())?;
    for p in &series.points {
        let mut row = vec![p.date.to_string(), fmt_value(p.headline)];
        for g in 0..N_CARAT_CLASSES {
            row.push(p.subindices.get(g).copied().flatten().map(fmt_value).unwrap_or_default());
        }
        row.push(series.meta.statistic.name().to_string());
        row.push(series.meta.smoothing.to_string());
        row.push(series.meta.model_id.clone());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| HciError::Io {
        path: "<index csv>".into(),
        source: e,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct JsonLine<'a> {
    date: NaiveDate,
    headline: f64,
    subindices: &'a [Option<f64>],
    statistic: Statistic,
    smoothing: String,
    model_id: &'a str,
}

/// One JSON object per line with the same fields as the CSV.
pub fn write_index_jsonl<W: Write>(series: &IndexSeries, mut out: W) -> Result<()> {
    let smoothing = series.meta.smoothing.to_string();
    for p in &series.points {
        let line = JsonLine {
            date: p.date,
            headline: p.headline,
            subindices: &p.subindices,
            statistic: series.meta.statistic,
            smoothing: smoothing.clone(),
            model_id: &series.meta.model_id,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| HciError::Io {
            path: "<index jsonl>".into(),
            source: e,
        })?;
    }
    Ok(())
}

/// Reads an index CSV written by [`write_index_csv`]. Only the headline
/// and sub-index columns are restored; metadata comes from the last row.
pub fn read_index_csv<R: Read>(input: R) -> Result<IndexSeries> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != index_header() {
        return Err(HciError::Schema(format!("unexpected index header {header:?}")));
    }
    let mut points = Vec::new();
    let mut meta = SeriesMeta::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let bad = |m: String| HciError::Line { line, message: m };
        let date: NaiveDate = rec[0].parse().map_err(|_| bad(format!("bad date {:?}", &rec[0])))?;
        let headline: f64 = rec[1].parse().map_err(|_| bad(format!("bad headline {:?}", &rec[1])))?;
        let mut subindices = Vec::with_capacity(N_CARAT_CLASSES);
        for g in 0..N_CARAT_CLASSES {
            let f = &rec[2 + g];
            subindices.push(if f.is_empty() {
                None
            } else {
                Some(f.parse().map_err(|_| bad(format!("bad sub-index {f:?}")))?)
            });
        }
        meta.statistic = rec[2 + N_CARAT_CLASSES].parse().map_err(bad)?;
        meta.smoothing = rec[3 + N_CARAT_CLASSES].parse().map_err(bad)?;
        meta.model_id = rec[4 + N_CARAT_CLASSES].to_string();
        points.push(IndexPoint {
            date,
            headline,
            group_stats: Vec::new(),
            counts: Vec::new(),
            total_values: Vec::new(),
            weights: Vec::new(),
            subindices,
        });
    }
    IndexSeries::new(points, meta)
}

/// Reads a JSON-lines index stream.
pub fn read_index_jsonl<R: BufRead>(input: R) -> Result<IndexSeries> {
    let mut points = Vec::new();
    let mut meta = SeriesMeta::default();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| HciError::Io {
            path: "<index jsonl>".into(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        #[derive(Deserialize)]
        struct Owned {
            date: NaiveDate,
            headline: f64,
            subindices: Vec<Option<f64>>,
            statistic: Statistic,
            smoothing: String,
            model_id: String,
        }
        let o: Owned = serde_json::from_str(&line).map_err(|e| HciError::Line {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        meta.statistic = o.statistic;
        meta.smoothing = o.smoothing.parse().map_err(|m| HciError::Line {
            line: i as u64 + 1,
            message: m,
        })?;
        meta.model_id = o.model_id;
        points.push(IndexPoint {
            date: o.date,
            headline: o.headline,
            group_stats: Vec::new(),
            counts: Vec::new(),
            total_values: Vec::new(),
            weights: Vec::new(),
            subindices: o.subindices,
        });
    }
    IndexSeries::new(points, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Duration::days(7 * i)
    }

    fn series(values: &[f64]) -> IndexSeries {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| IndexPoint {
                date: d(i as i64),
                headline: v,
                group_stats: vec![],
                counts: vec![],
                total_values: vec![],
                weights: vec![],
                subindices: vec![Some(v), None, Some(2.0 * v), None, None, None, None],
            })
            .collect();
        IndexSeries::new(points, SeriesMeta::default()).unwrap()
    }

    #[test]
    fn ewma_identity_constant_and_step() {
        let s = series(&[1000.0, 1010.0, 990.0]);
        assert_eq!(smooth_series(&s, Smoothing::Ewma { lambda: 1.0 }).unwrap().headline(), s.headline());
        let c = series(&[1000.0; 6]);
        assert_eq!(smooth_series(&c, Smoothing::Ewma { lambda: 0.3 }).unwrap().headline(), c.headline());
        let mut v = vec![1000.0; 3];
        v.extend([1100.0; 10]);
        let sm = smooth_series(&series(&v), Smoothing::Ewma { lambda: 0.2 }).unwrap().headline();
        for t in 3..13 {
            let expect = 1100.0 - 100.0 * 0.8f64.powi((t - 2) as i32);
            assert!((sm[t] - expect).abs() < 1e-9, "t={t}");
        }
        assert!(smooth_series(&s, Smoothing::Ewma { lambda: 0.0 }).is_err());
    }

    #[test]
    fn splice_scales_and_records_change_point() {
        let old = series(&[1000.0, 1050.0, 1100.0]);
        let new = series(&[990.0, 995.0, 1000.0, 1010.0, 1020.0]);
        let s = splice_series(&old, &new, d(2)).unwrap();
        assert_eq!(s.headline()[..3], [1000.0, 1050.0, 1100.0]);
        assert!((s.headline()[3] - 1010.0 * 1.1).abs() < 1e-9);
        assert!((s.points()[4].subindices[2].unwrap() - 2040.0 * 1.1).abs() < 1e-9);
        assert_eq!(s.points()[4].subindices[1], None);
        assert_eq!(s.meta.change_points, vec![d(2)]);
        let again = splice_series(&s, &new, d(2)).unwrap();
        assert_eq!(again, s);
        assert!(splice_series(&old, &new, d(9)).is_err());
        let same = splice_series(&new, &new, d(2)).unwrap();
        assert_eq!(same.points(), new.points());
    }

    #[test]
    fn alignment_undoes_affine_maps() {
        let t = series(&[1000.0, 1020.0, 1015.0, 1040.0]);
        let copy = ExternalSeries::new("copy", t.points().iter().map(|p| (p.date, p.headline)).collect()).unwrap();
        let a = align_series_for_comparison(&t, &copy).unwrap();
        assert!(a.a.abs() < 1e-9 && (a.b - 1.0).abs() < 1e-12);
        let lin = ExternalSeries::new("lin", t.points().iter().map(|p| (p.date, 2.0 * p.headline + 5.0)).collect()).unwrap();
        let a = align_series_for_comparison(&t, &lin).unwrap();
        for (p, (_, v)) in t.points().iter().zip(&a.series.points) {
            assert!((p.headline - v).abs() < 1e-9);
        }
        let flat = ExternalSeries::new("flat", t.points().iter().map(|p| (p.date, 3.0)).collect()).unwrap();
        let e = align_series_for_comparison(&t, &flat).unwrap_err();
        assert!(e.to_string().contains("zero variance"));
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let mut s = series(&[1000.0, 1001.5]);
        s.meta.model_id = "linear-2015-01-01".into();
        s.meta.smoothing = Smoothing::Ewma { lambda: 0.25 };
        let mut buf = Vec::new();
        write_index_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,headline,group_1_subindex"));
        assert!(text.contains("1000.000000,1000.000000,,2000.000000"));
        let back = read_index_csv(&buf[..]).unwrap();
        assert_eq!(back.headline(), s.headline());
        assert_eq!(back.meta.smoothing, s.meta.smoothing);
        let mut j = Vec::new();
        write_index_jsonl(&s, &mut j).unwrap();
        let back = read_index_jsonl(&j[..]).unwrap();
        assert_eq!(back.points()[1].subindices, s.points()[1].subindices);
    }

    #[test]
    fn smoothing_parses() {
        assert_eq!("none".parse::<Smoothing>().unwrap(), Smoothing::None);
        assert_eq!("ewma(0.2)".parse::<Smoothing>().unwrap(), Smoothing::Ewma { lambda: 0.2 });
        assert!("ewma(2)".parse::<Smoothing>().is_err());
    }
}
