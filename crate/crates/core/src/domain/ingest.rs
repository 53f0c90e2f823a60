//! Snapshot CSV reading, row validation and writing.
//!
//! Header: `carat,colour,clarity,cut,shape,polish,symmetry,fluorescence,location,price_usd`.
//! Columns may appear in any order but the set must match exactly. Rows that
//! fail validation are rejected individually with their line number; only a
//! missing/unknown column, an empty result, or a rejection rate above the
//! configured ceiling fail the whole file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use super::{
    Clarity, Colour, DiamondAttributes, Finish, Fluorescence, Location, Price, PriceParseError,
    PricedDiamond, Shape, Snapshot, MAX_CARAT, MIN_CARAT,
};
use crate::{HciError, Result};
use super::Grade as _;

pub const SNAPSHOT_HEADER: [&str; 10] = [
    "carat",
    "colour",
    "clarity",
    "cut",
    "shape",
    "polish",
    "symmetry",
    "fluorescence",
    "location",
    "price_usd",
];

const N_COLUMNS: usize = SNAPSHOT_HEADER.len();

/// Why a row was not admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    WrongFieldCount,
    MalformedCarat,
    CaratBelowMin,
    CaratAboveMax,
    UnknownGrade(&'static str),
    MissingLocation,
    MalformedPrice,
    NonPositivePrice,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::WrongFieldCount => write!(f, "wrong field count"),
            RejectReason::MalformedCarat => write!(f, "malformed carat"),
            RejectReason::CaratBelowMin => write!(f, "carat below {MIN_CARAT}"),
            RejectReason::CaratAboveMax => write!(f, "carat ≥ {MAX_CARAT}"),
            RejectReason::UnknownGrade(which) => write!(f, "unknown {which} grade"),
            RejectReason::MissingLocation => write!(f, "missing location"),
            RejectReason::MalformedPrice => write!(f, "malformed price"),
            RejectReason::NonPositivePrice => write!(f, "non-positive price"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: u64,
    pub reason: RejectReason,
}

/// One unvalidated data row, fields in canonical header order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub line: u64,
    pub fields: Vec<String>,
}

impl RawRow {
    pub fn new(line: u64, fields: &[&str]) -> Self {
        RawRow {
            line,
            fields: fields.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Rows as read from disk, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSnapshot {
    pub date: NaiveDate,
    pub rows: Vec<RawRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub by_reason: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn record(&mut self, outcome: std::result::Result<(), RejectReason>) {
        self.total += 1;
        match outcome {
            Ok(()) => self.accepted += 1,
            Err(reason) => {
                self.rejected += 1;
                *self.by_reason.entry(reason.to_string()).or_insert(0) += 1;
            }
        }
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.by_reason.get(&reason.to_string()).copied().unwrap_or(0)
    }

    pub fn rejection_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.rejected as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Fraction of rejected rows above which ingestion fails; `None` disables.
    pub max_rejection_rate: Option<f64>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            max_rejection_rate: Some(0.05),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedSnapshot {
    pub snapshot: Snapshot,
    pub report: ValidationReport,
    pub rejections: Vec<Rejection>,
}

fn parse_grade<T: std::str::FromStr>(s: &str, which: &'static str) -> std::result::Result<T, RejectReason> {
    s.parse().map_err(|_| RejectReason::UnknownGrade(which))
}

/// Validates one raw row into a typed record.
pub fn validate_row(row: &RawRow) -> std::result::Result<PricedDiamond, RejectReason> {
    let f = &row.fields;
    if f.len() != N_COLUMNS {
        return Err(RejectReason::WrongFieldCount);
    }
    let carat: f64 = f[0]
        .trim()
        .parse()
        .map_err(|_| RejectReason::MalformedCarat)?;
    if !carat.is_finite() {
        return Err(RejectReason::MalformedCarat);
    }
    if carat < MIN_CARAT {
        return Err(RejectReason::CaratBelowMin);
    }
    if carat >= MAX_CARAT {
        return Err(RejectReason::CaratAboveMax);
    }
    let colour: Colour = parse_grade(&f[1], "colour")?;
    let clarity: Clarity = parse_grade(&f[2], "clarity")?;
    let cut: Finish = parse_grade(&f[3], "cut")?;
    let shape: Shape = parse_grade(&f[4], "shape")?;
    let polish: Finish = parse_grade(&f[5], "polish")?;
    let symmetry: Finish = parse_grade(&f[6], "symmetry")?;
    let fluorescence: Fluorescence = parse_grade(&f[7], "fluorescence")?;
    let location = Location::new(&f[8]).ok_or(RejectReason::MissingLocation)?;
    let price: Price = f[9].parse().map_err(|e| match e {
        PriceParseError::Negative => RejectReason::NonPositivePrice,
        PriceParseError::Malformed => RejectReason::MalformedPrice,
    })?;
    if !price.is_positive() {
        return Err(RejectReason::NonPositivePrice);
    }
    Ok(PricedDiamond::new(
        DiamondAttributes {
            carat,
            colour,
            clarity,
            cut,
            polish,
            symmetry,
            fluorescence,
            shape,
            location,
        },
        price,
    ))
}

/// Counts acceptances and rejections per category without altering the rows.
pub fn validate_snapshot(raw: &RawSnapshot) -> ValidationReport {
    let mut report = ValidationReport::default();
    for row in &raw.rows {
        report.record(validate_row(row).map(|_| ()));
    }
    report
}

impl RawSnapshot {
    pub fn into_snapshot(self, opts: IngestOptions) -> Result<ParsedSnapshot> {
        let mut report = ValidationReport::default();
        let mut records = Vec::with_capacity(self.rows.len());
        let mut rejections = Vec::new();
        for row in &self.rows {
            match validate_row(row) {
                Ok(r) => {
                    report.record(Ok(()));
                    records.push(r);
                }
                Err(reason) => {
                    report.record(Err(reason));
                    rejections.push(Rejection {
                        line: row.line,
                        reason,
                    });
                }
            }
        }
        finish(self.date, records, report, rejections, opts)
    }
}

fn finish(
    date: NaiveDate,
    records: Vec<PricedDiamond>,
    report: ValidationReport,
    rejections: Vec<Rejection>,
    opts: IngestOptions,
) -> Result<ParsedSnapshot> {
    if records.is_empty() {
        return Err(HciError::EmptySnapshot {
            rejected: report.rejected,
        });
    }
    check_ceiling(&report, opts)?;
    for r in &rejections {
        log::debug!("line {}: rejected ({})", r.line, r.reason);
    }
    Ok(ParsedSnapshot {
        snapshot: Snapshot { date, records },
        report,
        rejections,
    })
}

pub(crate) fn check_ceiling(report: &ValidationReport, opts: IngestOptions) -> Result<()> {
    if let Some(ceiling) = opts.max_rejection_rate {
        let rate = report.rejection_rate();
        if rate > ceiling {
            return Err(HciError::RejectionCeiling {
                rate,
                ceiling,
                rejected: report.rejected,
                total: report.total,
            });
        }
    }
    Ok(())
}

/// Maps header positions onto canonical column order.
fn column_map(headers: &csv::StringRecord) -> Result<[usize; N_COLUMNS]> {
    let mut map = [usize::MAX; N_COLUMNS];
    for (pos, name) in headers.iter().enumerate() {
        let name = name.trim();
        let Some(idx) = SNAPSHOT_HEADER.iter().position(|h| *h == name) else {
            return Err(HciError::Schema(format!("unknown column {name:?}")));
        };
        if map[idx] != usize::MAX {
            return Err(HciError::Schema(format!("duplicate column {name:?}")));
        }
        map[idx] = pos;
    }
    if let Some(missing) = map.iter().position(|&p| p == usize::MAX) {
        return Err(HciError::Schema(format!(
            "missing column {:?}",
            SNAPSHOT_HEADER[missing]
        )));
    }
    Ok(map)
}

/// Row-by-row reader over a snapshot CSV stream.
pub struct SnapshotRows<R: Read> {
    reader: csv::Reader<R>,
    map: [usize; N_COLUMNS],
    record: csv::StringRecord,
}

impl<R: Read> SnapshotRows<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(input);
        let map = column_map(reader.headers()?)?;
        Ok(SnapshotRows {
            reader,
            map,
            record: csv::StringRecord::new(),
        })
    }

    /// Next raw row, or `None` at end of input.
    pub fn next_raw(&mut self) -> Result<Option<RawRow>> {
        if !self.reader.read_record(&mut self.record)? {
            return Ok(None);
        }
        let line = self.record.position().map(|p| p.line()).unwrap_or(0);
        let fields = if self.record.len() == N_COLUMNS {
            self.map.iter().map(|&p| self.record[p].to_string()).collect()
        } else {
            self.record.iter().map(str::to_string).collect()
        };
        Ok(Some(RawRow { line, fields }))
    }
}

/// Reads all rows without validating them.
pub fn read_raw_snapshot<R: Read>(input: R, date: NaiveDate) -> Result<RawSnapshot> {
    let mut rows = SnapshotRows::new(input)?;
    let mut out = Vec::new();
    while let Some(row) = rows.next_raw()? {
        out.push(row);
    }
    Ok(RawSnapshot { date, rows: out })
}

/// Reads and validates a snapshot from any byte stream.
pub fn read_snapshot<R: Read>(input: R, date: NaiveDate, opts: IngestOptions) -> Result<ParsedSnapshot> {
    read_raw_snapshot(input, date)?.into_snapshot(opts)
}

/// Reads and validates a snapshot file.
pub fn parse_snapshot_csv(path: &Path, date: NaiveDate, opts: IngestOptions) -> Result<ParsedSnapshot> {
    let file = File::open(path).map_err(|e| HciError::io(path, e))?;
    read_snapshot(std::io::BufReader::new(file), date, opts)
}

fn format_carat(c: f64) -> String {
    let two = format!("{c:.2}");
    if two.parse::<f64>() == Ok(c) {
        two
    } else {
        format!("{c}")
    }
}

/// Writes a snapshot using the canonical header and column order.
pub fn write_snapshot<W: Write>(snapshot: &Snapshot, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_HEADER)?;
    for r in snapshot.records() {
        let a = &r.attributes;
        w.write_record([
            format_carat(a.carat).as_str(),
            a.colour.code(),
            a.clarity.code(),
            a.cut.code(),
            a.shape.code(),
            a.polish.code(),
            a.symmetry.code(),
            a.fluorescence.code(),
            a.location.as_str(),
            r.price.to_string().as_str(),
        ])?;
    }
    w.flush().map_err(|e| HciError::io("<snapshot writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 6, 27).unwrap()
    }

    const HEADER: &str = "carat,colour,clarity,cut,shape,polish,symmetry,fluorescence,location,price_usd\n";

    fn permissive() -> IngestOptions {
        IngestOptions {
            max_rejection_rate: None,
        }
    }

    #[test]
    fn maps_a_row_directly() {
        let csv = format!("{HEADER}1.01,D,IF,EX,Round,EX,EX,NON,NY,12000.00\n");
        let parsed = read_snapshot(csv.as_bytes(), date(), permissive()).unwrap();
        assert_eq!(parsed.snapshot.len(), 1);
        let r = &parsed.snapshot.records()[0];
        assert_eq!(r.attributes.carat, 1.01);
        assert_eq!(r.attributes.colour, Colour::D);
        assert_eq!(r.attributes.clarity, Clarity::IF);
        assert_eq!(r.attributes.shape, Shape::Round);
        assert_eq!(r.attributes.location.as_str(), "NY");
        assert_eq!(r.price.to_string(), "12000.00");
    }

    #[test]
    fn carat_range_rejections_carry_line_numbers() {
        let csv = format!(
            "{HEADER}1.01,D,IF,EX,Round,EX,EX,NON,NY,12000.00\n\
             0.20,D,IF,EX,Round,EX,EX,NON,NY,300.00\n\
             150,D,IF,EX,Round,EX,EX,NON,NY,9000000.00\n"
        );
        let parsed = read_snapshot(csv.as_bytes(), date(), permissive()).unwrap();
        assert_eq!(parsed.snapshot.len(), 1);
        assert_eq!(parsed.rejections.len(), 2);
        assert_eq!(parsed.rejections[0].line, 3);
        assert_eq!(parsed.rejections[0].reason.to_string(), "carat below 0.25");
        assert_eq!(parsed.rejections[1].line, 4);
        assert_eq!(parsed.rejections[1].reason.to_string(), "carat ≥ 100");
    }

    #[test]
    fn header_errors_are_hard() {
        let missing = "carat,colour,clarity,cut,shape,polish,symmetry,fluorescence,location\n";
        let err = read_snapshot(missing.as_bytes(), date(), permissive()).unwrap_err();
        assert!(err.to_string().contains("missing column \"price_usd\""), "{err}");

        let unknown = format!("{}extra\n", HEADER.trim_end().to_owned() + ",");
        let err = read_snapshot(unknown.as_bytes(), date(), permissive()).unwrap_err();
        assert!(err.to_string().contains("unknown column \"extra\""), "{err}");
    }

    #[test]
    fn permuted_header_is_accepted() {
        let csv = "price_usd,carat,colour,clarity,cut,shape,polish,symmetry,fluorescence,location\n\
                   500.5,0.30,E,VS1,VG,Oval,EX,VG,FNT,antwerp\n";
        let parsed = read_snapshot(csv.as_bytes(), date(), permissive()).unwrap();
        let r = &parsed.snapshot.records()[0];
        assert_eq!(r.attributes.shape, Shape::Oval);
        assert_eq!(r.attributes.location.as_str(), "ANTWERP");
        assert_eq!(r.price.to_string(), "500.50");
    }

    #[test]
    fn zero_valid_rows_is_an_error() {
        let csv = format!("{HEADER}0.10,D,IF,EX,Round,EX,EX,NON,NY,100\n");
        let err = read_snapshot(csv.as_bytes(), date(), permissive()).unwrap_err();
        assert!(matches!(err, HciError::EmptySnapshot { rejected: 1 }));
    }

    #[test]
    fn rejection_ceiling_applies() {
        let mut csv = HEADER.to_string();
        for _ in 0..18 {
            csv.push_str("1.00,D,IF,EX,Round,EX,EX,NON,NY,10000\n");
        }
        csv.push_str("1.00,D,IF,EX,Round,EX,EX,NON,NY,0\n");
        csv.push_str("1.00,D,IF,EX,Round,EX,EX,NON\n");
        let err = read_snapshot(csv.as_bytes(), date(), IngestOptions::default()).unwrap_err();
        assert!(matches!(err, HciError::RejectionCeiling { rejected: 2, total: 20, .. }));
        let ok = read_snapshot(csv.as_bytes(), date(), permissive()).unwrap();
        assert_eq!(ok.report.count(RejectReason::WrongFieldCount), 1);
    }

    #[test]
    fn validation_report_counts_categories() {
        let good = ["1.00", "D", "IF", "EX", "Round", "EX", "EX", "NON", "NY", "10000"];
        let raw = RawSnapshot {
            date: date(),
            rows: vec![RawRow::new(2, &good), RawRow::new(3, &good)],
        };
        let report = validate_snapshot(&raw);
        assert_eq!(report.rejected, 0);
        assert_eq!(report.accepted, 2);

        let mut zero = good;
        zero[9] = "0";
        let mut z = good;
        z[1] = "Z";
        let raw = RawSnapshot {
            date: date(),
            rows: vec![RawRow::new(2, &good), RawRow::new(3, &zero), RawRow::new(4, &z)],
        };
        let before = raw.clone();
        let report = validate_snapshot(&raw);
        assert_eq!(raw, before);
        assert_eq!(report.rejected, 2);
        assert_eq!(report.by_reason["non-positive price"], 1);
        assert_eq!(report.by_reason["unknown colour grade"], 1);
    }

    fn arb_row() -> impl Strategy<Value = Vec<String>> {
        (
            prop_oneof![Just("0.1"), Just("0.25"), Just("1.00"), Just("99.99"), Just("100"), Just("x")],
            prop_oneof![Just("D"), Just("m"), Just("Z")],
            prop_oneof![Just("VS1"), Just("XX")],
            prop_oneof![Just("EX"), Just("vg")],
            prop_oneof![Just("Round"), Just("heart"), Just("Blob")],
            prop_oneof![Just("12.00"), Just("0"), Just("-1"), Just("1e5")],
        )
            .prop_map(|(c, col, cla, fin, sh, p)| {
                vec![c, col, cla, fin, sh, fin, fin, "NON", "NY", p]
                    .into_iter()
                    .map(String::from)
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn validation_is_order_independent(rows in proptest::collection::vec(arb_row(), 1..40), seed in any::<u64>()) {
            let raw: Vec<RawRow> = rows.iter().enumerate()
                .map(|(i, f)| RawRow { line: i as u64 + 2, fields: f.clone() })
                .collect();
            let mut shuffled = raw.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = RawSnapshot { date: date(), rows: raw };
            let b = RawSnapshot { date: date(), rows: shuffled };
            let ra = validate_snapshot(&a);
            prop_assert_eq!(&ra, &validate_snapshot(&b));
            prop_assert_eq!(&ra, &validate_snapshot(&a));

            let mut acc_a: Vec<String> = a.rows.iter().filter_map(|r| validate_row(r).ok()).map(|d| format!("{d:?}")).collect();
            let mut acc_b: Vec<String> = b.rows.iter().filter_map(|r| validate_row(r).ok()).map(|d| format!("{d:?}")).collect();
            acc_a.sort();
            acc_b.sort();
            prop_assert_eq!(acc_a, acc_b);
        }
    }
}
