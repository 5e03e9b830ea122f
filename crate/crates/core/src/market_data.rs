//! Observed spot-rate curves and the standard maturity grid.
//!
//! Curves are CSV files with header `maturity_years,spot_rate` (decimal
//! rates) or `maturity_years,spot_rate_pct` (percent), optionally preceded
//! by a `# date: YYYY-MM-DD` line.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig12;

/// Maturities in years: 3, 6, 9 months, 1..5, 10, 15, 20, 25 and 30 years.
pub const STANDARD_GRID: [f64; 13] = [0.25, 0.5, 0.75, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

pub fn standard_grid() -> Vec<f64> {
    STANDARD_GRID.to_vec()
}

/// Lowest accepted rate (decimal).
pub const MIN_RATE: f64 = -0.05;
/// Highest accepted rate (decimal).
pub const MAX_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub maturity: f64,
    pub rate: f64,
}

/// A spot-rate curve observed on one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldCurve {
    pub date: Option<NaiveDate>,
    points: Vec<CurvePoint>,
}

impl YieldCurve {
    pub fn new(date: Option<NaiveDate>, points: Vec<CurvePoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("a curve needs at least 2 points"));
        }
        for (i, pt) in points.iter().enumerate() {
            check_point(pt, i.checked_sub(1).map(|j| points[j].maturity))
                .map_err(|m| Error::domain(format!("point {}: {m}", i + 1)))?;
        }
        Ok(Self { date, points })
    }

    /// A curve on `maturities` with the given rates.
    pub fn from_rates(date: Option<NaiveDate>, maturities: &[f64], rates: &[f64]) -> Result<Self> {
        if maturities.len() != rates.len() {
            return Err(Error::domain("maturities and rates differ in length"));
        }
        Self::new(
            date,
            maturities.iter().zip(rates).map(|(&maturity, &rate)| CurvePoint { maturity, rate }).collect(),
        )
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn maturities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.maturity).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_point(pt: &CurvePoint, previous: Option<f64>) -> std::result::Result<(), String> {
    if !(pt.maturity > 0.0 && pt.maturity.is_finite()) {
        return Err(format!("maturity {} must be positive", pt.maturity));
    }
    if let Some(prev) = previous {
        if !(pt.maturity > prev) {
            return Err(format!("maturity {} does not exceed the previous maturity {prev}", pt.maturity));
        }
    }
    if !(pt.rate > MIN_RATE && pt.rate < MAX_RATE) {
        return Err(format!("rate {} outside ({MIN_RATE}, {MAX_RATE})", pt.rate));
    }
    Ok(())
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses a curve; every error carries the 1-based line of the offending row.
pub fn parse_curve(input: &str) -> Result<YieldCurve> {
    let mut date = None;
    for (i, line) in input.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("date:") {
                let parsed = NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
                    .map_err(|e| parse_error(i + 1, format!("bad date {:?}: {e}", value.trim())))?;
                date = Some(parsed);
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input.as_bytes());
    let header_line = input
        .lines()
        .position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map_or(1, |i| i + 1);
    let headers = reader.headers().map_err(|e| parse_error(header_line, e.to_string()))?.clone();
    let scale = match (headers.get(0), headers.get(1), headers.len()) {
        (Some("maturity_years"), Some("spot_rate"), 2) => 1.0,
        (Some("maturity_years"), Some("spot_rate_pct"), 2) => 0.01,
        _ => {
            return Err(parse_error(
                header_line,
                format!("expected header maturity_years,spot_rate or maturity_years,spot_rate_pct, got {:?}", headers.iter().collect::<Vec<_>>().join(",")),
            ))
        }
    };

    let mut points: Vec<CurvePoint> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_error(line, format!("expected 2 fields, got {}", record.len())));
        }
        let field = |k: usize, name: &str| -> Result<f64> {
            let raw = &record[k];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, format!("{name} {raw:?} is not a finite number")))
        };
        let pt = CurvePoint { maturity: field(0, "maturity")?, rate: field(1, "rate")? * scale };
        check_point(&pt, points.last().map(|p| p.maturity)).map_err(|m| parse_error(line, m))?;
        points.push(pt);
    }
    if points.len() < 2 {
        return Err(parse_error(header_line, "a curve needs at least 2 rows"));
    }
    Ok(YieldCurve { date, points })
}

/// Writes a curve in the decimal format read by [`parse_curve`], with
/// 12 significant digits.
pub fn serialize_curve(curve: &YieldCurve) -> String {
    let mut out = String::new();
    if let Some(date) = curve.date {
        out.push_str(&format!("# date: {}\n", date.format("%Y-%m-%d")));
    }
    out.push_str("maturity_years,spot_rate\n");
    for p in &curve.points {
        out.push_str(&format!("{},{}\n", sig12(p.maturity), sig12(p.rate)));
    }
    out
}
