//! CSV readers and writers for the raw inputs (`forecasts.csv`,
//! `production.csv`, `mask.csv`).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::Deserialize;

use super::{GridForecastSeries, ProductionSeries};
use crate::error::{Error, Result};

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_time(t: NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}

pub fn parse_time(s: &str) -> Result<NaiveDateTime> {
    let trimmed = s.trim().trim_end_matches('Z');
    NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M"))
        .map_err(|e| Error::Data(format!("bad timestamp `{s}`: {e}")))
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

#[derive(Debug, Deserialize)]
struct ForecastRow {
    issue_time: String,
    member: u32,
    cell: u32,
    lead_h: u32,
    ghi_accum: f64,
}

type MemberCellKey = (u32, u32);

/// Reads `forecasts.csv` into one series per issue time.
pub fn read_forecasts(path: &Path) -> Result<BTreeMap<NaiveDateTime, GridForecastSeries>> {
    let mut rdr = reader(path)?;
    let mut raw: BTreeMap<NaiveDateTime, BTreeMap<MemberCellKey, BTreeMap<u32, f64>>> = BTreeMap::new();
    for row in rdr.deserialize::<ForecastRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let issue = parse_time(&row.issue_time)?;
        raw.entry(issue)
            .or_default()
            .entry((row.member, row.cell))
            .or_default()
            .insert(row.lead_h, row.ghi_accum);
    }

    let mut out = BTreeMap::new();
    for (issue, by_key) in raw {
        let members: Vec<u32> = by_key.keys().map(|k| k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let cells: Vec<u32> = by_key.keys().map(|k| k.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let steps: Vec<u32> = by_key.values().next().map(|m| m.keys().copied().collect()).unwrap_or_default();
        let mut accum = Vec::with_capacity(members.len());
        for &m in &members {
            let mut per_cell = Vec::with_capacity(cells.len());
            for &c in &cells {
                let series = by_key.get(&(m, c)).ok_or_else(|| {
                    Error::Data(format!("{}: member {m} has no rows for cell {c}", format_time(issue)))
                })?;
                if series.keys().ne(steps.iter()) {
                    return Err(Error::Data(format!(
                        "{}: member {m} cell {c} has a different set of lead steps",
                        format_time(issue)
                    )));
                }
                per_cell.push(series.values().copied().collect());
            }
            accum.push(per_cell);
        }
        let series = GridForecastSeries::new(issue, steps, cells, accum)
            .map_err(|e| Error::Data(format!("{}: {e}", format_time(issue))))?;
        out.insert(issue, series);
    }
    Ok(out)
}

pub fn write_forecasts<'a>(path: &Path, series: impl IntoIterator<Item = &'a GridForecastSeries>) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["issue_time", "member", "cell", "lead_h", "ghi_accum"]).map_err(map)?;
    for s in series {
        let issue = format_time(s.issue_time);
        for (m, member) in s.accum.iter().enumerate() {
            for (c, values) in member.iter().enumerate() {
                for (k, v) in values.iter().enumerate() {
                    w.write_record([
                        issue.as_str(),
                        &m.to_string(),
                        &s.cells[c].to_string(),
                        &s.steps[k].to_string(),
                        &v.to_string(),
                    ])
                    .map_err(map)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct ProductionRow {
    time: String,
    mw: f64,
}

pub fn read_production(path: &Path) -> Result<ProductionSeries> {
    let mut rdr = reader(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in rdr.deserialize::<ProductionRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        times.push(parse_time(&row.time)?);
        values.push(row.mw);
    }
    ProductionSeries::new(times, values)
}

pub fn write_production(path: &Path, production: &ProductionSeries) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["time", "mw"]).map_err(map)?;
    for (t, v) in production.times().iter().zip(production.values()) {
        w.write_record([format_time(*t), v.to_string()]).map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct MaskRow {
    cell: u32,
    in_region: u8,
}

pub fn read_mask(path: &Path) -> Result<HashMap<u32, bool>> {
    let mut rdr = reader(path)?;
    let mut mask = HashMap::new();
    for row in rdr.deserialize::<MaskRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.in_region > 1 {
            return Err(Error::Data(format!("mask flag for cell {} must be 0 or 1", row.cell)));
        }
        mask.insert(row.cell, row.in_region == 1);
    }
    Ok(mask)
}

pub fn write_mask(path: &Path, mask: &BTreeMap<u32, bool>) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["cell", "in_region"]).map_err(map)?;
    for (c, &inside) in mask {
        w.write_record([c.to_string(), u8::from(inside).to_string()]).map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
