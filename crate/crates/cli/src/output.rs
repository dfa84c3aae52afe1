//! JSON and CSV rendering.

use std::io::Write;

use cvqkd::oracle::BoundCheckReport;
use cvqkd::sim::TrialRecord;
use serde::{Deserialize, Serialize};

use crate::commands::{KeyRateRow, SimulationSummary};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn csv_rows<T: Serialize>(rows: &[T], w: &mut dyn Write) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn json_line<T: Serialize>(value: &T, w: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn json_pretty<T: Serialize>(value: &T, w: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_keyrate(row: &KeyRateRow, format: Format, w: &mut dyn Write) -> Result<(), CliError> {
    match format {
        Format::Json => json_pretty(row, w),
        Format::Csv => csv_rows(std::slice::from_ref(row), w),
    }
}

pub fn write_sweep(rows: &[KeyRateRow], format: Format, w: &mut dyn Write) -> Result<(), CliError> {
    match format {
        Format::Json => json_pretty(&rows, w),
        Format::Csv => csv_rows(rows, w),
    }
}

/// One trial per line: JSON lines, or CSV with a header.
pub fn write_records(
    records: &[TrialRecord],
    format: Format,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    match format {
        Format::Json => {
            for r in records {
                json_line(r, w)?;
            }
            Ok(())
        }
        Format::Csv => csv_rows(records, w),
    }
}

pub fn write_summary(summary: &SimulationSummary, w: &mut dyn Write) -> Result<(), CliError> {
    json_line(summary, w)
}

/// Flat view of one event of a bound check, for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub check: String,
    pub parameters: String,
    pub trials: u64,
    pub seed: u64,
    pub event: String,
    pub nominal_bound: f64,
    pub bound_scale: f64,
    pub violations: u64,
    pub frequency: f64,
    pub std_error: f64,
    pub verdict: String,
}

pub fn event_rows(reports: &[BoundCheckReport]) -> Vec<EventRow> {
    reports
        .iter()
        .flat_map(|r| {
            let params = r
                .parameters
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            r.events.iter().map(move |e| EventRow {
                check: r.check.clone(),
                parameters: params.clone(),
                trials: r.trials,
                seed: r.seed,
                event: e.event.clone(),
                nominal_bound: e.nominal_bound,
                bound_scale: e.bound_scale,
                violations: e.violations,
                frequency: e.frequency,
                std_error: e.std_error,
                verdict: serde_json::to_value(e.verdict)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            })
        })
        .collect()
}

pub fn write_reports(
    reports: &[BoundCheckReport],
    format: Format,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    match format {
        Format::Json => json_pretty(&reports, w),
        Format::Csv => csv_rows(&event_rows(reports), w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commands::cmd_keyrate;
    use crate::config::RunConfig;

    fn row() -> KeyRateRow {
        let mut c = RunConfig::default();
        c.channel.distance_km = Some(100.0);
        c.protocol.n = Some(10_000);
        cmd_keyrate(&c).unwrap()
    }

    #[test]
    fn keyrate_json_round_trips() {
        let r = row();
        let mut buf = Vec::new();
        write_keyrate(&r, Format::Json, &mut buf).unwrap();
        let back: KeyRateRow = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn keyrate_csv_round_trips() {
        let r = row();
        let mut buf = Vec::new();
        write_keyrate(&r, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("distance_km,transmittance,n,v_opt,rate,"));
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let back: Vec<KeyRateRow> = rd.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn csv_uses_plain_decimal_point() {
        let mut r = row();
        r.rate = 1234.5;
        let mut buf = Vec::new();
        write_keyrate(&r, Format::Csv, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",1234.5,"));
    }

    #[test]
    fn records_are_one_json_object_per_line() {
        let rec = TrialRecord {
            seed: 1,
            passed_pe: true,
            passed_ec: true,
            key_length: 0,
            empirical_entropy: 4.5,
            n: 10,
            norm_x_sq: 1.0,
            norm_y_sq: 2.0,
            inner_xy: 0.5,
        };
        let mut buf = Vec::new();
        write_records(&[rec.clone(), rec.clone()], Format::Json, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(serde_json::from_str::<TrialRecord>(lines[1]).unwrap(), rec);
    }
}
