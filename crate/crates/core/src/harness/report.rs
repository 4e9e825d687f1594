use std::fmt;
use std::str::FromStr;

use crate::error::{MvgError, Result};
use crate::metrics::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = MvgError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            other => Err(MvgError::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Text => "text",
            Self::Csv => "csv",
        })
    }
}

/// Fixed-point rendering with six significant digits (`0.01624` →
/// `0.0162400`); zero renders as `0`, extreme magnitudes in exponent form.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-8..=14).contains(&exp) {
        return format!("{v:.5e}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// One report rendered as text or CSV (header plus one row).
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    emit_reports(std::slice::from_ref(report), format)
}

/// Several reports; CSV output shares a single header.
pub fn emit_reports(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => reports
            .iter()
            .map(|r| {
                format!(
                    "metric={} mean={} ci95=±{} trials={}\n",
                    r.metric_name,
                    format_sig6(r.mean),
                    format_sig6(r.ci95_half_width),
                    r.trials
                )
            })
            .collect(),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            // writing to a Vec cannot fail
            w.write_record(["metric", "mean", "ci95", "trials"])
                .expect("in-memory write");
            for r in reports {
                w.write_record([
                    r.metric_name.clone(),
                    format_sig6(r.mean),
                    format_sig6(r.ci95_half_width),
                    r.trials.to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
        }
    }
}

/// Parses the CSV form produced by [`emit_reports`].
pub fn parse_csv_reports(text: &str) -> Result<Vec<EvalReport>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| MvgError::Format(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| MvgError::Format(format!("bad number {:?}", &rec[i])))
        };
        out.push(EvalReport {
            metric_name: rec[0].to_string(),
            mean: num(1)?,
            ci95_half_width: num(2)?,
            trials: rec[3]
                .parse()
                .map_err(|_| MvgError::Format(format!("bad count {:?}", &rec[3])))?,
        });
    }
    Ok(out)
}
