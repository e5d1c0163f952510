use std::io;
use std::path::Path;

use super::config::constant_fields;
use super::experiment::{summarize, ExperimentOutcome, ResultRow, SummaryRow};
use crate::mlmc::PlanConstants;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn to_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in records {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub const ROW_HEADER: [&str; 13] = [
    "model_id",
    "functional_id",
    "mode",
    "eps",
    "replication",
    "estimate",
    "exact",
    "abs_error",
    "total_cost",
    "L",
    "samples",
    "seed",
    "error",
];

pub fn rows_csv(rows: &[ResultRow]) -> String {
    to_csv(
        &ROW_HEADER,
        rows.iter().map(|r| {
            vec![
                r.model_id.clone(),
                r.functional_id.clone(),
                r.mode.as_str().to_string(),
                format_float(r.eps),
                r.replication.to_string(),
                opt_float(r.estimate),
                opt_float(r.exact),
                opt_float(r.abs_error),
                opt(r.total_cost),
                opt(r.levels),
                r.samples.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
                r.seed.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    to_csv(
        &[
            "model_id",
            "functional_id",
            "eps",
            "rmse_standard",
            "cost_standard",
            "ok_standard",
            "rmse_modified",
            "cost_modified",
            "ok_modified",
            "cost_ratio",
            "theory_ratio",
            "baseline",
        ],
        summary.iter().map(|s| {
            vec![
                s.model_id.clone(),
                s.functional_id.clone(),
                format_float(s.eps),
                opt_float(s.rmse_standard),
                opt_float(s.cost_standard),
                s.ok_standard.to_string(),
                opt_float(s.rmse_modified),
                opt_float(s.cost_modified),
                s.ok_modified.to_string(),
                opt_float(s.cost_ratio),
                format_float(s.theory_ratio),
                s.baseline.as_str().to_string(),
            ]
        }),
    )
}

/// Wall-clock seconds per row; kept apart from the reproducible files.
pub fn timing_csv(rows: &[ResultRow]) -> String {
    to_csv(
        &["mode", "eps", "replication", "wall_seconds"],
        rows.iter().map(|r| {
            vec![
                r.mode.as_str().to_string(),
                format_float(r.eps),
                r.replication.to_string(),
                format!("{:.6}", r.wall_seconds),
            ]
        }),
    )
}

/// Configuration echo and the constants each mode was planned with.
pub fn metadata_text(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("# configuration\n");
    out.push_str(&outcome.config.to_text());
    out.push_str("# plans use the closed-form level count, kappa and sample-size formulas\n");
    for s in &outcome.setups {
        let mode = s.mode.as_str();
        out.push_str(&format!("{mode}.q = {}\n", format_float(s.q)));
        out.push_str(&format!("{mode}.pilot_cost = {}\n", s.pilot_cost));
        match &s.constants {
            Ok(c) => {
                out.push_str(&format!("{mode}.origin = {}\n", c.origin()));
                match c {
                    PlanConstants::Explicit(set) | PlanConstants::Pilot(set) => {
                        for (field, v) in constant_fields(set) {
                            out.push_str(&format!("{mode}.{field} = {}\n", format_float(v)));
                        }
                    }
                    PlanConstants::ZeroVariance { c1 } => {
                        out.push_str(&format!("{mode}.c1 = {}\n", format_float(*c1)));
                    }
                }
            }
            Err(e) => out.push_str(&format!("{mode}.error = {e}\n")),
        }
    }
    out
}

/// Writes `rows.csv`, `summary.csv`, `metadata.txt` and `timing.csv` into `dir`.
pub fn write_outputs(dir: &Path, outcome: &ExperimentOutcome) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("rows.csv"), rows_csv(&outcome.rows))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(&summarize(&outcome.rows)))?;
    std::fs::write(dir.join("metadata.txt"), metadata_text(outcome))?;
    std::fs::write(dir.join("timing.csv"), timing_csv(&outcome.rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlmc::EstimatorMode;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, 0.1 * 1.5f64.exp(), 1e-300, 123456789.123456789] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().replace(['.', '-'], "");
            assert_eq!(digits.len(), 17);
        }
    }

    #[test]
    fn error_text_is_quoted() {
        let row = ResultRow {
            model_id: "gbm".into(),
            functional_id: "identity".into(),
            mode: EstimatorMode::Standard,
            eps: 1.0,
            replication: 3,
            estimate: None,
            exact: Some(1.0),
            abs_error: None,
            total_cost: None,
            levels: None,
            samples: vec![],
            seed: 9,
            error: Some("level 2, sample 7: diverged".into()),
            wall_seconds: 0.5,
        };
        let text = rows_csv(&[row]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ROW_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "gbm,identity,standard,1.0000000000000000e0,3,,1.0000000000000000e0,,,,,9,\"level 2, sample 7: diverged\""
        );
    }
}
