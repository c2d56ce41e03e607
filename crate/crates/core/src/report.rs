//! Report emission: CSV with a fixed column order and JSON with stable key
//! order. Floats are printed with 17 significant digits and exact rationals
//! as "num/den", so re-emission is byte-identical.

use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::global::CountReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Counting CSV: columns exactly B,N_total,N_surjective,settings_hash.
pub fn counts_csv(report: &CountReport) -> String {
    let mut out = String::from("B,N_total,N_surjective,settings_hash\n");
    for cp in &report.checkpoints {
        out.push_str(&format!(
            "{},{},{},{}\n",
            cp.bound, cp.total, cp.surjective, report.settings_hash
        ));
    }
    out
}

/// Pretty JSON with stable ordering (all report structs use ordered maps
/// and fixed field order).
pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String, ReportError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::CountPoint;

    #[test]
    fn csv_schema_and_reemission() {
        let report = CountReport {
            checkpoints: vec![
                CountPoint {
                    bound: 1000,
                    total: 42,
                    surjective: 40,
                },
                CountPoint {
                    bound: 10000,
                    total: 442,
                    surjective: 437,
                },
            ],
            settings_hash: "cafe".into(),
            wall_ms: 1,
            workers: 1,
        };
        let csv = counts_csv(&report);
        assert!(csv.starts_with("B,N_total,N_surjective,settings_hash\n"));
        assert!(csv.contains("1000,42,40,cafe\n"));
        assert_eq!(csv, counts_csv(&report), "re-emission is byte-identical");
    }

    #[test]
    fn float_formatting() {
        assert_eq!(crate::util::format_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(crate::util::format_f64(3.0), "3.0");
        let x = 0.1234567890123456789;
        let s = crate::util::format_f64(x);
        let back: f64 = s.parse().unwrap();
        assert_eq!(back, x, "17 significant digits round-trip");
    }
}
