//! The run report: one struct covering every subcommand, rendered as text,
//! CSV, or JSON.
//!
//! JSON reports round-trip: serializing and re-reading preserves every
//! numeric field bit-exactly (serde_json prints the shortest decimal that
//! recovers the exact double).  To keep that guarantee, non-finite values
//! are never written into a report — [`push_scalar`] drops them, and
//! failure magnitudes that may be infinite travel in the `reason` text
//! instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::inputs::MatrixFile;

/// Overall outcome of a run, mapped one-to-one onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    /// A certificate with residual at or below tolerance is present.
    Certified,
    /// An averaging or rule hypothesis failed; the reason says which.
    HypothesisFailed,
    /// I/O, schema, parameter, or numerical breakdown.
    Error,
}

impl Status {
    /// The exit-code contract: 0 certified, 2 hypothesis failed, 1 error.
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Certified => 0,
            Status::HypothesisFailed => 2,
            Status::Error => 1,
        }
    }
}

/// Output format for rendered reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Human-readable key/value lines.
    Text,
    /// `N,item,value` rows for external plotting.
    Csv,
    /// The full report as JSON.
    Json,
}

/// One numeric diagnostic; table rows carry their window index `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticRow {
    /// Window index for table rows; absent for scalar diagnostics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// What the value measures (never contains a comma).
    pub item: String,
    /// The measured value.
    pub value: f64,
}

/// Adds a scalar diagnostic; non-finite values are dropped so the JSON
/// report stays round-trippable.
pub fn push_scalar(rows: &mut Vec<DiagnosticRow>, item: &str, value: f64) {
    if value.is_finite() {
        rows.push(DiagnosticRow {
            n: None,
            item: item.to_string(),
            value,
        });
    }
}

/// Adds a table diagnostic at window index `n`; non-finite values are
/// dropped like [`push_scalar`].
pub fn push_table(rows: &mut Vec<DiagnosticRow>, n: u64, item: &str, value: f64) {
    if value.is_finite() {
        rows.push(DiagnosticRow {
            n: Some(n),
            item: item.to_string(),
            value,
        });
    }
}

/// The certificate carried by a successful run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CertificateReport {
    /// Similarity certificate for a single operator.
    Operator {
        /// `"isometry"` or `"unitary"`.
        kind: String,
        /// Lower similarity bound `m`.
        bound_lower: f64,
        /// Upper similarity bound `M`.
        bound_upper: f64,
        /// Condition number of the transform.
        condition_number: f64,
        /// Residual of the conjugated operator.
        residual: f64,
        /// Fixed-point defect of the limit Gram matrix.
        gram_fixed_point_residual: f64,
        /// The conjugating transform `D`; the certified operator is `D T D⁻¹`.
        transform: MatrixFile,
    },
    /// Similarity certificate for a representation.
    Representation {
        /// `"unitary"` (groups) or `"isometry"` (semigroups).
        kind: String,
        /// Uniform two-sided constant `C` (group certificates).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound_c: Option<f64>,
        /// Lower constant `m` (semigroup certificates).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound_lower: Option<f64>,
        /// Upper constant `M` (semigroup certificates).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound_upper: Option<f64>,
        /// Condition number of the transform.
        condition_number: f64,
        /// Worst per-generator residual.
        residual: f64,
        /// Fixed-point defect of the limit Gram matrix.
        gram_fixed_point_residual: f64,
        /// Residual of `L·π(s)·L⁻¹` per generator.
        per_generator_residuals: BTreeMap<String, f64>,
        /// The conjugating transform `L`; certified images are `L·π(s)·L⁻¹`.
        transform: MatrixFile,
    },
    /// Inner-derivation certificate.
    Innerness {
        /// `"least_squares"` or `"via_unitarization"`.
        method: String,
        /// `max_s ‖D(s) − π(s)T + Tπ(s)‖` for the implementer below.
        residual: f64,
        /// Square root of the largest translated average of `‖D‖²`.
        bound_estimate: f64,
        /// The implementing matrix `T`.
        implementer: MatrixFile,
        /// Residual of the corroborating implementer read off the
        /// unitarized block representation, when that route succeeded.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corroboration_residual: Option<f64>,
    },
    /// Exact-enumeration certificate over a Følner family.
    FolnerLaws {
        /// Largest deviation of the counting identity
        /// `|F \ F·s| − |F·s \ F| = |F| − |F·s|` over all scanned rows.
        residual: f64,
        /// Largest window index scanned.
        horizon: u64,
    },
}

impl CertificateReport {
    /// The residual the certified/not-certified decision is made on.
    pub fn residual(&self) -> f64 {
        match self {
            CertificateReport::Operator { residual, .. }
            | CertificateReport::Representation { residual, .. }
            | CertificateReport::Innerness { residual, .. }
            | CertificateReport::FolnerLaws { residual, .. } => *residual,
        }
    }

    /// The scalar fields, for CSV rows and the text listing.
    fn scalars(&self) -> Vec<(&'static str, f64)> {
        match self {
            CertificateReport::Operator {
                bound_lower,
                bound_upper,
                condition_number,
                residual,
                gram_fixed_point_residual,
                ..
            } => vec![
                ("bound_lower", *bound_lower),
                ("bound_upper", *bound_upper),
                ("condition_number", *condition_number),
                ("residual", *residual),
                ("gram_fixed_point_residual", *gram_fixed_point_residual),
            ],
            CertificateReport::Representation {
                bound_c,
                bound_lower,
                bound_upper,
                condition_number,
                residual,
                gram_fixed_point_residual,
                ..
            } => {
                let mut out = Vec::new();
                if let Some(c) = bound_c {
                    out.push(("bound_c", *c));
                }
                if let Some(m) = bound_lower {
                    out.push(("bound_lower", *m));
                }
                if let Some(m) = bound_upper {
                    out.push(("bound_upper", *m));
                }
                out.push(("condition_number", *condition_number));
                out.push(("residual", *residual));
                out.push(("gram_fixed_point_residual", *gram_fixed_point_residual));
                out
            }
            CertificateReport::Innerness {
                residual,
                bound_estimate,
                corroboration_residual,
                ..
            } => {
                let mut out = vec![("residual", *residual), ("bound_estimate", *bound_estimate)];
                if let Some(r) = corroboration_residual {
                    out.push(("corroboration_residual", *r));
                }
                out
            }
            CertificateReport::FolnerLaws { residual, horizon } => vec![
                ("residual", *residual),
                ("horizon", *horizon as f64),
            ],
        }
    }

    /// The string-valued fields, for the text listing.
    fn labels(&self) -> Vec<(&'static str, &str)> {
        match self {
            CertificateReport::Operator { kind, .. }
            | CertificateReport::Representation { kind, .. } => vec![("kind", kind.as_str())],
            CertificateReport::Innerness { method, .. } => vec![("method", method.as_str())],
            CertificateReport::FolnerLaws { .. } => Vec::new(),
        }
    }

    /// The matrix the certificate carries, if any.
    fn matrix(&self) -> Option<(&'static str, &MatrixFile)> {
        match self {
            CertificateReport::Operator { transform, .. }
            | CertificateReport::Representation { transform, .. } => {
                Some(("transform", transform))
            }
            CertificateReport::Innerness { implementer, .. } => Some(("implementer", implementer)),
            CertificateReport::FolnerLaws { .. } => None,
        }
    }

    /// Per-generator residuals, when the certificate has them.
    fn named_residuals(&self) -> Option<&BTreeMap<String, f64>> {
        match self {
            CertificateReport::Representation {
                per_generator_residuals,
                ..
            } => Some(per_generator_residuals),
            _ => None,
        }
    }
}

/// A full run report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    /// The subcommand that produced the report.
    pub command: String,
    /// Overall outcome.
    pub status: Status,
    /// Why the run was not certified, when it was not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// The certificate, present exactly when `status` is `Certified`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    /// Why the corroborating route failed, when one was attempted and did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corroboration_failure: Option<String>,
    /// All numeric measurements: bound estimates, screens, and tables.
    pub diagnostics: Vec<DiagnosticRow>,
}

impl Report {
    /// Renders the report in the requested format.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Csv => self.render_csv(),
            Format::Json => {
                serde_json::to_string_pretty(self).expect("reports hold only serializable values")
            }
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        let _ = writeln!(out, "status: {:?}", self.status);
        if let Some(reason) = &self.reason {
            let _ = writeln!(out, "reason: {reason}");
        }
        if let Some(cert) = &self.certificate {
            let _ = writeln!(out, "certificate:");
            for (name, value) in cert.labels() {
                let _ = writeln!(out, "  {name}: {value}");
            }
            for (name, value) in cert.scalars() {
                let _ = writeln!(out, "  {name}: {value}");
            }
            if let Some(residuals) = cert.named_residuals() {
                for (name, value) in residuals {
                    let _ = writeln!(out, "  residual[{name}]: {value}");
                }
            }
            if let Some((name, matrix)) = cert.matrix() {
                let _ = writeln!(out, "  {name} ({}x{}):", matrix.rows, matrix.cols);
                for row in &matrix.data {
                    let entries: Vec<String> = row
                        .iter()
                        .map(|(re, im)| format!("{re}{im:+}i"))
                        .collect();
                    let _ = writeln!(out, "    [{}]", entries.join(", "));
                }
            }
        }
        if let Some(failure) = &self.corroboration_failure {
            let _ = writeln!(out, "corroboration failure: {failure}");
        }
        if !self.diagnostics.is_empty() {
            let _ = writeln!(out, "diagnostics:");
            for row in &self.diagnostics {
                match row.n {
                    Some(n) => {
                        let _ = writeln!(out, "  [N={n}] {}: {}", row.item, row.value);
                    }
                    None => {
                        let _ = writeln!(out, "  {}: {}", row.item, row.value);
                    }
                }
            }
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut out = String::from("N,item,value\n");
        if let Some(cert) = &self.certificate {
            for (name, value) in cert.scalars() {
                let _ = writeln!(out, ",{name},{value}");
            }
            if let Some(residuals) = cert.named_residuals() {
                for (name, value) in residuals {
                    let _ = writeln!(out, ",residual:{name},{value}");
                }
            }
        }
        for row in &self.diagnostics {
            match row.n {
                Some(n) => {
                    let _ = writeln!(out, "{n},{},{}", row.item, row.value);
                }
                None => {
                    let _ = writeln!(out, ",{},{}", row.item, row.value);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        let mut diagnostics = Vec::new();
        push_scalar(&mut diagnostics, "scan_lower_sq", 0.625);
        push_scalar(&mut diagnostics, "dropped", f64::INFINITY);
        push_table(&mut diagnostics, 16, "e1", 66.0 / 1089.0);
        Report {
            command: "analyze-operator".into(),
            status: Status::Certified,
            reason: None,
            certificate: Some(CertificateReport::Operator {
                kind: "isometry".into(),
                bound_lower: 0.625f64.sqrt(),
                bound_upper: 2.5f64.sqrt(),
                condition_number: 2.0,
                residual: 3.1e-16,
                gram_fixed_point_residual: 1.0 / 3.0,
                transform: MatrixFile {
                    rows: 1,
                    cols: 1,
                    data: vec![vec![(5e-324, -0.1)]],
                },
            }),
            corroboration_failure: None,
            diagnostics,
        }
    }

    #[test]
    fn json_round_trip_preserves_every_numeric_field_bitwise() {
        let report = sample_report();
        let text = report.render(Format::Json);
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&back).unwrap());

        let Some(CertificateReport::Operator {
            bound_lower,
            gram_fixed_point_residual,
            transform,
            ..
        }) = &back.certificate
        else {
            panic!("operator certificate expected");
        };
        assert_eq!(bound_lower.to_bits(), 0.625f64.sqrt().to_bits());
        assert_eq!(gram_fixed_point_residual.to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(transform.data[0][0].0.to_bits(), 5e-324f64.to_bits());
        assert_eq!(back.diagnostics[1].value.to_bits(), (66.0f64 / 1089.0).to_bits());
    }

    #[test]
    fn non_finite_diagnostics_are_dropped() {
        let report = sample_report();
        assert_eq!(report.diagnostics.len(), 2, "the infinite row must be dropped");
        assert!(report.diagnostics.iter().all(|r| r.value.is_finite()));
    }

    #[test]
    fn csv_rows_have_the_three_column_shape() {
        let text = sample_report().render(Format::Csv);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("N,item,value"));
        for line in lines {
            assert_eq!(
                line.matches(',').count(),
                2,
                "every CSV row has exactly two separators: {line}"
            );
        }
        assert!(text.contains(&format!("16,e1,{}\n", 66.0 / 1089.0)));
        assert!(text.contains(&format!(",bound_lower,{}\n", 0.625f64.sqrt())));
    }

    #[test]
    fn text_report_names_status_and_kind() {
        let text = sample_report().render(Format::Text);
        assert!(text.contains("status: Certified"));
        assert!(text.contains("kind: isometry"));
        assert!(text.contains("[N=16] e1:"));
    }

    #[test]
    fn exit_codes_partition_the_statuses() {
        assert_eq!(Status::Certified.exit_code(), 0);
        assert_eq!(Status::HypothesisFailed.exit_code(), 2);
        assert_eq!(Status::Error.exit_code(), 1);
    }
}
