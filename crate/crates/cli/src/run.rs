//! Command execution: configuration, dispatch into the certificate
//! pipelines, and folding of failures into reports.
//!
//! Every run ends in exactly one of three statuses.  `Certified` means a
//! certificate whose residual meets the configured tolerance is attached.
//! `HypothesisFailed` means the input was well-formed but an averaging or
//! rule hypothesis failed (divergence, lower-bound collapse, eigenvalue
//! moduli, Leibniz defects, missing inner implementer); the reason names
//! every detected cause.  Everything else — unreadable files, schema
//! violations, bad parameters, numerical breakdown — is `Error`.

use std::path::{Path, PathBuf};

use isometrize_core::cesaro::{self, CertificateKind, CesaroError, SimilarityOpts};
use isometrize_core::derivations::{self, DerivError, DerivationMap, InnerMethod};
use isometrize_core::folner::{self, FolnerError, FolnerFamily, GroupDescriptor, GroupKind};
use isometrize_core::reps::{self, RepBound, RepCertificate, RepError, RepOpts, Representation};

use crate::inputs::{self, InputError, MatrixFile};
use crate::report::{
    push_scalar, push_table, CertificateReport, DiagnosticRow, Report, Status,
};

/// Default knobs, shared with the argument parser.
pub mod defaults {
    /// Sequential averaging horizon for single operators.
    pub const OPERATOR_N_MAX: u64 = 4096;
    /// Scan horizon for averaging-set reports.
    pub const FOLNER_N_MAX: u64 = 64;
    /// Certificate residual tolerance.
    pub const TOL: f64 = 1e-8;
    /// Largest set size for which the quadratic product-set diagnostics
    /// (Tempelman ratio, doubling) are computed.
    pub const PRODUCT_SET_CAP: u64 = 2000;
}

/// One subcommand with its primary input.
#[derive(Clone, Debug)]
pub enum Command {
    /// Certify a single operator similar to an isometry.
    AnalyzeOperator {
        /// Operator file.
        path: PathBuf,
    },
    /// Certify a group representation similar to a unitary one.
    UnitarizeRep {
        /// Representation file.
        path: PathBuf,
    },
    /// Certify a semigroup representation similar to an isometric one.
    IsometrizeSemigroup {
        /// Representation file.
        path: PathBuf,
    },
    /// Tabulate averaging-set laws for a named group or semigroup.
    FolnerReport {
        /// Group name (`Z^d`, `N^d`, `heisenberg3`, `finite:<file>`).
        group: String,
    },
    /// Decide whether a derivation over a unitary representation is inner.
    DerivationReport {
        /// Representation file with a `derivation` object.
        path: PathBuf,
    },
}

impl Command {
    /// The subcommand name as typed on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Command::AnalyzeOperator { .. } => "analyze-operator",
            Command::UnitarizeRep { .. } => "unitarize-rep",
            Command::IsometrizeSemigroup { .. } => "isometrize-semigroup",
            Command::FolnerReport { .. } => "folner-report",
            Command::DerivationReport { .. } => "derivation-report",
        }
    }
}

/// Everything a run needs besides its output settings.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// The subcommand to execute.
    pub command: Command,
    /// Averaging/scan horizon; `None` picks a per-command default.
    pub n_max: Option<u64>,
    /// Certificate residual tolerance.
    pub tol: f64,
    /// Boundary-decay tolerance override for representation scans.
    pub decay_tol: Option<f64>,
    /// Doubling exponent for the uniform-bound certificate, and the
    /// set-growth exponent for doubling diagnostics.
    pub doubling_p: Option<u64>,
    /// Doubling constant for the uniform-bound certificate.
    pub doubling_kappa: Option<f64>,
    /// Seed for sampled checks (`ISOMETRIZE_SEED`).
    pub seed: u64,
}

/// Errors a run can end in; each maps to an exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// Input file or group name problems.
    #[error(transparent)]
    Input(#[from] InputError),
    /// Operator averaging failures.
    #[error(transparent)]
    Cesaro(#[from] CesaroError),
    /// Representation averaging failures.
    #[error(transparent)]
    Rep(#[from] RepError),
    /// Derivation failures.
    #[error(transparent)]
    Deriv(#[from] DerivError),
    /// Averaging-set enumeration failures.
    #[error(transparent)]
    Folner(#[from] FolnerError),
    /// A flag value was outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The pipeline produced a certificate whose residual misses the
    /// configured tolerance.
    #[error("certificate residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualAboveTolerance {
        /// The achieved residual.
        residual: f64,
        /// The tolerance it had to meet.
        tolerance: f64,
    },
}

impl RunError {
    /// Hypothesis-class failures exit 2; everything else is an error.
    fn status(&self) -> Status {
        match self {
            RunError::Cesaro(
                CesaroError::HypothesisFailed { .. }
                | CesaroError::Diverged
                | CesaroError::NotExpansive { .. }
                | CesaroError::PowerUnbounded { .. }
                | CesaroError::SingularOperator,
            ) => Status::HypothesisFailed,
            RunError::Rep(RepError::HypothesisFailed { .. }) => Status::HypothesisFailed,
            RunError::Deriv(
                DerivError::LeibnizFailed { .. }
                | DerivError::HypothesisFailed { .. }
                | DerivError::NotInnerAtTolerance { .. },
            ) => Status::HypothesisFailed,
            RunError::ResidualAboveTolerance { .. } => Status::HypothesisFailed,
            _ => Status::Error,
        }
    }
}

/// What a successful execution hands back to [`run`].
struct Success {
    certificate: CertificateReport,
    corroboration_failure: Option<String>,
}

/// Executes the configured command and folds the outcome into a report.
///
/// The report is `Certified` exactly when it carries a certificate, and a
/// certificate is attached exactly when its residual meets `config.tol`.
/// Diagnostics gathered before a failure are kept in the failure report.
pub fn run(config: &RunConfig) -> Report {
    let mut diagnostics = Vec::new();
    let outcome = execute(config, &mut diagnostics).and_then(|success| {
        let residual = success.certificate.residual();
        if residual > config.tol {
            Err(RunError::ResidualAboveTolerance {
                residual,
                tolerance: config.tol,
            })
        } else {
            Ok(success)
        }
    });
    match outcome {
        Ok(success) => Report {
            command: config.command.name().into(),
            status: Status::Certified,
            reason: None,
            certificate: Some(success.certificate),
            corroboration_failure: success.corroboration_failure,
            diagnostics,
        },
        Err(err) => Report {
            command: config.command.name().into(),
            status: err.status(),
            reason: Some(err.to_string()),
            certificate: None,
            corroboration_failure: None,
            diagnostics,
        },
    }
}

fn execute(
    config: &RunConfig,
    diagnostics: &mut Vec<DiagnosticRow>,
) -> Result<Success, RunError> {
    validate(config)?;
    match &config.command {
        Command::AnalyzeOperator { path } => analyze_operator(path, config, diagnostics),
        Command::UnitarizeRep { path } => unitarize_representation(path, config, diagnostics),
        Command::IsometrizeSemigroup { path } => {
            isometrize_semigroup(path, config, diagnostics)
        }
        Command::FolnerReport { group } => folner_report(group, config, diagnostics),
        Command::DerivationReport { path } => derivation_report(path, config, diagnostics),
    }
}

fn validate(config: &RunConfig) -> Result<(), RunError> {
    if let Some(n) = config.n_max {
        if n < 4 {
            return Err(RunError::InvalidParameter(format!(
                "averaging horizon must be at least 4, got {n}"
            )));
        }
    }
    if !(config.tol > 0.0) {
        return Err(RunError::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            config.tol
        )));
    }
    if let Some(d) = config.decay_tol {
        if !(d > 0.0) {
            return Err(RunError::InvalidParameter(format!(
                "decay tolerance must be positive, got {d}"
            )));
        }
    }
    if let Some(k) = config.doubling_kappa {
        if !(k >= 1.0) {
            return Err(RunError::InvalidParameter(format!(
                "doubling constant must be at least 1, got {k}"
            )));
        }
    }
    if let Some(p) = config.doubling_p {
        if p < 2 {
            return Err(RunError::InvalidParameter(format!(
                "doubling exponent must be at least 2, got {p}"
            )));
        }
    }
    Ok(())
}

/// Encodes a yes/no diagnostic as 1 or 0.
fn bool_value(flag: bool) -> f64 {
    if flag {
        1.0
    } else {
        0.0
    }
}

fn kind_string(kind: CertificateKind) -> &'static str {
    match kind {
        CertificateKind::Isometry => "isometry",
        CertificateKind::Unitary => "unitary",
    }
}

fn method_string(method: InnerMethod) -> &'static str {
    match method {
        InnerMethod::LeastSquares => "least_squares",
        InnerMethod::ViaUnitarization => "via_unitarization",
    }
}

fn analyze_operator(
    path: &Path,
    config: &RunConfig,
    diagnostics: &mut Vec<DiagnosticRow>,
) -> Result<Success, RunError> {
    let op = inputs::parse_matrix_file(path)?;
    let n_max = config.n_max.unwrap_or(defaults::OPERATOR_N_MAX);

    // Screens first, so failed runs still carry the bound estimates.
    let bounds = cesaro::estimate_bounds(&op, n_max)?;
    push_scalar(diagnostics, "scan_lower_sq", bounds.lower_sq);
    push_scalar(diagnostics, "scan_upper_sq", bounds.upper_sq);
    push_scalar(diagnostics, "scan_divergent", bool_value(bounds.divergent));
    push_scalar(
        diagnostics,
        "scan_lower_collapse",
        bool_value(bounds.lower_collapse),
    );
    push_scalar(diagnostics, "tail_decay_stat", bounds.decay_stat);
    let eigen = cesaro::eigen_unimodular_check(&op, cesaro::tol::DEFAULT_EIGEN_TOL)?;
    push_scalar(
        diagnostics,
        "eigen_unimodular",
        bool_value(eigen.all_unimodular),
    );

    let opts = SimilarityOpts {
        n_max: Some(n_max),
        tol: config.tol,
        ..SimilarityOpts::default()
    };
    let cert = cesaro::isometrize(&op, &opts)?;
    Ok(Success {
        certificate: CertificateReport::Operator {
            kind: kind_string(cert.kind).into(),
            bound_lower: cert.bound_lower,
            bound_upper: cert.bound_upper,
            condition_number: cert.condition_number,
            residual: cert.residual,
            gram_fixed_point_residual: cert.gram_fixed_point_residual,
            transform: MatrixFile::from_matrix(cert.transform.matrix()),
        },
        corroboration_failure: None,
    })
}

/// Følner index for the uniform-bound certificate: deep enough to exercise
/// the set, small enough that the doubling enumeration stays cheap.
fn uniform_bound_index(descriptor: &GroupDescriptor, user_n_max: Option<u64>) -> u64 {
    let base = match descriptor {
        GroupDescriptor::IntLattice(1) | GroupDescriptor::NatLattice(1) => 64,
        GroupDescriptor::IntLattice(2) | GroupDescriptor::NatLattice(2) => 16,
        GroupDescriptor::IntLattice(3) | GroupDescriptor::NatLattice(3) => 4,
        GroupDescriptor::IntLattice(_) | GroupDescriptor::NatLattice(_) => 2,
        GroupDescriptor::Heisenberg3 => 4,
        GroupDescriptor::FiniteGroupTable(_) => 1,
    };
    match user_n_max {
        Some(n) => base.min(n),
        None => base,
    }
}

fn record_rep_diagnostics(diagnostics: &mut Vec<DiagnosticRow>, cert: &RepCertificate) {
    for (word, sequence) in &cert.decay_report {
        for &(n, value) in sequence {
            push_table(diagnostics, n, &format!("decay:{word}"), value);
        }
    }
}

fn rep_certificate_report(cert: &RepCertificate) -> CertificateReport {
    let worst = cert
        .per_generator_residuals
        .values()
        .fold(0.0f64, |acc, r| acc.max(*r));
    let (bound_c, bound_lower, bound_upper) = match cert.bound {
        RepBound::Group { c } => (Some(c), None, None),
        RepBound::Semigroup { lower, upper } => (None, Some(lower), Some(upper)),
    };
    CertificateReport::Representation {
        kind: kind_string(cert.kind).into(),
        bound_c,
        bound_lower,
        bound_upper,
        condition_number: cert.condition_number,
        residual: worst,
        gram_fixed_point_residual: cert.gram_fixed_point_residual,
        per_generator_residuals: cert.per_generator_residuals.clone(),
        transform: MatrixFile::from_matrix(cert.transform.matrix()),
    }
}

fn rep_opts(config: &RunConfig) -> RepOpts {
    RepOpts {
        n_max: config.n_max,
        tol: config.tol,
        decay_tol: config.decay_tol,
        ..RepOpts::default()
    }
}

fn unitarize_representation(
    path: &Path,
    config: &RunConfig,
    diagnostics: &mut Vec<DiagnosticRow>,
) -> Result<Success, RunError> {
    let parsed = inputs::parse_rep_file(path)?;
    let rep = Representation::new(parsed.descriptor.clone(), parsed.images)?;
    let family = FolnerFamily::new(parsed.descriptor);
    let cert = reps::unitarize_rep(&rep, &family, &rep_opts(config))?;
    record_rep_diagnostics(diagnostics, &cert);

    if let (Some(p), Some(kappa)) = (config.doubling_p, config.doubling_kappa) {
        let c_est = match cert.bound {
            RepBound::Group { c } => c,
            RepBound::Semigroup { upper, .. } => upper,
        };
        let index = uniform_bound_index(rep.descriptor(), config.n_max);
        // The uniform constant is at least 1 (the identity's image has norm
        // 1); the max only absorbs float error in the estimate.
        let uniform =
            reps::cert_uniform_bound(&rep, &family, p, kappa, c_est.max(1.0), index)?;
        push_scalar(diagnostics, "uniform_holds", bool_value(uniform.holds));
        push_scalar(diagnostics, "uniform_worst_norm", uniform.worst_norm);
        push_scalar(diagnostics, "uniform_index", index as f64);
    }

    Ok(Success {
        certificate: rep_certificate_report(&cert),
        corroboration_failure: None,
    })
}

fn isometrize_semigroup(
    path: &Path,
    config: &RunConfig,
    diagnostics: &mut Vec<DiagnosticRow>,
) -> Result<Success, RunError> {
    if config.doubling_p.is_some() || config.doubling_kappa.is_some() {
        return Err(RunError::InvalidParameter(
            "the uniform-bound certificate applies to group representations only".into(),
        ));
    }
    let parsed = inputs::parse_rep_file(path)?;
    let rep = Representation::new(parsed.descriptor.clone(), parsed.images)?;
    let family = FolnerFamily::new(parsed.descriptor);
    let cert = reps::isometrize_semigroup_rep(&rep, &family, &rep_opts(config))?;
    record_rep_diagnostics(diagnostics, &cert);
    Ok(Success {
        certificate: rep_certificate_report(&cert),
        corroboration_failure: None,
    })
}

fn folner_report(
    group: &str,
    config: &RunConfig,
    diagnostics: &mut Vec<DiagnosticRow>,
) -> Result<Success, RunError> {
    let descriptor = inputs::parse_group(group, Path::new("."))?;
    let family = FolnerFamily::new(descriptor.clone());
    let n_max = config.n_max.unwrap_or(defaults::FOLNER_N_MAX);
    let generators = descriptor.generators();
    let is_group = descriptor.kind() == GroupKind::Group;

    let mut worst_defect: u128 = 0;
    let mut last_done: Option<u64> = None;
    let mut truncated = false;
    'scan: for &n in &reps::scan_points(n_max) {
        let mut rows: Vec<DiagnosticRow> = Vec::new();
        let mut set_size: u64 = 0;
        for (name, s) in &generators {
            let ratios = match folner::sfc_ratio(&family, n, s) {
                Ok(r) => r,
                // Growth outran the enumeration guardrail: report what was
                // scanned and say so, rather than discarding the run.
                Err(FolnerError::SetTooLarge { .. }) if last_done.is_some() => {
                    truncated = true;
                    break 'scan;
                }
                Err(err) => return Err(err.into()),
            };
            let ratio =
                (ratios.removed + ratios.added) as f64 / ratios.set_size as f64;
            push_table(&mut rows, n, name, ratio);
            let lhs = ratios.removed as i128 - ratios.added as i128;
            let rhs = ratios.set_size as i128 - ratios.translated_size as i128;
            worst_defect = worst_defect.max(lhs.abs_diff(rhs));
            set_size = ratios.set_size;
        }
        push_table(&mut rows, n, "set_size", set_size as f64);

        if is_group && set_size <= defaults::PRODUCT_SET_CAP {
            let symmetric = folner::symmetry_check(&family, n)?;
            push_table(&mut rows, n, "symmetric", bool_value(symmetric));
            push_table(&mut rows, n, "tempelman", folner::tempelman_ratio(&family, n)?);
            let p = config.doubling_p.unwrap_or(2);
            let doubling = folner::doubling_check(&family, n, p)?;
            push_table(
                &mut rows,
                n,
                "doubling_subset",
                bool_value(doubling.subset_ok),
            );
            push_table(&mut rows, n, "doubling_ratio", doubling.ratio());
        }

        diagnostics.append(&mut rows);
        last_done = Some(n);
    }

    let horizon = last_done.ok_or_else(|| {
        RunError::InvalidParameter(format!(
            "no averaging set up to index {n_max} fits under the enumeration cap"
        ))
    })?;
    if truncated {
        push_scalar(diagnostics, "scan_truncated", 1.0);
    }
    Ok(Success {
        certificate: CertificateReport::FolnerLaws {
            residual: worst_defect as f64,
            horizon,
        },
        corroboration_failure: None,
    })
}

fn derivation_report(
    path: &Path,
    config: &RunConfig,
    diagnostics: &mut Vec<DiagnosticRow>,
) -> Result<Success, RunError> {
    let parsed = inputs::parse_rep_file(path)?;
    let Some(derivation_images) = parsed.derivation else {
        return Err(InputError::Schema {
            path: path.to_path_buf(),
            detail: "derivation-report needs a \"derivation\" object".into(),
        }
        .into());
    };
    let rep = Representation::new(parsed.descriptor.clone(), parsed.images)?;
    let d = DerivationMap::new(rep, derivation_images)?;
    let family = FolnerFamily::new(parsed.descriptor);

    // Leibniz diagnostics first, so a failed extraction still reports them.
    let leibniz = derivations::leibniz_check_seeded(
        &d,
        derivations::tol::DEFAULT_LEIBNIZ_SAMPLES,
        config.seed,
    )?;
    push_scalar(diagnostics, "leibniz_ok", bool_value(leibniz.ok));
    push_scalar(diagnostics, "leibniz_worst", leibniz.worst);
    push_scalar(diagnostics, "leibniz_allowed", leibniz.allowed);

    let inner = derivations::extract_inner(&d, &family, &rep_opts(config))?;
    push_scalar(
        diagnostics,
        "bound_divergent",
        bool_value(inner.bound.divergent),
    );
    if let Some(rep_cert) = &inner.rep_certificate {
        push_scalar(
            diagnostics,
            "block_condition_number",
            rep_cert.condition_number,
        );
    }
    let corroboration_residual = inner
        .corroboration
        .as_ref()
        .map(|c| c.residual)
        .filter(|r| r.is_finite());
    Ok(Success {
        certificate: CertificateReport::Innerness {
            method: method_string(inner.certificate.method).into(),
            residual: inner.certificate.residual,
            bound_estimate: inner.bound.c_est,
            implementer: MatrixFile::from_matrix(&inner.certificate.t),
            corroboration_residual,
        },
        corroboration_failure: inner.corroboration_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(command: Command) -> RunConfig {
        RunConfig {
            command,
            n_max: None,
            tol: defaults::TOL,
            decay_tol: None,
            doubling_p: None,
            doubling_kappa: None,
            seed: 0,
        }
    }

    #[test]
    fn certified_reports_carry_a_certificate_and_failures_do_not() {
        let report = run(&config(Command::FolnerReport {
            group: "Z^1".into(),
        }));
        assert_eq!(report.status, Status::Certified);
        assert!(report.certificate.is_some());
        assert!(report.reason.is_none());

        let report = run(&config(Command::FolnerReport {
            group: "E8".into(),
        }));
        assert_eq!(report.status, Status::Error);
        assert!(report.certificate.is_none());
        assert!(report.reason.is_some());
    }

    #[test]
    fn folner_rows_match_the_exact_lattice_ratios() {
        let mut cfg = config(Command::FolnerReport {
            group: "Z^2".into(),
        });
        cfg.n_max = Some(16);
        let report = run(&cfg);
        assert_eq!(report.status, Status::Certified);
        let row = report
            .diagnostics
            .iter()
            .find(|r| r.n == Some(16) && r.item == "e1")
            .expect("a ratio row for e1 at N=16");
        assert_eq!(row.value, 66.0 / 1089.0, "|F·s Δ F|/|F| for the square");
        let Some(CertificateReport::FolnerLaws { residual, horizon }) = report.certificate
        else {
            panic!("averaging-set certificate expected");
        };
        assert_eq!(residual, 0.0, "the counting identity is exact");
        assert_eq!(horizon, 16);
    }

    #[test]
    fn oversized_scans_truncate_with_a_marker_row() {
        // Z^4 sets hold (2N+1)^4 points, so the scan clears N = 16 and hits
        // the enumeration cap at N = 32.
        let mut cfg = config(Command::FolnerReport {
            group: "Z^4".into(),
        });
        cfg.n_max = Some(32);
        let report = run(&cfg);
        assert_eq!(
            report.status,
            Status::Certified,
            "truncation is not a failure: {:?}",
            report.reason
        );
        assert!(report
            .diagnostics
            .iter()
            .any(|r| r.item == "scan_truncated"));
        let Some(CertificateReport::FolnerLaws { horizon, .. }) = report.certificate else {
            panic!("averaging-set certificate expected");
        };
        assert_eq!(horizon, 16, "the certified horizon stops before the cap");
    }

    #[test]
    fn horizon_and_tolerance_bounds_are_enforced() {
        let mut cfg = config(Command::FolnerReport {
            group: "Z^1".into(),
        });
        cfg.n_max = Some(2);
        let report = run(&cfg);
        assert_eq!(report.status, Status::Error);
        assert!(report.reason.unwrap().contains("at least 4"));

        let mut cfg = config(Command::FolnerReport {
            group: "Z^1".into(),
        });
        cfg.tol = 0.0;
        let report = run(&cfg);
        assert_eq!(report.status, Status::Error);
        assert!(report.reason.unwrap().contains("positive"));
    }
}
