//! Følner-averaged unitarization and isometrization of finite-dimensional
//! representations.
//!
//! A representation `π` of a discrete group or semigroup assigns a square
//! complex matrix to every element, compatibly with the multiplication.  When
//! the averages of `π(g)*π(g)` over a Følner sequence stay uniformly bounded
//! above and below, their limit is an invariant positive matrix `F` with
//! `π(s)*·F·π(s) = F` for every generator, and the positive square root
//! `L = F^{1/2}` conjugates the representation to a unitary (group case) or
//! isometric (semigroup case) one: `L·π(s)·L⁻¹`.  This module measures the
//! hypotheses — bound scans, boundary decay — and produces the transform
//! together with its certificate.
//!
//! The invariant matrix is computed by the same iterated dyadic-window
//! refinement the operator certifiers use, applied alternately along each
//! generator: every pass averages the current candidate over one generator's
//! conjugation window, and the joint conjugation defect over all generators
//! is driven below a target relative to the Gram scale.  For a one-generator
//! semigroup this reduces step for step to the operator path, which is what
//! ties the two certificate families together.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::averaging;
use crate::cesaro::CertificateKind;
use crate::folner::{
    folner_set, Element, FolnerError, FolnerFamily, GroupDescriptor, GroupKind,
};
use crate::linalg::{
    self, herm_eigen, herm_eigenvalues, op_norm, singular_values, ComplexMatrix,
    HermitianMatrix, LinalgError,
};

/// Tolerances and policy constants for representation certificates.
pub mod tol {
    /// Absolute tolerance for homomorphism and relation checks at
    /// construction time.
    pub const HOMOMORPHISM_TOL: f64 = 1e-10;
    /// Absolute tolerance for `π(s)·π(s)⁻¹ = I` on stored inverse images.
    pub const INVERSE_TOL: f64 = 1e-10;
    /// Slack in the derived lower bound `λ_min(gram) ≥ (1-slack)/C²`.
    pub const LOWER_BOUND_SLACK: f64 = 1e-9;
    /// Slack on the uniform singular-value bounds of the doubling
    /// certificate.
    pub const UNIFORM_SLACK: f64 = 1e-9;
    /// Dyadic ratio under which a translated-bound sequence counts as
    /// stabilized.
    pub const STABLE_RATIO: f64 = 1.05;
    /// Multiplicative slack allowed between consecutive dyadic
    /// boundary-decay values while they are still above tolerance;
    /// genuine growth doubles per dyadic step, bounded oscillation stays
    /// under this.
    pub const DECAY_SLACK: f64 = 1.5;
    /// Smallest window index whose decay ratio participates in the
    /// monotonicity test (tiny windows barely overlap their translates).
    pub const DECAY_TREND_MIN_N: u64 = 8;
    /// Default decay tolerance as a multiple of the squared bound constant.
    pub const DEFAULT_DECAY_FACTOR: f64 = 1e-3;
    /// Default residual tolerance for certificates.
    pub const DEFAULT_CERT_TOL: f64 = 1e-8;
    /// Default floor under the squared lower Gram bound.
    pub const DEFAULT_MIN_LOWER_SQ: f64 = 1e-8;
    /// Hard cap treated as divergence of a Gram eigenvalue.
    pub const DIVERGENCE_CAP: f64 = crate::cesaro::tol::DIVERGENCE_CAP;
    /// Dyadic growth ratio that counts toward the divergence streak.
    pub const GROWTH_RATIO: f64 = crate::cesaro::tol::GROWTH_RATIO;
    /// Dyadic shrink ratio that counts toward the collapse streak.
    pub const COLLAPSE_RATIO: f64 = crate::cesaro::tol::COLLAPSE_RATIO;
    /// Smallest dyadic index whose trend ratio participates in the
    /// divergence and collapse tests.
    pub const TREND_MIN_N: u64 = crate::cesaro::tol::TREND_MIN_N;
}

/// A reason the averaging hypotheses failed for a representation.
#[derive(Debug, Clone, PartialEq)]
pub enum RepFailure {
    /// The Gram averages grow without bound.
    Divergent,
    /// The Gram averages are not bounded below away from zero.
    LowerBoundCollapse {
        /// Smallest squared lower bound observed.
        lower_sq: f64,
        /// The floor the scan policy required.
        floor: f64,
    },
    /// A boundary-decay sequence failed to decay below tolerance.
    DecayNotObserved {
        /// The word whose sequence failed.
        word: String,
        /// Last measured value.
        last: f64,
        /// The tolerance it had to reach.
        tolerance: f64,
    },
    /// The refined Gram average still moves under conjugation.
    GramNotConverged {
        /// Final joint conjugation defect.
        residual: f64,
    },
    /// The limit Gram matrix is numerically singular.
    SingularTransform,
    /// A conjugated generator missed the residual tolerance.
    ResidualAboveTolerance {
        /// Generator name.
        generator: String,
        /// Measured residual.
        residual: f64,
    },
}

impl fmt::Display for RepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Divergent => write!(f, "Gram averages diverge"),
            Self::LowerBoundCollapse { lower_sq, floor } => write!(
                f,
                "lower Gram bound not sustained away from zero (min λ_min {lower_sq:.3e}, floor {floor:.3e})"
            ),
            Self::DecayNotObserved {
                word,
                last,
                tolerance,
            } => write!(
                f,
                "boundary decay not observed for {word}: last value {last:.3e} (tolerance {tolerance:.3e})"
            ),
            Self::GramNotConverged { residual } => {
                write!(f, "Gram average did not converge (defect {residual:.3e})")
            }
            Self::SingularTransform => write!(f, "limit Gram matrix is singular"),
            Self::ResidualAboveTolerance {
                generator,
                residual,
            } => write!(
                f,
                "conjugated generator {generator} has residual {residual:.3e}"
            ),
        }
    }
}

/// Errors from representation construction and certification.
#[derive(Debug, Error)]
pub enum RepError {
    /// A linear-algebra kernel failed.
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    /// Følner-set enumeration failed.
    #[error(transparent)]
    Folner(#[from] FolnerError),
    /// The generator images do not define a valid representation.
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    /// The operation applies only to the other kind of descriptor.
    #[error("operation requires a {expected:?} representation")]
    KindMismatch {
        /// The kind the operation needs.
        expected: GroupKind,
    },
    /// A scalar argument was outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The doubling precondition of the uniform-bound certificate failed.
    #[error(
        "doubling precondition failed: subset holds = {subset_ok}, ratio {ratio:.3} vs allowed {kappa:.3}"
    )]
    DoublingFailed {
        /// Whether `F_N·F_N⁻¹ ⊆ F_{pN}` held.
        subset_ok: bool,
        /// Measured `|F_{pN}|/|F_N|`.
        ratio: f64,
        /// The allowed ratio.
        kappa: f64,
    },
    /// The averaging hypotheses failed; all detected reasons are listed.
    #[error("averaging hypotheses failed: {}", join_failures(.failures))]
    HypothesisFailed {
        /// Every detected failure, primary cause first.
        failures: Vec<RepFailure>,
    },
}

pub(crate) fn join_failures(failures: &[RepFailure]) -> String {
    failures
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Convenient alias for results in this module.
pub type Result<T> = std::result::Result<T, RepError>;

/// A finite-dimensional representation given by generator images.
///
/// Group representations also carry the inverse images, computed and checked
/// at construction; relation checks validate the images against the
/// descriptor's multiplication.
#[derive(Clone, Debug)]
pub struct Representation {
    descriptor: GroupDescriptor,
    dim: usize,
    images: BTreeMap<String, ComplexMatrix>,
    inverse_images: BTreeMap<String, ComplexMatrix>,
}

/// The image keys a representation of `descriptor` must provide: generator
/// names for lattices and the Heisenberg group, one key per element
/// (`g0..g{n-1}`, identity included) for finite tables.
pub fn expected_image_keys(descriptor: &GroupDescriptor) -> Vec<String> {
    match descriptor {
        GroupDescriptor::FiniteGroupTable(table) => {
            (0..table.len()).map(|i| format!("g{i}")).collect()
        }
        _ => descriptor
            .generators()
            .into_iter()
            .map(|(name, _)| name)
            .collect(),
    }
}

impl Representation {
    /// Validates generator images against the descriptor and builds the
    /// representation.
    pub fn new(
        descriptor: GroupDescriptor,
        images: BTreeMap<String, ComplexMatrix>,
    ) -> Result<Self> {
        let expected = expected_image_keys(&descriptor);
        let got: Vec<String> = images.keys().cloned().collect();
        let mut want = expected.clone();
        want.sort();
        if got != want {
            return Err(RepError::InvalidRepresentation(format!(
                "image keys {got:?} do not match the descriptor's {expected:?}"
            )));
        }
        let dim = images
            .values()
            .next()
            .map(|m| m.rows())
            .ok_or_else(|| RepError::InvalidRepresentation("no generator images".into()))?;
        for (name, m) in &images {
            if !m.is_square() || m.rows() != dim {
                return Err(RepError::InvalidRepresentation(format!(
                    "image {name} is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.all_finite() {
                return Err(RepError::InvalidRepresentation(format!(
                    "image {name} has non-finite entries"
                )));
            }
        }

        let mut inverse_images = BTreeMap::new();
        if descriptor.kind() == GroupKind::Group {
            for (name, m) in &images {
                let inv = match linalg::inverse(m) {
                    Ok(inv) => inv,
                    Err(LinalgError::Singular { .. }) => {
                        return Err(RepError::InvalidRepresentation(format!(
                            "image {name} is singular in a group representation"
                        )))
                    }
                    Err(other) => return Err(other.into()),
                };
                let residual = m
                    .matmul(&inv)
                    .sub(&ComplexMatrix::identity(dim))
                    .max_abs();
                if residual > tol::INVERSE_TOL {
                    return Err(RepError::InvalidRepresentation(format!(
                        "inverse of image {name} is only accurate to {residual:.3e}"
                    )));
                }
                inverse_images.insert(name.clone(), inv);
            }
        }

        let rep = Self {
            descriptor,
            dim,
            images,
            inverse_images,
        };
        rep.check_relations()?;
        Ok(rep)
    }

    /// Crate-internal: builds a representation without relation or inverse
    /// accuracy checks, for evaluating derived images whose relation defects
    /// are themselves the quantity being measured.
    pub(crate) fn new_unchecked(
        descriptor: GroupDescriptor,
        images: BTreeMap<String, ComplexMatrix>,
    ) -> Result<Self> {
        let dim = images
            .values()
            .next()
            .map(|m| m.rows())
            .ok_or_else(|| RepError::InvalidRepresentation("no generator images".into()))?;
        let mut inverse_images = BTreeMap::new();
        if descriptor.kind() == GroupKind::Group {
            for (name, m) in &images {
                inverse_images.insert(name.clone(), linalg::inverse(m)?);
            }
        }
        Ok(Self {
            descriptor,
            dim,
            images,
            inverse_images,
        })
    }

    /// The underlying descriptor.
    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }

    /// Common dimension of the images.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The image of a named generator (or table element).
    pub fn image(&self, name: &str) -> Option<&ComplexMatrix> {
        self.images.get(name)
    }

    /// All images keyed by name.
    pub fn images(&self) -> &BTreeMap<String, ComplexMatrix> {
        &self.images
    }

    fn relation_close(&self, lhs: &ComplexMatrix, rhs: &ComplexMatrix, what: &str) -> Result<()> {
        let diff = lhs.sub(rhs).max_abs();
        if !(diff <= tol::HOMOMORPHISM_TOL) {
            return Err(RepError::InvalidRepresentation(format!(
                "{what} violated by {diff:.3e}"
            )));
        }
        Ok(())
    }

    fn check_relations(&self) -> Result<()> {
        match &self.descriptor {
            GroupDescriptor::IntLattice(_) | GroupDescriptor::NatLattice(_) => {
                let mats: Vec<(&String, &ComplexMatrix)> = self.images.iter().collect();
                for i in 0..mats.len() {
                    for j in (i + 1)..mats.len() {
                        self.relation_close(
                            &mats[i].1.matmul(mats[j].1),
                            &mats[j].1.matmul(mats[i].1),
                            &format!("commutation of {} and {}", mats[i].0, mats[j].0),
                        )?;
                    }
                }
            }
            GroupDescriptor::Heisenberg3 => {
                let x = &self.images["x"];
                let y = &self.images["y"];
                let z = &self.images["z"];
                self.relation_close(
                    &x.matmul(y),
                    &y.matmul(x).matmul(z),
                    "the relation x·y = y·x·z",
                )?;
                self.relation_close(&z.matmul(x), &x.matmul(z), "centrality of z against x")?;
                self.relation_close(&z.matmul(y), &y.matmul(z), "centrality of z against y")?;
            }
            GroupDescriptor::FiniteGroupTable(table) => {
                let n = table.len();
                let img = |i: usize| -> &ComplexMatrix { &self.images[&format!("g{i}")] };
                let e = self.descriptor.identity().coords()[0] as usize;
                self.relation_close(
                    img(e),
                    &ComplexMatrix::identity(self.dim),
                    "the identity image",
                )?;
                for i in 0..n {
                    for j in 0..n {
                        self.relation_close(
                            &img(i).matmul(img(j)),
                            img(table[i][j]),
                            &format!("the table product g{i}·g{j}"),
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Memoizing evaluator: powers of each generator image are cached so whole
/// Følner sets cost a couple of matrix products per element.
pub(crate) struct Evaluator<'a> {
    rep: &'a Representation,
    axis_names: Vec<String>,
    powers: Vec<HashMap<i64, ComplexMatrix>>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(rep: &'a Representation) -> Self {
        let axis_names: Vec<String> = match rep.descriptor() {
            GroupDescriptor::FiniteGroupTable(_) => Vec::new(),
            d => d.generators().into_iter().map(|(name, _)| name).collect(),
        };
        let axes = axis_names.len();
        Self {
            rep,
            axis_names,
            powers: vec![HashMap::new(); axes],
        }
    }

    /// `π(s_axis)^k`, filling the power cache iteratively toward `k`.
    fn power(&mut self, axis: usize, k: i64) -> Result<ComplexMatrix> {
        if k == 0 {
            return Ok(ComplexMatrix::identity(self.rep.dim()));
        }
        if let Some(hit) = self.powers[axis].get(&k) {
            return Ok(hit.clone());
        }
        let name = &self.axis_names[axis];
        let step = if k > 0 {
            self.rep.images[name].clone()
        } else {
            self.rep
                .inverse_images
                .get(name)
                .cloned()
                .ok_or(RepError::Folner(FolnerError::NotApplicable))?
        };
        let dir = k.signum();
        let mut cur = k - dir;
        while cur != 0 && !self.powers[axis].contains_key(&cur) {
            cur -= dir;
        }
        let mut acc = if cur == 0 {
            step.clone()
        } else {
            step.matmul(&self.powers[axis][&cur])
        };
        cur += dir;
        self.powers[axis].insert(cur, acc.clone());
        while cur != k {
            acc = step.matmul(&acc);
            cur += dir;
            self.powers[axis].insert(cur, acc.clone());
        }
        Ok(acc)
    }

    /// `π(g)` under the fixed normal form.
    pub(crate) fn eval(&mut self, g: &Element) -> Result<ComplexMatrix> {
        if !self.rep.descriptor().contains(g) {
            return Err(FolnerError::OutOfDomain { element: *g }.into());
        }
        match self.rep.descriptor() {
            GroupDescriptor::FiniteGroupTable(_) => {
                Ok(self.rep.images[&format!("g{}", g.coords()[0])].clone())
            }
            GroupDescriptor::IntLattice(d) | GroupDescriptor::NatLattice(d) => {
                let mut out = self.power(0, g.coords()[0])?;
                for axis in 1..*d {
                    out = out.matmul(&self.power(axis, g.coords()[axis])?);
                }
                Ok(out)
            }
            // An element (a, b, c) factors as z^c · y^b · x^a under the
            // group's multiplication, so the image is π(z)^c π(y)^b π(x)^a.
            GroupDescriptor::Heisenberg3 => {
                let (a, b, c) = (g.coords()[0], g.coords()[1], g.coords()[2]);
                let z = self.power(2, c)?;
                let y = self.power(1, b)?;
                let x = self.power(0, a)?;
                Ok(z.matmul(&y).matmul(&x))
            }
        }
    }

    /// `‖π(g)‖`, with non-finite products reported as infinite.
    fn eval_norm(&mut self, g: &Element) -> Result<f64> {
        let m = self.eval(g)?;
        if !m.all_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(op_norm(&m))
    }
}

/// Evaluates `π(g)` from the generator images under the fixed normal form.
pub fn rep_eval(rep: &Representation, g: &Element) -> Result<ComplexMatrix> {
    Evaluator::new(rep).eval(g)
}

/// The two Gram averages over one Følner set.
#[derive(Clone, Debug)]
pub struct FolnerGram {
    /// The Følner index the averages were taken at.
    pub n: u64,
    /// `(1/|F_N|) Σ_{g∈F_N} π(g)*·π(g)`.
    pub gram: HermitianMatrix,
    /// `(1/|F_N|) Σ_{g∈F_N} π(g)·π(g)*`.
    pub adjoint_gram: HermitianMatrix,
}

/// Computes both Gram averages over `folner_set(family, n)` by exact
/// summation in the set's sorted order.
pub fn folner_gram_pair(rep: &Representation, family: &FolnerFamily, n: u64) -> Result<FolnerGram> {
    require_same_descriptor(rep, family)?;
    let set = folner_set(family, n)?;
    let mut evaluator = Evaluator::new(rep);
    let mut gram = ComplexMatrix::zeros(rep.dim(), rep.dim());
    let mut adjoint = ComplexMatrix::zeros(rep.dim(), rep.dim());
    for g in &set {
        let m = evaluator.eval(g)?;
        gram = gram.add(&m.adjoint().matmul(&m));
        adjoint = adjoint.add(&m.matmul(&m.adjoint()));
    }
    let scale = 1.0 / set.len() as f64;
    Ok(FolnerGram {
        n,
        gram: HermitianMatrix::symmetrized(gram.scale(scale)),
        adjoint_gram: HermitianMatrix::symmetrized(adjoint.scale(scale)),
    })
}

/// Uniform bound estimates from scanning Gram averages up to a horizon.
#[derive(Clone, Copy, Debug)]
pub struct BoundScan {
    /// `C`: square root of the largest eigenvalue either Gram average
    /// reached over the scan.
    pub c_est: f64,
    /// `m`: square root of the smallest Gram eigenvalue over the scan.
    pub lower_est: f64,
    /// `M`: square root of the largest Gram eigenvalue over the scan.
    pub upper_est: f64,
    /// Whether the averages tripped the divergence tests.
    pub divergent: bool,
    /// Whether the smallest Gram eigenvalue tripped the collapse trend.
    pub collapsed: bool,
    /// Whether `λ_min(gram_N) ≥ (1-slack)/C²` held at every scanned `N`
    /// (groups only; vacuously true for semigroups and divergent scans).
    pub lower_consistent: bool,
}

/// The indices a scan samples: dyadic `N` plus the horizon itself.
pub fn scan_points(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = 1u64;
    while n <= n_max {
        out.push(n);
        n *= 2;
    }
    if *out.last().expect("n_max ≥ 1") != n_max {
        out.push(n_max);
    }
    out
}

/// Scans Gram averages at dyadic `N` up to the horizon, reporting bound
/// estimates, divergence, and collapse.  Sets are summed incrementally
/// through their nesting, and consecutive dyadic eigenvalue ratios feed the
/// same trend tests the operator scans use.
pub fn bound_scan(rep: &Representation, family: &FolnerFamily, n_max: u64) -> Result<BoundScan> {
    require_same_descriptor(rep, family)?;
    if n_max < 4 {
        return Err(RepError::InvalidParameter(format!(
            "scan horizon must be at least 4, got {n_max}"
        )));
    }
    let dim = rep.dim();
    let is_group = rep.descriptor().kind() == GroupKind::Group;
    let mut evaluator = Evaluator::new(rep);
    let mut seen: HashSet<Element> = HashSet::new();
    let mut gram_sum = ComplexMatrix::zeros(dim, dim);
    let mut adjoint_sum = ComplexMatrix::zeros(dim, dim);

    let mut c_sq = f64::MIN;
    let mut lower_sq = f64::MAX;
    let mut upper_sq = f64::MIN;
    let mut divergent = false;
    let mut collapsed = false;
    let mut prev_dyadic: Option<(f64, f64)> = None;
    let mut growth_streak = 0u32;
    let mut collapse_streak = 0u32;
    let mut scanned_lows: Vec<f64> = Vec::new();

    for n in scan_points(n_max) {
        let set = folner_set(family, n)?;
        for g in &set {
            if seen.insert(*g) {
                let m = evaluator.eval(g)?;
                gram_sum = gram_sum.add(&m.adjoint().matmul(&m));
                adjoint_sum = adjoint_sum.add(&m.matmul(&m.adjoint()));
            }
        }
        if !gram_sum.all_finite() || !adjoint_sum.all_finite() {
            divergent = true;
            break;
        }
        let scale = 1.0 / set.len() as f64;
        let gram = HermitianMatrix::symmetrized(gram_sum.scale(scale));
        let adjoint = HermitianMatrix::symmetrized(adjoint_sum.scale(scale));
        let eigs = herm_eigenvalues(&gram)?;
        let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);
        let hi_adjoint = *herm_eigenvalues(&adjoint)?.last().expect("dim > 0");

        c_sq = c_sq.max(hi).max(hi_adjoint);
        lower_sq = lower_sq.min(lo);
        upper_sq = upper_sq.max(hi);
        scanned_lows.push(lo);

        if hi > tol::DIVERGENCE_CAP || hi_adjoint > tol::DIVERGENCE_CAP {
            divergent = true;
            break;
        }
        if n.is_power_of_two() {
            // Trend ratios compare consecutive dyadic windows; the later
            // window must be long enough before its ratio counts.
            if n >= 2 * tol::TREND_MIN_N {
                if let Some((plo, phi)) = prev_dyadic {
                    if phi > 0.0 && hi / phi >= tol::GROWTH_RATIO {
                        growth_streak += 1;
                    } else {
                        growth_streak = 0;
                    }
                    if plo > 0.0 && lo / plo <= tol::COLLAPSE_RATIO {
                        collapse_streak += 1;
                    } else {
                        collapse_streak = 0;
                    }
                    if growth_streak >= 2 {
                        divergent = true;
                    }
                    if collapse_streak >= 2 {
                        collapsed = true;
                    }
                }
            }
            prev_dyadic = Some((lo, hi));
            if divergent {
                break;
            }
        }
    }

    let mut lower_consistent = true;
    if is_group && !divergent {
        // Cauchy–Schwarz across the symmetric set pins every window's
        // smallest Gram eigenvalue above the inverse of the bound constant.
        lower_consistent = scanned_lows
            .iter()
            .all(|&lo| lo >= (1.0 - tol::LOWER_BOUND_SLACK) / c_sq);
    }

    Ok(BoundScan {
        c_est: c_sq.max(0.0).sqrt(),
        lower_est: lower_sq.max(0.0).sqrt(),
        upper_est: upper_sq.max(0.0).sqrt(),
        divergent,
        collapsed,
        lower_consistent,
    })
}

/// Boundary decay: for each `N` in `n_list`, the average of `‖π(g)‖²` over
/// the symmetric difference `F_N·s Δ F_N`, normalized by `|F_N|`.
pub fn symdiff_decay(
    rep: &Representation,
    family: &FolnerFamily,
    s: &Element,
    n_list: &[u64],
) -> Result<Vec<(u64, f64)>> {
    require_same_descriptor(rep, family)?;
    if !rep.descriptor().contains(s) {
        return Err(FolnerError::OutOfDomain { element: *s }.into());
    }
    let mut evaluator = Evaluator::new(rep);
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let set: HashSet<Element> = folner_set(family, n)?.into_iter().collect();
        let translated: std::result::Result<HashSet<Element>, FolnerError> = set
            .iter()
            .map(|g| family.descriptor().multiply(g, s))
            .collect();
        let translated = translated?;
        let mut total = 0.0;
        for g in set.symmetric_difference(&translated) {
            let norm = evaluator.eval_norm(g)?;
            total += norm * norm;
        }
        out.push((n, total / set.len() as f64));
    }
    Ok(out)
}

/// Options for representation certificates.
#[derive(Clone, Copy, Debug)]
pub struct RepOpts {
    /// Scan horizon; `None` picks [`default_rep_horizon`].
    pub n_max: Option<u64>,
    /// Residual tolerance for the conjugated generators.
    pub tol: f64,
    /// Boundary-decay tolerance; `None` picks `1e-3·C²` after the bound
    /// scan.  The default expresses a strict asymptotic standard — at the
    /// shallow horizons higher-rank groups force, pass an explicit value
    /// sized to the horizon's boundary ratio.
    pub decay_tol: Option<f64>,
    /// Floor under the squared lower Gram bound.
    pub min_lower_sq: f64,
    /// Dyadic window depth per refinement pass.
    pub refine_levels: u32,
}

impl Default for RepOpts {
    fn default() -> Self {
        Self {
            n_max: None,
            tol: tol::DEFAULT_CERT_TOL,
            decay_tol: None,
            min_lower_sq: tol::DEFAULT_MIN_LOWER_SQ,
            refine_levels: crate::cesaro::tol::DEFAULT_REFINE_LEVELS,
        }
    }
}

/// Default scan horizon per descriptor.
///
/// Rank one gets a horizon deep enough that the strict default decay
/// tolerance is meaningful for bounded representations; higher ranks and the
/// Heisenberg group are capped by set growth instead.
pub fn default_rep_horizon(descriptor: &GroupDescriptor) -> u64 {
    match descriptor {
        GroupDescriptor::IntLattice(1) | GroupDescriptor::NatLattice(1) => 16_384,
        GroupDescriptor::IntLattice(d) | GroupDescriptor::NatLattice(d) => [64, 16, 8][*d - 2],
        GroupDescriptor::Heisenberg3 => 8,
        GroupDescriptor::FiniteGroupTable(_) => 4,
    }
}

/// The certified bound constants, matching the certificate kind.
#[derive(Clone, Copy, Debug)]
pub enum RepBound {
    /// Group case: the uniform two-sided constant `C`.
    Group {
        /// The estimate of `C`, folded over the scan and the refinement.
        c: f64,
    },
    /// Semigroup case: the sandwich `m ≤ … ≤ M`.
    Semigroup {
        /// Lower constant `m`.
        lower: f64,
        /// Upper constant `M`.
        upper: f64,
    },
}

/// A similarity certificate for a representation.
#[derive(Clone, Debug)]
pub struct RepCertificate {
    /// Whether the conjugated representation is unitary or isometric.
    pub kind: CertificateKind,
    /// Positive definite `L = F^{1/2}` for the invariant Gram limit `F`;
    /// the certified operator per generator `s` is `L·π(s)·L⁻¹`.
    pub transform: HermitianMatrix,
    /// Residual of `L·π(s)·L⁻¹` per generator.
    pub per_generator_residuals: BTreeMap<String, f64>,
    /// `cond(L)`: ratio of the extreme singular values of the transform.
    pub condition_number: f64,
    /// The certified bound constants.
    pub bound: RepBound,
    /// Measured boundary-decay sequences per checked word.
    pub decay_report: BTreeMap<String, Vec<(u64, f64)>>,
    /// Joint conjugation defect of the limit Gram matrix.
    pub gram_fixed_point_residual: f64,
}

/// Conjugates a group representation to a unitary one and certifies it.
pub fn unitarize_rep(
    rep: &Representation,
    family: &FolnerFamily,
    opts: &RepOpts,
) -> Result<RepCertificate> {
    if rep.descriptor().kind() != GroupKind::Group {
        return Err(RepError::KindMismatch {
            expected: GroupKind::Group,
        });
    }
    certify(rep, family, opts, CertificateKind::Unitary)
}

/// Conjugates a semigroup representation to an isometric one and certifies
/// it.
pub fn isometrize_semigroup_rep(
    rep: &Representation,
    family: &FolnerFamily,
    opts: &RepOpts,
) -> Result<RepCertificate> {
    if rep.descriptor().kind() != GroupKind::Semigroup {
        return Err(RepError::KindMismatch {
            expected: GroupKind::Semigroup,
        });
    }
    certify(rep, family, opts, CertificateKind::Isometry)
}

/// Shared certificate pipeline: bound scan, decay gate, alternating
/// refinement, transform, residuals.
fn certify(
    rep: &Representation,
    family: &FolnerFamily,
    opts: &RepOpts,
    kind: CertificateKind,
) -> Result<RepCertificate> {
    require_same_descriptor(rep, family)?;
    let n_max = opts
        .n_max
        .unwrap_or_else(|| default_rep_horizon(rep.descriptor()));
    let scan = bound_scan(rep, family, n_max)?;

    let mut failures = Vec::new();
    if scan.divergent {
        failures.push(RepFailure::Divergent);
    }
    let lower_sq = scan.lower_est * scan.lower_est;
    if scan.collapsed || !scan.lower_consistent || lower_sq < opts.min_lower_sq {
        let floor = if scan.lower_consistent {
            opts.min_lower_sq
        } else {
            (1.0 - tol::LOWER_BOUND_SLACK) / (scan.c_est * scan.c_est)
        };
        failures.push(RepFailure::LowerBoundCollapse { lower_sq, floor });
    }

    let decay_tol = opts
        .decay_tol
        .unwrap_or(tol::DEFAULT_DECAY_FACTOR * scan.c_est * scan.c_est);
    let n_list = scan_points(n_max);
    let mut decay_report = BTreeMap::new();
    for (name, word) in decay_words(rep.descriptor()) {
        let values = symdiff_decay(rep, family, &word, &n_list)?;
        if let Some(failure) = decay_violation(&name, &values, decay_tol) {
            failures.push(failure);
        }
        decay_report.insert(name, values);
    }
    if !failures.is_empty() {
        return Err(RepError::HypothesisFailed { failures });
    }

    let refined = refine_joint(rep, opts)?;
    if refined.grew_unbounded {
        return Err(RepError::HypothesisFailed {
            failures: vec![RepFailure::Divergent],
        });
    }
    let scale = herm_eigenvalues(&refined.gram)?
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(1.0);
    if refined.defect > opts.tol * scale {
        return Err(RepError::HypothesisFailed {
            failures: vec![RepFailure::GramNotConverged {
                residual: refined.defect,
            }],
        });
    }
    build_rep_certificate(rep, &refined, &scan, kind, opts, decay_report)
}

/// Output of the joint Gram refinement.
struct JointRefine {
    gram: HermitianMatrix,
    /// Largest conjugation defect over the generators.
    defect: f64,
    /// Smallest eigenvalue seen at any level of any pass.
    lo: f64,
    /// Largest eigenvalue seen at any level of any pass.
    hi: f64,
    grew_unbounded: bool,
}

/// Alternating per-generator refinement: each pass runs one dyadic window
/// average along one generator, and the joint conjugation defect over all
/// generators decides convergence.  Finite tables shortcut to the exact
/// full-group average, which is invariant by construction.
fn refine_joint(rep: &Representation, opts: &RepOpts) -> Result<JointRefine> {
    if matches!(rep.descriptor(), GroupDescriptor::FiniteGroupTable(_)) {
        let family = FolnerFamily::new(rep.descriptor().clone());
        let gram = folner_gram_pair(rep, &family, 1)?.gram;
        let defect = rep
            .descriptor()
            .generators()
            .iter()
            .map(|(name, _)| averaging::conjugation_defect(&rep.images[name], &gram))
            .fold(0.0f64, f64::max);
        let eigs = herm_eigenvalues(&gram)?;
        return Ok(JointRefine {
            defect,
            lo: eigs[0],
            hi: eigs[eigs.len() - 1],
            gram,
            grew_unbounded: false,
        });
    }

    let names: Vec<String> = rep
        .descriptor()
        .generators()
        .into_iter()
        .map(|(name, _)| name)
        .collect();
    let steps: Vec<&ComplexMatrix> = names.iter().map(|n| &rep.images[n]).collect();
    let target_rel = opts.tol * crate::cesaro::tol::REFINE_TARGET_FACTOR;
    let mut x = HermitianMatrix::identity(rep.dim());
    let mut defect = f64::INFINITY;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..crate::cesaro::tol::MAX_REFINE_RUNS {
        let mut scale = 1.0f64;
        for step in &steps {
            let trace = averaging::one_sided_dyadic(step, &x, opts.refine_levels);
            lo = lo.min(trace.min_eigenvalue());
            hi = hi.max(trace.max_eigenvalue());
            if trace.grew_unbounded() {
                return Ok(JointRefine {
                    gram: trace.avg,
                    defect: f64::INFINITY,
                    lo,
                    hi,
                    grew_unbounded: true,
                });
            }
            scale = scale.max(
                trace
                    .level_extremes
                    .last()
                    .map(|&(_, level_hi)| level_hi)
                    .unwrap_or(1.0),
            );
            x = trace.avg;
        }
        defect = steps
            .iter()
            .map(|s| averaging::conjugation_defect(s, &x))
            .fold(0.0f64, f64::max);
        if defect <= target_rel * scale {
            break;
        }
    }
    Ok(JointRefine {
        gram: x,
        defect,
        lo,
        hi,
        grew_unbounded: false,
    })
}

fn build_rep_certificate(
    rep: &Representation,
    refined: &JointRefine,
    scan: &BoundScan,
    kind: CertificateKind,
    opts: &RepOpts,
    decay_report: BTreeMap<String, Vec<(u64, f64)>>,
) -> Result<RepCertificate> {
    let dec = herm_eigen(&refined.gram)?;
    let lo = dec.min_eigenvalue();
    let hi = dec.max_eigenvalue();
    if lo <= linalg::tol::SINGULAR_REL * hi.max(1.0) {
        return Err(RepError::HypothesisFailed {
            failures: vec![RepFailure::SingularTransform],
        });
    }
    let transform = dec.map_eigenvalues(f64::sqrt);
    let inverse = dec.map_eigenvalues(|x| 1.0 / x.sqrt());

    let mut residuals = BTreeMap::new();
    let mut failures = Vec::new();
    for (name, _) in rep.descriptor().generators() {
        let image = &rep.images[&name];
        let conjugated = transform.matrix().matmul(image).matmul(inverse.matrix());
        let residual = match kind {
            CertificateKind::Unitary => linalg::unitary_residual(&conjugated)?,
            CertificateKind::Isometry => linalg::isometry_residual(&conjugated)?,
        };
        if residual > opts.tol {
            failures.push(RepFailure::ResidualAboveTolerance {
                generator: name.clone(),
                residual,
            });
        }
        residuals.insert(name, residual);
    }
    if !failures.is_empty() {
        return Err(RepError::HypothesisFailed { failures });
    }

    // Bounds fold the refinement's level extremes into the scanned windows,
    // so the limit Gram's spectrum — hence the condition number — stays
    // inside the certified constants.
    let bound = match kind {
        CertificateKind::Unitary => RepBound::Group {
            c: (scan.c_est * scan.c_est).max(refined.hi).sqrt(),
        },
        CertificateKind::Isometry => RepBound::Semigroup {
            lower: (scan.lower_est * scan.lower_est)
                .min(refined.lo)
                .max(0.0)
                .sqrt(),
            upper: (scan.upper_est * scan.upper_est).max(refined.hi).sqrt(),
        },
    };
    Ok(RepCertificate {
        kind,
        transform,
        per_generator_residuals: residuals,
        condition_number: (hi / lo).sqrt(),
        bound,
        decay_report,
        gram_fixed_point_residual: refined.defect,
    })
}

/// Result of the uniform-bound certificate over one Følner set.
#[derive(Clone, Copy, Debug)]
pub struct UniformBound {
    /// Whether every element's norms stayed inside the certified bounds.
    pub holds: bool,
    /// Largest operator norm over the set.
    pub worst_norm: f64,
}

/// Under the doubling condition with constant `kappa`, checks the uniform
/// singular-value bounds `σ_min(π(k)) ≥ 1/(C²√kappa)` and
/// `‖π(k)‖ ≤ C²√kappa` over the whole `N`-th Følner set (groups only).
pub fn cert_uniform_bound(
    rep: &Representation,
    family: &FolnerFamily,
    p: u64,
    kappa: f64,
    c_est: f64,
    n: u64,
) -> Result<UniformBound> {
    require_same_descriptor(rep, family)?;
    if rep.descriptor().kind() != GroupKind::Group {
        return Err(RepError::KindMismatch {
            expected: GroupKind::Group,
        });
    }
    if c_est < 1.0 || kappa < 1.0 {
        return Err(RepError::InvalidParameter(
            "uniform-bound constants must be at least 1".into(),
        ));
    }
    let report = crate::folner::doubling_check(family, n, p)?;
    if !report.subset_ok || report.ratio() > kappa {
        return Err(RepError::DoublingFailed {
            subset_ok: report.subset_ok,
            ratio: report.ratio(),
            kappa,
        });
    }
    let floor = (1.0 - tol::UNIFORM_SLACK) / (c_est * c_est * kappa.sqrt());
    let cap = c_est * c_est * kappa.sqrt() * (1.0 + tol::UNIFORM_SLACK);
    let mut evaluator = Evaluator::new(rep);
    let mut holds = true;
    let mut worst: f64 = 0.0;
    for g in &folner_set(family, n)? {
        let m = evaluator.eval(g)?;
        if !m.all_finite() {
            holds = false;
            worst = f64::INFINITY;
            continue;
        }
        let values = singular_values(&m);
        let (largest, smallest) = (values[0], values[values.len() - 1]);
        if smallest < floor || largest > cap {
            holds = false;
        }
        worst = worst.max(largest);
    }
    Ok(UniformBound {
        holds,
        worst_norm: worst,
    })
}

/// Result of the translated-average boundedness check.
#[derive(Clone, Copy, Debug)]
pub struct TranslatedBound {
    /// Square root of the largest translated-average eigenvalue over all
    /// samples and scanned indices.
    pub c_est: f64,
    /// Whether the per-`N` maxima stabilized (dyadic ratios at most 1.05
    /// from `N = 16` on).
    pub uniform_ok: bool,
}

/// Scans Gram averages over translated sets `F_N·g` for each sample `g` at
/// dyadic `N`, reporting the uniform constant and whether it stabilizes.
/// An empty sample list defaults to all words of length ≤ 3 over the
/// generators.
pub fn translated_bound_check(
    rep: &Representation,
    family: &FolnerFamily,
    g_samples: &[Element],
    n_max: u64,
) -> Result<TranslatedBound> {
    require_same_descriptor(rep, family)?;
    if n_max < 4 {
        return Err(RepError::InvalidParameter(format!(
            "scan horizon must be at least 4, got {n_max}"
        )));
    }
    let default_words;
    let samples: &[Element] = if g_samples.is_empty() {
        default_words = generator_words(rep.descriptor(), 3)?;
        &default_words
    } else {
        g_samples
    };

    let dim = rep.dim();
    let mut evaluator = Evaluator::new(rep);
    // One incremental accumulator per sample; translated sets nest because
    // the base sets do and right translation is injective.
    let mut sums: Vec<(HashSet<Element>, ComplexMatrix)> = samples
        .iter()
        .map(|_| (HashSet::new(), ComplexMatrix::zeros(dim, dim)))
        .collect();
    let mut c_sq = 0.0f64;
    let mut dyadic_maxima: Vec<(u64, f64)> = Vec::new();
    for n in scan_points(n_max) {
        let set = folner_set(family, n)?;
        let mut level_max = 0.0f64;
        for (sample, (seen, sum)) in samples.iter().zip(sums.iter_mut()) {
            for g in &set {
                let translated = family.descriptor().multiply(g, sample)?;
                if seen.insert(translated) {
                    let m = evaluator.eval(&translated)?;
                    *sum = sum.add(&m.adjoint().matmul(&m));
                }
            }
            let hi = if sum.all_finite() {
                let gram = HermitianMatrix::symmetrized(sum.scale(1.0 / seen.len() as f64));
                *herm_eigenvalues(&gram)?.last().expect("dim > 0")
            } else {
                f64::INFINITY
            };
            level_max = level_max.max(hi);
        }
        c_sq = c_sq.max(level_max);
        if n.is_power_of_two() {
            dyadic_maxima.push((n, level_max));
        }
    }
    let uniform_ok = dyadic_maxima
        .windows(2)
        .filter(|w| w[1].0 >= 16)
        .all(|w| w[1].1 <= w[0].1 * tol::STABLE_RATIO);
    Ok(TranslatedBound {
        c_est: c_sq.sqrt(),
        uniform_ok,
    })
}

/// All distinct words of length at most `max_len` over the generators (and
/// their inverses, for groups), identity included, sorted.
pub fn generator_words(descriptor: &GroupDescriptor, max_len: u32) -> Result<Vec<Element>> {
    let mut symbols: Vec<Element> = descriptor.generators().iter().map(|(_, g)| *g).collect();
    if descriptor.kind() == GroupKind::Group {
        for (_, g) in descriptor.generators() {
            symbols.push(descriptor.inverse(&g)?);
        }
    }
    let mut words: HashSet<Element> = HashSet::new();
    let mut frontier = vec![descriptor.identity()];
    words.insert(descriptor.identity());
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for s in &symbols {
                let product = descriptor.multiply(w, s)?;
                if words.insert(product) {
                    next.push(product);
                }
            }
        }
        frontier = next;
    }
    let mut out: Vec<Element> = words.into_iter().collect();
    out.sort_unstable();
    Ok(out)
}

/// The words whose boundary decay gates certification: the generators, their
/// inverses (groups), ordered products of generator pairs, and fourth powers
/// — representatives of the word lengths up to 4.
fn decay_words(descriptor: &GroupDescriptor) -> Vec<(String, Element)> {
    let generators = descriptor.generators();
    let mut out: Vec<(String, Element)> = Vec::new();
    let mut seen: HashSet<Element> = HashSet::new();
    let mut push = |name: String, g: Element, out: &mut Vec<(String, Element)>| {
        if seen.insert(g) {
            out.push((name, g));
        }
    };
    for (name, g) in &generators {
        push(name.clone(), *g, &mut out);
    }
    if descriptor.kind() == GroupKind::Group {
        for (name, g) in &generators {
            if let Ok(inv) = descriptor.inverse(g) {
                push(format!("{name}^-1"), inv, &mut out);
            }
        }
    }
    for (a_name, a) in &generators {
        for (b_name, b) in &generators {
            if let Ok(product) = descriptor.multiply(a, b) {
                push(format!("{a_name}*{b_name}"), product, &mut out);
            }
        }
    }
    for (name, g) in &generators {
        let mut power = *g;
        let mut ok = true;
        for _ in 0..3 {
            match descriptor.multiply(&power, g) {
                Ok(next) => power = next,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            push(format!("{name}^4"), power, &mut out);
        }
    }
    out
}

/// Rejects a decay sequence that fails to decrease to tolerance: the last
/// value must be at or below it, and values above tolerance must not grow by
/// more than [`tol::DECAY_SLACK`] between windows past
/// [`tol::DECAY_TREND_MIN_N`] (genuine growth doubles per dyadic step;
/// bounded oscillation does not).
fn decay_violation(name: &str, values: &[(u64, f64)], decay_tol: f64) -> Option<RepFailure> {
    let last = values.last().map(|&(_, v)| v).unwrap_or(0.0);
    let mut bad = !(last <= decay_tol);
    for pair in values.windows(2) {
        let ((prev_n, prev), (_, next)) = (pair[0], pair[1]);
        if prev_n >= tol::DECAY_TREND_MIN_N
            && prev > decay_tol
            && next > decay_tol
            && next > prev * tol::DECAY_SLACK
        {
            bad = true;
        }
    }
    bad.then(|| RepFailure::DecayNotObserved {
        word: name.to_string(),
        last,
        tolerance: decay_tol,
    })
}

fn require_same_descriptor(rep: &Representation, family: &FolnerFamily) -> Result<()> {
    if rep.descriptor() != family.descriptor() {
        return Err(RepError::InvalidParameter(
            "representation and Følner family describe different groups".into(),
        ));
    }
    Ok(())
}
