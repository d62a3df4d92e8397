//! Discrete groups and semigroups with explicit Følner sets.
//!
//! A (right) Følner sequence for a discrete group or semigroup is a family of
//! finite sets `F_N` whose translates `F_N·s` overlap them ever more tightly:
//! `|F_N·s Δ F_N| / |F_N| → 0` for every generator `s`.  Averaging a
//! representation over such sets is what turns uniform boundedness into an
//! invariant inner product, so this module provides the combinatorial side of
//! that story: built-in descriptors with canonical Følner sets, and exact
//! enumeration of the ratios the averaging arguments consume.
//!
//! Everything here is integer-exact.  Sets are enumerated element by element,
//! translations and inverses are evaluated through the descriptor's
//! multiplication, and every reported ratio is a quotient of exact counts.
//! Set sizes are capped at [`SET_CAP`] elements as a desk-scale guardrail.
//!
//! Built-in families:
//! - `ℤᵈ` (`d ≤ 4`): boxes `{−N..N}ᵈ`.
//! - discrete Heisenberg group: anisotropic boxes `{|a|,|b| ≤ N, |c| ≤ N²}`,
//!   closed under inverses (the raw box misses finitely many inverses per
//!   `N`, so the family symmetrizes it; see [`GroupDescriptor::Heisenberg3`]).
//! - finite groups given by a multiplication table: the whole group at
//!   every `N`.
//! - `ℕᵈ` (`d ≤ 4`): boxes `{0..N−1}ᵈ`, a right Følner sequence for the
//!   additive semigroup.
//!
//! Coordinates use exact `i64` arithmetic; callers stay well inside `i64`
//! range (the set-size cap is reached long before overflow matters).

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use thiserror::Error;

/// Hard cap on the number of elements any enumerated set may hold.
pub const SET_CAP: u64 = 10_000_000;

/// Number of sampled triples used to spot-check associativity of large
/// multiplication tables (small tables are checked exhaustively).
const ASSOC_SAMPLES: usize = 1000;

/// Largest table size `n` for which associativity is checked on all `n³`
/// triples rather than sampled.
const ASSOC_EXHAUSTIVE_CUBE: u64 = SET_CAP;

/// Maximal coordinate arity of any built-in descriptor.
const MAX_DIM: usize = 4;

/// Errors reported by Følner-set enumeration.
#[derive(Debug, Error)]
pub enum FolnerError {
    /// The operation needs inverses, which the descriptor does not have.
    #[error("operation requires a group, but the descriptor is a semigroup")]
    NotApplicable,
    /// An enumerated set would exceed the [`SET_CAP`] guardrail.
    #[error("enumerated set would hold {needed} elements, above the cap of {cap}")]
    SetTooLarge { needed: u64, cap: u64 },
    /// A finite-group multiplication table failed validation.
    #[error("invalid multiplication table: {0}")]
    InvalidTable(String),
    /// An element does not belong to the descriptor's domain.
    #[error("element {element} is outside the descriptor's domain")]
    OutOfDomain { element: Element },
    /// A scalar argument was outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Convenient alias for results in this module.
pub type Result<T> = std::result::Result<T, FolnerError>;

/// Whether a descriptor carries inverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    /// Every element has an inverse.
    Group,
    /// No inverses; only right translations are available.
    Semigroup,
}

/// A group or semigroup element as a small tuple of integer coordinates.
///
/// Lattice elements hold `d` coordinates, Heisenberg elements hold `(a, b, c)`,
/// finite-table elements hold a single 0-based index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Element {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl Element {
    /// Builds an element from its coordinates (1 to 4 of them).
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(FolnerError::InvalidParameter(format!(
                "element arity must be 1..={MAX_DIM}, got {}",
                coords.len()
            )));
        }
        let mut padded = [0i64; MAX_DIM];
        padded[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            coords: padded,
            dim: coords.len() as u8,
        })
    }

    /// The element's coordinates.
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A built-in group or semigroup together with its multiplication.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupDescriptor {
    /// The lattice `ℤᵈ` under addition, `1 ≤ d ≤ 4`.
    IntLattice(usize),
    /// The discrete Heisenberg group on triples `(a, b, c)` with
    /// `(a, b, c)(a′, b′, c′) = (a + a′, b + b′, c + c′ + a·b′)` and inverse
    /// `(−a, −b, −c + a·b)`.
    Heisenberg3,
    /// A finite group given by its full multiplication table of 0-based
    /// indices; validated by [`GroupDescriptor::finite_group_table`].
    FiniteGroupTable(Vec<Vec<usize>>),
    /// The semigroup `ℕᵈ` under addition, `1 ≤ d ≤ 4`.
    NatLattice(usize),
}

impl GroupDescriptor {
    /// Builds an `ℤᵈ` descriptor, `1 ≤ d ≤ 4`.
    pub fn int_lattice(d: usize) -> Result<Self> {
        require_arity(d)?;
        Ok(Self::IntLattice(d))
    }

    /// Builds an `ℕᵈ` descriptor, `1 ≤ d ≤ 4`.
    pub fn nat_lattice(d: usize) -> Result<Self> {
        require_arity(d)?;
        Ok(Self::NatLattice(d))
    }

    /// Builds a finite-group descriptor after validating the table: it must
    /// be square with in-range entries, contain a two-sided identity, give
    /// every element an inverse, and be associative (checked on all `n³`
    /// triples when that is at most [`SET_CAP`], otherwise on 1000 seeded
    /// random triples).
    pub fn finite_group_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(FolnerError::InvalidTable("table is empty".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(FolnerError::InvalidTable(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&e| e >= n) {
                return Err(FolnerError::InvalidTable(format!(
                    "row {i} holds out-of-range index {bad}"
                )));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| FolnerError::InvalidTable("no two-sided identity".into()))?;
        for g in 0..n {
            if !(0..n).any(|h| table[g][h] == identity && table[h][g] == identity) {
                return Err(FolnerError::InvalidTable(format!(
                    "element {g} has no inverse"
                )));
            }
        }
        let cube = (n as u64).saturating_pow(3);
        if cube <= ASSOC_EXHAUSTIVE_CUBE {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if table[table[a][b]][c] != table[a][table[b][c]] {
                            return Err(FolnerError::InvalidTable(format!(
                                "associativity fails at ({a}, {b}, {c})"
                            )));
                        }
                    }
                }
            }
        } else {
            let mut rng = crate::synth::rng(0);
            for _ in 0..ASSOC_SAMPLES {
                let (a, b, c) = (
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                );
                if table[table[a][b]][c] != table[a][table[b][c]] {
                    return Err(FolnerError::InvalidTable(format!(
                        "associativity fails at ({a}, {b}, {c})"
                    )));
                }
            }
        }
        Ok(Self::FiniteGroupTable(table))
    }

    /// Whether the descriptor has inverses.
    pub fn kind(&self) -> GroupKind {
        match self {
            Self::NatLattice(_) => GroupKind::Semigroup,
            _ => GroupKind::Group,
        }
    }

    /// Coordinate arity of this descriptor's elements.
    pub fn arity(&self) -> usize {
        match self {
            Self::IntLattice(d) | Self::NatLattice(d) => *d,
            Self::Heisenberg3 => 3,
            Self::FiniteGroupTable(_) => 1,
        }
    }

    /// The identity element.
    pub fn identity(&self) -> Element {
        match self {
            Self::FiniteGroupTable(table) => {
                let n = table.len();
                let e = (0..n)
                    .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
                    .expect("validated table has an identity");
                Element::new(&[e as i64]).expect("index fits one coordinate")
            }
            _ => Element::new(&vec![0i64; self.arity()]).expect("arity is 1..=4"),
        }
    }

    /// The named generating set: unit vectors `e1..ed` for lattices,
    /// `x, y, z` for the Heisenberg group, and every non-identity element
    /// `g{i}` for finite tables.
    pub fn generators(&self) -> Vec<(String, Element)> {
        match self {
            Self::IntLattice(d) | Self::NatLattice(d) => (0..*d)
                .map(|i| {
                    let mut coords = vec![0i64; *d];
                    coords[i] = 1;
                    (
                        format!("e{}", i + 1),
                        Element::new(&coords).expect("arity is 1..=4"),
                    )
                })
                .collect(),
            Self::Heisenberg3 => [("x", [1, 0, 0]), ("y", [0, 1, 0]), ("z", [0, 0, 1])]
                .iter()
                .map(|(name, coords)| {
                    (
                        name.to_string(),
                        Element::new(coords).expect("arity is 3"),
                    )
                })
                .collect(),
            Self::FiniteGroupTable(table) => {
                let e = self.identity();
                (0..table.len() as i64)
                    .filter(|&i| i != e.coords()[0])
                    .map(|i| {
                        (
                            format!("g{i}"),
                            Element::new(&[i]).expect("index fits one coordinate"),
                        )
                    })
                    .collect()
            }
        }
    }

    /// Whether `g` lies in the descriptor's domain.
    pub fn contains(&self, g: &Element) -> bool {
        if g.coords().len() != self.arity() {
            return false;
        }
        match self {
            Self::NatLattice(_) => g.coords().iter().all(|&c| c >= 0),
            Self::FiniteGroupTable(table) => {
                let i = g.coords()[0];
                i >= 0 && (i as usize) < table.len()
            }
            _ => true,
        }
    }

    /// The product `g·h`.
    pub fn multiply(&self, g: &Element, h: &Element) -> Result<Element> {
        self.require_member(g)?;
        self.require_member(h)?;
        match self {
            Self::IntLattice(_) | Self::NatLattice(_) => {
                let coords: Vec<i64> = g
                    .coords()
                    .iter()
                    .zip(h.coords())
                    .map(|(a, b)| a + b)
                    .collect();
                Element::new(&coords)
            }
            Self::Heisenberg3 => {
                let (a, b, c) = (g.coords()[0], g.coords()[1], g.coords()[2]);
                let (x, y, z) = (h.coords()[0], h.coords()[1], h.coords()[2]);
                Element::new(&[a + x, b + y, c + z + a * y])
            }
            Self::FiniteGroupTable(table) => {
                let product = table[g.coords()[0] as usize][h.coords()[0] as usize];
                Element::new(&[product as i64])
            }
        }
    }

    /// The inverse `g⁻¹`; fails with `NotApplicable` for semigroups.
    pub fn inverse(&self, g: &Element) -> Result<Element> {
        self.require_member(g)?;
        match self {
            Self::NatLattice(_) => Err(FolnerError::NotApplicable),
            Self::IntLattice(_) => {
                let coords: Vec<i64> = g.coords().iter().map(|&c| -c).collect();
                Element::new(&coords)
            }
            Self::Heisenberg3 => {
                let (a, b, c) = (g.coords()[0], g.coords()[1], g.coords()[2]);
                Element::new(&[-a, -b, -c + a * b])
            }
            Self::FiniteGroupTable(table) => {
                let e = self.identity().coords()[0] as usize;
                let i = g.coords()[0] as usize;
                let inv = (0..table.len())
                    .find(|&h| table[i][h] == e && table[h][i] == e)
                    .expect("validated table has inverses");
                Element::new(&[inv as i64])
            }
        }
    }

    fn require_member(&self, g: &Element) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(FolnerError::OutOfDomain { element: *g })
        }
    }

    fn require_group(&self) -> Result<()> {
        match self.kind() {
            GroupKind::Group => Ok(()),
            GroupKind::Semigroup => Err(FolnerError::NotApplicable),
        }
    }
}

/// A descriptor together with its canonical Følner sets.
#[derive(Clone, Debug)]
pub struct FolnerFamily {
    descriptor: GroupDescriptor,
}

impl FolnerFamily {
    /// Wraps a descriptor with its built-in Følner sets.
    pub fn new(descriptor: GroupDescriptor) -> Self {
        Self { descriptor }
    }

    /// The underlying descriptor.
    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }

    /// The `N`-th Følner set as a sorted, duplicate-free element list.
    ///
    /// Group families are closed under inverses; in particular the
    /// Heisenberg sets are the anisotropic boxes together with their
    /// inverses.
    pub fn set_at(&self, n: u64) -> Result<Vec<Element>> {
        if n == 0 {
            return Err(FolnerError::InvalidParameter(
                "Følner index must be at least 1".into(),
            ));
        }
        let size = self.raw_size(n);
        if size > u128::from(SET_CAP) {
            return Err(FolnerError::SetTooLarge {
                needed: size.min(u128::from(u64::MAX)) as u64,
                cap: SET_CAP,
            });
        }
        let raw = match &self.descriptor {
            GroupDescriptor::IntLattice(d) => lattice_box(-(n as i64), n as i64, *d),
            GroupDescriptor::NatLattice(d) => lattice_box(0, n as i64 - 1, *d),
            GroupDescriptor::FiniteGroupTable(table) => (0..table.len() as i64)
                .map(|i| Element::new(&[i]).expect("index fits one coordinate"))
                .collect(),
            GroupDescriptor::Heisenberg3 => {
                let n = n as i64;
                let mut out = Vec::new();
                for a in -n..=n {
                    for b in -n..=n {
                        for c in -(n * n)..=(n * n) {
                            out.push(Element::new(&[a, b, c]).expect("arity is 3"));
                        }
                    }
                }
                out
            }
        };
        let mut elements = raw;
        if matches!(self.descriptor.kind(), GroupKind::Group) {
            let mut closed: HashSet<Element> = elements.iter().copied().collect();
            for g in &elements {
                closed.insert(self.descriptor.inverse(g)?);
            }
            if closed.len() as u64 > SET_CAP {
                return Err(FolnerError::SetTooLarge {
                    needed: closed.len() as u64,
                    cap: SET_CAP,
                });
            }
            elements = closed.into_iter().collect();
        }
        elements.sort_unstable();
        Ok(elements)
    }

    /// Size of the raw (pre-symmetrization) `N`-th set.
    fn raw_size(&self, n: u64) -> u128 {
        let n = u128::from(n);
        match &self.descriptor {
            GroupDescriptor::IntLattice(d) => (2 * n + 1).pow(*d as u32),
            GroupDescriptor::NatLattice(d) => n.pow(*d as u32),
            GroupDescriptor::FiniteGroupTable(table) => table.len() as u128,
            GroupDescriptor::Heisenberg3 => (2 * n + 1).pow(2) * (2 * n * n + 1),
        }
    }
}

/// Exact counts behind the strong and plain Følner conditions at one `(N, s)`.
///
/// The strong condition bounds `|F \ F·s|`, the plain one `|F·s \ F|`; the
/// counts satisfy `removed − added = |F| − |F·s|` exactly.
#[derive(Clone, Copy, Debug)]
pub struct SfcRatios {
    /// `|F \ F·s|`: elements the translate loses.
    pub removed: u64,
    /// `|F·s \ F|`: elements the translate adds.
    pub added: u64,
    /// `|F|`.
    pub set_size: u64,
    /// `|F·s|`.
    pub translated_size: u64,
}

impl SfcRatios {
    /// The strong ratio `|F \ F·s| / |F|`.
    pub fn strong(&self) -> f64 {
        self.removed as f64 / self.set_size as f64
    }

    /// The plain ratio `|F·s \ F| / |F|`.
    pub fn plain(&self) -> f64 {
        self.added as f64 / self.set_size as f64
    }
}

/// Result of a doubling check `F_N·F_N⁻¹ ⊆ F_{pN}` with the size ratio.
#[derive(Clone, Copy, Debug)]
pub struct DoublingReport {
    /// Whether the product set is contained in `F_{pN}`.
    pub subset_ok: bool,
    /// `|F_N|`.
    pub size_n: u64,
    /// `|F_{pN}|`.
    pub size_pn: u64,
    /// `|F_N·F_N⁻¹|`.
    pub product_size: u64,
}

impl DoublingReport {
    /// The growth ratio `|F_{pN}| / |F_N|`.
    pub fn ratio(&self) -> f64 {
        self.size_pn as f64 / self.size_n as f64
    }
}

/// The `N`-th Følner set of the family, sorted and duplicate-free.
pub fn folner_set(family: &FolnerFamily, n: u64) -> Result<Vec<Element>> {
    family.set_at(n)
}

/// The Følner ratio `|F_N·s Δ F_N| / |F_N|` by exact enumeration.
pub fn folner_ratio(family: &FolnerFamily, n: u64, s: &Element) -> Result<f64> {
    let set = to_set(family.set_at(n)?);
    let translated = translate(family.descriptor(), &set, s)?;
    let sym_diff = set.symmetric_difference(&translated).count();
    Ok(sym_diff as f64 / set.len() as f64)
}

/// The strong/plain Følner counts `|F_N \ F_N·s|` and `|F_N·s \ F_N|`.
pub fn sfc_ratio(family: &FolnerFamily, n: u64, s: &Element) -> Result<SfcRatios> {
    let set = to_set(family.set_at(n)?);
    let translated = translate(family.descriptor(), &set, s)?;
    Ok(SfcRatios {
        removed: set.difference(&translated).count() as u64,
        added: translated.difference(&set).count() as u64,
        set_size: set.len() as u64,
        translated_size: translated.len() as u64,
    })
}

/// Whether the `N`-th set is closed under inverses (groups only).
pub fn symmetry_check(family: &FolnerFamily, n: u64) -> Result<bool> {
    family.descriptor().require_group()?;
    let set = to_set(family.set_at(n)?);
    for g in &set {
        if !set.contains(&family.descriptor().inverse(g)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks the doubling condition `F_N·F_N⁻¹ ⊆ F_{pN}` by exact product-set
/// enumeration and reports the size ratio `|F_{pN}| / |F_N|` (groups only).
pub fn doubling_check(family: &FolnerFamily, n: u64, p: u64) -> Result<DoublingReport> {
    family.descriptor().require_group()?;
    if p == 0 {
        return Err(FolnerError::InvalidParameter(
            "doubling factor must be at least 1".into(),
        ));
    }
    let base = family.set_at(n)?;
    let inverses: Vec<Element> = base
        .iter()
        .map(|g| family.descriptor().inverse(g))
        .collect::<Result<_>>()?;
    let product = product_set(family.descriptor(), &base, &inverses)?;
    let big = to_set(family.set_at(p * n)?);
    Ok(DoublingReport {
        subset_ok: product.iter().all(|g| big.contains(g)),
        size_n: base.len() as u64,
        size_pn: big.len() as u64,
        product_size: product.len() as u64,
    })
}

/// The Tempelman ratio `|F_N⁻¹·F_N| / |F_N|` by exact enumeration
/// (groups only).
pub fn tempelman_ratio(family: &FolnerFamily, n: u64) -> Result<f64> {
    family.descriptor().require_group()?;
    let base = family.set_at(n)?;
    let inverses: Vec<Element> = base
        .iter()
        .map(|g| family.descriptor().inverse(g))
        .collect::<Result<_>>()?;
    let product = product_set(family.descriptor(), &inverses, &base)?;
    Ok(product.len() as f64 / base.len() as f64)
}

fn require_arity(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(FolnerError::InvalidParameter(format!(
            "lattice dimension must be 1..={MAX_DIM}, got {d}"
        )))
    }
}

/// All lattice points of `{lo..hi}ᵈ` in lexicographic order.
fn lattice_box(lo: i64, hi: i64, d: usize) -> Vec<Element> {
    let width = (hi - lo + 1) as usize;
    let mut out = Vec::with_capacity(width.pow(d as u32));
    let mut counter = vec![lo; d];
    loop {
        out.push(Element::new(&counter).expect("arity is 1..=4"));
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if counter[axis] < hi {
                counter[axis] += 1;
                counter[axis + 1..].fill(lo);
                break;
            }
        }
    }
}

fn to_set(elements: Vec<Element>) -> HashSet<Element> {
    elements.into_iter().collect()
}

fn translate(
    descriptor: &GroupDescriptor,
    set: &HashSet<Element>,
    s: &Element,
) -> Result<HashSet<Element>> {
    set.iter().map(|g| descriptor.multiply(g, s)).collect()
}

fn product_set(
    descriptor: &GroupDescriptor,
    left: &[Element],
    right: &[Element],
) -> Result<HashSet<Element>> {
    let mut out = HashSet::new();
    for g in left {
        for h in right {
            out.insert(descriptor.multiply(g, h)?);
            if out.len() as u64 > SET_CAP {
                return Err(FolnerError::SetTooLarge {
                    needed: out.len() as u64,
                    cap: SET_CAP,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn int_lattice(d: usize) -> FolnerFamily {
        FolnerFamily::new(GroupDescriptor::int_lattice(d).expect("valid dimension"))
    }

    fn nat_lattice(d: usize) -> FolnerFamily {
        FolnerFamily::new(GroupDescriptor::nat_lattice(d).expect("valid dimension"))
    }

    fn heisenberg() -> FolnerFamily {
        FolnerFamily::new(GroupDescriptor::Heisenberg3)
    }

    fn cyclic_table(n: usize) -> Vec<Vec<usize>> {
        (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect()
    }

    fn element(coords: &[i64]) -> Element {
        Element::new(coords).expect("test coordinates are valid")
    }

    #[test]
    fn int_lattice_boxes_have_exact_sizes_and_ratios() {
        let z1 = int_lattice(1);
        assert_eq!(folner_set(&z1, 3).unwrap().len(), 7);
        assert_eq!(folner_set(&int_lattice(2), 1).unwrap().len(), 9);

        let ratio = folner_ratio(&z1, 10, &element(&[1])).unwrap();
        assert_relative_eq!(ratio, 2.0 / 21.0, max_relative = 1e-15);

        let ratio2 = folner_ratio(&int_lattice(2), 16, &element(&[1, 0])).unwrap();
        assert_relative_eq!(ratio2, 66.0 / 1089.0, max_relative = 1e-15);

        let grids: [(usize, &[u64]); 3] = [
            (1, &[1, 2, 3, 5, 8, 13, 21, 32]),
            (2, &[1, 2, 4, 8, 16]),
            (3, &[1, 2, 4]),
        ];
        for (d, ns) in grids {
            let family = int_lattice(d);
            for &n in ns {
                for (_, s) in family.descriptor().generators() {
                    let r = folner_ratio(&family, n, &s).unwrap();
                    assert_relative_eq!(
                        r,
                        2.0 / (2.0 * n as f64 + 1.0),
                        max_relative = 1e-13,
                    );
                }
            }
        }
    }

    #[test]
    fn heisenberg_sets_are_symmetrized_boxes() {
        let h = heisenberg();
        assert_eq!(folner_set(&h, 1).unwrap().len(), 31);
        assert_eq!(folner_set(&h, 2).unwrap().len(), 261);
        assert_eq!(folner_set(&h, 3).unwrap().len(), 1075);
        assert_eq!(folner_set(&h, 4).unwrap().len(), 3073);
        for n in 1..=6 {
            assert!(
                symmetry_check(&h, n).unwrap(),
                "Heisenberg set at N = {n} is not closed under inverses"
            );
        }
    }

    #[test]
    fn heisenberg_multiplication_follows_the_cocycle() {
        let h = GroupDescriptor::Heisenberg3;
        let g1 = element(&[1, -2, 3]);
        let g2 = element(&[0, 4, -1]);
        let g3 = element(&[-2, 1, 5]);
        assert_eq!(h.multiply(&g1, &g2).unwrap(), element(&[1, 2, 6]));
        let left = h.multiply(&h.multiply(&g1, &g2).unwrap(), &g3).unwrap();
        let right = h.multiply(&g1, &h.multiply(&g2, &g3).unwrap()).unwrap();
        assert_eq!(left, right, "associativity fails on a fixed triple");
        let inv = h.inverse(&g1).unwrap();
        assert_eq!(h.multiply(&g1, &inv).unwrap(), h.identity());
        assert_eq!(h.multiply(&inv, &g1).unwrap(), h.identity());
    }

    #[test]
    fn heisenberg_generator_ratios_decrease_dyadically() {
        let h = heisenberg();
        let x = element(&[1, 0, 0]);
        let expected = [
            (2u64, 46.0 / 87.0),
            (4, 914.0 / 3073.0),
            (8, 6690.0 / 42465.0),
        ];
        let mut previous = f64::INFINITY;
        for (n, want) in expected {
            let got = folner_ratio(&h, n, &x).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-14);
            assert!(got < previous, "ratio did not decrease at N = {n}");
            previous = got;
        }
        let z = element(&[0, 0, 1]);
        assert_relative_eq!(
            folner_ratio(&h, 4, &z).unwrap(),
            162.0 / 3073.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn heisenberg_ratios_obey_a_c_over_n_law() {
        let h = heisenberg();
        for n in 1..=10u64 {
            for (name, s) in h.descriptor().generators() {
                let r = folner_ratio(&h, n, &s).unwrap();
                assert!(
                    r * n as f64 <= 2.0,
                    "generator {name} at N = {n} has N·ratio = {}",
                    r * n as f64
                );
            }
        }
    }

    #[test]
    fn sfc_counts_verify_the_cardinality_identity() {
        let cases: Vec<(FolnerFamily, u64, Element)> = vec![
            (nat_lattice(1), 10, element(&[1])),
            (int_lattice(1), 7, element(&[1])),
            (int_lattice(2), 5, element(&[1, 0])),
            (heisenberg(), 3, element(&[1, 0, 0])),
            (heisenberg(), 3, element(&[0, 0, 1])),
        ];
        for (family, n, s) in cases {
            let r = sfc_ratio(&family, n, &s).unwrap();
            assert_eq!(
                r.removed as i64 - r.added as i64,
                r.set_size as i64 - r.translated_size as i64,
                "cardinality identity fails for {s} at N = {n}"
            );
        }

        let nat = sfc_ratio(&nat_lattice(1), 10, &element(&[1])).unwrap();
        assert_eq!(nat.removed, 1);
        assert_eq!(nat.added, 1);
        assert_relative_eq!(nat.strong(), 0.1, max_relative = 1e-15);

        let z = sfc_ratio(&int_lattice(1), 7, &element(&[1])).unwrap();
        assert_relative_eq!(z.strong(), 1.0 / 15.0, max_relative = 1e-15);
        assert_relative_eq!(z.plain(), 1.0 / 15.0, max_relative = 1e-15);

        let idless = sfc_ratio(&heisenberg(), 2, &heisenberg().descriptor().identity()).unwrap();
        assert_eq!(idless.removed, 0);
        assert_eq!(idless.added, 0);
    }

    #[test]
    fn doubling_reports_match_enumeration() {
        let z = doubling_check(&int_lattice(1), 5, 2).unwrap();
        assert!(z.subset_ok);
        assert_relative_eq!(z.ratio(), 21.0 / 11.0, max_relative = 1e-15);
        assert_eq!(z.product_size, 21);

        let h2 = doubling_check(&heisenberg(), 2, 2).unwrap();
        assert!(h2.subset_ok);
        assert_relative_eq!(h2.ratio(), 3073.0 / 261.0, max_relative = 1e-15);
        assert_eq!(h2.product_size, 2057);

        let h3 = doubling_check(&heisenberg(), 2, 3).unwrap();
        assert!(h3.subset_ok);
        assert_relative_eq!(h3.ratio(), 14101.0 / 261.0, max_relative = 1e-15);

        assert!(matches!(
            doubling_check(&int_lattice(1), 4, 0),
            Err(FolnerError::InvalidParameter(_))
        ));
    }

    #[test]
    fn tempelman_ratios_match_enumeration() {
        for n in 1..=8u64 {
            let got = tempelman_ratio(&int_lattice(1), n).unwrap();
            let want = (4 * n + 1) as f64 / (2 * n + 1) as f64;
            assert_relative_eq!(got, want, max_relative = 1e-15);
            assert!(got < 2.0);
        }
        for n in 1..=4u64 {
            assert!(tempelman_ratio(&int_lattice(2), n).unwrap() <= 4.0);
            assert!(tempelman_ratio(&int_lattice(3), n).unwrap() <= 8.0);
        }
        assert_relative_eq!(
            tempelman_ratio(&heisenberg(), 2).unwrap(),
            2057.0 / 261.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn finite_tables_validate_and_measure_trivially() {
        let table = GroupDescriptor::finite_group_table(cyclic_table(3)).unwrap();
        let family = FolnerFamily::new(table);
        assert_eq!(folner_set(&family, 1).unwrap().len(), 3);
        assert_eq!(folner_set(&family, 99).unwrap().len(), 3);
        for (_, s) in family.descriptor().generators() {
            assert_eq!(folner_ratio(&family, 5, &s).unwrap(), 0.0);
        }
        assert_eq!(tempelman_ratio(&family, 1).unwrap(), 1.0);
        let d = doubling_check(&family, 1, 1).unwrap();
        assert!(d.subset_ok);
        assert_eq!(d.ratio(), 1.0);
        assert!(symmetry_check(&family, 1).unwrap());

        let no_identity = GroupDescriptor::finite_group_table(vec![vec![0, 1], vec![0, 0]]);
        assert!(matches!(no_identity, Err(FolnerError::InvalidTable(_))));

        let no_inverse = GroupDescriptor::finite_group_table(vec![vec![0, 1], vec![1, 1]]);
        assert!(matches!(no_inverse, Err(FolnerError::InvalidTable(_))));

        let broken_assoc = GroupDescriptor::finite_group_table(vec![
            vec![0, 1, 2],
            vec![1, 1, 0],
            vec![2, 0, 1],
        ]);
        assert!(matches!(broken_assoc, Err(FolnerError::InvalidTable(_))));

        let large = GroupDescriptor::finite_group_table(cyclic_table(300)).unwrap();
        assert_eq!(large.generators().len(), 299);
    }

    #[test]
    fn semigroup_paths_reject_inverse_operations() {
        let nat = nat_lattice(1);
        assert!(matches!(
            symmetry_check(&nat, 3),
            Err(FolnerError::NotApplicable)
        ));
        assert!(matches!(
            doubling_check(&nat, 3, 2),
            Err(FolnerError::NotApplicable)
        ));
        assert!(matches!(
            tempelman_ratio(&nat, 3),
            Err(FolnerError::NotApplicable)
        ));
        assert!(matches!(
            nat.descriptor().inverse(&element(&[1])),
            Err(FolnerError::NotApplicable)
        ));
    }

    #[test]
    fn domain_violations_are_reported() {
        let nat = nat_lattice(1);
        assert!(matches!(
            folner_ratio(&nat, 3, &element(&[-1])),
            Err(FolnerError::OutOfDomain { .. })
        ));
        assert!(matches!(
            folner_ratio(&int_lattice(2), 3, &element(&[1])),
            Err(FolnerError::OutOfDomain { .. })
        ));
        let table = FolnerFamily::new(GroupDescriptor::finite_group_table(cyclic_table(3)).unwrap());
        assert!(matches!(
            folner_ratio(&table, 1, &element(&[7])),
            Err(FolnerError::OutOfDomain { .. })
        ));
        assert!(matches!(
            GroupDescriptor::int_lattice(5),
            Err(FolnerError::InvalidParameter(_))
        ));
        assert!(matches!(
            folner_set(&int_lattice(1), 0),
            Err(FolnerError::InvalidParameter(_))
        ));
    }

    #[test]
    fn set_cap_guards_large_requests() {
        assert!(matches!(
            folner_set(&int_lattice(3), 200),
            Err(FolnerError::SetTooLarge { .. })
        ));
        assert!(matches!(
            folner_set(&heisenberg(), 100),
            Err(FolnerError::SetTooLarge { .. })
        ));
        assert!(matches!(
            folner_set(&nat_lattice(4), 100),
            Err(FolnerError::SetTooLarge { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn folner_sets_nest_and_stay_sorted(n in 1u64..6) {
            let families = vec![
                int_lattice(1),
                int_lattice(2),
                nat_lattice(1),
                nat_lattice(2),
                heisenberg(),
            ];
            for family in families {
                let small = folner_set(&family, n).unwrap();
                let large = folner_set(&family, n + 1).unwrap();
                prop_assert!(small.windows(2).all(|w| w[0] < w[1]), "set is not strictly sorted");
                let big: HashSet<Element> = large.iter().copied().collect();
                prop_assert!(small.iter().all(|g| big.contains(g)), "sets do not nest");
            }
        }

        #[test]
        fn translation_preserves_cardinality(n in 1u64..8, coord in -3i64..=3) {
            let family = int_lattice(2);
            let s = element(&[coord, 1 - coord.rem_euclid(2)]);
            let r = sfc_ratio(&family, n, &s).unwrap();
            prop_assert_eq!(r.set_size, r.translated_size);
            prop_assert_eq!(r.removed, r.added);
        }

        #[test]
        fn group_ratios_vanish_at_rate_c_over_n(n in 1u64..=32) {
            let family = int_lattice(1);
            let r = folner_ratio(&family, n, &element(&[1])).unwrap();
            prop_assert!((r - 2.0 / (2.0 * n as f64 + 1.0)).abs() < 1e-14);
        }
    }
}
