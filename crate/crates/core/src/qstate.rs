//! Two-photon state vectors and operators.
//!
//! Each photon carries a path qubit and a polarization qubit, giving a
//! 16-dimensional space ordered as `(path_E, pol_E, path_P, pol_P)` with
//! `path_E` as the most significant bit. Before the final beamsplitters the
//! path qubit is labelled Inner/Outer, afterwards Dark/Bright; in both
//! alphabets the first symbol is bit 0.
//!
//! States are kept unnormalized: the squared norm is the probability that the
//! pair survived everything applied so far.

use nalgebra::{Complex, SMatrix, SVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Matrix2 = SMatrix<C64, 2, 2>;
pub type Matrix16 = SMatrix<C64, 16, 16>;
pub type Vector16 = SVector<C64, 16>;

pub const DIM: usize = 16;

/// Tolerance used when validating operator flags.
pub const FLAG_TOL: f64 = 1e-10;

/// Post-selection probabilities at or below this fraction of the incoming
/// squared norm are treated as an empty subensemble.
pub const EMPTY_SUBENSEMBLE_FLOOR: f64 = 1e-24;

pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Photon {
    E,
    P,
}

impl Photon {
    pub const BOTH: [Photon; 2] = [Photon::E, Photon::P];

    pub fn other(self) -> Photon {
        match self {
            Photon::E => Photon::P,
            Photon::P => Photon::E,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PathLabel {
    Inner,
    Outer,
    Dark,
    Bright,
}

impl PathLabel {
    fn bit(self) -> usize {
        match self {
            PathLabel::Inner | PathLabel::Dark => 0,
            PathLabel::Outer | PathLabel::Bright => 1,
        }
    }

    fn is_recombined(self) -> bool {
        matches!(self, PathLabel::Dark | PathLabel::Bright)
    }

    fn from_bit(bit: usize, recombined: bool) -> Self {
        match (bit, recombined) {
            (0, false) => PathLabel::Inner,
            (_, false) => PathLabel::Outer,
            (0, true) => PathLabel::Dark,
            (_, true) => PathLabel::Bright,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            PathLabel::Inner => 'I',
            PathLabel::Outer => 'O',
            PathLabel::Dark => 'D',
            PathLabel::Bright => 'B',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    fn bit(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }
}

/// One of the 16 product basis states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BasisLabel {
    pub path_e: PathLabel,
    pub pol_e: Polarization,
    pub path_p: PathLabel,
    pub pol_p: Polarization,
}

impl BasisLabel {
    /// Both photons' path labels must come from the same alphabet.
    pub fn new(
        path_e: PathLabel,
        pol_e: Polarization,
        path_p: PathLabel,
        pol_p: Polarization,
    ) -> Result<Self> {
        if path_e.is_recombined() != path_p.is_recombined() {
            return Err(Error::MixedAlphabet);
        }
        Ok(BasisLabel {
            path_e,
            pol_e,
            path_p,
            pol_p,
        })
    }

    pub fn index(&self) -> usize {
        (self.path_e.bit() << 3)
            | (self.pol_e.bit() << 2)
            | (self.path_p.bit() << 1)
            | self.pol_p.bit()
    }

    fn from_index(index: usize, recombined: bool) -> Self {
        BasisLabel {
            path_e: PathLabel::from_bit((index >> 3) & 1, recombined),
            pol_e: Polarization::from_bit((index >> 2) & 1),
            path_p: PathLabel::from_bit((index >> 1) & 1, recombined),
            pol_p: Polarization::from_bit(index & 1),
        }
    }

    /// The full basis for one alphabet, in storage order.
    pub fn all(recombined: bool) -> impl Iterator<Item = BasisLabel> {
        (0..DIM).map(move |i| BasisLabel::from_index(i, recombined))
    }

    fn is_recombined(&self) -> bool {
        self.path_e.is_recombined()
    }
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{:?},{}{:?}",
            self.path_e.symbol(),
            self.pol_e,
            self.path_p.symbol(),
            self.pol_p
        )
    }
}

/// Where the state sits relative to the final beamsplitters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Stage {
    PreRecombination,
    /// Only the given photon has passed its recombiner.
    Partial(Photon),
    PostRecombination,
}

impl Stage {
    fn is_recombined(self, photon: Photon) -> bool {
        match self {
            Stage::PreRecombination => false,
            Stage::Partial(p) => p == photon,
            Stage::PostRecombination => true,
        }
    }

    fn after_recombining(self, photon: Photon) -> Result<Stage> {
        if self.is_recombined(photon) {
            return Err(Error::AlreadyRecombined(photon));
        }
        Ok(match self {
            Stage::PreRecombination => Stage::Partial(photon),
            _ => Stage::PostRecombination,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    stage: Stage,
    amplitudes: Vector16,
}

impl StateVector {
    pub fn zero(stage: Stage) -> Self {
        StateVector {
            stage,
            amplitudes: Vector16::zeros(),
        }
    }

    pub fn from_vector(stage: Stage, amplitudes: Vector16) -> Self {
        StateVector { stage, amplitudes }
    }

    /// Builds a pre- or post-recombination state from labelled amplitudes.
    /// Repeated labels accumulate.
    pub fn from_terms<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisLabel, C64)>,
    {
        let mut stage = None;
        let mut amplitudes = Vector16::zeros();
        for (label, amp) in terms {
            let s = if label.is_recombined() {
                Stage::PostRecombination
            } else {
                Stage::PreRecombination
            };
            match stage {
                None => stage = Some(s),
                Some(prev) if prev != s => return Err(Error::MixedAlphabet),
                _ => {}
            }
            amplitudes[label.index()] += amp;
        }
        Ok(StateVector {
            stage: stage.unwrap_or(Stage::PreRecombination),
            amplitudes,
        })
    }

    pub fn basis(label: BasisLabel) -> Self {
        StateVector::from_terms([(label, ONE)]).expect("single label is consistent")
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn vector(&self) -> &Vector16 {
        &self.amplitudes
    }

    pub fn amplitude_at(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn amplitude(&self, label: &BasisLabel) -> Result<C64> {
        let expected = if label.is_recombined() {
            Stage::PostRecombination
        } else {
            Stage::PreRecombination
        };
        if self.stage != expected {
            return Err(Error::StageMismatch {
                expected,
                found: self.stage,
            });
        }
        Ok(self.amplitudes[label.index()])
    }

    pub fn squared_norm(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        StateVector {
            stage: self.stage,
            amplitudes: self.amplitudes * factor,
        }
    }

    /// Labelled amplitudes in fixed basis order. Partially recombined states
    /// have no single-alphabet labels and yield nothing.
    pub fn terms(&self) -> Vec<(BasisLabel, C64)> {
        let recombined = match self.stage {
            Stage::PreRecombination => false,
            Stage::PostRecombination => true,
            Stage::Partial(_) => return Vec::new(),
        };
        BasisLabel::all(recombined)
            .map(|l| (l, self.amplitudes[l.index()]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    Unitary,
    Contraction,
    Projector,
    /// Neither of the above (e.g. a scaled observable).
    General,
}

/// Which stage an operator may act on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageRequirement {
    Any,
    Pre,
    Post,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementOperator {
    matrix: Matrix16,
    kind: OperatorKind,
    requires: StageRequirement,
    recombines: Option<Photon>,
}

/// Single-qubit factor that an embedded 2×2 operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    PathE,
    PolE,
    PathP,
    PolP,
}

impl Factor {
    fn shift(self) -> usize {
        match self {
            Factor::PathE => 3,
            Factor::PolE => 2,
            Factor::PathP => 1,
            Factor::PolP => 0,
        }
    }

    pub fn path(photon: Photon) -> Self {
        match photon {
            Photon::E => Factor::PathE,
            Photon::P => Factor::PathP,
        }
    }

    pub fn pol(photon: Photon) -> Self {
        match photon {
            Photon::E => Factor::PolE,
            Photon::P => Factor::PolP,
        }
    }
}

pub fn identity2() -> Matrix2 {
    Matrix2::identity()
}

pub fn sigma_x() -> Matrix2 {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Matrix2 {
    let i = C64::new(0.0, 1.0);
    Matrix2::new(ZERO, -i, i, ZERO)
}

pub fn sigma_z() -> Matrix2 {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// |k⟩⟨k| on a single qubit.
pub fn ket_bra(k: usize) -> Matrix2 {
    let mut m = Matrix2::zeros();
    m[(k, k)] = ONE;
    m
}

fn max_abs(m: &Matrix16) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn is_unitary(m: &Matrix16, tol: f64) -> bool {
    max_abs(&(m.adjoint() * m - Matrix16::identity())) < tol
}

fn is_hermitian(m: &Matrix16, tol: f64) -> bool {
    max_abs(&(m.adjoint() - m)) < tol
}

fn is_projector(m: &Matrix16, tol: f64) -> bool {
    is_hermitian(m, tol) && max_abs(&(m * m - m)) < tol
}

fn largest_singular_value(m: &Matrix16) -> f64 {
    m.singular_values().max()
}

fn infer_kind(m: &Matrix16) -> OperatorKind {
    if is_unitary(m, FLAG_TOL) {
        OperatorKind::Unitary
    } else if is_projector(m, FLAG_TOL) {
        OperatorKind::Projector
    } else if largest_singular_value(m) <= 1.0 + FLAG_TOL {
        OperatorKind::Contraction
    } else {
        OperatorKind::General
    }
}

impl ElementOperator {
    /// Wraps a matrix, inferring its kind.
    pub fn new(matrix: Matrix16) -> Self {
        ElementOperator {
            kind: infer_kind(&matrix),
            matrix,
            requires: StageRequirement::Any,
            recombines: None,
        }
    }

    pub fn identity() -> Self {
        ElementOperator::new(Matrix16::identity())
    }

    pub(crate) fn with_requirement(mut self, requires: StageRequirement) -> Self {
        self.requires = requires;
        self
    }

    pub(crate) fn into_recombiner(mut self, photon: Photon) -> Self {
        self.recombines = Some(photon);
        self.requires = StageRequirement::Any;
        self
    }

    pub fn matrix(&self) -> &Matrix16 {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn requirement(&self) -> StageRequirement {
        self.requires
    }

    pub fn recombines(&self) -> Option<Photon> {
        self.recombines
    }

    pub fn is_projector(&self) -> bool {
        is_projector(&self.matrix, FLAG_TOL)
    }

    pub fn is_hermitian(&self) -> bool {
        is_hermitian(&self.matrix, FLAG_TOL)
    }

    pub fn is_unitary(&self) -> bool {
        is_unitary(&self.matrix, FLAG_TOL)
    }

    pub fn largest_singular_value(&self) -> f64 {
        largest_singular_value(&self.matrix)
    }

    /// `self · other`. Recombiners carry stage transitions and are applied
    /// individually instead.
    pub fn compose(&self, other: &ElementOperator) -> Result<ElementOperator> {
        if self.recombines.is_some() || other.recombines.is_some() {
            return Err(Error::ComposeRecombiner);
        }
        let requires = match (self.requires, other.requires) {
            (StageRequirement::Any, r) | (r, StageRequirement::Any) => r,
            (a, b) if a == b => a,
            (a, _) => a,
        };
        Ok(ElementOperator::new(self.matrix * other.matrix).with_requirement(requires))
    }
}

/// Lifts a 4×4 operator on one photon's (path, pol) pair onto the full space.
pub fn embed_photon(op: &SMatrix<C64, 4, 4>, photon: Photon) -> ElementOperator {
    let id4 = SMatrix::<C64, 4, 4>::identity();
    let m = match photon {
        Photon::E => op.kronecker(&id4),
        Photon::P => id4.kronecker(op),
    };
    ElementOperator::new(m)
}

/// Lifts a 2×2 operator onto one factor of the 16-dimensional space,
/// identity on the other three.
pub fn embed_single_qubit(op: &Matrix2, target: Factor) -> ElementOperator {
    let shift = target.shift();
    let mut m = Matrix16::zeros();
    for row in 0..DIM {
        for col in 0..DIM {
            // all other bits must agree
            if (row ^ col) & !(1 << shift) != 0 {
                continue;
            }
            m[(row, col)] = op[((row >> shift) & 1, (col >> shift) & 1)];
        }
    }
    ElementOperator::new(m)
}

pub fn apply(op: &ElementOperator, s: &StateVector) -> Result<StateVector> {
    match (op.requires, s.stage) {
        (StageRequirement::Pre, found) if found != Stage::PreRecombination => {
            return Err(Error::StageMismatch {
                expected: Stage::PreRecombination,
                found,
            })
        }
        (StageRequirement::Post, found) if found != Stage::PostRecombination => {
            return Err(Error::StageMismatch {
                expected: Stage::PostRecombination,
                found,
            })
        }
        _ => {}
    }
    let stage = match op.recombines {
        Some(photon) => s.stage.after_recombining(photon)?,
        None => s.stage,
    };
    Ok(StateVector {
        stage,
        amplitudes: op.matrix * s.amplitudes,
    })
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.stage != b.stage {
        return Err(Error::StageMismatch {
            expected: a.stage,
            found: b.stage,
        });
    }
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

/// Expectation of a Hermitian `op` over the subensemble selected by `proj`:
/// ⟨s|P·op·P|s⟩ / ⟨s|P|s⟩.
pub fn conditional_expectation(
    op: &ElementOperator,
    s: &StateVector,
    proj: &ElementOperator,
) -> Result<f64> {
    if !proj.is_projector() {
        return Err(Error::NotProjector);
    }
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let selected = proj.matrix * s.amplitudes;
    let prob = selected.norm_squared();
    let norm = s.squared_norm();
    if norm == 0.0 || prob <= EMPTY_SUBENSEMBLE_FLOOR * norm {
        return Err(Error::EmptySubensemble);
    }
    let num = selected.dotc(&(op.matrix * selected));
    Ok(num.re / prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &Matrix16, b: &Matrix16, tol: f64) -> bool {
        max_abs(&(a - b)) < tol
    }

    fn equal_path_superposition() -> StateVector {
        let h = Polarization::H;
        let terms = [PathLabel::Inner, PathLabel::Outer]
            .into_iter()
            .flat_map(|pe| {
                [PathLabel::Inner, PathLabel::Outer]
                    .into_iter()
                    .map(move |pp| (BasisLabel::new(pe, h, pp, h).unwrap(), C64::new(0.5, 0.0)))
            });
        StateVector::from_terms(terms).unwrap()
    }

    #[test]
    fn basis_has_sixteen_distinct_labels() {
        let labels: std::collections::BTreeSet<_> = BasisLabel::all(false).collect();
        assert_eq!(labels.len(), 16);
        let idx: Vec<_> = BasisLabel::all(true).map(|l| l.index()).collect();
        assert_eq!(idx, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn mixed_alphabet_rejected() {
        let r = BasisLabel::new(
            PathLabel::Inner,
            Polarization::H,
            PathLabel::Dark,
            Polarization::H,
        );
        assert_eq!(r, Err(Error::MixedAlphabet));
    }

    #[test]
    fn embedded_identity_is_identity() {
        for f in [Factor::PathE, Factor::PolE, Factor::PathP, Factor::PolP] {
            let op = embed_single_qubit(&identity2(), f);
            assert_eq!(op.matrix(), &Matrix16::identity());
            assert_eq!(op.kind(), OperatorKind::Unitary);
        }
    }

    #[test]
    fn sigma_x_is_an_involution() {
        let x = embed_single_qubit(&sigma_x(), Factor::PolE);
        let xx = x.compose(&x).unwrap();
        assert!(approx_eq(xx.matrix(), &Matrix16::identity(), 1e-12));
    }

    #[test]
    fn sigma_y_on_different_photons_commute() {
        let ye = embed_single_qubit(&sigma_y(), Factor::PolE);
        let yp = embed_single_qubit(&sigma_y(), Factor::PolP);
        let a = ye.compose(&yp).unwrap();
        let b = yp.compose(&ye).unwrap();
        assert!(approx_eq(a.matrix(), b.matrix(), 1e-12));
        // brute force: the product is the Kronecker product I⊗σy⊗I⊗σy
        let kron = identity2()
            .kronecker(&sigma_y())
            .kronecker(&identity2())
            .kronecker(&sigma_y());
        assert!(approx_eq(a.matrix(), &kron, 1e-12));
    }

    #[test]
    fn kind_inference() {
        assert_eq!(
            embed_single_qubit(&ket_bra(0), Factor::PathE).kind(),
            OperatorKind::Projector
        );
        let half = Matrix2::new(ONE * 0.5, ZERO, ZERO, ONE);
        assert_eq!(
            embed_single_qubit(&half, Factor::PathE).kind(),
            OperatorKind::Contraction
        );
        let big = Matrix2::new(ONE * 2.0, ZERO, ZERO, ONE);
        assert_eq!(
            embed_single_qubit(&big, Factor::PathE).kind(),
            OperatorKind::General
        );
    }

    #[test]
    fn identity_apply_is_exact() {
        let s = equal_path_superposition();
        let out = apply(&ElementOperator::identity(), &s).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn absorber_on_equal_superposition_leaves_three_quarters() {
        // damp the |I_E I_P> block completely
        let mut m = Matrix16::identity();
        for l in BasisLabel::all(false) {
            if l.path_e == PathLabel::Inner && l.path_p == PathLabel::Inner {
                m[(l.index(), l.index())] = ZERO;
            }
        }
        let op = ElementOperator::new(m);
        assert_eq!(op.kind(), OperatorKind::Projector);
        let out = apply(&op, &equal_path_superposition()).unwrap();
        assert!((out.squared_norm() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn inner_product_basics() {
        let s = equal_path_superposition();
        let n = inner_product(&s, &s).unwrap();
        assert!((n.re - s.squared_norm()).abs() < 1e-15 && n.im == 0.0);
        let a = StateVector::basis(BasisLabel::all(false).next().unwrap());
        let b = StateVector::basis(BasisLabel::all(false).nth(5).unwrap());
        assert_eq!(inner_product(&a, &b).unwrap(), ZERO);
        let post = StateVector::basis(BasisLabel::all(true).next().unwrap());
        assert!(matches!(
            inner_product(&a, &post),
            Err(Error::StageMismatch { .. })
        ));
    }

    #[test]
    fn conditional_expectation_identity_and_symmetry() {
        let s = equal_path_superposition();
        let proj = embed_single_qubit(&ket_bra(0), Factor::PathE);
        let e = conditional_expectation(&ElementOperator::identity(), &s, &proj).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        let x = embed_single_qubit(&sigma_x(), Factor::PolE);
        let e = conditional_expectation(&x, &s, &ElementOperator::identity()).unwrap();
        assert!(e.abs() < 1e-15);
    }

    #[test]
    fn conditional_expectation_errors() {
        let s = StateVector::basis(BasisLabel::all(false).next().unwrap());
        // path_E = O projector selects nothing from |I_E ...>
        let proj = embed_single_qubit(&ket_bra(1), Factor::PathE);
        assert_eq!(
            conditional_expectation(&ElementOperator::identity(), &s, &proj),
            Err(Error::EmptySubensemble)
        );
        let not_proj = embed_single_qubit(&sigma_x(), Factor::PathE);
        assert_eq!(
            conditional_expectation(&ElementOperator::identity(), &s, &not_proj),
            Err(Error::NotProjector)
        );
        let lowering = Matrix2::new(ZERO, ZERO, ONE, ZERO);
        let op = embed_single_qubit(&lowering, Factor::PolE);
        assert_eq!(
            conditional_expectation(&op, &s, &ElementOperator::identity()),
            Err(Error::NotHermitian)
        );
    }

    #[test]
    fn partial_state_has_no_labels() {
        let s = StateVector::zero(Stage::Partial(Photon::E));
        assert!(s.terms().is_empty());
        assert!(StateVector::zero(Stage::PostRecombination).terms().len() == 16);
    }
}
