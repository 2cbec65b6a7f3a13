//! Pointer-based weak measurement.
//!
//! Rotators in the selected arms couple each photon's path to its own
//! polarization. After the dark-dark post-selection the polarizations are
//! read out in the diagonal (σx) and circular (σy) bases, and the occupation
//! weak values are recovered from the leading-order pointer shifts:
//!
//! ```text
//! N(M_K)_W         ≈ <σx_K> / (2 g_K)
//! N(M_E)N(M_P)_W   ≈ (<σx σx> - <σy σy>) / (4 g_E g_P)
//! ```
//!
//! i.e. `g⁻¹ Re<σ⁻>` with `σ⁻ = (σx - iσy)/2`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::hardy::{dark_postselection, preselected_state, recombine, Occupation};
use crate::optics::{
    final_beamsplitter, polarization_loss, require_nonzero, weak_rotator, Arm, ArmId, ArmPair,
    ImperfectionParams,
};
use crate::qstate::{
    apply, conditional_expectation, embed_single_qubit, ket_bra, sigma_x, sigma_z, BasisLabel,
    ElementOperator, Factor, Matrix2, Photon, Polarization, StateVector, Vector16, C64,
    EMPTY_SUBENSEMBLE_FLOOR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AnalyzerBasis {
    /// ±45° linear (σx eigenstates).
    Diag,
    /// Right/left circular (σy eigenstates).
    Circ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

/// Analyzer ket for one photon.
fn analyzer_ket(basis: AnalyzerBasis, outcome: Outcome) -> [C64; 2] {
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    let b = match basis {
        AnalyzerBasis::Diag => C64::new(outcome.sign() * FRAC_1_SQRT_2, 0.0),
        AnalyzerBasis::Circ => C64::new(0.0, outcome.sign() * FRAC_1_SQRT_2),
    };
    [a, b]
}

fn analyzer_name(basis: AnalyzerBasis, outcome: Outcome) -> &'static str {
    match (basis, outcome) {
        (AnalyzerBasis::Diag, Outcome::Plus) => "p45",
        (AnalyzerBasis::Diag, Outcome::Minus) => "m45",
        (AnalyzerBasis::Circ, Outcome::Plus) => "rcp",
        (AnalyzerBasis::Circ, Outcome::Minus) => "lcp",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AnalyzerSetting {
    pub basis_e: AnalyzerBasis,
    pub outcome_e: Outcome,
    pub basis_p: AnalyzerBasis,
    pub outcome_p: Outcome,
}

const BASES: [AnalyzerBasis; 2] = [AnalyzerBasis::Diag, AnalyzerBasis::Circ];
const OUTCOMES: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

impl AnalyzerSetting {
    pub const COUNT: usize = 16;

    pub fn same_basis(basis: AnalyzerBasis, outcome_e: Outcome, outcome_p: Outcome) -> Self {
        AnalyzerSetting {
            basis_e: basis,
            outcome_e,
            basis_p: basis,
            outcome_p,
        }
    }

    /// All sixteen combinations in index order.
    pub fn all() -> impl Iterator<Item = AnalyzerSetting> {
        BASES.into_iter().flat_map(|be| {
            OUTCOMES.into_iter().flat_map(move |oe| {
                BASES.into_iter().flat_map(move |bp| {
                    OUTCOMES.into_iter().map(move |op| AnalyzerSetting {
                        basis_e: be,
                        outcome_e: oe,
                        basis_p: bp,
                        outcome_p: op,
                    })
                })
            })
        })
    }

    /// The eight settings used by the correlator formula.
    pub fn coincidence_settings() -> impl Iterator<Item = AnalyzerSetting> {
        AnalyzerSetting::all().filter(|s| s.basis_e == s.basis_p)
    }

    pub fn index(&self) -> usize {
        let b = |x: AnalyzerBasis| (x == AnalyzerBasis::Circ) as usize;
        let o = |x: Outcome| (x == Outcome::Minus) as usize;
        (b(self.basis_e) << 3)
            | (o(self.outcome_e) << 2)
            | (b(self.basis_p) << 1)
            | o(self.outcome_p)
    }

    /// Projector onto this analyzer outcome for both photons, with the
    /// path qubits left alone.
    fn projector(&self) -> ElementOperator {
        let proj = |basis, outcome| {
            let k = analyzer_ket(basis, outcome);
            Matrix2::new(
                k[0] * k[0].conj(),
                k[0] * k[1].conj(),
                k[1] * k[0].conj(),
                k[1] * k[1].conj(),
            )
        };
        let pe = embed_single_qubit(&proj(self.basis_e, self.outcome_e), Factor::PolE);
        let pp = embed_single_qubit(&proj(self.basis_p, self.outcome_p), Factor::PolP);
        pe.compose(&pp).expect("plain projectors compose")
    }
}

impl fmt::Display for AnalyzerSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}",
            analyzer_name(self.basis_e, self.outcome_e),
            analyzer_name(self.basis_p, self.outcome_p)
        )
    }
}

/// Coincidence probability per produced pair for every analyzer setting,
/// already including the dark-dark post-selection.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyzerDistribution {
    probabilities: [f64; AnalyzerSetting::COUNT],
    pub g_e: f64,
    pub g_p: f64,
    pub arms: Occupation,
    /// Probability of a dark-dark coincidence, any polarization.
    pub dark_probability: f64,
}

impl AnalyzerDistribution {
    pub fn probability(&self, setting: AnalyzerSetting) -> f64 {
        self.probabilities[setting.index()]
    }

    pub fn probabilities(&self) -> &[f64; AnalyzerSetting::COUNT] {
        &self.probabilities
    }
}

/// Evolves the pair through switch, rotators, recombiners and the dark-dark
/// projector, then reads out every analyzer setting. Only photons with an arm
/// in `arms` get a rotator; the other `g` is ignored.
pub fn run_pointer_protocol(
    arms: &Occupation,
    g_e: f64,
    g_p: f64,
    imp: &ImperfectionParams,
) -> Result<AnalyzerDistribution> {
    let mut state = preselected_state(imp)?;
    for arm in arms.arms() {
        let g = match arm.photon {
            Photon::E => g_e,
            Photon::P => g_p,
        };
        check_range("g", g, 0.0, std::f64::consts::FRAC_PI_2, "[0, pi/2]")?;
        state = apply(&weak_rotator(arm, g)?, &state)?;
    }
    let post = recombine(&state, imp)?;
    let selected = apply(&dark_postselection(), &post)?;
    let dark_probability = selected.squared_norm();
    if dark_probability <= EMPTY_SUBENSEMBLE_FLOOR * state.squared_norm() {
        return Err(Error::EmptySubensemble);
    }
    let mut probabilities = [0.0; AnalyzerSetting::COUNT];
    for setting in AnalyzerSetting::all() {
        let v: Vector16 = setting.projector().matrix() * selected.vector();
        probabilities[setting.index()] = v.norm_squared();
    }
    Ok(AnalyzerDistribution {
        probabilities,
        g_e,
        g_p,
        arms: *arms,
        dark_probability,
    })
}

/// Pauli expectation values in the post-selected subensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PauliCorrelators {
    pub xx: f64,
    pub yy: f64,
    pub x_e: f64,
    pub y_e: f64,
    pub x_p: f64,
    pub y_p: f64,
}

impl PauliCorrelators {
    /// Forms the correlators from any non-negative rates (probabilities or
    /// counts) over the eight same-basis settings.
    pub fn from_rates<F>(rate: F) -> Result<Self>
    where
        F: Fn(AnalyzerSetting) -> f64,
    {
        let basis = |b| -> Result<(f64, f64, f64)> {
            let r = |oe, op| rate(AnalyzerSetting::same_basis(b, oe, op));
            let (pp, pm) = (
                r(Outcome::Plus, Outcome::Plus),
                r(Outcome::Plus, Outcome::Minus),
            );
            let (mp, mm) = (
                r(Outcome::Minus, Outcome::Plus),
                r(Outcome::Minus, Outcome::Minus),
            );
            let total = require_nonzero(pp + pm + mp + mm, "correlator normalization")?;
            let corr = (pp + mm - pm - mp) / total;
            let single_e = (pp + pm - mp - mm) / total;
            let single_p = (pp + mp - pm - mm) / total;
            Ok((corr, single_e, single_p))
        };
        let (xx, x_e, x_p) = basis(AnalyzerBasis::Diag)?;
        let (yy, y_e, y_p) = basis(AnalyzerBasis::Circ)?;
        let out = PauliCorrelators {
            xx,
            yy,
            x_e,
            y_e,
            x_p,
            y_p,
        };
        if [xx, yy, x_e, y_e, x_p, y_p].iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFinite("correlators"))
        }
    }

    pub fn x(&self, photon: Photon) -> f64 {
        match photon {
            Photon::E => self.x_e,
            Photon::P => self.x_p,
        }
    }

    pub fn y(&self, photon: Photon) -> f64 {
        match photon {
            Photon::E => self.y_e,
            Photon::P => self.y_p,
        }
    }
}

pub fn correlators(dist: &AnalyzerDistribution) -> Result<PauliCorrelators> {
    PauliCorrelators::from_rates(|s| dist.probability(s))
}

fn positive_g(name: &'static str, g: f64) -> Result<f64> {
    if g.is_finite() && g > 0.0 {
        Ok(g)
    } else {
        Err(Error::OutOfRange {
            name,
            value: g,
            expected: "g > 0",
        })
    }
}

/// Joint occupation weak value, `(xx - yy) / (4 g_E g_P)`.
pub fn extract_joint_weak(corr: &PauliCorrelators, g_e: f64, g_p: f64) -> Result<f64> {
    let g_e = positive_g("g_E", g_e)?;
    let g_p = positive_g("g_P", g_p)?;
    Ok((corr.xx - corr.yy) / (4.0 * g_e * g_p))
}

/// Single occupation weak value of photon `photon`, `x_K / (2 g)`.
pub fn extract_single_weak(corr: &PauliCorrelators, photon: Photon, g: f64) -> Result<f64> {
    let g = positive_g("g", g)?;
    Ok(corr.x(photon) / (2.0 * g))
}

/// Imaginary part of the single weak value, `y_K / (2 g)`.
pub fn extract_single_weak_imag(corr: &PauliCorrelators, photon: Photon, g: f64) -> Result<f64> {
    let g = positive_g("g", g)?;
    Ok(corr.y(photon) / (2.0 * g))
}

/// Joint value and both marginal singles from one joint run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairExtraction {
    pub joint: f64,
    pub single_e: f64,
    pub single_p: f64,
}

impl PairExtraction {
    pub fn from_correlators(corr: &PauliCorrelators, g_e: f64, g_p: f64) -> Result<Self> {
        Ok(PairExtraction {
            joint: extract_joint_weak(corr, g_e, g_p)?,
            single_e: extract_single_weak(corr, Photon::E, g_e)?,
            single_p: extract_single_weak(corr, Photon::P, g_p)?,
        })
    }
}

/// Noiseless pointer measurement of one arm pair.
pub fn extract_pair(
    pair: ArmPair,
    g_e: f64,
    g_p: f64,
    imp: &ImperfectionParams,
) -> Result<PairExtraction> {
    let dist = run_pointer_protocol(&Occupation::joint(pair), g_e, g_p, imp)?;
    PairExtraction::from_correlators(&correlators(&dist)?, g_e, g_p)
}

/// Effective coupling of the waveplate in `arm`, found by sending the
/// measured photon through that arm only and reading the rotation of its
/// polarization at the dark port. The other photon sits in the arm away from
/// the switch and is not post-selected.
pub fn calibrate_g(arm: ArmId, waveplate_angle: f64, imp: &ImperfectionParams) -> Result<f64> {
    calibrate_g_with_loss(arm, waveplate_angle, imp, 1.0)
}

/// [`calibrate_g`] with an extra polarization-dependent loss (intensity
/// transmission of V) on the measured photon after the waveplate.
pub fn calibrate_g_with_loss(
    arm: ArmId,
    waveplate_angle: f64,
    imp: &ImperfectionParams,
    vertical_transmission: f64,
) -> Result<f64> {
    Ok(calibration_run(arm, waveplate_angle, imp, vertical_transmission)?.g)
}

/// Readout of a calibration run: the polarization expectations of the
/// measured photon at its dark port and the rotation angle they imply.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationRun {
    pub x: f64,
    pub z: f64,
    pub g: f64,
}

pub fn calibration_run(
    arm: ArmId,
    waveplate_angle: f64,
    imp: &ImperfectionParams,
    vertical_transmission: f64,
) -> Result<CalibrationRun> {
    check_range(
        "waveplate_angle",
        waveplate_angle,
        f64::MIN_POSITIVE,
        std::f64::consts::FRAC_PI_2,
        "(0, pi/2]",
    )?;
    imp.validate()?;
    let photon = arm.photon;
    let spectator = ArmId::new(photon.other(), Arm::Outer);
    let h = Polarization::H;
    let path = |k: Photon| {
        if k == photon {
            arm.arm.path_label()
        } else {
            spectator.arm.path_label()
        }
    };
    let start = StateVector::basis(BasisLabel::new(path(Photon::E), h, path(Photon::P), h)?);

    let mut s = apply(&weak_rotator(arm, waveplate_angle)?, &start)?;
    s = apply(&polarization_loss(photon, vertical_transmission)?, &s)?;
    s = apply(&final_beamsplitter(Photon::E, imp.visibility_e)?, &s)?;
    s = apply(&final_beamsplitter(Photon::P, imp.visibility_p)?, &s)?;

    let dark = embed_single_qubit(&ket_bra(0), Factor::path(photon));
    let sx = embed_single_qubit(&sigma_x(), Factor::pol(photon));
    let sz = embed_single_qubit(&sigma_z(), Factor::pol(photon));
    let expect = |op: &ElementOperator| match conditional_expectation(op, &s, &dark) {
        Err(Error::EmptySubensemble) => Err(Error::DegenerateCalibration),
        other => other,
    };
    let (x, z) = (expect(&sx)?, expect(&sz)?);
    if x == 0.0 && z == 0.0 {
        return Err(Error::DegenerateCalibration);
    }
    Ok(CalibrationRun {
        x,
        z,
        g: x.atan2(z) / 2.0,
    })
}
