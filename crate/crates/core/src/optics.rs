//! Apparatus elements: recombining beamsplitters, arm-conditioned weak
//! polarization rotators and the absorptive two-photon switch.

use std::fmt;

use nalgebra::SMatrix;
use serde::Serialize;

use crate::error::{check_range, Error, Result};
use crate::qstate::{
    embed_photon, embed_single_qubit, ket_bra, BasisLabel, ElementOperator, Factor, Matrix16,
    Matrix2, PathLabel, Photon, StageRequirement, C64, ZERO,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Arm {
    Inner,
    Outer,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Inner, Arm::Outer];

    pub(crate) fn bit(self) -> usize {
        match self {
            Arm::Inner => 0,
            Arm::Outer => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Arm::Inner => "I",
            Arm::Outer => "O",
        }
    }

    pub fn path_label(self) -> PathLabel {
        match self {
            Arm::Inner => PathLabel::Inner,
            Arm::Outer => PathLabel::Outer,
        }
    }
}

/// Arm `M` of photon `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ArmId {
    pub photon: Photon,
    pub arm: Arm,
}

impl ArmId {
    pub const fn new(photon: Photon, arm: Arm) -> Self {
        ArmId { photon, arm }
    }

    pub fn all() -> [ArmId; 4] {
        [
            ArmId::new(Photon::E, Arm::Inner),
            ArmId::new(Photon::E, Arm::Outer),
            ArmId::new(Photon::P, Arm::Inner),
            ArmId::new(Photon::P, Arm::Outer),
        ]
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{:?}", self.arm.symbol(), self.photon)
    }
}

/// One arm of each interferometer, as measured in a joint run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ArmPair {
    pub arm_e: Arm,
    pub arm_p: Arm,
}

impl ArmPair {
    pub const fn new(arm_e: Arm, arm_p: Arm) -> Self {
        ArmPair { arm_e, arm_p }
    }

    /// Table order: (I,I), (I,O), (O,I), (O,O).
    pub fn all() -> [ArmPair; 4] {
        [
            ArmPair::new(Arm::Inner, Arm::Inner),
            ArmPair::new(Arm::Inner, Arm::Outer),
            ArmPair::new(Arm::Outer, Arm::Inner),
            ArmPair::new(Arm::Outer, Arm::Outer),
        ]
    }

    pub fn index(self) -> usize {
        2 * self.arm_e.bit() + self.arm_p.bit()
    }

    pub fn arm(self, photon: Photon) -> ArmId {
        match photon {
            Photon::E => ArmId::new(Photon::E, self.arm_e),
            Photon::P => ArmId::new(Photon::P, self.arm_p),
        }
    }

    pub fn swapped(self) -> ArmPair {
        ArmPair::new(self.arm_p, self.arm_e)
    }
}

impl fmt::Display for ArmPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}_E,{}_P)", self.arm_e.symbol(), self.arm_p.symbol())
    }
}

/// Sign of the double-Inner amplitude that survives an imperfect switch.
///
/// The switch cancels the pair amplitude by interference. `InPhase` leaves
/// `+sqrt(1-ε)` (the cancelling amplitude fell short); `Inverted` leaves
/// `-sqrt(1-ε)` (it overshot). Both remove the same probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub enum SwitchResidual {
    InPhase,
    #[default]
    Inverted,
}

impl SwitchResidual {
    pub fn sign(self) -> f64 {
        match self {
            SwitchResidual::InPhase => 1.0,
            SwitchResidual::Inverted => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SwitchResidual::InPhase => "in_phase",
            SwitchResidual::Inverted => "inverted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImperfectionParams {
    /// Probability that the switch removes the double-Inner amplitude.
    pub switch_efficiency: f64,
    /// Interference visibility of the E interferometer.
    pub visibility_e: f64,
    /// Interference visibility of the P interferometer.
    pub visibility_p: f64,
    pub residual: SwitchResidual,
}

impl Default for ImperfectionParams {
    fn default() -> Self {
        ImperfectionParams::ideal()
    }
}

impl ImperfectionParams {
    pub const fn ideal() -> Self {
        ImperfectionParams {
            switch_efficiency: 1.0,
            visibility_e: 1.0,
            visibility_p: 1.0,
            residual: SwitchResidual::Inverted,
        }
    }

    pub fn new(switch_efficiency: f64, visibility_e: f64, visibility_p: f64) -> Result<Self> {
        let imp = ImperfectionParams {
            switch_efficiency,
            visibility_e,
            visibility_p,
            residual: SwitchResidual::default(),
        };
        imp.validate()?;
        Ok(imp)
    }

    /// Switch 85%, E visibility 95%, P visibility 94%.
    pub fn measured_apparatus() -> Self {
        ImperfectionParams::new(0.85, 0.95, 0.94).expect("constants are in range")
    }

    pub fn with_residual(mut self, residual: SwitchResidual) -> Self {
        self.residual = residual;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_range(
            "switch_efficiency",
            self.switch_efficiency,
            0.0,
            1.0,
            "[0, 1]",
        )?;
        check_range("visibility_E", self.visibility_e, 0.0, 1.0, "[0, 1]")?;
        check_range("visibility_P", self.visibility_p, 0.0, 1.0, "[0, 1]")
    }

    pub fn visibility(&self, photon: Photon) -> f64 {
        match photon {
            Photon::E => self.visibility_e,
            Photon::P => self.visibility_p,
        }
    }

    /// Amplitude factor left on the double-Inner component by the switch.
    pub fn residual_amplitude(&self) -> f64 {
        self.residual.sign() * (1.0 - self.switch_efficiency).max(0.0).sqrt()
    }

    pub fn swapped(&self) -> Self {
        ImperfectionParams {
            visibility_e: self.visibility_p,
            visibility_p: self.visibility_e,
            ..*self
        }
    }
}

/// Dark- and bright-port coupling `(r, t)` of a recombiner with the given
/// visibility: `|I⟩ → t|B⟩ + r|D⟩`, `|O⟩ → r|B⟩ − t|D⟩`, with `2rt = v`.
/// For `v = 1` both are `1/√2`.
pub fn recombiner_couplings(visibility: f64) -> (f64, f64) {
    let imbalance = (1.0 - visibility * visibility).max(0.0).sqrt();
    let r = ((1.0 + imbalance) / 2.0).sqrt();
    let t = ((1.0 - imbalance) / 2.0).sqrt();
    (r, t)
}

/// 2×2 path-qubit map from (I, O) to (D, B).
pub fn recombiner_matrix(visibility: f64) -> Matrix2 {
    let (r, t) = recombiner_couplings(visibility);
    Matrix2::new(
        C64::new(r, 0.0),
        C64::new(-t, 0.0),
        C64::new(t, 0.0),
        C64::new(r, 0.0),
    )
}

/// The final 50:50 beamsplitter of one photon's interferometer.
///
/// For `visibility < 1` the splitting ratio is unbalanced so that a photon
/// entering an empty interferometer leaks to the dark port with probability
/// `(1 - v)/2`. Applying it marks that photon as recombined; a second
/// application to the same photon fails in [`crate::qstate::apply`].
pub fn final_beamsplitter(photon: Photon, visibility: f64) -> Result<ElementOperator> {
    check_range("visibility", visibility, 0.0, 1.0, "[0, 1]")?;
    Ok(
        embed_single_qubit(&recombiner_matrix(visibility), Factor::path(photon))
            .into_recombiner(photon),
    )
}

/// `exp(-i g N(arm) σ_y)` on the arm's photon: rotates the linear
/// polarization by `g` on the component occupying `arm`.
pub fn weak_rotator(arm: ArmId, g: f64) -> Result<ElementOperator> {
    check_range(
        "g",
        g,
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        "|g| <= pi/2",
    )?;
    let (s, c) = g.sin_cos();
    let rot = Matrix2::new(
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    );
    let occupied = ket_bra(arm.arm.bit());
    let empty = ket_bra(1 - arm.arm.bit());
    let local: SMatrix<C64, 4, 4> =
        empty.kronecker(&Matrix2::identity()) + occupied.kronecker(&rot);
    Ok(embed_photon(&local, arm.photon).with_requirement(StageRequirement::Pre))
}

/// Scales every `|I_E I_P⟩` amplitude by the switch residual. Never increases
/// any amplitude's magnitude.
pub fn two_photon_absorber(imp: &ImperfectionParams) -> Result<ElementOperator> {
    imp.validate()?;
    let factor = C64::new(imp.residual_amplitude(), 0.0);
    let mut m = Matrix16::identity();
    for label in BasisLabel::all(false) {
        if label.path_e == PathLabel::Inner && label.path_p == PathLabel::Inner {
            m[(label.index(), label.index())] = factor;
        }
    }
    Ok(ElementOperator::new(m).with_requirement(StageRequirement::Pre))
}

/// Polarization-dependent loss on one photon: `V` amplitude scaled by
/// `sqrt(vertical_transmission)`.
pub fn polarization_loss(photon: Photon, vertical_transmission: f64) -> Result<ElementOperator> {
    check_range(
        "vertical_transmission",
        vertical_transmission,
        0.0,
        1.0,
        "[0, 1]",
    )?;
    let m = Matrix2::new(
        C64::new(1.0, 0.0),
        ZERO,
        ZERO,
        C64::new(vertical_transmission.sqrt(), 0.0),
    );
    Ok(embed_single_qubit(&m, Factor::pol(photon)))
}

pub(crate) fn require_nonzero(value: f64, what: &'static str) -> Result<f64> {
    if value == 0.0 {
        Err(Error::ZeroDenominator(what))
    } else {
        Ok(value)
    }
}
