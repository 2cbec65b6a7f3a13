//! The Hardy configuration: pre-selected pair state, dark-dark post-selection,
//! the exact weak-value oracle and the classical-logic inequality.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optics::{
    final_beamsplitter, recombiner_couplings, two_photon_absorber, Arm, ArmId, ArmPair,
    ImperfectionParams,
};
use crate::qstate::{
    apply, embed_single_qubit, ket_bra, BasisLabel, ElementOperator, Factor, Photon, Polarization,
    StageRequirement, StateVector, C64,
};

/// Overlaps below this (relative to the norms) make a weak value undefined.
pub const UNDEFINED_OVERLAP: f64 = 1e-12;

/// One arm, or one arm of each photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Occupation {
    arm_e: Option<Arm>,
    arm_p: Option<Arm>,
}

impl Occupation {
    pub fn single(arm: ArmId) -> Self {
        match arm.photon {
            Photon::E => Occupation {
                arm_e: Some(arm.arm),
                arm_p: None,
            },
            Photon::P => Occupation {
                arm_e: None,
                arm_p: Some(arm.arm),
            },
        }
    }

    pub fn joint(pair: ArmPair) -> Self {
        Occupation {
            arm_e: Some(pair.arm_e),
            arm_p: Some(pair.arm_p),
        }
    }

    /// Builds from a list of arms; at most one arm per photon, at least one arm.
    pub fn from_arms(arms: &[ArmId]) -> Result<Self> {
        let mut occ = Occupation {
            arm_e: None,
            arm_p: None,
        };
        for a in arms {
            let slot = match a.photon {
                Photon::E => &mut occ.arm_e,
                Photon::P => &mut occ.arm_p,
            };
            if slot.is_some() {
                return Err(Error::InvalidOccupation("two arms of the same photon"));
            }
            *slot = Some(a.arm);
        }
        if occ.arm_e.is_none() && occ.arm_p.is_none() {
            return Err(Error::InvalidOccupation("no arms"));
        }
        Ok(occ)
    }

    pub fn arm(&self, photon: Photon) -> Option<Arm> {
        match photon {
            Photon::E => self.arm_e,
            Photon::P => self.arm_p,
        }
    }

    pub fn arms(&self) -> Vec<ArmId> {
        Photon::BOTH
            .into_iter()
            .filter_map(|k| self.arm(k).map(|a| ArmId::new(k, a)))
            .collect()
    }

    pub fn pair(&self) -> Option<ArmPair> {
        Some(ArmPair::new(self.arm_e?, self.arm_p?))
    }

    fn contains(&self, arm_e: Arm, arm_p: Arm) -> bool {
        self.arm_e.is_none_or(|a| a == arm_e) && self.arm_p.is_none_or(|a| a == arm_p)
    }
}

/// The pair after the first beamsplitter and the switch:
/// `(|I_E O_P⟩ + |O_E I_P⟩ + |O_E O_P⟩ ± sqrt(1-ε)|I_E I_P⟩)/2 ⊗ |H_E H_P⟩`.
pub fn preselected_state(imp: &ImperfectionParams) -> Result<StateVector> {
    let half = C64::new(0.5, 0.0);
    let h = Polarization::H;
    let split = StateVector::from_terms(Arm::BOTH.into_iter().flat_map(|ae| {
        Arm::BOTH.into_iter().map(move |ap| {
            let l = BasisLabel::new(ae.path_label(), h, ap.path_label(), h).expect("same alphabet");
            (l, half)
        })
    }))?;
    apply(&two_photon_absorber(imp)?, &split)
}

/// Both final beamsplitters, E first.
pub fn recombine(state: &StateVector, imp: &ImperfectionParams) -> Result<StateVector> {
    let s = apply(&final_beamsplitter(Photon::E, imp.visibility_e)?, state)?;
    apply(&final_beamsplitter(Photon::P, imp.visibility_p)?, &s)
}

/// Projector onto both photons at their dark ports.
pub fn dark_postselection() -> ElementOperator {
    let de = embed_single_qubit(&ket_bra(0), Factor::PathE);
    let dp = embed_single_qubit(&ket_bra(0), Factor::PathP);
    de.compose(&dp)
        .expect("plain projectors compose")
        .with_requirement(StageRequirement::Post)
}

/// Probability that both photons reach the dark ports (no rotators).
pub fn dark_dark_probability(imp: &ImperfectionParams) -> Result<f64> {
    let post = recombine(&preselected_state(imp)?, imp)?;
    let selected = apply(&dark_postselection(), &post)?;
    Ok(selected.squared_norm())
}

/// Path-sector amplitudes indexed `[arm_E][arm_P]`.
pub type PathAmplitudes = [[C64; 2]; 2];

/// `⟨f|C|i⟩ / ⟨f|i⟩` on the four-dimensional path sector, where `post` holds
/// the coefficients of the bra `⟨f|` and `occ` picks the projector `C`.
pub fn weak_value_in_path_sector(
    pre: &PathAmplitudes,
    post: &PathAmplitudes,
    occ: &Occupation,
) -> Result<C64> {
    let mut num = C64::new(0.0, 0.0);
    let mut den = C64::new(0.0, 0.0);
    let (mut norm_pre, mut norm_post) = (0.0, 0.0);
    for ae in Arm::BOTH {
        for ap in Arm::BOTH {
            let (e, p) = (ae.bit(), ap.bit());
            let term = post[e][p] * pre[e][p];
            den += term;
            if occ.contains(ae, ap) {
                num += term;
            }
            norm_pre += pre[e][p].norm_sqr();
            norm_post += post[e][p].norm_sqr();
        }
    }
    if den.norm() <= UNDEFINED_OVERLAP * (norm_pre * norm_post).sqrt() {
        return Err(Error::UndefinedWeakValue);
    }
    Ok(num / den)
}

/// Pre-selected path amplitudes, written down directly.
pub fn preselected_path_amplitudes(imp: &ImperfectionParams) -> PathAmplitudes {
    let half = C64::new(0.5, 0.0);
    [[half * imp.residual_amplitude(), half], [half, half]]
}

/// Coefficients of `⟨D_E D_P|` pulled back through both recombiners.
pub fn dark_dark_bra(imp: &ImperfectionParams) -> PathAmplitudes {
    let port = |v: f64| {
        let (r, t) = recombiner_couplings(v);
        [r, -t]
    };
    let de = port(imp.visibility_e);
    let dp = port(imp.visibility_p);
    let mut f = [[C64::new(0.0, 0.0); 2]; 2];
    for e in 0..2 {
        for p in 0..2 {
            f[e][p] = C64::new(de[e] * dp[p], 0.0);
        }
    }
    f
}

/// Exact weak value of an occupation projector (or product of two) for the
/// dark-dark post-selected ensemble.
pub fn analytic_weak_value(occ: &Occupation, imp: &ImperfectionParams) -> Result<C64> {
    imp.validate()?;
    weak_value_in_path_sector(&preselected_path_amplitudes(imp), &dark_dark_bra(imp), occ)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, sigma: 0.0 }
    }
}

/// Table layout: four joint cells and a single-arm margin per photon.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakValueReport {
    pub joint: BTreeMap<ArmPair, Estimate>,
    pub single_e: BTreeMap<Arm, Estimate>,
    pub single_p: BTreeMap<Arm, Estimate>,
}

impl WeakValueReport {
    pub fn joint_value(&self, pair: ArmPair) -> Option<f64> {
        self.joint.get(&pair).map(|e| e.value)
    }

    pub fn single_value(&self, arm: ArmId) -> Option<f64> {
        let map = match arm.photon {
            Photon::E => &self.single_e,
            Photon::P => &self.single_p,
        };
        map.get(&arm.arm).map(|e| e.value)
    }
}

/// The oracle's table for a given apparatus.
pub fn analytic_report(imp: &ImperfectionParams) -> Result<WeakValueReport> {
    let mut joint = BTreeMap::new();
    for pair in ArmPair::all() {
        let w = analytic_weak_value(&Occupation::joint(pair), imp)?;
        joint.insert(pair, Estimate::exact(w.re));
    }
    let single = |photon| -> Result<BTreeMap<Arm, Estimate>> {
        Arm::BOTH
            .into_iter()
            .map(|a| {
                let w = analytic_weak_value(&Occupation::single(ArmId::new(photon, a)), imp)?;
                Ok((a, Estimate::exact(w.re)))
            })
            .collect()
    };
    Ok(WeakValueReport {
        joint,
        single_e: single(Photon::E)?,
        single_p: single(Photon::P)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

/// Classical logic requires `N(I_E & I_P) >= N(I_E) + N(I_P) - 1`.
pub fn classical_inequality_check(report: &WeakValueReport) -> Result<InequalityCheck> {
    let missing = Error::InvalidOccupation("report lacks N(I_E I_P), N(I_E) or N(I_P)");
    let lhs = report
        .joint_value(ArmPair::new(Arm::Inner, Arm::Inner))
        .ok_or(missing.clone())?;
    let ne = report
        .single_value(ArmId::new(Photon::E, Arm::Inner))
        .ok_or(missing.clone())?;
    let np = report
        .single_value(ArmId::new(Photon::P, Arm::Inner))
        .ok_or(missing)?;
    let rhs = ne + np - 1.0;
    Ok(InequalityCheck {
        lhs,
        rhs,
        violated: lhs < rhs,
    })
}
