//! Photon counting: Poisson coincidence counts and bootstrap error bars.
//!
//! Every random draw comes from a ChaCha8 generator seeded with the run seed
//! and switched to a stream addressed by
//! `domain << 56 | slot << 48 | index`, where `slot` identifies the arm pair
//! (or arm, for coupling draws) and `index` the setting or resample. Results
//! therefore do not depend on execution order or thread count.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::hardy::{
    analytic_report, classical_inequality_check, Estimate, InequalityCheck, Occupation,
    WeakValueReport,
};
use crate::optics::{Arm, ArmId, ArmPair};
use crate::qstate::Photon;
use crate::weakmeas::{
    correlators, run_pointer_protocol, AnalyzerDistribution, AnalyzerSetting, PairExtraction,
    PauliCorrelators,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
enum Domain {
    Counts = 1,
    Resample = 2,
    Coupling = 3,
}

fn stream(seed: u64, domain: Domain, slot: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(slot < 256 && index < (1 << 48));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (slot << 48) | index);
    rng
}

/// Stream slot of an occupation: 0..4 for arm pairs, 4..8 for single arms.
fn occupation_slot(occ: &Occupation) -> u64 {
    match occ.pair() {
        Some(pair) => pair.index() as u64,
        None => 4 + arm_slot(occ.arms()[0]),
    }
}

fn arm_slot(arm: ArmId) -> u64 {
    let photon = match arm.photon {
        Photon::E => 0,
        Photon::P => 2,
    };
    photon + arm.arm.bit() as u64
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // mean is finite and positive here
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// Coincidence counts for every analyzer setting of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountRecord {
    counts: [u64; AnalyzerSetting::COUNT],
    #[serde(skip)]
    pub arms: Occupation,
    /// Expected produced pairs per integration window, stored as bits so the
    /// record stays `Eq`.
    mean_pairs_bits: u64,
    pub seed: u64,
}

impl CountRecord {
    pub fn from_counts(
        counts: [u64; AnalyzerSetting::COUNT],
        arms: Occupation,
        mean_pairs: f64,
        seed: u64,
    ) -> Self {
        CountRecord {
            counts,
            arms,
            mean_pairs_bits: mean_pairs.to_bits(),
            seed,
        }
    }

    pub fn count(&self, setting: AnalyzerSetting) -> u64 {
        self.counts[setting.index()]
    }

    pub fn counts(&self) -> &[u64; AnalyzerSetting::COUNT] {
        &self.counts
    }

    pub fn mean_pairs(&self) -> f64 {
        f64::from_bits(self.mean_pairs_bits)
    }

    pub fn correlators(&self) -> Result<PauliCorrelators> {
        PauliCorrelators::from_rates(|s| self.count(s) as f64)
    }
}

/// Independent Poisson count per setting with mean `probability × mean_pairs`.
pub fn sample_counts(
    dist: &AnalyzerDistribution,
    mean_pairs: f64,
    seed: u64,
) -> Result<CountRecord> {
    if !(mean_pairs > 0.0 && mean_pairs.is_finite()) {
        return Err(Error::OutOfRange {
            name: "mean_pairs",
            value: mean_pairs,
            expected: "finite, > 0",
        });
    }
    let slot = occupation_slot(&dist.arms);
    let mut counts = [0u64; AnalyzerSetting::COUNT];
    for setting in AnalyzerSetting::all() {
        let i = setting.index();
        let mut rng = stream(seed, Domain::Counts, slot, i as u64);
        counts[i] = poisson(dist.probability(setting) * mean_pairs, &mut rng);
    }
    Ok(CountRecord::from_counts(
        counts, dist.arms, mean_pairs, seed,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub sigma: f64,
    pub n_bootstrap: usize,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        EstimateWithError {
            value,
            sigma: 0.0,
            n_bootstrap: 0,
        }
    }

    fn from_samples(samples: impl Iterator<Item = f64>) -> Self {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for v in samples {
            n += 1;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        EstimateWithError {
            value: mean,
            sigma: var.sqrt(),
            n_bootstrap: n,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            sigma: self.sigma,
        }
    }
}

/// A coupling and its calibration uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coupling {
    pub value: f64,
    pub sigma: f64,
}

impl Coupling {
    pub fn exact(value: f64) -> Self {
        Coupling { value, sigma: 0.0 }
    }

    fn draw(&self, seed: u64, arm: ArmId, resample: usize) -> f64 {
        if self.sigma == 0.0 {
            return self.value;
        }
        let mut rng = stream(seed, Domain::Coupling, arm_slot(arm), resample as u64);
        Normal::new(self.value, self.sigma)
            .expect("sigma is finite and non-negative")
            .sample(&mut rng)
    }
}

/// Per-resample extractions of one joint run.
pub fn bootstrap_samples(
    rec: &CountRecord,
    g_e: Coupling,
    g_p: Coupling,
    n_bootstrap: usize,
    seed: u64,
) -> Result<Vec<PairExtraction>> {
    if n_bootstrap < crate::config::MIN_BOOTSTRAP {
        return Err(Error::OutOfRange {
            name: "n_bootstrap",
            value: n_bootstrap as f64,
            expected: ">= 100",
        });
    }
    let pair = rec
        .arms
        .pair()
        .ok_or(Error::InvalidOccupation("bootstrap needs a joint run"))?;
    // an empty basis makes the observed correlators undefined
    rec.correlators()?;
    let slot = pair.index() as u64;
    (0..n_bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, Domain::Resample, slot, b as u64);
            let mut counts = [0u64; AnalyzerSetting::COUNT];
            for (c, &observed) in counts.iter_mut().zip(rec.counts.iter()) {
                *c = poisson(observed as f64, &mut rng);
            }
            let corr = PauliCorrelators::from_rates(|s| counts[s.index()] as f64)?;
            let ge = g_e.draw(seed, pair.arm(Photon::E), b);
            let gp = g_p.draw(seed, pair.arm(Photon::P), b);
            PairExtraction::from_correlators(&corr, ge, gp)
        })
        .collect()
}

/// Bootstrap estimates for the joint cell and both marginals of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairEstimate {
    pub joint: EstimateWithError,
    pub single_e: EstimateWithError,
    pub single_p: EstimateWithError,
}

/// Resamples each count as Poisson(observed) and each coupling as
/// Normal(value, sigma), re-extracting every time; returns the mean and
/// standard deviation over resamples.
pub fn bootstrap_errors(
    rec: &CountRecord,
    g_e: Coupling,
    g_p: Coupling,
    n_bootstrap: usize,
    seed: u64,
) -> Result<PairEstimate> {
    let samples = bootstrap_samples(rec, g_e, g_p, n_bootstrap, seed)?;
    Ok(PairEstimate {
        joint: EstimateWithError::from_samples(samples.iter().map(|s| s.joint)),
        single_e: EstimateWithError::from_samples(samples.iter().map(|s| s.single_e)),
        single_p: EstimateWithError::from_samples(samples.iter().map(|s| s.single_p)),
    })
}

/// Everything produced by one simulated table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRun {
    pub report: WeakValueReport,
    pub inequality: InequalityCheck,
    /// Sampled counts per arm pair (counts mode only).
    pub counts: BTreeMap<ArmPair, CountRecord>,
}

/// Single-arm cells: each arm appears in two joint runs, and the cell is the
/// mean of both marginal readings.
fn singles_from_pairs<F>(per_pair: F) -> (BTreeMap<Arm, Vec<f64>>, BTreeMap<Arm, Vec<f64>>)
where
    F: Fn(ArmPair) -> (f64, f64),
{
    let mut e: BTreeMap<Arm, Vec<f64>> = BTreeMap::new();
    let mut p: BTreeMap<Arm, Vec<f64>> = BTreeMap::new();
    for pair in ArmPair::all() {
        let (se, sp) = per_pair(pair);
        e.entry(pair.arm_e).or_default().push(se);
        p.entry(pair.arm_p).or_default().push(sp);
    }
    (e, p)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs all four joint protocols for `cfg` and assembles the table.
pub fn full_table_run(cfg: &ExperimentConfig) -> Result<TableRun> {
    let imp = cfg.imperfections();
    imp.validate()?;
    let (report, counts) = match cfg.mode {
        Mode::Analytic => (analytic_report(&imp)?, BTreeMap::new()),
        Mode::Noiseless => {
            let runs: Vec<(ArmPair, PairExtraction)> = ArmPair::all()
                .into_par_iter()
                .map(|pair| {
                    let dist =
                        run_pointer_protocol(&Occupation::joint(pair), cfg.g_e, cfg.g_p, &imp)
                            .map_err(|e| e.in_pair(pair))?;
                    let corr = correlators(&dist).map_err(|e| e.in_pair(pair))?;
                    let x = PairExtraction::from_correlators(&corr, cfg.g_e, cfg.g_p)
                        .map_err(|e| e.in_pair(pair))?;
                    Ok((pair, x))
                })
                .collect::<Result<_>>()?;
            let runs: BTreeMap<_, _> = runs.into_iter().collect();
            let joint = runs
                .iter()
                .map(|(p, x)| (*p, Estimate::exact(x.joint)))
                .collect();
            let (e, p) = singles_from_pairs(|pair| (runs[&pair].single_e, runs[&pair].single_p));
            let exact = |m: BTreeMap<Arm, Vec<f64>>| {
                m.into_iter()
                    .map(|(a, v)| (a, Estimate::exact(mean(&v))))
                    .collect()
            };
            (
                WeakValueReport {
                    joint,
                    single_e: exact(e),
                    single_p: exact(p),
                },
                BTreeMap::new(),
            )
        }
        Mode::Counts => counts_table(cfg)?,
    };
    let inequality = classical_inequality_check(&report)?;
    Ok(TableRun {
        report,
        inequality,
        counts,
    })
}

fn counts_table(
    cfg: &ExperimentConfig,
) -> Result<(WeakValueReport, BTreeMap<ArmPair, CountRecord>)> {
    let imp = cfg.imperfections();
    let g_e = Coupling {
        value: cfg.g_e,
        sigma: cfg.g_sigma_e,
    };
    let g_p = Coupling {
        value: cfg.g_p,
        sigma: cfg.g_sigma_p,
    };
    let runs: Vec<(ArmPair, CountRecord, Vec<PairExtraction>)> = ArmPair::all()
        .into_par_iter()
        .map(|pair| {
            let run = || -> Result<_> {
                let dist = run_pointer_protocol(&Occupation::joint(pair), cfg.g_e, cfg.g_p, &imp)?;
                let rec = sample_counts(&dist, cfg.mean_pairs, cfg.seed)?;
                let samples = bootstrap_samples(&rec, g_e, g_p, cfg.n_bootstrap, cfg.seed)?;
                Ok((pair, rec, samples))
            };
            run().map_err(|e| e.in_pair(pair))
        })
        .collect::<Result<_>>()?;

    let by_pair: BTreeMap<ArmPair, &Vec<PairExtraction>> =
        runs.iter().map(|(p, _, s)| (*p, s)).collect();
    let joint = by_pair
        .iter()
        .map(|(p, s)| {
            (
                *p,
                EstimateWithError::from_samples(s.iter().map(|x| x.joint)).estimate(),
            )
        })
        .collect();

    // per resample, average the two marginal readings of each arm
    let single = |photon: Photon| -> BTreeMap<Arm, Estimate> {
        Arm::BOTH
            .into_iter()
            .map(|arm| {
                let pairs: Vec<ArmPair> = ArmPair::all()
                    .into_iter()
                    .filter(|p| p.arm(photon).arm == arm)
                    .collect();
                let per_resample = (0..cfg.n_bootstrap).map(|b| {
                    let vals: Vec<f64> = pairs
                        .iter()
                        .map(|p| {
                            let x = &by_pair[p][b];
                            match photon {
                                Photon::E => x.single_e,
                                Photon::P => x.single_p,
                            }
                        })
                        .collect();
                    mean(&vals)
                });
                (
                    arm,
                    EstimateWithError::from_samples(per_resample).estimate(),
                )
            })
            .collect()
    };
    let report = WeakValueReport {
        joint,
        single_e: single(Photon::E),
        single_p: single(Photon::P),
    };
    let counts = runs.into_iter().map(|(p, rec, _)| (p, rec)).collect();
    Ok((report, counts))
}
