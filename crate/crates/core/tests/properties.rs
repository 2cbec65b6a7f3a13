use hardy_weak::config::{ExperimentConfig, Mode};
use hardy_weak::counting::{bootstrap_errors, full_table_run, sample_counts, Coupling};
use hardy_weak::hardy::{
    analytic_report, analytic_weak_value, dark_dark_bra, preselected_path_amplitudes,
    weak_value_in_path_sector, Occupation,
};
use hardy_weak::optics::{
    final_beamsplitter, two_photon_absorber, weak_rotator, Arm, ArmId, ArmPair, ImperfectionParams,
    SwitchResidual,
};
use hardy_weak::qstate::{
    apply, conditional_expectation, embed_single_qubit, inner_product, sigma_x, sigma_z,
    ElementOperator, Factor, Matrix2, Photon, Stage, StateVector, Vector16, C64,
};
use hardy_weak::weakmeas::{correlators, extract_pair, run_pointer_protocol, PairExtraction};
use proptest::prelude::*;

const FACTORS: [Factor; 4] = [Factor::PathE, Factor::PolE, Factor::PathP, Factor::PolP];

fn arb_c64() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn arb_vector() -> impl Strategy<Value = Vector16> {
    prop::collection::vec(arb_c64(), 16).prop_map(Vector16::from_iterator)
}

fn arb_state() -> impl Strategy<Value = StateVector> {
    arb_vector().prop_map(|v| StateVector::from_vector(Stage::PreRecombination, v))
}

/// Arbitrary SU(2) element from Euler angles.
fn arb_unitary2() -> impl Strategy<Value = Matrix2> {
    (0.0..6.3f64, 0.0..3.2f64, 0.0..6.3f64).prop_map(|(a, b, c)| {
        let (s, co) = (b / 2.0).sin_cos();
        let e = |x: f64| C64::from_polar(1.0, x);
        Matrix2::new(
            e(-(a + c) / 2.0) * co,
            -e(-(a - c) / 2.0) * s,
            e((a - c) / 2.0) * s,
            e((a + c) / 2.0) * co,
        )
    })
}

fn arb_arm() -> impl Strategy<Value = ArmId> {
    (0..4usize).prop_map(|i| ArmId::all()[i])
}

fn arb_pair() -> impl Strategy<Value = ArmPair> {
    (0..4usize).prop_map(|i| ArmPair::all()[i])
}

fn arb_imperfections() -> impl Strategy<Value = ImperfectionParams> {
    (0.5..=1.0f64, 0.8..=1.0f64, 0.8..=1.0f64, any::<bool>()).prop_map(|(e, ve, vp, inv)| {
        ImperfectionParams::new(e, ve, vp)
            .unwrap()
            .with_residual(if inv {
                SwitchResidual::Inverted
            } else {
                SwitchResidual::InPhase
            })
    })
}

fn max_abs(m: &hardy_weak::qstate::Matrix16) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_preserve_norm(u in arb_unitary2(), target in 0..4usize, s in arb_state(),
                               arm in arb_arm(), g in -1.5..1.5f64) {
        let embedded = embed_single_qubit(&u, FACTORS[target]);
        prop_assert!(embedded.is_unitary());
        let rot = weak_rotator(arm, g).unwrap();
        for op in [&embedded, &rot] {
            let out = apply(op, &s).unwrap();
            prop_assert!((out.squared_norm() - s.squared_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(a in arb_state(), b in arb_state()) {
        let ab = inner_product(&a, &b).unwrap();
        let ba = inner_product(&b, &a).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
    }

    #[test]
    fn conditional_expectation_ignores_phase_and_scale(
        s in arb_state(), phase in 0.0..6.3f64, scale in 0.01..100.0f64, target in 0..4usize,
    ) {
        let obs = embed_single_qubit(&sigma_x(), FACTORS[target]);
        let proj = embed_single_qubit(&((Matrix2::identity() + sigma_z()) * C64::new(0.5, 0.0)), Factor::PathE);
        let base = conditional_expectation(&obs, &s, &proj);
        prop_assume!(base.is_ok());
        let moved = s.scaled(C64::from_polar(scale, phase));
        let other = conditional_expectation(&obs, &moved, &proj).unwrap();
        prop_assert!((base.unwrap() - other).abs() < 1e-10);
    }

    #[test]
    fn distinct_targets_commute(a in arb_unitary2(), b in arb_unitary2(), i in 0..4usize, j in 0..4usize) {
        prop_assume!(i != j);
        let x = embed_single_qubit(&a, FACTORS[i]);
        let y = embed_single_qubit(&b, FACTORS[j]);
        prop_assert!(max_abs(&(x.matrix() * y.matrix() - y.matrix() * x.matrix())) < 1e-12);
    }

    #[test]
    fn rotator_inverse(arm in arb_arm(), g in -1.5..1.5f64) {
        let prod = weak_rotator(arm, g).unwrap().compose(&weak_rotator(arm, -g).unwrap()).unwrap();
        prop_assert!(max_abs(&(prod.matrix() - ElementOperator::identity().matrix())) < 1e-12);
    }

    #[test]
    fn rotators_on_different_arms_commute(a in arb_arm(), b in arb_arm(), ga in 0.0..1.5f64, gb in 0.0..1.5f64) {
        let x = weak_rotator(a, ga).unwrap();
        let y = weak_rotator(b, gb).unwrap();
        prop_assert!(max_abs(&(x.matrix() * y.matrix() - y.matrix() * x.matrix())) < 1e-12);
    }

    #[test]
    fn absorber_never_amplifies(imp in arb_imperfections(), s in arb_state()) {
        let out = apply(&two_photon_absorber(&imp).unwrap(), &s).unwrap();
        for i in 0..16 {
            prop_assert!(out.amplitude_at(i).norm() <= s.amplitude_at(i).norm() + 1e-15);
        }
    }

    #[test]
    fn recombiners_are_unitary(ve in 0.0..=1.0f64, vp in 0.0..=1.0f64, s in arb_state()) {
        let e = final_beamsplitter(Photon::E, ve).unwrap();
        let p = final_beamsplitter(Photon::P, vp).unwrap();
        prop_assert!(e.is_unitary() && p.is_unitary());
        let out = apply(&p, &apply(&e, &s).unwrap()).unwrap();
        prop_assert_eq!(out.stage(), Stage::PostRecombination);
        prop_assert!((out.squared_norm() - s.squared_norm()).abs() < 1e-12);
    }

    #[test]
    fn analytic_sum_rules_and_reality(imp in arb_imperfections()) {
        let r = analytic_report(&imp).unwrap();
        let j = |e, p| r.joint_value(ArmPair::new(e, p)).unwrap();
        let s = |k, a| r.single_value(ArmId::new(k, a)).unwrap();
        let (i, o) = (Arm::Inner, Arm::Outer);
        for k in Photon::BOTH {
            prop_assert!((s(k, i) + s(k, o) - 1.0).abs() < 1e-10);
        }
        prop_assert!((j(i, i) + j(i, o) + j(o, i) + j(o, o) - 1.0).abs() < 1e-10);
        prop_assert!((j(i, i) + j(i, o) - s(Photon::E, i)).abs() < 1e-10);
        prop_assert!((j(o, i) + j(o, o) - s(Photon::E, o)).abs() < 1e-10);
        prop_assert!((j(i, i) + j(o, i) - s(Photon::P, i)).abs() < 1e-10);
        prop_assert!((j(i, o) + j(o, o) - s(Photon::P, o)).abs() < 1e-10);
        for pair in ArmPair::all() {
            let w = analytic_weak_value(&Occupation::joint(pair), &imp).unwrap();
            prop_assert!(w.im.abs() < 1e-10);
        }
    }

    #[test]
    fn weak_values_ignore_rescaling(imp in arb_imperfections(), a in arb_c64(), b in arb_c64(), pair in arb_pair()) {
        prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
        let occ = Occupation::joint(pair);
        let pre = preselected_path_amplitudes(&imp);
        let post = dark_dark_bra(&imp);
        let scale = |m: [[C64; 2]; 2], z: C64| m.map(|row| row.map(|x| x * z));
        let base = weak_value_in_path_sector(&pre, &post, &occ).unwrap();
        let moved = weak_value_in_path_sector(&scale(pre, a), &scale(post, b), &occ).unwrap();
        prop_assert!((base - moved).norm() < 1e-10 * base.norm().max(1.0));
    }

    #[test]
    fn swapping_photons_swaps_extractions(imp in arb_imperfections(), pair in arb_pair(),
                                          ge in 0.01..0.3f64, gp in 0.01..0.3f64) {
        let a = extract_pair(pair, ge, gp, &imp).unwrap();
        let b = extract_pair(pair.swapped(), gp, ge, &imp.swapped()).unwrap();
        prop_assert!((a.joint - b.joint).abs() < 1e-10);
        prop_assert!((a.single_e - b.single_p).abs() < 1e-10);
        prop_assert!((a.single_p - b.single_e).abs() < 1e-10);
    }

    #[test]
    fn extracted_joints_sum_to_one(imp in arb_imperfections(), g in 0.005..0.3f64) {
        let sum: f64 = ArmPair::all()
            .into_iter()
            .map(|p| extract_pair(p, g, g, &imp).unwrap().joint)
            .sum();
        prop_assert!((sum - 1.0).abs() <= 10.0 * g, "sum {} at g {}", sum, g);
    }
}

#[test]
fn ideal_setup_is_symmetric_under_photon_swap() {
    let imp = ImperfectionParams::ideal();
    for g in [0.2, 0.1, 0.05] {
        for pair in ArmPair::all() {
            let a = extract_pair(pair, g, g, &imp).unwrap();
            let b = extract_pair(pair.swapped(), g, g, &imp).unwrap();
            assert!((a.joint - b.joint).abs() < 1e-12);
        }
    }
}

fn counts_cfg(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        g_e: 0.3,
        g_p: 0.3,
        g_sigma_e: 0.015,
        g_sigma_p: 0.015,
        switch_efficiency: 0.85,
        visibility_e: 0.95,
        visibility_p: 0.94,
        mean_pairs: 4e4,
        n_bootstrap: 200,
        seed,
        mode: Mode::Counts,
        ..ExperimentConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn counts_runs_are_pure_functions_of_seed(seed in any::<u64>()) {
        let a = full_table_run(&counts_cfg(seed)).unwrap();
        let b = full_table_run(&counts_cfg(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn noiseless_mode_matches_extraction_exactly() {
    let cfg = ExperimentConfig {
        mode: Mode::Noiseless,
        g_e: 0.1,
        g_p: 0.07,
        switch_efficiency: 0.9,
        visibility_e: 0.97,
        ..ExperimentConfig::default()
    };
    let run = full_table_run(&cfg).unwrap();
    let imp = cfg.imperfections();
    for pair in ArmPair::all() {
        let direct = extract_pair(pair, cfg.g_e, cfg.g_p, &imp).unwrap();
        let dist = run_pointer_protocol(&Occupation::joint(pair), cfg.g_e, cfg.g_p, &imp).unwrap();
        let via = PairExtraction::from_correlators(&correlators(&dist).unwrap(), cfg.g_e, cfg.g_p)
            .unwrap();
        assert_eq!(direct, via);
        assert_eq!(run.report.joint[&pair].value, direct.joint);
        assert_eq!(run.report.joint[&pair].sigma, 0.0);
    }
}

#[test]
fn sampled_estimate_converges_to_noiseless() {
    let imp = ImperfectionParams::measured_apparatus();
    let g = 0.2;
    let pair = ArmPair::new(Arm::Outer, Arm::Outer);
    let dist = run_pointer_protocol(&Occupation::joint(pair), g, g, &imp).unwrap();
    let target = extract_pair(pair, g, g, &imp).unwrap().joint;
    let mut last = f64::INFINITY;
    for mean_pairs in [1e5, 1e7, 1e9] {
        let mut bias = 0.0;
        let mut sigma = 0.0;
        let seeds = 8;
        for seed in 0..seeds {
            let rec = sample_counts(&dist, mean_pairs, seed).unwrap();
            let corr = rec.correlators().unwrap();
            bias += PairExtraction::from_correlators(&corr, g, g).unwrap().joint - target;
            sigma += bootstrap_errors(&rec, Coupling::exact(g), Coupling::exact(g), 100, seed)
                .unwrap()
                .joint
                .sigma;
        }
        let bias = (bias / seeds as f64).abs();
        let sigma = sigma / seeds as f64 / (seeds as f64).sqrt();
        // monotone within statistical error
        assert!(bias < last + 3.0 * sigma, "bias {bias} at {mean_pairs}");
        assert!(bias < 4.0 * sigma + 1e-12, "bias {bias} vs sigma {sigma}");
        last = bias;
    }
}

#[test]
fn bootstrap_mean_is_stable_in_resample_count() {
    let imp = ImperfectionParams::measured_apparatus();
    let g = Coupling {
        value: 0.3,
        sigma: 0.015,
    };
    for pair in ArmPair::all() {
        let dist = run_pointer_protocol(&Occupation::joint(pair), g.value, g.value, &imp).unwrap();
        let rec = sample_counts(&dist, 4e4, 3).unwrap();
        let small = bootstrap_errors(&rec, g, g, 100, 3).unwrap().joint;
        let large = bootstrap_errors(&rec, g, g, 10_000, 3).unwrap().joint;
        // the n=100 mean has standard error sigma/10
        assert!((small.value - large.value).abs() < 3.0 * large.sigma / 10.0 + 1e-12);
        assert!((small.sigma / large.sigma - 1.0).abs() < 0.3);
    }
}
