//! Ensemble-level properties checked against independent closed forms and the
//! exact oracle.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use qdemon::cli::{run_point, run_sweep};
use qdemon::config::{InitialState, RunConfig, SweepAxis, SweepSpec};
use qdemon::master_eq::exact_outcome_distribution;
use qdemon::thermo::{cell_counts, fluctuation_average_from_tables, Estimates};
use qdemon::{
    ensemble_summary, run_ensemble, BetaSource, BinaryDist, FeedbackErrorModel, InverseTemperature,
    Outcome, Protocol, SummaryOptions,
};

fn cfg(protocol: Protocol, t1_us: Option<f64>, n_shots: usize) -> RunConfig {
    let mut c = RunConfig {
        protocol,
        n_shots,
        bootstrap_resamples: 300,
        master_seed: 11,
        ..Default::default()
    };
    c.physics.t1_us = t1_us;
    c
}

fn exact(c: &RunConfig) -> Estimates {
    let s = c.setup(None).unwrap();
    let ex = &s.experiment;
    Estimates::exact(&exact_outcome_distribution(ex).unwrap(), s.beta, &ex.errors)
}

#[test]
fn temperature_sweep_follows_survival_probability() {
    let mut c = cfg(Protocol::A, None, 20_000);
    c.sweep = Some(SweepSpec {
        axis: SweepAxis::InverseTemperature,
        grid: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
    });
    let rows = run_sweep(&c).unwrap().rows;
    for r in &rows {
        let s = &r.summary;
        let target = 1.0 - s.lambda_fb_theory;
        assert!(
            (s.avg_exp_sigma_ish - target).abs() <= 3.0 * s.stderr.avg_exp_sigma_ish,
            "1/T = {:?}: {} vs {target}",
            r.param,
            s.avg_exp_sigma_ish
        );
    }
    assert_abs_diff_eq!(1.0 - rows[2].summary.lambda_fb_theory, 0.5, epsilon = 1e-12);
    // 1/T = 20 K⁻¹ gives βħω ≈ 6.4, so 1 − λ_fb ≈ 0.998.
    assert!(1.0 - rows[4].summary.lambda_fb_theory > 0.99);
    assert!(1.0 - rows[0].summary.lambda_fb_theory < 0.01);
}

#[test]
fn qc_information_decreases_with_feedback_error() {
    for t1 in [None, Some(24.0)] {
        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let mut c = cfg(Protocol::B, t1, 1000);
            c.feedback_error = FeedbackErrorModel::symmetric(i as f64 * 0.05).unwrap();
            let iqc = exact(&c).mean_iqc;
            assert!(iqc < prev, "T1 = {t1:?}, ε = {}: {iqc} ≥ {prev}", i as f64 * 0.05);
            prev = iqc;
        }
        assert!(prev.abs() < 0.02, "I_QC at ε = 1/2 should vanish, got {prev}");
    }
}

#[test]
fn randomized_feedback_satisfies_second_law() {
    for protocol in [Protocol::A, Protocol::B] {
        let mut c = cfg(protocol, Some(24.0), 40_000);
        c.feedback_error = FeedbackErrorModel::symmetric(0.5).unwrap();
        let r = run_point(&c, None, 5, None).unwrap();
        assert!(r.summary.mean_beta_w <= 0.0);
        assert!(r.second_law.satisfied);
        assert!(r.second_law.lhs < r.second_law.rhs);
        let o = r.oracle.unwrap();
        // ⟨W⟩ = (p_e − p_g)/2 up to relaxation corrections.
        let p_e = c.setup(None).unwrap().experiment.p_e_init;
        let beta = c.setup(None).unwrap().beta.beta_eps;
        assert!((o.mean_beta_w / beta - (p_e - 0.5)).abs() < 0.03);
    }
}

#[test]
fn no_feedback_extracts_no_work() {
    for t1 in [None, Some(24.0)] {
        let mut c = cfg(Protocol::A, t1, 40_000);
        c.feedback_enabled = false;
        let r = run_point(&c, None, 6, None).unwrap();
        let s = &r.summary;
        assert!(s.mean_beta_w <= 3.0 * s.stderr.mean_beta_w, "{}", s.mean_beta_w);
        assert!(r.oracle.unwrap().mean_beta_w <= 0.0);
    }
}

#[test]
fn efficiency_never_exceeds_one() {
    for (protocol, t1, eps) in [
        (Protocol::B, Some(24.0), 0.0),
        (Protocol::B, Some(24.0), 0.1),
        (Protocol::B, None, 0.05),
        (Protocol::A, Some(24.0), 0.0),
    ] {
        let mut c = cfg(protocol, t1, 40_000);
        c.feedback_error = FeedbackErrorModel::symmetric(eps).unwrap();
        let r = run_point(&c, None, 9, None).unwrap();
        assert!(r.summary.eta <= 1.0 + 3.0 * r.summary.stderr.eta);
        assert!(r.oracle.unwrap().eta <= 1.0);
    }
}

#[test]
fn estimator_matches_four_term_expansion_on_records() {
    let c = cfg(Protocol::A, Some(24.0), 50_000);
    let s = c.setup(None).unwrap();
    let records = run_ensemble(&s.experiment, c.n_shots, 3).unwrap();
    for source in [BetaSource::Configured(s.beta), BetaSource::Estimated] {
        let opts = SummaryOptions::new(source, s.experiment.errors).with_bootstrap(0, 0);
        let summary = ensemble_summary(&records, Protocol::A, &opts).unwrap();

        let mut n_x = [0.0; 2];
        let mut n_xz = [[0.0; 2]; 2];
        for r in &records {
            n_x[r.x.index()] += 1.0;
            n_xz[r.x.index()][r.z.index()] += 1.0;
        }
        let n = records.len() as f64;
        let p_x = BinaryDist::new(n_x[0] / n, n_x[1] / n);
        let table = [
            [n_xz[0][0] / n_x[0], n_xz[0][1] / n_x[0]],
            [n_xz[1][0] / n_x[1], n_xz[1][1] / n_x[1]],
        ];
        let beta = match source {
            BetaSource::Configured(b) => b,
            BetaSource::Estimated => InverseTemperature::new((p_x.g / p_x.e).ln()),
        };
        let expanded = fluctuation_average_from_tables(beta, p_x, table);
        assert_abs_diff_eq!(summary.avg_exp_sigma_ish, expanded, epsilon = 1e-12);
    }
}

#[test]
fn mcwf_matches_oracle_statistics() {
    for protocol in [Protocol::A, Protocol::B] {
        let mut c = cfg(protocol, Some(24.0), 60_000);
        c.feedback_error = FeedbackErrorModel::new(0.05, 0.1).unwrap();
        let r = run_point(&c, None, 12, None).unwrap();
        let s = &r.summary;
        let o = r.oracle.unwrap();
        for (name, v, se, e) in [
            ("avg_exp_sigma_ish", s.avg_exp_sigma_ish, s.stderr.avg_exp_sigma_ish, o.avg_exp_sigma_ish),
            ("avg_exp_sigma_iqc", s.avg_exp_sigma_iqc, s.stderr.avg_exp_sigma_iqc, o.avg_exp_sigma_iqc),
            ("mean_betaW", s.mean_beta_w, s.stderr.mean_beta_w, o.mean_beta_w),
            ("mean_iqc", s.mean_iqc, s.stderr.mean_iqc, o.mean_iqc),
        ] {
            assert!((v - e).abs() <= 3.5 * se, "{protocol} {name}: {v} vs {e} ± {se}");
        }
    }
}

#[test]
fn estimated_beta_counts_match_configured_counts() {
    let c = cfg(Protocol::B, Some(24.0), 5_000);
    let s = c.setup(None).unwrap();
    let records = run_ensemble(&s.experiment, c.n_shots, 4).unwrap();
    let counts = cell_counts(&records);
    assert_eq!(counts.iter().sum::<f64>(), 5_000.0);
    let est = Estimates::from_weights(
        &counts,
        Protocol::B,
        BetaSource::Estimated,
        &s.experiment.errors,
        10.0,
    );
    let p_e = records.iter().filter(|r| r.x == Outcome::E).count() as f64 / 5_000.0;
    assert_abs_diff_eq!(est.beta_eps, ((1.0 - p_e) / p_e).ln(), epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_survival_identity_without_relaxation(beta in -5.0f64..5.0, protocol_b in any::<bool>()) {
        let mut c = cfg(if protocol_b { Protocol::B } else { Protocol::A }, None, 1000);
        c.initial = InitialState::BetaEps(beta);
        let e = exact(&c);
        prop_assert!((e.avg_exp_sigma_ish - (1.0 - e.lambda_fb_theory)).abs() < 1e-12);
        prop_assert!((e.second_law_margin).abs() < 1e-12);
    }

    #[test]
    fn exact_qc_identity_with_two_sided_errors(
        beta in -4.0f64..4.0,
        e1 in 0.01f64..0.5,
        e2 in 0.01f64..0.5,
    ) {
        let mut c = cfg(Protocol::B, None, 1000);
        c.initial = InitialState::BetaEps(beta);
        c.feedback_error = FeedbackErrorModel::new(e1, e2).unwrap();
        let e = exact(&c);
        prop_assert!((e.avg_exp_sigma_iqc - 1.0).abs() < 1e-12);
        prop_assert!(e.mean_beta_w <= e.mean_iqc + 1e-12);
    }

    #[test]
    fn lambda_is_a_probability(
        beta in -10.0f64..10.0,
        pk in 0.0f64..=1.0,
        py in 0.0f64..=1.0,
        e1 in 0.0f64..=1.0,
        e2 in 0.0f64..=1.0,
    ) {
        let errors = FeedbackErrorModel::new(e1, e2).unwrap();
        let l = qdemon::thermo::lambda_fb_theory(
            InverseTemperature::new(beta),
            &errors,
            BinaryDist::from_excited(pk),
            BinaryDist::from_excited(py),
        );
        prop_assert!((0.0..=1.0).contains(&l));
    }
}
