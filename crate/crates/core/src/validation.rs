//! Self-checks of the simulator against the exact oracle and known identities.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::domain::{Cell, Outcome, PureState, ShotRecord};
use crate::error::Result;
use crate::master_eq::{exact_outcome_distribution, relax, DensityMatrix2, OutcomeDistribution};
use crate::protocol::{run_ensemble, Protocol};
use crate::rng::{derive_seed, stream, DOMAIN_VALIDATE};
use crate::thermo::{cell_counts, ensemble_summary, second_law_check, Estimates, SummaryOptions};
use crate::trajectory::{evolve, mcwf_step, EvolutionConfig};

/// Tolerance in standard errors for every statistical check.
pub const N_SIGMA: f64 = 3.0;

/// One cell whose count is outside the tolerance band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDeviation {
    pub cell: usize,
    pub count: f64,
    pub expected: f64,
    pub sigma: f64,
}

/// Per-cell comparison of an ensemble with the exact distribution, using
/// the multinomial standard deviation √(Np(1−p)) of each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellAgreement {
    pub n_shots: u64,
    /// Largest |count − Np|/σ over cells with p > 0.
    pub max_z: f64,
    pub deviations: Vec<CellDeviation>,
}

impl CellAgreement {
    pub fn passed(&self) -> bool {
        self.deviations.is_empty()
    }
}

pub fn cell_agreement(records: &[ShotRecord], dist: &OutcomeDistribution, n_sigma: f64) -> CellAgreement {
    let counts = cell_counts(records);
    let n = records.len() as f64;
    let mut max_z: f64 = 0.0;
    let mut deviations = Vec::new();
    for (i, (&count, &prob)) in counts.iter().zip(&dist.probs).enumerate() {
        let p = prob.clamp(0.0, 1.0);
        let expected = n * p;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let diff = (count - expected).abs();
        let bad = if sigma > 0.0 {
            let z = diff / sigma;
            max_z = max_z.max(z);
            z > n_sigma
        } else {
            diff > 0.0
        };
        if bad {
            deviations.push(CellDeviation {
                cell: i,
                count: counts[i],
                expected,
                sigma,
            });
        }
    }
    CellAgreement {
        n_shots: records.len() as u64,
        max_z,
        deviations,
    }
}

/// Binomial z-score of `hits` out of `n` against probability `p`.
pub fn binomial_z(hits: u64, n: u64, p: f64) -> f64 {
    let nf = n as f64;
    let sigma = (nf * p * (1.0 - p)).sqrt();
    let diff = hits as f64 - nf * p;
    if sigma > 0.0 {
        diff.abs() / sigma
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// |diff|/se, with an exact match scoring zero even when se = 0.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.abs() / se
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    fn skip(name: &str, detail: &str) -> Self {
        CheckOutcome {
            name: name.to_string(),
            status: CheckStatus::Skip,
            detail: detail.to_string(),
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((pass, detail)) => Self::new(name, pass, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub master_seed: u64,
    pub n_shots: usize,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "SKIP",
            };
            writeln!(f, "{tag:4}  {:22} {}", c.name, c.detail)?;
        }
        let failed = self.failed_checks().count();
        if failed == 0 {
            write!(f, "all checks passed")
        } else {
            write!(f, "{failed} check(s) failed")
        }
    }
}

const NORM_TRAJECTORIES: u64 = 500;
const DECAY_SHOTS: u64 = 20_000;
const DT_SHOTS: usize = 20_000;
const NORM_TOL: f64 = 1e-9;

fn norm_preservation(cfg: &RunConfig, seed: u64) -> Result<(bool, String)> {
    let setup = cfg.setup(None)?;
    let ex = &setup.experiment;
    let steps = ex.evolution.steps_for(ex.timeline.span_us());
    let start = PureState::from_excited_population(0.5)?;
    let mut worst: f64 = 0.0;
    let mut jumps = 0u64;
    for i in 0..NORM_TRAJECTORIES {
        let mut rng = stream(seed, i);
        let mut s = start;
        for _ in 0..steps {
            let (next, j) = mcwf_step(&s, &ex.params, &ex.evolution, &mut rng)?;
            worst = worst.max((next.norm_sqr() - 1.0).abs());
            jumps += j.is_some() as u64;
            if worst > NORM_TOL {
                return Ok((
                    false,
                    format!("jump normalization broken: |‖ψ‖² − 1| = {worst:.3e} after a step"),
                ));
            }
            s = next;
        }
    }
    Ok((
        true,
        format!("{NORM_TRAJECTORIES} trajectories, {jumps} jumps, max |‖ψ‖² − 1| = {worst:.1e}"),
    ))
}

fn engine_equivalence(records: &[ShotRecord], dist: &OutcomeDistribution) -> (bool, String) {
    let a = cell_agreement(records, dist, N_SIGMA);
    let mut detail = format!("{} shots, max cell deviation {:.2}σ", a.n_shots, a.max_z);
    for d in &a.deviations {
        detail.push_str(&format!(
            "; cell {} count {} vs {:.1} ± {:.1}",
            Cell::from_index(d.cell),
            d.count,
            d.expected,
            d.sigma
        ));
    }
    (a.passed(), detail)
}

fn free_decay(cfg: &RunConfig, seed: u64) -> Result<(bool, String)> {
    let setup = cfg.setup(None)?;
    let ex = &setup.experiment;
    let t1 = ex.params.t1_us();
    let mut excited = 0u64;
    for i in 0..DECAY_SHOTS {
        let mut rng = stream(seed, i);
        let ev = evolve(&PureState::excited(), 0.0, t1, &ex.params, &ex.evolution, &mut rng)?;
        excited += (ev.state.population_e() > 0.5) as u64;
    }
    let p = relax(&DensityMatrix2::diagonal(1.0)?, t1, &ex.params)?.p_e;
    let z = binomial_z(excited, DECAY_SHOTS, p);
    Ok((
        z <= N_SIGMA,
        format!(
            "P_e(T1) = {:.4}, exact {p:.4} ({z:.2}σ)",
            excited as f64 / DECAY_SHOTS as f64
        ),
    ))
}

fn p_z_excited(records: &[ShotRecord]) -> (u64, u64) {
    let e = records.iter().filter(|r| r.z == Outcome::E).count() as u64;
    (e, records.len() as u64)
}

fn dt_convergence(cfg: &RunConfig, seed: u64) -> Result<(bool, String)> {
    let setup = cfg.setup(None)?;
    let coarse = setup.experiment.clone();
    let mut fine = coarse.clone();
    fine.evolution = EvolutionConfig {
        dt_us: coarse.evolution.dt_us / 2.0,
        ..coarse.evolution
    };
    let n = DT_SHOTS.min(cfg.n_shots);
    let (e1, n1) = p_z_excited(&run_ensemble(&coarse, n, seed)?);
    let (e2, n2) = p_z_excited(&run_ensemble(&fine, n, derive_seed(seed, 1, 0))?);
    let (p1, p2) = (e1 as f64 / n1 as f64, e2 as f64 / n2 as f64);
    let pooled = (e1 + e2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = if se > 0.0 { (p1 - p2).abs() / se } else { 0.0 };
    Ok((
        z <= N_SIGMA,
        format!("P(z=e) at dt and dt/2: {p1:.4} vs {p2:.4} ({z:.2}σ)"),
    ))
}

fn fluctuation_identity(
    summary_est: &Estimates,
    se_ish: f64,
    se_iqc: f64,
    exact: &Estimates,
    closed_form_applies: bool,
) -> (bool, String) {
    let z1 = z_score(summary_est.avg_exp_sigma_ish - exact.avg_exp_sigma_ish, se_ish);
    let z2 = z_score(summary_est.avg_exp_sigma_iqc - exact.avg_exp_sigma_iqc, se_iqc);
    let mut pass = z1 <= N_SIGMA && z2 <= N_SIGMA;
    let mut detail = format!(
        "<e^(bW-I_Sh)> = {:.4} vs exact {:.4} ({z1:.2}σ); <e^(bW-I_QC)> = {:.4} vs exact {:.4} ({z2:.2}σ)",
        summary_est.avg_exp_sigma_ish, exact.avg_exp_sigma_ish, summary_est.avg_exp_sigma_iqc, exact.avg_exp_sigma_iqc
    );
    if closed_form_applies {
        let closed = 1.0 - exact.lambda_fb_theory;
        let ok = (exact.avg_exp_sigma_ish - closed).abs() <= 1e-9;
        pass &= ok;
        detail.push_str(&format!("; exact <e^(bW-I_Sh)> = 1 - lambda_fb = {closed:.6}: {ok}"));
    }
    (pass, detail)
}

/// Runs every check on the configured point.
pub fn validate(cfg: &RunConfig) -> Result<ValidationReport> {
    let setup = cfg.setup(None)?;
    let ex = &setup.experiment;
    let relaxes = ex.params.relaxes();
    let seed = |i| derive_seed(cfg.master_seed, DOMAIN_VALIDATE, i);
    let mut checks = Vec::new();

    checks.push(CheckOutcome::from_result("norm_preservation", norm_preservation(cfg, seed(0))));

    let ensemble = run_ensemble(ex, cfg.n_shots, seed(1));
    let dist = exact_outcome_distribution(ex)?;
    match &ensemble {
        Ok(records) => {
            let (pass, detail) = engine_equivalence(records, &dist);
            checks.push(CheckOutcome::new("engine_equivalence", pass, detail));
        }
        Err(e) => checks.push(CheckOutcome::new("engine_equivalence", false, format!("error: {e}"))),
    }

    const NO_RELAX: &str = "skipped: relaxation is switched off";
    if relaxes {
        checks.push(CheckOutcome::from_result("free_decay", free_decay(cfg, seed(2))));
        checks.push(CheckOutcome::from_result("dt_convergence", dt_convergence(cfg, seed(3))));
    } else {
        checks.push(CheckOutcome::skip("free_decay", NO_RELAX));
        checks.push(CheckOutcome::skip("dt_convergence", NO_RELAX));
    }

    match &ensemble {
        Ok(records) => {
            let opts = SummaryOptions {
                min_cell_count: cfg.min_cell_count,
                ..SummaryOptions::new(cfg.beta_source(setup.beta), ex.errors)
            }
            .with_bootstrap(cfg.bootstrap_resamples, seed(4));
            let summary = ensemble_summary(records, ex.protocol(), &opts)?;
            let exact = Estimates::exact(&dist, setup.beta, &ex.errors);
            let (pass, detail) = fluctuation_identity(
                &summary.estimates,
                summary.stderr.avg_exp_sigma_ish,
                summary.stderr.avg_exp_sigma_iqc,
                &exact,
                !relaxes && ex.errors.is_perfect(),
            );
            checks.push(CheckOutcome::new("fluctuation_identity", pass, detail));

            let law = second_law_check(&summary);
            checks.push(CheckOutcome::new(
                "second_law",
                law.satisfied,
                format!(
                    "b<W> = {:.4} <= <I_Sh> + ln(1 - lambda_fb) = {:.4} (margin {:.4} ± {:.4})",
                    law.lhs, law.rhs, law.margin, summary.stderr.second_law_margin
                ),
            ));
        }
        Err(_) => {
            for name in ["fluctuation_identity", "second_law"] {
                checks.push(CheckOutcome::new(name, false, "no ensemble".into()));
            }
        }
    }

    if ex.protocol() == Protocol::B && !relaxes && ex.errors.e_given_g > 0.0 && ex.errors.g_given_e > 0.0 {
        let exact = Estimates::exact(&dist, setup.beta, &ex.errors);
        let ok = (exact.avg_exp_sigma_iqc - 1.0).abs() <= 1e-9;
        checks.push(CheckOutcome::new(
            "qc_identity",
            ok,
            format!("exact <e^(bW-I_QC)> = {:.12}", exact.avg_exp_sigma_iqc),
        ));
    }

    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(ValidationReport {
        passed,
        master_seed: cfg.master_seed,
        n_shots: cfg.n_shots,
        checks,
    })
}
