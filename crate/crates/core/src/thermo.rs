//! Information-thermodynamics estimators.
//!
//! All probabilities are plug-in estimates from the ensemble being analysed.
//! With ΔF = 0 the entropy production is σ = −βW, so the fluctuation-theorem
//! averages are ⟨e^{βW−I}⟩.
//!
//! Every statistic is a function of the 16-cell table of joint outcomes
//! (x, k, y, z). The bootstrap exploits this: resampling shots with
//! replacement is the same as drawing a multinomial table from the empirical
//! cell frequencies.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BinaryDist, Cell, InverseTemperature, Outcome, ShotRecord, CELL_COUNT};
use crate::error::{Error, Result};
use crate::master_eq::OutcomeDistribution;
use crate::measurement::FeedbackErrorModel;
use crate::protocol::Protocol;
use crate::rng::{derive_seed, stream, DOMAIN_BOOTSTRAP};

/// Cells of (k, y) seen fewer times than this are not trusted for p̂(y|k).
pub const DEFAULT_MIN_CELL_COUNT: u64 = 10;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

/// A stochastic information that would be infinite because its probability is
/// zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("probability is zero; the stochastic information diverges")]
pub struct Divergent;

/// I_Sh(x) = −ln p̂(x).
pub fn shannon_info(x: Outcome, p_hat: &BinaryDist) -> Result<f64, Divergent> {
    let p = p_hat.get(x);
    if p > 0.0 {
        Ok(-p.ln())
    } else {
        Err(Divergent)
    }
}

/// I_QC = ln p̂(y|k) − ln p̂(x).
pub fn qc_mutual_info(p_y_given_k: f64, p_x: f64) -> Result<f64, Divergent> {
    if p_y_given_k > 0.0 && p_x > 0.0 {
        Ok(p_y_given_k.ln() - p_x.ln())
    } else {
        Err(Divergent)
    }
}

/// Probability λ_fb of time-reversed events without a forward counterpart,
/// for feedback whose erroneous branches are described by `errors`.
///
/// 1 − λ_fb = p(k=g)[p_can(g)(1−ε_ge) + p_can(e)ε_ge]
///          + p(k=e)[p_can(e)ε_eg + p_can(g)(1−ε_eg)],
/// where ε_ge = ε(y=g,k=e) and ε_eg = ε(y=e,k=g) are the joint error
/// probabilities obtained from the conditional model and p(y).
pub fn lambda_fb_theory(
    beta: InverseTemperature,
    errors: &FeedbackErrorModel,
    p_k: BinaryDist,
    p_y: BinaryDist,
) -> f64 {
    let can = beta.canonical_occupancy();
    let (eps_ge, eps_eg) = errors.joint(p_y.g);
    let survive = p_k.g * (can.g * (1.0 - eps_ge) + can.e * eps_ge)
        + p_k.e * (can.e * eps_eg + can.g * (1.0 - eps_eg));
    (1.0 - survive).clamp(0.0, 1.0)
}

/// ⟨e^{βW−I_Sh}⟩ written out from p(x) and p(z|x) as four terms, one per
/// (x, z). `p_z_given_x[x][z]`.
pub fn fluctuation_average_from_tables(
    beta: InverseTemperature,
    p_x: BinaryDist,
    p_z_given_x: [[f64; 2]; 2],
) -> f64 {
    let eps = beta.beta_eps;
    let mut acc = 0.0;
    for x in Outcome::ALL {
        let px = p_x.get(x);
        if px <= 0.0 {
            continue;
        }
        for z in Outcome::ALL {
            let w = x.energy() - z.energy();
            let bw = if w == 0.0 { 0.0 } else { eps * w };
            acc += px * p_z_given_x[x.index()][z.index()] * (bw + px.ln()).exp();
        }
    }
    acc
}

/// Where β comes from when a summary is computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaSource {
    /// Ground truth known to the simulation.
    Configured(InverseTemperature),
    /// ln[p̂(x=g)/p̂(x=e)] from the first readout, as in the experiment.
    Estimated,
}

impl BetaSource {
    pub fn label(&self) -> &'static str {
        match self {
            BetaSource::Configured(_) => "configured",
            BetaSource::Estimated => "estimated",
        }
    }
}

/// Per-shot stochastic quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoRecord {
    pub i_sh: f64,
    /// `None` when p̂(y|k) is not trusted (too few counts in the (k, y) cell).
    pub i_qc: Option<f64>,
    pub beta_w: f64,
    pub exp_bw_minus_ish: f64,
    pub exp_bw_minus_iqc: Option<f64>,
    pub exp_bw: f64,
}

/// Plug-in probability tables of one ensemble.
#[derive(Clone, Debug)]
pub struct PlugIn {
    protocol: Protocol,
    total: f64,
    n_x: [f64; 2],
    n_k: [f64; 2],
    n_y: [f64; 2],
    n_ky: [[f64; 2]; 2],
    min_cell: f64,
    beta: InverseTemperature,
}

impl PlugIn {
    /// Tables from cell weights (counts, or exact probabilities with
    /// `min_cell = 0`).
    pub fn from_weights(
        weights: &[f64; CELL_COUNT],
        protocol: Protocol,
        beta: BetaSource,
        min_cell: f64,
    ) -> Self {
        let mut n_x = [0.0; 2];
        let mut n_k = [0.0; 2];
        let mut n_y = [0.0; 2];
        let mut n_ky = [[0.0; 2]; 2];
        let mut total = 0.0;
        for c in Cell::all() {
            let w = weights[c.index()];
            total += w;
            n_x[c.x.index()] += w;
            n_k[c.k.index()] += w;
            n_y[c.y.index()] += w;
            n_ky[c.k.index()][c.y.index()] += w;
        }
        let beta = match beta {
            BetaSource::Configured(b) => b,
            BetaSource::Estimated => {
                let (g, e) = (n_x[0] / total, n_x[1] / total);
                InverseTemperature::from_occupancy(g, 1.0 - g)
                    .or_else(|_| InverseTemperature::from_occupancy(1.0 - e, e))
                    .unwrap_or(InverseTemperature::new(f64::NAN))
            }
        };
        PlugIn {
            protocol,
            total,
            n_x,
            n_k,
            n_y,
            n_ky,
            min_cell,
            beta,
        }
    }

    pub fn from_records(records: &[ShotRecord], protocol: Protocol, beta: BetaSource, min_cell: u64) -> Self {
        Self::from_weights(&cell_counts(records), protocol, beta, min_cell as f64)
    }

    pub fn beta(&self) -> InverseTemperature {
        self.beta
    }

    pub fn p_x(&self) -> BinaryDist {
        BinaryDist::new(self.n_x[0] / self.total, self.n_x[1] / self.total)
    }

    pub fn p_k(&self) -> BinaryDist {
        BinaryDist::new(self.n_k[0] / self.total, self.n_k[1] / self.total)
    }

    pub fn p_y(&self) -> BinaryDist {
        BinaryDist::new(self.n_y[0] / self.total, self.n_y[1] / self.total)
    }

    pub fn p_y_given_k(&self, y: Outcome, k: Outcome) -> f64 {
        let nk = self.n_k[k.index()];
        if nk > 0.0 {
            self.n_ky[k.index()][y.index()] / nk
        } else {
            0.0
        }
    }

    fn trusted(&self, k: Outcome, y: Outcome) -> bool {
        match self.protocol {
            Protocol::A => true,
            Protocol::B => {
                let n = self.n_ky[k.index()][y.index()];
                n > 0.0 && n >= self.min_cell
            }
        }
    }

    /// Stochastic quantities of one joint outcome.
    pub fn info(&self, c: Cell) -> InfoRecord {
        let p_x = self.p_x().get(c.x);
        let i_sh = -p_x.ln();
        let w = c.work();
        let beta_w = if w == 0 { 0.0 } else { self.beta.beta_eps * w as f64 };
        let i_qc = if self.trusted(c.k, c.y) {
            qc_mutual_info(self.p_y_given_k(c.y, c.k), p_x).ok()
        } else {
            None
        };
        InfoRecord {
            i_sh,
            i_qc,
            beta_w,
            exp_bw_minus_ish: (beta_w - i_sh).exp(),
            exp_bw_minus_iqc: i_qc.map(|i| (beta_w - i).exp()),
            exp_bw: beta_w.exp(),
        }
    }

    pub fn lambda_fb(&self, errors: &FeedbackErrorModel) -> f64 {
        lambda_fb_theory(self.beta, errors, self.p_k(), self.p_y())
    }
}

pub fn cell_counts(records: &[ShotRecord]) -> [f64; CELL_COUNT] {
    let mut counts = [0.0; CELL_COUNT];
    for r in records {
        counts[r.cell().index()] += 1.0;
    }
    counts
}

/// Point estimates of every ensemble statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub beta_eps: f64,
    pub p_x_e: f64,
    pub avg_exp_sigma_ish: f64,
    pub avg_exp_sigma_iqc: f64,
    #[serde(rename = "avg_exp_betaW")]
    pub avg_exp_beta_w: f64,
    pub mean_iqc: f64,
    pub mean_ish: f64,
    #[serde(rename = "mean_betaW")]
    pub mean_beta_w: f64,
    pub lambda_fb_theory: f64,
    pub eta: f64,
    /// ⟨I_Sh⟩ + ln(1 − λ_fb) − β⟨W⟩.
    pub second_law_margin: f64,
    /// Weight excluded from the I_QC averages.
    pub excluded: f64,
}

const N_STATS: usize = 10;

impl Estimates {
    fn finish(
        plug: &PlugIn,
        errors: &FeedbackErrorModel,
        sums: [f64; 6],
        total: f64,
        used: f64,
    ) -> Self {
        let [s_ish_exp, s_iqc_exp, s_bw_exp, s_iqc, s_ish, s_bw] = sums;
        let mean_ish = s_ish / total;
        let mean_beta_w = s_bw / total;
        let mean_iqc = if used > 0.0 { s_iqc / used } else { f64::NAN };
        let lambda = plug.lambda_fb(errors);
        Estimates {
            beta_eps: plug.beta.beta_eps,
            p_x_e: plug.p_x().e,
            avg_exp_sigma_ish: s_ish_exp / total,
            avg_exp_sigma_iqc: if used > 0.0 { s_iqc_exp / used } else { f64::NAN },
            avg_exp_beta_w: s_bw_exp / total,
            mean_iqc,
            mean_ish,
            mean_beta_w,
            lambda_fb_theory: lambda,
            eta: mean_beta_w / mean_iqc,
            second_law_margin: mean_ish + (1.0 - lambda).ln() - mean_beta_w,
            excluded: total - used,
        }
    }

    /// Statistics of a weighted cell table.
    pub fn from_weights(
        weights: &[f64; CELL_COUNT],
        protocol: Protocol,
        beta: BetaSource,
        errors: &FeedbackErrorModel,
        min_cell: f64,
    ) -> Self {
        let plug = PlugIn::from_weights(weights, protocol, beta, min_cell);
        let mut sums = [0.0; 6];
        let mut used = 0.0;
        for c in Cell::all() {
            let w = weights[c.index()];
            if w <= 0.0 {
                continue;
            }
            let info = plug.info(c);
            sums[0] += w * info.exp_bw_minus_ish;
            sums[2] += w * info.exp_bw;
            sums[4] += w * info.i_sh;
            sums[5] += w * info.beta_w;
            if let (Some(iqc), Some(e)) = (info.i_qc, info.exp_bw_minus_iqc) {
                sums[1] += w * e;
                sums[3] += w * iqc;
                used += w;
            }
        }
        Self::finish(&plug, errors, sums, plug.total, used)
    }

    /// Exact expectations of an oracle distribution at the configured β.
    pub fn exact(dist: &OutcomeDistribution, beta: InverseTemperature, errors: &FeedbackErrorModel) -> Self {
        Self::from_weights(&dist.probs, dist.protocol, BetaSource::Configured(beta), errors, 0.0)
    }

    fn values(&self) -> [f64; N_STATS] {
        [
            self.avg_exp_sigma_ish,
            self.avg_exp_sigma_iqc,
            self.avg_exp_beta_w,
            self.mean_iqc,
            self.mean_ish,
            self.mean_beta_w,
            self.lambda_fb_theory,
            self.eta,
            self.second_law_margin,
            self.beta_eps,
        ]
    }
}

/// Bootstrap standard errors, one per statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub avg_exp_sigma_ish: f64,
    pub avg_exp_sigma_iqc: f64,
    #[serde(rename = "avg_exp_betaW")]
    pub avg_exp_beta_w: f64,
    pub mean_iqc: f64,
    pub mean_ish: f64,
    #[serde(rename = "mean_betaW")]
    pub mean_beta_w: f64,
    pub lambda_fb_theory: f64,
    pub eta: f64,
    pub second_law_margin: f64,
    pub beta_eps: f64,
}

impl StdErrors {
    fn from_values(v: [f64; N_STATS]) -> Self {
        StdErrors {
            avg_exp_sigma_ish: v[0],
            avg_exp_sigma_iqc: v[1],
            avg_exp_beta_w: v[2],
            mean_iqc: v[3],
            mean_ish: v[4],
            mean_beta_w: v[5],
            lambda_fb_theory: v[6],
            eta: v[7],
            second_law_margin: v[8],
            beta_eps: v[9],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryOptions {
    pub beta: BetaSource,
    /// Feedback error model used in the λ_fb closed form.
    pub errors: FeedbackErrorModel,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    pub min_cell_count: u64,
}

impl SummaryOptions {
    pub fn new(beta: BetaSource, errors: FeedbackErrorModel) -> Self {
        SummaryOptions {
            beta,
            errors,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            bootstrap_seed: 0,
            min_cell_count: DEFAULT_MIN_CELL_COUNT,
        }
    }

    pub fn with_bootstrap(mut self, resamples: usize, seed: u64) -> Self {
        self.bootstrap_resamples = resamples;
        self.bootstrap_seed = seed;
        self
    }
}

/// Ensemble averages with bootstrap errors.
///
/// JSON field names are stable: `n_shots`, `n_iqc_excluded`, `protocol`,
/// `beta_source`, `beta_eps`, `p_x_e`, `avg_exp_sigma_ish` (⟨e^{βW−I_Sh}⟩),
/// `avg_exp_sigma_iqc` (⟨e^{βW−I_QC}⟩), `avg_exp_betaW`, `mean_iqc`,
/// `mean_ish`, `mean_betaW`, `lambda_fb_theory`, `eta`, `second_law_margin`,
/// `stderr` (same keys), `bootstrap_resamples`, `warnings`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_shots: u64,
    pub n_iqc_excluded: u64,
    pub protocol: Protocol,
    pub beta_source: String,
    #[serde(flatten)]
    pub estimates: Estimates,
    pub stderr: StdErrors,
    pub bootstrap_resamples: usize,
    pub warnings: Vec<String>,
}

impl std::ops::Deref for EnsembleSummary {
    type Target = Estimates;
    fn deref(&self) -> &Estimates {
        &self.estimates
    }
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64; CELL_COUNT], rng: &mut R) -> [f64; CELL_COUNT] {
    let mut out = [0.0; CELL_COUNT];
    let mut remaining = n;
    let mut mass = 1.0;
    for i in 0..CELL_COUNT {
        if remaining == 0 {
            break;
        }
        let p = probs[i];
        if p <= 0.0 {
            continue;
        }
        let q = if i == CELL_COUNT - 1 || mass <= p {
            1.0
        } else {
            (p / mass).clamp(0.0, 1.0)
        };
        let draw = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        out[i] = draw as f64;
        remaining -= draw;
        mass -= p;
    }
    out
}

/// Nonparametric bootstrap of every statistic. Resample `r` uses stream `r` of
/// a seed derived from `seed`, so the result does not depend on threading.
pub fn bootstrap_stderr(
    counts: &[f64; CELL_COUNT],
    protocol: Protocol,
    opts: &SummaryOptions,
) -> StdErrors {
    let n: f64 = counts.iter().sum();
    if opts.bootstrap_resamples < 2 || n <= 0.0 {
        return StdErrors::default();
    }
    let mut probs = [0.0; CELL_COUNT];
    for i in 0..CELL_COUNT {
        probs[i] = counts[i] / n;
    }
    let seed = derive_seed(opts.bootstrap_seed, DOMAIN_BOOTSTRAP, 0);
    let mut sum = [0.0; N_STATS];
    let mut sum_sq = [0.0; N_STATS];
    let mut finite = [0usize; N_STATS];
    for r in 0..opts.bootstrap_resamples {
        let mut rng = stream(seed, r as u64);
        let table = multinomial(n as u64, &probs, &mut rng);
        let est = Estimates::from_weights(&table, protocol, opts.beta, &opts.errors, opts.min_cell_count as f64);
        for (j, v) in est.values().into_iter().enumerate() {
            if v.is_finite() {
                sum[j] += v;
                sum_sq[j] += v * v;
                finite[j] += 1;
            }
        }
    }
    let mut se = [f64::NAN; N_STATS];
    for j in 0..N_STATS {
        let m = finite[j] as f64;
        if finite[j] >= 2 {
            let mean = sum[j] / m;
            se[j] = ((sum_sq[j] - m * mean * mean).max(0.0) / (m - 1.0)).sqrt();
        }
    }
    StdErrors::from_values(se)
}

/// Averages over the records, with λ_fb from the closed form and bootstrap
/// errors. Shots whose (k, y) cell is untrusted are left out of the I_QC
/// averages and counted in `n_iqc_excluded`.
pub fn ensemble_summary(
    records: &[ShotRecord],
    protocol: Protocol,
    opts: &SummaryOptions,
) -> Result<EnsembleSummary> {
    if records.is_empty() {
        return Err(Error::invalid("cannot summarize an empty ensemble"));
    }
    let counts = cell_counts(records);
    let plug = PlugIn::from_weights(&counts, protocol, opts.beta, opts.min_cell_count as f64);

    let mut sums = [0.0; 6];
    let mut used = 0u64;
    for r in records {
        let info = plug.info(r.cell());
        sums[0] += info.exp_bw_minus_ish;
        sums[2] += info.exp_bw;
        sums[4] += info.i_sh;
        sums[5] += info.beta_w;
        if let (Some(iqc), Some(e)) = (info.i_qc, info.exp_bw_minus_iqc) {
            sums[1] += e;
            sums[3] += iqc;
            used += 1;
        }
    }
    let n = records.len() as u64;
    let estimates = Estimates::finish(&plug, &opts.errors, sums, n as f64, used as f64);
    let stderr = bootstrap_stderr(&counts, protocol, opts);

    let mut warnings = Vec::new();
    if n > used {
        warnings.push(format!(
            "{} shots excluded from I_QC averages: their (k, y) cell has fewer than {} counts",
            n - used,
            opts.min_cell_count
        ));
    }
    for (name, v) in [
        ("avg_exp_sigma_ish", estimates.avg_exp_sigma_ish),
        ("avg_exp_sigma_iqc", estimates.avg_exp_sigma_iqc),
        ("mean_iqc", estimates.mean_iqc),
        ("mean_betaW", estimates.mean_beta_w),
        ("second_law_margin", estimates.second_law_margin),
    ] {
        if !v.is_finite() {
            warnings.push(format!("{name} is not finite ({v})"));
        }
    }

    Ok(EnsembleSummary {
        n_shots: n,
        n_iqc_excluded: n - used,
        protocol,
        beta_source: opts.beta.label().to_string(),
        estimates,
        stderr,
        bootstrap_resamples: opts.bootstrap_resamples,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondLawCheck {
    /// β⟨W⟩.
    pub lhs: f64,
    /// ⟨I_Sh⟩ + ln(1 − λ_fb).
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
    /// λ_fb = 1, so the bound is −∞.
    pub rhs_divergent: bool,
}

/// β⟨W⟩ ≤ ⟨I_Sh⟩ + ln(1 − λ_fb), accepted within three bootstrap errors of the
/// margin.
pub fn second_law_check(summary: &EnsembleSummary) -> SecondLawCheck {
    let lhs = summary.mean_beta_w;
    let rhs_divergent = summary.lambda_fb_theory >= 1.0;
    let rhs = summary.mean_ish + (1.0 - summary.lambda_fb_theory).ln();
    let margin = rhs - lhs;
    let se = if summary.stderr.second_law_margin.is_finite() {
        summary.stderr.second_law_margin
    } else {
        0.0
    };
    SecondLawCheck {
        lhs,
        rhs,
        margin,
        satisfied: !rhs_divergent && lhs <= rhs + 3.0 * se,
        rhs_divergent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use Outcome::{E, G};

    const P_E: f64 = 0.097;

    #[test]
    fn shannon_examples() {
        assert_abs_diff_eq!(shannon_info(G, &BinaryDist::new(0.5, 0.5)).unwrap(), 2f64.ln());
        assert_abs_diff_eq!(
            shannon_info(E, &BinaryDist::from_excited(P_E)).unwrap(),
            2.333,
            epsilon = 5e-4
        );
        assert_eq!(shannon_info(G, &BinaryDist::new(1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(shannon_info(E, &BinaryDist::new(1.0, 0.0)), Err(Divergent));
    }

    #[test]
    fn qc_info_examples() {
        let ish = -P_E.ln();
        assert_abs_diff_eq!(qc_mutual_info(1.0, P_E).unwrap(), ish, epsilon = 1e-15);
        assert_abs_diff_eq!(qc_mutual_info(0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(qc_mutual_info(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(qc_mutual_info(0.0, 0.5), Err(Divergent));
    }

    #[test]
    fn lambda_examples() {
        let beta = InverseTemperature::from_occupancy(1.0 - P_E, P_E).unwrap();
        let none = FeedbackErrorModel::none();
        for pk in [0.0, 0.2, 0.9] {
            let l = lambda_fb_theory(beta, &none, BinaryDist::from_excited(pk), BinaryDist::from_excited(0.3));
            assert_abs_diff_eq!(l, P_E, epsilon = 1e-12);
        }
        let zero_t = InverseTemperature::new(f64::INFINITY);
        assert_eq!(
            lambda_fb_theory(zero_t, &none, BinaryDist::from_excited(0.4), BinaryDist::from_excited(0.4)),
            0.0
        );
        let hot = InverseTemperature::new(0.0);
        assert_abs_diff_eq!(
            lambda_fb_theory(hot, &none, BinaryDist::from_excited(0.5), BinaryDist::from_excited(0.5)),
            0.5
        );
    }

    #[test]
    fn saturation_identity_is_exact() {
        // β⟨W⟩ = ⟨I_Sh⟩ + ln(1−λ_fb) for ideal projective feedback.
        let p = BinaryDist::from_excited(P_E);
        let eps = (p.g / p.e).ln();
        let bw = eps * p.e;
        let ish = -p.g * p.g.ln() - p.e * p.e.ln();
        let ln_surv = p.g.ln();
        assert_abs_diff_eq!(bw, 0.2164, epsilon = 2e-4);
        assert_abs_diff_eq!(ish, 0.3185, epsilon = 2e-4);
        assert_abs_diff_eq!(ln_surv, -0.1021, epsilon = 2e-4);
        assert_abs_diff_eq!(bw, ish + ln_surv, epsilon = 1e-12);
    }

    fn ideal_a_counts(n_e: f64, n_g: f64) -> [f64; CELL_COUNT] {
        let mut c = [0.0; CELL_COUNT];
        c[Cell::new(E, E, E, G).index()] = n_e;
        c[Cell::new(G, G, G, G).index()] = n_g;
        c
    }

    #[test]
    fn estimated_beta_makes_fluctuation_average_equal_ground_frequency() {
        let counts = ideal_a_counts(97.0, 903.0);
        let est = Estimates::from_weights(
            &counts,
            Protocol::A,
            BetaSource::Estimated,
            &FeedbackErrorModel::none(),
            10.0,
        );
        assert_abs_diff_eq!(est.avg_exp_sigma_ish, 0.903, epsilon = 1e-12);
        assert_abs_diff_eq!(est.second_law_margin, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.avg_exp_sigma_iqc, est.avg_exp_sigma_ish, epsilon = 1e-15);
    }

    #[test]
    fn records_and_table_paths_agree() {
        let mut records = Vec::new();
        let layout = [
            (Cell::new(E, E, E, G), 90),
            (Cell::new(E, G, E, E), 3),
            (Cell::new(G, G, G, G), 800),
            (Cell::new(G, E, G, E), 40),
            (Cell::new(G, E, E, G), 5),
            (Cell::new(E, G, G, G), 53),
        ];
        for (c, n) in layout {
            for _ in 0..n {
                records.push(ShotRecord::new(c.x, Some(c.k), Some(c.y), c.z, vec![]).unwrap());
            }
        }
        let beta = BetaSource::Configured(InverseTemperature::new(2.2));
        let opts = SummaryOptions::new(beta, FeedbackErrorModel::new(0.05, 0.1).unwrap()).with_bootstrap(0, 0);
        let s = ensemble_summary(&records, Protocol::B, &opts).unwrap();
        let t = Estimates::from_weights(&cell_counts(&records), Protocol::B, beta, &opts.errors, 10.0);
        assert_eq!(s.n_iqc_excluded, 3);
        for (a, b) in s.estimates.values().iter().zip(t.values()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn four_term_expansion_matches_estimator() {
        let mut counts = [0.0; CELL_COUNT];
        counts[Cell::new(E, E, E, G).index()] = 80.0;
        counts[Cell::new(E, E, E, E).index()] = 17.0;
        counts[Cell::new(G, G, G, G).index()] = 895.0;
        counts[Cell::new(G, G, G, E).index()] = 8.0;
        let beta = InverseTemperature::new(2.231);
        let est = Estimates::from_weights(
            &counts,
            Protocol::A,
            BetaSource::Configured(beta),
            &FeedbackErrorModel::none(),
            10.0,
        );
        let p_x = BinaryDist::new(0.903, 0.097);
        let table = [[895.0 / 903.0, 8.0 / 903.0], [80.0 / 97.0, 17.0 / 97.0]];
        let expanded = fluctuation_average_from_tables(beta, p_x, table);
        assert_abs_diff_eq!(est.avg_exp_sigma_ish, expanded, epsilon = 1e-12);
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut probs = [0.0; CELL_COUNT];
        probs[0] = 0.5;
        probs[5] = 0.3;
        probs[15] = 0.2;
        let mut rng = stream(1, 0);
        for _ in 0..100 {
            let t = multinomial(1000, &probs, &mut rng);
            assert_eq!(t.iter().sum::<f64>(), 1000.0);
            assert_eq!(t[1], 0.0);
        }
    }

    #[test]
    fn second_law_flags_divergent_bound() {
        let counts = ideal_a_counts(97.0, 903.0);
        let mut records = Vec::new();
        for c in Cell::all() {
            for _ in 0..counts[c.index()] as usize {
                records.push(ShotRecord::new(c.x, None, None, c.z, vec![]).unwrap());
            }
        }
        let opts = SummaryOptions::new(
            BetaSource::Configured(InverseTemperature::new(f64::NEG_INFINITY)),
            FeedbackErrorModel::none(),
        )
        .with_bootstrap(0, 0);
        let s = ensemble_summary(&records, Protocol::A, &opts).unwrap();
        let check = second_law_check(&s);
        assert!(check.rhs_divergent);
        assert!(!check.satisfied);
        assert!(ensemble_summary(&[], Protocol::A, &opts).is_err());
    }
}
