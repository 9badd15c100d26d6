//! Batch commands behind the `qdemon` binary: sweeps, single points and
//! validation, with their output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{OracleMode, RunConfig};
use crate::error::{Error, Result};
use crate::master_eq::exact_outcome_distribution;
use crate::protocol::{run_ensemble, write_csv};
use crate::rng::{derive_seed, DOMAIN_SWEEP_POINT};
use crate::thermo::{ensemble_summary, second_law_check, EnsembleSummary, Estimates, SecondLawCheck, SummaryOptions};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const SUMMARY_JSON: &str = "summary.json";
pub const RECORDS_CSV: &str = "records.csv";
pub const VALIDATION_JSON: &str = "validation.json";

/// Leading columns of the sweep table.
pub const SWEEP_COLUMNS: [&str; 20] = [
    "param",
    "avg_exp_bWmIsh",
    "avg_exp_bWmIqc",
    "avg_exp_bW",
    "mean_Iqc",
    "mean_Ish",
    "mean_bW",
    "lambda_fb",
    "eta",
    "se_avg_exp_bWmIsh",
    "se_avg_exp_bWmIqc",
    "se_avg_exp_bW",
    "se_mean_Iqc",
    "se_mean_Ish",
    "se_mean_bW",
    "se_eta",
    "second_law_margin",
    "se_second_law_margin",
    "beta_eps",
    "n_iqc_excluded",
];

/// Columns appended when the oracle is on.
pub const ORACLE_COLUMNS: [&str; 8] = [
    "oracle_avg_exp_bWmIsh",
    "oracle_avg_exp_bWmIqc",
    "oracle_avg_exp_bW",
    "oracle_mean_Iqc",
    "oracle_mean_Ish",
    "oracle_mean_bW",
    "oracle_eta",
    "oracle_second_law_margin",
];

/// Result of one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    /// Sweep-axis value, absent for a single run.
    pub param: Option<f64>,
    /// Seed of the shots and of the bootstrap.
    pub seed: u64,
    pub summary: EnsembleSummary,
    pub second_law: SecondLawCheck,
    /// Exact expectations from the population oracle.
    pub oracle: Option<Estimates>,
}

/// Simulates and summarizes one point; `records_out` receives the raw shots.
pub fn run_point(
    cfg: &RunConfig,
    param: Option<f64>,
    seed: u64,
    records_out: Option<&Path>,
) -> Result<PointResult> {
    cfg.check_statistics()?;
    let setup = cfg.setup(param)?;
    let ex = &setup.experiment;
    let records = run_ensemble(ex, cfg.n_shots, seed)?;
    if let Some(path) = records_out {
        write_csv(&records, fs::File::create(path)?)?;
    }
    let opts = SummaryOptions {
        min_cell_count: cfg.min_cell_count,
        ..SummaryOptions::new(cfg.beta_source(setup.beta), ex.errors)
    }
    .with_bootstrap(cfg.bootstrap_resamples, seed);
    let summary = ensemble_summary(&records, ex.protocol(), &opts)?;
    let oracle = match cfg.oracle_mode {
        OracleMode::On => Some(Estimates::exact(
            &exact_outcome_distribution(ex)?,
            setup.beta,
            &ex.errors,
        )),
        OracleMode::Off => None,
    };
    Ok(PointResult {
        param,
        seed,
        second_law: second_law_check(&summary),
        summary,
        oracle,
    })
}

/// Seed of grid point `index`.
pub fn point_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, DOMAIN_SWEEP_POINT, index as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub index: usize,
    pub param: f64,
    pub seed: u64,
}

/// Everything needed to regenerate a result file.
///
/// Row `i` of a sweep is reproduced by `qdemon single --config <config>
/// --param <points[i].param> --seed <points[i].seed>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    pub points: Vec<ManifestPoint>,
    pub files: Vec<String>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig, points: Vec<ManifestPoint>, files: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: cfg.master_seed,
            config_sha256: cfg.hash(),
            config: cfg.clone(),
            points,
            files,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<PointResult>,
    pub manifest: Manifest,
}

impl SweepOutput {
    /// Divergence and exclusion notices, one line per point and issue.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            for w in &r.summary.warnings {
                out.push(format!("point {i} (param = {}): {w}", r.param.unwrap_or(f64::NAN)));
            }
        }
        out
    }
}

/// One summary per grid point, in grid order. Shots of a point are spread
/// over the thread pool; points run one after another.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutput> {
    let spec = cfg.grid()?.clone();
    let mut rows = Vec::with_capacity(spec.grid.len());
    let mut points = Vec::with_capacity(spec.grid.len());
    for (i, &v) in spec.grid.iter().enumerate() {
        let seed = point_seed(cfg.master_seed, i);
        rows.push(run_point(cfg, Some(v), seed, None)?);
        points.push(ManifestPoint {
            index: i,
            param: v,
            seed,
        });
    }
    let manifest = Manifest::new("sweep", cfg, points, vec![SWEEP_CSV.into(), MANIFEST_JSON.into()]);
    Ok(SweepOutput { rows, manifest })
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// The sweep table as CSV text.
pub fn sweep_csv(rows: &[PointResult], with_oracle: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = SWEEP_COLUMNS.to_vec();
    if with_oracle {
        header.extend(ORACLE_COLUMNS);
    }
    w.write_record(&header)?;
    for r in rows {
        let s = &r.summary;
        let se = &s.stderr;
        let mut fields = vec![
            num(r.param.unwrap_or(f64::NAN)),
            num(s.avg_exp_sigma_ish),
            num(s.avg_exp_sigma_iqc),
            num(s.avg_exp_beta_w),
            num(s.mean_iqc),
            num(s.mean_ish),
            num(s.mean_beta_w),
            num(s.lambda_fb_theory),
            num(s.eta),
            num(se.avg_exp_sigma_ish),
            num(se.avg_exp_sigma_iqc),
            num(se.avg_exp_beta_w),
            num(se.mean_iqc),
            num(se.mean_ish),
            num(se.mean_beta_w),
            num(se.eta),
            num(s.second_law_margin),
            num(se.second_law_margin),
            num(s.beta_eps),
            s.n_iqc_excluded.to_string(),
        ];
        if with_oracle {
            match &r.oracle {
                Some(o) => fields.extend(
                    [
                        o.avg_exp_sigma_ish,
                        o.avg_exp_sigma_iqc,
                        o.avg_exp_beta_w,
                        o.mean_iqc,
                        o.mean_ish,
                        o.mean_beta_w,
                        o.eta,
                        o.second_law_margin,
                    ]
                    .map(num),
                ),
                None => fields.extend(std::iter::repeat_n(String::new(), ORACLE_COLUMNS.len())),
            }
        }
        w.write_record(&fields)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `sweep.csv` and `manifest.json` into `dir`.
pub fn write_sweep(out: &SweepOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(SWEEP_CSV);
    let with_oracle = out.manifest.config.oracle_mode == OracleMode::On;
    fs::write(&csv_path, sweep_csv(&out.rows, with_oracle)?)?;
    let manifest_path = dir.join(MANIFEST_JSON);
    write_json(&manifest_path, &out.manifest)?;
    Ok(vec![csv_path, manifest_path])
}

/// Output of `single`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleOutput {
    pub result: PointResult,
    pub manifest: Manifest,
}

/// One point at the configured parameters, or at `param` on the sweep axis.
/// With `dir` set, writes `summary.json`, `manifest.json` and, if enabled,
/// `records.csv`.
pub fn run_single(cfg: &RunConfig, param: Option<f64>, dir: Option<&Path>) -> Result<SingleOutput> {
    let records_path = match dir {
        Some(d) if cfg.output.write_records => {
            fs::create_dir_all(d)?;
            Some(d.join(RECORDS_CSV))
        }
        _ => None,
    };
    let result = run_point(cfg, param, cfg.master_seed, records_path.as_deref())?;
    let mut files = vec![SUMMARY_JSON.to_string(), MANIFEST_JSON.to_string()];
    if records_path.is_some() {
        files.push(RECORDS_CSV.into());
    }
    let points = param
        .map(|p| {
            vec![ManifestPoint {
                index: 0,
                param: p,
                seed: cfg.master_seed,
            }]
        })
        .unwrap_or_default();
    let manifest = Manifest::new("single", cfg, points, files);
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        write_json(&d.join(SUMMARY_JSON), &result)?;
        write_json(&d.join(MANIFEST_JSON), &manifest)?;
    }
    Ok(SingleOutput { result, manifest })
}

pub fn write_validation(report: &crate::validation::ValidationReport, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(VALIDATION_JSON);
    write_json(&path, report)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SweepAxis, SweepSpec};

    fn quick() -> RunConfig {
        RunConfig {
            n_shots: 2000,
            bootstrap_resamples: 50,
            sweep: Some(SweepSpec {
                axis: SweepAxis::BetaEps,
                grid: vec![-1.0, 0.0, 2.0],
            }),
            ..Default::default()
        }
    }

    #[test]
    fn sweep_table_layout() {
        let out = run_sweep(&quick()).unwrap();
        let text = sweep_csv(&out.rows, true).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with(
            "param,avg_exp_bWmIsh,avg_exp_bWmIqc,avg_exp_bW,mean_Iqc,mean_Ish,mean_bW,lambda_fb,eta,se_"
        ));
        assert!(header.ends_with("oracle_second_law_margin"));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("0,"));
        assert_eq!(out.manifest.points.len(), 3);
        assert_eq!(out.manifest.points[2].seed, point_seed(0, 2));
    }

    #[test]
    fn single_reproduces_a_sweep_row() {
        let cfg = quick();
        let out = run_sweep(&cfg).unwrap();
        let p = &out.manifest.points[2];
        let again = RunConfig {
            master_seed: p.seed,
            ..cfg
        };
        let single = run_single(&again, Some(p.param), None).unwrap();
        assert_eq!(single.result.summary, out.rows[2].summary);
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let cfg = RunConfig {
            n_shots: 10,
            ..Default::default()
        };
        assert!(matches!(run_single(&cfg, None, None), Err(Error::Config(_))));
    }
}
