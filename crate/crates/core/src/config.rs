//! Run configuration: a single JSON document whose every field has a default.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{
    InverseTemperature, PhysicalParams, DEFAULT_BATH_TEMPERATURE_K, DEFAULT_EXCITED_POPULATION,
    DEFAULT_QUBIT_FREQ_GHZ, DEFAULT_T1_US,
};
use crate::error::{Error, Result};
use crate::measurement::FeedbackErrorModel;
use crate::protocol::{EventKind, Experiment, Protocol, ProtocolTimeline, TimelineParams};
use crate::thermo::{BetaSource, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_MIN_CELL_COUNT};
use crate::trajectory::{EvolutionConfig, DEFAULT_DT_US};

pub const DEFAULT_N_SHOTS: usize = 80_000;
/// Statistics commands refuse smaller ensembles.
pub const MIN_STATISTICS_SHOTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Qubit transition frequency ω_q/2π in GHz.
    pub qubit_freq_ghz: f64,
    /// Energy relaxation time in μs; null switches relaxation off.
    pub t1_us: Option<f64>,
    /// Bath temperature in K setting the ratio of upward to downward jumps.
    pub bath_temperature_k: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            qubit_freq_ghz: DEFAULT_QUBIT_FREQ_GHZ,
            t1_us: Some(DEFAULT_T1_US),
            bath_temperature_k: DEFAULT_BATH_TEMPERATURE_K,
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self) -> Result<PhysicalParams> {
        PhysicalParams::from_qubit_freq_ghz(
            self.qubit_freq_ghz,
            self.t1_us.unwrap_or(f64::INFINITY),
            self.bath_temperature_k,
        )
        .map_err(|e| Error::config(e.to_string()))
    }
}

/// Initial thermal state, given by exactly one of its parametrizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    ExcitedPopulation(f64),
    /// βħω_q; negative values give population inversion.
    BetaEps(f64),
    /// Initial qubit temperature in K; negative allowed.
    TemperatureK(f64),
    /// 1/T in 1/K; negative allowed.
    InverseTemperatureK(f64),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::ExcitedPopulation(DEFAULT_EXCITED_POPULATION)
    }
}

impl InitialState {
    pub fn beta(&self, params: &PhysicalParams) -> Result<InverseTemperature> {
        let beta = match *self {
            InitialState::ExcitedPopulation(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!("excited population {p} outside [0, 1]")));
                }
                InverseTemperature::from_occupancy(1.0 - p, p).map_err(|e| Error::config(e.to_string()))?
            }
            InitialState::BetaEps(b) => InverseTemperature::new(b),
            InitialState::TemperatureK(t) => params.beta_at_temperature(t),
            InitialState::InverseTemperatureK(u) => params.beta_at_inverse_temperature(u),
        };
        if beta.beta_eps.is_nan() {
            return Err(Error::config(format!("initial state {self:?} gives an undefined β")));
        }
        Ok(beta)
    }

    pub fn excited_population(&self, params: &PhysicalParams) -> Result<f64> {
        match *self {
            InitialState::ExcitedPopulation(p) => {
                self.beta(params)?;
                Ok(p)
            }
            _ => Ok(self.beta(params)?.canonical_occupancy().e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Initial qubit temperature in K.
    Temperature,
    /// Initial inverse temperature 1/T in 1/K.
    InverseTemperature,
    /// Initial βħω_q.
    BetaEps,
    /// Symmetric feedback error probability.
    EpsFb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BetaSourceKind {
    /// β of the prepared initial state.
    #[default]
    Configured,
    /// β from the frequencies of the first readout.
    Estimated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory receiving result files.
    pub dir: PathBuf,
    /// Also write per-shot records (`records.csv`) for `single`.
    pub write_records: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            write_records: false,
        }
    }
}

/// Faults for negative controls of `validate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    SkipJumpNormalization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub physics: PhysicsConfig,
    pub initial: InitialState,
    pub feedback_error: FeedbackErrorModel,
    /// false removes the conditional π-pulse.
    pub feedback_enabled: bool,
    pub timeline: TimelineParams,
    /// Integration time step in μs.
    pub dt_us: f64,
    pub sweep: Option<SweepSpec>,
    pub n_shots: usize,
    pub master_seed: u64,
    pub bootstrap_resamples: usize,
    pub beta_source: BetaSourceKind,
    /// Minimum (k, y) cell count before p̂(y|k) is trusted.
    pub min_cell_count: u64,
    pub oracle_mode: OracleMode,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[schemars(skip)]
    pub inject_fault: Option<Fault>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: Protocol::A,
            physics: PhysicsConfig::default(),
            initial: InitialState::default(),
            feedback_error: FeedbackErrorModel::none(),
            feedback_enabled: true,
            timeline: TimelineParams::default(),
            dt_us: DEFAULT_DT_US,
            sweep: None,
            n_shots: DEFAULT_N_SHOTS,
            master_seed: 0,
            bootstrap_resamples: DEFAULT_BOOTSTRAP_RESAMPLES,
            beta_source: BetaSourceKind::Configured,
            min_cell_count: DEFAULT_MIN_CELL_COUNT,
            oracle_mode: OracleMode::On,
            output: OutputConfig::default(),
            inject_fault: None,
        }
    }
}

/// Everything needed to simulate one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSetup {
    pub experiment: Experiment,
    /// β of the prepared state.
    pub beta: InverseTemperature,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.sweep {
            if s.grid.is_empty() {
                return Err(Error::config("sweep grid is empty"));
            }
            if let Some(v) = s.grid.iter().find(|v| !v.is_finite()) {
                return Err(Error::config(format!("sweep grid value {v} is not finite")));
            }
        }
        if self.n_shots == 0 {
            return Err(Error::config("n_shots must be positive"));
        }
        self.setup(None)?;
        if let Some(s) = &self.sweep {
            for &v in &s.grid {
                self.setup(Some(v))?;
            }
        }
        Ok(())
    }

    pub fn check_statistics(&self) -> Result<()> {
        if self.n_shots < MIN_STATISTICS_SHOTS {
            return Err(Error::config(format!(
                "n_shots = {} is below the minimum of {MIN_STATISTICS_SHOTS} for statistics",
                self.n_shots
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<&SweepSpec> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::config("no sweep specified in config"))
    }

    fn evolution(&self) -> EvolutionConfig {
        EvolutionConfig {
            skip_jump_normalization: self.inject_fault == Some(Fault::SkipJumpNormalization),
            ..EvolutionConfig::with_dt(self.dt_us)
        }
    }

    fn timeline(&self) -> Result<ProtocolTimeline> {
        let tl = self.timeline.build(self.protocol)?;
        if self.feedback_enabled {
            return Ok(tl);
        }
        let events = tl
            .events()
            .iter()
            .copied()
            .filter(|e| e.kind != EventKind::Feedback)
            .collect();
        ProtocolTimeline::new(self.protocol, events)
    }

    /// Experiment at the configured point, or at `value` of the sweep axis.
    pub fn setup(&self, value: Option<f64>) -> Result<PointSetup> {
        let params = self.physics.params()?;
        let mut initial = self.initial;
        let mut errors = self.feedback_error;
        if let Some(v) = value {
            match self.grid()?.axis {
                SweepAxis::Temperature => initial = InitialState::TemperatureK(v),
                SweepAxis::InverseTemperature => initial = InitialState::InverseTemperatureK(v),
                SweepAxis::BetaEps => initial = InitialState::BetaEps(v),
                SweepAxis::EpsFb => {
                    errors = FeedbackErrorModel::symmetric(v).map_err(|e| Error::config(e.to_string()))?
                }
            }
        }
        let beta = initial.beta(&params)?;
        let p_e = initial.excited_population(&params)?;
        let experiment = Experiment::new(params, self.timeline()?, errors, p_e, self.evolution())
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(PointSetup { experiment, beta })
    }

    pub fn beta_source(&self, beta: InverseTemperature) -> BetaSource {
        match self.beta_source {
            BetaSourceKind::Configured => BetaSource::Configured(beta),
            BetaSourceKind::Estimated => BetaSource::Estimated,
        }
    }
}

/// JSON Schema of [`RunConfig`].
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
}
