//! Readout models: the QND projective readout, the noisy feedback readout and
//! the conditional π-pulse.

use rand::Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{JumpEvent, Outcome, PhysicalParams, PureState};
use crate::error::{Error, Result};
use crate::trajectory::{apply_pi_pulse, evolve, EvolutionConfig};

/// Default readout pulse width (μs).
pub const DEFAULT_READOUT_US: f64 = 0.5;

/// A readout pulse of `width_us`. A zero width is an instantaneous ideal
/// projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutWindow {
    pub width_us: f64,
}

impl ReadoutWindow {
    pub fn new(width_us: f64) -> Result<Self> {
        if !(width_us.is_finite() && width_us >= 0.0) {
            return Err(Error::invalid(format!("readout width {width_us} μs must be ≥ 0")));
        }
        Ok(ReadoutWindow { width_us })
    }
}

impl Default for ReadoutWindow {
    fn default() -> Self {
        ReadoutWindow {
            width_us: DEFAULT_READOUT_US,
        }
    }
}

/// Conditional flip probabilities of the feedback readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FeedbackErrorModel {
    /// ε(k=e | y=g): a ground state reported as excited.
    pub e_given_g: f64,
    /// ε(k=g | y=e): an excited state reported as ground.
    pub g_given_e: f64,
}

impl FeedbackErrorModel {
    pub fn new(e_given_g: f64, g_given_e: f64) -> Result<Self> {
        let m = FeedbackErrorModel {
            e_given_g,
            g_given_e,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn none() -> Self {
        FeedbackErrorModel {
            e_given_g: 0.0,
            g_given_e: 0.0,
        }
    }

    /// Equal flip probability for both labels; the joint error probability
    /// ε_fb then equals `eps` for any distribution of y.
    pub fn symmetric(eps: f64) -> Result<Self> {
        Self::new(eps, eps)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.e_given_g, self.g_given_e] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("error probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Probability of reporting the wrong label when the truth is `truth`.
    pub fn flip_probability(&self, truth: Outcome) -> f64 {
        match truth {
            Outcome::G => self.e_given_g,
            Outcome::E => self.g_given_e,
        }
    }

    /// Joint errors (ε(y=g,k=e), ε(y=e,k=g)) for a distribution of y.
    pub fn joint(&self, p_y_g: f64) -> (f64, f64) {
        (self.e_given_g * p_y_g, self.g_given_e * (1.0 - p_y_g))
    }

    pub fn is_perfect(&self) -> bool {
        self.e_given_g == 0.0 && self.g_given_e == 0.0
    }
}

impl Default for FeedbackErrorModel {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    pub outcome: Outcome,
    pub state: PureState,
    pub jumps: Vec<JumpEvent>,
}

/// Born-rule projection onto {|g⟩, |e⟩}. Eigenstates are returned without
/// consuming randomness.
pub fn project<R: Rng + ?Sized>(state: &PureState, rng: &mut R) -> Outcome {
    match state.eigenstate() {
        Some(o) => o,
        None => {
            let u: f64 = rng.random();
            if u < state.population_e() {
                Outcome::E
            } else {
                Outcome::G
            }
        }
    }
}

/// QND readout starting at `t_start_us`.
///
/// The state is projected at the window start, then evolved through the
/// window with jumps allowed. The reported label is the sign of the
/// time-averaged ⟨σ_z⟩ over the window; an exact tie keeps the projected
/// label.
pub fn projective_readout<R: Rng + ?Sized>(
    state: &PureState,
    t_start_us: f64,
    window: &ReadoutWindow,
    params: &PhysicalParams,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Result<Readout> {
    state.check_normalized()?;
    let projected = project(state, rng);
    let collapsed = PureState::basis(projected);
    if window.width_us == 0.0 {
        return Ok(Readout {
            outcome: projected,
            state: collapsed,
            jumps: Vec::new(),
        });
    }
    let ev = evolve(&collapsed, t_start_us, window.width_us, params, config, rng)?;
    let outcome = if ev.sigma_z_sum > 0.0 {
        Outcome::E
    } else if ev.sigma_z_sum < 0.0 {
        Outcome::G
    } else {
        projected
    };
    Ok(Readout {
        outcome,
        state: ev.state,
        jumps: ev.jumps,
    })
}

/// Classical noisy copy of `true_outcome`. No randomness is consumed when the
/// relevant flip probability is zero.
pub fn feedback_readout<R: Rng + ?Sized>(
    true_outcome: Outcome,
    errors: &FeedbackErrorModel,
    rng: &mut R,
) -> Outcome {
    let p = errors.flip_probability(true_outcome);
    if p <= 0.0 {
        return true_outcome;
    }
    let u: f64 = rng.random();
    if u < p {
        true_outcome.flipped()
    } else {
        true_outcome
    }
}

/// π-pulse when the demon reads `e`, identity otherwise.
pub fn feedback_branch(k: Outcome, state: &PureState) -> PureState {
    match k {
        Outcome::E => apply_pi_pulse(state),
        Outcome::G => *state,
    }
}
