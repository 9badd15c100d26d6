//! Monte-Carlo wave-function engine for a qubit with relaxation (L₀ = √Γ↓ σ⁻)
//! and excitation (L₁ = √Γ↑ σ⁺) jumps.
//!
//! The qubit is simulated in its rotating frame, so between pulses only the
//! anti-Hermitian part of the effective Hamiltonian and the jumps act.

use num_complex::Complex64;
use rand::Rng;

use crate::domain::{JumpEvent, JumpKind, Outcome, PhysicalParams, PureState};
use crate::error::{Error, Result};

/// Largest total jump probability accepted in one step.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.1;

/// Default time step: 1 ns.
pub const DEFAULT_DT_US: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    /// Time step in μs.
    pub dt_us: f64,
    /// Upper bound on dt as a fraction of T₁.
    pub max_dt_over_t1: f64,
    /// Fault injection for negative controls: jumps are applied without
    /// renormalization. Never set this outside validation tests.
    #[doc(hidden)]
    pub skip_jump_normalization: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt_us: DEFAULT_DT_US,
            max_dt_over_t1: 1e-3,
            skip_jump_normalization: false,
        }
    }
}

impl EvolutionConfig {
    pub fn with_dt(dt_us: f64) -> Self {
        EvolutionConfig {
            dt_us,
            ..Default::default()
        }
    }

    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        if !(self.dt_us.is_finite() && self.dt_us > 0.0) {
            return Err(Error::config(format!("time step {} μs must be positive", self.dt_us)));
        }
        if self.dt_us > self.max_dt_over_t1 * params.t1_us() {
            return Err(Error::config(format!(
                "time step {} μs exceeds {} × T1",
                self.dt_us, self.max_dt_over_t1
            )));
        }
        Ok(())
    }

    /// ⌈duration/dt⌉, tolerant to round-off in timeline arithmetic.
    pub fn steps_for(&self, duration_us: f64) -> u64 {
        let n = duration_us / self.dt_us;
        if n <= 0.0 {
            0
        } else {
            (n - 1e-6).ceil().max(0.0) as u64
        }
    }
}

fn step_probabilities(state: &PureState, params: &PhysicalParams, dt: f64) -> Result<(f64, f64)> {
    let dp_down = dt * params.gamma_down() * state.population_e();
    let dp_up = dt * params.gamma_up() * state.population_g();
    if dp_down + dp_up >= MAX_STEP_JUMP_PROBABILITY {
        return Err(Error::contract(format!(
            "jump probability {} per step is too large; reduce dt",
            dp_down + dp_up
        )));
    }
    Ok((dp_down, dp_up))
}

fn jump(state: &PureState, kind: JumpKind, normalize: bool, params: &PhysicalParams) -> PureState {
    let zero = Complex64::new(0.0, 0.0);
    match kind {
        // σ⁻ moves the excited amplitude onto |g⟩.
        JumpKind::Down => {
            let amp = if normalize {
                state.c_e / state.c_e.norm()
            } else {
                state.c_e * params.gamma_down().sqrt()
            };
            PureState { c_g: amp, c_e: zero }
        }
        JumpKind::Up => {
            let amp = if normalize {
                state.c_g / state.c_g.norm()
            } else {
                state.c_g * params.gamma_up().sqrt()
            };
            PureState { c_g: zero, c_e: amp }
        }
    }
}

/// One first-order MCWF step of length `dt_us`.
///
/// With δp₀ = dt·Γ↓|c_e|², δp₁ = dt·Γ↑|c_g|² and δp = δp₀ + δp₁, a uniform u is
/// drawn; for δp < u the amplitudes are damped by √(1−Γdt) and divided by
/// √(1−δp), otherwise jump k is applied with probability δp_k/δp. No random
/// number is consumed when δp = 0.
pub fn mcwf_step<R: Rng + ?Sized>(
    state: &PureState,
    params: &PhysicalParams,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Result<(PureState, Option<JumpKind>)> {
    state.check_normalized()?;
    let dt = config.dt_us;
    let (dp_down, dp_up) = step_probabilities(state, params, dt)?;
    let dp = dp_down + dp_up;
    if dp == 0.0 {
        return Ok((*state, None));
    }
    let u: f64 = rng.random();
    if dp < u {
        let scale = (1.0 - dp).sqrt();
        let next = PureState {
            c_g: state.c_g * ((1.0 - dt * params.gamma_up()).sqrt() / scale),
            c_e: state.c_e * ((1.0 - dt * params.gamma_down()).sqrt() / scale),
        };
        Ok((next, None))
    } else {
        // u ≤ δp, so u/δp selects the channel with probability δp_k/δp.
        let kind = if u < dp_down {
            JumpKind::Down
        } else {
            JumpKind::Up
        };
        Ok((jump(state, kind, !config.skip_jump_normalization, params), Some(kind)))
    }
}

/// Result of [`evolve`].
#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub state: PureState,
    pub jumps: Vec<JumpEvent>,
    /// Σ ⟨σ_z⟩ sampled at the start of every step.
    pub sigma_z_sum: f64,
    pub steps: u64,
}

/// Evolves `state` over ⌈duration/dt⌉ MCWF steps starting at protocol time
/// `t_start_us`.
///
/// While the state is an energy eigenstate the no-jump map leaves it
/// unchanged, so the number of quiet steps before the next jump is drawn from
/// the geometric law of the per-step rule in a single draw.
pub fn evolve<R: Rng + ?Sized>(
    state: &PureState,
    t_start_us: f64,
    duration_us: f64,
    params: &PhysicalParams,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Result<Evolution> {
    if duration_us.is_nan() || duration_us < 0.0 {
        return Err(Error::invalid(format!("negative evolution time {duration_us} μs")));
    }
    state.check_normalized()?;
    let dt = config.dt_us;
    let steps = config.steps_for(duration_us);
    let mut current = *state;
    let mut jumps = Vec::new();
    let mut sigma_z_sum = 0.0;
    let mut done: u64 = 0;

    while done < steps {
        let remaining = steps - done;
        match current.eigenstate() {
            Some(level) if !config.skip_jump_normalization => {
                let (rate, kind) = match level {
                    Outcome::E => (params.gamma_down(), JumpKind::Down),
                    Outcome::G => (params.gamma_up(), JumpKind::Up),
                };
                let z = current.sigma_z();
                let dp = rate * dt;
                if dp >= MAX_STEP_JUMP_PROBABILITY {
                    return Err(Error::contract(format!(
                        "jump probability {dp} per step is too large; reduce dt"
                    )));
                }
                if dp == 0.0 {
                    sigma_z_sum += remaining as f64 * z;
                    break;
                }
                let u: f64 = rng.random();
                let quiet = ((1.0 - u).ln() / (-dp).ln_1p()).floor();
                if quiet >= remaining as f64 {
                    sigma_z_sum += remaining as f64 * z;
                    break;
                }
                let quiet = quiet as u64;
                sigma_z_sum += (quiet + 1) as f64 * z;
                done += quiet + 1;
                current = jump(&current, kind, true, params);
                jumps.push(JumpEvent {
                    time_us: t_start_us + done as f64 * dt,
                    kind,
                });
            }
            _ => {
                sigma_z_sum += current.sigma_z();
                let (next, kind) = mcwf_step(&current, params, config, rng)?;
                done += 1;
                current = next;
                if let Some(kind) = kind {
                    jumps.push(JumpEvent {
                        time_us: t_start_us + done as f64 * dt,
                        kind,
                    });
                }
            }
        }
    }

    Ok(Evolution {
        state: current,
        jumps,
        sigma_z_sum,
        steps,
    })
}

/// Instantaneous π-pulse (σ_x).
pub fn apply_pi_pulse(state: &PureState) -> PureState {
    state.swapped()
}

/// State after ideal ground-state reset followed by a resonant rotation:
/// cos(θ/2)|g⟩ + sin(θ/2)|e⟩ with sin²(θ/2) = `p_e_target`.
pub fn prepare_initial(p_e_target: f64) -> Result<PureState> {
    PureState::from_excited_population(p_e_target)
}
