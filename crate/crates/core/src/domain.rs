//! Value types shared by every part of the simulator.
//!
//! Internal units: energies in units of ħω_q, times in microseconds and rates
//! in 1/μs. Only [`PhysicalParams`] deals with SI quantities, and only at
//! construction.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

/// Qubit transition frequency of the reference device, ω_q/2π in GHz.
pub const DEFAULT_QUBIT_FREQ_GHZ: f64 = 6.6296;
/// Energy relaxation time of the reference device (μs).
pub const DEFAULT_T1_US: f64 = 24.0;
/// Effective temperature of the qubit equilibrated with the cavity field (K).
pub const DEFAULT_BATH_TEMPERATURE_K: f64 = 0.16;
/// Excited-state occupancy used for the feedback-error experiments.
pub const DEFAULT_EXCITED_POPULATION: f64 = 0.097;

const NORM_TOLERANCE: f64 = 1e-9;

/// Energy eigenstate label of a readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "e")]
    E,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::G, Outcome::E];

    /// Level energy in units of ħω_q, with E(g) = 0.
    pub fn energy(self) -> f64 {
        match self {
            Outcome::G => 0.0,
            Outcome::E => 1.0,
        }
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::G => Outcome::E,
            Outcome::E => Outcome::G,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Outcome::G => 0,
            Outcome::E => 1,
        }
    }

    pub fn from_index(i: usize) -> Outcome {
        if i == 0 {
            Outcome::G
        } else {
            Outcome::E
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Outcome::G => 'g',
            Outcome::E => 'e',
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A probability distribution over the two qubit levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryDist {
    pub g: f64,
    pub e: f64,
}

impl BinaryDist {
    pub fn new(g: f64, e: f64) -> Self {
        BinaryDist { g, e }
    }

    /// Distribution with P(e) = `p_e`.
    pub fn from_excited(p_e: f64) -> Self {
        BinaryDist { g: 1.0 - p_e, e: p_e }
    }

    pub fn get(&self, o: Outcome) -> f64 {
        match o {
            Outcome::G => self.g,
            Outcome::E => self.e,
        }
    }
}

/// Normalized pure state c_g|g⟩ + c_e|e⟩ of the qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState {
    pub c_g: Complex64,
    pub c_e: Complex64,
}

impl PureState {
    /// Builds a state from raw amplitudes, rejecting vectors whose norm deviates
    /// from one by more than 1e-9.
    pub fn new(c_g: Complex64, c_e: Complex64) -> Result<Self> {
        let s = PureState { c_g, c_e };
        s.check_normalized()?;
        Ok(s)
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(c_g: Complex64, c_e: Complex64) -> Result<Self> {
        let n = (c_g.norm_sqr() + c_e.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("cannot normalize a zero or non-finite state vector"));
        }
        Ok(PureState {
            c_g: c_g / n,
            c_e: c_e / n,
        })
    }

    pub fn ground() -> Self {
        PureState {
            c_g: Complex64::new(1.0, 0.0),
            c_e: Complex64::new(0.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        PureState {
            c_g: Complex64::new(0.0, 0.0),
            c_e: Complex64::new(1.0, 0.0),
        }
    }

    pub fn basis(o: Outcome) -> Self {
        match o {
            Outcome::G => Self::ground(),
            Outcome::E => Self::excited(),
        }
    }

    /// Real superposition cos(θ/2)|g⟩ + sin(θ/2)|e⟩ with excited population `p_e`.
    pub fn from_excited_population(p_e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_e) {
            return Err(Error::invalid(format!("excited population {p_e} outside [0, 1]")));
        }
        if p_e == 0.0 {
            return Ok(Self::ground());
        }
        if p_e == 1.0 {
            return Ok(Self::excited());
        }
        Ok(PureState {
            c_g: Complex64::new((1.0 - p_e).sqrt(), 0.0),
            c_e: Complex64::new(p_e.sqrt(), 0.0),
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_g.norm_sqr() + self.c_e.norm_sqr()
    }

    pub fn population_e(&self) -> f64 {
        self.c_e.norm_sqr()
    }

    pub fn population_g(&self) -> f64 {
        self.c_g.norm_sqr()
    }

    /// ⟨σ_z⟩ with σ_z|e⟩ = +|e⟩.
    pub fn sigma_z(&self) -> f64 {
        self.c_e.norm_sqr() - self.c_g.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn check_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "state norm² = {} deviates from 1",
                self.norm_sqr()
            )))
        }
    }

    /// The energy eigenstate this vector equals exactly, if any.
    pub fn eigenstate(&self) -> Option<Outcome> {
        if self.c_e == Complex64::new(0.0, 0.0) {
            Some(Outcome::G)
        } else if self.c_g == Complex64::new(0.0, 0.0) {
            Some(Outcome::E)
        } else {
            None
        }
    }

    /// σ_x action: swaps the two amplitudes.
    pub fn swapped(&self) -> Self {
        PureState {
            c_g: self.c_e,
            c_e: self.c_g,
        }
    }
}

/// Inverse temperature expressed as the dimensionless ratio ε = βħω_q.
///
/// Negative values describe population inversion; ±∞ are the two pure
/// eigenstates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InverseTemperature {
    pub beta_eps: f64,
}

impl InverseTemperature {
    pub fn new(beta_eps: f64) -> Self {
        InverseTemperature { beta_eps }
    }

    pub fn infinite_temperature() -> Self {
        InverseTemperature { beta_eps: 0.0 }
    }

    /// Partition function in the gauge E(g) = 0.
    pub fn partition_function(&self) -> f64 {
        1.0 + (-self.beta_eps).exp()
    }

    /// Canonical level populations. P(e) = e^{−ε}/(1+e^{−ε}) and P(g) = 1 − P(e).
    pub fn canonical_occupancy(&self) -> BinaryDist {
        // 1/(1+e^{ε}) is the same ratio written without overflow for ε → −∞.
        let p_e = 1.0 / (1.0 + self.beta_eps.exp());
        BinaryDist::from_excited(p_e)
    }

    /// Inverse of [`InverseTemperature::canonical_occupancy`]: ε = ln(p_g/p_e).
    pub fn from_occupancy(p_g: f64, p_e: f64) -> Result<Self> {
        if !(p_g.is_finite() && p_e.is_finite()) || p_g < 0.0 || p_e < 0.0 {
            return Err(Error::invalid(format!(
                "occupancies ({p_g}, {p_e}) must be finite and non-negative"
            )));
        }
        if p_g == 0.0 && p_e == 0.0 {
            return Err(Error::invalid("both occupancies are zero"));
        }
        if (p_g + p_e - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "occupancies ({p_g}, {p_e}) do not sum to one"
            )));
        }
        let beta_eps = if p_e == 0.0 {
            f64::INFINITY
        } else if p_g == 0.0 {
            f64::NEG_INFINITY
        } else {
            (p_g / p_e).ln()
        };
        Ok(InverseTemperature { beta_eps })
    }
}

/// Convenience wrapper for [`InverseTemperature::from_occupancy`].
pub fn beta_from_occupancy(p_g: f64, p_e: f64) -> Result<InverseTemperature> {
    InverseTemperature::from_occupancy(p_g, p_e)
}

/// Convenience wrapper for [`InverseTemperature::canonical_occupancy`].
pub fn canonical_occupancy(beta: InverseTemperature) -> BinaryDist {
    beta.canonical_occupancy()
}

/// Device and bath parameters. Rates are derived from (T₁, bath temperature)
/// by detailed balance and stored in 1/μs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    omega_q: f64,
    t1_us: f64,
    temp_bath: f64,
    gamma_up: f64,
    gamma_down: f64,
}

impl PhysicalParams {
    /// `omega_q` in rad/s, `t1_us` in μs (may be +∞ to disable relaxation),
    /// `temp_bath` in K (0 disables upward jumps).
    pub fn new(omega_q: f64, t1_us: f64, temp_bath: f64) -> Result<Self> {
        if !(omega_q.is_finite() && omega_q > 0.0) {
            return Err(Error::invalid(format!("qubit angular frequency {omega_q} must be positive")));
        }
        if t1_us.is_nan() || t1_us <= 0.0 {
            return Err(Error::invalid(format!("T1 = {t1_us} μs must be positive")));
        }
        if temp_bath.is_nan() || temp_bath < 0.0 {
            return Err(Error::invalid(format!(
                "bath temperature {temp_bath} K must be non-negative"
            )));
        }
        let theta = HBAR * omega_q / K_B;
        let ratio = if temp_bath == 0.0 {
            0.0
        } else {
            (-theta / temp_bath).exp()
        };
        let total = 1.0 / t1_us;
        let gamma_down = total / (1.0 + ratio);
        let gamma_up = total * ratio / (1.0 + ratio);
        Ok(PhysicalParams {
            omega_q,
            t1_us,
            temp_bath,
            gamma_up,
            gamma_down,
        })
    }

    pub fn from_qubit_freq_ghz(freq_ghz: f64, t1_us: f64, temp_bath: f64) -> Result<Self> {
        Self::new(2.0 * std::f64::consts::PI * freq_ghz * 1e9, t1_us, temp_bath)
    }

    /// Reference device at the default bath temperature.
    pub fn reference() -> Self {
        Self::from_qubit_freq_ghz(DEFAULT_QUBIT_FREQ_GHZ, DEFAULT_T1_US, DEFAULT_BATH_TEMPERATURE_K)
            .expect("reference parameters are valid")
    }

    /// Reference device with relaxation switched off.
    pub fn without_relaxation() -> Self {
        Self::from_qubit_freq_ghz(DEFAULT_QUBIT_FREQ_GHZ, f64::INFINITY, DEFAULT_BATH_TEMPERATURE_K)
            .expect("reference parameters are valid")
    }

    pub fn with_t1(&self, t1_us: f64) -> Result<Self> {
        Self::new(self.omega_q, t1_us, self.temp_bath)
    }

    pub fn with_bath_temperature(&self, temp_bath: f64) -> Result<Self> {
        Self::new(self.omega_q, self.t1_us, temp_bath)
    }

    pub fn omega_q(&self) -> f64 {
        self.omega_q
    }

    pub fn t1_us(&self) -> f64 {
        self.t1_us
    }

    pub fn temp_bath(&self) -> f64 {
        self.temp_bath
    }

    /// Excitation rate Γ↑ (1/μs).
    pub fn gamma_up(&self) -> f64 {
        self.gamma_up
    }

    /// Relaxation rate Γ↓ (1/μs).
    pub fn gamma_down(&self) -> f64 {
        self.gamma_down
    }

    pub fn relaxes(&self) -> bool {
        self.gamma_up > 0.0 || self.gamma_down > 0.0
    }

    /// ħω_q/k_B in kelvin.
    pub fn level_temperature(&self) -> f64 {
        HBAR * self.omega_q / K_B
    }

    /// ε = ħω_q/(k_B T) for a temperature in kelvin (negative allowed).
    pub fn beta_at_temperature(&self, temperature_k: f64) -> InverseTemperature {
        InverseTemperature::new(self.level_temperature() / temperature_k)
    }

    /// ε for an inverse temperature given in 1/K.
    pub fn beta_at_inverse_temperature(&self, inv_temperature: f64) -> InverseTemperature {
        InverseTemperature::new(self.level_temperature() * inv_temperature)
    }

    /// Stationary excited population Γ↑/(Γ↑+Γ↓); zero when relaxation is off.
    pub fn stationary_excited(&self) -> f64 {
        let total = self.gamma_up + self.gamma_down;
        if total == 0.0 {
            0.0
        } else {
            self.gamma_up / total
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    Up,
    Down,
}

/// A quantum jump at time `time_us` (μs, protocol clock).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time_us: f64,
    pub kind: JumpKind,
}

/// Outcomes of one protocol run. `k` and `y` are present only for the
/// five-readout protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub x: Outcome,
    pub k: Option<Outcome>,
    pub y: Option<Outcome>,
    pub z: Outcome,
    /// Extracted work E(x) − E(z) in units of ħω_q.
    pub work: i8,
    pub jumps: Vec<JumpEvent>,
}

/// E(x) − E(z) in units of ħω_q.
pub fn work_from(x: Outcome, z: Outcome) -> i8 {
    (x.energy() - z.energy()) as i8
}

impl ShotRecord {
    pub fn new(
        x: Outcome,
        k: Option<Outcome>,
        y: Option<Outcome>,
        z: Outcome,
        jumps: Vec<JumpEvent>,
    ) -> Result<Self> {
        if k.is_some() != y.is_some() {
            return Err(Error::invalid("k and y must be both present or both absent"));
        }
        Ok(ShotRecord {
            x,
            k,
            y,
            z,
            work: work_from(x, z),
            jumps,
        })
    }

    /// Re-derives the work from (x, z) and checks the k/y pairing.
    pub fn is_consistent(&self) -> bool {
        self.work == work_from(self.x, self.z) && self.k.is_some() == self.y.is_some()
    }

    pub fn cell(&self) -> Cell {
        Cell::from_record(self)
    }
}

/// One joint outcome (x, k, y, z). Records of the three-readout protocol are
/// mapped onto k = y = x, which is exactly how the estimators treat them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub x: Outcome,
    pub k: Outcome,
    pub y: Outcome,
    pub z: Outcome,
}

pub const CELL_COUNT: usize = 16;

impl Cell {
    pub fn new(x: Outcome, k: Outcome, y: Outcome, z: Outcome) -> Self {
        Cell { x, k, y, z }
    }

    pub fn from_record(r: &ShotRecord) -> Self {
        Cell {
            x: r.x,
            k: r.k.unwrap_or(r.x),
            y: r.y.unwrap_or(r.x),
            z: r.z,
        }
    }

    pub fn index(&self) -> usize {
        (self.x.index() << 3) | (self.k.index() << 2) | (self.y.index() << 1) | self.z.index()
    }

    pub fn from_index(i: usize) -> Self {
        Cell {
            x: Outcome::from_index((i >> 3) & 1),
            k: Outcome::from_index((i >> 2) & 1),
            y: Outcome::from_index((i >> 1) & 1),
            z: Outcome::from_index(i & 1),
        }
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        (0..CELL_COUNT).map(Cell::from_index)
    }

    pub fn work(&self) -> i8 {
        work_from(self.x, self.z)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.x, self.k, self.y, self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn beta_from_occupancy_examples() {
        assert_eq!(beta_from_occupancy(0.5, 0.5).unwrap().beta_eps, 0.0);
        let b = beta_from_occupancy(0.903, 0.097).unwrap().beta_eps;
        assert_abs_diff_eq!(b, 2.231, epsilon = 5e-4);
        let b = beta_from_occupancy(0.097, 0.903).unwrap().beta_eps;
        assert_abs_diff_eq!(b, -2.231, epsilon = 5e-4);
        assert_eq!(beta_from_occupancy(1.0, 0.0).unwrap().beta_eps, f64::INFINITY);
        assert_eq!(beta_from_occupancy(0.0, 1.0).unwrap().beta_eps, f64::NEG_INFINITY);
    }

    #[test]
    fn beta_from_occupancy_rejects_bad_input() {
        assert!(matches!(beta_from_occupancy(0.0, 0.0), Err(Error::InvalidInput(_))));
        assert!(beta_from_occupancy(0.6, 0.6).is_err());
        assert!(beta_from_occupancy(-0.1, 1.1).is_err());
    }

    #[test]
    fn canonical_occupancy_examples() {
        let p = InverseTemperature::new(0.0).canonical_occupancy();
        assert_eq!((p.g, p.e), (0.5, 0.5));
        let p = InverseTemperature::new(f64::INFINITY).canonical_occupancy();
        assert_eq!((p.g, p.e), (1.0, 0.0));
        let p = InverseTemperature::new(f64::NEG_INFINITY).canonical_occupancy();
        assert_eq!((p.g, p.e), (0.0, 1.0));

        // 0.14 K with ħω_q/k_B ≈ 0.318 K.
        let params = PhysicalParams::reference();
        assert_abs_diff_eq!(params.level_temperature(), 0.3182, epsilon = 1e-4);
        let p = params.beta_at_temperature(0.14).canonical_occupancy();
        assert_abs_diff_eq!(p.e, 0.0934, epsilon = 5e-4);
    }

    #[test]
    fn detailed_balance_of_reference_rates() {
        let p = PhysicalParams::reference();
        assert_abs_diff_eq!(p.gamma_up() + p.gamma_down(), 1.0 / 24.0, epsilon = 1e-15);
        let expected = (-p.level_temperature() / 0.16).exp();
        assert_abs_diff_eq!(p.gamma_up() / p.gamma_down(), expected, epsilon = 1e-12);
        let cold = p.with_bath_temperature(0.0).unwrap();
        assert_eq!(cold.gamma_up(), 0.0);
        let frozen = p.with_t1(f64::INFINITY).unwrap();
        assert!(!frozen.relaxes());
        assert!(p.with_t1(0.0).is_err());
        assert!(p.with_bath_temperature(-1.0).is_err());
    }

    #[test]
    fn cell_index_round_trip() {
        for i in 0..CELL_COUNT {
            assert_eq!(Cell::from_index(i).index(), i);
        }
    }

    #[test]
    fn shot_record_pairs_k_and_y() {
        assert!(ShotRecord::new(Outcome::E, Some(Outcome::E), None, Outcome::G, vec![]).is_err());
        let r = ShotRecord::new(Outcome::E, None, None, Outcome::G, vec![]).unwrap();
        assert_eq!(r.work, 1);
        assert!(r.is_consistent());
        let r = ShotRecord::new(Outcome::G, None, None, Outcome::E, vec![]).unwrap();
        assert_eq!(r.work, -1);
    }

    proptest! {
        #[test]
        fn occupancy_round_trip(eps in -10.0f64..10.0) {
            let p = InverseTemperature::new(eps).canonical_occupancy();
            prop_assert_eq!(p.g + p.e, 1.0);
            let back = beta_from_occupancy(p.g, p.e).unwrap().beta_eps;
            prop_assert!((back - eps).abs() <= 1e-9);
        }

        #[test]
        fn detailed_balance_any_construction(t1 in 0.1f64..1e3, temp in 0.0f64..2.0, f in 1.0f64..10.0) {
            let p = PhysicalParams::from_qubit_freq_ghz(f, t1, temp).unwrap();
            prop_assert!(p.gamma_up() >= 0.0 && p.gamma_down() >= 0.0);
            prop_assert!((p.gamma_up() + p.gamma_down() - 1.0 / t1).abs() <= 1e-12 / t1);
            let ratio = if temp == 0.0 { 0.0 } else { (-p.level_temperature() / temp).exp() };
            prop_assert!((p.gamma_up() / p.gamma_down() - ratio).abs() <= 1e-12);
        }
    }
}
