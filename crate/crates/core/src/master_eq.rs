//! Exact population oracle.
//!
//! Without dephasing or drive between pulses the master equation of the
//! relaxing qubit closes on the populations, which relax exponentially toward
//! p_∞ = Γ↑/(Γ↑+Γ↓) at rate 1/T₁. Propagating sub-normalized population
//! vectors through every branch of a timeline gives the outcome distribution
//! without sampling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{Cell, Outcome, PhysicalParams, CELL_COUNT};
use crate::error::{Error, Result};
use crate::measurement::FeedbackErrorModel;
use crate::protocol::{EventKind, Experiment, Protocol};

/// Qubit density matrix in the energy basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix2 {
    pub p_e: f64,
    /// ρ_eg; carried through relaxation but never created by the protocols.
    pub coherence: Complex64,
}

impl DensityMatrix2 {
    pub fn new(p_e: f64, coherence: Complex64) -> Result<Self> {
        let rho = DensityMatrix2 { p_e, coherence };
        if !(0.0..=1.0).contains(&p_e) {
            return Err(Error::invalid(format!("population {p_e} outside [0, 1]")));
        }
        if coherence.norm_sqr() > p_e * (1.0 - p_e) + 1e-15 {
            return Err(Error::invalid("density matrix is not positive semidefinite"));
        }
        Ok(rho)
    }

    pub fn diagonal(p_e: f64) -> Result<Self> {
        Self::new(p_e, Complex64::new(0.0, 0.0))
    }

    pub fn p_g(&self) -> f64 {
        1.0 - self.p_e
    }
}

fn decay(duration_us: f64, t1_us: f64) -> f64 {
    if t1_us.is_infinite() {
        1.0
    } else {
        (-duration_us / t1_us).exp()
    }
}

/// Closed-form relaxation: p_e(t) = p_∞ + (p_e(0) − p_∞)e^{−t/T₁}, with the
/// coherence damped at half the population rate.
pub fn relax(rho: &DensityMatrix2, duration_us: f64, params: &PhysicalParams) -> Result<DensityMatrix2> {
    if duration_us.is_nan() || duration_us < 0.0 {
        return Err(Error::invalid(format!("negative duration {duration_us} μs")));
    }
    let d = decay(duration_us, params.t1_us());
    let p_inf = params.stationary_excited();
    Ok(DensityMatrix2 {
        p_e: p_inf + (rho.p_e - p_inf) * d,
        coherence: rho.coherence * d.sqrt(),
    })
}

/// Populations as an unnormalized vector [weight in g, weight in e].
type Pops = [f64; 2];

fn relax_pops(v: Pops, duration_us: f64, params: &PhysicalParams) -> Pops {
    if duration_us <= 0.0 {
        return v;
    }
    let mass = v[0] + v[1];
    let d = decay(duration_us, params.t1_us());
    let p_inf = params.stationary_excited();
    let e = mass * p_inf + (v[1] - mass * p_inf) * d;
    [mass - e, e]
}

fn basis_pops(o: Outcome, weight: f64) -> Pops {
    match o {
        Outcome::G => [weight, 0.0],
        Outcome::E => [0.0, weight],
    }
}

fn add(a: Pops, b: Pops, scale: f64) -> Pops {
    [a[0] + scale * b[0], a[1] + scale * b[1]]
}

/// Splits a population vector by readout label.
///
/// The state is projected at the window start. A projected level keeps its
/// label unless it jumps during the first half of the window; the post-window
/// populations of the kept branch are exact, and the flipped branch takes the
/// remainder of the exact marginal. The only approximation is ignoring double
/// jumps within one window.
fn readout_split(v: Pops, width_us: f64, params: &PhysicalParams) -> [(Outcome, Pops); 2] {
    if width_us <= 0.0 {
        return [(Outcome::G, [v[0], 0.0]), (Outcome::E, [0.0, v[1]])];
    }
    let half = width_us / 2.0;
    let mut by_label = [[0.0; 2]; 2];
    for level in Outcome::ALL {
        let weight = v[level.index()];
        if weight == 0.0 {
            continue;
        }
        let rate = match level {
            Outcome::E => params.gamma_down(),
            Outcome::G => params.gamma_up(),
        };
        let keep = (-rate * half).exp();
        let kept = relax_pops(basis_pops(level, 1.0), half, params);
        let full = relax_pops(basis_pops(level, 1.0), width_us, params);
        let flipped = [
            (full[0] - keep * kept[0]).max(0.0),
            (full[1] - keep * kept[1]).max(0.0),
        ];
        by_label[level.index()] = add(by_label[level.index()], kept, weight * keep);
        let other = level.flipped().index();
        by_label[other] = add(by_label[other], flipped, weight);
    }
    [(Outcome::G, by_label[0]), (Outcome::E, by_label[1])]
}

#[derive(Clone, Copy, Debug)]
struct Branch {
    x: Option<Outcome>,
    k: Option<Outcome>,
    y: Option<Outcome>,
    z: Option<Outcome>,
    decision: Option<Outcome>,
    pops: Pops,
}

/// Exact probabilities of every joint outcome. Protocol A tuples are stored
/// with k = y = x, matching [`Cell::from_record`].
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    pub protocol: Protocol,
    pub probs: [f64; CELL_COUNT],
}

impl OutcomeDistribution {
    pub fn get(&self, cell: Cell) -> f64 {
        self.probs[cell.index()]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Nonzero cells in index order.
    pub fn support(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        Cell::all()
            .map(|c| (c, self.probs[c.index()]))
            .filter(|(_, p)| *p > 0.0)
    }

    pub fn marginal_x(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for c in Cell::all() {
            m[c.x.index()] += self.get(c);
        }
        m
    }

    pub fn marginal_z(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for c in Cell::all() {
            m[c.z.index()] += self.get(c);
        }
        m
    }
}

fn flip_channel(truth: Outcome, errors: &FeedbackErrorModel) -> [(Outcome, f64); 2] {
    let p = errors.flip_probability(truth);
    [(truth, 1.0 - p), (truth.flipped(), p)]
}

/// Enumerates all outcome tuples of the experiment by propagating populations
/// through projections, relaxation segments, the flip channel and the
/// feedback branch.
pub fn exact_outcome_distribution(ex: &Experiment) -> Result<OutcomeDistribution> {
    ex.validate()?;
    let protocol = ex.protocol();
    let params = &ex.params;
    let mut branches: Vec<Branch> = Vec::new();
    let mut t = 0.0;
    let mut started = false;

    let relax_all = |branches: &mut Vec<Branch>, dt: f64| {
        for b in branches.iter_mut() {
            b.pops = relax_pops(b.pops, dt, params);
        }
    };

    for e in ex.timeline.events() {
        if e.kind == EventKind::InitReadout {
            continue;
        }
        if e.kind == EventKind::Excite {
            branches = vec![Branch {
                x: None,
                k: None,
                y: None,
                z: None,
                decision: None,
                pops: [1.0 - ex.p_e_init, ex.p_e_init],
            }];
            relax_all(&mut branches, e.duration_us);
            t = e.end_us();
            started = true;
            continue;
        }
        if !started {
            return Err(Error::config("events before the excitation pulse"));
        }
        relax_all(&mut branches, e.start_us - t);
        match e.kind {
            EventKind::ReadoutX | EventKind::ReadoutK | EventKind::ReadoutY | EventKind::ReadoutZ => {
                let mut next = Vec::with_capacity(branches.len() * 4);
                for b in &branches {
                    for (label, pops) in readout_split(b.pops, e.duration_us, params) {
                        let mut nb = *b;
                        nb.pops = pops;
                        match e.kind {
                            EventKind::ReadoutX => {
                                nb.x = Some(label);
                                if protocol == Protocol::A {
                                    for (d, p) in flip_channel(label, &ex.errors) {
                                        let mut db = nb;
                                        db.decision = Some(d);
                                        db.pops = [pops[0] * p, pops[1] * p];
                                        next.push(db);
                                    }
                                    continue;
                                }
                            }
                            EventKind::ReadoutK => {
                                for (k, p) in flip_channel(label, &ex.errors) {
                                    let mut kb = nb;
                                    kb.k = Some(k);
                                    kb.decision = Some(k);
                                    kb.pops = [pops[0] * p, pops[1] * p];
                                    next.push(kb);
                                }
                                continue;
                            }
                            EventKind::ReadoutY => nb.y = Some(label),
                            _ => nb.z = Some(label),
                        }
                        next.push(nb);
                    }
                }
                branches = next;
                t = e.end_us();
            }
            EventKind::Feedback => {
                for b in branches.iter_mut() {
                    if b.decision == Some(Outcome::E) {
                        b.pops = [b.pops[1], b.pops[0]];
                    }
                }
                relax_all(&mut branches, e.duration_us);
                t = e.end_us();
            }
            EventKind::Delay => {
                relax_all(&mut branches, e.duration_us);
                t = e.end_us();
            }
            EventKind::InitReadout | EventKind::Excite => unreachable!(),
        }
    }

    let mut probs = [0.0; CELL_COUNT];
    for b in &branches {
        let x = b.x.ok_or_else(|| Error::config("timeline has no x readout"))?;
        let z = b.z.ok_or_else(|| Error::config("timeline has no z readout"))?;
        let cell = Cell::new(x, b.k.unwrap_or(x), b.y.unwrap_or(x), z);
        probs[cell.index()] += b.pops[0] + b.pops[1];
    }
    Ok(OutcomeDistribution { protocol, probs })
}
