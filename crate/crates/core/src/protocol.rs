//! Timed pulse sequences and the shot runners built on them.
//!
//! Protocol A is the three-readout sequence where the demon acts on the first
//! TPM readout x. Protocol B inserts a variable-strength readout k (used for
//! the feedback decision) followed by a verifying projective readout y.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{JumpEvent, Outcome, PhysicalParams, PureState, ShotRecord};
use crate::error::{Error, Result};
use crate::measurement::{
    feedback_branch, feedback_readout, projective_readout, FeedbackErrorModel, ReadoutWindow,
};
use crate::rng::shot_stream;
use crate::trajectory::{evolve, prepare_initial, EvolutionConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
pub enum Protocol {
    A,
    B,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::A => write!(f, "A"),
            Protocol::B => write!(f, "B"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    InitReadout,
    Excite,
    ReadoutX,
    ReadoutK,
    ReadoutY,
    Feedback,
    ReadoutZ,
    Delay,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub kind: EventKind,
    pub start_us: f64,
    pub duration_us: f64,
}

impl TimedEvent {
    pub fn end_us(&self) -> f64 {
        self.start_us + self.duration_us
    }
}

/// Pulse widths and gaps from which the default timelines are assembled.
/// The gaps reproduce the 2.5 μs (A) and 4 μs (B) sequence lengths; they are
/// approximations of the published pulse diagrams.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineParams {
    pub init_readout_us: f64,
    pub init_to_excite_us: f64,
    pub pulse_us: f64,
    pub excite_to_x_us: f64,
    pub readout_us: f64,
    pub k_readout_us: f64,
    pub x_to_k_us: f64,
    pub k_to_y_us: f64,
    /// Feedback latency after the decision readout in protocol A.
    pub feedback_delay_us: f64,
    /// Gap between the end of y and the feedback pulse in protocol B.
    pub y_to_feedback_us: f64,
    pub feedback_to_z_us: f64,
}

impl Default for TimelineParams {
    fn default() -> Self {
        TimelineParams {
            init_readout_us: 0.5,
            init_to_excite_us: 0.3,
            pulse_us: 0.02,
            excite_to_x_us: 0.18,
            readout_us: 0.5,
            k_readout_us: 0.5,
            x_to_k_us: 0.3,
            k_to_y_us: 0.3,
            feedback_delay_us: 0.2,
            y_to_feedback_us: 0.1,
            feedback_to_z_us: 0.28,
        }
    }
}

impl TimelineParams {
    pub fn build(&self, protocol: Protocol) -> Result<ProtocolTimeline> {
        let mut events = Vec::new();
        let mut t = 0.0;
        let mut push = |kind, gap: f64, duration: f64, t: &mut f64| {
            *t += gap;
            events.push(TimedEvent {
                kind,
                start_us: *t,
                duration_us: duration,
            });
            *t += duration;
        };
        push(EventKind::InitReadout, 0.0, self.init_readout_us, &mut t);
        push(EventKind::Excite, self.init_to_excite_us, self.pulse_us, &mut t);
        push(EventKind::ReadoutX, self.excite_to_x_us, self.readout_us, &mut t);
        match protocol {
            Protocol::A => {
                push(EventKind::Delay, 0.0, self.feedback_delay_us, &mut t);
                push(EventKind::Feedback, 0.0, self.pulse_us, &mut t);
            }
            Protocol::B => {
                push(EventKind::ReadoutK, self.x_to_k_us, self.k_readout_us, &mut t);
                push(EventKind::ReadoutY, self.k_to_y_us, self.readout_us, &mut t);
                push(EventKind::Feedback, self.y_to_feedback_us, self.pulse_us, &mut t);
            }
        }
        push(EventKind::ReadoutZ, self.feedback_to_z_us, self.readout_us, &mut t);
        ProtocolTimeline::new(protocol, events)
    }
}

/// A validated, time-ordered pulse sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTimeline {
    protocol: Protocol,
    events: Vec<TimedEvent>,
}

impl ProtocolTimeline {
    pub fn new(protocol: Protocol, events: Vec<TimedEvent>) -> Result<Self> {
        let tl = ProtocolTimeline { protocol, events };
        tl.validate()?;
        Ok(tl)
    }

    pub fn default_for(protocol: Protocol) -> Self {
        TimelineParams::default()
            .build(protocol)
            .expect("default timeline is valid")
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    pub fn span_us(&self) -> f64 {
        self.events.last().map(|e| e.end_us()).unwrap_or(0.0)
    }

    fn position(&self, kind: EventKind) -> Option<usize> {
        self.events.iter().position(|e| e.kind == kind)
    }

    fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev_end = f64::NEG_INFINITY;
        for e in &self.events {
            if !(e.start_us.is_finite() && e.duration_us.is_finite() && e.duration_us >= 0.0) {
                return Err(Error::config(format!("event {:?} has invalid timing", e.kind)));
            }
            // Allow round-off from accumulated timeline arithmetic.
            if e.start_us < prev_end - 1e-9 {
                return Err(Error::config(format!(
                    "event {:?} at {} μs overlaps or precedes the previous event",
                    e.kind, e.start_us
                )));
            }
            prev_end = e.end_us();
        }
        for kind in [EventKind::Excite, EventKind::ReadoutX, EventKind::ReadoutZ] {
            if self.count(kind) != 1 {
                return Err(Error::config(format!("timeline needs exactly one {kind:?} event")));
            }
        }
        if self.count(EventKind::Feedback) > 1 || self.count(EventKind::InitReadout) > 1 {
            return Err(Error::config("at most one feedback and one init readout allowed"));
        }
        let pos = |k| self.position(k);
        let excite = pos(EventKind::Excite).unwrap();
        let x = pos(EventKind::ReadoutX).unwrap();
        let z = pos(EventKind::ReadoutZ).unwrap();
        if let Some(i) = pos(EventKind::InitReadout) {
            if i > excite {
                return Err(Error::config("init readout must precede the excitation pulse"));
            }
        }
        if !(excite < x && x < z) {
            return Err(Error::config("expected excite < readout_x < readout_z"));
        }
        let feedback = pos(EventKind::Feedback);
        match self.protocol {
            Protocol::A => {
                if self.count(EventKind::ReadoutK) + self.count(EventKind::ReadoutY) != 0 {
                    return Err(Error::config("protocol A has no k or y readouts"));
                }
                if let Some(f) = feedback {
                    if !(x < f && f < z) {
                        return Err(Error::config("feedback must sit between readout_x and readout_z"));
                    }
                }
            }
            Protocol::B => {
                if self.count(EventKind::ReadoutK) != 1 || self.count(EventKind::ReadoutY) != 1 {
                    return Err(Error::config("protocol B needs exactly one k and one y readout"));
                }
                let k = pos(EventKind::ReadoutK).unwrap();
                let y = pos(EventKind::ReadoutY).unwrap();
                if !(x < k && k < y && y < z) {
                    return Err(Error::config("expected readout_x < readout_k < readout_y < readout_z"));
                }
                if let Some(f) = feedback {
                    if !(y < f && f < z) {
                        return Err(Error::config("feedback must sit between readout_y and readout_z"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Everything a shot needs besides its random stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub params: PhysicalParams,
    pub timeline: ProtocolTimeline,
    pub errors: FeedbackErrorModel,
    /// Excited population prepared by the excitation pulse.
    pub p_e_init: f64,
    pub evolution: EvolutionConfig,
}

impl Experiment {
    pub fn new(
        params: PhysicalParams,
        timeline: ProtocolTimeline,
        errors: FeedbackErrorModel,
        p_e_init: f64,
        evolution: EvolutionConfig,
    ) -> Result<Self> {
        let ex = Experiment {
            params,
            timeline,
            errors,
            p_e_init,
            evolution,
        };
        ex.validate()?;
        Ok(ex)
    }

    /// Default timeline and time step for `protocol`.
    pub fn with_defaults(
        protocol: Protocol,
        params: PhysicalParams,
        errors: FeedbackErrorModel,
        p_e_init: f64,
    ) -> Result<Self> {
        Self::new(
            params,
            ProtocolTimeline::default_for(protocol),
            errors,
            p_e_init,
            EvolutionConfig::default(),
        )
    }

    pub fn protocol(&self) -> Protocol {
        self.timeline.protocol()
    }

    pub fn validate(&self) -> Result<()> {
        self.timeline.validate()?;
        self.errors.validate().map_err(|e| Error::config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.p_e_init) {
            return Err(Error::config(format!(
                "initial excited population {} outside [0, 1]",
                self.p_e_init
            )));
        }
        self.evolution.validate(&self.params)
    }
}

struct ShotWalker<'a, R: Rng + ?Sized> {
    ex: &'a Experiment,
    rng: &'a mut R,
    state: PureState,
    t: f64,
    jumps: Vec<JumpEvent>,
}

impl<'a, R: Rng + ?Sized> ShotWalker<'a, R> {
    fn advance_to(&mut self, t: f64) -> Result<()> {
        let gap = t - self.t;
        if gap > 0.0 {
            let ev = evolve(&self.state, self.t, gap, &self.ex.params, &self.ex.evolution, self.rng)?;
            self.state = ev.state;
            self.jumps.extend(ev.jumps);
        }
        self.t = self.t.max(t);
        Ok(())
    }

    fn readout(&mut self, e: &TimedEvent) -> Result<Outcome> {
        self.advance_to(e.start_us)?;
        let window = ReadoutWindow::new(e.duration_us)?;
        let r = projective_readout(
            &self.state,
            e.start_us,
            &window,
            &self.ex.params,
            &self.ex.evolution,
            self.rng,
        )?;
        self.state = r.state;
        self.jumps.extend(r.jumps);
        self.t = e.end_us();
        Ok(r.outcome)
    }

    fn hold(&mut self, e: &TimedEvent) -> Result<()> {
        self.advance_to(e.start_us)?;
        self.advance_to(e.end_us())
    }
}

fn run_timeline<R: Rng + ?Sized>(ex: &Experiment, rng: &mut R) -> Result<ShotRecord> {
    let protocol = ex.protocol();
    let mut w = ShotWalker {
        ex,
        rng,
        state: PureState::ground(),
        t: 0.0,
        jumps: Vec::new(),
    };
    let mut x = None;
    let mut k = None;
    let mut y = None;
    let mut z = None;
    let mut decision = None;

    for e in ex.timeline.events() {
        match e.kind {
            // Postselected initialization is an ideal reset right before the
            // excitation pulse, so nothing before it is simulated.
            EventKind::InitReadout => {}
            EventKind::Excite => {
                w.state = prepare_initial(ex.p_e_init)?;
                w.jumps.clear();
                w.t = e.start_us;
                w.advance_to(e.end_us())?;
            }
            EventKind::ReadoutX => {
                let out = w.readout(e)?;
                x = Some(out);
                if protocol == Protocol::A {
                    decision = Some(feedback_readout(out, &ex.errors, w.rng));
                }
            }
            EventKind::ReadoutK => {
                let truth = w.readout(e)?;
                let reported = feedback_readout(truth, &ex.errors, w.rng);
                k = Some(reported);
                decision = Some(reported);
            }
            EventKind::ReadoutY => y = Some(w.readout(e)?),
            EventKind::Feedback => {
                w.advance_to(e.start_us)?;
                let d = decision.ok_or_else(|| Error::config("feedback before any decision readout"))?;
                w.state = feedback_branch(d, &w.state);
                w.advance_to(e.end_us())?;
            }
            EventKind::ReadoutZ => z = Some(w.readout(e)?),
            EventKind::Delay => w.hold(e)?,
        }
    }

    let x = x.ok_or_else(|| Error::config("timeline has no x readout"))?;
    let z = z.ok_or_else(|| Error::config("timeline has no z readout"))?;
    ShotRecord::new(x, k, y, z, w.jumps)
}

/// One run of the three-readout sequence: prepare, read x, decide on x (through
/// the error channel), wait, conditional π-pulse, read z.
pub fn run_shot_a<R: Rng + ?Sized>(ex: &Experiment, rng: &mut R) -> Result<ShotRecord> {
    if ex.protocol() != Protocol::A {
        return Err(Error::config("run_shot_a needs a protocol A timeline"));
    }
    run_timeline(ex, rng)
}

/// One run of the five-readout sequence: prepare, read x, read k and pass it
/// through the error channel, read y, π-pulse conditional on k, read z.
pub fn run_shot_b<R: Rng + ?Sized>(ex: &Experiment, rng: &mut R) -> Result<ShotRecord> {
    if ex.protocol() != Protocol::B {
        return Err(Error::config("run_shot_b needs a protocol B timeline"));
    }
    run_timeline(ex, rng)
}

pub fn run_shot<R: Rng + ?Sized>(ex: &Experiment, rng: &mut R) -> Result<ShotRecord> {
    run_timeline(ex, rng)
}

/// `n_shots` independent shots; shot i uses stream i of `master_seed`, and the
/// returned vector is ordered by shot index whatever the thread count.
pub fn run_ensemble(ex: &Experiment, n_shots: usize, master_seed: u64) -> Result<Vec<ShotRecord>> {
    if n_shots == 0 {
        return Err(Error::invalid("an ensemble needs at least one shot"));
    }
    ex.validate()?;
    (0..n_shots as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = shot_stream(master_seed, i);
            run_timeline(ex, &mut rng)
        })
        .collect()
}

/// Column order of [`write_csv`].
pub const CSV_COLUMNS: [&str; 7] = ["shot", "x", "k", "y", "z", "work_hw", "n_jumps"];

fn label(o: Option<Outcome>) -> String {
    o.map(|o| o.as_char().to_string()).unwrap_or_default()
}

/// Writes records as CSV with columns `shot,x,k,y,z,work_hw,n_jumps`; absent k/y
/// are empty fields.
pub fn write_csv<W: Write>(records: &[ShotRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for (i, r) in records.iter().enumerate() {
        w.write_record([
            i.to_string(),
            label(Some(r.x)),
            label(r.k),
            label(r.y),
            label(Some(r.z)),
            r.work.to_string(),
            r.jumps.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonLine<'a> {
    shot: usize,
    x: Outcome,
    k: Option<Outcome>,
    y: Option<Outcome>,
    z: Outcome,
    work_hw: i8,
    jumps: &'a [JumpEvent],
}

/// One JSON object per line with keys `shot,x,k,y,z,work_hw,jumps` in that order.
pub fn write_jsonl<W: Write>(records: &[ShotRecord], mut out: W) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        let line = JsonLine {
            shot: i,
            x: r.x,
            k: r.k,
            y: r.y,
            z: r.z,
            work_hw: r.work,
            jumps: &r.jumps,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
