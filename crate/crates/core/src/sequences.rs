//! Pulse-sequence intermediate representation, its line-oriented text
//! format, and builders for the standard experiment templates.
//!
//! A sequence is an ordered list of timed segments. Each segment carries the
//! set of continuously active drives for its duration; ideal instantaneous
//! operations (state preparation, rotations, dephasing) are markers attached
//! to segment boundaries. Exactly one readout closes every sequence.
//!
//! # Text format
//!
//! One instruction per line, `#` starts a comment:
//!
//! ```text
//! name <token>                 optional sequence name
//! bind <key> <value>           optional swept-parameter metadata
//! prep <A|B> <|0>||+1>||-1>||B>||D>>
//! rot <A|B> <axis> <angle_rad>
//! dephase <A|B> <m1> <m2>      m ∈ {0, +1, -1}
//! wait <duration_us>
//! segment <duration_us>
//!   drive <A|B> <plus|minus> <rabi_MHz> [det <MHz>] [phase <rad>]
//! end
//! read <A|B> <P0|P+1|P-1|PB|PD>
//! ```
//!
//! Rotation axes combine a Pauli axis with a two-level subspace: `x+ y+ z+`
//! act on {|0⟩, |+1⟩}, `x- y- z-` on {|0⟩, |−1⟩}, and `xq yq zq` on the
//! double-quantum manifold {|+1⟩, |−1⟩}. `drive` lines are only valid inside
//! a `segment … end` block; `wait` is shorthand for a driveless segment.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DriveSpec, Spin, Transition};
use crate::real::Real;
use crate::spinops::{subspace_pauli, ComplexMatrix, Level, PauliAxis, QutritState};

/// Sensing basis of the probe spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Sq,
    Dq,
}

/// Two-level subspace a rotation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    /// {|0⟩, |+1⟩}
    Plus,
    /// {|0⟩, |−1⟩}
    Minus,
    /// {|+1⟩, |−1⟩}
    Dq,
}

impl Subspace {
    /// (upper, lower) levels defining the subspace Pauli operators.
    pub fn levels(self) -> (Level, Level) {
        match self {
            Subspace::Plus => (Level::Plus1, Level::Zero),
            Subspace::Minus => (Level::Minus1, Level::Zero),
            Subspace::Dq => (Level::Plus1, Level::Minus1),
        }
    }
}

/// Rotation axis token: Pauli axis on a subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotAxis {
    pub pauli: PauliAxis,
    pub subspace: Subspace,
}

impl RotAxis {
    pub fn token(self) -> &'static str {
        match (self.pauli, self.subspace) {
            (PauliAxis::X, Subspace::Plus) => "x+",
            (PauliAxis::Y, Subspace::Plus) => "y+",
            (PauliAxis::Z, Subspace::Plus) => "z+",
            (PauliAxis::X, Subspace::Minus) => "x-",
            (PauliAxis::Y, Subspace::Minus) => "y-",
            (PauliAxis::Z, Subspace::Minus) => "z-",
            (PauliAxis::X, Subspace::Dq) => "xq",
            (PauliAxis::Y, Subspace::Dq) => "yq",
            (PauliAxis::Z, Subspace::Dq) => "zq",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        let (pauli, subspace) = match tok {
            "x+" => (PauliAxis::X, Subspace::Plus),
            "y+" => (PauliAxis::Y, Subspace::Plus),
            "z+" => (PauliAxis::Z, Subspace::Plus),
            "x-" => (PauliAxis::X, Subspace::Minus),
            "y-" => (PauliAxis::Y, Subspace::Minus),
            "z-" => (PauliAxis::Z, Subspace::Minus),
            "xq" => (PauliAxis::X, Subspace::Dq),
            "yq" => (PauliAxis::Y, Subspace::Dq),
            "zq" => (PauliAxis::Z, Subspace::Dq),
            _ => return None,
        };
        Some(Self { pauli, subspace })
    }

    /// Generator σ of the rotation exp(−i θ/2 σ) as a 3×3 matrix.
    pub fn generator<R: Real>(self) -> ComplexMatrix<R> {
        let (upper, lower) = self.subspace.levels();
        subspace_pauli(self.pauli, upper, lower)
    }
}

/// State label for ideal preparation markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StateLabel {
    Zero,
    Plus1,
    Minus1,
    B,
    D,
}

impl StateLabel {
    pub fn token(self) -> &'static str {
        match self {
            StateLabel::Zero => "|0>",
            StateLabel::Plus1 => "|+1>",
            StateLabel::Minus1 => "|-1>",
            StateLabel::B => "|B>",
            StateLabel::D => "|D>",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "|0>" => Some(StateLabel::Zero),
            "|+1>" => Some(StateLabel::Plus1),
            "|-1>" => Some(StateLabel::Minus1),
            "|B>" => Some(StateLabel::B),
            "|D>" => Some(StateLabel::D),
            _ => None,
        }
    }

    pub fn to_state<R: Real>(self) -> QutritState<R> {
        match self {
            StateLabel::Zero => QutritState::ket(Level::Zero),
            StateLabel::Plus1 => QutritState::ket(Level::Plus1),
            StateLabel::Minus1 => QutritState::ket(Level::Minus1),
            StateLabel::B => QutritState::ket_b(),
            StateLabel::D => QutritState::ket_d(),
        }
    }
}

/// Readout projector name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ProjectorLabel {
    P0,
    PPlus1,
    PMinus1,
    PB,
    PD,
}

impl ProjectorLabel {
    pub fn token(self) -> &'static str {
        match self {
            ProjectorLabel::P0 => "P0",
            ProjectorLabel::PPlus1 => "P+1",
            ProjectorLabel::PMinus1 => "P-1",
            ProjectorLabel::PB => "PB",
            ProjectorLabel::PD => "PD",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "P0" => Some(ProjectorLabel::P0),
            "P+1" => Some(ProjectorLabel::PPlus1),
            "P-1" => Some(ProjectorLabel::PMinus1),
            "PB" => Some(ProjectorLabel::PB),
            "PD" => Some(ProjectorLabel::PD),
            _ => None,
        }
    }

    /// Single-spin 3×3 projector.
    pub fn to_matrix3<R: Real>(self) -> ComplexMatrix<R> {
        let state = match self {
            ProjectorLabel::P0 => QutritState::ket(Level::Zero),
            ProjectorLabel::PPlus1 => QutritState::ket(Level::Plus1),
            ProjectorLabel::PMinus1 => QutritState::ket(Level::Minus1),
            ProjectorLabel::PB => QutritState::ket_b(),
            ProjectorLabel::PD => QutritState::ket_d(),
        };
        state.projector()
    }
}

/// Ideal instantaneous operation at a segment boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Marker<R> {
    /// Replace the named spin's state.
    Prep { spin: Spin, state: StateLabel },
    /// Unitary rotation exp(−i θ/2 σ_axis) on a two-level subspace.
    Rot { spin: Spin, axis: RotAxis, angle: R },
    /// Project away coherences of the named level pair (ideal dephasing).
    Dephase { spin: Spin, m1: Level, m2: Level },
}

/// Final projective readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Readout {
    pub spin: Spin,
    pub projector: ProjectorLabel,
}

/// One timed segment: boundary markers applied at its start, then the listed
/// drives active for `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<R> {
    pub markers: Vec<Marker<R>>,
    pub duration: R,
    pub drives: Vec<DriveSpec<R>>,
}

impl<R: Real> Segment<R> {
    pub fn wait(duration: R) -> Self {
        Self { markers: Vec::new(), duration, drives: Vec::new() }
    }
}

/// An ordered, immutable pulse sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence<R> {
    pub name: String,
    /// Swept-parameter metadata (key, value).
    pub bindings: Vec<(String, R)>,
    pub segments: Vec<Segment<R>>,
    /// Markers applied after the last segment, before readout.
    pub final_markers: Vec<Marker<R>>,
    pub readout: Readout,
}

impl<R: Real> PulseSequence<R> {
    pub fn total_duration(&self) -> R {
        self.segments.iter().fold(R::zero(), |acc, s| acc + s.duration)
    }

    /// Check the structural invariants: nonnegative finite durations and
    /// finite drive parameters. Several tones may share a (spin, transition)
    /// pair; the static rotating-frame Hamiltonian rejects that, but the
    /// propagator integrates such segments through their beat envelope.
    pub fn validate(&self) -> Result<()> {
        let total = self.total_duration();
        if !total.is_finite() {
            return Err(Error::invalid("sequence has non-finite total duration"));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.duration >= R::zero()) || !seg.duration.is_finite() {
                return Err(Error::invalid(format!(
                    "segment {i} has invalid duration {}",
                    seg.duration
                )));
            }
            for d in &seg.drives {
                d.validate()?;
            }
        }
        Ok(())
    }

    /// Render to the line-oriented text format. `parse(render(seq)) == seq`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            let _ = writeln!(out, "name {}", self.name);
        }
        for (key, value) in &self.bindings {
            let _ = writeln!(out, "bind {} {}", key, value);
        }
        for seg in &self.segments {
            for m in &seg.markers {
                render_marker(&mut out, m);
            }
            if seg.drives.is_empty() {
                let _ = writeln!(out, "wait {}", seg.duration);
            } else {
                let _ = writeln!(out, "segment {}", seg.duration);
                for d in &seg.drives {
                    let _ = write!(
                        out,
                        "  drive {} {} {}",
                        d.spin.label(),
                        d.transition.label(),
                        d.rabi
                    );
                    if !d.detuning.is_zero() {
                        let _ = write!(out, " det {}", d.detuning);
                    }
                    if !d.phase.is_zero() {
                        let _ = write!(out, " phase {}", d.phase);
                    }
                    out.push('\n');
                }
                out.push_str("end\n");
            }
        }
        for m in &self.final_markers {
            render_marker(&mut out, m);
        }
        let _ = writeln!(
            out,
            "read {} {}",
            self.readout.spin.label(),
            self.readout.projector.token()
        );
        out
    }

    /// Parse the text format. Errors carry 1-based line/column positions.
    pub fn parse(text: &str) -> Result<Self> {
        parse_sequence(text)
    }
}

fn level_token(l: Level) -> &'static str {
    match l {
        Level::Plus1 => "+1",
        Level::Zero => "0",
        Level::Minus1 => "-1",
    }
}

fn render_marker<R: Real>(out: &mut String, m: &Marker<R>) {
    match m {
        Marker::Prep { spin, state } => {
            let _ = writeln!(out, "prep {} {}", spin.label(), state.token());
        }
        Marker::Rot { spin, axis, angle } => {
            let _ = writeln!(out, "rot {} {} {}", spin.label(), axis.token(), angle);
        }
        Marker::Dephase { spin, m1, m2 } => {
            let _ = writeln!(
                out,
                "dephase {} {} {}",
                spin.label(),
                level_token(*m1),
                level_token(*m2)
            );
        }
    }
}

/// A token plus its 1-based column.
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut toks = Vec::new();
    let mut offset = 0;
    for piece in body.split_whitespace() {
        let col = body[offset..].find(piece).map(|i| offset + i).unwrap_or(offset);
        offset = col + piece.len();
        toks.push(Tok { text: piece, col: col + 1 });
    }
    toks
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

fn parse_spin(line: usize, tok: &Tok) -> Result<Spin> {
    match tok.text {
        "A" => Ok(Spin::A),
        "B" => Ok(Spin::B),
        other => Err(perr(line, tok.col, format!("unknown spin `{other}` (expected A or B)"))),
    }
}

fn parse_level(line: usize, tok: &Tok) -> Result<Level> {
    match tok.text {
        "0" => Ok(Level::Zero),
        "+1" => Ok(Level::Plus1),
        "-1" => Ok(Level::Minus1),
        other => {
            Err(perr(line, tok.col, format!("unknown level `{other}` (expected 0, +1 or -1)")))
        }
    }
}

fn parse_number<R: Real>(line: usize, tok: &Tok) -> Result<R> {
    tok.text
        .parse::<f64>()
        .map(R::of)
        .map_err(|_| perr(line, tok.col, format!("expected a number, found `{}`", tok.text)))
}

fn expect_len(line: usize, toks: &[Tok], n: usize, usage: &str) -> Result<()> {
    if toks.len() != n {
        let col = toks.last().map(|t| t.col).unwrap_or(1);
        return Err(perr(line, col, format!("malformed instruction; usage: {usage}")));
    }
    Ok(())
}

/// Parse the sequence text format; see the module docs for the grammar.
pub fn parse_sequence<R: Real>(text: &str) -> Result<PulseSequence<R>> {
    let mut name = String::new();
    let mut bindings: Vec<(String, R)> = Vec::new();
    let mut segments: Vec<Segment<R>> = Vec::new();
    let mut pending: Vec<Marker<R>> = Vec::new();
    let mut readout: Option<Readout> = None;
    // Open `segment` block, if any: (line opened at, duration, drives).
    let mut open: Option<(usize, R, Vec<DriveSpec<R>>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        let head = &toks[0];
        if readout.is_some() {
            return Err(perr(line, head.col, "instructions after `read` are not allowed"));
        }

        if let Some((_, dur, drives)) = open.as_mut() {
            match head.text {
                "drive" => {
                    if toks.len() != 4 && toks.len() != 6 && toks.len() != 8 {
                        return Err(perr(
                            line,
                            head.col,
                            "usage: drive <A|B> <plus|minus> <rabi MHz> [det <MHz>] [phase <rad>]",
                        ));
                    }
                    let spin = parse_spin(line, &toks[1])?;
                    let transition = match toks[2].text {
                        "plus" => Transition::Plus,
                        "minus" => Transition::Minus,
                        other => {
                            return Err(perr(
                                line,
                                toks[2].col,
                                format!("unknown transition `{other}` (expected plus or minus)"),
                            ))
                        }
                    };
                    let rabi: R = parse_number(line, &toks[3])?;
                    if rabi < R::zero() {
                        return Err(perr(line, toks[3].col, "rabi amplitude must be >= 0"));
                    }
                    let mut drive = DriveSpec::resonant(spin, transition, rabi);
                    let mut k = 4;
                    while k < toks.len() {
                        match toks[k].text {
                            "det" => drive.detuning = parse_number(line, &toks[k + 1])?,
                            "phase" => drive.phase = parse_number(line, &toks[k + 1])?,
                            other => {
                                return Err(perr(
                                    line,
                                    toks[k].col,
                                    format!("unknown drive option `{other}` (expected det or phase)"),
                                ))
                            }
                        }
                        k += 2;
                    }
                    drives.push(drive);
                }
                "end" => {
                    expect_len(line, &toks, 1, "end")?;
                    segments.push(Segment {
                        markers: std::mem::take(&mut pending),
                        duration: *dur,
                        drives: std::mem::take(drives),
                    });
                    open = None;
                }
                other => {
                    return Err(perr(
                        line,
                        head.col,
                        format!(
                            "only `drive` or `end` may appear inside a segment block, found `{other}`"
                        ),
                    ));
                }
            }
            continue;
        }

        match head.text {
            "name" => {
                expect_len(line, &toks, 2, "name <token>")?;
                name = toks[1].text.to_string();
            }
            "bind" => {
                expect_len(line, &toks, 3, "bind <key> <value>")?;
                bindings.push((toks[1].text.to_string(), parse_number(line, &toks[2])?));
            }
            "prep" => {
                expect_len(line, &toks, 3, "prep <A|B> <state>")?;
                let spin = parse_spin(line, &toks[1])?;
                let state = StateLabel::from_token(toks[2].text).ok_or_else(|| {
                    perr(line, toks[2].col, format!("unknown state `{}`", toks[2].text))
                })?;
                pending.push(Marker::Prep { spin, state });
            }
            "rot" => {
                expect_len(line, &toks, 4, "rot <A|B> <axis> <angle rad>")?;
                let spin = parse_spin(line, &toks[1])?;
                let axis = RotAxis::from_token(toks[2].text).ok_or_else(|| {
                    perr(line, toks[2].col, format!("unknown rotation axis `{}`", toks[2].text))
                })?;
                let angle = parse_number(line, &toks[3])?;
                pending.push(Marker::Rot { spin, axis, angle });
            }
            "dephase" => {
                expect_len(line, &toks, 4, "dephase <A|B> <m1> <m2>")?;
                let spin = parse_spin(line, &toks[1])?;
                let m1 = parse_level(line, &toks[2])?;
                let m2 = parse_level(line, &toks[3])?;
                if m1 == m2 {
                    return Err(perr(line, toks[3].col, "dephase needs two distinct levels"));
                }
                pending.push(Marker::Dephase { spin, m1, m2 });
            }
            "wait" => {
                expect_len(line, &toks, 2, "wait <duration us>")?;
                let dur: R = parse_number(line, &toks[1])?;
                if dur < R::zero() {
                    return Err(perr(line, toks[1].col, "duration must be >= 0"));
                }
                segments.push(Segment {
                    markers: std::mem::take(&mut pending),
                    duration: dur,
                    drives: Vec::new(),
                });
            }
            "segment" => {
                expect_len(line, &toks, 2, "segment <duration us>")?;
                let dur: R = parse_number(line, &toks[1])?;
                if dur < R::zero() {
                    return Err(perr(line, toks[1].col, "duration must be >= 0"));
                }
                open = Some((line, dur, Vec::new()));
            }
            "read" => {
                expect_len(line, &toks, 3, "read <A|B> <P0|P+1|P-1|PB|PD>")?;
                let spin = parse_spin(line, &toks[1])?;
                let projector = ProjectorLabel::from_token(toks[2].text).ok_or_else(|| {
                    perr(line, toks[2].col, format!("unknown projector `{}`", toks[2].text))
                })?;
                readout = Some(Readout { spin, projector });
            }
            other => {
                return Err(perr(line, head.col, format!("unknown instruction `{other}`")));
            }
        }
    }

    if let Some((seg_line, _, _)) = open {
        return Err(perr(seg_line, 1, "unterminated segment block (missing `end`)"));
    }
    let readout = readout.ok_or_else(|| {
        let last = text.lines().count().max(1);
        perr(last, 1, "no readout: every sequence must end with a `read` instruction")
    })?;

    let seq = PulseSequence { name, bindings, segments, final_markers: pending, readout };
    seq.validate()?;
    Ok(seq)
}

/// Preparation of the control spin for Ramsey templates: a static state or a
/// continuous two-tone drive during the evolution window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrepB<R> {
    State(Level),
    Drive { omega_plus: R, omega_minus: R },
}

fn half_pi<R: Real>() -> R {
    R::of(std::f64::consts::FRAC_PI_2)
}

fn pi<R: Real>() -> R {
    R::of(std::f64::consts::PI)
}

fn rot<R: Real>(spin: Spin, pauli: PauliAxis, subspace: Subspace, angle: R) -> Marker<R> {
    Marker::Rot { spin, axis: RotAxis { pauli, subspace }, angle }
}

/// Double electron-electron resonance template.
///
/// SQ: an ideal (π/2 – τ/2 – π – τ/2 – π/2) echo on A in the {|0⟩, |+1⟩}
/// basis with B flipped |0⟩ → |+1⟩ by the recoupling π; the |0⟩ readout then
/// oscillates at ν_dip/2. DQ: A prepared in |B⟩ with the echo swapping |±1⟩
/// and B double-flipped from |−1⟩ to |+1⟩, oscillating at 2 ν_dip; the
/// closing rotation plus |0⟩ projection is expressed directly as the PB
/// projector.
pub fn make_deer<R: Real>(basis: Basis, tau: R) -> Result<PulseSequence<R>> {
    if !(tau > R::zero()) || !tau.is_finite() {
        return Err(Error::invalid("make_deer requires tau > 0"));
    }
    let half = tau * R::of(0.5);
    let seq = match basis {
        Basis::Sq => PulseSequence {
            name: "deer_sq".into(),
            bindings: vec![("tau".into(), tau)],
            segments: vec![
                Segment {
                    markers: vec![
                        Marker::Prep { spin: Spin::A, state: StateLabel::Zero },
                        Marker::Prep { spin: Spin::B, state: StateLabel::Zero },
                        rot(Spin::A, PauliAxis::X, Subspace::Plus, half_pi()),
                    ],
                    duration: half,
                    drives: Vec::new(),
                },
                Segment {
                    markers: vec![
                        rot(Spin::A, PauliAxis::X, Subspace::Plus, pi()),
                        rot(Spin::B, PauliAxis::X, Subspace::Plus, pi()),
                    ],
                    duration: half,
                    drives: Vec::new(),
                },
            ],
            final_markers: vec![rot(Spin::A, PauliAxis::X, Subspace::Plus, half_pi())],
            readout: Readout { spin: Spin::A, projector: ProjectorLabel::P0 },
        },
        Basis::Dq => PulseSequence {
            name: "deer_dq".into(),
            bindings: vec![("tau".into(), tau)],
            segments: vec![
                Segment {
                    markers: vec![
                        Marker::Prep { spin: Spin::A, state: StateLabel::B },
                        Marker::Prep { spin: Spin::B, state: StateLabel::Minus1 },
                    ],
                    duration: half,
                    drives: Vec::new(),
                },
                Segment {
                    markers: vec![
                        rot(Spin::A, PauliAxis::X, Subspace::Dq, pi()),
                        rot(Spin::B, PauliAxis::X, Subspace::Minus, pi()),
                        rot(Spin::B, PauliAxis::X, Subspace::Plus, pi()),
                    ],
                    duration: half,
                    drives: Vec::new(),
                },
            ],
            final_markers: Vec::new(),
            readout: Readout { spin: Spin::A, projector: ProjectorLabel::PB },
        },
    };
    Ok(seq)
}

/// Ramsey template with a software reference offset.
///
/// The probe A evolves freely for τ in the SQ or DQ basis while B either
/// sits in a prepared state or is continuously driven. A z rotation by
/// 2π·f_ref·τ before the closing rotation places the carrier peak at the
/// reference frequency, so dipolar shifts appear as peak displacements
/// relative to a reference run.
pub fn make_ramsey<R: Real>(
    basis: Basis,
    prep_b: PrepB<R>,
    reference_offset: R,
    tau: R,
) -> Result<PulseSequence<R>> {
    if !(tau > R::zero()) || !tau.is_finite() {
        return Err(Error::invalid("make_ramsey requires tau > 0"));
    }
    let theta_ref = R::of(std::f64::consts::TAU) * reference_offset * tau;

    let (b_prep_marker, drives, b_name): (Marker<R>, Vec<DriveSpec<R>>, &str) = match prep_b {
        PrepB::State(level) => {
            let label = match level {
                Level::Zero => StateLabel::Zero,
                Level::Plus1 => StateLabel::Plus1,
                Level::Minus1 => StateLabel::Minus1,
            };
            (Marker::Prep { spin: Spin::B, state: label }, Vec::new(), "static")
        }
        PrepB::Drive { omega_plus, omega_minus } => {
            let mut drives = Vec::new();
            if omega_plus > R::zero() {
                drives.push(DriveSpec::resonant(Spin::B, Transition::Plus, omega_plus));
            }
            if omega_minus > R::zero() {
                drives.push(DriveSpec::resonant(Spin::B, Transition::Minus, omega_minus));
            }
            (Marker::Prep { spin: Spin::B, state: StateLabel::Zero }, drives, "driven")
        }
    };

    let seq = match basis {
        Basis::Sq => PulseSequence {
            name: format!("ramsey_sq_{b_name}"),
            bindings: vec![("tau".into(), tau), ("f_ref".into(), reference_offset)],
            segments: vec![Segment {
                markers: vec![
                    Marker::Prep { spin: Spin::A, state: StateLabel::Zero },
                    b_prep_marker,
                    rot(Spin::A, PauliAxis::X, Subspace::Plus, half_pi()),
                ],
                duration: tau,
                drives,
            }],
            final_markers: vec![
                rot(Spin::A, PauliAxis::Z, Subspace::Plus, theta_ref),
                rot(Spin::A, PauliAxis::X, Subspace::Plus, half_pi()),
            ],
            readout: Readout { spin: Spin::A, projector: ProjectorLabel::P0 },
        },
        Basis::Dq => PulseSequence {
            name: format!("ramsey_dq_{b_name}"),
            bindings: vec![("tau".into(), tau), ("f_ref".into(), reference_offset)],
            segments: vec![Segment {
                markers: vec![Marker::Prep { spin: Spin::A, state: StateLabel::B }, b_prep_marker],
                duration: tau,
                drives,
            }],
            final_markers: vec![rot(Spin::A, PauliAxis::Z, Subspace::Dq, theta_ref)],
            readout: Readout { spin: Spin::A, projector: ProjectorLabel::PB },
        },
    };
    Ok(seq)
}

/// Spin-lock polarization-transfer template.
///
/// A is prepared along its rotating-frame y axis and continuously driven
/// with a 90°-phase-shifted (spin-locking) drive at Ω_A for τ; B is prepared
/// in the fully dephased {|0⟩, |+1⟩} mixture and dressed by the (Ω₊, Ω₋)
/// drive pair. The readout rotates A back and projects on |0⟩, so the
/// returned probability is A's spin-lock coherence.
pub fn make_spinlock<R: Real>(omega_a: R, drive_b: (R, R), tau: R) -> Result<PulseSequence<R>> {
    if !(tau > R::zero()) || !tau.is_finite() {
        return Err(Error::invalid("make_spinlock requires tau > 0"));
    }
    if !(omega_a > R::zero()) {
        return Err(Error::invalid("make_spinlock requires omega_a > 0"));
    }
    let mut drives =
        vec![DriveSpec::resonant(Spin::A, Transition::Plus, omega_a).with_phase(half_pi())];
    if drive_b.0 > R::zero() {
        drives.push(DriveSpec::resonant(Spin::B, Transition::Plus, drive_b.0));
    }
    if drive_b.1 > R::zero() {
        drives.push(DriveSpec::resonant(Spin::B, Transition::Minus, drive_b.1));
    }
    Ok(PulseSequence {
        name: "spinlock_hh".into(),
        bindings: vec![
            ("tau".into(), tau),
            ("omega_a".into(), omega_a),
            ("omega_b_plus".into(), drive_b.0),
            ("omega_b_minus".into(), drive_b.1),
        ],
        segments: vec![Segment {
            markers: vec![
                Marker::Prep { spin: Spin::A, state: StateLabel::Zero },
                Marker::Prep { spin: Spin::B, state: StateLabel::Zero },
                rot(Spin::A, PauliAxis::X, Subspace::Plus, half_pi()),
                rot(Spin::B, PauliAxis::X, Subspace::Plus, half_pi()),
                Marker::Dephase { spin: Spin::B, m1: Level::Zero, m2: Level::Plus1 },
            ],
            duration: tau,
            drives,
        }],
        final_markers: vec![rot(Spin::A, PauliAxis::X, Subspace::Plus, -half_pi::<R>())],
        readout: Readout { spin: Spin::A, projector: ProjectorLabel::P0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_sequence() {
        let text = "prep A |0>\nwait 1.0\nread A P0\n";
        let seq = parse_sequence::<f64>(text).unwrap();
        assert_eq!(seq.segments.len(), 1);
        assert_eq!(seq.segments[0].markers.len(), 1);
        assert_eq!(seq.segments[0].duration, 1.0);
        assert_eq!(seq.readout, Readout { spin: Spin::A, projector: ProjectorLabel::P0 });
    }

    #[test]
    fn empty_input_reports_no_readout() {
        let err = parse_sequence::<f64>("").unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("no readout"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_sequence::<f64>("prep A |0>\nwait -1.0\nread A P0\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 2, col: 6, msg: "duration must be >= 0".into() });

        let err = parse_sequence::<f64>("prep C |0>\nread A P0\n").unwrap_err();
        match err {
            Error::Parse { line: 1, col: 6, msg } => assert!(msg.contains("unknown spin")),
            other => panic!("{other:?}"),
        }

        let err = parse_sequence::<f64>("segment 1.0\ndrive A sideways 3\nread A P0\n").unwrap_err();
        match err {
            Error::Parse { line: 2, col, msg } => {
                assert_eq!(col, 9);
                assert!(msg.contains("unknown transition"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn drive_outside_segment_rejected() {
        let err = parse_sequence::<f64>("drive A plus 3\nread A P0\n").unwrap_err();
        match err {
            Error::Parse { line: 1, msg, .. } => assert!(msg.contains("unknown instruction")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unterminated_segment_rejected() {
        let err = parse_sequence::<f64>("segment 1.0\ndrive A plus 3\n").unwrap_err();
        match err {
            Error::Parse { line: 1, msg, .. } => assert!(msg.contains("unterminated")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn instructions_after_read_rejected() {
        let err = parse_sequence::<f64>("wait 1\nread A P0\nwait 1\n").unwrap_err();
        match err {
            Error::Parse { line: 3, msg, .. } => assert!(msg.contains("after `read`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# a comment\n\nprep B |+1>   # trailing comment\nwait 2.5\nread B P+1\n";
        let seq = parse_sequence::<f64>(text).unwrap();
        assert_eq!(seq.segments[0].duration, 2.5);
        assert_eq!(seq.readout.projector, ProjectorLabel::PPlus1);
    }

    #[test]
    fn builders_round_trip_through_text() {
        let seqs = vec![
            make_deer::<f64>(Basis::Sq, 2.0).unwrap(),
            make_deer::<f64>(Basis::Dq, 1.25).unwrap(),
            make_ramsey::<f64>(Basis::Sq, PrepB::State(Level::Plus1), 1.5, 10.0).unwrap(),
            make_ramsey::<f64>(
                Basis::Dq,
                PrepB::Drive { omega_plus: 3.0, omega_minus: 1.0 },
                2.0,
                7.5,
            )
            .unwrap(),
            make_spinlock::<f64>(7.56, (7.56, 0.0), 3.85).unwrap(),
            make_spinlock::<f64>(10.44, (9.59, 4.13), 5.6).unwrap(),
        ];
        for seq in seqs {
            seq.validate().unwrap();
            let text = seq.render();
            let reparsed = parse_sequence::<f64>(&text).unwrap();
            assert_eq!(reparsed, seq, "render/parse mismatch for {}:\n{text}", seq.name);
            // Idempotent: rendering the reparsed sequence gives identical text.
            assert_eq!(reparsed.render(), text);
        }
    }

    #[test]
    fn deer_phase_window_is_tau() {
        let tau = 3.21;
        for basis in [Basis::Sq, Basis::Dq] {
            let seq = make_deer::<f64>(basis, tau).unwrap();
            assert!((seq.total_duration() - tau).abs() < 1e-12);
            assert_eq!(seq.segments.len(), 2);
            assert!((seq.segments[0].duration - tau / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn builders_reject_bad_arguments() {
        assert!(make_deer::<f64>(Basis::Sq, 0.0).is_err());
        assert!(make_ramsey::<f64>(Basis::Sq, PrepB::State(Level::Zero), 1.0, -1.0).is_err());
        assert!(make_spinlock::<f64>(5.0, (5.0, 0.0), 0.0).is_err());
        assert!(make_spinlock::<f64>(0.0, (5.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn two_tone_segments_parse() {
        // Several tones on one transition are a valid sequence (the beat is
        // handled at propagation time); only the static rotating-frame
        // Hamiltonian rejects them.
        let text = "segment 1.0\ndrive A plus 3\ndrive A plus 4 det 60\nend\nread A P0\n";
        let seq = parse_sequence::<f64>(text).unwrap();
        assert_eq!(seq.segments[0].drives.len(), 2);
    }

    #[test]
    fn golden_deer_sq_fixture_matches_builder() {
        let fixture = include_str!("../tests/fixtures/deer_sq.seq");
        let parsed = parse_sequence::<f64>(fixture).unwrap();
        let built = make_deer::<f64>(Basis::Sq, 2.0).unwrap();
        assert_eq!(parsed, built);
    }
}
