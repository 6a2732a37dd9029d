//! Two-qutrit spin-pair model: lab-frame and doubly-rotating-frame
//! Hamiltonians, dressed states, and the closed-form quantities derived from
//! them (effective coupling, Hartmann-Hahn matching, cross-talk bound).
//!
//! Unit conventions, used everywhere in this crate:
//! - all public interfaces speak linear frequencies in MHz and times in µs;
//! - Hamiltonian matrices are stored in angular units, rad/µs;
//! - a drive with Rabi amplitude Ω produces an on-resonance population
//!   oscillation at exactly Ω MHz, i.e. a π pulse lasts 1/(2Ω) µs. In the
//!   rotating frame the drive contributes an off-diagonal element of
//!   magnitude πΩ rad/µs; in the lab frame the cosine drive coefficient is
//!   2πΩ.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::spinops::{spin1_operator, tensor, ComplexMatrix, Cpx, Level, QutritState, SpinOp};

/// Which spin of the pair a drive or marker addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Spin {
    A,
    B,
}

impl Spin {
    pub fn other(self) -> Spin {
        match self {
            Spin::A => Spin::B,
            Spin::B => Spin::A,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Spin::A => "A",
            Spin::B => "B",
        }
    }
}

/// Which single-quantum transition a drive addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    /// |0⟩ ↔ |+1⟩
    Plus,
    /// |0⟩ ↔ |−1⟩
    Minus,
}

impl Transition {
    /// The m = ±1 level addressed by this transition.
    pub fn target(self) -> Level {
        match self {
            Transition::Plus => Level::Plus1,
            Transition::Minus => Level::Minus1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Transition::Plus => "plus",
            Transition::Minus => "minus",
        }
    }
}

/// Static parameters of the spin pair.
///
/// `d` is the zero-field splitting, `zeeman_a`/`zeeman_b` the Zeeman
/// projections γB on each spin's axis, `nu_dip` the secular dipolar coupling
/// coefficient of the Ising term. The optional T2* values are only ever used
/// as post-hoc signal envelopes, never inside unitaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<R> {
    /// Zero-field splitting, MHz.
    pub d: R,
    /// γB projection on spin A, MHz.
    pub zeeman_a: R,
    /// γB projection on spin B, MHz.
    pub zeeman_b: R,
    /// Bare dipolar coupling ν_dip, MHz (sign allowed).
    pub nu_dip: R,
    /// Optional dephasing time of spin A, µs.
    pub t2star_a: Option<R>,
    /// Optional dephasing time of spin B, µs.
    pub t2star_b: Option<R>,
}

impl<R: Real> SystemParams<R> {
    pub fn new(d: R, zeeman_a: R, zeeman_b: R, nu_dip: R) -> Result<Self> {
        let p = Self { d, zeeman_a, zeeman_b, nu_dip, t2star_a: None, t2star_b: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_t2star(mut self, t2star_a: Option<R>, t2star_b: Option<R>) -> Result<Self> {
        self.t2star_a = t2star_a;
        self.t2star_b = t2star_b;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > R::zero()) {
            return Err(Error::invalid("zero-field splitting D must be positive"));
        }
        if !self.nu_dip.is_finite() {
            return Err(Error::invalid("nu_dip must be finite"));
        }
        for (name, t2) in [("t2star_a", self.t2star_a), ("t2star_b", self.t2star_b)] {
            if let Some(t) = t2 {
                if !(t > R::zero()) {
                    return Err(Error::invalid(format!("{name} must be positive when present")));
                }
            }
        }
        Ok(())
    }

    pub fn zeeman(&self, spin: Spin) -> R {
        match spin {
            Spin::A => self.zeeman_a,
            Spin::B => self.zeeman_b,
        }
    }

    pub fn t2star(&self, spin: Spin) -> Option<R> {
        match spin {
            Spin::A => self.t2star_a,
            Spin::B => self.t2star_b,
        }
    }

    /// Bare transition frequency |0⟩ ↔ |m⟩ of one spin, MHz: D ± γB.
    pub fn transition_freq(&self, spin: Spin, tr: Transition) -> R {
        match tr {
            Transition::Plus => self.d + self.zeeman(spin),
            Transition::Minus => self.d - self.zeeman(spin),
        }
    }
}

/// One resonant or near-resonant drive on one spin's |0⟩ ↔ |±1⟩ transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec<R> {
    pub spin: Spin,
    pub transition: Transition,
    /// Rabi amplitude Ω, MHz: the on-resonance population-oscillation
    /// frequency of the addressed two-level transition.
    pub rabi: R,
    /// Carrier minus transition frequency, MHz. Resonant means 0.
    pub detuning: R,
    /// Drive phase, radians. Phase π/2 drives about the subspace y axis.
    pub phase: R,
}

impl<R: Real> DriveSpec<R> {
    pub fn resonant(spin: Spin, transition: Transition, rabi: R) -> Self {
        Self { spin, transition, rabi, detuning: R::zero(), phase: R::zero() }
    }

    pub fn with_phase(mut self, phase: R) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_detuning(mut self, detuning: R) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= R::zero()) || !self.rabi.is_finite() {
            return Err(Error::invalid("drive rabi amplitude must be finite and >= 0"));
        }
        if !self.detuning.is_finite() || !self.phase.is_finite() {
            return Err(Error::invalid("drive detuning and phase must be finite"));
        }
        Ok(())
    }
}

/// The doubly dressed ±states of one driven qutrit.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedPair<R> {
    pub plus_d: QutritState<R>,
    pub minus_d: QutritState<R>,
}

/// Embed a single-spin 3×3 operator into the 9×9 pair space (A ⊗ B).
pub fn embed<R: Real>(spin: Spin, op: &ComplexMatrix<R>) -> ComplexMatrix<R> {
    let id = ComplexMatrix::identity(3);
    match spin {
        Spin::A => tensor(op, &id),
        Spin::B => tensor(&id, op),
    }
}

fn two_pi<R: Real>() -> R {
    R::of(std::f64::consts::TAU)
}

/// Static (undriven) part of the lab-frame Hamiltonian in rad/µs:
/// 2π [D (S_z)² + γB S_z] per spin plus the Ising term 2π ν_dip S_z ⊗ S_z.
fn free_lab_hamiltonian<R: Real>(params: &SystemParams<R>) -> ComplexMatrix<R> {
    let sz = spin1_operator::<R>(SpinOp::Sz);
    let sz2 = sz.matmul(&sz);
    let mut h = ComplexMatrix::zeros(9, 9);
    for spin in [Spin::A, Spin::B] {
        let single = &sz2.scale_re(params.d) + &sz.scale_re(params.zeeman(spin));
        h = &h + &embed(spin, &single);
    }
    h = &h + &tensor(&sz, &sz).scale_re(params.nu_dip);
    h.scale_re(two_pi())
}

/// The drive's 3×3 σx operator on its transition subspace.
fn drive_sx<R: Real>(tr: Transition) -> ComplexMatrix<R> {
    match tr {
        Transition::Plus => spin1_operator(SpinOp::SxPlus),
        Transition::Minus => spin1_operator(SpinOp::SxMinus),
    }
}

/// Full time-dependent lab-frame Hamiltonian at time `t` (µs), in rad/µs.
///
/// Each drive contributes 2πΩ cos(ω_c t + φ) on its transition operator with
/// carrier ω_c = 2π (transition frequency + detuning). Hyperfine and
/// transverse Zeeman terms are omitted; spin flip-flop terms of the dipolar
/// interaction are dropped (secular Ising form only).
pub fn build_lab_hamiltonian<R: Real>(
    params: &SystemParams<R>,
    drives: &[DriveSpec<R>],
    t: R,
) -> ComplexMatrix<R> {
    let mut h = free_lab_hamiltonian(params);
    for d in drives {
        if d.rabi.is_zero() {
            continue;
        }
        let carrier = two_pi::<R>() * (params.transition_freq(d.spin, d.transition) + d.detuning);
        let amp = two_pi::<R>() * d.rabi * (carrier * t + d.phase).cos();
        h = &h + &embed(d.spin, &drive_sx(d.transition)).scale_re(amp);
    }
    h
}

/// Time-independent Hamiltonian in the doubly rotating frame under the RWA,
/// in rad/µs.
///
/// Per drive: an off-diagonal coupling πΩ e^{∓iφ} on its transition (so the
/// on-resonance oscillation frequency is exactly Ω) and a diagonal detuning
/// block −2πδ on the addressed |±1⟩ level. The Ising term 2π ν_dip S_z⊗S_z
/// commutes with the frame transformation and is retained in full.
pub fn build_rwa_hamiltonian<R: Real>(
    params: &SystemParams<R>,
    drives: &[DriveSpec<R>],
) -> Result<ComplexMatrix<R>> {
    let mut seen: Vec<(Spin, Transition)> = Vec::new();
    for d in drives {
        d.validate()?;
        let key = (d.spin, d.transition);
        if seen.contains(&key) {
            return Err(Error::invalid(format!(
                "duplicate drive on spin {} transition {}; the rotating frame \
                 admits at most one drive per (spin, transition)",
                d.spin.label(),
                d.transition.label()
            )));
        }
        seen.push(key);
    }

    let pi = R::of(std::f64::consts::PI);
    let sz = spin1_operator::<R>(SpinOp::Sz);
    let mut h = tensor(&sz, &sz).scale_re(two_pi::<R>() * params.nu_dip);
    for d in drives {
        let target = d.transition.target().index();
        let zero = Level::Zero.index();
        let mut single = ComplexMatrix::<R>::zeros(3, 3);
        // πΩ (e^{−iφ}|m⟩⟨0| + e^{iφ}|0⟩⟨m|)
        let coupling = Cpx::from_polar(pi * d.rabi, -d.phase);
        single[(target, zero)] = coupling;
        single[(zero, target)] = coupling.conj();
        // −2πδ on the addressed level.
        single[(target, target)] = Complex::new(-two_pi::<R>() * d.detuning, R::zero());
        h = &h + &embed(d.spin, &single);
    }
    Ok(h)
}

/// Diagonal generator of the doubly rotating frame, rad/µs. The frame of
/// each spin rotates its |±1⟩ level at the carrier addressing it (its bare
/// transition frequency when undriven), so `lab = W(t) · rwa` with
/// `W(t) = exp(−i t G)` the unitary returned by [`frame_unitary`].
pub fn frame_generator<R: Real>(
    params: &SystemParams<R>,
    drives: &[DriveSpec<R>],
) -> ComplexMatrix<R> {
    let mut g = ComplexMatrix::zeros(9, 9);
    for spin in [Spin::A, Spin::B] {
        for tr in [Transition::Plus, Transition::Minus] {
            let det = drives
                .iter()
                .find(|d| d.spin == spin && d.transition == tr)
                .map(|d| d.detuning)
                .unwrap_or_else(R::zero);
            let omega = two_pi::<R>() * (params.transition_freq(spin, tr) + det);
            let proj = spin1_operator::<R>(SpinOp::Proj(tr.target()));
            g = &g + &embed(spin, &proj).scale_re(omega);
        }
    }
    g
}

/// W(t) = exp(−i t G): maps a rotating-frame state to the lab frame.
pub fn frame_unitary<R: Real>(
    params: &SystemParams<R>,
    drives: &[DriveSpec<R>],
    t: R,
) -> ComplexMatrix<R> {
    let g = frame_generator(params, drives);
    // G is diagonal; exponentiate directly.
    ComplexMatrix::from_fn(9, 9, |r, c| {
        if r == c {
            Complex::new(R::zero(), -g[(r, r)].re * t).exp()
        } else {
            Complex::new(R::zero(), R::zero())
        }
    })
}

/// Effective dipolar coupling of the doubly dressed pair:
/// ν_eff = ½ (Ω₊² − Ω₋²)/(Ω₊² + Ω₋²) · ν_dip.
///
/// Valid in the fast-driving regime ν_dip ≪ Ω±; antisymmetric under swap of
/// the two amplitudes, invariant under common rescaling, and bounded by
/// |ν_dip|/2.
pub fn effective_coupling<R: Real>(omega_plus: R, omega_minus: R, nu_dip: R) -> Result<R> {
    let (p2, m2) = (omega_plus * omega_plus, omega_minus * omega_minus);
    let denom = p2 + m2;
    if denom.is_zero() {
        return Err(Error::invalid(
            "effective_coupling is undefined for an undriven spin (no dressed frame)",
        ));
    }
    Ok(R::of(0.5) * (p2 - m2) / denom * nu_dip)
}

/// Doubly dressed states of a driven qutrit:
/// |±⟩_d = (Ω₊|+1⟩ + Ω₋|−1⟩)/(√2 Ω̄) ± |0⟩/√2 with Ω̄ = √(Ω₊² + Ω₋²).
/// These are the extremal eigenvectors of the single-spin rotating-frame
/// drive Hamiltonian, with eigenvalues ±π Ω̄ rad/µs.
pub fn dressed_states<R: Real>(omega_plus: R, omega_minus: R) -> Result<DressedPair<R>> {
    let bar = (omega_plus * omega_plus + omega_minus * omega_minus).sqrt();
    if bar.is_zero() {
        return Err(Error::invalid("dressed_states needs a nonzero drive amplitude"));
    }
    let inv_sqrt2 = R::of(std::f64::consts::FRAC_1_SQRT_2);
    let wp = Cpx::new(omega_plus / bar * inv_sqrt2, R::zero());
    let wm = Cpx::new(omega_minus / bar * inv_sqrt2, R::zero());
    let half = Cpx::new(inv_sqrt2, R::zero());
    Ok(DressedPair {
        plus_d: QutritState::new([wp, half, wm]),
        minus_d: QutritState::new([wp, -half, wm]),
    })
}

/// Hartmann-Hahn matching amplitude for a doubly driven partner:
/// Ω^A = √((Ω₊^B)² + (Ω₋^B)²).
pub fn hh_matching<R: Real>(omega_plus_b: R, omega_minus_b: R) -> Result<R> {
    let bar2 = omega_plus_b * omega_plus_b + omega_minus_b * omega_minus_b;
    if bar2.is_zero() {
        return Err(Error::invalid("hh_matching needs a nonzero drive amplitude"));
    }
    Ok(bar2.sqrt())
}

/// Leading-order Rabi cross-talk error between detuned transitions: (Ω/Δ)².
pub fn crosstalk_bound<R: Real>(omega: R, delta: R) -> Result<R> {
    if delta.is_zero() {
        return Err(Error::invalid("crosstalk_bound requires a nonzero detuning"));
    }
    let r = omega / delta;
    Ok(r * r)
}
