//! Time evolution of pure states and density matrices through piecewise
//! pulse sequences.
//!
//! RWA mode applies one exact (eigendecomposition-based) propagator per
//! constant segment. Lab mode integrates the time-dependent lab-frame
//! Hamiltonian with midpoint-sampled piecewise-constant steps, which is
//! second-order accurate in the step size; it exists to validate the
//! rotating-frame results. Density matrices evolve as U·ρ·U†.
//!
//! One documented extension beyond constant segments: if a segment carries
//! more than one drive on the same (spin, transition), as in the
//! cross-talk configuration, its rotating-frame Hamiltonian is not static but
//! beats at the detuning differences. Such segments are integrated by
//! midpoint-resampling the combined complex drive envelope, with the step
//! set by [`BEAT_STEPS_PER_PERIOD`] substeps per beat period.



use crate::error::{Error, Result};
use crate::model::{
    build_lab_hamiltonian, build_rwa_hamiltonian, DriveSpec, Spin, SystemParams, Transition,
};
use crate::real::{unitary_tol, Real};
use crate::sequences::{Marker, PulseSequence, Readout, Segment};
use crate::spinops::{
    assemble_propagator, herm_propagator, spin1_operator, tensor, ComplexMatrix, Cpx, Level,
    QutritState, SpinOp,
};

/// Substeps per beat period when a segment carries colliding drives.
pub const BEAT_STEPS_PER_PERIOD: f64 = 96.0;

/// Default lab-mode step: 1/(200·f_max).
pub const LAB_STEPS_PER_PERIOD: f64 = 200.0;
/// Coarsest admissible lab-mode step: 1/(50·f_max).
pub const LAB_MIN_STEPS_PER_PERIOD: f64 = 50.0;

/// Joint state of the spin pair.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoSpinState<R> {
    /// 9 complex amplitudes, basis index 3·iA + iB.
    Pure(Vec<Cpx<R>>),
    /// 9×9 Hermitian positive semidefinite, unit trace.
    Density(ComplexMatrix<R>),
}

impl<R: Real> TwoSpinState<R> {
    /// |0, 0⟩.
    pub fn ground() -> Self {
        Self::basis(Level::Zero, Level::Zero)
    }

    /// Product basis state |mA, mB⟩.
    pub fn basis(ma: Level, mb: Level) -> Self {
        let mut amps = vec![Cpx::new(R::zero(), R::zero()); 9];
        amps[3 * ma.index() + mb.index()] = Cpx::new(R::one(), R::zero());
        TwoSpinState::Pure(amps)
    }

    /// Product state ψ_A ⊗ ψ_B.
    pub fn product(a: &QutritState<R>, b: &QutritState<R>) -> Self {
        let mut amps = vec![Cpx::new(R::zero(), R::zero()); 9];
        for (ia, &ca) in a.amps.iter().enumerate() {
            for (ib, &cb) in b.amps.iter().enumerate() {
                amps[3 * ia + ib] = ca * cb;
            }
        }
        TwoSpinState::Pure(amps)
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, TwoSpinState::Pure(_))
    }

    /// View as a density matrix (promotes a pure state).
    pub fn to_density(&self) -> ComplexMatrix<R> {
        match self {
            TwoSpinState::Pure(psi) => {
                ComplexMatrix::from_fn(9, 9, |r, c| psi[r] * psi[c].conj())
            }
            TwoSpinState::Density(rho) => rho.clone(),
        }
    }

    /// Norm (pure) or trace distance from 1 plus positivity (density).
    pub fn validate(&self) -> Result<()> {
        match self {
            TwoSpinState::Pure(psi) => {
                if psi.len() != 9 {
                    return Err(Error::contract("pure state must have 9 amplitudes"));
                }
                let norm: R =
                    psi.iter().map(|a| a.norm_sqr()).fold(R::zero(), |s, x| s + x).sqrt();
                if (norm - R::one()).abs() > unitary_tol::<R>() {
                    return Err(Error::contract(format!(
                        "pure state norm {} deviates from 1",
                        norm
                    )));
                }
            }
            TwoSpinState::Density(rho) => {
                if rho.rows() != 9 || rho.cols() != 9 {
                    return Err(Error::contract("density matrix must be 9×9"));
                }
                if rho.hermiticity_error() > R::of(1e-10) {
                    return Err(Error::contract("density matrix is not Hermitian"));
                }
                let trace = rho.trace();
                if (trace.re - R::one()).abs() > unitary_tol::<R>()
                    || trace.im.abs() > unitary_tol::<R>()
                {
                    return Err(Error::contract(format!(
                        "density trace {} deviates from 1",
                        trace.re
                    )));
                }
                let (vals, _) = rho.eigh()?;
                if vals.iter().any(|v| *v < -R::of(1e-9)) {
                    return Err(Error::contract("density matrix has a negative eigenvalue"));
                }
            }
        }
        Ok(())
    }

    /// Apply a unitary: ψ → Uψ or ρ → UρU†.
    pub fn apply_unitary(&mut self, u: &ComplexMatrix<R>) {
        match self {
            TwoSpinState::Pure(psi) => *psi = u.mul_vec(psi),
            TwoSpinState::Density(rho) => *rho = u.matmul(rho).matmul(&u.dagger()),
        }
    }

    /// Reduced 3×3 density matrix of one spin.
    pub fn reduced(&self, spin: Spin) -> ComplexMatrix<R> {
        let rho = self.to_density();
        match spin {
            Spin::A => ComplexMatrix::from_fn(3, 3, |a, b| {
                let mut acc = Cpx::new(R::zero(), R::zero());
                for i in 0..3 {
                    acc += rho[(3 * a + i, 3 * b + i)];
                }
                acc
            }),
            Spin::B => ComplexMatrix::from_fn(3, 3, |i, j| {
                let mut acc = Cpx::new(R::zero(), R::zero());
                for a in 0..3 {
                    acc += rho[(3 * a + i, 3 * a + j)];
                }
                acc
            }),
        }
    }

    /// Fidelity with another state. Supported combinations: pure/pure
    /// (|⟨a|b⟩|²) and pure/density (⟨ψ|ρ|ψ⟩).
    pub fn fidelity(&self, other: &Self) -> Result<R> {
        match (self, other) {
            (TwoSpinState::Pure(a), TwoSpinState::Pure(b)) => {
                let ip = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x.conj() * *y)
                    .fold(Cpx::new(R::zero(), R::zero()), |s, z| s + z);
                Ok(ip.norm_sqr())
            }
            (TwoSpinState::Pure(psi), TwoSpinState::Density(rho))
            | (TwoSpinState::Density(rho), TwoSpinState::Pure(psi)) => {
                let rpsi = rho.mul_vec(psi);
                let val = psi
                    .iter()
                    .zip(&rpsi)
                    .map(|(x, y)| x.conj() * *y)
                    .fold(Cpx::new(R::zero(), R::zero()), |s, z| s + z);
                Ok(val.re)
            }
            _ => Err(Error::invalid(
                "fidelity between two density matrices is not supported",
            )),
        }
    }
}

/// Evolution mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode<R> {
    /// Exact per-segment propagation in the doubly rotating frame.
    Rwa,
    /// Midpoint-stepped lab-frame integration; `step` in µs, or None for the
    /// default 1/(200·f_max).
    Lab { step: Option<R> },
}

/// Sampled observable series along a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R> {
    pub times: Vec<R>,
    pub series: Vec<(String, Vec<R>)>,
}

impl<R: Real> Trajectory<R> {
    pub fn validate(&self) -> Result<()> {
        let lo = -R::of(1e-9);
        let hi = R::one() + R::of(1e-9);
        for (name, vals) in &self.series {
            if vals.len() != self.times.len() {
                return Err(Error::contract(format!("series `{name}` length mismatch")));
            }
            if vals.iter().any(|p| *p < lo || *p > hi) {
                return Err(Error::contract(format!("series `{name}` outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Expectation value of a projector: ⟨ψ|P|ψ⟩ or Tr(Pρ), clipped to [0, 1].
pub fn observe<R: Real>(state: &TwoSpinState<R>, projector: &ComplexMatrix<R>) -> Result<R> {
    let tol = R::of(1e-8);
    if !projector.is_hermitian(tol) {
        return Err(Error::contract("observe requires a Hermitian projector"));
    }
    let idem = projector.matmul(projector).max_abs_diff(projector);
    if idem > tol {
        return Err(Error::contract(format!(
            "observe requires an idempotent projector (|P² − P| = {:e})",
            idem.as_f64()
        )));
    }
    let raw = match state {
        TwoSpinState::Pure(psi) => {
            let ppsi = projector.mul_vec(psi);
            psi.iter()
                .zip(&ppsi)
                .map(|(a, b)| a.conj() * *b)
                .fold(Cpx::new(R::zero(), R::zero()), |s, z| s + z)
                .re
        }
        TwoSpinState::Density(rho) => projector.matmul(rho).trace().re,
    };
    debug_assert!(
        raw >= -R::of(1e-9) && raw <= R::one() + R::of(1e-9),
        "projector expectation far outside [0, 1]"
    );
    Ok(raw.max(R::zero()).min(R::one()))
}

/// 9×9 projector for a readout marker.
pub fn readout_projector<R: Real>(readout: &Readout) -> ComplexMatrix<R> {
    crate::model::embed(readout.spin, &readout.projector.to_matrix3())
}

/// Projective dephasing of one spin's {m1, m2} pair: the Kraus map
/// {P_m1, P_m2, 1 − P_m1 − P_m2} applied to that spin. Removes the pair's
/// mutual coherence (and, as ideal projective dephasing, the pair levels'
/// coherence to the remaining level); always trace preserving and CP.
pub fn dephase_subspace<R: Real>(
    state: &TwoSpinState<R>,
    spin: Spin,
    pair: (Level, Level),
) -> TwoSpinState<R> {
    let rho = state.to_density();
    let p1 = spin1_operator::<R>(SpinOp::Proj(pair.0));
    let p2 = spin1_operator::<R>(SpinOp::Proj(pair.1));
    let id = ComplexMatrix::identity(3);
    let q = &(&id - &p1) - &p2;
    let mut out = ComplexMatrix::zeros(9, 9);
    for k in [p1, p2, q] {
        let kk = crate::model::embed(spin, &k);
        out = &out + &kk.matmul(&rho).matmul(&kk);
    }
    TwoSpinState::Density(out)
}

/// exp(−i θ/2 σ) for a subspace Pauli σ, in closed form.
fn rotation_unitary<R: Real>(gen: &ComplexMatrix<R>, angle: R) -> ComplexMatrix<R> {
    let half = angle * R::of(0.5);
    let (c, s) = (half.cos(), half.sin());
    // σ² is the identity on the subspace; exp(−iθ/2 σ) = I + (cos−1)σ² − i sin σ.
    let sub_id = gen.matmul(gen);
    let mut u = ComplexMatrix::identity(3);
    u = &u + &sub_id.scale(Cpx::new(c - R::one(), R::zero()));
    u = &u + &gen.scale(Cpx::new(R::zero(), -s));
    u
}

fn apply_marker<R: Real>(state: TwoSpinState<R>, marker: &Marker<R>) -> Result<TwoSpinState<R>> {
    match marker {
        Marker::Rot { spin, axis, angle } => {
            let u3 = rotation_unitary(&axis.generator::<R>(), *angle);
            let mut s = state;
            s.apply_unitary(&crate::model::embed(*spin, &u3));
            Ok(s)
        }
        Marker::Dephase { spin, m1, m2 } => Ok(dephase_subspace(&state, *spin, (*m1, *m2))),
        Marker::Prep { spin, state: label } => prep_spin(state, *spin, &label.to_state()),
    }
}

/// Replace one spin's state: ρ → ψψ† ⊗ Tr_spin(ρ) in the appropriate order.
/// A pure input stays pure whenever the partner's reduced state is pure.
fn prep_spin<R: Real>(
    state: TwoSpinState<R>,
    spin: Spin,
    new_state: &QutritState<R>,
) -> Result<TwoSpinState<R>> {
    let other = spin.other();
    let rho_other = state.reduced(other);
    // Purity check on the partner.
    let purity = rho_other.matmul(&rho_other).trace().re;
    if (R::one() - purity).abs() <= R::of(1e-9) {
        let (vals, vecs) = rho_other.eigh()?;
        // Dominant eigenvector is the partner's pure state.
        let k = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let partner = QutritState::new([vecs[(0, k)], vecs[(1, k)], vecs[(2, k)]]);
        let out = match spin {
            Spin::A => TwoSpinState::product(new_state, &partner),
            Spin::B => TwoSpinState::product(&partner, new_state),
        };
        Ok(out)
    } else {
        let proj = new_state.projector();
        let rho = match spin {
            Spin::A => tensor(&proj, &rho_other),
            Spin::B => tensor(&rho_other, &proj),
        };
        Ok(TwoSpinState::Density(rho))
    }
}

/// Drives grouped when a (spin, transition) pair carries several tones.
fn has_drive_collision<R: Real>(drives: &[DriveSpec<R>]) -> bool {
    for (i, a) in drives.iter().enumerate() {
        for b in &drives[i + 1..] {
            if a.spin == b.spin && a.transition == b.transition {
                return true;
            }
        }
    }
    false
}

/// Combined single-tone equivalents of a drive list at absolute time `t`,
/// for segments where several tones share a transition. The reference frame
/// of a colliding group rotates at the strongest tone's carrier; the others
/// beat against it through the complex envelope.
fn effective_drives_at<R: Real>(drives: &[DriveSpec<R>], t: R) -> Vec<DriveSpec<R>> {
    let mut out: Vec<DriveSpec<R>> = Vec::new();
    let mut used = vec![false; drives.len()];
    for i in 0..drives.len() {
        if used[i] {
            continue;
        }
        let group: Vec<usize> = (i..drives.len())
            .filter(|&j| {
                drives[j].spin == drives[i].spin && drives[j].transition == drives[i].transition
            })
            .collect();
        for &j in &group {
            used[j] = true;
        }
        if group.len() == 1 {
            out.push(drives[i]);
            continue;
        }
        let reference = group
            .iter()
            .copied()
            .max_by(|&a, &b| drives[a].rabi.partial_cmp(&drives[b].rabi).unwrap())
            .unwrap();
        let ref_det = drives[reference].detuning;
        let tau = R::of(std::f64::consts::TAU);
        let mut z = Cpx::new(R::zero(), R::zero());
        for &j in &group {
            let d = &drives[j];
            let beat = tau * (d.detuning - ref_det) * t + d.phase;
            z += Cpx::from_polar(d.rabi, beat);
        }
        out.push(DriveSpec {
            spin: drives[i].spin,
            transition: drives[i].transition,
            rabi: z.norm(),
            detuning: ref_det,
            phase: z.arg(),
        });
    }
    out
}

/// Largest beat frequency (MHz) among colliding drive groups.
fn max_beat_freq<R: Real>(drives: &[DriveSpec<R>]) -> R {
    let mut fmax = R::zero();
    for (i, a) in drives.iter().enumerate() {
        for b in &drives[i + 1..] {
            if a.spin == b.spin && a.transition == b.transition {
                fmax = fmax.max((a.detuning - b.detuning).abs());
            }
        }
    }
    fmax
}

/// Largest frequency present in the lab-frame Hamiltonian, MHz.
fn lab_fmax<R: Real>(params: &SystemParams<R>, drives: &[DriveSpec<R>]) -> R {
    let mut f = R::zero();
    for spin in [Spin::A, Spin::B] {
        for tr in [Transition::Plus, Transition::Minus] {
            f = f.max(params.transition_freq(spin, tr).abs());
        }
    }
    for d in drives {
        f = f.max(
            (params.transition_freq(d.spin, d.transition) + d.detuning).abs() + d.rabi,
        );
    }
    f.max(params.nu_dip.abs()).max(R::one())
}

fn evolve_rwa_segment<R: Real>(
    params: &SystemParams<R>,
    state: &mut TwoSpinState<R>,
    seg: &Segment<R>,
    t_abs: R,
) -> Result<()> {
    if !has_drive_collision(&seg.drives) {
        let h = build_rwa_hamiltonian(params, &seg.drives)?;
        let u = herm_propagator(&h, seg.duration)?;
        state.apply_unitary(&u);
        return Ok(());
    }
    // Beat-resampled midpoint integration of the colliding-tone envelope.
    let f_beat = max_beat_freq(&seg.drives).max(R::of(1e-6));
    let h_target = R::one() / (R::of(BEAT_STEPS_PER_PERIOD) * f_beat);
    let n = (seg.duration / h_target).ceil().as_f64().max(1.0) as usize;
    let h = seg.duration / R::of(n as f64);
    for k in 0..n {
        let t_mid = t_abs + h * (R::of(k as f64) + R::of(0.5));
        let eff = effective_drives_at(&seg.drives, t_mid);
        let ham = build_rwa_hamiltonian(params, &eff)?;
        let u = herm_propagator(&ham, h)?;
        state.apply_unitary(&u);
    }
    Ok(())
}

fn evolve_lab_segment<R: Real>(
    params: &SystemParams<R>,
    state: &mut TwoSpinState<R>,
    seg: &Segment<R>,
    t_abs: R,
    step: Option<R>,
) -> Result<()> {
    let fmax = lab_fmax(params, &seg.drives);
    let coarsest = R::one() / (R::of(LAB_MIN_STEPS_PER_PERIOD) * fmax);
    let h_target = match step {
        Some(s) => {
            if !(s > R::zero()) {
                return Err(Error::invalid("lab-mode step must be positive"));
            }
            if s > coarsest {
                return Err(Error::invalid(format!(
                    "lab-mode step {} exceeds 1/(50·f_max) = {}",
                    s, coarsest
                )));
            }
            s
        }
        None => R::one() / (R::of(LAB_STEPS_PER_PERIOD) * fmax),
    };
    if seg.duration.is_zero() {
        return Ok(());
    }
    let n = (seg.duration / h_target).ceil().as_f64().max(1.0) as usize;
    let h = seg.duration / R::of(n as f64);
    for k in 0..n {
        let t_mid = t_abs + h * (R::of(k as f64) + R::of(0.5));
        let ham = build_lab_hamiltonian(params, &seg.drives, t_mid);
        let u = herm_propagator(&ham, h)?;
        state.apply_unitary(&u);
    }
    Ok(())
}

/// Propagate a state through a sequence. Markers are ideal instantaneous
/// operations defined in the rotating frame; lab mode applies them as-is, so
/// physical-fidelity comparisons should use drive-only sequences.
pub fn evolve<R: Real>(
    params: &SystemParams<R>,
    state: &TwoSpinState<R>,
    seq: &PulseSequence<R>,
    mode: Mode<R>,
) -> Result<TwoSpinState<R>> {
    seq.validate()?;
    let mut out = state.clone();
    let mut t_abs = R::zero();
    for seg in &seq.segments {
        for m in &seg.markers {
            out = apply_marker(out, m)?;
        }
        if seg.duration > R::zero() {
            match mode {
                Mode::Rwa => evolve_rwa_segment(params, &mut out, seg, t_abs)?,
                Mode::Lab { step } => evolve_lab_segment(params, &mut out, seg, t_abs, step)?,
            }
        }
        t_abs += seg.duration;
    }
    for m in &seq.final_markers {
        out = apply_marker(out, m)?;
    }
    Ok(out)
}

/// Unitarity error of the propagator exp(−iHt): max |U†U − I|.
pub fn herm_propagator_unitarity<R: Real>(h: &ComplexMatrix<R>, t: R) -> Result<R> {
    Ok(herm_propagator(h, t)?.unitarity_error())
}

/// Evolve from |0,0⟩ and return the readout probability.
pub fn run_readout<R: Real>(
    params: &SystemParams<R>,
    seq: &PulseSequence<R>,
    mode: Mode<R>,
) -> Result<R> {
    let fin = evolve(params, &TwoSpinState::ground(), seq, mode)?;
    observe(&fin, &readout_projector(&seq.readout))
}

/// Named projector observable for trajectory sampling.
#[derive(Debug, Clone)]
pub struct Observable<R> {
    pub name: String,
    pub projector: ComplexMatrix<R>,
}

/// Sample projector expectations at the given times (ascending, within the
/// sequence duration) while evolving in RWA mode. A sample at t = 0 is
/// taken after the opening markers; one landing exactly on a later segment
/// boundary is taken at the end of the preceding segment, before the next
/// segment's markers; final markers apply only after all samples. Segments
/// with colliding drives are not supported here.
pub fn evolve_trajectory<R: Real>(
    params: &SystemParams<R>,
    state: &TwoSpinState<R>,
    seq: &PulseSequence<R>,
    observables: &[Observable<R>],
    sample_times: &[R],
) -> Result<Trajectory<R>> {
    seq.validate()?;
    if sample_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sample times must be ascending"));
    }
    let total = seq.total_duration();
    let eps = R::of(1e-12) * total.max(R::one());
    if let Some(&last) = sample_times.last() {
        if last > total + eps {
            return Err(Error::invalid("sample times exceed the sequence duration"));
        }
    }

    let mut series: Vec<(String, Vec<R>)> =
        observables.iter().map(|o| (o.name.clone(), Vec::new())).collect();
    let record = |state: &TwoSpinState<R>, series: &mut Vec<(String, Vec<R>)>| -> Result<()> {
        for (obs, (_, vals)) in observables.iter().zip(series.iter_mut()) {
            vals.push(observe(state, &obs.projector)?);
        }
        Ok(())
    };

    let mut current = state.clone();
    let mut t_abs = R::zero();
    let mut si = 0usize;
    for seg in &seq.segments {
        if has_drive_collision(&seg.drives) {
            return Err(Error::invalid(
                "evolve_trajectory does not support colliding drives in one segment",
            ));
        }
        for m in &seg.markers {
            current = apply_marker(current, m)?;
        }
        while si < sample_times.len() && sample_times[si] <= t_abs + eps {
            record(&current, &mut series)?;
            si += 1;
        }
        if seg.duration > R::zero() {
            let h = build_rwa_hamiltonian(params, &seg.drives)?;
            let (vals, vecs) = h.eigh()?;
            let seg_end = t_abs + seg.duration;
            let mut t_cur = t_abs;
            while si < sample_times.len() && sample_times[si] <= seg_end + eps {
                let target = sample_times[si].min(seg_end);
                let u = assemble_propagator(&vals, &vecs, target - t_cur);
                current.apply_unitary(&u);
                t_cur = target;
                record(&current, &mut series)?;
                si += 1;
            }
            if seg_end > t_cur {
                let u = assemble_propagator(&vals, &vecs, seg_end - t_cur);
                current.apply_unitary(&u);
            }
            t_abs = seg_end;
        }
    }
    for m in &seq.final_markers {
        current = apply_marker(current, m)?;
    }
    while si < sample_times.len() {
        record(&current, &mut series)?;
        si += 1;
    }

    let traj = Trajectory { times: sample_times.to_vec(), series };
    traj.validate()?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::embed;
    use crate::sequences::{
        make_deer, make_spinlock, parse_sequence, Basis, ProjectorLabel, StateLabel,
    };
    use crate::spinops::PauliAxis;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(nu_dip: f64) -> SystemParams<f64> {
        SystemParams::new(2870.0, 100.0, 40.0, nu_dip).unwrap()
    }

    fn pi_pulse_seq(spin: Spin, omega: f64) -> PulseSequence<f64> {
        let text = format!(
            "segment {}\n  drive {} plus {}\nend\nread A P0\n",
            1.0 / (2.0 * omega),
            spin.label(),
            omega
        );
        parse_sequence(&text).unwrap()
    }

    #[test]
    fn empty_sequence_leaves_state_unchanged() {
        let p = params(0.26);
        let seq = parse_sequence::<f64>("read A P0\n").unwrap();
        let state = TwoSpinState::ground();
        let out = evolve(&p, &state, &seq, Mode::Rwa).unwrap();
        assert_eq!(out, state);
    }

    #[test]
    fn resonant_pi_pulse_transfers_population() {
        let p = params(0.0);
        let seq = pi_pulse_seq(Spin::A, 5.0);
        let out = evolve(&p, &TwoSpinState::ground(), &seq, Mode::Rwa).unwrap();
        // |+1,0⟩ has index 1.
        let pop = observe(&out, &embed(Spin::A, &ProjectorLabel::PPlus1.to_matrix3())).unwrap();
        assert!((pop - 1.0).abs() <= 1e-6, "pop = {pop}");
    }

    #[test]
    fn lab_mode_validates_rwa_at_full_splitting() {
        // D = 2870 MHz, resonant Ω = 5 on A:plus, one π pulse: lab-frame
        // fidelity against the frame-mapped RWA state ≥ 0.99.
        let p = params(0.26);
        let omega = 5.0;
        let seq = pi_pulse_seq(Spin::A, omega);
        let drives = &seq.segments[0].drives;
        let t = seq.total_duration();

        let rwa = evolve(&p, &TwoSpinState::ground(), &seq, Mode::Rwa).unwrap();
        let lab = evolve(&p, &TwoSpinState::ground(), &seq, Mode::Lab { step: None }).unwrap();

        let w = crate::model::frame_unitary(&p, drives, t);
        let mut rwa_in_lab = rwa.clone();
        rwa_in_lab.apply_unitary(&w);
        let fid = lab.fidelity(&rwa_in_lab).unwrap();
        assert!(fid >= 0.99, "lab/RWA fidelity {fid}");
    }

    #[test]
    fn lab_mode_rejects_coarse_steps() {
        let p = params(0.26);
        let seq = pi_pulse_seq(Spin::A, 5.0);
        let err = evolve(
            &p,
            &TwoSpinState::ground(),
            &seq,
            Mode::Lab { step: Some(1.0) },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn lab_midpoint_is_second_order() {
        // Richardson check on a cheap system: error vs a fine reference
        // shrinks ~4× when the step is halved.
        let p = SystemParams::new(50.0, 10.0, 4.0, 0.3).unwrap();
        let seq = pi_pulse_seq(Spin::A, 5.0);
        let reference = evolve(
            &p,
            &TwoSpinState::ground(),
            &seq,
            Mode::Lab { step: Some(1.0 / (3200.0 * 65.0)) },
        )
        .unwrap();
        let coarse = evolve(
            &p,
            &TwoSpinState::ground(),
            &seq,
            Mode::Lab { step: Some(1.0 / (100.0 * 65.0)) },
        )
        .unwrap();
        let fine = evolve(
            &p,
            &TwoSpinState::ground(),
            &seq,
            Mode::Lab { step: Some(1.0 / (200.0 * 65.0)) },
        )
        .unwrap();
        let err_coarse = 1.0 - coarse.fidelity(&reference).unwrap();
        let err_fine = 1.0 - fine.fidelity(&reference).unwrap();
        let ratio = err_coarse / err_fine.max(1e-30);
        assert!(
            (2.5..40.0).contains(&ratio),
            "expected ~4x error reduction, got {ratio} ({err_coarse:e} vs {err_fine:e})"
        );
    }

    #[test]
    fn observe_examples() {
        // |0,0⟩ with P0 ⊗ I → 1.
        let p0 = embed(Spin::A, &ProjectorLabel::P0.to_matrix3());
        assert_eq!(observe(&TwoSpinState::<f64>::ground(), &p0).unwrap(), 1.0);

        // Maximally mixed state with a rank-4 projector → 4/9.
        let mixed = TwoSpinState::Density(ComplexMatrix::identity(9).scale_re(1.0 / 9.0));
        let mut p4 = ComplexMatrix::zeros(9, 9);
        for i in 0..4 {
            p4[(i, i)] = Cpx::new(1.0, 0.0);
        }
        assert_relative_eq!(observe(&mixed, &p4).unwrap(), 4.0 / 9.0, max_relative = 1e-12);

        // |B⟩_A product state with P(+1) on A → 1/2.
        let b = StateLabel::B.to_state::<f64>();
        let zero = StateLabel::Zero.to_state::<f64>();
        let state = TwoSpinState::product(&b, &zero);
        let pp = embed(Spin::A, &ProjectorLabel::PPlus1.to_matrix3());
        assert_relative_eq!(observe(&state, &pp).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn observe_rejects_non_projectors() {
        let m = embed(Spin::A, &spin1_operator(SpinOp::SxPlus)).scale_re(0.7);
        let err = observe(&TwoSpinState::<f64>::ground(), &m).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn dephase_produces_equal_mixture() {
        // (π/2)x-rotated |0⟩ on B, dephased in {0, +1}: diag(1/2, 1/2, 0).
        let seq = parse_sequence::<f64>(
            "prep B |0>\nrot B x+ 1.5707963267948966\ndephase B 0 +1\nwait 0\nread B P0\n",
        )
        .unwrap();
        let p = params(0.0);
        let out = evolve(&p, &TwoSpinState::ground(), &seq, Mode::Rwa).unwrap();
        let rb = out.reduced(Spin::B);
        assert_relative_eq!(rb[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(rb[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert!(rb[(2, 2)].re.abs() <= 1e-12);
        assert!(rb[(0, 1)].norm() <= 1e-12);
        out.validate().unwrap();

        // |0⟩ has no coherence to remove.
        let untouched = dephase_subspace(
            &TwoSpinState::<f64>::ground(),
            Spin::B,
            (Level::Zero, Level::Plus1),
        );
        let rb = untouched.reduced(Spin::B);
        assert_relative_eq!(rb[(1, 1)].re, 1.0, epsilon = 1e-12);
        untouched.validate().unwrap();
    }

    #[test]
    fn composition_is_bit_exact_in_rwa() {
        let p = params(0.26);
        let text1 = "prep A |0>\nrot A x+ 1.5707963267948966\nsegment 0.8\n  drive B plus 4.0\nend\nread A P0\n";
        let text2 = "segment 1.3\n  drive B plus 4.0\n  drive B minus 2.0\nend\nwait 0.4\nread A P0\n";
        let seq1 = parse_sequence::<f64>(text1).unwrap();
        let seq2 = parse_sequence::<f64>(text2).unwrap();

        let mut joined = seq1.clone();
        joined.segments.extend(seq2.segments.clone());
        // seq1 has no final markers to fold in.
        assert!(joined.final_markers.is_empty());
        joined.final_markers = seq2.final_markers.clone();

        let one_shot = evolve(&p, &TwoSpinState::ground(), &joined, Mode::Rwa).unwrap();
        let mid = evolve(&p, &TwoSpinState::ground(), &seq1, Mode::Rwa).unwrap();
        let two_step = evolve(&p, &mid, &seq2, Mode::Rwa).unwrap();
        assert_eq!(one_shot, two_step);
    }

    #[test]
    fn norm_and_trace_preserved_over_many_segments() {
        let p = params(0.26);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut pure = TwoSpinState::<f64>::ground();
        let mut dens = dephase_subspace(
            &{
                let seq = parse_sequence::<f64>(
                    "prep B |0>\nrot B x+ 1.5707963267948966\nwait 0\nread B P0\n",
                )
                .unwrap();
                evolve(&p, &TwoSpinState::ground(), &seq, Mode::Rwa).unwrap()
            },
            Spin::B,
            (Level::Zero, Level::Plus1),
        );
        for _ in 0..200 {
            let omega: f64 = rng.random_range(0.1..10.0);
            let dur: f64 = rng.random_range(0.01..0.5);
            let tr = if rng.random_bool(0.5) { "plus" } else { "minus" };
            let spin = if rng.random_bool(0.5) { "A" } else { "B" };
            let text = format!(
                "segment {dur}\n  drive {spin} {tr} {omega} det {} phase {}\nend\nread A P0\n",
                rng.random_range(-2.0..2.0),
                rng.random_range(0.0..std::f64::consts::TAU)
            );
            let seq = parse_sequence::<f64>(&text).unwrap();
            pure = evolve(&p, &pure, &seq, Mode::Rwa).unwrap();
            dens = evolve(&p, &dens, &seq, Mode::Rwa).unwrap();
        }
        pure.validate().unwrap();
        dens.validate().unwrap();
    }

    #[test]
    fn prep_midway_replaces_one_spin() {
        let p = params(0.26);
        // Put A in a superposition, then prep B somewhere else; A unchanged.
        let text = "prep A |0>\nrot A x+ 1.5707963267948966\nwait 0.5\nprep B |+1>\nwait 0\nread A P0\n";
        let seq = parse_sequence::<f64>(text).unwrap();
        let out = evolve(&p, &TwoSpinState::ground(), &seq, Mode::Rwa).unwrap();
        assert!(out.is_pure(), "prep on a product state must stay pure");
        let rb = out.reduced(Spin::B);
        assert_relative_eq!(rb[(0, 0)].re, 1.0, epsilon = 1e-10);
        let ra = out.reduced(Spin::A);
        assert_relative_eq!(ra[(0, 0)].re, 0.5, epsilon = 1e-10);
        assert_relative_eq!(ra[(1, 1)].re, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn trajectory_matches_pointwise_evolution() {
        let p = params(0.26);
        let tau_max = 4.0;
        let seq = make_spinlock::<f64>(7.56, (7.56, 0.0), tau_max).unwrap();
        let mut traj_seq = seq.clone();
        traj_seq.final_markers.clear();

        // Lock projector: |+y⟩⟨+y| on A's {0,+1} subspace.
        let lock = {
            let gen = crate::sequences::RotAxis {
                pauli: PauliAxis::X,
                subspace: crate::sequences::Subspace::Plus,
            };
            let u3 = rotation_unitary(&gen.generator::<f64>(), std::f64::consts::FRAC_PI_2);
            let p0 = ProjectorLabel::P0.to_matrix3::<f64>();
            let proj3 = u3.matmul(&p0).matmul(&u3.dagger());
            embed(Spin::A, &proj3)
        };
        let times: Vec<f64> = (0..=8).map(|k| tau_max * k as f64 / 8.0).collect();
        let traj = evolve_trajectory(
            &p,
            &TwoSpinState::ground(),
            &traj_seq,
            &[Observable { name: "sl".into(), projector: lock.clone() }],
            &times,
        )
        .unwrap();

        for (k, &t) in times.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let point_seq = make_spinlock::<f64>(7.56, (7.56, 0.0), t).unwrap();
            let mut stripped = point_seq.clone();
            stripped.final_markers.clear();
            let fin = evolve(&p, &TwoSpinState::ground(), &stripped, Mode::Rwa).unwrap();
            let direct = observe(&fin, &lock).unwrap();
            assert_relative_eq!(traj.series[0].1[k], direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn spinlock_readout_equals_lock_projector() {
        // The closing rotation plus P0 readout measures the same thing as
        // the |+y⟩ projector during the lock.
        let p = params(0.26);
        let tau = 3.7;
        let seq = make_spinlock::<f64>(7.56, (7.56, 0.0), tau).unwrap();
        let sl = run_readout(&p, &seq, Mode::Rwa).unwrap();

        let mut stripped = seq.clone();
        stripped.final_markers.clear();
        let fin = evolve(&p, &TwoSpinState::ground(), &stripped, Mode::Rwa).unwrap();
        let gen = crate::sequences::RotAxis {
            pauli: PauliAxis::X,
            subspace: crate::sequences::Subspace::Plus,
        };
        let u3 = rotation_unitary(&gen.generator::<f64>(), std::f64::consts::FRAC_PI_2);
        let proj3 = u3
            .matmul(&ProjectorLabel::P0.to_matrix3())
            .matmul(&u3.dagger());
        let direct = observe(&fin, &embed(Spin::A, &proj3)).unwrap();
        assert_relative_eq!(sl, direct, epsilon = 1e-10);
    }

    #[test]
    fn deer_signal_constant_without_coupling() {
        let p = params(0.0);
        for tau in [0.5, 2.0, 7.5] {
            let seq = make_deer::<f64>(Basis::Sq, tau).unwrap();
            let sig = run_readout(&p, &seq, Mode::Rwa).unwrap();
            assert_relative_eq!(sig, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn beat_resampling_converges() {
        // Two tones on one transition: halving the substep changes the
        // result at second order only.
        let p = params(0.0);
        let drives = vec![
            DriveSpec::resonant(Spin::B, Transition::Plus, 9.59),
            DriveSpec::resonant(Spin::B, Transition::Plus, 5.0).with_detuning(60.0),
        ];
        let seg = Segment { markers: Vec::new(), duration: 0.8, drives };
        let mut fine = TwoSpinState::<f64>::ground();
        let mut coarse = TwoSpinState::<f64>::ground();
        // Direct calls with scaled substep counts via duration trick:
        // evolve the same segment with the module constant, then compare
        // against a 4x-finer manual integration.
        evolve_rwa_segment(&p, &mut coarse, &seg, 0.0).unwrap();
        {
            let f_beat = 60.0f64;
            let n = (seg.duration * f_beat * BEAT_STEPS_PER_PERIOD * 4.0).ceil() as usize;
            let h = seg.duration / n as f64;
            for k in 0..n {
                let t_mid = h * (k as f64 + 0.5);
                let eff = effective_drives_at(&seg.drives, t_mid);
                let ham = build_rwa_hamiltonian(&p, &eff).unwrap();
                let u = herm_propagator(&ham, h).unwrap();
                fine.apply_unitary(&u);
            }
        }
        let fid = coarse.fidelity(&fine).unwrap();
        assert!(fid > 0.99999, "beat integration fidelity {fid}");
    }
}
