//! Spin-1 operator algebra and small dense complex-matrix primitives.
//!
//! Basis order is fixed globally as (|+1⟩, |0⟩, |−1⟩); the joint basis of a
//! spin pair is `A ⊗ B` with the same per-spin ordering. All matrices are
//! dense and row-major; everything here targets 3×3 and 9×9 problems, so
//! clarity and determinism win over asymptotic tricks.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::{herm_tol, unitary_tol, Real};

/// Complex scalar over the crate's real type.
pub type Cpx<R> = Complex<R>;

/// Spin-1 sublevel, ordered (|+1⟩, |0⟩, |−1⟩).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Level {
    Plus1,
    Zero,
    Minus1,
}

impl Level {
    /// Position of the level in the fixed basis order.
    pub fn index(self) -> usize {
        match self {
            Level::Plus1 => 0,
            Level::Zero => 1,
            Level::Minus1 => 2,
        }
    }

    /// Magnetic quantum number m_s.
    pub fn m(self) -> i8 {
        match self {
            Level::Plus1 => 1,
            Level::Zero => 0,
            Level::Minus1 => -1,
        }
    }
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<Cpx<R>>,
}

impl<R: Real> ComplexMatrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Cpx::new(R::zero(), R::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cpx::new(R::one(), R::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cpx<R>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Cpx<R>] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> Cpx<R> {
        debug_assert!(self.is_square());
        let mut t = Cpx::new(R::zero(), R::zero());
        for i in 0..self.rows {
            t += self[(i, i)];
        }
        t
    }

    pub fn scale(&self, s: Cpx<R>) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn scale_re(&self, s: R) -> Self {
        self.scale(Cpx::new(s, R::zero()))
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.re.is_zero() && a.im.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Cpx<R>]) -> Vec<Cpx<R>> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = Cpx::new(R::zero(), R::zero());
                for c in 0..self.cols {
                    acc += self[(r, c)] * v[c];
                }
                acc
            })
            .collect()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> R {
        self.data.iter().map(|z| z.norm()).fold(R::zero(), R::max)
    }

    /// Largest entrywise difference `max |self − other|`.
    pub fn max_abs_diff(&self, other: &Self) -> R {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(R::zero(), R::max)
    }

    /// max |M − M†|.
    pub fn hermiticity_error(&self) -> R {
        debug_assert!(self.is_square());
        let mut worst = R::zero();
        for r in 0..self.rows {
            for c in r..self.cols {
                let d = (self[(r, c)] - self[(c, r)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: R) -> bool {
        self.is_square() && self.hermiticity_error() <= tol
    }

    /// max |U†U − I|.
    pub fn unitarity_error(&self) -> R {
        let gram = self.dagger().matmul(self);
        gram.max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: R) -> bool {
        self.is_square() && self.unitarity_error() <= tol
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues in ascending order and the unitary
    /// matrix whose columns are the matching eigenvectors, so that
    /// `self = V · diag(λ) · V†`. Deterministic for identical inputs.
    pub fn eigh(&self) -> Result<(Vec<R>, ComplexMatrix<R>)> {
        if !self.is_square() {
            return Err(Error::contract("eigh requires a square matrix"));
        }
        let scale = self.max_abs().max(R::one());
        let tol = herm_tol::<R>() * scale;
        if self.hermiticity_error() > tol {
            return Err(Error::contract(format!(
                "eigh requires a Hermitian matrix (max |M - M^H| = {:e})",
                self.hermiticity_error().as_f64()
            )));
        }

        let n = self.rows;
        // Work on the exactly symmetrized copy.
        let mut a = Self::from_fn(n, n, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()).scale(R::of(0.5))
        });
        let mut v = Self::identity(n);

        let off_tol = R::epsilon() * scale * R::of(n as f64);
        let max_sweeps = 60;
        let mut converged = false;
        for _ in 0..max_sweeps {
            let mut off = R::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off <= off_tol {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if !converged {
            // One final check; quadratic convergence means this is unreachable
            // for sane inputs.
            let mut off = R::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off > off_tol {
                return Err(Error::Numerical(format!(
                    "Jacobi eigensolver failed to converge (residual {:e})",
                    off.as_f64()
                )));
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)].re.partial_cmp(&a[(j, j)].re).expect("NaN eigenvalue")
        });
        let eigvals: Vec<R> = order.iter().map(|&i| a[(i, i)].re).collect();
        let eigvecs = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok((eigvals, eigvecs))
    }
}

/// One cyclic-Jacobi step annihilating the (p, q) entry of Hermitian `a`,
/// accumulating the rotation into `v`.
fn jacobi_rotate<R: Real>(a: &mut ComplexMatrix<R>, v: &mut ComplexMatrix<R>, p: usize, q: usize) {
    let gamma = a[(p, q)];
    let g = gamma.norm();
    let scale = a[(p, p)].re.abs() + a[(q, q)].re.abs();
    if g <= R::epsilon() * scale.max(R::min_positive_value()) {
        // Entry already negligible; zero it exactly to aid convergence checks.
        a[(p, q)] = Cpx::new(R::zero(), R::zero());
        a[(q, p)] = Cpx::new(R::zero(), R::zero());
        return;
    }
    let phase = gamma.unscale(g); // e^{iφ}
    let alpha = a[(p, p)].re;
    let beta = a[(q, q)].re;
    let theta_c = (alpha - beta) / (g + g);
    let sign = if theta_c >= R::zero() { R::one() } else { -R::one() };
    let t = sign / (theta_c.abs() + (theta_c * theta_c + R::one()).sqrt());
    let c = R::one() / (t * t + R::one()).sqrt();
    let s = t * c;

    // G = P·R with P = diag(1, e^{-iφ}) on (p, q) and R the real rotation
    // [[c, -s], [s, c]]; then G† A G zeroes the pivot.
    let gpp = Cpx::new(c, R::zero());
    let gpq = Cpx::new(-s, R::zero());
    let gqp = phase.conj().scale(s);
    let gqq = phase.conj().scale(c);

    let n = a.rows();
    // Rows: A ← G†A.
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = apj.scale(c) + aqj * phase.scale(s);
        a[(q, j)] = apj.scale(-s) + aqj * phase.scale(c);
    }
    // Columns: A ← AG.
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * gpp + aiq * gqp;
        a[(i, q)] = aip * gpq + aiq * gqq;
    }
    // Exact post-state of the 2×2 block.
    a[(p, q)] = Cpx::new(R::zero(), R::zero());
    a[(q, p)] = Cpx::new(R::zero(), R::zero());
    a[(p, p)] = Cpx::new(alpha + t * g, R::zero());
    a[(q, q)] = Cpx::new(beta - t * g, R::zero());

    for i in 0..v.rows() {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * gpp + viq * gqp;
        v[(i, q)] = vip * gpq + viq * gqq;
    }
}

impl<R: Real> std::ops::Index<(usize, usize)> for ComplexMatrix<R> {
    type Output = Cpx<R>;
    fn index(&self, (r, c): (usize, usize)) -> &Cpx<R> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<R: Real> std::ops::IndexMut<(usize, usize)> for ComplexMatrix<R> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Cpx<R> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<R: Real> std::ops::Add for &ComplexMatrix<R> {
    type Output = ComplexMatrix<R>;
    fn add(self, rhs: Self) -> ComplexMatrix<R> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(&rhs.data) {
            *o += *r;
        }
        out
    }
}

impl<R: Real> std::ops::Sub for &ComplexMatrix<R> {
    type Output = ComplexMatrix<R>;
    fn sub(self, rhs: Self) -> ComplexMatrix<R> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(&rhs.data) {
            *o -= *r;
        }
        out
    }
}

impl<R: Real> std::ops::Mul for &ComplexMatrix<R> {
    type Output = ComplexMatrix<R>;
    fn mul(self, rhs: Self) -> ComplexMatrix<R> {
        self.matmul(rhs)
    }
}

/// Spin-1 operator kinds available from [`spin1_operator`].
///
/// The transition operators carry unit matrix elements (not 1/√2): the
/// ladder factor is absorbed into the drive-amplitude calibration so that a
/// user-facing Rabi amplitude Ω is exactly the on-resonance population
/// oscillation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinOp {
    /// diag(+1, 0, −1).
    Sz,
    /// σx on the {|0⟩, |+1⟩} subspace.
    SxPlus,
    /// σx on the {|0⟩, |−1⟩} subspace.
    SxMinus,
    /// σy on the {|0⟩, |+1⟩} subspace.
    SyPlus,
    /// σy on the {|0⟩, |−1⟩} subspace.
    SyMinus,
    /// Rank-1 projector onto a sublevel.
    Proj(Level),
}

/// Pauli axis for two-level subspace operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// Pauli operator on the two-dimensional subspace spanned by `upper` and
/// `lower`: σx = |u⟩⟨l| + |l⟩⟨u|, σy = −i|u⟩⟨l| + i|l⟩⟨u|, σz = |u⟩⟨u| − |l⟩⟨l|.
pub fn subspace_pauli<R: Real>(axis: PauliAxis, upper: Level, lower: Level) -> ComplexMatrix<R> {
    assert_ne!(upper, lower, "subspace_pauli needs two distinct levels");
    let (u, l) = (upper.index(), lower.index());
    let mut m = ComplexMatrix::zeros(3, 3);
    match axis {
        PauliAxis::X => {
            m[(u, l)] = Cpx::new(R::one(), R::zero());
            m[(l, u)] = Cpx::new(R::one(), R::zero());
        }
        PauliAxis::Y => {
            m[(u, l)] = Cpx::new(R::zero(), -R::one());
            m[(l, u)] = Cpx::new(R::zero(), R::one());
        }
        PauliAxis::Z => {
            m[(u, u)] = Cpx::new(R::one(), R::zero());
            m[(l, l)] = Cpx::new(-R::one(), R::zero());
        }
    }
    m
}

/// The 3×3 spin-1 operator of the requested kind. All returned matrices are
/// Hermitian.
pub fn spin1_operator<R: Real>(kind: SpinOp) -> ComplexMatrix<R> {
    match kind {
        SpinOp::Sz => {
            let mut m = ComplexMatrix::zeros(3, 3);
            m[(0, 0)] = Cpx::new(R::one(), R::zero());
            m[(2, 2)] = Cpx::new(-R::one(), R::zero());
            m
        }
        SpinOp::SxPlus => subspace_pauli(PauliAxis::X, Level::Plus1, Level::Zero),
        SpinOp::SxMinus => subspace_pauli(PauliAxis::X, Level::Minus1, Level::Zero),
        SpinOp::SyPlus => subspace_pauli(PauliAxis::Y, Level::Plus1, Level::Zero),
        SpinOp::SyMinus => subspace_pauli(PauliAxis::Y, Level::Minus1, Level::Zero),
        SpinOp::Proj(level) => {
            let mut m = ComplexMatrix::zeros(3, 3);
            let i = level.index();
            m[(i, i)] = Cpx::new(R::one(), R::zero());
            m
        }
    }
}

/// Kronecker product. Dimensions multiply; satisfies the mixed-product
/// identity (A⊗B)(C⊗D) = AC ⊗ BD.
pub fn tensor<R: Real>(a: &ComplexMatrix<R>, b: &ComplexMatrix<R>) -> ComplexMatrix<R> {
    let (ar, ac) = (a.rows(), a.cols());
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Exact propagator exp(−iHt) of a Hermitian matrix via eigendecomposition.
///
/// `h` must be in angular units (rad/µs) and `t` in µs. The result is
/// unitary to the crate's unitarity tolerance and deterministic.
pub fn herm_propagator<R: Real>(h: &ComplexMatrix<R>, t: R) -> Result<ComplexMatrix<R>> {
    let (vals, vecs) = h.eigh()?;
    Ok(assemble_propagator(&vals, &vecs, t))
}

/// Assemble exp(−i λ t) from a precomputed eigensystem. Split out so that
/// time evolution can reuse one decomposition for many durations.
pub fn assemble_propagator<R: Real>(
    vals: &[R],
    vecs: &ComplexMatrix<R>,
    t: R,
) -> ComplexMatrix<R> {
    let n = vals.len();
    // V · diag(e^{-iλt}) · V†
    let mut vd = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        let ph = Cpx::new(R::zero(), -vals[c] * t).exp();
        for r in 0..n {
            vd[(r, c)] = vecs[(r, c)] * ph;
        }
    }
    vd.matmul(&vecs.dagger())
}

/// Pure qutrit state, amplitudes in basis order (|+1⟩, |0⟩, |−1⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct QutritState<R> {
    pub amps: [Cpx<R>; 3],
}

impl<R: Real> QutritState<R> {
    pub fn new(amps: [Cpx<R>; 3]) -> Self {
        Self { amps }
    }

    /// Basis state |m⟩.
    pub fn ket(level: Level) -> Self {
        let mut amps = [Cpx::new(R::zero(), R::zero()); 3];
        amps[level.index()] = Cpx::new(R::one(), R::zero());
        Self { amps }
    }

    /// |B⟩ = (|+1⟩ + |−1⟩)/√2.
    pub fn ket_b() -> Self {
        let h = Cpx::new(R::of(std::f64::consts::FRAC_1_SQRT_2), R::zero());
        Self { amps: [h, Cpx::new(R::zero(), R::zero()), h] }
    }

    /// |D⟩ = (|+1⟩ − |−1⟩)/√2.
    pub fn ket_d() -> Self {
        let h = Cpx::new(R::of(std::f64::consts::FRAC_1_SQRT_2), R::zero());
        Self { amps: [h, Cpx::new(R::zero(), R::zero()), -h] }
    }

    pub fn norm(&self) -> R {
        self.amps.iter().map(|a| a.norm_sqr()).fold(R::zero(), |s, x| s + x).sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - R::one()).abs() <= unitary_tol::<R>()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Cpx<R> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * *b)
            .fold(Cpx::new(R::zero(), R::zero()), |s, x| s + x)
    }

    /// Rank-1 projector |ψ⟩⟨ψ|.
    pub fn projector(&self) -> ComplexMatrix<R> {
        ComplexMatrix::from_fn(3, 3, |r, c| self.amps[r] * self.amps[c].conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c64(re: f64, im: f64) -> Cpx<f64> {
        Cpx::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> ComplexMatrix<f64> {
        let mut m = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let z = c64(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
                if r == c {
                    m[(r, c)] = c64(z.re, 0.0);
                } else {
                    m[(r, c)] = z;
                    m[(c, r)] = z.conj();
                }
            }
        }
        m
    }

    #[test]
    fn sz_is_diagonal_plus_zero_minus() {
        let sz = spin1_operator::<f64>(SpinOp::Sz);
        assert_eq!(sz[(0, 0)], c64(1.0, 0.0));
        assert_eq!(sz[(1, 1)], c64(0.0, 0.0));
        assert_eq!(sz[(2, 2)], c64(-1.0, 0.0));
        assert_eq!(sz.hermiticity_error(), 0.0);
    }

    #[test]
    fn proj_zero_is_middle_projector() {
        let p = spin1_operator::<f64>(SpinOp::Proj(Level::Zero));
        let expect = ComplexMatrix::from_fn(3, 3, |r, c| {
            if r == 1 && c == 1 { c64(1.0, 0.0) } else { c64(0.0, 0.0) }
        });
        assert_eq!(p, expect);
    }

    #[test]
    fn sx_plus_squares_to_identity_on_its_subspace() {
        let sx = spin1_operator::<f64>(SpinOp::SxPlus);
        let sq = sx.matmul(&sx);
        // Identity on span{|0⟩, |+1⟩}, zero on |−1⟩.
        assert_eq!(sq[(0, 0)], c64(1.0, 0.0));
        assert_eq!(sq[(1, 1)], c64(1.0, 0.0));
        assert_eq!(sq[(2, 2)], c64(0.0, 0.0));
        assert_eq!(sq[(0, 1)], c64(0.0, 0.0));
        assert_eq!(sq[(0, 2)], c64(0.0, 0.0));
    }

    #[test]
    fn drive_operators_only_couple_their_subspace() {
        let sxm = spin1_operator::<f64>(SpinOp::SxMinus);
        assert_eq!(sxm[(1, 2)], c64(1.0, 0.0));
        assert_eq!(sxm[(2, 1)], c64(1.0, 0.0));
        assert_eq!(sxm[(0, 1)], c64(0.0, 0.0));
        assert_eq!(sxm[(0, 2)], c64(0.0, 0.0));
        for op in [SpinOp::SxPlus, SpinOp::SxMinus, SpinOp::SyPlus, SpinOp::SyMinus] {
            assert_eq!(spin1_operator::<f64>(op).hermiticity_error(), 0.0);
        }
    }

    #[test]
    fn tensor_identities() {
        let i3 = ComplexMatrix::<f64>::identity(3);
        assert_eq!(tensor(&i3, &i3), ComplexMatrix::identity(9));

        let p0 = spin1_operator::<f64>(SpinOp::Proj(Level::Zero));
        let pp = spin1_operator::<f64>(SpinOp::Proj(Level::Plus1));
        let t = tensor(&p0, &pp);
        // Rank-1 projector on |0,+1⟩ = index 3·1 + 0 = 3.
        assert_eq!(t.trace(), c64(1.0, 0.0));
        assert_eq!(t[(3, 3)], c64(1.0, 0.0));
        assert_eq!(t.matmul(&t), t);
    }

    #[test]
    fn sz_tensor_sz_spectrum() {
        let sz = spin1_operator::<f64>(SpinOp::Sz);
        let zz = tensor(&sz, &sz);
        let (vals, vecs) = zz.eigh().unwrap();
        let count = |x: f64| vals.iter().filter(|v| (**v - x).abs() < 1e-12).count();
        assert_eq!(count(1.0), 2);
        assert_eq!(count(0.0), 5);
        assert_eq!(count(-1.0), 2);
        assert!(vecs.is_unitary(1e-12));
    }

    #[test]
    fn tensor_mixed_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rand_m = |rng: &mut ChaCha8Rng| {
            ComplexMatrix::from_fn(3, 3, |_, _| {
                c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let (a, b, c, d) = (rand_m(&mut rng), rand_m(&mut rng), rand_m(&mut rng), rand_m(&mut rng));
        let lhs = tensor(&a, &b).matmul(&tensor(&c, &d));
        let rhs = tensor(&a.matmul(&c), &b.matmul(&d));
        assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn tensor_associative() {
        // Exact equality on operator matrices whose entry products are exact.
        let sz = spin1_operator::<f64>(SpinOp::Sz);
        let sx = spin1_operator::<f64>(SpinOp::SxPlus);
        let sy = spin1_operator::<f64>(SpinOp::SyMinus);
        assert_eq!(tensor(&tensor(&sz, &sx), &sy), tensor(&sz, &tensor(&sx, &sy)));

        // Random entries re-associate scalar products; equal to the ulp.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rand_m = |rng: &mut ChaCha8Rng, n: usize| {
            ComplexMatrix::from_fn(n, n, |_, _| {
                c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let a = rand_m(&mut rng, 2);
        let b = rand_m(&mut rng, 3);
        let c = rand_m(&mut rng, 2);
        let lhs = tensor(&tensor(&a, &b), &c);
        let rhs = tensor(&a, &tensor(&b, &c));
        assert!(lhs.max_abs_diff(&rhs) <= 1e-15);
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..20 {
            let n = if k % 2 == 0 { 3 } else { 9 };
            let h = random_hermitian(n, &mut rng, 10.0);
            let (vals, v) = h.eigh().unwrap();
            assert!(v.is_unitary(1e-12), "eigenvectors not unitary");
            let mut lam = ComplexMatrix::zeros(n, n);
            for i in 0..n {
                lam[(i, i)] = c64(vals[i], 0.0);
            }
            let rebuilt = v.matmul(&lam).matmul(&v.dagger());
            assert!(h.max_abs_diff(&rebuilt) <= 1e-11 * 10.0);
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "eigenvalues not sorted");
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut m = ComplexMatrix::<f64>::identity(3);
        m[(0, 1)] = c64(1e-6, 0.0);
        assert!(matches!(m.eigh(), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn propagator_at_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(9, &mut rng, 100.0);
        let u = herm_propagator(&h, 0.0).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(9)) <= 1e-12);
    }

    #[test]
    fn propagator_full_period_phase() {
        // H = 2π f proj(+1), t = 1/f: phase e^{−i2π} on |+1⟩ → identity.
        let f = 3.7;
        let h = spin1_operator::<f64>(SpinOp::Proj(Level::Plus1)).scale_re(2.0 * std::f64::consts::PI * f);
        let u = herm_propagator(&h, 1.0 / f).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(3)) <= 1e-9);
    }

    #[test]
    fn pi_rotation_moves_zero_to_plus_one() {
        // H = π Sx+ is a drive at Ω = 1 MHz under the module's calibration
        // (coupling πΩ), so the π pulse lasts 1/(2Ω) = 0.5 µs and the
        // population oscillates at exactly 1 MHz.
        let h = spin1_operator::<f64>(SpinOp::SxPlus).scale_re(std::f64::consts::PI);
        let u = herm_propagator(&h, 0.5).unwrap();
        let psi0 = QutritState::<f64>::ket(Level::Zero);
        let out = u.mul_vec(&psi0.amps);
        assert!((out[Level::Plus1.index()].norm_sqr() - 1.0).abs() <= 1e-10);
        assert!(out[Level::Zero.index()].norm_sqr() <= 1e-10);

        // One full period later the population is back.
        let u = herm_propagator(&h, 1.0).unwrap();
        let back = u.mul_vec(&psi0.amps);
        assert!((back[Level::Zero.index()].norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn propagators_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let h = random_hermitian(9, &mut rng, 2e4);
            let t = rng.random_range(0.0..10.0);
            let u = herm_propagator(&h, t).unwrap();
            assert!(u.unitarity_error() <= 1e-10, "unitarity {:e}", u.unitarity_error());
        }
    }

    #[test]
    fn propagator_matches_taylor_series_oracle() {
        // Independent route: truncated Taylor series of exp(−iHt) for a
        // small-norm H.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(9, &mut rng, 0.3);
        let t = 0.9;
        let u = herm_propagator(&h, t).unwrap();

        let n = 9;
        let mut series = ComplexMatrix::<f64>::identity(n);
        let mut term = ComplexMatrix::<f64>::identity(n);
        let miht = h.scale(c64(0.0, -t));
        for k in 1..=24 {
            term = term.matmul(&miht).scale(c64(1.0 / k as f64, 0.0));
            series = &series + &term;
        }
        assert!(u.max_abs_diff(&series) <= 1e-12);
    }

    #[test]
    fn herm_propagator_rejects_non_hermitian() {
        let mut m = ComplexMatrix::<f64>::zeros(3, 3);
        m[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(herm_propagator(&m, 1.0), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn real_combinations_of_spin_ops_stay_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ops = [
            SpinOp::Sz,
            SpinOp::SxPlus,
            SpinOp::SxMinus,
            SpinOp::SyPlus,
            SpinOp::SyMinus,
            SpinOp::Proj(Level::Plus1),
        ];
        for _ in 0..100 {
            let mut acc = ComplexMatrix::<f64>::zeros(3, 3);
            for op in ops {
                let w: f64 = rng.random_range(-5.0..5.0);
                acc = &acc + &spin1_operator(op).scale_re(w);
            }
            assert!(acc.hermiticity_error() <= 1e-12);
        }
    }

    #[test]
    fn dq_states_are_orthonormal() {
        let b = QutritState::<f64>::ket_b();
        let d = QutritState::<f64>::ket_d();
        assert!(b.is_normalized() && d.is_normalized());
        assert!(b.inner(&d).norm() <= 1e-12);
    }

    #[test]
    fn generic_scalar_smoke_f32() {
        let h = spin1_operator::<f32>(SpinOp::SxPlus).scale_re(std::f32::consts::PI);
        let u = herm_propagator(&h, 0.5f32).unwrap();
        let out = u.mul_vec(&QutritState::<f32>::ket(Level::Zero).amps);
        assert!((out[0].norm_sqr() - 1.0).abs() < 1e-3);
    }
}
