//! Structured complex matrices over `gl(n, C)` viewed as a real Lie algebra.
//!
//! The pairing `<X, Y> = Im tr(XY)` makes `u(n)`, `b(n)` and `Herm(n)` isotropic,
//! and `gl(n, C) = u(n) + b(n) = u(n) + Herm(n)`. Everything in the crate is
//! expressed through the splittings and the trigonometric R-operator defined here.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::config::{Config, STRICT_MEMBERSHIP_TOL};
use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Matrix unit `E_jk`.
pub fn unit(n: usize, j: usize, k: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(j, k)] = ONE;
    m
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Unitary defect `||g^dagger g - 1||_F`.
pub fn unitarity_defect(g: &CMat) -> f64 {
    let n = g.nrows();
    frobenius(&(g.adjoint() * g - CMat::identity(n, n)))
}

// ---------------------------------------------------------------------------
// GlElement
// ---------------------------------------------------------------------------

/// An element of `gl(n, C)`.
#[derive(Clone, PartialEq)]
pub struct GlElement(CMat);

impl GlElement {
    pub fn new(m: CMat) -> Self {
        assert!(m.is_square(), "gl(n) elements are square");
        GlElement(m)
    }

    pub fn zeros(n: usize) -> Self {
        GlElement(CMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        GlElement(CMat::identity(n, n))
    }

    pub fn unit(n: usize, j: usize, k: usize) -> Self {
        GlElement(unit(n, j, k))
    }

    pub fn from_diagonal(d: &[Complex64]) -> Self {
        let n = d.len();
        GlElement(CMat::from_fn(n, n, |j, k| if j == k { d[j] } else { ZERO }))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        GlElement(CMat::from_fn(n, n, |j, k| {
            if j == k {
                c64(d[j], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.0[(j, k)]
    }

    pub fn adjoint(&self) -> Self {
        GlElement(self.0.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        GlElement(self.0.map(|z| z * a))
    }

    pub fn scale_c(&self, a: Complex64) -> Self {
        GlElement(self.0.map(|z| z * a))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        GlElement(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `m X m^{-1}` for an invertible `m`.
    pub fn conjugated_by(&self, m: &CMat) -> Self {
        let inv = m
            .clone()
            .try_inverse()
            .expect("conjugating matrix must be invertible");
        GlElement(m * &self.0 * inv)
    }

    /// `u X u^dagger` for a unitary `u`.
    pub fn conjugated_by_unitary(&self, u: &CMat) -> Self {
        GlElement(u * &self.0 * u.adjoint())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl fmt::Debug for GlElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GlElement{}", self.0)
    }
}

impl Add for GlElement {
    type Output = GlElement;
    fn add(self, rhs: GlElement) -> GlElement {
        GlElement(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a GlElement> for &'a GlElement {
    type Output = GlElement;
    fn add(self, rhs: &GlElement) -> GlElement {
        GlElement(&self.0 + &rhs.0)
    }
}

impl AddAssign<&GlElement> for GlElement {
    fn add_assign(&mut self, rhs: &GlElement) {
        self.0 += &rhs.0;
    }
}

impl Sub for GlElement {
    type Output = GlElement;
    fn sub(self, rhs: GlElement) -> GlElement {
        GlElement(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a GlElement> for &'a GlElement {
    type Output = GlElement;
    fn sub(self, rhs: &GlElement) -> GlElement {
        GlElement(&self.0 - &rhs.0)
    }
}

impl Neg for GlElement {
    type Output = GlElement;
    fn neg(self) -> GlElement {
        GlElement(-self.0)
    }
}

impl<'a> Mul<&'a GlElement> for &'a GlElement {
    type Output = GlElement;
    fn mul(self, rhs: &GlElement) -> GlElement {
        GlElement(&self.0 * &rhs.0)
    }
}

impl Mul for GlElement {
    type Output = GlElement;
    fn mul(self, rhs: GlElement) -> GlElement {
        GlElement(self.0 * rhs.0)
    }
}

// ---------------------------------------------------------------------------
// Structured matrix types
// ---------------------------------------------------------------------------

/// Element of `U(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMat(CMat);

impl UnitaryMat {
    pub fn new(m: CMat) -> Result<Self> {
        let n = m.nrows();
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.ncols(),
            });
        }
        let defect = unitarity_defect(&m);
        if !(defect <= 1e-12 * n as f64) {
            return Err(Error::NotUnitary { defect });
        }
        Ok(UnitaryMat(m))
    }

    pub fn identity(n: usize) -> Self {
        UnitaryMat(CMat::identity(n, n))
    }

    /// Caller guarantees unitarity to rounding.
    pub(crate) fn from_raw(m: CMat) -> Self {
        UnitaryMat(m)
    }

    pub fn from_phases(q: &[f64]) -> Self {
        let d: Vec<Complex64> = q.iter().map(|&x| Complex64::from_polar(1.0, x)).collect();
        UnitaryMat(GlElement::from_diagonal(&d).into_matrix())
    }

    /// Nearest unitary obtained by a phase-fixed QR factorization; used when
    /// round-off has pushed the defect above `1e-13`.
    pub fn reorthonormalized(m: CMat) -> Self {
        UnitaryMat(phase_fixed_q(m))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.0)
    }
}

/// Q factor of a QR factorization with the diagonal of R made real positive.
pub(crate) fn phase_fixed_q(m: CMat) -> CMat {
    let n = m.nrows();
    let qr = m.qr();
    let (q, r) = qr.unpack();
    let mut q = q;
    for j in 0..n {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Element of `Herm(n)`; the constructor symmetrizes exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMat(CMat);

impl HermitianMat {
    pub fn new(m: CMat) -> Self {
        assert!(m.is_square(), "Hermitian matrices are square");
        let h = (&m + m.adjoint()) * c64(0.5, 0.0);
        let mut h = h;
        for j in 0..h.nrows() {
            h[(j, j)].im = 0.0;
        }
        HermitianMat(h)
    }

    pub fn identity(n: usize) -> Self {
        HermitianMat(CMat::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        HermitianMat(GlElement::from_real_diagonal(d).into_matrix())
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn to_gl(&self) -> GlElement {
        GlElement(self.0.clone())
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.0)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigenvalues and unitary eigenvector matrix (columns), ascending.
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        let se = SymmetricEigen::new(self.0.clone());
        let n = self.n();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let vecs = CMat::from_fn(n, n, |r, c| se.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    pub fn conjugated_by_unitary(&self, u: &CMat) -> Self {
        HermitianMat::new(u * &self.0 * u.adjoint())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Regular element `Q = diag(e^{iq_1}, ..., e^{iq_n})` of the maximal torus.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusReg {
    phases: Vec<f64>,
}

impl TorusReg {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        Self::with_gap(phases, Config::default().regularity_gap)
    }

    pub fn with_gap(phases: Vec<f64>, regularity_gap: f64) -> Result<Self> {
        if phases.len() < 2 {
            return Err(Error::TooSmall(phases.len()));
        }
        if phases.iter().any(|q| !q.is_finite()) {
            return Err(Error::Structure {
                what: "torus phases",
                detail: "non-finite phase".into(),
            });
        }
        let gap = min_chord_gap(&phases);
        if !(gap > regularity_gap) {
            return Err(Error::NotRegular {
                gap,
                threshold: regularity_gap,
            });
        }
        Ok(TorusReg { phases })
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Smallest `|e^{iq_j} - e^{iq_k}|` over `j < k`.
    pub fn min_gap(&self) -> f64 {
        min_chord_gap(&self.phases)
    }

    pub fn matrix(&self) -> CMat {
        UnitaryMat::from_phases(&self.phases).into_matrix()
    }

    /// `Q^m` for any integer power.
    pub fn power(&self, m: i32) -> CMat {
        let q: Vec<f64> = self.phases.iter().map(|x| x * m as f64).collect();
        UnitaryMat::from_phases(&q).into_matrix()
    }

    /// Returns `e^{tX} Q` for `X = i diag(shift)`.
    pub fn rotated(&self, shift: &[f64]) -> Result<Self> {
        let q = self.phases.iter().zip(shift).map(|(a, b)| a + b).collect();
        TorusReg::new(q)
    }

    /// `q_j - q_k`.
    pub fn angle(&self, j: usize, k: usize) -> f64 {
        self.phases[j] - self.phases[k]
    }
}

pub(crate) fn min_chord_gap(phases: &[f64]) -> f64 {
    let mut gap = f64::INFINITY;
    for j in 0..phases.len() {
        for k in j + 1..phases.len() {
            // |e^{ia} - e^{ib}| = 2 |sin((a - b) / 2)|
            let d = 2.0 * (0.5 * (phases[j] - phases[k])).sin().abs();
            gap = gap.min(d);
        }
    }
    gap
}

/// Element of `B(n)`: upper triangular with positive real diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BorelUpper(CMat);

impl BorelUpper {
    pub fn new(m: CMat) -> Result<Self> {
        let n = m.nrows();
        for j in 0..n {
            for k in 0..j {
                if m[(j, k)] != ZERO {
                    return Err(Error::Structure {
                        what: "B(n)",
                        detail: format!("nonzero entry ({j},{k}) below the diagonal"),
                    });
                }
            }
            let d = m[(j, j)];
            if d.im != 0.0 || !(d.re > 0.0) {
                return Err(Error::Structure {
                    what: "B(n)",
                    detail: format!("diagonal entry {j} is {d}"),
                });
            }
        }
        Ok(BorelUpper(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.0.nrows()).map(|j| self.0[(j, j)].re).collect()
    }
}

/// Element of `B(n)_+`: upper triangular with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct UnipotentUpper(CMat);

impl UnipotentUpper {
    pub fn new(m: CMat) -> Result<Self> {
        let n = m.nrows();
        for j in 0..n {
            for k in 0..j {
                if m[(j, k)] != ZERO {
                    return Err(Error::Structure {
                        what: "B(n)_+",
                        detail: format!("nonzero entry ({j},{k}) below the diagonal"),
                    });
                }
            }
            if m[(j, j)] != ONE {
                return Err(Error::Structure {
                    what: "B(n)_+",
                    detail: format!("diagonal entry {j} is {}", m[(j, j)]),
                });
            }
        }
        Ok(UnipotentUpper(m))
    }

    /// Projects onto the unipotent upper triangle (strict-lower zeroed, unit diagonal).
    pub fn from_upper_part(m: &CMat) -> Self {
        let n = m.nrows();
        UnipotentUpper(CMat::from_fn(n, n, |j, k| match j.cmp(&k) {
            std::cmp::Ordering::Less => m[(j, k)],
            std::cmp::Ordering::Equal => ONE,
            std::cmp::Ordering::Greater => ZERO,
        }))
    }

    pub fn identity(n: usize) -> Self {
        UnipotentUpper(CMat::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// Inverse by back substitution; stays exactly unipotent.
    pub fn inverse(&self) -> CMat {
        let n = self.n();
        let mut inv = CMat::identity(n, n);
        for k in 0..n {
            for j in (0..k).rev() {
                let mut s = ZERO;
                for m in j + 1..=k {
                    s += self.0[(j, m)] * inv[(m, k)];
                }
                inv[(j, k)] = -s;
            }
        }
        inv
    }

    /// Distance from the identity, used to scale step sizes.
    pub fn offset_norm(&self) -> f64 {
        let n = self.n();
        frobenius(&(&self.0 - CMat::identity(n, n)))
    }
}

// ---------------------------------------------------------------------------
// Subspaces
// ---------------------------------------------------------------------------

/// Real subspaces of `gl(n, C)` used throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subspace {
    /// anti-Hermitian
    U,
    /// upper triangular, real diagonal
    B,
    /// real diagonal
    B0,
    /// imaginary diagonal
    U0,
    /// strictly upper triangular
    BPlus,
    /// anti-Hermitian, zero diagonal
    UPerp,
    Herm,
    /// real diagonal (as Hermitian matrices)
    Herm0,
    /// Hermitian, zero diagonal
    HermPerp,
    GlPlus,
    Gl0,
    GlMinus,
}

impl Subspace {
    pub fn name(self) -> &'static str {
        match self {
            Subspace::U => "u(n)",
            Subspace::B => "b(n)",
            Subspace::B0 => "b(n)_0",
            Subspace::U0 => "u(n)_0",
            Subspace::BPlus => "b(n)_+",
            Subspace::UPerp => "u(n)_perp",
            Subspace::Herm => "Herm(n)",
            Subspace::Herm0 => "Herm(n)_0",
            Subspace::HermPerp => "Herm(n)_perp",
            Subspace::GlPlus => "gl_+",
            Subspace::Gl0 => "gl_0",
            Subspace::GlMinus => "gl_-",
        }
    }

    /// Zeroes the complementary part. For `U`/`B` this is the `split_ub` projection;
    /// for `Herm`-type spaces it is the Hermitian part.
    pub fn project(self, x: &GlElement) -> GlElement {
        let m = x.matrix();
        let n = x.n();
        let out = match self {
            Subspace::U => return split_ub(x).0,
            Subspace::B => return split_ub(x).1,
            Subspace::B0 | Subspace::Herm0 => {
                CMat::from_fn(
                    n,
                    n,
                    |j, k| if j == k { c64(m[(j, j)].re, 0.0) } else { ZERO },
                )
            }
            Subspace::U0 => CMat::from_fn(
                n,
                n,
                |j, k| if j == k { c64(0.0, m[(j, j)].im) } else { ZERO },
            ),
            Subspace::BPlus | Subspace::GlPlus => {
                CMat::from_fn(n, n, |j, k| if j < k { m[(j, k)] } else { ZERO })
            }
            Subspace::GlMinus => CMat::from_fn(n, n, |j, k| if j > k { m[(j, k)] } else { ZERO }),
            Subspace::Gl0 => CMat::from_fn(n, n, |j, k| if j == k { m[(j, j)] } else { ZERO }),
            Subspace::UPerp => CMat::from_fn(n, n, |j, k| {
                if j == k {
                    ZERO
                } else {
                    (m[(j, k)] - m[(k, j)].conj()) * 0.5
                }
            }),
            Subspace::Herm => CMat::from_fn(n, n, |j, k| {
                if j == k {
                    c64(m[(j, j)].re, 0.0)
                } else {
                    (m[(j, k)] + m[(k, j)].conj()) * 0.5
                }
            }),
            Subspace::HermPerp => CMat::from_fn(n, n, |j, k| {
                if j == k {
                    ZERO
                } else {
                    (m[(j, k)] + m[(k, j)].conj()) * 0.5
                }
            }),
        };
        GlElement(out)
    }

    /// Projection that, in strict mode, errors when the discarded part exceeds
    /// `1e-10` (absolute, Frobenius).
    pub fn enforce(self, x: &GlElement, config: &Config) -> Result<GlElement> {
        let p = self.project(x);
        if config.strict_membership {
            let discarded = (x - &p).norm();
            if discarded > STRICT_MEMBERSHIP_TOL {
                return Err(Error::Membership {
                    subspace: self.name(),
                    discarded,
                });
            }
        }
        Ok(p)
    }

    /// Norm of the part of `x` outside this subspace.
    pub fn residual(self, x: &GlElement) -> f64 {
        (x - &self.project(x)).norm()
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// The invariant bilinear form `<X, Y> = Im tr(XY)`.
pub fn pairing(x: &GlElement, y: &GlElement) -> Result<f64> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: y.n(),
        });
    }
    Ok(pair(x, y))
}

/// Unchecked pairing for internal use where dimensions agree by construction.
#[inline]
pub(crate) fn pair(x: &GlElement, y: &GlElement) -> f64 {
    let (a, b) = (x.matrix(), y.matrix());
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            s += (a[(j, k)] * b[(k, j)]).im;
        }
    }
    s
}

/// `X = X_u + X_b` with `X_u` anti-Hermitian and `X_b` upper triangular with
/// real diagonal.
pub fn split_ub(x: &GlElement) -> (GlElement, GlElement) {
    let m = x.matrix();
    let n = x.n();
    let mut u = CMat::zeros(n, n);
    for j in 0..n {
        u[(j, j)] = c64(0.0, m[(j, j)].im);
        for k in 0..j {
            u[(j, k)] = m[(j, k)];
            u[(k, j)] = -m[(j, k)].conj();
        }
    }
    let b = m - &u;
    let mut b = b;
    for j in 0..n {
        b[(j, j)].im = 0.0;
        for k in 0..j {
            b[(j, k)] = ZERO;
        }
    }
    (GlElement(u), GlElement(b))
}

/// Principal gradation `X = X_+ + X_0 + X_-`.
pub fn split_grade(x: &GlElement) -> (GlElement, GlElement, GlElement) {
    (
        Subspace::GlPlus.project(x),
        Subspace::Gl0.project(x),
        Subspace::GlMinus.project(x),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialProjection {
    /// Imaginary parts of the diagonal only.
    ImDiag,
    /// Real parts of the diagonal only.
    RealDiag,
    UOfN,
    BOfN,
}

pub fn project_special(x: &GlElement, kind: SpecialProjection) -> GlElement {
    match kind {
        SpecialProjection::ImDiag => Subspace::U0.project(x),
        SpecialProjection::RealDiag => Subspace::B0.project(x),
        SpecialProjection::UOfN => split_ub(x).0,
        SpecialProjection::BOfN => split_ub(x).1,
    }
}

/// Eigenvalue of `R(Q)` on `E_jk`, `j != k`: `-(i/2) cot((q_j - q_k)/2)`.
#[inline]
pub fn r_multiplier(q: &TorusReg, j: usize, k: usize) -> Complex64 {
    let half = 0.5 * q.angle(j, k);
    c64(0.0, -0.5 * half.cos() / half.sin())
}

/// The trigonometric R-operator `R(Q) = 1/2 (Ad_Q + id)(Ad_Q - id)^{-1}` on
/// off-diagonal matrices, zero on the diagonal.
pub fn r_apply(q: &TorusReg, x: &GlElement) -> Result<GlElement> {
    if q.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            found: x.n(),
        });
    }
    Ok(r_apply_unchecked(q, x))
}

pub(crate) fn r_apply_unchecked(q: &TorusReg, x: &GlElement) -> GlElement {
    let n = x.n();
    let m = x.matrix();
    GlElement(CMat::from_fn(n, n, |j, k| {
        if j == k {
            ZERO
        } else {
            r_multiplier(q, j, k) * m[(j, k)]
        }
    }))
}

/// `[X, Y]_R = [R X, Y] + [X, R Y]`.
pub fn r_bracket(q: &TorusReg, x: &GlElement, y: &GlElement) -> Result<GlElement> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: y.n(),
        });
    }
    let rx = r_apply(q, x)?;
    let ry = r_apply(q, y)?;
    Ok(rx.commutator(y) + x.commutator(&ry))
}

/// `L = b b^dagger` with `b` upper triangular, positive diagonal.
///
/// Computed by conjugating with the index reversal, taking the lower Cholesky
/// factor and reversing back.
pub fn chol_upper(l: &HermitianMat) -> Result<BorelUpper> {
    chol_upper_with(l, &Config::default())
}

pub fn chol_upper_with(l: &HermitianMat, config: &Config) -> Result<BorelUpper> {
    let n = l.n();
    let min_eig = l.eigenvalues().first().copied().unwrap_or(f64::NAN);
    if !(min_eig > config.pd_floor) {
        return Err(Error::NotPositiveDefinite {
            min_eig,
            floor: config.pd_floor,
        });
    }
    let m = l.matrix();
    let rev = CMat::from_fn(n, n, |j, k| m[(n - 1 - j, n - 1 - k)]);
    let chol = Cholesky::new(rev).ok_or(Error::NotPositiveDefinite {
        min_eig,
        floor: config.pd_floor,
    })?;
    let low = chol.l();
    let mut b = CMat::from_fn(n, n, |j, k| {
        if j <= k {
            low[(n - 1 - j, n - 1 - k)]
        } else {
            ZERO
        }
    });
    // make the diagonal exactly real positive by absorbing phases into columns
    for k in 0..n {
        let d = b[(k, k)];
        let ph = d / d.norm();
        for j in 0..=k {
            b[(j, k)] /= ph;
        }
        b[(k, k)] = c64(d.norm(), 0.0);
    }
    BorelUpper::new(b)
}

/// Pairs of mutually dual real subspaces under `<.,.>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpacePair {
    /// `u(n) <-> b(n)`
    UB,
    /// `u(n)_0 <-> b(n)_0`
    U0B0,
    /// `u(n)_perp <-> b(n)_+`
    UPerpBPlus,
    /// `u(n) <-> Herm(n)`
    UHerm,
    /// `u(n)_0 <-> Herm(n)_0`
    U0Herm0,
    /// `u(n)_perp <-> Herm(n)_perp`
    UPerpHermPerp,
}

/// A basis of the left space of a [`SpacePair`] together with its dual basis in
/// the right space: `<left[a], right[b]> = delta_ab`.
#[derive(Clone, Debug)]
pub struct DualBasis {
    pub left: Vec<GlElement>,
    pub right: Vec<GlElement>,
}

impl DualBasis {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// `sum_a c_a * left[a]`
    pub fn combine_left(&self, n: usize, coeffs: &[f64]) -> GlElement {
        combine(n, &self.left, coeffs)
    }

    /// `sum_a c_a * right[a]`
    pub fn combine_right(&self, n: usize, coeffs: &[f64]) -> GlElement {
        combine(n, &self.right, coeffs)
    }
}

fn combine(n: usize, basis: &[GlElement], coeffs: &[f64]) -> GlElement {
    let mut acc = CMat::zeros(n, n);
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            acc += b.matrix() * c64(c, 0.0);
        }
    }
    GlElement(acc)
}

pub fn dual_basis(n: usize, pair: SpacePair) -> DualBasis {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let e = |j, k| unit(n, j, k);
    let diag = matches!(
        pair,
        SpacePair::UB | SpacePair::U0B0 | SpacePair::UHerm | SpacePair::U0Herm0
    );
    let off = matches!(
        pair,
        SpacePair::UB | SpacePair::UPerpBPlus | SpacePair::UHerm | SpacePair::UPerpHermPerp
    );
    if diag {
        // <i E_jj, E_jj> = 1 for both b(n)_0 and Herm(n)_0
        for j in 0..n {
            left.push(GlElement(e(j, j) * I));
            right.push(GlElement(e(j, j)));
        }
    }
    if off {
        let herm = matches!(pair, SpacePair::UHerm | SpacePair::UPerpHermPerp);
        for j in 0..n {
            for k in j + 1..n {
                if herm {
                    left.push(GlElement((e(j, k) + e(k, j)) * c64(0.0, 0.5)));
                    right.push(GlElement(e(j, k) + e(k, j)));
                    left.push(GlElement((e(k, j) - e(j, k)) * c64(0.5, 0.0)));
                    right.push(GlElement((e(j, k) - e(k, j)) * I));
                } else {
                    left.push(GlElement(e(j, k) - e(k, j)));
                    right.push(GlElement(e(j, k) * c64(0.0, -1.0)));
                    left.push(GlElement((e(j, k) + e(k, j)) * I));
                    right.push(GlElement(e(j, k)));
                }
            }
        }
    }
    DualBasis { left, right }
}

/// `exp(A)` by scaling and squaring of a truncated Taylor series. Used for the
/// small displacements of finite differencing, where it is accurate to rounding.
pub fn expm_taylor(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = frobenius(a);
    if norm == 0.0 {
        return CMat::identity(n, n);
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * c64(0.5f64.powi(squarings), 0.0);
    let mut out = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled * c64(1.0 / k as f64, 0.0);
        out += &term;
    }
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// `exp(tX)` for nilpotent `X`; the series terminates after `n` terms.
pub fn nilpotent_exp(x: &CMat, t: f64) -> CMat {
    let n = x.nrows();
    let mut out = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..n {
        term = &term * x * c64(t / k as f64, 0.0);
        out += &term;
    }
    out
}
