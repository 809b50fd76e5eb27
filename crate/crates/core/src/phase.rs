//! Chart points, observables and the derivative engine.
//!
//! Each chart carries its own notion of tangent displacement (left/right
//! multiplication on the group factors, additive shifts on the linear factors)
//! and its own gradient, a tuple of Lie-algebra elements dual to those
//! displacements under `<X, Y> = Im tr(XY)`. Gradients are assembled from
//! central differences along a basis of displacements, or supplied analytically
//! by the observable.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    c64, dual_basis, expm_taylor, nilpotent_exp, pair, phase_fixed_q, split_ub, CMat, GlElement,
    HermitianMat, SpacePair, Subspace, TorusReg, UnipotentUpper, UnitaryMat, I, ZERO,
};
use crate::config::{Config, FD_REL_STEP};
use crate::coords;
use crate::error::{Error, Result};

/// The four coordinate charts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// `(g, L)` on `U(n) x Herm(n)`
    Full,
    /// `(Q, L)` on `T^n_reg x Herm(n)`
    Red,
    /// `(Q, p, lambda)`
    Rs,
    /// `(Q, p, phi)`
    Suth,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Chart::Full => "full",
            Chart::Red => "red",
            Chart::Rs => "rs",
            Chart::Suth => "suth",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Chart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Chart::Full),
            "red" => Ok(Chart::Red),
            "rs" => Ok(Chart::Rs),
            "suth" => Ok(Chart::Suth),
            other => Err(Error::Config(format!("unknown chart `{other}`"))),
        }
    }
}

/// Linear operations on gradient tuples.
pub trait Gradient: Clone + Send + Sync + fmt::Debug {
    /// `self += a * other`
    fn axpy(&mut self, a: f64, other: &Self);
    fn scale(&mut self, a: f64);
    /// Euclidean norm over all components.
    fn norm(&self) -> f64;

    fn scaled(&self, a: f64) -> Self {
        let mut g = self.clone();
        g.scale(a);
        g
    }
}

/// A point of one chart together with its tangent displacements.
pub trait ChartPoint: Clone + Send + Sync + fmt::Debug + 'static {
    type Gradient: Gradient;
    type Tangent: Clone + Send + Sync + fmt::Debug;
    const CHART: Chart;

    fn n(&self) -> usize;
    /// Size of the linear coordinates; finite-difference steps scale with `1 + norm`.
    fn coord_norm(&self) -> f64;
    /// Length over which the chart map varies appreciably; multiplies the
    /// finite-difference step.
    fn fd_length_scale(&self) -> f64 {
        1.0
    }
    /// Finite-difference length scale along `v`.
    fn fd_scale(&self, _v: &Self::Tangent) -> f64 {
        (1.0 + self.coord_norm()) * self.fd_length_scale()
    }
    /// Basis of displacement directions matching [`ChartPoint::assemble`].
    fn basis_tangents(&self) -> Vec<Self::Tangent>;
    /// The point displaced by parameter `t` along `v`; `None` if it leaves the chart.
    fn displaced(&self, v: &Self::Tangent, t: f64) -> Option<Self>;
    /// Gradient from directional derivatives along [`ChartPoint::basis_tangents`].
    fn assemble(&self, derivs: &[f64]) -> Self::Gradient;
    /// The defining pairing of the gradient with a displacement direction.
    fn pair_gradient(grad: &Self::Gradient, v: &Self::Tangent) -> f64;
    fn random_tangent<R: Rng>(&self, rng: &mut R) -> Self::Tangent;
}

// ---------------------------------------------------------------------------
// Points
// ---------------------------------------------------------------------------

/// `(g, L)`: a point of the unreduced phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct FullPoint {
    pub g: UnitaryMat,
    pub l: HermitianMat,
}

/// `(Q, L)` with `Q` regular.
#[derive(Clone, Debug, PartialEq)]
pub struct RedPoint {
    pub q: TorusReg,
    pub l: HermitianMat,
}

/// `(Q, p, lambda)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RsPoint {
    pub q: TorusReg,
    pub p: Vec<f64>,
    pub lambda: UnipotentUpper,
}

/// `(Q, p, phi)` with `phi` Hermitian and zero on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SuthPoint {
    pub q: TorusReg,
    pub p: Vec<f64>,
    phi: HermitianMat,
}

impl FullPoint {
    pub fn new(g: UnitaryMat, l: HermitianMat) -> Result<Self> {
        if g.n() != l.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found: l.n(),
            });
        }
        if g.n() < 2 {
            return Err(Error::TooSmall(g.n()));
        }
        Ok(FullPoint { g, l })
    }

    /// `(Q, L)` viewed as a point of the full space.
    pub fn from_red(x: &RedPoint) -> Self {
        FullPoint {
            g: UnitaryMat::from_raw(x.q.matrix()),
            l: x.l.clone(),
        }
    }

    /// Conjugation action `(g, L) -> (eta g eta^-1, eta L eta^-1)`.
    pub fn conjugated(&self, eta: &UnitaryMat) -> Self {
        let e = eta.matrix();
        FullPoint {
            g: UnitaryMat::from_raw(e * self.g.matrix() * e.adjoint()),
            l: self.l.conjugated_by_unitary(e),
        }
    }
}

impl RedPoint {
    pub fn new(q: TorusReg, l: HermitianMat) -> Result<Self> {
        if q.n() != l.n() {
            return Err(Error::DimensionMismatch {
                expected: q.n(),
                found: l.n(),
            });
        }
        Ok(RedPoint { q, l })
    }
}

impl RsPoint {
    pub fn new(q: TorusReg, p: Vec<f64>, lambda: UnipotentUpper) -> Result<Self> {
        if q.n() != p.len() || q.n() != lambda.n() {
            return Err(Error::DimensionMismatch {
                expected: q.n(),
                found: p.len().max(lambda.n()),
            });
        }
        Ok(RsPoint { q, p, lambda })
    }
}

impl SuthPoint {
    pub fn new(q: TorusReg, p: Vec<f64>, phi: HermitianMat) -> Result<Self> {
        if q.n() != p.len() || q.n() != phi.n() {
            return Err(Error::DimensionMismatch {
                expected: q.n(),
                found: p.len().max(phi.n()),
            });
        }
        if (0..phi.n()).any(|j| phi.matrix()[(j, j)] != ZERO) {
            return Err(Error::Structure {
                what: "Herm(n)_perp",
                detail: "spin matrix has a nonzero diagonal".into(),
            });
        }
        Ok(SuthPoint { q, p, phi })
    }

    /// Builds the point after discarding the diagonal of `phi`.
    pub fn from_off_diagonal(q: TorusReg, p: Vec<f64>, phi: &CMat) -> Result<Self> {
        let off = Subspace::HermPerp.project(&GlElement::new(phi.clone()));
        SuthPoint::new(q, p, HermitianMat::new(off.into_matrix()))
    }

    pub fn phi(&self) -> &HermitianMat {
        &self.phi
    }
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// `(D_1 F, D_1' F, d_2 F)` in `b(n) x b(n) x u(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullGradient {
    pub d1: GlElement,
    pub d1_right: GlElement,
    pub d2: GlElement,
}

/// `(D_1 f, d_2 f)` in `b(n)_0 x u(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RedGradient {
    pub d1: GlElement,
    pub d2: GlElement,
}

/// `(D_Q F, d_p F, D_lambda F, D_lambda' F)` in `b(n)_0 x u(n)_0 x u(n)_perp x u(n)_perp`.
#[derive(Clone, Debug, PartialEq)]
pub struct RsGradient {
    pub dq: GlElement,
    pub dp: GlElement,
    pub dlambda: GlElement,
    pub dlambda_right: GlElement,
}

/// `(D_Q F, d_p F, d_phi F)` in `b(n)_0 x u(n)_0 x u(n)_perp`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuthGradient {
    pub dq: GlElement,
    pub dp: GlElement,
    pub dphi: GlElement,
}

macro_rules! impl_gradient {
    ($t:ty, $($f:ident),+) => {
        impl Gradient for $t {
            fn axpy(&mut self, a: f64, other: &Self) {
                $( self.$f += &other.$f.scale(a); )+
            }
            fn scale(&mut self, a: f64) {
                $( self.$f = self.$f.scale(a); )+
            }
            fn norm(&self) -> f64 {
                (0.0 $( + self.$f.norm().powi(2) )+).sqrt()
            }
        }
    };
}

impl_gradient!(FullGradient, d1, d1_right, d2);
impl_gradient!(RedGradient, d1, d2);
impl_gradient!(RsGradient, dq, dp, dlambda, dlambda_right);
impl_gradient!(SuthGradient, dq, dp, dphi);

// ---------------------------------------------------------------------------
// Tangents
// ---------------------------------------------------------------------------

/// `(X, X', Y)` in `u(n) x u(n) x Herm(n)`: `(e^{tX} g e^{tX'}, L + tY)`.
#[derive(Clone, Debug)]
pub struct FullTangent {
    pub left: GlElement,
    pub right: GlElement,
    pub l: GlElement,
}

/// `X = i diag(q)` and `Y` in `Herm(n)`: `(e^{tX} Q, L + tY)`.
#[derive(Clone, Debug)]
pub struct RedTangent {
    pub q: Vec<f64>,
    pub l: GlElement,
}

/// `(e^{tX_0} Q, p + t Y_0, e^{tX_+} lambda e^{tY_+})`.
#[derive(Clone, Debug)]
pub struct RsTangent {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda_left: GlElement,
    pub lambda_right: GlElement,
}

/// `(e^{tX} Q, p + t Y_0, phi + t Y_perp)`.
#[derive(Clone, Debug)]
pub struct SuthTangent {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub phi: GlElement,
}

fn diag_imag(q: &[f64]) -> GlElement {
    GlElement::from_diagonal(&q.iter().map(|&x| c64(0.0, x)).collect::<Vec<_>>())
}

fn gaussian_c<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn ginibre<R: Rng>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| gaussian_c(rng))
}

fn random_in<R: Rng>(rng: &mut R, n: usize, space: Subspace) -> GlElement {
    // projection of a Ginibre matrix
    space.project(&GlElement::new(ginibre(rng, n)))
}

fn zero_tangent_vec(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

fn e_diag(n: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[j] = 1.0;
    v
}

fn diag_dot(grad: &GlElement, v: &[f64], imaginary: bool) -> f64 {
    // <grad, diag(v)> or <grad, i diag(v)>
    let d = if imaginary {
        diag_imag(v)
    } else {
        GlElement::from_real_diagonal(v)
    };
    pair(grad, &d)
}

impl ChartPoint for FullPoint {
    type Gradient = FullGradient;
    type Tangent = FullTangent;
    const CHART: Chart = Chart::Full;

    fn n(&self) -> usize {
        self.g.n()
    }

    fn coord_norm(&self) -> f64 {
        self.l.norm()
    }

    // group directions live on a compact space of unit size
    fn fd_scale(&self, v: &FullTangent) -> f64 {
        if v.left.norm() == 0.0 && v.right.norm() == 0.0 {
            1.0 + self.coord_norm()
        } else {
            1.0
        }
    }

    fn basis_tangents(&self) -> Vec<FullTangent> {
        let n = self.n();
        let ub = dual_basis(n, SpacePair::UB);
        let uh = dual_basis(n, SpacePair::UHerm);
        let z = GlElement::zeros(n);
        let mut out = Vec::with_capacity(3 * n * n);
        for x in &ub.left {
            out.push(FullTangent {
                left: x.clone(),
                right: z.clone(),
                l: z.clone(),
            });
        }
        for x in &ub.left {
            out.push(FullTangent {
                left: z.clone(),
                right: x.clone(),
                l: z.clone(),
            });
        }
        for y in &uh.right {
            out.push(FullTangent {
                left: z.clone(),
                right: z.clone(),
                l: y.clone(),
            });
        }
        out
    }

    fn displaced(&self, v: &FullTangent, t: f64) -> Option<Self> {
        let mut g = self.g.matrix().clone();
        if v.left.norm() > 0.0 {
            g = expm_taylor(&(v.left.matrix() * c64(t, 0.0))) * g;
        }
        if v.right.norm() > 0.0 {
            g *= expm_taylor(&(v.right.matrix() * c64(t, 0.0)));
        }
        let l = if v.l.norm() > 0.0 {
            HermitianMat::new(self.l.matrix() + v.l.matrix() * c64(t, 0.0))
        } else {
            self.l.clone()
        };
        Some(FullPoint {
            g: UnitaryMat::from_raw(g),
            l,
        })
    }

    fn assemble(&self, derivs: &[f64]) -> FullGradient {
        let n = self.n();
        let m = n * n;
        let ub = dual_basis(n, SpacePair::UB);
        let uh = dual_basis(n, SpacePair::UHerm);
        FullGradient {
            d1: ub.combine_right(n, &derivs[..m]),
            d1_right: ub.combine_right(n, &derivs[m..2 * m]),
            d2: uh.combine_left(n, &derivs[2 * m..3 * m]),
        }
    }

    fn pair_gradient(grad: &FullGradient, v: &FullTangent) -> f64 {
        pair(&grad.d1, &v.left) + pair(&grad.d1_right, &v.right) + pair(&grad.d2, &v.l)
    }

    fn random_tangent<R: Rng>(&self, rng: &mut R) -> FullTangent {
        let n = self.n();
        FullTangent {
            left: random_in(rng, n, Subspace::U),
            right: random_in(rng, n, Subspace::U),
            l: random_in(rng, n, Subspace::Herm),
        }
    }
}

impl ChartPoint for RedPoint {
    type Gradient = RedGradient;
    type Tangent = RedTangent;
    const CHART: Chart = Chart::Red;

    fn n(&self) -> usize {
        self.q.n()
    }

    fn coord_norm(&self) -> f64 {
        self.l.norm()
    }

    fn fd_scale(&self, v: &RedTangent) -> f64 {
        if v.q.iter().all(|&x| x == 0.0) {
            1.0 + self.coord_norm()
        } else {
            1.0
        }
    }

    fn basis_tangents(&self) -> Vec<RedTangent> {
        let n = self.n();
        let z = GlElement::zeros(n);
        let mut out: Vec<RedTangent> = (0..n)
            .map(|j| RedTangent {
                q: e_diag(n, j),
                l: z.clone(),
            })
            .collect();
        for y in dual_basis(n, SpacePair::UHerm).right {
            out.push(RedTangent {
                q: zero_tangent_vec(n),
                l: y,
            });
        }
        out
    }

    fn displaced(&self, v: &RedTangent, t: f64) -> Option<Self> {
        let shift: Vec<f64> = v.q.iter().map(|x| x * t).collect();
        let q = self.q.rotated(&shift).ok()?;
        let l = HermitianMat::new(self.l.matrix() + v.l.matrix() * c64(t, 0.0));
        Some(RedPoint { q, l })
    }

    fn assemble(&self, derivs: &[f64]) -> RedGradient {
        let n = self.n();
        let uh = dual_basis(n, SpacePair::UHerm);
        RedGradient {
            d1: GlElement::from_real_diagonal(&derivs[..n]),
            d2: uh.combine_left(n, &derivs[n..]),
        }
    }

    fn pair_gradient(grad: &RedGradient, v: &RedTangent) -> f64 {
        diag_dot(&grad.d1, &v.q, true) + pair(&grad.d2, &v.l)
    }

    fn random_tangent<R: Rng>(&self, rng: &mut R) -> RedTangent {
        let n = self.n();
        RedTangent {
            q: gaussian_vec(rng, n),
            l: random_in(rng, n, Subspace::Herm),
        }
    }
}

impl ChartPoint for RsPoint {
    type Gradient = RsGradient;
    type Tangent = RsTangent;
    const CHART: Chart = Chart::Rs;

    fn n(&self) -> usize {
        self.q.n()
    }

    fn coord_norm(&self) -> f64 {
        (self.p.iter().map(|x| x * x).sum::<f64>() + self.lambda.offset_norm().powi(2)).sqrt()
    }

    /// The map to `(Q, L)` involves `cot((q_j - q_k)/2)`, which varies on the
    /// scale of the smallest eigenvalue gap.
    fn fd_length_scale(&self) -> f64 {
        self.q.min_gap().min(1.0)
    }

    fn basis_tangents(&self) -> Vec<RsTangent> {
        let n = self.n();
        let z = GlElement::zeros(n);
        let zv = zero_tangent_vec(n);
        let bp = dual_basis(n, SpacePair::UPerpBPlus);
        let mut out = Vec::new();
        for j in 0..n {
            out.push(RsTangent {
                q: e_diag(n, j),
                p: zv.clone(),
                lambda_left: z.clone(),
                lambda_right: z.clone(),
            });
        }
        for j in 0..n {
            out.push(RsTangent {
                q: zv.clone(),
                p: e_diag(n, j),
                lambda_left: z.clone(),
                lambda_right: z.clone(),
            });
        }
        for x in &bp.right {
            out.push(RsTangent {
                q: zv.clone(),
                p: zv.clone(),
                lambda_left: x.clone(),
                lambda_right: z.clone(),
            });
        }
        for x in &bp.right {
            out.push(RsTangent {
                q: zv.clone(),
                p: zv.clone(),
                lambda_left: z.clone(),
                lambda_right: x.clone(),
            });
        }
        out
    }

    fn displaced(&self, v: &RsTangent, t: f64) -> Option<Self> {
        let shift: Vec<f64> = v.q.iter().map(|x| x * t).collect();
        let q = self.q.rotated(&shift).ok()?;
        let p = self.p.iter().zip(&v.p).map(|(a, b)| a + t * b).collect();
        // b(n)_+ displacements are nilpotent, so the product stays unipotent.
        let mut lam = self.lambda.matrix().clone();
        if v.lambda_left.norm() > 0.0 {
            lam = nilpotent_exp(v.lambda_left.matrix(), t) * lam;
        }
        if v.lambda_right.norm() > 0.0 {
            lam *= nilpotent_exp(v.lambda_right.matrix(), t);
        }
        let lambda = UnipotentUpper::from_upper_part(&lam);
        debug_assert!((0..lam.nrows()).all(|j| (lam[(j, j)] - 1.0).norm() < 1e-12));
        Some(RsPoint { q, p, lambda })
    }

    fn assemble(&self, derivs: &[f64]) -> RsGradient {
        let n = self.n();
        let m = n * (n - 1);
        let bp = dual_basis(n, SpacePair::UPerpBPlus);
        RsGradient {
            dq: GlElement::from_real_diagonal(&derivs[..n]),
            dp: diag_imag(&derivs[n..2 * n]),
            dlambda: bp.combine_left(n, &derivs[2 * n..2 * n + m]),
            dlambda_right: bp.combine_left(n, &derivs[2 * n + m..2 * n + 2 * m]),
        }
    }

    fn pair_gradient(grad: &RsGradient, v: &RsTangent) -> f64 {
        diag_dot(&grad.dq, &v.q, true)
            + diag_dot(&grad.dp, &v.p, false)
            + pair(&grad.dlambda, &v.lambda_left)
            + pair(&grad.dlambda_right, &v.lambda_right)
    }

    fn random_tangent<R: Rng>(&self, rng: &mut R) -> RsTangent {
        let n = self.n();
        RsTangent {
            q: gaussian_vec(rng, n),
            p: gaussian_vec(rng, n),
            lambda_left: random_in(rng, n, Subspace::BPlus),
            lambda_right: random_in(rng, n, Subspace::BPlus),
        }
    }
}

impl ChartPoint for SuthPoint {
    type Gradient = SuthGradient;
    type Tangent = SuthTangent;
    const CHART: Chart = Chart::Suth;

    fn n(&self) -> usize {
        self.q.n()
    }

    fn coord_norm(&self) -> f64 {
        (self.p.iter().map(|x| x * x).sum::<f64>() + self.phi.norm().powi(2)).sqrt()
    }

    /// The map to `(Q, L)` involves `cot((q_j - q_k)/2)`, which varies on the
    /// scale of the smallest eigenvalue gap.
    fn fd_length_scale(&self) -> f64 {
        self.q.min_gap().min(1.0)
    }

    fn basis_tangents(&self) -> Vec<SuthTangent> {
        let n = self.n();
        let z = GlElement::zeros(n);
        let zv = zero_tangent_vec(n);
        let mut out = Vec::new();
        for j in 0..n {
            out.push(SuthTangent {
                q: e_diag(n, j),
                p: zv.clone(),
                phi: z.clone(),
            });
        }
        for j in 0..n {
            out.push(SuthTangent {
                q: zv.clone(),
                p: e_diag(n, j),
                phi: z.clone(),
            });
        }
        for y in dual_basis(n, SpacePair::UPerpHermPerp).right {
            out.push(SuthTangent {
                q: zv.clone(),
                p: zv.clone(),
                phi: y,
            });
        }
        out
    }

    fn displaced(&self, v: &SuthTangent, t: f64) -> Option<Self> {
        let shift: Vec<f64> = v.q.iter().map(|x| x * t).collect();
        let q = self.q.rotated(&shift).ok()?;
        let p = self.p.iter().zip(&v.p).map(|(a, b)| a + t * b).collect();
        let phi = self.phi.matrix() + v.phi.matrix() * c64(t, 0.0);
        SuthPoint::from_off_diagonal(q, p, &phi).ok()
    }

    fn assemble(&self, derivs: &[f64]) -> SuthGradient {
        let n = self.n();
        let hp = dual_basis(n, SpacePair::UPerpHermPerp);
        SuthGradient {
            dq: GlElement::from_real_diagonal(&derivs[..n]),
            dp: diag_imag(&derivs[n..2 * n]),
            dphi: hp.combine_left(n, &derivs[2 * n..]),
        }
    }

    fn pair_gradient(grad: &SuthGradient, v: &SuthTangent) -> f64 {
        diag_dot(&grad.dq, &v.q, true) + diag_dot(&grad.dp, &v.p, false) + pair(&grad.dphi, &v.phi)
    }

    fn random_tangent<R: Rng>(&self, rng: &mut R) -> SuthTangent {
        let n = self.n();
        SuthTangent {
            q: gaussian_vec(rng, n),
            p: gaussian_vec(rng, n),
            phi: random_in(rng, n, Subspace::HermPerp),
        }
    }
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

type ValueFn<P> = Arc<dyn Fn(&P) -> f64 + Send + Sync>;
type GradFn<P> = Arc<dyn Fn(&P) -> <P as ChartPoint>::Gradient + Send + Sync>;

/// A real function on one chart, with an optional analytic gradient.
pub struct Observable<P: ChartPoint> {
    name: String,
    value: ValueFn<P>,
    gradient: Option<GradFn<P>>,
    fd_rel_step: f64,
}

impl<P: ChartPoint> Clone for Observable<P> {
    fn clone(&self) -> Self {
        Observable {
            name: self.name.clone(),
            value: Arc::clone(&self.value),
            gradient: self.gradient.clone(),
            fd_rel_step: self.fd_rel_step,
        }
    }
}

impl<P: ChartPoint> fmt::Debug for Observable<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("chart", &P::CHART)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl<P: ChartPoint> Observable<P> {
    pub fn new(name: impl Into<String>, value: impl Fn(&P) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            name: name.into(),
            value: Arc::new(value),
            gradient: None,
            fd_rel_step: FD_REL_STEP,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&P) -> P::Gradient + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Drops the analytic gradient, forcing finite differences.
    pub fn without_gradient(mut self) -> Self {
        self.gradient = None;
        self
    }

    pub fn with_fd_step(mut self, rel_step: f64) -> Self {
        self.fd_rel_step = rel_step;
        self
    }

    pub fn constant(c: f64) -> Self {
        Observable::new(format!("{c}"), move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Chart {
        P::CHART
    }

    pub fn fd_rel_step(&self) -> f64 {
        self.fd_rel_step
    }

    pub fn value(&self, x: &P) -> f64 {
        (self.value)(x)
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn analytic_gradient(&self, x: &P) -> Option<P::Gradient> {
        self.gradient.as_ref().map(|g| g(x))
    }

    /// Analytic gradient when available, finite differences otherwise.
    pub fn gradient(&self, x: &P) -> Result<P::Gradient> {
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => fd_gradient(self, x),
        }
    }

    /// `a F + b H`; keeps an analytic gradient when both terms have one.
    pub fn linear_combination(a: f64, f: &Self, b: f64, h: &Self) -> Self {
        let (fv, hv) = (Arc::clone(&f.value), Arc::clone(&h.value));
        let mut out = Observable::new(format!("{a}*{} + {b}*{}", f.name, h.name), move |x| {
            a * fv(x) + b * hv(x)
        });
        if let (Some(fg), Some(hg)) = (f.gradient.clone(), h.gradient.clone()) {
            out = out.with_gradient(move |x| {
                let mut g = fg(x).scaled(a);
                g.axpy(b, &hg(x));
                g
            });
        }
        out
    }

    /// Pointwise product; keeps an analytic gradient (Leibniz rule) when both
    /// factors have one.
    pub fn product(f: &Self, h: &Self) -> Self {
        let (fv, hv) = (Arc::clone(&f.value), Arc::clone(&h.value));
        let mut out = Observable::new(format!("({})*({})", f.name, h.name), move |x| fv(x) * hv(x));
        if let (Some(fg), Some(hg)) = (f.gradient.clone(), h.gradient.clone()) {
            let (fv, hv) = (Arc::clone(&f.value), Arc::clone(&h.value));
            out = out.with_gradient(move |x| {
                let mut g = fg(x).scaled(hv(x));
                g.axpy(fv(x), &hg(x));
                g
            });
        }
        out
    }
}

/// Central-difference step for an observable at `x` along `v`.
pub fn fd_step<P: ChartPoint>(obs: &Observable<P>, x: &P, v: &P::Tangent) -> f64 {
    obs.fd_rel_step * x.fd_scale(v)
}

/// Central difference of `F(x displaced by t v)` at `t = 0`.
pub fn directional_fd<P: ChartPoint>(
    obs: &Observable<P>,
    x: &P,
    v: &P::Tangent,
    h: f64,
) -> Result<f64> {
    let eval = |t: f64| x.displaced(v, t).map(|y| obs.value(&y)).unwrap_or(f64::NAN);
    let (fp, fm) = (eval(h), eval(-h));
    if !(fp.is_finite() && fm.is_finite()) {
        return Err(Error::NonFinite {
            name: obs.name.clone(),
        });
    }
    Ok((fp - fm) / (2.0 * h))
}

/// Gradient assembled from central differences along the basis tangents.
pub fn fd_gradient<P: ChartPoint>(obs: &Observable<P>, x: &P) -> Result<P::Gradient> {
    let derivs = x
        .basis_tangents()
        .iter()
        .map(|v| directional_fd(obs, x, v, fd_step(obs, x, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(x.assemble(&derivs))
}

pub fn grad_full(f: &Observable<FullPoint>, x: &FullPoint) -> Result<FullGradient> {
    f.gradient(x)
}

pub fn grad_red(f: &Observable<RedPoint>, x: &RedPoint) -> Result<RedGradient> {
    f.gradient(x)
}

pub fn grad_rs(f: &Observable<RsPoint>, x: &RsPoint) -> Result<RsGradient> {
    f.gradient(x)
}

pub fn grad_suth(f: &Observable<SuthPoint>, x: &SuthPoint) -> Result<SuthGradient> {
    f.gradient(x)
}

/// Largest violation, over `count` random directions, of the defining identity
/// `<grad F, v> = d/dt F(x + t v)`, together with the scale
/// `1 + |F(x)| + ||grad F||` it should be compared against.
pub fn duality_defect<P: ChartPoint>(
    obs: &Observable<P>,
    x: &P,
    count: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let grad = obs.gradient(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let v = x.random_tangent(&mut rng);
        let lhs = P::pair_gradient(&grad, &v);
        let rhs = directional_fd(obs, x, &v, fd_step(obs, x, &v))?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((worst, 1.0 + obs.value(x).abs() + grad.norm()))
}

// ---------------------------------------------------------------------------
// Invariant family
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

impl std::str::FromStr for Part {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "re" => Ok(Part::Re),
            "im" => Ok(Part::Im),
            other => Err(Error::Config(format!(
                "unknown part `{other}` (expected re|im)"
            ))),
        }
    }
}

/// `F(g, L) = weight * Re/Im tr(g^m L^k)`, a conjugation invariant, together
/// with its pull-backs to every chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantObservable {
    pub m: u32,
    pub k: u32,
    pub part: Part,
    pub weight: f64,
}

pub fn invariant_observable(m: u32, k: u32, part: Part) -> Result<InvariantObservable> {
    if m == 0 && k == 0 {
        return Err(Error::Config(
            "invariant observable needs (m, k) != (0, 0)".into(),
        ));
    }
    Ok(InvariantObservable {
        m,
        k,
        part,
        weight: 1.0,
    })
}

fn mat_pow(a: &CMat, k: u32) -> CMat {
    let n = a.nrows();
    let mut out = CMat::identity(n, n);
    for _ in 0..k {
        out = &out * a;
    }
    out
}

impl InvariantObservable {
    pub fn scaled(self, weight: f64) -> Self {
        InvariantObservable {
            weight: self.weight * weight,
            ..self
        }
    }

    pub fn label(&self) -> String {
        let part = match self.part {
            Part::Re => "Re",
            Part::Im => "Im",
        };
        if self.weight == 1.0 {
            format!("{part} tr(g^{} L^{})", self.m, self.k)
        } else {
            format!("{} * {part} tr(g^{} L^{})", self.weight, self.m, self.k)
        }
    }

    fn take(&self, z: Complex64) -> f64 {
        self.weight
            * match self.part {
                Part::Re => z.re,
                Part::Im => z.im,
            }
    }

    /// Value at `(g, L)` given as raw matrices.
    pub fn eval(&self, g: &CMat, l: &CMat) -> f64 {
        let t = (mat_pow(g, self.m) * mat_pow(l, self.k)).trace();
        self.take(t)
    }

    /// Analytic full-chart gradient.
    ///
    /// With `M = sum_r g^{m-r} L^k g^r`, `M' = sum_r g^{m-1-r} L^k g^{r+1}` and
    /// `N = sum_s L^{k-1-s} g^m L^s`, the directional derivatives are
    /// `Re tr(M X)`, `Re tr(M' X')` and `Re tr(N Y)`; for the real part the
    /// gradient is `((iM)_b, (iM')_b, (iN)_u)`, with `_u` the anti-Hermitian part.
    pub fn full_gradient(&self, g: &CMat, l: &CMat) -> FullGradient {
        let n = g.nrows();
        let (m, k) = (self.m, self.k);
        let gp: Vec<CMat> = (0..=m).map(|r| mat_pow(g, r)).collect();
        let lp: Vec<CMat> = (0..=k).map(|s| mat_pow(l, s)).collect();
        let mut ml = CMat::zeros(n, n);
        let mut mr = CMat::zeros(n, n);
        for r in 0..m as usize {
            ml += &gp[m as usize - r] * &lp[k as usize] * &gp[r];
            mr += &gp[m as usize - 1 - r] * &lp[k as usize] * &gp[r + 1];
        }
        let mut nn = CMat::zeros(n, n);
        for s in 0..k as usize {
            nn += &lp[k as usize - 1 - s] * &gp[m as usize] * &lp[s];
        }
        let factor = match self.part {
            Part::Re => I * self.weight,
            Part::Im => c64(self.weight, 0.0),
        };
        let b_part = |a: CMat| split_ub(&GlElement::new(a * factor)).1;
        let anti = |a: CMat| {
            let a = a * factor;
            GlElement::new((&a - a.adjoint()) * c64(0.5, 0.0))
        };
        FullGradient {
            d1: b_part(ml),
            d1_right: b_part(mr),
            d2: anti(nn),
        }
    }

    pub fn full(&self) -> Observable<FullPoint> {
        let (a, b) = (*self, *self);
        Observable::new(self.label(), move |x: &FullPoint| {
            a.eval(x.g.matrix(), x.l.matrix())
        })
        .with_gradient(move |x: &FullPoint| b.full_gradient(x.g.matrix(), x.l.matrix()))
    }

    pub fn red(&self) -> Observable<RedPoint> {
        let (a, b) = (*self, *self);
        Observable::new(self.label(), move |x: &RedPoint| {
            a.eval(&x.q.matrix(), x.l.matrix())
        })
        .with_gradient(move |x: &RedPoint| {
            let full = b.full_gradient(&x.q.matrix(), x.l.matrix());
            RedGradient {
                d1: Subspace::B0.project(&full.d1),
                d2: full.d2,
            }
        })
    }

    /// Pull-back through `(Q, p, lambda) -> (Q, L)`; finite-difference gradient only.
    pub fn rs(&self) -> Observable<RsPoint> {
        let a = *self;
        Observable::new(self.label(), move |x: &RsPoint| match coords::from_rs(x) {
            Ok(r) => a.eval(&r.q.matrix(), r.l.matrix()),
            Err(_) => f64::NAN,
        })
    }

    /// Pull-back through `(Q, p, phi) -> (Q, L)`; finite-difference gradient only.
    pub fn suth(&self) -> Observable<SuthPoint> {
        let a = *self;
        Observable::new(self.label(), move |x: &SuthPoint| {
            match coords::from_suth(x) {
                Ok(r) => a.eval(&r.q.matrix(), r.l.matrix()),
                Err(_) => f64::NAN,
            }
        })
    }
}

/// All invariant observables with `m <= max_m`, `k <= max_k`, `(m, k) != (0, 0)`,
/// both parts.
pub fn invariant_family(max_m: u32, max_k: u32) -> Vec<InvariantObservable> {
    let mut out = Vec::new();
    for m in 0..=max_m {
        for k in 0..=max_k {
            if m == 0 && k == 0 {
                continue;
            }
            for part in [Part::Re, Part::Im] {
                // Im tr(L^k) vanishes identically
                if m == 0 && part == Part::Im {
                    continue;
                }
                out.push(InvariantObservable {
                    m,
                    k,
                    part,
                    weight: 1.0,
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

const REDRAW_BUDGET: usize = 10_000;

fn chart_rng(chart: Chart, n: usize, seed: u64) -> ChaCha8Rng {
    let tag = match chart {
        Chart::Full => 0x9e37_79b9_7f4a_7c15u64,
        Chart::Red => 0xbf58_476d_1ce4_e5b9,
        Chart::Rs => 0x94d0_49bb_1331_11eb,
        Chart::Suth => 0xd6e8_feb8_6659_fd93,
    };
    let mixed = seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ tag ^ (n as u64).rotate_left(32);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Haar-random unitary: QR of a Ginibre matrix with the diagonal of R made positive.
pub fn haar_unitary<R: Rng>(rng: &mut R, n: usize) -> UnitaryMat {
    UnitaryMat::from_raw(phase_fixed_q(ginibre(rng, n)))
}

/// Gaussian Hermitian matrix `(A + A^dagger)/2` with `A` Ginibre.
pub fn gaussian_hermitian<R: Rng>(rng: &mut R, n: usize) -> HermitianMat {
    HermitianMat::new(ginibre(rng, n))
}

fn regular_torus<R: Rng>(rng: &mut R, n: usize, seed: u64, config: &Config) -> Result<TorusReg> {
    for _ in 0..REDRAW_BUDGET {
        let q: Vec<f64> = (0..n)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        if let Ok(t) = TorusReg::with_gap(q, config.regularity_gap) {
            return Ok(t);
        }
    }
    Err(Error::RedrawBudget { seed })
}

/// Points that can be drawn deterministically from `(n, seed)`.
pub trait Sample: ChartPoint {
    fn sample_with(n: usize, seed: u64, config: &Config) -> Result<Self>;
}

impl Sample for FullPoint {
    fn sample_with(n: usize, seed: u64, _config: &Config) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        let mut rng = chart_rng(Chart::Full, n, seed);
        let g = haar_unitary(&mut rng, n);
        let l = gaussian_hermitian(&mut rng, n);
        Ok(FullPoint { g, l })
    }
}

impl Sample for RedPoint {
    fn sample_with(n: usize, seed: u64, config: &Config) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        let mut rng = chart_rng(Chart::Red, n, seed);
        let q = regular_torus(&mut rng, n, seed, config)?;
        let l = gaussian_hermitian(&mut rng, n);
        Ok(RedPoint { q, l })
    }
}

impl Sample for RsPoint {
    fn sample_with(n: usize, seed: u64, config: &Config) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        let mut rng = chart_rng(Chart::Rs, n, seed);
        let q = regular_torus(&mut rng, n, seed, config)?;
        let p: Vec<f64> = gaussian_vec(&mut rng, n)
            .into_iter()
            .map(|x| 0.5 * x)
            .collect();
        let upper = CMat::from_fn(n, n, |_, _| gaussian_c(&mut rng));
        Ok(RsPoint {
            q,
            p,
            lambda: UnipotentUpper::from_upper_part(&upper),
        })
    }
}

impl Sample for SuthPoint {
    fn sample_with(n: usize, seed: u64, config: &Config) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        let mut rng = chart_rng(Chart::Suth, n, seed);
        let q = regular_torus(&mut rng, n, seed, config)?;
        let p = gaussian_vec(&mut rng, n);
        let phi = ginibre(&mut rng, n);
        SuthPoint::from_off_diagonal(q, p, &phi)
    }
}

/// Deterministic sample of chart `P` for `(n, seed)` with default margins.
pub fn sample_point<P: Sample>(n: usize, seed: u64) -> Result<P> {
    P::sample_with(n, seed, &Config::default())
}
