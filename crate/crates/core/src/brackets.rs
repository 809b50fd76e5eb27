//! Evaluators for the Poisson brackets on every chart, the bracket pencil and
//! the numerical Jacobi defect.
//!
//! Every evaluator works from gradients, so the same code serves analytic and
//! finite-difference derivatives. Each bracket is a short sum of pairings;
//! [`Bracket::terms`] exposes the individual summands so that callers can
//! measure defects relative to the size of what cancels.

use crate::algebra::{pair, r_apply_unchecked, split_ub, CMat, GlElement};
use crate::config::FD_OUTER_REL_STEP;
use crate::error::{Error, Result};
use crate::phase::{
    ChartPoint, FullGradient, FullPoint, Gradient, Observable, RedGradient, RedPoint, RsGradient,
    RsPoint, SuthGradient, SuthPoint,
};

/// A bracket value and its error scale `1 + sum of term bounds`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BracketValue {
    pub value: f64,
    pub scale: f64,
}

/// One summand of a bracket formula with a bound on its magnitude built from
/// the norms of its factors, `|<A, B>| <= |A| |B|`.
///
/// The bound measures the size of the quantities that cancel inside the
/// pairing, which is what rounding and finite-difference errors scale with.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub value: f64,
    pub bound: f64,
}

impl Term {
    fn new(value: f64, bound: f64) -> Self {
        Term { value, bound }
    }

    /// `c <a, b>`.
    fn pairing(c: f64, a: &GlElement, b: &GlElement) -> Self {
        Term {
            value: c * pair(a, b),
            bound: c.abs() * a.norm() * b.norm(),
        }
    }

    fn scaled(self, c: f64) -> Self {
        Term {
            value: c * self.value,
            bound: c.abs() * self.bound,
        }
    }
}

pub trait Bracket<P: ChartPoint>: Send + Sync {
    fn name(&self) -> String;

    /// The summands of the bracket formula at `x`.
    fn terms(&self, x: &P, df: &P::Gradient, dh: &P::Gradient) -> Vec<Term>;

    #[allow(clippy::wrong_self_convention)]
    fn from_gradients(&self, x: &P, df: &P::Gradient, dh: &P::Gradient) -> f64 {
        self.terms(x, df, dh).iter().map(|t| t.value).sum()
    }

    fn value_from_gradients(&self, x: &P, df: &P::Gradient, dh: &P::Gradient) -> BracketValue {
        let t = self.terms(x, df, dh);
        BracketValue {
            value: t.iter().map(|t| t.value).sum(),
            scale: 1.0 + t.iter().map(|t| t.bound).sum::<f64>(),
        }
    }

    fn eval(&self, f: &Observable<P>, h: &Observable<P>, x: &P) -> Result<f64> {
        Ok(self.eval_scaled(f, h, x)?.value)
    }

    fn eval_scaled(&self, f: &Observable<P>, h: &Observable<P>, x: &P) -> Result<BracketValue> {
        let df = f.gradient(x)?;
        let dh = h.gradient(x)?;
        Ok(self.value_from_gradients(x, &df, &dh))
    }
}

fn gl(m: &CMat) -> GlElement {
    GlElement::new(m.clone())
}

/// `{F, H}_1 = <D_1 F, d_2 H> - <D_1 H, d_2 F> + <L, [d_2 F, d_2 H]>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstFull;

/// `{F, H}_2 = <D_1 F, L d_2 H> - <D_1 H, L d_2 F> + 2 <L d_2 F, (L d_2 H)_u>
///            - 1/2 <D_1' F, g^{-1} (D_1 H) g>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SecondFull;

/// `{f, h}_1 = <D_1 f, d_2 h> - <D_1 h, d_2 f> + <L, [d_2 f, d_2 h]_R(Q)>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstRed;

/// `{f, h}_2 = <D_1 f, L d_2 h> - <D_1 h, L d_2 f> + 2 <L d_2 f, R(Q)(L d_2 h)>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SecondRed;

/// Second reduced bracket in `(Q, p, lambda)` variables:
/// `2 {F, H} = <D_Q F, d_p H> - <D_Q H, d_p F> + <D_lambda' F, lambda^{-1} (D_lambda H) lambda>`.
///
/// Returns `{F, H}`; with `raw` set it returns the right-hand side `2 {F, H}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RsBracket {
    pub raw: bool,
}

/// First reduced bracket in `(Q, p, phi)` variables:
/// `<D_Q F, d_p H> - <D_Q H, d_p F> + <phi, [d_phi F, d_phi H]>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SuthBracket;

/// `{ , }_1 + s { , }_2` on the full chart.
#[derive(Clone, Copy, Debug)]
pub struct Pencil {
    pub s: f64,
}

impl Bracket<FullPoint> for FirstFull {
    fn name(&self) -> String {
        "pb1_full".into()
    }

    fn terms(&self, x: &FullPoint, df: &FullGradient, dh: &FullGradient) -> Vec<Term> {
        let l = x.l.to_gl();
        vec![
            Term::pairing(1.0, &df.d1, &dh.d2),
            Term::pairing(-1.0, &dh.d1, &df.d2),
            Term::new(
                pair(&l, &df.d2.commutator(&dh.d2)),
                2.0 * l.norm() * df.d2.norm() * dh.d2.norm(),
            ),
        ]
    }
}

impl Bracket<FullPoint> for SecondFull {
    fn name(&self) -> String {
        "pb2_full".into()
    }

    fn terms(&self, x: &FullPoint, df: &FullGradient, dh: &FullGradient) -> Vec<Term> {
        let l = x.l.to_gl();
        let ln = l.norm();
        let ldf = &l * &df.d2;
        let ldh = &l * &dh.d2;
        let g = x.g.matrix();
        let conj_d1h = gl(&(g.adjoint() * dh.d1.matrix() * g));
        vec![
            Term::new(pair(&df.d1, &ldh), df.d1.norm() * ln * dh.d2.norm()),
            Term::new(-pair(&dh.d1, &ldf), dh.d1.norm() * ln * df.d2.norm()),
            Term::new(
                2.0 * pair(&ldf, &split_ub(&ldh).0),
                2.0 * ln * ln * df.d2.norm() * dh.d2.norm(),
            ),
            Term::pairing(-0.5, &df.d1_right, &conj_d1h),
        ]
    }
}

impl Bracket<FullPoint> for Pencil {
    fn name(&self) -> String {
        format!("pencil({})", self.s)
    }

    fn terms(&self, x: &FullPoint, df: &FullGradient, dh: &FullGradient) -> Vec<Term> {
        let mut t = FirstFull.terms(x, df, dh);
        t.extend(
            SecondFull
                .terms(x, df, dh)
                .into_iter()
                .map(|v| v.scaled(self.s)),
        );
        t
    }
}

impl Bracket<RedPoint> for FirstRed {
    fn name(&self) -> String {
        "pb1_red".into()
    }

    fn terms(&self, x: &RedPoint, df: &RedGradient, dh: &RedGradient) -> Vec<Term> {
        let l = x.l.to_gl();
        let rdf = r_apply_unchecked(&x.q, &df.d2);
        let rdh = r_apply_unchecked(&x.q, &dh.d2);
        let rb = rdf.commutator(&dh.d2) + df.d2.commutator(&rdh);
        let bound = 2.0 * l.norm() * (rdf.norm() * dh.d2.norm() + df.d2.norm() * rdh.norm());
        vec![
            Term::pairing(1.0, &df.d1, &dh.d2),
            Term::pairing(-1.0, &dh.d1, &df.d2),
            Term::new(pair(&l, &rb), bound),
        ]
    }
}

impl Bracket<RedPoint> for SecondRed {
    fn name(&self) -> String {
        "pb2_red".into()
    }

    fn terms(&self, x: &RedPoint, df: &RedGradient, dh: &RedGradient) -> Vec<Term> {
        let l = x.l.to_gl();
        let ln = l.norm();
        let ldf = &l * &df.d2;
        let ldh = &l * &dh.d2;
        let rldh = r_apply_unchecked(&x.q, &ldh);
        vec![
            Term::new(pair(&df.d1, &ldh), df.d1.norm() * ln * dh.d2.norm()),
            Term::new(-pair(&dh.d1, &ldf), dh.d1.norm() * ln * df.d2.norm()),
            Term::new(
                2.0 * pair(&ldf, &rldh),
                2.0 * ln * df.d2.norm() * rldh.norm(),
            ),
        ]
    }
}

impl Bracket<RsPoint> for RsBracket {
    fn name(&self) -> String {
        if self.raw {
            "pb_rs_raw".into()
        } else {
            "pb_rs".into()
        }
    }

    fn terms(&self, x: &RsPoint, df: &RsGradient, dh: &RsGradient) -> Vec<Term> {
        let factor = if self.raw { 1.0 } else { 0.5 };
        let lam = x.lambda.matrix();
        let inv = x.lambda.inverse();
        let conj = gl(&(&inv * dh.dlambda.matrix() * lam));
        let cond = crate::algebra::frobenius(&inv) * crate::algebra::frobenius(lam);
        vec![
            Term::pairing(factor, &df.dq, &dh.dp),
            Term::pairing(-factor, &dh.dq, &df.dp),
            Term::new(
                factor * pair(&df.dlambda_right, &conj),
                factor * df.dlambda_right.norm() * dh.dlambda.norm() * cond,
            ),
        ]
    }
}

impl Bracket<SuthPoint> for SuthBracket {
    fn name(&self) -> String {
        "pb_suth".into()
    }

    fn terms(&self, x: &SuthPoint, df: &SuthGradient, dh: &SuthGradient) -> Vec<Term> {
        let phi = x.phi().to_gl();
        vec![
            Term::pairing(1.0, &df.dq, &dh.dp),
            Term::pairing(-1.0, &dh.dq, &df.dp),
            Term::new(
                pair(&phi, &df.dphi.commutator(&dh.dphi)),
                2.0 * phi.norm() * df.dphi.norm() * dh.dphi.norm(),
            ),
        ]
    }
}

pub fn pb1_full(
    f: &Observable<FullPoint>,
    h: &Observable<FullPoint>,
    x: &FullPoint,
) -> Result<f64> {
    FirstFull.eval(f, h, x)
}

pub fn pb2_full(
    f: &Observable<FullPoint>,
    h: &Observable<FullPoint>,
    x: &FullPoint,
) -> Result<f64> {
    SecondFull.eval(f, h, x)
}

pub fn pb1_red(f: &Observable<RedPoint>, h: &Observable<RedPoint>, x: &RedPoint) -> Result<f64> {
    FirstRed.eval(f, h, x)
}

pub fn pb2_red(f: &Observable<RedPoint>, h: &Observable<RedPoint>, x: &RedPoint) -> Result<f64> {
    SecondRed.eval(f, h, x)
}

pub fn pb_rs(f: &Observable<RsPoint>, h: &Observable<RsPoint>, x: &RsPoint) -> Result<f64> {
    RsBracket::default().eval(f, h, x)
}

pub fn pb_suth(f: &Observable<SuthPoint>, h: &Observable<SuthPoint>, x: &SuthPoint) -> Result<f64> {
    SuthBracket.eval(f, h, x)
}

pub fn pencil(s: f64) -> Pencil {
    Pencil { s }
}

/// `{F,{G,H}} + {G,{H,F}} + {H,{F,G}}` with its comparison scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiDefect {
    pub defect: f64,
    pub scale: f64,
}

/// Numerical Jacobi defect.
///
/// The inner brackets are evaluated at points displaced by `+-h_outer` along
/// every basis tangent; the gradients of `F`, `G`, `H` at each displaced point
/// are computed once and shared by the three inner brackets. The outer
/// derivatives are central differences of those inner values.
pub fn jacobi_defect<P: ChartPoint, B: Bracket<P>>(
    bracket: &B,
    f: &Observable<P>,
    g: &Observable<P>,
    h: &Observable<P>,
    x: &P,
) -> Result<JacobiDefect> {
    let tangents = x.basis_tangents();
    let inner = |y: &P| -> Result<[f64; 3]> {
        let (df, dg, dh) = (f.gradient(y)?, g.gradient(y)?, h.gradient(y)?);
        Ok([
            bracket.from_gradients(y, &dg, &dh),
            bracket.from_gradients(y, &dh, &df),
            bracket.from_gradients(y, &df, &dg),
        ])
    };
    let mut derivs: [Vec<f64>; 3] = Default::default();
    for v in &tangents {
        let step = FD_OUTER_REL_STEP * x.fd_scale(v);
        let displaced = |t: f64| {
            x.displaced(v, t).ok_or_else(|| Error::NonFinite {
                name: format!("jacobi displacement of {}", f.name()),
            })
        };
        let plus = inner(&displaced(step)?)?;
        let minus = inner(&displaced(-step)?)?;
        for i in 0..3 {
            let d = (plus[i] - minus[i]) / (2.0 * step);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    name: bracket.name(),
                });
            }
            derivs[i].push(d);
        }
    }
    let dk: Vec<P::Gradient> = derivs.iter().map(|d| x.assemble(d)).collect();
    let (df, dg, dh) = (f.gradient(x)?, g.gradient(x)?, h.gradient(x)?);
    let outer = [
        bracket.value_from_gradients(x, &df, &dk[0]),
        bracket.value_from_gradients(x, &dg, &dk[1]),
        bracket.value_from_gradients(x, &dh, &dk[2]),
    ];
    Ok(JacobiDefect {
        defect: outer.iter().map(|o| o.value).sum::<f64>().abs(),
        scale: 1.0 + outer.iter().map(|o| o.scale - 1.0).sum::<f64>(),
    })
}

/// `|{F, H} + {H, F}|` and the scale of the two evaluations.
pub fn antisymmetry_defect<P: ChartPoint, B: Bracket<P>>(
    bracket: &B,
    f: &Observable<P>,
    h: &Observable<P>,
    x: &P,
) -> Result<(f64, f64)> {
    let df = f.gradient(x)?;
    let dh = h.gradient(x)?;
    let a = bracket.value_from_gradients(x, &df, &dh);
    let b = bracket.value_from_gradients(x, &dh, &df);
    Ok(((a.value + b.value).abs(), a.scale.max(b.scale)))
}

/// `|{F, GH} - G {F, H} - H {F, G}|` and its scale.
pub fn leibniz_defect<P: ChartPoint, B: Bracket<P>>(
    bracket: &B,
    f: &Observable<P>,
    g: &Observable<P>,
    h: &Observable<P>,
    x: &P,
) -> Result<(f64, f64)> {
    let gh = Observable::product(g, h);
    let lhs = bracket.eval_scaled(f, &gh, x)?;
    let fh = bracket.eval_scaled(f, h, x)?;
    let fg = bracket.eval_scaled(f, g, x)?;
    let (gv, hv) = (g.value(x), h.value(x));
    let defect = (lhs.value - gv * fh.value - hv * fg.value).abs();
    let scale = lhs.scale.max(gv.abs() * fh.scale + hv.abs() * fg.scale);
    Ok((defect, scale))
}

/// Helper for gradient differences in tests and checks.
pub fn gradient_distance<G: Gradient>(a: &G, b: &G) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::r_bracket;
    use crate::coords;
    use crate::dynamics::hamiltonian;
    use crate::phase::{invariant_family, invariant_observable, sample_point, Part};

    #[test]
    fn hamiltonians_are_in_involution() {
        for seed in 0..5 {
            let x: FullPoint = sample_point(3, seed).unwrap();
            for k in 1..=5 {
                for l in 1..=5 {
                    let (hk, hl) = (hamiltonian(k).full(), hamiltonian(l).full());
                    let a = FirstFull.eval_scaled(&hk, &hl, &x).unwrap();
                    let b = SecondFull.eval_scaled(&hk, &hl, &x).unwrap();
                    assert!(a.value.abs() <= 1e-10 * a.scale, "{k},{l}: {:e}", a.value);
                    assert!(b.value.abs() <= 1e-10 * b.scale, "{k},{l}: {:e}", b.value);
                }
            }
        }
    }

    #[test]
    fn self_bracket_vanishes() {
        let x: FullPoint = sample_point(3, 3).unwrap();
        let f = invariant_observable(1, 1, Part::Re).unwrap().full();
        assert!(pb1_full(&f, &f, &x).unwrap().abs() < 1e-12);
        assert!(pb2_full(&f, &f, &x).unwrap().abs() < 1e-12);
        let r: RedPoint = sample_point(3, 3).unwrap();
        let f = invariant_observable(2, 1, Part::Im).unwrap().red();
        assert!(pb1_red(&f, &f, &r).unwrap().abs() < 1e-12);
        assert!(pb2_red(&f, &f, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn second_bracket_ladder() {
        let x: FullPoint = sample_point(4, 1).unwrap();
        for f in invariant_family(2, 2) {
            let obs = f.full();
            for k in 1..=4 {
                let a = SecondFull
                    .eval_scaled(&obs, &hamiltonian(k).full(), &x)
                    .unwrap();
                let b = FirstFull
                    .eval_scaled(&obs, &hamiltonian(k + 1).full(), &x)
                    .unwrap();
                assert!((a.value - b.value).abs() <= 1e-8 * a.scale.max(b.scale));
            }
        }
    }

    /// Poisson tensor assembled by finite differences in a global basis:
    /// `{F, H} = sum_ab P_ab dF_a dH_b` where the tensor entries are brackets of
    /// coordinate-like functions. Here the oracle contracts FD gradients in the
    /// tangent basis against the bracket of basis dual functionals.
    #[test]
    fn first_bracket_matches_dense_tensor_oracle() {
        let x: FullPoint = sample_point(3, 4).unwrap();
        let f = invariant_observable(1, 0, Part::Re)
            .unwrap()
            .full()
            .without_gradient();
        let h = hamiltonian(1).full().without_gradient();
        let value = pb1_full(&f, &h, &x).unwrap();

        // dense tensor: P_ab = FirstFull evaluated on unit gradient vectors
        let tangents = x.basis_tangents();
        let dim = tangents.len();
        let unit = |a: usize| {
            let mut d = vec![0.0; dim];
            d[a] = 1.0;
            x.assemble(&d)
        };
        let units: Vec<FullGradient> = (0..dim).map(unit).collect();
        let step = 6.1e-6 * (1.0 + x.l.norm());
        let fd = |o: &Observable<FullPoint>| -> Vec<f64> {
            tangents
                .iter()
                .map(|v| {
                    (o.value(&x.displaced(v, step).unwrap())
                        - o.value(&x.displaced(v, -step).unwrap()))
                        / (2.0 * step)
                })
                .collect()
        };
        let (df, dh) = (fd(&f), fd(&h));
        let mut contracted = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                let pab = FirstFull.from_gradients(&x, &units[a], &units[b]);
                contracted += pab * df[a] * dh[b];
            }
        }
        assert!(
            (value - contracted).abs() < 1e-8 * (1.0 + value.abs()),
            "{value} vs {contracted}"
        );
        // Re tr(g) is not conserved by free motion with L generic
        assert!(value.abs() > 1e-6);
    }

    #[test]
    fn pencil_endpoints() {
        let x: FullPoint = sample_point(3, 2).unwrap();
        let f = invariant_observable(1, 1, Part::Re).unwrap().full();
        let h = invariant_observable(2, 1, Part::Im).unwrap().full();
        assert_eq!(
            pencil(0.0).eval(&f, &h, &x).unwrap(),
            pb1_full(&f, &h, &x).unwrap()
        );
        let one = pencil(1.0);
        let (d, s) = antisymmetry_defect(&one, &f, &h, &x).unwrap();
        assert!(d <= 1e-10 * s);
    }

    #[test]
    fn jacobi_trivial_and_first_bracket() {
        let x: FullPoint = sample_point(2, 6).unwrap();
        let f = invariant_observable(1, 1, Part::Re).unwrap().full();
        let g = invariant_observable(1, 0, Part::Im).unwrap().full();
        let h = invariant_observable(0, 2, Part::Re).unwrap().full();
        let j = jacobi_defect(&FirstFull, &f, &f, &h, &x).unwrap();
        assert!(j.defect <= 1e-4 * j.scale, "{j:?}");
        let j = jacobi_defect(&FirstFull, &f, &g, &h, &x).unwrap();
        assert!(j.defect <= 1e-4 * j.scale, "{j:?}");
        let j = jacobi_defect(&pencil(0.5), &f, &g, &h, &x).unwrap();
        assert!(j.defect <= 1e-4 * j.scale, "{j:?}");
    }

    #[test]
    fn jacobi_detects_a_non_poisson_bracket() {
        // A bracket with a deliberately broken last term must fail Jacobi.
        struct Broken;
        impl Bracket<FullPoint> for Broken {
            fn name(&self) -> String {
                "broken".into()
            }
            fn terms(&self, x: &FullPoint, df: &FullGradient, dh: &FullGradient) -> Vec<Term> {
                let l = x.l.to_gl();
                let l2 = &l * &l;
                let mut t = FirstFull.terms(x, df, dh);
                t[2] = Term::new(pair(&l2, &df.d2.commutator(&dh.d2)), t[2].bound * l.norm());
                t
            }
        }
        let x: FullPoint = sample_point(2, 6).unwrap();
        let [f, g, h] = entry_observables();
        let j = jacobi_defect(&Broken, &f, &g, &h, &x).unwrap();
        assert!(j.defect > 1e-2 * j.scale, "{j:?}");
        let j = jacobi_defect(&FirstFull, &f, &g, &h, &x).unwrap();
        assert!(j.defect <= 1e-4 * j.scale, "{j:?}");
    }

    /// Matrix-entry functions, not conjugation invariant; FD gradients only.
    fn entry_observables() -> [Observable<FullPoint>; 3] {
        [
            Observable::new("Re g01", |x: &FullPoint| x.g.matrix()[(0, 1)].re),
            Observable::new("Im L01 g10", |x: &FullPoint| {
                (x.l.matrix()[(0, 1)] * x.g.matrix()[(1, 0)]).im
            }),
            Observable::new("Re L00 g11", |x: &FullPoint| {
                (x.l.matrix()[(0, 0)] * x.g.matrix()[(1, 1)]).re
            }),
        ]
    }

    #[test]
    fn both_brackets_satisfy_jacobi_on_non_invariant_functions() {
        let x: FullPoint = sample_point(2, 8).unwrap();
        let [f, g, h] = entry_observables();
        for s in [0.0, 1.0] {
            let j = jacobi_defect(&pencil(s), &f, &g, &h, &x).unwrap();
            assert!(j.defect <= 1e-4 * j.scale, "s={s}: {j:?}");
        }
    }

    #[test]
    fn reduced_casimir_term_matches_r_bracket() {
        let x: RedPoint = sample_point(3, 5).unwrap();
        let f = invariant_observable(0, 2, Part::Re).unwrap().red();
        let h = invariant_observable(0, 3, Part::Re).unwrap().red();
        let (df, dh) = (f.gradient(&x).unwrap(), h.gradient(&x).unwrap());
        assert!(df.d1.norm() == 0.0 && dh.d1.norm() == 0.0);
        let direct = pair(&x.l.to_gl(), &r_bracket(&x.q, &df.d2, &dh.d2).unwrap());
        assert!((pb1_red(&f, &h, &x).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn momentum_only_observables_commute() {
        let x: RsPoint = sample_point(3, 1).unwrap();
        let f = Observable::<RsPoint>::new("p0", |x| x.p[0]);
        let h = Observable::<RsPoint>::new("p1^2", |x| x.p[1] * x.p[1]);
        assert!(pb_rs(&f, &h, &x).unwrap().abs() < 1e-12);
        let s: SuthPoint = sample_point(3, 1).unwrap();
        let f = Observable::<SuthPoint>::new("p0", |x| x.p[0]);
        let h = Observable::<SuthPoint>::new("p1^2", |x| x.p[1] * x.p[1]);
        assert!(pb_suth(&f, &h, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn raw_rs_bracket_is_twice_the_bracket() {
        let x: RsPoint = sample_point(2, 2).unwrap();
        let f = invariant_observable(1, 1, Part::Re).unwrap().rs();
        let h = invariant_observable(0, 2, Part::Re).unwrap().rs();
        let a = pb_rs(&f, &h, &x).unwrap();
        let b = RsBracket { raw: true }.eval(&f, &h, &x).unwrap();
        assert!((2.0 * a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn cross_chart_consistency_small() {
        let f = invariant_observable(1, 1, Part::Re).unwrap();
        let h = invariant_observable(1, 2, Part::Im).unwrap();

        // reduced vs full
        let x: RedPoint = sample_point(3, 2).unwrap();
        let full = FullPoint::from_red(&x);
        let a = FirstRed.eval_scaled(&f.red(), &h.red(), &x).unwrap();
        let b = FirstFull.eval_scaled(&f.full(), &h.full(), &full).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-6 * a.scale.max(b.scale),
            "{a:?} {b:?}"
        );
        let a = SecondRed.eval_scaled(&f.red(), &h.red(), &x).unwrap();
        let b = SecondFull.eval_scaled(&f.full(), &h.full(), &full).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-6 * a.scale.max(b.scale),
            "{a:?} {b:?}"
        );

        // Ruijsenaars chart vs second reduced bracket
        let y: RsPoint = sample_point(2, 2).unwrap();
        let r = coords::from_rs(&y).unwrap();
        let a = RsBracket::default()
            .eval_scaled(&f.rs(), &h.rs(), &y)
            .unwrap();
        let b = SecondRed.eval_scaled(&f.red(), &h.red(), &r).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-5 * a.scale.max(b.scale),
            "{a:?} {b:?}"
        );

        // Sutherland chart vs first reduced bracket
        let s: SuthPoint = sample_point(3, 2).unwrap();
        let r = coords::from_suth(&s).unwrap();
        let a = SuthBracket.eval_scaled(&f.suth(), &h.suth(), &s).unwrap();
        let b = FirstRed.eval_scaled(&f.red(), &h.red(), &r).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-6 * a.scale.max(b.scale),
            "{a:?} {b:?}"
        );
    }
}
