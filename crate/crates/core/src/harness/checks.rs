//! The registered checks. Each runs one seed and returns worst-case defects.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::frobenius;
use crate::brackets::{
    jacobi_defect, leibniz_defect, pencil, Bracket, BracketValue, FirstFull, FirstRed, RsBracket,
    SecondFull, SecondRed, SuthBracket,
};
use crate::coords::{bplus_residual, from_rs, from_suth, solve_bplus, to_rs, to_suth};
use crate::dynamics::{flow, h_rs, h_suth2, hamiltonian, hk, rk4_flow, trajectory};
use crate::error::Result;
use crate::phase::{
    fd_gradient, invariant_family, sample_point, ChartPoint, FullPoint, InvariantObservable,
    Observable, RedPoint, RsPoint, SuthPoint,
};

use super::CheckSpec;

/// Worst absolute and relative defect seen so far.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Defects {
    pub abs: f64,
    pub rel: f64,
}

impl Defects {
    pub fn record(&mut self, abs: f64, scale: f64) {
        let abs = if abs.is_nan() { f64::INFINITY } else { abs };
        let rel = if scale > 0.0 { abs / scale } else { abs };
        self.abs = self.abs.max(abs);
        self.rel = self.rel.max(if rel.is_nan() { f64::INFINITY } else { rel });
    }

    fn record_pair(&mut self, (abs, scale): (f64, f64)) {
        self.record(abs, scale);
    }

    fn record_match(&mut self, a: BracketValue, b: BracketValue) {
        self.record((a.value - b.value).abs(), a.scale.max(b.scale));
    }
}

fn family(spec: &CheckSpec) -> Vec<InvariantObservable> {
    invariant_family(spec.max_m, spec.max_k)
}

/// `count` index triples into a list of length `len`, fixed by `seed`.
fn triples(len: usize, seed: u64, count: usize) -> Vec<[usize; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11_7e5e);
    (0..count)
        .map(|_| {
            let v = sample(&mut rng, len, 3.min(len)).into_vec();
            [v[0], v[1 % v.len()], v[2 % v.len()]]
        })
        .collect()
}

fn gradients<P: ChartPoint>(obs: &[Observable<P>], x: &P) -> Result<Vec<P::Gradient>> {
    obs.iter().map(|o| o.gradient(x)).collect()
}

fn fd_gradients<P: ChartPoint>(obs: &[Observable<P>], x: &P) -> Result<Vec<P::Gradient>> {
    obs.iter().map(|o| fd_gradient(o, x)).collect()
}

/// Antisymmetry on all pairs and Leibniz on the cyclic triples
/// `(f_i, f_{i+1}, f_{i+2})`.
fn axioms<P: ChartPoint, B: Bracket<P>>(
    bracket: &B,
    obs: &[Observable<P>],
    x: &P,
    out: &mut Defects,
) -> Result<()> {
    let grads = gradients(obs, x)?;
    for (a, ga) in grads.iter().enumerate() {
        for gb in &grads[a..] {
            let u = bracket.value_from_gradients(x, ga, gb);
            let v = bracket.value_from_gradients(x, gb, ga);
            out.record((u.value + v.value).abs(), u.scale.max(v.scale));
        }
    }
    let len = obs.len();
    for i in 0..len {
        let (f, g, h) = (&obs[i], &obs[(i + 1) % len], &obs[(i + 2) % len]);
        out.record_pair(leibniz_defect(bracket, f, g, h, x)?);
    }
    Ok(())
}

pub(super) fn a1_full_analytic(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.full()).collect();
    let mut d = Defects::default();
    axioms(&FirstFull, &obs, &x, &mut d)?;
    axioms(&SecondFull, &obs, &x, &mut d)?;
    Ok(d)
}

pub(super) fn a1_full_fd(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec)
        .iter()
        .map(|f| f.full().without_gradient())
        .collect();
    let mut d = Defects::default();
    axioms(&FirstFull, &obs, &x, &mut d)?;
    axioms(&SecondFull, &obs, &x, &mut d)?;
    Ok(d)
}

pub(super) fn a1_red_analytic(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RedPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.red()).collect();
    let mut d = Defects::default();
    axioms(&FirstRed, &obs, &x, &mut d)?;
    axioms(&SecondRed, &obs, &x, &mut d)?;
    Ok(d)
}

pub(super) fn a1_red_fd(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RedPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec)
        .iter()
        .map(|f| f.red().without_gradient())
        .collect();
    let mut d = Defects::default();
    axioms(&FirstRed, &obs, &x, &mut d)?;
    axioms(&SecondRed, &obs, &x, &mut d)?;
    Ok(d)
}

pub(super) fn a1_suth(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: SuthPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.suth()).collect();
    let mut d = Defects::default();
    axioms(&SuthBracket, &obs, &x, &mut d)?;
    Ok(d)
}

const JACOBI_TRIPLES: usize = 2;

fn jacobi_all<P: ChartPoint, B: Bracket<P>>(
    bracket: &B,
    obs: &[Observable<P>],
    x: &P,
    seed: u64,
    out: &mut Defects,
) -> Result<()> {
    for [a, b, c] in triples(obs.len(), seed, JACOBI_TRIPLES) {
        let j = jacobi_defect(bracket, &obs[a], &obs[b], &obs[c], x)?;
        out.record(j.defect, j.scale);
    }
    Ok(())
}

pub(super) fn a2_jacobi_full(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.full()).collect();
    let mut d = Defects::default();
    jacobi_all(&FirstFull, &obs, &x, seed, &mut d)?;
    jacobi_all(&SecondFull, &obs, &x, seed, &mut d)?;
    for s in [-1.0, 0.5, 1.0] {
        jacobi_all(&pencil(s), &obs, &x, seed, &mut d)?;
    }
    Ok(d)
}

pub(super) fn a2_jacobi_red(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RedPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.red()).collect();
    let mut d = Defects::default();
    jacobi_all(&FirstRed, &obs, &x, seed, &mut d)?;
    jacobi_all(&SecondRed, &obs, &x, seed, &mut d)?;
    Ok(d)
}

fn ladder<P: ChartPoint, B1: Bracket<P>, B2: Bracket<P>>(
    first: &B1,
    second: &B2,
    obs: &[Observable<P>],
    ham: &[Observable<P>],
    x: &P,
    out: &mut Defects,
) -> Result<()> {
    let grads = gradients(obs, x)?;
    let hgrads = gradients(ham, x)?;
    for g in &grads {
        for k in 0..hgrads.len() - 1 {
            let a = second.value_from_gradients(x, g, &hgrads[k]);
            let b = first.value_from_gradients(x, g, &hgrads[k + 1]);
            out.record_match(a, b);
        }
    }
    Ok(())
}

pub(super) fn a3_ladder_full(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.full()).collect();
    let ham: Vec<_> = (1..=5).map(|k| hamiltonian(k).full()).collect();
    let mut d = Defects::default();
    ladder(&FirstFull, &SecondFull, &obs, &ham, &x, &mut d)?;
    Ok(d)
}

pub(super) fn a3_ladder_red(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RedPoint = sample_point(spec.n, seed)?;
    let obs: Vec<_> = family(spec).iter().map(|f| f.red()).collect();
    let ham: Vec<_> = (1..=5).map(|k| hamiltonian(k).red()).collect();
    let mut d = Defects::default();
    ladder(&FirstRed, &SecondRed, &obs, &ham, &x, &mut d)?;
    Ok(d)
}

pub(super) fn a4_involution(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let ham: Vec<_> = (1..=5).map(|k| hamiltonian(k).full()).collect();
    let grads = gradients(&ham, &x)?;
    let mut d = Defects::default();
    for a in &grads {
        for b in &grads {
            for v in [
                FirstFull.value_from_gradients(&x, a, b),
                SecondFull.value_from_gradients(&x, a, b),
            ] {
                d.record(v.value.abs(), v.scale);
            }
        }
    }
    Ok(d)
}

/// Compares two brackets evaluated on matching observable lists at two points.
fn cross_chart<P: ChartPoint, R: ChartPoint, B: Bracket<P>, C: Bracket<R>>(
    (b_p, x, gp): (&B, &P, &[P::Gradient]),
    (b_r, y, gr): (&C, &R, &[R::Gradient]),
    out: &mut Defects,
) {
    for i in 0..gp.len() {
        for j in i + 1..gp.len() {
            let a = b_p.value_from_gradients(x, &gp[i], &gp[j]);
            let b = b_r.value_from_gradients(y, &gr[i], &gr[j]);
            out.record_match(a, b);
        }
    }
}

/// Reduced brackets with FD gradients against full brackets with analytic
/// gradients at `(Q, L)` viewed as a point of the full space.
pub(super) fn a5_reduction(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RedPoint = sample_point(spec.n, seed)?;
    let full = FullPoint::from_red(&x);
    let fam = family(spec);
    let red: Vec<_> = fam.iter().map(|f| f.red()).collect();
    let gr = fd_gradients(&red, &x)?;
    let gf = gradients(&fam.iter().map(|f| f.full()).collect::<Vec<_>>(), &full)?;
    let mut d = Defects::default();
    cross_chart((&FirstRed, &x, &gr), (&FirstFull, &full, &gf), &mut d);
    cross_chart((&SecondRed, &x, &gr), (&SecondFull, &full, &gf), &mut d);
    Ok(d)
}

pub(super) fn a6_rs_bracket(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RsPoint = sample_point(spec.n, seed)?;
    let r = from_rs(&x)?;
    let fam = family(spec);
    let g_rs = fd_gradients(&fam.iter().map(|f| f.rs()).collect::<Vec<_>>(), &x)?;
    let g_red = fd_gradients(&fam.iter().map(|f| f.red()).collect::<Vec<_>>(), &r)?;
    let mut d = Defects::default();
    cross_chart(
        (&RsBracket::default(), &x, &g_rs),
        (&SecondRed, &r, &g_red),
        &mut d,
    );
    Ok(d)
}

pub(super) fn a7_suth_bracket(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: SuthPoint = sample_point(spec.n, seed)?;
    let r = from_suth(&x)?;
    let fam = family(spec);
    let g_s = fd_gradients(&fam.iter().map(|f| f.suth()).collect::<Vec<_>>(), &x)?;
    let g_red = fd_gradients(&fam.iter().map(|f| f.red()).collect::<Vec<_>>(), &r)?;
    let mut d = Defects::default();
    cross_chart((&SuthBracket, &x, &g_s), (&FirstRed, &r, &g_red), &mut d);
    Ok(d)
}

fn vec_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn vec_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Round trips are measured against `1 + |x| + |L|`, the size of the data on
/// both sides of the chart map.
pub(super) fn a8_rs(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RsPoint = sample_point(spec.n, seed)?;
    let mut d = Defects::default();
    let r = from_rs(&x)?;
    let back = to_rs(&r)?;
    let lam = x.lambda.matrix();
    let scale = 1.0 + vec_norm(&x.p) + frobenius(lam) + r.l.norm();
    d.record(
        vec_dist(&x.p, &back.p) + frobenius(&(lam - back.lambda.matrix())),
        scale,
    );
    let r2 = from_rs(&back)?;
    d.record(frobenius(&(r.l.matrix() - r2.l.matrix())), scale);
    let bplus = solve_bplus(&x.q, &x.lambda)?;
    d.record(bplus_residual(&x.q, &x.lambda, &bplus), 1.0);
    Ok(d)
}

pub(super) fn a8_suth(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: SuthPoint = sample_point(spec.n, seed)?;
    let mut d = Defects::default();
    let r = from_suth(&x)?;
    let back = to_suth(&r)?;
    let phi = x.phi().matrix();
    let scale = 1.0 + vec_norm(&x.p) + frobenius(phi) + r.l.norm();
    d.record(
        vec_dist(&x.p, &back.p) + frobenius(&(phi - back.phi().matrix())),
        scale,
    );
    let r0: RedPoint = sample_point(spec.n, seed)?;
    let s0 = to_suth(&r0)?;
    let r1 = from_suth(&s0)?;
    let scale = 1.0 + r0.l.norm() + vec_norm(&s0.p) + frobenius(s0.phi().matrix());
    d.record(frobenius(&(r0.l.matrix() - r1.l.matrix())), scale);
    Ok(d)
}

pub(super) fn a9_rs(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: RsPoint = sample_point(spec.n, seed)?;
    let tr = from_rs(&x)?.l.matrix().trace().re;
    let mut d = Defects::default();
    d.record((h_rs(&x)? - tr).abs(), tr.abs());
    Ok(d)
}

pub(super) fn a9_suth(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: SuthPoint = sample_point(spec.n, seed)?;
    let l = from_suth(&x)?.l;
    let direct = (l.matrix() * l.matrix()).trace().re / 2.0;
    let mut d = Defects::default();
    d.record((h_suth2(&x) - direct).abs(), direct.abs());
    d.record((hk(&l, 2) - direct).abs(), direct.abs());
    Ok(d)
}

/// Orders of the flows compared against RK4.
pub const RK4_ORDERS: [u32; 2] = [1, 2];

pub(super) fn a10_rk4(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let mut d = Defects::default();
    for k in RK4_ORDERS {
        for (t, steps) in [(0.25, 250), (0.5, 500), (1.0, 1000)] {
            let exact = flow(&x, k, t);
            let rk = rk4_flow(&x, k, t, steps);
            d.record(frobenius(&(exact.g.matrix() - rk)), 1.0);
        }
    }
    Ok(d)
}

pub(super) fn a10_drift(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut d = Defects::default();
    for k in 1..=3 {
        let tr = trajectory(&x, k, &grid)?;
        d.record(tr.max_conserved_drift(), 1.0);
    }
    Ok(d)
}

pub(super) fn a10_group(spec: &CheckSpec, seed: u64) -> Result<Defects> {
    let x: FullPoint = sample_point(spec.n, seed)?;
    let mut d = Defects::default();
    for k in 1..=3 {
        for (t1, t2) in [(0.37, 0.58), (1.0, -0.4)] {
            let a = flow(&flow(&x, k, t1), k, t2);
            let b = flow(&x, k, t1 + t2);
            d.record(frobenius(&(a.g.matrix() - b.g.matrix())), 1.0);
        }
    }
    Ok(d)
}
