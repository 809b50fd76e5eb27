//! Hamiltonians, the exact flows, projection onto the reduced space and
//! trajectory extraction.

use log::warn;
use nalgebra::linalg::Schur;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

use crate::algebra::{c64, frobenius, CMat, HermitianMat, TorusReg, UnitaryMat};
use crate::config::Config;
use crate::coords::solve_bplus;
use crate::error::{Error, Result};
use crate::phase::{
    invariant_observable, FullPoint, InvariantObservable, Part, RedPoint, RsPoint, SuthPoint,
};

/// `tr(L^k) / k` from the eigenvalues of `L`.
pub fn hk(l: &HermitianMat, k: u32) -> f64 {
    assert!(k >= 1, "hk needs k >= 1");
    l.eigenvalues()
        .iter()
        .map(|e| e.powi(k as i32))
        .sum::<f64>()
        / k as f64
}

/// `H_k(g, L) = tr(L^k) / k` as an invariant observable, with `d_2 H_k = i L^{k-1}`.
pub fn hamiltonian(k: u32) -> InvariantObservable {
    assert!(k >= 1, "hamiltonian needs k >= 1");
    invariant_observable(0, k, Part::Re)
        .expect("k >= 1")
        .scaled(1.0 / k as f64)
}

/// `exp(i t L^k)` through the spectral decomposition of `L`.
pub fn flow_propagator(l: &HermitianMat, k: u32, t: f64) -> CMat {
    let (vals, vecs) = l.eigen();
    let n = vals.len();
    let phases = CMat::from_fn(n, n, |a, b| {
        if a == b {
            Complex64::from_polar(1.0, t * vals[a].powi(k as i32))
        } else {
            c64(0.0, 0.0)
        }
    });
    &vecs * phases * vecs.adjoint()
}

/// `(exp(i t L^k) g, L)`.
pub fn flow(x0: &FullPoint, k: u32, t: f64) -> FullPoint {
    let g = flow_propagator(&x0.l, k, t) * x0.g.matrix();
    let g = if crate::algebra::unitarity_defect(&g) > 1e-13 {
        UnitaryMat::reorthonormalized(g)
    } else {
        UnitaryMat::from_raw(g)
    };
    FullPoint { g, l: x0.l.clone() }
}

/// Classical fourth-order Runge-Kutta for `dg/dt = i L^k g` on `[0, t]`.
pub fn rk4_flow(x0: &FullPoint, k: u32, t: f64, steps: usize) -> CMat {
    let n = x0.l.n();
    let mut lk = CMat::identity(n, n);
    for _ in 0..k {
        lk = &lk * x0.l.matrix();
    }
    let a = lk * c64(0.0, 1.0);
    let h = t / steps as f64;
    let mut g = x0.g.matrix().clone();
    for _ in 0..steps {
        let k1 = &a * &g;
        let k2 = &a * (&g + &k1 * c64(0.5 * h, 0.0));
        let k3 = &a * (&g + &k2 * c64(0.5 * h, 0.0));
        let k4 = &a * (&g + &k3 * c64(h, 0.0));
        g += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0);
    }
    g
}

/// Diagonalizes `g = eta Q eta^dagger` and returns `((Q, eta^dagger L eta), eta)`.
///
/// Phases are sorted ascending in `[0, 2pi)`; each column of `eta` is rotated
/// so that its largest-magnitude entry is real positive.
pub fn reduce_point(x: &FullPoint) -> Result<(RedPoint, UnitaryMat)> {
    reduce_point_with(x, &Config::default())
}

pub fn reduce_point_with(x: &FullPoint, config: &Config) -> Result<(RedPoint, UnitaryMat)> {
    let n = x.g.n();
    let schur = Schur::try_new(x.g.matrix().clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::NonFinite {
            name: "Schur decomposition of g".into(),
        }
    })?;
    let (vecs, t) = schur.unpack();
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|j| (t[(j, j)].arg().rem_euclid(TAU), j))
        .collect();
    // rem_euclid can round up to TAU itself
    for o in &mut order {
        if o.0 >= TAU {
            o.0 = 0.0;
        }
    }
    order.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| vecs[(0, a.1)].re.total_cmp(&vecs[(0, b.1)].re))
    });
    let phases: Vec<f64> = order.iter().map(|o| o.0).collect();
    let mut eta = CMat::zeros(n, n);
    for (col, &(_, src)) in order.iter().enumerate() {
        let v = vecs.column(src);
        let mut best = 0;
        for r in 1..n {
            if v[r].norm() > v[best].norm() {
                best = r;
            }
        }
        let rot = Complex64::from_polar(1.0, -v[best].arg());
        eta.set_column(col, &(v * rot));
    }
    let q = TorusReg::with_gap(phases, config.regularity_gap).map_err(|e| match e {
        Error::NotRegular { gap, threshold } => Error::EigenvalueCollision { gap, threshold },
        other => other,
    })?;
    let l = HermitianMat::new(eta.adjoint() * x.l.matrix() * &eta);
    Ok((RedPoint { q, l }, UnitaryMat::from_raw(eta)))
}

/// A flow of the hierarchy sampled on a time grid and projected to `(Q, L)`.
///
/// Sample `i` stores the reduced point and gauge with eigenvalue labels
/// matched to sample `i - 1`; `phases` holds the same phases unwrapped to be
/// continuous in time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<RedPoint>,
    pub gauges: Vec<UnitaryMat>,
    pub phases: Vec<Vec<f64>>,
    pub conserved: Vec<Vec<f64>>,
    pub gauge_defects: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.points.first().map_or(0, |p| p.q.n())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_{t, l} |h_l(t) - h_l(0)| / (1 + |h_l(0)|)`.
    pub fn max_conserved_drift(&self) -> f64 {
        let Some(first) = self.conserved.first() else {
            return 0.0;
        };
        self.conserved
            .iter()
            .flat_map(|row| {
                row.iter()
                    .zip(first)
                    .map(|(h, h0)| (h - h0).abs() / (1.0 + h0.abs()))
            })
            .fold(0.0, f64::max)
    }

    pub fn max_gauge_defect(&self) -> f64 {
        self.gauge_defects.iter().copied().fold(0.0, f64::max)
    }
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Assignment of current phases to previous labels.
struct Matching {
    perm: Vec<usize>,
    ambiguous: bool,
}

fn match_phases(prev: &[f64], cur: &[f64]) -> Matching {
    let n = prev.len();
    let cost = |j: usize, c: usize| wrap_pi(cur[c] - prev[j]).abs();
    if n <= 8 {
        // exhaustive branch and bound, tracking the runner-up for ambiguity
        struct Search<'a> {
            cost: &'a dyn Fn(usize, usize) -> f64,
            n: usize,
            used: Vec<bool>,
            current: Vec<usize>,
            best: (f64, Vec<usize>),
            second: f64,
        }
        fn go(s: &mut Search, j: usize, acc: f64) {
            if acc > s.second {
                return;
            }
            if j == s.n {
                if acc < s.best.0 {
                    s.second = s.best.0;
                    s.best = (acc, s.current.clone());
                } else if acc < s.second {
                    s.second = acc;
                }
                return;
            }
            for c in 0..s.n {
                if !s.used[c] {
                    s.used[c] = true;
                    s.current.push(c);
                    let step = (s.cost)(j, c);
                    go(s, j + 1, acc + step);
                    s.current.pop();
                    s.used[c] = false;
                }
            }
        }
        let mut s = Search {
            cost: &cost,
            n,
            used: vec![false; n],
            current: Vec::with_capacity(n),
            best: (f64::INFINITY, Vec::new()),
            second: f64::INFINITY,
        };
        go(&mut s, 0, 0.0);
        let ambiguous = s.second - s.best.0 <= 1e-12;
        Matching {
            perm: s.best.1,
            ambiguous,
        }
    } else {
        let mut pairs: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|j| (0..n).map(move |c| (j, c)))
            .map(|(j, c)| (cost(j, c), j, c))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut perm = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        let mut ambiguous = false;
        let mut last = f64::NEG_INFINITY;
        for (c0, j, c) in pairs {
            if perm[j] == usize::MAX && !taken[c] {
                ambiguous |= (c0 - last).abs() <= 1e-12 && c0 > 0.0;
                last = c0;
                perm[j] = c;
                taken[c] = true;
            }
        }
        Matching { perm, ambiguous }
    }
}

fn permute_point(x: &RedPoint, eta: &UnitaryMat, perm: &[usize]) -> (RedPoint, UnitaryMat) {
    let n = perm.len();
    let q: Vec<f64> = perm.iter().map(|&c| x.q.phases()[c]).collect();
    let l = CMat::from_fn(n, n, |a, b| x.l.matrix()[(perm[a], perm[b])]);
    let e = eta.matrix();
    let eta = CMat::from_fn(n, n, |r, a| e[(r, perm[a])]);
    let q = TorusReg::with_gap(q, 0.0).expect("permutation of a regular torus element");
    (
        RedPoint {
            q,
            l: HermitianMat::new(l),
        },
        UnitaryMat::from_raw(eta),
    )
}

/// Samples `flow(x0, k, t)` on `t_grid`, reduces every sample and matches
/// eigenvalue labels between consecutive samples. Records `h_1..h_n`.
pub fn trajectory(x0: &FullPoint, k: u32, t_grid: &[f64]) -> Result<Trajectory> {
    trajectory_with(x0, k, t_grid, &Config::default())
}

pub fn trajectory_with(
    x0: &FullPoint,
    k: u32,
    t_grid: &[f64],
    config: &Config,
) -> Result<Trajectory> {
    match trajectory_prefix(x0, k, t_grid, config) {
        (tr, None) => Ok(tr),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`trajectory_with`], but on regularity loss returns the samples
/// before the first bad one together with the error.
pub fn trajectory_prefix(
    x0: &FullPoint,
    k: u32,
    t_grid: &[f64],
    config: &Config,
) -> (Trajectory, Option<Error>) {
    let n = x0.g.n();
    let samples: Vec<Result<(FullPoint, RedPoint, UnitaryMat)>> = t_grid
        .par_iter()
        .enumerate()
        .map(|(index, &t)| {
            let y = flow(x0, k, t);
            reduce_point_with(&y, config)
                .map(|(r, eta)| (y, r, eta))
                .map_err(|e| Error::RegularityLost {
                    index,
                    t,
                    reason: e.to_string(),
                })
        })
        .collect();

    let mut out = Trajectory {
        times: Vec::with_capacity(t_grid.len()),
        points: Vec::with_capacity(t_grid.len()),
        gauges: Vec::with_capacity(t_grid.len()),
        phases: Vec::with_capacity(t_grid.len()),
        conserved: Vec::with_capacity(t_grid.len()),
        gauge_defects: Vec::with_capacity(t_grid.len()),
        warnings: Vec::new(),
    };
    for (index, sample) in samples.into_iter().enumerate() {
        let (y, r, eta) = match sample {
            Ok(s) => s,
            Err(e) => return (out, Some(e)),
        };
        let (r, eta, unwrapped) = match out.phases.last() {
            None => {
                let ph = r.q.phases().to_vec();
                (r, eta, ph)
            }
            Some(prev) => {
                let m = match_phases(prev, r.q.phases());
                if m.ambiguous {
                    let msg = format!(
                        "ambiguous eigenvalue matching at sample {index} (t = {})",
                        t_grid[index]
                    );
                    warn!("{msg}");
                    out.warnings.push(msg);
                }
                let (r, eta) = permute_point(&r, &eta, &m.perm);
                let ph = prev
                    .iter()
                    .zip(r.q.phases())
                    .map(|(p, c)| p + wrap_pi(c - p))
                    .collect();
                (r, eta, ph)
            }
        };
        let e = eta.matrix();
        let recon = e * r.q.matrix() * e.adjoint();
        out.gauge_defects.push(frobenius(&(recon - y.g.matrix())));
        out.conserved
            .push((1..=n as u32).map(|l| hk(&r.l, l)).collect());
        out.times.push(t_grid[index]);
        out.points.push(r);
        out.gauges.push(eta);
        out.phases.push(unwrapped);
    }
    (out, None)
}

/// `sum_i e^{2 p_i} (b_+ b_+^dagger)_ii` with `b_+` solved from `(Q, lambda)`.
pub fn h_rs(x: &RsPoint) -> Result<f64> {
    let bp = solve_bplus(&x.q, &x.lambda)?;
    let b = bp.matrix();
    Ok((0..x.q.n())
        .map(|i| {
            let v: f64 = (0..x.q.n()).map(|m| b[(i, m)].norm_sqr()).sum();
            (2.0 * x.p[i]).exp() * v
        })
        .sum())
}

/// `1/2 sum p_i^2 + 1/8 sum_{j != l} |phi_jl|^2 / sin^2((q_j - q_l)/2)`.
pub fn h_suth2(x: &SuthPoint) -> f64 {
    let n = x.q.n();
    let phi = x.phi().matrix();
    let kinetic: f64 = 0.5 * x.p.iter().map(|p| p * p).sum::<f64>();
    let mut potential = 0.0;
    for j in 0..n {
        for l in 0..n {
            if j != l {
                let s = (0.5 * x.q.angle(j, l)).sin();
                potential += phi[(j, l)].norm_sqr() / (s * s);
            }
        }
    }
    kinetic + potential / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{unitarity_defect, UnipotentUpper};
    use crate::coords::{from_rs, from_suth};
    use crate::phase::sample_point;

    fn diff(a: &CMat, b: &CMat) -> f64 {
        frobenius(&(a - b))
    }

    #[test]
    fn hk_examples() {
        assert!((hk(&HermitianMat::identity(2), 3) - 2.0 / 3.0).abs() < 1e-15);
        assert!((hk(&HermitianMat::from_real_diagonal(&[1.0, 2.0]), 2) - 2.5).abs() < 1e-14);
        let x: FullPoint = sample_point(4, 1).unwrap();
        for k in 1..=4 {
            let direct = hamiltonian(k).eval(x.g.matrix(), x.l.matrix());
            assert!((hk(&x.l, k) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn zero_l_is_stationary() {
        let mut x: FullPoint = sample_point(3, 2).unwrap();
        x.l = HermitianMat::new(CMat::zeros(3, 3));
        for k in 1..4 {
            assert_eq!(flow(&x, k, 1.7).g.matrix(), x.g.matrix());
        }
    }

    #[test]
    fn flow_is_a_group_and_unitary() {
        let x: FullPoint = sample_point(4, 3).unwrap();
        for k in 1..=3 {
            let a = flow(&flow(&x, k, 0.3), k, 0.45);
            let b = flow(&x, k, 0.75);
            assert!(diff(a.g.matrix(), b.g.matrix()) < 1e-12);
            assert!(unitarity_defect(b.g.matrix()) < 1e-13);
            assert_eq!(a.l, x.l);
        }
    }

    #[test]
    fn exact_flow_matches_rk4() {
        for seed in 0..5 {
            let x: FullPoint = sample_point(3, seed).unwrap();
            for k in 1..=2 {
                let exact = flow(&x, k, 1.0);
                let rk = rk4_flow(&x, k, 1.0, 1000);
                assert!(diff(exact.g.matrix(), &rk) < 1e-8, "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn reduce_diagonal_input() {
        let q = vec![0.3, 1.2, 4.0];
        let x = FullPoint::new(
            UnitaryMat::from_phases(&q),
            HermitianMat::from_real_diagonal(&[1.0, 2.0, 3.0]),
        )
        .unwrap();
        let (r, eta) = reduce_point(&x).unwrap();
        for (a, b) in r.q.phases().iter().zip(&q) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(diff(eta.matrix(), &CMat::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn reduce_point_reconstructs_and_is_invariant() {
        for seed in 0..10 {
            let x: FullPoint = sample_point(4, seed).unwrap();
            let (r, eta) = reduce_point(&x).unwrap();
            let e = eta.matrix();
            assert!(diff(&(e * r.q.matrix() * e.adjoint()), x.g.matrix()) < 1e-12);
            assert!(r.q.phases().windows(2).all(|w| w[0] <= w[1]));
            let other: FullPoint = sample_point(4, seed + 100).unwrap();
            let (r2, _) = reduce_point(&x.conjugated(&other.g)).unwrap();
            for (a, b) in r.q.phases().iter().zip(r2.q.phases()) {
                assert!((a - b).abs() < 1e-11);
            }
            for m in 0..3 {
                for k in 0..3 {
                    if m + k == 0 {
                        continue;
                    }
                    for part in [Part::Re, Part::Im] {
                        let f = invariant_observable(m, k, part).unwrap();
                        let a = f.eval(&r.q.matrix(), r.l.matrix());
                        let b = f.eval(&r2.q.matrix(), r2.l.matrix());
                        assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn collision_is_reported() {
        let x = FullPoint::new(
            UnitaryMat::from_phases(&[1.0, 1.0, 2.0]),
            HermitianMat::identity(3),
        )
        .unwrap();
        assert!(matches!(
            reduce_point(&x),
            Err(Error::EigenvalueCollision { .. })
        ));
    }

    #[test]
    fn diagonal_flow_moves_phases_linearly() {
        // no crossings on [0, 2]; the third phase wraps through 2pi
        let q0 = vec![0.1, 2.0, 6.1];
        let d = [0.3, -0.2, 0.4];
        let x = FullPoint::new(
            UnitaryMat::from_phases(&q0),
            HermitianMat::from_real_diagonal(&d),
        )
        .unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let tr = trajectory(&x, 1, &grid).unwrap();
        for (t, ph) in tr.times.iter().zip(&tr.phases) {
            for i in 0..3 {
                assert!((ph[i] - (q0[i] + t * d[i])).abs() < 1e-11, "t={t}");
            }
        }
        assert!(tr.max_conserved_drift() < 1e-10);
    }

    #[test]
    fn trajectory_conserves_and_retraces() {
        let x: FullPoint = sample_point(3, 9).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let tr = trajectory(&x, 2, &grid).unwrap();
        assert!(tr.max_conserved_drift() <= 1e-10);
        assert!(tr.max_gauge_defect() <= 1e-12);
        let rev: Vec<f64> = grid.iter().rev().copied().collect();
        let back = trajectory(&x, 2, &rev).unwrap();
        let (a, b) = (tr.points.last().unwrap(), back.points.first().unwrap());
        let f = invariant_observable(2, 1, Part::Re).unwrap();
        let (va, vb) = (
            f.eval(&a.q.matrix(), a.l.matrix()),
            f.eval(&b.q.matrix(), b.l.matrix()),
        );
        assert!((va - vb).abs() < 1e-12 * (1.0 + va.abs()));
    }

    #[test]
    fn matching_prefers_the_nearest_labels() {
        let prev = [0.1, 3.0, 6.2];
        let cur = [0.05, 0.12, 3.05];
        let m = match_phases(&prev, &cur);
        assert_eq!(m.perm, vec![1, 2, 0]);
        assert!(!m.ambiguous);
    }

    #[test]
    fn h_rs_examples() {
        let q = TorusReg::new(vec![0.0, 1.0, 2.5]).unwrap();
        let x = RsPoint::new(q.clone(), vec![0.1, -0.2, 0.3], UnipotentUpper::identity(3)).unwrap();
        let expected: f64 = [0.1f64, -0.2, 0.3].iter().map(|p| (2.0 * p).exp()).sum();
        assert!((h_rs(&x).unwrap() - expected).abs() < 1e-14);
        for seed in 0..10 {
            let y: RsPoint = sample_point(3, seed).unwrap();
            let tr = from_rs(&y).unwrap().l.matrix().trace().re;
            let h = h_rs(&y).unwrap();
            assert!((h - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
            let shifted = RsPoint::new(
                y.q.clone(),
                y.p.iter().map(|p| p + 0.3).collect(),
                y.lambda.clone(),
            )
            .unwrap();
            assert!((h_rs(&shifted).unwrap() - 0.6f64.exp() * h).abs() < 1e-12 * h);
        }
    }

    #[test]
    fn h_suth2_examples() {
        let q = TorusReg::new(vec![PI, 0.0]).unwrap();
        let zero =
            SuthPoint::from_off_diagonal(q.clone(), vec![1.0, 0.0], &CMat::zeros(2, 2)).unwrap();
        assert!((h_suth2(&zero) - 0.5).abs() < 1e-15);
        let mut phi = CMat::zeros(2, 2);
        phi[(0, 1)] = c64(1.0, 0.0);
        phi[(1, 0)] = c64(1.0, 0.0);
        let x = SuthPoint::from_off_diagonal(q, vec![1.0, 0.0], &phi).unwrap();
        assert!((h_suth2(&x) - 0.75).abs() < 1e-14);
        assert!((hk(&from_suth(&x).unwrap().l, 2) - 0.75).abs() < 1e-14);
        for seed in 0..10 {
            let y: SuthPoint = sample_point(4, seed).unwrap();
            let l = from_suth(&y).unwrap().l;
            let h = hk(&l, 2);
            assert!((h_suth2(&y) - h).abs() <= 1e-12 * (1.0 + h.abs()));
            let direct = (l.matrix() * l.matrix()).trace().re / 2.0;
            assert!((direct - h).abs() <= 1e-12 * (1.0 + h.abs()));
        }
    }
}
