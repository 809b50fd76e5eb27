//! The two changes of variables on the reduced space.
//!
//! * Ruijsenaars chart: `L = b b^dagger`, `b = e^p b_+`,
//!   `lambda = b_+^{-1} Q^{-1} b_+ Q`, valid for positive definite `L`.
//! * Sutherland chart: `L = p - (R(Q) + 1/2)(phi)`.

use num_complex::Complex64;

use crate::algebra::{c64, chol_upper, CMat, HermitianMat, TorusReg, UnipotentUpper, ONE, ZERO};
use crate::error::{Error, Result};
use crate::phase::{RedPoint, RsPoint, SuthPoint};

/// `(Q, L) -> (Q, p, lambda)`.
pub fn to_rs(x: &RedPoint) -> Result<RsPoint> {
    let n = x.q.n();
    let b = chol_upper(&x.l)?;
    let diag = b.diagonal();
    let p: Vec<f64> = diag.iter().map(|d| d.ln()).collect();
    // b_+ = e^{-p} b: divide row j by b_jj
    let bm = b.matrix();
    let bplus = CMat::from_fn(n, n, |j, k| match j.cmp(&k) {
        std::cmp::Ordering::Less => bm[(j, k)] / diag[j],
        std::cmp::Ordering::Equal => ONE,
        std::cmp::Ordering::Greater => ZERO,
    });
    let bplus = UnipotentUpper::from_upper_part(&bplus);
    let lambda = lambda_of(&x.q, &bplus);
    RsPoint::new(x.q.clone(), p, lambda)
}

/// `lambda = b_+^{-1} Q^{-1} b_+ Q`.
pub fn lambda_of(q: &TorusReg, bplus: &UnipotentUpper) -> UnipotentUpper {
    let n = q.n();
    let b = bplus.matrix();
    // (Q^{-1} b_+ Q)_jk = e^{i(q_k - q_j)} b_jk
    let conj = CMat::from_fn(n, n, |j, k| {
        b[(j, k)] * Complex64::from_polar(1.0, -q.angle(j, k))
    });
    UnipotentUpper::from_upper_part(&(bplus.inverse() * conj))
}

/// Unique `b_+` with `b_+ lambda = Q^{-1} b_+ Q`, solved superdiagonal by
/// superdiagonal:
/// `(b_+)_jk (e^{i(q_k - q_j)} - 1) = sum_{j <= m < k} (b_+)_jm lambda_mk`.
pub fn solve_bplus(q: &TorusReg, lambda: &UnipotentUpper) -> Result<UnipotentUpper> {
    let n = q.n();
    if lambda.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lambda.n(),
        });
    }
    let lam = lambda.matrix();
    let mut b = CMat::identity(n, n);
    for d in 1..n {
        for j in 0..n - d {
            let k = j + d;
            let mut s = ZERO;
            for m in j..k {
                s += b[(j, m)] * lam[(m, k)];
            }
            let denom = Complex64::from_polar(1.0, -q.angle(j, k)) - ONE;
            b[(j, k)] = s / denom;
        }
    }
    Ok(UnipotentUpper::from_upper_part(&b))
}

/// `||b_+ lambda - Q^{-1} b_+ Q||_F`.
pub fn bplus_residual(q: &TorusReg, lambda: &UnipotentUpper, bplus: &UnipotentUpper) -> f64 {
    let n = q.n();
    let b = bplus.matrix();
    let conj = CMat::from_fn(n, n, |j, k| {
        b[(j, k)] * Complex64::from_polar(1.0, -q.angle(j, k))
    });
    crate::algebra::frobenius(&(b * lambda.matrix() - conj))
}

/// `(Q, p, lambda) -> (Q, L)` with `L = e^p b_+ b_+^dagger e^p`.
pub fn from_rs(x: &RsPoint) -> Result<RedPoint> {
    let n = x.q.n();
    let bplus = solve_bplus(&x.q, &x.lambda)?;
    let ep: Vec<f64> = x.p.iter().map(|p| p.exp()).collect();
    let bm = bplus.matrix();
    let b = CMat::from_fn(n, n, |j, k| bm[(j, k)] * ep[j]);
    RedPoint::new(x.q.clone(), HermitianMat::new(&b * b.adjoint()))
}

/// Multiplier of `R(Q) + 1/2` on `E_jk`, `j != k`: `w / (w - 1)` with
/// `w = e^{i(q_j - q_k)}`, i.e. `1/2 - (i/2) cot((q_j - q_k)/2)`.
pub fn suth_multiplier(q: &TorusReg, j: usize, k: usize) -> Complex64 {
    let half = 0.5 * q.angle(j, k);
    c64(0.5, -0.5 * half.cos() / half.sin())
}

/// `(Q, p, phi) -> (Q, L)` with `L = p - (R(Q) + 1/2)(phi)`.
pub fn from_suth(x: &SuthPoint) -> Result<RedPoint> {
    let n = x.q.n();
    let phi = x.phi().matrix();
    let l = CMat::from_fn(n, n, |j, k| {
        if j == k {
            c64(x.p[j], 0.0)
        } else {
            -suth_multiplier(&x.q, j, k) * phi[(j, k)]
        }
    });
    RedPoint::new(x.q.clone(), HermitianMat::new(l))
}

/// `(Q, L) -> (Q, p, phi)`: `p` is the diagonal of `L` and
/// `phi_jk = -L_jk (w - 1)/w = -L_jk (1 - e^{-i(q_j - q_k)})`.
pub fn to_suth(x: &RedPoint) -> Result<SuthPoint> {
    let n = x.q.n();
    let l = x.l.matrix();
    let p: Vec<f64> = (0..n).map(|j| l[(j, j)].re).collect();
    let phi = CMat::from_fn(n, n, |j, k| {
        if j == k {
            ZERO
        } else {
            -l[(j, k)] * (ONE - Complex64::from_polar(1.0, -x.q.angle(j, k)))
        }
    });
    SuthPoint::from_off_diagonal(x.q.clone(), p, &phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{frobenius, r_apply, GlElement, I};
    use crate::phase::sample_point;

    fn torus(q: &[f64]) -> TorusReg {
        TorusReg::new(q.to_vec()).unwrap()
    }

    #[test]
    fn identity_maps_to_trivial_rs_point() {
        let x = RedPoint::new(torus(&[0.1, 1.2, 2.5]), HermitianMat::identity(3)).unwrap();
        let r = to_rs(&x).unwrap();
        assert!(r.p.iter().all(|p| *p == 0.0));
        assert_eq!(r.lambda, UnipotentUpper::identity(3));
        let back =
            from_rs(&RsPoint::new(x.q.clone(), vec![0.0; 3], UnipotentUpper::identity(3)).unwrap())
                .unwrap();
        assert_eq!(back.l, HermitianMat::identity(3));
    }

    #[test]
    fn two_by_two_rs_example() {
        let (q1, q2) = (0.4, 2.1);
        let l = HermitianMat::new(CMat::from_fn(2, 2, |j, k| {
            c64([[2.0, 1.0], [1.0, 1.0]][j][k], 0.0)
        }));
        let r = to_rs(&RedPoint::new(torus(&[q1, q2]), l).unwrap()).unwrap();
        assert!(r.p.iter().all(|p| p.abs() < 1e-15));
        // direct 2x2 arithmetic: lambda_12 = e^{i(q2 - q1)} - 1
        let expected = Complex64::from_polar(1.0, q2 - q1) - 1.0;
        assert!((r.lambda.matrix()[(0, 1)] - expected).norm() < 1e-15);
    }

    #[test]
    fn solve_bplus_examples() {
        let q = torus(&[0.3, 1.7]);
        assert_eq!(
            solve_bplus(&q, &UnipotentUpper::identity(2)).unwrap(),
            UnipotentUpper::identity(2)
        );

        let mut lam = CMat::identity(2, 2);
        lam[(0, 1)] = c64(0.7, -1.1);
        let lam = UnipotentUpper::new(lam).unwrap();
        let b = solve_bplus(&q, &lam).unwrap();
        let expected = c64(0.7, -1.1) / (Complex64::from_polar(1.0, 1.7 - 0.3) - 1.0);
        assert!((b.matrix()[(0, 1)] - expected).norm() < 1e-15);
        assert!(bplus_residual(&q, &lam, &b) < 1e-15);
    }

    #[test]
    fn solve_bplus_random_n4() {
        for seed in 0..20 {
            let x: RsPoint = sample_point(4, seed).unwrap();
            let b = solve_bplus(&x.q, &x.lambda).unwrap();
            assert!(bplus_residual(&x.q, &x.lambda, &b) <= 1e-12 * frobenius(b.matrix()));
            let back = to_rs(&from_rs(&x).unwrap()).unwrap();
            let err = frobenius(&(back.lambda.matrix() - x.lambda.matrix()));
            assert!(
                err <= 1e-9 * (1.0 + frobenius(x.lambda.matrix())),
                "seed {seed}: {err:e}"
            );
        }
    }

    #[test]
    fn bplus_is_unique() {
        let x: RsPoint = sample_point(3, 17).unwrap();
        let b = solve_bplus(&x.q, &x.lambda).unwrap();
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            let mut m = b.matrix().clone();
            m[(j, k)] += c64(1e-6, 0.0);
            let perturbed = UnipotentUpper::new(m).unwrap();
            assert!(bplus_residual(&x.q, &x.lambda, &perturbed) > 1e-8);
        }
    }

    #[test]
    fn trace_of_l_matches_weighted_sum() {
        let x: RsPoint = sample_point(4, 2).unwrap();
        let r = from_rs(&x).unwrap();
        let b = solve_bplus(&x.q, &x.lambda).unwrap();
        let bb = b.matrix() * b.matrix().adjoint();
        let sum: f64 = (0..4).map(|i| (2.0 * x.p[i]).exp() * bb[(i, i)].re).sum();
        let tr = r.l.matrix().trace().re;
        assert!((sum - tr).abs() <= 1e-12 * tr.abs());
    }

    #[test]
    fn torus_equivariance_of_lambda() {
        let x: RedPoint = {
            let r: RsPoint = sample_point(3, 4).unwrap();
            from_rs(&r).unwrap()
        };
        let tau = [0.4, -1.3, 2.2];
        let t = CMat::from_fn(3, 3, |j, k| {
            if j == k {
                Complex64::from_polar(1.0, tau[j])
            } else {
                ZERO
            }
        });
        let moved = RedPoint::new(x.q.clone(), x.l.conjugated_by_unitary(&t)).unwrap();
        let a = to_rs(&x).unwrap();
        let b = to_rs(&moved).unwrap();
        for j in 0..3 {
            assert!((a.p[j] - b.p[j]).abs() < 1e-13);
        }
        let expected = &t * a.lambda.matrix() * t.adjoint();
        assert!(frobenius(&(expected - b.lambda.matrix())) < 1e-12);
    }

    #[test]
    fn suth_examples() {
        let q = torus(&[0.2, 1.0, 2.9]);
        let x = SuthPoint::from_off_diagonal(q.clone(), vec![1.0, -2.0, 0.5], &CMat::zeros(3, 3))
            .unwrap();
        assert_eq!(
            from_suth(&x).unwrap().l,
            HermitianMat::from_real_diagonal(&[1.0, -2.0, 0.5])
        );

        // q1 - q2 = pi, phi = E12 + E21: L_12 = -1/2
        let q = torus(&[std::f64::consts::PI, 0.0]);
        let phi = CMat::from_fn(2, 2, |j, k| if j != k { ONE } else { ZERO });
        let x = SuthPoint::from_off_diagonal(q, vec![0.0, 0.0], &phi).unwrap();
        let l = from_suth(&x).unwrap().l;
        assert!((l.matrix()[(0, 1)] - c64(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn suth_multiplier_is_r_plus_half() {
        let q = torus(&[0.3, 1.1, 4.0]);
        for (j, k) in [(0, 1), (1, 0), (0, 2), (2, 1)] {
            let w = Complex64::from_polar(1.0, q.angle(j, k));
            assert!((suth_multiplier(&q, j, k) - w / (w - 1.0)).norm() < 1e-14);
            // Hermiticity: m_kj = conj(m_jk)
            assert!((suth_multiplier(&q, k, j) - suth_multiplier(&q, j, k).conj()).norm() < 1e-15);
            let r = r_apply(&q, &GlElement::unit(3, j, k)).unwrap();
            assert!((r.get(j, k) + 0.5 - suth_multiplier(&q, j, k)).norm() < 1e-15);
        }
    }

    #[test]
    fn suth_round_trip_and_hermiticity() {
        for seed in 0..20 {
            let x: SuthPoint = sample_point(4, seed).unwrap();
            let r = from_suth(&x).unwrap();
            let raw = {
                let n = 4;
                let phi = x.phi().matrix();
                CMat::from_fn(n, n, |j, k| {
                    if j == k {
                        c64(x.p[j], 0.0)
                    } else {
                        -suth_multiplier(&x.q, j, k) * phi[(j, k)]
                    }
                })
            };
            assert!(frobenius(&(&raw - raw.adjoint())) <= 1e-13 * frobenius(&raw));
            for j in 0..4 {
                assert_eq!(r.l.matrix()[(j, j)].re, x.p[j]);
            }
            let back = to_suth(&r).unwrap();
            assert!(
                frobenius(&(back.phi().matrix() - x.phi().matrix()))
                    <= 1e-12 * (1.0 + frobenius(x.phi().matrix()))
            );
        }
        let r: RedPoint = RedPoint::new(
            torus(&[0.0, 2.0]),
            HermitianMat::from_real_diagonal(&[3.0, 4.0]),
        )
        .unwrap();
        let s = to_suth(&r).unwrap();
        assert_eq!(s.p, vec![3.0, 4.0]);
        assert_eq!(s.phi().matrix(), &CMat::zeros(2, 2));
        let _ = I;
    }

    #[test]
    fn to_rs_requires_positive_definite() {
        let x = RedPoint::new(
            torus(&[0.0, 1.0]),
            HermitianMat::from_real_diagonal(&[1.0, -1.0]),
        )
        .unwrap();
        assert!(matches!(to_rs(&x), Err(Error::NotPositiveDefinite { .. })));
    }
}
