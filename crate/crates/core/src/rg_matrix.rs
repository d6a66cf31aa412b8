//! Matrix-valued decimation of the gasket: the renormalized hopping matrices
//! are computed without assuming the two-scalar form, so they serve as the
//! reference for the scalar flow.

use num_complex::Complex64;
use thiserror::Error;

use crate::coin::{dsg_hopping, grover_coin, CoinError, ComplexMatrix, HoppingSet, Role};
use crate::Family;

/// Largest accepted residual of the decimation consistency equations.
pub const DECIMATION_RESIDUAL_TOL: f64 = 1e-10;

/// Tolerance for the two-scalar shape check in [`extract_scalars_dsg`].
pub const SHAPE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecimationError {
    #[error("matrix decimation is only defined for the gasket, got {0}")]
    WrongFamily(Family),
    #[error("decimation singular while inverting {factor}: {source}")]
    Singular { factor: &'static str, source: CoinError },
    #[error("decimation residual {residual:.3e} exceeds {tol:.1e}")]
    Residual { residual: f64, tol: f64 },
    #[error("hopping matrices are not of the two-scalar form (deviation {deviation:.3e} in {slot})")]
    NotClosed { slot: &'static str, deviation: f64 },
    #[error("dense solve failed: singular pivot in column {0}")]
    DenseSingular(usize),
}

/// Decimation matrices and their consistency residual.
#[derive(Debug, Clone, PartialEq)]
pub struct DecimationSolution {
    pub p: ComplexMatrix,
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
    pub s: ComplexMatrix,
    pub t: ComplexMatrix,
    pub residual: f64,
}

fn dsg_roles(hops: &HoppingSet) -> Result<(&ComplexMatrix, &ComplexMatrix, &ComplexMatrix), DecimationError> {
    if hops.family != Family::Dsg {
        return Err(DecimationError::WrongFamily(hops.family));
    }
    let get = |r: Role| hops.get(r).ok_or(DecimationError::NotClosed { slot: r.name(), deviation: f64::INFINITY });
    Ok((get(Role::M)?, get(Role::A)?, get(Role::C)?))
}

fn inv(m: &ComplexMatrix, factor: &'static str) -> Result<ComplexMatrix, DecimationError> {
    m.inverse().map_err(|source| DecimationError::Singular { factor, source })
}

/// Solves the consistency equations for `P, Q, R` by
/// `S = (I−M−C)⁻¹A`, `T = (I−M−AS)⁻¹C`, `P = (I−M−A−CT)⁻¹A`, `R = TP`, `Q = SR`.
pub fn solve_pqr(hops: &HoppingSet) -> Result<DecimationSolution, DecimationError> {
    let (m, a, c) = dsg_roles(hops)?;
    let eye = ComplexMatrix::identity(m.dim());
    let i_m = &eye - m;
    let s = &inv(&(&i_m - c), "I-M-C")? * a;
    let t = &inv(&(&i_m - &(a * &s)), "I-M-AS")? * c;
    let p = &inv(&(&(&i_m - a) - &(c * &t)), "I-M-A-CT")? * a;
    let r = &t * &p;
    let q = &s * &r;
    let residual = pqr_residual(m, a, c, &p, &q, &r);
    if !(residual < DECIMATION_RESIDUAL_TOL) {
        return Err(DecimationError::Residual { residual, tol: DECIMATION_RESIDUAL_TOL });
    }
    Ok(DecimationSolution { p, q, r, s, t, residual })
}

/// Max deviation in `P = (M+A)P + A + CR`, `Q = (M+C)Q + AR`, `R = MR + AQ + CP`.
pub fn pqr_residual(
    m: &ComplexMatrix,
    a: &ComplexMatrix,
    c: &ComplexMatrix,
    p: &ComplexMatrix,
    q: &ComplexMatrix,
    r: &ComplexMatrix,
) -> f64 {
    let ma = m + a;
    let mc = m + c;
    let e1 = &(&(&ma * p) + a) + &(c * r);
    let e2 = &(&mc * q) + &(a * r);
    let e3 = &(&(m * r) + &(a * q)) + &(c * p);
    p.max_diff(&e1).max(q.max_diff(&e2)).max(r.max_diff(&e3))
}

/// One matrix RG step: `M' = M + 2AP`, `A' = A(Q+R)`, `C' = C`.
pub fn rg_step_matrix(hops: &HoppingSet) -> Result<HoppingSet, DecimationError> {
    let sol = solve_pqr(hops)?;
    let (m, a, c) = dsg_roles(hops)?;
    let two = Complex64::new(2.0, 0.0);
    let m_next = m + &(a * &sol.p).scale(two);
    let a_next = a * &(&sol.q + &sol.r);
    HoppingSet::new(
        Family::Dsg,
        hops.k + 1,
        hops.z,
        None,
        vec![(Role::M, m_next), (Role::A, a_next), (Role::C, c.clone())],
    )
    .map_err(|source| DecimationError::Singular { factor: "hopping set", source })
}

/// Recovers `(a, b)` from a gasket hopping set of the form
/// `M = diag(a/3 − 2b/3, z, 0)G`, `A = diag(a/3 + b/3, 0, 0)G`, `C = diag(0, 0, z)G`.
pub fn extract_scalars_dsg(hops: &HoppingSet) -> Result<(Complex64, Complex64), DecimationError> {
    let (m, a, c) = dsg_roles(hops)?;
    let g = grover_coin(3).expect("d = 3 is valid");
    // G² = I, so the diagonal prefactors are H·G
    let (wm, wa, wc) = (m * &g, a * &g, c * &g);
    let z = hops.z;
    let zero = Complex64::new(0.0, 0.0);
    let scale = 1.0f64.max(wm.max_abs()).max(wa.max_abs());
    let tol = SHAPE_TOL * scale;
    let check = |slot: &'static str, w: &ComplexMatrix, fixed: [Option<Complex64>; 3]| {
        let mut dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let v = *w.get(i, j);
                let target = if i == j { fixed[i] } else { Some(zero) };
                if let Some(t) = target {
                    dev = dev.max((v - t).norm());
                }
            }
        }
        if dev > tol {
            Err(DecimationError::NotClosed { slot, deviation: dev })
        } else {
            Ok(())
        }
    };
    check("M", &wm, [None, Some(z), Some(zero)])?;
    check("A", &wa, [None, Some(zero), Some(zero)])?;
    check("C", &wc, [Some(zero), Some(zero), Some(z)])?;
    let b = *wa.get(0, 0) - *wm.get(0, 0);
    let a = 3.0 * *wa.get(0, 0) - b;
    Ok((a, b))
}

/// Gasket hopping set after `k` matrix RG steps from the raw set at `z`.
pub fn matrix_flow(z: Complex64, k: u32) -> Result<Vec<HoppingSet>, DecimationError> {
    let raw = crate::coin::raw_hopping(Family::Dsg, z, None)
        .map_err(|source| DecimationError::Singular { factor: "raw hopping", source })?;
    let mut out = vec![raw];
    for _ in 0..k {
        let next = rg_step_matrix(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Rebuilds the two-scalar hopping set; convenience for comparisons.
pub fn hopping_from_scalars(a: Complex64, b: Complex64, z: Complex64, k: u32) -> HoppingSet {
    dsg_hopping(a, b, z, k).expect("d = 3 hopping set is well formed")
}

/// Dense complex solve `A x = b` by LU with partial pivoting; `a` is row-major `n × n`.
pub fn solve_dense(n: usize, mut a: Vec<Complex64>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>, DecimationError> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, a[r * n + col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= 1e-14 * scale {
            return Err(DecimationError::DenseSingular(col));
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in col..n {
                let v = a[col * n + j];
                a[r * n + j] -= f * v;
            }
            let bc = b[col];
            b[r] -= f * bc;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

/// Nine-site graphlet: `(A-neighbours, C-partner)` per site, corners 0, 1, 2
/// carrying their C self-loop.
pub const GRAPHLET: [([usize; 2], usize); 9] = [
    ([3, 4], 0),
    ([5, 6], 1),
    ([7, 8], 2),
    ([0, 4], 8),
    ([3, 0], 5),
    ([1, 6], 4),
    ([5, 1], 7),
    ([2, 8], 6),
    ([7, 2], 3),
];

fn solve_sites(
    sites: usize,
    coupling: impl Fn(usize) -> Vec<(usize, ComplexMatrix)>,
    psi_ic: &[Complex64],
) -> Result<Vec<Complex64>, DecimationError> {
    let d = psi_ic.len();
    let n = sites * d;
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        mat[i * n + i] = Complex64::new(1.0, 0.0);
    }
    for x in 0..sites {
        for (y, h) in coupling(x) {
            for i in 0..d {
                for j in 0..d {
                    mat[(x * d + i) * n + y * d + j] -= *h.get(i, j);
                }
            }
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[..d].copy_from_slice(psi_ic);
    solve_dense(n, mat, rhs)
}

/// Solves the full nine-site Laplace system with hopping set `hops` and
/// returns `ψ̄` at sites 0, 1, 2 (27 unknowns for a 3-dim coin).
pub fn graphlet_direct(hops: &HoppingSet, psi_ic: &[Complex64]) -> Result<Vec<Complex64>, DecimationError> {
    let (m, a, c) = dsg_roles(hops)?;
    let d = psi_ic.len();
    let full = solve_sites(
        9,
        |x| {
            let (nb, cp) = GRAPHLET[x];
            vec![(x, m.clone()), (nb[0], a.clone()), (nb[1], a.clone()), (cp, c.clone())]
        },
        psi_ic,
    )?;
    Ok(full[..3 * d].to_vec())
}

/// Solves the three-site system left after one decimation of `hops`.
pub fn graphlet_decimated(hops: &HoppingSet, psi_ic: &[Complex64]) -> Result<Vec<Complex64>, DecimationError> {
    let next = rg_step_matrix(hops)?;
    let (m, a, c) = dsg_roles(&next)?;
    solve_sites(
        3,
        |x| {
            let others: Vec<usize> = (0..3).filter(|&y| y != x).collect();
            vec![(x, m.clone()), (x, c.clone()), (others[0], a.clone()), (others[1], a.clone())]
        },
        psi_ic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::raw_hopping;
    use crate::rg_scalar::dsg_step;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn with_roles(m: ComplexMatrix, a: ComplexMatrix, cc: ComplexMatrix) -> HoppingSet {
        HoppingSet::new(Family::Dsg, 0, c(0.5, 0.0), None, vec![(Role::M, m), (Role::A, a), (Role::C, cc)]).unwrap()
    }

    #[test]
    fn zero_a_gives_zero_pqr() {
        let raw = raw_hopping(Family::Dsg, c(0.5, 0.0), None).unwrap();
        let h = with_roles(raw.role(Role::M).clone(), ComplexMatrix::zeros(3), raw.role(Role::C).clone());
        let sol = solve_pqr(&h).unwrap();
        assert!(sol.p.is_zero() && sol.q.is_zero() && sol.r.is_zero());
        let next = rg_step_matrix(&h).unwrap();
        assert_eq!(next.role(Role::M), h.role(Role::M));
        assert!(next.role(Role::A).is_zero());
    }

    #[test]
    fn zero_c_reduces_to_single_inverse() {
        let raw = raw_hopping(Family::Dsg, c(0.5, 0.0), None).unwrap();
        let (m, a) = (raw.role(Role::M).clone(), raw.role(Role::A).clone());
        let h = with_roles(m.clone(), a.clone(), ComplexMatrix::zeros(3));
        let sol = solve_pqr(&h).unwrap();
        assert!(sol.t.is_zero() && sol.r.is_zero() && sol.q.is_zero());
        let eye = ComplexMatrix::identity(3);
        let p = &(&(&eye - &m) - &a).inverse().unwrap() * &a;
        assert!(sol.p.max_diff(&p) < 1e-15);
    }

    #[test]
    fn raw_set_residual() {
        let raw = raw_hopping(Family::Dsg, c(0.5, 0.0), None).unwrap();
        assert!(solve_pqr(&raw).unwrap().residual < 1e-12);
    }

    #[test]
    fn c_is_unchanged_and_shape_is_kept() {
        let z = Complex64::from_polar(0.9, std::f64::consts::PI / 7.0);
        let flow = matrix_flow(z, 5).unwrap();
        for w in flow.windows(2) {
            assert_eq!(w[0].role(Role::C), w[1].role(Role::C));
            assert_eq!(w[1].k, w[0].k + 1);
        }
        for h in &flow {
            let (a, b) = extract_scalars_dsg(h).unwrap();
            assert!(hopping_from_scalars(a, b, z, h.k).role(Role::M).max_diff(h.role(Role::M)) < 1e-12);
        }
    }

    #[test]
    fn extraction_at_k0_and_fixed_point() {
        let z = c(0.3, 0.4);
        let (a, b) = extract_scalars_dsg(&raw_hopping(Family::Dsg, z, None).unwrap()).unwrap();
        assert!((a - z).norm() < 1e-15 && (b - z).norm() < 1e-15);
        let one = c(1.0, 0.0);
        let (a, b) = extract_scalars_dsg(&hopping_from_scalars(one, one, one, 3)).unwrap();
        assert!((a - one).norm() < 1e-15 && (b - one).norm() < 1e-15);
    }

    #[test]
    fn one_step_matches_scalar_flow() {
        let z = c(0.5, 0.0);
        let next = rg_step_matrix(&raw_hopping(Family::Dsg, z, None).unwrap()).unwrap();
        let (a, b) = extract_scalars_dsg(&next).unwrap();
        let (sa, sb) = dsg_step(&z, &z, &z).unwrap();
        assert!((a - sa).norm() < 1e-13 && (b - sb).norm() < 1e-13);
    }

    #[test]
    fn shape_violation_is_reported() {
        let raw = raw_hopping(Family::Dsg, c(0.5, 0.0), None).unwrap();
        let g = grover_coin(3).unwrap();
        let bad_a = &ComplexMatrix::real_diagonal(&[0.2, 0.1, 0.0]) * &g;
        let h = with_roles(raw.role(Role::M).clone(), bad_a, raw.role(Role::C).clone());
        assert!(matches!(extract_scalars_dsg(&h), Err(DecimationError::NotClosed { slot: "A", .. })));
    }

    #[test]
    fn wrong_family_rejected() {
        let line = raw_hopping(Family::Line, c(0.5, 0.0), Some(0.3)).unwrap();
        assert_eq!(solve_pqr(&line).unwrap_err(), DecimationError::WrongFamily(Family::Line));
    }

    #[test]
    fn dense_solver() {
        let a = vec![c(2.0, 0.0), c(1.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)];
        let x = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        let b = vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        let got = solve_dense(2, a, b).unwrap();
        assert!((got[0] - x[0]).norm() < 1e-15 && (got[1] - x[1]).norm() < 1e-15);
        assert!(solve_dense(2, vec![c(1.0, 0.0); 4], vec![c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn graphlet_table_matches_builder() {
        // builder labels mapped onto the reference labels
        let relabel = [0, 4, 3, 5, 1, 6, 8, 7, 2];
        let net = crate::network::build_dsg(2).unwrap();
        for (x, &rx) in relabel.iter().enumerate() {
            let mut nb: Vec<usize> = net.sources(x, Role::A).iter().map(|&y| relabel[y]).collect();
            nb.sort();
            let mut want = GRAPHLET[rx].0.to_vec();
            want.sort();
            assert_eq!(nb, want);
            assert_eq!(relabel[net.sources(x, Role::C)[0]], GRAPHLET[rx].1);
        }
    }

    #[test]
    fn decimation_matches_direct_solve() {
        let psi = crate::evolution::uniform_spinor(3);
        let raw = raw_hopping(Family::Dsg, c(0.6, -0.3), None).unwrap();
        let direct = graphlet_direct(&raw, &psi).unwrap();
        let dec = graphlet_decimated(&raw, &psi).unwrap();
        for (x, y) in direct.iter().zip(&dec) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
