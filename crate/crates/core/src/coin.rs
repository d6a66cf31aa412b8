//! Small dense complex matrices, coin operators, and the hopping-matrix sets
//! that define a walk on each network family.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::precision::Field;
use crate::Family;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative pivot threshold below which a matrix is treated as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// Default bound on `‖M·X − I‖_max` accepted from [`Matrix::inverse`].
pub const DEFAULT_INVERSE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoinError {
    #[error("invalid coin dimension {0}")]
    InvalidDimension(usize),
    #[error("matrix dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is singular (pivot {pivot:.3e} below {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("inverse failed verification: ‖M·X − I‖_max = {residual:.3e} exceeds {tol:.1e}")]
    InaccurateInverse { residual: f64, tol: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("family {0} requires a coin angle eta")]
    MissingEta(Family),
}

/// Dense `dim × dim` matrix over a complex [`Field`], row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix<F> {
    dim: usize,
    data: Vec<F>,
}

/// The double-precision matrix used throughout the crate.
pub type ComplexMatrix = Matrix<Complex64>;

impl<F: Field> Matrix<F> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![F::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = F::one();
        }
        m
    }

    /// Builds a matrix from its rows. Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[F]>>(rows: &[R]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim, "Matrix::from_rows: ragged input");
            data.extend_from_slice(r);
        }
        Self { dim, data }
    }

    pub fn diagonal(entries: &[F]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n);
        for (i, e) in entries.iter().enumerate() {
            m.data[i * n + i] = e.clone();
        }
        m
    }

    /// `P_ν` with a single unit entry at `(nu, nu)`.
    pub fn projector(dim: usize, nu: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.data[nu * dim + nu] = F::one();
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &F {
        &self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[F] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn map<G: Field>(&self, f: impl Fn(&F) -> G) -> Matrix<G> {
        Matrix { dim: self.dim, data: self.data.iter().map(f).collect() }
    }

    pub fn to_c64(&self) -> ComplexMatrix {
        self.map(|x| x.to_c64())
    }

    pub fn scale(&self, s: F) -> Self {
        self.map(|x| x.clone() * s.clone())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        self.map(|x| x.conj())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm_f64()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// `‖self − other‖_max`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).norm_f64())
            .fold(0.0, f64::max)
    }

    /// `‖M†M − I‖_max`.
    pub fn unitarity_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_diff(&Self::identity(self.dim))
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(F::zero(), |acc, (m, x)| acc + m.clone() * x.clone())
            })
            .collect()
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, CoinError> {
        self.check_dim(other)?;
        Ok(self + other)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, CoinError> {
        self.check_dim(other)?;
        Ok(self * other)
    }

    fn check_dim(&self, other: &Self) -> Result<(), CoinError> {
        if self.dim != other.dim {
            return Err(CoinError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    /// Inverse with the default residual tolerance.
    pub fn inverse(&self) -> Result<Self, CoinError> {
        self.inverse_with_tol(DEFAULT_INVERSE_RESIDUAL_TOL)
    }

    /// Gauss-Jordan inverse with partial pivoting. A pivot smaller than
    /// `1e-12·‖M‖_max` is reported as singular; the result is then verified by
    /// `‖M·X − I‖_max ≤ residual_tol`.
    pub fn inverse_with_tol(&self, residual_tol: f64) -> Result<Self, CoinError> {
        if !self.is_finite() {
            return Err(CoinError::NonFinite);
        }
        let n = self.dim;
        let scale = self.max_abs();
        let threshold = SINGULAR_PIVOT_TOL * scale;
        if scale == 0.0 {
            return Err(CoinError::Singular { pivot: 0.0, threshold });
        }
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let (piv_row, piv_abs) = (col..n)
                .map(|r| (r, a[r * n + col].norm_f64()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= threshold {
                return Err(CoinError::Singular { pivot: piv_abs, threshold });
            }
            if piv_row != col {
                for j in 0..n {
                    a.swap(col * n + j, piv_row * n + j);
                    inv.swap(col * n + j, piv_row * n + j);
                }
            }
            let p = F::one() / a[col * n + col].clone();
            for j in 0..n {
                a[col * n + j] = a[col * n + j].clone() * p.clone();
                inv[col * n + j] = inv[col * n + j].clone() * p.clone();
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col].clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[col * n + j].clone(), inv[col * n + j].clone());
                    a[r * n + j] = a[r * n + j].clone() - f.clone() * ac;
                    inv[r * n + j] = inv[r * n + j].clone() - f.clone() * ic;
                }
            }
        }
        let x = Self { dim: n, data: inv };
        if !x.is_finite() {
            return Err(CoinError::NonFinite);
        }
        let residual = (self * &x).max_diff(&Self::identity(n));
        if residual > residual_tol {
            return Err(CoinError::InaccurateInverse { residual, tol: residual_tol });
        }
        Ok(x)
    }
}

impl ComplexMatrix {
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cplx: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&cplx)
    }

    pub fn real_diagonal(entries: &[f64]) -> Self {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::diagonal(&c)
    }

    /// `out += self · v`, without allocating.
    #[inline]
    pub fn mul_vec_acc(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = ZERO;
            for (m, x) in row.iter().zip(v) {
                acc += m * x;
            }
            out[i] += acc;
        }
    }

    /// Lifts every entry into another field, e.g. extended precision.
    pub fn lift<G: Field>(&self, like: &G) -> Matrix<G> {
        self.map(|x| like.lift_like(*x))
    }
}

impl<F: Field> fmt::Debug for Matrix<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let v = self.get(i, j).to_c64();
                write!(f, "{:+.6}{:+.6}i  ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<'a, F: Field> Add<&'a Matrix<F>> for &'a Matrix<F> {
    type Output = Matrix<F>;
    fn add(self, rhs: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }
}

impl<'a, F: Field> Sub<&'a Matrix<F>> for &'a Matrix<F> {
    type Output = Matrix<F>;
    fn sub(self, rhs: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }
}

impl<'a, F: Field> Mul<&'a Matrix<F>> for &'a Matrix<F> {
    type Output = Matrix<F>;
    fn mul(self, rhs: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Matrix::<F>::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j].clone() + a.clone() * rhs.data[k * n + j].clone();
                }
            }
        }
        out
    }
}

impl<F: Field> Neg for &Matrix<F> {
    type Output = Matrix<F>;
    fn neg(self) -> Matrix<F> {
        self.map(|x| -x.clone())
    }
}

/// Grover coin `G = (2/d)·J − I`.
pub fn grover_coin(d: usize) -> Result<ComplexMatrix, CoinError> {
    if d == 0 {
        return Err(CoinError::InvalidDimension(d));
    }
    let off = 2.0 / d as f64;
    let mut g = ComplexMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let v = if i == j { off - 1.0 } else { off };
            g.set(i, j, Complex64::new(v, 0.0));
        }
    }
    Ok(g)
}

/// Reflective 2×2 coin `[[sin η, cos η], [cos η, −sin η]]`.
pub fn rotation_coin(eta: f64) -> ComplexMatrix {
    let (s, c) = eta.sin_cos();
    ComplexMatrix::from_real_rows(&[[s, c], [c, -s]])
}

/// Edge role a hopping matrix is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Stay on the site.
    M,
    /// Intra-triangle hop (DSG), first branch (MK3), right shift (line).
    A,
    /// Second branch (MK3), left shift (line).
    B,
    /// Inter-triangle hop (DSG), third branch (MK3).
    C,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::M => "M",
            Role::A => "A",
            Role::B => "B",
            Role::C => "C",
        }
    }
}

/// Diagonal weight prefactors of the raw DSG hopping matrices, in thirds.
/// Each raw matrix is `z · diag(w / 3) · G`.
pub const DSG_WEIGHT_THIRDS: [(Role, [i64; 3]); 3] =
    [(Role::M, [-1, 3, 0]), (Role::A, [2, 0, 0]), (Role::C, [0, 0, 3])];

const fn dsg_weights_sum_to_identity() -> bool {
    // W_M + 2·W_A + W_C, in thirds
    let mut i = 0;
    while i < 3 {
        let s = DSG_WEIGHT_THIRDS[0].1[i] + 2 * DSG_WEIGHT_THIRDS[1].1[i] + DSG_WEIGHT_THIRDS[2].1[i];
        if s != 3 {
            return false;
        }
        i += 1;
    }
    true
}

const _: () = assert!(dsg_weights_sum_to_identity(), "DSG weight prefactors must sum to I");

/// Named hopping matrices of one walk at RG step `k` and Laplace variable `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingSet {
    pub family: Family,
    pub coin_dim: usize,
    pub k: u32,
    pub z: Complex64,
    pub eta: Option<f64>,
    matrices: Vec<(Role, ComplexMatrix)>,
}

impl HoppingSet {
    pub fn new(
        family: Family,
        k: u32,
        z: Complex64,
        eta: Option<f64>,
        matrices: Vec<(Role, ComplexMatrix)>,
    ) -> Result<Self, CoinError> {
        let coin_dim = matrices.first().map(|(_, m)| m.dim()).unwrap_or(0);
        if coin_dim == 0 {
            return Err(CoinError::InvalidDimension(0));
        }
        for (_, m) in &matrices {
            if m.dim() != coin_dim {
                return Err(CoinError::DimensionMismatch(coin_dim, m.dim()));
            }
        }
        Ok(Self { family, coin_dim, k, z, eta, matrices })
    }

    pub fn get(&self, role: Role) -> Option<&ComplexMatrix> {
        self.matrices.iter().find(|(r, _)| *r == role).map(|(_, m)| m)
    }

    /// Panics if the role is absent; only use with roles the family defines.
    pub fn role(&self, role: Role) -> &ComplexMatrix {
        self.get(role)
            .unwrap_or_else(|| panic!("hopping set for {} has no {} matrix", self.family, role.name()))
    }

    pub fn roles(&self) -> impl Iterator<Item = (Role, &ComplexMatrix)> {
        self.matrices.iter().map(|(r, m)| (*r, m))
    }

    /// Sum of all hopping matrices.
    pub fn total(&self) -> ComplexMatrix {
        self.matrices
            .iter()
            .fold(ComplexMatrix::zeros(self.coin_dim), |acc, (_, m)| &acc + m)
    }
}

/// Un-renormalized (`k = 0`) hopping set, scaled by `z`.
///
/// The line family uses the plain shift `A = z·P₁·𝒞`, `B = z·P₂·𝒞`, `M = 0`;
/// one decimation step maps it onto the parametrized form with
/// `(a₁, b₁) = (z² sin η, z² cos η)`.
pub fn raw_hopping(family: Family, z: Complex64, eta: Option<f64>) -> Result<HoppingSet, CoinError> {
    match family {
        Family::Dsg => {
            let g = grover_coin(3)?;
            let matrices = DSG_WEIGHT_THIRDS
                .iter()
                .map(|(role, w)| {
                    let w: Vec<f64> = w.iter().map(|&x| x as f64 / 3.0).collect();
                    (*role, (&ComplexMatrix::real_diagonal(&w) * &g).scale(z))
                })
                .collect();
            HoppingSet::new(family, 0, z, None, matrices)
        }
        Family::Mk3 => mk3_hopping(z, z, z, 0),
        Family::Line => {
            let eta = eta.ok_or(CoinError::MissingEta(family))?;
            let coin = rotation_coin(eta);
            let a = (&ComplexMatrix::projector(2, 0) * &coin).scale(z);
            let b = (&ComplexMatrix::projector(2, 1) * &coin).scale(z);
            HoppingSet::new(
                family,
                0,
                z,
                Some(eta),
                vec![(Role::M, ComplexMatrix::zeros(2)), (Role::A, a), (Role::B, b)],
            )
        }
    }
}

/// DSG hopping set in the two-scalar form reached after `k` RG steps.
pub fn dsg_hopping(a: Complex64, b: Complex64, z: Complex64, k: u32) -> Result<HoppingSet, CoinError> {
    let g = grover_coin(3)?;
    let third = 1.0 / 3.0;
    let m = ComplexMatrix::diagonal(&[a * third - b * (2.0 * third), z, ZERO]);
    let av = ComplexMatrix::diagonal(&[(a + b) * third, ZERO, ZERO]);
    let c = ComplexMatrix::diagonal(&[ZERO, ZERO, z]);
    HoppingSet::new(
        Family::Dsg,
        k,
        z,
        None,
        vec![(Role::M, &m * &g), (Role::A, &av * &g), (Role::C, &c * &g)],
    )
}

/// MK3 hopping set: `{A, B, C} = ((a+b)/2)·P_ν·G`, `M = ((a−b)/2)·G`.
pub fn mk3_hopping(a: Complex64, b: Complex64, z: Complex64, k: u32) -> Result<HoppingSet, CoinError> {
    let g = grover_coin(3)?;
    let half_sum = (a + b) * 0.5;
    let half_diff = (a - b) * 0.5;
    let branch = |nu| (&ComplexMatrix::projector(3, nu) * &g).scale(half_sum);
    HoppingSet::new(
        Family::Mk3,
        k,
        z,
        None,
        vec![(Role::M, g.scale(half_diff)), (Role::A, branch(0)), (Role::B, branch(1)), (Role::C, branch(2))],
    )
}

/// Line hopping set in the parametrized form
/// `A = diag(a, 0)·𝒞`, `B = diag(0, −a)·𝒞`, `M = [[0, b], [b, 0]]·𝒞`.
pub fn line_hopping(a: Complex64, b: Complex64, eta: f64, z: Complex64, k: u32) -> Result<HoppingSet, CoinError> {
    let coin = rotation_coin(eta);
    let am = ComplexMatrix::diagonal(&[a, ZERO]);
    let bm = ComplexMatrix::diagonal(&[ZERO, -a]);
    let mm = ComplexMatrix::from_rows(&[[ZERO, b], [b, ZERO]]);
    HoppingSet::new(
        Family::Line,
        k,
        z,
        Some(eta),
        vec![(Role::M, &mm * &coin), (Role::A, &am * &coin), (Role::B, &bm * &coin)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grover_d3_matches_explicit_form() {
        let g = grover_coin(3).unwrap();
        let third = 1.0 / 3.0;
        let expected = ComplexMatrix::from_real_rows(&[
            [-third, 2.0 * third, 2.0 * third],
            [2.0 * third, -third, 2.0 * third],
            [2.0 * third, 2.0 * third, -third],
        ]);
        assert!(g.max_diff(&expected) < 1e-16);
        assert!((&g * &g).max_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn grover_d1_and_d0() {
        assert_eq!(grover_coin(1).unwrap(), ComplexMatrix::identity(1));
        assert_eq!(grover_coin(0), Err(CoinError::InvalidDimension(0)));
    }

    #[test]
    fn grover_unitary_and_reflective() {
        for d in 2..=4 {
            let g = grover_coin(d).unwrap();
            assert!(g.unitarity_deviation() < 1e-14, "d={d}");
            assert!((&g * &g).max_diff(&ComplexMatrix::identity(d)) < 1e-14, "d={d}");
        }
    }

    #[test]
    fn rotation_coin_special_angles() {
        let h = rotation_coin(FRAC_PI_4);
        let expected = ComplexMatrix::from_real_rows(&[[1.0, 1.0], [1.0, -1.0]]).scale(c(FRAC_1_SQRT_2));
        assert!(h.max_diff(&expected) < 1e-15);
        let z = rotation_coin(FRAC_PI_2);
        assert!(z.max_diff(&ComplexMatrix::real_diagonal(&[1.0, -1.0])) < 1e-15);
    }

    #[test]
    fn inverse_roundtrip_and_singular() {
        let m = ComplexMatrix::from_rows(&[
            [Complex64::new(1.0, 2.0), c(0.5), c(0.0)],
            [c(0.3), Complex64::new(0.0, -1.0), c(2.0)],
            [c(1.0), c(1.0), Complex64::new(0.25, 0.25)],
        ]);
        let x = m.inverse().unwrap();
        assert!((&m * &x).max_diff(&ComplexMatrix::identity(3)) < 1e-14);

        let s = ComplexMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(s.inverse(), Err(CoinError::Singular { .. })));
        assert!(matches!(ComplexMatrix::zeros(3).inverse(), Err(CoinError::Singular { .. })));
    }

    #[test]
    fn inverse_rejects_non_finite() {
        let mut m = ComplexMatrix::identity(2);
        m.set(0, 1, Complex64::new(f64::NAN, 0.0));
        assert_eq!(m.inverse(), Err(CoinError::NonFinite));
    }

    #[test]
    fn dsg_raw_prefactors_sum_to_identity() {
        // the matrices themselves sum to G, i.e. W_M + 2W_A + W_C = I
        let hops = raw_hopping(Family::Dsg, c(1.0), None).unwrap();
        let g = grover_coin(3).unwrap();
        let sum = &(&hops.role(Role::M).clone() + &hops.role(Role::A).scale(c(2.0))) + hops.role(Role::C);
        assert!((&sum * &g).max_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn raw_sets_at_special_z() {
        for fam in [Family::Dsg, Family::Mk3] {
            let h = raw_hopping(fam, c(0.0), None).unwrap();
            assert!(h.roles().all(|(_, m)| m.is_zero()));
        }
        let mk3 = raw_hopping(Family::Mk3, c(1.0), None).unwrap();
        assert!(mk3.role(Role::M).is_zero());
        assert_eq!(mk3.coin_dim, 3);
        assert!(matches!(raw_hopping(Family::Line, c(1.0), None), Err(CoinError::MissingEta(_))));
    }

    #[test]
    fn dsg_parametrized_form_at_k0_is_raw() {
        let z = Complex64::new(0.4, -0.3);
        let raw = raw_hopping(Family::Dsg, z, None).unwrap();
        let par = dsg_hopping(z, z, z, 0).unwrap();
        for role in [Role::M, Role::A, Role::C] {
            assert!(raw.role(role).max_diff(par.role(role)) < 1e-15);
        }
    }

    #[test]
    fn line_raw_total_is_unitary_at_z1() {
        let h = raw_hopping(Family::Line, c(1.0), Some(0.7)).unwrap();
        assert!(h.total().unitarity_deviation() < 1e-15);
    }
}
