//! Algebraic curvature operators and the quadratic reaction term `Q(R) = R² + R#`.
//!
//! A [`CurvatureOperator`] is stored as its N×N matrix in the bivector basis of
//! [`Lambda2Basis`], with `R_{ijkl} = ⟨R(e_i∧e_j), e_k∧e_l⟩`. With this
//! convention `R_{ijij}` is the sectional curvature of `span(e_i, e_j)`, the
//! identity operator is the round sphere and `ric(Id) = (n−1)·id`.
//!
//! The sharp product is built from the structure constants of so(n):
//!
//! ```text
//! (R#S)_{αβ} = ½ Σ c[γ][ε][α] c[δ][ζ][β] R_{γδ} S_{εζ}
//! ```
//!
//! which gives `Id#Id = (n−2)Id`, `Q(Id) = (n−1)Id` and
//! `½(L·Id + Id·L) + L#Id = ric(L)∧id` for every `L` satisfying Bianchi.
//! Neither `R²` nor `R#R` satisfies Bianchi on its own; only their sum does,
//! so [`sharp`] returns a plain symmetric matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambda2::Lambda2Basis;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const BIANCHI_TOL: f64 = 1e-10;
pub const MIN_CURVATURE_DIM: usize = 4;

/// A symmetric endomorphism of ℝⁿ (Ricci tensors, the `A` of `A∧id`, `id`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEndomorphism {
    mat: DMatrix<f64>,
}

impl SymmetricEndomorphism {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                actual: mat.ncols(),
            });
        }
        let asym = max_asymmetry(&mat);
        if asym > SYMMETRY_TOL * (1.0 + mat.amax()) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { mat: symmetrize(mat) })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: DMatrix::zeros(n, n),
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            mat: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
        }
    }

    /// `(G + Gᵀ)/2` with standard normal `G`.
    pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self { mat: symmetrize(g) }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.mat.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { mat: &self.mat * s }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        check_same(self.n(), other.n())?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    /// `self + t·id`.
    pub fn shifted(&self, t: f64) -> Self {
        let mut mat = self.mat.clone();
        for i in 0..mat.nrows() {
            mat[(i, i)] += t;
        }
        Self { mat }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(&self.mat)
    }

    pub fn k_smallest_eigen_sum(&self, k: usize) -> Result<f64> {
        k_smallest_eigen_sum(&self.mat, k)
    }

    /// `gᵀ A g` for an orthogonal `g` (the O(n) action).
    pub fn conjugated(&self, g: &DMatrix<f64>) -> Self {
        Self {
            mat: symmetrize(g.transpose() * &self.mat * g),
        }
    }
}

/// An algebraic curvature operator: a symmetric endomorphism of Λ²ℝⁿ
/// satisfying the first Bianchi identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureOperator {
    basis: Lambda2Basis,
    mat: DMatrix<f64>,
}

impl CurvatureOperator {
    /// Builds an operator from a symmetric N×N matrix, projecting onto the
    /// Bianchi subspace.
    pub fn from_matrix(basis: Lambda2Basis, mat: DMatrix<f64>) -> Result<Self> {
        check_curvature_dim(basis)?;
        check_square(&mat, basis.dim())?;
        let asym = max_asymmetry(&mat);
        if asym > SYMMETRY_TOL * (1.0 + mat.amax()) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self {
            basis,
            mat: project_bianchi_matrix(basis, &symmetrize(mat)),
        })
    }

    /// Strict constructor: rejects matrices that are not already Bianchi.
    pub fn from_matrix_strict(basis: Lambda2Basis, mat: DMatrix<f64>) -> Result<Self> {
        check_curvature_dim(basis)?;
        check_square(&mat, basis.dim())?;
        let asym = max_asymmetry(&mat);
        if asym > SYMMETRY_TOL * (1.0 + mat.amax()) {
            return Err(Error::NotSymmetric(asym));
        }
        let op = Self { basis, mat };
        let defect = op.bianchi_defect();
        if defect > BIANCHI_TOL * (1.0 + op.mat.amax()) {
            return Err(Error::BianchiViolation(defect));
        }
        Ok(op)
    }

    pub(crate) fn from_parts_unchecked(basis: Lambda2Basis, mat: DMatrix<f64>) -> Self {
        Self { basis, mat }
    }

    pub fn zero(n: usize) -> Result<Self> {
        let basis = Lambda2Basis::new(n)?;
        check_curvature_dim(basis)?;
        Ok(Self {
            basis,
            mat: DMatrix::zeros(basis.dim(), basis.dim()),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let basis = Lambda2Basis::new(n)?;
        check_curvature_dim(basis)?;
        Ok(Self {
            basis,
            mat: DMatrix::identity(basis.dim(), basis.dim()),
        })
    }

    /// Gaussian symmetric matrix on Λ², Bianchi-projected.
    pub fn random_gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let basis = Lambda2Basis::new(n)?;
        let nn = basis.dim();
        let g = DMatrix::from_fn(nn, nn, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::from_matrix(basis, symmetrize(g))
    }

    pub fn basis(&self) -> Lambda2Basis {
        self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// `R_{ijkl}` for arbitrary indices (antisymmetric extension).
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match (self.basis.signed_index(i, j), self.basis.signed_index(k, l)) {
            (Some((a, s)), Some((b, t))) => s * t * self.mat[(a, b)],
            _ => 0.0,
        }
    }

    /// Full 4-tensor `R_{ijkl}`, flattened as `((i·n + j)·n + k)·n + l`.
    pub fn to_tensor(&self) -> Vec<f64> {
        tensor_from_matrix(self.basis, &self.mat)
    }

    /// Largest `|R_{ijkl} + R_{jkil} + R_{kijl}|`.
    pub fn bianchi_defect(&self) -> f64 {
        let n = self.n();
        let t = self.to_tensor();
        let at = |i: usize, j: usize, k: usize, l: usize| t[((i * n + j) * n + k) * n + l];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((at(i, j, k, l) + at(j, k, i, l) + at(k, i, j, l)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn frobenius(&self) -> f64 {
        self.mat.norm()
    }

    /// Trace inner product of the Λ² matrices.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_basis(other)?;
        Ok(self.mat.dot(&other.mat))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis,
            mat: &self.mat * s,
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        Ok(Self {
            basis: self.basis,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.check_basis(other)?;
        Ok(Self {
            basis: self.basis,
            mat: &self.mat - &other.mat,
        })
    }

    /// `self + t·Id`.
    pub fn shifted(&self, t: f64) -> Self {
        let mut mat = self.mat.clone();
        for a in 0..mat.nrows() {
            mat[(a, a)] += t;
        }
        Self {
            basis: self.basis,
            mat,
        }
    }

    /// Eigenvalues of the Λ² matrix in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(&self.mat)
    }

    pub fn k_smallest_eigen_sum(&self, k: usize) -> Result<f64> {
        k_smallest_eigen_sum(&self.mat, k)
    }

    /// The O(n) action `(g·R)(x∧y, z∧w) = R(gx∧gy, gz∧gw)` for orthogonal `g`.
    pub fn conjugated(&self, g: &DMatrix<f64>) -> Result<Self> {
        let n = self.n();
        check_square(g, n)?;
        let nn = self.basis.dim();
        let mut induced = DMatrix::zeros(nn, nn);
        let mut w = vec![0.0; nn];
        for (b, (i, j)) in self.basis.pairs().enumerate() {
            let gi: Vec<f64> = g.column(i).iter().copied().collect();
            let gj: Vec<f64> = g.column(j).iter().copied().collect();
            self.basis.wedge_into(&gi, &gj, &mut w);
            for a in 0..nn {
                induced[(a, b)] = w[a];
            }
        }
        Ok(Self {
            basis: self.basis,
            mat: symmetrize(induced.transpose() * &self.mat * induced),
        })
    }

    fn check_basis(&self, other: &Self) -> Result<()> {
        check_same(self.n(), other.n())
    }
}

fn check_curvature_dim(basis: Lambda2Basis) -> Result<()> {
    if basis.n() < MIN_CURVATURE_DIM {
        return Err(Error::UnsupportedDimension(basis.n()));
    }
    Ok(())
}

fn check_same(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn check_square(mat: &DMatrix<f64>, dim: usize) -> Result<()> {
    check_same(dim, mat.nrows())?;
    check_same(dim, mat.ncols())
}

pub(crate) fn max_asymmetry(mat: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..mat.nrows() {
        for j in 0..i {
            worst = worst.max((mat[(i, j)] - mat[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrize(mat: DMatrix<f64>) -> DMatrix<f64> {
    (&mat + mat.transpose()) * 0.5
}

fn sorted_eigenvalues(mat: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(mat.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Sum of the `k` algebraically smallest eigenvalues of a symmetric matrix.
pub fn k_smallest_eigen_sum(mat: &DMatrix<f64>, k: usize) -> Result<f64> {
    let dim = mat.nrows();
    if k == 0 || k > dim {
        return Err(Error::KOutOfRange { k, dim });
    }
    Ok(sorted_eigenvalues(mat).iter().take(k).sum())
}

fn tensor_from_matrix(basis: Lambda2Basis, mat: &DMatrix<f64>) -> Vec<f64> {
    let n = basis.n();
    let mut t = vec![0.0; n * n * n * n];
    for (a, (i, j)) in basis.pairs().enumerate() {
        for (b, (k, l)) in basis.pairs().enumerate() {
            let v = mat[(a, b)];
            t[((i * n + j) * n + k) * n + l] = v;
            t[((j * n + i) * n + k) * n + l] = -v;
            t[((i * n + j) * n + l) * n + k] = -v;
            t[((j * n + i) * n + l) * n + k] = v;
        }
    }
    t
}

fn project_bianchi_matrix(basis: Lambda2Basis, mat: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.n();
    let t = tensor_from_matrix(basis, mat);
    let at = |i: usize, j: usize, k: usize, l: usize| t[((i * n + j) * n + k) * n + l];
    let nn = basis.dim();
    let mut out = DMatrix::zeros(nn, nn);
    for (a, (i, j)) in basis.pairs().enumerate() {
        for (b, (k, l)) in basis.pairs().enumerate() {
            // Remove the totally antisymmetric (Λ⁴) part.
            let alt = (at(i, j, k, l) + at(j, k, i, l) + at(k, i, j, l)) / 3.0;
            out[(a, b)] = at(i, j, k, l) - alt;
        }
    }
    symmetrize(out)
}

/// Orthogonal projection of a symmetric N×N matrix onto the Bianchi subspace.
pub fn bianchi_project(mat: &DMatrix<f64>) -> Result<CurvatureOperator> {
    let n = ambient_dim_for(mat.nrows())?;
    CurvatureOperator::from_matrix(Lambda2Basis::new(n)?, mat.clone())
}

/// Recovers `n` from `N = n(n−1)/2`.
pub fn ambient_dim_for(fiber_dim: usize) -> Result<usize> {
    (2..=crate::lambda2::MAX_DIM)
        .find(|n| n * (n - 1) / 2 == fiber_dim)
        .ok_or(Error::UnsupportedDimension(fiber_dim))
}

/// `ric(R)_{ik} = Σ_j R_{ijkj}`.
pub fn ricci(r: &CurvatureOperator) -> SymmetricEndomorphism {
    let n = r.n();
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let s: f64 = (0..n).map(|j| r.entry(i, j, k, j)).sum();
            mat[(i, k)] = s;
            mat[(k, i)] = s;
        }
    }
    SymmetricEndomorphism { mat }
}

pub fn scalar(r: &CurvatureOperator) -> f64 {
    ricci(r).trace()
}

/// `(A∧B)(x∧y) = ½(Ax∧By + Bx∧Ay)`.
pub fn wedge(a: &SymmetricEndomorphism, b: &SymmetricEndomorphism) -> Result<CurvatureOperator> {
    check_same(a.n(), b.n())?;
    let basis = Lambda2Basis::new(a.n())?;
    check_curvature_dim(basis)?;
    let (am, bm) = (&a.mat, &b.mat);
    let nn = basis.dim();
    let mut mat = DMatrix::zeros(nn, nn);
    for (p, (i, j)) in basis.pairs().enumerate() {
        for (q, (k, l)) in basis.pairs().enumerate() {
            mat[(p, q)] = 0.5
                * (am[(k, i)] * bm[(l, j)] - am[(l, i)] * bm[(k, j)] + bm[(k, i)] * am[(l, j)]
                    - bm[(l, i)] * am[(k, j)]);
        }
    }
    Ok(CurvatureOperator::from_parts_unchecked(basis, symmetrize(mat)))
}

/// The symmetric bilinear sharp product `R#S` as a symmetric N×N matrix.
pub fn sharp(r: &CurvatureOperator, s: &CurvatureOperator) -> Result<DMatrix<f64>> {
    r.check_basis(s)?;
    Ok(sharp_matrices(r.basis(), r.matrix(), s.matrix()))
}

pub(crate) fn sharp_matrices(basis: Lambda2Basis, r: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let sc = basis.structure_constants();
    let nn = basis.dim();
    let mut out = DMatrix::zeros(nn, nn);
    for a in 0..nn {
        let ta = sc.terms_for(a);
        for b in a..nn {
            let tb = sc.terms_for(b);
            let mut acc = 0.0;
            for &(g, e, c1) in ta {
                for &(d, z, c2) in tb {
                    acc += c1 * c2 * r[(g, d)] * s[(e, z)];
                }
            }
            out[(a, b)] = 0.5 * acc;
            out[(b, a)] = 0.5 * acc;
        }
    }
    out
}

/// Polarized reaction term `Q(R, S) = ½(RS + SR) + R#S`.
pub fn q_bilinear(r: &CurvatureOperator, s: &CurvatureOperator) -> Result<CurvatureOperator> {
    r.check_basis(s)?;
    let (rm, sm) = (r.matrix(), s.matrix());
    let mut m = (rm * sm + sm * rm) * 0.5;
    m += sharp_matrices(r.basis(), rm, sm);
    // Bianchi holds exactly in theory; the projection only removes rounding.
    Ok(CurvatureOperator::from_parts_unchecked(
        r.basis(),
        project_bianchi_matrix(r.basis(), &m),
    ))
}

/// `Q(R) = R² + R#R`.
pub fn q_map(r: &CurvatureOperator) -> CurvatureOperator {
    let rm = r.matrix();
    let mut m = rm * rm;
    m += sharp_matrices(r.basis(), rm, rm);
    CurvatureOperator::from_parts_unchecked(r.basis(), project_bianchi_matrix(r.basis(), &m))
}

/// JSON form `{ "n": int, "entries": [...] }` with the lower triangle listed
/// row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricJson {
    pub n: usize,
    pub entries: Vec<f64>,
}

fn lower_triangle(mat: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(mat.nrows() * (mat.nrows() + 1) / 2);
    for i in 0..mat.nrows() {
        for j in 0..=i {
            out.push(mat[(i, j)]);
        }
    }
    out
}

fn from_lower_triangle(dim: usize, entries: &[f64]) -> Result<DMatrix<f64>> {
    if entries.len() != dim * (dim + 1) / 2 {
        return Err(Error::Format(format!(
            "expected {} lower-triangle entries for dimension {dim}, got {}",
            dim * (dim + 1) / 2,
            entries.len()
        )));
    }
    let mut mat = DMatrix::zeros(dim, dim);
    let mut it = entries.iter();
    for i in 0..dim {
        for j in 0..=i {
            let v = *it.next().expect("length checked");
            mat[(i, j)] = v;
            mat[(j, i)] = v;
        }
    }
    Ok(mat)
}

impl SymmetricEndomorphism {
    pub fn to_json_value(&self) -> SymmetricJson {
        SymmetricJson {
            n: self.n(),
            entries: lower_triangle(&self.mat),
        }
    }

    pub fn from_json_value(v: &SymmetricJson) -> Result<Self> {
        Ok(Self {
            mat: from_lower_triangle(v.n, &v.entries)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(s)?)
    }
}

impl CurvatureOperator {
    pub fn to_json_value(&self) -> SymmetricJson {
        SymmetricJson {
            n: self.n(),
            entries: lower_triangle(&self.mat),
        }
    }

    /// Parses without re-projecting, so values round-trip bit for bit; input
    /// violating Bianchi is rejected.
    pub fn from_json_value(v: &SymmetricJson) -> Result<Self> {
        let basis = Lambda2Basis::new(v.n)?;
        let mat = from_lower_triangle(basis.dim(), &v.entries)?;
        Self::from_matrix_strict(basis, mat)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    /// Brute-force contraction straight from the 4-tensor; independent of
    /// `ricci`'s index bookkeeping.
    fn ricci_oracle(r: &CurvatureOperator) -> DMatrix<f64> {
        let n = r.n();
        let t = r.to_tensor();
        DMatrix::from_fn(n, n, |i, k| (0..n).map(|j| t[((i * n + j) * n + k) * n + j]).sum())
    }

    #[test]
    fn identity_is_bianchi_fixed_point() {
        let id = CurvatureOperator::identity(5).unwrap();
        let p = bianchi_project(id.matrix()).unwrap();
        assert_eq!(p.matrix(), id.matrix());
    }

    #[test]
    fn bianchi_projection_of_pure_cross_term() {
        // S(e1∧e2, e3∧e4) = 1: alternation is (1 + 0 + 0)/3, leaving 2/3.
        let b = Lambda2Basis::new(4).unwrap();
        let mut s = DMatrix::zeros(6, 6);
        let (a12, a34) = (b.index(0, 1), b.index(2, 3));
        s[(a12, a34)] = 1.0;
        s[(a34, a12)] = 1.0;
        let r = bianchi_project(&s).unwrap();
        assert!((r.entry(0, 1, 2, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.bianchi_defect() < 1e-15);
    }

    #[test]
    fn bianchi_projection_is_idempotent_and_self_adjoint() {
        let mut g = rng(1);
        for n in 4..=8 {
            let b = Lambda2Basis::new(n).unwrap();
            let nn = b.dim();
            let draw = |g: &mut ChaCha8Rng| {
                symmetrize(DMatrix::from_fn(nn, nn, |_, _| g.sample::<f64, _>(StandardNormal)))
            };
            let (x, y) = (draw(&mut g), draw(&mut g));
            let px = bianchi_project(&x).unwrap();
            let py = bianchi_project(&y).unwrap();
            assert!(px.bianchi_defect() < 1e-12);
            let ppx = bianchi_project(px.matrix()).unwrap();
            assert!(max_abs_diff(ppx.matrix(), px.matrix()) < 1e-12);
            let lhs = px.matrix().dot(&y);
            let rhs = x.dot(py.matrix());
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn strict_constructor_rejects_non_bianchi() {
        let b = Lambda2Basis::new(4).unwrap();
        let mut s = DMatrix::zeros(6, 6);
        s[(0, 5)] = 1.0;
        s[(5, 0)] = 1.0;
        assert!(matches!(
            CurvatureOperator::from_matrix_strict(b, s.clone()),
            Err(Error::BianchiViolation(_))
        ));
        s[(0, 5)] = 2.0;
        assert!(matches!(
            CurvatureOperator::from_matrix(b, s),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn ricci_and_scalar_of_identity() {
        for n in 4..=8 {
            let id = CurvatureOperator::identity(n).unwrap();
            let ric = ricci(&id);
            let expected = DMatrix::identity(n, n) * (n as f64 - 1.0);
            assert!(max_abs_diff(ric.matrix(), &expected) < 1e-15);
            assert_eq!(scalar(&id), (n * (n - 1)) as f64);
        }
        let z = CurvatureOperator::zero(4).unwrap();
        assert_eq!(ricci(&z).matrix().amax(), 0.0);
        assert_eq!(scalar(&z), 0.0);
    }

    #[test]
    fn ricci_matches_tensor_contraction() {
        let mut g = rng(2);
        for n in 4..=7 {
            let r = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            assert!(max_abs_diff(ricci(&r).matrix(), &ricci_oracle(&r)) < 1e-13);
        }
    }

    #[test]
    fn ricci_of_wedge_with_identity() {
        let mut g = rng(3);
        for n in 4..=6 {
            let a = SymmetricEndomorphism::random_gaussian(n, &mut g);
            let r = wedge(&a, &SymmetricEndomorphism::identity(n)).unwrap();
            let expected =
                (a.matrix() * (n as f64 - 2.0) + DMatrix::identity(n, n) * a.trace()) * 0.5;
            assert!(max_abs_diff(&ricci_oracle(&r), &expected) < 1e-13);
            assert!(max_abs_diff(ricci(&r).matrix(), &expected) < 1e-13);
            let s = scalar(&r);
            assert!((s - (n as f64 - 1.0) * a.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn wedge_identities() {
        let id = SymmetricEndomorphism::identity(5);
        let w = wedge(&id, &id).unwrap();
        assert_eq!(w.matrix(), CurvatureOperator::identity(5).unwrap().matrix());

        let a = SymmetricEndomorphism::diagonal(&[1.0, 2.0, 5.0, -7.0]);
        let r = wedge(&a, &SymmetricEndomorphism::identity(4)).unwrap();
        assert_eq!(r.entry(0, 1, 0, 1), 1.5);
        assert_eq!(r.entry(0, 1, 2, 3), 0.0);
        let mut expected = vec![];
        for i in 0..4 {
            for j in i + 1..4 {
                expected.push(0.5 * (a.matrix()[(i, i)] + a.matrix()[(j, j)]));
            }
        }
        expected.sort_by(f64::total_cmp);
        let ev = r.eigenvalues();
        for (x, y) in ev.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn wedge_is_symmetric_bilinear_and_bianchi() {
        let mut g = rng(4);
        let n = 6;
        let a = SymmetricEndomorphism::random_gaussian(n, &mut g);
        let b = SymmetricEndomorphism::random_gaussian(n, &mut g);
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        assert!(max_abs_diff(ab.matrix(), ba.matrix()) < 1e-15);
        assert!(ab.bianchi_defect() < 1e-13);
        let a2 = wedge(&a.scaled(2.0).plus(&b).unwrap(), &b).unwrap();
        let lin = ab.scaled(2.0).plus(&wedge(&b, &b).unwrap()).unwrap();
        assert!(max_abs_diff(a2.matrix(), lin.matrix()) < 1e-13);
        assert!(wedge(&a, &SymmetricEndomorphism::identity(5)).is_err());
    }

    #[test]
    fn sharp_normalization() {
        for n in 4..=8 {
            let id = CurvatureOperator::identity(n).unwrap();
            let s = sharp(&id, &id).unwrap();
            let nn = id.basis().dim();
            assert!(max_abs_diff(&s, &(DMatrix::identity(nn, nn) * (n as f64 - 2.0))) < 1e-14);
            let z = CurvatureOperator::zero(n).unwrap();
            assert_eq!(sharp(&z, &id).unwrap().amax(), 0.0);
        }
    }

    /// Dense structure-constant contraction; the production path uses the
    /// sparse term lists.
    fn sharp_oracle(r: &CurvatureOperator, s: &CurvatureOperator) -> DMatrix<f64> {
        let sc = r.basis().structure_constants();
        let nn = r.basis().dim();
        DMatrix::from_fn(nn, nn, |a, b| {
            let mut acc = 0.0;
            for g in 0..nn {
                for e in 0..nn {
                    let c1 = sc.get(g, e, a);
                    if c1 == 0.0 {
                        continue;
                    }
                    for d in 0..nn {
                        for z in 0..nn {
                            acc += c1 * sc.get(d, z, b) * 0.5 * (r.matrix()[(g, d)] * s.matrix()[(e, z)]
                                + s.matrix()[(g, d)] * r.matrix()[(e, z)]);
                        }
                    }
                }
            }
            0.5 * acc
        })
    }

    #[test]
    fn sharp_matches_dense_oracle() {
        let mut g = rng(5);
        for n in 4..=5 {
            let r = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            let s = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            assert!(max_abs_diff(&sharp(&r, &s).unwrap(), &sharp_oracle(&r, &s)) < 1e-12);
        }
    }

    #[test]
    fn sharp_with_identity() {
        let mut g = rng(6);
        for n in 4..=8 {
            let l = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            let id = CurvatureOperator::identity(n).unwrap();
            let lhs = sharp(&l, &id).unwrap();
            let ric_wedge = wedge(&ricci(&l), &SymmetricEndomorphism::identity(n)).unwrap();
            let rhs = ric_wedge.minus(&l).unwrap();
            assert!(max_abs_diff(&lhs, rhs.matrix()) < 1e-12);
        }
    }

    #[test]
    fn q_map_anchors() {
        for n in 4..=8 {
            let id = CurvatureOperator::identity(n).unwrap();
            let q = q_map(&id);
            assert!(max_abs_diff(q.matrix(), id.scaled(n as f64 - 1.0).matrix()) < 1e-13);
            assert_eq!(q_map(&CurvatureOperator::zero(n).unwrap()).matrix().amax(), 0.0);
        }
    }

    #[test]
    fn q_map_is_quadratic_and_bianchi() {
        let mut g = rng(7);
        for n in 4..=7 {
            let r = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            let q = q_map(&r);
            let raw = r.matrix() * r.matrix() + sharp(&r, &r).unwrap();
            // The projection only cleans rounding: R² + R# is already Bianchi.
            assert!(max_abs_diff(q.matrix(), &raw) < 1e-12);
            let q3 = q_map(&r.scaled(3.0));
            assert!(max_abs_diff(q3.matrix(), q.scaled(9.0).matrix()) < 1e-11);
        }
    }

    #[test]
    fn polarized_q_with_identity_is_ricci_wedge() {
        let mut g = rng(8);
        for n in 4..=8 {
            let id = CurvatureOperator::identity(n).unwrap();
            for _ in 0..20 {
                let l = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
                let q = q_bilinear(&l, &id).unwrap();
                let rw = wedge(&ricci(&l), &SymmetricEndomorphism::identity(n)).unwrap();
                assert!(max_abs_diff(q.matrix(), rw.matrix()) < 1e-10 * (1.0 + rw.frobenius()));
            }
        }
    }

    #[test]
    fn wedge_ricci_adjointness_constant() {
        // ⟨A∧id, R⟩ = ½⟨A, ric(R)⟩ with trace inner products on both sides.
        let mut g = rng(9);
        for n in 4..=7 {
            let a = SymmetricEndomorphism::random_gaussian(n, &mut g);
            let r = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
            let lhs = wedge(&a, &SymmetricEndomorphism::identity(n)).unwrap().inner(&r).unwrap();
            let rhs = 0.5 * a.matrix().dot(ricci(&r).matrix());
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    /// Counts eigenvalues below `x` through the inertia of `A − x·I`
    /// (Sylvester), using symmetric Gaussian elimination.
    fn count_below(a: &DMatrix<f64>, x: f64) -> usize {
        let n = a.nrows();
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] -= x;
        }
        let mut neg = 0;
        for k in 0..n {
            let mut p = m[(k, k)];
            if p == 0.0 {
                p = 1e-300;
            }
            if p < 0.0 {
                neg += 1;
            }
            for i in k + 1..n {
                let f = m[(i, k)] / p;
                for j in k + 1..n {
                    m[(i, j)] -= f * m[(k, j)];
                }
            }
        }
        neg
    }

    fn min_eigen_bisection(a: &DMatrix<f64>) -> f64 {
        let bound = a.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn k_smallest_sums() {
        let a = SymmetricEndomorphism::diagonal(&[-3.0, 1.0, 1.0, 1.0]);
        assert!(a.k_smallest_eigen_sum(4).unwrap().abs() < 1e-14);
        let id = SymmetricEndomorphism::identity(5);
        assert!((id.k_smallest_eigen_sum(2).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(id.k_smallest_eigen_sum(0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(id.k_smallest_eigen_sum(6), Err(Error::KOutOfRange { .. })));
        let mut g = rng(10);
        for n in 4..=8 {
            let a = SymmetricEndomorphism::random_gaussian(n, &mut g);
            let bis = min_eigen_bisection(a.matrix());
            assert!((a.k_smallest_eigen_sum(1).unwrap() - bis).abs() < 1e-10);
        }
    }

    #[test]
    fn o_n_action_preserves_spectrum_and_ricci() {
        let mut g = rng(11);
        let n = 5;
        let r = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
        let q = random_orthogonal(n, &mut g);
        let rr = r.conjugated(&q).unwrap();
        assert!(rr.bianchi_defect() < 1e-12);
        for (a, b) in r.eigenvalues().iter().zip(rr.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
        let ric_rot = ricci(&r).conjugated(&q);
        assert!(max_abs_diff(ricci(&rr).matrix(), ric_rot.matrix()) < 1e-12);
    }

    fn random_orthogonal(n: usize, g: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| g.sample::<f64, _>(StandardNormal));
        m.qr().q()
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut g = rng(12);
        let r = CurvatureOperator::random_gaussian(6, &mut g).unwrap();
        let back = CurvatureOperator::from_json(&r.to_json()).unwrap();
        assert_eq!(back.matrix(), r.matrix());
        let a = SymmetricEndomorphism::random_gaussian(6, &mut g);
        let back = SymmetricEndomorphism::from_json(&a.to_json()).unwrap();
        assert_eq!(back.matrix(), a.matrix());
        assert!(CurvatureOperator::from_json(r#"{"n":4,"entries":[1.0]}"#).is_err());
    }
}
