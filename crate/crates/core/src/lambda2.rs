//! Coordinates on the space of bivectors Λ²ℝⁿ.
//!
//! Bivectors are stored in the basis `{e_i ∧ e_j : i < j}` ordered
//! lexicographically. The inner product makes that basis orthonormal, i.e.
//! `⟨x∧y, z∧w⟩ = ⟨x,z⟩⟨y,w⟩ − ⟨x,w⟩⟨y,z⟩`, so `x ∧ y` has coordinates
//! `x_i y_j − x_j y_i`. Under the identification `Λ²ℝⁿ ≅ so(n)` the basis
//! bivector `e_i ∧ e_j` is the antisymmetric matrix `e_i e_jᵀ − e_j e_iᵀ`.
//!
//! All indices are zero-based in code; reports and CSV headers use one-based
//! labels.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Index bookkeeping for Λ²ℝⁿ. Cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lambda2Basis {
    n: usize,
}

impl Lambda2Basis {
    pub fn new(n: usize) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Fiber dimension `n(n−1)/2`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Index of `e_i ∧ e_j` for `i < j`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Index and orientation sign of `e_i ∧ e_j` for arbitrary `i != j`.
    #[inline]
    pub fn signed_index(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => Some((self.index(i, j), 1.0)),
            Greater => Some((self.index(j, i), -1.0)),
            Equal => None,
        }
    }

    /// Inverse of [`Self::index`].
    pub fn pair(&self, alpha: usize) -> (usize, usize) {
        debug_assert!(alpha < self.dim());
        let mut rest = alpha;
        for i in 0..self.n {
            let row = self.n - i - 1;
            if rest < row {
                return (i, i + 1 + rest);
            }
            rest -= row;
        }
        unreachable!("bivector index {alpha} out of range")
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    /// One-based label `"i,j"` used in CSV headers.
    pub fn label(&self, alpha: usize) -> String {
        let (i, j) = self.pair(alpha);
        format!("{},{}", i + 1, j + 1)
    }

    /// Coordinates of `x ∧ y`.
    pub fn wedge_vectors(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let mut out = vec![0.0; self.dim()];
        self.wedge_into(x, y, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`Self::wedge_vectors`] for hot loops.
    #[inline]
    pub fn wedge_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut a = 0;
        for i in 0..n {
            for j in i + 1..n {
                out[a] = x[i] * y[j] - x[j] * y[i];
                a += 1;
            }
        }
    }

    /// The antisymmetric n×n matrix of a bivector, row-major.
    pub fn to_antisymmetric(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for (a, (i, j)) in self.pairs().enumerate() {
            m[i * n + j] = w[a];
            m[j * n + i] = -w[a];
        }
        m
    }

    /// Bivector coordinates of an antisymmetric matrix (upper triangle).
    pub fn from_antisymmetric(&self, m: &[f64]) -> Vec<f64> {
        let n = self.n;
        self.pairs().map(|(i, j)| m[i * n + j]).collect()
    }

    pub fn structure_constants(&self) -> Arc<StructureConstants> {
        static CACHE: [OnceLock<Arc<StructureConstants>>; MAX_DIM + 1] =
            [const { OnceLock::new() }; MAX_DIM + 1];
        CACHE[self.n]
            .get_or_init(|| Arc::new(StructureConstants::compute(*self)))
            .clone()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: len,
            });
        }
        Ok(())
    }
}

/// Structure constants `c[α][β][γ] = ⟨[ω_α, ω_β], ω_γ⟩` of so(n) in the
/// bivector basis. Entries are exact small integers.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    basis: Lambda2Basis,
    dense: Vec<f64>,
    /// For each output index γ, the nonzero `(α, β, c[α][β][γ])`.
    by_output: Vec<Vec<(usize, usize, f64)>>,
}

impl StructureConstants {
    fn compute(basis: Lambda2Basis) -> Self {
        let n = basis.n();
        let nn = basis.dim();
        let mut dense = vec![0.0; nn * nn * nn];
        let mut by_output = vec![Vec::new(); nn];
        // ω_a = e_i e_jᵀ − e_j e_iᵀ; product entries only touch shared indices,
        // but the dense commutator keeps this obviously correct.
        let omega = |a: usize| {
            let (i, j) = basis.pair(a);
            let mut m = vec![0.0; n * n];
            m[i * n + j] = 1.0;
            m[j * n + i] = -1.0;
            m
        };
        let mats: Vec<Vec<f64>> = (0..nn).map(omega).collect();
        let mut comm = vec![0.0; n * n];
        for a in 0..nn {
            for b in 0..nn {
                for r in 0..n {
                    for c in 0..n {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += mats[a][r * n + k] * mats[b][k * n + c]
                                - mats[b][r * n + k] * mats[a][k * n + c];
                        }
                        comm[r * n + c] = s;
                    }
                }
                for (g, (k, l)) in basis.pairs().enumerate() {
                    let v = comm[k * n + l];
                    dense[(a * nn + b) * nn + g] = v;
                    if v != 0.0 {
                        by_output[g].push((a, b, v));
                    }
                }
            }
        }
        Self {
            basis,
            dense,
            by_output,
        }
    }

    pub fn basis(&self) -> Lambda2Basis {
        self.basis
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, g: usize) -> f64 {
        let nn = self.basis.dim();
        self.dense[(a * nn + b) * nn + g]
    }

    /// Nonzero entries `(α, β, c)` contributing to output index γ.
    pub fn terms_for(&self, g: usize) -> &[(usize, usize, f64)] {
        &self.by_output[g]
    }

    /// The Lie bracket `[x, y]` of two bivectors.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.basis.dim())
            .map(|g| {
                self.by_output[g]
                    .iter()
                    .map(|&(a, b, c)| c * x[a] * y[b])
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn index_round_trip() {
        for n in MIN_DIM..=MAX_DIM {
            let b = Lambda2Basis::new(n).unwrap();
            assert_eq!(b.dim(), n * (n - 1) / 2);
            for (a, (i, j)) in b.pairs().enumerate() {
                assert_eq!(b.index(i, j), a);
                assert_eq!(b.pair(a), (i, j));
            }
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(Lambda2Basis::new(1).is_err());
        assert!(Lambda2Basis::new(9).is_err());
    }

    #[test]
    fn wedge_of_basis_vectors() {
        let b = Lambda2Basis::new(4).unwrap();
        let w = b.wedge_vectors(&e(4, 0), &e(4, 1)).unwrap();
        assert_eq!(w, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let z = b.wedge_vectors(&e(4, 0), &e(4, 0)).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wedge_hand_expansion() {
        // (1,1,0,0) ∧ (0,1,1,0): (1,2)=1, (1,3)=1, (2,3)=1.
        let b = Lambda2Basis::new(4).unwrap();
        let w = b
            .wedge_vectors(&[1.0, 1.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 0.0])
            .unwrap();
        let mut expected = vec![0.0; 6];
        expected[b.index(0, 1)] = 1.0;
        expected[b.index(0, 2)] = 1.0;
        expected[b.index(1, 2)] = 1.0;
        assert_eq!(w, expected);
    }

    #[test]
    fn wedge_dimension_mismatch() {
        let b = Lambda2Basis::new(4).unwrap();
        assert!(matches!(
            b.wedge_vectors(&[1.0; 3], &[1.0; 4]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_matrix_is_identity() {
        // ⟨x∧y, z∧w⟩ = ⟨x,z⟩⟨y,w⟩ − ⟨x,w⟩⟨y,z⟩ on basis pairs.
        let n = 5;
        let b = Lambda2Basis::new(n).unwrap();
        for (i, j) in b.pairs() {
            for (k, l) in b.pairs() {
                let u = b.wedge_vectors(&e(n, i), &e(n, j)).unwrap();
                let v = b.wedge_vectors(&e(n, k), &e(n, l)).unwrap();
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                let expected = if (i, j) == (k, l) { 1.0 } else { 0.0 };
                assert_eq!(dot, expected);
            }
        }
    }

    #[test]
    fn structure_constants_n3_commutator() {
        // Oracle: [ω_12, ω_23] with ω_ij = e_i e_jᵀ − e_j e_iᵀ equals ω_13.
        let b = Lambda2Basis::new(3).unwrap();
        let c = b.structure_constants();
        let (a12, a23, a13) = (b.index(0, 1), b.index(1, 2), b.index(0, 2));
        assert_eq!(c.get(a12, a23, a13), 1.0);
        assert_eq!(c.get(a23, a12, a13), -1.0);
    }

    #[test]
    fn structure_constants_vanish_on_diagonal_and_disjoint_pairs() {
        let b = Lambda2Basis::new(4).unwrap();
        let c = b.structure_constants();
        let nn = b.dim();
        for a in 0..nn {
            for g in 0..nn {
                assert_eq!(c.get(a, a, g), 0.0);
            }
        }
        let (a12, a34) = (b.index(0, 1), b.index(2, 3));
        for g in 0..nn {
            assert_eq!(c.get(a12, a34, g), 0.0);
        }
    }

    #[test]
    fn structure_constants_antisymmetric() {
        for n in 4..=MAX_DIM {
            let b = Lambda2Basis::new(n).unwrap();
            let c = b.structure_constants();
            let nn = b.dim();
            for a in 0..nn {
                for bb in 0..nn {
                    for g in 0..nn {
                        assert_eq!(c.get(a, bb, g), -c.get(bb, a, g));
                    }
                }
            }
        }
    }

    #[test]
    fn antisymmetric_matrix_round_trip() {
        let b = Lambda2Basis::new(5).unwrap();
        let w: Vec<f64> = (0..b.dim()).map(|k| k as f64 - 3.5).collect();
        assert_eq!(b.from_antisymmetric(&b.to_antisymmetric(&w)), w);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn bivec(nn: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-1.0f64..1.0, nn)
        }

        proptest! {
            #[test]
            fn jacobi_identity(n in 4usize..=8, seed in any::<u64>()) {
                use rand::{Rng, SeedableRng};
                let b = Lambda2Basis::new(n).unwrap();
                let c = b.structure_constants();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let mut draw = || (0..b.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
                let (x, y, z) = (draw(), draw(), draw());
                let t1 = c.bracket(&x, &c.bracket(&y, &z));
                let t2 = c.bracket(&y, &c.bracket(&z, &x));
                let t3 = c.bracket(&z, &c.bracket(&x, &y));
                for k in 0..b.dim() {
                    prop_assert!((t1[k] + t2[k] + t3[k]).abs() < 1e-12);
                }
            }

            #[test]
            fn bracket_matches_matrix_commutator(x in bivec(10), y in bivec(10)) {
                let b = Lambda2Basis::new(5).unwrap();
                let c = b.structure_constants();
                let (mx, my) = (b.to_antisymmetric(&x), b.to_antisymmetric(&y));
                let n = 5;
                let mut comm = vec![0.0; n * n];
                for r in 0..n { for s in 0..n { for k in 0..n {
                    comm[r * n + s] += mx[r * n + k] * my[k * n + s] - my[r * n + k] * mx[k * n + s];
                }}}
                let expected = b.from_antisymmetric(&comm);
                let got = c.bracket(&x, &y);
                for k in 0..b.dim() {
                    prop_assert!((expected[k] - got[k]).abs() < 1e-12);
                }
            }
        }
    }
}
