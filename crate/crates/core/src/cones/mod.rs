//! Membership and margins for the curvature cones used throughout the crate.
//!
//! | cone | margin |
//! |------|--------|
//! | `NonnegOperator` | smallest eigenvalue of R on Λ² |
//! | `TwoNonnegOperator` | sum of the two smallest eigenvalues |
//! | `Nnic` | min over orthonormal 4-frames of the isotropic curvature |
//! | `Nnic1` | min of `R₁₃₁₃ + λ²R₁₄₁₄ + R₂₃₂₃ + λ²R₂₄₂₄ − 2λR₁₂₃₄`, λ ∈ [0,1] |
//! | `Nnic2` | min of `R₁₃₁₃ + λ²R₁₄₁₄ + μ²R₂₃₂₃ + λ²μ²R₂₄₂₄ − 2λμR₁₂₃₄`, λ,μ ∈ [0,1] |
//!
//! The NNIC1/NNIC2 margins use the weighted-frame characterization of those
//! cones (products with ℝ and ℝ² having nonnegative isotropic curvature).
//! Frame minimization is heuristic, so the NNIC-family margins are attained
//! values and hence upper bounds for the true minimum.

pub mod audit;
pub mod frames;
pub mod sampling;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureOperator;
use crate::error::{Error, Result};

pub use audit::{
    audit_lemma, audit_tangency, check_condition_star, tangency_defect, AuditReport, Lemma, TangencyOptions,
    WitnessRecord, AUDIT_TOL,
};
pub use frames::{FrameSearchOptions, IcTerms, Weighting};
pub use sampling::random_cone_sample;

use frames::FrameObjective;

pub const FRAME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConeId {
    NonnegOperator,
    TwoNonnegOperator,
    #[serde(rename = "NNIC")]
    Nnic,
    #[serde(rename = "NNIC1")]
    Nnic1,
    #[serde(rename = "NNIC2")]
    Nnic2,
}

impl ConeId {
    pub const ALL: [ConeId; 5] = [
        ConeId::NonnegOperator,
        ConeId::TwoNonnegOperator,
        ConeId::Nnic,
        ConeId::Nnic1,
        ConeId::Nnic2,
    ];

    pub fn weighting(self) -> Option<Weighting> {
        match self {
            ConeId::Nnic => Some(Weighting::Plain),
            ConeId::Nnic1 => Some(Weighting::Nnic1),
            ConeId::Nnic2 => Some(Weighting::Nnic2),
            _ => None,
        }
    }

    /// Number of smallest eigenvalues summed, for the eigenvalue cones.
    pub fn eigen_k(self) -> Option<usize> {
        match self {
            ConeId::NonnegOperator => Some(1),
            ConeId::TwoNonnegOperator => Some(2),
            _ => None,
        }
    }

    /// Margin of `Id` when it is the same for every witness; cones whose
    /// margin shifts affinely along Id.
    pub fn identity_slope(self) -> Option<f64> {
        match self {
            ConeId::NonnegOperator => Some(1.0),
            ConeId::TwoNonnegOperator => Some(2.0),
            ConeId::Nnic => Some(4.0),
            ConeId::Nnic1 | ConeId::Nnic2 => None,
        }
    }
}

impl fmt::Display for ConeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConeId::NonnegOperator => "NonnegOperator",
            ConeId::TwoNonnegOperator => "TwoNonnegOperator",
            ConeId::Nnic => "NNIC",
            ConeId::Nnic1 => "NNIC1",
            ConeId::Nnic2 => "NNIC2",
        };
        f.write_str(s)
    }
}

impl FromStr for ConeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "nonnegoperator" | "nonneg" | "pco" => Ok(ConeId::NonnegOperator),
            "twononnegoperator" | "twononneg" | "2nonneg" => Ok(ConeId::TwoNonnegOperator),
            "nnic" | "pic" => Ok(ConeId::Nnic),
            "nnic1" | "pic1" => Ok(ConeId::Nnic1),
            "nnic2" | "pic2" => Ok(ConeId::Nnic2),
            _ => Err(Error::UnsupportedCone(s.to_string())),
        }
    }
}

/// An orthonormal 4-frame `(e₁, e₂, e₃, e₄)` in ℝⁿ, stored as an n×4 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FourFrame {
    cols: DMatrix<f64>,
}

impl FourFrame {
    pub fn new(cols: DMatrix<f64>) -> Result<Self> {
        if cols.ncols() != 4 || cols.nrows() < 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: cols.ncols().min(cols.nrows()),
            });
        }
        let gram = cols.transpose() * &cols;
        let defect = (gram - DMatrix::identity(4, 4)).amax();
        if defect > FRAME_TOL {
            return Err(Error::NonOrthonormalFrame(defect));
        }
        Ok(Self { cols })
    }

    /// Frame made of the coordinate axes `e_{a}, e_{b}, e_{c}, e_{d}`.
    pub fn coordinate(n: usize, axes: [usize; 4]) -> Result<Self> {
        let mut cols = DMatrix::zeros(n, 4);
        for (k, &a) in axes.iter().enumerate() {
            if a >= n {
                return Err(Error::InvalidParameter(format!("axis {a} out of range for n = {n}")));
            }
            cols[(a, k)] = 1.0;
        }
        Self::new(cols)
    }

    pub(crate) fn from_flat(n: usize, flat: &[f64]) -> Self {
        Self {
            cols: DMatrix::from_column_slice(n, 4, flat),
        }
    }

    pub(crate) fn to_flat(&self) -> Vec<f64> {
        self.cols.as_slice().to_vec()
    }

    pub fn n(&self) -> usize {
        self.cols.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.cols.column(k).iter().copied().collect()
    }

    /// Columns as nested vectors, for reports.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..4).map(|k| self.column(k)).collect()
    }

    pub fn swap_columns(&self, a: usize, b: usize) -> Self {
        let mut cols = self.cols.clone();
        cols.swap_columns(a, b);
        Self { cols }
    }

    pub fn negate_column(&self, a: usize) -> Self {
        let mut cols = self.cols.clone();
        cols.column_mut(a).neg_mut();
        Self { cols }
    }
}

/// The five frame entries `R₁₃₁₃, R₁₄₁₄, R₂₃₂₃, R₂₄₂₄, R₁₂₃₄`.
pub fn frame_terms(r: &CurvatureOperator, f: &FourFrame) -> Result<IcTerms> {
    if f.n() != r.n() {
        return Err(Error::DimensionMismatch {
            expected: r.n(),
            actual: f.n(),
        });
    }
    Ok(FrameObjective::new(r, Weighting::Plain).terms(&f.to_flat()))
}

/// `IC₁₂₃₄(R) = R₁₃₁₃ + R₁₄₁₄ + R₂₃₂₃ + R₂₄₂₄ − 2R₁₂₃₄`.
pub fn isotropic_curvature(r: &CurvatureOperator, f: &FourFrame) -> Result<f64> {
    Ok(frame_terms(r, f)?.weighted(1.0, 1.0))
}

/// `R₁₃₁₃ + λ²R₁₄₁₄ + μ²R₂₃₂₃ + λ²μ²R₂₄₂₄ − 2λμR₁₂₃₄`.
pub fn weighted_isotropic_curvature(
    r: &CurvatureOperator,
    f: &FourFrame,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    Ok(frame_terms(r, f)?.weighted(lambda, mu))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Frame {
        frame: FourFrame,
        lambda: f64,
        mu: f64,
    },
    /// Orthonormal eigenvectors on Λ² realizing the eigenvalue margin.
    Eigenvectors(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMargin {
    pub value: f64,
    pub witness: Witness,
    pub converged: bool,
}

impl ConeMargin {
    /// Re-evaluates the witness on `r`.
    pub fn reevaluate(&self, r: &CurvatureOperator) -> Result<f64> {
        match &self.witness {
            Witness::Frame { frame, lambda, mu } => {
                weighted_isotropic_curvature(r, frame, *lambda, *mu)
            }
            Witness::Eigenvectors(vs) => Ok(vs
                .iter()
                .map(|v| {
                    let v = nalgebra::DVector::from_column_slice(v);
                    v.dot(&(r.matrix() * &v))
                })
                .sum()),
        }
    }

    pub fn frame(&self) -> Option<&FourFrame> {
        match &self.witness {
            Witness::Frame { frame, .. } => Some(frame),
            Witness::Eigenvectors(_) => None,
        }
    }
}

/// Full frame search result, including every local minimum reached.
#[derive(Debug, Clone)]
pub struct FrameMinimization {
    pub margin: ConeMargin,
    pub minima: Vec<(FourFrame, f64, f64, f64)>,
}

pub(crate) fn minimize_frames(
    r: &CurvatureOperator,
    mode: Weighting,
    opts: &FrameSearchOptions,
    warm: &[FourFrame],
) -> FrameMinimization {
    let n = r.n();
    let obj = FrameObjective::new(r, mode);
    let warm: Vec<Vec<f64>> = warm.iter().map(FourFrame::to_flat).collect();
    let res = obj.search(opts, &warm);
    let best = res.best;
    FrameMinimization {
        margin: ConeMargin {
            value: best.value,
            witness: Witness::Frame {
                frame: FourFrame::from_flat(n, &best.frame),
                lambda: best.lambda,
                mu: best.mu,
            },
            converged: best.converged,
        },
        minima: res
            .minima
            .into_iter()
            .map(|m| (FourFrame::from_flat(n, &m.frame), m.lambda, m.mu, m.value))
            .collect(),
    }
}

/// Lowest isotropic curvature found over orthonormal 4-frames.
pub fn min_isotropic_curvature(r: &CurvatureOperator, opts: &FrameSearchOptions) -> ConeMargin {
    minimize_frames(r, Weighting::Plain, opts, &[]).margin
}

/// Lowest weighted isotropic curvature for the NNIC1/NNIC2 characterizations.
pub fn min_weighted_ic(
    r: &CurvatureOperator,
    mode: Weighting,
    opts: &FrameSearchOptions,
) -> ConeMargin {
    minimize_frames(r, mode, opts, &[]).margin
}

fn eigen_margin(r: &CurvatureOperator, k: usize) -> ConeMargin {
    let eig = SymmetricEigen::new(r.matrix().clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let value = order[..k].iter().map(|&i| eig.eigenvalues[i]).sum();
    let vecs = order[..k]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    ConeMargin {
        value,
        witness: Witness::Eigenvectors(vecs),
        converged: true,
    }
}

pub fn cone_margin(r: &CurvatureOperator, cone: ConeId, opts: &FrameSearchOptions) -> ConeMargin {
    cone_margin_warm(r, cone, opts, &[])
}

/// As [`cone_margin`], additionally descending from the supplied frames.
pub fn cone_margin_warm(
    r: &CurvatureOperator,
    cone: ConeId,
    opts: &FrameSearchOptions,
    warm: &[FourFrame],
) -> ConeMargin {
    match (cone.eigen_k(), cone.weighting()) {
        (Some(k), _) => eigen_margin(r, k),
        (None, Some(mode)) => minimize_frames(r, mode, opts, warm).margin,
        (None, None) => unreachable!("every cone is either spectral or frame based"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{wedge, SymmetricEndomorphism};
    use crate::rng;
    use rand::Rng;

    fn quick() -> FrameSearchOptions {
        FrameSearchOptions::default().with_restarts(16)
    }

    fn random_frame(n: usize, seed: u64) -> FourFrame {
        let mut g = rng::seeded(seed);
        FourFrame::from_flat(n, &frames::random_frame(n, &mut g))
    }

    #[test]
    fn frame_validation() {
        let mut m = DMatrix::zeros(5, 4);
        for k in 0..4 {
            m[(k, k)] = 1.0;
        }
        assert!(FourFrame::new(m.clone()).is_ok());
        m[(4, 0)] = 0.1;
        assert!(matches!(FourFrame::new(m), Err(Error::NonOrthonormalFrame(_))));
        assert!(FourFrame::coordinate(4, [0, 1, 2, 4]).is_err());
    }

    #[test]
    fn ic_of_identity_is_four() {
        let id = CurvatureOperator::identity(6).unwrap();
        for seed in 0..10 {
            let f = random_frame(6, seed);
            assert!((isotropic_curvature(&id, &f).unwrap() - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn ic_of_wedge_on_coordinate_frame() {
        let a = SymmetricEndomorphism::random_gaussian(5, &mut rng::seeded(1));
        let r = wedge(&a, &SymmetricEndomorphism::identity(5)).unwrap();
        let f = FourFrame::coordinate(5, [0, 1, 2, 3]).unwrap();
        let m = a.matrix();
        let expected = m[(0, 0)] + m[(1, 1)] + m[(2, 2)] + m[(3, 3)];
        assert!((isotropic_curvature(&r, &f).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn ic_frame_symmetries() {
        let mut g = rng::seeded(2);
        for seed in 0..20 {
            let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
            let f = random_frame(5, 100 + seed);
            let v = isotropic_curvature(&r, &f).unwrap();
            let swapped = f.swap_columns(2, 3).negate_column(3);
            let both = f.swap_columns(0, 1).swap_columns(2, 3);
            let flipped = f.negate_column(0).negate_column(3);
            let pairs = f.swap_columns(0, 2).swap_columns(1, 3);
            for other in [swapped, both, flipped, pairs] {
                assert!((isotropic_curvature(&r, &other).unwrap() - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ic_is_linear_in_r() {
        let mut g = rng::seeded(3);
        let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
        let s = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
        let f = random_frame(5, 7);
        let lhs = isotropic_curvature(&r.scaled(2.0).plus(&s).unwrap(), &f).unwrap();
        let rhs = 2.0 * isotropic_curvature(&r, &f).unwrap() + isotropic_curvature(&s, &f).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    /// Dense random sampling of frames, an independent upper-bound oracle.
    fn sampled_min(r: &CurvatureOperator, samples: usize, seed: u64) -> f64 {
        let mut g = rng::seeded(seed);
        (0..samples)
            .map(|_| {
                let f = FourFrame::from_flat(r.n(), &frames::random_frame(r.n(), &mut g));
                isotropic_curvature(r, &f).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn min_ic_examples() {
        let id = CurvatureOperator::identity(5).unwrap();
        let m = min_isotropic_curvature(&id, &quick());
        assert!((m.value - 4.0).abs() < 1e-12);
        assert!((sampled_min(&id, 2000, 1) - 4.0).abs() < 1e-12);

        let a = SymmetricEndomorphism::diagonal(&[-3.0, 1.0, 1.0, 1.0, 1.0]);
        let r = wedge(&a, &SymmetricEndomorphism::identity(5)).unwrap();
        let m = min_isotropic_curvature(&r, &quick());
        assert!(m.value.abs() < 1e-9, "{}", m.value);
        assert!(sampled_min(&r, 5000, 2) >= -1e-12);
        assert!((m.reevaluate(&r).unwrap() - m.value).abs() < 1e-8);

        // Id − 5·(e₁∧e₃)(e₁∧e₃)ᵀ, Bianchi-projected.
        let b = crate::lambda2::Lambda2Basis::new(5).unwrap();
        let mut mat = DMatrix::identity(10, 10);
        let a13 = b.index(0, 2);
        mat[(a13, a13)] -= 5.0;
        let r = CurvatureOperator::from_matrix(b, mat).unwrap();
        let m = min_isotropic_curvature(&r, &quick());
        assert!(m.value < 0.0);
        assert!(sampled_min(&r, 5000, 3) < 0.0);
        assert!(m.value <= sampled_min(&r, 5000, 3) + 1e-9);
    }

    #[test]
    fn minimum_is_upper_bounded_by_supplied_frames() {
        let mut g = rng::seeded(4);
        for _ in 0..5 {
            let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
            let m = min_isotropic_curvature(&r, &quick());
            for seed in 0..50 {
                let f = random_frame(5, seed);
                assert!(m.value <= isotropic_curvature(&r, &f).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn diagonal_wedge_min_is_four_smallest_sum() {
        let mut g = rng::seeded(5);
        for n in 4..=6 {
            let diag: Vec<f64> = (0..n).map(|_| g.gen_range(-2.0..2.0)).collect();
            let a = SymmetricEndomorphism::diagonal(&diag);
            let r = wedge(&a, &SymmetricEndomorphism::identity(n)).unwrap();
            let m = min_isotropic_curvature(&r, &quick());
            let mut sorted = diag.clone();
            sorted.sort_by(f64::total_cmp);
            let expected: f64 = sorted[..4].iter().sum();
            assert!((m.value - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn weighted_margins_are_ordered() {
        let mut g = rng::seeded(6);
        for _ in 0..5 {
            let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
            let o = quick();
            let m0 = cone_margin(&r, ConeId::Nnic, &o).value;
            let m1 = cone_margin(&r, ConeId::Nnic1, &o).value;
            let m2 = cone_margin(&r, ConeId::Nnic2, &o).value;
            assert!(m2 <= m1 + 1e-8, "{m2} {m1}");
            assert!(m1 <= m0 + 1e-8, "{m1} {m0}");
        }
        let id = CurvatureOperator::identity(5).unwrap();
        for c in [ConeId::Nnic, ConeId::Nnic1, ConeId::Nnic2] {
            assert!(cone_margin(&id, c, &quick()).value > 0.0);
        }
    }

    #[test]
    fn weighted_specializes_to_plain() {
        let mut g = rng::seeded(7);
        let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
        let f = random_frame(5, 1);
        assert_eq!(
            weighted_isotropic_curvature(&r, &f, 1.0, 1.0).unwrap(),
            isotropic_curvature(&r, &f).unwrap()
        );
    }

    #[test]
    fn eigen_cone_margins() {
        let id = CurvatureOperator::identity(5).unwrap();
        let o = quick();
        assert!((cone_margin(&id, ConeId::NonnegOperator, &o).value - 1.0).abs() < 1e-14);
        assert!((cone_margin(&id, ConeId::TwoNonnegOperator, &o).value - 2.0).abs() < 1e-14);
        assert!((cone_margin(&id, ConeId::Nnic, &o).value - 4.0).abs() < 1e-12);
        assert!((cone_margin(&id.scaled(-1.0), ConeId::NonnegOperator, &o).value + 1.0).abs() < 1e-14);
        let mut g = rng::seeded(8);
        let r = CurvatureOperator::random_gaussian(6, &mut g).unwrap();
        for c in [ConeId::NonnegOperator, ConeId::TwoNonnegOperator] {
            let m = cone_margin(&r, c, &o);
            assert!((m.reevaluate(&r).unwrap() - m.value).abs() < 1e-10);
        }
    }

    #[test]
    fn margins_are_monotone_along_identity() {
        let mut g = rng::seeded(9);
        let r = CurvatureOperator::random_gaussian(5, &mut g).unwrap();
        let o = quick();
        for c in ConeId::ALL {
            let base = cone_margin(&r, c, &o).value;
            for t in [0.1, 0.5, 2.0] {
                let shifted = cone_margin(&r.shifted(t), c, &o).value;
                let inc = shifted - base;
                // Id contributes between 1 and 4 per unit shift on every witness.
                assert!(inc >= -1e-8 && inc <= 4.0 * t + 1e-8, "{c}: {inc}");
                if c == ConeId::NonnegOperator {
                    assert!((inc - t).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn margins_are_rotation_invariant() {
        let mut g = rng::seeded(10);
        let n = 5;
        let r = CurvatureOperator::random_gaussian(n, &mut g).unwrap();
        let q = DMatrix::from_fn(n, n, |_, _| g.gen_range(-1.0..1.0)).qr().q();
        let rr = r.conjugated(&q).unwrap();
        let o = quick();
        for c in ConeId::ALL {
            let a = cone_margin(&r, c, &o).value;
            let b = cone_margin(&rr, c, &o).value;
            assert!((a - b).abs() < 1e-7, "{c}: {a} vs {b}");
        }
    }

    #[test]
    fn cone_id_parsing() {
        for c in ConeId::ALL {
            assert_eq!(c.to_string().parse::<ConeId>().unwrap(), c);
        }
        assert_eq!("two-nonneg".parse::<ConeId>().unwrap(), ConeId::TwoNonnegOperator);
        assert!("pinched".parse::<ConeId>().is_err());
        assert_eq!(serde_json::to_string(&ConeId::Nnic).unwrap(), "\"NNIC\"");
    }
}
