//! Seeded samplers placing random operators at a prescribed cone margin.

use rand::Rng;

use super::{cone_margin_warm, ConeId, ConeMargin, FourFrame, FrameSearchOptions};
use crate::curvature::{CurvatureOperator, SymmetricEndomorphism};
use crate::error::{Error, Result};
use crate::rng;

pub const BISECTION_ITERS: usize = 60;

#[derive(Debug, Clone)]
pub struct ConeSample {
    pub operator: CurvatureOperator,
    pub margin: ConeMargin,
    /// Multiple of Id added to the Gaussian draw.
    pub shift: f64,
}

/// Draws a Bianchi-projected Gaussian operator and shifts it along Id so that
/// its margin in `cone` lies in `[target, target + tol]`.
///
/// For the cones whose margin moves affinely along Id (every witness sees Id
/// with the same weight) the shift is solved in closed form and the margin is
/// re-read from the witness; NNIC1/NNIC2 use bisection on the shift.
pub fn random_cone_sample(
    cone: ConeId,
    n: usize,
    seed: u64,
    target: f64,
    opts: &FrameSearchOptions,
) -> Result<ConeSample> {
    if !(target >= 0.0) {
        return Err(Error::InvalidParameter(format!("target margin must be ≥ 0, got {target}")));
    }
    let mut g = rng::seeded(seed);
    let base = CurvatureOperator::random_gaussian(n, &mut g)?;
    let opts = opts.clone().with_seed(rng::splitmix64(seed));
    shift_to_margin(&base, cone, target, &opts)
}

pub(crate) fn shift_to_margin(
    base: &CurvatureOperator,
    cone: ConeId,
    target: f64,
    opts: &FrameSearchOptions,
) -> Result<ConeSample> {
    let m0 = cone_margin_warm(base, cone, opts, &[]);
    if let Some(slope) = cone.identity_slope() {
        let shift = (target - m0.value) / slope;
        let operator = base.shifted(shift);
        let value = m0.reevaluate(&operator)?;
        let margin = ConeMargin { value, ..m0 };
        return Ok(ConeSample { operator, margin, shift });
    }

    // margin(R + t·Id) − margin(R) lies between t and 4t for t ≥ 0.
    let d = target - m0.value;
    let (mut lo, mut hi) = if d >= 0.0 { (d / 4.0, d) } else { (d, d / 4.0) };
    let mut warm: Vec<FourFrame> = m0.frame().cloned().into_iter().collect();
    let eval = |t: f64, warm: &mut Vec<FourFrame>| {
        let m = cone_margin_warm(&base.shifted(t), cone, opts, warm);
        if let Some(f) = m.frame() {
            warm.clear();
            warm.push(f.clone());
        }
        m
    };
    let mut best = eval(hi, &mut warm);
    // Widen if the heuristic margin is not yet above target.
    let mut widen = 0;
    while best.value < target && widen < 60 {
        hi += (hi - lo).abs().max(1e-12);
        best = eval(hi, &mut warm);
        widen += 1;
    }
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let m = eval(mid, &mut warm);
        if m.value >= target {
            hi = mid;
            best = m;
        } else {
            lo = mid;
        }
    }
    Ok(ConeSample {
        operator: base.shifted(hi),
        margin: best,
        shift: hi,
    })
}

/// Gaussian symmetric endomorphism shifted so the sum of its `k` smallest
/// eigenvalues equals `target` (exactly, up to rounding).
pub fn random_k_nonneg(n: usize, k: usize, seed: u64, target: f64) -> Result<SymmetricEndomorphism> {
    let mut g = rng::seeded(seed);
    let a = SymmetricEndomorphism::random_gaussian(n, &mut g);
    let s = a.k_smallest_eigen_sum(k)?;
    Ok(a.shifted((target - s) / k as f64))
}

/// Per-trial target margin: three quarters of the trials sit on the boundary,
/// the rest at a uniform interior margin in `[0, 1)`.
pub(crate) fn trial_target<R: Rng + ?Sized>(trial: usize, g: &mut R) -> f64 {
    if trial % 4 == 3 {
        g.gen_range(0.0..1.0)
    } else {
        0.0
    }
}
