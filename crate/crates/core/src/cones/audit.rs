//! Randomized audits: the two isotropic-curvature lemmas, stability of cones
//! under `R ↦ ric(R)∧id`, and tangency of the reaction term on cone
//! boundaries.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::sampling::{random_k_nonneg, shift_to_margin, trial_target};
use super::{cone_margin, minimize_frames, ConeId, FourFrame, FrameSearchOptions, IcTerms};
use crate::curvature::{q_map, ricci, wedge, CurvatureOperator, SymmetricEndomorphism, SymmetricJson};
use crate::error::{Error, Result};
use crate::rng;

/// Relative slack for every "≥ 0" assertion in the lemma audits.
pub const AUDIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lemma {
    /// NNIC ⇒ ric(R) is 4-nonnegative.
    Ric4Nonneg,
    /// A 4-nonnegative ⇒ A∧id is NNIC.
    #[serde(rename = "Wedge4NonnegNNIC")]
    Wedge4NonnegNnic,
}

impl std::str::FromStr for Lemma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ric4nonneg" => Ok(Lemma::Ric4Nonneg),
            "wedge4nonnegnnic" => Ok(Lemma::Wedge4NonnegNnic),
            _ => Err(Error::InvalidParameter(format!("unknown lemma {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub trial: usize,
    pub operator: SymmetricJson,
    /// Frame columns e₁..e₄ when the margin comes from a frame search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub cone: Option<ConeId>,
    pub lemma: Option<Lemma>,
    pub n: usize,
    pub trials: usize,
    pub violations: usize,
    /// Smallest scale-normalized margin over all trials.
    pub worst_margin: f64,
    pub worst_witness: Option<WitnessRecord>,
    pub seed: u64,
    pub tolerance: f64,
    pub warnings: Vec<String>,
    pub wall_time_ms: u64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    violations: usize,
    worst: f64,
    witness: Option<WitnessRecord>,
    tol: f64,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Self {
            violations: 0,
            worst: f64::INFINITY,
            witness: None,
            tol,
        }
    }

    fn record(&mut self, normalized: f64, witness: impl FnOnce() -> WitnessRecord) {
        if normalized < -self.tol {
            self.violations += 1;
        }
        if normalized < self.worst {
            self.worst = normalized;
            self.witness = Some(witness());
        }
    }
}

fn check_trials(trials: usize, n: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    if !(4..=8).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(())
}

fn frame_rows(f: Option<&FourFrame>) -> Option<Vec<Vec<f64>>> {
    f.map(FourFrame::to_rows)
}

/// Audits one of the two isotropic-curvature lemmas on `trials` seeded
/// samples in dimension `n`.
pub fn audit_lemma(
    lemma: Lemma,
    trials: usize,
    n: usize,
    seed: u64,
    opts: &FrameSearchOptions,
) -> Result<AuditReport> {
    check_trials(trials, n)?;
    let start = Instant::now();
    let mut warnings = Vec::new();
    if n == 4 {
        warnings.push(
            "n = 4: the pairwise summation argument behind the ric 4-nonnegativity bound is degenerate; \
             the implication is audited numerically only"
                .to_string(),
        );
    }
    let mut tally = Tally::new(AUDIT_TOL);
    let id = SymmetricEndomorphism::identity(n);
    for trial in 0..trials {
        let tseed = rng::trial_seed(seed, trial as u64);
        let mut g = rng::seeded(tseed);
        let target = trial_target(trial, &mut g);
        let topts = opts.clone().with_seed(rng::splitmix64(tseed));
        match lemma {
            Lemma::Ric4Nonneg => {
                let base = CurvatureOperator::random_gaussian(n, &mut g)?;
                let sample = shift_to_margin(&base, ConeId::Nnic, target, &topts)?;
                let r = &sample.operator;
                let value = ricci(r).k_smallest_eigen_sum(4)?;
                tally.record(value / r.frobenius(), || WitnessRecord {
                    trial,
                    operator: r.to_json_value(),
                    frame: frame_rows(sample.margin.frame()),
                });
            }
            Lemma::Wedge4NonnegNnic => {
                let a = random_k_nonneg(n, 4, g.gen_u64(), target)?;
                let r = wedge(&a, &id)?;
                let m = cone_margin(&r, ConeId::Nnic, &topts);
                tally.record(m.value / a.frobenius(), || WitnessRecord {
                    trial,
                    operator: a.to_json_value(),
                    frame: frame_rows(m.frame()),
                });
            }
        }
    }
    Ok(AuditReport {
        cone: Some(ConeId::Nnic),
        lemma: Some(lemma),
        n,
        trials,
        violations: tally.violations,
        worst_margin: tally.worst,
        worst_witness: tally.witness,
        seed,
        tolerance: AUDIT_TOL,
        warnings,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

/// Samples `R` in `cone` and checks `ric(R)∧id ∈ cone`.
pub fn check_condition_star(
    cone: ConeId,
    trials: usize,
    n: usize,
    seed: u64,
    opts: &FrameSearchOptions,
) -> Result<AuditReport> {
    check_trials(trials, n)?;
    let start = Instant::now();
    let mut tally = Tally::new(AUDIT_TOL);
    let id = SymmetricEndomorphism::identity(n);
    for trial in 0..trials {
        let tseed = rng::trial_seed(seed, trial as u64);
        let mut g = rng::seeded(tseed);
        let target = trial_target(trial, &mut g);
        let topts = opts.clone().with_seed(rng::splitmix64(tseed));
        let base = CurvatureOperator::random_gaussian(n, &mut g)?;
        let sample = shift_to_margin(&base, cone, target, &topts)?;
        let r = &sample.operator;
        let image = wedge(&ricci(r), &id)?;
        let m = cone_margin(&image, cone, &topts);
        tally.record(m.value / r.frobenius(), || WitnessRecord {
            trial,
            operator: r.to_json_value(),
            frame: frame_rows(m.frame()),
        });
    }
    Ok(AuditReport {
        cone: Some(cone),
        lemma: None,
        n,
        trials,
        violations: tally.violations,
        worst_margin: tally.worst,
        worst_witness: tally.witness,
        seed,
        tolerance: AUDIT_TOL,
        warnings: Vec::new(),
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TangencyOptions {
    /// |margin| must not exceed this multiple of ‖R‖.
    pub boundary_tol: f64,
    /// Witnesses within this multiple of ‖R‖ of the margin count as active.
    pub activity_tol: f64,
    pub search: FrameSearchOptions,
}

impl Default for TangencyOptions {
    fn default() -> Self {
        Self {
            boundary_tol: 1e-6,
            activity_tol: 1e-5,
            search: FrameSearchOptions::default(),
        }
    }
}

/// Smallest value of the active boundary functionals on `Q(R)`.
///
/// Eigenvalue cones: with `λ₁ ≤ … ≤ λ_N` and `k` the cone's order, the
/// functional is the trace of `Q(R)` over the eigenvectors strictly below
/// `λ_k` plus the smallest partial trace over the eigenspace at `λ_k`.
/// Frame cones: the weighted isotropic curvature of `Q(R)` at every local
/// minimizer whose value is within the activity tolerance.
pub fn tangency_defect(r: &CurvatureOperator, cone: ConeId, opts: &TangencyOptions) -> Result<f64> {
    let scale = r.frobenius().max(f64::MIN_POSITIVE);
    let q = q_map(r);
    if let Some(k) = cone.eigen_k() {
        let eig = SymmetricEigen::new(r.matrix().clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let margin: f64 = vals[..k].iter().sum();
        check_boundary(margin, scale, opts)?;
        let act = opts.activity_tol * scale;
        let pivot = vals[k - 1];
        let below: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < pivot - act).collect();
        let near: Vec<usize> = (0..vals.len()).filter(|&i| (vals[i] - pivot).abs() <= act).collect();
        let column = |i: usize| eig.eigenvectors.column(order[i]).clone_owned();
        let fixed: f64 = below
            .iter()
            .map(|&i| {
                let v = column(i);
                v.dot(&(q.matrix() * &v))
            })
            .sum();
        let free = k - below.len();
        let basis = DMatrix::from_columns(&near.iter().map(|&i| column(i)).collect::<Vec<_>>());
        let restricted = basis.transpose() * q.matrix() * &basis;
        let mut sub: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
        sub.sort_by(f64::total_cmp);
        return Ok(fixed + sub[..free].iter().sum::<f64>());
    }
    let mode = cone.weighting().expect("frame cone");
    let search = minimize_frames(r, mode, &opts.search, &[]);
    check_boundary(search.margin.value, scale, opts)?;
    let act = search.margin.value + opts.activity_tol * scale;
    let mut defect = f64::INFINITY;
    let q_obj = super::frames::FrameObjective::new(&q, mode);
    for (frame, lambda, mu, value) in &search.minima {
        if *value <= act {
            let t: IcTerms = q_obj.terms(&frame.to_flat());
            defect = defect.min(t.weighted(*lambda, *mu));
        }
    }
    if let super::Witness::Frame { frame, lambda, mu } = &search.margin.witness {
        defect = defect.min(q_obj.terms(&frame.to_flat()).weighted(*lambda, *mu));
    }
    Ok(defect)
}

fn check_boundary(margin: f64, scale: f64, opts: &TangencyOptions) -> Result<()> {
    let tol = opts.boundary_tol * scale;
    if margin.abs() > tol {
        return Err(Error::NotOnBoundary { margin, tol });
    }
    Ok(())
}

/// Tangency audit over `trials` boundary samples of `cone`.
pub fn audit_tangency(
    cone: ConeId,
    trials: usize,
    n: usize,
    seed: u64,
    opts: &TangencyOptions,
) -> Result<AuditReport> {
    check_trials(trials, n)?;
    let start = Instant::now();
    let tol = 1e-6;
    let mut tally = Tally::new(tol);
    for trial in 0..trials {
        let tseed = rng::trial_seed(seed, trial as u64);
        let mut g = rng::seeded(tseed);
        let mut topts = opts.clone();
        topts.search.seed = rng::splitmix64(tseed);
        let base = CurvatureOperator::random_gaussian(n, &mut g)?;
        let sample = shift_to_margin(&base, cone, 0.0, &topts.search)?;
        let r = &sample.operator;
        let defect = tangency_defect(r, cone, &topts)?;
        tally.record(defect / r.frobenius(), || WitnessRecord {
            trial,
            operator: r.to_json_value(),
            frame: frame_rows(sample.margin.frame()),
        });
    }
    Ok(AuditReport {
        cone: Some(cone),
        lemma: None,
        n,
        trials,
        violations: tally.violations,
        worst_margin: tally.worst,
        worst_witness: tally.witness,
        seed,
        tolerance: tol,
        warnings: Vec::new(),
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

trait GenU64 {
    fn gen_u64(&mut self) -> u64;
}

impl<R: rand::RngCore> GenU64 for R {
    fn gen_u64(&mut self) -> u64 {
        self.next_u64()
    }
}
