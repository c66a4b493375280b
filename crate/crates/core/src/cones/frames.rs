//! Minimization of (weighted) isotropic curvature over orthonormal 4-frames.
//!
//! Frames live on the Stiefel manifold St(n,4). The search first scores a
//! deterministic lattice (coordinate frames, both orientation classes, and
//! rotations by multiples of π/8 mixing the two complex pairs), then runs
//! Riemannian gradient descent with Barzilai–Borwein steps, Armijo
//! backtracking and a QR retraction from the best lattice frames, any
//! caller-supplied warm starts, and `restarts` Haar-random frames.
//!
//! Frames are stored column-major in a flat `Vec<f64>` of length `4n`.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureOperator;
use crate::lambda2::{Lambda2Basis, MAX_DIM};
use crate::rng;

/// Which isotropic-curvature functional is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// `R₁₃₁₃ + R₁₄₁₄ + R₂₃₂₃ + R₂₄₂₄ − 2R₁₂₃₄`.
    Plain,
    /// λ ∈ [0,1], μ = 1.
    Nnic1,
    /// λ, μ ∈ [0,1].
    Nnic2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameSearchOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Riemannian gradient tolerance, relative to the Frobenius norm of R.
    pub tol: f64,
    pub seed: u64,
    /// Number of best lattice frames used as additional descent starts.
    pub lattice_starts: usize,
}

impl Default for FrameSearchOptions {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iters: 500,
            tol: 1e-10,
            seed: 0,
            lattice_starts: 4,
        }
    }
}

impl FrameSearchOptions {
    /// Cheaper setting used by the randomized audits: fewer random starts,
    /// more lattice starts. Matched a 200-restart search on every sampled
    /// operator with n ≤ 6.
    pub fn audit() -> Self {
        Self {
            restarts: 32,
            lattice_starts: 8,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// A local minimum reached by one descent run.
#[derive(Debug, Clone)]
pub struct LocalMin {
    pub frame: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub value: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct FrameSearchResult {
    pub best: LocalMin,
    /// End points of every descent run (lattice, warm and random starts).
    pub minima: Vec<LocalMin>,
}

/// The five frame quantities entering every weighted functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcTerms {
    pub r1313: f64,
    pub r1414: f64,
    pub r2323: f64,
    pub r2424: f64,
    pub r1234: f64,
}

impl IcTerms {
    #[inline]
    pub fn weighted(&self, lambda: f64, mu: f64) -> f64 {
        let (l2, m2) = (lambda * lambda, mu * mu);
        self.r1313 + l2 * self.r1414 + m2 * self.r2323 + l2 * m2 * self.r2424
            - 2.0 * lambda * mu * self.r1234
    }

    /// Minimizing weights for the given mode and the minimum value.
    pub fn best_weights(&self, mode: Weighting) -> (f64, f64, f64) {
        match mode {
            Weighting::Plain => (1.0, 1.0, self.weighted(1.0, 1.0)),
            Weighting::Nnic1 => {
                let lambda = self.best_lambda(1.0);
                (lambda, 1.0, self.weighted(lambda, 1.0))
            }
            Weighting::Nnic2 => self.best_weights_box(),
        }
    }

    /// Exact minimizer over λ ∈ [0,1] for fixed μ (the functional is
    /// quadratic in λ).
    fn best_lambda(&self, mu: f64) -> f64 {
        let a = self.r1414 + mu * mu * self.r2424;
        let b = mu * self.r1234;
        let candidates = [0.0, 1.0, if a > 0.0 { (b / a).clamp(0.0, 1.0) } else { 0.0 }];
        best_of(&candidates, |l| self.weighted(l, mu))
    }

    fn best_mu(&self, lambda: f64) -> f64 {
        let a = self.r2323 + lambda * lambda * self.r2424;
        let b = lambda * self.r1234;
        let candidates = [0.0, 1.0, if a > 0.0 { (b / a).clamp(0.0, 1.0) } else { 0.0 }];
        best_of(&candidates, |m| self.weighted(lambda, m))
    }

    /// Minimum over the box: exact in λ on a μ-grid, then alternating exact
    /// coordinate minimization from the best grid point and the corners.
    fn best_weights_box(&self) -> (f64, f64, f64) {
        const GRID: usize = 16;
        let mut best = (1.0, 1.0, self.weighted(1.0, 1.0));
        let consider = |l: f64, m: f64, best: &mut (f64, f64, f64)| {
            let v = self.weighted(l, m);
            if v < best.2 {
                *best = (l, m, v);
            }
        };
        for k in 0..=GRID {
            let mu = k as f64 / GRID as f64;
            let lambda = self.best_lambda(mu);
            consider(lambda, mu, &mut best);
        }
        let starts = [(best.0, best.1), (0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        for (mut l, mut m) in starts {
            for _ in 0..50 {
                let (l_old, m_old) = (l, m);
                l = self.best_lambda(m);
                m = self.best_mu(l);
                if (l - l_old).abs() + (m - m_old).abs() < 1e-15 {
                    break;
                }
            }
            consider(l, m, &mut best);
        }
        best
    }
}

fn best_of(candidates: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut arg = candidates[0];
    let mut val = f(arg);
    for &c in &candidates[1..] {
        let v = f(c);
        if v < val {
            arg = c;
            val = v;
        }
    }
    arg
}

/// Weighted isotropic curvature as a function on St(n,4).
pub(crate) struct FrameObjective {
    basis: Lambda2Basis,
    n: usize,
    nn: usize,
    /// Row-major N×N matrix of R.
    mat: Vec<f64>,
    mode: Weighting,
    scale: f64,
}

struct Scratch {
    w: [Vec<f64>; 6],
    g: [Vec<f64>; 6],
}

// Pair slots: 13, 14, 23, 24, 12, 34 (columns are zero-based below).
const PAIRS: [(usize, usize); 6] = [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)];

impl Scratch {
    fn new(nn: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| vec![0.0; nn]),
            g: std::array::from_fn(|_| vec![0.0; nn]),
        }
    }
}

impl FrameObjective {
    pub(crate) fn new(r: &CurvatureOperator, mode: Weighting) -> Self {
        let basis = r.basis();
        let nn = basis.dim();
        let m = r.matrix();
        let mut mat = vec![0.0; nn * nn];
        for a in 0..nn {
            for b in 0..nn {
                mat[a * nn + b] = m[(a, b)];
            }
        }
        Self {
            basis,
            n: basis.n(),
            nn,
            mat,
            mode,
            scale: r.frobenius(),
        }
    }

    #[inline]
    fn col<'f>(&self, f: &'f [f64], c: usize) -> &'f [f64] {
        &f[c * self.n..(c + 1) * self.n]
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let nn = self.nn;
        for (a, o) in out.iter_mut().enumerate() {
            let row = &self.mat[a * nn..(a + 1) * nn];
            *o = row.iter().zip(x).map(|(m, v)| m * v).sum();
        }
    }

    /// Fills wedges and `G = M·w` for the slots needed (`upto` = 5 for
    /// values, 6 when gradients need `M(e3∧e4)`).
    fn fill(&self, f: &[f64], s: &mut Scratch, upto: usize) {
        for (slot, &(p, q)) in PAIRS.iter().enumerate().take(upto) {
            self.basis.wedge_into(self.col(f, p), self.col(f, q), &mut s.w[slot]);
            let (w, g) = (&s.w[slot], &mut s.g[slot]);
            self.matvec(w, g);
        }
    }

    fn terms_from(&self, s: &Scratch) -> IcTerms {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        IcTerms {
            r1313: dot(&s.g[0], &s.w[0]),
            r1414: dot(&s.g[1], &s.w[1]),
            r2323: dot(&s.g[2], &s.w[2]),
            r2424: dot(&s.g[3], &s.w[3]),
            r1234: dot(&s.g[4], &s.w[5]),
        }
    }

    pub(crate) fn terms(&self, f: &[f64]) -> IcTerms {
        let mut s = Scratch::new(self.nn);
        self.basis
            .wedge_into(self.col(f, 2), self.col(f, 3), &mut s.w[5]);
        self.fill(f, &mut s, 5);
        self.terms_from(&s)
    }

    fn value_with(&self, f: &[f64], s: &mut Scratch) -> (f64, f64, f64) {
        self.basis
            .wedge_into(self.col(f, 2), self.col(f, 3), &mut s.w[5]);
        self.fill(f, s, 5);
        let t = self.terms_from(s);
        let (l, m, v) = t.best_weights(self.mode);
        (v, l, m)
    }

    /// `out += coef · Ĝ y` where Ĝ is the antisymmetric matrix of `g`.
    #[inline]
    fn add_hat_mul(&self, g: &[f64], y: &[f64], coef: f64, out: &mut [f64]) {
        let n = self.n;
        let mut a = 0;
        for k in 0..n {
            for l in k + 1..n {
                let v = coef * g[a];
                out[k] += v * y[l];
                out[l] -= v * y[k];
                a += 1;
            }
        }
    }

    /// Value, Euclidean gradient (into `grad`) and the minimizing weights.
    fn value_grad(&self, f: &[f64], s: &mut Scratch, grad: &mut [f64]) -> (f64, f64, f64) {
        let n = self.n;
        self.fill(f, s, 6);
        let t = self.terms_from(s);
        let (l, m, v) = t.best_weights(self.mode);
        let (l2, m2, lm) = (l * l, m * m, l * m);
        grad.iter_mut().for_each(|x| *x = 0.0);
        let (e1, e2, e3, e4) = (self.col(f, 0), self.col(f, 1), self.col(f, 2), self.col(f, 3));
        let (g1, rest) = grad.split_at_mut(n);
        let (g2, rest) = rest.split_at_mut(n);
        let (g3, g4) = rest.split_at_mut(n);
        let [g13, g14, g23, g24, g12, g34] = &s.g;
        self.add_hat_mul(g13, e3, 2.0, g1);
        self.add_hat_mul(g14, e4, 2.0 * l2, g1);
        self.add_hat_mul(g34, e2, -2.0 * lm, g1);

        self.add_hat_mul(g23, e3, 2.0 * m2, g2);
        self.add_hat_mul(g24, e4, 2.0 * l2 * m2, g2);
        self.add_hat_mul(g34, e1, 2.0 * lm, g2);

        self.add_hat_mul(g13, e1, -2.0, g3);
        self.add_hat_mul(g23, e2, -2.0 * m2, g3);
        self.add_hat_mul(g12, e4, -2.0 * lm, g3);

        self.add_hat_mul(g14, e1, -2.0 * l2, g4);
        self.add_hat_mul(g24, e2, -2.0 * l2 * m2, g4);
        self.add_hat_mul(g12, e3, 2.0 * lm, g4);
        (v, l, m)
    }

    #[allow(dead_code)]
    pub(crate) fn value(&self, f: &[f64]) -> (f64, f64, f64) {
        let mut s = Scratch::new(self.nn);
        self.value_with(f, &mut s)
    }

    #[cfg(test)]
    pub(crate) fn gradient(&self, f: &[f64]) -> Vec<f64> {
        let mut s = Scratch::new(self.nn);
        let mut g = vec![0.0; f.len()];
        self.value_grad(f, &mut s, &mut g);
        g
    }

    /// Riemannian gradient `G − E·sym(EᵀG)`, returned with its norm.
    fn project_tangent(&self, f: &[f64], g: &[f64], out: &mut [f64]) -> f64 {
        let n = self.n;
        let mut eg = [[0.0; 4]; 4];
        for (i, row) in eg.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = dot(&f[i * n..(i + 1) * n], &g[j * n..(j + 1) * n]);
            }
        }
        out.copy_from_slice(g);
        for j in 0..4 {
            for i in 0..4 {
                let sym = 0.5 * (eg[i][j] + eg[j][i]);
                for r in 0..n {
                    out[j * n + r] -= f[i * n + r] * sym;
                }
            }
        }
        dot(out, out).sqrt()
    }

    fn descend(&self, start: &[f64], opts: &FrameSearchOptions) -> LocalMin {
        let len = 4 * self.n;
        let scale = self.scale.max(f64::MIN_POSITIVE);
        let tol = opts.tol * scale.max(1e-300);
        let mut s = Scratch::new(self.nn);
        let mut x = start.to_vec();
        let mut grad = vec![0.0; len];
        let mut rg = vec![0.0; len];
        let (mut fx, mut lam, mut mu) = self.value_grad(&x, &mut s, &mut grad);
        let mut gn = self.project_tangent(&x, &grad, &mut rg);
        let mut step = 0.5 / scale;
        let mut trial = vec![0.0; len];
        let mut trial_grad = vec![0.0; len];
        let mut trial_rg = vec![0.0; len];
        let mut converged = gn <= tol;
        let mut iters = 0;
        while !converged && iters < opts.max_iters {
            iters += 1;
            let mut t = step;
            let mut accepted = false;
            for _ in 0..60 {
                for k in 0..len {
                    trial[k] = x[k] - t * rg[k];
                }
                orthonormalize(&mut trial, self.n);
                let (ft, lt, mt) = self.value_grad(&trial, &mut s, &mut trial_grad);
                if ft <= fx - 1e-4 * t * gn * gn {
                    let gt = self.project_tangent(&trial, &trial_grad, &mut trial_rg);
                    // Barzilai–Borwein step from the accepted displacement.
                    let mut ss = 0.0;
                    let mut sy = 0.0;
                    for k in 0..len {
                        let dx = trial[k] - x[k];
                        ss += dx * dx;
                        sy += dx * (trial_rg[k] - rg[k]);
                    }
                    step = if sy.abs() > 0.0 { (ss / sy.abs()).clamp(1e-6 / scale, 1e3 / scale) } else { t * 2.0 };
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut rg, &mut trial_rg);
                    fx = ft;
                    lam = lt;
                    mu = mt;
                    gn = gt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // No further decrease at working precision.
                converged = gn <= tol.max(1e-7 * scale);
                break;
            }
            converged = gn <= tol;
        }
        LocalMin {
            frame: x,
            lambda: lam,
            mu,
            value: fx,
            grad_norm: gn,
            converged,
        }
    }

    pub(crate) fn search(
        &self,
        opts: &FrameSearchOptions,
        warm: &[Vec<f64>],
    ) -> FrameSearchResult {
        let n = self.n;
        let lattice = lattice_frames(n);
        let mut s = Scratch::new(self.nn);
        let mut scored: Vec<(f64, usize, f64, f64)> = lattice
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let (v, l, m) = self.value_with(f, &mut s);
                (v, i, l, m)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let lattice_best = scored[0];
        let mut best = LocalMin {
            frame: lattice[lattice_best.1].clone(),
            lambda: lattice_best.2,
            mu: lattice_best.3,
            value: lattice_best.0,
            grad_norm: f64::NAN,
            converged: false,
        };

        let mut starts: Vec<Vec<f64>> = scored
            .iter()
            .take(opts.lattice_starts)
            .map(|&(_, i, _, _)| lattice[i].clone())
            .collect();
        for w in warm {
            let mut f = w.clone();
            orthonormalize(&mut f, n);
            starts.push(f);
        }
        let mut rng = rng::seeded(opts.seed);
        for _ in 0..opts.restarts {
            starts.push(random_frame(n, &mut rng));
        }

        let mut minima = Vec::with_capacity(starts.len());
        for start in &starts {
            let m = self.descend(start, opts);
            if m.value < best.value || (m.value == best.value && m.converged && !best.converged) {
                best = m.clone();
            }
            minima.push(m);
        }
        FrameSearchResult { best, minima }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Q factor of the thin QR decomposition (positive diagonal), in place, by
/// two passes of modified Gram–Schmidt.
pub(crate) fn orthonormalize(f: &mut [f64], n: usize) {
    for _pass in 0..2 {
        for c in 0..4 {
            for p in 0..c {
                let (head, tail) = f.split_at_mut(c * n);
                let prev = &head[p * n..(p + 1) * n];
                let cur = &mut tail[..n];
                let proj = dot(prev, cur);
                for r in 0..n {
                    cur[r] -= proj * prev[r];
                }
            }
            let cur = &mut f[c * n..(c + 1) * n];
            let norm = dot(cur, cur).sqrt();
            for v in cur.iter_mut() {
                *v /= norm;
            }
        }
    }
}

/// Haar-distributed frame: Q factor of a Gaussian n×4 matrix.
pub(crate) fn random_frame<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut f: Vec<f64> = (0..4 * n).map(|_| rng.sample(StandardNormal)).collect();
    orthonormalize(&mut f, n);
    f
}

/// Deterministic starting lattice, cached per dimension.
pub(crate) fn lattice_frames(n: usize) -> Arc<Vec<Vec<f64>>> {
    static CACHE: [OnceLock<Arc<Vec<Vec<f64>>>>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    CACHE[n].get_or_init(|| Arc::new(build_lattice(n))).clone()
}

fn build_lattice(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    // Only the orientation of e₄ relative to the others changes IC; the other
    // fourteen sign patterns repeat one of these two values.
    let signs = [1.0, -1.0];
    let mixing = [(0, 2), (0, 3), (1, 2), (1, 3)];
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    for cols in [[a, b, c, d], [a, c, b, d], [a, d, b, c]] {
                        for sign in signs {
                            let mut base = vec![0.0; 4 * n];
                            for (k, &axis) in cols.iter().enumerate() {
                                base[k * n + axis] = if k == 3 { sign } else { 1.0 };
                            }
                            out.push(base.clone());
                            for &(p, q) in &mixing {
                                for k in 1..8 {
                                    let th = std::f64::consts::PI * k as f64 / 8.0;
                                    let (s, co) = th.sin_cos();
                                    let mut f = base.clone();
                                    for r in 0..n {
                                        let (x, y) = (base[p * n + r], base[q * n + r]);
                                        f[p * n + r] = co * x + s * y;
                                        f[q * n + r] = -s * x + co * y;
                                    }
                                    out.push(f);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
