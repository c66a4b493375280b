//! Suprema of `Σ_m w_m (∂^{α_m} u)²` over the torus: candidates from an
//! oversampled grid, then Newton ascent on the trigonometric series.

use nalgebra::{Matrix3, Vector3};

use super::spectral::{Spectral, C64};

/// Coefficients below this fraction of the largest one are dropped from the
/// series used for refinement.
const SPARSE_CUTOFF: f64 = 1e-15;
const NEWTON_ITERS: usize = 60;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SupOptions {
    pub oversample: usize,
    pub candidates: usize,
}

impl Default for SupOptions {
    fn default() -> Self {
        Self {
            oversample: 4,
            candidates: 6,
        }
    }
}

/// A weighted sum of squared derivatives of one real field.
pub(crate) struct Quadratic {
    pub terms: Vec<([usize; 3], f64)>,
}

impl Quadratic {
    pub(crate) fn value() -> Self {
        Self { terms: vec![([0, 0, 0], 1.0)] }
    }

    pub(crate) fn gradient(d: usize) -> Self {
        Self {
            terms: (0..d).map(|a| (unit(a), 1.0)).collect(),
        }
    }

    /// Frobenius norm squared of the Hessian; mixed partials count twice.
    pub(crate) fn hessian(d: usize) -> Self {
        let mut terms = Vec::new();
        for a in 0..d {
            for b in a..d {
                let mut o = unit(a);
                o[b] += 1;
                terms.push((o, if a == b { 1.0 } else { 2.0 }));
            }
        }
        Self { terms }
    }

    pub(crate) fn scaled(mut self, w: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= w;
        }
        self
    }

    pub(crate) fn plus(mut self, other: Self) -> Self {
        self.terms.extend(other.terms);
        self
    }
}

fn unit(a: usize) -> [usize; 3] {
    let mut o = [0; 3];
    o[a] = 1;
    o
}

struct Series {
    d: usize,
    kappa: Vec<[f64; 3]>,
    /// Per mode, the coefficient multiplied by each term's derivative symbol.
    coef: Vec<Vec<C64>>,
    weights: Vec<f64>,
}

impl Series {
    fn new(s: &Spectral, spec: &[C64], q: &Quadratic) -> Self {
        let cmax = spec.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let scale = 1.0 / spec.len() as f64;
        let mut kappa = Vec::new();
        let mut coef = Vec::new();
        for (i, c) in spec.iter().enumerate() {
            if cmax == 0.0 || c.norm() <= SPARSE_CUTOFF * cmax {
                continue;
            }
            kappa.push(s.wavevector(i));
            coef.push(q.terms.iter().map(|(o, _)| c * s.derivative_symbol(i, *o) * scale).collect());
        }
        Self {
            d: s.d(),
            kappa,
            coef,
            weights: q.terms.iter().map(|t| t.1).collect(),
        }
    }

    /// Objective, gradient and Hessian at `x`.
    fn eval(&self, x: &[f64; 3]) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let d = self.d;
        let m = self.weights.len();
        let mut v = vec![0.0; m];
        let mut dv = vec![[0.0; 3]; m];
        let mut ddv = vec![[[0.0; 3]; 3]; m];
        for (k, cs) in self.kappa.iter().zip(&self.coef) {
            let phase: f64 = (0..d).map(|a| k[a] * x[a]).sum();
            let e = C64::new(phase.cos(), phase.sin());
            for (t, c) in cs.iter().enumerate() {
                let z = c * e;
                v[t] += z.re;
                for a in 0..d {
                    // ∂_a multiplies by iκ_a.
                    dv[t][a] -= k[a] * z.im;
                    for b in 0..d {
                        ddv[t][a][b] -= k[a] * k[b] * z.re;
                    }
                }
            }
        }
        let mut f = 0.0;
        let mut g = Vector3::zeros();
        let mut h = Matrix3::zeros();
        for t in 0..m {
            let w = self.weights[t];
            f += w * v[t] * v[t];
            for a in 0..d {
                g[a] += 2.0 * w * v[t] * dv[t][a];
                for b in 0..d {
                    h[(a, b)] += 2.0 * w * (dv[t][a] * dv[t][b] + v[t] * ddv[t][a][b]);
                }
            }
        }
        (f, g, h)
    }

    fn value(&self, x: &[f64; 3]) -> f64 {
        self.eval(x).0
    }
}

/// Newton ascent with backtracking from `x0`.
fn ascend(series: &Series, x0: [f64; 3], max_step: f64) -> ([f64; 3], f64) {
    let d = series.d;
    let mut x = x0;
    let (mut f, mut g, mut h) = series.eval(&x);
    for _ in 0..NEWTON_ITERS {
        // Unused axes get an identity block so the solve stays regular.
        let mut neg_d = Matrix3::identity();
        for a in 0..d {
            for b in 0..d {
                neg_d[(a, b)] = -h[(a, b)];
            }
        }
        let newton = neg_d.cholesky().map(|c| c.solve(&g));
        let mut step = match newton {
            Some(s) => s,
            None => {
                let curv = h.abs().max().max(1e-300);
                g / curv
            }
        };
        let len = step.norm();
        if len > max_step {
            step *= max_step / len;
        }
        if step.norm() < 1e-15 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut y = x;
            for a in 0..d {
                y[a] += step[a];
            }
            let fy = series.value(&y);
            if fy > f {
                x = y;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        let (f2, g2, h2) = series.eval(&x);
        let gain = f2 - f;
        f = f2;
        g = g2;
        h = h2;
        if gain <= 1e-16 * f.abs() {
            break;
        }
    }
    (x, f)
}

/// Evaluates refined suprema of several quadratics of one field, sharing the
/// oversampled derivative fields between them.
pub(crate) struct SupEngine {
    base: Spectral,
    fine: Spectral,
    fine_dims: Vec<usize>,
    periods: Vec<f64>,
    opts: SupOptions,
}

impl SupEngine {
    pub(crate) fn new(dims: &[usize], periods: &[f64], opts: SupOptions) -> Self {
        let factor = opts.oversample.max(1);
        let fine_dims: Vec<usize> = dims.iter().map(|&n| n * factor).collect();
        Self {
            base: Spectral::new(dims, periods),
            fine: Spectral::new(&fine_dims, periods),
            fine_dims,
            periods: periods.to_vec(),
            opts,
        }
    }

    pub(crate) fn base(&self) -> &Spectral {
        &self.base
    }

    /// `sup_x Σ w (∂^α u)²` for every quadratic in `qs`, given the spectrum of `u`.
    pub(crate) fn sups(&self, spec: &[C64], qs: &[Quadratic]) -> Vec<f64> {
        let d = self.base.d();
        let (_, padded) = self.base.padded(spec, self.opts.oversample.max(1));
        let mut cache: Vec<([usize; 3], Vec<f64>)> = Vec::new();
        let mut out = Vec::with_capacity(qs.len());
        for q in qs {
            let mut obj = vec![0.0; self.fine.len()];
            for (o, w) in &q.terms {
                let pos = match cache.iter().position(|(k, _)| k == o) {
                    Some(p) => p,
                    None => {
                        cache.push((*o, self.fine.derivative_values(&padded, *o)));
                        cache.len() - 1
                    }
                };
                for (acc, v) in obj.iter_mut().zip(&cache[pos].1) {
                    *acc += w * v * v;
                }
            }
            out.push(self.refine(spec, q, &obj, d));
        }
        out
    }

    fn refine(&self, spec: &[C64], q: &Quadratic, obj: &[f64], d: usize) -> f64 {
        let fine = &self.fine_dims;
        let grid_max = obj.iter().copied().fold(0.0, f64::max);
        if grid_max == 0.0 {
            return 0.0;
        }
        // Local maxima along every axis, best first.
        let strides: Vec<usize> = (0..d).map(|a| fine[a + 1..].iter().product()).collect();
        let mut cands: Vec<usize> = (0..obj.len())
            .filter(|&i| {
                let mi = self.fine.multi_index(i);
                (0..d).all(|a| {
                    let n = fine[a];
                    let up = i - mi[a] * strides[a] + ((mi[a] + 1) % n) * strides[a];
                    let dn = i - mi[a] * strides[a] + ((mi[a] + n - 1) % n) * strides[a];
                    obj[i] >= obj[up] && obj[i] >= obj[dn]
                })
            })
            .collect();
        cands.sort_by(|&a, &b| obj[b].total_cmp(&obj[a]));
        cands.truncate(self.opts.candidates.max(1));
        let series = Series::new(&self.base, spec, q);
        let h_fine = (0..d)
            .map(|a| self.periods[a] / fine[a] as f64)
            .fold(f64::INFINITY, f64::min);
        let mut best = grid_max;
        for i in cands {
            let mi = self.fine.multi_index(i);
            let mut x = [0.0; 3];
            for a in 0..d {
                x[a] = mi[a] as f64 * self.periods[a] / fine[a] as f64;
            }
            let (_, f) = ascend(&series, x, 2.0 * h_fine);
            best = best.max(f);
        }
        best
    }
}
