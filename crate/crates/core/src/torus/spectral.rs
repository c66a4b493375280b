//! Multi-dimensional FFTs, Fourier multipliers and zero-padded resampling.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::TorusGrid;

pub(crate) type C64 = Complex64;

pub(crate) struct Spectral {
    dims: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    /// Angular wavenumber per axis and index, Nyquist entry signed negative.
    kappa: Vec<Vec<f64>>,
    /// Mode number per axis and index.
    modes: Vec<Vec<i64>>,
}

impl Spectral {
    pub(crate) fn new(dims: &[usize], periods: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let modes: Vec<Vec<i64>> = dims
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|i| if i < n / 2 { i as i64 } else { i as i64 - n as i64 })
                    .collect()
            })
            .collect();
        let kappa = modes
            .iter()
            .zip(periods)
            .map(|(m, &l)| m.iter().map(|&v| v as f64 * 2.0 * PI / l).collect())
            .collect();
        Self {
            dims: dims.to_vec(),
            fwd,
            inv,
            kappa,
            modes,
        }
    }

    pub(crate) fn for_grid(grid: &TorusGrid) -> Self {
        Self::new(grid.resolution(), grid.periods())
    }

    pub(crate) fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub(crate) fn d(&self) -> usize {
        self.dims.len()
    }

    fn transform(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>]) {
        let d = self.dims.len();
        let total = data.len();
        for a in 0..d {
            let n = self.dims[a];
            let stride: usize = self.dims[a + 1..].iter().product();
            if stride == 1 {
                plans[a].process(data);
                continue;
            }
            let outer = total / (n * stride);
            let mut buf = vec![C64::new(0.0, 0.0); n];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for i in 0..n {
                        buf[i] = data[base + i * stride];
                    }
                    plans[a].process(&mut buf);
                    for i in 0..n {
                        data[base + i * stride] = buf[i];
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform of real samples.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<C64> {
        let mut data: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    /// Inverse transform, normalized, real part.
    pub(crate) fn inverse_real(&self, mut spec: Vec<C64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inv);
        let scale = 1.0 / spec.len() as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    pub(crate) fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.d()).rev() {
            out[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
        out
    }

    pub(crate) fn mode(&self, idx: usize) -> [i64; 3] {
        let mi = self.multi_index(idx);
        let mut out = [0; 3];
        for a in 0..self.d() {
            out[a] = self.modes[a][mi[a]];
        }
        out
    }

    pub(crate) fn wavevector(&self, idx: usize) -> [f64; 3] {
        let mi = self.multi_index(idx);
        let mut out = [0.0; 3];
        for a in 0..self.d() {
            out[a] = self.kappa[a][mi[a]];
        }
        out
    }

    fn is_nyquist(&self, axis: usize, i: usize) -> bool {
        i == self.dims[axis] / 2
    }

    /// `|κ|²` at a flat index, so that Δ has symbol `−|κ|²`.
    pub(crate) fn laplacian_symbol(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[..self.d()].iter().map(|v| v * v).sum()
    }

    /// Symbol of `∂^orders`. Odd derivatives drop the Nyquist mode.
    pub(crate) fn derivative_symbol(&self, idx: usize, orders: [usize; 3]) -> C64 {
        let mi = self.multi_index(idx);
        let mut out = C64::new(1.0, 0.0);
        for a in 0..self.d() {
            let o = orders[a];
            if o == 0 {
                continue;
            }
            if o % 2 == 1 && self.is_nyquist(a, mi[a]) {
                return C64::new(0.0, 0.0);
            }
            let ik = C64::new(0.0, self.kappa[a][mi[a]]);
            for _ in 0..o {
                out *= ik;
            }
        }
        out
    }

    pub(crate) fn derivative(&self, spec: &[C64], orders: [usize; 3]) -> Vec<C64> {
        spec.iter()
            .enumerate()
            .map(|(i, c)| c * self.derivative_symbol(i, orders))
            .collect()
    }

    /// Real samples of `∂^orders u` from the spectrum of `u`.
    pub(crate) fn derivative_values(&self, spec: &[C64], orders: [usize; 3]) -> Vec<f64> {
        if orders == [0, 0, 0] {
            return self.inverse_real(spec.to_vec());
        }
        self.inverse_real(self.derivative(spec, orders))
    }

    /// Two-thirds rule: keeps `|m_a| ≤ N_a/3` on every axis.
    pub(crate) fn dealias(&self, spec: &mut [C64]) {
        for (i, c) in spec.iter_mut().enumerate() {
            let m = self.mode(i);
            if (0..self.d()).any(|a| 3 * m[a].unsigned_abs() as usize > self.dims[a]) {
                *c = C64::new(0.0, 0.0);
            }
        }
    }

    /// Fraction of spectral energy outside the two-thirds box.
    pub(crate) fn tail_fraction(&self, spec: &[C64]) -> f64 {
        let mut total = 0.0;
        let mut tail = 0.0;
        for (i, c) in spec.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            let m = self.mode(i);
            if (0..self.d()).any(|a| 3 * m[a].unsigned_abs() as usize > self.dims[a]) {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Zero-pads a spectrum onto a grid `factor` times finer per axis and
    /// returns the spectrum there, scaled for `Spectral::inverse_real` on the
    /// fine grid. Nyquist coefficients are split between ±N/2.
    pub(crate) fn padded(&self, spec: &[C64], factor: usize) -> (Vec<usize>, Vec<C64>) {
        let d = self.d();
        let fine: Vec<usize> = self.dims.iter().map(|&n| n * factor).collect();
        let fine_len: usize = fine.iter().product();
        let scale = fine_len as f64 / self.len() as f64;
        let mut out = vec![C64::new(0.0, 0.0); fine_len];
        for (i, &c) in spec.iter().enumerate() {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mi = self.multi_index(i);
            let m = self.mode(i);
            // Every Nyquist axis doubles the number of targets.
            let nyq: Vec<usize> = (0..d).filter(|&a| self.is_nyquist(a, mi[a])).collect();
            let copies = 1usize << nyq.len();
            let share = c * (scale / copies as f64);
            for mask in 0..copies {
                let mut idx = 0;
                for a in 0..d {
                    let mut ma = m[a];
                    if let Some(p) = nyq.iter().position(|&x| x == a) {
                        if mask & (1 << p) != 0 {
                            ma = -ma;
                        }
                    }
                    let ia = ma.rem_euclid(fine[a] as i64) as usize;
                    idx = idx * fine[a] + ia;
                }
                out[idx] += share;
            }
        }
        (fine, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::torus::{ScalarField, TorusGrid};

    #[test]
    fn round_trip_is_identity() {
        for (d, n) in [(1, 32), (2, 16), (3, 8)] {
            let g = TorusGrid::new(d, n).unwrap();
            let u = ScalarField::random_band_limited(&g, 3, &mut rng::seeded(1)).unwrap();
            let s = Spectral::for_grid(&g);
            let back = s.inverse_real(s.forward(u.values()));
            let err = back.iter().zip(u.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-12 * u.max_abs().max(1.0), "{err}");
        }
    }

    #[test]
    fn derivatives_of_trig_modes() {
        let g = TorusGrid::new(2, 32).unwrap();
        let u = ScalarField::from_fn(&g, |x| (2.0 * x[0]).sin() * x[1].cos());
        let s = Spectral::for_grid(&g);
        let spec = s.forward(u.values());
        let dx = s.derivative_values(&spec, [1, 0, 0]);
        let dxy = s.derivative_values(&spec, [1, 1, 0]);
        for i in 0..g.len() {
            let x = g.coords(i);
            assert!((dx[i] - 2.0 * (2.0 * x[0]).cos() * x[1].cos()).abs() < 1e-12);
            assert!((dxy[i] + 2.0 * (2.0 * x[0]).cos() * x[1].sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn non_square_periods() {
        let g = TorusGrid::with_periods(vec![16, 32], vec![1.0, 3.0]).unwrap();
        let w = 2.0 * PI / 3.0;
        let u = ScalarField::from_fn(&g, |x| (w * x[1]).cos());
        let s = Spectral::for_grid(&g);
        let lap = s.inverse_real(
            s.forward(u.values())
                .iter()
                .enumerate()
                .map(|(i, c)| c * -s.laplacian_symbol(i))
                .collect(),
        );
        for i in 0..g.len() {
            assert!((lap[i] + w * w * u.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_interpolates() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = |x: &[f64]| (3.0 * x[0] + x[1]).sin() + 0.5 * (2.0 * x[1]).cos();
        let u = ScalarField::from_fn(&g, f);
        let s = Spectral::for_grid(&g);
        let (fine, spec) = s.padded(&s.forward(u.values()), 4);
        let fs = Spectral::new(&fine, g.periods());
        let vals = fs.inverse_real(spec);
        let fg = TorusGrid::new(2, 64).unwrap();
        for i in 0..fg.len() {
            assert!((vals[i] - f(&fg.coords(i)[..2])).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_and_dealias() {
        let g = TorusGrid::new(1, 32).unwrap();
        let s = Spectral::for_grid(&g);
        let low = s.forward(ScalarField::from_fn(&g, |x| x[0].cos()).values());
        assert!(s.tail_fraction(&low) < 1e-30);
        let mut high = s.forward(ScalarField::from_fn(&g, |x| (14.0 * x[0]).cos()).values());
        assert!(s.tail_fraction(&high) > 0.99);
        s.dealias(&mut high);
        assert!(high.iter().all(|c| c.norm() < 1e-9));
    }
}
