//! Band-limited real functions on the circle.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{FrechetError, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// A real trigonometric polynomial `Σ_{|k| ≤ B} c_k e^{ikx}`.
///
/// Only `c_0, …, c_B` are stored; negative modes are implied by
/// `c_{−k} = conj(c_k)`, so every value of this type is real-valued.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicFunction {
    coeffs: Vec<Complex64>,
}

impl PeriodicFunction {
    /// Builds from non-negative modes; `c_0` must be real.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(FrechetError::Domain("need at least the zero mode".into()));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(FrechetError::Domain("non-finite Fourier coefficient".into()));
        }
        if coeffs[0].im != 0.0 {
            return Err(FrechetError::Domain("zero mode must be real".into()));
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_raw(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(bandwidth: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); bandwidth + 1],
        }
    }

    /// `a·cos(kx) + b·sin(kx)` at the given bandwidth.
    pub fn mode(bandwidth: usize, k: usize, a: f64, b: f64) -> Result<Self> {
        if k > bandwidth {
            return Err(FrechetError::Domain(format!(
                "mode {k} exceeds bandwidth {bandwidth}"
            )));
        }
        let mut f = Self::zero(bandwidth);
        f.coeffs[k] = if k == 0 {
            Complex64::new(a, 0.0)
        } else {
            Complex64::new(a / 2.0, -b / 2.0)
        };
        Ok(f)
    }

    pub fn sin(bandwidth: usize, k: usize) -> Result<Self> {
        Self::mode(bandwidth, k, 0.0, 1.0)
    }

    pub fn cos(bandwidth: usize, k: usize) -> Result<Self> {
        Self::mode(bandwidth, k, 1.0, 0.0)
    }

    pub fn bandwidth(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// The `order`-th derivative: multiplies `c_k` by `(ik)^order`.
    pub fn derivative(&self, order: u32) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::new(0.0, k as f64).powu(order))
            .collect();
        Self { coeffs }
    }

    /// Point evaluation by direct summation.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivs(x).0
    }

    /// `(f(x), f'(x), f''(x))`.
    fn eval_with_derivs(&self, x: f64) -> (f64, f64, f64) {
        let mut v = self.coeffs[0].re;
        let (mut d1, mut d2) = (0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            let e = Complex64::from_polar(1.0, kf * x);
            let t = c * e;
            v += 2.0 * t.re;
            d1 += -2.0 * kf * t.im;
            d2 += -2.0 * kf * kf * t.re;
        }
        (v, d1, d2)
    }

    /// Values on the uniform grid `x_j = 2πj/m`, `m > 2B`.
    pub fn sample(&self, m: usize) -> Vec<f64> {
        assert!(m > 2 * self.bandwidth(), "grid too coarse for bandwidth");
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[0] = self.coeffs[0];
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            buf[k] = 2.0 * c;
        }
        PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m).process(&mut buf));
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Projects uniform samples of a real function onto modes `0..=bandwidth`.
    pub fn from_samples(values: &[f64], bandwidth: usize) -> Result<Self> {
        let m = values.len();
        if m <= 2 * bandwidth {
            return Err(FrechetError::Shape(format!(
                "{m} samples cannot resolve bandwidth {bandwidth}"
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m).process(&mut buf));
        let scale = 1.0 / m as f64;
        let mut coeffs: Vec<Complex64> = buf[..=bandwidth].iter().map(|c| c * scale).collect();
        coeffs[0].im = 0.0;
        Self::new(coeffs)
    }

    /// `sup_x |f(x)|`: grid maximum on at least `8B` points, refined by
    /// Newton iteration on `f' = 0` around the largest grid peaks.
    pub fn sup_norm(&self) -> f64 {
        let b = self.bandwidth();
        if b == 0 {
            return self.coeffs[0].re.abs();
        }
        if self.coeffs.iter().all(|c| c.norm_sqr() == 0.0) {
            return 0.0;
        }
        let m = (8 * b).max(16).next_power_of_two();
        let values = self.sample(m);
        let h = 2.0 * PI / m as f64;
        let mut peaks: Vec<(usize, f64)> = (0..m)
            .filter(|&j| {
                let a = values[j].abs();
                a >= values[(j + m - 1) % m].abs() && a >= values[(j + 1) % m].abs()
            })
            .map(|j| (j, values[j].abs()))
            .collect();
        peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut best = peaks.first().map_or(0.0, |p| p.1);
        for &(j, _) in peaks.iter().take(4) {
            let x0 = j as f64 * h;
            let mut x = x0;
            for _ in 0..8 {
                let (_, d1, d2) = self.eval_with_derivs(x);
                if d2 == 0.0 {
                    break;
                }
                let step = d1 / d2;
                x -= step;
                if (x - x0).abs() > h {
                    x = x0;
                    break;
                }
                if step.abs() < 1e-15 {
                    break;
                }
            }
            best = best.max(self.eval(x).abs());
        }
        best
    }

    /// `Σ_{i ≤ n} sup|f^{(i)}|` for `n = 0..depth`.
    pub fn ladder_values(&self, depth: usize) -> Vec<f64> {
        let mut acc = 0.0;
        (0..depth)
            .map(|i| {
                acc += self.derivative(i as u32).sup_norm();
                acc
            })
            .collect()
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(FrechetError::Shape(format!(
                "bandwidth {} vs {}",
                self.bandwidth(),
                other.bandwidth()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }
}

/// `f_K(x) = K^{-1} sin(K² x)`.
pub fn make_fk(k: usize, bandwidth: usize) -> Result<PeriodicFunction> {
    if k == 0 {
        return Err(FrechetError::Domain("K must be positive".into()));
    }
    let freq = k * k;
    if bandwidth < freq {
        return Err(FrechetError::Domain(format!(
            "bandwidth {bandwidth} below K² = {freq}"
        )));
    }
    PeriodicFunction::mode(bandwidth, freq, 0.0, 1.0 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_sup(f: &PeriodicFunction) -> f64 {
        (0..200_000)
            .map(|j| f.eval(2.0 * PI * j as f64 / 200_000.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn sin_ladder() {
        let f = PeriodicFunction::sin(8, 1).unwrap();
        let l = f.ladder_values(3);
        for (got, want) in l.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn sample_matches_eval() {
        let f = PeriodicFunction::new(vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(0.1, -0.4),
            Complex64::new(-0.2, 0.05),
        ])
        .unwrap();
        let s = f.sample(16);
        for (j, v) in s.iter().enumerate() {
            assert!((v - f.eval(2.0 * PI * j as f64 / 16.0)).abs() < 1e-14);
        }
        let back = PeriodicFunction::from_samples(&s, 2).unwrap();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn sup_norm_against_dense_grid() {
        let f = PeriodicFunction::new(vec![
            Complex64::new(0.1, 0.0),
            Complex64::new(0.37, -0.21),
            Complex64::new(-0.05, 0.44),
            Complex64::new(0.12, 0.3),
        ])
        .unwrap();
        let s = f.sup_norm();
        let oracle = dense_sup(&f);
        assert!(s >= oracle - 1e-12 && s - oracle < 1e-9, "{s} vs {oracle}");
    }

    #[test]
    fn fk_values() {
        let f2 = make_fk(2, 8).unwrap();
        assert!((f2.sup_norm() - 0.5).abs() < 1e-14);
        assert!((f2.derivative(1).sup_norm() - 2.0).abs() < 1e-13);
        let l = f2.ladder_values(2);
        assert!((l[0] - 0.5).abs() < 1e-14 && (l[1] - 2.5).abs() < 1e-13);
        let f3 = make_fk(3, 9).unwrap();
        assert!((f3.sup_norm() - 1.0 / 3.0).abs() < 1e-14);
        assert!((f3.derivative(1).sup_norm() - 3.0).abs() < 1e-13);
        assert!(make_fk(3, 8).is_err());
    }
}
