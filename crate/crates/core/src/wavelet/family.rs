use num_complex::Complex64;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Compactly supported orthonormal wavelet family described by its low-pass filter.
///
/// Supports follow the Daubechies convention: `phi` lives on `[0, 2N-1]` and
/// `psi` on `[1-N, N]`, with the high-pass filter `g_k = (-1)^k h_{1-k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFamily {
    vanishing_moments: usize,
    h: Vec<f64>,
    phi_support: (i64, i64),
    psi_support: (i64, i64),
}

impl WaveletFamily {
    /// Extremal-phase Daubechies family with `n` vanishing moments (`n = 1` is Haar).
    pub fn daubechies(n: usize) -> Result<Self> {
        if !(1..=10).contains(&n) {
            return Err(Error::Config(format!(
                "unsupported number of vanishing moments {n} (expected 1..=10)"
            )));
        }
        let h = if n == 1 {
            vec![1.0 / SQRT_2, 1.0 / SQRT_2]
        } else {
            daubechies_filter(n)?
        };
        Ok(Self::from_parts(n, h))
    }

    pub fn haar() -> Self {
        Self::from_parts(1, vec![1.0 / SQRT_2, 1.0 / SQRT_2])
    }

    /// Wraps an arbitrary even-length low-pass filter. Only the normalization
    /// `sum h = sqrt(2)` is checked; orthonormality failures surface when the
    /// filter is tabulated.
    pub fn from_filter(h: Vec<f64>) -> Result<Self> {
        if h.len() < 2 || h.len() % 2 != 0 {
            return Err(Error::Config("filter length must be even and >= 2".into()));
        }
        let sum: f64 = h.iter().sum();
        if (sum - SQRT_2).abs() > 1e-8 {
            return Err(Error::Config(format!(
                "filter sums to {sum}, expected sqrt(2)"
            )));
        }
        let n = h.len() / 2;
        Ok(Self::from_parts(n, h))
    }

    fn from_parts(n: usize, h: Vec<f64>) -> Self {
        let len = h.len() as i64;
        let half = len / 2;
        Self {
            vanishing_moments: n,
            h,
            phi_support: (0, len - 1),
            psi_support: (1 - half, half),
        }
    }

    pub fn vanishing_moments(&self) -> usize {
        self.vanishing_moments
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.h
    }

    /// High-pass coefficients as `(k, g_k)` pairs, `k` running over `2-2N..=1`.
    pub fn highpass(&self) -> Vec<(i64, f64)> {
        let len = self.h.len() as i64;
        (2 - len..=1)
            .map(|k| {
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                (k, sign * self.h[(1 - k) as usize])
            })
            .collect()
    }

    pub fn phi_support(&self) -> (i64, i64) {
        self.phi_support
    }

    pub fn psi_support(&self) -> (i64, i64) {
        self.psi_support
    }

    pub fn is_haar(&self) -> bool {
        self.h.len() == 2
    }

    /// Smallest level whose periodized supports coincide with the non-periodic ones.
    pub fn min_level(&self) -> u32 {
        let (lp, up) = self.phi_support;
        let (lq, uq) = self.psi_support;
        let width = (up - lp).max(uq - lq);
        let mut m = 0u32;
        while (1i64 << m) <= width {
            m += 1;
        }
        m
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Spectral factorization of `|m0|^2 = cos^{2N}(w/2) P(sin^2(w/2))`, keeping
/// the roots inside the unit circle.
fn daubechies_filter(n: usize) -> Result<Vec<f64>> {
    // P(y) = sum_{k<N} C(N-1+k, k) y^k, ascending coefficients
    let p: Vec<f64> = (0..n as u64)
        .map(|k| binomial(n as u64 - 1 + k, k))
        .collect();
    let y_roots = poly_roots(&p)?;

    let mut q = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..n {
        q = poly_mul(&q, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    for y in y_roots {
        let s = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (s * s - 4.0).sqrt();
        let z1 = (s + disc) / 2.0;
        let z2 = (s - disc) / 2.0;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        q = poly_mul(&q, &[-z, Complex64::new(1.0, 0.0)]);
    }
    let total: f64 = q.iter().map(|c| c.re).sum();
    let scale = SQRT_2 / total;
    Ok(q.iter().rev().map(|c| c.re * scale).collect())
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn poly_deriv_eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (i, &a)| {
            acc * z + a * i as f64
        })
}

/// Durand-Kerner iteration followed by Newton polishing. `c` is ascending.
fn poly_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let monic: Vec<f64> = c.iter().map(|a| a / lead).collect();
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    let mut converged = false;
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..deg {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, zj) in roots.iter().enumerate() {
                if i != j {
                    denom *= zi - zj;
                }
            }
            let step = poly_eval(&monic, zi) / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm() / zi.norm().max(1.0));
        }
        if delta < 1e-15 {
            converged = true;
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..5 {
            let d = poly_deriv_eval(&monic, *r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= poly_eval(&monic, *r) / d;
        }
    }
    let worst = roots
        .iter()
        .map(|r| poly_eval(&monic, *r).norm())
        .fold(0.0f64, f64::max);
    if !converged && worst > 1e-8 {
        return Err(Error::Numeric(
            "polynomial root finding did not converge".into(),
        ));
    }
    Ok(roots)
}
