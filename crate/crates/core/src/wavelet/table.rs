use nalgebra::{DMatrix, DVector};
use std::f64::consts::SQRT_2;

use super::family::WaveletFamily;
use crate::error::{Error, Result};

/// Values of `phi*` and `psi*` at the dyadic nodes `L + i 2^-P` of their supports.
///
/// Both sequences include the right endpoint, where the value is zero.
#[derive(Debug, Clone)]
pub struct DyadicTable {
    p: u32,
    phi_lo: i64,
    psi_lo: i64,
    phi: Vec<f64>,
    psi: Vec<f64>,
    step_interp: bool,
}

impl DyadicTable {
    /// Evaluates the family on the dyadic grid of spacing `2^-p` by the cascade
    /// recursion started from the integer values of `phi*`.
    pub fn tabulate(family: &WaveletFamily, p: u32) -> Result<Self> {
        if !(8..=16).contains(&p) {
            return Err(Error::Config(format!(
                "table resolution {p} outside 8..=16"
            )));
        }
        let h = family.lowpass();
        let (lo, hi) = family.phi_support();
        let width = (hi - lo) as usize;
        let scale = 1usize << p;
        let len = width * scale + 1;
        let mut phi = vec![0.0; len];

        let ints = integer_values(family)?;
        for (i, v) in ints.iter().enumerate() {
            phi[i * scale] = *v;
        }

        // fill odd multiples of 2^-level from the coarser level
        for level in 1..=p {
            let stride = 1usize << (p - level);
            let mut idx = stride;
            while idx < len {
                if (idx / stride) % 2 == 1 {
                    phi[idx] = refine(&phi, h, lo, scale, idx as i64);
                }
                idx += 2 * stride;
            }
        }

        let (qlo, qhi) = family.psi_support();
        let qlen = (qhi - qlo) as usize * scale + 1;
        let g = family.highpass();
        let mut psi = vec![0.0; qlen];
        for (i, slot) in psi.iter_mut().enumerate() {
            // psi(x) = sqrt2 sum_k g_k phi(2x - k), x = qlo + i 2^-p
            let mut acc = 0.0;
            for &(k, gk) in &g {
                let pos = 2 * (qlo * scale as i64 + i as i64) - (k + lo) * scale as i64;
                if pos >= 0 && (pos as usize) < len {
                    acc += gk * phi[pos as usize];
                }
            }
            *slot = SQRT_2 * acc;
        }

        let table = Self {
            p,
            phi_lo: lo,
            psi_lo: qlo,
            phi,
            psi,
            step_interp: family.is_haar(),
        };
        let dx = table.spacing();
        let mass: f64 = table.phi.iter().sum::<f64>() * dx;
        let energy: f64 = table.phi.iter().map(|v| v * v).sum::<f64>() * dx;
        if !mass.is_finite() || (mass - 1.0).abs() > 1e-6 || (energy - 1.0).abs() > 1e-3 {
            return Err(Error::Numeric(format!(
                "cascade did not converge to an orthonormal scaling function (mass {mass}, energy {energy})"
            )));
        }
        Ok(table)
    }

    pub fn resolution(&self) -> u32 {
        self.p
    }

    pub fn spacing(&self) -> f64 {
        (-(self.p as f64)).exp2()
    }

    /// `phi*` on the half-open support `[L, U)`.
    pub fn phi_values(&self) -> &[f64] {
        &self.phi[..self.phi.len() - 1]
    }

    /// `psi*` on the half-open support `[L, U)`.
    pub fn psi_values(&self) -> &[f64] {
        &self.psi[..self.psi.len() - 1]
    }

    pub fn phi_sup(&self) -> f64 {
        self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn psi_sup(&self) -> f64 {
        self.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        lookup(&self.phi, self.phi_lo, self.p, t, self.step_interp)
    }

    #[inline]
    pub fn psi(&self, t: f64) -> f64 {
        lookup(&self.psi, self.psi_lo, self.p, t, self.step_interp)
    }
}

#[inline]
fn lookup(vals: &[f64], lo: i64, p: u32, t: f64, step: bool) -> f64 {
    let pos = (t - lo as f64) * (p as f64).exp2();
    if !(pos >= 0.0) {
        return 0.0;
    }
    let i = pos.floor();
    let iu = i as usize;
    if iu + 1 >= vals.len() {
        return if iu + 1 == vals.len() && pos == i {
            vals[iu]
        } else {
            0.0
        };
    }
    let frac = pos - i;
    if step || frac == 0.0 {
        vals[iu]
    } else {
        vals[iu] * (1.0 - frac) + vals[iu + 1] * frac
    }
}

fn refine(phi: &[f64], h: &[f64], lo: i64, scale: usize, idx: i64) -> f64 {
    // x = lo + idx/scale; phi(x) = sqrt2 sum_k h_k phi(2x - k)
    let mut acc = 0.0;
    for (k, hk) in h.iter().enumerate() {
        let pos = 2 * idx + (lo - k as i64) * scale as i64;
        if pos >= 0 && (pos as usize) < phi.len() {
            acc += hk * phi[pos as usize];
        }
    }
    SQRT_2 * acc
}

/// `phi*` at the integers of its support: the eigenvector of the two-scale
/// operator for eigenvalue one, normalized to unit sum.
fn integer_values(family: &WaveletFamily) -> Result<Vec<f64>> {
    let (lo, hi) = family.phi_support();
    let n = (hi - lo + 1) as usize;
    if family.is_haar() {
        // right-continuous convention on [0, 1)
        return Ok(vec![1.0, 0.0]);
    }
    let h = family.lowpass();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let k = 2 * (i as i64 + lo) - (j as i64 + lo);
            if k >= 0 && (k as usize) < h.len() {
                m[(i, j)] = SQRT_2 * h[k as usize];
            }
        }
        m[(i, i)] -= 1.0;
    }
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let v = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("two-scale eigenproblem is singular".into()))?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("two-scale eigenvector is not finite".into()));
    }
    Ok(v.iter().copied().collect())
}
