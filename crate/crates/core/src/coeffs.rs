//! Inverse-density weighted coefficient estimates, resolution bounds and the
//! hard-threshold rules.

use serde::{Deserialize, Serialize};

use crate::design::DesignDensity;
use crate::error::{Error, Result};
use crate::wavelet::{CoefficientTree, Generator, PeriodizedBasis, WaveletFamily};
use crate::zero_affected::{circular_distance, hit_indices};

/// Coarsest admissible level `m1` and the finest level `J` for a sample of size `n`.
///
/// `2^J` is `(n / ln n)^{1/(alpha+1)}` for a polynomial zero and
/// `(ln n)^{2/beta}` for an exponential one, rounded down.
pub fn levels(
    n: usize,
    family: &WaveletFamily,
    alpha: f64,
    b: f64,
    beta: f64,
) -> Result<(u32, u32)> {
    if n < 3 {
        return Err(Error::SampleSize(format!(
            "need at least 3 observations, got {n}"
        )));
    }
    let m1 = family.min_level();
    let big_j = finest_level((n as f64).ln(), alpha, b, beta);
    if big_j <= m1 {
        return Err(Error::SampleSize(format!(
            "finest level {big_j} does not exceed the minimal level {m1} at n = {n}"
        )));
    }
    Ok((m1, big_j))
}

fn finest_level(ln_n: f64, alpha: f64, b: f64, beta: f64) -> u32 {
    let target = if b == 0.0 {
        (ln_n.exp() / ln_n).powf(1.0 / (alpha + 1.0))
    } else {
        ln_n.powf(2.0 / beta)
    };
    target.log2().floor().max(0.0) as u32
}

fn weighted_sum(
    xs: &[f64],
    ys: &[f64],
    density: &DesignDensity,
    basis: &PeriodizedBasis,
    gen: Generator,
    level: u32,
    k: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let v = basis.element(gen, level, k as i64, x);
        if v == 0.0 {
            continue;
        }
        let g = density.eval_g(x);
        if g <= 0.0 {
            return Err(Error::ZeroDensityPoint { x });
        }
        acc += v * y / g;
    }
    Ok(acc / xs.len().max(1) as f64)
}

fn check_free(
    level: u32,
    k: usize,
    density: &DesignDensity,
    basis: &PeriodizedBasis,
    gen: Generator,
) -> Result<()> {
    if level < basis.min_level() {
        return Err(Error::Level(format!(
            "level {level} below minimal level {}",
            basis.min_level()
        )));
    }
    if k >= 1 << level {
        return Err(Error::Domain(format!(
            "index {k} out of range at level {level}"
        )));
    }
    if hit_indices(level, density.x0(), basis.support(gen)).contains(&k) {
        return Err(Error::ZeroAffectedIndex { level, index: k });
    }
    Ok(())
}

/// `n^-1 sum phi_mk(x_i) y_i / g(x_i)` for a zero-free index.
pub fn estimate_scaling_coeff(
    xs: &[f64],
    ys: &[f64],
    density: &DesignDensity,
    basis: &PeriodizedBasis,
    m: u32,
    k: usize,
) -> Result<f64> {
    check_free(m, k, density, basis, Generator::Scaling)?;
    weighted_sum(xs, ys, density, basis, Generator::Scaling, m, k)
}

/// `n^-1 sum psi_jk(x_i) y_i / g(x_i)` for a zero-free index.
pub fn estimate_wavelet_coeff(
    xs: &[f64],
    ys: &[f64],
    density: &DesignDensity,
    basis: &PeriodizedBasis,
    j: u32,
    k: usize,
) -> Result<f64> {
    check_free(j, k, density, basis, Generator::Wavelet)?;
    weighted_sum(xs, ys, density, basis, Generator::Wavelet, j, k)
}

/// Weighted sums for every index at every level in `coarse..fine`, computed in
/// one pass over the data. Entries touched by a point of zero density are NaN.
#[derive(Debug, Clone)]
pub struct CoefficientBank {
    coarse: u32,
    n: usize,
    x0: f64,
    scaling: Vec<Vec<f64>>,
    wavelet: Vec<Vec<f64>>,
    zero_point: Option<f64>,
}

impl CoefficientBank {
    pub fn compute(
        xs: &[f64],
        ys: &[f64],
        density: &DesignDensity,
        basis: &PeriodizedBasis,
        coarse: u32,
        fine: u32,
    ) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Input("x and y have different lengths".into()));
        }
        if xs.is_empty() {
            return Err(Error::Input("no observations".into()));
        }
        if coarse < basis.min_level() || fine <= coarse {
            return Err(Error::Level(format!(
                "invalid level range {coarse}..{fine}"
            )));
        }
        let mut scaling: Vec<Vec<f64>> = (coarse..fine).map(|l| vec![0.0; 1 << l]).collect();
        let mut wavelet = scaling.clone();
        let mut zero_point = None;
        for (&x, &y) in xs.iter().zip(ys) {
            let g = density.eval_g(x);
            let w = if g > 0.0 { y / g } else { f64::NAN };
            if g <= 0.0 {
                zero_point = Some(x);
            }
            for (i, l) in (coarse..fine).enumerate() {
                let (sa, sb) = (&mut scaling[i], &mut wavelet[i]);
                basis.for_each_at(Generator::Scaling, l, x, |k, v| sa[k] += v * w);
                basis.for_each_at(Generator::Wavelet, l, x, |k, v| sb[k] += v * w);
            }
        }
        let inv = 1.0 / xs.len() as f64;
        for v in scaling.iter_mut().chain(wavelet.iter_mut()).flatten() {
            *v *= inv;
        }
        Ok(Self {
            coarse,
            n: xs.len(),
            x0: density.x0(),
            scaling,
            wavelet,
            zero_point,
        })
    }

    pub fn fine(&self) -> u32 {
        self.coarse + self.scaling.len() as u32
    }

    fn get(&self, values: &[f64], k: usize) -> Result<f64> {
        let v = values[k];
        if v.is_nan() {
            return Err(Error::ZeroDensityPoint {
                x: self.zero_point.unwrap_or(f64::NAN),
            });
        }
        Ok(v)
    }

    pub fn scaling(&self, m: u32, k: usize) -> Result<f64> {
        self.get(&self.scaling[(m - self.coarse) as usize], k)
    }

    pub fn wavelet(&self, j: u32, k: usize) -> Result<f64> {
        self.get(&self.wavelet[(j - self.coarse) as usize], k)
    }

    /// Zero-free estimates with coarse level `m` and wavelet levels `m..fine`.
    pub fn tree(&self, basis: &PeriodizedBasis, m: u32) -> Result<EmpiricalTree> {
        if m < self.coarse || m >= self.fine() {
            return Err(Error::Level(format!("level {m} outside the bank")));
        }
        let hit_phi = hit_indices(m, self.x0, basis.support(Generator::Scaling));
        let a_hat = (0..1usize << m)
            .map(|k| {
                if hit_phi.contains(&k) {
                    Ok(None)
                } else {
                    self.scaling(m, k).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut b_tilde = Vec::new();
        let mut k0 = Vec::new();
        for j in m..self.fine() {
            let hit = hit_indices(j, self.x0, basis.support(Generator::Wavelet));
            let level = (0..1usize << j)
                .map(|k| {
                    if hit.contains(&k) {
                        Ok(None)
                    } else {
                        self.wavelet(j, k).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            b_tilde.push(level);
            k0.push((1u64 << j) as f64 * self.x0);
        }
        Ok(EmpiricalTree {
            m,
            a_hat,
            b_tilde,
            k0,
            n: self.n,
        })
    }

    /// Estimates for every index, zero-affected ones included. Only sensible
    /// when `1/g` is integrable.
    pub fn full_tree(&self, m: u32) -> Result<EmpiricalTree> {
        if m < self.coarse || m >= self.fine() {
            return Err(Error::Level(format!("level {m} outside the bank")));
        }
        let a_hat = (0..1usize << m)
            .map(|k| self.scaling(m, k).map(Some))
            .collect::<Result<Vec<_>>>()?;
        let b_tilde = (m..self.fine())
            .map(|j| {
                (0..1usize << j)
                    .map(|k| self.wavelet(j, k).map(Some))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let k0 = (m..self.fine())
            .map(|j| (1u64 << j) as f64 * self.x0)
            .collect();
        Ok(EmpiricalTree {
            m,
            a_hat,
            b_tilde,
            k0,
            n: self.n,
        })
    }
}

/// Raw coefficient estimates; `None` marks indices that are not estimated
/// by inverse weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTree {
    pub m: u32,
    pub a_hat: Vec<Option<f64>>,
    pub b_tilde: Vec<Vec<Option<f64>>>,
    /// `2^j x0` for each wavelet level.
    pub k0: Vec<f64>,
    pub n: usize,
}

impl EmpiricalTree {
    pub fn finest_level(&self) -> u32 {
        self.m + self.b_tilde.len() as u32
    }

    /// Coefficient tree with every wavelet estimate passed through `rule`.
    pub fn thresholded(&self, rule: &ThresholdRule) -> CoefficientTree {
        let a = self.a_hat.iter().map(|v| v.unwrap_or(0.0)).collect();
        let b = self
            .b_tilde
            .iter()
            .enumerate()
            .map(|(i, level)| {
                let j = self.m + i as u32;
                level
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v.map_or(0.0, |b| apply_threshold(rule, b, j, k, self.k0[i])))
                    .collect()
            })
            .collect();
        CoefficientTree { m: self.m, a, b }
    }

    /// Coefficient tree with all raw estimates kept.
    pub fn unthresholded(&self) -> CoefficientTree {
        CoefficientTree {
            m: self.m,
            a: self.a_hat.iter().map(|v| v.unwrap_or(0.0)).collect(),
            b: self
                .b_tilde
                .iter()
                .map(|l| l.iter().map(|v| v.unwrap_or(0.0)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    /// `b^2 > d^2 sigma^2 n^-1 ln n 2^{j alpha} |k - k0j|^-alpha`
    Polynomial,
    /// keep iff `|k - k0j| > 2^{j - m}`
    ExponentialBand,
    /// the polynomial test applied to every index
    Integrable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub kind: ThresholdKind,
    pub d: f64,
    pub n: usize,
    pub alpha: f64,
    /// Reference level of the exponential band.
    pub m: u32,
    /// Noise level multiplying the threshold; the theory takes it to be one.
    pub sigma: f64,
}

impl ThresholdRule {
    pub fn polynomial(d: f64, n: usize, alpha: f64, sigma: f64) -> Self {
        Self {
            kind: ThresholdKind::Polynomial,
            d,
            n,
            alpha,
            m: 0,
            sigma,
        }
    }

    pub fn exponential_band(m: u32) -> Self {
        Self {
            kind: ThresholdKind::ExponentialBand,
            d: 1.0,
            n: 0,
            alpha: 0.0,
            m,
            sigma: 1.0,
        }
    }

    pub fn integrable(d: f64, n: usize, alpha: f64, sigma: f64) -> Self {
        Self {
            kind: ThresholdKind::Integrable,
            ..Self::polynomial(d, n, alpha, sigma)
        }
    }

    /// Squared threshold at level `j` and circular distance `dist` from the
    /// zero. Distances below one are treated as one, so the index sitting on
    /// the zero keeps a finite threshold.
    pub fn squared_level(&self, j: u32, dist: f64) -> f64 {
        let n = self.n as f64;
        let base = self.d * self.d * self.sigma * self.sigma * n.ln() / n;
        base * (j as f64 * self.alpha).exp2() * dist.max(1.0).powf(-self.alpha)
    }
}

/// Returns `b_tilde` or zero; never rescales.
pub fn apply_threshold(rule: &ThresholdRule, b_tilde: f64, j: u32, k: usize, k0j: f64) -> f64 {
    if b_tilde == 0.0 {
        return 0.0;
    }
    let dist = circular_distance(k, k0j, j);
    let keep = match rule.kind {
        ThresholdKind::ExponentialBand => j < rule.m || dist > (1u64 << (j - rule.m)) as f64,
        ThresholdKind::Polynomial | ThresholdKind::Integrable => {
            b_tilde * b_tilde > rule.squared_level(j, dist)
        }
    };
    if keep {
        b_tilde
    } else {
        0.0
    }
}
