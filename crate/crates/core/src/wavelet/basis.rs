use serde::{Deserialize, Serialize};

use super::family::WaveletFamily;
use super::table::DyadicTable;
use crate::error::{Error, Result};
use crate::func::RealFn;

/// Periodized scaling functions and wavelets on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PeriodizedBasis {
    family: WaveletFamily,
    table: DyadicTable,
    m1: u32,
}

/// Which generator a basis element is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Scaling,
    Wavelet,
}

impl PeriodizedBasis {
    pub const DEFAULT_RESOLUTION: u32 = 12;

    pub fn new(family: WaveletFamily, p: u32) -> Result<Self> {
        let table = DyadicTable::tabulate(&family, p)?;
        let m1 = family.min_level();
        Ok(Self { family, table, m1 })
    }

    pub fn daubechies(n: usize) -> Result<Self> {
        Self::new(WaveletFamily::daubechies(n)?, Self::DEFAULT_RESOLUTION)
    }

    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    pub fn table(&self) -> &DyadicTable {
        &self.table
    }

    pub fn min_level(&self) -> u32 {
        self.m1
    }

    pub fn support(&self, gen: Generator) -> (i64, i64) {
        match gen {
            Generator::Scaling => self.family.phi_support(),
            Generator::Wavelet => self.family.psi_support(),
        }
    }

    fn check_level(&self, m: u32) -> Result<()> {
        if m < self.m1 {
            return Err(Error::Level(format!(
                "level {m} is below the minimal level {}",
                self.m1
            )));
        }
        if m > 40 {
            return Err(Error::Level(format!("level {m} is too fine")));
        }
        Ok(())
    }

    /// `phi_{mk}(x)`, periodic in both `k` (mod `2^m`) and `x` (mod 1).
    pub fn eval_scaling(&self, m: u32, k: i64, x: f64) -> Result<f64> {
        self.check_level(m)?;
        Ok(self.element(Generator::Scaling, m, k, x))
    }

    /// `psi_{jk}(x)`, periodic in both `k` (mod `2^j`) and `x` (mod 1).
    pub fn eval_wavelet(&self, j: u32, k: i64, x: f64) -> Result<f64> {
        self.check_level(j)?;
        Ok(self.element(Generator::Wavelet, j, k, x))
    }

    /// Unchecked evaluation; the level must be at least `min_level`.
    #[inline]
    pub fn element(&self, gen: Generator, m: u32, k: i64, x: f64) -> f64 {
        let (lo, _) = self.support(gen);
        let size = (1u64 << m) as f64;
        let t = size * x.rem_euclid(1.0) - k.rem_euclid(1i64 << m) as f64;
        let t = lo as f64 + (t - lo as f64).rem_euclid(size);
        size.sqrt() * self.mother(gen, t)
    }

    #[inline]
    pub fn mother(&self, gen: Generator, t: f64) -> f64 {
        match gen {
            Generator::Scaling => self.table.phi(t),
            Generator::Wavelet => self.table.psi(t),
        }
    }

    /// Calls `visit(k, value)` for every index whose basis element may be
    /// nonzero at `x`. `k` is reduced modulo `2^m`.
    #[inline]
    pub fn for_each_at(&self, gen: Generator, m: u32, x: f64, mut visit: impl FnMut(usize, f64)) {
        let (lo, hi) = self.support(gen);
        let size = 1i64 << m;
        let t = size as f64 * x.rem_euclid(1.0);
        let amp = (size as f64).sqrt();
        let first = (t - hi as f64).floor() as i64 + 1;
        let last = (t - lo as f64).floor() as i64;
        for k in first..=last {
            let v = self.mother(gen, t - k as f64);
            if v != 0.0 {
                visit(k.rem_euclid(size) as usize, amp * v);
            }
        }
    }

    /// Orthogonal projection onto `V_m + W_m + ... + W_{J-1}` by composite
    /// trapezoid quadrature on a dyadic grid finer than both `2^J` and the table.
    pub fn project(&self, f: &dyn RealFn, m: u32, big_j: u32) -> Result<CoefficientTree> {
        self.check_level(m)?;
        if big_j <= m {
            return Err(Error::Level(format!(
                "finest level {big_j} must exceed {m}"
            )));
        }
        let q = (big_j + 6)
            .max(self.table.resolution() + m)
            .min(22)
            .max(big_j);
        let nodes = 1usize << q;
        let hstep = 1.0 / nodes as f64;
        let mut samples: Vec<f64> = (0..nodes).map(|i| f.eval(i as f64 * hstep)).collect();
        samples[0] = 0.5 * (f.eval(0.0) + f.eval(1.0));

        let a = self.project_level(&samples, q, Generator::Scaling, m);
        let b = (m..big_j)
            .map(|j| self.project_level(&samples, q, Generator::Wavelet, j))
            .collect();
        Ok(CoefficientTree { m, a, b })
    }

    fn project_level(&self, samples: &[f64], q: u32, gen: Generator, j: u32) -> Vec<f64> {
        let nodes = samples.len();
        let mut out = vec![0.0; 1 << j];
        let shift = q - j;
        let (lo, hi) = self.support(gen);
        let amp = ((1u64 << j) as f64).sqrt();
        let inv = (-(shift as f64)).exp2();
        for (k, slot) in out.iter_mut().enumerate() {
            let start = (k as i64 + lo) << shift;
            let end = (k as i64 + hi) << shift;
            let mut acc = 0.0;
            for i in start..end {
                let t = (i - start) as f64 * inv + lo as f64;
                let v = self.mother(gen, t);
                if v != 0.0 {
                    acc += v * samples[i.rem_euclid(nodes as i64) as usize];
                }
            }
            *slot = acc * amp / nodes as f64;
        }
        out
    }
}

/// Scaling coefficients at a coarse level plus wavelet coefficients up to `J-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTree {
    pub m: u32,
    pub a: Vec<f64>,
    pub b: Vec<Vec<f64>>,
}

impl CoefficientTree {
    pub fn zeros(m: u32, big_j: u32) -> Self {
        Self {
            m,
            a: vec![0.0; 1 << m],
            b: (m..big_j).map(|j| vec![0.0; 1 << j]).collect(),
        }
    }

    pub fn finest_level(&self) -> u32 {
        self.m + self.b.len() as u32
    }

    pub fn wavelet_level(&self, j: u32) -> &[f64] {
        &self.b[(j - self.m) as usize]
    }

    pub fn energy(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>()
            + self.b.iter().flatten().map(|v| v * v).sum::<f64>()
    }

    pub fn is_well_formed(&self) -> bool {
        self.a.len() == 1 << self.m
            && self
                .b
                .iter()
                .enumerate()
                .all(|(i, lvl)| lvl.len() == 1 << (self.m + i as u32))
    }

    /// Pointwise synthesis, summing only terms whose supports contain `x`.
    pub fn reconstruct(&self, basis: &PeriodizedBasis, x: f64) -> f64 {
        let mut acc = 0.0;
        basis.for_each_at(Generator::Scaling, self.m, x, |k, v| acc += self.a[k] * v);
        for (i, level) in self.b.iter().enumerate() {
            let j = self.m + i as u32;
            basis.for_each_at(Generator::Wavelet, j, x, |k, v| acc += level[k] * v);
        }
        acc
    }
}

/// Coefficient tree bound to its basis, usable as an evaluable function.
#[derive(Debug, Clone)]
pub struct Expansion<'a> {
    pub basis: &'a PeriodizedBasis,
    pub tree: &'a CoefficientTree,
}

impl RealFn for Expansion<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.tree.reconstruct(self.basis, x)
    }
}
