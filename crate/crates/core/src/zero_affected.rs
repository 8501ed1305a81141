//! The part of the expansion whose scaling functions touch the zero of the
//! design density: index bookkeeping, the local Gram system and its solution.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::{position_map, DesignDensity};
use crate::error::{Error, Result};
use crate::quad;
use crate::wavelet::{CoefficientTree, Generator, PeriodizedBasis, WaveletFamily};

/// Condition number above which the local solve logs a warning.
pub const CONDITION_WARNING: f64 = 1e8;

/// Hit/free split of one wavelet level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSets {
    pub level: u32,
    pub k0: f64,
    pub hit: Vec<usize>,
    pub free: Vec<usize>,
}

/// Partition of the indices at the coarse level `m` and the wavelet levels
/// above it into elements whose support reaches the zero and the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSets {
    pub level: u32,
    pub k0: f64,
    pub phi_hit: Vec<usize>,
    pub phi_free: Vec<usize>,
    pub psi: Vec<LevelSets>,
    /// Free scaling indices overlapping some zero-affected one.
    pub star: Vec<usize>,
}

impl IndexSets {
    pub fn psi_level(&self, j: u32) -> Option<&LevelSets> {
        self.psi.iter().find(|s| s.level == j)
    }
}

/// Whether some periodic image `offset + t size` satisfies `pred`.
fn some_image(offset: f64, size: f64, pred: impl Fn(f64) -> bool) -> bool {
    let r = offset.rem_euclid(size);
    (-3..=3).any(|t| pred(r + t as f64 * size))
}

/// Indices `k` at level `level` with `lo - 1 < k0 - k < hi + 1` modulo `2^level`.
pub fn hit_indices(level: u32, x0: f64, support: (i64, i64)) -> Vec<usize> {
    let size = (1u64 << level) as f64;
    let k0 = size * x0;
    let (lo, hi) = (support.0 as f64 - 1.0, support.1 as f64 + 1.0);
    (0..1usize << level)
        .filter(|&k| some_image(k0 - k as f64, size, |v| v > lo && v < hi))
        .collect()
}

/// Circular distance `|k - k0|` modulo `2^level`.
pub fn circular_distance(k: usize, k0: f64, level: u32) -> f64 {
    let size = (1u64 << level) as f64;
    let r = (k as f64 - k0).rem_euclid(size);
    r.min(size - r)
}

pub fn build_index_sets(
    m: u32,
    j_range: std::ops::Range<u32>,
    x0: f64,
    family: &WaveletFamily,
) -> Result<IndexSets> {
    if m < family.min_level() {
        return Err(Error::Level(format!(
            "level {m} is below the minimal level {}",
            family.min_level()
        )));
    }
    let complement = |level: u32, hit: &[usize]| -> Vec<usize> {
        let mut mark = vec![false; 1 << level];
        for &k in hit {
            mark[k] = true;
        }
        (0..1usize << level).filter(|&k| !mark[k]).collect()
    };
    let (lp, up) = family.phi_support();
    let phi_hit = hit_indices(m, x0, (lp, up));
    let phi_free = complement(m, &phi_hit);
    let size = (1u64 << m) as f64;
    let k0 = size * x0;
    let (lp, up) = (lp as f64, up as f64);
    let star = phi_free
        .iter()
        .copied()
        .filter(|&k| {
            some_image(k0 - k as f64, size, |v| {
                (v >= 2.0 * lp - up && v < lp) || (v > up && v <= 2.0 * up - lp)
            })
        })
        .collect();
    let psi = j_range
        .map(|j| {
            let hit = hit_indices(j, x0, family.psi_support());
            let free = complement(j, &hit);
            LevelSets {
                level: j,
                k0: (1u64 << j) as f64 * x0,
                hit,
                free,
            }
        })
        .collect();
    Ok(IndexSets {
        level: m,
        k0,
        phi_hit,
        phi_free,
        psi,
        star,
    })
}

/// Smallest `|phi|` accepted as nonzero at a window end. Extremal-phase
/// scaling functions are tiny but nonzero near the right end of the support
/// (about 1e-8 at distance 0.1 for three vanishing moments).
const NONVANISHING: f64 = 1e-12;

/// Upper bound on the trimming width for an exponential zero of order `beta`.
pub fn delta_upper_bound(family: &WaveletFamily, beta: f64) -> f64 {
    let (lo, hi) = family.phi_support();
    let three = 3f64.powf(beta + 1.0);
    0.5 * three / (2.0 * three + ((hi + lo) as f64).powf(beta + 1.0))
}

/// Trimming width of the local window `[L + delta, U - delta]`.
///
/// Zero for a polynomial zero. Otherwise the smallest `delta` on the grid
/// `0.05, 0.10, ..., 0.45` below the bound of [`delta_upper_bound`] at which
/// `|phi|` stays clear of table roundoff at both window ends; when no coarse
/// grid point qualifies, the grid is refined to twentieths of the bound.
pub fn pick_delta_b(basis: &PeriodizedBasis, b: f64, beta: f64) -> Result<f64> {
    if b == 0.0 {
        return Ok(0.0);
    }
    let family = basis.family();
    let (lo, hi) = family.phi_support();
    let bound = delta_upper_bound(family, beta).min(0.5);
    let ok = |d: f64| {
        d > 0.0
            && d < bound
            && basis.table().phi(lo as f64 + d).abs() > NONVANISHING
            && basis.table().phi(hi as f64 - d).abs() > NONVANISHING
    };
    let coarse = (1..=9).map(|i| 0.05 * i as f64);
    let fine = (1..20).map(|i| bound * i as f64 / 20.0);
    coarse
        .chain(fine)
        .find(|&d| ok(d))
        .ok_or_else(|| {
            Error::Numeric(format!(
                "no trimming width below {bound} keeps the scaling function away from zero at the window ends"
            ))
        })
}

/// The deterministic part of the local system at level `m`.
#[derive(Debug, Clone)]
pub struct LocalAssembly {
    pub level: u32,
    pub delta_b: f64,
    pub hit: Vec<usize>,
    pub star: Vec<usize>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub cond: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

/// Midpoints and widths of the cells between aligned nodes.
fn midpoint_cells(a: f64, b: f64, h: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    quad::aligned_nodes(a, b, h, breaks)
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0]))
        .collect()
}

/// Breakpoints in the local coordinate of row `l`: the zero and the wrap of `[0, 1)`.
fn local_breaks(level: u32, l: usize, x0: f64, lo: f64) -> Vec<f64> {
    let size = (1u64 << level) as f64;
    let mut out = Vec::new();
    for anchor in [size * x0 - l as f64, -(l as f64)] {
        let t = lo + (anchor - lo).rem_euclid(size);
        out.push(t);
        out.push(t - size);
        out.push(t + size);
    }
    out
}

/// `A_lk = int phi_ml phi_mk g 1(2^m x - l in window)` for `l, k` zero-affected
/// and `B_lk` the same with `k` in the ring set, by the composite midpoint rule
/// in the local coordinate on cells of width `2^-(P + refine)` split at the zero.
pub fn assemble_system(
    basis: &PeriodizedBasis,
    density: &DesignDensity,
    m: u32,
    delta_b: f64,
) -> Result<LocalAssembly> {
    assemble_with(basis, density, m, delta_b, 0)
}

pub fn assemble_with(
    basis: &PeriodizedBasis,
    density: &DesignDensity,
    m: u32,
    delta_b: f64,
    refine: u32,
) -> Result<LocalAssembly> {
    let sets = build_index_sets(m, m..m, density.x0(), basis.family())?;
    let (lo, hi) = basis.support(Generator::Scaling);
    let (lo, hi) = (lo as f64, hi as f64);
    let size = (1u64 << m) as f64;
    let h = (-((basis.table().resolution() + refine) as f64)).exp2();
    let hit = sets.phi_hit.clone();
    let star = sets.star.clone();
    let hit_pos = position_map(&hit, 1 << m);
    let star_pos = position_map(&star, 1 << m);
    let mut a = DMatrix::zeros(hit.len(), hit.len());
    let mut b = DMatrix::zeros(hit.len(), star.len());
    let amp = size.sqrt();
    let mut row_a = vec![0.0; hit.len()];
    let mut row_b = vec![0.0; star.len()];
    for (r, &l) in hit.iter().enumerate() {
        row_a.iter_mut().for_each(|v| *v = 0.0);
        row_b.iter_mut().for_each(|v| *v = 0.0);
        let breaks = local_breaks(m, l, density.x0(), lo);
        for (t, w) in midpoint_cells(lo + delta_b, hi - delta_b, h, &breaks) {
            let phi_l = basis.mother(Generator::Scaling, t);
            if phi_l == 0.0 {
                continue;
            }
            let x = ((t + l as f64) / size).rem_euclid(1.0);
            let g = density.eval_g(x);
            if g == 0.0 {
                continue;
            }
            let weight = amp * phi_l * g * w / size;
            basis.for_each_at(Generator::Scaling, m, x, |k, v| {
                if let Some(c) = hit_pos[k] {
                    row_a[c] += weight * v;
                }
                if let Some(c) = star_pos[k] {
                    row_b[c] += weight * v;
                }
            });
        }
        for (c, v) in row_a.iter().enumerate() {
            a[(r, c)] = *v;
        }
        for (c, v) in row_b.iter().enumerate() {
            b[(r, c)] = *v;
        }
    }
    // the window indicator sits on the row index only; restore exact symmetry
    // when it is absent, where A is a plain weighted Gram matrix
    if delta_b == 0.0 {
        a = 0.5 * (&a + a.transpose());
    }
    let (chol, cond) = factor(&a, m)?;
    Ok(LocalAssembly {
        level: m,
        delta_b,
        hit,
        star,
        a,
        b,
        cond,
        chol,
    })
}

fn factor(a: &DMatrix<f64>, m: u32) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let sym = 0.5 * (a + a.transpose());
    let chol = nalgebra::Cholesky::new(sym.clone()).ok_or_else(|| {
        Error::Numeric(format!(
            "local Gram matrix at level {m} is not positive definite; quadrature too coarse"
        ))
    })?;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |s, v| s.min(v.abs()));
    let cond = max / min;
    if cond > CONDITION_WARNING {
        warn!("local system at level {m} has condition number {cond:.3e}");
    }
    Ok((chol, cond))
}

/// `c_l = n^-1 sum y_i phi_ml(x_i) 1(2^m x_i - l in window)` for `l` in `hit`.
pub fn estimate_rhs(
    xs: &[f64],
    ys: &[f64],
    basis: &PeriodizedBasis,
    m: u32,
    delta_b: f64,
    hit: &[usize],
) -> Vec<f64> {
    let pos = position_map(hit, 1 << m);
    let (lo, hi) = basis.support(Generator::Scaling);
    let (lo, hi) = (lo as f64 + delta_b, hi as f64 - delta_b);
    let size = (1u64 << m) as f64;
    let mut c = vec![0.0; hit.len()];
    for (&x, &y) in xs.iter().zip(ys) {
        let t = size * x.rem_euclid(1.0);
        basis.for_each_at(Generator::Scaling, m, x, |k, v| {
            if let Some(r) = pos[k] {
                let local = lo - delta_b + (t - k as f64 - (lo - delta_b)).rem_euclid(size);
                if local >= lo && local <= hi {
                    c[r] += y * v;
                }
            }
        });
    }
    let n = xs.len().max(1) as f64;
    c.iter_mut().for_each(|v| *v /= n);
    c
}

/// `u = A^-1 (c - B v)` with one step of iterative refinement.
pub fn solve_local(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c_hat: &[f64],
    v_hat: &[f64],
) -> Result<Vec<f64>> {
    let (chol, _) = factor(a, 0)?;
    solve_with(&chol, a, b, c_hat, v_hat)
}

fn solve_with(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c_hat: &[f64],
    v_hat: &[f64],
) -> Result<Vec<f64>> {
    if c_hat.len() != a.nrows() || v_hat.len() != b.ncols() {
        return Err(Error::Input("local system dimensions do not match".into()));
    }
    let rhs = DVector::from_column_slice(c_hat) - b * DVector::from_column_slice(v_hat);
    let mut u = chol.solve(&rhs);
    let resid = &rhs - a * &u;
    u += chol.solve(&resid);
    let resid = (&rhs - a * &u).norm();
    let scale = DVector::from_column_slice(c_hat).norm().max(rhs.norm());
    if !u.iter().all(|v| v.is_finite()) || resid > 1e-10 * scale.max(1e-300) {
        return Err(Error::Numeric(format!(
            "local solve residual {resid:.3e} too large"
        )));
    }
    Ok(u.iter().copied().collect())
}

/// A solved local system with the inputs that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct LocalSystem {
    pub level: u32,
    pub indices: Vec<usize>,
    pub star: Vec<usize>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub c_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub delta_b: f64,
    pub cond: f64,
    /// The remainder from scaling functions outside the ring is not modeled.
    pub neglected_eps: bool,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

impl LocalAssembly {
    pub fn solve(&self, c_hat: Vec<f64>, v_hat: Vec<f64>) -> Result<LocalSystem> {
        let u_hat = solve_with(&self.chol, &self.a, &self.b, &c_hat, &v_hat)?;
        Ok(LocalSystem {
            level: self.level,
            indices: self.hit.clone(),
            star: self.star.clone(),
            a: rows(&self.a),
            b: rows(&self.b),
            c_hat,
            v_hat,
            u_hat,
            delta_b: self.delta_b,
            cond: self.cond,
            neglected_eps: true,
        })
    }
}

impl LocalSystem {
    /// Diagnostics blob with keys `level, indices, A, B, c_hat, u_hat, cond`.
    pub fn diagnostics_json(&self) -> serde_json::Value {
        serde_json::json!({
            "level": self.level,
            "indices": self.indices,
            "A": self.a,
            "B": self.b,
            "c_hat": self.c_hat,
            "u_hat": self.u_hat,
            "cond": self.cond,
        })
    }
}

/// `sum_k u_k phi_mk` over the zero-affected indices, as a tree without wavelet levels.
pub fn zero_affected_estimate(u_hat: &[f64], hit: &[usize], m: u32) -> Result<CoefficientTree> {
    if u_hat.len() != hit.len() {
        return Err(Error::Input(
            "solution and index set differ in length".into(),
        ));
    }
    let mut tree = CoefficientTree::zeros(m, m);
    for (&k, &u) in hit.iter().zip(u_hat) {
        tree.a[k] = u;
    }
    Ok(tree)
}
