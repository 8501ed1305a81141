//! Design densities with a single zero, their distribution functions, samplers,
//! and estimation of the zero parameters from a sample.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;
use crate::wavelet::{Generator, PeriodizedBasis};
use crate::zero_affected::IndexSets;

const CDF_CELLS: usize = 2048;

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    /// `|x - x0|^alpha exp(-b |x - x0|^-beta)`
    Canonical,
    Custom(DensityFn),
}

/// A probability density on `[0, 1]` vanishing at `x0` like
/// `C_g |x - x0|^alpha exp(-b |x - x0|^-beta)`.
#[derive(Clone)]
pub struct DesignDensity {
    x0: f64,
    alpha: f64,
    b: f64,
    beta: f64,
    norm: f64,
    shape: Shape,
    nodes: Vec<f64>,
    cum: Vec<f64>,
}

impl fmt::Debug for DesignDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DesignDensity")
            .field("x0", &self.x0)
            .field("alpha", &self.alpha)
            .field("b", &self.b)
            .field("beta", &self.beta)
            .field("norm", &self.norm)
            .field("custom", &matches!(self.shape, Shape::Custom(_)))
            .finish()
    }
}

/// Parameters identifying a density, as written to reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub x0: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
    pub cg: f64,
}

impl DesignDensity {
    /// The canonical family `g(x) = C_g |x - x0|^alpha exp(-b |x - x0|^-beta)`
    /// normalized on `[0, 1]`.
    pub fn new(x0: f64, alpha: f64, b: f64, beta: f64) -> Result<Self> {
        validate(x0, alpha, b, beta)?;
        if b == 0.0 && alpha <= 0.0 {
            return Err(Error::Config("a polynomial zero needs alpha > 0".into()));
        }
        Self::build(x0, alpha, b, beta, Shape::Canonical)
    }

    /// Uniform density carrying a nominal zero location; used as the exactness
    /// baseline in tests and benchmarks, not as a model of data loss.
    pub fn uniform(x0: f64) -> Result<Self> {
        validate(x0, 0.0, 0.0, 1.0)?;
        Self::build(x0, 0.0, 0.0, 1.0, Shape::Canonical)
    }

    /// A user-supplied density with declared zero parameters. The callable is
    /// renormalized to integrate to one.
    pub fn custom(
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        x0: f64,
        alpha: f64,
        b: f64,
        beta: f64,
    ) -> Result<Self> {
        validate(x0, alpha, b, beta)?;
        Self::build(x0, alpha, b, beta, Shape::Custom(Arc::new(g)))
    }

    fn build(x0: f64, alpha: f64, b: f64, beta: f64, shape: Shape) -> Result<Self> {
        let mut d = Self {
            x0,
            alpha,
            b,
            beta,
            norm: 1.0,
            shape,
            nodes: Vec::new(),
            cum: Vec::new(),
        };
        let mut nodes: Vec<f64> = (0..=CDF_CELLS)
            .map(|i| i as f64 / CDF_CELLS as f64)
            .collect();
        if x0 > 0.0 && x0 < 1.0 {
            nodes.push(x0);
            nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            nodes.dedup();
        }
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += d.cell_integral(w[0], w[1]);
            cum.push(acc);
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err(Error::Numeric(
                "density does not have a positive finite integral".into(),
            ));
        }
        d.norm = 1.0 / acc;
        for c in cum.iter_mut() {
            *c /= acc;
        }
        *cum.last_mut().unwrap() = 1.0;
        d.nodes = nodes;
        d.cum = cum;
        Ok(d)
    }

    fn raw(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Canonical => {
                let z = (x - self.x0).abs();
                let mut v = z.powf(self.alpha);
                if self.b > 0.0 {
                    v *= if z == 0.0 {
                        0.0
                    } else {
                        (-self.b * z.powf(-self.beta)).exp()
                    };
                }
                v
            }
            Shape::Custom(f) => f(x),
        }
    }

    /// Unnormalized mass of `[lo, hi]`, where the cell does not straddle `x0`.
    fn cell_integral(&self, lo: f64, hi: f64) -> f64 {
        if matches!(self.shape, Shape::Canonical) && self.b == 0.0 {
            let p = self.alpha + 1.0;
            return ((hi - self.x0).abs().powf(p) - (lo - self.x0).abs().powf(p)).abs() / p;
        }
        let f = |x: f64| self.raw(x);
        if lo == self.x0 || hi == self.x0 {
            let scale = quad::gauss_legendre(&f, lo, hi).abs().max(1e-300);
            quad::adaptive(&f, lo, hi, 1e-15 * scale.max(1e-12))
        } else {
            quad::gauss_legendre(&f, lo, hi)
        }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The limit constant `C_g`; equals the normalization for the canonical family.
    pub fn cg(&self) -> f64 {
        match self.shape {
            Shape::Canonical => self.norm,
            Shape::Custom(_) => {
                let probe = |z: f64| {
                    let x = if self.x0 + z <= 1.0 {
                        self.x0 + z
                    } else {
                        self.x0 - z
                    };
                    self.eval_g(x) / self.envelope_shape(z)
                };
                probe(1e-6)
            }
        }
    }

    pub fn params(&self) -> DensityParams {
        DensityParams {
            x0: self.x0,
            alpha: self.alpha,
            b: self.b,
            beta: self.beta,
            cg: self.cg(),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.shape, Shape::Canonical) && self.alpha == 0.0 && self.b == 0.0
    }

    /// `1/g` is integrable exactly when `b = 0` and `alpha < 1`.
    pub fn inverse_integrable(&self) -> bool {
        self.b == 0.0 && self.alpha < 1.0
    }

    fn envelope_shape(&self, z: f64) -> f64 {
        let z = z.abs();
        let mut v = z.powf(self.alpha);
        if self.b > 0.0 {
            v *= (-self.b * z.powf(-self.beta)).exp();
        }
        v
    }

    /// Constants `(C_g1, C_g2)` bracketing `g` by the zero shape on `[0, 1]`,
    /// from the extreme ratios over a fine probe grid.
    pub fn envelope(&self) -> (f64, f64) {
        if let Shape::Canonical = self.shape {
            return (self.norm, self.norm);
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..=8192 {
            let x = i as f64 / 8192.0;
            let s = self.envelope_shape(x - self.x0);
            if s > 1e-300 {
                let r = self.eval_g(x) / s;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    pub fn eval_g(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.norm * self.raw(x)
    }

    /// Distribution function `G(x)` with `G(0) = 0` and `G(1) = 1` exactly.
    pub fn eval_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.nodes.partition_point(|&n| n <= x) - 1;
        let lo = self.nodes[i];
        if x == lo {
            return self.cum[i];
        }
        (self.cum[i] + self.norm * self.cell_integral(lo, x)).min(1.0)
    }

    /// `G^{-1}(u)` by safeguarded Newton iteration inside the bracketing cell.
    pub fn invert_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("probability {u} outside [0, 1]")));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(1.0);
        }
        let i = (self.cum.partition_point(|&c| c < u)).clamp(1, self.cum.len() - 1) - 1;
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[i + 1]);
        let (c_lo, c_hi) = (self.cum[i], self.cum[i + 1]);
        let mut x = if c_hi > c_lo {
            lo + (hi - lo) * (u - c_lo) / (c_hi - c_lo)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..200 {
            let gx = self.eval_cdf(x) - u;
            if gx == 0.0 {
                return Ok(x);
            }
            if gx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
            let slope = self.eval_g(x);
            let newton = if slope > 0.0 {
                x - gx / slope
            } else {
                f64::NAN
            };
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(x)
    }

    /// Sorted sample of size `n` by inverse-CDF sampling from a seeded generator.
    pub fn draw(&self, n: usize, seed: u64) -> DesignSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw_with(n, &mut rng, seed)
    }

    pub fn draw_with(&self, n: usize, rng: &mut impl Rng, seed: u64) -> DesignSample {
        let mut xs: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                self.invert_cdf(u).expect("uniform draw lies in [0, 1)")
            })
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        DesignSample {
            xs,
            kind: DesignKind::Random,
            seed: Some(seed),
        }
    }

    /// Deterministic design `x_i = G^{-1}(i/n)`, `i = 1..n`.
    pub fn fixed_grid(&self, n: usize) -> DesignSample {
        let xs = (1..=n)
            .map(|i| {
                self.invert_cdf(i as f64 / n as f64)
                    .expect("i/n lies in [0, 1]")
            })
            .collect();
        DesignSample {
            xs,
            kind: DesignKind::Fixed,
            seed: None,
        }
    }

    /// Splits `[0, 1]` at midpoints between declared zeros.
    pub fn partition_cells(zeros: &[f64]) -> Vec<(f64, f64)> {
        let mut z = zeros.to_vec();
        z.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut cuts = vec![0.0];
        cuts.extend(z.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        cuts.push(1.0);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

fn validate(x0: f64, alpha: f64, b: f64, beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::Config(format!("zero location {x0} outside [0, 1]")));
    }
    if !alpha.is_finite() || !b.is_finite() || b < 0.0 {
        return Err(Error::Config("need finite alpha and b >= 0".into()));
    }
    if b > 0.0 && !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Config("an exponential zero needs beta > 0".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Random,
    Fixed,
}

/// Sorted design points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSample {
    pub xs: Vec<f64>,
    pub kind: DesignKind,
    pub seed: Option<u64>,
}

impl DesignSample {
    pub fn from_points(mut xs: Vec<f64>) -> Result<Self> {
        if let Some(bad) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Input(format!("design point {bad} outside [0, 1]")));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            xs,
            kind: DesignKind::Fixed,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// One regression point `(log z, log mass)` of the zero-order fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroFitPoint {
    pub z: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroFitDiagnostics {
    pub points: Vec<ZeroFitPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub widest_gap: f64,
}

/// Estimated zero parameters of an unknown polynomial-order design density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroFit {
    pub x0_hat: f64,
    pub alpha_hat: f64,
    pub cg_hat: f64,
    pub cg1_hat: f64,
    pub cg2_hat: f64,
    pub zero_detected: bool,
    pub diagnostics: ZeroFitDiagnostics,
}

impl ZeroFit {
    /// Canonical density with the fitted parameters.
    pub fn density(&self) -> Result<DesignDensity> {
        if self.alpha_hat > 0.0 {
            DesignDensity::new(self.x0_hat, self.alpha_hat, 0.0, 1.0)
        } else {
            DesignDensity::uniform(self.x0_hat)
        }
    }
}

/// Fits `x0`, `alpha`, `C_g`, `C_g1`, `C_g2` from a design sample.
///
/// The zero is placed at the midpoint of the widest gap between consecutive
/// points (searched within 0.1 of `x0_hint` when given). `alpha + 1` is the
/// slope of `log[G(x0 + z) - G(x0 - z)]` against `log z` over dyadic `z` with
/// at least 30 points on each side of the zero.
pub fn fit_zero(sample: &DesignSample, x0_hint: Option<f64>) -> Result<ZeroFit> {
    let xs = &sample.xs;
    let n = xs.len();
    if n < 1000 {
        return Err(Error::InsufficientData(format!(
            "zero fitting needs at least 1000 points, got {n}"
        )));
    }
    let (x0, gap) = widest_gap(xs, x0_hint);
    let cell = 1.0 / (n as f64).sqrt();
    if x0 < cell || x0 > 1.0 - cell {
        return Err(Error::InsufficientData(format!(
            "estimated zero {x0} is too close to the boundary"
        )));
    }
    let below = |t: f64| xs.partition_point(|&x| x < t);
    let upto = |t: f64| xs.partition_point(|&x| x <= t);
    let at_zero = below(x0);

    let mut points = Vec::new();
    for k in 2..60 {
        let z = (-(k as f64)).exp2();
        if x0 - z < 0.0 || x0 + z > 1.0 {
            continue;
        }
        let left = at_zero - below(x0 - z);
        let right = upto(x0 + z) - at_zero;
        if left < 30 || right < 30 {
            break;
        }
        points.push(ZeroFitPoint {
            z,
            mass: (left + right) as f64 / n as f64,
        });
    }
    let (slope, intercept, rms) = regress(&points)?;
    let alpha_hat = slope - 1.0;
    let cg_hat = 0.5 * (alpha_hat + 1.0) * intercept.exp();

    let g0 = at_zero as f64 / n as f64;
    let mut cg1 = f64::INFINITY;
    let mut cg2 = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let dz = (x - x0).abs();
        if dz == 0.0 {
            continue;
        }
        let gi = (i + 1) as f64 / n as f64;
        let r = (gi - g0).abs() * (alpha_hat + 1.0) / dz.powf(alpha_hat + 1.0);
        if r > 0.0 {
            cg1 = cg1.min(r);
            cg2 = cg2.max(r);
        }
    }
    if !(cg1.is_finite() && cg1 > 0.0) {
        return Err(Error::Numeric("envelope constants are degenerate".into()));
    }
    let zero_detected = gap >= 2.0 * (n as f64).ln() / n as f64;
    Ok(ZeroFit {
        x0_hat: x0,
        alpha_hat,
        cg_hat,
        cg1_hat: cg1,
        cg2_hat: cg2,
        zero_detected,
        diagnostics: ZeroFitDiagnostics {
            points,
            slope,
            intercept,
            residual_rms: rms,
            widest_gap: gap,
        },
    })
}

/// The same regression run on an exact distribution function, for checking the
/// estimator without sampling noise.
pub fn fit_zero_from_cdf(
    cdf: &dyn Fn(f64) -> f64,
    x0: f64,
    levels: std::ops::Range<u32>,
) -> Result<ZeroFit> {
    let points: Vec<ZeroFitPoint> = levels
        .map(|k| (-(k as f64)).exp2())
        .filter(|z| x0 - z >= 0.0 && x0 + z <= 1.0)
        .map(|z| ZeroFitPoint {
            z,
            mass: cdf(x0 + z) - cdf(x0 - z),
        })
        .collect();
    let (slope, intercept, rms) = regress(&points)?;
    let alpha_hat = slope - 1.0;
    let cg_hat = 0.5 * (alpha_hat + 1.0) * intercept.exp();
    Ok(ZeroFit {
        x0_hat: x0,
        alpha_hat,
        cg_hat,
        cg1_hat: cg_hat,
        cg2_hat: cg_hat,
        zero_detected: alpha_hat > 0.0,
        diagnostics: ZeroFitDiagnostics {
            points,
            slope,
            intercept,
            residual_rms: rms,
            widest_gap: 0.0,
        },
    })
}

fn widest_gap(xs: &[f64], hint: Option<f64>) -> (f64, f64) {
    let mut best = (0.5, -1.0);
    for w in xs.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if let Some(h) = hint {
            if (mid - h).abs() > 0.1 {
                continue;
            }
        }
        let gap = w[1] - w[0];
        if gap > best.1 {
            best = (mid, gap);
        }
    }
    (best.0, best.1.max(0.0))
}

fn regress(points: &[ZeroFitPoint]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mass > 0.0)
        .map(|p| (p.z.ln(), p.mass.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} usable dyadic scales around the zero (need 4)",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

/// Empirical Gram matrices `n^-1 sum phi_mk(x_i) phi_ml(x_i)` over
/// (zero-affected x zero-affected) and (zero-affected x ring) index pairs.
pub fn empirical_gram(
    sample: &DesignSample,
    basis: &PeriodizedBasis,
    m: u32,
    sets: &IndexSets,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if m < basis.min_level() {
        return Err(Error::Level(format!("level {m} below minimal level")));
    }
    let size = 1usize << m;
    let hit_pos = position_map(&sets.phi_hit, size);
    let star_pos = position_map(&sets.star, size);
    let mut a = DMatrix::zeros(sets.phi_hit.len(), sets.phi_hit.len());
    let mut b = DMatrix::zeros(sets.phi_hit.len(), sets.star.len());
    let mut vals: Vec<(usize, f64)> = Vec::with_capacity(16);
    for &x in &sample.xs {
        vals.clear();
        basis.for_each_at(Generator::Scaling, m, x, |k, v| vals.push((k, v)));
        for &(l, vl) in &vals {
            let Some(r) = hit_pos[l] else { continue };
            for &(k, vk) in &vals {
                if let Some(c) = hit_pos[k] {
                    a[(r, c)] += vl * vk;
                }
                if let Some(c) = star_pos[k] {
                    b[(r, c)] += vl * vk;
                }
            }
        }
    }
    let n = sample.xs.len().max(1) as f64;
    Ok((a / n, b / n))
}

pub(crate) fn position_map(indices: &[usize], size: usize) -> Vec<Option<usize>> {
    let mut pos = vec![None; size];
    for (i, &k) in indices.iter().enumerate() {
        pos[k] = Some(i);
    }
    pos
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vee() -> DesignDensity {
        DesignDensity::new(0.5, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn vee_density_values() {
        let d = vee();
        assert!((d.eval_g(0.25) - 1.0).abs() < 1e-12);
        assert!((d.cg() - 4.0).abs() < 1e-10);
        assert_eq!(d.eval_g(0.5), 0.0);
        assert_eq!(d.eval_cdf(0.0), 0.0);
        assert_eq!(d.eval_cdf(1.0), 1.0);
    }

    #[test]
    fn vee_cdf_matches_closed_form() {
        let d = vee();
        assert!((d.eval_cdf(0.25) - 0.375).abs() < 1e-12);
        assert!((d.invert_cdf(0.375).unwrap() - 0.25).abs() < 1e-9);
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let exact = if x <= 0.5 {
                2.0 * x - 2.0 * x * x
            } else {
                0.5 + 2.0 * (x - 0.5).powi(2)
            };
            assert!((d.eval_cdf(x) - exact).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn invert_rejects_out_of_range() {
        let d = vee();
        assert!(matches!(d.invert_cdf(-0.1), Err(Error::Domain(_))));
        assert!(matches!(d.invert_cdf(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn densities_integrate_to_one() {
        for (a, b, beta) in [
            (0.5, 0.0, 1.0),
            (1.0, 0.0, 1.0),
            (2.0, 0.0, 1.0),
            (1.0, 0.5, 1.0),
            (0.0, 0.2, 2.0),
        ] {
            let d = DesignDensity::new(0.37, a, b, beta).unwrap();
            let total = quad::adaptive(&|x| d.eval_g(x), 0.0, 0.37, 1e-14)
                + quad::adaptive(&|x| d.eval_g(x), 0.37, 1.0, 1e-14);
            assert!((total - 1.0).abs() < 1e-8, "{a} {b} {beta}: {total}");
        }
    }

    #[test]
    fn limit_constant_is_recovered() {
        for (a, b, beta) in [(1.0, 0.0, 1.0), (0.5, 0.0, 1.0), (1.5, 0.3, 1.0)] {
            let d = DesignDensity::new(0.4, a, b, beta).unwrap();
            for z in [1e-2, 1e-3] {
                for x in [z, -z] {
                    let ratio =
                        d.eval_g(0.4 + x) * x.abs().powf(-a) * (b * x.abs().powf(-beta)).exp();
                    assert!((ratio / d.cg() - 1.0).abs() < 0.01);
                }
            }
        }
    }

    #[test]
    fn invert_is_right_inverse() {
        for d in [
            vee(),
            DesignDensity::new(0.3, 0.5, 0.0, 1.0).unwrap(),
            DesignDensity::new(0.6, 1.0, 0.2, 1.0).unwrap(),
        ] {
            for i in 0..1000 {
                let u = (i as f64 + 0.5) / 1000.0;
                let x = d.invert_cdf(u).unwrap();
                assert!((d.eval_cdf(x) - u).abs() < 1e-9, "u={u}");
            }
        }
    }

    #[test]
    fn fixed_grid_hits_closed_form_quantile() {
        let s = vee().fixed_grid(8);
        assert_eq!(s.len(), 8);
        assert!((s.xs[2] - 0.25).abs() < 1e-9);
        assert_eq!(s.xs[7], 1.0);
    }

    #[test]
    fn draws_are_reproducible_and_sorted() {
        let d = vee();
        let a = d.draw(500, 9);
        let b = d.draw(500, 9);
        assert_eq!(a, b);
        assert!(a.xs.windows(2).all(|w| w[0] <= w[1]));
        assert_ne!(a, d.draw(500, 10));
    }

    #[test]
    fn draw_matches_cdf() {
        let d = vee();
        let s = d.draw(100_000, 42);
        let n = s.len() as f64;
        let ks =
            s.xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let g = d.eval_cdf(x);
                    (g - i as f64 / n).abs().max(((i + 1) as f64 / n - g).abs())
                })
                .fold(0.0f64, f64::max);
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn envelope_holds_for_builtins() {
        for d in [
            vee(),
            DesignDensity::new(0.3, 2.0, 0.0, 1.0).unwrap(),
            DesignDensity::new(0.6, 1.0, 0.2, 1.5).unwrap(),
        ] {
            let (c1, c2) = d.envelope();
            assert!(c1 > 0.0 && c1 <= c2);
            for i in 0..1000 {
                let x = (i as f64 + 0.5) / 1000.0;
                let s = d.envelope_shape(x - d.x0());
                let g = d.eval_g(x);
                assert!(c1 * s <= g * (1.0 + 1e-12) + 1e-300);
                assert!(g <= c2 * s * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn fit_zero_on_vee_sample() {
        let d = vee();
        let fit = fit_zero(&d.draw(100_000, 3), None).unwrap();
        assert!((0.85..=1.15).contains(&fit.alpha_hat), "{fit:?}");
        assert!((3.2..=4.8).contains(&fit.cg_hat), "{fit:?}");
        assert!((fit.x0_hat - 0.5).abs() < 0.01);
        assert!(fit.cg1_hat <= fit.cg2_hat);
        assert!(fit.zero_detected);
    }

    #[test]
    fn fit_zero_on_uniform_sample() {
        let d = DesignDensity::uniform(0.5).unwrap();
        let fit = fit_zero(&d.draw(20_000, 5), None).unwrap();
        assert!(fit.alpha_hat.abs() < 0.1, "{fit:?}");
        assert!(!fit.zero_detected);
    }

    #[test]
    fn fit_zero_exact_cdf() {
        for alpha in [0.5, 1.0, 2.0] {
            let d = DesignDensity::new(0.5, alpha, 0.0, 1.0).unwrap();
            let fit = fit_zero_from_cdf(&|x| d.eval_cdf(x), 0.5, 2..9).unwrap();
            assert!(
                (fit.alpha_hat - alpha).abs() < 1e-6,
                "{alpha}: {}",
                fit.alpha_hat
            );
            assert!((fit.cg_hat - d.cg()).abs() < 1e-5 * d.cg());
        }
    }

    #[test]
    fn fit_zero_needs_data() {
        let d = vee();
        assert!(matches!(
            fit_zero(&d.draw(500, 1), None),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn partition_at_midpoints() {
        let cells = DesignDensity::partition_cells(&[0.75, 0.25]);
        assert_eq!(cells, vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DesignDensity::new(1.5, 1.0, 0.0, 1.0).is_err());
        assert!(DesignDensity::new(0.5, 0.0, 0.0, 1.0).is_err());
        assert!(DesignDensity::new(0.5, 1.0, 1.0, 0.0).is_err());
        assert!(DesignDensity::new(0.5, 1.0, -1.0, 1.0).is_err());
    }
}
