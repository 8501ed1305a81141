//! Resolution-level choice and the complete estimators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use crate::coeffs::{levels, CoefficientBank, EmpiricalTree, ThresholdRule};
use crate::design::{DensityParams, DesignDensity};
use crate::error::{Error, Result};
use crate::func::RealFn;
use crate::quad;
use crate::wavelet::{CoefficientTree, PeriodizedBasis, WaveletFamily};
use crate::zero_affected::{
    assemble_system, estimate_rhs, pick_delta_b, zero_affected_estimate, LocalAssembly, LocalSystem,
};

/// Margin applied to the theoretical minima of `d` and `lambda`.
pub const THEORY_MARGIN: f64 = 1.05;

/// Level at which the limit Gram matrix is approximated.
pub const REFERENCE_LEVEL: u32 = 10;

/// A tuning constant: a fixed value or the theoretical minimum times [`THEORY_MARGIN`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuning {
    Theory,
    Value(f64),
}

/// Bound on `sup |f|` entering the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FSup {
    Manual(f64),
    /// 1.5 times the 99th percentile of `|y|` where `g` is above its median.
    Plugin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub d: Tuning,
    pub lambda: Tuning,
    pub sigma: f64,
    pub f_sup: FSup,
    /// Exponent of the grid used for restricted norms.
    pub grid_p: u32,
    /// Smoothness index `s'` used only to report the oracle level.
    pub s_prime: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            d: Tuning::Theory,
            lambda: Tuning::Theory,
            sigma: 1.0,
            f_sup: FSup::Plugin,
            grid_p: 12,
            s_prime: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |t: Tuning, name: &str| match t {
            Tuning::Value(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
            _ => Ok(()),
        };
        positive(self.d, "d")?;
        positive(self.lambda, "lambda")?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if let FSup::Manual(v) = self.f_sup {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("f_sup must be positive, got {v}")));
            }
        }
        if !(4..=20).contains(&self.grid_p) {
            return Err(Error::Config(format!(
                "grid_p {} outside 4..=20",
                self.grid_p
            )));
        }
        Ok(())
    }
}

/// Constants from the risk bounds, evaluated for one basis and density.
/// Entries tied to the level selection are NaN for exponential zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub f_sup: f64,
    pub c_g1: f64,
    pub c_g2: f64,
    pub c_psi: f64,
    pub c_phi: f64,
    pub c_d: f64,
    pub c_tau: f64,
    pub c_kappa: f64,
    pub c_lambda0: f64,
    pub c_lambda1: f64,
    pub c_lambda2: f64,
    pub c_u: f64,
    pub c_lambda: f64,
    pub m_phi: f64,
    pub d_min_deviation: f64,
    pub d_min_twostage: f64,
    pub d_min_integrable: f64,
    pub lambda_min: f64,
}

fn support_power(support: (i64, i64), alpha: f64) -> f64 {
    (2.0 * support.0.abs().max(support.1.abs()) as f64).powf(alpha)
}

/// `8 C / C_g1 max(2, 2 F^2, F S / 3, S)` with `S` the sup of the generator.
fn deviation_constant(c: f64, c_g1: f64, f_sup: f64, sup: f64) -> f64 {
    8.0 * c / c_g1
        * [2.0, 2.0 * f_sup * f_sup, f_sup * sup / 3.0, sup]
            .into_iter()
            .fold(0.0, f64::max)
}

/// Golden-section search for the minimum of a unimodal function of `ln a`.
fn golden_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let g = |t: f64| f(t.exp());
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = g(d);
        }
    }
    let t = 0.5 * (a + b);
    (t.exp(), g(t))
}

pub fn kappa_constant(c_phi: f64, c_g2: f64, f_sup: f64, phi_sup: f64) -> f64 {
    let obj = |a: f64| {
        [
            16.0 * c_phi * c_g2 * f_sup,
            16.0 * a,
            8.0 * f_sup * phi_sup / 3.0,
            16.0 * c_phi * c_g2,
            4.0 * c_phi * c_g2 * phi_sup / (a * a),
            4.0 * phi_sup * phi_sup / (3.0 * a),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    };
    golden_min(obj, 1e-3, 1e3).1
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |s, v| s.max(*v))
}

/// Limit matrices `A*`, `B*` of the local system for weight `|z|^alpha`.
pub fn limit_matrices(
    basis: &PeriodizedBasis,
    x0: f64,
    alpha: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let weight = if alpha > 0.0 {
        DesignDensity::new(x0, alpha, 0.0, 1.0)?
    } else {
        DesignDensity::uniform(x0)?
    };
    let sys = assemble_system(basis, &weight, REFERENCE_LEVEL, 0.0)?;
    let scale = (REFERENCE_LEVEL as f64 * alpha).exp2() / weight.cg();
    Ok((sys.a * scale, sys.b * scale))
}

/// Plug-in bound on `sup |f|`.
pub fn plugin_f_sup(xs: &[f64], ys: &[f64], density: &DesignDensity) -> Result<f64> {
    let idx = well_sampled(xs, density);
    if idx.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "only {} well-sampled points for the plug-in bound on |f| (need 100)",
            idx.len()
        )));
    }
    let mut abs: Vec<f64> = idx.iter().map(|&i| ys[i].abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = abs[((abs.len() - 1) as f64 * 0.99).round() as usize];
    Ok((1.5 * q).max(f64::MIN_POSITIVE))
}

/// Indices of points where `g` exceeds its median over the sample.
fn well_sampled(xs: &[f64], density: &DesignDensity) -> Vec<usize> {
    let gs: Vec<f64> = xs.iter().map(|&x| density.eval_g(x)).collect();
    let mut sorted = gs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    (0..xs.len()).filter(|&i| gs[i] > med).collect()
}

pub fn default_constants(
    basis: &PeriodizedBasis,
    density: &DesignDensity,
    f_sup: f64,
) -> Result<ConstantsLedger> {
    let family = basis.family();
    let alpha = density.alpha();
    let (c_g1, c_g2) = density.envelope();
    let phi_sup = basis.table().phi_sup();
    let psi_sup = basis.table().psi_sup();
    let c_psi = support_power(family.psi_support(), alpha);
    let c_phi = support_power(family.phi_support(), alpha);
    let c_d = deviation_constant(c_psi, c_g1, f_sup, psi_sup);
    let c_tau = deviation_constant(c_phi, c_g1, f_sup, phi_sup);
    let c_kappa = kappa_constant(c_phi, c_g2, f_sup, phi_sup);
    let (lo, hi) = family.phi_support();
    let c_lambda0 = 4.0 * (2.0 * (hi - lo + 1) as f64).sqrt();
    let m_phi = (hi - lo) as f64 + hi.abs().max(lo.abs()) as f64;

    let (c_lambda1, c_lambda2) = if density.b() == 0.0 {
        let (a_star, b_star) = limit_matrices(basis, density.x0(), alpha)?;
        let inv = a_star
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("limit Gram matrix is singular".into()))?;
        (
            c_lambda0 / (std::f64::consts::SQRT_2 * c_g2) * spectral_norm(&inv),
            c_lambda0 * spectral_norm(&(&inv * b_star)),
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    let c_u = (c_lambda1 * c_kappa).max(c_lambda2 * c_tau);
    let c_lambda = (2.0 * c_u).max(c_tau * c_lambda0);
    let lambda_min = (2.0 * c_lambda).max(c_lambda1).max(c_lambda2);
    let d_min_integrable = if alpha < 1.0 {
        2.0 * c_d * (3.0 * alpha + 5.0) / ((1.0 - alpha) * (1.0 + alpha))
    } else {
        f64::INFINITY
    };
    Ok(ConstantsLedger {
        f_sup,
        c_g1,
        c_g2,
        c_psi,
        c_phi,
        c_d,
        c_tau,
        c_kappa,
        c_lambda0,
        c_lambda1,
        c_lambda2,
        c_u,
        c_lambda,
        m_phi,
        d_min_deviation: 4.0 * c_d,
        d_min_twostage: 2.0 * (2.0 * alpha + 3.0) / (alpha + 1.0) * c_d,
        d_min_integrable,
        lambda_min,
    })
}

/// Oracle coarse level, rounded down and clamped to `[m1, J-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub level: u32,
    pub raw: f64,
    pub clamped: bool,
}

/// `2^m0 = n^{1/(2s'+alpha)}` for a polynomial zero, or
/// `(ln n / (b 2^{beta+2}))^{1/beta}` for an exponential one.
pub fn oracle_m0(
    n: usize,
    s_prime: Option<f64>,
    alpha: f64,
    b: f64,
    beta: f64,
    m1: u32,
    big_j: u32,
) -> Result<OracleLevel> {
    let n = n as f64;
    let raw = if b == 0.0 {
        let s = s_prime.ok_or_else(|| {
            Error::Config("the oracle level for a polynomial zero needs the smoothness s'".into())
        })?;
        n.log2() / (2.0 * s + alpha)
    } else {
        (n.ln() / (b * (beta + 2.0).exp2())).log2() / beta
    };
    let floor = raw.floor();
    let top = big_j.saturating_sub(1).max(m1) as f64;
    let level = floor.clamp(m1 as f64, top);
    Ok(OracleLevel {
        level: level as u32,
        raw,
        clamped: level != floor,
    })
}

/// Open neighborhood of the zero containing the support of the zero-affected part at level `m`,
/// intersected with `[0, 1]`.
pub fn xi_set(m: u32, x0: f64, family: &WaveletFamily) -> (f64, f64) {
    let (lp, up) = family.phi_support();
    let (lq, uq) = family.psi_support();
    let h = (-(m as f64)).exp2();
    let lo = x0 + h * (lp.min(lq) - up) as f64;
    let hi = x0 + h * (up.max(uq) - lp) as f64;
    (lo.max(0.0), hi.min(1.0))
}

/// MAD-based noise level from first differences where `g` is above its median.
pub fn estimate_sigma(xs: &[f64], ys: &[f64], density: &DesignDensity) -> Result<f64> {
    let mut idx = well_sampled(xs, density);
    if idx.len() < 500 {
        return Err(Error::InsufficientData(format!(
            "only {} well-sampled points for the noise estimate (need 500)",
            idx.len()
        )));
    }
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let diffs: Vec<f64> = idx.windows(2).map(|w| ys[w[1]] - ys[w[0]]).collect();
    let med = median(&diffs);
    let dev: Vec<f64> = diffs.iter().map(|d| (d - med).abs()).collect();
    Ok(1.4826 * median(&dev) / std::f64::consts::SQRT_2)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    TwoStage,
    Integrable,
}

/// One comparison of the level-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LepskiRow {
    pub m: u32,
    pub j: u32,
    pub norm2: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n: usize,
    pub m1: u32,
    pub big_j: u32,
    pub d: f64,
    pub lambda: Option<f64>,
    pub sigma: f64,
    pub delta_b: f64,
    pub oracle: Option<OracleLevel>,
    pub lepski: Vec<LepskiRow>,
    pub ledger: Option<ConstantsLedger>,
    pub density: DensityParams,
    pub threshold: ThresholdRule,
    pub kept: usize,
    pub killed: usize,
}

/// A fitted curve: a zero-affected part at level `m_hat` plus a thresholded
/// zero-free expansion.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub branch: Branch,
    pub m_hat: u32,
    pub zero_affected: CoefficientTree,
    pub zero_free: CoefficientTree,
    pub tree: EmpiricalTree,
    pub local: Option<LocalSystem>,
    pub diagnostics: FitDiagnostics,
    #[serde(skip)]
    basis: Arc<PeriodizedBasis>,
}

impl FitResult {
    pub fn basis(&self) -> &PeriodizedBasis {
        &self.basis
    }

    pub fn eval_zero_affected(&self, x: f64) -> f64 {
        self.zero_affected.reconstruct(&self.basis, x)
    }

    pub fn eval_zero_free(&self, x: f64) -> f64 {
        self.zero_free.reconstruct(&self.basis, x)
    }

    /// Samples `(x_i, f_hat(x_i))` at `x_i = i / 2^p`, `i = 0..2^p`.
    pub fn curve(&self, p: u32) -> Vec<(f64, f64)> {
        let n = 1usize << p;
        (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (x, self.eval(x))
            })
            .collect()
    }

    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_curve_csv(&self, mut w: impl Write, p: u32) -> Result<()> {
        writeln!(w, "x,f_hat")?;
        for (x, y) in self.curve(p) {
            writeln!(w, "{x:.16e},{y:.16e}")?;
        }
        Ok(())
    }
}

impl RealFn for FitResult {
    fn eval(&self, x: f64) -> f64 {
        self.eval_zero_affected(x) + self.eval_zero_free(x)
    }
}

/// Reusable estimator for one basis, density and configuration. Local
/// assemblies and the constants are cached across fits.
pub struct Estimator {
    basis: Arc<PeriodizedBasis>,
    density: Arc<DesignDensity>,
    cfg: EstimatorConfig,
    delta_b: f64,
    assemblies: Mutex<HashMap<u32, Arc<LocalAssembly>>>,
    ledger: Mutex<Option<ConstantsLedger>>,
}

struct Candidate {
    m: u32,
    zero_affected: CoefficientTree,
    zero_free: CoefficientTree,
    tree: EmpiricalTree,
    local: LocalSystem,
    rule: ThresholdRule,
}

impl Candidate {
    fn eval(&self, basis: &PeriodizedBasis, x: f64) -> f64 {
        self.zero_affected.reconstruct(basis, x) + self.zero_free.reconstruct(basis, x)
    }
}

impl Estimator {
    pub fn new(
        basis: Arc<PeriodizedBasis>,
        density: Arc<DesignDensity>,
        cfg: EstimatorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let delta_b = pick_delta_b(&basis, density.b(), density.beta())?;
        Ok(Self {
            basis,
            density,
            cfg,
            delta_b,
            assemblies: Mutex::new(HashMap::new()),
            ledger: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &Arc<PeriodizedBasis> {
        &self.basis
    }

    pub fn density(&self) -> &Arc<DesignDensity> {
        &self.density
    }

    pub fn delta_b(&self) -> f64 {
        self.delta_b
    }

    pub fn assembly(&self, m: u32) -> Result<Arc<LocalAssembly>> {
        if let Some(a) = self.assemblies.lock().unwrap().get(&m) {
            return Ok(a.clone());
        }
        let a = Arc::new(assemble_system(
            &self.basis,
            &self.density,
            m,
            self.delta_b,
        )?);
        self.assemblies.lock().unwrap().insert(m, a.clone());
        Ok(a)
    }

    /// Constants for this data set. With a manual bound on `|f|` they are
    /// computed once and cached.
    pub fn constants(&self, xs: &[f64], ys: &[f64]) -> Result<ConstantsLedger> {
        match self.cfg.f_sup {
            FSup::Manual(f_sup) => {
                let mut cache = self.ledger.lock().unwrap();
                if let Some(l) = *cache {
                    return Ok(l);
                }
                let l = default_constants(&self.basis, &self.density, f_sup)?;
                *cache = Some(l);
                Ok(l)
            }
            FSup::Plugin => {
                let f_sup = plugin_f_sup(xs, ys, &self.density)?;
                default_constants(&self.basis, &self.density, f_sup)
            }
        }
    }

    fn needs_constants(&self, lambda_used: bool) -> bool {
        self.cfg.d == Tuning::Theory || (lambda_used && self.cfg.lambda == Tuning::Theory)
    }

    /// Two-stage fit: level selection, local solve at the selected level and
    /// thresholded zero-free expansion above it.
    pub fn fit_two_stage(&self, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
        let d = &*self.density;
        if d.inverse_integrable() {
            return Err(Error::Regime(format!(
                "1/g is integrable for alpha = {} and b = 0; use the single-stage estimator",
                d.alpha()
            )));
        }
        check_data(xs, ys)?;
        let n = xs.len();
        let (m1, big_j) = levels(n, self.basis.family(), d.alpha(), d.b(), d.beta())?;
        let exponential = d.b() > 0.0;
        let ledger = if self.needs_constants(!exponential) {
            Some(self.constants(xs, ys)?)
        } else {
            None
        };
        let d_value = match self.cfg.d {
            Tuning::Value(v) => v,
            Tuning::Theory => THEORY_MARGIN * ledger.unwrap().d_min_twostage,
        };
        let bank = CoefficientBank::compute(xs, ys, d, &self.basis, m1, big_j)?;
        let oracle = if exponential {
            Some(oracle_m0(n, None, d.alpha(), d.b(), d.beta(), m1, big_j)?)
        } else {
            self.cfg
                .s_prime
                .map(|s| oracle_m0(n, Some(s), d.alpha(), 0.0, d.beta(), m1, big_j))
                .transpose()?
        };

        let (chosen, lambda, lepski) = if exponential {
            let m0 = oracle.unwrap().level;
            (
                self.candidate(xs, ys, &bank, m0, d_value)?,
                None,
                Vec::new(),
            )
        } else {
            let lambda = match self.cfg.lambda {
                Tuning::Value(v) => v,
                Tuning::Theory => THEORY_MARGIN * ledger.unwrap().lambda_min,
            };
            let candidates = (m1..big_j)
                .map(|m| self.candidate(xs, ys, &bank, m, d_value))
                .collect::<Result<Vec<_>>>()?;
            let (idx, rows) = self.lepski(&candidates, n, lambda);
            let chosen = candidates.into_iter().nth(idx).unwrap();
            (chosen, Some(lambda), rows)
        };
        let (kept, killed) = count_kept(&chosen.tree, &chosen.zero_free);
        Ok(FitResult {
            branch: Branch::TwoStage,
            m_hat: chosen.m,
            zero_affected: chosen.zero_affected,
            zero_free: chosen.zero_free,
            tree: chosen.tree,
            local: Some(chosen.local),
            diagnostics: FitDiagnostics {
                n,
                m1,
                big_j,
                d: d_value,
                lambda,
                sigma: self.cfg.sigma,
                delta_b: self.delta_b,
                oracle,
                lepski,
                ledger,
                density: d.params(),
                threshold: chosen.rule,
                kept,
                killed,
            },
            basis: self.basis.clone(),
        })
    }

    fn candidate(
        &self,
        xs: &[f64],
        ys: &[f64],
        bank: &CoefficientBank,
        m: u32,
        d_value: f64,
    ) -> Result<Candidate> {
        let asm = self.assembly(m)?;
        let c_hat = estimate_rhs(xs, ys, &self.basis, m, self.delta_b, &asm.hit);
        let v_hat = asm
            .star
            .iter()
            .map(|&k| bank.scaling(m, k))
            .collect::<Result<Vec<_>>>()?;
        let local = asm.solve(c_hat, v_hat)?;
        let zero_affected = zero_affected_estimate(&local.u_hat, &local.indices, m)?;
        let tree = bank.tree(&self.basis, m)?;
        let rule = if self.density.b() > 0.0 {
            ThresholdRule::exponential_band(m)
        } else {
            ThresholdRule::polynomial(d_value, xs.len(), self.density.alpha(), self.cfg.sigma)
        };
        let zero_free = tree.thresholded(&rule);
        Ok(Candidate {
            m,
            zero_affected,
            zero_free,
            tree,
            local,
            rule,
        })
    }

    /// Smallest candidate level whose restricted distance to every finer
    /// candidate stays below `lambda^2 sigma^2 2^{j alpha} ln n / n`.
    fn lepski(&self, cands: &[Candidate], n: usize, lambda: f64) -> (usize, Vec<LepskiRow>) {
        let alpha = self.density.alpha();
        let nf = n as f64;
        let base = lambda * lambda * self.cfg.sigma * self.cfg.sigma * nf.ln() / nf;
        let h = (-(self.cfg.grid_p as f64)).exp2();
        let mut rows = Vec::new();
        let mut chosen = None;
        for (i, cm) in cands.iter().enumerate() {
            let (lo, hi) = xi_set(cm.m, self.density.x0(), self.basis.family());
            let nodes = quad::aligned_nodes(lo, hi, h, &[]);
            let base_vals: Vec<f64> = nodes.iter().map(|&x| cm.eval(&self.basis, x)).collect();
            let mut ok = true;
            for cj in &cands[i + 1..] {
                let diff: Vec<f64> = nodes
                    .iter()
                    .zip(&base_vals)
                    .map(|(&x, v)| (v - cj.eval(&self.basis, x)).powi(2))
                    .collect();
                let norm2 = quad::trapezoid(&nodes, &diff);
                let bound = base * (cj.m as f64 * alpha).exp2();
                rows.push(LepskiRow {
                    m: cm.m,
                    j: cj.m,
                    norm2,
                    bound,
                });
                ok &= norm2 <= bound;
            }
            if ok && chosen.is_none() {
                chosen = Some(i);
            }
        }
        (chosen.unwrap_or(cands.len() - 1), rows)
    }

    /// Single-stage thresholding estimator for `1/g` integrable.
    pub fn fit_integrable(&self, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
        let d = &*self.density;
        if !d.inverse_integrable() {
            return Err(Error::Regime(format!(
                "1/g is not integrable for alpha = {} and b = {}; use the two-stage estimator",
                d.alpha(),
                d.b()
            )));
        }
        check_data(xs, ys)?;
        let n = xs.len();
        let (m1, big_j) = levels(n, self.basis.family(), d.alpha(), 0.0, d.beta())?;
        let ledger = if self.needs_constants(false) {
            Some(self.constants(xs, ys)?)
        } else {
            None
        };
        let d_value = match self.cfg.d {
            Tuning::Value(v) => v,
            Tuning::Theory => THEORY_MARGIN * ledger.unwrap().d_min_integrable,
        };
        let bank = CoefficientBank::compute(xs, ys, d, &self.basis, m1, big_j)?;
        let tree = bank.full_tree(m1)?;
        let rule = ThresholdRule::integrable(d_value, n, d.alpha(), self.cfg.sigma);
        let zero_free = tree.thresholded(&rule);
        let (kept, killed) = count_kept(&tree, &zero_free);
        Ok(FitResult {
            branch: Branch::Integrable,
            m_hat: m1,
            zero_affected: CoefficientTree::zeros(m1, m1),
            zero_free,
            tree,
            local: None,
            diagnostics: FitDiagnostics {
                n,
                m1,
                big_j,
                d: d_value,
                lambda: None,
                sigma: self.cfg.sigma,
                delta_b: 0.0,
                oracle: None,
                lepski: Vec::new(),
                ledger,
                density: d.params(),
                threshold: rule,
                kept,
                killed,
            },
            basis: self.basis.clone(),
        })
    }

    /// Routes to the estimator matching the regime of the density.
    pub fn fit(&self, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
        if self.density.inverse_integrable() {
            self.fit_integrable(xs, ys)
        } else {
            self.fit_two_stage(xs, ys)
        }
    }
}

fn check_data(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Input("no observations".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::Input("x and y have different lengths".into()));
    }
    if let Some(x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Input(format!("design point {x} outside [0, 1]")));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Input("non-finite response".into()));
    }
    Ok(())
}

fn count_kept(tree: &EmpiricalTree, thresholded: &CoefficientTree) -> (usize, usize) {
    let mut kept = 0;
    let mut killed = 0;
    for (raw, out) in tree.b_tilde.iter().zip(&thresholded.b) {
        for (r, o) in raw.iter().zip(out) {
            if let Some(r) = r {
                if *r != 0.0 {
                    if *o != 0.0 {
                        kept += 1;
                    } else {
                        killed += 1;
                    }
                }
            }
        }
    }
    (kept, killed)
}

pub fn fit_two_stage(
    xs: &[f64],
    ys: &[f64],
    density: &DesignDensity,
    basis: &PeriodizedBasis,
    cfg: &EstimatorConfig,
) -> Result<FitResult> {
    Estimator::new(Arc::new(basis.clone()), Arc::new(density.clone()), *cfg)?.fit_two_stage(xs, ys)
}

pub fn fit_integrable(
    xs: &[f64],
    ys: &[f64],
    density: &DesignDensity,
    basis: &PeriodizedBasis,
    cfg: &EstimatorConfig,
) -> Result<FitResult> {
    Estimator::new(Arc::new(basis.clone()), Arc::new(density.clone()), *cfg)?.fit_integrable(xs, ys)
}
