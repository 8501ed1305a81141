//! Monte Carlo risk measurement and convergence-rate regression.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::adapt::{Estimator, EstimatorConfig, Tuning};
use crate::design::{DesignDensity, DesignKind};
use crate::error::{Error, Result};
use crate::func::RealFn;
use crate::quad;
use crate::wavelet::{Generator, PeriodizedBasis};

type Shared = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Declared smoothness labels of a test function. `p = None` stands for
/// `p = infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovLabel {
    pub s: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub radius: f64,
}

impl BesovLabel {
    /// `s' = s + 1/2 - 1/p`.
    pub fn s_prime(&self) -> f64 {
        self.s + 0.5 - self.p.map_or(0.0, |p| 1.0 / p)
    }
}

#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub nominal: BesovLabel,
    pub notes: String,
    f: Shared,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("nominal", &self.nominal)
            .finish()
    }
}

impl TestFunction {
    pub fn new(
        name: &str,
        nominal: BesovLabel,
        notes: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            nominal,
            notes: notes.into(),
            f: Arc::new(f),
        }
    }
}

impl RealFn for TestFunction {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

fn circular(x: f64, c: f64) -> f64 {
    let d = (x - c).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Built-in periodic test functions.
pub fn catalog() -> Vec<TestFunction> {
    vec![
        TestFunction::new(
            "trig3",
            BesovLabel {
                s: 1.0,
                p: None,
                q: None,
                radius: 10.0,
            },
            "sin(2 pi x) + cos(4 pi x)/2 + sin(6 pi x)/4; analytic, labeled with s = 1",
            |x| (2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).cos() + 0.25 * (6.0 * PI * x).sin(),
        ),
        TestFunction::new(
            "kink",
            BesovLabel {
                s: 2.0,
                p: Some(1.0),
                q: None,
                radius: 10.0,
            },
            "4 d^3 - 3 d with d the circular distance to 0.7; one kink at 0.7",
            |x| {
                let d = circular(x, 0.7);
                4.0 * d * d * d - 3.0 * d
            },
        ),
        TestFunction::new(
            "constant",
            BesovLabel {
                s: 20.0,
                p: None,
                q: None,
                radius: 1.0,
            },
            "f = 1",
            |_| 1.0,
        ),
        TestFunction::new(
            "cusp",
            BesovLabel {
                s: 1.0,
                p: Some(2.0),
                q: Some(2.0),
                radius: 10.0,
            },
            "2 sqrt(d) with d the circular distance to 0.5; square-root cusp at the usual zero",
            |x| 2.0 * circular(x, 0.5).sqrt(),
        ),
    ]
}

pub fn catalog_entry(name: &str) -> Result<TestFunction> {
    catalog()
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::Config(format!("unknown test function {name:?}")))
}

/// `gamma_j psi_jk` with `gamma_j = c 2^{-j s'}`, the building block of the
/// lower-bound construction.
pub fn lower_bound_probe(
    basis: Arc<PeriodizedBasis>,
    j: u32,
    k: usize,
    c: f64,
    s_prime: f64,
) -> Result<TestFunction> {
    if !(c > 0.0) {
        return Err(Error::Config("probe amplitude must be positive".into()));
    }
    if j < basis.min_level() {
        return Err(Error::Level(format!("probe level {j} below minimal level")));
    }
    let gamma = c * (-(j as f64) * s_prime).exp2();
    let label = BesovLabel {
        s: s_prime,
        p: Some(2.0),
        q: Some(2.0),
        radius: c,
    };
    Ok(TestFunction::new(
        &format!("probe_j{j}_k{k}"),
        label,
        &format!("{gamma:e} psi_{{{j},{k}}}"),
        move |x| gamma * basis.element(Generator::Wavelet, j, k as i64, x),
    ))
}

/// `int_0^1 (f_hat - f)^2` by the trapezoid rule on `2^p + 1` nodes.
pub fn l2_risk(f_hat: &dyn RealFn, f: &dyn RealFn, grid_p: u32) -> f64 {
    let n = 1usize << grid_p;
    let h = 1.0 / n as f64;
    let sq = |i: usize| {
        let x = i as f64 * h;
        (f_hat.eval(x) - f.eval(x)).powi(2)
    };
    let inner: f64 = (1..n).map(sq).sum();
    h * (inner + 0.5 * (sq(0) + sq(n)))
}

/// One simulation study.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub function: TestFunction,
    pub density: Arc<DesignDensity>,
    pub basis: Arc<PeriodizedBasis>,
    pub config: EstimatorConfig,
    pub design: DesignKind,
    /// Standard deviation of the noise added to the responses.
    pub noise: f64,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub risk_grid_p: u32,
    /// Allowed distance between fitted and theoretical slope.
    pub tolerance: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "n_grid must be nonempty and strictly increasing".into(),
            ));
        }
        if self.replicates < 2 {
            return Err(Error::Config("need at least 2 replicates".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config("noise level must be nonnegative".into()));
        }
        self.config.validate()
    }

    /// Responses `f(x) + noise * xi` on a design of size `n` for replicate `r`.
    pub fn generate(&self, n_index: usize, replicate: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_grid[n_index];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((n_index as u64) << 32) | replicate as u64);
        let xs = match self.design {
            DesignKind::Random => self.density.draw_with(n, &mut rng, self.seed).xs,
            DesignKind::Fixed => self.density.fixed_grid(n).xs,
        };
        let ys = xs
            .iter()
            .map(|&x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                self.function.eval(x) + self.noise * e
            })
            .collect();
        (xs, ys)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: usize,
    pub mean_risk: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub failures: usize,
    pub mean_m_hat: f64,
    pub min_m_hat: u32,
    pub max_m_hat: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scenario: String,
    pub function: String,
    pub nominal: BesovLabel,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
    pub seed: u64,
    pub rows: Vec<RiskRow>,
    /// Regression abscissa: `"ln n"` or `"ln ln n"`.
    pub scale: String,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub theory: f64,
    pub tolerance: f64,
    pub pass: Option<bool>,
}

impl RiskReport {
    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "n,mean_risk,stderr")?;
        for r in &self.rows {
            writeln!(w, "{},{:.16e},{:.16e}", r.n, r.mean_risk, r.stderr)?;
        }
        Ok(())
    }

    pub fn risks_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].mean_risk < w[0].mean_risk)
    }
}

struct Replicate {
    risk: f64,
    m_hat: u32,
}

/// Runs every replicate of every sample size, in parallel over replicates with
/// at most `threads` workers. Results are reduced in a fixed order, so the
/// report does not depend on the thread count.
pub fn run_monte_carlo(scenario: &Scenario, threads: Option<usize>) -> Result<RiskReport> {
    scenario.validate()?;
    let estimator = Estimator::new(
        scenario.basis.clone(),
        scenario.density.clone(),
        scenario.config,
    )?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;

    let mut rows = Vec::new();
    for (i, &n) in scenario.n_grid.iter().enumerate() {
        let results: Vec<Result<Replicate>> = pool.install(|| {
            (0..scenario.replicates)
                .into_par_iter()
                .map(|r| {
                    let (xs, ys) = scenario.generate(i, r);
                    let fit = estimator.fit(&xs, &ys)?;
                    Ok(Replicate {
                        risk: l2_risk(&fit, &scenario.function, scenario.risk_grid_p),
                        m_hat: fit.m_hat,
                    })
                })
                .collect()
        });
        let mut ok = Vec::new();
        let mut first_err = None;
        for r in results {
            match r {
                Ok(v) => ok.push(v),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let failures = scenario.replicates - ok.len();
        if failures * 20 > scenario.replicates || ok.len() < 2 {
            let e = first_err.unwrap();
            return Err(match e {
                Error::SampleSize(_) | Error::Regime(_) | Error::Config(_) | Error::Level(_) => e,
                other => Error::Numeric(format!(
                    "{failures} of {} replicates failed at n = {n}: {other}",
                    scenario.replicates
                )),
            });
        }
        let k = ok.len() as f64;
        let mean = ok.iter().map(|r| r.risk).sum::<f64>() / k;
        let var = ok.iter().map(|r| (r.risk - mean).powi(2)).sum::<f64>() / (k - 1.0);
        rows.push(RiskRow {
            n,
            mean_risk: mean,
            stderr: (var / k).sqrt(),
            replicates: ok.len(),
            failures,
            mean_m_hat: ok.iter().map(|r| r.m_hat as f64).sum::<f64>() / k,
            min_m_hat: ok.iter().map(|r| r.m_hat).min().unwrap(),
            max_m_hat: ok.iter().map(|r| r.m_hat).max().unwrap(),
        });
    }

    let d = &scenario.density;
    let theory = theoretical_exponent(
        scenario.function.nominal.s,
        scenario.function.nominal.p,
        d.alpha(),
        d.b(),
        d.beta(),
    );
    let mut report = RiskReport {
        scenario: scenario.name.clone(),
        function: scenario.function.name.clone(),
        nominal: scenario.function.nominal,
        alpha: d.alpha(),
        b: d.b(),
        beta: d.beta(),
        seed: scenario.seed,
        rows,
        scale: if d.b() > 0.0 { "ln ln n" } else { "ln n" }.into(),
        slope: None,
        intercept: None,
        slope_stderr: None,
        theory,
        tolerance: scenario.tolerance,
        pass: None,
    };
    if let Ok(fit) = regression(&report) {
        report.slope = Some(fit.slope);
        report.intercept = Some(fit.intercept);
        report.slope_stderr = Some(fit.stderr);
        // the band of two standard errors around the slope must meet the tolerance band
        let gap = (fit.slope - theory).abs() - 2.0 * fit.stderr;
        report.pass = Some(gap <= scenario.tolerance);
    }
    Ok(report)
}

struct SlopeFit {
    slope: f64,
    intercept: f64,
    stderr: f64,
}

fn regression(report: &RiskReport) -> Result<SlopeFit> {
    if report.rows.len() < 3 {
        return Err(Error::InsufficientData(
            "rate regression needs at least 3 sample sizes".into(),
        ));
    }
    let loglog = report.b > 0.0;
    let pts: Vec<(f64, f64, f64)> = report
        .rows
        .iter()
        .map(|r| {
            let ln = (r.n as f64).ln();
            let x = if loglog { ln.ln() } else { ln };
            // delta method: var(log mean) ~ (se / mean)^2
            (x, r.mean_risk.ln(), (r.stderr / r.mean_risk).powi(2))
        })
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Numeric("nonpositive mean risk in regression".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "degenerate sample-size grid".into(),
        ));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let var: f64 = pts.iter().map(|p| ((p.0 - mx) / sxx).powi(2) * p.2).sum();
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        stderr: var.sqrt(),
    })
}

/// Least-squares slope of log mean risk against `ln n` (or `ln ln n` for an
/// exponential zero).
pub fn rate_slope(report: &RiskReport) -> Result<f64> {
    regression(report).map(|f| f.slope)
}

/// Exponent of the minimax rate: `-2s/(2s+1)` if `alpha s < s'`, otherwise
/// `-2s'/(2s'+alpha)` for a polynomial zero; `-2s'/beta` on the `ln n` scale
/// for an exponential zero.
pub fn theoretical_exponent(s: f64, p: Option<f64>, alpha: f64, b: f64, beta: f64) -> f64 {
    let s_prime = s + 0.5 - p.map_or(0.0, |p| 1.0 / p);
    if b > 0.0 {
        -2.0 * s_prime / beta
    } else if alpha * s < s_prime {
        -2.0 * s / (2.0 * s + 1.0)
    } else {
        -2.0 * s_prime / (2.0 * s_prime + alpha)
    }
}

/// Result of choosing `d` and `lambda` by a pilot simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub d: f64,
    pub lambda: f64,
    pub pilot_n: usize,
    pub replicates: usize,
    /// `(d, lambda, mean risk)` for every grid point.
    pub table: Vec<(f64, f64, f64)>,
}

/// Picks the `(d, lambda)` pair with the smallest mean pilot risk. This is a
/// practical tuning device outside the theory.
pub fn calibrate(
    scenario: &Scenario,
    d_grid: &[f64],
    lambda_grid: &[f64],
    pilot_n: usize,
    replicates: usize,
    threads: Option<usize>,
) -> Result<Calibration> {
    let mut table = Vec::new();
    for &d in d_grid {
        for &lambda in lambda_grid {
            let mut pilot = scenario.clone();
            pilot.config.d = Tuning::Value(d);
            pilot.config.lambda = Tuning::Value(lambda);
            pilot.n_grid = vec![pilot_n];
            pilot.replicates = replicates;
            pilot.seed = scenario.seed ^ 0x5eed_ca11;
            let report = run_monte_carlo(&pilot, threads)?;
            table.push((d, lambda, report.rows[0].mean_risk));
        }
    }
    let best = table
        .iter()
        .copied()
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .ok_or_else(|| Error::Config("empty calibration grid".into()))?;
    Ok(Calibration {
        d: best.0,
        lambda: best.1,
        pilot_n,
        replicates,
        table,
    })
}

/// Integration of `f` against itself, for closed-form checks.
pub fn squared_norm(f: &dyn RealFn, grid_p: u32) -> f64 {
    let n = 1usize << grid_p;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f.eval(x).powi(2)).collect();
    quad::trapezoid(&xs, &ys)
}
