//! Command-line front end: `estimate`, `simulate`, `rates` and `fitg`.
//!
//! Every subcommand reads an optional TOML file with a flat schema and lets
//! `--key value` flags override individual keys. Unknown keys are rejected.

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::adapt::{estimate_sigma, Estimator, EstimatorConfig, FSup, Tuning};
use crate::bench::{self, Scenario};
use crate::design::{fit_zero, DesignDensity, DesignKind, DesignSample};
use crate::error::{Error, Result};
use crate::wavelet::{PeriodizedBasis, WaveletFamily};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Maps an error to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Io(_) | Error::InsufficientData(_) | Error::Domain(_) => {
            EXIT_INPUT
        }
        Error::Config(_) | Error::Regime(_) | Error::Level(_) | Error::SampleSize(_) => EXIT_CONFIG,
        Error::Numeric(_)
        | Error::Json(_)
        | Error::ZeroAffectedIndex { .. }
        | Error::ZeroDensityPoint { .. } => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "irregwave",
    version,
    about = "Wavelet regression for designs whose density vanishes at a point"
)]
pub struct Cli {
    /// Upper bound on worker threads for Monte Carlo replicates.
    #[arg(long, global = true, env = "IRREGWAVE_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every random draw; overrides the `seed` key of a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a data set and write fit.json and curve.csv.
    Estimate(EstimateArgs),
    /// Monte Carlo risk table: writes risks.csv and report.json.
    Simulate(ScenarioArgs),
    /// Monte Carlo risk table plus the fitted rate and its verdict.
    Rates(ScenarioArgs),
    /// Fit the order and constant of the design-density zero: writes zerofit.json.
    Fitg(FitgArgs),
}

/// A tuning constant: `theory` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningValue(pub Tuning);

impl FromStr for TuningValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "theory" {
            return Ok(Self(Tuning::Theory));
        }
        s.parse::<f64>()
            .map(|v| Self(Tuning::Value(v)))
            .map_err(|_| format!("expected `theory` or a number, got {s:?}"))
    }
}

/// Either a keyword or a number in a config file.
#[derive(Deserialize)]
#[serde(untagged)]
enum WordOrNumber {
    Number(f64),
    Word(String),
}

impl<'de> Deserialize<'de> for TuningValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match WordOrNumber::deserialize(d)? {
            WordOrNumber::Number(v) => Ok(Self(Tuning::Value(v))),
            WordOrNumber::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Bound on `sup |f|`: `plugin` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FSupValue(pub FSup);

impl FromStr for FSupValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "plugin" {
            return Ok(Self(FSup::Plugin));
        }
        s.parse::<f64>()
            .map(|v| Self(FSup::Manual(v)))
            .map_err(|_| format!("expected `plugin` or a number, got {s:?}"))
    }
}

impl<'de> Deserialize<'de> for FSupValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match WordOrNumber::deserialize(d)? {
            WordOrNumber::Number(v) => Ok(Self(FSup::Manual(v))),
            WordOrNumber::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Noise level used by the thresholds: `estimate` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaValue {
    Estimate,
    Value(f64),
}

impl FromStr for SigmaValue {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "estimate" {
            return Ok(Self::Estimate);
        }
        s.parse::<f64>()
            .map(Self::Value)
            .map_err(|_| format!("expected `estimate` or a number, got {s:?}"))
    }
}

impl<'de> Deserialize<'de> for SigmaValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match WordOrNumber::deserialize(d)? {
            WordOrNumber::Number(v) => Ok(Self::Value(v)),
            WordOrNumber::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    Auto,
    TwoStage,
    Integrable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DesignChoice {
    Random,
    Fixed,
}

/// Keys shared by every estimator run.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelArgs {
    /// Location of the zero of the design density.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Polynomial order of the zero.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Exponential rate of the zero (0 for a polynomial zero).
    #[arg(long)]
    pub b: Option<f64>,
    /// Exponential shape of the zero.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of vanishing moments of the Daubechies family (1 is Haar).
    #[arg(long)]
    pub family: Option<usize>,
    /// Threshold constant: `theory` or a number.
    #[arg(long)]
    pub d: Option<TuningValue>,
    /// Level-selection constant: `theory` or a number.
    #[arg(long)]
    pub lambda: Option<TuningValue>,
    /// Noise level used by thresholds: `estimate` or a number.
    #[arg(long)]
    pub sigma: Option<SigmaValue>,
    /// Bound on sup |f|: `plugin` or a number.
    #[arg(long)]
    pub f_sup: Option<FSupValue>,
    /// Dyadic resolution of the scaling-function tables.
    #[arg(long)]
    pub grid_p: Option<u32>,
    /// Smoothness index used for the oracle level of an exponential zero.
    #[arg(long)]
    pub s_prime: Option<f64>,
}

impl ModelArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            x0: self.x0.or(file.x0),
            alpha: self.alpha.or(file.alpha),
            b: self.b.or(file.b),
            beta: self.beta.or(file.beta),
            family: self.family.or(file.family),
            d: self.d.or(file.d),
            lambda: self.lambda.or(file.lambda),
            sigma: self.sigma.or(file.sigma),
            f_sup: self.f_sup.or(file.f_sup),
            grid_p: self.grid_p.or(file.grid_p),
            s_prime: self.s_prime.or(file.s_prime),
        }
    }

    fn basis(&self) -> Result<Arc<PeriodizedBasis>> {
        let family = WaveletFamily::daubechies(self.family.unwrap_or(3))?;
        Ok(Arc::new(PeriodizedBasis::new(
            family,
            self.grid_p.unwrap_or(12),
        )?))
    }

    fn density(&self) -> Result<DesignDensity> {
        let x0 = self
            .x0
            .ok_or_else(|| Error::Config("missing key `x0`".into()))?;
        let alpha = self
            .alpha
            .ok_or_else(|| Error::Config("missing key `alpha`".into()))?;
        DesignDensity::new(x0, alpha, self.b.unwrap_or(0.0), self.beta.unwrap_or(1.0))
    }

    fn estimator_config(&self, sigma: f64) -> EstimatorConfig {
        EstimatorConfig {
            d: self.d.map_or(Tuning::Theory, |t| t.0),
            lambda: self.lambda.map_or(Tuning::Theory, |t| t.0),
            sigma,
            f_sup: self.f_sup.map_or(FSup::Plugin, |f| f.0),
            grid_p: self.grid_p.unwrap_or(12),
            s_prime: self.s_prime,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateArgs {
    /// TOML file with the keys below; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// CSV file with header `x,y`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving fit.json and curve.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Estimate the zero of the design density from the x values.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fit_g: Option<bool>,
    /// `auto`, `two-stage` or `integrable`.
    #[arg(long)]
    pub estimator: Option<EstimatorChoice>,
    /// The curve is written on 2^curve_p equispaced points.
    #[arg(long)]
    pub curve_p: Option<u32>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioArgs {
    /// TOML scenario file; flags take precedence.
    #[arg(long, visible_alias = "scenario")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory receiving risks.csv and report.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// Catalog entry (`trig3`, `kink`, `constant`, `cusp`) or `probe`.
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub probe_level: Option<u32>,
    #[arg(long)]
    pub probe_index: Option<usize>,
    #[arg(long)]
    pub probe_amplitude: Option<f64>,
    #[arg(long)]
    pub probe_s_prime: Option<f64>,
    /// Standard deviation of the simulated noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// `random` or `fixed`.
    #[arg(long)]
    pub design: Option<DesignChoice>,
    /// Comma-separated increasing sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub risk_grid_p: Option<u32>,
    /// Allowed distance between the fitted and the theoretical slope.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Choose d and lambda by a pilot simulation before the main run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub calibrate: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub calibration_d: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub calibration_lambda: Option<Vec<f64>>,
    #[arg(long)]
    pub pilot_n: Option<usize>,
    #[arg(long)]
    pub pilot_replicates: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitgArgs {
    /// TOML file with the keys below; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// CSV file with header `x` or `x,y`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving zerofit.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Rough location of the zero; the widest gap near it is used.
    #[arg(long)]
    pub x0: Option<f64>,
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Observations read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub xs: Vec<f64>,
    pub ys: Option<Vec<f64>>,
}

/// Reads a CSV file with header `x,y` or `x`. Errors carry the line number.
pub fn read_observations(path: &Path, need_y: bool) -> Result<Observations> {
    let file = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_y = match names.as_slice() {
        ["x", "y"] => true,
        ["x"] if !need_y => false,
        [] | [""] => return Err(Error::Input(format!("{}: empty input", path.display()))),
        _ => {
            let want = if need_y { "`x,y`" } else { "`x` or `x,y`" };
            return Err(Error::Input(format!(
                "{} line 1: expected header {want}, found {:?}",
                path.display(),
                names.join(",")
            )));
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Input(format!("{} line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| {
                Error::Input(format!(
                    "{} line {line}: cannot parse {name} = {raw:?}",
                    path.display()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Input(format!(
                    "{} line {line}: {name} is not finite",
                    path.display()
                )));
            }
            Ok(v)
        };
        let x = field(0, "x")?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Input(format!(
                "{} line {line}: x = {x} outside [0, 1]",
                path.display()
            )));
        }
        xs.push(x);
        if with_y {
            ys.push(field(1, "y")?);
        }
    }
    if xs.is_empty() {
        return Err(Error::Input(format!("{}: no observations", path.display())));
    }
    Ok(Observations {
        xs,
        ys: with_y.then_some(ys),
    })
}

fn out_dir(dir: Option<PathBuf>) -> Result<PathBuf> {
    let dir = dir.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn run_estimate(args: EstimateArgs) -> Result<()> {
    let file: EstimateArgs = load(args.config.as_deref())?;
    let model = args.model.merge(file.model);
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| Error::Config("missing key `input`".into()))?;
    let dir = out_dir(args.out_dir.or(file.out_dir))?;
    let fit_g = args.fit_g.or(file.fit_g).unwrap_or(false);
    let choice = args
        .estimator
        .or(file.estimator)
        .unwrap_or(EstimatorChoice::Auto);
    let curve_p = args.curve_p.or(file.curve_p).unwrap_or(12);

    let obs = read_observations(&input, true)?;
    let ys = obs.ys.expect("y column is required");
    let density = if fit_g {
        let sample = DesignSample::from_points(obs.xs.clone())?;
        let zero = fit_zero(&sample, model.x0)?;
        write_json(&dir.join("zerofit.json"), &zero)?;
        zero.density()?
    } else {
        model.density()?
    };
    let sigma = match model.sigma.unwrap_or(SigmaValue::Estimate) {
        SigmaValue::Value(v) => v,
        SigmaValue::Estimate => estimate_sigma(&obs.xs, &ys, &density)?,
    };
    let estimator = Estimator::new(
        model.basis()?,
        Arc::new(density),
        model.estimator_config(sigma),
    )?;
    let fit = match choice {
        EstimatorChoice::Auto => estimator.fit(&obs.xs, &ys)?,
        EstimatorChoice::TwoStage => estimator.fit_two_stage(&obs.xs, &ys)?,
        EstimatorChoice::Integrable => estimator.fit_integrable(&obs.xs, &ys)?,
    };
    let mut w = create(&dir.join("fit.json"))?;
    fit.write_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = create(&dir.join("curve.csv"))?;
    fit.write_curve_csv(&mut w, curve_p)?;
    w.flush()?;
    println!(
        "branch {:?}, m_hat {}, levels {}..{}, kept {} of {} wavelet coefficients",
        fit.branch,
        fit.m_hat,
        fit.diagnostics.m1,
        fit.diagnostics.big_j,
        fit.diagnostics.kept,
        fit.diagnostics.kept + fit.diagnostics.killed
    );
    Ok(())
}

/// A fully resolved scenario plus the calibration request.
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub calibration: Option<(Vec<f64>, Vec<f64>, usize, usize)>,
    pub out_dir: PathBuf,
}

pub fn resolve_scenario(args: ScenarioArgs, seed: Option<u64>) -> Result<ResolvedScenario> {
    let file: ScenarioArgs = load(args.config.as_deref())?;
    let model = args.model.merge(file.model);
    let basis = model.basis()?;
    let density = Arc::new(model.density()?);
    let noise = args.noise.or(file.noise).unwrap_or(1.0);
    let sigma = match model.sigma {
        None => noise,
        Some(SigmaValue::Value(v)) => v,
        Some(SigmaValue::Estimate) => {
            return Err(Error::Config("simulations need a numeric `sigma`".into()));
        }
    };
    let name = args.name.or(file.name).unwrap_or_else(|| "scenario".into());
    let function_name = args
        .function
        .or(file.function)
        .unwrap_or_else(|| "trig3".into());
    let function = if function_name == "probe" {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
        };
        let level = args
            .probe_level
            .or(file.probe_level)
            .ok_or_else(|| Error::Config("missing key `probe_level`".into()))?;
        let index = match args.probe_index.or(file.probe_index) {
            Some(k) => k,
            None => ((1u64 << level) as f64 * density.x0()).floor() as usize,
        };
        bench::lower_bound_probe(
            basis.clone(),
            level,
            index,
            need(
                args.probe_amplitude.or(file.probe_amplitude),
                "probe_amplitude",
            )?,
            need(args.probe_s_prime.or(file.probe_s_prime), "probe_s_prime")?,
        )?
    } else {
        bench::catalog_entry(&function_name)?
    };
    let design = match args.design.or(file.design).unwrap_or(DesignChoice::Random) {
        DesignChoice::Random => DesignKind::Random,
        DesignChoice::Fixed => DesignKind::Fixed,
    };
    let scenario = Scenario {
        name,
        function,
        density,
        basis,
        config: model.estimator_config(sigma),
        design,
        noise,
        n_grid: args
            .n_grid
            .or(file.n_grid)
            .unwrap_or_else(|| (10..=14).map(|p| 1usize << p).collect()),
        replicates: args.replicates.or(file.replicates).unwrap_or(100),
        seed: seed.or(args.seed).or(file.seed).unwrap_or(0),
        risk_grid_p: args.risk_grid_p.or(file.risk_grid_p).unwrap_or(12),
        tolerance: args.tolerance.or(file.tolerance).unwrap_or(0.15),
    };
    scenario.validate()?;
    let calibration = if args.calibrate.or(file.calibrate).unwrap_or(false) {
        let grid = vec![0.25, 0.5, 1.0, 2.0];
        Some((
            args.calibration_d
                .or(file.calibration_d)
                .unwrap_or_else(|| grid.clone()),
            args.calibration_lambda
                .or(file.calibration_lambda)
                .unwrap_or(grid),
            args.pilot_n
                .or(file.pilot_n)
                .unwrap_or(*scenario.n_grid.last().unwrap()),
            args.pilot_replicates
                .or(file.pilot_replicates)
                .unwrap_or(20),
        ))
    } else {
        None
    };
    Ok(ResolvedScenario {
        scenario,
        calibration,
        out_dir: args
            .out_dir
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from(".")),
    })
}

pub fn run_scenario(
    args: ScenarioArgs,
    seed: Option<u64>,
    threads: Option<usize>,
    with_rates: bool,
) -> Result<()> {
    let ResolvedScenario {
        mut scenario,
        calibration,
        out_dir: dir,
    } = resolve_scenario(args, seed)?;
    let dir = out_dir(Some(dir))?;
    if let Some((d_grid, lambda_grid, pilot_n, reps)) = calibration {
        let cal = bench::calibrate(&scenario, &d_grid, &lambda_grid, pilot_n, reps, threads)?;
        scenario.config.d = Tuning::Value(cal.d);
        scenario.config.lambda = Tuning::Value(cal.lambda);
        write_json(&dir.join("calibration.json"), &cal)?;
        println!(
            "calibrated d = {}, lambda = {} at n = {pilot_n}",
            cal.d, cal.lambda
        );
    }
    let mut report = bench::run_monte_carlo(&scenario, threads)?;
    if !with_rates {
        report.slope = None;
        report.intercept = None;
        report.slope_stderr = None;
        report.pass = None;
    }
    let mut w = create(&dir.join("risks.csv"))?;
    report.write_csv(&mut w)?;
    w.flush()?;
    write_json(&dir.join("report.json"), &report)?;
    for r in &report.rows {
        println!(
            "n = {:>7}  mean risk {:.6e}  stderr {:.2e}  mean m_hat {:.2}",
            r.n, r.mean_risk, r.stderr, r.mean_m_hat
        );
    }
    if with_rates {
        match (report.slope, report.slope_stderr, report.pass) {
            (Some(slope), Some(se), Some(pass)) => println!(
                "slope {slope:.4} (stderr {se:.4}) on {}, theory {:.4}, tolerance {}: {}",
                report.scale,
                report.theory,
                report.tolerance,
                if pass { "PASS" } else { "FAIL" }
            ),
            _ => println!("slope unavailable: at least 3 sample sizes are needed"),
        }
    }
    Ok(())
}

pub fn run_fitg(args: FitgArgs) -> Result<()> {
    let file: FitgArgs = load(args.config.as_deref())?;
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| Error::Config("missing key `input`".into()))?;
    let dir = out_dir(args.out_dir.or(file.out_dir))?;
    let obs = read_observations(&input, false)?;
    let sample = DesignSample::from_points(obs.xs)?;
    let zero = fit_zero(&sample, args.x0.or(file.x0))?;
    write_json(&dir.join("zerofit.json"), &zero)?;
    println!(
        "x0_hat {:.6}, alpha_hat {:.4}, cg_hat {:.4}, zero detected: {}",
        zero.x0_hat, zero.alpha_hat, zero.cg_hat, zero.zero_detected
    );
    Ok(())
}

/// Parses `args` and runs the chosen subcommand, returning the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Simulate(a) => run_scenario(a, cli.seed, cli.threads, false),
        Command::Rates(a) => run_scenario(a, cli.seed, cli.threads, true),
        Command::Fitg(a) => run_fitg(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
