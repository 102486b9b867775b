//! Command-line surface. `execute` returns the process exit status: 0 when every case
//! passes, 1 when a case fails or a computation errors, 2 for configuration errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hsb_core::chart::{ChartPoint, TangentVector};
use hsb_core::connections::christoffel;
use hsb_core::curvature::{curvature, ricci_real_sb};
use hsb_core::geodesy::{integrate_geodesic, Curve};
use hsb_core::linalg::C64;
use hsb_core::models::registry;
use hsb_core::{Flavor, MetricModel, ModelSpec};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentId, KSetting, RhoGrid};
use crate::error::CliError;
use crate::experiments;
use crate::report::{table_csv, Report, Table};

/// Table entries at or below this magnitude are omitted from component listings.
const COMPONENT_FLOOR: f64 = 1e-13;

#[derive(Debug, Parser)]
#[command(name = "hsb", version, about = "Strominger-Bismut connection calculus and verification suites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlavorArg {
    Lc,
    Sb,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Lc => Flavor::LeviCivita,
            FlavorArg::Sb => Flavor::StromingerBismut,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariationExperiment {
    Thm11,
    Thm12,
    Myers,
    Synge,
}

impl From<VariationExperiment> for ExperimentId {
    fn from(v: VariationExperiment) -> Self {
        match v {
            VariationExperiment::Thm11 => ExperimentId::Thm11,
            VariationExperiment::Thm12 => ExperimentId::Thm12,
            VariationExperiment::Myers => ExperimentId::Myers,
            VariationExperiment::Synge => ExperimentId::Synge,
        }
    }
}

/// Flags shared by the experiment-running subcommands.
#[derive(Clone, Debug, Default, Args)]
pub struct RunFlags {
    /// Model as `name(params)`, e.g. `hopf(2)`; overrides the config.
    #[arg(long)]
    pub model: Option<String>,
    /// JSON experiment config (see docs/config.schema.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Number of seeded cases.
    #[arg(long)]
    pub cases: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nonzero Christoffel symbols at a point, as JSON.
    Connections {
        #[arg(long)]
        model: String,
        /// Complex coordinates, e.g. `0.3+0.1i,-0.2i`.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, value_enum, default_value = "sb")]
        flavor: FlavorArg,
    },
    /// Curvature structure at a point, as JSON.
    Curvature {
        #[arg(long)]
        model: String,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Include the real and holomorphic Ricci forms.
        #[arg(long)]
        ricci: bool,
        /// Holomorphic sectional curvature along this real direction (comma-separated).
        #[arg(long, allow_hyphen_values = true)]
        hsc: Option<String>,
    },
    /// Integrates a geodesic and writes the samples as CSV.
    Geodesic {
        #[arg(long)]
        model: String,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        /// Initial velocity as real coordinates (x¹..xⁿ, y¹..yⁿ).
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
        #[arg(long)]
        length: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Second-variation experiments.
    Variation {
        #[arg(long, value_enum)]
        experiment: VariationExperiment,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Laplacian and volume comparison at one point.
    Compare {
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// A number or `auto`.
        #[arg(long = "K")]
        k: Option<KSetting>,
        /// `start:end:count`
        #[arg(long)]
        rho_grid: Option<RhoGrid>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Runs a named experiment: identities, thm11, thm12, myers, synge, laplacian, volume or full-suite.
    Run {
        experiment: ExperimentId,
        #[command(flatten)]
        flags: RunFlags,
    },
}

/// Parses `a+bi` style complex numbers; `i` alone and missing real parts are allowed.
pub fn parse_complex(text: &str) -> Result<C64, CliError> {
    let bad = || CliError::Config(format!("'{text}' is not a complex number"));
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // The imaginary part starts at the last sign that is not an exponent sign.
    let split = body
        .char_indices()
        .filter(|&(k, c)| (c == '+' || c == '-') && k > 0 && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
        .map(|(k, _)| k)
        .next_back();
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse::<f64>().map_err(|_| bad())?,
    };
    let re = if re.is_empty() { 0.0 } else { re.parse::<f64>().map_err(|_| bad())? };
    Ok(C64::new(re, im))
}

pub fn parse_point(text: &str, n: usize) -> Result<ChartPoint, CliError> {
    let z = text.split(',').map(parse_complex).collect::<Result<Vec<_>, _>>()?;
    if z.len() != n {
        return Err(CliError::Config(format!("point has {} coordinates, the model has {n}", z.len())));
    }
    Ok(ChartPoint::new(z))
}

pub fn parse_real_vector(text: &str, n: usize) -> Result<TangentVector, CliError> {
    let x = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Config(format!("'{t}' is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if x.len() != 2 * n {
        return Err(CliError::Config(format!("vector has {} real components, expected {}", x.len(), 2 * n)));
    }
    Ok(TangentVector::from_real(x))
}

fn resolve_model(spec: &str) -> Result<(ModelSpec, MetricModel), CliError> {
    let spec: ModelSpec = spec.parse()?;
    let model = registry(&spec)?;
    Ok((spec, model))
}

fn load_config(flags: &RunFlags, experiment: ExperimentId) -> Result<ExperimentConfig, CliError> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let model = flags
                .model
                .as_deref()
                .ok_or_else(|| CliError::Config("either --model or --config is required".into()))?;
            ExperimentConfig::new(model.parse()?, experiment)
        }
    };
    config.experiment = experiment;
    if let Some(m) = &flags.model {
        let fd_step = config.model.fd_step;
        config.model = m.parse()?;
        config.model.fd_step = config.model.fd_step.or(fd_step);
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(cases) = flags.cases {
        config.params.cases = cases;
    }
    if let Some(report) = &flags.report {
        match flags.format {
            Format::Json => config.output.report = Some(report.clone()),
            Format::Csv => config.output.csv = Some(report.clone()),
        }
    }
    config.validate()?;
    Ok(config)
}

/// Writes the report to the configured outputs, or to stdout in `format` when there are none.
fn emit(report: &Report, config: &ExperimentConfig, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = &config.output.report {
        report.write_json(path)?;
    }
    if let Some(path) = &config.output.csv {
        report.write_csv(path)?;
    }
    if config.output.report.is_none() && config.output.csv.is_none() {
        let text = match format {
            Format::Json => report.to_json(),
            Format::Csv => report.cases_csv()?,
        };
        out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>"))?;
    }
    Ok(())
}

fn run_config(config: &ExperimentConfig, format: Format, out: &mut dyn Write) -> Result<i32, CliError> {
    let report = experiments::run(config)?;
    emit(&report, config, format, out)?;
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn print_json(value: &impl Serialize, out: &mut dyn Write) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>"))
}

#[derive(Serialize)]
struct ConnectionListing {
    model: String,
    point: Vec<f64>,
    flavor: Flavor,
    components: Vec<hsb_core::connections::Component>,
}

#[derive(Serialize)]
struct CurvatureListing {
    model: String,
    point: Vec<f64>,
    skew_defect: f64,
    type_vanishing_defect: f64,
    holomorphic_trace_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ricci_real: Option<Vec<Vec<f64>>>,
    /// `M_{kj}` as `[re, im]` pairs, with `𝔯ic(V) = Σ M_{kj} V^k V̄^j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    ricci_holomorphic: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hsc: Option<f64>,
}

pub fn geodesic_table(model: &MetricModel, curve: &Curve) -> Result<Table, CliError> {
    let n = curve.n();
    let columns = ["t".to_string()]
        .into_iter()
        .chain((1..=n).flat_map(|k| [format!("re_z{k}"), format!("im_z{k}")]))
        .chain(["speed".to_string(), "residual".to_string()]);
    let mut table = Table::new(columns);
    let speeds = curve.speeds(model)?;
    let residuals = curve.pointwise_residuals(model, Flavor::StromingerBismut)?;
    for (k, p) in curve.points.iter().enumerate() {
        let mut row = vec![curve.t[k]];
        row.extend(p.z.iter().flat_map(|z| [z.re, z.im]));
        row.extend([speeds[k], residuals[k]]);
        table.push(row);
    }
    Ok(table)
}

/// Runs a parsed command line, writing primary output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Connections { model, point, flavor } => {
            let (spec, model) = resolve_model(&model)?;
            let p = parse_point(&point, model.n())?;
            let field = christoffel(flavor.into(), &model, &p)?;
            let listing = ConnectionListing {
                model: spec.to_string(),
                point: p.to_real(),
                flavor: flavor.into(),
                components: field.nonzero_components(COMPONENT_FLOOR),
            };
            print_json(&listing, out)?;
            Ok(0)
        }
        Command::Curvature { model, point, ricci, hsc } => {
            let (spec, model) = resolve_model(&model)?;
            let n = model.n();
            let p = parse_point(&point, n)?;
            let r = curvature(Flavor::StromingerBismut, &model, &p)?;
            let hsc = hsc.map(|d| parse_real_vector(&d, n).and_then(|x| Ok(r.hsc(&x)?))).transpose()?;
            let (ricci_real, ricci_holomorphic) = if ricci {
                let basis: Vec<TangentVector> = (0..2 * n).map(|a| TangentVector::coordinate(n, a)).collect();
                let real = basis
                    .iter()
                    .map(|x| basis.iter().map(|y| ricci_real_sb(&model, &p, x, y)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                let m = r.contracted_ricci_matrix();
                let hol = (0..n).map(|k| (0..n).map(|j| [m[(k, j)].re, m[(k, j)].im]).collect()).collect();
                (Some(real), Some(hol))
            } else {
                (None, None)
            };
            let listing = CurvatureListing {
                model: spec.to_string(),
                point: p.to_real(),
                skew_defect: r.skew_defect(),
                type_vanishing_defect: r.type_vanishing_defect(),
                holomorphic_trace_defect: r.holomorphic_trace_defect(),
                ricci_real,
                ricci_holomorphic,
                hsc,
            };
            print_json(&listing, out)?;
            Ok(0)
        }
        Command::Geodesic { model, from, dir, length, steps, out: path } => {
            let (_, model) = resolve_model(&model)?;
            let n = model.n();
            let p = parse_point(&from, n)?;
            let v = parse_real_vector(&dir, n)?;
            let curve = integrate_geodesic(&model, &p, &v, length, steps)?;
            let text = table_csv(&geodesic_table(&model, &curve)?)?;
            match path {
                Some(path) => crate::report::write_file(&path, &text)?,
                None => out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>"))?,
            }
            Ok(0)
        }
        Command::Variation { experiment, flags } => {
            let config = load_config(&flags, experiment.into())?;
            run_config(&config, flags.format, out)
        }
        Command::Compare { point, k, rho_grid, flags } => {
            let mut config = load_config(&flags, ExperimentId::Laplacian)?;
            if let Some(point) = point {
                let n = registry(&config.model)?.n();
                config.params.point = Some(parse_point(&point, n)?.to_real());
            }
            if let Some(k) = k {
                config.params.k = k;
            }
            if let Some(grid) = rho_grid {
                config.params.rho_grid = grid;
            }
            config.validate()?;
            let report = experiments::run_many(&config, &[ExperimentId::Laplacian, ExperimentId::Volume], "compare")?;
            emit(&report, &config, flags.format, out)?;
            Ok(if report.all_pass() { 0 } else { 1 })
        }
        Command::Run { experiment, flags } => {
            let config = load_config(&flags, experiment)?;
            run_config(&config, flags.format, out)
        }
    }
}

/// Parses `args` and runs; errors are printed to stderr and mapped to their exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Reads a JSON report from disk.
pub fn read_report(path: &Path) -> Result<Report, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    Report::from_json(&text)
}
