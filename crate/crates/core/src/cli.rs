//! Command-line front end. Every command writes CSV preceded by `#` metadata
//! lines describing the grid, tolerances and seed.

use std::ffi::OsString;
use std::fmt::Write as _;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::Error;
use crate::metrics::{
    optimize_r0_on, quadratic_fit, EvalGrid, GridPolicy, LinearizedR0, OracleCurve, TablePolicy, nmse_table,
};
use crate::models::{
    build_model, modified_intensity_uniform_params, point_approx_params, second_reduced_vasylyev_params, AlphaMode,
    LinearizedSpec, ModelKind, ModelOptions,
};
use crate::oracle::{hp_exact_radial, QuadratureSpec};
use crate::stats::{sample_hp, ks_distance, HpDensity, Histogram, CDF_NODES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fso-pointing", version, about = "Pointing-error transmission efficiency of free-space optical links")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Output file, or `-` for stdout.
    #[arg(long, global = true, default_value = "-")]
    pub output: String,
    /// Relative tolerance of the exact-oracle quadrature.
    #[arg(long, global = true, default_value = "1e-10")]
    pub tol: f64,
    /// Upper end of the NMSE grid in units of wz (wide beams) or Ra (narrow
    /// beams). Defaults to 3 and 2 respectively.
    #[arg(long, global = true)]
    pub grid_max_mult: Option<f64>,
    #[arg(long, global = true, default_value_t = 1000)]
    pub grid_points: usize,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Precision::Table)]
    pub precision: Precision,
    /// Aperture radius; every length is reported relative to it.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub ra: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    /// 6 significant digits.
    Table,
    /// 17 significant digits, enough to round-trip.
    Full,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evaluate one model, and optionally the exact oracle, at one radius or
    /// on the NMSE grid.
    Eval(EvalArgs),
    /// NMSE of the wide-beam models.
    Table1(Table1Args),
    /// NMSE of the narrow-beam models.
    Table2(Table2Args),
    /// Optimal calibration distance of the linearized model.
    OptimizeR0(OptimizeArgs),
    /// Sweep the optimal calibration distance and fit a quadratic.
    FitR0(FitArgs),
    /// Analytic density of h_p under Rayleigh jitter, with an optional
    /// Monte Carlo histogram.
    Pdf(PdfArgs),
    /// Monte Carlo histogram of h_p under Rayleigh jitter.
    Mc(McArgs),
    /// NMSE of the point approximation for several exponents k.
    KStudy(KStudyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub wz_over_ra: f64,
    /// Single radius; omit to use the NMSE grid.
    #[arg(long)]
    pub r_over_ra: Option<f64>,
    #[arg(long)]
    pub no_oracle: bool,
    /// Splits of the linearized model.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Calibration distance of the linearized model; optimized when omitted.
    #[arg(long)]
    pub r0_over_ra: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value = "asymptotic")]
    pub alpha_mode: AlphaMode,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    pub ratios: Vec<f64>,
    /// Optimize r0 per column, or use the published quadratic relation.
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub optimize_linearized: bool,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct Table2Args {
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value = "asymptotic")]
    pub alpha_mode: AlphaMode,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    pub wz_over_ra: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,6")]
    pub ratio_range: Vec<f64>,
    #[arg(long, default_value_t = 9)]
    pub ratio_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    ExpFamily,
    PointApprox,
    SecondReduced,
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// `c1,c2` for exp-family, `alpha` for point-approx, `lambda` for
    /// second-reduced.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub params: Option<Vec<f64>>,
    /// Derive the parameters from the geometry instead of `--params`
    /// (exp-family uses the modified intensity uniform model).
    #[arg(long)]
    pub wz_over_ra: Option<f64>,
    /// Jitter standard deviation, in the same unit as `--ra`.
    #[arg(long)]
    pub sigma_s: f64,
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PdfArgs {
    #[command(flatten)]
    pub density: DensityArgs,
    /// Monte Carlo samples for the empirical column; 0 disables it.
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub density: DensityArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct KStudyArgs {
    #[arg(long, default_value_t = 0.1)]
    pub wz_over_ra: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub k_list: Vec<u32>,
    #[arg(long, default_value = "asymptotic")]
    pub alpha_mode: AlphaMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Rendered command output. `failures` counts cells that could not be
/// computed; they appear as `NaN` and make the process exit with code 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub failures: usize,
}

struct Csv {
    meta: String,
    body: String,
    precision: Precision,
    failures: usize,
}

impl Csv {
    fn new(global: &GlobalArgs, args: &[String], spec: &QuadratureSpec) -> Self {
        let mut csv = Self {
            meta: String::new(),
            body: String::new(),
            precision: global.precision,
            failures: 0,
        };
        csv.meta(format!("fso-pointing {}", env!("CARGO_PKG_VERSION")));
        csv.meta(format!("args: {}", args.join(" ")));
        csv.meta(format!("ra: {}", global.ra));
        csv.meta(format!(
            "quadrature: rel_tol={:e} abs_tol={:e} max_subdivisions={}",
            spec.rel_tol, spec.abs_tol, spec.max_subdivisions
        ));
        csv
    }

    fn meta(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.meta, "# {}", line.as_ref());
    }

    fn num(&self, x: f64) -> String {
        format_number(x, self.precision)
    }

    fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let line: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    fn fail(&mut self, what: &str, e: &Error) {
        self.failures += 1;
        self.meta(format!("error: {what}: {e}"));
    }

    fn finish(self) -> Output {
        Output {
            text: self.meta + &self.body,
            failures: self.failures,
        }
    }
}

pub fn format_number(x: f64, precision: Precision) -> String {
    match precision {
        Precision::Table => format!("{x:.5e}"),
        Precision::Full => format!("{x:.16e}"),
    }
}

fn grid_meta(grid: &EvalGrid, ra: f64) -> String {
    format!(
        "grid: r/ra in [{}, {}], {} points",
        grid.r_min / ra,
        grid.r_max / ra,
        grid.count
    )
}

fn policy(global: &GlobalArgs) -> CliResult<(GridPolicy, QuadratureSpec)> {
    if !(global.ra > 0.0 && global.ra.is_finite()) {
        return Err(CliError::Usage(format!("--ra must be positive, got {}", global.ra)));
    }
    if let Some(m) = global.grid_max_mult {
        if !(m > 0.0 && m.is_finite()) {
            return Err(CliError::Usage(format!("--grid-max-mult must be positive, got {m}")));
        }
    }
    let spec = QuadratureSpec::default().with_rel_tol(global.tol);
    spec.validate()?;
    let grid = GridPolicy {
        max_mult: global.grid_max_mult,
        points: global.grid_points,
    };
    Ok((grid, spec))
}

/// Parse `args` (including the program name) and run the command.
pub fn execute<I, T>(args: I) -> CliResult<(Output, String)>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&raw).map_err(|e| CliError::Usage(e.to_string()))?;
    let shown: Vec<String> = raw.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let out = run(&cli, &shown)?;
    Ok((out, cli.global.output.clone()))
}

/// Run a parsed command; `args` is echoed into the metadata header.
pub fn run(cli: &Cli, args: &[String]) -> CliResult<Output> {
    let g = &cli.global;
    let (grid, spec) = policy(g)?;
    let mut csv = Csv::new(g, args, &spec);
    match &cli.command {
        Command::Eval(a) => cmd_eval(&mut csv, g, grid, &spec, a)?,
        Command::Table1(a) => cmd_table1(&mut csv, g, grid, &spec, a)?,
        Command::Table2(a) => cmd_table2(&mut csv, g, grid, &spec, a)?,
        Command::OptimizeR0(a) => cmd_optimize_r0(&mut csv, g, grid, &spec, a)?,
        Command::FitR0(a) => cmd_fit_r0(&mut csv, g, grid, &spec, a)?,
        Command::Pdf(a) => cmd_pdf(&mut csv, g, &spec, &a.density, a.mc_samples, false)?,
        Command::Mc(a) => {
            if a.mc_samples == 0 {
                return Err(CliError::Usage("--mc-samples must be at least 1".into()));
            }
            cmd_pdf(&mut csv, g, &spec, &a.density, a.mc_samples, true)?
        }
        Command::KStudy(a) => cmd_k_study(&mut csv, g, grid, &spec, a)?,
    }
    Ok(csv.finish())
}

/// Entry point used by the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let raw: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&raw) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let shown: Vec<String> = raw.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let out = match run(&cli, &shown) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("fso-pointing: {e}");
            return e.exit_code();
        }
    };
    let written = if cli.global.output == "-" {
        use std::io::Write;
        std::io::stdout().lock().write_all(out.text.as_bytes())
    } else {
        std::fs::write(&cli.global.output, out.text.as_bytes())
    };
    if let Err(e) = written {
        eprintln!("fso-pointing: i/o error: {e}");
        return EXIT_IO;
    }
    if out.failures > 0 {
        eprintln!("fso-pointing: {} cell(s) failed; see the '# error' lines", out.failures);
        return EXIT_NUMERIC;
    }
    EXIT_OK
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn cmd_eval(csv: &mut Csv, g: &GlobalArgs, policy: GridPolicy, spec: &QuadratureSpec, a: &EvalArgs) -> CliResult<()> {
    let ra = g.ra;
    let wz = positive("--wz-over-ra", a.wz_over_ra)? * ra;
    let grid = policy.grid_for(wz, ra)?;
    let radii = match a.r_over_ra {
        Some(r) => {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(CliError::Usage(format!("--r-over-ra must be non-negative, got {r}")));
            }
            vec![r * ra]
        }
        None => {
            csv.meta(grid_meta(&grid, ra));
            grid.points()
        }
    };

    let mut options = ModelOptions {
        linearized: None,
        k: a.k,
        alpha_mode: a.alpha_mode,
    };
    if a.model == ModelKind::Linearized {
        let r0 = match a.r0_over_ra {
            Some(r0) => positive("--r0-over-ra", r0)? * ra,
            None => {
                let curve = OracleCurve::new(wz, ra, grid, spec)?;
                let opt = optimize_r0_on(&curve, a.n)?;
                csv.meta(format!("r0 optimized on {}", grid_meta(&grid, ra)));
                opt.r0_star
            }
        };
        csv.meta(format!("linearized: n={} r0/ra={}", a.n, csv.num(r0 / ra)));
        options.linearized = Some(LinearizedSpec::new(a.n, r0)?);
    }
    let model = build_model(a.model, wz, ra, &options)?;
    csv.meta(format!("model: {} wz/ra={}", a.model, a.wz_over_ra));

    if a.no_oracle {
        csv.row(&["r_over_ra", "hp_model"]);
        for &r in &radii {
            let cells = [csv.num(r / ra), csv.num(model.eval(r))];
            csv.row(&cells);
        }
        return Ok(());
    }
    let exact = radii
        .par_iter()
        .map(|&r| hp_exact_radial(r, wz, ra, spec))
        .collect::<Result<Vec<f64>, Error>>()?;
    csv.row(&["r_over_ra", "hp_model", "hp_oracle", "abs_err"]);
    for (&r, &h) in radii.iter().zip(&exact) {
        let m = model.eval(r);
        let cells = [csv.num(r / ra), csv.num(m), csv.num(h), csv.num((m - h).abs())];
        csv.row(&cells);
    }
    Ok(())
}

fn table_policy(g: &GlobalArgs, grid: GridPolicy, spec: &QuadratureSpec) -> TablePolicy {
    TablePolicy {
        ra: g.ra,
        grid,
        spec: *spec,
        ..TablePolicy::default()
    }
}

fn ratio_label(r: f64) -> String {
    format!("wz_over_ra={r}")
}

fn cmd_table1(csv: &mut Csv, g: &GlobalArgs, grid: GridPolicy, spec: &QuadratureSpec, a: &Table1Args) -> CliResult<()> {
    for &r in &a.ratios {
        positive("--ratios", r)?;
    }
    if a.n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {}", a.n)));
    }
    let linearized_r0 = if a.optimize_linearized {
        LinearizedR0::Optimize
    } else {
        if LinearizedR0::published_fit(a.n).is_none() {
            return Err(CliError::Usage(format!("no published r0 relation for n = {}", a.n)));
        }
        LinearizedR0::FittedRelation
    };
    let policy = TablePolicy {
        splits: a.n,
        linearized_r0,
        ..table_policy(g, grid, spec)
    };
    let cases: Vec<(ModelKind, f64)> = ModelKind::WIDE_BEAM
        .iter()
        .flat_map(|&m| a.ratios.iter().map(move |&r| (m, r)))
        .collect();
    let cells = nmse_table(&cases, &policy);

    for &r in &a.ratios {
        let gr = grid.grid_for(r * g.ra, g.ra)?;
        csv.meta(format!("wz/ra={r}: {}", grid_meta(&gr, g.ra)));
    }
    csv.meta(format!(
        "linearized: n={} r0={}",
        a.n,
        if a.optimize_linearized { "optimized" } else { "published relation" }
    ));

    let mut header = vec!["model".to_string()];
    header.extend(a.ratios.iter().map(|&r| ratio_label(r)));
    let mut rows = Vec::new();
    let mut r0_row = vec!["linearized_r0_over_ra".to_string()];
    for &m in &ModelKind::WIDE_BEAM {
        let mut row = vec![m.name().to_string()];
        for &r in &a.ratios {
            let cell = cells
                .iter()
                .find(|c| c.model == m && c.wz_over_ra == r)
                .expect("every case has a cell");
            match &cell.result {
                Ok(rep) => {
                    row.push(csv.num(rep.nmse));
                    if let Some(r0) = rep.linearized_r0 {
                        r0_row.push(csv.num(r0 / g.ra));
                    }
                }
                Err(e) => {
                    row.push(csv.num(f64::NAN));
                    if m == ModelKind::Linearized {
                        r0_row.push(csv.num(f64::NAN));
                    }
                    csv.fail(&format!("{m} at wz/ra={r}"), e);
                }
            }
        }
        rows.push(row);
    }
    csv.meta(r0_row.join(","));
    csv.row(&header);
    for row in rows {
        csv.row(&row);
    }
    Ok(())
}

fn cmd_table2(csv: &mut Csv, g: &GlobalArgs, grid: GridPolicy, spec: &QuadratureSpec, a: &Table2Args) -> CliResult<()> {
    for &r in &a.ratios {
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::Usage(format!("--ratios must lie in (0, 1), got {r}")));
        }
    }
    let policy = TablePolicy {
        k: a.k,
        alpha_mode: a.alpha_mode,
        ..table_policy(g, grid, spec)
    };
    let cases: Vec<(ModelKind, f64)> = ModelKind::NARROW_BEAM
        .iter()
        .flat_map(|&m| a.ratios.iter().map(move |&r| (m, r)))
        .collect();
    let cells = nmse_table(&cases, &policy);

    for &r in &a.ratios {
        let gr = grid.grid_for(r * g.ra, g.ra)?;
        csv.meta(format!("wz/ra={r}: {}", grid_meta(&gr, g.ra)));
    }
    csv.meta(format!("point approximation: k={} alpha={:?}", a.k, a.alpha_mode));

    let mut header = vec!["wz_over_ra".to_string()];
    header.extend(ModelKind::NARROW_BEAM.iter().map(|m| m.name().to_string()));
    let mut rows = Vec::new();
    for &r in &a.ratios {
        let mut row = vec![r.to_string()];
        for &m in &ModelKind::NARROW_BEAM {
            let cell = cells
                .iter()
                .find(|c| c.model == m && c.wz_over_ra == r)
                .expect("every case has a cell");
            match &cell.result {
                Ok(rep) => row.push(csv.num(rep.nmse)),
                Err(e) => {
                    row.push(csv.num(f64::NAN));
                    csv.fail(&format!("{m} at wz/ra={r}"), e);
                }
            }
        }
        rows.push(row);
    }
    csv.row(&header);
    for row in rows {
        csv.row(&row);
    }
    Ok(())
}

fn cmd_optimize_r0(
    csv: &mut Csv,
    g: &GlobalArgs,
    grid: GridPolicy,
    spec: &QuadratureSpec,
    a: &OptimizeArgs,
) -> CliResult<()> {
    if a.n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2, got {}", a.n)));
    }
    for &r in &a.wz_over_ra {
        positive("--wz-over-ra", r)?;
    }
    csv.meta(format!("linearized: n={}", a.n));
    let results: Vec<_> = a
        .wz_over_ra
        .iter()
        .map(|&r| {
            let wz = r * g.ra;
            let gr = grid.grid_for(wz, g.ra)?;
            let curve = OracleCurve::new(wz, g.ra, gr, spec)?;
            optimize_r0_on(&curve, a.n).map(|o| (gr, o))
        })
        .collect();
    let mut rows = Vec::new();
    for (&r, res) in a.wz_over_ra.iter().zip(results) {
        match res {
            Ok((gr, o)) => {
                csv.meta(format!("wz/ra={r}: {}", grid_meta(&gr, g.ra)));
                rows.push(vec![r.to_string(), csv.num(o.r0_star / g.ra), csv.num(o.nmse), "ok".into()]);
            }
            Err(e) => {
                csv.fail(&format!("wz/ra={r}"), &e);
                rows.push(vec![r.to_string(), csv.num(f64::NAN), csv.num(f64::NAN), "error".into()]);
            }
        }
    }
    csv.row(&["wz_over_ra", "r0_star_over_ra", "nmse", "status"]);
    for row in rows {
        csv.row(&row);
    }
    Ok(())
}

/// One point of an r0 sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub wz_over_ra: f64,
    pub r0_star_over_ra: f64,
    pub nmse_linearized: f64,
    pub nmse_modified_iu: f64,
}

impl SweepPoint {
    pub fn nmse_ratio(&self) -> f64 {
        self.nmse_modified_iu / self.nmse_linearized
    }
}

/// Evenly spaced ratios over `[lo, hi]`, endpoints included.
pub fn sweep_ratios(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Optimal r0 and NMSE of the linearized and modified intensity uniform
/// models at one ratio.
pub fn sweep_point(
    wz_over_ra: f64,
    ra: f64,
    n: usize,
    policy: GridPolicy,
    spec: &QuadratureSpec,
) -> Result<SweepPoint, Error> {
    let wz = wz_over_ra * ra;
    let grid = policy.grid_for(wz, ra)?;
    let curve = OracleCurve::new(wz, ra, grid, spec)?;
    let opt = optimize_r0_on(&curve, n)?;
    let miu = modified_intensity_uniform_params(wz, ra)?;
    Ok(SweepPoint {
        wz_over_ra,
        r0_star_over_ra: opt.r0_star / ra,
        nmse_linearized: opt.nmse,
        nmse_modified_iu: curve.nmse(|r| miu.eval(r)),
    })
}

fn cmd_fit_r0(csv: &mut Csv, g: &GlobalArgs, grid: GridPolicy, spec: &QuadratureSpec, a: &FitArgs) -> CliResult<()> {
    if a.n.is_empty() {
        return Err(CliError::Usage("--n needs at least one value".into()));
    }
    for &n in &a.n {
        if n < 2 || n % 2 != 0 {
            return Err(CliError::Usage(format!("--n must be even and at least 2, got {n}")));
        }
    }
    let (lo, hi) = match a.ratio_range[..] {
        [lo, hi] if lo > 0.0 && hi > lo && hi.is_finite() => (lo, hi),
        _ => return Err(CliError::Usage("--ratio-range takes two increasing positive values".into())),
    };
    if a.ratio_steps < 3 {
        return Err(CliError::Usage("--ratio-steps must be at least 3 for a quadratic fit".into()));
    }
    let xs = sweep_ratios(lo, hi, a.ratio_steps);
    csv.meta(format!("grid policy: max_mult={:?} points={}", grid.max_mult, grid.points));

    let mut rows = Vec::new();
    let mut ratio_curves: Vec<Vec<f64>> = Vec::new();
    for &n in &a.n {
        let points: Vec<Result<SweepPoint, Error>> = xs
            .par_iter()
            .map(|&x| sweep_point(x, g.ra, n, grid, spec))
            .collect();
        let (mut fx, mut fy, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
        for (&x, p) in xs.iter().zip(&points) {
            match p {
                Ok(p) => {
                    fx.push(x);
                    fy.push(p.r0_star_over_ra);
                    ratios.push(p.nmse_ratio());
                    rows.push(vec![
                        n.to_string(),
                        x.to_string(),
                        csv.num(p.r0_star_over_ra),
                        csv.num(p.nmse_linearized),
                        csv.num(p.nmse_modified_iu),
                        csv.num(p.nmse_ratio()),
                        "ok".into(),
                    ]);
                }
                Err(e) => {
                    csv.fail(&format!("n={n} wz/ra={x}"), e);
                    ratios.push(f64::NAN);
                    let nan = csv.num(f64::NAN);
                    rows.push(vec![
                        n.to_string(),
                        x.to_string(),
                        nan.clone(),
                        nan.clone(),
                        nan.clone(),
                        nan,
                        "error".into(),
                    ]);
                }
            }
        }
        match quadratic_fit(&fx, &fy) {
            Ok(f) => csv.meta(format!(
                "fit n={n}: r0*/ra = a2 x^2 + a1 x + a0, a2={} a1={} a0={} r_squared={}",
                csv.num(f.a2),
                csv.num(f.a1),
                csv.num(f.a0),
                csv.num(f.r_squared)
            )),
            Err(e) => csv.fail(&format!("fit n={n}"), &e),
        }
        ratio_curves.push(ratios);
    }
    if ratio_curves.len() >= 2 {
        let gap = ratio_curves[0]
            .iter()
            .zip(&ratio_curves[1])
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()))
            .fold(0.0, f64::max);
        csv.meta(format!(
            "nmse ratio max relative gap between n={} and n={}: {}",
            a.n[0],
            a.n[1],
            csv.num(gap)
        ));
    }
    csv.row(&[
        "n",
        "wz_over_ra",
        "r0_star_over_ra",
        "nmse_linearized",
        "nmse_modified_iu",
        "nmse_ratio",
        "status",
    ]);
    for row in rows {
        csv.row(&row);
    }
    Ok(())
}

/// Density selected by `--family` with `--params` or `--wz-over-ra`.
pub fn density_from_args(a: &DensityArgs, ra: f64) -> CliResult<HpDensity> {
    let sigma = positive("--sigma-s", a.sigma_s)?;
    let density = match (&a.params, a.wz_over_ra) {
        (Some(p), None) => match (a.family, &p[..]) {
            (Family::ExpFamily, &[c1, c2]) => HpDensity::exp_family(c1, c2, sigma)?,
            (Family::PointApprox, &[alpha]) => HpDensity::point_approx(ra, alpha, sigma)?,
            (Family::SecondReduced, &[lambda]) => HpDensity::second_reduced(ra, lambda, sigma)?,
            (Family::ExpFamily, _) => return Err(CliError::Usage("exp-family takes --params c1,c2".into())),
            (Family::PointApprox, _) => return Err(CliError::Usage("point-approx takes --params alpha".into())),
            (Family::SecondReduced, _) => return Err(CliError::Usage("second-reduced takes --params lambda".into())),
        },
        (None, Some(x)) => {
            let wz = positive("--wz-over-ra", x)? * ra;
            match a.family {
                Family::ExpFamily => {
                    let p = modified_intensity_uniform_params(wz, ra)?;
                    HpDensity::exp_family(p.c1, p.c2, sigma)?
                }
                Family::PointApprox => {
                    let p = point_approx_params(wz, ra, 1, AlphaMode::Asymptotic)?;
                    HpDensity::point_approx(ra, p.alpha, sigma)?
                }
                Family::SecondReduced => {
                    let p = second_reduced_vasylyev_params(wz, ra)?;
                    HpDensity::second_reduced(ra, p.lambda, sigma)?
                }
            }
        }
        _ => return Err(CliError::Usage("give exactly one of --params and --wz-over-ra".into())),
    };
    Ok(density)
}

fn density_meta(d: &HpDensity) -> String {
    match *d {
        HpDensity::ExpFamily { c1, c2, sigma_s } => format!("density: exp-family c1={c1} c2={c2} sigma_s={sigma_s}"),
        HpDensity::PointApprox { ra, alpha, sigma_s } => {
            format!("density: point-approx ra={ra} alpha={alpha} sigma_s={sigma_s}")
        }
        HpDensity::SecondReduced { ra, lambda, sigma_s } => {
            format!("density: second-reduced ra={ra} lambda={lambda} sigma_s={sigma_s}")
        }
    }
}

fn cmd_pdf(
    csv: &mut Csv,
    g: &GlobalArgs,
    spec: &QuadratureSpec,
    a: &DensityArgs,
    samples: usize,
    histogram_only: bool,
) -> CliResult<()> {
    let d = density_from_args(a, g.ra)?;
    let sigma = a.sigma_s;
    let mut hist = Histogram::uniform(a.bins, 0.0, 1.0)?;
    csv.meta(density_meta(&d));
    csv.meta(format!("total mass: {}", csv.num(d.total_mass(spec)?)));

    if samples > 0 {
        let hp = sample_hp(|r| d.model(r), sigma, g.seed, samples)?;
        for &h in &hp {
            hist.add(h);
        }
        let cdf = d.tabulated_cdf(CDF_NODES, spec)?;
        csv.meta(format!("seed: {} samples: {samples}", g.seed));
        csv.meta(format!("ks_distance: {}", csv.num(ks_distance(&hp, |h| cdf.eval(h)))));
    }

    if histogram_only {
        csv.row(&["bin_lo", "bin_hi", "count", "empirical_density"]);
        let dens = hist.density();
        for i in 0..hist.bins() {
            let cells = [
                csv.num(hist.bin_edges[i]),
                csv.num(hist.bin_edges[i + 1]),
                hist.counts[i].to_string(),
                csv.num(dens[i]),
            ];
            csv.row(&cells);
        }
        return Ok(());
    }

    let dens = hist.density();
    if samples > 0 {
        csv.row(&["hp", "analytic_density", "empirical_density"]);
    } else {
        csv.row(&["hp", "analytic_density"]);
    }
    for i in 0..hist.bins() {
        let h = 0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]);
        let mut cells = vec![csv.num(h), csv.num(d.pdf(h))];
        if samples > 0 {
            cells.push(csv.num(dens[i]));
        }
        csv.row(&cells);
    }
    Ok(())
}

fn cmd_k_study(csv: &mut Csv, g: &GlobalArgs, grid: GridPolicy, spec: &QuadratureSpec, a: &KStudyArgs) -> CliResult<()> {
    let ratio = positive("--wz-over-ra", a.wz_over_ra)?;
    if a.k_list.is_empty() || a.k_list.contains(&0) {
        return Err(CliError::Usage("--k-list needs positive integers".into()));
    }
    let gr = grid.grid_for(ratio * g.ra, g.ra)?;
    csv.meta(format!("wz/ra={ratio}: {}", grid_meta(&gr, g.ra)));
    csv.meta(format!("alpha: {:?}", a.alpha_mode));
    let mut rows = Vec::new();
    for &k in &a.k_list {
        let policy = TablePolicy {
            k,
            alpha_mode: a.alpha_mode,
            ..table_policy(g, grid, spec)
        };
        let cell = nmse_table(&[(ModelKind::PointApprox, ratio)], &policy).remove(0);
        match cell.result {
            Ok(rep) => rows.push(vec![k.to_string(), csv.num(rep.nmse)]),
            Err(e) => {
                csv.fail(&format!("k={k}"), &e);
                rows.push(vec![k.to_string(), csv.num(f64::NAN)]);
            }
        }
    }
    csv.row(&["k", "nmse"]);
    for row in rows {
        csv.row(&row);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> CliResult<Output> {
        let mut all = vec!["fso-pointing"];
        all.extend_from_slice(args);
        execute(all).map(|(o, _)| o)
    }

    fn body(out: &Output) -> Vec<&str> {
        out.text.lines().filter(|l| !l.starts_with('#')).collect()
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn eval_modified_iu_at_origin() {
        let out = run_args(&["eval", "--model", "modified-iu", "--wz-over-ra", "2", "--r-over-ra", "0", "--precision", "full"]).unwrap();
        let rows = body(&out);
        assert_eq!(rows[0], "r_over_ra,hp_model,hp_oracle,abs_err");
        let hp: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(hp, -(-0.5f64).exp_m1());
    }

    #[test]
    fn eval_point_approx_midpoint() {
        let out = run_args(&["eval", "--model", "point-approx", "--wz-over-ra", "0.1", "--r-over-ra", "1", "--no-oracle"]).unwrap();
        assert_eq!(body(&out)[1], "1.00000e0,5.00000e-1");
    }

    #[test]
    fn unknown_model_is_usage_error() {
        let err = run_args(&["eval", "--model", "nope", "--wz-over-ra", "2"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn table2_rejects_ratio_outside_unit_interval() {
        let err = run_args(&["table2", "--ratios", "0.1,1.5"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn fit_rejects_odd_splits() {
        let err = run_args(&["fit-r0", "--n", "5"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn k_study_single_row() {
        let out = run_args(&["k-study", "--k-list", "2", "--grid-points", "100"]).unwrap();
        assert_eq!(body(&out).len(), 2);
    }

    #[test]
    fn pdf_uniform_exp_family_is_flat() {
        let out = run_args(&["pdf", "--family", "exp-family", "--params", "0.5,0.5", "--sigma-s", "1", "--bins", "10"]).unwrap();
        let dens: Vec<&str> = body(&out)[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
        assert_eq!(&dens[..5], &["2.00000e0"; 5]);
        assert_eq!(&dens[5..], &["0.00000e0"; 5]);
    }

    #[test]
    fn pdf_needs_one_parameter_source() {
        let err = run_args(&["pdf", "--family", "point-approx", "--sigma-s", "1"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
        let err = run_args(&["pdf", "--family", "point-approx", "--sigma-s", "1", "--params", "1,2"]).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn numeric_errors_map_to_exit_three() {
        let e: CliError = Error::Optimization("x".into()).into();
        assert_eq!(e.exit_code(), EXIT_NUMERIC);
        let e: CliError = Error::Domain("x".into()).into();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn number_formats() {
        assert_eq!(format_number(1.0 / 3.0, Precision::Table), "3.33333e-1");
        let full = format_number(1.0 / 3.0, Precision::Full);
        assert_eq!(full.parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
