use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Serialize;

use sos_tree::dynamics::{
    iterate_orbit, OrbitPoint, OrbitStatus, RatioMap, RootRatios, DEFAULT_MAX_ITER, DEFAULT_ORBIT_TOL,
};
use sos_tree::grid::{GridRanges, GridSpec, Spacing};
use sos_tree::lattice::{partition_vector_bruteforce, partition_vector_recursive, CouplingParams, ThetaParams};
use sos_tree::newton::SearchResult;
use sos_tree::period_two::{
    descartes_no_positive_roots, extract_period2_quadratic, extract_period2_quadratic_exact, period2_positive_roots,
    period2_search_2d, printed_abc, printed_abc_exact, scan_region_s, ExactQuadratic, QuadraticABC, QuadraticSource,
    RegionScanReport, ScanPath,
};
use sos_tree::phase::{
    check_reported_roots, cubic_coefficients, diagnose_phase, fixed_points_2d, is_reported_point, scan_phase,
    CubicCoefficients, PhaseDiagnosis, ReportedRootCheck, REPORTED_ROOTS,
};
use sos_tree::poly::parse_decimal;
use sos_tree::report::{
    fmt_f64, orbit_csv, orbit_status_line, period2_scan_csv, phase_scan_csv, ArithmeticMode, Metadata, ParameterEcho,
    Report,
};
use sos_tree::{svg, Error};

const ORACLE_THRESHOLD: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "sos-tree",
    version,
    about = "Three-state SOS model with competing interactions on the binary Cayley tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format; each subcommand has its own default.
    #[arg(long, global = true)]
    format: Option<Format>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for grid scans and seed searches.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compare brute-force and recursive partition-function ratios.
    OracleCheck {
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Fixed points on v = 1, their stability and the transition flag.
    FixedPoints {
        #[command(flatten)]
        params: ParamArgs,
        /// Also search for fixed points and genuine period-2 points of the
        /// full map from a density² log grid of seeds.
        #[arg(long, default_value_t = 0)]
        newton_density: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Root counts over a parameter grid.
    PhaseScan {
        #[command(flatten)]
        grid: GridArgs,
        /// Additional SVG heatmap.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Signs of B and D over a parameter grid; looks for D ≥ 0 with B < 0.
    Period2Scan {
        #[command(flatten)]
        grid: GridArgs,
        /// Evaluate every cell in rational arithmetic.
        #[arg(long, conflicts_with = "division")]
        exact: bool,
        /// Take B and D from a floating-point division at every cell instead
        /// of the closed forms.
        #[arg(long)]
        division: bool,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Additional per-cell CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Period-2 quadratic A u² + B u + C at one parameter point.
    Period2 {
        #[command(flatten)]
        params: ParamArgs,
        /// Divide in rational arithmetic; --theta and --theta1 are read as
        /// exact decimals.
        #[arg(long)]
        exact: bool,
    },
    /// Iterate the ratio map from x0.
    Orbit {
        #[command(flatten)]
        params: ParamArgs,
        /// Starting ratios as u,v.
        #[arg(long, default_value = "1,1", allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = DEFAULT_ORBIT_TOL)]
        tol: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta1: Option<String>,
    #[arg(long = "J", allow_negative_numbers = true)]
    j: Option<f64>,
    #[arg(long = "J1", allow_negative_numbers = true)]
    j1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
}

struct Resolved {
    params: ThetaParams,
    coupling: Option<CouplingParams>,
    texts: Option<(String, String)>,
}

impl Resolved {
    fn echo(&self) -> ParameterEcho {
        ParameterEcho::new(&self.params, self.coupling)
    }
}

impl ParamArgs {
    fn resolve(&self) -> CliResult<Resolved> {
        match (&self.theta, &self.theta1, self.j, self.j1, self.beta) {
            (Some(t), Some(t1), None, None, None) => {
                let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(s.to_string()));
                Ok(Resolved {
                    params: ThetaParams::new(parse(t)?, parse(t1)?)?,
                    coupling: None,
                    texts: Some((t.clone(), t1.clone())),
                })
            }
            (None, None, Some(j), Some(j1), Some(beta)) => {
                let c = CouplingParams::new(j, j1, beta)?;
                Ok(Resolved {
                    params: ThetaParams::from_coupling(&c)?,
                    coupling: Some(c),
                    texts: None,
                })
            }
            _ => Err(CliError::Usage(
                "supply either --theta and --theta1, or --J, --J1 and --beta".to_string(),
            )),
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// tmin:tmax:n,t1min:t1max:n
    #[arg(long)]
    grid: String,
    /// Logarithmic spacing on both axes.
    #[arg(long)]
    log_grid: bool,
    /// Sample cell midpoints, so the grid covers an open box.
    #[arg(long)]
    centers: bool,
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec, Error> {
        let spacing = if self.log_grid {
            Spacing::Logarithmic
        } else {
            Spacing::Linear
        };
        self.grid.parse::<GridRanges>()?.to_spec(spacing, self.centers)
    }
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    Usage(String),
    /// A check ran to completion and failed.
    Check(u8),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Write { .. } => 3,
            CliError::Check(code) => *code,
            CliError::Lib(e) => match e {
                Error::InvalidSpin(_)
                | Error::InvalidParameter { .. }
                | Error::DepthTooLarge { .. }
                | Error::MissingSpin { .. }
                | Error::OracleInfeasible { .. }
                | Error::Parse(_) => 2,
                Error::Io(_) => 3,
                _ => 4,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

struct Output {
    format: Option<Format>,
    out: Option<PathBuf>,
}

impl Output {
    fn format_or(&self, default: Format, allowed: &[Format]) -> CliResult<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(CliError::Usage(
                "output format not supported by this subcommand".to_string(),
            ))
        }
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn to_file(&self) -> bool {
        self.out.is_some()
    }
}

#[derive(Serialize)]
struct OracleData {
    depth: usize,
    brute_force_z: [f64; 3],
    recursion_z: [f64; 3],
    brute_force_ratios: [f64; 2],
    recursion_ratios: [f64; 2],
    relative_errors: [f64; 2],
    max_relative_error: f64,
    threshold: f64,
    pass: bool,
}

fn cmd_oracle_check(out: &Output, depth: usize, params: &ParamArgs) -> CliResult<()> {
    let r = params.resolve()?;
    let bf = partition_vector_bruteforce(depth, &r.params)?;
    let rec = partition_vector_recursive(depth, &r.params)?;
    let (a, b) = (bf.ratios()?.as_array(), rec.ratios()?.as_array());
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs();
    let errors = [rel(a[0], b[0]), rel(a[1], b[1])];
    let max_err = errors[0].max(errors[1]);
    let pass = max_err <= ORACLE_THRESHOLD;

    println!(
        "depth {depth}, theta = {}, theta1 = {}",
        fmt_f64(r.params.theta()),
        fmt_f64(r.params.theta1())
    );
    println!(
        "{:<6}{:>26}{:>26}{:>26}",
        "ratio", "brute_force", "recursion", "rel_error"
    );
    for (k, name) in ["Z1/Z0", "Z2/Z0"].iter().enumerate() {
        println!(
            "{:<6}{:>26}{:>26}{:>26}",
            name,
            fmt_f64(a[k]),
            fmt_f64(b[k]),
            fmt_f64(errors[k])
        );
    }
    println!(
        "max relative error {} (threshold {:e}): {}",
        fmt_f64(max_err),
        ORACLE_THRESHOLD,
        if pass { "PASS" } else { "FAIL" }
    );

    if out.to_file() || out.format.is_some() {
        let meta = Metadata::new("oracle-check", ArithmeticMode::Float)
            .with_parameters(r.echo())
            .with_setting("depth", depth)
            .with_setting("threshold", ORACLE_THRESHOLD);
        let data = OracleData {
            depth,
            brute_force_z: bf.z,
            recursion_z: rec.z,
            brute_force_ratios: a,
            recursion_ratios: b,
            relative_errors: errors,
            max_relative_error: max_err,
            threshold: ORACLE_THRESHOLD,
            pass,
        };
        let text = match out.format_or(Format::Json, &[Format::Json, Format::Csv])? {
            Format::Csv => {
                let mut s = meta.comment_lines()?;
                s.push_str("ratio,brute_force,recursion,relative_error\n");
                for (k, name) in ["u", "v"].iter().enumerate() {
                    s.push_str(&format!(
                        "{name},{},{},{}\n",
                        fmt_f64(a[k]),
                        fmt_f64(b[k]),
                        fmt_f64(errors[k])
                    ));
                }
                s
            }
            _ => Report::new(meta, data).to_json()?,
        };
        out.emit(&text)?;
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::Check(4))
    }
}

#[derive(Serialize)]
struct FixedPointsData {
    diagnosis: PhaseDiagnosis,
    cubic: CubicCoefficients,
    /// `∂v'/∂v` of the full map at each root; above 1 in modulus the root
    /// repels off the line.
    transverse_multipliers: Vec<f64>,
    newton_fixed_points: Option<SearchResult>,
    newton_period2_points: Option<SearchResult>,
    reported_root_check: Option<ReportedRootCheck>,
}

fn cmd_fixed_points(out: &Output, params: &ParamArgs, density: usize, tol: f64) -> CliResult<()> {
    let r = params.resolve()?;
    let diagnosis = diagnose_phase(&r.params)?;
    let map = RatioMap::new(&r.params);
    let (newton_fixed_points, newton_period2_points) = if density > 0 {
        (
            Some(fixed_points_2d(&r.params, density, tol)?),
            Some(period2_search_2d(&r.params, density, tol)?),
        )
    } else {
        (None, None)
    };
    let reported_root_check = if is_reported_point(&r.params) {
        Some(check_reported_roots(&r.params, &REPORTED_ROOTS)?)
    } else {
        None
    };
    let data = FixedPointsData {
        cubic: cubic_coefficients(&r.params),
        transverse_multipliers: diagnosis
            .fixed_points
            .iter()
            .map(|p| map.transverse_multiplier(p.u))
            .collect(),
        diagnosis,
        newton_fixed_points,
        newton_period2_points,
        reported_root_check,
    };
    let meta = Metadata::new("fixed-points", ArithmeticMode::Float)
        .with_parameters(r.echo())
        .with_setting("newton_density", density)
        .with_setting("tol", tol);

    let text = match out.format_or(Format::Json, &[Format::Json, Format::Csv])? {
        Format::Csv => {
            let mut s = meta.comment_lines()?;
            s.push_str(&format!("# transition: {}\n", data.diagnosis.transition));
            if let Some(check) = &data.reported_root_check {
                s.push_str(&format!(
                    "# reported_root_check: {}\n",
                    serde_json::to_string(check).map_err(Error::from)?
                ));
            }
            s.push_str("u,fprime,stability,transverse_multiplier\n");
            for (p, m) in data.diagnosis.fixed_points.iter().zip(&data.transverse_multipliers) {
                let stability = serde_json::to_value(p.stability).map_err(Error::from)?;
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(p.u),
                    fmt_f64(p.derivative),
                    stability.as_str().unwrap_or(""),
                    fmt_f64(*m)
                ));
            }
            s
        }
        _ => Report::new(meta, &data).to_json()?,
    };
    out.emit(&text)?;
    if out.to_file() {
        println!(
            "{} fixed point(s) on v = 1, transition: {}",
            data.diagnosis.root_count(),
            data.diagnosis.transition
        );
    }
    Ok(())
}

fn cmd_phase_scan(out: &Output, grid: &GridArgs, svg_path: Option<&Path>) -> CliResult<()> {
    let spec = grid.spec()?;
    let rows = scan_phase(&spec)?;
    let meta = Metadata::new("phase-scan", ArithmeticMode::Float).with_grid(spec);
    let title = "Fixed points on v = 1";
    let text = match out.format_or(Format::Csv, &[Format::Csv, Format::Json, Format::Svg])? {
        Format::Csv => phase_scan_csv(&meta, &rows)?,
        Format::Json => Report::new(meta.clone(), &rows).to_json()?,
        Format::Svg => svg::render(&svg::phase_raster(&spec, &rows, title), &meta)?,
    };
    out.emit(&text)?;
    if let Some(path) = svg_path {
        write_file(path, &svg::render(&svg::phase_raster(&spec, &rows, title), &meta)?)?;
    }
    let three = rows.iter().filter(|r| r.root_count == 3).count();
    let transition = rows.iter().filter(|r| r.transition).count();
    eprintln!(
        "{} cells, {} with a transition, {} with three fixed points",
        rows.len(),
        transition,
        three
    );
    Ok(())
}

#[derive(Serialize)]
struct Period2ScanData<'a> {
    #[serde(flatten)]
    report: &'a RegionScanReport,
    /// One string per θ value, one of `-`, `0`, `+` per θ₁ value.
    sign_b_rows: Vec<String>,
    sign_d_rows: Vec<String>,
}

fn cmd_period2_scan(
    out: &Output,
    grid: &GridArgs,
    exact: bool,
    division: bool,
    svg_path: Option<&Path>,
    csv_path: Option<&Path>,
) -> CliResult<()> {
    let spec = grid.spec()?;
    let path = if exact {
        ScanPath::Exact
    } else if division {
        ScanPath::Division
    } else {
        ScanPath::Printed
    };
    let report = scan_region_s(&spec, path)?;
    let mode = if exact {
        ArithmeticMode::Rational
    } else {
        ArithmeticMode::Float
    };
    let meta = Metadata::new("period2-scan", mode)
        .with_grid(spec)
        .with_setting("path", path);
    let title = "Sign of B";
    // Without --out or --format only the summary goes to stdout.
    if out.to_file() || out.format.is_some() {
        let text = match out.format_or(Format::Json, &[Format::Csv, Format::Json, Format::Svg])? {
            Format::Csv => period2_scan_csv(&meta, &report)?,
            Format::Json => Report::new(
                meta.clone(),
                Period2ScanData {
                    report: &report,
                    sign_b_rows: report.sign_rows(|c| c.sign_b),
                    sign_d_rows: report.sign_rows(|c| c.sign_d),
                },
            )
            .to_json()?,
            Format::Svg => svg::render(&svg::period2_sign_raster(&report, title), &meta)?,
        };
        out.emit(&text)?;
    }
    if let Some(p) = svg_path {
        write_file(p, &svg::render(&svg::period2_sign_raster(&report, title), &meta)?)?;
    }
    if let Some(p) = csv_path {
        write_file(p, &period2_scan_csv(&meta, &report)?)?;
    }

    let c = &report.counts;
    println!(
        "cells {}, B >= 0: {}, B < 0: {}, D >= 0: {}, resolved exactly: {}, unresolved: {}",
        c.cells, c.b_nonnegative, c.b_negative, c.d_nonnegative, c.resolved_exactly, c.unresolved
    );
    println!("S empty: {}", report.empty);
    for v in &report.violations {
        println!(
            "violation at ({}, {}): theta = {}, theta1 = {}, B = {}, D = {}",
            v.i,
            v.j,
            fmt_f64(v.theta),
            fmt_f64(v.theta1),
            fmt_f64(v.b),
            fmt_f64(v.d)
        );
    }
    if report.empty && c.unresolved == 0 {
        Ok(())
    } else {
        Err(CliError::Check(1))
    }
}

#[derive(Serialize)]
struct Period2Data {
    derived: QuadraticABC,
    printed: QuadraticABC,
    /// Exact values as `p/q` strings.
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<ExactStrings>,
    matches_printed: bool,
    descartes_excludes_positive_roots: bool,
    positive_roots: Vec<f64>,
}

#[derive(Serialize)]
struct ExactStrings {
    a: String,
    b: String,
    c: String,
    d: String,
}

impl From<&ExactQuadratic> for ExactStrings {
    fn from(q: &ExactQuadratic) -> Self {
        ExactStrings {
            a: q.a.to_string(),
            b: q.b.to_string(),
            c: q.c.to_string(),
            d: q.d.to_string(),
        }
    }
}

fn cmd_period2(out: &Output, params: &ParamArgs, exact: bool) -> CliResult<()> {
    let r = params.resolve()?;
    let (derived, printed, exact_strings, matches) = if exact {
        let (t, t1) = r
            .texts
            .as_ref()
            .ok_or_else(|| CliError::Usage("--exact needs --theta and --theta1".to_string()))?;
        let (t, t1): (BigRational, BigRational) = (parse_decimal(t)?, parse_decimal(t1)?);
        let q = extract_period2_quadratic_exact(&t, &t1)?;
        let p = printed_abc_exact(&t, &t1);
        let matches = q == p;
        let mut printed = p.to_f64()?;
        printed.source = QuadraticSource::PrintedFormula;
        (q.to_f64()?, printed, Some(ExactStrings::from(&q)), matches)
    } else {
        let q = extract_period2_quadratic(&r.params)?;
        let p = printed_abc(&r.params)?;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * x.abs().max(y.abs()).max(1.0);
        let matches = close(q.a, p.a) && close(q.b, p.b) && close(q.c, p.c);
        (q, p, None, matches)
    };
    let data = Period2Data {
        derived,
        printed,
        exact: exact_strings,
        matches_printed: matches,
        descartes_excludes_positive_roots: descartes_no_positive_roots(&derived),
        positive_roots: period2_positive_roots(&derived, 1e-12),
    };
    let mode = if exact {
        ArithmeticMode::Rational
    } else {
        ArithmeticMode::Float
    };
    let meta = Metadata::new("period2", mode).with_parameters(r.echo());
    let text = match out.format_or(Format::Json, &[Format::Json, Format::Csv])? {
        Format::Csv => {
            let mut s = meta.comment_lines()?;
            s.push_str("source,a,b,c,d\n");
            for (name, q) in [("derived", &data.derived), ("printed", &data.printed)] {
                s.push_str(&format!(
                    "{name},{},{},{},{}\n",
                    fmt_f64(q.a),
                    fmt_f64(q.b),
                    fmt_f64(q.c),
                    fmt_f64(q.d)
                ));
            }
            s
        }
        _ => Report::new(meta, &data).to_json()?,
    };
    out.emit(&text)?;
    if matches {
        Ok(())
    } else {
        eprintln!("derived quadratic differs from the closed forms");
        Err(CliError::Check(4))
    }
}

#[derive(Serialize)]
struct OrbitData {
    initial: RootRatios,
    iterations: usize,
    status: OrbitStatus,
    states: Vec<OrbitPoint>,
}

fn parse_x0(text: &str) -> Result<RootRatios, Error> {
    let err = || Error::Parse(format!("--x0 expects u,v, got {text}"));
    let (u, v) = text.split_once(',').ok_or_else(err)?;
    let u: f64 = u.trim().parse().map_err(|_| err())?;
    let v: f64 = v.trim().parse().map_err(|_| err())?;
    RootRatios::new(u, v)
}

fn cmd_orbit(out: &Output, params: &ParamArgs, x0: &str, max_iter: usize, tol: f64) -> CliResult<()> {
    let r = params.resolve()?;
    let x0 = parse_x0(x0)?;
    let orbit = iterate_orbit(x0, &r.params, max_iter, tol)?;
    let meta = Metadata::new("orbit", ArithmeticMode::Float)
        .with_parameters(r.echo())
        .with_setting("x0", x0)
        .with_setting("max_iter", max_iter)
        .with_setting("tol", tol);
    let text = match out.format_or(Format::Csv, &[Format::Csv, Format::Json])? {
        Format::Json => Report::new(
            meta,
            OrbitData {
                initial: orbit.initial,
                iterations: orbit.iterations,
                status: orbit.status.clone(),
                states: orbit.states(),
            },
        )
        .to_json()?,
        _ => orbit_csv(&meta, &orbit)?,
    };
    out.emit(&text)?;
    eprintln!("status: {}", orbit_status_line(&orbit));
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    let out = Output {
        format: cli.format,
        out: cli.out.clone(),
    };
    match &cli.command {
        Command::OracleCheck { depth, params } => cmd_oracle_check(&out, *depth, params),
        Command::FixedPoints {
            params,
            newton_density,
            tol,
        } => cmd_fixed_points(&out, params, *newton_density, *tol),
        Command::PhaseScan { grid, svg } => cmd_phase_scan(&out, grid, svg.as_deref()),
        Command::Period2Scan {
            grid,
            exact,
            division,
            svg,
            csv,
        } => cmd_period2_scan(&out, grid, *exact, *division, svg.as_deref(), csv.as_deref()),
        Command::Period2 { params, exact } => cmd_period2(&out, params, *exact),
        Command::Orbit {
            params,
            x0,
            max_iter,
            tol,
        } => cmd_orbit(&out, params, x0, *max_iter, *tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".to_string())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::Usage(e.to_string())),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Lib(err) => eprintln!("error: {err}"),
                CliError::Write { path, source } => eprintln!("error: cannot write {}: {source}", path.display()),
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Check(_) => {}
            }
            ExitCode::from(e.exit_code())
        }
    }
}
