//! Command-line front end. Every subcommand prints one JSON report on stdout;
//! human-readable messages go to stderr.

pub mod svg;

use std::f64::consts::PI;
use std::fs;

use clap::{Args, Parser, Subcommand};
use num::complex::Complex64;
use num::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::factors::{ExponentialFactor, FactorError};
use crate::formal::{
    formal_type, newton_polygon, irregularity, system_to_operator, ConnectionJson, ConnectionSpec, FormalError,
};
use crate::geometry::{stokes_curve, stokes_directions, stokes_directions_on_cover, Direction, GeometryError, Sector, StokesDiagram};
use crate::laurent::{DifferentialOperator, LaurentParseError, LaurentPoly};
use crate::linalg::{char_poly, to_rows, CMat};
use crate::numstokes::{numeric_monodromy, stokes_matrices_with_diagnostics, IntegrationConfig, NumError};
use crate::rational::{fmt_rat, parse_rat, CRat};
use crate::sheafmodel::{hom_shape, phi_exponential, SheafError, Stratum};
use crate::stokesdata::{
    glue_monodromy, normal_form, validate, CoverJson, StokesError, StokesStructure, StokesStructureJson,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "stokeskit", version, about = "Stokes geometry and Stokes data of meromorphic connections")]
struct Cli {
    /// Seed for randomized steps; echoed in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stokes directions of a factor difference.
    Lines {
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
    },
    /// Stokes curves on a radius grid, optionally drawn as SVG.
    Curves {
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
        #[arg(long, default_value_t = 1e-3)]
        rho_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        rho_max: f64,
        /// Number of radii, log-spaced.
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long)]
        svg: Option<String>,
    },
    /// Stokes lines and the sector cover of a family of factors.
    Sectors {
        #[arg(long, allow_hyphen_values = true)]
        factors: String,
    },
    /// Allowed matrix entries on a sector.
    Homshape {
        #[arg(long, allow_hyphen_values = true)]
        factors: String,
        /// `lo,hi`, as numbers or multiples of pi such as `-pi/4,3pi/4`.
        #[arg(long, allow_hyphen_values = true)]
        sector: String,
    },
    /// Newton polygon and formal type.
    Formal(ConnectionArgs),
    /// Constructible description of the exponential of a factor.
    Phi {
        #[arg(long, allow_hyphen_values = true)]
        factor: String,
    },
    /// Validate a Stokes structure and compute its monodromy.
    Glue {
        /// JSON text or a path to a JSON file.
        #[arg(long)]
        structure: String,
    },
    /// Stokes structure from trivializations on the sector cover.
    Extract {
        #[arg(long)]
        cover: String,
    },
    /// Numerical Stokes matrices.
    Stokes {
        #[command(flatten)]
        conn: ConnectionArgs,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        rho_seed: Option<f64>,
        #[arg(long)]
        n_asym: Option<usize>,
        #[arg(long)]
        rho_match: Option<f64>,
    },
    /// Monodromy by transport around a circle.
    Monodromy {
        #[command(flatten)]
        conn: ConnectionArgs,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ConnectionArgs {
    /// Operator such as `x^5*D^2-1`.
    #[arg(long, allow_hyphen_values = true)]
    op: Option<String>,
    /// `[["a11","a12"],["a21","a22"]]` or a connection JSON object, inline or as a file.
    #[arg(long)]
    system: Option<String>,
}

/// Outcome of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Domain(String),
    Validation(String, Value),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Validation(..) => 4,
        }
    }
}

impl From<FactorError> for CliError {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::Parse(_) | FactorError::ContainsOperator | FactorError::Json(_) => CliError::Parse(e.to_string()),
            FactorError::PoleAtZero => CliError::Domain(e.to_string()),
        }
    }
}

impl From<LaurentParseError> for CliError {
    fn from(e: LaurentParseError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<FormalError> for CliError {
    fn from(e: FormalError) -> Self {
        match e {
            FormalError::Parse(_) | FormalError::Json(_) | FormalError::NotSquare(_) => CliError::Parse(e.to_string()),
            FormalError::Factor(f) => f.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Factor(f) => f.into(),
            GeometryError::BadLines(_) | GeometryError::BadGrid(_) => CliError::Parse(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<SheafError> for CliError {
    fn from(e: SheafError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<StokesError> for CliError {
    fn from(e: StokesError) -> Self {
        match e {
            StokesError::Invalid(ref v) => {
                let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                CliError::Validation(e.to_string(), json!({ "violations": list }))
            }
            StokesError::Formal(f) => f.into(),
            StokesError::Geometry(g) => g.into(),
            StokesError::Dimension(_) => CliError::Parse(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::Formal(f) => f.into(),
            NumError::Geometry(g) => g.into(),
            NumError::Stokes(s) => s.into(),
            NumError::Unstable { ref raw, ref violations } => {
                let list: Vec<String> = violations.iter().map(|x| x.to_string()).collect();
                let raw: Vec<_> = raw.iter().map(to_rows).collect();
                CliError::Validation(e.to_string(), json!({ "violations": list, "raw": raw }))
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct Report {
    command: String,
    inputs: Value,
    results: Value,
    diagnostics: Value,
    version: String,
}

/// Runs one invocation; `args[0]` is the program name.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Output { code: 0, stdout: String::new(), stderr: text }
                }
                _ => Output {
                    code: 2,
                    stdout: error_json("usage", 2, &first_line(&text)),
                    stderr: text,
                },
            };
        }
    };
    let name = command_name(&cli.command);
    match dispatch(&cli) {
        Ok((inputs, results, diagnostics)) => {
            let mut inputs = inputs;
            inputs["seed"] = json!(cli.seed);
            let report = Report { command: name.into(), inputs, results, diagnostics, version: VERSION.into() };
            Output { code: 0, stdout: serde_json::to_string_pretty(&report).unwrap(), stderr: String::new() }
        }
        Err(e) => {
            let code = e.code();
            let (msg, extra) = match e {
                CliError::Parse(m) | CliError::Domain(m) => (m, Value::Null),
                CliError::Validation(m, v) => (m, v),
            };
            let mut body: Value = serde_json::from_str(&error_json(name, code, &msg)).unwrap();
            if !extra.is_null() {
                body["details"] = extra;
            }
            Output { code, stdout: serde_json::to_string_pretty(&body).unwrap(), stderr: format!("error: {msg}\n") }
        }
    }
}

fn first_line(s: &str) -> String {
    s.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string()
}

fn error_json(command: &str, code: i32, msg: &str) -> String {
    serde_json::to_string_pretty(&json!({ "command": command, "error": msg, "exit_code": code, "version": VERSION }))
        .unwrap()
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Lines { .. } => "lines",
        Command::Curves { .. } => "curves",
        Command::Sectors { .. } => "sectors",
        Command::Homshape { .. } => "homshape",
        Command::Formal(_) => "formal",
        Command::Phi { .. } => "phi",
        Command::Glue { .. } => "glue",
        Command::Extract { .. } => "extract",
        Command::Stokes { .. } => "stokes",
        Command::Monodromy { .. } => "monodromy",
    }
}

type Pieces = (Value, Value, Value);

fn dispatch(cli: &Cli) -> Result<Pieces, CliError> {
    match &cli.command {
        Command::Lines { delta } => cmd_lines(delta),
        Command::Curves { delta, rho_min, rho_max, n, svg } => cmd_curves(delta, *rho_min, *rho_max, *n, svg.as_deref()),
        Command::Sectors { factors } => cmd_sectors(factors),
        Command::Homshape { factors, sector } => cmd_homshape(factors, sector),
        Command::Formal(conn) => cmd_formal(conn),
        Command::Phi { factor } => cmd_phi(factor),
        Command::Glue { structure } => cmd_glue(structure),
        Command::Extract { cover } => cmd_extract(cover),
        Command::Stokes { conn, tol, rho_seed, n_asym, rho_match } => {
            let mut cfg = IntegrationConfig::default();
            if let Some(t) = tol {
                set_tol(&mut cfg, *t)?;
            }
            cfg.rho_seed = *rho_seed;
            cfg.rho_match = *rho_match;
            if let Some(n) = n_asym {
                cfg.n_asym = *n;
            }
            cmd_stokes(conn, &cfg)
        }
        Command::Monodromy { conn, rho, theta, tol } => {
            let mut cfg = IntegrationConfig::default();
            if let Some(t) = tol {
                set_tol(&mut cfg, *t)?;
            }
            cmd_monodromy(conn, *rho, *theta, &cfg)
        }
    }
}

fn set_tol(cfg: &mut IntegrationConfig, t: f64) -> Result<(), CliError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(CliError::Parse(format!("--tol must be in (0, 1), got {t}")));
    }
    cfg.rtol = t;
    cfg.atol = t / 100.0;
    Ok(())
}

// ---- helpers ----------------------------------------------------------------

/// Angles in reports are rounded to 10 decimals.
fn round10(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

fn direction_json(d: &Direction) -> Value {
    json!({ "angle": round10(d.angle), "exact": d.pi_string() })
}

fn parse_factor(text: &str) -> Result<ExponentialFactor, CliError> {
    Ok(ExponentialFactor::parse(text)?)
}

fn parse_factor_list(text: &str) -> Result<Vec<ExponentialFactor>, CliError> {
    let list: Vec<ExponentialFactor> =
        text.split(',').map(|t| parse_factor(t.trim())).collect::<Result<_, _>>()?;
    if list.len() < 2 {
        return Err(CliError::Parse("--factors needs at least two comma-separated factors".into()));
    }
    Ok(list)
}

/// `pi`, `-pi/4`, `3pi/4`, `3*pi/4`, `0`, or a plain number of radians.
pub fn parse_angle(text: &str) -> Option<Direction> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(pos) = t.find("pi") {
        let (num, rest) = t.split_at(pos);
        let num = num.trim_end_matches('*');
        let k = match num {
            "" | "+" => BigRational::from_integer(1.into()),
            "-" => BigRational::from_integer((-1).into()),
            s => parse_rat(s)?,
        };
        let rest = &rest[2..];
        let q = match rest {
            "" => k,
            r => {
                let d = parse_rat(r.strip_prefix('/')?)?;
                if d == BigRational::from_integer(0.into()) {
                    return None;
                }
                k / d
            }
        };
        return Some(Direction::from_pi_multiple(q));
    }
    match parse_rat(&t) {
        Some(q) if q == BigRational::from_integer(0.into()) => Some(Direction::zero()),
        _ => t.parse::<f64>().ok().filter(|x| x.is_finite()).map(Direction::approx),
    }
}

fn read_json_arg(text: &str) -> Result<Value, CliError> {
    let body = if text.trim_start().starts_with(['{', '[']) {
        text.to_string()
    } else {
        fs::read_to_string(text).map_err(|e| CliError::Parse(format!("cannot read '{text}': {e}")))?
    };
    serde_json::from_str(&body).map_err(|e| CliError::Parse(format!("invalid JSON: {e}")))
}

fn connection(args: &ConnectionArgs) -> Result<(ConnectionSpec, Value), CliError> {
    if let Some(op) = &args.op {
        let parsed = DifferentialOperator::parse(op)?;
        let echo = json!({ "op": parsed.to_string() });
        return Ok((ConnectionSpec::Operator(parsed), echo));
    }
    let v = read_json_arg(args.system.as_deref().unwrap_or_default())?;
    let conn: ConnectionJson = if v.is_array() {
        ConnectionJson::System(serde_json::from_value(v).map_err(|e| CliError::Parse(format!("invalid system: {e}")))?)
    } else {
        serde_json::from_value(v).map_err(|e| CliError::Parse(format!("invalid connection: {e}")))?
    };
    let spec = conn.to_spec()?;
    let echo = match &spec {
        ConnectionSpec::System(a) => {
            json!({ "system": a.iter().map(|r| r.iter().map(|p| p.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>() })
        }
        ConnectionSpec::Operator(op) => json!({ "op": op.to_string() }),
        ConnectionSpec::FormalSum(ft) => json!({ "formal": ft.to_json() }),
    };
    Ok((spec, echo))
}

fn complex_json(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn eigenvalues(m: &CMat) -> Vec<[f64; 2]> {
    let p = char_poly(m);
    match m.nrows() {
        1 => vec![complex_json(-p[0])],
        2 => {
            let (b, c) = (p[1], p[0]);
            let disc = (b * b - c * 4.0).sqrt();
            vec![complex_json((-b + disc) / 2.0), complex_json((-b - disc) / 2.0)]
        }
        _ => vec![],
    }
}

fn matrix_report(m: &CMat) -> Value {
    json!({
        "matrix": to_rows(m),
        "char_poly": char_poly(m).into_iter().map(complex_json).collect::<Vec<_>>(),
        "eigenvalues": eigenvalues(m),
    })
}

// ---- subcommands ------------------------------------------------------------

fn cmd_lines(delta: &str) -> Result<Pieces, CliError> {
    let d = parse_factor(delta)?;
    let dirs = stokes_directions(&d)?;
    let mut results = json!({
        "directions": dirs.iter().map(|x| round10(x.angle)).collect::<Vec<_>>(),
        "exact": dirs.iter().map(|x| x.pi_string()).collect::<Vec<_>>(),
    });
    if d.ram() > 1 {
        let cover = stokes_directions_on_cover(&d)?;
        results["cover"] = json!({
            "ramification": d.ram(),
            "directions": cover.iter().map(|x| round10(x.angle)).collect::<Vec<_>>(),
            "exact": cover.iter().map(|x| x.pi_string()).collect::<Vec<_>>(),
        });
    }
    Ok((json!({ "delta": d.to_string() }), results, json!({ "count": dirs.len() })))
}

fn cmd_curves(delta: &str, rho_min: f64, rho_max: f64, n: usize, svg_path: Option<&str>) -> Result<Pieces, CliError> {
    if !(rho_min > 0.0 && rho_min < rho_max && rho_max.is_finite() && n >= 2) {
        return Err(CliError::Parse("need 0 < rho-min < rho-max and n >= 2".into()));
    }
    let d = parse_factor(delta)?;
    let grid: Vec<f64> = (0..n)
        .map(|k| rho_min * (rho_max / rho_min).powf(k as f64 / (n - 1) as f64))
        .collect();
    let curves = stokes_curve(&d, &grid)?;
    let lines = stokes_directions(&d)?;
    if let Some(path) = svg_path {
        let text = svg::render(&lines, &curves, rho_max);
        fs::write(path, text).map_err(|e| CliError::Domain(format!("cannot write '{path}': {e}")))?;
    }
    let results = json!({
        "lines": lines.iter().map(direction_json).collect::<Vec<_>>(),
        "curves": curves.iter().map(|c| json!({
            "direction": direction_json(&c.direction),
            "points": c.points.iter().map(|&(r, t)| [r, t]).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    let inputs = json!({ "delta": d.to_string(), "rho_min": rho_min, "rho_max": rho_max, "n": n, "svg": svg_path });
    Ok((inputs, results, json!({ "curves": curves.len() })))
}

fn diagram_json(dg: &StokesDiagram) -> Value {
    let dirs = dg.line_directions();
    json!({
        "directions": dirs.iter().map(|x| round10(x.angle)).collect::<Vec<_>>(),
        "exact": dirs.iter().map(|x| x.pi_string()).collect::<Vec<_>>(),
        "lines": dg.lines.iter().map(|l| json!({
            "direction": direction_json(&l.direction),
            "pairs": l.pairs.iter().map(|&(i, j)| [i + 1, j + 1]).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "sectors": dg.cover.iter().map(|s| json!({
            "lo": direction_json(&s.lo),
            "hi": direction_json(&s.hi),
        })).collect::<Vec<_>>(),
        "eps": dg.eps.as_ref().map(direction_json),
    })
}

fn cmd_sectors(factors: &str) -> Result<Pieces, CliError> {
    let fs = parse_factor_list(factors)?;
    let dg = StokesDiagram::new(&fs)?;
    let inputs = json!({ "factors": fs.iter().map(|f| f.to_string()).collect::<Vec<_>>() });
    Ok((inputs, diagram_json(&dg), json!({ "pairs": dg.pairs.len() })))
}

fn cmd_homshape(factors: &str, sector: &str) -> Result<Pieces, CliError> {
    let fs = parse_factor_list(factors)?;
    let parts: Vec<&str> = sector.split(',').collect();
    let bad = || CliError::Parse(format!("--sector expects lo,hi; got '{sector}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo = parse_angle(parts[0]).ok_or_else(bad)?;
    let hi = parse_angle(parts[1]).ok_or_else(bad)?;
    if !(lo.angle < hi.angle && hi.angle - lo.angle <= 2.0 * PI) {
        return Err(CliError::Parse("sector needs lo < hi and width at most 2pi".into()));
    }
    let s = Sector::new(lo, hi);
    let shape = hom_shape(&fs, &s);
    let results = json!({ "n": shape.n, "allowed": shape.allowed_list(), "tag": shape.tag.as_str() });
    let inputs = json!({
        "factors": fs.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "sector": [direction_json(&s.lo), direction_json(&s.hi)],
    });
    Ok((inputs, results, json!({ "closed_under_composition": shape.is_closed_under_composition() })))
}

fn slopes_json(op: &DifferentialOperator) -> Result<Value, CliError> {
    let np = newton_polygon(op)?;
    Ok(json!({
        "slopes": np.slopes.iter().map(|s| json!({ "slope": fmt_rat(&s.slope), "length": fmt_rat(&s.length) })).collect::<Vec<_>>(),
        "irregularity": fmt_rat(&irregularity(&np)),
    }))
}

fn rank1_op(a: &LaurentPoly) -> DifferentialOperator {
    DifferentialOperator::new([(1, LaurentPoly::constant(CRat::one())), (0, a.neg())])
}

fn cmd_formal(conn: &ConnectionArgs) -> Result<Pieces, CliError> {
    let (spec, inputs) = connection(conn)?;
    let newton = match &spec {
        ConnectionSpec::Operator(op) => vec![slopes_json(op)?],
        ConnectionSpec::System(a) if a.len() == 2 => match system_to_operator(a) {
            Some((op, _)) => vec![slopes_json(&op)?],
            None => vec![slopes_json(&rank1_op(&a[0][0]))?, slopes_json(&rank1_op(&a[1][1]))?],
        },
        ConnectionSpec::System(a) if a.len() == 1 => vec![slopes_json(&rank1_op(&a[0][0]))?],
        _ => vec![],
    };
    let ft = formal_type(&spec)?;
    let results = json!({
        "ramification": ft.ramification,
        "rank": ft.rank(),
        "items": ft.to_json().items,
        "newton": newton,
    });
    Ok((inputs, results, json!({})))
}

fn cmd_phi(factor: &str) -> Result<Pieces, CliError> {
    let f = parse_factor(factor)?;
    let desc = phi_exponential(&f)?;
    let mut degrees = serde_json::Map::new();
    for k in 0..=1 {
        let entries: Vec<Value> = desc
            .degree(k)
            .iter()
            .map(|e| match &e.stratum {
                Stratum::Sublevel(s) => json!({
                    "stratum": e.stratum.name(),
                    "family": format!("Re(t + {}) < c", s.factor),
                    "rank": e.rank,
                }),
                other => json!({ "stratum": other.name(), "rank": e.rank }),
            })
            .collect();
        degrees.insert(k.to_string(), Value::Array(entries));
    }
    let results = json!({ "degrees": degrees, "other_degrees": 0, "ramified": desc.ramified });
    Ok((json!({ "factor": f.to_string() }), results, json!({})))
}

fn structure_report(s: &StokesStructure) -> Result<Value, CliError> {
    let mono = glue_monodromy(s)?;
    Ok(json!({
        "structure": s.to_json(),
        "normal": s.is_normal(1e-9),
        "monodromy": matrix_report(&mono),
    }))
}

fn cmd_glue(text: &str) -> Result<Pieces, CliError> {
    let v = read_json_arg(text)?;
    let j: StokesStructureJson =
        serde_json::from_value(v).map_err(|e| CliError::Parse(format!("invalid structure: {e}")))?;
    let s = StokesStructure::from_json(&j)?;
    let violations = validate(&s);
    if !violations.is_empty() {
        return Err(StokesError::Invalid(violations).into());
    }
    let results = structure_report(&s)?;
    Ok((json!({ "lines": s.diagram.n_lines(), "base": s.base }), results, json!({ "violations": [] })))
}

fn cmd_extract(text: &str) -> Result<Pieces, CliError> {
    let v = read_json_arg(text)?;
    let j: CoverJson = serde_json::from_value(v).map_err(|e| CliError::Parse(format!("invalid cover: {e}")))?;
    let s = j.extract()?;
    let nf = normal_form(&s)?;
    let mut results = structure_report(&s)?;
    results["normal_form"] = serde_json::to_value(nf.to_json()).unwrap();
    Ok((json!({ "trivializations": j.trivializations.len() }), results, json!({})))
}

fn cmd_stokes(conn: &ConnectionArgs, cfg: &IntegrationConfig) -> Result<Pieces, CliError> {
    let (spec, mut inputs) = connection(conn)?;
    let started = std::time::Instant::now();
    let (s, d) = stokes_matrices_with_diagnostics(&spec, cfg)?;
    let results = structure_report(&s)?;
    inputs["config"] = json!({
        "tol": cfg.rtol,
        "rho_seed": cfg.rho_seed,
        "n_asym": cfg.n_asym,
        "rho_match": cfg.rho_match,
    });
    let diagnostics = json!({
        "rho_seed": d.rho_seed,
        "rho_match": d.rho_match,
        "raw": d.raw.iter().map(to_rows).collect::<Vec<_>>(),
        "max_off_shape": d.max_off_shape,
        "resonant_columns": d.resonant_columns,
        "terms_used": d.terms_used,
        "seconds": started.elapsed().as_secs_f64(),
    });
    // timing is the only nondeterministic field; keep it out of stdout
    let mut diagnostics = diagnostics;
    eprintln_timing(&mut diagnostics);
    Ok((inputs, results, diagnostics))
}

fn eprintln_timing(d: &mut Value) {
    if let Some(t) = d.as_object_mut().and_then(|o| o.remove("seconds")) {
        eprintln!("numeric pipeline: {t} s");
    }
}

fn cmd_monodromy(conn: &ConnectionArgs, rho: f64, theta: f64, cfg: &IntegrationConfig) -> Result<Pieces, CliError> {
    let (spec, mut inputs) = connection(conn)?;
    let m = numeric_monodromy(&spec, rho, theta, cfg)?;
    inputs["rho"] = json!(rho);
    inputs["theta"] = json!(theta);
    Ok((inputs, matrix_report(&m), json!({ "tol": cfg.rtol })))
}
