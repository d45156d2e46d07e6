//! Command-line front end: argument parsing, dispatch and report rendering.
//!
//! Exit codes: 0 success, 1 verdict failure, 2 input or validation error.
//! Reports are JSON by default, CSV with `--format csv`, and an aligned text
//! table with `--pretty`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::complex::{
    check_cycle, check_cycle_with, validate_document, validate_triangulation, ComplexError, FaceMatching,
    LabeledTriangulation, TriangulationDoc,
};
use crate::lorentz::{classify_isometry, EIGEN_TOL};
use crate::repvol::{
    build_developing_assignment, classify_peripheral, developed_matching, generate_path, relator_residuals,
    scan_path, shapes_volume, simplex_contributions, solve_gluing_equations, toledo_number, BoundaryPreference,
    Filling, PathDoc, RepError, NONDEGENERACY_TOL, Representation, RepresentationDoc, Verdict, PERIPHERAL_TOL, RELATOR_TOL, VOLUME_TOL,
};
use crate::schlafli::{
    schlafli_residual_pair, schlafli_residual_truncated_3d_pair, SchlafliError, DEFAULT_STEP, DERIVATIVE_VOLUME_TOL,
};
use crate::simplex::{
    dihedral_angles, HoroballAssignment, KeyframeFamily, SimplexDoc, SimplexError, VolumePlan,
};

/// Environment variable naming a fallback directory for input files.
pub const FIXTURES_ENV: &str = "HYPVOL_FIXTURES";
/// Horoball scale for truncated Schläfli sweeps of ideal 3-simplices.
pub const SWEEP_HOROBALL_SCALE: f64 = 50.0;
/// Default pass threshold for `simplex schlafli`, relative to `1 + |dV|`.
pub const SWEEP_TOL: f64 = 1e-5;
/// Default tolerance for the Developed cycle check in `tri validate --rep`.
pub const MATCH_TOL: f64 = 1e-7;
/// Default gluing-equation tolerance for `tri solve`.
pub const GLUING_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "hypvol", version, about = "Volumes of representations of manifold groups into SO(n,1)")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for the developing-map sampler.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override for the command's verdict.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Omit the timestamp field so identical runs give identical bytes.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Human-readable aligned table instead of JSON or CSV.
    #[arg(long, global = true)]
    pub pretty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single simplices and simplex families.
    #[command(subcommand)]
    Simplex(SimplexCmd),
    /// Labeled triangulations.
    #[command(subcommand)]
    Tri(TriCmd),
    /// Representations of the fundamental group.
    #[command(subcommand)]
    Rep(RepCmd),
    /// Deformation paths.
    #[command(subcommand)]
    Path(PathCmd),
}

#[derive(Debug, Subcommand)]
pub enum SimplexCmd {
    /// Signed volume of a simplex.
    Vol {
        #[arg(long)]
        simplex: PathBuf,
    },
    /// Dihedral angles of a simplex.
    Angle {
        #[arg(long)]
        simplex: PathBuf,
    },
    /// Schläfli residual sweep along a keyframed family.
    Schlafli {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 11)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum TriCmd {
    /// Structural validation plus the cycle check.
    Validate {
        #[arg(long)]
        tri: PathBuf,
        /// Representation for numerical face matching.
        #[arg(long)]
        rep: Option<PathBuf>,
    },
    /// Solves the gluing equations of an ideal triangulation.
    Solve {
        #[arg(long)]
        tri: PathBuf,
        /// `complete` or `p,q,t` for `p H(m) + q H(l) = 2 pi i t`.
        #[arg(long, default_value = "complete")]
        filling: String,
    },
}

#[derive(Debug, Args)]
pub struct RepArgs {
    #[arg(long)]
    pub tri: PathBuf,
    #[arg(long)]
    pub rep: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum RepCmd {
    /// Relator residuals.
    Check(RepArgs),
    /// Peripheral and generator classification.
    Classify(RepArgs),
    /// Volume of the representation.
    Vol(RepArgs),
    /// Toledo number of a surface representation.
    Toledo(RepArgs),
}

#[derive(Debug, Subcommand)]
pub enum PathCmd {
    /// Samples the volume along a deformation path.
    Scan {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        tri: PathBuf,
        #[arg(long, default_value_t = 11)]
        samples: usize,
        /// Exit 1 unless the verdict is Constant.
        #[arg(long)]
        expect_constant: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Schlafli(#[from] SchlafliError),
}

/// Rendered result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

struct Report {
    result: Value,
    ok: bool,
}

/// Input path as given, else relative to `$HYPVOL_FIXTURES`.
pub fn resolve(p: &Path) -> PathBuf {
    if p.exists() || p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os(FIXTURES_ENV) {
        Some(dir) if Path::new(&dir).join(p).exists() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn read(p: &Path) -> Result<(String, PathBuf), CliError> {
    let r = resolve(p);
    let text = std::fs::read_to_string(&r).map_err(|e| CliError::Io { path: r.display().to_string(), source: e })?;
    Ok((text, r))
}

fn load_tri(p: &Path) -> Result<LabeledTriangulation, CliError> {
    Ok(LabeledTriangulation::from_json(&read(p)?.0)?)
}

fn load_rep(p: &Path, t: &LabeledTriangulation) -> Result<Representation, CliError> {
    Ok(Representation::from_json(&read(p)?.0, &t.presentation)?)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

fn lower<T: std::fmt::Debug>(x: &T) -> String {
    format!("{x:?}").to_lowercase()
}

fn simplex_vol(path: &Path, tol: Option<f64>) -> Result<Report, CliError> {
    let doc: SimplexDoc = parse_json(&read(path)?.0, "simplex")?;
    let s = doc.to_simplex()?;
    let tol = tol.unwrap_or(VOLUME_TOL);
    let plan = VolumePlan::build(&s, tol)?;
    let unsigned = plan.unsigned_volume(&s)?;
    let method = match (s.dim(), s.kinds().iter().all(|k| *k == crate::lorentz::PointKind::Ideal)) {
        (2, _) => "angle_defect",
        (3, true) => "lobachevsky",
        _ => "cubature",
    };
    Ok(Report {
        result: json!({
            "dim": s.dim(),
            "volume": s.orientation() * unsigned,
            "unsigned_volume": unsigned,
            "orientation": s.orientation(),
            "method": method,
            "tolerance": tol,
        }),
        ok: true,
    })
}

fn simplex_angle(path: &Path) -> Result<Report, CliError> {
    let doc: SimplexDoc = parse_json(&read(path)?.0, "simplex")?;
    let s = doc.to_simplex()?;
    let rows: Vec<Value> = dihedral_angles(&s)?
        .into_iter()
        .map(|((i, j), a)| json!({"omit_i": i, "omit_j": j, "angle": a}))
        .collect();
    Ok(Report { result: json!({"dim": s.dim(), "rows": rows}), ok: true })
}

fn simplex_schlafli(path: &Path, samples: usize, step: f64, tol: Option<f64>) -> Result<Report, CliError> {
    if samples < 2 {
        return Err(CliError::Input("need at least 2 samples".into()));
    }
    let kf: KeyframeFamily = parse_json(&read(path)?.0, "family")?;
    let fam = kf.into_family()?;
    let tol = tol.unwrap_or(SWEEP_TOL);
    let truncated = fam.dim() == 3 && fam.kinds().contains(&crate::lorentz::PointKind::Ideal);
    let mut rows = Vec::with_capacity(samples);
    let mut ok = true;
    for k in 0..samples {
        // Interior samples keep the centered stencil inside [0, 1].
        let t = step + (1.0 - 2.0 * step) * k as f64 / (samples - 1) as f64;
        let pair = if truncated {
            let h = HoroballAssignment::uniform(&fam.at(t)?, SWEEP_HOROBALL_SCALE);
            schlafli_residual_truncated_3d_pair(&fam, t, step, &h, DERIVATIVE_VOLUME_TOL)?
        } else {
            schlafli_residual_pair(&fam, t, step, DERIVATIVE_VOLUME_TOL)?
        };
        let pass = pair.r_h.abs() <= tol * (1.0 + pair.dvol.abs());
        ok &= pass;
        rows.push(json!({
            "t": t,
            "dvol": pair.dvol,
            "residual": pair.r_h,
            "residual_half_step": pair.r_half,
            "step_halving_ratio": pair.step_halving_ratio(),
            "noise_floor": pair.noise_floor,
            "pass": pass,
        }));
    }
    Ok(Report {
        result: json!({
            "dim": fam.dim(),
            "step": step,
            "truncated": truncated,
            "tolerance": tol,
            "volume_tolerance": DERIVATIVE_VOLUME_TOL,
            "rows": rows,
        }),
        ok,
    })
}

fn tri_validate(tri: &Path, rep: Option<&Path>, tol: Option<f64>) -> Result<Report, CliError> {
    let doc: TriangulationDoc = parse_json(&read(tri)?.0, "triangulation")?;
    let report = validate_document(&doc);
    if !report.is_valid() {
        return Err(CliError::Complex(ComplexError::Invalid(report)));
    }
    let t = LabeledTriangulation::from_doc(&doc)?;
    let report = validate_triangulation(&t);
    if !report.is_valid() {
        return Err(CliError::Complex(ComplexError::Invalid(report)));
    }
    let (cycle, mode, ok) = match rep {
        None => (check_cycle(&t), "exact", true),
        Some(p) => {
            let rho = load_rep(p, &t)?;
            let a = build_developing_assignment(&rho, &t, 0, BoundaryPreference::PreferIdeal)?;
            let m = developed_matching(&rho, &a, tol.unwrap_or(MATCH_TOL));
            let c = check_cycle_with(&t, FaceMatching::Developed(&m));
            let closed = c.closed;
            (c, "developed", closed)
        }
    };
    let rows: Vec<Value> = cycle
        .unmatched
        .iter()
        .map(|u| json!({"simplex": u.simplex, "omitted": u.omitted, "net": u.net, "slots": u.slots}))
        .collect();
    Ok(Report {
        result: json!({
            "valid": true,
            "matching": mode,
            "match_tolerance": if rep.is_some() { json!(tol.unwrap_or(MATCH_TOL)) } else { Value::Null },
            "closed": cycle.closed,
            "faces": cycle.faces,
            "classes": cycle.classes,
            "rows": rows,
        }),
        ok,
    })
}

fn parse_filling(s: &str) -> Result<Filling, CliError> {
    if s == "complete" {
        return Ok(Filling::Complete);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Input(format!("filling '{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [p, q, t] => Ok(Filling::Dehn { p, q, t }),
        _ => Err(CliError::Input(format!("filling '{s}' must be 'complete' or 'p,q,t'"))),
    }
}

fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn tri_solve(tri: &Path, filling: &str, tol: Option<f64>) -> Result<Report, CliError> {
    let t = load_tri(tri)?;
    let f = parse_filling(filling)?;
    let tol = tol.unwrap_or(GLUING_TOL);
    let sol = solve_gluing_equations(&t, f, None, tol)?;
    let rows: Vec<Value> = sol
        .shapes
        .iter()
        .enumerate()
        .map(|(k, z)| json!({"tetrahedron": k, "re": z.re, "im": z.im}))
        .collect();
    Ok(Report {
        result: json!({
            "filling": filling,
            "tolerance": tol,
            "edge_residual": sol.edge_residual,
            "meridian_log": cjson(sol.meridian_log),
            "longitude_log": cjson(sol.longitude_log),
            "volume": shapes_volume(&sol.shapes)?,
            "relator_residual": sol.representation.relator_residual(),
            "rows": rows,
        }),
        ok: true,
    })
}

fn rep_check(a: &RepArgs, tol: Option<f64>) -> Result<Report, CliError> {
    let t = load_tri(&a.tri)?;
    let doc: RepresentationDoc = parse_json(&read(&a.rep)?.0, "representation")?;
    let pres = &t.presentation;
    for name in doc.images.keys() {
        if !pres.generators().contains(name) {
            return Err(RepError::UnknownGenerator(name.clone()).into());
        }
    }
    let images = pres
        .generators()
        .iter()
        .map(|g| {
            doc.images.get(g).ok_or_else(|| RepError::MissingImage(g.clone())).and_then(|m| m.to_isometry(g))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(g) = images.iter().find(|g| g.dim() != t.dim) {
        return Err(RepError::WrongDimension { tri: t.dim, rep: g.dim() }.into());
    }
    let tol = tol.unwrap_or(RELATOR_TOL);
    let res = relator_residuals(pres, &images);
    let max = res.iter().copied().fold(0.0, f64::max);
    let ok = res.iter().all(|r| *r <= tol);
    let rows: Vec<Value> = pres
        .relators
        .iter()
        .zip(&res)
        .map(|(r, x)| json!({"relator": pres.format(r), "residual": x}))
        .collect();
    Ok(Report { result: json!({"tolerance": tol, "max_residual": max, "ok": ok, "rows": rows}), ok })
}

fn rep_classify(a: &RepArgs, tol: Option<f64>) -> Result<Report, CliError> {
    let t = load_tri(&a.tri)?;
    let rho = load_rep(&a.rep, &t)?;
    let ptol = tol.unwrap_or(PERIPHERAL_TOL);
    let rows = t
        .cusps
        .iter()
        .map(|c| {
            let pc = classify_peripheral(&rho, &t, &c.id, ptol)?;
            Ok(json!({"cusp": c.id, "class": pc.class}))
        })
        .collect::<Result<Vec<_>, RepError>>()?;
    let mut gens = Map::new();
    for (name, g) in rho.presentation().generators().iter().zip(rho.images()) {
        let class = classify_isometry(g, EIGEN_TOL).map(|c| lower(&c.class)).unwrap_or_else(|_| "ambiguous".into());
        gens.insert(name.clone(), Value::String(class));
    }
    Ok(Report {
        result: json!({
            "peripheral_tolerance": ptol,
            "eigen_tolerance": EIGEN_TOL,
            "generators": gens,
            "rows": rows,
        }),
        ok: true,
    })
}

fn rep_vol(a: &RepArgs, seed: u64, tol: Option<f64>) -> Result<Report, CliError> {
    let t = load_tri(&a.tri)?;
    let rho = load_rep(&a.rep, &t)?;
    let tol = tol.unwrap_or(VOLUME_TOL);
    let pref = BoundaryPreference::PreferIdeal;
    let asg = build_developing_assignment(&rho, &t, seed, pref)?;
    let parts = simplex_contributions(&rho, &t, &asg, tol)?;
    let volume = crate::repvol::representation_volume_with(&rho, &t, &asg, tol)?;
    let rows: Vec<Value> = parts
        .iter()
        .zip(&t.simplices)
        .enumerate()
        .map(|(k, (v, s))| json!({"simplex": k, "sign": s.sign, "contribution": v}))
        .collect();
    Ok(Report {
        result: json!({
            "volume": volume,
            "tolerance": tol,
            "seed": seed,
            "preference": pref,
            "relator_residual": rho.relator_residual(),
            "rows": rows,
        }),
        ok: true,
    })
}

fn rep_toledo(a: &RepArgs, seed: u64) -> Result<Report, CliError> {
    let t = load_tri(&a.tri)?;
    let rho = load_rep(&a.rep, &t)?;
    let asg = build_developing_assignment(&rho, &t, seed, BoundaryPreference::PreferIdeal)?;
    let toledo = toledo_number(&rho, &t, &asg)?;
    Ok(Report {
        result: json!({
            "toledo": toledo,
            "toledo_over_2pi": toledo / std::f64::consts::TAU,
            "nondegeneracy_tolerance": NONDEGENERACY_TOL,
            "seed": seed,
        }),
        ok: true,
    })
}

fn monotonicity(v: &[f64]) -> &'static str {
    if v.windows(2).all(|w| w[1] > w[0]) {
        "increasing"
    } else if v.windows(2).all(|w| w[1] < w[0]) {
        "decreasing"
    } else {
        "none"
    }
}

fn path_scan(
    path: &Path,
    tri: &Path,
    samples: usize,
    expect_constant: bool,
    seed: u64,
    tol: Option<f64>,
) -> Result<Report, CliError> {
    let t = load_tri(tri)?;
    let (text, resolved) = read(path)?;
    let doc = PathDoc::from_json(&text)?;
    let dir = resolved.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = match doc.base_representation(&t, &dir) {
        Ok(b) => b,
        Err(e) => match (&doc.base, std::env::var_os(FIXTURES_ENV)) {
            (Some(_), Some(fx)) => doc.base_representation(&t, Path::new(&fx)).map_err(|_| e)?,
            _ => return Err(e.into()),
        },
    };
    let p = generate_path(&doc.spec, base, &t, doc.preference)?;
    let rep = scan_path(&p, &t, samples, tol, None, seed)?;
    let vols: Vec<f64> = rep.samples.iter().map(|s| s.volume).collect();
    let rows: Vec<Value> = rep
        .samples
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "volume": s.volume,
                "toledo": s.toledo,
                "relator_residual": s.relator_residual,
                "classes": s.classes,
            })
        })
        .collect();
    let ok = !expect_constant || rep.verdict == Verdict::Constant;
    Ok(Report {
        result: json!({
            "verdict": rep.verdict,
            "max_deviation": rep.max_deviation,
            "tolerance": rep.tolerance,
            "volume_tolerance": rep.volume_tolerance,
            "monotone": monotonicity(&vols),
            "classification_changes": rep.classification_changes,
            "preference": rep.preference,
            "seed": rep.seed,
            "expect_constant": expect_constant,
            "rows": rows,
        }),
        ok,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simplex(SimplexCmd::Vol { .. }) => "simplex vol",
        Command::Simplex(SimplexCmd::Angle { .. }) => "simplex angle",
        Command::Simplex(SimplexCmd::Schlafli { .. }) => "simplex schlafli",
        Command::Tri(TriCmd::Validate { .. }) => "tri validate",
        Command::Tri(TriCmd::Solve { .. }) => "tri solve",
        Command::Rep(RepCmd::Check(_)) => "rep check",
        Command::Rep(RepCmd::Classify(_)) => "rep classify",
        Command::Rep(RepCmd::Vol(_)) => "rep vol",
        Command::Rep(RepCmd::Toledo(_)) => "rep toledo",
        Command::Path(PathCmd::Scan { .. }) => "path scan",
    }
}

fn dispatch(cli: &Cli) -> Result<Report, CliError> {
    let c = &cli.common;
    match &cli.command {
        Command::Simplex(SimplexCmd::Vol { simplex }) => simplex_vol(simplex, c.tol),
        Command::Simplex(SimplexCmd::Angle { simplex }) => simplex_angle(simplex),
        Command::Simplex(SimplexCmd::Schlafli { family, samples, step }) => {
            simplex_schlafli(family, *samples, *step, c.tol)
        }
        Command::Tri(TriCmd::Validate { tri, rep }) => tri_validate(tri, rep.as_deref(), c.tol),
        Command::Tri(TriCmd::Solve { tri, filling }) => tri_solve(tri, filling, c.tol),
        Command::Rep(RepCmd::Check(a)) => rep_check(a, c.tol),
        Command::Rep(RepCmd::Classify(a)) => rep_classify(a, c.tol),
        Command::Rep(RepCmd::Vol(a)) => rep_vol(a, c.seed, c.tol),
        Command::Rep(RepCmd::Toledo(a)) => rep_toledo(a, c.seed),
        Command::Path(PathCmd::Scan { path, tri, samples, expect_constant }) => {
            path_scan(path, tri, *samples, *expect_constant, c.seed, c.tol)
        }
    }
}

fn error_value(e: &CliError) -> Value {
    match e {
        CliError::Complex(ComplexError::Invalid(r)) => json!({
            "error": "validation failed",
            "rows": r.violations.iter().map(|v| json!({"kind": v.kind, "detail": v.detail})).collect::<Vec<_>>(),
        }),
        other => json!({"error": other.to_string()}),
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

type Split = (Vec<(String, String)>, Vec<String>, Vec<Vec<String>>);

/// Scalar fields and the `rows` table of a report object.
fn split(report: &Value) -> Split {
    let obj = report.as_object().cloned().unwrap_or_default();
    let mut scalars = Vec::new();
    let mut header: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (k, v) in &obj {
        if k == "rows" {
            let items = v.as_array().cloned().unwrap_or_default();
            for it in &items {
                if let Some(o) = it.as_object() {
                    for key in o.keys() {
                        if !header.contains(key) {
                            header.push(key.clone());
                        }
                    }
                }
            }
            for it in &items {
                rows.push(header.iter().map(|h| cell(it.get(h).unwrap_or(&Value::Null))).collect());
            }
        } else {
            scalars.push((k.clone(), cell(v)));
        }
    }
    (scalars, header, rows)
}

fn render_csv(report: &Value) -> String {
    let (scalars, header, rows) = split(report);
    let mut out = String::new();
    if header.is_empty() {
        out.push_str("key,value\n");
        for (k, v) in scalars {
            out.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
        }
        return out;
    }
    let line = |cells: &[String]| cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
    out.push_str(&line(&header));
    out.push('\n');
    for r in rows {
        out.push_str(&line(&r));
        out.push('\n');
    }
    out
}

fn render_pretty(report: &Value) -> String {
    let (scalars, header, rows) = split(report);
    let mut out = String::new();
    let kw = scalars.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &scalars {
        out.push_str(&format!("{k:<kw$}  {v}\n"));
    }
    if !header.is_empty() {
        let widths: Vec<usize> = (0..header.len())
            .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
        };
        if !scalars.is_empty() {
            out.push('\n');
        }
        out.push_str(&line(&header));
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
    }
    out
}

fn render(common: &Common, command: &str, body: Value) -> String {
    let mut env = Map::new();
    env.insert("command".into(), Value::String(command.into()));
    if !common.no_timestamp {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        env.insert("timestamp".into(), json!(ts));
    }
    if common.pretty {
        let mut flat = body.as_object().cloned().unwrap_or_default();
        for (k, v) in env {
            flat.insert(k, v);
        }
        return render_pretty(&Value::Object(flat));
    }
    match common.format {
        Format::Csv => render_csv(&body),
        Format::Json => {
            env.insert("result".into(), body);
            let mut s = serde_json::to_string(&Value::Object(env)).expect("JSON values serialize");
            s.push('\n');
            s
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let name = command_name(&cli.command);
    match dispatch(&cli) {
        Ok(r) => Outcome {
            code: if r.ok { 0 } else { 1 },
            stdout: render(&cli.common, name, r.result),
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: 2,
            stdout: render(&cli.common, name, error_value(&e)),
            stderr: format!("error: {e}\n"),
        },
    }
}
