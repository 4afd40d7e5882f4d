//! Command-line entry point. Every JSON artifact starts with a provenance block.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::ade::{detect_ade, CartanType};
use crate::braid::{apply_word, charge_polynomial, charges, full_turn_word, orbit_search, stokes_data};
use crate::error::{Error, Result};
use crate::io::{self, Provenance};
use crate::isomonodromy::{nearest_index, verify_isomonodromy, IsoOptions};
use crate::rh_kernel::{f_minimize, positivity_certificate, SampleOptions};
use crate::rh_solver::{log_grid, metric_curve, read_curve_csv, tt_residual, write_curve_csv, MetricCurve, SolverOptions, Tolerances};
use crate::spectrum::{admissible_order, check_pd_tol, choose_delta, crossing_sequence, delta_interval, stokes_rays};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 1;
pub const EXIT_SOLVE: i32 = 2;
pub const EXIT_CERT: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ttstar", version, about = "Stokes data, ADE detection and Riemann-Hilbert solves for radial tt* structures")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol_angle: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_jump: f64,
    #[arg(long, global = true, default_value_t = 1e-4)]
    pub tol_iso: f64,
    /// Recorded in provenance; no subcommand draws random numbers.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 2)]
    pub json_indent: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stokes rays, separating-ray numbering, delta and the full-turn crossing sequence.
    Rays {
        #[arg(long)]
        spectrum: PathBuf,
    },
    /// Apply a braid word, search for a target, or list the Stokes data set.
    Orbit {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        word: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long, default_value_t = crate::braid::DEFAULT_ORBIT_DEPTH)]
        bound: usize,
    },
    /// Search the orbit for a matrix whose symmetrization is an ADE Cartan matrix.
    DetectAde {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = crate::braid::DEFAULT_ORBIT_DEPTH)]
        bound: usize,
        /// Accept Cartan matrices up to relabelling of nodes.
        #[arg(long)]
        permuted: bool,
    },
    /// Eigenvalues and exact characteristic polynomial of S (S^-1)^t.
    Charges {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Positivity verdict for the jump data.
    Certify {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        analytic_only: bool,
        #[arg(long, default_value_t = 25)]
        x_samples: usize,
        #[arg(long, default_value_t = 64)]
        mu_samples: usize,
    },
    /// Global minimum of the E-family determinant on [-1, 1]^k.
    MinimizeF {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
    /// Metric curve G(x) on a log grid, written as CSV.
    Solve {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover Stokes factors from a metric curve and compare across x.
    Verify {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        at: VerifyAt,
    },
    /// certify, solve and verify in one run.
    Pipeline {
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        at: VerifyAt,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub x_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 41)]
    pub x_count: usize,
    /// Solve even when positivity is not certified.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyAt {
    /// x values (nearest grid points are used).
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 1.6])]
    pub at: Vec<f64>,
    /// Use every grid point instead of --at.
    #[arg(long)]
    pub all: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolveFailure { .. } | Error::StiffnessFailure(_) | Error::SingularMetric | Error::NearContour(_) => EXIT_SOLVE,
        Error::CertificationMissing(_) => EXIT_CERT,
        Error::StructureViolation { .. } => EXIT_VERIFY,
        _ => EXIT_BAD_INPUT,
    }
}

struct Ctx<'a, W: Write> {
    global: &'a Global,
    out: &'a mut W,
}

impl<W: Write> Ctx<'_, W> {
    fn emit(&mut self, prov: Provenance, report: Value) -> Result<()> {
        let prov = prov
            .tol("tol_angle", self.global.tol_angle)
            .tol("tol_jump", self.global.tol_jump)
            .tol("tol_iso", self.global.tol_iso)
            .param("seed", self.global.seed);
        let text = io::to_json_string(&io::with_provenance(&prov, report), self.global.json_indent);
        writeln!(self.out, "{text}").map_err(|e| Error::Parse(format!("output: {e}")))
    }
}

fn read(path: &Path) -> Result<String> {
    io::read_text(path)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn indices(curve: &MetricCurve, at: &VerifyAt) -> Vec<usize> {
    if at.all {
        return (0..curve.xs.len()).collect();
    }
    let mut idx: Vec<usize> = at.at.iter().map(|&x| nearest_index(&curve.xs, x)).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn solver_options(g: &Global, force: bool) -> SolverOptions {
    SolverOptions { tol_jump: g.tol_jump, force, ..Default::default() }
}

fn tolerances(g: &Global) -> Tolerances {
    Tolerances { jump: g.tol_jump, ..Default::default() }
}

fn curve_summary(curve: &MetricCurve, tol: &Tolerances) -> Result<(Value, bool)> {
    let tt = tt_residual(curve).ok();
    let worst = |f: &dyn Fn(&crate::rh_solver::PointReport) -> f64| curve.points.iter().map(f).fold(0.0, f64::max);
    let checks = curve.all_checks_below(tol);
    let v = json!({
        "x_count": curve.xs.len(),
        "jump_residual": worst(&|p| p.jump_residual),
        "normalization_residual": worst(&|p| p.normalization_residual),
        "symmetry_residual": worst(&|p| p.symmetry.neg.max(p.symmetry.refl)),
        "hermitian": worst(&|p| p.hermitian),
        "orthogonality": worst(&|p| p.orthogonality),
        "det_error": worst(&|p| p.det_error),
        "cholesky_ok": curve.points.iter().all(|p| p.cholesky_ok),
        "tt_residual": tt.as_ref().map(|t| t.sup),
        "gx_central_difference_gap": curve.gx_crosscheck(),
        "checks_passed": checks,
        "note": "solvability is checked per grid point; positivity is certified separately",
        "points": to_value(&curve.points),
    });
    Ok((v, checks))
}

fn write_curve(curve: &MetricCurve, path: &Path) -> Result<()> {
    let tt = tt_residual(curve).ok();
    let f = fs::File::create(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    write_curve_csv(curve, tt.as_ref(), f)
}

fn run_inner<W: Write>(cli: &Cli, ctx: &mut Ctx<W>) -> Result<i32> {
    let g = ctx.global.clone();
    match &cli.command {
        Command::Rays { spectrum } => {
            let text = read(spectrum)?;
            let spec = io::parse_spectrum(&text)?;
            let arr = stokes_rays(&spec, false)?;
            let pd = check_pd_tol(&spec, g.tol_angle);
            let ordered = spec.is_admissibly_ordered();
            let mut report = json!({
                "arrangement": to_value(&arr),
                "pd": pd,
                "admissibly_ordered": ordered,
                "admissible_order": admissible_order(&spec, None).ok(),
            });
            if ordered && pd {
                report["delta_interval"] = to_value(&delta_interval(&spec)?);
                report["delta"] = json!(choose_delta(&spec)?);
                report["full_turn_crossings"] = json!(crossing_sequence(&spec, std::f64::consts::TAU)?);
            }
            ctx.emit(Provenance::new("rays").input("spectrum", &text), report)?;
            Ok(if pd { EXIT_OK } else { EXIT_BAD_INPUT })
        }
        Command::Orbit { matrix, word, target, spectrum, bound } => {
            let mtext = read(matrix)?;
            let s = io::parse_unitriangular(&mtext)?;
            let mut prov = Provenance::new("orbit").input("matrix", &mtext).param("bound", bound);
            let mut report = json!({ "matrix": io::matrix_json(s.matrix()) });
            if let Some(w) = word {
                let wtext = read(w)?;
                prov = prov.input("word", &wtext);
                let w = io::parse_word(&wtext)?;
                report["applied"] = io::matrix_json(apply_word(&s, &w)?.matrix());
            }
            if let Some(t) = target {
                let ttext = read(t)?;
                prov = prov.input("target", &ttext);
                let t = io::parse_unitriangular(&ttext)?;
                report["witness_word"] = to_value(&orbit_search(&s, &t, *bound));
            }
            if let Some(sp) = spectrum {
                let stext = read(sp)?;
                prov = prov.input("spectrum", &stext);
                let spec = io::parse_spectrum(&stext)?;
                let set = stokes_data(&s, &spec)?;
                report["full_turn_word"] = to_value(&full_turn_word(&spec)?);
                report["stokes_data"] = json!({
                    "raw_count": set.raw_count,
                    "distinct": set.matrices.len(),
                    "matrices": set.matrices.iter().map(|m| io::matrix_json(m.matrix())).collect::<Vec<_>>(),
                });
            }
            ctx.emit(prov, report)?;
            Ok(EXIT_OK)
        }
        Command::DetectAde { matrix, bound, permuted } => {
            let mtext = read(matrix)?;
            let s = io::parse_unitriangular(&mtext)?;
            let found = detect_ade(&s, *bound, *permuted);
            let report = match &found {
                Some((t, w)) => json!({ "type": t.to_string(), "witness_word": to_value(w) }),
                None => json!({ "type": Value::Null, "witness_word": Value::Null }),
            };
            let prov = Provenance::new("detect-ade").input("matrix", &mtext).param("bound", bound).param("permuted", permuted);
            ctx.emit(prov, report)?;
            Ok(if found.is_some() { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Charges { matrix } => {
            let mtext = read(matrix)?;
            let s = io::parse_unitriangular(&mtext)?;
            let ch: Vec<[f64; 2]> = charges(&s).iter().map(|z| [z.re, z.im]).collect();
            let poly: Vec<String> = charge_polynomial(&s).iter().map(|c| c.to_string()).collect();
            ctx.emit(Provenance::new("charges").input("matrix", &mtext), json!({ "charges": ch, "charpoly": poly }))?;
            Ok(EXIT_OK)
        }
        Command::Certify { spectrum, matrix, analytic_only, x_samples, mu_samples } => {
            let stext = read(spectrum)?;
            let mtext = read(matrix)?;
            let spec = io::parse_spectrum(&stext)?;
            let s = io::parse_unitriangular(&mtext)?;
            let opts = SampleOptions {
                x_count: *x_samples,
                mu_count: *mu_samples,
                analytic_only: *analytic_only,
                ..Default::default()
            };
            let rep = positivity_certificate(&spec, &s, &opts)?;
            let prov = Provenance::new("certify")
                .input("spectrum", &stext)
                .input("matrix", &mtext)
                .param("x_samples", x_samples)
                .param("mu_samples", mu_samples)
                .param("analytic_only", analytic_only);
            ctx.emit(prov, to_value(&rep))?;
            Ok(if rep.certified() { EXIT_OK } else { EXIT_CERT })
        }
        Command::MinimizeF { family, step } => {
            let t: CartanType = family.parse()?;
            let rep = f_minimize(t, *step, 1e-12)?;
            ctx.emit(Provenance::new("minimize-f").param("family", family).param("step", step), to_value(&rep))?;
            Ok(EXIT_OK)
        }
        Command::Solve { solve, out } => {
            let stext = read(&solve.spectrum)?;
            let mtext = read(&solve.matrix)?;
            let spec = io::parse_spectrum(&stext)?;
            let s = io::parse_unitriangular(&mtext)?;
            let xs = log_grid(solve.x_min, solve.x_max, solve.x_count);
            let curve = metric_curve(&spec, &s, &xs, &solver_options(&g, solve.force))?;
            write_curve(&curve, out)?;
            let (summary, ok) = curve_summary(&curve, &tolerances(&g))?;
            let prov = Provenance::new("solve")
                .input("spectrum", &stext)
                .input("matrix", &mtext)
                .param("x_min", solve.x_min)
                .param("x_max", solve.x_max)
                .param("x_count", solve.x_count)
                .param("force", solve.force);
            ctx.emit(prov, summary)?;
            Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Verify { curve, spectrum, matrix, at } => {
            let stext = read(spectrum)?;
            let mtext = read(matrix)?;
            let ctext = read(curve)?;
            let spec = io::parse_spectrum(&stext)?;
            let s = io::parse_unitriangular(&mtext)?;
            let c = read_curve_csv(curve, &spec)?;
            let idx = indices(&c, at);
            let opts = IsoOptions { tol_iso: g.tol_iso, strict: false, ..Default::default() };
            let rep = verify_isomonodromy(&c, &idx, Some(&s), &opts)?;
            let prov = Provenance::new("verify")
                .input("spectrum", &stext)
                .input("matrix", &mtext)
                .input("curve", &ctext)
                .param("x", idx.iter().map(|&i| c.xs[i]).collect::<Vec<_>>());
            ctx.emit(prov, iso_json(&rep))?;
            Ok(if rep.pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Pipeline { solve, at, out_dir } => {
            let stext = read(&solve.spectrum)?;
            let mtext = read(&solve.matrix)?;
            let spec = io::parse_spectrum(&stext)?;
            let s = io::parse_unitriangular(&mtext)?;
            let cert = positivity_certificate(&spec, &s, &SampleOptions::default())?;
            if !cert.certified() && !solve.force {
                ctx.emit(Provenance::new("pipeline").input("spectrum", &stext).input("matrix", &mtext), json!({ "certificate": to_value(&cert) }))?;
                return Ok(EXIT_CERT);
            }
            let xs = log_grid(solve.x_min, solve.x_max, solve.x_count);
            let curve = metric_curve(&spec, &s, &xs, &solver_options(&g, true))?;
            fs::create_dir_all(out_dir).map_err(|e| Error::Parse(format!("{}: {e}", out_dir.display())))?;
            write_curve(&curve, &out_dir.join("curve.csv"))?;
            let (summary, solved_ok) = curve_summary(&curve, &tolerances(&g))?;
            let idx = indices(&curve, at);
            let opts = IsoOptions { tol_iso: g.tol_iso, strict: false, ..Default::default() };
            let iso = verify_isomonodromy(&curve, &idx, Some(&s), &opts)?;
            let report = json!({
                "certificate": to_value(&cert),
                "solve": summary,
                "verify": iso_json(&iso),
            });
            let prov = Provenance::new("pipeline")
                .input("spectrum", &stext)
                .input("matrix", &mtext)
                .param("x_min", solve.x_min)
                .param("x_max", solve.x_max)
                .param("x_count", solve.x_count)
                .param("verify_x", idx.iter().map(|&i| curve.xs[i]).collect::<Vec<_>>());
            let prov_full = prov
                .clone()
                .tol("tol_angle", g.tol_angle)
                .tol("tol_jump", g.tol_jump)
                .tol("tol_iso", g.tol_iso)
                .param("seed", g.seed);
            let text = io::to_json_string(&io::with_provenance(&prov_full, report.clone()), g.json_indent);
            let rpath = out_dir.join("report.json");
            fs::write(&rpath, text + "\n").map_err(|e| Error::Parse(format!("{}: {e}", rpath.display())))?;
            ctx.emit(prov, report)?;
            Ok(if !solved_ok || !iso.pass { EXIT_VERIFY } else { EXIT_OK })
        }
    }
}

fn iso_json(rep: &crate::isomonodromy::IsoReport) -> Value {
    let per_factor: Vec<Value> = rep
        .per_x
        .iter()
        .map(|r| json!({ "x": r.x, "factors": to_value(&r.factors), "s_rec": r.s_rec_entries, "halfturn_residual": r.halfturn_residual }))
        .collect();
    json!({
        "deviation": rep.deviation,
        "input_error": rep.input_error,
        "per_factor": per_factor,
        "halfturn_ok": rep.halfturn_ok,
        "structure_ok": rep.structure_ok,
        "pass": rep.pass,
    })
}

/// Runs a parsed command, writing JSON to `out` and errors to stderr.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> i32 {
    let global = cli.global.clone();
    if !(global.tol_angle > 0.0 && global.tol_jump > 0.0 && global.tol_iso > 0.0) {
        eprintln!("{}", json!({ "error": "tolerances must be positive" }));
        return EXIT_BAD_INPUT;
    }
    let mut ctx = Ctx { global: &global, out };
    match run_inner(cli, &mut ctx) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string() }));
            exit_code(&e)
        }
    }
}
