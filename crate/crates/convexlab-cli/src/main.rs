//! Command-line front end: mesh generation and export, direction-pair
//! audits, the consistency suite, the projection convergence studies and the
//! monopolist problem. Emits CSV tables and log-log SVG plots; all outputs
//! are deterministic given the flags and seed.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 a study
//! assertion failed (consistency mismatch or missing plateau).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use convexlab::consistency::{self, CaseId, SuiteConfig};
use convexlab::constraints::{pm_find_vectors, pm_verify, JumpConstraintMode};
use convexlab::csvio::{fmt_f64, Table};
use convexlab::experiments::{
    self, ConstraintMode, MonopolistStudy, NonconvergenceStudy, ProjectionStudy,
};
use convexlab::fem::Degree;
use convexlab::geometry::{parse_rect, Rect, Vec2};
use convexlab::mesh::{
    build_structured_mesh_seeded, io as mesh_io, Mesh, MeshKind, DEFAULT_MESH4_SEED,
};
use convexlab::qp::QpConfig;
use convexlab::svg::{loglog_plot, Series};

const EXIT_ASSERTION: i32 = 3;

#[derive(Parser)]
#[command(name = "convexlab", version, about = "2D finite-element laboratory for second-order constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a catalog mesh and write it as plain text.
    Mesh {
        #[arg(long, default_value = "mesh1")]
        kind: MeshKind,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Domain rectangle as `x0,y0,x1,y1`.
        #[arg(long, default_value = "0,0,1,1", value_parser = parse_rect_arg)]
        domain: Rect,
        #[arg(long, default_value_t = DEFAULT_MESH4_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Search and verify a direction pair with nonnegative normal products.
    PmAudit {
        #[arg(long, conflicts_with = "mesh_file")]
        kind: Option<MeshKind>,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Read the mesh from a file instead of building one.
        #[arg(long)]
        mesh_file: Option<PathBuf>,
        /// Restrict to edges meeting this region (`x0,y0,x1,y1`).
        #[arg(long, value_parser = parse_rect_arg)]
        region: Option<Rect>,
        #[arg(long, default_value_t = DEFAULT_MESH4_SEED)]
        seed: u64,
    },
    /// Measure the leading order of every tabulated constraint quantity.
    Consistency {
        /// Run a single case (`eq13`, `eq13.5`, `eq15`, `eq17`, `eq18`,
        /// `eq20`, `eq21`, `eq22`).
        #[arg(long)]
        case: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Constrained-projection convergence study (convex quadratic target).
    SubharmonicStudy {
        #[arg(long, default_value = "mesh1")]
        kind: MeshKind,
        #[arg(long = "n-levels", value_delimiter = ',', default_value = "4,8,16,32")]
        n_levels: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        degree: u32,
        #[arg(long, default_value = "weak-subharmonic")]
        constraints: ConstraintMode,
        /// P2 jump binding for the conformal mode: `integral` or `pointwise`.
        #[arg(long, default_value = "integral")]
        p2_jump_mode: String,
        #[arg(long, default_value_t = DEFAULT_MESH4_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Min L2 distance from the adversarial target to the conformal-convex
    /// cone per level; asserts the plateau.
    NonconvergenceStudy {
        #[arg(long, default_value = "mesh1")]
        kind: MeshKind,
        #[arg(long = "n-levels", value_delimiter = ',', default_value = "4,8,16,32")]
        n_levels: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = DEFAULT_MESH4_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// The monopolist problem on [1,2]^2; at alpha = 1 compares against the
    /// closed-form solution.
    Monopolist {
        #[arg(long, default_value = "mesh1")]
        kind: MeshKind,
        #[arg(long = "n-levels", value_delimiter = ',', default_value = "4,8,16")]
        n_levels: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// When set, use the adversarial price matrix built from the mesh's
        /// direction certificate with this margin (default: identity).
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MESH4_SEED)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_rect_arg(s: &str) -> Result<Rect, String> {
    parse_rect(s).map_err(|e| e.to_string())
}

fn suite_threads() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("CONVEXLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap >= 1 => available.min(cap),
        _ => available.min(8),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Mesh { kind, n, domain, seed, out } => cmd_mesh(kind, n, domain, seed, &out),
        Command::PmAudit { kind, n, mesh_file, region, seed } => {
            cmd_pm_audit(kind, n, mesh_file, region, seed)
        }
        Command::Consistency { case, out } => cmd_consistency(case, &out),
        Command::SubharmonicStudy {
            kind,
            n_levels,
            degree,
            constraints,
            p2_jump_mode,
            seed,
            out,
        } => cmd_subharmonic(kind, &n_levels, degree, constraints, &p2_jump_mode, seed, &out),
        Command::NonconvergenceStudy { kind, n_levels, eta, seed, out } => {
            cmd_nonconvergence(kind, &n_levels, eta, seed, &out)
        }
        Command::Monopolist { kind, n_levels, alpha, eta, seed, out } => {
            cmd_monopolist(kind, &n_levels, alpha, eta, seed, &out)
        }
    }
}

fn cmd_mesh(kind: MeshKind, n: usize, domain: Rect, seed: u64, out: &Path) -> anyhow::Result<i32> {
    let mesh = build_structured_mesh_seeded(kind, n, domain, seed)?;
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("mesh_{kind}_{n}.txt"));
    mesh_io::write_mesh_file(&mesh, &path)?;
    println!(
        "{}: {} vertices, {} triangles, {} interior edges, h = {}",
        path.display(),
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.interior_edges().len(),
        mesh.h()
    );
    Ok(0)
}

fn cmd_pm_audit(
    kind: Option<MeshKind>,
    n: usize,
    mesh_file: Option<PathBuf>,
    region: Option<Rect>,
    seed: u64,
) -> anyhow::Result<i32> {
    let mesh: Mesh = match (&mesh_file, kind) {
        (Some(path), _) => {
            mesh_io::read_mesh_file(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, kind) => {
            let kind = kind.unwrap_or(MeshKind::Mesh1);
            build_structured_mesh_seeded(kind, n, Rect::UNIT, seed)?
        }
    };
    let region = region.unwrap_or(mesh.domain());
    let normals = mesh.normal_direction_set(region)?;
    println!("normal directions ({}):", normals.len());
    for d in &normals {
        println!("  ({:+.12}, {:+.12})", d.x, d.y);
    }
    let Some((a, b)) = pm_find_vectors(&normals)? else {
        println!("no certificate found");
        return Ok(1);
    };
    let (ok, worst) = pm_verify(&normals, a, b);
    println!("certificate a = ({:+.12}, {:+.12})", a.x, a.y);
    println!("certificate b = ({:+.12}, {:+.12})", b.x, b.y);
    println!("worst product  = {worst:+.3e}");
    if ok {
        println!("verdict: certified");
        Ok(0)
    } else {
        println!("verdict: failed verification");
        Ok(1)
    }
}

fn cmd_consistency(case: Option<String>, out: &Path) -> anyhow::Result<i32> {
    let cfg = SuiteConfig { threads: suite_threads(), ..Default::default() };
    let reports = match case {
        Some(id) => match id.parse::<CaseId>() {
            Ok(id) => vec![consistency::run_case(&consistency::case_by_id(id), &cfg)?],
            Err(err) => {
                // unknown case ids are usage errors
                eprintln!("error: {err}");
                return Ok(2);
            }
        },
        None => consistency::run_suite(&cfg)?,
    };

    std::fs::create_dir_all(out)?;
    let mut samples = Table::new(vec!["case", "quantity", "test_function", "h", "q_h"]);
    let mut summary = Table::new(vec![
        "case",
        "quantity",
        "test_function",
        "predicted_order",
        "measured_order",
        "predicted_coefficient",
        "measured_coefficient",
        "r_squared",
        "verdict",
        "pass",
    ]);
    let mut all_pass = true;
    for report in &reports {
        all_pass &= report.pass;
        for q in &report.quantities {
            for &(h, v) in &q.samples {
                samples.push_row(vec![
                    report.case_id.to_string(),
                    q.quantity.to_string(),
                    q.test_function.clone(),
                    fmt_f64(h),
                    fmt_f64(v),
                ]);
            }
            summary.push_row(vec![
                report.case_id.to_string(),
                q.quantity.to_string(),
                q.test_function.clone(),
                fmt_f64(q.predicted_order),
                fmt_f64(q.measured_order),
                fmt_f64(q.predicted_coefficient),
                fmt_f64(q.measured_coefficient),
                fmt_f64(q.r_squared),
                if report.consistent { "consistent" } else { "inconsistent" }.to_string(),
                q.pass.to_string(),
            ]);
        }
    }
    samples.write(out.join("consistency.csv"))?;
    summary.write(out.join("consistency_summary.csv"))?;

    println!("case     verdict       measured");
    for report in &reports {
        let verdict = if report.consistent { "consistent" } else { "inconsistent" };
        let status = if report.pass { "confirmed" } else { "MISMATCH" };
        println!("{:<8} {:<13} {}", report.case_id.to_string(), verdict, status);
    }
    if all_pass {
        println!("all {} case(s) match the tabulated expansions", reports.len());
        Ok(0)
    } else {
        println!("some cases diverged from the tabulated expansions");
        Ok(EXIT_ASSERTION)
    }
}

fn write_projection_outputs(
    study: &ProjectionStudy,
    stem: &str,
    out: &Path,
) -> anyhow::Result<()> {
    let mut table = Table::new(vec![
        "n",
        "h",
        "l2_error",
        "observed_order",
        "iterations",
        "status",
        "min_det_residual",
    ]);
    for level in &study.levels {
        table.push_row(vec![
            level.n.to_string(),
            fmt_f64(level.h),
            fmt_f64(level.l2_error),
            level.observed_order.map(fmt_f64).unwrap_or_default(),
            level.iterations.to_string(),
            format!("{:?}", level.status),
            level.min_det_residual.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    table.write(out.join(format!("{stem}.csv")))?;
    let series = [Series {
        label: "L2 error".into(),
        points: study.levels.iter().map(|l| (l.h, l.l2_error)).collect(),
    }];
    std::fs::write(
        out.join(format!("{stem}.svg")),
        loglog_plot("constrained projection convergence", "h", "L2 error", &series),
    )?;
    Ok(())
}

fn cmd_subharmonic(
    kind: MeshKind,
    levels: &[usize],
    degree: u32,
    mode: ConstraintMode,
    p2_jump_mode: &str,
    seed: u64,
    out: &Path,
) -> anyhow::Result<i32> {
    let degree = Degree::from_int(degree)?;
    let p2 = match p2_jump_mode {
        "integral" => JumpConstraintMode::Integral,
        "pointwise" => JumpConstraintMode::Pointwise,
        other => bail!("unknown p2 jump mode `{other}`"),
    };
    let (target, lap) = experiments::default_projection_target();
    let study = experiments::subharmonic_study(
        kind,
        degree,
        mode,
        p2,
        levels,
        Rect::UNIT,
        seed,
        target,
        lap,
        &QpConfig::default(),
    )?;
    std::fs::create_dir_all(out)?;
    write_projection_outputs(&study, "subharmonic", out)?;
    println!("n      h            L2 error       order");
    for level in &study.levels {
        println!(
            "{:<6} {:<12.6e} {:<14.6e} {}",
            level.n,
            level.h,
            level.l2_error,
            level.observed_order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(0)
}

fn write_nonconvergence_outputs(
    study: &NonconvergenceStudy,
    out: &Path,
) -> anyhow::Result<()> {
    let mut table = Table::new(vec![
        "n",
        "h",
        "distance_adversarial",
        "distance_control",
        "iterations_adversarial",
        "iterations_control",
    ]);
    for level in &study.levels {
        table.push_row(vec![
            level.n.to_string(),
            fmt_f64(level.h),
            fmt_f64(level.adversarial),
            fmt_f64(level.control),
            level.adversarial_iterations.to_string(),
            level.control_iterations.to_string(),
        ]);
    }
    table.write(out.join("nonconvergence.csv"))?;

    let series = [
        Series {
            label: "adversarial target".into(),
            points: study.levels.iter().map(|l| (l.h, l.adversarial)).collect(),
        },
        Series {
            label: "compatible control".into(),
            points: study.levels.iter().map(|l| (l.h, l.control)).collect(),
        },
    ];
    std::fs::write(
        out.join("nonconvergence.svg"),
        loglog_plot("min L2 distance to the conformal-convex cone", "h", "distance", &series),
    )?;

    let mut activity = Table::new(vec!["edge", "mid_x", "mid_y", "residual", "multiplier", "active"]);
    for e in &study.activity {
        activity.push_row(vec![
            e.edge.to_string(),
            fmt_f64(e.midpoint.x),
            fmt_f64(e.midpoint.y),
            fmt_f64(e.residual),
            fmt_f64(e.multiplier),
            (e.active as u8).to_string(),
        ]);
    }
    activity.write(out.join("nonconvergence_activity.csv"))?;
    Ok(())
}

fn cmd_nonconvergence(
    kind: MeshKind,
    levels: &[usize],
    eta: f64,
    seed: u64,
    out: &Path,
) -> anyhow::Result<i32> {
    let study = experiments::nonconvergence_study(
        kind,
        levels,
        eta,
        None,
        seed,
        &QpConfig::default(),
    )?;
    std::fs::create_dir_all(out)?;
    write_nonconvergence_outputs(&study, out)?;
    println!(
        "certificate a = ({:+.6}, {:+.6}), b = ({:+.6}, {:+.6})",
        study.a.x, study.a.y, study.b.x, study.b.y
    );
    println!("n      h            adversarial    control");
    for level in &study.levels {
        println!(
            "{:<6} {:<12.6e} {:<14.8e} {:<14.8e}",
            level.n, level.h, level.adversarial, level.control
        );
    }

    let base = study.levels[0].adversarial;
    let plateau_ok = study.levels.iter().all(|l| l.adversarial >= 0.5 * base);
    let control_ok = if study.levels.len() >= 4 {
        let first = study.levels[0].control;
        let last = study.levels.last().unwrap().control;
        last <= first / 4.0
    } else {
        true
    };
    if plateau_ok && control_ok {
        println!("plateau confirmed (all levels >= 0.5 x level-0 distance)");
        Ok(0)
    } else {
        println!(
            "ASSERTION FAILED: plateau {} control {}",
            if plateau_ok { "ok" } else { "violated" },
            if control_ok { "ok" } else { "not decreasing 4x" },
        );
        Ok(EXIT_ASSERTION)
    }
}

fn write_monopolist_outputs(study: &MonopolistStudy, out: &Path) -> anyhow::Result<()> {
    let mut table = Table::new(vec![
        "n",
        "h",
        "l2_error",
        "observed_order",
        "objective",
        "objective_at_interpolant",
        "interpolant_feasible",
        "iterations",
        "status",
    ]);
    for level in &study.levels {
        table.push_row(vec![
            level.n.to_string(),
            fmt_f64(level.h),
            level.l2_error.map(fmt_f64).unwrap_or_default(),
            level.observed_order.map(fmt_f64).unwrap_or_default(),
            fmt_f64(level.objective),
            level.objective_at_interpolant.map(fmt_f64).unwrap_or_default(),
            level.interpolant_feasible.map(|b| b.to_string()).unwrap_or_default(),
            level.iterations.to_string(),
            format!("{:?}", level.status),
        ]);
    }
    table.write(out.join("monopolist.csv"))?;
    Ok(())
}

fn cmd_monopolist(
    kind: MeshKind,
    levels: &[usize],
    alpha: f64,
    eta: Option<f64>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<i32> {
    let c = match eta {
        None => experiments::C_IDENTITY,
        Some(eta) => {
            let domain = Rect::new(1.0, 1.0, 2.0, 2.0)?;
            let coarse = build_structured_mesh_seeded(kind, levels[0], domain, seed)?;
            let normals = coarse.normal_direction_set(domain)?;
            let (a, b): (Vec2, Vec2) = pm_find_vectors(&normals)?
                .ok_or_else(|| anyhow::anyhow!("no direction certificate found"))?;
            convexlab::constraints::lemma2_matrix(a, b, eta)?.c
        }
    };
    let study = experiments::monopolist_study(kind, levels, alpha, c, seed, &QpConfig::default())?;
    std::fs::create_dir_all(out)?;
    write_monopolist_outputs(&study, out)?;
    println!("n      h            L2 error       order    status");
    for level in &study.levels {
        println!(
            "{:<6} {:<12.6e} {:<14} {:<8} {:?}",
            level.n,
            level.h,
            level.l2_error.map(|e| format!("{e:.6e}")).unwrap_or_else(|| "-".into()),
            level.observed_order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into()),
            level.status
        );
    }
    Ok(0)
}
