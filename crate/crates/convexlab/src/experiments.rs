//! Experiment drivers shared by the command-line front end and the
//! acceptance suite: constrained-projection convergence, the conformal
//! non-convergence plateau and the monopolist problem.

use std::collections::BTreeMap;

use crate::constraints::{
    conformal_convexity_constraints, lemma2_matrix, monopolist_constraints, p2_jump_constraints,
    pm_find_vectors, weak_convexity_residuals, weak_subharmonicity_constraints,
    JumpConstraintMode, LinearConstraintSet, TestKind,
};
use crate::fem::{
    assemble_gradient_load, assemble_load, assemble_stiffness_anisotropic, l2_distance, Degree,
    FeFunction,
};
use crate::geometry::{Point, Rect, Vec2};
use crate::mesh::{build_structured_mesh_seeded, Mesh, MeshKind, DEFAULT_MESH4_SEED};
use crate::qp::{min_l2_distance_convex, solve_projection_h10, solve_qp, QpConfig, QpProblem, QpStatus};
use crate::{Error, Result};

/// Which inequality family constrains a projection study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintMode {
    Conformal,
    WeakSubharmonic,
    WeakConvex,
    Monopolist,
    None,
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conformal" => Ok(ConstraintMode::Conformal),
            "weak-subharmonic" => Ok(ConstraintMode::WeakSubharmonic),
            "weak-convex" => Ok(ConstraintMode::WeakConvex),
            "monopolist" => Ok(ConstraintMode::Monopolist),
            "none" => Ok(ConstraintMode::None),
            other => Err(Error::InvalidArgument(format!("unknown constraint mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConstraintMode::Conformal => "conformal",
            ConstraintMode::WeakSubharmonic => "weak-subharmonic",
            ConstraintMode::WeakConvex => "weak-convex",
            ConstraintMode::Monopolist => "monopolist",
            ConstraintMode::None => "none",
        };
        f.write_str(s)
    }
}

/// Builds the constraint rows for a mode (the weak-convex mode constrains the
/// linear trace part; its determinant residuals are evaluated a posteriori).
pub fn build_constraints(
    mesh: &Mesh,
    degree: Degree,
    mode: ConstraintMode,
    p2_mode: JumpConstraintMode,
) -> Result<Option<LinearConstraintSet>> {
    match mode {
        ConstraintMode::None => Ok(None),
        ConstraintMode::Conformal => match degree {
            Degree::P1 => Ok(Some(conformal_convexity_constraints(mesh)?)),
            Degree::P2 => Ok(Some(p2_jump_constraints(mesh, p2_mode)?)),
        },
        ConstraintMode::WeakSubharmonic | ConstraintMode::WeakConvex => {
            let kind = match degree {
                Degree::P1 => TestKind::Vertices,
                Degree::P2 => TestKind::Midpoints,
            };
            Ok(Some(weak_subharmonicity_constraints(mesh, degree, kind)?))
        }
        ConstraintMode::Monopolist => {
            if degree != Degree::P1 {
                return Err(Error::InvalidCombination(
                    "the monopolist cone is a P1 construction".into(),
                ));
            }
            Ok(Some(monopolist_constraints(mesh)?))
        }
    }
}

/// One refinement level of a convergence study.
#[derive(Clone, Debug)]
pub struct ProjectionLevel {
    pub n: usize,
    pub h: f64,
    pub l2_error: f64,
    /// Observed order against the previous level.
    pub observed_order: Option<f64>,
    pub iterations: usize,
    pub status: QpStatus,
    /// Worst a-posteriori weak-determinant residual (weak-convex mode only).
    pub min_det_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ProjectionStudy {
    pub levels: Vec<ProjectionLevel>,
}

/// Default projection target: the convex quadratic `x^2 + xy + y^2`
/// (Hessian `[[2,1],[1,2]]`, positive definite) with `f` its Laplacian.
pub fn default_projection_target() -> (impl Fn(f64, f64) -> f64 + Copy, f64) {
    (|x: f64, y: f64| x * x + x * y + y * y, 4.0)
}

/// Constrained `H^1_0`-projection convergence study against a known smooth
/// target: per level, the `L^2` error of the projection.
pub fn subharmonic_study<F>(
    kind: MeshKind,
    degree: Degree,
    mode: ConstraintMode,
    p2_mode: JumpConstraintMode,
    levels: &[usize],
    domain: Rect,
    seed: u64,
    target: F,
    laplacian: f64,
    qp: &QpConfig,
) -> Result<ProjectionStudy>
where
    F: Fn(f64, f64) -> f64 + Copy,
{
    let mut out = Vec::with_capacity(levels.len());
    let mut prev: Option<(f64, f64)> = None;
    for &n in levels {
        let mesh = build_structured_mesh_seeded(kind, n, domain, seed)?;
        let constraints = build_constraints(&mesh, degree, mode, p2_mode)?;
        let sol =
            solve_projection_h10(&mesh, degree, constraints, |_, _| laplacian, target, qp)?;
        if sol.status == QpStatus::Infeasible {
            return Err(Error::Solver(format!("projection infeasible at level n={n}")));
        }
        let uh = FeFunction::new(&mesh, degree, sol.u.clone())?;
        let err = l2_distance(&uh, target);
        let min_det_residual = if mode == ConstraintMode::WeakConvex {
            let kind = match degree {
                Degree::P1 => TestKind::Vertices,
                Degree::P2 => TestKind::Midpoints,
            };
            weak_convexity_residuals(&uh, kind)?
                .into_iter()
                .map(|(_, _, det)| det)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        } else {
            None
        };
        let observed_order = prev.map(|(hp, ep)| ((ep / err).ln()) / ((hp / mesh.h()).ln()));
        out.push(ProjectionLevel {
            n,
            h: mesh.h(),
            l2_error: err,
            observed_order,
            iterations: sol.iterations,
            status: sol.status,
            min_det_residual,
        });
        prev = Some((mesh.h(), err));
    }
    Ok(ProjectionStudy { levels: out })
}

/// One level of the non-convergence study.
#[derive(Clone, Debug)]
pub struct DistanceLevel {
    pub n: usize,
    pub h: f64,
    /// Min `L^2` distance from the adversarial target to the conformal cone.
    pub adversarial: f64,
    /// Same for the compatible control target `(x^2+y^2)/2`.
    pub control: f64,
    pub adversarial_iterations: usize,
    pub control_iterations: usize,
}

/// Activity of one jump row at the finest level.
#[derive(Clone, Debug)]
pub struct EdgeActivity {
    pub edge: usize,
    pub midpoint: Point,
    pub residual: f64,
    pub multiplier: f64,
    pub active: bool,
}

#[derive(Clone, Debug)]
pub struct NonconvergenceStudy {
    pub a: Vec2,
    pub b: Vec2,
    pub c_inv: [[f64; 2]; 2],
    pub levels: Vec<DistanceLevel>,
    /// Per-edge constraint activity at the finest level (adversarial run).
    pub activity: Vec<EdgeActivity>,
}

/// Projects the adversarial quadratic onto the conformal-convex cone across
/// refinement levels, recording the distance plateau, plus a compatible
/// control target that does converge.
pub fn nonconvergence_study(
    kind: MeshKind,
    levels: &[usize],
    eta: f64,
    pair: Option<(Vec2, Vec2)>,
    seed: u64,
    qp: &QpConfig,
) -> Result<NonconvergenceStudy> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    let domain = Rect::new(1.0, 1.0, 2.0, 2.0)?;
    let (a, b) = match pair {
        Some(p) => p,
        None => {
            let coarse = build_structured_mesh_seeded(kind, levels[0], domain, seed)?;
            let normals = coarse.normal_direction_set(domain)?;
            pm_find_vectors(&normals)?
                .ok_or_else(|| Error::Solver("no direction certificate found".into()))?
        }
    };
    let aq = lemma2_matrix(a, b, eta)?;
    let anchor = domain.lower_left();
    let control = |x: f64, y: f64| 0.5 * (x * x + y * y);

    let mut out = Vec::with_capacity(levels.len());
    let mut activity = Vec::new();
    for (k, &n) in levels.iter().enumerate() {
        let mesh = build_structured_mesh_seeded(kind, n, domain, seed)?;
        let target = aq.u_exact(anchor);
        let (sol_a, dist_a) = min_l2_distance_convex(&mesh, &target, qp)?;
        let (sol_c, dist_c) = min_l2_distance_convex(&mesh, control, qp)?;
        out.push(DistanceLevel {
            n,
            h: mesh.h(),
            adversarial: dist_a,
            control: dist_c,
            adversarial_iterations: sol_a.iterations,
            control_iterations: sol_c.iterations,
        });
        if k + 1 == levels.len() {
            let cone = conformal_convexity_constraints(&mesh)?;
            let residuals = cone.residuals(&sol_a.u);
            let scale = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(1e-300);
            for (i, e) in mesh.interior_edges().iter().enumerate() {
                let residual = residuals[i];
                let multiplier = sol_a.multipliers.get(i).copied().unwrap_or(0.0);
                activity.push(EdgeActivity {
                    edge: e.edge,
                    midpoint: mesh.edge_midpoint(e.edge),
                    residual,
                    multiplier,
                    active: residual.abs() <= 1e-6 * scale,
                });
            }
        }
    }
    Ok(NonconvergenceStudy { a: aq.a, b: aq.b, c_inv: aq.c_inv, levels: out, activity })
}

/// One level of the monopolist run.
#[derive(Clone, Debug)]
pub struct MonopolistLevel {
    pub n: usize,
    pub h: f64,
    /// `L^2` error against the closed-form solution (only at `alpha = 1`).
    pub l2_error: Option<f64>,
    pub observed_order: Option<f64>,
    pub objective: f64,
    /// Objective at the interpolant of the closed form (an upper bound for
    /// the optimum when the interpolant is feasible).
    pub objective_at_interpolant: Option<f64>,
    pub interpolant_feasible: Option<bool>,
    pub iterations: usize,
    pub status: QpStatus,
}

#[derive(Clone, Debug)]
pub struct MonopolistStudy {
    pub levels: Vec<MonopolistLevel>,
}

fn invert_2x2(c: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    if det.abs() < 1e-14 {
        return Err(Error::InvalidArgument("singular price matrix".into()));
    }
    Ok([[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]])
}

/// Solves the discretized monopolist problem
/// `min int( grad u' C grad u / 2 - x . grad u + (1 - alpha) u )` over the
/// monopolist cone on `[1,2]^2`.
///
/// At `alpha = 1` the objective only sees the gradient, so the value at the
/// lower-left corner is pinned to zero, matching the closed-form solution
/// `x' C^-1 x / 2` anchored there.
pub fn monopolist_study(
    kind: MeshKind,
    levels: &[usize],
    alpha: f64,
    c: [[f64; 2]; 2],
    seed: u64,
    qp: &QpConfig,
) -> Result<MonopolistStudy> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0,1], got {alpha}")));
    }
    let domain = Rect::new(1.0, 1.0, 2.0, 2.0)?;
    let c_inv = invert_2x2(c)?;
    let exact = move |x: f64, y: f64| {
        let q = |px: f64, py: f64| {
            0.5 * (c_inv[0][0] * px * px + 2.0 * c_inv[0][1] * px * py + c_inv[1][1] * py * py)
        };
        q(x, y) - q(1.0, 1.0)
    };

    let mut out = Vec::with_capacity(levels.len());
    let mut prev: Option<(f64, f64)> = None;
    for &n in levels {
        let mesh = build_structured_mesh_seeded(kind, n, domain, seed)?;
        let p = assemble_stiffness_anisotropic(&mesh, Degree::P1, c);
        let grad_load = assemble_gradient_load(&mesh, Degree::P1, |pt| Vec2::new(pt.x, pt.y));
        let unit_load = assemble_load(&mesh, Degree::P1, |_, _| 1.0);
        let q: Vec<f64> = grad_load
            .iter()
            .zip(&unit_load)
            .map(|(g, m)| -g + (1.0 - alpha) * m)
            .collect();
        let cone = monopolist_constraints(&mesh)?;
        let mut pinned = BTreeMap::new();
        if alpha == 1.0 {
            let corner = mesh.nearest_vertex(domain.lower_left());
            pinned.insert(corner, 0.0);
        }
        let problem = QpProblem { p, q, constraints: Some(cone), pinned };
        let sol = solve_qp(&problem, qp)?;

        let (l2_error, observed_order, objective_at_interpolant, interpolant_feasible) =
            if alpha == 1.0 {
                let uh = FeFunction::new(&mesh, Degree::P1, sol.u.clone())?;
                let err = l2_distance(&uh, exact);
                let order = prev.map(|(hp, ep)| ((ep / err).ln()) / ((hp / mesh.h()).ln()));
                prev = Some((mesh.h(), err));
                let interp = FeFunction::interpolate(&mesh, Degree::P1, exact);
                let feasible = problem
                    .constraints
                    .as_ref()
                    .map(|set| set.is_satisfied(interp.dofs(), crate::constraints::CONSTRAINT_TOL));
                let obj_interp = objective_of(&problem, interp.dofs());
                (Some(err), order, Some(obj_interp), feasible)
            } else {
                (None, None, None, None)
            };
        out.push(MonopolistLevel {
            n,
            h: mesh.h(),
            l2_error,
            observed_order,
            objective: sol.objective,
            objective_at_interpolant,
            interpolant_feasible,
            iterations: sol.iterations,
            status: sol.status,
        });
    }
    Ok(MonopolistStudy { levels: out })
}

fn objective_of(problem: &QpProblem, u: &[f64]) -> f64 {
    let mut obj = 0.5 * problem.p.quadratic_form(u);
    for (qi, ui) in problem.q.iter().zip(u) {
        obj += qi * ui;
    }
    obj
}

/// Identity price matrix (the compatible monopolist case).
pub const C_IDENTITY: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

/// Convenience: the default perturbation seed re-exported for drivers.
pub const DEFAULT_SEED: u64 = DEFAULT_MESH4_SEED;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_mode_parsing() {
        assert_eq!("weak-subharmonic".parse::<ConstraintMode>().unwrap(), ConstraintMode::WeakSubharmonic);
        assert_eq!("none".parse::<ConstraintMode>().unwrap(), ConstraintMode::None);
        assert!("bogus".parse::<ConstraintMode>().is_err());
    }

    #[test]
    fn unconstrained_projection_second_order() {
        let (target, lap) = default_projection_target();
        let study = subharmonic_study(
            MeshKind::Mesh1,
            Degree::P1,
            ConstraintMode::None,
            JumpConstraintMode::Integral,
            &[4, 8, 16],
            Rect::UNIT,
            DEFAULT_SEED,
            target,
            lap,
            &QpConfig::default(),
        )
        .unwrap();
        assert_eq!(study.levels.len(), 3);
        for w in study.levels.windows(2) {
            assert!(w[1].l2_error < w[0].l2_error);
        }
        let last = study.levels.last().unwrap();
        assert!(last.observed_order.unwrap() >= 1.9, "order {:?}", last.observed_order);
    }

    #[test]
    fn affine_target_machine_scale() {
        let study = subharmonic_study(
            MeshKind::Mesh1,
            Degree::P1,
            ConstraintMode::WeakSubharmonic,
            JumpConstraintMode::Integral,
            &[4, 8],
            Rect::UNIT,
            DEFAULT_SEED,
            |x, y| 1.0 + x - 0.5 * y,
            0.0,
            &QpConfig::default(),
        )
        .unwrap();
        for level in &study.levels {
            assert!(level.l2_error < 1e-7, "error {}", level.l2_error);
        }
    }

    #[test]
    fn nonconvergence_small_levels() {
        let study = nonconvergence_study(
            MeshKind::Mesh1,
            &[2, 4],
            1.0,
            Some((Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0))),
            DEFAULT_SEED,
            &QpConfig::default(),
        )
        .unwrap();
        assert_eq!(study.levels.len(), 2);
        // the adversarial distance stays away from zero, the control shrinks
        assert!(study.levels[1].adversarial > 0.25 * study.levels[0].adversarial);
        assert!(study.levels[1].control < study.levels[0].control);
        assert!(!study.activity.is_empty());
        assert!(study.activity.iter().any(|e| e.active));
    }

    #[test]
    fn monopolist_identity_small() {
        let study = monopolist_study(
            MeshKind::Mesh1,
            &[2, 4],
            1.0,
            C_IDENTITY,
            DEFAULT_SEED,
            &QpConfig::default(),
        )
        .unwrap();
        let l0 = &study.levels[0];
        let l1 = &study.levels[1];
        assert_eq!(l0.interpolant_feasible, Some(true));
        assert!(l1.l2_error.unwrap() < l0.l2_error.unwrap());
        // minimality: optimum no worse than the feasible interpolant
        assert!(l1.objective <= l1.objective_at_interpolant.unwrap() + 1e-9);
    }

    #[test]
    fn monopolist_rejects_bad_alpha() {
        assert!(monopolist_study(
            MeshKind::Mesh1,
            &[2],
            1.5,
            C_IDENTITY,
            DEFAULT_SEED,
            &QpConfig::default()
        )
        .is_err());
    }
}
