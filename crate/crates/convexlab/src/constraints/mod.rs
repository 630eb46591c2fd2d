//! Constraint families over the P1/P2 spaces.
//!
//! Every set is a sparse system `A u >= 0` with one label per row:
//!
//! - conformal P1 convexity: one gradient-jump row per interior edge
//!   (nonnegative jumps characterize convexity of a P1 function);
//! - P2 jump rows, either the edge integral of the affine jump profile or
//!   both endpoint values (two selectable modes);
//! - weak subharmonicity: the trace of the weak Hessian per admissible test
//!   function, i.e. the negated stiffness action;
//! - the monopolist cone: nonnegative values, nonnegative per-triangle
//!   gradient components and the conformal convexity rows.
//!
//! The module also hosts the direction-pair search certifying the product
//! property of a normal set, the adversarial quadratic construction defeating
//! conformal projection, and the second-order difference quotient.

use std::io::Write as _;
use std::path::Path;

use crate::fem::{
    assemble_stiffness, local_dofs, shape_gradients, Degree, FeFunction, TestFunction,
    TriGeometry,
};
use crate::geometry::{Point, Rect, Vec2};
use crate::mesh::{InteriorEdge, Mesh};
use crate::sparse::{Coo, Csr};
use crate::{Error, Result};

/// Default feasibility tolerance on unit-scaled dofs.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Which basis functions act as weak test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    Vertices,
    Midpoints,
}

/// How the P2 jump nonnegativity binds along an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpConstraintMode {
    /// One row per edge: the integral of the affine jump profile.
    Integral,
    /// Two rows per edge: both endpoint values of the profile.
    Pointwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowLabel {
    /// P1 gradient jump across an edge (edge id into [`Mesh::edges`]).
    Jump { edge: usize },
    /// Integral of the P2 jump profile along an edge.
    JumpIntegral { edge: usize },
    /// P2 jump profile value at an endpoint (0 = lower-index vertex).
    JumpEndpoint { edge: usize, end: u8 },
    /// Weak Laplacian against the basis function of an interior vertex.
    SubharmonicVertex { vertex: usize },
    /// Weak Laplacian against the bubble of an interior edge midpoint.
    SubharmonicMidpoint { edge: usize },
    /// Nodal value.
    NonNegativeValue { vertex: usize },
    /// x-component of the per-triangle gradient.
    GradientX { tri: usize },
    /// y-component of the per-triangle gradient.
    GradientY { tri: usize },
    /// A row supplied directly as a matrix (no mesh provenance).
    Raw { row: usize },
}

impl std::fmt::Display for RowLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowLabel::Jump { edge } => write!(f, "jump edge={edge}"),
            RowLabel::JumpIntegral { edge } => write!(f, "jump-integral edge={edge}"),
            RowLabel::JumpEndpoint { edge, end } => write!(f, "jump-endpoint edge={edge} end={end}"),
            RowLabel::SubharmonicVertex { vertex } => write!(f, "subharmonic vertex={vertex}"),
            RowLabel::SubharmonicMidpoint { edge } => write!(f, "subharmonic midpoint-edge={edge}"),
            RowLabel::NonNegativeValue { vertex } => write!(f, "value vertex={vertex}"),
            RowLabel::GradientX { tri } => write!(f, "grad-x tri={tri}"),
            RowLabel::GradientY { tri } => write!(f, "grad-y tri={tri}"),
            RowLabel::Raw { row } => write!(f, "row {row}"),
        }
    }
}

/// Sparse inequality rows `A u >= 0` with per-row provenance.
#[derive(Clone, Debug)]
pub struct LinearConstraintSet {
    pub matrix: Csr,
    pub labels: Vec<RowLabel>,
    /// Set on families the consistency analysis rejects (P2 vertex tests);
    /// they are still constructible for the lab.
    pub flagged_inconsistent: bool,
}

impl LinearConstraintSet {
    /// Wraps an explicit inequality matrix `A u >= 0`. Rows without any
    /// nonzero entry are rejected.
    pub fn from_matrix(matrix: Csr) -> Result<Self> {
        for i in 0..matrix.nrows() {
            if matrix.row(i).1.iter().all(|v| *v == 0.0) {
                return Err(Error::Solver(format!("constraint row {i} is identically zero")));
            }
        }
        let labels = (0..matrix.nrows()).map(|row| RowLabel::Raw { row }).collect();
        Ok(LinearConstraintSet { matrix, labels, flagged_inconsistent: false })
    }

    fn from_rows(rows: Vec<(RowLabel, Vec<(usize, f64)>)>, ncols: usize) -> Result<Self> {
        let mut coo = Coo::new(rows.len(), ncols);
        let mut labels = Vec::with_capacity(rows.len());
        for (i, (label, entries)) in rows.iter().enumerate() {
            let max = entries.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
            if max == 0.0 {
                return Err(Error::Solver(format!("constraint row `{label}` is identically zero")));
            }
            // drop round-off couplings so stencils stay local
            for &(j, v) in entries {
                if v.abs() > 1e-14 * max {
                    coo.push(i, j, v);
                }
            }
            labels.push(*label);
        }
        Ok(LinearConstraintSet { matrix: coo.to_csr(), labels, flagged_inconsistent: false })
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `A u` per row.
    pub fn residuals(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        self.matrix.matvec(u, &mut out);
        out
    }

    pub fn min_residual(&self, u: &[f64]) -> f64 {
        self.residuals(u).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_satisfied(&self, u: &[f64], tol: f64) -> bool {
        self.min_residual(u) >= -tol
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n_rows()).map(|i| self.matrix.row(i).0.len()).max().unwrap_or(0)
    }

    /// Stacks two sets over the same dof space.
    pub fn concat(mut self, other: LinearConstraintSet) -> LinearConstraintSet {
        assert_eq!(self.n_cols(), other.n_cols());
        let mut coo = Coo::new(self.n_rows() + other.n_rows(), self.n_cols());
        for (offset, set) in [(0usize, &self), (self.n_rows(), &other)] {
            for i in 0..set.n_rows() {
                let (cols, vals) = set.matrix.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    coo.push(offset + i, j, v);
                }
            }
        }
        self.labels.extend_from_slice(&other.labels);
        LinearConstraintSet {
            matrix: coo.to_csr(),
            labels: self.labels,
            flagged_inconsistent: self.flagged_inconsistent || other.flagged_inconsistent,
        }
    }

    /// Writes the matrix in coordinate text plus a `<stem>.labels.txt`
    /// sidecar with one row label per line.
    pub fn export<P: AsRef<Path>>(&self, dir: P, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let mut mat = std::fs::File::create(dir.join(format!("{stem}.txt")))?;
        self.matrix.write_coordinate_text(&mut mat)?;
        let mut lab = std::fs::File::create(dir.join(format!("{stem}.labels.txt")))?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(lab, "{i} {l}")?;
        }
        Ok(())
    }
}

/// Row of the linear functional `u -> (q2 - q1) . n` for the P1 jump across
/// `e`.
fn p1_jump_row(mesh: &Mesh, e: &InteriorEdge) -> Vec<(usize, f64)> {
    let mut entries = Vec::with_capacity(6);
    for (t, sign) in [(e.tri2, 1.0), (e.tri1, -1.0)] {
        let geom = TriGeometry::of(mesh, t);
        let tri = mesh.triangles()[t];
        for k in 0..3 {
            entries.push((tri[k], sign * geom.grad_lambda[k].dot(e.normal)));
        }
    }
    entries
}

/// Rows of the linear functionals `u -> jump(s=0)` and `u -> jump(s=L)` for
/// the P2 jump profile across `e`.
fn p2_jump_endpoint_rows(mesh: &Mesh, e: &InteriorEdge) -> [Vec<(usize, f64)>; 2] {
    let mut rows = [Vec::new(), Vec::new()];
    for (end, row) in rows.iter_mut().enumerate() {
        let p = mesh.vertices()[e.vertices[end]];
        for (t, sign) in [(e.tri2, 1.0), (e.tri1, -1.0)] {
            let geom = TriGeometry::of(mesh, t);
            let l = geom.barycentric(p);
            let grads = shape_gradients(Degree::P2, &geom, l);
            let (ids, nloc) = local_dofs(mesh, Degree::P2, t);
            for k in 0..nloc {
                row.push((ids[k], sign * grads[k].dot(e.normal)));
            }
        }
    }
    rows
}

/// Conformal P1 convexity: one `(q2 - q1) . n >= 0` row per interior edge.
pub fn conformal_convexity_constraints(mesh: &Mesh) -> Result<LinearConstraintSet> {
    let rows = mesh
        .interior_edges()
        .iter()
        .map(|e| (RowLabel::Jump { edge: e.edge }, p1_jump_row(mesh, e)))
        .collect();
    LinearConstraintSet::from_rows(rows, Degree::P1.dof_count(mesh))
}

/// P2 jump nonnegativity in the selected mode.
pub fn p2_jump_constraints(mesh: &Mesh, mode: JumpConstraintMode) -> Result<LinearConstraintSet> {
    let mut rows = Vec::new();
    for e in mesh.interior_edges() {
        let [start, end] = p2_jump_endpoint_rows(mesh, e);
        match mode {
            JumpConstraintMode::Integral => {
                // exact integral of the affine profile: L/2 (j(0) + j(L))
                let mut row = start;
                row.extend_from_slice(&end);
                for entry in &mut row {
                    entry.1 *= 0.5 * e.length;
                }
                rows.push((RowLabel::JumpIntegral { edge: e.edge }, row));
            }
            JumpConstraintMode::Pointwise => {
                rows.push((RowLabel::JumpEndpoint { edge: e.edge, end: 0 }, start));
                rows.push((RowLabel::JumpEndpoint { edge: e.edge, end: 1 }, end));
            }
        }
    }
    LinearConstraintSet::from_rows(rows, Degree::P2.dof_count(mesh))
}

/// Weak subharmonicity `<Delta u_h, phi> >= 0`: the negated stiffness action
/// on the admissible test rows.
///
/// P1 admits vertex tests; P2 admits midpoint tests and, for the consistency
/// lab only, vertex tests (that family is flagged: its sign-changing test
/// functions make it inconsistent). P1 with midpoint tests is rejected.
pub fn weak_subharmonicity_constraints(
    mesh: &Mesh,
    degree: Degree,
    test_kind: TestKind,
) -> Result<LinearConstraintSet> {
    if degree == Degree::P1 && test_kind == TestKind::Midpoints {
        return Err(Error::InvalidCombination(
            "P1 has no midpoint test functions".into(),
        ));
    }
    let stiffness = assemble_stiffness(mesh, degree);
    let mut rows = Vec::new();
    match test_kind {
        TestKind::Vertices => {
            for v in 0..mesh.n_vertices() {
                if mesh.is_boundary_vertex(v) {
                    continue;
                }
                let (cols, vals) = stiffness.row(v);
                let row: Vec<(usize, f64)> =
                    cols.iter().zip(vals).map(|(&j, &x)| (j, -x)).collect();
                rows.push((RowLabel::SubharmonicVertex { vertex: v }, row));
            }
        }
        TestKind::Midpoints => {
            let nv = mesh.n_vertices();
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.is_boundary() {
                    continue;
                }
                let (cols, vals) = stiffness.row(nv + e);
                let row: Vec<(usize, f64)> =
                    cols.iter().zip(vals).map(|(&j, &x)| (j, -x)).collect();
                rows.push((RowLabel::SubharmonicMidpoint { edge: e }, row));
            }
        }
    }
    let mut set = LinearConstraintSet::from_rows(rows, degree.dof_count(mesh))?;
    set.flagged_inconsistent = degree == Degree::P2 && test_kind == TestKind::Vertices;
    Ok(set)
}

/// Per admissible test function, the `(trace, det)` of the weak Hessian.
/// The convexity verdict requires both to be nonnegative up to a tolerance.
pub fn weak_convexity_residuals(
    u: &FeFunction<'_>,
    test_kind: TestKind,
) -> Result<Vec<(TestFunction, f64, f64)>> {
    let mesh = u.mesh();
    let mut out = Vec::new();
    match test_kind {
        TestKind::Vertices => {
            for v in 0..mesh.n_vertices() {
                if mesh.is_boundary_vertex(v) {
                    continue;
                }
                let h = u.weak_hessian(TestFunction::Vertex(v))?;
                out.push((h.test, h.trace(), h.det()));
            }
        }
        TestKind::Midpoints => {
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.is_boundary() {
                    continue;
                }
                let h = u.weak_hessian(TestFunction::EdgeMidpoint(e))?;
                out.push((h.test, h.trace(), h.det()));
            }
        }
    }
    Ok(out)
}

/// The monopolist cone: nonnegative nodal values, nonnegative per-triangle
/// gradient components and the conformal convexity rows (P1).
pub fn monopolist_constraints(mesh: &Mesh) -> Result<LinearConstraintSet> {
    let mut rows: Vec<(RowLabel, Vec<(usize, f64)>)> = Vec::new();
    for v in 0..mesh.n_vertices() {
        rows.push((RowLabel::NonNegativeValue { vertex: v }, vec![(v, 1.0)]));
    }
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        let tri = mesh.triangles()[t];
        let row_x: Vec<(usize, f64)> = (0..3).map(|k| (tri[k], geom.grad_lambda[k].x)).collect();
        rows.push((RowLabel::GradientX { tri: t }, row_x));
    }
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        let tri = mesh.triangles()[t];
        let row_y: Vec<(usize, f64)> = (0..3).map(|k| (tri[k], geom.grad_lambda[k].y)).collect();
        rows.push((RowLabel::GradientY { tri: t }, row_y));
    }
    let values_and_gradients = LinearConstraintSet::from_rows(rows, Degree::P1.dof_count(mesh))?;
    Ok(values_and_gradients.concat(conformal_convexity_constraints(mesh)?))
}

/// Searches two independent unit vectors `a, b` with `(n.a)(n.b) >= 0` for
/// every direction in `normals`.
///
/// The lines `{x : n.x = 0}` partition the plane into cones; any pair picked
/// strictly inside a single cone works. The widest angular gap is used and
/// the pair sits at its thirds, so the result is deterministic and strictly
/// interior. `Ok(None)` would require every gap to collapse, which cannot
/// happen for finitely many distinct lines.
pub fn pm_find_vectors(normals: &[Vec2]) -> Result<Option<(Vec2, Vec2)>> {
    if normals.is_empty() {
        return Err(Error::InvalidArgument("empty normal set".into()));
    }
    let pi = std::f64::consts::PI;
    let mut angles: Vec<f64> = normals
        .iter()
        .map(|n| {
            let d = n.perp();
            d.y.atan2(d.x).rem_euclid(pi)
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    // an angle within tolerance of 0 and one within tolerance of pi are the
    // same line
    if angles.len() > 1 && (angles[0] + pi - angles[angles.len() - 1]).abs() < 1e-12 {
        angles.pop();
    }

    let mut best_start = 0.0;
    let mut best_gap = 0.0;
    for (k, &theta) in angles.iter().enumerate() {
        let next = if k + 1 < angles.len() { angles[k + 1] } else { angles[0] + pi };
        let gap = next - theta;
        if gap > best_gap {
            best_gap = gap;
            best_start = theta;
        }
    }
    if best_gap <= 1e-12 {
        return Ok(None); // unreachable for finitely many distinct lines
    }
    let ang_a = best_start + best_gap / 3.0;
    let ang_b = best_start + 2.0 * best_gap / 3.0;
    let a = Vec2::new(ang_a.cos(), ang_a.sin());
    let b = Vec2::new(ang_b.cos(), ang_b.sin());
    Ok(Some((a, b)))
}

/// Verifies the product property: returns the verdict and the worst value of
/// `(n.a)(n.b)` over the set.
pub fn pm_verify(normals: &[Vec2], a: Vec2, b: Vec2) -> (bool, f64) {
    let worst = normals.iter().map(|n| n.dot(a) * n.dot(b)).fold(f64::INFINITY, f64::min);
    (worst >= -1e-12, worst)
}

/// An SPD matrix `C` whose quadratic profile `x' C^-1 x / 2` has a negative
/// mixed second difference in the directions `(a, b)`: the target that no
/// conformal-convex P1 sequence can approach once the mesh certifies the
/// product property for `(a, b)`.
#[derive(Clone, Copy, Debug)]
pub struct AdversarialQuadratic {
    pub c: [[f64; 2]; 2],
    pub c_inv: [[f64; 2]; 2],
    pub a: Vec2,
    pub b: Vec2,
    pub eta: f64,
}

impl AdversarialQuadratic {
    /// `x' C^-1 x / 2`.
    pub fn quadratic_value(&self, p: Point) -> f64 {
        let ci = self.c_inv;
        0.5 * (ci[0][0] * p.x * p.x + 2.0 * ci[0][1] * p.x * p.y + ci[1][1] * p.y * p.y)
    }

    /// The closed-form target anchored to vanish at `anchor` (the domain's
    /// lower-left corner in the experiments).
    pub fn u_exact(&self, anchor: Point) -> impl Fn(f64, f64) -> f64 + '_ {
        let offset = self.quadratic_value(anchor);
        move |x, y| self.quadratic_value(Point::new(x, y)) - offset
    }

    /// `a' C^-1 b`, the constant value of every admissible difference
    /// quotient of the target.
    pub fn mixed_quotient(&self) -> f64 {
        let ci = self.c_inv;
        let cb = Vec2::new(
            ci[0][0] * self.b.x + ci[0][1] * self.b.y,
            ci[1][0] * self.b.x + ci[1][1] * self.b.y,
        );
        self.a.dot(cb)
    }

    /// Eigenvalues of `C` (symmetric 2x2).
    pub fn c_eigenvalues(&self) -> (f64, f64) {
        let tr = self.c[0][0] + self.c[1][1];
        let det = self.c[0][0] * self.c[1][1] - self.c[0][1] * self.c[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 - disc, tr / 2.0 + disc)
    }
}

/// Builds the adversarial quadratic for independent unit directions and a
/// margin: `C` is SPD and `a' C^-1 b <= -eta`.
///
/// `C^-1` is assembled from its eigenpairs: the first eigenvector is the
/// normalized mean of `a` and `b` (one valid choice of a unit vector strictly
/// between them), the eigenvalues are `eta` and the value closing the margin
/// inequality, with a tiny surplus so the inequality survives round-off.
pub fn lemma2_matrix(a: Vec2, b: Vec2, eta: f64) -> Result<AdversarialQuadratic> {
    if eta <= 0.0 {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {eta}")));
    }
    if a.cross(b).abs() < 1e-10 {
        return Err(Error::DegenerateDirections);
    }
    let a = a.normalized();
    let b = b.normalized();
    let e1 = a.add(b).normalized();
    let e2 = e1.perp();
    let (a1, a2) = (a.dot(e1), a.dot(e2));
    let (b1, b2) = (b.dot(e1), b.dot(e2));
    debug_assert!(a1 * b1 > 0.0 && a2 * b2 < 0.0);

    let lambda1 = eta;
    let lambda2 = (lambda1 * a1 * b1 + eta * (1.0 + 1e-9)) / (-a2 * b2);
    let outer =
        |v: Vec2, s: f64| [[s * v.x * v.x, s * v.x * v.y], [s * v.x * v.y, s * v.y * v.y]];
    let add2 = |m: [[f64; 2]; 2], n: [[f64; 2]; 2]| {
        [[m[0][0] + n[0][0], m[0][1] + n[0][1]], [m[1][0] + n[1][0], m[1][1] + n[1][1]]]
    };
    let c_inv = add2(outer(e1, lambda1), outer(e2, lambda2));
    let c = add2(outer(e1, 1.0 / lambda1), outer(e2, 1.0 / lambda2));
    Ok(AdversarialQuadratic { c, c_inv, a, b, eta })
}

/// Configuration of the second-order difference quotient
/// `(u(x + a0 a + b0 b) - u(x + a0 a) - u(x + b0 b) + u(x)) / (a0 b0)`.
#[derive(Clone, Copy, Debug)]
pub struct DifferenceQuotient {
    pub base: Point,
    pub alpha0: f64,
    pub beta0: f64,
    pub a: Vec2,
    pub b: Vec2,
}

impl DifferenceQuotient {
    pub fn sample_points(&self) -> [Point; 4] {
        let pa = self.base.translate(self.a.scale(self.alpha0));
        let pb = self.base.translate(self.b.scale(self.beta0));
        let pab = pa.translate(self.b.scale(self.beta0));
        [self.base, pa, pb, pab]
    }
}

/// Evaluates the difference quotient, rejecting configurations whose sample
/// points leave the domain closure.
pub fn difference_quotient<F>(u: F, q: &DifferenceQuotient, domain: Rect) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    if q.alpha0 <= 0.0 || q.beta0 <= 0.0 {
        return Err(Error::InvalidArgument("quotient steps must be positive".into()));
    }
    let pts = q.sample_points();
    let tol = 1e-12 * (domain.width() + domain.height());
    for p in pts {
        if !domain.contains(p, tol) {
            return Err(Error::OutOfDomain);
        }
    }
    let [p00, p10, p01, p11] = pts;
    Ok((u(p11.x, p11.y) - u(p10.x, p10.y) - u(p01.x, p01.y) + u(p00.x, p00.y))
        / (q.alpha0 * q.beta0))
}

/// The bilinear pairing `sum_e (q2-q1).n (n.a)(n.b) int_e phi ds` of a P1
/// function against a nonnegative test function on the same mesh.
///
/// For conformal-convex `u` on a mesh certifying the product property for
/// `(a, b)`, every factor is nonnegative; for the adversarial target the
/// continuous counterpart is `<= -eta int phi`. The sign opposition is the
/// obstruction to convergence.
pub fn directional_pairing(u: &FeFunction<'_>, a: Vec2, b: Vec2, phi: &FeFunction<'_>) -> f64 {
    let mesh = u.mesh();
    let mut acc = 0.0;
    for e in mesh.interior_edges() {
        let jump = u.gradient_jump(e).start();
        let na = e.normal.dot(a);
        let nb = e.normal.dot(b);
        let pa = mesh.vertices()[e.vertices[0]];
        let pb = mesh.vertices()[e.vertices[1]];
        let phi_int: f64 = crate::fem::quadrature::SIMPSON
            .iter()
            .map(|&(s, w)| {
                let p = Point::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
                w * phi.value(e.tri1, p)
            })
            .sum::<f64>()
            * e.length;
        acc += jump * na * nb * phi_int;
    }
    acc
}
