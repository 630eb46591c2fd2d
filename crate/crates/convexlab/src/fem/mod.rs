//! P1/P2 Lagrange elements on triangles: interpolation, per-triangle
//! gradients, gradient jumps across interior edges and weak discrete
//! Hessians.
//!
//! Degrees of freedom are ordered vertices first, then edge midpoints in the
//! order of [`Mesh::edges`] (sorted by endpoint pair), so P2 layouts are
//! deterministic.

mod assembly;
pub mod quadrature;

pub use assembly::{
    assemble_gradient_load, assemble_load, assemble_mass, assemble_stiffness,
    assemble_stiffness_anisotropic,
};

use crate::geometry::{signed_area, Point, Vec2};
use crate::mesh::{InteriorEdge, Mesh};
use crate::{Error, Result};

const BARYCENTRIC_TOL: f64 = 1e-10;

/// Polynomial degree of the Lagrange space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn from_int(d: u32) -> Result<Degree> {
        match d {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            other => Err(Error::InvalidArgument(format!("unsupported degree {other}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }

    pub fn dof_count(self, mesh: &Mesh) -> usize {
        match self {
            Degree::P1 => mesh.n_vertices(),
            Degree::P2 => mesh.n_vertices() + mesh.edges().len(),
        }
    }

    pub fn local_dof_count(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }
}

/// A basis-function id usable as a weak test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestFunction {
    Vertex(usize),
    /// Index into [`Mesh::edges`].
    EdgeMidpoint(usize),
}

impl TestFunction {
    pub fn dof(self, mesh: &Mesh) -> usize {
        match self {
            TestFunction::Vertex(v) => v,
            TestFunction::EdgeMidpoint(e) => mesh.n_vertices() + e,
        }
    }
}

/// Weak discrete Hessian tested against one basis function:
/// `H_ij = -int du/dx_i dphi/dx_j`.
#[derive(Clone, Copy, Debug)]
pub struct WeakHessian {
    pub matrix: [[f64; 2]; 2],
    pub test: TestFunction,
}

impl WeakHessian {
    pub fn trace(&self) -> f64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    pub fn det(&self) -> f64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }
}

/// Normal jump of the gradient across an interior edge, `(q2 - q1) . n`.
///
/// Constant for P1; affine along the edge for P2, parametrized from the
/// lower-index endpoint (`s = 0`) to the higher-index one (`s = length`).
#[derive(Clone, Copy, Debug)]
pub struct JumpProfile {
    /// Index into [`Mesh::edges`].
    pub edge: usize,
    pub length: f64,
    pub profile: Profile,
}

#[derive(Clone, Copy, Debug)]
pub enum Profile {
    Constant(f64),
    Affine { start: f64, end: f64 },
}

impl JumpProfile {
    pub fn start(&self) -> f64 {
        match self.profile {
            Profile::Constant(c) => c,
            Profile::Affine { start, .. } => start,
        }
    }

    pub fn end(&self) -> f64 {
        match self.profile {
            Profile::Constant(c) => c,
            Profile::Affine { end, .. } => end,
        }
    }

    pub fn at_midpoint(&self) -> f64 {
        0.5 * (self.start() + self.end())
    }

    /// Exact edge integral of the (at most affine) profile.
    pub fn integral(&self) -> f64 {
        self.length * self.at_midpoint()
    }

    /// Profile variation from `s = 0` to `s = length`; zero for P1.
    pub fn end_difference(&self) -> f64 {
        self.end() - self.start()
    }
}

/// Per-triangle geometry reused by interpolation, assembly and jumps.
#[derive(Clone, Copy, Debug)]
pub struct TriGeometry {
    pub pts: [Point; 3],
    pub area: f64,
    pub grad_lambda: [Vec2; 3],
}

impl TriGeometry {
    pub fn new(pts: [Point; 3]) -> TriGeometry {
        let area = signed_area(pts[0], pts[1], pts[2]);
        let inv2a = 1.0 / (2.0 * area);
        let grad_lambda = [
            pts[1].to(pts[2]).perp().scale(inv2a),
            pts[2].to(pts[0]).perp().scale(inv2a),
            pts[0].to(pts[1]).perp().scale(inv2a),
        ];
        TriGeometry { pts, area, grad_lambda }
    }

    pub fn of(mesh: &Mesh, t: usize) -> TriGeometry {
        TriGeometry::new(mesh.triangle_points(t))
    }

    pub fn barycentric(&self, p: Point) -> [f64; 3] {
        let l1 = signed_area(p, self.pts[1], self.pts[2]) / self.area;
        let l2 = signed_area(self.pts[0], p, self.pts[2]) / self.area;
        [l1, l2, 1.0 - l1 - l2]
    }

    pub fn point_at(&self, l: [f64; 3]) -> Point {
        Point::new(
            l[0] * self.pts[0].x + l[1] * self.pts[1].x + l[2] * self.pts[2].x,
            l[0] * self.pts[0].y + l[1] * self.pts[1].y + l[2] * self.pts[2].y,
        )
    }
}

/// Local shape-function values at barycentric `l`, vertices then midpoints
/// (midpoint k sits between local vertices k and k+1).
pub fn shape_values(degree: Degree, l: [f64; 3]) -> [f64; 6] {
    match degree {
        Degree::P1 => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        Degree::P2 => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
    }
}

/// Local shape-function gradients at barycentric `l`.
pub fn shape_gradients(degree: Degree, geom: &TriGeometry, l: [f64; 3]) -> [Vec2; 6] {
    let g = geom.grad_lambda;
    match degree {
        Degree::P1 => [g[0], g[1], g[2], Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)],
        Degree::P2 => [
            g[0].scale(4.0 * l[0] - 1.0),
            g[1].scale(4.0 * l[1] - 1.0),
            g[2].scale(4.0 * l[2] - 1.0),
            g[0].scale(4.0 * l[1]).add(g[1].scale(4.0 * l[0])),
            g[1].scale(4.0 * l[2]).add(g[2].scale(4.0 * l[1])),
            g[2].scale(4.0 * l[0]).add(g[0].scale(4.0 * l[2])),
        ],
    }
}

/// Global dof ids of triangle `t`, in local order.
pub fn local_dofs(mesh: &Mesh, degree: Degree, t: usize) -> ([usize; 6], usize) {
    let tri = mesh.triangles()[t];
    let mut ids = [0usize; 6];
    ids[..3].copy_from_slice(&tri);
    match degree {
        Degree::P1 => (ids, 3),
        Degree::P2 => {
            let nv = mesh.n_vertices();
            for k in 0..3 {
                let e = mesh
                    .edge_index(tri[k], tri[(k + 1) % 3])
                    .expect("triangle edge present in edge table");
                ids[3 + k] = nv + e;
            }
            (ids, 6)
        }
    }
}

/// A finite-element function: a coefficient vector over the nodal (and, for
/// P2, midpoint) degrees of freedom of a mesh.
#[derive(Clone, Debug)]
pub struct FeFunction<'a> {
    mesh: &'a Mesh,
    degree: Degree,
    dofs: Vec<f64>,
}

impl<'a> FeFunction<'a> {
    pub fn new(mesh: &'a Mesh, degree: Degree, dofs: Vec<f64>) -> Result<FeFunction<'a>> {
        let expected = degree.dof_count(mesh);
        if dofs.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "dof vector has length {}, expected {expected}",
                dofs.len()
            )));
        }
        Ok(FeFunction { mesh, degree, dofs })
    }

    /// Nodal interpolation: `f` at the vertices and, for P2, at the edge
    /// midpoints.
    pub fn interpolate<F>(mesh: &'a Mesh, degree: Degree, f: F) -> FeFunction<'a>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut dofs = Vec::with_capacity(degree.dof_count(mesh));
        for v in mesh.vertices() {
            dofs.push(f(v.x, v.y));
        }
        if degree == Degree::P2 {
            for e in 0..mesh.edges().len() {
                let m = mesh.edge_midpoint(e);
                dofs.push(f(m.x, m.y));
            }
        }
        FeFunction { mesh, degree, dofs }
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn dofs(&self) -> &[f64] {
        &self.dofs
    }

    /// Value of the local polynomial of triangle `t` at `p`.
    pub fn value(&self, t: usize, p: Point) -> f64 {
        let geom = TriGeometry::of(self.mesh, t);
        let l = geom.barycentric(p);
        let shapes = shape_values(self.degree, l);
        let (ids, n) = local_dofs(self.mesh, self.degree, t);
        (0..n).map(|k| self.dofs[ids[k]] * shapes[k]).sum()
    }

    fn gradient_at_bary(&self, t: usize, geom: &TriGeometry, l: [f64; 3]) -> Vec2 {
        let grads = shape_gradients(self.degree, geom, l);
        let (ids, n) = local_dofs(self.mesh, self.degree, t);
        let mut g = Vec2::new(0.0, 0.0);
        for k in 0..n {
            g = g.add(grads[k].scale(self.dofs[ids[k]]));
        }
        g
    }

    /// Exact gradient of the local polynomial of triangle `t`.
    ///
    /// For P1 the gradient is constant and `p` is ignored; for P2 the point
    /// must lie inside the triangle up to a barycentric tolerance.
    pub fn triangle_gradient(&self, t: usize, p: Point) -> Result<Vec2> {
        let geom = TriGeometry::of(self.mesh, t);
        let l = geom.barycentric(p);
        if self.degree == Degree::P2
            && l.iter().any(|&li| li < -BARYCENTRIC_TOL || li > 1.0 + BARYCENTRIC_TOL)
        {
            return Err(Error::OutOfTriangle);
        }
        Ok(self.gradient_at_bary(t, &geom, l))
    }

    /// Normal jump of the gradient across an interior edge of this mesh.
    pub fn gradient_jump(&self, e: &InteriorEdge) -> JumpProfile {
        let n = e.normal;
        let geom1 = TriGeometry::of(self.mesh, e.tri1);
        let geom2 = TriGeometry::of(self.mesh, e.tri2);
        let profile = match self.degree {
            Degree::P1 => {
                let q1 = self.gradient_at_bary(e.tri1, &geom1, [1.0 / 3.0; 3]);
                let q2 = self.gradient_at_bary(e.tri2, &geom2, [1.0 / 3.0; 3]);
                Profile::Constant(q2.add(q1.scale(-1.0)).dot(n))
            }
            Degree::P2 => {
                let jump_at = |p: Point| -> f64 {
                    let q1 = self.gradient_at_bary(e.tri1, &geom1, geom1.barycentric(p));
                    let q2 = self.gradient_at_bary(e.tri2, &geom2, geom2.barycentric(p));
                    q2.add(q1.scale(-1.0)).dot(n)
                };
                let pa = self.mesh.vertices()[e.vertices[0]];
                let pb = self.mesh.vertices()[e.vertices[1]];
                Profile::Affine { start: jump_at(pa), end: jump_at(pb) }
            }
        };
        JumpProfile { edge: e.edge, length: e.length, profile }
    }

    /// Support triangles of a test function, or an error when its support
    /// touches the boundary (also rejects P1/midpoint combinations).
    fn test_support(&self, test: TestFunction) -> Result<Vec<usize>> {
        match test {
            TestFunction::Vertex(v) => {
                if self.mesh.is_boundary_vertex(v) {
                    return Err(Error::BoundaryTestFunction);
                }
                Ok(self.mesh.vertex_triangles(v).to_vec())
            }
            TestFunction::EdgeMidpoint(e) => {
                if self.degree != Degree::P2 {
                    return Err(Error::InvalidCombination(
                        "midpoint test functions require degree 2".into(),
                    ));
                }
                let edge = self.mesh.edges()[e];
                match edge.tri_b {
                    Some(tb) => Ok(vec![edge.tri_a, tb]),
                    None => Err(Error::BoundaryTestFunction),
                }
            }
        }
    }

    /// Weak discrete Hessian `H_ij = -int du/dx_i dphi/dx_j` against the
    /// basis function `test` of the same space. The quadrature is exact for
    /// the polynomial integrand.
    pub fn weak_hessian(&self, test: TestFunction) -> Result<WeakHessian> {
        let support = self.test_support(test)?;
        let test_dof = test.dof(self.mesh);
        let rule: &[([f64; 3], f64)] = match self.degree {
            Degree::P1 => &quadrature::MIDPOINT3,
            Degree::P2 => &quadrature::DUNAVANT6,
        };
        let mut m = [[0.0f64; 2]; 2];
        for &t in &support {
            let geom = TriGeometry::of(self.mesh, t);
            let (ids, nloc) = local_dofs(self.mesh, self.degree, t);
            let local_test = (0..nloc).position(|k| ids[k] == test_dof);
            let Some(local_test) = local_test else { continue };
            for &(l, w) in rule {
                let grads = shape_gradients(self.degree, &geom, l);
                let mut gu = Vec2::new(0.0, 0.0);
                for k in 0..nloc {
                    gu = gu.add(grads[k].scale(self.dofs[ids[k]]));
                }
                let gphi = grads[local_test];
                let scale = w * geom.area;
                m[0][0] -= scale * gu.x * gphi.x;
                m[0][1] -= scale * gu.x * gphi.y;
                m[1][0] -= scale * gu.y * gphi.x;
                m[1][1] -= scale * gu.y * gphi.y;
            }
        }
        Ok(WeakHessian { matrix: m, test })
    }
}

/// Dofs lying on the domain boundary (vertices, plus boundary-edge midpoints
/// for P2).
pub fn boundary_dofs(mesh: &Mesh, degree: Degree) -> Vec<usize> {
    let mut out: Vec<usize> =
        (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary_vertex(v)).collect();
    if degree == Degree::P2 {
        let nv = mesh.n_vertices();
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.is_boundary() {
                out.push(nv + e);
            }
        }
    }
    out
}

/// Position of a dof: vertex coordinates or edge midpoint.
pub fn dof_position(mesh: &Mesh, dof: usize) -> Point {
    if dof < mesh.n_vertices() {
        mesh.vertices()[dof]
    } else {
        mesh.edge_midpoint(dof - mesh.n_vertices())
    }
}

/// `L^2` distance between a finite-element function and a pointwise function,
/// by the degree-4 rule per triangle (exact when the error is a quartic).
pub fn l2_distance<F>(u: &FeFunction<'_>, f: F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let mesh = u.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        for &(l, w) in quadrature::DUNAVANT6.iter() {
            let p = geom.point_at(l);
            let d = u.value(t, p) - f(p.x, p.y);
            acc += w * geom.area * d * d;
        }
    }
    acc.sqrt()
}

/// Edge integral of a finite-element function along edge `e` (Simpson; exact
/// for the quadratic traces of P2).
pub fn edge_integral(u: &FeFunction<'_>, e: usize) -> f64 {
    let mesh = u.mesh();
    let edge = mesh.edges()[e];
    let [a, b] = edge.vertices;
    let pa = mesh.vertices()[a];
    let pb = mesh.vertices()[b];
    let t = edge.tri_a;
    let len = pa.to(pb).norm();
    quadrature::SIMPSON
        .iter()
        .map(|&(s, w)| {
            let p = Point::new(pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y));
            w * u.value(t, p)
        })
        .sum::<f64>()
        * len
}
