//! Stiffness, mass and load assembly.
//!
//! All integrands are polynomials, so the chosen rules are exact: the
//! three-midpoint rule for P1 products, the degree-4 six-point rule for P2
//! products, and the six-point rule for every load (degree + 2 exactness).

use crate::fem::quadrature::{DUNAVANT6, MIDPOINT3};
use crate::fem::{local_dofs, shape_gradients, shape_values, Degree, TriGeometry};
use crate::geometry::{Point, Vec2};
use crate::mesh::Mesh;
use crate::sparse::{Coo, Csr};

fn product_rule(degree: Degree) -> &'static [([f64; 3], f64)] {
    match degree {
        Degree::P1 => &MIDPOINT3,
        Degree::P2 => &DUNAVANT6,
    }
}

/// `K_ij = int grad phi_i . grad phi_j`.
pub fn assemble_stiffness(mesh: &Mesh, degree: Degree) -> Csr {
    assemble_stiffness_anisotropic(mesh, degree, [[1.0, 0.0], [0.0, 1.0]])
}

/// `K_ij = int grad phi_i' C grad phi_j` for a constant 2x2 matrix `C`.
pub fn assemble_stiffness_anisotropic(mesh: &Mesh, degree: Degree, c: [[f64; 2]; 2]) -> Csr {
    let n = degree.dof_count(mesh);
    let mut coo = Coo::new(n, n);
    let rule = product_rule(degree);
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        let (ids, nloc) = local_dofs(mesh, degree, t);
        for &(l, w) in rule {
            let grads = shape_gradients(degree, &geom, l);
            let scale = w * geom.area;
            for a in 0..nloc {
                let cga = Vec2::new(
                    c[0][0] * grads[a].x + c[0][1] * grads[a].y,
                    c[1][0] * grads[a].x + c[1][1] * grads[a].y,
                );
                for b in 0..nloc {
                    coo.push(ids[a], ids[b], scale * cga.dot(grads[b]));
                }
            }
        }
    }
    coo.to_csr()
}

/// `M_ij = int phi_i phi_j`.
pub fn assemble_mass(mesh: &Mesh, degree: Degree) -> Csr {
    let n = degree.dof_count(mesh);
    let mut coo = Coo::new(n, n);
    let rule = match degree {
        Degree::P1 => &MIDPOINT3[..],
        Degree::P2 => &DUNAVANT6[..],
    };
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        let (ids, nloc) = local_dofs(mesh, degree, t);
        for &(l, w) in rule {
            let shapes = shape_values(degree, l);
            let scale = w * geom.area;
            for a in 0..nloc {
                for b in 0..nloc {
                    coo.push(ids[a], ids[b], scale * shapes[a] * shapes[b]);
                }
            }
        }
    }
    coo.to_csr()
}

/// `F_i = int f phi_i`.
pub fn assemble_load<F>(mesh: &Mesh, degree: Degree, f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let mut out = vec![0.0; degree.dof_count(mesh)];
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        let (ids, nloc) = local_dofs(mesh, degree, t);
        for &(l, w) in DUNAVANT6.iter() {
            let p = geom.point_at(l);
            let shapes = shape_values(degree, l);
            let scale = w * geom.area * f(p.x, p.y);
            for a in 0..nloc {
                out[ids[a]] += scale * shapes[a];
            }
        }
    }
    out
}

/// `G_i = int w(x) . grad phi_i` for a pointwise vector field `w`.
pub fn assemble_gradient_load<W>(mesh: &Mesh, degree: Degree, w: W) -> Vec<f64>
where
    W: Fn(Point) -> Vec2,
{
    let mut out = vec![0.0; degree.dof_count(mesh)];
    for t in 0..mesh.n_triangles() {
        let geom = TriGeometry::of(mesh, t);
        let (ids, nloc) = local_dofs(mesh, degree, t);
        for &(l, wq) in DUNAVANT6.iter() {
            let p = geom.point_at(l);
            let grads = shape_gradients(degree, &geom, l);
            let field = w(p);
            let scale = wq * geom.area;
            for a in 0..nloc {
                out[ids[a]] += scale * field.dot(grads[a]);
            }
        }
    }
    out
}
