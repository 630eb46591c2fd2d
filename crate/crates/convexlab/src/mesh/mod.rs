//! Structured triangulations of an axis-aligned rectangle and their edge
//! geometry.
//!
//! Four layouts are provided: all diagonals along `(1,1)` (`Mesh1`), all
//! along `(1,-1)` (`Mesh2`), alternating diagonals (`Mesh3`, "union jack"),
//! and `Mesh1` connectivity with deterministically perturbed interior
//! vertices (`Mesh4`). Vertices are numbered row-major (y-major), triangles
//! are counterclockwise.
//!
//! Interior edges carry a canonical unit normal: the edge tangent runs from
//! the lower-index endpoint to the higher-index one and the normal is the
//! tangent rotated by +90 degrees; `tri1` is the adjacent triangle on the
//! opposite side of the normal, `tri2` the one the normal points into.

pub mod io;

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{signed_area, Point, Rect, Vec2};
use crate::{Error, Result};

/// Default seed of the `Mesh4` interior-vertex perturbation.
pub const DEFAULT_MESH4_SEED: u64 = 0x636f6e7665786c61;

/// Tolerance below which two canonical directions are considered equal.
pub const DIRECTION_DEDUP_TOL: f64 = 1e-10;

/// The mesh catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    /// All diagonals along `(1, 1)`.
    Mesh1,
    /// All diagonals along `(1, -1)`.
    Mesh2,
    /// Alternating diagonals per cell.
    Mesh3,
    /// `Mesh1` connectivity, interior vertices displaced by at most `0.25 h`
    /// (deterministic seed).
    Mesh4,
}

impl std::str::FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mesh1" | "1" => Ok(MeshKind::Mesh1),
            "mesh2" | "2" => Ok(MeshKind::Mesh2),
            "mesh3" | "3" => Ok(MeshKind::Mesh3),
            "mesh4" | "4" => Ok(MeshKind::Mesh4),
            other => Err(Error::InvalidArgument(format!("unknown mesh kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for MeshKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MeshKind::Mesh1 => "mesh1",
            MeshKind::Mesh2 => "mesh2",
            MeshKind::Mesh3 => "mesh3",
            MeshKind::Mesh4 => "mesh4",
        };
        f.write_str(s)
    }
}

/// An edge of the mesh (interior or boundary), endpoints ordered
/// `vertices[0] < vertices[1]`.
#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub tri_a: usize,
    pub tri_b: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tri_b.is_none()
    }
}

/// An interior edge with its canonical orientation.
#[derive(Clone, Copy, Debug)]
pub struct InteriorEdge {
    /// Index into [`Mesh::edges`].
    pub edge: usize,
    /// Endpoint vertex indices, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangle on the `-normal` side.
    pub tri1: usize,
    /// Adjacent triangle on the `+normal` side.
    pub tri2: usize,
    /// Unit normal pointing from `tri1` into `tri2`.
    pub normal: Vec2,
    pub length: f64,
}

/// An immutable triangulation of an axis-aligned rectangle.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    h: f64,
    domain: Rect,
    edges: Vec<Edge>,
    interior_edges: Vec<InteriorEdge>,
    boundary_vertex: Vec<bool>,
    vertex_tris: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw vertex/triangle data, validating every
    /// structural invariant (positive triangle areas, tiling of the domain,
    /// at most two triangles per edge). All construction paths, including
    /// the text importer, go through here.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        h: f64,
        domain: Rect,
    ) -> Result<Mesh> {
        if vertices.len() < 3 || triangles.is_empty() {
            return Err(Error::MeshFormat("need at least 3 vertices and 1 triangle".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::MeshFormat(format!("nonpositive space step {h}")));
        }
        for (k, p) in vertices.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::MeshFormat(format!("vertex {k} has non-finite coordinates")));
            }
        }
        let mut area_sum = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::MeshFormat(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::MeshFormat(format!("triangle {t} has repeated vertices")));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::MeshFormat(format!(
                    "triangle {t} has nonpositive signed area {a}"
                )));
            }
            area_sum += a;
        }
        let dom_area = domain.area();
        if ((area_sum - dom_area) / dom_area).abs() > 1e-12 {
            return Err(Error::MeshFormat(format!(
                "triangles do not tile the domain: area sum {area_sum}, domain {dom_area}"
            )));
        }

        let mut edge_tris: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let list = edge_tris.entry(key).or_default();
                if list.len() == 2 {
                    return Err(Error::MeshFormat(format!(
                        "edge ({}, {}) shared by more than two triangles",
                        key.0, key.1
                    )));
                }
                list.push(t);
            }
        }

        let mut edges = Vec::with_capacity(edge_tris.len());
        let mut boundary_vertex = vec![false; vertices.len()];
        for (&(a, b), tris) in &edge_tris {
            let edge = Edge {
                vertices: [a, b],
                tri_a: tris[0],
                tri_b: tris.get(1).copied(),
            };
            if edge.is_boundary() {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
            edges.push(edge);
        }

        let centroid = |tri: &[usize; 3]| -> Point {
            Point::new(
                (vertices[tri[0]].x + vertices[tri[1]].x + vertices[tri[2]].x) / 3.0,
                (vertices[tri[0]].y + vertices[tri[1]].y + vertices[tri[2]].y) / 3.0,
            )
        };

        let mut interior_edges = Vec::new();
        for (e, edge) in edges.iter().enumerate() {
            let Some(tb) = edge.tri_b else { continue };
            let ta = edge.tri_a;
            let [lo, hi] = edge.vertices;
            let tangent = vertices[lo].to(vertices[hi]);
            let length = tangent.norm();
            if length == 0.0 {
                return Err(Error::MeshFormat(format!("edge ({lo}, {hi}) has zero length")));
            }
            let normal = tangent.perp().normalized();
            let side_a = vertices[lo].to(centroid(&triangles[ta])).dot(normal);
            let side_b = vertices[lo].to(centroid(&triangles[tb])).dot(normal);
            if side_a * side_b >= 0.0 {
                return Err(Error::MeshFormat(format!(
                    "triangles adjacent to edge ({lo}, {hi}) lie on the same side"
                )));
            }
            let (tri1, tri2) = if side_a < 0.0 { (ta, tb) } else { (tb, ta) };
            interior_edges.push(InteriorEdge {
                edge: e,
                vertices: [lo, hi],
                tri1,
                tri2,
                normal,
                length,
            });
        }

        let mut vertex_tris = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }

        Ok(Mesh { vertices, triangles, h, domain, edges, interior_edges, boundary_vertex, vertex_tris })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Nominal space step.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Every edge of the mesh, sorted by `(min vertex, max vertex)`. The
    /// position in this list is the edge id used for P2 midpoint degrees of
    /// freedom.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.edges.binary_search_by(|e| e.vertices.cmp(&key)).ok()
    }

    /// Every edge shared by exactly two triangles, once each.
    pub fn interior_edges(&self) -> &[InteriorEdge] {
        &self.interior_edges
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Triangles incident to vertex `v`.
    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn triangle_centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        Point::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        self.vertices[a].midpoint(self.vertices[b])
    }

    /// Index of the vertex closest to `p`.
    pub fn nearest_vertex(&self, p: Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, v) in self.vertices.iter().enumerate() {
            let d = v.to(p).norm();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Splits every triangle into four similar subtriangles through the edge
    /// midpoints. The set of edge directions is preserved and `h` is halved.
    pub fn refine_homothetic(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut mid_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid_of.entry(key).or_insert_with(|| {
                let m = vertices[a].midpoint(vertices[b]);
                vertices.push(m);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for tri in &self.triangles {
            let [a, b, c] = *tri;
            let mab = midpoint(a, b, &mut vertices);
            let mbc = midpoint(b, c, &mut vertices);
            let mca = midpoint(c, a, &mut vertices);
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
        }
        Mesh::from_parts(vertices, triangles, self.h / 2.0, self.domain)
            .expect("homothetic refinement preserves mesh validity")
    }

    /// Deduplicated set of canonical normal directions of the interior edges
    /// intersecting `region`. The canonical representative of `{n, -n}` has
    /// positive y component (positive x when the y component vanishes).
    pub fn normal_direction_set(&self, region: Rect) -> Result<Vec<Vec2>> {
        let pairs = self
            .interior_edges
            .iter()
            .map(|ie| (ie.vertices, ie.normal))
            .collect::<Vec<_>>();
        self.direction_set_of(&pairs, region)
    }

    /// Like [`Mesh::normal_direction_set`] but over every edge, boundary
    /// included. Homothetic refinement never enlarges this set (boundary
    /// edge directions reappear as interior ones after refining).
    pub fn all_edge_direction_set(&self, region: Rect) -> Result<Vec<Vec2>> {
        let pairs = self
            .edges
            .iter()
            .map(|e| {
                let [lo, hi] = e.vertices;
                let n = self.vertices[lo].to(self.vertices[hi]).perp().normalized();
                (e.vertices, n)
            })
            .collect::<Vec<_>>();
        self.direction_set_of(&pairs, region)
    }

    fn direction_set_of(&self, edges: &[([usize; 2], Vec2)], region: Rect) -> Result<Vec<Vec2>> {
        let mut reps: Vec<Vec2> = Vec::new();
        for &([lo, hi], normal) in edges {
            let a = self.vertices[lo];
            let b = self.vertices[hi];
            if !segment_intersects_rect(a, b, region) {
                continue;
            }
            let n = canonical_direction(normal);
            if !reps.iter().any(|r| {
                (r.x - n.x).abs() <= DIRECTION_DEDUP_TOL && (r.y - n.y).abs() <= DIRECTION_DEDUP_TOL
            }) {
                reps.push(n);
            }
        }
        if reps.is_empty() {
            return Err(Error::EmptyRegion);
        }
        reps.sort_by(|p, q| p.x.partial_cmp(&q.x).unwrap().then(p.y.partial_cmp(&q.y).unwrap()));
        Ok(reps)
    }
}

/// Canonical representative of a direction up to sign: positive y, or
/// positive x if the y component is (numerically) zero.
pub fn canonical_direction(n: Vec2) -> Vec2 {
    if n.y > DIRECTION_DEDUP_TOL {
        Vec2::new(n.x + 0.0, n.y) // +0.0 folds away negative zero
    } else if n.y < -DIRECTION_DEDUP_TOL {
        Vec2::new(-n.x + 0.0, -n.y)
    } else {
        Vec2::new(n.x.abs(), 0.0)
    }
}

fn segment_intersects_rect(a: Point, b: Point, r: Rect) -> bool {
    let tol = 1e-14 * (r.width() + r.height());
    if r.contains(a, tol) || r.contains(b, tol) {
        return true;
    }
    let corners = [
        Point::new(r.x0, r.y0),
        Point::new(r.x1, r.y0),
        Point::new(r.x1, r.y1),
        Point::new(r.x0, r.y1),
    ];
    for k in 0..4 {
        if segments_intersect(a, b, corners[k], corners[(k + 1) % 4]) {
            return true;
        }
    }
    false
}

fn segments_intersect(p1: Point, p2: Point, p3: Point, p4: Point) -> bool {
    let d1 = p3.to(p4).cross(p3.to(p1));
    let d2 = p3.to(p4).cross(p3.to(p2));
    let d3 = p1.to(p2).cross(p1.to(p3));
    let d4 = p1.to(p2).cross(p1.to(p4));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, a: Point, b: Point, p: Point| -> bool {
        d == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
    };
    on(d1, p3, p4, p1) || on(d2, p3, p4, p2) || on(d3, p1, p2, p3) || on(d4, p1, p2, p4)
}

/// Builds one of the catalog meshes over `domain` with `n` subdivisions per
/// side, using the default `Mesh4` seed.
pub fn build_structured_mesh(kind: MeshKind, n: usize, domain: Rect) -> Result<Mesh> {
    build_structured_mesh_seeded(kind, n, domain, DEFAULT_MESH4_SEED)
}

/// Same as [`build_structured_mesh`] with an explicit perturbation seed
/// (only `Mesh4` uses it).
pub fn build_structured_mesh_seeded(
    kind: MeshKind,
    n: usize,
    domain: Rect,
    seed: u64,
) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("subdivision count must be at least 1".into()));
    }
    let hx = domain.width() / n as f64;
    let hy = domain.height() / n as f64;
    let h = hx.max(hy);

    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(domain.x0 + i as f64 * hx, domain.y0 + j as f64 * hy));
        }
    }

    if kind == MeshKind::Mesh4 {
        // displacement within a quarter cell keeps every triangle valid for
        // any draw; capped by the smaller cell extent on rectangles
        let amp = 0.25 * hx.min(hy);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 1..n {
            for i in 1..n {
                let dx = rng.gen_range(-amp..=amp);
                let dy = rng.gen_range(-amp..=amp);
                let v = &mut vertices[idx(i, j)];
                v.x += dx;
                v.y += dy;
            }
        }
    }

    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let ll = idx(i, j);
            let lr = idx(i + 1, j);
            let ul = idx(i, j + 1);
            let ur = idx(i + 1, j + 1);
            let diag_11 = match kind {
                MeshKind::Mesh1 | MeshKind::Mesh4 => true,
                MeshKind::Mesh2 => false,
                MeshKind::Mesh3 => (i + j) % 2 == 0,
            };
            if diag_11 {
                triangles.push([ll, lr, ur]);
                triangles.push([ll, ur, ul]);
            } else {
                triangles.push([ll, lr, ul]);
                triangles.push([lr, ur, ul]);
            }
        }
    }

    Mesh::from_parts(vertices, triangles, h, domain)
}

#[cfg(test)]
mod tests;
