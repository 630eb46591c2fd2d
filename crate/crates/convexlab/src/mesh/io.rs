//! Plain-text mesh exchange format.
//!
//! Layout: a header line `nv nt`, then one `x y` line per vertex, then one
//! `i j k` line per triangle (0-based, counterclockwise). Tokens are
//! whitespace-separated; the parser only looks at tokens, not line breaks.
//!
//! The parser is meant for untrusted input: it validates token counts before
//! allocating, and every structural invariant of [`Mesh`] afterwards. It
//! returns errors, never panics.

use std::path::Path;

use crate::geometry::{Point, Rect};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Serializes a mesh in the plain-text exchange format.
pub fn mesh_to_text(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", mesh.n_vertices(), mesh.n_triangles()));
    for v in mesh.vertices() {
        out.push_str(&format!("{:.16e} {:.16e}\n", v.x, v.y));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
    }
    out
}

/// Parses the plain-text exchange format.
///
/// The domain is reconstructed as the bounding box of the vertices and the
/// nominal space step as `sqrt(2 * mean triangle area)`, which recovers the
/// construction value exactly on the structured catalog meshes.
pub fn mesh_from_text(text: &str) -> Result<Mesh> {
    let mut tokens = text.split_whitespace();
    let nv = parse_count(tokens.next(), "vertex count")?;
    let nt = parse_count(tokens.next(), "triangle count")?;

    let expected = nv
        .checked_mul(2)
        .and_then(|a| nt.checked_mul(3).map(|b| (a, b)))
        .and_then(|(a, b)| a.checked_add(b))
        .ok_or_else(|| Error::MeshFormat("token count overflow".into()))?;
    // bound allocations by the actual input size before reserving anything
    let available = tokens.clone().count();
    if available != expected {
        return Err(Error::MeshFormat(format!(
            "expected {expected} tokens after the header, found {available}"
        )));
    }

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let x = parse_coord(tokens.next(), k, "x")?;
        let y = parse_coord(tokens.next(), k, "y")?;
        vertices.push(Point::new(x, y));
    }
    let mut triangles = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut tri = [0usize; 3];
        for slot in &mut tri {
            let tok = tokens
                .next()
                .ok_or_else(|| Error::MeshFormat(format!("triangle {t}: missing index")))?;
            *slot = tok
                .parse::<usize>()
                .map_err(|e| Error::MeshFormat(format!("triangle {t}: bad index `{tok}`: {e}")))?;
        }
        triangles.push(tri);
    }

    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &vertices {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::MeshFormat("non-finite vertex coordinate".into()));
        }
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let domain = Rect::new(x0, y0, x1, y1)
        .map_err(|_| Error::MeshFormat("degenerate vertex bounding box".into()))?;

    let mut area = 0.0;
    for tri in &triangles {
        for &v in tri {
            if v >= vertices.len() {
                return Err(Error::MeshFormat(format!("vertex index {v} out of range")));
            }
        }
        area += crate::geometry::signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    }
    if !(area.is_finite() && area > 0.0) {
        return Err(Error::MeshFormat("nonpositive total area".into()));
    }
    let h = (2.0 * area / triangles.len() as f64).sqrt();

    Mesh::from_parts(vertices, triangles, h, domain)
}

pub fn write_mesh_file<P: AsRef<Path>>(mesh: &Mesh, path: P) -> Result<()> {
    std::fs::write(path, mesh_to_text(mesh))?;
    Ok(())
}

pub fn read_mesh_file<P: AsRef<Path>>(path: P) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    mesh_from_text(&text)
}

fn parse_count(tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::MeshFormat(format!("missing {what}")))?;
    tok.parse::<usize>()
        .map_err(|e| Error::MeshFormat(format!("bad {what} `{tok}`: {e}")))
}

fn parse_coord(tok: Option<&str>, vertex: usize, axis: &str) -> Result<f64> {
    let tok =
        tok.ok_or_else(|| Error::MeshFormat(format!("vertex {vertex}: missing {axis}")))?;
    tok.parse::<f64>()
        .map_err(|e| Error::MeshFormat(format!("vertex {vertex}: bad {axis} `{tok}`: {e}")))
}
