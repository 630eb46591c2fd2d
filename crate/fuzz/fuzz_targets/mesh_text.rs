//! Fuzz the plain-text mesh parser.
//!
//! The parser handles untrusted input: it must return errors, never panic,
//! and accepted meshes must satisfy every structural invariant and survive a
//! serialize/parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

use convexlab::mesh::io::{mesh_from_text, mesh_to_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(mesh) = mesh_from_text(text) else { return };

    // accepted meshes are structurally valid
    for t in 0..mesh.n_triangles() {
        assert!(mesh.triangle_area(t) > 0.0);
    }
    for e in mesh.interior_edges() {
        assert!((e.normal.x * e.normal.x + e.normal.y * e.normal.y - 1.0).abs() < 1e-12);
    }

    // and round-trip through the writer
    let again = mesh_from_text(&mesh_to_text(&mesh)).expect("round trip stays parseable");
    assert_eq!(again.n_vertices(), mesh.n_vertices());
    assert_eq!(again.triangles(), mesh.triangles());
});
