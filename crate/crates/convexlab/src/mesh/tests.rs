use approx::assert_relative_eq;
use proptest::prelude::*;

use super::io::{mesh_from_text, mesh_to_text};
use super::*;

const SQ2: f64 = std::f64::consts::SQRT_2;

fn unit(kind: MeshKind, n: usize) -> Mesh {
    build_structured_mesh(kind, n, Rect::UNIT).unwrap()
}

fn dir_set(mesh: &Mesh) -> Vec<Vec2> {
    mesh.normal_direction_set(mesh.domain()).unwrap()
}

fn contains_dir(set: &[Vec2], d: Vec2) -> bool {
    let d = canonical_direction(d);
    set.iter().any(|r| (r.x - d.x).abs() < 1e-12 && (r.y - d.y).abs() < 1e-12)
}

#[test]
fn mesh1_n1_counts_and_normal() {
    let m = unit(MeshKind::Mesh1, 1);
    assert_eq!(m.n_vertices(), 4);
    assert_eq!(m.n_triangles(), 2);
    let ie = m.interior_edges();
    assert_eq!(ie.len(), 1);
    // the shared diagonal has normal +-(-1/sqrt2, 1/sqrt2)
    let n = canonical_direction(ie[0].normal);
    assert_relative_eq!(n.x, -1.0 / SQ2, max_relative = 1e-14);
    assert_relative_eq!(n.y, 1.0 / SQ2, max_relative = 1e-14);
}

#[test]
fn mesh2_n1_normal() {
    let m = unit(MeshKind::Mesh2, 1);
    let ie = m.interior_edges();
    assert_eq!(ie.len(), 1);
    // +-(-1/sqrt2, -1/sqrt2), canonicalized to (1/sqrt2, 1/sqrt2)
    let n = canonical_direction(ie[0].normal);
    assert_relative_eq!(n.x, 1.0 / SQ2, max_relative = 1e-14);
    assert_relative_eq!(n.y, 1.0 / SQ2, max_relative = 1e-14);
}

#[test]
fn mesh1_n2_counts() {
    let m = unit(MeshKind::Mesh1, 2);
    assert_eq!(m.n_vertices(), 9);
    assert_eq!(m.n_triangles(), 8);
    // 2x2 block: 2 vertical + 2 horizontal interior edges + 4 diagonals
    assert_eq!(m.interior_edges().len(), 8);
}

#[test]
fn interior_edge_count_formula() {
    // structured kinds share the count 3n^2 - 2n
    for kind in [MeshKind::Mesh1, MeshKind::Mesh2, MeshKind::Mesh3, MeshKind::Mesh4] {
        for n in 1..=6 {
            let m = unit(kind, n);
            assert_eq!(m.interior_edges().len(), 3 * n * n - 2 * n, "{kind} n={n}");
        }
    }
}

#[test]
fn direction_sets_match_catalog() {
    let m1 = dir_set(&unit(MeshKind::Mesh1, 4));
    assert_eq!(m1.len(), 3);
    assert!(contains_dir(&m1, Vec2::new(0.0, 1.0)));
    assert!(contains_dir(&m1, Vec2::new(1.0, 0.0)));
    assert!(contains_dir(&m1, Vec2::new(-1.0 / SQ2, 1.0 / SQ2)));

    let m2 = dir_set(&unit(MeshKind::Mesh2, 4));
    assert_eq!(m2.len(), 3);
    assert!(contains_dir(&m2, Vec2::new(1.0 / SQ2, 1.0 / SQ2)));

    let m3 = dir_set(&unit(MeshKind::Mesh3, 4));
    assert_eq!(m3.len(), 4);
    assert!(contains_dir(&m3, Vec2::new(-1.0 / SQ2, 1.0 / SQ2)));
    assert!(contains_dir(&m3, Vec2::new(1.0 / SQ2, 1.0 / SQ2)));
}

#[test]
fn direction_set_independent_of_n() {
    // all three edge families are present from n = 2 on
    for kind in [MeshKind::Mesh1, MeshKind::Mesh2, MeshKind::Mesh3] {
        let base = dir_set(&unit(kind, 2));
        for n in [3, 4, 5, 8] {
            let s = dir_set(&unit(kind, n));
            assert_eq!(s.len(), base.len(), "{kind} n={n}");
            for d in &base {
                assert!(contains_dir(&s, *d), "{kind} n={n} missing {d:?}");
            }
        }
    }
}

#[test]
fn refine_preserves_directions_and_area() {
    let m = unit(MeshKind::Mesh1, 1);
    let r = m.refine_homothetic();
    assert_eq!(r.n_triangles(), 8);
    assert_relative_eq!(r.h(), 0.5, max_relative = 1e-15);
    // interior-normal set of the refinement equals the full catalog set
    let refined = dir_set(&r);
    assert_eq!(refined.len(), 3);
    for d in [Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(-1.0 / SQ2, 1.0 / SQ2)] {
        assert!(contains_dir(&refined, d));
    }
    // the all-edge direction set is preserved exactly
    let base = m.all_edge_direction_set(m.domain()).unwrap();
    let refined_all = r.all_edge_direction_set(r.domain()).unwrap();
    assert_eq!(refined_all.len(), base.len());
    for d in &base {
        assert!(contains_dir(&refined_all, *d));
    }
    assert_relative_eq!(r.total_area(), m.total_area(), max_relative = 1e-12);

    let rr = r.refine_homothetic();
    assert_eq!(rr.n_triangles(), 16 * m.n_triangles());
}

#[test]
fn mesh4_refinement_keeps_direction_set() {
    let m = build_structured_mesh_seeded(MeshKind::Mesh4, 2, Rect::UNIT, 7).unwrap();
    let r = m.refine_homothetic();
    let base = m.all_edge_direction_set(m.domain()).unwrap();
    let refined = r.all_edge_direction_set(r.domain()).unwrap();
    assert_eq!(refined.len(), base.len());
    for d in &base {
        assert!(contains_dir(&refined, *d), "missing {d:?}");
    }
}

#[test]
fn mesh4_deterministic_and_bounded() {
    let a = build_structured_mesh_seeded(MeshKind::Mesh4, 5, Rect::UNIT, 42).unwrap();
    let b = build_structured_mesh_seeded(MeshKind::Mesh4, 5, Rect::UNIT, 42).unwrap();
    assert_eq!(a.vertices(), b.vertices());
    let c = build_structured_mesh_seeded(MeshKind::Mesh4, 5, Rect::UNIT, 43).unwrap();
    assert_ne!(a.vertices(), c.vertices());

    let reference = unit(MeshKind::Mesh1, 5);
    assert_eq!(a.triangles(), reference.triangles());
    for (p, q) in a.vertices().iter().zip(reference.vertices()) {
        assert!((p.x - q.x).abs() <= 0.25 * a.h() && (p.y - q.y).abs() <= 0.25 * a.h());
    }
    // boundary vertices untouched
    for (k, q) in reference.vertices().iter().enumerate() {
        if reference.is_boundary_vertex(k) {
            assert_eq!(a.vertices()[k], *q);
        }
    }
}

#[test]
fn build_rejects_bad_arguments() {
    assert!(build_structured_mesh(MeshKind::Mesh1, 0, Rect::UNIT).is_err());
    assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn normal_direction_set_region() {
    let m = unit(MeshKind::Mesh1, 4);
    let sub = Rect::new(0.0, 0.0, 0.4, 0.4).unwrap();
    let s = m.normal_direction_set(sub).unwrap();
    assert_eq!(s.len(), 3);
    // a region strictly between the lattice lines and the diagonals
    let empty = Rect::new(0.10, 0.20, 0.11, 0.21).unwrap();
    match m.normal_direction_set(empty) {
        Err(Error::EmptyRegion) => {}
        other => panic!("expected EmptyRegion, got {other:?}"),
    }
}

#[test]
fn text_roundtrip() {
    for kind in [MeshKind::Mesh1, MeshKind::Mesh3, MeshKind::Mesh4] {
        let m = unit(kind, 3);
        let text = mesh_to_text(&m);
        let back = mesh_from_text(&text).unwrap();
        assert_eq!(back.n_vertices(), m.n_vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_relative_eq!(back.h(), m.h(), max_relative = 1e-12);
        for (p, q) in back.vertices().iter().zip(m.vertices()) {
            assert_relative_eq!(p.x, q.x, max_relative = 1e-15, epsilon = 1e-300);
            assert_relative_eq!(p.y, q.y, max_relative = 1e-15, epsilon = 1e-300);
        }
    }
}

#[test]
fn parser_rejects_malformed_input() {
    // truncated token stream
    assert!(mesh_from_text("4 2\n0 0\n1 0").is_err());
    // out-of-range index
    assert!(mesh_from_text("3 1\n0 0\n1 0\n0 1\n0 1 5\n").is_err());
    // clockwise (negative area) triangle
    assert!(mesh_from_text("3 1\n0 0\n1 0\n0 1\n0 2 1\n").is_err());
    // non-finite coordinate
    assert!(mesh_from_text("3 1\nnan 0\n1 0\n0 1\n0 1 2\n").is_err());
    // repeated vertex in a triangle
    assert!(mesh_from_text("3 1\n0 0\n1 0\n0 1\n0 1 1\n").is_err());
    // absurd counts cannot reserve memory: token mismatch is caught first
    assert!(mesh_from_text("99999999999999 1\n").is_err());
    // an edge shared by three triangles
    let three = "4 3\n0 0\n1 0\n0 1\n1 1\n0 1 2\n0 1 3\n1 3 2\n";
    assert!(mesh_from_text(three).is_err());
    // empty input
    assert!(mesh_from_text("").is_err());
}

#[test]
fn interior_edge_geometry_invariants() {
    for kind in [MeshKind::Mesh1, MeshKind::Mesh2, MeshKind::Mesh3, MeshKind::Mesh4] {
        let m = unit(kind, 4);
        for ie in m.interior_edges() {
            assert_relative_eq!(ie.normal.norm(), 1.0, epsilon = 1e-14);
            let a = m.vertices()[ie.vertices[0]];
            let b = m.vertices()[ie.vertices[1]];
            let t = a.to(b);
            assert!(ie.normal.dot(t).abs() / t.norm() < 1e-14);
            let c1 = m.triangle_centroid(ie.tri1);
            let c2 = m.triangle_centroid(ie.tri2);
            assert!(ie.normal.dot(c1.to(c2)) > 0.0);
            assert_relative_eq!(ie.length, t.norm(), max_relative = 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structured_mesh_invariants(nk in 0usize..4, n in 1usize..8, seed in any::<u64>()) {
        let kind = [MeshKind::Mesh1, MeshKind::Mesh2, MeshKind::Mesh3, MeshKind::Mesh4][nk];
        let m = build_structured_mesh_seeded(kind, n, Rect::UNIT, seed).unwrap();
        prop_assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(m.n_triangles(), 2 * n * n);
        // positive areas summing to the domain area
        let total: f64 = (0..m.n_triangles()).map(|t| m.triangle_area(t)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // refinement never enlarges the all-edge direction set
        let refined = m.refine_homothetic();
        let base = m.all_edge_direction_set(m.domain()).unwrap();
        for d in refined.all_edge_direction_set(refined.domain()).unwrap() {
            prop_assert!(contains_dir(&base, d));
        }
    }

    #[test]
    fn roundtrip_arbitrary_level(n in 1usize..6) {
        let m = unit(MeshKind::Mesh3, n);
        let back = mesh_from_text(&mesh_to_text(&m)).unwrap();
        prop_assert_eq!(back.triangles(), m.triangles());
    }
}
