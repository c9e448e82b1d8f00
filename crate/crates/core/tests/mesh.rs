use std::collections::BTreeSet;
use std::path::PathBuf;

use hpvem::error::{Error, ParseIssue};
use hpvem::Result;
use hpvem::mesh::{
    build_graded_mesh, compute_layers, deserialize_mesh, diagnose, grading_ratios, read_mesh, serialize_mesh,
    subtriangulate, write_mesh, MeshFamily, PolygonalMesh,
};
use hpvem::{geometry, Mesh};
use proptest::prelude::*;

const SIGMAS: [f64; 3] = [0.5, std::f64::consts::SQRT_2 - 1.0, 0.171_572_875_253_809_9];

fn build(fam: MeshFamily, n: usize, sigma: f64) -> Result<Mesh> {
    build_graded_mesh(fam, n, sigma)
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn layer_sizes(m: &Mesh) -> Vec<usize> {
    m.cells_by_layer().values().map(Vec::len).collect()
}

#[test]
fn decagon_family_has_one_cell_per_layer() {
    let m = build(MeshFamily::LayerDecagons, 3, 0.5).unwrap();
    assert_eq!(m.n_cells(), 4);
    let sizes: Vec<usize> = m.cells.iter().map(|c| c.n_vertices()).collect();
    assert_eq!(sizes.iter().filter(|&&s| s == 10).count(), 3);
    assert_eq!(sizes.iter().filter(|&&s| s == 6).count(), 1);
    let hex = sizes.iter().position(|&s| s == 6).unwrap();
    assert_eq!(m.cells[hex].layer, 0);
    // ring between σ^k and σ^(k+1) is layer 3 - k
    for (c, cell) in m.cells.iter().enumerate() {
        if c == hex {
            continue;
        }
        let outer = m.cell_points(c).iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max);
        let k = (-outer.log2()).round() as usize;
        assert_eq!(cell.layer, 3 - k);
    }
}

#[test]
fn level_zero_squares() {
    for s in SIGMAS {
        let m = build(MeshFamily::GradedSquares, 0, s).unwrap();
        assert_eq!(m.n_cells(), 3);
        assert!(m.cells.iter().all(|c| c.layer == 0 && c.n_vertices() == 4));
        assert!(m.cells.iter().all(|c| (c.diameter - 2f64.sqrt()).abs() < 1e-15));
    }
}

#[test]
fn graded_squares_level_two_enumeration() {
    // Per quadrant: corner square [0,1/4]² (L0), ring [1/4,1/2] (3 cells, L1), ring [1/2,1]
    // (3 cells, L2). The two outer-ring cells adjacent to the axes each receive one
    // hanging node from the inner ring: 3 × (1 + 3 + 3) = 21 cells, 3 × 2 = 6 pentagons.
    let m = build(MeshFamily::GradedSquares, 2, 0.5).unwrap();
    assert_eq!(m.n_cells(), 21);
    let pentagons: Vec<usize> = (0..m.n_cells()).filter(|&c| m.cells[c].n_vertices() == 5).collect();
    assert_eq!(pentagons.len(), 6);
    assert!(m.cells.iter().all(|c| matches!(c.n_vertices(), 4 | 5)));
    for &c in &pentagons {
        assert_eq!(m.cells[c].layer, 2);
        assert!((m.cell_area(c) - 0.25).abs() < 1e-15);
    }
    assert_eq!(layer_sizes(&m), vec![3, 9, 9]);
    for n in 1..8 {
        let m = build(MeshFamily::GradedSquares, n, 0.5).unwrap();
        assert_eq!(m.n_cells(), 9 * n + 3);
        assert_eq!(m.cells.iter().filter(|c| c.n_vertices() == 5).count(), 6 * (n - 1));
    }
}

#[test]
fn whole_domain_is_a_single_hexagon() {
    let m = build(MeshFamily::LayerDecagons, 0, 0.5).unwrap();
    assert_eq!(m.n_cells(), 1);
    assert_eq!(compute_layers(&m).unwrap(), vec![0]);
}

/// Layers by repeated set closure on vertex coordinates, independent of mesh topology.
fn brute_force_layers(m: &Mesh) -> Vec<usize> {
    let key = |p: hpvem::Point| (p.x.to_bits(), p.y.to_bits());
    let verts: Vec<BTreeSet<(u64, u64)>> =
        (0..m.n_cells()).map(|c| m.cell_points(c).into_iter().map(key).collect()).collect();
    let origin = key(hpvem::Point::new(0.0, 0.0));
    let mut layer = vec![usize::MAX; m.n_cells()];
    for c in 0..m.n_cells() {
        if verts[c].contains(&origin) {
            layer[c] = 0;
        }
    }
    let mut j = 0;
    while layer.contains(&usize::MAX) {
        let prev: Vec<usize> = (0..m.n_cells()).filter(|&c| layer[c] == j).collect();
        for c in 0..m.n_cells() {
            if layer[c] == usize::MAX && prev.iter().any(|&d| !verts[c].is_disjoint(&verts[d])) {
                layer[c] = j + 1;
            }
        }
        j += 1;
    }
    layer
}

#[test]
fn layers_match_refinement_generation() {
    for fam in MeshFamily::ALL {
        for n in [0, 1, 2, 5] {
            let m = build(fam, n, 0.5).unwrap();
            let got = compute_layers(&m).unwrap();
            assert_eq!(got, brute_force_layers(&m), "{fam} n={n}");
            let stored: Vec<usize> = m.cells.iter().map(|c| c.layer).collect();
            assert_eq!(got, stored, "{fam} n={n}");
            assert_eq!(*got.iter().max().unwrap(), n);
        }
    }
}

#[test]
fn layers_are_order_independent_and_idempotent() {
    let m = build(MeshFamily::GradedSquares, 4, 0.5).unwrap();
    let base = compute_layers(&m).unwrap();
    let loops: Vec<(Vec<usize>, usize)> =
        m.cells.iter().rev().map(|c| (c.vertex_ids.clone(), 99)).collect();
    let perm = PolygonalMesh::from_parts(m.vertices.clone(), loops, m.family, m.sigma, m.n).unwrap();
    let mut got = compute_layers(&perm).unwrap();
    got.reverse();
    assert_eq!(got, base);
    assert_eq!(compute_layers(&m).unwrap(), base);
}

#[test]
fn invariants_over_families_and_levels() {
    for fam in MeshFamily::ALL {
        for s in SIGMAS {
            for n in 0..=10 {
                let m = build(fam, n, s).unwrap();
                assert!(m.is_conforming());
                assert!((m.total_area() - 3.0).abs() <= 1e-12 * 3.0, "{fam} σ={s} n={n}");
                let interior = m.edges.iter().filter(|e| e.cells.len() == 2).count();
                let boundary = m.edges.iter().filter(|e| e.cells.len() == 1).count();
                assert_eq!(interior + boundary, m.edges.len());
                if fam != MeshFamily::TensorQuadsFem {
                    assert!(layer_sizes(&m).iter().all(|&k| k <= 12), "{fam} σ={s} n={n}");
                }
                for c in &m.cells {
                    let pts: Vec<_> = c.vertex_ids.iter().map(|&v| m.vertices[v]).collect();
                    assert!(geometry::signed_area(&pts) > 0.0);
                    assert!(geometry::is_simple(&pts));
                }
            }
        }
    }
}

#[test]
fn grading_ratio_bounds() {
    // h_E / dist(0,E) ∈ [c1, c2]·(1-σ)/σ per family
    let bounds = [
        (MeshFamily::GradedSquares, 1.0, 1.42),
        (MeshFamily::LayerDecagons, 3.4, 5.66),
        (MeshFamily::DecagonsCut, 2.69, 4.48),
        (MeshFamily::TensorQuadsFem, 1.0, 1.42),
    ];
    for (fam, c1, c2) in bounds {
        for s in SIGMAS {
            let m = build(fam, 8, s).unwrap();
            for (c, r) in grading_ratios(&m) {
                assert!(r >= c1 - 1e-12 && r <= c2, "{fam} σ={s} cell {c}: {r}");
            }
        }
    }
}

#[test]
fn star_shapedness_diagnostics() {
    let unit = build(MeshFamily::GradedSquares, 0, 0.5).unwrap();
    let d = diagnose(&unit, 0.1, 0.1);
    assert!((d.min_star_radius_ratio - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(d.conforming && d.star_shaped_ok && d.edge_ratio_ok);
    assert_eq!(d.max_edges_per_cell, 4);

    let dec = build(MeshFamily::LayerDecagons, 3, 0.5).unwrap();
    let d = diagnose(&dec, 0.01, 0.01);
    assert!(!d.star_shaped_ok);
    assert_eq!(d.not_star_shaped.len(), 3);
    assert!(d.not_star_shaped.iter().all(|&c| dec.cells[c].n_vertices() == 10));

    for s in SIGMAS {
        let cut = build(MeshFamily::DecagonsCut, 6, s).unwrap();
        let d = diagnose(&cut, 0.05, 0.05);
        assert!(d.not_star_shaped.is_empty());
        assert!(d.star_shaped_ok && d.conforming);
        assert!(d.min_star_radius_ratio > 0.0 && d.min_star_radius_ratio <= 1.0);
        assert!(d.grading_residual.is_finite());
    }
}

#[test]
fn fans_cover_cells() {
    for fam in [MeshFamily::GradedSquares, MeshFamily::DecagonsCut, MeshFamily::TensorQuadsFem] {
        let m = build(fam, 4, 0.5).unwrap();
        for (c, cell) in m.cells.iter().enumerate() {
            let tris = subtriangulate(cell, &m.vertices).unwrap();
            let a: f64 = tris.iter().map(|t| 0.5 * geometry::orient(t[0], t[1], t[2])).sum();
            let area = m.cell_area(c);
            assert!((a - area).abs() <= 1e-12 * area, "{fam} cell {c}");
        }
    }
}

#[test]
fn corner_cells_fan_from_origin() {
    let m = build(MeshFamily::LayerDecagons, 3, 0.5).unwrap();
    let hex = m.cells.iter().position(|c| c.layer == 0).unwrap();
    assert_eq!(m.cells[hex].star_center, hpvem::Point::new(0.0, 0.0));
    let tris = subtriangulate(&m.cells[hex], &m.vertices).unwrap();
    assert_eq!(tris.len(), 4);
    let decagon = m.cells.iter().position(|c| c.layer == 1).unwrap();
    assert!(matches!(subtriangulate(&m.cells[decagon], &m.vertices), Err(Error::NotStarShaped)));
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for fam in MeshFamily::ALL {
        let m = build(fam, 5, SIGMAS[2]).unwrap();
        let path = dir.path().join(format!("{fam}.json"));
        write_mesh(&m, &path).unwrap();
        let back: Mesh = read_mesh(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(serialize_mesh(&back), serialize_mesh(&m));
    }
}

#[test]
fn hand_written_fixture_matches_builder() {
    let m: Mesh = read_mesh(&fixture("lshape_three_squares.json")).unwrap();
    assert_eq!(m, build(MeshFamily::GradedSquares, 0, 0.5).unwrap());
}

#[test]
fn triple_edge_is_rejected() {
    let err = read_mesh::<f64>(&fixture("triple_edge.json")).unwrap_err();
    match err {
        Error::Parse { issue: ParseIssue::NonConforming(_), .. } => {}
        e => panic!("unexpected error {e:?}"),
    }
}

#[test]
fn parse_errors_carry_context() {
    let text = "{\n  \"version\": 1,\n  \"family\": \"b\",\n";
    match deserialize_mesh::<f64>(text).unwrap_err() {
        Error::Parse { line: Some(l), issue: ParseIssue::Syntax(_), .. } => assert!(l >= 3),
        e => panic!("unexpected error {e:?}"),
    }
    let mut m = serialize_mesh(&build_graded_mesh::<f64>(MeshFamily::GradedSquares, 0, 0.5).unwrap());
    m = m.replacen("\"vertex_ids\": [\n        0,", "\"vertex_ids\": [\n        40,", 1);
    match deserialize_mesh::<f64>(&m).unwrap_err() {
        Error::Parse { field, issue: ParseIssue::Invalid(_), .. } => assert_eq!(field, "cells[0].vertex_ids"),
        e => panic!("unexpected error {e:?}"),
    }
}

#[test]
fn single_precision_mesh() {
    let m = build_graded_mesh::<f32>(MeshFamily::DecagonsCut, 6, 0.5).unwrap();
    assert!((m.total_area() - 3.0).abs() < 1e-5);
    assert_eq!(compute_layers(&m).unwrap().iter().max(), Some(&6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn generated_meshes_are_conforming(fam in 0usize..4, n in 0usize..12, s in 0.06f64..0.94) {
        let m = build(MeshFamily::ALL[fam], n, s).unwrap();
        prop_assert!(m.is_conforming());
        prop_assert!((m.total_area() - 3.0).abs() <= 1e-12 * 3.0);
        let layers = compute_layers(&m).unwrap();
        prop_assert_eq!(*layers.iter().max().unwrap(), n);
    }
}
