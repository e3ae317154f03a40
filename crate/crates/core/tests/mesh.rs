use plsmooth::fixtures::{perturbed_kuhn, perturbed_octahedron, two_tets};
use plsmooth::geom::{Affine, Mat3, Vec3};
use plsmooth::mesh::{
    edge_fans, face_pairs, kuhn_cube, load_map, octahedral_star, vertex_stars, MeshDocument, PLMap, SimplicialComplex,
    Verdict,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kuhn() -> SimplicialComplex {
    let (p, c) = kuhn_cube(1.0);
    SimplicialComplex::new(p, c, vec![]).unwrap()
}

#[test]
fn kuhn_cube_counts_and_volume() {
    let k = kuhn();
    assert_eq!(k.cells().len(), 6);
    assert_eq!(k.points().len(), 8);
    // Euler characteristic of a ball: V − E + F − C = 1.
    let chi = k.points().len() as i64 - k.edges().len() as i64 + k.faces().len() as i64 - k.cells().len() as i64;
    assert_eq!(chi, 1);
    assert!((k.volume() - 1.0).abs() < 1e-15);
    let interior = (0..k.faces().len()).filter(|&f| k.face_cells(f).len() == 2).count();
    assert_eq!(interior, 6);
}

#[test]
fn octahedral_star_has_one_interior_vertex() {
    let (p, c) = octahedral_star(1.0);
    let k = SimplicialComplex::new(p, c, vec![]).unwrap();
    let interior: Vec<usize> = k.vertices().iter().copied().filter(|&v| !k.is_boundary_vertex(v)).collect();
    assert_eq!(interior.len(), 1);
    assert_eq!(k.point(interior[0]), Vec3::zeros());
    assert!((k.volume() - 4.0 / 3.0).abs() < 1e-14);
}

#[test]
fn fixtures_are_valid_homeomorphisms() {
    for f in [two_tets(2.0).unwrap(), perturbed_kuhn(1.0, 0.1, 7).unwrap(), perturbed_octahedron(1.0, 0.1, 7).unwrap()]
    {
        let r = f.validate();
        assert!(r.passed(), "{:?}", r.verdict);
        assert_eq!(r.orientation, 1);
        assert!(r.continuity_residual <= r.continuity_tolerance);
    }
}

#[test]
fn sign_mixed_map_is_rejected() {
    let mut pieces = vec![Affine::identity(); 6];
    pieces[2] = Affine::linear(Mat3::from_diagonal(&Vec3::new(1.0, -1.0, 1.0)));
    let r = PLMap::new(kuhn(), pieces).unwrap().validate();
    assert_eq!(r.verdict, Verdict::SignMixed { cells: vec![2] });
    assert!(!r.passed());
}

#[test]
fn discontinuous_pieces_are_rejected() {
    let mut pieces = vec![Affine::identity(); 6];
    pieces[0] = Affine::linear(Mat3::from_diagonal(&Vec3::new(1.1, 1.0, 1.0)));
    let r = PLMap::new(kuhn(), pieces).unwrap().validate();
    assert!(matches!(r.verdict, Verdict::Discontinuous { .. }), "{:?}", r.verdict);
}

#[test]
fn overlapping_images_are_rejected() {
    // Two cells sharing only the origin; the second is sheared over the first.
    let p = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::x(), -Vec3::y(), -Vec3::z()];
    let k = SimplicialComplex::new(p.clone(), vec![[0, 1, 2, 3], [0, 4, 5, 6]], vec![]).unwrap();
    let shear = Mat3::new(1.0, -2.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    let images: Vec<Vec3> = p.iter().enumerate().map(|(i, x)| if i >= 4 { shear * x } else { *x }).collect();
    let f = PLMap::from_vertex_images(k, &images).unwrap();
    let r = f.validate();
    assert_eq!(r.orientation, 1);
    let Verdict::Overlap(w) = r.verdict else { panic!("expected an overlap, got {:?}", r.verdict) };
    let y = Vec3::from(w.point);
    let [a, b] = w.preimages.map(Vec3::from);
    assert!((f.piece(w.cells[0]).apply(&a) - y).norm() < 1e-12);
    assert!((f.piece(w.cells[1]).apply(&b) - y).norm() < 1e-12);
    assert!((a - b).norm() > 1e-6);
}

#[test]
fn document_round_trip_is_exact() {
    let f = perturbed_kuhn(1.0, 0.1, 3).unwrap();
    let doc = MeshDocument::from_map(&f);
    let text = doc.to_json();
    let g = load_map(&text).unwrap();
    assert_eq!(f.pieces(), g.pieces());
    assert_eq!(MeshDocument::from_map(&g).to_json(), text);
}

#[test]
fn unknown_document_keys_are_rejected() {
    let text = r#"{"points": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]], "cells": [[0,1,2,3]], "colour": 3}"#;
    assert!(MeshDocument::parse(text).is_err());
}

#[test]
fn invalid_cells_are_rejected() {
    let p = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
    assert!(SimplicialComplex::new(p.clone(), vec![[0, 1, 2, 3]], vec![]).is_err());
    assert!(SimplicialComplex::new(p, vec![[0, 1, 2, 9]], vec![]).is_err());
}

#[test]
fn local_structures_of_the_kuhn_cube() {
    let f = perturbed_kuhn(1.0, 0.1, 7).unwrap();
    assert_eq!(face_pairs(&f).len(), 6);
    let fans = edge_fans(&f).unwrap();
    assert!(!fans.is_empty());
    let stars = vertex_stars(&f);
    assert_eq!(stars.len(), 8);
}

#[test]
fn inverse_is_piecewise_affine_inverse() {
    let f = perturbed_octahedron(1.0, 0.1, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut hits = 0;
    for _ in 0..4000 {
        let x = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if let Ok(y) = f.eval(&x) {
            let (back, _) = f.inverse(&y).unwrap();
            assert!((back - x).norm() < 1e-12);
            hits += 1;
        }
    }
    assert!(hits > 300);
}

proptest! {
    #[test]
    fn perturbed_maps_are_continuous_at_shared_faces(seed in 0u64..500, amp in 0.0f64..0.15) {
        let f = perturbed_kuhn(1.0, amp, seed).unwrap();
        let k = f.complex();
        for fc in 0..k.faces().len() {
            let cells = k.face_cells(fc);
            if cells.len() != 2 {
                continue;
            }
            let [a, b, c] = k.face_points(fc);
            let x = (a + b + c) / 3.0;
            let ya = f.piece(cells[0]).apply(&x);
            let yb = f.piece(cells[1]).apply(&x);
            prop_assert!((ya - yb).norm() < 1e-12);
        }
    }

    #[test]
    fn small_perturbations_stay_valid(seed in 0u64..500) {
        prop_assert!(perturbed_kuhn(1.0, 0.1, seed).unwrap().validate().passed());
    }
}
