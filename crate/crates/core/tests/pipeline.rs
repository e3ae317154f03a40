use plsmooth::fixtures::{perturbed_kuhn, perturbed_octahedron, two_tets};
use plsmooth::geom::Vec3;
use plsmooth::mesh::{kuhn_cube, octahedral_star, PLMap, SimplicialComplex};
use plsmooth::pipeline::{
    choose_params, lambda_sweep, smooth, CertifyOptions, DifferenceOptions, Patch, SmoothingOptions, SweepOptions,
    CSV_HEADER,
};
use plsmooth::verify::stratified_samples;
use plsmooth::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quick_certify(seed: u64) -> CertifyOptions {
    CertifyOptions { samples: 20_000, fd_samples: 4_000, interface_samples: 4_000, seed }
}

#[test]
fn identity_needs_no_smoothing() {
    let (p, c) = kuhn_cube(1.0);
    let f = PLMap::identity(SimplicialComplex::new(p, c, vec![]).unwrap());
    let (params, g) = smooth(&f, 1.0, &SmoothingOptions::default()).unwrap();
    assert!(params.is_empty());
    let x = Vec3::new(0.3, 0.6, 0.2);
    assert_eq!(g.evaluate(&x).unwrap(), x);
    assert_eq!(g.patch_of(&x).unwrap(), Patch::Bulk);
    let d = g.difference(&DifferenceOptions::default()).unwrap();
    assert_eq!(d.volume, 0.0);
    assert_eq!(d.w1p, 0.0);
    assert_eq!(d.w1q_inverse, 0.0);
    assert!(g.certify(&quick_certify(0)).iter().all(|r| r.passed));
}

#[test]
fn two_tetrahedra_certify_and_obey_the_volume_bound() {
    let f = two_tets(2.0).unwrap();
    let (params, g) = smooth(&f, 1.0, &SmoothingOptions::default()).unwrap();
    assert_eq!(params.faces.len(), 1);
    assert!(params.edges.is_empty() && params.vertices.is_empty());
    for r in g.certify(&quick_certify(1)) {
        assert!(r.passed, "{r:?}");
    }
    let d = g.difference(&DifferenceOptions { p: 2.0, q: 2.0, ..Default::default() }).unwrap();
    assert!(d.volume > 0.0);
    let bound = d.sup_derivative_difference.powi(2) * d.volume;
    assert!(d.lp_derivative.powi(2) <= bound * (1.0 + 1e-6) + d.volume_error, "{} vs {bound}", d.lp_derivative.powi(2));
    assert!(d.unmatched_image_measure < 1e-3);
}

#[test]
fn octahedron_smoothing_certifies() {
    let f = perturbed_octahedron(1.0, 0.1, 7).unwrap();
    let (params, g) = smooth(&f, 1.0, &SmoothingOptions::default()).unwrap();
    assert_eq!(params.vertices.len(), 1);
    assert_eq!(params.edges.len(), 6);
    assert_eq!(params.faces.len(), 12);
    for r in g.certify(&quick_certify(2)) {
        assert!(r.passed, "{r:?}");
    }
    let prov = g.provenance();
    assert_eq!(prov.vertices.len(), 1);
    assert_eq!(prov.vertices[0].degree, 1);
    assert!(prov.vertices[0].isotopy_det_floor > 0.0);
    assert!(prov.vertices[0].patch_isotopy_floor > 0.0);
    assert_eq!(g.patch_of(&Vec3::zeros()).unwrap(), Patch::Vertex(0));
}

#[test]
fn inverse_round_trips_through_every_region() {
    for f in [perturbed_kuhn(1.0, 0.1, 7).unwrap(), perturbed_octahedron(1.0, 0.1, 7).unwrap()] {
        let (_, g) = smooth(&f, 0.5, &SmoothingOptions::default()).unwrap();
        let strata = g.strata();
        let pts = stratified_samples(&strata, 10_000, 200, 5);
        let tol = 1e-11 * g.scale();
        let mut worst: f64 = 0.0;
        for (_, x) in &pts {
            let y = g.evaluate(x).unwrap();
            let back = g.inverse(&y, None).unwrap();
            worst = worst.max((g.evaluate(&back).unwrap() - y).norm());
        }
        assert!(worst <= tol, "worst residual {worst:e}");
    }
}

#[test]
fn points_outside_the_domain_are_refused() {
    let f = two_tets(2.0).unwrap();
    let (_, g) = smooth(&f, 1.0, &SmoothingOptions::default()).unwrap();
    assert!(matches!(g.evaluate(&Vec3::new(5.0, 5.0, 5.0)), Err(Error::OutOfDomain(_))));
}

#[test]
fn scales_outside_the_unit_interval_are_refused() {
    let f = two_tets(2.0).unwrap();
    let params = choose_params(&f, &SmoothingOptions::default()).unwrap();
    assert!(params.at_scale(0.0).is_err());
    assert!(params.at_scale(1.5).is_err());
    let half = params.at_scale(0.5).unwrap();
    assert!((half.faces[0].width - 0.5 * params.faces[0].width).abs() < 1e-15);
    let opts = SweepOptions { lambdas: vec![1.0, 2.0], ..Default::default() };
    assert!(lambda_sweep(&f, &params, &opts).is_err());
}

#[test]
fn boundary_edge_with_two_blended_faces_is_unsupported() {
    // Three of the four upper cells of the octahedral star: the edge from the
    // centre to the top vertex lies on the boundary and carries two faces.
    let (p, cells) = octahedral_star(1.0);
    let top = 5;
    let keep: Vec<[usize; 4]> = cells.into_iter().filter(|c| c.contains(&top)).take(3).collect();
    let k = SimplicialComplex::new(p.clone(), keep, vec![]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let images: Vec<Vec3> = p
        .iter()
        .map(|x| x + Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)))
        .collect();
    let f = PLMap::from_vertex_images(k, &images).unwrap();
    assert!(f.validate().passed());
    assert!(matches!(choose_params(&f, &SmoothingOptions::default()), Err(Error::Unsupported(_))));
}

#[test]
fn sweeps_are_reproducible() {
    let f = two_tets(2.0).unwrap();
    let params = choose_params(&f, &SmoothingOptions::default()).unwrap();
    let opts = SweepOptions { lambdas: vec![1.0, 0.5, 0.25], ..Default::default() };
    let a = lambda_sweep(&f, &params, &opts).unwrap();
    let b = lambda_sweep(&f, &params, &opts).unwrap();
    let csv = a.csv();
    assert_eq!(csv, b.csv());
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 4);
    let vols: Vec<f64> = a.rows.iter().map(|r| r.report.as_ref().unwrap().volume).collect();
    assert!(vols.windows(2).all(|w| w[1] < w[0]));
    assert!(a.first_below(0.0).is_none());
}

#[test]
fn grid_dump_is_deterministic_and_inside_the_domain() {
    let f = two_tets(2.0).unwrap();
    let (_, g) = smooth(&f, 1.0, &SmoothingOptions::default()).unwrap();
    let a = g.grid_dump(8);
    assert!(!a.is_empty());
    assert_eq!(a, g.grid_dump(8));
    for (x, y) in &a {
        assert_eq!(g.evaluate(&Vec3::from(*x)).unwrap(), Vec3::from(*y));
    }
}

#[test]
fn patch_labels_serialize_with_kind_and_id() {
    assert_eq!(serde_json::to_string(&Patch::Edge(3)).unwrap(), r#"{"kind":"edge","id":3}"#);
    assert_eq!(serde_json::to_string(&Patch::Bulk).unwrap(), r#"{"kind":"bulk"}"#);
    assert_eq!(Patch::Vertex(2).to_string(), "vertex 2");
}
