use nharm_core::energy::*;
use nharm_core::manifolds::*;
use nharm_core::solver::degree_map;
use nharm_core::GrowthParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn random_sphere_field(mesh: Arc<DomainMesh>, dim: usize, rng: &mut ChaCha8Rng) -> MapField {
    let target = TargetManifold::sphere(dim);
    let values: Vec<f64> = (0..mesh.node_count())
        .flat_map(|_| {
            let v: Vec<f64> = (0..=dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let l = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.into_iter().map(move |a| a / l)
        })
        .collect();
    MapField::new(mesh, target, values).unwrap()
}

/// Central differences of the discrete energy in every unconstrained
/// coordinate; returns `|g_fd - g| / |g|`.
fn fd_relative_error(field: &MapField, params: &GrowthParams) -> f64 {
    let g = euclidean_gradient(field, params).values;
    let mut vals = field.values().to_vec();
    let h = 1e-5;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..vals.len() {
        let v0 = vals[k];
        vals[k] = v0 + h;
        let ep = energy_of_values(field.mesh(), field.target(), &vals, params);
        vals[k] = v0 - h;
        let em = energy_of_values(field.mesh(), field.target(), &vals, params);
        vals[k] = v0;
        let fd = (ep - em) / (2.0 * h);
        num += (fd - g[k]) * (fd - g[k]);
        den += g[k] * g[k];
    }
    (num / den).sqrt()
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases: Vec<(Arc<DomainMesh>, usize)> = vec![
        (Arc::new(build_torus_mesh(2, 8, 1.0).unwrap()), 2),
        (Arc::new(build_torus_mesh(3, 4, 1.0).unwrap()), 3),
        (Arc::new(build_icosphere_mesh(2).unwrap()), 2),
    ];
    for (mesh, dim) in cases {
        let n = mesh.dim();
        for (p, delta, s) in [(n as f64 + 0.3, 0.01, 1.0), (n as f64, 0.0, 0.0), (n as f64 + 0.7, 0.5, 0.2)] {
            let params = GrowthParams::new(n, dim + 1, p, delta, s).unwrap();
            for _ in 0..3 {
                let f = random_sphere_field(mesh.clone(), dim, &mut rng);
                let err = fd_relative_error(&f, &params);
                assert!(err < 1e-6, "{:?} p={p}: {err:e}", mesh.kind());
            }
        }
    }
}

#[test]
fn flat_target_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mesh = Arc::new(build_torus_mesh(2, 6, 1.0).unwrap());
    let target = TargetManifold::flat_torus(vec![1.0, 1.0]).unwrap();
    let values: Vec<f64> = (0..mesh.node_count() * 2).map(|_| rng.random_range(0.3..0.7)).collect();
    let f = MapField::new(mesh, target, values).unwrap();
    let params = GrowthParams::new(2, 2, 2.5, 0.1, 1.0).unwrap();
    assert!(fd_relative_error(&f, &params) < 1e-6);
}

#[test]
fn constant_maps_carry_no_energy() {
    let mesh = Arc::new(build_torus_mesh(2, 8, 1.0).unwrap());
    let f = MapField::constant(mesh, TargetManifold::sphere(2), &[0.0, 1.0, 0.0]).unwrap();
    let params = GrowthParams::new(2, 3, 2.4, 0.3, 1.0).unwrap();
    assert_eq!(total_energy(&f, &params).total, 0.0);
    assert_eq!(dirichlet_energy(&f, 2), 0.0);
    assert!(euclidean_gradient(&f, &params).values.iter().all(|v| *v == 0.0));
}

#[test]
fn entropy_of_constant_map() {
    let mesh = Arc::new(build_torus_mesh(3, 3, 2.0).unwrap());
    let f = MapField::constant(mesh, TargetManifold::sphere(3), &[0.0, 0.0, 0.0, 1.0]).unwrap();
    let params = GrowthParams::new(3, 4, 3.4, 0.25, 0.5).unwrap();
    let a: f64 = 1.0 + 0.25f64.powf(1.5);
    let expect = 8.0 * a.powf(3.4 / 3.0) * a.ln();
    assert!((entropy(&f, &params) - expect).abs() < 1e-12 * expect);
}

#[test]
fn winding_map_dirichlet_energy_is_exact() {
    let (side, period) = (1.0, 2.0);
    let mesh = Arc::new(build_torus_mesh(2, 5, side).unwrap());
    let t = TargetManifold::flat_torus(vec![period, period]).unwrap();
    let f = MapField::from_fn(mesh, t, |x| vec![period * x[0], period * x[1]]).unwrap();
    // |G|^2 = 2 (P/L)^2, density |G|^2/2 over area L^2.
    assert!((dirichlet_energy(&f, 2) - 4.0).abs() < 1e-12);
    let conformal = GrowthParams::new(2, 2, 2.0, 0.0, 0.0).unwrap();
    assert!((total_energy(&f, &conformal).total - 4.0).abs() < 1e-12);
}

#[test]
fn identity_of_the_sphere_has_area_energy() {
    let mesh = Arc::new(build_icosphere_mesh(4).unwrap());
    let f = MapField::from_fn(mesh, TargetManifold::sphere(2), |x| x.to_vec()).unwrap();
    let d = dirichlet_energy(&f, 2);
    assert!((d / (4.0 * PI) - 1.0).abs() < 0.01, "{}", d / (4.0 * PI));
}

#[test]
fn energy_equals_dirichlet_in_the_conformal_limit() {
    let mesh = Arc::new(build_icosphere_mesh(2).unwrap());
    let f = degree_map(mesh, &TargetManifold::sphere(2), 1, 0.3).unwrap();
    let params = GrowthParams::new(2, 3, 2.0, 0.0, 0.0).unwrap();
    let e = total_energy(&f, &params).total;
    assert!((e - dirichlet_energy(&f, 2)).abs() < 1e-12 * e);
}

#[test]
fn tangent_gradient_is_tangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mesh = Arc::new(build_icosphere_mesh(2).unwrap());
    let f = random_sphere_field(mesh, 2, &mut rng);
    let params = GrowthParams::new(2, 3, 2.2, 0.1, 1.0).unwrap();
    let g = tangent_gradient(&f, &params);
    for i in 0..g.node_count() {
        let d: f64 = g.node(i).iter().zip(f.value(i)).map(|(a, b)| a * b).sum();
        assert!(d.abs() < 1e-12 * (1.0 + g.node(i).iter().map(|a| a.abs()).sum::<f64>()));
    }
}

#[test]
fn ball_and_annulus_partition_the_energy() {
    let mesh = Arc::new(build_torus_mesh(2, 16, 1.0).unwrap());
    let f = degree_map(mesh.clone(), &TargetManifold::sphere(2), 1, 0.15).unwrap();
    let params = GrowthParams::new(2, 3, 2.3, 0.05, 1.0).unwrap();
    let r = total_energy(&f, &params);
    let c = mesh.node(8 * 16 + 8);
    let whole = ball_sum(&mesh, &r.per_cell, &c, mesh.diameter());
    assert!((whole - r.total).abs() < 1e-12 * r.total);
    let split = ball_sum(&mesh, &r.per_cell, &c, 0.2) + annulus_sum(&mesh, &r.per_cell, &c, 0.2, mesh.diameter());
    assert!((split - r.total).abs() < 1e-12 * r.total);
    assert_eq!(annulus_sum(&mesh, &r.per_cell, &c, 0.3, 0.2), 0.0);
    let local = local_energy(&f, &params, 8 * 16 + 8, 0.2);
    assert_eq!(local, ball_sum(&mesh, &r.per_cell, &c, 0.2));
}

#[test]
fn energy_decreases_with_p_at_unit_phase() {
    let mesh = Arc::new(build_torus_mesh(2, 16, 1.0).unwrap());
    let f = degree_map(mesh, &TargetManifold::sphere(2), 1, 0.15).unwrap();
    let mut last = f64::INFINITY;
    for p in [2.4, 2.3, 2.2, 2.1, 2.0] {
        let e = total_energy(&f, &GrowthParams::new(2, 3, p, 0.01, 1.0).unwrap()).total;
        assert!(e < last);
        last = e;
    }
}
