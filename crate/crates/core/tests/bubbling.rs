use nharm_core::bubbling::*;
use nharm_core::energy::*;
use nharm_core::manifolds::*;
use nharm_core::solver::*;
use nharm_core::{Error, GrowthParams};
use std::f64::consts::PI;
use std::sync::Arc;

const FOUR_PI: f64 = 4.0 * PI;

fn torus(res: usize) -> Arc<DomainMesh> {
    Arc::new(build_torus_mesh(2, res, 1.0).unwrap())
}

fn conformal() -> GrowthParams {
    GrowthParams::new(2, 3, 2.0, 0.0, 0.0).unwrap()
}

fn center_node(res: usize) -> usize {
    (res / 2) * res + res / 2
}

/// Degree-one bubble `x -> stereographic^{-1}(x / lambda)` around the box
/// centre, without cut-off.
fn stereo_bubble(mesh: Arc<DomainMesh>, lambda: f64) -> MapField {
    MapField::from_fn(mesh, TargetManifold::sphere(2), |x| {
        let (a, b) = ((x[0] - 0.5) / lambda, (x[1] - 0.5) / lambda);
        let q = a * a + b * b;
        vec![2.0 * a / (1.0 + q), 2.0 * b / (1.0 + q), (q - 1.0) / (1.0 + q)]
    })
    .unwrap()
}

#[test]
fn max_concentration_trivial_cases() {
    let mesh = torus(16);
    let f = MapField::constant(mesh.clone(), TargetManifold::sphere(2), &[0.0, 0.0, 1.0]).unwrap();
    let params = GrowthParams::new(2, 3, 2.2, 0.1, 1.0).unwrap();
    assert_eq!(max_concentration(&f, &params, 0.1).unwrap(), (0.0, 0));
    let b = degree_map(mesh.clone(), &TargetManifold::sphere(2), 1, 0.1).unwrap();
    let total = total_energy(&b, &params).total;
    let (v, i) = max_concentration(&b, &params, mesh.diameter()).unwrap();
    assert_eq!(i, 0);
    assert!((v - total).abs() < 1e-12 * total);
    assert!(max_concentration(&b, &params, 0.0).is_err());
}

#[test]
fn max_concentration_matches_brute_force_scan() {
    let mesh = torus(32);
    let f = stereo_bubble(mesh.clone(), 0.06);
    let params = GrowthParams::new(2, 3, 2.1, 0.01, 1.0).unwrap();
    for r in [0.03, 0.1, 0.2] {
        let (v, i) = max_concentration(&f, &params, r).unwrap();
        let mut best = (f64::NEG_INFINITY, 0);
        for y in 0..mesh.node_count() {
            let e = local_energy(&f, &params, y, r);
            if e > best.0 + 1e-12 * e.abs() {
                best = (e, y);
            }
        }
        assert!((v - best.0).abs() < 1e-12 * v, "r = {r}");
        assert_eq!(i, best.1);
    }
    assert_eq!(mesh.node(max_concentration(&f, &params, 0.03).unwrap().1), [0.5, 0.5, 0.0]);
}

#[test]
fn concentration_scan_is_monotone() {
    let mesh = torus(32);
    let f = stereo_bubble(mesh.clone(), 0.05);
    let params = GrowthParams::new(2, 3, 2.05, 0.01, 1.0).unwrap();
    let radii: Vec<f64> = (1..=20).map(|k| 0.035 * k as f64).collect();
    let scan = concentration_scan(&f, &params, &radii);
    let total = total_energy(&f, &params).total;
    for w in scan.values.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!(scan.values.iter().all(|v| *v <= total * (1.0 + 1e-12)));
}

#[test]
fn concentration_radius_of_a_bubble() {
    let mesh = torus(128);
    let params = conformal();
    let constant = MapField::constant(mesh.clone(), TargetManifold::sphere(2), &[1.0, 0.0, 0.0]).unwrap();
    assert!(concentration_radius(&constant, &params, 1.0).unwrap().is_none());
    let lambda = 0.04;
    // A patch avoids the seam jump of an uncut bubble on the torus.
    let patch = Arc::new(build_patch_mesh(2, 128, 1.0, [0.5, 0.5, 0.0]).unwrap());
    let f = stereo_bubble(patch, lambda);
    let total = total_energy(&f, &params).total;
    // F(r) = 4 pi r^2 / (lambda^2 + r^2) for the exact bubble.
    let c = concentration_radius(&f, &params, 0.5 * total).unwrap().unwrap();
    assert!((c.radius / lambda - 1.0).abs() < 0.15, "{}", c.radius / lambda);
    assert!(c.value >= 0.5 * total);
    let bigger = concentration_radius(&f, &params, 0.8 * total).unwrap().unwrap();
    assert!(bigger.radius > c.radius);
    assert!(concentration_radius(&f, &params, 2.0 * total).unwrap().is_none());
    assert!(concentration_radius(&f, &params, 0.0).is_err());
}

#[test]
fn rescale_at_unit_scale_resamples_the_field() {
    let mesh = Arc::new(build_patch_mesh(2, 20, 20.0, [0.0; 3]).unwrap());
    let f = MapField::from_fn(mesh.clone(), TargetManifold::sphere(2), |x| {
        vec![(0.3 * x[0]).cos(), (0.3 * x[0]).sin() * (0.2 * x[1]).cos(), (0.2 * x[1]).sin()]
    })
    .unwrap();
    let center = mesh.nodes().iter().position(|x| x[0] == 0.0 && x[1] == 0.0).unwrap();
    let params = GrowthParams::new(2, 3, 2.3, 0.5, 0.5).unwrap();
    let r = rescale_map(&f, center, 1.0, &params, &RescaleConfig { k: 8.0, resolution: 16 }).unwrap();
    assert_eq!(r.params, params);
    for (i, x) in r.field.mesh().nodes().iter().enumerate() {
        let j = mesh.nodes().iter().position(|y| y == x).unwrap();
        for (a, b) in r.field.value(i).iter().zip(f.value(j)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn rescale_energy_bookkeeping() {
    let mesh = torus(256);
    let f = degree_map(mesh.clone(), &TargetManifold::sphere(2), 1, 0.08).unwrap();
    let params = GrowthParams::new(2, 3, 2.3, 0.05, 0.7).unwrap();
    let c = center_node(256);
    let r = 0.06;
    let scaled = rescale_map(&f, c, r, &params, &RescaleConfig { k: 4.0, resolution: 256 }).unwrap();
    assert!((scaled.params.delta - 0.05 * r * r).abs() < 1e-18);
    assert!((scaled.params.s - 0.7 * r * r).abs() < 1e-18);
    let chart_cells = total_energy(&scaled.field, &scaled.params).per_cell;
    let e_chart = ball_sum(scaled.field.mesh(), &chart_cells, &[0.0; 3], 1.0);
    let direct = local_energy(&f, &params, c, r);
    let via = scaled.original_ball_energy(e_chart);
    assert!((via / direct - 1.0).abs() < 0.02, "{via} vs {direct}");
}

#[test]
fn rescale_constant_and_overflow() {
    let mesh = torus(32);
    let f = MapField::constant(mesh.clone(), TargetManifold::sphere(2), &[0.0, 1.0, 0.0]).unwrap();
    let params = GrowthParams::new(2, 3, 2.2, 0.1, 1.0).unwrap();
    let r = rescale_map(&f, 5, 0.03, &params, &RescaleConfig::default()).unwrap();
    assert_eq!(total_energy(&r.field, &r.params).total, 0.0);
    assert!(matches!(
        rescale_map(&f, 5, 0.1, &params, &RescaleConfig::default()),
        Err(Error::ChartOverflow { .. })
    ));
    let s = Arc::new(build_icosphere_mesh(2).unwrap());
    let g = MapField::constant(s, TargetManifold::sphere(2), &[0.0, 1.0, 0.0]).unwrap();
    assert!(rescale_map(&g, 0, 0.1, &params, &RescaleConfig::default()).is_ok());
    assert!(matches!(
        rescale_map(&g, 0, 0.3, &params, &RescaleConfig::default()),
        Err(Error::ChartOverflow { .. })
    ));
    assert!(rescale_map(&g, 0, 0.1, &params, &RescaleConfig { k: 8.0, resolution: 15 }).is_err());
}

#[test]
fn neck_energy_partitions_the_total() {
    let mesh = torus(64);
    let f = degree_map(mesh.clone(), &TargetManifold::sphere(2), 1, 0.1).unwrap();
    let params = GrowthParams::new(2, 3, 2.2, 0.05, 1.0).unwrap();
    let c = center_node(64);
    let total = total_energy(&f, &params).total;
    assert_eq!(neck_energy(&f, &params, c, 0.1, 0.1).unwrap(), 0.0);
    let parts = local_energy(&f, &params, c, 0.05)
        + neck_energy(&f, &params, c, 0.05, 0.2).unwrap()
        + neck_energy(&f, &params, c, 0.2, mesh.diameter()).unwrap();
    assert!((parts - total).abs() < 1e-12 * total);
    assert!(neck_energy(&f, &params, c, 0.0, 0.1).is_err());
}

#[test]
fn radii_exponent_trivial_values() {
    assert_eq!(radii_exponent(0.01, 2, 2.0), 1.0);
    assert_eq!(radii_exponent(1.0, 3, 3.7), 1.0);
    assert!((radii_exponent(0.02, 2, 2.0125) - 0.02f64.powf(-0.0125)).abs() < 1e-15);
    let t = radii_exponent_trace(2, &[(None, 2.2), (Some(0.5), 2.1), (Some(0.1), 2.0)]);
    assert_eq!(t[0], None);
    assert!((t[1].unwrap() - 0.5f64.powf(-0.1)).abs() < 1e-15);
    assert_eq!(t[2], Some(1.0));
}

#[test]
fn hopf_balance_trivial_and_angular_fields() {
    let mesh = Arc::new(build_patch_mesh(2, 256, 1.0, [0.0; 3]).unwrap());
    let params = GrowthParams::new(2, 3, 2.1, 0.01, 1.0).unwrap();
    let origin = mesh.nodes().iter().position(|x| x[0] == 0.0 && x[1] == 0.0).unwrap();
    let k = MapField::constant(mesh.clone(), TargetManifold::sphere(2), &[0.0, 0.0, 1.0]).unwrap();
    let h = hopf_balance(&k, &params, origin, 0.2).unwrap();
    assert_eq!(h.lhs, 0.0);
    assert!(h.rhs > 0.0 && h.holds(0.0));
    let ang = MapField::from_fn(mesh.clone(), TargetManifold::sphere(2), |x| {
        let th = x[1].atan2(x[0]);
        vec![0.6 * th.cos(), 0.6 * th.sin(), 0.8]
    })
    .unwrap();
    let h = hopf_balance(&ang, &params, origin, 0.3).unwrap();
    // The bilinear interpolant of an angular map has a small radial part.
    assert!(h.lhs < 1e-3 * h.rhs, "{h:?}");
    assert!(matches!(
        hopf_balance(&ang, &params, origin, 0.005),
        Err(Error::UnderResolvedShell { .. })
    ));
}

#[test]
fn tangential_energy_of_radial_and_constant_fields() {
    let mesh = Arc::new(build_patch_mesh(2, 256, 1.0, [0.0; 3]).unwrap());
    let params = GrowthParams::new(2, 3, 2.1, 0.01, 1.0).unwrap();
    let origin = mesh.nodes().iter().position(|x| x[0] == 0.0 && x[1] == 0.0).unwrap();
    let k = MapField::constant(mesh.clone(), TargetManifold::sphere(2), &[0.0, 0.0, 1.0]).unwrap();
    assert_eq!(tangential_neck_energy(&k, &params, origin, 0.02, 0.4).unwrap(), 0.0);
    let radial = MapField::from_fn(mesh.clone(), TargetManifold::sphere(2), |x| {
        let rho = 8.0 * (x[0] * x[0] + x[1] * x[1]).sqrt();
        vec![rho.sin(), 0.0, rho.cos()]
    })
    .unwrap();
    let tan = tangential_neck_energy(&radial, &params, origin, 0.02, 0.4).unwrap();
    let full = neck_energy(&radial, &params, origin, 0.04, 0.1).unwrap();
    assert!(tan < 1e-3 * full, "{tan} vs {full}");
    assert!(tangential_neck_energy(&k, &params, origin, 0.1, 0.4).is_err());
}

#[test]
fn gradient_decay_values() {
    let mesh = Arc::new(build_torus_mesh(2, 64, 1.0).unwrap());
    let k = MapField::constant(mesh.clone(), TargetManifold::sphere(2), &[0.0, 0.0, 1.0]).unwrap();
    assert_eq!(gradient_decay_check(&k, 0, 0.1, 0.3), 0.0);
    let flat = TargetManifold::flat_torus(vec![1.0, 2.0]).unwrap();
    let lin = MapField::from_fn(mesh.clone(), flat, |x| vec![x[0], 2.0 * x[1]]).unwrap();
    let c = center_node(64);
    let a = 5f64.sqrt();
    for r_out in [0.1, 0.2, 0.4] {
        let v = gradient_decay_check(&lin, c, 0.05, r_out);
        assert!(v <= r_out * a + 1e-12 && v >= (r_out - 1.0 / 64.0) * a, "{v}");
    }
}

#[test]
fn entropy_trace_products() {
    let mesh = torus(8);
    let f = MapField::constant(mesh, TargetManifold::sphere(2), &[0.0, 0.0, 1.0]).unwrap();
    let base = GrowthParams::new(2, 3, 2.2, 0.1, 1.0).unwrap();
    let sched = ContinuationSchedule::geometric(2, 2.2, 0.1, 3).unwrap();
    let run = run_continuation(&f, &base, &sched, &SolverConfig::default()).unwrap();
    let t = entropy_trace(&run.trace.rows, 2);
    for (v, row) in t.iter().zip(&run.trace.rows) {
        assert_eq!(*v, (row.p - 2.0) * row.entropy);
    }
    let mut row = run.trace.rows[0].clone();
    row.p = 2.0;
    assert_eq!(entropy_trace(&[row], 2), vec![0.0]);
}

#[test]
fn constant_run_reports_nothing() {
    let mesh = torus(16);
    let f = MapField::constant(mesh, TargetManifold::sphere(2), &[0.0, 0.0, 1.0]).unwrap();
    let base = GrowthParams::new(2, 3, 2.2, 0.1, 1.0).unwrap();
    let sched = ContinuationSchedule::geometric(2, 2.2, 0.1, 3).unwrap();
    let run = run_continuation(&f, &base, &sched, &SolverConfig::default()).unwrap();
    let rep = energy_identity_report(&run, &base, &ReportConfig::default()).unwrap();
    assert!(rep.bubbles.is_empty() && rep.neck_ladder.is_empty() && !rep.multi_bubble);
    assert_eq!((rep.energy, rep.dirichlet, rep.base_energy, rep.identity_defect), (0.0, 0.0, 0.0, 0.0));
    // With delta > 0 a constant map still has entropy vol (1+delta)^{p/2} log(1+delta).
    for (step, row) in rep.steps.iter().zip(&run.trace.rows) {
        assert!(step.concentration.is_none() && !step.detected && step.neck_energy.is_none());
        let a: f64 = 1.0 + row.delta;
        let expect = (row.p - 2.0) * a.powf(row.p / 2.0) * a.ln();
        assert!((step.entropy_product - expect).abs() < 1e-12 * expect);
    }
}

#[test]
fn smooth_sphere_map_has_no_bubble() {
    let mesh = Arc::new(build_icosphere_mesh(4).unwrap());
    let f = MapField::from_fn(mesh, TargetManifold::sphere(2), |x| x.to_vec()).unwrap();
    let params = GrowthParams::new(2, 3, 2.0125, 1e-3, 1.0).unwrap();
    let rep = final_report(&f, &params, Vec::new(), &ReportConfig::default()).unwrap();
    assert!(rep.bubbles.is_empty());
    assert!(rep.identity_defect <= 0.01 * FOUR_PI, "{}", rep.identity_defect / FOUR_PI);
    assert!((rep.dirichlet / FOUR_PI - 1.0).abs() < 0.01);
}

#[test]
fn synthetic_bubble_report() {
    let res = 256;
    let mesh = torus(res);
    let f = degree_map(mesh.clone(), &TargetManifold::sphere(2), 1, 0.02).unwrap();
    let params = conformal();
    let cfg = ReportConfig::default();
    let rep = final_report(&f, &params, Vec::new(), &cfg).unwrap();
    assert_eq!(rep.bubbles.len(), 1);
    assert!(!rep.multi_bubble);
    let b = rep.bubbles[0];
    assert_eq!(mesh.node(b.node), [0.5, 0.5, 0.0]);
    assert!((b.energy / FOUR_PI - 1.0).abs() < 0.05, "{}", b.energy / FOUR_PI);
    assert!(rep.base_energy >= 0.0 && rep.base_energy < 0.1 * FOUR_PI);
    let inside = ball_sum(&mesh, &dirichlet_per_cell(&f, 2), &mesh.node(b.node), cfg.k * b.radius);
    assert!((inside + rep.base_energy - rep.dirichlet).abs() < 1e-10 * rep.dirichlet);
    assert!(rep.identity_defect < 0.05 * FOUR_PI);
    let ladder: f64 = rep.neck_ladder.iter().map(|r| r.energy).sum();
    let direct = neck_energy(&f, &params, b.node, cfg.k * b.radius, cfg.neck_outer).unwrap();
    assert!((ladder - direct).abs() < 1e-10 * direct.max(1e-300));
    assert!(rep.neck_ladder.windows(2).all(|w| w[0].r_out == w[1].r_in));
    for ring in &rep.neck_ladder {
        assert!(ring.tangential_energy >= 0.0);
    }
}

#[test]
fn wide_crossing_is_not_a_bubble() {
    let cfg = ReportConfig::default();
    let c = Concentration { node: 0, radius: 0.05, value: 1.0 };
    assert!(!cfg.detects(&c));
    assert!(cfg.detects(&Concentration { radius: 0.03, ..c }));
    assert!((cfg.threshold_value() - 0.3 * FOUR_PI).abs() < 1e-15);
}
