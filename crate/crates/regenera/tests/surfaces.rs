use std::f64::consts::PI;

use regenera::continuation::{continue_family, count_summary, FreeValues, NewtonOptions};
use regenera::geometry::{export_obj, integrate_surface, regularity_check, self_intersections, translation_measure, Basepoint, MeshOptions};
use regenera::residuals::residual_vector;
use regenera::surface_model::build_config;
use regenera::weierstrass::{assemble_triple, gauss_map_at_end, initial_parameters};
use regenera::{Error, Execution};

#[test]
fn counts_leave_two_free_parameters() {
    for n in 1..=3 {
        let (params, equations, free) = count_summary(n);
        assert_eq!((params, equations, free), (18 * n + 4, 18 * n + 2, 2));
    }
}

#[test]
fn short_family_solves_and_meshes() {
    let cfg = build_config(1, 0.5, 0.0, &[], None).unwrap();
    let steps = continue_family(&cfg, &[0.0, 0.05, 0.1], None, &NewtonOptions::default()).unwrap();
    assert_eq!(steps.len(), 3);
    let last = steps.last().unwrap();
    let at = cfg.at_x(last.x);
    let res = residual_vector(&at, &last.params).unwrap();
    assert!(res.sup_norm() <= 1e-10);
    // the free neck keeps its prescribed value
    assert_eq!(last.params.necks[1], (1.0, 0.0));

    let triple = assemble_triple(&at, &last.params).unwrap();
    let (mesh, report) = integrate_surface(&triple, &last.params, Basepoint::default(), &MeshOptions::default()).unwrap();
    assert!(report.max_defect <= 1e-6);
    assert_eq!(report.cycles.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.obj");
    export_obj(&mesh, &path, (2, 1)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 2 * mesh.vertices.len());

    let crossings = self_intersections(&mesh, Execution::default());
    assert!(crossings.pairs_tested > mesh.triangles.len());
    assert_eq!(crossings.intersections, 0);

    let reg = regularity_check(&triple, 2.0 * at.epsilon, 24, Execution::Sequential).unwrap();
    assert_eq!(reg.zero_counts, vec![2, 2]);
    assert!(reg.min_metric > 0.0);

    // the odd-neck translation tends to v⁰ = 0 at rate x²
    let tm = translation_measure(&triple, &last.params, last.x, 1).unwrap();
    assert!(tm.value.re.abs() < 2.0 * PI * last.x * last.x);
}

#[test]
fn free_values_select_the_family_member() {
    let cfg = build_config(1, 0.5, 0.0, &[], None).unwrap();
    let free = FreeValues { u12: 1.2, v12: 0.1 };
    let steps = continue_family(&cfg, &[0.0, 0.05], Some(free), &NewtonOptions::default()).unwrap();
    assert_eq!(steps[1].params.necks[1], (1.2, 0.1));
    assert!(steps[1].report.final_residual <= 1e-10);
    let bad = continue_family(&cfg, &[0.0, 0.05], Some(FreeValues { u12: -1.0, v12: 0.0 }), &NewtonOptions::default());
    assert!(matches!(bad, Err(Error::InvalidConfig(_))));
}

#[test]
fn seed_normals_point_along_the_ends() {
    let cfg = build_config(1, 0.5, 0.0, &[], None).unwrap();
    let triple = assemble_triple(&cfg, &initial_parameters(&cfg).unwrap()).unwrap();
    for (sphere, slot) in regenera::weierstrass::ends(1) {
        let nrm = gauss_map_at_end(&triple, sphere, slot).unwrap();
        // horizontal ends of a Scherk surface have horizontal normals
        assert!(nrm[2].abs() < 1e-12);
        assert!(((nrm[0] * nrm[0] + nrm[1] * nrm[1]).sqrt() - 1.0).abs() < 1e-12);
    }
}
