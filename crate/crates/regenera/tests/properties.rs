use std::f64::consts::PI;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use regenera::differentials::residue_chain;
use regenera::geometry::{reduce_mod_lattice, SurfaceMesh};
use regenera::weierstrass::{parameter_count, ParameterVector};

fn lattice(t2: f64) -> [[f64; 3]; 2] {
    let t1 = (1.0 - t2 * t2).sqrt();
    [[0.0, 2.0 * PI, 0.0], [2.0 * PI * t1, 2.0 * PI * t2, 0.0]]
}

proptest! {
    #[test]
    fn lattice_translations_are_removed(t2 in 0.1f64..0.9, a in -20i64..20, b in -20i64..20, r in prop::array::uniform3(-0.3f64..0.3)) {
        let l = lattice(t2);
        let d = [0, 1, 2].map(|i| r[i] + a as f64 * l[0][i] + b as f64 * l[1][i]);
        let (coeffs, rest) = reduce_mod_lattice(d, &l);
        prop_assert_eq!(coeffs, [a, b]);
        for i in 0..3 {
            prop_assert!((rest[i] - r[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn residue_chain_balances_every_sphere(n in 1usize..4, seed in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 8)) {
        let periods: Vec<C> = seed.iter().take(2 * n + 2).map(|&(re, im)| C::new(re, im)).collect();
        let chain = residue_chain(n, &periods).unwrap();
        prop_assert_eq!(chain.len(), 2 * n);
        for sphere in &chain {
            let sum: C = sphere.iter().sum();
            prop_assert!(sum.norm() < 1e-12);
        }
        // joined points carry opposite residues
        for m in (0..2 * n).step_by(2) {
            prop_assert!((chain[m][0] + chain[m + 1][0]).norm() < 1e-12);
            prop_assert!((chain[m][1] + chain[m + 1][1]).norm() < 1e-12);
        }
        for m in (1..2 * n - 1).step_by(2) {
            prop_assert!((chain[m][3] + chain[m + 1][2]).norm() < 1e-12);
            prop_assert!((chain[m][2] + chain[m + 1][3]).norm() < 1e-12);
        }
    }

    #[test]
    fn parameter_layout_round_trips(n in 1usize..4, scale in 0.1f64..10.0) {
        let len = parameter_count(n);
        prop_assert_eq!(len, 18 * n + 4);
        let v: Vec<f64> = (0..len).map(|i| scale * (i as f64 * 0.37).sin()).collect();
        let p = ParameterVector::from_vec(n, &v);
        prop_assert_eq!(p.to_vec(), v);
        prop_assert_eq!(ParameterVector::labels(n).len(), len);
    }

    #[test]
    fn replication_multiplies_counts(a in 1usize..5, b in 1usize..5) {
        let mesh = SurfaceMesh::from_parts(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.2]],
            vec![[0, 1, 2], [0, 2, 3]],
            lattice(0.5),
        );
        let big = mesh.replicate(a, b);
        prop_assert_eq!(big.vertices.len(), 4 * a * b);
        prop_assert_eq!(big.triangles.len(), 2 * a * b);
        let mut buf = Vec::new();
        big.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        prop_assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4 * a * b);
    }
}
