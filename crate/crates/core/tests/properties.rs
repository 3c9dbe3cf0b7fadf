use std::f64::consts::PI;

use helfrich_core::analytic::principal_sample;
use helfrich_core::classify::{critical_radius, radius_scan, sphere_residual};
use helfrich_core::energy::{evaluate_energies, EnergyParams, Source};
use helfrich_core::mesh::{make_primitive, PrimitiveSpec, TriangleMesh};
use helfrich_core::variation::{area_gradient, el_residual, volume_gradient};
use helfrich_core::Vec3;
use nalgebra::Rotation3;
use proptest::prelude::*;

fn bumpy(level: u32) -> TriangleMesh {
    make_primitive(&PrimitiveSpec::PerturbedSphere { radius: 1.0, amplitude: 0.05, level, profile: Default::default() })
        .unwrap()
}

fn lcw(mesh: &TriangleMesh, l1: f64, l2: f64) -> f64 {
    evaluate_energies(Source::Mesh(mesh), &EnergyParams::willmore(l1, l2)).unwrap().lcw_total().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn principal_identities(k1 in -1e2..1e2f64, k2 in -1e2..1e2f64) {
        let s = principal_sample(k1, k2);
        let scale = (k1.abs() + k2.abs() + 1.0).powi(3);
        prop_assert!(s.cubic <= 1e-12 * scale);
        prop_assert!(s.gauss_relation <= 1e-12 * scale);
        prop_assert!(s.tracefree <= 1e-12 * scale);
    }

    #[test]
    fn critical_radius_scaling(l1 in 1e-3..1e3f64, l2 in -1e3..-1e-3f64, s in 0.1..10.0f64) {
        let r = critical_radius(&EnergyParams::willmore(l1, l2)).unwrap();
        let rs = critical_radius(&EnergyParams::willmore(s * s * l1, s * s * s * l2)).unwrap();
        prop_assert!((rs * s - r).abs() <= 1e-12 * r);
        prop_assert!(sphere_residual(&EnergyParams::willmore(l1, l2), r).abs() <= 1e-12 * (l1 / r + l2.abs()));
    }

    #[test]
    fn scan_root_only_in_sphere_branch(l1 in 0.0..5.0f64, l2 in -5.0..5.0f64) {
        let params = EnergyParams::willmore(l1, l2);
        let scan = radius_scan(&params, 0.05, 100.0, 200).unwrap();
        match critical_radius(&params) {
            Some(r) if r > 0.05 && r < 100.0 => {
                prop_assert_eq!(scan.roots.len(), 1);
                prop_assert!((scan.roots[0] - r).abs() <= 1e-12 * r);
            }
            _ => prop_assert!(scan.roots.is_empty()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energy_scale_covariance(s in 0.2..5.0f64, l1 in 0.0..2.0f64, l2 in -2.0..2.0f64) {
        let m = bumpy(2);
        let scaled = m.transformed(None, s, Vec3::zeros());
        let lhs = lcw(&scaled, l1, l2);
        let rhs = lcw(&m, s * s * l1, s * s * s * l2);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (lhs.abs() + rhs.abs() + 1.0));
    }

    #[test]
    fn rigid_motion_invariance(ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, t in -3.0..3.0f64) {
        let m = bumpy(2);
        let rot = Rotation3::new(Vec3::new(ax, ay, az));
        let moved = m.transformed(Some(&rot), 1.0, Vec3::new(t, -t, 0.5 * t));
        prop_assert!((lcw(&m, 1.0, -1.0) - lcw(&moved, 1.0, -1.0)).abs() < 1e-10);
        let params = EnergyParams::willmore(1.0, -1.0);
        let a = el_residual(Source::Mesh(&m), &params).unwrap();
        let b = el_residual(Source::Mesh(&moved), &params).unwrap();
        for (x, y) in a.value.iter().zip(&b.value) {
            prop_assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn gauss_bonnet_on_closed_meshes(level in 0u32..4, radius in 0.1..10.0f64, amplitude in 0.0..0.2f64) {
        let m = make_primitive(&PrimitiveSpec::PerturbedSphere { radius, amplitude, level, profile: Default::default() }).unwrap();
        prop_assert!((m.total_angle_defect() - 2.0 * PI * m.euler_characteristic() as f64).abs() < 1e-9);
    }

    #[test]
    fn exact_gradients_annihilate_translations(level in 0u32..3, amplitude in 0.0..0.2f64) {
        let m = make_primitive(&PrimitiveSpec::PerturbedSphere { radius: 1.0, amplitude, level, profile: Default::default() }).unwrap();
        let sa: Vec3 = area_gradient(&m).iter().sum();
        let sv: Vec3 = volume_gradient(&m).iter().sum();
        prop_assert!(sa.norm() < 1e-12 * m.area());
        prop_assert!(sv.norm() < 1e-12 * m.area());
    }
}
