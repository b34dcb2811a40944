//! Newton solver and volume against quadrature and closed-form oracles.

mod common;

use common::{assert_close, li2_quadrature, PI};
use num_complex::Complex64;
use proptest::prelude::*;
use qhi_core::gluing::*;
use qhi_core::tri::Triangulation;
use qhi_core::C64;
use std::fs;

fn load(name: &str) -> Triangulation {
    let path = format!("{}/../../census/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Triangulation::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sixth_root() -> C64 {
    C64::from_polar(1.0, PI / 3.0)
}

fn complete_shapes(name: &str) -> Shapes {
    match name {
        "m003" => Shapes {
            w0: vec![sixth_root(); 2],
        },
        "m004" => Shapes {
            w0: vec![sixth_root(), sixth_root().conj()],
        },
        _ => unreachable!(),
    }
}

/// Bloch-Wigner via the integral representation in common, kept independent
/// of the library's series implementation.
fn bw_quadrature(z: C64) -> f64 {
    li2_quadrature(z).im + (C64::new(1.0, 0.0) - z).arg() * z.norm().ln()
}

const CENSUS_VOLUME: f64 = 2.029883212819307;

#[test]
fn residuals_vanish_at_complete_points() {
    for name in ["m003", "m004"] {
        let tri = load(name);
        let sys = build_equations(&tri).unwrap();
        assert_eq!(sys.equations.len(), 2);
        let shapes = complete_shapes(name);
        for r in residuals(&sys, &shapes) {
            assert!(r.norm() < 1e-13, "{name}: residual {r}");
        }
    }
}

#[test]
fn newton_m003_from_standard_start() {
    let tri = load("m003");
    let sys = build_equations(&tri).unwrap();
    let start = vec![C64::new(0.5, 0.8); 2];
    let rep = solve(&sys, &start, &SolveOptions::default()).unwrap();
    assert!(rep.iterations <= 30, "took {} iterations", rep.iterations);
    assert!(rep.residual < 1e-12);
    for z in &rep.shapes.w0 {
        assert!((z - sixth_root()).norm() < 1e-10, "landed at {z}");
    }
}

#[test]
fn newton_m004_lands_on_variety() {
    // without peripheral conditions the solver finds the nearest point of
    // the edge solution set, not the complete structure; the complete solve
    // lives with the cusp section tests
    let tri = load("m004");
    let sys = build_equations(&tri).unwrap();
    let start = vec![C64::new(0.5, 0.8), C64::new(0.5, -0.8)];
    let rep = solve(&sys, &start, &SolveOptions::default()).unwrap();
    assert!(rep.residual < 1e-12);
    for z in &rep.shapes.w0 {
        assert!(z.im.abs() > 0.1, "degenerate landing point {z}");
    }
}

#[test]
fn volume_matches_quadrature_oracle() {
    for name in ["m003", "m004"] {
        let tri = load(name);
        let shapes = complete_shapes(name);
        let vol = volume(&tri, &shapes);
        assert_close(
            C64::new(vol, 0.0),
            C64::new(CENSUS_VOLUME, 0.0),
            1e-12,
            &format!("{name} volume vs census"),
        );
        // independent evaluation of the same signed sum by quadrature
        let by_quad: f64 = (0..tri.tets)
            .map(|j| tri.star(j) as f64 * bw_quadrature(shapes.w0[j]))
            .sum();
        assert!((vol - by_quad).abs() < 1e-9, "{name}: {vol} vs {by_quad}");
    }
}

#[test]
fn degenerate_initial_guess_is_rejected() {
    let tri = load("m003");
    let sys = build_equations(&tri).unwrap();
    for bad in [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] {
        let start = vec![bad; 2];
        assert!(matches!(
            solve(&sys, &start, &SolveOptions::default()),
            Err(GluingError::DegenerateInitial(_))
        ));
    }
}

/// Two-tet oracle for points of the m003 solution set away from the
/// complete structure: eliminating one equation leaves
/// (1-z)^2 (1-Z)^2 = zZ, a quadratic in Z for fixed z.
fn m003_partners(z: C64) -> Vec<C64> {
    let a2 = (C64::new(1.0, 0.0) - z).powi(2);
    let b = 2.0 * a2 + z;
    let disc = (b * b - 4.0 * a2 * a2).sqrt();
    vec![(b + disc) / (2.0 * a2), (b - disc) / (2.0 * a2)]
}

#[test]
fn quadratic_oracle_yields_generic_solutions() {
    let tri = load("m003");
    let sys = build_equations(&tri).unwrap();
    let z = C64::new(0.55, 0.84);
    let mut found = 0;
    for partner in m003_partners(z) {
        let shapes = Shapes {
            w0: vec![z, partner],
        };
        let worst = residuals(&sys, &shapes)
            .iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        if worst < 1e-9 {
            found += 1;
            // polishing from the oracle point must stay there
            let rep = solve(&sys, &shapes.w0, &SolveOptions::default()).unwrap();
            assert!((rep.shapes.w0[0] - z).norm() < 1e-8);
        }
    }
    assert!(found >= 1, "no quadratic root satisfied both edge equations");
    // the complete shape is one of the partners of the sixth root
    let partners = m003_partners(sixth_root());
    assert!(partners.iter().any(|p| (p - sixth_root()).norm() < 1e-12));
}

proptest! {
    #[test]
    fn level_relations_hold(re in -2.0f64..3.0, im in 0.05f64..2.5) {
        let z = Complex64::new(re, im);
        let shapes = Shapes { w0: vec![z] };
        let (w0, w1, w2) = (shapes.w(0, 0), shapes.w(0, 1), shapes.w(0, 2));
        prop_assert!((w0 * w1 * w2 + 1.0).norm() < 1e-10 * (1.0 + w1.norm() * w2.norm()));
        prop_assert!((w1 * (1.0 - w0) - 1.0).norm() < 1e-10 * (1.0 + w1.norm()));
        prop_assert!((w2 * (1.0 - w1) - 1.0).norm() < 1e-10 * (1.0 + w2.norm()));
        prop_assert!((w0 * (1.0 - w2) - 1.0).norm() < 1e-10 * (1.0 + w0.norm()));
    }
}
