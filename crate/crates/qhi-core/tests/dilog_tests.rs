//! Scalar and matrix dilogarithm tests against independent oracles.

mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use qhi_core::dilog::*;
use qhi_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// ---------------------------------------------------------------- scalars

#[test]
fn li2_known_values() {
    let pi2 = PI * PI;
    assert_close(li2(c(1.0, 0.0)), c(pi2 / 6.0, 0.0), 1e-13, "Li2(1)");
    assert_close(li2(c(-1.0, 0.0)), c(-pi2 / 12.0, 0.0), 1e-13, "Li2(-1)");
    let half = pi2 / 12.0 - 0.5 * (2.0_f64.ln()).powi(2);
    assert_close(li2(c(0.5, 0.0)), c(half, 0.0), 1e-13, "Li2(1/2)");
    assert_close(li2(c(0.0, 0.0)), c(0.0, 0.0), 1e-15, "Li2(0)");
}

#[test]
fn li2_matches_quadrature_oracle() {
    let pts = [
        c(0.3, 0.4),
        c(-0.7, 0.2),
        c(0.5, 0.866025403784),
        c(-2.5, 1.0),
        c(0.9, -0.1),
        c(3.0, 2.0),
        c(-4.0, -3.0),
        c(0.1, -0.9),
        c(0.99, 0.01),
    ];
    for z in pts {
        assert_close(li2(z), li2_quadrature(z), 1e-10, &format!("Li2({z})"));
    }
}

#[test]
fn li2_matches_series_in_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let z = c(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
        assert_close(li2(z), li2_series(z), 1e-12, &format!("Li2({z}) series"));
    }
}

#[test]
fn rogers_l_matches_integral_oracle() {
    // L(1/2) = -pi^2/12 exactly.
    let at_half = rogers_l(c(0.5, 0.0)).unwrap();
    assert_close(at_half, c(-PI * PI / 12.0, 0.0), 1e-13, "L(1/2)");
    assert_close(
        at_half,
        rogers_l_quadrature(c(0.5, 0.0)),
        1e-10,
        "L(1/2) vs quadrature",
    );
    for x in [c(0.3, 0.4), c(0.5, 0.866), c(0.8, 0.1), c(0.2, -0.3)] {
        assert_close(
            rogers_l(x).unwrap(),
            rogers_l_quadrature(x),
            1e-9,
            &format!("L({x}) vs quadrature"),
        );
    }
}

#[test]
fn rogers_l_endpoint_normalization() {
    // L(1) = 0 normalization, approached from inside the domain.
    let near_one = rogers_l(c(1.0 - 1e-9, 1e-12)).unwrap();
    assert!(near_one.norm() < 1e-7, "L near 1 = {near_one}");
    // L(x) -> -pi^2/6 as x -> 0.
    let near_zero = rogers_l(c(1e-9, 1e-12)).unwrap();
    assert_close(near_zero, c(-PI * PI / 6.0, 0.0), 1e-7, "L near 0");
}

#[test]
fn rogers_l_rejects_cuts() {
    assert!(rogers_l(c(-0.5, 0.0)).is_err());
    assert!(rogers_l(c(1.5, 0.0)).is_err());
    assert!(rogers_l(c(0.0, 0.0)).is_err());
    assert!(rogers_l(c(0.5, 0.0)).is_ok());
}

#[test]
fn bloch_wigner_regular_tet_value() {
    // 2 D2(exp(i pi/3)) is the volume of the figure-eight complement.
    let z = C64::from_polar(1.0, PI / 3.0);
    let d2 = bloch_wigner(z);
    assert!((d2 - 1.0149416064096536).abs() < 1e-12, "D2 = {d2}");
    // Independent: quadrature of Li2 + the defining combination.
    let oracle = li2_quadrature(z).im + (C64::new(1.0, 0.0) - z).arg() * z.norm().ln();
    assert!((d2 - oracle).abs() < 1e-10);
}

#[test]
fn bloch_wigner_vanishes_on_reals_and_flips_under_conjugation() {
    for x in [-3.0, -0.5, 0.0, 0.3, 1.0, 2.5] {
        assert_eq!(bloch_wigner(c(x, 0.0)), 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(0.05..2.0));
        let d = bloch_wigner(z) + bloch_wigner(z.conj());
        assert!(d.abs() < 1e-12, "antisymmetry fails at {z}: {d}");
    }
}

#[test]
fn rogers_r1_sign_inversion_and_limit() {
    let x = c(0.4, 0.7);
    let plus = rogers_r1(x, 3, -2, 1).unwrap();
    let minus = rogers_r1(x, 3, -2, -1).unwrap();
    assert_close(plus * minus, c(1.0, 0.0), 1e-12, "R1 sign inversion");
    // p = q = 0 near x -> 1: value tends to exp(0) = 1.
    let near = rogers_r1(c(1.0 - 1e-8, 1e-10), 0, 0, 1).unwrap();
    assert!((near - c(1.0, 0.0)).norm() < 1e-5, "R1 near 1 = {near}");
    assert!(rogers_r1(c(-1.0, 0.0), 0, 0, 1).is_err());
}

proptest! {
    #[test]
    fn prop_bloch_wigner_antisymmetric(re in -3.0f64..3.0, im in 0.01f64..3.0) {
        let z = c(re, im);
        prop_assert!((bloch_wigner(z) + bloch_wigner(z.conj())).abs() < 1e-11);
    }

    #[test]
    fn prop_li2_reflection(re in -0.9f64..0.9, im in 0.05f64..1.5) {
        // Li2(z) + Li2(1-z) = pi^2/6 - log(z) log(1-z), upper half plane.
        let z = c(re, im);
        let one = c(1.0, 0.0);
        let lhs = li2(z) + li2(one - z);
        let rhs = c(PI * PI / 6.0, 0.0) - z.ln() * (one - z).ln();
        prop_assert!((lhs - rhs).norm() < 1e-11, "reflection at {} -> {}", z, (lhs - rhs).norm());
    }

    #[test]
    fn prop_rogers_r1_integer_shifts(p in -4i64..4, q in -4i64..4) {
        // Integer flattening shifts multiply R1 by explicit half-integer powers.
        let x = c(0.35, 0.55);
        let base = rogers_r1(x, 0, 0, 1).unwrap();
        let shifted = rogers_r1(x, p, q, 1).unwrap();
        let expect = base * ((c(1.0,0.0) - x).ln() * p as f64 + x.ln() * q as f64).exp();
        prop_assert!((shifted - expect).norm() < 1e-10 * expect.norm());
    }
}

// ----------------------------------------------------- number theory bits

#[test]
fn jacobi_matches_bruteforce_oracle() {
    for n in (3u64..60).step_by(2) {
        for a in -20i64..20 {
            assert_eq!(
                jacobi_symbol(a, n),
                jacobi_bruteforce(a, n),
                "jacobi({a}/{n})"
            );
        }
    }
}

#[test]
fn phi_n_from_legendre_formula() {
    for n in [3usize, 5, 7, 9, 11, 13] {
        let m = (n - 1) / 2;
        let j = jacobi_bruteforce((m + 1) as i64, n as u64) as f64;
        let expect = if n % 4 == 1 { c(j, 0.0) } else { c(0.0, j) };
        assert_close(phi_n(n), expect, 0.0, &format!("phi_{n}"));
    }
    // Spot value from the derivation: phi_3 = -i.
    assert_close(phi_n(3), c(0.0, -1.0), 0.0, "phi_3");
}

// ------------------------------------------------------------ face matrices

#[test]
fn face_matrix_identities_all_small_n() {
    for n in [3usize, 5, 7, 9, 11] {
        let fm = face_matrices(n).unwrap();
        let s = DMatrix::from_row_slice(n, n, fm.s());
        let t = DMatrix::from_row_slice(n, n, fm.t());
        let q = DMatrix::from_row_slice(n, n, fm.q());
        let id = DMatrix::<C64>::identity(n, n);

        let s4 = &s * &s * &s * &s;
        assert!((s4 - &id).norm() < 1e-12 * n as f64, "S^4 != I at N={n}");

        let st = &s * &t;
        let st3 = &st * &st * &st;
        let rhs = (&s * &s) * fm.phi();
        assert!((st3 - rhs).norm() < 1e-12 * n as f64, "(ST)^3 != phi S^2 at N={n}");

        let q3 = &q * &q * &q;
        let rhs = &id * (C64::new(1.0, 0.0) / fm.phi());
        assert!((q3 - rhs).norm() < 1e-12 * n as f64, "Q^3 != phi^-1 I at N={n}");

        // (S^-1 T)^3 = phi I, using S^-1 = S^3.
        let sinv = &s * &s * &s;
        let sit = &sinv * &t;
        let sit3 = &sit * &sit * &sit;
        assert!(
            (sit3 - &id * fm.phi()).norm() < 1e-12 * n as f64,
            "(S^-1 T)^3 != phi I at N={n}"
        );

        // Q = T^-1 S by construction.
        let tinv = DMatrix::from_row_slice(n, n, fm.t_inv());
        assert!(((&tinv * &t) - &id).norm() < 1e-12 * n as f64, "T^-1 at N={n}");
        assert!(((&tinv * &s) - &q).norm() < 1e-12 * n as f64, "Q = T^-1 S at N={n}");
    }
}

#[test]
fn face_matrices_reject_even_order() {
    assert!(face_matrices(4).is_err());
    assert!(face_matrices(1).is_err());
}

// ------------------------------------------------------------- basic_L

/// A random point on the curve u^N + v^N = 1 with u in the upper half
/// plane, away from the omega poles.
fn curve_point(rng: &mut ChaCha8Rng, n: usize) -> (C64, C64) {
    loop {
        let u = c(rng.gen_range(-0.9..0.9), rng.gen_range(0.15..0.9));
        let un = u.powu(n as u32);
        let v = (C64::new(1.0, 0.0) - un).powf(1.0 / n as f64);
        if (u.norm() - 1.0).abs() < 0.05 || v.norm() < 0.05 {
            continue;
        }
        return (u, v);
    }
}

#[test]
fn basic_l_delta_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 5;
    let (u, v) = curve_point(&mut rng, n);
    let t = basic_l(n, u, v).unwrap();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if (i + j) % n != l % n {
                        assert_eq!(t.get(i, j, k, l), c(0.0, 0.0));
                    }
                }
            }
        }
    }
}

fn as_matrix_upper_lower(t: &Tensor4) -> DMatrix<C64> {
    // rows (i,j) = slots 0,1; cols (k,l) = slots 2,3
    let n = t.order();
    DMatrix::from_fn(n * n, n * n, |r, cidx| {
        t.get(r / n, r % n, cidx / n, cidx % n)
    })
}

#[test]
fn basic_l_inverse_is_two_sided() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in [3usize, 5, 7] {
        for _ in 0..4 {
            let (u, v) = curve_point(&mut rng, n);
            let l = basic_l(n, u, v).unwrap();
            let linv = basic_l_inv(n, u, v).unwrap();
            // Stored layout: L at [i,j,k,l] is L^{i,j}_{k,l}; the inverse at
            // [i,j,k,l] is (L^-1)^{k,l}_{i,j}. As matrices rows=(first two
            // slots): M_l[(ij),(kl)], M_inv[(ij),(kl)] with the (ij) of the
            // inverse being its LOWER indices, so M_l * M_inv^T = I.
            let ml = as_matrix_upper_lower(&l);
            let mi = as_matrix_upper_lower(&linv);
            let id = DMatrix::<C64>::identity(n * n, n * n);
            let p1 = &ml * mi.transpose();
            let p2 = mi.transpose() * &ml;
            assert!(
                (p1 - &id).norm() < 1e-10 * (n * n) as f64,
                "L L^-1 != I at N={n}, u={u}"
            );
            assert!(
                (p2 - &id).norm() < 1e-10 * (n * n) as f64,
                "L^-1 L != I at N={n}, u={u}"
            );
        }
    }
}

#[test]
fn basic_l_determinant_modulus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [3usize, 5] {
        let (u, v) = curve_point(&mut rng, n);
        let m = as_matrix_upper_lower(&basic_l(n, u, v).unwrap());
        let det = m.determinant();
        assert!(
            (det.norm() - 1.0).abs() < 1e-9,
            "|det L_{n}| = {} at u={u}",
            det.norm()
        );
    }
}

#[test]
fn basic_l_rejects_bad_input() {
    // Off the curve.
    assert!(matches!(
        basic_l(5, c(0.3, 0.4), c(0.9, 0.0)),
        Err(DilogError::OffCurve(_))
    ));
    // Omega pole: u a root of unity makes some 1 - u zeta^j vanish.
    let n = 5;
    let zeta = C64::from_polar(1.0, 2.0 * PI / n as f64);
    let u = 1.0 / zeta;
    let v = (C64::new(1.0, 0.0) - u.powu(n as u32)).powf(1.0 / n as f64);
    assert!(basic_l(n, u, v).is_err());
}

// ------------------------------------------------------------- matrix_R

#[test]
fn matrix_r_unit_prefactor_charge() {
    // c = (0,0,1) has c0 = c1 = 0, so the prefactor is 1 and the tensor
    // is the basic one evaluated at (u0, 1/u1).
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 5;
    let (u0, w) = curve_point(&mut rng, n);
    let u1 = 1.0 / w; // then u0^N + u1^-N = 1 as required
    let r = matrix_r(n, 1, [0, 0, 1], u0, u1).unwrap();
    let l = basic_l(n, u0, 1.0 / u1).unwrap();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l_ in 0..n {
                    assert_close(
                        r.get(i, j, k, l_),
                        l.get(i, j, k, l_),
                        1e-12,
                        "R vs L entry",
                    );
                }
            }
        }
    }
    assert_eq!(r.sign(), 1);
    assert_eq!(r.out_slots(), [0, 1]);
    assert_eq!(r.in_slots(), [2, 3]);
}

#[test]
fn matrix_r_prefactor_is_integer_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 7;
    let (u0, w) = curve_point(&mut rng, n);
    let u1 = 1.0 / w;
    let carr = [2i64, -1, 0];
    let r = matrix_r(n, 1, carr, u0, u1).unwrap();
    let l = basic_l(n, u0, 1.0 / u1).unwrap();
    let half = ((n - 1) / 2) as i32;
    let pref = u0.powi(-carr[1] as i32 * half) * u1.powi(carr[0] as i32 * half);
    for (i, j, k, l_) in [(0, 0, 0, 0), (1, 2, 3, 3), (2, 2, 1, 4)] {
        assert_close(
            r.get(i, j, k, l_),
            pref * l.get(i, j, k, l_),
            1e-11 * pref.norm(),
            "prefactor entry",
        );
    }
}

#[test]
fn matrix_r_negative_sign_contracts_to_identity_with_positive() {
    // R(+1) and R(-1) at the same decorated point are mutually inverse up
    // to the squared prefactor: contracting upper with lower indices must
    // give pref^2 * I.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 3;
    let (u0, w) = curve_point(&mut rng, n);
    let u1 = 1.0 / w;
    let carr = [1i64, 1, -1];
    let rp = matrix_r(n, 1, carr, u0, u1).unwrap();
    let rm = matrix_r(n, -1, carr, u0, u1).unwrap();
    assert_eq!(rm.out_slots(), [2, 3]);
    assert_eq!(rm.in_slots(), [0, 1]);
    let half = ((n - 1) / 2) as i32;
    let pref = u0.powi(-carr[1] as i32 * half) * u1.powi(carr[0] as i32 * half);
    // rp stored [i,j,k,l] = pref L^{ij}_{kl}; rm stored [i,j,k,l] =
    // pref (L^-1)^{kl}_{ij}. Sum over (k,l): pref^2 δ.
    let mp = as_matrix_upper_lower(&rp);
    let mm = as_matrix_upper_lower(&rm);
    let prod = mp * mm.transpose();
    let id = DMatrix::<C64>::identity(n * n, n * n);
    assert!(
        (prod - id * (pref * pref)).norm() < 1e-10 * (pref * pref).norm() * (n * n) as f64,
        "R(+)R(-) != pref^2 I"
    );
}
