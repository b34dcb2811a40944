//! Independent numerical oracles shared by the integration tests.
//!
//! Everything here is derived straight from defining integrals/series or
//! brute-force number theory, never from the library code under test.

#![allow(dead_code)]

use qhi_core::C64;

pub const PI: f64 = std::f64::consts::PI;

/// Adaptive Simpson quadrature of a complex-valued function on [a, b].
pub fn simpson<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, tol: f64) -> C64 {
    fn simpson_rule<F: Fn(f64) -> C64>(f: &F, a: f64, fa: C64, b: f64, fb: C64) -> (C64, C64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    fn rec<F: Fn(f64) -> C64>(
        f: &F,
        a: f64,
        fa: C64,
        b: f64,
        fb: C64,
        whole: C64,
        fm: C64,
        tol: f64,
        depth: u32,
    ) -> C64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson_rule(f, a, fa, m, fm);
        let (right, frm) = simpson_rule(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth > 48 || delta.norm() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, flm, tol / 2.0, depth + 1)
                + rec(f, m, fm, b, fb, right, frm, tol / 2.0, depth + 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson_rule(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, fm, tol, 0)
}

/// Dilogarithm by quadrature of its defining integral
/// Li2(z) = -∫_0^1 log(1 - z t)/t dt (z off [1, ∞)).
pub fn li2_quadrature(z: C64) -> C64 {
    if z.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let f = |t: f64| -> C64 {
        if t < 1e-14 {
            z
        } else {
            -(C64::new(1.0, 0.0) - z * t).ln() / t
        }
    };
    simpson(&f, 0.0, 1.0, 1e-13)
}

/// Dilogarithm by power series (only for |z| <= 0.6, direct definition).
pub fn li2_series(z: C64) -> C64 {
    assert!(z.norm() <= 0.6 + 1e-12);
    let mut acc = C64::new(0.0, 0.0);
    let mut zp = C64::new(1.0, 0.0);
    for k in 1..200 {
        zp *= z;
        acc += zp / ((k * k) as f64);
    }
    acc
}

/// Rogers function by quadrature of its defining integral with the
/// L(1) = 0 normalization:
/// L(x) = -pi^2/6 - (1/2) ∫_0^x (log(1-t)/t + log(t)/(1-t)) dt.
///
/// The path runs 0 → delta on the real axis (handled by series, the
/// integrand has a log singularity at 0) and then straight to x.
pub fn rogers_l_quadrature(x: C64) -> C64 {
    let delta = 0.05_f64;
    // ∫_0^d log(1-t)/t dt = -Σ d^k/k^2
    let mut part1 = 0.0;
    let mut dp = 1.0;
    for k in 1..60 {
        dp *= delta;
        part1 -= dp / ((k * k) as f64);
    }
    // ∫_0^d log(t)/(1-t) dt = Σ_k d^(k+1) (log d /(k+1) - 1/(k+1)^2)
    let mut part2 = 0.0;
    let mut dp = 1.0;
    let ld = delta.ln();
    for k in 0..60 {
        dp *= delta;
        let kk = (k + 1) as f64;
        part2 += dp * (ld / kk - 1.0 / (kk * kk));
    }
    let d = C64::new(delta, 0.0);
    let seg = x - d;
    let g = |s: f64| -> C64 {
        let t = d + seg * s;
        let one = C64::new(1.0, 0.0);
        ((one - t).ln() / t + t.ln() / (one - t)) * seg
    };
    let integral = C64::new(part1 + part2, 0.0) + simpson(&g, 0.0, 1.0, 1e-13);
    C64::new(-PI * PI / 6.0, 0.0) - 0.5 * integral
}

/// x^e mod n by repeated squaring.
pub fn modpow(mut x: u64, mut e: u64, n: u64) -> u64 {
    let mut acc = 1u64 % n;
    x %= n;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * x % n;
        }
        x = x * x % n;
        e >>= 1;
    }
    acc
}

/// Legendre symbol by the Euler criterion (p an odd prime).
pub fn legendre_euler(a: i64, p: u64) -> i64 {
    let ar = a.rem_euclid(p as i64) as u64;
    let r = modpow(ar, (p - 1) / 2, p);
    if r == 0 {
        0
    } else if r == 1 {
        1
    } else if r == p - 1 {
        -1
    } else {
        panic!("euler criterion gave {r} mod {p}; {p} is not prime")
    }
}

/// Jacobi symbol by trial-division factorization + Euler criterion.
pub fn jacobi_bruteforce(a: i64, n: u64) -> i64 {
    assert!(n % 2 == 1 && n > 0);
    let mut n = n;
    let mut acc = 1i64;
    let mut p = 3u64;
    while p * p <= n {
        while n % p == 0 {
            acc *= legendre_euler(a, p);
            n /= p;
        }
        p += 2;
    }
    if n > 1 {
        acc *= legendre_euler(a, n);
    }
    acc
}

pub fn assert_close(a: C64, b: C64, tol: f64, what: &str) {
    let d = (a - b).norm();
    assert!(
        d <= tol,
        "{what}: {a} vs {b} differ by {d:.3e} (tol {tol:.1e})"
    );
}
