//! Scalar dilogarithms and the cyclic matrix dilogarithm family.
//!
//! Scalar side: the principal dilogarithm, the Rogers function with the
//! L(1) = 0 normalization, and the Bloch-Wigner function. Matrix side:
//! the order-N tensors attached to decorated tetrahedra, their inverses,
//! and the face operators S, T, Q with their cubing scalar.

use crate::{principal_log, C64};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DilogError {
    #[error("matrix order must be odd and at least 3, got {0}")]
    BadOrder(usize),
    #[error("sign must be +1 or -1, got {0}")]
    BadSign(i32),
    #[error("argument {0} lies on a real branch cut")]
    OnCut(C64),
    #[error("point is off the curve u^N + v^N = 1, residual {0:.3e}")]
    OffCurve(f64),
    #[error("matrix dilogarithm has a pole at u = {0}")]
    OmegaPole(C64),
}

/// B_{2j} for j = 1..=15. With the u-series below this reaches beyond
/// f64 precision for |u| <= 1.3, which covers the reduced region.
const B2: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// Principal-branch dilogarithm, analytic off [1, inf).
///
/// Arguments with |z| > 1 go through the inversion identity, arguments
/// right of Re z = 1/2 through the reflection identity; what remains is
/// summed as the Bernoulli series in u = -log(1 - z), which converges
/// fast on that region.
pub fn li2(z: C64) -> C64 {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let pi2_6 = C64::new(PI * PI / 6.0, 0.0);
    if z == zero {
        return zero;
    }
    if z == one {
        return pi2_6;
    }
    if z.norm_sqr() > 1.0 {
        let lz = principal_log(-z);
        return -li2(one / z) - pi2_6 - 0.5 * lz * lz;
    }
    if z.re > 0.5 {
        return pi2_6 - principal_log(z) * principal_log(one - z) - li2(one - z);
    }
    let u = -principal_log(one - z);
    let u2 = u * u;
    let mut acc = u - 0.25 * u2;
    let mut term = u;
    for (j, b) in B2.iter().enumerate() {
        let j = (j + 1) as f64;
        term *= u2 / (2.0 * j * (2.0 * j + 1.0));
        acc += *b * term;
    }
    acc
}

fn on_real_cut(x: C64) -> bool {
    x.im == 0.0 && (x.re <= 0.0 || x.re >= 1.0)
}

/// Rogers dilogarithm normalized by L(1) = 0, so L(0) = -pi^2/6 and
/// L(1/2) = -pi^2/12. Defined off the rays (-inf, 0] and [1, inf).
pub fn rogers_l(x: C64) -> Result<C64, DilogError> {
    if on_real_cut(x) {
        return Err(DilogError::OnCut(x));
    }
    let one = C64::new(1.0, 0.0);
    Ok(C64::new(-PI * PI / 6.0, 0.0) + 0.5 * principal_log(x) * principal_log(one - x) + li2(x))
}

/// Order-1 value attached to a flattened tetrahedron:
/// exp(sign * ((2/(i pi)) L(x) + p log(1-x) + q log(x))).
pub fn rogers_r1(x: C64, p: i64, q: i64, sign: i32) -> Result<C64, DilogError> {
    if sign != 1 && sign != -1 {
        return Err(DilogError::BadSign(sign));
    }
    let l = rogers_l(x)?;
    let one = C64::new(1.0, 0.0);
    let two_over_ipi = C64::new(0.0, -2.0 / PI);
    let arg =
        two_over_ipi * l + (p as f64) * principal_log(one - x) + (q as f64) * principal_log(x);
    Ok((arg * sign as f64).exp())
}

/// Bloch-Wigner function. Vanishes identically on the real line and is
/// antisymmetric under conjugation.
pub fn bloch_wigner(z: C64) -> f64 {
    if z.im == 0.0 {
        return 0.0;
    }
    li2(z).im + (C64::new(1.0, 0.0) - z).arg() * z.norm().ln()
}

/// Jacobi symbol (a/n) for odd positive n, by the binary algorithm.
pub fn jacobi_symbol(a: i64, n: u64) -> i64 {
    assert!(n % 2 == 1 && n > 0, "modulus must be odd and positive");
    let mut a = a.rem_euclid(n as i64) as u64;
    let mut n = n;
    let mut acc = 1i64;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                acc = -acc;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            acc = -acc;
        }
        a %= n;
    }
    if n == 1 {
        acc
    } else {
        0
    }
}

/// Cubing scalar of the face operator Q at odd order n >= 3: the Jacobi
/// symbol ((n+1)/2 / n), times i when n = 3 mod 4. Never zero because
/// (n+1)/2 is always coprime to n.
pub fn phi_n(n: usize) -> C64 {
    assert!(n % 2 == 1 && n >= 3, "order must be odd and at least 3");
    let m = (n - 1) / 2;
    let j = jacobi_symbol((m + 1) as i64, n as u64) as f64;
    if n % 4 == 1 {
        C64::new(j, 0.0)
    } else {
        C64::new(0.0, j)
    }
}

/// exp(2 pi i k / n) with the exponent reduced mod n first, so large and
/// negative powers stay at full precision.
pub fn zeta_pow(n: usize, k: i64) -> C64 {
    let r = k.rem_euclid(n as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / n as f64)
}

fn check_order(n: usize) -> Result<(), DilogError> {
    if n % 2 == 0 || n < 3 {
        return Err(DilogError::BadOrder(n));
    }
    Ok(())
}

/// The face operators at odd order n, stored row-major with entry
/// (row i, col j) the coefficient carrying basis index j to i.
pub struct FaceMatrices {
    n: usize,
    s: Vec<C64>,
    t: Vec<C64>,
    t_inv: Vec<C64>,
    q: Vec<C64>,
    phi: C64,
}

impl FaceMatrices {
    pub fn order(&self) -> usize {
        self.n
    }
    pub fn s(&self) -> &[C64] {
        &self.s
    }
    pub fn t(&self) -> &[C64] {
        &self.t
    }
    pub fn t_inv(&self) -> &[C64] {
        &self.t_inv
    }
    pub fn q(&self) -> &[C64] {
        &self.q
    }
    pub fn phi(&self) -> C64 {
        self.phi
    }

    /// Entry of Q^r at (row i, col j), with r reduced mod 3 via the
    /// relation Q^3 = phi^-1 I.
    pub fn q_pow(&self, r: u8) -> Vec<C64> {
        let n = self.n;
        match r % 3 {
            0 => {
                let mut id = vec![C64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    id[i * n + i] = C64::new(1.0, 0.0);
                }
                id
            }
            1 => self.q.clone(),
            _ => {
                let mut q2 = vec![C64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..n {
                            acc += self.q[i * n + k] * self.q[k * n + j];
                        }
                        q2[i * n + j] = acc;
                    }
                }
                q2
            }
        }
    }
}

pub fn face_matrices(n: usize) -> Result<FaceMatrices, DilogError> {
    check_order(n)?;
    let m = ((n - 1) / 2) as i64;
    let zero = C64::new(0.0, 0.0);
    let root_n_inv = 1.0 / (n as f64).sqrt();
    let mut s = vec![zero; n * n];
    let mut t = vec![zero; n * n];
    let mut t_inv = vec![zero; n * n];
    let mut q = vec![zero; n * n];
    for i in 0..n {
        for j in 0..n {
            let (ii, jj) = (i as i64, j as i64);
            s[i * n + j] = root_n_inv * zeta_pow(n, ii * jj);
            if (i + j) % n == 0 {
                t[i * n + j] = zeta_pow(n, (m + 1) * ii * ii);
                t_inv[i * n + j] = zeta_pow(n, -(m + 1) * jj * jj);
            }
            q[i * n + j] = root_n_inv * zeta_pow(n, -(m + 1) * ii * ii - ii * jj);
        }
    }
    Ok(FaceMatrices {
        n,
        s,
        t,
        t_inv,
        q,
        phi: phi_n(n),
    })
}

/// Order-N tensor of a decorated tetrahedron. Slots 0..3 hold the state
/// indices on faces (F2, F0, F3, F1) in that order; upper indices always
/// sit on the outgoing faces, which are slots (0, 1) for sign +1 and
/// slots (2, 3) for sign -1. Entries are addressed by slot values, so
/// contraction code never branches on the sign.
#[derive(Clone, Debug)]
pub struct Tensor4 {
    n: usize,
    sign: i32,
    data: Vec<C64>,
}

impl Tensor4 {
    fn zeros(n: usize, sign: i32) -> Self {
        Tensor4 {
            n,
            sign,
            data: vec![C64::new(0.0, 0.0); n * n * n * n],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn sign(&self) -> i32 {
        self.sign
    }

    #[inline]
    fn idx(&self, s0: usize, s1: usize, s2: usize, s3: usize) -> usize {
        ((s0 * self.n + s1) * self.n + s2) * self.n + s3
    }

    pub fn get(&self, s0: usize, s1: usize, s2: usize, s3: usize) -> C64 {
        self.data[self.idx(s0, s1, s2, s3)]
    }

    pub(crate) fn set(&mut self, s0: usize, s1: usize, s2: usize, s3: usize, v: C64) {
        let i = self.idx(s0, s1, s2, s3);
        self.data[i] = v;
    }

    /// Slots whose faces the pre-branching orients outward.
    pub fn out_slots(&self) -> [usize; 2] {
        if self.sign == 1 {
            [0, 1]
        } else {
            [2, 3]
        }
    }

    /// Slots whose faces the pre-branching orients inward.
    pub fn in_slots(&self) -> [usize; 2] {
        if self.sign == 1 {
            [2, 3]
        } else {
            [0, 1]
        }
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn scale(&mut self, w: C64) {
        for x in &mut self.data {
            *x *= w;
        }
    }
}

/// g(x) = prod_{j=1}^{n-1} (1 - x zeta^{-j})^{j/n} with principal
/// fractional powers.
fn g_fn(n: usize, x: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for j in 1..n {
        let f = one - x * zeta_pow(n, -(j as i64));
        acc += (j as f64 / n as f64) * principal_log(f);
    }
    acc.exp()
}

fn check_curve(n: usize, u: C64, v: C64) -> Result<(C64, C64), DilogError> {
    let un = u.powu(n as u32);
    let vn = v.powu(n as u32);
    let res = (un + vn - C64::new(1.0, 0.0)).norm();
    let scale = un.norm().max(vn.norm()).max(1.0);
    if res > 1e-9 * scale {
        return Err(DilogError::OffCurve(res));
    }
    Ok((un, vn))
}

fn check_poles(n: usize, u: C64, include_zero_power: bool) -> Result<(), DilogError> {
    let one = C64::new(1.0, 0.0);
    let start = if include_zero_power { 0 } else { 1 };
    for j in start..n {
        if (one - u * zeta_pow(n, j as i64)).norm() < 1e-12 {
            return Err(DilogError::OmegaPole(u));
        }
    }
    Ok(())
}

/// The basic order-n tensor at a point (u, v) of the curve u^n + v^n = 1.
/// Stored entry [i, j, k, l] is the coefficient with upper indices (i, j)
/// and lower indices (k, l); it vanishes unless l = i + j mod n.
pub fn basic_l(n: usize, u: C64, v: C64) -> Result<Tensor4, DilogError> {
    check_order(n)?;
    check_curve(n, u, v)?;
    check_poles(n, u, false)?;
    let one = C64::new(1.0, 0.0);
    let h = g_fn(n, u) / g_fn(n, one);
    let m = ((n - 1) / 2) as i64;
    let mut omega = vec![one; n];
    for d in 1..n {
        omega[d] = omega[d - 1] * v / (one - u * zeta_pow(n, d as i64));
    }
    let mut t = Tensor4::zeros(n, 1);
    for i in 0..n {
        for j in 0..n {
            let l = (i + j) % n;
            for k in 0..n {
                let d = (i + n - k) % n;
                let phase = zeta_pow(n, (k as i64) * (j as i64) + (m + 1) * (k as i64) * (k as i64));
                t.set(i, j, k, l, h * phase * omega[d]);
            }
        }
    }
    Ok(t)
}

/// Inverse of the basic tensor at the same curve point, stored with the
/// same slot layout: entry [i, j, k, l] has upper indices (k, l) and
/// lower indices (i, j), so sign -1 tensors contract without relabeling.
pub fn basic_l_inv(n: usize, u: C64, v: C64) -> Result<Tensor4, DilogError> {
    check_order(n)?;
    let (un, _) = check_curve(n, u, v)?;
    check_poles(n, u, true)?;
    let one = C64::new(1.0, 0.0);
    let h = g_fn(n, u) / g_fn(n, one);
    let bracket = (one - un) / ((n as f64) * (one - u));
    let m = ((n - 1) / 2) as i64;
    let ushift = u * zeta_pow(n, -1);
    let mut omega = vec![one; n];
    for d in 1..n {
        omega[d] = omega[d - 1] * v / (one - ushift * zeta_pow(n, d as i64));
    }
    let scale = bracket / h;
    let mut t = Tensor4::zeros(n, -1);
    for i in 0..n {
        for j in 0..n {
            let l = (i + j) % n;
            for k in 0..n {
                let d = (i + n - k) % n;
                let phase = zeta_pow(
                    n,
                    -(k as i64) * (j as i64) - (m + 1) * (k as i64) * (k as i64),
                );
                t.set(i, j, k, l, scale * phase / omega[d]);
            }
        }
    }
    Ok(t)
}

/// Decorated tensor of a tetrahedron with the given sign and charge row,
/// evaluated at the quantum moduli (u0, u1). The charge prefactor is an
/// integer power since (n-1)/2 is integral, so no branch choices enter.
pub fn matrix_r(n: usize, sign: i32, c: [i64; 3], u0: C64, u1: C64) -> Result<Tensor4, DilogError> {
    if sign != 1 && sign != -1 {
        return Err(DilogError::BadSign(sign));
    }
    check_order(n)?;
    let v = 1.0 / u1;
    let mut t = if sign == 1 {
        basic_l(n, u0, v)?
    } else {
        basic_l_inv(n, u0, v)?
    };
    let half = ((n - 1) / 2) as i64;
    let e0 = -c[1] * half;
    let e1 = c[0] * half;
    let pref = u0.powi(e0 as i32) * u1.powi(e1 as i32);
    t.scale(pref);
    Ok(t)
}
