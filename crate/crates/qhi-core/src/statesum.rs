//! Contraction of the decorated tensor network into a single number and
//! the normalization layers on top of it.

use std::f64::consts::PI;

use thiserror::Error;

use crate::decor::{quantum_logs, skew_pairing, Charge, Flattening};
use crate::dilog::{face_matrices, matrix_r, phi_n, rogers_r1, DilogError};
use crate::gluing::Shapes;
use crate::tensor::Tensor;
use crate::tri::{TriError, Triangulation};
use crate::{principal_log, C64};

#[derive(Debug, Error)]
pub enum StateSumError {
    #[error(transparent)]
    Tri(#[from] TriError),
    #[error(transparent)]
    Dilog(#[from] DilogError),
    #[error("face ({0}, {1}) is unglued; the pattern must be closed")]
    Unglued(usize, usize),
    #[error("order 1 sums need a genuine branching")]
    NotGenuine,
}

/// Tensor slot of each order-position face: slots hold the faces
/// opposite order positions (2, 0, 3, 1).
const SLOT_OF_BFACE: [usize; 4] = [1, 3, 0, 2];
const BFACE_OF_SLOT: [usize; 4] = [2, 0, 3, 1];

/// Root moduli (u0, u1) per tetrahedron at order n.  The decoration
/// twist is reduced mod 2n before exponentiating, so shifting one
/// flattening entry by n reproduces bit-identical moduli.
pub fn quantum_moduli(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
    charge: &Charge,
    n: u32,
) -> Vec<(C64, C64)> {
    let two_n = 2 * n as i64;
    (0..tri.tets)
        .map(|t| {
            let star = tri.star(t) as i64;
            let mk = |k: usize| {
                let root = (principal_log(shapes.w(t, k as u8)) / n as f64).exp();
                let twist =
                    (n as i64 + 1) * (flat.values[t][k] - star * charge.values[t][k]);
                root * C64::from_polar(1.0, PI * twist.rem_euclid(two_n) as f64 / n as f64)
            };
            (mk(0), mk(1))
        })
        .collect()
}

struct Blob {
    t: Tensor,
    /// Pairing id carried by each axis, aligned with the tensor's axes.
    legs: Vec<usize>,
}

/// Raw contraction of the network: one decorated tensor per tetrahedron,
/// a face matrix power on every outgoing slot whose pairing has nonzero
/// color, all pairings summed in index order.
pub fn unnormalized(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
    charge: &Charge,
    n: u32,
) -> Result<C64, StateSumError> {
    let nn = n as usize;
    let colors = tri.colors()?;
    let pb = tri.prebranching()?;
    let fm = face_matrices(nn)?;
    let moduli = quantum_moduli(tri, shapes, flat, charge, n);

    let mut leg_of = vec![usize::MAX; tri.tets * 4];
    for fl in &pb.flows {
        for (t, f) in [fl.out_side, fl.in_side] {
            let bface = tri.b_position(t, f as u8);
            leg_of[t * 4 + SLOT_OF_BFACE[bface]] = fl.pairing;
        }
    }
    for t in 0..tri.tets {
        for s in 0..4 {
            if leg_of[t * 4 + s] == usize::MAX {
                let face = tri.orders[t][BFACE_OF_SLOT[s]] as usize;
                return Err(StateSumError::Unglued(t, face));
            }
        }
    }

    let mut blobs: Vec<Blob> = Vec::with_capacity(tri.tets);
    for t in 0..tri.tets {
        let t4 = matrix_r(nn, tri.star(t), charge.values[t], moduli[t].0, moduli[t].1)?;
        let out_slots = t4.out_slots();
        let mut tensor = Tensor::from_data(&[nn, nn, nn, nn], t4.data().to_vec());
        let mut legs: Vec<usize> = (0..4).map(|s| leg_of[t * 4 + s]).collect();
        for &slot in &out_slots {
            let p = leg_of[t * 4 + slot];
            let r = colors[p];
            if r == 0 {
                continue;
            }
            let pos = legs.iter().position(|&x| x == p).expect("leg present");
            let m = Tensor::from_data(&[nn, nn], fm.q_pow(r));
            tensor = Tensor::contract(&m, &[1], &tensor, &[pos]);
            let mut next = vec![p];
            next.extend(legs.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &l)| l));
            legs = next;
        }
        blobs.push(Blob { t: tensor, legs });
    }

    for p in 0..tri.pairings.len() {
        let holders: Vec<usize> = blobs
            .iter()
            .enumerate()
            .filter(|(_, b)| b.legs.contains(&p))
            .map(|(i, _)| i)
            .collect();
        match holders.as_slice() {
            [] => {} // already absorbed by an earlier multi-leg contraction
            [one] => {
                let b = &mut blobs[*one];
                let ax1 = b.legs.iter().position(|&l| l == p).unwrap();
                let ax2 = b.legs.iter().rposition(|&l| l == p).unwrap();
                debug_assert_ne!(ax1, ax2, "pairing must appear twice");
                b.t = b.t.self_trace(ax1, ax2);
                b.legs.retain(|&l| l != p);
            }
            [i, j] => {
                let keep = *i.min(j);
                let gone = *i.max(j);
                let b = blobs.remove(gone);
                let a = &mut blobs[keep];
                let shared: Vec<usize> =
                    a.legs.iter().copied().filter(|l| b.legs.contains(l)).collect();
                let a_axes: Vec<usize> = shared
                    .iter()
                    .map(|l| a.legs.iter().position(|x| x == l).unwrap())
                    .collect();
                let b_axes: Vec<usize> = shared
                    .iter()
                    .map(|l| b.legs.iter().position(|x| x == l).unwrap())
                    .collect();
                a.t = Tensor::contract(&a.t, &a_axes, &b.t, &b_axes);
                let mut legs: Vec<usize> = a
                    .legs
                    .iter()
                    .copied()
                    .filter(|l| !shared.contains(l))
                    .collect();
                legs.extend(b.legs.iter().copied().filter(|l| !shared.contains(l)));
                a.legs = legs;
            }
            _ => unreachable!("a pairing joins at most two tensors"),
        }
    }

    let mut acc = C64::new(1.0, 0.0);
    for b in blobs {
        debug_assert!(b.legs.is_empty());
        acc *= b.t.into_scalar();
    }
    Ok(acc)
}

/// epsilon_N = (-1)^((N-1)/2).
pub fn eps_n(n: u32) -> f64 {
    if ((n - 1) / 2) % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Normalization in front of the raw sum: 1/N per material vertex, one
/// inverse phase anomaly per color 2 pairing, and the sign
/// eps_N^(v + l - d/2) where d counts diagonal (level 2) edge uses
/// running along their class minus those running against it.
pub fn anomaly_factor(tri: &Triangulation, n: u32) -> Result<C64, StateSumError> {
    let q = tri.count_q()? as i32;
    let v = tri
        .vertex_classes()
        .iter()
        .filter(|vc| vc.euler == 2)
        .count() as i64;
    let classes = tri.edge_classes()?;
    let mut diag: i64 = 0;
    for class in &classes {
        for u in &class.uses {
            if u.level == 2 {
                diag += if u.along_class { 1 } else { -1 };
            }
        }
    }
    debug_assert_eq!(diag % 2, 0, "diagonal defect is even");
    let sign_exp = v + classes.len() as i64 - diag / 2;
    let scale = (n as f64).powi(-(v as i32)) * eps_n(n).powi((sign_exp % 2) as i32);
    let phase = if q == 0 {
        C64::new(1.0, 0.0)
    } else {
        phi_n(n as usize).powi(-q)
    };
    Ok(phase * scale)
}

pub fn invariant(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
    charge: &Charge,
    n: u32,
) -> Result<C64, StateSumError> {
    Ok(anomaly_factor(tri, n)? * unnormalized(tri, shapes, flat, charge, n)?)
}

/// Symmetrization factor: exp of (N-1)/2 times the charge-twisted sum
/// of root branches.
pub fn alpha(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
    charge: &Charge,
    n: u32,
) -> C64 {
    let logs = quantum_logs(tri, shapes, flat, charge, n);
    let mut acc = C64::new(0.0, 0.0);
    for t in 0..tri.tets {
        let c = charge.values[t];
        acc += logs[t][1] * c[0] as f64 - logs[t][0] * c[1] as f64;
    }
    (acc * ((n - 1) / 2) as f64).exp()
}

pub fn reduced(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
    charge: &Charge,
    n: u32,
) -> Result<C64, StateSumError> {
    Ok(invariant(tri, shapes, flat, charge, n)? / alpha(tri, shapes, flat, charge, n))
}

/// Square of the symmetrization factor from boundary weights alone:
/// exp((N-1)/2 ((1/N) <<k_c, k_f>> + i pi <<k_c, h_f>> mod 2)).
pub fn alpha_closed_sq(n: u32, k_c: [i64; 2], k_f: &[C64; 2], h_f: [i64; 2]) -> C64 {
    let kc = [
        C64::new(k_c[0] as f64, 0.0),
        C64::new(k_c[1] as f64, 0.0),
    ];
    let p = skew_pairing(&kc, k_f);
    let q2 = (k_c[0] * h_f[1] + k_c[1] * h_f[0]).rem_euclid(2);
    let inner = p / n as f64 + C64::new(0.0, PI * q2 as f64);
    (inner * ((n - 1) as f64 / 2.0)).exp()
}

/// Order 1 value: product of exponentiated Rogers terms over the
/// tetrahedra.  Only defined for genuine branchings.
pub fn invariant_n1(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
) -> Result<C64, StateSumError> {
    if !tri.is_genuine() {
        return Err(StateSumError::NotGenuine);
    }
    let mut acc = C64::new(1.0, 0.0);
    for t in 0..tri.tets {
        acc *= rogers_r1(
            shapes.w(t, 0),
            flat.values[t][0],
            flat.values[t][1],
            tri.star(t),
        )?;
    }
    Ok(acc * anomaly_factor(tri, 1)?)
}

/// Which root-of-unity ambiguity the invariant carries: the order
/// itself when N = 1 mod 4, or when N = 3 mod 4 with trivial mod 2
/// charge class; twice the order otherwise.
pub fn mu_modulus(n: u32, h_c_trivial: bool) -> u32 {
    if n % 4 == 1 || h_c_trivial {
        n
    } else {
        2 * n
    }
}

/// Representative of a value modulo k-th roots of unity: the modulus
/// and the argument folded into [0, 2 pi / k).
pub fn canonical_phase(z: C64, k: u32) -> (f64, f64) {
    let step = 2.0 * PI / k as f64;
    let mut p = z.arg().rem_euclid(step);
    if p >= step {
        p -= step;
    }
    (z.norm(), p)
}

/// Equality modulo k-th roots of unity, relative in the modulus and
/// circular in the folded phase.
pub fn phase_agrees(a: C64, b: C64, k: u32, tol: f64) -> bool {
    let scale = a.norm().max(b.norm()).max(1e-300);
    if (a.norm() - b.norm()).abs() > tol * scale {
        return false;
    }
    let step = 2.0 * PI / k as f64;
    let (_, pa) = canonical_phase(a, k);
    let (_, pb) = canonical_phase(b, k);
    let d = (pa - pb).abs();
    d.min(step - d) < tol
}
