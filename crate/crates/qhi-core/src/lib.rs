//! Quantum hyperbolic invariants of one-cusped hyperbolic 3-manifolds.
//!
//! The pipeline: load an ideal triangulation with a weak branching
//! ([`tri`]), solve its gluing equations ([`gluing`]), pick integer
//! flattenings and charges realizing prescribed boundary weights
//! ([`decor`]), build the matrix dilogarithm tensors ([`dilog`]) and
//! contract the resulting network ([`statesum`]). Triangulation moves
//! that carry all of this data along live in [`moves`].

pub mod cusp;
pub mod decor;
pub mod dilog;
pub mod gluing;
pub mod moves;
pub mod statesum;
pub mod tensor;
pub mod tri;
pub mod zlin;

pub type C64 = num_complex::Complex64;

/// Branch of log with imaginary part in (-pi, pi].
///
/// `Complex::ln` returns Im in [-pi, pi]; the lower endpoint is bumped
/// so negative reals land on +i*pi, matching the convention used for
/// log-branches throughout.
pub fn principal_log(z: C64) -> C64 {
    let l = z.ln();
    if l.im == -std::f64::consts::PI {
        C64::new(l.re, std::f64::consts::PI)
    } else {
        l
    }
}
