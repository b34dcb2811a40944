//! Integer decorations on solved shapes: flattenings select log branches,
//! charges fix parities.  Both live in affine lattices cut out by one sum
//! condition per tetrahedron, one per edge class, and prescribed boundary
//! weights on a peripheral basis.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::cusp::{class_holonomy, ind_decomposition, CuspError, CuspSection};
use crate::gluing::Shapes;
use crate::tri::{TriError, Triangulation};
use crate::{principal_log, zlin, C64};

#[derive(Debug, Error)]
pub enum DecorError {
    #[error(transparent)]
    Tri(#[from] TriError),
    #[error(transparent)]
    Cusp(#[from] CuspError),
    #[error("log branches off the gluing variety: residual {0}")]
    ShapesOffVariety(C64),
    #[error("weight target {value} on basis class {class} must differ from the log part by an integer multiple of i pi")]
    NonIntegerTarget { class: usize, value: C64 },
    #[error("no integer decoration satisfies the constraints")]
    Unsolvable,
}

/// Log branch offsets, one triple per tetrahedron; the level k branch is
/// log w_k + i pi f_k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flattening {
    pub values: Vec<[i64; 3]>,
}

/// Parity charges, one triple per tetrahedron, summing to 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Charge {
    pub values: Vec<[i64; 3]>,
}

impl Flattening {
    pub fn value(&self, tet: usize, level: u8) -> i64 {
        self.values[tet][level as usize]
    }
}

impl Charge {
    pub fn value(&self, tet: usize, level: u8) -> i64 {
        self.values[tet][level as usize]
    }
}

fn pack(flat: &[i64]) -> Vec<[i64; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn offset(base: &[[i64; 3]], null: &[Vec<i64>], coeffs: &[i64]) -> Vec<[i64; 3]> {
    assert_eq!(coeffs.len(), null.len());
    let mut flat: Vec<i64> = base.iter().flatten().copied().collect();
    for (v, &a) in null.iter().zip(coeffs) {
        for (x, &d) in flat.iter_mut().zip(v) {
            *x += a * d;
        }
    }
    pack(&flat)
}

/// Affine family of solutions: any member is particular plus an integer
/// combination of the null directions.
#[derive(Clone, Debug)]
pub struct FlatteningFamily {
    pub particular: Flattening,
    pub null: Vec<Vec<i64>>,
}

impl FlatteningFamily {
    pub fn member(&self, coeffs: &[i64]) -> Flattening {
        Flattening {
            values: offset(&self.particular.values, &self.null, coeffs),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChargeFamily {
    pub particular: Charge,
    pub null: Vec<Vec<i64>>,
}

impl ChargeFamily {
    pub fn member(&self, coeffs: &[i64]) -> Charge {
        Charge {
            values: offset(&self.particular.values, &self.null, coeffs),
        }
    }
}

fn ipi() -> C64 {
    C64::new(0.0, PI)
}

fn near_int(q: C64, tol: f64) -> Option<i64> {
    let r = q.re.round();
    if q.im.abs() <= tol && (q.re - r).abs() <= tol {
        Some(r as i64)
    } else {
        None
    }
}

/// (log w_0 + log w_1 + log w_2) / (i pi); either 1 or -1 away from
/// degenerate shapes.
pub fn tet_sigma(shapes: &Shapes, tet: usize) -> Result<i64, DecorError> {
    let s: C64 = (0..3u8).map(|k| principal_log(shapes.w(tet, k))).sum();
    match near_int(s / ipi(), 1e-8) {
        Some(v) if v == 1 || v == -1 => Ok(v),
        _ => Err(DecorError::ShapesOffVariety(s)),
    }
}

/// Log branches of a flattened shape assignment.
pub fn classical_logs(tri: &Triangulation, shapes: &Shapes, flat: &Flattening) -> Vec<[C64; 3]> {
    (0..tri.tets)
        .map(|t| {
            [0, 1, 2].map(|k| principal_log(shapes.w(t, k as u8)) + ipi() * flat.values[t][k] as f64)
        })
        .collect()
}

/// N-th root branches: (log w_k + i pi (N+1)(f_k - star c_k)) / N.
pub fn quantum_logs(
    tri: &Triangulation,
    shapes: &Shapes,
    flat: &Flattening,
    charge: &Charge,
    n: u32,
) -> Vec<[C64; 3]> {
    (0..tri.tets)
        .map(|t| {
            let star = tri.star(t) as i64;
            [0, 1, 2].map(|k| {
                let twist = flat.values[t][k] - star * charge.values[t][k];
                (principal_log(shapes.w(t, k as u8)) + ipi() * ((n as i64 + 1) * twist) as f64)
                    / n as f64
            })
        })
        .collect()
}

/// Combined exponents of a peripheral class at each (tet, level).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LevelExponents {
    /// Sum of star * ind over passages: coefficients of log-branch weights.
    pub weighted: i64,
    /// Sum of ind alone: coefficients of charge weights.
    pub charge: i64,
    /// Signed passage count: coefficients of the mod 2 classes.
    pub passages: i64,
}

pub fn class_exponents(
    tri: &Triangulation,
    s: &CuspSection,
    coeffs: &[i64],
) -> BTreeMap<(usize, u8), LevelExponents> {
    let mut acc: BTreeMap<(usize, u8), LevelExponents> = BTreeMap::new();
    for (i, &a) in coeffs.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for pd in ind_decomposition(tri, s, &s.fundamental_cycles[i]) {
            let e = acc.entry((pd.tet, pd.level)).or_default();
            e.weighted += a * (pd.star * pd.ind) as i64;
            e.charge += a * pd.ind as i64;
            e.passages += a;
        }
    }
    acc
}

/// Weight of a peripheral class against per-level log branches.
pub fn boundary_weight(
    tri: &Triangulation,
    s: &CuspSection,
    coeffs: &[i64],
    logs: &[[C64; 3]],
) -> C64 {
    class_exponents(tri, s, coeffs)
        .iter()
        .map(|(&(t, l), e)| logs[t][l as usize] * e.weighted as f64)
        .sum()
}

/// Charge weight of a peripheral class (no tetrahedron signs).
pub fn charge_weight(tri: &Triangulation, s: &CuspSection, coeffs: &[i64], charge: &Charge) -> i64 {
    class_exponents(tri, s, coeffs)
        .iter()
        .map(|(&(t, l), e)| e.charge * charge.values[t][l as usize])
        .sum()
}

/// Mod 2 class of an integer decoration along a peripheral class: the
/// parity of the faced values, ignoring signs and indices.
pub fn gamma2(tri: &Triangulation, s: &CuspSection, coeffs: &[i64], values: &[[i64; 3]]) -> i64 {
    class_exponents(tri, s, coeffs)
        .iter()
        .map(|(&(t, l), e)| e.passages * values[t][l as usize])
        .sum::<i64>()
        .rem_euclid(2)
}

/// Principal log of the class holonomy.
pub fn dilation_log(tri: &Triangulation, s: &CuspSection, shapes: &Shapes, coeffs: &[i64]) -> C64 {
    principal_log(class_holonomy(tri, s, shapes, coeffs))
}

/// Pairing of two weights given by their values on an oriented basis:
/// k(l) k'(m) - k(m) k'(l).
pub fn skew_pairing(k: &[C64; 2], kp: &[C64; 2]) -> C64 {
    k[0] * kp[1] - k[1] * kp[0]
}

struct System {
    cols: usize,
    rows: Vec<Vec<i64>>,
    rhs: Vec<i64>,
}

impl System {
    fn new(cols: usize) -> Self {
        System {
            cols,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<i64>, b: i64) {
        debug_assert_eq!(row.len(), self.cols);
        self.rows.push(row);
        self.rhs.push(b);
    }

    /// Solve and keep only the leading `main` coordinates.
    fn solve(self, main: usize) -> Result<(Vec<i64>, Vec<Vec<i64>>), DecorError> {
        let sol = zlin::solve_linear(&self.rows, &self.rhs).ok_or(DecorError::Unsolvable)?;
        let null = sol
            .null_basis
            .iter()
            .map(|v| v[..main].to_vec())
            .filter(|v| v.iter().any(|&x| x != 0))
            .collect();
        Ok((sol.particular[..main].to_vec(), null))
    }
}

fn idx(tet: usize, level: u8) -> usize {
    3 * tet + level as usize
}

/// Solve for flattenings at solved shapes with prescribed boundary
/// weights on the given peripheral basis.  Optional pins fix single
/// values (tet, level, value); `even_peripheral` restricts to solutions
/// whose mod 2 class vanishes on the basis.
pub fn solve_flattenings(
    tri: &Triangulation,
    shapes: &Shapes,
    section: &CuspSection,
    basis: &[Vec<i64>; 2],
    targets: [C64; 2],
    pins: &[(usize, u8, i64)],
    even_peripheral: bool,
) -> Result<FlatteningFamily, DecorError> {
    let main = 3 * tri.tets;
    let aux = if even_peripheral { 2 } else { 0 };
    let mut sys = System::new(main + aux);

    for t in 0..tri.tets {
        let mut row = vec![0i64; sys.cols];
        for k in 0..3u8 {
            row[idx(t, k)] = 1;
        }
        sys.push(row, -tet_sigma(shapes, t)?);
    }

    for class in tri.edge_classes()? {
        let mut row = vec![0i64; sys.cols];
        let mut logsum = C64::new(0.0, 0.0);
        for u in &class.uses {
            let star = tri.star(u.tet) as i64;
            row[idx(u.tet, u.level)] += star;
            logsum += principal_log(shapes.w(u.tet, u.level)) * star as f64;
        }
        let k2 = near_int(logsum / ipi(), 1e-8).ok_or(DecorError::ShapesOffVariety(logsum))?;
        if k2 % 2 != 0 {
            return Err(DecorError::ShapesOffVariety(logsum));
        }
        sys.push(row, -k2);
    }

    for (i, coeffs) in basis.iter().enumerate() {
        let exps = class_exponents(tri, section, coeffs);
        let mut row = vec![0i64; sys.cols];
        let mut logpart = C64::new(0.0, 0.0);
        for (&(t, l), e) in &exps {
            row[idx(t, l)] = e.weighted;
            logpart += principal_log(shapes.w(t, l)) * e.weighted as f64;
        }
        let m = near_int((targets[i] - logpart) / ipi(), 1e-8).ok_or(
            DecorError::NonIntegerTarget {
                class: i,
                value: targets[i],
            },
        )?;
        sys.push(row, m);
        if even_peripheral {
            let mut prow = vec![0i64; sys.cols];
            for (&(t, l), e) in &exps {
                prow[idx(t, l)] = e.passages;
            }
            prow[main + i] = -2;
            sys.push(prow, 0);
        }
    }

    for &(t, l, v) in pins {
        let mut row = vec![0i64; sys.cols];
        row[idx(t, l)] = 1;
        sys.push(row, v);
    }

    let (part, null) = sys.solve(main)?;
    Ok(FlatteningFamily {
        particular: Flattening { values: pack(&part) },
        null,
    })
}

/// Solve for charges with prescribed charge weights on the basis.
pub fn solve_charges(
    tri: &Triangulation,
    section: &CuspSection,
    basis: &[Vec<i64>; 2],
    targets: [i64; 2],
    pins: &[(usize, u8, i64)],
    even_peripheral: bool,
) -> Result<ChargeFamily, DecorError> {
    let main = 3 * tri.tets;
    let aux = if even_peripheral { 2 } else { 0 };
    let mut sys = System::new(main + aux);

    for t in 0..tri.tets {
        let mut row = vec![0i64; sys.cols];
        for k in 0..3u8 {
            row[idx(t, k)] = 1;
        }
        sys.push(row, 1);
    }

    for class in tri.edge_classes()? {
        let mut row = vec![0i64; sys.cols];
        for u in &class.uses {
            row[idx(u.tet, u.level)] += 1;
        }
        sys.push(row, 2);
    }

    for (i, coeffs) in basis.iter().enumerate() {
        let exps = class_exponents(tri, section, coeffs);
        let mut row = vec![0i64; sys.cols];
        for (&(t, l), e) in &exps {
            row[idx(t, l)] = e.charge;
        }
        sys.push(row, targets[i]);
        if even_peripheral {
            let mut prow = vec![0i64; sys.cols];
            for (&(t, l), e) in &exps {
                prow[idx(t, l)] = e.passages;
            }
            prow[main + i] = -2;
            sys.push(prow, 0);
        }
    }

    for &(t, l, v) in pins {
        let mut row = vec![0i64; sys.cols];
        row[idx(t, l)] = 1;
        sys.push(row, v);
    }

    let (part, null) = sys.solve(main)?;
    Ok(ChargeFamily {
        particular: Charge { values: pack(&part) },
        null,
    })
}
