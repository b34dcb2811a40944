//! Cusp cross-section: the triangulated link of an ideal vertex, normal
//! loops on it, development of shapes along loops, and a peripheral
//! homology basis.
//!
//! A link triangle is a tetrahedron corner (t, v).  Its three corners sit
//! on the edges {v, u}; its side in face f misses the corner u = f.  The
//! ccw corner cycle is the one making (v, u0, u1, u2) an odd permutation,
//! which lines corner moduli up with the level succession m' = 1/(1-m)
//! for both tet signs.  Entering a triangle through the side in face f
//! fixes a directed corner pair (tail, head); a passage facing corner X
//! multiplies the development by the corner modulus when X = tail and by
//! its inverse when X = head.

use crate::gluing::{EdgeEquation, Shapes};
use crate::tri::{perm_inverse, perm_sign, TriError, Triangulation};
use crate::zlin::smith;
use crate::C64;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CuspError {
    #[error(transparent)]
    Tri(#[from] TriError),
    #[error("no vertex class {0}")]
    NoSuchCusp(usize),
    #[error("vertex class {0} has Euler characteristic {1}, not a torus")]
    NotTorus(usize, i64),
    #[error("link orientation inconsistent across side gluing {0}")]
    MixedOrientation(usize),
    #[error("peripheral rank {0}, expected 2")]
    BadRank(usize),
    #[error("holonomy is not translational at these shapes; orient the basis at a complete solution")]
    NotTranslational,
    #[error("degenerate peripheral frame")]
    DegenerateFrame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Passage {
    pub triangle: usize,
    pub f_in: u8,
    pub f_out: u8,
}

#[derive(Clone, Debug)]
pub struct NormalLoop {
    pub passages: Vec<Passage>,
}

#[derive(Clone, Copy, Debug)]
pub struct DualEdge {
    pub a: usize,
    pub a_face: u8,
    pub b: usize,
    pub b_face: u8,
    pub pairing: usize,
}

#[derive(Clone, Debug)]
pub struct CuspSection {
    pub cusp: usize,
    /// Link triangles (tet, vertex), sorted.
    pub triangles: Vec<(usize, u8)>,
    /// Per triangle, the ccw cycle of corners u.
    pub corner_cycles: Vec<[u8; 3]>,
    pub dual_edges: Vec<DualEdge>,
    /// One loop per non-tree dual edge; a basis of the cycle space.
    pub fundamental_cycles: Vec<NormalLoop>,
    /// Rotation loop around each link vertex; these span the kernel of
    /// the map from the cycle space onto peripheral homology.
    pub relations: Vec<NormalLoop>,
    /// Peripheral basis as coefficients over fundamental_cycles.  The
    /// handedness is fixed separately by `oriented_basis`.
    pub basis: [Vec<i64>; 2],
    /// Dual edge index of each fundamental cycle.
    pub nontree: Vec<usize>,
    /// BFS tree: how each triangle was first reached (edge, direction).
    pub parent: Vec<Option<(usize, bool)>>,
    /// Triangles in BFS discovery order.
    pub bfs_order: Vec<usize>,
}

/// Per-passage contribution of a normal loop: the faced edge
/// {vertex, cut} of tet, its level, the tet sign, and the index.
#[derive(Clone, Copy, Debug)]
pub struct PassageData {
    pub tet: usize,
    pub vertex: u8,
    pub cut: u8,
    pub level: u8,
    pub star: i32,
    pub ind: i32,
}

fn cycle_for(v: u8) -> [u8; 3] {
    let others: Vec<u8> = (0u8..4).filter(|&x| x != v).collect();
    let (a, b, c) = (others[0], others[1], others[2]);
    if perm_sign([v, a, b, c]) == -1 {
        [a, b, c]
    } else {
        [a, c, b]
    }
}

/// Directed corner pair (tail, head) of the side in face f, consecutive
/// in the ccw corner cycle.
fn side_pair(cycle: [u8; 3], f: u8) -> (u8, u8) {
    if f == cycle[0] {
        (cycle[1], cycle[2])
    } else if f == cycle[1] {
        (cycle[2], cycle[0])
    } else {
        (cycle[0], cycle[1])
    }
}

/// For each (tet, face): (pairing index, image tet, image face, vertex map
/// applied from this side).
fn glue_table(tri: &Triangulation) -> Vec<Option<(usize, usize, u8, [u8; 4])>> {
    let mut table = vec![None; tri.tets * 4];
    for (p, pr) in tri.pairings.iter().enumerate() {
        let (t0, f0) = pr.from;
        let (t1, f1) = pr.to;
        table[t0 * 4 + f0] = Some((p, t1, f1 as u8, pr.map));
        table[t1 * 4 + f1] = Some((p, t0, f0 as u8, perm_inverse(pr.map)));
    }
    table
}

pub fn build_cusp_section(tri: &Triangulation, cusp: usize) -> Result<CuspSection, CuspError> {
    tri.validate()?;
    let vcs = tri.vertex_classes();
    let class = vcs.get(cusp).ok_or(CuspError::NoSuchCusp(cusp))?;
    if class.euler != 0 {
        return Err(CuspError::NotTorus(cusp, class.euler));
    }
    let mut triangles: Vec<(usize, u8)> = class.corners.clone();
    triangles.sort();
    let index: BTreeMap<(usize, u8), usize> = triangles
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let corner_cycles: Vec<[u8; 3]> = triangles.iter().map(|&(_, v)| cycle_for(v)).collect();

    // side gluings restricted to this cusp
    let mut dual_edges = Vec::new();
    for (p, pr) in tri.pairings.iter().enumerate() {
        let (t0, f0) = pr.from;
        let (t1, f1) = pr.to;
        for v in 0u8..4 {
            if v as usize == f0 {
                continue;
            }
            if let Some(&a) = index.get(&(t0, v)) {
                let b = index[&(t1, pr.map[v as usize])];
                dual_edges.push(DualEdge {
                    a,
                    a_face: f0 as u8,
                    b,
                    b_face: f1 as u8,
                    pairing: p,
                });
            }
        }
    }

    // the directed side pairs on the two ends of each gluing must be
    // mapped reverses of each other
    for (k, e) in dual_edges.iter().enumerate() {
        let m = tri.pairings[e.pairing].map;
        let (ta, th) = side_pair(corner_cycles[e.a], e.a_face);
        let (bt, bh) = side_pair(corner_cycles[e.b], e.b_face);
        if (bt, bh) != (m[th as usize], m[ta as usize]) {
            return Err(CuspError::MixedOrientation(k));
        }
    }

    // spanning tree of the dual graph
    let n = triangles.len();
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for (k, e) in dual_edges.iter().enumerate() {
        adj[e.a].push((k, true));
        adj[e.b].push((k, false));
    }
    let mut parent: Vec<Option<(usize, bool)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut in_tree = vec![false; dual_edges.len()];
    let mut bfs_order = vec![0usize];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(node) = queue.pop_front() {
        for &(k, fwd) in &adj[node] {
            let other = if fwd { dual_edges[k].b } else { dual_edges[k].a };
            if !seen[other] {
                seen[other] = true;
                in_tree[k] = true;
                parent[other] = Some((k, fwd));
                bfs_order.push(other);
                queue.push_back(other);
            }
        }
    }
    if seen.iter().any(|&s| !s) {
        // a vertex class is connected by construction; this would be a bug
        return Err(CuspError::BadRank(0));
    }

    // path from a node up to the root as traversal steps
    let path_up = |start: usize| -> Vec<(usize, bool)> {
        let mut steps = Vec::new();
        let mut node = start;
        while let Some((k, fwd)) = parent[node] {
            // arrived at node by traversing k with direction fwd; go back up
            steps.push((k, !fwd));
            node = if fwd { dual_edges[k].a } else { dual_edges[k].b };
        }
        steps
    };

    let head_of = |k: usize, fwd: bool| if fwd { dual_edges[k].b } else { dual_edges[k].a };
    let arrival_face = |k: usize, fwd: bool| {
        if fwd {
            dual_edges[k].b_face
        } else {
            dual_edges[k].a_face
        }
    };
    let departure_face = |k: usize, fwd: bool| {
        if fwd {
            dual_edges[k].a_face
        } else {
            dual_edges[k].b_face
        }
    };

    let steps_to_loop = |steps: &[(usize, bool)]| -> NormalLoop {
        let len = steps.len();
        let mut passages = Vec::with_capacity(len);
        for i in 0..len {
            let (k_in, d_in) = steps[i];
            let (k_out, d_out) = steps[(i + 1) % len];
            passages.push(Passage {
                triangle: head_of(k_in, d_in),
                f_in: arrival_face(k_in, d_in),
                f_out: departure_face(k_out, d_out),
            });
        }
        passages.rotate_right(1); // start the list at the first step's source
        NormalLoop { passages }
    };

    let mut fundamental_cycles = Vec::new();
    let mut nontree = Vec::new();
    for (k, e) in dual_edges.iter().enumerate() {
        if in_tree[k] {
            continue;
        }
        nontree.push(k);
        // close the non-tree edge a->b through the tree: b up to the root,
        // then down to a
        let up_b = path_up(e.b);
        let up_a = path_up(e.a);
        // strip the common tail (shared steps near the root)
        let mut nb = up_b.len();
        let mut na = up_a.len();
        while nb > 0 && na > 0 && up_b[nb - 1] == up_a[na - 1] {
            nb -= 1;
            na -= 1;
        }
        let mut steps = vec![(k, true)];
        steps.extend_from_slice(&up_b[..nb]);
        steps.extend(up_a[..na].iter().rev().map(|&(e, d)| (e, !d)));
        debug_assert_eq!(
            steps.iter().map(|&(e, d)| if e == k { if d { 1 } else { -1 } } else { 0 }).sum::<i64>(),
            1
        );
        fundamental_cycles.push(steps_to_loop(&steps));
    }

    // rotation loop around every link vertex
    let glue = glue_table(tri);
    let side_step: BTreeMap<(usize, u8), (usize, bool)> = dual_edges
        .iter()
        .enumerate()
        .flat_map(|(k, e)| {
            [
                ((e.a, e.a_face), (k, true)),
                ((e.b, e.b_face), (k, false)),
            ]
        })
        .collect();
    let mut relations = Vec::new();
    let mut visited: BTreeSet<(usize, u8)> = BTreeSet::new();
    for start_node in 0..n {
        for &u0 in &corner_cycles[start_node] {
            if visited.contains(&(start_node, u0)) {
                continue;
            }
            let (mut t, mut v) = triangles[start_node];
            let mut u = u0;
            let mut f_prev: Option<u8> = None;
            let mut steps = Vec::new();
            for guard in 0.. {
                assert!(guard <= 4 * n, "rotation failed to close");
                let node = index[&(t, v)];
                visited.insert((node, u));
                let exit = (0u8..4)
                    .find(|&f| f != v && f != u && Some(f) != f_prev)
                    .expect("two faces contain an edge");
                steps.push(side_step[&(node, exit)]);
                let (_, t1, f1, m) = glue[t * 4 + exit as usize].expect("validated pairing");
                t = t1;
                v = m[v as usize];
                u = m[u as usize];
                f_prev = Some(f1);
                if index[&(t, v)] == start_node && u == u0 {
                    break;
                }
            }
            relations.push(steps_to_loop(&steps));
        }
    }

    // peripheral homology: cycle space coordinates live on non-tree edges
    let pos: BTreeMap<usize, usize> = nontree.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let coords = |lp: &NormalLoop| -> Vec<i64> {
        let mut c = vec![0i64; nontree.len()];
        for p in &lp.passages {
            let (k, fwd) = side_step[&(p.triangle, p.f_out)];
            if let Some(&i) = pos.get(&k) {
                c[i] += if fwd { 1 } else { -1 };
            }
        }
        c
    };
    let rel_rows: Vec<Vec<i64>> = relations.iter().map(&coords).collect();
    let s = smith(&rel_rows);
    let free: Vec<Vec<i64>> = s.v_inv[s.rank..].to_vec();
    if free.len() != 2 {
        return Err(CuspError::BadRank(free.len()));
    }

    Ok(CuspSection {
        cusp,
        triangles,
        corner_cycles,
        dual_edges,
        fundamental_cycles,
        relations,
        basis: [free[0].clone(), free[1].clone()],
        nontree,
        parent,
        bfs_order,
    })
}

/// Develop every link triangle once through the spanning tree, then read
/// off the deck transformation (dilation, translation) of each
/// fundamental cycle in that single frame.  Unlike per-loop development,
/// these translations are additive across homology classes.
pub fn based_deck(tri: &Triangulation, s: &CuspSection, shapes: &Shapes) -> Vec<(C64, C64)> {
    let n = s.triangles.len();
    // positions of the three corners, indexed by slot in corner_cycles
    let mut pos: Vec<[C64; 3]> = vec![[C64::new(0.0, 0.0); 3]; n];
    let modulus = |tri_idx: usize, corner: u8| -> C64 {
        let (t, v) = s.triangles[tri_idx];
        shapes.w(t, tri.level_of(t, v, corner)).powi(tri.star(t))
    };
    let slot = |tri_idx: usize, corner: u8| -> usize {
        s.corner_cycles[tri_idx]
            .iter()
            .position(|&c| c == corner)
            .expect("corner of this triangle")
    };
    for &node in &s.bfs_order {
        match s.parent[node] {
            None => {
                let c = s.corner_cycles[node];
                pos[node][0] = C64::new(0.0, 0.0);
                pos[node][1] = C64::new(1.0, 0.0);
                pos[node][2] = modulus(node, c[0]);
            }
            Some((k, fwd)) => {
                let e = s.dual_edges[k];
                let (src, f_src, f_dst) = if fwd {
                    (e.a, e.a_face, e.b_face)
                } else {
                    (e.b, e.b_face, e.a_face)
                };
                let m = if fwd {
                    tri.pairings[e.pairing].map
                } else {
                    perm_inverse(tri.pairings[e.pairing].map)
                };
                let (ta, ha) = side_pair(s.corner_cycles[src], f_src);
                let (tb, hb) = side_pair(s.corner_cycles[node], f_dst);
                debug_assert_eq!((tb, hb), (m[ha as usize], m[ta as usize]));
                let a = pos[src][slot(src, ha)]; // shared corner positions
                let b = pos[src][slot(src, ta)];
                pos[node][slot(node, tb)] = a;
                pos[node][slot(node, hb)] = b;
                let third = s.corner_cycles[node]
                    .into_iter()
                    .find(|&c| c != tb && c != hb)
                    .unwrap();
                pos[node][slot(node, third)] = a + modulus(node, tb) * (b - a);
            }
        }
    }
    s.nontree
        .iter()
        .map(|&k| {
            let e = s.dual_edges[k];
            let m = tri.pairings[e.pairing].map;
            let (ta, ha) = side_pair(s.corner_cycles[e.a], e.a_face);
            let (tb, hb) = side_pair(s.corner_cycles[e.b], e.b_face);
            debug_assert_eq!((tb, hb), (m[ha as usize], m[ta as usize]));
            // through the gluing, b's side (tb, hb) should land on a's
            // (head, tail); the deck map carries placed b onto that image
            let t1 = pos[e.a][slot(e.a, ha)];
            let t2 = pos[e.a][slot(e.a, ta)];
            let p1 = pos[e.b][slot(e.b, tb)];
            let p2 = pos[e.b][slot(e.b, hb)];
            let dil = (t2 - t1) / (p2 - p1);
            (dil, t1 - dil * p1)
        })
        .collect()
}

/// Expand a loop into per-passage contributions.
pub fn ind_decomposition(
    tri: &Triangulation,
    s: &CuspSection,
    lp: &NormalLoop,
) -> Vec<PassageData> {
    lp.passages
        .iter()
        .map(|p| {
            let (t, v) = s.triangles[p.triangle];
            let cycle = s.corner_cycles[p.triangle];
            let (tail, head) = side_pair(cycle, p.f_in);
            let cut = cycle
                .into_iter()
                .find(|&c| c != p.f_in && c != p.f_out)
                .expect("one corner is faced");
            debug_assert!(cut == tail || cut == head);
            PassageData {
                tet: t,
                vertex: v,
                cut,
                level: tri.level_of(t, v, cut),
                star: tri.star(t),
                ind: if cut == tail { 1 } else { -1 },
            }
        })
        .collect()
}

/// Multiplicative holonomy of a loop: product of faced corner moduli
/// (edge level raised to the tet sign) to the passage indices.
pub fn loop_holonomy(tri: &Triangulation, s: &CuspSection, shapes: &Shapes, lp: &NormalLoop) -> C64 {
    ind_decomposition(tri, s, lp)
        .iter()
        .map(|pd| shapes.w(pd.tet, pd.level).powi(pd.star * pd.ind))
        .product()
}

/// Holonomy of an integer combination of fundamental cycles.
pub fn class_holonomy(tri: &Triangulation, s: &CuspSection, shapes: &Shapes, coeffs: &[i64]) -> C64 {
    coeffs
        .iter()
        .zip(&s.fundamental_cycles)
        .map(|(&a, lp)| loop_holonomy(tri, s, shapes, lp).powi(a as i32))
        .product()
}

/// Develop the loop in the plane: returns (dilation, translation) of the
/// similarity carrying the starting side to its final image, from the
/// initial side (0, 1).
pub fn develop(
    tri: &Triangulation,
    s: &CuspSection,
    shapes: &Shapes,
    lp: &NormalLoop,
) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut q = C64::new(1.0, 0.0);
    for pas in &lp.passages {
        let (t, v) = s.triangles[pas.triangle];
        let cycle = s.corner_cycles[pas.triangle];
        let (tail, head) = side_pair(cycle, pas.f_in);
        let m_tail = shapes
            .w(t, tri.level_of(t, v, tail))
            .powi(tri.star(t));
        let r = p + m_tail * (q - p);
        let cut = cycle
            .into_iter()
            .find(|&c| c != pas.f_in && c != pas.f_out)
            .expect("one corner is faced");
        if cut == tail {
            q = r;
        } else {
            debug_assert_eq!(cut, head);
            p = r;
        }
    }
    (q - p, p)
}

/// The peripheral basis with positive frame: at (near-)complete shapes all
/// loop holonomies are translations; orient so the two basis translations
/// form a positively oriented frame.
pub fn oriented_basis(
    tri: &Triangulation,
    s: &CuspSection,
    shapes: &Shapes,
) -> Result<[Vec<i64>; 2], CuspError> {
    let devs = based_deck(tri, s, shapes);
    if devs
        .iter()
        .any(|(dil, _)| (dil - C64::new(1.0, 0.0)).norm() > 1e-6)
    {
        return Err(CuspError::NotTranslational);
    }
    let translate = |coeffs: &[i64]| -> C64 {
        coeffs
            .iter()
            .zip(&devs)
            .map(|(&a, &(_, tr))| tr * a as f64)
            .sum()
    };
    let z1 = translate(&s.basis[0]);
    let z2 = translate(&s.basis[1]);
    let area = (z1.conj() * z2).im;
    let scale = z1.norm() * z2.norm();
    if scale < 1e-12 || area.abs() < 1e-9 * scale {
        return Err(CuspError::DegenerateFrame);
    }
    let mut second = s.basis[1].clone();
    if area < 0.0 {
        for x in &mut second {
            *x = -*x;
        }
    }
    Ok([s.basis[0].clone(), second])
}

/// Peripheral conditions as extra multiplicative equations: the combined
/// exponent of each (tet, level) along both basis classes.
pub fn holonomy_equations(tri: &Triangulation, s: &CuspSection) -> [EdgeEquation; 2] {
    let build = |coeffs: &[i64]| -> EdgeEquation {
        let mut acc: BTreeMap<(usize, u8), i64> = BTreeMap::new();
        for (i, &a) in coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for pd in ind_decomposition(tri, s, &s.fundamental_cycles[i]) {
                *acc.entry((pd.tet, pd.level)).or_insert(0) +=
                    a * (pd.star * pd.ind) as i64;
            }
        }
        EdgeEquation {
            factors: acc
                .into_iter()
                .filter(|&(_, e)| e != 0)
                .map(|((t, l), e)| (t, l, e as i32))
                .collect(),
        }
    };
    [build(&s.basis[0]), build(&s.basis[1])]
}
