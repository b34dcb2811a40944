//! Oriented ideal triangulations with ordered tetrahedra.
//!
//! A triangulation is a set of tetrahedra with vertex labels 0..4 carrying
//! the ambient orientation, plus facet pairings whose extended vertex maps
//! must be odd, so each gluing reverses the boundary orientation. On top
//! of that every tetrahedron carries a vertex order; its parity is the
//! tetrahedron's sign, the order induces the co-orientation field on the
//! faces, and comparing orders across a pairing yields the color that
//! measures how far the orders are from a global branching.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TriError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("triangulation must have at least one tetrahedron")]
    Empty,
    #[error("orders list has {0} entries for {1} tetrahedra")]
    OrdersLength(usize, usize),
    #[error("orders[{0}] = {1:?} is not a permutation of 0..4")]
    OrdersNotPermutation(usize, [u8; 4]),
    #[error("pairing {0} references a tetrahedron or face out of range")]
    PairingRange(usize),
    #[error("pairing {0} glues a face to itself")]
    SelfGlued(usize),
    #[error("pairing {0}: map {1:?} is not a permutation")]
    MapNotPermutation(usize, [u8; 4]),
    #[error("pairing {0}: map does not carry the from-face to the to-face")]
    MapFaceMismatch(usize),
    #[error("pairing {0}: vertex map preserves orientation; pairings must reverse it")]
    OrientationViolation(usize),
    #[error("face ({0}, {1}) is glued {2} times; every face must be glued exactly once")]
    FaceCount(usize, usize, usize),
    #[error("pairing {0} does not join an outgoing face to an ingoing one")]
    CoOrientationClash(usize),
    #[error("pairing {0}: face correspondence is odd on the triangle, not a weak branching")]
    NotWeaklyBranched(usize),
    #[error("edge through tetrahedron {0} is glued to itself with a flip")]
    InvertedEdge(usize),
}

pub fn is_permutation(p: [u8; 4]) -> bool {
    let mut seen = [false; 4];
    for &v in &p {
        if v > 3 || seen[v as usize] {
            return false;
        }
        seen[v as usize] = true;
    }
    true
}

/// Parity of a permutation of 0..4: +1 even, -1 odd.
pub fn perm_sign(p: [u8; 4]) -> i32 {
    let mut inv = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn perm_inverse(p: [u8; 4]) -> [u8; 4] {
    let mut q = [0u8; 4];
    for (i, &v) in p.iter().enumerate() {
        q[v as usize] = i as u8;
    }
    q
}

/// Composition acting left of b: (a o b)[i] = a[b[i]].
pub fn perm_compose(a: [u8; 4], b: [u8; 4]) -> [u8; 4] {
    [
        a[b[0] as usize],
        a[b[1] as usize],
        a[b[2] as usize],
        a[b[3] as usize],
    ]
}

/// All 24 permutations of 0..4 in lexicographic order.
pub fn s4_elements() -> Vec<[u8; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4u8 {
        for b in 0..4u8 {
            for c in 0..4u8 {
                for d in 0..4u8 {
                    let p = [a, b, c, d];
                    if is_permutation(p) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// One facet gluing. `from` and `to` are (tetrahedron, face) with face f
/// the one opposite vertex f. `map` sends ambient vertex labels of the
/// from-tetrahedron to those of the to-tetrahedron and carries the
/// from-face to the to-face.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub map: [u8; 4],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangulation {
    pub name: String,
    pub tets: usize,
    pub orders: Vec<[u8; 4]>,
    pub pairings: Vec<Pairing>,
}

/// A pairing reoriented so the outgoing face comes first.
#[derive(Clone, Debug)]
pub struct OrientedPairing {
    pub pairing: usize,
    pub out_side: (usize, usize),
    pub in_side: (usize, usize),
    pub map: [u8; 4],
    pub flipped: bool,
}

#[derive(Clone, Debug)]
pub struct PreBranching {
    pub stars: Vec<i32>,
    pub flows: Vec<OrientedPairing>,
}

/// One appearance of an edge class inside a tetrahedron.
#[derive(Clone, Debug)]
pub struct EdgeUse {
    pub tet: usize,
    /// Ambient end labels, the end earlier in the vertex order first.
    pub ends: (u8, u8),
    /// Cross-ratio slot 0, 1 or 2 this tetrahedral edge carries.
    pub level: u8,
    /// Whether the order-induced direction agrees with the class direction.
    pub along_class: bool,
}

#[derive(Clone, Debug)]
pub struct EdgeClass {
    pub uses: Vec<EdgeUse>,
}

#[derive(Clone, Debug)]
pub struct VertexClass {
    pub corners: Vec<(usize, u8)>,
    pub euler: i64,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // anchor on the smaller root so representatives are canonical
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

fn directed_node(tet: usize, a: u8, b: u8) -> usize {
    tet * 16 + a as usize * 4 + b as usize
}

impl Triangulation {
    pub fn from_json(s: &str) -> Result<Self, TriError> {
        let t: Triangulation = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("triangulation serializes")
    }

    pub fn validate(&self) -> Result<(), TriError> {
        if self.tets == 0 {
            return Err(TriError::Empty);
        }
        if self.orders.len() != self.tets {
            return Err(TriError::OrdersLength(self.orders.len(), self.tets));
        }
        for (i, &o) in self.orders.iter().enumerate() {
            if !is_permutation(o) {
                return Err(TriError::OrdersNotPermutation(i, o));
            }
        }
        let mut face_seen = vec![0usize; self.tets * 4];
        for (i, p) in self.pairings.iter().enumerate() {
            let ((t0, f0), (t1, f1)) = (p.from, p.to);
            if t0 >= self.tets || t1 >= self.tets || f0 > 3 || f1 > 3 {
                return Err(TriError::PairingRange(i));
            }
            if p.from == p.to {
                return Err(TriError::SelfGlued(i));
            }
            if !is_permutation(p.map) {
                return Err(TriError::MapNotPermutation(i, p.map));
            }
            if p.map[f0] as usize != f1 {
                return Err(TriError::MapFaceMismatch(i));
            }
            if perm_sign(p.map) != -1 {
                return Err(TriError::OrientationViolation(i));
            }
            face_seen[t0 * 4 + f0] += 1;
            face_seen[t1 * 4 + f1] += 1;
        }
        for t in 0..self.tets {
            for f in 0..4 {
                if face_seen[t * 4 + f] != 1 {
                    return Err(TriError::FaceCount(t, f, face_seen[t * 4 + f]));
                }
            }
        }
        Ok(())
    }

    /// Sign of a tetrahedron: the parity of its vertex order.
    pub fn star(&self, tet: usize) -> i32 {
        perm_sign(self.orders[tet])
    }

    /// Position of an ambient vertex label in the tetrahedron's order.
    pub fn b_position(&self, tet: usize, ambient: u8) -> usize {
        self.orders[tet]
            .iter()
            .position(|&v| v == ambient)
            .expect("label in 0..4")
    }

    /// Ambient faces the co-orientation field points out of.
    pub fn out_faces(&self, tet: usize) -> [usize; 2] {
        let o = self.orders[tet];
        if self.star(tet) == 1 {
            [o[0] as usize, o[2] as usize]
        } else {
            [o[1] as usize, o[3] as usize]
        }
    }

    /// Cross-ratio slot carried by the edge with the given ambient ends:
    /// order positions {0,1} and {2,3} hold slot 0, {1,2} and {0,3} hold
    /// slot 1, {0,2} and {1,3} hold slot 2.
    pub fn level_of(&self, tet: usize, a: u8, b: u8) -> u8 {
        let p = self.b_position(tet, a);
        let q = self.b_position(tet, b);
        match (p.min(q), p.max(q)) {
            (0, 1) | (2, 3) => 0,
            (1, 2) | (0, 3) => 1,
            (0, 2) | (1, 3) => 2,
            _ => unreachable!("distinct positions in 0..4"),
        }
    }

    pub fn with_orders(&self, orders: Vec<[u8; 4]>) -> Result<Triangulation, TriError> {
        let t = Triangulation {
            orders,
            ..self.clone()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn prebranching(&self) -> Result<PreBranching, TriError> {
        let stars = (0..self.tets).map(|t| self.star(t)).collect();
        let mut flows = Vec::with_capacity(self.pairings.len());
        for (i, p) in self.pairings.iter().enumerate() {
            let from_out = self.out_faces(p.from.0).contains(&p.from.1);
            let to_out = self.out_faces(p.to.0).contains(&p.to.1);
            match (from_out, to_out) {
                (true, false) => flows.push(OrientedPairing {
                    pairing: i,
                    out_side: p.from,
                    in_side: p.to,
                    map: p.map,
                    flipped: false,
                }),
                (false, true) => flows.push(OrientedPairing {
                    pairing: i,
                    out_side: p.to,
                    in_side: p.from,
                    map: perm_inverse(p.map),
                    flipped: true,
                }),
                _ => return Err(TriError::CoOrientationClash(i)),
            }
        }
        Ok(PreBranching { stars, flows })
    }

    /// Vertices of an ambient face listed by their order positions.
    pub(crate) fn face_triple(&self, tet: usize, face: usize) -> [u8; 3] {
        let mut out = [0u8; 3];
        let mut k = 0;
        for &v in &self.orders[tet] {
            if v as usize != face {
                out[k] = v;
                k += 1;
            }
        }
        out
    }

    /// Per-pairing colors r with the face correspondence equal to the
    /// cyclic shift (012)^r. Odd correspondences mean the orders are not
    /// even weakly compatible across that pairing.
    pub fn colors(&self) -> Result<Vec<u8>, TriError> {
        let pb = self.prebranching()?;
        let mut out = Vec::with_capacity(pb.flows.len());
        for fl in &pb.flows {
            let src = self.face_triple(fl.out_side.0, fl.out_side.1);
            let dst = self.face_triple(fl.in_side.0, fl.in_side.1);
            let mut tau = [0usize; 3];
            for (i, &v) in src.iter().enumerate() {
                let image = fl.map[v as usize];
                tau[i] = dst
                    .iter()
                    .position(|&w| w == image)
                    .expect("map carries face to face");
            }
            let r = match tau {
                [0, 1, 2] => 0u8,
                [1, 2, 0] => 1,
                [2, 0, 1] => 2,
                _ => return Err(TriError::NotWeaklyBranched(fl.pairing)),
            };
            out.push(r);
        }
        Ok(out)
    }

    /// Number of pairings with color 2.
    pub fn count_q(&self) -> Result<usize, TriError> {
        Ok(self.colors()?.iter().filter(|&&r| r == 2).count())
    }

    /// Whether the orders form a genuine branching: co-orientations are
    /// coherent and every face correspondence is order-preserving.
    pub fn is_genuine(&self) -> bool {
        matches!(self.colors(), Ok(cs) if cs.iter().all(|&r| r == 0))
    }

    fn directed_edge_uf(&self) -> UnionFind {
        let mut uf = UnionFind::new(self.tets * 16);
        for p in &self.pairings {
            let (t0, f0) = p.from;
            let t1 = p.to.0;
            for a in 0..4u8 {
                for b in 0..4u8 {
                    if a == b || a as usize == f0 || b as usize == f0 {
                        continue;
                    }
                    uf.union(
                        directed_node(t0, a, b),
                        directed_node(t1, p.map[a as usize], p.map[b as usize]),
                    );
                }
            }
        }
        uf
    }

    /// Edge classes of the triangulation with their tetrahedral uses.
    /// Each class is directed by the order-induced direction of its first
    /// use; uses record whether they run along or against it.
    pub fn edge_classes(&self) -> Result<Vec<EdgeClass>, TriError> {
        let mut uf = self.directed_edge_uf();
        // all abstract edges, keyed for deterministic traversal by
        // (tet, order positions of the ends)
        let mut abstract_edges: Vec<(usize, usize, usize, u8, u8)> = Vec::new();
        for t in 0..self.tets {
            for p in 0..4usize {
                for q in p + 1..4 {
                    let a = self.orders[t][p];
                    let b = self.orders[t][q];
                    abstract_edges.push((t, p, q, a, b));
                }
            }
        }
        // group by undirected class: key = min of the two directed roots
        let mut groups: BTreeMap<usize, Vec<&(usize, usize, usize, u8, u8)>> = BTreeMap::new();
        for e in &abstract_edges {
            let fwd = uf.find(directed_node(e.0, e.3, e.4));
            let rev = uf.find(directed_node(e.0, e.4, e.3));
            if fwd == rev {
                return Err(TriError::InvertedEdge(e.0));
            }
            groups.entry(fwd.min(rev)).or_default().push(e);
        }
        let mut out = Vec::with_capacity(groups.len());
        for (_, members) in groups {
            // members are already sorted by (tet, positions); the first
            // one anchors the class direction
            let anchor = members[0];
            let anchor_root = uf.find(directed_node(anchor.0, anchor.3, anchor.4));
            let uses = members
                .iter()
                .map(|e| {
                    let along = uf.find(directed_node(e.0, e.3, e.4)) == anchor_root;
                    EdgeUse {
                        tet: e.0,
                        ends: (e.3, e.4),
                        level: self.level_of(e.0, e.3, e.4),
                        along_class: along,
                    }
                })
                .collect();
            out.push(EdgeClass { uses });
        }
        Ok(out)
    }

    /// Ideal/material vertex classes with the Euler characteristic of
    /// their links (0 for torus cusps, 2 for interior vertices).
    pub fn vertex_classes(&self) -> Vec<VertexClass> {
        let mut vuf = UnionFind::new(self.tets * 4);
        for p in &self.pairings {
            let (t0, f0) = p.from;
            let t1 = p.to.0;
            for v in 0..4u8 {
                if v as usize == f0 {
                    continue;
                }
                vuf.union(t0 * 4 + v as usize, t1 * 4 + p.map[v as usize] as usize);
            }
        }
        let mut euf = self.directed_edge_uf();
        // link vertices: directed edge classes, attributed to the vertex
        // class of the tail label
        let mut link_vertices: BTreeMap<usize, std::collections::BTreeSet<usize>> = BTreeMap::new();
        for t in 0..self.tets {
            for a in 0..4u8 {
                for b in 0..4u8 {
                    if a == b {
                        continue;
                    }
                    let vclass = vuf.find(t * 4 + a as usize);
                    let eclass = euf.find(directed_node(t, a, b));
                    link_vertices.entry(vclass).or_default().insert(eclass);
                }
            }
        }
        let mut corners: BTreeMap<usize, Vec<(usize, u8)>> = BTreeMap::new();
        for t in 0..self.tets {
            for v in 0..4u8 {
                corners
                    .entry(vuf.find(t * 4 + v as usize))
                    .or_default()
                    .push((t, v));
            }
        }
        corners
            .into_iter()
            .map(|(root, cs)| {
                let t_count = cs.len() as i64;
                let v_count = link_vertices.get(&root).map_or(0, |s| s.len()) as i64;
                VertexClass {
                    corners: cs,
                    // triangles T, edges 3T/2, vertices V
                    euler: v_count - t_count / 2,
                }
            })
            .collect()
    }
}
