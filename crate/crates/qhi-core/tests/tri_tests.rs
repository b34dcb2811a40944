//! Triangulation model tests pinned to hand-worked census facts.

use qhi_core::tri::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fs;

fn load(name: &str) -> Triangulation {
    let path = format!("{}/../../census/{name}.json", env!("CARGO_MANIFEST_DIR"));
    Triangulation::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn census_files_parse_and_validate() {
    for name in ["m003", "m004"] {
        let t = load(name);
        assert_eq!(t.name, name);
        assert_eq!(t.tets, 2);
        assert_eq!(t.pairings.len(), 4);
    }
}

#[test]
fn json_roundtrip_preserves_everything() {
    let t = load("m004");
    let again = Triangulation::from_json(&t.to_json()).unwrap();
    assert_eq!(t, again);
}

#[test]
fn stars_follow_order_parity() {
    let t = load("m003");
    assert_eq!((t.star(0), t.star(1)), (1, 1));
    let t = load("m004");
    assert_eq!((t.star(0), t.star(1)), (1, -1));
}

#[test]
fn prebranching_orients_census_pairings_as_stored() {
    for name in ["m003", "m004"] {
        let t = load(name);
        let pb = t.prebranching().unwrap();
        assert_eq!(pb.flows.len(), 4);
        for (i, fl) in pb.flows.iter().enumerate() {
            assert_eq!(fl.pairing, i);
            assert!(!fl.flipped, "{name} pairing {i} stored backwards?");
            assert_eq!(fl.out_side, t.pairings[i].from);
            assert_eq!(fl.in_side, t.pairings[i].to);
        }
    }
}

#[test]
fn reversed_pairing_is_reoriented() {
    let orig = load("m003");
    let mut t = orig.clone();
    let p = t.pairings[0].clone();
    t.pairings[0] = Pairing {
        from: p.to,
        to: p.from,
        map: perm_inverse(p.map),
    };
    t.validate().unwrap();
    let pb = t.prebranching().unwrap();
    assert!(pb.flows[0].flipped);
    assert_eq!(pb.flows[0].out_side, p.from);
    assert_eq!(pb.flows[0].map, p.map);
    assert_eq!(t.colors().unwrap(), orig.colors().unwrap());
}

#[test]
fn m003_colors_and_q() {
    let t = load("m003");
    assert_eq!(t.colors().unwrap(), vec![0, 0, 2, 1]);
    assert_eq!(t.count_q().unwrap(), 1);
    assert!(!t.is_genuine());
}

#[test]
fn m004_colors_all_trivial_and_genuine() {
    let t = load("m004");
    assert_eq!(t.colors().unwrap(), vec![0, 0, 0, 0]);
    assert_eq!(t.count_q().unwrap(), 0);
    assert!(t.is_genuine());
}

/// Multiset of (tet, level, star) rows per edge class, as a canonical set.
fn equation_shapes(t: &Triangulation) -> BTreeSet<Vec<(usize, u8, i32)>> {
    t.edge_classes()
        .unwrap()
        .iter()
        .map(|c| {
            let mut v: Vec<_> = c
                .uses
                .iter()
                .map(|u| (u.tet, u.level, t.star(u.tet)))
                .collect();
            v.sort();
            v
        })
        .collect()
}

#[test]
fn m003_edge_equations_have_known_shape() {
    // The two gluing equations are w0 w2^2 W0 W2^2 = 1 and
    // w0 w1^2 W0 W1^2 = 1 (both tets positive).
    let shapes = equation_shapes(&load("m003"));
    let a = vec![(0, 0, 1), (0, 2, 1), (0, 2, 1), (1, 0, 1), (1, 2, 1), (1, 2, 1)];
    let b = vec![(0, 0, 1), (0, 1, 1), (0, 1, 1), (1, 0, 1), (1, 1, 1), (1, 1, 1)];
    assert_eq!(shapes, BTreeSet::from([a, b]));
}

#[test]
fn m004_edge_equations_have_known_shape() {
    // w0^2 w1 W1^-1 W2^-2 = 1 and w1 w2^2 W0^-2 W1^-1 = 1
    // (tet 1 is negative, so its levels enter inverted).
    let shapes = equation_shapes(&load("m004"));
    let e1 = vec![(0, 0, 1), (0, 0, 1), (0, 1, 1), (1, 1, -1), (1, 2, -1), (1, 2, -1)];
    let e2 = vec![(0, 1, 1), (0, 2, 1), (0, 2, 1), (1, 0, -1), (1, 0, -1), (1, 1, -1)];
    assert_eq!(shapes, BTreeSet::from([e1, e2]));
}

#[test]
fn m003_class_membership_frozen() {
    let t = load("m003");
    let classes = t.edge_classes().unwrap();
    let norm = |u: &EdgeUse| {
        let (a, b) = u.ends;
        (u.tet, a.min(b), a.max(b))
    };
    let through: Vec<BTreeSet<_>> = classes
        .iter()
        .map(|c| c.uses.iter().map(norm).collect())
        .collect();
    let a_set = BTreeSet::from([
        (0, 0, 1),
        (0, 1, 3),
        (0, 0, 2),
        (1, 0, 2),
        (1, 2, 3),
        (1, 1, 3),
    ]);
    assert!(
        through.contains(&a_set),
        "frozen class A missing: got {through:?}"
    );
}

#[test]
fn every_tet_edge_in_exactly_one_class() {
    for name in ["m003", "m004"] {
        let t = load(name);
        let classes = t.edge_classes().unwrap();
        assert_eq!(classes.len(), t.tets, "{name}: one-cusped count");
        let mut seen = BTreeSet::new();
        for c in &classes {
            for u in &c.uses {
                let (a, b) = u.ends;
                assert!(seen.insert((u.tet, a.min(b), a.max(b))));
                assert_eq!(u.level, t.level_of(u.tet, u.ends.0, u.ends.1));
            }
        }
        assert_eq!(seen.len(), 6 * t.tets);
    }
}

#[test]
fn edge_orientation_flags_anchor_on_first_use() {
    for name in ["m003", "m004"] {
        let t = load(name);
        for c in t.edge_classes().unwrap() {
            assert!(c.uses[0].along_class, "{name}: anchor use must agree");
        }
    }
}

#[test]
fn single_torus_cusp() {
    for name in ["m003", "m004"] {
        let t = load(name);
        let vs = t.vertex_classes();
        assert_eq!(vs.len(), 1, "{name}");
        assert_eq!(vs[0].corners.len(), 8, "{name}");
        assert_eq!(vs[0].euler, 0, "{name}");
    }
}

#[test]
fn even_vertex_map_rejected() {
    let mut t = load("m003");
    // swapping two non-face images makes the extended map even
    t.pairings[0].map.swap(1, 2);
    assert!(matches!(
        t.validate(),
        Err(TriError::OrientationViolation(0))
    ));
}

#[test]
fn duplicated_face_rejected() {
    let mut t = load("m003");
    let extra = t.pairings[0].clone();
    t.pairings.push(extra);
    assert!(matches!(t.validate(), Err(TriError::FaceCount(_, _, _))));
}

#[test]
fn bad_orders_rejected() {
    let t = load("m003");
    assert!(matches!(
        t.with_orders(vec![[0, 1, 2, 2], [0, 1, 2, 3]]),
        Err(TriError::OrdersNotPermutation(0, _))
    ));
}

#[test]
fn no_genuine_branching_on_m003_but_weak_ones_exist() {
    let t = load("m003");
    let perms = s4_elements();
    let mut genuine = 0usize;
    let mut weak = 0usize;
    for &o0 in &perms {
        for &o1 in &perms {
            let cand = t.with_orders(vec![o0, o1]).unwrap();
            if cand.prebranching().is_err() {
                continue;
            }
            if let Ok(cs) = cand.colors() {
                weak += 1;
                if cs.iter().all(|&r| r == 0) {
                    genuine += 1;
                }
            }
        }
    }
    assert_eq!(genuine, 0, "m003 admits no genuine branching");
    assert!(weak > 0, "m003 admits weak branchings");
}

#[test]
fn m004_given_branching_among_genuine_ones() {
    let t = load("m004");
    assert!(t.is_genuine());
    let perms = s4_elements();
    let mut genuine = 0usize;
    for &o0 in &perms {
        for &o1 in &perms {
            let cand = t.with_orders(vec![o0, o1]).unwrap();
            if cand.prebranching().is_err() {
                continue;
            }
            if let Ok(cs) = cand.colors() {
                if cs.iter().all(|&r| r == 0) {
                    genuine += 1;
                }
            }
        }
    }
    assert!(genuine > 0);
}

#[test]
fn classes_do_not_depend_on_orders() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let perms = s4_elements();
    for name in ["m003", "m004"] {
        let t = load(name);
        let base: BTreeSet<BTreeSet<_>> = t
            .edge_classes()
            .unwrap()
            .iter()
            .map(|c| {
                c.uses
                    .iter()
                    .map(|u| {
                        let (a, b) = u.ends;
                        (u.tet, a.min(b), a.max(b))
                    })
                    .collect()
            })
            .collect();
        let base_euler: Vec<i64> = t.vertex_classes().iter().map(|v| v.euler).collect();
        for _ in 0..20 {
            let o0 = *perms.choose(&mut rng).unwrap();
            let o1 = *perms.choose(&mut rng).unwrap();
            let cand = t.with_orders(vec![o0, o1]).unwrap();
            let got: BTreeSet<BTreeSet<_>> = cand
                .edge_classes()
                .unwrap()
                .iter()
                .map(|c| {
                    c.uses
                        .iter()
                        .map(|u| {
                            let (a, b) = u.ends;
                            (u.tet, a.min(b), a.max(b))
                        })
                        .collect()
                })
                .collect();
            assert_eq!(got, base);
            let euler: Vec<i64> = cand.vertex_classes().iter().map(|v| v.euler).collect();
            assert_eq!(euler, base_euler);
        }
    }
}

#[test]
fn perm_helpers_exhaustive() {
    let perms = s4_elements();
    assert_eq!(perms.len(), 24);
    let distinct: BTreeSet<_> = perms.iter().collect();
    assert_eq!(distinct.len(), 24);
    let odd = perms.iter().filter(|&&p| perm_sign(p) == -1).count();
    assert_eq!(odd, 12);
    let id = [0u8, 1, 2, 3];
    for &a in &perms {
        assert_eq!(perm_compose(a, perm_inverse(a)), id);
        assert_eq!(perm_compose(perm_inverse(a), a), id);
        for &b in &perms {
            assert_eq!(perm_sign(perm_compose(a, b)), perm_sign(a) * perm_sign(b));
        }
    }
}

#[test]
fn level_table_respects_orders() {
    let t = load("m004");
    // tet 1 has orders [0,1,3,2]
    assert_eq!(t.level_of(1, 0, 1), 0);
    assert_eq!(t.level_of(1, 3, 2), 0);
    assert_eq!(t.level_of(1, 1, 3), 1);
    assert_eq!(t.level_of(1, 0, 2), 1);
    assert_eq!(t.level_of(1, 0, 3), 2);
    assert_eq!(t.level_of(1, 1, 2), 2);
}
