mod common;

use cayley_lp::bicombing::{canonical_path, q_path, q_point};
use cayley_lp::group::Group;
use cayley_lp::{CayleyBall, HalfInt};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn groups() -> Vec<Group> {
    vec![
        Group::free(2, 1).unwrap(),
        Group::free_product_cyclic(&[2, 3], 1).unwrap(),
    ]
}

#[test]
fn metric_axioms_exhaustive() {
    for group in groups() {
        let ball = CayleyBall::build(&group, 3, 64).unwrap();
        let elems: Vec<_> = ball.elements().cloned().collect();
        for g in &elems {
            for a in &elems {
                for b in &elems {
                    let d = ball.distance(a, b).unwrap();
                    let ga = group.multiply(g, a).unwrap();
                    let gb = group.multiply(g, b).unwrap();
                    assert_eq!(ball.distance(&ga, &gb).unwrap(), d);
                    assert!(d <= ball.distance(a, g).unwrap() + ball.distance(g, b).unwrap());
                    let gp = ball.gromov_product(g, a, b).unwrap();
                    assert!(gp >= HalfInt::from_int(0));
                    let cap = ball.distance(g, a).unwrap().min(ball.distance(g, b).unwrap());
                    assert!(gp <= HalfInt::from_int(cap as i64));
                    assert_eq!(gp, ball.gromov_product(g, b, a).unwrap());
                }
            }
        }
    }
}

#[test]
fn spheres_partition_balls() {
    for group in groups() {
        let ball = CayleyBall::build(&group, 7, 64).unwrap();
        let x = group.parse(if group.generator_count() == 4 { "aB" } else { "st" }).unwrap();
        for r in 0..=5 {
            let b = ball.ball_around(&x, r).unwrap();
            assert!(b.complete);
            let mut union: Vec<_> = (0..=r)
                .flat_map(|k| ball.sphere(&x, k).unwrap().members)
                .collect();
            union.sort();
            assert_eq!(union, b.members);
            for y in &b.members {
                assert!(ball.distance(&x, y).unwrap() <= r as usize);
            }
        }
    }
}

#[test]
fn sphere_counts() {
    let f2 = Group::free(2, 1).unwrap();
    let ball = CayleyBall::build(&f2, 6, 64).unwrap();
    assert_eq!(ball.sphere_sizes(), vec![1, 4, 12, 36, 108, 324, 972]);
    let pgl = Group::free_product_cyclic(&[2, 3], 1).unwrap();
    let ball = CayleyBall::build(&pgl, 6, 64).unwrap();
    assert_eq!(ball.sphere_sizes(), vec![1, 3, 4, 6, 8, 12, 16]);
    assert_eq!(brute_ball(&pgl, 6).len(), ball.len());
}

#[test]
fn adjacency_is_symmetric() {
    for group in groups() {
        let ball = CayleyBall::build(&group, 5, 64).unwrap();
        for h in 0..ball.len() {
            for (s, v) in ball.neighbors(h) {
                let back: Vec<_> = ball.neighbors(v).filter(|&(t, _)| t == group.inverse_gen(s)).collect();
                assert_eq!(back, vec![(group.inverse_gen(s), h)]);
            }
        }
    }
}

#[test]
fn cyclic_product_certificate() {
    let pgl = Group::free_product_cyclic(&[2, 3], 1).unwrap();
    let ball = CayleyBall::build(&pgl, 8, 64).unwrap();
    let rep = ball.certify_delta(1, 1000, 3).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.skipped, 0);
    let json = serde_json::to_value(&rep).unwrap();
    for key in ["delta", "samples", "skipped", "max_deviation", "witness", "pass"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn z2_fails_small_delta() {
    // square grids are not hyperbolic: thin triangles fail at small δ
    let z2 = Group::from_ball_json(&z2_ball_json(8), 1).unwrap();
    let ball = CayleyBall::build(&z2, 8, 64).unwrap();
    let rep = ball.certify_delta(1, 2000, 5).unwrap();
    assert!(!rep.pass);
    assert!(rep.witness.is_some());
}

#[test]
fn paths_are_geodesic_and_equivariant_exhaustive() {
    for group in groups() {
        let ball = CayleyBall::build(&group, 3, 64).unwrap();
        let elems: Vec<_> = ball.elements().cloned().collect();
        for a in &elems {
            for b in &elems {
                let path = q_path(&group, a, b).unwrap();
                let n = path.len();
                assert_eq!(n, group.distance(a, b).unwrap());
                for i in 0..=n {
                    for j in i..=n {
                        assert_eq!(group.distance(&path.vertices[i], &path.vertices[j]).unwrap(), j - i);
                    }
                }
                assert_eq!(path, q_path(&group, a, b).unwrap());
                for g in &elems {
                    let moved = q_path(&group, &group.multiply(g, a).unwrap(), &group.multiply(g, b).unwrap()).unwrap();
                    let expect: Vec<_> = path.vertices.iter().map(|v| group.multiply(g, v).unwrap()).collect();
                    assert_eq!(moved.vertices, expect);
                }
            }
        }
    }
}

#[test]
fn explicit_paths_match_native_paths() {
    let g = Group::free_product_cyclic(&[2, 3], 1).unwrap();
    let ball = CayleyBall::build(&g, 8, 64).unwrap();
    let text = serde_json::to_string(&ball.to_ball_file()).unwrap();
    let ex = Group::from_ball_json(&text, 1).unwrap();
    for x in ball.elements() {
        let word = g.format(x);
        let y = ex.parse(&word).unwrap();
        let native: Vec<_> = canonical_path(&g, x).unwrap().iter().map(|v| g.format(v)).collect();
        let explicit: Vec<_> = canonical_path(&ex, &y).unwrap().iter().map(|v| ex.format(v)).collect();
        assert_eq!(native, explicit);
    }
}

#[test]
fn z2_paths_follow_generator_order() {
    let z2 = Group::from_ball_json(&z2_ball_json(6), 2).unwrap();
    let x = z2.parse("xxyy").unwrap();
    let p: Vec<_> = canonical_path(&z2, &x).unwrap().iter().map(|v| z2.format(v)).collect();
    assert_eq!(p, ["e", "x", "xx", "xxy", "xxyy"]);
    let swapped = z2.with_generator_order(&["y", "Y", "x", "X"]).unwrap();
    let x = swapped.parse("xxyy").unwrap();
    let p: Vec<_> = canonical_path(&swapped, &x).unwrap().iter().map(|v| swapped.format(v)).collect();
    assert_eq!(p, ["e", "y", "yy", "yyx", "yyxx"]);
}

proptest! {
    #[test]
    fn q_point_is_equivariant(seed in any::<u64>(), lg in 0usize..15, la in 0usize..15, lb in 0usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for group in groups() {
            let g = group.random_element(&mut rng, lg);
            let a = group.random_element(&mut rng, la);
            let b = group.random_element(&mut rng, lb);
            let d = group.distance(&a, &b).unwrap();
            let ga = group.multiply(&g, &a).unwrap();
            let gb = group.multiply(&g, &b).unwrap();
            for t in 0..=d {
                let v = q_point(&group, &a, &b, t).unwrap();
                prop_assert_eq!(group.distance(&a, &v).unwrap(), t);
                prop_assert_eq!(group.distance(&v, &b).unwrap(), d - t);
                prop_assert_eq!(q_point(&group, &ga, &gb, t).unwrap(), group.multiply(&g, &v).unwrap());
            }
        }
    }
}
