#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use cayley_lp::group::{Gen, Group, GroupElement};

pub type Mat = [[i128; 2]; 2];

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Representative of ±M with the first nonzero entry positive.
pub fn psl(m: Mat) -> Mat {
    let first = [m[0][0], m[0][1], m[1][0], m[1][1]]
        .into_iter()
        .find(|&x| x != 0)
        .unwrap();
    if first < 0 {
        m.map(|r| r.map(|x| -x))
    } else {
        m
    }
}

pub const ID: Mat = [[1, 0], [0, 1]];

/// Generator matrices, indexed like the group's generators.
///
/// `free:2` goes to the Sanov subgroup of SL(2, Z), which is free on
/// `[[1,2],[0,1]]` and `[[1,0],[2,1]]`; `cyclic:2,3` goes to PSL(2, Z) through
/// `s ↦ [[0,-1],[1,0]]`, `t ↦ [[0,-1],[1,1]]`. Both maps are isomorphisms
/// onto their images.
pub fn generator_matrices(group: &Group) -> Vec<Mat> {
    match group.spec().descriptor().as_str() {
        "free:2" => vec![
            [[1, 2], [0, 1]],
            [[1, -2], [0, 1]],
            [[1, 0], [2, 1]],
            [[1, 0], [-2, 1]],
        ],
        "cyclic:2,3" => {
            let u = [[0, -1], [1, 1]];
            vec![[[0, -1], [1, 0]], u, mul(&u, &u)]
        }
        other => panic!("no matrix model for {other}"),
    }
}

pub fn matrix_of(group: &Group, g: &GroupElement) -> Mat {
    let gens = generator_matrices(group);
    let projective = group.spec().descriptor() == "cyclic:2,3";
    let m = g.word().iter().fold(ID, |acc, &s| mul(&acc, &gens[s as usize]));
    if projective {
        psl(m)
    } else {
        m
    }
}

/// Distances from the identity by BFS over matrices, up to `radius`.
pub fn matrix_bfs(group: &Group, radius: usize) -> HashMap<Mat, usize> {
    let gens = generator_matrices(group);
    let projective = group.spec().descriptor() == "cyclic:2,3";
    let norm = |m: Mat| if projective { psl(m) } else { m };
    let mut dist = HashMap::from([(ID, 0)]);
    let mut queue = VecDeque::from([ID]);
    while let Some(m) = queue.pop_front() {
        let d = dist[&m];
        if d == radius {
            continue;
        }
        for g in &gens {
            let n = norm(mul(&m, g));
            dist.entry(n).or_insert_with(|| {
                queue.push_back(n);
                d + 1
            });
        }
    }
    dist
}

/// The ball of radius `r` in Z² with generators x, X, y, Y, as a Cayley-ball
/// file. Not hyperbolic, but its flowers have several petals, which makes
/// the recursion average for real.
pub fn z2_ball_json(r: i64) -> String {
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let name = |i: i64, j: i64| format!("{i},{j}");
    let steps = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    for i in -r..=r {
        for j in -r..=r {
            if i.abs() + j.abs() > r {
                continue;
            }
            vertices.push(name(i, j));
            for (s, (di, dj)) in steps.iter().enumerate() {
                let (a, b) = (i + di, j + dj);
                if a.abs() + b.abs() <= r {
                    edges.push(serde_json::json!([name(i, j), s, name(a, b)]));
                }
            }
        }
    }
    serde_json::json!({
        "generators": [
            {"label": "x", "inverse": "X"},
            {"label": "X", "inverse": "x"},
            {"label": "y", "inverse": "Y"},
            {"label": "Y", "inverse": "y"},
        ],
        "basepoint": "0,0",
        "radius": r,
        "vertices": vertices,
        "edges": edges,
    })
    .to_string()
}

/// All elements of `B(e, r)` by brute-force BFS on generator multiplication.
pub fn brute_ball(group: &Group, r: usize) -> Vec<GroupElement> {
    let mut seen = vec![group.identity()];
    let mut frontier = vec![group.identity()];
    for _ in 0..r {
        let mut next = Vec::new();
        for g in &frontier {
            for s in 0..group.generator_count() as Gen {
                if let Ok(h) = group.multiply_gen(g, s) {
                    if !seen.contains(&h) {
                        seen.push(h.clone());
                        next.push(h);
                    }
                }
            }
        }
        frontier = next;
    }
    seen
}
