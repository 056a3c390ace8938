//! Finite balls of the Cayley graph, the word metric, Gromov products and
//! sampled fineness certification.

use std::fmt;

use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};

use crate::bicombing::q_point;
use crate::error::{Error, Result};
use crate::group::{BallFile, BallGenerator, Gen, GeneratorRef, Group, GroupElement};

const NONE: u32 = u32::MAX;

/// An exact half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(i64);

impl HalfInt {
    pub fn from_twice(twice: i64) -> Self {
        Self(twice)
    }

    pub fn from_int(n: i64) -> Self {
        Self(2 * n)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn floor(self) -> i64 {
        self.0.div_euclid(2)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}", self.to_f64())
        }
    }
}

/// A set of vertices restricted to a ball, with a flag telling whether the
/// ball provably contains the whole unrestricted set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet {
    pub members: Vec<GroupElement>,
    pub complete: bool,
}

/// `B(e, R)` with dense handles, ordered by distance from `e` and, within a
/// sphere, in order of discovery by a generator-ordered BFS.
#[derive(Debug)]
pub struct CayleyBall<'g> {
    group: &'g Group,
    radius: u32,
    vertices: IndexSet<GroupElement, FxBuildHasher>,
    layer_start: Vec<usize>,
    adjacency: Vec<u32>,
}

/// Rough heap footprint of one stored vertex.
fn bytes_per_vertex(ngen: usize) -> u64 {
    (std::mem::size_of::<GroupElement>() + 24 + 4 * ngen) as u64
}

impl<'g> CayleyBall<'g> {
    pub fn build(group: &'g Group, radius: u32, memory_budget_mb: u64) -> Result<Self> {
        if let Some(declared) = group.explicit_radius() {
            if radius > declared {
                return Err(Error::OutOfWindow(format!(
                    "ball of radius {radius} (file radius is {declared})"
                )));
            }
        }
        let ngen = group.generator_count();
        let budget = memory_budget_mb.saturating_mul(1 << 20);
        let per_vertex = bytes_per_vertex(ngen);
        let mut vertices: IndexSet<GroupElement, FxBuildHasher> = IndexSet::default();
        vertices.insert(group.identity());
        let mut layer_start = vec![0, 1];
        let order: Vec<Gen> = group.ordered_generators().collect();
        for n in 0..radius as usize {
            let (lo, hi) = (layer_start[n], layer_start[n + 1]);
            // worst case every vertex of the layer has ngen - 1 children
            let projected = (hi as u64 + (hi - lo) as u64 * ngen.saturating_sub(1) as u64) * per_vertex;
            if projected > budget {
                return Err(Error::Resource {
                    radius,
                    needed_mb: projected.div_ceil(1 << 20),
                    budget_mb: memory_budget_mb,
                });
            }
            for i in lo..hi {
                let u = vertices[i].clone();
                for &s in &order {
                    let v = match group.multiply_gen(&u, s) {
                        Ok(v) => v,
                        Err(Error::OutOfWindow(_)) => continue,
                        Err(e) => return Err(e),
                    };
                    if v.len() == n + 1 {
                        vertices.insert(v);
                    }
                }
            }
            layer_start.push(vertices.len());
        }
        let mut adjacency = vec![NONE; vertices.len() * ngen];
        for (h, u) in vertices.iter().enumerate() {
            for s in 0..ngen {
                if let Ok(v) = group.multiply_gen(u, s as Gen) {
                    if let Some(k) = vertices.get_index_of(&v) {
                        adjacency[h * ngen + s] = k as u32;
                    }
                }
            }
        }
        Ok(Self {
            group,
            radius,
            vertices,
            layer_start,
            adjacency,
        })
    }

    pub fn group(&self) -> &'g Group {
        self.group
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn elements(&self) -> impl ExactSizeIterator<Item = &GroupElement> + Clone {
        self.vertices.iter()
    }

    pub fn element(&self, handle: usize) -> &GroupElement {
        &self.vertices[handle]
    }

    pub fn handle(&self, g: &GroupElement) -> Option<usize> {
        self.vertices.get_index_of(g)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.vertices.contains(g)
    }

    pub fn dist_from_e(&self, handle: usize) -> u32 {
        self.vertices[handle].len() as u32
    }

    /// Neighbours of a vertex inside the ball, as `(generator, handle)`.
    pub fn neighbors(&self, handle: usize) -> impl Iterator<Item = (Gen, usize)> + '_ {
        let ngen = self.group.generator_count();
        self.adjacency[handle * ngen..(handle + 1) * ngen]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != NONE)
            .map(|(s, &v)| (s as Gen, v as usize))
    }

    /// `S(e, n)` as stored.
    pub fn layer(&self, n: u32) -> impl ExactSizeIterator<Item = &GroupElement> + Clone {
        let n = n as usize;
        let (lo, hi) = if n < self.layer_start.len() - 1 {
            (self.layer_start[n], self.layer_start[n + 1])
        } else {
            (0, 0)
        };
        (lo..hi).map(move |i| &self.vertices[i])
    }

    /// `#S(e, n)` for `n = 0..=R`.
    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.layer_start.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn distance(&self, a: &GroupElement, b: &GroupElement) -> Result<usize> {
        self.group.distance(a, b)
    }

    /// `(b|c)_a`.
    pub fn gromov_product(&self, a: &GroupElement, b: &GroupElement, c: &GroupElement) -> Result<HalfInt> {
        gromov_product(self.group, a, b, c)
    }

    /// `{y ∈ ball : d(x, y) = r}`, computed as `x · S(e, r)`.
    pub fn sphere(&self, x: &GroupElement, r: u32) -> Result<VertexSet> {
        self.translated(x, r, r)
    }

    /// `{y ∈ ball : d(x, y) ≤ r}`.
    pub fn ball_around(&self, x: &GroupElement, r: u32) -> Result<VertexSet> {
        self.translated(x, 0, r)
    }

    fn translated(&self, x: &GroupElement, from: u32, to: u32) -> Result<VertexSet> {
        let complete = x.len() as u64 + to as u64 <= self.radius as u64;
        let mut members = Vec::new();
        let mut truncated = to > self.radius;
        for n in from..=to.min(self.radius) {
            for y in self.layer(n) {
                match self.group.multiply(x, y) {
                    Ok(v) if v.len() <= self.radius as usize => members.push(v),
                    Ok(_) => truncated = true,
                    Err(Error::OutOfWindow(_)) => truncated = true,
                    Err(e) => return Err(e),
                }
            }
        }
        members.sort();
        Ok(VertexSet {
            members,
            complete: complete && !truncated,
        })
    }

    /// Samples triangles and measures how far apart the bicombing geodesics
    /// from each corner are at equal distance below the Gromov product.
    /// Every triangle with corners in `B(e, min(R, 2))` is checked as well.
    pub fn certify_delta(&self, delta: u32, samples: usize, seed: u64) -> Result<CertReport> {
        let mut report = CertReport {
            delta,
            samples: 0,
            skipped: 0,
            exhaustive_radius: self.radius.min(2),
            max_deviation: 0,
            witness: None,
            pass: true,
            scope: "geodesics of the bicombing only".into(),
        };
        let small: Vec<&GroupElement> = self
            .elements()
            .take_while(|g| g.len() as u32 <= report.exhaustive_radius)
            .collect();
        for a in &small {
            for b in &small {
                for c in &small {
                    self.check_triangle(a, b, c, &mut report)?;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.len();
        for _ in 0..samples {
            let a = self.element(rng.gen_range(0..n));
            let b = self.element(rng.gen_range(0..n));
            let c = self.element(rng.gen_range(0..n));
            self.check_triangle(a, b, c, &mut report)?;
        }
        report.pass = report.max_deviation <= delta as usize;
        Ok(report)
    }

    fn check_triangle(
        &self,
        a: &GroupElement,
        b: &GroupElement,
        c: &GroupElement,
        report: &mut CertReport,
    ) -> Result<()> {
        report.samples += 1;
        match triangle_deviation(self.group, a, b, c) {
            Ok(dev) => {
                if dev > report.max_deviation || report.witness.is_none() {
                    report.max_deviation = report.max_deviation.max(dev);
                    report.witness = Some([a, b, c].map(|g| self.group.format(g)));
                }
                Ok(())
            }
            Err(Error::OutOfWindow(_)) => {
                report.skipped += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    /// Serializes the ball in the Cayley-ball file format, naming vertices by
    /// their normal forms.
    pub fn to_ball_file(&self) -> BallFile {
        let g = self.group;
        let ngen = g.generator_count();
        let ids: Vec<String> = self.elements().map(|v| g.format(v)).collect();
        let mut edges = Vec::new();
        for h in 0..self.len() {
            for s in 0..ngen {
                let v = self.adjacency[h * ngen + s];
                if v != NONE {
                    edges.push((ids[h].clone(), s, ids[v as usize].clone()));
                }
            }
        }
        BallFile {
            generators: g
                .spec()
                .generators
                .iter()
                .map(|x| BallGenerator {
                    label: x.label.clone(),
                    inverse: GeneratorRef::Index(x.inverse_index),
                })
                .collect(),
            basepoint: ids[0].clone(),
            radius: self.radius,
            vertices: ids,
            edges,
        }
    }

    pub fn summary(&self) -> BallSummary {
        BallSummary {
            group: self.group.spec().descriptor(),
            radius: self.radius,
            vertices: self.len(),
            sphere_sizes: self.sphere_sizes(),
            generators: self
                .group
                .spec()
                .generators
                .iter()
                .map(|g| g.label.clone())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallSummary {
    pub group: String,
    pub radius: u32,
    pub vertices: usize,
    pub sphere_sizes: Vec<usize>,
    pub generators: Vec<String>,
}

/// `(b|c)_a = ½[d(a,b) + d(a,c) − d(b,c)]`.
pub fn gromov_product(group: &Group, a: &GroupElement, b: &GroupElement, c: &GroupElement) -> Result<HalfInt> {
    let ab = group.distance(a, b)? as i64;
    let ac = group.distance(a, c)? as i64;
    let bc = group.distance(b, c)? as i64;
    Ok(HalfInt::from_twice(ab + ac - bc))
}

/// Largest `d(q[x,y](t), q[x,z](t))` over the three corners `x` of the
/// triangle and all `t ≤ (y|z)_x`.
pub fn triangle_deviation(group: &Group, a: &GroupElement, b: &GroupElement, c: &GroupElement) -> Result<usize> {
    let mut worst = 0;
    for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
        let gp = gromov_product(group, x, y, z)?.floor().max(0) as usize;
        for t in 1..=gp {
            let v = q_point(group, x, y, t)?;
            let w = q_point(group, x, z, t)?;
            worst = worst.max(group.distance(&v, &w)?);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertReport {
    pub delta: u32,
    pub samples: usize,
    pub skipped: usize,
    pub exhaustive_radius: u32,
    pub max_deviation: usize,
    pub witness: Option<[String; 3]>,
    pub pass: bool,
    /// Which geodesics were examined. Triangles built from other geodesics
    /// are not covered by the certificate.
    pub scope: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_sizes() {
        let g = Group::free(2, 1).unwrap();
        let b = CayleyBall::build(&g, 2, 64).unwrap();
        assert_eq!(b.len(), 17);
        assert_eq!(b.sphere_sizes(), vec![1, 4, 12]);
        let b0 = CayleyBall::build(&g, 0, 64).unwrap();
        assert_eq!(b0.len(), 1);
        let p = Group::free_product_cyclic(&[2, 3], 1).unwrap();
        let b1 = CayleyBall::build(&p, 1, 64).unwrap();
        let words: Vec<_> = b1.elements().map(|v| p.format(v)).collect();
        assert_eq!(words, ["e", "s", "t", "t^2"]);
    }

    #[test]
    fn resource_budget() {
        let g = Group::free(3, 1).unwrap();
        assert!(matches!(
            CayleyBall::build(&g, 14, 1),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn distances_and_products() {
        let g = Group::free(2, 1).unwrap();
        let ball = CayleyBall::build(&g, 3, 64).unwrap();
        let w = |s: &str| g.parse(s).unwrap();
        assert_eq!(ball.distance(&w("a"), &w("a")).unwrap(), 0);
        assert_eq!(ball.distance(&w("ab"), &w("aB")).unwrap(), 2);
        let e = g.identity();
        assert_eq!(ball.gromov_product(&e, &w("a"), &w("b")).unwrap(), HalfInt::from_int(0));
        assert_eq!(ball.gromov_product(&e, &w("ab"), &w("a")).unwrap(), HalfInt::from_int(1));
        assert_eq!(ball.gromov_product(&e, &w("ab"), &w("ab")).unwrap(), HalfInt::from_int(2));
        let p = Group::free_product_cyclic(&[2, 3], 1).unwrap();
        let st = p.parse("st").unwrap();
        let s = p.parse("s").unwrap();
        assert_eq!(p.distance(&st, &s).unwrap(), 1);
    }

    #[test]
    fn spheres() {
        let g = Group::free(2, 1).unwrap();
        let ball = CayleyBall::build(&g, 4, 64).unwrap();
        let e = g.identity();
        assert_eq!(ball.sphere(&e, 3).unwrap().members.len(), 36);
        let a = g.parse("a").unwrap();
        assert_eq!(ball.sphere(&a, 0).unwrap().members, vec![a.clone()]);
        assert_eq!(ball.ball_around(&a, 0).unwrap().members, vec![a.clone()]);
        assert!(ball.ball_around(&a, 3).unwrap().complete);
        let far = ball.ball_around(&a, 4).unwrap();
        assert!(!far.complete);
        assert!(far.members.iter().all(|v| v.len() <= 4));
    }

    #[test]
    fn half_int_display() {
        assert_eq!(HalfInt::from_twice(5).to_string(), "2.5");
        assert_eq!(HalfInt::from_twice(4).to_string(), "2");
        assert_eq!(HalfInt::from_twice(5).floor(), 2);
    }

    #[test]
    fn tree_certificate() {
        let g = Group::free(2, 1).unwrap();
        let ball = CayleyBall::build(&g, 5, 64).unwrap();
        let rep = ball.certify_delta(1, 300, 1).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_deviation, 0);
        let e = g.identity();
        assert_eq!(triangle_deviation(&g, &e, &e, &e).unwrap(), 0);
    }
}
