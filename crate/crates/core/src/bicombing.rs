//! The equivariant geodesic bicombing `q`.
//!
//! `q[a,b] = a · q[e, a⁻¹b]`, where the path from `e` toward `x` greedily
//! steps along the least generator (in generator order) that shortens the
//! remaining distance. Equivariance holds by construction.
//!
//! Paths are not cached: for the free-product families the path toward `x`
//! is the prefix sequence of its normal form, and for explicit balls each
//! greedy step is a handful of table lookups, both cheaper than a hash probe.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Group, GroupElement};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeodesicPath {
    pub origin: GroupElement,
    pub terminus: GroupElement,
    pub vertices: Vec<GroupElement>,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() == 1
    }

    pub fn to_json(&self, group: &Group) -> PathJson {
        PathJson {
            origin: group.format(&self.origin),
            terminus: group.format(&self.terminus),
            length: self.len(),
            vertices: self.vertices.iter().map(|v| group.format(v)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathJson {
    pub origin: String,
    pub terminus: String,
    pub length: usize,
    pub vertices: Vec<String>,
}

/// `q[e,x](t)`.
pub fn canonical_point(group: &Group, x: &GroupElement, t: usize) -> Result<GroupElement> {
    let n = x.len();
    if t > n {
        return Err(Error::Range { t, len: n });
    }
    if group.prefix_geodesics() {
        return Ok(x.prefix(t));
    }
    let mut here = group.identity();
    let mut rest = x.clone();
    for _ in 0..t {
        let s = group
            .least_descent(&rest)?
            .ok_or_else(|| no_descent(group, &rest))?;
        here = group.multiply_gen(&here, s)?;
        rest = group.descend(&rest, s)?;
    }
    Ok(here)
}

/// The vertices of `q[e,x]`.
pub fn canonical_path(group: &Group, x: &GroupElement) -> Result<Vec<GroupElement>> {
    let n = x.len();
    if group.prefix_geodesics() {
        return Ok((0..=n).map(|t| x.prefix(t)).collect());
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut here = group.identity();
    let mut rest = x.clone();
    out.push(here.clone());
    while !rest.is_identity() {
        let s = group
            .least_descent(&rest)?
            .ok_or_else(|| no_descent(group, &rest))?;
        here = group.multiply_gen(&here, s)?;
        rest = group.descend(&rest, s)?;
        out.push(here.clone());
    }
    if out.len() != n + 1 {
        return Err(Error::Invariant(format!(
            "greedy path toward {} has {} steps, expected {n}",
            group.format(x),
            out.len() - 1
        )));
    }
    Ok(out)
}

fn no_descent(group: &Group, y: &GroupElement) -> Error {
    Error::Invariant(format!(
        "no generator shortens {} although it is not the identity",
        group.format(y)
    ))
}

pub fn q_path(group: &Group, a: &GroupElement, b: &GroupElement) -> Result<GeodesicPath> {
    let x = group.multiply(&group.invert(a)?, b)?;
    let vertices = canonical_path(group, &x)?
        .iter()
        .map(|v| group.multiply(a, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeodesicPath {
        origin: a.clone(),
        terminus: b.clone(),
        vertices,
    })
}

/// `q[a,b](t)`, the vertex at distance `t` from `a` on `q[a,b]`.
pub fn q_point(group: &Group, a: &GroupElement, b: &GroupElement, t: usize) -> Result<GroupElement> {
    let x = group.multiply(&group.invert(a)?, b)?;
    let v = canonical_point(group, &x, t)?;
    group.multiply(a, &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_path() {
        let g = Group::free(2, 1).unwrap();
        let a = g.parse("a").unwrap();
        let p = q_path(&g, &a, &a).unwrap();
        assert_eq!(p.vertices, vec![a]);
    }

    #[test]
    fn free_group_paths() {
        let g = Group::free(2, 1).unwrap();
        let ab = g.parse("ab").unwrap();
        let p = q_path(&g, &g.identity(), &ab).unwrap();
        let words: Vec<_> = p.vertices.iter().map(|v| g.format(v)).collect();
        assert_eq!(words, ["e", "a", "ab"]);
        let a5 = g.parse("a^5").unwrap();
        assert_eq!(q_point(&g, &g.identity(), &a5, 3).unwrap(), g.parse("aaa").unwrap());
        assert!(matches!(
            q_point(&g, &g.identity(), &a5, 6),
            Err(Error::Range { t: 6, len: 5 })
        ));
    }

    #[test]
    fn endpoints() {
        let g = Group::free_product_cyclic(&[2, 3], 1).unwrap();
        let a = g.parse("st").unwrap();
        let b = g.parse("t^2st").unwrap();
        let d = g.distance(&a, &b).unwrap();
        assert_eq!(q_point(&g, &a, &b, 0).unwrap(), a);
        assert_eq!(q_point(&g, &a, &b, d).unwrap(), b);
    }

    #[test]
    fn cyclic_product_path_and_translate() {
        let g = Group::free_product_cyclic(&[2, 3], 1).unwrap();
        let s = g.parse("s").unwrap();
        let st = g.parse("st").unwrap();
        let p = q_path(&g, &g.identity(), &st).unwrap();
        let words: Vec<_> = p.vertices.iter().map(|v| g.format(v)).collect();
        assert_eq!(words, ["e", "s", "st"]);
        let moved = q_path(&g, &s, &g.multiply(&s, &st).unwrap()).unwrap();
        let expect: Vec<_> = p.vertices.iter().map(|v| g.multiply(&s, v).unwrap()).collect();
        assert_eq!(moved.vertices, expect);
    }
}
