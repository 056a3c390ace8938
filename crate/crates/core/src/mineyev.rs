//! Flowers, projections and the recursive convex-combination chain `f(a,b)`
//! together with its ℓᵖ normalization `h`.
//!
//! With `L = 10δ`:
//!
//! 1. `f(a,b) = δ_b` if `d(a,b) ≤ L`;
//! 2. `f(a,b) = f(a, pr_a(b))` if `d(a,b)` is not a multiple of `L`;
//! 3. `f(a,b) = (1/#Fl(a,b)) Σ_{x ∈ Fl(a,b)} f(a, pr_a(x))` otherwise,
//!
//! where `pr_a(b) = q[a,b](t)` for the largest multiple `t` of `L` strictly
//! below `d(a,b)` and `Fl(v,w) = S(v, d(v,w)) ∩ B(w, δ)`.
//!
//! Everything is evaluated at the basepoint `e` and translated, since
//! `f(a,b) = a · f(e, a⁻¹b)`. [`Mineyev::f_chain_literal`] runs the
//! recursion at the actual basepoint instead and exists to test that identity.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use dashmap::DashMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rustc_hash::FxBuildHasher;
use serde::Serialize;

use crate::bicombing::{canonical_point, q_point};
use crate::cayley::CayleyBall;
use crate::chains::{norm_p_of, rational_to_f64, Chain0, ChainJson};
use crate::error::{Error, Result};
use crate::group::{Group, GroupElement};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowerSet {
    pub viewpoint: GroupElement,
    pub center: GroupElement,
    pub members: Vec<GroupElement>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub audits: u64,
    pub entries: usize,
}

/// `‖f‖_p`, kept exactly as `Σ|c|^p` when `p` is an integer.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub p: f64,
    pub power_sum: Option<BigRational>,
    pub norm: f64,
}

/// `h = f / ‖f‖_p`, stored as `f` and its normalizer.
#[derive(Clone, Debug)]
pub struct HChain {
    pub f: Arc<Chain0>,
    pub normalizer: Normalizer,
}

impl HChain {
    pub fn new(f: Arc<Chain0>, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("norm exponent {p} < 1")));
        }
        let unit = f.len() == 1 && f.entries()[0].1.is_one();
        let normalizer = if unit {
            Normalizer {
                p,
                power_sum: Some(BigRational::one()),
                norm: 1.0,
            }
        } else if p.fract() == 0.0 && p <= u32::MAX as f64 {
            let s = f.power_sum(p as u32);
            let norm = rational_to_f64(&s).powf(1.0 / p);
            Normalizer {
                p,
                power_sum: Some(s),
                norm,
            }
        } else {
            Normalizer {
                p,
                power_sum: None,
                norm: f.norm_p(p)?,
            }
        };
        Ok(Self { f, normalizer })
    }

    /// Coefficients of `h` in double precision.
    pub fn coefficients(&self) -> impl Iterator<Item = (&GroupElement, f64)> + Clone + '_ {
        let n = self.normalizer.norm;
        self.f
            .entries()
            .iter()
            .map(move |(g, c)| (g, rational_to_f64(c) / n))
    }

    pub fn norm_p(&self) -> f64 {
        norm_p_of(self.coefficients().map(|(_, c)| c), self.normalizer.p)
    }

    pub fn to_json(&self, group: &Group) -> HChainJson {
        HChainJson {
            f: self.f.to_json(group),
            p: self.normalizer.p,
            power_sum: self
                .normalizer
                .power_sum
                .as_ref()
                .map(|s| (s.numer().to_string(), s.denom().to_string())),
            norm: self.normalizer.norm,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HChainJson {
    pub f: ChainJson,
    pub p: f64,
    pub power_sum: Option<(String, String)>,
    pub norm: f64,
}

/// `‖h − h'‖_pᵖ` from the two chains and their normalizers. Exactly zero when
/// the underlying `f`s coincide.
pub fn h_difference_power(x: &HChain, y: &HChain) -> f64 {
    let p = x.normalizer.p;
    if x.f == y.f {
        return 0.0;
    }
    let (nx, ny) = (x.normalizer.norm, y.normalizer.norm);
    let (a, b) = (x.f.entries(), y.f.entries());
    let (mut i, mut j) = (0, 0);
    let mut diffs = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(u), Some(v)) => u.0.cmp(&v.0),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                diffs.push(rational_to_f64(&a[i].1) / nx);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                diffs.push(-rational_to_f64(&b[j].1) / ny);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                diffs.push(rational_to_f64(&a[i].1) / nx - rational_to_f64(&b[j].1) / ny);
                i += 1;
                j += 1;
            }
        }
    }
    diffs.iter().map(|d| d.abs().powf(p)).sum()
}

/// Evaluator for `f` and `h` over one group, with a bounded shared memo of
/// the averaging nodes `f(e, x)`, `|x|` a multiple of `L` above `L`.
pub struct Mineyev<'g> {
    group: &'g Group,
    delta: usize,
    l: usize,
    small_ball: Vec<GroupElement>,
    cache: DashMap<GroupElement, Arc<Chain0>, FxBuildHasher>,
    capacity: usize,
    audit_every: u64,
    hits: AtomicU64,
    misses: AtomicU64,
    audits: AtomicU64,
}

pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 18;

impl<'g> Mineyev<'g> {
    pub fn new(group: &'g Group) -> Result<Self> {
        let delta = group.delta() as usize;
        if let Some(r) = group.explicit_radius() {
            if (r as usize) < delta {
                return Err(Error::Margin {
                    what: "B(e, δ)".into(),
                    radius: r,
                    required: delta as u32,
                });
            }
        }
        let small_ball = CayleyBall::build(group, delta as u32, u64::MAX >> 20)?
            .elements()
            .cloned()
            .collect();
        Ok(Self {
            group,
            delta,
            l: 10 * delta,
            small_ball,
            cache: DashMap::with_hasher(FxBuildHasher),
            capacity: DEFAULT_CACHE_CAPACITY,
            audit_every: 100,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            audits: AtomicU64::new(0),
        })
    }

    /// Bounds the memo; it is cleared whenever it reaches `capacity` entries.
    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn group(&self) -> &'g Group {
        self.group
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// `L = 10δ`.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            audits: self.audits.load(Ordering::Relaxed),
            entries: self.cache.len(),
        }
    }

    /// `Fl(v, w) = S(v, d(v,w)) ∩ B(w, δ)`, sorted.
    pub fn flower(&self, v: &GroupElement, w: &GroupElement) -> Result<FlowerSet> {
        let g = self.group;
        let d = g.distance(v, w)?;
        let vinv = g.invert(v)?;
        let mut members = Vec::new();
        for y in &self.small_ball {
            let x = g.multiply(w, y).map_err(exactness)?;
            if g.product_length(&vinv, &x).map_err(exactness)? == d {
                members.push(x);
            }
        }
        members.sort();
        Ok(FlowerSet {
            viewpoint: v.clone(),
            center: w.clone(),
            members,
        })
    }

    /// `pr_a(b)`.
    pub fn project(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        let d = self.group.distance(a, b)?;
        q_point(self.group, a, b, self.projection_distance(d))
    }

    /// Largest multiple of `L` strictly below `d` (zero for `d = 0`).
    pub fn projection_distance(&self, d: usize) -> usize {
        if d == 0 {
            0
        } else {
            self.l * ((d - 1) / self.l)
        }
    }

    fn check_margin(&self, x: &GroupElement) -> Result<()> {
        if let Some(r) = self.group.explicit_radius() {
            let need = x.len() + self.delta;
            if need > r as usize {
                return Err(Error::Margin {
                    what: format!("f(e, {})", self.group.format(x)),
                    radius: r,
                    required: need as u32,
                });
            }
        }
        Ok(())
    }

    /// `f(e, x)`.
    pub fn f_e(&self, x: &GroupElement) -> Result<Arc<Chain0>> {
        let n = x.len();
        if n <= self.l {
            return Ok(Arc::new(Chain0::point(x.clone())));
        }
        let t = self.projection_distance(n);
        if t + self.l != n {
            let pr = canonical_point(self.group, x, t)?;
            return self.f_e(&pr);
        }
        self.check_margin(x)?;
        let flower = self.flower(&self.group.identity(), x)?;
        if let [petal] = flower.members.as_slice() {
            // a single petal is a plain projection: nothing to average or memoize
            return self.f_e(&self.petal_projection(petal, n)?);
        }
        if let Some(hit) = self.cache.get(x).map(|c| Arc::clone(&c)) {
            let k = self.hits.fetch_add(1, Ordering::Relaxed) + 1;
            if k.is_multiple_of(self.audit_every) {
                self.audits.fetch_add(1, Ordering::Relaxed);
                let fresh = self.average(&flower, n)?;
                if fresh != *hit {
                    return Err(Error::Invariant(format!(
                        "memoized f(e, {}) differs from recomputation",
                        self.group.format(x)
                    )));
                }
            }
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let value = Arc::new(self.average(&flower, n)?);
        if self.cache.len() >= self.capacity {
            self.cache.clear();
        }
        self.cache.insert(x.clone(), Arc::clone(&value));
        Ok(value)
    }

    /// `pr_e(m)` for a flower member `m` with `|m| = n`, which must sit at
    /// distance `n - L`.
    fn petal_projection(&self, m: &GroupElement, n: usize) -> Result<GroupElement> {
        let pr = canonical_point(self.group, m, n - self.l)?;
        if pr.len() != n - self.l {
            return Err(Error::Invariant(format!(
                "projection of flower member {} is not at distance {}",
                self.group.format(m),
                n - self.l
            )));
        }
        Ok(pr)
    }

    /// Rule 3 at the basepoint `e`: the average of `f(e, pr_e(m))` over the
    /// flower of `x`, `|x| = n`.
    fn average(&self, flower: &FlowerSet, n: usize) -> Result<Chain0> {
        let mut terms = Vec::new();
        for m in &flower.members {
            let sub = self.f_e(&self.petal_projection(m, n)?)?;
            terms.extend(sub.entries().iter().cloned());
        }
        let k = BigRational::new(BigInt::one(), BigInt::from(flower.members.len()));
        Ok(Chain0::from_terms(terms).scale(&k))
    }

    /// `f(a, b) = a · f(e, a⁻¹b)`.
    pub fn f_chain(&self, a: &GroupElement, b: &GroupElement) -> Result<Chain0> {
        let x = self.group.multiply(&self.group.invert(a)?, b)?;
        self.f_e(&x)?.translate(self.group, a)
    }

    /// `f(a, b)` by the recursion run at basepoint `a`, without translation
    /// and without the memo.
    pub fn f_chain_literal(&self, a: &GroupElement, b: &GroupElement) -> Result<Chain0> {
        let g = self.group;
        let d = g.distance(a, b)?;
        if d <= self.l {
            return Ok(Chain0::point(b.clone()));
        }
        if d % self.l != 0 {
            return self.f_chain_literal(a, &self.project(a, b)?);
        }
        let flower = self.flower(a, b)?;
        let mut terms = Vec::new();
        for m in &flower.members {
            let pr = self.project(a, m)?;
            if g.distance(a, &pr)? != d - self.l {
                return Err(Error::Invariant(format!(
                    "projection from {} of {} does not drop by L",
                    g.format(a),
                    g.format(m)
                )));
            }
            terms.extend(self.f_chain_literal(a, &pr)?.entries().iter().cloned());
        }
        let k = BigRational::new(BigInt::one(), BigInt::from(flower.members.len()));
        Ok(Chain0::from_terms(terms).scale(&k))
    }

    /// `h(b, a) = f(b, a) / ‖f(b, a)‖_p`.
    pub fn h_chain(&self, b: &GroupElement, a: &GroupElement, p: f64) -> Result<HChain> {
        if !(p >= 2.0) {
            return Err(Error::Domain(format!("h is defined for p ≥ 2, got {p}")));
        }
        HChain::new(Arc::new(self.f_chain(b, a)?), p)
    }

    /// `h(e, x)`.
    pub fn h_e(&self, x: &GroupElement, p: f64) -> Result<HChain> {
        HChain::new(self.f_e(x)?, p)
    }
}

fn exactness(e: Error) -> Error {
    match e {
        Error::OutOfWindow(what) => Error::Exactness(format!("flower leaves the ball at {what}")),
        other => other,
    }
}

/// `‖f(b,a) − f(b,a')‖₁` in exact arithmetic.
pub fn f_difference_norm_1(m: &Mineyev<'_>, b: &GroupElement, a: &GroupElement, a2: &GroupElement) -> Result<BigRational> {
    let g = m.group();
    let binv = g.invert(b)?;
    let x = m.f_e(&g.multiply(&binv, a)?)?;
    let y = m.f_e(&g.multiply(&binv, a2)?)?;
    Ok(x.sub(&y).norm_1())
}
