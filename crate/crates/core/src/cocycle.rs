//! The cocycle `b(g) = π(g)η − η` of the affine action, evaluated on finite
//! windows, and the exact finite lemmas behind its properness.
//!
//! `η(γ) = h(γ, e)` and `(π(g)ξ)(γ) = g·ξ(g⁻¹γ)`, so by equivariance
//! `b(g)(γ) = h(γ, g) − h(γ, e) = γ·(h(e, γ⁻¹g) − h(e, γ⁻¹))`; norms are
//! computed from the right-hand side.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{tail_bound, TailModel};
use crate::bicombing::{canonical_path, q_path};
use crate::cayley::CayleyBall;
use crate::chains::Chain0;
use crate::error::{Error, Result};
use crate::group::{Group, GroupElement};
use crate::mineyev::{h_difference_power, HChain, Mineyev};

/// `η(γ) = h(γ, e)`.
pub fn eta_at(m: &Mineyev<'_>, gamma: &GroupElement, p: f64) -> Result<HChain> {
    m.h_chain(gamma, &m.group().identity(), p)
}

/// `b(g)(γ) = h(γ, g) − h(γ, e)`, kept as its two terms.
#[derive(Clone, Debug)]
pub struct BValue {
    pub plus: HChain,
    pub minus: HChain,
}

impl BValue {
    pub fn is_zero(&self) -> bool {
        self.plus.f == self.minus.f
    }

    /// `‖b(g)(γ)‖_pᵖ`.
    pub fn norm_p_pow(&self) -> f64 {
        h_difference_power(&self.plus, &self.minus)
    }

    /// Coefficients in double precision, sorted by element.
    pub fn coefficients(&self) -> Vec<(GroupElement, f64)> {
        let mut map: BTreeMap<&GroupElement, f64> = BTreeMap::new();
        for (g, c) in self.plus.coefficients() {
            *map.entry(g).or_default() += c;
        }
        for (g, c) in self.minus.coefficients() {
            *map.entry(g).or_default() -= c;
        }
        map.into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(g, c)| (g.clone(), c))
            .collect()
    }
}

pub fn b_at(m: &Mineyev<'_>, g: &GroupElement, gamma: &GroupElement, p: f64) -> Result<BValue> {
    Ok(BValue {
        plus: m.h_chain(gamma, g, p)?,
        minus: m.h_chain(gamma, &m.group().identity(), p)?,
    })
}

/// `‖b(g)(γ)‖_pᵖ` through the basepoint: `‖h(e, γ⁻¹g) − h(e, γ⁻¹)‖_pᵖ`.
pub fn b_norm_p_pow(m: &Mineyev<'_>, g: &GroupElement, gamma: &GroupElement, p: f64) -> Result<f64> {
    let group = m.group();
    let ginv = group.invert(gamma)?;
    let x = group.multiply(&ginv, g)?;
    let fx = m.f_e(&x)?;
    let fy = m.f_e(&ginv)?;
    if fx == fy {
        return Ok(0.0);
    }
    if is_unit_mass(&fx) && is_unit_mass(&fy) {
        return Ok(2.0);
    }
    Ok(h_difference_power(&HChain::new(fx, p)?, &HChain::new(fy, p)?))
}

fn is_unit_mass(f: &Chain0) -> bool {
    f.len() == 1 && f.entries()[0].1.is_one()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// The `10δ`-neighbourhood of `q[e,g]` in a tree, which contains the
    /// whole support of `b(g)`.
    AxisNeighborhood,
    /// `B(e, R)`.
    Ball { radius: u32 },
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleWindow {
    pub kind: WindowKind,
    pub p: f64,
    /// Number of vertices `γ` evaluated.
    pub size: usize,
    /// Number of `γ` with `b(g)(γ) ≠ 0`.
    pub nonzero: usize,
    pub partial_norm_p_pow: f64,
    pub tail_bound: f64,
    pub exact: bool,
    /// Nonzero `(γ, ‖b(g)(γ)‖_pᵖ)` sorted by `γ`, when requested.
    #[serde(skip)]
    pub values: Vec<(GroupElement, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleNorm {
    pub lower: f64,
    pub tail_bound: f64,
    pub window: CocycleWindow,
}

#[derive(Default)]
struct Partial {
    size: usize,
    nonzero: usize,
    sum: f64,
    values: Vec<(GroupElement, f64)>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.size += other.size;
        self.nonzero += other.nonzero;
        self.sum += other.sum;
        self.values.extend(other.values);
        self
    }

    fn record(&mut self, gamma: &GroupElement, v: f64, retain: bool) {
        self.size += 1;
        if v != 0.0 {
            self.nonzero += 1;
            self.sum += v;
            if retain {
                self.values.push((gamma.clone(), v));
            }
        }
    }
}

/// `Σ_γ ‖b(g)(γ)‖_pᵖ` over the whole support, for trees. Every vertex within
/// distance `10δ` of `q[e,g]` is visited exactly once; a nonzero value at
/// distance exactly `10δ` would mean the support leaks past the window and is
/// reported as an exactness error.
pub fn cocycle_norm_exact(m: &Mineyev<'_>, g: &GroupElement, p: f64, retain: bool) -> Result<CocycleNorm> {
    let group = m.group();
    if !group.is_tree() {
        return Err(Error::Exactness(format!(
            "{} is not a tree; use a ball window with a tail bound",
            group.spec().descriptor()
        )));
    }
    let l = m.l();
    let axis = canonical_path(group, g)?;
    let d = axis.len() - 1;
    let nbhd = CayleyBall::build(group, l as u32, u64::MAX >> 20)?;
    let small: Vec<&GroupElement> = nbhd.elements().collect();
    // seg[i][i - j] = v_j⁻¹ v_i for |i - j| ≤ 2L
    let inv: Vec<GroupElement> = axis.iter().map(|v| group.invert(v)).collect::<Result<_>>()?;
    let reach = 2 * l;
    let seg = |j: usize, i: usize| group.multiply(&inv[j], &axis[i]);

    let parts = (0..=d)
        .into_par_iter()
        .map(|i| {
            let back: Vec<GroupElement> = (i.saturating_sub(reach)..i).map(|j| seg(j, i)).collect::<Result<_>>()?;
            let around: Vec<GroupElement> = (i.saturating_sub(reach)..=(i + reach).min(d))
                .map(|j| seg(j, i))
                .collect::<Result<_>>()?;
            let mut part = Partial::default();
            for y in &small {
                // owned by the first axis vertex within distance L
                let mut owned = true;
                for s in &back {
                    if group.product_length(s, y)? <= l {
                        owned = false;
                        break;
                    }
                }
                if !owned {
                    continue;
                }
                let gamma = group.multiply(&axis[i], y)?;
                let v = b_norm_p_pow(m, g, &gamma, p)?;
                if v != 0.0 && y.len() == l {
                    let mut to_axis = usize::MAX;
                    for s in &around {
                        to_axis = to_axis.min(group.product_length(s, y)?);
                    }
                    if to_axis >= l {
                        return Err(Error::Exactness(format!(
                            "b({})({}) is nonzero at distance {to_axis} from the axis",
                            group.format(g),
                            group.format(&gamma)
                        )));
                    }
                }
                part.record(&gamma, v, retain);
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = parts.into_iter().fold(Partial::default(), Partial::merge);
    Ok(finish(total, WindowKind::AxisNeighborhood, p, 0.0, true))
}

/// `Σ_{γ ∈ B(e,R)} ‖b(g)(γ)‖_pᵖ` plus the geometric tail bound for the rest.
pub fn cocycle_norm_ball(
    m: &Mineyev<'_>,
    ball: &CayleyBall<'_>,
    g: &GroupElement,
    p: f64,
    tail: TailModel,
    retain: bool,
) -> Result<CocycleNorm> {
    let ratio = tail.rho.powf(p) * tail.upsilon;
    if !(ratio < 0.5) {
        return Err(Error::PSelection(format!(
            "ρᵖυ = {ratio} at p = {p}; the tail series needs it below ½"
        )));
    }
    let bound = tail_bound(tail.c, tail.rho, p, tail.upsilon, ball.radius() as i64, g.len() as u64)?;
    let elements: Vec<&GroupElement> = ball.elements().collect();
    let parts = elements
        .par_chunks(1024)
        .map(|chunk| {
            let mut part = Partial::default();
            for gamma in chunk {
                part.record(gamma, b_norm_p_pow(m, g, gamma, p)?, retain);
            }
            Ok(part)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = parts.into_iter().fold(Partial::default(), Partial::merge);
    Ok(finish(
        total,
        WindowKind::Ball {
            radius: ball.radius(),
        },
        p,
        bound,
        false,
    ))
}

fn finish(mut total: Partial, kind: WindowKind, p: f64, tail: f64, exact: bool) -> CocycleNorm {
    total.values.sort_by(|a, b| a.0.cmp(&b.0));
    CocycleNorm {
        lower: total.sum,
        tail_bound: tail,
        window: CocycleWindow {
            kind,
            p,
            size: total.size,
            nonzero: total.nonzero,
            partial_norm_p_pow: total.sum,
            tail_bound: tail,
            exact,
            values: total.values,
        },
    }
}

/// Whether `supp h(γ,g)` and `supp h(γ,e)` are disjoint, for `γ` on
/// `q[g,e]` at distance at least `10δ` from both ends.
pub fn disjoint_support_check(m: &Mineyev<'_>, g: &GroupElement, gamma: &GroupElement) -> Result<bool> {
    let group = m.group();
    let e = group.identity();
    let l = m.l();
    let (dg, de, d) = (
        group.distance(gamma, g)?,
        group.distance(gamma, &e)?,
        g.len(),
    );
    if dg < l || de < l || dg + de != d || crate::bicombing::q_point(group, g, &e, dg)? != *gamma {
        return Err(Error::Domain(format!(
            "{} is not a vertex of q[{}, e] at distance ≥ 10δ from both ends",
            group.format(gamma),
            group.format(g)
        )));
    }
    let x = m.f_chain(gamma, g)?;
    let y = m.f_chain(gamma, &e)?;
    Ok(supports_disjoint(&x, &y))
}

fn supports_disjoint(x: &Chain0, y: &Chain0) -> bool {
    let (mut i, mut j) = (0, 0);
    let (a, b) = (x.entries(), y.entries());
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProperCount {
    pub d: usize,
    /// Vertices of `q[g,e]` at distance at least `10δ` from both ends.
    pub admissible: usize,
    /// Admissible vertices whose two supports are disjoint.
    pub count: usize,
    /// First admissible vertex with overlapping supports, if any.
    pub witness: Option<String>,
}

/// Counts `γ` on `q[g,e]` with `d(γ,e), d(γ,g) ≥ 10δ` and disjoint supports
/// of `h(γ,g)` and `h(γ,e)`. Each contributes exactly 2 to `‖b(g)‖_pᵖ`.
pub fn properness_count(m: &Mineyev<'_>, g: &GroupElement) -> Result<ProperCount> {
    let group = m.group();
    let e = group.identity();
    let l = m.l();
    let path = q_path(group, g, &e)?;
    let d = path.len();
    let mut out = ProperCount {
        d,
        admissible: 0,
        count: 0,
        witness: None,
    };
    if d < 2 * l {
        return Ok(out);
    }
    for gamma in &path.vertices[l..=d - l] {
        out.admissible += 1;
        if supports_disjoint(&m.f_chain(gamma, g)?, &m.f_chain(gamma, &e)?) {
            out.count += 1;
        } else if out.witness.is_none() {
            out.witness = Some(group.format(gamma));
        }
    }
    Ok(out)
}

/// Formal combination of normalized chains `Σ r · h`, expanded over
/// `(vertex, normalizer class)`. Two `f`s with the same multiset of absolute
/// coefficients have the same ℓᵖ norm for every `p`, so a zero formal sum is
/// an exact zero whatever the normalizers evaluate to.
#[derive(Default)]
struct FormalSum {
    terms: BTreeMap<(GroupElement, Vec<BigRational>), BigRational>,
}

impl FormalSum {
    fn add(&mut self, sign: i32, f: &Chain0) {
        let mut key: Vec<BigRational> = f.entries().iter().map(|(_, c)| c.abs()).collect();
        key.sort();
        for (g, c) in f.entries() {
            let entry = self
                .terms
                .entry((g.clone(), key.clone()))
                .or_insert_with(BigRational::zero);
            if sign > 0 {
                *entry += c;
            } else {
                *entry -= c;
            }
        }
    }

    fn residual(&self) -> Option<&GroupElement> {
        self.terms
            .iter()
            .find(|(_, c)| !c.is_zero())
            .map(|((g, _), _)| g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub g: String,
    pub k: String,
    pub checked: usize,
    pub residual_zero: bool,
}

/// Checks `b(gk)(γ) = g·b(k)(g⁻¹γ) + b(g)(γ)` at every `γ` of the window, at
/// the level of `f`-chains with shared normalizers. The translated term is
/// computed at basepoint `g⁻¹γ` and moved by `g`.
pub fn verify_cocycle_identity(
    m: &Mineyev<'_>,
    g: &GroupElement,
    k: &GroupElement,
    window: &[GroupElement],
) -> Result<IdentityReport> {
    let group = m.group();
    let e = group.identity();
    let gk = group.multiply(g, k)?;
    let ginv = group.invert(g)?;
    let witness = window
        .par_iter()
        .map(|gamma| -> Result<Option<GroupElement>> {
            let back = group.multiply(&ginv, gamma)?;
            let mut sum = FormalSum::default();
            sum.add(1, &m.f_chain(gamma, &gk)?);
            sum.add(-1, &m.f_chain(gamma, &e)?);
            sum.add(-1, &m.f_chain(&back, k)?.translate(group, g)?);
            sum.add(1, &m.f_chain(&back, &e)?.translate(group, g)?);
            sum.add(-1, &m.f_chain(gamma, g)?);
            sum.add(1, &m.f_chain(gamma, &e)?);
            Ok(sum.residual().map(|_| gamma.clone()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .min();
    if let Some(gamma) = witness {
        return Err(Error::Invariant(format!(
            "cocycle identity fails for g = {}, k = {} at γ = {}",
            group.format(g),
            group.format(k),
            group.format(&gamma)
        )));
    }
    Ok(IdentityReport {
        g: group.format(g),
        k: group.format(k),
        checked: window.len(),
        residual_zero: true,
    })
}

/// `(π(g)ξ)(γ) = g·ξ(g⁻¹γ)` on a finitely supported vector `γ ↦ ξ(γ)`.
pub fn pi_apply(group: &Group, g: &GroupElement, xi: &[(GroupElement, Chain0)]) -> Result<Vec<(GroupElement, Chain0)>> {
    let mut out = xi
        .iter()
        .map(|(gamma, c)| Ok((group.multiply(g, gamma)?, c.translate(group, g)?)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
