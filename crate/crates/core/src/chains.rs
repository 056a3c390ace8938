//! Finitely supported 0-chains with exact rational coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, GroupElement};

/// `Σ c_γ γ`, kept as entries sorted by element with no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Chain0 {
    entries: Vec<(GroupElement, BigRational)>,
}

impl Chain0 {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit point mass `δ_g`.
    pub fn point(g: GroupElement) -> Self {
        Self {
            entries: vec![(g, BigRational::one())],
        }
    }

    /// Sums duplicate elements and drops zero coefficients.
    pub fn from_terms(terms: impl IntoIterator<Item = (GroupElement, BigRational)>) -> Self {
        let mut entries: Vec<_> = terms.into_iter().collect();
        entries.sort_by(|x, y| x.0.cmp(&y.0));
        let mut out: Vec<(GroupElement, BigRational)> = Vec::with_capacity(entries.len());
        for (g, c) in entries {
            match out.last_mut() {
                Some((h, acc)) if *h == g => *acc += c,
                _ => out.push((g, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        Self { entries: out }
    }

    pub fn entries(&self) -> &[(GroupElement, BigRational)] {
        &self.entries
    }

    pub fn support(&self) -> impl ExactSizeIterator<Item = &GroupElement> {
        self.entries.iter().map(|(g, _)| g)
    }

    pub fn coefficient(&self, g: &GroupElement) -> Option<&BigRational> {
        self.entries
            .binary_search_by(|(h, _)| h.cmp(g))
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add(&self, other: &Chain0) -> Chain0 {
        self.combine(other, |c| c.clone())
    }

    pub fn sub(&self, other: &Chain0) -> Chain0 {
        self.combine(other, |c| -c)
    }

    fn combine(&self, other: &Chain0, map_other: impl Fn(&BigRational) -> BigRational) -> Chain0 {
        let (x, y) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(x.len() + y.len());
        let (mut i, mut j) = (0, 0);
        while i < x.len() || j < y.len() {
            let ord = match (x.get(i), y.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match ord {
                std::cmp::Ordering::Less => {
                    out.push(x[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((y[j].0.clone(), map_other(&y[j].1)));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = &x[i].1 + map_other(&y[j].1);
                    if !c.is_zero() {
                        out.push((x[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Chain0 { entries: out }
    }

    pub fn scale(&self, r: &BigRational) -> Chain0 {
        if r.is_zero() {
            return Chain0::zero();
        }
        Chain0 {
            entries: self.entries.iter().map(|(g, c)| (g.clone(), c * r)).collect(),
        }
    }

    pub fn coefficient_sum(&self) -> BigRational {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    pub fn norm_1(&self) -> BigRational {
        self.entries.iter().map(|(_, c)| c.abs()).sum()
    }

    /// `Σ |c|^p` exactly, for integer `p`.
    pub fn power_sum(&self, p: u32) -> BigRational {
        self.entries.iter().map(|(_, c)| c.abs().pow(p as i32)).sum()
    }

    /// `(Σ |c|^p)^(1/p)` in double precision.
    pub fn norm_p(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("norm exponent {p} < 1")));
        }
        Ok(norm_p_of(self.entries.iter().map(|(_, c)| rational_to_f64(c)), p))
    }

    /// `g · Σ c_γ γ = Σ c_γ (gγ)`.
    pub fn translate(&self, group: &Group, g: &GroupElement) -> Result<Chain0> {
        if g.is_identity() {
            return Ok(self.clone());
        }
        let mut entries = self
            .entries
            .iter()
            .map(|(h, c)| Ok((group.multiply(g, h)?, c.clone())))
            .collect::<Result<Vec<_>>>()?;
        entries.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(Chain0 { entries })
    }

    pub fn to_json(&self, group: &Group) -> ChainJson {
        ChainJson {
            entries: self
                .entries
                .iter()
                .map(|(g, c)| ChainEntry(group.format(g), c.numer().clone(), c.denom().clone()))
                .collect(),
        }
    }

    pub fn from_json(group: &Group, json: &ChainJson) -> Result<Chain0> {
        let mut terms = Vec::with_capacity(json.entries.len());
        for ChainEntry(word, num, den) in &json.entries {
            if den.is_zero() {
                return Err(Error::Domain(format!("zero denominator for {word}")));
            }
            terms.push((group.parse(word)?, BigRational::new(num.clone(), den.clone())));
        }
        Ok(Chain0::from_terms(terms))
    }
}

/// `{entries: [[word, numerator, denominator]]}` with integers written as
/// JSON numbers of arbitrary size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainJson {
    pub entries: Vec<ChainEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry(
    pub String,
    #[serde(with = "json_bigint")] pub BigInt,
    #[serde(with = "json_bigint")] pub BigInt,
);

mod json_bigint {
    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::Number;

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        let n: Number = x.to_string().parse().map_err(serde::ser::Error::custom)?;
        n.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let n = Number::deserialize(d)?;
        n.to_string().parse().map_err(D::Error::custom)
    }
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// ℓᵖ norm of a coefficient sequence, scaled by its largest magnitude so
/// that small coefficients raised to large `p` do not underflow.
pub(crate) fn norm_p_of(values: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let m = values.clone().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = values.map(|v| (v.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}
