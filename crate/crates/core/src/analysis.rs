//! Growth constant, exponential decay envelopes, the choice of `p`, and the
//! geometric tail bound for the cocycle norm.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bicombing::q_point;
use crate::cayley::{gromov_product, CayleyBall, HalfInt};
use crate::chains::{rational_to_f64, Chain0};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::mineyev::{h_difference_power, HChain, Mineyev};

/// `max_r #B(e,r)^(1/r)`, nudged up so that `#B(e,r) ≤ υ^r` holds in floating
/// point for every materialized radius.
pub fn estimate_upsilon(ball: &CayleyBall<'_>) -> Result<f64> {
    if ball.radius() < 2 {
        return Err(Error::Domain(format!(
            "growth estimate needs radius ≥ 2, got {}",
            ball.radius()
        )));
    }
    let mut cumulative = Vec::new();
    let mut total = 0usize;
    for s in ball.sphere_sizes() {
        total += s;
        cumulative.push(total as f64);
    }
    let mut upsilon = (1..cumulative.len())
        .map(|r| cumulative[r].powf(1.0 / r as f64))
        .fold(1.0f64, f64::max);
    for (r, &b) in cumulative.iter().enumerate().skip(1) {
        while upsilon.powi(r as i32) < b {
            upsilon = upsilon.next_up();
        }
    }
    Ok(upsilon)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecaySample {
    pub gromov_product: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub constant: f64,
    pub base: f64,
    pub fit_mode: &'static str,
    pub samples: Vec<DecaySample>,
}

impl DecayFit {
    /// `constant · base^x`.
    pub fn envelope(&self, x: f64) -> f64 {
        envelope_value(self.constant, self.base, x)
    }

    /// Samples lying above the envelope; empty after a successful fit.
    pub fn violations(&self) -> Vec<DecaySample> {
        self.samples
            .iter()
            .filter(|s| s.value > self.envelope(s.gromov_product))
            .copied()
            .collect()
    }
}

fn envelope_value(c: f64, base: f64, x: f64) -> f64 {
    if x == 0.0 {
        c
    } else {
        c * base.powf(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeOptions {
    /// Lower clamp on the fitted base; keeps the constant finite when the
    /// samples vanish beyond some Gromov product.
    pub min_base: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { min_base: 0.01 }
    }
}

/// Fits `C·λ^x` above every `(x, y)` sample.
///
/// Among all dominating envelopes with `λ` in `[min_base, 1]`, picks the one
/// that is smallest at the largest sampled `x`, i.e. it minimizes
/// `log C + X log λ`, a linear program in `(log C, log λ)`; ties go to the
/// larger `λ`. `C` is then the least constant that dominates the samples for
/// that `λ`. Samples that vanish beyond some `x` push `λ` down to `min_base`.
pub fn fit_envelope(samples: &[DecaySample], opts: EnvelopeOptions) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::FitUnderdetermined("no samples".into()));
    }
    let x0 = samples[0].gromov_product;
    if samples.iter().all(|s| s.gromov_product == x0) {
        return Err(Error::FitUnderdetermined(format!(
            "every sample has Gromov product {x0}"
        )));
    }
    if let Some(bad) = samples.iter().find(|s| !(s.value >= 0.0) || !(s.gromov_product >= 0.0)) {
        return Err(Error::Domain(format!("invalid decay sample {bad:?}")));
    }
    // the largest value at each Gromov product is all that constrains the fit
    let mut lines: Vec<(f64, f64)> = Vec::new();
    for s in samples.iter().filter(|s| s.value > 0.0) {
        match lines.iter_mut().find(|(x, _)| *x == s.gromov_product) {
            Some(l) => l.1 = l.1.max(s.value.ln()),
            None => lines.push((s.gromov_product, s.value.ln())),
        }
    }
    if lines.is_empty() {
        return Ok((0.0, opts.min_base));
    }
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x_max = samples.iter().map(|s| s.gromov_product).fold(0.0, f64::max);
    let (lo, hi) = (opts.min_base.ln(), 0.0f64);
    let log_c = |v: f64| lines.iter().map(|&(x, ly)| ly - x * v).fold(f64::NEG_INFINITY, f64::max);
    let objective = |v: f64| log_c(v) + x_max * v;
    let mut candidates = vec![lo, hi];
    for (i, &(xi, yi)) in lines.iter().enumerate() {
        for &(xj, yj) in &lines[i + 1..] {
            let v = (yj - yi) / (xj - xi);
            if v > lo && v < hi {
                candidates.push(v);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, hi);
    for &v in &candidates {
        let o = objective(v);
        // ties go to the larger base, the more conservative envelope
        if o < best.0 - 1e-12 || (o <= best.0 + 1e-12 && v > best.1) {
            best = (o, v);
        }
    }
    let base = best.1.exp();
    if base >= 1.0 - 1e-12 {
        return Err(Error::NoDecay(format!(
            "the tightest envelope over {} samples has base 1",
            samples.len()
        )));
    }
    let c = samples
        .iter()
        .map(|s| s.value / envelope_value(1.0, base, s.gromov_product))
        .fold(0.0, f64::max)
        * (1.0 + 1e-12);
    Ok((c, base))
}

fn finish_fit(mut samples: Vec<DecaySample>, opts: EnvelopeOptions) -> Result<DecayFit> {
    samples.sort_by(|a, b| {
        a.gromov_product
            .total_cmp(&b.gromov_product)
            .then(a.value.total_cmp(&b.value))
    });
    let (constant, base) = fit_envelope(&samples, opts)?;
    let fit = DecayFit {
        constant,
        base,
        fit_mode: "upper_envelope",
        samples,
    };
    if let Some(v) = fit.violations().first() {
        return Err(Error::Invariant(format!(
            "decay sample {v:?} lies above the fitted envelope"
        )));
    }
    Ok(fit)
}

/// Draws `(b, a, a')` triples in the ball. Three quarters of them put `a'`
/// near a random point of `q[b,a]` so that large Gromov products show up;
/// the rest are uniform. Each sample has its own stream of the seeded RNG.
pub fn sample_triples(ball: &CayleyBall<'_>, count: usize, seed: u64) -> Result<Vec<[GroupElement; 3]>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_triple(ball, &mut rng)
        })
        .collect()
}

fn sample_triple(ball: &CayleyBall<'_>, rng: &mut ChaCha8Rng) -> Result<[GroupElement; 3]> {
    let group = ball.group();
    let n = ball.len();
    for _ in 0..64 {
        let b = ball.element(rng.gen_range(0..n)).clone();
        let a = ball.element(rng.gen_range(0..n)).clone();
        if rng.gen_bool(0.25) {
            let a2 = ball.element(rng.gen_range(0..n)).clone();
            return Ok([b, a, a2]);
        }
        let d = group.distance(&b, &a)?;
        let k = rng.gen_range(0..=d);
        let c = match q_point(group, &b, &a, k) {
            Ok(c) => c,
            Err(e) if e.is_window() => continue,
            Err(e) => return Err(e),
        };
        for _ in 0..8 {
            let len = rng.gen_range(0..=d - k + 1);
            let w = group.random_element(rng, len);
            match group.multiply(&c, &w) {
                Ok(a2) if ball.contains(&a2) => return Ok([b, a, a2]),
                Ok(_) => {}
                Err(e) if e.is_window() => {}
                Err(e) => return Err(e),
            }
        }
        if ball.contains(&c) {
            return Ok([b, a, c]);
        }
    }
    Err(Error::Domain("could not draw a triple inside the ball".into()))
}

/// Exact `‖f(b,a) − f(b,a')‖₁` against `(a|a')_b` over sampled triples.
pub fn fit_f_decay(
    m: &Mineyev<'_>,
    ball: &CayleyBall<'_>,
    count: usize,
    seed: u64,
    opts: EnvelopeOptions,
) -> Result<DecayFit> {
    let set = DecaySampleSet::draw(m, ball, count, seed)?;
    let samples = set
        .pairs
        .par_iter()
        .map(|(gp, x, y)| DecaySample {
            gromov_product: gp.to_f64(),
            value: rational_to_f64(&x.sub(y).norm_1()),
        })
        .collect();
    finish_fit(samples, opts)
}

/// `‖h(b,a) − h(b,a')‖_p` against `(a|a')_b` over sampled triples.
pub fn fit_h_decay(
    m: &Mineyev<'_>,
    ball: &CayleyBall<'_>,
    p: f64,
    count: usize,
    seed: u64,
    opts: EnvelopeOptions,
) -> Result<DecayFit> {
    DecaySampleSet::draw(m, ball, count, seed)?.fit_h(p, opts)
}

/// Sampled triples with their `f` chains, reusable across exponents.
/// Chains are stored at basepoint `e`; translating by `b` changes no norm.
pub struct DecaySampleSet {
    pairs: Vec<(HalfInt, Arc<Chain0>, Arc<Chain0>)>,
}

impl DecaySampleSet {
    pub fn draw(m: &Mineyev<'_>, ball: &CayleyBall<'_>, count: usize, seed: u64) -> Result<Self> {
        let group = m.group();
        let triples = sample_triples(ball, count, seed)?;
        let pairs = triples
            .par_iter()
            .map(|[b, a, a2]| {
                let binv = group.invert(b)?;
                let x = m.f_e(&group.multiply(&binv, a)?)?;
                let y = m.f_e(&group.multiply(&binv, a2)?)?;
                Ok((gromov_product(group, b, a, a2)?, x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn fit_h(&self, p: f64, opts: EnvelopeOptions) -> Result<DecayFit> {
        let samples = self
            .pairs
            .par_iter()
            .map(|(gp, x, y)| {
                let hx = HChain::new(Arc::clone(x), p)?;
                let hy = HChain::new(Arc::clone(y), p)?;
                Ok(DecaySample {
                    gromov_product: gp.to_f64(),
                    value: h_difference_power(&hx, &hy).powf(1.0 / p),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        finish_fit(samples, opts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectOptions {
    pub p_min: f64,
    /// Grid resolution: candidates are multiples of `1 / steps_per_unit`.
    pub steps_per_unit: u32,
    pub ceiling: f64,
    /// Required bound on `ρᵖυ`; must not exceed ½.
    pub target: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            p_min: 2.0,
            steps_per_unit: 10,
            ceiling: 64.0,
            target: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PCandidate {
    pub p: f64,
    pub rho: f64,
    pub rho_p_upsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PSelection {
    pub upsilon: f64,
    pub p: f64,
    pub rho_used: f64,
    /// `½ − ρᵖυ`.
    pub margin: f64,
    pub target: f64,
    pub candidates: Vec<PCandidate>,
}

/// Smallest grid point `p ≥ p_min` with `ρ(p)ᵖ υ < target`.
pub fn select_p(
    upsilon: f64,
    mut rho_of_p: impl FnMut(f64) -> Result<f64>,
    opts: SelectOptions,
) -> Result<PSelection> {
    if !(opts.target > 0.0 && opts.target <= 0.5) {
        return Err(Error::Domain(format!(
            "selection target {} outside (0, ½]",
            opts.target
        )));
    }
    if opts.steps_per_unit == 0 {
        return Err(Error::Domain("grid needs at least one step per unit".into()));
    }
    let k = opts.steps_per_unit as f64;
    let first = (opts.p_min.max(2.0) * k - 1e-9).ceil() as u64;
    let last = (opts.ceiling * k + 1e-9).floor() as u64;
    let mut candidates = Vec::new();
    for n in first..=last {
        let p = n as f64 / k;
        let rho = rho_of_p(p)?;
        let value = rho.powf(p) * upsilon;
        candidates.push(PCandidate {
            p,
            rho,
            rho_p_upsilon: value,
        });
        if value < opts.target {
            assert!(value < 0.5, "selected p must satisfy ρᵖυ < ½");
            return Ok(PSelection {
                upsilon,
                p,
                rho_used: rho,
                margin: 0.5 - value,
                target: opts.target,
                candidates,
            });
        }
    }
    let last = candidates
        .last()
        .map(|c| format!("; at p = {} ρ = {} gives ρᵖυ = {}", c.p, c.rho, c.rho_p_upsilon))
        .unwrap_or_default();
    Err(Error::PSelection(format!(
        "no p ≤ {} reaches ρᵖυ < {} with υ = {upsilon}{last}",
        opts.ceiling, opts.target
    )))
}

/// `Cᵖ ρ^(−pd) (ρᵖυ)^(R+1) / (1 − ρᵖυ)`, the part of `Σ_n Cᵖ ρ^(p(n−d)) υⁿ`
/// beyond layer `R`. `R = −1` gives the whole series.
pub fn tail_bound(c: f64, rho: f64, p: f64, upsilon: f64, r: i64, d: u64) -> Result<f64> {
    let ratio = rho.powf(p) * upsilon;
    if !(ratio < 0.5) {
        return Err(Error::Domain(format!("ρᵖυ = {ratio} is not below ½")));
    }
    if r < -1 {
        return Err(Error::Domain(format!("window radius {r} < -1")));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    if rho == 0.0 {
        // only layers n ≤ d carry mass
        return Ok(if r >= d as i64 { 0.0 } else { f64::INFINITY });
    }
    let log = p * c.ln() - p * d as f64 * rho.ln() + (r + 1) as f64 * ratio.ln() - (1.0 - ratio).ln();
    Ok(log.exp())
}

/// Fitted constants feeding [`tail_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailModel {
    pub c: f64,
    pub rho: f64,
    pub upsilon: f64,
}
