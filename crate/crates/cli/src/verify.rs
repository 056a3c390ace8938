use cayley_lp::analysis::{fit_f_decay, EnvelopeOptions};
use cayley_lp::bicombing::q_point;
use cayley_lp::cocycle::{cocycle_norm_exact, properness_count, verify_cocycle_identity};
use cayley_lp::{CayleyBall, Chain0, Error, Group, GroupElement, Mineyev};
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{Analysis, Outcome};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub checked: usize,
    /// Cases that needed vertices outside a finite ball.
    pub skipped: usize,
    pub pass: bool,
    pub witness: Option<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            skipped: 0,
            pass: true,
            witness: None,
        }
    }

    fn record(&mut self, result: cayley_lp::Result<bool>, describe: impl FnOnce() -> String) -> Result<(), CliError> {
        match result {
            Ok(ok) => {
                self.checked += 1;
                if !ok {
                    self.pass = false;
                    self.witness.get_or_insert_with(describe);
                }
                Ok(())
            }
            Err(e) if e.is_window() => {
                self.skipped += 1;
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn fail(&mut self, witness: String) {
        self.pass = false;
        self.witness.get_or_insert(witness);
    }
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub group: String,
    pub radius: u32,
    pub delta: u32,
    pub seed: u64,
    pub samples: usize,
    pub upsilon: f64,
    pub chosen_p: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &'a [GroupElement]) -> &'a GroupElement {
    &xs[rng.gen_range(0..xs.len())]
}

/// Runs every invariant suite on the configured group.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let group = cfg.build_group()?;
    let m = Mineyev::new(&group)?;
    let analysis = Analysis::new(cfg, &m)?;
    let mut checks = Vec::new();

    let cert_ball = CayleyBall::build(&group, cfg.radius.min(6), cfg.memory_budget_mb)?;
    let cert = cert_ball.certify_delta(cfg.delta, cfg.samples, cfg.seed)?;
    let mut c = Check::new("delta_certificate");
    c.checked = cert.samples;
    c.skipped = cert.skipped;
    if !cert.pass {
        c.fail(format!(
            "triangle {:?} deviates by {}",
            cert.witness.clone().unwrap_or_default(),
            cert.max_deviation
        ));
    }
    checks.push(c);

    let mut c = Check::new("growth_constant");
    let mut total = 0usize;
    for (r, s) in analysis.ball.sphere_sizes().into_iter().enumerate() {
        total += s;
        c.record(Ok(total as f64 <= analysis.upsilon.powi(r as i32)), || {
            format!("#B(e,{r}) = {total} exceeds υ^{r}")
        })?;
    }
    checks.push(c);

    checks.extend(pair_checks(cfg, &m, &analysis.ball)?);
    checks.push(identity_check(cfg, &m)?);
    checks.push(disjointness_check(cfg, &m, &analysis.ball)?);
    if group.is_tree() {
        checks.push(properness_check(cfg, &m)?);
    }

    let mut c = Check::new("f_decay_fit");
    match fit_f_decay(&m, &analysis.ball, cfg.samples, cfg.seed, EnvelopeOptions::default()) {
        Ok(fit) => {
            c.checked = fit.samples.len();
            if !(fit.base < 1.0) || !fit.violations().is_empty() {
                c.fail(format!("base {} with {} violations", fit.base, fit.violations().len()));
            }
        }
        Err(e @ (Error::NoDecay(_) | Error::FitUnderdetermined(_) | Error::Invariant(_))) => c.fail(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    checks.push(c);

    let mut c = Check::new("p_selection");
    let chosen_p = match analysis.select() {
        Ok(sel) => {
            c.checked = sel.candidates.len();
            if !(sel.rho_used.powf(sel.p) * sel.upsilon < 0.5) {
                c.fail(format!("ρᵖυ = {} at p = {}", sel.rho_used.powf(sel.p) * sel.upsilon, sel.p));
            }
            Some(sel.p)
        }
        Err(CliError::Core(e @ (Error::PSelection(_) | Error::NoDecay(_) | Error::FitUnderdetermined(_)))) => {
            c.fail(e.to_string());
            None
        }
        Err(e) => return Err(e),
    };
    checks.push(c);

    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        group: group.spec().descriptor(),
        radius: cfg.radius,
        delta: cfg.delta,
        seed: cfg.seed,
        samples: cfg.samples,
        upsilon: analysis.upsilon,
        chosen_p,
        checks,
        pass,
    };
    Outcome::json(&report, pass)
}

/// `Ok(None)` when the case needed vertices outside a finite ball.
fn windowed(r: cayley_lp::Result<bool>) -> cayley_lp::Result<Option<bool>> {
    match r {
        Ok(ok) => Ok(Some(ok)),
        Err(e) if e.is_window() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Convexity, support containment, equivariance and agreement with the
/// literal recursion on sampled pairs `(b, a)`.
fn pair_checks(cfg: &RunConfig, m: &Mineyev<'_>, ball: &CayleyBall<'_>) -> Result<Vec<Check>, CliError> {
    let group = m.group();
    let elements: Vec<GroupElement> = ball.elements().cloned().collect();
    let near: Vec<GroupElement> = ball.elements().filter(|x| x.len() <= 2).cloned().collect();
    let results = (0..cfg.samples)
        .into_par_iter()
        .map(|i| -> cayley_lp::Result<([Option<bool>; 4], String)> {
            let mut rng = rng_for(cfg.seed ^ 0x5041_4952, i as u64);
            let b = pick(&mut rng, &near).clone();
            let a = pick(&mut rng, &elements).clone();
            let h = pick(&mut rng, &near).clone();
            let label = format!("b = {}, a = {}, g = {}", group.format(&b), group.format(&a), group.format(&h));
            let f = match m.f_chain(&b, &a) {
                Ok(f) => f,
                Err(e) if e.is_window() => return Ok(([None; 4], label)),
                Err(e) => return Err(e),
            };
            let convex = f.coefficient_sum().is_one() && f.entries().iter().all(|(_, c)| c.is_positive());
            let equivariant = (|| {
                let moved = m.f_chain(&group.multiply(&h, &b)?, &group.multiply(&h, &a)?)?;
                Ok(moved == f.translate(group, &h)?)
            })();
            Ok((
                [
                    Some(convex),
                    windowed(support_ok(m, &b, &a, &f))?,
                    windowed(equivariant)?,
                    windowed(m.f_chain_literal(&b, &a).map(|lit| lit == f))?,
                ],
                label,
            ))
        })
        .collect::<cayley_lp::Result<Vec<_>>>()?;
    let mut checks = [
        Check::new("convex_combination"),
        Check::new("support_containment"),
        Check::new("equivariance"),
        Check::new("literal_recursion"),
    ];
    for (flags, label) in results {
        for (c, flag) in checks.iter_mut().zip(flags) {
            match flag {
                Some(ok) => c.record(Ok(ok), || label.clone())?,
                None => c.skipped += 1,
            }
        }
    }
    Ok(checks.into())
}

fn support_ok(m: &Mineyev<'_>, b: &GroupElement, a: &GroupElement, f: &Chain0) -> cayley_lp::Result<bool> {
    let group = m.group();
    if group.distance(b, a)? <= m.l() {
        return Ok(*f == Chain0::point(a.clone()));
    }
    let anchor = q_point(group, b, a, m.l())?;
    for x in f.support() {
        if group.distance(b, x)? != m.l() || group.distance(&anchor, x)? > m.delta() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `b(gk) = π(g)b(k) + b(g)` for a few pairs over `B(e, min(R, 6))`.
fn identity_check(cfg: &RunConfig, m: &Mineyev<'_>) -> Result<Check, CliError> {
    let group = m.group();
    let small = CayleyBall::build(group, cfg.radius.min(6), cfg.memory_budget_mb)?;
    let window: Vec<GroupElement> = small.elements().cloned().collect();
    let mut rng = rng_for(cfg.seed ^ 0x4944_454e, 0);
    let mut c = Check::new("cocycle_identity");
    for _ in 0..8 {
        let g = pick(&mut rng, &window).clone();
        let k = pick(&mut rng, &window).clone();
        let label = format!("g = {}, k = {}", group.format(&g), group.format(&k));
        match verify_cocycle_identity(m, &g, &k, &window) {
            Err(Error::Invariant(w)) => c.record(Ok(false), || w)?,
            other => c.record(other.map(|r| r.residual_zero), || label)?,
        }
    }
    Ok(c)
}

/// Every admissible vertex of `q[g,e]` separates the supports of `h(γ,g)` and `h(γ,e)`.
fn disjointness_check(cfg: &RunConfig, m: &Mineyev<'_>, ball: &CayleyBall<'_>) -> Result<Check, CliError> {
    let group = m.group();
    let min_len = 2 * m.l();
    let mut rng = rng_for(cfg.seed ^ 0x4449_534a, 0);
    let mut c = Check::new("disjoint_supports");
    let far: Vec<GroupElement> = ball.elements().filter(|x| x.len() >= min_len).cloned().collect();
    for _ in 0..20 {
        let g = if group.explicit_radius().is_some() {
            if far.is_empty() {
                break;
            }
            pick(&mut rng, &far).clone()
        } else {
            let n = rng.gen_range(min_len..=min_len + 10);
            group.random_element(&mut rng, n)
        };
        let count = properness_count(m, &g);
        let label = || format!("g = {}", group.format(&g));
        match count {
            Ok(pc) => c.record(Ok(pc.witness.is_none()), || {
                format!("{}, γ = {}", label(), pc.witness.clone().unwrap_or_default())
            })?,
            Err(e) => c.record(Err(e), label)?,
        }
    }
    Ok(c)
}

/// `‖b(g)‖_pᵖ ≥ 2(d − 20δ − 1)` in exact tree mode for two words of length `20δ + 2`.
fn properness_check(cfg: &RunConfig, m: &Mineyev<'_>) -> Result<Check, CliError> {
    let group: &Group = m.group();
    let d = 2 * m.l() + 2;
    let first = group.ordered_generators().next().expect("groups have generators");
    let axis = group.from_word(&vec![first; d])?;
    let mut rng = rng_for(cfg.seed ^ 0x5052_4f50, 0);
    let random = group.random_element(&mut rng, d);
    let mut c = Check::new("properness");
    for g in [axis, random] {
        let norm = cocycle_norm_exact(m, &g, 2.0, false);
        let bound = 2.0 * (d as f64 - 2.0 * m.l() as f64 - 1.0);
        let label = || format!("g = {}", group.format(&g));
        c.record(norm.map(|n| n.lower >= bound), label)?;
    }
    Ok(c)
}
