use cayley_lp::analysis::{
    estimate_upsilon, select_p, DecaySampleSet, EnvelopeOptions, PCandidate, PSelection, SelectOptions, TailModel,
};
use cayley_lp::bicombing::q_path;
use cayley_lp::cocycle::{cocycle_norm_ball, cocycle_norm_exact, properness_count};
use cayley_lp::{CayleyBall, Group, GroupElement, Mineyev};
use serde::Serialize;

use crate::config::{PSetting, RunConfig};
use crate::CliError;

/// Rendered command output and whether every invariant it checked held.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub pass: bool,
}

impl Outcome {
    pub(crate) fn json(value: &impl Serialize, pass: bool) -> Result<Self, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(Self { text, pass })
    }
}

/// Largest radius whose pairs `(b, a)` still leave the recursion margin of
/// an explicit ball; the configured radius for built-in families.
pub fn analysis_radius(cfg: &RunConfig, group: &Group) -> u32 {
    match group.explicit_radius() {
        Some(r) => cfg.radius.min(r.saturating_sub(group.delta()) / 2),
        None => cfg.radius,
    }
}

/// Ball, growth constant and sampled chain pairs shared by the fitting steps.
pub struct Analysis<'g> {
    pub ball: CayleyBall<'g>,
    pub upsilon: f64,
    pub set: DecaySampleSet,
}

impl<'g> Analysis<'g> {
    pub fn new(cfg: &RunConfig, m: &Mineyev<'g>) -> Result<Self, CliError> {
        let group = m.group();
        let ball = CayleyBall::build(group, analysis_radius(cfg, group), cfg.memory_budget_mb)?;
        let upsilon = estimate_upsilon(&ball)?;
        let set = DecaySampleSet::draw(m, &ball, cfg.samples, cfg.seed)?;
        Ok(Self { ball, upsilon, set })
    }

    pub fn select(&self) -> Result<PSelection, CliError> {
        Ok(select_p(
            self.upsilon,
            |p| Ok(self.set.fit_h(p, EnvelopeOptions::default())?.base),
            SelectOptions::default(),
        )?)
    }

    pub fn tail_model(&self, p: f64) -> Result<TailModel, CliError> {
        let fit = self.set.fit_h(p, EnvelopeOptions::default())?;
        Ok(TailModel {
            c: fit.constant,
            rho: fit.base,
            upsilon: self.upsilon,
        })
    }
}

#[derive(Serialize)]
pub struct SelectReport {
    pub upsilon: f64,
    pub candidates: Vec<PCandidate>,
    pub chosen_p: f64,
    pub margin: f64,
    pub rho_used: f64,
    pub target: f64,
    pub radius: u32,
    pub samples: usize,
}

pub fn cmd_ball(cfg: &RunConfig, export: bool) -> Result<Outcome, CliError> {
    let group = cfg.build_group()?;
    let ball = CayleyBall::build(&group, cfg.radius, cfg.memory_budget_mb)?;
    if export {
        Outcome::json(&ball.to_ball_file(), true)
    } else {
        Outcome::json(&ball.summary(), true)
    }
}

pub fn cmd_certify_delta(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let group = cfg.build_group()?;
    let ball = CayleyBall::build(&group, cfg.radius, cfg.memory_budget_mb)?;
    let report = ball.certify_delta(cfg.delta, cfg.samples, cfg.seed)?;
    let pass = report.pass;
    Outcome::json(&report, pass)
}

pub fn cmd_path(cfg: &RunConfig, a: &str, b: &str) -> Result<Outcome, CliError> {
    let group = cfg.build_group()?;
    let path = q_path(&group, &group.parse(a)?, &group.parse(b)?)?;
    Outcome::json(&path.to_json(&group), true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainKind {
    F,
    H,
}

#[derive(Serialize)]
struct ChainReport {
    basepoint: String,
    target: String,
    which: &'static str,
    chain: serde_json::Value,
}

/// `f(b, a)` or `h(b, a)` with `b` the basepoint.
pub fn cmd_chain(cfg: &RunConfig, basepoint: &str, target: &str, which: ChainKind) -> Result<Outcome, CliError> {
    let group = cfg.build_group()?;
    let m = Mineyev::new(&group)?;
    let (b, a) = (group.parse(basepoint)?, group.parse(target)?);
    let chain = match which {
        ChainKind::F => serde_json::to_value(m.f_chain(&b, &a)?.to_json(&group))?,
        ChainKind::H => {
            let p = resolve_p(cfg, &m)?.0;
            serde_json::to_value(m.h_chain(&b, &a, p)?.to_json(&group))?
        }
    };
    let report = ChainReport {
        basepoint: group.format(&b),
        target: group.format(&a),
        which: match which {
            ChainKind::F => "f",
            ChainKind::H => "h",
        },
        chain,
    };
    Outcome::json(&report, true)
}

pub fn cmd_select_p(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let group = cfg.build_group()?;
    let m = Mineyev::new(&group)?;
    let analysis = Analysis::new(cfg, &m)?;
    let sel = analysis.select()?;
    let report = SelectReport {
        upsilon: sel.upsilon,
        chosen_p: sel.p,
        margin: sel.margin,
        rho_used: sel.rho_used,
        target: sel.target,
        candidates: sel.candidates,
        radius: analysis.ball.radius(),
        samples: cfg.samples,
    };
    Outcome::json(&report, true)
}

/// The configured exponent, running the selection when it is `auto`.
fn resolve_p<'g>(cfg: &RunConfig, m: &Mineyev<'g>) -> Result<(f64, Option<Analysis<'g>>), CliError> {
    match cfg.p {
        PSetting::Fixed(p) => Ok((p, None)),
        PSetting::Auto => {
            let analysis = Analysis::new(cfg, m)?;
            let p = analysis.select()?.p;
            Ok((p, Some(analysis)))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CocycleReport {
    pub g: String,
    pub d_g_e: usize,
    pub p: f64,
    pub lower: f64,
    pub tail_bound: f64,
    pub exact: bool,
    pub properness_count: usize,
    /// `lower ≥ d(g,e) − 100δ`.
    #[serde(rename = "paper_bound_ok")]
    pub bound_100delta_ok: bool,
    /// `lower ≥ 2(d(g,e) − 20δ − 1)`.
    pub bound_20delta_ok: bool,
    pub window_size: usize,
    pub nonzero: usize,
    pub witness: Option<String>,
}

impl CocycleReport {
    pub fn pass(&self) -> bool {
        self.witness.is_none()
    }
}

/// Evaluates `‖b(g)‖_pᵖ` for each word: exactly on trees, otherwise on the
/// ball `B(e, radius)` with the fitted tail bound.
pub fn cocycle_reports(cfg: &RunConfig, words: &[String]) -> Result<Vec<CocycleReport>, CliError> {
    let group = cfg.build_group()?;
    let m = Mineyev::new(&group)?;
    let (p, analysis) = resolve_p(cfg, &m)?;
    let window = if group.is_tree() {
        None
    } else {
        let analysis = match analysis {
            Some(a) => a,
            None => Analysis::new(cfg, &m)?,
        };
        let tail = analysis.tail_model(p)?;
        Some((CayleyBall::build(&group, cfg.radius, cfg.memory_budget_mb)?, tail))
    };
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        let g = group.parse(w)?;
        let norm = match &window {
            None => cocycle_norm_exact(&m, &g, p, false)?,
            Some((ball, tail)) => cocycle_norm_ball(&m, ball, &g, p, *tail, false)?,
        };
        out.push(cocycle_report(&m, &g, p, norm)?);
    }
    Ok(out)
}

fn cocycle_report(
    m: &Mineyev<'_>,
    g: &GroupElement,
    p: f64,
    norm: cayley_lp::cocycle::CocycleNorm,
) -> Result<CocycleReport, CliError> {
    let group = m.group();
    let d = g.len();
    let delta = m.delta() as f64;
    let count = properness_count(m, g)?;
    let sharp = 2.0 * (d as f64 - 20.0 * delta - 1.0);
    let mut witness = count
        .witness
        .as_ref()
        .map(|gamma| format!("supports of h({gamma}, g) and h({gamma}, e) overlap"));
    let bound_20delta_ok = norm.lower >= sharp;
    if norm.window.exact && !bound_20delta_ok && witness.is_none() {
        witness = Some(format!("lower = {} < 2(d − 20δ − 1) = {sharp}", norm.lower));
    }
    Ok(CocycleReport {
        g: group.format(g),
        d_g_e: d,
        p,
        lower: norm.lower,
        tail_bound: norm.tail_bound,
        exact: norm.window.exact,
        properness_count: count.count,
        bound_100delta_ok: norm.lower >= d as f64 - 100.0 * delta,
        bound_20delta_ok,
        window_size: norm.window.size,
        nonzero: norm.window.nonzero,
        witness,
    })
}

pub fn cmd_cocycle(cfg: &RunConfig, word: &str) -> Result<Outcome, CliError> {
    let report = cocycle_reports(cfg, &[word.to_string()])?.remove(0);
    let pass = report.pass();
    Outcome::json(&report, pass)
}

#[derive(Serialize)]
struct ReportRow<'a> {
    g_word: &'a str,
    d_g_e: usize,
    p: f64,
    lower: f64,
    tail_bound: f64,
    properness_count: usize,
    bound_20delta_ok: bool,
    bound_100delta_ok: bool,
}

/// CSV of cocycle norms, one row per word.
pub fn cmd_report(cfg: &RunConfig, words: &[String]) -> Result<Outcome, CliError> {
    if words.is_empty() {
        return Err(CliError::Config("report needs at least one group element".into()));
    }
    let reports = cocycle_reports(cfg, words)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &reports {
        w.serialize(ReportRow {
            g_word: &r.g,
            d_g_e: r.d_g_e,
            p: r.p,
            lower: r.lower,
            tail_bound: r.tail_bound,
            properness_count: r.properness_count,
            bound_20delta_ok: r.bound_20delta_ok,
            bound_100delta_ok: r.bound_100delta_ok,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(Outcome {
        text: String::from_utf8(bytes).expect("csv output is UTF-8"),
        pass: reports.iter().all(CocycleReport::pass),
    })
}

/// `word^1, …, word^max_k`.
pub fn powers(word: &str, max_k: u32) -> Vec<String> {
    (1..=max_k).map(|k| format!("({word})^{k}")).collect()
}
