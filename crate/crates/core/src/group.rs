//! Group elements as canonical normal-form words.
//!
//! Two kinds of groups are supported:
//!
//! * free products of cyclic groups, `Z * .. * Z * Z/m_1 * .. * Z/m_k`, which
//!   cover the free groups. Every `Z` factor contributes a generator and its
//!   inverse; every `Z/m` factor contributes all `m - 1` nontrivial powers of
//!   its cyclic generator, so a syllable always has length one. Reduced
//!   syllable sequences are then geodesic words and normal forms at once.
//! * explicit finite Cayley balls read from a file. Normal forms are the
//!   shortlex-least geodesic words (ranked by the generator order), and the
//!   group law is only defined where products stay inside the ball.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, LoadError, Result};

/// Index of a generator in the (symmetric) generating set.
pub type Gen = u8;

/// A word over the generating set. Inline storage covers the word lengths
/// the cocycle windows walk through without touching the heap.
pub type Word = SmallVec<[Gen; 48]>;

/// Fingerprint of the group structure an element belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpecId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    spec: SpecId,
    word: Word,
}

impl GroupElement {
    pub(crate) fn from_parts(spec: SpecId, word: Word) -> Self {
        Self { spec, word }
    }

    pub fn word(&self) -> &[Gen] {
        &self.word
    }

    /// Length of the normal form, which is the word metric `d(e, g)`.
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn spec_id(&self) -> SpecId {
        self.spec
    }

    /// The element spelled by the first `t` letters of the normal form.
    pub(crate) fn prefix(&self, t: usize) -> Self {
        Self {
            spec: self.spec,
            word: Word::from_slice(&self.word[..t]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorId {
    pub index: usize,
    pub label: String,
    pub inverse_index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Free { rank: usize },
    FreeProductCyclic { orders: Vec<u32> },
    ExplicitBall { source: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub family: Family,
    pub generators: Vec<GeneratorId>,
    /// Generator indices from least to greatest; drives every lexicographic
    /// tie-break (normal forms of explicit balls, greedy geodesics).
    pub generator_order: Vec<usize>,
    pub delta: u32,
}

impl GroupSpec {
    /// Short descriptor understood by [`Group::from_descriptor`].
    pub fn descriptor(&self) -> String {
        match &self.family {
            Family::Free { rank } => format!("free:{rank}"),
            Family::FreeProductCyclic { orders } => {
                let orders: Vec<String> = orders.iter().map(u32::to_string).collect();
                format!("cyclic:{}", orders.join(","))
            }
            Family::ExplicitBall { source } => format!("ball:{source}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Factor {
    Infinite,
    Cyclic(u32),
}

#[derive(Clone, Copy, Debug)]
struct Letter {
    factor: usize,
    exp: i32,
}

#[derive(Debug)]
struct FreeProduct {
    factors: Vec<Factor>,
    letters: Vec<Letter>,
    /// `by_exp[f][k]`: generator for exponent `k + 1` of cyclic factor `f`,
    /// or `[+1, -1]` generators of an infinite factor.
    by_exp: Vec<Vec<Gen>>,
}

impl FreeProduct {
    fn push_letter(&self, word: &mut Word, s: Gen) {
        if let Some(&last) = word.last() {
            let a = self.letters[last as usize];
            let b = self.letters[s as usize];
            if a.factor == b.factor {
                match self.factors[a.factor] {
                    Factor::Infinite => {
                        if a.exp != b.exp {
                            word.pop();
                            return;
                        }
                    }
                    Factor::Cyclic(m) => {
                        word.pop();
                        let e = (a.exp + b.exp).rem_euclid(m as i32);
                        if e != 0 {
                            word.push(self.by_exp[a.factor][(e - 1) as usize]);
                        }
                        return;
                    }
                }
            }
        }
        word.push(s);
    }

    /// Length of `x·y` without materializing it.
    fn product_length(&self, x: &[Gen], y: &[Gen]) -> usize {
        let (mut i, mut j) = (x.len(), 0);
        while i > 0 && j < y.len() {
            let a = self.letters[x[i - 1] as usize];
            let b = self.letters[y[j] as usize];
            if a.factor != b.factor {
                break;
            }
            match self.factors[a.factor] {
                Factor::Infinite => {
                    if a.exp == b.exp {
                        break;
                    }
                    i -= 1;
                    j += 1;
                }
                Factor::Cyclic(m) => {
                    if (a.exp + b.exp).rem_euclid(m as i32) == 0 {
                        i -= 1;
                        j += 1;
                    } else {
                        return i + y.len() - j - 1;
                    }
                }
            }
        }
        i + y.len() - j
    }

    fn inverse_gen(&self, s: Gen) -> Gen {
        let l = self.letters[s as usize];
        match self.factors[l.factor] {
            Factor::Infinite => self.by_exp[l.factor][if l.exp > 0 { 1 } else { 0 }],
            Factor::Cyclic(m) => self.by_exp[l.factor][(m as i32 - l.exp - 1) as usize],
        }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug)]
struct ExplicitBall {
    radius: u32,
    ngen: usize,
    inverse: Vec<Gen>,
    /// `nbr[v * ngen + s]` is the endpoint of the `s`-edge at `v`, or `NONE`.
    nbr: Vec<u32>,
    dist: Vec<u32>,
    words: Vec<Word>,
    index: FxHashMap<Word, u32>,
    inv: Vec<u32>,
    ids: Vec<String>,
}

impl ExplicitBall {
    fn step(&self, v: u32, s: Gen) -> Option<u32> {
        let n = self.nbr[v as usize * self.ngen + s as usize];
        (n != NONE).then_some(n)
    }

    fn walk(&self, mut v: u32, letters: impl IntoIterator<Item = Gen>) -> Option<u32> {
        for s in letters {
            v = self.step(v, s)?;
        }
        Some(v)
    }

    fn vertex(&self, word: &[Gen]) -> Option<u32> {
        self.index.get(word).copied()
    }
}

#[derive(Debug)]
enum Kind {
    FreeProduct(FreeProduct),
    Explicit(Box<ExplicitBall>),
}

/// A finitely generated group with a fixed symmetric generating set.
#[derive(Debug)]
pub struct Group {
    spec: GroupSpec,
    id: SpecId,
    rank: Vec<u32>,
    kind: Kind,
}

const FREE_LETTERS: &str = "abcdfghijklmnopqrstuvwxyz";
const CYCLIC_LETTERS: &str = "stuvwxyzpqrmnoklhjgfdcba";

fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

impl Group {
    /// The free group of the given rank on generators `a, A, b, B, ...`.
    pub fn free(rank: usize, delta: u32) -> Result<Self> {
        if rank == 0 || rank > FREE_LETTERS.len() {
            return Err(Error::InvalidSpec(format!(
                "free rank must be in 1..={}",
                FREE_LETTERS.len()
            )));
        }
        Self::free_product(
            vec![Factor::Infinite; rank],
            Family::Free { rank },
            delta,
        )
    }

    /// `Z/m_1 * ... * Z/m_k` with every nontrivial power of each cyclic
    /// generator in the generating set (`s`, `t`, `t^2`, ...).
    pub fn free_product_cyclic(orders: &[u32], delta: u32) -> Result<Self> {
        if orders.is_empty() || orders.len() > CYCLIC_LETTERS.len() {
            return Err(Error::InvalidSpec(format!(
                "need between 1 and {} cyclic factors",
                CYCLIC_LETTERS.len()
            )));
        }
        if let Some(m) = orders.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidSpec(format!("cyclic order {m} < 2")));
        }
        let factors = orders.iter().map(|&m| Factor::Cyclic(m)).collect();
        Self::free_product(
            factors,
            Family::FreeProductCyclic {
                orders: orders.to_vec(),
            },
            delta,
        )
    }

    fn free_product(factors: Vec<Factor>, family: Family, delta: u32) -> Result<Self> {
        if delta == 0 {
            return Err(Error::InvalidSpec("delta must be at least 1".into()));
        }
        let mut letters = Vec::new();
        let mut labels = Vec::new();
        let mut by_exp = Vec::new();
        let free_names: Vec<char> = FREE_LETTERS.chars().collect();
        let cyclic_names: Vec<char> = CYCLIC_LETTERS.chars().collect();
        let (mut n_free, mut n_cyclic) = (0, 0);
        for (f, factor) in factors.iter().enumerate() {
            let mut gens = Vec::new();
            match *factor {
                Factor::Infinite => {
                    let c = free_names[n_free];
                    n_free += 1;
                    for (exp, label) in [(1, c.to_string()), (-1, c.to_ascii_uppercase().to_string())] {
                        gens.push(letters.len() as Gen);
                        letters.push(Letter { factor: f, exp });
                        labels.push(label);
                    }
                }
                Factor::Cyclic(m) => {
                    let c = cyclic_names[n_cyclic];
                    n_cyclic += 1;
                    for exp in 1..m as i32 {
                        gens.push(letters.len() as Gen);
                        letters.push(Letter { factor: f, exp });
                        labels.push(if exp == 1 {
                            c.to_string()
                        } else {
                            format!("{c}^{exp}")
                        });
                    }
                }
            }
            by_exp.push(gens);
        }
        if letters.len() > Gen::MAX as usize {
            return Err(Error::InvalidSpec("too many generators".into()));
        }
        let fp = FreeProduct {
            factors,
            letters,
            by_exp,
        };
        let generators = labels
            .into_iter()
            .enumerate()
            .map(|(index, label)| GeneratorId {
                index,
                label,
                inverse_index: fp.inverse_gen(index as Gen) as usize,
            })
            .collect::<Vec<_>>();
        let spec = GroupSpec {
            family,
            generator_order: (0..generators.len()).collect(),
            generators,
            delta,
        };
        Ok(Self::assemble(spec, Kind::FreeProduct(fp), &[]))
    }

    fn assemble(spec: GroupSpec, kind: Kind, extra: &[u8]) -> Self {
        let mut rank = vec![0u32; spec.generators.len()];
        for (r, &g) in spec.generator_order.iter().enumerate() {
            rank[g] = r as u32;
        }
        let mut key = spec.descriptor().into_bytes();
        key.extend(spec.generator_order.iter().map(|&g| g as u8));
        key.extend_from_slice(extra);
        let id = SpecId(fnv1a(&key));
        Self {
            spec,
            id,
            rank,
            kind,
        }
    }

    /// Parses `free:<rank>`, `cyclic:<m1>,<m2>,...` or `ball:<path>`.
    pub fn from_descriptor(descriptor: &str, delta: u32) -> Result<Self> {
        let (kind, arg) = descriptor
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpec(format!("bad group descriptor {descriptor:?}")))?;
        let bad = || Error::InvalidSpec(format!("bad group descriptor {descriptor:?}"));
        match kind.trim() {
            "free" => Self::free(arg.trim().parse().map_err(|_| bad())?, delta),
            "cyclic" | "free_product_cyclic" => {
                let orders = arg
                    .split(',')
                    .map(|s| s.trim().parse::<u32>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                Self::free_product_cyclic(&orders, delta)
            }
            "ball" | "explicit_ball" => Self::from_ball_file(arg.trim(), delta),
            _ => Err(bad()),
        }
    }

    /// Reorders the generators for lexicographic tie-breaking. `order` lists
    /// generator labels from least to greatest.
    pub fn with_generator_order(self, order: &[&str]) -> Result<Self> {
        let n = self.spec.generators.len();
        let mut idx = Vec::with_capacity(n);
        for label in order {
            let g = self
                .spec
                .generators
                .iter()
                .position(|gen| gen.label == *label)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown generator {label:?}")))?;
            idx.push(g);
        }
        let distinct: HashSet<_> = idx.iter().collect();
        if idx.len() != n || distinct.len() != n {
            return Err(Error::InvalidSpec(
                "generator order must be a permutation of all generators".into(),
            ));
        }
        let mut spec = self.spec;
        spec.generator_order = idx;
        match self.kind {
            Kind::FreeProduct(fp) => Ok(Self::assemble(spec, Kind::FreeProduct(fp), &[])),
            Kind::Explicit(ball) => {
                // shortlex normal forms depend on the order, so rebuild
                let file = ball_file_from_explicit(&ball, &spec);
                Self::from_ball_data(&file, spec.delta, spec.family.clone(), Some(spec.generator_order))
            }
        }
    }

    pub fn from_ball_file(path: impl AsRef<Path>, delta: u32) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: BallFile = serde_json::from_str(&text)
            .map_err(|e| LoadError::Malformed(e.to_string()))?;
        Self::from_ball_data(
            &file,
            delta,
            Family::ExplicitBall {
                source: path.display().to_string(),
            },
            None,
        )
    }

    pub fn from_ball_json(text: &str, delta: u32) -> Result<Self> {
        let file: BallFile =
            serde_json::from_str(text).map_err(|e| LoadError::Malformed(e.to_string()))?;
        Self::from_ball_data(
            &file,
            delta,
            Family::ExplicitBall {
                source: "<inline>".into(),
            },
            None,
        )
    }

    fn from_ball_data(
        file: &BallFile,
        delta: u32,
        family: Family,
        order: Option<Vec<usize>>,
    ) -> Result<Self> {
        if delta == 0 {
            return Err(Error::InvalidSpec("delta must be at least 1".into()));
        }
        let ngen = file.generators.len();
        if ngen == 0 || ngen > Gen::MAX as usize {
            return Err(LoadError::Malformed(format!("unsupported generator count {ngen}")).into());
        }
        let mut inverse = Vec::with_capacity(ngen);
        let mut seen_labels = HashSet::new();
        for g in &file.generators {
            if g.label.is_empty() || !seen_labels.insert(g.label.as_str()) {
                return Err(LoadError::Malformed(format!("bad or duplicate label {:?}", g.label)).into());
            }
        }
        for g in &file.generators {
            let inv = match &g.inverse {
                GeneratorRef::Index(i) => *i,
                GeneratorRef::Label(l) => file
                    .generators
                    .iter()
                    .position(|h| &h.label == l)
                    .ok_or_else(|| LoadError::Malformed(format!("unknown inverse label {l:?}")))?,
            };
            if inv >= ngen {
                return Err(LoadError::Malformed(format!("inverse index {inv} out of range")).into());
            }
            inverse.push(inv as Gen);
        }
        for (i, &inv) in inverse.iter().enumerate() {
            if inverse[inv as usize] as usize != i {
                return Err(LoadError::Malformed(format!(
                    "inverse map is not an involution at {:?}",
                    file.generators[i].label
                ))
                .into());
            }
        }
        let order = order.unwrap_or_else(|| (0..ngen).collect());
        let mut rank = vec![0u32; ngen];
        for (r, &g) in order.iter().enumerate() {
            rank[g] = r as u32;
        }

        let mut id_of: FxHashMap<&str, u32> = FxHashMap::default();
        for (i, v) in file.vertices.iter().enumerate() {
            if id_of.insert(v.as_str(), i as u32).is_some() {
                return Err(LoadError::Malformed(format!("duplicate vertex {v:?}")).into());
            }
        }
        let nv = file.vertices.len();
        let base = *id_of
            .get(file.basepoint.as_str())
            .ok_or_else(|| LoadError::MissingBasepoint(file.basepoint.clone()))?;
        let mut nbr = vec![NONE; nv * ngen];
        for (src, s, dst) in &file.edges {
            let (u, v) = match (id_of.get(src.as_str()), id_of.get(dst.as_str())) {
                (Some(&u), Some(&v)) => (u, v),
                _ => {
                    return Err(
                        LoadError::Malformed(format!("edge {src:?} -> {dst:?} names an unknown vertex")).into(),
                    )
                }
            };
            if *s >= ngen {
                return Err(LoadError::Malformed(format!("generator index {s} out of range")).into());
            }
            let slot = &mut nbr[u as usize * ngen + s];
            if *slot != NONE && *slot != v {
                return Err(LoadError::Malformed(format!(
                    "vertex {src:?} has two {:?} edges",
                    file.generators[*s].label
                ))
                .into());
            }
            *slot = v;
        }
        for u in 0..nv {
            for s in 0..ngen {
                let v = nbr[u * ngen + s];
                if v != NONE && nbr[v as usize * ngen + inverse[s] as usize] != u as u32 {
                    return Err(LoadError::NonSymmetric {
                        src: file.vertices[u].clone(),
                        label: file.generators[s].label.clone(),
                        dst: file.vertices[v as usize].clone(),
                    }
                    .into());
                }
            }
        }

        // shortlex BFS: scan each layer in normal-form order, generators in rank order
        let mut dist = vec![NONE; nv];
        let mut words: Vec<Word> = vec![Word::new(); nv];
        dist[base as usize] = 0;
        let mut layer = vec![base];
        let mut measured = 0;
        let mut by_rank: Vec<usize> = (0..ngen).collect();
        by_rank.sort_by_key(|&g| rank[g]);
        while !layer.is_empty() {
            let mut next = Vec::new();
            for &u in &layer {
                for &s in &by_rank {
                    let v = nbr[u as usize * ngen + s];
                    if v != NONE && dist[v as usize] == NONE {
                        dist[v as usize] = dist[u as usize] + 1;
                        let mut w = words[u as usize].clone();
                        w.push(s as Gen);
                        words[v as usize] = w;
                        next.push(v);
                    }
                }
            }
            if !next.is_empty() {
                measured += 1;
            }
            next.sort_by(|&x, &y| {
                let rx = words[x as usize].iter().map(|&g| rank[g as usize]);
                let ry = words[y as usize].iter().map(|&g| rank[g as usize]);
                rx.cmp(ry)
            });
            layer = next;
        }
        if let Some(v) = dist.iter().position(|&d| d == NONE) {
            return Err(LoadError::Malformed(format!(
                "vertex {:?} is unreachable from the basepoint",
                file.vertices[v]
            ))
            .into());
        }
        if measured != file.radius {
            return Err(LoadError::RadiusMismatch {
                declared: file.radius,
                measured,
            }
            .into());
        }
        for u in 0..nv {
            if dist[u] < file.radius {
                for s in 0..ngen {
                    if nbr[u * ngen + s] == NONE {
                        return Err(LoadError::IncompleteVertex {
                            vertex: file.vertices[u].clone(),
                            dist: dist[u],
                            label: file.generators[s].label.clone(),
                        }
                        .into());
                    }
                }
            }
        }
        let index: FxHashMap<Word, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let mut ball = ExplicitBall {
            radius: file.radius,
            ngen,
            inverse: inverse.clone(),
            nbr,
            dist,
            words,
            index,
            inv: Vec::new(),
            ids: file.vertices.clone(),
        };
        let mut inv = Vec::with_capacity(nv);
        for v in 0..nv {
            let w = &ball.words[v];
            let back = ball
                .walk(base, w.iter().rev().map(|&s| inverse[s as usize]))
                .filter(|&u| ball.dist[u as usize] == ball.dist[v])
                .ok_or_else(|| {
                    LoadError::Malformed(format!(
                        "not a Cayley ball: inverse of {:?} is missing",
                        file.vertices[v]
                    ))
                })?;
            inv.push(back);
        }
        ball.inv = inv;

        let generators = file
            .generators
            .iter()
            .enumerate()
            .map(|(index, g)| GeneratorId {
                index,
                label: g.label.clone(),
                inverse_index: inverse[index] as usize,
            })
            .collect();
        let spec = GroupSpec {
            family,
            generators,
            generator_order: order,
            delta,
        };
        let canonical = serde_json::to_vec(file).unwrap_or_default();
        Ok(Self::assemble(spec, Kind::Explicit(Box::new(ball)), &canonical))
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn id(&self) -> SpecId {
        self.id
    }

    pub fn delta(&self) -> u32 {
        self.spec.delta
    }

    pub fn generator_count(&self) -> usize {
        self.spec.generators.len()
    }

    pub fn label(&self, s: Gen) -> &str {
        &self.spec.generators[s as usize].label
    }

    pub fn inverse_gen(&self, s: Gen) -> Gen {
        self.spec.generators[s as usize].inverse_index as Gen
    }

    /// Position of `s` in the generator order.
    pub fn order_rank(&self, s: Gen) -> u32 {
        self.rank[s as usize]
    }

    /// Generators from least to greatest in the generator order.
    pub fn ordered_generators(&self) -> impl Iterator<Item = Gen> + '_ {
        self.spec.generator_order.iter().map(|&g| g as Gen)
    }

    /// True when the Cayley graph is a tree: free factors and `Z/2` factors only.
    pub fn is_tree(&self) -> bool {
        match &self.kind {
            Kind::FreeProduct(fp) => fp
                .factors
                .iter()
                .all(|f| matches!(f, Factor::Infinite | Factor::Cyclic(2))),
            Kind::Explicit(_) => false,
        }
    }

    /// Radius of the explicit ball, `None` for the infinite built-in families.
    pub fn explicit_radius(&self) -> Option<u32> {
        match &self.kind {
            Kind::Explicit(b) => Some(b.radius),
            Kind::FreeProduct(_) => None,
        }
    }

    /// Whether the greedy geodesic toward `x` walks the prefixes of the
    /// normal form of `x`.
    pub(crate) fn prefix_geodesics(&self) -> bool {
        matches!(self.kind, Kind::FreeProduct(_))
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::from_parts(self.id, Word::new())
    }

    pub fn generator(&self, s: Gen) -> GroupElement {
        match &self.kind {
            Kind::FreeProduct(_) => GroupElement::from_parts(self.id, smallvec::smallvec![s]),
            Kind::Explicit(b) => {
                let base = b.vertex(&[]).expect("basepoint");
                let v = b.step(base, s).expect("interior vertex has every edge");
                GroupElement::from_parts(self.id, b.words[v as usize].clone())
            }
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.spec != self.id {
            return Err(Error::SpecMismatch {
                left: self.id.0,
                right: g.spec.0,
            });
        }
        Ok(())
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        match &self.kind {
            Kind::FreeProduct(fp) => {
                let mut w = g.word.clone();
                for &s in h.word.iter() {
                    fp.push_letter(&mut w, s);
                }
                Ok(GroupElement::from_parts(self.id, w))
            }
            Kind::Explicit(b) => {
                let v = self.explicit_product(b, g, h)?;
                Ok(GroupElement::from_parts(self.id, b.words[v as usize].clone()))
            }
        }
    }

    /// `g·s` for a single generator.
    pub fn multiply_gen(&self, g: &GroupElement, s: Gen) -> Result<GroupElement> {
        self.check(g)?;
        match &self.kind {
            Kind::FreeProduct(fp) => {
                let mut w = g.word.clone();
                fp.push_letter(&mut w, s);
                Ok(GroupElement::from_parts(self.id, w))
            }
            Kind::Explicit(b) => {
                let v = b.vertex(&g.word).expect("normal form");
                let n = b
                    .step(v, s)
                    .ok_or_else(|| Error::OutOfWindow(format!("{}·{}", self.format(g), self.label(s))))?;
                Ok(GroupElement::from_parts(self.id, b.words[n as usize].clone()))
            }
        }
    }

    fn explicit_product(&self, b: &ExplicitBall, g: &GroupElement, h: &GroupElement) -> Result<u32> {
        let vg = b.vertex(&g.word).expect("normal form");
        if let Some(v) = b.walk(vg, h.word.iter().copied()) {
            return Ok(v);
        }
        // g·h = (h⁻¹·g⁻¹)⁻¹, which may stay inside where the forward walk does not
        let vh_inv = b.inv[b.vertex(&h.word).expect("normal form") as usize];
        let ginv = g.word.iter().rev().map(|&s| b.inverse[s as usize]);
        if let Some(v) = b.walk(vh_inv, ginv) {
            return Ok(b.inv[v as usize]);
        }
        Err(Error::OutOfWindow(format!(
            "{}·{}",
            self.format(g),
            self.format(h)
        )))
    }

    pub fn invert(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        match &self.kind {
            Kind::FreeProduct(fp) => Ok(GroupElement::from_parts(
                self.id,
                g.word.iter().rev().map(|&s| fp.inverse_gen(s)).collect(),
            )),
            Kind::Explicit(b) => {
                let v = b.vertex(&g.word).expect("normal form");
                Ok(GroupElement::from_parts(
                    self.id,
                    b.words[b.inv[v as usize] as usize].clone(),
                ))
            }
        }
    }

    /// `d(e, g)`.
    pub fn word_length(&self, g: &GroupElement) -> usize {
        g.len()
    }

    /// `|x·y|`, computed without building the product where possible.
    pub fn product_length(&self, x: &GroupElement, y: &GroupElement) -> Result<usize> {
        self.check(x)?;
        self.check(y)?;
        match &self.kind {
            Kind::FreeProduct(fp) => Ok(fp.product_length(&x.word, &y.word)),
            Kind::Explicit(_) => Ok(self.multiply(x, y)?.len()),
        }
    }

    /// `d(a, b) = |a⁻¹b|`.
    pub fn distance(&self, a: &GroupElement, b: &GroupElement) -> Result<usize> {
        let ainv = self.invert(a)?;
        self.product_length(&ainv, b)
    }

    /// The least generator `s` (in generator order) with `|s⁻¹y| < |y|`, i.e.
    /// the first step of the greedy geodesic from `e` toward `y`.
    pub fn least_descent(&self, y: &GroupElement) -> Result<Option<Gen>> {
        self.check(y)?;
        if y.is_identity() {
            return Ok(None);
        }
        match &self.kind {
            // the first syllable is the only generator that shortens y
            Kind::FreeProduct(_) => Ok(Some(y.word[0])),
            Kind::Explicit(b) => {
                let yinv = b.inv[b.vertex(&y.word).expect("normal form") as usize];
                let target = y.len() as u32 - 1;
                Ok(self
                    .ordered_generators()
                    .find(|&s| b.step(yinv, s).is_some_and(|n| b.dist[n as usize] == target)))
            }
        }
    }

    /// `s⁻¹·y` for a descent generator `s` of `y`.
    pub(crate) fn descend(&self, y: &GroupElement, s: Gen) -> Result<GroupElement> {
        match &self.kind {
            Kind::FreeProduct(_) => {
                let sinv = self.generator(self.inverse_gen(s));
                self.multiply(&sinv, y)
            }
            Kind::Explicit(b) => {
                let yinv = b.inv[b.vertex(&y.word).expect("normal form") as usize];
                let n = b
                    .step(yinv, s)
                    .ok_or_else(|| Error::OutOfWindow(format!("{}⁻¹·{}", self.label(s), self.format(y))))?;
                Ok(GroupElement::from_parts(self.id, b.words[b.inv[n as usize] as usize].clone()))
            }
        }
    }

    /// Builds an element from a raw generator word, reducing it to normal form.
    pub fn from_word(&self, letters: &[Gen]) -> Result<GroupElement> {
        let mut g = self.identity();
        for &s in letters {
            if s as usize >= self.generator_count() {
                return Err(Error::InvalidSpec(format!("generator index {s} out of range")));
            }
            g = self.multiply_gen(&g, s)?;
        }
        Ok(g)
    }

    pub fn format(&self, g: &GroupElement) -> String {
        if g.is_identity() {
            return "e".into();
        }
        g.word.iter().map(|&s| self.label(s)).collect()
    }

    /// Parses words such as `abA`, `a^25`, `(ab)^3`, `st^2s`. `e` and `1`
    /// denote the identity; whitespace, `.` and `*` are ignored.
    pub fn parse(&self, text: &str) -> Result<GroupElement> {
        let mut parser = WordParser {
            group: self,
            text,
            pos: 0,
        };
        let g = parser.expr()?;
        if parser.pos != text.len() {
            return Err(parser.fail("unexpected character"));
        }
        Ok(g)
    }

    /// Random element of length exactly `len` (or shorter if the walk gets
    /// stuck at the edge of an explicit ball), built by appending uniformly
    /// chosen length-increasing generators.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> GroupElement {
        let mut g = self.identity();
        let mut candidates: SmallVec<[Gen; 16]> = SmallVec::new();
        for _ in 0..len {
            candidates.clear();
            for s in 0..self.generator_count() as Gen {
                let grows = match &self.kind {
                    Kind::FreeProduct(fp) => fp.product_length(&g.word, &[s]) == g.len() + 1,
                    Kind::Explicit(_) => self
                        .multiply_gen(&g, s)
                        .map(|h| h.len() == g.len() + 1)
                        .unwrap_or(false),
                };
                if grows {
                    candidates.push(s);
                }
            }
            if candidates.is_empty() {
                break;
            }
            let s = candidates[rng.gen_range(0..candidates.len())];
            g = self.multiply_gen(&g, s).expect("checked above");
        }
        g
    }

    /// Vertex ids of an explicit ball, aligned with its normal forms.
    pub fn explicit_vertex_id(&self, g: &GroupElement) -> Option<&str> {
        match &self.kind {
            Kind::Explicit(b) => b.vertex(&g.word).map(|v| b.ids[v as usize].as_str()),
            Kind::FreeProduct(_) => None,
        }
    }
}

struct WordParser<'a> {
    group: &'a Group,
    text: &'a str,
    pos: usize,
}

impl WordParser<'_> {
    fn fail(&self, reason: &str) -> Error {
        Error::ParseWord {
            word: self.text.to_string(),
            reason: format!("{reason} at byte {}", self.pos),
        }
    }

    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn skip_separators(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() || c == '.' || c == '*' || c == '·' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expr(&mut self) -> Result<GroupElement> {
        let mut acc = self.group.identity();
        loop {
            self.skip_separators();
            if self.rest().is_empty() || self.rest().starts_with(')') {
                return Ok(acc);
            }
            let atom = self.atom()?;
            let atom = self.power(atom)?;
            acc = self.group.multiply(&acc, &atom)?;
        }
    }

    fn atom(&mut self) -> Result<GroupElement> {
        if self.rest().starts_with('(') {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.rest().starts_with(')') {
                return Err(self.fail("missing ')'"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        // longest matching label wins, so "t^2" beats "t" followed by "^2"
        let best = self
            .group
            .spec
            .generators
            .iter()
            .filter(|g| self.rest().starts_with(g.label.as_str()))
            .max_by_key(|g| g.label.len());
        if let Some(g) = best {
            self.pos += g.label.len();
            return Ok(self.group.generator(g.index as Gen));
        }
        if self.rest().starts_with('e') || self.rest().starts_with('1') {
            self.pos += 1;
            return Ok(self.group.identity());
        }
        Err(self.fail("unknown generator"))
    }

    fn power(&mut self, base: GroupElement) -> Result<GroupElement> {
        if !self.rest().starts_with('^') {
            return Ok(base);
        }
        self.pos += 1;
        let digits: String = self
            .rest()
            .chars()
            .enumerate()
            .take_while(|&(i, c)| c.is_ascii_digit() || (i == 0 && c == '-'))
            .map(|(_, c)| c)
            .collect();
        let k: i64 = digits.parse().map_err(|_| self.fail("bad exponent"))?;
        self.pos += digits.len();
        let unit = if k < 0 { self.group.invert(&base)? } else { base };
        let mut acc = self.group.identity();
        for _ in 0..k.unsigned_abs() {
            acc = self.group.multiply(&acc, &unit)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

/// On-disk Cayley ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallFile {
    pub generators: Vec<BallGenerator>,
    pub basepoint: String,
    pub radius: u32,
    pub vertices: Vec<String>,
    pub edges: Vec<(String, usize, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallGenerator {
    pub label: String,
    pub inverse: GeneratorRef,
}

/// A generator named by index or by label.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorRef {
    Index(usize),
    Label(String),
}

fn ball_file_from_explicit(b: &ExplicitBall, spec: &GroupSpec) -> BallFile {
    let base = b.vertex(&[]).expect("basepoint") as usize;
    let mut edges = Vec::new();
    for v in 0..b.ids.len() {
        for s in 0..b.ngen {
            if let Some(n) = b.step(v as u32, s as Gen) {
                edges.push((b.ids[v].clone(), s, b.ids[n as usize].clone()));
            }
        }
    }
    BallFile {
        generators: spec
            .generators
            .iter()
            .map(|g| BallGenerator {
                label: g.label.clone(),
                inverse: GeneratorRef::Index(g.inverse_index),
            })
            .collect(),
        basepoint: b.ids[base].clone(),
        radius: b.radius,
        vertices: b.ids.clone(),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f2() -> Group {
        Group::free(2, 1).unwrap()
    }

    fn pgl() -> Group {
        Group::free_product_cyclic(&[2, 3], 1).unwrap()
    }

    #[test]
    fn identity_laws() {
        let g = f2();
        let e = g.identity();
        let a = g.parse("a").unwrap();
        assert!(e.word().is_empty());
        assert_eq!(g.multiply(&e, &a).unwrap(), a);
        assert_eq!(g.invert(&e).unwrap(), e);
    }

    #[test]
    fn free_reduction() {
        let g = f2();
        let ab = g.parse("ab").unwrap();
        let ba_inv = g.parse("BA").unwrap();
        assert!(g.multiply(&ab, &ba_inv).unwrap().is_identity());
        let a = g.parse("a").unwrap();
        let aa = g.multiply(&a, &a).unwrap();
        assert_eq!(g.format(&aa), "aa");
        assert_eq!(g.invert(&ab).unwrap(), ba_inv);
        assert_eq!(g.word_length(&g.parse("abA").unwrap()), 3);
        assert_eq!(g.parse("a^-2").unwrap(), g.parse("AA").unwrap());
        assert_eq!(g.parse("(ab)^2").unwrap(), g.parse("abab").unwrap());
    }

    #[test]
    fn cyclic_syllables() {
        let g = pgl();
        let t = g.parse("t").unwrap();
        let t2 = g.multiply(&t, &t).unwrap();
        assert_eq!(t2.len(), 1);
        assert_eq!(g.format(&t2), "t^2");
        assert_eq!(g.invert(&t).unwrap(), t2);
        assert!(g.multiply(&t2, &t).unwrap().is_identity());
        let s = g.parse("s").unwrap();
        assert!(g.multiply(&s, &s).unwrap().is_identity());
        assert_eq!(g.word_length(&t2), 1);
    }

    #[test]
    fn generator_labels_and_inverses() {
        let g = f2();
        let labels: Vec<_> = g.spec().generators.iter().map(|x| x.label.as_str()).collect();
        assert_eq!(labels, ["a", "A", "b", "B"]);
        for s in 0..g.generator_count() as Gen {
            assert_eq!(g.inverse_gen(g.inverse_gen(s)), s);
        }
        let p = pgl();
        let labels: Vec<_> = p.spec().generators.iter().map(|x| x.label.as_str()).collect();
        assert_eq!(labels, ["s", "t", "t^2"]);
        assert_eq!(p.inverse_gen(0), 0);
        assert_eq!(p.inverse_gen(1), 2);
    }

    #[test]
    fn spec_mismatch_is_an_error() {
        let g = f2();
        let h = Group::free(3, 1).unwrap();
        let a = g.parse("a").unwrap();
        let b = h.parse("b").unwrap();
        assert!(matches!(g.multiply(&a, &b), Err(Error::SpecMismatch { .. })));
    }

    #[test]
    fn product_length_matches_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [f2(), pgl(), Group::free_product_cyclic(&[3, 4, 2], 1).unwrap()] {
            for _ in 0..500 {
                let n = rng.gen_range(0..12);
                let x = g.random_element(&mut rng, n);
                let n = rng.gen_range(0..12);
                let y = g.random_element(&mut rng, n);
                assert_eq!(
                    g.product_length(&x, &y).unwrap(),
                    g.multiply(&x, &y).unwrap().len()
                );
            }
        }
    }

    #[test]
    fn descent_is_the_unique_shortening_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [f2(), pgl()] {
            for _ in 0..200 {
                let n = rng.gen_range(1..10);
                let y = g.random_element(&mut rng, n);
                let shortening: Vec<Gen> = (0..g.generator_count() as Gen)
                    .filter(|&s| {
                        let sinv = g.generator(g.inverse_gen(s));
                        g.multiply(&sinv, &y).unwrap().len() < y.len()
                    })
                    .collect();
                assert_eq!(shortening, vec![g.least_descent(&y).unwrap().unwrap()]);
            }
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        let g = f2();
        assert!(matches!(g.parse("aq"), Err(Error::ParseWord { .. })));
        assert!(matches!(g.parse("(ab"), Err(Error::ParseWord { .. })));
        assert_eq!(g.parse("e").unwrap(), g.identity());
    }

    #[test]
    fn descriptors() {
        assert_eq!(Group::from_descriptor("free:2", 1).unwrap().generator_count(), 4);
        assert_eq!(Group::from_descriptor("cyclic:2,3", 1).unwrap().generator_count(), 3);
        assert!(Group::from_descriptor("free:x", 1).is_err());
        assert!(Group::from_descriptor("cyclic:1", 1).is_err());
        assert!(Group::free(2, 0).is_err());
    }

    #[test]
    fn tree_detection() {
        assert!(f2().is_tree());
        assert!(Group::free_product_cyclic(&[2, 2, 2], 1).unwrap().is_tree());
        assert!(!pgl().is_tree());
    }
}
