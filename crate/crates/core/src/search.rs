//! Bounded search for trivialization certificates.
//!
//! States are normal-form representatives of presentations (see
//! [`represent`]). Conjugations and inversions never change a state, so the
//! search moves along [`ProductEdge`]s: one multiplication between rotations
//! of two relators, followed by free and cyclic reduction. A path between representatives is turned into an exact
//! certificate on the real presentation by [`Navigator`], which tracks how
//! the real presentation sits over the current representative.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homology::{abelianization_matrix, smith_normal_form};
use crate::moves::{
    apply_move, apply_step, canonical_relator_traced, invert_move, normal_form_relabeled, normal_form_traced,
    verify_certificate, AcMove, CanonicalKey, Certificate, SignedPermutation, Step,
};
use crate::words::{cyclic_reduce, free_reduce_traced, Letter, Presentation, Sign, Word};
use crate::IntegerMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Bfs,
    Iddfs,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub max_depth: usize,
    pub max_relator_length: usize,
    pub max_states: usize,
    pub max_memory_bytes: usize,
    pub strategy: Strategy,
    /// Deduplicate up to signed generator relabeling as well.
    pub relabel: bool,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            max_depth: 12,
            max_relator_length: 14,
            max_states: 1_000_000,
            max_memory_bytes: 1 << 30,
            strategy: Strategy::Bidirectional,
            relabel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustedBound {
    Depth,
    States,
    /// The reachable component under the length bound was fully explored.
    FrontierEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    Memory,
    Signal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchOutcome {
    Trivialized(Certificate),
    NonTrivialAbelianization { diagonal: Vec<String> },
    Exhausted(ExhaustedBound),
    Aborted(AbortReason),
}

impl SearchOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            SearchOutcome::Trivialized(_) => "Trivialized",
            SearchOutcome::NonTrivialAbelianization { .. } => "NonTrivialAbelianization",
            SearchOutcome::Exhausted(_) => "Exhausted",
            SearchOutcome::Aborted(_) => "Aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReport {
    pub outcome: SearchOutcome,
    pub states_expanded: usize,
    pub states_visited: usize,
    pub frontier_peak: usize,
    /// Layers explored (bidirectional: forward plus backward).
    pub depth_reached: usize,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("presentation is not balanced ({relators} relators, {generators} generators)")]
    NotBalanced { generators: usize, relators: usize },
    #[error("internal error: reconstructed certificate does not verify ({0})")]
    CertificateRejected(String),
}

/// All single primitive moves on `p`, each followed by free and cyclic
/// reduction of the changed relator, keeping those whose changed relator
/// fits the length bound. Order: inversions, conjugations, multiplications,
/// each by increasing indices.
pub fn neighbors(p: &Presentation, bounds: &SearchBounds) -> Vec<(AcMove, Presentation)> {
    let m = p.relators.len();
    let mut moves = Vec::with_capacity(m + 4 * m * p.generators + m * m);
    moves.extend((0..m).map(|relator| AcMove::Invert { relator }));
    for relator in 0..m {
        for generator in 0..p.generators {
            for sign in [Sign::Pos, Sign::Neg] {
                moves.push(AcMove::Conjugate { relator, generator, sign });
            }
        }
    }
    for target in 0..m {
        for source in (0..m).filter(|&s| s != target) {
            moves.push(AcMove::MultiplyRight { target, source });
        }
    }
    moves
        .into_iter()
        .filter_map(|mv| {
            let (mut q, _) = apply_move(p, &mv, true).expect("enumerated moves are valid");
            let i = mv.changed_relator();
            q.relators[i] = cyclic_reduce(&q.relators[i]);
            (q.relators[i].len() <= bounds.max_relator_length).then_some((mv, q))
        })
        .collect()
}

/// A search state: the normal form of some presentation, together with how
/// to get there from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Representation {
    pub rep: Presentation,
    /// Relabeling applied to the input before normalizing.
    pub relabel: SignedPermutation,
    /// `relator_map[k]` is the index in `rep` of input relator `k`.
    pub relator_map: Vec<usize>,
}

pub fn represent(p: &Presentation, relabel: bool) -> Representation {
    let sigma = if relabel { normal_form_relabeled(p).1 } else { SignedPermutation::identity(p.generators) };
    let image = relabel_presentation(p, &sigma);
    let (mut rep, relator_map) = normal_form_traced(&image);
    rep.names = None;
    Representation { rep, relabel: sigma, relator_map }
}

fn relabel_presentation(p: &Presentation, sigma: &SignedPermutation) -> Presentation {
    Presentation {
        generators: p.generators,
        relators: p.relators.iter().map(|w| sigma.apply_word(w)).collect(),
        names: p.names.clone(),
    }
}

fn standard_key(n: usize, relabel: bool) -> (Presentation, CanonicalKey) {
    let rep = represent(&Presentation::standard(n), relabel).rep;
    let key = CanonicalKey::of_normal_form(&rep);
    (rep, key)
}

/// Relator rewriting used to reach a canonical relator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RelatorOp {
    Reduce(usize),
    /// Conjugate so that the letter moves across: `w -> a^-1 w a`.
    Conjugate(Letter),
    Invert,
}

/// Operations taking `v` to its canonical relator: free reduction, trimming
/// `a u a^-1` to `u`, inversion, then rotation in the shorter direction.
fn normalize_ops(v: &Word) -> Vec<RelatorOp> {
    let (mut w, cancels) = free_reduce_traced(v);
    let mut ops: Vec<RelatorOp> = cancels.into_iter().map(RelatorOp::Reduce).collect();
    while w.len() >= 2 && w.0[0].cancels(w.0[w.len() - 1]) {
        ops.push(RelatorOp::Conjugate(w.0[0]));
        w = Word(w.0[1..w.len() - 1].to_vec());
    }
    let target = canonical_relator_traced(&w);
    if target.inverted {
        ops.push(RelatorOp::Invert);
        w = w.inverse();
    }
    ops.extend(rotation_ops(&w, target.rotation));
    debug_assert_eq!(w.rotate_left(target.rotation), target.word);
    ops
}

/// Conjugations rotating a cyclically reduced `w` left by `k`, going the
/// shorter way round.
fn rotation_ops(w: &Word, k: usize) -> Vec<RelatorOp> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let k = k % n;
    if k <= n / 2 {
        w.0[..k].iter().map(|&a| RelatorOp::Conjugate(a)).collect()
    } else {
        w.0[k..].iter().rev().map(|&b| RelatorOp::Conjugate(b.inverse())).collect()
    }
}

fn reverse_ops(ops: &[RelatorOp]) -> Vec<RelatorOp> {
    ops.iter()
        .rev()
        .map(|op| match *op {
            RelatorOp::Conjugate(a) => RelatorOp::Conjugate(a.inverse()),
            RelatorOp::Invert => RelatorOp::Invert,
            RelatorOp::Reduce(_) => panic!("free reductions cannot be reversed"),
        })
        .collect()
}

/// Follows a path of representatives on a real presentation, emitting the
/// certificate. Invariant: `relabel(current[k]) == rep[relator_map[k]]`
/// exactly, for the representative the path is at.
#[derive(Debug, Clone)]
pub struct Navigator {
    current: Presentation,
    relabel: SignedPermutation,
    relator_map: Vec<usize>,
    certificate: Certificate,
    use_relabel: bool,
}

impl Navigator {
    pub fn new(start: &Presentation, use_relabel: bool) -> Self {
        let mut nav = Navigator {
            current: start.clone(),
            relabel: SignedPermutation::identity(start.generators),
            relator_map: (0..start.relators.len()).collect(),
            certificate: Certificate::empty(start.clone()),
            use_relabel,
        };
        nav.settle();
        nav
    }

    pub fn current(&self) -> &Presentation {
        &self.current
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn into_certificate(self) -> Certificate {
        self.certificate
    }

    fn image(&self) -> Presentation {
        relabel_presentation(&self.current, &self.relabel)
    }

    /// The representative the navigator currently sits over.
    pub fn representative(&self) -> Presentation {
        let image = self.image();
        let mut relators = vec![Word::empty(); image.relators.len()];
        for (k, w) in image.relators.into_iter().enumerate() {
            relators[self.relator_map[k]] = w;
        }
        Presentation { generators: self.current.generators, relators, names: None }
    }

    fn push_move(&mut self, mv: AcMove) {
        let (next, cancels) = apply_move(&self.current, &mv, true).expect("navigator moves are valid");
        self.certificate.push_move(mv, &cancels);
        self.current = next;
    }

    /// Runs relator ops written in image coordinates `frame` on relator `k`.
    fn run_ops(&mut self, k: usize, ops: &[RelatorOp], frame: &SignedPermutation) {
        let back = frame.inverse();
        for op in ops {
            match *op {
                RelatorOp::Reduce(position) => {
                    let step = Step::Reduce { relator: k, position };
                    self.current = apply_step(&self.current, &step).expect("traced cancellation");
                    self.certificate.steps.push(step);
                }
                RelatorOp::Conjugate(a) => {
                    let b = back.apply_letter(a);
                    self.push_move(AcMove::Conjugate { relator: k, generator: b.gen(), sign: b.sign });
                }
                RelatorOp::Invert => self.push_move(AcMove::Invert { relator: k }),
            }
        }
    }

    /// Normalizes every relator so the invariant holds for the
    /// representative of the current image.
    fn settle(&mut self) {
        let image = self.image();
        let r = represent(&image, self.use_relabel);
        let frame = r.relabel.compose(&self.relabel);
        for k in 0..image.relators.len() {
            let v = r.relabel.apply_word(&image.relators[k]);
            let ops = normalize_ops(&v);
            self.run_ops(k, &ops, &frame);
        }
        self.relabel = frame;
        self.relator_map = r.relator_map;
        debug_assert_eq!(self.representative(), r.rep);
    }

    fn to_actual(&self, mv: &AcMove) -> AcMove {
        mv.transported(&self.actual_indices(), &self.relabel.inverse())
    }

    /// `out[r]` is the real relator sitting over representative relator `r`.
    fn actual_indices(&self) -> Vec<usize> {
        let mut out = vec![0; self.relator_map.len()];
        for (k, &r) in self.relator_map.iter().enumerate() {
            out[r] = k;
        }
        out
    }

    /// Follows the edge from the current representative to the
    /// representative of `edge` applied to it.
    pub fn forward(&mut self, edge: &ProductEdge) {
        let rep = self.representative();
        let actual = self.actual_indices();
        let frame = self.relabel.clone();
        let (target_ops, source_ops) = edge.preparation(&rep);
        self.run_ops(actual[edge.target], &target_ops, &frame);
        self.run_ops(actual[edge.source], &source_ops, &frame);
        self.push_move(AcMove::MultiplyRight { target: actual[edge.target], source: actual[edge.source] });
        self.settle();
    }

    /// Follows an edge backwards: the navigator sits over the
    /// representative of `edge` applied to `parent` and moves to `parent`.
    pub fn backward(&mut self, parent: &Presentation, edge: &ProductEdge) {
        let w = edge.apply_exact(parent);
        let r = represent(&w, self.use_relabel);
        let mut source_of = vec![0; r.relator_map.len()];
        for (idx, &pos) in r.relator_map.iter().enumerate() {
            source_of[pos] = idx;
        }
        // Undo the normalization of each relator of `w`.
        let frame = self.relabel.clone();
        let mut new_map = vec![0; self.relator_map.len()];
        for k in 0..self.current.relators.len() {
            let idx = source_of[self.relator_map[k]];
            let v = r.relabel.apply_word(&w.relators[idx]);
            let ops = reverse_ops(&normalize_ops(&v));
            self.run_ops(k, &ops, &frame);
            new_map[k] = idx;
        }
        self.relabel = r.relabel.inverse().compose(&frame);
        self.relator_map = new_map;
        debug_assert_eq!(self.representative(), w);
        let product = AcMove::MultiplyRight { target: edge.target, source: edge.source };
        for inv in invert_move(&product) {
            let actual = self.to_actual(&inv);
            self.push_move(actual);
        }
        self.settle();
        debug_assert_eq!(&self.representative(), parent);
    }
}

/// One search edge: rotate the target relator left by `target_rotation`,
/// replace the source relator by its inverse if `source_inverted` and
/// rotate it left by `source_rotation`, then multiply target by source.
/// Rotations and inversions do not change the canonical key, so in key
/// space this is a single multiplication; the navigator expands it into
/// primitive moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductEdge {
    pub target: usize,
    pub source: usize,
    pub target_rotation: usize,
    pub source_rotation: usize,
    pub source_inverted: bool,
}

impl ProductEdge {
    fn source_word(&self, p: &Presentation) -> Word {
        let s = &p.relators[self.source];
        let s = if self.source_inverted { s.inverse() } else { s.clone() };
        s.rotate_left(self.source_rotation)
    }

    /// Relator ops on the target and the source preparing the product.
    fn preparation(&self, p: &Presentation) -> (Vec<RelatorOp>, Vec<RelatorOp>) {
        let target_ops = rotation_ops(&p.relators[self.target], self.target_rotation);
        let mut source_ops = Vec::new();
        let mut s = p.relators[self.source].clone();
        if self.source_inverted {
            source_ops.push(RelatorOp::Invert);
            s = s.inverse();
        }
        source_ops.extend(rotation_ops(&s, self.source_rotation));
        (target_ops, source_ops)
    }

    /// The presentation after the edge's primitive moves in reduce mode, on
    /// a representative `p`.
    pub fn apply_exact(&self, p: &Presentation) -> Presentation {
        let mut out = p.clone();
        let source = self.source_word(p);
        let target = p.relators[self.target].rotate_left(self.target_rotation);
        out.relators[self.target] = free_reduce_traced(&target.concat(&source)).0;
        out.relators[self.source] = source;
        out
    }

    /// The primitive moves the edge stands for, on a representative `p`.
    pub fn primitive_moves(&self, p: &Presentation) -> Vec<AcMove> {
        let (target_ops, source_ops) = self.preparation(p);
        let as_moves = |relator: usize, ops: Vec<RelatorOp>| {
            ops.into_iter().map(move |op| match op {
                RelatorOp::Conjugate(a) => AcMove::Conjugate { relator, generator: a.gen(), sign: a.sign },
                RelatorOp::Invert => AcMove::Invert { relator },
                RelatorOp::Reduce(_) => unreachable!("preparation never reduces"),
            })
        };
        as_moves(self.target, target_ops)
            .chain(as_moves(self.source, source_ops))
            .chain([AcMove::MultiplyRight { target: self.target, source: self.source }])
            .collect()
    }
}

/// Product edges out of a representative whose product, after free and
/// cyclic reduction, fits the length bound. Order: target, source,
/// inversion, target rotation, source rotation.
pub fn product_edges(p: &Presentation, bounds: &SearchBounds) -> Vec<(ProductEdge, Presentation)> {
    let m = p.relators.len();
    let mut out = Vec::new();
    for target in 0..m {
        let t = &p.relators[target];
        for source in (0..m).filter(|&s| s != target) {
            for source_inverted in [false, true] {
                let base = if source_inverted { p.relators[source].inverse() } else { p.relators[source].clone() };
                for target_rotation in 0..t.len().max(1) {
                    let rt = t.rotate_left(target_rotation);
                    for source_rotation in 0..base.len().max(1) {
                        let rs = base.rotate_left(source_rotation);
                        let product = cyclic_reduce(&rt.concat(&rs));
                        if product.len() > bounds.max_relator_length {
                            continue;
                        }
                        let mut q = p.clone();
                        q.relators[target] = product;
                        let edge = ProductEdge { target, source, target_rotation, source_rotation, source_inverted };
                        out.push((edge, q));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
enum PathEdge {
    Forward(ProductEdge),
    Backward { parent: Presentation, edge: ProductEdge },
}

#[derive(Debug, Clone)]
struct Node {
    rep: Presentation,
    parent: Option<(CanonicalKey, ProductEdge)>,
}

fn node_bytes(key: &CanonicalKey, rep: &Presentation) -> usize {
    // Key twice (map key and parent link), letters, vectors, table overhead.
    2 * key.0.len() + 8 * rep.total_length() + 24 * rep.relators.len() + 160
}

struct Stats {
    expanded: usize,
    frontier_peak: usize,
    bytes: usize,
    depth: usize,
}

enum Halt {
    Found(Vec<PathEdge>),
    Stop(SearchOutcome),
}

type Expansion = Vec<(ProductEdge, Presentation, CanonicalKey)>;

fn expand(rep: &Presentation, bounds: &SearchBounds) -> Expansion {
    product_edges(rep, bounds)
        .into_iter()
        .map(|(mv, q)| {
            let r = represent(&q, bounds.relabel).rep;
            let key = CanonicalKey::of_normal_form(&r);
            (mv, r, key)
        })
        .collect()
}

fn chain_to_root(nodes: &HashMap<CanonicalKey, Node>, key: &CanonicalKey) -> Vec<(Presentation, ProductEdge)> {
    // (parent rep, move) pairs from `key` up to the root.
    let mut out = Vec::new();
    let mut cursor = key.clone();
    while let Some((parent, mv)) = &nodes[&cursor].parent {
        out.push((nodes[parent].rep.clone(), *mv));
        cursor = parent.clone();
    }
    out
}

struct Side {
    nodes: HashMap<CanonicalKey, Node>,
    frontier: Vec<CanonicalKey>,
}

impl Side {
    fn new(rep: Presentation) -> Self {
        let key = CanonicalKey::of_normal_form(&rep);
        let mut nodes = HashMap::new();
        nodes.insert(key.clone(), Node { rep, parent: None });
        Side { nodes, frontier: vec![key] }
    }
}

/// Expands one layer of `side`. Returns the key where it touched `other`,
/// if any.
fn expand_layer(
    side: &mut Side,
    other: Option<&Side>,
    target: Option<&CanonicalKey>,
    bounds: &SearchBounds,
    stats: &mut Stats,
    cancel: &AtomicBool,
) -> Result<Option<CanonicalKey>, SearchOutcome> {
    let expansions: Vec<Expansion> = side.frontier.par_iter().map(|key| expand(&side.nodes[key].rep, bounds)).collect();
    if cancel.load(Ordering::Relaxed) {
        return Err(SearchOutcome::Aborted(AbortReason::Signal));
    }
    stats.expanded += side.frontier.len();
    let mut next = Vec::new();
    let parents = std::mem::take(&mut side.frontier);
    for (parent, expansion) in parents.into_iter().zip(expansions) {
        for (mv, rep, key) in expansion {
            if side.nodes.contains_key(&key) {
                continue;
            }
            stats.bytes += node_bytes(&key, &rep);
            side.nodes.insert(key.clone(), Node { rep, parent: Some((parent.clone(), mv)) });
            if other.is_some_and(|o| o.nodes.contains_key(&key)) || target == Some(&key) {
                return Ok(Some(key));
            }
            if stats.bytes > bounds.max_memory_bytes {
                return Err(SearchOutcome::Aborted(AbortReason::Memory));
            }
            next.push(key);
        }
    }
    side.frontier = next;
    stats.frontier_peak = stats.frontier_peak.max(side.frontier.len());
    Ok(None)
}

fn visited(sides: &[&Side]) -> usize {
    sides.iter().map(|s| s.nodes.len()).sum()
}

fn run_bidirectional(
    start: Presentation,
    target: Presentation,
    bounds: &SearchBounds,
    stats: &mut Stats,
    cancel: &AtomicBool,
) -> (Halt, usize) {
    let mut fwd = Side::new(start);
    let mut bwd = Side::new(target);
    let mut forward_turn = true;
    while stats.depth < bounds.max_depth {
        if fwd.frontier.is_empty() || bwd.frontier.is_empty() {
            return (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::FrontierEmpty)), visited(&[&fwd, &bwd]));
        }
        if visited(&[&fwd, &bwd]) >= bounds.max_states {
            return (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::States)), visited(&[&fwd, &bwd]));
        }
        let (side, other) = if forward_turn { (&mut fwd, &bwd) } else { (&mut bwd, &fwd) };
        let met = match expand_layer(side, Some(other), None, bounds, stats, cancel) {
            Ok(met) => met,
            Err(outcome) => return (Halt::Stop(outcome), visited(&[&fwd, &bwd])),
        };
        stats.depth += 1;
        if let Some(key) = met {
            let mut path: Vec<PathEdge> =
                chain_to_root(&fwd.nodes, &key).into_iter().rev().map(|(_, mv)| PathEdge::Forward(mv)).collect();
            path.extend(
                chain_to_root(&bwd.nodes, &key).into_iter().map(|(parent, edge)| PathEdge::Backward { parent, edge }),
            );
            return (Halt::Found(path), visited(&[&fwd, &bwd]));
        }
        forward_turn = !forward_turn;
    }
    (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::Depth)), visited(&[&fwd, &bwd]))
}

fn run_bfs(
    start: Presentation,
    target: &CanonicalKey,
    bounds: &SearchBounds,
    stats: &mut Stats,
    cancel: &AtomicBool,
) -> (Halt, usize) {
    let mut fwd = Side::new(start);
    while stats.depth < bounds.max_depth {
        if fwd.frontier.is_empty() {
            return (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::FrontierEmpty)), fwd.nodes.len());
        }
        if fwd.nodes.len() >= bounds.max_states {
            return (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::States)), fwd.nodes.len());
        }
        let met = match expand_layer(&mut fwd, None, Some(target), bounds, stats, cancel) {
            Ok(met) => met,
            Err(outcome) => return (Halt::Stop(outcome), fwd.nodes.len()),
        };
        stats.depth += 1;
        if let Some(key) = met {
            let path = chain_to_root(&fwd.nodes, &key).into_iter().rev().map(|(_, mv)| PathEdge::Forward(mv)).collect();
            return (Halt::Found(path), fwd.nodes.len());
        }
    }
    (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::Depth)), fwd.nodes.len())
}

struct Iddfs<'a> {
    bounds: &'a SearchBounds,
    target: &'a CanonicalKey,
    cancel: &'a AtomicBool,
    /// Largest remaining depth with which a key has been explored.
    table: HashMap<CanonicalKey, usize>,
    on_path: HashSet<CanonicalKey>,
    path: Vec<ProductEdge>,
    cut_off: bool,
    stats: Stats,
}

impl Iddfs<'_> {
    fn dfs(&mut self, rep: &Presentation, key: &CanonicalKey, remaining: usize) -> Result<bool, SearchOutcome> {
        if key == self.target {
            return Ok(true);
        }
        if remaining == 0 {
            self.cut_off = true;
            return Ok(false);
        }
        if self.cancel.load(Ordering::Relaxed) {
            return Err(SearchOutcome::Aborted(AbortReason::Signal));
        }
        self.stats.expanded += 1;
        for (mv, child, child_key) in expand(rep, self.bounds) {
            if self.on_path.contains(&child_key) {
                continue;
            }
            match self.table.get(&child_key) {
                Some(&seen) if seen >= remaining - 1 => continue,
                Some(_) => {}
                None => {
                    if self.table.len() >= self.bounds.max_states {
                        return Err(SearchOutcome::Exhausted(ExhaustedBound::States));
                    }
                    self.stats.bytes += node_bytes(&child_key, &child);
                    if self.stats.bytes > self.bounds.max_memory_bytes {
                        return Err(SearchOutcome::Aborted(AbortReason::Memory));
                    }
                }
            }
            self.table.insert(child_key.clone(), remaining - 1);
            self.on_path.insert(child_key.clone());
            self.path.push(mv);
            self.stats.frontier_peak = self.stats.frontier_peak.max(self.path.len());
            let found = self.dfs(&child, &child_key, remaining - 1)?;
            if found {
                return Ok(true);
            }
            self.path.pop();
            self.on_path.remove(&child_key);
        }
        Ok(false)
    }
}

fn run_iddfs(
    start: Presentation,
    target: &CanonicalKey,
    bounds: &SearchBounds,
    stats: Stats,
    cancel: &AtomicBool,
) -> (Halt, usize, Stats) {
    let key = CanonicalKey::of_normal_form(&start);
    let mut search = Iddfs {
        bounds,
        target,
        cancel,
        table: HashMap::new(),
        on_path: HashSet::new(),
        path: Vec::new(),
        cut_off: false,
        stats,
    };
    for limit in 0..=bounds.max_depth {
        search.table.clear();
        search.table.insert(key.clone(), limit);
        search.on_path = HashSet::from([key.clone()]);
        search.path.clear();
        search.cut_off = false;
        search.stats.depth = limit;
        match search.dfs(&start, &key, limit) {
            Ok(true) => {
                let path = search.path.iter().map(|&mv| PathEdge::Forward(mv)).collect();
                let n = search.table.len();
                return (Halt::Found(path), n, search.stats);
            }
            Ok(false) if !search.cut_off => {
                let n = search.table.len();
                return (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::FrontierEmpty)), n, search.stats);
            }
            Ok(false) => {}
            Err(outcome) => {
                let n = search.table.len();
                return (Halt::Stop(outcome), n, search.stats);
            }
        }
    }
    let n = search.table.len();
    (Halt::Stop(SearchOutcome::Exhausted(ExhaustedBound::Depth)), n, search.stats)
}

pub fn trivialization_search(p: &Presentation, bounds: &SearchBounds) -> Result<SearchReport, SearchError> {
    trivialization_search_with_cancel(p, bounds, &AtomicBool::new(false))
}

/// As [`trivialization_search`], stopping with `Aborted(Signal)` once
/// `cancel` is set.
pub fn trivialization_search_with_cancel(
    p: &Presentation,
    bounds: &SearchBounds,
    cancel: &AtomicBool,
) -> Result<SearchReport, SearchError> {
    let clock = Instant::now();
    if !p.is_balanced() {
        return Err(SearchError::NotBalanced { generators: p.generators, relators: p.relators.len() });
    }
    let mut report = SearchReport {
        outcome: SearchOutcome::Exhausted(ExhaustedBound::Depth),
        states_expanded: 0,
        states_visited: 0,
        frontier_peak: 0,
        depth_reached: 0,
        wall_time_ms: 0,
    };
    let m: IntegerMatrix = abelianization_matrix(p);
    let snf = smith_normal_form(&m).expect("arbitrary precision");
    if snf.rank() < p.generators || !snf.diagonal.iter().all(|d| d.is_one()) {
        let diagonal = snf.diagonal.iter().map(|d| d.to_string()).collect();
        report.outcome = SearchOutcome::NonTrivialAbelianization { diagonal };
        report.wall_time_ms = clock.elapsed().as_millis() as u64;
        return Ok(report);
    }

    let start = represent(p, bounds.relabel).rep;
    let (target, target_key) = standard_key(p.generators, bounds.relabel);
    let mut stats = Stats { expanded: 0, frontier_peak: 1, bytes: 0, depth: 0 };
    let (halt, visited) = if CanonicalKey::of_normal_form(&start) == target_key {
        (Halt::Found(Vec::new()), 1)
    } else {
        match bounds.strategy {
            Strategy::Bidirectional => run_bidirectional(start, target, bounds, &mut stats, cancel),
            Strategy::Bfs => run_bfs(start, &target_key, bounds, &mut stats, cancel),
            Strategy::Iddfs => {
                let (halt, visited, s) = run_iddfs(start, &target_key, bounds, stats, cancel);
                stats = s;
                (halt, visited)
            }
        }
    };
    report.states_expanded = stats.expanded;
    report.states_visited = visited;
    report.frontier_peak = stats.frontier_peak;
    report.depth_reached = stats.depth;
    report.outcome = match halt {
        Halt::Stop(outcome) => outcome,
        Halt::Found(path) => {
            let certificate = follow_path(p, &path, bounds.relabel);
            match verify_certificate(&certificate, &Presentation::standard(p.generators)) {
                Ok(true) => SearchOutcome::Trivialized(certificate),
                Ok(false) => return Err(SearchError::CertificateRejected("ends away from the standard".into())),
                Err(e) => return Err(SearchError::CertificateRejected(e.to_string())),
            }
        }
    };
    report.wall_time_ms = clock.elapsed().as_millis() as u64;
    Ok(report)
}

fn follow_path(p: &Presentation, path: &[PathEdge], relabel: bool) -> Certificate {
    if path.is_empty() {
        return Certificate::empty(p.clone());
    }
    let mut nav = Navigator::new(p, relabel);
    for edge in path {
        match edge {
            PathEdge::Forward(edge) => nav.forward(edge),
            PathEdge::Backward { parent, edge } => nav.backward(parent, edge),
        }
    }
    nav.into_certificate()
}

/// `k` uniformly random steps from `p` along [`product_edges`] with relator
/// length at most `length_cap`. Returns the presentation
/// reached and a certificate from `p` to it.
pub fn scramble(p: &Presentation, k: usize, seed: u64, length_cap: usize) -> (Presentation, Certificate) {
    if k == 0 {
        return (p.clone(), Certificate::empty(p.clone()));
    }
    let bounds = SearchBounds { max_relator_length: length_cap, ..SearchBounds::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nav = Navigator::new(p, false);
    for _ in 0..k {
        let options = product_edges(&nav.representative(), &bounds);
        if options.is_empty() {
            break;
        }
        let (edge, _) = options[rng.gen_range(0..options.len())];
        nav.forward(&edge);
    }
    (nav.current().clone(), nav.into_certificate())
}

impl fmt::Display for SearchOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchOutcome::Trivialized(c) => write!(f, "Trivialized ({} moves)", c.move_count()),
            SearchOutcome::NonTrivialAbelianization { diagonal } => {
                write!(f, "NonTrivialAbelianization ({})", diagonal.join(","))
            }
            SearchOutcome::Exhausted(b) => write!(f, "Exhausted ({b:?})"),
            SearchOutcome::Aborted(r) => write!(f, "Aborted ({r:?})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::canonical_form;
    use crate::words::parse_presentation;

    fn pres(text: &str) -> Presentation {
        parse_presentation(text).unwrap()
    }

    #[test]
    fn rank_one_neighbors() {
        let bounds = SearchBounds { max_relator_length: 3, ..SearchBounds::default() };
        let ns = neighbors(&pres("<x | x>"), &bounds);
        assert_eq!(ns.len(), 3);
        assert_eq!(ns[0].1, pres("<x | X>"));
        assert_eq!(ns[1].1, pres("<x | x>"));
        let keys: HashSet<_> = ns.iter().map(|(_, q)| canonical_form(q, false)).collect();
        assert_eq!(keys.len(), 1);
    }

    #[test]
    fn conjugation_neighbor_collapses_to_start() {
        let p = pres("<a,b | a, b>");
        let bounds = SearchBounds::default();
        let mv = AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos };
        assert_eq!(apply_move(&p, &mv, true).unwrap().0, pres("<a,b | a, A b a>"));
        let ns = neighbors(&p, &bounds);
        let (_, q) = ns.iter().find(|(m, _)| *m == mv).unwrap();
        assert_eq!(canonical_form(q, false), canonical_form(&p, false));
    }

    #[test]
    fn length_bound_filters_products() {
        let bounds = SearchBounds { max_relator_length: 1, ..SearchBounds::default() };
        let ns = neighbors(&pres("<x,y | x y, y>"), &bounds);
        assert!(ns.iter().all(|(m, _)| !matches!(m, AcMove::MultiplyRight { .. })));
    }

    #[test]
    fn normalize_ops_reach_canonical_relator() {
        for text in ["<x,y | x y X Y X y x>", "<x,y | Y X Y y x x y>", "<x,y | y x x>", "<x,y | X>"] {
            let v = pres(text).relators.remove(0);
            let mut p = Presentation::new(2, vec![v.clone()]).unwrap();
            for op in normalize_ops(&v) {
                p = match op {
                    RelatorOp::Reduce(position) => apply_step(&p, &Step::Reduce { relator: 0, position }).unwrap(),
                    RelatorOp::Conjugate(a) => {
                        let mv = AcMove::Conjugate { relator: 0, generator: a.gen(), sign: a.sign };
                        apply_move(&p, &mv, true).unwrap().0
                    }
                    RelatorOp::Invert => apply_move(&p, &AcMove::Invert { relator: 0 }, true).unwrap().0,
                };
            }
            assert_eq!(p.relators[0], crate::moves::canonical_relator(&v), "{text}");
        }
    }

    #[test]
    fn standard_is_trivialized_immediately() {
        let report = trivialization_search(&Presentation::standard(2), &SearchBounds::default()).unwrap();
        match report.outcome {
            SearchOutcome::Trivialized(c) => assert!(c.steps.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn torsion_is_rejected() {
        let report = trivialization_search(&pres("<x | x^2>"), &SearchBounds::default()).unwrap();
        assert_eq!(report.outcome, SearchOutcome::NonTrivialAbelianization { diagonal: vec!["2".into()] });
        let report = trivialization_search(&pres("<x,y | x^2, y>"), &SearchBounds::default()).unwrap();
        assert_eq!(report.outcome.kind(), "NonTrivialAbelianization");
        assert!(trivialization_search(&pres("<x,y | x>"), &SearchBounds::default()).is_err());
    }

    #[test]
    fn scramble_is_deterministic_and_replays() {
        let p = pres("<x | x>");
        assert_eq!(scramble(&p, 0, 1, 10), (p.clone(), Certificate::empty(p.clone())));
        let a = scramble(&p, 3, 42, 10);
        assert_eq!(a, scramble(&p, 3, 42, 10));
        assert_eq!(verify_certificate(&a.1, &a.0), Ok(true));
        let q = Presentation::standard(2);
        for seed in 0..20 {
            let (s, c) = scramble(&q, 5, seed, 10);
            assert_eq!(c.replay().unwrap(), s);
            assert!(s.max_relator_length() <= 10);
        }
    }

    #[test]
    fn scrambles_are_recovered_by_every_strategy() {
        let q = Presentation::standard(2);
        for strategy in [Strategy::Bidirectional, Strategy::Bfs, Strategy::Iddfs] {
            for relabel in [false, true] {
                for seed in 0..6 {
                    let (s, _) = scramble(&q, 3, seed, 10);
                    let bounds =
                        SearchBounds { max_depth: 6, max_relator_length: 10, strategy, relabel, ..Default::default() };
                    let report = trivialization_search(&s, &bounds).unwrap();
                    let SearchOutcome::Trivialized(c) = report.outcome else {
                        panic!("{strategy:?} {relabel} {seed}: {:?}", report.outcome)
                    };
                    assert_eq!(c.start, s);
                    assert_eq!(verify_certificate(&c, &q), Ok(true));
                }
            }
        }
    }

    #[test]
    fn cancel_flag_aborts() {
        let ak3 = pres("<x,y | x^3 Y^4, x y x Y X Y>");
        let flag = AtomicBool::new(true);
        let report = trivialization_search_with_cancel(&ak3, &SearchBounds::default(), &flag).unwrap();
        assert_eq!(report.outcome, SearchOutcome::Aborted(AbortReason::Signal));
    }

    #[test]
    fn memory_limit_aborts() {
        let ak3 = pres("<x,y | x^3 Y^4, x y x Y X Y>");
        let bounds = SearchBounds { max_memory_bytes: 10_000, ..SearchBounds::default() };
        let report = trivialization_search(&ak3, &bounds).unwrap();
        assert_eq!(report.outcome, SearchOutcome::Aborted(AbortReason::Memory));
    }

    #[test]
    fn small_state_limit_exhausts() {
        let ak3 = pres("<x,y | x^3 Y^4, x y x Y X Y>");
        let bounds = SearchBounds { max_states: 50, ..SearchBounds::default() };
        let report = trivialization_search(&ak3, &bounds).unwrap();
        assert_eq!(report.outcome, SearchOutcome::Exhausted(ExhaustedBound::States));
    }
}
