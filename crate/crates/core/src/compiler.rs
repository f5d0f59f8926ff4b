//! Compiles moves and single cancellations into topology-op traces on
//! handle structures, and checks every trace against the structure built
//! directly from the resulting presentation.
//!
//! * Invert reverses a plate; nothing happens topologically.
//! * Conjugate adds a strip at each end of the plate, placed at the end of
//!   the beam's strip order: a gluing at the plate's last bridge, followed
//!   by a puncture.
//! * MultiplyRight copies the source plate's strips into the target, each
//!   copy next to its original on the beam: one gluing at the two last
//!   bridges, then a puncture for every further bridge of the source.
//! * A cancellation is a quadrilateral cut through the two bridges that
//!   flank the pair, then a bigon cut through the bridge between them.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::handles::{reconstruct_presentation, sticky_end, HandleStructure, Side, StripRef};
use crate::moves::{canonical_form, AcMove, Certificate, MoveError, Step};
use crate::ribbon::{BoundaryCircle, RibbonGraph};
use crate::topology::{
    CutEffect, CutSpec, Delta, Invariants, QuadSide, Site, SplitOff, TopologyError, TopologyOp, TrackedSpace,
};
use crate::words::{Presentation, Sign, Word};

/// What a trace was compiled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceSource {
    Move(AcMove),
    Cancellation { relator: usize, position: usize },
}

impl fmt::Display for TraceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceSource::Move(m) => write!(f, "{m}"),
            TraceSource::Cancellation { relator, position } => write!(f, "REDUCE {} {}", relator + 1, position + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyTrace {
    pub ops: Vec<TopologyOp>,
    pub source: TraceSource,
}

impl TopologyTrace {
    pub fn kinds(&self) -> Vec<&'static str> {
        self.ops.iter().map(TopologyOp::kind).collect()
    }

    /// `MOVE <move>` followed by the history lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("MOVE {}\n", self.source);
        for op in &self.ops {
            out.push_str(&format!("{op}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let syntax = |line: usize, message: String| TopologyError::Syntax { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (n, header) = lines.next().ok_or_else(|| syntax(1, "missing MOVE header".into()))?;
        let step = header.trim().strip_prefix("MOVE ").ok_or_else(|| syntax(n + 1, "expected MOVE header".into()))?;
        let source = match crate::moves::parse_step(step).map_err(|m| syntax(n + 1, m))? {
            Step::Move(m) => TraceSource::Move(m),
            Step::Reduce { relator, position } => TraceSource::Cancellation { relator, position },
        };
        let ops = lines
            .map(|(i, l)| l.trim().parse().map_err(|m| syntax(i + 1, m)))
            .collect::<Result<Vec<TopologyOp>, _>>()?;
        Ok(TopologyTrace { ops, source })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pass: bool,
    /// Invariants reached by replaying the trace on the pre-move structure.
    pub trace: Invariants,
    /// Invariants of the post-move structure, computed directly.
    pub direct: Invariants,
    pub trace_key: String,
    pub direct_key: String,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("relator {0} would become empty")]
    EmptyRelator(usize),
    #[error(transparent)]
    Move(#[from] MoveError),
    #[error("no cancelling pair at position {position} of relator {relator}")]
    NoCancellablePair { relator: usize, position: usize },
    #[error("quadrilateral cut on the {0} side fails the homology check")]
    HomologyCheckFailed(QuadSide),
    #[error(transparent)]
    Topology(TopologyError),
    #[error("trace disagrees with the directly built structure: {}", .0.mismatches.join("; "))]
    Inconsistent(Box<ConsistencyReport>),
}

impl From<TopologyError> for CompileError {
    fn from(e: TopologyError) -> Self {
        match e {
            TopologyError::HomologyCheckFailed(side) => CompileError::HomologyCheckFailed(side),
            other => CompileError::Topology(other),
        }
    }
}

/// Removes the cancelling pair at `position`, `position + 1`, where the
/// pair may wrap around the end of the word.
pub fn cancel_cyclic(word: &Word, position: usize) -> Option<Word> {
    let n = word.len();
    if n < 2 || position >= n {
        return None;
    }
    let next = (position + 1) % n;
    if !word.0[position].cancels(word.0[next]) {
        return None;
    }
    let letters = if next == 0 {
        word.0[1..n - 1].to_vec()
    } else {
        word.0.iter().enumerate().filter(|&(k, _)| k != position && k != next).map(|(_, l)| *l).collect()
    };
    Some(Word(letters))
}

/// The presentation a source step should produce (concatenation mode).
pub fn expected_presentation(p: &Presentation, source: &TraceSource) -> Result<Presentation, CompileError> {
    match *source {
        TraceSource::Move(m) => Ok(crate::moves::apply_move(p, &m, false)?.0),
        TraceSource::Cancellation { relator, position } => {
            let word = p.relators.get(relator).ok_or(CompileError::NoCancellablePair { relator, position })?;
            let reduced = cancel_cyclic(word, position).ok_or(CompileError::NoCancellablePair { relator, position })?;
            let mut out = p.clone();
            out.relators[relator] = reduced;
            Ok(out)
        }
    }
}

/// Replays the trace from `pre`'s invariants and compares with `post`.
pub fn verify_trace(
    pre: &HandleStructure,
    source: &TraceSource,
    trace: &TopologyTrace,
    post: &HandleStructure,
) -> ConsistencyReport {
    let mut mismatches = Vec::new();
    let context = reconstruct_presentation(pre);
    let mut ts = TrackedSpace::from_handle_structure(pre);
    for (k, op) in trace.ops.iter().enumerate() {
        match ts.apply(op, Some(&context)) {
            Ok(next) => ts = next,
            Err(e) => {
                mismatches.push(format!("op {} ({}) rejected: {e}", k + 1, op.kind()));
                break;
            }
        }
    }
    let traced = ts.replayed_invariants();
    let direct = Invariants::of_handle_structure(post);
    let pairs = [
        ("euler_M", traced.euler_m, direct.euler_m),
        ("euler_S", traced.euler_s, direct.euler_s),
        ("components", traced.components as i64, direct.components as i64),
        ("boundary_circles_S", traced.boundary_circles as i64, direct.boundary_circles as i64),
    ];
    for (name, t, d) in pairs {
        if t != d {
            mismatches.push(format!("{name}: trace {t}, direct {d}"));
        }
    }
    let direct_key = canonical_form(&reconstruct_presentation(post), false).to_hex();
    let trace_key = match expected_presentation(&context, source) {
        Ok(p) => canonical_form(&p, false).to_hex(),
        Err(e) => {
            mismatches.push(format!("source step does not apply: {e}"));
            String::new()
        }
    };
    if trace_key != direct_key {
        mismatches.push("reconstructed presentation differs from the expected one".into());
    }
    ConsistencyReport { pass: mismatches.is_empty(), trace: traced, direct, trace_key, direct_key, mismatches }
}

fn checked(
    pre: &HandleStructure,
    source: TraceSource,
    ops: Vec<TopologyOp>,
    post: HandleStructure,
) -> Result<(HandleStructure, TopologyTrace), CompileError> {
    let trace = TopologyTrace { ops, source };
    let report = verify_trace(pre, &source, &trace, &post);
    if report.pass {
        Ok((post, trace))
    } else {
        Err(CompileError::Inconsistent(Box::new(report)))
    }
}

/// Boundary data of the pre-move sticky end, keyed the way
/// [`TrackedSpace::from_handle_structure`] numbers circles.
struct Layout {
    graph: RibbonGraph,
    circles: Vec<BoundaryCircle>,
    dart_circle: Vec<Option<usize>>,
    labels: Vec<usize>,
}

impl Layout {
    fn new(h: &HandleStructure) -> Self {
        let graph = sticky_end(h).graph;
        let boundary = graph.boundary();
        Layout {
            graph,
            circles: boundary.circles,
            dart_circle: boundary.dart_circle,
            labels: h.total_space_components().1,
        }
    }

    fn circle_of(&self, dart: usize) -> usize {
        self.dart_circle[dart].expect("sticky ends are untwisted and fully bound")
    }

    fn bare_circle(&self, island: usize) -> usize {
        self.circles
            .iter()
            .position(|c| *c == BoundaryCircle::BareIsland(island))
            .expect("island without darts is a bare circle")
    }
}

fn last_strip(h: &HandleStructure, plate: usize) -> StripRef {
    StripRef { plate, position: h.plates[plate].strips.len() - 1 }
}

pub fn compile_move(h: &HandleStructure, m: &AcMove) -> Result<(HandleStructure, TopologyTrace), CompileError> {
    let p = reconstruct_presentation(h);
    m.check(&p)?;
    let words = |changed: usize, word: Word| {
        let mut ws = h.words();
        ws[changed] = word;
        ws
    };
    match *m {
        AcMove::Invert { relator } => {
            let n = h.plates[relator].strips.len();
            let orders = remap_orders(h, |r| {
                Some(if r.plate == relator { StripRef { plate: relator, position: n - 1 - r.position } } else { r })
            });
            let post = HandleStructure::from_orders(h.beams, &words(relator, p.relators[relator].inverse()), orders)
                .map_err(|_| CompileError::EmptyRelator(relator))?;
            checked(h, TraceSource::Move(*m), Vec::new(), post)
        }
        AcMove::Conjugate { relator, generator, sign } => {
            let layout = Layout::new(h);
            let x_dart = h.exit_dart(last_strip(h, relator));
            let x = Site {
                component: layout.labels[h.beams + relator],
                circle: layout.circle_of(x_dart),
                point: 2 * x_dart,
            };
            let order = &h.beam_orders[generator];
            let gap = match sign {
                Sign::Pos => order.last().map(|&r| h.dart(r, Side::Bottom)),
                Sign::Neg => order.first().map(|&r| h.dart(r, Side::Top)),
            };
            let (circle, point) = match gap {
                Some(e) => {
                    let across = layout.graph.partner(e).expect("bound");
                    (layout.circle_of(across), 2 * e + 1)
                }
                None => {
                    let side = if sign == Sign::Pos { Side::Bottom } else { Side::Top };
                    let island = HandleStructure::island(generator, side);
                    (layout.bare_circle(island), 2 * (layout.graph.dart_count() + island) + 1)
                }
            };
            let y = Site { component: layout.labels[generator], circle, point };
            let n = h.plates[relator].strips.len();
            let mut orders = remap_orders(h, |r| {
                Some(if r.plate == relator { StripRef { plate: relator, position: r.position + 1 } } else { r })
            });
            let first = StripRef { plate: relator, position: 0 };
            let last = StripRef { plate: relator, position: n + 1 };
            match sign {
                Sign::Pos => orders[generator].extend([first, last]),
                Sign::Neg => orders[generator].extend([last, first]),
            }
            let post = HandleStructure::from_orders(h.beams, &words(relator, m.rewritten(&p)?), orders)
                .map_err(|_| CompileError::EmptyRelator(relator))?;
            let ops =
                vec![TopologyOp::Glue { x, y }, TopologyOp::Puncture { component: x.component, circle: x.circle }];
            checked(h, TraceSource::Move(*m), ops, post)
        }
        AcMove::MultiplyRight { target, source } => {
            let layout = Layout::new(h);
            let site = |plate: usize| {
                let d = h.exit_dart(last_strip(h, plate));
                Site { component: layout.labels[h.beams + plate], circle: layout.circle_of(d), point: 2 * d }
            };
            let (x, y) = (site(target), site(source));
            let offset = h.plates[target].strips.len();
            let orders = h
                .beam_orders
                .iter()
                .map(|order| {
                    let mut out = Vec::with_capacity(order.len() * 2);
                    for &r in order {
                        if r.plate != source {
                            out.push(r);
                            continue;
                        }
                        let copy = StripRef { plate: target, position: offset + r.position };
                        match h.strip(r).sign {
                            Sign::Pos => out.extend([r, copy]),
                            Sign::Neg => out.extend([copy, r]),
                        }
                    }
                    out
                })
                .collect();
            let post = HandleStructure::from_orders(h.beams, &words(target, m.rewritten(&p)?), orders)
                .map_err(|_| CompileError::EmptyRelator(target))?;
            let mut ops = vec![TopologyOp::Glue { x, y }];
            for _ in 1..h.plates[source].strips.len() {
                ops.push(TopologyOp::Puncture { component: x.component, circle: x.circle });
            }
            checked(h, TraceSource::Move(*m), ops, post)
        }
    }
}

fn remap_orders(h: &HandleStructure, f: impl Fn(StripRef) -> Option<StripRef>) -> Vec<Vec<StripRef>> {
    h.beam_orders.iter().map(|order| order.iter().filter_map(|&r| f(r)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CircleKey {
    Corners(Vec<usize>),
    Bare(usize),
}

fn circle_keys(g: &RibbonGraph) -> Vec<CircleKey> {
    g.boundary()
        .circles
        .iter()
        .map(|c| match c {
            BoundaryCircle::Darts(ds) => {
                let mut corners: Vec<usize> = ds.iter().map(|&d| g.partner(d).expect("bound")).collect();
                corners.sort_unstable();
                CircleKey::Corners(corners)
            }
            BoundaryCircle::BareIsland(i) => CircleKey::Bare(*i),
        })
        .collect()
}

/// Matches circles before and after a band surgery. Returns the tracked
/// ids of the new circles and the declared effect.
fn track_circles(
    before: &[CircleKey],
    ids: &[usize],
    after: &[CircleKey],
    next_id: &mut usize,
) -> (Vec<usize>, CutEffect) {
    let old: HashMap<&CircleKey, usize> = before.iter().zip(ids).map(|(k, &id)| (k, id)).collect();
    let mut new_ids = Vec::with_capacity(after.len());
    let mut create = 0;
    for k in after {
        match old.get(k) {
            Some(&id) => new_ids.push(id),
            None => {
                new_ids.push(*next_id);
                *next_id += 1;
                create += 1;
            }
        }
    }
    let kept: std::collections::HashSet<&CircleKey> = after.iter().collect();
    let retire = before.iter().zip(ids).filter(|(k, _)| !kept.contains(k)).map(|(_, &id)| id).collect();
    (new_ids, CutEffect { retire, create, split: None })
}

pub fn compile_cancellation(
    h: &HandleStructure,
    relator: usize,
    position: usize,
) -> Result<(HandleStructure, TopologyTrace), CompileError> {
    compile_cancellation_on_side(h, relator, position, QuadSide::Left)
}

/// As [`compile_cancellation`] with an explicit quadrilateral side; the
/// right side fails the homology check whenever the relator's exponent row
/// is non-zero.
pub fn compile_cancellation_on_side(
    h: &HandleStructure,
    relator: usize,
    position: usize,
    side: QuadSide,
) -> Result<(HandleStructure, TopologyTrace), CompileError> {
    let no_pair = CompileError::NoCancellablePair { relator, position };
    let plate = h.plates.get(relator).ok_or(no_pair.clone())?;
    let n = plate.strips.len();
    let word = h.plate_word(relator);
    let reduced = cancel_cyclic(&word, position).ok_or(no_pair)?;
    if reduced.is_empty() {
        return Err(CompileError::EmptyRelator(relator));
    }
    let at = |k: usize| StripRef { plate: relator, position: k % n };
    let (first, second) = (at(position), at(position + 1));
    let (before, after) = (at(position + n - 1), at(position + 2));

    let (pre_count, pre_labels) = h.total_space_components();
    let component = pre_labels[h.beams + relator];
    let mut g = sticky_end(h).graph;
    let keys0 = circle_keys(&g);
    let ids0: Vec<usize> = (0..keys0.len()).collect();
    let mut next_id = keys0.len();

    g.unbind(h.exit_dart(before));
    g.unbind(h.exit_dart(second));
    g.bind(h.exit_dart(before), h.entry_dart(after), false);
    let keys1 = circle_keys(&g);
    let (ids1, quad_effect) = track_circles(&keys0, &ids0, &keys1, &mut next_id);

    g.unbind(h.exit_dart(first));
    let keys2 = circle_keys(&g);
    let (ids2, mut bigon_effect) = track_circles(&keys1, &ids1, &keys2, &mut next_id);

    let remap = |r: StripRef| -> Option<StripRef> {
        if r.plate != relator {
            return Some(r);
        }
        if r == first || r == second {
            return None;
        }
        let shift = if second.position == 0 {
            1
        } else if r.position > second.position {
            2
        } else {
            0
        };
        Some(StripRef { plate: relator, position: r.position - shift })
    };
    let mut words = h.words();
    words[relator] = reduced;
    let post = HandleStructure::from_orders(h.beams, &words, remap_orders(h, remap))
        .map_err(|_| CompileError::EmptyRelator(relator))?;

    let (post_count, post_labels) = post.total_space_components();
    if post_count > pre_count {
        let kept = post_labels[post.beams + relator];
        let beams_of = |b: usize| pre_labels[b] == component && post_labels[b] != kept;
        let split_beams: Vec<usize> = (0..h.beams).filter(|&b| beams_of(b)).collect();
        let split_plates: Vec<usize> = (0..post.plates.len())
            .filter(|&i| pre_labels[h.beams + i] == component && post_labels[post.beams + i] != kept)
            .collect();
        let strips: i64 = split_plates.iter().map(|&i| post.plates[i].strips.len() as i64).sum();
        let sticky_circles = g.boundary().circles;
        let circles = sticky_circles
            .iter()
            .zip(&ids2)
            .filter(|(c, _)| {
                let island = match c {
                    BoundaryCircle::Darts(ds) => g.island_of(ds[0]),
                    BoundaryCircle::BareIsland(i) => *i,
                };
                split_beams.contains(&(island / 2))
            })
            .map(|(_, &id)| id)
            .collect();
        bigon_effect.split = Some(SplitOff {
            euler_m: split_beams.len() as i64 + split_plates.len() as i64 - strips,
            euler_s: 2 * split_beams.len() as i64 - strips,
            circles,
        });
    }
    let spec = CutSpec { relator, position };
    let ops = vec![
        TopologyOp::CutQuad { component, spec, side, effect: quad_effect },
        TopologyOp::CutBigon { component, spec, effect: bigon_effect },
    ];
    // The gate runs as part of replay; surface its verdict as a compile error.
    let context = reconstruct_presentation(h);
    TrackedSpace::from_handle_structure(h).apply(&ops[0], Some(&context))?;
    checked(h, TraceSource::Cancellation { relator, position }, ops, post)
}

/// Compiles every step of a certificate from the structure of its start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateCompilation {
    pub traces: Vec<TopologyTrace>,
    pub start: Invariants,
    /// Start invariants plus the deltas of all traces.
    pub replayed: Invariants,
    /// Invariants of the structure built directly from the final presentation.
    pub direct: Invariants,
    pub final_structure: HandleStructure,
}

pub fn compile_certificate(c: &Certificate, start: &HandleStructure) -> Result<CertificateCompilation, CompileError> {
    let mut h = start.clone();
    let mut traces = Vec::with_capacity(c.steps.len());
    let mut total = Delta::default();
    for step in &c.steps {
        let (next, trace) = match *step {
            Step::Move(m) => compile_move(&h, &m)?,
            Step::Reduce { relator, position } => compile_cancellation(&h, relator, position)?,
        };
        let mut ts = TrackedSpace::from_handle_structure(&h);
        let context = reconstruct_presentation(&h);
        for op in &trace.ops {
            ts = ts.apply(op, Some(&context))?;
        }
        for e in ts.history() {
            total = total.plus(e.delta);
        }
        traces.push(trace);
        h = next;
    }
    let start_inv = Invariants::of_handle_structure(start);
    let final_p = reconstruct_presentation(&h);
    let direct = Invariants::of_handle_structure(
        &crate::handles::build_handle_structure(&final_p, None).map_err(|_| CompileError::EmptyRelator(0))?,
    );
    Ok(CertificateCompilation {
        traces,
        start: start_inv,
        replayed: start_inv.apply(total),
        direct,
        final_structure: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::handles::build_handle_structure;
    use crate::words::parse_presentation;

    fn structure(text: &str) -> HandleStructure {
        build_handle_structure(&parse_presentation(text).unwrap(), None).unwrap()
    }

    #[test]
    fn conjugation_is_glue_then_puncture() {
        let h = structure("<a,b | a, b>");
        let m = AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos };
        let (post, trace) = compile_move(&h, &m).unwrap();
        assert_eq!(trace.kinds(), vec!["Glue", "Puncture"]);
        assert_eq!(reconstruct_presentation(&post), parse_presentation("<a,b | a, A b a>").unwrap());
        let report = verify_trace(&h, &trace.source, &trace, &post);
        assert!(report.pass);
        assert_eq!((report.direct.euler_m, report.direct.euler_s), (0, 0));
    }

    #[test]
    fn dropping_the_puncture_is_caught() {
        let h = structure("<a,b | a, b>");
        let m = AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos };
        let (post, mut trace) = compile_move(&h, &m).unwrap();
        trace.ops.pop();
        let report = verify_trace(&h, &trace.source, &trace, &post);
        assert!(!report.pass);
        assert_eq!(report.mismatches[0], "euler_M: trace 1, direct 0");
    }

    #[test]
    fn multiply_with_one_bridge_is_a_single_glue() {
        let h = structure("<a,b | b, a>");
        let (post, trace) = compile_move(&h, &AcMove::MultiplyRight { target: 1, source: 0 }).unwrap();
        assert_eq!(trace.kinds(), vec!["Glue"]);
        let inv = Invariants::of_handle_structure(&post);
        assert_eq!((inv.euler_m, inv.euler_s), (1, 1));
    }

    #[test]
    fn multiply_punctures_once_per_extra_bridge() {
        let h = structure("<a,b | a b A, b>");
        let (_, trace) = compile_move(&h, &AcMove::MultiplyRight { target: 1, source: 0 }).unwrap();
        assert_eq!(trace.kinds(), vec!["Glue", "Puncture", "Puncture"]);
    }

    #[test]
    fn invert_is_empty() {
        let h = structure("<a,b | a b A, b>");
        let (post, trace) = compile_move(&h, &AcMove::Invert { relator: 0 }).unwrap();
        assert!(trace.ops.is_empty());
        assert_eq!(Invariants::of_handle_structure(&post), Invariants::of_handle_structure(&h));
    }

    #[test]
    fn cancellation_of_the_conjugate_restores_two_pieces() {
        let h = structure("<a,b | a, A b a>");
        let (post, trace) = compile_cancellation(&h, 1, 2).unwrap();
        assert_eq!(trace.kinds(), vec!["CutQuad", "CutBigon"]);
        assert_eq!(reconstruct_presentation(&post), parse_presentation("<a,b | a, b>").unwrap());
        let inv = Invariants::of_handle_structure(&post);
        assert_eq!(inv, Invariants { euler_m: 2, euler_s: 2, components: 2, boundary_circles: 2 });
    }

    #[test]
    fn linear_cancellation() {
        let h = structure("<x,y | x X y, y>");
        let (post, _) = compile_cancellation(&h, 0, 0).unwrap();
        assert_eq!(reconstruct_presentation(&post), parse_presentation("<x,y | y, y>").unwrap());
        assert!(matches!(compile_cancellation(&h, 0, 1), Err(CompileError::NoCancellablePair { .. })));
        let short = structure("<x | x X>");
        assert_eq!(compile_cancellation(&short, 0, 0).unwrap_err(), CompileError::EmptyRelator(0));
    }

    #[test]
    fn wrong_quad_side_fails_homology() {
        let h = structure("<a,b | a A b a, A b a>");
        assert_eq!(
            compile_cancellation_on_side(&h, 0, 0, QuadSide::Right).unwrap_err(),
            CompileError::HomologyCheckFailed(QuadSide::Right)
        );
        assert!(compile_cancellation_on_side(&h, 0, 0, QuadSide::Left).is_ok());
    }

    #[test]
    fn trace_text_round_trip() {
        let h = structure("<a,b | a, A b a>");
        let (_, trace) = compile_cancellation(&h, 1, 2).unwrap();
        assert_eq!(TopologyTrace::parse(&trace.to_text()).unwrap(), trace);
        let (_, trace) = compile_move(&h, &AcMove::MultiplyRight { target: 0, source: 1 }).unwrap();
        assert_eq!(TopologyTrace::parse(&trace.to_text()).unwrap(), trace);
    }

    #[test]
    fn certificate_compiles_end_to_end() {
        let start = Presentation::standard(2);
        let moves = [
            AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos },
            AcMove::MultiplyRight { target: 0, source: 1 },
        ];
        let mut c = Certificate::empty(start.clone());
        for m in moves {
            c.steps.push(Step::Move(m));
        }
        c.steps.push(Step::Reduce { relator: 0, position: 0 });
        let result = compile_certificate(&c, &build_handle_structure(&start, None).unwrap()).unwrap();
        assert_eq!(result.traces.len(), 3);
        assert_eq!(result.replayed, result.direct);
    }
}
