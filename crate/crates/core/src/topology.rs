//! Invariant-level model of a total space with its sticky part, and the
//! operations that moves compile to: gluing, puncturing, bigon and
//! quadrilateral cuts, capping, and cutting along tracked annuli.
//!
//! A [`TrackedSpace`] keeps Euler characteristics of the total space and of
//! the sticky surface, the component count and the live boundary circles of
//! the sticky surface. Components are unions of pieces; a piece is a
//! component as it was when it entered the model, so gluings recorded as
//! annuli can later be cut apart again with exact per-piece figures.
//!
//! Per-op deltas (total space, sticky surface, components, boundary circles):
//!
//! | op          | M  | S  | components            | circles                    |
//! |-------------|----|----|-----------------------|----------------------------|
//! | glue        | -1 | -1 | -1 across components  | -1 distinct, +1 same       |
//! | puncture    | -1 | -1 | 0                     | +1                         |
//! | bigon, quad | +1 | +1 | +1 if a split is declared | as declared            |
//! | cap         | +1 | +1 | 0                     | -1                         |
//! | annulus cut | +1, or +2 if capped | same | +1 if it separates | +1, or 0 if capped |

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::handles::{sticky_end, HandleStructure, Side};
use crate::homology::{abelianization_matrix, smith_normal_form};
use crate::ribbon::{BoundaryCircle, Dsu};
use crate::words::{Presentation, Word};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Invariants {
    pub euler_m: i64,
    pub euler_s: i64,
    pub components: usize,
    pub boundary_circles: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Delta {
    pub euler_m: i64,
    pub euler_s: i64,
    pub components: i64,
    pub boundary_circles: i64,
}

impl Delta {
    pub fn plus(self, other: Delta) -> Delta {
        Delta {
            euler_m: self.euler_m + other.euler_m,
            euler_s: self.euler_s + other.euler_s,
            components: self.components + other.components,
            boundary_circles: self.boundary_circles + other.boundary_circles,
        }
    }
}

impl Invariants {
    pub fn apply(self, d: Delta) -> Invariants {
        Invariants {
            euler_m: self.euler_m + d.euler_m,
            euler_s: self.euler_s + d.euler_s,
            components: (self.components as i64 + d.components) as usize,
            boundary_circles: (self.boundary_circles as i64 + d.boundary_circles) as usize,
        }
    }

    pub fn of_handle_structure(h: &HandleStructure) -> Invariants {
        let sticky = sticky_end(h);
        Invariants {
            euler_m: crate::handles::total_space_euler(h),
            euler_s: sticky.graph.euler_characteristic(),
            components: h.total_space_components().0,
            boundary_circles: sticky.graph.boundary_circle_count(),
        }
    }
}

/// A point on a live boundary circle of the sticky surface. `point` is an
/// opaque label telling apart sites on the same circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub component: usize,
    pub circle: usize,
    pub point: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadSide {
    /// The side away from the bigon.
    Left,
    Right,
}

impl fmt::Display for QuadSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadSide::Left => "left",
            QuadSide::Right => "right",
        })
    }
}

/// Where a cut happens: the cancelling pair at `position`, `position + 1`
/// (cyclically) of a relator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CutSpec {
    pub relator: usize,
    pub position: usize,
}

/// The part of a component that a cut separates off.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitOff {
    pub euler_m: i64,
    pub euler_s: i64,
    /// Circles (existing or just created) that move to the new component.
    pub circles: Vec<usize>,
}

/// Declared boundary effect of a cut: circles it destroys, how many fresh
/// circles it creates (ids allocated in order), and an optional split.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CutEffect {
    pub retire: Vec<usize>,
    pub create: usize,
    pub split: Option<SplitOff>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyOp {
    Glue { x: Site, y: Site },
    Puncture { component: usize, circle: usize },
    CutBigon { component: usize, spec: CutSpec, effect: CutEffect },
    CutQuad { component: usize, spec: CutSpec, side: QuadSide, effect: CutEffect },
    Cap { component: usize, circle: usize },
    CutAnnulus { annulus: usize },
}

impl TopologyOp {
    pub fn kind(&self) -> &'static str {
        match self {
            TopologyOp::Glue { .. } => "Glue",
            TopologyOp::Puncture { .. } => "Puncture",
            TopologyOp::CutBigon { .. } => "CutBigon",
            TopologyOp::CutQuad { .. } => "CutQuad",
            TopologyOp::Cap { .. } => "Cap",
            TopologyOp::CutAnnulus { .. } => "CutAnnulus",
        }
    }
}

fn join(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn effect_text(e: &CutEffect) -> String {
    let split = match &e.split {
        None => "keep".to_string(),
        Some(s) => format!("{}/{}/{}", s.euler_m, s.euler_s, join(&s.circles)),
    };
    format!("retire={} create={} split={}", join(&e.retire), e.create, split)
}

impl fmt::Display for TopologyOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyOp::Glue { x, y } => {
                write!(f, "GLUE {} {}.{} {} {}.{}", x.component, x.circle, x.point, y.component, y.circle, y.point)
            }
            TopologyOp::Puncture { component, circle } => write!(f, "PUNCT {component} {circle}"),
            TopologyOp::CutBigon { component, spec, effect } => {
                write!(f, "BIGON {component} {}.{} {}", spec.relator + 1, spec.position + 1, effect_text(effect))
            }
            TopologyOp::CutQuad { component, spec, side, effect } => {
                write!(f, "QUAD {component} {}.{} {side} {}", spec.relator + 1, spec.position + 1, effect_text(effect))
            }
            TopologyOp::Cap { component, circle } => write!(f, "CAP {component} {circle}"),
            TopologyOp::CutAnnulus { annulus } => write!(f, "ANNULUS {annulus}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("stale site: {0}")]
    StaleSite(String),
    #[error("both gluing sites are the same point")]
    SamePoint,
    #[error("quadrilateral cut on the {0} side fails the homology check")]
    HomologyCheckFailed(QuadSide),
    #[error("invalid cut declaration: {0}")]
    InvalidDeclaration(String),
    #[error("history line {line}: {message}")]
    Syntax { line: usize, message: String },
}

impl std::str::FromStr for TopologyOp {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| format!("bad integer {s:?}"));
        let pair = |s: &str| -> Result<(usize, usize), String> {
            let (a, b) = s.split_once('.').ok_or_else(|| format!("expected a.b, got {s:?}"))?;
            Ok((num(a)?, num(b)?))
        };
        let spec = |s: &str| -> Result<CutSpec, String> {
            let (r, p) = pair(s)?;
            if r == 0 || p == 0 {
                return Err("relator and position are one-based".into());
            }
            Ok(CutSpec { relator: r - 1, position: p - 1 })
        };
        let list = |s: &str| -> Result<Vec<usize>, String> {
            if s.is_empty() {
                Ok(Vec::new())
            } else {
                s.split(',').map(num).collect()
            }
        };
        let effect = |fs: &[&str]| -> Result<CutEffect, String> {
            let [retire, create, split] = fs else { return Err("expected retire=, create=, split=".into()) };
            let retire = list(retire.strip_prefix("retire=").ok_or("expected retire=")?)?;
            let create = num(create.strip_prefix("create=").ok_or("expected create=")?)?;
            let split = match split.strip_prefix("split=").ok_or("expected split=")? {
                "keep" => None,
                s => {
                    let parts: Vec<&str> = s.splitn(3, '/').collect();
                    let [m, e, c] = parts.as_slice() else { return Err("split must be m/s/circles".into()) };
                    Some(SplitOff {
                        euler_m: m.parse().map_err(|_| "bad split euler")?,
                        euler_s: e.parse().map_err(|_| "bad split euler")?,
                        circles: list(c)?,
                    })
                }
            };
            Ok(CutEffect { retire, create, split })
        };
        match fields.as_slice() {
            ["GLUE", cx, x, cy, y] => {
                let (xc, xp) = pair(x)?;
                let (yc, yp) = pair(y)?;
                Ok(TopologyOp::Glue {
                    x: Site { component: num(cx)?, circle: xc, point: xp },
                    y: Site { component: num(cy)?, circle: yc, point: yp },
                })
            }
            ["PUNCT", c, circ] => Ok(TopologyOp::Puncture { component: num(c)?, circle: num(circ)? }),
            ["CAP", c, circ] => Ok(TopologyOp::Cap { component: num(c)?, circle: num(circ)? }),
            ["ANNULUS", a] => Ok(TopologyOp::CutAnnulus { annulus: num(a)? }),
            ["BIGON", c, s, rest @ ..] => {
                Ok(TopologyOp::CutBigon { component: num(c)?, spec: spec(s)?, effect: effect(rest)? })
            }
            ["QUAD", c, s, side, rest @ ..] => {
                let side = match *side {
                    "left" => QuadSide::Left,
                    "right" => QuadSide::Right,
                    other => return Err(format!("unknown side {other:?}")),
                };
                Ok(TopologyOp::CutQuad { component: num(c)?, spec: spec(s)?, side, effect: effect(rest)? })
            }
            _ => Err(format!("unrecognized op {line:?}")),
        }
    }
}

/// Parses history text, one op per line; blank lines are skipped.
pub fn parse_history(text: &str) -> Result<Vec<TopologyOp>, TopologyError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().map_err(|message| TopologyError::Syntax { line: i + 1, message }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceBase {
    Handle(HandleStructure),
    StandardPieces(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub op: TopologyOp,
    pub delta: Delta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Piece {
    component: usize,
    origin: usize,
    euler_m: i64,
    euler_s: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Circle {
    piece: usize,
    sheet: usize,
    live: bool,
    capped: bool,
}

/// A vertical annulus left behind by gluing two components together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedAnnulus {
    pub glue_step: usize,
    kept_piece: usize,
    absorbed_piece: usize,
    kept_circle: usize,
    absorbed_circle: usize,
    absorbed_sheet: usize,
    relabeled: Vec<usize>,
    pub live: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunctureRecord {
    pub component: usize,
    /// The circle the puncture created.
    pub circle: usize,
    pub undone: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub id: usize,
    pub euler_m: i64,
    pub euler_s: i64,
    pub uncapped_circles: usize,
    pub capped_circles: usize,
    /// Connected pieces of the sticky surface.
    pub sheets: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedSpace {
    base: Arc<SpaceBase>,
    base_invariants: Invariants,
    history: Vec<HistoryEntry>,
    invariants: Invariants,
    pieces: Vec<Piece>,
    circles: Vec<Circle>,
    component_alive: Vec<bool>,
    annuli: Vec<TrackedAnnulus>,
    punctures: Vec<PunctureRecord>,
    links: Vec<(usize, usize)>,
    next_sheet: usize,
}

impl TrackedSpace {
    /// `n` disjoint balls, each with a disc as sticky part.
    pub fn standard_pieces(n: usize) -> Self {
        let pieces = (0..n).map(|c| Piece { component: c, origin: c, euler_m: 1, euler_s: 1 }).collect();
        let circles = (0..n).map(|c| Circle { piece: c, sheet: c, live: true, capped: false }).collect();
        let inv = Invariants { euler_m: n as i64, euler_s: n as i64, components: n, boundary_circles: n };
        Self::assemble(SpaceBase::StandardPieces(n), inv, pieces, circles, n)
    }

    /// Circle ids are the indices of the sticky end's boundary circles and
    /// component ids the total-space component labels.
    pub fn from_handle_structure(h: &HandleStructure) -> Self {
        let (count, labels) = h.total_space_components();
        let sticky = sticky_end(h);
        let g = &sticky.graph;
        let mut pieces: Vec<Piece> =
            (0..count).map(|c| Piece { component: c, origin: c, euler_m: 0, euler_s: 0 }).collect();
        for b in 0..h.beams {
            pieces[labels[b]].euler_m += 1;
            pieces[labels[b]].euler_s += 2;
        }
        for (i, p) in h.plates.iter().enumerate() {
            let c = labels[h.beams + i];
            pieces[c].euler_m += 1 - p.strips.len() as i64;
            pieces[c].euler_s -= p.strips.len() as i64;
        }
        let (sheet_count, sheet_of_island) = g.island_components();
        let circles = g
            .boundary()
            .circles
            .iter()
            .map(|c| {
                let island = match c {
                    BoundaryCircle::Darts(ds) => g.island_of(ds[0]),
                    BoundaryCircle::BareIsland(i) => *i,
                };
                let (beam, _): (usize, Side) = sticky.islands[island];
                Circle { piece: labels[beam], sheet: sheet_of_island[island], live: true, capped: false }
            })
            .collect();
        let inv = Invariants::of_handle_structure(h);
        Self::assemble(SpaceBase::Handle(h.clone()), inv, pieces, circles, sheet_count)
    }

    fn assemble(base: SpaceBase, inv: Invariants, pieces: Vec<Piece>, circles: Vec<Circle>, sheets: usize) -> Self {
        let n = pieces.len();
        TrackedSpace {
            base: Arc::new(base),
            base_invariants: inv,
            history: Vec::new(),
            invariants: inv,
            pieces,
            circles,
            component_alive: vec![true; n],
            annuli: Vec::new(),
            punctures: Vec::new(),
            links: Vec::new(),
            next_sheet: sheets,
        }
    }

    pub fn base(&self) -> &SpaceBase {
        &self.base
    }

    pub fn base_invariants(&self) -> Invariants {
        self.base_invariants
    }

    pub fn invariants(&self) -> Invariants {
        self.invariants
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Base invariants plus the recorded per-op deltas.
    pub fn replayed_invariants(&self) -> Invariants {
        self.history.iter().fold(self.base_invariants, |inv, e| inv.apply(e.delta))
    }

    pub fn annuli(&self) -> &[TrackedAnnulus] {
        &self.annuli
    }

    pub fn live_annuli(&self) -> usize {
        self.annuli.iter().filter(|a| a.live).count()
    }

    pub fn punctures(&self) -> &[PunctureRecord] {
        &self.punctures
    }

    pub fn capped_circles(&self) -> Vec<usize> {
        (0..self.circles.len()).filter(|&c| self.circles[c].live && self.circles[c].capped).collect()
    }

    pub fn uncapped_circles(&self) -> Vec<usize> {
        (0..self.circles.len()).filter(|&c| self.circles[c].live && !self.circles[c].capped).collect()
    }

    pub fn component_of_circle(&self, circle: usize) -> Option<usize> {
        let c = self.circles.get(circle)?;
        c.live.then(|| self.pieces[c.piece].component)
    }

    pub fn component_ids(&self) -> Vec<usize> {
        (0..self.component_alive.len()).filter(|&c| self.component_alive[c]).collect()
    }

    pub fn component_summaries(&self) -> Vec<ComponentSummary> {
        self.component_ids()
            .into_iter()
            .map(|id| {
                let (mut euler_m, mut euler_s) = (0, 0);
                for p in self.pieces.iter().filter(|p| p.component == id) {
                    euler_m += p.euler_m;
                    euler_s += p.euler_s;
                }
                let mut sheets = Vec::new();
                let (mut uncapped, mut capped) = (0, 0);
                for c in self.circles.iter().filter(|c| c.live && self.pieces[c.piece].component == id) {
                    if c.capped {
                        capped += 1;
                    } else {
                        uncapped += 1;
                    }
                    sheets.push(c.sheet);
                }
                sheets.sort_unstable();
                sheets.dedup();
                ComponentSummary {
                    id,
                    euler_m,
                    euler_s,
                    uncapped_circles: uncapped,
                    capped_circles: capped,
                    sheets: sheets.len(),
                }
            })
            .collect()
    }

    /// One op per line.
    pub fn history_text(&self) -> String {
        self.history.iter().map(|e| format!("{}\n", e.op)).collect()
    }

    fn check_component(&self, component: usize) -> Result<(), TopologyError> {
        if self.component_alive.get(component).copied().unwrap_or(false) {
            Ok(())
        } else {
            Err(TopologyError::StaleSite(format!("component {component}")))
        }
    }

    fn check_circle(&self, component: usize, circle: usize) -> Result<(), TopologyError> {
        self.check_component(component)?;
        match self.circles.get(circle) {
            Some(c) if c.live && !c.capped && self.pieces[c.piece].component == component => Ok(()),
            _ => Err(TopologyError::StaleSite(format!("circle {circle} of component {component}"))),
        }
    }

    fn record(&mut self, op: TopologyOp, delta: Delta) {
        self.invariants = self.invariants.apply(delta);
        self.history.push(HistoryEntry { op, delta });
    }

    pub fn glue(&self, x: Site, y: Site) -> Result<Self, TopologyError> {
        if x == y {
            return Err(TopologyError::SamePoint);
        }
        self.check_circle(x.component, x.circle)?;
        self.check_circle(y.component, y.circle)?;
        let mut next = self.clone();
        let px = next.circles[x.circle].piece;
        let py = next.circles[y.circle].piece;
        next.pieces[px].euler_m -= 1;
        next.pieces[px].euler_s -= 1;
        let mut delta = Delta { euler_m: -1, euler_s: -1, ..Delta::default() };
        let (absorbed_sheet, relabeled) = (next.circles[y.circle].sheet, next.merge_sheets(x.circle, y.circle));
        if x.circle != y.circle {
            next.circles[y.circle].live = false;
            delta.boundary_circles = -1;
        } else {
            let sheet = next.circles[x.circle].sheet;
            next.circles.push(Circle { piece: px, sheet, live: true, capped: false });
            delta.boundary_circles = 1;
        }
        if x.component != y.component {
            for p in next.pieces.iter_mut().filter(|p| p.component == y.component) {
                p.component = x.component;
            }
            next.component_alive[y.component] = false;
            next.annuli.push(TrackedAnnulus {
                glue_step: next.history.len(),
                kept_piece: px,
                absorbed_piece: py,
                kept_circle: x.circle,
                absorbed_circle: y.circle,
                absorbed_sheet,
                relabeled,
                live: true,
            });
            delta.components = -1;
        } else if px != py {
            next.links.push((px, py));
        }
        next.record(TopologyOp::Glue { x, y }, delta);
        Ok(next)
    }

    /// Relabels `b`'s sheet to `a`'s; returns the circles relabeled.
    fn merge_sheets(&mut self, a: usize, b: usize) -> Vec<usize> {
        let (sa, sb) = (self.circles[a].sheet, self.circles[b].sheet);
        if sa == sb {
            return Vec::new();
        }
        let moved: Vec<usize> = (0..self.circles.len()).filter(|&c| self.circles[c].sheet == sb).collect();
        for &c in &moved {
            self.circles[c].sheet = sa;
        }
        moved
    }

    pub fn puncture(&self, component: usize, attach_circle: usize) -> Result<Self, TopologyError> {
        self.check_circle(component, attach_circle)?;
        let mut next = self.clone();
        let (piece, sheet) = (next.circles[attach_circle].piece, next.circles[attach_circle].sheet);
        next.pieces[piece].euler_m -= 1;
        next.pieces[piece].euler_s -= 1;
        next.circles.push(Circle { piece, sheet, live: true, capped: false });
        next.punctures.push(PunctureRecord { component, circle: next.circles.len() - 1, undone: false });
        next.record(
            TopologyOp::Puncture { component, circle: attach_circle },
            Delta { euler_m: -1, euler_s: -1, components: 0, boundary_circles: 1 },
        );
        Ok(next)
    }

    pub fn cap(&self, component: usize, circle: usize) -> Result<Self, TopologyError> {
        self.check_circle(component, circle)?;
        let mut next = self.clone();
        next.circles[circle].capped = true;
        let piece = next.circles[circle].piece;
        next.pieces[piece].euler_m += 1;
        next.pieces[piece].euler_s += 1;
        for p in next.punctures.iter_mut().filter(|p| p.circle == circle) {
            p.undone = true;
        }
        next.record(
            TopologyOp::Cap { component, circle },
            Delta { euler_m: 1, euler_s: 1, components: 0, boundary_circles: -1 },
        );
        Ok(next)
    }

    /// Caps every live uncapped circle, in id order.
    pub fn cap_off(&self) -> Self {
        let mut ts = self.clone();
        for circle in self.uncapped_circles() {
            let component = ts.pieces[ts.circles[circle].piece].component;
            ts = ts.cap(component, circle).expect("uncapped live circle");
        }
        ts
    }

    pub fn cut_bigon(&self, component: usize, spec: CutSpec, effect: CutEffect) -> Result<Self, TopologyError> {
        let mut next = self.clone();
        let delta = next.apply_cut(component, &effect)?;
        next.record(TopologyOp::CutBigon { component, spec, effect }, delta);
        Ok(next)
    }

    /// `context` is the presentation read off the structure before the cut;
    /// when given, the cut must leave its homology unchanged. The left side
    /// keeps the relator with the pair removed; the right side keeps only
    /// the pair, whose exponent row vanishes.
    pub fn cut_quad(
        &self,
        component: usize,
        spec: CutSpec,
        side: QuadSide,
        effect: CutEffect,
        context: Option<&Presentation>,
    ) -> Result<Self, TopologyError> {
        if let Some(p) = context {
            quad_homology_gate(p, spec, side)?;
        }
        let mut next = self.clone();
        let delta = next.apply_cut(component, &effect)?;
        next.record(TopologyOp::CutQuad { component, spec, side, effect }, delta);
        Ok(next)
    }

    fn apply_cut(&mut self, component: usize, effect: &CutEffect) -> Result<Delta, TopologyError> {
        self.check_component(component)?;
        let mut retire = effect.retire.clone();
        retire.sort_unstable();
        if retire.windows(2).any(|w| w[0] == w[1]) {
            return Err(TopologyError::InvalidDeclaration("circle retired twice".into()));
        }
        for &c in &retire {
            self.check_circle(component, c)?;
        }
        let primary = (0..self.pieces.len())
            .find(|&p| self.pieces[p].component == component)
            .expect("live component has a piece");
        self.pieces[primary].euler_m += 1;
        self.pieces[primary].euler_s += 1;
        let sheet = match effect.retire.first() {
            Some(&c) => self.circles[c].sheet,
            None => {
                self.next_sheet += 1;
                self.next_sheet - 1
            }
        };
        for &c in &retire {
            self.circles[c].live = false;
        }
        for _ in 0..effect.create {
            self.circles.push(Circle { piece: primary, sheet, live: true, capped: false });
        }
        let mut delta = Delta {
            euler_m: 1,
            euler_s: 1,
            components: 0,
            boundary_circles: effect.create as i64 - retire.len() as i64,
        };
        if let Some(split) = &effect.split {
            for &c in &split.circles {
                match self.circles.get(c) {
                    Some(circ) if circ.live && self.pieces[circ.piece].component == component => {}
                    _ => return Err(TopologyError::InvalidDeclaration(format!("split circle {c}"))),
                }
            }
            let id = self.component_alive.len();
            self.component_alive.push(true);
            self.pieces.push(Piece { component: id, origin: id, euler_m: split.euler_m, euler_s: split.euler_s });
            self.pieces[primary].euler_m -= split.euler_m;
            self.pieces[primary].euler_s -= split.euler_s;
            let piece = self.pieces.len() - 1;
            for &c in &split.circles {
                self.circles[c].piece = piece;
            }
            delta.components = 1;
        }
        Ok(delta)
    }

    /// Cuts along every live tracked annulus. Each cut undoes its gluing;
    /// if the glued circle has been capped meanwhile, the revived circle is
    /// capped as well. Components fall apart wherever no other gluing
    /// holds them together.
    pub fn cut_tracked_annuli(&self) -> Self {
        let mut ts = self.clone();
        for a in 0..ts.annuli.len() {
            if ts.annuli[a].live && ts.circles[ts.annuli[a].kept_circle].live {
                ts.cut_annulus(a);
            }
        }
        ts
    }

    fn cut_annulus(&mut self, a: usize) {
        let ann = self.annuli[a].clone();
        let component = self.pieces[ann.kept_piece].component;
        let capped = self.circles[ann.kept_circle].capped;
        self.pieces[ann.kept_piece].euler_m += 1;
        self.pieces[ann.kept_piece].euler_s += 1;
        let revived = &mut self.circles[ann.absorbed_circle];
        revived.live = true;
        revived.capped = capped;
        for &c in &ann.relabeled {
            self.circles[c].sheet = ann.absorbed_sheet;
        }
        let mut delta = Delta { euler_m: 1, euler_s: 1, components: 0, boundary_circles: 1 };
        if capped {
            self.pieces[ann.absorbed_piece].euler_m += 1;
            self.pieces[ann.absorbed_piece].euler_s += 1;
            delta = Delta { euler_m: 2, euler_s: 2, components: 0, boundary_circles: 0 };
        }
        self.annuli[a].live = false;
        delta.components = self.regroup(component) as i64 - 1;
        self.record(TopologyOp::CutAnnulus { annulus: a }, delta);
    }

    /// Recomputes the components among the pieces of `component` from the
    /// gluings still holding them together; returns the number of parts.
    fn regroup(&mut self, component: usize) -> usize {
        let members: Vec<usize> = (0..self.pieces.len()).filter(|&p| self.pieces[p].component == component).collect();
        let mut dsu = Dsu::new(self.pieces.len());
        let edges = self
            .annuli
            .iter()
            .filter(|a| a.live)
            .map(|a| (a.kept_piece, a.absorbed_piece))
            .chain(self.links.iter().copied());
        for (p, q) in edges {
            dsu.union(p, q);
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut roots: Vec<usize> = Vec::new();
        for &p in &members {
            let r = dsu.find(p);
            match roots.iter().position(|&x| x == r) {
                Some(i) => groups[i].push(p),
                None => {
                    roots.push(r);
                    groups.push(vec![p]);
                }
            }
        }
        if groups.len() > 1 {
            self.component_alive[component] = false;
            for g in &groups {
                let id = if g.iter().any(|&p| self.pieces[p].origin == component) {
                    component
                } else {
                    g.iter().map(|&p| self.pieces[p].origin).min().expect("non-empty group")
                };
                self.component_alive[id] = true;
                for &p in g {
                    self.pieces[p].component = id;
                }
            }
        }
        groups.len()
    }

    /// Applies a parsed op. Quadrilateral cuts run the homology gate only
    /// when `context` is given.
    pub fn apply(&self, op: &TopologyOp, context: Option<&Presentation>) -> Result<Self, TopologyError> {
        match op {
            TopologyOp::Glue { x, y } => self.glue(*x, *y),
            TopologyOp::Puncture { component, circle } => self.puncture(*component, *circle),
            TopologyOp::Cap { component, circle } => self.cap(*component, *circle),
            TopologyOp::CutBigon { component, spec, effect } => self.cut_bigon(*component, *spec, effect.clone()),
            TopologyOp::CutQuad { component, spec, side, effect } => {
                self.cut_quad(*component, *spec, *side, effect.clone(), context)
            }
            TopologyOp::CutAnnulus { annulus } => match self.annuli.get(*annulus) {
                Some(a) if a.live && self.circles[a.kept_circle].live => {
                    let mut next = self.clone();
                    next.cut_annulus(*annulus);
                    Ok(next)
                }
                _ => Err(TopologyError::StaleSite(format!("annulus {annulus}"))),
            },
        }
    }
}

/// Uncapped circles, plus live annuli, plus how far each component's sticky
/// surface is from a sphere.
pub fn complexity_measure(ts: &TrackedSpace) -> usize {
    let deficit: i64 = ts.component_summaries().iter().map(|c| (2 - c.euler_s).max(0)).sum();
    ts.uncapped_circles().len() + ts.live_annuli() + deficit as usize
}

fn snf_diagonal(p: &Presentation) -> Vec<BigInt> {
    smith_normal_form(&abelianization_matrix::<BigInt>(p)).expect("arbitrary precision").diagonal
}

/// The relator after a cut on `side` at the pair starting at `spec.position`.
pub fn quad_side_relator(word: &Word, spec: CutSpec, side: QuadSide) -> Option<Word> {
    let n = word.len();
    if n < 2 || spec.position >= n {
        return None;
    }
    let (a, b) = (word.0[spec.position], word.0[(spec.position + 1) % n]);
    if !a.cancels(b) {
        return None;
    }
    Some(match side {
        QuadSide::Left => Word(word.rotate_left((spec.position + 2) % n).0[..n - 2].to_vec()),
        QuadSide::Right => Word(vec![a, b]),
    })
}

fn quad_homology_gate(p: &Presentation, spec: CutSpec, side: QuadSide) -> Result<(), TopologyError> {
    let word = p
        .relators
        .get(spec.relator)
        .ok_or_else(|| TopologyError::StaleSite(format!("relator {}", spec.relator + 1)))?;
    let replaced = quad_side_relator(word, spec, side).ok_or_else(|| {
        TopologyError::StaleSite(format!("no cancelling pair at {}.{}", spec.relator + 1, spec.position + 1))
    })?;
    let mut after = p.clone();
    after.relators[spec.relator] = replaced;
    if snf_diagonal(&after) == snf_diagonal(p) {
        Ok(())
    } else {
        Err(TopologyError::HomologyCheckFailed(side))
    }
}
