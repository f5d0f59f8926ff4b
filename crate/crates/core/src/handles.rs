//! Handle structures of presentations: one beam per generator, one plate per
//! relator, one strip per relator letter.
//!
//! Each beam has two islands, `Bottom` and `Top`. A strip with positive sign
//! enters its beam at the bottom island and leaves at the top; a negative
//! strip runs the other way. Bridge `k` of a plate runs from the exit of
//! strip `k` to the entry of strip `k + 1`, cyclically, so the last bridge
//! closes the plate back at its first letter.
//!
//! The sticky end is the ribbon graph with the islands as discs and the
//! bridges as bands. Each strip has one band end on each island of its beam.
//! Around the bottom island band ends follow the beam's strip order; around
//! the top island they follow it reversed, as seen from the other end.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homology::{abelianization_matrix, smith_normal_form};
use crate::ribbon::{Boundary, Dsu, RibbonGraph};
use crate::words::{Letter, Presentation, Sign, Word};
use crate::IntegerMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StripRef {
    pub plate: usize,
    pub position: usize,
}

impl fmt::Display for StripRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.plate + 1, self.position + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strip {
    pub beam: usize,
    pub sign: Sign,
    /// Index in the beam's strip order.
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plate {
    pub relator_index: usize,
    pub strips: Vec<Strip>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Top,
}

impl Strip {
    pub fn entry_side(&self) -> Side {
        match self.sign {
            Sign::Pos => Side::Bottom,
            Sign::Neg => Side::Top,
        }
    }

    pub fn exit_side(&self) -> Side {
        match self.sign {
            Sign::Pos => Side::Top,
            Sign::Neg => Side::Bottom,
        }
    }
}

/// Per beam, a cyclic order of its strips, stored starting from the least
/// strip reference so that rotations compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttachmentChoice {
    pub orders: Vec<Vec<StripRef>>,
}

impl AttachmentChoice {
    pub fn new(orders: Vec<Vec<StripRef>>) -> Self {
        AttachmentChoice { orders: orders.into_iter().map(canonical_rotation).collect() }
    }
}

fn canonical_rotation(mut order: Vec<StripRef>) -> Vec<StripRef> {
    if let Some((k, _)) = order.iter().enumerate().min_by_key(|(_, r)| **r) {
        order.rotate_left(k);
    }
    order
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HandleError {
    #[error("relator {0} is empty")]
    EmptyRelator(usize),
    #[error("attachment choice does not match the presentation: {0}")]
    ChoiceMismatch(String),
    #[error("handle structure text, line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HandleStructure {
    pub beams: usize,
    pub plates: Vec<Plate>,
    pub beam_orders: Vec<Vec<StripRef>>,
}

/// Strip references per beam in default order: by relator, then position.
fn strips_by_beam(p: &Presentation) -> Vec<Vec<StripRef>> {
    let mut out = vec![Vec::new(); p.generators];
    for (plate, r) in p.relators.iter().enumerate() {
        for (position, l) in r.letters().iter().enumerate() {
            out[l.gen()].push(StripRef { plate, position });
        }
    }
    out
}

pub fn build_handle_structure(
    p: &Presentation,
    choice: Option<&AttachmentChoice>,
) -> Result<HandleStructure, HandleError> {
    if let Some(i) = p.relators.iter().position(Word::is_empty) {
        return Err(HandleError::EmptyRelator(i));
    }
    let orders = match choice {
        None => strips_by_beam(p),
        Some(c) => c.orders.clone(),
    };
    HandleStructure::from_orders(p.generators, &p.relators, orders)
}

impl HandleStructure {
    /// Assembles a structure from relator words and per-beam strip orders,
    /// checking that every strip appears exactly once on its own beam.
    pub fn from_orders(beams: usize, words: &[Word], orders: Vec<Vec<StripRef>>) -> Result<Self, HandleError> {
        if orders.len() != beams {
            return Err(HandleError::ChoiceMismatch(format!("{} orders for {} beams", orders.len(), beams)));
        }
        let mut plates: Vec<Plate> = words
            .iter()
            .enumerate()
            .map(|(i, w)| Plate {
                relator_index: i,
                strips: w.letters().iter().map(|l| Strip { beam: l.gen(), sign: l.sign, slot: usize::MAX }).collect(),
            })
            .collect();
        if let Some(i) = plates.iter().position(|pl| pl.strips.is_empty()) {
            return Err(HandleError::EmptyRelator(i));
        }
        for (beam, order) in orders.iter().enumerate() {
            for (slot, r) in order.iter().enumerate() {
                let strip = plates
                    .get_mut(r.plate)
                    .and_then(|pl| pl.strips.get_mut(r.position))
                    .ok_or_else(|| HandleError::ChoiceMismatch(format!("no strip {r}")))?;
                if strip.beam != beam {
                    return Err(HandleError::ChoiceMismatch(format!("strip {r} is not on beam {}", beam + 1)));
                }
                if strip.slot != usize::MAX {
                    return Err(HandleError::ChoiceMismatch(format!("strip {r} listed twice")));
                }
                strip.slot = slot;
            }
        }
        for (i, pl) in plates.iter().enumerate() {
            if let Some(k) = pl.strips.iter().position(|s| s.slot == usize::MAX) {
                return Err(HandleError::ChoiceMismatch(format!(
                    "strip {} missing",
                    StripRef { plate: i, position: k }
                )));
            }
        }
        Ok(HandleStructure { beams, plates, beam_orders: orders })
    }

    pub fn strip(&self, r: StripRef) -> &Strip {
        &self.plates[r.plate].strips[r.position]
    }

    pub fn strip_count(&self) -> usize {
        self.plates.iter().map(|p| p.strips.len()).sum()
    }

    pub fn strip_refs(&self) -> impl Iterator<Item = StripRef> + '_ {
        self.plates
            .iter()
            .enumerate()
            .flat_map(|(plate, p)| (0..p.strips.len()).map(move |position| StripRef { plate, position }))
    }

    pub fn plate_word(&self, plate: usize) -> Word {
        Word(self.plates[plate].strips.iter().map(|s| Letter::new(s.beam, s.sign)).collect())
    }

    pub fn words(&self) -> Vec<Word> {
        (0..self.plates.len()).map(|i| self.plate_word(i)).collect()
    }

    pub fn choice(&self) -> AttachmentChoice {
        AttachmentChoice::new(self.beam_orders.clone())
    }

    /// Dart index of a strip end in the sticky ribbon graph.
    pub fn dart(&self, r: StripRef, side: Side) -> usize {
        let base: usize = self.plates[..r.plate].iter().map(|p| p.strips.len()).sum();
        2 * (base + r.position) + usize::from(side == Side::Top)
    }

    pub fn island(beam: usize, side: Side) -> usize {
        2 * beam + usize::from(side == Side::Top)
    }

    /// Dart at the exit of a strip: where the outgoing bridge starts.
    pub fn exit_dart(&self, r: StripRef) -> usize {
        self.dart(r, self.strip(r).exit_side())
    }

    pub fn entry_dart(&self, r: StripRef) -> usize {
        self.dart(r, self.strip(r).entry_side())
    }

    /// Components of the total space: labels for beams then plates.
    pub fn total_space_components(&self) -> (usize, Vec<usize>) {
        let mut dsu = Dsu::new(self.beams + self.plates.len());
        for (i, p) in self.plates.iter().enumerate() {
            for s in &p.strips {
                dsu.union(s.beam, self.beams + i);
            }
        }
        dsu.labels()
    }
}

/// The sticky end with the bookkeeping tying darts back to strips.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StickyRibbonGraph {
    pub graph: RibbonGraph,
    /// Per island: (beam, side).
    pub islands: Vec<(usize, Side)>,
    /// Per dart: the strip end it sits at.
    pub darts: Vec<(StripRef, Side)>,
}

pub fn sticky_end(h: &HandleStructure) -> StickyRibbonGraph {
    let mut graph = RibbonGraph::new(2 * h.beams);
    let islands = (0..h.beams).flat_map(|b| [(b, Side::Bottom), (b, Side::Top)]).collect();
    let darts: Vec<(StripRef, Side)> = h.strip_refs().flat_map(|r| [(r, Side::Bottom), (r, Side::Top)]).collect();
    // Create darts in index order so that `h.dart` matches, then arrange.
    let mut placed = Vec::with_capacity(darts.len());
    for &(r, side) in &darts {
        placed.push(graph.push_dart(HandleStructure::island(h.strip(r).beam, side)));
    }
    for (beam, order) in h.beam_orders.iter().enumerate() {
        graph.rotations[HandleStructure::island(beam, Side::Bottom)] =
            order.iter().map(|&r| h.dart(r, Side::Bottom)).collect();
        graph.rotations[HandleStructure::island(beam, Side::Top)] =
            order.iter().rev().map(|&r| h.dart(r, Side::Top)).collect();
    }
    for (plate, p) in h.plates.iter().enumerate() {
        let k = p.strips.len();
        for position in 0..k {
            let from = StripRef { plate, position };
            let to = StripRef { plate, position: (position + 1) % k };
            graph.bind(h.exit_dart(from), h.entry_dart(to), false);
        }
    }
    debug_assert!(placed.iter().enumerate().all(|(i, &d)| i == d));
    StickyRibbonGraph { graph, islands, darts }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSurface {
    pub islands: usize,
    pub euler: i64,
    pub boundary_circles: usize,
    pub orientable: bool,
    /// Orientable genus, or the number of cross-caps if non-orientable.
    pub genus: usize,
}

impl ComponentSurface {
    pub fn name(&self) -> String {
        match (self.orientable, self.genus, self.boundary_circles) {
            (true, 0, 0) => "sphere".into(),
            (true, 0, 1) => "disc".into(),
            (true, 0, 2) => "annulus".into(),
            (true, 0, b) => format!("sphere with {b} holes"),
            (true, g, b) => format!("genus {g} surface with {b} boundary circles"),
            (false, 1, 1) => "Moebius band".into(),
            (false, k, b) => format!("non-orientable surface with {k} cross-caps and {b} boundary circles"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceInvariants {
    pub components: usize,
    pub euler: i64,
    pub boundary_circles: usize,
    pub orientable: bool,
    pub genus_per_component: Vec<usize>,
    pub per_component: Vec<ComponentSurface>,
}

impl SurfaceInvariants {
    /// "disc", "annulus", "3 discs", or a list of component names.
    pub fn description(&self) -> String {
        let names: Vec<String> = self.per_component.iter().map(ComponentSurface::name).collect();
        match names.as_slice() {
            [] => "empty".into(),
            [one] => one.clone(),
            [first, rest @ ..] if rest.iter().all(|n| n == first) => format!("{} {}s", names.len(), first),
            _ => names.join(" + "),
        }
    }
}

pub fn ribbon_surface_invariants(graph: &RibbonGraph) -> SurfaceInvariants {
    let (count, labels) = graph.island_components();
    let boundary: Boundary = graph.boundary();
    let orientability = graph.component_orientability();
    let mut islands = vec![0usize; count];
    let mut half_bands = vec![0usize; count];
    let mut circles = vec![0usize; count];
    for (i, l) in labels.iter().enumerate() {
        islands[*l] += 1;
        half_bands[*l] += graph.rotations[i].iter().filter(|&&d| graph.partner(d).is_some()).count();
    }
    for c in &boundary.circles {
        let island = match c {
            crate::ribbon::BoundaryCircle::Darts(ds) => graph.island_of(ds[0]),
            crate::ribbon::BoundaryCircle::BareIsland(i) => *i,
        };
        circles[labels[island]] += 1;
    }
    let per_component: Vec<ComponentSurface> = (0..count)
        .map(|c| {
            let euler = islands[c] as i64 - (half_bands[c] / 2) as i64;
            let b = circles[c] as i64;
            let orientable = orientability[c];
            let deficit = (2 - euler - b).max(0) as usize;
            let genus = if orientable { deficit / 2 } else { deficit };
            ComponentSurface { islands: islands[c], euler, boundary_circles: circles[c], orientable, genus }
        })
        .collect();
    SurfaceInvariants {
        components: count,
        euler: graph.euler_characteristic(),
        boundary_circles: boundary.circles.len(),
        orientable: orientability.iter().all(|&o| o),
        genus_per_component: per_component.iter().map(|c| c.genus).collect(),
        per_component,
    }
}

pub fn surface_invariants(s: &StickyRibbonGraph) -> SurfaceInvariants {
    ribbon_surface_invariants(&s.graph)
}

/// Beams plus plates minus strips.
pub fn total_space_euler(h: &HandleStructure) -> i64 {
    h.beams as i64 + h.plates.len() as i64 - h.strip_count() as i64
}

pub fn reconstruct_presentation(h: &HandleStructure) -> Presentation {
    Presentation { generators: h.beams, relators: h.words(), names: None }
}

/// Smith normal form diagonal of the exponent-sum matrix of the
/// reconstructed presentation.
pub fn quotient_homology(h: &HandleStructure) -> Vec<BigInt> {
    let m: IntegerMatrix = abelianization_matrix(&reconstruct_presentation(h));
    smith_normal_form(&m).expect("arbitrary precision").diagonal
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceEnumeration {
    pub choices: Vec<AttachmentChoice>,
    /// Number of distinct choices, as a decimal string (it can be huge).
    pub total: String,
    pub truncated: bool,
}

/// Cyclic strip orders per beam: the least strip stays first and the rest
/// are permuted, giving `(k-1)!` orders for a beam with `k` strips.
pub fn enumerate_choices(p: &Presentation, limit: usize) -> ChoiceEnumeration {
    let by_beam = strips_by_beam(p);
    let total: BigInt = by_beam.iter().map(|s| factorial(s.len().saturating_sub(1))).product();
    let per_beam = by_beam.iter().map(|strips| {
        let (first, rest) = match strips.split_first() {
            Some((f, r)) => (Some(*f), r.to_vec()),
            None => (None, Vec::new()),
        };
        let k = rest.len();
        rest.into_iter().permutations(k).map(move |perm| first.into_iter().chain(perm).collect::<Vec<_>>())
    });
    let choices: Vec<AttachmentChoice> =
        per_beam.multi_cartesian_product().take(limit).map(|orders| AttachmentChoice { orders }).collect();
    // `multi_cartesian_product` of zero iterators is empty; a presentation
    // always has at least the default choice.
    let choices = if choices.is_empty() && limit > 0 && p.generators == 0 {
        vec![AttachmentChoice { orders: Vec::new() }]
    } else {
        choices
    };
    let truncated = BigInt::from(choices.len()) < total;
    ChoiceEnumeration { choices, total: total.to_string(), truncated }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// A uniformly random cyclic order on every beam.
pub fn random_choice<R: Rng>(p: &Presentation, rng: &mut R) -> AttachmentChoice {
    let orders = strips_by_beam(p)
        .into_iter()
        .map(|mut strips| {
            strips.shuffle(rng);
            strips
        })
        .collect();
    AttachmentChoice::new(orders)
}

impl HandleStructure {
    /// Line format:
    ///
    /// ```text
    /// BEAMS 2
    /// PLATES 2
    /// PLATE 1 1/+/1
    /// PLATE 2 1/-/2 2/+/1 1/+/3
    /// ORDERS
    /// ORDER 1 1.1 2.1 2.3
    /// ORDER 2 2.2
    /// ```
    ///
    /// Strips are `beam/sign/slot`; order entries are `plate.position`. All
    /// indices are one-based.
    pub fn to_text(&self) -> String {
        let mut out = format!("BEAMS {}\nPLATES {}\n", self.beams, self.plates.len());
        for (i, p) in self.plates.iter().enumerate() {
            out.push_str(&format!("PLATE {}", i + 1));
            for s in &p.strips {
                out.push_str(&format!(" {}/{}/{}", s.beam + 1, s.sign.symbol(), s.slot + 1));
            }
            out.push('\n');
        }
        out.push_str("ORDERS\n");
        for (b, order) in self.beam_orders.iter().enumerate() {
            out.push_str(&format!("ORDER {}", b + 1));
            for r in order {
                out.push_str(&format!(" {r}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, HandleError> {
        let err = |line: usize, message: &str| HandleError::Syntax { line, message: message.to_string() };
        let one_based = |line: usize, s: &str| -> Result<usize, HandleError> {
            s.parse::<usize>().ok().and_then(|v| v.checked_sub(1)).ok_or_else(|| err(line, &format!("bad index {s:?}")))
        };
        let lines: Vec<(usize, &str)> =
            text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()).collect();
        let mut it = lines.into_iter();
        let mut header = |key: &str| -> Result<usize, HandleError> {
            let (n, l) = it.next().ok_or_else(|| err(0, &format!("missing {key}")))?;
            let rest = l.strip_prefix(key).ok_or_else(|| err(n, &format!("expected {key}")))?;
            rest.trim().parse().map_err(|_| err(n, "bad count"))
        };
        let beams = header("BEAMS")?;
        let plate_count = header("PLATES")?;
        let mut words = Vec::new();
        let mut slots: BTreeMap<StripRef, usize> = BTreeMap::new();
        for plate in 0..plate_count {
            let (n, l) = it.next().ok_or_else(|| err(0, "missing PLATE line"))?;
            let mut fields = l.split_whitespace();
            if fields.next() != Some("PLATE") || fields.next().map(|f| one_based(n, f)).transpose()? != Some(plate) {
                return Err(err(n, "expected PLATE with the next index"));
            }
            let mut letters = Vec::new();
            for (position, f) in fields.enumerate() {
                let parts: Vec<&str> = f.split('/').collect();
                if parts.len() != 3 {
                    return Err(err(n, "strip must be beam/sign/slot"));
                }
                let beam = one_based(n, parts[0])?;
                let sign = match parts[1] {
                    "+" => Sign::Pos,
                    "-" => Sign::Neg,
                    _ => return Err(err(n, "sign must be + or -")),
                };
                if beam >= beams {
                    return Err(err(n, "beam out of range"));
                }
                letters.push(Letter::new(beam, sign));
                slots.insert(StripRef { plate, position }, one_based(n, parts[2])?);
            }
            words.push(Word(letters));
        }
        match it.next() {
            Some((_, "ORDERS")) => {}
            Some((n, _)) => return Err(err(n, "expected ORDERS")),
            None => return Err(err(0, "missing ORDERS")),
        }
        let mut orders = Vec::new();
        for beam in 0..beams {
            let (n, l) = it.next().ok_or_else(|| err(0, "missing ORDER line"))?;
            let mut fields = l.split_whitespace();
            if fields.next() != Some("ORDER") || fields.next().map(|f| one_based(n, f)).transpose()? != Some(beam) {
                return Err(err(n, "expected ORDER with the next index"));
            }
            let mut order = Vec::new();
            for f in fields {
                let (a, b) = f.split_once('.').ok_or_else(|| err(n, "order entry must be plate.position"))?;
                order.push(StripRef { plate: one_based(n, a)?, position: one_based(n, b)? });
            }
            orders.push(order);
        }
        if let Some((n, _)) = it.next() {
            return Err(err(n, "trailing input"));
        }
        let h = HandleStructure::from_orders(beams, &words, orders)?;
        for (r, slot) in slots {
            if h.strip(r).slot != slot {
                return Err(err(0, &format!("slot of strip {r} disagrees with ORDERS")));
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::parse_presentation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn build(text: &str) -> HandleStructure {
        build_handle_structure(&parse_presentation(text).unwrap(), None).unwrap()
    }

    fn surface(text: &str) -> SurfaceInvariants {
        surface_invariants(&sticky_end(&build(text)))
    }

    #[test]
    fn free_group_is_bare_islands() {
        let h = build("<x,y,z | >");
        assert_eq!((h.beams, h.plates.len()), (3, 0));
        let s = surface("<x,y,z | >");
        assert_eq!((s.components, s.euler, s.boundary_circles), (6, 6, 6));
        assert_eq!(s.description(), "6 discs");
        assert_eq!(total_space_euler(&h), 3);
    }

    #[test]
    fn single_generator_single_relator() {
        let h = build("<a | a>");
        assert_eq!(h.strip_count(), 1);
        let sticky = sticky_end(&h);
        assert_eq!((sticky.graph.island_count(), sticky.graph.band_count()), (2, 1));
        let s = surface_invariants(&sticky);
        assert_eq!((s.components, s.euler, s.boundary_circles, s.orientable), (1, 1, 1, true));
        assert_eq!(s.description(), "disc");
        assert_eq!(total_space_euler(&h), 1);
    }

    #[test]
    fn conjugated_standard_is_an_annulus() {
        let h = build("<a,b | a, A b a>");
        assert_eq!(h.plates.iter().map(|p| p.strips.len()).collect::<Vec<_>>(), vec![1, 3]);
        let s = surface("<a,b | a, A b a>");
        assert_eq!((s.components, s.euler, s.boundary_circles, s.orientable), (1, 0, 2, true));
        assert_eq!(s.description(), "annulus");
        assert_eq!(total_space_euler(&h), 0);
    }

    #[test]
    fn product_with_standard_is_a_disc() {
        let h = build("<a,b | a, a b>");
        let sticky = sticky_end(&h);
        assert_eq!((sticky.graph.island_count(), sticky.graph.band_count()), (4, 3));
        let s = surface_invariants(&sticky);
        assert_eq!((s.components, s.euler, s.boundary_circles), (1, 1, 1));
        assert_eq!(total_space_euler(&h), 1);
    }

    #[test]
    fn empty_relator_is_rejected() {
        let p = parse_presentation("<x | 1>").unwrap();
        assert_eq!(build_handle_structure(&p, None), Err(HandleError::EmptyRelator(0)));
    }

    #[test]
    fn choice_counts() {
        assert_eq!(enumerate_choices(&parse_presentation("<a | a>").unwrap(), 100).choices.len(), 1);
        assert_eq!(enumerate_choices(&parse_presentation("<x | x x>").unwrap(), 100).choices.len(), 1);
        let three = enumerate_choices(&parse_presentation("<x | x x x>").unwrap(), 100);
        assert_eq!(three.choices.len(), 2);
        assert_eq!(three.total, "2");
        assert!(!three.truncated);
        let big = enumerate_choices(&parse_presentation("<x,y | x^5 y^4>").unwrap(), 10);
        assert_eq!(big.total, "144");
        assert!(big.truncated);
        assert_eq!(big.choices.len(), 10);
    }

    #[test]
    fn round_trip_for_every_choice() {
        let p = parse_presentation("<x,y | x y X Y x, y^3 x>").unwrap();
        let all = enumerate_choices(&p, 1000);
        assert!(!all.truncated);
        for c in &all.choices {
            let h = build_handle_structure(&p, Some(c)).unwrap();
            assert_eq!(reconstruct_presentation(&h), p);
            assert_eq!(h.choice(), *c);
        }
    }

    #[test]
    fn random_choices_are_valid() {
        let p = parse_presentation("<x,y | x y X Y x, y^3 x>").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let c = random_choice(&p, &mut rng);
            let h = build_handle_structure(&p, Some(&c)).unwrap();
            assert_eq!(reconstruct_presentation(&h), p);
        }
    }

    #[test]
    fn bad_choice_is_rejected() {
        let p = parse_presentation("<x,y | x y>").unwrap();
        let swapped = AttachmentChoice {
            orders: vec![vec![StripRef { plate: 0, position: 1 }], vec![StripRef { plate: 0, position: 0 }]],
        };
        assert!(matches!(build_handle_structure(&p, Some(&swapped)), Err(HandleError::ChoiceMismatch(_))));
    }

    #[test]
    fn homology_of_quotient() {
        assert_eq!(quotient_homology(&build("<a | a>")), vec![BigInt::from(1)]);
        assert_eq!(quotient_homology(&build("<x | x^2>")), vec![BigInt::from(2)]);
        assert_eq!(quotient_homology(&build("<x,y | x^2 Y^3, x y x Y X Y>")), vec![BigInt::from(1), BigInt::from(1)]);
    }

    #[test]
    fn text_round_trip() {
        let h = build("<x,y | x y X Y x, y^3 x>");
        let text = h.to_text();
        let back = HandleStructure::parse(&text).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.to_text(), text);
        assert!(HandleStructure::parse("BEAMS 1\nPLATES 0\nORDERS\n").is_err());
        let bad = text.replace("ORDER 2", "ORDER 3");
        assert!(HandleStructure::parse(&bad).is_err());
    }

    #[test]
    fn euler_identities() {
        for text in ["<x,y | x y X Y x, y^3 x>", "<x,y,z | x y z, Z Y, x^4>", "<a | a^3>"] {
            let p = parse_presentation(text).unwrap();
            let h = build_handle_structure(&p, None).unwrap();
            let s = surface(text);
            assert_eq!(s.euler, 2 * p.generators as i64 - p.total_length() as i64);
            assert_eq!(total_space_euler(&h), (p.generators + p.relators.len()) as i64 - p.total_length() as i64);
            for c in &s.per_component {
                assert_eq!(c.euler, 2 - 2 * c.genus as i64 - c.boundary_circles as i64);
            }
        }
    }
}
