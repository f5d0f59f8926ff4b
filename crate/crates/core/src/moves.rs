//! Andrews-Curtis moves, certificates and canonical forms.
//!
//! Relator and generator indices are zero-based in the API and one-based in
//! the certificate text format.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::words::{cyclic_reduce, free_reduce_traced, parse_presentation, Letter, Presentation, Sign, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AcMove {
    /// `r_i <- r_i^-1`
    Invert { relator: usize },
    /// `r_i <- g^-s r_i g^s`
    Conjugate { relator: usize, generator: usize, sign: Sign },
    /// `r_i <- r_i r_j`
    MultiplyRight { target: usize, source: usize },
}

impl AcMove {
    /// Index of the relator the move rewrites.
    pub fn changed_relator(&self) -> usize {
        match *self {
            AcMove::Invert { relator } | AcMove::Conjugate { relator, .. } => relator,
            AcMove::MultiplyRight { target, .. } => target,
        }
    }

    pub fn check(&self, p: &Presentation) -> Result<(), MoveError> {
        let count = p.relators.len();
        let in_range = |index: usize| {
            if index < count {
                Ok(())
            } else {
                Err(MoveError::RelatorOutOfRange { index, count })
            }
        };
        match *self {
            AcMove::Invert { relator } => in_range(relator),
            AcMove::Conjugate { relator, generator, .. } => {
                in_range(relator)?;
                if generator >= p.generators {
                    return Err(MoveError::GeneratorOutOfRange { index: generator, count: p.generators });
                }
                Ok(())
            }
            AcMove::MultiplyRight { target, source } => {
                in_range(target)?;
                in_range(source)?;
                if target == source {
                    return Err(MoveError::SameRelator(target));
                }
                Ok(())
            }
        }
    }

    /// The relator after the move, without any cancellation.
    pub fn rewritten(&self, p: &Presentation) -> Result<Word, MoveError> {
        self.check(p)?;
        Ok(match *self {
            AcMove::Invert { relator } => p.relators[relator].inverse(),
            AcMove::Conjugate { relator, generator, sign } => {
                let g = Letter::new(generator, sign);
                let mut letters = Vec::with_capacity(p.relators[relator].len() + 2);
                letters.push(g.inverse());
                letters.extend_from_slice(p.relators[relator].letters());
                letters.push(g);
                Word(letters)
            }
            AcMove::MultiplyRight { target, source } => p.relators[target].concat(&p.relators[source]),
        })
    }

    /// Image of the move under a relator permutation and a signed generator
    /// relabeling: `relator_map[i]` is the new index of relator `i`.
    pub fn transported(&self, relator_map: &[usize], relabel: &SignedPermutation) -> AcMove {
        match *self {
            AcMove::Invert { relator } => AcMove::Invert { relator: relator_map[relator] },
            AcMove::Conjugate { relator, generator, sign } => {
                let image = relabel.apply_letter(Letter::new(generator, sign));
                AcMove::Conjugate { relator: relator_map[relator], generator: image.gen(), sign: image.sign }
            }
            AcMove::MultiplyRight { target, source } => {
                AcMove::MultiplyRight { target: relator_map[target], source: relator_map[source] }
            }
        }
    }
}

impl fmt::Display for AcMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AcMove::Invert { relator } => write!(f, "INV {}", relator + 1),
            AcMove::Conjugate { relator, generator, sign } => {
                write!(f, "CONJ {} {} {}", relator + 1, generator + 1, sign.as_i64())
            }
            AcMove::MultiplyRight { target, source } => write!(f, "MULR {} {}", target + 1, source + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoveError {
    #[error("relator index {index} out of range ({count} relators)")]
    RelatorOutOfRange { index: usize, count: usize },
    #[error("generator index {index} out of range ({count} generators)")]
    GeneratorOutOfRange { index: usize, count: usize },
    #[error("cannot multiply relator {0} by itself")]
    SameRelator(usize),
    #[error("no cancellable pair at position {position} of relator {relator}")]
    NoCancellablePair { relator: usize, position: usize },
}

/// Applies one move. In reduce mode the changed relator is freely reduced
/// and the single-cancellation positions are returned (see
/// [`free_reduce_traced`]); otherwise the result is plain concatenation.
pub fn apply_move(p: &Presentation, m: &AcMove, reduce: bool) -> Result<(Presentation, Vec<usize>), MoveError> {
    let word = m.rewritten(p)?;
    let (word, cancellations) = if reduce { free_reduce_traced(&word) } else { (word, Vec::new()) };
    let mut out = p.clone();
    out.relators[m.changed_relator()] = word;
    Ok((out, cancellations))
}

/// Primitive sequence undoing `m`. Exact on freely reduced presentations
/// when applied in reduce mode.
pub fn invert_move(m: &AcMove) -> Vec<AcMove> {
    match *m {
        AcMove::Invert { .. } => vec![*m],
        AcMove::Conjugate { relator, generator, sign } => {
            vec![AcMove::Conjugate { relator, generator, sign: sign.flip() }]
        }
        AcMove::MultiplyRight { target, source } => vec![
            AcMove::Invert { relator: source },
            AcMove::MultiplyRight { target, source },
            AcMove::Invert { relator: source },
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DerivedMove {
    /// `r_i <- r_j r_i`
    MultiplyLeft { target: usize, source: usize },
    /// `r_i <- w^-1 r_i w`
    ConjugateByWord { relator: usize, word: Word },
}

impl DerivedMove {
    pub fn expand(&self) -> Vec<AcMove> {
        match self {
            &DerivedMove::MultiplyLeft { target, source } => vec![
                AcMove::Invert { relator: target },
                AcMove::Invert { relator: source },
                AcMove::MultiplyRight { target, source },
                AcMove::Invert { relator: source },
                AcMove::Invert { relator: target },
            ],
            DerivedMove::ConjugateByWord { relator, word } => word
                .letters()
                .iter()
                .map(|l| AcMove::Conjugate { relator: *relator, generator: l.gen(), sign: l.sign })
                .collect(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DerivedMove::MultiplyLeft { target, source } => format!("MultiplyLeft({},{})", target + 1, source + 1),
            DerivedMove::ConjugateByWord { relator, word } => format!("ConjugateByWord({},{})", relator + 1, word),
        }
    }
}

/// Left multiplications for every ordered relator pair and conjugations by
/// every reduced two-letter word, with their primitive expansions.
pub fn derived_moves(p: &Presentation) -> Vec<(String, Vec<AcMove>)> {
    let m = p.relators.len();
    let letters: Vec<Letter> = (0..p.generators).flat_map(|g| [Letter::pos(g), Letter::neg(g)]).collect();
    let mut out = Vec::new();
    for (target, source) in (0..m).cartesian_product(0..m).filter(|(a, b)| a != b) {
        let d = DerivedMove::MultiplyLeft { target, source };
        out.push((d.name(), d.expand()));
    }
    for relator in 0..m {
        for (&a, &b) in letters.iter().cartesian_product(&letters) {
            if a.cancels(b) {
                continue;
            }
            let d = DerivedMove::ConjugateByWord { relator, word: Word(vec![a, b]) };
            out.push((d.name(), d.expand()));
        }
    }
    out
}

/// One certificate line after the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    Move(AcMove),
    /// Cancels the inverse pair at `position`, `position + 1` of a relator.
    Reduce {
        relator: usize,
        position: usize,
    },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Move(m) => m.fmt(f),
            Step::Reduce { relator, position } => write!(f, "REDUCE {} {}", relator + 1, position + 1),
        }
    }
}

pub fn apply_step(p: &Presentation, step: &Step) -> Result<Presentation, MoveError> {
    match step {
        Step::Move(m) => Ok(apply_move(p, m, false)?.0),
        &Step::Reduce { relator, position } => {
            let count = p.relators.len();
            let word = p.relators.get(relator).ok_or(MoveError::RelatorOutOfRange { index: relator, count })?;
            let reduced = word.cancel_at(position).ok_or(MoveError::NoCancellablePair { relator, position })?;
            let mut out = p.clone();
            out.relators[relator] = reduced;
            Ok(out)
        }
    }
}

/// Moves are replayed by concatenation; every free cancellation is an
/// explicit [`Step::Reduce`], so the schedule after a move is the run of
/// reduce steps that follows it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub start: Presentation,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay failed at step {step}: {cause}")]
pub struct ReplayError {
    /// Zero-based index into the step list.
    pub step: usize,
    pub cause: MoveError,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("certificate ends at {found} but the next one starts at {expected}")]
    Mismatch { found: String, expected: String },
    #[error("reversal does not return to the start of move {0}")]
    NotReversible(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Presentation { line: usize, source: crate::words::ParseError },
}

impl Certificate {
    pub fn empty(start: Presentation) -> Self {
        Certificate { start, steps: Vec::new() }
    }

    /// Moves applied in reduce mode, with the cancellations they trigger
    /// written out.
    pub fn from_moves(start: Presentation, moves: &[AcMove]) -> Result<Self, ReplayError> {
        let mut cert = Certificate::empty(start.clone());
        let mut current = start;
        for (k, m) in moves.iter().enumerate() {
            let (next, cancels) = apply_move(&current, m, true).map_err(|cause| ReplayError { step: k, cause })?;
            cert.push_move(*m, &cancels);
            current = next;
        }
        Ok(cert)
    }

    pub fn push_move(&mut self, m: AcMove, cancellations: &[usize]) {
        let relator = m.changed_relator();
        self.steps.push(Step::Move(m));
        self.steps.extend(cancellations.iter().map(|&position| Step::Reduce { relator, position }));
    }

    pub fn moves(&self) -> impl Iterator<Item = &AcMove> {
        self.steps.iter().filter_map(|s| match s {
            Step::Move(m) => Some(m),
            Step::Reduce { .. } => None,
        })
    }

    pub fn move_count(&self) -> usize {
        self.moves().count()
    }

    /// For each move, the cancellation positions applied right after it.
    pub fn cancellation_schedule(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for s in &self.steps {
            match s {
                Step::Move(_) => out.push(Vec::new()),
                Step::Reduce { position, .. } => {
                    if let Some(last) = out.last_mut() {
                        last.push(*position);
                    }
                }
            }
        }
        out
    }

    /// Every intermediate presentation, starting with `start`.
    pub fn replay_all(&self) -> Result<Vec<Presentation>, ReplayError> {
        let mut states = Vec::with_capacity(self.steps.len() + 1);
        states.push(self.start.clone());
        for (k, s) in self.steps.iter().enumerate() {
            let next = apply_step(states.last().unwrap(), s).map_err(|cause| ReplayError { step: k, cause })?;
            states.push(next);
        }
        Ok(states)
    }

    pub fn replay(&self) -> Result<Presentation, ReplayError> {
        let mut current = self.start.clone();
        for (k, s) in self.steps.iter().enumerate() {
            current = apply_step(&current, s).map_err(|cause| ReplayError { step: k, cause })?;
        }
        Ok(current)
    }

    /// `self` followed by `other`; the end of `self` must equal the start of
    /// `other` exactly.
    pub fn concat(&self, other: &Certificate) -> Result<Certificate, CertificateError> {
        let end = self.replay()?;
        if end != other.start {
            return Err(CertificateError::Mismatch { found: end.to_string(), expected: other.start.to_string() });
        }
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        Ok(Certificate { start: self.start.clone(), steps })
    }

    /// A certificate from the end of `self` back to its start, built from
    /// [`invert_move`]. Leading reduce steps (before the first move) cannot
    /// be undone and make the certificate irreversible, as does any move
    /// whose cancellations differ from full free reduction.
    pub fn reversed(&self) -> Result<Certificate, CertificateError> {
        let states = self.replay_all()?;
        // Group boundaries: (state index before the move, move).
        let mut groups: Vec<(usize, AcMove)> = Vec::new();
        for (k, s) in self.steps.iter().enumerate() {
            match s {
                Step::Move(m) => groups.push((k, *m)),
                Step::Reduce { .. } if groups.is_empty() => return Err(CertificateError::NotReversible(0)),
                Step::Reduce { .. } => {}
            }
        }
        let end = states.last().unwrap().clone();
        let mut out = Certificate::empty(end.clone());
        let mut current = end;
        for (g, &(before, m)) in groups.iter().enumerate().rev() {
            for inv in invert_move(&m) {
                let (next, cancels) =
                    apply_move(&current, &inv, true).map_err(|cause| ReplayError { step: before, cause })?;
                out.push_move(inv, &cancels);
                current = next;
            }
            if current != states[before] {
                return Err(CertificateError::NotReversible(g));
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("START {}\n", self.start);
        for s in &self.steps {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Certificate, CertificateParseError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) =
            lines.next().ok_or(CertificateParseError::Syntax { line: 1, message: "missing START line".into() })?;
        let rest = header
            .trim()
            .strip_prefix("START")
            .ok_or(CertificateParseError::Syntax { line: 1, message: "expected START".into() })?;
        let start = parse_presentation(rest.trim())
            .map_err(|source| CertificateParseError::Presentation { line: 1, source })?;
        let mut steps = Vec::new();
        for (n, line) in lines {
            steps.push(parse_step(line).map_err(|message| CertificateParseError::Syntax { line: n + 1, message })?);
        }
        Ok(Certificate { start, steps })
    }
}

/// Parses one certificate step line, such as `MULR 1 2` or `REDUCE 2 3`.
pub fn parse_step(line: &str) -> Result<Step, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let index = |k: usize| -> Result<usize, String> {
        let v: usize = fields
            .get(k)
            .ok_or_else(|| format!("missing field {k}"))?
            .parse()
            .map_err(|_| format!("field {k} is not a positive integer"))?;
        v.checked_sub(1).ok_or_else(|| "indices are one-based".to_string())
    };
    let arity = |n: usize| {
        if fields.len() == n {
            Ok(())
        } else {
            Err(format!("{} expects {} fields", fields[0], n - 1))
        }
    };
    match fields.first().copied() {
        Some("INV") => {
            arity(2)?;
            Ok(Step::Move(AcMove::Invert { relator: index(1)? }))
        }
        Some("CONJ") => {
            arity(4)?;
            let sign = match fields[3] {
                "1" | "+1" => Sign::Pos,
                "-1" => Sign::Neg,
                other => return Err(format!("sign must be 1 or -1, got {other}")),
            };
            Ok(Step::Move(AcMove::Conjugate { relator: index(1)?, generator: index(2)?, sign }))
        }
        Some("MULR") => {
            arity(3)?;
            Ok(Step::Move(AcMove::MultiplyRight { target: index(1)?, source: index(2)? }))
        }
        Some("REDUCE") => {
            arity(3)?;
            Ok(Step::Reduce { relator: index(1)?, position: index(2)? })
        }
        Some(other) => Err(format!("unknown step {other}")),
        None => Err("empty line".into()),
    }
}

/// Whether replaying `c` ends at a presentation with the same canonical key
/// as `expected` (relabeling off).
pub fn verify_certificate(c: &Certificate, expected: &Presentation) -> Result<bool, ReplayError> {
    let end = c.replay()?;
    Ok(end.generators == expected.generators && canonical_form(&end, false) == canonical_form(expected, false))
}

/// A generator relabeling: generator `g` is sent to the letter `image[g]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedPermutation {
    pub image: Vec<Letter>,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> Self {
        SignedPermutation { image: (0..n).map(Letter::pos).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(g, l)| l.gen() == g && l.sign == Sign::Pos)
    }

    pub fn apply_letter(&self, l: Letter) -> Letter {
        let img = self.image[l.gen()];
        Letter::new(img.gen(), img.sign.times(l.sign))
    }

    pub fn apply_word(&self, w: &Word) -> Word {
        Word(w.letters().iter().map(|&l| self.apply_letter(l)).collect())
    }

    pub fn inverse(&self) -> SignedPermutation {
        let mut image = vec![Letter::pos(0); self.image.len()];
        for (g, l) in self.image.iter().enumerate() {
            image[l.gen()] = Letter::new(g, l.sign);
        }
        SignedPermutation { image }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &SignedPermutation) -> SignedPermutation {
        SignedPermutation { image: first.image.iter().map(|&l| self.apply_letter(l)).collect() }
    }

    /// All `n! 2^n` signed permutations, identity first.
    pub fn all(n: usize) -> Vec<SignedPermutation> {
        let mut out = Vec::new();
        for perm in (0..n).permutations(n) {
            for mask in 0..(1u32 << n) {
                let image = perm
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| Letter::new(g, if mask >> k & 1 == 1 { Sign::Neg } else { Sign::Pos }))
                    .collect();
                out.push(SignedPermutation { image });
            }
        }
        out
    }
}

/// How a relator was brought to canonical form: cyclically reduce, invert if
/// `inverted`, then rotate left by `rotation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelatorNormalization {
    pub word: Word,
    pub inverted: bool,
    pub rotation: usize,
}

/// Least word among the rotations of the cyclic reduction of `w` and of its
/// inverse. Ties prefer no inversion and the smallest rotation.
pub fn canonical_relator_traced(w: &Word) -> RelatorNormalization {
    let base = cyclic_reduce(w);
    let mut best = RelatorNormalization { word: base.clone(), inverted: false, rotation: 0 };
    if base.is_empty() {
        return best;
    }
    for inverted in [false, true] {
        let candidate = if inverted { base.inverse() } else { base.clone() };
        for rotation in 0..candidate.len() {
            let rotated = candidate.rotate_left(rotation);
            if rotated < best.word {
                best = RelatorNormalization { word: rotated, inverted, rotation };
            }
        }
    }
    best
}

pub fn canonical_relator(w: &Word) -> Word {
    canonical_relator_traced(w).word
}

/// Normal form without relabeling: canonical relators, sorted. Also returns
/// where each original relator went.
pub fn normal_form_traced(p: &Presentation) -> (Presentation, Vec<usize>) {
    let words: Vec<Word> = p.relators.iter().map(canonical_relator).collect();
    let order: Vec<usize> = (0..words.len()).sorted_by(|&a, &b| words[a].cmp(&words[b]).then(a.cmp(&b))).collect();
    let mut relator_map = vec![0; words.len()];
    for (new, &old) in order.iter().enumerate() {
        relator_map[old] = new;
    }
    let relators = order.iter().map(|&k| words[k].clone()).collect();
    (Presentation { generators: p.generators, relators, names: p.names.clone() }, relator_map)
}

pub fn normal_form(p: &Presentation) -> Presentation {
    normal_form_traced(p).0
}

/// Normal form minimized over signed generator relabelings. Returns the
/// form and the relabeling that produced it (applied before normalizing).
pub fn normal_form_relabeled(p: &Presentation) -> (Presentation, SignedPermutation) {
    let mut best: Option<(Presentation, SignedPermutation)> = None;
    for sigma in SignedPermutation::all(p.generators) {
        let image = Presentation {
            generators: p.generators,
            relators: p.relators.iter().map(|w| sigma.apply_word(w)).collect(),
            names: p.names.clone(),
        };
        let nf = normal_form(&image);
        if best.as_ref().is_none_or(|(b, _)| nf.relators < b.relators) {
            best = Some((nf, sigma));
        }
    }
    best.expect("at least the identity relabeling")
}

/// Opaque deduplication key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalKey(pub Vec<u8>);

impl CanonicalKey {
    pub fn of_normal_form(nf: &Presentation) -> CanonicalKey {
        let mut bytes = Vec::with_capacity(4 + nf.total_length() * 2 + nf.relators.len() * 2);
        bytes.extend_from_slice(&(nf.generators as u32).to_le_bytes());
        for r in &nf.relators {
            bytes.extend_from_slice(&(r.len() as u16).to_le_bytes());
            for l in r.letters() {
                let code = (l.gen() as u16) << 1 | u16::from(l.sign == Sign::Neg);
                bytes.extend_from_slice(&code.to_le_bytes());
            }
        }
        CanonicalKey(bytes)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn canonical_form(p: &Presentation, relabel: bool) -> CanonicalKey {
    let nf = if relabel { normal_form_relabeled(p).0 } else { normal_form(p) };
    CanonicalKey::of_normal_form(&nf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pres(text: &str) -> Presentation {
        parse_presentation(text).unwrap()
    }

    #[test]
    fn apply_move_examples() {
        let p = pres("<a,b | a, b>");
        let m = AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos };
        assert_eq!(apply_move(&p, &m, false).unwrap().0, pres("<a,b | a, A b a>"));
        let p = pres("<a,b | b, a>");
        let m = AcMove::MultiplyRight { target: 1, source: 0 };
        assert_eq!(apply_move(&p, &m, false).unwrap().0, pres("<a,b | b, a b>"));
        let m = AcMove::Invert { relator: 0 };
        assert_eq!(apply_move(&pres("<x | x>"), &m, false).unwrap().0, pres("<x | X>"));
    }

    #[test]
    fn apply_move_errors() {
        let p = pres("<x | x>");
        assert!(matches!(
            apply_move(&p, &AcMove::Invert { relator: 1 }, false),
            Err(MoveError::RelatorOutOfRange { .. })
        ));
        let m = AcMove::Conjugate { relator: 0, generator: 3, sign: Sign::Pos };
        assert!(matches!(apply_move(&p, &m, false), Err(MoveError::GeneratorOutOfRange { .. })));
        let m = AcMove::MultiplyRight { target: 0, source: 0 };
        assert_eq!(apply_move(&p, &m, false), Err(MoveError::SameRelator(0)));
    }

    #[test]
    fn reduce_mode_records_cancellations() {
        let p = pres("<x,y | x y, Y X>");
        let m = AcMove::MultiplyRight { target: 0, source: 1 };
        let (q, cancels) = apply_move(&p, &m, true).unwrap();
        assert!(q.relators[0].is_empty());
        assert_eq!(cancels, vec![1, 0]);
    }

    #[test]
    fn derived_moves_replay() {
        let p = pres("<a,b | a, b>");
        let left = DerivedMove::MultiplyLeft { target: 1, source: 0 }.expand();
        let c = Certificate { start: p.clone(), steps: left.into_iter().map(Step::Move).collect() };
        assert_eq!(c.replay().unwrap(), pres("<a,b | a, a b>"));

        let w = pres("<x,y | x y>").relators[0].clone();
        let seq = DerivedMove::ConjugateByWord { relator: 0, word: w.clone() }.expand();
        assert_eq!(
            seq,
            vec![
                AcMove::Conjugate { relator: 0, generator: 0, sign: Sign::Pos },
                AcMove::Conjugate { relator: 0, generator: 1, sign: Sign::Pos }
            ]
        );
        let q = pres("<x,y | y, x>");
        let c = Certificate { start: q.clone(), steps: seq.into_iter().map(Step::Move).collect() };
        let direct = w.inverse().concat(&q.relators[0]).concat(&w);
        assert_eq!(c.replay().unwrap().relators[0], direct);

        assert!(DerivedMove::ConjugateByWord { relator: 0, word: Word::empty() }.expand().is_empty());
        let listed = derived_moves(&p);
        assert!(listed.iter().any(|(name, _)| name == "MultiplyLeft(2,1)"));
    }

    #[test]
    fn invert_move_examples() {
        assert_eq!(invert_move(&AcMove::Invert { relator: 0 }), vec![AcMove::Invert { relator: 0 }]);
        let c = AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos };
        assert_eq!(invert_move(&c), vec![AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Neg }]);
    }

    #[test]
    fn canonical_form_examples() {
        let a = pres("<x,y | x y X, x>");
        let b = pres("<x,y | y, x>");
        assert_eq!(canonical_relator(&a.relators[0]), canonical_relator(&b.relators[0]));
        assert_eq!(canonical_form(&pres("<x,y | y, x>"), false), canonical_form(&pres("<x,y | x, y>"), false));
        assert_eq!(canonical_form(&pres("<x | X>"), false), canonical_form(&pres("<x | x>"), false));
        assert_ne!(canonical_form(&pres("<x | x^2>"), false), canonical_form(&pres("<x | x>"), false));
    }

    #[test]
    fn relabeling_is_opt_in() {
        let a = pres("<x,y | x^2, y>");
        let b = pres("<x,y | x, y^2>");
        assert_ne!(canonical_form(&a, false), canonical_form(&b, false));
        assert_eq!(canonical_form(&a, true), canonical_form(&b, true));
        let (nf, sigma) = normal_form_relabeled(&b);
        let image = Presentation {
            generators: 2,
            relators: b.relators.iter().map(|w| sigma.apply_word(w)).collect(),
            names: None,
        };
        assert_eq!(normal_form(&image), nf);
        assert_eq!(SignedPermutation::all(3).len(), 48);
        for s in SignedPermutation::all(3) {
            assert!(s.compose(&s.inverse()).is_identity());
        }
    }

    #[test]
    fn verify_certificate_examples() {
        let p = pres("<a,b | a, b>");
        let c = Certificate::from_moves(p.clone(), &[AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos }])
            .unwrap();
        assert_eq!(verify_certificate(&c, &pres("<a,b | a, A b a>")), Ok(true));
        assert_eq!(verify_certificate(&Certificate::empty(p.clone()), &p), Ok(true));
        let c = Certificate::from_moves(pres("<x | x>"), &[AcMove::Invert { relator: 0 }]).unwrap();
        assert_eq!(verify_certificate(&c, &pres("<x | x>")), Ok(true));
        assert_eq!(verify_certificate(&c, &pres("<x | x^2>")), Ok(false));
        let bad = Certificate { start: pres("<x | x>"), steps: vec![Step::Move(AcMove::Invert { relator: 4 })] };
        assert!(verify_certificate(&bad, &pres("<x | x>")).is_err());
    }

    #[test]
    fn certificate_text_round_trip() {
        let p = pres("<x,y | x y, Y X>");
        let c = Certificate::from_moves(
            p,
            &[
                AcMove::MultiplyRight { target: 0, source: 1 },
                AcMove::Conjugate { relator: 1, generator: 1, sign: Sign::Neg },
                AcMove::Invert { relator: 1 },
            ],
        )
        .unwrap();
        let text = c.to_text();
        assert!(text.starts_with("START <x,y | x y, Y X>\nMULR 1 2\nREDUCE 1 2\nREDUCE 1 1\nCONJ 2 2 -1\n"));
        assert_eq!(Certificate::parse(&text).unwrap(), c);
        assert!(Certificate::parse("START <x | x>\nFLIP 1\n").is_err());
        assert!(Certificate::parse("INV 1\n").is_err());
        assert!(Certificate::parse("START <x | x>\nINV 0\n").is_err());
    }

    #[test]
    fn reversal_and_concatenation() {
        let p = pres("<x,y | x, y>");
        let moves = [
            AcMove::Conjugate { relator: 1, generator: 0, sign: Sign::Pos },
            AcMove::MultiplyRight { target: 0, source: 1 },
            AcMove::Invert { relator: 0 },
        ];
        let c = Certificate::from_moves(p.clone(), &moves).unwrap();
        let back = c.reversed().unwrap();
        assert_eq!(back.replay().unwrap(), p);
        let round = c.concat(&back).unwrap();
        assert_eq!(round.replay().unwrap(), p);
        assert!(matches!(back.concat(&back), Err(CertificateError::Mismatch { .. })));
    }
}
