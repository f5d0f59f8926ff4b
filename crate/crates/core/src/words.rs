//! Free-group words and finite presentations.
//!
//! Generators are indexed from zero inside the library. The text grammar uses
//! single lowercase letters for generators and the matching uppercase letter
//! for the inverse, so `<x,y | x^2 Y^3>` has relator `x x y⁻¹ y⁻¹ y⁻¹`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    /// Product of two signs.
    pub fn times(self, other: Sign) -> Sign {
        if self == other {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Pos => '+',
            Sign::Neg => '-',
        }
    }
}

/// One signed generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub generator: u32,
    pub sign: Sign,
}

impl Letter {
    pub fn new(generator: usize, sign: Sign) -> Self {
        Letter { generator: generator as u32, sign }
    }

    pub fn pos(generator: usize) -> Self {
        Letter::new(generator, Sign::Pos)
    }

    pub fn neg(generator: usize) -> Self {
        Letter::new(generator, Sign::Neg)
    }

    pub fn gen(self) -> usize {
        self.generator as usize
    }

    pub fn inverse(self) -> Self {
        Letter { generator: self.generator, sign: self.sign.flip() }
    }

    pub fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.sign != other.sign
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from signed one-based indices, `+2` for the second
    /// generator and `-2` for its inverse.
    pub fn from_signed(indices: &[i32]) -> Self {
        Word(
            indices
                .iter()
                .map(|&i| {
                    assert!(i != 0, "generator indices are one-based");
                    let sign = if i > 0 { Sign::Pos } else { Sign::Neg };
                    Letter::new(i.unsigned_abs() as usize - 1, sign)
                })
                .collect(),
        )
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = Vec::with_capacity(self.len() + other.len());
        letters.extend_from_slice(&self.0);
        letters.extend_from_slice(&other.0);
        Word(letters)
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| !w[0].cancels(w[1]))
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && match (self.0.first(), self.0.last()) {
                (Some(a), Some(b)) if self.len() > 1 => !a.cancels(*b),
                _ => true,
            }
    }

    /// Rotates left by `k` places: `a v` becomes `v a` for `k = 1`.
    pub fn rotate_left(&self, k: usize) -> Word {
        if self.is_empty() {
            return self.clone();
        }
        let mut letters = self.0.clone();
        letters.rotate_left(k % self.len());
        Word(letters)
    }

    pub fn exponent_sum(&self, generator: usize) -> i64 {
        self.0.iter().filter(|l| l.gen() == generator).map(|l| l.sign.as_i64()).sum()
    }

    /// Largest generator index used plus one.
    pub fn generator_bound(&self) -> usize {
        self.0.iter().map(|l| l.gen() + 1).max().unwrap_or(0)
    }

    /// Removes the inverse pair at `position`, `position + 1`.
    pub fn cancel_at(&self, position: usize) -> Option<Word> {
        let a = *self.0.get(position)?;
        let b = *self.0.get(position + 1)?;
        if !a.cancels(b) {
            return None;
        }
        let mut letters = self.0.clone();
        letters.drain(position..position + 2);
        Some(Word(letters))
    }
}

/// Free reduction, together with the positions of the single cancellations
/// performed. Each position refers to the word as it stands after the
/// previous cancellations, so replaying them one by one reproduces the result.
pub fn free_reduce_traced(w: &Word) -> (Word, Vec<usize>) {
    let mut stack: Vec<Letter> = Vec::with_capacity(w.len());
    let mut cancellations = Vec::new();
    for &letter in &w.0 {
        match stack.last() {
            Some(&top) if top.cancels(letter) => {
                cancellations.push(stack.len() - 1);
                stack.pop();
            }
            _ => stack.push(letter),
        }
    }
    (Word(stack), cancellations)
}

pub fn free_reduce(w: &Word) -> Word {
    free_reduce_traced(w).0
}

/// Free reduction followed by trimming of matching first/last letters. The
/// result is a shortest word in the conjugacy class of `w`. Also returns the
/// number of letters trimmed from each end.
pub fn cyclic_reduce_traced(w: &Word) -> (Word, usize) {
    let reduced = free_reduce(w);
    let letters = reduced.0;
    let mut lo = 0;
    let mut hi = letters.len();
    while hi - lo >= 2 && letters[lo].cancels(letters[hi - 1]) {
        lo += 1;
        hi -= 1;
    }
    (Word(letters[lo..hi].to_vec()), lo)
}

pub fn cyclic_reduce(w: &Word) -> Word {
    cyclic_reduce_traced(w).0
}

/// A finite presentation. Equality and hashing ignore generator names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: usize,
    pub relators: Vec<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl PartialEq for Presentation {
    fn eq(&self, other: &Self) -> bool {
        self.generators == other.generators && self.relators == other.relators
    }
}

impl Eq for Presentation {}

impl std::hash::Hash for Presentation {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.generators.hash(state);
        self.relators.hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PresentationError {
    #[error("relator {relator} uses generator {generator} but only {count} generators exist")]
    GeneratorOutOfRange { relator: usize, generator: usize, count: usize },
    #[error("expected {expected} generator names, got {got}")]
    NameCount { expected: usize, got: usize },
}

impl Presentation {
    pub fn new(generators: usize, relators: Vec<Word>) -> Result<Self, PresentationError> {
        for (i, r) in relators.iter().enumerate() {
            if let Some(l) = r.0.iter().find(|l| l.gen() >= generators) {
                return Err(PresentationError::GeneratorOutOfRange {
                    relator: i,
                    generator: l.gen(),
                    count: generators,
                });
            }
        }
        Ok(Presentation { generators, relators, names: None })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self, PresentationError> {
        if names.len() != self.generators {
            return Err(PresentationError::NameCount { expected: self.generators, got: names.len() });
        }
        self.names = Some(names);
        Ok(self)
    }

    /// `<x1..xn | x1, .., xn>`.
    pub fn standard(n: usize) -> Self {
        Presentation { generators: n, relators: (0..n).map(|g| Word(vec![Letter::pos(g)])).collect(), names: None }
    }

    pub fn free(n: usize) -> Self {
        Presentation { generators: n, relators: Vec::new(), names: None }
    }

    pub fn is_balanced(&self) -> bool {
        self.relators.len() == self.generators
    }

    pub fn total_length(&self) -> usize {
        self.relators.iter().map(Word::len).sum()
    }

    pub fn max_relator_length(&self) -> usize {
        self.relators.iter().map(Word::len).max().unwrap_or(0)
    }

    pub fn has_empty_relator(&self) -> bool {
        self.relators.iter().any(Word::is_empty)
    }

    pub fn free_reduced(&self) -> Presentation {
        Presentation {
            generators: self.generators,
            relators: self.relators.iter().map(free_reduce).collect(),
            names: self.names.clone(),
        }
    }

    pub fn cyclically_reduced(&self) -> Presentation {
        Presentation {
            generators: self.generators,
            relators: self.relators.iter().map(cyclic_reduce).collect(),
            names: self.names.clone(),
        }
    }

    pub fn name_of(&self, generator: usize) -> String {
        match &self.names {
            Some(names) => names[generator].clone(),
            None => default_name(self.generators, generator),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_presentation(text)
    }
}

fn default_name(count: usize, generator: usize) -> String {
    const SMALL: [char; 4] = ['x', 'y', 'z', 'w'];
    if count <= SMALL.len() {
        SMALL[generator].to_string()
    } else if count <= 26 {
        ((b'a' + generator as u8) as char).to_string()
    } else {
        format!("g{}", generator + 1)
    }
}

fn format_word(p: &Presentation, w: &Word, out: &mut String) {
    if w.is_empty() {
        out.push('1');
        return;
    }
    let mut first = true;
    for run in w.0.chunk_by(|a, b| a == b) {
        if !first {
            out.push(' ');
        }
        first = false;
        let l = run[0];
        let name = p.name_of(l.gen());
        match l.sign {
            Sign::Pos => out.push_str(&name),
            Sign::Neg => out.push_str(&name.to_uppercase()),
        }
        if run.len() > 1 {
            out.push('^');
            out.push_str(&run.len().to_string());
        }
    }
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::from("<");
        let names: Vec<String> = (0..self.generators).map(|g| self.name_of(g)).collect();
        out.push_str(&names.join(","));
        out.push_str(" | ");
        for (i, r) in self.relators.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            format_word(self, r, &mut out);
        }
        out.push('>');
        f.write_str(&out)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = Presentation::free(self.generator_bound());
        let mut out = String::new();
        format_word(&p, self, &mut out);
        f.write_str(&out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown generator '{letter}' at byte {position}")]
    UnknownGenerator { letter: char, position: usize },
    #[error("duplicate generator name '{name}' at byte {position}")]
    DuplicateGenerator { name: char, position: usize },
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => Err(self.syntax(format!("expected '{want}', found '{c}'"))),
            None => Err(self.syntax(format!("expected '{want}', found end of input"))),
        }
    }

    fn syntax(&self, message: String) -> ParseError {
        ParseError::Syntax { position: self.pos, message }
    }
}

/// Parses `<a,b | relator, relator>`.
///
/// Besides the base grammar this accepts an empty relator list (`<x,y | >`)
/// and the token `1` for an empty relator, so that every presentation the
/// library can produce also parses back.
pub fn parse_presentation(text: &str) -> Result<Presentation, ParseError> {
    let mut cur = Cursor { text, pos: 0 };
    cur.expect('<')?;
    let mut names: Vec<char> = Vec::new();
    loop {
        cur.skip_ws();
        let at = cur.pos;
        match cur.bump() {
            Some(c) if c.is_ascii_lowercase() => {
                if names.contains(&c) {
                    return Err(ParseError::DuplicateGenerator { name: c, position: at });
                }
                names.push(c);
            }
            Some(c) => {
                return Err(ParseError::Syntax {
                    position: at,
                    message: format!("expected a lowercase generator name, found '{c}'"),
                })
            }
            None => return Err(cur.syntax("unexpected end of input in generator list".into())),
        }
        cur.skip_ws();
        match cur.peek() {
            Some(',') => {
                cur.bump();
            }
            Some('|') => {
                cur.bump();
                break;
            }
            Some(c) => return Err(cur.syntax(format!("expected ',' or '|', found '{c}'"))),
            None => return Err(cur.syntax("unexpected end of input in generator list".into())),
        }
    }

    let mut relators = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some('>') {
        cur.bump();
    } else {
        loop {
            relators.push(parse_relator(&mut cur, &names)?);
            cur.skip_ws();
            match cur.bump() {
                Some(',') => continue,
                Some('>') => break,
                Some(c) => {
                    return Err(ParseError::Syntax {
                        position: cur.pos - c.len_utf8(),
                        message: format!("expected ',' or '>', found '{c}'"),
                    })
                }
                None => return Err(cur.syntax("missing closing '>'".into())),
            }
        }
    }
    cur.skip_ws();
    if cur.pos != text.len() {
        return Err(cur.syntax("trailing input after '>'".into()));
    }
    Ok(Presentation { generators: names.len(), relators, names: Some(names.iter().map(|c| c.to_string()).collect()) })
}

fn parse_relator(cur: &mut Cursor<'_>, names: &[char]) -> Result<Word, ParseError> {
    let mut letters = Vec::new();
    let mut terms = 0;
    loop {
        cur.skip_ws();
        let at = cur.pos;
        let c = match cur.peek() {
            Some(c) if c.is_ascii_alphabetic() => c,
            Some('1') if terms == 0 => {
                cur.bump();
                return Ok(Word::empty());
            }
            _ => break,
        };
        cur.bump();
        let lower = c.to_ascii_lowercase();
        let generator = names
            .iter()
            .position(|&n| n == lower)
            .ok_or(ParseError::UnknownGenerator { letter: lower, position: at })?;
        let base = if c.is_ascii_lowercase() { Sign::Pos } else { Sign::Neg };
        cur.skip_ws();
        let mut exponent: i64 = 1;
        if cur.peek() == Some('^') {
            cur.bump();
            exponent = parse_signed_int(cur)?;
        }
        let sign = if exponent < 0 { base.flip() } else { base };
        for _ in 0..exponent.unsigned_abs() {
            letters.push(Letter::new(generator, sign));
        }
        terms += 1;
    }
    if terms == 0 {
        return Err(cur.syntax("expected a relator term".into()));
    }
    Ok(Word(letters))
}

fn parse_signed_int(cur: &mut Cursor<'_>) -> Result<i64, ParseError> {
    cur.skip_ws();
    let start = cur.pos;
    let mut negative = false;
    match cur.peek() {
        Some('-') => {
            negative = true;
            cur.bump();
        }
        Some('+') => {
            cur.bump();
        }
        _ => {}
    }
    let digits_start = cur.pos;
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.pos == digits_start {
        return Err(ParseError::Syntax { position: start, message: "expected an integer exponent".into() });
    }
    let value: i64 = cur.text[digits_start..cur.pos]
        .parse()
        .map_err(|_| ParseError::Syntax { position: start, message: "exponent out of range".into() })?;
    if value > 1_000_000 {
        return Err(ParseError::Syntax { position: start, message: "exponent too large".into() });
    }
    Ok(if negative { -value } else { value })
}
