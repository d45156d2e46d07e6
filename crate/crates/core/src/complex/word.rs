//! Words in free groups: parsing, free reduction, formatting, evaluation.
//!
//! Letters are stored as signed generator indices `±(g + 1)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lorentz::Isometry;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("unknown generator '{0}'")]
    UnknownGenerator(String),
    #[error("syntax error in word '{word}': {reason}")]
    Syntax { word: String, reason: String },
}

/// A word over generators `0..k`, not necessarily reduced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<i32>);

impl Word {
    pub fn identity() -> Self {
        Self(Vec::new())
    }

    pub fn generator(g: usize) -> Self {
        Self(vec![g as i32 + 1])
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[0] != -w[1])
    }

    /// Free reduction.
    pub fn reduce(&self) -> Self {
        let mut out: Vec<i32> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self(out)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().rev().map(|l| -l).collect())
    }

    /// Reduced product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v).reduce()
    }

    pub fn pow(&self, e: i64) -> Self {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut v = Vec::with_capacity(base.0.len() * e.unsigned_abs() as usize);
        for _ in 0..e.unsigned_abs() {
            v.extend_from_slice(&base.0);
        }
        Self(v).reduce()
    }

    pub fn commutator(a: &Self, b: &Self) -> Self {
        a.mul(b).mul(&a.inverse()).mul(&b.inverse())
    }

    pub fn max_generator(&self) -> Option<usize> {
        self.0.iter().map(|l| l.unsigned_abs() as usize - 1).max()
    }

    /// `rho(w) = rho(l_1) rho(l_2) ...` given the images and their inverses.
    pub fn evaluate(&self, images: &[Isometry], inverses: &[Isometry]) -> Isometry {
        let n = images.first().map(|g| g.dim()).unwrap_or(2);
        let mut m = nalgebra::DMatrix::identity(n + 1, n + 1);
        for &l in &self.0 {
            let g = (l.unsigned_abs() - 1) as usize;
            let f = if l > 0 { &images[g] } else { &inverses[g] };
            m *= f.matrix();
        }
        Isometry::from_matrix_unchecked(m)
    }
}

/// Generator names with parsing and formatting of words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub fn new(names: Vec<String>) -> Self {
        Self { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn single_letters(&self) -> bool {
        self.names.iter().all(|n| n.chars().count() == 1)
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Resolves a token to a letter: exact name, or first character case-swapped for the inverse.
    fn letter(&self, tok: &str) -> Result<i32, WordError> {
        if let Some(g) = self.index(tok) {
            return Ok(g as i32 + 1);
        }
        let mut cs = tok.chars();
        if let Some(c) = cs.next() {
            let swapped: String = swap_case(c).chain(cs).collect();
            if let Some(g) = self.index(&swapped) {
                return Ok(-(g as i32 + 1));
            }
        }
        Err(WordError::UnknownGenerator(tok.to_string()))
    }

    /// Parses words like `a B`, `abAB`, `x^-1 y`, `b a⁻¹` or `[a,b]`; `1` and the
    /// empty string denote the identity. The result is not reduced.
    pub fn parse(&self, s: &str) -> Result<Word, WordError> {
        let chars: Vec<char> = s.chars().collect();
        let mut p = Parser { alpha: self, chars: &chars, pos: 0, src: s, single: self.single_letters() };
        let w = p.expr()?;
        p.skip_ws();
        if p.pos != chars.len() {
            return Err(p.err("unexpected character"));
        }
        Ok(w)
    }

    /// Letters separated by spaces; inverses by case swap of the first
    /// character when unambiguous, otherwise with a `^-1` suffix.
    pub fn format(&self, w: &Word) -> String {
        let mut out = String::new();
        for (k, &l) in w.0.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            let name = &self.names[(l.unsigned_abs() - 1) as usize];
            if l > 0 {
                out.push_str(name);
            } else {
                let mut cs = name.chars();
                let c = cs.next().expect("nonempty name");
                let swapped: String = swap_case(c).chain(cs).collect();
                if swapped != *name && self.index(&swapped).is_none() {
                    out.push_str(&swapped);
                } else {
                    let _ = write!(out, "{name}^-1");
                }
            }
        }
        out
    }
}

fn swap_case(c: char) -> Box<dyn Iterator<Item = char>> {
    if c.is_uppercase() {
        Box::new(c.to_lowercase())
    } else {
        Box::new(c.to_uppercase())
    }
}

struct Parser<'a> {
    alpha: &'a Alphabet,
    chars: &'a [char],
    pos: usize,
    src: &'a str,
    single: bool,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> WordError {
        WordError::Syntax { word: self.src.to_string(), reason: format!("{reason} at {}", self.pos) }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && (self.chars[self.pos].is_whitespace() || self.chars[self.pos] == '*') {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Word, WordError> {
        let mut letters = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None | Some(',') | Some(']') | Some(')') => break,
                _ => {
                    let t = self.term()?;
                    letters.extend(t.0);
                }
            }
        }
        Ok(Word(letters))
    }

    fn term(&mut self) -> Result<Word, WordError> {
        let base = self.atom()?;
        let e = self.exponent()?;
        Ok(Word(base.pow_unreduced(e)))
    }

    fn atom(&mut self) -> Result<Word, WordError> {
        match self.peek() {
            Some('[') => {
                self.pos += 1;
                let a = self.expr()?;
                if self.peek() != Some(',') {
                    return Err(self.err("expected ','"));
                }
                self.pos += 1;
                let b = self.expr()?;
                if self.peek() != Some(']') {
                    return Err(self.err("expected ']'"));
                }
                self.pos += 1;
                let mut v = a.0.clone();
                v.extend(&b.0);
                v.extend(a.inverse().0);
                v.extend(b.inverse().0);
                Ok(Word(v))
            }
            Some('(') => {
                self.pos += 1;
                let a = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(a)
            }
            Some('1') if !self.next_is_ident(1) => {
                self.pos += 1;
                Ok(Word::identity())
            }
            Some(c) if c.is_alphanumeric() || c == '_' => {
                let start = self.pos;
                if self.single {
                    self.pos += 1;
                } else {
                    while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                        self.pos += 1;
                    }
                }
                let tok: String = self.chars[start..self.pos].iter().collect();
                Ok(Word(vec![self.alpha.letter(&tok)?]))
            }
            _ => Err(self.err("unexpected character")),
        }
    }

    fn next_is_ident(&self, off: usize) -> bool {
        self.chars.get(self.pos + off).is_some_and(|c| c.is_alphanumeric() || *c == '_')
    }

    fn exponent(&mut self) -> Result<i64, WordError> {
        match self.peek() {
            Some('^') => {
                self.pos += 1;
                let neg = if self.peek() == Some('-') {
                    self.pos += 1;
                    true
                } else {
                    false
                };
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.err("expected exponent"));
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                let e: i64 = digits.parse().map_err(|_| self.err("bad exponent"))?;
                Ok(if neg { -e } else { e })
            }
            Some('⁻') if self.chars.get(self.pos + 1) == Some(&'¹') => {
                self.pos += 2;
                Ok(-1)
            }
            _ => Ok(1),
        }
    }
}

impl Word {
    fn pow_unreduced(&self, e: i64) -> Vec<i32> {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut v = Vec::new();
        for _ in 0..e.unsigned_abs() {
            v.extend_from_slice(&base.0);
        }
        v
    }
}
