//! Finite multisets with truncated difference and the restricted strict
//! comparison used by inhibitor arcs.
//!
//! A [`Bag`] is stored as a vector of `(element, multiplicity)` pairs sorted
//! by element with every multiplicity strictly positive, so two bags are equal
//! exactly when their vectors are equal and hashing is order independent.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Number of copies of an element in a bag.
pub type Multiplicity = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BagError {
    #[error("multiplicity overflow for element {element}")]
    Overflow { element: String },
}

/// Finite multiset over a totally ordered domain.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bag<T> {
    entries: Vec<(T, Multiplicity)>,
}

impl<T> Default for Bag<T> {
    fn default() -> Self {
        Bag {
            entries: Vec::new(),
        }
    }
}

impl<T: Ord + Copy + fmt::Display> Bag<T> {
    /// The empty bag (`nil`).
    pub fn nil() -> Self {
        Self::default()
    }

    /// `k·d`; the empty bag when `k` is zero.
    pub fn singleton(element: T, k: Multiplicity) -> Self {
        if k == 0 {
            Self::nil()
        } else {
            Bag {
                entries: vec![(element, k)],
            }
        }
    }

    /// Builds a bag from arbitrary pairs, merging repeated elements and
    /// dropping zero counts.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, BagError>
    where
        I: IntoIterator<Item = (T, Multiplicity)>,
    {
        let mut entries: Vec<(T, Multiplicity)> =
            pairs.into_iter().filter(|&(_, k)| k > 0).collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(T, Multiplicity)> = Vec::with_capacity(entries.len());
        for (d, k) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == d => {
                    *acc = acc.checked_add(k).ok_or_else(|| overflow(d))?;
                }
                _ => merged.push((d, k)),
            }
        }
        Ok(Bag { entries: merged })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct elements.
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Total number of copies, `|b|`.
    pub fn cardinality(&self) -> u128 {
        self.entries.iter().map(|&(_, k)| k as u128).sum()
    }

    /// Entries in element order.
    pub fn iter(&self) -> impl Iterator<Item = (T, Multiplicity)> + '_ {
        self.entries.iter().copied()
    }

    pub fn support(&self) -> impl Iterator<Item = T> + '_ {
        self.entries.iter().map(|&(d, _)| d)
    }

    pub fn contains(&self, element: T) -> bool {
        self.lookup(element) > 0
    }

    /// `b(d)`, zero when `d` is absent.
    pub fn lookup(&self, element: T) -> Multiplicity {
        match self.entries.binary_search_by(|(d, _)| d.cmp(&element)) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    /// Pointwise sum.
    pub fn sum(&self, other: &Self) -> Result<Self, BagError> {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, ka) = self.entries[i];
            let (b, kb) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    out.push((a, ka));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((b, kb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a, ka.checked_add(kb).ok_or_else(|| overflow(a))?));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.entries[i..]);
        out.extend_from_slice(&other.entries[j..]);
        Ok(Bag { entries: out })
    }

    /// Pointwise truncated difference: `b1(d) - b2(d)` when non-negative,
    /// zero otherwise. Not associative.
    pub fn diff(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.entries.len());
        let mut j = 0;
        for &(d, k) in &self.entries {
            while j < other.entries.len() && other.entries[j].0 < d {
                j += 1;
            }
            let sub = match other.entries.get(j) {
                Some(&(e, m)) if e == d => m,
                _ => 0,
            };
            if k > sub {
                out.push((d, k - sub));
            }
        }
        Bag { entries: out }
    }

    /// Component-wise `<=`.
    pub fn leq(&self, other: &Self) -> bool {
        self.entries.iter().all(|&(d, k)| k <= other.lookup(d))
    }

    /// Strict `>` restricted to the support of `self`. Vacuously true for the
    /// empty bag, which is how a transition without inhibitor arcs behaves.
    pub fn gt_restricted(&self, other: &Self) -> bool {
        self.entries.iter().all(|&(d, k)| k > other.lookup(d))
    }

    /// Overwrites the multiplicity of `element`; `k = 0` removes it.
    pub fn set_mult(&self, element: T, k: Multiplicity) -> Self {
        let mut entries = self.entries.clone();
        match entries.binary_search_by(|(d, _)| d.cmp(&element)) {
            Ok(i) if k == 0 => {
                entries.remove(i);
            }
            Ok(i) => entries[i].1 = k,
            Err(_) if k == 0 => {}
            Err(i) => entries.insert(i, (element, k)),
        }
        Bag { entries }
    }

    /// Maps every element through `f`, merging collisions.
    pub fn map_elements<U, F>(&self, mut f: F) -> Result<Bag<U>, BagError>
    where
        U: Ord + Copy + fmt::Display,
        F: FnMut(T) -> U,
    {
        Bag::from_pairs(self.entries.iter().map(|&(d, k)| (f(d), k)))
    }
}

fn overflow<T: fmt::Display>(element: T) -> BagError {
    BagError::Overflow {
        element: element.to_string(),
    }
}

impl<T: fmt::Display> fmt::Display for Bag<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("nil");
        }
        for (i, (d, k)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}*{}", k, d)?;
        }
        Ok(())
    }
}

impl<T: fmt::Display> fmt::Debug for Bag<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BagParseError {
    #[error("empty bag term at offset {0}")]
    EmptyTerm(usize),
    #[error("bad multiplicity {text:?} at offset {offset}")]
    BadMultiplicity { text: String, offset: usize },
    #[error("bad element {text:?} at offset {offset}")]
    BadElement { text: String, offset: usize },
    #[error("unbalanced parenthesis at offset {0}")]
    Unbalanced(usize),
    #[error(transparent)]
    Bag(#[from] BagError),
}

/// Parses a sum of `k*elem` terms (`k*` optional, default 1) or `nil`.
pub fn parse_bag<T>(text: &str) -> Result<Bag<T>, BagParseError>
where
    T: Ord + Copy + fmt::Display + FromStr,
{
    let trimmed = text.trim();
    if trimmed == "nil" || trimmed.is_empty() {
        return Ok(Bag::nil());
    }
    let mut pairs = Vec::new();
    let mut offset = 0;
    for term in text.split('+') {
        pairs.push(parse_term::<T>(term, offset)?);
        offset += term.len() + 1;
    }
    Ok(Bag::from_pairs(pairs)?)
}

pub(crate) fn parse_term<T: FromStr>(
    term: &str,
    offset: usize,
) -> Result<(T, Multiplicity), BagParseError> {
    let lead = term.len() - term.trim_start().len();
    let t = term.trim();
    if t.is_empty() {
        return Err(BagParseError::EmptyTerm(offset));
    }
    let (k, elem, elem_off) = match t.split_once(['*', '.']) {
        Some((k, e)) => {
            let k = k.trim();
            let k: Multiplicity = k.parse().map_err(|_| BagParseError::BadMultiplicity {
                text: k.to_string(),
                offset: offset + lead,
            })?;
            let e_off = offset + lead + t.len() - e.len() + (e.len() - e.trim_start().len());
            (k, e.trim(), e_off)
        }
        None => (1, t, offset + lead),
    };
    let elem = elem.parse::<T>().map_err(|_| BagParseError::BadElement {
        text: elem.to_string(),
        offset: elem_off,
    })?;
    Ok((elem, k))
}

/// Evaluates a bag expression mixing `+`, `-` and parentheses with the
/// operator grouping of the rule language: every maximal run of `+` is summed
/// first, then the differences are applied left to right. So `a - b + c`
/// means `a - (b + c)`.
pub fn eval_bag_expr<T>(text: &str) -> Result<Bag<T>, BagParseError>
where
    T: Ord + Copy + fmt::Display + FromStr,
{
    let mut parser = ExprParser {
        src: text,
        pos: 0,
    };
    let bag = parser.diff_chain::<T>()?;
    parser.skip_ws();
    if parser.pos != text.len() {
        return Err(BagParseError::Unbalanced(parser.pos));
    }
    Ok(bag)
}

struct ExprParser<'a> {
    src: &'a str,
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    // diff_chain := sum ('-' sum)*
    fn diff_chain<T>(&mut self) -> Result<Bag<T>, BagParseError>
    where
        T: Ord + Copy + fmt::Display + FromStr,
    {
        let mut acc = self.sum_run::<T>()?;
        while self.peek() == Some('-') {
            self.pos += 1;
            let rhs = self.sum_run::<T>()?;
            acc = acc.diff(&rhs);
        }
        Ok(acc)
    }

    // sum := atom ('+' atom)*
    fn sum_run<T>(&mut self) -> Result<Bag<T>, BagParseError>
    where
        T: Ord + Copy + fmt::Display + FromStr,
    {
        let mut acc = self.atom::<T>()?;
        while self.peek() == Some('+') {
            self.pos += 1;
            let rhs = self.atom::<T>()?;
            acc = acc.sum(&rhs)?;
        }
        Ok(acc)
    }

    fn atom<T>(&mut self) -> Result<Bag<T>, BagParseError>
    where
        T: Ord + Copy + fmt::Display + FromStr,
    {
        if self.peek() == Some('(') {
            let open = self.pos;
            self.pos += 1;
            let inner = self.diff_chain::<T>()?;
            if self.peek() != Some(')') {
                return Err(BagParseError::Unbalanced(open));
            }
            self.pos += 1;
            return Ok(inner);
        }
        let start = self.pos;
        let end = self.src[start..]
            .find(['+', '-', '(', ')'])
            .map_or(self.src.len(), |i| start + i);
        self.pos = end;
        let term = &self.src[start..end];
        if term.trim() == "nil" {
            return Ok(Bag::nil());
        }
        let (d, k) = parse_term::<T>(term, start)?;
        Ok(Bag::singleton(d, k))
    }
}
