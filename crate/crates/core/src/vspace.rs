//! The vector space of finite prefix trees with numerical leaves.
//!
//! A value is a finite formal linear combination of token strings, stored as
//! a trie: every node carries the coefficient of the path leading to it (the
//! `scalar`) plus a map from tokens to subtrees. The same structure doubles
//! as a sparse mixed-rank tensor (one component per path length) and as a
//! recurrent map (scalar + map from tokens to vectors).
//!
//! Values are immutable: every operation returns a new tree. Trees are kept
//! in canonical form, meaning no stored subtree is identically zero and no
//! stored coefficient is below the pruning epsilon in magnitude.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Reserved key under which the scalar component of a node is stored in the
/// text format. Never a valid token.
pub const NUMBER_KEY: &str = ":number";

/// Reserved key under which a sample slot is stored in the text format of
/// the sample extension. Never a valid token.
pub const SAMPLE_KEY: &str = ":sample";

/// Default pruning tolerance: coefficients with magnitude below this are
/// dropped when a linear combination is brought into canonical form.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// A single edge label in a prefix tree. Any nonempty UTF-8 string except
/// the reserved keys [`NUMBER_KEY`] and [`SAMPLE_KEY`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("token text must be nonempty")]
    Empty,
    #[error("`{0}` is reserved and cannot be used as a token")]
    Reserved(String),
}

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self, TokenError> {
        let text = text.into();
        if text.is_empty() {
            return Err(TokenError::Empty);
        }
        if text == NUMBER_KEY || text == SAMPLE_KEY {
            return Err(TokenError::Reserved(text));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Token {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Token::new(s)
    }
}

/// A finite sequence of tokens. The empty path addresses the scalar
/// component of a vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Path(Vec<Token>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn new(tokens: Vec<Token>) -> Self {
        Path(tokens)
    }

    /// Builds a path from string segments, validating each as a token.
    pub fn from_strs<S: AsRef<str>>(parts: &[S]) -> Result<Self, TokenError> {
        parts
            .iter()
            .map(|s| Token::new(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()
            .map(Path)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    /// Returns this path extended by one token.
    pub fn child(&self, token: Token) -> Self {
        let mut tokens = self.0.clone();
        tokens.push(token);
        Path(tokens)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

impl FromIterator<Token> for Path {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        Path(iter.into_iter().collect())
    }
}

impl From<Vec<Token>> for Path {
    fn from(tokens: Vec<Token>) -> Self {
        Path(tokens)
    }
}

/// An element of the vector space: a finite prefix tree whose nodes carry
/// real coefficients.
///
/// The coefficient of the empty path is `scalar`; the coefficient of a path
/// `l·p` is the coefficient of `p` in the subtree under `l`, zero when the
/// subtree is absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PTVector {
    scalar: f64,
    children: BTreeMap<Token, PTVector>,
}

impl PTVector {
    /// The additive identity: scalar 0, no children.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Shared reference to the zero vector.
    pub(crate) fn zero_ref() -> &'static PTVector {
        static ZERO: PTVector = PTVector {
            scalar: 0.0,
            children: BTreeMap::new(),
        };
        &ZERO
    }

    /// A pure-scalar vector (coefficient of the empty path).
    pub fn from_scalar(value: f64) -> Self {
        let mut v = PTVector {
            scalar: value,
            children: BTreeMap::new(),
        };
        v.prune_in_place(DEFAULT_EPSILON);
        v
    }

    pub fn is_zero(&self) -> bool {
        self.scalar == 0.0 && self.children.is_empty()
    }

    /// Coefficient of the empty path at this node.
    pub fn scalar(&self) -> f64 {
        self.scalar
    }

    /// First-level entries in token order.
    pub fn children(&self) -> impl Iterator<Item = (&Token, &PTVector)> {
        self.children.iter()
    }

    pub fn child_count(&self) -> usize {
        self.children.len()
    }

    /// Builds a vector from `(path, coefficient)` terms. Terms with equal
    /// paths are summed; the result is canonical.
    pub fn from_terms(terms: impl IntoIterator<Item = (Path, f64)>) -> Self {
        let mut root = PTVector::zero();
        for (path, coeff) in terms {
            root.add_at(path.tokens(), coeff);
        }
        root.prune_in_place(DEFAULT_EPSILON);
        root
    }

    fn add_at(&mut self, tokens: &[Token], coeff: f64) {
        match tokens.split_first() {
            None => self.scalar += coeff,
            Some((head, rest)) => self
                .children
                .entry(head.clone())
                .or_default()
                .add_at(rest, coeff),
        }
    }

    /// Coefficient of `path`, zero when no such term is present.
    pub fn coefficient(&self, path: &Path) -> f64 {
        let mut node = self;
        for token in path.tokens() {
            match node.children.get(token) {
                Some(child) => node = child,
                None => return 0.0,
            }
        }
        node.scalar
    }

    /// The subtree under a first-level token; the zero vector when absent.
    pub fn subtree(&self, token: &Token) -> &PTVector {
        match self.children.get(token) {
            Some(child) => child,
            None => Self::zero_ref(),
        }
    }

    /// Returns a copy of `self` with the component under `token` replaced by
    /// `subtree`. Attaching the zero vector removes the component.
    pub fn attach(&self, token: &Token, subtree: PTVector) -> PTVector {
        let mut out = self.clone();
        if subtree.is_zero() {
            out.children.remove(token);
        } else {
            out.children.insert(token.clone(), subtree);
        }
        out
    }

    /// Returns a copy with the coefficient of `path` set to `value`
    /// (removing the term when `value` is zero).
    pub fn with_coefficient(&self, path: &Path, value: f64) -> PTVector {
        let mut out = self.clone();
        out.set_at(path.tokens(), value);
        out.prune_in_place(0.0);
        out
    }

    fn set_at(&mut self, tokens: &[Token], value: f64) {
        match tokens.split_first() {
            None => self.scalar = value,
            Some((head, rest)) => self
                .children
                .entry(head.clone())
                .or_default()
                .set_at(rest, value),
        }
    }

    /// Componentwise `Σᵢ αᵢ·vᵢ`, canonical under the default epsilon.
    pub fn linear_combination<'a>(
        pairs: impl IntoIterator<Item = (f64, &'a PTVector)>,
    ) -> PTVector {
        Self::linear_combination_eps(pairs, DEFAULT_EPSILON)
    }

    /// Componentwise `Σᵢ αᵢ·vᵢ` with an explicit pruning epsilon.
    pub fn linear_combination_eps<'a>(
        pairs: impl IntoIterator<Item = (f64, &'a PTVector)>,
        epsilon: f64,
    ) -> PTVector {
        let mut acc = PTVector::zero();
        for (alpha, v) in pairs {
            acc.accumulate(alpha, v);
        }
        acc.prune_in_place(epsilon);
        acc
    }

    fn accumulate(&mut self, alpha: f64, v: &PTVector) {
        if alpha == 0.0 {
            return;
        }
        self.scalar += alpha * v.scalar;
        for (token, child) in &v.children {
            self.children
                .entry(token.clone())
                .or_default()
                .accumulate(alpha, child);
        }
    }

    pub fn add(&self, other: &PTVector) -> PTVector {
        Self::linear_combination([(1.0, self), (1.0, other)])
    }

    pub fn scale(&self, alpha: f64) -> PTVector {
        Self::linear_combination([(alpha, self)])
    }

    /// Canonical form: coefficients below `epsilon` in magnitude are zeroed,
    /// then all identically-zero subtrees are removed. Pruning a canonical
    /// vector is the identity.
    pub fn pruned(&self, epsilon: f64) -> PTVector {
        let mut out = self.clone();
        out.prune_in_place(epsilon);
        out
    }

    fn prune_in_place(&mut self, epsilon: f64) {
        if self.scalar.abs() < epsilon || self.scalar == 0.0 {
            self.scalar = 0.0;
        }
        self.children.retain(|_, child| {
            child.prune_in_place(epsilon);
            !child.is_zero()
        });
    }

    pub fn is_canonical(&self, epsilon: f64) -> bool {
        *self == self.pruned(epsilon)
    }

    /// Longest path length carrying a nonzero coefficient; `None` for the
    /// zero vector. Assumes canonical form.
    pub fn max_rank(&self) -> Option<usize> {
        if self.is_zero() {
            return None;
        }
        Some(self.depth())
    }

    fn depth(&self) -> usize {
        self.children
            .values()
            .map(|c| 1 + c.depth())
            .max()
            .unwrap_or(0)
    }

    /// All `(path, coefficient)` terms in lexicographic path order.
    pub fn terms(&self) -> Vec<(Path, f64)> {
        let mut out = Vec::new();
        self.collect_terms(&mut Vec::new(), &mut out);
        out
    }

    fn collect_terms(&self, prefix: &mut Vec<Token>, out: &mut Vec<(Path, f64)>) {
        if self.scalar != 0.0 {
            out.push((Path::new(prefix.clone()), self.scalar));
        }
        for (token, child) in &self.children {
            prefix.push(token.clone());
            child.collect_terms(prefix, out);
            prefix.pop();
        }
    }

    /// Number of nonzero terms.
    pub fn term_count(&self) -> usize {
        let here = usize::from(self.scalar != 0.0);
        here + self
            .children
            .values()
            .map(|c| c.term_count())
            .sum::<usize>()
    }

    /// Applies `f` to every nonzero stored coefficient, leaving absent (zero)
    /// coordinates untouched, and re-canonicalizes.
    pub fn map_coefficients(&self, f: impl Fn(f64) -> f64 + Copy) -> PTVector {
        let mut out = self.clone();
        out.map_in_place(f);
        out.prune_in_place(DEFAULT_EPSILON);
        out
    }

    fn map_in_place(&mut self, f: impl Fn(f64) -> f64 + Copy) {
        if self.scalar != 0.0 {
            self.scalar = f(self.scalar);
        }
        for child in self.children.values_mut() {
            child.map_in_place(f);
        }
    }
}

/// Prints the nested-map text form (keys in lexicographic order, scalar
/// component under `":number"`, bare number for a childless node).
impl fmt::Display for PTVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&text)
    }
}

impl Serialize for PTVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.children.is_empty() {
            return serializer.serialize_f64(self.scalar);
        }
        let extra = usize::from(self.scalar != 0.0);
        let mut map = serializer.serialize_map(Some(self.children.len() + extra))?;
        let mut scalar_written = self.scalar == 0.0;
        for (token, child) in &self.children {
            if !scalar_written && token.as_str() > NUMBER_KEY {
                map.serialize_entry(NUMBER_KEY, &self.scalar)?;
                scalar_written = true;
            }
            map.serialize_entry(token.as_str(), child)?;
        }
        if !scalar_written {
            map.serialize_entry(NUMBER_KEY, &self.scalar)?;
        }
        map.end()
    }
}

struct PTVectorVisitor;

impl<'de> Visitor<'de> for PTVectorVisitor {
    type Value = PTVector;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or a nested map of tokens to subtrees")
    }

    fn visit_f64<E: de::Error>(self, value: f64) -> Result<PTVector, E> {
        Ok(PTVector {
            scalar: value,
            children: BTreeMap::new(),
        })
    }

    fn visit_i64<E: de::Error>(self, value: i64) -> Result<PTVector, E> {
        self.visit_f64(value as f64)
    }

    fn visit_u64<E: de::Error>(self, value: u64) -> Result<PTVector, E> {
        self.visit_f64(value as f64)
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<PTVector, A::Error> {
        let mut node = PTVector::zero();
        while let Some(key) = access.next_key::<String>()? {
            if key == NUMBER_KEY {
                node.scalar = access.next_value::<f64>()?;
            } else if key == SAMPLE_KEY {
                return Err(de::Error::custom(
                    "`:sample` leaves are not supported in a numeric vector",
                ));
            } else {
                let token = Token::new(key.as_str()).map_err(de::Error::custom)?;
                let child = access.next_value::<PTVector>()?;
                if !child.is_zero() {
                    node.children.insert(token, child);
                }
            }
        }
        Ok(node)
    }
}

/// Parsing drops identically-zero subtrees but keeps all explicitly written
/// coefficients, however small; tolerance-based pruning only happens when
/// vectors are combined.
impl<'de> Deserialize<'de> for PTVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(PTVectorVisitor)
    }
}
