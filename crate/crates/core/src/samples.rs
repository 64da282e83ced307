//! Streams of probabilistic samples from finite signed measures.
//!
//! A sample is a point of a sample space tagged with a sign; the zero
//! measure is represented by the distinguished missing sample. Linear
//! combinations of sample-bearing streams are computed stochastically: term
//! `i` is selected with probability `|αᵢ|/Σⱼ|αⱼ|` and its sample is returned
//! with sign `sign(αᵢ)·sᵢ`.
//!
//! [`SampleVector`] extends the numeric prefix-tree vectors so that every
//! leaf carries a number plus an optional sample.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::vspace::{PTVector, Path, Token, NUMBER_KEY, SAMPLE_KEY};

/// The sign flag of a sample, serialized as `1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// The sign of a nonzero coefficient.
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be 1 or -1, got {other}")),
        }
    }
}

/// A point of the sample space paired with a sign. Points are plain strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedSample {
    pub point: String,
    pub sign: Sign,
}

impl SignedSample {
    pub fn new(point: impl Into<String>, sign: Sign) -> Self {
        SignedSample {
            point: point.into(),
            sign,
        }
    }

    pub fn positive(point: impl Into<String>) -> Self {
        Self::new(point, Sign::Plus)
    }

    pub fn negative(point: impl Into<String>) -> Self {
        Self::new(point, Sign::Minus)
    }
}

impl fmt::Display for SignedSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.sign == Sign::Plus { '+' } else { '-' };
        write!(f, "<{},{sign}1>", self.point)
    }
}

/// Either a sample or the missing sample. The zero measure is always
/// represented by `Missing`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SampleSlot {
    Present(SignedSample),
    #[default]
    Missing,
}

impl SampleSlot {
    pub fn is_missing(&self) -> bool {
        matches!(self, SampleSlot::Missing)
    }

    pub fn as_sample(&self) -> Option<&SignedSample> {
        match self {
            SampleSlot::Present(s) => Some(s),
            SampleSlot::Missing => None,
        }
    }
}

impl From<SignedSample> for SampleSlot {
    fn from(s: SignedSample) -> Self {
        SampleSlot::Present(s)
    }
}

/// Combines samples representing measures `μᵢ` into one sample representing
/// `Σᵢ αᵢ·μᵢ`.
///
/// Index `i` is selected with probability `|αᵢ|/Σⱼ|αⱼ|`; the selected sample
/// is returned with sign `sign(αᵢ)·sᵢ`. When every coefficient is zero (in
/// particular for an empty list) the combination is the zero measure and the
/// result is `Missing` without consuming randomness; when the selected slot
/// is itself missing, the result is missing.
pub fn combine_samples<R: Rng + ?Sized>(pairs: &[(f64, SampleSlot)], rng: &mut R) -> SampleSlot {
    let total: f64 = pairs.iter().map(|(alpha, _)| alpha.abs()).sum();
    if total == 0.0 {
        return SampleSlot::Missing;
    }
    let mut draw = rng.random_range(0.0..total);
    let mut chosen: Option<&(f64, SampleSlot)> = None;
    for pair in pairs {
        let weight = pair.0.abs();
        if weight == 0.0 {
            continue;
        }
        chosen = Some(pair);
        if draw < weight {
            break;
        }
        draw -= weight;
    }
    // `chosen` is always set here: total > 0 guarantees a nonzero weight,
    // and the final candidate absorbs any floating-point leftover.
    match chosen.expect("nonzero total weight") {
        (_, SampleSlot::Missing) => SampleSlot::Missing,
        (alpha, SampleSlot::Present(s)) => SampleSlot::Present(SignedSample {
            point: s.point.clone(),
            sign: Sign::of(*alpha) * s.sign,
        }),
    }
}

/// Signed frequency estimate over a run of slots: for each point,
/// `(#positive − #negative) / total`, with missing slots counted in the
/// total. Points whose counts cancel exactly are omitted.
pub fn empirical_signed_measure(slots: &[SampleSlot]) -> BTreeMap<String, f64> {
    if slots.is_empty() {
        return BTreeMap::new();
    }
    let mut counts: BTreeMap<String, i64> = BTreeMap::new();
    for slot in slots {
        if let SampleSlot::Present(s) = slot {
            *counts.entry(s.point.clone()).or_insert(0) += i64::from(s.sign.value());
        }
    }
    let total = slots.len() as f64;
    counts
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .map(|(p, c)| (p, c as f64 / total))
        .collect()
}

/// A prefix-tree vector whose leaves carry a number and an optional signed
/// sample. A leaf is prunable only when its number is (approximately) zero
/// and its sample is missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleVector {
    number: f64,
    slot: SampleSlot,
    children: BTreeMap<Token, SampleVector>,
}

impl SampleVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.number == 0.0 && self.slot.is_missing() && self.children.is_empty()
    }

    /// Lifts a numeric vector; every slot is missing.
    pub fn from_numeric(v: &PTVector) -> Self {
        let mut out = SampleVector {
            number: v.scalar(),
            slot: SampleSlot::Missing,
            children: BTreeMap::new(),
        };
        for (token, child) in v.children() {
            out.children
                .insert(token.clone(), SampleVector::from_numeric(child));
        }
        out
    }

    /// The numeric projection, dropping all samples.
    pub fn numeric(&self) -> PTVector {
        PTVector::from_terms(self.number_terms())
    }

    fn number_terms(&self) -> Vec<(Path, f64)> {
        let mut out = Vec::new();
        self.collect_numbers(&mut Vec::new(), &mut out);
        out
    }

    fn collect_numbers(&self, prefix: &mut Vec<Token>, out: &mut Vec<(Path, f64)>) {
        if self.number != 0.0 {
            out.push((Path::new(prefix.clone()), self.number));
        }
        for (token, child) in &self.children {
            prefix.push(token.clone());
            child.collect_numbers(prefix, out);
            prefix.pop();
        }
    }

    /// Returns a copy with the sample at `path` set.
    pub fn with_sample(&self, path: &Path, sample: SignedSample) -> Self {
        let mut out = self.clone();
        out.node_mut(path.tokens()).slot = SampleSlot::Present(sample);
        out
    }

    /// Returns a copy with the number at `path` set.
    pub fn with_number(&self, path: &Path, value: f64) -> Self {
        let mut out = self.clone();
        out.node_mut(path.tokens()).number = value;
        out.prune_in_place(0.0);
        out
    }

    fn node_mut(&mut self, tokens: &[Token]) -> &mut SampleVector {
        match tokens.split_first() {
            None => self,
            Some((head, rest)) => self
                .children
                .entry(head.clone())
                .or_default()
                .node_mut(rest),
        }
    }

    pub fn number_at(&self, path: &Path) -> f64 {
        self.node_at(path.tokens()).map_or(0.0, |n| n.number)
    }

    pub fn sample_at(&self, path: &Path) -> &SampleSlot {
        static MISSING: SampleSlot = SampleSlot::Missing;
        self.node_at(path.tokens()).map_or(&MISSING, |n| &n.slot)
    }

    fn node_at(&self, tokens: &[Token]) -> Option<&SampleVector> {
        let mut node = self;
        for token in tokens {
            node = node.children.get(token)?;
        }
        Some(node)
    }

    /// Linear combination of extended vectors.
    ///
    /// Numbers combine componentwise exactly as for numeric vectors. For
    /// every path present in any input, the sample slot of the result is
    /// [`combine_samples`] over that path's slots with the same
    /// coefficients; an input without the path contributes the zero measure
    /// (a missing slot). Slots are combined independently per path, visiting
    /// paths in lexicographic order, and paths at which every input slot is
    /// missing consume no randomness.
    pub fn combine<R: Rng + ?Sized>(
        pairs: &[(f64, &SampleVector)],
        epsilon: f64,
        rng: &mut R,
    ) -> SampleVector {
        let nodes: Vec<(f64, Option<&SampleVector>)> =
            pairs.iter().map(|(a, v)| (*a, Some(*v))).collect();
        let mut out = Self::combine_nodes(&nodes, rng);
        out.prune_in_place(epsilon);
        out
    }

    fn combine_nodes<R: Rng + ?Sized>(
        nodes: &[(f64, Option<&SampleVector>)],
        rng: &mut R,
    ) -> SampleVector {
        let number = nodes
            .iter()
            .map(|(alpha, node)| alpha * node.map_or(0.0, |n| n.number))
            .sum();
        let all_missing = nodes
            .iter()
            .all(|(_, node)| node.is_none_or(|n| n.slot.is_missing()));
        let slot = if all_missing {
            SampleSlot::Missing
        } else {
            let slot_pairs: Vec<(f64, SampleSlot)> = nodes
                .iter()
                .map(|(alpha, node)| (*alpha, node.map_or(SampleSlot::Missing, |n| n.slot.clone())))
                .collect();
            combine_samples(&slot_pairs, rng)
        };
        let mut keys: Vec<&Token> = nodes
            .iter()
            .filter_map(|(_, node)| *node)
            .flat_map(|n| n.children.keys())
            .collect();
        keys.sort();
        keys.dedup();
        let mut children = BTreeMap::new();
        for key in keys {
            let child_nodes: Vec<(f64, Option<&SampleVector>)> = nodes
                .iter()
                .map(|(alpha, node)| (*alpha, node.and_then(|n| n.children.get(key))))
                .collect();
            children.insert(key.clone(), Self::combine_nodes(&child_nodes, rng));
        }
        SampleVector {
            number,
            slot,
            children,
        }
    }

    fn prune_in_place(&mut self, epsilon: f64) {
        if self.number.abs() < epsilon || self.number == 0.0 {
            self.number = 0.0;
        }
        self.children.retain(|_, child| {
            child.prune_in_place(epsilon);
            !child.is_zero()
        });
    }
}

impl fmt::Display for SampleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&text)
    }
}

impl Serialize for SampleVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.children.is_empty() && self.slot.is_missing() {
            return serializer.serialize_f64(self.number);
        }
        let extra = usize::from(self.number != 0.0) + usize::from(!self.slot.is_missing());
        let mut map = serializer.serialize_map(Some(self.children.len() + extra))?;
        let mut number_written = self.number == 0.0;
        let mut sample_written = self.slot.is_missing();
        for (token, child) in &self.children {
            if !number_written && token.as_str() > NUMBER_KEY {
                map.serialize_entry(NUMBER_KEY, &self.number)?;
                number_written = true;
            }
            if !sample_written && token.as_str() > SAMPLE_KEY {
                map.serialize_entry(SAMPLE_KEY, self.slot.as_sample().unwrap())?;
                sample_written = true;
            }
            map.serialize_entry(token.as_str(), child)?;
        }
        if !number_written {
            map.serialize_entry(NUMBER_KEY, &self.number)?;
        }
        if !sample_written {
            map.serialize_entry(SAMPLE_KEY, self.slot.as_sample().unwrap())?;
        }
        map.end()
    }
}

struct SampleVectorVisitor;

impl<'de> Visitor<'de> for SampleVectorVisitor {
    type Value = SampleVector;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or a nested map with optional `:number`/`:sample` leaves")
    }

    fn visit_f64<E: de::Error>(self, value: f64) -> Result<SampleVector, E> {
        Ok(SampleVector {
            number: value,
            slot: SampleSlot::Missing,
            children: BTreeMap::new(),
        })
    }

    fn visit_i64<E: de::Error>(self, value: i64) -> Result<SampleVector, E> {
        self.visit_f64(value as f64)
    }

    fn visit_u64<E: de::Error>(self, value: u64) -> Result<SampleVector, E> {
        self.visit_f64(value as f64)
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<SampleVector, A::Error> {
        let mut node = SampleVector::zero();
        while let Some(key) = access.next_key::<String>()? {
            if key == NUMBER_KEY {
                node.number = access.next_value::<f64>()?;
            } else if key == SAMPLE_KEY {
                node.slot = SampleSlot::Present(access.next_value::<SignedSample>()?);
            } else {
                let token = Token::new(key.as_str()).map_err(de::Error::custom)?;
                let child = access.next_value::<SampleVector>()?;
                if !child.is_zero() {
                    node.children.insert(token, child);
                }
            }
        }
        Ok(node)
    }
}

impl<'de> Deserialize<'de> for SampleVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(SampleVectorVisitor)
    }
}
