//! Groups given as free products of cyclic factors, with reduced-word normal forms.
//!
//! A word is a sequence of letters `(factor, exponent)`. It is reduced when no
//! exponent is trivial (zero, or a multiple of the order for a finite factor)
//! and adjacent letters come from different factors. Exponents of finite
//! factors are kept in `1..k`; exponents of infinite factors are unbounded
//! integers. The free group F_N is the free product of N copies of Z.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{domain, mismatch, Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    InfiniteCyclic,
    FiniteCyclic { order: u32 },
}

impl Factor {
    fn normalize(self, e: BigInt) -> BigInt {
        match self {
            Factor::InfiniteCyclic => e,
            Factor::FiniteCyclic { order } => e.mod_floor(&BigInt::from(order)),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::InfiniteCyclic => f.write_str("Z"),
            Factor::FiniteCyclic { order } => write!(f, "Z_{order}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GroupSpec {
    factors: Vec<Factor>,
}

impl GroupSpec {
    pub fn new(factors: Vec<Factor>) -> Result<Arc<Self>> {
        if factors.is_empty() {
            return Err(domain!("a group needs at least one factor"));
        }
        if let Some(bad) = factors
            .iter()
            .find(|f| matches!(f, Factor::FiniteCyclic { order } if *order < 2))
        {
            return Err(domain!("finite cyclic factor must have order >= 2, got {bad:?}"));
        }
        Ok(Arc::new(GroupSpec { factors }))
    }

    /// F_N as the free product of `rank` infinite cyclic factors.
    pub fn free_group(rank: usize) -> Result<Arc<Self>> {
        Self::new(vec![Factor::InfiniteCyclic; rank])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn is_free(&self) -> bool {
        self.factors.iter().all(|f| *f == Factor::InfiniteCyclic)
    }

    pub fn identity(self: &Arc<Self>) -> GroupWord {
        GroupWord {
            spec: Arc::clone(self),
            letters: Vec::new(),
        }
    }

    /// The generator of factor `i`, i.e. the word `g_i^1`.
    pub fn generator(self: &Arc<Self>, i: usize) -> Result<GroupWord> {
        self.reduce([(i, BigInt::one())])
    }

    /// Normal form of a raw letter sequence.
    pub fn reduce<I, E>(self: &Arc<Self>, letters: I) -> Result<GroupWord>
    where
        I: IntoIterator<Item = (usize, E)>,
        E: Into<BigInt>,
    {
        let mut stack: Vec<Letter> = Vec::new();
        for (factor, exp) in letters {
            let kind = *self.factors.get(factor).ok_or_else(|| {
                domain!(
                    "factor index {factor} out of range for {} factors",
                    self.factors.len()
                )
            })?;
            push_letter(&mut stack, kind, factor, exp.into());
        }
        Ok(GroupWord {
            spec: Arc::clone(self),
            letters: stack,
        })
    }

    /// Parses `g0^2 g1^-1`, `g0`, or `e`.
    pub fn parse_word(self: &Arc<Self>, text: &str) -> Result<GroupWord> {
        let text = text.trim();
        if text == "e" || text.is_empty() {
            return Ok(self.identity());
        }
        let mut raw = Vec::new();
        for token in text.split_whitespace() {
            let body = token
                .strip_prefix('g')
                .ok_or_else(|| Error::Parse(format!("letter {token:?} must start with 'g'")))?;
            let (idx, exp) = match body.split_once('^') {
                Some((i, e)) => (i, e),
                None => (body, "1"),
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Parse(format!("bad generator index in {token:?}")))?;
            let exp: BigInt = exp
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {token:?}")))?;
            raw.push((idx, exp));
        }
        self.reduce(raw)
    }
}

fn push_letter(stack: &mut Vec<Letter>, kind: Factor, factor: usize, exp: BigInt) {
    let exp = kind.normalize(exp);
    if exp.is_zero() {
        return;
    }
    match stack.last_mut() {
        Some(top) if top.factor == factor => {
            let merged = kind.normalize(&top.exp + exp);
            if merged.is_zero() {
                stack.pop();
            } else {
                top.exp = merged;
            }
        }
        _ => stack.push(Letter { factor, exp }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub factor: usize,
    pub exp: BigInt,
}

/// A reduced word over a [`GroupSpec`]. The empty word is `e_G`.
///
/// Words order by length, then lexicographically by letters.
#[derive(Clone, Debug)]
pub struct GroupWord {
    spec: Arc<GroupSpec>,
    letters: Vec<Letter>,
}

impl GroupWord {
    pub fn spec(&self) -> &Arc<GroupSpec> {
        &self.spec
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    fn same_spec(&self, other: &GroupWord) -> bool {
        Arc::ptr_eq(&self.spec, &other.spec) || self.spec == other.spec
    }

    pub fn multiply(&self, other: &GroupWord) -> Result<GroupWord> {
        if !self.same_spec(other) {
            return Err(mismatch!("words over different groups"));
        }
        let mut stack = self.letters.clone();
        for l in &other.letters {
            push_letter(&mut stack, self.spec.factors[l.factor], l.factor, l.exp.clone());
        }
        Ok(GroupWord {
            spec: Arc::clone(&self.spec),
            letters: stack,
        })
    }

    pub fn inverse(&self) -> GroupWord {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|l| Letter {
                factor: l.factor,
                exp: self.spec.factors[l.factor].normalize(-l.exp.clone()),
            })
            .collect();
        GroupWord {
            spec: Arc::clone(&self.spec),
            letters,
        }
    }

    /// True when every letter comes from one of `factors`.
    pub fn supported_in(&self, factors: &[usize]) -> bool {
        self.letters.iter().all(|l| factors.contains(&l.factor))
    }

    /// Letters as `(factor, exponent)` pairs; exponents outside `i64` become strings in JSON.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.letters
                .iter()
                .map(|l| {
                    let exp = match l.exp.to_i64() {
                        Some(e) => serde_json::Value::from(e),
                        None => serde_json::Value::from(l.exp.to_string()),
                    };
                    serde_json::json!([l.factor, exp])
                })
                .collect(),
        )
    }

    /// Inverse of [`GroupWord::to_json`]; also accepts the text syntax as a JSON string.
    pub fn from_json(spec: &Arc<GroupSpec>, value: &serde_json::Value) -> Result<GroupWord> {
        if let Some(text) = value.as_str() {
            return spec.parse_word(text);
        }
        let pairs = value
            .as_array()
            .ok_or_else(|| Error::Parse(format!("word must be an array or string: {value}")))?;
        let mut raw = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let bad = || Error::Parse(format!("letter must be [factor, exponent]: {pair}"));
            let arr = pair.as_array().filter(|a| a.len() == 2).ok_or_else(bad)?;
            let factor = arr[0].as_u64().ok_or_else(bad)? as usize;
            let exp: BigInt = match &arr[1] {
                serde_json::Value::Number(n) => BigInt::from(n.as_i64().ok_or_else(bad)?),
                serde_json::Value::String(s) => s.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            };
            raw.push((factor, exp));
        }
        spec.reduce(raw)
    }
}

impl PartialEq for GroupWord {
    fn eq(&self, other: &Self) -> bool {
        self.letters == other.letters && self.same_spec(other)
    }
}

impl Eq for GroupWord {}

impl Hash for GroupWord {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.letters.hash(state);
    }
}

impl Ord for GroupWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
            .then_with(|| {
                if Arc::ptr_eq(&self.spec, &other.spec) {
                    Ordering::Equal
                } else {
                    self.spec.cmp(&other.spec)
                }
            })
    }
}

impl PartialOrd for GroupWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("e");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            if l.exp.is_one() {
                write!(f, "g{}", l.factor)?;
            } else {
                write!(f, "g{}^{}", l.factor, l.exp)?;
            }
        }
        Ok(())
    }
}

/// Random reduced word of length at most `max_len` over the whole group.
pub fn sample_word(spec: &Arc<GroupSpec>, max_len: usize, rng: &mut Rng) -> GroupWord {
    let all: Vec<usize> = (0..spec.factor_count()).collect();
    sample_word_in(spec, &all, max_len, rng)
}

/// Random reduced word of length at most `max_len` using only `factors`.
///
/// The length is uniform on `0..=max_len` (capped at 1 when a single factor is
/// available); consecutive letters come from distinct factors. Infinite
/// factors draw exponents from `{±1, ±2}`, finite ones from `1..k`.
pub fn sample_word_in(
    spec: &Arc<GroupSpec>,
    factors: &[usize],
    max_len: usize,
    rng: &mut Rng,
) -> GroupWord {
    if factors.is_empty() {
        return spec.identity();
    }
    let mut len = rng.random_range(0..=max_len);
    if factors.len() == 1 {
        len = len.min(1);
    }
    let mut letters: Vec<Letter> = Vec::with_capacity(len);
    for _ in 0..len {
        let choices: Vec<usize> = factors
            .iter()
            .copied()
            .filter(|&f| letters.last().map_or(true, |l| l.factor != f))
            .collect();
        let factor = choices[rng.random_range(0..choices.len())];
        let exp = match spec.factors[factor] {
            Factor::InfiniteCyclic => {
                let e: i64 = rng.random_range(1..=2);
                if rng.random_bool(0.5) {
                    -e
                } else {
                    e
                }
            }
            Factor::FiniteCyclic { order } => rng.random_range(1..order as i64),
        };
        letters.push(Letter {
            factor,
            exp: BigInt::from(exp),
        });
    }
    GroupWord {
        spec: Arc::clone(spec),
        letters,
    }
}
