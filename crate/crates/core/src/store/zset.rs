//! Sorted set: unique members ordered by `(score, member bytes)`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::ops::Bound;

use super::StoreError;

/// A score that is never NaN, so it has a total order.
///
/// `-0.0` and `0.0` compare equal, like the stock server's comparison.
#[derive(Debug, Clone, Copy)]
struct Score(f64);

impl PartialEq for Score {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .partial_cmp(&other.0)
            .expect("sorted set scores are never NaN")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SortedSet {
    ordered: BTreeSet<(Score, Vec<u8>)>,
    scores: HashMap<Vec<u8>, f64>,
}

impl SortedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Inserts or rescores `member`. Returns true if the member is new.
    ///
    /// # Panics
    ///
    /// If `score` is NaN.
    pub fn insert(&mut self, score: f64, member: Vec<u8>) -> bool {
        assert!(!score.is_nan(), "NaN score");
        match self.scores.get(&member) {
            Some(&old) if Score(old) == Score(score) => false,
            Some(&old) => {
                self.ordered.remove(&(Score(old), member.clone()));
                self.ordered.insert((Score(score), member.clone()));
                self.scores.insert(member, score);
                false
            }
            None => {
                self.ordered.insert((Score(score), member.clone()));
                self.scores.insert(member, score);
                true
            }
        }
    }

    pub fn remove(&mut self, member: &[u8]) -> bool {
        match self.scores.remove(member) {
            Some(score) => {
                self.ordered.remove(&(Score(score), member.to_vec()));
                true
            }
            None => false,
        }
    }

    pub fn score(&self, member: &[u8]) -> Option<f64> {
        self.scores.get(member).copied()
    }

    /// All `(member, score)` pairs in order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.ordered.iter().map(|(s, m)| (m.as_slice(), s.0))
    }

    /// Members whose score lies within `[min, max]`, honoring exclusive
    /// bounds, in `(score, member)` order.
    pub fn range_by_score(
        &self,
        min: ScoreBound,
        max: ScoreBound,
    ) -> impl Iterator<Item = (&[u8], f64)> {
        let empty =
            min.value > max.value || (min.value == max.value && (min.exclusive || max.exclusive));
        let start = if empty {
            Bound::Excluded((Score(f64::INFINITY), Vec::new()))
        } else {
            Bound::Included((Score(min.value), Vec::new()))
        };
        let low = self
            .ordered
            .range((start, Bound::Unbounded))
            .skip_while(move |(s, _)| min.exclusive && s.0 == min.value);
        low.take_while(move |(s, _)| !empty && max.admits_from_above(s.0))
            .map(|(s, m)| (m.as_slice(), s.0))
    }
}

/// One end of a score range: `<num>`, `(<num>`, `-inf` or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBound {
    pub value: f64,
    pub exclusive: bool,
}

impl ScoreBound {
    pub fn inclusive(value: f64) -> Self {
        Self {
            value,
            exclusive: false,
        }
    }

    pub fn exclusive(value: f64) -> Self {
        Self {
            value,
            exclusive: true,
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, StoreError> {
        let (exclusive, number) = match bytes.strip_prefix(b"(") {
            Some(rest) => (true, rest),
            None => (false, bytes),
        };
        let value = parse_score(number).map_err(|_| StoreError::InvalidBound)?;
        Ok(Self { value, exclusive })
    }

    fn admits_from_above(&self, score: f64) -> bool {
        if self.exclusive {
            score < self.value
        } else {
            score <= self.value
        }
    }
}

/// Parses a score argument. Accepts `inf`/`+inf`/`-inf`; rejects NaN.
pub fn parse_score(bytes: &[u8]) -> Result<f64, StoreError> {
    let text = std::str::from_utf8(bytes).map_err(|_| StoreError::NotAFloat)?;
    if text.is_empty() || text.starts_with(|c: char| c.is_whitespace()) {
        return Err(StoreError::NotAFloat);
    }
    match text.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(StoreError::NotAFloat),
    }
}

/// Formats a score the way replies carry it: shortest round-trip digits,
/// no trailing `.0` for integral values, `inf`/`-inf` for infinities,
/// and `%g`-style scientific notation for decimal exponents below -4 or
/// above 16.
pub fn format_score(score: f64) -> String {
    if score.is_infinite() {
        return if score > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if score == 0.0 {
        return if score.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{score:e}");
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..17).contains(&exp) {
        let plain = format!("{score}");
        plain.strip_suffix(".0").map(str::to_owned).unwrap_or(plain)
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}
