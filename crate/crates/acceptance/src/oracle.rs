//! Reference model of the keyspace.
//!
//! Every collection is a plain `BTreeMap`, `BTreeSet` or `Vec`, and sorted
//! set ranges are answered by sorting everything on each query. It is slow
//! and obviously correct, which is the point.

use std::collections::{BTreeMap, BTreeSet};

use miniredis_core::Value;

pub const WRONGTYPE: &str = "WRONGTYPE Operation against a key holding the wrong kind of value";

pub type Bytes = Vec<u8>;

/// One score limit of a range query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub exclusive: bool,
}

impl Bound {
    fn admits_above(self, score: f64) -> bool {
        if self.exclusive {
            score > self.value
        } else {
            score >= self.value
        }
    }

    fn admits_below(self, score: f64) -> bool {
        if self.exclusive {
            score < self.value
        } else {
            score <= self.value
        }
    }

    fn to_arg(self) -> Bytes {
        let number = if self.value == f64::INFINITY {
            "+inf".to_string()
        } else if self.value == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            self.value.to_string()
        };
        let prefix = if self.exclusive { "(" } else { "" };
        format!("{prefix}{number}").into_bytes()
    }
}

/// A command understood by both the model and the server.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Set(Bytes, Bytes),
    Get(Bytes),
    Del(Vec<Bytes>),
    Exists(Vec<Bytes>),
    Type(Bytes),
    HSet(Bytes, Vec<(Bytes, Bytes)>),
    HGet(Bytes, Bytes),
    HExists(Bytes, Bytes),
    HDel(Bytes, Vec<Bytes>),
    SAdd(Bytes, Vec<Bytes>),
    SRem(Bytes, Vec<Bytes>),
    SMembers(Bytes),
    SIsMember(Bytes, Bytes),
    SCard(Bytes),
    SInter(Vec<Bytes>),
    SUnion(Vec<Bytes>),
    SDiff(Vec<Bytes>),
    LPush(Bytes, Vec<Bytes>),
    RPush(Bytes, Vec<Bytes>),
    LPop(Bytes),
    RPop(Bytes),
    LLen(Bytes),
    LIndex(Bytes, i64),
    LRange(Bytes, i64, i64),
    ZAdd(Bytes, Vec<(f64, Bytes)>),
    ZRem(Bytes, Vec<Bytes>),
    ZScore(Bytes, Bytes),
    ZCard(Bytes),
    ZRangeByScore {
        key: Bytes,
        min: Bound,
        max: Bound,
        with_scores: bool,
        limit: Option<(i64, i64)>,
    },
}

impl Op {
    /// The command as sent on the wire.
    pub fn to_args(&self) -> Vec<Bytes> {
        fn cmd(name: &str, parts: impl IntoIterator<Item = Bytes>) -> Vec<Bytes> {
            std::iter::once(name.as_bytes().to_vec())
                .chain(parts)
                .collect()
        }
        fn num(n: i64) -> Bytes {
            n.to_string().into_bytes()
        }
        let k = |key: &Bytes| vec![key.clone()];
        match self {
            Op::Set(key, v) => cmd("SET", [key.clone(), v.clone()]),
            Op::Get(key) => cmd("GET", k(key)),
            Op::Del(keys) => cmd("DEL", keys.clone()),
            Op::Exists(keys) => cmd("EXISTS", keys.clone()),
            Op::Type(key) => cmd("TYPE", k(key)),
            Op::HSet(key, pairs) => cmd(
                "HSET",
                k(key)
                    .into_iter()
                    .chain(pairs.iter().flat_map(|(f, v)| [f.clone(), v.clone()])),
            ),
            Op::HGet(key, f) => cmd("HGET", [key.clone(), f.clone()]),
            Op::HExists(key, f) => cmd("HEXISTS", [key.clone(), f.clone()]),
            Op::HDel(key, fs) => cmd("HDEL", k(key).into_iter().chain(fs.iter().cloned())),
            Op::SAdd(key, ms) => cmd("SADD", k(key).into_iter().chain(ms.iter().cloned())),
            Op::SRem(key, ms) => cmd("SREM", k(key).into_iter().chain(ms.iter().cloned())),
            Op::SMembers(key) => cmd("SMEMBERS", k(key)),
            Op::SIsMember(key, m) => cmd("SISMEMBER", [key.clone(), m.clone()]),
            Op::SCard(key) => cmd("SCARD", k(key)),
            Op::SInter(keys) => cmd("SINTER", keys.clone()),
            Op::SUnion(keys) => cmd("SUNION", keys.clone()),
            Op::SDiff(keys) => cmd("SDIFF", keys.clone()),
            Op::LPush(key, vs) => cmd("LPUSH", k(key).into_iter().chain(vs.iter().cloned())),
            Op::RPush(key, vs) => cmd("RPUSH", k(key).into_iter().chain(vs.iter().cloned())),
            Op::LPop(key) => cmd("LPOP", k(key)),
            Op::RPop(key) => cmd("RPOP", k(key)),
            Op::LLen(key) => cmd("LLEN", k(key)),
            Op::LIndex(key, i) => cmd("LINDEX", [key.clone(), num(*i)]),
            Op::LRange(key, a, b) => cmd("LRANGE", [key.clone(), num(*a), num(*b)]),
            Op::ZAdd(key, pairs) => cmd(
                "ZADD",
                k(key).into_iter().chain(
                    pairs
                        .iter()
                        .flat_map(|(s, m)| [s.to_string().into_bytes(), m.clone()]),
                ),
            ),
            Op::ZRem(key, ms) => cmd("ZREM", k(key).into_iter().chain(ms.iter().cloned())),
            Op::ZScore(key, m) => cmd("ZSCORE", [key.clone(), m.clone()]),
            Op::ZCard(key) => cmd("ZCARD", k(key)),
            Op::ZRangeByScore {
                key,
                min,
                max,
                with_scores,
                limit,
            } => {
                let mut parts = vec![key.clone(), min.to_arg(), max.to_arg()];
                if *with_scores {
                    parts.push(b"WITHSCORES".to_vec());
                }
                if let Some((offset, count)) = limit {
                    parts.extend([b"LIMIT".to_vec(), num(*offset), num(*count)]);
                }
                cmd("ZRANGEBYSCORE", parts)
            }
        }
    }

    /// Whether the reply is a set whose element order is unspecified.
    pub fn unordered_reply(&self) -> bool {
        matches!(
            self,
            Op::SMembers(_) | Op::SInter(_) | Op::SUnion(_) | Op::SDiff(_)
        )
    }
}

/// Sorts the elements of an unordered array reply so it can be compared.
pub fn canonical(op: &Op, reply: Value) -> Value {
    match reply {
        Value::Array(Some(mut items)) if op.unordered_reply() => {
            items.sort_by(|a, b| a.as_bytes().cmp(&b.as_bytes()));
            Value::Array(Some(items))
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Entry {
    Str(Bytes),
    Hash(BTreeMap<Bytes, Bytes>),
    Set(BTreeSet<Bytes>),
    List(Vec<Bytes>),
    ZSet(BTreeMap<Bytes, f64>),
}

impl Entry {
    fn type_name(&self) -> &'static str {
        match self {
            Entry::Str(_) => "string",
            Entry::Hash(_) => "hash",
            Entry::Set(_) => "set",
            Entry::List(_) => "list",
            Entry::ZSet(_) => "zset",
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Entry::Str(_) => false,
            Entry::Hash(h) => h.is_empty(),
            Entry::Set(s) => s.is_empty(),
            Entry::List(l) => l.is_empty(),
            Entry::ZSet(z) => z.is_empty(),
        }
    }
}

fn wrongtype() -> Value {
    Value::Error(WRONGTYPE.into())
}

fn int(n: usize) -> Value {
    Value::Integer(n as i64)
}

fn bulks(items: impl IntoIterator<Item = Bytes>) -> Value {
    Value::Array(Some(
        items.into_iter().map(|b| Value::Bulk(Some(b))).collect(),
    ))
}

fn empty_array() -> Value {
    Value::Array(Some(Vec::new()))
}

/// Prints a score the way the server does for the values tests generate:
/// integers without a fractional part, everything else in shortest form.
pub fn format_score(score: f64) -> String {
    if score == f64::INFINITY {
        "inf".into()
    } else if score == f64::NEG_INFINITY {
        "-inf".into()
    } else if score.fract() == 0.0 && score.abs() < 1e15 {
        format!("{}", score as i64)
    } else {
        format!("{score}")
    }
}

/// The model keyspace.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Model {
    entries: BTreeMap<Bytes, Entry>,
}

macro_rules! family {
    ($self:ident, $key:expr, $variant:ident, missing => $missing:expr, |$c:ident| $body:expr) => {
        match $self.entries.get($key) {
            None => $missing,
            Some(Entry::$variant($c)) => $body,
            Some(_) => wrongtype(),
        }
    };
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Bytes> {
        self.entries.keys()
    }

    /// Returns the entry for `key`, creating it with `init` if absent.
    /// `None` means the key holds another family.
    fn entry_for(&mut self, key: &Bytes, init: Entry) -> Option<&mut Entry> {
        let want = init.type_name();
        let entry = self.entries.entry(key.clone()).or_insert(init);
        (entry.type_name() == want).then_some(entry)
    }

    fn drop_if_empty(&mut self, key: &Bytes) {
        if self.entries.get(key).is_some_and(Entry::is_empty) {
            self.entries.remove(key);
        }
    }

    fn set_family(&self, keys: &[Bytes]) -> Result<Vec<BTreeSet<Bytes>>, Value> {
        let mut out = Vec::new();
        for k in keys {
            match self.entries.get(k) {
                None => out.push(BTreeSet::new()),
                Some(Entry::Set(s)) => out.push(s.clone()),
                Some(_) => return Err(wrongtype()),
            }
        }
        Ok(out)
    }

    pub fn apply(&mut self, op: &Op) -> Value {
        let reply = self.apply_inner(op);
        let touched: Vec<Bytes> = self
            .entries
            .iter()
            .filter(|(_, e)| e.is_empty())
            .map(|(k, _)| k.clone())
            .collect();
        for k in touched {
            self.drop_if_empty(&k);
        }
        reply
    }

    fn apply_inner(&mut self, op: &Op) -> Value {
        match op {
            Op::Set(k, v) => {
                self.entries.insert(k.clone(), Entry::Str(v.clone()));
                Value::Simple("OK".into())
            }
            Op::Get(k) => {
                family!(self, k, Str, missing => Value::Bulk(None), |s| Value::Bulk(Some(s.clone())))
            }
            Op::Del(keys) => int(keys
                .iter()
                .filter(|k| self.entries.remove(*k).is_some())
                .count()),
            Op::Exists(keys) => int(keys
                .iter()
                .filter(|k| self.entries.contains_key(*k))
                .count()),
            Op::Type(k) => {
                Value::Simple(self.entries.get(k).map_or("none", Entry::type_name).into())
            }
            Op::HSet(k, pairs) => {
                let Some(Entry::Hash(h)) = self.entry_for(k, Entry::Hash(BTreeMap::new())) else {
                    return wrongtype();
                };
                int(pairs
                    .iter()
                    .filter(|(f, v)| h.insert(f.clone(), v.clone()).is_none())
                    .count())
            }
            Op::HGet(k, f) => {
                family!(self, k, Hash, missing => Value::Bulk(None), |h| Value::Bulk(h.get(f).cloned()))
            }
            Op::HExists(k, f) => {
                family!(self, k, Hash, missing => int(0), |h| int(h.contains_key(f) as usize))
            }
            Op::HDel(k, fs) => match self.entries.get_mut(k) {
                None => int(0),
                Some(Entry::Hash(h)) => int(fs.iter().filter(|f| h.remove(*f).is_some()).count()),
                Some(_) => wrongtype(),
            },
            Op::SAdd(k, ms) => {
                let Some(Entry::Set(s)) = self.entry_for(k, Entry::Set(BTreeSet::new())) else {
                    return wrongtype();
                };
                int(ms.iter().filter(|m| s.insert((*m).clone())).count())
            }
            Op::SRem(k, ms) => match self.entries.get_mut(k) {
                None => int(0),
                Some(Entry::Set(s)) => int(ms.iter().filter(|m| s.remove(*m)).count()),
                Some(_) => wrongtype(),
            },
            Op::SMembers(k) => {
                family!(self, k, Set, missing => empty_array(), |s| bulks(s.iter().cloned()))
            }
            Op::SIsMember(k, m) => {
                family!(self, k, Set, missing => int(0), |s| int(s.contains(m) as usize))
            }
            Op::SCard(k) => family!(self, k, Set, missing => int(0), |s| int(s.len())),
            Op::SInter(keys) => match self.set_family(keys) {
                Err(e) => e,
                Ok(sets) => {
                    let first = sets[0].clone();
                    bulks(
                        first
                            .into_iter()
                            .filter(|m| sets.iter().all(|s| s.contains(m))),
                    )
                }
            },
            Op::SUnion(keys) => match self.set_family(keys) {
                Err(e) => e,
                Ok(sets) => bulks(sets.into_iter().flatten().collect::<BTreeSet<_>>()),
            },
            Op::SDiff(keys) => match self.set_family(keys) {
                Err(e) => e,
                Ok(sets) => bulks(
                    sets[0]
                        .iter()
                        .filter(|m| sets[1..].iter().all(|s| !s.contains(*m)))
                        .cloned(),
                ),
            },
            Op::LPush(k, vs) | Op::RPush(k, vs) => {
                let front = matches!(op, Op::LPush(..));
                let Some(Entry::List(l)) = self.entry_for(k, Entry::List(Vec::new())) else {
                    return wrongtype();
                };
                for v in vs {
                    if front {
                        l.insert(0, v.clone());
                    } else {
                        l.push(v.clone());
                    }
                }
                int(l.len())
            }
            Op::LPop(k) | Op::RPop(k) => {
                let front = matches!(op, Op::LPop(_));
                match self.entries.get_mut(k) {
                    None => Value::Bulk(None),
                    Some(Entry::List(l)) => {
                        let v = if front {
                            l.remove(0)
                        } else {
                            l.pop().expect("lists are never empty")
                        };
                        Value::Bulk(Some(v))
                    }
                    Some(_) => wrongtype(),
                }
            }
            Op::LLen(k) => family!(self, k, List, missing => int(0), |l| int(l.len())),
            Op::LIndex(k, i) => family!(self, k, List, missing => Value::Bulk(None), |l| {
                let n = l.len() as i64;
                let idx = if *i < 0 { n + i } else { *i };
                if (0..n).contains(&idx) {
                    Value::Bulk(Some(l[idx as usize].clone()))
                } else {
                    Value::Bulk(None)
                }
            }),
            Op::LRange(k, start, stop) => family!(self, k, List, missing => empty_array(), |l| {
                let n = l.len() as i64;
                let mut a = if *start < 0 { n + start } else { *start };
                let mut b = if *stop < 0 { n + stop } else { *stop };
                a = a.max(0);
                b = b.min(n - 1);
                if a > b || a >= n {
                    empty_array()
                } else {
                    bulks(l[a as usize..=b as usize].iter().cloned())
                }
            }),
            Op::ZAdd(k, pairs) => {
                let Some(Entry::ZSet(z)) = self.entry_for(k, Entry::ZSet(BTreeMap::new())) else {
                    return wrongtype();
                };
                int(pairs
                    .iter()
                    .filter(|(s, m)| z.insert(m.clone(), *s).is_none())
                    .count())
            }
            Op::ZRem(k, ms) => match self.entries.get_mut(k) {
                None => int(0),
                Some(Entry::ZSet(z)) => int(ms.iter().filter(|m| z.remove(*m).is_some()).count()),
                Some(_) => wrongtype(),
            },
            Op::ZScore(k, m) => family!(self, k, ZSet, missing => Value::Bulk(None), |z| {
                Value::Bulk(z.get(m).map(|s| format_score(*s).into_bytes()))
            }),
            Op::ZCard(k) => family!(self, k, ZSet, missing => int(0), |z| int(z.len())),
            Op::ZRangeByScore {
                key,
                min,
                max,
                with_scores,
                limit,
            } => family!(self, key, ZSet, missing => empty_array(), |z| {
                let mut hits: Vec<(f64, &Bytes)> = z
                    .iter()
                    .filter(|(_, s)| min.admits_above(**s) && max.admits_below(**s))
                    .map(|(m, s)| (*s, m))
                    .collect();
                hits.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("no NaN scores").then(a.1.cmp(b.1)));
                let hits: Vec<(f64, &Bytes)> = match limit {
                    None => hits,
                    Some((offset, _)) if *offset < 0 => Vec::new(),
                    Some((offset, count)) => {
                        let rest = hits.into_iter().skip(*offset as usize);
                        if *count < 0 {
                            rest.collect()
                        } else {
                            rest.take(*count as usize).collect()
                        }
                    }
                };
                let mut out = Vec::new();
                for (s, m) in hits {
                    out.push(Value::Bulk(Some(m.clone())));
                    if *with_scores {
                        out.push(Value::Bulk(Some(format_score(s).into_bytes())));
                    }
                }
                Value::Array(Some(out))
            }),
        }
    }
}

/// Read-only commands that together reveal everything stored under `key`,
/// given the hash fields that may have been written.
pub fn probes(key: &Bytes, fields: &[Bytes]) -> Vec<Op> {
    let mut ops = vec![
        Op::Type(key.clone()),
        Op::Get(key.clone()),
        Op::SMembers(key.clone()),
        Op::LRange(key.clone(), 0, -1),
        Op::ZRangeByScore {
            key: key.clone(),
            min: Bound {
                value: f64::NEG_INFINITY,
                exclusive: false,
            },
            max: Bound {
                value: f64::INFINITY,
                exclusive: false,
            },
            with_scores: true,
            limit: None,
        },
    ];
    ops.extend(fields.iter().map(|f| Op::HGet(key.clone(), f.clone())));
    ops
}
