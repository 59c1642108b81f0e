//! The typed keyspace.
//!
//! Every key holds exactly one [`StoredValue`] family. Commands of another
//! family fail with [`StoreError::WrongType`] and leave the value alone;
//! only [`Keyspace::set`] overwrites regardless of type. Collections that
//! become empty are removed, so no key ever maps to an empty collection.

mod zset;

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

pub use zset::{format_score, parse_score, ScoreBound, SortedSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("WRONGTYPE Operation against a key holding the wrong kind of value")]
    WrongType,
    #[error("ERR value is not a valid float")]
    NotAFloat,
    #[error("ERR min or max is not a float")]
    InvalidBound,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredValue {
    Str(Vec<u8>),
    Hash(HashMap<Vec<u8>, Vec<u8>>),
    Set(HashSet<Vec<u8>>),
    List(VecDeque<Vec<u8>>),
    ZSet(SortedSet),
}

impl StoredValue {
    /// Name reported by `TYPE`.
    pub fn type_name(&self) -> &'static str {
        match self {
            StoredValue::Str(_) => "string",
            StoredValue::Hash(_) => "hash",
            StoredValue::Set(_) => "set",
            StoredValue::List(_) => "list",
            StoredValue::ZSet(_) => "zset",
        }
    }

    fn is_empty_collection(&self) -> bool {
        match self {
            StoredValue::Str(_) => false,
            StoredValue::Hash(h) => h.is_empty(),
            StoredValue::Set(s) => s.is_empty(),
            StoredValue::List(l) => l.is_empty(),
            StoredValue::ZSet(z) => z.is_empty(),
        }
    }
}

pub type StoreResult<T> = Result<T, StoreError>;

macro_rules! typed_accessors {
    ($get:ident, $get_mut:ident, $variant:ident, $ty:ty) => {
        fn $get(&self, key: &[u8]) -> StoreResult<Option<&$ty>> {
            match self.entries.get(key) {
                None => Ok(None),
                Some(StoredValue::$variant(v)) => Ok(Some(v)),
                Some(_) => Err(StoreError::WrongType),
            }
        }

        /// Creates an empty collection when the key is absent. Callers must
        /// finish with [`Keyspace::drop_if_empty`].
        fn $get_mut(&mut self, key: Vec<u8>) -> StoreResult<&mut $ty> {
            match self
                .entries
                .entry(key)
                .or_insert_with(|| StoredValue::$variant(Default::default()))
            {
                StoredValue::$variant(v) => Ok(v),
                _ => Err(StoreError::WrongType),
            }
        }
    };
}

/// The single logical keyspace.
#[derive(Debug, Clone, Default)]
pub struct Keyspace {
    entries: HashMap<Vec<u8>, StoredValue>,
}

impl Keyspace {
    pub fn new() -> Self {
        Self::default()
    }

    typed_accessors!(hash, hash_mut, Hash, HashMap<Vec<u8>, Vec<u8>>);
    typed_accessors!(set_ref, set_mut, Set, HashSet<Vec<u8>>);
    typed_accessors!(list, list_mut, List, VecDeque<Vec<u8>>);
    typed_accessors!(zset, zset_mut, ZSet, SortedSet);

    fn drop_if_empty(&mut self, key: &[u8]) {
        if self
            .entries
            .get(key)
            .is_some_and(StoredValue::is_empty_collection)
        {
            self.entries.remove(key);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get_value(&self, key: &[u8]) -> Option<&StoredValue> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], &StoredValue)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v))
    }

    // strings

    pub fn set(&mut self, key: Vec<u8>, value: Vec<u8>) {
        self.entries.insert(key, StoredValue::Str(value));
    }

    pub fn get(&self, key: &[u8]) -> StoreResult<Option<&[u8]>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(StoredValue::Str(v)) => Ok(Some(v)),
            Some(_) => Err(StoreError::WrongType),
        }
    }

    // hashes

    /// Sets each field; returns how many fields were newly created.
    pub fn hset(&mut self, key: Vec<u8>, pairs: Vec<(Vec<u8>, Vec<u8>)>) -> StoreResult<i64> {
        let hash = self.hash_mut(key)?;
        let mut created = 0;
        for (field, value) in pairs {
            if hash.insert(field, value).is_none() {
                created += 1;
            }
        }
        Ok(created)
    }

    pub fn hget(&self, key: &[u8], field: &[u8]) -> StoreResult<Option<&[u8]>> {
        Ok(self
            .hash(key)?
            .and_then(|h| h.get(field))
            .map(Vec::as_slice))
    }

    pub fn hexists(&self, key: &[u8], field: &[u8]) -> StoreResult<bool> {
        Ok(self.hash(key)?.is_some_and(|h| h.contains_key(field)))
    }

    pub fn hdel(&mut self, key: &[u8], fields: &[Vec<u8>]) -> StoreResult<i64> {
        let Some(StoredValue::Hash(hash)) = self.entries.get_mut(key) else {
            return self.hash(key).map(|_| 0);
        };
        let removed = fields.iter().filter(|f| hash.remove(*f).is_some()).count();
        self.drop_if_empty(key);
        Ok(removed as i64)
    }

    // sets

    pub fn sadd(&mut self, key: Vec<u8>, members: Vec<Vec<u8>>) -> StoreResult<i64> {
        let set = self.set_mut(key)?;
        Ok(members
            .into_iter()
            .filter(|m| set.insert(m.clone()))
            .count() as i64)
    }

    pub fn srem(&mut self, key: &[u8], members: &[Vec<u8>]) -> StoreResult<i64> {
        let Some(StoredValue::Set(set)) = self.entries.get_mut(key) else {
            return self.set_ref(key).map(|_| 0);
        };
        let removed = members.iter().filter(|m| set.remove(*m)).count();
        self.drop_if_empty(key);
        Ok(removed as i64)
    }

    pub fn smembers(&self, key: &[u8]) -> StoreResult<Vec<Vec<u8>>> {
        Ok(self
            .set_ref(key)?
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default())
    }

    pub fn sismember(&self, key: &[u8], member: &[u8]) -> StoreResult<bool> {
        Ok(self.set_ref(key)?.is_some_and(|s| s.contains(member)))
    }

    pub fn scard(&self, key: &[u8]) -> StoreResult<i64> {
        Ok(self.set_ref(key)?.map_or(0, |s| s.len() as i64))
    }

    /// Resolves every key first so a WRONGTYPE anywhere fails the whole
    /// operation. Absent keys are empty sets.
    fn sets_for(&self, keys: &[Vec<u8>]) -> StoreResult<Vec<Option<&HashSet<Vec<u8>>>>> {
        keys.iter().map(|k| self.set_ref(k)).collect()
    }

    pub fn sinter(&self, keys: &[Vec<u8>]) -> StoreResult<Vec<Vec<u8>>> {
        let sets = self.sets_for(keys)?;
        let Some(sets) = sets.into_iter().collect::<Option<Vec<_>>>() else {
            return Ok(Vec::new());
        };
        let Some(smallest) = sets.iter().min_by_key(|s| s.len()) else {
            return Ok(Vec::new());
        };
        Ok(smallest
            .iter()
            .filter(|m| sets.iter().all(|s| s.contains(*m)))
            .cloned()
            .collect())
    }

    pub fn sunion(&self, keys: &[Vec<u8>]) -> StoreResult<Vec<Vec<u8>>> {
        let mut union: HashSet<&Vec<u8>> = HashSet::new();
        for set in self.sets_for(keys)?.into_iter().flatten() {
            union.extend(set.iter());
        }
        Ok(union.into_iter().cloned().collect())
    }

    pub fn sdiff(&self, keys: &[Vec<u8>]) -> StoreResult<Vec<Vec<u8>>> {
        let sets = self.sets_for(keys)?;
        let Some((Some(first), rest)) = sets.split_first() else {
            return Ok(Vec::new());
        };
        Ok(first
            .iter()
            .filter(|m| !rest.iter().flatten().any(|s| s.contains(*m)))
            .cloned()
            .collect())
    }

    // lists

    /// Pushes each value to the head in argument order, so the last argument
    /// ends up first. Returns the new length.
    pub fn lpush(&mut self, key: Vec<u8>, values: Vec<Vec<u8>>) -> StoreResult<i64> {
        let list = self.list_mut(key)?;
        for v in values {
            list.push_front(v);
        }
        Ok(list.len() as i64)
    }

    pub fn rpush(&mut self, key: Vec<u8>, values: Vec<Vec<u8>>) -> StoreResult<i64> {
        let list = self.list_mut(key)?;
        list.extend(values);
        Ok(list.len() as i64)
    }

    pub fn lpop(&mut self, key: &[u8]) -> StoreResult<Option<Vec<u8>>> {
        self.pop(key, VecDeque::pop_front)
    }

    pub fn rpop(&mut self, key: &[u8]) -> StoreResult<Option<Vec<u8>>> {
        self.pop(key, VecDeque::pop_back)
    }

    fn pop(
        &mut self,
        key: &[u8],
        take: fn(&mut VecDeque<Vec<u8>>) -> Option<Vec<u8>>,
    ) -> StoreResult<Option<Vec<u8>>> {
        let Some(StoredValue::List(list)) = self.entries.get_mut(key) else {
            return self.list(key).map(|_| None);
        };
        let popped = take(list);
        self.drop_if_empty(key);
        Ok(popped)
    }

    pub fn llen(&self, key: &[u8]) -> StoreResult<i64> {
        Ok(self.list(key)?.map_or(0, |l| l.len() as i64))
    }

    /// Zero-based; negative indexes count from the tail.
    pub fn lindex(&self, key: &[u8], index: i64) -> StoreResult<Option<&[u8]>> {
        let Some(list) = self.list(key)? else {
            return Ok(None);
        };
        let len = list.len() as i64;
        let index = if index < 0 { len + index } else { index };
        if index < 0 || index >= len {
            return Ok(None);
        }
        Ok(list.get(index as usize).map(Vec::as_slice))
    }

    /// Inclusive on both ends, with negative indexes and clamping.
    pub fn lrange(&self, key: &[u8], start: i64, stop: i64) -> StoreResult<Vec<Vec<u8>>> {
        let Some(list) = self.list(key)? else {
            return Ok(Vec::new());
        };
        let len = list.len() as i64;
        let start = if start < 0 {
            (len + start).max(0)
        } else {
            start
        };
        let stop = if stop < 0 {
            len + stop
        } else {
            stop.min(len - 1)
        };
        if start > stop || start >= len {
            return Ok(Vec::new());
        }
        Ok(list
            .range(start as usize..=stop as usize)
            .cloned()
            .collect())
    }

    // sorted sets

    /// Returns the number of members that were not present before.
    pub fn zadd(&mut self, key: Vec<u8>, pairs: Vec<(f64, Vec<u8>)>) -> StoreResult<i64> {
        if pairs.iter().any(|(score, _)| score.is_nan()) {
            return Err(StoreError::NotAFloat);
        }
        let zset = self.zset_mut(key)?;
        Ok(pairs
            .into_iter()
            .filter(|(score, member)| zset.insert(*score, member.clone()))
            .count() as i64)
    }

    pub fn zrem(&mut self, key: &[u8], members: &[Vec<u8>]) -> StoreResult<i64> {
        let Some(StoredValue::ZSet(zset)) = self.entries.get_mut(key) else {
            return self.zset(key).map(|_| 0);
        };
        let removed = members.iter().filter(|m| zset.remove(m)).count();
        self.drop_if_empty(key);
        Ok(removed as i64)
    }

    pub fn zscore(&self, key: &[u8], member: &[u8]) -> StoreResult<Option<f64>> {
        Ok(self.zset(key)?.and_then(|z| z.score(member)))
    }

    pub fn zcard(&self, key: &[u8]) -> StoreResult<i64> {
        Ok(self.zset(key)?.map_or(0, |z| z.len() as i64))
    }

    /// Members (with scores) in `(score, member)` order. `limit` is
    /// `(offset, count)`; a negative count means no limit.
    pub fn zrangebyscore(
        &self,
        key: &[u8],
        min: ScoreBound,
        max: ScoreBound,
        limit: Option<(i64, i64)>,
    ) -> StoreResult<Vec<(Vec<u8>, f64)>> {
        let Some(zset) = self.zset(key)? else {
            return Ok(Vec::new());
        };
        let (offset, count) = limit.unwrap_or((0, -1));
        if offset < 0 {
            return Ok(Vec::new());
        }
        let count = usize::try_from(count).unwrap_or(usize::MAX);
        Ok(zset
            .range_by_score(min, max)
            .skip(offset as usize)
            .take(count)
            .map(|(m, s)| (m.to_vec(), s))
            .collect())
    }

    // keys

    pub fn del(&mut self, keys: &[Vec<u8>]) -> i64 {
        keys.iter()
            .filter(|k| self.entries.remove(*k).is_some())
            .count() as i64
    }

    /// Counts every argument that names an existing key, duplicates included.
    pub fn exists(&self, keys: &[Vec<u8>]) -> i64 {
        keys.iter()
            .filter(|k| self.entries.contains_key(*k))
            .count() as i64
    }

    pub fn type_of(&self, key: &[u8]) -> &'static str {
        self.entries.get(key).map_or("none", StoredValue::type_name)
    }

    pub fn flushall(&mut self) {
        self.entries.clear();
    }

    /// True iff no key maps to an empty collection.
    pub fn is_normalized(&self) -> bool {
        !self.entries.values().any(StoredValue::is_empty_collection)
    }
}
