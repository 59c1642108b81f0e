//! Channel subscriptions and message fan-out.
//!
//! The broker only tracks who is subscribed to what. Delivery is performed
//! by the caller, which receives the recipient list from [`Broker::publish`].
//! Nothing is retained: a message with no current subscribers is dropped.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::resp::Value;

/// Identifies one client connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub u64);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A frame pushed to a subscriber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PubSubMessage {
    Subscribe {
        channel: Vec<u8>,
        count: i64,
    },
    /// `channel` is `None` when unsubscribing from everything while holding
    /// no subscriptions.
    Unsubscribe {
        channel: Option<Vec<u8>>,
        count: i64,
    },
    Message {
        channel: Vec<u8>,
        payload: Vec<u8>,
    },
}

impl PubSubMessage {
    pub fn to_value(&self) -> Value {
        match self {
            PubSubMessage::Subscribe { channel, count } => Value::array(vec![
                Value::bulk("subscribe"),
                Value::bulk(channel.clone()),
                Value::Integer(*count),
            ]),
            PubSubMessage::Unsubscribe { channel, count } => Value::array(vec![
                Value::bulk("unsubscribe"),
                Value::Bulk(channel.clone()),
                Value::Integer(*count),
            ]),
            PubSubMessage::Message { channel, payload } => Value::array(vec![
                Value::bulk("message"),
                Value::bulk(channel.clone()),
                Value::bulk(payload.clone()),
            ]),
        }
    }

    /// Recognizes a pub/sub frame received by a client.
    pub fn from_value(value: &Value) -> Option<Self> {
        let Value::Array(Some(items)) = value else {
            return None;
        };
        let [Value::Bulk(Some(kind)), channel, third] = items.as_slice() else {
            return None;
        };
        match (kind.as_slice(), channel, third) {
            (b"subscribe", Value::Bulk(Some(channel)), Value::Integer(count)) => {
                Some(PubSubMessage::Subscribe {
                    channel: channel.clone(),
                    count: *count,
                })
            }
            (b"unsubscribe", Value::Bulk(channel), Value::Integer(count)) => {
                Some(PubSubMessage::Unsubscribe {
                    channel: channel.clone(),
                    count: *count,
                })
            }
            (b"message", Value::Bulk(Some(channel)), Value::Bulk(Some(payload))) => {
                Some(PubSubMessage::Message {
                    channel: channel.clone(),
                    payload: payload.clone(),
                })
            }
            _ => None,
        }
    }
}

/// Subscription registry, indexed both by channel and by session.
#[derive(Debug, Default)]
pub struct Broker {
    by_channel: HashMap<Vec<u8>, BTreeSet<SessionId>>,
    by_session: HashMap<SessionId, BTreeSet<Vec<u8>>>,
}

impl Broker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscription_count(&self, session: SessionId) -> usize {
        self.by_session.get(&session).map_or(0, BTreeSet::len)
    }

    /// A session is in subscriber mode iff it holds at least one
    /// subscription.
    pub fn is_subscriber(&self, session: SessionId) -> bool {
        self.subscription_count(session) > 0
    }

    pub fn subscribers(&self, channel: &[u8]) -> usize {
        self.by_channel.get(channel).map_or(0, BTreeSet::len)
    }

    /// One ack per channel, in argument order, carrying the running count.
    pub fn subscribe(&mut self, session: SessionId, channels: &[Vec<u8>]) -> Vec<PubSubMessage> {
        let mut acks = Vec::with_capacity(channels.len());
        for channel in channels {
            let mine = self.by_session.entry(session).or_default();
            if mine.insert(channel.clone()) {
                self.by_channel
                    .entry(channel.clone())
                    .or_default()
                    .insert(session);
            }
            acks.push(PubSubMessage::Subscribe {
                channel: channel.clone(),
                count: mine.len() as i64,
            });
        }
        acks
    }

    /// Leaves the listed channels, or every channel when `channels` is empty.
    pub fn unsubscribe(&mut self, session: SessionId, channels: &[Vec<u8>]) -> Vec<PubSubMessage> {
        let targets: Vec<Vec<u8>> = if channels.is_empty() {
            self.by_session
                .get(&session)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default()
        } else {
            channels.to_vec()
        };
        if targets.is_empty() {
            return vec![PubSubMessage::Unsubscribe {
                channel: None,
                count: 0,
            }];
        }
        let mut acks = Vec::with_capacity(targets.len());
        for channel in targets {
            self.remove(session, &channel);
            acks.push(PubSubMessage::Unsubscribe {
                channel: Some(channel),
                count: self.subscription_count(session) as i64,
            });
        }
        acks
    }

    /// Recipients of `payload` on `channel` and the frame each one gets.
    pub fn publish(&self, channel: &[u8], payload: &[u8]) -> (Vec<SessionId>, PubSubMessage) {
        let recipients = self
            .by_channel
            .get(channel)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        let message = PubSubMessage::Message {
            channel: channel.to_vec(),
            payload: payload.to_vec(),
        };
        (recipients, message)
    }

    /// Drops every subscription held by a closed session.
    pub fn disconnect(&mut self, session: SessionId) {
        if let Some(channels) = self.by_session.remove(&session) {
            for channel in channels {
                if let Some(subs) = self.by_channel.get_mut(&channel) {
                    subs.remove(&session);
                    if subs.is_empty() {
                        self.by_channel.remove(&channel);
                    }
                }
            }
        }
    }

    fn remove(&mut self, session: SessionId, channel: &[u8]) {
        if let Some(mine) = self.by_session.get_mut(&session) {
            mine.remove(channel);
            if mine.is_empty() {
                self.by_session.remove(&session);
            }
        }
        if let Some(subs) = self.by_channel.get_mut(channel) {
            subs.remove(&session);
            if subs.is_empty() {
                self.by_channel.remove(channel);
            }
        }
    }

    /// Both indexes describe the same relation and hold no empty entries.
    pub fn is_consistent(&self) -> bool {
        let forward = self.by_channel.iter().all(|(ch, subs)| {
            !subs.is_empty()
                && subs
                    .iter()
                    .all(|s| self.by_session.get(s).is_some_and(|c| c.contains(ch)))
        });
        let backward = self.by_session.iter().all(|(s, chans)| {
            !chans.is_empty()
                && chans
                    .iter()
                    .all(|c| self.by_channel.get(c).is_some_and(|subs| subs.contains(s)))
        });
        forward && backward
    }
}
