//! Command registry, request normalization and dispatch.
//!
//! [`Engine`] is the single-writer executor state: the keyspace plus the
//! subscription registry. Every command runs to completion against it before
//! the next one starts, which makes each command atomic and gives all
//! sessions one total order.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::inline::split_args;
use crate::pubsub::{Broker, PubSubMessage, SessionId};
use crate::resp::{parse_i64, Value};
use crate::store::{format_score, parse_score, Keyspace, ScoreBound, StoreError, StoreResult};

/// A command with its name normalized for lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandRequest {
    /// Upper-cased command name.
    pub name: String,
    pub args: Vec<Vec<u8>>,
    pub session: SessionId,
    spelled: String,
}

impl CommandRequest {
    /// Splits `parts` into name and arguments. Returns `None` for an empty
    /// request.
    pub fn new(session: SessionId, mut parts: Vec<Vec<u8>>) -> Option<Self> {
        if parts.is_empty() {
            return None;
        }
        let raw = parts.remove(0);
        let spelled = String::from_utf8_lossy(&raw).into_owned();
        Some(Self {
            name: spelled.to_ascii_uppercase(),
            args: parts,
            session,
            spelled,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandlerClass {
    Store,
    PubSub,
    Connection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    Ping,
    Echo,
    Quit,
    Select,
    Command,
    Hello,
    Client,
    Set,
    Get,
    Del,
    Exists,
    Type,
    DbSize,
    FlushAll,
    HSet,
    HGet,
    HExists,
    HDel,
    SAdd,
    SRem,
    SMembers,
    SIsMember,
    SCard,
    SInter,
    SUnion,
    SDiff,
    LPush,
    RPush,
    LPop,
    RPop,
    LLen,
    LIndex,
    LRange,
    ZAdd,
    ZRem,
    ZScore,
    ZCard,
    ZRangeByScore,
    Subscribe,
    Unsubscribe,
    Publish,
}

/// Static description of one command.
#[derive(Debug, Clone, Copy)]
pub struct CommandDescriptor {
    pub name: &'static str,
    /// Arguments after the command name.
    pub min_args: usize,
    pub max_args: Option<usize>,
    pub class: HandlerClass,
    pub allowed_in_subscriber_mode: bool,
    cmd: Cmd,
}

impl CommandDescriptor {
    fn accepts(&self, n: usize) -> bool {
        n >= self.min_args && self.max_args.map_or(true, |max| n <= max)
    }
}

const fn desc(
    name: &'static str,
    cmd: Cmd,
    min_args: usize,
    max_args: Option<usize>,
    class: HandlerClass,
) -> CommandDescriptor {
    CommandDescriptor {
        name,
        min_args,
        max_args,
        class,
        allowed_in_subscriber_mode: false,
        cmd,
    }
}

const fn sub_ok(mut d: CommandDescriptor) -> CommandDescriptor {
    d.allowed_in_subscriber_mode = true;
    d
}

use HandlerClass::{Connection, PubSub, Store};

const ANY: Option<usize> = None;

const fn exactly(n: usize) -> Option<usize> {
    Some(n)
}

static COMMANDS: &[CommandDescriptor] = &[
    sub_ok(desc("PING", Cmd::Ping, 0, exactly(1), Connection)),
    desc("ECHO", Cmd::Echo, 1, exactly(1), Connection),
    sub_ok(desc("QUIT", Cmd::Quit, 0, ANY, Connection)),
    desc("SELECT", Cmd::Select, 1, exactly(1), Connection),
    desc("COMMAND", Cmd::Command, 0, ANY, Connection),
    desc("HELLO", Cmd::Hello, 0, ANY, Connection),
    desc("CLIENT", Cmd::Client, 1, ANY, Connection),
    desc("SET", Cmd::Set, 2, ANY, Store),
    desc("GET", Cmd::Get, 1, exactly(1), Store),
    desc("DEL", Cmd::Del, 1, ANY, Store),
    desc("EXISTS", Cmd::Exists, 1, ANY, Store),
    desc("TYPE", Cmd::Type, 1, exactly(1), Store),
    desc("DBSIZE", Cmd::DbSize, 0, exactly(0), Store),
    desc("FLUSHALL", Cmd::FlushAll, 0, exactly(1), Store),
    desc("FLUSHDB", Cmd::FlushAll, 0, exactly(1), Store),
    desc("HSET", Cmd::HSet, 3, ANY, Store),
    desc("HGET", Cmd::HGet, 2, exactly(2), Store),
    desc("HEXISTS", Cmd::HExists, 2, exactly(2), Store),
    desc("HDEL", Cmd::HDel, 2, ANY, Store),
    desc("SADD", Cmd::SAdd, 2, ANY, Store),
    desc("SREM", Cmd::SRem, 2, ANY, Store),
    desc("SMEMBERS", Cmd::SMembers, 1, exactly(1), Store),
    desc("SISMEMBER", Cmd::SIsMember, 2, exactly(2), Store),
    desc("SCARD", Cmd::SCard, 1, exactly(1), Store),
    desc("SINTER", Cmd::SInter, 1, ANY, Store),
    desc("SUNION", Cmd::SUnion, 1, ANY, Store),
    desc("SDIFF", Cmd::SDiff, 1, ANY, Store),
    desc("LPUSH", Cmd::LPush, 2, ANY, Store),
    desc("RPUSH", Cmd::RPush, 2, ANY, Store),
    desc("LPOP", Cmd::LPop, 1, exactly(1), Store),
    desc("RPOP", Cmd::RPop, 1, exactly(1), Store),
    desc("LLEN", Cmd::LLen, 1, exactly(1), Store),
    desc("LINDEX", Cmd::LIndex, 2, exactly(2), Store),
    desc("LRANGE", Cmd::LRange, 3, exactly(3), Store),
    desc("ZADD", Cmd::ZAdd, 3, ANY, Store),
    desc("ZREM", Cmd::ZRem, 2, ANY, Store),
    desc("ZSCORE", Cmd::ZScore, 2, exactly(2), Store),
    desc("ZCARD", Cmd::ZCard, 1, exactly(1), Store),
    desc("ZRANGEBYSCORE", Cmd::ZRangeByScore, 3, ANY, Store),
    sub_ok(desc("SUBSCRIBE", Cmd::Subscribe, 1, ANY, PubSub)),
    sub_ok(desc("UNSUBSCRIBE", Cmd::Unsubscribe, 0, ANY, PubSub)),
    desc("PUBLISH", Cmd::Publish, 2, exactly(2), PubSub),
];

fn registry() -> &'static HashMap<&'static str, &'static CommandDescriptor> {
    static REGISTRY: OnceLock<HashMap<&'static str, &'static CommandDescriptor>> = OnceLock::new();
    REGISTRY.get_or_init(|| COMMANDS.iter().map(|d| (d.name, d)).collect())
}

/// Looks up a command by name, ignoring ASCII case.
pub fn lookup(name: &str) -> Option<&'static CommandDescriptor> {
    registry().get(name.to_ascii_uppercase().as_str()).copied()
}

/// Every registered command.
pub fn commands() -> impl Iterator<Item = &'static CommandDescriptor> {
    COMMANDS.iter()
}

/// Frames to deliver to sessions other than the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub recipients: Vec<SessionId>,
    pub frame: Value,
}

/// Everything produced by executing one request.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    /// Frames for the calling session, in order. Exactly one for ordinary
    /// commands; one per channel for (un)subscribe; none for blank input.
    pub replies: Vec<Value>,
    pub deliveries: Vec<Delivery>,
    /// The caller's connection should close once `replies` are written.
    pub close: bool,
}

impl Outcome {
    fn reply(value: Value) -> Self {
        Self {
            replies: vec![value],
            ..Self::default()
        }
    }

    fn error(text: impl Into<String>) -> Self {
        Self::reply(Value::error(text))
    }

    /// The single reply of an ordinary command.
    pub fn into_reply(self) -> Option<Value> {
        self.replies.into_iter().next()
    }
}

fn sanitize(text: &str) -> String {
    text.chars()
        .map(|c| if c == '\r' || c == '\n' { ' ' } else { c })
        .collect()
}

fn unknown_command(req: &CommandRequest) -> String {
    let mut msg = format!(
        "ERR unknown command '{}', with args beginning with: ",
        sanitize(&truncate(&req.spelled, 128))
    );
    let mut budget = 128usize;
    for arg in &req.args {
        if budget == 0 {
            break;
        }
        let text = truncate(&String::from_utf8_lossy(arg), budget);
        budget = budget.saturating_sub(text.len());
        msg.push_str(&format!("'{}' ", sanitize(&text)));
    }
    msg
}

fn truncate(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

fn arity_error(name: &str) -> String {
    format!(
        "ERR wrong number of arguments for '{}' command",
        name.to_ascii_lowercase()
    )
}

const NOT_AN_INTEGER: &str = "ERR value is not an integer or out of range";
const SYNTAX_ERROR: &str = "ERR syntax error";

fn parse_int(arg: &[u8]) -> Result<i64, Value> {
    parse_i64(arg).ok_or_else(|| Value::error(NOT_AN_INTEGER))
}

fn store_error(e: StoreError) -> Value {
    Value::error(e.to_string())
}

fn int_reply(r: StoreResult<i64>) -> Value {
    r.map_or_else(store_error, Value::Integer)
}

fn bool_reply(r: StoreResult<bool>) -> Value {
    r.map_or_else(store_error, |b| Value::Integer(b as i64))
}

fn bulk_reply(r: StoreResult<Option<&[u8]>>) -> Value {
    r.map_or_else(store_error, |v| Value::Bulk(v.map(<[u8]>::to_vec)))
}

fn array_reply(r: StoreResult<Vec<Vec<u8>>>) -> Value {
    r.map_or_else(store_error, Value::bulk_array)
}

/// Keyspace and subscriptions behind one serialization point.
#[derive(Debug, Default)]
pub struct Engine {
    keyspace: Keyspace,
    broker: Broker,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn keyspace(&self) -> &Keyspace {
        &self.keyspace
    }

    pub fn broker(&self) -> &Broker {
        &self.broker
    }

    /// Runs a raw request (name followed by arguments).
    pub fn execute(&mut self, session: SessionId, parts: Vec<Vec<u8>>) -> Outcome {
        match CommandRequest::new(session, parts) {
            Some(req) => self.dispatch(req),
            None => Outcome::default(),
        }
    }

    /// Tokenizes `line` as an inline command and runs it.
    pub fn exec_line(&mut self, session: SessionId, line: &[u8]) -> Outcome {
        match split_args(line) {
            Ok(parts) => self.execute(session, parts),
            Err(e) => Outcome::error(format!("ERR Protocol error: {e}")),
        }
    }

    /// Purges everything owned by a closed session.
    pub fn disconnect(&mut self, session: SessionId) {
        self.broker.disconnect(session);
    }

    pub fn dispatch(&mut self, req: CommandRequest) -> Outcome {
        let Some(desc) = registry().get(req.name.as_str()).copied() else {
            return Outcome::error(unknown_command(&req));
        };
        if !desc.accepts(req.args.len()) {
            return Outcome::error(arity_error(desc.name));
        }
        if self.broker.is_subscriber(req.session) && !desc.allowed_in_subscriber_mode {
            return Outcome::error(format!(
                "ERR Can't execute '{}': only SUBSCRIBE / UNSUBSCRIBE / PING / QUIT are allowed in this context",
                desc.name.to_ascii_lowercase()
            ));
        }
        match desc.class {
            HandlerClass::PubSub => self.pubsub(desc.cmd, req),
            HandlerClass::Connection => self.connection(desc.cmd, req),
            HandlerClass::Store => Outcome::reply(self.store(desc.cmd, req)),
        }
    }

    fn connection(&mut self, cmd: Cmd, req: CommandRequest) -> Outcome {
        let mut args = req.args;
        match cmd {
            Cmd::Ping if self.broker.is_subscriber(req.session) => {
                Outcome::reply(Value::array(vec![
                    Value::bulk("pong"),
                    Value::bulk(args.pop().unwrap_or_default()),
                ]))
            }
            Cmd::Ping => Outcome::reply(match args.pop() {
                Some(msg) => Value::bulk(msg),
                None => Value::simple("PONG"),
            }),
            Cmd::Echo => Outcome::reply(Value::bulk(args.swap_remove(0))),
            Cmd::Quit => Outcome {
                replies: vec![Value::ok()],
                close: true,
                ..Outcome::default()
            },
            Cmd::Select => match parse_i64(&args[0]) {
                Some(0) => Outcome::reply(Value::ok()),
                Some(_) => Outcome::error("ERR DB index is out of range"),
                None => Outcome::error(NOT_AN_INTEGER),
            },
            // Tolerant stub for clients that probe the command table on connect.
            Cmd::Command => Outcome::reply(Value::array(vec![])),
            Cmd::Hello => match args.first() {
                Some(v) if v.as_slice() != b"2" => {
                    Outcome::error("NOPROTO sorry, this protocol version is not supported")
                }
                _ => Outcome::reply(Value::array(vec![
                    Value::bulk("server"),
                    Value::bulk("miniredis"),
                    Value::bulk("version"),
                    Value::bulk(env!("CARGO_PKG_VERSION")),
                    Value::bulk("proto"),
                    Value::Integer(2),
                    Value::bulk("id"),
                    Value::Integer(req.session.0 as i64),
                    Value::bulk("mode"),
                    Value::bulk("standalone"),
                    Value::bulk("role"),
                    Value::bulk("master"),
                    Value::bulk("modules"),
                    Value::array(vec![]),
                ])),
            },
            Cmd::Client => {
                let sub = String::from_utf8_lossy(&args[0]).to_ascii_uppercase();
                match sub.as_str() {
                    "SETNAME" | "SETINFO" => Outcome::reply(Value::ok()),
                    "GETNAME" => Outcome::reply(Value::null_bulk()),
                    "ID" => Outcome::reply(Value::Integer(req.session.0 as i64)),
                    _ => Outcome::error(format!(
                        "ERR unknown subcommand '{}'. Try CLIENT HELP.",
                        sanitize(&String::from_utf8_lossy(&args[0]))
                    )),
                }
            }
            _ => unreachable!("{cmd:?} is not a connection command"),
        }
    }

    fn pubsub(&mut self, cmd: Cmd, req: CommandRequest) -> Outcome {
        let frames = |acks: Vec<PubSubMessage>| Outcome {
            replies: acks.iter().map(PubSubMessage::to_value).collect(),
            ..Outcome::default()
        };
        match cmd {
            Cmd::Subscribe => frames(self.broker.subscribe(req.session, &req.args)),
            Cmd::Unsubscribe => frames(self.broker.unsubscribe(req.session, &req.args)),
            Cmd::Publish => {
                let (recipients, message) = self.broker.publish(&req.args[0], &req.args[1]);
                let count = recipients.len() as i64;
                let deliveries = if recipients.is_empty() {
                    Vec::new()
                } else {
                    vec![Delivery {
                        recipients,
                        frame: message.to_value(),
                    }]
                };
                Outcome {
                    replies: vec![Value::Integer(count)],
                    deliveries,
                    close: false,
                }
            }
            _ => unreachable!("{cmd:?} is not a pub/sub command"),
        }
    }

    fn store(&mut self, cmd: Cmd, req: CommandRequest) -> Value {
        let ks = &mut self.keyspace;
        let mut args = req.args;
        match cmd {
            Cmd::Set => {
                if args.len() != 2 {
                    return Value::error(SYNTAX_ERROR);
                }
                let value = args.pop().expect("arity checked");
                let key = args.pop().expect("arity checked");
                ks.set(key, value);
                Value::ok()
            }
            Cmd::Get => bulk_reply(ks.get(&args[0])),
            Cmd::Del => Value::Integer(ks.del(&args)),
            Cmd::Exists => Value::Integer(ks.exists(&args)),
            Cmd::Type => Value::simple(ks.type_of(&args[0])),
            Cmd::DbSize => Value::Integer(ks.len() as i64),
            Cmd::FlushAll => match args.first().map(|a| a.to_ascii_uppercase()) {
                None => {
                    ks.flushall();
                    Value::ok()
                }
                Some(mode) if mode == b"SYNC" || mode == b"ASYNC" => {
                    ks.flushall();
                    Value::ok()
                }
                Some(_) => Value::error(SYNTAX_ERROR),
            },
            Cmd::HSet => {
                if args.len() % 2 == 0 {
                    return Value::error(arity_error("hset"));
                }
                let mut it = args.into_iter();
                let key = it.next().expect("arity checked");
                let mut pairs = Vec::new();
                while let (Some(field), Some(value)) = (it.next(), it.next()) {
                    pairs.push((field, value));
                }
                int_reply(ks.hset(key, pairs))
            }
            Cmd::HGet => bulk_reply(ks.hget(&args[0], &args[1])),
            Cmd::HExists => bool_reply(ks.hexists(&args[0], &args[1])),
            Cmd::HDel => int_reply(ks.hdel(&args[0], &args[1..])),
            Cmd::SAdd => {
                let key = args.remove(0);
                int_reply(ks.sadd(key, args))
            }
            Cmd::SRem => int_reply(ks.srem(&args[0], &args[1..])),
            Cmd::SMembers => array_reply(ks.smembers(&args[0])),
            Cmd::SIsMember => bool_reply(ks.sismember(&args[0], &args[1])),
            Cmd::SCard => int_reply(ks.scard(&args[0])),
            Cmd::SInter => array_reply(ks.sinter(&args)),
            Cmd::SUnion => array_reply(ks.sunion(&args)),
            Cmd::SDiff => array_reply(ks.sdiff(&args)),
            Cmd::LPush => {
                let key = args.remove(0);
                int_reply(ks.lpush(key, args))
            }
            Cmd::RPush => {
                let key = args.remove(0);
                int_reply(ks.rpush(key, args))
            }
            Cmd::LPop => ks.lpop(&args[0]).map_or_else(store_error, Value::Bulk),
            Cmd::RPop => ks.rpop(&args[0]).map_or_else(store_error, Value::Bulk),
            Cmd::LLen => int_reply(ks.llen(&args[0])),
            Cmd::LIndex => match parse_int(&args[1]) {
                Ok(index) => bulk_reply(ks.lindex(&args[0], index)),
                Err(e) => e,
            },
            Cmd::LRange => match (parse_int(&args[1]), parse_int(&args[2])) {
                (Ok(start), Ok(stop)) => array_reply(ks.lrange(&args[0], start, stop)),
                (Err(e), _) | (_, Err(e)) => e,
            },
            Cmd::ZAdd => {
                let key = args.remove(0);
                if args.len() % 2 != 0 {
                    return Value::error(SYNTAX_ERROR);
                }
                let mut pairs = Vec::with_capacity(args.len() / 2);
                let mut it = args.into_iter();
                while let (Some(score), Some(member)) = (it.next(), it.next()) {
                    match parse_score(&score) {
                        Ok(score) => pairs.push((score, member)),
                        Err(e) => return store_error(e),
                    }
                }
                int_reply(ks.zadd(key, pairs))
            }
            Cmd::ZRem => int_reply(ks.zrem(&args[0], &args[1..])),
            Cmd::ZScore => match ks.zscore(&args[0], &args[1]) {
                Ok(score) => Value::Bulk(score.map(|s| format_score(s).into_bytes())),
                Err(e) => store_error(e),
            },
            Cmd::ZCard => int_reply(ks.zcard(&args[0])),
            Cmd::ZRangeByScore => zrangebyscore(ks, &args),
            _ => unreachable!("{cmd:?} is not a store command"),
        }
    }
}

fn zrangebyscore(ks: &Keyspace, args: &[Vec<u8>]) -> Value {
    let (min, max) = match (ScoreBound::parse(&args[1]), ScoreBound::parse(&args[2])) {
        (Ok(min), Ok(max)) => (min, max),
        (Err(e), _) | (_, Err(e)) => return store_error(e),
    };
    let mut with_scores = false;
    let mut limit = None;
    let mut rest = args[3..].iter();
    while let Some(opt) = rest.next() {
        match opt.to_ascii_uppercase().as_slice() {
            b"WITHSCORES" => with_scores = true,
            b"LIMIT" => match (rest.next(), rest.next()) {
                (Some(offset), Some(count)) => match (parse_int(offset), parse_int(count)) {
                    (Ok(o), Ok(c)) => limit = Some((o, c)),
                    (Err(e), _) | (_, Err(e)) => return e,
                },
                _ => return Value::error(SYNTAX_ERROR),
            },
            _ => return Value::error(SYNTAX_ERROR),
        }
    }
    match ks.zrangebyscore(&args[0], min, max, limit) {
        Ok(entries) => {
            let mut out = Vec::with_capacity(entries.len() * (1 + with_scores as usize));
            for (member, score) in entries {
                out.push(Value::bulk(member));
                if with_scores {
                    out.push(Value::bulk(format_score(score)));
                }
            }
            Value::array(out)
        }
        Err(e) => store_error(e),
    }
}
