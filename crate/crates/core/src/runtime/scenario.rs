//! Event definitions and injection schedules (`.scn` files), and the
//! sources that feed events to the scheduler.
//!
//! ```text
//! event signalLost := retract phone_on;
//! event wifiBack := tell wifi_on; tell signal(3);
//! at 7 inject signalLost
//! ```

use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, TryRecvError};

use crate::datalog::{parse_atom_at, DatalogError, Fact};
use crate::lexer::{Cursor, SyntaxError, Tok};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Effect {
    Tell(Fact),
    Retract(Fact),
}

/// A named event and its effect on the context.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventDef {
    pub name: String,
    pub effects: Vec<Effect>,
}

impl EventDef {
    pub fn new(name: impl Into<String>, effects: Vec<Effect>) -> Self {
        EventDef {
            name: name.into(),
            effects,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    /// Master-step index at which the event arrives.
    pub at: usize,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub events: BTreeMap<String, EventDef>,
    /// Sorted by `at`; ties keep file order.
    pub injections: Vec<Injection>,
}

impl Scenario {
    /// The same events, never injected.
    pub fn without_injections(&self) -> Scenario {
        Scenario {
            events: self.events.clone(),
            injections: Vec::new(),
        }
    }

    pub fn source(&self) -> ScheduledSource {
        ScheduledSource {
            pending: self.injections.clone(),
            next: 0,
        }
    }
}

pub fn parse_scenario(src: &str) -> Result<Scenario, SyntaxError> {
    let mut cur = Cursor::new(src)?;
    let mut sc = Scenario::default();
    while !cur.at_eof() {
        if cur.eat_keyword("event") {
            let at = cur.token().clone();
            let name = cur.expect_ident("an event name")?;
            cur.expect(&Tok::Define)?;
            let mut effects = Vec::new();
            loop {
                let tell = if cur.eat_keyword("tell") {
                    true
                } else if cur.eat_keyword("retract") {
                    false
                } else {
                    break;
                };
                let fact = ground_fact(&mut cur)?;
                cur.expect(&Tok::Semi)?;
                effects.push(if tell {
                    Effect::Tell(fact)
                } else {
                    Effect::Retract(fact)
                });
            }
            if sc.events.contains_key(&name) {
                return Err(SyntaxError::new(
                    at.line,
                    at.column,
                    format!("event `{name}` defined twice"),
                ));
            }
            sc.events.insert(name.clone(), EventDef { name, effects });
        } else if cur.eat_keyword("at") {
            let at = cur.token().clone();
            let step = match cur.peek() {
                Tok::Int(n) if *n >= 0 => *n as usize,
                _ => return Err(cur.unexpected("a step index")),
            };
            cur.bump();
            cur.expect_keyword("inject")?;
            let event = cur.expect_ident("an event name")?;
            if sc.injections.last().is_some_and(|prev| prev.at > step) {
                return Err(SyntaxError::new(
                    at.line,
                    at.column,
                    "injection steps must be nondecreasing",
                ));
            }
            sc.injections.push(Injection { at: step, event });
        } else {
            return Err(cur.unexpected("`event` or `at`"));
        }
    }
    Ok(sc)
}

fn ground_fact(cur: &mut Cursor) -> Result<Fact, SyntaxError> {
    let parens = cur.eat(&Tok::LParen);
    let start = cur.token().clone();
    let atom = parse_atom_at(cur)?;
    if parens {
        cur.expect(&Tok::RParen)?;
    }
    atom.to_fact().ok_or_else(|| {
        let var = atom.vars().next().unwrap_or_default().to_string();
        SyntaxError::new(
            start.line,
            start.column,
            DatalogError::RangeRestriction(var).to_string(),
        )
    })
}

/// Supplies events to the scheduler.
pub trait EventSource {
    /// Events arriving before master step `step`. When `idle` is set the
    /// program has nothing else to do, and a source with events still to
    /// come should deliver the next of them now.
    fn poll(&mut self, step: usize, idle: bool) -> Vec<String>;

    /// No further events will ever arrive.
    fn exhausted(&self) -> bool;
}

/// Replays a scenario's injection schedule.
#[derive(Debug, Clone)]
pub struct ScheduledSource {
    pending: Vec<Injection>,
    next: usize,
}

impl EventSource for ScheduledSource {
    fn poll(&mut self, step: usize, idle: bool) -> Vec<String> {
        let mut out = Vec::new();
        while let Some(inj) = self.pending.get(self.next) {
            if inj.at > step && !(idle && out.is_empty()) {
                break;
            }
            out.push(inj.event.clone());
            self.next += 1;
        }
        out
    }

    fn exhausted(&self) -> bool {
        self.next >= self.pending.len()
    }
}

/// Live ingestion: events sent by another thread through a channel. The
/// scheduler sees each one at the next injection opportunity; when the
/// program is idle it blocks until an event arrives or every sender is gone.
#[derive(Debug)]
pub struct ChannelSource {
    rx: Receiver<String>,
    closed: bool,
}

impl ChannelSource {
    pub fn new(rx: Receiver<String>) -> Self {
        ChannelSource { rx, closed: false }
    }
}

impl EventSource for ChannelSource {
    fn poll(&mut self, _step: usize, idle: bool) -> Vec<String> {
        let mut out = Vec::new();
        if self.closed {
            return out;
        }
        loop {
            match self.rx.try_recv() {
                Ok(ev) => out.push(ev),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    self.closed = true;
                    return out;
                }
            }
        }
        if idle && out.is_empty() {
            match self.rx.recv() {
                Ok(ev) => out.push(ev),
                Err(_) => self.closed = true,
            }
        }
        out
    }

    fn exhausted(&self) -> bool {
        self.closed
    }
}
