//! An interpreter and event-driven adaptation runtime for a small
//! context-oriented functional language.
//!
//! The running context is a stratified Datalog knowledge base
//! ([`datalog::Context`]). Programs adapt to it through behavioural
//! variations, whose cases are guarded by Datalog goals, and through
//! context-dependent parameter bindings (`dlet`). Asynchronous events change
//! the context; the [`runtime`] queues them, runs their handlers atomically
//! and, through checkpoints recorded at dispatch time, re-selects a case
//! whose goal an event has falsified.

pub mod ast;
pub mod bundle;
pub mod datalog;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod runtime;
pub mod subst;
