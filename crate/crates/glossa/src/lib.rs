//! Runtime side of the glossing system: the chat-completion gateway, the
//! corpus glossing pipeline, on-disk stores, the annotation service and the
//! `glossa` command line. The algorithms themselves live in `glossa-core`.

pub mod cli;
pub mod corpus;
pub mod feedback_log;
pub mod gateway;
pub mod pipeline;
pub mod service;
pub mod snapshot;
pub mod store;

pub use glossa_core as core;
