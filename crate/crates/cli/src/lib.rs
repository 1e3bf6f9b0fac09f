//! Service layer for the `fm` tool: the on-disk workspace, the session
//! REPL and the HTTP gateway.

pub mod cli;
pub mod http;
pub mod repl;
pub mod workspace;

pub use workspace::Workspace;
