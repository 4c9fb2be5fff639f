//! HTTP service and CLI for the PC troubleshooting knowledge base.

pub mod api;
pub mod cli;
pub mod config;
pub mod fetch;
pub mod server;
pub mod sessions;

pub use config::ServiceConfig;
