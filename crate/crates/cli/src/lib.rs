//! Command-line tool and HTTP session service for the day-trip design
//! assistant.

pub mod commands;
pub mod server;
