pub mod orbit;
pub mod geometry;
pub mod channel;
pub mod swap;
pub mod oracle;
pub mod engine;
pub mod config;
pub mod output;
