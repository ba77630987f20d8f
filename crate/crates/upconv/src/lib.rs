pub mod cli;
pub mod config;
pub mod manifest;
pub mod output;
pub mod validate;
