//! Command-line frontend: argument handling, JSON reports and the built-in
//! corpus of presentations.

pub mod app;
pub mod corpus;
pub mod report;

pub use app::run;
