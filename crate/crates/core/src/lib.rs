pub mod config;
pub mod database;
pub mod demo;
pub mod evaluation;
pub mod geometry;
pub mod language;
pub mod layout;
pub mod nieon;
pub mod policies;
pub mod report;
pub mod route;
pub mod scenario;
pub mod scoring;
pub mod severity;
pub mod sim;
