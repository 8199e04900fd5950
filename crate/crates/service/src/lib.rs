pub mod config;
pub mod fixtures;
pub mod http;
pub mod jobs;
pub mod pipeline;
pub mod report;
