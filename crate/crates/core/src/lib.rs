pub mod config;
pub mod irregularity;
pub mod kernel;
pub mod moments;
pub mod projection;
pub mod quad;
pub mod real;
pub mod report;
pub mod symbolic;
pub mod weight;
