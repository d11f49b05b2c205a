pub mod dataset;
pub mod graph;
pub mod label;
pub mod models;
pub mod text;
pub mod train;
pub mod voting;

pub use label::Label;
