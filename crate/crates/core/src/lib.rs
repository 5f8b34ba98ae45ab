pub mod agent;
pub mod chart;
pub mod ingest;
pub mod markup;
pub mod semantics;
pub mod stats;
