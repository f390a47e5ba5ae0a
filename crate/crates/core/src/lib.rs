pub mod assessment;
pub mod error;
pub mod scope;
pub mod taxonomy;
pub mod monitoring;
pub mod planner;
