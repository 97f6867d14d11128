pub mod math;
pub mod dynamics;
pub mod trajectory;
pub mod control;
pub mod data;
pub mod sim;
pub mod estimate;
pub mod par;
pub mod models;
pub mod bench;
pub mod config;
