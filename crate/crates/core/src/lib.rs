pub mod bench;
pub mod network;
pub mod powerflow;
pub mod regression;
pub mod sparse;
pub mod svg;
pub mod ybus;
