pub mod eval;
pub mod predict;
pub mod segment;
pub mod synth;
pub mod train;
