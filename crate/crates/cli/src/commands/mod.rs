pub mod eval;
pub mod featurize;
pub mod perturb;
pub mod predict;
pub mod synth;
pub mod track;
pub mod train;
