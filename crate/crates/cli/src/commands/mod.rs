pub mod control_runs;
pub mod eval;
pub mod gen_data;
pub mod report;
pub mod train;
