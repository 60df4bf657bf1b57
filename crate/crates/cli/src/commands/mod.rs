pub mod dataset;
pub mod evaluate;
pub mod extract;
pub mod replay;
pub mod serve;
pub mod train;
