pub mod evaluate;
pub mod gridsearch;
pub mod predict;
pub mod prepare;
pub mod tables;
pub mod train;
