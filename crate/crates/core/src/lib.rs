pub mod exact;
pub mod grid;
pub mod model_io;
pub mod net;
pub mod numeric;
pub mod query;
pub mod smt;
pub mod verdict;
