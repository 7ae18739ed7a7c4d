pub mod benchmarks;
pub mod channel;
pub mod config;
pub mod ddqn;
pub mod flow_split;
pub mod io;
pub mod power;
pub mod rates;
pub mod rng;
pub mod slicing;
pub mod sim;
