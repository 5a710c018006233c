//! Hybrid evolutionary optimization toolkit.
//!
//! Three population engines — a real-coded genetic algorithm, particle swarm
//! optimization, and CMA-ES — share one ask/tell contract and can be chained
//! into hybrid runs by handing the final population of one stage to the next.
//! The bundled synthetic waterflood proxy poses an 18-well, 72-variable BHP
//! control problem with weighted-cumulative-fluid and net-present-value
//! objectives; Rastrigin and sphere benchmarks cover the algorithmic side.
//! Batches evaluate in parallel on an in-process pool or through a
//! shared-directory job queue, with results independent of worker count.

pub mod bounds;
pub mod config;
pub mod engines;
pub mod error;
pub mod history;
pub mod hybrid;
pub mod objectives;
pub mod parallel;
pub mod population;
pub mod reservoir;
pub mod rng;

pub use bounds::{clip, Bounds, ControlVector};
pub use error::{Error, Result};
pub use history::RunHistory;
pub use population::{Individual, Population};
pub use rng::RngStream;
