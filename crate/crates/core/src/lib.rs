pub mod fitting;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod units;
