pub mod dynamics;
pub mod fit;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod multiplier;
pub mod probe;
pub mod quad;
pub mod seqnorms;
pub mod signal;
pub mod tf;
