//! Matrix groups over `Z` and `Z/p`: elements, generating sets, word-metric
//! balls and multiplication tables.

mod ball;
mod element;
mod generators;
mod ring;
mod table;

pub use ball::{generate_ball, generate_ball_with, hex_digest, Ball, BallOptions};
pub use element::GroupElement;
pub use generators::{elementary_generators, GeneratingSet};
pub use ring::Ring;
pub use table::{multiplication_table, BallBundle, MultiplicationTable};
