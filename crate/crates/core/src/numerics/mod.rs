//! Exact rationals and outward-rounded intervals.
//!
//! Rationals are `num_rational::BigRational`, always kept normalized. Intervals
//! carry `f64` endpoints and every operation rounds its endpoints outward, so
//! the true result of the corresponding real operation is always enclosed.

mod hexfloat;
mod interval;
mod rational;

pub use hexfloat::{format_hex, parse_hex};
pub use interval::Interval;
pub use rational::{
    float_to_rational, float_to_rational_truncated, format_rational, parse_rational, rational_to_interval, round_down,
    round_up, BigRational,
};
