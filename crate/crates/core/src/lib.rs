#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimation;
pub mod forecast;
pub mod inference;
pub mod innovations;
pub mod io;
pub mod model;
pub mod optim;
pub mod rng;
pub mod simstudy;
pub mod thinning;
pub mod transition;
