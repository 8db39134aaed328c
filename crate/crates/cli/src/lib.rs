//! Run descriptions, commands and output formats behind the `smallball`
//! binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;
pub mod verify;
