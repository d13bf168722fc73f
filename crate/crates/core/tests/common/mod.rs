#![allow(dead_code)]

pub mod eval_oracle;
pub mod gen;
pub mod grammar;
pub mod grammar_oracle;
pub mod sampling;
