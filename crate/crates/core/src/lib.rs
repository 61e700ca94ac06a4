//! Analysis of self-similar measures of finite type on the line.

pub mod cone;
pub mod config;
pub mod enumerate;
pub mod expr;
pub mod field;
pub mod ifs;
pub mod loops;
pub mod lp;
pub mod matrix;
pub mod net;
pub mod perron;
pub mod poly;
pub mod spectra;
