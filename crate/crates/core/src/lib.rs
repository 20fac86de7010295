//! Numerical Randers/Zermelo geometry: Minkowski norms, fundamental tensors,
//! Finsler geodesics, submersions and checks on singular foliations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod foliation;
pub mod geodesic;
pub mod manifold;
pub mod minkowski;
pub mod numkit;
pub mod randers;
pub mod report;
pub mod submersion;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
