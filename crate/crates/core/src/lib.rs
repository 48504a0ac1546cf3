//! Dataset quality assessment through autoencoder compression and decision-tree complexity.
//!
//! Datasets are compressed by trained autoencoders, unrestricted Gini decision trees are fit
//! on stratified samples of the raw and embedded representations, and the trees' leaf count
//! and maximum depth serve as a comparative measure of how much learnable structure a
//! dataset carries.

pub mod data;
pub mod cart;
pub mod nn;
pub mod harness;
pub mod report;
