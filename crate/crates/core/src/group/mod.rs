//! Group elements, finitely supported probability measures, convolution and
//! return-probability estimates of the spectral radius.

mod element;
mod measure;
mod returns;

pub(crate) use element::is_prime;
pub use element::{sl_order, FreeWord, GroupElement, GroupKind, MatModP, MatZ};
pub use measure::{check_adapted, convolve, generated_subgroup, ProbMeasure, WEIGHT_TOL};
pub use returns::{
    spectral_radius_return, spectral_radius_return_with, ReturnConfig, ReturnMethod,
    ReturnProbabilitySeries,
};
