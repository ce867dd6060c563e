//! Scalar Gaussian machinery: densities, one-sided truncated moments, the
//! density of a truncated Gaussian pushed through `a X + W`, adaptive
//! quadrature and a bracketing root finder.

mod compound;
mod normal;
mod quadrature;
mod root;

pub use compound::{compound_density, conditional_moments_compound, CompoundMoments};
pub use normal::{
    normal_pdf, std_normal_cdf, std_normal_pdf, truncated_moments, TruncatedGaussian,
    TruncatedMoments,
};
pub use quadrature::{integrate, QuadratureSpec};
pub use root::find_root;
