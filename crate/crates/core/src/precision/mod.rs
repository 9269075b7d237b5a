//! Banded conditional-independence graphs and G-Wishart precision laws.

mod graph;
mod gwishart;

pub use graph::{GraphKind, PrecisionGraph};
pub use gwishart::{gwishart_posterior, sample_gwishart, GWishartSpec, PrecisionMatrix};
