//! Local exponential sums, Ramanujan sums, the singular series and a toy
//! circle-method harness.

pub mod circle;
pub mod singular;
pub mod sums;

pub use circle::{
    big_theta, hat_t, hat_t_fourier, main_term_sign_count, major_arc_decomposition, representation_number,
    representation_table, upsilon, ArcParams, MajorArcs, RepresentationTable,
};
pub use singular::{local_factor_deviation, singular_series, LocalFactor, SingularParams, SingularSeries};
pub use sums::{
    kloosterman, kloosterman_bound_ratio, kloosterman_bound_table, ramanujan, s_avg, s_avg_bound_ratio, sf_closed,
    sf_direct, sf_direct_table, GcdSplit, SfParams,
};
