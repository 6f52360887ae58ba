//! Diamond-norm intervals, capacity and strong-converse bounds, and output
//! spectrum extremes.

mod bounds;
mod diamond;
mod output;

pub use bounds::{
    capacity_bound_general, capacity_bound_left, sc_error_floor, strong_converse_q2,
    strong_converse_rate_ts, transposition_bound, two_way_error_bound, BoundReport, BoundUnit,
    Constituent, ErrorFloor, FormulaId, STRUCTURE_TOL,
};
pub use diamond::{diamond_interval, witness_value, NormInterval, UpperMethod};
pub use output::{
    check_additivity_lmin, lambda_min_out, output_p_extreme, AdditivityReport, ExtremeReport,
    Extremum,
};
