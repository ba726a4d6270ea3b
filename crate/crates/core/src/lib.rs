// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod accounting;
pub mod dispatch;
pub mod harness;
pub mod ingest;
pub mod mei;
