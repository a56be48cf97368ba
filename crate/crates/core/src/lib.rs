//! Semantic knowledge graphs over argumentative evidence, and debate-case
//! construction as constrained weighted shortest paths over them.
//!
//! The pipeline: load a [`corpus`], pick a [`corpus::Granularity`], embed
//! each entity ([`embedding`]), index the vectors ([`annindex`]), build and
//! analyze the graph ([`semgraph`]), then chain evidence with [`pathing`]
//! and [`casebuilder`]. [`queryfilter`] supplies the filter language used
//! both for evidence search and as a path constraint; [`evalharness`] ranks
//! graphs by the spoken length of the cases they produce.

pub mod annindex;
pub mod casebuilder;
pub mod corpus;
pub mod embedding;
pub mod evalharness;
pub mod pathing;
pub mod queryfilter;
pub mod semgraph;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
