//! Tilt-stability analysis for inequality-constrained nonlinear programs
//! `min g(x) s.t. q_i(x) ≤ 0`.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::should_implement_trait,
    clippy::needless_range_loop
)]

pub mod analysis;
pub mod expr;
pub mod linalg;
pub mod nlp;
pub mod oracle;
pub mod polyhedra;
pub mod problem_file;
pub mod report;
pub mod sampling;
pub mod search;
pub mod stability;
pub mod validation;

pub use analysis::{analyze, AnalysisConfig, AnalysisReport, PipelineError};
pub use expr::{Expr, ExprError};
pub use linalg::{LinalgError, Mat};
pub use nlp::{ConeRep, MultiplierSet, NlpError, PointEvaluation, Problem};
pub use oracle::{OracleConfig, OracleError, OracleReport};
pub use polyhedra::{BallNorm, LpOutcome, LpStatus, PolyError, StdPolyhedron, VertexRayDecomposition};
pub use problem_file::{ParseError, ProblemFile};
pub use stability::{AnalysisError, ConditionReport, StationaryPoint, Verdict};
