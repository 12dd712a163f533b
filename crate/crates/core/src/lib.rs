//! Bottom-up multi-person pose parsing with part affinity fields.
//!
//! Ground-truth confidence maps and affinity fields are rendered from
//! annotated scenes ([`fields`]), peaks are extracted as part candidates
//! ([`detect`]), candidate pairs are scored by a line integral over the
//! affinity field and matched per limb ([`associate`]), and the matched
//! connections are assembled into people ([`parse`]). [`eval`] closes the
//! loop on synthetic scenes; [`io`] handles the on-disk artifacts.

pub mod associate;
pub mod detect;
pub mod eval;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod parse;
pub mod topology;

pub use associate::{greedy_match, hungarian_match, line_integral, AssociationConfig, Matcher, ScoreMatrix};
pub use detect::{detect_candidates, DetectConfig, PartCandidate};
pub use fields::{render_scene_fields, weighted_l2_loss, FieldStack, Grid, RenderParams, Scene};
pub use geometry::Point;
pub use parse::{exhaustive_parse, parse_poses, ParseConfig, ParseResult};
pub use topology::{EdgeClassification, SkeletonTopology};
