//! Active reward learning as an information MDP.
//!
//! A meta-state couples a dataset of trajectories with a particle belief over
//! linear reward weights `ω`. Queries of five types (labels, comparisons,
//! demonstrations, feature labels, corrections) are actions; human answers are
//! observations drawn from a Boltzmann-rational model; transitions update the
//! dataset and condition the belief; information gain scores queries.
//!
//! The numerical core is generic over [`Real`]; `f64` aliases are provided at
//! the crate root for everyday use.

pub mod acquisition;
pub mod belief;
pub mod domain;
pub mod humans;
pub mod imdp;
pub mod scalar;
pub mod seed;

pub use domain::{Action, Cell, FeatureKind, FeatureMap, GridWorld, Trajectory};
pub use imdp::{
    Annotation, LabelValue, QueryKind, RelearnMode, Relevance, Response, TransitionConfig,
    TransitionRecord,
};
pub use scalar::Real;

pub type Belief = belief::Belief<f64>;
pub type Evidence = belief::Evidence<f64>;
pub type FeatureVector = domain::FeatureVector<f64>;
pub type ObservationModel = humans::ObservationModel<f64>;
pub type SimulatedHuman = humans::SimulatedHuman<f64>;
pub type Candidate = imdp::Candidate<f64>;
pub type Query = imdp::Query<f64>;
pub type InfoState = imdp::InfoState<f64>;
pub type LabeledItem = imdp::LabeledItem<f64>;
pub type ScoredQuery = acquisition::ScoredQuery<f64>;
