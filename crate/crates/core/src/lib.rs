//! Cooperative design assistance for day-trip planning.
//!
//! Design is modelled as a decision process ([`design`]). A generative user
//! model ([`user_model`]) describes how a bounded-rational designer picks
//! design changes; the [`assistant`] inverts it with a particle posterior and
//! recommends changes expected to help. [`trip`] is the concrete domain,
//! [`harness`] runs simulated assisted/unassisted experiments and [`session`]
//! drives an interactive session with a human designer.

pub mod assistant;
pub mod design;
pub mod error;
pub mod harness;
pub mod seeding;
pub mod session;
pub mod trip;
pub mod user_model;

pub use assistant::{
    init_posterior, update_posterior, Assistant, AssistantConfig, Particle, ParticleSet, UtilityPrior,
    WhatIfReport,
};
pub use design::{DesignDomain, Dynamics, OutcomeVector};
pub use error::{Error, Result};
pub use harness::{run_experiment, run_single, Arm, ExperimentConfig, ExperimentResult, RunTrace};
pub use trip::{
    City, CityConfig, PoiId, PointOfInterest, TripChange, TripConfig, TripDesign, TripDomain, TripOutcomes,
    TripUtilityParams, TripUtilityPrior,
};
pub use user_model::{ChoiceObservation, UserModelConfig, UserModelParams, UserModelPrior};
