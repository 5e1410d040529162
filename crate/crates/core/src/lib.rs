//! Fair rank-minimizing random assignment with exact rational arithmetic.
//!
//! The crate computes the uniform rank-minimizing mechanism and its modified
//! variant, the refusal transform that lets agents swap unacceptable
//! assignments for the outside option, outside-option-demotion strategies,
//! and a brute-force strategic dominance oracle over every opponent profile.

pub mod assignment;
pub mod error;
pub mod market;
pub mod mechanisms;
pub mod strategy;
pub mod sweep;

pub use assignment::{
    decompose, is_wasteful, rank_value, strictly_prefers, weakly_prefers, Assignment,
    Decomposition, DeterministicAssignment, Rational, WasteWitness,
};
pub use error::{Error, Result};
pub use market::{AgentId, Market, PreferenceOrder, Profile, TypeId, TypeSpec};
pub use mechanisms::{
    check_ete, check_weak_ete, detect_modified_pattern, enumerate_rank_minimizers,
    modified_mechanism, uniform_mechanism, Budget, Mechanism, MechanismKind, ModifiedPattern,
    RankMinimizingSet, Rule,
};
pub use strategy::{
    check_dominance, condition_f_witnesses, full_extension, ods_set, refusal_transform,
    targeted_demotion, truth_favoring_profile, DominanceQuery, DominanceVerdict, Witness,
};
pub use sweep::{all_profiles, run_sweep, sample_profiles, Property, SweepOptions, SweepReport};
