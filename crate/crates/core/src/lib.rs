//! Privacy risk of tag-forgery strategies in social-tagging systems and
//! their effect on a content-based recommender.
//!
//! User and item activity is summarized as category histograms
//! ([`profiles::Profile`]). Privacy risk is the KL divergence of a user's
//! apparent profile from the population profile ([`privacy`]). Users may
//! mix forged tags into their profile following one of three strategies
//! ([`forgery`]); the optimal one is computed by [`simplexopt`]. The
//! [`evaluation`] module runs the forgery-rate sweep and measures precision
//! at V of a cosine-similarity recommender ([`recommender`]).

pub mod error;
pub mod evaluation;
pub mod folksonomy;
pub mod forgery;
pub mod privacy;
pub mod profiles;
pub mod recommender;
pub mod report;
pub mod simplexopt;

pub use error::{Error, ErrorClass, Result};
pub use evaluation::{
    count_risk_increases, make_split, make_split_with_fraction, precision_at_v, run_sweep, PoolMode, SplitAssignment,
    SweepConfig, SweepReport, SweepResult, UserOutcome,
};
pub use folksonomy::{
    dataset_stats, load_annotations, synthesize, write_annotations, CategorySet, Folksonomy, StatsReport, SynthSpec,
};
pub use forgery::{apparent_profile, load_tmn_distribution, ForgeryConfig, Strategy};
pub use privacy::{entropy, kl_divergence, privacy_risk, risk_reduction, PrivacyRisk};
pub use profiles::{item_profile, population_profile, restrict_to_training, user_profile, PopulationMode, Profile};
pub use recommender::{cosine_similarity, rank_items, CandidatePool, RankedList};
pub use simplexopt::{solve_optimal_forgery, verify_kkt, OptimalForgery};
