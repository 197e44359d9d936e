//! Classifier ranking, top-k selection, and voting ensembles.

mod leaderboard;
mod selection;
mod voting;

pub use leaderboard::{build_leaderboard, Leaderboard};
pub use selection::{quantize_score, select_top_k, SelectionCriterion};
pub use voting::{
    hard_vote, soft_vote, soft_vote_probs, validate_weights, EnsembleModel, VotingMode,
};
