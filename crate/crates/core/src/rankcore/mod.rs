//! Inference over circular windows: schedule windows, score each one,
//! classify it exclusively, then combine the votes.

pub mod acb;
pub mod ecs;
pub mod hungarian;
pub mod votes;

pub use acb::{acb_sequences, Window, DEFAULT_WINDOW};
pub use ecs::{
    classify_window, exclusive_classify, log_softmax, softmax, WindowAssignment, WindowScoreMatrix,
};
pub use hungarian::{assignment_cost, hungarian};
pub use votes::{aggregate_votes, VoteState, WindowOutcome};

use crate::domain::{Ranking, Scene};
use crate::error::{Error, Result};
use crate::preprocess::FeatureVector;
use crate::scorer::{WindowContext, WindowScorer};

pub fn rank_scene<S: WindowScorer + ?Sized>(
    scene: &Scene,
    features: &[FeatureVector],
    scorer: &S,
    window: usize,
) -> Result<Ranking> {
    let n = scene.proposals.len();
    let dummy: Vec<bool> = scene.proposals.iter().map(|p| p.is_dummy).collect();
    let ids: Vec<u32> = scene.proposals.iter().map(|p| p.id).collect();
    let outcomes = acb_sequences(n, window)?
        .into_iter()
        .map(|w| {
            let ctx = WindowContext {
                scene,
                features,
                members: &w.members,
            };
            let scores = scorer.score_window(&ctx)?;
            if scores.rows() != window {
                return Err(Error::ShapeMismatch(format!(
                    "scorer returned {} rows for a window of {window}",
                    scores.rows()
                )));
            }
            let mask: Vec<bool> = w.members.iter().map(|&m| dummy[m]).collect();
            let (assignment, probs) = classify_window(&scores, &mask);
            Ok(WindowOutcome {
                window: w,
                assignment,
                probs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_votes(&outcomes, &ids, &dummy, window)
}
