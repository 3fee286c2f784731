//! Per-window scorers. A scorer sees one circular window of a scene and
//! returns a `W × (W + 1)` logit matrix for exclusive classification.

pub mod mlp;
pub mod oracle;
pub mod train;

pub use mlp::{loss_and_grad, mlp_forward, read_model, write_model, ScorerModel};
pub use oracle::{in_window_labels, OracleScorer};
pub use train::{build_examples, train, TrainConfig, TrainOutcome, TrainingExample};

use crate::domain::Scene;
use crate::error::Result;
use crate::preprocess::{FeatureVector, FEATURE_LEN};
use crate::rankcore::WindowScoreMatrix;

/// Window context appended to each row: mean and max of the members'
/// local fixation share and local map peak.
pub const CONTEXT_LEN: usize = 4;
pub const INPUT_LEN: usize = FEATURE_LEN + CONTEXT_LEN;

pub type InputRow = [f64; INPUT_LEN];

/// One window of a scene. `members` index into `scene.proposals` and
/// `features`.
#[derive(Debug, Clone, Copy)]
pub struct WindowContext<'a> {
    pub scene: &'a Scene,
    pub features: &'a [FeatureVector],
    pub members: &'a [usize],
}

pub trait WindowScorer: Sync {
    fn score_window(&self, ctx: &WindowContext<'_>) -> Result<WindowScoreMatrix>;
}

/// Builds the scorer input rows for a window. Dummy members carry zero
/// features and still count toward the context statistics.
pub fn window_inputs(features: &[FeatureVector], members: &[usize]) -> Vec<InputRow> {
    let stat = |idx: usize| {
        let vals = members.iter().map(|&m| features[m].get(idx));
        let sum: f64 = vals.clone().sum();
        let max = vals.fold(0.0f64, f64::max);
        (sum / members.len().max(1) as f64, max)
    };
    let (share_mean, share_max) = stat(FeatureVector::FIX_SHARE_LOCAL);
    let (peak_mean, peak_max) = stat(FeatureVector::MAP_MAX_LOCAL);
    members
        .iter()
        .map(|&m| {
            let mut row = [0.0; INPUT_LEN];
            row[..FEATURE_LEN].copy_from_slice(features[m].as_slice());
            row[FEATURE_LEN..].copy_from_slice(&[share_mean, share_max, peak_mean, peak_max]);
            row
        })
        .collect()
}
