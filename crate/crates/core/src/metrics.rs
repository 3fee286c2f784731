//! Ranking agreement metrics, the binarization threshold used to turn a
//! saliency map into a ranking, and dataset-level evaluation reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{GrayMap, Proposal, Ranking, Scene};
use crate::error::{Error, Result};
use crate::ingest::read_ranking;

fn check_same_ids(pred: &Ranking, gt: &Ranking) -> Result<()> {
    if pred.labels().keys().ne(gt.labels().keys()) {
        return Err(Error::SceneMismatch(format!(
            "proposal ids differ: {:?} vs {:?}",
            pred.labels().keys().collect::<Vec<_>>(),
            gt.labels().keys().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Order values with 0 moved behind every salient order.
fn order_values(r: &Ranking) -> Vec<f64> {
    let last = r.n_salient() as f64 + 1.0;
    r.iter()
        .map(|(_, o)| if o == 0 { last } else { f64::from(o) })
        .collect()
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Tie-corrected Spearman correlation between two rankings of the same
/// proposals. `Ok(None)` when fewer than two proposals or a constant side
/// leaves the coefficient undefined.
pub fn srcc(pred: &Ranking, gt: &Ranking) -> Result<Option<f64>> {
    check_same_ids(pred, gt)?;
    if pred.len() < 2 {
        return Ok(None);
    }
    Ok(pearson(
        &mid_ranks(&order_values(pred)),
        &mid_ranks(&order_values(gt)),
    ))
}

/// F1 of the salient (order > 0) versus non-salient split.
pub fn f1_salient(pred: &Ranking, gt: &Ranking) -> Result<f64> {
    check_same_ids(pred, gt)?;
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for ((_, p), (_, g)) in pred.iter().zip(gt.iter()) {
        match (p > 0, g > 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 && tp + fnn == 0 {
        return Ok(1.0);
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fnn) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// `(1 / (n * lambda)) * sum_i S(Q_i) / sqrt(size(Q_i))` over the real
/// proposals, with `S` the sum of gray values inside the box.
pub fn map_threshold_for(map: &GrayMap, proposals: &[Proposal], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!(
            "lambda must lie in (0,1], got {lambda}"
        )));
    }
    let real: Vec<&Proposal> = proposals.iter().filter(|p| !p.is_dummy).collect();
    if real.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = real
        .iter()
        .map(|p| {
            let sum: u64 = map.pixels_in(&p.bbox).map(u64::from).sum();
            sum as f64 / p.bbox.sqrt_size()
        })
        .sum();
    Ok(total / (real.len() as f64 * lambda))
}

pub fn map_threshold(scene: &Scene, lambda: f64) -> Result<f64> {
    let map = scene
        .fixation_map
        .as_ref()
        .ok_or_else(|| Error::MissingFixationMap(scene.scene_id.clone()))?;
    map_threshold_for(map, &scene.proposals, lambda)
}

/// Pixels inside each real proposal brighter than `threshold`.
pub fn white_counts(map: &GrayMap, proposals: &[Proposal], threshold: f64) -> Vec<(u32, f64)> {
    proposals
        .iter()
        .filter(|p| !p.is_dummy)
        .map(|p| {
            let n = map
                .pixels_in(&p.bbox)
                .filter(|&v| f64::from(v) > threshold)
                .count();
            (p.id, n as f64)
        })
        .collect()
}

/// Ranks proposals by white-pixel count after binarizing `map` at the
/// scene's threshold.
pub fn rank_from_saliency_map(scene: &Scene, map: &GrayMap, lambda: f64) -> Result<Ranking> {
    if map.width() != scene.width || map.height() != scene.height {
        return Err(Error::invariant(
            "saliency map",
            format!(
                "{}x{} map for {}x{} scene {}",
                map.width(),
                map.height(),
                scene.width,
                scene.height,
                scene.scene_id
            ),
        ));
    }
    let t = map_threshold_for(map, &scene.proposals, lambda)?;
    Ok(Ranking::from_scores(&white_counts(
        map,
        &scene.proposals,
        t,
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub id: String,
    /// `None` when the coefficient is undefined for this scene.
    pub srcc: Option<f64>,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: Vec<SceneScore>,
    /// Mean over scenes with a defined SRCC.
    pub mean_srcc: Option<f64>,
    pub mean_f1: Option<f64>,
    /// Scenes left out of `mean_srcc`.
    pub skipped: usize,
}

pub fn evaluate(pred: &[(String, Ranking)], gt: &[(String, Ranking)]) -> Result<EvalReport> {
    let pred_map: BTreeMap<&str, &Ranking> = pred.iter().map(|(id, r)| (id.as_str(), r)).collect();
    let gt_map: BTreeMap<&str, &Ranking> = gt.iter().map(|(id, r)| (id.as_str(), r)).collect();
    if pred_map.len() != pred.len() || gt_map.len() != gt.len() {
        return Err(Error::SceneMismatch("duplicate scene id".into()));
    }
    if pred_map.keys().ne(gt_map.keys()) {
        let missing: Vec<&&str> = gt_map
            .keys()
            .filter(|k| !pred_map.contains_key(*k))
            .collect();
        let extra: Vec<&&str> = pred_map
            .keys()
            .filter(|k| !gt_map.contains_key(*k))
            .collect();
        return Err(Error::SceneMismatch(format!(
            "missing predictions for {missing:?}, unexpected scenes {extra:?}"
        )));
    }
    let scenes = gt_map
        .iter()
        .map(|(id, g)| {
            let p = pred_map[id];
            let wrap = |e: Error| match e {
                Error::SceneMismatch(m) => Error::SceneMismatch(format!("scene {id}: {m}")),
                other => other,
            };
            Ok(SceneScore {
                id: id.to_string(),
                srcc: srcc(p, g).map_err(wrap)?,
                f1: f1_salient(p, g).map_err(wrap)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = scenes.iter().filter_map(|s| s.srcc).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let f1s: Vec<f64> = scenes.iter().map(|s| s.f1).collect();
    Ok(EvalReport {
        mean_srcc: mean(&defined),
        mean_f1: mean(&f1s),
        skipped: scenes.len() - defined.len(),
        scenes,
    })
}

pub fn evaluate_files(pred: impl AsRef<Path>, gt: impl AsRef<Path>) -> Result<EvalReport> {
    evaluate(&read_ranking(pred)?, &read_ranking(gt)?)
}
