//! Dataset-directory stages used by the command-line tool.
//!
//! A dataset directory holds `scenes/<id>.json`, `maps/<id>.pgm` and, once
//! preprocessed, `features/<id>.feat`. Results come back in scene-id order
//! whatever the execution mode.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::domain::{Ranking, Scene};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gtgen::{self, GtConfig};
use crate::ingest::{
    parse_pgm, parse_scene, read_features, scene_paths, write_features, write_scene,
};
use crate::metrics::rank_from_saliency_map;
use crate::preprocess::{extract_scene_features, filter_proposals, FeatureVector, FilterConfig};
use crate::rankcore::rank_scene;
use crate::scorer::{
    build_examples, train, ScorerModel, TrainConfig, TrainOutcome, TrainingExample, WindowScorer,
};

pub type SceneRankings = Vec<(String, Ranking)>;

pub fn load_scenes(dir: impl AsRef<Path>, exec: Execution) -> Result<Vec<Scene>> {
    let paths = scene_paths(dir)?;
    let mut scenes = exec::try_map(&paths, exec, |p| parse_scene(p))?;
    scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    if let Some(w) = scenes.windows(2).find(|w| w[0].scene_id == w[1].scene_id) {
        return Err(Error::SceneMismatch(format!(
            "scene id {} appears twice",
            w[0].scene_id
        )));
    }
    Ok(scenes)
}

pub fn feature_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}.feat"))
}

/// Filters proposals, writes the filtered scenes and maps to `out`, and the
/// feature sidecars to `out/features`.
pub fn preprocess_dir(
    input: &Path,
    out: &Path,
    cfg: &FilterConfig,
    exec: Execution,
) -> Result<usize> {
    cfg.validate()?;
    let scenes = load_scenes(input, exec)?;
    exec::try_map(&scenes, exec, |scene| {
        let filtered = filter_proposals(scene, cfg);
        let id = &filtered.scene_id;
        write_scene(
            &filtered,
            out.join("scenes").join(format!("{id}.json")),
            Some(&format!("../maps/{id}.pgm")),
        )?;
        write_features(
            &extract_scene_features(&filtered),
            feature_path(&out.join("features"), id),
        )
    })?;
    Ok(scenes.len())
}

pub fn gt_rankings(scenes: &[Scene], cfg: &GtConfig, exec: Execution) -> Result<SceneRankings> {
    cfg.validate()?;
    exec::try_map(scenes, exec, |s| {
        Ok((s.scene_id.clone(), gtgen::generate(s, cfg)?))
    })
}

pub fn load_features(
    dir: &Path,
    scenes: &[Scene],
    exec: Execution,
) -> Result<Vec<Vec<FeatureVector>>> {
    exec::try_map(scenes, exec, |s| {
        let f = read_features(feature_path(dir, &s.scene_id))?;
        if f.len() != s.proposals.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature vectors for {} proposals in scene {}",
                f.len(),
                s.proposals.len(),
                s.scene_id
            )));
        }
        Ok(f)
    })
}

fn gt_lookup<'a>(gt: &'a SceneRankings, scenes: &[Scene]) -> Result<Vec<&'a Ranking>> {
    let map: BTreeMap<&str, &Ranking> = gt.iter().map(|(id, r)| (id.as_str(), r)).collect();
    scenes
        .iter()
        .map(|s| {
            map.get(s.scene_id.as_str()).copied().ok_or_else(|| {
                Error::SceneMismatch(format!("no ground truth for scene {}", s.scene_id))
            })
        })
        .collect()
}

/// Training windows for every scene, in scene order.
pub fn training_examples(
    scenes: &[Scene],
    features: &[Vec<FeatureVector>],
    gt: &SceneRankings,
    window: usize,
    exec: Execution,
) -> Result<Vec<TrainingExample>> {
    let targets = gt_lookup(gt, scenes)?;
    let idx: Vec<usize> = (0..scenes.len()).collect();
    let per_scene = exec::try_map(&idx, exec, |&i| {
        build_examples(&scenes[i], &features[i], targets[i], window)
    })?;
    Ok(per_scene.into_iter().flatten().collect())
}

pub fn train_scorer(
    scenes: &[Scene],
    features: &[Vec<FeatureVector>],
    gt: &SceneRankings,
    window: usize,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    train(&training_examples(scenes, features, gt, window, exec)?, cfg)
}

pub fn rank_scenes<S: WindowScorer + ?Sized>(
    scenes: &[Scene],
    features: &[Vec<FeatureVector>],
    scorer: &S,
    window: usize,
    exec: Execution,
) -> Result<SceneRankings> {
    let idx: Vec<usize> = (0..scenes.len()).collect();
    exec::try_map(&idx, exec, |&i| {
        let f: &[FeatureVector] = features.get(i).map_or(&[], Vec::as_slice);
        Ok((
            scenes[i].scene_id.clone(),
            rank_scene(&scenes[i], f, scorer, window)?,
        ))
    })
}

pub fn rank_with_model(
    scenes: &[Scene],
    features: &[Vec<FeatureVector>],
    model: &ScorerModel,
    exec: Execution,
) -> Result<SceneRankings> {
    rank_scenes(scenes, features, model, model.window(), exec)
}

/// Ranks each scene from the saliency map `maps/<id>.pgm`.
pub fn map_rankings(
    scenes: &[Scene],
    maps: &Path,
    lambda: f64,
    exec: Execution,
) -> Result<SceneRankings> {
    exec::try_map(scenes, exec, |s| {
        let map = parse_pgm(maps.join(format!("{}.pgm", s.scene_id)))?;
        Ok((s.scene_id.clone(), rank_from_saliency_map(s, &map, lambda)?))
    })
}

/// `threshold,offset` lines with a header.
pub fn discrepancy_csv(offsets: &[(f64, u64)]) -> String {
    let mut out = String::from("threshold,offset\n");
    for (t, v) in offsets {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}
