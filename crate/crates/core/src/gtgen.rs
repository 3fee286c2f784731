//! Ground-truth rank-order generation from fixation data.
//!
//! Four families are provided: the fixation-count baseline (count divided
//! by the box side), the fixation-map max/average baselines, the binarized
//! map scheme and the relationship-aware score that combines each object's
//! share of the scene's fixations with a size-dependent term
//! `gamma * exp(beta * size_ratio)`. All of them turn per-proposal scores
//! into a [`Ranking`] the same way: positive scores sorted descending get
//! orders 1..k with ties going to the smaller proposal id, and zero scores
//! get order 0.

use serde::{Deserialize, Serialize};

use crate::domain::{count_fixations, Proposal, Ranking, Scene};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// GT thresholds selected from the transition points of the discrepancy
/// curve over the 0.1..=1.0 grid.
pub const CANONICAL_GAMMAS: [f64; 4] = [0.1, 0.2, 0.5, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GtMethod {
    #[serde(rename = "fixpoints")]
    FixPoints,
    MapMax,
    MapAvg,
    #[serde(rename = "binmap")]
    BinarizedMap,
    #[default]
    RaSrgt,
}

impl std::str::FromStr for GtMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixpoints" => Ok(Self::FixPoints),
            "mapmax" => Ok(Self::MapMax),
            "mapavg" => Ok(Self::MapAvg),
            "binmap" => Ok(Self::BinarizedMap),
            "rasrgt" => Ok(Self::RaSrgt),
            other => Err(Error::Config(format!(
                "unknown GT method {other:?} (fixpoints|mapmax|mapavg|binmap|rasrgt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtConfig {
    /// GT threshold scaling the size term.
    pub gamma: f64,
    /// Alignment factor inside the exponential.
    pub beta: f64,
    pub method: GtMethod,
    /// Gray level a pixel must exceed to count as white (binarized scheme).
    pub binary_threshold: f64,
    /// Use absolute fixation counts and `sqrt(size)` in pixels instead of
    /// the normalized share/ratio form. Overflows for realistic boxes.
    pub raw_penalty: bool,
}

impl Default for GtConfig {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            beta: 0.5,
            method: GtMethod::RaSrgt,
            binary_threshold: 128.0,
            raw_penalty: false,
        }
    }
}

impl GtConfig {
    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.binary_threshold > 0.0 && self.binary_threshold < 255.0) {
            return Err(Error::Config(format!(
                "binary_threshold must lie in (0,255), got {}",
                self.binary_threshold
            )));
        }
        Ok(())
    }
}

fn rank_by<F>(scene: &Scene, score: F) -> Result<Ranking>
where
    F: Fn(&Proposal) -> Result<f64>,
{
    let scores = scene
        .real_proposals()
        .map(|p| score(p).map(|s| (p.id, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ranking::from_scores(&scores))
}

pub fn fixation_points_score(scene: &Scene, p: &Proposal) -> f64 {
    count_fixations(&p.bbox, &scene.fixations) as f64 / p.bbox.sqrt_size()
}

/// Fixation count inside each box divided by the box side length.
pub fn rank_fixation_points(scene: &Scene) -> Ranking {
    rank_by(scene, |p| Ok(fixation_points_score(scene, p))).expect("infallible")
}

pub fn fixation_map_score(scene: &Scene, p: &Proposal, mode: MapMode) -> Result<f64> {
    let map = scene
        .fixation_map
        .as_ref()
        .ok_or_else(|| Error::MissingFixationMap(scene.scene_id.clone()))?;
    let (mut max, mut sum, mut n) = (0u8, 0u64, 0u64);
    for v in map.pixels_in(&p.bbox) {
        max = max.max(v);
        sum += u64::from(v);
        n += 1;
    }
    Ok(match mode {
        MapMode::Max => f64::from(max),
        MapMode::Avg if n == 0 => 0.0,
        MapMode::Avg => sum as f64 / n as f64,
    })
}

/// Maximum or mean fixation-map intensity inside each box.
pub fn rank_fixation_map(scene: &Scene, mode: MapMode) -> Result<Ranking> {
    rank_by(scene, |p| fixation_map_score(scene, p, mode))
}

pub fn binarized_map_score(scene: &Scene, p: &Proposal, binary_threshold: f64) -> Result<f64> {
    let map = scene
        .fixation_map
        .as_ref()
        .ok_or_else(|| Error::MissingFixationMap(scene.scene_id.clone()))?;
    let (mut white, mut total) = (0u64, 0u64);
    for v in map.pixels_in(&p.bbox) {
        total += 1;
        if f64::from(v) > binary_threshold {
            white += 1;
        }
    }
    if white == 0 {
        return Ok(0.0);
    }
    Ok(white as f64 / total as f64 * p.bbox.sqrt_size() / scene.image_sqrt_size())
}

/// White-pixel ratio of the binarized map times the box's relative side.
pub fn rank_binarized_map(scene: &Scene, binary_threshold: f64) -> Result<Ranking> {
    rank_by(scene, |p| binarized_map_score(scene, p, binary_threshold))
}

/// Relationship-aware score: 0 for a proposal without fixations, otherwise
/// `fix_share + gamma * exp(beta * size_ratio)`.
pub fn rasrgt_score(scene: &Scene, proposal: &Proposal, cfg: &GtConfig) -> Result<f64> {
    if proposal.is_dummy {
        return Ok(0.0);
    }
    let inside = count_fixations(&proposal.bbox, &scene.fixations);
    if inside == 0 {
        return Ok(0.0);
    }
    if cfg.raw_penalty {
        let term = cfg.gamma * (cfg.beta * proposal.bbox.sqrt_size()).exp();
        return Ok(inside as f64 + term);
    }
    let total = scene.fixations.len();
    if total == 0 {
        return Err(Error::DegenerateScene(scene.scene_id.clone()));
    }
    let share = inside as f64 / total as f64;
    let size_ratio = proposal.bbox.sqrt_size() / scene.image_sqrt_size();
    Ok(share + cfg.gamma * (cfg.beta * size_ratio).exp())
}

pub fn rasrgt_rank(scene: &Scene, cfg: &GtConfig) -> Result<Ranking> {
    rank_by(scene, |p| rasrgt_score(scene, p, cfg))
}

/// Ranks a scene with the method selected in `cfg`.
pub fn generate(scene: &Scene, cfg: &GtConfig) -> Result<Ranking> {
    match cfg.method {
        GtMethod::FixPoints => Ok(rank_fixation_points(scene)),
        GtMethod::MapMax => rank_fixation_map(scene, MapMode::Max),
        GtMethod::MapAvg => rank_fixation_map(scene, MapMode::Avg),
        GtMethod::BinarizedMap => rank_binarized_map(scene, cfg.binary_threshold),
        GtMethod::RaSrgt => rasrgt_rank(scene, cfg),
    }
}

/// `(t, T)` for every consecutive pair of thresholds, where `T` is the sum
/// over scenes and proposals of `|Rank_t - Rank_prev|` under RA-SRGT.
pub fn discrepancy_offsets(
    scenes: &[Scene],
    cfg_base: &GtConfig,
    thresholds: &[f64],
) -> Result<Vec<(f64, u64)>> {
    discrepancy_offsets_with(scenes, cfg_base, thresholds, Execution::default())
}

pub fn discrepancy_offsets_with(
    scenes: &[Scene],
    cfg_base: &GtConfig,
    thresholds: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, u64)>> {
    // rankings[scene][threshold]
    let rankings = exec::try_map(scenes, exec, |scene| {
        thresholds
            .iter()
            .map(|&t| rasrgt_rank(scene, &cfg_base.with_gamma(t)))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(thresholds
        .windows(2)
        .enumerate()
        .map(|(i, pair)| {
            let total = rankings
                .iter()
                .map(|per_t| ranking_offset(&per_t[i], &per_t[i + 1]))
                .sum();
            (pair[1], total)
        })
        .collect())
}

/// Sum of absolute order changes between two rankings of the same proposals.
pub fn ranking_offset(a: &Ranking, b: &Ranking) -> u64 {
    a.iter()
        .map(|(id, oa)| {
            let ob = b.get(id).unwrap_or(0);
            u64::from(oa.abs_diff(ob))
        })
        .sum()
}

/// Expands `start:end:step` into an inclusive grid without accumulating
/// rounding error.
pub fn threshold_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(Error::Config(format!("bad grid {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| {
            let v = start + i as f64 * step;
            (v * 1e9).round() / 1e9
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BBox, FixationPoint, GrayMap};
    use proptest::prelude::*;

    fn fixes_in(x: u32, y: u32, w: u32, count: usize) -> Vec<FixationPoint> {
        (0..count)
            .map(|i| FixationPoint {
                u: x + (i as u32 % w),
                v: y + (i as u32 / w),
                observer_id: 0,
            })
            .collect()
    }

    fn prop(id: u32, x1: f64, y1: f64, x2: f64, y2: f64) -> Proposal {
        Proposal::new(id, BBox::new(x1, y1, x2, y2).unwrap(), 0.9)
    }

    fn scene(props: Vec<Proposal>, fix: Vec<FixationPoint>, map: Option<GrayMap>) -> Scene {
        Scene::new("t", 100, 100, props, fix, map).unwrap()
    }

    #[test]
    fn fixation_points_examples() {
        // Q1: 10 fixations in a 5x5 box (2.0); Q2: 12 in a 10x10 box (1.2).
        let mut fix = fixes_in(0, 0, 5, 10);
        fix.extend(fixes_in(50, 50, 10, 12));
        let s = scene(
            vec![
                prop(1, 0.0, 0.0, 5.0, 5.0),
                prop(2, 50.0, 50.0, 60.0, 60.0),
                prop(3, 80.0, 80.0, 90.0, 90.0),
            ],
            fix,
            None,
        );
        let r = rank_fixation_points(&s);
        assert!((fixation_points_score(&s, &s.proposals[0]) - 2.0).abs() < 1e-12);
        assert!((fixation_points_score(&s, &s.proposals[1]) - 1.2).abs() < 1e-12);
        assert_eq!((r.get(1), r.get(2), r.get(3)), (Some(1), Some(2), Some(0)));
    }

    #[test]
    fn fixation_points_tie_goes_to_lower_id() {
        let mut fix = fixes_in(0, 0, 5, 4);
        fix.extend(fixes_in(50, 50, 5, 4));
        let s = scene(
            vec![
                prop(9, 50.0, 50.0, 60.0, 60.0),
                prop(4, 0.0, 0.0, 10.0, 10.0),
            ],
            fix,
            None,
        );
        let r = rank_fixation_points(&s);
        assert_eq!((r.get(4), r.get(9)), (Some(1), Some(2)));
    }

    #[test]
    fn doubling_boxes_halves_fixation_point_scores() {
        let mut fix = fixes_in(0, 0, 5, 7);
        fix.extend(fixes_in(40, 40, 5, 3));
        let small = scene(
            vec![
                prop(0, 0.0, 0.0, 10.0, 10.0),
                prop(1, 40.0, 40.0, 50.0, 45.0),
            ],
            fix.clone(),
            None,
        );
        let big = scene(
            vec![
                prop(0, 0.0, 0.0, 20.0, 20.0),
                prop(1, 40.0, 40.0, 60.0, 50.0),
            ],
            fix,
            None,
        );
        for (a, b) in small.proposals.iter().zip(&big.proposals) {
            let (sa, sb) = (
                fixation_points_score(&small, a),
                fixation_points_score(&big, b),
            );
            assert!((sb - sa / 2.0).abs() < 1e-12);
        }
        assert_eq!(rank_fixation_points(&small), rank_fixation_points(&big));
    }

    #[test]
    fn fixation_map_examples() {
        let uniform = GrayMap::filled(100, 100, 100).unwrap();
        let s = scene(
            vec![
                prop(1, 0.0, 0.0, 10.0, 10.0),
                prop(2, 20.0, 20.0, 30.0, 30.0),
            ],
            vec![],
            Some(uniform),
        );
        let r = rank_fixation_map(&s, MapMode::Avg).unwrap();
        assert_eq!((r.get(1), r.get(2)), (Some(1), Some(2)));

        let mut m = GrayMap::filled(100, 100, 0).unwrap();
        m.set(5, 5, 120);
        m.set(25, 25, 200);
        let s = scene(
            vec![
                prop(1, 0.0, 0.0, 10.0, 10.0),
                prop(2, 20.0, 20.0, 30.0, 30.0),
            ],
            vec![],
            Some(m),
        );
        let r = rank_fixation_map(&s, MapMode::Max).unwrap();
        assert_eq!((r.get(1), r.get(2)), (Some(2), Some(1)));

        let bare = scene(vec![prop(1, 0.0, 0.0, 10.0, 10.0)], vec![], None);
        assert!(matches!(
            rank_fixation_map(&bare, MapMode::Max),
            Err(Error::MissingFixationMap(_))
        ));
        assert!(matches!(
            rank_binarized_map(&bare, 100.0),
            Err(Error::MissingFixationMap(_))
        ));
    }

    #[test]
    fn binarized_map_examples() {
        let black = GrayMap::filled(100, 100, 0).unwrap();
        let s = scene(
            vec![
                prop(1, 0.0, 0.0, 10.0, 10.0),
                prop(2, 20.0, 20.0, 30.0, 30.0),
            ],
            vec![],
            Some(black),
        );
        let r = rank_binarized_map(&s, 128.0).unwrap();
        assert_eq!(r.n_salient(), 0);

        let grey = GrayMap::filled(100, 100, 200).unwrap();
        let s = scene(vec![prop(1, 0.0, 0.0, 10.0, 10.0)], vec![], Some(grey));
        assert_eq!(rank_binarized_map(&s, 254.0).unwrap().n_salient(), 0);

        // Q1: white ratio 0.5, side ratio 0.2 -> 0.10; Q2: 0.3 and 0.5 -> 0.15.
        let mut m = GrayMap::filled(100, 100, 0).unwrap();
        for y in 0..20 {
            for x in 0..10 {
                m.set(x, y, 255);
            }
        }
        for y in 40..55 {
            for x in 40..90 {
                m.set(x, y, 255);
            }
        }
        let s = scene(
            vec![
                prop(1, 0.0, 0.0, 20.0, 20.0),
                prop(2, 40.0, 40.0, 90.0, 90.0),
            ],
            vec![],
            Some(m),
        );
        let q1 = binarized_map_score(&s, &s.proposals[0], 128.0).unwrap();
        let q2 = binarized_map_score(&s, &s.proposals[1], 128.0).unwrap();
        assert!((q1 - 0.10).abs() < 1e-12);
        assert!((q2 - 0.15).abs() < 1e-12);
        let r = rank_binarized_map(&s, 128.0).unwrap();
        assert_eq!((r.get(1), r.get(2)), (Some(2), Some(1)));
    }

    fn two_object_scene() -> Scene {
        // 100x100 image, 50 fixations: 30 in a 20x20 box, 15 in a 50x50 box, 5 elsewhere.
        let mut fix = fixes_in(0, 0, 20, 30);
        fix.extend(fixes_in(40, 40, 15, 15));
        fix.extend(fixes_in(95, 0, 5, 5));
        scene(
            vec![
                prop(1, 0.0, 0.0, 20.0, 20.0),
                prop(2, 40.0, 40.0, 90.0, 90.0),
                prop(3, 0.0, 60.0, 10.0, 70.0),
            ],
            fix,
            None,
        )
    }

    #[test]
    fn rasrgt_score_examples() {
        let s = two_object_scene();
        let cfg = GtConfig::default();
        let q1 = rasrgt_score(&s, &s.proposals[0], &cfg).unwrap();
        let q2 = rasrgt_score(&s, &s.proposals[1], &cfg).unwrap();
        assert!((q1 - (0.6 + 0.2 * 0.1f64.exp())).abs() < 1e-12);
        assert!((q1 - 0.8210).abs() < 5e-5);
        assert!((q2 - (0.3 + 0.2 * 0.25f64.exp())).abs() < 1e-12);
        assert!((q2 - 0.5568).abs() < 5e-5);
        assert_eq!(rasrgt_score(&s, &s.proposals[2], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn rasrgt_rank_examples() {
        let s = two_object_scene();
        let r = rasrgt_rank(&s, &GtConfig::default()).unwrap();
        assert_eq!((r.get(1), r.get(2), r.get(3)), (Some(1), Some(2), Some(0)));

        let empty = scene(
            vec![
                prop(1, 0.0, 0.0, 20.0, 20.0),
                prop(2, 40.0, 40.0, 90.0, 90.0),
            ],
            fixes_in(95, 95, 5, 3),
            None,
        );
        assert_eq!(
            rasrgt_rank(&empty, &GtConfig::default())
                .unwrap()
                .n_salient(),
            0
        );

        let single = scene(
            vec![prop(1, 0.0, 0.0, 20.0, 20.0)],
            fixes_in(0, 0, 5, 2),
            None,
        );
        assert_eq!(
            rasrgt_rank(&single, &GtConfig::default()).unwrap().get(1),
            Some(1)
        );
    }

    #[test]
    fn raw_penalty_uses_pixel_side() {
        let s = two_object_scene();
        let cfg = GtConfig {
            raw_penalty: true,
            ..GtConfig::default()
        };
        let q1 = rasrgt_score(&s, &s.proposals[0], &cfg).unwrap();
        assert!((q1 - (30.0 + 0.2 * 10f64.exp())).abs() < 1e-9);
    }

    #[test]
    fn discrepancy_examples() {
        let s = two_object_scene();
        let grid = [0.1, 0.2];
        let out =
            discrepancy_offsets(std::slice::from_ref(&s), &GtConfig::default(), &grid).unwrap();
        assert_eq!(out, vec![(0.2, 0)]);

        let a = Ranking::new([(0, 1), (1, 2), (2, 3)].into()).unwrap();
        let b = Ranking::new([(0, 2), (1, 1), (2, 3)].into()).unwrap();
        assert_eq!(ranking_offset(&a, &b), 2);
    }

    #[test]
    fn size_term_can_reorder() {
        // Equal fixation counts: a large gamma lets the bigger box win,
        // ids put the small box first on ties.
        let mut fix = fixes_in(0, 0, 5, 10);
        fix.extend(fixes_in(30, 30, 5, 10));
        let s = scene(
            vec![
                prop(0, 0.0, 0.0, 10.0, 10.0),
                prop(1, 30.0, 30.0, 90.0, 90.0),
            ],
            fix,
            None,
        );
        let r = rasrgt_rank(&s, &GtConfig::default()).unwrap();
        assert_eq!(r.get(1), Some(1));
    }

    #[test]
    fn grid_is_exact() {
        let g = threshold_grid(0.1, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[2], 0.3);
        assert_eq!(g[9], 1.0);
    }

    #[test]
    fn method_names_parse() {
        for (name, m) in [
            ("fixpoints", GtMethod::FixPoints),
            ("mapmax", GtMethod::MapMax),
            ("mapavg", GtMethod::MapAvg),
            ("binmap", GtMethod::BinarizedMap),
            ("rasrgt", GtMethod::RaSrgt),
        ] {
            assert_eq!(name.parse::<GtMethod>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{name}\""));
        }
        assert!("attention".parse::<GtMethod>().is_err());
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_ranking(scores in prop::collection::vec(0.0..10.0f64, 1..12)) {
            let pairs: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect();
            let warped: Vec<(u32, f64)> = pairs.iter().map(|&(i, s)| (i, s * s * s + 2.0 * s)).collect();
            prop_assert_eq!(Ranking::from_scores(&pairs), Ranking::from_scores(&warped));
        }

        #[test]
        fn rasrgt_monotone_in_count_and_size(n1 in 1usize..40, extra in 1usize..10, side in 5.0..40.0f64, grow in 0.5..20.0f64) {
            let cfg = GtConfig::default();
            let total = fixes_in(0, 0, 40, 60);
            let base = scene(vec![prop(0, 0.0, 0.0, side, side)], total.clone(), None);
            // count: rows of the 40-wide fixation block fall in the box; compare boxes with equal size
            let a = Scene { fixations: fixes_in(0, 0, 5, n1).into_iter().chain(fixes_in(60, 60, 5, 40)).collect(), ..base.clone() };
            let b = Scene { fixations: fixes_in(0, 0, 5, n1 + extra).into_iter().chain(fixes_in(60, 60, 5, 40 - extra)).collect(), ..base.clone() };
            prop_assume!(side >= 5.0 + (n1 + extra) as f64 / 5.0);
            let sa = rasrgt_score(&a, &a.proposals[0], &cfg).unwrap();
            let sb = rasrgt_score(&b, &b.proposals[0], &cfg).unwrap();
            prop_assert!(sb > sa);
            // size: same fixations, larger box
            let bigger = Scene { proposals: vec![prop(0, 0.0, 0.0, side + grow, side + grow)], ..a.clone() };
            prop_assume!(side + grow <= 55.0);
            let sc = rasrgt_score(&bigger, &bigger.proposals[0], &cfg).unwrap();
            prop_assert_eq!(count_fixations(&bigger.proposals[0].bbox, &bigger.fixations), count_fixations(&a.proposals[0].bbox, &a.fixations));
            prop_assert!(sc > sa);
        }
    }
}
