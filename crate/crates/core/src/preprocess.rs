//! Offline proposal filtering and per-proposal feature extraction.

use serde::{Deserialize, Serialize};

use crate::domain::{count_fixations, iou, BBox, GrayMap, Proposal, Scene};
use crate::error::{Error, Result};

pub const FEATURE_LEN: usize = 14;

/// Enlargement of the context box around each proposal.
pub const GLOBAL_SCALE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Discard a proposal whose IOU with a kept, more confident one exceeds this.
    pub iou_discard: f64,
    /// Discard proposals covering more than this fraction of the image.
    pub max_area_frac: f64,
    /// Discard proposals smaller than this many square pixels.
    pub min_area_px: f64,
    /// Pad with dummy proposals up to this count.
    pub min_count: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            iou_discard: 0.7,
            max_area_frac: 0.6,
            min_area_px: 20.0,
            min_count: 5,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_discard > 0.0 && self.iou_discard <= 1.0) {
            return Err(Error::Config(format!(
                "iou_discard must lie in (0,1], got {}",
                self.iou_discard
            )));
        }
        if self.max_area_frac.is_nan()
            || self.max_area_frac <= 0.0
            || self.min_area_px.is_nan()
            || self.min_area_px <= 0.0
        {
            return Err(Error::Config("area limits must be positive".into()));
        }
        if self.min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Confidence-ordered NMS, area limits, then dummy padding.
///
/// Existing dummies are dropped first, so filtering is idempotent. Survivors
/// keep their relative order; dummies are appended with ids above every
/// surviving id.
pub fn filter_proposals(scene: &Scene, cfg: &FilterConfig) -> Scene {
    let real: Vec<&Proposal> = scene.real_proposals().collect();

    let mut by_conf: Vec<usize> = (0..real.len()).collect();
    by_conf.sort_by(|&a, &b| {
        real[b]
            .detector_confidence
            .total_cmp(&real[a].detector_confidence)
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; real.len()];
    let mut kept: Vec<usize> = Vec::new();
    for &i in &by_conf {
        if kept
            .iter()
            .all(|&k| iou(&real[i].bbox, &real[k].bbox) <= cfg.iou_discard)
        {
            keep[i] = true;
            kept.push(i);
        }
    }

    let image_area = f64::from(scene.width) * f64::from(scene.height);
    let mut proposals: Vec<Proposal> = real
        .iter()
        .zip(&keep)
        .filter(|(p, &k)| {
            let area = p.bbox.area();
            k && area <= cfg.max_area_frac * image_area && area >= cfg.min_area_px
        })
        .map(|(p, _)| (*p).clone())
        .collect();

    let mut next_id = proposals.iter().map(|p| p.id + 1).max().unwrap_or(0);
    while proposals.len() < cfg.min_count {
        proposals.push(Proposal::dummy(next_id));
        next_id += 1;
    }

    Scene {
        proposals,
        ..scene.clone()
    }
}

/// Per-proposal descriptor.
///
/// Layout: `[fix_share_local, fix_density_local, map_mean_local,
/// map_max_local, fix_share_global, map_mean_global, map_max_global,
/// size_ratio, cx_norm, cy_norm, x1_norm, y1_norm, x2_norm, y2_norm]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub const FIX_SHARE_LOCAL: usize = 0;
    pub const FIX_DENSITY_LOCAL: usize = 1;
    pub const MAP_MEAN_LOCAL: usize = 2;
    pub const MAP_MAX_LOCAL: usize = 3;
    pub const FIX_SHARE_GLOBAL: usize = 4;
    pub const MAP_MEAN_GLOBAL: usize = 5;
    pub const MAP_MAX_GLOBAL: usize = 6;
    pub const SIZE_RATIO: usize = 7;
    pub const CX: usize = 8;
    pub const CY: usize = 9;
    pub const X1: usize = 10;
    pub const Y1: usize = 11;
    pub const X2: usize = 12;
    pub const Y2: usize = 13;

    pub fn zeros() -> Self {
        Self([0.0; FEATURE_LEN])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

fn map_stats(map: Option<&GrayMap>, b: &BBox) -> (f64, f64) {
    let Some(map) = map else { return (0.0, 0.0) };
    let (mut sum, mut max, mut n) = (0u64, 0u8, 0u64);
    for v in map.pixels_in(b) {
        sum += u64::from(v);
        max = max.max(v);
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    (sum as f64 / n as f64 / 255.0, f64::from(max) / 255.0)
}

/// Local statistics over the box, context statistics over the box scaled by
/// [`GLOBAL_SCALE`] and clipped to the image, and normalized position.
pub fn extract_features(scene: &Scene, proposal: &Proposal) -> FeatureVector {
    if proposal.is_dummy {
        return FeatureVector::zeros();
    }
    let (w, h) = (f64::from(scene.width), f64::from(scene.height));
    let b = proposal.bbox;
    let g = b.scaled_clipped(GLOBAL_SCALE, w, h);
    let total = scene.fixations.len() as f64;
    let share = |bb: &BBox| {
        if total == 0.0 {
            0.0
        } else {
            count_fixations(bb, &scene.fixations) as f64 / total
        }
    };
    let share_local = share(&b);
    let size_ratio = b.sqrt_size() / scene.image_sqrt_size();
    let concentration = share_local / size_ratio;
    let density = concentration / (1.0 + concentration);
    let map = scene.fixation_map.as_ref();
    let (mean_local, max_local) = map_stats(map, &b);
    let (mean_global, max_global) = map_stats(map, &g);
    let (cx, cy) = b.center();
    FeatureVector([
        share_local,
        density,
        mean_local,
        max_local,
        share(&g),
        mean_global,
        max_global,
        size_ratio,
        cx / w,
        cy / h,
        b.x1 / w,
        b.y1 / h,
        b.x2 / w,
        b.y2 / h,
    ])
}

pub fn extract_scene_features(scene: &Scene) -> Vec<FeatureVector> {
    scene
        .proposals
        .iter()
        .map(|p| extract_features(scene, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FixationPoint;
    use proptest::prelude::*;

    fn prop_box(id: u32, x1: f64, y1: f64, x2: f64, y2: f64, conf: f64) -> Proposal {
        Proposal::new(id, BBox::new(x1, y1, x2, y2).unwrap(), conf)
    }

    fn scene(props: Vec<Proposal>) -> Scene {
        Scene::new("p", 200, 200, props, vec![], None).unwrap()
    }

    fn five_disjoint() -> Vec<Proposal> {
        (0..5)
            .map(|i| {
                let x = 10.0 + 35.0 * f64::from(i);
                prop_box(i, x, 10.0, x + 30.0, 40.0, 0.5)
            })
            .collect()
    }

    #[test]
    fn disjoint_five_unchanged() {
        let s = scene(five_disjoint());
        assert_eq!(filter_proposals(&s, &FilterConfig::default()), s);
    }

    #[test]
    fn pads_to_min_count() {
        let s = scene(five_disjoint().into_iter().take(2).collect());
        let f = filter_proposals(&s, &FilterConfig::default());
        assert_eq!(f.proposals.len(), 5);
        assert_eq!(f.proposals.iter().filter(|p| p.is_dummy).count(), 3);
        assert_eq!(
            f.proposals.iter().map(|p| p.id).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert!(f.proposals[..2].iter().all(|p| !p.is_dummy));
    }

    #[test]
    fn nms_drops_less_confident_duplicate() {
        // IOU 0.9: 100x100 vs 100x90 nested boxes.
        let a = prop_box(0, 0.0, 0.0, 100.0, 100.0, 0.8);
        let b = prop_box(1, 0.0, 0.0, 100.0, 90.0, 0.9);
        assert!((iou(&a.bbox, &b.bbox) - 0.9).abs() < 1e-12);
        let f = filter_proposals(&scene(vec![a, b]), &FilterConfig::default());
        let real: Vec<u32> = f.real_proposals().map(|p| p.id).collect();
        assert_eq!(real, vec![1]);
    }

    #[test]
    fn area_limits() {
        let huge = prop_box(0, 0.0, 0.0, 200.0, 150.0, 0.9); // 75% of image
        let tiny = prop_box(1, 0.0, 0.0, 4.0, 4.0, 0.9); // 16 px
        let ok = prop_box(2, 100.0, 160.0, 110.0, 170.0, 0.9);
        let f = filter_proposals(&scene(vec![huge, tiny, ok]), &FilterConfig::default());
        let real: Vec<u32> = f.real_proposals().map(|p| p.id).collect();
        assert_eq!(real, vec![2]);
    }

    #[test]
    fn dummy_features_are_zero() {
        let s = scene(vec![Proposal::dummy(0)]);
        assert_eq!(
            extract_features(&s, &s.proposals[0]),
            FeatureVector::zeros()
        );
    }

    #[test]
    fn whole_image_box() {
        let fix = vec![FixationPoint {
            u: 3,
            v: 4,
            observer_id: 0,
        }];
        let s = Scene::new(
            "w",
            50,
            40,
            vec![prop_box(0, 0.0, 0.0, 50.0, 40.0, 1.0)],
            fix,
            Some(GrayMap::filled(50, 40, 51).unwrap()),
        )
        .unwrap();
        let f = extract_features(&s, &s.proposals[0]);
        assert_eq!(f.get(FeatureVector::SIZE_RATIO), 1.0);
        assert_eq!(f.get(FeatureVector::FIX_SHARE_LOCAL), 1.0);
        assert_eq!(
            f.get(FeatureVector::FIX_SHARE_LOCAL),
            f.get(FeatureVector::FIX_SHARE_GLOBAL)
        );
        assert_eq!(
            f.get(FeatureVector::MAP_MEAN_LOCAL),
            f.get(FeatureVector::MAP_MEAN_GLOBAL)
        );
        assert_eq!(
            f.get(FeatureVector::MAP_MAX_LOCAL),
            f.get(FeatureVector::MAP_MAX_GLOBAL)
        );
        assert!((f.get(FeatureVector::MAP_MAX_LOCAL) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn hand_geometry_example() {
        // 4 of 10 fixations inside (40,40,60,60); context box is (35,35,65,65).
        let mut fix: Vec<FixationPoint> = [(41, 41), (45, 50), (59, 59), (50, 40)]
            .iter()
            .map(|&(u, v)| FixationPoint {
                u,
                v,
                observer_id: 0,
            })
            .collect();
        // two in the context ring, four far away
        fix.extend(
            [(36, 36), (64, 50), (0, 0), (99, 99), (10, 90), (90, 10)]
                .iter()
                .map(|&(u, v)| FixationPoint {
                    u,
                    v,
                    observer_id: 1,
                }),
        );
        let s = Scene::new(
            "h",
            100,
            100,
            vec![prop_box(0, 40.0, 40.0, 60.0, 60.0, 1.0)],
            fix,
            None,
        )
        .unwrap();
        let b = s.proposals[0].bbox;
        assert_eq!(
            b.scaled_clipped(GLOBAL_SCALE, 100.0, 100.0),
            BBox::new(35.0, 35.0, 65.0, 65.0).unwrap()
        );
        let f = extract_features(&s, &s.proposals[0]);
        assert!((f.get(FeatureVector::FIX_SHARE_LOCAL) - 0.4).abs() < 1e-12);
        assert!((f.get(FeatureVector::FIX_SHARE_GLOBAL) - 0.6).abs() < 1e-12);
        assert_eq!(f.get(FeatureVector::CX), 0.5);
        assert_eq!(f.get(FeatureVector::CY), 0.5);
        assert_eq!(f.get(FeatureVector::MAP_MAX_LOCAL), 0.0);
    }

    fn arb_scene() -> impl Strategy<Value = Scene> {
        prop::collection::vec(
            (
                0.0..180.0f64,
                0.0..180.0f64,
                2.0..90.0f64,
                2.0..90.0f64,
                0.0..1.0f64,
            ),
            0..10,
        )
        .prop_map(|boxes| {
            let props = boxes
                .iter()
                .enumerate()
                .map(|(i, &(x, y, w, h, c))| {
                    prop_box(i as u32, x, y, (x + w).min(200.0), (y + h).min(200.0), c)
                })
                .collect();
            scene(props)
        })
    }

    proptest! {
        #[test]
        fn filter_idempotent_and_sound(s in arb_scene()) {
            let cfg = FilterConfig::default();
            let once = filter_proposals(&s, &cfg);
            prop_assert!(once.proposals.len() >= cfg.min_count);
            prop_assert_eq!(&filter_proposals(&once, &cfg), &once);
            let real: Vec<&Proposal> = once.real_proposals().collect();
            for (i, a) in real.iter().enumerate() {
                for b in &real[i + 1..] {
                    prop_assert!(iou(&a.bbox, &b.bbox) <= cfg.iou_discard);
                }
            }
            prop_assert!(once.validate().is_ok());
        }

        #[test]
        fn features_translation_consistent(x in 30.0..80.0f64, y in 30.0..80.0f64, dx in -20i32..20, dy in -20i32..20,
                                           pts in prop::collection::vec((0u32..30, 0u32..30), 1..20)) {
            let make = |ox: f64, oy: f64| {
                let fix = pts.iter().map(|&(u, v)| FixationPoint { u: (ox as i64 + i64::from(u)) as u32, v: (oy as i64 + i64::from(v)) as u32, observer_id: 0 }).collect();
                Scene::new("t", 200, 200, vec![prop_box(0, ox, oy, ox + 20.0, oy + 20.0, 1.0)], fix, None).unwrap()
            };
            let (x, y) = (x.floor(), y.floor());
            let a = make(x, y);
            let b = make(x + f64::from(dx), y + f64::from(dy));
            let (fa, fb) = (extract_features(&a, &a.proposals[0]), extract_features(&b, &b.proposals[0]));
            for i in 0..FeatureVector::CX {
                prop_assert!((fa.get(i) - fb.get(i)).abs() < 1e-12, "feature {} changed", i);
            }
            prop_assert!(fa.0.iter().all(|v| v.is_finite()));
        }
    }
}
