//! Core value types shared by every stage: boxes, fixations, gray maps,
//! scenes and rankings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|c| c.is_finite()) {
            return Err(Error::invariant("box", "non-finite coordinate"));
        }
        if x1 < 0.0 || y1 < 0.0 {
            return Err(Error::invariant("box", "negative coordinate"));
        }
        if x1 >= x2 {
            return Err(Error::invariant("box", "x1<x2 violated"));
        }
        if y1 >= y2 {
            return Err(Error::invariant("box", "y1<y2 violated"));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Square root of width × height.
    pub fn sqrt_size(&self) -> f64 {
        self.area().sqrt()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    /// Half-open containment: `x1 <= u < x2` and `y1 <= v < y2`.
    pub fn contains(&self, u: u32, v: u32) -> bool {
        let (u, v) = (f64::from(u), f64::from(v));
        self.x1 <= u && u < self.x2 && self.y1 <= v && v < self.y2
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Box scaled by `factor` about its center and clipped to `[0,width]×[0,height]`.
    pub fn scaled_clipped(&self, factor: f64, width: f64, height: f64) -> BBox {
        let (cx, cy) = self.center();
        let hw = self.width() * factor * 0.5;
        let hh = self.height() * factor * 0.5;
        BBox {
            x1: (cx - hw).max(0.0),
            y1: (cy - hh).max(0.0),
            x2: (cx + hw).min(width),
            y2: (cy + hh).min(height),
        }
    }

    /// Integer pixel columns and rows whose coordinates fall inside the box
    /// under the half-open rule, clamped to the raster.
    pub fn pixel_span(
        &self,
        width: u32,
        height: u32,
    ) -> (std::ops::Range<u32>, std::ops::Range<u32>) {
        let cols = span(self.x1, self.x2, width);
        let rows = span(self.y1, self.y2, height);
        (cols, rows)
    }
}

fn span(lo: f64, hi: f64, limit: u32) -> std::ops::Range<u32> {
    let start = lo.ceil().max(0.0).min(f64::from(limit)) as u32;
    let end = hi.ceil().max(0.0).min(f64::from(limit)) as u32;
    start..end.max(start)
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

pub fn sqrt_size(b: &BBox) -> f64 {
    b.sqrt_size()
}

/// Number of fixation points inside `b` (half-open).
pub fn count_fixations(b: &BBox, pts: &[FixationPoint]) -> usize {
    pts.iter().filter(|p| b.contains(p.u, p.v)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationPoint {
    pub u: u32,
    pub v: u32,
    pub observer_id: u32,
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayMap {
    width: u32,
    height: u32,
    values: Vec<u8>,
}

impl GrayMap {
    pub fn new(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invariant("map", "dimensions must be positive"));
        }
        if values.len() != width as usize * height as usize {
            return Err(Error::invariant(
                "map",
                format!("{} values for {}x{} raster", values.len(), width, height),
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.values[y as usize * self.width as usize + x as usize] = value;
    }

    /// Values of every pixel inside `b`.
    pub fn pixels_in(&self, b: &BBox) -> impl Iterator<Item = u8> + '_ {
        let (cols, rows) = b.pixel_span(self.width, self.height);
        rows.flat_map(move |y| cols.clone().map(move |x| self.get(x, y)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub id: u32,
    pub bbox: BBox,
    pub detector_confidence: f64,
    /// Padding node. Carries a placeholder box that no computation reads.
    pub is_dummy: bool,
}

impl Proposal {
    pub fn new(id: u32, bbox: BBox, detector_confidence: f64) -> Self {
        Self {
            id,
            bbox,
            detector_confidence,
            is_dummy: false,
        }
    }

    pub fn dummy(id: u32) -> Self {
        Self {
            id,
            bbox: BBox {
                x1: 0.0,
                y1: 0.0,
                x2: 1.0,
                y2: 1.0,
            },
            detector_confidence: 0.0,
            is_dummy: true,
        }
    }

    /// Zero for dummies.
    pub fn area(&self) -> f64 {
        if self.is_dummy {
            0.0
        } else {
            self.bbox.area()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub width: u32,
    pub height: u32,
    pub proposals: Vec<Proposal>,
    pub fixations: Vec<FixationPoint>,
    pub fixation_map: Option<GrayMap>,
}

impl Scene {
    /// Builds a scene and checks every invariant.
    pub fn new(
        scene_id: impl Into<String>,
        width: u32,
        height: u32,
        proposals: Vec<Proposal>,
        fixations: Vec<FixationPoint>,
        fixation_map: Option<GrayMap>,
    ) -> Result<Self> {
        let scene = Self {
            scene_id: scene_id.into(),
            width,
            height,
            proposals,
            fixations,
            fixation_map,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        validate_scene_id(&self.scene_id)?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::invariant("width/height", "must be positive"));
        }
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        let mut seen = std::collections::HashSet::new();
        for p in &self.proposals {
            if !seen.insert(p.id) {
                return Err(Error::invariant(
                    "id",
                    format!("duplicate proposal id {}", p.id),
                ));
            }
            let b = &p.bbox;
            BBox::new(b.x1, b.y1, b.x2, b.y2)?;
            if b.x2 > w || b.y2 > h {
                return Err(Error::invariant(
                    "box",
                    format!(
                        "proposal {} exceeds {}x{} image",
                        p.id, self.width, self.height
                    ),
                ));
            }
            if !(0.0..=1.0).contains(&p.detector_confidence) {
                return Err(Error::invariant(
                    "confidence",
                    format!("proposal {} confidence outside [0,1]", p.id),
                ));
            }
        }
        for f in &self.fixations {
            if f.u >= self.width || f.v >= self.height {
                return Err(Error::invariant(
                    "fixations",
                    format!(
                        "({}, {}) outside {}x{} image",
                        f.u, f.v, self.width, self.height
                    ),
                ));
            }
        }
        if let Some(map) = &self.fixation_map {
            if map.width() != self.width || map.height() != self.height {
                return Err(Error::invariant(
                    "fixation_map",
                    format!(
                        "{}x{} map for {}x{} scene",
                        map.width(),
                        map.height(),
                        self.width,
                        self.height
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn image_sqrt_size(&self) -> f64 {
        (f64::from(self.width) * f64::from(self.height)).sqrt()
    }

    pub fn real_proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.iter().filter(|p| !p.is_dummy)
    }

    pub fn n_real(&self) -> usize {
        self.real_proposals().count()
    }
}

/// Scene ids double as file stems and CSV fields.
pub fn validate_scene_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::invariant("scene_id", "empty"));
    }
    if !id
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        || id.starts_with('.')
    {
        return Err(Error::invariant(
            "scene_id",
            format!("{id:?} must use [A-Za-z0-9_.-] and not start with '.'"),
        ));
    }
    Ok(())
}

/// Per-proposal saliency orders. 0 = non-salient, 1 = most salient; the
/// non-zero orders are exactly `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ranking {
    labels: BTreeMap<u32, u32>,
}

impl Ranking {
    pub fn new(labels: BTreeMap<u32, u32>) -> Result<Self> {
        let mut orders: Vec<u32> = labels.values().copied().filter(|&o| o > 0).collect();
        orders.sort_unstable();
        for (i, &o) in orders.iter().enumerate() {
            if o as usize != i + 1 {
                return Err(Error::invariant(
                    "order",
                    format!(
                        "non-zero orders must be 1..={} without gaps or repeats",
                        orders.len()
                    ),
                ));
            }
        }
        Ok(Self { labels })
    }

    /// Positive scores sorted descending receive orders 1..k (ties by
    /// ascending id); zero, negative or NaN scores receive order 0.
    pub fn from_scores(scores: &[(u32, f64)]) -> Self {
        let mut salient: Vec<(u32, f64)> =
            scores.iter().copied().filter(|&(_, s)| s > 0.0).collect();
        salient.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut labels: BTreeMap<u32, u32> = scores.iter().map(|&(id, _)| (id, 0)).collect();
        for (order, (id, _)) in salient.iter().enumerate() {
            labels.insert(*id, order as u32 + 1);
        }
        Self { labels }
    }

    pub fn get(&self, id: u32) -> Option<u32> {
        self.labels.get(&id).copied()
    }

    pub fn labels(&self) -> &BTreeMap<u32, u32> {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_salient(&self) -> usize {
        self.labels.values().filter(|&&o| o > 0).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.labels.iter().map(|(&k, &v)| (k, v))
    }
}
