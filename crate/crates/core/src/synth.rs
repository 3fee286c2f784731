//! Seeded synthetic scenes with known latent saliency.
//!
//! Every scene index draws from its own ChaCha stream of the dataset seed,
//! so scenes can be generated in any order or in parallel.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BBox, FixationPoint, GrayMap, Proposal, Ranking, Scene};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gtgen::{self, GtConfig};
use crate::ingest::{write_bytes, write_ranking, write_scene};

/// How object fixations are split between salient objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Allocation {
    /// Largest-remainder apportionment proportional to weight.
    #[default]
    Proportional,
    /// Independent draws with probability proportional to weight.
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_scenes: usize,
    /// Inclusive range of objects per scene.
    pub objects: (usize, usize),
    pub width: u32,
    pub height: u32,
    pub fixations: usize,
    pub salient_fraction: f64,
    pub noise_fraction: f64,
    pub sigma: f64,
    pub observers: u32,
    pub min_side: u32,
    pub max_side: u32,
    pub allocation: Allocation,
    pub max_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_scenes: 100,
            objects: (5, 9),
            width: 640,
            height: 480,
            fixations: 200,
            salient_fraction: 0.7,
            noise_fraction: 0.1,
            sigma: 8.0,
            observers: 10,
            min_side: 32,
            max_side: 160,
            allocation: Allocation::Proportional,
            max_attempts: 10_000,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.objects;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("object range {lo}..={hi} is empty")));
        }
        for (name, f) in [
            ("salient_fraction", self.salient_fraction),
            ("noise_fraction", self.noise_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {f}")));
            }
        }
        if self.min_side == 0
            || self.min_side > self.max_side
            || self.max_side > self.width.min(self.height)
        {
            return Err(Error::Config("box side range must fit the image".into()));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 || self.observers == 0 || self.max_attempts == 0
        {
            return Err(Error::Config(
                "sigma, observers and max_attempts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub scene: Scene,
    /// Latent weight per proposal, in proposal order; 0 = not salient.
    pub latent: Vec<f64>,
}

impl SyntheticScene {
    pub fn latent_ranking(&self) -> Ranking {
        let scores: Vec<(u32, f64)> = self
            .scene
            .proposals
            .iter()
            .zip(&self.latent)
            .map(|(p, &w)| (p.id, w))
            .collect();
        Ranking::from_scores(&scores)
    }
}

pub fn scene_id(index: usize) -> String {
    format!("s{index:06}")
}

fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Pairwise disjoint boxes with integer corners.
fn sample_boxes(
    cfg: &SynthConfig,
    n: usize,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BBox>> {
    let mut boxes: Vec<BBox> = Vec::with_capacity(n);
    let mut attempts = 0;
    while boxes.len() < n {
        attempts += 1;
        if attempts > cfg.max_attempts {
            return Err(Error::GenerationFailure {
                index,
                attempts: cfg.max_attempts,
            });
        }
        let w = rng.gen_range(cfg.min_side..=cfg.max_side);
        let h = rng.gen_range(cfg.min_side..=cfg.max_side);
        let x = rng.gen_range(0..=cfg.width - w);
        let y = rng.gen_range(0..=cfg.height - h);
        let b = BBox::new(
            f64::from(x),
            f64::from(y),
            f64::from(x + w),
            f64::from(y + h),
        )?;
        if boxes.iter().all(|o| o.intersection_area(&b) == 0.0) {
            boxes.push(b);
        }
    }
    Ok(boxes)
}

/// Largest-remainder split of `total` by `weights` (ties to lower index).
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    rest.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = total - counts.iter().sum::<usize>();
    for &i in rest.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn multinomial(weights: &[f64], total: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let mut counts = vec![0; weights.len()];
    if sum <= 0.0 {
        return counts;
    }
    for _ in 0..total {
        let mut x = rng.gen_range(0.0..sum);
        let mut pick = weights.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if x < w {
                pick = i;
                break;
            }
            x -= w;
        }
        counts[pick] += 1;
    }
    counts
}

/// Sum of truncated Gaussian splats, scaled so the peak is 255.
pub fn render_map(width: u32, height: u32, fixations: &[FixationPoint], sigma: f64) -> GrayMap {
    let (w, h) = (width as usize, height as usize);
    let mut acc = vec![0.0f64; w * h];
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    for f in fixations {
        let (cu, cv) = (i64::from(f.u), i64::from(f.v));
        for dy in -r..=r {
            let y = cv + dy;
            if y < 0 || y >= h as i64 {
                continue;
            }
            let ky = kernel[(dy + r) as usize];
            for dx in -r..=r {
                let x = cu + dx;
                if x < 0 || x >= w as i64 {
                    continue;
                }
                acc[y as usize * w + x as usize] += ky * kernel[(dx + r) as usize];
            }
        }
    }
    let peak = acc.iter().copied().fold(0.0, f64::max);
    let values = acc
        .iter()
        .map(|&a| {
            if peak > 0.0 {
                (a / peak * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    GrayMap::new(width, height, values).expect("buffer matches dimensions")
}

pub fn generate_scene(cfg: &SynthConfig, index: usize) -> Result<SyntheticScene> {
    cfg.validate()?;
    let mut rng = scene_rng(cfg.seed, index);
    let n = rng.gen_range(cfg.objects.0..=cfg.objects.1);
    let boxes = sample_boxes(cfg, n, index, &mut rng)?;

    let k = (cfg.salient_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // order[0] is the most salient; consecutive weights differ by at least 0.75
    let mut latent = vec![0.0; n];
    for (pos, &obj) in order.iter().take(k).enumerate() {
        latent[obj] = (k - pos) as f64 + rng.gen_range(0.0..0.25);
    }

    let n_noise = (cfg.noise_fraction * cfg.fixations as f64).round() as usize;
    let n_object = if k == 0 {
        0
    } else {
        cfg.fixations - n_noise.min(cfg.fixations)
    };
    let counts = match cfg.allocation {
        Allocation::Proportional => apportion(&latent, n_object),
        Allocation::Multinomial => multinomial(&latent, n_object, &mut rng),
    };
    let mut points: Vec<(u32, u32)> = Vec::with_capacity(n_object + n_noise);
    for (b, &c) in boxes.iter().zip(&counts) {
        for _ in 0..c {
            points.push((
                rng.gen_range(b.x1 as u32..b.x2 as u32),
                rng.gen_range(b.y1 as u32..b.y2 as u32),
            ));
        }
    }
    for _ in 0..n_noise {
        points.push((rng.gen_range(0..cfg.width), rng.gen_range(0..cfg.height)));
    }
    let fixations: Vec<FixationPoint> = points
        .into_iter()
        .enumerate()
        .map(|(i, (u, v))| FixationPoint {
            u,
            v,
            observer_id: i as u32 % cfg.observers,
        })
        .collect();

    let proposals = boxes
        .into_iter()
        .enumerate()
        .map(|(i, b)| Proposal::new(i as u32, b, rng.gen_range(0.5..1.0)))
        .collect();
    let map = render_map(cfg.width, cfg.height, &fixations, cfg.sigma);
    let scene = Scene::new(
        scene_id(index),
        cfg.width,
        cfg.height,
        proposals,
        fixations,
        Some(map),
    )?;
    Ok(SyntheticScene { scene, latent })
}

pub fn generate_scenes(cfg: &SynthConfig, exec: Execution) -> Result<Vec<SyntheticScene>> {
    exec::map_range(cfg.n_scenes, exec, |i| generate_scene(cfg, i))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub scene: String,
    pub map: String,
}

/// Paths are relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub scenes: Vec<ManifestEntry>,
    pub gt: String,
    pub latent: String,
}

/// Writes `scenes/`, `maps/`, `gt.csv` (ranked with `gt_cfg`), `latent.csv`
/// and `manifest.json` under `out_dir`.
pub fn generate_dataset(
    cfg: &SynthConfig,
    gt_cfg: &GtConfig,
    out_dir: impl AsRef<Path>,
    exec: Execution,
) -> Result<Manifest> {
    gt_cfg.validate()?;
    let out = out_dir.as_ref();
    let scenes = generate_scenes(cfg, exec)?;
    let written = exec::try_map(&scenes, exec, |s| {
        let id = &s.scene.scene_id;
        let entry = ManifestEntry {
            id: id.clone(),
            scene: format!("scenes/{id}.json"),
            map: format!("maps/{id}.pgm"),
        };
        write_scene(
            &s.scene,
            out.join(&entry.scene),
            Some(&format!("../maps/{id}.pgm")),
        )?;
        let gt = gtgen::generate(&s.scene, gt_cfg)?;
        Ok::<_, Error>((entry, (id.clone(), gt), (id.clone(), s.latent_ranking())))
    })?;
    let mut entries = Vec::with_capacity(written.len());
    let mut gt = Vec::with_capacity(written.len());
    let mut latent = Vec::with_capacity(written.len());
    for (e, g, l) in written {
        entries.push(e);
        gt.push(g);
        latent.push(l);
    }
    write_ranking(&gt, out.join("gt.csv"))?;
    write_ranking(&latent, out.join("latent.csv"))?;
    let manifest = Manifest {
        seed: cfg.seed,
        scenes: entries,
        gt: "gt.csv".into(),
        latent: "latent.csv".into(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_bytes(&out.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}
