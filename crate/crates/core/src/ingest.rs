//! File formats: scene JSON, binary PGM fixation maps, ranking CSV and the
//! per-scene feature sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{validate_scene_id, BBox, FixationPoint, GrayMap, Proposal, Ranking, Scene};
use crate::error::{Error, Result};
use crate::preprocess::{FeatureVector, FEATURE_LEN};

pub const RANKING_HEADER: &str = "scene_id,proposal_id,order";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    scene_id: String,
    width: u32,
    height: u32,
    proposals: Vec<ProposalRecord>,
    fixations: Vec<FixationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixation_map_path: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalRecord {
    id: u32,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    confidence: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    dummy: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixationRecord {
    u: u32,
    v: u32,
    observer_id: u32,
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a scene file. A `fixation_map_path` is resolved relative to the
/// scene file's directory.
pub fn parse_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::MalformedJson {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|e| Error::MalformedJson {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let map = match &file.fixation_map_path {
        Some(rel) => {
            let base = path.parent().unwrap_or_else(|| Path::new(""));
            Some(parse_pgm(base.join(rel))?)
        }
        None => None,
    };
    scene_from_file(file, map)
}

fn scene_from_file(file: SceneFile, map: Option<GrayMap>) -> Result<Scene> {
    let mut proposals = Vec::with_capacity(file.proposals.len());
    for rec in file.proposals {
        if rec.dummy {
            proposals.push(Proposal::dummy(rec.id));
            continue;
        }
        let [x1, y1, x2, y2] = rec.bbox;
        let bbox = BBox::new(x1, y1, x2, y2)?;
        proposals.push(Proposal::new(rec.id, bbox, rec.confidence));
    }
    let fixations = file
        .fixations
        .into_iter()
        .map(|f| FixationPoint {
            u: f.u,
            v: f.v,
            observer_id: f.observer_id,
        })
        .collect();
    Scene::new(
        file.scene_id,
        file.width,
        file.height,
        proposals,
        fixations,
        map,
    )
}

/// Serializes a scene to JSON. The map itself is not written; pass the path
/// it will be stored at (relative to the scene file) if there is one.
pub fn scene_to_json(scene: &Scene, fixation_map_path: Option<&str>) -> String {
    let file = SceneFile {
        scene_id: scene.scene_id.clone(),
        width: scene.width,
        height: scene.height,
        proposals: scene
            .proposals
            .iter()
            .map(|p| ProposalRecord {
                id: p.id,
                bbox: [p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2],
                confidence: p.detector_confidence,
                dummy: p.is_dummy,
            })
            .collect(),
        fixations: scene
            .fixations
            .iter()
            .map(|f| FixationRecord {
                u: f.u,
                v: f.v,
                observer_id: f.observer_id,
            })
            .collect(),
        fixation_map_path: fixation_map_path.map(str::to_owned),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("scene serializes");
    text.push('\n');
    text
}

/// Writes `scene` to `path`; when the scene has a map it is written to
/// `map_rel` (relative to the scene file's directory).
pub fn write_scene(scene: &Scene, path: impl AsRef<Path>, map_rel: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    let rel = match (&scene.fixation_map, map_rel) {
        (Some(map), Some(rel)) => {
            let base = path.parent().unwrap_or_else(|| Path::new(""));
            write_pgm(map, base.join(rel))?;
            Some(rel)
        }
        _ => None,
    };
    write_bytes(path, scene_to_json(scene, rel).as_bytes())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayMap> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedFormat("expected binary PGM (P5)".into()));
    }
    let mut pos = 2;
    let mut header = [0u64; 3];
    for slot in header.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), Some(b'\n') | None) {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::TruncatedData("PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::UnsupportedFormat(
                "PGM header field is not a number".into(),
            ));
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::UnsupportedFormat("PGM header field out of range".into()))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval}, expected 255"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::TruncatedData("PGM header".into())),
    }
    let (width, height) = (
        u32::try_from(width).map_err(|_| Error::UnsupportedFormat("PGM width".into()))?,
        u32::try_from(height).map_err(|_| Error::UnsupportedFormat("PGM height".into()))?,
    );
    let need = width as usize * height as usize;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(Error::TruncatedData(format!(
            "PGM raster has {} of {} bytes",
            data.len(),
            need
        )));
    }
    GrayMap::new(width, height, data[..need].to_vec())
}

pub fn encode_pgm(map: &GrayMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend_from_slice(map.values());
    out
}

pub fn parse_pgm(path: impl AsRef<Path>) -> Result<GrayMap> {
    decode_pgm(&read_bytes(path.as_ref())?)
}

pub fn write_pgm(map: &GrayMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(map))
}

/// Renders rankings as CSV rows sorted by (scene_id, proposal_id).
pub fn ranking_csv(rankings: &[(String, Ranking)]) -> String {
    let mut rows: Vec<(&str, u32, u32)> = rankings
        .iter()
        .flat_map(|(sid, r)| r.iter().map(move |(id, o)| (sid.as_str(), id, o)))
        .collect();
    rows.sort_unstable();
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(RANKING_HEADER);
    out.push('\n');
    for (sid, id, order) in rows {
        out.push_str(&format!("{sid},{id},{order}\n"));
    }
    out
}

pub fn write_ranking(rankings: &[(String, Ranking)], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), ranking_csv(rankings).as_bytes())
}

/// Parses ranking CSV text; the result is sorted by scene id.
pub fn parse_ranking_csv(text: &str) -> Result<Vec<(String, Ranking)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end_matches('\r') == RANKING_HEADER => {}
        _ => {
            return Err(Error::invariant(
                "header",
                format!("expected \"{RANKING_HEADER}\""),
            ))
        }
    }
    let mut scenes: BTreeMap<String, BTreeMap<u32, u32>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::invariant(
                format!("line {lineno}"),
                "expected 3 fields",
            ));
        }
        validate_scene_id(fields[0])?;
        let id: u32 = fields[1]
            .parse()
            .map_err(|_| Error::invariant(format!("line {lineno}"), "bad proposal_id"))?;
        let order: u32 = fields[2]
            .parse()
            .map_err(|_| Error::invariant(format!("line {lineno}"), "bad order"))?;
        let labels = scenes.entry(fields[0].to_owned()).or_default();
        if labels.insert(id, order).is_some() {
            return Err(Error::invariant(
                format!("line {lineno}"),
                format!("duplicate proposal {id} in scene {}", fields[0]),
            ));
        }
    }
    scenes
        .into_iter()
        .map(|(sid, labels)| {
            Ranking::new(labels)
                .map(|r| (sid.clone(), r))
                .map_err(|e| match e {
                    Error::InvariantViolation { field, reason } => {
                        Error::invariant(format!("scene {sid} {field}"), reason)
                    }
                    other => other,
                })
        })
        .collect()
}

pub fn read_ranking(path: impl AsRef<Path>) -> Result<Vec<(String, Ranking)>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::invariant(path.display().to_string(), "not UTF-8"))?;
    parse_ranking_csv(&text)
}

/// Feature sidecar: little-endian u64 count, then `count × 14` f64 values.
pub fn encode_features(features: &[FeatureVector]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + features.len() * FEATURE_LEN * 8);
    out.extend_from_slice(&(features.len() as u64).to_le_bytes());
    for f in features {
        for v in f.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<Vec<FeatureVector>> {
    if bytes.len() < 8 {
        return Err(Error::TruncatedData("feature header".into()));
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    let need = count
        .checked_mul(FEATURE_LEN * 8)
        .ok_or_else(|| Error::TruncatedData("feature count overflow".into()))?;
    if body.len() != need {
        return Err(Error::TruncatedData(format!(
            "feature body has {} bytes, expected {}",
            body.len(),
            need
        )));
    }
    Ok(body
        .chunks_exact(FEATURE_LEN * 8)
        .map(|chunk| {
            let mut v = [0.0; FEATURE_LEN];
            for (slot, b) in v.iter_mut().zip(chunk.chunks_exact(8)) {
                *slot = f64::from_le_bytes(b.try_into().unwrap());
            }
            FeatureVector(v)
        })
        .collect())
}

pub fn write_features(features: &[FeatureVector], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_features(features))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    decode_features(&read_bytes(path.as_ref())?)
}

/// Scene files of a dataset directory (`DIR/scenes/*.json`), sorted by name.
pub fn scene_paths(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let scenes = dir.as_ref().join("scenes");
    let rd = fs::read_dir(&scenes).map_err(|e| Error::io(&scenes, e))?;
    let mut paths = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(&scenes, e))?;
        let p = entry.path();
        if p.extension().is_some_and(|e| e == "json") {
            paths.push(p);
        }
    }
    paths.sort();
    Ok(paths)
}
