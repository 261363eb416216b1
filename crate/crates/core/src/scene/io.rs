//! Scene files and dataset manifests.
//!
//! A scene file is pretty-printed JSON. Point arrays normally live in a
//! sidecar next to it (`<stem>.pts`): every object's points in object order,
//! row-major `P×3` little-endian `f32`, with no header. Scenes can also be
//! written with points inline.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Edge, ObjectInstance, RelationGraph, Roles, Scene};
use crate::error::{IfrError, Result};

pub const SCENE_FORMAT_VERSION: u32 = 1;
const SCENE_FORMAT: &str = "ifr-scene";
const MANIFEST_FORMAT: &str = "ifr-manifest";

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    format: String,
    version: u32,
    scene_id: String,
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points_file: Option<String>,
    objects: Vec<ObjectRecord>,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    category_id: u32,
    roles: Vec<String>,
    center: [f64; 3],
    scale: f64,
    num_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f32; 3]>>,
}

fn roles_to_flags(r: Roles) -> Vec<String> {
    let mut v = Vec::new();
    if r.trigger {
        v.push("trigger".to_string());
    }
    if r.responder {
        v.push("responder".to_string());
    }
    if v.is_empty() {
        v.push("background".to_string());
    }
    v
}

fn flags_to_roles(flags: &[String]) -> Result<Roles> {
    let mut r = Roles::BACKGROUND;
    let mut background = false;
    for f in flags {
        match f.as_str() {
            "trigger" => r.trigger = true,
            "responder" => r.responder = true,
            "background" => background = true,
            other => return Err(IfrError::Format(format!("unknown role flag `{other}`"))),
        }
    }
    if background && !r.is_background() {
        return Err(IfrError::InvariantViolation(
            "object is flagged background and also trigger or responder".into(),
        ));
    }
    Ok(r)
}

fn check_header(bytes: &[u8], expected_format: &str, expected_version: u32) -> Result<()> {
    let h: Header = serde_json::from_slice(bytes)?;
    if h.format != expected_format {
        return Err(IfrError::Format(format!(
            "expected format `{expected_format}`, found `{}`",
            h.format
        )));
    }
    if h.version != expected_version {
        return Err(IfrError::VersionMismatch {
            found: h.version,
            expected: expected_version,
        });
    }
    Ok(())
}

fn sidecar_name(path: &Path) -> Result<String> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| IfrError::Format(format!("bad scene path {}", path.display())))?;
    Ok(format!("{stem}.pts"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn to_file(scene: &Scene, points_file: Option<String>) -> SceneFile {
    let inline = points_file.is_none();
    SceneFile {
        format: SCENE_FORMAT.into(),
        version: SCENE_FORMAT_VERSION,
        scene_id: scene.scene_id.clone(),
        family: scene.family.clone(),
        points_file,
        objects: scene
            .objects
            .iter()
            .map(|o| ObjectRecord {
                category_id: o.category_id,
                roles: roles_to_flags(o.roles),
                center: o.center,
                scale: o.scale,
                num_points: o.points.len(),
                points: inline.then(|| o.points.clone()),
            })
            .collect(),
        edges: scene.ground_truth.edges().to_vec(),
    }
}

/// Writes `path` plus the point sidecar beside it.
pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let name = sidecar_name(path)?;
    let mut raw = Vec::with_capacity(scene.objects.iter().map(|o| o.points.len() * 12).sum());
    for o in &scene.objects {
        for p in &o.points {
            for v in p {
                raw.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path.with_file_name(&name), raw)?;
    write_json(path, &to_file(scene, Some(name)))
}

/// Writes a single self-contained file with points inline.
pub fn save_scene_inline(scene: &Scene, path: &Path) -> Result<()> {
    write_json(path, &to_file(scene, None))
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let bytes = fs::read(path)?;
    check_header(&bytes, SCENE_FORMAT, SCENE_FORMAT_VERSION)?;
    let file: SceneFile = serde_json::from_slice(&bytes)?;

    let mut sidecar: Option<(Vec<u8>, usize)> = None;
    if let Some(name) = &file.points_file {
        let data = fs::read(path.with_file_name(name))?;
        let expected: usize = file.objects.iter().map(|o| o.num_points * 12).sum();
        if data.len() < expected {
            return Err(IfrError::Truncated(format!(
                "point sidecar `{name}` has {} bytes, expected {expected}",
                data.len()
            )));
        }
        if data.len() > expected {
            return Err(IfrError::Format(format!(
                "point sidecar `{name}` has {} trailing bytes",
                data.len() - expected
            )));
        }
        sidecar = Some((data, 0));
    }

    let mut objects = Vec::with_capacity(file.objects.len());
    for (k, rec) in file.objects.into_iter().enumerate() {
        let points = match (rec.points, sidecar.as_mut()) {
            (Some(p), _) => p,
            (None, Some((data, offset))) => {
                let chunk = &data[*offset..*offset + rec.num_points * 12];
                *offset += rec.num_points * 12;
                chunk
                    .chunks_exact(12)
                    .map(|c| {
                        let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]);
                        [f(0), f(4), f(8)]
                    })
                    .collect()
            }
            (None, None) => {
                return Err(IfrError::Format(format!("object {k} has no points and no sidecar is named")));
            }
        };
        if points.len() != rec.num_points {
            return Err(IfrError::Format(format!(
                "object {k} declares {} points but has {}",
                rec.num_points,
                points.len()
            )));
        }
        objects.push(ObjectInstance {
            points,
            center: rec.center,
            scale: rec.scale,
            category_id: rec.category_id,
            roles: flags_to_roles(&rec.roles)?,
        });
    }
    let graph = RelationGraph::new(objects.len(), file.edges)?;
    Scene::new(file.scene_id, file.family, objects, graph)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    /// Relative to the manifest's directory.
    pub file: String,
    pub family: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(seed: u64, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.scene_id.as_str()) {
                return Err(IfrError::DuplicateSceneId(e.scene_id.clone()));
            }
        }
        Ok(Self {
            format: MANIFEST_FORMAT.into(),
            version: SCENE_FORMAT_VERSION,
            seed,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        check_header(&bytes, MANIFEST_FORMAT, SCENE_FORMAT_VERSION)?;
        let m: Manifest = serde_json::from_slice(&bytes)?;
        Manifest::new(m.seed, m.entries)
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Loads every scene of `split`, in manifest order. `dir` is the
    /// manifest's directory.
    pub fn load_split(&self, dir: &Path, split: Split) -> Result<Vec<Scene>> {
        self.entries_in(split).map(|e| load_scene(&resolve(dir, &e.file))).collect()
    }
}

fn resolve(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}
