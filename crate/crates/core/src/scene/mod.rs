//! Scenes, objects and functional relation graphs.
//!
//! Object order is fixed at construction and is the index order used by every
//! belief matrix, observation row and file in the crate. Category ids are kept
//! for ground truth and reporting; the learned models only ever read an
//! object's points, center and scale.

pub mod catalog;
mod io;
mod pointcloud;

use serde::{Deserialize, Serialize};

use crate::error::{IfrError, Result};

pub use io::{load_scene, save_scene, save_scene_inline, Manifest, ManifestEntry, Split, SCENE_FORMAT_VERSION};
pub use pointcloud::{distance, norm, normalize_pointcloud, Normalized, Point};

/// Role flags. An object that is neither trigger nor responder is background.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub trigger: bool,
    pub responder: bool,
}

impl Roles {
    pub const TRIGGER: Roles = Roles { trigger: true, responder: false };
    pub const RESPONDER: Roles = Roles { trigger: false, responder: true };
    pub const BOTH: Roles = Roles { trigger: true, responder: true };
    pub const BACKGROUND: Roles = Roles { trigger: false, responder: false };

    pub fn is_background(&self) -> bool {
        !self.trigger && !self.responder
    }
}

const SHAPE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInstance {
    /// Zero-centroid, unit-max-norm shape, stored at f32 precision so that the
    /// binary sidecar round-trips exactly.
    pub points: Vec<[f32; 3]>,
    pub center: Point,
    pub scale: f64,
    pub category_id: u32,
    pub roles: Roles,
}

impl ObjectInstance {
    /// Builds an object from a cloud in world coordinates.
    pub fn from_world_points(raw: &[Point], category_id: u32, roles: Roles) -> Result<Self> {
        let n = normalize_pointcloud(raw)?;
        let points = n
            .points
            .iter()
            .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
            .collect();
        let obj = Self {
            points,
            center: n.center,
            scale: n.scale,
            category_id,
            roles,
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(IfrError::InvariantViolation(format!(
                "object has {} points, need at least 4",
                self.points.len()
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(IfrError::InvariantViolation(format!("scale {} is not positive", self.scale)));
        }
        if self.center.iter().any(|v| !v.is_finite()) {
            return Err(IfrError::InvariantViolation("non-finite center".into()));
        }
        let mut c = [0.0f64; 3];
        let mut max_norm = 0.0f64;
        for p in &self.points {
            let q = [p[0] as f64, p[1] as f64, p[2] as f64];
            for k in 0..3 {
                c[k] += q[k];
            }
            max_norm = max_norm.max(norm(&q));
        }
        let inv = 1.0 / self.points.len() as f64;
        let centroid = [c[0] * inv, c[1] * inv, c[2] * inv];
        if norm(&centroid) > SHAPE_TOL {
            return Err(IfrError::InvariantViolation(format!(
                "points centroid {centroid:?} is not at the origin"
            )));
        }
        if (max_norm - 1.0).abs() > SHAPE_TOL {
            return Err(IfrError::InvariantViolation(format!(
                "max point norm {max_norm} is not 1"
            )));
        }
        Ok(())
    }

    pub fn points_f64(&self) -> impl Iterator<Item = Point> + '_ {
        self.points.iter().map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
    }
}

/// `points · scale + center`.
pub fn world_points(obj: &ObjectInstance) -> Vec<Point> {
    obj.points_f64()
        .map(|p| {
            [
                p[0] * obj.scale + obj.center[0],
                p[1] * obj.scale + obj.center[1],
                p[2] * obj.scale + obj.center[2],
            ]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub trigger: usize,
    pub responder: usize,
    pub type_id: u32,
}

/// Directed adjacency; `(i, j)` means triggering `i` changes `j`. The
/// diagonal holds self-relations.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<bool>,
}

impl RelationGraph {
    pub fn new(n: usize, mut edges: Vec<Edge>) -> Result<Self> {
        edges.sort();
        let mut adjacency = vec![false; n * n];
        for e in &edges {
            if e.trigger >= n || e.responder >= n {
                return Err(IfrError::InvariantViolation(format!(
                    "edge {}→{} out of range for {n} objects",
                    e.trigger, e.responder
                )));
            }
            let slot = &mut adjacency[e.trigger * n + e.responder];
            if *slot {
                return Err(IfrError::InvariantViolation(format!(
                    "duplicate edge {}→{}",
                    e.trigger, e.responder
                )));
            }
            *slot = true;
        }
        Ok(Self { n, edges, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub family: String,
    pub objects: Vec<ObjectInstance>,
    pub ground_truth: RelationGraph,
}

impl Scene {
    pub fn new(scene_id: String, family: String, objects: Vec<ObjectInstance>, ground_truth: RelationGraph) -> Result<Self> {
        let scene = Self {
            scene_id,
            family,
            objects,
            ground_truth,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn n(&self) -> usize {
        self.objects.len()
    }

    pub fn centers(&self) -> Vec<Point> {
        self.objects.iter().map(|o| o.center).collect()
    }

    /// Checks object invariants and that every ground-truth edge goes from a
    /// trigger to a responder with a catalog type matching both categories.
    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(IfrError::InvariantViolation(format!("scene `{}` has no objects", self.scene_id)));
        }
        if self.ground_truth.n() != self.objects.len() {
            return Err(IfrError::InvariantViolation(format!(
                "relation graph has {} nodes for {} objects",
                self.ground_truth.n(),
                self.objects.len()
            )));
        }
        for (k, o) in self.objects.iter().enumerate() {
            o.validate()
                .map_err(|e| IfrError::InvariantViolation(format!("object {k}: {e}")))?;
            let c = catalog::category(o.category_id).ok_or_else(|| {
                IfrError::InvariantViolation(format!("object {k} has unknown category {}", o.category_id))
            })?;
            if c.roles != o.roles {
                return Err(IfrError::InvariantViolation(format!(
                    "object {k} roles {:?} differ from category `{}`",
                    o.roles, c.name
                )));
            }
        }
        for e in self.ground_truth.edges() {
            let (t, r) = (&self.objects[e.trigger], &self.objects[e.responder]);
            if !t.roles.trigger {
                return Err(IfrError::InvariantViolation(format!(
                    "edge {}→{} starts at a non-trigger object",
                    e.trigger, e.responder
                )));
            }
            if !r.roles.responder {
                return Err(IfrError::InvariantViolation(format!(
                    "edge {}→{} ends at a non-responder object",
                    e.trigger, e.responder
                )));
            }
            let ty = catalog::relation_type(e.type_id).ok_or_else(|| {
                IfrError::InvariantViolation(format!("edge type {} is not in the catalog", e.type_id))
            })?;
            if ty.trigger_category != t.category_id || ty.responder_category != r.category_id {
                return Err(IfrError::InvariantViolation(format!(
                    "edge {}→{} has type `{}` but connects categories {} → {}",
                    e.trigger, e.responder, ty.name, t.category_id, r.category_id
                )));
            }
        }
        Ok(())
    }
}
