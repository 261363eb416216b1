//! Procedural desk-scale scenes with grammar-driven ground truth.
//!
//! A scene is generated in four stages: draw inventory counts, place object
//! centers by rejection sampling, shuffle the object order, then bind
//! relations. Many-to-many types connect every matching pair. One-to-one
//! types bind globally greedily by ascending center distance, ties going to
//! the lower responder index.

pub mod shapes;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IfrError, Result};
use crate::rng::{derive_seed, tags};
use crate::scene::catalog::{self, Arity};
use crate::scene::{distance, Edge, ObjectInstance, Point, RelationGraph, Scene, Split};
use shapes::Jitter;

/// Named placement region inside a room of extent `[x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Counter,
    Wall,
    Ceiling,
    Floor,
    Table,
    Shelf,
}

impl Region {
    fn bounds(&self, e: [f64; 3]) -> [(f64, f64); 3] {
        let [x, y, z] = e;
        match self {
            Region::Counter => [(0.3, x - 0.3), (0.25, 0.6), (0.92, 0.98)],
            Region::Wall => [(0.3, x - 0.3), (0.02, 0.06), (1.1, 1.4)],
            Region::Ceiling => [(0.5, x - 0.5), (0.5, y - 0.5), (z - 0.2, z - 0.1)],
            Region::Floor => [(0.3, x - 0.3), (0.3, y - 0.3), (0.1, 0.3)],
            Region::Table => [(x / 2.0 - 0.7, x / 2.0 + 0.7), (y / 2.0 - 0.45, y / 2.0 + 0.45), (0.75, 0.8)],
            Region::Shelf => [(0.5, x - 0.5), (y - 0.3, y - 0.1), (0.8, 1.6)],
        }
    }

    fn sample<R: Rng + ?Sized>(&self, e: [f64; 3], rng: &mut R) -> Point {
        let b = self.bounds(e);
        [
            rng.random_range(b[0].0..=b[0].1),
            rng.random_range(b[1].0..=b[1].1),
            rng.random_range(b[2].0..=b[2].1),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Region(Region),
    /// Within `radius` of an instance of `category`. Inside a group that
    /// also holds `category`, the k-th instance follows the k-th anchor.
    Near { category: String, radius: f64 },
}

/// Categories that share one drawn count, each with its own zone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InventoryGroup {
    pub categories: Vec<String>,
    pub zones: Vec<Zone>,
    pub count: [usize; 2],
}

/// K triggers in a row with K responders in a row behind them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    pub trigger: String,
    pub responder: String,
    pub k: [usize; 2],
    pub region: Region,
    pub trigger_spacing: f64,
    pub responder_spacing: f64,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistractorSpec {
    pub categories: Vec<String>,
    pub regions: Vec<Region>,
    pub count: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomFamilyConfig {
    pub name: String,
    pub extent: [f64; 3],
    pub groups: Vec<InventoryGroup>,
    #[serde(default)]
    pub ambiguity: Option<AmbiguitySpec>,
    pub distractors: DistractorSpec,
    pub relation_types: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub points_per_object: usize,
    pub stretch: [f64; 2],
    pub noise: f64,
    pub min_center_distance: f64,
    pub families: Vec<RoomFamilyConfig>,
}

const MAX_SCENE_ATTEMPTS: usize = 50;
const MAX_PLACEMENT_TRIES: usize = 200;

fn cat_id(name: &str) -> Result<u32> {
    catalog::category_by_name(name)
        .map(|c| c.id)
        .ok_or_else(|| IfrError::Unknown {
            kind: "category",
            name: name.to_string(),
        })
}

fn group(categories: &[&str], zones: Vec<Zone>, count: [usize; 2]) -> InventoryGroup {
    InventoryGroup {
        categories: categories.iter().map(|s| s.to_string()).collect(),
        zones,
        count,
    }
}

fn near(category: &str, radius: f64) -> Zone {
    Zone::Near {
        category: category.into(),
        radius,
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        use Region::*;
        use Zone::Region as R;
        let lights = |max| group(&["switch", "ceiling-lamp"], vec![R(Wall), R(Ceiling)], [1, max]);
        let families = vec![
            RoomFamilyConfig {
                name: "kitchen".into(),
                extent: [4.0, 3.0, 2.6],
                groups: vec![
                    lights(2),
                    group(&["microwave"], vec![R(Counter)], [0, 1]),
                    group(&["knife"], vec![R(Counter)], [1, 2]),
                    group(&["fruit"], vec![near("knife", 0.4)], [1, 3]),
                    group(&["faucet"], vec![R(Counter)], [0, 1]),
                ],
                ambiguity: Some(AmbiguitySpec {
                    trigger: "knob".into(),
                    responder: "burner".into(),
                    k: [2, 4],
                    region: Counter,
                    trigger_spacing: 0.15,
                    responder_spacing: 0.22,
                    depth: 0.25,
                }),
                distractors: DistractorSpec {
                    categories: names(&["box", "book", "plant"]),
                    regions: vec![Counter, Floor, Shelf],
                    count: [1, 3],
                },
                relation_types: names(&[
                    "switch-ceiling-lamp",
                    "knob-burner",
                    "knife-fruit",
                    "faucet-fruit",
                    "microwave-self",
                    "faucet-self",
                ]),
            },
            RoomFamilyConfig {
                name: "bathroom".into(),
                extent: [3.0, 2.5, 2.6],
                groups: vec![
                    lights(2),
                    group(&["holder", "towel"], vec![R(Wall), near("holder", 0.15)], [1, 3]),
                    group(&["faucet"], vec![R(Counter)], [1, 2]),
                ],
                ambiguity: None,
                distractors: DistractorSpec {
                    categories: names(&["box", "plant"]),
                    regions: vec![Floor, Counter],
                    count: [1, 3],
                },
                relation_types: names(&["switch-ceiling-lamp", "holder-towel", "faucet-self"]),
            },
            RoomFamilyConfig {
                name: "bedroom".into(),
                extent: [4.0, 4.0, 2.6],
                groups: vec![
                    lights(2),
                    group(&["desk-lamp"], vec![R(Table)], [1, 2]),
                    group(&["tv"], vec![R(Shelf)], [1, 1]),
                    group(&["remote"], vec![near("tv", 0.5)], [1, 2]),
                ],
                ambiguity: None,
                distractors: DistractorSpec {
                    categories: names(&["book", "box"]),
                    regions: vec![Table, Shelf, Floor],
                    count: [2, 4],
                },
                relation_types: names(&["switch-ceiling-lamp", "desk-lamp-self", "remote-tv"]),
            },
            RoomFamilyConfig {
                name: "living".into(),
                extent: [5.0, 4.0, 2.6],
                groups: vec![
                    lights(3),
                    group(&["tv"], vec![R(Shelf)], [1, 1]),
                    group(&["speaker"], vec![near("tv", 0.6)], [1, 2]),
                    group(&["remote"], vec![near("tv", 0.6)], [1, 2]),
                    group(&["desk-lamp"], vec![R(Table)], [0, 1]),
                ],
                ambiguity: None,
                distractors: DistractorSpec {
                    categories: names(&["plant", "book", "box"]),
                    regions: vec![Floor, Table, Shelf],
                    count: [1, 3],
                },
                relation_types: names(&["switch-ceiling-lamp", "remote-tv", "remote-speaker", "desk-lamp-self"]),
            },
        ];
        Self {
            points_per_object: 2048,
            stretch: [0.85, 1.15],
            noise: 0.01,
            min_center_distance: 0.1,
            families,
        }
    }
}

impl GeneratorConfig {
    pub fn family(&self, name: &str) -> Result<&RoomFamilyConfig> {
        self.families.iter().find(|f| f.name == name).ok_or_else(|| IfrError::Unknown {
            kind: "family",
            name: name.to_string(),
        })
    }

    pub fn family_names(&self) -> Vec<String> {
        self.families.iter().map(|f| f.name.clone()).collect()
    }

    /// Copy whose kitchen family keeps only 2×2 and 3×3 knob/burner groups.
    pub fn ambiguity_heavy(&self) -> Result<GeneratorConfig> {
        let mut cfg = self.clone();
        let kitchen = cfg
            .families
            .iter_mut()
            .find(|f| f.ambiguity.is_some())
            .ok_or_else(|| IfrError::InvalidConfig("no family has an ambiguity group".into()))?;
        kitchen.ambiguity.as_mut().expect("checked").k = [2, 3];
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IfrError::InvalidConfig(m));
        if self.points_per_object < 4 {
            return bad(format!("points_per_object {} < 4", self.points_per_object));
        }
        if !(self.stretch[0] > 0.0 && self.stretch[0] <= self.stretch[1]) {
            return bad(format!("stretch range {:?} is invalid", self.stretch));
        }
        if !(self.noise >= 0.0 && self.noise < 0.5) {
            return bad(format!("noise {} is outside [0, 0.5)", self.noise));
        }
        if !(self.min_center_distance > 0.0) {
            return bad("min_center_distance must be positive".into());
        }
        if self.families.is_empty() {
            return bad("no families".into());
        }
        let mut seen = BTreeSet::new();
        for f in &self.families {
            if !seen.insert(f.name.as_str()) {
                return bad(format!("duplicate family `{}`", f.name));
            }
            f.validate()?;
        }
        Ok(())
    }
}

impl RoomFamilyConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IfrError::InvalidConfig(format!("family `{}`: {m}", self.name)));
        if self.extent.iter().any(|v| !(*v > 1.2)) {
            return bad(format!("extent {:?} is too small", self.extent));
        }
        // Category → (group index or usize::MAX for the ambiguity group, minimum count).
        let mut inventory: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for (gi, g) in self.groups.iter().enumerate() {
            if g.categories.is_empty() || g.categories.len() != g.zones.len() {
                return bad(format!("group {gi} needs one zone per category"));
            }
            if g.count[0] > g.count[1] {
                return bad(format!("group {gi} count range {:?} is inverted", g.count));
            }
            for (c, z) in g.categories.iter().zip(&g.zones) {
                let id = cat_id(c)?;
                if inventory.insert(id, (gi, g.count[0])).is_some() {
                    return bad(format!("category `{c}` appears twice"));
                }
                if let Zone::Near { category, radius } = z {
                    let anchor = cat_id(category)?;
                    if !(*radius > 0.0) {
                        return bad(format!("near radius for `{c}` must be positive"));
                    }
                    let in_group = g.categories.iter().position(|x| x == category);
                    let own = g.categories.iter().position(|x| x == c).expect("present");
                    match (in_group, inventory.get(&anchor)) {
                        (Some(p), _) if p < own => {}
                        (None, Some(&(_, min))) if min >= 1 => {}
                        _ => return bad(format!("`{c}` is placed near `{category}`, which is not reliably placed before it")),
                    }
                }
            }
        }
        if let Some(a) = &self.ambiguity {
            if a.k[0] < 1 || a.k[0] > a.k[1] || a.k[1] > 6 {
                return bad(format!("ambiguity k range {:?} must lie in 1..=6", a.k));
            }
            for c in [&a.trigger, &a.responder] {
                if inventory.insert(cat_id(c)?, (usize::MAX, a.k[0])).is_some() {
                    return bad(format!("category `{c}` appears twice"));
                }
            }
        }
        if self.distractors.count[0] > self.distractors.count[1] {
            return bad("distractor count range is inverted".into());
        }
        if self.distractors.count[1] > 0 && (self.distractors.categories.is_empty() || self.distractors.regions.is_empty()) {
            return bad("distractors need categories and regions".into());
        }
        for c in &self.distractors.categories {
            let id = cat_id(c)?;
            if !catalog::category(id).expect("known").roles.is_background() {
                return bad(format!("distractor `{c}` is not a background category"));
            }
        }
        for t in &self.relation_types {
            let ty = catalog::relation_type_by_name(t).ok_or_else(|| IfrError::Unknown {
                kind: "relation type",
                name: t.clone(),
            })?;
            let (Some(tg), Some(rg)) = (inventory.get(&ty.trigger_category), inventory.get(&ty.responder_category)) else {
                return bad(format!("relation type `{t}` references categories outside the inventory"));
            };
            if ty.arity == Arity::OneToOne && !ty.is_self() && tg.0 != rg.0 {
                return bad(format!("one-to-one type `{t}` needs trigger and responder in one group"));
            }
        }
        Ok(())
    }
}

struct Placed {
    category: u32,
    center: Point,
}

fn place<R: Rng + ?Sized>(
    placed: &[Placed],
    min_dist: f64,
    rng: &mut R,
    mut propose: impl FnMut(&mut R) -> Point,
) -> Option<Point> {
    for _ in 0..MAX_PLACEMENT_TRIES {
        let c = propose(rng);
        if placed.iter().all(|p| distance(&p.center, &c) >= min_dist) {
            return Some(c);
        }
    }
    None
}

fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    loop {
        let v = [
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ];
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return [v[0] * radius, v[1] * radius, v[2] * radius];
        }
    }
}

/// Places every object of one draw; `None` when rejection sampling fails.
fn layout<R: Rng + ?Sized>(f: &RoomFamilyConfig, min_dist: f64, rng: &mut R) -> Result<Option<Vec<Placed>>> {
    let e = f.extent;
    let mut placed: Vec<Placed> = Vec::new();

    if let Some(a) = &f.ambiguity {
        let k = rng.random_range(a.k[0]..=a.k[1]);
        let (t, r) = (cat_id(&a.trigger)?, cat_id(&a.responder)?);
        let b = a.region.bounds(e);
        let half = 0.5 * (k as f64 - 1.0) * a.trigger_spacing.max(a.responder_spacing);
        if b[0].0 + half > b[0].1 - half {
            return Ok(None);
        }
        let x0 = rng.random_range(b[0].0 + half..=b[0].1 - half);
        let y0 = b[1].0;
        let z0 = rng.random_range(b[2].0..=b[2].1);
        for i in 0..k {
            let off = i as f64 - 0.5 * (k as f64 - 1.0);
            placed.push(Placed {
                category: t,
                center: [x0 + off * a.trigger_spacing + rng.random_range(-0.01..=0.01), y0, z0],
            });
        }
        for i in 0..k {
            let off = i as f64 - 0.5 * (k as f64 - 1.0);
            placed.push(Placed {
                category: r,
                center: [
                    x0 + off * a.responder_spacing + rng.random_range(-0.02..=0.02),
                    y0 + a.depth + rng.random_range(-0.02..=0.02),
                    z0 + 0.03,
                ],
            });
        }
        for i in 0..placed.len() {
            for j in 0..i {
                if distance(&placed[i].center, &placed[j].center) < min_dist {
                    return Ok(None);
                }
            }
        }
    }

    for g in &f.groups {
        let count = rng.random_range(g.count[0]..=g.count[1]);
        let ids: Vec<u32> = g.categories.iter().map(|c| cat_id(c)).collect::<Result<_>>()?;
        let mut group_centers: Vec<Vec<Point>> = vec![Vec::new(); ids.len()];
        for k in 0..count {
            for (ci, (&id, zone)) in ids.iter().zip(&g.zones).enumerate() {
                let c = match zone {
                    Zone::Region(r) => place(&placed, min_dist, rng, |rng| r.sample(e, rng)),
                    Zone::Near { category, radius } => {
                        let anchor = cat_id(category)?;
                        let anchor_center = match ids.iter().position(|&x| x == anchor) {
                            Some(ai) => group_centers[ai][k],
                            None => {
                                let pool: Vec<Point> = placed.iter().filter(|p| p.category == anchor).map(|p| p.center).collect();
                                if pool.is_empty() {
                                    return Ok(None);
                                }
                                pool[rng.random_range(0..pool.len())]
                            }
                        };
                        place(&placed, min_dist, rng, |rng| {
                            let d = sample_in_ball(rng, *radius);
                            [anchor_center[0] + d[0], anchor_center[1] + d[1], anchor_center[2] + d[2]]
                        })
                    }
                };
                let Some(c) = c else { return Ok(None) };
                group_centers[ci].push(c);
                placed.push(Placed { category: id, center: c });
            }
        }
    }

    let d = &f.distractors;
    let count = rng.random_range(d.count[0]..=d.count[1]);
    for _ in 0..count {
        let id = cat_id(&d.categories[rng.random_range(0..d.categories.len())])?;
        let region = d.regions[rng.random_range(0..d.regions.len())];
        let Some(c) = place(&placed, min_dist, rng, |rng| region.sample(e, rng)) else {
            return Ok(None);
        };
        placed.push(Placed { category: id, center: c });
    }
    Ok(Some(placed))
}

/// Ground-truth edges for objects in their final order.
pub fn bind_relations(categories: &[u32], centers: &[Point], type_names: &[String]) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for name in type_names {
        let ty = catalog::relation_type_by_name(name).ok_or_else(|| IfrError::Unknown {
            kind: "relation type",
            name: name.clone(),
        })?;
        let triggers: Vec<usize> = (0..categories.len()).filter(|&i| categories[i] == ty.trigger_category).collect();
        let responders: Vec<usize> = (0..categories.len()).filter(|&j| categories[j] == ty.responder_category).collect();
        match ty.arity {
            Arity::ManyToMany => {
                for &i in &triggers {
                    for &j in &responders {
                        edges.push(Edge { trigger: i, responder: j, type_id: ty.type_id });
                    }
                }
            }
            Arity::OneToOne => {
                let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
                for &i in &triggers {
                    for &j in &responders {
                        pairs.push((distance(&centers[i], &centers[j]), j, i));
                    }
                }
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                let (mut t_bound, mut r_bound) = (BTreeSet::new(), BTreeSet::new());
                for (_, j, i) in pairs {
                    if !t_bound.contains(&i) && !r_bound.contains(&j) {
                        t_bound.insert(i);
                        r_bound.insert(j);
                        edges.push(Edge { trigger: i, responder: j, type_id: ty.type_id });
                    }
                }
            }
        }
    }
    Ok(edges)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum-sum assignment of triggers to responders by brute force, or
/// `None` when the optimum is not unique.
pub fn brute_force_assignment(triggers: &[Point], responders: &[Point]) -> Option<Vec<usize>> {
    let k = triggers.len();
    assert_eq!(k, responders.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut unique = true;
    for p in permutations(k) {
        let s: f64 = (0..k).map(|i| distance(&triggers[i], &responders[p[i]])).sum();
        match &best {
            Some((b, _)) if (s - b).abs() <= 1e-12 => unique = false,
            Some((b, _)) if s > *b => {}
            _ => {
                best = Some((s, p));
                unique = true;
            }
        }
    }
    if unique {
        best.map(|b| b.1)
    } else {
        None
    }
}

fn ambiguity_agrees(f: &RoomFamilyConfig, categories: &[u32], centers: &[Point], edges: &[Edge]) -> Result<bool> {
    let Some(a) = &f.ambiguity else { return Ok(true) };
    let (t, r) = (cat_id(&a.trigger)?, cat_id(&a.responder)?);
    let ts: Vec<usize> = (0..categories.len()).filter(|&i| categories[i] == t).collect();
    let rs: Vec<usize> = (0..categories.len()).filter(|&j| categories[j] == r).collect();
    let tp: Vec<Point> = ts.iter().map(|&i| centers[i]).collect();
    let rp: Vec<Point> = rs.iter().map(|&j| centers[j]).collect();
    let Some(best) = brute_force_assignment(&tp, &rp) else { return Ok(false) };
    for (a_idx, &i) in ts.iter().enumerate() {
        let want = rs[best[a_idx]];
        let got: Vec<usize> = edges
            .iter()
            .filter(|e| e.trigger == i && categories[e.responder] == r)
            .map(|e| e.responder)
            .collect();
        if got != [want] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Deterministic in `(config, family, scene_id, seed)`.
pub fn generate_scene(cfg: &GeneratorConfig, family: &str, scene_id: &str, seed: u64) -> Result<Scene> {
    let f = cfg.family(family)?;
    f.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Jitter {
        stretch: (cfg.stretch[0], cfg.stretch[1]),
        noise: cfg.noise,
    };
    let mut reason = "object placement failed";
    for _ in 0..MAX_SCENE_ATTEMPTS {
        let Some(mut placed) = layout(f, cfg.min_center_distance, &mut rng)? else {
            reason = "object placement failed";
            continue;
        };
        if placed.is_empty() {
            return Err(IfrError::Unsatisfiable(format!("family `{family}` drew an empty inventory")));
        }
        placed.shuffle(&mut rng);
        let categories: Vec<u32> = placed.iter().map(|p| p.category).collect();
        let centers: Vec<Point> = placed.iter().map(|p| p.center).collect();
        let edges = bind_relations(&categories, &centers, &f.relation_types)?;
        if !ambiguity_agrees(f, &categories, &centers, &edges)? {
            reason = "ambiguity group binding disagreed with the minimum-sum assignment";
            continue;
        }
        let mut objects = Vec::with_capacity(placed.len());
        for p in &placed {
            let mut local = shapes::sample_shape(p.category, cfg.points_per_object, jitter, &mut rng);
            let n = local.len() as f64;
            let mut m = [0.0; 3];
            for q in &local {
                for k in 0..3 {
                    m[k] += q[k] / n;
                }
            }
            for q in &mut local {
                for k in 0..3 {
                    q[k] += p.center[k] - m[k];
                }
            }
            let roles = catalog::category(p.category).expect("validated").roles;
            objects.push(ObjectInstance::from_world_points(&local, p.category, roles)?);
        }
        // Bind on the stored centers, which differ from the placement
        // centers by float rounding only.
        let stored: Vec<Point> = objects.iter().map(|o| o.center).collect();
        let edges = bind_relations(&categories, &stored, &f.relation_types)?;
        if !ambiguity_agrees(f, &categories, &stored, &edges)? {
            reason = "ambiguity group binding disagreed with the minimum-sum assignment";
            continue;
        }
        let graph = RelationGraph::new(objects.len(), edges)?;
        return Scene::new(scene_id.to_string(), family.to_string(), objects, graph);
    }
    Err(IfrError::Unsatisfiable(format!(
        "family `{family}`: {reason} after {MAX_SCENE_ATTEMPTS} attempts"
    )))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub train: usize,
    pub test: usize,
    /// Empty means every configured family.
    #[serde(default)]
    pub train_families: Vec<String>,
    #[serde(default)]
    pub test_families: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub scenes: usize,
    pub objects_per_scene: f64,
    pub edges_per_scene: f64,
    pub self_edges_per_scene: f64,
    pub trigger_fraction: f64,
    pub responder_fraction: f64,
    /// Fraction of off-diagonal relations whose centers are < 0.5 m apart.
    pub ifr_within_half_meter: f64,
    pub per_family: BTreeMap<String, usize>,
    pub per_category: BTreeMap<String, usize>,
    pub per_split: BTreeMap<String, usize>,
}

pub fn dataset_stats(scenes: &[(Scene, Split)]) -> DatasetStats {
    let mut s = DatasetStats {
        scenes: scenes.len(),
        objects_per_scene: 0.0,
        edges_per_scene: 0.0,
        self_edges_per_scene: 0.0,
        trigger_fraction: 0.0,
        responder_fraction: 0.0,
        ifr_within_half_meter: 0.0,
        per_family: BTreeMap::new(),
        per_category: BTreeMap::new(),
        per_split: BTreeMap::new(),
    };
    let (mut objects, mut edges, mut selfs, mut triggers, mut responders) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let (mut cross, mut near) = (0usize, 0usize);
    for (scene, split) in scenes {
        *s.per_family.entry(scene.family.clone()).or_default() += 1;
        *s.per_split.entry(split.to_string()).or_default() += 1;
        objects += scene.n();
        edges += scene.ground_truth.num_edges();
        for o in &scene.objects {
            triggers += o.roles.trigger as usize;
            responders += o.roles.responder as usize;
            let name = catalog::category(o.category_id).map(|c| c.name).unwrap_or("?");
            *s.per_category.entry(name.to_string()).or_default() += 1;
        }
        for e in scene.ground_truth.edges() {
            if e.trigger == e.responder {
                selfs += 1;
            } else {
                cross += 1;
                if distance(&scene.objects[e.trigger].center, &scene.objects[e.responder].center) < 0.5 {
                    near += 1;
                }
            }
        }
    }
    let ns = scenes.len().max(1) as f64;
    s.objects_per_scene = objects as f64 / ns;
    s.edges_per_scene = edges as f64 / ns;
    s.self_edges_per_scene = selfs as f64 / ns;
    s.trigger_fraction = triggers as f64 / objects.max(1) as f64;
    s.responder_fraction = responders as f64 / objects.max(1) as f64;
    s.ifr_within_half_meter = near as f64 / cross.max(1) as f64;
    s
}

pub struct Dataset {
    pub seed: u64,
    pub scenes: Vec<(Scene, Split)>,
    pub stats: DatasetStats,
}

/// Train scenes come first, then test scenes; families are assigned round
/// robin within each split. Scene `k` uses seed `derive_seed(seed, SCENE, k)`.
pub fn generate_dataset(cfg: &GeneratorConfig, spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    if spec.train + spec.test == 0 {
        return Err(IfrError::EmptyInput("dataset needs at least one scene".into()));
    }
    let pick = |fs: &Vec<String>| -> Result<Vec<String>> {
        if fs.is_empty() {
            return Ok(cfg.family_names());
        }
        for f in fs {
            cfg.family(f)?;
        }
        Ok(fs.clone())
    };
    let mut jobs: Vec<(Split, String)> = Vec::new();
    for (split, count, fams) in [
        (Split::Train, spec.train, pick(&spec.train_families)?),
        (Split::Test, spec.test, pick(&spec.test_families)?),
    ] {
        for k in 0..count {
            jobs.push((split, fams[k % fams.len()].clone()));
        }
    }
    let mut scenes = Vec::with_capacity(jobs.len());
    let mut ids = BTreeSet::new();
    let mut per_split_index: BTreeMap<Split, usize> = BTreeMap::new();
    for (global, (split, family)) in jobs.into_iter().enumerate() {
        let idx = per_split_index.entry(split).or_default();
        let id = format!("{split}-{family}-{:04}", *idx);
        *idx += 1;
        if !ids.insert(id.clone()) {
            return Err(IfrError::DuplicateSceneId(id));
        }
        let scene = generate_scene(cfg, &family, &id, derive_seed(seed, tags::SCENE, global as u64))?;
        scenes.push((scene, split));
    }
    let stats = dataset_stats(&scenes);
    Ok(Dataset { seed, scenes, stats })
}

/// Writes scene files, the manifest and `stats.json` into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &std::path::Path) -> Result<crate::scene::Manifest> {
    use crate::scene::{save_scene, Manifest, ManifestEntry};
    std::fs::create_dir_all(dir.join("scenes"))?;
    let mut entries = Vec::with_capacity(dataset.scenes.len());
    for (scene, split) in &dataset.scenes {
        let file = format!("scenes/{}.json", scene.scene_id);
        save_scene(scene, &dir.join(&file))?;
        entries.push(ManifestEntry {
            scene_id: scene.scene_id.clone(),
            file,
            family: scene.family.clone(),
            split: *split,
        });
    }
    let manifest = Manifest::new(dataset.seed, entries)?;
    manifest.save(&dir.join("manifest.json"))?;
    let mut stats = serde_json::to_vec_pretty(&dataset.stats)?;
    stats.push(b'\n');
    std::fs::write(dir.join("stats.json"), stats)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        GeneratorConfig::default().validate().unwrap();
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn greedy_one_to_one_and_grammar_product() {
        // knife + 3 fruit, and two switches with two lamps.
        let cats = [catalog::cat::KNIFE, catalog::cat::FRUIT, catalog::cat::FRUIT, catalog::cat::FRUIT];
        let centers = [[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let e = bind_relations(&cats, &centers, &["knife-fruit".to_string()]).unwrap();
        assert_eq!(e.len(), 3);

        let cats = [catalog::cat::SWITCH, catalog::cat::SWITCH, catalog::cat::CEILING_LAMP, catalog::cat::CEILING_LAMP];
        let centers = [[0.0; 3], [1.0, 0.0, 0.0], [1.1, 0.0, 0.0], [2.5, 0.0, 0.0]];
        let e = bind_relations(&cats, &centers, &["switch-ceiling-lamp".to_string()]).unwrap();
        // Switch 1 takes lamp 2 first (0.1 m); switch 0 gets the remaining lamp.
        assert_eq!(
            e,
            vec![
                Edge { trigger: 1, responder: 2, type_id: 0 },
                Edge { trigger: 0, responder: 3, type_id: 0 },
            ]
        );
    }

    #[test]
    fn equal_distance_ties_go_to_lower_responder() {
        let cats = [catalog::cat::CEILING_LAMP, catalog::cat::SWITCH, catalog::cat::CEILING_LAMP];
        let centers = [[-1.0, 0.0, 0.0], [0.0; 3], [1.0, 0.0, 0.0]];
        let e = bind_relations(&cats, &centers, &["switch-ceiling-lamp".to_string()]).unwrap();
        assert_eq!(e, vec![Edge { trigger: 1, responder: 0, type_id: 0 }]);
    }

    #[test]
    fn crowded_room_is_unsatisfiable() {
        let mut cfg = GeneratorConfig::default();
        cfg.points_per_object = 16;
        cfg.families[1].groups[2].count = [400, 400];
        let err = generate_scene(&cfg, "bathroom", "x", 1).unwrap_err();
        assert!(matches!(err, IfrError::Unsatisfiable(_)), "{err}");
    }
}
