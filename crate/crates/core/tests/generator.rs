use std::collections::BTreeMap;

use ifr_core::generator::shapes::{separability, Jitter};
use ifr_core::generator::{
    brute_force_assignment, generate_dataset, generate_scene, write_dataset, DatasetSpec, GeneratorConfig,
};
use ifr_core::scene::catalog::{self, cat, Arity};
use ifr_core::scene::{load_scene, save_scene, Manifest, Scene, Split};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> GeneratorConfig {
    GeneratorConfig {
        points_per_object: 64,
        ..GeneratorConfig::default()
    }
}

fn count_of(scene: &Scene, category: u32) -> usize {
    scene.objects.iter().filter(|o| o.category_id == category).count()
}

#[test]
fn catalog_shapes_are_separable() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = GeneratorConfig::default();
    let j = Jitter { stretch: (cfg.stretch[0], cfg.stretch[1]), noise: cfg.noise };
    let s = separability(12, 256, j, &mut rng);
    assert!(s > 0.95, "separability {s}");
}

#[test]
fn same_seed_same_scene_bytes() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    for fam in cfg.family_names() {
        let a = generate_scene(&cfg, &fam, "s", 42).unwrap();
        let b = generate_scene(&cfg, &fam, "s", 42).unwrap();
        assert_eq!(a, b);
        save_scene(&a, &dir.path().join("a.json")).unwrap();
        save_scene(&b, &dir.path().join("b.json")).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("a.pts")).unwrap(),
            std::fs::read(dir.path().join("b.pts")).unwrap()
        );
        assert_ne!(a, generate_scene(&cfg, &fam, "s", 43).unwrap());
    }
}

#[test]
fn four_by_four_stove_matches_min_sum_assignment() {
    let mut cfg = small();
    cfg.families[0].ambiguity.as_mut().unwrap().k = [4, 4];
    for seed in 0..40 {
        let s = generate_scene(&cfg, "kitchen", "k", seed).unwrap();
        let knobs: Vec<usize> = (0..s.n()).filter(|&i| s.objects[i].category_id == cat::KNOB).collect();
        let burners: Vec<usize> = (0..s.n()).filter(|&j| s.objects[j].category_id == cat::BURNER).collect();
        assert_eq!((knobs.len(), burners.len()), (4, 4));
        let tp: Vec<_> = knobs.iter().map(|&i| s.objects[i].center).collect();
        let rp: Vec<_> = burners.iter().map(|&j| s.objects[j].center).collect();
        let best = brute_force_assignment(&tp, &rp).expect("unique optimum");
        for (a, &i) in knobs.iter().enumerate() {
            let row: Vec<usize> = burners.iter().copied().filter(|&j| s.ground_truth.has_edge(i, j)).collect();
            assert_eq!(row, vec![burners[best[a]]], "seed {seed}");
        }
    }
}

#[test]
fn knife_with_three_fruit_gets_three_edges() {
    let mut cfg = small();
    let k = &mut cfg.families[0];
    k.groups[2].count = [1, 1];
    k.groups[3].count = [3, 3];
    let s = generate_scene(&cfg, "kitchen", "k", 5).unwrap();
    let knife = (0..s.n()).find(|&i| s.objects[i].category_id == cat::KNIFE).unwrap();
    let fruit_edges = s.ground_truth.row(knife).iter().filter(|&&b| b).count();
    assert_eq!(fruit_edges, 3);
}

#[test]
fn grammar_soundness_and_configured_counts() {
    let cfg = small();
    let spec = DatasetSpec { train: 80, test: 20, ..Default::default() };
    let d = generate_dataset(&cfg, &spec, 3).unwrap();
    for (scene, _) in &d.scenes {
        let fam = cfg.family(&scene.family).unwrap();
        let mut per_type: BTreeMap<(usize, u32), usize> = BTreeMap::new();
        for e in scene.ground_truth.edges() {
            let ty = catalog::relation_type(e.type_id).unwrap();
            assert!(fam.relation_types.iter().any(|t| t == ty.name));
            assert_eq!(scene.objects[e.trigger].category_id, ty.trigger_category);
            assert_eq!(scene.objects[e.responder].category_id, ty.responder_category);
            *per_type.entry((e.trigger, e.type_id)).or_default() += 1;
        }
        for t in &fam.relation_types {
            let ty = catalog::relation_type_by_name(t).unwrap();
            if ty.arity != Arity::OneToOne {
                continue;
            }
            for i in 0..scene.n() {
                if scene.objects[i].category_id == ty.trigger_category {
                    assert_eq!(per_type.get(&(i, ty.type_id)), Some(&1), "{} object {i}", scene.scene_id);
                }
            }
        }
        for g in &fam.groups {
            let counts: Vec<usize> = g
                .categories
                .iter()
                .map(|c| count_of(scene, catalog::category_by_name(c).unwrap().id))
                .collect();
            for &c in &counts {
                assert!(c >= g.count[0] && c <= g.count[1], "{}: {counts:?} vs {:?}", scene.scene_id, g.count);
            }
            assert!(counts.windows(2).all(|w| w[0] == w[1]));
        }
        if let Some(a) = &fam.ambiguity {
            let k = count_of(scene, catalog::category_by_name(&a.trigger).unwrap().id);
            assert!(k >= a.k[0] && k <= a.k[1]);
        }
    }
}

#[test]
fn dataset_split_sizes_and_proximity_fraction() {
    let cfg = small();
    let spec = DatasetSpec { train: 200, test: 50, ..Default::default() };
    let d = generate_dataset(&cfg, &spec, 7).unwrap();
    assert_eq!(d.scenes.len(), 250);
    assert_eq!(d.scenes.iter().filter(|(_, s)| *s == Split::Train).count(), 200);
    assert_eq!(d.stats.per_split["test"], 50);
    let f = d.stats.ifr_within_half_meter;
    assert!((0.4..=0.7).contains(&f), "within-0.5 m fraction {f}");
}

#[test]
fn hundred_scene_round_trip_preserves_adjacency() {
    let cfg = small();
    let spec = DatasetSpec { train: 80, test: 20, ..Default::default() };
    let d = generate_dataset(&cfg, &spec, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = write_dataset(&d, dir.path()).unwrap();
    assert_eq!(m, Manifest::load(&dir.path().join("manifest.json")).unwrap());
    assert_eq!(m.entries.len(), 100);
    for ((scene, split), entry) in d.scenes.iter().zip(&m.entries) {
        assert_eq!(entry.split, *split);
        let back = load_scene(&dir.path().join(&entry.file)).unwrap();
        assert_eq!(back.ground_truth.adjacency(), scene.ground_truth.adjacency());
        assert_eq!(&back, scene);
    }
    let train = m.load_split(dir.path(), Split::Train).unwrap();
    assert_eq!(train.len(), 80);
}

#[test]
fn family_filters_apply_per_split() {
    let cfg = small();
    let spec = DatasetSpec {
        train: 6,
        test: 4,
        train_families: vec!["bedroom".into()],
        test_families: vec!["living".into(), "kitchen".into()],
    };
    let d = generate_dataset(&cfg, &spec, 1).unwrap();
    for (s, split) in &d.scenes {
        match split {
            Split::Train => assert_eq!(s.family, "bedroom"),
            Split::Test => assert!(s.family == "living" || s.family == "kitchen"),
        }
    }
    let bad = DatasetSpec { train: 1, test: 0, train_families: vec!["attic".into()], ..Default::default() };
    assert!(generate_dataset(&cfg, &bad, 1).is_err());
}
