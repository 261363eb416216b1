//! One line per acceptance criterion. Exits non-zero if any criterion fails.
//!
//! Criteria 7–10 and 12 share three full training runs per explorer, so this
//! target takes several minutes.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ifr_core::adaptation::{run_adaptation, select_next, should_stop, AdaptationConfig, BudgetMode, PriorSource, Uncertainty};
use ifr_core::env::reward_of;
use ifr_core::eval::metrics::Confusion;
use ifr_core::eval::render::{table, write_results, ResultRow};
use ifr_core::eval::{ablate_edges, evaluate, method_registry, Evaluation, EDGE_ABLATION_KEYS};
use ifr_core::generator::{generate_dataset, generate_scene, DatasetSpec, GeneratorConfig};
use ifr_core::nets::edges::normalized_adjacency;
use ifr_core::nets::layers::{gcn_layer, NODE_INPUT_DIM};
use ifr_core::nets::{br_forward, init_br, init_sr, sr_forward, NetConfig, RelationNets};
use ifr_core::scene::{Scene, Split};
use ifr_core::trainer::{alternate_train, load_checkpoint, PolicyInput, PolicyNet, SupervisedConfig, TrainConfig};
use ifr_core::BeliefMatrix;
use ifr_tensor::{gradcheck, ParamStore, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];
const POINTS: usize = 64;
const TRAIN_SCENES: usize = 200;
const TEST_SCENES: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(results: &mut Vec<(usize, &'static str, Outcome)>, id: usize, name: &'static str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let o = f();
    let line = format!(
        "criterion {id:>2} {}  {name}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        t.elapsed().as_secs_f64()
    );
    println!("{line}");
    results.push((id, name, o));
}

fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn to_tensor_err(e: ifr_core::IfrError) -> TensorError {
    TensorError::InvalidArgument { op: "forward", msg: e.to_string() }
}

fn block_of(name: &str) -> String {
    name.splitn(3, '.').take(2).collect::<Vec<_>>().join(".")
}

/// Gradient check restricted to the parameters of each block; the rest of
/// `full` is held fixed. Returns the relative error per block.
fn check_blocks<F>(full: &ParamStore, loss: F) -> BTreeMap<String, f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, TensorError>,
{
    let mut blocks: BTreeMap<String, ParamStore> = BTreeMap::new();
    for name in full.names() {
        let sub = blocks.entry(block_of(name)).or_default();
        sub.insert(name, full.get(name).unwrap().clone()).unwrap();
    }
    blocks
        .into_iter()
        .map(|(block, sub)| {
            let report = gradcheck::check(&sub, 1e-6, Some(6), |tape, s| {
                let mut merged = full.clone();
                for name in s.names() {
                    merged.set(name, s.get(name)?.clone())?;
                }
                loss(tape, &merged)
            })
            .unwrap();
            (block, report.relative_error)
        })
        .collect()
}

fn targets(rng: &mut ChaCha8Rng, k: usize) -> Tensor {
    Tensor::new(vec![k * k, 1], (0..k * k).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect()).unwrap()
}

fn merge_worst(acc: &mut BTreeMap<String, f64>, draw: BTreeMap<String, f64>) {
    for (k, v) in draw {
        let e = acc.entry(k).or_insert(0.0);
        *e = e.max(v);
    }
}

fn criterion_1() -> Outcome {
    let mut worst = BTreeMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for draw in 0..20 {
        let store = init_br(draw).unwrap();
        let (k, p) = (3, 6);
        let points = rand_tensor(&mut rng, k * p, 3);
        let t = targets(&mut rng, k);
        merge_worst(
            &mut worst,
            check_blocks(&store, |tape, s| {
                let (_, probs) = br_forward(tape, s, &points, p).map_err(to_tensor_err)?;
                let l = tape.bce(probs, &t)?;
                Ok(tape.mean_all(l))
            }),
        );

        let store = init_sr(draw).unwrap();
        let k = rng.random_range(2..=5);
        let x = rand_tensor(&mut rng, k, NODE_INPUT_DIM);
        let w = Tensor::new(vec![k, k], (0..k * k).map(|_| rng.random::<f64>()).collect()).unwrap();
        let adj = normalized_adjacency(&w).unwrap();
        let t = targets(&mut rng, k);
        merge_worst(
            &mut worst,
            check_blocks(&store, |tape, s| {
                let (probs, _) = sr_forward(tape, s, &x, &adj).map_err(to_tensor_err)?;
                let l = tape.bce(probs, &t)?;
                Ok(tape.mean_all(l))
            }),
        );

        let pol = PolicyNet::new(draw).unwrap();
        let k = rng.random_range(2..=5);
        let input = PolicyInput {
            node_input: rand_tensor(&mut rng, k, NODE_INPUT_DIM),
            adj: normalized_adjacency(&Tensor::new(vec![k, k], (0..k * k).map(|_| rng.random::<f64>()).collect()).unwrap())
                .unwrap(),
            available: vec![true; k + 1],
        };
        let action = rng.random_range(0..=k);
        merge_worst(
            &mut worst,
            check_blocks(&pol.store, |tape, s| {
                let (logp, v) = PolicyNet::forward(tape, s, &input).map_err(to_tensor_err)?;
                let a = tape.pick(logp, &[action])?;
                let v2 = tape.square(v);
                let l = tape.sub(v2, a)?;
                let p = tape.exp(logp);
                let h = tape.mul(p, logp)?;
                let h = tape.sum(h);
                tape.add(l, h)
            }),
        );
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    let listed: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    outcome(max < 1e-4, format!("20 draws, {} blocks, worst rel err {max:.2e} ({})", worst.len(), listed.join(", ")))
}

/// Per-node graph convolution with explicit loops.
fn gcn_reference(w: &[f64], n: usize, h: &Tensor, theta: &Tensor) -> Vec<f64> {
    let weight = |j: usize, i: usize| if i == j { 1.0 } else { w[j * n + i] };
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| weight(j, i)).sum()).collect();
    let (_, c) = h.dims2().unwrap();
    let (_, o) = theta.dims2().unwrap();
    let mut out = vec![0.0; n * o];
    for i in 0..n {
        for j in 0..n {
            let coef = weight(j, i) / (d[i] * d[j]).sqrt();
            for m in 0..o {
                let hj: f64 = (0..c).map(|k| h.get2(j, k) * theta.get2(k, m)).sum();
                out[i * o + m] += coef * hj;
            }
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        let mut w: Vec<f64> = (0..n * n).map(|_| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 }).collect();
        for i in 0..n {
            w[i * n + i] = 0.0;
        }
        let h = rand_tensor(&mut rng, n, 5);
        let theta = rand_tensor(&mut rng, 5, 3);
        let mut store = ParamStore::new();
        store.insert("g", theta.clone()).unwrap();
        let adj = normalized_adjacency(&Tensor::new(vec![n, n], w.clone()).unwrap()).unwrap();
        let mut tape = Tape::inference();
        let a = tape.constant(adj);
        let hv = tape.constant(h.clone());
        let out = gcn_layer(&mut tape, &store, "g", a, hv).unwrap();
        for (x, y) in tape.value(out).data().iter().zip(gcn_reference(&w, n, &h, &theta)) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(worst < 1e-10, format!("100 graphs, max abs diff {worst:.2e}"))
}

fn criterion_3(scenes: &[&Scene]) -> Outcome {
    let nets = RelationNets::new(NetConfig::default(), 3).unwrap();
    let cfg = AdaptationConfig::new(BudgetMode::Fraction(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut imperfect = Vec::new();
    for s in scenes {
        let out = run_adaptation(s, &nets, &cfg, &Uncertainty, PriorSource::Scene, &mut rng).unwrap();
        let f1 = Confusion::from_graphs(&out.prediction, s.ground_truth.adjacency()).unwrap().f1(false);
        if f1 != 1.0 || out.interactions() != s.n() {
            imperfect.push(s.scene_id.clone());
        }
    }
    outcome(imperfect.is_empty(), format!("{} scenes, {} with F1 != 1 {imperfect:?}", scenes.len(), imperfect.len()))
}

fn brute_select(v: &[f64], n: usize, interacted: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        if interacted[i] {
            continue;
        }
        let u = (0..n).map(|j| v[i * n + j].min(1.0 - v[i * n + j])).fold(f64::NEG_INFINITY, f64::max);
        match best {
            Some((_, b)) if b >= u => {}
            _ => best = Some((i, u)),
        }
    }
    best.map(|(i, _)| i)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut mismatches = 0;
    let mut stop_mismatches = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=10);
        let v: Vec<f64> = (0..n * n)
            .map(|_| if case % 2 == 0 { rng.random_range(0..=10) as f64 / 10.0 } else { rng.random::<f64>() })
            .collect();
        let interacted: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let b = BeliefMatrix::new(n, v.clone()).unwrap();
        if select_next(&b, &interacted).ok() != brute_select(&v, n, &interacted) {
            mismatches += 1;
        }
        let confident: Vec<f64> = v.iter().map(|&x| if x < 0.5 { x * 0.11 } else { 1.0 - (1.0 - x) * 0.11 }).collect();
        let c = BeliefMatrix::new(n, confident.clone()).unwrap();
        let want = confident.iter().all(|&x| x.min(1.0 - x) < 0.05);
        if should_stop(&c, 0.05) != want {
            stop_mismatches += 1;
        }
    }
    let at = |x: f64| should_stop(&BeliefMatrix::new(2, vec![0.0, 1.0, x, 0.0]).unwrap(), 0.05);
    let boundary = !at(0.05) && at(0.0499999) && !at(0.5) && at(1.0);
    outcome(
        mismatches == 0 && stop_mismatches == 0 && boundary,
        format!("1000 beliefs: {mismatches} selection and {stop_mismatches} stop mismatches; strict boundary at 0.05: {boundary}"),
    )
}

fn reward_reference(row: &[f64], effects: &[bool]) -> f64 {
    let mut m = 0.0f64;
    for (r, &e) in row.iter().zip(effects) {
        let target = if e { 1.0 } else { 0.0 };
        m = m.max((r - target).abs());
    }
    2.0 * m + if effects.contains(&true) { 1.0 } else { 0.0 } - 1.0
}

fn criterion_5() -> Outcome {
    let b = |v: Vec<f64>| BeliefMatrix::new(2, v).unwrap();
    let cases = [
        (b(vec![0.0, 0.0, 0.3, 0.3]), vec![false, false], -1.0),
        (b(vec![1.0, 0.5, 0.3, 0.3]), vec![true, true], 1.0),
        (b(vec![1.0, 0.0, 0.3, 0.3]), vec![false, false], 1.0),
    ];
    let analytic = cases.iter().all(|(belief, e, want)| reward_of(belief, 0, e).unwrap() == *want);
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut bad = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let v: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
        let i = rng.random_range(0..n);
        let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let got = reward_of(&BeliefMatrix::new(n, v.clone()).unwrap(), i, &e).unwrap();
        if got != reward_reference(&v[i * n..(i + 1) * n], &e) || !(-1.0..=2.0).contains(&got) {
            bad += 1;
        }
    }
    outcome(analytic && bad == 0, format!("analytic cases {}; {bad} of 100 random cases differ", if analytic { "match" } else { "differ" }))
}

/// Pearson correlation of the prediction and truth indicator vectors.
fn pearson_mcc(tp: u64, fp: u64, fn_: u64, tn: u64) -> f64 {
    let mut pairs = Vec::new();
    pairs.extend(std::iter::repeat_n((1.0, 1.0), tp as usize));
    pairs.extend(std::iter::repeat_n((1.0, 0.0), fp as usize));
    pairs.extend(std::iter::repeat_n((0.0, 1.0), fn_ as usize));
    pairs.extend(std::iter::repeat_n((0.0, 0.0), tn as usize));
    let n = pairs.len() as f64;
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let cov: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let vx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let vy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn criterion_6() -> Outcome {
    let hand = Confusion { tp: 2, fp: 1, fn_: 1, tn: 6 }.mcc();
    let hand_ok = (hand - 11.0 / 21.0).abs() < 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut bad = 0;
    for _ in 0..1000 {
        let mut draw = || if rng.random_bool(0.1) { 0 } else { rng.random_range(0..60) };
        let (tp, fp, fn_, tn) = (draw(), draw(), draw(), draw());
        if tp + fp + fn_ + tn == 0 {
            continue;
        }
        let c = Confusion { tp, fp, fn_, tn };
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        if !(close(c.mcc(), pearson_mcc(tp, fp, fn_, tn)) && close(c.precision(false), p) && close(c.recall(), r) && close(c.f1(false), f)) {
            bad += 1;
        }
    }
    outcome(hand_ok && bad == 0, format!("hand case MCC {hand:.6} (11/21 = {:.6}); {bad} of 1000 random confusions differ", 11.0 / 21.0))
}

fn tiny_train_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig { seed, budget: 30, loops: 2, ..TrainConfig::default() };
    cfg.net.encoder_points = 16;
    cfg.supervised = SupervisedConfig { epochs: 1, ..SupervisedConfig::default() };
    cfg
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_11() -> Outcome {
    let cfg = GeneratorConfig { points_per_object: 16, ..GeneratorConfig::default() };
    let data = generate_dataset(&cfg, &DatasetSpec { train: 12, test: 4, ..DatasetSpec::default() }, 11).unwrap();
    let train: Vec<Scene> = data.scenes.iter().filter(|(_, s)| *s == Split::Train).map(|(s, _)| s.clone()).collect();
    let test: Vec<&Scene> = data.scenes.iter().filter(|(_, s)| *s == Split::Test).map(|(s, _)| s).collect();
    let tmp = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        alternate_train(&tiny_train_config(7), &train, Some(&dir.join("ckpt"))).unwrap();
        let (nets, _) = load_checkpoint(&dir.join("ckpt")).unwrap();
        let method = method_registry().create("ours_final").unwrap();
        let e = evaluate(method.as_ref(), &test, Some(&nets), &AdaptationConfig::new(BudgetMode::Fraction(0.2)), 7).unwrap();
        write_results(&dir.join("eval"), &[("ours_final".to_string(), &e)], &test).unwrap();
        snapshots.push(dir_bytes(&dir));
    }
    let differing: Vec<&String> = snapshots[0].keys().filter(|k| snapshots[1].get(*k) != snapshots[0].get(*k)).collect();
    let same_set = snapshots[0].len() == snapshots[1].len();
    outcome(
        same_set && differing.is_empty(),
        format!("{} files compared (checkpoints, metrics, results), {} differ {differing:?}", snapshots[0].len(), differing.len()),
    )
}

struct SeedRun {
    test: Vec<Scene>,
    ambiguous: Vec<Scene>,
    ours: RelationNets,
    random_explore: RelationNets,
}

fn split(data: &[(Scene, Split)], which: Split) -> Vec<Scene> {
    data.iter().filter(|(_, s)| *s == which).map(|(s, _)| s.clone()).collect()
}

fn full_train_config(seed: u64, explorer: &str) -> TrainConfig {
    TrainConfig { seed, explorer: explorer.into(), ..TrainConfig::default() }
}

fn seed_run(seed: u64) -> SeedRun {
    let gen = GeneratorConfig { points_per_object: POINTS, ..GeneratorConfig::default() };
    let data = generate_dataset(&gen, &DatasetSpec { train: TRAIN_SCENES, test: TEST_SCENES, ..DatasetSpec::default() }, seed).unwrap();
    let train = split(&data.scenes, Split::Train);
    let heavy = gen.ambiguity_heavy().unwrap();
    let ambiguous = (0..TEST_SCENES)
        .map(|k| generate_scene(&heavy, "kitchen", &format!("amb-{seed}-{k}"), 1_000_000 + 1000 * seed + k as u64).unwrap())
        .collect();
    let t = Instant::now();
    let ours = alternate_train(&full_train_config(seed, "policy"), &train, None).unwrap().nets;
    eprintln!("  seed {seed}: policy-explore training {:.0}s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let random_explore = alternate_train(&full_train_config(seed, "random"), &train, None).unwrap().nets;
    eprintln!("  seed {seed}: random-explore training {:.0}s", t.elapsed().as_secs_f64());
    SeedRun { test: split(&data.scenes, Split::Test), ambiguous, ours, random_explore }
}

fn f1_of(method: &str, scenes: &[Scene], nets: Option<&RelationNets>, mode: BudgetMode, seed: u64) -> f64 {
    let m = method_registry().create(method).unwrap();
    let refs: Vec<&Scene> = scenes.iter().collect();
    evaluate(m.as_ref(), &refs, nets, &AdaptationConfig::new(mode), seed).unwrap().report.micro.f1
}

#[derive(Default)]
struct Trend {
    prior_only: Vec<f64>,
    random10: Vec<f64>,
    ours10: Vec<f64>,
    ours20: Vec<f64>,
    random_adapt10_amb: Vec<f64>,
    ours10_amb: Vec<f64>,
    random_explore20: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    format!("{:.3} [{}]", mean(v), v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results = Vec::new();
    run(&mut results, 1, "gradient correctness", criterion_1);
    run(&mut results, 2, "graph convolution oracle", criterion_2);

    let gen = GeneratorConfig { points_per_object: POINTS, ..GeneratorConfig::default() };
    let data = generate_dataset(&gen, &DatasetSpec { train: 0, test: TEST_SCENES, ..DatasetSpec::default() }, 0).unwrap();
    let exhaustive_scenes: Vec<&Scene> = data.scenes.iter().map(|(s, _)| s).collect();
    run(&mut results, 3, "exhaustive interaction gives F1 = 1", || criterion_3(&exhaustive_scenes));
    run(&mut results, 4, "selection and stop rules", criterion_4);
    run(&mut results, 5, "reward", criterion_5);
    run(&mut results, 6, "metrics", criterion_6);

    eprintln!("training {} seeds x 2 explorers ({TRAIN_SCENES} train / {TEST_SCENES} test scenes)", SEEDS.len());
    let t = Instant::now();
    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| seed_run(s)).collect();
    let train_secs = t.elapsed().as_secs_f64();
    let mut tr = Trend::default();
    for (r, &seed) in runs.iter().zip(&SEEDS) {
        let f10 = BudgetMode::Fraction(0.1);
        let f20 = BudgetMode::Fraction(0.2);
        tr.prior_only.push(f1_of("prior_only", &r.test, Some(&r.ours), f10, seed));
        tr.random10.push(f1_of("random", &r.test, None, f10, seed));
        tr.ours10.push(f1_of("ours_final", &r.test, Some(&r.ours), f10, seed));
        tr.ours20.push(f1_of("ours_final", &r.test, Some(&r.ours), f20, seed));
        tr.random_explore20.push(f1_of("abla_random_explore", &r.test, Some(&r.random_explore), f20, seed));
        tr.ours10_amb.push(f1_of("ours_final", &r.ambiguous, Some(&r.ours), f10, seed));
        tr.random_adapt10_amb.push(f1_of("abla_random_adapt", &r.ambiguous, Some(&r.ours), f10, seed));
    }
    eprintln!("training took {train_secs:.0}s for all seeds");

    run(&mut results, 7, "more interactions help", || {
        let (p, a, b) = (mean(&tr.prior_only), mean(&tr.ours10), mean(&tr.ours20));
        outcome(
            b >= a && a >= p && b >= p,
            format!("F1 prior_only {}, ours 10% {}, ours 20% {}", fmt(&tr.prior_only), fmt(&tr.ours10), fmt(&tr.ours20)),
        )
    });
    run(&mut results, 8, "prior beats random", || {
        let margin = mean(&tr.prior_only) - mean(&tr.random10);
        outcome(
            margin >= 0.15,
            format!("F1 prior_only {}, random 10% {}, margin {margin:.3} (need >= 0.15)", fmt(&tr.prior_only), fmt(&tr.random10)),
        )
    });
    run(&mut results, 9, "uncertainty selection beats random selection", || {
        let margin = mean(&tr.ours10_amb) - mean(&tr.random_adapt10_amb);
        outcome(
            margin > 0.0,
            format!(
                "ambiguity-heavy F1 ours 10% {}, random adapt 10% {}, margin {margin:.3} (soft target 0.05 {})",
                fmt(&tr.ours10_amb),
                fmt(&tr.random_adapt10_amb),
                if margin >= 0.05 { "met" } else { "missed" }
            ),
        )
    });
    run(&mut results, 10, "learned exploration beats random exploration", || {
        let margin = mean(&tr.ours20) - mean(&tr.random_explore20);
        outcome(
            margin >= 0.0,
            format!("F1 at 20%: ours {}, random explore {}, margin {margin:.3}", fmt(&tr.ours20), fmt(&tr.random_explore20)),
        )
    });
    run(&mut results, 11, "determinism", criterion_11);
    run(&mut results, 12, "edge initialization ablation", || {
        let r = &runs[0];
        let scenes: Vec<&Scene> = r.test.iter().collect();
        let method = method_registry().create("ours_final").unwrap();
        let evals = ablate_edges(method.as_ref(), &scenes, &r.ours, &AdaptationConfig::new(BudgetMode::Fraction(0.1)), 0).unwrap();
        let rows: Vec<ResultRow> = evals.iter().map(|(k, e): &(String, Evaluation)| ResultRow::labelled(k, e)).collect();
        print!("{}", table(&rows));
        let keys: Vec<&str> = evals.iter().map(|(k, _)| k.as_str()).collect();
        let finite = rows.iter().all(|r| [r.micro.precision, r.micro.recall, r.micro.f1, r.micro.mcc].iter().all(|v| v.is_finite()));
        outcome(keys == EDGE_ABLATION_KEYS && finite, format!("{} initializers evaluated, all scores finite: {finite}", keys.len()))
    });

    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.pass).map(|(id, _, _)| *id).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s{}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
