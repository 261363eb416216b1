use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ifr_core::adaptation::{run_adaptation, selector_registry, AdaptationConfig, BudgetMode, PriorSource};
use ifr_core::env::write_log;
use ifr_core::eval::metrics::MetricsReport;
use ifr_core::eval::render::{curve_csv, table, write_results, ResultRow};
use ifr_core::eval::{ablate_edges, evaluate, method_registry, run_transfer, Evaluation};
use ifr_core::generator::{generate_dataset, write_dataset, DatasetSpec, GeneratorConfig};
use ifr_core::nets::RelationNets;
use ifr_core::rng::{stream, tags};
use ifr_core::scene::{load_scene, Manifest, Scene, Split};
use ifr_core::trainer::{alternate_train, TrainConfig, NETS_FILE};

#[derive(Parser)]
#[command(name = "ifr", version, about = "Interactive learning of inter-object functional relationships")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene dataset.
    Gen(GenArgs),
    /// Train the relation networks and the exploration policy.
    Train(TrainArgs),
    /// Run interactive adaptation on one scene.
    Adapt(AdaptArgs),
    /// Evaluate a method on a dataset split.
    Eval(EvalArgs),
    /// Evaluate on a room family other than the training one.
    Transfer(TransferArgs),
    /// Compare input-edge initializers.
    AblateEdges(EvalArgs),
    /// Write the F1-versus-interactions curve of a method.
    Curve(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator configuration (JSON); defaults to the built-in families.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    /// Comma-separated room families for the training split.
    #[arg(long, value_delimiter = ',')]
    train_families: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    test_families: Vec<String>,
    /// Every kitchen gets a 2x2 or 3x3 knob/burner group.
    #[arg(long)]
    ambiguity_heavy: bool,
    /// Print the effective generator configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training configuration (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    loops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    encoder_points: Option<usize>,
    /// Collect with uniformly random objects instead of the policy.
    #[arg(long)]
    random_explore: bool,
    /// Train only on scenes of this room family.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Checkpoint directory or `nets.ckpt` file.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value = "frac10")]
    mode: String,
    #[arg(long, default_value = "uncertainty")]
    selector: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interaction log (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long, default_value = "ours_final")]
    method: String,
    #[arg(long, default_value = "frac10")]
    budget: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct TransferArgs {
    #[command(flatten)]
    eval: EvalArgs,
    #[arg(long)]
    train_family: String,
    #[arg(long)]
    test_family: String,
    /// Generator configuration the families come from.
    #[arg(long)]
    gen_config: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn generator_config(path: Option<&Path>) -> Result<GeneratorConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(GeneratorConfig::default()),
    }
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => bail!("unknown split `{s}` (expected train or test)"),
    }
}

fn load_split(manifest: &Path, split: Split) -> Result<Vec<Scene>> {
    let m = Manifest::load(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let scenes = m.load_split(dir, split)?;
    if scenes.is_empty() {
        bail!("manifest {} has no {split} scenes", manifest.display());
    }
    Ok(scenes)
}

fn open_nets(ckpt: &Path) -> Result<RelationNets> {
    let file = if ckpt.is_dir() { ckpt.join(NETS_FILE) } else { ckpt.to_path_buf() };
    Ok(RelationNets::open(&file)?)
}

fn adaptation_config(budget: &str) -> Result<AdaptationConfig> {
    let cfg = AdaptationConfig::new(budget.parse::<BudgetMode>()?);
    cfg.validate()?;
    Ok(cfg)
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg = generator_config(a.config.as_deref())?;
    if let Some(p) = a.points {
        cfg.points_per_object = p;
    }
    if a.ambiguity_heavy {
        cfg = cfg.ambiguity_heavy()?;
    }
    if a.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let out = a.out.context("--out is required")?;
    let spec = DatasetSpec {
        train: a.train,
        test: a.test,
        train_families: a.train_families,
        test_families: a.test_families,
    };
    let d = generate_dataset(&cfg, &spec, a.seed)?;
    write_dataset(&d, &out)?;
    println!(
        "wrote {} scenes ({:.1} objects, {:.1} relations per scene) to {}",
        d.scenes.len(),
        d.stats.objects_per_scene,
        d.stats.edges_per_scene,
        out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.budget {
        cfg.budget = v;
    }
    if let Some(v) = a.loops {
        cfg.loops = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.epochs {
        cfg.supervised.epochs = v;
    }
    if let Some(v) = a.encoder_points {
        cfg.net.encoder_points = v;
    }
    if a.random_explore {
        cfg.explorer = "random".into();
    }
    let mut scenes = load_split(&a.manifest, Split::Train)?;
    if let Some(f) = &a.family {
        scenes.retain(|s| &s.family == f);
        if scenes.is_empty() {
            bail!("no training scenes of family `{f}`");
        }
    }
    let out = alternate_train(&cfg, &scenes, Some(&a.out))?;
    for m in &out.history {
        println!(
            "loop {:>2}  steps {:>5}  scenes {:>4}  reward {:>7.3}  val F1 {:.3} / {:.3}",
            m.index, m.steps, m.scenes_visited, m.mean_reward, m.val_f1_frac10, m.val_f1_frac20
        );
    }
    println!("best loop {}; checkpoints in {}", out.best_loop, a.out.display());
    Ok(())
}

fn adapt(a: AdaptArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let nets = open_nets(&a.ckpt)?;
    let cfg = adaptation_config(&a.mode)?;
    let selector = selector_registry().create(&a.selector)?;
    let mut rng = stream(a.seed, tags::EVAL, 0);
    let out = run_adaptation(&scene, &nets, &cfg, selector.as_ref(), PriorSource::Scene, &mut rng)?;
    if let Some(p) = &a.log {
        write_log(fs::File::create(p)?, &out.log)?;
    }
    let mut report = MetricsReport::new(false);
    report.push(&scene.scene_id, &out.prediction, scene.ground_truth.adjacency(), scene.n(), out.interactions())?;
    let n = scene.n();
    let edges: Vec<[usize; 2]> = (0..n * n).filter(|&k| out.prediction[k]).map(|k| [k / n, k % n]).collect();
    let summary = serde_json::json!({
        "scene_id": scene.scene_id,
        "mode": cfg.mode.to_string(),
        "interactions": out.interactions(),
        "order": out.order,
        "edges": edges,
        "scores": report.micro,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_eval(a: &EvalArgs, scenes: &[&Scene]) -> Result<Evaluation> {
    let method = method_registry().create(&a.method)?;
    let nets = match &a.ckpt {
        Some(p) => Some(open_nets(p)?),
        None => None,
    };
    Ok(evaluate(method.as_ref(), scenes, nets.as_ref(), &adaptation_config(&a.budget)?, a.seed)?)
}

fn eval(a: EvalArgs) -> Result<()> {
    let data = load_split(&a.manifest, parse_split(&a.split)?)?;
    let scenes: Vec<&Scene> = data.iter().collect();
    let e = run_eval(&a, &scenes)?;
    let rows = write_results(&a.out, &[(a.method.clone(), &e)], &scenes)?;
    print!("{}", table(&rows));
    Ok(())
}

fn curve(a: EvalArgs) -> Result<()> {
    let data = load_split(&a.manifest, parse_split(&a.split)?)?;
    let scenes: Vec<&Scene> = data.iter().collect();
    let e = run_eval(&a, &scenes)?;
    if let Some(dir) = a.out.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, curve_csv(&e.curve))?;
    println!("wrote {} curve points to {}", e.curve.len(), a.out.display());
    Ok(())
}

fn ablate(a: EvalArgs) -> Result<()> {
    let data = load_split(&a.manifest, parse_split(&a.split)?)?;
    let scenes: Vec<&Scene> = data.iter().collect();
    let Some(ckpt) = &a.ckpt else { bail!("ablate-edges needs --ckpt") };
    let nets = open_nets(ckpt)?;
    let method = method_registry().create(&a.method)?;
    let results = ablate_edges(method.as_ref(), &scenes, &nets, &adaptation_config(&a.budget)?, a.seed)?;
    let labelled: Vec<(String, &Evaluation)> = results.iter().map(|(k, e)| (format!("{}[{k}]", a.method), e)).collect();
    let rows = write_results(&a.out, &labelled, &scenes)?;
    print!("{}", table(&rows));
    Ok(())
}

fn transfer(a: TransferArgs) -> Result<()> {
    let gen = generator_config(a.gen_config.as_deref())?;
    let seen = gen.family(&a.train_family)?.relation_types.clone();
    let mut data = load_split(&a.eval.manifest, parse_split(&a.eval.split)?)?;
    data.retain(|s| s.family == a.test_family);
    if data.is_empty() {
        bail!("no {} scenes of family `{}`", a.eval.split, a.test_family);
    }
    let scenes: Vec<&Scene> = data.iter().collect();
    let method = method_registry().create(&a.eval.method)?;
    let nets = match &a.eval.ckpt {
        Some(p) => Some(open_nets(p)?),
        None => None,
    };
    let cfg = adaptation_config(&a.eval.budget)?;
    let r = run_transfer(method.as_ref(), &a.train_family, &a.test_family, &seen, &scenes, nets.as_ref(), &cfg, a.eval.seed)?;
    fs::create_dir_all(&a.eval.out)?;
    fs::write(a.eval.out.join("transfer.json"), serde_json::to_string_pretty(&r)? + "\n")?;
    let e = Evaluation {
        method: a.eval.method.clone(),
        budget: cfg.mode.to_string(),
        report: r.report.clone(),
        runs: Vec::new(),
        curve: Vec::new(),
    };
    print!("{}", table(&[ResultRow::labelled(&format!("{} {}->{}", a.eval.method, a.train_family, a.test_family), &e)]));
    match r.unseen_recall() {
        Some(v) => println!("unseen-relation recall: {v:.3} ({} of {} edges)", r.unseen_found, r.unseen_edges),
        None => println!("unseen-relation recall: n/a (every relation type was seen in training)"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Adapt(a) => adapt(a),
        Command::Eval(a) => eval(a),
        Command::Transfer(a) => transfer(a),
        Command::AblateEdges(a) => ablate(a),
        Command::Curve(a) => curve(a),
    }
}
